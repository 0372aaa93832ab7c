//! Instance directories: `A.csv`, `b.csv`, `meta.txt` and, once solved,
//! `reference.csv`. Regression instances also carry `x_true.csv`;
//! classification instances keep features in `A.csv` and labels in `b.csv`.

use std::path::Path;

use nalgebra::DVector;

use super::csv::{format_real, matrix_from_csv, matrix_to_csv, vector_from_csv, vector_to_csv};
use super::kv::KvMap;
use crate::error::{Error, Result};
use crate::model::CompositeProblem;
use crate::problems::{
    ClassificationInstance, ElasticNetInstance, GroupLassoInstance, ReferenceSolution, Variant,
};
use crate::prox::GroupPartition;

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    ElasticNet(ElasticNetInstance),
    GroupLasso(GroupLassoInstance),
    Classification(ClassificationInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::ElasticNet(_) => "elastic-net",
            Instance::GroupLasso(_) => "group-lasso",
            Instance::Classification(_) => "classification",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::ElasticNet(i) => i.seed,
            Instance::GroupLasso(i) => i.seed,
            Instance::Classification(i) => i.seed,
        }
    }

    /// The composite problem of a regression instance.
    pub fn problem(&self) -> Result<CompositeProblem> {
        match self {
            Instance::ElasticNet(i) => i.problem(),
            Instance::GroupLasso(i) => i.problem(),
            Instance::Classification(_) => Err(Error::Unsupported(
                "classification instances define their problem per split".into(),
            )),
        }
    }

    pub fn meta(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("problem", self.kind());
        kv.insert("seed", self.seed());
        match self {
            Instance::ElasticNet(i) => {
                kv.insert("n", i.a.nrows());
                kv.insert("d", i.a.ncols());
                kv.insert("variant", i.variant);
                kv.insert("cond_target", format_real(i.cond_target));
                kv.insert("lambda1", format_real(i.lambda1));
                kv.insert("lambda2", format_real(i.lambda2));
            }
            Instance::GroupLasso(i) => {
                kv.insert("n", i.a.nrows());
                kv.insert("d", i.a.ncols());
                kv.insert("variant", i.variant);
                kv.insert("cond_target", format_real(i.cond_target));
                kv.insert("lambda2", format_real(i.lambda2));
                kv.insert("lambda_g", format_real(i.lambda_g));
                kv.insert("partition", encode_partition(&i.partition));
                kv.insert("planted_groups", join(&i.planted_support));
            }
            Instance::Classification(i) => {
                kv.insert("n", i.x.nrows());
                kv.insert("d", i.x.ncols());
                kv.insert("classes", i.classes);
            }
        }
        kv
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn split_list(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad index '{t}' in list")))
        })
        .collect()
}

/// `contiguous:<size>` when the blocks are consecutive and equal, otherwise
/// groups separated by `|` with indices separated by `;`.
pub fn encode_partition(p: &GroupPartition) -> String {
    if let Some(first) = p.groups().first() {
        let size = first.len();
        if let Ok(c) = GroupPartition::contiguous(p.dimension(), size) {
            if &c == p {
                return format!("contiguous:{size}");
            }
        }
    }
    p.groups().iter().map(|g| join(g)).collect::<Vec<_>>().join("|")
}

pub fn decode_partition(s: &str, dimension: usize) -> Result<GroupPartition> {
    if let Some(size) = s.strip_prefix("contiguous:") {
        let size = size
            .parse()
            .map_err(|_| Error::Input(format!("bad group size '{size}'")))?;
        return GroupPartition::contiguous(dimension, size);
    }
    let groups = s.split('|').map(split_list).collect::<Result<Vec<_>>>()?;
    GroupPartition::new(dimension, groups)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_shape(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!("{what}: meta says {expected}, files hold {got}")));
    }
    Ok(())
}

/// Writes the instance (and the reference, if given) into `dir`, which must
/// already exist.
pub fn write_instance_dir(dir: &Path, inst: &Instance, reference: Option<&ReferenceSolution>) -> Result<()> {
    let mut meta = inst.meta();
    match inst {
        Instance::ElasticNet(i) => {
            write_text(&dir.join("A.csv"), &matrix_to_csv(&i.a))?;
            write_text(&dir.join("b.csv"), &vector_to_csv(&i.b))?;
            write_text(&dir.join("x_true.csv"), &vector_to_csv(&i.x_true))?;
        }
        Instance::GroupLasso(i) => {
            write_text(&dir.join("A.csv"), &matrix_to_csv(&i.a))?;
            write_text(&dir.join("b.csv"), &vector_to_csv(&i.b))?;
            write_text(&dir.join("x_true.csv"), &vector_to_csv(&i.x_true))?;
        }
        Instance::Classification(i) => {
            write_text(&dir.join("A.csv"), &matrix_to_csv(&i.x))?;
            let labels = DVector::from_iterator(i.labels.len(), i.labels.iter().map(|&y| y as f64));
            write_text(&dir.join("b.csv"), &vector_to_csv(&labels))?;
        }
    }
    if let Some(r) = reference {
        meta.insert("reference_f_star", format_real(r.f_star));
        meta.insert("reference_residual", format_real(r.residual));
        meta.insert("reference_method", &r.method);
        write_text(&dir.join("reference.csv"), &vector_to_csv(&r.x_star))?;
    }
    write_text(&dir.join("meta.txt"), &meta.to_text())
}

/// Reads an instance directory; the reference is `None` when
/// `reference.csv` is absent.
pub fn read_instance_dir(dir: &Path) -> Result<(Instance, Option<ReferenceSolution>)> {
    let meta = KvMap::parse(&read_text(&dir.join("meta.txt"))?)?;
    let a = matrix_from_csv(&read_text(&dir.join("A.csv"))?)?;
    let b = vector_from_csv(&read_text(&dir.join("b.csv"))?)?;
    let n: usize = meta.require_parsed("n")?;
    let d: usize = meta.require_parsed("d")?;
    check_shape("rows of A", n, a.nrows())?;
    check_shape("columns of A", d, a.ncols())?;
    check_shape("length of b", n, b.len())?;
    let seed = meta.require_parsed("seed")?;
    let regression_truth = || -> Result<DVector<f64>> {
        let x = vector_from_csv(&read_text(&dir.join("x_true.csv"))?)?;
        check_shape("length of x_true", d, x.len())?;
        Ok(x)
    };
    let instance = match meta.require("problem")? {
        "elastic-net" => Instance::ElasticNet(ElasticNetInstance {
            x_true: regression_truth()?,
            a,
            b,
            lambda1: meta.require_parsed("lambda1")?,
            lambda2: meta.require_parsed("lambda2")?,
            seed,
            variant: meta.require_parsed::<Variant>("variant")?,
            cond_target: meta.require_parsed("cond_target")?,
        }),
        "group-lasso" => Instance::GroupLasso(GroupLassoInstance {
            x_true: regression_truth()?,
            a,
            b,
            lambda2: meta.require_parsed("lambda2")?,
            lambda_g: meta.require_parsed("lambda_g")?,
            partition: decode_partition(meta.require("partition")?, d)?,
            planted_support: split_list(meta.require("planted_groups")?)?,
            seed,
            variant: meta.require_parsed::<Variant>("variant")?,
            cond_target: meta.require_parsed("cond_target")?,
        }),
        "classification" => {
            let classes: usize = meta.require_parsed("classes")?;
            let labels = b
                .iter()
                .map(|&y| {
                    if y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes {
                        Ok(y as usize)
                    } else {
                        Err(Error::Input(format!("bad label {y} for {classes} classes")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Instance::Classification(ClassificationInstance {
                x: a,
                labels,
                classes,
                seed,
            })
        }
        other => return Err(Error::Input(format!("unknown problem '{other}' in meta.txt"))),
    };
    let reference_path = dir.join("reference.csv");
    let reference = if reference_path.exists() {
        let x_star = vector_from_csv(&read_text(&reference_path)?)?;
        check_shape("length of reference", d, x_star.len())?;
        Some(ReferenceSolution {
            x_star,
            f_star: meta.require_parsed("reference_f_star")?,
            residual: meta.require_parsed("reference_residual")?,
            method: meta.require("reference_method")?.to_string(),
        })
    } else {
        None
    };
    Ok((instance, reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_encoding() {
        let p = GroupPartition::contiguous(6, 2).unwrap();
        assert_eq!(encode_partition(&p), "contiguous:2");
        assert_eq!(decode_partition("contiguous:2", 6).unwrap(), p);
        let q = GroupPartition::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let text = encode_partition(&q);
        assert_eq!(text, "0;2|1;3");
        assert_eq!(decode_partition(&text, 4).unwrap(), q);
        assert!(decode_partition("0;1|1", 2).is_err());
    }
}
