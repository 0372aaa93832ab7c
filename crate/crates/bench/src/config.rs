//! Run configuration. Values come from built-in defaults, then a flat
//! `key=value` file, then command-line flags, each layer overriding the one
//! before. The merged map is what gets echoed into output directories.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use proxnag_core::io::KvMap;
use proxnag_core::problems::Variant;
use proxnag_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ElasticNet,
    GroupLasso,
    SoftmaxL1,
    SoftmaxGroup,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::ElasticNet => "elastic-net",
            ProblemKind::GroupLasso => "group-lasso",
            ProblemKind::SoftmaxL1 => "softmax-l1",
            ProblemKind::SoftmaxGroup => "softmax-group",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, ProblemKind::ElasticNet | ProblemKind::GroupLasso)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "elastic-net" => ProblemKind::ElasticNet,
            "group-lasso" => ProblemKind::GroupLasso,
            "softmax-l1" => ProblemKind::SoftmaxL1,
            "softmax-group" => ProblemKind::SoftmaxGroup,
            other => {
                return Err(Error::Config(format!(
                    "unknown problem '{other}' (expected elastic-net, group-lasso, softmax-l1 or softmax-group)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverName {
    Ista,
    Fista,
    ChambollePock,
    ProxNagGs,
    ProxSgd,
    StochasticProxNagGs,
}

impl SolverName {
    pub const DETERMINISTIC: [SolverName; 4] = [
        SolverName::Ista,
        SolverName::Fista,
        SolverName::ChambollePock,
        SolverName::ProxNagGs,
    ];
    pub const STOCHASTIC: [SolverName; 2] = [SolverName::ProxSgd, SolverName::StochasticProxNagGs];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverName::Ista => "ista",
            SolverName::Fista => "fista",
            SolverName::ChambollePock => "chambolle-pock",
            SolverName::ProxNagGs => "prox-naggs",
            SolverName::ProxSgd => "prox-sgd",
            SolverName::StochasticProxNagGs => "stochastic-prox-naggs",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, SolverName::ProxSgd | SolverName::StochasticProxNagGs)
    }
}

impl fmt::Display for SolverName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ista" => SolverName::Ista,
            "fista" => SolverName::Fista,
            "chambolle-pock" | "cp" => SolverName::ChambollePock,
            "prox-naggs" => SolverName::ProxNagGs,
            "prox-sgd" => SolverName::ProxSgd,
            "stochastic-prox-naggs" => SolverName::StochasticProxNagGs,
            other => return Err(Error::Config(format!("unknown solver '{other}'"))),
        })
    }
}

/// `μ̂` either as an absolute value or as a multiple of `L` (`L`, `0.5L`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuHat {
    Absolute(f64),
    TimesL(f64),
}

impl MuHat {
    pub fn resolve(self, l: f64) -> f64 {
        match self {
            MuHat::Absolute(v) => v,
            MuHat::TimesL(r) => r * l,
        }
    }
}

impl FromStr for MuHat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad mu_hat '{s}' (expected a number, L, or e.g. 0.5L)"));
        let value = if let Some(ratio) = s.strip_suffix('L') {
            let r = if ratio.is_empty() { 1.0 } else { ratio.parse().map_err(|_| bad())? };
            MuHat::TimesL(r)
        } else {
            MuHat::Absolute(s.parse().map_err(|_| bad())?)
        };
        let v = match value {
            MuHat::Absolute(v) | MuHat::TimesL(v) => v,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(bad());
        }
        Ok(value)
    }
}

impl fmt::Display for MuHat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuHat::Absolute(v) => write!(f, "{v}"),
            MuHat::TimesL(r) if *r == 1.0 => f.write_str("L"),
            MuHat::TimesL(r) => write!(f, "{r}L"),
        }
    }
}

/// Which subcommand a configuration is for; a few defaults differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Solve,
    Certify,
    Sweep,
}

/// Built-in defaults as a key/value map.
pub fn defaults(cmd: Command) -> KvMap {
    let mut kv = KvMap::new();
    let pairs: &[(&str, &str)] = &[
        ("problem", "elastic-net"),
        ("variant", "easy"),
        ("seeds", "0,1,2,3,4"),
        ("gap_tol", "1e-6"),
        ("out", "runs"),
        ("force", "false"),
        ("timing", "false"),
        ("cond_target", "1000"),
        ("s_max", "3"),
        ("group_size", "10"),
        ("active_groups", "8"),
        ("classes", "3"),
        ("separation", "3"),
        ("split", "0.8,0.1,0.1"),
        ("epochs", "10"),
        ("batch_size", "32"),
        ("lambda1_grid", "1e-4,1e-3"),
    ];
    for (k, v) in pairs {
        kv.insert(*k, *v);
    }
    match cmd {
        Command::Certify => {
            kv.insert("max_iter", "2000");
            kv.insert("mu_hat", "L");
            kv.insert("alpha", "1");
            kv.insert("variant", "hard");
            kv.insert("solver", "prox-naggs");
        }
        Command::Gen | Command::Solve | Command::Sweep => {
            kv.insert("max_iter", "20000");
        }
    }
    kv
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub variant: Variant,
    /// `None` runs every solver applicable to the problem.
    pub solver: Option<SolverName>,
    pub seeds: Vec<u64>,
    /// `None` selects `μ̂` by the tuning grid.
    pub mu_hat: Option<MuHat>,
    /// `None` selects `α` by the tuning grid.
    pub alpha: Option<f64>,
    /// Step size as a multiple of `1/L` for ISTA, FISTA and Prox-SGD;
    /// `None` selects it by the tuning grid (deterministic) or uses `1/L`.
    pub eta_l: Option<f64>,
    pub max_iter: usize,
    pub gap_tol: f64,
    pub out: PathBuf,
    pub force: bool,
    pub timing: bool,
    pub instances: Option<PathBuf>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub cond_target: f64,
    pub s_max: f64,
    pub lambda1: Option<f64>,
    /// `None` resolves to 0.1 for regression and 1e-4 for softmax problems.
    pub lambda2: Option<f64>,
    pub lambda_g: Option<f64>,
    pub group_size: usize,
    pub active_groups: usize,
    pub classes: usize,
    pub separation: f64,
    pub split: (f64, f64, f64),
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda1_grid: Vec<f64>,
    /// Explicit Lyapunov weight `c`; `None` uses the interval midpoint.
    pub c: Option<f64>,
}

const KNOWN_KEYS: &[&str] = &[
    "problem",
    "variant",
    "solver",
    "seeds",
    "mu_hat",
    "alpha",
    "eta",
    "max_iter",
    "gap_tol",
    "out",
    "force",
    "timing",
    "instances",
    "n",
    "d",
    "cond_target",
    "s_max",
    "lambda1",
    "lambda2",
    "lambda_g",
    "group_size",
    "active_groups",
    "classes",
    "separation",
    "split",
    "epochs",
    "batch_size",
    "lambda1_grid",
    "c",
];

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("bad entry '{t}' in {key}")))
        })
        .collect()
}

/// `0,1,2` or a half-open range `0..5`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| Error::Config(format!("bad seed range '{s}'")))?;
        let hi: u64 = hi.trim().parse().map_err(|_| Error::Config(format!("bad seed range '{s}'")))?;
        (lo..hi).collect()
    } else {
        parse_list("seeds", s)?
    };
    if seeds.is_empty() {
        return Err(Error::Config("seed list must be nonempty".into()));
    }
    Ok(seeds)
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Input(msg) => Error::Config(msg),
        other => other,
    }
}

impl RunConfig {
    /// Interprets a merged map. Unknown keys are rejected so typos surface.
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        if let Some((k, _)) = kv.iter().find(|(k, _)| !KNOWN_KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown configuration key '{k}'")));
        }
        let get = |k: &str| kv.get(k).filter(|v| !v.is_empty());
        let parsed = |k: &str| -> Result<Option<f64>> { kv.get_parsed::<f64>(k).map_err(cfg_err) };
        let req = |k: &str| -> Result<f64> { kv.require_parsed::<f64>(k).map_err(cfg_err) };
        let req_usize = |k: &str| -> Result<usize> { kv.require_parsed::<usize>(k).map_err(cfg_err) };
        let flag = |k: &str| -> Result<bool> { Ok(kv.get_parsed::<bool>(k).map_err(cfg_err)?.unwrap_or(false)) };
        let split: Vec<f64> = parse_list("split", kv.require("split").map_err(cfg_err)?)?;
        if split.len() != 3 {
            return Err(Error::Config("split needs three fractions".into()));
        }
        let cfg = RunConfig {
            problem: kv.require("problem").map_err(cfg_err)?.parse()?,
            variant: kv.require("variant").map_err(cfg_err)?.parse().map_err(cfg_err)?,
            solver: get("solver").filter(|s| *s != "all").map(str::parse).transpose()?,
            seeds: parse_seeds(kv.require("seeds").map_err(cfg_err)?)?,
            mu_hat: get("mu_hat").map(str::parse).transpose()?,
            alpha: get("alpha").map(|_| parsed("alpha")).transpose()?.flatten(),
            eta_l: get("eta").map(|_| parsed("eta")).transpose()?.flatten(),
            max_iter: req_usize("max_iter")?,
            gap_tol: req("gap_tol")?,
            out: PathBuf::from(kv.require("out").map_err(cfg_err)?),
            force: flag("force")?,
            timing: flag("timing")?,
            instances: get("instances").map(PathBuf::from),
            n: kv.get_parsed("n").map_err(cfg_err)?,
            d: kv.get_parsed("d").map_err(cfg_err)?,
            cond_target: req("cond_target")?,
            s_max: req("s_max")?,
            lambda1: parsed("lambda1")?,
            lambda2: parsed("lambda2")?,
            lambda_g: parsed("lambda_g")?,
            group_size: req_usize("group_size")?,
            active_groups: req_usize("active_groups")?,
            classes: req_usize("classes")?,
            separation: req("separation")?,
            split: (split[0], split[1], split[2]),
            epochs: req_usize("epochs")?,
            batch_size: req_usize("batch_size")?,
            lambda1_grid: parse_list("lambda1_grid", kv.require("lambda1_grid").map_err(cfg_err)?)?,
            c: parsed("c")?,
        };
        if let Some(a) = cfg.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("alpha must be finite and > 0, got {a}")));
            }
        }
        if !(cfg.gap_tol >= 0.0) {
            return Err(Error::Config("gap_tol must be >= 0".into()));
        }
        Ok(cfg)
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
            .unwrap_or(if self.problem.is_regression() { 0.1 } else { 1e-4 })
    }

    /// Solvers to run for this configuration.
    pub fn solvers(&self) -> Vec<SolverName> {
        match self.solver {
            Some(s) => vec![s],
            None if self.problem.is_regression() => SolverName::DETERMINISTIC.to_vec(),
            None => SolverName::STOCHASTIC.to_vec(),
        }
    }
}

/// Merges defaults, the optional config file, and flag overrides.
pub fn effective_config(cmd: Command, file: Option<&KvMap>, flags: &KvMap) -> KvMap {
    let base = defaults(cmd);
    let with_file = match file {
        Some(f) => base.merged_with(f),
        None => base,
    };
    with_file.merged_with(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let file = KvMap::parse("max_iter=50\ngap_tol=1e-8\n").unwrap();
        let mut flags = KvMap::new();
        flags.insert("max_iter", "7");
        let kv = effective_config(Command::Solve, Some(&file), &flags);
        let cfg = RunConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.max_iter, 7);
        assert_eq!(cfg.gap_tol, 1e-8);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_unknown_keys_and_solvers() {
        let mut flags = KvMap::new();
        flags.insert("max_itr", "7");
        assert!(RunConfig::from_kv(&effective_config(Command::Solve, None, &flags)).is_err());
        let mut flags = KvMap::new();
        flags.insert("solver", "newton");
        assert!(RunConfig::from_kv(&effective_config(Command::Solve, None, &flags)).is_err());
    }

    #[test]
    fn mu_hat_forms() {
        assert_eq!("L".parse::<MuHat>().unwrap(), MuHat::TimesL(1.0));
        assert_eq!("0.5L".parse::<MuHat>().unwrap().resolve(4.0), 2.0);
        assert_eq!("3".parse::<MuHat>().unwrap().resolve(4.0), 3.0);
        assert!("-1".parse::<MuHat>().is_err());
        assert!("xL".parse::<MuHat>().is_err());
    }

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("").is_err());
    }
}
