//! Closed-form proximal operators: soft thresholding, block shrinkage and box
//! projection, plus a brute-force grid oracle used to validate them.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{ExtendedReal, Regularizer};

/// Disjoint index sets covering `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    dimension: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    pub fn new(dimension: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; dimension];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Input(format!("group {g} is empty")));
            }
            for &i in group {
                if i >= dimension {
                    return Err(Error::Input(format!(
                        "group {g} has index {i} outside 0..{dimension}"
                    )));
                }
                if seen[i] {
                    return Err(Error::Input(format!("index {i} appears in more than one group")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::Input(format!("index {i} is not covered by any group")));
        }
        Ok(GroupPartition { dimension, groups })
    }

    /// Consecutive blocks of `size` indices.
    pub fn contiguous(dimension: usize, size: usize) -> Result<Self> {
        if size == 0 || dimension % size != 0 {
            return Err(Error::Input(format!(
                "dimension {dimension} is not divisible by group size {size}"
            )));
        }
        let groups = (0..dimension / size)
            .map(|g| (g * size..(g + 1) * size).collect())
            .collect();
        GroupPartition::new(dimension, groups)
    }

    /// One group per feature of a column-major `features × classes` weight
    /// matrix: feature `j` owns indices `{j + features·c}`.
    pub fn per_feature(features: usize, classes: usize) -> Result<Self> {
        let groups = (0..features)
            .map(|j| (0..classes).map(|c| j + features * c).collect())
            .collect();
        GroupPartition::new(features * classes, groups)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_norm(&self, g: usize, x: &DVector<f64>) -> f64 {
        self.groups[g].iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
    }
}

/// Componentwise `sign(z)·max(|z| − tau·λ₁, 0)`.
pub fn prox_l1(lambda1: f64, tau: f64, z: &DVector<f64>) -> DVector<f64> {
    let t = tau * lambda1;
    z.map(|zi| {
        let mag = zi.abs() - t;
        if mag > 0.0 {
            mag.copysign(zi)
        } else {
            0.0
        }
    })
}

/// Block shrinkage `(1 − tau·λ_g/‖z_G‖)₊ z_G` on every group; a block whose
/// norm is at most `tau·λ_g` maps to zero.
pub fn prox_group_l2(lambda_g: f64, partition: &GroupPartition, tau: f64, z: &DVector<f64>) -> DVector<f64> {
    let t = tau * lambda_g;
    let mut out = z.clone();
    for group in partition.groups() {
        let norm = group.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
        if norm <= t {
            for &i in group {
                out[i] = 0.0;
            }
        } else {
            let factor = 1.0 - t / norm;
            for &i in group {
                out[i] = factor * z[i];
            }
        }
    }
    out
}

/// Euclidean projection onto `[lower, upper]`; `tau` has no effect.
pub fn prox_box(lower: &DVector<f64>, upper: &DVector<f64>, _tau: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_bounds(lower, upper)?;
    if z.len() != lower.len() {
        return Err(Error::Dimension {
            expected: lower.len(),
            got: z.len(),
        });
    }
    Ok(clamp(lower, upper, z))
}

fn clamp(lower: &DVector<f64>, upper: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(z.len(), |i, _| z[i].max(lower[i]).min(upper[i]))
}

fn check_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<()> {
    if lower.len() != upper.len() {
        return Err(Error::Dimension {
            expected: lower.len(),
            got: upper.len(),
        });
    }
    for i in 0..lower.len() {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i] {
            return Err(Error::Input(format!(
                "inconsistent bounds at {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
    }
    Ok(())
}

/// `r = 0`; its prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _x: &DVector<f64>) -> ExtendedReal {
        ExtendedReal::Finite(0.0)
    }

    fn prox(&self, _tau: f64, z: &DVector<f64>) -> DVector<f64> {
        z.clone()
    }

    fn contains_subgradient(&self, _u: &DVector<f64>, s: &DVector<f64>, tol: f64) -> Option<bool> {
        Some(s.amax() <= tol)
    }

    fn name(&self) -> &'static str {
        "zero"
    }
}

/// `λ₁‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Penalty {
    lambda1: f64,
}

impl L1Penalty {
    pub fn new(lambda1: f64) -> Result<Self> {
        if !(lambda1 >= 0.0) || !lambda1.is_finite() {
            return Err(Error::Input(format!("lambda1 must be finite and >= 0, got {lambda1}")));
        }
        Ok(L1Penalty { lambda1 })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
}

impl Regularizer for L1Penalty {
    fn value(&self, x: &DVector<f64>) -> ExtendedReal {
        ExtendedReal::Finite(self.lambda1 * x.lp_norm(1))
    }

    fn prox(&self, tau: f64, z: &DVector<f64>) -> DVector<f64> {
        prox_l1(self.lambda1, tau, z)
    }

    fn contains_subgradient(&self, u: &DVector<f64>, s: &DVector<f64>, tol: f64) -> Option<bool> {
        let ok = u.iter().zip(s.iter()).all(|(&ui, &si)| {
            if ui == 0.0 {
                si.abs() <= self.lambda1 + tol
            } else {
                (si - self.lambda1.copysign(ui)).abs() <= tol
            }
        });
        Some(ok)
    }

    fn name(&self) -> &'static str {
        "l1"
    }
}

/// `λ_g Σ_G ‖x_G‖₂` over a fixed partition.
#[derive(Debug, Clone)]
pub struct GroupL2Penalty {
    lambda_g: f64,
    partition: GroupPartition,
}

impl GroupL2Penalty {
    pub fn new(lambda_g: f64, partition: GroupPartition) -> Result<Self> {
        if !(lambda_g >= 0.0) || !lambda_g.is_finite() {
            return Err(Error::Input(format!("lambda_g must be finite and >= 0, got {lambda_g}")));
        }
        Ok(GroupL2Penalty { lambda_g, partition })
    }

    pub fn lambda_g(&self) -> f64 {
        self.lambda_g
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }
}

impl Regularizer for GroupL2Penalty {
    fn value(&self, x: &DVector<f64>) -> ExtendedReal {
        let total: f64 = (0..self.partition.len()).map(|g| self.partition.group_norm(g, x)).sum();
        ExtendedReal::Finite(self.lambda_g * total)
    }

    fn prox(&self, tau: f64, z: &DVector<f64>) -> DVector<f64> {
        prox_group_l2(self.lambda_g, &self.partition, tau, z)
    }

    fn contains_subgradient(&self, u: &DVector<f64>, s: &DVector<f64>, tol: f64) -> Option<bool> {
        let ok = (0..self.partition.len()).all(|g| {
            let group = &self.partition.groups()[g];
            let u_norm = self.partition.group_norm(g, u);
            if u_norm == 0.0 {
                self.partition.group_norm(g, s) <= self.lambda_g + tol
            } else {
                let dev: f64 = group
                    .iter()
                    .map(|&i| {
                        let e = s[i] - self.lambda_g * u[i] / u_norm;
                        e * e
                    })
                    .sum::<f64>()
                    .sqrt();
                dev <= tol
            }
        });
        Some(ok)
    }

    fn name(&self) -> &'static str {
        "group-l2"
    }
}

/// Indicator of `{x : lower ≤ x ≤ upper}`; bounds may be infinite.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxIndicator {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        Ok(BoxIndicator { lower, upper })
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }
}

impl Regularizer for BoxIndicator {
    fn value(&self, x: &DVector<f64>) -> ExtendedReal {
        let inside = x
            .iter()
            .enumerate()
            .all(|(i, &xi)| xi >= self.lower[i] && xi <= self.upper[i]);
        if inside {
            ExtendedReal::Finite(0.0)
        } else {
            ExtendedReal::PosInfinity
        }
    }

    fn prox(&self, _tau: f64, z: &DVector<f64>) -> DVector<f64> {
        clamp(&self.lower, &self.upper, z)
    }

    fn contains_subgradient(&self, u: &DVector<f64>, s: &DVector<f64>, tol: f64) -> Option<bool> {
        // normal cone of the box
        let ok = (0..u.len()).all(|i| {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if u[i] < lo || u[i] > hi {
                return false;
            }
            let at_lo = u[i] == lo;
            let at_hi = u[i] == hi;
            match (at_lo, at_hi) {
                (true, true) => true,
                (true, false) => s[i] <= tol,
                (false, true) => s[i] >= -tol,
                (false, false) => s[i].abs() <= tol,
            }
        });
        Some(ok)
    }

    fn name(&self) -> &'static str {
        "box"
    }
}

/// Resolution of the brute-force prox oracle.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub points_per_axis: usize,
    /// Zoom rounds around the incumbent after the exhaustive pass.
    pub refinements: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_axis: 401,
            refinements: 0,
        }
    }
}

/// Minimum of `r(u) + ‖u − z‖²/(2 tau)` over a grid on the cube of
/// half-width `2(‖z‖∞ + tau·weight + 1)` centred at `z`.
pub fn grid_minimum(r: &dyn Regularizer, weight: f64, tau: f64, z: &DVector<f64>, grid: GridSpec) -> Result<f64> {
    let dim = z.len();
    if dim == 0 || dim > 3 {
        return Err(Error::Unsupported(format!(
            "grid prox oracle supports dimensions 1..=3, got {dim}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Input(format!("tau must be > 0, got {tau}")));
    }
    if grid.points_per_axis < 2 {
        return Err(Error::Input("grid needs at least 2 points per axis".into()));
    }
    let objective = |u: &DVector<f64>| -> f64 {
        match r.value(u) {
            ExtendedReal::Finite(v) => v + (u - z).norm_squared() / (2.0 * tau),
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    };
    let mut half = 2.0 * (z.amax() + tau * weight + 1.0);
    let mut center = z.clone();
    let mut best = f64::INFINITY;
    let mut best_u = center.clone();
    let m = grid.points_per_axis;
    let mut u = DVector::zeros(dim);
    for _ in 0..=grid.refinements {
        let step = 2.0 * half / (m - 1) as f64;
        let total = m.pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            for axis in 0..dim {
                let idx = rem % m;
                rem /= m;
                u[axis] = center[axis] - half + step * idx as f64;
            }
            let v = objective(&u);
            if v < best {
                best = v;
                best_u.copy_from(&u);
            }
        }
        center.copy_from(&best_u);
        half = 2.0 * step;
    }
    Ok(best)
}

/// True iff `candidate` attains an objective no worse than the grid minimum
/// plus `1e-6`.
pub fn prox_candidate_check(
    r: &dyn Regularizer,
    weight: f64,
    tau: f64,
    z: &DVector<f64>,
    candidate: &DVector<f64>,
    grid: GridSpec,
) -> Result<bool> {
    let grid_min = grid_minimum(r, weight, tau, z, grid)?;
    let value = match r.value(candidate) {
        ExtendedReal::Finite(v) => v + (candidate - z).norm_squared() / (2.0 * tau),
        ExtendedReal::PosInfinity => return Ok(false),
    };
    Ok(value <= grid_min + 1e-6)
}

/// Checks the closed-form `r.prox(tau, z)` against exhaustive grid search.
/// `weight` is the penalty scale (λ₁ or λ_g, zero for indicators) and only
/// sizes the search cube.
pub fn prox_oracle_check(r: &dyn Regularizer, weight: f64, tau: f64, z: &DVector<f64>, grid: GridSpec) -> Result<bool> {
    let candidate = r.prox(tau, z);
    prox_candidate_check(r, weight, tau, z, &candidate, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(prox_l1(1.0, 1.0, &v(&[3.0, -0.5, 0.0])), v(&[2.0, 0.0, 0.0]));
        let z = v(&[1.5, -2.0, 0.1]);
        assert_eq!(prox_l1(0.0, 7.0, &z), z);
        assert_eq!(prox_l1(2.0, 0.3, &v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(prox_l1(1.0, 1.0, &v(&[-3.0])), v(&[-2.0]));
    }

    #[test]
    fn soft_threshold_matches_1d_scan() {
        // fine scan of λ|u| + (u − z)²/(2τ)
        let (lambda, tau, z) = (1.0, 1.0, 3.0);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=80_000 {
            let u = -4.0 + 1e-4 * i as f64;
            let val = lambda * f64::abs(u) + (u - z) * (u - z) / (2.0 * tau);
            if val < best.0 {
                best = (val, u);
            }
        }
        assert!((best.1 - 2.0).abs() < 1e-3);
        let got = prox_l1(lambda, tau, &v(&[z]))[0];
        assert!((got - best.1).abs() < 1e-3);
    }

    #[test]
    fn group_shrink_examples() {
        let part = GroupPartition::contiguous(2, 2).unwrap();
        let out = prox_group_l2(1.0, &part, 1.0, &v(&[3.0, 4.0]));
        assert!((out[0] - 2.4).abs() < 1e-15 && (out[1] - 3.2).abs() < 1e-15);
        assert_eq!(prox_group_l2(5.0, &part, 1.0, &v(&[3.0, 4.0])), v(&[0.0, 0.0]));
        assert_eq!(prox_group_l2(1.0, &part, 1.0, &v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        // strictly below threshold also collapses
        assert_eq!(prox_group_l2(5.5, &part, 1.0, &v(&[3.0, 4.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn group_shrink_matches_2d_scan() {
        let penalty = GroupL2Penalty::new(1.0, GroupPartition::contiguous(2, 2).unwrap()).unwrap();
        let z = v(&[3.0, 4.0]);
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        let steps = 600;
        for i in 0..=steps {
            for j in 0..=steps {
                let u = v(&[1.5 + 1.5 * i as f64 / steps as f64, 2.5 + 1.5 * j as f64 / steps as f64]);
                let val = penalty.value(&u).to_f64() + (&u - &z).norm_squared() / 2.0;
                if val < best.0 {
                    best = (val, u);
                }
            }
        }
        assert!((best.1[0] - 2.4).abs() < 1e-2 && (best.1[1] - 3.2).abs() < 1e-2);
        let out = penalty.prox(1.0, &z);
        let val = penalty.value(&out).to_f64() + (&out - &z).norm_squared() / 2.0;
        assert!(val <= best.0 + 1e-4);
    }

    #[test]
    fn box_projection_examples() {
        let lo = v(&[0.0, 0.0, 0.0]);
        let hi = v(&[1.0, 1.0, 1.0]);
        assert_eq!(prox_box(&lo, &hi, 1.0, &v(&[-1.0, 0.5, 2.0])).unwrap(), v(&[0.0, 0.5, 1.0]));
        let inside = v(&[0.2, 0.9, 0.0]);
        assert_eq!(prox_box(&lo, &hi, 1.0, &inside).unwrap(), inside);
        let z = v(&[-3.0, 0.3, 9.0]);
        assert_eq!(prox_box(&lo, &hi, 10.0, &z).unwrap(), prox_box(&lo, &hi, 0.1, &z).unwrap());
        assert!(prox_box(&hi, &lo, 1.0, &z).is_err());
        assert!(BoxIndicator::new(v(&[1.0]), v(&[0.0])).is_err());
    }

    #[test]
    fn box_with_infinite_bounds() {
        let b = BoxIndicator::new(v(&[f64::NEG_INFINITY, 0.0]), v(&[0.0, f64::INFINITY])).unwrap();
        assert_eq!(b.prox(1.0, &v(&[5.0, -5.0])), v(&[0.0, 0.0]));
        assert_eq!(b.value(&v(&[-1e300, 1e300])), ExtendedReal::Finite(0.0));
        assert_eq!(b.value(&v(&[1.0, 1.0])), ExtendedReal::PosInfinity);
    }

    #[test]
    fn partition_validation() {
        assert!(GroupPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![0, 1, 3]]).is_err());
        assert!(GroupPartition::contiguous(25, 10).is_err());
        let p = GroupPartition::contiguous(200, 10).unwrap();
        assert_eq!(p.len(), 20);
        let p = GroupPartition::per_feature(3, 2).unwrap();
        assert_eq!(p.groups(), &[vec![0, 3], vec![1, 4], vec![2, 5]]);
    }

    #[test]
    fn oracle_examples() {
        let l1 = L1Penalty::new(1.0).unwrap();
        assert!(prox_oracle_check(&l1, 1.0, 1.0, &v(&[3.0]), GridSpec::default()).unwrap());
        let group = GroupL2Penalty::new(1.0, GroupPartition::contiguous(2, 2).unwrap()).unwrap();
        let z = v(&[3.0, 4.0]);
        assert!(prox_oracle_check(&group, 1.0, 1.0, &z, GridSpec::default()).unwrap());
        let mut bad = group.prox(1.0, &z);
        bad[0] += 0.1;
        assert!(!prox_candidate_check(&group, 1.0, 1.0, &z, &bad, GridSpec::default()).unwrap());
        let mut bad = l1.prox(1.0, &v(&[3.0]));
        bad[0] += 0.1;
        assert!(!prox_candidate_check(&l1, 1.0, 1.0, &v(&[3.0]), &bad, GridSpec::default()).unwrap());
    }

    #[test]
    fn oracle_rejects_high_dimension() {
        let l1 = L1Penalty::new(1.0).unwrap();
        let err = prox_oracle_check(&l1, 1.0, 1.0, &DVector::zeros(4), GridSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn subgradient_membership() {
        let l1 = L1Penalty::new(0.5).unwrap();
        assert_eq!(l1.contains_subgradient(&v(&[0.0, 2.0]), &v(&[0.3, 0.5]), 1e-12), Some(true));
        assert_eq!(l1.contains_subgradient(&v(&[0.0, 2.0]), &v(&[0.3, 0.4]), 1e-12), Some(false));
        assert_eq!(l1.contains_subgradient(&v(&[0.0]), &v(&[0.6]), 1e-12), Some(false));
        let g = GroupL2Penalty::new(1.0, GroupPartition::contiguous(2, 2).unwrap()).unwrap();
        assert_eq!(g.contains_subgradient(&v(&[3.0, 4.0]), &v(&[0.6, 0.8]), 1e-12), Some(true));
        assert_eq!(g.contains_subgradient(&v(&[0.0, 0.0]), &v(&[0.6, 0.7]), 1e-12), Some(true));
        assert_eq!(g.contains_subgradient(&v(&[0.0, 0.0]), &v(&[0.9, 0.7]), 1e-12), Some(false));
    }
}
