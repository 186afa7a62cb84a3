//! Combination-weight design: the balancing rule, the LMI bisection for its
//! coefficient, and the adaptive moving-average variant.

use nalgebra::DVector;

use crate::datamodel::{contraction, BlockMatrices, NodeProfile};
use crate::error::{Error, Result};
use crate::linalg::{is_psd, stacked_identity, Mat};
use crate::topology::NodeSet;

/// Column-stochastic combination matrix; `a[(l, k)]` is the weight node `k`
/// gives to node `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    a: Mat,
}

impl WeightMatrix {
    pub fn identity(n: usize) -> Self {
        WeightMatrix { a: Mat::identity(n, n) }
    }

    /// Wraps `a`, checking nonnegativity and unit column sums.
    pub fn from_matrix(a: Mat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("combination matrix must be square".into()));
        }
        if a.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidModel("combination weights must be finite and nonnegative".into()));
        }
        for k in 0..a.ncols() {
            let s: f64 = a.column(k).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("column {} sums to {s}", k + 1)));
            }
        }
        Ok(WeightMatrix { a })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.a[(l, k)]
    }

    /// Information set of node `k`: nodes with positive weight.
    pub fn support(&self, k: usize) -> NodeSet {
        (0..self.n()).filter(|&l| self.a[(l, k)] > 0.0).collect()
    }
}

/// Balancing coefficient `β°` and `α° = 1/(β° + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceCoefficient {
    pub beta: f64,
    pub alpha: f64,
}

impl BalanceCoefficient {
    pub fn from_beta(beta: f64) -> Self {
        BalanceCoefficient { beta, alpha: 1.0 / (beta + 1.0) }
    }
}

/// Upper end of the bisection bracket.
pub const BETA_MAX: f64 = 1e6;

/// Roundoff allowance of the PSD test, relative to the matrix norm.
const PSD_TOL: f64 = 1e-9;

/// The pieces of the β-constraint matrix that do not depend on β.
#[derive(Debug, Clone)]
pub struct BetaLmi {
    msm_inv: Mat,
    q_tilde: Mat,
    off_diag: Mat,
    corner: Mat,
}

impl BetaLmi {
    pub fn new(blocks: &BlockMatrices) -> Result<Self> {
        let nm = blocks.n * blocks.m;
        let msm = &blocks.step * &blocks.noise_cov * &blocks.step;
        let msm_inv = msm
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::InvalidModel("M·S·M is not positive definite".into()))?;
        let contraction = Mat::identity(nm, nm) - &blocks.step * &blocks.cov;
        let inv = contraction.try_inverse().ok_or_else(|| Error::InvalidModel("I − M·R is singular".into()))?;
        let q_tilde = &inv * &inv;
        let q_tilde = (&q_tilde + q_tilde.transpose()) * 0.5;
        let stack = stacked_identity(blocks.n, blocks.m);
        let off_diag = &q_tilde * &stack;
        let corner = stack.transpose() * (&q_tilde - Mat::identity(nm, nm)) * &stack;
        Ok(BetaLmi { msm_inv, q_tilde, off_diag, corner })
    }

    /// The `(NM + M)`-square constraint matrix at `beta`.
    pub fn matrix(&self, beta: f64) -> Mat {
        let nm = self.q_tilde.nrows();
        let m = self.corner.nrows();
        let mut out = Mat::zeros(nm + m, nm + m);
        out.view_mut((0, 0), (nm, nm)).copy_from(&(&self.msm_inv * beta + &self.q_tilde));
        out.view_mut((0, nm), (nm, m)).copy_from(&self.off_diag);
        out.view_mut((nm, 0), (m, nm)).copy_from(&self.off_diag.transpose());
        out.view_mut((nm, nm), (m, m)).copy_from(&self.corner);
        out
    }

    pub fn feasible(&self, beta: f64) -> bool {
        is_psd(&self.matrix(beta), PSD_TOL)
    }
}

/// Smallest `β ≥ 0` (to `tolerance`) making the β-constraint matrix PSD.
///
/// Feasibility is monotone in β since the only β-dependent block is
/// `β(MSM)⁻¹ ≻ 0`, so plain bisection suffices.
pub fn solve_beta(blocks: &BlockMatrices, tolerance: f64) -> Result<BalanceCoefficient> {
    let lmi = BetaLmi::new(blocks)?;
    if lmi.feasible(0.0) {
        return Ok(BalanceCoefficient::from_beta(0.0));
    }
    let mut hi = 1.0;
    while !lmi.feasible(hi) {
        if hi >= BETA_MAX {
            return Err(Error::BetaInfeasible(BETA_MAX));
        }
        hi = (hi * 2.0).min(BETA_MAX);
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if lmi.feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BalanceCoefficient::from_beta(hi))
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    match gammas.iter().position(|&g| !(g > 0.0) || !g.is_finite()) {
        Some(node) => Err(Error::NonPositiveVariance { node: node + 1, value: gammas[node] }),
        None => Ok(()),
    }
}

/// Weights proportional to inverse variances over `members`, in iteration
/// order of `members`.
fn inverse_variance_column<'a>(
    members: impl Iterator<Item = &'a usize> + Clone,
    var: impl Fn(usize) -> f64,
) -> Vec<(usize, f64)> {
    let total: f64 = members.clone().map(|&l| 1.0 / var(l)).sum();
    members.map(|&l| (l, (1.0 / var(l)) / total)).collect()
}

/// Balancing rule: `a_lk = γ_l⁻² / Σ_{j ∈ set_k} γ_j⁻²` for `l` in `set_k`.
pub fn balancing_weights(sets: &[NodeSet], gammas: &[f64]) -> Result<WeightMatrix> {
    let n = sets.len();
    if gammas.len() != n {
        return Err(Error::Dimension(format!("{} variances for {n} nodes", gammas.len())));
    }
    check_gammas(gammas)?;
    let mut a = Mat::zeros(n, n);
    for (k, set) in sets.iter().enumerate() {
        if !set.contains(&k) {
            return Err(Error::InvalidModel(format!("information set of node {} must contain itself", k + 1)));
        }
        if let Some(&bad) = set.iter().find(|&&l| l >= n) {
            return Err(Error::InvalidModel(format!("node {} is out of range", bad + 1)));
        }
        for (l, w) in inverse_variance_column(set.iter(), |l| gammas[l]) {
            a[(l, k)] = w;
        }
    }
    Ok(WeightMatrix { a })
}

/// Relative-variance rule: weights proportional to `(μ²σ²Tr(R_u))⁻¹`.
pub fn relative_variance_weights(sets: &[NodeSet], profiles: &[NodeProfile]) -> Result<WeightMatrix> {
    let noise: Vec<f64> = profiles.iter().map(NodeProfile::noise_power).collect();
    balancing_weights(sets, &noise)
}

/// Uniform weights over each information set.
pub fn uniform_weights(sets: &[NodeSet]) -> Result<WeightMatrix> {
    balancing_weights(sets, &vec![1.0; sets.len()])
}

/// Moving-average variance estimates kept by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveVarState {
    /// Adaptation-noise power estimate.
    pub gamma1: f64,
    pub r_hat: Mat,
    /// `Tr((I − μR̂)²)`.
    pub gamma2: f64,
    /// Blended composite variance.
    pub gamma: f64,
    pub updates: u64,
}

impl AdaptiveVarState {
    pub fn new(m: usize) -> Self {
        AdaptiveVarState { gamma1: 0.0, r_hat: Mat::zeros(m, m), gamma2: 0.0, gamma: 0.0, updates: 0 }
    }

    /// One step of the four moving-average recursions.
    pub fn update(&mut self, psi: &[f64], omega_prev: &[f64], u: &[f64], mu: f64, nu: f64, alpha_hat: f64) {
        let dev: f64 = psi.iter().zip(omega_prev).map(|(a, b)| (a - b) * (a - b)).sum();
        self.gamma1 = (1.0 - nu) * self.gamma1 + nu * dev;
        let m = u.len();
        for i in 0..m {
            for j in 0..m {
                self.r_hat[(i, j)] = (1.0 - nu) * self.r_hat[(i, j)] + nu * u[i] * u[j];
            }
        }
        self.gamma2 = contraction(&self.r_hat, mu);
        self.gamma = alpha_hat * self.gamma1 + (1.0 - alpha_hat) * self.gamma2;
        self.updates += 1;
    }
}

/// Functional form of [`AdaptiveVarState::update`].
pub fn update_adaptive_state(
    state: &AdaptiveVarState,
    psi: &DVector<f64>,
    omega_prev: &DVector<f64>,
    u: &DVector<f64>,
    profile: &NodeProfile,
    alpha_hat: f64,
) -> AdaptiveVarState {
    let mut next = state.clone();
    next.update(psi.as_slice(), omega_prev.as_slice(), u.as_slice(), profile.mu, profile.nu, alpha_hat);
    next
}

/// Adaptive balancing weights over one information set. Falls back to
/// uniform weights while any estimate is still zero.
pub fn adaptive_weights(gammas: &[f64]) -> Vec<f64> {
    let n = gammas.len();
    if gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return vec![1.0 / n as f64; n];
    }
    let total: f64 = gammas.iter().map(|g| 1.0 / g).sum();
    gammas.iter().map(|g| (1.0 / g) / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{build_blocks, GlobalModel};

    fn scalar_model(n: usize) -> GlobalModel {
        let p = NodeProfile::new(1.0, Mat::identity(1, 1), 0.1);
        GlobalModel::new(DVector::from_element(1, 1.0), vec![p; n]).unwrap()
    }

    fn sets(v: &[&[usize]]) -> Vec<NodeSet> {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn scalar_beta_matches_schur_complement() {
        // 100β ≥ Q̃/(Q̃−1) with Q̃ = 1/0.81 gives β = 1/19.
        let c = solve_beta(&build_blocks(&scalar_model(1)), 1e-9).unwrap();
        assert!((c.beta - 1.0 / 19.0).abs() < 1e-6);
        assert!((c.alpha - 0.95).abs() < 1e-6);
        assert!((c.alpha * (1.0 + c.beta) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_network_matches_single_node() {
        let one = solve_beta(&build_blocks(&scalar_model(1)), 1e-10).unwrap();
        let many = solve_beta(&build_blocks(&scalar_model(4)), 1e-10).unwrap();
        assert!((one.beta - many.beta).abs() < 1e-7);
    }

    #[test]
    fn balancing_examples() {
        let w = balancing_weights(&sets(&[&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]]), &[1.0, 1.0, 1.0]).unwrap();
        assert!(w.matrix().iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let w = balancing_weights(&sets(&[&[0, 1], &[1]]), &[1.0, 4.0]).unwrap();
        assert!((w.get(0, 0) - 0.8).abs() < 1e-15);
        assert!((w.get(1, 0) - 0.2).abs() < 1e-15);
        assert_eq!(w.get(1, 1), 1.0);
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(w.support(0).len(), 2);
    }

    #[test]
    fn balancing_rejects_bad_input() {
        assert!(matches!(
            balancing_weights(&sets(&[&[0, 1], &[1]]), &[1.0, 0.0]),
            Err(Error::NonPositiveVariance { node: 2, .. })
        ));
        assert!(balancing_weights(&sets(&[&[1], &[1]]), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::from_matrix(Mat::identity(3, 3)).is_ok());
        let bad = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.4, 1.0]);
        assert!(WeightMatrix::from_matrix(bad).is_err());
    }

    #[test]
    fn adaptive_state_from_zero() {
        let mut s = AdaptiveVarState::new(2);
        s.update(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0], 0.1, 0.05, 0.95);
        assert_eq!(s.gamma1, 0.0);
        assert_eq!(s.gamma2, 2.0);
        assert!((s.gamma - 0.05 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_state_fixed_point() {
        let mut s = AdaptiveVarState::new(1);
        let nu = 0.05;
        let mut gap_prev = 4.0;
        for _ in 0..200 {
            s.update(&[2.0], &[0.0], &[1.0], 0.1, nu, 1.0);
            let gap = (4.0 - s.gamma1).abs();
            assert!((gap - (1.0 - nu) * gap_prev).abs() < 1e-12);
            gap_prev = gap;
        }
        assert!((s.gamma1 - 4.0).abs() < 4.0 * 0.95f64.powi(200) + 1e-12);
        assert!((s.r_hat[(0, 0)] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn adaptive_weight_examples() {
        assert_eq!(adaptive_weights(&[3.0, 3.0]), vec![0.5, 0.5]);
        let w = adaptive_weights(&[2.0, 2.0, 4.0]);
        assert!((w[0] - 0.4).abs() < 1e-15 && (w[1] - 0.4).abs() < 1e-15 && (w[2] - 0.2).abs() < 1e-15);
        assert_eq!(adaptive_weights(&[7.0]), vec![1.0]);
        assert_eq!(adaptive_weights(&[0.0, 1.0]), vec![0.5, 0.5]);
    }
}
