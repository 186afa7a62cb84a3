//! Closed-form mean-square performance of the diffusion recursion.

use nalgebra::DVector;

use crate::datamodel::{BlockMatrices, NodeProfile};
use crate::error::{Error, Result};
use crate::linalg::{kron_identity, lambda_max, spectral_radius, sym_eigenvalues, Mat};
use crate::trace::MsdTrace;
use crate::weights::WeightMatrix;

/// Values above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Error-recursion matrices of the network.
#[derive(Debug, Clone)]
pub struct ErrorDynamics {
    /// `𝓐ᵀ(I − 𝓜𝓡)`.
    pub b: Mat,
    /// `𝓐ᵀ𝓜𝓢𝓜𝓐`.
    pub y: Mat,
    /// Initial error covariance `Ω₋₁`.
    pub omega_init: Mat,
    pub n: usize,
    pub m: usize,
}

/// Assembles the error dynamics for zero-initialized estimates.
pub fn build_dynamics(a: &WeightMatrix, blocks: &BlockMatrices, w_true: &DVector<f64>) -> Result<ErrorDynamics> {
    let (n, m) = (blocks.n, blocks.m);
    if a.n() != n {
        return Err(Error::Dimension(format!("{}x{} weights for {n} nodes", a.n(), a.n())));
    }
    if w_true.len() != m {
        return Err(Error::Dimension(format!("parameter of length {} for dimension {m}", w_true.len())));
    }
    let big_a = kron_identity(a.matrix(), m);
    let at = big_a.transpose();
    let nm = n * m;
    let b = &at * (Mat::identity(nm, nm) - &blocks.step * &blocks.cov);
    let msm = &blocks.step * &blocks.noise_cov * &blocks.step;
    let y = &at * msm * &big_a;
    let y = (&y + y.transpose()) * 0.5;
    let w0 = DVector::from_iterator(nm, (0..nm).map(|i| w_true[i % m]));
    let omega_init = &w0 * w0.transpose();
    Ok(ErrorDynamics { b, y, omega_init, n, m })
}

fn trace_product(a: &Mat, b: &Mat) -> f64 {
    // Both arguments are symmetric here, so Tr(AB) is the elementwise sum.
    a.component_mul(b).sum()
}

/// Network MSD for iterations `0..iters` from the first-order recursion.
pub fn transient_msd(dynamics: &ErrorDynamics, iters: usize) -> Result<MsdTrace> {
    let nm = dynamics.n * dynamics.m;
    let bt = dynamics.b.transpose();
    let mut w = Mat::identity(nm, nm) / dynamics.n as f64;
    let mut msd = trace_product(&w, &dynamics.omega_init);
    let mut out = Vec::with_capacity(iters);
    for i in 0..iters {
        let w_next = &bt * &w * &dynamics.b;
        msd += trace_product(&w, &dynamics.y) - trace_product(&(&w - &w_next), &dynamics.omega_init);
        if !msd.is_finite() || msd > DIVERGENCE_LIMIT {
            return Err(Error::Unstable(format!("theoretical MSD diverged at iteration {i}")));
        }
        out.push(msd);
        w = w_next;
    }
    Ok(MsdTrace::new(out))
}

/// Cap on doubling steps; each doubles the number of series terms summed.
const MAX_DOUBLINGS: usize = 64;

/// Solves `X = 𝓑X𝓑ᵀ + 𝓨` by doubling the partial sums of the series.
pub fn lyapunov_series(b: &Mat, y: &Mat, tol: f64) -> Result<Mat> {
    if spectral_radius(b) >= 1.0 {
        return Err(Error::Unstable("spectral radius of B is not below one".into()));
    }
    let mut x = y.clone();
    let mut power = b.clone();
    for _ in 0..MAX_DOUBLINGS {
        let increment = &power * &x * power.transpose();
        let inc_tr = increment.trace().abs();
        x += &increment;
        if inc_tr <= tol * x.trace().abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        power = &power * &power;
    }
    Err(Error::Unstable("Lyapunov series did not converge".into()))
}

/// Steady-state covariance of the network error.
pub fn steady_state_covariance(dynamics: &ErrorDynamics, tol: f64) -> Result<Mat> {
    lyapunov_series(&dynamics.b, &dynamics.y, tol)
}

/// Steady-state network MSD, `Tr(X)/N`.
pub fn steady_state_msd(dynamics: &ErrorDynamics, tol: f64) -> Result<f64> {
    Ok(steady_state_covariance(dynamics, tol)?.trace() / dynamics.n as f64)
}

/// Steady-state MSD of each node.
pub fn steady_state_node_msd(dynamics: &ErrorDynamics, tol: f64) -> Result<Vec<f64>> {
    let x = steady_state_covariance(dynamics, tol)?;
    let m = dynamics.m;
    Ok((0..dynamics.n).map(|k| x.view((k * m, k * m), (m, m)).trace()).collect())
}

/// Upper bounds on the steady-state network MSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsdBounds {
    pub msd_bar: f64,
    pub msd_a: f64,
    pub msd_b: f64,
    /// `ρ(I − 𝓜𝓡)`.
    pub r1: f64,
    /// `λ_max(𝓜𝓢𝓜)`.
    pub r2: f64,
}

fn bound(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

pub fn msd_bounds(dynamics: &ErrorDynamics, blocks: &BlockMatrices) -> MsdBounds {
    let m = dynamics.m as f64;
    let nm = dynamics.n * dynamics.m;
    let bbt = &dynamics.b * dynamics.b.transpose();
    let contraction = Mat::identity(nm, nm) - &blocks.step * &blocks.cov;
    let r1 = spectral_radius(&contraction);
    let r2 = lambda_max(&(&blocks.step * &blocks.noise_cov * &blocks.step));
    let lam_y = lambda_max(&dynamics.y);
    MsdBounds {
        msd_bar: bound(m * lam_y, 1.0 - lambda_max(&bbt)),
        msd_a: bound(m * dynamics.y.trace(), 1.0 - r1 * r1),
        msd_b: bound(m * r2, 1.0 - bbt.trace()),
        r1,
        r2,
    }
}

/// Mean stability per node: `μ_k < 2/λ_max(R_u,k)`.
pub fn stability_check(profiles: &[NodeProfile]) -> Vec<bool> {
    profiles
        .iter()
        .map(|p| {
            let lmax = sym_eigenvalues(&p.r_u).into_iter().fold(f64::NEG_INFINITY, f64::max);
            p.mu < 2.0 / lmax
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{build_blocks, GlobalModel};

    fn scalar_model(mu: f64, sigma: f64, r: f64) -> GlobalModel {
        let p = NodeProfile::new(sigma, Mat::from_element(1, 1, r), mu);
        GlobalModel::new(DVector::from_element(1, 1.0), vec![p]).unwrap()
    }

    fn scalar_closed_form(mu: f64, sigma: f64, r: f64) -> f64 {
        mu * mu * sigma * r / (1.0 - (1.0 - mu * r).powi(2))
    }

    #[test]
    fn noncooperative_dynamics_are_block_diagonal() {
        let p1 = NodeProfile::new(0.5, Mat::identity(2, 2) * 2.0, 0.1);
        let p2 = NodeProfile::new(0.2, Mat::identity(2, 2), 0.3);
        let model = GlobalModel::new(DVector::from_element(2, 1.0), vec![p1.clone(), p2.clone()]).unwrap();
        let blocks = build_blocks(&model);
        let dynamics = build_dynamics(&WeightMatrix::identity(2), &blocks, &model.w_true).unwrap();
        assert_eq!(dynamics.b.view((0, 0), (2, 2)), Mat::identity(2, 2) - &p1.r_u * 0.1);
        assert_eq!(dynamics.b.view((2, 2), (2, 2)), Mat::identity(2, 2) - &p2.r_u * 0.3);
        assert_eq!(dynamics.b.view((0, 2), (2, 2)).amax(), 0.0);
    }

    #[test]
    fn single_node_dynamics() {
        let model = scalar_model(0.1, 1.0, 1.0);
        let d = build_dynamics(&WeightMatrix::identity(1), &build_blocks(&model), &model.w_true).unwrap();
        assert!((d.b[(0, 0)] - 0.9).abs() < 1e-15);
        assert!((d.y[(0, 0)] - 0.01).abs() < 1e-15);
        assert_eq!(d.omega_init[(0, 0)], 1.0);
    }

    #[test]
    fn first_transient_term() {
        let model = scalar_model(0.1, 1.0, 1.0);
        let mut d = build_dynamics(&WeightMatrix::identity(1), &build_blocks(&model), &model.w_true).unwrap();
        d.omega_init = Mat::zeros(1, 1);
        let tr = transient_msd(&d, 1).unwrap();
        assert!((tr.msd[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn noiseless_transient_decays() {
        let model = scalar_model(0.1, 1.0, 1.0);
        let mut d = build_dynamics(&WeightMatrix::identity(1), &build_blocks(&model), &model.w_true).unwrap();
        d.y = Mat::zeros(1, 1);
        let tr = transient_msd(&d, 50).unwrap();
        for (i, v) in tr.msd.iter().enumerate() {
            assert!((v - 0.81f64.powi(i as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_steady_state() {
        let model = scalar_model(0.1, 1.0, 1.0);
        let d = build_dynamics(&WeightMatrix::identity(1), &build_blocks(&model), &model.w_true).unwrap();
        let ss = steady_state_msd(&d, 1e-12).unwrap();
        assert!((ss - 0.1 / 1.9).abs() < 1e-12);
        let tr = transient_msd(&d, 400).unwrap();
        assert!((tr.msd[399] - ss).abs() < 1e-6);
        let mut d0 = d.clone();
        d0.y = Mat::zeros(1, 1);
        assert_eq!(steady_state_msd(&d0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn independent_nodes_average() {
        let p1 = NodeProfile::new(1.0, Mat::from_element(1, 1, 1.0), 0.1);
        let p2 = NodeProfile::new(0.5, Mat::from_element(1, 1, 2.0), 0.05);
        let model = GlobalModel::new(DVector::from_element(1, 1.0), vec![p1, p2]).unwrap();
        let d = build_dynamics(&WeightMatrix::identity(2), &build_blocks(&model), &model.w_true).unwrap();
        let expected = 0.5 * (scalar_closed_form(0.1, 1.0, 1.0) + scalar_closed_form(0.05, 0.5, 2.0));
        assert!((steady_state_msd(&d, 1e-13).unwrap() - expected).abs() < 1e-12);
        let per = steady_state_node_msd(&d, 1e-13).unwrap();
        assert!((per[1] - scalar_closed_form(0.05, 0.5, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn unstable_dynamics_rejected() {
        let model = scalar_model(2.5, 1.0, 1.0);
        let d = build_dynamics(&WeightMatrix::identity(1), &build_blocks(&model), &model.w_true).unwrap();
        assert!(matches!(steady_state_msd(&d, 1e-10), Err(Error::Unstable(_))));
        assert!(matches!(transient_msd(&d, 500), Err(Error::Unstable(_))));
    }

    #[test]
    fn scalar_bound_is_exact() {
        let model = scalar_model(0.1, 1.0, 1.0);
        let blocks = build_blocks(&model);
        let d = build_dynamics(&WeightMatrix::identity(1), &blocks, &model.w_true).unwrap();
        let b = msd_bounds(&d, &blocks);
        assert!((b.msd_bar - 0.1 / 1.9).abs() < 1e-12);
        assert!((b.r1 - 0.9).abs() < 1e-12);
        assert!((b.r2 - 0.01).abs() < 1e-12);
        let mut d0 = d.clone();
        d0.y = Mat::zeros(1, 1);
        let b0 = msd_bounds(&d0, &blocks);
        assert_eq!(b0.msd_bar, 0.0);
        assert_eq!(b0.msd_a, 0.0);
    }

    #[test]
    fn stability_boundary() {
        let mut p = NodeProfile::new(1.0, Mat::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), 0.5);
        assert_eq!(stability_check(&[p.clone()]), vec![false]);
        p.mu = 0.499;
        assert_eq!(stability_check(&[p.clone()]), vec![true]);
        p.mu = 1e-9;
        assert_eq!(stability_check(&[p]), vec![true]);
    }
}
