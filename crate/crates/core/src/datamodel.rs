//! Per-node statistics, sample generation and the global block matrices.

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, sym_eigenvalues, Mat};

/// Statistics and algorithm parameters of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProfile {
    /// Measurement noise variance.
    pub sigma_v2: f64,
    /// Regressor covariance, `M × M`, symmetric positive definite.
    pub r_u: Mat,
    pub mu: f64,
    /// Discount factor of the moving-average variance estimates.
    pub nu: f64,
    /// Energy budget per iteration; may be infinite.
    pub energy_budget: f64,
}

impl NodeProfile {
    pub fn new(sigma_v2: f64, r_u: Mat, mu: f64) -> Self {
        NodeProfile { sigma_v2, r_u, mu, nu: 0.05, energy_budget: f64::INFINITY }
    }

    pub fn dim(&self) -> usize {
        self.r_u.nrows()
    }

    pub fn validate(&self, node: usize) -> Result<()> {
        let m = self.r_u.nrows();
        if m == 0 || self.r_u.ncols() != m {
            return Err(Error::InvalidModel(format!("node {}: R_u must be square and non-empty", node + 1)));
        }
        if (&self.r_u - self.r_u.transpose()).amax() > 1e-12 * self.r_u.amax().max(1.0) {
            return Err(Error::InvalidModel(format!("node {}: R_u is not symmetric", node + 1)));
        }
        if sym_eigenvalues(&self.r_u).iter().any(|&e| e <= 0.0) {
            return Err(Error::NotPositiveDefinite(node + 1));
        }
        if !(self.sigma_v2 > 0.0) || !self.sigma_v2.is_finite() {
            return Err(Error::InvalidModel(format!("node {}: noise variance must be positive", node + 1)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidModel(format!("node {}: step size must be positive", node + 1)));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidModel(format!("node {}: discount factor must lie in (0, 1)", node + 1)));
        }
        if !(self.energy_budget >= 0.0) {
            return Err(Error::InvalidModel(format!("node {}: energy budget must be nonnegative", node + 1)));
        }
        Ok(())
    }

    /// `α·μ²σ²Tr(R_u) + (1−α)·Tr((I − μR_u)²)`.
    pub fn composite_variance(&self, alpha: f64) -> f64 {
        composite_variance(self, alpha)
    }

    /// Steady-state adaptation noise power `μ²σ²Tr(R_u)`.
    pub fn noise_power(&self) -> f64 {
        self.mu * self.mu * self.sigma_v2 * self.r_u.trace()
    }

    /// Transient contraction term `Tr((I − μR_u)²)`.
    pub fn contraction(&self) -> f64 {
        contraction(&self.r_u, self.mu)
    }
}

pub(crate) fn contraction(r_u: &Mat, mu: f64) -> f64 {
    let m = r_u.nrows();
    let c = Mat::identity(m, m) - r_u * mu;
    (&c * &c).trace()
}

/// Composite variance of a node for balancing coefficient `alpha`.
pub fn composite_variance(profile: &NodeProfile, alpha: f64) -> f64 {
    alpha * profile.noise_power() + (1.0 - alpha) * profile.contraction()
}

/// The parameter to estimate, the node profiles and the network budget.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub w_true: DVector<f64>,
    pub profiles: Vec<NodeProfile>,
    /// Network-wide energy budget per iteration; may be infinite.
    pub network_budget: f64,
}

impl GlobalModel {
    pub fn new(w_true: DVector<f64>, profiles: Vec<NodeProfile>) -> Result<Self> {
        let model = GlobalModel { w_true, profiles, network_budget: f64::INFINITY };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.w_true.len()
    }

    pub fn node_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::InvalidModel("at least one node profile is required".into()));
        }
        let m = self.dim();
        for (k, p) in self.profiles.iter().enumerate() {
            if p.dim() != m {
                return Err(Error::Dimension(format!(
                    "node {}: R_u is {}x{} but the parameter has dimension {m}",
                    k + 1,
                    p.dim(),
                    p.dim()
                )));
            }
            p.validate(k)?;
        }
        if !(self.network_budget >= 0.0) {
            return Err(Error::InvalidModel("network budget must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn composite_variances(&self, alpha: f64) -> Vec<f64> {
        self.profiles.iter().map(|p| composite_variance(p, alpha)).collect()
    }

    pub fn local_budgets(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.energy_budget).collect()
    }
}

/// Block-diagonal step-size, covariance and noise-weighted covariance
/// matrices, `NM × NM`, in node order.
#[derive(Debug, Clone)]
pub struct BlockMatrices {
    pub step: Mat,
    pub cov: Mat,
    pub noise_cov: Mat,
    pub n: usize,
    pub m: usize,
}

pub fn build_blocks(model: &GlobalModel) -> BlockMatrices {
    let m = model.dim();
    let step: Vec<Mat> = model.profiles.iter().map(|p| Mat::identity(m, m) * p.mu).collect();
    let cov: Vec<Mat> = model.profiles.iter().map(|p| p.r_u.clone()).collect();
    let noise: Vec<Mat> = model.profiles.iter().map(|p| &p.r_u * p.sigma_v2).collect();
    BlockMatrices {
        step: block_diag(&step),
        cov: block_diag(&cov),
        noise_cov: block_diag(&noise),
        n: model.node_count(),
        m,
    }
}

/// Draws regressors `u ~ N(0, R_u)` through a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct SampleGenerator {
    chol_l: Mat,
    noise_std: f64,
}

impl SampleGenerator {
    pub fn new(profile: &NodeProfile) -> Result<Self> {
        let chol = Cholesky::new(profile.r_u.clone()).ok_or(Error::NotPositiveDefinite(0))?;
        Ok(SampleGenerator { chol_l: chol.l(), noise_std: profile.sigma_v2.sqrt() })
    }

    pub fn set_noise_variance(&mut self, sigma_v2: f64) {
        self.noise_std = sigma_v2.sqrt();
    }

    /// Fills `u` with a fresh regressor and returns `d = u·w + v`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, w_true: &DVector<f64>, z: &mut [f64], u: &mut [f64]) -> f64 {
        let m = u.len();
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.chol_l[(i, j)] * z[j];
            }
            u[i] = s;
        }
        let v: f64 = rng.sample::<f64, _>(StandardNormal) * self.noise_std;
        u.iter().zip(w_true.iter()).map(|(a, b)| a * b).sum::<f64>() + v
    }
}

/// One regression sample `(u, d)` for `profile`.
pub fn generate_sample<R: Rng + ?Sized>(
    profile: &NodeProfile,
    w_true: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let gen = SampleGenerator::new(profile)?;
    let m = profile.dim();
    let mut z = vec![0.0; m];
    let mut u = vec![0.0; m];
    let d = gen.draw_into(rng, w_true, &mut z, &mut u);
    Ok((DVector::from_vec(u), d))
}

/// Scenario family used to synthesize profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Random per-component power split, parameter dimension 3.
    Tree,
    /// Data power split equally over components, parameter dimension 2.
    Random,
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n: usize,
    /// Parameter dimension; `None` picks the family default.
    pub m: Option<usize>,
    /// Noise variances are drawn log-uniformly from this range.
    pub sigma_v2_range: (f64, f64),
    pub mu: f64,
    pub nu: f64,
}

impl SynthParams {
    pub fn new(n: usize) -> Self {
        SynthParams { n, m: None, sigma_v2_range: (0.01, 0.1), mu: 0.08, nu: 0.05 }
    }
}

/// Regenerates node profiles: `R_u` diagonal with entries `r_mm·100σ²`,
/// `Σ r_mm = 1`, and `ω^o` with all entries `1/√M`.
pub fn synth_profiles<R: Rng + ?Sized>(kind: SynthKind, rng: &mut R, params: &SynthParams) -> GlobalModel {
    let m = params.m.unwrap_or(match kind {
        SynthKind::Tree => 3,
        SynthKind::Random => 2,
    });
    let (lo, hi) = params.sigma_v2_range;
    let profiles = (0..params.n)
        .map(|_| {
            let sigma_v2 = if hi > lo { (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp() } else { lo };
            let split: Vec<f64> = match kind {
                SynthKind::Tree => {
                    let raw: Vec<f64> = (0..m).map(|_| 0.2 + rng.random::<f64>()).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|r| r / total).collect()
                }
                SynthKind::Random => vec![1.0 / m as f64; m],
            };
            let diag = DVector::from_iterator(m, split.iter().map(|r| r * 100.0 * sigma_v2));
            NodeProfile {
                sigma_v2,
                r_u: Mat::from_diagonal(&diag),
                mu: params.mu,
                nu: params.nu,
                energy_budget: f64::INFINITY,
            }
        })
        .collect();
    GlobalModel { w_true: DVector::from_element(m, 1.0 / (m as f64).sqrt()), profiles, network_budget: f64::INFINITY }
}
