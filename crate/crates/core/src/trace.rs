//! Network MSD learning curves and the metrics derived from them.

use crate::error::{Error, Result};

/// Fraction of the trace averaged for the steady-state estimate.
pub const STEADY_TAIL_FRACTION: f64 = 0.2;

/// Per-iteration network MSD (linear scale) with an optional energy ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdTrace {
    pub msd: Vec<f64>,
    /// Network energy spent in each iteration, averaged over runs.
    pub energy: Vec<f64>,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl MsdTrace {
    pub fn new(msd: Vec<f64>) -> Self {
        let energy = vec![0.0; msd.len()];
        MsdTrace { msd, energy }
    }

    pub fn with_energy(msd: Vec<f64>, energy: Vec<f64>) -> Self {
        assert_eq!(msd.len(), energy.len());
        MsdTrace { msd, energy }
    }

    pub fn len(&self) -> usize {
        self.msd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }

    pub fn msd_db(&self) -> Vec<f64> {
        self.msd.iter().map(|&x| to_db(x)).collect()
    }

    /// Mean of the last 20% of iterations (at least one).
    pub fn steady_state(&self) -> f64 {
        tail_mean(&self.msd, STEADY_TAIL_FRACTION)
    }

    pub fn steady_state_db(&self) -> f64 {
        to_db(self.steady_state())
    }

    /// Mean over the tail of the iteration window `[from, to)`.
    pub fn window_steady_state(&self, from: usize, to: usize) -> f64 {
        tail_mean(&self.msd[from..to], STEADY_TAIL_FRACTION)
    }

    pub fn cumulative_energy(&self) -> Vec<f64> {
        self.energy
            .iter()
            .scan(0.0, |acc, &e| {
                *acc += e;
                Some(*acc)
            })
            .collect()
    }

    /// Iteration at which 90% of the decrease toward steady state is first
    /// reached.
    pub fn iterations_to_90(&self) -> Result<usize> {
        Ok(convergence_point(&self.msd)?.0)
    }

    /// dB decrease per iteration until 90% of the decrease toward steady
    /// state is reached.
    pub fn convergence_rate(&self) -> Result<f64> {
        convergence_rate(&self.msd)
    }

    /// Energy spent up to and including the 90%-convergence iteration.
    pub fn energy_to_90(&self) -> Result<f64> {
        let t = self.iterations_to_90()?;
        Ok(self.energy[..=t].iter().sum())
    }
}

fn tail_mean(x: &[f64], frac: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let k = ((x.len() as f64 * frac).ceil() as usize).clamp(1, x.len());
    x[x.len() - k..].iter().sum::<f64>() / k as f64
}

fn convergence_point(msd: &[f64]) -> Result<(usize, f64)> {
    if msd.len() < 2 {
        return Err(Error::NotConverged("trace too short".into()));
    }
    let start = msd[0];
    let steady = tail_mean(msd, STEADY_TAIL_FRACTION);
    let decrease = start - steady;
    if !(decrease > 0.0) {
        return Err(Error::NotConverged("no decrease toward steady state".into()));
    }
    let last = *msd.last().unwrap();
    if (last - steady).abs() > 0.01 * decrease {
        return Err(Error::NotConverged(format!(
            "final value {last:.3e} is not within 1% of the decrease from tail average {steady:.3e}"
        )));
    }
    let target = start - 0.9 * decrease;
    let t = msd
        .iter()
        .position(|&x| x <= target)
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::NotConverged("90% decrease never reached".into()))?;
    Ok((t, steady))
}

/// `(MSD₀ − MSD_T)/T` in dB, where `T` is the first iteration at which the
/// linear MSD has covered 90% of its decrease toward the tail average.
pub fn convergence_rate(msd: &[f64]) -> Result<f64> {
    let (t, _) = convergence_point(msd)?;
    Ok((to_db(msd[0]) - to_db(msd[t])) / t as f64)
}
