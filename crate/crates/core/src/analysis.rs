//! Structural scattering in a SISO link with a single-connected RIS.
//!
//! With matched antennas and an obstructed direct link, the exact channel is
//! `h = −h_RI h_IT + h_RI Θ h_IT`, while the widely used model keeps only
//! `h′ = h_RI Θ h_IT`. The Θ-independent term `−h_RI h_IT` is the structural
//! scattering of the RIS, and it raises the achievable received power.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CVector, C64};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct SisoInstance {
    /// Entries of the RIS-to-receiver row `h_RI`.
    pub h_ri: CVector,
    /// Entries of the transmitter-to-RIS column `h_IT`.
    pub h_it: CVector,
    /// Transmit power, W.
    pub p_t: f64,
}

impl SisoInstance {
    pub fn new(h_ri: CVector, h_it: CVector, p_t: f64) -> Result<Self> {
        if h_ri.len() != h_it.len() || h_ri.is_empty() {
            return Err(Error::Dimension(format!(
                "h_RI has {} entries, h_IT has {}",
                h_ri.len(),
                h_it.len()
            )));
        }
        Ok(Self { h_ri, h_it, p_t })
    }

    pub fn n_i(&self) -> usize {
        self.h_ri.len()
    }

    /// Per-element cascades `[h_RI]_n [h_IT]_n`.
    pub fn cascades(&self) -> impl Iterator<Item = C64> + '_ {
        self.h_ri.iter().zip(self.h_it.iter()).map(|(a, b)| a * b)
    }

    /// Structural term `h_RI h_IT`.
    pub fn structural(&self) -> C64 {
        self.cascades().sum()
    }

    fn check(&self, theta: &[f64]) {
        assert_eq!(theta.len(), self.n_i(), "one phase per RIS element");
    }
}

/// `h = −h_RI h_IT + h_RI Θ h_IT`, `Θ = diag(e^{jθ})`.
pub fn siso_exact(inst: &SisoInstance, theta: &[f64]) -> C64 {
    -inst.structural() + siso_approx(inst, theta)
}

/// `h′ = h_RI Θ h_IT`.
pub fn siso_approx(inst: &SisoInstance, theta: &[f64]) -> C64 {
    inst.check(theta);
    inst.cascades().zip(theta).map(|(a, &t)| a * C64::from_polar(1.0, t)).sum()
}

/// `P_R = P_T (|h_RI h_IT| + Σ|[h_RI]_n[h_IT]_n|)²` and phases achieving it.
///
/// Every RIS term is rotated onto the structural term `−h_RI h_IT`.
pub fn max_power_exact(inst: &SisoInstance) -> (f64, Vec<f64>) {
    let target = (-inst.structural()).arg();
    let theta = inst.cascades().map(|a| wrap(target - a.arg())).collect();
    let sum: f64 = inst.cascades().map(|a| a.norm()).sum();
    (inst.p_t * (inst.structural().norm() + sum).powi(2), theta)
}

/// `P_R′ = P_T (Σ|[h_RI]_n[h_IT]_n|)²` and the co-phasing phases.
pub fn max_power_approx(inst: &SisoInstance) -> (f64, Vec<f64>) {
    let theta = inst.cascades().map(|a| wrap(-a.arg())).collect();
    let sum: f64 = inst.cascades().map(|a| a.norm()).sum();
    (inst.p_t * sum * sum, theta)
}

fn wrap(x: f64) -> f64 {
    x.rem_euclid(TAU)
}

/// `E[P_R] = N² + √(πN)·N + N` for unit-modulus random-phase channels
/// (central-limit approximation, loose at very small `N`).
pub fn los_expected_power(n_i: usize) -> f64 {
    let n = n_i as f64;
    n * n + (PI * n).sqrt() * n + n
}

/// `δ = (E[P_R] − P_R′)/E[P_R] = (√(πN) + 1)/(N + √(πN) + 1)`.
pub fn los_delta(n_i: usize) -> f64 {
    let n = n_i as f64;
    let r = (PI * n).sqrt();
    (r + 1.0) / (n + r + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Unit-modulus entries with independent uniform phases.
    LosRandomPhase,
    /// Independent `CN(0, 1)` entries.
    Rayleigh,
}

/// Draws one SISO instance with unit transmit power.
pub fn draw_instance<R: Rng>(rng: &mut R, n_i: usize, model: ChannelModel) -> SisoInstance {
    let entry = |rng: &mut R| match model {
        ChannelModel::LosRandomPhase => C64::from_polar(1.0, rng.random_range(0.0..TAU)),
        ChannelModel::Rayleigh => {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    };
    let h_ri = CVector::from_fn(n_i, |_, _| entry(rng));
    let h_it = CVector::from_fn(n_i, |_, _| entry(rng));
    SisoInstance { h_ri, h_it, p_t: 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSummary {
    pub n_i: usize,
    pub trials: usize,
    pub mean_pr: f64,
    pub mean_prp: f64,
    pub se_pr: f64,
    pub se_prp: f64,
}

impl PowerSummary {
    /// Empirical relative gain of the exact model, `(P̄_R − P̄_R′)/P̄_R`.
    pub fn delta(&self) -> f64 {
        (self.mean_pr - self.mean_prp) / self.mean_pr
    }
}

/// Monte-Carlo means (with standard errors) of the optimal received powers
/// under both models. Trial `t` uses the substream `(seed, n_i, t)`, so the
/// result does not depend on the thread count.
pub fn monte_carlo_powers(n_i: usize, trials: usize, seed: u64, model: ChannelModel) -> Result<PowerSummary> {
    if trials == 0 || n_i == 0 {
        return Err(Error::InvalidConfig(vec!["trials and n_i must be at least 1".into()]));
    }
    let samples: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::stream(seed, &[n_i as u64, t as u64]);
            let inst = draw_instance(&mut rng, n_i, model);
            (max_power_exact(&inst).0, max_power_approx(&inst).0)
        })
        .collect();
    let (m, s) = mean_se(samples.iter().map(|p| p.0));
    let (mp, sp) = mean_se(samples.iter().map(|p| p.1));
    Ok(PowerSummary { n_i, trials, mean_pr: m, mean_prp: mp, se_pr: s, se_prp: sp })
}

/// Sample mean and standard error, summed in order.
pub fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
