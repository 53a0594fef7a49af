//! MRT precoding, power normalization and rate bookkeeping.

use crate::channel::{PhaseConfig, SystemModel};
use crate::error::{Error, Result};
use crate::estimation::{estimate_covariance, EstimateSet, EstimationStats, Protocol};
use crate::linalg::{quad_form, trace_re, CMat, CVec};
use crate::scenario::SystemConfig;

#[derive(Debug, Clone)]
pub struct Precoder {
    /// Columns `g_k = zeta * ĥ_k`.
    pub g: CMat,
    pub zeta: f64,
    pub psi: f64,
}

pub fn mrt_precoder(estimates: &EstimateSet, cfg: &SystemConfig, psi: f64) -> Result<Precoder> {
    if !(psi > 0.0) {
        return Err(Error::InvalidArgument(format!("normalization Psi must be positive, got {psi}")));
    }
    let zeta = (cfg.p_max / psi).sqrt();
    let g = CMat::from_columns(&estimates.h_hat).scale(zeta);
    Ok(Precoder { g, zeta, psi })
}

/// `sum_k p_k tr(D_k + C_k)` for given estimator statistics.
pub fn psi_from_stats(model: &SystemModel, phase: &PhaseConfig, stats: &EstimationStats) -> Result<f64> {
    model.check_phase(phase)?;
    let p = model.scenario().config().powers();
    Ok((0..model.k())
        .map(|k| p[k] * (model.los_aggregate(phase, k).norm_squared() + trace_re(&stats.c[k])))
        .sum())
}

/// Closed-form `Psi = E[tr(P Ĥ Ĥ^H)]` for the estimator as simulated.
pub fn psi_deterministic(model: &SystemModel, phase: &PhaseConfig, protocol: Protocol) -> Result<f64> {
    let stats = estimate_covariance(model, protocol)?;
    psi_from_stats(model, phase, &stats)
}

/// `tr(P Ĥ Ĥ^H)` of one set of estimates.
pub fn psi_instantaneous(h_hat: &[CVec], p: &[f64]) -> f64 {
    h_hat.iter().zip(p).map(|(h, pk)| pk * h.norm_squared()).sum()
}

/// Instantaneous SINRs given estimates and the error covariances `C̃_k`.
pub fn instantaneous_sinr_with(h_hat: &[CVec], c_tilde: &[CMat], p: &[f64], rho: f64) -> Vec<f64> {
    let k_count = h_hat.len();
    let psi = psi_instantaneous(h_hat, p);
    (0..k_count)
        .map(|k| {
            let hk = &h_hat[k];
            let signal = p[k] * hk.norm_squared().powi(2);
            let mut denom = psi / rho;
            for f in 0..k_count {
                if f != k {
                    denom += p[f] * hk.dotc(&h_hat[f]).norm_sqr();
                }
                denom += p[f] * quad_form(&c_tilde[k], &h_hat[f]);
            }
            signal / denom
        })
        .collect()
}

pub fn instantaneous_sinr(estimates: &EstimateSet, model: &SystemModel, phase: &PhaseConfig) -> Result<Vec<f64>> {
    model.check_phase(phase)?;
    let c_tilde = estimates
        .stats
        .c_tilde
        .as_ref()
        .ok_or(Error::UnsupportedProtocol(estimates.protocol))?;
    let cfg = model.scenario().config();
    Ok(instantaneous_sinr_with(&estimates.h_hat, c_tilde, &cfg.powers(), cfg.rho()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRecord {
    pub gamma: Vec<f64>,
    /// Per-user net rates in bits/s/Hz.
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub overhead_symbols: f64,
    pub loss_factor: f64,
}

/// `1 - S tau_S / tau_C`.
pub fn loss_factor(cfg: &SystemConfig, subphases: f64) -> Result<f64> {
    let overhead = subphases * cfg.training_length();
    if overhead > cfg.tau_c {
        return Err(Error::TrainingExceedsCoherence {
            overhead,
            coherence: cfg.tau_c,
        });
    }
    Ok(1.0 - overhead / cfg.tau_c)
}

pub fn net_rate(gammas: &[f64], subphases: f64, cfg: &SystemConfig) -> Result<RateRecord> {
    let lf = loss_factor(cfg, subphases)?;
    let rate: Vec<f64> = gammas.iter().map(|g| lf * (1.0 + g).log2()).collect();
    Ok(RateRecord {
        gamma: gammas.to_vec(),
        sum_rate: rate.iter().sum(),
        rate,
        overhead_symbols: subphases * cfg.training_length(),
        loss_factor: lf,
    })
}
