//! Deterministic equivalents of the MRT SINR under each CSI model.
//!
//! All three protocols share one form once the `1/M` factors cancel:
//!
//! ```text
//! γ°_k = p_k (‖h̄_k‖² + tr C_k)² /
//!        ( Σ_{f≠k} p_f tr((D_f + C_f)(D_k + A_k)) + Ψ/ρ ),   Ψ = Σ_j p_j tr(D_j + C_j)
//! ```
//!
//! with `D_k = h̄_k h̄_k^H`. Only `h̄_k(Θ)` depends on the phases, so the
//! covariance traces are computed once per scenario and protocol.

use crate::channel::{PhaseConfig, SystemModel};
use crate::error::Result;
use crate::estimation::{de_covariance, dft_covariance, rate_subphases, Protocol};
use crate::linalg::{trace_product_re, trace_re, CMat, CVec};
use crate::precoding::loss_factor;
use crate::scenario::Scenario;

#[derive(Debug, Clone)]
pub struct DetEquiv {
    protocol: Protocol,
    a: Vec<CMat>,
    c: Vec<CMat>,
    trace_c: Vec<f64>,
    /// `[f][k] = tr(C_f A_k)`.
    trace_ca: Vec<Vec<f64>>,
    p: Vec<f64>,
    rho: f64,
    subphases: f64,
    loss_factor: f64,
}

/// The phase-dependent scalars entering γ° for one set of LoS aggregates.
#[derive(Debug, Clone)]
pub struct SinrTerms {
    /// `‖h̄_k‖² + tr C_k`.
    pub signal: Vec<f64>,
    /// `[f][k] = tr((D_f + C_f)(D_k + A_k))`.
    pub cross: Vec<Vec<f64>>,
    pub psi: f64,
}

impl DetEquiv {
    pub fn new(model: &SystemModel, protocol: Protocol) -> Result<Self> {
        let cfg = model.scenario().config();
        let subphases = rate_subphases(cfg, protocol);
        let lf = loss_factor(cfg, subphases)?;
        let c = match protocol {
            Protocol::Dft => dft_covariance(model, subphases).c,
            Protocol::De => de_covariance(model)?.c,
            Protocol::Perfect => model.covariances().to_vec(),
        };
        let a = model.covariances().to_vec();
        let trace_c = c.iter().map(trace_re).collect();
        let trace_ca = c
            .iter()
            .map(|cf| a.iter().map(|ak| trace_product_re(cf, ak)).collect())
            .collect();
        Ok(Self {
            protocol,
            a,
            c,
            trace_c,
            trace_ca,
            p: cfg.powers(),
            rho: cfg.rho(),
            subphases,
            loss_factor: lf,
        })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn subphases(&self) -> f64 {
        self.subphases
    }

    pub fn loss_factor(&self) -> f64 {
        self.loss_factor
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn covariance(&self, k: usize) -> &CMat {
        &self.a[k]
    }

    pub fn estimate_covariance(&self, k: usize) -> &CMat {
        &self.c[k]
    }

    pub fn trace_c(&self, k: usize) -> f64 {
        self.trace_c[k]
    }

    pub fn trace_ca(&self, f: usize, k: usize) -> f64 {
        self.trace_ca[f][k]
    }

    pub fn terms(&self, hbar: &[CVec]) -> SinrTerms {
        let k_count = hbar.len();
        let signal: Vec<f64> = (0..k_count).map(|k| hbar[k].norm_squared() + self.trace_c[k]).collect();
        let psi = signal.iter().zip(&self.p).map(|(t, p)| t * p).sum();
        let mut cross = vec![vec![0.0; k_count]; k_count];
        for k in 0..k_count {
            let ch: Vec<CVec> = (0..k_count).map(|f| &self.c[f] * &hbar[k]).collect();
            for f in 0..k_count {
                if f == k {
                    continue;
                }
                let ah = &self.a[k] * &hbar[f];
                cross[f][k] = hbar[f].dotc(&hbar[k]).norm_sqr()
                    + hbar[f].dotc(&ah).re
                    + hbar[k].dotc(&ch[f]).re
                    + self.trace_ca[f][k];
            }
        }
        SinrTerms { signal, cross, psi }
    }

    pub fn sinr_from_terms(&self, t: &SinrTerms) -> Vec<f64> {
        let k_count = t.signal.len();
        (0..k_count)
            .map(|k| {
                let interference: f64 = (0..k_count).filter(|&f| f != k).map(|f| self.p[f] * t.cross[f][k]).sum();
                self.p[k] * t.signal[k].powi(2) / (interference + t.psi / self.rho)
            })
            .collect()
    }

    pub fn sinr(&self, hbar: &[CVec]) -> Vec<f64> {
        self.sinr_from_terms(&self.terms(hbar))
    }

    pub fn sum_rate_from_sinr(&self, gamma: &[f64]) -> f64 {
        self.loss_factor * gamma.iter().map(|g| (1.0 + g).log2()).sum::<f64>()
    }

    pub fn sum_rate(&self, hbar: &[CVec]) -> f64 {
        self.sum_rate_from_sinr(&self.sinr(hbar))
    }
}

pub fn sinr_det(model: &SystemModel, phase: &PhaseConfig, protocol: Protocol) -> Result<Vec<f64>> {
    model.check_phase(phase)?;
    Ok(DetEquiv::new(model, protocol)?.sinr(&model.los_aggregates(phase)))
}

pub fn sinr_det_dft(model: &SystemModel, phase: &PhaseConfig) -> Result<Vec<f64>> {
    sinr_det(model, phase, Protocol::Dft)
}

pub fn sinr_det_de(model: &SystemModel, phase: &PhaseConfig) -> Result<Vec<f64>> {
    sinr_det(model, phase, Protocol::De)
}

pub fn sinr_det_perfect(model: &SystemModel, phase: &PhaseConfig) -> Result<Vec<f64>> {
    sinr_det(model, phase, Protocol::Perfect)
}

/// Direct estimation without RISs, in scalar closed form. The RIS links of
/// the scenario are ignored.
pub fn sinr_det_noris(scenario: &Scenario) -> Vec<f64> {
    let cfg = scenario.config();
    let st = scenario.stats();
    let m = cfg.m as f64;
    let p = cfg.powers();
    let noise = 1.0 / (cfg.training_snr() * cfg.training_length());
    let hbar: Vec<CVec> = (0..cfg.k).map(|k| crate::channel::los_direct_vector(scenario, k)).collect();
    let beta: Vec<f64> = (0..cfg.k).map(|k| st.nlos_direct(k)).collect();
    let c: Vec<f64> = beta.iter().map(|b| b * b / (b + noise)).collect();
    let norm2: Vec<f64> = hbar.iter().map(|h| h.norm_squared()).collect();
    let signal: Vec<f64> = (0..cfg.k).map(|k| norm2[k] + m * c[k]).collect();
    let psi: f64 = (0..cfg.k).map(|k| p[k] * signal[k]).sum();
    (0..cfg.k)
        .map(|k| {
            let interference: f64 = (0..cfg.k)
                .filter(|&f| f != k)
                .map(|f| {
                    p[f] * (hbar[f].dotc(&hbar[k]).norm_sqr()
                        + beta[k] * norm2[f]
                        + c[f] * norm2[k]
                        + m * c[f] * beta[k])
                })
                .sum();
            p[k] * signal[k].powi(2) / (interference + psi / cfg.rho())
        })
        .collect()
}

/// Net sum-rate in bits/s/Hz from the deterministic SINRs.
pub fn net_sum_rate_det(model: &SystemModel, phase: &PhaseConfig, protocol: Protocol) -> Result<f64> {
    model.check_phase(phase)?;
    let de = DetEquiv::new(model, protocol)?;
    Ok(de.sum_rate(&model.los_aggregates(phase)))
}

/// No-RIS net sum-rate under direct estimation (one sub-phase).
pub fn net_sum_rate_noris(scenario: &Scenario) -> Result<f64> {
    let lf = loss_factor(scenario.config(), 1.0)?;
    Ok(lf * sinr_det_noris(scenario).iter().map(|g| (1.0 + g).log2()).sum::<f64>())
}
