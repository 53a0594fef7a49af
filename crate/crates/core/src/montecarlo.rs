//! Sample-average evaluation of the ergodic SINR and empirical checks of the
//! closed-form statistics.
//!
//! Sample `i` draws everything from `sample_seed(master, i)`; samples are
//! processed in fixed-size chunks whose partial sums are combined in index
//! order, so results are identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channels, PhaseConfig, SystemModel};
use crate::error::{Error, Result};
use crate::estimation::{rate_subphases, Estimator, Protocol};
use crate::linalg::{frobenius, outer, CMat, C64};
use crate::precoding::{loss_factor, psi_instantaneous};
use crate::rng::sample_seed;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub protocol: Protocol,
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("Monte-Carlo needs at least one sample".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct SampleRecord {
    /// `h_k^H ĥ_k`.
    gain: Vec<C64>,
    /// `sum_{f != k} p_f |h_k^H ĥ_f|^2`.
    interference: Vec<f64>,
    /// `tr(P Ĥ Ĥ^H)`.
    psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSinr {
    pub gamma: Vec<f64>,
    /// Jackknife standard errors of `gamma`.
    pub stderr: Vec<f64>,
    /// Sample mean of `tr(P Ĥ Ĥ^H)`.
    pub psi: f64,
    pub n_samples: usize,
}

fn chunks(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n))).collect()
}

fn collect_records(model: &SystemModel, phase: &PhaseConfig, mc: &McConfig) -> Result<Vec<SampleRecord>> {
    mc.validate()?;
    model.check_phase(phase)?;
    let estimator = Estimator::new(model, mc.protocol)?;
    let p = model.scenario().config().powers();
    let k_count = model.k();
    let parts: Vec<Result<Vec<SampleRecord>>> = chunks(mc.n_samples)
        .into_par_iter()
        .map(|(lo, hi)| {
            (lo..hi)
                .map(|i| {
                    let seed = sample_seed(mc.seed, i as u64);
                    let r = sample_channels(model, phase, seed)?;
                    let est = estimator.estimate(model, phase, &r, seed)?;
                    let gain = (0..k_count).map(|k| r.h[k].dotc(&est.h_hat[k])).collect();
                    let interference = (0..k_count)
                        .map(|k| {
                            (0..k_count)
                                .filter(|&f| f != k)
                                .map(|f| p[f] * r.h[k].dotc(&est.h_hat[f]).norm_sqr())
                                .sum()
                        })
                        .collect();
                    Ok(SampleRecord {
                        gain,
                        interference,
                        psi: psi_instantaneous(&est.h_hat, &p),
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(mc.n_samples);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Sums {
    gain: C64,
    gain2: f64,
    interference: f64,
    psi: f64,
}

fn sinr_from_sums(s: &Sums, n: f64, pk: f64, rho: f64) -> f64 {
    let mean = s.gain / n;
    let var = if n > 1.0 {
        (s.gain2 - n * mean.norm_sqr()) / (n - 1.0)
    } else {
        0.0
    };
    pk * mean.norm_sqr() / (pk * var.max(0.0) + s.interference / n + s.psi / n / rho)
}

/// Ergodic SINR of every user from sample averages of the expectations in
/// the MRT SINR expression.
pub fn ergodic_sinr_mc(model: &SystemModel, phase: &PhaseConfig, mc: &McConfig) -> Result<McSinr> {
    let records = collect_records(model, phase, mc)?;
    let cfg = model.scenario().config();
    let p = cfg.powers();
    let rho = cfg.rho();
    let n = records.len();
    let nf = n as f64;
    let psi_total: f64 = records.iter().map(|r| r.psi).sum();
    let mut gamma = Vec::with_capacity(model.k());
    let mut stderr = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let mut total = Sums {
            gain: C64::new(0.0, 0.0),
            gain2: 0.0,
            interference: 0.0,
            psi: psi_total,
        };
        for r in &records {
            total.gain += r.gain[k];
            total.gain2 += r.gain[k].norm_sqr();
            total.interference += r.interference[k];
        }
        let g = sinr_from_sums(&total, nf, p[k], rho);
        let se = if n > 2 {
            let loo: Vec<f64> = records
                .iter()
                .map(|r| {
                    let s = Sums {
                        gain: total.gain - r.gain[k],
                        gain2: total.gain2 - r.gain[k].norm_sqr(),
                        interference: total.interference - r.interference[k],
                        psi: total.psi - r.psi,
                    };
                    sinr_from_sums(&s, nf - 1.0, p[k], rho)
                })
                .collect();
            let mean = loo.iter().sum::<f64>() / nf;
            ((nf - 1.0) / nf * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
        } else {
            f64::NAN
        };
        gamma.push(g);
        stderr.push(se);
    }
    Ok(McSinr {
        gamma,
        stderr,
        psi: psi_total / nf,
        n_samples: n,
    })
}

/// Net sum-rate from the Monte-Carlo SINRs, charged the same training
/// overhead as the deterministic curves.
pub fn net_sum_rate_from_mc(model: &SystemModel, protocol: Protocol, gamma: &[f64]) -> Result<f64> {
    let cfg = model.scenario().config();
    let lf = loss_factor(cfg, rate_subphases(cfg, protocol))?;
    Ok(lf * gamma.iter().map(|g| (1.0 + g).log2()).sum::<f64>())
}

pub fn ergodic_net_sum_rate_mc(model: &SystemModel, phase: &PhaseConfig, mc: &McConfig) -> Result<f64> {
    let cfg = model.scenario().config();
    loss_factor(cfg, rate_subphases(cfg, mc.protocol))?;
    let sinr = ergodic_sinr_mc(model, phase, mc)?;
    net_sum_rate_from_mc(model, mc.protocol, &sinr.gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    /// `‖Ĉ_k − C_k‖_F / ‖C_k‖_F` for the sample covariance of `ĥ_k − h̄_k(Θ)`.
    pub deviation: Vec<f64>,
    /// `‖E[(h_k − ĥ_k)(ĥ_k − h̄_k)^H]‖_F / ‖C_k‖_F`.
    pub orthogonality: Vec<f64>,
    /// `‖mean(ĥ_k) − h̄_k‖ / sqrt(‖h̄_k‖² + tr C_k)`.
    pub mean_error: Vec<f64>,
}

impl CovarianceReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_orthogonality(&self) -> f64 {
        self.orthogonality.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_mean_error(&self) -> f64 {
        self.mean_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
struct CovSums {
    cov: Vec<CMat>,
    cross: Vec<CMat>,
    mean: Vec<crate::linalg::CVec>,
}

impl CovSums {
    fn zeros(m: usize, k: usize) -> Self {
        Self {
            cov: vec![CMat::zeros(m, m); k],
            cross: vec![CMat::zeros(m, m); k],
            mean: vec![crate::linalg::CVec::zeros(m); k],
        }
    }

    fn add(&mut self, other: &CovSums) {
        for k in 0..self.cov.len() {
            self.cov[k] += &other.cov[k];
            self.cross[k] += &other.cross[k];
            self.mean[k] += &other.mean[k];
        }
    }
}

/// Compares the empirical second-order statistics of the estimator with the
/// closed forms it is supposed to follow.
pub fn validate_covariance(model: &SystemModel, phase: &PhaseConfig, mc: &McConfig) -> Result<CovarianceReport> {
    mc.validate()?;
    model.check_phase(phase)?;
    let estimator = Estimator::new(model, mc.protocol)?;
    let (m, k_count) = (model.m(), model.k());
    let hbar = model.los_aggregates(phase);
    let parts: Vec<Result<CovSums>> = chunks(mc.n_samples)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = CovSums::zeros(m, k_count);
            for i in lo..hi {
                let seed = sample_seed(mc.seed, i as u64);
                let r = sample_channels(model, phase, seed)?;
                let est = estimator.estimate(model, phase, &r, seed)?;
                for k in 0..k_count {
                    let centered = &est.h_hat[k] - &hbar[k];
                    let err = &r.h[k] - &est.h_hat[k];
                    acc.cov[k] += outer(&centered, &centered);
                    acc.cross[k] += outer(&err, &centered);
                    acc.mean[k] += &est.h_hat[k];
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = CovSums::zeros(m, k_count);
    for part in parts {
        total.add(&part?);
    }
    let n = C64::new(mc.n_samples as f64, 0.0);
    let c = &estimator.stats().c;
    let mut report = CovarianceReport {
        deviation: Vec::with_capacity(k_count),
        orthogonality: Vec::with_capacity(k_count),
        mean_error: Vec::with_capacity(k_count),
    };
    for k in 0..k_count {
        let cov = &total.cov[k] / n;
        let scale = frobenius(&c[k]);
        report.deviation.push(frobenius(&(&cov - &c[k])) / scale);
        report.orthogonality.push(frobenius(&(&total.cross[k] / n)) / scale);
        let mean = &total.mean[k] / n;
        let rms = (hbar[k].norm_squared() + crate::linalg::trace_re(&c[k])).sqrt();
        report.mean_error.push((mean - &hbar[k]).norm() / rms);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detequiv::sinr_det;
    use crate::scenario::{build_scenario, Geometry, PropagationModel, Scenario, SystemConfig};

    fn toy(m: usize, n1: usize, n2: usize, l: usize, k: usize) -> Scenario {
        let cfg = SystemConfig {
            m,
            k,
            l,
            n1,
            n2,
            ..Default::default()
        };
        build_scenario(cfg, Geometry::arcs(l, k, &Default::default())).unwrap()
    }

    fn mc(n: usize, protocol: Protocol) -> McConfig {
        McConfig {
            n_samples: n,
            seed: 2024,
            protocol,
        }
    }

    #[test]
    fn deterministic_channel_has_no_variance() {
        let mut cfg = SystemConfig {
            m: 4,
            k: 1,
            l: 1,
            n1: 1,
            n2: 2,
            ..Default::default()
        };
        cfg.propagation = PropagationModel {
            rician_intercept: 1e15,
            ..Default::default()
        };
        let s = build_scenario(cfg, Geometry::arcs(1, 1, &Default::default())).unwrap();
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::from_angles(&[0.2, 1.0]);
        let r = ergodic_sinr_mc(&model, &phase, &mc(200, Protocol::Perfect)).unwrap();
        let h = model.los_aggregate(&phase, 0);
        let want = h.norm_squared().powi(2) / (h.norm_squared() / s.config().rho());
        assert!((r.gamma[0] / want - 1.0).abs() < 1e-6);
    }

    /// Exact finite-M ergodic SINR under perfect CSI, including the
    /// self-interference variance `2 h̄^H A h̄ + tr(A^2)`.
    fn exact_perfect_sinr(model: &SystemModel, phase: &PhaseConfig) -> Vec<f64> {
        use crate::linalg::{quad_form, trace_product_re, trace_re};
        let cfg = model.scenario().config();
        let p = cfg.powers();
        let hbar = model.los_aggregates(phase);
        let a = model.covariances();
        let mean: Vec<f64> = (0..model.k()).map(|k| hbar[k].norm_squared() + trace_re(&a[k])).collect();
        let psi: f64 = (0..model.k()).map(|k| p[k] * mean[k]).sum();
        (0..model.k())
            .map(|k| {
                let var = 2.0 * quad_form(&a[k], &hbar[k]) + trace_product_re(&a[k], &a[k]);
                let cross: f64 = (0..model.k())
                    .filter(|&f| f != k)
                    .map(|f| {
                        p[f] * (hbar[k].dotc(&hbar[f]).norm_sqr()
                            + quad_form(&a[k], &hbar[f])
                            + quad_form(&a[f], &hbar[k])
                            + trace_product_re(&a[f], &a[k]))
                    })
                    .sum();
                p[k] * mean[k].powi(2) / (p[k] * var + cross + psi / cfg.rho())
            })
            .collect()
    }

    #[test]
    fn matches_exact_perfect_csi_sinr() {
        let s = toy(8, 2, 2, 2, 3);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::from_angles(&[0.1, 0.9, 2.0, -1.0, 0.4, 3.0, 1.7, -2.2]);
        let exact = exact_perfect_sinr(&model, &phase);
        let r = ergodic_sinr_mc(&model, &phase, &mc(20_000, Protocol::Perfect)).unwrap();
        for k in 0..3 {
            let (a, b) = (r.gamma[k], exact[k]);
            assert!((a / b - 1.0).abs() < 0.03, "mc {a} exact {b}");
            assert!((a - b).abs() < 4.0 * r.stderr[k] + 1e-3 * b, "mc {a} exact {b} se {}", r.stderr[k]);
        }
    }

    /// The deterministic equivalent drops the O(M) self-variance of
    /// `h_k^H ĥ_k`, so the toy-size match is checked where noise dominates.
    #[test]
    fn matches_deterministic_equivalent_at_toy_size() {
        let cfg = SystemConfig {
            m: 8,
            k: 3,
            l: 2,
            n1: 2,
            n2: 2,
            p_max: 0.1,
            ..Default::default()
        };
        let s = build_scenario(cfg, Geometry::arcs(2, 3, &Default::default())).unwrap();
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::from_angles(&[0.1, 0.9, 2.0, -1.0, 0.4, 3.0, 1.7, -2.2]);
        for p in [Protocol::Dft, Protocol::De] {
            let det = sinr_det(&model, &phase, p).unwrap();
            let r = ergodic_sinr_mc(&model, &phase, &mc(10_000, p)).unwrap();
            for (a, b) in r.gamma.iter().zip(&det) {
                assert!((a / b - 1.0).abs() < 0.05, "{p}: mc {a} det {b}");
            }
        }
    }

    #[test]
    fn deterministic_equivalent_gap_shrinks_with_m() {
        let phase = PhaseConfig::ones(4);
        let gap = |m: usize| {
            let s = toy(m, 2, 2, 1, 2);
            let model = SystemModel::new(&s);
            let det = sinr_det(&model, &phase, Protocol::De).unwrap();
            let r = ergodic_sinr_mc(&model, &phase, &mc(4000, Protocol::De)).unwrap();
            r.gamma.iter().zip(&det).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max)
        };
        assert!(gap(64) < gap(4));
    }

    #[test]
    fn net_rate_uses_protocol_overhead() {
        let s = toy(8, 2, 2, 2, 3);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::ones(8);
        let cfg = s.config();
        for p in [Protocol::Dft, Protocol::De] {
            let m = mc(500, p);
            let gamma = ergodic_sinr_mc(&model, &phase, &m).unwrap().gamma;
            let raw: f64 = gamma.iter().map(|g| (1.0 + g).log2()).sum();
            let lf = loss_factor(cfg, rate_subphases(cfg, p)).unwrap();
            let net = ergodic_net_sum_rate_mc(&model, &phase, &m).unwrap();
            assert!((net - lf * raw).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_samples_is_an_error() {
        let s = toy(2, 1, 1, 1, 1);
        let model = SystemModel::new(&s);
        assert!(ergodic_net_sum_rate_mc(&model, &PhaseConfig::ones(1), &mc(0, Protocol::De)).is_err());
    }

    #[test]
    fn reproducible_for_any_thread_count() {
        let s = toy(4, 1, 2, 1, 2);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::ones(2);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ergodic_sinr_mc(&model, &phase, &mc(1000, Protocol::Dft)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn perfect_csi_covariance_is_a() {
        let s = toy(3, 1, 2, 1, 1);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::ones(2);
        let rep = validate_covariance(&model, &phase, &mc(20_000, Protocol::Perfect)).unwrap();
        assert!(rep.max_deviation() < 0.05);
        let again = validate_covariance(&model, &phase, &mc(20_000, Protocol::Perfect)).unwrap();
        assert_eq!(rep, again);
    }
}
