//! Channel estimation: the multi-sub-phase DFT protocol, single-sub-phase
//! direct estimation (DE) of the aggregate channel, and perfect CSI.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, PhaseConfig, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{complex_normal_vec, inverse_hpd, unit_phase, CMat, CVec, C64};
use crate::rng::{stream, StreamTag};
use crate::scenario::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dft,
    De,
    Perfect,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Dft, Protocol::De, Protocol::Perfect];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Dft => "dft",
            Protocol::De => "de",
            Protocol::Perfect => "perfect",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" => Ok(Protocol::Dft),
            "de" => Ok(Protocol::De),
            "perfect" => Ok(Protocol::Perfect),
            _ => Err(Error::InvalidArgument(format!("unknown protocol `{s}`"))),
        }
    }
}

/// Sub-phases charged in the rate expressions. Real-valued for the DFT
/// protocol (`NL/M + 1`); perfect CSI is charged one sub-phase only when
/// the config asks for it.
pub fn rate_subphases(cfg: &SystemConfig, protocol: Protocol) -> f64 {
    match protocol {
        Protocol::Dft => (cfg.n() * cfg.l) as f64 / cfg.m as f64 + 1.0,
        Protocol::De => 1.0,
        Protocol::Perfect => {
            if cfg.perfect_csi_training_loss {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Sub-phases actually simulated: `ceil(NL/M) + 1` for the DFT protocol.
pub fn training_subphases(cfg: &SystemConfig, protocol: Protocol) -> usize {
    match protocol {
        Protocol::Dft => (cfg.n() * cfg.l).div_ceil(cfg.m) + 1,
        Protocol::De => 1,
        Protocol::Perfect => usize::from(cfg.perfect_csi_training_loss),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    /// `S x (NL + 1)`, `[V]_{s,n} = exp(-j 2 pi n s / S)` (0-based).
    pub v: CMat,
    pub subphases: usize,
}

pub fn dft_training_matrix(s: usize, n: usize, l: usize) -> Result<TrainingMatrix> {
    if s < 1 {
        return Err(Error::InvalidArgument("training needs at least one sub-phase".into()));
    }
    let cols = n * l + 1;
    let v = CMat::from_fn(s, cols, |r, c| {
        // Reduce the exponent first so large indices keep full precision.
        let e = (r * c) % s;
        unit_phase(-2.0 * PI * e as f64 / s as f64)
    });
    Ok(TrainingMatrix { v, subphases: s })
}

/// Θ-independent second-order statistics of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    /// Covariance of the estimate around its mean, `C_k`.
    pub c: Vec<CMat>,
    /// Error covariance `A_k - C_k` (DFT and perfect CSI).
    pub c_tilde: Option<Vec<CMat>>,
    /// `R_k Q_k` for direct estimation.
    pub rq: Option<Vec<CMat>>,
    /// Sub-phases the statistics assume (real-valued).
    pub subphases: f64,
}

fn dft_shrinkage(beta_n: f64, noise: f64) -> f64 {
    beta_n / (beta_n + noise)
}

/// DFT-protocol statistics with a real-valued sub-phase count `s`.
pub fn dft_covariance(model: &SystemModel, s: f64) -> EstimationStats {
    let cfg = model.scenario().config();
    let st = model.scenario().stats();
    let snr = s * cfg.training_snr() * cfg.training_length();
    let m = cfg.m;
    let c: Vec<CMat> = (0..cfg.k)
        .map(|k| {
            let bd = st.nlos_direct(k);
            let mut c = CMat::identity(m, m).scale(bd * dft_shrinkage(bd, 1.0 / snr));
            for l in 0..cfg.l {
                let b2 = st.nlos_ris_user(l, k);
                let noise = 1.0 / (snr * m as f64 * st.beta_bs_ris[l]);
                c += model.bs_ris_gram(l).scale(b2 * dft_shrinkage(b2, noise));
            }
            c
        })
        .collect();
    let c_tilde = c
        .iter()
        .enumerate()
        .map(|(k, c)| model.covariance(k) - c)
        .collect();
    EstimationStats {
        c,
        c_tilde: Some(c_tilde),
        rq: None,
        subphases: s,
    }
}

/// Direct-estimation statistics: `C_k = R_k Q_k R_k` with `R_k = A_k`.
pub fn de_covariance(model: &SystemModel) -> Result<EstimationStats> {
    let cfg = model.scenario().config();
    let noise = 1.0 / (cfg.training_snr() * cfg.training_length());
    let m = cfg.m;
    let mut c = Vec::with_capacity(cfg.k);
    let mut rq = Vec::with_capacity(cfg.k);
    for r in model.covariances() {
        let q = inverse_hpd(&(r + CMat::identity(m, m).scale(noise)))
            .ok_or_else(|| Error::InvalidConfig("R + I/(rho_p tau_S) is not positive definite".into()))?;
        let rq_k = r * q;
        c.push(&rq_k * r);
        rq.push(rq_k);
    }
    Ok(EstimationStats {
        c,
        c_tilde: None,
        rq: Some(rq),
        subphases: 1.0,
    })
}

fn perfect_covariance(model: &SystemModel) -> EstimationStats {
    let m = model.m();
    EstimationStats {
        c: model.covariances().to_vec(),
        c_tilde: Some(vec![CMat::zeros(m, m); model.k()]),
        rq: None,
        subphases: rate_subphases(model.scenario().config(), Protocol::Perfect),
    }
}

/// Closed-form statistics of the estimator as simulated (integer sub-phases).
pub fn estimate_covariance(model: &SystemModel, protocol: Protocol) -> Result<EstimationStats> {
    check_training_snr(model.scenario().config())?;
    match protocol {
        Protocol::Dft => {
            let s = training_subphases(model.scenario().config(), Protocol::Dft);
            Ok(dft_covariance(model, s as f64))
        }
        Protocol::De => de_covariance(model),
        Protocol::Perfect => Ok(perfect_covariance(model)),
    }
}

fn check_training_snr(cfg: &SystemConfig) -> Result<()> {
    let rho_p = cfg.training_snr();
    if rho_p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("training SNR must be positive, got {rho_p}")))
    }
}

/// Per-link estimates produced by the DFT protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEstimates {
    pub h_d: Vec<CVec>,
    /// `[l][k]`.
    pub h_2: Vec<Vec<CVec>>,
}

#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub protocol: Protocol,
    /// Aggregate estimates `ĥ_k` for the data-phase configuration.
    pub h_hat: Vec<CVec>,
    pub links: Option<LinkEstimates>,
    pub stats: Arc<EstimationStats>,
    /// Integer sub-phases used to produce the estimates.
    pub subphases: usize,
}

/// Estimator with all Θ-independent work done up front.
#[derive(Debug, Clone)]
pub struct Estimator {
    protocol: Protocol,
    stats: Arc<EstimationStats>,
    training: Option<TrainingMatrix>,
    shrink_d: Vec<f64>,
    /// `[l][k]`.
    shrink_2: Vec<Vec<f64>>,
    subphases: usize,
}

impl Estimator {
    pub fn new(model: &SystemModel, protocol: Protocol) -> Result<Self> {
        let cfg = model.scenario().config();
        let st = model.scenario().stats();
        let stats = Arc::new(estimate_covariance(model, protocol)?);
        let subphases = training_subphases(cfg, protocol);
        let (training, shrink_d, shrink_2) = if protocol == Protocol::Dft {
            let snr = subphases as f64 * cfg.training_snr() * cfg.training_length();
            let shrink_d = (0..cfg.k).map(|k| dft_shrinkage(st.nlos_direct(k), 1.0 / snr)).collect();
            let shrink_2 = (0..cfg.l)
                .map(|l| {
                    let noise = 1.0 / (snr * cfg.m as f64 * st.beta_bs_ris[l]);
                    (0..cfg.k).map(|k| dft_shrinkage(st.nlos_ris_user(l, k), noise)).collect()
                })
                .collect();
            (Some(dft_training_matrix(subphases, cfg.n(), cfg.l)?), shrink_d, shrink_2)
        } else {
            (None, Vec::new(), Vec::new())
        };
        Ok(Self {
            protocol,
            stats,
            training,
            shrink_d,
            shrink_2,
            subphases,
        })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn stats(&self) -> &Arc<EstimationStats> {
        &self.stats
    }

    pub fn estimate(
        &self,
        model: &SystemModel,
        phase: &PhaseConfig,
        realization: &ChannelRealization,
        seed: u64,
    ) -> Result<EstimateSet> {
        model.check_phase(phase)?;
        let (h_hat, links) = match self.protocol {
            Protocol::Dft => {
                let links = self.dft_links(model, realization, seed);
                let h_hat = (0..model.k())
                    .map(|k| {
                        let per_ris: Vec<CVec> = (0..model.l()).map(|l| links.h_2[l][k].clone()).collect();
                        model.aggregate(&links.h_d[k], &per_ris, phase)
                    })
                    .collect();
                (h_hat, Some(links))
            }
            Protocol::De => (self.de_estimates(model, phase, realization, seed), None),
            Protocol::Perfect => (realization.h.clone(), None),
        };
        Ok(EstimateSet {
            protocol: self.protocol,
            h_hat,
            links,
            stats: Arc::clone(&self.stats),
            subphases: self.subphases,
        })
    }

    /// Link estimates from the combined observation vectors of each user.
    fn dft_links(&self, model: &SystemModel, realization: &ChannelRealization, seed: u64) -> LinkEstimates {
        let cfg = model.scenario().config();
        let st = model.scenario().stats();
        let v = &self.training.as_ref().expect("DFT estimator has a training matrix").v;
        let s = self.subphases;
        let (m, n) = (cfg.m, cfg.n());
        let noise_var = 1.0 / (cfg.training_snr() * cfg.training_length());
        let mut h_d = Vec::with_capacity(cfg.k);
        let mut h_2 = vec![Vec::with_capacity(cfg.k); cfg.l];
        for k in 0..cfg.k {
            let mut rng = stream(seed, StreamTag::DftTraining { user: k });
            let mut noise = CMat::zeros(m, s);
            for j in 0..s {
                noise.set_column(j, &complex_normal_vec(&mut rng, m, noise_var));
            }
            // Column c holds sum_s conj(V[s, c]) n_s.
            let combined = &noise * v.map(|z| z.conj());

            let los = model.direct_los(k);
            let r0 = &realization.h_d[k] + combined.column(0).unscale(s as f64);
            h_d.push(los + (r0 - los).scale(self.shrink_d[k]));

            for l in 0..cfg.l {
                let h1 = model.bs_ris(l);
                let scale = 1.0 / (s as f64 * m as f64 * st.beta_bs_ris[l]);
                let los = model.ris_los(l, k);
                let est = CVec::from_fn(n, |i, _| {
                    let w = combined.column(1 + l * n + i);
                    let r = realization.h_2[l][k][i] + h1.column(i).dotc(&w) * scale;
                    los[i] + (r - los[i]) * self.shrink_2[l][k]
                });
                h_2[l].push(est);
            }
        }
        LinkEstimates { h_d, h_2 }
    }

    fn de_estimates(
        &self,
        model: &SystemModel,
        phase: &PhaseConfig,
        realization: &ChannelRealization,
        seed: u64,
    ) -> Vec<CVec> {
        let cfg = model.scenario().config();
        let noise_var = 1.0 / (cfg.training_snr() * cfg.training_length());
        let rq = self.stats.rq.as_ref().expect("DE statistics carry R Q");
        (0..cfg.k)
            .map(|k| {
                let mut rng = stream(seed, StreamTag::DeTraining { user: k });
                let y = &realization.h[k] + complex_normal_vec(&mut rng, cfg.m, noise_var);
                let mean = model.los_aggregate(phase, k);
                let mut h = mean.clone();
                h.gemv(C64::new(1.0, 0.0), &rq[k], &(y - &mean), C64::new(1.0, 0.0));
                h
            })
            .collect()
    }
}

pub fn estimate_mmse_dft(
    model: &SystemModel,
    phase: &PhaseConfig,
    realization: &ChannelRealization,
    seed: u64,
) -> Result<EstimateSet> {
    Estimator::new(model, Protocol::Dft)?.estimate(model, phase, realization, seed)
}

pub fn estimate_de(
    model: &SystemModel,
    phase: &PhaseConfig,
    realization: &ChannelRealization,
    seed: u64,
) -> Result<EstimateSet> {
    Estimator::new(model, Protocol::De)?.estimate(model, phase, realization, seed)
}

pub fn estimate_perfect(
    model: &SystemModel,
    phase: &PhaseConfig,
    realization: &ChannelRealization,
) -> Result<EstimateSet> {
    Estimator::new(model, Protocol::Perfect)?.estimate(model, phase, realization, 0)
}
