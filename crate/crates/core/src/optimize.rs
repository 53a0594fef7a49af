//! RIS phase design: projected gradient ascent on the statistical
//! (deterministic-equivalent) net sum-rate, and a genetic algorithm on the
//! instantaneous net sum-rate.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channels, PhaseConfig, SystemModel};
use crate::detequiv::{DetEquiv, SinrTerms};
use crate::error::{Error, Result};
use crate::estimation::{rate_subphases, EstimateSet, Estimator, Protocol};
use crate::linalg::{quad_form, CMat, CVec, C64};
use crate::precoding::{instantaneous_sinr_with, loss_factor};
use crate::rng::{sample_seed, stream, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PgaInit {
    AllOnes,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgaOptions {
    /// Stop when the squared objective change drops below this.
    pub epsilon: f64,
    /// Largest per-entry move of the first trial step.
    pub mu0: f64,
    pub backtrack_beta: f64,
    pub backtrack_c: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub init: PgaInit,
}

impl Default for PgaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            mu0: 1.0,
            backtrack_beta: 0.5,
            backtrack_c: 1e-4,
            max_iters: 500,
            fd_step: 1e-5,
            init: PgaInit::AllOnes,
        }
    }
}

impl PgaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("PGA epsilon must be positive".into()));
        }
        if !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0) {
            return Err(Error::InvalidConfig("PGA backtracking factor must lie in (0, 1)".into()));
        }
        if !(self.fd_step > 0.0 && self.mu0 > 0.0) {
            return Err(Error::InvalidConfig("PGA step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// `exp(j arg x)` elementwise.
pub fn project(x: &[C64]) -> PhaseConfig {
    PhaseConfig::project(x)
}

/// Deterministic net sum-rate as a function of the phases, with the
/// Θ-independent pieces cached for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ScsiObjective<'a> {
    model: &'a SystemModel,
    det: DetEquiv,
    /// `[H_11 ... H_1L]`, column `i = l N + n` is `u_i`.
    u: CMat,
    u_norm2: Vec<f64>,
    /// `[k][i] = u_i^H A_k u_i`.
    w_a: Vec<Vec<f64>>,
    /// `[f][i] = u_i^H C_f u_i`.
    w_c: Vec<Vec<f64>>,
    /// `[k][i]`, the LoS RIS-user entry multiplying `φ_i` in `h̄_k`.
    coeff: Vec<Vec<C64>>,
}

fn column_quad_forms(mat: &CMat, u: &CMat) -> Vec<f64> {
    let au = mat * u;
    (0..u.ncols()).map(|i| u.column(i).dotc(&au.column(i)).re).collect()
}

impl<'a> ScsiObjective<'a> {
    pub fn new(model: &'a SystemModel, protocol: Protocol) -> Result<Self> {
        let det = DetEquiv::new(model, protocol)?;
        let (m, n, l_count, k_count) = (model.m(), model.n(), model.l(), model.k());
        let mut u = CMat::zeros(m, l_count * n);
        for l in 0..l_count {
            u.view_mut((0, l * n), (m, n)).copy_from(model.bs_ris(l));
        }
        let u_norm2 = (0..u.ncols()).map(|i| u.column(i).norm_squared()).collect();
        let w_a = (0..k_count).map(|k| column_quad_forms(det.covariance(k), &u)).collect();
        let w_c = (0..k_count).map(|f| column_quad_forms(det.estimate_covariance(f), &u)).collect();
        let coeff = (0..k_count)
            .map(|k| (0..l_count).flat_map(|l| model.ris_los(l, k).iter().copied()).collect())
            .collect();
        Ok(Self {
            model,
            det,
            u,
            u_norm2,
            w_a,
            w_c,
            coeff,
        })
    }

    pub fn det(&self) -> &DetEquiv {
        &self.det
    }

    /// Objective at arbitrary (not necessarily unit-modulus) coefficients.
    pub fn value_raw(&self, phi: &[C64]) -> f64 {
        self.det.sum_rate(&self.raw_aggregates(phi))
    }

    fn raw_aggregates(&self, phi: &[C64]) -> Vec<CVec> {
        let reflected = CVec::from_iterator(phi.len(), phi.iter().copied());
        (0..self.model.k())
            .map(|k| {
                let x = CVec::from_iterator(phi.len(), self.coeff[k].iter().zip(reflected.iter()).map(|(c, p)| c * p));
                self.model.direct_los(k) + &self.u * x
            })
            .collect()
    }

    pub fn value(&self, phase: &PhaseConfig) -> f64 {
        self.det.sum_rate(&self.model.los_aggregates(phase))
    }

    /// Central finite-difference gradient in the real and imaginary parts of
    /// every `φ_i`. Each perturbation moves `h̄_k` along `u_i`, so all terms
    /// are updated in closed form instead of being recomputed.
    pub fn gradient(&self, phi: &[C64], fd_step: f64) -> Vec<C64> {
        let k_count = self.model.k();
        let len = phi.len();
        if len == 0 {
            return Vec::new();
        }
        let hbar = self.raw_aggregates(phi);
        let base = self.det.terms(&hbar);
        let hmat = CMat::from_columns(&hbar);
        let uh = self.u.adjoint();
        // x[i, k] = u_i^H h_k
        let x = &uh * &hmat;
        // ya[k][(i, f)] = u_i^H A_k h_f ; zc[f][(i, k)] = u_i^H C_f h_k
        let ya: Vec<CMat> = (0..k_count).map(|k| &uh * (self.det.covariance(k) * &hmat)).collect();
        let zc: Vec<CMat> = (0..k_count).map(|f| &uh * (self.det.estimate_covariance(f) * &hmat)).collect();
        let norm2: Vec<f64> = hbar.iter().map(|h| h.norm_squared()).collect();
        let mut gram = vec![vec![C64::new(0.0, 0.0); k_count]; k_count];
        let mut qa = vec![vec![0.0; k_count]; k_count];
        let mut qc = vec![vec![0.0; k_count]; k_count];
        for f in 0..k_count {
            for k in 0..k_count {
                gram[f][k] = hbar[f].dotc(&hbar[k]);
                qa[f][k] = quad_form(self.det.covariance(k), &hbar[f]);
                qc[f][k] = quad_form(self.det.estimate_covariance(f), &hbar[k]);
            }
        }
        let p = self.det.powers();
        let eval = |i: usize, t: C64, terms: &mut SinrTerms| -> f64 {
            let nu = self.u_norm2[i];
            let a: Vec<C64> = (0..k_count).map(|k| t * self.coeff[k][i]).collect();
            // u_i^H h_k, so h_k^H u_i is its conjugate.
            let xi: Vec<C64> = (0..k_count).map(|k| x[(i, k)]).collect();
            let mut psi = 0.0;
            for k in 0..k_count {
                let n = norm2[k] + 2.0 * (a[k] * xi[k].conj()).re + a[k].norm_sqr() * nu;
                terms.signal[k] = n + self.det.trace_c(k);
                psi += p[k] * terms.signal[k];
            }
            terms.psi = psi;
            for f in 0..k_count {
                for k in 0..k_count {
                    if f == k {
                        continue;
                    }
                    let g = gram[f][k] + a[k] * xi[f].conj() + a[f].conj() * xi[k] + a[f].conj() * a[k] * nu;
                    let qa_new = qa[f][k] + 2.0 * (a[f] * ya[k][(i, f)].conj()).re + a[f].norm_sqr() * self.w_a[k][i];
                    let qc_new = qc[f][k] + 2.0 * (a[k] * zc[f][(i, k)].conj()).re + a[k].norm_sqr() * self.w_c[f][i];
                    terms.cross[f][k] = g.norm_sqr() + qa_new + qc_new + self.det.trace_ca(f, k);
                }
            }
            self.det.sum_rate_from_sinr(&self.det.sinr_from_terms(terms))
        };
        let mut terms = base.clone();
        let d = fd_step;
        (0..len)
            .map(|i| {
                let re_p = eval(i, C64::new(d, 0.0), &mut terms);
                let re_m = eval(i, C64::new(-d, 0.0), &mut terms);
                let im_p = eval(i, C64::new(0.0, d), &mut terms);
                let im_m = eval(i, C64::new(0.0, -d), &mut terms);
                C64::new((re_p - re_m) / (2.0 * d), (im_p - im_m) / (2.0 * d))
            })
            .collect()
    }
}

/// Deterministic net sum-rate of a phase configuration.
pub fn objective_scsi(model: &SystemModel, protocol: Protocol, phase: &PhaseConfig) -> Result<f64> {
    model.check_phase(phase)?;
    Ok(ScsiObjective::new(model, protocol)?.value(phase))
}

/// Central differences of any objective in the real and imaginary parts of
/// each coefficient, perturbing without projection.
pub fn finite_difference_gradient<F: Fn(&[C64]) -> f64>(f: F, phi: &[C64], step: f64) -> Vec<C64> {
    let mut work = phi.to_vec();
    (0..phi.len())
        .map(|i| {
            let mut partial = |dir: C64| {
                work[i] = phi[i] + dir * step;
                let plus = f(&work);
                work[i] = phi[i] - dir * step;
                let minus = f(&work);
                work[i] = phi[i];
                (plus - minus) / (2.0 * step)
            };
            let re = partial(C64::new(1.0, 0.0));
            let im = partial(C64::new(0.0, 1.0));
            C64::new(re, im)
        })
        .collect()
}

/// Finite-difference gradient by full re-evaluation of the objective.
pub fn numeric_gradient(model: &SystemModel, protocol: Protocol, phase: &PhaseConfig, fd_step: f64) -> Result<Vec<C64>> {
    model.check_phase(phase)?;
    let obj = ScsiObjective::new(model, protocol)?;
    Ok(finite_difference_gradient(|phi| obj.det.sum_rate(&obj.raw_aggregates(phi)), phase.as_slice(), fd_step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct PgaResult {
    pub phase: PhaseConfig,
    pub objective: f64,
    /// Accepted iterates, starting with the initial point at iteration 0.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

impl PgaResult {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

fn initial_phase(model: &SystemModel, init: PgaInit) -> PhaseConfig {
    match init {
        PgaInit::AllOnes => PhaseConfig::ones(model.phase_len()),
        PgaInit::Random { seed } => PhaseConfig::random(model.phase_len(), &mut stream(seed, StreamTag::RandomPhases)),
    }
}

pub fn pga_optimize(model: &SystemModel, protocol: Protocol, options: &PgaOptions) -> Result<PgaResult> {
    pga_optimize_from(model, protocol, initial_phase(model, options.init), options)
}

/// Projected gradient ascent with an Armijo backtracking line search. The
/// first trial step moves the largest entry by `mu0`; later trials start at
/// twice the last accepted step.
pub fn pga_optimize_from(
    model: &SystemModel,
    protocol: Protocol,
    init: PhaseConfig,
    options: &PgaOptions,
) -> Result<PgaResult> {
    options.validate()?;
    model.check_phase(&init)?;
    let obj = ScsiObjective::new(model, protocol)?;
    let mut phase = init;
    let mut value = obj.value(&phase);
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: value,
        step: 0.0,
    }];
    let mut converged = false;
    let mut mu_trial = None;
    if phase.is_empty() {
        return Ok(PgaResult {
            phase,
            objective: value,
            trace,
            converged: true,
        });
    }
    for iteration in 1..=options.max_iters {
        let grad = obj.gradient(phase.as_slice(), options.fd_step);
        let grad_max = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if grad_max == 0.0 {
            converged = true;
            break;
        }
        let mut mu = mu_trial.unwrap_or(options.mu0 / grad_max);
        let accepted = loop {
            let moved: Vec<C64> = phase.as_slice().iter().zip(&grad).map(|(x, g)| x + g * mu).collect();
            let candidate = project(&moved);
            let cand_value = obj.value(&candidate);
            let slope: f64 = grad
                .iter()
                .zip(candidate.as_slice().iter().zip(phase.as_slice()))
                .map(|(g, (c, x))| (g.conj() * (c - x)).re)
                .sum();
            if cand_value >= value + options.backtrack_c * slope.max(0.0) {
                break Some((candidate, cand_value));
            }
            mu *= options.backtrack_beta;
            if mu * grad_max < 1e-14 {
                break None;
            }
        };
        let Some((candidate, cand_value)) = accepted else {
            converged = true;
            break;
        };
        let change = cand_value - value;
        phase = candidate;
        value = cand_value;
        trace.push(TracePoint {
            iteration,
            objective: value,
            step: mu,
        });
        mu_trial = Some(2.0 * mu);
        if change * change < options.epsilon {
            converged = true;
            break;
        }
    }
    Ok(PgaResult {
        phase,
        objective: value,
        trace,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaOptions {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Standard deviation of angle mutations in radians.
    pub mutation_sigma: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaOptions {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 100,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.3,
            elitism_count: 2,
            tournament_size: 2,
            seed: 0,
        }
    }
}

impl GaOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return bad("GA population must hold at least two individuals");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("GA rates must lie in [0, 1]");
        }
        if self.elitism_count > self.population_size || self.tournament_size == 0 {
            return bad("GA elitism must not exceed the population and tournaments need an entrant");
        }
        if !(self.mutation_sigma >= 0.0) {
            return bad("GA mutation sigma must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaResult {
    /// Best angles found, in `[0, 2 pi)`.
    pub theta: Vec<f64>,
    pub fitness: f64,
    /// Best fitness of each generation, the initial population first.
    pub trace: Vec<f64>,
}

fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(2.0 * PI)
}

fn best_index(fitness: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in fitness.iter().enumerate() {
        if *f > fitness[best] {
            best = i;
        }
    }
    best
}

/// Maximizes `fitness` over angle vectors of length `dim`. Fitness values of
/// a generation are computed in parallel; all random draws happen on one
/// sequential stream, so results do not depend on the thread count.
pub fn ga_run<F>(fitness: F, dim: usize, initial: Option<Vec<Vec<f64>>>, options: &GaOptions) -> Result<GaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    options.validate()?;
    let mut rng = stream(options.seed, StreamTag::Genetic);
    let mut population = match initial {
        Some(p) => {
            if p.len() != options.population_size || p.iter().any(|x| x.len() != dim) {
                return Err(Error::InvalidArgument("initial population has the wrong shape".into()));
            }
            p
        }
        None => (0..options.population_size)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
            .collect(),
    };
    let normal = Normal::new(0.0, options.mutation_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let evaluate = |pop: &Vec<Vec<f64>>| -> Vec<f64> { pop.par_iter().map(|x| fitness(x)).collect() };
    let mut scores = evaluate(&population);
    let mut trace = vec![scores[best_index(&scores)]];
    for _ in 0..options.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order[..options.elitism_count].iter().map(|&i| population[i].clone()).collect();
        let tournament = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut best = rng.random_range(0..population.len());
            for _ in 1..options.tournament_size {
                let c = rng.random_range(0..population.len());
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            best
        };
        while next.len() < options.population_size {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = if rng.random::<f64>() < options.crossover_rate {
                population[a]
                    .iter()
                    .zip(&population[b])
                    .map(|(x, y)| if rng.random::<bool>() { *x } else { *y })
                    .collect()
            } else {
                population[a].clone()
            };
            for gene in child.iter_mut() {
                if rng.random::<f64>() < options.mutation_rate {
                    *gene = wrap_angle(*gene + normal.sample(&mut rng));
                }
            }
            next.push(child);
        }
        population = next;
        scores = evaluate(&population);
        trace.push(scores[best_index(&scores)]);
    }
    let best = best_index(&scores);
    Ok(GaResult {
        theta: population[best].clone(),
        fitness: scores[best],
        trace,
    })
}

/// Instantaneous net sum-rate as a function of the data-phase configuration,
/// for one coherence block of DFT-protocol link estimates.
#[derive(Debug, Clone)]
pub struct IcsiProblem {
    direct: Vec<CVec>,
    /// `[k]`: `[H_11 diag(ĥ_21k) ... H_1L diag(ĥ_2Lk)]`.
    cascaded: Vec<CMat>,
    c_tilde: Vec<CMat>,
    p: Vec<f64>,
    rho: f64,
    loss_factor: f64,
}

impl IcsiProblem {
    pub fn new(model: &SystemModel, estimates: &EstimateSet) -> Result<Self> {
        let (links, c_tilde) = match (&estimates.links, &estimates.stats.c_tilde) {
            (Some(l), Some(c)) => (l, c),
            _ => return Err(Error::UnsupportedProtocol(estimates.protocol)),
        };
        let cfg = model.scenario().config();
        let (m, n) = (model.m(), model.n());
        let cascaded = (0..model.k())
            .map(|k| {
                let mut c = CMat::zeros(m, model.phase_len());
                for l in 0..model.l() {
                    let h = &links.h_2[l][k];
                    let mut block = model.bs_ris(l).clone();
                    for (j, mut col) in block.column_iter_mut().enumerate() {
                        col *= h[j];
                    }
                    c.view_mut((0, l * n), (m, n)).copy_from(&block);
                }
                c
            })
            .collect();
        Ok(Self {
            direct: links.h_d.clone(),
            cascaded,
            c_tilde: c_tilde.clone(),
            p: cfg.powers(),
            rho: cfg.rho(),
            loss_factor: loss_factor(cfg, rate_subphases(cfg, Protocol::Dft))?,
        })
    }

    pub fn estimates(&self, phi: &[C64]) -> Vec<CVec> {
        let v = CVec::from_iterator(phi.len(), phi.iter().copied());
        self.direct.iter().zip(&self.cascaded).map(|(d, c)| d + c * &v).collect()
    }

    pub fn sum_rate(&self, phase: &PhaseConfig) -> f64 {
        let h = self.estimates(phase.as_slice());
        let g = instantaneous_sinr_with(&h, &self.c_tilde, &self.p, self.rho);
        self.loss_factor * g.iter().map(|x| (1.0 + x).log2()).sum::<f64>()
    }

    pub fn fitness(&self, theta: &[f64]) -> f64 {
        self.sum_rate(&PhaseConfig::from_angles(theta))
    }
}

/// GA phase design for one block of estimates (DFT protocol only).
pub fn ga_optimize_icsi(model: &SystemModel, estimates: &EstimateSet, options: &GaOptions) -> Result<GaResult> {
    let problem = IcsiProblem::new(model, estimates)?;
    ga_run(|t| problem.fitness(t), model.phase_len(), None, options)
}

/// Runs the GA design independently on `realizations` channel draws and
/// returns the per-draw best instantaneous net sum-rates.
pub fn ga_icsi_per_realization(
    model: &SystemModel,
    protocol: Protocol,
    realizations: usize,
    seed: u64,
    options: &GaOptions,
) -> Result<Vec<f64>> {
    if protocol != Protocol::Dft {
        return Err(Error::UnsupportedProtocol(protocol));
    }
    let estimator = Estimator::new(model, protocol)?;
    // Link estimates do not depend on the data phases.
    let phase = PhaseConfig::ones(model.phase_len());
    (0..realizations as u64)
        .map(|i| {
            let s = sample_seed(seed, i);
            let r = sample_channels(model, &phase, s)?;
            let est = estimator.estimate(model, &phase, &r, s ^ 0x5eed)?;
            let opts = GaOptions {
                seed: sample_seed(options.seed, i),
                ..options.clone()
            };
            Ok(ga_optimize_icsi(model, &est, &opts)?.fitness)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_scenario, Geometry, Scenario, SystemConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn random_phase(seed: u64, len: usize) -> PhaseConfig {
        PhaseConfig::random(len, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn fast_gradient_matches_full_reevaluation() {
        let s = toy(6, 2, 2, 2, 3);
        let model = SystemModel::new(&s);
        let phase = random_phase(3, model.phase_len());
        for p in Protocol::ALL {
            let obj = ScsiObjective::new(&model, p).unwrap();
            let fast = obj.gradient(phase.as_slice(), 1e-5);
            let slow = numeric_gradient(&model, p, &phase, 1e-5).unwrap();
            let scale = slow.iter().map(|g| g.norm()).fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-6 * scale, "{p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gradient_matches_secant_oracle() {
        let s = toy(4, 1, 1, 1, 2);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::from_angles(&[0.7]);
        let obj = ScsiObjective::new(&model, Protocol::Dft).unwrap();
        let g = obj.gradient(phase.as_slice(), 1e-5)[0];
        let h = 1e-6;
        let phi = phase.as_slice()[0];
        let f = |z: C64| obj.value_raw(&[z]);
        let re = (f(phi + h) - f(phi - h)) / (2.0 * h);
        let im = (f(phi + C64::new(0.0, h)) - f(phi - C64::new(0.0, h))) / (2.0 * h);
        let want = C64::new(re, im);
        assert!((g - want).norm() <= 1e-4 * want.norm());
    }

    #[test]
    fn gradient_vanishes_for_dead_ris_links() {
        // Pure-Rayleigh RIS links with zero path loss leave no phase dependence.
        let mut s = toy(4, 1, 2, 1, 2).config().clone();
        s.propagation.exp_ris_user = 200.0;
        let scen = build_scenario(s, Geometry::arcs(1, 2, &Default::default())).unwrap();
        let model = SystemModel::new(&scen);
        let g = numeric_gradient(&model, Protocol::Dft, &random_phase(1, 2), 1e-5).unwrap();
        assert!(g.iter().map(|z| z.norm()).sum::<f64>() < 1e-8);
    }

    #[test]
    fn small_gradient_step_does_not_decrease() {
        for seed in 0..5 {
            let s = toy(5, 2, 2, 2, 2);
            let model = SystemModel::new(&s);
            let phase = random_phase(seed, model.phase_len());
            let obj = ScsiObjective::new(&model, Protocol::De).unwrap();
            let g = obj.gradient(phase.as_slice(), 1e-5);
            let moved: Vec<C64> = phase.as_slice().iter().zip(&g).map(|(x, d)| x + d * 1e-4).collect();
            assert!(obj.value(&project(&moved)) >= obj.value(&phase) - 1e-10);
        }
    }

    #[test]
    fn huge_epsilon_stops_after_one_step() {
        let s = toy(4, 2, 2, 1, 2);
        let model = SystemModel::new(&s);
        let opts = PgaOptions {
            epsilon: 1e300,
            ..Default::default()
        };
        let r = pga_optimize(&model, Protocol::Dft, &opts).unwrap();
        assert!(r.iterations() <= 1);
        assert!(r.converged);
    }

    #[test]
    fn first_step_does_not_depend_on_objective_scale() {
        let weak = toy(8, 2, 2, 2, 2);
        let mut cfg = weak.config().clone();
        cfg.propagation.c0_db = 0.0;
        let strong = build_scenario(cfg, weak.geometry().clone()).unwrap();
        for s in [&weak, &strong] {
            let model = SystemModel::new(s);
            let r = pga_optimize(&model, Protocol::De, &PgaOptions::default()).unwrap();
            assert!(r.iterations() > 1, "stopped after {} steps", r.iterations());
            assert!(r.objective > r.trace[0].objective);
        }
    }

    #[test]
    fn pga_trace_is_non_decreasing_and_feasible() {
        let s = toy(8, 2, 3, 2, 3);
        let model = SystemModel::new(&s);
        for p in Protocol::ALL {
            let r = pga_optimize(&model, p, &PgaOptions::default()).unwrap();
            for w in r.trace.windows(2) {
                assert!(w[1].objective >= w[0].objective);
            }
            assert!(r.phase.max_modulus_error() <= 1e-12);
            let start = objective_scsi(&model, p, &PhaseConfig::ones(model.phase_len())).unwrap();
            assert!(r.objective >= start);
        }
    }

    #[test]
    fn global_phase_of_initialization() {
        let s = toy(6, 2, 2, 2, 2);
        let model = SystemModel::new(&s);
        let init = random_phase(9, model.phase_len());
        let rot: Vec<C64> = init.as_slice().iter().map(|z| z * C64::from_polar(1.0, 1.3)).collect();
        let a = pga_optimize_from(&model, Protocol::De, init, &PgaOptions::default()).unwrap();
        let b = pga_optimize_from(&model, Protocol::De, project(&rot), &PgaOptions::default()).unwrap();
        assert!((a.objective / b.objective - 1.0).abs() < 0.05);
    }

    #[test]
    fn objective_without_ris_matches_no_ris_rate() {
        let s = toy(5, 2, 2, 0, 3);
        let model = SystemModel::new(&s);
        let v = objective_scsi(&model, Protocol::De, &PhaseConfig::ones(0)).unwrap();
        let w = crate::detequiv::net_sum_rate_noris(&s).unwrap();
        assert!((v / w - 1.0).abs() < 1e-12);
        assert_eq!(v, objective_scsi(&model, Protocol::De, &PhaseConfig::ones(0)).unwrap());
    }

    #[test]
    fn ga_identical_population_without_mutation_is_constant() {
        let opts = GaOptions {
            population_size: 6,
            generations: 5,
            mutation_rate: 0.0,
            ..Default::default()
        };
        let f = |t: &[f64]| t.iter().map(|x| x.sin()).sum::<f64>();
        let r = ga_run(f, 3, Some(vec![vec![0.3, 1.0, 2.0]; 6]), &opts).unwrap();
        assert!(r.trace.iter().all(|v| *v == r.trace[0]));
    }

    #[test]
    fn ga_trace_non_decreasing_and_reproducible() {
        let f = |t: &[f64]| -t.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>();
        let opts = GaOptions {
            generations: 30,
            seed: 5,
            ..Default::default()
        };
        let a = ga_run(f, 4, None, &opts).unwrap();
        let b = ga_run(f, 4, None, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.theta, b.theta);
        for w in a.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn ga_rejects_direct_estimates() {
        let s = toy(4, 1, 2, 1, 1);
        let model = SystemModel::new(&s);
        let phase = PhaseConfig::ones(2);
        let r = sample_channels(&model, &phase, 1).unwrap();
        let est = crate::estimation::estimate_de(&model, &phase, &r, 2).unwrap();
        assert!(matches!(
            ga_optimize_icsi(&model, &est, &GaOptions::default()),
            Err(Error::UnsupportedProtocol(Protocol::De))
        ));
    }

    #[test]
    fn icsi_estimates_match_aggregate() {
        let s = toy(4, 1, 2, 2, 2);
        let model = SystemModel::new(&s);
        let phase = random_phase(4, model.phase_len());
        let r = sample_channels(&model, &phase, 3).unwrap();
        let est = crate::estimation::estimate_mmse_dft(&model, &phase, &r, 8).unwrap();
        let prob = IcsiProblem::new(&model, &est).unwrap();
        for (a, b) in prob.estimates(phase.as_slice()).iter().zip(&est.h_hat) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(re in proptest::collection::vec(-5.0f64..5.0, 1..16), im in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let x: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
            let once = project(&x);
            let twice = project(once.as_slice());
            prop_assert!(once.max_modulus_error() <= 1e-12);
            for ((a, b), z) in once.as_slice().iter().zip(twice.as_slice()).zip(&x) {
                prop_assert!((a - b).norm() <= 1e-15);
                if z.norm() > 1e-12 {
                    prop_assert!((a.arg() - z.arg()).abs() <= 1e-12);
                }
            }
        }
    }
}
