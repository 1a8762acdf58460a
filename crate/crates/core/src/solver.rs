//! Variational bosonic solver.
//!
//! Four descents run over `(n, j) ∈ {M, M−1} × {0, 1}`. Each evaluation
//! measures the circuit (exactly or with `N_s` shots), coarse-grains patterns
//! to bit strings with `℘_j`, and averages the problem energy. Gradients use
//! the parameter-shift rule by default; every bit string observed along the
//! way competes for the reported minimum.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeSampler, MAX_BIT_DP_MODES};
use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, sector_size, DetectionPattern, SectorBasis};
use crate::interferometer::{evolve, evolve_in, exact_distribution, CircuitSpec, PatternDistribution, DENSE_LIMIT};
use crate::parity::{parity_bits, BitString, BitStringDistribution};
use crate::problems::{random_portfolios, FrontierPoint, PortfolioApproach, PortfolioProblem, ProblemSpec};
use crate::rng::stream;

/// Largest `M` for which all `2^M` energies are tabulated up front.
pub const ENERGY_TABLE_BITS: usize = 20;

/// How an objective is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Full output distribution (infinite sampling).
    Exact,
    /// `N_s` independent shots per evaluation.
    Samples(usize),
}

/// Derivative estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GradientMethod {
    /// `(E(ϑ + π/2) − E(ϑ − π/2)) / 2`.
    ParameterShift,
    /// `(E(ϑ + ε) − E(ϑ)) / ε`.
    ForwardDifference { epsilon: f64 },
    /// `(E(ϑ + ε) − E(ϑ − ε)) / 2ε`.
    CentralDifference { epsilon: f64 },
}

/// Solver settings, read from JSON with defaults for omitted fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Optional check against the problem dimension.
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    pub depth: usize,
    pub sampling: Sampling,
    pub eta: f64,
    pub max_iterations: usize,
    pub plateau_tolerance: f64,
    pub plateau_window: usize,
    pub master_seed: u64,
    pub optimize_phases: bool,
    /// Exact mode counts a bit string as observed when its mass exceeds this.
    pub exact_observation_threshold: f64,
    pub gradient: GradientMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            modes: None,
            depth: 1,
            sampling: Sampling::Exact,
            eta: 0.1,
            max_iterations: 200,
            plateau_tolerance: 1e-4,
            plateau_window: 20,
            master_seed: 0,
            optimize_phases: false,
            exact_observation_threshold: 0.0,
            gradient: GradientMethod::ParameterShift,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.plateau_window == 0 {
            return Err(Error::Config("plateau_window must be at least 1".into()));
        }
        if !(self.plateau_tolerance >= 0.0) {
            return Err(Error::Config("plateau_tolerance must be non-negative".into()));
        }
        if let Sampling::Samples(0) = self.sampling {
            return Err(Error::Config("N_s must be at least 1".into()));
        }
        if !(self.exact_observation_threshold >= 0.0 && self.exact_observation_threshold < 1.0) {
            return Err(Error::Config("exact_observation_threshold must lie in [0, 1)".into()));
        }
        match self.gradient {
            GradientMethod::ForwardDifference { epsilon } | GradientMethod::CentralDifference { epsilon }
                if !(epsilon > 0.0) =>
            {
                return Err(Error::Config("finite-difference epsilon must be positive".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: SolverConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    fn shots(&self) -> u64 {
        match self.sampling {
            Sampling::Exact => 1,
            Sampling::Samples(n) => n as u64,
        }
    }
}

/// One learning-curve sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub energy: f64,
    pub best_energy: f64,
}

/// Outcome of one `(n, j)` descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentResult {
    pub tag: String,
    pub photons: usize,
    pub parity: u8,
    /// Gradient steps taken.
    pub steps: usize,
    pub stopped_on_plateau: bool,
    pub learning_curve: Vec<CurvePoint>,
    pub final_angles: Vec<f64>,
    pub final_objective: f64,
    pub best_energy: f64,
    pub best_bits: BitString,
}

/// Result of [`run_variational`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    #[serde(rename = "M")]
    pub modes: usize,
    pub config: SolverConfig,
    #[serde(rename = "E_min")]
    pub e_min: f64,
    pub b_min: BitString,
    pub descents: Vec<DescentResult>,
    /// Bit-string energy evaluations spent on gradients (`2 · N_params · steps · N_s` per descent).
    pub evaluation_count: u64,
    /// Evaluations spent on learning-curve monitoring.
    pub monitor_evaluations: u64,
}

impl SolverResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns `config_tag,iteration,energy,best_energy`.
    pub fn write_learning_curves(&self, out: &mut impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["config_tag", "iteration", "energy", "best_energy"])?;
        for d in &self.descents {
            for p in &d.learning_curve {
                w.write_record([
                    d.tag.clone(),
                    p.iteration.to_string(),
                    p.energy.to_string(),
                    p.best_energy.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_learning_curves_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_learning_curves(&mut f)
    }
}

/// `Σ_b β_b · H(b)`.
pub fn objective_energy(dist: &BitStringDistribution, energy: impl Fn(&BitString) -> f64) -> f64 {
    dist.masses.iter().map(|(b, w)| w * energy(b)).sum()
}

/// `N_s` inverse-CDF draws over the canonical pattern order.
pub fn sample_patterns(dist: &PatternDistribution, n_s: usize, seed: u64) -> Result<Vec<DetectionPattern>> {
    let total = dist.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numeric(format!("probabilities sum to {total}")));
    }
    let mut rng = stream(seed, &[]);
    let cdf = cumulative(dist.entries.iter().map(|(_, w)| *w));
    Ok((0..n_s).map(|_| dist.entries[draw(&cdf, &mut rng)].0.clone()).collect())
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u = rng.gen::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// `(f(ϑ_i + π/2) − f(ϑ_i − π/2)) / 2`.
pub fn parameter_shift_gradient(f: impl Fn(&[f64]) -> Result<f64>, angles: &[f64], index: usize) -> Result<f64> {
    let (plus, minus) = shifted(angles, index, FRAC_PI_2)?;
    Ok((f(&plus)? - f(&minus)?) / 2.0)
}

/// `(f(ϑ_i + ε) − f(ϑ_i)) / ε`.
pub fn finite_difference_gradient(
    f: impl Fn(&[f64]) -> Result<f64>,
    angles: &[f64],
    index: usize,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let (plus, _) = shifted(angles, index, epsilon)?;
    Ok((f(&plus)? - f(angles)?) / epsilon)
}

/// `(f(ϑ_i + ε) − f(ϑ_i − ε)) / 2ε`.
pub fn central_difference_gradient(
    f: impl Fn(&[f64]) -> Result<f64>,
    angles: &[f64],
    index: usize,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let (plus, minus) = shifted(angles, index, epsilon)?;
    Ok((f(&plus)? - f(&minus)?) / (2.0 * epsilon))
}

fn shifted(angles: &[f64], index: usize, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if index >= angles.len() {
        return Err(Error::Domain(format!("parameter index {index} out of range")));
    }
    let mut plus = angles.to_vec();
    let mut minus = angles.to_vec();
    plus[index] += delta;
    minus[index] -= delta;
    Ok((plus, minus))
}

/// `ϑ − η ∇E`, reduced to `[0, 2π)`.
pub fn gradient_step(angles: &[f64], gradient: &[f64], eta: f64) -> Vec<f64> {
    angles.iter().zip(gradient).map(|(a, g)| (a - eta * g).rem_euclid(TAU)).collect()
}

/// Exact `℘_j` bit-string law of a circuit.
pub fn exact_bit_distribution(circuit: &CircuitSpec, params: &[f64], j: u8) -> Result<BitStringDistribution> {
    if circuit.depth == 1 && circuit.modes <= MAX_BIT_DP_MODES {
        return CascadeSampler::new(circuit, params)?.bit_distribution(j);
    }
    crate::parity::coarse_grain(&exact_distribution(&evolve(circuit, params)?)?, j)
}

/// Exact parity objective `Σ_b β_b H(b)` for a circuit.
pub fn exact_parity_objective(
    circuit: &CircuitSpec,
    params: &[f64],
    j: u8,
    energy: impl Fn(&BitString) -> f64,
) -> Result<f64> {
    Ok(objective_energy(&exact_bit_distribution(circuit, params, j)?, energy))
}

type EnergyFn<'a> = dyn Fn(u128) -> f64 + Sync + 'a;

enum Engine {
    Cascade,
    Dense(Arc<SectorBasis>),
    Sparse,
}

/// Lowest observed `(energy, word)`, if any.
type Observed = Option<(f64, u128)>;

struct Evaluation {
    objective: f64,
    best: Observed,
}

struct Descent<'a> {
    circuit: CircuitSpec,
    j: u8,
    engine: Engine,
    energy: &'a EnergyFn<'a>,
    config: &'a SolverConfig,
    labels: [u64; 2],
}

impl<'a> Descent<'a> {
    fn new(modes: usize, n: usize, j: u8, energy: &'a EnergyFn<'a>, config: &'a SolverConfig) -> Result<Self> {
        let circuit = CircuitSpec::standard(modes, n, config.depth)?;
        let engine = if config.depth == 1 {
            if config.sampling == Sampling::Exact && modes > MAX_BIT_DP_MODES {
                return Err(Error::Refused(format!(
                    "exact depth-1 evaluation is limited to M <= {MAX_BIT_DP_MODES}; use sampled mode"
                )));
            }
            Engine::Cascade
        } else if sector_size(modes, n).unwrap_or(u64::MAX) <= DENSE_LIMIT {
            Engine::Dense(Arc::new(enumerate_basis(modes, n)?))
        } else {
            Engine::Sparse
        };
        Ok(Descent { circuit, j, engine, energy, config, labels: [n as u64, j as u64] })
    }

    fn tag(&self) -> String {
        format!("n={},j={}", self.circuit.photons(), self.j)
    }

    fn evaluate(&self, params: &[f64], iteration: usize, slot: usize) -> Result<Evaluation> {
        let eval = match self.config.sampling {
            Sampling::Exact => self.evaluate_exact(params)?,
            Sampling::Samples(n_s) => {
                let seed_labels = [self.labels[0], self.labels[1], iteration as u64, slot as u64];
                let mut rng = stream(self.config.master_seed, &seed_labels);
                self.evaluate_sampled(params, n_s, &mut rng)?
            }
        };
        if !eval.objective.is_finite() {
            return Err(Error::Numeric(format!("non-finite objective in descent {}", self.tag())));
        }
        Ok(eval)
    }

    fn evaluate_exact(&self, params: &[f64]) -> Result<Evaluation> {
        let masses: BTreeMap<u128, f64> = match &self.engine {
            Engine::Cascade => CascadeSampler::new(&self.circuit, params)?
                .bit_distribution(self.j)?
                .masses
                .into_iter()
                .map(|(b, w)| (b.word(), w))
                .collect(),
            Engine::Dense(basis) => {
                self.pattern_masses(&exact_distribution(&evolve_in(basis, &self.circuit, params)?)?)?
            }
            Engine::Sparse => self.pattern_masses(&exact_distribution(&evolve(&self.circuit, params)?)?)?,
        };
        let threshold = self.config.exact_observation_threshold;
        let mut objective = 0.0;
        let mut best: Observed = None;
        for (&word, &w) in &masses {
            let e = (self.energy)(word);
            objective += w * e;
            if w > threshold && best.map_or(true, |(b, _)| e < b) {
                best = Some((e, word));
            }
        }
        Ok(Evaluation { objective, best })
    }

    fn pattern_masses(&self, dist: &PatternDistribution) -> Result<BTreeMap<u128, f64>> {
        let mut masses = BTreeMap::new();
        for (p, w) in &dist.entries {
            *masses.entry(parity_bits(p.counts(), self.j)?.word()).or_insert(0.0) += *w;
        }
        Ok(masses)
    }

    fn evaluate_sampled<R: Rng>(&self, params: &[f64], n_s: usize, rng: &mut R) -> Result<Evaluation> {
        let words: Vec<u128> = match &self.engine {
            Engine::Cascade => {
                let sampler = CascadeSampler::new(&self.circuit, params)?;
                (0..n_s).map(|_| Ok(parity_bits(&sampler.sample(rng), self.j)?.word())).collect::<Result<_>>()?
            }
            Engine::Dense(basis) => {
                self.sample_words(&exact_distribution(&evolve_in(basis, &self.circuit, params)?)?, n_s, rng)?
            }
            Engine::Sparse => self.sample_words(&exact_distribution(&evolve(&self.circuit, params)?)?, n_s, rng)?,
        };
        let mut total = 0.0;
        let mut best: Observed = None;
        for word in words {
            let e = (self.energy)(word);
            total += e;
            if best.map_or(true, |(b, bw)| e < b || (e == b && word < bw)) {
                best = Some((e, word));
            }
        }
        Ok(Evaluation { objective: total / n_s as f64, best })
    }

    fn sample_words<R: Rng>(&self, dist: &PatternDistribution, n_s: usize, rng: &mut R) -> Result<Vec<u128>> {
        let cdf = cumulative(dist.entries.iter().map(|(_, w)| *w));
        (0..n_s).map(|_| Ok(parity_bits(dist.entries[draw(&cdf, rng)].0.counts(), self.j)?.word())).collect()
    }

    fn run(&self) -> Result<(DescentResult, u64, u64)> {
        let config = self.config;
        let np = self.circuit.parameter_count(config.optimize_phases);
        let mut init = stream(config.master_seed, &[self.labels[0], self.labels[1], u64::MAX]);
        let mut angles: Vec<f64> = (0..np).map(|_| init.gen::<f64>() * TAU).collect();
        let mut curve = Vec::new();
        let mut running_min: Vec<f64> = Vec::new();
        let mut best: Observed = None;
        let mut steps = 0usize;
        let mut gradient_evals = 0u64;
        let mut monitor_evals = 0u64;
        let mut plateau = false;
        let mut final_objective = f64::NAN;
        let merge = |best: &mut Observed, cand: Observed| {
            if let Some((e, w)) = cand {
                if best.map_or(true, |(b, bw)| e < b || (e == b && w < bw)) {
                    *best = Some((e, w));
                }
            }
        };
        for iteration in 0..config.max_iterations {
            let monitor = self.evaluate(&angles, iteration, 0)?;
            monitor_evals += config.shots();
            merge(&mut best, monitor.best);
            final_objective = monitor.objective;
            let prev = running_min.last().copied().unwrap_or(f64::INFINITY);
            running_min.push(prev.min(monitor.objective));
            curve.push(CurvePoint {
                iteration,
                energy: monitor.objective,
                best_energy: best.map_or(f64::INFINITY, |b| b.0),
            });
            let w = config.plateau_window;
            if iteration >= w && running_min[iteration - w] - running_min[iteration] < config.plateau_tolerance {
                plateau = true;
                break;
            }
            if iteration + 1 == config.max_iterations {
                break;
            }
            let results: Vec<(f64, Observed, Observed)> = (0..np)
                .into_par_iter()
                .map(|i| self.partial(&angles, monitor.objective, iteration, i))
                .collect::<Result<_>>()?;
            let mut grad = Vec::with_capacity(np);
            for (g, a, b) in results {
                grad.push(g);
                merge(&mut best, a);
                merge(&mut best, b);
            }
            gradient_evals += self.evaluations_per_partial() * np as u64 * config.shots();
            angles = gradient_step(&angles, &grad, config.eta);
            steps += 1;
        }
        let (best_energy, word) = best.ok_or_else(|| Error::Numeric("no bit string was observed".into()))?;
        let result = DescentResult {
            tag: self.tag(),
            photons: self.circuit.photons(),
            parity: self.j,
            steps,
            stopped_on_plateau: plateau,
            learning_curve: curve,
            final_angles: angles,
            final_objective,
            best_energy,
            best_bits: BitString::from_word(self.circuit.modes, word)?,
        };
        Ok((result, gradient_evals, monitor_evals))
    }

    fn evaluations_per_partial(&self) -> u64 {
        match self.config.gradient {
            GradientMethod::ForwardDifference { .. } => 1,
            _ => 2,
        }
    }

    #[allow(clippy::type_complexity)]
    fn partial(&self, angles: &[f64], base: f64, iteration: usize, i: usize) -> Result<(f64, Observed, Observed)> {
        let (delta, scale) = match self.config.gradient {
            GradientMethod::ParameterShift => (FRAC_PI_2, 0.5),
            GradientMethod::CentralDifference { epsilon } => (epsilon, 0.5 / epsilon),
            GradientMethod::ForwardDifference { epsilon } => (epsilon, 1.0 / epsilon),
        };
        let (plus, minus) = shifted(angles, i, delta)?;
        let up = self.evaluate(&plus, iteration, 1 + 2 * i)?;
        if let GradientMethod::ForwardDifference { .. } = self.config.gradient {
            return Ok(((up.objective - base) * scale, up.best, None));
        }
        let down = self.evaluate(&minus, iteration, 2 + 2 * i)?;
        Ok(((up.objective - down.objective) * scale, up.best, down.best))
    }
}

/// Runs the four descents for a problem.
pub fn run_variational(problem: &ProblemSpec, config: &SolverConfig) -> Result<SolverResult> {
    let m = problem.dimension();
    if m <= ENERGY_TABLE_BITS {
        let table: Vec<f64> = (0..1u64 << m).into_par_iter().map(|w| problem.energy_word(w as u128)).collect();
        if let Some(w) = table.iter().position(|e| !e.is_finite()) {
            return Err(Error::Numeric(format!("bit string {w} has a non-finite energy")));
        }
        run_variational_with(m, &|w: u128| table[w as usize], config)
    } else {
        run_variational_with(m, &|w: u128| problem.energy_word(w), config)
    }
}

/// Runs the four descents for an energy function on `M`-bit words.
pub fn run_variational_with(modes: usize, energy: &EnergyFn<'_>, config: &SolverConfig) -> Result<SolverResult> {
    config.validate()?;
    if let Some(m) = config.modes {
        if m != modes {
            return Err(Error::Config(format!("config M = {m} differs from the problem dimension {modes}")));
        }
    }
    if modes < 2 {
        return Err(Error::Config("the solver needs at least 2 modes".into()));
    }
    if config.depth == 0 || config.depth >= modes {
        return Err(Error::Config(format!("depth must lie in 1..={}, got {}", modes - 1, config.depth)));
    }
    let tags: Vec<(usize, u8)> = [modes, modes - 1].iter().flat_map(|&n| [(n, 0u8), (n, 1u8)]).collect();
    let descents = tags.iter().map(|&(n, j)| Descent::new(modes, n, j, energy, config)).collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<(DescentResult, u64, u64)> = descents.par_iter().map(|d| d.run()).collect::<Result<_>>()?;
    let mut best: Option<(f64, BitString)> = None;
    let (mut evaluation_count, mut monitor_evaluations) = (0, 0);
    let mut results = Vec::with_capacity(outcomes.len());
    for (d, g, mon) in outcomes {
        if best.as_ref().map_or(true, |(e, b)| d.best_energy < *e || (d.best_energy == *e && d.best_bits < *b)) {
            best = Some((d.best_energy, d.best_bits));
        }
        evaluation_count += g;
        monitor_evaluations += mon;
        results.push(d);
    }
    let (e_min, b_min) = best.expect("four descents");
    Ok(SolverResult {
        modes,
        config: config.clone(),
        e_min,
        b_min,
        descents: results,
        evaluation_count,
        monitor_evaluations,
    })
}

/// Results of a γ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRun {
    pub runs: Vec<SolverResult>,
    pub frontier: Vec<FrontierPoint>,
}

/// Solves the portfolio problem for each `γ` and records the frontier point of
/// each best allocation (normalized weights for the normalized approach).
pub fn run_portfolio(problem: &PortfolioProblem, config: &SolverConfig, gammas: &[f64]) -> Result<PortfolioRun> {
    let gammas: Vec<f64> = if gammas.is_empty() { vec![problem.gamma] } else { gammas.to_vec() };
    let mut runs = Vec::with_capacity(gammas.len());
    let mut frontier = Vec::with_capacity(gammas.len());
    for &gamma in &gammas {
        let p = PortfolioProblem::new(problem.mu.clone(), problem.sigma.clone(), gamma, problem.n_q, problem.approach)?
            .with_penalties(problem.penalty, problem.e_pen)
            .with_assets(problem.assets.clone());
        let result = run_variational(&ProblemSpec::Portfolio(p.clone()), config)?;
        let w = match p.approach {
            PortfolioApproach::Normalized => p.normalized_weights(&result.b_min)?,
            PortfolioApproach::PenaltyQubo => p.weights(&result.b_min)?,
        };
        frontier.push(FrontierPoint {
            gamma,
            risk: p.portfolio_risk(&w),
            ret: p.portfolio_return(&w),
            bitstring: result.b_min.to_string(),
        });
        runs.push(result);
    }
    Ok(PortfolioRun { runs, frontier })
}

/// Random-allocation baseline used for frontier comparisons.
pub fn random_baseline(problem: &PortfolioProblem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    random_portfolios(problem.asset_count(), count, seed)
}
