//! Closed-loop learning control: a real-coded genetic algorithm over field
//! amplitudes and phases, plus field/decoherence cooperation diagnostics.
//!
//! Fitness evaluations inside a generation run in parallel; every offspring
//! draws from its own ChaCha stream keyed by (generation, slot), so serial and
//! parallel runs produce the same record.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{wrap_phase, ControlField, DEFAULT_WIDTH};
use crate::lindblad::{self, PropagationConfig};
use crate::qsystem::{Decoherence, LevelSystem};
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct CostParams<T> {
    /// O_T as a fraction.
    pub target_yield: T,
    /// alpha, the fluence weight.
    pub fluence_weight: T,
}

impl<T: Real> CostParams<T> {
    pub fn new(target_yield: T, fluence_weight: T) -> Result<Self> {
        let p = CostParams { target_yield, fluence_weight };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_yield >= T::zero() && self.target_yield <= T::one()) {
            return Err(Error::config("target yield must lie in [0, 1]"));
        }
        if !(self.fluence_weight > T::zero()) || !self.fluence_weight.is_finite() {
            return Err(Error::config("fluence weight must be > 0"));
        }
        Ok(())
    }

    /// J = |O - O_T|^2 + alpha F.
    pub fn evaluate(&self, outcome: T, fluence: T) -> T {
        let d = outcome - self.target_yield;
        d * d + self.fluence_weight * fluence
    }
}

impl<T: Real> Default for CostParams<T> {
    fn default() -> Self {
        CostParams { target_yield: lit(0.05), fluence_weight: lit(0.05) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig<T> {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Gaussian mutation width as a fraction of each gene's range.
    pub mutation_scale: f64,
    /// Generations without improvement before the mutation width is halved.
    pub stagnation_window: usize,
    pub elite_count: usize,
    pub rng_seed: u64,
    pub amplitude_bounds: (T, T),
    /// Phases live on the circle [lo, hi) and wrap.
    pub phase_bounds: (T, T),
    /// Cap on the number of propagations, if any.
    pub max_evaluations: Option<usize>,
    pub pulse_width: T,
    pub propagation: PropagationConfig<T>,
    pub parallel: bool,
}

impl<T: Real> Default for GaConfig<T> {
    fn default() -> Self {
        GaConfig {
            population_size: 60,
            generations: 200,
            tournament_size: 3,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            stagnation_window: 50,
            elite_count: 2,
            rng_seed: 1,
            amplitude_bounds: (T::zero(), lit(0.5)),
            phase_bounds: (T::zero(), T::TAU()),
            max_evaluations: None,
            pulse_width: lit(DEFAULT_WIDTH),
            propagation: PropagationConfig::default().with_store_every(0),
            parallel: true,
        }
    }
}

impl<T: Real> GaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::config("population_size must be >= 4"));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(Error::config("tournament_size must lie in [1, population_size]"));
        }
        if self.elite_count >= self.population_size {
            return Err(Error::config("elite_count must be < population_size"));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.mutation_scale > 0.0) {
            return Err(Error::config("mutation_scale must be > 0"));
        }
        let (alo, ahi) = self.amplitude_bounds;
        if !(alo >= T::zero() && ahi > alo) {
            return Err(Error::config("amplitude bounds must be non-empty and >= 0"));
        }
        let (plo, phi) = self.phase_bounds;
        if !(phi > plo) {
            return Err(Error::config("phase bounds must be non-empty"));
        }
        self.propagation.validate()
    }
}

/// One evaluated individual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Evaluation<T> {
    pub cost: T,
    pub outcome: T,
    pub fluence: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct GenerationStats<T> {
    pub generation: usize,
    pub best: Evaluation<T>,
    pub mean_cost: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OptimizationRecord<T> {
    pub history: Vec<GenerationStats<T>>,
    pub best_field: ControlField<T>,
    pub best: Evaluation<T>,
    pub seed: u64,
    pub evaluations: usize,
}

impl<T: Real> OptimizationRecord<T> {
    pub fn best_cost_trace(&self) -> Vec<T> {
        self.history.iter().map(|g| g.best.cost).collect()
    }

    /// CSV: generation, J, O_percent, F.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["generation", "J", "O_percent", "F"])?;
        for g in &self.history {
            w.write_record([
                g.generation.to_string(),
                format!("{:e}", g.best.cost),
                format!("{:e}", g.best.outcome * lit(100.0)),
                format!("{:e}", g.best.fluence),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// J for a uniform decoherence strength.
pub fn cost<T: Real>(
    field: &ControlField<T>,
    system: &LevelSystem<T>,
    gamma: T,
    params: &CostParams<T>,
    cfg: &PropagationConfig<T>,
) -> Result<T> {
    Ok(evaluate_field(field, system, &Decoherence::uniform(system, gamma)?, params, cfg)?.cost)
}

pub fn evaluate_field<T: Real>(
    field: &ControlField<T>,
    system: &LevelSystem<T>,
    dec: &Decoherence<T>,
    params: &CostParams<T>,
    cfg: &PropagationConfig<T>,
) -> Result<Evaluation<T>> {
    let outcome = lindblad::yield_of(system, Some(field), dec, cfg)?;
    let fluence = field.fluence();
    Ok(Evaluation { cost: params.evaluate(outcome, fluence), outcome, fluence })
}

type Chromosome<T> = Vec<T>;

struct Search<'a, T: Real> {
    system: &'a LevelSystem<T>,
    dec: &'a Decoherence<T>,
    params: &'a CostParams<T>,
    cfg: &'a GaConfig<T>,
    carriers: Vec<T>,
    cache: HashMap<Vec<u64>, Evaluation<T>>,
    evaluations: usize,
}

impl<'a, T: Real> Search<'a, T> {
    fn n_genes(&self) -> usize {
        2 * self.carriers.len()
    }

    fn field(&self, genes: &[T]) -> ControlField<T> {
        let m = self.carriers.len();
        let horizon = self.cfg.propagation.horizon;
        ControlField::resonant(&self.carriers, &genes[..m], &genes[m..])
            .and_then(|f| f.with_window(horizon * lit(0.5), self.cfg.pulse_width, horizon))
            .expect("genes are kept inside the bounds")
    }

    fn bounds(&self, gene: usize) -> (T, T) {
        if gene < self.carriers.len() {
            self.cfg.amplitude_bounds
        } else {
            self.cfg.phase_bounds
        }
    }

    fn repair(&self, gene: usize, value: T) -> T {
        let (lo, hi) = self.bounds(gene);
        if gene < self.carriers.len() {
            value.max(lo).min(hi)
        } else {
            lo + wrap_phase((value - lo) * T::TAU() / (hi - lo)) * (hi - lo) / T::TAU()
        }
    }

    fn key(genes: &[T]) -> Vec<u64> {
        genes.iter().map(|g| to_f64(*g).to_bits()).collect()
    }

    fn evaluate_all(&mut self, population: &[Chromosome<T>]) -> Vec<Evaluation<T>> {
        let mut pending: Vec<(Vec<u64>, &Chromosome<T>)> = Vec::new();
        for genes in population {
            let key = Self::key(genes);
            if !self.cache.contains_key(&key) && !pending.iter().any(|(k, _)| *k == key) {
                pending.push((key, genes));
            }
        }
        let eval = |genes: &Chromosome<T>| {
            let field = self.field(genes);
            evaluate_field(&field, self.system, self.dec, self.params, &self.cfg.propagation).unwrap_or(
                Evaluation { cost: T::infinity(), outcome: T::nan(), fluence: field.fluence() },
            )
        };
        let results: Vec<Evaluation<T>> = if self.cfg.parallel {
            pending.par_iter().map(|(_, g)| eval(g)).collect()
        } else {
            pending.iter().map(|(_, g)| eval(g)).collect()
        };
        self.evaluations += pending.len();
        for ((key, _), r) in pending.into_iter().zip(results) {
            self.cache.insert(key, r);
        }
        population.iter().map(|g| self.cache[&Self::key(g)]).collect()
    }

    fn random_individual(&self, rng: &mut ChaCha8Rng) -> Chromosome<T> {
        (0..self.n_genes())
            .map(|i| {
                let (lo, hi) = self.bounds(i);
                let u: f64 = rng.random();
                self.repair(i, lo + (hi - lo) * lit(u))
            })
            .collect()
    }

    fn tournament(&self, rng: &mut ChaCha8Rng, ranked_costs: &[(usize, T)]) -> usize {
        let n = ranked_costs.len();
        let mut best = rng.random_range(0..n);
        for _ in 1..self.cfg.tournament_size {
            let c = rng.random_range(0..n);
            if ranked_costs[c].1 < ranked_costs[best].1 {
                best = c;
            }
        }
        ranked_costs[best].0
    }

    fn offspring(&self, rng: &mut ChaCha8Rng, a: &[T], b: &[T], scale: f64) -> Chromosome<T> {
        let m = self.carriers.len();
        let cross = rng.random::<f64>() < self.cfg.crossover_rate;
        (0..self.n_genes())
            .map(|i| {
                let mut v = a[i];
                if cross {
                    let beta: T = lit(rng.random_range(-0.25..=1.25));
                    let mut d = b[i] - a[i];
                    if i >= m {
                        // shortest arc between the two phases
                        let (lo, hi) = self.bounds(i);
                        let span = hi - lo;
                        if d > span * lit(0.5) {
                            d -= span;
                        } else if d < -(span * lit(0.5)) {
                            d += span;
                        }
                    }
                    v += beta * d;
                }
                if rng.random::<f64>() < self.cfg.mutation_rate {
                    let (lo, hi) = self.bounds(i);
                    let z: f64 = rng.sample(StandardNormal);
                    v += (hi - lo) * lit(z * scale);
                }
                self.repair(i, v)
            })
            .collect()
    }
}

fn stream(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

/// GA search for a uniform decoherence strength.
pub fn optimize<T: Real>(
    system: &LevelSystem<T>,
    gamma: T,
    params: &CostParams<T>,
    cfg: &GaConfig<T>,
) -> Result<OptimizationRecord<T>> {
    optimize_with(system, &Decoherence::uniform(system, gamma)?, params, cfg)
}

/// GA search over the amplitudes and phases of the system's resonant carriers.
pub fn optimize_with<T: Real>(
    system: &LevelSystem<T>,
    dec: &Decoherence<T>,
    params: &CostParams<T>,
    cfg: &GaConfig<T>,
) -> Result<OptimizationRecord<T>> {
    cfg.validate()?;
    params.validate()?;
    system.validate()?;
    let carriers = system.carriers();
    if carriers.is_empty() {
        return Err(Error::config("system has no dipole-allowed transitions"));
    }
    let mut search = Search {
        system,
        dec,
        params,
        cfg,
        carriers,
        cache: HashMap::new(),
        evaluations: 0,
    };

    let pop_size = cfg.population_size;
    let mut population: Vec<Chromosome<T>> = (0..pop_size)
        .map(|slot| search.random_individual(&mut stream(cfg.rng_seed, 0, slot)))
        .collect();
    let mut scores = search.evaluate_all(&population);

    let mut history = Vec::with_capacity(cfg.generations);
    let mut scale = cfg.mutation_scale;
    let mut stagnant = 0usize;
    let mut generation = 0usize;
    loop {
        let mut ranked: Vec<(usize, T)> = scores.iter().enumerate().map(|(i, e)| (i, e.cost)).collect();
        ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        let best = scores[ranked[0].0];
        let finite: Vec<T> = scores.iter().map(|e| e.cost).filter(|c| c.is_finite()).collect();
        let mean_cost = if finite.is_empty() {
            T::infinity()
        } else {
            finite.iter().copied().sum::<T>() / lit(finite.len() as f64)
        };
        if let Some(prev) = history.last().map(|g: &GenerationStats<T>| g.best.cost) {
            if best.cost < prev {
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= cfg.stagnation_window {
                    scale *= 0.5;
                    stagnant = 0;
                }
            }
        }
        history.push(GenerationStats { generation, best, mean_cost });

        generation += 1;
        let fresh = pop_size - cfg.elite_count;
        let over_budget = cfg.max_evaluations.is_some_and(|max| search.evaluations + fresh > max);
        if generation >= cfg.generations || over_budget {
            let best_genes = &population[ranked[0].0];
            return Ok(OptimizationRecord {
                best_field: search.field(best_genes),
                best,
                history,
                seed: cfg.rng_seed,
                evaluations: search.evaluations,
            });
        }

        let mut next: Vec<Chromosome<T>> =
            ranked.iter().take(cfg.elite_count).map(|(i, _)| population[*i].clone()).collect();
        for slot in cfg.elite_count..pop_size {
            let mut rng = stream(cfg.rng_seed, generation, slot);
            let a = search.tournament(&mut rng, &ranked);
            let b = search.tournament(&mut rng, &ranked);
            next.push(search.offspring(&mut rng, &population[a], &population[b], scale));
        }
        population = next;
        scores = search.evaluate_all(&population);
    }
}

/// Yields of one field with and without each ingredient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CooperationReport<T> {
    /// O[E, gamma]
    pub o_both: T,
    /// O[E, 0]
    pub o_field_only: T,
    /// O[0, gamma]
    pub o_decoherence_only: T,
    pub sum: T,
    pub fluence: T,
    pub cooperation: bool,
}

pub fn cooperation_report_with<T: Real>(
    field: &ControlField<T>,
    system: &LevelSystem<T>,
    dec: &Decoherence<T>,
    cfg: &PropagationConfig<T>,
) -> Result<CooperationReport<T>> {
    let n = system.n_levels;
    let o_both = lindblad::yield_of(system, Some(field), dec, cfg)?;
    let o_field_only = lindblad::yield_of(system, Some(field), &Decoherence::none(n), cfg)?;
    let o_decoherence_only = lindblad::yield_of(system, None, dec, cfg)?;
    let sum = o_field_only + o_decoherence_only;
    Ok(CooperationReport {
        o_both,
        o_field_only,
        o_decoherence_only,
        sum,
        fluence: field.fluence(),
        cooperation: o_both > sum,
    })
}

pub fn cooperation_report<T: Real>(
    field: &ControlField<T>,
    system: &LevelSystem<T>,
    gamma: T,
    cfg: &PropagationConfig<T>,
) -> Result<CooperationReport<T>> {
    cooperation_report_with(field, system, &Decoherence::uniform(system, gamma)?, cfg)
}

/// O[E0, gamma]: a field optimised without decoherence, evaluated with it.
pub fn cross_evaluate<T: Real>(
    field_from_gamma0: &ControlField<T>,
    system: &LevelSystem<T>,
    gamma: T,
    cfg: &PropagationConfig<T>,
) -> Result<T> {
    lindblad::yield_of(system, Some(field_from_gamma0), &Decoherence::uniform(system, gamma)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsystem::{build_model, Model};

    fn fast_prop() -> PropagationConfig<f64> {
        PropagationConfig::default().with_dt(0.05).with_store_every(0)
    }

    fn small_ga(seed: u64) -> GaConfig<f64> {
        GaConfig {
            population_size: 8,
            generations: 5,
            rng_seed: seed,
            propagation: fast_prop(),
            ..GaConfig::default()
        }
    }

    #[test]
    fn zero_field_costs() {
        let sys = build_model::<f64>(Model::M1);
        let zero = ControlField::zero_for(&sys);
        let p0 = CostParams::new(0.0, 0.05).unwrap();
        assert_eq!(cost(&zero, &sys, 0.0, &p0, &fast_prop()).unwrap(), 0.0);
        let p5 = CostParams::new(0.05, 0.05).unwrap();
        assert!((cost(&zero, &sys, 0.0, &p5, &fast_prop()).unwrap() - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn cost_params_validation() {
        assert!(CostParams::new(1.2, 0.05).is_err());
        assert!(CostParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::<f64> { population_size: 3, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig::<f64> { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig::<f64> { amplitude_bounds: (0.5, 0.5), ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig::<f64>::default().validate().is_ok());
    }

    #[test]
    fn deterministic_and_monotone() {
        let sys = build_model::<f64>(Model::M1);
        let params = CostParams::new(0.05, 0.05).unwrap();
        let a = optimize(&sys, 0.03, &params, &small_ga(11)).unwrap();
        let b = optimize(&sys, 0.03, &params, &GaConfig { parallel: false, ..small_ga(11) }).unwrap();
        assert_eq!(a, b);
        let trace = a.best_cost_trace();
        assert_eq!(trace.len(), 5);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let c = optimize(&sys, 0.03, &params, &small_ga(12)).unwrap();
        assert_ne!(a.best_field, c.best_field);
    }

    #[test]
    fn genes_stay_in_bounds() {
        let sys = build_model::<f64>(Model::M1);
        let params = CostParams::new(1.0, 0.05).unwrap();
        let rec = optimize(&sys, 0.0, &params, &small_ga(3)).unwrap();
        for c in &rec.best_field.components {
            assert!((0.0..=0.5).contains(&c.amplitude));
            assert!((0.0..std::f64::consts::TAU).contains(&c.phase));
        }
    }

    #[test]
    fn budget_caps_evaluations() {
        let sys = build_model::<f64>(Model::M1);
        let params = CostParams::new(0.05, 0.05).unwrap();
        let cfg = GaConfig { max_evaluations: Some(20), generations: 50, ..small_ga(4) };
        let rec = optimize(&sys, 0.0, &params, &cfg).unwrap();
        assert!(rec.evaluations <= 20);
        assert!(rec.history.len() < 50);
    }

    #[test]
    fn cooperation_report_without_decoherence() {
        let sys = build_model::<f64>(Model::M1);
        let f = ControlField::resonant(&sys.carriers(), &[0.05, 0.04, 0.03, 0.02], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let r = cooperation_report(&f, &sys, 0.0, &fast_prop()).unwrap();
        assert_eq!(r.o_both, r.o_field_only);
        assert_eq!(r.o_decoherence_only, 0.0);
        assert!(!r.cooperation);
        let direct = cross_evaluate(&f, &sys, 0.0, &fast_prop()).unwrap();
        assert_eq!(direct, r.o_both);
    }

    #[test]
    fn record_csv_header() {
        let sys = build_model::<f64>(Model::M1);
        let params = CostParams::new(0.05, 0.05).unwrap();
        let rec = optimize(&sys, 0.0, &params, &small_ga(5)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("generation,J,O_percent,F\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
