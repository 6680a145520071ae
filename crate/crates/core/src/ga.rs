//! Binary-coded genetic search over physical controller parameters.
//!
//! Every genome decodes to SLH parameters, so every candidate controller is
//! physically realizable. One index is minimized while the other is held in an
//! interval through graded penalties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedloop::{
    assemble_closed_loop, build_controller_from_slh, ChannelDims, ControllerRealization, DirectCoupling, PlantModel,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::fmt_sig;
use crate::model::{ComplexMat, SlhParams};
use crate::performance::{lqg_lower_bound, PerformanceReport};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    PassiveOnly,
    NonPassive,
    PassivePlusDirectCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

/// Searched parameters of a one-mode controller with channels `(vk1, vk2, y)`.
///
/// Order: `Re Omega_minus`, then `Re, Im` of `C_minus` per channel; in
/// `NonPassive` mode `Re, Im` of `Omega_plus` and of `C_plus` per channel
/// follow; in `PassivePlusDirectCoupling` mode `Re, Im` of `K_minus` per plant
/// mode follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub mode: SearchMode,
    pub bounds: Vec<Bounds>,
    pub bits_per_param: u32,
    pub plant_modes: usize,
    pub dims: ChannelDims,
}

const CHANNELS: usize = 3;
pub const DEFAULT_BOUND: f64 = 3.0;
pub const DEFAULT_PLUS_BOUND: f64 = 1.0;
pub const DEFAULT_BITS: u32 = 16;

impl SearchSpace {
    pub fn param_count(mode: SearchMode, plant_modes: usize) -> usize {
        let passive = 1 + 2 * CHANNELS;
        match mode {
            SearchMode::PassiveOnly => passive,
            SearchMode::NonPassive => passive + 2 + 2 * CHANNELS,
            SearchMode::PassivePlusDirectCoupling => passive + 2 * plant_modes,
        }
    }

    /// Default space: 16 bits, `[-3, 3]` on every parameter except the `plus`
    /// terms of `NonPassive` mode, which get `[-1, 1]`.
    pub fn for_plant(plant: &PlantModel, mode: SearchMode) -> Self {
        let mut s = Self::uniform(plant, mode, DEFAULT_BOUND, DEFAULT_BITS);
        if mode == SearchMode::NonPassive {
            for b in &mut s.bounds[1 + 2 * CHANNELS..] {
                *b = Bounds { lo: -DEFAULT_PLUS_BOUND, hi: DEFAULT_PLUS_BOUND };
            }
        }
        s
    }

    /// `[-bound, bound]` on every parameter.
    pub fn uniform(plant: &PlantModel, mode: SearchMode, bound: f64, bits_per_param: u32) -> Self {
        let plant_modes = plant.n() / 2;
        Self {
            mode,
            bounds: vec![Bounds { lo: -bound, hi: bound }; Self::param_count(mode, plant_modes)],
            bits_per_param,
            plant_modes,
            dims: ChannelDims::for_plant(plant),
        }
    }

    pub fn genome_len(&self) -> usize {
        self.bounds.len() * self.bits_per_param as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != Self::param_count(self.mode, self.plant_modes) {
            return Err(Error::Config(format!(
                "{:?} needs {} bounds, got {}",
                self.mode,
                Self::param_count(self.mode, self.plant_modes),
                self.bounds.len()
            )));
        }
        if self.bounds.iter().any(|b| !(b.lo < b.hi) || !b.lo.is_finite() || !b.hi.is_finite()) {
            return Err(Error::Config("every bound needs finite lo < hi".into()));
        }
        if !(1..=52).contains(&self.bits_per_param) {
            return Err(Error::Config("bits_per_param must be in 1..=52".into()));
        }
        if self.dims.n_u != 2 || self.dims.n_vk2 != 2 || self.dims.n_y != 2 {
            return Err(Error::Config(format!("one-mode channels expected, got {:?}", self.dims)));
        }
        Ok(())
    }

    /// Controller SLH parameters from a parameter vector in the documented order.
    pub fn params_to_slh(&self, x: &[f64]) -> Result<SlhParams> {
        let expected = Self::param_count(self.mode, self.plant_modes);
        if x.len() != expected {
            return Err(Error::GenomeLength { expected, got: x.len() });
        }
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let mut p = SlhParams::zeros(1, CHANNELS);
        p.omega_minus[(0, 0)] = c(x[0], 0.0);
        for ch in 0..CHANNELS {
            p.c_minus[(ch, 0)] = c(x[1 + 2 * ch], x[2 + 2 * ch]);
        }
        let rest = &x[1 + 2 * CHANNELS..];
        match self.mode {
            SearchMode::PassiveOnly => {}
            SearchMode::NonPassive => {
                p.omega_plus[(0, 0)] = c(rest[0], rest[1]);
                for ch in 0..CHANNELS {
                    p.c_plus[(ch, 0)] = c(rest[2 + 2 * ch], rest[3 + 2 * ch]);
                }
            }
            SearchMode::PassivePlusDirectCoupling => {
                let km = ComplexMat::from_fn(1, self.plant_modes, |_, j| c(rest[2 * j], rest[2 * j + 1]));
                p.k_plus = Some(ComplexMat::zeros(1, self.plant_modes));
                p.k_minus = Some(km);
            }
        }
        Ok(p)
    }

    /// Uniform draw of a parameter vector inside the bounds.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect()
    }
}

/// Bits of all parameters, most significant bit first within each parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub bits: Vec<bool>,
}

impl Genome {
    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        Self { bits: (0..len).map(|_| rng.random_bool(0.5)).collect() }
    }
}

pub fn decode_params(g: &Genome, s: &SearchSpace) -> Result<Vec<f64>> {
    let b = s.bits_per_param as usize;
    if g.bits.len() != s.genome_len() {
        return Err(Error::GenomeLength { expected: s.genome_len(), got: g.bits.len() });
    }
    let full = ((1u64 << b) - 1) as f64;
    Ok(g.bits
        .chunks(b)
        .zip(&s.bounds)
        .map(|(chunk, bd)| {
            let int = chunk.iter().fold(0u64, |acc, &bit| (acc << 1) | bit as u64);
            bd.lo + int as f64 / full * (bd.hi - bd.lo)
        })
        .collect())
}

pub fn decode(g: &Genome, s: &SearchSpace) -> Result<SlhParams> {
    s.params_to_slh(&decode_params(g, s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Index {
    Lqg,
    Hinf,
}

/// `FixLqg` keeps J in the interval and minimizes H-infinity; `FixHinf` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    None { minimize: Index },
    FixLqg { interval: Interval },
    FixHinf { interval: Interval },
}

impl Constraint {
    pub fn minimized(&self) -> Index {
        match self {
            Constraint::None { minimize } => *minimize,
            Constraint::FixLqg { .. } => Index::Hinf,
            Constraint::FixHinf { .. } => Index::Lqg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-bit flip probability; `None` means one over the genome length.
    pub mutation_prob: Option<f64>,
    pub rng_seed: u64,
    pub constraint: Constraint,
    pub penalty: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 200,
            crossover_prob: 0.8,
            mutation_prob: None,
            rng_seed: 0,
            constraint: Constraint::None { minimize: Index::Lqg },
            penalty: 1e6,
            execution: Execution::available(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::Config("population_size must be even and at least 2".into()));
        }
        if !prob_ok(self.crossover_prob) || !self.mutation_prob.is_none_or(prob_ok) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::Config("penalty must be positive".into()));
        }
        if let Constraint::FixLqg { interval } | Constraint::FixHinf { interval } = self.constraint {
            if !(interval.lo <= interval.hi) {
                return Err(Error::Config("constraint interval needs lo <= hi".into()));
            }
        }
        Ok(())
    }

    fn mutation_rate(&self, genome_len: usize) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / genome_len.max(1) as f64)
    }
}

/// Fitness of one genome together with the loop's indices when it is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub feasible: bool,
    pub report: Option<PerformanceReport>,
}

/// Lower is better: `penalty + abscissa` for unstable loops, `penalty / 2 + distance`
/// outside the constraint interval, otherwise the minimized index.
pub fn fitness(g: &Genome, plant: &PlantModel, s: &SearchSpace, cfg: &GaConfig) -> Evaluation {
    let infeasible = |fitness: f64, report| Evaluation { fitness, feasible: false, report };
    let built = decode(g, s).and_then(|p| {
        let k = build_controller_from_slh(&p, s.dims)?;
        let coupling = DirectCoupling::from_slh(&p);
        let cl = assemble_closed_loop(plant, &k, coupling.as_ref())?;
        Ok((k, cl))
    });
    let Ok((k, cl)) = built else {
        return infeasible(2.0 * cfg.penalty, None);
    };
    let report = PerformanceReport::from_closed_loop(&cl, lqg_lower_bound(&plant.cz, &plant.dz, &k.ck).ok());
    let (Some(j), Some(h)) = (report.j_lqg, report.hinf) else {
        let a = report.spectral_abscissa;
        let graded = if a.is_finite() { cfg.penalty + a.clamp(0.0, cfg.penalty) } else { 2.0 * cfg.penalty };
        return infeasible(graded, Some(report));
    };
    if !j.is_finite() || !h.is_finite() {
        return infeasible(2.0 * cfg.penalty, Some(report));
    }
    let violation = match cfg.constraint {
        Constraint::None { .. } => 0.0,
        Constraint::FixLqg { interval } => interval.distance(j),
        Constraint::FixHinf { interval } => interval.distance(h),
    };
    if violation > 0.0 {
        return infeasible(cfg.penalty / 2.0 + violation.min(cfg.penalty / 4.0), Some(report));
    }
    let value = match cfg.constraint.minimized() {
        Index::Lqg => j,
        Index::Hinf => h,
    };
    Evaluation { fitness: value, feasible: true, report: Some(report) }
}

/// RNG stream owned by one individual slot of one generation.
pub fn individual_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn argmin(fit: &[f64]) -> usize {
    (0..fit.len()).min_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b))).expect("non-empty population")
}

/// Binary tournament: the fitter of two uniformly drawn individuals, ties to the lower index.
pub fn select<R: Rng>(fit: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..fit.len());
    let b = rng.random_range(0..fit.len());
    match fit[a].total_cmp(&fit[b]).then(a.cmp(&b)) {
        std::cmp::Ordering::Greater => b,
        _ => a,
    }
}

/// Single-point crossover applied with probability `prob`.
pub fn crossover<R: Rng>(a: &Genome, b: &Genome, prob: f64, rng: &mut R) -> (Genome, Genome) {
    let len = a.bits.len();
    if len < 2 || !rng.random_bool(prob) {
        return (a.clone(), b.clone());
    }
    let cut = rng.random_range(1..len);
    let mut c = a.bits[..cut].to_vec();
    c.extend_from_slice(&b.bits[cut..]);
    let mut d = b.bits[..cut].to_vec();
    d.extend_from_slice(&a.bits[cut..]);
    (Genome { bits: c }, Genome { bits: d })
}

pub fn mutate<R: Rng>(g: &mut Genome, prob: f64, rng: &mut R) {
    for bit in &mut g.bits {
        if rng.random_bool(prob) {
            *bit = !*bit;
        }
    }
}

/// Next generation: slot 0 keeps the current best unchanged, the other slots are
/// filled pairwise by tournament selection, crossover and mutation. Pair `p`
/// draws only from its own stream.
pub fn next_generation(pop: &[Genome], fit: &[f64], cfg: &GaConfig, generation: usize) -> Vec<Genome> {
    let len = pop.first().map_or(0, |g| g.bits.len());
    let pm = cfg.mutation_rate(len);
    let mut next = Vec::with_capacity(pop.len());
    next.push(pop[argmin(fit)].clone());
    let mut pair = 0;
    while next.len() < pop.len() {
        let mut rng = individual_rng(cfg.rng_seed, generation, pair);
        let (a, b) = (select(fit, &mut rng), select(fit, &mut rng));
        let (mut c, mut d) = crossover(&pop[a], &pop[b], cfg.crossover_prob, &mut rng);
        mutate(&mut c, pm, &mut rng);
        mutate(&mut d, pm, &mut rng);
        next.push(c);
        if next.len() < pop.len() {
            next.push(d);
        }
        pair += 1;
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub best_j: Option<f64>,
    pub best_hinf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub mode: SearchMode,
    pub slh: SlhParams,
    pub controller: ControllerRealization,
    pub coupling: Option<DirectCoupling>,
    pub report: PerformanceReport,
    pub fitness: f64,
    pub genome: Genome,
    pub trace: Vec<TraceRow>,
    pub seed: u64,
}

impl SynthesisResult {
    pub fn trace_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_sig);
        let mut out = String::from("generation,best_fitness,best_J,best_Hinf\n");
        for r in &self.trace {
            out += &format!("{},{},{},{}\n", r.generation, fmt_sig(r.best_fitness), opt(r.best_j), opt(r.best_hinf));
        }
        out
    }
}

pub fn evaluate_population(
    pop: &[Genome],
    plant: &PlantModel,
    s: &SearchSpace,
    cfg: &GaConfig,
) -> Vec<Evaluation> {
    cfg.execution.map(pop.len(), |i| fitness(&pop[i], plant, s, cfg))
}

pub fn run_ga(plant: &PlantModel, s: &SearchSpace, cfg: &GaConfig) -> Result<SynthesisResult> {
    plant.validate()?;
    s.validate()?;
    cfg.validate()?;
    let len = s.genome_len();
    let mut pop: Vec<Genome> = (0..cfg.population_size)
        .map(|i| Genome::random(len, &mut individual_rng(cfg.rng_seed, 0, i)))
        .collect();
    let mut trace = Vec::with_capacity(cfg.generations + 1);
    let mut best: Option<(Genome, Evaluation)> = None;
    let mut fit = record_generation(&pop, plant, s, cfg, 0, &mut trace, &mut best);
    for generation in 1..=cfg.generations {
        pop = next_generation(&pop, &fit, cfg, generation);
        fit = record_generation(&pop, plant, s, cfg, generation, &mut trace, &mut best);
    }
    let (genome, eval) = best.expect("at least one generation");
    if !eval.feasible {
        return Err(Error::NoFeasible);
    }
    let slh = decode(&genome, s)?;
    let controller = build_controller_from_slh(&slh, s.dims)?;
    let coupling = DirectCoupling::from_slh(&slh);
    Ok(SynthesisResult {
        mode: s.mode,
        report: eval.report.expect("feasible evaluations carry a report"),
        fitness: eval.fitness,
        slh,
        controller,
        coupling,
        genome,
        trace,
        seed: cfg.rng_seed,
    })
}

/// Evaluates one population, appends its trace row and updates the best-ever individual.
fn record_generation(
    pop: &[Genome],
    plant: &PlantModel,
    s: &SearchSpace,
    cfg: &GaConfig,
    generation: usize,
    trace: &mut Vec<TraceRow>,
    best: &mut Option<(Genome, Evaluation)>,
) -> Vec<f64> {
    let evals = evaluate_population(pop, plant, s, cfg);
    let fit: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
    let i = argmin(&fit);
    let e = &evals[i];
    trace.push(TraceRow {
        generation,
        best_fitness: e.fitness,
        best_j: e.report.as_ref().and_then(|r| r.j_lqg),
        best_hinf: e.report.as_ref().and_then(|r| r.hinf),
    });
    if best.as_ref().is_none_or(|(_, b)| e.fitness < b.fitness) {
        *best = Some((pop[i].clone(), e.clone()));
    }
    fit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn space(mode: SearchMode, bound: f64) -> SearchSpace {
        SearchSpace::uniform(&registry::cavity(), mode, bound, 16)
    }

    #[test]
    fn decode_endpoints_and_midpoint() {
        let s = space(SearchMode::PassiveOnly, 1.0);
        let n = s.genome_len();
        let zeros = decode_params(&Genome { bits: vec![false; n] }, &s).unwrap();
        assert!(zeros.iter().all(|&x| x == -1.0));
        let ones = decode_params(&Genome { bits: vec![true; n] }, &s).unwrap();
        assert!(ones.iter().all(|&x| x == 1.0));
        let mut bits = vec![false; n];
        for p in 0..s.bounds.len() {
            bits[16 * p] = true;
        }
        let mid = decode_params(&Genome { bits }, &s).unwrap();
        let expect = -1.0 + 32768.0 / 65535.0 * 2.0;
        assert!(mid.iter().all(|&x| (x - expect).abs() < 1e-15));
    }

    #[test]
    fn decode_checks_length() {
        let s = space(SearchMode::NonPassive, 3.0);
        assert!(matches!(
            decode(&Genome { bits: vec![true; 5] }, &s),
            Err(Error::GenomeLength { expected: 240, got: 5 })
        ));
    }

    #[test]
    fn default_space_narrows_plus_terms() {
        let s = SearchSpace::for_plant(&registry::dpa(), SearchMode::NonPassive);
        assert!(s.bounds[..7].iter().all(|b| b.hi == 3.0));
        assert!(s.bounds[7..].iter().all(|b| (b.lo, b.hi) == (-1.0, 1.0)));
        let c = SearchSpace::for_plant(&registry::dpa(), SearchMode::PassivePlusDirectCoupling);
        assert!(c.bounds.iter().all(|b| (b.lo, b.hi) == (-3.0, 3.0)));
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(SearchSpace::param_count(SearchMode::PassiveOnly, 1), 7);
        assert_eq!(SearchSpace::param_count(SearchMode::NonPassive, 1), 15);
        assert_eq!(SearchSpace::param_count(SearchMode::PassivePlusDirectCoupling, 1), 9);
    }

    #[test]
    fn passive_mode_zeroes_plus_terms() {
        let s = space(SearchMode::PassiveOnly, 3.0);
        let mut rng = individual_rng(1, 0, 0);
        for _ in 0..20 {
            let p = decode(&Genome::random(s.genome_len(), &mut rng), &s).unwrap();
            assert_eq!(crate::model::classify(&p), crate::model::PassivityClass::Passive);
            assert!(p.k_minus.is_none());
        }
    }

    #[test]
    fn unstable_loops_are_penalized() {
        // All parameters at zero leave the controller marginal.
        let mut s = space(SearchMode::PassiveOnly, 1.0);
        s.bounds.iter_mut().for_each(|b| b.lo = 0.0);
        let g = Genome { bits: vec![false; s.genome_len()] };
        let cfg = GaConfig::default();
        let e = fitness(&g, &registry::cavity(), &s, &cfg);
        assert!(e.fitness >= cfg.penalty && !e.feasible);
    }

    #[test]
    fn feasible_fitness_is_the_index() {
        let s = space(SearchMode::PassiveOnly, 3.0);
        let plant = registry::cavity();
        let x = [0.4, 0.0, 0.0, 1.3, -0.2, 0.9, 0.5];
        let p = s.params_to_slh(&x).unwrap();
        let k = build_controller_from_slh(&p, s.dims).unwrap();
        let (_, r) = crate::performance::evaluate(&plant, &k, None).unwrap();
        assert!(r.stable);
        let mut cfg = GaConfig::default();
        let bits: Vec<bool> = x
            .iter()
            .flat_map(|&v| {
                let int = ((v + 3.0) / 6.0 * 65535.0).round() as u64;
                (0..16).rev().map(move |b| (int >> b) & 1 == 1)
            })
            .collect();
        let g = Genome { bits };
        let fit = |cfg: &GaConfig| fitness(&g, &plant, &s, cfg);
        let e = fit(&cfg);
        let rep = e.report.clone().unwrap();
        assert_eq!(e.fitness, rep.j_lqg.unwrap());
        cfg.constraint = Constraint::FixLqg { interval: Interval { lo: 0.0, hi: 100.0 } };
        assert_eq!(fit(&cfg).fitness, rep.hinf.unwrap());
        cfg.constraint = Constraint::FixLqg { interval: Interval { lo: 0.0, hi: 0.5 } };
        let v = fit(&cfg);
        assert!(!v.feasible && (v.fitness - (cfg.penalty / 2.0 + rep.j_lqg.unwrap() - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn selection_only_generation_is_drawn_from_parents() {
        let s = space(SearchMode::PassiveOnly, 3.0);
        let pop: Vec<Genome> = (0..10).map(|i| Genome::random(s.genome_len(), &mut individual_rng(9, 0, i))).collect();
        let fit: Vec<f64> = (0..10).map(|i| ((i * 7) % 10) as f64).collect();
        let cfg = GaConfig { crossover_prob: 0.0, mutation_prob: Some(0.0), ..GaConfig::default() };
        let next = next_generation(&pop, &fit, &cfg, 1);
        assert_eq!(next.len(), 10);
        assert_eq!(next[0], pop[argmin(&fit)]);
        assert!(next.iter().all(|g| pop.contains(g)));
    }

    #[test]
    fn crossover_swaps_tails() {
        let a = Genome { bits: vec![false; 32] };
        let b = Genome { bits: vec![true; 32] };
        let mut rng = individual_rng(3, 0, 0);
        let (c, d) = crossover(&a, &b, 1.0, &mut rng);
        let cut = c.bits.iter().position(|&x| x).unwrap();
        assert!(cut >= 1 && c.bits[cut..].iter().all(|&x| x) && d.bits[..cut].iter().all(|&x| x));
        assert!(d.bits[cut..].iter().all(|&x| !x));
    }

    #[test]
    fn short_run_is_deterministic_and_monotone() {
        let plant = registry::cavity();
        let s = SearchSpace::for_plant(&plant, SearchMode::PassiveOnly);
        let cfg = GaConfig { population_size: 12, generations: 8, rng_seed: 5, ..GaConfig::default() };
        let a = run_ga(&plant, &s, &cfg).unwrap();
        let b = run_ga(&plant, &s, &GaConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 9);
        assert!(a.trace.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        let (ra, rb) = crate::closedloop::controller_pr_residual(&a.controller);
        assert!(ra < 1e-9 && rb < 1e-9);
    }

    #[test]
    fn config_validation() {
        let bad = GaConfig { population_size: 7, ..GaConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = GaConfig { crossover_prob: 1.5, ..GaConfig::default() };
        assert!(bad.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }
}
