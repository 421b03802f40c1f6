//! Multi-objective optimization of the transmission decision `(P_Ts, n_rel)`.
//!
//! Three objectives, all minimized:
//!
//! - `f1 = −P_sc`: anypath delivery probability over the best `n_rel`
//!   candidates (maximized),
//! - `f2 = −P_rnd`: probability that the assumed forwarding degree actually
//!   occurs under the deployment density (maximized — robustness),
//! - `f3 = C_s`: expected one-hop energy per delivered packet.
//!
//! The search runs NSGA-II (fast non-dominated sort, crowding distance,
//! binary tournament, simulated-binary crossover, polynomial mutation) over
//! real genes in `[0,1]²` decoded to `P_Ts ∈ [p_min, p_max]` and
//! `n_rel ∈ 0..=n_cap`. Decisions whose predicted delivery probability sits
//! below the saturation floor are infeasible; feasible solutions always beat
//! infeasible ones, and infeasible ones are compared by constraint violation.
//!
//! [`brute_force_front`] computes a reference front by exhaustive grid
//! evaluation and pairwise dominance filtering — the oracle the genetic
//! search is validated against (coverage in normalized objective space plus
//! the [`hypervolume`] ratio).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::degree::p_rnd;
use crate::energy::{expected_cost, EnergyParams, P_SC_FLOOR};
use crate::error::{Error, Result};
use crate::linkmodel::{p_sc_predict, PredictionContext};

/// One decision with its objective vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Transmission power, watts.
    pub p_ts: f64,
    /// Assumed forwarding-candidate count.
    pub n_rel: u32,
    /// Minimized objective vector `[−P_sc, −P_rnd, C_s]`.
    pub objectives: [f64; 3],
}

impl Solution {
    /// Anypath delivery probability of this decision.
    pub fn p_sc(&self) -> f64 {
        -self.objectives[0]
    }

    /// Degree-occurrence probability of this decision.
    pub fn p_rnd(&self) -> f64 {
        -self.objectives[1]
    }

    /// Expected one-hop energy cost, joules.
    pub fn cost(&self) -> f64 {
        self.objectives[2]
    }
}

/// A set of mutually non-dominated solutions, sorted by `(p_ts, n_rel)`.
#[derive(Debug, Clone, Default)]
pub struct ParetoSet {
    pub solutions: Vec<Solution>,
}

impl ParetoSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Does some member match the given decision (relative power tolerance,
    /// exact degree)?
    pub fn contains_decision(&self, p_ts: f64, n_rel: u32, power_tol: f64) -> bool {
        self.solutions
            .iter()
            .any(|s| s.n_rel == n_rel && (s.p_ts - p_ts).abs() <= power_tol * s.p_ts.abs())
    }
}

/// Strong Pareto dominance for minimization: no worse everywhere and
/// strictly better somewhere.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let mut strictly = false;
    for j in 0..3 {
        if a[j] > b[j] {
            return false;
        }
        if a[j] < b[j] {
            strictly = true;
        }
    }
    strictly
}

/// Genetic-search knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    /// Population size; must be even and ≥ 4.
    pub population: usize,
    /// Generation count; must be ≥ 1.
    pub generations: usize,
    /// Simulated-binary crossover probability.
    pub crossover_prob: f64,
    /// SBX distribution index (larger → children closer to parents).
    pub crossover_index: f64,
    /// Per-gene polynomial-mutation probability.
    pub mutation_prob: f64,
    /// Polynomial-mutation distribution index.
    pub mutation_index: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 60,
            generations: 100,
            crossover_prob: 0.9,
            crossover_index: 15.0,
            mutation_prob: 0.5,
            mutation_index: 20.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "population must be even and at least 4, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(Error::InvalidParameter(
                "generation count must be at least 1".to_string(),
            ));
        }
        for (name, p) in [
            ("crossover probability", self.crossover_prob),
            ("mutation probability", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        for (name, ix) in [
            ("crossover index", self.crossover_index),
            ("mutation index", self.mutation_index),
        ] {
            if !(ix > 0.0 && ix.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {ix}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything one optimization run needs: the sender's link-prediction
/// context plus deployment density, energy constants and decision bounds.
#[derive(Debug, Clone)]
pub struct OptimizationContext {
    pub link: PredictionContext,
    /// Deployment density, nodes/m².
    pub rho: f64,
    pub energy: EnergyParams,
    /// Power decision bounds, watts.
    pub p_min: f64,
    pub p_max: f64,
    /// Largest assumed candidate count the decision may take.
    pub n_cap: u32,
}

impl OptimizationContext {
    pub fn validate(&self) -> Result<()> {
        self.link.radio.validate()?;
        self.energy.validate()?;
        if !(self.p_min > 0.0 && self.p_max >= self.p_min && self.p_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power bounds must satisfy 0 < p_min ≤ p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "deployment density must be positive, got {}",
                self.rho
            )));
        }
        if self.n_cap == 0 {
            return Err(Error::InvalidParameter(
                "degree cap must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Sender→destination distance, metres.
    fn d_ds(&self) -> Result<f64> {
        let find = |id| {
            self.link
                .nodes
                .iter()
                .find(|(nid, _)| *nid == id)
                .map(|(_, p)| *p)
                .ok_or(Error::UnknownNode(id))
        };
        let s = find(self.link.sender)?;
        let d = find(self.link.destination)?;
        Ok(crate::geometry::distance(s, d))
    }
}

/// Objective vector of one decision, or its constraint violation when the
/// predicted delivery probability sits below the saturation floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Feasible([f64; 3]),
    Infeasible { violation: f64 },
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Evaluation::Feasible(_))
    }
}

/// Evaluates one decision `(p_ts, n_rel)` under the context.
pub fn evaluate(ctx: &OptimizationContext, p_ts: f64, n_rel: u32) -> Result<Evaluation> {
    let p_sc = p_sc_predict(&ctx.link, p_ts, n_rel)?;
    if p_sc < P_SC_FLOOR {
        return Ok(Evaluation::Infeasible {
            violation: P_SC_FLOOR - p_sc,
        });
    }
    let d_ds = ctx.d_ds()?;
    let p_rnd_v = p_rnd(p_ts, n_rel, d_ds, ctx.rho, &ctx.link.range_map)?;
    let cost = expected_cost(p_ts, n_rel, p_sc, &ctx.energy)?;
    Ok(Evaluation::Feasible([-p_sc, -p_rnd_v, cost]))
}

// ---------------------------------------------------------------------------
// NSGA-II machinery
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Individual {
    genes: [f64; 2],
    p_ts: f64,
    n_rel: u32,
    eval: Evaluation,
    rank: usize,
    crowding: f64,
}

fn decode(ctx: &OptimizationContext, genes: [f64; 2]) -> (f64, u32) {
    let p_ts = ctx.p_min + genes[0] * (ctx.p_max - ctx.p_min);
    let n_rel = (genes[1] * ctx.n_cap as f64).round() as u32;
    (p_ts, n_rel.min(ctx.n_cap))
}

fn make_individual(ctx: &OptimizationContext, genes: [f64; 2]) -> Result<Individual> {
    let (p_ts, n_rel) = decode(ctx, genes);
    Ok(Individual {
        genes,
        p_ts,
        n_rel,
        eval: evaluate(ctx, p_ts, n_rel)?,
        rank: usize::MAX,
        crowding: 0.0,
    })
}

/// Constraint domination: feasible beats infeasible, feasible pairs compare
/// by strong Pareto dominance, infeasible pairs by smaller violation.
fn constrained_dominates(a: &Evaluation, b: &Evaluation) -> bool {
    match (a, b) {
        (Evaluation::Feasible(fa), Evaluation::Feasible(fb)) => dominates(fa, fb),
        (Evaluation::Feasible(_), Evaluation::Infeasible { .. }) => true,
        (Evaluation::Infeasible { .. }, Evaluation::Feasible(_)) => false,
        (Evaluation::Infeasible { violation: va }, Evaluation::Infeasible { violation: vb }) => {
            va < vb
        }
    }
}

/// Fast non-dominated sort; returns front index lists, best front first,
/// and stamps each individual's rank.
fn fast_non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..n {
        for j in (i + 1)..n {
            if constrained_dominates(&pop[i].eval, &pop[j].eval) {
                dominated[i].push(j);
                domination_count[j] += 1;
            } else if constrained_dominates(&pop[j].eval, &pop[i].eval) {
                dominated[j].push(i);
                domination_count[i] += 1;
            }
        }
        if domination_count[i] == 0 {
            pop[i].rank = 0;
            fronts[0].push(i);
        }
    }
    let mut k = 0;
    while !fronts[k].is_empty() {
        let mut next = Vec::new();
        for &i in &fronts[k] {
            for &j in &dominated[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    pop[j].rank = k + 1;
                    next.push(j);
                }
            }
        }
        k += 1;
        fronts.push(next);
    }
    fronts.pop(); // trailing empty front
    fronts
}

/// Sort key vector for crowding: objectives for feasible individuals, the
/// violation (replicated) for infeasible ones, so every front is comparable.
fn crowding_key(ind: &Individual) -> [f64; 3] {
    match ind.eval {
        Evaluation::Feasible(objs) => objs,
        Evaluation::Infeasible { violation } => [violation, 0.0, 0.0],
    }
}

/// Crowding distance within one front: boundary solutions get ∞, interior
/// ones the sum of range-normalized gaps between their neighbours.
fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    for obj in 0..3 {
        let mut order: Vec<usize> = front.to_vec();
        order.sort_by(|&a, &b| {
            crowding_key(&pop[a])[obj]
                .partial_cmp(&crowding_key(&pop[b])[obj])
                .expect("objectives are finite")
        });
        let lo = crowding_key(&pop[order[0]])[obj];
        let hi = crowding_key(&pop[*order.last().unwrap()])[obj];
        let range = hi - lo;
        pop[order[0]].crowding = f64::INFINITY;
        pop[*order.last().unwrap()].crowding = f64::INFINITY;
        if range <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let prev = crowding_key(&pop[order[w - 1]])[obj];
            let next = crowding_key(&pop[order[w + 1]])[obj];
            pop[order[w]].crowding += (next - prev) / range;
        }
    }
}

/// Crowded-comparison winner: lower rank, then larger crowding distance,
/// then the first argument (deterministic tie-break).
fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

/// Bounded simulated-binary crossover on `[0,1]` genes.
fn sbx(
    rng: &mut ChaCha12Rng,
    p1: [f64; 2],
    p2: [f64; 2],
    prob: f64,
    eta: f64,
) -> ([f64; 2], [f64; 2]) {
    let mut c1 = p1;
    let mut c2 = p2;
    if rng.random::<f64>() > prob {
        return (c1, c2);
    }
    for k in 0..2 {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        let (y1, y2) = if p1[k] <= p2[k] {
            (p1[k], p2[k])
        } else {
            (p2[k], p1[k])
        };
        if y2 - y1 < 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let spread = |beta: f64| -> f64 {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        // Bounds are [0, 1] for every gene.
        let beta_lo = 1.0 + 2.0 * y1 / (y2 - y1);
        let beta_hi = 1.0 + 2.0 * (1.0 - y2) / (y2 - y1);
        let mut lo = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
        let mut hi = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
        lo = lo.clamp(0.0, 1.0);
        hi = hi.clamp(0.0, 1.0);
        if rng.random::<f64>() <= 0.5 {
            c1[k] = hi;
            c2[k] = lo;
        } else {
            c1[k] = lo;
            c2[k] = hi;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation on `[0,1]` genes.
fn polynomial_mutation(rng: &mut ChaCha12Rng, genes: &mut [f64; 2], prob: f64, eta: f64) {
    for g in genes.iter_mut() {
        if rng.random::<f64>() > prob {
            continue;
        }
        let y = *g;
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let delta = if u <= 0.5 {
            let xy = 1.0 - y;
            (2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0)).powf(pow) - 1.0
        } else {
            let xy = y;
            1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0)).powf(pow)
        };
        *g = (y + delta).clamp(0.0, 1.0);
    }
}

/// Runs NSGA-II and returns the feasible first front of the final
/// population, exact duplicate decisions removed, sorted by `(p_ts, n_rel)`.
/// Bit-for-bit deterministic for a fixed seed. Errors with
/// [`Error::EmptyFront`] when no feasible decision was found.
pub fn nsga2_front(ctx: &OptimizationContext, ga: &GaConfig) -> Result<ParetoSet> {
    ctx.validate()?;
    ga.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(ga.seed);
    let n = ga.population;
    let mut pop: Vec<Individual> = Vec::with_capacity(n);
    for _ in 0..n {
        let genes = [rng.random::<f64>(), rng.random::<f64>()];
        pop.push(make_individual(ctx, genes)?);
    }
    let fronts = fast_non_dominated_sort(&mut pop);
    for front in &fronts {
        assign_crowding(&mut pop, front);
    }
    for _ in 0..ga.generations {
        // Binary-tournament mating pool + variation.
        let mut offspring: Vec<Individual> = Vec::with_capacity(n);
        while offspring.len() < n {
            let pick = |rng: &mut ChaCha12Rng, pop: &[Individual]| -> usize {
                let a = rng.random_range(0..pop.len());
                let b = rng.random_range(0..pop.len());
                if crowded_better(&pop[b], &pop[a]) {
                    b
                } else {
                    a
                }
            };
            let pa = pick(&mut rng, &pop);
            let pb = pick(&mut rng, &pop);
            let (mut g1, mut g2) = sbx(
                &mut rng,
                pop[pa].genes,
                pop[pb].genes,
                ga.crossover_prob,
                ga.crossover_index,
            );
            polynomial_mutation(&mut rng, &mut g1, ga.mutation_prob, ga.mutation_index);
            polynomial_mutation(&mut rng, &mut g2, ga.mutation_prob, ga.mutation_index);
            offspring.push(make_individual(ctx, g1)?);
            if offspring.len() < n {
                offspring.push(make_individual(ctx, g2)?);
            }
        }
        // Environmental selection over parents ∪ offspring.
        pop.extend(offspring);
        let fronts = fast_non_dominated_sort(&mut pop);
        for front in &fronts {
            assign_crowding(&mut pop, front);
        }
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for front in &fronts {
            if keep.len() + front.len() <= n {
                keep.extend_from_slice(front);
            } else {
                let mut rest: Vec<usize> = front.clone();
                rest.sort_by(|&a, &b| {
                    pop[b]
                        .crowding
                        .partial_cmp(&pop[a].crowding)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                rest.truncate(n - keep.len());
                keep.extend(rest);
                break;
            }
        }
        keep.sort_unstable();
        let mut next = Vec::with_capacity(n);
        for i in keep {
            next.push(pop[i].clone());
        }
        pop = next;
    }
    // Feasible first front of the final population.
    let fronts = fast_non_dominated_sort(&mut pop);
    let mut solutions: Vec<Solution> = Vec::new();
    if let Some(first) = fronts.first() {
        for &i in first {
            if let Evaluation::Feasible(objs) = pop[i].eval {
                solutions.push(Solution {
                    p_ts: pop[i].p_ts,
                    n_rel: pop[i].n_rel,
                    objectives: objs,
                });
            }
        }
    }
    solutions.sort_by(|a, b| {
        a.p_ts
            .partial_cmp(&b.p_ts)
            .expect("powers are finite")
            .then(a.n_rel.cmp(&b.n_rel))
    });
    solutions.dedup_by(|a, b| a.p_ts == b.p_ts && a.n_rel == b.n_rel);
    if solutions.is_empty() {
        return Err(Error::EmptyFront);
    }
    Ok(ParetoSet { solutions })
}

/// Exhaustive-evaluation grid for the reference front.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Number of evenly spaced power levels over `[p_min, p_max]`; ≥ 2.
    pub power_steps: usize,
    /// Degrees `0..=n_rel_max` are evaluated.
    pub n_rel_max: u32,
}

/// Brute-force reference front: evaluates every grid decision and keeps the
/// non-dominated feasible ones. Exact for the grid, independent of the
/// genetic search.
pub fn brute_force_front(ctx: &OptimizationContext, grid: &GridSpec) -> Result<ParetoSet> {
    ctx.validate()?;
    if grid.power_steps < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least two power steps".to_string(),
        ));
    }
    let mut feasible: Vec<Solution> = Vec::new();
    for i in 0..grid.power_steps {
        let p_ts = ctx.p_min
            + (ctx.p_max - ctx.p_min) * i as f64 / (grid.power_steps - 1) as f64;
        for n_rel in 0..=grid.n_rel_max {
            if let Evaluation::Feasible(objs) = evaluate(ctx, p_ts, n_rel)? {
                feasible.push(Solution {
                    p_ts,
                    n_rel,
                    objectives: objs,
                });
            }
        }
    }
    let mut keep: Vec<Solution> = Vec::new();
    'outer: for (i, s) in feasible.iter().enumerate() {
        for (j, t) in feasible.iter().enumerate() {
            if i != j && dominates(&t.objectives, &s.objectives) {
                continue 'outer;
            }
        }
        keep.push(s.clone());
    }
    keep.sort_by(|a, b| {
        a.p_ts
            .partial_cmp(&b.p_ts)
            .expect("powers are finite")
            .then(a.n_rel.cmp(&b.n_rel))
    });
    keep.dedup_by(|a, b| a.p_ts == b.p_ts && a.n_rel == b.n_rel);
    if keep.is_empty() {
        return Err(Error::EmptyFront);
    }
    Ok(ParetoSet { solutions: keep })
}

/// Hypervolume dominated by a minimization front relative to a reference
/// point, computed exactly by slicing along the third objective. Points not
/// strictly better than the reference in every coordinate contribute nothing.
pub fn hypervolume(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let pts: Vec<[f64; 3]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1] && p[2] < reference[2])
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    let mut levels: Vec<f64> = pts.iter().map(|p| p[2]).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("objectives are finite"));
    levels.dedup();
    levels.push(reference[2]);
    let area2d = |active: &[[f64; 3]]| -> f64 {
        // Union of boxes [x, ref_x] × [y, ref_y], swept in ascending x.
        let mut xs: Vec<(f64, f64)> = active.iter().map(|p| (p[0], p[1])).collect();
        xs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("objectives are finite")
                .then(a.1.partial_cmp(&b.1).expect("objectives are finite"))
        });
        let mut best_y = reference[1];
        let mut area = 0.0;
        for (x, y) in xs {
            if y < best_y {
                area += (reference[0] - x) * (best_y - y);
                best_y = y;
            }
        }
        area
    };
    let mut volume = 0.0;
    for w in 0..levels.len() - 1 {
        let z = levels[w];
        let slab = levels[w + 1] - z;
        if slab <= 0.0 {
            continue;
        }
        let active: Vec<[f64; 3]> = pts.iter().copied().filter(|p| p[2] <= z).collect();
        if !active.is_empty() {
            volume += area2d(&active) * slab;
        }
    }
    volume
}

/// Worst-coverage distance from a reference front to an approximation front:
/// `max over r of min over a of max_j |r_j − a_j| / range_j`, with ranges
/// taken from the reference front (degenerate ranges fall back to 1).
pub fn coverage_linf(reference_front: &[[f64; 3]], approx_front: &[[f64; 3]]) -> f64 {
    if reference_front.is_empty() || approx_front.is_empty() {
        return f64::INFINITY;
    }
    let mut ranges = [1.0f64; 3];
    for j in 0..3 {
        let lo = reference_front
            .iter()
            .map(|p| p[j])
            .fold(f64::INFINITY, f64::min);
        let hi = reference_front
            .iter()
            .map(|p| p[j])
            .fold(f64::NEG_INFINITY, f64::max);
        ranges[j] = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    }
    let mut worst = 0.0f64;
    for r in reference_front {
        let mut best = f64::INFINITY;
        for a in approx_front {
            let mut linf = 0.0f64;
            for j in 0..3 {
                linf = linf.max((r[j] - a[j]).abs() / ranges[j]);
            }
            best = best.min(linf);
        }
        worst = worst.max(best);
    }
    worst
}
