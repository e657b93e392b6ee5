//! First- and second-order inclusion probabilities.
//!
//! Tables are indexed by population rank `1..=N` (the ranking order of the
//! design), stored 0-based internally. The second-order matrix keeps
//! π_ii = π_i on its diagonal.
//!
//! Methods:
//! - closed forms for SRS, level-0 and level-2;
//! - an exact recursion for level-1 over the set of already measured units;
//! - exhaustive enumeration of every draw outcome (any design, tiny N);
//! - Monte Carlo, parallel and bit-reproducible for a fixed seed.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, DefaultHasher};

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::combinatorics::{binomial_exact, binomial_ref, ln_binomial_signed, order_statistic_prob, ratio_to_f64, EXACT_LIMIT};
use crate::designs::{draw_indices, feasibility_check, Design, DesignSpec};
use crate::error::{Result, RssError};
use crate::rng::replication_stream;

/// Largest state space (or outcome count) the exact methods will walk.
pub const DEFAULT_STATE_BUDGET: u128 = 10_000_000;

/// Level-1 recursion tracks measured units in a 128-bit mask.
pub const LEVEL1_EXACT_MAX_N: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum InclusionMethod {
    ClosedForm,
    ExactEnumeration,
    /// Empirical frequencies; `standard_errors` is row-major N×N with the
    /// first-order errors on the diagonal.
    MonteCarlo { reps: u64, standard_errors: Vec<f64> },
}

impl InclusionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InclusionMethod::ClosedForm => "closed_form",
            InclusionMethod::ExactEnumeration => "exact_enumeration",
            InclusionMethod::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Requested computation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Closed form where one exists, otherwise exact recursion within the
    /// default budget, otherwise Monte Carlo with `reps` and `seed`.
    Auto { reps: u64, seed: u64 },
    Closed,
    Exact { budget: u128 },
    MonteCarlo { reps: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level1Mode {
    Exact { budget: u128 },
    MonteCarlo { reps: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionTable {
    pub n_pop: usize,
    pub spec: DesignSpec,
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
    pub method: InclusionMethod,
}

impl InclusionTable {
    /// π for population rank `i` (1-based).
    pub fn pi(&self, i: usize) -> f64 {
        self.first_order[i - 1]
    }

    /// π_ii' for population ranks `i`, `j` (1-based).
    pub fn pi2(&self, i: usize, j: usize) -> f64 {
        self.second_order[(i - 1) * self.n_pop + (j - 1)]
    }

    pub fn first_order_sum(&self) -> f64 {
        self.first_order.iter().sum()
    }

    pub fn standard_errors(&self) -> Option<&[f64]> {
        match &self.method {
            InclusionMethod::MonteCarlo { standard_errors, .. } => Some(standard_errors),
            _ => None,
        }
    }

    /// Structural checks: shape, probability range, symmetry, diagonal,
    /// domination π_ii' ≤ min(π_i, π_i'), and the first-order sum (n for
    /// fixed-size designs, at most n for level-0). Monte Carlo tables skip
    /// the sum check.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n_pop = self.n_pop;
        if self.first_order.len() != n_pop || self.second_order.len() != n_pop * n_pop {
            return Err(RssError::invalid("inclusion table dimensions do not match N"));
        }
        for i in 0..n_pop {
            let p = self.first_order[i];
            if !(-tol..=1.0 + tol).contains(&p) {
                return Err(RssError::invalid(format!("π_{} = {p} outside [0, 1]", i + 1)));
            }
            if (self.second_order[i * n_pop + i] - p).abs() > tol {
                return Err(RssError::invalid(format!("diagonal π_{0}{0} differs from π_{0}", i + 1)));
            }
            for j in (i + 1)..n_pop {
                let a = self.second_order[i * n_pop + j];
                let b = self.second_order[j * n_pop + i];
                if (a - b).abs() > tol {
                    return Err(RssError::invalid(format!("π_({},{}) not symmetric", i + 1, j + 1)));
                }
                if a < -tol || a > p.min(self.first_order[j]) + tol {
                    return Err(RssError::invalid(format!(
                        "π_({},{}) = {a} violates 0 ≤ π_ii' ≤ min(π_i, π_i')",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if !matches!(self.method, InclusionMethod::MonteCarlo { .. }) {
            let n = self.spec.sample_size() as f64;
            let total = self.first_order_sum();
            let ok = if self.spec.design.has_fixed_distinct_size() {
                (total - n).abs() <= tol * n.max(1.0)
            } else {
                total <= n + tol * n.max(1.0)
            };
            if !ok {
                return Err(RssError::invalid(format!("Σπ = {total} inconsistent with n = {n}")));
            }
        }
        Ok(())
    }

    fn from_first_and_pairs(spec: &DesignSpec, n_pop: usize, first: Vec<f64>, pair: impl Fn(usize, usize) -> f64, method: InclusionMethod) -> Self {
        let mut second = vec![0.0; n_pop * n_pop];
        for i in 0..n_pop {
            second[i * n_pop + i] = first[i];
            for j in (i + 1)..n_pop {
                let v = pair(i, j);
                second[i * n_pop + j] = v;
                second[j * n_pop + i] = v;
            }
        }
        InclusionTable {
            n_pop,
            spec: spec.clone(),
            first_order: first,
            second_order: second,
            method,
        }
    }
}

fn require_feasible(spec: &DesignSpec, n_pop: usize, expected: &[Design]) -> Result<()> {
    if !expected.contains(&spec.design) {
        return Err(RssError::invalid(format!("{} table requested for a {} design", expected[0], spec.design)));
    }
    spec.ensure_feasible(n_pop)
}

/// SRS without replacement of `n` from `n_pop`.
pub fn srs_inclusion(n_pop: usize, n: usize) -> Result<InclusionTable> {
    srs_table(&DesignSpec::srs(n)?, n_pop)
}

/// SRS table at the spec's sample size (keeps k, m for matched comparisons).
pub fn srs_table(spec: &DesignSpec, n_pop: usize) -> Result<InclusionTable> {
    require_feasible(spec, n_pop, &[Design::Srs])?;
    let n = spec.sample_size() as f64;
    let big_n = n_pop as f64;
    let pi = n / big_n;
    let pi2 = if n_pop > 1 { n * (n - 1.0) / (big_n * (big_n - 1.0)) } else { 0.0 };
    Ok(InclusionTable::from_first_and_pairs(spec, n_pop, vec![pi; n_pop], |_, _| pi2, InclusionMethod::ClosedForm))
}

/// I(i; r_h, k, N) for every set h, as rows indexed by unit.
fn per_set_probs(spec: &DesignSpec, n_pop: usize) -> Result<Vec<Vec<f64>>> {
    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    for &r in &spec.rank_pattern {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(r) {
            e.insert((1..=n_pop).map(|i| order_statistic_prob(i, r, spec.k, n_pop)).collect::<Result<_>>()?);
        }
    }
    Ok((0..n_pop)
        .map(|i| spec.rank_pattern.iter().map(|r| cache[r][i]).collect())
        .collect())
}

/// Level-0: sets are independent draws from the full population.
pub fn level0_inclusion(spec: &DesignSpec, n_pop: usize) -> Result<InclusionTable> {
    require_feasible(spec, n_pop, &[Design::Level0])?;
    let probs = per_set_probs(spec, n_pop)?;
    let miss: Vec<f64> = probs.iter().map(|row| row.iter().map(|p| 1.0 - p).product()).collect();
    let first: Vec<f64> = miss.iter().map(|m| 1.0 - m).collect();
    let pair = |i: usize, j: usize| {
        let neither: f64 = probs[i].iter().zip(&probs[j]).map(|(a, b)| 1.0 - a - b).product();
        (1.0 - miss[i] - miss[j] + neither).max(0.0)
    };
    Ok(InclusionTable::from_first_and_pairs(spec, n_pop, first, pair, InclusionMethod::ClosedForm))
}

/// Number of ordered set pairs (h, h'), h ≠ h', measuring ranks (r, s).
fn ordered_rank_pair_counts(spec: &DesignSpec) -> Vec<((usize, usize), u64)> {
    let k = spec.k;
    let mut per_rank = vec![0u64; k + 1];
    for &r in &spec.rank_pattern {
        per_rank[r] += 1;
    }
    let mut out = Vec::new();
    for r in 1..=k {
        for s in 1..=k {
            let c = if r == s { per_rank[r] * per_rank[r].saturating_sub(1) } else { per_rank[r] * per_rank[s] };
            if c > 0 {
                out.push(((r, s), c));
            }
        }
    }
    out
}

/// Numerator count of disjoint ordered set pairs (A, B) with unit `a` at
/// rank `r` in A and unit `b > a` at rank `s` in B, over λ = number of A's
/// members strictly between a and b.
fn level2_pair_count_exact(a: i64, b: i64, r: i64, s: i64, k: i64, n: i64) -> BigUint {
    let mut total = BigUint::zero();
    let lambda_max = (b - a - 1).min(k - r);
    for lambda in 0..=lambda_max.max(-1) {
        let factors = [
            (a - 1, r - 1),
            (b - a - 1, lambda),
            (n - b, k - r - lambda),
            (b - 1 - r - lambda, s - 1),
            (n - b - k + r + lambda, k - s),
        ];
        let mut term = BigUint::from(1u32);
        let mut zero = false;
        for (x, y) in factors {
            match binomial_ref(x, y) {
                Some(c) => term *= c,
                None => {
                    zero = true;
                    break;
                }
            }
        }
        if !zero {
            total += term;
        }
    }
    total
}

fn level2_pair_prob_ln(a: i64, b: i64, r: i64, s: i64, k: i64, n: i64) -> f64 {
    let denom = ln_binomial_signed(n, k) + ln_binomial_signed(n - k, k);
    let lambda_max = (b - a - 1).min(k - r);
    (0..=lambda_max.max(-1))
        .map(|lambda| {
            let ln = ln_binomial_signed(a - 1, r - 1)
                + ln_binomial_signed(b - a - 1, lambda)
                + ln_binomial_signed(n - b, k - r - lambda)
                + ln_binomial_signed(b - 1 - r - lambda, s - 1)
                + ln_binomial_signed(n - b - k + r + lambda, k - s);
            (ln - denom).exp()
        })
        .sum()
}

/// Level-2: sets are disjoint, so the pair probability sums, over ordered
/// set pairs, the chance that the two units land at the measured ranks of
/// two disjoint random k-sets.
pub fn level2_inclusion(spec: &DesignSpec, n_pop: usize) -> Result<InclusionTable> {
    require_feasible(spec, n_pop, &[Design::Level2])?;
    let k = spec.k;
    let probs = per_set_probs(spec, n_pop)?;
    let first: Vec<f64> = probs.iter().map(|row| row.iter().sum()).collect();
    let counts = ordered_rank_pair_counts(spec);
    let (nn, kk) = (n_pop as i64, k as i64);

    let pairs: Vec<(usize, usize)> = (0..n_pop).flat_map(|i| ((i + 1)..n_pop).map(move |j| (i, j))).collect();
    let values: Vec<f64> = if n_pop <= EXACT_LIMIT {
        let denom = binomial_exact(nn, kk) * binomial_exact(nn - kk, kk);
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut num = BigUint::zero();
                for &((r, s), c) in &counts {
                    num += level2_pair_count_exact(i as i64 + 1, j as i64 + 1, r as i64, s as i64, kk, nn) * c;
                }
                ratio_to_f64(&num, &denom)
            })
            .collect()
    } else {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                counts
                    .iter()
                    .map(|&((r, s), c)| c as f64 * level2_pair_prob_ln(i as i64 + 1, j as i64 + 1, r as i64, s as i64, kk, nn))
                    .sum()
            })
            .collect()
    };
    let lookup: HashMap<(usize, usize), f64> = pairs.into_iter().zip(values).collect();
    Ok(InclusionTable::from_first_and_pairs(spec, n_pop, first, |i, j| lookup[&(i, j)], InclusionMethod::ClosedForm))
}

/// Level-1 table by exact recursion or Monte Carlo.
pub fn level1_inclusion(spec: &DesignSpec, n_pop: usize, mode: Level1Mode) -> Result<InclusionTable> {
    require_feasible(spec, n_pop, &[Design::Level1])?;
    match mode {
        Level1Mode::Exact { budget } => level1_exact(spec, n_pop, budget),
        Level1Mode::MonteCarlo { reps, seed } => mc_inclusion(n_pop, spec, reps, seed),
    }
}

type FixedState = BuildHasherDefault<DefaultHasher>;

/// Work estimate for the level-1 recursion: transitions out of every layer,
/// with the last step folded into the inclusion accumulation.
fn level1_state_bound(n_pop: usize, n: usize) -> u128 {
    let mut total: u128 = 0;
    for h in 0..n {
        let layer = if n_pop <= EXACT_LIMIT {
            binomial_exact(n_pop as i64, h as i64).to_string().parse::<u128>().unwrap_or(u128::MAX)
        } else {
            ln_binomial_signed(n_pop as i64, h as i64).exp() as u128
        };
        let per_state = ((n_pop - h) * if h + 1 == n { h + 1 } else { 1 }) as u128;
        total = total.saturating_add(layer.saturating_mul(per_state));
    }
    total
}

/// The state after h sets is the set of measured units (level-1 removes
/// exactly those). From state S the next set is a random k-subset of the
/// complement; the unit at pool rank j is measured with probability
/// I(j; r_h, k, N − h). The last step is accumulated directly.
fn level1_exact(spec: &DesignSpec, n_pop: usize, budget: u128) -> Result<InclusionTable> {
    let n = spec.sample_size();
    if n_pop > LEVEL1_EXACT_MAX_N {
        return Err(RssError::BudgetExceeded {
            required: level1_state_bound(n_pop, n),
            budget,
        });
    }
    let required = level1_state_bound(n_pop, n);
    if required > budget {
        return Err(RssError::BudgetExceeded { required, budget });
    }
    let k = spec.k;
    let step_weights = |h: usize, r: usize| -> Result<Vec<f64>> {
        let pool_size = n_pop - h;
        (1..=pool_size).map(|j| order_statistic_prob(j, r, k, pool_size)).collect()
    };
    let mut layer: Vec<(u128, f64)> = vec![(0u128, 1.0)];
    for (h, &r) in spec.rank_pattern[..n - 1].iter().enumerate() {
        let weights = step_weights(h, r)?;
        let mut next: HashMap<u128, f64, FixedState> = HashMap::default();
        for &(mask, p) in &layer {
            let mut j = 0usize;
            for u in 0..n_pop {
                if mask & (1u128 << u) != 0 {
                    continue;
                }
                let w = weights[j];
                j += 1;
                if w > 0.0 {
                    *next.entry(mask | (1u128 << u)).or_insert(0.0) += p * w;
                }
            }
        }
        layer = next.into_iter().collect();
        layer.sort_unstable_by_key(|&(mask, _)| mask);
    }

    let weights = step_weights(n - 1, spec.rank_pattern[n - 1])?;
    let mut first = vec![0.0; n_pop];
    let mut second = vec![0.0; n_pop * n_pop];
    let mut members = Vec::with_capacity(n);
    for &(mask, p) in &layer {
        members.clear();
        members.extend((0..n_pop).filter(|&u| mask & (1u128 << u) != 0));
        for (a, &i) in members.iter().enumerate() {
            first[i] += p;
            for &j in &members[a + 1..] {
                second[i * n_pop + j] += p;
            }
        }
        let mut j = 0usize;
        for u in 0..n_pop {
            if mask & (1u128 << u) != 0 {
                continue;
            }
            let pw = p * weights[j];
            j += 1;
            if pw > 0.0 {
                first[u] += pw;
                for &i in &members {
                    let (lo, hi) = if i < u { (i, u) } else { (u, i) };
                    second[lo * n_pop + hi] += pw;
                }
            }
        }
    }
    Ok(InclusionTable::from_first_and_pairs(
        spec,
        n_pop,
        first,
        |i, j| second[i * n_pop + j],
        InclusionMethod::ExactEnumeration,
    ))
}

/// One complete draw outcome: sets as sorted unit indices (0-based) and the
/// measured unit of each.
#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub sets: Vec<Vec<usize>>,
    pub measured: Vec<usize>,
}

/// Number of equally detailed outcomes the enumeration would visit.
pub(crate) fn outcome_count(spec: &DesignSpec, n_pop: usize) -> u128 {
    let k = if spec.design == Design::Srs { 1 } else { spec.k };
    let mut pool = n_pop;
    let mut total: u128 = 1;
    for _ in &spec.rank_pattern {
        let c = if pool <= EXACT_LIMIT {
            binomial_exact(pool as i64, k as i64).to_string().parse::<u128>().unwrap_or(u128::MAX)
        } else {
            u128::MAX
        };
        total = total.saturating_mul(c);
        pool -= match spec.design {
            Design::Level0 => 0,
            Design::Level1 | Design::Srs => 1,
            Design::Level2 => k,
        };
    }
    total
}

/// Visits every outcome of the draw procedure under perfect ranking with its
/// probability.
pub(crate) fn for_each_outcome<F>(spec: &DesignSpec, n_pop: usize, budget: u128, mut visit: F) -> Result<()>
where
    F: FnMut(f64, &Outcome),
{
    spec.ensure_feasible(n_pop)?;
    let required = outcome_count(spec, n_pop);
    if required > budget {
        return Err(RssError::BudgetExceeded { required, budget });
    }
    let mut outcome = Outcome {
        sets: Vec::with_capacity(spec.sample_size()),
        measured: Vec::with_capacity(spec.sample_size()),
    };
    let pool: Vec<usize> = (0..n_pop).collect();
    recurse(spec, &pool, 1.0, &mut outcome, &mut visit);
    Ok(())
}

fn recurse<F: FnMut(f64, &Outcome)>(spec: &DesignSpec, pool: &[usize], prob: f64, outcome: &mut Outcome, visit: &mut F) {
    let h = outcome.sets.len();
    if h == spec.sample_size() {
        visit(prob, outcome);
        return;
    }
    let k = if spec.design == Design::Srs { 1 } else { spec.k };
    let r = if spec.design == Design::Srs { 1 } else { spec.rank_pattern[h] };
    let p_set = prob / binomial_exact(pool.len() as i64, k as i64).to_string().parse::<f64>().unwrap_or(f64::INFINITY);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        // pool is sorted, so increasing index combinations are ranked sets
        let set: Vec<usize> = idx.iter().map(|&p| pool[p]).collect();
        let chosen = set[r - 1];
        let next_pool: Vec<usize> = match spec.design {
            Design::Level0 => pool.to_vec(),
            Design::Level1 | Design::Srs => pool.iter().copied().filter(|&u| u != chosen).collect(),
            Design::Level2 => pool.iter().copied().filter(|u| !set.contains(u)).collect(),
        };
        outcome.sets.push(set);
        outcome.measured.push(chosen);
        recurse(spec, &next_pool, p_set, outcome, visit);
        outcome.sets.pop();
        outcome.measured.pop();

        // advance to the next k-combination of 0..pool.len()
        let len = pool.len();
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] < len - k + pos {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Inclusion table by exhaustive enumeration of all draw outcomes. Units
/// measured in several sets (level-0) count once.
pub fn enumeration_inclusion(spec: &DesignSpec, n_pop: usize, budget: u128) -> Result<InclusionTable> {
    let mut first = vec![0.0; n_pop];
    let mut second = vec![0.0; n_pop * n_pop];
    for_each_outcome(spec, n_pop, budget, |p, outcome| {
        let mut units = outcome.measured.clone();
        units.sort_unstable();
        units.dedup();
        for (a, &i) in units.iter().enumerate() {
            first[i] += p;
            for &j in &units[a + 1..] {
                second[i * n_pop + j] += p;
            }
        }
    })?;
    Ok(InclusionTable::from_first_and_pairs(
        spec,
        n_pop,
        first,
        |i, j| second[i * n_pop + j],
        InclusionMethod::ExactEnumeration,
    ))
}

struct Counts {
    first: Vec<u64>,
    pairs: Vec<u64>,
}

impl Counts {
    fn new(n_pop: usize) -> Self {
        Counts {
            first: vec![0; n_pop],
            pairs: vec![0; n_pop * n_pop],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.first.iter_mut().zip(other.first) {
            *a += b;
        }
        for (a, b) in self.pairs.iter_mut().zip(other.pairs) {
            *a += b;
        }
        self
    }
}

/// Monte Carlo table under perfect ranking. Replication `t` uses its own
/// stream derived from `(seed, t)` and counts are summed as integers, so
/// the result does not depend on the number of worker threads.
pub fn mc_inclusion(n_pop: usize, spec: &DesignSpec, reps: u64, seed: u64) -> Result<InclusionTable> {
    spec.ensure_feasible(n_pop)?;
    if reps == 0 {
        return Err(RssError::invalid("Monte Carlo needs at least one replication"));
    }
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || Counts::new(n_pop),
            |mut acc, t| {
                let mut rng = replication_stream(seed, t);
                let mut units = draw_indices(n_pop, spec, |u| u, &mut rng).measured;
                units.sort_unstable();
                units.dedup();
                for (a, &i) in units.iter().enumerate() {
                    acc.first[i] += 1;
                    for &j in &units[a + 1..] {
                        acc.pairs[i * n_pop + j] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Counts::new(n_pop), Counts::merge);

    let r = reps as f64;
    let first: Vec<f64> = counts.first.iter().map(|&c| c as f64 / r).collect();
    let se = |p: f64| (p * (1.0 - p) / r).sqrt();
    let mut table = InclusionTable::from_first_and_pairs(
        spec,
        n_pop,
        first,
        |i, j| counts.pairs[i * n_pop + j] as f64 / r,
        InclusionMethod::ClosedForm,
    );
    let standard_errors = table.second_order.iter().map(|&p| se(p)).collect();
    table.method = InclusionMethod::MonteCarlo { reps, standard_errors };
    Ok(table)
}

/// Table for any design through the requested route.
pub fn compute_inclusion(spec: &DesignSpec, n_pop: usize, choice: MethodChoice) -> Result<InclusionTable> {
    spec.ensure_feasible(n_pop)?;
    match choice {
        MethodChoice::Closed => match spec.design {
            Design::Srs => srs_table(spec, n_pop),
            Design::Level0 => level0_inclusion(spec, n_pop),
            Design::Level2 => level2_inclusion(spec, n_pop),
            Design::Level1 => Err(RssError::invalid(
                "level-1 has no closed form; use the exact recursion or Monte Carlo",
            )),
        },
        MethodChoice::Exact { budget } => match spec.design {
            Design::Level1 => level1_exact(spec, n_pop, budget),
            _ => enumeration_inclusion(spec, n_pop, budget),
        },
        MethodChoice::MonteCarlo { reps, seed } => mc_inclusion(n_pop, spec, reps, seed),
        MethodChoice::Auto { reps, seed } => match spec.design {
            Design::Level1 => match level1_exact(spec, n_pop, DEFAULT_STATE_BUDGET) {
                Err(RssError::BudgetExceeded { .. }) => mc_inclusion(n_pop, spec, reps, seed),
                other => other,
            },
            _ => compute_inclusion(spec, n_pop, MethodChoice::Closed),
        },
    }
}

/// Whether an exact (non-MC) table is available for the spec.
pub fn exact_available(spec: &DesignSpec, n_pop: usize) -> bool {
    feasibility_check(spec, n_pop)
        && match spec.design {
            Design::Level1 => n_pop <= LEVEL1_EXACT_MAX_N && level1_state_bound(n_pop, spec.sample_size()) <= DEFAULT_STATE_BUDGET,
            _ => true,
        }
}
