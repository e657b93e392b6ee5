//! Design-based estimation of the finite-population distribution function.
//!
//! The Hájek-type estimator weights each measured unit by 1/π and
//! normalizes by the total weight:
//!
//! ```text
//! F̂(x) = Σ_{i∈D} 1{X_i ≤ x}/π_i  /  Σ_{i∈D} 1/π_i
//! ```
//!
//! Its design variance is the usual Horvitz-Thompson double sum over the
//! population; the sample-based estimator is the Sen-Yates-Grundy form.

use serde::Serialize;

use crate::designs::{Design, DesignSpec, RankedSetSample};
use crate::distributions::{order_statistic_cdf, z_two_sided};
use crate::error::{Result, RssError};
use crate::inclusion::{compute_inclusion, for_each_outcome, outcome_count, InclusionTable, MethodChoice};
use crate::population::Population;
use crate::rng::replication_stream;

/// How units measured more than once (level-0) enter the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Multiplicity {
    /// Each distinct population unit counts once.
    #[default]
    Distinct,
    /// Every measurement counts, duplicates included.
    Multiset,
}

/// How [`EdfEstimate::quantile`] inverts the step function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Inversion {
    /// Smallest support point with F̂ ≥ p.
    #[default]
    Step,
    /// Linear interpolation between ordered measurements at weighted
    /// plotting positions; with equal weights this is the familiar
    /// (j − 1)/(n − 1) rule.
    Interpolated,
}

/// Normalized weighted step function.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfEstimate {
    support: Vec<f64>,
    cum_weights: Vec<f64>,
    /// Individual (value, normalized weight) pairs sorted by value.
    units: Vec<(f64, f64)>,
}

impl EdfEstimate {
    /// Builds the estimate from (value, raw weight) pairs.
    pub fn from_weighted(mut units: Vec<(f64, f64)>) -> Result<Self> {
        if units.is_empty() {
            return Err(RssError::EmptySample);
        }
        if units.iter().any(|&(v, w)| !v.is_finite() || !(w > 0.0) || !w.is_finite()) {
            return Err(RssError::invalid("EDF weights must be positive and values finite"));
        }
        units.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = units.iter().map(|u| u.1).sum();
        for u in &mut units {
            u.1 /= total;
        }
        let mut support: Vec<f64> = Vec::new();
        let mut cum_weights: Vec<f64> = Vec::new();
        let mut running = 0.0;
        for &(v, w) in &units {
            running += w;
            if support.last() == Some(&v) {
                *cum_weights.last_mut().unwrap() = running;
            } else {
                support.push(v);
                cum_weights.push(running);
            }
        }
        // Pin the top plateau to exactly one.
        *cum_weights.last_mut().unwrap() = 1.0;
        Ok(EdfEstimate {
            support,
            cum_weights,
            units,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cum_weights(&self) -> &[f64] {
        &self.cum_weights
    }

    /// Normalized weight of each measurement, sorted by value.
    pub fn unit_weights(&self) -> &[(f64, f64)] {
        &self.units
    }

    /// F̂(x), right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        match self.support.partition_point(|&s| s <= x) {
            0 => 0.0,
            j => self.cum_weights[j - 1],
        }
    }

    pub fn quantile(&self, p: f64, how: Inversion) -> f64 {
        match how {
            Inversion::Step => self.quantile_step(p),
            Inversion::Interpolated => self.quantile_interpolated(p),
        }
    }

    fn quantile_step(&self, p: f64) -> f64 {
        // guard against cumulative sums that miss p by rounding
        let target = p - 1e-12;
        let j = self.cum_weights.partition_point(|&c| c < target);
        self.support[j.min(self.support.len() - 1)]
    }

    fn quantile_interpolated(&self, p: f64) -> f64 {
        let n = self.units.len();
        if n == 1 {
            return self.units[0].0;
        }
        let last = self.units[n - 1].1;
        let mut cum = 0.0;
        let positions: Vec<f64> = self
            .units
            .iter()
            .map(|&(_, w)| {
                let pos = cum / (1.0 - last);
                cum += w;
                pos
            })
            .collect();
        let p = p.clamp(0.0, 1.0);
        let j = positions.partition_point(|&q| q <= p).clamp(1, n - 1);
        let (lo, hi) = (positions[j - 1], positions[j]);
        let (a, b) = (self.units[j - 1].0, self.units[j].0);
        if hi <= lo {
            return b;
        }
        let t = ((p - lo) / (hi - lo)).clamp(0.0, 1.0);
        (a + t * (b - a)).clamp(a, b)
    }
}

/// Measured units of a sample with their inclusion probabilities.
fn weighted_units(sample: &RankedSetSample, table: &InclusionTable, multiplicity: Multiplicity) -> Result<Vec<Unit>> {
    if sample.entries.is_empty() {
        return Err(RssError::EmptySample);
    }
    let mut units: Vec<Unit> = Vec::with_capacity(sample.entries.len());
    for e in &sample.entries {
        if e.population_rank == 0 || e.population_rank > table.n_pop {
            return Err(RssError::ZeroInclusion { rank: e.population_rank });
        }
        if multiplicity == Multiplicity::Distinct && units.iter().any(|u| u.rank == e.population_rank) {
            continue;
        }
        let pi = table.pi(e.population_rank);
        if !(pi > 0.0) {
            return Err(RssError::ZeroInclusion { rank: e.population_rank });
        }
        units.push(Unit {
            rank: e.population_rank,
            value: e.value,
            pi,
        });
    }
    Ok(units)
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    rank: usize,
    value: f64,
    pi: f64,
}

/// Hájek EDF over distinct measured units.
pub fn hajek_edf(sample: &RankedSetSample, table: &InclusionTable) -> Result<EdfEstimate> {
    hajek_edf_with(sample, table, Multiplicity::Distinct)
}

pub fn hajek_edf_with(sample: &RankedSetSample, table: &InclusionTable, multiplicity: Multiplicity) -> Result<EdfEstimate> {
    let units = weighted_units(sample, table, multiplicity)?;
    EdfEstimate::from_weighted(units.iter().map(|u| (u.value, 1.0 / u.pi)).collect())
}

/// F̂ at several points for (value, π) pairs; the allocation-light path
/// used inside simulations.
pub(crate) fn hajek_at(units: &[(f64, f64)], points: &[f64], out: &mut [f64]) {
    let total: f64 = units.iter().map(|u| 1.0 / u.1).sum();
    for (o, &x) in out.iter_mut().zip(points) {
        *o = units.iter().filter(|u| u.0 <= x).map(|u| 1.0 / u.1).sum::<f64>() / total;
    }
}

/// Design variance of the Hájek EDF at `x`:
/// N⁻² Σ_i Σ_i' (π_ii' − π_i π_i') a_i a_i' with a_i = (1{X_i ≤ x} − F(x))/π_i,
/// units indexed by population rank. Units with π_i = 0 are skipped.
pub fn true_variance(pop: &Population, table: &InclusionTable, x: f64) -> Result<f64> {
    if table.n_pop != pop.len() {
        return Err(RssError::invalid(format!(
            "table covers {} units, population has {}",
            table.n_pop,
            pop.len()
        )));
    }
    let psi = pop.indicators_by_rank(x);
    let f = pop.true_edf(x);
    Ok(true_variance_from_indicators(&psi, f, table))
}

pub(crate) fn true_variance_from_indicators(psi: &[f64], f: f64, table: &InclusionTable) -> f64 {
    let n_pop = table.n_pop;
    let a: Vec<f64> = (0..n_pop)
        .map(|i| {
            let p = table.first_order[i];
            if p > 0.0 {
                (psi[i] - f) / p
            } else {
                0.0
            }
        })
        .collect();
    let mut total = 0.0;
    for i in 0..n_pop {
        if a[i] == 0.0 {
            continue;
        }
        let row = &table.second_order[i * n_pop..(i + 1) * n_pop];
        let pi_i = table.first_order[i];
        let mut acc = 0.0;
        for j in 0..n_pop {
            acc += (row[j] - pi_i * table.first_order[j]) * a[j];
        }
        total += a[i] * acc;
    }
    total / (n_pop as f64 * n_pop as f64)
}

/// Sen-Yates-Grundy estimate of the Hájek EDF variance at `x`:
/// −½ (Σ_D 1/π_i)⁻² Σ_{i≠i'} (π_ii' − π_i π_i')/π_ii' (a_i − a_i')²
/// with a_i = (1{X_i ≤ x} − F̂(x))/π_i over distinct sampled units.
/// Negative values are returned as computed.
pub fn syg_variance_estimate(sample: &RankedSetSample, table: &InclusionTable, x: f64) -> Result<f64> {
    let units = weighted_units(sample, table, Multiplicity::Distinct)?;
    let total_w: f64 = units.iter().map(|u| 1.0 / u.pi).sum();
    let f_hat = units.iter().filter(|u| u.value <= x).map(|u| 1.0 / u.pi).sum::<f64>() / total_w;
    let a: Vec<f64> = units
        .iter()
        .map(|u| ((u.value <= x) as u8 as f64 - f_hat) / u.pi)
        .collect();
    let mut sum = 0.0;
    for (p, ui) in units.iter().enumerate() {
        for (q, uj) in units.iter().enumerate() {
            if p == q {
                continue;
            }
            let pij = table.pi2(ui.rank, uj.rank);
            if !(pij > 0.0) {
                return Err(RssError::ZeroPairInclusion {
                    a: ui.rank.min(uj.rank),
                    b: ui.rank.max(uj.rank),
                });
            }
            sum += (pij - ui.pi * uj.pi) / pij * (a[p] - a[q]).powi(2);
        }
    }
    Ok(-0.5 * sum / (total_w * total_w))
}

/// f̂ ± z_{α/2} √v̂, truncated to [0, 1].
pub fn pointwise_ci(fhat: f64, vhat: f64, alpha: f64) -> Result<(f64, f64)> {
    if vhat < 0.0 {
        return Err(RssError::NegativeVariance(vhat));
    }
    check_alpha(alpha)?;
    let half = z_two_sided(alpha) * vhat.sqrt();
    Ok(((fhat - half).max(0.0), (fhat + half).min(1.0)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RssError::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianCi {
    pub median: f64,
    pub f_hat_at_median: f64,
    pub v_hat: f64,
    pub c1: f64,
    pub c2: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Interval for the population median: with M̂ = F̂⁻¹(0.5) and
/// c = 0.5 ∓ z_{α/2} √V̂[F̂(M̂)], returns (F̂⁻¹(c₁), F̂⁻¹(c₂)).
pub fn median_ci(
    sample: &RankedSetSample,
    table: &InclusionTable,
    alpha: f64,
    inversion: Inversion,
) -> Result<MedianCi> {
    check_alpha(alpha)?;
    let edf = hajek_edf(sample, table)?;
    let median = edf.quantile(0.5, Inversion::Step);
    let v_hat = syg_variance_estimate(sample, table, median)?;
    median_ci_from(&edf, median, v_hat, alpha, inversion)
}

/// The interval arithmetic of [`median_ci`] given M̂ and V̂.
pub fn median_ci_from(edf: &EdfEstimate, median: f64, v_hat: f64, alpha: f64, inversion: Inversion) -> Result<MedianCi> {
    if v_hat < 0.0 {
        return Err(RssError::NegativeVariance(v_hat));
    }
    let half = z_two_sided(alpha) * v_hat.sqrt();
    let (c1, c2) = (0.5 - half, 0.5 + half);
    if c1 <= 0.0 {
        return Err(RssError::IntervalOutOfRange { bound: "c1", value: c1 });
    }
    if c2 >= 1.0 {
        return Err(RssError::IntervalOutOfRange { bound: "c2", value: c2 });
    }
    let (lower, upper) = if half == 0.0 {
        (median, median)
    } else {
        (edf.quantile(c1, inversion), edf.quantile(c2, inversion))
    };
    Ok(MedianCi {
        median,
        f_hat_at_median: edf.eval(median),
        v_hat,
        c1,
        c2,
        lower,
        upper,
    })
}

/// Unweighted mean of indicators over all measurements.
pub fn stokes_sager_edf(sample: &RankedSetSample) -> Result<EdfEstimate> {
    EdfEstimate::from_weighted(sample.entries.iter().map(|e| (e.value, 1.0)).collect())
}

/// Infinite-population variance of the unweighted RSS EDF for a balanced
/// design: (1/(m k²)) Σ_r F_(r)(1 − F_(r)), where F_(r) is the CDF of the
/// r-th order statistic of k draws evaluated at parent CDF value `f`.
pub fn stokes_sager_variance(f: f64, k: usize, m: usize) -> f64 {
    let s: f64 = (1..=k)
        .map(|r| {
            let fr = order_statistic_cdf(f, r, k);
            fr * (1.0 - fr)
        })
        .sum();
    s / (m * k * k) as f64
}

/// ((N − n)/(N − 1)) F(1 − F)/n, the SRS without replacement variance.
pub fn srs_variance_closed_form(n_pop: usize, n: usize, f: f64) -> Result<f64> {
    if n == 0 || n > n_pop {
        return Err(RssError::invalid(format!("need 1 ≤ n ≤ N, got n={n}, N={n_pop}")));
    }
    if !(0.0..=1.0).contains(&f) {
        return Err(RssError::invalid(format!("F must lie in [0, 1], got {f}")));
    }
    if n_pop == 1 {
        return Ok(0.0);
    }
    Ok((n_pop - n) as f64 / (n_pop - 1) as f64 * f * (1.0 - f) / n as f64)
}

/// Population ranks for measured values when the unit labels are unknown:
/// the j-th smallest of n values (ties by sample order) is placed at the
/// expected rank of the j-th order statistic of n draws from N,
/// round(j (N + 1)/(n + 1)), kept strictly increasing.
pub fn plugin_population_ranks(values: &[f64], n_pop: usize) -> Result<Vec<usize>> {
    let n = values.len();
    if n == 0 {
        return Err(RssError::EmptySample);
    }
    if n > n_pop {
        return Err(RssError::invalid(format!("{n} values cannot come from {n_pop} distinct units")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; n];
    let mut prev = 0usize;
    for (j, &idx) in order.iter().enumerate() {
        let expected = ((j + 1) as f64 * (n_pop + 1) as f64 / (n + 1) as f64 + 0.5).floor() as usize;
        // leave room for the remaining values above
        let ceiling = n_pop - (n - 1 - j);
        let r = expected.max(prev + 1).min(ceiling);
        ranks[idx] = r;
        prev = r;
    }
    Ok(ranks)
}

/// Point estimate, variances and interval at one x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub x: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    #[serde(rename = "V_true", skip_serializing_if = "Option::is_none")]
    pub v_true: Option<f64>,
    #[serde(rename = "V_hat")]
    pub v_hat: f64,
    /// Absent when the variance estimate is negative.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub alpha: f64,
    pub negative_variance: bool,
}

/// Hájek estimate, SYG variance (and the design variance when the
/// population is known) with the pointwise interval at `x`.
pub fn variance_report(
    sample: &RankedSetSample,
    table: &InclusionTable,
    x: f64,
    alpha: f64,
    pop: Option<&Population>,
) -> Result<VarianceReport> {
    let edf = hajek_edf(sample, table)?;
    let f_hat = edf.eval(x);
    let v_hat = syg_variance_estimate(sample, table, x)?;
    let v_true = pop.map(|p| true_variance(p, table, x)).transpose()?;
    let negative = v_hat < 0.0;
    let (ci_low, ci_high) = if negative {
        (None, None)
    } else {
        let (lo, hi) = pointwise_ci(f_hat, v_hat, alpha)?;
        (Some(lo), Some(hi))
    };
    Ok(VarianceReport {
        x,
        f_hat,
        v_true,
        v_hat,
        ci_low,
        ci_high,
        alpha,
        negative_variance: negative,
    })
}

/// Source of the set-level moments in [`variance_decomposition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    /// Exhaustive enumeration, Monte Carlo when the outcome count exceeds
    /// `budget`.
    Auto { budget: u128, reps: u64, seed: u64 },
    Enumerate { budget: u128 },
    MonteCarlo { reps: u64, seed: u64 },
}

/// Set-level variance decomposition of Σ_h Ψ(M_h), M_h the unit measured
/// in set h, plus the design-variance comparison against SRS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub design: Design,
    pub n_pop: usize,
    pub k: usize,
    pub m: usize,
    pub x: f64,
    pub moments: &'static str,
    /// F_(r): probability that the rank-r measurement is ≤ x.
    pub order_cdfs: Vec<f64>,
    /// σ²_(r), averaged over sets measuring rank r.
    pub set_variances: Vec<f64>,
    /// C(r, s) row-major (k×k), averaged over ordered pairs of distinct sets.
    pub cross_covariances: Vec<f64>,
    /// F_(s)(1 − F_(r)) for r < s: covariance of two ranks in one set.
    pub within_set_covariances: Vec<f64>,
    /// Var(Σ_h Ψ(M_h)) computed directly.
    pub lhs: f64,
    /// m Σ σ²_(r) + m² Σ Σ C(r, s) − m Σ C(r, r).
    pub rhs: f64,
    pub residual: f64,
    pub cross_nonpositive: bool,
    pub within_nonnegative: bool,
    /// Hájek design variance under this design.
    pub design_variance: f64,
    /// SRS variance at the same n.
    pub srs_variance: f64,
    pub dominated: bool,
}

/// Runs the decomposition at `x` under perfect ranking. The identity
/// requires a balanced rank pattern.
pub fn variance_decomposition_check(pop: &Population, spec: &DesignSpec, x: f64, source: MomentSource) -> Result<DecompositionReport> {
    spec.ensure_feasible(pop.len())?;
    if !spec.is_balanced() {
        return Err(RssError::invalid("the decomposition needs a balanced rank pattern"));
    }
    let n_pop = pop.len();
    let n = spec.sample_size();
    let psi: Vec<f64> = pop.x_values().iter().map(|&v| (v <= x) as u8 as f64).collect();

    let mut acc = MomentAcc::new(n);
    let use_enumeration = match source {
        MomentSource::Enumerate { budget } => {
            let required = outcome_count(spec, n_pop);
            if required > budget {
                return Err(RssError::BudgetExceeded { required, budget });
            }
            true
        }
        MomentSource::Auto { budget, .. } => outcome_count(spec, n_pop) <= budget,
        MomentSource::MonteCarlo { .. } => false,
    };
    if use_enumeration {
        for_each_outcome(spec, n_pop, u128::MAX, |p, outcome| acc.add(p, &outcome.measured, &psi))?;
    } else {
        let (reps, seed) = match source {
            MomentSource::Auto { reps, seed, .. } | MomentSource::MonteCarlo { reps, seed } => (reps, seed),
            MomentSource::Enumerate { .. } => unreachable!(),
        };
        if reps == 0 {
            return Err(RssError::invalid("Monte Carlo needs at least one replication"));
        }
        let w = 1.0 / reps as f64;
        for t in 0..reps {
            let mut rng = replication_stream(seed, t);
            let draw = crate::designs::draw_indices(n_pop, spec, |u| u, &mut rng);
            acc.add(w, &draw.measured, &psi);
        }
    }

    let k = if spec.design == Design::Srs { 1 } else { spec.k };
    let ranks: Vec<usize> = if spec.design == Design::Srs { vec![1; n] } else { spec.rank_pattern.clone() };
    let cycles = n / k;
    let mut order_cdfs = vec![0.0; k];
    let mut set_variances = vec![0.0; k];
    let mut cross = vec![0.0; k * k];
    let mut cross_counts = vec![0usize; k * k];
    for h in 0..n {
        let r = ranks[h] - 1;
        order_cdfs[r] += acc.e1[h] / cycles as f64;
        set_variances[r] += (acc.e2[h * n + h] - acc.e1[h] * acc.e1[h]) / cycles as f64;
        for g in 0..n {
            if g != h {
                let s = ranks[g] - 1;
                cross[r * k + s] += acc.e2[h * n + g] - acc.e1[h] * acc.e1[g];
                cross_counts[r * k + s] += 1;
            }
        }
    }
    for (c, &cnt) in cross.iter_mut().zip(&cross_counts) {
        if cnt > 0 {
            *c /= cnt as f64;
        }
    }
    let mf = cycles as f64;
    let rhs = mf * set_variances.iter().sum::<f64>() + mf * mf * cross.iter().sum::<f64>()
        - mf * (0..k).map(|r| cross[r * k + r]).sum::<f64>();
    let lhs = acc.s2 - acc.s1 * acc.s1;

    let mut within = Vec::new();
    for r in 0..k {
        for s in (r + 1)..k {
            within.push(order_cdfs[s] * (1.0 - order_cdfs[r]));
        }
    }
    let tol = 1e-12;
    let cross_nonpositive = (0..k)
        .flat_map(|r| (0..k).filter(move |&s| s != r).map(move |s| (r, s)))
        .all(|(r, s)| cross[r * k + s] <= tol);

    let table = compute_inclusion(spec, n_pop, MethodChoice::Auto { reps: 100_000, seed: 0 })?;
    let design_variance = true_variance(pop, &table, x)?;
    let srs_variance = srs_variance_closed_form(n_pop, n, pop.true_edf(x))?;
    Ok(DecompositionReport {
        design: spec.design,
        n_pop,
        k: spec.k,
        m: spec.m,
        x,
        moments: if use_enumeration { "enumeration" } else { "monte_carlo" },
        order_cdfs,
        set_variances,
        cross_covariances: cross,
        within_set_covariances: within.clone(),
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        cross_nonpositive,
        within_nonnegative: within.iter().all(|&c| c >= 0.0),
        design_variance,
        srs_variance,
        dominated: design_variance <= srs_variance + 1e-12,
    })
}

struct MomentAcc {
    n: usize,
    e1: Vec<f64>,
    e2: Vec<f64>,
    s1: f64,
    s2: f64,
}

impl MomentAcc {
    fn new(n: usize) -> Self {
        MomentAcc {
            n,
            e1: vec![0.0; n],
            e2: vec![0.0; n * n],
            s1: 0.0,
            s2: 0.0,
        }
    }

    fn add(&mut self, p: f64, measured: &[usize], psi: &[f64]) {
        let vals: Vec<f64> = measured.iter().map(|&u| psi[u]).collect();
        let s: f64 = vals.iter().sum();
        self.s1 += p * s;
        self.s2 += p * s * s;
        for h in 0..self.n {
            self.e1[h] += p * vals[h];
            if vals[h] != 0.0 {
                for g in 0..self.n {
                    self.e2[h * self.n + g] += p * vals[h] * vals[g];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{draw_rss, RankingMode, SampleEntry};
    use crate::inclusion::{enumeration_inclusion, level0_inclusion, level2_inclusion, srs_inclusion, DEFAULT_STATE_BUDGET};
    use crate::population::{generate_grid_population, DistributionKind};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn sample_from(spec: DesignSpec, ranked_values: &[(usize, f64)]) -> RankedSetSample {
        let entries = ranked_values
            .iter()
            .enumerate()
            .map(|(h, &(rank, value))| SampleEntry {
                set_index: h + 1,
                in_set_rank: 1,
                population_id: rank,
                population_rank: rank,
                value,
            })
            .collect();
        RankedSetSample::from_entries(spec, RankingMode::Perfect, entries).unwrap()
    }

    fn table_with_pi(pi: Vec<f64>) -> InclusionTable {
        let n = pi.len();
        let mut second = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                second[i * n + j] = if i == j { pi[i] } else { pi[i] * pi[j] * 0.9 };
            }
        }
        InclusionTable {
            n_pop: n,
            spec: DesignSpec::srs(2).unwrap(),
            first_order: pi,
            second_order: second,
            method: crate::inclusion::InclusionMethod::ClosedForm,
        }
    }

    #[test]
    fn two_unit_hand_example() {
        let table = table_with_pi(vec![0.2, 0.5]);
        let s = sample_from(DesignSpec::srs(2).unwrap(), &[(1, 1.0), (2, 2.0)]);
        let edf = hajek_edf(&s, &table).unwrap();
        assert!((edf.eval(1.0) - 5.0 / 7.0).abs() < 1e-15);
        assert_eq!(edf.eval(2.0), 1.0);
        assert_eq!(edf.eval(0.5), 0.0);
    }

    #[test]
    fn zero_inclusion_is_rejected() {
        let table = table_with_pi(vec![0.0, 0.5]);
        let s = sample_from(DesignSpec::srs(2).unwrap(), &[(1, 1.0), (2, 2.0)]);
        assert!(matches!(hajek_edf(&s, &table), Err(RssError::ZeroInclusion { rank: 1 })));
    }

    #[test]
    fn equal_weights_give_ecdf_and_match_stokes_sager() {
        let table = srs_inclusion(10, 4).unwrap();
        let s = sample_from(DesignSpec::srs(4).unwrap(), &[(3, 0.3), (1, 0.1), (7, 0.7), (5, 0.5)]);
        let a = hajek_edf(&s, &table).unwrap();
        let b = stokes_sager_edf(&s).unwrap();
        for x in [0.0, 0.1, 0.2, 0.3, 0.5, 0.69, 0.7, 1.0] {
            assert!((a.eval(x) - b.eval(x)).abs() < 1e-15);
        }
        assert_eq!(a.cum_weights(), &[0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn quantile_inversions() {
        let edf = EdfEstimate::from_weighted(vec![(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]).unwrap();
        assert_eq!(edf.quantile(0.0, Inversion::Step), 1.0);
        assert_eq!(edf.quantile(1.0, Inversion::Step), 5.0);
        assert_eq!(edf.quantile(0.4, Inversion::Step), 2.0);
        assert_eq!(edf.quantile(0.41, Inversion::Step), 3.0);
        // (j − 1)/(n − 1) plotting positions
        assert!((edf.quantile(0.5, Inversion::Interpolated) - 3.0).abs() < 1e-12);
        assert!((edf.quantile(0.125, Inversion::Interpolated) - 1.5).abs() < 1e-12);
        assert_eq!(edf.quantile(1.0, Inversion::Interpolated), 5.0);
        assert_eq!(edf.quantile(0.0, Inversion::Interpolated), 1.0);
    }

    #[test]
    fn single_measurement_is_one_step() {
        let spec = DesignSpec::balanced(Design::Level2, 1, 1).unwrap();
        let s = sample_from(spec, &[(2, 4.5)]);
        let e = stokes_sager_edf(&s).unwrap();
        assert_eq!(e.support(), &[4.5]);
        assert_eq!(e.eval(4.4), 0.0);
        assert_eq!(e.eval(4.5), 1.0);
        let table = srs_inclusion(3, 1).unwrap();
        assert_eq!(syg_variance_estimate(&s, &table, 4.5).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_ci_examples() {
        let (lo, hi) = pointwise_ci(0.5, 0.0072, 0.05).unwrap();
        assert!((lo - 0.3337).abs() < 5e-5 && (hi - 0.6663).abs() < 5e-5, "{lo} {hi}");
        assert_eq!(pointwise_ci(0.3, 0.0, 0.05).unwrap(), (0.3, 0.3));
        assert_eq!(pointwise_ci(0.02, 0.01, 0.05).unwrap().0, 0.0);
        assert!(matches!(pointwise_ci(0.5, -1e-3, 0.05), Err(RssError::NegativeVariance(_))));
    }

    #[test]
    fn median_ci_arithmetic() {
        let edf = EdfEstimate::from_weighted((1..=21).map(|v| (v as f64, 1.0)).collect()).unwrap();
        let ci = median_ci_from(&edf, 11.0, 0.0072, 0.05, Inversion::Step).unwrap();
        assert!((ci.c1 - 0.3337).abs() < 5e-5 && (ci.c2 - 0.6663).abs() < 5e-5);
        let degenerate = median_ci_from(&edf, 11.0, 0.0, 0.05, Inversion::Step).unwrap();
        assert_eq!((degenerate.lower, degenerate.upper), (11.0, 11.0));
        let err = median_ci_from(&edf, 11.0, 0.08, 0.05, Inversion::Step).unwrap_err();
        assert!(matches!(err, RssError::IntervalOutOfRange { bound: "c1", .. }));
    }

    #[test]
    fn srs_closed_form_examples() {
        assert_eq!(srs_variance_closed_form(20, 20, 0.5).unwrap(), 0.0);
        assert_eq!(srs_variance_closed_form(20, 4, 0.0).unwrap(), 0.0);
        assert_eq!(srs_variance_closed_form(20, 4, 1.0).unwrap(), 0.0);
        let v = srs_variance_closed_form(20, 4, 0.5).unwrap();
        assert!((v - 16.0 / 19.0 * 0.25 / 4.0).abs() < 1e-15);
        let pop = generate_grid_population(20, DistributionKind::StandardUniform).unwrap();
        let x = pop.quantile_point(0.5);
        let t = true_variance(&pop, &srs_inclusion(20, 4).unwrap(), x).unwrap();
        assert!((t - v).abs() < 1e-12, "{t} {v}");
        let census = true_variance(&pop, &srs_inclusion(20, 20).unwrap(), x).unwrap();
        assert!(census.abs() < 1e-15);
    }

    #[test]
    fn true_variance_matches_enumerated_variance() {
        let pop = generate_grid_population(4, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::balanced(Design::Level2, 2, 1).unwrap();
        let table = level2_inclusion(&spec, 4).unwrap();
        let x = pop.x_values()[1];
        let (mut m1, mut m2) = (0.0, 0.0);
        for_each_outcome(&spec, 4, DEFAULT_STATE_BUDGET, |p, o| {
            let units: Vec<(f64, f64)> = o.measured.iter().map(|&u| (pop.x_values()[u], table.first_order[u])).collect();
            let mut f = [0.0];
            hajek_at(&units, &[x], &mut f);
            m1 += p * f[0];
            m2 += p * f[0] * f[0];
        })
        .unwrap();
        let truth = true_variance(&pop, &table, x).unwrap();
        assert!((m2 - m1 * m1 - truth).abs() < 1e-12);
    }

    #[test]
    fn plugin_ranks_are_spread_and_distinct() {
        let ranks = plugin_population_ranks(&[3.0, 1.0, 2.0, 2.0], 9).unwrap();
        assert_eq!(ranks, vec![8, 2, 4, 6]);
        let tight = plugin_population_ranks(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(tight, vec![1, 2, 3]);
        assert!(plugin_population_ranks(&[1.0; 4], 3).is_err());
    }

    #[test]
    fn decomposition_identity_level2() {
        let pop = generate_grid_population(6, DistributionKind::StandardNormal).unwrap();
        let spec = DesignSpec::balanced(Design::Level2, 2, 1).unwrap();
        let x = pop.quantile_point(0.5);
        let r = variance_decomposition_check(&pop, &spec, x, MomentSource::Enumerate { budget: DEFAULT_STATE_BUDGET }).unwrap();
        assert!(r.residual < 1e-10, "{r:?}");
        assert!(r.cross_nonpositive && r.within_nonnegative && r.dominated);
        // constant π: the Hájek variance is Var(ΣΨ)/n²
        assert!((r.design_variance - r.lhs / 4.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_srs_reproduces_closed_form() {
        let pop = generate_grid_population(7, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::srs(3).unwrap();
        let x = pop.quantile_point(0.4);
        let r = variance_decomposition_check(&pop, &spec, x, MomentSource::Enumerate { budget: DEFAULT_STATE_BUDGET }).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.lhs / 9.0 - r.srs_variance).abs() < 1e-12);
        assert!((r.design_variance - r.srs_variance).abs() < 1e-12);
        // without replacement, distinct draws covary by −σ²/(N − 1)
        assert!((r.cross_covariances[0] + r.set_variances[0] / 6.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_level0_single_draws_do_not_covary() {
        let pop = generate_grid_population(5, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::balanced(Design::Level0, 1, 3).unwrap();
        let x = pop.quantile_point(0.6);
        let r = variance_decomposition_check(&pop, &spec, x, MomentSource::Enumerate { budget: DEFAULT_STATE_BUDGET }).unwrap();
        assert!(r.cross_covariances.iter().all(|c| c.abs() < 1e-12));
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn decomposition_monte_carlo_identity_holds() {
        let pop = generate_grid_population(20, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::balanced(Design::Level2, 4, 1).unwrap();
        let x = pop.quantile_point(0.5);
        let r = variance_decomposition_check(&pop, &spec, x, MomentSource::Auto { budget: 1000, reps: 2000, seed: 1 }).unwrap();
        assert_eq!(r.moments, "monte_carlo");
        assert!(r.residual < 1e-9);
        assert!(r.dominated);
    }

    #[test]
    fn syg_is_unbiased_under_level2_enumeration() {
        let pop = generate_grid_population(6, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::balanced(Design::Level2, 2, 1).unwrap();
        let table = level2_inclusion(&spec, 6).unwrap();
        let x = pop.quantile_point(0.5);
        let mut mean_vhat = 0.0;
        for_each_outcome(&spec, 6, DEFAULT_STATE_BUDGET, |p, o| {
            let entries = o
                .measured
                .iter()
                .enumerate()
                .map(|(h, &u)| SampleEntry {
                    set_index: h + 1,
                    in_set_rank: spec.rank_pattern[h],
                    population_id: u + 1,
                    population_rank: u + 1,
                    value: pop.x_values()[u],
                })
                .collect();
            let s = RankedSetSample::from_entries(spec.clone(), RankingMode::Perfect, entries).unwrap();
            mean_vhat += p * syg_variance_estimate(&s, &table, x).unwrap();
        })
        .unwrap();
        // with constant π the Hájek and HT estimators coincide and SYG is unbiased
        let truth = true_variance(&pop, &table, x).unwrap();
        assert!((mean_vhat - truth).abs() < 1e-12, "{mean_vhat} {truth}");
    }

    #[test]
    fn level0_multiset_flag_counts_duplicates() {
        let pop = generate_grid_population(3, DistributionKind::StandardUniform).unwrap();
        let spec = DesignSpec::balanced(Design::Level0, 3, 1).unwrap();
        let table = level0_inclusion(&spec, 3).unwrap();
        // all three sets are the whole population, so ranks 1, 2, 3 are measured
        let s = draw_rss(&pop, &spec, RankingMode::Perfect, &mut seeded(1)).unwrap();
        let a = hajek_edf_with(&s, &table, Multiplicity::Distinct).unwrap();
        let b = hajek_edf_with(&s, &table, Multiplicity::Multiset).unwrap();
        assert_eq!(a, b);
        let dup_spec = DesignSpec::balanced(Design::Level0, 1, 2).unwrap();
        let dup_table = level0_inclusion(&dup_spec, 3).unwrap();
        let dup = sample_from(dup_spec, &[(2, 0.5), (2, 0.5)]);
        assert_eq!(hajek_edf_with(&dup, &dup_table, Multiplicity::Distinct).unwrap().unit_weights().len(), 1);
        assert_eq!(hajek_edf_with(&dup, &dup_table, Multiplicity::Multiset).unwrap().unit_weights().len(), 2);
    }

    #[test]
    fn enumeration_table_drives_same_variance() {
        let pop = generate_grid_population(5, DistributionKind::StandardExponential).unwrap();
        let spec = DesignSpec::balanced(Design::Level0, 2, 1).unwrap();
        let closed = level0_inclusion(&spec, 5).unwrap();
        let exact = enumeration_inclusion(&spec, 5, DEFAULT_STATE_BUDGET).unwrap();
        let x = pop.quantile_point(0.4);
        let a = true_variance(&pop, &closed, x).unwrap();
        let b = true_variance(&pop, &exact, x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn stokes_sager_variance_single_rank_is_binomial() {
        assert!((stokes_sager_variance(0.3, 1, 5) - 0.21 / 5.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn hajek_edf_is_a_cdf(values in prop::collection::vec(-10.0f64..10.0, 1..30), seed in any::<u64>()) {
            let n = values.len();
            let weights: Vec<f64> = (0..n).map(|i| 0.05 + ((seed.wrapping_mul(i as u64 + 1) % 97) as f64) / 100.0).collect();
            let edf = EdfEstimate::from_weighted(values.iter().copied().zip(weights).collect()).unwrap();
            prop_assert!(edf.cum_weights().windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*edf.cum_weights().last().unwrap(), 1.0);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(edf.eval(max), 1.0);
            for &v in edf.support() {
                prop_assert!(edf.eval(v) > edf.eval(v - 1e-9));
            }
            for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
                let q = edf.quantile(p, Inversion::Step);
                prop_assert!(edf.eval(q) >= p - 1e-12);
                let qi = edf.quantile(p, Inversion::Interpolated);
                prop_assert!(qi >= edf.support()[0] && qi <= max);
            }
        }
    }
}
