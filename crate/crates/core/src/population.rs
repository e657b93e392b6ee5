//! Finite populations: quantile-grid construction, the auxiliary ranking
//! variable and the true distribution function.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{beta_quantile, standard_normal_quantile};
use crate::error::{Result, RssError};

/// Reference distributions used to lay out quantile-grid populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    #[serde(alias = "normal")]
    StandardNormal,
    #[serde(alias = "uniform")]
    StandardUniform,
    #[serde(alias = "exp")]
    StandardExponential,
    #[serde(alias = "beta52")]
    Beta52,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::StandardNormal,
        DistributionKind::StandardUniform,
        DistributionKind::StandardExponential,
        DistributionKind::Beta52,
    ];

    /// Quantile function on (0, 1).
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            DistributionKind::StandardNormal => standard_normal_quantile(p),
            DistributionKind::StandardUniform => p,
            DistributionKind::StandardExponential => -(-p).ln_1p(),
            DistributionKind::Beta52 => beta_quantile(5.0, 2.0, p),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            DistributionKind::StandardNormal => "normal",
            DistributionKind::StandardUniform => "uniform",
            DistributionKind::StandardExponential => "exp",
            DistributionKind::Beta52 => "beta52",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for DistributionKind {
    type Err = RssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "standard_normal" | "n01" => Ok(DistributionKind::StandardNormal),
            "uniform" | "standard_uniform" | "u01" => Ok(DistributionKind::StandardUniform),
            "exp" | "exponential" | "standard_exponential" => Ok(DistributionKind::StandardExponential),
            "beta52" | "beta" | "beta(5,2)" => Ok(DistributionKind::Beta52),
            other => Err(RssError::invalid(format!("unknown distribution '{other}'"))),
        }
    }
}

/// An ordered finite population.
///
/// Units carry the labels `1..=N` and their study values are non-decreasing
/// in the label. `judgment_ranks[i]` is the ranking position of unit `i + 1`
/// (1-based): the ranks of the auxiliary values when present, otherwise the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    x: Vec<f64>,
    aux: Option<Vec<f64>>,
    judgment_ranks: Vec<usize>,
}

impl Population {
    /// Builds a population from study values that are already sorted.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(RssError::invalid("population must have at least one unit"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RssError::invalid("population values must be finite"));
        }
        if x.windows(2).any(|w| w[0] > w[1]) {
            return Err(RssError::invalid(
                "population values must be non-decreasing in the unit label",
            ));
        }
        let judgment_ranks = (1..=x.len()).collect();
        Ok(Population {
            x,
            aux: None,
            judgment_ranks,
        })
    }

    /// Sorts arbitrary study values and relabels the units accordingly.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        Population::new(values)
    }

    /// Attaches given auxiliary values and derives judgment ranks from them.
    pub fn with_auxiliary_values(mut self, aux: Vec<f64>) -> Result<Self> {
        if aux.len() != self.x.len() {
            return Err(RssError::invalid(format!(
                "auxiliary column has {} entries, population has {}",
                aux.len(),
                self.x.len()
            )));
        }
        if aux.iter().any(|v| !v.is_finite()) {
            return Err(RssError::invalid("auxiliary values must be finite"));
        }
        self.judgment_ranks = ranks_with_id_tiebreak(&aux);
        self.aux = Some(aux);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn aux_values(&self) -> Option<&[f64]> {
        self.aux.as_deref()
    }

    /// Judgment rank (1-based) of each unit, indexed by `label − 1`.
    pub fn judgment_ranks(&self) -> &[usize] {
        &self.judgment_ranks
    }

    /// Study value of unit `id` (1-based).
    pub fn value(&self, id: usize) -> f64 {
        self.x[id - 1]
    }

    /// Finite-population mean and standard deviation (divisor N).
    pub fn moments(&self) -> (f64, f64) {
        let n = self.x.len() as f64;
        let mean = self.x.iter().sum::<f64>() / n;
        let var = self.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// True distribution function F(x) = #{X_i ≤ x} / N.
    pub fn true_edf(&self, x: f64) -> f64 {
        self.x.partition_point(|&v| v <= x) as f64 / self.x.len() as f64
    }

    /// Indicator vector Ψ indexed by population rank: entry `j` is
    /// 1{X ≤ x} for the unit whose judgment rank is `j + 1`.
    pub fn indicators_by_rank(&self, x: f64) -> Vec<f64> {
        let mut psi = vec![0.0; self.x.len()];
        for (idx, &rank) in self.judgment_ranks.iter().enumerate() {
            psi[rank - 1] = if self.x[idx] <= x { 1.0 } else { 0.0 };
        }
        psi
    }

    /// Smallest population value whose true EDF reaches `p`.
    pub fn quantile_point(&self, p: f64) -> f64 {
        self.x[quantile_index(p, self.x.len())]
    }
}

/// 0-based index of the smallest grid position with i / N ≥ p.
pub(crate) fn quantile_index(p: f64, n: usize) -> usize {
    let target = (p * n as f64 - 1e-9).ceil();
    (target.max(1.0) as usize).min(n) - 1
}

/// Population x_γ = Q((γ − 0.5)/N), γ = 1..N. Deterministic.
pub fn generate_grid_population(n: usize, dist: DistributionKind) -> Result<Population> {
    if n == 0 {
        return Err(RssError::invalid("population size must be at least 1"));
    }
    let x = (1..=n)
        .map(|g| dist.quantile((g as f64 - 0.5) / n as f64))
        .collect();
    Population::new(x)
}

/// Y_γ = ρ (X_γ − μ_x)/σ_x + √(1 − ρ²) Z_γ with fresh standard normal Z.
///
/// Judgment ranks are recomputed from Y, ties going to the smaller label.
pub fn attach_auxiliary<R: Rng + ?Sized>(pop: &Population, rho: f64, rng: &mut R) -> Result<Population> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(RssError::invalid(format!("rho must lie in [-1, 1], got {rho}")));
    }
    if pop.len() < 2 {
        return Err(RssError::DegenerateStandardization);
    }
    let (mean, sd) = pop.moments();
    if sd <= 0.0 {
        return Err(RssError::DegenerateStandardization);
    }
    let noise_scale = (1.0 - rho * rho).max(0.0).sqrt();
    let aux: Vec<f64> = pop
        .x
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            rho * (x - mean) / sd + noise_scale * z
        })
        .collect();
    pop.clone().with_auxiliary_values(aux)
}

fn ranks_with_id_tiebreak(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (pos, idx) in order.into_iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn grid_single_unit_is_median() {
        let pop = generate_grid_population(1, DistributionKind::StandardUniform).unwrap();
        assert_eq!(pop.x_values(), &[0.5]);
    }

    #[test]
    fn grid_uniform_four() {
        let pop = generate_grid_population(4, DistributionKind::StandardUniform).unwrap();
        assert_eq!(pop.x_values(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(pop.judgment_ranks(), &[1, 2, 3, 4]);
    }

    #[test]
    fn grid_normal_first_point() {
        let pop = generate_grid_population(20, DistributionKind::StandardNormal).unwrap();
        assert!((pop.x_values()[0] + 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_empty() {
        assert!(generate_grid_population(0, DistributionKind::StandardNormal).is_err());
    }

    #[test]
    fn grid_is_sorted_for_every_kind() {
        for kind in DistributionKind::ALL {
            let pop = generate_grid_population(50, kind).unwrap();
            assert!(pop.x_values().windows(2).all(|w| w[0] < w[1]), "{kind}");
        }
    }

    #[test]
    fn true_edf_edges_and_grid_point() {
        let pop = generate_grid_population(4, DistributionKind::StandardUniform).unwrap();
        assert_eq!(pop.true_edf(0.0), 0.0);
        assert_eq!(pop.true_edf(0.875), 1.0);
        assert_eq!(pop.true_edf(5.0), 1.0);
        assert_eq!(pop.true_edf(0.375), 0.5);
    }

    #[test]
    fn quantile_point_uses_smallest_value_reaching_p() {
        let pop = generate_grid_population(20, DistributionKind::StandardUniform).unwrap();
        assert_eq!(pop.quantile_point(0.5), pop.x_values()[9]);
        assert_eq!(pop.quantile_point(0.3), pop.x_values()[5]);
        assert_eq!(pop.quantile_point(0.0), pop.x_values()[0]);
        assert_eq!(pop.quantile_point(1.0), pop.x_values()[19]);
    }

    #[test]
    fn unsorted_input_rejected_by_new() {
        assert!(Population::new(vec![2.0, 1.0]).is_err());
        let pop = Population::from_unsorted(vec![2.0, 1.0, 3.0]).unwrap();
        assert_eq!(pop.x_values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_population_cannot_be_standardized() {
        let pop = Population::new(vec![1.0; 5]).unwrap();
        let err = attach_auxiliary(&pop, 0.5, &mut seeded(1)).unwrap_err();
        assert!(matches!(err, RssError::DegenerateStandardization));
    }

    #[test]
    fn auxiliary_length_is_checked() {
        let pop = Population::new(vec![1.0, 2.0]).unwrap();
        assert!(pop.with_auxiliary_values(vec![1.0]).is_err());
    }

    #[test]
    fn aux_ties_break_by_smaller_label() {
        let pop = Population::new(vec![1.0, 2.0, 3.0])
            .unwrap()
            .with_auxiliary_values(vec![5.0, 5.0, 1.0])
            .unwrap();
        assert_eq!(pop.judgment_ranks(), &[2, 3, 1]);
    }

    #[test]
    fn indicators_follow_judgment_order() {
        let pop = Population::new(vec![1.0, 2.0, 3.0])
            .unwrap()
            .with_auxiliary_values(vec![0.0, 2.0, 1.0])
            .unwrap();
        // unit 3 (x=3) is ranked second
        assert_eq!(pop.indicators_by_rank(2.0), vec![1.0, 0.0, 1.0]);
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    struct CorrelationStats {
        pearson: (f64, f64),
        cross_moment: (f64, f64),
        aux_second_moment: (f64, f64),
    }

    fn mean_and_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    fn correlation_stats(rho: f64, n: usize, reps: usize) -> CorrelationStats {
        let pop = generate_grid_population(n, DistributionKind::StandardNormal).unwrap();
        let (mu, sd) = pop.moments();
        let std_x: Vec<f64> = pop.x_values().iter().map(|x| (x - mu) / sd).collect();
        let mut rng = seeded(2024);
        let (mut pear, mut cross, mut second) = (vec![], vec![], vec![]);
        for _ in 0..reps {
            let p = attach_auxiliary(&pop, rho, &mut rng).unwrap();
            let y = p.aux_values().unwrap();
            pear.push(pearson(p.x_values(), y));
            cross.push(std_x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n as f64);
            second.push(y.iter().map(|b| b * b).sum::<f64>() / n as f64);
        }
        CorrelationStats {
            pearson: mean_and_se(&pear),
            cross_moment: mean_and_se(&cross),
            aux_second_moment: mean_and_se(&second),
        }
    }

    #[test]
    fn zero_rho_gives_uncorrelated_auxiliary() {
        let stats = correlation_stats(0.0, 100, 10_000);
        let (m, se) = stats.pearson;
        assert!(m.abs() < 3.0 * se, "mean={m} se={se}");
        let (c, se) = stats.cross_moment;
        assert!(c.abs() < 3.0 * se, "cross={c} se={se}");
    }

    #[test]
    fn rho_point_nine_gives_matching_correlation() {
        let rho: f64 = 0.9;
        let n = 100;
        let stats = correlation_stats(rho, n, 10_000);
        // E[(1/N) Σ x_std Y] = ρ and E[(1/N) Σ Y²] = 1 exactly.
        let (c, se) = stats.cross_moment;
        assert!((c - rho).abs() < 3.0 * se, "cross={c} se={se}");
        let (v, se) = stats.aux_second_moment;
        assert!((v - 1.0).abs() < 3.0 * se, "second moment={v} se={se}");
        // Pearson r with x held fixed: E[r] = ρ(1 + s²/N − 0.75 s⁴/N) + O(N⁻²),
        // s² = 1 − ρ².
        let s2 = 1.0 - rho * rho;
        let expected = rho * (1.0 + s2 / n as f64 - 0.75 * s2 * s2 / n as f64);
        let (m, se) = stats.pearson;
        assert!((m - expected).abs() < 3.0 * se, "mean={m} expected={expected} se={se}");
        assert!((m - rho).abs() < 0.005);
    }

    proptest! {
        #[test]
        fn grid_generation_is_deterministic(n in 1usize..200, k in 0usize..4) {
            let kind = DistributionKind::ALL[k];
            prop_assert_eq!(generate_grid_population(n, kind).unwrap(),
                            generate_grid_population(n, kind).unwrap());
        }

        #[test]
        fn perfect_correlation_reproduces_x_ranks(seed in any::<u64>(), n in 2usize..80) {
            let pop = generate_grid_population(n, DistributionKind::StandardExponential).unwrap();
            let with_aux = attach_auxiliary(&pop, 1.0, &mut seeded(seed)).unwrap();
            let identity: Vec<usize> = (1..=n).collect();
            prop_assert_eq!(with_aux.judgment_ranks(), identity.as_slice());
        }

        #[test]
        fn judgment_ranks_form_a_permutation(seed in any::<u64>(), rho in -1.0f64..=1.0, n in 2usize..80) {
            let pop = generate_grid_population(n, DistributionKind::StandardNormal).unwrap();
            let with_aux = attach_auxiliary(&pop, rho, &mut seeded(seed)).unwrap();
            let mut ranks = with_aux.judgment_ranks().to_vec();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (1..=n).collect::<Vec<_>>());
        }

        #[test]
        fn true_edf_is_a_step_function(n in 1usize..60, xs in proptest::collection::vec(-4.0f64..4.0, 2..20)) {
            let pop = generate_grid_population(n, DistributionKind::StandardNormal).unwrap();
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            let vals: Vec<f64> = xs.iter().map(|&x| pop.true_edf(x)).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            for v in vals {
                let scaled = v * n as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }
    }
}
