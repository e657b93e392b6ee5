//! Relative-efficiency experiments.
//!
//! Under perfect ranking the efficiency of each design against SRS is a
//! ratio of exact design variances whenever an exact inclusion table is
//! available. Otherwise (large level-1 designs, imperfect ranking) it is
//! estimated by Monte Carlo: every replication draws each design once from
//! a shared auxiliary variable and evaluates the Hájek EDF at the
//! population p-quantiles.
//!
//! Replication `t` always uses the stream derived from `(master_seed, t)`
//! and per-replication results are reduced in replication order, so output
//! is bit-identical for any number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{draw_indices, feasibility_check, Design, DesignSpec};
use crate::error::{Result, RssError};
use crate::estimators::{hajek_at, true_variance};
use crate::inclusion::{compute_inclusion, exact_available, mc_inclusion, InclusionTable, MethodChoice};
use crate::population::{attach_auxiliary, generate_grid_population, DistributionKind, Population};
use crate::rng::{replication_stream, side_stream};

pub const BATCHES: usize = 10;

fn default_rho() -> f64 {
    1.0
}

fn default_reps() -> u64 {
    10_000
}

fn default_table_reps() -> u64 {
    100_000
}

pub fn default_p_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(rename = "N")]
    pub n_pop: usize,
    pub dist: DistributionKind,
    /// Designs compared against SRS; SRS itself is always included.
    pub designs: Vec<Design>,
    pub m: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_pattern: Option<Vec<usize>>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Replications for Monte Carlo inclusion tables (level-1 beyond the
    /// exact budget).
    #[serde(default = "default_table_reps")]
    pub table_reps: u64,
    /// Use Monte Carlo even when exact variances are available.
    #[serde(default)]
    pub force_monte_carlo: bool,
}

impl SimulationConfig {
    pub fn new(n_pop: usize, dist: DistributionKind, designs: Vec<Design>, m: usize, k: usize) -> Self {
        SimulationConfig {
            n_pop,
            dist,
            designs,
            m,
            k,
            rank_pattern: None,
            rho: 1.0,
            reps: default_reps(),
            p_grid: default_p_grid(),
            master_seed: 0,
            table_reps: default_table_reps(),
            force_monte_carlo: false,
        }
    }

    pub fn spec_for(&self, design: Design) -> Result<DesignSpec> {
        match &self.rank_pattern {
            Some(p) => DesignSpec::with_pattern(design, self.k, self.m, p.clone()),
            None => DesignSpec::balanced(design, self.k, self.m),
        }
    }

    /// SRS first, then the listed designs without repeats.
    pub fn all_designs(&self) -> Vec<Design> {
        let mut out = vec![Design::Srs];
        for &d in &self.designs {
            if !out.contains(&d) {
                out.push(d);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(RssError::invalid(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if self.reps == 0 {
            return Err(RssError::invalid("reps must be at least 1"));
        }
        if self.p_grid.is_empty() || self.p_grid.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(RssError::invalid("p_grid entries must lie in (0, 1]"));
        }
        for d in self.all_designs() {
            let spec = self.spec_for(d)?;
            spec.ensure_feasible(self.n_pop)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    ExactVariance,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RERow {
    pub design: Design,
    pub p: f64,
    pub x_p: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub re: f64,
    /// Batch-means standard error; zero in exact mode.
    pub re_se: f64,
    pub mode: SimulationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct REResult {
    pub config: SimulationConfig,
    pub rows: Vec<RERow>,
}

impl REResult {
    pub fn row(&self, design: Design, p: f64) -> Option<&RERow> {
        self.rows.iter().find(|r| r.design == design && (r.p - p).abs() < 1e-12)
    }

    pub fn re(&self, design: Design, p: f64) -> Option<f64> {
        self.row(design, p).map(|r| r.re)
    }
}

/// MSE ratio with the conventions 0/0 = 1 and x/0 = ∞.
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Perfect-ranking efficiencies. Designs with exact tables use exact
/// design variances (bias reported as zero, MSE = variance); the others
/// fall back to Monte Carlo against the SRS reference variance.
pub fn run_perfect_re(config: &SimulationConfig) -> Result<REResult> {
    config.validate()?;
    if config.rho != 1.0 {
        return Err(RssError::invalid("perfect-ranking runs require rho = 1"));
    }
    let pop = generate_grid_population(config.n_pop, config.dist)?;
    let designs = config.all_designs();
    let mut exact_designs = Vec::new();
    let mut mc_designs = Vec::new();
    for &d in &designs {
        if !config.force_monte_carlo && exact_available(&config.spec_for(d)?, config.n_pop) {
            exact_designs.push(d);
        } else {
            mc_designs.push(d);
        }
    }
    if mc_designs.is_empty() {
        return exact_re(config, &pop, &designs);
    }
    if mc_designs.contains(&Design::Srs) {
        let stats = mc_stats(config, &pop, &mc_designs, false)?;
        return Ok(REResult {
            config: config.clone(),
            rows: stats.rows(None),
        });
    }
    // exact SRS reference, Monte Carlo for the rest
    let exact = exact_re(config, &pop, &exact_designs)?;
    let reference: Vec<f64> = config
        .p_grid
        .iter()
        .map(|&p| exact.row(Design::Srs, p).unwrap().variance)
        .collect();
    let stats = mc_stats(config, &pop, &mc_designs, false)?;
    let mc_rows = stats.rows(Some(&reference));
    let rows = designs
        .iter()
        .flat_map(|&d| {
            let source = if exact_designs.contains(&d) { &exact.rows } else { &mc_rows };
            source.iter().filter(move |r| r.design == d).cloned().collect::<Vec<_>>()
        })
        .collect();
    Ok(REResult {
        config: config.clone(),
        rows,
    })
}

fn exact_re(config: &SimulationConfig, pop: &Population, designs: &[Design]) -> Result<REResult> {
    let mut variances: Vec<Vec<f64>> = Vec::new();
    for &d in designs {
        let spec = config.spec_for(d)?;
        let table = compute_inclusion(&spec, config.n_pop, MethodChoice::Auto { reps: config.table_reps, seed: 0 })?;
        variances.push(
            config
                .p_grid
                .iter()
                .map(|&p| true_variance(pop, &table, pop.quantile_point(p)))
                .collect::<Result<_>>()?,
        );
    }
    let srs_idx = designs.iter().position(|&d| d == Design::Srs);
    let mut rows = Vec::new();
    for (di, &d) in designs.iter().enumerate() {
        for (pi, &p) in config.p_grid.iter().enumerate() {
            let v = variances[di][pi];
            let re = match srs_idx {
                Some(s) if d != Design::Srs => ratio(variances[s][pi], v),
                _ => 1.0,
            };
            rows.push(RERow {
                design: d,
                p,
                x_p: pop.quantile_point(p),
                bias: 0.0,
                variance: v,
                mse: v,
                re,
                re_se: 0.0,
                mode: SimulationMode::ExactVariance,
            });
        }
    }
    Ok(REResult {
        config: config.clone(),
        rows,
    })
}

/// Monte Carlo efficiencies with the ranking-error model at `config.rho`.
pub fn run_imperfect_re(config: &SimulationConfig) -> Result<REResult> {
    config.validate()?;
    let pop = generate_grid_population(config.n_pop, config.dist)?;
    let stats = mc_stats(config, &pop, &config.all_designs(), config.rho != 1.0)?;
    Ok(REResult {
        config: config.clone(),
        rows: stats.rows(None),
    })
}

/// Inclusion table for a design: exact where affordable, else Monte Carlo
/// on a stream separate from the replications.
fn design_table(config: &SimulationConfig, spec: &DesignSpec, tag: u64) -> Result<InclusionTable> {
    if exact_available(spec, config.n_pop) {
        compute_inclusion(spec, config.n_pop, MethodChoice::Auto { reps: config.table_reps, seed: 0 })
    } else {
        let seed: u64 = side_stream(config.master_seed, tag).random();
        mc_inclusion(config.n_pop, spec, config.table_reps, seed)
    }
}

/// Across-replication moments of F̂(x_p), overall and per batch, laid out
/// design-major (index d·P + p).
struct McStats {
    designs: Vec<Design>,
    p_grid: Vec<f64>,
    points: Vec<f64>,
    mean: Vec<f64>,
    truth: Vec<f64>,
    var: Vec<f64>,
    mse: Vec<f64>,
    batches: Vec<(Vec<f64>, Vec<f64>)>,
}

impl McStats {
    /// Rows with RE = reference variance / MSE. The reference is the SRS
    /// Monte Carlo variance (SRS must then be the first design) unless exact
    /// values are supplied.
    fn rows(&self, exact_reference: Option<&[f64]>) -> Vec<RERow> {
        let np = self.p_grid.len();
        let reference = |pi: usize, batch: Option<usize>| match (exact_reference, batch) {
            (Some(r), _) => r[pi],
            (None, None) => self.var[pi],
            (None, Some(b)) => self.batches[b].0[pi],
        };
        let mut rows = Vec::with_capacity(self.designs.len() * np);
        for (d, &design) in self.designs.iter().enumerate() {
            for pi in 0..np {
                let j = d * np + pi;
                let (re, re_se) = if design == Design::Srs && exact_reference.is_none() {
                    (1.0, 0.0)
                } else {
                    let se = if self.batches.is_empty() {
                        f64::NAN
                    } else {
                        let vals: Vec<f64> = (0..self.batches.len())
                            .map(|b| ratio(reference(pi, Some(b)), self.batches[b].1[j]))
                            .collect();
                        let nb = vals.len() as f64;
                        let mu = vals.iter().sum::<f64>() / nb;
                        let s2 = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (nb - 1.0);
                        (s2 / nb).sqrt()
                    };
                    (ratio(reference(pi, None), self.mse[j]), se)
                };
                rows.push(RERow {
                    design,
                    p: self.p_grid[pi],
                    x_p: self.points[pi],
                    bias: self.mean[j] - self.truth[pi],
                    variance: self.var[j],
                    mse: self.mse[j],
                    re,
                    re_se,
                    mode: SimulationMode::MonteCarlo,
                });
            }
        }
        rows
    }
}

fn mc_stats(config: &SimulationConfig, pop: &Population, designs: &[Design], use_auxiliary: bool) -> Result<McStats> {
    let specs: Vec<DesignSpec> = designs.iter().map(|&d| config.spec_for(d)).collect::<Result<_>>()?;
    let tables: Vec<InclusionTable> = specs
        .iter()
        .map(|s| design_table(config, s, s.design as u64))
        .collect::<Result<_>>()?;
    let points: Vec<f64> = config.p_grid.iter().map(|&p| pop.quantile_point(p)).collect();
    let truth: Vec<f64> = points.iter().map(|&x| pop.true_edf(x)).collect();
    let n_pop = pop.len();
    let np = points.len();
    let nd = designs.len();

    let per_rep: Vec<Vec<f64>> = (0..config.reps)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let mut rng = replication_stream(config.master_seed, t);
            let ranked;
            let judged: &Population = if use_auxiliary {
                ranked = attach_auxiliary(pop, config.rho, &mut rng)?;
                &ranked
            } else {
                pop
            };
            let ranks = judged.judgment_ranks();
            let mut out = vec![0.0; nd * np];
            let mut units: Vec<(f64, f64)> = Vec::new();
            for (d, (spec, table)) in specs.iter().zip(&tables).enumerate() {
                // rank key = judgment rank − 1; the label itself under perfect ranking
                let draw = draw_indices(n_pop, spec, |u| ranks[u] - 1, &mut rng);
                let mut measured = draw.measured;
                measured.sort_unstable();
                measured.dedup();
                units.clear();
                for &u in &measured {
                    let pi = table.first_order[ranks[u] - 1];
                    if !(pi > 0.0) {
                        return Err(RssError::ZeroInclusion { rank: ranks[u] });
                    }
                    units.push((judged.x_values()[u], pi));
                }
                hajek_at(&units, &points, &mut out[d * np..(d + 1) * np]);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let moments = |reps: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let r = reps.len() as f64;
        let mut mean = vec![0.0; nd * np];
        for rep in reps {
            for (m, v) in mean.iter_mut().zip(rep) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= r);
        let mut var = vec![0.0; nd * np];
        let mut mse = vec![0.0; nd * np];
        for rep in reps {
            for j in 0..nd * np {
                var[j] += (rep[j] - mean[j]).powi(2);
                mse[j] += (rep[j] - truth[j % np]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= r);
        mse.iter_mut().for_each(|v| *v /= r);
        (mean, var, mse)
    };

    let (mean, var, mse) = moments(&per_rep);
    let batches = if per_rep.len() >= BATCHES {
        let size = per_rep.len() / BATCHES;
        per_rep
            .chunks_exact(size)
            .take(BATCHES)
            .map(|chunk| {
                let (_, v, m) = moments(chunk);
                (v, m)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(McStats {
        designs: designs.to_vec(),
        p_grid: config.p_grid.clone(),
        points,
        mean,
        truth,
        var,
        mse,
        batches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub n_pop: usize,
    pub m: usize,
    pub k: usize,
    pub designs: Vec<Design>,
    pub p_grid: Vec<f64>,
    /// One RE curve per distribution, rows ordered as in `designs` × `p_grid`.
    pub re_by_distribution: Vec<(DistributionKind, Vec<f64>)>,
    pub max_abs_difference: f64,
    pub passed: bool,
}

/// Exact perfect-ranking REs for all four reference distributions.
pub fn distribution_invariance_check(n_pop: usize, m: usize, k: usize, p_grid: &[f64]) -> Result<InvarianceReport> {
    let designs: Vec<Design> = [Design::Level0, Design::Level1, Design::Level2]
        .into_iter()
        .filter(|&d| {
            DesignSpec::balanced(d, k, m)
                .map(|s| feasibility_check(&s, n_pop) && exact_available(&s, n_pop))
                .unwrap_or(false)
        })
        .collect();
    let mut curves = Vec::new();
    for dist in DistributionKind::ALL {
        let mut config = SimulationConfig::new(n_pop, dist, designs.clone(), m, k);
        config.p_grid = p_grid.to_vec();
        let result = run_perfect_re(&config)?;
        curves.push((dist, result.rows.iter().map(|r| r.re).collect::<Vec<f64>>()));
    }
    let reference = &curves[0].1;
    let max_abs_difference = curves
        .iter()
        .flat_map(|(_, c)| c.iter().zip(reference).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(InvarianceReport {
        n_pop,
        m,
        k,
        designs: std::iter::once(Design::Srs).chain(designs).collect(),
        p_grid: p_grid.to_vec(),
        re_by_distribution: curves,
        max_abs_difference,
        passed: max_abs_difference <= 1e-10,
    })
}
