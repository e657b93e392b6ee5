//! Sampling designs and draw procedures.
//!
//! All three RSS levels draw `n = m·k` sets of `k` units without replacement
//! from the currently available pool, rank each set, and measure the unit
//! holding the prescribed in-set rank. They differ in what leaves the pool
//! afterwards:
//!
//! | design  | removed after each set | feasibility      |
//! |---------|------------------------|------------------|
//! | level-0 | nothing                | k ≤ N            |
//! | level-1 | the measured unit      | (n − 1) + k ≤ N  |
//! | level-2 | the whole set          | m·k² ≤ N         |
//!
//! A rank pattern of any length n is accepted; the constraints above are
//! stated for full cycles (n = m·k) and generalize with n in place of m·k.
//!
//! Sets are drawn in rank-pattern order, which matters for level-1.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RssError};
use crate::population::Population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Design {
    #[serde(rename = "srs")]
    Srs,
    #[serde(rename = "l0")]
    Level0,
    #[serde(rename = "l1")]
    Level1,
    #[serde(rename = "l2")]
    Level2,
}

impl Design {
    pub const ALL: [Design; 4] = [Design::Srs, Design::Level0, Design::Level1, Design::Level2];

    pub fn short_name(self) -> &'static str {
        match self {
            Design::Srs => "srs",
            Design::Level0 => "l0",
            Design::Level1 => "l1",
            Design::Level2 => "l2",
        }
    }

    /// Whether every sample consists of exactly `n` distinct units.
    pub fn has_fixed_distinct_size(self) -> bool {
        !matches!(self, Design::Level0)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Design {
    type Err = RssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srs" => Ok(Design::Srs),
            "l0" | "level0" | "level-0" => Ok(Design::Level0),
            "l1" | "level1" | "level-1" => Ok(Design::Level1),
            "l2" | "level2" | "level-2" => Ok(Design::Level2),
            other => Err(RssError::invalid(format!("unknown design '{other}'"))),
        }
    }
}

/// How units inside a set are ordered before choosing the one to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// By the true study values (ties to the smaller label).
    Perfect,
    /// By the population's judgment ranks derived from the auxiliary variable.
    ByAuxiliary,
}

/// Design identity, set size `k`, cycles `m`, and the in-set rank measured
/// from each of the `n = m·k` sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: Design,
    pub k: usize,
    pub m: usize,
    pub rank_pattern: Vec<usize>,
}

impl DesignSpec {
    /// Balanced pattern: every cycle measures ranks 1, 2, …, k in order.
    pub fn balanced(design: Design, k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(RssError::invalid("set size k and cycles m must be positive"));
        }
        let rank_pattern = (0..m).flat_map(|_| 1..=k).collect();
        Ok(DesignSpec {
            design,
            k,
            m,
            rank_pattern,
        })
    }

    /// Simple random sampling of `n` units, encoded as `n` singleton sets.
    pub fn srs(n: usize) -> Result<Self> {
        DesignSpec::balanced(Design::Srs, 1, n)
    }

    pub fn with_pattern(design: Design, k: usize, m: usize, rank_pattern: Vec<usize>) -> Result<Self> {
        if rank_pattern.len() != m * k {
            return Err(RssError::invalid(format!(
                "rank pattern has {} entries, expected m·k = {}",
                rank_pattern.len(),
                m * k
            )));
        }
        let spec = DesignSpec {
            design,
            k,
            m,
            rank_pattern,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Arbitrary non-empty pattern; `m` is recorded as the number of
    /// (possibly partial) cycles.
    pub fn from_pattern(design: Design, k: usize, rank_pattern: Vec<usize>) -> Result<Self> {
        let m = rank_pattern.len().div_ceil(k.max(1)).max(1);
        let spec = DesignSpec {
            design,
            k,
            m,
            rank_pattern,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(RssError::invalid("set size k and cycles m must be positive"));
        }
        if self.rank_pattern.is_empty() {
            return Err(RssError::invalid("rank pattern is empty"));
        }
        if let Some(bad) = self.rank_pattern.iter().find(|&&r| r == 0 || r > self.k) {
            return Err(RssError::invalid(format!("rank {bad} outside 1..={}", self.k)));
        }
        Ok(())
    }

    /// Sample size n: the pattern length (m·k for full cycles).
    pub fn sample_size(&self) -> usize {
        self.rank_pattern.len()
    }

    pub fn is_balanced(&self) -> bool {
        (1..=self.k).all(|r| self.rank_pattern.iter().filter(|&&x| x == r).count() == self.m)
    }

    /// Same sizes under a different design.
    pub fn with_design(&self, design: Design) -> DesignSpec {
        DesignSpec {
            design,
            ..self.clone()
        }
    }

    /// Errors with the violated constraint when the design cannot run on `n_pop` units.
    pub fn ensure_feasible(&self, n_pop: usize) -> Result<()> {
        self.validate()?;
        if feasibility_check(self, n_pop) {
            return Ok(());
        }
        let (n, k) = (self.sample_size(), self.k);
        let reason = match self.design {
            Design::Srs => format!("n = {n} exceeds N"),
            Design::Level0 => format!("k = {k} exceeds N"),
            Design::Level1 => format!("(n − 1) + k = {} exceeds N", n - 1 + k),
            Design::Level2 => format!("n·k = {} (m·k² for full cycles) exceeds N", n * k),
        };
        Err(RssError::infeasible(self.design, n_pop, reason))
    }
}

/// Whether the design can be carried out on a population of `n_pop` units.
pub fn feasibility_check(spec: &DesignSpec, n_pop: usize) -> bool {
    let (n, k) = (spec.sample_size(), spec.k);
    if n == 0 {
        return false;
    }
    match spec.design {
        Design::Srs => n <= n_pop,
        Design::Level0 => k <= n_pop,
        Design::Level1 => n - 1 + k <= n_pop,
        Design::Level2 => n * k <= n_pop,
    }
}

/// One measured unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    /// 1-based set number h in draw order.
    pub set_index: usize,
    pub in_set_rank: usize,
    /// Label of the unit in the population (1-based).
    pub population_id: usize,
    /// Position of the unit in the population ranking order (1-based); the
    /// index used to look up inclusion probabilities.
    pub population_rank: usize,
    pub value: f64,
}

/// Result of a draw, with the full membership of every set for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSetSample {
    pub spec: DesignSpec,
    pub ranking_mode: RankingMode,
    pub entries: Vec<SampleEntry>,
    /// Population labels of each set's members in ranked order.
    pub set_members: Vec<Vec<usize>>,
    /// Units left in the pool after the last set.
    pub remaining_pool: usize,
}

impl RankedSetSample {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds a sample from externally recorded measurements (e.g. field
    /// data), without set-membership detail.
    pub fn from_entries(spec: DesignSpec, ranking_mode: RankingMode, entries: Vec<SampleEntry>) -> Result<Self> {
        spec.validate()?;
        if entries.len() != spec.sample_size() {
            return Err(RssError::invalid(format!(
                "sample has {} entries, design expects n = {}",
                entries.len(),
                spec.sample_size()
            )));
        }
        let set_members = entries.iter().map(|e| vec![e.population_id]).collect();
        Ok(RankedSetSample {
            spec,
            ranking_mode,
            entries,
            set_members,
            remaining_pool: 0,
        })
    }
}

/// Raw draw on unit indices `0..n_pop`, ranked by `rank_key`.
#[derive(Debug, Clone)]
pub(crate) struct Draw {
    pub sets: Vec<Vec<usize>>,
    pub measured: Vec<usize>,
    pub remaining: usize,
}

/// Executes the set-by-set procedure. `rank_key(u)` is the ranking position
/// of unit `u` (0-based, a permutation of `0..n_pop`).
pub(crate) fn draw_indices<R, K>(n_pop: usize, spec: &DesignSpec, rank_key: K, rng: &mut R) -> Draw
where
    R: Rng + ?Sized,
    K: Fn(usize) -> usize,
{
    let n = spec.sample_size();
    if spec.design == Design::Srs {
        let picked = index::sample(rng, n_pop, n).into_vec();
        return Draw {
            sets: picked.iter().map(|&u| vec![u]).collect(),
            measured: picked,
            remaining: n_pop - n,
        };
    }

    let k = spec.k;
    let mut pool: Vec<usize> = (0..n_pop).collect();
    let mut sets = Vec::with_capacity(n);
    let mut measured = Vec::with_capacity(n);
    for &r in &spec.rank_pattern {
        let mut positions = index::sample(rng, pool.len(), k).into_vec();
        let mut members: Vec<usize> = positions.iter().map(|&p| pool[p]).collect();
        members.sort_by_key(|&u| rank_key(u));
        let chosen = members[r - 1];
        match spec.design {
            Design::Level0 | Design::Srs => {}
            Design::Level1 => {
                let at = positions
                    .iter()
                    .copied()
                    .find(|&p| pool[p] == chosen)
                    .expect("measured unit comes from the pool");
                pool.swap_remove(at);
            }
            Design::Level2 => {
                positions.sort_unstable_by(|a, b| b.cmp(a));
                for p in positions {
                    pool.swap_remove(p);
                }
            }
        }
        measured.push(chosen);
        sets.push(members);
    }
    Draw {
        sets,
        measured,
        remaining: pool.len(),
    }
}

/// Simple random sample of `n` distinct units, in draw order.
pub fn draw_srs_wor<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<RankedSetSample> {
    let spec = DesignSpec::srs(n)?;
    spec.ensure_feasible(pop.len())?;
    Ok(assemble(pop, spec, RankingMode::Perfect, draw_indices(pop.len(), &DesignSpec::srs(n)?, |u| u, rng)))
}

/// Draws a ranked set sample according to `spec`.
pub fn draw_rss<R: Rng + ?Sized>(
    pop: &Population,
    spec: &DesignSpec,
    ranking_mode: RankingMode,
    rng: &mut R,
) -> Result<RankedSetSample> {
    spec.ensure_feasible(pop.len())?;
    let draw = match ranking_mode {
        RankingMode::Perfect => draw_indices(pop.len(), spec, |u| u, rng),
        RankingMode::ByAuxiliary => {
            if pop.aux_values().is_none() {
                return Err(RssError::MissingAuxiliary);
            }
            let ranks = pop.judgment_ranks();
            draw_indices(pop.len(), spec, |u| ranks[u] - 1, rng)
        }
    };
    Ok(assemble(pop, spec.clone(), ranking_mode, draw))
}

fn assemble(pop: &Population, spec: DesignSpec, ranking_mode: RankingMode, draw: Draw) -> RankedSetSample {
    let rank_of = |u: usize| match ranking_mode {
        RankingMode::Perfect => u + 1,
        RankingMode::ByAuxiliary => pop.judgment_ranks()[u],
    };
    let entries = draw
        .measured
        .iter()
        .enumerate()
        .map(|(h, &u)| SampleEntry {
            set_index: h + 1,
            in_set_rank: if spec.design == Design::Srs { 1 } else { spec.rank_pattern[h] },
            population_id: u + 1,
            population_rank: rank_of(u),
            value: pop.x_values()[u],
        })
        .collect();
    RankedSetSample {
        spec,
        ranking_mode,
        entries,
        set_members: draw
            .sets
            .into_iter()
            .map(|s| s.into_iter().map(|u| u + 1).collect())
            .collect(),
        remaining_pool: draw.remaining,
    }
}
