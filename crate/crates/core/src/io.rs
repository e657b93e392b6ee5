//! CSV and JSON formats.
//!
//! | file            | layout                                                     |
//! |-----------------|------------------------------------------------------------|
//! | population      | `id,x,y,rank`                                              |
//! | sample          | `set_index,in_set_rank,population_id,value,measured`       |
//! | inclusion table | JSON: `N, design, k, m, rank_pattern, method, first_order, second_order[, standard_errors]` |
//! | EDF             | `x,F_hat`                                                  |
//! | simulation      | `design,p,bias,variance,mse,re,re_se`                      |

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::designs::{Design, DesignSpec, RankedSetSample};
use crate::error::{Result, RssError};
use crate::estimators::EdfEstimate;
use crate::inclusion::{InclusionMethod, InclusionTable};
use crate::population::Population;
use crate::simulation::REResult;

#[derive(Debug, Serialize, Deserialize)]
struct PopulationRow {
    id: usize,
    x: Option<f64>,
    #[serde(default)]
    y: Option<f64>,
    #[serde(default)]
    rank: Option<usize>,
}

pub fn write_population<W: Write>(pop: &Population, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &x) in pop.x_values().iter().enumerate() {
        w.serialize(PopulationRow {
            id: i + 1,
            x: Some(x),
            y: pop.aux_values().map(|a| a[i]),
            rank: Some(pop.judgment_ranks()[i]),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Population rows as read, before validation; `x` may be missing (units
/// not yet measured, as in a field session).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRecord {
    pub id: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub rank: Option<usize>,
}

pub fn read_population_records<R: Read>(input: R) -> Result<Vec<PopulationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut rows = Vec::new();
    for (line, rec) in rdr.deserialize::<PopulationRow>().enumerate() {
        let r = rec?;
        if r.id != line + 1 {
            return Err(RssError::Parse(format!("population ids must run 1..N in order; row {} has id {}", line + 1, r.id)));
        }
        rows.push(PopulationRecord {
            id: r.id,
            x: r.x,
            y: r.y,
            rank: r.rank,
        });
    }
    if rows.is_empty() {
        return Err(RssError::Parse("population file has no rows".into()));
    }
    Ok(rows)
}

/// Reads a complete population. Judgment ranks come from `y` when present,
/// else from an explicit `rank` column, else the identity.
pub fn read_population<R: Read>(input: R) -> Result<Population> {
    let rows = read_population_records(input)?;
    let x: Vec<f64> = rows
        .iter()
        .map(|r| r.x.ok_or_else(|| RssError::Parse(format!("unit {} has no x value", r.id))))
        .collect::<Result<_>>()?;
    let pop = Population::new(x)?;
    if rows.iter().all(|r| r.y.is_some()) {
        return pop.with_auxiliary_values(rows.iter().map(|r| r.y.unwrap()).collect());
    }
    if rows.iter().all(|r| r.rank.is_some()) {
        let ranks: Vec<usize> = rows.iter().map(|r| r.rank.unwrap()).collect();
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        if sorted != (1..=ranks.len()).collect::<Vec<_>>() {
            return Err(RssError::Parse("rank column is not a permutation of 1..N".into()));
        }
        if ranks.iter().enumerate().all(|(i, &r)| r == i + 1) {
            return Ok(pop);
        }
        return pop.with_auxiliary_values(ranks.iter().map(|&r| r as f64).collect());
    }
    Ok(pop)
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    set_index: usize,
    in_set_rank: usize,
    population_id: Option<usize>,
    value: Option<f64>,
    measured: u8,
}

/// Writes measured rows and, for RSS designs, the unmeasured members of
/// each set (blank value, `measured = 0`).
pub fn write_sample<W: Write>(sample: &RankedSetSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (h, e) in sample.entries.iter().enumerate() {
        w.serialize(SampleRow {
            set_index: e.set_index,
            in_set_rank: e.in_set_rank,
            population_id: Some(e.population_id),
            value: Some(e.value),
            measured: 1,
        })?;
        if sample.spec.design == Design::Srs {
            continue;
        }
        if let Some(members) = sample.set_members.get(h) {
            for (pos, &id) in members.iter().enumerate() {
                if id != e.population_id {
                    w.serialize(SampleRow {
                        set_index: e.set_index,
                        in_set_rank: pos + 1,
                        population_id: Some(id),
                        value: None,
                        measured: 0,
                    })?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// A measured row from a sample file; the population label may be unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub set_index: usize,
    pub in_set_rank: usize,
    pub population_id: Option<usize>,
    pub value: f64,
}

/// Measured rows of a sample CSV, in set order.
pub fn read_sample_records<R: Read>(input: R) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<SampleRow>() {
        let r = rec?;
        match r.measured {
            0 => continue,
            1 => {}
            other => return Err(RssError::Parse(format!("measured must be 0 or 1, got {other}"))),
        }
        let value = r
            .value
            .ok_or_else(|| RssError::Parse(format!("set {} has a measured row without a value", r.set_index)))?;
        out.push(SampleRecord {
            set_index: r.set_index,
            in_set_rank: r.in_set_rank,
            population_id: r.population_id,
            value,
        });
    }
    if out.is_empty() {
        return Err(RssError::EmptySample);
    }
    out.sort_by_key(|r| r.set_index);
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct InclusionJson {
    #[serde(rename = "N")]
    n: usize,
    design: Design,
    k: usize,
    m: usize,
    rank_pattern: Vec<usize>,
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
    first_order: Vec<f64>,
    second_order: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standard_errors: Option<Vec<f64>>,
}

pub fn write_inclusion_json<W: Write>(table: &InclusionTable, out: W) -> Result<()> {
    let (reps, standard_errors) = match &table.method {
        InclusionMethod::MonteCarlo { reps, standard_errors } => (Some(*reps), Some(standard_errors.clone())),
        _ => (None, None),
    };
    let doc = InclusionJson {
        n: table.n_pop,
        design: table.spec.design,
        k: table.spec.k,
        m: table.spec.m,
        rank_pattern: table.spec.rank_pattern.clone(),
        method: table.method.name().to_string(),
        reps,
        first_order: table.first_order.clone(),
        second_order: table.second_order.clone(),
        standard_errors,
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

pub fn read_inclusion_json<R: Read>(input: R) -> Result<InclusionTable> {
    let doc: InclusionJson = serde_json::from_reader(input)?;
    let spec = DesignSpec {
        design: doc.design,
        k: doc.k,
        m: doc.m,
        rank_pattern: doc.rank_pattern,
    };
    spec.validate()?;
    if doc.first_order.len() != doc.n || doc.second_order.len() != doc.n * doc.n {
        return Err(RssError::Parse("inclusion table arrays do not match N".into()));
    }
    let method = match doc.method.as_str() {
        "closed_form" => InclusionMethod::ClosedForm,
        "exact_enumeration" => InclusionMethod::ExactEnumeration,
        "monte_carlo" => InclusionMethod::MonteCarlo {
            reps: doc.reps.unwrap_or(0),
            standard_errors: doc.standard_errors.unwrap_or_default(),
        },
        other => return Err(RssError::Parse(format!("unknown inclusion method '{other}'"))),
    };
    Ok(InclusionTable {
        n_pop: doc.n,
        spec,
        first_order: doc.first_order,
        second_order: doc.second_order,
        method,
    })
}

/// One `x,F_hat` row per plateau.
pub fn write_edf<W: Write>(edf: &EdfEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "F_hat"])?;
    for (x, f) in edf.support().iter().zip(edf.cum_weights()) {
        w.write_record([x.to_string(), format!("{f:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_simulation_csv<W: Write>(result: &REResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["design", "p", "bias", "variance", "mse", "re", "re_se"])?;
    for r in &result.rows {
        w.write_record([
            r.design.to_string(),
            r.p.to_string(),
            r.bias.to_string(),
            r.variance.to_string(),
            r.mse.to_string(),
            r.re.to_string(),
            r.re_se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
