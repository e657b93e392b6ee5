//! Ranked set sampling (RSS) for finite populations.
//!
//! The crate covers the full workflow for estimating a finite-population
//! distribution function from a ranked set sample:
//!
//! - [`population`]: reproducible quantile-grid populations, an auxiliary
//!   ranking variable with controllable correlation, and the true EDF.
//! - [`designs`]: simple random sampling without replacement and the
//!   level-0, level-1 and level-2 RSS draw procedures, which differ only in
//!   what is returned to the pool after each set.
//! - [`inclusion`]: first- and second-order inclusion probabilities, from
//!   closed forms, exact enumeration / recursion, or Monte Carlo.
//! - [`estimators`]: the Hájek-type EDF, its design variance and the
//!   Sen-Yates-Grundy variance estimator, pointwise and median confidence
//!   intervals, and the variance decomposition used to compare designs.
//! - [`simulation`]: relative-efficiency experiments under perfect and
//!   imperfect ranking with bit-reproducible parallel Monte Carlo.
//! - [`cli`]: the `rsskit` command-line front end.
//!
//! Population units are labelled `1..=N`. Inclusion tables are indexed by
//! *population rank* (the position of a unit in the ranking order), which
//! coincides with the label for a sorted population under perfect ranking.

pub mod cli;
pub mod combinatorics;
pub mod designs;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod inclusion;
pub mod io;
pub mod population;
pub mod rng;
pub mod simulation;

pub use designs::{Design, DesignSpec, RankedSetSample, RankingMode, SampleEntry};
pub use error::{Result, RssError};
pub use estimators::EdfEstimate;
pub use inclusion::{InclusionMethod, InclusionTable};
pub use population::{DistributionKind, Population};
