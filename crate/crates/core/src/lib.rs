//! Exact arithmetic for wild ramification invariants of equal-characteristic
//! complete discrete valuation fields with possibly imperfect residue fields.
//!
//! The crate computes Swan conductors and refined Swan conductors of
//! Artin-Schreier-Witt characters over towers built from constant, tame, and
//! Artin-Schreier steps, the torsion defect `delta_tor` of relative log
//! differentials, and the associated piecewise-linear Hasse-Herbrand
//! functions. A brute-force oracle layer re-derives the same quantities by
//! exhaustive search and independent formulas so the two routes can be
//! cross-checked exactly.

pub mod error;
pub mod logdiff;
pub mod probe;
pub mod residue;
pub mod series;
pub mod tower;
pub mod swan;
pub mod witt;

pub use error::{Error, Result};
pub use logdiff::LogForm;
pub use probe::{Probe, ProbeKind, TameTwist};
pub use residue::{RatFun, ResidueField};
pub use series::Series;
pub use swan::{AswCharacter, BestReduction, Certainty, RefinedSwan};
pub use witt::WittVector;
pub use tower::{FieldElement, LevelKind, Tower, Val};
