//! Two-way fixed effects regressions with several treatments: weight
//! decompositions of the TWFE coefficient, heterogeneity-robust
//! switcher/stayer estimators, dynamic effects in staggered designs, and a
//! simulation harness with known potential outcomes.

pub mod error;
pub mod linalg;
pub mod panel;

pub mod decomposition;
pub mod didm;
pub mod staggered;

pub mod bootstrap;
pub mod report;
pub mod sim;

pub use decomposition::{decompose, first_stage, summarize, twfe_coefficient, WeightDecomposition};
pub use didm::{didm, find_switchers, DidmResult};
pub use error::{Error, Result};
pub use panel::{load_panel, LoadOptions, PanelDataset, PanelRow};
pub use staggered::{build_cohorts, did_ell, placebo_ell, CohortStructure, DynamicEffectResult};
