//! Estimate suites: empirical constants, exponent bookkeeping and reports.

pub mod boundary;
pub mod common;
pub mod context;
pub mod exponents;
pub mod global;
pub mod green;
pub mod identity;
pub mod interior;
pub mod invariance;
pub mod maximal;
pub mod maxprinciple;
pub mod nfunctional;
pub mod report;
pub mod suites;

pub use exponents::Exponents;
pub use maximal::{maximal_function, strong_type_report, MaximalField};
pub use nfunctional::{n_field, n_functional, n_functional_sup, NFunctionalSpec};
pub use report::{spread, verdict, Check, EstimateReport, Trial, Verdict, CSV_HEADER, CSV_SCHEMA, DEFAULT_TOLERANCE};
pub use suites::{Suite, SuiteRegistry};
pub use context::{DomainSpec, PotentialChoice, SuiteContext};
