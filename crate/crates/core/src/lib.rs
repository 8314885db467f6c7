//! Volumetric MRI classification pipeline for Parkinson's disease (PD) versus
//! healthy controls (HC).
//!
//! The crate consumes per-subject region volume tables (FreeSurfer aseg-style
//! stats files or flat CSVs), assembles a subjects × features matrix, optionally
//! augments the negative class, and evaluates logistic regression, random
//! forest and kernel SVM classifiers with nested, stratified cross-validation.
//!
//! ```no_run
//! use pdvol_core::model_selection::{default_grid, nested_cv, Classifier, Execution, NestedCvConfig};
//! use pdvol_core::synth::{generate_cohort, CohortSpec};
//!
//! let ds = generate_cohort(&CohortSpec::balanced(300, 300, 5, 1.0, 7)).unwrap();
//! let grid = default_grid(Classifier::Lr);
//! let report = nested_cv(&ds, &grid, &NestedCvConfig::default(), &Execution::Serial).unwrap();
//! println!("{:.3} {:.3}", report.mean_test_accuracy, report.mean_auc);
//! ```

pub mod dataset;
pub mod error;
pub mod forest;
pub mod ingest;
pub mod linear;
pub mod metrics;
pub mod model_io;
pub mod model_selection;
pub mod numfmt;
pub mod svm;
pub mod synth;

pub use dataset::{Label, LabeledDataset, Matrix};
pub use error::{Error, Result};
