//! Annotation reliability and stability analytics.
//!
//! Inter-annotator agreement (reliability) is measured within a round;
//! intra-annotator agreement (stability) across repeat rounds. Together
//! they place a dataset, or a single item, in one cell of the
//! reliability-stability matrix ([`quadrant`]). The [`association`] module
//! relates item instability to expert rationalisations, and [`simulator`]
//! generates data with known causes to validate the whole pipeline.

pub mod annotation;
pub mod association;
pub mod cli;
pub mod error;
pub mod quadrant;
pub mod reliability;
pub mod report;
pub mod resample;
pub mod simulator;
pub mod stability;

pub use annotation::{
    build_repeat_pairs, coincidence_counts, validate_dataset, AnnotationRecord, AnnotationSet,
    CoincidenceMatrix, LabelSchema, Pairing, RawRecord, RepeatPair, RoundSelector, ScaleKind,
};
pub use association::{
    build_contingency, permutation_p, phi, resolve_rationalisation, AssociationResult,
    ContingencyTable, Rationale, RationalisationRecord,
};
pub use error::{Error, ErrorKind, Result};
pub use quadrant::{
    classify, classify_dataset, classify_items, Quadrant, QuadrantAssignment, QuadrantThresholds,
};
pub use reliability::{
    bootstrap_ci, cohens_kappa, fleiss_kappa, icc, krippendorff_alpha, percent_agreement,
    AgreementResult, MetricSpec,
};
pub use resample::BootstrapOptions;
pub use simulator::{recovery_accuracy, simulate, ItemCause, SimConfig, SimTruth};
pub use stability::{
    dataset_stability, interval_profile, item_stability_labels, self_agreement, StabilityResult,
};
