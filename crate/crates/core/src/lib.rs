//! Hierarchical k-anonymization and the downcoding / predicate
//! singling-out attacks against minimal anonymizers, with quasi-identifier
//! audits and a seeded experiment harness.

pub mod anonymizer;
pub mod attacks;
pub mod audit;
pub mod error;
pub mod fixtures;
pub mod generators;
pub mod harness;
pub mod hierarchy;
pub mod io;
pub mod model;
pub mod stats;

pub use anonymizer::{
    anonymize, apply_move, brute_force_is_minimal, group_flush, initial_anonymize, minimize, simul_flush,
    single_flush, AnonymizerConfig, RefinementMove, Strategy,
};
pub use error::{Error, HierarchyError, Result};
pub use harness::{run_experiment, DistributionConfig, ExperimentConfig, ExperimentReport, Theorem};
pub use hierarchy::{AttributeDomain, GeneralizedValue, Hierarchy, HierarchyNode, NodeId, ValueSet};
pub use model::{
    dataset_refines, effective_anonymity, generalizes_dataset, is_k_anonymous, refines, Dataset,
    DatasetRefinementReport, GeneralizedDataset, GeneralizedRecord, Hierarchies, QuasiIdentifier, Record,
    RefinementRelation,
};
