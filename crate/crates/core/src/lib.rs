//! Numerical core for misinformation-consumption analyses.
//!
//! Everything here is pure and allocation-only (`no_std` + `alloc`):
//!
//! - [`zeta`]: Hurwitz zeta and its derivative in the exponent.
//! - [`powerlaw`]: discrete power-law sampling, maximum-likelihood fitting,
//!   CCDFs and the Wald comparison of scaling exponents.
//! - [`survival`]: Kaplan-Meier curves and the Peto & Peto weighted log-rank test.
//! - [`leaning`]: user leaning, average neighborhood leaning over a follow
//!   graph, joint leaning densities and their correlation.
//! - [`credibility`]: outlet records and the Questionable/Reliable heuristic.
//! - [`stats`]: chi-squared tail probabilities and Pearson correlation.
#![no_std]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod credibility;
pub mod leaning;
pub mod powerlaw;
pub mod stats;
pub mod survival;
pub mod zeta;

pub use credibility::{
    classify_outlet, majority_label, ClassifierConfig, CredibilityLabel, MbfcCategory, NgSpecial,
    OutletRecord, Provider, RecordError,
};
pub use leaning::{
    joint_density, leaning_correlation, neighborhood_leaning, user_leaning, Correlation,
    FollowGraph, JointDensityConfig, JointLeaningDensity, LeaningError, LeaningVector,
    NeighborhoodLeaning, UserLeaning,
};
pub use powerlaw::{
    ccdf, fit_discrete_powerlaw, sample_powerlaw, wald_compare, FitError, PowerLawFit,
    PowerLawSampler, WaldResult, XMin,
};
pub use survival::{
    kaplan_meier, peto_peto, Observation, PetoPetoResult, SurvivalCurve, SurvivalError,
    SurvivalPoint,
};
pub use zeta::{hurwitz_zeta, ZetaError};
