//! Generalized degrees of freedom of the two-user MIMO interference channel
//! with partial CSIT: the outer region, exact certificates for its sum-rate
//! and weighted bounds, and a numeric check of the key lemma.

pub mod ledger;
pub mod lemma;
pub mod region;

pub use ledger::{
    check_certificate, Certificate, CertificateCheck, CertificateSpec, CheckSummary, Inequality, InequalitySpec, Ledger,
    PremiseRef, Registry, Relation, TermDict, WeightedPremise, BUILTIN_CERTIFICATES,
};
pub use lemma::{lemma1_numeric_check, lemma1_submodular_steps, lemma_sub_instance, violation, LemmaConfig, StepReport};
pub use region::{contains, hull_contains, is_feasible, summarize, theorem5_region, vertices, HalfPlane, Point, RegionSummary};
