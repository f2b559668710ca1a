//! Verification toolkit for sum-set entropy inequalities over power-level
//! partitioned integer signals.
//!
//! The layers build on each other: [`power`] does the exact partition
//! arithmetic, [`channel`] the floor linear combinations, [`entropy`] the
//! exact pushforward entropies, [`sumset`] and [`ais`] the inequality and
//! aligned-image-set checks, and [`gdof`] the region and certificate work.

pub mod ais;
pub mod channel;
pub mod entropy;
pub mod error;
pub mod gdof;
pub mod power;
pub mod sumset;

pub use ais::{
    alignment_classes, all_pairs_check, expected_cardinality, growth_check, pairwise_alignment_probability,
    quadrature_cardinality, AlignmentOracle, AllPairsReport, AlignmentPartition, AlignmentReport, GrowthReport, PairEstimate, DEFAULT_ORACLE_CAP,
};
pub use channel::{
    draw_channel, lincomb, mimo_ic_outputs, range_bound, t_length, BandSelector, CoefficientFamily, CoefficientKind,
    CoefficientSampler, CombinationSpec, FixedCoefficients, MimoChannel, MimoIcConfig, SamplerConfig, Term, Trim, DEFAULT_SEED,
};
pub use error::{Error, Result};
pub use gdof::{
    check_certificate, lemma1_numeric_check, lemma1_submodular_steps, theorem5_region, vertices, Certificate,
    CertificateSpec, HalfPlane, LemmaConfig, Point, Registry,
};
pub use power::{compose, decompose, part_low, part_window, pfloor, IntVector, Level, LevelVector, PowerContext, Rational};
pub use sumset::{
    cond_entropy_given_coeffs, multi_antenna_instance, realize_outputs, theorem1_instance, three_layer_instance,
    verify_sweep, CompiledInstance, ConditionCheck, FixedCoefficientPolicy, GapReport, GapTrend, InputModel,
    InstanceSource, OutputSelector, Preset, SweepOptions, SweepPoint, TheoremInstance, TrimOverride, DEFAULT_SUPPORT_CAP,
};
