//! Aligned image sets by exhaustive enumeration.
//!
//! Every distinct value `z′` of the component outputs `(Z_{1,1}, …, Z_{1,l})`
//! gets one canonical preimage, the lexicographically smallest input
//! realization producing it. For a coefficient draw `g`, two values align
//! when their canonical preimages give the same `Z = L^b(X)`; the aligned
//! image set of `ν` is its class.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CoefficientFamily, CoefficientSampler, SamplerConfig};
use crate::entropy::StateSpace;
use crate::error::{Error, Result};
use crate::power::PowerContext;
use crate::sumset::{least_squares, CompiledInstance, TheoremInstance};

pub const DEFAULT_ORACLE_CAP: u64 = 1 << 16;

/// Realizations of a state space with positive mass, in lexicographic order.
pub fn support_tuples(space: &StateSpace<'_>, cap: u64) -> Result<Vec<Vec<u64>>> {
    space.check_cap(cap)?;
    Ok(match *space {
        StateSpace::Product { columns, alphabet } => {
            let total = alphabet.pow(columns as u32);
            (0..total)
                .map(|mut i| {
                    let mut t = vec![0; columns];
                    for c in (0..columns).rev() {
                        t[c] = i % alphabet;
                        i /= alphabet;
                    }
                    t
                })
                .collect()
        }
        StateSpace::Diagonal { columns, alphabet } => (0..alphabet).map(|v| vec![v; columns]).collect(),
        StateSpace::Weighted { tuples, weights } => {
            let mut t: Vec<Vec<u64>> =
                tuples.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(t, _)| t.clone()).collect();
            t.sort();
            t.dedup();
            t
        }
    })
}

/// Canonical preimages of every distinct `z′` for a single-output,
/// single-letter instance.
#[derive(Clone, Debug)]
pub struct AlignmentOracle {
    compiled: CompiledInstance,
    images: Vec<Vec<i64>>,
    reps: Vec<Vec<u64>>,
    f_max: f64,
}

impl AlignmentOracle {
    /// `w` restricts the enumeration to realizations with `W = w`.
    pub fn new(instance: &TheoremInstance, ctx: &PowerContext, w: Option<i64>, cap: u64) -> Result<Self> {
        if instance.outputs() != 1 || instance.letters != 1 {
            return Err(Error::Instance("alignment oracle needs K = 1 and a single letter".into()));
        }
        if instance.bounded_density_rhs {
            return Err(Error::Instance("alignment oracle needs fixed component constants".into()));
        }
        let compiled = instance.compile(ctx)?;
        if w.is_some() && instance.conditioning.is_none() {
            return Err(Error::Instance("a value of W was given but the instance has no W".into()));
        }
        let mut first: BTreeMap<Vec<i64>, Vec<u64>> = BTreeMap::new();
        for x in support_tuples(&compiled.state_space(), cap)? {
            if w.is_some() && compiled.conditioning_value(&x) != w {
                continue;
            }
            first.entry(compiled.component_values(&x)).or_insert(x);
        }
        if first.is_empty() {
            return Err(Error::Instance("no realization has the requested W".into()));
        }
        let (images, reps) = first.into_iter().unzip();
        Ok(AlignmentOracle { compiled, images, reps, f_max: instance.sampler.f_max })
    }

    pub fn distinct(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[Vec<i64>] {
        &self.images
    }

    pub fn representatives(&self) -> &[Vec<u64>] {
        &self.reps
    }

    pub fn compiled(&self) -> &CompiledInstance {
        &self.compiled
    }

    /// Index of the `z′` produced by realization `x`.
    pub fn index_of(&self, x: &[u64]) -> Result<usize> {
        let z = self.compiled.component_values(x);
        self.images.binary_search(&z).map_err(|_| Error::Instance(format!("{x:?} is outside the enumerated support")))
    }

    /// `Z` of every canonical preimage under coefficients `g`.
    pub fn z_values(&self, g: &[f64]) -> Vec<i64> {
        self.reps.iter().map(|x| self.compiled.combined_value(x, g)).collect()
    }

    /// `min(1, 2N·f_max / max_j |μ_j − ν_j|)` over the canonical preimages.
    pub fn pair_cap(&self, a: usize, b: usize) -> f64 {
        let n = self.reps[a].len() as f64;
        let spread = self.reps[a].iter().zip(&self.reps[b]).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0);
        if spread == 0 {
            return 1.0;
        }
        (2.0 * n * self.f_max / spread as f64).min(1.0)
    }

    /// `Σ_{z′} P_a(z′, ν)`, counting `ν` itself once.
    pub fn union_bound(&self, nu: usize) -> f64 {
        (0..self.distinct()).map(|a| if a == nu { 1.0 } else { self.pair_cap(a, nu) }).sum()
    }
}

/// Distinct `z′` indices grouped by the `Z` of their canonical preimage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentPartition {
    pub classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl AlignmentPartition {
    pub fn from_z(z: &[i64]) -> Self {
        let mut by_z: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &v) in z.iter().enumerate() {
            by_z.entry(v).or_default().push(i);
        }
        let classes: Vec<Vec<usize>> = by_z.into_values().collect();
        let mut class_of = vec![0; z.len()];
        for (c, members) in classes.iter().enumerate() {
            for &i in members {
                class_of[i] = c;
            }
        }
        AlignmentPartition { classes, class_of }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    /// `|S_ν|`.
    pub fn size_of(&self, nu: usize) -> usize {
        self.classes[self.class_of[nu]].len()
    }

    pub fn max_size(&self) -> usize {
        self.classes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Average of `|S_ν|` over every `ν`.
    pub fn mean_size(&self) -> f64 {
        let n = self.class_of.len() as f64;
        self.classes.iter().map(|c| (c.len() * c.len()) as f64).sum::<f64>() / n
    }
}

pub fn alignment_classes(oracle: &AlignmentOracle, g: &[f64]) -> AlignmentPartition {
    AlignmentPartition::from_z(&oracle.z_values(g))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub draws: usize,
    pub distinct_images: usize,
    /// Canonical preimage of the designated `ν`.
    pub designated: Vec<u64>,
    /// Mean over draws of `|S_ν|` for the designated `ν`.
    pub expected_cardinality: f64,
    pub expected_cardinality_std_error: f64,
    /// Mean over draws of `max_ν |S_ν|`.
    pub expected_max_cardinality: f64,
    /// Mean over draws and over every `ν` of `|S_ν|`.
    pub mean_cardinality: f64,
    /// Union bound `Σ_{z′} P_a(z′, ν)` for the designated `ν`.
    pub analytic_bound: f64,
    pub preimage_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_sizes: Option<Vec<Vec<usize>>>,
}

/// Coefficients for the single combined output, one per source.
fn draw_g(sampler: &CoefficientSampler, d: usize, n: usize) -> Vec<f64> {
    let mut s = sampler.fork(d as u64);
    (0..n).map(|_| s.draw()).collect()
}

/// Averages class statistics over coefficient draws. `nu` defaults to the
/// image of the all-zero realization (or the first image when that is
/// outside the support).
pub fn expected_cardinality(
    oracle: &AlignmentOracle,
    sampler: &CoefficientSampler,
    draws: usize,
    nu: Option<usize>,
    keep_histogram: bool,
) -> Result<AlignmentReport> {
    if draws == 0 {
        return Err(Error::Invalid("at least one draw is required".into()));
    }
    let n = oracle.reps[0].len();
    let nu = match nu {
        Some(i) if i < oracle.distinct() => i,
        Some(i) => return Err(Error::IndexOutOfBounds { index: i, len: oracle.distinct() }),
        None => oracle.index_of(&vec![0; n]).unwrap_or(0),
    };
    let per_draw: Vec<(usize, usize, f64, Option<Vec<usize>>)> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let p = alignment_classes(oracle, &draw_g(sampler, d, n));
            (p.size_of(nu), p.max_size(), p.mean_size(), keep_histogram.then(|| p.sizes()))
        })
        .collect();
    let nd = draws as f64;
    let mean = per_draw.iter().map(|r| r.0 as f64).sum::<f64>() / nd;
    let var = if draws > 1 {
        per_draw.iter().map(|r| (r.0 as f64 - mean).powi(2)).sum::<f64>() / (nd - 1.0)
    } else {
        0.0
    };
    Ok(AlignmentReport {
        draws,
        distinct_images: oracle.distinct(),
        designated: oracle.reps[nu].clone(),
        expected_cardinality: mean,
        expected_cardinality_std_error: (var / nd).sqrt(),
        expected_max_cardinality: per_draw.iter().map(|r| r.1 as f64).sum::<f64>() / nd,
        mean_cardinality: per_draw.iter().map(|r| r.2).sum::<f64>() / nd,
        analytic_bound: oracle.union_bound(nu),
        preimage_rule: "lexicographically smallest realization".into(),
        class_sizes: keep_histogram.then(|| per_draw.into_iter().filter_map(|r| r.3).collect()),
    })
}

/// `E|S_ν|` by midpoint quadrature over the coefficient density for two
/// sources, `resolution` being the grid step.
pub fn quadrature_cardinality(oracle: &AlignmentOracle, config: &SamplerConfig, nu: usize, resolution: f64) -> Result<f64> {
    if oracle.reps[0].len() != 2 {
        return Err(Error::Invalid("quadrature covers two coefficients".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::Invalid("quadrature step must be positive".into()));
    }
    let steps = ((config.delta2 - config.delta1) / resolution).round().max(1.0) as usize;
    let h = (config.delta2 - config.delta1) / steps as f64;
    let mut nodes: Vec<f64> = (0..steps).map(|i| config.delta1 + (i as f64 + 0.5) * h).collect();
    if config.family == CoefficientFamily::UniformMagnitudeSigned {
        let neg: Vec<f64> = nodes.iter().map(|v| -v).collect();
        nodes.extend(neg);
    }
    let total: u64 = nodes
        .par_iter()
        .map(|&g1| {
            nodes
                .iter()
                .map(|&g2| {
                    let g = [g1, g2];
                    let znu = oracle.compiled.combined_value(&oracle.reps[nu], &g);
                    oracle.reps.iter().filter(|x| oracle.compiled.combined_value(x, &g) == znu).count() as u64
                })
                .sum::<u64>()
        })
        .sum();
    Ok(total as f64 / (nodes.len() * nodes.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub first: Vec<u64>,
    pub second: Vec<u64>,
    pub collisions: u64,
    pub draws: usize,
    pub frequency: f64,
    pub cap: f64,
    /// Binomial standard deviation of the frequency at the cap.
    pub sigma: f64,
    pub within_cap: bool,
}

impl PairEstimate {
    fn new(oracle: &AlignmentOracle, a: usize, b: usize, collisions: u64, draws: usize) -> Self {
        let cap = oracle.pair_cap(a, b);
        let frequency = collisions as f64 / draws as f64;
        let sigma = (cap * (1.0 - cap) / draws as f64).sqrt();
        PairEstimate {
            first: oracle.reps[a].clone(),
            second: oracle.reps[b].clone(),
            collisions,
            draws,
            frequency,
            cap,
            sigma,
            within_cap: frequency <= cap + 3.0 * sigma,
        }
    }
}

/// Collision frequency of two realizations' images against the analytic cap.
pub fn pairwise_alignment_probability(
    oracle: &AlignmentOracle,
    first: &[u64],
    second: &[u64],
    sampler: &CoefficientSampler,
    draws: usize,
) -> Result<PairEstimate> {
    let (a, b) = (oracle.index_of(first)?, oracle.index_of(second)?);
    if a == b {
        return Err(Error::Invalid("the two realizations produce the same component outputs".into()));
    }
    if draws == 0 {
        return Err(Error::Invalid("at least one draw is required".into()));
    }
    let n = first.len();
    let collisions = (0..draws)
        .into_par_iter()
        .filter(|&d| {
            let g = draw_g(sampler, d, n);
            oracle.compiled.combined_value(&oracle.reps[a], &g) == oracle.compiled.combined_value(&oracle.reps[b], &g)
        })
        .count() as u64;
    Ok(PairEstimate::new(oracle, a, b, collisions, draws))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllPairsReport {
    pub pairs: u64,
    pub draws: usize,
    pub violations: Vec<PairEstimate>,
    /// Largest `frequency − cap` over all pairs.
    pub worst_excess: f64,
}

impl AllPairsReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

const PAIR_MATRIX_LIMIT: usize = 4096;

/// Every pair of distinct images checked against its cap with shared draws.
pub fn all_pairs_check(oracle: &AlignmentOracle, sampler: &CoefficientSampler, draws: usize) -> Result<AllPairsReport> {
    let m = oracle.distinct();
    if m > PAIR_MATRIX_LIMIT {
        return Err(Error::SupportCap { required: m as u128, cap: PAIR_MATRIX_LIMIT as u64 });
    }
    if draws == 0 {
        return Err(Error::Invalid("at least one draw is required".into()));
    }
    let n = oracle.reps[0].len();
    let counts = (0..draws)
        .into_par_iter()
        .fold(
            || vec![0u32; m * m],
            |mut acc, d| {
                let p = alignment_classes(oracle, &draw_g(sampler, d, n));
                for class in &p.classes {
                    for (i, &a) in class.iter().enumerate() {
                        for &b in &class[i + 1..] {
                            acc[a * m + b] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; m * m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            let est = PairEstimate::new(oracle, a, b, counts[a * m + b] as u64, draws);
            worst = worst.max(est.frequency - est.cap);
            if !est.within_cap {
                violations.push(est);
            }
        }
    }
    Ok(AllPairsReport { pairs: (m * (m - 1) / 2) as u64, draws, violations, worst_excess: worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub pbar: u64,
    pub distinct_images: usize,
    pub mean_cardinality: f64,
    pub expected_cardinality: f64,
    pub expected_max_cardinality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub points: Vec<GrowthPoint>,
    /// Leading exponent `e` of the model `(a + b·log₂P̄)·P̄^e`.
    pub exponent: f64,
    pub fit_a: f64,
    pub fit_b: f64,
    /// Largest `|fit − value| / value` over the sweep.
    pub max_relative_residual: f64,
    /// Largest ratio between consecutive sweep points.
    pub max_step_ratio: f64,
    /// Least-squares slope of `log₂ E|S|` against `log₂ P̄`.
    pub fitted_exponent: f64,
}

impl GrowthReport {
    pub fn passes(&self, residual: f64, ratio: f64) -> bool {
        self.max_relative_residual < residual && self.max_step_ratio < ratio
    }
}

/// Mean aligned-set size over a `P̄` sweep, fitted against
/// `(a + b·log₂P̄)·P̄^e` with `e` the instance's condition deficit.
pub fn growth_check(
    instance: &TheoremInstance,
    pbars: &[u64],
    sampler: &CoefficientSampler,
    draws: usize,
    cap: u64,
) -> Result<GrowthReport> {
    if pbars.len() < 4 {
        return Err(Error::Invalid(format!("growth check needs at least 4 sweep points, got {}", pbars.len())));
    }
    let exponent = instance.condition_deficit()?.as_f64();
    let mut points = Vec::new();
    for &pbar in pbars {
        let ctx = PowerContext::from_pbar(pbar)?;
        let oracle = AlignmentOracle::new(instance, &ctx, None, cap)?;
        let r = expected_cardinality(&oracle, sampler, draws, None, false)?;
        points.push(GrowthPoint {
            pbar,
            distinct_images: r.distinct_images,
            mean_cardinality: r.mean_cardinality,
            expected_cardinality: r.expected_cardinality,
            expected_max_cardinality: r.expected_max_cardinality,
        });
    }
    let xs: Vec<f64> = pbars.iter().map(|&p| (p as f64).log2()).collect();
    let scaled: Vec<f64> = points.iter().zip(&xs).map(|(p, x)| p.mean_cardinality / 2f64.powf(exponent * x)).collect();
    let (fit_b, fit_a) = least_squares(&xs, &scaled);
    let max_relative_residual = points
        .iter()
        .zip(&xs)
        .map(|(p, x)| {
            let fit = (fit_a + fit_b * x) * 2f64.powf(exponent * x);
            (fit - p.mean_cardinality).abs() / p.mean_cardinality
        })
        .fold(0.0, f64::max);
    let max_step_ratio =
        points.windows(2).map(|w| w[1].mean_cardinality / w[0].mean_cardinality).fold(f64::NEG_INFINITY, f64::max);
    let logs: Vec<f64> = points.iter().map(|p| p.mean_cardinality.log2()).collect();
    let fitted_exponent = least_squares(&xs, &logs).0;
    Ok(GrowthReport { points, exponent, fit_a, fit_b, max_relative_residual, max_step_ratio, fitted_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::Level;
    use crate::sumset::theorem1_instance;

    fn half() -> Level {
        Level::new(1, 2)
    }

    #[test]
    fn support_order_is_lexicographic() {
        let t = support_tuples(&StateSpace::Product { columns: 2, alphabet: 3 }, 100).unwrap();
        assert_eq!(t[0], vec![0, 0]);
        assert_eq!(t[1], vec![0, 1]);
        assert_eq!(t[8], vec![2, 2]);
        assert!(support_tuples(&StateSpace::Product { columns: 3, alphabet: 8 }, 100).is_err());
    }

    #[test]
    fn cap_formula() {
        let inst = theorem1_instance(half(), half()).unwrap();
        let ctx = PowerContext::from_pbar(64).unwrap();
        let o = AlignmentOracle::new(&inst, &ctx, None, DEFAULT_ORACLE_CAP).unwrap();
        // Tops differ by 2 with P̄^{λ₁} = 8: |Δx₁| = 16.
        let a = o.index_of(&[8, 0]).unwrap();
        let b = o.index_of(&[24, 0]).unwrap();
        assert_ne!(a, b);
        assert_eq!(o.pair_cap(a, b), 4.0 / 16.0);
        for i in 0..o.distinct().min(40) {
            for j in 0..o.distinct().min(40) {
                let c = o.pair_cap(i, j);
                assert!((0.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn self_class_is_never_empty() {
        let inst = theorem1_instance(half(), half()).unwrap();
        let ctx = PowerContext::from_pbar(16).unwrap();
        let o = AlignmentOracle::new(&inst, &ctx, None, DEFAULT_ORACLE_CAP).unwrap();
        let s = CoefficientSampler::new(inst.sampler.clone()).unwrap();
        for d in 0..20 {
            let p = alignment_classes(&o, &draw_g(&s, d, 2));
            assert_eq!(p.sizes().iter().sum::<usize>(), o.distinct());
            assert!((0..o.distinct()).all(|nu| p.size_of(nu) >= 1));
        }
    }

    #[test]
    fn identical_pair_rejected() {
        let inst = theorem1_instance(half(), half()).unwrap();
        let ctx = PowerContext::from_pbar(16).unwrap();
        let o = AlignmentOracle::new(&inst, &ctx, None, DEFAULT_ORACLE_CAP).unwrap();
        let s = CoefficientSampler::new(inst.sampler.clone()).unwrap();
        // Same component outputs: swap the two sources.
        assert!(pairwise_alignment_probability(&o, &[1, 2], &[2, 1], &s, 10).is_err());
    }

    #[test]
    fn growth_needs_four_points() {
        let inst = theorem1_instance(half(), half()).unwrap();
        let s = CoefficientSampler::new(inst.sampler.clone()).unwrap();
        assert!(growth_check(&inst, &[4, 8, 16], &s, 10, DEFAULT_ORACLE_CAP).is_err());
    }
}
