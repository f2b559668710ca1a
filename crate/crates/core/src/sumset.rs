//! Sum-set inequality instances: validation, the level condition, output
//! maps and numeric verification over a power sweep.
//!
//! Indices follow the usual mathematical convention and are 1-based in the
//! public data (`k`, `l`, band `i`, source `j`); sources map to 0-based
//! signal positions only inside combination specs.

use serde::{Deserialize, Serialize};

use crate::channel::{
    lincomb, t_length, BandSelector, CoefficientKind, CoefficientSampler, CombinationSpec, CompiledCombination,
    SamplerConfig, Term, Trim,
};
use crate::entropy::{monte_carlo_mean, pushforward_entropy, EntropyEstimate, EntropyMethod, SeparableOutput, StateSpace};
use crate::error::{Error, Result};
use crate::power::{Level, LevelVector, PowerContext};

pub const DEFAULT_SUPPORT_CAP: u64 = 1 << 20;

/// Joint law of the sources at one time index (or across all letters for tables).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum InputModel {
    /// Independent, uniform on the full alphabet.
    #[default]
    ProductUniform,
    /// One uniform value shared by every source.
    Identical,
    /// Explicit weighted tuples; column `t·N + j` holds source `j` at letter `t`.
    Table { tuples: Vec<Vec<u64>>, weights: Vec<f64> },
}

/// How the constants of the `Z_{k,l}` combinations are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum FixedCoefficientPolicy {
    #[default]
    Unit,
    /// Drawn once from the instance sampler (or from `seed`) and frozen.
    Sampled {
        #[serde(default)]
        seed: Option<u64>,
    },
    /// `values[k][l][term]`, terms ordered by band then source.
    Explicit { values: Vec<Vec<Vec<f64>>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimOverride {
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub j: usize,
    pub gamma: Level,
    pub delta: Level,
}

fn one() -> usize {
    1
}

/// `H(Z₁…Z_K | W, 𝒢) ≥ H(Z_{1,1} … Z_{K,l_K} | W)` with
/// `Z_k = L_k^b(X₁, …, X_N)` and `Z_{k,l}` a combination of the bands
/// `I_{k,l}` of every source under the level grid of `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremInstance {
    pub sources: usize,
    #[serde(default = "one")]
    pub letters: usize,
    pub level_grid: Vec<LevelVector>,
    pub index_sets: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    pub trims: Vec<TrimOverride>,
    #[serde(default)]
    pub input: InputModel,
    /// `W`, built from the same sources with fixed coefficients.
    #[serde(default)]
    pub conditioning: Option<CombinationSpec>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub fixed_coefficients: FixedCoefficientPolicy,
    /// Use bounded-density coefficients in the `Z_{k,l}` as well.
    #[serde(default)]
    pub bounded_density_rhs: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub k: usize,
    pub s: usize,
    /// `𝒯(Z_{k,s+1}) + … + 𝒯(Z_{k,l_k})`
    pub t_sum: Level,
    /// `λ_{k,1} + … + λ_{k,m(k,s)−1}`
    pub prefix: Level,
    pub holds: bool,
    /// The same left side evaluated directly from band widths and trims.
    pub trimmed_sum: Level,
    pub trimmed_holds: bool,
}

impl TheoremInstance {
    pub fn outputs(&self) -> usize {
        self.level_grid.len()
    }

    pub fn bands(&self) -> usize {
        self.level_grid.first().map_or(0, |v| v.len())
    }

    /// `m(k, l) = min I_{k,l}`.
    pub fn m(&self, k: usize, l: usize) -> usize {
        *self.index_sets[k - 1][l - 1].iter().min().expect("validated non-empty")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Instance(m));
        let (n, kk, mm) = (self.sources, self.outputs(), self.bands());
        if n == 0 {
            return bad("need at least one source".into());
        }
        if kk == 0 || kk > n {
            return bad(format!("need 1 <= K <= N, got K={kk}, N={n}"));
        }
        if self.letters == 0 {
            return bad("need at least one letter".into());
        }
        if mm == 0 || self.level_grid.iter().any(|v| v.len() != mm) {
            return bad("every level vector needs the same non-zero length M".into());
        }
        if self.index_sets.len() != kk {
            return bad(format!("{} index-set families for K={kk}", self.index_sets.len()));
        }
        for (k, fam) in self.index_sets.iter().enumerate() {
            if fam.is_empty() {
                return bad(format!("no combinations for k={}", k + 1));
            }
            for (l, set) in fam.iter().enumerate() {
                if set.is_empty() {
                    return bad(format!("I_{{{},{}}} is empty", k + 1, l + 1));
                }
                if let Some(i) = set.iter().find(|&&i| i == 0 || i > mm) {
                    return bad(format!("band {i} in I_{{{},{}}} outside 1..={mm}", k + 1, l + 1));
                }
                let mut sorted = set.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != set.len() {
                    return bad(format!("I_{{{},{}}} repeats a band", k + 1, l + 1));
                }
            }
            for a in 1..=fam.len() {
                for b in a + 1..=fam.len() {
                    if self.m(k + 1, a) < self.m(k + 1, b) {
                        return Err(Error::MonotoneIndex { k: k + 1, a, b });
                    }
                }
            }
        }
        for t in &self.trims {
            let ok = (1..=kk).contains(&t.k)
                && (1..=self.index_sets[t.k - 1].len()).contains(&t.l)
                && self.index_sets[t.k - 1][t.l - 1].contains(&t.i)
                && (1..=n).contains(&t.j);
            if !ok {
                return bad(format!("trim ({}, {}, {}, {}) does not name a term", t.k, t.l, t.i, t.j));
            }
        }
        if let InputModel::Table { tuples, weights } = &self.input {
            if tuples.len() != weights.len() || tuples.is_empty() {
                return bad("input table needs one weight per tuple".into());
            }
            let arity = n * self.letters;
            if tuples.iter().any(|t| t.len() != arity) {
                return bad(format!("input tuples need {arity} columns"));
            }
            let total: f64 = weights.iter().sum();
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return bad("input weights must be non-negative and sum to 1".into());
            }
        }
        if let Some(w) = &self.conditioning {
            if w.terms.iter().any(|t| t.source >= n) {
                return bad("conditioning references an unknown source".into());
            }
            if w.terms.iter().any(|t| t.coefficient == CoefficientKind::BoundedDensity) {
                return bad("conditioning uses fixed coefficients only".into());
            }
        }
        if let FixedCoefficientPolicy::Explicit { values } = &self.fixed_coefficients {
            let shape_ok = values.len() == kk
                && values.iter().zip(&self.index_sets).all(|(vk, fam)| {
                    vk.len() == fam.len() && vk.iter().zip(fam).all(|(v, set)| v.len() == set.len() * n)
                });
            if !shape_ok {
                return bad("explicit coefficients do not match the index sets".into());
            }
            let bound = self.sampler.delta2;
            if let Some(v) = values.iter().flatten().flatten().find(|v| !v.is_finite() || v.abs() > bound) {
                return Err(Error::CoefficientBound { value: *v, bound });
            }
        }
        self.sampler.validate()
    }

    /// Alphabet level `max_k (λ_{k,1} + … + λ_{k,M})`.
    pub fn alphabet_level(&self) -> Level {
        self.level_grid.iter().map(|v| v.total()).max().unwrap_or(Level::ZERO)
    }

    fn trim_for(&self, k: usize, l: usize, i: usize, j: usize) -> Option<Trim> {
        self.trims
            .iter()
            .rev()
            .find(|t| (t.k, t.l, t.i, t.j) == (k, l, i, j))
            .map(|t| Trim::new(t.gamma, t.delta))
    }

    /// Terms of `Z_{k,l}` in band-then-source order, with the level of each term's input.
    fn rhs_terms(&self, k: usize, l: usize, coeffs: Option<&[f64]>) -> (CombinationSpec, Vec<Level>) {
        let levels = &self.level_grid[k - 1];
        let mut terms = Vec::new();
        let mut etas = Vec::new();
        let mut set = self.index_sets[k - 1][l - 1].clone();
        set.sort_unstable();
        for &i in &set {
            for j in 1..=self.sources {
                let coefficient = match coeffs {
                    Some(c) => CoefficientKind::Fixed(c[terms.len()]),
                    None => CoefficientKind::BoundedDensity,
                };
                terms.push(Term {
                    source: j - 1,
                    band: Some(BandSelector { low: levels.prefix(i - 1), high: levels.prefix(i) }),
                    trim: self.trim_for(k, l, i, j),
                    coefficient,
                });
                etas.push(levels.get(i));
            }
        }
        (CombinationSpec::new(terms), etas)
    }

    /// `Z_{k,l}` with its resolved constants (or bounded-density terms).
    pub fn rhs_spec(&self, k: usize, l: usize) -> Result<CombinationSpec> {
        if self.bounded_density_rhs {
            return Ok(self.rhs_terms(k, l, None).0);
        }
        let fixed = self.resolve_fixed()?;
        Ok(self.rhs_terms(k, l, Some(&fixed[k - 1][l - 1])).0)
    }

    /// `Z_k = L_k^b(X₁, …, X_N)`.
    pub fn lhs_spec(&self) -> CombinationSpec {
        CombinationSpec::new((0..self.sources).map(|j| Term::full(j, CoefficientKind::BoundedDensity)).collect())
    }

    /// Frozen constants `[k][l][term]` under the instance policy.
    pub fn resolve_fixed(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        let shape: Vec<Vec<usize>> =
            self.index_sets.iter().map(|fam| fam.iter().map(|s| s.len() * self.sources).collect()).collect();
        match &self.fixed_coefficients {
            FixedCoefficientPolicy::Unit => {
                Ok(shape.iter().map(|f| f.iter().map(|&n| vec![1.0; n]).collect()).collect())
            }
            FixedCoefficientPolicy::Sampled { seed } => {
                let cfg = self.sampler.clone().with_seed(seed.unwrap_or(self.sampler.seed));
                let mut s = CoefficientSampler::new(cfg)?;
                Ok(shape.iter().map(|f| f.iter().map(|&n| (0..n).map(|_| s.draw()).collect()).collect()).collect())
            }
            FixedCoefficientPolicy::Explicit { values } => Ok(values.clone()),
        }
    }

    /// Evaluates the level condition for every `(k, s)`.
    pub fn check_level_condition(&self) -> Result<Vec<ConditionCheck>> {
        self.validate()?;
        let mut out = Vec::new();
        for k in 1..=self.outputs() {
            let lk = self.index_sets[k - 1].len();
            let levels = &self.level_grid[k - 1];
            let t_of = |r: usize| -> Result<Level> {
                let (spec, etas) = self.rhs_terms(k, r, None);
                t_length(&spec, &etas)
            };
            let trimmed_of = |r: usize| -> Level {
                let mut best = Level::ZERO;
                for &i in &self.index_sets[k - 1][r - 1] {
                    for j in 1..=self.sources {
                        let width = levels.get(i);
                        let v = match self.trim_for(k, r, i, j) {
                            Some(t) => width.min(t.width()),
                            None => width,
                        };
                        best = best.max(v);
                    }
                }
                best
            };
            for s in 1..lk {
                let mut t_sum = Level::ZERO;
                let mut trimmed_sum = Level::ZERO;
                for r in s + 1..=lk {
                    t_sum += t_of(r)?;
                    trimmed_sum += trimmed_of(r);
                }
                let prefix = levels.prefix(self.m(k, s) - 1);
                out.push(ConditionCheck {
                    k,
                    s,
                    t_sum,
                    prefix,
                    holds: t_sum <= prefix,
                    trimmed_sum,
                    trimmed_holds: trimmed_sum <= prefix,
                });
            }
        }
        Ok(out)
    }

    pub fn condition_holds(&self) -> Result<bool> {
        Ok(self.check_level_condition()?.iter().all(|c| c.holds))
    }

    /// `Σ_k max_s (t_sum − prefix)⁺`: how far the level condition is missed.
    /// For the two-band instance this is `(λ₂ − λ₁)⁺`.
    pub fn condition_deficit(&self) -> Result<Level> {
        let checks = self.check_level_condition()?;
        Ok((1..=self.outputs())
            .map(|k| {
                checks
                    .iter()
                    .filter(|c| c.k == k)
                    .map(|c| (c.t_sum - c.prefix).positive_part())
                    .max()
                    .unwrap_or(Level::ZERO)
            })
            .sum())
    }

    /// Shape of the `[k][l]` output grid, flattened in order.
    pub fn rhs_index(&self) -> Vec<(usize, usize)> {
        self.index_sets
            .iter()
            .enumerate()
            .flat_map(|(k, fam)| (0..fam.len()).map(move |l| (k + 1, l + 1)))
            .collect()
    }

    pub fn compile(&self, ctx: &PowerContext) -> Result<CompiledInstance> {
        self.validate()?;
        let alphabet = ctx.band(self.alphabet_level())?;
        let rhs = self
            .rhs_index()
            .into_iter()
            .map(|(k, l)| {
                let spec = self.rhs_spec(k, l)?;
                let compiled = spec.compile(ctx)?;
                let fixed = spec
                    .terms
                    .iter()
                    .map(|t| match t.coefficient {
                        CoefficientKind::Fixed(v) => v,
                        CoefficientKind::BoundedDensity => f64::NAN,
                    })
                    .collect();
                Ok((compiled, fixed))
            })
            .collect::<Result<Vec<_>>>()?;
        let conditioning = match &self.conditioning {
            Some(w) => {
                let coeffs = w
                    .terms
                    .iter()
                    .map(|t| match t.coefficient {
                        CoefficientKind::Fixed(v) => v,
                        CoefficientKind::BoundedDensity => f64::NAN,
                    })
                    .collect();
                Some((w.compile(ctx)?, coeffs))
            }
            None => None,
        };
        let tuples = match &self.input {
            InputModel::Table { tuples, weights } => {
                if let Some(v) = tuples.iter().flatten().find(|&&v| v >= alphabet) {
                    return Err(Error::OutOfRange { value: *v, capacity: alphabet });
                }
                Some((tuples.clone(), weights.clone()))
            }
            _ => None,
        };
        Ok(CompiledInstance {
            instance: self.clone(),
            lhs: self.lhs_spec().compile(ctx)?,
            rhs,
            conditioning,
            alphabet,
            tuples,
            log2_pbar: ctx.log2_pbar(),
        })
    }
}

/// Realized `Z_k` and `Z_{k,l}` values at one time index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedOutputs {
    pub z: Vec<i64>,
    pub z_kl: Vec<Vec<i64>>,
}

/// Checked evaluation of every output map for one input realization.
///
/// `lhs_coeffs[k]` has one coefficient per source; `rhs_coeffs[k][l]` one
/// per term of `Z_{k,l}`.
pub fn realize_outputs(
    instance: &TheoremInstance,
    ctx: &PowerContext,
    x: &[i64],
    lhs_coeffs: &[Vec<f64>],
    rhs_coeffs: &[Vec<Vec<f64>>],
) -> Result<RealizedOutputs> {
    instance.validate()?;
    if x.len() != instance.sources {
        return Err(Error::CountMismatch { what: "sources", expected: instance.sources, actual: x.len() });
    }
    let alphabet = ctx.band(instance.alphabet_level())?;
    if let Some(&v) = x.iter().find(|&&v| v < 0 || v as u64 >= alphabet) {
        return Err(Error::OutOfRange { value: v.max(0) as u64, capacity: alphabet });
    }
    if lhs_coeffs.len() != instance.outputs() || rhs_coeffs.len() != instance.outputs() {
        return Err(Error::CountMismatch { what: "coefficient families", expected: instance.outputs(), actual: lhs_coeffs.len() });
    }
    let lhs = instance.lhs_spec();
    let z = lhs_coeffs.iter().map(|g| lincomb(&lhs, x, g, ctx)).collect::<Result<Vec<_>>>()?;
    let mut z_kl = Vec::new();
    for (k, fam) in rhs_coeffs.iter().enumerate() {
        let lk = instance.index_sets[k].len();
        if fam.len() != lk {
            return Err(Error::CountMismatch { what: "combinations", expected: lk, actual: fam.len() });
        }
        let row = fam
            .iter()
            .enumerate()
            .map(|(l, h)| lincomb(&instance.rhs_terms(k + 1, l + 1, None).0, x, h, ctx))
            .collect::<Result<Vec<_>>>()?;
        z_kl.push(row);
    }
    Ok(RealizedOutputs { z, z_kl })
}

/// An instance with band sizes resolved at one power.
#[derive(Clone, Debug)]
pub struct CompiledInstance {
    instance: TheoremInstance,
    lhs: CompiledCombination,
    rhs: Vec<(CompiledCombination, Vec<f64>)>,
    conditioning: Option<(CompiledCombination, Vec<f64>)>,
    alphabet: u64,
    tuples: Option<(Vec<Vec<u64>>, Vec<f64>)>,
    log2_pbar: f64,
}

/// Which side of the inequality to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputSelector {
    /// `(Z₁, …, Z_K)` given the coefficients.
    Combined,
    /// `(Z_{1,1}, …, Z_{K,l_K})`.
    Components,
}

impl CompiledInstance {
    pub fn instance(&self) -> &TheoremInstance {
        &self.instance
    }

    pub fn alphabet(&self) -> u64 {
        self.alphabet
    }

    pub fn log2_pbar(&self) -> f64 {
        self.log2_pbar
    }

    /// `(Z_{k,l})` for one realization, with the frozen constants.
    pub fn component_values(&self, x: &[u64]) -> Vec<i64> {
        self.rhs.iter().map(|(c, fixed)| c.eval(x, fixed)).collect()
    }

    /// `Z = L^b(x)` with coefficients `g` (one per source).
    pub fn combined_value(&self, x: &[u64], g: &[f64]) -> i64 {
        self.lhs.eval(x, g)
    }

    pub fn conditioning_value(&self, x: &[u64]) -> Option<i64> {
        self.conditioning.as_ref().map(|(c, coeffs)| c.eval(x, coeffs))
    }

    /// Letters enumerated jointly (explicit tables); i.i.d. models use one.
    fn joint_letters(&self) -> usize {
        if self.tuples.is_some() {
            self.instance.letters
        } else {
            1
        }
    }

    pub fn state_space(&self) -> StateSpace<'_> {
        let columns = self.instance.sources * self.joint_letters();
        match (&self.instance.input, &self.tuples) {
            (_, Some((tuples, weights))) => StateSpace::Weighted { tuples, weights },
            (InputModel::Identical, None) => StateSpace::Diagonal { columns, alphabet: self.alphabet },
            _ => StateSpace::Product { columns, alphabet: self.alphabet },
        }
    }

    fn separable(&self, comb: &CompiledCombination, coeffs: &[f64], letter: usize) -> SeparableOutput {
        let n = self.instance.sources;
        let mut columns = vec![None; n * self.joint_letters()];
        for j in 0..n {
            let table = comb.source_table(coeffs, j, self.alphabet);
            if table.iter().any(|&v| v != 0) {
                columns[letter * n + j] = Some(table);
            }
        }
        SeparableOutput::new(columns)
    }

    /// `(Z_{k,l})` at every jointly enumerated letter, with the given constants
    /// (`None` uses the frozen ones).
    pub fn component_outputs(&self, coeffs: Option<&[Vec<f64>]>) -> Vec<SeparableOutput> {
        let mut out = Vec::new();
        for t in 0..self.joint_letters() {
            for (idx, (comb, fixed)) in self.rhs.iter().enumerate() {
                let c = coeffs.map_or(fixed.as_slice(), |c| c[idx].as_slice());
                out.push(self.separable(comb, c, t));
            }
        }
        out
    }

    /// `(Z_k)` with `coeffs[t][k]` holding the `N` coefficients of letter `t`, output `k`.
    pub fn combined_outputs(&self, coeffs: &[Vec<Vec<f64>>]) -> Vec<SeparableOutput> {
        let mut out = Vec::new();
        for (t, per_k) in coeffs.iter().enumerate().take(self.joint_letters()) {
            for g in per_k {
                out.push(self.separable(&self.lhs, g, t));
            }
        }
        out
    }

    pub fn conditioning_outputs(&self) -> Vec<SeparableOutput> {
        match &self.conditioning {
            Some((comb, c)) => (0..self.joint_letters()).map(|t| self.separable(comb, c, t)).collect(),
            None => Vec::new(),
        }
    }

    /// Coefficients for one draw: `[t][k][j]` for the `Z_k`, then `[k,l][term]`
    /// for bounded-density components.
    pub fn draw_coefficients(&self, sampler: &mut CoefficientSampler) -> (Vec<Vec<Vec<f64>>>, Option<Vec<Vec<f64>>>) {
        let (n, kk) = (self.instance.sources, self.instance.outputs());
        let lhs = (0..self.joint_letters())
            .map(|_| (0..kk).map(|_| (0..n).map(|_| sampler.draw()).collect()).collect())
            .collect();
        let rhs = self
            .instance
            .bounded_density_rhs
            .then(|| self.rhs.iter().map(|(c, _)| (0..c.len()).map(|_| sampler.draw()).collect()).collect());
        (lhs, rhs)
    }

    fn conditional(&self, outputs: Vec<SeparableOutput>, w_entropy: f64, cap: u64) -> Result<f64> {
        let space = self.state_space();
        let mut all = outputs;
        all.extend(self.conditioning_outputs());
        Ok(pushforward_entropy(&space, &all, cap)? - w_entropy)
    }

    /// `H(W)` (zero without conditioning).
    pub fn conditioning_entropy(&self, cap: u64) -> Result<f64> {
        let w = self.conditioning_outputs();
        if w.is_empty() {
            return Ok(0.0);
        }
        pushforward_entropy(&self.state_space(), &w, cap)
    }

    /// Exact conditional entropy of one side, averaged over coefficient draws
    /// when it depends on them. Values are per block of `n` letters.
    pub fn entropy(&self, which: OutputSelector, sampler: &CoefficientSampler, trials: usize, cap: u64) -> Result<EntropyEstimate> {
        Ok(self.entropy_draws(which, sampler, trials, cap)?.0)
    }

    /// As [`Self::entropy`], with the per-draw values (one value when deterministic).
    pub fn entropy_draws(
        &self,
        which: OutputSelector,
        sampler: &CoefficientSampler,
        trials: usize,
        cap: u64,
    ) -> Result<(EntropyEstimate, Vec<f64>)> {
        let hw = self.conditioning_entropy(cap)?;
        let scale = (self.instance.letters / self.joint_letters()) as f64;
        let normalizer = self.instance.letters as f64 * self.log2_pbar;
        let random = which == OutputSelector::Combined || self.instance.bounded_density_rhs;
        if !random {
            let v = self.conditional(self.component_outputs(None), hw, cap)?;
            let est = EntropyEstimate { value: scale * v, method: EntropyMethod::Exact, trials: 1, normalizer, std_error: 0.0 };
            return Ok((est, vec![scale * v]));
        }
        let summary = monte_carlo_mean(trials, |d| {
            let mut s = sampler.fork(d as u64);
            let (lhs, rhs) = self.draw_coefficients(&mut s);
            let outputs = match which {
                OutputSelector::Combined => self.combined_outputs(&lhs),
                OutputSelector::Components => self.component_outputs(rhs.as_deref()),
            };
            self.conditional(outputs, hw, cap)
        })?;
        let std_error = scale * summary.std_dev / (trials as f64).sqrt();
        let est = EntropyEstimate { value: scale * summary.mean, method: EntropyMethod::Exact, trials, normalizer, std_error };
        Ok((est, summary.values.iter().map(|v| scale * v).collect()))
    }
}

/// `H(selected outputs | W, 𝒢)` for the instance at `ctx`.
pub fn cond_entropy_given_coeffs(
    instance: &TheoremInstance,
    ctx: &PowerContext,
    which: OutputSelector,
    sampler: &CoefficientSampler,
    trials: usize,
    cap: u64,
) -> Result<EntropyEstimate> {
    instance.compile(ctx)?.entropy(which, sampler, trials, cap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub power: f64,
    pub pbar: u64,
    pub lhs: EntropyEstimate,
    pub rhs: EntropyEstimate,
    pub gap: f64,
    pub normalized_gap: f64,
    pub condition_ok: bool,
    /// Normalized gap the inequality promises up to vanishing slack: `0` when
    /// the level condition holds, `−deficit` otherwise.
    pub target: f64,
    /// Gap in bits per coefficient draw. Draw `d` uses the same coefficient
    /// stream at every `P̄`, so these pair up across a sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gap_draws: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pbar: u64,
    pub report: Option<GapReport>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub cap: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { cap: DEFAULT_SUPPORT_CAP }
    }
}

/// Gap report at every `P̄` in `pbars`. A point that cannot be evaluated
/// (for instance over the support cap) records its error and the sweep goes on.
pub fn verify_sweep(instance: &TheoremInstance, pbars: &[u64], trials: usize, options: SweepOptions) -> Result<Vec<SweepPoint>> {
    instance.validate()?;
    let condition_ok = instance.condition_holds()?;
    let target = -instance.condition_deficit()?.as_f64();
    let sampler = CoefficientSampler::new(instance.sampler.clone())?;
    let mut points = Vec::with_capacity(pbars.len());
    for &pbar in pbars {
        let one = || -> Result<GapReport> {
            let ctx = PowerContext::from_pbar(pbar)?;
            let compiled = instance.compile(&ctx)?;
            let (lhs, lhs_draws) = compiled.entropy_draws(OutputSelector::Combined, &sampler, trials, options.cap)?;
            let (rhs, rhs_draws) = compiled.entropy_draws(OutputSelector::Components, &sampler, trials, options.cap)?;
            let gap = lhs.value - rhs.value;
            let gap_draws = lhs_draws.iter().enumerate().map(|(d, v)| v - rhs_draws[d.min(rhs_draws.len() - 1)]).collect();
            Ok(GapReport {
                power: ctx.power(),
                pbar,
                normalized_gap: gap / lhs.normalizer,
                lhs,
                rhs,
                gap,
                condition_ok,
                target,
                gap_draws,
            })
        };
        points.push(match one() {
            Ok(r) => SweepPoint { pbar, report: Some(r), error: None },
            Err(e) => SweepPoint { pbar, report: None, error: Some(e.to_string()) },
        });
    }
    Ok(points)
}

/// Summary of normalized gaps against `log₂ P̄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapTrend {
    pub final_gap: f64,
    pub min_gap: f64,
    /// Least-squares slope of normalized gap against `log₂ P̄`.
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of `slope` from the spread of per-draw slopes (zero
    /// when the points carry no paired draws).
    pub slope_std_error: f64,
    /// Every consecutive pair is non-decreasing.
    pub stepwise_monotone: bool,
}

impl GapTrend {
    pub fn from_reports(reports: &[GapReport]) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::Invalid("a trend needs at least two sweep points".into()));
        }
        let xs: Vec<f64> = reports.iter().map(|r| (r.pbar as f64).log2()).collect();
        let ys: Vec<f64> = reports.iter().map(|r| r.normalized_gap).collect();
        let (slope, intercept) = least_squares(&xs, &ys);
        let d = reports[0].gap_draws.len();
        let paired = d > 1 && reports.iter().all(|r| r.gap_draws.len() == d);
        let slope_std_error = if paired {
            let slopes: Vec<f64> = (0..d)
                .map(|i| {
                    let y: Vec<f64> = reports.iter().map(|r| r.gap_draws[i] / r.lhs.normalizer).collect();
                    least_squares(&xs, &y).0
                })
                .collect();
            let mean = slopes.iter().sum::<f64>() / d as f64;
            let var = slopes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (d - 1) as f64;
            (var / d as f64).sqrt()
        } else {
            0.0
        };
        Ok(GapTrend {
            final_gap: *ys.last().expect("non-empty"),
            min_gap: ys.iter().copied().fold(f64::INFINITY, f64::min),
            slope,
            intercept,
            slope_std_error,
            stepwise_monotone: ys.windows(2).all(|w| w[1] >= w[0]),
        })
    }

    /// The fitted slope is not significantly negative: `slope + 2·SE ≥ 0`.
    pub fn non_decreasing(&self) -> bool {
        self.slope + 2.0 * self.slope_std_error >= 0.0
    }

    /// Final gap at or above `threshold` with a non-decreasing trend.
    pub fn passes(&self, threshold: f64) -> bool {
        self.final_gap >= threshold && self.non_decreasing()
    }
}

/// `(slope, intercept)` of the least-squares line through the points.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Two sources split into a bottom band `λ₁` and a top band `λ₂`:
/// `H(L^b(X₁, X₂) | 𝒢) ≥ H(L₁(tops), L₂(bottoms and tops))`.
pub fn theorem1_instance(lambda1: Level, lambda2: Level) -> Result<TheoremInstance> {
    let inst = TheoremInstance {
        sources: 2,
        letters: 1,
        level_grid: vec![LevelVector::new(vec![lambda1, lambda2])?],
        index_sets: vec![vec![vec![2], vec![1, 2]]],
        trims: Vec::new(),
        input: InputModel::ProductUniform,
        conditioning: None,
        sampler: SamplerConfig::default(),
        fixed_coefficients: FixedCoefficientPolicy::Unit,
        bounded_density_rhs: false,
    };
    inst.validate()?;
    Ok(inst)
}

/// One combination set per band-nesting chain `I₁ = {4}`, `I₂ = {2,3,4}`, `I₃ = {1,…,4}`.
pub fn three_layer_instance(levels: LevelVector) -> Result<TheoremInstance> {
    if levels.len() != 4 {
        return Err(Error::Instance("the three-layer instance uses four bands".into()));
    }
    let inst = TheoremInstance {
        level_grid: vec![levels],
        index_sets: vec![vec![vec![4], vec![2, 3, 4], vec![1, 2, 3, 4]]],
        ..theorem1_instance(Level::ONE, Level::ONE)?
    };
    inst.validate()?;
    Ok(inst)
}

/// Three sources, two combined outputs, four bands with
/// `I₁₁ = I₂₁ = {4}`, `I₁₂ = {2,4}`, `I₂₂ = {3,4}`, `I₁₃ = I₂₃ = {1,2,3,4}`.
pub fn multi_antenna_instance(levels1: LevelVector, levels2: LevelVector) -> Result<TheoremInstance> {
    let full = vec![1, 2, 3, 4];
    let inst = TheoremInstance {
        sources: 3,
        letters: 1,
        level_grid: vec![levels1, levels2],
        index_sets: vec![vec![vec![4], vec![2, 4], full.clone()], vec![vec![4], vec![3, 4], full]],
        trims: Vec::new(),
        input: InputModel::ProductUniform,
        conditioning: None,
        sampler: SamplerConfig::default(),
        fixed_coefficients: FixedCoefficientPolicy::Unit,
        bounded_density_rhs: false,
    };
    inst.validate()?;
    Ok(inst)
}

/// Named instances accepted by the instance file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name", deny_unknown_fields)]
pub enum Preset {
    TwoBand {
        lambda1: Level,
        lambda2: Level,
        #[serde(default)]
        input: InputModel,
        #[serde(default)]
        fixed_coefficients: FixedCoefficientPolicy,
        #[serde(default)]
        sampler: Option<SamplerConfig>,
    },
    ThreeLayer {
        levels: LevelVector,
    },
    MultiAntenna {
        levels: Vec<LevelVector>,
        #[serde(default)]
        input: InputModel,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Preset(Preset),
    Explicit(TheoremInstance),
}

impl InstanceSource {
    pub fn build(&self) -> Result<TheoremInstance> {
        match self {
            InstanceSource::Explicit(inst) => {
                inst.validate()?;
                Ok(inst.clone())
            }
            InstanceSource::Preset(Preset::TwoBand { lambda1, lambda2, input, fixed_coefficients, sampler }) => {
                let mut inst = theorem1_instance(*lambda1, *lambda2)?;
                inst.input = input.clone();
                inst.fixed_coefficients = fixed_coefficients.clone();
                if let Some(s) = sampler {
                    inst.sampler = s.clone();
                }
                inst.validate()?;
                Ok(inst)
            }
            InstanceSource::Preset(Preset::ThreeLayer { levels }) => three_layer_instance(levels.clone()),
            InstanceSource::Preset(Preset::MultiAntenna { levels, input }) => {
                let [a, b] = levels.as_slice() else {
                    return Err(Error::Instance("multi-antenna preset takes two level vectors".into()));
                };
                let mut inst = multi_antenna_instance(a.clone(), b.clone())?;
                inst.input = input.clone();
                inst.validate()?;
                Ok(inst)
            }
        }
    }
}
