//! Coefficient sampling, floor linear combinations and the deterministic
//! two-user MIMO interference channel.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{pfloor, pfloor_fast, window, IntVector, Level, PowerContext};

pub const DEFAULT_SEED: u64 = 0x5eed_0001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientFamily {
    /// `|g|` uniform on `[Δ₁, Δ₂]`, sign uniform.
    #[default]
    UniformMagnitudeSigned,
    /// `g` uniform on `[Δ₁, Δ₂]`.
    UniformPositive,
}

impl CoefficientFamily {
    pub fn peak_density(self, delta1: f64, delta2: f64) -> f64 {
        let width = delta2 - delta1;
        match self {
            CoefficientFamily::UniformMagnitudeSigned => 0.5 / width,
            CoefficientFamily::UniformPositive => 1.0 / width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_delta1")]
    pub delta1: f64,
    #[serde(default = "default_delta2")]
    pub delta2: f64,
    #[serde(default = "default_fmax")]
    pub f_max: f64,
    #[serde(default)]
    pub family: CoefficientFamily,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_delta1() -> f64 {
    1.0
}
fn default_delta2() -> f64 {
    2.0
}
fn default_fmax() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            delta1: default_delta1(),
            delta2: default_delta2(),
            f_max: default_fmax(),
            family: CoefficientFamily::default(),
            seed: default_seed(),
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (d1, d2, f) = (self.delta1, self.delta2, self.f_max);
        if !(d1.is_finite() && d2.is_finite() && f.is_finite()) {
            return Err(Error::Sampler("parameters must be finite".into()));
        }
        if d1 <= 0.0 || d2 <= d1 {
            return Err(Error::Sampler(format!("need 0 < delta1 < delta2, got {d1}, {d2}")));
        }
        if f <= 0.0 {
            return Err(Error::Sampler(format!("f_max must be positive, got {f}")));
        }
        let peak = self.family.peak_density(d1, d2);
        if peak > f {
            return Err(Error::Sampler(format!("family density {peak} exceeds f_max {f}")));
        }
        Ok(())
    }
}

/// Seeded source of bounded-density coefficients.
#[derive(Clone, Debug)]
pub struct CoefficientSampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
}

impl CoefficientSampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(CoefficientSampler { config, rng })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Independent stream keyed by `index`; the parent stream is untouched.
    pub fn fork(&self, index: u64) -> CoefficientSampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(index.wrapping_add(1));
        CoefficientSampler { config: self.config.clone(), rng }
    }

    pub fn draw(&mut self) -> f64 {
        let SamplerConfig { delta1, delta2, family, .. } = self.config;
        let mag = delta1 + (delta2 - delta1) * self.rng.gen::<f64>();
        match family {
            CoefficientFamily::UniformMagnitudeSigned if self.rng.gen::<bool>() => -mag,
            _ => mag,
        }
    }

    pub fn draw_coefficients(&mut self, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::Invalid("coefficient count must be at least 1".into()));
        }
        Ok((0..count).map(|_| self.draw()).collect())
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.draw();
        }
    }
}

/// Arbitrary bounded constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedCoefficients {
    values: Vec<f64>,
}

impl FixedCoefficients {
    pub fn new(values: Vec<f64>, bound: f64) -> Result<Self> {
        for &v in &values {
            if !v.is_finite() || v.abs() > bound {
                return Err(Error::CoefficientBound { value: v, bound });
            }
        }
        Ok(FixedCoefficients { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSelector {
    pub low: Level,
    pub high: Level,
}

/// `(x)^γ_δ`; zero when `γ ≤ δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trim {
    pub gamma: Level,
    pub delta: Level,
}

impl Trim {
    pub fn new(gamma: Level, delta: Level) -> Self {
        Trim { gamma, delta }
    }

    pub fn width(self) -> Level {
        (self.gamma - self.delta).positive_part()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientKind {
    #[default]
    BoundedDensity,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub source: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandSelector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim: Option<Trim>,
    #[serde(default)]
    pub coefficient: CoefficientKind,
}

impl Term {
    pub fn full(source: usize, coefficient: CoefficientKind) -> Self {
        Term { source, band: None, trim: None, coefficient }
    }

    pub fn input(&self, x: i64, ctx: &PowerContext) -> Result<u64> {
        let x = u64::try_from(x).map_err(|_| Error::NegativeSignal(x))?;
        Ok(self.compile(ctx)?.input(x))
    }

    fn compile(&self, ctx: &PowerContext) -> Result<CompiledTerm> {
        let band = match self.band {
            None => None,
            Some(b) if b.low > b.high => return Err(Error::InvertedWindow { low: b.low, high: b.high }),
            Some(b) => Some((ctx.band(b.low)?, ctx.band(b.high)?)),
        };
        let trim = match self.trim {
            None => TrimOp::Keep,
            Some(t) if t.gamma <= t.delta => TrimOp::Zero,
            Some(t) => TrimOp::Window(ctx.band(t.delta)?, ctx.band(t.gamma)?),
        };
        Ok(CompiledTerm { source: self.source, band, trim })
    }
}

/// `Σ_i pfloor(c_i · (x_{s_i})^{γ_i}_{δ_i})` over banded sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CombinationSpec {
    pub terms: Vec<Term>,
}

impl CombinationSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        CombinationSpec { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn sources(&self) -> usize {
        self.terms.iter().map(|t| t.source + 1).max().unwrap_or(0)
    }

    pub fn bounded_density_terms(&self) -> usize {
        self.terms.iter().filter(|t| t.coefficient == CoefficientKind::BoundedDensity).count()
    }

    /// One coefficient per term; bounded-density terms draw from `sampler`.
    pub fn realize(&self, sampler: &mut CoefficientSampler) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| match t.coefficient {
                CoefficientKind::BoundedDensity => sampler.draw(),
                CoefficientKind::Fixed(v) => v,
            })
            .collect()
    }

    pub fn compile(&self, ctx: &PowerContext) -> Result<CompiledCombination> {
        let terms = self.terms.iter().map(|t| t.compile(ctx)).collect::<Result<_>>()?;
        Ok(CompiledCombination { terms })
    }
}

#[derive(Clone, Copy, Debug)]
enum TrimOp {
    Keep,
    Zero,
    Window(u64, u64),
}

#[derive(Clone, Copy, Debug)]
struct CompiledTerm {
    source: usize,
    band: Option<(u64, u64)>,
    trim: TrimOp,
}

impl CompiledTerm {
    #[inline]
    fn input(&self, x: u64) -> u64 {
        let v = match self.band {
            Some((lo, hi)) => window(x, lo, hi),
            None => x,
        };
        match self.trim {
            TrimOp::Keep => v,
            TrimOp::Zero => 0,
            TrimOp::Window(lo, hi) => window(v, lo, hi),
        }
    }
}

/// A [`CombinationSpec`] with band sizes resolved at one power.
#[derive(Clone, Debug)]
pub struct CompiledCombination {
    terms: Vec<CompiledTerm>,
}

impl CompiledCombination {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval(&self, signals: &[u64], coeffs: &[f64]) -> i64 {
        self.terms
            .iter()
            .zip(coeffs)
            .map(|(t, &c)| pfloor_fast(c * t.input(signals[t.source]) as f64))
            .sum()
    }

    /// Contribution of `source` to the output for each `x < alphabet`.
    pub fn source_table(&self, coeffs: &[f64], source: usize, alphabet: u64) -> Vec<i64> {
        let mine: Vec<_> = self.terms.iter().zip(coeffs).filter(|(t, _)| t.source == source).collect();
        (0..alphabet)
            .map(|x| mine.iter().map(|(t, &c)| pfloor_fast(c * t.input(x) as f64)).sum())
            .collect()
    }
}

/// Checked evaluation of a floor linear combination.
pub fn lincomb(spec: &CombinationSpec, signals: &[i64], coeffs: &[f64], ctx: &PowerContext) -> Result<i64> {
    if coeffs.len() != spec.len() {
        return Err(Error::CountMismatch { what: "coefficients", expected: spec.len(), actual: coeffs.len() });
    }
    let mut acc: i64 = 0;
    for (term, &c) in spec.terms.iter().zip(coeffs) {
        let x = *signals
            .get(term.source)
            .ok_or(Error::IndexOutOfBounds { index: term.source, len: signals.len() })?;
        let v = term.input(x, ctx)?;
        acc = acc.checked_add(pfloor(c * v as f64)?).ok_or(Error::Overflow("lincomb"))?;
    }
    Ok(acc)
}

/// `𝒯 = max_i min(η_i, (γ_i − δ_i)⁺)`, with `η_i` the level of term `i`'s input.
pub fn t_length(spec: &CombinationSpec, etas: &[Level]) -> Result<Level> {
    if etas.len() != spec.len() {
        return Err(Error::CountMismatch { what: "term levels", expected: spec.len(), actual: etas.len() });
    }
    Ok(spec
        .terms
        .iter()
        .zip(etas)
        .map(|(t, &eta)| match t.trim {
            None => eta,
            Some(tr) => eta.min(tr.width()),
        })
        .max()
        .unwrap_or(Level::ZERO))
}

/// `k·Δ₂·P̄^𝒯`.
///
/// Holds for every output when band sizes are multiplicative
/// (`P̄^a·P̄^b = P̄^{a+b}`); otherwise floors can push a window one value past
/// `P̄^{γ−δ}`.
pub fn range_bound(spec: &CombinationSpec, etas: &[Level], delta2: f64, ctx: &PowerContext) -> Result<u64> {
    let t = t_length(spec, etas)?;
    let b = spec.len() as f64 * delta2 * ctx.band(t)? as f64;
    if b >= u64::MAX as f64 {
        return Err(Error::Overflow("range bound"));
    }
    Ok(b.floor() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antennas {
    pub m1: usize,
    pub m2: usize,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strengths {
    pub a11: Level,
    pub a12: Level,
    pub a21: Level,
    pub a22: Level,
}

/// Two-user MIMO IC with finite-precision CSIT.
///
/// Transmitter `s` splits its inputs into a part seen through the cross link
/// only at its top levels (`X_{1a}` has `N₂` entries, `X_{2a}` has `N₁`) and
/// the remainder (`X_{1c}`, `X_{2c}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoIcConfig {
    pub antennas: Antennas,
    pub alpha: Strengths,
    pub beta12: Level,
    pub beta21: Level,
}

impl Default for MimoIcConfig {
    fn default() -> Self {
        MimoIcConfig {
            antennas: Antennas { m1: 5, m2: 5, n1: 2, n2: 3 },
            alpha: Strengths {
                a11: Level::ONE,
                a12: Level::new(3, 4),
                a21: Level::new(2, 3),
                a22: Level::ONE,
            },
            beta12: Level::new(1, 4),
            beta21: Level::new(1, 3),
        }
    }
}

/// Lower trim edges seen by one receiver; the upper edge is always level 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossTrims {
    pub a_low: Level,
    pub c_low: Level,
}

impl MimoIcConfig {
    pub fn validate(&self) -> Result<()> {
        let Antennas { m1, m2, n1, n2 } = self.antennas;
        if [m1, m2, n1, n2].contains(&0) {
            return Err(Error::Instance("antenna counts must be positive".into()));
        }
        if m1 < n2 || m2 < n1 {
            return Err(Error::Instance("need M1 >= N2 and M2 >= N1 for the band split".into()));
        }
        let a = self.alpha;
        for v in [a.a11, a.a12, a.a21, a.a22] {
            if v.is_negative() || v > Level::ONE {
                return Err(Error::Instance(format!("strength {v} outside [0, 1]")));
            }
        }
        if a.a11 != Level::ONE || a.a22 != Level::ONE {
            return Err(Error::Instance("direct links are normalized to strength 1".into()));
        }
        for b in [self.beta12, self.beta21] {
            if b.is_negative() || b > Level::ONE {
                return Err(Error::Instance(format!("csit level {b} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.antennas.m1 + self.antennas.m2
    }

    /// `(1 − α₁₂, 1 − (α₁₂ − β₁₂)⁺)`
    pub fn rx1_trims(&self) -> CrossTrims {
        CrossTrims {
            a_low: (Level::ONE - self.alpha.a12).positive_part(),
            c_low: (Level::ONE - (self.alpha.a12 - self.beta12).positive_part()).positive_part(),
        }
    }

    /// `(1 − α₂₁, 1 − (α₂₁ − β₂₁)⁺)`
    pub fn rx2_trims(&self) -> CrossTrims {
        CrossTrims {
            a_low: (Level::ONE - self.alpha.a21).positive_part(),
            c_low: (Level::ONE - (self.alpha.a21 - self.beta21).positive_part()).positive_part(),
        }
    }

    /// Source indices of `X_{1a}`, `X_{1c}`, `X_{2a}`, `X_{2c}` in the stacked input `X₁ ▽ X₂`.
    pub fn split(&self) -> [std::ops::Range<usize>; 4] {
        let Antennas { m1, m2, n1, n2 } = self.antennas;
        [0..n2, n2..m1, m1..m1 + n1, m1 + n1..m1 + m2]
    }

    fn receiver_spec(sources: [(std::ops::Range<usize>, Option<Level>); 3], scale: Level) -> CombinationSpec {
        let mut terms = Vec::new();
        for (range, low) in sources {
            for s in range {
                let trim = low.map(|l| Trim::new(scale, scale * l));
                terms.push(Term { source: s, band: None, trim, coefficient: CoefficientKind::BoundedDensity });
            }
        }
        CombinationSpec::new(terms)
    }

    /// Per-antenna combination at receiver 1 over `X̄_{1c} ▽ X̄_{2a} ▽ X̄_{2c}`,
    /// with every level multiplied by `scale`.
    pub fn rx1_spec(&self, scale: Level) -> CombinationSpec {
        let [_, c1, a2, c2] = self.split();
        let t = self.rx1_trims();
        Self::receiver_spec([(c1, None), (a2, Some(t.a_low)), (c2, Some(t.c_low))], scale)
    }

    /// Per-antenna combination at receiver 2 over `X̄_{2c} ▽ X̄_{1a} ▽ X̄_{1c}`.
    pub fn rx2_spec(&self, scale: Level) -> CombinationSpec {
        let [a1, c1, _, c2] = self.split();
        let t = self.rx2_trims();
        Self::receiver_spec([(c2, None), (a1, Some(t.a_low)), (c1, Some(t.c_low))], scale)
    }
}

/// Realized channel: one coefficient row per receive antenna, columns in
/// receiver-spec term order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MimoChannel {
    pub rx1: Vec<Vec<f64>>,
    pub rx2: Vec<Vec<f64>>,
}

pub const CHANNEL_RETRY_BUDGET: usize = 1000;

/// Default lower bound on `|D|` for every block minor.
pub const DEFAULT_DETERMINANT_FLOOR: f64 = 0.25;

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect()).collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * det(&minor)
            })
            .sum(),
    }
}

/// Smallest `|det|` over all square minors of size `min(rows, cols)` in the column block.
fn min_block_minor(rows: &[Vec<f64>], cols: std::ops::Range<usize>) -> f64 {
    let size = rows.len().min(cols.len());
    let mut best = f64::INFINITY;
    for rsel in (0..rows.len()).combinations(size) {
        for csel in cols.clone().combinations(size) {
            let sub: Vec<Vec<f64>> = rsel.iter().map(|&r| csel.iter().map(|&c| rows[r][c]).collect()).collect();
            best = best.min(det(&sub).abs());
        }
    }
    best
}

impl MimoChannel {
    /// Smallest minor magnitude over the desired and interfering blocks of both receivers.
    pub fn min_minor(&self, config: &MimoIcConfig) -> f64 {
        let Antennas { m1, m2, .. } = config.antennas;
        let [_, c1, _, c2] = config.split();
        let (d1, d2) = (c1.len(), c2.len());
        min_block_minor(&self.rx1, 0..d1)
            .min(min_block_minor(&self.rx1, d1..d1 + m2))
            .min(min_block_minor(&self.rx2, 0..d2))
            .min(min_block_minor(&self.rx2, d2..d2 + m1))
    }
}

/// Draw `G` by rejection until every block minor has magnitude at least `floor`.
pub fn draw_channel(config: &MimoIcConfig, sampler: &mut CoefficientSampler, floor: f64) -> Result<MimoChannel> {
    config.validate()?;
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::Invalid(format!("determinant floor must be positive, got {floor}")));
    }
    let (w1, w2) = (config.rx1_spec(Level::ONE).len(), config.rx2_spec(Level::ONE).len());
    let Antennas { n1, n2, .. } = config.antennas;
    for _ in 0..CHANNEL_RETRY_BUDGET {
        let mut row = |w| (0..w).map(|_| sampler.draw()).collect::<Vec<f64>>();
        let rx1 = (0..n1).map(|_| row(w1)).collect();
        let rx2 = (0..n2).map(|_| row(w2)).collect();
        let ch = MimoChannel { rx1, rx2 };
        if ch.min_minor(config) >= floor {
            return Ok(ch);
        }
    }
    Err(Error::Degenerate { attempts: CHANNEL_RETRY_BUDGET })
}

/// `(Ȳ₁, Ȳ₂)` for inputs with entries in `{0, …, P̄}`.
pub fn mimo_ic_outputs(
    config: &MimoIcConfig,
    ctx: &PowerContext,
    channel: &MimoChannel,
    x1: &IntVector,
    x2: &IntVector,
) -> Result<(IntVector, IntVector)> {
    config.validate()?;
    let Antennas { m1, m2, n1, n2 } = config.antennas;
    if x1.len() != m1 {
        return Err(Error::CountMismatch { what: "X1 entries", expected: m1, actual: x1.len() });
    }
    if x2.len() != m2 {
        return Err(Error::CountMismatch { what: "X2 entries", expected: m2, actual: x2.len() });
    }
    if channel.rx1.len() != n1 || channel.rx2.len() != n2 {
        return Err(Error::Invalid("channel shape does not match antenna counts".into()));
    }
    let pbar = ctx.pbar() as i64;
    let x = x1.concat(x2);
    if let Some(&v) = x.0.iter().find(|&&v| !(0..=pbar).contains(&v)) {
        return Err(Error::OutOfRange { value: v.max(0) as u64, capacity: pbar as u64 + 1 });
    }
    let (s1, s2) = (config.rx1_spec(Level::ONE), config.rx2_spec(Level::ONE));
    let y1 = channel.rx1.iter().map(|g| lincomb(&s1, &x.0, g, ctx)).collect::<Result<_>>()?;
    let y2 = channel.rx2.iter().map(|g| lincomb(&s2, &x.0, g, ctx)).collect::<Result<_>>()?;
    Ok((IntVector(y1), IntVector(y2)))
}
