//! Power levels, band sizes and partition arithmetic.
//!
//! A level `λ` names the alphabet `{0, …, ⌊P^{λ/2}⌋ − 1}`. Levels are exact
//! rationals so that band edges such as `2/3` never drift.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::RwLock;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational scalar used where the quantity is not a power level.
pub type Rational = Level;

/// Exact rational power level.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Level(Rational64);

impl Level {
    pub const ZERO: Level = Level(Rational64::new_raw(0, 1));
    pub const ONE: Level = Level(Rational64::new_raw(1, 1));

    /// Panics on a zero denominator.
    pub fn new(numer: i64, denom: i64) -> Self {
        Level(Rational64::new(numer, denom))
    }

    pub fn integer(n: i64) -> Self {
        Level(Rational64::from_integer(n))
    }

    pub fn from_ratio(r: Rational64) -> Self {
        Level(r)
    }

    pub fn ratio(self) -> Rational64 {
        self.0
    }

    pub fn numer(self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(self) -> i64 {
        *self.0.denom()
    }

    pub fn as_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    /// `(x)⁺`
    pub fn positive_part(self) -> Self {
        if self.is_negative() {
            Level::ZERO
        } else {
            self
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Level {
    type Err = Error;

    /// Accepts `"13/9"`, `"0.25"`, `"-1"` and `"3"`.
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(Level)
    }
}

pub(crate) fn parse_rational(s: &str) -> Result<Rational64> {
    let bad = || Error::LevelParse(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if frac.is_empty() && int_digits.is_empty() {
            return Err(bad());
        }
        if !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let whole: i64 = if int_digits.is_empty() { 0 } else { int_digits.parse().map_err(|_| bad())? };
        let scale = 10i64.pow(frac.len() as u32);
        let part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = whole
            .checked_mul(scale)
            .and_then(|w| w.checked_add(part))
            .ok_or_else(bad)?;
        let r = Rational64::new(numer, scale);
        return Ok(if negative { -r } else { r });
    }
    t.parse::<i64>().map(Rational64::from_integer).map_err(|_| bad())
}

impl Add for Level {
    type Output = Level;
    fn add(self, rhs: Level) -> Level {
        Level(self.0 + rhs.0)
    }
}

impl AddAssign for Level {
    fn add_assign(&mut self, rhs: Level) {
        self.0 += rhs.0;
    }
}

impl Sub for Level {
    type Output = Level;
    fn sub(self, rhs: Level) -> Level {
        Level(self.0 - rhs.0)
    }
}

impl Neg for Level {
    type Output = Level;
    fn neg(self) -> Level {
        Level(-self.0)
    }
}

impl Mul<Level> for Level {
    type Output = Level;
    fn mul(self, rhs: Level) -> Level {
        Level(self.0 * rhs.0)
    }
}

impl Div<Level> for Level {
    type Output = Level;
    /// Panics on a zero divisor.
    fn div(self, rhs: Level) -> Level {
        Level(self.0 / rhs.0)
    }
}

impl std::iter::Sum for Level {
    fn sum<I: Iterator<Item = Level>>(iter: I) -> Level {
        iter.fold(Level::ZERO, |a, b| a + b)
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Level;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational level such as \"2/3\", \"0.25\" or a number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Level, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Level, E> {
                Ok(Level::integer(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Level, E> {
                i64::try_from(v).map(Level::integer).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Level, E> {
                // JSON numbers go through their shortest decimal form so 0.1 stays 1/10.
                format!("{v}").parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Ordered list of non-negative band widths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct LevelVector(Vec<Level>);

impl LevelVector {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if let Some(l) = levels.iter().find(|l| l.is_negative()) {
            return Err(Error::NegativeLevel(*l));
        }
        Ok(LevelVector(levels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Level] {
        &self.0
    }

    /// Band `i` (1-based) width.
    pub fn get(&self, i: usize) -> Level {
        self.0[i - 1]
    }

    /// `λ₁ + … + λ_i`; `prefix(0) = 0`.
    pub fn prefix(&self, i: usize) -> Level {
        self.0[..i].iter().copied().sum()
    }

    pub fn total(&self) -> Level {
        self.prefix(self.0.len())
    }
}

impl<'de> Deserialize<'de> for LevelVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Level>::deserialize(d)?;
        LevelVector::new(v).map_err(de::Error::custom)
    }
}

/// Finite integer signal vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntVector(pub Vec<i64>);

impl IntVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `V ▽ W`
    pub fn concat(&self, other: &IntVector) -> IntVector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IntVector(v)
    }

    /// `n` consecutive entries starting after position `m`, wrapping to the front.
    pub fn rotate(&self, m: usize, n: usize) -> Result<IntVector> {
        let k = self.0.len();
        for idx in [m, n] {
            if idx >= k {
                return Err(Error::IndexOutOfBounds { index: idx, len: k });
            }
        }
        Ok(IntVector((0..n).map(|i| self.0[(m + i) % k]).collect()))
    }
}

/// Floor toward zero: `⌊x⌋` for `x ≥ 0`, `⌈x⌉` for `x < 0`.
pub fn pfloor(x: f64) -> Result<i64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let t = x.trunc();
    if t.abs() >= 9.2e18 {
        return Err(Error::Overflow("pfloor"));
    }
    Ok(t as i64)
}

/// Unchecked [`pfloor`] for hot loops with inputs already known to be in range.
#[inline]
pub fn pfloor_fast(x: f64) -> i64 {
    x as i64
}

const EXACT_ROOT_BITS: u64 = 4096;

/// Power `P` and its band sizes `P̄^λ = ⌊P^{λ/2}⌋`.
pub struct PowerContext {
    power: f64,
    exact: Option<u64>,
    cache: RwLock<HashMap<Level, u64>>,
}

impl Clone for PowerContext {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        PowerContext { power: self.power, exact: self.exact, cache: RwLock::new(cache) }
    }
}

impl fmt::Debug for PowerContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PowerContext").field("power", &self.power).finish()
    }
}

impl PowerContext {
    pub fn new(power: f64) -> Result<Self> {
        if !power.is_finite() {
            return Err(Error::NonFinite(power));
        }
        if power < 1.0 {
            return Err(Error::PowerBelowOne(power));
        }
        let exact = (power.fract() == 0.0 && power < 9.0e15).then_some(power as u64);
        Ok(PowerContext { power, exact, cache: RwLock::new(HashMap::new()) })
    }

    /// Context with `P = pbar²`, so that `P̄^1 = pbar`.
    pub fn from_pbar(pbar: u64) -> Result<Self> {
        if pbar == 0 {
            return Err(Error::PowerBelowOne(0.0));
        }
        let p = pbar.checked_mul(pbar).ok_or(Error::Overflow("P = pbar^2"))?;
        let mut ctx = PowerContext::new(p as f64)?;
        ctx.exact = Some(p);
        Ok(ctx)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `P̄ = P̄^1`.
    pub fn pbar(&self) -> u64 {
        self.band(Level::ONE).expect("level 1 is valid")
    }

    pub fn log2_pbar(&self) -> f64 {
        (self.pbar() as f64).log2()
    }

    /// `⌊P^{λ/2}⌋`.
    pub fn band(&self, level: Level) -> Result<u64> {
        if level.is_negative() {
            return Err(Error::NegativeLevel(level));
        }
        if level.is_zero() {
            return Ok(1);
        }
        if let Some(&b) = self.cache.read().ok().as_ref().and_then(|c| c.get(&level)) {
            return Ok(b);
        }
        let b = self.compute_band(level)?;
        if let Ok(mut c) = self.cache.write() {
            c.insert(level, b);
        }
        Ok(b)
    }

    fn compute_band(&self, level: Level) -> Result<u64> {
        let (p, q) = (level.numer() as u64, level.denom() as u64);
        if let Some(exact) = self.exact {
            let bits = 64 - exact.leading_zeros() as u64;
            if exact == 1 {
                return Ok(1);
            }
            if p.saturating_mul(bits) <= EXACT_ROOT_BITS && 2 * q <= u32::MAX as u64 {
                let root = BigUint::from(exact).pow(p as u32).nth_root((2 * q) as u32);
                return root.to_u64().ok_or(Error::Overflow("band size"));
            }
        }
        let v = self.power.powf(level.as_f64() / 2.0);
        if !v.is_finite() || v >= 9.2e18 {
            return Err(Error::Overflow("band size"));
        }
        let n = v.round();
        let snapped = if (v - n).abs() < 1e-9 * n.max(1.0) { n } else { v.floor() };
        Ok(snapped as u64)
    }
}

fn non_negative(x: i64) -> Result<u64> {
    u64::try_from(x).map_err(|_| Error::NegativeSignal(x))
}

/// `(X)_{λ₁}`: the bottom `λ₁` levels of `x`.
pub fn part_low(x: i64, ctx: &PowerContext, low: Level) -> Result<i64> {
    let x = non_negative(x)?;
    Ok((x % ctx.band(low)?) as i64)
}

/// `(X)^{λ₂}_{λ₁}`: the band of `x` between levels `λ₁` and `λ₂`.
pub fn part_window(x: i64, ctx: &PowerContext, low: Level, high: Level) -> Result<i64> {
    let x = non_negative(x)?;
    if low > high {
        return Err(Error::InvertedWindow { low, high });
    }
    Ok(window(x, ctx.band(low)?, ctx.band(high)?) as i64)
}

/// `(x mod hi) / lo` on raw band sizes.
#[inline]
pub fn window(x: u64, lo: u64, hi: u64) -> u64 {
    (x % hi) / lo
}

/// Mixed-radix positional layout: band `i` carries weight `∏_{r<i} P̄^{λ_r}`.
pub fn band_radices(ctx: &PowerContext, levels: &LevelVector) -> Result<Vec<u64>> {
    levels.as_slice().iter().map(|&l| ctx.band(l)).collect()
}

/// Total capacity of the composed layout.
pub fn layout_capacity(ctx: &PowerContext, levels: &LevelVector) -> Result<u64> {
    band_radices(ctx, levels)?
        .into_iter()
        .try_fold(1u64, |acc, r| acc.checked_mul(r))
        .ok_or(Error::Overflow("layout capacity"))
}

/// Split `x` into its band values under the composed layout.
pub fn decompose(x: i64, ctx: &PowerContext, levels: &LevelVector) -> Result<Vec<i64>> {
    let mut rest = non_negative(x)?;
    let capacity = layout_capacity(ctx, levels)?;
    if rest >= capacity {
        return Err(Error::OutOfRange { value: rest, capacity });
    }
    let mut out = Vec::with_capacity(levels.len());
    for r in band_radices(ctx, levels)? {
        out.push((rest % r) as i64);
        rest /= r;
    }
    Ok(out)
}

/// Inverse of [`decompose`]: `x₁ + x₂·P̄^{λ₁} + x₃·P̄^{λ₁}P̄^{λ₂} + …`.
pub fn compose(bands: &[i64], ctx: &PowerContext, levels: &LevelVector) -> Result<i64> {
    if bands.len() != levels.len() {
        return Err(Error::CountMismatch { what: "band values", expected: levels.len(), actual: bands.len() });
    }
    let mut x: u64 = 0;
    let mut weight: u64 = 1;
    for (&b, r) in bands.iter().zip(band_radices(ctx, levels)?) {
        let b = non_negative(b)?;
        if b >= r {
            return Err(Error::OutOfRange { value: b, capacity: r });
        }
        x = b
            .checked_mul(weight)
            .and_then(|t| t.checked_add(x))
            .ok_or(Error::Overflow("compose"))?;
        weight = weight.checked_mul(r).ok_or(Error::Overflow("compose"))?;
    }
    i64::try_from(x).map_err(|_| Error::Overflow("compose"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Level {
        s.parse().unwrap()
    }

    #[test]
    fn pfloor_truncates_toward_zero() {
        assert_eq!(pfloor(2.7).unwrap(), 2);
        assert_eq!(pfloor(-2.7).unwrap(), -2);
        assert_eq!(pfloor(3.0).unwrap(), 3);
        assert_eq!(pfloor(-4.5).unwrap(), -4);
        assert!(pfloor(f64::NAN).is_err());
        assert!(pfloor(f64::INFINITY).is_err());
    }

    #[test]
    fn band_sizes() {
        let ctx = PowerContext::new(100.0).unwrap();
        assert_eq!(ctx.band(Level::ONE).unwrap(), 10);
        let ctx = PowerContext::new(16.0).unwrap();
        assert_eq!(ctx.band(l("1/2")).unwrap(), 2);
        assert_eq!(ctx.band(Level::ZERO).unwrap(), 1);
        assert!(ctx.band(l("-1")).is_err());
        assert!(PowerContext::new(0.5).is_err());
    }

    #[test]
    fn band_sizes_exact_at_perfect_powers() {
        // 2^(3·12/4) = 2^9 exactly; float exponentiation may land just below.
        let ctx = PowerContext::from_pbar(4096).unwrap();
        assert_eq!(ctx.band(l("3/4")).unwrap(), 512);
        assert_eq!(ctx.band(l("3/2")).unwrap(), 4096 * 64);
        let ctx = PowerContext::from_pbar(1000).unwrap();
        assert_eq!(ctx.band(l("1/3")).unwrap(), 10);
        assert_eq!(ctx.band(l("2/3")).unwrap(), 100);
        let ctx = PowerContext::new(1e6).unwrap();
        assert_eq!(ctx.band(l("1/3")).unwrap(), 10);
    }

    #[test]
    fn non_integer_power_uses_guarded_float() {
        let ctx = PowerContext::new(2.25).unwrap();
        assert_eq!(ctx.band(Level::ONE).unwrap(), 1);
        assert_eq!(ctx.band(Level::integer(2)).unwrap(), 2);
    }

    #[test]
    fn partition_examples() {
        let ctx = PowerContext::new(100.0).unwrap();
        // P̄^1 = 10, P̄^3 = 1000
        assert_eq!(part_low(137, &ctx, Level::ONE).unwrap(), 7);
        assert_eq!(part_low(0, &ctx, Level::ONE).unwrap(), 0);
        assert_eq!(part_low(9, &ctx, Level::ONE).unwrap(), 9);
        assert_eq!(part_window(137, &ctx, Level::ONE, Level::integer(3)).unwrap(), 13);
        assert_eq!(part_window(137, &ctx, Level::ZERO, Level::integer(3)).unwrap(), 137);
        assert_eq!(part_window(137, &ctx, Level::ONE, Level::ONE).unwrap(), 0);
        assert!(part_low(-1, &ctx, Level::ONE).is_err());
        assert!(part_window(5, &ctx, Level::integer(2), Level::ONE).is_err());
    }

    #[test]
    fn decompose_two_bands() {
        let ctx = PowerContext::from_pbar(16).unwrap();
        let levels = LevelVector::new(vec![l("1/2"), l("1")]).unwrap();
        let (x1, x2) = (3, 11);
        let x = x1 + x2 * 4;
        assert_eq!(decompose(x, &ctx, &levels).unwrap(), vec![x1, x2]);
        assert_eq!(part_low(x, &ctx, l("1/2")).unwrap(), x1);
        assert_eq!(part_window(x, &ctx, l("1/2"), l("3/2")).unwrap(), x2);
        assert_eq!(decompose(0, &ctx, &levels).unwrap(), vec![0, 0]);
        assert!(decompose(64, &ctx, &levels).is_err());
        assert!(compose(&[4, 0], &ctx, &levels).is_err());
    }

    #[test]
    fn concat_and_rotate() {
        let v = IntVector(vec![1, 2]);
        assert_eq!(v.concat(&IntVector(vec![3])).0, vec![1, 2, 3]);
        let v = IntVector(vec![1, 2, 3, 4]);
        assert_eq!(v.rotate(2, 2).unwrap().0, vec![3, 4]);
        assert_eq!(v.rotate(3, 2).unwrap().0, vec![4, 1]);
        assert!(v.rotate(4, 1).is_err());
        assert!(v.rotate(0, 4).is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!(l("13/9"), Level::new(13, 9));
        assert_eq!(l("0.25"), Level::new(1, 4));
        assert_eq!(l("-0.5"), Level::new(-1, 2));
        assert_eq!(l(" 3 "), Level::integer(3));
        assert!("1/0".parse::<Level>().is_err());
        assert!("abc".parse::<Level>().is_err());
        let v: Vec<Level> = serde_json::from_str(r#"["2/3", 0.1, 2]"#).unwrap();
        assert_eq!(v, vec![Level::new(2, 3), Level::new(1, 10), Level::integer(2)]);
        assert_eq!(serde_json::to_string(&Level::new(34, 9)).unwrap(), "\"34/9\"");
        assert!(serde_json::from_str::<LevelVector>(r#"["-1"]"#).is_err());
    }
}
