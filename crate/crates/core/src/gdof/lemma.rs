//! Numeric check of the key receiver-1 lemma of the MIMO bound, and of each
//! step of its proof, at reduced levels.
//!
//! Every level of the channel is multiplied by `scale`, so inputs live on
//! `{0, …, P̄^{scale} − 1}`. Conditioned on `X̄₁`, receiver 1 sees
//! `c(X̄_{1c}) + V(X̄₂)` on each antenna; the lemma compares
//! `2H((X̄_{2c})¹_{1/2})` with `2H(Ȳ₁ | X̄₁, 𝒢) + H((Ȳ₁)_{2/3} | (Ȳ₁)¹_{2/3}, X̄₁, 𝒢)`.
//! The split of a received value `y` at level `2/3` is `y.div_euclid(B)` and
//! `y.rem_euclid(B)` with `B = P̄^{2·scale/3}`, which handles negative sums.

use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, CoefficientSampler, CompiledCombination, MimoIcConfig, DEFAULT_DETERMINANT_FLOOR};
use crate::entropy::{
    conditional_entropy, entropy_of_counts, han_check_given, monte_carlo_mean, EntropyEstimate, EntropyMethod,
    JointTable, StateSpace,
};
use crate::error::{Error, Result};
use crate::power::{Level, LevelVector, PowerContext};
use crate::sumset::{FixedCoefficientPolicy, GapReport, InputModel, TheoremInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    #[serde(default)]
    pub channel: MimoIcConfig,
    #[serde(default = "default_scale")]
    pub scale: Level,
    #[serde(default = "default_floor")]
    pub determinant_floor: f64,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn default_scale() -> Level {
    Level::new(1, 2)
}

fn default_floor() -> f64 {
    DEFAULT_DETERMINANT_FLOOR
}

fn default_cap() -> u64 {
    1 << 22
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig { channel: MimoIcConfig::default(), scale: default_scale(), determinant_floor: default_floor(), cap: default_cap() }
    }
}

struct Receiver1 {
    comb: CompiledCombination,
    alphabet: u64,
    /// Global source indices of `X̄_{1c}` and `X̄₂` in the receiver spec.
    x1c: Vec<usize>,
    x2: Vec<usize>,
    split: u64,
    top_half: Vec<i64>,
    x2c_count: usize,
}

impl Receiver1 {
    fn new(cfg: &LemmaConfig, ctx: &PowerContext) -> Result<Self> {
        cfg.channel.validate()?;
        if cfg.scale.is_negative() || cfg.scale.is_zero() || cfg.scale > Level::ONE {
            return Err(Error::Invalid(format!("scale {} outside (0, 1]", cfg.scale)));
        }
        let spec = cfg.channel.rx1_spec(cfg.scale);
        let [_, c1, a2, c2] = cfg.channel.split();
        let alphabet = ctx.band(cfg.scale)?;
        let x2: Vec<usize> = a2.clone().chain(c2.clone()).collect();
        let states = (alphabet as u128).pow(x2.len() as u32);
        if states > cfg.cap as u128 {
            return Err(Error::SupportCap { required: states, cap: cfg.cap });
        }
        let split = ctx.band(cfg.scale * Level::new(2, 3))?;
        // (X̄_{2c})¹_{1/2}: the trimmed input of any X̄_{2c} term.
        let c_term = spec.terms.iter().position(|t| t.source == c2.start).expect("x2c term");
        let top_half = (0..alphabet as i64)
            .map(|x| spec.terms[c_term].input(x, ctx).map(|v| v as i64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Receiver1 {
            comb: spec.compile(ctx)?,
            alphabet,
            x1c: c1.collect(),
            x2,
            split: split.max(1),
            top_half,
            x2c_count: c2.len(),
        })
    }

    fn signals(&self, x1c: &[u64], x2: &[u64]) -> Vec<u64> {
        let n = self.x2.iter().chain(&self.x1c).max().map_or(0, |m| m + 1);
        let mut s = vec![0; n];
        for (&i, &v) in self.x1c.iter().zip(x1c) {
            s[i] = v;
        }
        for (&i, &v) in self.x2.iter().zip(x2) {
            s[i] = v;
        }
        s
    }

    fn x2_tuples(&self) -> Vec<Vec<u64>> {
        let space = StateSpace::Product { columns: self.x2.len(), alphabet: self.alphabet };
        crate::ais::support_tuples(&space, u64::MAX).expect("cap checked")
    }

    fn x1c_tuples(&self) -> Vec<Vec<u64>> {
        let space = StateSpace::Product { columns: self.x1c.len(), alphabet: self.alphabet };
        crate::ais::support_tuples(&space, u64::MAX).expect("small")
    }

    /// `2H((X̄_{2c})¹_{1/2})`, exact.
    fn lhs(&self) -> f64 {
        let mut counts = std::collections::BTreeMap::<i64, u64>::new();
        for &v in &self.top_half {
            *counts.entry(v).or_default() += 1;
        }
        2.0 * self.x2c_count as f64 * entropy_of_counts(counts.into_values().collect())
    }

    /// `2H(Ȳ₁ | X̄₁, g) + H(low | high, X̄₁, g)` for one channel draw.
    fn rhs(&self, rows: &[Vec<f64>], x2s: &[Vec<u64>]) -> f64 {
        let zero1c = vec![0; self.x1c.len()];
        let mut v: Vec<Vec<i64>> =
            x2s.iter().map(|x| rows.iter().map(|g| self.comb.eval(&self.signals(&zero1c, x), g)).collect()).collect();
        v.sort_unstable();
        let runs = run_counts(&v);
        let h_v = entropy_of_counts(runs.iter().map(|r| r.1).collect());
        // The high part only depends on c(x₁c) modulo the split size.
        let b = self.split as i64;
        let mut residues = std::collections::BTreeMap::<Vec<i64>, u64>::new();
        for x in self.x1c_tuples() {
            let c: Vec<i64> = rows.iter().map(|g| self.comb.eval(&self.signals(&x, &vec![0; self.x2.len()]), g)).collect();
            *residues.entry(c.iter().map(|c| c.rem_euclid(b)).collect()).or_default() += 1;
        }
        let total: u64 = residues.values().sum();
        let h_high: f64 = residues
            .iter()
            .map(|(rho, &w)| {
                let mut hi: Vec<(Vec<i64>, u64)> = runs
                    .iter()
                    .map(|(y, c)| (y.iter().zip(rho).map(|(y, r)| (y + r).div_euclid(b)).collect(), *c))
                    .collect();
                hi.sort_unstable();
                let merged = merge_counts(hi);
                w as f64 / total as f64 * entropy_of_counts(merged)
            })
            .sum();
        3.0 * h_v - h_high
    }
}

fn run_counts(sorted: &[Vec<i64>]) -> Vec<(Vec<i64>, u64)> {
    let mut out: Vec<(Vec<i64>, u64)> = Vec::new();
    for y in sorted {
        match out.last_mut() {
            Some((last, c)) if last == y => *c += 1,
            _ => out.push((y.clone(), 1)),
        }
    }
    out
}

fn merge_counts(sorted: Vec<(Vec<i64>, u64)>) -> Vec<u64> {
    let mut out: Vec<(Vec<i64>, u64)> = Vec::new();
    for (y, c) in sorted {
        match out.last_mut() {
            Some((last, n)) if *last == y => *n += c,
            _ => out.push((y, c)),
        }
    }
    out.into_iter().map(|(_, c)| c).collect()
}

/// Both sides of the lemma at each `P̄`, with independent uniform inputs.
///
/// In each report `lhs` holds the side that should dominate
/// (`2H(Ȳ₁|X̄₁,𝒢) + H(low|high, X̄₁, 𝒢)`), `rhs` holds `2H((X̄_{2c})¹_{1/2})`
/// and the normalized violation is `max(0, −normalized_gap)`.
pub fn lemma1_numeric_check(
    cfg: &LemmaConfig,
    pbars: &[u64],
    sampler: &CoefficientSampler,
    trials: usize,
) -> Result<Vec<std::result::Result<GapReport, String>>> {
    cfg.channel.validate()?;
    let mut out = Vec::new();
    for &pbar in pbars {
        let one = || -> Result<GapReport> {
            let ctx = PowerContext::from_pbar(pbar)?;
            let rx = Receiver1::new(cfg, &ctx)?;
            let x2s = rx.x2_tuples();
            let summary = monte_carlo_mean(trials, |d| {
                let mut s = sampler.fork(d as u64);
                let ch = draw_channel(&cfg.channel, &mut s, cfg.determinant_floor)?;
                Ok(rx.rhs(&ch.rx1, &x2s))
            })?;
            let lhs_value = rx.lhs();
            let log = ctx.log2_pbar();
            let dominant = EntropyEstimate {
                value: summary.mean,
                method: EntropyMethod::Exact,
                trials,
                normalizer: log,
                std_error: summary.std_dev / (trials as f64).sqrt(),
            };
            let gap = summary.mean - lhs_value;
            Ok(GapReport {
                power: ctx.power(),
                pbar,
                lhs: dominant,
                rhs: EntropyEstimate::exact(lhs_value).with_normalizer(log),
                gap,
                normalized_gap: gap / log,
                condition_ok: true,
                target: 0.0,
                gap_draws: summary.values.iter().map(|v| v - lhs_value).collect(),
            })
        };
        out.push(one().map_err(|e| e.to_string()));
    }
    Ok(out)
}

/// `max(0, −normalized_gap)`.
pub fn violation(report: &GapReport) -> f64 {
    (-report.normalized_gap).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: String,
    pub passed: bool,
    /// Largest absolute error for identities, smallest slack for inequalities.
    pub worst: f64,
    pub samples: usize,
}

pub const IDENTITY_TOLERANCE: f64 = 1e-10;

fn joint_for_draw(rx: &Receiver1, rows: &[Vec<f64>]) -> Result<JointTable> {
    let mut names: Vec<String> = Vec::new();
    names.extend((0..rx.x1c.len()).map(|i| format!("x1c{i}")));
    names.extend((0..rx.x2c_count).map(|i| format!("t{i}")));
    names.extend((0..rows.len()).map(|r| format!("y{r}")));
    names.extend((0..rows.len()).map(|r| format!("yh{r}")));
    names.extend((0..rows.len()).map(|r| format!("yl{r}")));
    let b = rx.split as i64;
    let first_c = rx.x2.len() - rx.x2c_count;
    let mut rows_out = Vec::new();
    for x1 in rx.x1c_tuples() {
        for x2 in rx.x2_tuples() {
            let sig = rx.signals(&x1, &x2);
            let y: Vec<i64> = rows.iter().map(|g| rx.comb.eval(&sig, g)).collect();
            let mut row: Vec<i64> = x1.iter().map(|&v| v as i64).collect();
            row.extend(x2[first_c..].iter().map(|&v| rx.top_half[v as usize]));
            row.extend(&y);
            row.extend(y.iter().map(|v| v.div_euclid(b)));
            row.extend(y.iter().map(|v| v.rem_euclid(b)));
            rows_out.push(row);
        }
    }
    JointTable::uniform(names, rows_out)
}

/// `λ = (1/2, 1/2)` for both outputs, `I₁₁ = I₂₁ = {2}`, `I₁₂ = I₂₂ = {1}`,
/// three sources; `pair` picks the sources seen alone by `Z₁₂` and `Z₂₂`.
pub fn lemma_sub_instance(pair: (usize, usize)) -> Result<TheoremInstance> {
    let half = Level::new(1, 2);
    let levels = LevelVector::new(vec![half, half])?;
    let single = |j: usize| (0..3).map(|i| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let inst = TheoremInstance {
        sources: 3,
        letters: 1,
        level_grid: vec![levels.clone(), levels],
        index_sets: vec![vec![vec![2], vec![1]], vec![vec![2], vec![1]]],
        trims: Vec::new(),
        input: InputModel::ProductUniform,
        conditioning: None,
        sampler: Default::default(),
        fixed_coefficients: FixedCoefficientPolicy::Explicit {
            values: vec![vec![vec![1.0; 3], single(pair.0)], vec![vec![1.0; 3], single(pair.1)]],
        },
        bounded_density_rhs: false,
    };
    inst.validate()?;
    Ok(inst)
}

/// Each proof step checked on its own at one `P̄`.
pub fn lemma1_submodular_steps(cfg: &LemmaConfig, pbar: u64, sampler: &CoefficientSampler, joints: usize) -> Result<Vec<StepReport>> {
    let ctx = PowerContext::from_pbar(pbar)?;
    let rx = Receiver1::new(cfg, &ctx)?;
    let x1: Vec<String> = (0..rx.x1c.len()).map(|i| format!("x1c{i}")).collect();
    let t: Vec<String> = (0..rx.x2c_count).map(|i| format!("t{i}")).collect();
    let y: Vec<String> = (0..2).map(|r| format!("y{r}")).collect();
    let yh: Vec<String> = (0..2).map(|r| format!("yh{r}")).collect();
    let yl: Vec<String> = (0..2).map(|r| format!("yl{r}")).collect();
    let refs = |v: &[&Vec<String>]| -> Vec<String> { v.iter().flat_map(|s| s.iter().cloned()).collect() };

    #[derive(Default)]
    struct Acc {
        chain_lemma: f64,
        chain_top: f64,
        independence: f64,
        monotone: f64,
        han: f64,
    }
    let per = (0..joints.max(1))
        .map(|d| -> Result<Acc> {
            let mut s = sampler.fork(d as u64);
            let ch = draw_channel(&cfg.channel, &mut s, cfg.determinant_floor)?;
            let table = joint_for_draw(&rx, &ch.rx1)?;
            let h = |a: &[String], b: &[String]| -> Result<f64> {
                let a: Vec<&str> = a.iter().map(String::as_str).collect();
                let b: Vec<&str> = b.iter().map(String::as_str).collect();
                conditional_entropy(&table, &a, &b)
            };
            let yh_x1 = refs(&[&yh, &x1]);
            let chain_lemma = (h(&y, &x1)? - h(&yh, &x1)? - h(&yl, &yh_x1)?).abs();
            let t_yh = refs(&[&t, &yh]);
            let chain_top = (h(&t_yh, &x1)? - h(&t, &yh_x1)? - h(&yh, &x1)?).abs();
            let independence = (h(&t, &x1)? - h(&t, &[])?).abs();
            let monotone = h(&t_yh, &x1)? - h(&t, &x1)?;
            let given: Vec<&str> = yh_x1.iter().map(String::as_str).collect();
            let (a, b, c) = ([t[0].as_str()], [t[1].as_str()], [t[2].as_str()]);
            let han = han_check_given(&table, &a, &b, &c, &given)?.slack;
            Ok(Acc { chain_lemma, chain_top, independence, monotone, han })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per.len();
    let max = |f: fn(&Acc) -> f64| per.iter().map(f).fold(0.0, f64::max);
    let min = |f: fn(&Acc) -> f64| per.iter().map(f).fold(f64::INFINITY, f64::min);
    let mut steps = vec![
        identity("chain rule: received signal split at 2/3", max(|a| a.chain_lemma), n),
        identity("chain rule: half-band signals with the high part", max(|a| a.chain_top), n),
        identity("half-band signals independent of the first input", max(|a| a.independence), n),
        inequality("adding the high part cannot lower the entropy", min(|a| a.monotone), n),
        inequality("Han split of the three half-band signals", min(|a| a.han), n),
    ];
    for pair in [(1, 2), (0, 2), (0, 1)] {
        let inst = lemma_sub_instance(pair)?;
        let ok = inst.condition_holds()?;
        steps.push(StepReport {
            step: format!("sum-set level condition, pair ({}, {})", pair.0 + 1, pair.1 + 1),
            passed: ok,
            worst: if ok { 0.0 } else { inst.condition_deficit()?.as_f64() },
            samples: 1,
        });
    }
    Ok(steps)
}

fn identity(step: &str, worst: f64, samples: usize) -> StepReport {
    StepReport { step: step.into(), passed: worst <= IDENTITY_TOLERANCE, worst, samples }
}

fn inequality(step: &str, worst: f64, samples: usize) -> StepReport {
    StepReport { step: step.into(), passed: worst >= -IDENTITY_TOLERANCE, worst, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn receiver_one_trims() {
        let cfg = LemmaConfig { scale: Level::ONE, ..LemmaConfig::default() };
        let ctx = PowerContext::from_pbar(16).unwrap();
        let rx = Receiver1::new(&LemmaConfig { cap: 1 << 21, ..cfg }, &ctx).unwrap();
        // (x mod 16) / 4 at full scale.
        assert_eq!(rx.top_half[13], 3);
        assert_eq!(rx.lhs(), 2.0 * 3.0 * 2.0);
    }

    #[test]
    fn zero_inputs_give_zero_outputs() {
        let cfg = LemmaConfig::default();
        let ctx = PowerContext::from_pbar(16).unwrap();
        let rx = Receiver1::new(&cfg, &ctx).unwrap();
        let rows = vec![vec![1.3; 7], vec![-1.7; 7]];
        let sig = rx.signals(&[0, 0], &[0; 5]);
        assert!(rows.iter().all(|g| rx.comb.eval(&sig, g) == 0));
    }

    #[test]
    fn sub_instances_meet_condition() {
        for pair in [(1, 2), (0, 2), (0, 1)] {
            assert!(lemma_sub_instance(pair).unwrap().condition_holds().unwrap());
        }
    }
}
