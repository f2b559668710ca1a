//! Exact and plug-in Shannon entropies over finite supports.

mod pushforward;

pub use pushforward::{monte_carlo_mean, pushforward_entropy, DrawSummary, SeparableOutput, StateSpace};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    Exact,
    PluginSample,
}

/// An entropy in bits together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
    pub trials: usize,
    pub normalizer: f64,
    /// Standard error of `value` over coefficient draws; zero when deterministic.
    #[serde(default)]
    pub std_error: f64,
}

impl EntropyEstimate {
    pub fn exact(value: f64) -> Self {
        EntropyEstimate { value, method: EntropyMethod::Exact, trials: 1, normalizer: 1.0, std_error: 0.0 }
    }

    pub fn with_normalizer(mut self, normalizer: f64) -> Self {
        self.normalizer = normalizer;
        self
    }

    pub fn normalized(&self) -> f64 {
        self.value / self.normalizer
    }
}

/// Compensated (Neumaier) sum.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `−Σ p log₂ p`, summed in ascending order.
pub fn entropy_of_masses(mut masses: Vec<f64>) -> f64 {
    masses.retain(|&p| p > 0.0);
    masses.sort_by(f64::total_cmp);
    stable_sum(masses.into_iter().map(|p| -p * p.log2())).max(0.0)
}

/// Entropy of the empirical distribution with the given counts.
pub fn entropy_of_counts(mut counts: Vec<u64>) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let weighted = stable_sum(counts.iter().map(|&c| c as f64 * (c as f64).log2()));
    (n.log2() - weighted / n).max(0.0)
}

/// A finite joint distribution over named integer variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    support: Vec<Vec<i64>>,
    mass: Vec<f64>,
}

impl JointTable {
    pub fn new(names: Vec<String>, support: Vec<Vec<i64>>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::Table(format!("{} tuples but {} masses", support.len(), mass.len())));
        }
        if let Some(row) = support.iter().find(|r| r.len() != names.len()) {
            return Err(Error::Table(format!("tuple of arity {} for {} variables", row.len(), names.len())));
        }
        let mut seen = std::collections::HashSet::with_capacity(names.len());
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Table(format!("duplicate variable name {dup:?}")));
        }
        if let Some(&p) = mass.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Table(format!("invalid mass {p}")));
        }
        let total = stable_sum(mass.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Table(format!("masses sum to {total}")));
        }
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| support[a].cmp(&support[b]));
        if order.windows(2).any(|w| support[w[0]] == support[w[1]]) {
            return Err(Error::Table("support tuples are not distinct".into()));
        }
        Ok(JointTable { names, support, mass })
    }

    /// Aggregates repeated tuples and normalizes non-negative weights.
    pub fn from_weights(names: Vec<String>, rows: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut acc: HashMap<Vec<i64>, Vec<f64>> = HashMap::new();
        for (row, w) in rows {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Table(format!("invalid weight {w}")));
            }
            acc.entry(row).or_default().push(w);
        }
        let mut rows: Vec<(Vec<i64>, f64)> = acc.into_iter().map(|(k, ws)| (k, stable_sum(ws))).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let total = stable_sum(rows.iter().map(|r| r.1));
        if total <= 0.0 {
            return Err(Error::Table("weights sum to zero".into()));
        }
        let (support, mass) = rows.into_iter().map(|(k, w)| (k, w / total)).unzip();
        JointTable::new(names, support, mass)
    }

    /// Uniform distribution over the given tuples (repeats add weight).
    pub fn uniform(names: Vec<String>, rows: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        JointTable::from_weights(names, rows.into_iter().map(|r| (r, 1.0)))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn support(&self) -> &[Vec<i64>] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn columns(&self, subset: &[&str]) -> Result<Vec<usize>> {
        subset
            .iter()
            .map(|s| self.names.iter().position(|n| n == s).ok_or_else(|| Error::UnknownVariable(s.to_string())))
            .collect()
    }

    /// Masses of the marginal on `subset`.
    pub fn marginal(&self, subset: &[&str]) -> Result<Vec<f64>> {
        let cols = self.columns(subset)?;
        let mut rows: Vec<(Vec<i64>, f64)> =
            self.support.iter().zip(&self.mass).map(|(r, &p)| (cols.iter().map(|&c| r[c]).collect(), p)).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = Vec::new();
        let mut i = 0;
        while i < rows.len() {
            let mut j = i;
            while j < rows.len() && rows[j].0 == rows[i].0 {
                j += 1;
            }
            out.push(stable_sum(rows[i..j].iter().map(|r| r.1)));
            i = j;
        }
        Ok(out)
    }
}

/// `H(subset)` in bits. The empty subset has entropy 0.
pub fn exact_entropy(table: &JointTable, subset: &[&str]) -> Result<EntropyEstimate> {
    if subset.is_empty() {
        return Ok(EntropyEstimate::exact(0.0));
    }
    Ok(EntropyEstimate::exact(entropy_of_masses(table.marginal(subset)?)))
}

/// `H(target | given) = H(target, given) − H(given)`.
pub fn conditional_entropy(table: &JointTable, target: &[&str], given: &[&str]) -> Result<f64> {
    let joint: Vec<&str> = target.iter().chain(given).copied().collect();
    Ok(exact_entropy(table, &joint)?.value - exact_entropy(table, given)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HanReport {
    pub holds: bool,
    /// `H(A,B) + H(A,C) + H(B,C) − 2H(A,B,C)`, conditioned if requested.
    pub slack: f64,
}

const HAN_TOLERANCE: f64 = 1e-10;

/// `2H(A,B,C) ≤ H(A,B) + H(A,C) + H(B,C)`; each of `a`, `b`, `c` may group several variables.
pub fn han_check(table: &JointTable, a: &[&str], b: &[&str], c: &[&str]) -> Result<HanReport> {
    han_check_given(table, a, b, c, &[])
}

/// Conditional form: every entropy is conditioned on `given`.
pub fn han_check_given(table: &JointTable, a: &[&str], b: &[&str], c: &[&str], given: &[&str]) -> Result<HanReport> {
    let h = |parts: &[&[&str]]| -> Result<f64> {
        let vars: Vec<&str> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        conditional_entropy(table, &vars, given)
    };
    let slack = h(&[a, b])? + h(&[a, c])? + h(&[b, c])? - 2.0 * h(&[a, b, c])?;
    Ok(HanReport { holds: slack >= -HAN_TOLERANCE, slack })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PluginEstimate {
    pub estimate: EntropyEstimate,
    pub support_seen: usize,
    /// First-order downward bias `(support − 1) / (2·n·ln 2)`.
    pub bias_bits: f64,
    /// Set when fewer than five samples fall on each observed value on average.
    pub undersampled: bool,
}

pub fn plugin_entropy(samples: &[Vec<i64>]) -> Result<PluginEstimate> {
    if samples.is_empty() {
        return Err(Error::Invalid("plug-in entropy needs at least one sample".into()));
    }
    let mut counts: HashMap<&[i64], u64> = HashMap::new();
    for s in samples {
        *counts.entry(s.as_slice()).or_default() += 1;
    }
    let n = samples.len();
    let support = counts.len();
    let value = entropy_of_counts(counts.into_values().collect());
    Ok(PluginEstimate {
        estimate: EntropyEstimate { value, method: EntropyMethod::PluginSample, trials: n, normalizer: 1.0, std_error: 0.0 },
        support_seen: support,
        bias_bits: (support as f64 - 1.0) / (2.0 * n as f64 * std::f64::consts::LN_2),
        undersampled: n < 5 * support,
    })
}
