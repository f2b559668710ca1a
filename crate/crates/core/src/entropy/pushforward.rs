//! Exact entropy of deterministic images of finite input distributions.
//!
//! Every output handled here is separable: its value is a sum of one table
//! lookup per input column. A joint output tuple then packs into one integer
//! key per state, and the entropy is read off a key histogram.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{entropy_of_counts, entropy_of_masses, stable_sum};
use crate::error::{Error, Result};

/// Input distribution over integer columns.
#[derive(Clone, Copy, Debug)]
pub enum StateSpace<'a> {
    /// Independent uniform columns on `{0, …, alphabet − 1}`.
    Product { columns: usize, alphabet: u64 },
    /// One uniform value on `{0, …, alphabet − 1}` copied into every column.
    Diagonal { columns: usize, alphabet: u64 },
    /// Explicit tuples with weights summing to one.
    Weighted { tuples: &'a [Vec<u64>], weights: &'a [f64] },
}

impl StateSpace<'_> {
    pub fn columns(&self) -> usize {
        match self {
            StateSpace::Product { columns, .. } | StateSpace::Diagonal { columns, .. } => *columns,
            StateSpace::Weighted { tuples, .. } => tuples.first().map_or(0, |t| t.len()),
        }
    }

    pub fn states(&self) -> u128 {
        match *self {
            StateSpace::Product { columns, alphabet } => (alphabet as u128).saturating_pow(columns as u32),
            StateSpace::Diagonal { alphabet, .. } => alphabet as u128,
            StateSpace::Weighted { tuples, .. } => tuples.len() as u128,
        }
    }

    /// Largest value any column takes, plus one.
    pub fn column_alphabet(&self) -> u64 {
        match *self {
            StateSpace::Product { alphabet, .. } | StateSpace::Diagonal { alphabet, .. } => alphabet,
            StateSpace::Weighted { tuples, .. } => tuples.iter().flatten().max().map_or(0, |m| m + 1),
        }
    }

    pub fn check_cap(&self, cap: u64) -> Result<()> {
        let required = self.states();
        if required > cap as u128 {
            return Err(Error::SupportCap { required, cap });
        }
        Ok(())
    }
}

/// One output: per-column contribution tables, `None` for columns it ignores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableOutput {
    pub columns: Vec<Option<Vec<i64>>>,
}

impl SeparableOutput {
    pub fn new(columns: Vec<Option<Vec<i64>>>) -> Self {
        SeparableOutput { columns }
    }

    /// Value for one input tuple.
    pub fn eval(&self, tuple: &[u64]) -> i64 {
        self.columns.iter().zip(tuple).filter_map(|(t, &x)| t.as_ref().map(|t| t[x as usize])).sum()
    }

    fn bounds(&self) -> Vec<(i64, i64)> {
        self.columns
            .iter()
            .map(|t| match t {
                Some(t) => (*t.iter().min().unwrap_or(&0), *t.iter().max().unwrap_or(&0)),
                None => (0, 0),
            })
            .collect()
    }
}

const KEY_LIMIT: u128 = 1 << 62;
const DENSE_LIMIT: u64 = 1 << 25;

struct Keyed {
    tables: Vec<Vec<u64>>,
    space: u64,
}

/// Packs a group of outputs into per-column key tables; `None` if the key space is too wide.
fn key_tables(outputs: &[&SeparableOutput], columns: usize, alphabet: u64) -> Option<Keyed> {
    let mut tables = vec![vec![0u64; alphabet as usize]; columns];
    let mut stride: u128 = 1;
    for out in outputs {
        let bounds = out.bounds();
        let radix: u128 = bounds.iter().map(|(lo, hi)| (hi - lo) as u128).sum::<u128>() + 1;
        for (c, table) in out.columns.iter().enumerate() {
            if let Some(t) = table {
                let lo = bounds[c].0;
                for (x, slot) in tables[c].iter_mut().enumerate() {
                    *slot += (stride * (t[x] - lo) as u128) as u64;
                }
            }
        }
        stride = stride.checked_mul(radix)?;
        if stride > KEY_LIMIT {
            return None;
        }
    }
    Some(Keyed { tables, space: stride as u64 })
}

fn walk(tables: &[&[u64]], base: u64, f: &mut impl FnMut(u64)) {
    match tables {
        [] => f(base),
        [last] => {
            for &k in *last {
                f(base + k);
            }
        }
        [first, rest @ ..] => {
            for &k in *first {
                walk(rest, base + k, f);
            }
        }
    }
}

/// Calls `f(key, weight)` for every state in canonical order. Product columns
/// whose key table is constant are skipped: they scale every count equally.
fn for_each_key(space: &StateSpace<'_>, keyed: &Keyed, mut f: impl FnMut(u64, f64)) {
    match *space {
        StateSpace::Product { .. } => {
            let live: Vec<&[u64]> =
                keyed.tables.iter().filter(|t| t.iter().any(|&k| k != t[0])).map(|t| t.as_slice()).collect();
            let base: u64 = keyed.tables.iter().filter(|t| t.iter().all(|&k| k == t[0])).map(|t| t[0]).sum();
            walk(&live, base, &mut |k| f(k, 1.0));
        }
        StateSpace::Diagonal { alphabet, .. } => {
            for x in 0..alphabet as usize {
                f(keyed.tables.iter().map(|t| t[x]).sum(), 1.0);
            }
        }
        StateSpace::Weighted { tuples, weights } => {
            for (tuple, &w) in tuples.iter().zip(weights) {
                f(tuple.iter().zip(&keyed.tables).map(|(&x, t)| t[x as usize]).sum(), w);
            }
        }
    }
}

fn is_uniform(space: &StateSpace<'_>) -> bool {
    !matches!(space, StateSpace::Weighted { .. })
}

fn entropy_of_keys(space: &StateSpace<'_>, keyed: &Keyed) -> f64 {
    if is_uniform(space) {
        let live_states = match *space {
            StateSpace::Product { alphabet, .. } => {
                let live = keyed.tables.iter().filter(|t| t.iter().any(|&k| k != t[0])).count();
                (alphabet as u128).pow(live as u32)
            }
            _ => space.states(),
        };
        if keyed.space <= DENSE_LIMIT && (keyed.space as u128) <= 16 * live_states + 1024 && live_states < u32::MAX as u128 {
            let mut counts = vec![0u32; keyed.space as usize];
            for_each_key(space, keyed, |k, _| counts[k as usize] += 1);
            return entropy_of_counts(counts.into_iter().filter(|&c| c > 0).map(u64::from).collect());
        }
        let mut keys = Vec::with_capacity(live_states as usize);
        for_each_key(space, keyed, |k, _| keys.push(k));
        keys.sort_unstable();
        return entropy_of_counts(run_lengths(&keys));
    }
    let mut pairs = Vec::new();
    for_each_key(space, keyed, |k, w| pairs.push((k, w)));
    entropy_of_masses(aggregate(pairs))
}

fn run_lengths(sorted: &[u64]) -> Vec<u64> {
    sorted.chunk_by(|a, b| a == b).map(|r| r.len() as u64).collect()
}

fn aggregate(mut pairs: Vec<(u64, f64)>) -> Vec<f64> {
    pairs.sort_by_key(|p| p.0);
    pairs.chunk_by(|a, b| a.0 == b.0).map(|g| stable_sum(g.iter().map(|p| p.1))).collect()
}

fn dense_rank(keys: &[u64]) -> (Vec<u64>, u64) {
    let mut uniq = keys.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let ids = keys.iter().map(|k| uniq.binary_search(k).expect("key present") as u64).collect();
    (ids, uniq.len() as u64)
}

/// `H(out₁, …, out_m)` in bits under the input distribution `space`.
pub fn pushforward_entropy(space: &StateSpace<'_>, outputs: &[SeparableOutput], cap: u64) -> Result<f64> {
    space.check_cap(cap)?;
    let columns = space.columns();
    let alphabet = space.column_alphabet();
    for out in outputs {
        if out.columns.len() != columns {
            return Err(Error::CountMismatch { what: "output columns", expected: columns, actual: out.columns.len() });
        }
        if let Some(t) = out.columns.iter().flatten().find(|t| (t.len() as u64) < alphabet) {
            return Err(Error::CountMismatch { what: "table entries", expected: alphabet as usize, actual: t.len() });
        }
    }
    if outputs.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<&SeparableOutput> = outputs.iter().collect();
    if let Some(keyed) = key_tables(&refs, columns, alphabet) {
        return Ok(entropy_of_keys(space, &keyed));
    }
    // Wide joint keys: rank one output at a time and fold the ranks together.
    let mut ids: Option<(Vec<u64>, u64)> = None;
    let mut weights = Vec::new();
    for out in &refs {
        let keyed = key_tables(&[out], columns, alphabet).ok_or(Error::Overflow("single output key"))?;
        let mut keys = Vec::new();
        weights.clear();
        for_each_full(space, &keyed, |k, w| {
            keys.push(k);
            weights.push(w);
        });
        let (own, n_own) = dense_rank(&keys);
        ids = Some(match ids {
            None => (own, n_own),
            Some((prev, _)) => dense_rank(&prev.iter().zip(&own).map(|(&p, &o)| p * n_own + o).collect::<Vec<_>>()),
        });
    }
    let (fin, n) = ids.expect("non-empty outputs");
    if !is_uniform(space) {
        return Ok(entropy_of_masses(aggregate(fin.into_iter().zip(weights).collect())));
    }
    let mut counts = vec![0u64; n as usize];
    for id in fin {
        counts[id as usize] += 1;
    }
    Ok(entropy_of_counts(counts))
}

/// Like [`for_each_key`] but never skips columns, so every output sees the same state order.
fn for_each_full(space: &StateSpace<'_>, keyed: &Keyed, mut f: impl FnMut(u64, f64)) {
    match *space {
        StateSpace::Product { .. } => {
            let all: Vec<&[u64]> = keyed.tables.iter().map(|t| t.as_slice()).collect();
            walk(&all, 0, &mut |k| f(k, 1.0));
        }
        _ => for_each_key(space, keyed, f),
    }
}

/// Per-draw values and their mean, in draw order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub values: Vec<f64>,
}

impl DrawSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = stable_sum(values.iter().copied()) / n;
        let var = stable_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
        DrawSummary { mean, std_dev: var.sqrt(), values }
    }
}

/// Evaluates `f(draw)` for every draw in parallel and averages in draw order.
pub fn monte_carlo_mean<F>(draws: usize, f: F) -> Result<DrawSummary>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    if draws == 0 {
        return Err(Error::Invalid("at least one draw is required".into()));
    }
    let values = (0..draws).into_par_iter().map(f).collect::<Result<Vec<f64>>>()?;
    Ok(DrawSummary::from_values(values))
}
