//! Exact linear bookkeeping over opaque entropy symbols.
//!
//! An inequality reads `Σ cᵢ·termᵢ ≤ b·(n log P̄) + slack`, the slack standing
//! for every `n·o(log P̄)` absorbed along the way. A certificate scales
//! premises by rational weights; it is valid when the weighted sum reproduces
//! the target's terms exactly and its bound does not exceed the target's.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::Rational;

/// Interned entropy expressions; one id per distinct name.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TermDict {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TermDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// `Σ cᵢ·termᵢ` against a shared dictionary, zero coefficients dropped.
#[derive(Clone, Debug)]
pub struct Ledger {
    dict: Arc<TermDict>,
    coeffs: BTreeMap<usize, Rational>,
}

impl PartialEq for Ledger {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.dict, &other.dict) && self.coeffs == other.coeffs
    }
}

impl Ledger {
    pub fn zero(dict: &Arc<TermDict>) -> Self {
        Ledger { dict: Arc::clone(dict), coeffs: BTreeMap::new() }
    }

    pub fn from_terms(dict: &Arc<TermDict>, terms: &[(&str, Rational)]) -> Result<Self> {
        let mut l = Ledger::zero(dict);
        for &(name, c) in terms {
            l.add_term(dict.id(name)?, c);
        }
        Ok(l)
    }

    fn add_term(&mut self, id: usize, c: Rational) {
        let e = self.coeffs.entry(id).or_insert(Rational::ZERO);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&id);
        }
    }

    pub fn dict(&self) -> &Arc<TermDict> {
        &self.dict
    }

    pub fn coefficient(&self, name: &str) -> Rational {
        self.dict.id(name).ok().and_then(|i| self.coeffs.get(&i).copied()).unwrap_or(Rational::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `self + w·other`.
    pub fn add_scaled(&mut self, other: &Ledger, w: Rational) -> Result<()> {
        if !Arc::ptr_eq(&self.dict, &other.dict) {
            return Err(Error::DictionaryMismatch);
        }
        for (&id, &c) in &other.coeffs {
            self.add_term(id, w * c);
        }
        Ok(())
    }

    /// Named non-zero coefficients in dictionary order.
    pub fn terms(&self) -> Vec<(String, Rational)> {
        self.coeffs.iter().map(|(&i, &c)| (self.dict.name(i).to_string(), c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `≤`; only non-negative weights are meaningful.
    #[default]
    Le,
    /// `=`; may be used with either sign.
    Eq,
}

/// `lhs (≤ | =) bound·(n log P̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Inequality {
    pub name: String,
    pub lhs: Ledger,
    pub relation: Relation,
    pub bound: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub premises: Vec<(Inequality, Rational)>,
    pub target: Inequality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateCheck {
    pub valid: bool,
    /// `Σ wᵢ·lhsᵢ − target.lhs`; zero when the terms match.
    pub residual: Ledger,
    /// `target.bound − Σ wᵢ·boundᵢ`; non-negative when the bound is dominated.
    pub bound_slack: Rational,
    pub reason: Option<String>,
}

/// Serializable view of a check result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub valid: bool,
    pub residual: BTreeMap<String, Rational>,
    pub bound_slack: Rational,
    pub reason: Option<String>,
}

impl From<&CertificateCheck> for CheckSummary {
    fn from(c: &CertificateCheck) -> Self {
        CheckSummary {
            valid: c.valid,
            residual: c.residual.terms().into_iter().collect(),
            bound_slack: c.bound_slack,
            reason: c.reason.clone(),
        }
    }
}

pub fn check_certificate(cert: &Certificate) -> Result<CertificateCheck> {
    let dict = cert.target.lhs.dict();
    let mut sum = Ledger::zero(dict);
    let mut bound = Rational::ZERO;
    let mut reason = None;
    for (p, w) in &cert.premises {
        if p.relation == Relation::Le && w.is_negative() {
            reason.get_or_insert_with(|| format!("negative weight {w} on inequality '{}'", p.name));
        }
        sum.add_scaled(&p.lhs, *w)?;
        bound += *w * p.bound;
    }
    if cert.target.relation == Relation::Eq {
        return Err(Error::Invalid("a certificate target must be an inequality".into()));
    }
    let mut residual = sum;
    residual.add_scaled(&cert.target.lhs, -Rational::ONE)?;
    let bound_slack = cert.target.bound - bound;
    if reason.is_none() && !residual.is_zero() {
        let (name, c) = residual.terms().remove(0);
        reason = Some(format!("term '{name}' is left with coefficient {c}"));
    }
    if reason.is_none() && bound_slack.is_negative() {
        reason = Some(format!("combined bound exceeds the target by {}", -bound_slack));
    }
    Ok(CertificateCheck { valid: reason.is_none(), residual, bound_slack, reason })
}

/// Entropy symbols of the two-user MIMO bounds. `U` is `n log P̄`.
pub const TERMS: &[&str] = &[
    "nR1",
    "nR2",
    "H(Y1|G)",
    "H(Y1|X1,G)",
    "H(Y1^1_2/3|G)",
    "H(Y1^1_2/3|X1,G)",
    "H(Y1^1_2/3|X2,G)",
    "H(Y1_2/3|Y1^1_2/3,G)",
    "H(Y1_2/3|Y1^1_2/3,X1,G)",
    "H(X2c^1_1/2)",
    "H(X2c)",
    "H(X2c_1/2|X2c^1_1/2)",
    "H(Y2|G)",
    "H(Y2|X1,G)",
    "H(Y2|X2,G)",
    "H(Y21,Y22,Y23|X1,G)",
    "H(Y21,Y22|X1,G)",
    "H(Y21,Y23|X1,G)",
    "H(Y22,Y23|X1,G)",
];

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn int(n: i64) -> Rational {
    Rational::integer(n)
}

/// Built-in premises, sharing one dictionary.
#[derive(Clone, Debug)]
pub struct Registry {
    dict: Arc<TermDict>,
    premises: Vec<Inequality>,
}

type Row = (&'static str, Relation, &'static [(&'static str, (i64, i64))], (i64, i64));

const PREMISES: &[Row] = {
    use Relation::{Eq, Le};
    &[
        ("fano-rx1", Le, &[("nR1", (1, 1)), ("H(Y1|G)", (-1, 1)), ("H(Y1|X1,G)", (1, 1))], (0, 1)),
        ("split-rx1", Eq, &[("H(Y1|G)", (1, 1)), ("H(Y1^1_2/3|G)", (-1, 1)), ("H(Y1_2/3|Y1^1_2/3,G)", (-1, 1))], (0, 1)),
        (
            "split-rx1-given-x1",
            Eq,
            &[("H(Y1|X1,G)", (1, 1)), ("H(Y1^1_2/3|X1,G)", (-1, 1)), ("H(Y1_2/3|Y1^1_2/3,X1,G)", (-1, 1))],
            (0, 1),
        ),
        ("size-rx1", Le, &[("H(Y1|G)", (1, 1))], (2, 1)),
        ("size-rx1-low", Le, &[("H(Y1_2/3|Y1^1_2/3,G)", (1, 1))], (4, 3)),
        (
            "independent-conditioning",
            Le,
            &[("H(Y1^1_2/3|G)", (1, 1)), ("H(Y1^1_2/3|X1,G)", (-1, 1)), ("H(Y1^1_2/3|X2,G)", (-1, 1))],
            (0, 1),
        ),
        (
            "key-lemma",
            Le,
            &[("H(X2c^1_1/2)", (2, 1)), ("H(Y1|X1,G)", (-2, 1)), ("H(Y1_2/3|Y1^1_2/3,X1,G)", (-1, 1))],
            (0, 1),
        ),
        ("genie-rx2", Le, &[("nR2", (1, 1)), ("H(Y2|X1,G)", (-1, 1))], (0, 1)),
        ("fano-rx2", Le, &[("nR2", (1, 1)), ("H(Y2|G)", (-1, 1)), ("H(Y2|X2,G)", (1, 1))], (0, 1)),
        ("size-rx2", Le, &[("H(Y2|G)", (1, 1))], (3, 1)),
        ("rx2-given-x1", Eq, &[("H(Y2|X1,G)", (1, 1)), ("H(X2c)", (-1, 1))], (0, 1)),
        ("rx1-top-below-rx2", Le, &[("H(Y1^1_2/3|X2,G)", (1, 1)), ("H(Y2|X2,G)", (-1, 1))], (0, 1)),
        ("split-x2c", Eq, &[("H(X2c)", (1, 1)), ("H(X2c^1_1/2)", (-1, 1)), ("H(X2c_1/2|X2c^1_1/2)", (-1, 1))], (0, 1)),
        ("size-x2c-low", Le, &[("H(X2c_1/2|X2c^1_1/2)", (1, 1))], (3, 2)),
        (
            "rx1-chain",
            Le,
            &[("nR1", (3, 1)), ("H(X2c^1_1/2)", (2, 1)), ("H(Y1^1_2/3|X2,G)", (-1, 1))],
            (16, 3),
        ),
        (
            "rx2-chain",
            Le,
            &[("nR2", (3, 1)), ("H(X2c^1_1/2)", (-2, 1)), ("H(Y1^1_2/3|X2,G)", (1, 1))],
            (6, 1),
        ),
        ("rx2-components", Eq, &[("H(Y2|X1,G)", (1, 1)), ("H(Y21,Y22,Y23|X1,G)", (-1, 1))], (0, 1)),
        (
            "han-rx2",
            Le,
            &[
                ("H(Y21,Y22,Y23|X1,G)", (2, 1)),
                ("H(Y21,Y22|X1,G)", (-1, 1)),
                ("H(Y21,Y23|X1,G)", (-1, 1)),
                ("H(Y22,Y23|X1,G)", (-1, 1)),
            ],
            (0, 1),
        ),
        ("pair-12-below-rx1", Le, &[("H(Y21,Y22|X1,G)", (1, 1)), ("H(Y1|X1,G)", (-1, 1))], (1, 1)),
        ("pair-13-below-rx1", Le, &[("H(Y21,Y23|X1,G)", (1, 1)), ("H(Y1|X1,G)", (-1, 1))], (1, 1)),
        ("pair-23-below-rx1", Le, &[("H(Y22,Y23|X1,G)", (1, 1)), ("H(Y1|X1,G)", (-1, 1))], (1, 1)),
    ]
};

type CertRow = (&'static str, &'static [(&'static str, (i64, i64))], &'static [(&'static str, i64)], (i64, i64));

/// `(name, weighted premises, target terms, target bound)`.
const CERTIFICATES: &[CertRow] = &[
    ("sum-rate", &[("rx1-chain", (1, 1)), ("rx2-chain", (1, 1))], &[("nR1", 3), ("nR2", 3)], (34, 3)),
    (
        "rx1-chain",
        &[
            ("fano-rx1", (3, 1)),
            ("split-rx1", (1, 1)),
            ("split-rx1-given-x1", (-1, 1)),
            ("size-rx1", (2, 1)),
            ("size-rx1-low", (1, 1)),
            ("independent-conditioning", (1, 1)),
            ("key-lemma", (1, 1)),
        ],
        &[],
        (16, 3),
    ),
    (
        "rx2-chain",
        &[
            ("genie-rx2", (2, 1)),
            ("fano-rx2", (1, 1)),
            ("size-rx2", (1, 1)),
            ("rx2-given-x1", (2, 1)),
            ("rx1-top-below-rx2", (1, 1)),
            ("split-x2c", (2, 1)),
            ("size-x2c-low", (2, 1)),
        ],
        &[],
        (6, 1),
    ),
    (
        "sum-rate-primitive",
        &[
            ("fano-rx1", (3, 1)),
            ("split-rx1", (1, 1)),
            ("split-rx1-given-x1", (-1, 1)),
            ("size-rx1", (2, 1)),
            ("size-rx1-low", (1, 1)),
            ("independent-conditioning", (1, 1)),
            ("key-lemma", (1, 1)),
            ("genie-rx2", (2, 1)),
            ("fano-rx2", (1, 1)),
            ("size-rx2", (1, 1)),
            ("rx2-given-x1", (2, 1)),
            ("rx1-top-below-rx2", (1, 1)),
            ("split-x2c", (2, 1)),
            ("size-x2c-low", (2, 1)),
        ],
        &[("nR1", 3), ("nR2", 3)],
        (34, 3),
    ),
    (
        "weighted",
        &[
            ("fano-rx1", (3, 1)),
            ("genie-rx2", (2, 1)),
            ("size-rx1", (3, 1)),
            ("rx2-components", (2, 1)),
            ("han-rx2", (1, 1)),
            ("pair-12-below-rx1", (1, 1)),
            ("pair-13-below-rx1", (1, 1)),
            ("pair-23-below-rx1", (1, 1)),
        ],
        &[("nR1", 3), ("nR2", 2)],
        (9, 1),
    ),
];

/// Certificates whose target is a registered premise take that premise as target.
pub const BUILTIN_CERTIFICATES: &[&str] = &["sum-rate", "rx1-chain", "rx2-chain", "sum-rate-primitive", "weighted"];

impl Registry {
    pub fn builtin() -> Self {
        Self::with_terms(&[]).expect("built-in premises use known terms")
    }

    /// Built-in premises over a dictionary extended by `extra` symbols.
    pub fn with_terms(extra: &[String]) -> Result<Self> {
        let mut dict = TermDict::new();
        for t in TERMS {
            dict.intern(t);
        }
        for t in extra {
            dict.intern(t);
        }
        let dict = Arc::new(dict);
        let premises = PREMISES
            .iter()
            .map(|&(name, relation, terms, (bn, bd))| {
                let terms: Vec<(&str, Rational)> = terms.iter().map(|&(t, (n, d))| (t, q(n, d))).collect();
                Ok(Inequality { name: name.to_string(), lhs: Ledger::from_terms(&dict, &terms)?, relation, bound: q(bn, bd) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Registry { dict, premises })
    }

    pub fn dict(&self) -> &Arc<TermDict> {
        &self.dict
    }

    pub fn premises(&self) -> &[Inequality] {
        &self.premises
    }

    pub fn premise(&self, name: &str) -> Result<&Inequality> {
        self.premises
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownBuiltin(format!("premise '{name}'")))
    }

    pub fn certificate(&self, name: &str) -> Result<Certificate> {
        let &(cname, weighted, target_terms, (bn, bd)) = CERTIFICATES
            .iter()
            .find(|c| c.0 == name)
            .ok_or_else(|| Error::UnknownBuiltin(format!("certificate '{name}'")))?;
        let premises = weighted
            .iter()
            .map(|&(p, (n, d))| Ok((self.premise(p)?.clone(), q(n, d))))
            .collect::<Result<Vec<_>>>()?;
        let target = if target_terms.is_empty() {
            self.premise(cname)?.clone()
        } else {
            let terms: Vec<(&str, Rational)> = target_terms.iter().map(|&(t, c)| (t, int(c))).collect();
            Inequality {
                name: cname.to_string(),
                lhs: Ledger::from_terms(&self.dict, &terms)?,
                relation: Relation::Le,
                bound: q(bn, bd),
            }
        };
        Ok(Certificate { premises, target })
    }
}

/// An inequality in the instance format: term names to coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub relation: Relation,
    pub terms: BTreeMap<String, Rational>,
    pub bound: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PremiseRef {
    Builtin(String),
    Inline(InequalitySpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPremise {
    pub premise: PremiseRef,
    pub weight: Rational,
}

/// A certificate named from the registry or spelled out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CertificateSpec {
    Builtin(String),
    Custom {
        /// Symbols beyond the built-in dictionary.
        #[serde(default)]
        terms: Vec<String>,
        premises: Vec<WeightedPremise>,
        target: InequalitySpec,
    },
}

fn build_inequality(reg: &Registry, spec: &InequalitySpec, fallback: &str) -> Result<Inequality> {
    let terms: Vec<(&str, Rational)> = spec.terms.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    Ok(Inequality {
        name: spec.name.clone().unwrap_or_else(|| fallback.to_string()),
        lhs: Ledger::from_terms(reg.dict(), &terms)?,
        relation: spec.relation,
        bound: spec.bound,
    })
}

impl CertificateSpec {
    pub fn build(&self) -> Result<Certificate> {
        match self {
            CertificateSpec::Builtin(name) => Registry::builtin().certificate(name),
            CertificateSpec::Custom { terms, premises, target } => {
                let reg = Registry::with_terms(terms)?;
                let premises = premises
                    .iter()
                    .enumerate()
                    .map(|(i, wp)| {
                        let p = match &wp.premise {
                            PremiseRef::Builtin(name) => reg.premise(name)?.clone(),
                            PremiseRef::Inline(spec) => build_inequality(&reg, spec, &format!("premise {}", i + 1))?,
                        };
                        Ok((p, wp.weight))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Certificate { premises, target: build_inequality(&reg, target, "target")? })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_verify() {
        let reg = Registry::builtin();
        for name in BUILTIN_CERTIFICATES {
            let c = check_certificate(&reg.certificate(name).unwrap()).unwrap();
            assert!(c.valid, "{name}: {:?}", c.reason);
            assert_eq!(c.bound_slack, Rational::ZERO, "{name}");
        }
    }

    #[test]
    fn weight_mutations_fail() {
        let reg = Registry::builtin();
        let eps = q(1, 1000);
        for name in BUILTIN_CERTIFICATES {
            let cert = reg.certificate(name).unwrap();
            for i in 0..cert.premises.len() {
                for delta in [eps, -eps] {
                    let mut m = cert.clone();
                    m.premises[i].1 += delta;
                    assert!(!check_certificate(&m).unwrap().valid, "{name} premise {i}");
                }
            }
        }
    }

    #[test]
    fn trivial_certificate() {
        let reg = Registry::builtin();
        let target = Inequality { name: "0 <= 0".into(), lhs: Ledger::zero(reg.dict()), relation: Relation::Le, bound: Rational::ZERO };
        let premise = reg.premise("fano-rx1").unwrap().clone();
        let c = Certificate { premises: vec![(premise, Rational::ZERO)], target };
        assert!(check_certificate(&c).unwrap().valid);
    }

    #[test]
    fn mismatched_dictionaries() {
        let a = Registry::builtin();
        let b = Registry::builtin();
        let c = Certificate {
            premises: vec![(a.premise("fano-rx1").unwrap().clone(), Rational::ONE)],
            target: b.premise("fano-rx1").unwrap().clone(),
        };
        assert_eq!(check_certificate(&c), Err(Error::DictionaryMismatch));
    }

    #[test]
    fn custom_spec() {
        let text = r#"{"custom": {
            "terms": ["H(A)"],
            "premises": [
                {"premise": {"builtin": "rx1-chain"}, "weight": "1"},
                {"premise": {"builtin": "rx2-chain"}, "weight": "1"},
                {"premise": {"inline": {"terms": {"H(A)": "1"}, "bound": "1/3"}}, "weight": "0"}
            ],
            "target": {"terms": {"nR1": "3", "nR2": "3"}, "bound": "34/3"}
        }}"#;
        let spec: CertificateSpec = serde_json::from_str(text).unwrap();
        assert!(check_certificate(&spec.build().unwrap()).unwrap().valid);
        let bad = text.replace("\"34/3\"", "\"11\"");
        let spec: CertificateSpec = serde_json::from_str(&bad).unwrap();
        let check = check_certificate(&spec.build().unwrap()).unwrap();
        assert!(!check.valid);
        assert_eq!(check.bound_slack, q(-1, 3));
    }
}
