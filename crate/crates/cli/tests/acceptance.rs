//! Acceptance criteria, run in order in one test so timings are not skewed by
//! other tests sharing the machine. Prints one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aisbound::entropy::{conditional_entropy, exact_entropy, han_check, JointTable};
use aisbound::gdof::{self, lemma1_numeric_check, lemma1_submodular_steps, LemmaConfig, Registry};
use aisbound::{
    all_pairs_check, growth_check, multi_antenna_instance, part_low, part_window, theorem1_instance, verify_sweep,
    AlignmentOracle, CoefficientSampler, GapReport, GapTrend, InputModel, Level, LevelVector, PowerContext, Rational,
    SamplerConfig, SweepOptions, TheoremInstance,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SWEEP: [u64; 5] = [16, 32, 64, 128, 256];
const SWEEP_CAP: u64 = 1 << 26;
const GAP_TOLERANCE: f64 = 0.15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn lv(v: &[&str]) -> LevelVector {
    LevelVector::new(v.iter().map(|s| s.parse().unwrap()).collect()).unwrap()
}

/// Largest `b` with `b^d ≤ pbar^n`, by bisection on big integers.
fn band_oracle(pbar: u64, level: Level) -> u64 {
    let (n, d) = (level.numer() as u32, level.denom() as u32);
    let target = BigUint::from(pbar).pow(n);
    let (mut lo, mut hi) = (1u64, 1u64 << 32);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if BigUint::from(mid).pow(d) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn random_level(rng: &mut ChaCha8Rng, max_numer: i64) -> Level {
    let d = rng.gen_range(1..=12);
    Level::new(rng.gen_range(1..=max_numer * d), d)
}

fn criterion1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut failures, mut grids) = (0u64, 0u64, 0usize);
    for _ in 0..20 {
        let lambda = random_level(&mut rng, 3);
        let lambda1 = loop {
            let l = random_level(&mut rng, 3);
            if l < lambda {
                break l;
            }
        };
        // Every P̄ whose top alphabet lies in 4..=2^16, thinned geometrically.
        let mut pbar = 2u64;
        while band_oracle(pbar, lambda) <= 1 << 16 {
            let top = band_oracle(pbar, lambda);
            if top >= 4 {
                grids += 1;
                let ctx = PowerContext::from_pbar(pbar).unwrap();
                let lo = band_oracle(pbar, lambda1);
                assert_eq!(ctx.band(lambda).unwrap(), top);
                assert_eq!(ctx.band(lambda1).unwrap(), lo);
                for x in 0..top as i64 {
                    let low = part_low(x, &ctx, lambda1).unwrap();
                    let mid = part_window(x, &ctx, lambda1, lambda).unwrap();
                    checked += 1;
                    if x != lo as i64 * mid + low || low >= lo as i64 {
                        failures += 1;
                    }
                }
            }
            pbar = (pbar * 3).div_ceil(2);
        }
    }
    Outcome {
        pass: failures == 0 && grids > 0,
        detail: format!("{checked} signals over {grids} (P̄, λ₁, λ) grids, {failures} failures"),
    }
}

fn sweep(inst: &TheoremInstance) -> Vec<GapReport> {
    verify_sweep(inst, &SWEEP, 64, SweepOptions { cap: SWEEP_CAP })
        .unwrap()
        .into_iter()
        .map(|p| p.report.unwrap_or_else(|| panic!("P̄={}: {}", p.pbar, p.error.unwrap_or_default())))
        .collect()
}

fn gaps(r: &[GapReport]) -> String {
    r.iter().map(|g| format!("{:.4}", g.normalized_gap)).collect::<Vec<_>>().join(", ")
}

fn trend_outcome(label: &str, r: &[GapReport]) -> (bool, String) {
    let t = GapTrend::from_reports(r).unwrap();
    (
        t.passes(-GAP_TOLERANCE),
        format!("{label}: gaps [{}], slope {:.5} ± {:.5}", gaps(r), t.slope, t.slope_std_error),
    )
}

fn criterion2() -> Outcome {
    let one = Level::ONE;
    let half = Level::new(1, 2);
    let iid = theorem1_instance(one, half).unwrap();
    let mut dep = iid.clone();
    dep.input = InputModel::Identical;
    let (p1, d1) = trend_outcome("iid", &sweep(&iid));
    let (p2, d2) = trend_outcome("X₁=X₂", &sweep(&dep));
    Outcome { pass: p1 && p2, detail: format!("{d1}; {d2}") }
}

fn criterion3() -> Outcome {
    let inst = theorem1_instance(Level::new(1, 2), Level::ONE).unwrap();
    let deficit = inst.condition_deficit().unwrap();
    let r = sweep(&inst);
    let floor = -deficit.as_f64() - GAP_TOLERANCE;
    let pass = deficit == Level::new(1, 2) && r.iter().all(|g| g.normalized_gap >= floor && g.target == -deficit.as_f64());
    Outcome { pass, detail: format!("gaps [{}] against floor {floor}", gaps(&r)) }
}

fn criterion4() -> Outcome {
    let levels = lv(&["2/5", "1/5", "1/5", "1/5"]);
    let inst = multi_antenna_instance(levels.clone(), levels).unwrap();
    let checks = inst.check_level_condition().unwrap();
    let all_hold = checks.iter().all(|c| c.holds);
    let r = sweep(&inst);
    let (trend_ok, d) = trend_outcome("gaps", &r);
    Outcome { pass: all_hold && trend_ok, detail: format!("{} (k, s) conditions hold: {all_hold}; {d}", checks.len()) }
}

fn criterion5() -> Outcome {
    let half = Level::new(1, 2);
    let inst = theorem1_instance(half, half).unwrap();
    let ctx = PowerContext::from_pbar(64).unwrap();
    assert_eq!(ctx.band(half).unwrap(), 8);
    let oracle = AlignmentOracle::new(&inst, &ctx, None, 1 << 16).unwrap();
    let sampler = CoefficientSampler::new(inst.sampler.clone()).unwrap();
    let pairs = all_pairs_check(&oracle, &sampler, 10_000).unwrap();
    let growth = growth_check(&inst, &[4, 8, 16, 32, 64], &sampler, 1000, 1 << 16).unwrap();
    let means: Vec<String> = growth.points.iter().map(|p| format!("{:.3}", p.mean_cardinality)).collect();
    Outcome {
        pass: pairs.passes() && growth.passes(0.20, 3.0),
        detail: format!(
            "(a) {} pairs, {} above cap + 3σ, worst excess {:.4}; (b) E|S| [{}], residual {:.3}, max ratio {:.3}",
            pairs.pairs,
            pairs.violations.len(),
            pairs.worst_excess,
            means.join(", "),
            growth.max_relative_residual,
            growth.max_step_ratio
        ),
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn criterion6() -> Outcome {
    let region = gdof::theorem5_region();
    let bounds: Vec<Rational> = region.iter().map(|h| h.b()).collect();
    let constants_ok = [q(2, 1), q(3, 1), q(3, 2), q(34, 9)].iter().all(|c| bounds.contains(c));
    let mut got = gdof::vertices(&region).unwrap();
    let mut want =
        vec![(q(0, 1), q(0, 1)), (q(2, 1), q(0, 1)), (q(2, 1), q(3, 2)), (q(13, 9), q(7, 3)), (q(7, 9), q(3, 1)), (q(0, 1), q(3, 1))]
            .into_iter()
            .map(|(a, b)| gdof::Point::new(a, b))
            .collect::<Vec<_>>();
    let hull = got.clone();
    got.sort();
    want.sort();
    // Membership of a dense rational grid, including a margin outside the box.
    let mut mismatches = 0;
    for i in 0..=100 {
        for j in 0..=100 {
            let p = gdof::Point::new(q(-10 + 22 * i, 100), q(-15 + 33 * j, 100));
            if gdof::contains(&region, p) != gdof::hull_contains(&hull, p) {
                mismatches += 1;
            }
        }
    }
    Outcome {
        pass: constants_ok && got == want && mismatches == 0,
        detail: format!("{} vertices, exact match {}, grid mismatches {mismatches}", got.len(), got == want),
    }
}

fn criterion7() -> Outcome {
    let reg = Registry::builtin();
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, bound) in [("sum-rate", q(34, 3)), ("weighted", q(9, 1))] {
        let cert = reg.certificate(name).unwrap();
        let ok = gdof::check_certificate(&cert).unwrap().valid && cert.target.bound == bound;
        let mut caught = 0;
        for i in 0..cert.premises.len() {
            for delta in [q(1, 1000), q(-1, 1000)] {
                let mut m = cert.clone();
                m.premises[i].1 = m.premises[i].1 + delta;
                if !gdof::check_certificate(&m).map(|c| c.valid).unwrap_or(false) {
                    caught += 1;
                }
            }
        }
        let all = 2 * cert.premises.len();
        pass &= ok && caught == all;
        lines.push(format!("{name} ≤ {bound}: valid {ok}, {caught}/{all} mutations rejected"));
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn criterion8() -> Outcome {
    let cfg = LemmaConfig::default();
    let sampler = CoefficientSampler::new(SamplerConfig::default()).unwrap();
    let reports: Vec<GapReport> =
        lemma1_numeric_check(&cfg, &SWEEP, &sampler, 32).unwrap().into_iter().map(|r| r.unwrap()).collect();
    let v: Vec<f64> = reports.iter().map(gdof::violation).collect();
    let numeric_ok = v.iter().all(|&x| x <= 0.2) && v.windows(2).all(|w| w[1] <= w[0]);
    let steps = lemma1_submodular_steps(&cfg, 16, &sampler, 1000).unwrap();
    let failed: Vec<&str> = steps.iter().filter(|s| !s.passed).map(|s| s.step.as_str()).collect();
    let han = steps.iter().find(|s| s.step.starts_with("Han")).unwrap();
    Outcome {
        pass: numeric_ok && failed.is_empty() && han.samples == 1000,
        detail: format!(
            "violations {v:?}; {} sub-steps, failed {failed:?}, Han minimum slack {:.4} on {} joints",
            steps.len(),
            han.worst,
            han.samples
        ),
    }
}

/// `H(subset)` straight from the definition.
fn oracle_entropy(t: &JointTable, cols: &[usize]) -> f64 {
    let mut m: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (row, &p) in t.support().iter().zip(t.mass()) {
        *m.entry(cols.iter().map(|&c| row[c]).collect()).or_default() += p;
    }
    m.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

fn random_table(rng: &mut ChaCha8Rng) -> JointTable {
    let per: Vec<i64> = (0..3).map(|_| rng.gen_range(1..=4)).collect();
    let rows: Vec<(Vec<i64>, f64)> = (0..rng.gen_range(1..=30))
        .map(|_| (per.iter().map(|&k| rng.gen_range(0..k)).collect(), rng.gen_range(0.0..1.0) + 1e-3))
        .collect();
    JointTable::from_weights(vec!["a".into(), "b".into(), "c".into()], rows).unwrap()
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_chain, mut worst_cond, mut worst_oracle, mut han_violations) = (0f64, f64::NEG_INFINITY, 0f64, 0);
    for _ in 0..1000 {
        let t = random_table(&mut rng);
        let h = |s: &[&str]| exact_entropy(&t, s).unwrap().value;
        let hab = h(&["a", "b"]);
        let chain = h(&["a"]) + conditional_entropy(&t, &["b"], &["a"]).unwrap();
        worst_chain = worst_chain.max((hab - chain).abs());
        worst_oracle = worst_oracle.max((hab - oracle_entropy(&t, &[0, 1])).abs());
        worst_oracle = worst_oracle.max((h(&["a", "b", "c"]) - oracle_entropy(&t, &[0, 1, 2])).abs());
        worst_cond = worst_cond.max(conditional_entropy(&t, &["a"], &["b"]).unwrap() - h(&["a"]));
        let t2 = random_table(&mut rng);
        if !han_check(&t2, &["a"], &["b"], &["c"]).unwrap().holds {
            han_violations += 1;
        }
    }
    Outcome {
        pass: worst_chain <= 1e-10 && worst_oracle <= 1e-10 && worst_cond <= 1e-10 && han_violations == 0,
        detail: format!(
            "chain rule error {worst_chain:.2e}, oracle error {worst_oracle:.2e}, max H(A|B)−H(A) {worst_cond:.2e}, Han violations {han_violations}"
        ),
    }
}

fn run_cli(args: &[&str], dir: &Path, out: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_aisbound"))
        .args(args)
        .arg("--out")
        .arg(dir.join(out))
        .env_remove("AISBOUND_SEED")
        .status()
        .unwrap();
    // Exit 1 (a failed check) still writes the artifact; only input errors are fatal here.
    assert!(matches!(status.code(), Some(0 | 1)), "{args:?}: {status}");
    std::fs::read(dir.join(out)).unwrap()
}

fn criterion10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances");
    let mut lines = Vec::new();
    let mut pass = true;
    for (cmd, file) in [("verify", "two-band-verify.json"), ("lemma1", "lemma1.json"), ("partition", "partition.json")] {
        let path = root.join(file);
        let path = path.to_str().unwrap();
        let a = run_cli(&[cmd, path, "--seed", "7"], dir.path(), "a.csv");
        let b = run_cli(&[cmd, path, "--seed", "7"], dir.path(), "b.csv");
        let same = a == b && !a.is_empty();
        pass &= same;
        lines.push(format!("{cmd}: {} bytes, identical {same}", a.len()));
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        ("1 partition soundness", criterion1, Some(Duration::from_secs(10))),
        ("2 two-band sum-set inequality", criterion2, Some(Duration::from_secs(300))),
        ("3 level-deficit offset", criterion3, None),
        ("4 multi-antenna instance", criterion4, Some(Duration::from_secs(600))),
        ("5 aligned image set oracle", criterion5, None),
        ("6 GDoF region vertices", criterion6, None),
        ("7 certificates", criterion7, Some(Duration::from_secs(1))),
        ("8 key lemma numeric check", criterion8, None),
        ("9 entropy engine identities", criterion9, None),
        ("10 byte-identical reruns", criterion10, None),
    ];
    let mut failed = Vec::new();
    for (name, f, limit) in criteria {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed();
        let in_time = limit.map_or(true, |l| dt < l);
        let ok = o.pass && in_time;
        let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!("{} criterion {name}: {} [{:.2}s{budget}]", if ok { "PASS" } else { "FAIL" }, o.detail, dt.as_secs_f64());
        if !ok {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
