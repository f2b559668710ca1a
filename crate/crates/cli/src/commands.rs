use std::path::PathBuf;

use aisbound::ais::GrowthReport;
use aisbound::gdof::{self, CheckSummary, StepReport};
use aisbound::{
    all_pairs_check, compose, decompose, expected_cardinality, growth_check, lemma1_numeric_check, lemma1_submodular_steps,
    verify_sweep, AlignmentOracle, AlignmentReport, AllPairsReport, CoefficientSampler, GapReport, GapTrend, PowerContext,
    SamplerConfig, SweepOptions, DEFAULT_ORACLE_CAP, DEFAULT_SEED, DEFAULT_SUPPORT_CAP,
};
use serde::Serialize;

use crate::instance::{AisBody, CertificateBody, Format, Lemma1Body, PartitionBody, RegionBody, RegionSource, VerifyBody};
use crate::manifest::{csv_bytes, emit_csv, emit_json, RunManifest, TaskStatus};
use crate::CliError;

/// Values given on the command line; each beats its counterpart in the body.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub cap: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict: bool,
}

/// Rows of values that cannot be evaluated for partition tables.
const PARTITION_ROW_LIMIT: u64 = 1 << 20;

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn partition(body: PartitionBody, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let ctx = match (body.power, body.pbar) {
        (Some(p), None) => PowerContext::new(p)?,
        (None, Some(pb)) => PowerContext::from_pbar(pb)?,
        _ => return Err(CliError::Input("schema violation in body: give exactly one of `power` and `pbar`".into())),
    };
    let levels = body.levels;
    let capacity = aisbound::power::layout_capacity(&ctx, &levels)?;
    let values: Vec<i64> = match body.values {
        Some(v) => v,
        None if capacity <= PARTITION_ROW_LIMIT => (0..capacity as i64).collect(),
        None => {
            return Err(CliError::Input(format!(
                "support cap exceeded: layout holds {capacity} signals, at most {PARTITION_ROW_LIMIT} are tabulated; list `values`"
            )))
        }
    };
    let mut header: Vec<String> = vec!["x".into()];
    header.extend((1..=levels.len()).map(|i| format!("band{i}")));
    header.push("reconstructed".into());
    let mut rows = Vec::with_capacity(values.len());
    let mut bad = 0usize;
    for &x in &values {
        let bands = decompose(x, &ctx, &levels)?;
        let back = compose(&bands, &ctx, &levels)?;
        if back != x {
            bad += 1;
        }
        let mut row = vec![x.to_string()];
        row.extend(bands.iter().map(i64::to_string));
        row.push(back.to_string());
        rows.push(row);
    }
    m.tasks.push(if bad == 0 {
        TaskStatus::ok(format!("reconstruct {} signals", values.len()))
    } else {
        TaskStatus::failed(format!("reconstruct {} signals", values.len()), format!("{bad} signals differ"))
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_bytes(&header, &rows)?;
    m.finish();
    emit_csv(o.out.as_deref().or(body.out.as_deref()), &csv, m)
}

pub const VERIFY_HEADER: [&str; 7] = ["P", "pbar", "lhs_bits", "rhs_bits", "gap_bits", "normalized_gap", "condition_ok"];

fn verify_row(r: &GapReport) -> Vec<String> {
    vec![
        num(r.power),
        r.pbar.to_string(),
        num(r.lhs.value),
        num(r.rhs.value),
        num(r.gap),
        num(r.normalized_gap),
        r.condition_ok.to_string(),
    ]
}

pub fn verify(body: VerifyBody, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let mut inst = body.instance.build()?;
    if let Some(s) = o.seed.or(body.seed) {
        inst.sampler.seed = s;
    }
    let trials = o.trials.unwrap_or(body.trials);
    let cap = o.cap.or(body.cap).unwrap_or(DEFAULT_SUPPORT_CAP);
    m.seed = Some(inst.sampler.seed);
    m.trials = Some(trials);
    m.cap = Some(cap);
    if body.pbars.is_empty() {
        return Err(CliError::Input("schema violation in body: `pbars` is empty".into()));
    }
    let points = verify_sweep(&inst, &body.pbars, trials, SweepOptions { cap })?;
    let mut reports = Vec::new();
    for p in points {
        match (p.report, p.error) {
            (Some(r), _) => {
                m.tasks.push(TaskStatus::ok(format!("pbar={}", p.pbar)));
                reports.push(r);
            }
            (None, e) => {
                let e = e.unwrap_or_default();
                if o.strict {
                    return Err(CliError::Input(format!("pbar={}: {e}", p.pbar)));
                }
                eprintln!("warning: pbar={} skipped: {e}", p.pbar);
                m.tasks.push(TaskStatus::error(format!("pbar={}", p.pbar), e));
            }
        }
    }
    if reports.is_empty() {
        return Err(CliError::Input("no sweep point could be evaluated".into()));
    }
    let threshold = reports[0].target - body.tolerance;
    let last = reports.last().expect("non-empty");
    let judged = if reports.len() >= 2 {
        let t = GapTrend::from_reports(&reports)?;
        let detail = format!(
            "final normalized gap {} (threshold {threshold}), slope {} ± {}",
            t.final_gap, t.slope, t.slope_std_error
        );
        (t.passes(threshold), detail)
    } else {
        (last.normalized_gap >= threshold, format!("normalized gap {} (threshold {threshold})", last.normalized_gap))
    };
    m.tasks.push(match judged {
        (true, d) => TaskStatus { detail: Some(d), ..TaskStatus::ok("gap trend") },
        (false, d) => TaskStatus::failed("gap trend", d),
    });
    let rows: Vec<Vec<String>> = reports.iter().map(verify_row).collect();
    let csv = csv_bytes(&VERIFY_HEADER, &rows)?;
    m.finish();
    emit_csv(o.out.as_deref().or(body.out.as_deref()), &csv, m)
}

#[derive(Serialize)]
struct AisResult {
    pbar: u64,
    distinct_images: usize,
    cardinality: AlignmentReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairs: Option<AllPairsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth: Option<GrowthReport>,
}

pub fn ais(body: AisBody, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let mut inst = body.instance.build()?;
    if let Some(s) = o.seed.or(body.seed) {
        inst.sampler.seed = s;
    }
    let draws = o.trials.unwrap_or(body.draws);
    let cap = o.cap.or(body.cap).unwrap_or(DEFAULT_ORACLE_CAP);
    m.seed = Some(inst.sampler.seed);
    m.trials = Some(draws);
    m.cap = Some(cap);
    let ctx = PowerContext::from_pbar(body.pbar)?;
    let oracle = AlignmentOracle::new(&inst, &ctx, body.w, cap)?;
    let sampler = CoefficientSampler::new(inst.sampler.clone())?;
    let nu = body.nu.as_deref().map(|x| oracle.index_of(x)).transpose()?;
    let cardinality = expected_cardinality(&oracle, &sampler, draws, nu, false)?;
    m.tasks.push(TaskStatus::ok("expected cardinality"));
    let pairs = if body.pairs {
        let r = all_pairs_check(&oracle, &sampler, draws)?;
        m.tasks.push(if r.passes() {
            TaskStatus::ok(format!("{} pairs within cap", r.pairs))
        } else {
            TaskStatus::failed("pairwise caps", format!("{} of {} pairs above cap + 3σ", r.violations.len(), r.pairs))
        });
        Some(r)
    } else {
        None
    };
    let growth = match &body.growth {
        Some(g) => {
            let r = growth_check(&inst, &g.pbars, &sampler, draws, cap)?;
            let detail = format!("residual {}, step ratio {}", r.max_relative_residual, r.max_step_ratio);
            m.tasks.push(if r.passes(g.max_residual, g.max_ratio) {
                TaskStatus { detail: Some(detail), ..TaskStatus::ok("growth") }
            } else {
                TaskStatus::failed("growth", detail)
            });
            Some(r)
        }
        None => None,
    };
    let result = AisResult { pbar: body.pbar, distinct_images: oracle.distinct(), cardinality, pairs, growth };
    m.finish();
    emit_json(o.out.as_deref().or(body.out.as_deref()), &result, m)
}

#[derive(Serialize)]
struct RegionResult {
    half_planes: Vec<gdof::HalfPlane>,
    summary: gdof::RegionSummary,
}

pub fn region(body: RegionBody, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let planes = match body.region {
        RegionSource::Builtin(name) if name == "mimo-ic" => gdof::theorem5_region(),
        RegionSource::Builtin(name) => return Err(aisbound::Error::UnknownBuiltin(name).into()),
        RegionSource::HalfPlanes(h) => h,
    };
    let summary = gdof::summarize(&planes)?;
    if let Some(mut want) = body.expect {
        let mut got = summary.vertices.clone();
        want.sort();
        got.sort();
        m.tasks.push(if want == got {
            TaskStatus::ok("vertices match")
        } else {
            TaskStatus::failed("vertices match", format!("expected {} vertices, found {}", want.len(), got.len()))
        });
    } else {
        m.tasks.push(TaskStatus::ok(format!("{} vertices", summary.vertices.len())));
    }
    m.finish();
    let out = o.out.as_deref().or(body.out.as_deref());
    match body.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = summary
                .vertices
                .iter()
                .enumerate()
                .map(|(i, p)| vec![i.to_string(), p.d1.to_string(), p.d2.to_string(), num(p.d1.as_f64()), num(p.d2.as_f64())])
                .collect();
            let csv = csv_bytes(&["vertex", "d1", "d2", "d1_decimal", "d2_decimal"], &rows)?;
            emit_csv(out, &csv, m)
        }
        Format::Json => emit_json(out, &RegionResult { half_planes: planes, summary }, m),
    }
}

#[derive(Serialize)]
struct CertificateResult {
    target: String,
    premises: usize,
    check: CheckSummary,
}

pub fn certificate(body: CertificateBody, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let cert = body.certificate.build()?;
    let check = gdof::check_certificate(&cert)?;
    let summary = CheckSummary::from(&check);
    m.tasks.push(if check.valid {
        TaskStatus::ok(format!("certificate {}", cert.target.name))
    } else {
        TaskStatus::failed(format!("certificate {}", cert.target.name), check.reason.clone().unwrap_or_default())
    });
    m.finish();
    let result = CertificateResult { target: cert.target.name.clone(), premises: cert.premises.len(), check: summary };
    emit_json(o.out.as_deref().or(body.out.as_deref()), &result, m)
}

pub const LEMMA1_HEADER: [&str; 7] = ["P", "pbar", "dominant_bits", "lhs_bits", "gap_bits", "normalized_gap", "violation"];

pub fn lemma1(body: Lemma1Body, o: &Overrides, m: &mut RunManifest) -> Result<(), CliError> {
    let mut cfg = body.config;
    if let Some(c) = o.cap {
        cfg.cap = c;
    }
    let seed = o.seed.or(body.seed).unwrap_or(DEFAULT_SEED);
    let trials = o.trials.unwrap_or(body.trials);
    m.seed = Some(seed);
    m.trials = Some(trials);
    m.cap = Some(cfg.cap);
    let sampler = CoefficientSampler::new(SamplerConfig::default().with_seed(seed))?;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (pbar, r) in body.pbars.iter().zip(lemma1_numeric_check(&cfg, &body.pbars, &sampler, trials)?) {
        match r {
            Ok(r) => {
                let v = gdof::violation(&r);
                violations.push(v);
                m.tasks.push(TaskStatus::ok(format!("pbar={pbar}")));
                rows.push(vec![
                    num(r.power),
                    r.pbar.to_string(),
                    num(r.lhs.value),
                    num(r.rhs.value),
                    num(r.gap),
                    num(r.normalized_gap),
                    num(v),
                ]);
            }
            Err(e) if o.strict => return Err(CliError::Input(format!("pbar={pbar}: {e}"))),
            Err(e) => {
                eprintln!("warning: pbar={pbar} skipped: {e}");
                m.tasks.push(TaskStatus::error(format!("pbar={pbar}"), e));
            }
        }
    }
    if violations.is_empty() {
        return Err(CliError::Input("no sweep point could be evaluated".into()));
    }
    let worst = violations.iter().copied().fold(0.0, f64::max);
    let non_increasing = violations.windows(2).all(|w| w[1] <= w[0]);
    let detail = format!("worst normalized violation {worst} (limit {})", body.max_violation);
    m.tasks.push(if worst <= body.max_violation && non_increasing {
        TaskStatus { detail: Some(detail), ..TaskStatus::ok("violation trend") }
    } else {
        TaskStatus::failed("violation trend", detail)
    });
    if let Some(s) = &body.steps {
        let steps: Vec<StepReport> = lemma1_submodular_steps(&cfg, s.pbar, &sampler, s.joints)?;
        for st in steps {
            let detail = Some(format!("worst {} over {} samples", st.worst, st.samples));
            m.tasks.push(if st.passed {
                TaskStatus { detail, ..TaskStatus::ok(st.step) }
            } else {
                TaskStatus { detail, ..TaskStatus::failed(st.step, "") }
            });
        }
    }
    let csv = csv_bytes(&LEMMA1_HEADER, &rows)?;
    m.finish();
    emit_csv(o.out.as_deref().or(body.out.as_deref()), &csv, m)
}
