//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::process::ExitCode;

use ctype_lab::closed::rat;
use ctype_lab::criteria::{
    certificate_chain, check_c2_not_ufhc, check_chaos, check_mixing, check_not_mixing, classify_cplus1, classify_cplus2, ct_upper_bound,
    Status, Verdict, DEFAULT_CHAOS_THRESHOLD_LOG2,
};
use ctype_lab::ctype::{validate, CPlusVariant, CTypeOperator, Family, ValidationReport};
use ctype_lab::forge::{build_chaotic, build_fhc, build_ufhc, default_targets, CPlusOracle, Fraction, StagedVector};
use ctype_lab::orbit::{density_report, estimate_c, visit_series, DensityReport};
use ctype_lab::presets::{fit_horizon, preset, presets, OperatorSpecJson, ResolvedSpec};
use ctype_lab::spectral::{
    check_vp, ctype_eigenvector, diag_shift_eigenvector, good_phi_sequence, minimal_vp_constant, spectrum_radius, Convergence,
    DiagShiftSpec, DiagonalRule, EigenTruncation, PhiSequence, Unimodular, WeightRule,
};
use ctype_lab::{ExactScalar, FiniteVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{Sink, Table, SCHEMA_VERSION};
use crate::{BuildKind, CTypeEigenArgs, ClassifyArgs, Cli, Command, DensityArgs, DiagShiftArgs, EigenKind, OrbitArgs};

/// Exit status for a successful run.
pub const EXIT_OK: u8 = 0;
/// Runtime failure (I/O, oracle exhaustion, …).
pub const EXIT_ERROR: u8 = 1;
/// The operator description or its constraints are invalid.
pub const EXIT_VALIDATION: u8 = 2;
/// The classification is dominated by undetermined verdicts.
pub const EXIT_UNDETERMINED: u8 = 3;

/// Decimal digits in CSV renderings of exact values.
const DIGITS: usize = 12;
/// Generations assumed for parameter tables of unknown length.
const DEFAULT_TABLE_HORIZON: u64 = 8;
/// Largest C tried when reporting the minimal constant for eigenvalue rigidity.
const VP_C_MAX: u32 = 16;
/// Block cap for builders when N_max is not given.
const BUILD_HORIZON_CAP: u64 = (1 << 12) - 1;
/// Extra φ-stages materialized for the eigenvector tail estimate.
const EIGEN_TAIL_STAGES: usize = 3;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_ERROR,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid operator: {m}"),
            CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Everything that determines a run; written next to its artifacts.
#[derive(Serialize)]
struct ExperimentConfig<'a, P: Serialize> {
    schema_version: &'static str,
    command: &'a str,
    operator: &'a OperatorSpecJson,
    params: &'a P,
}

struct Ctx {
    spec: OperatorSpecJson,
    sink: Sink,
}

impl Ctx {
    fn resolve(&self) -> Result<ResolvedSpec, CliError> {
        self.spec.resolve().map_err(|e| CliError::Validation(e.to_string()))
    }

    fn operator(&self, resolved: &ResolvedSpec, n_max: u64) -> Result<CTypeOperator, CliError> {
        CTypeOperator::new(resolved.family.clone(), n_max, resolved.p).map_err(|e| CliError::Validation(e.to_string()))
    }

    fn record<P: Serialize>(&self, command: &str, params: &P) -> Result<(), CliError> {
        if let Some(dir) = self.sink.dir() {
            let cfg = ExperimentConfig { schema_version: SCHEMA_VERSION, command, operator: &self.spec, params };
            let text = serde_json::to_string_pretty(&cfg).map_err(runtime)? + "\n";
            fs::write(dir.join("config.json"), text).map_err(runtime)?;
        }
        Ok(())
    }
}

fn operator_spec(cli: &Cli) -> Result<OperatorSpecJson, CliError> {
    let a = &cli.operator;
    let mut spec = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => OperatorSpecJson::from_preset(name),
        (None, None) => return Err(CliError::Validation("either --spec or --preset is required".into())),
    };
    if a.constant.is_some() {
        spec.c = a.constant;
    }
    if a.n_max.is_some() {
        spec.n_max = a.n_max;
    }
    Ok(spec)
}

pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let sink = Sink::new(cli.out.clone()).map_err(runtime)?;
    if let Command::Presets = cli.command {
        return cmd_presets(&sink);
    }
    let ctx = Ctx { spec: operator_spec(cli)?, sink };
    match &cli.command {
        Command::Presets => unreachable!("handled above"),
        Command::Validate => cmd_validate(&ctx),
        Command::Classify(a) => cmd_classify(&ctx, a),
        Command::Orbit(a) => cmd_orbit(&ctx, a),
        Command::Densities(a) => cmd_densities(&ctx, a),
        Command::Build { kind } => cmd_build(&ctx, kind),
        Command::Eigen { kind: EigenKind::Ctype(a) } => cmd_eigen_ctype(&ctx, a),
        Command::Eigen { kind: EigenKind::Diagshift(a) } => cmd_eigen_diagshift(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

// --- parsing helpers -------------------------------------------------------------

fn parse_scalar(s: &str, what: &str) -> Result<ExactScalar, CliError> {
    ExactScalar::parse(s).map_err(|e| runtime(format!("--{what}: {e}")))
}

/// `index:value` pairs separated by commas.
pub fn parse_vector(s: &str) -> Result<FiniteVector, String> {
    let mut pairs = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once(':').ok_or_else(|| format!("expected index:value, got {part:?}"))?;
        let k: u64 = k.trim().parse().map_err(|_| format!("bad index {k:?}"))?;
        let v = ExactScalar::parse(v).map_err(|e| e.to_string())?;
        pairs.push((k, v));
    }
    Ok(FiniteVector::from_pairs(pairs))
}

pub fn parse_fraction(s: &str) -> Result<Fraction, String> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: u64 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let d: u64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if d == 0 || n == 0 || n >= d {
        return Err(format!("α = {s} must lie in (0, 1)"));
    }
    Ok(Fraction::new(n, d))
}

fn exact_cells(x: &ExactScalar) -> [String; 2] {
    [x.to_decimal_string(DIGITS), x.to_fraction_string()]
}

fn opt_f64(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:e}"))
}

// --- presets / validate ------------------------------------------------------------

fn cmd_presets(sink: &Sink) -> Result<ExitCode, CliError> {
    #[derive(Serialize)]
    struct Entry {
        name: &'static str,
        summary: &'static str,
        minimal_c: Option<u32>,
        fixed_c: Option<u32>,
    }
    let entries: Vec<Entry> =
        presets().iter().map(|p| Entry { name: p.name, summary: p.summary, minimal_c: p.minimal_c, fixed_c: p.fixed_c }).collect();
    let mut t = Table::new("presets", &["name", "minimal_c", "fixed_c", "summary"]);
    for e in &entries {
        t.push([
            e.name.to_string(),
            e.minimal_c.map(|c| c.to_string()).unwrap_or_default(),
            e.fixed_c.map(|c| c.to_string()).unwrap_or_default(),
            e.summary.to_string(),
        ]);
    }
    #[derive(Serialize)]
    struct Body {
        presets: Vec<Entry>,
    }
    sink.json("presets", "presets", &Body { presets: entries }).map_err(runtime)?;
    sink.csv(&t, false).map_err(runtime)?;
    Ok(EXIT_OK.into())
}

#[derive(Serialize)]
struct OperatorSummary {
    label: String,
    family: &'static str,
    c: Option<u32>,
    p: u32,
    n_max: u64,
}

fn summarize(r: &ResolvedSpec) -> OperatorSummary {
    OperatorSummary { label: r.label.clone(), family: r.family.name(), c: r.c, p: r.p.0, n_max: r.n_max }
}

/// Summary of the operator actually materialized for a run.
fn summarize_op(r: &ResolvedSpec, op: &CTypeOperator) -> OperatorSummary {
    OperatorSummary { n_max: op.n_max(), ..summarize(r) }
}

#[derive(Serialize)]
struct ValidateBody {
    valid: bool,
    operator: Option<OperatorSummary>,
    error: Option<String>,
    report: Option<ValidationReport>,
}

fn validation(ctx: &Ctx) -> ValidateBody {
    match ctx.resolve() {
        Err(e) => ValidateBody { valid: false, operator: None, error: Some(e.to_string()), report: None },
        Ok(r) => match validate(&r.family, r.n_max) {
            Ok(rep) => ValidateBody { valid: rep.is_valid(), operator: Some(summarize(&r)), error: None, report: Some(rep) },
            Err(e) => ValidateBody { valid: false, operator: Some(summarize(&r)), error: Some(e.to_string()), report: None },
        },
    }
}

fn cmd_validate(ctx: &Ctx) -> Result<ExitCode, CliError> {
    let body = validation(ctx);
    ctx.record("validate", &())?;
    ctx.sink.json("validate", "validate", &body).map_err(runtime)?;
    if let Some(rep) = &body.report {
        let mut t = Table::new("violations", &["n", "constraint", "detail"]);
        for v in &rep.violations {
            t.push([v.n.to_string(), v.constraint.clone(), v.detail.clone()]);
        }
        ctx.sink.csv(&t, false).map_err(runtime)?;
    }
    Ok(if body.valid { EXIT_OK } else { EXIT_VALIDATION }.into())
}

// --- classify --------------------------------------------------------------------

/// One line of the classification summary.
#[derive(Debug, Clone, Serialize)]
struct Entry {
    status: Status,
    /// Exact value or the name of the deciding verdict.
    detail: String,
}

impl Entry {
    fn from_verdict(v: &Verdict) -> Self {
        Entry { status: v.status, detail: v.anchor.clone() }
    }

    fn new(status: Status, detail: impl Into<String>) -> Self {
        Entry { status, detail: detail.into() }
    }

    fn decided(&self) -> bool {
        matches!(self.status, Status::Holds | Status::Fails)
    }
}

#[derive(Serialize)]
struct Summary {
    chaotic: Entry,
    fhc: Entry,
    ufhc: Entry,
    mixing: Entry,
    c_upper: Entry,
    vp: Entry,
    spectral_radius: Entry,
}

impl Summary {
    fn rows(&self) -> [(&'static str, &Entry); 7] {
        [
            ("chaotic", &self.chaotic),
            ("fhc", &self.fhc),
            ("ufhc", &self.ufhc),
            ("mixing", &self.mixing),
            ("c_upper", &self.c_upper),
            ("vp", &self.vp),
            ("spectral_radius", &self.spectral_radius),
        ]
    }

    /// More undecided than decided entries among the dynamical properties.
    fn undetermined_dominant(&self) -> bool {
        let main = [&self.chaotic, &self.fhc, &self.ufhc, &self.mixing, &self.c_upper, &self.vp];
        let decided = main.iter().filter(|e| e.decided()).count();
        main.len() - decided > decided
    }
}

#[derive(Serialize)]
struct ClassifyBody {
    operator: OperatorSummary,
    summary: Summary,
    undetermined_dominant: bool,
    verdicts: Vec<Verdict>,
}

fn table_horizon(family: &Family, requested: Option<u64>) -> u64 {
    requested.unwrap_or_else(|| {
        family
            .generation_params()
            .and_then(|(t, d, b)| [t, d, b].iter().filter_map(|s| s.defined_len()).min())
            .unwrap_or(DEFAULT_TABLE_HORIZON)
    })
}

fn classify(r: &ResolvedSpec, horizon: Option<u64>) -> ClassifyBody {
    let family = &r.family;
    let p = r.p;
    let h = table_horizon(family, horizon);
    let mut verdicts = Vec::new();
    let chaos = check_chaos(family, h, DEFAULT_CHAOS_THRESHOLD_LOG2);
    let chaotic = Entry::from_verdict(&chaos);
    verdicts.push(chaos);
    let undetermined = |why: &str| Entry::new(Status::Undetermined, why);

    let (mut fhc, mut ufhc) = (undetermined("no criterion applies"), undetermined("no criterion applies"));
    let mut sides_hold = false;
    match family {
        Family::CPlus(s) if s.variant == CPlusVariant::One => {
            let cls = classify_cplus1(family, p);
            sides_hold = cls.side_conditions.holds();
            fhc = Entry::from_verdict(&cls.fhc);
            ufhc = Entry::from_verdict(&cls.ufhc);
            verdicts.extend([cls.side_conditions, cls.fhc, cls.ufhc]);
        }
        Family::CPlus(_) => {
            let cls = classify_cplus2(family, p);
            fhc = Entry::from_verdict(&cls.fhc);
            ufhc = Entry::from_verdict(&cls.ufhc);
            verdicts.extend([cls.side_conditions, cls.fhc, cls.ufhc]);
        }
        Family::C2(_) => {
            let v = check_c2_not_ufhc(family, p);
            if v.holds() {
                ufhc = Entry::new(Status::Fails, v.anchor.clone());
            }
            verdicts.push(v);
        }
        Family::Generic(_) => {}
    }
    // Frequent hypercyclicity implies the U-frequent kind.
    if ufhc.status == Status::Fails && !fhc.decided() {
        fhc = Entry::new(Status::Fails, format!("implied by ufhc ({})", ufhc.detail));
    }
    if fhc.status == Status::Holds && !ufhc.decided() {
        ufhc = Entry::new(Status::Holds, format!("implied by fhc ({})", fhc.detail));
    }

    let mut mixing = undetermined("no criterion applies");
    if !matches!(family, Family::Generic(_)) {
        let m = check_mixing(family, &[0, 4, 16], h);
        if matches!(m.status, Status::Holds | Status::Fails) {
            mixing = Entry::from_verdict(&m);
        }
        verdicts.push(m);
        if !mixing.decided() {
            let nm = check_not_mixing(family, p, &rat(1, 1));
            if nm.holds() {
                mixing = Entry::new(Status::Fails, nm.anchor.clone());
            }
            verdicts.push(nm);
        }
    }

    let c_upper = match family {
        // The bound is a theorem only under the side conditions and
        // 0 < lim δ/Δ ≤ 1/5, i.e. 0 < bound ≤ 9/10.
        Family::CPlus(s) if s.variant == CPlusVariant::One => match ct_upper_bound(family) {
            Ok(b) if sides_hold && b > rat(0, 1) && b <= rat(9, 10) => Entry::new(Status::Holds, b.to_string()),
            Ok(b) => Entry::new(Status::Inapplicable, format!("formula value {b}; hypotheses not certified")),
            Err(v) => {
                let e = Entry::new(v.status, v.anchor.clone());
                verdicts.push(v);
                e
            }
        },
        _ => undetermined("no c(T) bound applies"),
    };

    let vp_verdict = check_vp(family, &[], 0);
    let mut vp = Entry::from_verdict(&vp_verdict);
    if let Some(pr) = preset(&r.label).filter(|pr| pr.takes_constant()) {
        if let Some(c) = minimal_vp_constant(|c| pr.family(Some(c)), VP_C_MAX) {
            vp.detail = format!("{} (min C = {c})", vp.detail);
        }
    }
    verdicts.push(vp_verdict);

    let spectral_radius = match spectrum_radius(family) {
        Ok(rho) => Entry::new(Status::Holds, format!("{rho}")),
        Err(e) => Entry::new(Status::Undetermined, e.to_string()),
    };

    let summary = Summary { chaotic, fhc, ufhc, mixing, c_upper, vp, spectral_radius };
    ClassifyBody { operator: summarize(r), undetermined_dominant: summary.undetermined_dominant(), summary, verdicts }
}

fn summary_table(s: &Summary) -> Table {
    let mut t = Table::new("classification", &["property", "status", "detail"]);
    for (name, e) in s.rows() {
        t.push([name.to_string(), e.status.to_string(), e.detail.clone()]);
    }
    t
}

fn cmd_classify(ctx: &Ctx, a: &ClassifyArgs) -> Result<ExitCode, CliError> {
    let r = ctx.resolve()?;
    let body = classify(&r, a.horizon);
    ctx.record("classify", a)?;
    ctx.sink.json("classify", "classify", &body).map_err(runtime)?;
    ctx.sink.csv(&summary_table(&body.summary), false).map_err(runtime)?;
    Ok(if body.undetermined_dominant { EXIT_UNDETERMINED } else { EXIT_OK }.into())
}

// --- report -----------------------------------------------------------------------

#[derive(Serialize)]
struct ReportBody {
    validation: ValidateBody,
    classification: ClassifyBody,
    certificate_chain: Vec<Verdict>,
}

fn cmd_report(ctx: &Ctx, a: &ClassifyArgs) -> Result<ExitCode, CliError> {
    let validation = validation(ctx);
    if !validation.valid {
        ctx.sink.json("report", "report", &validation).map_err(runtime)?;
        return Ok(EXIT_VALIDATION.into());
    }
    let r = ctx.resolve()?;
    let classification = classify(&r, a.horizon);
    let chain = certificate_chain(&r.label, &r.family, r.p);
    let dominant = classification.undetermined_dominant;
    let body = ReportBody { validation, classification, certificate_chain: chain };
    ctx.record("report", a)?;
    // The human-readable summary goes to stdout; the full report to report.json.
    let mut text = format!("operator {} ({}, p = {}, N_max = {})\n", r.label, r.family.name(), r.p.0, r.n_max);
    for (name, e) in body.classification.summary.rows() {
        text += &format!("  {name:<16} {:<13} {}\n", e.status.to_string(), e.detail);
    }
    text += "certificate chain:\n";
    for v in &body.certificate_chain {
        text += &format!("  {:<40} {}\n", v.anchor, v.status);
    }
    match ctx.sink.dir() {
        Some(dir) => {
            fs::write(dir.join("report.txt"), &text).map_err(runtime)?;
            ctx.sink.json("report", "report", &body).map_err(runtime)?;
            print!("{text}");
        }
        None => print!("{text}"),
    }
    Ok(if dominant { EXIT_UNDETERMINED } else { EXIT_OK }.into())
}

// --- orbit / densities -------------------------------------------------------------

#[derive(Serialize)]
struct OrbitBody {
    operator: OperatorSummary,
    x: FiniteVector,
    center: FiniteVector,
    eps: ExactScalar,
    horizon: u64,
    visits: u64,
    density: DensityReport,
}

fn cmd_orbit(ctx: &Ctx, a: &OrbitArgs) -> Result<ExitCode, CliError> {
    let r = ctx.resolve()?;
    let op = ctx.operator(&r, r.n_max)?;
    let x = parse_vector(&a.x).map_err(|e| runtime(format!("--x: {e}")))?;
    let center = parse_vector(&a.center).map_err(|e| runtime(format!("--center: {e}")))?;
    let eps = parse_scalar(&a.eps, "eps")?;
    let eps_pow = eps.pow_u64(r.p.0 as u64);
    let series = visit_series(&op, &x, &center, &eps_pow, a.horizon).map_err(runtime)?;
    let period = op.period_of(&x).ok();
    let density = density_report(&series, ctype_lab::orbit::DEFAULT_CHECKPOINT_RATIO, a.burn_in, period);
    let mut t = Table::new("orbit", &["j", "in_ball", "prefix_count", "prefix_density", "prefix_density_exact"]);
    for row in series.csv_rows(DIGITS) {
        t.push(row);
    }
    let body = OrbitBody { operator: summarize_op(&r, &op), x, center, eps, horizon: a.horizon, visits: series.total(), density };
    ctx.record("orbit", a)?;
    if ctx.sink.dir().is_some() {
        ctx.sink.json("orbit", "orbit", &body).map_err(runtime)?;
    }
    ctx.sink.csv(&t, true).map_err(runtime)?;
    Ok(EXIT_OK.into())
}

#[derive(Serialize)]
struct DensitiesBody {
    operator: OperatorSummary,
    eps: ExactScalar,
    horizon: u64,
    seed: u64,
    sample: Vec<FiniteVector>,
    best: usize,
    best_report: DensityReport,
    upper_by_sample: Vec<ExactScalar>,
    /// Analytic upper bound on c(T), when one applies.
    c_upper: Option<String>,
    note: &'static str,
}

fn cmd_densities(ctx: &Ctx, a: &DensityArgs) -> Result<ExitCode, CliError> {
    let r = ctx.resolve()?;
    let op = ctx.operator(&r, r.n_max)?;
    let eps = parse_scalar(&a.eps, "eps")?;
    let hi = op.b(a.blocks.min(op.n_max()) + 1).map_err(runtime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut sample = vec![FiniteVector::basis(0)];
    while sample.len() <= a.samples {
        let pairs: Vec<(u64, ExactScalar)> = (0..rng.gen_range(1..=4))
            .map(|_| (rng.gen_range(0..hi), ExactScalar::dyadic(rng.gen_range(-8i64..=8), rng.gen_range(-3i64..=1))))
            .collect();
        let x = FiniteVector::from_pairs(pairs);
        if !x.is_zero() {
            sample.push(x);
        }
    }
    let est = estimate_c(&op, &sample, &eps.pow_u64(r.p.0 as u64), a.horizon).map_err(runtime)?;
    let c_upper = match &r.family {
        Family::CPlus(s) if s.variant == CPlusVariant::One => ct_upper_bound(&r.family).ok().map(|b| b.to_string()),
        _ => None,
    };
    let mut t = Table::new("densities", &["sample", "support", "period", "upper_density", "upper_density_exact"]);
    for (i, (x, up)) in sample.iter().zip(&est.upper_by_sample).enumerate() {
        let period = op.period_of(x).map(|p| p.to_string()).unwrap_or_default();
        let [dec, exact] = exact_cells(up);
        t.push([i.to_string(), x.support_len().to_string(), period, dec, exact]);
    }
    let body = DensitiesBody {
        operator: summarize_op(&r, &op),
        eps,
        horizon: a.horizon,
        seed: a.seed,
        sample,
        best: est.best,
        best_report: est.report,
        upper_by_sample: est.upper_by_sample,
        c_upper,
        note: "finitely supported vectors are periodic; their visit densities are statistics of periodic orbits, while c(T) concerns hypercyclic vectors",
    };
    ctx.record("densities", a)?;
    ctx.sink.json("densities", "densities", &body).map_err(runtime)?;
    ctx.sink.csv(&t, false).map_err(runtime)?;
    Ok(EXIT_OK.into())
}

// --- build -----------------------------------------------------------------------

#[derive(Serialize)]
struct BuildBody<'a> {
    operator: OperatorSummary,
    all_hold: bool,
    reverified: bool,
    staged: &'a StagedVector,
}

fn cmd_build(ctx: &Ctx, kind: &BuildKind) -> Result<ExitCode, CliError> {
    let (name, a, default_stages, default_targets_count) = match kind {
        BuildKind::Chaotic(a) => ("chaotic", a, 6, 4),
        BuildKind::Ufhc(a) => ("ufhc", a, 4, 1),
        BuildKind::Fhc(a) => ("fhc", a, 3, 1),
    };
    let r = ctx.resolve()?;
    let n_max = ctx.spec.n_max.unwrap_or_else(|| fit_horizon(&r.family, BUILD_HORIZON_CAP));
    let op = ctx.operator(&r, n_max)?;
    let stages = a.stages.unwrap_or(default_stages);
    let targets = default_targets(&op, a.targets.unwrap_or(default_targets_count)).map_err(runtime)?;
    let oracle = CPlusOracle { search_span: a.span };
    let staged = match name {
        "chaotic" => build_chaotic(&oracle, &op, &targets, stages),
        _ => {
            let alpha = parse_fraction(&a.alpha).map_err(|e| runtime(format!("--alpha: {e}")))?;
            if name == "ufhc" {
                build_ufhc(&oracle, &op, alpha, &targets, stages)
            } else {
                build_fhc(&oracle, &op, alpha, &targets, stages)
            }
        }
    }
    .map_err(runtime)?;
    let reverified = staged.reverify(&op).map_err(runtime)?;
    let mut st = Table::new("stages", &["stage", "n", "d", "generation", "target", "support", "checks_hold"]);
    for s in &staged.stages {
        st.push([
            s.index.to_string(),
            s.n.to_string(),
            s.d.map(|d| d.to_string()).unwrap_or_default(),
            s.generation.to_string(),
            format!("{:?}", s.target),
            s.z.support_len().to_string(),
            s.checks.iter().all(|c| c.holds).to_string(),
        ]);
    }
    let mut dt = Table::new(
        "densities",
        &[
            "target",
            "kind",
            "radius",
            "horizon",
            "hits",
            "measured",
            "measured_exact",
            "analytic_bound",
            "analytic_bound_exact",
            "required",
            "holds",
        ],
    );
    for d in &staged.densities {
        let [ab, ab_exact] = exact_cells(&d.analytic_bound);
        dt.push([
            d.target.to_string(),
            d.kind.clone(),
            d.radius.to_fraction_string(),
            d.horizon.to_string(),
            d.hits.to_string(),
            format!("{}", d.measured),
            d.measured_exact.clone(),
            ab,
            ab_exact,
            d.required.to_fraction_string(),
            d.holds.to_string(),
        ]);
    }
    let body = BuildBody { operator: summarize_op(&r, &op), all_hold: staged.all_hold(), reverified, staged: &staged };
    ctx.record(&format!("build {name}"), a)?;
    ctx.sink.json("staged", &format!("build {name}"), &body).map_err(runtime)?;
    ctx.sink.csv(&st, false).map_err(runtime)?;
    ctx.sink.csv(&dt, false).map_err(runtime)?;
    Ok(if body.all_hold && reverified { EXIT_OK } else { EXIT_ERROR }.into())
}

// --- eigen -----------------------------------------------------------------------

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    lambda: String,
    re: f64,
    im: f64,
    residual: f64,
    residual_allowance: Option<f64>,
    tail_bound: Option<f64>,
    support: usize,
    mass: f64,
    finite_series: bool,
    convergence: Option<Convergence>,
}

impl EigenRow {
    fn new(index: usize, lambda: String, t: &EigenTruncation, convergence: Option<Convergence>) -> Self {
        EigenRow {
            index,
            lambda,
            re: t.lambda.re,
            im: t.lambda.im,
            residual: t.residual,
            residual_allowance: t.residual_allowance(),
            tail_bound: t.tail_bound,
            support: t.coefficients.len(),
            mass: t.mass,
            finite_series: t.finite_series,
            convergence,
        }
    }
}

fn eigen_table(rows: &[EigenRow]) -> Table {
    let mut t = Table::new(
        "eigen",
        &["index", "lambda", "re", "im", "residual", "residual_allowance", "tail_bound", "support", "mass", "finite_series", "convergence"],
    );
    for r in rows {
        t.push([
            r.index.to_string(),
            r.lambda.clone(),
            format!("{:e}", r.re),
            format!("{:e}", r.im),
            format!("{:e}", r.residual),
            opt_f64(r.residual_allowance),
            opt_f64(r.tail_bound),
            r.support.to_string(),
            format!("{:e}", r.mass),
            r.finite_series.to_string(),
            r.convergence.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default(),
        ]);
    }
    t
}

#[derive(Serialize)]
struct CTypeEigenBody {
    operator: OperatorSummary,
    phi_sequence: PhiSequence,
    blocks: Vec<u64>,
    stages: usize,
    max_residual: f64,
    rows: Vec<EigenRow>,
    truncations: Option<Vec<EigenTruncation>>,
}

fn cmd_eigen_ctype(ctx: &Ctx, a: &CTypeEigenArgs) -> Result<ExitCode, CliError> {
    let r = ctx.resolve()?;
    let seq = good_phi_sequence(&r.family, a.through).map_err(runtime)?;
    let n_max = match ctx.spec.n_max {
        Some(n) => n,
        None => {
            let want = seq.n(a.stages + EIGEN_TAIL_STAGES);
            if CTypeOperator::new(r.family.clone(), want, r.p).is_ok() {
                want
            } else {
                seq.n(a.stages)
            }
        }
    };
    let op = ctx.operator(&r, n_max)?;
    let lambdas: Vec<(String, Unimodular)> = if a.angles.is_empty() {
        (0..a.grid).map(|j| (format!("{j}/{}", a.grid), Unimodular::turns(j as i64, a.grid))).collect()
    } else {
        a.angles.iter().map(|&t| (format!("{t}rad"), Unimodular::Angle(t))).collect()
    };
    let mut rows = Vec::new();
    let mut truncs = Vec::new();
    for (i, (label, lambda)) in lambdas.into_iter().enumerate() {
        let t = ctype_eigenvector(&op, &seq, lambda, a.stages).map_err(|e| runtime(format!("λ = {label}: {e}")))?;
        rows.push(EigenRow::new(i, label, &t, None));
        if a.coefficients {
            truncs.push(t);
        }
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let table = eigen_table(&rows);
    let blocks = seq.prefix(a.stages);
    let body = CTypeEigenBody {
        operator: summarize_op(&r, &op),
        phi_sequence: seq,
        blocks,
        stages: a.stages,
        max_residual,
        rows,
        truncations: a.coefficients.then_some(truncs),
    };
    ctx.record("eigen ctype", a)?;
    ctx.sink.json("eigen", "eigen ctype", &body).map_err(runtime)?;
    ctx.sink.csv(&table, false).map_err(runtime)?;
    Ok(EXIT_OK.into())
}

#[derive(Serialize)]
struct DiagShiftBody {
    spec: DiagShiftSpec,
    stages: usize,
    seed: u64,
    max_residual: f64,
    rows: Vec<EigenRow>,
}

fn cmd_eigen_diagshift(ctx: &Ctx, a: &DiagShiftArgs) -> Result<ExitCode, CliError> {
    let spec = DiagShiftSpec { diagonal: DiagonalRule::RotatingToOne { theta: a.theta }, weights: WeightRule::Constant(a.weight) };
    let mut lambdas: Vec<(String, Complex64)> = Vec::new();
    for k in 1..=a.diagonal {
        let l = spec.diagonal.at(k).ok_or_else(|| runtime(format!("λ_{k} undefined")))?;
        lambdas.push((format!("lambda_{k}"), l));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for i in 0..a.samples {
        let l = Complex64::new(1.0, 0.0) + Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        lambdas.push((format!("sample_{i}"), l));
    }
    let mut rows = Vec::new();
    for (i, (label, l)) in lambdas.into_iter().enumerate() {
        let e = diag_shift_eigenvector(&spec, l, a.stages).map_err(|e| runtime(format!("{label}: {e}")))?;
        rows.push(EigenRow::new(i, label, &e.truncation, Some(e.convergence)));
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let table = eigen_table(&rows);
    let body = DiagShiftBody { spec, stages: a.stages, seed: a.seed, max_residual, rows };
    ctx.record("eigen diagshift", a)?;
    ctx.sink.json("eigen", "eigen diagshift", &body).map_err(runtime)?;
    ctx.sink.csv(&table, false).map_err(runtime)?;
    Ok(EXIT_OK.into())
}
