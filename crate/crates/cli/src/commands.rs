use std::path::PathBuf;

use clap::Subcommand;
use serde::Serialize;
use serde_json::Value;

use rbmo_core::coefficients::{k_coefficient, k_of_cube};
use rbmo_core::geometry::{build_family, doubling_subfamily, Cube, CubeFamily};
use rbmo_core::measures::{growth_check, AtomicMeasure};
use rbmo_core::operators::{
    admissible_triples, all_pairs, hoelder_check, sample_pairs, size_check, t1_field, CancellationReport, KernelSpec,
    TruncatedOperator, TruncationGrid, WorstRatio,
};
use rbmo_core::rbmo::{l1_norm, standard_basket, SampledFunction, SeminormProblem, SeminormWitness};
use rbmo_core::t1::{
    boundedness_probe, certify_condition_ii, construct_b_from_phi, default_cancellation, probe_basket,
    CancellationPolicy, Sect4Constants, T1Certificate,
};
use rbmo_core::testfn::{average_points, build_test_family, fit_lower_bound, fubini_sides, phi_field, phi_vs_k_probe, LowerBoundFit, PhiKProbe};
use rbmo_core::Error;

use crate::config::{measure_of, Flags, RunConfig};
use crate::error::CliError;
use crate::report::{emit_plot_data, MeasureInfo, Report, Table};
use crate::spec::{parse_cube_spec, parse_function_spec, FunctionSpec};

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a measure and describe it; --measure-out saves the JSON.
    GenMeasure(Flags),
    /// Growth constant over the cube family.
    GrowthCheck(Flags),
    /// K(Q, R) for --q inside --r, or K(Q) when --r is absent.
    KCoeff(Flags),
    /// The doubling cubes of the family.
    DoublingScan(Flags),
    /// Seminorms of --function.
    RbmoNorm(Flags),
    /// Size, Hölder and cancellation checks for --kernel.
    KernelCheck(Flags),
    /// T_eps applied to --function over the truncation grid.
    ApplyCzo(Flags),
    /// phi against K at the base points, plus the lower-bound fit.
    TestFamily(Flags),
    /// Certificate for T1 and the construction of b_Q from phi.
    T1Check(Flags),
    /// Empirical ratios ||T_eps f|| / ||f|| over a probe basket.
    BoundednessProbe(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenMeasure(_) => "gen-measure",
            Command::GrowthCheck(_) => "growth-check",
            Command::KCoeff(_) => "k-coeff",
            Command::DoublingScan(_) => "doubling-scan",
            Command::RbmoNorm(_) => "rbmo-norm",
            Command::KernelCheck(_) => "kernel-check",
            Command::ApplyCzo(_) => "apply-czo",
            Command::TestFamily(_) => "test-family",
            Command::T1Check(_) => "t1-check",
            Command::BoundednessProbe(_) => "boundedness-probe",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::GenMeasure(f)
            | Command::GrowthCheck(f)
            | Command::KCoeff(f)
            | Command::DoublingScan(f)
            | Command::RbmoNorm(f)
            | Command::KernelCheck(f)
            | Command::ApplyCzo(f)
            | Command::TestFamily(f)
            | Command::T1Check(f)
            | Command::BoundednessProbe(f) => f,
        }
    }
}

/// Everything a subcommand needs after validation.
pub struct Context {
    pub flags: Flags,
    pub config: RunConfig,
    pub mu: AtomicMeasure,
}

impl Context {
    fn family(&self) -> Result<CubeFamily, CliError> {
        Ok(build_family(&self.mu, &self.config.family_params())?)
    }

    fn doubling(&self) -> Result<(CubeFamily, CubeFamily), CliError> {
        let fam = self.family()?;
        let dbl = doubling_subfamily(&self.mu, &fam, self.config.alpha, self.config.beta)?;
        Ok((fam, dbl))
    }

    fn nonempty_doubling(&self) -> Result<CubeFamily, CliError> {
        let (_, dbl) = self.doubling()?;
        if dbl.is_empty() {
            return Err(CliError::Validation("no doubling cubes in the family; adjust the ladder or alpha/beta".into()));
        }
        Ok(dbl)
    }

    fn kernel(&self) -> Result<KernelSpec, CliError> {
        Ok(KernelSpec::by_name(&self.config.kernel, self.mu.growth_dim(), self.config.component)?)
    }

    fn grid(&self) -> TruncationGrid {
        TruncationGrid { epsilons: self.config.eps.clone() }
    }

    fn cube(&self, spec: &Option<String>) -> Result<Option<Cube>, CliError> {
        spec.as_deref().map(parse_cube_spec).transpose()
    }

    fn function(&self) -> Result<SampledFunction, CliError> {
        let mu = &self.mu;
        let pick = |label: &str| {
            standard_basket(mu, 0, 0).into_iter().find(|f| f.label == label).expect("basket member")
        };
        Ok(match parse_function_spec(&self.config.function)? {
            FunctionSpec::Constant(c) => SampledFunction::constant(mu, c),
            FunctionSpec::IndicatorLeftHalf => pick("indicator-left-half"),
            FunctionSpec::FirstCoordinate => pick("first-coordinate"),
            FunctionSpec::LogDistanceToCenter => pick("log-distance-to-center"),
            FunctionSpec::RandomSigns(seed) => {
                let f = standard_basket(mu, 1, seed).pop().expect("random member");
                SampledFunction { label: format!("random-signs:{seed}"), ..f }
            }
            FunctionSpec::Phi(atom) => {
                if atom >= mu.len() {
                    return Err(CliError::Validation(format!("phi base atom {atom} out of range")));
                }
                SampledFunction::new(mu, phi_field(mu, mu.point(atom)), format!("phi:{atom}"))?
            }
        })
    }
}

/// A finished subcommand: the JSON result and its plot tables.
pub struct Outcome {
    pub result: Value,
    pub tables: Vec<Table>,
}

fn json(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Validation(format!("result: {e}")))
}

fn plain(v: impl Serialize) -> Result<Outcome, CliError> {
    Ok(Outcome { result: json(v)?, tables: Vec::new() })
}

/// Runs one subcommand; returns the report text.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    let flags = cmd.flags().clone().with_config_file()?;
    let mu = measure_of(&flags)?;
    let config = RunConfig::resolve(&flags, &mu)?;
    let ctx = Context { flags, config, mu };
    let outcome = match cmd {
        Command::GenMeasure(_) => gen_measure(&ctx)?,
        Command::GrowthCheck(_) => plain(growth_check(&ctx.mu, &ctx.family()?)?)?,
        Command::KCoeff(_) => k_coeff(&ctx)?,
        Command::DoublingScan(_) => doubling_scan(&ctx)?,
        Command::RbmoNorm(_) => rbmo_norm(&ctx)?,
        Command::KernelCheck(_) => kernel_check(&ctx)?,
        Command::ApplyCzo(_) => apply_czo(&ctx)?,
        Command::TestFamily(_) => test_family(&ctx)?,
        Command::T1Check(_) => t1_check(&ctx)?,
        Command::BoundednessProbe(_) => boundedness(&ctx)?,
    };
    let report = Report {
        tool: crate::report::TOOL,
        version: crate::report::VERSION,
        subcommand: cmd.name(),
        config: &ctx.config,
        measure: MeasureInfo::new(&ctx.config.measure, &ctx.mu),
        result: outcome.result,
    };
    let text = report.to_json()?;
    if let Some(dir) = &ctx.flags.csv_dir {
        emit_plot_data(dir, &outcome.tables)?;
    }
    if let Some(path) = &ctx.flags.out {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct MeasureSummary {
    bounding_box: Vec<(f64, f64)>,
    diameter: f64,
    min_gap: Option<f64>,
    written_to: Option<PathBuf>,
}

fn gen_measure(ctx: &Context) -> Result<Outcome, CliError> {
    if let Some(path) = &ctx.flags.measure_out {
        std::fs::write(path, ctx.mu.to_json_string())?;
    }
    plain(MeasureSummary {
        bounding_box: ctx.mu.bounding_box(),
        diameter: ctx.mu.diameter(),
        min_gap: ctx.mu.min_gap(),
        written_to: ctx.flags.measure_out.clone(),
    })
}

#[derive(Serialize)]
struct KReport {
    q: Cube,
    r: Option<Cube>,
    value: f64,
    #[serde(rename = "N")]
    n_steps: usize,
    terms: Vec<f64>,
}

fn k_coeff(ctx: &Context) -> Result<Outcome, CliError> {
    let q = ctx.cube(&ctx.config.q)?.ok_or_else(|| CliError::Validation("k-coeff needs --q".into()))?;
    let r = ctx.cube(&ctx.config.r)?;
    let k = match &r {
        Some(r) => k_coefficient(&ctx.mu, &q, r)?,
        None => k_of_cube(&ctx.mu, &q)?,
    };
    plain(KReport { q, r, value: k.value, n_steps: k.n_steps, terms: k.terms })
}

#[derive(Serialize)]
struct DoublingReport {
    alpha: f64,
    beta: f64,
    family_id: String,
    family_size: usize,
    doubling_count: usize,
    doubling: Vec<Cube>,
}

fn doubling_scan(ctx: &Context) -> Result<Outcome, CliError> {
    let (fam, dbl) = ctx.doubling()?;
    plain(DoublingReport {
        alpha: ctx.config.alpha,
        beta: ctx.config.beta,
        family_id: fam.id(),
        family_size: fam.len(),
        doubling_count: dbl.len(),
        doubling: dbl.cubes().to_vec(),
    })
}

#[derive(Serialize)]
struct NormReport {
    function: String,
    l1: f64,
    seminorm_e: SeminormWitness,
    seminorm_a: f64,
    norm_star: f64,
}

fn rbmo_norm(ctx: &Context) -> Result<Outcome, CliError> {
    let (fam, dbl) = ctx.doubling()?;
    let f = ctx.function()?;
    let e = SeminormProblem::doubling(&ctx.mu, &dbl)?.solve(&ctx.mu, &f)?;
    let a = SeminormProblem::all_cubes(&ctx.mu, &fam, ctx.config.rho)?.solve(&ctx.mu, &f)?;
    let l1 = l1_norm(&ctx.mu, &f);
    plain(NormReport { function: f.label, l1, norm_star: e.seminorm + l1, seminorm_a: a.seminorm, seminorm_e: e })
}

#[derive(Serialize)]
struct KernelReport {
    kernel: String,
    n: f64,
    delta: f64,
    antisymmetric: bool,
    size: WorstRatio,
    hoelder: WorstRatio,
    cancellation: CancellationReport,
}

fn kernel_check(ctx: &Context) -> Result<Outcome, CliError> {
    let k = ctx.kernel()?;
    let mu = &ctx.mu;
    let pairs = if mu.len() <= 64 { all_pairs(mu) } else { sample_pairs(mu, ctx.config.samples, ctx.config.seed) };
    let triples = admissible_triples(mu, ctx.config.samples, ctx.config.seed);
    plain(KernelReport {
        size: size_check(&k, mu, &pairs)?,
        hoelder: hoelder_check(&k, mu, &triples)?,
        cancellation: default_cancellation(&k, mu, ctx.config.cancellation_cap)?,
        kernel: k.name,
        n: k.n,
        delta: k.delta,
        antisymmetric: k.antisymmetric,
    })
}

#[derive(Serialize)]
struct ApplyRow {
    epsilon: f64,
    l1: f64,
    max_abs: f64,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct ApplyReport {
    kernel: String,
    function: String,
    rows: Vec<ApplyRow>,
}

fn apply_czo(ctx: &Context) -> Result<Outcome, CliError> {
    let k = ctx.kernel()?;
    let f = ctx.function()?;
    let mut rows = Vec::new();
    for &eps in &ctx.config.eps {
        let tf = TruncatedOperator::new(k.clone(), eps)?.apply(&ctx.mu, &f);
        rows.push(ApplyRow {
            epsilon: eps,
            l1: l1_norm(&ctx.mu, &tf),
            max_abs: tf.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            values: tf.values,
        });
    }
    plain(ApplyReport { kernel: k.name, function: f.label, rows })
}

#[derive(Serialize)]
struct BaseProbe {
    atom: usize,
    probe: PhiKProbe,
    fubini_lhs: f64,
    fubini_rhs: f64,
}

#[derive(Serialize)]
struct TestFamilyReport {
    probes: Vec<BaseProbe>,
    fit: Option<LowerBoundFit>,
    fit_points: usize,
    fit_note: Option<String>,
}

fn test_family(ctx: &Context) -> Result<Outcome, CliError> {
    let mu = &ctx.mu;
    let mut table = Table::new("phi_vs_k", vec!["base", "radius", "phi", "K"]);
    let mut probes = Vec::new();
    for &atom in &ctx.config.base_points {
        let x = mu.point(atom);
        let probe = phi_vs_k_probe(mu, x, &ctx.config.radii)?;
        for row in &probe.rows {
            table.push(vec![atom as f64, row.radius, row.phi, row.k]);
        }
        let (fubini_lhs, fubini_rhs) = fubini_sides(mu, x);
        probes.push(BaseProbe { atom, probe, fubini_lhs, fubini_rhs });
    }
    let (_, dbl) = ctx.doubling()?;
    let (fit, fit_points, fit_note) = if dbl.is_empty() {
        (None, 0, Some("no doubling cubes".to_string()))
    } else {
        let points = average_points(&build_test_family(mu, &ctx.config.base_points, &dbl)?);
        match fit_lower_bound(&points) {
            Ok(fit) => (Some(fit), points.len(), None),
            Err(e) => (None, points.len(), Some(e.to_string())),
        }
    };
    Ok(Outcome { result: json(TestFamilyReport { probes, fit, fit_points, fit_note })?, tables: vec![table] })
}

#[derive(Serialize)]
struct T1Report {
    kernel: String,
    certificate: T1Certificate,
    construction: Option<Sect4Constants>,
    construction_note: Option<String>,
}

fn t1_check(ctx: &Context) -> Result<Outcome, CliError> {
    let mu = &ctx.mu;
    let k = ctx.kernel()?;
    let dbl = ctx.nonempty_doubling()?;
    let report = default_cancellation(&k, mu, ctx.config.cancellation_cap)?;
    if !report.passes && ctx.config.cancellation_policy == CancellationPolicy::Refuse {
        return Err(CliError::Validation(format!(
            "kernel '{}' fails the cancellation check ({} > {})",
            k.name, report.worst_abs, report.cap
        )));
    }
    let fields = ctx
        .config
        .eps
        .iter()
        .map(|&eps| Ok((eps, t1_field(mu, &k, eps)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut certificate = certify_condition_ii(mu, &fields, &dbl)?;
    certificate.cancellation_warning = !report.passes;
    certificate.cancellation = Some(report);
    if certificate.cancellation_warning {
        eprintln!("warning: kernel '{}' fails the cancellation check", k.name);
    }

    let op = TruncatedOperator::new(k.clone(), ctx.config.eps[0])?;
    let (construction, construction_note) = match construct_b_from_phi(mu, &op, &dbl, ctx.config.k_min) {
        Ok(c) => (Some(c), None),
        Err(e @ (Error::NoEligibleCubes | Error::InvalidParameter(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    let mut cert_table = Table::new("certificate", vec!["epsilon", "K", "osc_times_K"]);
    let mut sweep = Table::new("sweep", vec!["epsilon", "best_C"]);
    for e in &certificate.per_epsilon {
        sweep.push(vec![e.epsilon, e.best_c]);
        for c in &e.cubes {
            cert_table.push(vec![e.epsilon, c.k, c.osc_residual]);
        }
    }
    let result = json(T1Report { kernel: k.name, certificate, construction, construction_note })?;
    Ok(Outcome { result, tables: vec![cert_table, sweep] })
}

fn boundedness(ctx: &Context) -> Result<Outcome, CliError> {
    let mu = &ctx.mu;
    let k = ctx.kernel()?;
    let dbl = ctx.nonempty_doubling()?;
    let basket = probe_basket(mu, &dbl, ctx.config.base_points.len(), ctx.config.random, ctx.config.seed)?;
    plain(boundedness_probe(mu, &k, &basket, &dbl, &ctx.grid())?)
}
