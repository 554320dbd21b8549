//! `barrierkit`: one-shot commands over the comparison and varifold toolkit.
//!
//! Every command writes `<command>.json` into the report directory and, with
//! `--csv`, a plot-ready `<command>.csv`. Exit codes: 0 consistent, 2 violated,
//! 1 input error.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod report;
mod source;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use barrierkit_core::barrier::{build_barrier, certify_on_model, BarrierParams, CERTIFY_SAMPLES, CERTIFY_SLACK};
use barrierkit_core::domains::{DomainKind, DomainSpec};
use barrierkit_core::jacobi::{integrate_riccati_grid, CurvatureProfile};
use barrierkit_core::modelspace::{riccati_closed_form, RiccatiState};
use barrierkit_core::principles::{
    audit_max_principle, audit_parabolic, enclosure_bounds, AuditOptions, BartaExample, GrowthParams,
    ParabolicOptions, PrincipleVerdict, ScalarField, BARTA_CAP, BARTA_PER_RING, BARTA_RINGS,
};
use barrierkit_core::spectral::{min_trace_subspace, p_minus, SymmetricForm};
use barrierkit_core::varifold::{check_mean_curvature_bound, growth_diagnostics, DiscreteVarifold, TestField};
use barrierkit_core::{Error, ModelCurvature};

use report::{Outcome, Report, Series};
use source::{parse_radii, parse_vector, Source};

/// Fixed default seed.
const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Parser, Debug)]
#[command(name = "barrierkit", version, about = "Barrier certificates, comparison audits and varifold diagnostics")]
struct Cli {
    /// Directory for report files.
    #[arg(long, global = true, env = "BARRIERKIT_REPORT_DIR", default_value = ".")]
    report_dir: PathBuf,
    /// Also write the series of the report as CSV.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Barrier constants, optionally certified along a model domain.
    Barrier(BarrierArgs),
    /// Scalar Riccati comparison solution against ODE integration.
    Riccati(RiccatiArgs),
    /// Average of the smallest eigenvalues of a symmetric matrix.
    Pminus(PminusArgs),
    /// Lower bound on the distance from a varifold to the boundary.
    Enclosure(EnclosureArgs),
    /// Mean-curvature bound test over random smooth fields.
    VarifoldCheck(VarifoldCheckArgs),
    /// Mass growth, d0, parabolicity and stochastic completeness.
    Growth(GrowthArgs),
    /// Sampled weak maximum principle audit.
    Maxprin(MaxprinArgs),
    /// Sampled parabolic maximum principle audit.
    Parabolic(ParabolicArgs),
    /// Barta floor on the shipped sphere-cap example.
    Spectrum(SpectrumArgs),
    /// Write a sampled test submanifold as a varifold file.
    Sample(SampleArgs),
}

#[derive(Args, Debug, Serialize)]
struct BarrierArgs {
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long)]
    ell: usize,
    /// Lower bound for p_minus(II, ell - 1).
    #[arg(long, allow_negative_numbers = true)]
    lam1: f64,
    /// Lower bound for p_minus(II, ell).
    #[arg(long)]
    lam2: f64,
    #[arg(long)]
    h: f64,
    #[arg(long = "R")]
    r: f64,
    /// Model domain as JSON, e.g. '{"kind":"euclidean_ball","rho":1}'.
    #[arg(long)]
    domain: Option<String>,
    /// Ambient dimension of the domain.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = CERTIFY_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = CERTIFY_SLACK)]
    slack: f64,
}

#[derive(Args, Debug, Serialize)]
struct RiccatiArgs {
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 5.0)]
    t_max: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Agreement required between closed form and integration.
    #[arg(long, default_value_t = 1e-8)]
    check_tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct PminusArgs {
    /// Rows separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    matrix: String,
    #[arg(long)]
    ell: usize,
}

#[derive(Args, Debug, Serialize)]
struct EnclosureArgs {
    #[arg(long)]
    lam: f64,
    #[arg(long = "H")]
    h: f64,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    /// Distance from the boundary of the varifold to the boundary; `inf` if none.
    #[arg(long)]
    dist_boundary: f64,
}

#[derive(Args, Debug, Serialize)]
struct VarifoldCheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 20)]
    fields: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Support radius of the fields; chosen from the sample when absent.
    #[arg(long)]
    support: Option<f64>,
    /// Field center as `x,y,...`; the weighted centroid when absent.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    /// Add the inward radial field `-(x - center)`.
    #[arg(long)]
    inward_field: bool,
    /// Relative tolerance: consistent iff min >= -tol * mass.
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
    #[arg(long)]
    fd_step: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct GrowthArgs {
    #[command(flatten)]
    source: Source,
    /// `start:stop:step` or a comma list.
    #[arg(long)]
    radii: String,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct BarrierFieldArgs {
    /// Model domain as JSON.
    #[arg(long)]
    domain: String,
    #[arg(long = "barrier-h", default_value_t = 0.0)]
    barrier_h: f64,
    /// Collar width of the barrier.
    #[arg(long = "R", default_value_t = 1.0)]
    r: f64,
    /// Level as a distance to the boundary; gamma = exp(-C2 level).
    #[arg(long, default_value_t = 0.9)]
    level_distance: f64,
}

#[derive(Args, Debug, Serialize)]
struct MaxprinArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    barrier: BarrierFieldArgs,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Estimated from the sample when absent.
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    i_threshold: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct ParabolicArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    barrier: BarrierFieldArgs,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    /// Tolerances of the hypothesis, comma separated.
    #[arg(long, default_value = "1e-3")]
    eps: String,
    /// Radii of the parabolicity diagnostic; chosen from the sample when absent.
    #[arg(long)]
    radii: Option<String>,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 1e-8)]
    var_tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = BARTA_RINGS)]
    rings: usize,
    #[arg(long, default_value_t = BARTA_PER_RING)]
    per_ring: usize,
    #[arg(long, default_value_t = BARTA_CAP)]
    cap: f64,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, short)]
    output: PathBuf,
}

fn parse_domain(json: &str, m: usize) -> barrierkit_core::Result<DomainSpec> {
    let kind: DomainKind = serde_json::from_str(json).map_err(|e| Error::InvalidParameter {
        name: "domain",
        reason: e.to_string(),
    })?;
    DomainSpec::new(kind, m)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn run_barrier(a: &BarrierArgs) -> barrierkit_core::Result<Outcome> {
    let p = BarrierParams {
        c: ModelCurvature::new(a.c)?,
        ell: a.ell,
        lambda_ell_minus_1: a.lam1,
        lambda_ell: a.lam2,
        h: a.h,
        r: a.r,
    };
    let cert = build_barrier(&p)?;
    let mut out = Outcome::new(json!({ "certificate": to_value(&cert) }));
    let n = 101;
    let rows = (0..n)
        .map(|i| {
            let r = a.r * i as f64 / (n - 1) as f64;
            vec![r, cert.eta(r), cert.c2 * cert.eta(r)]
        })
        .collect();
    out.series = Some(Series::new(&["r", "u", "grad_norm"], rows));
    if let Some(d) = &a.domain {
        let domain = parse_domain(d, a.m)?;
        let rep = certify_on_model(&cert, &domain, a.samples, a.slack)?;
        out.consistent = Some(rep.passed);
        out.outputs["certify"] = to_value(&rep);
        out.provenance.push("certified on the closed-form distance Hessian of the model domain");
    }
    Ok(out)
}

fn run_riccati(a: &RiccatiArgs) -> barrierkit_core::Result<Outcome> {
    let c = ModelCurvature::new(a.c)?;
    let model = RiccatiState::new(a.tau, c, a.t_max)?;
    let t_end = model.domain_end.min(a.t_max);
    if a.samples < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "need at least 2".into(),
        });
    }
    // stay clear of the blow-up time
    let t_stop = if model.domain_end < a.t_max { 0.99 * t_end } else { t_end };
    let times: Vec<f64> = (1..a.samples).map(|i| t_stop * i as f64 / (a.samples - 1) as f64).collect();
    let profile = CurvatureProfile::model(1, c, a.t_max)?;
    let traj = integrate_riccati_grid(&profile, &SymmetricForm::from_diagonal(&[a.tau]), t_stop, a.tol, &times)?;
    let mut rows = Vec::new();
    let mut max_err = 0.0f64;
    for (t, b) in traj.times.iter().zip(&traj.b) {
        let f = riccati_closed_form(a.tau, c, *t)?;
        let num = b.matrix()[(0, 0)];
        let err = (num - f).abs() / f.abs().max(1.0);
        max_err = max_err.max(err);
        rows.push(vec![*t, f, num, err]);
    }
    let mut out = Outcome::new(json!({
        "domain_end": model.domain_end,
        "t_checked": t_stop,
        "max_relative_error": max_err,
    }));
    out.consistent = Some(max_err <= a.check_tol);
    out.series = Some(Series::new(&["t", "closed_form", "integrated", "relative_error"], rows));
    Ok(out)
}

fn parse_matrix(s: &str) -> barrierkit_core::Result<SymmetricForm> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
                        name: "matrix",
                        reason: format!("bad entry `{x}`"),
                    })
                })
                .collect()
        })
        .collect::<barrierkit_core::Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: "must be square".into(),
        });
    }
    let flat: Vec<f64> = rows.concat();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &flat);
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: "must be symmetric".into(),
        });
    }
    SymmetricForm::new(m)
}

fn run_pminus(a: &PminusArgs) -> barrierkit_core::Result<Outcome> {
    let t = parse_matrix(&a.matrix)?;
    Ok(Outcome::new(json!({
        "p_minus": p_minus(&t, a.ell)?,
        "min_trace_subspace": min_trace_subspace(&t, a.ell)?,
        "eigenvalues": t.eigenvalues(),
    })))
}

fn run_enclosure(a: &EnclosureArgs) -> barrierkit_core::Result<Outcome> {
    let b = enclosure_bounds(a.lam, a.h, a.c, a.dist_boundary)?;
    Ok(Outcome::new(to_value(&b)))
}

fn center_or(s: &Option<String>, v: &DiscreteVarifold, centroid: bool) -> barrierkit_core::Result<DVector<f64>> {
    match s {
        Some(s) => {
            let c = parse_vector(s)?;
            if c.len() != v.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: v.ambient_dim(),
                    got: c.len(),
                });
            }
            Ok(c)
        }
        None if centroid => {
            let mut c = DVector::zeros(v.ambient_dim());
            for (p, w) in v.points().iter().zip(v.weights()) {
                c += p * *w;
            }
            Ok(c / v.mass())
        }
        None => Ok(DVector::zeros(v.ambient_dim())),
    }
}

fn run_varifold_check(a: &VarifoldCheckArgs) -> barrierkit_core::Result<Outcome> {
    let v = a.source.load(None)?;
    let center = center_or(&a.center, &v, true)?;
    let support = match a.support {
        Some(s) => s,
        None => {
            let ring = barrierkit_core::varifold::boundary_ring(&v);
            let bd = v
                .points()
                .iter()
                .zip(v.boundary())
                .filter(|(_, b)| **b)
                .map(|(p, _)| (p - &center).norm())
                .fold(f64::INFINITY, f64::min);
            if bd.is_finite() {
                0.9 * (bd - ring)
            } else {
                1.5 * v.points().iter().map(|p| (p - &center).norm()).fold(0.0, f64::max)
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut fields = (0..a.fields)
        .map(|_| TestField::random_affine(&mut rng, center.clone(), support))
        .collect::<barrierkit_core::Result<Vec<_>>>()?;
    if a.inward_field {
        let c = center.clone();
        fields.push(TestField::smooth_bump(center.clone(), support, move |x| -(x - &c))?);
    }
    let step = a.fd_step.unwrap_or_else(|| v.default_fd_step());
    let rep = check_mean_curvature_bound(&v, a.h, &fields, step)?;
    let mut out = Outcome::new(to_value(&rep));
    out.outputs["min_over_mass"] = json!(rep.min / rep.mass);
    out.outputs["support"] = json!(support);
    out.consistent = Some(rep.consistent(a.tol));
    out.provenance.push("necessary-condition check on the tested field family");
    Ok(out)
}

fn run_growth(a: &GrowthArgs) -> barrierkit_core::Result<Outcome> {
    let radii = parse_radii(&a.radii)?;
    let v = a.source.load(radii.last().copied())?;
    let center = center_or(&a.center, &v, false)?;
    let rep = growth_diagnostics(&v, a.sigma, a.alpha, &radii, &center)?;
    let mut out = Outcome::new(to_value(&rep));
    out.series = Some(Series::new(
        &["r", "mass"],
        rep.radii.iter().zip(&rep.masses).map(|(r, m)| vec![*r, *m]).collect(),
    ));
    out.provenance.push("verdicts are power-law extrapolations from finite radii");
    Ok(out)
}

fn barrier_field(b: &BarrierFieldArgs, m: usize, ell: usize) -> barrierkit_core::Result<(ScalarField, f64, Value)> {
    let domain = parse_domain(&b.domain, m)?;
    let cert = build_barrier(&BarrierParams::for_domain(&domain, ell, b.barrier_h, b.r)?)?;
    let gamma = cert.eta(b.level_distance);
    Ok((ScalarField::from_barrier(cert, domain), gamma, to_value(&cert)))
}

fn default_radii(v: &DiscreteVarifold) -> Vec<f64> {
    let rmax = v.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
    // one decade ending just inside the sample
    let hi = 0.95 * rmax;
    (0..12).map(|i| hi * 10f64.powf(i as f64 / 11.0 - 1.0)).collect()
}

fn run_maxprin(a: &MaxprinArgs) -> barrierkit_core::Result<Outcome> {
    let v = a.source.load(None)?;
    let (u, gamma, cert) = barrier_field(&a.barrier, v.ambient_dim(), v.ell())?;
    let (d0, d0_source) = match a.d0 {
        Some(d) => (d, "given"),
        None => {
            let g = growth_diagnostics(&v, a.sigma, a.alpha, &default_radii(&v), &DVector::zeros(v.ambient_dim()))?;
            (g.d0_estimate.max(0.0), "estimated from mass growth")
        }
    };
    let gp = GrowthParams::new(a.sigma, a.alpha, d0)?;
    let mut opts = AuditOptions::new(v.ambient_dim());
    opts.i_threshold = a.i_threshold;
    opts.tol = a.tol;
    let rep = audit_max_principle(&v, &u, a.h, &gp, gamma, &opts)?;
    let mut out = Outcome::new(json!({ "report": to_value(&rep), "barrier": cert, "d0_source": d0_source }));
    out.consistent = Some(rep.verdict == PrincipleVerdict::Consistent);
    out.provenance.push("sampled essential infimum over quadrature points");
    Ok(out)
}

fn run_parabolic(a: &ParabolicArgs) -> barrierkit_core::Result<Outcome> {
    let v = a.source.load(None)?;
    let (u, gamma, cert) = barrier_field(&a.barrier, v.ambient_dim(), v.ell())?;
    let eps: Vec<f64> = a
        .eps
        .split(',')
        .map(|x| {
            x.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
                name: "eps",
                reason: format!("bad value `{x}`"),
            })
        })
        .collect::<barrierkit_core::Result<_>>()?;
    let radii = match &a.radii {
        Some(r) => parse_radii(r)?,
        None => default_radii(&v),
    };
    let growth = growth_diagnostics(&v, 0.0, 0.0, &radii, &DVector::zeros(v.ambient_dim()))?;
    let seq: Vec<(ScalarField, f64)> = eps.iter().map(|e| (u.clone(), *e)).collect();
    let opts = ParabolicOptions {
        k: a.k,
        var_tol: a.var_tol,
        ..ParabolicOptions::default()
    };
    let rep = audit_parabolic(&v, &seq, a.h, gamma, &growth.parabolic, &opts)?;
    let mut out = Outcome::new(json!({
        "report": to_value(&rep),
        "barrier": cert,
        "parabolic": to_value(&growth.parabolic),
        "growth_exponent": growth.exponent,
    }));
    out.consistent = Some(rep.passed);
    out.provenance.push("components from a k-nearest-neighbour graph");
    Ok(out)
}

fn run_spectrum(a: &SpectrumArgs) -> barrierkit_core::Result<Outcome> {
    let ex = BartaExample::new(a.rings, a.per_ring, a.cap, a.eps)?;
    let rep = ex.run(a.eps)?;
    let rows = rep
        .quotients
        .iter()
        .map(|(i, q)| vec![ex.r[*i], *q])
        .collect();
    let mut out = Outcome::new(json!({
        "discrete_inf": rep.discrete_inf,
        "floor": rep.floor,
        "region_size": rep.region_size,
        "slack": rep.slack,
        "delta_bar": ex.delta_bar,
        "u_star": ex.u_star,
    }));
    out.consistent = Some(rep.passed);
    out.series = Some(Series::new(&["r", "quotient"], rows));
    out.provenance.push("cotangent Laplacian with mixed-Voronoi mass");
    Ok(out)
}

fn run_sample(a: &SampleArgs) -> barrierkit_core::Result<Outcome> {
    let v = a.source.load(None)?;
    barrierkit_core::io::write_file(&a.output, &v)?;
    Ok(Outcome::new(json!({
        "points": v.len(),
        "mass": v.mass(),
        "output": a.output.display().to_string(),
    })))
}

fn dispatch(cmd: &Command) -> (&'static str, Value, barrierkit_core::Result<Outcome>) {
    match cmd {
        Command::Barrier(a) => ("barrier", to_value(a), run_barrier(a)),
        Command::Riccati(a) => ("riccati", to_value(a), run_riccati(a)),
        Command::Pminus(a) => ("pminus", to_value(a), run_pminus(a)),
        Command::Enclosure(a) => ("enclosure", to_value(a), run_enclosure(a)),
        Command::VarifoldCheck(a) => ("varifold-check", to_value(a), run_varifold_check(a)),
        Command::Growth(a) => ("growth", to_value(a), run_growth(a)),
        Command::Maxprin(a) => ("maxprin", to_value(a), run_maxprin(a)),
        Command::Parabolic(a) => ("parabolic", to_value(a), run_parabolic(a)),
        Command::Spectrum(a) => ("spectrum", to_value(a), run_spectrum(a)),
        Command::Sample(a) => ("sample", to_value(a), run_sample(a)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (name, inputs, result) = dispatch(&cli.command);
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("barrierkit {name}: {e}");
            return ExitCode::from(1);
        }
    };
    let report = Report::new(name, inputs, outcome, start.elapsed());
    if let Err(e) = report.write(&cli.report_dir, cli.csv) {
        eprintln!("barrierkit {name}: cannot write report: {e}");
        return ExitCode::from(1);
    }
    // a closed stdout (e.g. piped into `head`) is not an error; the report is on disk
    let text = serde_json::to_string_pretty(&report.outputs).expect("serializable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    ExitCode::from(report.exit_code())
}
