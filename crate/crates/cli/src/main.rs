//! Command-line driver: triangulation validation, curvature and energy
//! reports, flow runs with CSV traces and run manifests, the regular-packing
//! solver, and a built-in numerical self-check.
//!
//! Exit codes: 0 success, 1 domain-level negative result (failed validation,
//! proven non-existence), 2 numeric failure, 3 input error.

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use yamabe3h::complex::validate;
use yamabe3h::energy::{curvature, tetra_energy_rel, total_energy_rel};
use yamabe3h::flow::{
    decay_bound_check, integrate, solve_regular, stability_spectrum, FlowConfig, FlowMethod,
    FlowStatus,
};
use yamabe3h::geometry::{
    classify, dihedral_cos_closed, dihedral_cos_cofactor, extended_solid_angles, q_value,
    regular_solid_angle, solid_angle_jacobian, Radii4, TetraClass, VERTEX_PAIRS,
};
use yamabe3h::{Complex, DomainGuard, Error, Packing};

const EXIT_DOMAIN: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "yamabe3h", version, about = "Hyperbolic ball packings on triangulated 3-manifolds: curvature, energy, and the combinatorial Yamabe flow")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that a triangulation file is a closed 3-manifold complex
    Validate {
        /// Triangulation JSON file
        tri: PathBuf,
    },
    /// Integrate the curvature flow and write a CSV trace plus a run manifest
    Flow {
        /// Triangulation JSON file
        tri: PathBuf,
        /// Initial radii: a packing JSON file, or `uniform:<t>`
        #[arg(long)]
        radii: String,
        /// Fixed RK4 step size
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Integration horizon
        #[arg(long = "t-max", default_value_t = 10.0)]
        t_max: f64,
        /// Flatness stopping tolerance on the curvature sup-norm
        #[arg(long = "stop-tol", default_value_t = 1e-8)]
        stop_tol: f64,
        /// Output CSV path (manifest written alongside)
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for the radius of the flat regular packing at a given degree
    SolveRegular {
        /// Tetra-degree (number of tetrahedra around each vertex)
        #[arg(long)]
        degree: usize,
    },
    /// Print the per-vertex scalar curvature of a packing
    Curvature {
        /// Triangulation JSON file
        tri: PathBuf,
        /// Radii: a packing JSON file, or `uniform:<t>`
        #[arg(long)]
        radii: String,
    },
    /// Print the energy report (relative functional and its gradient)
    Energy {
        /// Triangulation JSON file
        tri: PathBuf,
        /// Radii: a packing JSON file, or `uniform:<t>`
        #[arg(long)]
        radii: String,
    },
    /// Run built-in numerical cross-checks
    Selfcheck,
}

fn main() -> ExitCode {
    if let Err(msg) = init_thread_pool() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_INPUT);
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { tri } => cmd_validate(&tri),
        Cmd::Flow {
            tri,
            radii,
            dt,
            t_max,
            stop_tol,
            out,
        } => cmd_flow(&tri, &radii, dt, t_max, stop_tol, &out),
        Cmd::SolveRegular { degree } => cmd_solve_regular(degree),
        Cmd::Curvature { tri, radii } => cmd_curvature(&tri, &radii),
        Cmd::Energy { tri, radii } => cmd_energy(&tri, &radii),
        Cmd::Selfcheck => cmd_selfcheck(),
    }
}

/// `YAMABE3H_THREADS` caps the worker pool; unset means machine parallelism.
fn init_thread_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var("YAMABE3H_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| format!("YAMABE3H_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("YAMABE3H_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("failed to size the thread pool: {e}"))
}

/// Exit code for a library error, per the contract in the module docs.
fn exit_for(e: &Error) -> u8 {
    match e {
        // Input errors: malformed files, impossible parameters.
        Error::Json(_)
        | Error::FormatTag { .. }
        | Error::VertexIndexOutOfRange { .. }
        | Error::RepeatedVertex { .. }
        | Error::DuplicateTetrahedron { .. }
        | Error::IsolatedVertex { .. }
        | Error::EmptyComplex
        | Error::LengthMismatch { .. }
        | Error::NonPositiveRadius { .. }
        | Error::UnknownGenerator(_)
        | Error::RadiusDomain { .. }
        | Error::DegreeOutOfRange { .. }
        | Error::WCoordinateRange { .. }
        | Error::BadFlowConfig { .. } => EXIT_INPUT,
        // Domain-level negative results: well-posed questions answered "no".
        Error::NoRegularSolution { .. }
        | Error::HessianAtVirtual { .. }
        | Error::SpectrumNotFlat { .. }
        | Error::SpectrumAtVirtual { .. }
        | Error::DegreeTooLargeForDecay { .. }
        | Error::DegreeTooSmallForLowerBound { .. } => EXIT_DOMAIN,
        // Everything else is a numeric failure.
        _ => EXIT_NUMERIC,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, ExitCode> {
    std::fs::read(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_INPUT)
    })
}

fn load_complex(path: &Path) -> Result<Complex, ExitCode> {
    Complex::parse(&read_file(path)?).map_err(|e| fail(&e))
}

/// Radii argument: `uniform:<t>` or a packing JSON file. Returns the packing
/// and, for the file form, the raw bytes (for manifest digests).
fn load_radii(source: &str, vertex_count: usize) -> Result<(Packing, Option<Vec<u8>>), ExitCode> {
    if let Some(t) = source.strip_prefix("uniform:") {
        let t: f64 = t.parse().map_err(|_| {
            eprintln!("error: bad radius in {source:?}: expected uniform:<positive number>");
            ExitCode::from(EXIT_INPUT)
        })?;
        let p = Packing::uniform(vertex_count, t).map_err(|e| fail(&e))?;
        return Ok((p, None));
    }
    let bytes = read_file(Path::new(source))?;
    let p = Packing::parse(&bytes).map_err(|e| fail(&e))?;
    Ok((p, Some(bytes)))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    passed: bool,
    #[serde(flatten)]
    report: &'a yamabe3h::ValidationReport,
}

fn cmd_validate(tri: &Path) -> ExitCode {
    let c = match load_complex(tri) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = validate(&c);
    let passed = report.passed();
    print_json(&ValidateOutput {
        passed,
        report: &report,
    });
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DOMAIN)
    }
}

#[derive(Serialize)]
struct FlowSummary {
    status: &'static str,
    t_final: f64,
    accepted_steps: usize,
    rejected_steps: usize,
    k_inf_final: f64,
    s_rel_final: f64,
    r_min_final: f64,
    r_max_final: f64,
    virtual_count_final: usize,
    /// Fitted exponential decay rate (decayed runs) or the spectral
    /// contraction rate at the final packing (converged runs); null when
    /// neither applies.
    rate: Option<f64>,
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ManifestConfig {
    method: &'static str,
    dt: f64,
    t_max: f64,
    stop_tol: f64,
    detect_decay: bool,
    stride: usize,
    radii: String,
}

#[derive(Serialize)]
struct RunManifest {
    format: &'static str,
    command: &'static str,
    tool_version: &'static str,
    inputs: Vec<ManifestInput>,
    config: ManifestConfig,
    status: &'static str,
    output: ManifestInput,
}

fn cmd_flow(tri: &Path, radii: &str, dt: f64, t_max: f64, stop_tol: f64, out: &Path) -> ExitCode {
    let tri_bytes = match read_file(tri) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let c = match Complex::parse(&tri_bytes) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let (p, radii_bytes) = match load_radii(radii, c.vertex_count()) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let cfg = FlowConfig {
        method: FlowMethod::Rk4Fixed { dt },
        t_max,
        stop_tol,
        ..FlowConfig::default()
    };
    let trace = match integrate(&c, &p, &cfg) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };

    let csv = trace.to_csv();
    if let Err(e) = std::fs::write(out, &csv) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return ExitCode::from(EXIT_INPUT);
    }

    let mut inputs = vec![ManifestInput {
        path: tri.display().to_string(),
        sha256: sha256_hex(&tri_bytes),
    }];
    if let Some(bytes) = &radii_bytes {
        inputs.push(ManifestInput {
            path: radii.to_string(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = RunManifest {
        format: "yamabe3h-run/1",
        command: "flow",
        tool_version: env!("CARGO_PKG_VERSION"),
        inputs,
        config: ManifestConfig {
            method: "rk4",
            dt,
            t_max,
            stop_tol,
            detect_decay: cfg.detect_decay,
            stride: cfg.stride,
            radii: radii.to_string(),
        },
        status: trace.status.as_str(),
        output: ManifestInput {
            path: out.display().to_string(),
            sha256: sha256_hex(csv.as_bytes()),
        },
    };
    let manifest_path = manifest_path_for(out);
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Err(e) = std::fs::write(&manifest_path, manifest_json + "\n") {
        eprintln!("error: cannot write {}: {e}", manifest_path.display());
        return ExitCode::from(EXIT_INPUT);
    }

    let last = trace.final_sample();
    let k_inf = last
        .curvature
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    let rate = match trace.status {
        FlowStatus::DecayedToZero => {
            let d_max = c.degrees().iter().copied().max().unwrap_or(0);
            decay_bound_check(&trace, d_max)
                .ok()
                .and_then(|rep| rep.fitted_rate)
        }
        FlowStatus::ConvergedToFlat => {
            let p_final = Packing::new(last.r.clone()).expect("final radii are positive");
            stability_spectrum(&c, &p_final).ok().map(|s| s.rate)
        }
        _ => None,
    };
    print_json(&FlowSummary {
        status: trace.status.as_str(),
        t_final: last.t,
        accepted_steps: trace.accepted_steps,
        rejected_steps: trace.rejected_steps,
        k_inf_final: k_inf,
        s_rel_final: last.s_rel,
        r_min_final: last.r_min,
        r_max_final: last.r_max,
        virtual_count_final: last.virtual_count,
        rate,
    });
    match trace.status {
        FlowStatus::NumericFailure => ExitCode::from(EXIT_NUMERIC),
        _ => ExitCode::SUCCESS,
    }
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct SolveRegularOutput {
    degree: usize,
    t0: f64,
    alpha: f64,
    residual: f64,
}

fn cmd_solve_regular(degree: usize) -> ExitCode {
    let t0 = match solve_regular(degree) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let alpha = regular_solid_angle(t0);
    print_json(&SolveRegularOutput {
        degree,
        t0,
        alpha,
        residual: (alpha - 4.0 * PI / degree as f64).abs(),
    });
    ExitCode::SUCCESS
}

#[derive(Serialize)]
struct CurvatureOutput {
    k: Vec<f64>,
    k_inf: f64,
}

fn cmd_curvature(tri: &Path, radii: &str) -> ExitCode {
    let c = match load_complex(tri) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (p, _) = match load_radii(radii, c.vertex_count()) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let k = match curvature(&c, &p) {
        Ok(k) => k,
        Err(e) => return fail(&e),
    };
    let k_inf = k.inf_norm();
    print_json(&CurvatureOutput { k: k.k, k_inf });
    ExitCode::SUCCESS
}

#[derive(Serialize)]
struct EnergyOutput {
    s_rel: f64,
    curvature: Vec<f64>,
    k_inf: f64,
}

fn cmd_energy(tri: &Path, radii: &str) -> ExitCode {
    let c = match load_complex(tri) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (p, _) = match load_radii(radii, c.vertex_count()) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let report = match total_energy_rel(&c, &p, false) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let k_inf = report.grad.inf_norm();
    print_json(&EnergyOutput {
        s_rel: report.s_rel,
        curvature: report.grad.k,
        k_inf,
    });
    ExitCode::SUCCESS
}

/// Built-in cross-checks: the unit-quadruple Jacobian against its closed-form
/// reference, agreement of the two dihedral-cosine routes on a random sweep,
/// and finite-difference verification of the gradient identities.
fn cmd_selfcheck() -> ExitCode {
    let mut failures: Vec<String> = Vec::new();

    // Unit-quadruple Jacobian reference.
    {
        let r = Radii4::new([1.0; 4]).expect("unit quadruple is valid");
        match solid_angle_jacobian(&r) {
            Ok(j) => {
                let q = q_value(&r);
                let y = 1.0 / 1.0_f64.tanh();
                let c = 1.0_f64.sinh().powi(2) * (2.0 + 6.0 * y * y)
                    / (q.sqrt() * 3.0_f64.sinh().powi(2));
                let diag = -3.0 * c * 2.0_f64.cosh();
                let mut worst = 0.0_f64;
                for i in 0..4 {
                    for k in 0..4 {
                        let expected = if i == k { diag } else { c };
                        worst = worst.max((j[(i, k)] - expected).abs());
                    }
                }
                report_check(
                    &mut failures,
                    "unit-quadruple jacobian reference",
                    worst < 1e-10,
                    &format!("max entry deviation {worst:.3e}"),
                );
            }
            Err(e) => failures.push(format!("unit-quadruple jacobian reference: {e}")),
        }
    }

    // Dihedral cosine route agreement.
    {
        let mut rng = ChaCha20Rng::seed_from_u64(0x5EF1);
        let mut worst = 0.0_f64;
        let mut checked = 0usize;
        let mut broken: Option<String> = None;
        while checked < 1_000 && broken.is_none() {
            let vals: [f64; 4] = std::array::from_fn(|_| {
                (rng.gen_range((1e-2_f64).ln()..(10.0_f64).ln())).exp()
            });
            let r = Radii4::new(vals).expect("sampled radii are in range");
            match classify(&r) {
                Ok(TetraClass::Real) => {}
                Ok(_) => continue,
                Err(e) => {
                    broken = Some(e.to_string());
                    break;
                }
            }
            for &(i, j) in &VERTEX_PAIRS {
                match (dihedral_cos_cofactor(&r, i, j), dihedral_cos_closed(&r, i, j)) {
                    (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
                    (Err(e), _) | (_, Err(e)) => {
                        broken = Some(e.to_string());
                        break;
                    }
                }
            }
            checked += 1;
        }
        match broken {
            Some(e) => failures.push(format!("dihedral cosine route agreement: {e}")),
            None => report_check(
                &mut failures,
                "dihedral cosine route agreement",
                worst < 1e-10,
                &format!("{checked} real quadruples, worst {worst:.3e}"),
            ),
        }
    }

    // Gradient identities by central finite differences.
    {
        let c = yamabe3h::complex::generate(yamabe3h::complex::GeneratorKind::Pentachoron);
        let mut rng = ChaCha20Rng::seed_from_u64(0x5EF2);
        let h = 1e-5;
        let mut worst = 0.0_f64;
        let mut done = 0usize;
        let mut broken: Option<String> = None;
        while done < 5 && broken.is_none() {
            let mut radii: Vec<f64> = (0..5)
                .map(|_| (rng.gen_range((0.2_f64).ln()..(3.0_f64).ln())).exp())
                .collect();
            if done == 4 {
                radii[0] = rng.gen_range(0.02..0.08);
            }
            // Finite differences need clearance from the real/virtual kink.
            let guard = DomainGuard::positivity_only();
            let near_kink = c.tets().iter().any(|t| {
                let r = Radii4::with_guard(
                    [radii[t[0]], radii[t[1]], radii[t[2]], radii[t[3]]],
                    &guard,
                )
                .expect("sampled radii are positive");
                q_value(&r).abs() < 1e-3
            });
            if near_kink {
                continue;
            }
            let run = || -> Result<f64, Error> {
                let p = Packing::new(radii.clone())?;
                let k = curvature(&c, &p)?;
                let mut local = 0.0_f64;
                for i in 0..5 {
                    let mut up = radii.clone();
                    let mut dn = radii.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let su = total_energy_rel(&c, &Packing::new(up)?, false)?.s_rel;
                    let sd = total_energy_rel(&c, &Packing::new(dn)?, false)?.s_rel;
                    local = local.max(((su - sd) / (2.0 * h) - k.k[i]).abs());
                }
                Ok(local / k.inf_norm().max(1.0))
            };
            match run() {
                Ok(v) => worst = worst.max(v),
                Err(e) => broken = Some(e.to_string()),
            }
            done += 1;
        }
        match broken {
            Some(e) => failures.push(format!("gradient identities: {e}")),
            None => report_check(
                &mut failures,
                "gradient identities",
                worst < 1e-5,
                &format!("{done} packings, worst relative error {worst:.3e}"),
            ),
        }
    }

    // Per-tetra energy gradient at an asymmetric quadruple.
    {
        let vals = [0.7, 1.3, 0.9, 1.8];
        let r = Radii4::new(vals).expect("quadruple is valid");
        let run = || -> Result<f64, Error> {
            let alpha = extended_solid_angles(&r)?.angles;
            let h = 1e-5;
            let mut worst = 0.0_f64;
            for m in 0..4 {
                let mut up = vals;
                let mut dn = vals;
                up[m] += h;
                dn[m] -= h;
                let fd = (tetra_energy_rel(&Radii4::new(up)?)?
                    - tetra_energy_rel(&Radii4::new(dn)?)?)
                    / (2.0 * h);
                worst = worst.max((fd - alpha[m]).abs());
            }
            Ok(worst)
        };
        match run() {
            Ok(worst) => report_check(
                &mut failures,
                "per-tetra energy gradient",
                worst < 1e-5,
                &format!("worst deviation {worst:.3e}"),
            ),
            Err(e) => failures.push(format!("per-tetra energy gradient: {e}")),
        }
    }

    if failures.is_empty() {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        for f in &failures {
            eprintln!("error: {f}");
        }
        ExitCode::from(EXIT_NUMERIC)
    }
}

fn report_check(failures: &mut Vec<String>, name: &str, ok: bool, detail: &str) {
    if ok {
        println!("check {name}: ok ({detail})");
    } else {
        failures.push(format!("check {name} failed: {detail}"));
    }
}
