//! Command-line front end: model and field construction, batch geodesic and
//! X-ray runs, experiment dispatch, reproducible CSV/JSON emission.

use clap::{Parser, Subcommand};
use mlslab::error::{Error, Result};
use mlslab::experiments::{
    fmt17, gauge_normalize, linearization_check, mls_probe, parry_average, positivity_check,
    stability_probe, volume_identity, ExperimentConfig, Report,
};
use mlslab::models::{FuchsianModel, SurfaceModel, TorusModel};
use mlslab::solver::{spectrum_batch, SolveOptions};
use mlslab::tensors::{Field, FieldFile, HyperbolicField, TorusField};
use mlslab::xray::xray_batch;
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "mlslab",
    version,
    about = "Length-spectrum laboratory for perturbed flat and hyperbolic surfaces",
    after_help = "Models: 'torus' (unit square), 'torus:g11=..:g12=..:g22=..', 'bolza'.\n\
        Torus fields: 'zero[:K=k]', 'random:seed=S[:K=k][:alpha=a]', \
        'conformal:u=<scalar source>', 'potential:p=<lower-degree source>', \
        or a path to a coefficient JSON file.\n\
        Bolza fields: 'bump[:cx=..][:cy=..][:r=..][:amp=..]' or 'zero'.\n\
        Exit codes: 0 all assertions pass, 1 assertion failure, 2 usage or \
        config error, 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads; falls back to MLSLAB_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path prefix; writes <out>.csv, <out>.json for checks and
    /// probes, and <out>.manifest.json beside them.
    #[arg(long, global = true, default_value = "run")]
    out: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// List free-homotopy classes up to a bound with background lengths.
    /// CSV columns: class, background_length.
    Enumerate {
        #[arg(long, default_value = "torus")]
        model: String,
        /// Torus: max(|p|,|q|); Bolza: cyclic word length.
        #[arg(long)]
        bound: usize,
    },
    /// Solve perturbed closed geodesics over all classes up to a bound.
    /// CSV columns: class, background_length, length, ratio, iterations,
    /// grad_norm, refinement_levels.
    Spectrum {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
        #[arg(long)]
        bound: usize,
        /// Relative length tolerance between refinement levels.
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Evaluate the X-ray transform I_m of a field over all classes.
    /// CSV columns: class, background_length, value, quad_error_estimate.
    Xray {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
        /// Tensor degree m of the field.
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        bound: usize,
    },
    /// Run a verification experiment; writes a JSON report plus CSV data.
    Check {
        #[command(subcommand)]
        what: CheckCmd,
    },
    /// Run an ensemble probe; writes a JSON report plus CSV scatter data.
    Probe {
        #[command(subcommand)]
        what: ProbeCmd,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Remainder of the length linearization: R(t)/t^2 across halvings of t.
    /// CSV columns: t, sup_remainder, remainder_over_t2.
    Linearization {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 5)]
        bound: usize,
        /// Comma-separated decreasing scales.
        #[arg(long, default_value = "1e-2,5e-3,2.5e-3")]
        t_values: String,
    },
    /// Sign of L_{g0} * I_2 f on classes where the spectrum does not shrink.
    /// CSV columns: class, background_length, ratio, hypothesis,
    /// length_times_xray.
    Positivity {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 6)]
        bound: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Fiber average against trace average and the volume Taylor coefficient.
    /// CSV columns: quantity, value.
    Volume {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
    },
    /// Length-weighted orbit averages against the Liouville average at
    /// increasing length cutoffs. CSV columns: T, classes, average, target,
    /// error.
    Parry {
        #[arg(long, default_value = "bolza")]
        model: String,
        /// Observable; omit for the constant function 1.
        #[arg(long)]
        field: Option<String>,
        /// Comma-separated increasing length cutoffs.
        #[arg(long, default_value = "6,12")]
        t_values: String,
        #[arg(long, default_value_t = 12)]
        max_word_len: usize,
    },
    /// Gauge normalization: pull back by a diffeomorphism until the metric
    /// difference is divergence-free. CSV columns: iteration, residual.
    Gauge {
        #[arg(long, default_value = "torus")]
        model: String,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
    },
}

#[derive(Subcommand)]
enum ProbeCmd {
    /// Stability-estimate ensemble: fitted constant, homogeneity, rank
    /// correlation. CSV columns: seed, lhs, linf, holder, rhs.
    Stability {
        /// JSON file with ExperimentConfig keys (s, alpha, nu, bound,
        /// ensemble_size, seed, k_max); defaults used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Spectrum-rigidity ensemble: background exactness, isometry
    /// invariance, gauge-normalized fitted ratios. CSV columns: member, t,
    /// deviation, lhs, fitted.
    Mls {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_digest: String,
    seed: u64,
    version: String,
    wall_time_s: f64,
    outputs: Vec<String>,
}

fn kv_pairs(parts: &[&str]) -> Result<Vec<(String, String)>> {
    parts
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{p}'")))
        })
        .collect()
}

fn kv_get<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<Option<T>> {
    match kv.iter().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad value '{v}' for {key}"))),
    }
}

fn parse_model(spec: &str) -> Result<SurfaceModel> {
    let mut parts = spec.split(':');
    match parts.next().unwrap() {
        "torus" => {
            let kv = kv_pairs(&parts.collect::<Vec<_>>())?;
            let g11 = kv_get(&kv, "g11")?.unwrap_or(1.0);
            let g12 = kv_get(&kv, "g12")?.unwrap_or(0.0);
            let g22 = kv_get(&kv, "g22")?.unwrap_or(1.0);
            Ok(SurfaceModel::Torus(TorusModel::new(g11, g12, g22)?))
        }
        "bolza" => Ok(SurfaceModel::Bolza(FuchsianModel::bolza()?)),
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    }
}

/// Field constructors; `degree` is the tensor degree the caller needs.
fn parse_torus_field(spec: &str, degree: usize) -> Result<TorusField> {
    if let Some(rest) = spec.strip_prefix("conformal:u=") {
        if degree != 2 {
            return Err(Error::Config("conformal fields have degree 2".into()));
        }
        let u = parse_torus_field(rest, 0)?;
        // conformal factor against the square gram; the field itself is
        // metric-independent (u * identity in coordinates)
        return Ok(TorusField::conformal(&u, &TorusModel::square().gram));
    }
    if let Some(rest) = spec.strip_prefix("potential:p=") {
        if degree == 0 {
            return Err(Error::Config("potential fields have degree >= 1".into()));
        }
        let p = parse_torus_field(rest, degree - 1)?;
        return Ok(p.symmetric_derivative());
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "zero" => {
            let kv = kv_pairs(&parts[1..])?;
            let k: i64 = kv_get(&kv, "K")?.unwrap_or(8);
            Ok(TorusField::zero(degree, k))
        }
        "random" => {
            let kv = kv_pairs(&parts[1..])?;
            let seed: u64 = kv_get(&kv, "seed")?
                .ok_or_else(|| Error::Config("random field needs seed=".into()))?;
            let k: i64 = kv_get(&kv, "K")?.unwrap_or(8);
            let alpha: f64 = kv_get(&kv, "alpha")?.unwrap_or(0.0);
            let amp: f64 = kv_get(&kv, "amp")?.unwrap_or(0.05);
            let mut f = TorusField::random(seed, degree, k);
            if alpha > 0.0 {
                // smooth the spectrum: damp coefficient k by (1+|k|^2)^-alpha
                for comp in 0..=degree {
                    for (k1, k2) in f.frequencies().collect::<Vec<_>>() {
                        let w = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-alpha);
                        let c = f.coeff(comp, k1, k2);
                        f.set_coeff(comp, k1, k2, c * w);
                    }
                }
            }
            // normalize the sup norm so g0 + f stays a metric by default
            let sup = f.c0_surrogate(64);
            if sup > 0.0 {
                f.scale(amp / sup);
            }
            Ok(f)
        }
        _ => {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| Error::Config(format!("cannot read field file '{spec}': {e}")))?;
            let file: FieldFile = serde_json::from_str(&text)?;
            let f = TorusField::from_file(&file)?;
            if f.degree != degree {
                return Err(Error::Config(format!(
                    "field file has degree {}, expected {degree}",
                    f.degree
                )));
            }
            Ok(f)
        }
    }
}

fn parse_bolza_field(spec: &str, degree: usize, model: &FuchsianModel) -> Result<HyperbolicField> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "zero" => Ok(HyperbolicField {
            degree,
            terms: Vec::new(),
        }),
        "bump" => {
            let kv = kv_pairs(&parts[1..])?;
            let cx: f64 = kv_get(&kv, "cx")?.unwrap_or(0.0);
            let cy: f64 = kv_get(&kv, "cy")?.unwrap_or(0.0);
            let r: f64 = kv_get(&kv, "r")?.unwrap_or(0.8);
            let amp: f64 = kv_get(&kv, "amp")?.unwrap_or(0.5);
            let c = Complex64::new(cx, cy);
            Ok(match degree {
                0 => HyperbolicField::scalar_bump(model, c, r, amp),
                1 => HyperbolicField::one_form_bump(model, c, r, [amp, 0.0]),
                2 => HyperbolicField::conformal_bump(model, c, r, amp),
                d => return Err(Error::Config(format!("unsupported bump degree {d}"))),
            })
        }
        other => Err(Error::Config(format!("unknown bolza field '{other}'"))),
    }
}

fn parse_field(spec: &str, degree: usize, model: &SurfaceModel) -> Result<Field> {
    match model {
        SurfaceModel::Torus(_) => Ok(Field::Torus(parse_torus_field(spec, degree)?)),
        SurfaceModel::Bolza(m) => Ok(Field::Hyperbolic(parse_bolza_field(spec, degree, m)?)),
    }
}

fn parse_t_values(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad t value '{s}'")))
        })
        .collect()
}

fn field_seed(spec: &str) -> u64 {
    spec.split(':')
        .filter_map(|p| p.strip_prefix("seed="))
        .filter_map(|v| v.parse().ok())
        .next_back()
        .unwrap_or(0)
}

/// Everything that determines the numerical output, hashed into the digest
/// carried by the CSV header. Execution details (threads, paths) excluded.
fn digest(resolved: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(resolved).expect("config serialization");
    let mut h = Sha256::new();
    h.update(&bytes);
    format!("{:x}", h.finalize())
}

struct Emitter {
    out: String,
    started: std::time::Instant,
    outputs: Vec<String>,
}

impl Emitter {
    fn new(out: &str) -> Emitter {
        Emitter {
            out: out.to_string(),
            started: std::time::Instant::now(),
            outputs: Vec::new(),
        }
    }

    fn write(&mut self, ext: &str, content: &str) -> Result<()> {
        let path = format!("{}.{ext}", self.out);
        if let Some(dir) = Path::new(&path).parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(&path, content)?;
        self.outputs.push(path);
        Ok(())
    }

    fn csv(&mut self, dig: &str, body: &str) -> Result<()> {
        self.write("csv", &format!("# digest={dig}\n{body}"))
    }

    fn manifest(&mut self, dig: &str, seed: u64) -> Result<()> {
        let m = RunManifest {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            config_digest: dig.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
        };
        self.write("manifest.json", &serde_json::to_string_pretty(&m)?)
    }
}

/// Writes report JSON + CSV + manifest; returns the process exit code.
fn emit_report(em: &mut Emitter, report: &Report, seed: u64) -> Result<i32> {
    let dig = digest(&serde_json::json!({
        "experiment": report.experiment,
        "config": report.config,
    }));
    em.csv(&dig, &report.csv)?;
    em.write("json", &report.to_json())?;
    em.manifest(&dig, seed)?;
    for a in &report.assertions {
        println!(
            "{} {}: value {:.3e} tolerance {:.3e}",
            if a.pass { "pass" } else { "FAIL" },
            a.name,
            a.value,
            a.tolerance
        );
    }
    if report.passed() {
        Ok(0)
    } else {
        let failed: Vec<&str> = report
            .assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| a.name.as_str())
            .collect();
        eprintln!("mlslab: error kind=assertion: {}", failed.join(","));
        Ok(1)
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    let cfg = match path {
        None => ExperimentConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn require_torus(model: &SurfaceModel) -> Result<&TorusModel> {
    model
        .torus()
        .ok_or_else(|| Error::Config("this check needs --model torus".into()))
}

fn run(cli: Cli) -> Result<i32> {
    let mut em = Emitter::new(&cli.out);
    match cli.cmd {
        Cmd::Enumerate { model, bound } => {
            let m = parse_model(&model)?;
            let classes = m.enumerate_classes(bound)?;
            let mut body = String::from("class,background_length\n");
            for c in &classes {
                body.push_str(&format!("{},{}\n", c.id(), fmt17(m.background_length(c)?)));
            }
            let dig = digest(&serde_json::json!({
                "cmd": "enumerate", "model": model, "bound": bound,
            }));
            em.csv(&dig, &body)?;
            em.manifest(&dig, 0)?;
            println!("{} classes", classes.len());
            Ok(0)
        }
        Cmd::Spectrum {
            model,
            field,
            bound,
            rtol,
            max_iters,
        } => {
            let m = parse_model(&model)?;
            let f = parse_field(&field, 2, &m)?;
            let classes = m.enumerate_classes(bound)?;
            let mut opts = SolveOptions::default();
            if let Some(r) = rtol {
                opts.rtol = r;
            }
            if let Some(n) = max_iters {
                opts.max_iters = n;
            }
            let recs = spectrum_batch(&m, Some(&f), &classes, &opts);
            if let Some(r) = recs.iter().find(|r| r.error.is_some()) {
                return Err(Error::SolverFailure(format!(
                    "class {}: {}",
                    r.class_id,
                    r.error.as_ref().unwrap()
                )));
            }
            let mut body = String::from(
                "class,background_length,length,ratio,iterations,grad_norm,refinement_levels\n",
            );
            for r in &recs {
                body.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.class_id,
                    fmt17(r.background_length),
                    fmt17(r.length),
                    fmt17(r.ratio),
                    r.iterations,
                    fmt17(r.grad_norm),
                    r.refinement_levels
                ));
            }
            let dig = digest(&serde_json::json!({
                "cmd": "spectrum", "model": model, "field": field, "bound": bound,
                "rtol": opts.rtol, "max_iters": opts.max_iters,
            }));
            em.csv(&dig, &body)?;
            em.manifest(&dig, field_seed(&field))?;
            println!("{} classes solved", recs.len());
            Ok(0)
        }
        Cmd::Xray {
            model,
            field,
            degree,
            bound,
        } => {
            let m = parse_model(&model)?;
            let f = parse_field(&field, degree, &m)?;
            let classes = m.enumerate_classes(bound)?;
            let (recs, sup) = xray_batch(&m, &f, &classes)?;
            let mut body =
                String::from("class,background_length,value,quad_error_estimate\n");
            for r in &recs {
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    r.class_id,
                    fmt17(r.background_length),
                    fmt17(r.value),
                    fmt17(r.quad_error_estimate)
                ));
            }
            let dig = digest(&serde_json::json!({
                "cmd": "xray", "model": model, "field": field,
                "degree": degree, "bound": bound,
            }));
            em.csv(&dig, &body)?;
            em.manifest(&dig, field_seed(&field))?;
            println!("{} classes, sup |I_m f| = {sup:.3e}", recs.len());
            Ok(0)
        }
        Cmd::Check { what } => match what {
            CheckCmd::Linearization {
                model,
                field,
                bound,
                t_values,
            } => {
                let m = parse_model(&model)?;
                let f = parse_field(&field, 2, &m)?;
                let ts = parse_t_values(&t_values)?;
                let classes = m.enumerate_classes(bound)?;
                let r = linearization_check(&m, &f, &ts, &classes, &SolveOptions::default())?;
                emit_report(&mut em, &r, field_seed(&field))
            }
            CheckCmd::Positivity {
                model,
                field,
                bound,
                tol,
            } => {
                let m = parse_model(&model)?;
                let f = parse_field(&field, 2, &m)?;
                let classes = m.enumerate_classes(bound)?;
                let r = positivity_check(&m, &f, &classes, &SolveOptions::default(), tol)?;
                emit_report(&mut em, &r, field_seed(&field))
            }
            CheckCmd::Volume { model, field } => {
                let m = parse_model(&model)?;
                let t = require_torus(&m)?;
                let f = parse_torus_field(&field, 2)?;
                let r = volume_identity(t, &f)?;
                emit_report(&mut em, &r, field_seed(&field))
            }
            CheckCmd::Parry {
                model,
                field,
                t_values,
                max_word_len,
            } => {
                let m = parse_model(&model)?;
                let b = m
                    .bolza()
                    .ok_or_else(|| Error::Config("parry check needs --model bolza".into()))?;
                let f = field
                    .as_deref()
                    .map(|s| parse_field(s, 0, &m))
                    .transpose()?;
                let ts = parse_t_values(&t_values)?;
                let r = parry_average(b, f.as_ref(), &ts, max_word_len)?;
                emit_report(&mut em, &r, 0)
            }
            CheckCmd::Gauge {
                model,
                field,
                tol,
                max_iters,
            } => {
                let m = parse_model(&model)?;
                let t = require_torus(&m)?;
                let f = parse_torus_field(&field, 2)?;
                let (_, _, r) = gauge_normalize(t, &f, tol, max_iters)?;
                emit_report(&mut em, &r, field_seed(&field))
            }
        },
        Cmd::Probe { what } => match what {
            ProbeCmd::Stability { config } => {
                let cfg = load_config(&config)?;
                let seed = cfg.seed;
                let r = stability_probe(&TorusModel::square(), &cfg)?;
                emit_report(&mut em, &r, seed)
            }
            ProbeCmd::Mls { config } => {
                let cfg = load_config(&config)?;
                let seed = cfg.seed;
                let r = mls_probe(&TorusModel::square(), &cfg)?;
                emit_report(&mut em, &r, seed)
            }
        },
    }
}

fn exit_kind(e: &Error) -> (i32, &'static str) {
    match e {
        Error::SolverFailure(_)
        | Error::QuadratureFailure(_)
        | Error::ReductionFailure(_)
        | Error::GaugeFailure(_)
        | Error::MetricNotPositive(_, _) => (3, "numerical"),
        _ => (2, "config"),
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("MLSLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("mlslab: error kind=config: thread pool: {e}");
            std::process::exit(2);
        }
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let (code, kind) = exit_kind(&e);
            eprintln!("mlslab: error kind={kind}: {e}");
            std::process::exit(code);
        }
    }
}
