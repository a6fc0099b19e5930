//! Batch front-end: single runs, protocol optimization, sweeps and the oracle validation suite.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use emech_bell::bell::{self, BellEvaluator, BellResult};
use emech_bell::config::{parse_config, RunFile};
use emech_bell::protocol::{self, OptimizeOptions, SweepRow};
use emech_bell::pulse::{optimal_shapes, solve_m};
use emech_bell::{validate, Error};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const SWEEP_COLUMNS: &str = "C,lambda_t,n0,S,tau1_Gamma,tau2_Gamma,upsilon,converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Single,
    Optimize,
    Sweep,
    Validate,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Optimize => "optimize",
            Mode::Sweep => "sweep",
            Mode::Validate => "validate",
        }
    }
}

/// Gaussian simulation of a pulsed electromechanical CHSH test.
#[derive(Debug, Parser)]
#[command(name = "emech-bell", version)]
struct Cli {
    /// TOML run configuration (not needed for `validate`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output directory, created if missing.
    #[arg(long, env = "EMECH_BELL_OUT", default_value = "out")]
    out: PathBuf,
    /// Selects the random restart stream of the settings search.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

struct Meta {
    mode: Mode,
    config_sha256: Option<String>,
    seed: u64,
}

impl Meta {
    fn json(&self) -> Value {
        json!({
            "mode": self.mode.name(),
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "emech_bell_version": emech_bell::VERSION,
            "cli_version": env!("CARGO_PKG_VERSION"),
        })
    }

    fn csv_header(&self) -> String {
        format!(
            "# mode={} config_sha256={} seed={} emech_bell_version={} cli_version={}\n",
            self.mode.name(),
            self.config_sha256.as_deref().unwrap_or("none"),
            self.seed,
            emech_bell::VERSION,
            env!("CARGO_PKG_VERSION"),
        )
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NaN".into()
    }
}

fn row_csv(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        fmt(r.c),
        fmt(r.lambda_t),
        fmt(r.n0),
        fmt(r.s),
        fmt(r.tau1_gamma),
        fmt(r.tau2_gamma),
        fmt(r.upsilon),
        r.converged
    )
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_table(
    out: &Path,
    stem: &str,
    meta: &Meta,
    rows: &[SweepRow],
    extra: Value,
) -> anyhow::Result<()> {
    let mut csv = meta.csv_header();
    csv.push_str(SWEEP_COLUMNS);
    csv.push('\n');
    for r in rows {
        csv.push_str(&row_csv(r));
        csv.push('\n');
    }
    write_text(&out.join(format!("{stem}.csv")), &csv)?;
    let mut doc = json!({ "metadata": meta.json(), "rows": rows });
    if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
        d.extend(e);
    }
    write_text(
        &out.join(format!("{stem}.json")),
        &(serde_json::to_string_pretty(&doc)? + "\n"),
    )
}

fn result_row(file: &RunFile, r: &BellResult) -> SweepRow {
    let p = file.protocol.params;
    SweepRow {
        c: p.cooperativity(),
        lambda_t: p.lambda_t,
        n0: p.n0,
        s: r.s,
        tau1_gamma: r.tau1,
        tau2_gamma: r.tau2,
        upsilon: r.upsilon,
        converged: r.converged,
        error: None,
    }
}

fn write_schedule(out: &Path, file: &RunFile, tau2: f64) -> anyhow::Result<()> {
    let gamma = file.protocol.params.gamma_max();
    if gamma == 0.0 {
        return Ok(());
    }
    let t2 = tau2 / gamma;
    let schedule = optimal_shapes(t2, solve_m(gamma, t2)?)?;
    let f = File::create(out.join("pulse_schedule.csv"))?;
    schedule.write_csv(BufWriter::new(f), 401)?;
    Ok(())
}

fn run_single(out: &Path, meta: &Meta, file: &RunFile) -> anyhow::Result<()> {
    let cfg = &file.protocol;
    let run = protocol::run_protocol_full(cfg)?;
    let mut result = match &file.settings {
        Some(s) => {
            let ev = BellEvaluator::new(&run.ab)?;
            BellResult {
                s: ev.s(s),
                e: ev.grid(s),
                settings: *s,
                tau1: 0.0,
                tau2: 0.0,
                upsilon: 0.0,
                converged: true,
            }
        }
        None => bell::optimize_settings_from(&run.ab, bell::DEFAULT_RESTARTS, None, meta.seed)?,
    };
    result.tau1 = cfg.tau1;
    result.tau2 = cfg.tau2;
    result.upsilon = cfg.params.upsilon;
    let extra = json!({
        "result": result,
        "residual_correlation": run.residual_correlation,
        "transfer_bound": run.transfer_bound,
        "covariance_ab": run.ab.cov().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    write_table(out, "single", meta, &[result_row(file, &result)], extra)?;
    write_schedule(out, file, cfg.tau2)
}

fn run_optimize(out: &Path, meta: &Meta, file: &RunFile) -> anyhow::Result<()> {
    let opts = OptimizeOptions {
        seed: meta.seed,
        ..OptimizeOptions::default()
    };
    let result = protocol::optimize_protocol_with(&file.protocol, opts)?;
    write_table(
        out,
        "optimize",
        meta,
        &[result_row(file, &result)],
        json!({ "result": result }),
    )?;
    write_schedule(out, file, result.tau2)
}

fn run_sweep(out: &Path, meta: &Meta, file: &RunFile) -> anyhow::Result<()> {
    let partial_path = out.join("sweep.partial.csv");
    let mut partial = BufWriter::new(File::create(&partial_path)?);
    partial.write_all(meta.csv_header().as_bytes())?;
    writeln!(partial, "{SWEEP_COLUMNS}")?;
    partial.flush()?;
    let partial = Mutex::new(partial);
    let opts = OptimizeOptions {
        seed: meta.seed,
        ..OptimizeOptions::default()
    };
    let rows = protocol::sweep(&file.protocol, opts, |row| {
        if let Some(e) = &row.error {
            log::warn!(
                "cell C={} lambda_t={} n0={} failed: {e}",
                row.c,
                row.lambda_t,
                row.n0
            );
        }
        let mut w = partial.lock().unwrap_or_else(|e| e.into_inner());
        // a failed write only loses the progress copy; the final table is written below
        let _ = writeln!(w, "{}", row_csv(row)).and_then(|_| w.flush());
    })?;
    drop(partial);
    write_table(out, "sweep", meta, &rows, json!({}))?;
    fs::remove_file(&partial_path).ok();
    Ok(())
}

fn run_validate(out: &Path, meta: &Meta) -> anyhow::Result<()> {
    let checks = validate::run_all();
    let mut csv = meta.csv_header();
    csv.push_str("check,value,tolerance,passed\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{:e},{:e},{}\n",
            c.name, c.value, c.tolerance, c.passed
        ));
    }
    write_text(&out.join("validate.csv"), &csv)?;
    let doc = json!({ "metadata": meta.json(), "checks": checks });
    write_text(
        &out.join("validate.json"),
        &(serde_json::to_string_pretty(&doc)? + "\n"),
    )?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        bail!("validation failed: {}", failed.join("; "));
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let file = match &cli.config {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Some((hex::encode(Sha256::digest(&bytes)), parse_config(path)?))
        }
        None if cli.mode == Mode::Validate => None,
        None => bail!("--config is required for mode {}", cli.mode.name()),
    };
    let meta = Meta {
        mode: cli.mode,
        config_sha256: file.as_ref().map(|f| f.0.clone()),
        seed: cli.seed,
    };
    match (cli.mode, file.as_ref().map(|f| &f.1)) {
        (Mode::Validate, _) => run_validate(&cli.out, &meta),
        (Mode::Single, Some(f)) => run_single(&cli.out, &meta, f),
        (Mode::Optimize, Some(f)) => run_optimize(&cli.out, &meta, f),
        (Mode::Sweep, Some(f)) => run_sweep(&cli.out, &meta, f),
        _ => unreachable!("config presence checked above"),
    }
}

fn error_record(err: &anyhow::Error) -> Value {
    let (kind, path) = match err.downcast_ref::<Error>() {
        Some(Error::Config { path, .. }) => ("config", Some(path.clone())),
        Some(Error::InvalidArgument(_)) => ("invalid_argument", None),
        Some(Error::Divergence { .. }) => ("divergence", None),
        Some(Error::Io(_)) => ("io", None),
        Some(_) => ("numerical", None),
        None => ("runtime", None),
    };
    json!({ "error": { "kind": kind, "path": path, "message": format!("{err:#}") } })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = error_record(&err);
            eprintln!("{record}");
            let _ = fs::write(cli.out.join("error.json"), format!("{record}\n"));
            ExitCode::FAILURE
        }
    }
}
