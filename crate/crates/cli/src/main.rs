//! `shiftcompact`: run measure-space, rate-function, Pekar and path-sampling
//! experiments from flags or JSON configs.
//!
//! Exit codes: 0 success, 1 a `reproduce` check failed, 2 invalid input
//! (nothing is written), 3 numerical-failure flags (outputs are written).

use shiftcompact_cli::{config, exec, reproduce};

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "shiftcompact", version, about = "Shift-compactified measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Seed for every random stream (required by stochastic commands).
    #[arg(long)]
    seed: Option<u64>,
    /// Result JSON path; CSV tables and run metadata are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct ChainArgs {
    /// Smoothing length of the Coulomb potential.
    #[arg(long)]
    eps: Option<f64>,
    /// Tilt strength.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two collections (JSON files).
    Metric {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        r_max: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Peel a measure (JSON file) into concentrated components and dust.
    Peel {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        probe_radius: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Rate function of a measure (JSON file), optionally with the dual sweep.
    Rate {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        dual: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Radial Pekar maximizer; writes the profile as CSV.
    Pekar {
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        r_max: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of the Feynman-Kac bound for one Gaussian bump.
    FkCheck {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Floor `c` of the test potential.
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of the Khasminskii bound for `λ|x|^{-3/2}`.
    Khasminskii {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample the Coulomb-tilted path measure.
    Tilt {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        chains: Option<usize>,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Distance of peeled tilted occupation measures to the Pekar maximizer.
    Tube {
        /// Comma-separated increasing horizons.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        grid_h: Option<f64>,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        common: Common,
    },
    /// `(1/t) log Z_t` by direct sampling of Brownian paths.
    FreeEnergy {
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment config (JSON).
    Run {
        config: PathBuf,
        /// Overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every entry of a manifest and print a pass/fail table.
    Reproduce {
        manifest: PathBuf,
        /// Directory receiving one result JSON per entry.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Object of the flags that were actually given.
fn params(pairs: Vec<(&str, Option<Value>)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    }
    Value::Object(m)
}

fn opt<T: Into<Value>>(v: Option<T>) -> Option<Value> {
    v.map(Into::into)
}

fn chain_params(c: &ChainArgs) -> Option<Value> {
    let v = params(vec![
        ("eps", opt(c.eps)),
        ("beta", opt(c.beta)),
        ("n_sweeps", opt(c.sweeps)),
        ("burn_in", opt(c.burn_in)),
        ("thin", opt(c.thin)),
    ]);
    (!v.as_object().unwrap().is_empty()).then_some(v)
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn config_from_flags(cmd: Command) -> (ExperimentConfig, Common) {
    let (name, p, common) = match cmd {
        Command::Metric { a, b, r_max, common } => (
            "metric",
            params(vec![
                ("a", Some(path_value(&a))),
                ("b", Some(path_value(&b))),
                ("r_max", opt(r_max)),
            ]),
            common,
        ),
        Command::Peel {
            measure,
            probe_radius,
            common,
        } => (
            "peel",
            params(vec![
                ("measure", Some(path_value(&measure))),
                ("peel", probe_radius.map(|r| json!({ "probe_radius": r }))),
            ]),
            common,
        ),
        Command::Rate { measure, dual, common } => (
            "rate",
            params(vec![
                ("measure", Some(path_value(&measure))),
                ("dual", Some(dual.into())),
            ]),
            common,
        ),
        Command::Pekar {
            mass,
            points,
            r_max,
            common,
        } => {
            let solver = params(vec![("points", opt(points)), ("r_max", opt(r_max))]);
            let solver = (!solver.as_object().unwrap().is_empty()).then_some(solver);
            ("pekar", params(vec![("mass", opt(mass)), ("solver", solver)]), common)
        }
        Command::FkCheck {
            t,
            dt,
            paths,
            c,
            amplitude,
            width,
            common,
        } => (
            "fk-check",
            params(vec![
                (
                    "potential",
                    Some(json!({
                        "c": c,
                        "bumps": [{"amplitude": amplitude, "width": width, "shift": [0.0, 0.0, 0.0]}],
                        "cutoff_radius": null
                    })),
                ),
                ("t", opt(t)),
                ("dt", opt(dt)),
                ("n_paths", opt(paths)),
            ]),
            common,
        ),
        Command::Khasminskii {
            lambda,
            t,
            dt,
            paths,
            common,
        } => (
            "khasminskii",
            params(vec![
                ("lambda", opt(lambda)),
                ("t", opt(t)),
                ("dt", opt(dt)),
                ("n_paths", opt(paths)),
            ]),
            common,
        ),
        Command::Tilt {
            t,
            dt,
            chains,
            chain,
            common,
        } => (
            "tilt",
            params(vec![
                ("t", Some(t.into())),
                ("dt", opt(dt)),
                ("chains", opt(chains)),
                ("chain", chain_params(&chain)),
            ]),
            common,
        ),
        Command::Tube {
            t,
            dt,
            chains,
            grid_h,
            chain,
            common,
        } => (
            "tube",
            params(vec![
                ("t_list", opt(t)),
                ("dt", opt(dt)),
                ("chains", opt(chains)),
                ("grid_h", opt(grid_h)),
                ("chain", chain_params(&chain)),
            ]),
            common,
        ),
        Command::FreeEnergy {
            t,
            dt,
            paths,
            eps,
            beta,
            common,
        } => (
            "free-energy",
            params(vec![
                ("t_list", opt(t)),
                ("dt", opt(dt)),
                ("n_paths", opt(paths)),
                ("eps", opt(eps)),
                ("beta", opt(beta)),
            ]),
            common,
        ),
        Command::Run { .. } | Command::Reproduce { .. } => unreachable!("handled in main"),
    };
    (
        ExperimentConfig {
            command: name.into(),
            params: p,
            seed: common.seed,
            out: common.out.clone(),
        },
        common,
    )
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn write_outputs(out: &exec::Outcome, path: Option<&Path>, started: u64, elapsed: f64) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(&out.body).expect("JSON values serialize") + "\n";
    let Some(path) = path else {
        print!("{body}");
        return Ok(());
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    if let Some(csv) = &out.csv {
        std::fs::write(sibling(path, ".csv"), csv)?;
    }
    let meta = json!({
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "version": env!("CARGO_PKG_VERSION"),
        "result": path.file_name().map(|s| s.to_string_lossy().into_owned()),
    });
    std::fs::write(sibling(path, ".meta.json"), serde_json::to_string_pretty(&meta)? + "\n")
}

fn fail(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn run_config(cfg: ExperimentConfig, base: &Path) -> ExitCode {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let out = match exec::execute(&cfg, base) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_outputs(&out, cfg.out.as_deref(), started, clock.elapsed().as_secs_f64()) {
        eprintln!("error: writing outputs: {e}");
        return ExitCode::from(2);
    }
    if out.flags.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("numerical flags: {}", out.flags.join(", "));
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(&ConfigError(format!("{}: {e}", config.display()))),
            };
            let mut cfg = match ExperimentConfig::from_str(&text) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if out.is_some() {
                cfg.out = out;
            }
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            run_config(cfg, &base)
        }
        Command::Reproduce { manifest, out_dir } => {
            let m = match reproduce::load(&manifest) {
                Ok(m) => m,
                Err(e) => return fail(&e),
            };
            if let Some(d) = &out_dir {
                if let Err(e) = std::fs::create_dir_all(d) {
                    return fail(&ConfigError(format!("{}: {e}", d.display())));
                }
            }
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let rows = reproduce::run(&m, &base, out_dir.as_ref());
            print!("{}", reproduce::table(&rows));
            let failed = rows.iter().filter(|r| !r.pass).count();
            println!("{} checks, {} failed", rows.len(), failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        cmd => {
            let (cfg, _) = config_from_flags(cmd);
            if let Err(e) = cfg.check_shape() {
                return fail(&e);
            }
            run_config(cfg, Path::new(""))
        }
    }
}
