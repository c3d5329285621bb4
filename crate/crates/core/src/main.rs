//! Command line front end: single projections, Skorokhod solves on CSV
//! paths, seeded simulations, rate experiments, and the built-in scenario
//! registry.
//!
//! Options may also come from a plain `key=value` file passed with
//! `--config`; flags override the file, the file overrides the
//! `ORTHANT_REFLECT_SEED` environment variable, and the default seed is 42.
//! Exit codes: 0 on success, 1 when an asserted bound fails, 2 on usage or
//! configuration errors.

use std::collections::HashMap;
use std::error::Error;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use orthant_reflect::harness::{
    self, parse_config_file, write_table_csv, HarnessError, ScenarioConfig,
};
use orthant_reflect::matrix::ReflectionMatrix;
use orthant_reflect::paths::GridPath;
use orthant_reflect::projection;
use orthant_reflect::sde::{fast_euler_diffusion, generate_wiener, strong_error, WienerConfig};
use orthant_reflect::skorokhod::{fast_scheme, fixed_point_oracle, ORACLE_TOL};

#[derive(Parser)]
#[command(
    name = "orthant-reflect",
    version,
    about = "Skorokhod problems on the nonnegative orthant with oblique reflection"
)]
struct Cli {
    /// Plain key=value defaults file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    /// One positive-part correction per step.
    Fast,
    /// Picard iteration of the grid fixed point (reference oracle).
    FixedPoint,
}

#[derive(Subcommand)]
enum Command {
    /// Project a single point along the (I - Q^T) directions.
    Project {
        /// Reflection matrix file (dimension line, then rows).
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
        /// Comma-separated point coordinates.
        #[arg(long, value_name = "V1,V2,..")]
        point: Option<String>,
        /// Fixed-point stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve the Skorokhod problem for a grid path CSV.
    Skorokhod {
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
        /// Input path CSV (header t,x1..xd).
        #[arg(long, value_name = "FILE")]
        path: Option<PathBuf>,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
        /// Check the solution against its fixed-point characterisation and
        /// exit nonzero if it fails.
        #[arg(long)]
        verify: bool,
        /// Output CSV file (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Simulate one reflected path of a named model.
    Simulate {
        /// Model name: bm-1d or diffusion-2d.
        #[arg(long)]
        model: Option<String>,
        /// Scheme density.
        #[arg(long)]
        n: Option<u32>,
        /// Fine driver density (defaults to the scheme density).
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Estimate the strong convergence rate of a named model.
    Rate {
        #[arg(long)]
        model: Option<String>,
        /// Comma-separated density ladder; every entry must divide n_max.
        #[arg(long, value_name = "N1,N2,..")]
        densities: Option<String>,
        #[arg(long)]
        n_max: Option<u32>,
        /// Monte Carlo path count.
        #[arg(long)]
        paths: Option<usize>,
        /// Moment exponent p (errors are measured to the power 2p).
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run a named built-in scenario and report its checks.
    Scenario {
        /// One of: paper-example, step-random, continuous-sine, bm-1d-rate,
        /// diffusion-2d-rate.
        #[arg(long)]
        name: Option<String>,
        /// Directory for artifact CSVs.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's Monte Carlo sizes.
        #[arg(long)]
        paths: Option<usize>,
    },
}

const CONFIG_KEYS: [&str; 15] = [
    "seed",
    "paths",
    "out",
    "name",
    "model",
    "n",
    "n_max",
    "horizon",
    "densities",
    "p",
    "tol",
    "matrix",
    "path",
    "point",
    "solver",
];

/// Values loaded from `--config`, consulted when a flag is absent.
struct Defaults {
    file: String,
    map: HashMap<String, String>,
}

impl Defaults {
    fn load(path: Option<&PathBuf>) -> Result<Self, Box<dyn Error>> {
        let Some(path) = path else {
            return Ok(Defaults {
                file: String::new(),
                map: HashMap::new(),
            });
        };
        let pairs = parse_config_file(path)?;
        let file = path.display().to_string();
        let mut map = HashMap::new();
        for (key, value) in pairs {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Box::new(HarnessError::ConfigParse {
                    file,
                    line: 0,
                    message: format!("unknown key '{key}'"),
                }));
            }
            map.insert(key, value);
        }
        Ok(Defaults { file, map })
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>, Box<dyn Error>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("{}: key '{key}': {e}", self.file).into()),
        }
    }

    fn get_string(&self, key: &str) -> Option<String> {
        self.map.get(key).cloned()
    }
}

fn resolve_seed(flag: Option<u64>, defaults: &Defaults) -> Result<u64, Box<dyn Error>> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = defaults.get::<u64>("seed")? {
        return Ok(seed);
    }
    if let Ok(raw) = std::env::var("ORTHANT_REFLECT_SEED") {
        return raw
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("ORTHANT_REFLECT_SEED: {e}").into());
    }
    Ok(42)
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, Box<dyn Error>> {
    value.ok_or_else(|| format!("missing required --{what} (flag or config key '{what}')").into())
}

fn load_matrix(path: &PathBuf) -> Result<ReflectionMatrix, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    ReflectionMatrix::parse_text(&text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_path(path: &PathBuf) -> Result<GridPath, Box<dyn Error>> {
    let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    GridPath::read_csv(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, Box<dyn Error>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad coordinate '{}': {e}", s.trim()).into())
        })
        .collect()
}

fn parse_u32_list(raw: &str) -> Result<Vec<u32>, Box<dyn Error>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|e| format!("bad density '{}': {e}", s.trim()).into())
        })
        .collect()
}

fn with_output<F>(out: Option<&PathBuf>, write: F) -> Result<(), Box<dyn Error>>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn Error>> {
    let defaults = Defaults::load(cli.config.as_ref())?;
    match cli.command {
        Command::Project { matrix, point, tol } => {
            let matrix = require(matrix.or_else(|| defaults.get_string("matrix").map(Into::into)), "matrix")?;
            let point = require(point.or_else(|| defaults.get_string("point")), "point")?;
            let tol = match tol {
                Some(t) => t,
                None => defaults.get::<f64>("tol")?.unwrap_or(projection::DEFAULT_TOL),
            };
            let q = load_matrix(&matrix)?;
            let z = parse_f64_list(&point)?;
            let max_iter = projection::default_max_iter(&q, &z, tol);
            let result = projection::project_fixed_point(&q, &z, tol, max_iter)?;
            let rows: Vec<Vec<f64>> = (0..z.len())
                .map(|j| vec![(j + 1) as f64, result.z[j], result.pi[j], result.r_bar[j]])
                .collect();
            with_output(None, |w| {
                write_table_csv(&["component", "z", "pi", "r_bar"], &rows, &mut *w)?;
                writeln!(
                    w,
                    "iterations,{},residual,{:.16e}",
                    result.iterations, result.residual
                )
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Skorokhod {
            matrix,
            path,
            solver,
            verify,
            out,
        } => {
            let matrix = require(matrix.or_else(|| defaults.get_string("matrix").map(Into::into)), "matrix")?;
            let path = require(path.or_else(|| defaults.get_string("path").map(Into::into)), "path")?;
            let solver = match solver {
                Some(s) => s,
                None => match defaults.get_string("solver").as_deref() {
                    None => Solver::Fast,
                    Some("fast") => Solver::Fast,
                    Some("fixed-point") => Solver::FixedPoint,
                    Some(other) => {
                        return Err(format!("unknown solver '{other}' in config").into())
                    }
                },
            };
            let q = load_matrix(&matrix)?;
            let y = load_path(&path)?;
            let solution = match solver {
                Solver::Fast => fast_scheme(&q, &y)?,
                Solver::FixedPoint => fixed_point_oracle(&q, &y, ORACLE_TOL)?,
            };
            let out = out.or_else(|| defaults.get_string("out").map(Into::into));
            with_output(out.as_ref(), |w| solution.write_csv(&mut *w))?;
            if verify {
                let diag = solution.diagnostics(&q, &y)?;
                let clean = diag.clean(1e-10);
                eprintln!("fixed-point gap: {:.2e}", diag.fixed_point_gap);
                eprintln!("reconstruction gap: {:.2e}", diag.reconstruction_gap);
                eprintln!("k monotone from zero: {}", diag.k_monotone);
                eprintln!("pushing bound: {}", diag.pushing_bounded);
                eprintln!("verdict: {}", if clean { "ok" } else { "FAIL" });
                if !clean {
                    return Ok(ExitCode::from(1));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            model,
            n,
            n_max,
            horizon,
            seed,
            out,
        } => {
            let model_name = require(model.or_else(|| defaults.get_string("model")), "model")?;
            let n = require(n.or(defaults.get::<u32>("n")?), "n")?;
            let n_max = n_max.or(defaults.get::<u32>("n_max")?).unwrap_or(n);
            let horizon = horizon.or(defaults.get::<f64>("horizon")?).unwrap_or(1.0);
            let seed = resolve_seed(seed, &defaults)?;
            let (q, model) = harness::build_model(&model_name)
                .ok_or_else(|| format!("unknown model '{model_name}'"))?;
            let cfg = WienerConfig {
                seed,
                n_max,
                d: model.d,
                horizon,
            };
            let w = generate_wiener(&cfg)?;
            let run = fast_euler_diffusion(&q, &model, &w, n)?;
            let out = out.or_else(|| defaults.get_string("out").map(Into::into));
            with_output(out.as_ref(), |w| run.solution.write_csv(&mut *w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rate {
            model,
            densities,
            n_max,
            paths,
            p,
            seed,
            out,
        } => {
            let model_name = require(model.or_else(|| defaults.get_string("model")), "model")?;
            let densities_raw = require(
                densities.or_else(|| defaults.get_string("densities")),
                "densities",
            )?;
            let densities = parse_u32_list(&densities_raw)?;
            let n_max = n_max.or(defaults.get::<u32>("n_max")?).unwrap_or(8192);
            let paths = paths.or(defaults.get::<usize>("paths")?).unwrap_or(200);
            let p = p.or(defaults.get::<u32>("p")?).unwrap_or(1);
            let seed = resolve_seed(seed, &defaults)?;
            let (q, model) = harness::build_model(&model_name)
                .ok_or_else(|| format!("unknown model '{model_name}'"))?;
            let cfg = WienerConfig {
                seed,
                n_max,
                d: model.d,
                horizon: 1.0,
            };
            let report = strong_error(&q, &model, &cfg, &densities, p, paths)?;
            let out = out.or_else(|| defaults.get_string("out").map(Into::into));
            with_output(out.as_ref(), |w| report.write_csv(&mut *w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario {
            name,
            out,
            seed,
            paths,
        } => {
            let name = require(name.or_else(|| defaults.get_string("name")), "name")?;
            let seed = resolve_seed(seed, &defaults)?;
            let paths = match paths {
                Some(p) => Some(p),
                None => defaults.get::<usize>("paths")?,
            };
            let out = out.or_else(|| defaults.get_string("out").map(Into::into));
            let cfg = ScenarioConfig { seed, paths };
            let outcome = harness::run_scenario(&name, out.as_deref(), &cfg)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            for artifact in &outcome.artifacts {
                println!("wrote {}", artifact.display());
            }
            println!(
                "scenario {}: {}",
                outcome.name,
                if outcome.passed { "PASS" } else { "FAIL" }
            );
            Ok(if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
