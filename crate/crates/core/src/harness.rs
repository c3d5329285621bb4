//! Scenario registry, rate reports, and the CSV layer shared by the CLI
//! and the test suite.
//!
//! Every artifact is plain CSV with '.' decimal separators and floats
//! printed at full round-trip precision, so re-running a scenario with the
//! same seed reproduces the bytes exactly. Each emitted format has a
//! matching reader in this module.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::matrix::{symmetric_half_2d, ReflectionMatrix};
use crate::paths::{GridPath, PathError, StepFunction};
use crate::sde::{
    self, coarsen_path, fast_euler_diffusion, generate_wiener, DiffusionModel, MomentRow,
    SdeError, WienerConfig,
};
use crate::skorokhod::{
    check_theorem3, check_theorem4, fast_scheme, fixed_point_gap, fixed_point_oracle,
    running_max_map_1d, step_function_exact, SchemeError, SkorokhodSolution, ORACLE_TOL,
};
use crate::vector;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("{file}:{line}: {message}")]
    ConfigParse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("log-log fit needs at least two distinct positive points")]
    DegenerateInput,
    #[error("csv line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Ordinary least squares on the logs of positive `(x, y)` pairs.
#[derive(Debug, Clone, Copy)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `log y = slope * log x + intercept`. Requires at least two
/// distinct `x` and strictly positive coordinates.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit, HarnessError> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(HarnessError::DegenerateInput);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let distinct = {
        let mut xs: Vec<f64> = logs.iter().map(|&(x, _)| x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if distinct < 2 {
        return Err(HarnessError::DegenerateInput);
    }
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|&(x, _)| x).sum::<f64>() / count;
    let mean_y = logs.iter().map(|&(_, y)| y).sum::<f64>() / count;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in &logs {
        let fitted = slope * x + intercept;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// One density row of a strong-error experiment.
#[derive(Debug, Clone, Copy)]
pub struct RateRow {
    pub n: u32,
    pub h: f64,
    pub mean_err_2p: f64,
    pub stderr: f64,
}

impl RateRow {
    pub fn new(n: u32, mean_err_2p: f64, stderr: f64) -> Self {
        RateRow {
            n,
            h: 1.0 / n as f64,
            mean_err_2p,
            stderr,
        }
    }

    /// Regression abscissa `ln((ln n)/n)`; undefined for `n <= 1`.
    pub fn log_x(&self) -> Option<f64> {
        let x = (self.n as f64).ln() / self.n as f64;
        if x > 0.0 {
            Some(x.ln())
        } else {
            None
        }
    }

    /// Regression ordinate `ln(mean)`; undefined for zero error.
    pub fn log_y(&self) -> Option<f64> {
        if self.mean_err_2p > 0.0 {
            Some(self.mean_err_2p.ln())
        } else {
            None
        }
    }
}

/// Strong-error experiment result: per-density rows (ascending `n`) and
/// the least-squares slope of `log(mean)` against `log((ln n)/n)`. The fit
/// is absent when fewer than two usable rows remain after dropping
/// zero-error densities.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub p: u32,
    pub rows: Vec<RateRow>,
    pub fit: Option<LogLogFit>,
}

impl RateReport {
    pub fn new(p: u32, mut rows: Vec<RateRow>) -> Self {
        rows.sort_by_key(|r| r.n);
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mean_err_2p > 0.0 && r.n > 1)
            .map(|r| ((r.n as f64).ln() / r.n as f64, r.mean_err_2p))
            .collect();
        let fit = fit_loglog(&points).ok();
        RateReport { p, rows, fit }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# p,{}", self.p)?;
        writeln!(w, "n,h,mean_err_2p,stderr,log_x,log_y")?;
        for row in &self.rows {
            write!(w, "{},{:.16e},{:.16e},{:.16e}", row.n, row.h, row.mean_err_2p, row.stderr)?;
            match row.log_x() {
                Some(v) => write!(w, ",{v:.16e}")?,
                None => write!(w, ",nan")?,
            }
            match row.log_y() {
                Some(v) => write!(w, ",{v:.16e}")?,
                None => write!(w, ",nan")?,
            }
            writeln!(w)?;
        }
        match &self.fit {
            Some(fit) => writeln!(
                w,
                "slope,{:.16e},intercept,{:.16e},r_squared,{:.16e}",
                fit.slope, fit.intercept, fit.r_squared
            ),
            None => writeln!(w, "slope,nan,intercept,nan,r_squared,nan"),
        }
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, HarnessError> {
        let mut p = None;
        let mut rows = Vec::new();
        let mut fit = None;
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("# p,") {
                p = Some(rest.parse::<u32>().map_err(|e| HarnessError::Malformed {
                    line: idx + 1,
                    message: format!("bad exponent: {e}"),
                })?);
                continue;
            }
            if trimmed == "n,h,mean_err_2p,stderr,log_x,log_y" {
                saw_header = true;
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("slope,") {
                let fields: Vec<&str> = rest.split(',').collect();
                if fields.len() != 5 || fields[1] != "intercept" || fields[3] != "r_squared" {
                    return Err(HarnessError::Malformed {
                        line: idx + 1,
                        message: "bad slope line".into(),
                    });
                }
                let slope: f64 = fields[0].parse().map_err(|_| HarnessError::Malformed {
                    line: idx + 1,
                    message: "bad slope value".into(),
                })?;
                let intercept: f64 = fields[2].parse().map_err(|_| HarnessError::Malformed {
                    line: idx + 1,
                    message: "bad intercept value".into(),
                })?;
                let r_squared: f64 = fields[4].parse().map_err(|_| HarnessError::Malformed {
                    line: idx + 1,
                    message: "bad r_squared value".into(),
                })?;
                if slope.is_finite() {
                    fit = Some(LogLogFit {
                        slope,
                        intercept,
                        r_squared,
                    });
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 6 {
                return Err(HarnessError::Malformed {
                    line: idx + 1,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let n: u32 = fields[0].parse().map_err(|_| HarnessError::Malformed {
                line: idx + 1,
                message: "bad density".into(),
            })?;
            let mean: f64 = fields[2].parse().map_err(|_| HarnessError::Malformed {
                line: idx + 1,
                message: "bad mean".into(),
            })?;
            let stderr: f64 = fields[3].parse().map_err(|_| HarnessError::Malformed {
                line: idx + 1,
                message: "bad stderr".into(),
            })?;
            rows.push(RateRow::new(n, mean, stderr));
        }
        if !saw_header {
            return Err(HarnessError::Malformed {
                line: 1,
                message: "missing rate header".into(),
            });
        }
        let p = p.ok_or(HarnessError::Malformed {
            line: 1,
            message: "missing exponent line".into(),
        })?;
        let mut report = RateReport::new(p, rows);
        report.fit = fit;
        Ok(report)
    }
}

/// Writes moment-surrogate rows as `n,mean_sup_sq,stderr`.
pub fn write_moments_csv<W: Write>(rows: &[MomentRow], mut w: W) -> io::Result<()> {
    writeln!(w, "n,mean_sup_sq,stderr")?;
    for row in rows {
        writeln!(w, "{},{:.16e},{:.16e}", row.n, row.mean, row.stderr)?;
    }
    Ok(())
}

pub fn read_moments_csv<R: BufRead>(r: R) -> Result<Vec<MomentRow>, HarnessError> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "n,mean_sup_sq,stderr" {
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(HarnessError::Malformed {
                line: idx + 1,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, HarnessError> {
            s.parse().map_err(|_| HarnessError::Malformed {
                line: idx + 1,
                message: format!("bad {what}"),
            })
        };
        rows.push(MomentRow {
            n: fields[0].parse().map_err(|_| HarnessError::Malformed {
                line: idx + 1,
                message: "bad density".into(),
            })?,
            mean: parse(fields[1], "mean")?,
            stderr: parse(fields[2], "stderr")?,
        });
    }
    if !saw_header {
        return Err(HarnessError::Malformed {
            line: 1,
            message: "missing moments header".into(),
        });
    }
    Ok(rows)
}

/// Writes a plain numeric table with a named header.
pub fn write_table_csv<W: Write>(
    header: &[&str],
    rows: &[Vec<f64>],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{v:.16e}")?;
            first = false;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a table written by [`write_table_csv`]: header names plus rows of
/// floats.
pub fn read_table_csv<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(HarnessError::Malformed {
                line: 1,
                message: "empty table".into(),
            })
        }
    };
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(names.len());
        for field in line.split(',') {
            row.push(field.parse().map_err(|_| HarnessError::Malformed {
                line: idx + 2,
                message: format!("bad float '{field}'"),
            })?);
        }
        if row.len() != names.len() {
            return Err(HarnessError::Malformed {
                line: idx + 2,
                message: format!("expected {} fields, got {}", names.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok((names, rows))
}

/// Parses a plain `key=value` configuration file. Blank lines and lines
/// starting with `#` are skipped; keys are returned in file order.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let file = path.display().to_string();
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match trimmed.split_once('=') {
            Some((key, value)) => {
                let key = key.trim();
                if key.is_empty() {
                    return Err(HarnessError::ConfigParse {
                        file,
                        line: idx + 1,
                        message: "empty key".into(),
                    });
                }
                pairs.push((key.to_string(), value.trim().to_string()));
            }
            None => {
                return Err(HarnessError::ConfigParse {
                    file,
                    line: idx + 1,
                    message: format!("expected key=value, got '{trimmed}'"),
                })
            }
        }
    }
    Ok(pairs)
}

/// Names accepted by [`build_model`].
pub fn model_names() -> &'static [&'static str] {
    &["bm-1d", "diffusion-2d"]
}

/// The built-in reflected models: plain Brownian motion on the half line,
/// and a two-dimensional mean-reverting diffusion under the worked
/// example's reflection matrix.
pub fn build_model(name: &str) -> Option<(ReflectionMatrix, DiffusionModel)> {
    match name {
        "bm-1d" => Some((
            ReflectionMatrix::zero(1),
            DiffusionModel {
                d: 1,
                x0: vec![0.0],
                drift: Box::new(|_, out| out[0] = 0.0),
                sigma: Box::new(|_, out| out[0] = 1.0),
                lipschitz_hint: 0.0,
            },
        )),
        "diffusion-2d" => Some((
            symmetric_half_2d(),
            // Mean reversion toward 0.5 with noise that dwarfs the gap to the
            // boundary, so the pushing term stays active along typical paths.
            DiffusionModel {
                d: 2,
                x0: vec![0.3, 0.3],
                drift: Box::new(|x, out| {
                    out[0] = 0.5 - x[0];
                    out[1] = 0.5 - x[1];
                }),
                sigma: Box::new(|x, out| {
                    out.fill(0.0);
                    out[0] = 0.7 + 0.2 * x[0];
                    out[3] = 0.7 + 0.2 * x[1];
                }),
                lipschitz_hint: 1.0,
            },
        )),
        _ => None,
    }
}

/// Names accepted by [`run_scenario`].
pub fn scenario_names() -> &'static [&'static str] {
    &[
        "paper-example",
        "step-random",
        "continuous-sine",
        "bm-1d-rate",
        "diffusion-2d-rate",
    ]
}

/// The worked example's driving path: flat at the origin, one `(-1,-1)`
/// jump at `t = 1`, horizon 2.
pub fn paper_example_input(n: u32) -> Result<GridPath, PathError> {
    StepFunction::new(vec![0.0, 1.0], 2, vec![0.0, 0.0, -1.0, -1.0])?.discretize(n, 2.0)
}

/// Deviation of a scheme run from the worked example's closed form:
/// returns the worst pointwise deviation from
/// `k = 2 - 2^{-i}, x = -2^{-(i+1)}` and the deviation of the sup error
/// from exactly one half.
pub fn paper_example_deviation(sol: &SkorokhodSolution, n: u32) -> (f64, f64) {
    let mut dev = 0.0_f64;
    let mut sup = 0.0_f64;
    for m in 0..=sol.x.steps() {
        let (ek, ex) = if m < n as usize {
            (0.0, 0.0)
        } else {
            let i = (m - n as usize) as i32;
            (2.0 - 0.5f64.powi(i), -(0.5f64.powi(i + 1)))
        };
        for j in 0..sol.x.dim() {
            dev = dev.max((sol.k.at(m)[j] - ek).abs());
            dev = dev.max((sol.x.at(m)[j] - ex).abs());
        }
        sup = sup.max(vector::sup_norm(sol.x.at(m)));
    }
    (dev, (sup - 0.5).abs())
}

/// Seed and Monte Carlo overrides applied to a scenario run.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Overrides the scenario's Monte Carlo path count (both the rate and
    /// moment blocks); `None` keeps the built-in sizes.
    pub paths: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            paths: None,
        }
    }
}

/// Result of a scenario run: human-readable check lines, the aggregated
/// verdict, and the artifacts written (when an output directory was given).
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub passed: bool,
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

struct ArtifactSink<'a> {
    dir: Option<&'a Path>,
    written: Vec<PathBuf>,
}

impl<'a> ArtifactSink<'a> {
    fn new(dir: Option<&'a Path>) -> io::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(ArtifactSink {
            dir,
            written: Vec::new(),
        })
    }

    fn emit<F>(&mut self, name: &str, write: F) -> io::Result<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
    {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            let mut w = BufWriter::new(fs::File::create(&path)?);
            write(&mut w)?;
            w.flush()?;
            self.written.push(path);
        }
        Ok(())
    }
}

/// Runs a registered scenario, writing artifacts under `out` when given.
pub fn run_scenario(
    name: &str,
    out: Option<&Path>,
    cfg: &ScenarioConfig,
) -> Result<ScenarioOutcome, HarnessError> {
    let mut sink = ArtifactSink::new(out)?;
    let (passed, lines) = match name {
        "paper-example" => scenario_paper_example(&mut sink)?,
        "step-random" => scenario_step_random(cfg, &mut sink)?,
        "continuous-sine" => scenario_continuous_sine(&mut sink)?,
        "bm-1d-rate" => scenario_bm_rate(cfg, &mut sink)?,
        "diffusion-2d-rate" => scenario_diffusion_rate(cfg, &mut sink)?,
        other => return Err(HarnessError::UnknownScenario(other.to_string())),
    };
    Ok(ScenarioOutcome {
        name: name.to_string(),
        passed,
        lines,
        artifacts: sink.written,
    })
}

fn scenario_paper_example(sink: &mut ArtifactSink) -> Result<(bool, Vec<String>), HarnessError> {
    let q = symmetric_half_2d();
    let mut passed = true;
    let mut lines = Vec::new();
    for n in [4u32, 16, 64] {
        let y = paper_example_input(n)?;
        let sol = fast_scheme(&q, &y)?;
        let (dev, sup_dev) = paper_example_deviation(&sol, n);
        let ok = dev <= 1e-12 && sup_dev <= 1e-14;
        passed &= ok;
        lines.push(format!(
            "paper-example n={n}: closed-form deviation {dev:.2e} (tol 1e-12), sup-error deviation {sup_dev:.2e} (tol 1e-14) .. {}",
            if ok { "ok" } else { "FAIL" }
        ));
        sink.emit(&format!("paper_example_solution_n{n}.csv"), |w| {
            sol.write_csv(w)
        })?;
    }
    Ok((passed, lines))
}

fn random_reflection(rng: &mut ChaCha12Rng, d: usize, cap: f64) -> ReflectionMatrix {
    let mut entries = vec![0.0; d * d];
    if d > 1 {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    entries[i * d + j] = rng.gen_range(0.0..cap / (d as f64 - 1.0));
                }
            }
        }
    }
    ReflectionMatrix::new(d, entries).expect("generated entries are valid")
}

fn random_walk_path(rng: &mut ChaCha12Rng, n: u32, horizon: f64, d: usize, step: f64) -> GridPath {
    let steps = crate::paths::steps_for(n, horizon);
    let mut values = Vec::with_capacity((steps + 1) * d);
    for _ in 0..d {
        values.push(rng.gen_range(0.0..1.0));
    }
    for i in 1..=steps {
        for j in 0..d {
            let prev = values[(i - 1) * d + j];
            values.push(prev + rng.gen_range(-step..step));
        }
    }
    GridPath::from_values(n, horizon, d, values).expect("generated walk is valid")
}

fn scenario_step_random(
    cfg: &ScenarioConfig,
    sink: &mut ArtifactSink,
) -> Result<(bool, Vec<String>), HarnessError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let pairs = cfg.paths.unwrap_or(500);
    let mut stability_rows = Vec::with_capacity(pairs);
    let mut violations = 0_usize;
    let mut worst_ratio = 0.0_f64;
    let mut worst_gap = 0.0_f64;
    for index in 0..pairs {
        let d = rng.gen_range(1..=4);
        let q = random_reflection(&mut rng, d, 0.8);
        let n = rng.gen_range(8..=48);
        let y1 = random_walk_path(&mut rng, n, 1.0, d, 0.5);
        let mut perturbed = Vec::with_capacity(y1.points() * d);
        for i in 0..y1.points() {
            for j in 0..d {
                let v = y1.at(i)[j] + rng.gen_range(-0.2..0.2);
                perturbed.push(if i == 0 { v.max(0.0) } else { v });
            }
        }
        let y2 = GridPath::from_values(n, 1.0, d, perturbed)?;
        let report = check_theorem4(&q, &y1, &y2, 1.0)?;
        if !report.k_bound.pass {
            violations += 1;
        }
        if report.k_bound.scale > 0.0 {
            worst_ratio = worst_ratio
                .max(report.k_bound.lhs / (report.k_bound.constant * report.k_bound.scale));
        }
        let sol1 = fast_scheme(&q, &y1)?;
        worst_gap = worst_gap.max(fixed_point_gap(&q, &y1, &sol1.k)?);
        stability_rows.push(vec![
            index as f64,
            d as f64,
            report.k_bound.scale,
            report.k_bound.lhs,
            report.k_bound.rhs,
            report.combined.lhs,
            report.combined.rhs,
            if report.pass { 1.0 } else { 0.0 },
        ]);
    }
    let stability_ok = violations == 0;

    let cases = 60_usize.min(pairs.max(8));
    let mut oracle_rows = Vec::with_capacity(cases);
    let mut oracle_ok = true;
    for index in 0..cases {
        let d = rng.gen_range(1..=3);
        let q = random_reflection(&mut rng, d, 0.7);
        let grid_n = 64_u32;
        let jump_count = rng.gen_range(2..=6);
        let mut indices: Vec<usize> = (1..grid_n as usize).collect();
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut picks: Vec<usize> = indices[..jump_count].to_vec();
        picks.sort_unstable();
        let mut times = vec![0.0];
        times.extend(picks.iter().map(|&i| i as f64 / grid_n as f64));
        let mut values = Vec::with_capacity((picks.len() + 1) * d);
        for _ in 0..d {
            values.push(rng.gen_range(0.0..1.0));
        }
        for _ in 0..picks.len() {
            for _ in 0..d {
                values.push(rng.gen_range(-1.0..1.0));
            }
        }
        let step_input = StepFunction::new(times, d, values)?;
        let (x_exact, k_exact) = step_function_exact(&q, &step_input)?;
        let grid = step_input.discretize(grid_n, 1.0)?;
        let oracle = fixed_point_oracle(&q, &grid, ORACLE_TOL)?;
        let mut exact_gap = 0.0_f64;
        for i in 0..=grid.steps() {
            let t = grid.time_of(i);
            exact_gap = exact_gap
                .max(vector::sup_norm_diff(oracle.x.at(i), x_exact.value_at(t)))
                .max(vector::sup_norm_diff(oracle.k.at(i), k_exact.value_at(t)));
        }
        let scheme = fast_scheme(&q, &grid)?;
        let fp_gap = fixed_point_gap(&q, &grid, &scheme.k)?;
        worst_gap = worst_gap.max(fp_gap);
        let ok = exact_gap <= 1e-9 && fp_gap <= 1e-12;
        oracle_ok &= ok;
        oracle_rows.push(vec![
            index as f64,
            d as f64,
            jump_count as f64,
            exact_gap,
            fp_gap,
            if ok { 1.0 } else { 0.0 },
        ]);
    }

    let passed = stability_ok && oracle_ok && worst_gap <= 1e-12;
    let lines = vec![
        format!(
            "step-random stability: {pairs} pairs, {violations} pushing-bound violations, worst lhs/rhs ratio {worst_ratio:.3} .. {}",
            if stability_ok { "ok" } else { "FAIL" }
        ),
        format!(
            "step-random oracle: {cases} step inputs, projection cascade vs grid fixed point .. {}",
            if oracle_ok { "ok" } else { "FAIL" }
        ),
        format!(
            "step-random fixed-point form: worst gap {worst_gap:.2e} (tol 1e-12) .. {}",
            if worst_gap <= 1e-12 { "ok" } else { "FAIL" }
        ),
    ];
    sink.emit("step_random_stability.csv", |w| {
        write_table_csv(
            &[
                "index",
                "d",
                "input_dist",
                "k_lhs",
                "k_rhs",
                "combined_lhs",
                "combined_rhs",
                "pass",
            ],
            &stability_rows,
            w,
        )
    })?;
    sink.emit("step_random_oracle.csv", |w| {
        write_table_csv(
            &["index", "d", "jumps", "exact_gap", "fixed_point_gap", "pass"],
            &oracle_rows,
            w,
        )
    })?;
    Ok((passed, lines))
}

fn scenario_continuous_sine(sink: &mut ArtifactSink) -> Result<(bool, Vec<String>), HarnessError> {
    let q = symmetric_half_2d();
    let horizon = 2.0;
    let sample = |t: f64| vec![0.5 + 0.8 * (PI * t).sin(), 0.5 + 0.8 * (PI * t).cos()];
    let mut passed = true;
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    let mut previous_lhs = f64::INFINITY;
    let mut final_lhs = f64::INFINITY;
    for n in [10u32, 100, 1000] {
        let y = GridPath::sample(n, horizon, 2, sample)?;
        let fine = GridPath::sample(10 * n, horizon, 2, sample)?;
        let reference = fixed_point_oracle(&q, &fine, ORACLE_TOL)?;
        let report = check_theorem3(&q, &y, &reference, horizon)?;
        let shrinking = report.lhs < previous_lhs;
        previous_lhs = report.lhs;
        final_lhs = report.lhs;
        let ok = report.pass && shrinking;
        passed &= ok;
        lines.push(format!(
            "continuous-sine n={n}: lhs {:.3e} <= {:.3} * omega {:.3e} = {:.3e} .. {}",
            report.lhs,
            report.constant,
            report.scale,
            report.rhs,
            if ok { "ok" } else { "FAIL" }
        ));
        rows.push(vec![
            n as f64,
            report.scale,
            report.lhs,
            report.rhs,
            report.constant,
            if report.pass { 1.0 } else { 0.0 },
        ]);
    }
    let small_enough = final_lhs < 1e-2;
    passed &= small_enough;
    lines.push(format!(
        "continuous-sine n=1000 error {final_lhs:.3e} < 1e-2 .. {}",
        if small_enough { "ok" } else { "FAIL" }
    ));
    sink.emit("continuous_sine_theorem3.csv", |w| {
        write_table_csv(&["n", "omega", "lhs", "rhs", "constant", "pass"], &rows, w)
    })?;
    Ok((passed, lines))
}

fn scenario_bm_rate(
    cfg: &ScenarioConfig,
    sink: &mut ArtifactSink,
) -> Result<(bool, Vec<String>), HarnessError> {
    let (q, model) = build_model("bm-1d").expect("registered model");
    let wiener = WienerConfig {
        seed: cfg.seed,
        n_max: 8192,
        d: 1,
        horizon: 1.0,
    };
    let densities = [16u32, 32, 64, 128, 256, 512, 1024];
    let paths = cfg.paths.unwrap_or(200);
    let report = sde::strong_error(&q, &model, &wiener, &densities, 1, paths)?;
    sink.emit("bm_1d_rate.csv", |w| report.write_csv(w))?;

    let w0 = generate_wiener(&wiener)?;
    let run = fast_euler_diffusion(&q, &model, &w0, 256)?;
    let coarse = coarsen_path(&w0, 256)?;
    let oracle = running_max_map_1d(&coarse)?;
    let mut oracle_gap = 0.0_f64;
    for i in 0..run.solution.x.points() {
        oracle_gap = oracle_gap.max(vector::sup_norm_diff(
            run.solution.x.at(i),
            oracle.x.at(i),
        ));
    }

    let mut passed = oracle_gap <= 1e-12;
    let mut lines = vec![format!(
        "bm-1d-rate oracle: running-max gap {oracle_gap:.2e} (tol 1e-12) .. {}",
        if oracle_gap <= 1e-12 { "ok" } else { "FAIL" }
    )];
    match &report.fit {
        Some(fit) => {
            let slope_ok = (0.7..=1.3).contains(&fit.slope);
            let r2_ok = fit.r_squared >= 0.95;
            passed &= slope_ok && r2_ok;
            lines.push(format!(
                "bm-1d-rate fit: slope {:.3} in [0.7, 1.3] .. {}; r^2 {:.4} >= 0.95 .. {}",
                fit.slope,
                if slope_ok { "ok" } else { "FAIL" },
                fit.r_squared,
                if r2_ok { "ok" } else { "FAIL" }
            ));
        }
        None => {
            passed = false;
            lines.push("bm-1d-rate fit: degenerate .. FAIL".to_string());
        }
    }
    Ok((passed, lines))
}

fn scenario_diffusion_rate(
    cfg: &ScenarioConfig,
    sink: &mut ArtifactSink,
) -> Result<(bool, Vec<String>), HarnessError> {
    let (q, model) = build_model("diffusion-2d").expect("registered model");
    let wiener = WienerConfig {
        seed: cfg.seed,
        n_max: 8192,
        d: 2,
        horizon: 1.0,
    };
    let densities = [16u32, 32, 64, 128, 256, 512, 1024];
    let rate_paths = cfg.paths.unwrap_or(200);
    let report = sde::strong_error(&q, &model, &wiener, &densities, 1, rate_paths)?;
    sink.emit("diffusion_2d_rate.csv", |w| report.write_csv(w))?;

    let moment_paths = cfg.paths.unwrap_or(500);
    let moment_rows = sde::moment_surrogate(&q, &model, &wiener, &[64, 256, 1024], moment_paths)?;
    sink.emit("diffusion_2d_moments.csv", |w| {
        write_moments_csv(&moment_rows, w)
    })?;

    let mut passed = true;
    let mut lines = Vec::new();
    match &report.fit {
        Some(fit) => {
            let slope_ok = (0.6..=1.4).contains(&fit.slope);
            passed &= slope_ok;
            lines.push(format!(
                "diffusion-2d-rate fit: slope {:.3} in [0.6, 1.4] .. {} (r^2 {:.4})",
                fit.slope,
                if slope_ok { "ok" } else { "FAIL" },
                fit.r_squared
            ));
        }
        None => {
            passed = false;
            lines.push("diffusion-2d-rate fit: degenerate .. FAIL".to_string());
        }
    }
    let lo = moment_rows
        .iter()
        .map(|r| r.mean)
        .fold(f64::INFINITY, f64::min);
    let hi = moment_rows
        .iter()
        .map(|r| r.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    let moments_ok = spread.is_finite() && spread < 0.10;
    passed &= moments_ok;
    lines.push(format!(
        "diffusion-2d-rate moments: mean sup^2 spread {spread:.3} < 0.10 across n in {{64, 256, 1024}} .. {}",
        if moments_ok { "ok" } else { "FAIL" }
    ));
    Ok((passed, lines))
}
