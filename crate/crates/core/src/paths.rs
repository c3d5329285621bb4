//! Discrete-time paths on uniform grids, plus the cadlag step inputs used by
//! the exact solver.
//!
//! A [`GridPath`] holds the values of a d-dimensional path at the grid times
//! `i/n`, `i = 0..⌊nT⌋`, and is read back as the piecewise-constant cadlag
//! extension: evaluation at `t` returns the value at index `⌊nt⌋`. All
//! scheme outputs in this crate live on such grids, so uniform-mesh moduli
//! and sup-distances reduce to finite maxima over grid indices.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::vector;

/// Guard added before `floor` when converting times to grid indices, so that
/// products like `0.3 * 10.0` landing one ulp below an integer still map to
/// the intended index. Matches the CSV reader's relative spacing tolerance.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("density must be at least 1")]
    ZeroDensity,
    #[error("horizon must be positive and finite, got {0}")]
    NonpositiveHorizon(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("expected {expected} values ({points} grid points of dimension {d}), got {got}")]
    WrongValueCount {
        expected: usize,
        points: usize,
        d: usize,
        got: usize,
    },
    #[error("non-finite value at grid index {index}, component {component}")]
    NonFiniteValue { index: usize, component: usize },
    #[error("jump times must be strictly increasing: times[{index}] = {value}")]
    NonIncreasingTimes { index: usize, value: f64 },
    #[error("first jump time must be 0, got {0}")]
    NonzeroStart(f64),
    #[error("paths have different densities: {left} vs {right}")]
    DensityMismatch { left: u32, right: u32 },
    #[error("paths have different dimensions: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("csv line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Number of full grid steps of size `1/n` that fit in `[0, horizon]`.
pub fn steps_for(n: u32, horizon: f64) -> usize {
    (n as f64 * horizon + GRID_EPS).floor() as usize
}

/// A d-dimensional path sampled on the uniform grid `{i/n}`, interpreted as
/// its piecewise-constant cadlag extension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    n: u32,
    horizon: f64,
    d: usize,
    values: Vec<f64>, // (steps + 1) * d, row-major by grid index
}

impl GridPath {
    /// Wraps a flat value buffer (grid-index major) after validation.
    pub fn from_values(n: u32, horizon: f64, d: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if n == 0 {
            return Err(PathError::ZeroDensity);
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(PathError::NonpositiveHorizon(horizon));
        }
        if d == 0 {
            return Err(PathError::ZeroDimension);
        }
        let points = steps_for(n, horizon) + 1;
        if values.len() != points * d {
            return Err(PathError::WrongValueCount {
                expected: points * d,
                points,
                d,
                got: values.len(),
            });
        }
        for (pos, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(PathError::NonFiniteValue {
                    index: pos / d,
                    component: pos % d,
                });
            }
        }
        Ok(GridPath {
            n,
            horizon,
            d,
            values,
        })
    }

    /// Samples an analytic path `f(t)` at every grid time.
    pub fn sample<F>(n: u32, horizon: f64, d: usize, mut f: F) -> Result<Self, PathError>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        if n == 0 {
            return Err(PathError::ZeroDensity);
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(PathError::NonpositiveHorizon(horizon));
        }
        if d == 0 {
            return Err(PathError::ZeroDimension);
        }
        let steps = steps_for(n, horizon);
        let mut values = Vec::with_capacity((steps + 1) * d);
        for i in 0..=steps {
            let t = i as f64 / n as f64;
            let v = f(t);
            assert_eq!(v.len(), d, "sampler returned wrong dimension at t = {t}");
            values.extend_from_slice(&v);
        }
        Self::from_values(n, horizon, d, values)
    }

    pub fn density(&self) -> u32 {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Index of the last grid point, `⌊nT⌋`.
    pub fn steps(&self) -> usize {
        self.values.len() / self.d - 1
    }

    /// Number of stored grid points, `steps + 1`.
    pub fn points(&self) -> usize {
        self.values.len() / self.d
    }

    /// Value at grid index `i`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn last(&self) -> &[f64] {
        self.at(self.steps())
    }

    /// Grid index hit by time `t` under the cadlag convention, clamped to the
    /// stored range.
    pub fn grid_index(&self, t: f64) -> usize {
        debug_assert!(t >= 0.0, "negative evaluation time {t}");
        let raw = (self.n as f64 * t.max(0.0) + GRID_EPS).floor() as usize;
        raw.min(self.steps())
    }

    /// Cadlag evaluation: the value at `⌊nt⌋`.
    pub fn value_at(&self, t: f64) -> &[f64] {
        self.at(self.grid_index(t))
    }

    /// Grid time of index `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points()).map(|i| self.time_of(i))
    }

    /// The one-step delayed path `u^(n-)`: index `i` holds `u[max(i-1, 0)]`.
    pub fn delay_one_step(&self) -> GridPath {
        let mut values = Vec::with_capacity(self.values.len());
        values.extend_from_slice(self.at(0));
        for i in 1..self.points() {
            values.extend_from_slice(self.at(i - 1));
        }
        GridPath {
            n: self.n,
            horizon: self.horizon,
            d: self.d,
            values,
        }
    }

    /// Restriction to `[0, t]`: keeps grid indices `0..=⌊nt⌋`.
    pub fn truncate(&self, t: f64) -> GridPath {
        let keep = self.grid_index(t);
        let horizon = keep as f64 / self.n as f64;
        GridPath {
            n: self.n,
            horizon: if keep == 0 {
                // A single-point path still needs a positive horizon smaller
                // than one grid step.
                0.5 / self.n as f64
            } else {
                horizon
            },
            d: self.d,
            values: self.values[..(keep + 1) * self.d].to_vec(),
        }
    }

    /// Uniform modulus of continuity on the grid:
    /// `sup { |y_s - y_u| : |s - u| <= delta, s, u <= t }`.
    ///
    /// Both arguments range over grid times, which is exact for the cadlag
    /// extension as long as `delta < 1/n` never matters (pairs inside one
    /// cell are equal there anyway).
    pub fn modulus_of_continuity(&self, delta: f64, t: f64) -> f64 {
        debug_assert!(delta > 0.0, "modulus needs a positive window");
        let last = self.grid_index(t);
        let window = (self.n as f64 * delta + GRID_EPS).floor() as usize;
        let mut worst = 0.0_f64;
        for i in 0..=last {
            let hi = (i + window).min(last);
            for j in (i + 1)..=hi {
                worst = worst.max(vector::sup_norm_diff(self.at(i), self.at(j)));
            }
        }
        worst
    }

    /// Writes the path as CSV with header `t,x1,...,xd` and one row per grid
    /// point. Floats carry 17 significant digits so parsing is lossless.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for j in 1..=self.d {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.points() {
            write!(w, "{:.16e}", self.time_of(i))?;
            for v in self.at(i) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parses the CSV format written by [`write_csv`], validating the header
    /// and that the time column is the uniform grid `i/n` within `1e-9`
    /// relative tolerance. Needs at least two rows to infer the density.
    ///
    /// [`write_csv`]: GridPath::write_csv
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, PathError> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut d = 0usize;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 {
                let mut cols = line.split(',');
                if cols.next() != Some("t") {
                    return Err(PathError::Malformed {
                        line: 1,
                        message: "header must start with column `t`".into(),
                    });
                }
                d = cols.count();
                if d == 0 {
                    return Err(PathError::Malformed {
                        line: 1,
                        message: "header has no value columns".into(),
                    });
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(PathError::Malformed {
                    line: idx + 1,
                    message: format!("expected {} fields, got {}", d + 1, fields.len()),
                });
            }
            for (col, field) in fields.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| PathError::Malformed {
                    line: idx + 1,
                    message: format!("bad number {field:?} in field {col}"),
                })?;
                if col == 0 {
                    times.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        if times.len() < 2 {
            return Err(PathError::Malformed {
                line: times.len() + 1,
                message: "need at least two data rows to infer the grid density".into(),
            });
        }
        let m = times.len() - 1;
        if times[0].abs() > GRID_EPS {
            return Err(PathError::Malformed {
                line: 2,
                message: format!("first time must be 0, got {}", times[0]),
            });
        }
        let h = times[1] - times[0];
        if !(h > 0.0) {
            return Err(PathError::Malformed {
                line: 3,
                message: "time column is not increasing".into(),
            });
        }
        let scale = times[m].abs().max(1.0);
        for (i, &t) in times.iter().enumerate() {
            if (t - i as f64 * h).abs() > GRID_EPS * scale {
                return Err(PathError::Malformed {
                    line: i + 2,
                    message: format!("time {t} deviates from the uniform grid with step {h}"),
                });
            }
        }
        let n_real = 1.0 / h;
        let n = n_real.round();
        if n < 1.0 || (n_real - n).abs() > GRID_EPS * n {
            return Err(PathError::Malformed {
                line: 2,
                message: format!("grid step {h} is not 1/n for an integer density"),
            });
        }
        let n = n as u32;
        let horizon = m as f64 / n as f64;
        Self::from_values(n, horizon, d, values)
    }
}

/// A cadlag step function with finitely many jumps: constant on
/// `[t_i, t_{i+1})`, with `t_0 = 0` carrying the initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    times: Vec<f64>,
    d: usize,
    values: Vec<f64>, // times.len() * d
}

impl StepFunction {
    pub fn new(times: Vec<f64>, d: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if d == 0 {
            return Err(PathError::ZeroDimension);
        }
        if times.is_empty() {
            return Err(PathError::NonzeroStart(f64::NAN));
        }
        if times[0] != 0.0 {
            return Err(PathError::NonzeroStart(times[0]));
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) || !times[i].is_finite() {
                return Err(PathError::NonIncreasingTimes {
                    index: i,
                    value: times[i],
                });
            }
        }
        if values.len() != times.len() * d {
            return Err(PathError::WrongValueCount {
                expected: times.len() * d,
                points: times.len(),
                d,
                got: values.len(),
            });
        }
        for (pos, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(PathError::NonFiniteValue {
                    index: pos / d,
                    component: pos % d,
                });
            }
        }
        Ok(StepFunction { times, d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn segment(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn segments(&self) -> usize {
        self.times.len()
    }

    /// Cadlag evaluation: the value of the last segment with `t_i <= t`.
    pub fn value_at(&self, t: f64) -> &[f64] {
        debug_assert!(t >= 0.0, "negative evaluation time {t}");
        let idx = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.segment(idx)
    }

    /// Samples the step function on the uniform grid of density `n`.
    pub fn discretize(&self, n: u32, horizon: f64) -> Result<GridPath, PathError> {
        GridPath::sample(n, horizon, self.d, |t| self.value_at(t).to_vec())
    }
}

/// `sup_{s <= t} sup_norm(a_s - b_s)` for two paths on the same grid.
///
/// The paths must share density and dimension; the sup runs over grid
/// indices up to `⌊nt⌋` (and never past either path's end).
pub fn sup_distance(a: &GridPath, b: &GridPath, t: f64) -> Result<f64, PathError> {
    if a.density() != b.density() {
        return Err(PathError::DensityMismatch {
            left: a.density(),
            right: b.density(),
        });
    }
    if a.dim() != b.dim() {
        return Err(PathError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let last = a.grid_index(t).min(b.steps());
    let mut worst = 0.0_f64;
    for i in 0..=last {
        worst = worst.max(vector::sup_norm_diff(a.at(i), b.at(i)));
    }
    Ok(worst)
}
