//! Random drivers and the fast reflected Euler schemes.
//!
//! A driver is consumed as an increment stream; the scheme folds each
//! increment through the same one-correction update as the deterministic
//! scheme, with the input path accumulated on the fly:
//!
//! ```text
//!   Δy_i = b(X_i) / n + σ(X_i) ΔZ_i
//!   K_{i+1} = K_i + [-(X_i + Δy_i)]^+
//!   Y_{i+1} = Y_i + Δy_i
//!   X_{i+1} = Y_{i+1} + (I - Qᵀ) K_{i+1}
//! ```
//!
//! The effective increment fed to the correction is recomputed as
//! `Y_{i+1} - Y_i` after the accumulation so that a run is bit-identical to
//! [`fast_scheme`] applied to its own accumulated path `Y`; every
//! cross-module equivalence below is exact, not approximate.
//!
//! Wiener paths are generated by a fixed documented generator: ChaCha12
//! keyed by the 64-bit seed, standard-normal variates from `rand_distr`,
//! draw order step-major then component-minor, each increment scaled by
//! `sqrt(1/n_max)`. Coarse grids reuse the same path by differencing its
//! values at the shared points, so all densities are driven by literally
//! the same noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::harness::{RateReport, RateRow};
use crate::matrix::ReflectionMatrix;
use crate::paths::{steps_for, GridPath, PathError};
use crate::skorokhod::{fast_scheme, SkorokhodSolution};
use crate::vector;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("density {n} does not divide the fine density {n_max}")]
    NotADivisor { n: u32, n_max: u32 },
    #[error("initial state outside the orthant: component {component} = {value}")]
    StartOutsideOrthant { component: usize, value: f64 },
    #[error("initial state has a non-finite component {component}")]
    NonFiniteStart { component: usize },
    #[error("coefficient evaluation produced a non-finite value at step {step}")]
    NonFiniteCoefficient { step: usize },
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("strong error estimation needs at least 2 paths, got {got}")]
    InsufficientPaths { got: usize },
    #[error("no coarse densities supplied")]
    NoDensities,
    #[error("moment exponent p must be positive")]
    ZeroExponent,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Seeded Wiener generation on the finest grid of a dyadic ladder.
#[derive(Debug, Clone, Copy)]
pub struct WienerConfig {
    pub seed: u64,
    /// Finest density; every density used with the path must divide it.
    pub n_max: u32,
    pub d: usize,
    pub horizon: f64,
}

/// Generates a Wiener path at density `n_max` with `W_0 = 0`.
///
/// Identical configs give bit-identical paths. The increments are i.i.d.
/// centered Gaussians with variance `1/n_max` per component.
pub fn generate_wiener(cfg: &WienerConfig) -> Result<GridPath, SdeError> {
    let steps = steps_for(cfg.n_max, cfg.horizon);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let scale = (1.0 / cfg.n_max as f64).sqrt();
    let mut values = Vec::with_capacity((steps + 1) * cfg.d.max(1));
    values.extend(std::iter::repeat(0.0).take(cfg.d));
    for i in 1..=steps {
        for j in 0..cfg.d {
            let z: f64 = rng.sample(StandardNormal);
            let prev = values[(i - 1) * cfg.d + j];
            values.push(prev + scale * z);
        }
    }
    Ok(GridPath::from_values(cfg.n_max, cfg.horizon, cfg.d, values)?)
}

/// The values of a fine path at the grid points of a coarser nested grid.
/// Shared points carry identical values, so this never introduces error.
pub fn coarsen_path(w: &GridPath, n: u32) -> Result<GridPath, SdeError> {
    if n == 0 || w.density() % n != 0 {
        return Err(SdeError::NotADivisor {
            n,
            n_max: w.density(),
        });
    }
    let ratio = (w.density() / n) as usize;
    let steps = steps_for(n, w.horizon());
    let d = w.dim();
    let mut values = Vec::with_capacity((steps + 1) * d);
    for i in 0..=steps {
        values.extend_from_slice(w.at(i * ratio));
    }
    Ok(GridPath::from_values(n, w.horizon(), d, values)?)
}

/// An increment stream at density `n`: increment `i` spans
/// `[i/n, (i+1)/n]`.
#[derive(Debug, Clone)]
pub struct DriverStream {
    n: u32,
    horizon: f64,
    d: usize,
    increments: Vec<f64>,
}

impl DriverStream {
    /// Couples a coarse stream to a fine path: increment `i` is the value
    /// difference `w_{(i+1)/n} - w_{i/n}`, the exact aggregate of the
    /// underlying fine increments.
    pub fn coarsen(w: &GridPath, n: u32) -> Result<Self, SdeError> {
        if n == 0 || w.density() % n != 0 {
            return Err(SdeError::NotADivisor {
                n,
                n_max: w.density(),
            });
        }
        let ratio = (w.density() / n) as usize;
        let steps = steps_for(n, w.horizon());
        let d = w.dim();
        let mut increments = Vec::with_capacity(steps * d);
        for i in 0..steps {
            let lo = w.at(i * ratio);
            let hi = w.at((i + 1) * ratio);
            for j in 0..d {
                increments.push(hi[j] - lo[j]);
            }
        }
        Ok(DriverStream {
            n,
            horizon: w.horizon(),
            d,
            increments,
        })
    }

    /// Wraps raw increments, e.g. a piecewise-constant jump driver.
    pub fn from_increments(
        n: u32,
        horizon: f64,
        d: usize,
        increments: Vec<f64>,
    ) -> Result<Self, SdeError> {
        let steps = steps_for(n, horizon);
        if d == 0 {
            return Err(SdeError::Path(PathError::ZeroDimension));
        }
        if increments.len() != steps * d {
            return Err(SdeError::Path(PathError::WrongValueCount {
                expected: steps * d,
                points: steps,
                d,
                got: increments.len(),
            }));
        }
        if let Some(pos) = increments.iter().position(|v| !v.is_finite()) {
            return Err(SdeError::Path(PathError::NonFiniteValue {
                index: pos / d,
                component: pos % d,
            }));
        }
        Ok(DriverStream {
            n,
            horizon,
            d,
            increments,
        })
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

    pub fn steps(&self) -> usize {
        self.increments.len() / self.d
    }

    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.d..(i + 1) * self.d]
    }
}

/// A scheme run together with the accumulated input path it solved.
///
/// `solution.x` equals `y + (I - Qᵀ) solution.k` at every grid point by
/// construction, and the whole run is bit-identical to
/// `fast_scheme(q, &run.y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerRun {
    pub y: GridPath,
    pub solution: SkorokhodSolution,
}

fn run_fast_euler(
    q: &ReflectionMatrix,
    x0: &[f64],
    driver: &DriverStream,
    dy_of: &mut dyn FnMut(usize, &[f64], &[f64], &mut [f64]),
) -> Result<EulerRun, SdeError> {
    if q.dim() != driver.dim() {
        return Err(SdeError::DimensionMismatch {
            expected: q.dim(),
            got: driver.dim(),
        });
    }
    if x0.len() != driver.dim() {
        return Err(SdeError::DimensionMismatch {
            expected: driver.dim(),
            got: x0.len(),
        });
    }
    if let Some(component) = x0.iter().position(|v| !v.is_finite()) {
        return Err(SdeError::NonFiniteStart { component });
    }
    if let Some(component) = x0.iter().position(|&v| v < 0.0) {
        return Err(SdeError::StartOutsideOrthant {
            component,
            value: x0[component],
        });
    }
    let d = driver.dim();
    let steps = driver.steps();
    let mut ys = Vec::with_capacity((steps + 1) * d);
    let mut xs = Vec::with_capacity((steps + 1) * d);
    let mut ks = Vec::with_capacity((steps + 1) * d);
    ys.extend_from_slice(x0);
    xs.extend_from_slice(x0);
    ks.extend(std::iter::repeat(0.0).take(d));

    let mut dy = vec![0.0; d];
    let mut k_next = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for i in 0..steps {
        let x_cur = &xs[i * d..(i + 1) * d];
        dy_of(i, x_cur, driver.increment(i), &mut dy);
        if !vector::all_finite(&dy) {
            return Err(SdeError::NonFiniteCoefficient { step: i });
        }
        let y_base = ys.len();
        for j in 0..d {
            ys.push(ys[y_base - d + j] + dy[j]);
        }
        // Effective increment: the rounded difference of the accumulated
        // path, so the run folds exactly as fast_scheme would on `y`.
        for j in 0..d {
            let dy_eff = ys[y_base + j] - ys[y_base - d + j];
            let corr = (-(x_cur[j] + dy_eff)).max(0.0);
            k_next[j] = ks[i * d + j] + corr;
        }

        #[cfg(debug_assertions)]
        {
            // Running-maximum form of the same update against the
            // accumulated path.
            q.qt_mul_into(&ks[i * d..(i + 1) * d], &mut scratch);
            let scale = 1.0
                + vector::sup_norm(&k_next)
                + vector::sup_norm(&ys[y_base..y_base + d]);
            for j in 0..d {
                let alt = (scratch[j] - ys[y_base + j])
                    .max(0.0)
                    .max(ks[i * d + j]);
                debug_assert!(
                    (alt - k_next[j]).abs() <= 1e-14 * scale,
                    "euler update forms disagree at step {i}, component {j}"
                );
            }
        }

        q.qt_mul_into(&k_next, &mut scratch);
        let x_base = xs.len();
        for j in 0..d {
            xs.push(ys[y_base + j] + (k_next[j] - scratch[j]));
        }
        if !vector::all_finite(&xs[x_base..x_base + d]) {
            return Err(SdeError::NonFiniteState { step: i });
        }
        ks.extend_from_slice(&k_next);
    }
    let n = driver.density();
    let horizon = driver.horizon();
    Ok(EulerRun {
        y: GridPath::from_values(n, horizon, d, ys)?,
        solution: SkorokhodSolution {
            x: GridPath::from_values(n, horizon, d, xs)?,
            k: GridPath::from_values(n, horizon, d, ks)?,
        },
    })
}

/// One-correction Euler step per driver increment with state-dependent
/// diffusion coefficient and no drift: `Δy_i = σ(X_i) ΔZ_i`.
///
/// `sigma` writes the `d x d` coefficient matrix in row-major order.
pub fn fast_euler_semimartingale<F>(
    q: &ReflectionMatrix,
    x0: &[f64],
    sigma: F,
    driver: &DriverStream,
) -> Result<EulerRun, SdeError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = driver.dim();
    let mut sig = vec![0.0; d * d];
    run_fast_euler(q, x0, driver, &mut |_, x, dz, dy| {
        sigma(x, &mut sig);
        for j in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += sig[j * d + l] * dz[l];
            }
            dy[j] = acc;
        }
    })
}

/// A reflected diffusion specification. The coefficient closures write
/// their output into the provided buffer: `drift` fills `d` values,
/// `sigma` fills a row-major `d x d` matrix.
pub struct DiffusionModel {
    pub d: usize,
    pub x0: Vec<f64>,
    pub drift: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub sigma: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    /// Documented Lipschitz constant of the coefficients; reporting only.
    pub lipschitz_hint: f64,
}

impl DiffusionModel {
    pub fn validate(&self) -> Result<(), SdeError> {
        if self.x0.len() != self.d {
            return Err(SdeError::DimensionMismatch {
                expected: self.d,
                got: self.x0.len(),
            });
        }
        if let Some(component) = self.x0.iter().position(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteStart { component });
        }
        if let Some(component) = self.x0.iter().position(|&v| v < 0.0) {
            return Err(SdeError::StartOutsideOrthant {
                component,
                value: self.x0[component],
            });
        }
        Ok(())
    }
}

/// Euler run of a diffusion at density `n`, driven by the coarsening of a
/// fine Wiener path: `Δy_i = b(X_i)/n + σ(X_i) ΔW_i`.
pub fn fast_euler_diffusion(
    q: &ReflectionMatrix,
    model: &DiffusionModel,
    w: &GridPath,
    n: u32,
) -> Result<EulerRun, SdeError> {
    model.validate()?;
    if model.d != w.dim() {
        return Err(SdeError::DimensionMismatch {
            expected: model.d,
            got: w.dim(),
        });
    }
    let driver = DriverStream::coarsen(w, n)?;
    let d = model.d;
    let h = 1.0 / n as f64;
    let mut b = vec![0.0; d];
    let mut sig = vec![0.0; d * d];
    run_fast_euler(q, &model.x0, &driver, &mut |_, x, dz, dy| {
        (model.drift)(x, &mut b);
        (model.sigma)(x, &mut sig);
        for j in 0..d {
            let mut acc = b[j] * h;
            for l in 0..d {
                acc += sig[j * d + l] * dz[l];
            }
            dy[j] = acc;
        }
    })
}

/// Per-density mean of `sup_{s<=T} sup_norm(X^n_s)^2` over Monte Carlo
/// paths, a finite-sample surrogate for the uniform moment bound.
#[derive(Debug, Clone, Copy)]
pub struct MomentRow {
    pub n: u32,
    pub mean: f64,
    pub stderr: f64,
}

/// Estimates the strong error of the scheme against its own finest-grid
/// run under coupled noise.
///
/// For each path (seeded `cfg.seed + index`) the reference is simulated at
/// `cfg.n_max` and each coarse density on the same Wiener path; the
/// recorded statistic is `sup over shared grid points of
/// sup_norm(X^n - X^{n_max})` raised to `2p`. The report regresses
/// `log(mean)` on `log((ln n)/n)`; zero-error rows are excluded from the
/// fit and the fit is absent when fewer than two rows remain.
pub fn strong_error(
    q: &ReflectionMatrix,
    model: &DiffusionModel,
    cfg: &WienerConfig,
    densities: &[u32],
    p: u32,
    paths: usize,
) -> Result<RateReport, SdeError> {
    if p == 0 {
        return Err(SdeError::ZeroExponent);
    }
    if paths < 2 {
        return Err(SdeError::InsufficientPaths { got: paths });
    }
    if densities.is_empty() {
        return Err(SdeError::NoDensities);
    }
    let mut ladder = densities.to_vec();
    ladder.sort_unstable();
    ladder.dedup();
    for &n in &ladder {
        if n == 0 || cfg.n_max % n != 0 {
            return Err(SdeError::NotADivisor {
                n,
                n_max: cfg.n_max,
            });
        }
    }
    let mut sums = vec![0.0; ladder.len()];
    let mut sum_squares = vec![0.0; ladder.len()];
    for index in 0..paths {
        let path_cfg = WienerConfig {
            seed: cfg.seed + index as u64,
            ..*cfg
        };
        let w = generate_wiener(&path_cfg)?;
        let reference = fast_euler_diffusion(q, model, &w, cfg.n_max)?;
        for (slot, &n) in ladder.iter().enumerate() {
            let run = fast_euler_diffusion(q, model, &w, n)?;
            let ratio = (cfg.n_max / n) as usize;
            let mut sup = 0.0_f64;
            for i in 0..run.solution.x.points() {
                sup = sup.max(vector::sup_norm_diff(
                    run.solution.x.at(i),
                    reference.solution.x.at(i * ratio),
                ));
            }
            let err = sup.powi(2 * p as i32);
            sums[slot] += err;
            sum_squares[slot] += err * err;
        }
    }
    let m = paths as f64;
    let rows: Vec<RateRow> = ladder
        .iter()
        .enumerate()
        .map(|(slot, &n)| {
            let mean = sums[slot] / m;
            let variance = ((sum_squares[slot] - m * mean * mean) / (m - 1.0)).max(0.0);
            RateRow::new(n, mean, (variance / m).sqrt())
        })
        .collect();
    Ok(RateReport::new(p, rows))
}

/// Monte Carlo estimate of `E sup_{s<=T} sup_norm(X^n)^2` at each density,
/// using the same coupled generator and per-path seeds as [`strong_error`].
pub fn moment_surrogate(
    q: &ReflectionMatrix,
    model: &DiffusionModel,
    cfg: &WienerConfig,
    densities: &[u32],
    paths: usize,
) -> Result<Vec<MomentRow>, SdeError> {
    if paths < 2 {
        return Err(SdeError::InsufficientPaths { got: paths });
    }
    if densities.is_empty() {
        return Err(SdeError::NoDensities);
    }
    let mut ladder = densities.to_vec();
    ladder.sort_unstable();
    ladder.dedup();
    for &n in &ladder {
        if n == 0 || cfg.n_max % n != 0 {
            return Err(SdeError::NotADivisor {
                n,
                n_max: cfg.n_max,
            });
        }
    }
    let mut sums = vec![0.0; ladder.len()];
    let mut sum_squares = vec![0.0; ladder.len()];
    for index in 0..paths {
        let path_cfg = WienerConfig {
            seed: cfg.seed + index as u64,
            ..*cfg
        };
        let w = generate_wiener(&path_cfg)?;
        for (slot, &n) in ladder.iter().enumerate() {
            let run = fast_euler_diffusion(q, model, &w, n)?;
            let mut sup = 0.0_f64;
            for i in 0..run.solution.x.points() {
                sup = sup.max(vector::sup_norm(run.solution.x.at(i)));
            }
            sums[slot] += sup * sup;
            sum_squares[slot] += sup * sup * sup * sup;
        }
    }
    let m = paths as f64;
    Ok(ladder
        .iter()
        .enumerate()
        .map(|(slot, &n)| {
            let mean = sums[slot] / m;
            let variance = ((sum_squares[slot] - m * mean * mean) / (m - 1.0)).max(0.0);
            MomentRow {
                n,
                mean,
                stderr: (variance / m).sqrt(),
            }
        })
        .collect())
}

/// Verifies a run against the scheme applied to its accumulated path.
/// Equality is exact because both fold the same float operations.
pub fn matches_deterministic_scheme(q: &ReflectionMatrix, run: &EulerRun) -> bool {
    match fast_scheme(q, &run.y) {
        Ok(sol) => sol == run.solution,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::symmetric_half_2d;
    use crate::paths::StepFunction;
    use crate::skorokhod::running_max_map_1d;

    fn identity_sigma(d: usize) -> impl Fn(&[f64], &mut [f64]) {
        move |_x: &[f64], out: &mut [f64]| {
            for j in 0..d {
                for l in 0..d {
                    out[j * d + l] = if j == l { 1.0 } else { 0.0 };
                }
            }
        }
    }

    fn bm_1d_model() -> DiffusionModel {
        DiffusionModel {
            d: 1,
            x0: vec![0.0],
            drift: Box::new(|_, out| out[0] = 0.0),
            sigma: Box::new(|_, out| out[0] = 1.0),
            lipschitz_hint: 0.0,
        }
    }

    #[test]
    fn wiener_is_deterministic_and_starts_at_zero() {
        let cfg = WienerConfig {
            seed: 7,
            n_max: 64,
            d: 3,
            horizon: 1.0,
        };
        let a = generate_wiener(&cfg).unwrap();
        let b = generate_wiener(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.at(0), &[0.0, 0.0, 0.0]);
        let c = generate_wiener(&WienerConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wiener_increment_variance_matches_density() {
        // 10^5 draws; the sample variance of a Gaussian sample is within
        // 3 standard errors, i.e. a relative window of 3*sqrt(2/(N-1)).
        let n_max = 1024_u32;
        let cfg = WienerConfig {
            seed: 11,
            n_max,
            d: 1,
            horizon: 100_000.0 / 1024.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let count = w.steps();
        assert_eq!(count, 100_000);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..count {
            let inc = w.at(i + 1)[0] - w.at(i)[0];
            sum += inc;
            sum_sq += inc * inc;
        }
        let mean = sum / count as f64;
        let var = (sum_sq - count as f64 * mean * mean) / (count as f64 - 1.0);
        let target = 1.0 / n_max as f64;
        let window = 3.0 * (2.0 / (count as f64 - 1.0)).sqrt() * target;
        assert!(
            (var - target).abs() <= window,
            "sample variance {var} vs {target} (window {window})"
        );
    }

    #[test]
    fn coarsen_at_full_density_reproduces_increments() {
        let cfg = WienerConfig {
            seed: 3,
            n_max: 32,
            d: 2,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let stream = DriverStream::coarsen(&w, 32).unwrap();
        assert_eq!(stream.steps(), 32);
        for i in 0..stream.steps() {
            for j in 0..2 {
                assert_eq!(stream.increment(i)[j], w.at(i + 1)[j] - w.at(i)[j]);
            }
        }
    }

    #[test]
    fn coarse_increments_telescope_to_rounding() {
        let cfg = WienerConfig {
            seed: 5,
            n_max: 256,
            d: 2,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let fine = DriverStream::coarsen(&w, 256).unwrap();
        let coarse = DriverStream::coarsen(&w, 64).unwrap();
        for i in 0..coarse.steps() {
            for j in 0..2 {
                let mut acc = 0.0;
                for s in 0..4 {
                    acc += fine.increment(4 * i + s)[j];
                }
                let diff = (coarse.increment(i)[j] - acc).abs();
                assert!(diff <= 1e-15, "telescoping gap {diff} at step {i}");
            }
        }
    }

    #[test]
    fn coarse_path_shares_values_exactly() {
        let cfg = WienerConfig {
            seed: 9,
            n_max: 128,
            d: 2,
            horizon: 1.5,
        };
        let w = generate_wiener(&cfg).unwrap();
        let coarse = coarsen_path(&w, 16).unwrap();
        for i in 0..=coarse.steps() {
            assert_eq!(coarse.at(i), w.at(i * 8));
        }
        assert!(matches!(
            coarsen_path(&w, 17),
            Err(SdeError::NotADivisor { n: 17, n_max: 128 })
        ));
    }

    #[test]
    fn zero_sigma_freezes_the_state() {
        let q = symmetric_half_2d();
        let cfg = WienerConfig {
            seed: 1,
            n_max: 64,
            d: 2,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let driver = DriverStream::coarsen(&w, 64).unwrap();
        let run =
            fast_euler_semimartingale(&q, &[0.3, 0.0], |_, out| out.fill(0.0), &driver).unwrap();
        for i in 0..=run.solution.x.steps() {
            assert_eq!(run.solution.x.at(i), &[0.3, 0.0]);
            assert_eq!(run.solution.k.at(i), &[0.0, 0.0]);
        }
    }

    #[test]
    fn jump_driver_reproduces_the_deterministic_scheme() {
        // One (-1,-1) jump at t = 1 with sigma = I is the worked example;
        // the run must agree bit-for-bit with fast_scheme on the jump path.
        let q = symmetric_half_2d();
        for n in [4u32, 16, 64] {
            let steps = steps_for(n, 2.0);
            let mut increments = vec![0.0; steps * 2];
            let jump_step = n as usize - 1; // increment covering (1-1/n, 1]
            increments[jump_step * 2] = -1.0;
            increments[jump_step * 2 + 1] = -1.0;
            let driver = DriverStream::from_increments(n, 2.0, 2, increments).unwrap();
            let run =
                fast_euler_semimartingale(&q, &[0.0, 0.0], identity_sigma(2), &driver).unwrap();
            let y = StepFunction::new(vec![0.0, 1.0], 2, vec![0.0, 0.0, -1.0, -1.0])
                .unwrap()
                .discretize(n, 2.0)
                .unwrap();
            let sol = fast_scheme(&q, &y).unwrap();
            assert_eq!(run.solution, sol);
            assert_eq!(run.y, y);
        }
    }

    #[test]
    fn euler_run_is_bit_identical_to_fast_scheme_on_its_own_path() {
        let q = symmetric_half_2d();
        let model = DiffusionModel {
            d: 2,
            x0: vec![1.0, 1.0],
            drift: Box::new(|x, out| {
                out[0] = 1.0 - x[0];
                out[1] = 1.0 - x[1];
            }),
            sigma: Box::new(|_, out| {
                out.fill(0.0);
                out[0] = 0.5;
                out[3] = 0.5;
            }),
            lipschitz_hint: 1.0,
        };
        let cfg = WienerConfig {
            seed: 17,
            n_max: 256,
            d: 2,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        for n in [16u32, 64, 256] {
            let run = fast_euler_diffusion(&q, &model, &w, n).unwrap();
            assert!(matches_deterministic_scheme(&q, &run));
        }
    }

    #[test]
    fn one_dimensional_run_matches_running_max_oracle() {
        let q = ReflectionMatrix::zero(1);
        let model = bm_1d_model();
        let cfg = WienerConfig {
            seed: 21,
            n_max: 512,
            d: 1,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        for n in [32u32, 128, 512] {
            let run = fast_euler_diffusion(&q, &model, &w, n).unwrap();
            // With Q = 0 the one-step lag vanishes, so the scheme IS the
            // discrete running-max reflection of the coarse path.
            let coarse = coarsen_path(&w, n).unwrap();
            let oracle = running_max_map_1d(&coarse).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..=run.solution.x.steps() {
                worst = worst.max(vector::sup_norm_diff(
                    run.solution.x.at(i),
                    oracle.x.at(i),
                ));
                worst = worst.max(vector::sup_norm_diff(
                    run.solution.k.at(i),
                    oracle.k.at(i),
                ));
            }
            assert!(worst <= 1e-13, "n = {n}: oracle gap {worst}");
        }
    }

    #[test]
    fn coefficient_failures_are_reported() {
        let q = ReflectionMatrix::zero(1);
        let cfg = WienerConfig {
            seed: 2,
            n_max: 8,
            d: 1,
            horizon: 1.0,
        };
        let w = generate_wiener(&cfg).unwrap();
        let model = DiffusionModel {
            d: 1,
            x0: vec![0.0],
            drift: Box::new(|_, out| out[0] = f64::NAN),
            sigma: Box::new(|_, out| out[0] = 1.0),
            lipschitz_hint: 0.0,
        };
        assert!(matches!(
            fast_euler_diffusion(&q, &model, &w, 8),
            Err(SdeError::NonFiniteCoefficient { step: 0 })
        ));
        let bad_start = DiffusionModel {
            x0: vec![-0.1],
            ..bm_1d_model_fields()
        };
        assert!(matches!(
            fast_euler_diffusion(&q, &bad_start, &w, 8),
            Err(SdeError::StartOutsideOrthant { component: 0, .. })
        ));
    }

    fn bm_1d_model_fields() -> DiffusionModel {
        bm_1d_model()
    }

    #[test]
    fn strong_error_rejects_bad_arguments() {
        let q = ReflectionMatrix::zero(1);
        let model = bm_1d_model();
        let cfg = WienerConfig {
            seed: 1,
            n_max: 64,
            d: 1,
            horizon: 1.0,
        };
        assert!(matches!(
            strong_error(&q, &model, &cfg, &[16, 48], 1, 10),
            Err(SdeError::NotADivisor { n: 48, n_max: 64 })
        ));
        assert!(matches!(
            strong_error(&q, &model, &cfg, &[16], 1, 1),
            Err(SdeError::InsufficientPaths { got: 1 })
        ));
        assert!(matches!(
            strong_error(&q, &model, &cfg, &[], 1, 10),
            Err(SdeError::NoDensities)
        ));
        assert!(matches!(
            strong_error(&q, &model, &cfg, &[16], 0, 10),
            Err(SdeError::ZeroExponent)
        ));
    }

    #[test]
    fn strong_error_at_full_density_is_exactly_zero() {
        let q = ReflectionMatrix::zero(1);
        let model = bm_1d_model();
        let cfg = WienerConfig {
            seed: 33,
            n_max: 64,
            d: 1,
            horizon: 1.0,
        };
        let report = strong_error(&q, &model, &cfg, &[64], 1, 5).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].mean_err_2p, 0.0);
        assert!(report.fit.is_none());
    }

    #[test]
    fn strong_error_is_deterministic_and_monotone() {
        let q = ReflectionMatrix::zero(1);
        let model = bm_1d_model();
        let cfg = WienerConfig {
            seed: 42,
            n_max: 1024,
            d: 1,
            horizon: 1.0,
        };
        let densities = [16u32, 64, 256];
        let a = strong_error(&q, &model, &cfg, &densities, 1, 40).unwrap();
        let b = strong_error(&q, &model, &cfg, &densities, 1, 40).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.mean_err_2p, rb.mean_err_2p);
            assert_eq!(ra.stderr, rb.stderr);
        }
        for pair in a.rows.windows(2) {
            let slack = 2.0 * (pair[0].stderr + pair[1].stderr);
            assert!(
                pair[1].mean_err_2p <= pair[0].mean_err_2p + slack,
                "error grew from n={} to n={}",
                pair[0].n,
                pair[1].n
            );
        }
    }

    #[test]
    fn quadratic_exponent_doubles_the_slope() {
        let q = ReflectionMatrix::zero(1);
        let model = bm_1d_model();
        let cfg = WienerConfig {
            seed: 42,
            n_max: 8192,
            d: 1,
            horizon: 1.0,
        };
        let densities = [16u32, 32, 64, 128, 256, 512, 1024];
        let report = strong_error(&q, &model, &cfg, &densities, 2, 200).unwrap();
        let fit = report.fit.expect("nondegenerate fit");
        assert!(
            (1.5..=2.5).contains(&fit.slope),
            "p = 2 slope {} out of range",
            fit.slope
        );
    }

    #[test]
    fn moment_surrogate_is_stable_in_density() {
        let q = symmetric_half_2d();
        let model = DiffusionModel {
            d: 2,
            x0: vec![1.0, 1.0],
            drift: Box::new(|x, out| {
                out[0] = 1.0 - x[0];
                out[1] = 1.0 - x[1];
            }),
            sigma: Box::new(|_, out| {
                out.fill(0.0);
                out[0] = 0.5;
                out[3] = 0.5;
            }),
            lipschitz_hint: 1.0,
        };
        let cfg = WienerConfig {
            seed: 42,
            n_max: 256,
            d: 2,
            horizon: 1.0,
        };
        let rows = moment_surrogate(&q, &model, &cfg, &[64, 256], 60).unwrap();
        assert_eq!(rows.len(), 2);
        let spread = (rows[1].mean - rows[0].mean).abs() / rows[0].mean;
        assert!(spread < 0.2, "moment spread {spread}");
        for row in &rows {
            assert!(row.mean.is_finite() && row.mean > 0.0);
        }
    }
}
