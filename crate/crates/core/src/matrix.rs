//! Reflection matrices for the orthant Skorokhod problem.
//!
//! The boundary behaviour of the reflected process is encoded by a square
//! matrix `Q` with nonnegative entries and zero diagonal; the reflection
//! operator applied to the pushing term is `(I - Qᵀ)`. Every contraction
//! argument in this crate runs through
//!
//! ```text
//!   col_norm(Q) = max_j Σ_i q_ij   (the induced max-abs norm of Qᵀ)
//! ```
//!
//! so construction rejects matrices unless **both** the maximum row sum and
//! the maximum column sum are strictly below one. That is slightly stronger
//! than the minimum needed for existence, but it makes every iteration in
//! this crate a contraction with an explicit, certifiable rate.

use thiserror::Error;

/// Validation failures for candidate reflection matrices.
#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not square: expected {expected} entries for dimension {d}, got {got}")]
    NotSquare { d: usize, expected: usize, got: usize },
    #[error("entry q[{i}][{j}] = {value} is not finite")]
    NonFiniteEntry { i: usize, j: usize, value: f64 },
    #[error("entry q[{i}][{j}] = {value} is negative")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("diagonal entry q[{i}][{i}] = {value} must be zero")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("{which} norm of Q is {value}; spectral condition requires < 1")]
    NormNotSubunit { which: &'static str, value: f64 },
}

/// Parse failures for the plain-text matrix format.
#[derive(Debug, Error)]
pub enum MatrixParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] MatrixError),
}

/// A validated reflection matrix `Q`.
///
/// Invariants held after construction: square, entries finite and
/// nonnegative, zero diagonal, `row_norm < 1` and `col_norm < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionMatrix {
    d: usize,
    entries: Vec<f64>, // row-major, d*d
    row_norm: f64,
    col_norm: f64,
}

impl ReflectionMatrix {
    /// Validates a row-major entry buffer and freezes it into a matrix.
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self, MatrixError> {
        if entries.len() != d * d {
            return Err(MatrixError::NotSquare {
                d,
                expected: d * d,
                got: entries.len(),
            });
        }
        for i in 0..d {
            for j in 0..d {
                let value = entries[i * d + j];
                if !value.is_finite() {
                    return Err(MatrixError::NonFiniteEntry { i, j, value });
                }
                if value < 0.0 {
                    return Err(MatrixError::NegativeEntry { i, j, value });
                }
                if i == j && value != 0.0 {
                    return Err(MatrixError::NonzeroDiagonal { i, value });
                }
            }
        }
        let row_norm = (0..d)
            .map(|i| entries[i * d..(i + 1) * d].iter().sum::<f64>())
            .fold(0.0_f64, f64::max);
        let col_norm = (0..d)
            .map(|j| (0..d).map(|i| entries[i * d + j]).sum::<f64>())
            .fold(0.0_f64, f64::max);
        if row_norm >= 1.0 {
            return Err(MatrixError::NormNotSubunit {
                which: "row",
                value: row_norm,
            });
        }
        if col_norm >= 1.0 {
            return Err(MatrixError::NormNotSubunit {
                which: "column",
                value: col_norm,
            });
        }
        Ok(ReflectionMatrix {
            d,
            entries,
            row_norm,
            col_norm,
        })
    }

    /// Builds from nested rows; each row must have length `rows.len()`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let d = rows.len();
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(MatrixError::NotSquare {
                    d,
                    expected: d * d,
                    got: d * row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(d, entries)
    }

    /// The zero matrix (normal reflection) in dimension `d`.
    pub fn zero(d: usize) -> Self {
        Self::new(d, vec![0.0; d * d]).expect("zero matrix is always valid")
    }

    /// Parses the plain-text format: first line the dimension `d`, then `d`
    /// lines of `d` whitespace-separated entries.
    pub fn parse_text(src: &str) -> Result<Self, MatrixParseError> {
        let mut lines = src
            .lines()
            .enumerate()
            .map(|(idx, l)| (idx + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (dline_no, dline) = lines.next().ok_or(MatrixParseError::Malformed {
            line: 1,
            message: "empty input, expected dimension line".into(),
        })?;
        let d: usize = dline.parse().map_err(|_| MatrixParseError::Malformed {
            line: dline_no,
            message: format!("expected dimension, got {dline:?}"),
        })?;
        let mut entries = Vec::with_capacity(d * d);
        for row in 0..d {
            let (line_no, line) = lines.next().ok_or(MatrixParseError::Malformed {
                line: dline_no + row + 1,
                message: format!("expected {d} matrix rows, found {row}"),
            })?;
            let mut count = 0;
            for (col, tok) in line.split_whitespace().enumerate() {
                let v: f64 = tok.parse().map_err(|_| MatrixParseError::Malformed {
                    line: line_no,
                    message: format!("row {row}, column {col}: bad number {tok:?}"),
                })?;
                entries.push(v);
                count += 1;
            }
            if count != d {
                return Err(MatrixParseError::Malformed {
                    line: line_no,
                    message: format!("row {row} has {count} entries, expected {d}"),
                });
            }
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(MatrixParseError::Malformed {
                line: line_no,
                message: "trailing content after matrix rows".into(),
            });
        }
        Ok(Self::new(d, entries)?)
    }

    /// Serializes in the same plain-text format accepted by [`parse_text`].
    ///
    /// [`parse_text`]: ReflectionMatrix::parse_text
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.d);
        for i in 0..self.d {
            let row: Vec<String> = (0..self.d)
                .map(|j| format!("{:.16e}", self.entry(i, j)))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// Maximum row sum `max_i Σ_j q_ij`.
    pub fn row_norm(&self) -> f64 {
        self.row_norm
    }

    /// Maximum column sum `max_j Σ_i q_ij`; equals the operator norm of `Qᵀ`
    /// for the max-abs vector norm, and is the contraction rate of every
    /// fixed-point iteration in this crate.
    pub fn col_norm(&self) -> f64 {
        self.col_norm
    }

    /// `out = Qᵀ v`.
    pub fn qt_mul_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d;
        assert_eq!(v.len(), d, "qt_mul_into: vector length mismatch");
        assert_eq!(out.len(), d, "qt_mul_into: output length mismatch");
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += self.entries[i * d + j] * v[i];
            }
            out[j] = acc;
        }
    }

    /// `Qᵀ v`, allocating.
    pub fn qt_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.qt_mul_into(v, &mut out);
        out
    }

    /// `out = (I - Qᵀ) v`, the reflection operator applied to `v`.
    pub fn reflect_into(&self, v: &[f64], out: &mut [f64]) {
        self.qt_mul_into(v, out);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = x - *o;
        }
    }

    /// `(I - Qᵀ) v`, allocating.
    pub fn reflect(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.reflect_into(v, &mut out);
        out
    }
}

/// The two-dimensional matrix with `q_12 = q_21 = 1/2`, the standard worked
/// example for symmetric oblique reflection. Used by tests and scenarios.
pub fn symmetric_half_2d() -> ReflectionMatrix {
    ReflectionMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]])
        .expect("the symmetric half matrix is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn accepts_paper_matrix() {
        let q = symmetric_half_2d();
        assert_eq!(q.dim(), 2);
        assert_eq!(q.row_norm(), 0.5);
        assert_eq!(q.col_norm(), 0.5);
    }

    #[test]
    fn rejects_negative_entry() {
        let err = ReflectionMatrix::from_rows(&[vec![0.0, -0.1], vec![0.2, 0.0]]).unwrap_err();
        assert_eq!(
            err,
            MatrixError::NegativeEntry {
                i: 0,
                j: 1,
                value: -0.1
            }
        );
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let err = ReflectionMatrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert_eq!(err, MatrixError::NonzeroDiagonal { i: 0, value: 0.1 });
    }

    #[test]
    fn rejects_row_norm_at_one() {
        let err = ReflectionMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(
            err,
            MatrixError::NormNotSubunit { which: "row", .. }
        ));
    }

    #[test]
    fn rejects_column_norm_at_one() {
        // Row sums are 0.6 and 0.5, but column 0 sums to 1.1.
        let err = ReflectionMatrix::from_rows(&[
            vec![0.0, 0.6, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![0.6, 0.0, 0.0],
        ])
        .unwrap_err();
        assert!(matches!(
            err,
            MatrixError::NormNotSubunit {
                which: "column",
                ..
            }
        ));
    }

    #[test]
    fn rejects_non_square() {
        let err = ReflectionMatrix::new(2, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, MatrixError::NotSquare { .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let err = ReflectionMatrix::from_rows(&[vec![0.0, f64::NAN], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::NonFiniteEntry { i: 0, j: 1, .. }));
    }

    #[test]
    fn qt_mul_transposes() {
        let q = ReflectionMatrix::from_rows(&[vec![0.0, 0.3], vec![0.1, 0.0]]).unwrap();
        // Qᵀ = [[0, 0.1], [0.3, 0]]
        let v = q.qt_mul(&[2.0, 4.0]);
        assert_eq!(v, vec![0.4, 0.6]);
        let r = q.reflect(&[2.0, 4.0]);
        assert_eq!(r, vec![1.6, 3.4]);
    }

    #[test]
    fn text_round_trip() {
        let q = symmetric_half_2d();
        let text = q.to_text();
        let back = ReflectionMatrix::parse_text(&text).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn parse_reports_positions() {
        let err = ReflectionMatrix::parse_text("2\n0 x\n0 0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "unexpected message: {msg}");
        assert!(msg.contains("column 1"), "unexpected message: {msg}");

        let err = ReflectionMatrix::parse_text("2\n0 0.5\n").unwrap_err();
        assert!(err.to_string().contains("expected 2 matrix rows"));
    }

    fn random_valid_matrix(rng: &mut impl rand::Rng, d: usize, target: f64) -> ReflectionMatrix {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    entries[i * d + j] = rng.gen_range(0.0..1.0);
                }
            }
        }
        let row = (0..d)
            .map(|i| entries[i * d..(i + 1) * d].iter().sum::<f64>())
            .fold(0.0_f64, f64::max);
        let col = (0..d)
            .map(|j| (0..d).map(|i| entries[i * d + j]).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let worst = row.max(col);
        if worst > 0.0 {
            let scale = target / worst;
            for e in &mut entries {
                *e *= scale;
            }
        }
        ReflectionMatrix::new(d, entries).expect("scaled matrix is valid")
    }

    proptest! {
        // sup_norm(Qᵀ z) <= col_norm(Q) * sup_norm(z): the contraction bound
        // every solver relies on.
        #[test]
        fn qt_contraction_bound(seed in 0u64..1000, d in 1usize..6) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let q = random_valid_matrix(&mut rng, d, 0.85);
            let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let qtz = q.qt_mul(&z);
            prop_assert!(
                vector::sup_norm(&qtz) <= q.col_norm() * vector::sup_norm(&z) + 1e-12
            );
        }
    }
}
