//! Small dense linear algebra kernel.
//!
//! Everything here is row-major `f64`. Vectors are plain slices and are
//! treated as row vectors when multiplied from the left (`x * A`) and as
//! column vectors when multiplied from the right (`A * x`), matching the
//! conventions of Markov chain generators.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{QbdError, Result};

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{:>12.6} ", self[(r, c)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_row_major(1, 1, vec![v]).expect("1x1")
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(QbdError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    /// Column vector (n x 1).
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Row vector (1 x n).
    pub fn row(v: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row_slice(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(QbdError::Dimension(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(QbdError::Dimension(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A * x` with `x` a column vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        (0..self.rows)
            .map(|r| self.row_slice(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x * A` with `x` a row vector.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "vec_mul dimension");
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row_slice(r)) {
                *o += xr * a;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row_slice(r).iter().sum()).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row_slice(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row_slice(r));
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            let src = (r0 + r) * self.cols + c0;
            out.data[r * cols..(r + 1) * cols].copy_from_slice(&self.data[src..src + cols]);
        }
        out
    }

    pub fn inverse(&self) -> Result<Self> {
        Lu::factor(self)?.inverse()
    }

    pub fn powi(&self, k: usize) -> Result<Self> {
        if !self.is_square() {
            return Err(QbdError::Dimension("powi of non-square matrix".into()));
        }
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self)?;
        }
        Ok(out)
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(QbdError::Dimension(format!("LU of {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tiny = scale * f64::EPSILON * (n.max(1) as f64);
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|r| (r, lu[r * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tiny || pmax == 0.0 {
                return Err(QbdError::SingularMatrix { pivot: k });
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in k + 1..n {
                let factor = lu[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                lu[r * n + k] = factor;
                for c in k + 1..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            x[r] -= row.iter().zip(&x[..r]).map(|(l, v)| l * v).sum::<f64>();
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let s = x[r] - row.iter().zip(&x[r + 1..]).map(|(u, v)| u * v).sum::<f64>();
            x[r] = s / self.lu[r * n + r];
        }
        x
    }

    /// Solves `x A = b` for a row vector `x`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_left(&self, b: &[f64]) -> Vec<f64> {
        // A = P^T L U, so x P^T L U = b: solve y U = b, z L = y, x = z P.
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for c in 0..n {
            let mut s = y[c];
            for r in 0..c {
                s -= y[r] * self.lu[r * n + c];
            }
            y[c] = s / self.lu[c * n + c];
        }
        for c in (0..n).rev() {
            let mut s = y[c];
            for r in c + 1..n {
                s -= y[r] * self.lu[r * n + c];
            }
            y[c] = s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows, self.n);
        let mut out = DenseMatrix::zeros(b.rows, b.cols);
        let mut col = vec![0.0; b.rows];
        for c in 0..b.cols {
            for r in 0..b.rows {
                col[r] = b[(r, c)];
            }
            let x = self.solve(&col);
            for r in 0..b.rows {
                out[(r, c)] = x[r];
            }
        }
        out
    }

    /// Solves `X A = B` row by row.
    pub fn solve_left_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.cols, self.n);
        let mut out = DenseMatrix::zeros(b.rows, b.cols);
        for r in 0..b.rows {
            let x = self.solve_left(b.row_slice(r));
            out.data[r * b.cols..(r + 1) * b.cols].copy_from_slice(&x);
        }
        out
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        Ok(self.solve_matrix(&DenseMatrix::identity(self.n)))
    }
}

/// Solves `a x = b` with partial pivoting.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows != b.len() {
        return Err(QbdError::Dimension(format!(
            "solve: {}x{} system with rhs of length {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    Ok(Lu::factor(a)?.solve(b))
}

/// Solves `a X = b` for a matrix right-hand side.
pub fn solve_dense_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(QbdError::Dimension("solve: rhs rows".into()));
    }
    Ok(Lu::factor(a)?.solve_matrix(b))
}

pub fn kron_product(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = DenseMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a[(ar, ac)];
            if s == 0.0 {
                continue;
            }
            for br in 0..b.rows {
                let dst = (ar * b.rows + br) * cols + ac * b.cols;
                for (o, v) in out.data[dst..dst + b.cols].iter_mut().zip(b.row_slice(br)) {
                    *o = s * v;
                }
            }
        }
    }
    out
}

/// `a ⊕ b = a ⊗ I + I ⊗ b`.
pub fn kron_sum(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || !b.is_square() {
        return Err(QbdError::Dimension(format!(
            "Kronecker sum needs square operands, got {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let left = kron_product(a, &DenseMatrix::identity(b.rows));
    let right = kron_product(&DenseMatrix::identity(a.rows), b);
    left.add(&right)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_chain<'a, I>(factors: I) -> DenseMatrix
where
    I: IntoIterator<Item = &'a DenseMatrix>,
{
    factors
        .into_iter()
        .fold(DenseMatrix::scalar(1.0), |acc, f| kron_product(&acc, f))
}

const SPECTRAL_MAX_ITER: usize = 5_000;
const SPECTRAL_MAX_SQUARINGS: usize = 6;

/// Dominant eigenvalue modulus.
///
/// Power iteration seeded with the all-ones vector. When the plain iteration
/// stalls the matrix is squared (`sp(A) = sp(A^2)^(1/2)`) to widen the
/// spectral gap; a two-term recurrence fit resolves a dominant complex pair.
pub fn spectral_radius(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(QbdError::Dimension("spectral radius of non-square matrix".into()));
    }
    if a.rows == 0 {
        return Ok(0.0);
    }
    // Invariant: m = A^power / exp(log_scale).
    let mut m = a.clone();
    let mut log_scale = 0.0_f64;
    let mut power = 1.0_f64;
    let mut last = f64::NAN;
    for _ in 0..=SPECTRAL_MAX_SQUARINGS {
        match power_iterate(&m, tol) {
            PowerOutcome::Converged(0.0) => return Ok(0.0),
            PowerOutcome::Converged(v) => return Ok(((v.ln() + log_scale) / power).exp()),
            PowerOutcome::Stalled(v) => last = ((v.ln() + log_scale) / power).exp(),
        }
        let sc = m.max_abs();
        if sc == 0.0 {
            return Ok(0.0);
        }
        let normed = m.scale(1.0 / sc);
        m = normed.matmul(&normed)?;
        log_scale = 2.0 * (log_scale + sc.ln());
        power *= 2.0;
    }
    Err(QbdError::SpectralNonConvergence { estimate: last })
}

enum PowerOutcome {
    Converged(f64),
    Stalled(f64),
}

fn power_iterate(a: &DenseMatrix, tol: f64) -> PowerOutcome {
    let mut x = vec![1.0; a.rows];
    let mut prev = f64::NAN;
    let mut pair_prev = f64::NAN;
    for it in 0..SPECTRAL_MAX_ITER {
        let y = a.mul_vec(&x);
        let est = max_abs_vec(&y);
        if est == 0.0 {
            return PowerOutcome::Converged(0.0);
        }
        if it > 2 && (est - prev).abs() <= tol * est {
            return PowerOutcome::Converged(est);
        }
        prev = est;
        if it >= 50 && it % 10 == 0 {
            let z = a.mul_vec(&y);
            if let Some(m) = two_term_modulus(&x, &y, &z) {
                if (m - pair_prev).abs() <= tol * m {
                    return PowerOutcome::Converged(m);
                }
                pair_prev = m;
            }
        }
        x = y.into_iter().map(|v| v / est).collect();
    }
    PowerOutcome::Stalled(prev)
}

/// Fits `x2 ≈ p x1 + q x0` and returns the largest root modulus of
/// `z^2 - p z - q`.
fn two_term_modulus(x0: &[f64], x1: &[f64], x2: &[f64]) -> Option<f64> {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (a11, a12, a22) = (dot(x1, x1), dot(x1, x0), dot(x0, x0));
    let (b1, b2) = (dot(x1, x2), dot(x0, x2));
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return None;
    }
    let p = (b1 * a22 - b2 * a12) / det;
    let q = (a11 * b2 - a12 * b1) / det;
    let disc = p * p + 4.0 * q;
    if disc < 0.0 {
        Some((-q).sqrt())
    } else {
        let s = disc.sqrt();
        Some(((p + s) / 2.0).abs().max(((p - s) / 2.0).abs()))
    }
}

/// A (sub-)generator that can act on column vectors.
pub trait GeneratorAction {
    fn dim(&self) -> usize;
    /// Largest total outflow rate, `max |q_ii|`.
    fn uniformization_rate(&self) -> f64;
    /// `out = Q x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl GeneratorAction for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn uniformization_rate(&self) -> f64 {
        (0..self.rows).map(|i| self[(i, i)].abs()).fold(0.0, f64::max)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_slice(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Largest `Λ dt` handled in a single uniformization step; keeps the
/// Poisson weights well inside the normal floating point range.
const MAX_STEP_MASS: f64 = 64.0;

/// `exp(Q t) v` by uniformization.
///
/// With `Λ = max |q_ii|` and `P = I + Q/Λ`, sums Poisson-weighted powers
/// `P^k v` until the remaining Poisson mass drops below `tol`. Long horizons
/// are split into sub-steps of at most `MAX_STEP_MASS` expected jumps.
pub fn expm_action<G: GeneratorAction + ?Sized>(q: &G, v: &[f64], t: f64, tol: f64) -> Vec<f64> {
    assert_eq!(v.len(), q.dim());
    let rate = q.uniformization_rate();
    if t == 0.0 || rate == 0.0 {
        return v.to_vec();
    }
    let total = rate * t;
    let steps = (total / MAX_STEP_MASS).ceil().max(1.0) as usize;
    let step_mass = total / steps as f64;
    let step_tol = tol / steps as f64;

    let n = v.len();
    let mut current = v.to_vec();
    let mut term = vec![0.0; n];
    let mut qx = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..steps {
        term.copy_from_slice(&current);
        let mut weight = (-step_mass).exp();
        let mut cumulative = weight;
        for (a, x) in acc.iter_mut().zip(&term) {
            *a = weight * x;
        }
        let mut k = 0usize;
        while 1.0 - cumulative > step_tol && k < 100_000 {
            k += 1;
            q.apply(&term, &mut qx);
            for (x, d) in term.iter_mut().zip(&qx) {
                *x += d / rate;
            }
            weight *= step_mass / k as f64;
            cumulative += weight;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
        }
        std::mem::swap(&mut current, &mut acc);
    }
    current
}

/// Block tridiagonal matrix with possibly different block sizes per level.
///
/// `diag[l]` is level `l` to itself, `upper[l]` is level `l` to `l + 1`,
/// `lower[l]` is level `l + 1` to `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub diag: Vec<DenseMatrix>,
    pub upper: Vec<DenseMatrix>,
    pub lower: Vec<DenseMatrix>,
}

impl BlockTridiagonal {
    pub fn new(diag: Vec<DenseMatrix>, upper: Vec<DenseMatrix>, lower: Vec<DenseMatrix>) -> Result<Self> {
        let levels = diag.len();
        if levels == 0 || upper.len() + 1 != levels || lower.len() + 1 != levels {
            return Err(QbdError::Dimension(format!(
                "block tridiagonal with {} diagonal, {} upper, {} lower blocks",
                levels,
                upper.len(),
                lower.len()
            )));
        }
        for (l, d) in diag.iter().enumerate() {
            if !d.is_square() {
                return Err(QbdError::Dimension(format!("diagonal block {l} not square")));
            }
        }
        for l in 0..levels - 1 {
            let (n0, n1) = (diag[l].rows, diag[l + 1].rows);
            if upper[l].rows != n0 || upper[l].cols != n1 {
                return Err(QbdError::Dimension(format!("upper block {l}")));
            }
            if lower[l].rows != n1 || lower[l].cols != n0 {
                return Err(QbdError::Dimension(format!("lower block {l}")));
            }
        }
        Ok(Self { diag, upper, lower })
    }

    pub fn levels(&self) -> usize {
        self.diag.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.diag.iter().map(DenseMatrix::rows).collect()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.levels() + 1);
        let mut acc = 0;
        offs.push(0);
        for d in &self.diag {
            acc += d.rows;
            offs.push(acc);
        }
        offs
    }

    pub fn dim(&self) -> usize {
        self.diag.iter().map(DenseMatrix::rows).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let offs = self.offsets();
        let mut out = DenseMatrix::zeros(self.dim(), self.dim());
        for l in 0..self.levels() {
            out.set_block(offs[l], offs[l], &self.diag[l]);
            if l + 1 < self.levels() {
                out.set_block(offs[l], offs[l + 1], &self.upper[l]);
                out.set_block(offs[l + 1], offs[l], &self.lower[l]);
            }
        }
        out
    }

    /// `M x` for a column vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let offs = self.offsets();
        let mut out = vec![0.0; self.dim()];
        for l in 0..self.levels() {
            let dst = &mut out[offs[l]..offs[l + 1]];
            add_into(dst, &self.diag[l].mul_vec(&x[offs[l]..offs[l + 1]]));
            if l + 1 < self.levels() {
                add_into(dst, &self.upper[l].mul_vec(&x[offs[l + 1]..offs[l + 2]]));
            }
            if l > 0 {
                add_into(dst, &self.lower[l - 1].mul_vec(&x[offs[l - 1]..offs[l]]));
            }
        }
        out
    }

    /// `x M` for a row vector.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        let offs = self.offsets();
        let mut out = vec![0.0; self.dim()];
        for l in 0..self.levels() {
            let xl = &x[offs[l]..offs[l + 1]];
            add_into(&mut out[offs[l]..offs[l + 1]], &self.diag[l].vec_mul(xl));
            if l + 1 < self.levels() {
                add_into(&mut out[offs[l + 1]..offs[l + 2]], &self.upper[l].vec_mul(xl));
            }
            if l > 0 {
                add_into(&mut out[offs[l - 1]..offs[l]], &self.lower[l - 1].vec_mul(xl));
            }
        }
        out
    }

    /// Solves `M x = b` by block forward elimination, eliminating the level
    /// below from the top down. Suitable for (negated) nonsingular M-matrix
    /// structure, where no inter-block pivoting is required.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let offs = self.offsets();
        let levels = self.levels();
        // Schur complements S_l = D_l - L_{l-1} S_{l-1}^{-1} U_{l-1}.
        let mut factors: Vec<Lu> = Vec::with_capacity(levels);
        let mut rhs: Vec<Vec<f64>> = Vec::with_capacity(levels);
        let mut schur = self.diag[0].clone();
        let mut r = b[offs[0]..offs[1]].to_vec();
        for l in 0..levels {
            let lu = Lu::factor(&schur)?;
            if l + 1 < levels {
                let next_d = &self.diag[l + 1];
                let coupling = lu.solve_matrix(&self.upper[l]);
                let low = &self.lower[l];
                schur = next_d.sub(&low.matmul(&coupling)?)?;
                let y = lu.solve(&r);
                let mut next_r = b[offs[l + 1]..offs[l + 2]].to_vec();
                for (o, v) in next_r.iter_mut().zip(low.mul_vec(&y)) {
                    *o -= v;
                }
                rhs.push(r);
                r = next_r;
            } else {
                rhs.push(r.clone());
            }
            factors.push(lu);
        }
        let mut x = vec![0.0; self.dim()];
        for l in (0..levels).rev() {
            let mut rl = rhs[l].clone();
            if l + 1 < levels {
                let above = self.upper[l].mul_vec(&x[offs[l + 1]..offs[l + 2]]);
                for (o, v) in rl.iter_mut().zip(above) {
                    *o -= v;
                }
            }
            let xl = factors[l].solve(&rl);
            x[offs[l]..offs[l + 1]].copy_from_slice(&xl);
        }
        Ok(x)
    }
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
