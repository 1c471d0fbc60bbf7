//! Dense complex linear algebra.
//!
//! [`CMatrix`] is a column-major `nalgebra` matrix of `Complex64`. The routines
//! here add the conventions the rest of the crate relies on: eigenvalues and
//! singular values sorted in descending order, Hermitian inputs symmetrized
//! before factorization, and a relative positive-definiteness test.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-major complex matrix.
pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest admissible ratio `λ_min / λ_max` for positive definiteness.
pub const PD_RATIO: f64 = 1e-12;
/// Singular values above `RANK_TOL · σ_max` count toward numerical rank.
pub const RANK_TOL: f64 = 1e-9;

#[inline]
pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Diagonal matrix with real entries.
pub fn real_diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { cx(values[i], 0.0) } else { cx(0.0, 0.0) })
}

/// Kronecker product with block `(l, k)` equal to `a[l,k] · b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `Re Tr(Aᴴ B)`, the real inner product used for gradients.
pub fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn frob(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// `‖A − Aᴴ‖_F / ‖A‖_F`, zero for the zero matrix.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let scale = frob(a);
    if scale == 0.0 {
        return 0.0;
    }
    frob(&(a - a.adjoint())) / scale
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * cx(0.5, 0.0)
}

fn require_hermitian(a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(hermitian_part(a))
}

/// Eigendecomposition `A = U diag(λ) Uᴴ` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEvd {
    pub vectors: CMatrix,
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
}

impl HermitianEvd {
    pub fn reconstruct(&self) -> CMatrix {
        &self.vectors * real_diag(&self.values) * self.vectors.adjoint()
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn permute_columns(m: &CMatrix, order: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

pub fn hermitian_evd(a: &CMatrix) -> Result<HermitianEvd> {
    let h = require_hermitian(a)?;
    let eig = h.symmetric_eigen();
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&raw);
    Ok(HermitianEvd {
        vectors: permute_columns(&eig.eigenvectors, &order),
        values: order.iter().map(|&k| raw[k]).collect(),
    })
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let h = require_hermitian(a)?;
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Thin singular value decomposition `A = U diag(σ) Vᴴ`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    /// Singular values, descending; length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        &self.u * real_diag(&self.singular_values) * self.v.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Svd {
    let dec = a.clone().svd(true, true);
    let raw: Vec<f64> = dec.singular_values.iter().copied().collect();
    let order = descending_order(&raw);
    let u = dec.u.expect("left singular vectors requested");
    let v = dec.v_t.expect("right singular vectors requested").adjoint();
    Svd {
        u: permute_columns(&u, &order),
        singular_values: order.iter().map(|&k| raw[k]).collect(),
        v: permute_columns(&v, &order),
    }
}

/// Full `m × m` left singular basis of an `m × n` matrix together with
/// `m` singular values (zero-padded), descending.
pub fn left_singular_basis(a: &CMatrix) -> (CMatrix, Vec<f64>) {
    let m = a.nrows();
    let padded = if a.ncols() >= m {
        a.clone()
    } else {
        let mut p = zeros(m, m);
        p.view_mut((0, 0), (m, a.ncols())).copy_from(a);
        p
    };
    let dec = svd(&padded);
    let mut values = dec.singular_values;
    values.resize(m, 0.0);
    (dec.u.columns(0, m).into_owned(), values)
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Count of singular values above `RANK_TOL · σ_max`.
pub fn numerical_rank(a: &CMatrix) -> usize {
    rank_from_values(&singular_values(a))
}

pub fn rank_from_values(s: &[f64]) -> usize {
    let max = s.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_TOL * max).count()
}

fn require_pd(h: &CMatrix) -> Result<()> {
    let values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > PD_RATIO * max) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Cholesky factor of the Hermitian part of `a`.
pub(crate) fn cholesky(a: &CMatrix) -> Result<Cholesky<Complex64, Dyn>> {
    hermitian_part(a).cholesky().ok_or(Error::NotPositiveDefinite)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let h = require_hermitian(a)?;
    if b.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            h.nrows()
        )));
    }
    require_pd(&h)?;
    let chol = h.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// `log₂|A|` for Hermitian positive-definite `A`.
pub fn logdet_hpd(a: &CMatrix) -> Result<f64> {
    let h = require_hermitian(a)?;
    require_pd(&h)?;
    let chol = h.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol_logdet(&chol) / std::f64::consts::LN_2)
}

/// Natural-log determinant from a Cholesky factor.
pub(crate) fn chol_logdet(chol: &Cholesky<Complex64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// `ln|det A|` of a general square matrix via LU.
pub(crate) fn ln_abs_det(a: &CMatrix) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

/// Permutation `T` of size `pq` with `Tᵀ (X ⊗ Y) T = Y ⊗ X` for `X: p×p`, `Y: q×q`.
pub fn commutation(p: usize, q: usize) -> CMatrix {
    let n = p * q;
    let mut t = zeros(n, n);
    for a in 0..p {
        for b in 0..q {
            t[(a * q + b, b * p + a)] = cx(1.0, 0.0);
        }
    }
    t
}

/// Unnormalized `n`-point DFT matrix, `(Q)_{l,k} = e^{−j2πlk/n}`.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |l, k| {
        let phase = -2.0 * std::f64::consts::PI * ((l * k) % n) as f64 / n as f64;
        Complex64::from_polar(1.0, phase)
    })
}

/// Rows of `a` listed in `rows`, in that order.
pub fn select_rows(a: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_cols(a: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// 0/1 matrix `S` with `S A = select_rows(A, rows)` for `A` with `n` rows.
pub fn selection_matrix(rows: &[usize], n: usize) -> CMatrix {
    let mut s = zeros(rows.len(), n);
    for (i, &r) in rows.iter().enumerate() {
        s[(i, r)] = cx(1.0, 0.0);
    }
    s
}

/// Row-major JSON representation: `{"rows", "cols", "data": [[re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        MatrixRecord { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.rows == 0 || self.cols == 0 || self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "matrix record declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            cx(re, im)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
    }

    #[test]
    fn kron_swap_block_structure() {
        let x = CMatrix::from_row_slice(2, 2, &[cx(0., 0.), cx(1., 0.), cx(1., 0.), cx(0., 0.)]);
        let k = kron(&x, &identity(2));
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i < 2) != (j < 2) && i % 2 == j % 2 { 1.0 } else { 0.0 };
                assert_eq!(k[(i, j)], cx(expect, 0.0));
            }
        }
    }

    #[test]
    fn evd_of_two_by_two_correlation() {
        let a = CMatrix::from_row_slice(2, 2, &[cx(1., 0.), cx(0.5, 0.), cx(0.5, 0.), cx(1., 0.)]);
        let e = hermitian_evd(&a).unwrap();
        assert!((e.values[0] - 1.5).abs() < 1e-14);
        assert!((e.values[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn evd_rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[cx(1., 0.), cx(2., 0.), cx(0., 0.), cx(1., 0.)]);
        assert!(matches!(hermitian_evd(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn svd_of_diagonal_is_sorted() {
        let a = real_diag(&[1.0, 3.0, 2.0]);
        let s = svd(&a);
        assert_eq!(s.singular_values.len(), 3);
        for (got, want) in s.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_identity_and_scaled_identity() {
        let b = CMatrix::from_fn(3, 2, |i, j| cx(i as f64, j as f64 - 1.0));
        assert!(frob(&(solve_hpd(&identity(3), &b).unwrap() - &b)) < 1e-15);
        let x = solve_hpd(&(identity(2) * cx(2.0, 0.0)), &identity(2)).unwrap();
        assert!(frob(&(x - identity(2) * cx(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn solve_rejects_indefinite() {
        let a = real_diag(&[1.0, -1.0]);
        assert!(matches!(solve_hpd(&a, &identity(2)), Err(Error::NotPositiveDefinite)));
        assert!(matches!(logdet_hpd(&real_diag(&[1.0, 0.0])), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn logdet_trivial_values() {
        assert!(logdet_hpd(&identity(4)).unwrap().abs() < 1e-15);
        assert!((logdet_hpd(&(identity(3) * cx(2.0, 0.0))).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn commutation_small_cases() {
        assert_eq!(commutation(1, 1), identity(1));
        assert_eq!(commutation(2, 1), identity(2));
    }

    #[test]
    fn dft_small_cases() {
        assert_eq!(dft_matrix(1), identity(1));
        let q = dft_matrix(2);
        assert!((q[(1, 1)] - cx(-1.0, 0.0)).norm() < 1e-15);
        let q4 = dft_matrix(4);
        assert!(frob(&(&q4 * q4.adjoint() - identity(4) * cx(4.0, 0.0))) < 1e-12);
    }

    #[test]
    fn matrix_record_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| cx(i as f64 + 0.25, -(j as f64)));
        let rec = MatrixRecord::from_matrix(&m);
        assert_eq!(rec.data[1], [0.25, -1.0]);
        assert_eq!(rec.to_matrix().unwrap(), m);
        let bad = MatrixRecord { rows: 2, cols: 2, data: vec![[0.0, 0.0]] };
        assert!(bad.to_matrix().is_err());
    }
}
