//! Small dense complex linear algebra.
//!
//! Every space in this crate is at most four-dimensional per party, so all
//! storage is dense and row-major. [`Tensor4`] holds a two-party operator
//! `T^{a1 b1}_{a2 b2}`, stored as the joint `(dim_a*dim_b)`-square matrix with
//! row `(a1, b1)` and column `(a2, b2)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Default relative tolerance for SVD rank decisions.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// 2x2 matrix from `[[a, b], [c, d]]`.
    pub fn from_2x2(m: [[C64; 2]; 2]) -> Self {
        Self { rows: 2, cols: 2, data: vec![m[0][0], m[0][1], m[1][0], m[1][1]] }
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Result<Self> {
        let data = u.iter().flat_map(|a| v.iter().map(move |b| a * b.conj())).collect();
        Self::from_rows(u.len(), v.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self { rows: self.cols, cols: self.rows, data: self.data.clone() };
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
    pub fn hermiticity_deficit(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "apply",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch { op: "matmul", left: a.shape(), right: b.shape() });
    }
    let mut out = CMatrix::zeros(a.rows, b.cols)?;
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            for j in 0..b.cols {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(out)
}

pub fn trace(a: &CMatrix) -> Result<C64> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.shape()));
    }
    Ok((0..a.rows).map(|i| a[(i, i)]).sum())
}

/// `Tr(m_1 m_2 ... m_n)`.
pub fn trace_of_product(chain: &[&CMatrix]) -> Result<C64> {
    let (first, rest) = chain
        .split_first()
        .ok_or_else(|| Error::Shape("empty product chain".into()))?;
    let mut acc = (*first).clone();
    for m in rest {
        acc = matmul(&acc, m)?;
    }
    trace(&acc)
}

/// Two-party operator with entries `T^{a1 b1}_{a2 b2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    dim_a: usize,
    dim_b: usize,
    data: Vec<C64>,
    #[serde(default)]
    hermitian: bool,
}

impl Tensor4 {
    pub fn zeros(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::Shape(format!("party dimensions must be positive, got {dim_a}, {dim_b}")));
        }
        let n = dim_a * dim_a * dim_b * dim_b;
        Ok(Self { dim_a, dim_b, data: vec![C64::new(0.0, 0.0); n], hermitian: false })
    }

    pub fn identity(dim_a: usize, dim_b: usize) -> Result<Self> {
        let joint = CMatrix::identity(dim_a * dim_b)?;
        let mut t = Self::from_joint_matrix(&joint, dim_a, dim_b)?;
        t.hermitian = true;
        Ok(t)
    }

    /// Build from the joint operator matrix (row `(a1,b1)`, column `(a2,b2)`).
    pub fn from_joint_matrix(m: &CMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        let n = dim_a * dim_b;
        if m.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "joint matrix must be {n}x{n} for party dimensions ({dim_a}, {dim_b}), got {}x{}",
                m.rows, m.cols
            )));
        }
        let hermitian = m.hermiticity_deficit() <= IDENTITY_TOL;
        Ok(Self { dim_a, dim_b, data: m.data.clone(), hermitian })
    }

    /// Pure two-party state `|psi><psi|` with `psi` indexed `a * dim_b + b`.
    pub fn from_pure_state(psi: &[C64], dim_a: usize, dim_b: usize) -> Result<Self> {
        let m = CMatrix::outer(psi, psi)?;
        Self::from_joint_matrix(&m, dim_a, dim_b)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    /// Whether the tensor was verified Hermitian at construction.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn offset(&self, a1: usize, b1: usize, a2: usize, b2: usize) -> usize {
        let n = self.dim_a * self.dim_b;
        (a1 * self.dim_b + b1) * n + a2 * self.dim_b + b2
    }

    pub fn get(&self, a1: usize, b1: usize, a2: usize, b2: usize) -> C64 {
        self.data[self.offset(a1, b1, a2, b2)]
    }

    pub fn set(&mut self, a1: usize, b1: usize, a2: usize, b2: usize, value: C64) {
        let k = self.offset(a1, b1, a2, b2);
        self.data[k] = value;
        self.hermitian = false;
    }

    pub fn joint_matrix(&self) -> CMatrix {
        let n = self.dim_a * self.dim_b;
        CMatrix { rows: n, cols: n, data: self.data.clone() }
    }

    pub fn hermiticity_deficit(&self) -> f64 {
        self.joint_matrix().hermiticity_deficit()
    }

    /// Joint trace `sum T^{ab}_{ab}`.
    pub fn trace(&self) -> C64 {
        let n = self.dim_a * self.dim_b;
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    /// Exchange the two parties: `T'^{b1 a1}_{b2 a2} = T^{a1 b1}_{a2 b2}`.
    pub fn swap_parties(&self) -> Self {
        let mut out = Self {
            dim_a: self.dim_b,
            dim_b: self.dim_a,
            data: self.data.clone(),
            hermitian: self.hermitian,
        };
        for a1 in 0..self.dim_a {
            for b1 in 0..self.dim_b {
                for a2 in 0..self.dim_a {
                    for b2 in 0..self.dim_b {
                        let k = out.offset(b1, a1, b2, a2);
                        out.data[k] = self.get(a1, b1, a2, b2);
                    }
                }
            }
        }
        out
    }

    /// Reshape to the operator-Schmidt matrix: row `(a1, a2)`, column `(b1, b2)`.
    pub fn realign(&self) -> CMatrix {
        let (da, db) = (self.dim_a, self.dim_b);
        let mut m = CMatrix { rows: da * da, cols: db * db, data: vec![C64::new(0.0, 0.0); self.data.len()] };
        for a1 in 0..da {
            for b1 in 0..db {
                for a2 in 0..da {
                    for b2 in 0..db {
                        m[(a1 * da + a2, b1 * db + b2)] = self.get(a1, b1, a2, b2);
                    }
                }
            }
        }
        m
    }
}

pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> Result<Tensor4> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.shape()));
    }
    if !b.is_square() {
        return Err(Error::NotSquare(b.shape()));
    }
    let (da, db) = (a.rows, b.rows);
    let mut t = Tensor4::zeros(da, db)?;
    for a1 in 0..da {
        for b1 in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    let k = t.offset(a1, b1, a2, b2);
                    t.data[k] = a[(a1, a2)] * b[(b1, b2)];
                }
            }
        }
    }
    t.hermitian = a.hermiticity_deficit() <= IDENTITY_TOL && b.hermiticity_deficit() <= IDENTITY_TOL;
    Ok(t)
}

/// Full contraction `sum X^{a1 b1}_{a2 b2} Y^{a2 b2}_{a1 b1}`, i.e. `Tr(X Y)` of the joint operators.
pub fn contract(x: &Tensor4, y: &Tensor4) -> Result<C64> {
    if (x.dim_a, x.dim_b) != (y.dim_a, y.dim_b) {
        return Err(Error::DimensionMismatch {
            op: "contract",
            left: (x.dim_a, x.dim_b),
            right: (y.dim_a, y.dim_b),
        });
    }
    let n = x.dim_a * x.dim_b;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += x.data[i * n + j] * y.data[j * n + i];
        }
    }
    Ok(acc)
}

/// Thin singular value decomposition `A = U diag(s) V^H`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    /// Rank-`k` reconstruction from the leading singular triples.
    pub fn reconstruct(&self, k: usize) -> CMatrix {
        let (m, n) = (self.u.rows, self.v.rows);
        let mut out = CMatrix { rows: m, cols: n, data: vec![C64::new(0.0, 0.0); m * n] };
        for (r, &s) in self.singular_values.iter().enumerate().take(k) {
            for i in 0..m {
                for j in 0..n {
                    out[(i, j)] += self.u[(i, r)] * s * self.v[(j, r)].conj();
                }
            }
        }
        out
    }
}

/// One-sided Jacobi SVD. Singular values come back sorted descending.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = CMatrix::identity(n).expect("n >= 1");
    let eps = f64::EPSILON;

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..m {
                    alpha += w[(i, p)].norm_sqr();
                    beta += w[(i, q)].norm_sqr();
                    gamma += w[(i, p)].conj() * w[(i, q)];
                }
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate column q by the phase of gamma so the pair is real.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let unphase = phase.conj();
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)] * unphase;
                    w[(i, p)] = wp * c - wq * s;
                    w[(i, q)] = wp * s + wq * c;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)] * unphase;
                    v[(i, p)] = vp * c - vq * s;
                    v[(i, q)] = vp * s + vq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let k = m.min(n);
    let mut u = CMatrix { rows: m, cols: k, data: vec![C64::new(0.0, 0.0); m * k] };
    let mut vk = CMatrix { rows: n, cols: k, data: vec![C64::new(0.0, 0.0); n * k] };
    let mut singular_values = Vec::with_capacity(k);
    for (r, &j) in order.iter().take(k).enumerate() {
        let s = norms[j];
        singular_values.push(s);
        for i in 0..m {
            u[(i, r)] = if s > 0.0 { w[(i, j)] / s } else { C64::new(0.0, 0.0) };
        }
        for i in 0..n {
            vk[(i, r)] = v[(i, j)];
        }
    }
    Svd { u, singular_values, v: vk }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtReport {
    pub singular_values: Vec<f64>,
    pub operator_schmidt_rank: usize,
    /// Frobenius norm of what the best rank-1 (product) approximation misses.
    pub residual_to_rank1: f64,
}

pub fn operator_schmidt(t: &Tensor4, tol: f64) -> Result<SchmidtReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be positive, got {tol}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("tensor has non-finite entries".into()));
    }
    let singular_values = svd(&t.realign()).singular_values;
    let max = singular_values.first().copied().unwrap_or(0.0);
    let operator_schmidt_rank = if max == 0.0 {
        0
    } else {
        singular_values.iter().filter(|&&s| s > tol * max).count()
    };
    let residual_to_rank1 = singular_values.iter().skip(1).map(|s| s * s).sum::<f64>().sqrt();
    Ok(SchmidtReport { singular_values, operator_schmidt_rank, residual_to_rank1 })
}

/// Smallest eigenvalue of the Hermitian part of `m`.
///
/// Shifting by a bound on the spectral radius makes the Hermitian part
/// positive definite, so its singular values are its eigenvalues.
pub fn min_hermitian_eigenvalue(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.shape()));
    }
    let n = m.rows;
    let mut h = CMatrix::zeros(n, n)?;
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
    }
    let shift = h.frobenius_norm() + 1.0;
    for i in 0..n {
        h[(i, i)] += shift;
    }
    let s = svd(&h).singular_values;
    Ok(s.last().copied().unwrap_or(shift) - shift)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub hermiticity_deficit: f64,
    pub min_eigenvalue: f64,
    pub trace_deviation: f64,
    pub passed: bool,
}

impl DensityReport {
    /// Names of the failed invariants.
    pub fn failures(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.hermiticity_deficit <= tol) {
            out.push(format!("hermiticity (deficit {:e})", self.hermiticity_deficit));
        }
        if !(self.min_eigenvalue >= -tol) {
            out.push(format!("positivity (min eigenvalue {:e})", self.min_eigenvalue));
        }
        if !(self.trace_deviation <= tol) {
            out.push(format!("trace (|Tr - 1| = {:e})", self.trace_deviation));
        }
        out
    }
}

pub fn validate_density(m: &CMatrix, tol: f64) -> Result<DensityReport> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.shape()));
    }
    let hermiticity_deficit = m.hermiticity_deficit();
    let min_eigenvalue = min_hermitian_eigenvalue(m)?;
    let trace_deviation = (trace(m)? - C64::new(1.0, 0.0)).norm();
    let passed = hermiticity_deficit <= tol && min_eigenvalue >= -tol && trace_deviation <= tol;
    Ok(DensityReport { hermiticity_deficit, min_eigenvalue, trace_deviation, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub hermiticity_deficit: f64,
    pub idempotency_deficit: f64,
    /// `Tr P`, which equals the rank of a projector.
    pub rank: f64,
    pub passed: bool,
}

impl ProjectorReport {
    pub fn failures(&self, tol: f64, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.hermiticity_deficit <= tol) {
            out.push(format!("hermiticity (deficit {:e})", self.hermiticity_deficit));
        }
        if !(self.idempotency_deficit <= tol) {
            out.push(format!("idempotency (max |P^2 - P| = {:e})", self.idempotency_deficit));
        }
        if self.idempotency_deficit <= tol && !rank_allowed(self.rank, dim, tol) {
            out.push(format!("rank (Tr P = {}, must be 1 or {dim})", self.rank));
        }
        out
    }
}

fn rank_allowed(rank: f64, dim: usize, tol: f64) -> bool {
    (rank - 1.0).abs() <= tol.max(1e-9) || (rank - dim as f64).abs() <= tol.max(1e-9)
}

/// Check a measurement projector: Hermitian, idempotent, and rank one or full.
pub fn validate_projector(m: &CMatrix, tol: f64) -> Result<ProjectorReport> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.shape()));
    }
    let hermiticity_deficit = m.hermiticity_deficit();
    let idempotency_deficit = matmul(m, m)?.sub(m)?.max_abs();
    let rank = trace(m)?.re;
    let passed = hermiticity_deficit <= tol
        && idempotency_deficit <= tol
        && rank_allowed(rank, m.rows, tol);
    Ok(ProjectorReport { hermiticity_deficit, idempotency_deficit, rank, passed })
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Projector `|H><H|` onto the first basis state.
pub fn ket_h() -> [C64; 2] {
    [c(1.0, 0.0), c(0.0, 0.0)]
}

pub fn ket_v() -> [C64; 2] {
    [c(0.0, 0.0), c(1.0, 0.0)]
}

pub fn projector(ket: &[C64]) -> CMatrix {
    CMatrix::outer(ket, ket).expect("non-empty ket")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> [C64; 2] {
        [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]
    }

    fn naive_matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(a.rows(), b.cols()).unwrap();
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = c(0.0, 0.0);
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_identity_and_orthogonal_projectors() {
        let m = CMatrix::from_2x2([[c(1.0, 2.0), c(-0.5, 0.0)], [c(0.0, 3.0), c(4.0, -1.0)]]);
        assert_eq!(matmul(&CMatrix::identity(2).unwrap(), &m).unwrap(), m);
        let z = matmul(&projector(&ket_h()), &projector(&ket_v())).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = CMatrix::from_2x2([[c(0.3, -1.1), c(2.0, 0.5)], [c(-0.7, 0.2), c(0.1, 0.9)]]);
        let b = CMatrix::from_2x2([[c(1.5, 0.0), c(-0.4, 0.6)], [c(0.8, -0.3), c(0.0, 1.2)]]);
        let fast = matmul(&a, &b).unwrap();
        let slow = naive_matmul(&a, &b);
        assert!(fast.sub(&slow).unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn matmul_dimension_mismatch_names_shapes() {
        let a = CMatrix::zeros(2, 3).unwrap();
        let b = CMatrix::zeros(2, 2).unwrap();
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)") && err.contains("(2, 2)"), "{err}");
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace(&CMatrix::identity(2).unwrap()).unwrap(), c(2.0, 0.0));
        assert_eq!(trace(&projector(&ket_h())).unwrap(), c(1.0, 0.0));
        let p = projector(&plus());
        let t = trace_of_product(&[&p, &projector(&ket_h()), &p, &projector(&ket_v())]).unwrap();
        assert!((t - c(0.25, 0.0)).norm() <= 1e-15);
        assert!(matches!(trace(&CMatrix::zeros(2, 3).unwrap()), Err(Error::NotSquare(_))));
    }

    #[test]
    fn tensor_product_examples() {
        let id = CMatrix::identity(2).unwrap();
        let t = tensor_product(&id, &id).unwrap();
        assert_eq!(t, Tensor4::identity(2, 2).unwrap());
        let hv = tensor_product(&projector(&ket_h()), &projector(&ket_v())).unwrap();
        for (k, z) in hv.entries().iter().enumerate() {
            let expected = if k == hv.offset(0, 1, 0, 1) { 1.0 } else { 0.0 };
            assert_eq!(*z, c(expected, 0.0));
        }
    }

    #[test]
    fn tensor_product_matches_four_loops() {
        let a = CMatrix::from_rows(3, 3, (0..9).map(|k| c(k as f64 * 0.3 - 1.0, (k * k) as f64 * 0.1)).collect()).unwrap();
        let b = CMatrix::from_2x2([[c(0.2, 0.1), c(-1.0, 0.0)], [c(0.0, 0.7), c(1.3, -0.4)]]);
        let t = tensor_product(&a, &b).unwrap();
        for a1 in 0..3 {
            for b1 in 0..2 {
                for a2 in 0..3 {
                    for b2 in 0..2 {
                        assert_eq!(t.get(a1, b1, a2, b2), a[(a1, a2)] * b[(b1, b2)]);
                    }
                }
            }
        }
    }

    #[test]
    fn schmidt_of_product_is_rank_one() {
        let a = CMatrix::from_2x2([[c(0.7, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.3, 0.0)]]);
        let b = projector(&plus());
        let r = operator_schmidt(&tensor_product(&a, &b).unwrap(), RANK_TOL).unwrap();
        assert_eq!(r.operator_schmidt_rank, 1);
        assert!(r.residual_to_rank1 <= 1e-10);
    }

    #[test]
    fn schmidt_of_zero_is_rank_zero() {
        let r = operator_schmidt(&Tensor4::zeros(2, 2).unwrap(), RANK_TOL).unwrap();
        assert_eq!(r.operator_schmidt_rank, 0);
        assert!(r.singular_values.iter().all(|&s| s == 0.0));
        assert!(operator_schmidt(&Tensor4::zeros(2, 2).unwrap(), 0.0).is_err());
    }

    #[test]
    fn svd_reconstructs_rectangular_input() {
        let a = CMatrix::from_rows(3, 2, vec![c(1.0, 0.5), c(0.0, -2.0), c(0.3, 0.0), c(1.0, 1.0), c(-0.5, 0.2), c(0.0, 0.0)]).unwrap();
        let s = svd(&a);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.reconstruct(2).sub(&a).unwrap().frobenius_norm() <= 1e-13);
    }

    #[test]
    fn density_validation_examples() {
        let half = CMatrix::identity(2).unwrap().scale(c(0.5, 0.0));
        assert!(validate_density(&half, 1e-12).unwrap().passed);
        assert!(validate_density(&projector(&ket_h()), 1e-12).unwrap().passed);
        let skew = CMatrix::from_2x2([[c(0.5, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]]);
        let r = validate_density(&skew, 1e-12).unwrap();
        assert!(!r.passed);
        assert!(r.failures(1e-12)[0].starts_with("hermiticity"));
        let two = CMatrix::identity(2).unwrap();
        let r = validate_density(&two, 1e-12).unwrap();
        assert_eq!(r.failures(1e-12).len(), 1);
        assert!(r.failures(1e-12)[0].starts_with("trace"));
        let neg = CMatrix::from_2x2([[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]]);
        let r = validate_density(&neg, 1e-12).unwrap();
        assert!((r.min_eigenvalue + 0.5).abs() < 1e-12);
    }

    #[test]
    fn projector_validation() {
        assert!(validate_projector(&projector(&plus()), 1e-12).unwrap().passed);
        assert!(validate_projector(&CMatrix::identity(2).unwrap(), 1e-12).unwrap().passed);
        let half = CMatrix::identity(2).unwrap().scale(c(0.5, 0.0));
        let r = validate_projector(&half, 1e-12).unwrap();
        assert!(!r.passed);
        assert!(r.failures(1e-12, 2)[0].starts_with("idempotency"));
        let zero = CMatrix::zeros(2, 2).unwrap();
        assert!(!validate_projector(&zero, 1e-12).unwrap().passed);
    }

    #[test]
    fn swap_parties_is_involutive() {
        let t = tensor_product(&projector(&ket_h()), &CMatrix::identity(3).unwrap()).unwrap();
        let s = t.swap_parties();
        assert_eq!((s.dim_a(), s.dim_b()), (3, 2));
        assert_eq!(s.swap_parties(), t);
        assert_eq!(s.get(1, 0, 1, 0), t.get(0, 1, 0, 1));
    }
}
