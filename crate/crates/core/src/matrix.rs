//! Matrices over the coefficient ring: division-free characteristic
//! polynomials (Berkowitz), determinants by valuation-pivoted elimination
//! over the local ring, adjugates, residue-field ranks, and kernels of
//! Z/p^N-linear systems with column-operation tracking.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::ring::{RingElem, RingSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub e: Vec<RingElem>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, e: Vec<RingElem>) -> Self {
        assert_eq!(e.len(), rows * cols);
        Mat { rows, cols, e }
    }

    pub fn zero(spec: &Arc<RingSpec>, rows: usize, cols: usize) -> Self {
        Mat { rows, cols, e: vec![RingElem::zero(spec); rows * cols] }
    }

    pub fn identity(spec: &Arc<RingSpec>, n: usize) -> Self {
        let mut m = Self::zero(spec, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = RingElem::one(spec);
        }
        m
    }

    pub fn scalar(spec: &Arc<RingSpec>, n: usize, c: &RingElem) -> Self {
        let mut m = Self::zero(spec, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = c.clone();
        }
        m
    }

    pub fn from_i64(spec: &Arc<RingSpec>, data: &[Vec<i64>]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let mut e = Vec::with_capacity(rows * cols);
        for r in data {
            assert_eq!(r.len(), cols);
            for &x in r {
                e.push(RingElem::from_i64(spec, x));
            }
        }
        Mat { rows, cols, e }
    }

    pub fn spec(&self) -> &Arc<RingSpec> {
        &self.e[0].spec
    }

    pub fn at(&self, r: usize, c: usize) -> &RingElem {
        &self.e[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut RingElem {
        &mut self.e[r * self.cols + c]
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let e = self.e.iter().zip(&other.e).map(|(a, b)| a.add(b)).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let e = self.e.iter().zip(&other.e).map(|(a, b)| a.sub(b)).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let spec = self.spec().clone();
        let mut out = Mat::zero(&spec, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let prod = a.mul(b);
                    let cur = out.at(i, j).add(&prod);
                    *out.at_mut(i, j) = cur;
                }
            }
        }
        out
    }

    pub fn scal(&self, c: &RingElem) -> Self {
        let e = self.e.iter().map(|a| a.mul(c)).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn neg(&self) -> Self {
        let e = self.e.iter().map(|a| a.neg()).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn transpose(&self) -> Self {
        let spec = self.spec().clone();
        let mut out = Mat::zero(&spec, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    /// Entrywise Frobenius lift.
    pub fn tau(&self) -> Self {
        let e = self.e.iter().map(|a| a.tau()).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn tau_iter(&self, k: usize) -> Self {
        let e = self.e.iter().map(|a| a.tau_iter(k)).collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    /// Evaluate every entry at t = 0.
    pub fn eval_t0(&self) -> Self {
        let spec = self.spec().clone();
        let e = self
            .e
            .iter()
            .map(|a| RingElem::from_w(&spec, a.eval_t0()))
            .collect();
        Mat { rows: self.rows, cols: self.cols, e }
    }

    pub fn max_t_degree(&self) -> usize {
        self.e.iter().map(|a| a.t_degree()).max().unwrap_or(0)
    }

    pub fn reduce_mod_p(&self, fq: &Fq) -> FqMat {
        assert!(self.e.iter().all(|a| a.is_t_constant()));
        let e = self
            .e
            .iter()
            .map(|a| {
                let r = a.reduce_mod_p();
                r.into_iter().next().unwrap_or_else(|| fq.zero())
            })
            .collect();
        FqMat { rows: self.rows, cols: self.cols, fq: fq.clone(), e }
    }

    pub fn div_exact_p(&self, k: u32) -> Result<Self> {
        let e = self
            .e
            .iter()
            .map(|a| a.div_exact_p(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mat { rows: self.rows, cols: self.cols, e })
    }

    /// Minimum Gauss valuation over all entries (N if zero).
    pub fn min_val(&self) -> u32 {
        self.e.iter().map(|a| a.gauss_val()).min().unwrap_or(self.spec().n)
    }
}

/// Characteristic polynomial det(X I - A) by the Berkowitz algorithm
/// (division-free). Returns coefficients ascending: c[0] + c[1] X + ...
/// + c[n] X^n with c[n] = 1.
pub fn charpoly_berkowitz(a: &Mat) -> Vec<RingElem> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let spec = a.spec().clone();
    if n == 0 {
        return vec![RingElem::one(&spec)];
    }
    // coefficients kept in descending order during the sweep
    let mut c: Vec<RingElem> = vec![RingElem::one(&spec)];
    for r in 0..n {
        // q[0] = A[r][r], q[k] = R P^{k-1} S for the principal block P,
        // row R = A[r][0..r], column S = A[0..r][r]
        let mut q = Vec::with_capacity(r + 1);
        q.push(a.at(r, r).clone());
        if r > 0 {
            let mut v: Vec<RingElem> = (0..r).map(|i| a.at(i, r).clone()).collect();
            for _ in 1..=r {
                let mut dot = RingElem::zero(&spec);
                for i in 0..r {
                    if !v[i].is_zero() && !a.at(r, i).is_zero() {
                        dot = dot.add(&a.at(r, i).mul(&v[i]));
                    }
                }
                q.push(dot);
                let mut nv = vec![RingElem::zero(&spec); r];
                for i in 0..r {
                    for k in 0..r {
                        if !a.at(i, k).is_zero() && !v[k].is_zero() {
                            nv[i] = nv[i].add(&a.at(i, k).mul(&v[k]));
                        }
                    }
                }
                v = nv;
            }
            q.truncate(r + 1);
        }
        // Toeplitz step: nc[i] = c[i]; nc[i+1+k] -= q[k] c[i]
        let mut nc = vec![RingElem::zero(&spec); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            nc[i] = nc[i].add(ci);
        }
        for (i, ci) in c.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (k, qk) in q.iter().enumerate() {
                let j = i + 1 + k;
                if j < nc.len() && !qk.is_zero() {
                    nc[j] = nc[j].sub(&qk.mul(ci));
                }
            }
        }
        c = nc;
    }
    c.reverse();
    c
}

/// Determinant of a t-constant square matrix by valuation-pivoted Gaussian
/// elimination over the local ring W_N. Returns (valuation, determinant);
/// a reported valuation of N means "zero to working precision".
pub fn det_local(a: &Mat) -> Result<(u32, RingElem)> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let spec = a.spec().clone();
    assert!(
        a.e.iter().all(|x| x.is_t_constant()),
        "det_local needs t-constant entries"
    );
    let mut m: Vec<Vec<RingElem>> = (0..n)
        .map(|i| (0..n).map(|j| a.at(i, j).clone()).collect())
        .collect();
    let mut det_unit = RingElem::one(&spec);
    let mut total_val = 0u32;
    let mut sign = 1i64;
    for col in 0..n {
        let mut best: Option<(usize, u32)> = None;
        for r in col..n {
            let v = m[r][col].gauss_val();
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((r, v));
            }
        }
        let (prow, pval) = best.unwrap();
        if pval >= spec.n {
            return Ok((spec.n, RingElem::zero(&spec)));
        }
        if prow != col {
            m.swap(prow, col);
            sign = -sign;
        }
        let pivot = m[col][col].clone();
        total_val += pval;
        let unit = pivot.div_exact_p(pval).expect("valuation just computed");
        let unit_inv = unit.inv()?;
        det_unit = det_unit.mul(&unit);
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let num = m[r][col].div_exact_p(pval).expect("pivot had minimal valuation");
            let factor = num.mul(&unit_inv);
            for cc in col..n {
                let sub = factor.mul(&m[col][cc]);
                m[r][cc] = m[r][cc].sub(&sub);
            }
        }
        if total_val >= spec.n {
            return Ok((spec.n, RingElem::zero(&spec)));
        }
    }
    let p_elem = RingElem::from_i64(&spec, spec.p as i64);
    let full = det_unit.scal_i64(sign).mul(&p_elem.pow(total_val as u64));
    Ok((total_val, full))
}

/// Adjugate via Cayley-Hamilton: adj(A) = (-1)^{n+1} (A^{n-1} + c_{n-1}
/// A^{n-2} + ... + c_1 I); satisfies A adj(A) = det(A) I.
pub fn adjugate(a: &Mat) -> Mat {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let spec = a.spec().clone();
    let c = charpoly_berkowitz(a);
    let mut m = Mat::identity(&spec, n);
    for k in (1..n).rev() {
        m = m.mul(a);
        let ck = Mat::scalar(&spec, n, &c[k]);
        m = m.add(&ck);
    }
    if n % 2 == 0 {
        m = m.neg();
    }
    m
}

/// Matrices over the residue field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FqMat {
    pub rows: usize,
    pub cols: usize,
    pub fq: Fq,
    pub e: Vec<FqElem>,
}

impl FqMat {
    pub fn at(&self, r: usize, c: usize) -> &FqElem {
        &self.e[r * self.cols + c]
    }

    pub fn mul(&self, other: &FqMat) -> FqMat {
        assert_eq!(self.cols, other.rows);
        let mut e = vec![self.fq.zero(); self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if self.fq.is_zero(a) {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if self.fq.is_zero(b) {
                        continue;
                    }
                    let prod = self.fq.mul(a, b);
                    e[i * other.cols + j] = self.fq.add(&e[i * other.cols + j], &prod);
                }
            }
        }
        FqMat { rows: self.rows, cols: other.cols, fq: self.fq.clone(), e }
    }

    pub fn frobenius(&self, k: usize) -> FqMat {
        let e = self.e.iter().map(|a| self.fq.frobenius_iter(a, k)).collect();
        FqMat { rows: self.rows, cols: self.cols, fq: self.fq.clone(), e }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.e.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0usize;
        for c in 0..cols {
            let mut pr = None;
            for r in rank..rows {
                if !self.fq.is_zero(&m[r * cols + c]) {
                    pr = Some(r);
                    break;
                }
            }
            let Some(pr) = pr else { continue };
            for cc in 0..cols {
                m.swap(rank * cols + cc, pr * cols + cc);
            }
            let inv = self.fq.inv(&m[rank * cols + c]).expect("nonzero pivot");
            for cc in 0..cols {
                m[rank * cols + cc] = self.fq.mul(&m[rank * cols + cc], &inv);
            }
            for r in 0..rows {
                if r != rank && !self.fq.is_zero(&m[r * cols + c]) {
                    let f = m[r * cols + c].clone();
                    for cc in 0..cols {
                        let s = self.fq.mul(&f, &m[rank * cols + cc]);
                        m[r * cols + cc] = self.fq.sub(&m[r * cols + cc], &s);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Stabilized rank of the twisted products A sigma^d(A) sigma^{2d}(A)...
    /// with d = +1 (Frobenius side) or -1 (Verschiebung side). The image
    /// chain of a semilinear operator is descending, so the rank sequence
    /// stabilizes at the first repeat.
    pub fn stabilized_twisted_rank(&self, direction: i64) -> usize {
        assert_eq!(self.rows, self.cols);
        let f = self.fq.f as i64;
        let mut prod = self.clone();
        let mut rank = prod.rank();
        let mut k = 1i64;
        loop {
            if rank == 0 {
                return 0;
            }
            let shift = (direction * k).rem_euclid(f) as usize;
            let next = prod.mul(&self.frobenius(shift));
            let nrank = next.rank();
            if nrank == rank {
                return nrank;
            }
            rank = nrank;
            prod = next;
            k += 1;
        }
    }
}

/// Diagonalization data for a Z/p^N integer matrix: elementary-divisor
/// valuations plus the accumulated column operations, so kernel generators
/// come out as honest (saturated) columns.
pub struct ZnDiag {
    pub n: usize,
    pub diag_vals: Vec<u32>,
    /// n x n row-major; column j is the preimage of the j-th diagonal axis.
    pub col_tracking: Vec<BigUint>,
}

pub fn zn_diagonalize(
    modulus: &BigUint,
    p: &BigUint,
    n_prec: u32,
    l: &mut [BigUint],
    n: usize,
) -> ZnDiag {
    let val = |x: &BigUint| -> u32 {
        if x.is_zero() {
            return n_prec;
        }
        let mut v = 0u32;
        let mut y = x.clone();
        while (&y % p).is_zero() {
            y /= p;
            v += 1;
            if v >= n_prec {
                break;
            }
        }
        v
    };
    let mut c_track = vec![BigUint::zero(); n * n];
    for i in 0..n {
        c_track[i * n + i] = BigUint::one();
    }
    let mut diag_vals = vec![n_prec; n];
    for k in 0..n {
        let mut best: Option<(usize, usize, u32)> = None;
        for r in k..n {
            for c in k..n {
                let v = val(&l[r * n + c]);
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((r, c, v));
                }
            }
        }
        let (pr, pc, pv) = best.unwrap();
        if pv >= n_prec {
            break;
        }
        if pr != k {
            for c in 0..n {
                l.swap(k * n + c, pr * n + c);
            }
        }
        if pc != k {
            for r in 0..n {
                l.swap(r * n + k, r * n + pc);
                c_track.swap(r * n + k, r * n + pc);
            }
        }
        diag_vals[k] = pv;
        let pk = p.pow(pv);
        let unit = &l[k * n + k] / &pk;
        let unit_inv = modinv_pow(&unit, modulus, p);
        for r in k + 1..n {
            if l[r * n + k].is_zero() {
                continue;
            }
            let q = &l[r * n + k] / &pk % modulus;
            let factor = q * &unit_inv % modulus;
            if factor.is_zero() {
                continue;
            }
            for c in k..n {
                let s = &factor * &l[k * n + c] % modulus;
                l[r * n + c] = submod(&l[r * n + c], &s, modulus);
            }
        }
        for c in k + 1..n {
            if l[k * n + c].is_zero() {
                continue;
            }
            let q = &l[k * n + c] / &pk % modulus;
            let factor = q * &unit_inv % modulus;
            if factor.is_zero() {
                continue;
            }
            for r in k..n {
                let s = &factor * &l[r * n + k] % modulus;
                l[r * n + c] = submod(&l[r * n + c], &s, modulus);
            }
            for r in 0..n {
                let s = &factor * &c_track[r * n + k] % modulus;
                c_track[r * n + c] = submod(&c_track[r * n + c], &s, modulus);
            }
        }
    }
    ZnDiag { n, diag_vals, col_tracking: c_track }
}

fn submod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

fn modinv_pow(a: &BigUint, modulus: &BigUint, p: &BigUint) -> BigUint {
    let a0 = (a % p).to_u64_digits().first().copied().unwrap_or(0);
    let p0 = p.to_u64_digits().first().copied().unwrap_or(0);
    let mut x = BigUint::from(crate::fq::inv_mod_p(a0, p0));
    let two = BigUint::from(2u64);
    loop {
        let ax = a * &x % modulus;
        if ax == BigUint::one() {
            return x;
        }
        let t = submod(&two, &ax, modulus);
        x = &x * t % modulus;
    }
}

/// Solve A X = B exactly over the local ring for square t-constant A,
/// declaring the system non-integral when any back-substitution division
/// fails. Used to express lattice inclusions in chosen bases.
pub fn solve_exact(a: &Mat, b: &Mat) -> Result<Mat> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.rows);
    let n = a.rows;
    let spec = a.spec().clone();
    let mut m: Vec<Vec<RingElem>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a.at(i, j).clone())
                .chain((0..b.cols).map(|j| b.at(i, j).clone()))
                .collect()
        })
        .collect();
    let width = n + b.cols;
    let mut perm_cols: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best: Option<(usize, usize, u32)> = None;
        for r in k..n {
            for c in k..n {
                let v = m[r][c].gauss_val();
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((r, c, v));
                }
            }
        }
        let (pr, pc, pv) = best.unwrap();
        if pv >= spec.n {
            return Err(Error::Precision("singular system in solve_exact".into()));
        }
        m.swap(k, pr);
        if pc != k {
            for row in m.iter_mut() {
                row.swap(k, pc);
            }
            perm_cols.swap(k, pc);
        }
        let pivot = m[k][k].clone();
        let unit = pivot.div_exact_p(pv).expect("pivot valuation");
        let unit_inv = unit.inv()?;
        for r in k + 1..n {
            if m[r][k].is_zero() {
                continue;
            }
            let num = m[r][k].div_exact_p(pv).expect("pivot had minimal valuation");
            let factor = num.mul(&unit_inv);
            for c in k..width {
                let s = factor.mul(&m[k][c]);
                m[r][c] = m[r][c].sub(&s);
            }
        }
    }
    let mut x = Mat::zero(&spec, n, b.cols);
    for j in 0..b.cols {
        let mut sol = vec![RingElem::zero(&spec); n];
        for k in (0..n).rev() {
            let mut rhs = m[k][n + j].clone();
            for c in k + 1..n {
                rhs = rhs.sub(&m[k][c].mul(&sol[c]));
            }
            sol[k] = rhs
                .div_exact(&m[k][k])
                .map_err(|_| Error::NonIntegral("solve_exact: non-integral solution".into()))?;
        }
        for k in 0..n {
            *x.at_mut(perm_cols[k], j) = sol[k].clone();
        }
    }
    Ok(x)
}
