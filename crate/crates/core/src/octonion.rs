//! Octonion algebras over Q (the division algebra by Cayley-Dickson
//! doubling and the split algebra by Zorn vector matrices), their
//! derivation Lie algebras, the decomposition of the wedge square of the
//! trace-zero part, long-root sl2 weights, commutant dimensions, and the
//! torus-invariant (ghost) bookkeeping. All verdicts are reached in exact
//! rational arithmetic; one large commutant computation uses a mod-p rank
//! only as an upper bound, matched by exact witnesses.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub type Q = BigRational;

fn q_i64(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

fn q_half() -> Q {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

/// Rational matrices, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMat {
    pub rows: usize,
    pub cols: usize,
    pub e: Vec<Q>,
}

impl QMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        QMat { rows, cols, e: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.e[i * n + i] = Q::one();
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> &Q {
        &self.e[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Q {
        &mut self.e[r * self.cols + c]
    }

    pub fn mul(&self, other: &QMat) -> QMat {
        assert_eq!(self.cols, other.rows);
        let mut out = QMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if !b.is_zero() {
                        let v = self.e[i * self.cols + k].clone() * b + out.at(i, j);
                        *out.at_mut(i, j) = v;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &QMat) -> QMat {
        let e = self.e.iter().zip(&other.e).map(|(a, b)| a + b).collect();
        QMat { rows: self.rows, cols: self.cols, e }
    }

    pub fn sub(&self, other: &QMat) -> QMat {
        let e = self.e.iter().zip(&other.e).map(|(a, b)| a - b).collect();
        QMat { rows: self.rows, cols: self.cols, e }
    }

    pub fn scal(&self, c: &Q) -> QMat {
        let e = self.e.iter().map(|a| a * c).collect();
        QMat { rows: self.rows, cols: self.cols, e }
    }

    pub fn transpose(&self) -> QMat {
        let mut out = QMat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    pub fn commutator(&self, other: &QMat) -> QMat {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(|x| x.is_zero())
    }

    /// Reduced row echelon form; returns the pivot column of each row.
    pub fn rref(&self) -> (QMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = vec![];
        let mut rank = 0usize;
        for c in 0..m.cols {
            let mut pr = None;
            for r in rank..m.rows {
                if !m.at(r, c).is_zero() {
                    pr = Some(r);
                    break;
                }
            }
            let Some(pr) = pr else { continue };
            for cc in 0..m.cols {
                m.e.swap(rank * m.cols + cc, pr * m.cols + cc);
            }
            let inv = m.at(rank, c).clone();
            for cc in 0..m.cols {
                let v = m.at(rank, cc) / &inv;
                *m.at_mut(rank, cc) = v;
            }
            for r in 0..m.rows {
                if r != rank && !m.at(r, c).is_zero() {
                    let f = m.at(r, c).clone();
                    for cc in 0..m.cols {
                        let v = m.at(r, cc) - &f * m.at(rank, cc);
                        *m.at_mut(r, cc) = v;
                    }
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == m.rows {
                break;
            }
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Canonical kernel basis (free variables set to 1 in column order).
    pub fn kernel_basis(&self) -> Vec<Vec<Q>> {
        let (m, pivots) = self.rref();
        let mut is_pivot = vec![usize::MAX; self.cols];
        for (row, &c) in pivots.iter().enumerate() {
            is_pivot[c] = row;
        }
        let mut out = vec![];
        for c in 0..self.cols {
            if is_pivot[c] != usize::MAX {
                continue;
            }
            let mut v = vec![Q::zero(); self.cols];
            v[c] = Q::one();
            for cc in 0..self.cols {
                if is_pivot[cc] != usize::MAX {
                    v[cc] = -m.at(is_pivot[cc], c).clone();
                }
            }
            out.push(v);
        }
        out
    }

    /// One solution of self * x = b, if consistent.
    pub fn solve(&self, b: &[Q]) -> Option<Vec<Q>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = QMat::zero(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *aug.at_mut(r, c) = self.at(r, c).clone();
            }
            *aug.at_mut(r, self.cols) = b[r].clone();
        }
        let (m, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return None;
        }
        let mut x = vec![Q::zero(); self.cols];
        for (row, &c) in pivots.iter().enumerate() {
            x[c] = m.at(row, self.cols).clone();
        }
        Some(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Division,
    Split,
}

/// An octonion algebra by its structure constants on a basis e_0 = 1,
/// e_1..e_7 spanning the trace-zero part C_0, with conjugation and the
/// trace bilinear form B(x, y) = scalar(x ybar + y xbar).
pub struct OctonionAlgebra {
    pub flavor: Flavor,
    /// sc[(i*8 + j)*8 + k] = coefficient of e_k in e_i e_j.
    pub sc: Vec<Q>,
    /// Trace-form Gram matrix on the full algebra.
    pub gram: QMat,
}

impl OctonionAlgebra {
    /// Cayley-Dickson doubling from Q three times with gamma = -1:
    /// (a, b)(c, d) = (ac - d* b, da + b c*), (a, b)* = (a*, -b).
    pub fn division() -> OctonionAlgebra {
        fn conj_vec(x: &[Q]) -> Vec<Q> {
            let n = x.len();
            if n == 1 {
                return x.to_vec();
            }
            let (a, b) = x.split_at(n / 2);
            let mut out = conj_vec(a);
            out.extend(b.iter().map(|v| -v.clone()));
            out
        }
        fn mul_vec(x: &[Q], y: &[Q]) -> Vec<Q> {
            let n = x.len();
            if n == 1 {
                return vec![x[0].clone() * &y[0]];
            }
            let (a, b) = x.split_at(n / 2);
            let (c, d) = y.split_at(n / 2);
            let ac = mul_vec(a, c);
            let dsb = mul_vec(&conj_vec(d), b);
            let da = mul_vec(d, a);
            let bcs = mul_vec(b, &conj_vec(c));
            let mut out: Vec<Q> = ac.iter().zip(&dsb).map(|(u, v)| u - v).collect();
            out.extend(da.iter().zip(&bcs).map(|(u, v)| u + v));
            out
        }
        let mut sc = vec![Q::zero(); 512];
        for i in 0..8 {
            for j in 0..8 {
                let mut x = vec![Q::zero(); 8];
                x[i] = Q::one();
                let mut y = vec![Q::zero(); 8];
                y[j] = Q::one();
                let z = mul_vec(&x, &y);
                for (k, v) in z.into_iter().enumerate() {
                    sc[(i * 8 + j) * 8 + k] = v;
                }
            }
        }
        Self::from_sc(Flavor::Division, sc)
    }

    /// Zorn vector matrices (a, v; w, b): the product
    /// (a,v;w,b)(a',v';w',b') = (aa' + v.w', av' + b'v - w x w';
    ///                           a'w + bw' + v x v', bb' + w.v'),
    /// on the basis 1 = (1,0;0,1), h = (1,0;0,-1), u_i = (0,e_i;0,0),
    /// w_i = (0,0;e_i,0).
    pub fn split() -> OctonionAlgebra {
        type Z = (Q, [Q; 3], [Q; 3], Q);
        fn dot(x: &[Q; 3], y: &[Q; 3]) -> Q {
            x.iter().zip(y).map(|(a, b)| a * b).sum()
        }
        fn cross(x: &[Q; 3], y: &[Q; 3]) -> [Q; 3] {
            [
                x[1].clone() * &y[2] - x[2].clone() * &y[1],
                x[2].clone() * &y[0] - x[0].clone() * &y[2],
                x[0].clone() * &y[1] - x[1].clone() * &y[0],
            ]
        }
        fn zmul(x: &Z, y: &Z) -> Z {
            let (a, v, w, b) = x;
            let (a2, v2, w2, b2) = y;
            let cw = cross(w, w2);
            let cv = cross(v, v2);
            let mut nv = [Q::zero(), Q::zero(), Q::zero()];
            let mut nw = [Q::zero(), Q::zero(), Q::zero()];
            for i in 0..3 {
                nv[i] = a.clone() * &v2[i] + b2.clone() * &v[i] - cw[i].clone();
                nw[i] = a2.clone() * &w[i] + b.clone() * &w2[i] + cv[i].clone();
            }
            (a.clone() * a2 + dot(v, w2), nv, nw, b.clone() * b2 + dot(w, v2))
        }
        let z3 = || [Q::zero(), Q::zero(), Q::zero()];
        let e3 = |i: usize| {
            let mut v = z3();
            v[i] = Q::one();
            v
        };
        let mut basis: Vec<Z> = vec![
            (Q::one(), z3(), z3(), Q::one()),
            (Q::one(), z3(), z3(), -Q::one()),
        ];
        for i in 0..3 {
            basis.push((Q::zero(), e3(i), z3(), Q::zero()));
        }
        for i in 0..3 {
            basis.push((Q::zero(), z3(), e3(i), Q::zero()));
        }
        let to_coords = |z: &Z| -> Vec<Q> {
            let (a, v, w, b) = z;
            let mut out = vec![(a.clone() + b) * q_half(), (a.clone() - b) * q_half()];
            out.extend(v.iter().cloned());
            out.extend(w.iter().cloned());
            out
        };
        let mut sc = vec![Q::zero(); 512];
        for i in 0..8 {
            for j in 0..8 {
                let z = zmul(&basis[i], &basis[j]);
                for (k, v) in to_coords(&z).into_iter().enumerate() {
                    sc[(i * 8 + j) * 8 + k] = v;
                }
            }
        }
        Self::from_sc(Flavor::Split, sc)
    }

    fn from_sc(flavor: Flavor, sc: Vec<Q>) -> OctonionAlgebra {
        let mut alg = OctonionAlgebra { flavor, sc, gram: QMat::zero(8, 8) };
        let mut gram = QMat::zero(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                let ei = alg.basis_vec(i);
                let ej = alg.basis_vec(j);
                let s = alg.mul(&ei, &alg.conj_vec(&ej));
                let t = alg.mul(&ej, &alg.conj_vec(&ei));
                *gram.at_mut(i, j) = s[0].clone() + &t[0];
            }
        }
        alg.gram = gram;
        alg
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Q> {
        let mut v = vec![Q::zero(); 8];
        v[i] = Q::one();
        v
    }

    pub fn mul(&self, x: &[Q], y: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); 8];
        for i in 0..8 {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..8 {
                if y[j].is_zero() {
                    continue;
                }
                let c = x[i].clone() * &y[j];
                for k in 0..8 {
                    let s = &self.sc[(i * 8 + j) * 8 + k];
                    if !s.is_zero() {
                        out[k] += &c * s;
                    }
                }
            }
        }
        out
    }

    pub fn conj_vec(&self, x: &[Q]) -> Vec<Q> {
        let mut out = x.to_vec();
        for v in out.iter_mut().skip(1) {
            *v = -v.clone();
        }
        out
    }

    /// The multiplicative norm N(x) = x conj(x), a scalar.
    pub fn norm(&self, x: &[Q]) -> Q {
        let prod = self.mul(x, &self.conj_vec(x));
        prod[0].clone()
    }

    pub fn l_op(&self, x: &[Q]) -> QMat {
        let mut m = QMat::zero(8, 8);
        for j in 0..8 {
            let col = self.mul(x, &self.basis_vec(j));
            for k in 0..8 {
                *m.at_mut(k, j) = col[k].clone();
            }
        }
        m
    }

    pub fn r_op(&self, x: &[Q]) -> QMat {
        let mut m = QMat::zero(8, 8);
        for j in 0..8 {
            let col = self.mul(&self.basis_vec(j), x);
            for k in 0..8 {
                *m.at_mut(k, j) = col[k].clone();
            }
        }
        m
    }

    /// Alternative-law, Moufang, and norm-multiplicativity checks on seeded
    /// random elements with small integer coordinates.
    pub fn check_random_identities(&self, count: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rand_vec =
            |rng: &mut ChaCha20Rng| -> Vec<Q> { (0..8).map(|_| q_i64(rng.random_range(-9i64..=9))).collect() };
        for i in 0..count {
            let x = rand_vec(&mut rng);
            let y = rand_vec(&mut rng);
            let lhs = self.mul(&x, &self.mul(&x, &y));
            let xx = self.mul(&x, &x);
            if lhs != self.mul(&xx, &y) {
                return Err(Error::Invariant(format!("left alternative law fails at trial {i}")));
            }
            let lhs2 = self.mul(&self.mul(&y, &x), &x);
            if lhs2 != self.mul(&y, &xx) {
                return Err(Error::Invariant(format!("right alternative law fails at trial {i}")));
            }
            let nxy = self.norm(&self.mul(&x, &y));
            if nxy != self.norm(&x) * self.norm(&y) {
                return Err(Error::Invariant(format!("norm multiplicativity fails at trial {i}")));
            }
            let z = rand_vec(&mut rng);
            let lhs3 = self.mul(&self.mul(&x, &y), &self.mul(&z, &x));
            let rhs3 = self.mul(&x, &self.mul(&self.mul(&y, &z), &x));
            if lhs3 != rhs3 {
                return Err(Error::Invariant(format!("Moufang identity fails at trial {i}")));
            }
        }
        Ok(())
    }

    /// Inertia counts (positive, negative) of a rational diagonalization of
    /// the trace form.
    pub fn norm_signature(&self) -> (usize, usize) {
        let mut g = self.gram.clone();
        let n = 8;
        let mut pos = 0;
        let mut neg = 0;
        for k in 0..n {
            if g.at(k, k).is_zero() {
                let mut fixed = false;
                for j in k + 1..n {
                    if !g.at(j, j).is_zero() {
                        for c in 0..n {
                            let tmp = g.at(k, c).clone();
                            *g.at_mut(k, c) = g.at(j, c).clone();
                            *g.at_mut(j, c) = tmp;
                        }
                        for r in 0..n {
                            let tmp = g.at(r, k).clone();
                            *g.at_mut(r, k) = g.at(r, j).clone();
                            *g.at_mut(r, j) = tmp;
                        }
                        fixed = true;
                        break;
                    }
                }
                if !fixed {
                    for j in k + 1..n {
                        if !g.at(k, j).is_zero() {
                            for c in 0..n {
                                let v = g.at(k, c) + g.at(j, c);
                                *g.at_mut(k, c) = v;
                            }
                            for r in 0..n {
                                let v = g.at(r, k) + g.at(r, j);
                                *g.at_mut(r, k) = v;
                            }
                            break;
                        }
                    }
                }
            }
            let piv = g.at(k, k).clone();
            if piv.is_zero() {
                continue;
            }
            if piv.is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
            for j in k + 1..n {
                if g.at(k, j).is_zero() {
                    continue;
                }
                let lam = -(g.at(k, j) / &piv);
                for r in 0..n {
                    let v = g.at(r, j) + &lam * g.at(r, k);
                    *g.at_mut(r, j) = v;
                }
                for c in 0..n {
                    let v = g.at(j, c) + &lam * g.at(k, c);
                    *g.at_mut(j, c) = v;
                }
            }
        }
        (pos, neg)
    }
}

/// The derivation Lie algebra: 8x8 matrices annihilating 1 and preserving
/// C_0, plus the restricted 7x7 action.
pub struct DerivationAlgebra {
    pub basis8: Vec<QMat>,
    pub basis7: Vec<QMat>,
}

impl DerivationAlgebra {
    pub fn dim(&self) -> usize {
        self.basis7.len()
    }

    /// Coordinates of an 8x8 matrix in the derivation basis, if it lies in
    /// the span.
    pub fn coordinates(&self, d: &QMat) -> Option<Vec<Q>> {
        let n = self.basis8.len();
        let mut sys = QMat::zero(64, n);
        for (j, b) in self.basis8.iter().enumerate() {
            for k in 0..64 {
                *sys.at_mut(k, j) = b.e[k].clone();
            }
        }
        sys.solve(&d.e)
    }
}

fn pair_index() -> Vec<(usize, usize)> {
    let mut out = vec![];
    for i in 0..7 {
        for j in i + 1..7 {
            out.push((i, j));
        }
    }
    out
}

/// Induced action on the wedge square of C_0 (pairs i < j, lexicographic).
pub fn wedge_action_of(d7: &QMat) -> QMat {
    let pairs = pair_index();
    let mut out = QMat::zero(21, 21);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        for (row, &(k, l)) in pairs.iter().enumerate() {
            let mut v = Q::zero();
            if l == j {
                v += d7.at(k, i);
            }
            if k == j {
                v -= d7.at(l, i);
            }
            if k == i {
                v += d7.at(l, j);
            }
            if l == i {
                v -= d7.at(k, j);
            }
            *out.at_mut(row, col) = v;
        }
    }
    out
}

/// Solve the Leibniz system D(e_i e_j) = D(e_i) e_j + e_i D(e_j) over the
/// rationals; the kernel must have dimension 14.
pub fn derivation_basis(alg: &OctonionAlgebra) -> Result<DerivationAlgebra> {
    let mut sys = QMat::zero(512, 64);
    for i in 0..8 {
        for j in 0..8 {
            for k in 0..8 {
                let row = (i * 8 + j) * 8 + k;
                for m in 0..8 {
                    let c = &alg.sc[(i * 8 + j) * 8 + m];
                    if !c.is_zero() {
                        let v = sys.at(row, k * 8 + m) + c;
                        *sys.at_mut(row, k * 8 + m) = v;
                    }
                }
                for a in 0..8 {
                    let c = &alg.sc[(a * 8 + j) * 8 + k];
                    if !c.is_zero() {
                        let v = sys.at(row, a * 8 + i) - c;
                        *sys.at_mut(row, a * 8 + i) = v;
                    }
                }
                for a in 0..8 {
                    let c = &alg.sc[(i * 8 + a) * 8 + k];
                    if !c.is_zero() {
                        let v = sys.at(row, a * 8 + j) - c;
                        *sys.at_mut(row, a * 8 + j) = v;
                    }
                }
            }
        }
    }
    let kernel = sys.kernel_basis();
    if kernel.len() != 14 {
        return Err(Error::RankMismatch(format!(
            "derivation space has dimension {}, expected 14",
            kernel.len()
        )));
    }
    let mut basis8 = vec![];
    let mut basis7 = vec![];
    for v in kernel {
        let mut d = QMat::zero(8, 8);
        d.e = v;
        for k in 0..8 {
            if !d.at(k, 0).is_zero() {
                return Err(Error::Invariant("derivation does not kill 1".into()));
            }
        }
        for j in 1..8 {
            if !d.at(0, j).is_zero() {
                return Err(Error::Invariant("derivation does not preserve C_0".into()));
            }
        }
        let mut d7 = QMat::zero(7, 7);
        for i in 0..7 {
            for j in 0..7 {
                *d7.at_mut(i, j) = d.at(i + 1, j + 1).clone();
            }
        }
        basis8.push(d);
        basis7.push(d7);
    }
    Ok(DerivationAlgebra { basis8, basis7 })
}

/// Bracket closure and infinitesimal norm-isometry of the derivation basis.
pub fn check_derivation_invariants(alg: &OctonionAlgebra, der: &DerivationAlgebra) -> Result<()> {
    let mut b7 = QMat::zero(7, 7);
    for i in 0..7 {
        for j in 0..7 {
            *b7.at_mut(i, j) = alg.gram.at(i + 1, j + 1).clone();
        }
    }
    for d in &der.basis7 {
        let skew = d.transpose().mul(&b7).add(&b7.mul(d));
        if !skew.is_zero() {
            return Err(Error::Invariant("derivation is not an infinitesimal isometry".into()));
        }
    }
    for (i, a) in der.basis8.iter().enumerate() {
        for b in der.basis8.iter().skip(i + 1) {
            if der.coordinates(&a.commutator(b)).is_none() {
                return Err(Error::Invariant("bracket leaves the derivation span".into()));
            }
        }
    }
    Ok(())
}

/// The complementary equivariant projections on the wedge square of C_0.
pub struct Lambda2Split {
    pub proj_g: QMat,
    pub proj_c0: QMat,
}

pub fn lambda2_split(alg: &OctonionAlgebra, der: &DerivationAlgebra) -> Result<Lambda2Split> {
    let pairs = pair_index();
    // the commutator map x ^ y -> [x, y] lands in C_0 and realizes the
    // C_0 summand
    let mut cmap = QMat::zero(7, 21);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        let ei = alg.basis_vec(i + 1);
        let ej = alg.basis_vec(j + 1);
        let a = alg.mul(&ei, &ej);
        let b = alg.mul(&ej, &ei);
        let comm: Vec<Q> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        if !comm[0].is_zero() {
            return Err(Error::Invariant("commutator leaves C_0".into()));
        }
        for k in 0..7 {
            *cmap.at_mut(k, col) = comm[k + 1].clone();
        }
    }
    let mut b7 = QMat::zero(7, 7);
    for i in 0..7 {
        for j in 0..7 {
            *b7.at_mut(i, j) = alg.gram.at(i + 1, j + 1).clone();
        }
    }
    let mut bw = QMat::zero(21, 21);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for (c, &(k, l)) in pairs.iter().enumerate() {
            let v = b7.at(i, k).clone() * b7.at(j, l) - b7.at(i, l).clone() * b7.at(j, k);
            *bw.at_mut(r, c) = v;
        }
    }
    // adjoint section j with B_w(j u, x) = B(u, c x)
    let rhs = cmap.transpose().mul(&b7);
    let mut jmap = QMat::zero(21, 7);
    for col in 0..7 {
        let b: Vec<Q> = (0..21).map(|r| rhs.at(r, col).clone()).collect();
        let x = bw
            .solve(&b)
            .ok_or_else(|| Error::Invariant("wedge trace form is degenerate".into()))?;
        for r in 0..21 {
            *jmap.at_mut(r, col) = x[r].clone();
        }
    }
    let cj = cmap.mul(&jmap);
    let mu = cj.at(0, 0).clone();
    if mu.is_zero() || cj != QMat::identity(7).scal(&mu) {
        return Err(Error::Invariant("c . j is not a nonzero scalar".into()));
    }
    let proj_c0 = jmap.mul(&cmap).scal(&(Q::one() / mu));
    let proj_g = QMat::identity(21).sub(&proj_c0);
    if !proj_c0.mul(&proj_c0).sub(&proj_c0).is_zero() {
        return Err(Error::Invariant("C_0 projection is not idempotent".into()));
    }
    if !proj_c0.mul(&proj_g).is_zero() {
        return Err(Error::Invariant("projections do not annihilate each other".into()));
    }
    if proj_c0.rank() != 7 || proj_g.rank() != 14 {
        return Err(Error::RankMismatch(format!(
            "projection ranks ({}, {}) != (14, 7)",
            proj_g.rank(),
            proj_c0.rank()
        )));
    }
    for d7 in &der.basis7 {
        let rho = wedge_action_of(d7);
        if !rho.mul(&proj_c0).sub(&proj_c0.mul(&rho)).is_zero() {
            return Err(Error::Invariant("C_0 projection is not equivariant".into()));
        }
    }
    // the g-projection fixes the trace-form image of every derivation
    let lambda_to_so = {
        let mut m = QMat::zero(49, 21);
        for (col, &(i, j)) in pairs.iter().enumerate() {
            for x in 0..7 {
                for out in 0..7 {
                    let mut v = Q::zero();
                    if out == j {
                        v += b7.at(i, x);
                    }
                    if out == i {
                        v -= b7.at(j, x);
                    }
                    *m.at_mut(out * 7 + x, col) = v;
                }
            }
        }
        m
    };
    for d7 in &der.basis7 {
        let omega = lambda_to_so
            .solve(&d7.e)
            .ok_or_else(|| Error::Invariant("derivation is not in so(B)".into()))?;
        let mut img = vec![Q::zero(); 21];
        for r in 0..21 {
            let mut acc = Q::zero();
            for c in 0..21 {
                if !proj_g.at(r, c).is_zero() {
                    acc += proj_g.at(r, c).clone() * &omega[c];
                }
            }
            img[r] = acc;
        }
        if img != omega {
            return Err(Error::Invariant(
                "g-projection does not fix the derivation image".into(),
            ));
        }
    }
    Ok(Lambda2Split { proj_g, proj_c0 })
}

/// A semisimple element and its integer eigenvalue multiset on C_0.
pub struct WeightDatum {
    pub h7: QMat,
    pub eigenvalues: Vec<i64>,
}

/// The standard derivation D_{x,y} = [L_x, L_y] + [L_x, R_y] + [R_x, R_y]
/// of an alternative algebra.
pub fn standard_derivation(alg: &OctonionAlgebra, x: &[Q], y: &[Q]) -> QMat {
    let lx = alg.l_op(x);
    let ly = alg.l_op(y);
    let rx = alg.r_op(x);
    let ry = alg.r_op(y);
    lx.commutator(&ly).add(&lx.commutator(&ry)).add(&rx.commutator(&ry))
}

fn restrict7(d: &QMat) -> QMat {
    let mut d7 = QMat::zero(7, 7);
    for i in 0..7 {
        for j in 0..7 {
            *d7.at_mut(i, j) = d.at(i + 1, j + 1).clone();
        }
    }
    d7
}

/// Long-root sl2 weights on C_0 in the split algebra. Long-root nilpotents
/// are located as square-zero standard derivations of minimal nonzero rank
/// (two) on C_0, over basis pairs in lexicographic order; `skip` passes
/// over that many hits to test stability of the output. Jacobson-Morozov
/// then produces the semisimple h by exact linear algebra.
pub fn long_root_sl2_weights(
    alg: &OctonionAlgebra,
    der: &DerivationAlgebra,
    skip: usize,
) -> Result<WeightDatum> {
    if alg.flavor != Flavor::Split {
        return Err(Error::InvalidInput("integer weights need the split algebra".into()));
    }
    let mut seen = 0usize;
    let mut found: Option<QMat> = None;
    'outer: for i in 1..8 {
        for j in i + 1..8 {
            let d = standard_derivation(alg, &alg.basis_vec(i), &alg.basis_vec(j));
            if d.is_zero() {
                continue;
            }
            let d7 = restrict7(&d);
            if !d7.mul(&d7).is_zero() || d7.rank() != 2 {
                continue;
            }
            if seen < skip {
                seen += 1;
                continue;
            }
            found = Some(d7);
            break 'outer;
        }
    }
    let e = found.ok_or(Error::SearchExhausted {
        bound: 21,
        context: "no square-zero rank-2 standard derivation found".into(),
    })?;
    let basis7 = &der.basis7;
    let dim = basis7.len();
    // h = [e, y] for y solving [[e, y], e] = 2e
    let ad_e = |m: &QMat| e.commutator(m);
    let mut sys = QMat::zero(49, dim);
    for (jj, b) in basis7.iter().enumerate() {
        // [[e, y], e] = -ad_e(ad_e(y))
        let col = ad_e(&ad_e(b)).scal(&-Q::one());
        for k in 0..49 {
            *sys.at_mut(k, jj) = col.e[k].clone();
        }
    }
    let rhs: Vec<Q> = e.scal(&q_i64(2)).e.clone();
    let y = sys
        .solve(&rhs)
        .ok_or_else(|| Error::Invariant("Jacobson-Morozov h-equation unsolvable".into()))?;
    let mut yy = QMat::zero(7, 7);
    for (jj, b) in basis7.iter().enumerate() {
        if !y[jj].is_zero() {
            yy = yy.add(&b.scal(&y[jj]));
        }
    }
    let h = ad_e(&yy);
    if h.commutator(&e) != e.scal(&q_i64(2)) {
        return Err(Error::Invariant("[h, e] != 2e".into()));
    }
    // f with [e, f] = h and [h, f] = -2f
    let mut sys2 = QMat::zero(98, dim);
    for (jj, b) in basis7.iter().enumerate() {
        let c1 = ad_e(b);
        let c2 = h.commutator(b).add(&b.scal(&q_i64(2)));
        for k in 0..49 {
            *sys2.at_mut(k, jj) = c1.e[k].clone();
            *sys2.at_mut(49 + k, jj) = c2.e[k].clone();
        }
    }
    let mut rhs2 = h.e.clone();
    rhs2.extend(vec![Q::zero(); 49]);
    let fcoords = sys2
        .solve(&rhs2)
        .ok_or_else(|| Error::Invariant("Jacobson-Morozov f-equation unsolvable".into()))?;
    let mut f = QMat::zero(7, 7);
    for (jj, b) in basis7.iter().enumerate() {
        if !fcoords[jj].is_zero() {
            f = f.add(&b.scal(&fcoords[jj]));
        }
    }
    if e.commutator(&f) != h || h.commutator(&f) != f.scal(&q_i64(-2)) {
        return Err(Error::Invariant("sl2 relations fail".into()));
    }
    let mut eigenvalues = vec![];
    let mut total = 0usize;
    for k in -3i64..=3 {
        let shifted = h.sub(&QMat::identity(7).scal(&q_i64(k)));
        let dim_k = 7 - shifted.rank();
        total += dim_k;
        for _ in 0..dim_k {
            eigenvalues.push(k);
        }
    }
    if total != 7 {
        return Err(Error::Invariant(format!(
            "h has non-integral eigenvalues: only {total} of 7 accounted"
        )));
    }
    eigenvalues.sort();
    Ok(WeightDatum { h7: h, eigenvalues })
}

/// Dimension of the endomorphisms commuting with every derivation. With
/// `wedge = false` this is computed on C_0 in exact rational arithmetic;
/// with `wedge = true` on the wedge square, where a prime-field rank gives
/// the upper bound dim_Q <= dim_{F_p} and the identity plus the computed
/// C_0-projection witness the lower bound 2 exactly.
pub fn commutant_dimension(
    der: &DerivationAlgebra,
    split: Option<&Lambda2Split>,
    wedge: bool,
) -> Result<usize> {
    if !wedge {
        let n = 7usize;
        let mut sys = QMat::zero(der.basis7.len() * n * n, n * n);
        for (b, d) in der.basis7.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let row = (b * n + i) * n + j;
                    for k in 0..n {
                        let c = d.at(k, j).clone();
                        if !c.is_zero() {
                            let v = sys.at(row, i * n + k) + &c;
                            *sys.at_mut(row, i * n + k) = v;
                        }
                        let c2 = d.at(i, k).clone();
                        if !c2.is_zero() {
                            let v = sys.at(row, k * n + j) - &c2;
                            *sys.at_mut(row, k * n + j) = v;
                        }
                    }
                }
            }
        }
        return Ok(sys.kernel_basis().len());
    }
    const P: u128 = 2305843009213693951; // 2^61 - 1
    let to_fp = |q: &Q| -> u64 {
        let pm = BigInt::from(P);
        let nm = ((q.numer() % &pm) + &pm) % &pm;
        let dm = ((q.denom() % &pm) + &pm) % &pm;
        let n64 = nm.to_u64_digits().1.first().copied().unwrap_or(0);
        let d64 = dm.to_u64_digits().1.first().copied().unwrap_or(0);
        let dinv = pow_mod_u128(d64 as u128, P - 2, P);
        mulmod(n64 as u128, dinv, P) as u64
    };
    let n = 21usize;
    let actions: Vec<Vec<u64>> = der
        .basis7
        .iter()
        .map(|d| wedge_action_of(d).e.iter().map(&to_fp).collect())
        .collect();
    let mut rows: Vec<Vec<u64>> = vec![];
    for d in &actions {
        for i in 0..n {
            for j in 0..n {
                let mut row = vec![0u64; n * n];
                for k in 0..n {
                    row[i * n + k] =
                        ((row[i * n + k] as u128 + d[k * n + j] as u128) % P) as u64;
                    let neg = (P - d[i * n + k] as u128 % P) % P;
                    row[k * n + j] = ((row[k * n + j] as u128 + neg) % P) as u64;
                }
                if row.iter().any(|&x| x != 0) {
                    rows.push(row);
                }
            }
        }
    }
    let rank = fp_rank(&mut rows, n * n, P);
    let upper = n * n - rank;
    let split = split.ok_or_else(|| {
        Error::InvalidInput("wedge commutant needs the computed projections".into())
    })?;
    for d in &der.basis7 {
        let rho = wedge_action_of(d);
        if !rho.mul(&split.proj_c0).sub(&split.proj_c0.mul(&rho)).is_zero() {
            return Err(Error::Invariant("projection fails to commute".into()));
        }
    }
    let lower = 2usize; // identity and proj_c0 are independent commutants
    if upper != lower {
        return Err(Error::Inconsistency(format!(
            "wedge commutant dimension not pinched: {lower} <= dim <= {upper}"
        )));
    }
    Ok(upper)
}

fn pow_mod_u128(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut acc = 1u128;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    acc
}

fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    // m < 2^61: products of reduced values fit in u128
    a % m * (b % m) % m
}

fn fp_rank(rows: &mut [Vec<u64>], cols: usize, p: u128) -> usize {
    let mut rank = 0usize;
    let mut pivot_of_col = vec![usize::MAX; cols];
    for ridx in 0..rows.len() {
        let mut row = rows[ridx].clone();
        while let Some(lead) = row.iter().position(|&x| x != 0) {
            if pivot_of_col[lead] == usize::MAX {
                let inv = pow_mod_u128(row[lead] as u128, p - 2, p);
                for x in row.iter_mut() {
                    *x = mulmod(*x as u128, inv, p) as u64;
                }
                pivot_of_col[lead] = ridx;
                rows[ridx] = row;
                rank += 1;
                break;
            }
            let other = rows[pivot_of_col[lead]].clone();
            let f = row[lead] as u128;
            for (x, o) in row.iter_mut().zip(&other) {
                let sub = mulmod(f, *o as u128, p);
                *x = ((*x as u128 + p - sub) % p) as u64;
            }
        }
    }
    rank
}

/// Torus invariants: sum over factors of the zero-weight multiplicity
/// times the factor multiplicity.
pub fn torus_invariant_dim(weights: &[Vec<i64>], multiplicities: &[u64]) -> Result<u64> {
    if weights.len() != multiplicities.len() {
        return Err(Error::InvalidInput("weights and multiplicities must pair up".into()));
    }
    Ok(weights
        .iter()
        .zip(multiplicities)
        .map(|(w, &m)| w.iter().filter(|&&x| x == 0).count() as u64 * m)
        .sum())
}

/// Ghost dimension: half the torus-invariant dimension of the Tate module.
pub fn ghost_dim(weights: &[Vec<i64>], multiplicities: &[u64]) -> Result<u64> {
    let total = torus_invariant_dim(weights, multiplicities)?;
    if total % 2 != 0 {
        return Err(Error::Invariant(format!(
            "invariant dimension {total} is odd; Tate modules have even rank"
        )));
    }
    Ok(total / 2)
}

/// Weight multisets of the standard representations on a maximal torus,
/// with the documented normalization (values listed with multiplicity).
pub fn so3_std_weights() -> Vec<i64> {
    vec![1, 0, -1]
}

pub fn so5_std_weights() -> Vec<i64> {
    vec![1, 1, 0, -1, -1]
}

/// The 7-dimensional representation under a generic cocharacter of the
/// rank-2 torus: six distinct nonzero values and a single zero.
pub fn g2_seven_weights() -> Vec<i64> {
    vec![3, 2, 1, 0, -1, -2, -3]
}

/// The exact fraction 2 dim / [End : Q].
pub fn oort_invariant(dim: u64, end_degree: u64) -> Result<num_rational::Ratio<i64>> {
    if end_degree == 0 {
        return Err(Error::InvalidInput("endomorphism degree must be >= 1".into()));
    }
    Ok(num_rational::Ratio::new(2 * dim as i64, end_degree as i64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebras_satisfy_identities() {
        for alg in [OctonionAlgebra::division(), OctonionAlgebra::split()] {
            alg.check_random_identities(100, 0xa11e).unwrap();
        }
    }

    #[test]
    fn norm_signatures() {
        let div = OctonionAlgebra::division();
        assert_eq!(div.norm_signature(), (8, 0));
        let split = OctonionAlgebra::split();
        assert_eq!(split.norm_signature(), (4, 4)); // Witt index 4
    }

    #[test]
    fn derivations_dimension_and_closure() {
        for alg in [OctonionAlgebra::division(), OctonionAlgebra::split()] {
            let der = derivation_basis(&alg).unwrap();
            assert_eq!(der.dim(), 14);
            check_derivation_invariants(&alg, &der).unwrap();
        }
    }

    #[test]
    fn lambda2_projection_ranks() {
        for alg in [OctonionAlgebra::division(), OctonionAlgebra::split()] {
            let der = derivation_basis(&alg).unwrap();
            let split = lambda2_split(&alg, &der).unwrap();
            assert_eq!(split.proj_g.rank(), 14);
            assert_eq!(split.proj_c0.rank(), 7);
            assert!(split.proj_g.add(&split.proj_c0).sub(&QMat::identity(21)).is_zero());
        }
    }

    #[test]
    fn long_root_weights_and_stability() {
        let alg = OctonionAlgebra::split();
        let der = derivation_basis(&alg).unwrap();
        let w = long_root_sl2_weights(&alg, &der, 0).unwrap();
        assert_eq!(w.eigenvalues, vec![-1, -1, 0, 0, 0, 1, 1]);
        assert_eq!(w.eigenvalues.iter().sum::<i64>(), 0);
        // stable under the choice of passing nilpotent
        let w2 = long_root_sl2_weights(&alg, &der, 1).unwrap();
        assert_eq!(w2.eigenvalues, w.eigenvalues);
        // h-eigenvalues on the wedge square are pairwise sums; the
        // convolution oracle gives the zero-weight multiplicity
        let expected_zero = {
            let ev = &w.eigenvalues;
            let mut count = 0;
            for i in 0..7 {
                for j in i + 1..7 {
                    if ev[i] + ev[j] == 0 {
                        count += 1;
                    }
                }
            }
            count
        };
        let rho = wedge_action_of(&w.h7);
        let zero_mult = 21 - rho.rank();
        assert_eq!(zero_mult, expected_zero);
        assert_eq!(zero_mult, 7);
    }

    #[test]
    fn commutant_dimensions() {
        let alg = OctonionAlgebra::split();
        let der = derivation_basis(&alg).unwrap();
        assert_eq!(commutant_dimension(&der, None, false).unwrap(), 1);
        let split = lambda2_split(&alg, &der).unwrap();
        assert_eq!(commutant_dimension(&der, Some(&split), true).unwrap(), 2);
    }

    #[test]
    fn ghost_bookkeeping() {
        let inv = torus_invariant_dim(&[so3_std_weights(), so3_std_weights()], &[2, 2]).unwrap();
        assert_eq!(inv, 4);
        assert_eq!(
            ghost_dim(&[so3_std_weights(), so3_std_weights()], &[2, 2]).unwrap(),
            2
        );
        assert_eq!(ghost_dim(&[so5_std_weights()], &[2]).unwrap(), 1);
        let r = 8u64;
        assert_eq!(ghost_dim(&[g2_seven_weights()], &[2 * r]).unwrap(), r);
        // additive over factors; zero on factors without zero weights
        assert_eq!(torus_invariant_dim(&[vec![1, -1]], &[5]).unwrap(), 0);
        assert_eq!(
            torus_invariant_dim(&[so3_std_weights(), vec![2, -2]], &[3, 9]).unwrap(),
            3
        );
    }

    #[test]
    fn oort_fractions() {
        assert_eq!(oort_invariant(6, 8).unwrap(), num_rational::Ratio::new(3, 2));
        assert_eq!(oort_invariant(5, 4).unwrap(), num_rational::Ratio::new(5, 2));
        assert_eq!(oort_invariant(1, 1).unwrap(), num_rational::Ratio::new(2, 1));
        for g in 5..=10u64 {
            assert_eq!(oort_invariant(g, 4).unwrap(), num_rational::Ratio::new(g as i64, 2));
        }
    }
}
