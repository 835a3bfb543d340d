//! The coefficient ring W_N(F_{p^f})[[t]]/(t^T): the unramified extension of
//! Z/p^N of residue degree f, modeled as Z/p^N[x]/(g) for a deterministically
//! chosen irreducible g, extended by a truncated power-series variable t.
//!
//! The Frobenius lift tau acts coordinate-wise on Witt constants (as the
//! canonical lift of x -> x^p) and sends t to t^p.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fq::{canonical_irreducible, is_prime_u64, Fq, FqElem};

/// Parameters of the coefficient ring. Two equal specs produce bit-identical
/// arithmetic: the defining polynomial is the first irreducible one in a
/// fixed enumeration.
#[derive(Clone)]
pub struct RingSpec {
    pub p: u64,
    pub f: usize,
    /// p-adic precision: coefficients live in Z/p^N.
    pub n: u32,
    /// t-truncation: T = 1 means no t variable.
    pub t_trunc: usize,
    /// Non-leading coefficients of the monic defining polynomial.
    pub poly: Vec<u64>,
    pn: BigUint,
    p_big: BigUint,
    /// Powers (tau theta)^0 .. (tau theta)^{f-1}, each as f coordinates.
    tau_pows: Vec<Vec<BigUint>>,
    fq: Fq,
}

impl PartialEq for RingSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.f == other.f && self.n == other.n
            && self.t_trunc == other.t_trunc && self.poly == other.poly
    }
}
impl Eq for RingSpec {}

impl fmt::Debug for RingSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            fm,
            "RingSpec(p={}, f={}, N={}, T={}, poly={:?})",
            self.p, self.f, self.n, self.t_trunc, self.poly
        )
    }
}

impl RingSpec {
    pub fn new(p: u64, f: usize, n: u32, t_trunc: usize) -> Result<Arc<Self>> {
        if p < 3 || !is_prime_u64(p) {
            return Err(Error::InvalidInput(format!("p = {p} must be an odd prime")));
        }
        if f == 0 || n == 0 || t_trunc == 0 {
            return Err(Error::InvalidInput("f, N, T must all be >= 1".into()));
        }
        let poly = canonical_irreducible(p, f);
        let p_big = BigUint::from(p);
        let pn = p_big.pow(n);
        let fq = Fq::new(p, f, poly.clone());
        let mut spec = RingSpec {
            p,
            f,
            n,
            t_trunc,
            poly,
            pn,
            p_big,
            tau_pows: vec![],
            fq,
        };
        spec.init_tau()?;
        Ok(Arc::new(spec))
    }

    /// The t-free ring W_N(F_{p^f}).
    pub fn unramified(p: u64, f: usize, n: u32) -> Result<Arc<Self>> {
        Self::new(p, f, n, 1)
    }

    pub fn residue_field(&self) -> &Fq {
        &self.fq
    }

    pub fn modulus(&self) -> &BigUint {
        &self.pn
    }

    pub fn p_big(&self) -> &BigUint {
        &self.p_big
    }

    /// Same ring with a different t-truncation.
    pub fn with_t_trunc(self: &Arc<Self>, t_trunc: usize) -> Arc<Self> {
        if self.t_trunc == t_trunc {
            return self.clone();
        }
        let mut s = (**self).clone();
        s.t_trunc = t_trunc;
        Arc::new(s)
    }

    fn init_tau(&mut self) -> Result<()> {
        // tau(theta) is the unique root of g in W_N congruent to theta^p.
        let f = self.f;
        if f == 1 {
            self.tau_pows = vec![vec![BigUint::one()]];
            return Ok(());
        }
        let theta: WElem = {
            let mut v = w_zero(f);
            v[1] = BigUint::one();
            v
        };
        let start = w_pow(self, &theta, self.p as u128);
        let root = hensel_root_of_defpoly(self, &start)?;
        let mut pows = Vec::with_capacity(f);
        let mut acc = w_one(f);
        for _ in 0..f {
            pows.push(acc.clone());
            acc = w_mul(self, &acc, &root);
        }
        self.tau_pows = pows;
        Ok(())
    }
}

/// A Witt constant: f coordinates in Z/p^N (polynomial basis).
pub type WElem = Vec<BigUint>;

pub fn w_zero(f: usize) -> WElem {
    vec![BigUint::zero(); f]
}

pub fn w_one(f: usize) -> WElem {
    let mut v = w_zero(f);
    v[0] = BigUint::one();
    v
}

pub fn w_is_zero(a: &WElem) -> bool {
    a.iter().all(|c| c.is_zero())
}

pub fn w_add(spec: &RingSpec, a: &WElem, b: &WElem) -> WElem {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s = x + y;
            if s >= spec.pn {
                s - &spec.pn
            } else {
                s
            }
        })
        .collect()
}

pub fn w_sub(spec: &RingSpec, a: &WElem, b: &WElem) -> WElem {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x >= y {
                x - y
            } else {
                x + &spec.pn - y
            }
        })
        .collect()
}

pub fn w_neg(spec: &RingSpec, a: &WElem) -> WElem {
    a.iter()
        .map(|x| {
            if x.is_zero() {
                BigUint::zero()
            } else {
                &spec.pn - x
            }
        })
        .collect()
}

pub fn w_mul(spec: &RingSpec, a: &WElem, b: &WElem) -> WElem {
    let f = spec.f;
    if f == 1 {
        return vec![a[0].clone() * &b[0] % &spec.pn];
    }
    let mut wide = vec![BigUint::zero(); 2 * f - 1];
    for i in 0..f {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..f {
            if !b[j].is_zero() {
                wide[i + j] += &a[i] * &b[j];
            }
        }
    }
    // reduce x^k = -sum poly[j] x^{k-f+j} for k >= f
    for k in (f..2 * f - 1).rev() {
        let c = std::mem::take(&mut wide[k]) % &spec.pn;
        if c.is_zero() {
            continue;
        }
        for j in 0..f {
            if spec.poly[j] != 0 {
                // subtract c * poly[j]: add pn-reduced complement
                let sub = &c * spec.poly[j] % &spec.pn;
                if !sub.is_zero() {
                    wide[k - f + j] += &spec.pn - sub;
                }
            }
        }
    }
    (0..f).map(|i| std::mem::take(&mut wide[i]) % &spec.pn).collect()
}

pub fn w_scal_u64(spec: &RingSpec, a: &WElem, c: u64) -> WElem {
    a.iter().map(|x| x * c % &spec.pn).collect()
}

pub fn w_pow(spec: &RingSpec, a: &WElem, mut e: u128) -> WElem {
    let mut base = a.clone();
    let mut acc = w_one(spec.f);
    while e > 0 {
        if e & 1 == 1 {
            acc = w_mul(spec, &acc, &base);
        }
        base = w_mul(spec, &base, &base);
        e >>= 1;
    }
    acc
}

/// p-adic valuation of a Witt constant; returns N for zero (which only means
/// "at least N": the true value is unknown at this precision).
pub fn w_val(spec: &RingSpec, a: &WElem) -> u32 {
    let mut best = spec.n;
    for c in a {
        if c.is_zero() {
            continue;
        }
        let mut v = 0u32;
        let mut x = c.clone();
        while (&x % &spec.p_big).is_zero() {
            x /= &spec.p_big;
            v += 1;
            if v >= best {
                break;
            }
        }
        if v < best {
            best = v;
        }
        if best == 0 {
            return 0;
        }
    }
    best
}

pub fn w_reduce_mod_p(spec: &RingSpec, a: &WElem) -> FqElem {
    a.iter()
        .map(|c| {
            let r = c % &spec.p_big;
            r.to_u64_digits().first().copied().unwrap_or(0)
        })
        .collect()
}

pub fn w_lift(_spec: &RingSpec, a: &FqElem) -> WElem {
    a.iter().map(|&c| BigUint::from(c)).collect()
}

pub fn w_from_i64(spec: &RingSpec, a: i64) -> WElem {
    let mut v = w_zero(spec.f);
    let abs = BigUint::from(a.unsigned_abs()) % &spec.pn;
    v[0] = if a < 0 && !abs.is_zero() {
        &spec.pn - abs
    } else {
        abs
    };
    v
}

/// tau on a Witt constant: Z/p^N-linear, substituting theta -> tau(theta).
pub fn w_tau(spec: &RingSpec, a: &WElem) -> WElem {
    let f = spec.f;
    if f == 1 {
        return a.clone();
    }
    let mut out = w_zero(f);
    for j in 0..f {
        if a[j].is_zero() {
            continue;
        }
        for i in 0..f {
            if !spec.tau_pows[j][i].is_zero() {
                out[i] = (&out[i] + &a[j] * &spec.tau_pows[j][i]) % &spec.pn;
            }
        }
    }
    out
}

pub fn w_tau_iter(spec: &RingSpec, a: &WElem, k: usize) -> WElem {
    let mut x = a.clone();
    for _ in 0..(k % spec.f) {
        x = w_tau(spec, &x);
    }
    x
}

/// Inverse of a unit (valuation 0): invert mod p, then Hensel-lift
/// quadratically. Errors on non-units.
pub fn w_inv(spec: &RingSpec, a: &WElem) -> Result<WElem> {
    let res = w_reduce_mod_p(spec, a);
    let fq = spec.residue_field();
    if fq.is_zero(&res) {
        return Err(Error::Precision("inverting a non-unit Witt constant".into()));
    }
    let mut x = w_lift(spec, &fq.inv(&res)?);
    let two = w_from_i64(spec, 2);
    let mut prec = 1u32;
    while prec < spec.n {
        // x <- x(2 - ax)
        let ax = w_mul(spec, a, &x);
        x = w_mul(spec, &x, &w_sub(spec, &two, &ax));
        prec *= 2;
    }
    Ok(x)
}

/// Exact division by p^k; errors when some coordinate is not divisible.
/// The result is only determined mod p^{N-k}; callers must compare at the
/// reduced precision.
pub fn w_div_exact_p(spec: &RingSpec, a: &WElem, k: u32) -> Result<WElem> {
    let pk = spec.p_big.pow(k);
    let mut out = w_zero(spec.f);
    for (i, c) in a.iter().enumerate() {
        if (c % &pk).is_zero() {
            out[i] = c / &pk;
        } else {
            return Err(Error::NonIntegral(format!(
                "coordinate {i} not divisible by p^{k}"
            )));
        }
    }
    Ok(out)
}

/// Newton iteration for a root of the defining polynomial g, starting from
/// an approximation exact mod p. g'(x) is a unit at any simple root.
fn hensel_root_of_defpoly(spec: &RingSpec, start: &WElem) -> Result<WElem> {
    let f = spec.f;
    let eval = |x: &WElem| -> WElem {
        // Horner on monic g: ((x + a_{f-1}) x + a_{f-2}) x + ...
        let mut acc = x.clone();
        for j in (0..f).rev() {
            let cst = w_from_i64(spec, spec.poly[j] as i64);
            acc = w_add(spec, &acc, &cst);
            if j > 0 {
                acc = w_mul(spec, &acc, x);
            }
        }
        acc
    };
    let eval_deriv = |x: &WElem| -> WElem {
        // g'(x) = f x^{f-1} + sum_{j>=1} j a_j x^{j-1}
        let mut acc = w_scal_u64(spec, &w_one(f), f as u64);
        for j in (1..f).rev() {
            acc = w_mul(spec, &acc, x);
            let cst = w_from_i64(spec, (spec.poly[j] as i64) * (j as i64));
            acc = w_add(spec, &acc, &cst);
        }
        acc
    };
    let mut x = start.clone();
    // quadratic convergence: ceil(log2 N) + 1 rounds
    let rounds = 64 - u64::from(spec.n).leading_zeros() + 1;
    for _ in 0..rounds {
        let gx = eval(&x);
        if w_is_zero(&gx) {
            break;
        }
        let dg = eval_deriv(&x);
        let dg_inv = w_inv(spec, &dg)?;
        x = w_sub(spec, &x, &w_mul(spec, &gx, &dg_inv));
    }
    if !w_is_zero(&eval(&x)) {
        return Err(Error::Invariant("Hensel iteration failed to converge".into()));
    }
    Ok(x)
}

/// An element of W_N(F_{p^f})[[t]]/(t^T). Coefficient blocks are stored
/// low-degree first and trailing zero blocks are trimmed, so t-constant
/// elements cost the same regardless of T.
#[derive(Clone)]
pub struct RingElem {
    pub spec: Arc<RingSpec>,
    /// blocks[i] is the Witt-constant coefficient of t^i.
    blocks: Vec<WElem>,
}

impl PartialEq for RingElem {
    fn eq(&self, other: &Self) -> bool {
        assert_eq!(*self.spec, *other.spec, "ring spec mismatch");
        let n = self.blocks.len().max(other.blocks.len());
        for i in 0..n {
            let z = w_zero(self.spec.f);
            let a = self.blocks.get(i).unwrap_or(&z);
            let b = other.blocks.get(i).unwrap_or(&z);
            if a != b {
                return false;
            }
        }
        true
    }
}
impl Eq for RingElem {}

impl fmt::Debug for RingElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "RingElem{:?}", self.coeff_arrays())
    }
}

impl RingElem {
    pub fn zero(spec: &Arc<RingSpec>) -> Self {
        RingElem { spec: spec.clone(), blocks: vec![] }
    }

    pub fn one(spec: &Arc<RingSpec>) -> Self {
        RingElem { spec: spec.clone(), blocks: vec![w_one(spec.f)] }
    }

    pub fn from_w(spec: &Arc<RingSpec>, w: WElem) -> Self {
        let mut e = RingElem { spec: spec.clone(), blocks: vec![w] };
        e.trim();
        e
    }

    pub fn from_i64(spec: &Arc<RingSpec>, a: i64) -> Self {
        Self::from_w(spec, w_from_i64(spec, a))
    }

    /// The series t (zero when T = 1, where t is truncated away).
    pub fn t(spec: &Arc<RingSpec>) -> Self {
        if spec.t_trunc < 2 {
            return Self::zero(spec);
        }
        let mut e = RingElem {
            spec: spec.clone(),
            blocks: vec![w_zero(spec.f), w_one(spec.f)],
        };
        e.trim();
        e
    }

    pub fn from_blocks(spec: &Arc<RingSpec>, blocks: Vec<WElem>) -> Self {
        let mut blocks = blocks;
        blocks.truncate(spec.t_trunc);
        let mut e = RingElem { spec: spec.clone(), blocks };
        e.trim();
        e
    }

    fn trim(&mut self) {
        while let Some(last) = self.blocks.last() {
            if w_is_zero(last) {
                self.blocks.pop();
            } else {
                break;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn t_degree(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }

    pub fn is_t_constant(&self) -> bool {
        self.blocks.len() <= 1
    }

    pub fn constant_term(&self) -> WElem {
        self.blocks.first().cloned().unwrap_or_else(|| w_zero(self.spec.f))
    }

    pub fn block(&self, i: usize) -> WElem {
        self.blocks.get(i).cloned().unwrap_or_else(|| w_zero(self.spec.f))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(*self.spec, *other.spec, "ring spec mismatch");
        let n = self.blocks.len().max(other.blocks.len());
        let mut blocks = Vec::with_capacity(n);
        for i in 0..n {
            let z = w_zero(self.spec.f);
            let a = self.blocks.get(i).unwrap_or(&z);
            let b = other.blocks.get(i).unwrap_or(&z);
            blocks.push(w_add(&self.spec, a, b));
        }
        let mut e = RingElem { spec: self.spec.clone(), blocks };
        e.trim();
        e
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let blocks = self.blocks.iter().map(|b| w_neg(&self.spec, b)).collect();
        let mut e = RingElem { spec: self.spec.clone(), blocks };
        e.trim();
        e
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(*self.spec, *other.spec, "ring spec mismatch");
        if self.is_zero() || other.is_zero() {
            return Self::zero(&self.spec);
        }
        let t = self.spec.t_trunc;
        let la = self.blocks.len();
        let lb = other.blocks.len();
        let lout = (la + lb - 1).min(t);
        let mut blocks = vec![w_zero(self.spec.f); lout];
        for i in 0..la {
            if w_is_zero(&self.blocks[i]) {
                continue;
            }
            for j in 0..lb {
                if i + j >= t {
                    break;
                }
                if w_is_zero(&other.blocks[j]) {
                    continue;
                }
                let prod = w_mul(&self.spec, &self.blocks[i], &other.blocks[j]);
                blocks[i + j] = w_add(&self.spec, &blocks[i + j], &prod);
            }
        }
        let mut e = RingElem { spec: self.spec.clone(), blocks };
        e.trim();
        e
    }

    pub fn scal_i64(&self, c: i64) -> Self {
        self.mul(&Self::from_i64(&self.spec, c))
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.spec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// The Frobenius lift: canonical Frobenius on Witt constants, t -> t^p.
    pub fn tau(&self) -> Self {
        let p = self.spec.p as usize;
        let t = self.spec.t_trunc;
        let mut blocks = vec![];
        for (i, b) in self.blocks.iter().enumerate() {
            if w_is_zero(b) {
                continue;
            }
            let target = i.saturating_mul(p);
            if target >= t {
                continue;
            }
            if blocks.len() <= target {
                blocks.resize(target + 1, w_zero(self.spec.f));
            }
            let tb = w_tau(&self.spec, b);
            blocks[target] = w_add(&self.spec, &blocks[target], &tb);
        }
        let mut e = RingElem { spec: self.spec.clone(), blocks };
        e.trim();
        e
    }

    pub fn tau_iter(&self, k: usize) -> Self {
        let mut x = self.clone();
        let k = if self.is_t_constant() { k % self.spec.f } else { k };
        for _ in 0..k {
            x = x.tau();
        }
        x
    }

    /// Gauss valuation: minimum p-adic valuation over all t-coefficients.
    /// Returns N for zero ("at least N").
    pub fn gauss_val(&self) -> u32 {
        let mut best = self.spec.n;
        for b in &self.blocks {
            let v = w_val(&self.spec, b);
            if v < best {
                best = v;
            }
            if best == 0 {
                break;
            }
        }
        best
    }

    /// Inverse of a unit: the constant term (in t and in p) must be a unit.
    pub fn inv(&self) -> Result<Self> {
        if self.is_t_constant() {
            return Ok(Self::from_w(&self.spec, w_inv(&self.spec, &self.constant_term())?));
        }
        let c0 = Self::from_w(&self.spec, self.constant_term());
        let mut x = c0.inv()?;
        let two = Self::from_i64(&self.spec, 2);
        let mut prec = 1usize;
        while prec < self.spec.t_trunc {
            let ax = self.mul(&x);
            x = x.mul(&two.sub(&ax));
            prec *= 2;
        }
        Ok(x)
    }

    pub fn div_exact_p(&self, k: u32) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| w_div_exact_p(&self.spec, b, k))
            .collect::<Result<Vec<_>>>()?;
        let mut e = RingElem { spec: self.spec.clone(), blocks };
        e.trim();
        Ok(e)
    }

    /// Division by a t-constant element written p^v * unit; exact or error.
    pub fn div_exact(&self, d: &Self) -> Result<Self> {
        if !d.is_t_constant() {
            return Err(Error::InvalidInput("division only by t-constant elements".into()));
        }
        let w = d.constant_term();
        let v = w_val(&self.spec, &w);
        if v >= self.spec.n {
            return Err(Error::Precision("division by (numerically) zero".into()));
        }
        let unit = w_div_exact_p(&self.spec, &w, v).expect("valuation computed above");
        let unit_inv = Self::from_w(&self.spec, w_inv(&self.spec, &unit)?);
        self.mul(&unit_inv).div_exact_p(v)
    }

    /// Congruence mod p^k (used where precision loss is documented).
    pub fn congruent_mod_pk(&self, other: &Self, k: u32) -> bool {
        let d = self.sub(other);
        d.gauss_val() >= k.min(self.spec.n)
    }

    /// Evaluate at t = 0.
    pub fn eval_t0(&self) -> WElem {
        self.constant_term()
    }

    /// Substitute t -> value, mapping coefficients through `map_w`.
    /// Used for Teichmueller specialization; `value` lives in `target`.
    pub fn substitute(
        &self,
        target: &Arc<RingSpec>,
        map_w: &dyn Fn(&WElem) -> WElem,
        value: &RingElem,
    ) -> RingElem {
        let mut acc = RingElem::zero(target);
        for i in (0..self.blocks.len()).rev() {
            acc = acc.mul(value);
            let c = RingElem::from_w(target, map_w(&self.blocks[i]));
            acc = acc.add(&c);
        }
        acc
    }

    pub fn reduce_mod_p(&self) -> Vec<FqElem> {
        self.blocks.iter().map(|b| w_reduce_mod_p(&self.spec, b)).collect()
    }

    /// Nested coefficient arrays [t-index][theta-index], for serialization.
    pub fn coeff_arrays(&self) -> Vec<Vec<BigUint>> {
        self.blocks.clone()
    }
}

/// The Teichmueller lift: the unique root of x^q = x congruent to `residue`.
pub fn teichmuller(spec: &Arc<RingSpec>, residue: &FqElem) -> RingElem {
    let fq = spec.residue_field();
    if fq.is_zero(residue) {
        return RingElem::zero(spec);
    }
    let q = fq.q();
    // Newton for F(x) = x^q - x; F'(x) = q x^{q-1} - 1 = -1 mod p, a unit.
    let mut x = w_lift(spec, residue);
    let rounds = 64 - u64::from(spec.n).leading_zeros() + 1;
    for _ in 0..rounds {
        let xq = w_pow(spec, &x, q);
        let fx = w_sub(spec, &xq, &x);
        if w_is_zero(&fx) {
            break;
        }
        // F'(x) = q x^{q-1} - 1
        let xq1 = w_pow(spec, &x, q - 1);
        let qxq1 = {
            let qmod = BigUint::from(spec.p).pow(spec.f as u32) % spec.modulus();
            xq1.iter().map(|c| c * &qmod % spec.modulus()).collect::<Vec<_>>()
        };
        let deriv = w_sub(spec, &qxq1, &w_one(spec.f));
        let dinv = w_inv(spec, &deriv).expect("derivative is a unit");
        x = w_sub(spec, &x, &w_mul(spec, &fx, &dinv));
    }
    debug_assert!(w_is_zero(&w_sub(spec, &w_pow(spec, &x, q), &x)));
    RingElem::from_w(spec, x)
}

/// Hensel-lift a simple mod-p root of a polynomial with i64 coefficients
/// (ascending). The derivative at the root must be a unit.
pub fn hensel_lift_root(spec: &Arc<RingSpec>, coeffs: &[i64], root_mod_p: &FqElem) -> Result<WElem> {
    let eval = |x: &WElem| -> WElem {
        let mut acc = w_zero(spec.f);
        for c in coeffs.iter().rev() {
            acc = w_mul(spec, &acc, x);
            acc = w_add(spec, &acc, &w_from_i64(spec, *c));
        }
        acc
    };
    let deriv = |x: &WElem| -> WElem {
        let mut acc = w_zero(spec.f);
        for (j, c) in coeffs.iter().enumerate().skip(1).rev() {
            acc = w_mul(spec, &acc, x);
            acc = w_add(spec, &acc, &w_from_i64(spec, *c * j as i64));
        }
        acc
    };
    let mut x = w_lift(spec, root_mod_p);
    let rounds = 64 - u64::from(spec.n).leading_zeros() + 1;
    for _ in 0..rounds {
        let fx = eval(&x);
        if w_is_zero(&fx) {
            break;
        }
        let dinv = w_inv(spec, &deriv(&x))?;
        x = w_sub(spec, &x, &w_mul(spec, &fx, &dinv));
    }
    if !w_is_zero(&eval(&x)) {
        return Err(Error::Precision("Hensel lift did not converge".into()));
    }
    Ok(x)
}

/// Embedding W_N(F_{p^f}) -> W_N'(F_{p^F}) for f | F, sending the source
/// generator to the first root (in coefficient-lex order) of the source
/// defining polynomial. Commutes with the canonical Frobenius lifts.
pub struct Embedding {
    pub src: Arc<RingSpec>,
    pub dst: Arc<RingSpec>,
    /// Powers of the image of the source generator, as dst Witt constants.
    gen_pows: Vec<WElem>,
}

impl Embedding {
    pub fn new(src: &Arc<RingSpec>, dst: &Arc<RingSpec>) -> Result<Embedding> {
        if src.p != dst.p {
            return Err(Error::InvalidInput("embedding requires equal p".into()));
        }
        if dst.f % src.f != 0 {
            return Err(Error::InvalidInput("embedding requires f | F".into()));
        }
        if dst.n > src.n {
            return Err(Error::InvalidInput(
                "embedding cannot raise p-adic precision".into(),
            ));
        }
        let root = if src.f == 1 {
            w_zero(dst.f) // generator of the prime ring maps to the root of x
        } else if src.f == dst.f {
            // identity embedding: same canonical polynomial
            let mut th = w_zero(dst.f);
            th[1] = BigUint::one();
            th
        } else {
            let res_root = subfield_root_mod_p(src, dst)?;
            let coeffs: Vec<i64> = src
                .poly
                .iter()
                .map(|&c| c as i64)
                .chain(std::iter::once(1i64))
                .collect();
            hensel_lift_root(dst, &coeffs, &res_root)?
        };
        let mut gen_pows = Vec::with_capacity(src.f);
        let mut acc = w_one(dst.f);
        for _ in 0..src.f {
            gen_pows.push(acc.clone());
            acc = w_mul(dst, &acc, &root);
        }
        Ok(Embedding { src: src.clone(), dst: dst.clone(), gen_pows })
    }

    pub fn apply_w(&self, a: &WElem) -> WElem {
        let mut out = w_zero(self.dst.f);
        for (j, c) in a.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let c_red = c % self.dst.modulus();
            for i in 0..self.dst.f {
                if !self.gen_pows[j][i].is_zero() {
                    out[i] = (&out[i] + &c_red * &self.gen_pows[j][i]) % self.dst.modulus();
                }
            }
        }
        out
    }

    pub fn apply(&self, a: &RingElem) -> RingElem {
        let blocks = a.coeff_arrays().iter().map(|b| self.apply_w(b)).collect();
        RingElem::from_blocks(&self.dst, blocks)
    }

    /// Express a dst element in the embedded source basis, if possible.
    /// Solves sum_j y_j gen_pows[j] = x over Z/p^N.
    pub fn extract(&self, x: &WElem) -> Result<WElem> {
        let f = self.src.f;
        let bf = self.dst.f;
        // Gauss-Jordan on the bf x f system; pivots must be units.
        let mut cols: Vec<WElem> = self.gen_pows.clone(); // each of length bf
        let mut rhs = x.clone();
        let modulus = self.dst.modulus().clone();
        let p = self.dst.p_big().clone();
        let mut pivot_row = vec![usize::MAX; f];
        let mut used_rows = vec![false; bf];
        for cidx in 0..f {
            let mut found = None;
            for r in 0..bf {
                if !used_rows[r] && !(&cols[cidx][r] % &p).is_zero() {
                    found = Some(r);
                    break;
                }
            }
            let prow = found
                .ok_or_else(|| Error::Precision("subfield extraction: no unit pivot".into()))?;
            used_rows[prow] = true;
            pivot_row[cidx] = prow;
            let pinv = mod_inv(&cols[cidx][prow], &modulus, &p)?;
            for j in cidx..f {
                cols[j][prow] = &cols[j][prow] * &pinv % &modulus;
            }
            rhs[prow] = &rhs[prow] * &pinv % &modulus;
            for r in 0..bf {
                if r == prow || cols[cidx][r].is_zero() {
                    continue;
                }
                let factor = cols[cidx][r].clone();
                for j in cidx..f {
                    let s = &factor * &cols[j][prow] % &modulus;
                    cols[j][r] = sub_mod(&cols[j][r], &s, &modulus);
                }
                let s = &factor * &rhs[prow] % &modulus;
                rhs[r] = sub_mod(&rhs[r], &s, &modulus);
            }
        }
        // back-substitute (columns were eliminated left to right, so later
        // pivots may still appear in earlier rows; run a reverse sweep)
        let mut out = vec![BigUint::zero(); f];
        for cidx in (0..f).rev() {
            let r = pivot_row[cidx];
            let mut val = rhs[r].clone();
            for j in (cidx + 1)..f {
                if !cols[j][r].is_zero() {
                    let s = &cols[j][r] * &out[j] % &modulus;
                    val = sub_mod(&val, &s, &modulus);
                }
            }
            out[cidx] = val;
        }
        // verify (the element must really lie in the embedded subring)
        let check = {
            let mut acc = w_zero(bf);
            for j in 0..f {
                for i in 0..bf {
                    if !self.gen_pows[j][i].is_zero() {
                        acc[i] = (&acc[i] + &out[j] * &self.gen_pows[j][i]) % &modulus;
                    }
                }
            }
            acc
        };
        if check != *x {
            return Err(Error::NonIntegral("element not in embedded subring".into()));
        }
        Ok(out)
    }
}

fn sub_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

fn mod_inv(a: &BigUint, modulus: &BigUint, p: &BigUint) -> Result<BigUint> {
    if (a % p).is_zero() {
        return Err(Error::Precision("inverting non-unit".into()));
    }
    // Hensel on u64 base inverse
    let a0 = (a % p).to_u64_digits().first().copied().unwrap_or(0);
    let p0 = p.to_u64_digits().first().copied().unwrap_or(0);
    let mut x = BigUint::from(crate::fq::inv_mod_p(a0, p0));
    let two = BigUint::from(2u64);
    loop {
        let ax = a * &x % modulus;
        if ax == BigUint::one() {
            return Ok(x);
        }
        let t = sub_mod(&two, &ax, modulus);
        x = &x * t % modulus;
    }
}

/// Root of the source defining polynomial in the residue field of dst,
/// found inside the fixed field of Frobenius^f, first in coefficient-lex
/// order.
fn subfield_root_mod_p(src: &RingSpec, dst: &RingSpec) -> Result<FqElem> {
    let fq = dst.residue_field();
    let bf = dst.f;
    let f = src.f;
    // matrix of Frobenius^f - id over F_p in the polynomial basis
    let mut cols: Vec<FqElem> = Vec::with_capacity(bf);
    for j in 0..bf {
        let mut e = fq.zero();
        e[j] = 1;
        let mut img = e.clone();
        for _ in 0..f {
            img = fq.frobenius(&img);
        }
        cols.push(fq.sub(&img, &e));
    }
    // kernel over F_p via elimination on the bf x bf matrix
    let p = dst.p;
    let mut mat: Vec<Vec<u64>> = (0..bf)
        .map(|r| (0..bf).map(|c| cols[c][r]).collect())
        .collect();
    let mut pivots = vec![usize::MAX; bf];
    let mut rank = 0usize;
    for c in 0..bf {
        let mut pr = None;
        for r in rank..bf {
            if mat[r][c] != 0 {
                pr = Some(r);
                break;
            }
        }
        let Some(pr) = pr else { continue };
        mat.swap(rank, pr);
        let inv = crate::fq::inv_mod_p(mat[rank][c], p);
        for j in 0..bf {
            mat[rank][j] = mat[rank][j] * inv % p;
        }
        for r in 0..bf {
            if r != rank && mat[r][c] != 0 {
                let fac = mat[r][c];
                for j in 0..bf {
                    mat[r][j] = (mat[r][j] + p - fac * mat[rank][j] % p) % p;
                }
            }
        }
        pivots[c] = rank;
        rank += 1;
    }
    // kernel basis: one vector per free column
    let mut basis: Vec<FqElem> = vec![];
    for c in 0..bf {
        if pivots[c] != usize::MAX {
            continue;
        }
        let mut v = vec![0u64; bf];
        v[c] = 1;
        for cc in 0..bf {
            if pivots[cc] != usize::MAX {
                v[cc] = (p - mat[pivots[cc]][c]) % p;
            }
        }
        basis.push(v);
    }
    if basis.len() != f {
        return Err(Error::Invariant(format!(
            "subfield of degree {f} has wrong dimension {}",
            basis.len()
        )));
    }
    // enumerate subfield elements in coefficient-lex order over the basis
    let total = (src.p as u128).pow(f as u32);
    for k in 1..total {
        let mut kk = k;
        let mut cand = fq.zero();
        for b in &basis {
            let d = (kk % p as u128) as u64;
            kk /= p as u128;
            if d != 0 {
                let scaled: FqElem = b.iter().map(|&x| x * d % p).collect();
                cand = fq.add(&cand, &scaled);
            }
        }
        // evaluate src polynomial at cand
        let mut acc = cand.clone();
        for j in (0..f).rev() {
            acc = fq.add(&acc, &fq.from_u64(src.poly[j]));
            if j > 0 {
                acc = fq.mul(&acc, &cand);
            }
        }
        if fq.is_zero(&acc) {
            return Ok(cand);
        }
    }
    Err(Error::Invariant("no root of subfield polynomial found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_elem(spec: &Arc<RingSpec>, rng: &mut ChaCha20Rng, t_deg: usize) -> RingElem {
        let mut blocks = vec![];
        for _ in 0..=t_deg.min(spec.t_trunc - 1) {
            let mut w = w_zero(spec.f);
            for c in w.iter_mut() {
                let mut limbs = vec![];
                for _ in 0..(spec.n as usize / 16 + 1) {
                    limbs.push(rng.random::<u32>());
                }
                *c = BigUint::new(limbs) % spec.modulus();
            }
            blocks.push(w);
        }
        RingElem::from_blocks(spec, blocks)
    }

    #[test]
    fn ring_axioms_random() {
        // associativity, commutativity, distributivity on 1000 random triples
        let spec = RingSpec::new(5, 2, 8, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0001);
        for _ in 0..1000 {
            let a = random_elem(&spec, &mut rng, 3);
            let b = random_elem(&spec, &mut rng, 3);
            let c = random_elem(&spec, &mut rng, 3);
            assert_eq!(a.mul(&b), b.mul(&a));
            assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }
    }

    #[test]
    fn tau_is_ring_hom_and_has_order_f() {
        let spec = RingSpec::new(5, 4, 10, 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0002);
        for _ in 0..50 {
            let a = random_elem(&spec, &mut rng, 2);
            let b = random_elem(&spec, &mut rng, 2);
            assert_eq!(a.mul(&b).tau(), a.tau().mul(&b.tau()));
            assert_eq!(a.add(&b).tau(), a.tau().add(&b.tau()));
            assert_eq!(a.gauss_val(), a.tau().gauss_val());
        }
        // order f on t-constant elements
        for _ in 0..20 {
            let a = random_elem(&spec, &mut rng, 0);
            assert_eq!(a.tau_iter(4), a);
        }
        // tau(t x) = t^p tau(x)
        let t = RingElem::t(&spec);
        let x = random_elem(&spec, &mut rng, 0);
        assert_eq!(t.mul(&x).tau(), t.pow(5).mul(&x.tau()));
    }

    #[test]
    fn valuation_additive() {
        let spec = RingSpec::new(5, 2, 12, 1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0003);
        let p = RingElem::from_i64(&spec, 5);
        for _ in 0..200 {
            let mut a = random_elem(&spec, &mut rng, 0);
            let mut b = random_elem(&spec, &mut rng, 0);
            // random small shifts
            for _ in 0..(rng.random::<u32>() % 3) {
                a = a.mul(&p);
            }
            for _ in 0..(rng.random::<u32>() % 3) {
                b = b.mul(&p);
            }
            let va = a.gauss_val();
            let vb = b.gauss_val();
            if va + vb < spec.n {
                assert_eq!(a.mul(&b).gauss_val(), va + vb);
            }
        }
    }

    #[test]
    fn teichmuller_examples() {
        // teichmuller(1) = 1, teichmuller(0) = 0
        let spec = RingSpec::unramified(5, 1, 16).unwrap();
        let fq = spec.residue_field().clone();
        assert_eq!(teichmuller(&spec, &fq.one()), RingElem::one(&spec));
        assert!(teichmuller(&spec, &fq.zero()).is_zero());

        // p=5, f=1: teichmuller(2)^4 = 1 mod 5^N, and it matches an
        // independent Hensel solution of x^4 = 1 with x = 2 mod 5.
        let t2 = teichmuller(&spec, &fq.from_u64(2));
        assert_eq!(t2.pow(4), RingElem::one(&spec));
        let oracle = hensel_lift_root(&spec, &[-1, 0, 0, 0, 1], &fq.from_u64(2)).unwrap();
        assert_eq!(t2, RingElem::from_w(&spec, oracle));

        // multiplicativity on all pairs of residues, f = 2
        let spec2 = RingSpec::unramified(5, 2, 10).unwrap();
        let f2 = spec2.residue_field().clone();
        for i in 0..25 {
            for j in 0..25 {
                let a = f2.nth(i);
                let b = f2.nth(j);
                let lhs = teichmuller(&spec2, &f2.mul(&a, &b));
                let rhs = teichmuller(&spec2, &a).mul(&teichmuller(&spec2, &b));
                assert_eq!(lhs, rhs);
            }
        }
        // q-th power fixes the lift
        let th = teichmuller(&spec2, &f2.nth(7));
        assert_eq!(th.pow(25), th);
    }

    #[test]
    fn inverse_and_division() {
        let spec = RingSpec::new(5, 2, 10, 6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0004);
        for _ in 0..50 {
            let mut a = random_elem(&spec, &mut rng, 4);
            // force unit constant term
            let mut w = a.constant_term();
            w[0] = &w[0] - (&w[0] % spec.p_big()) + BigUint::one();
            a = a.add(&RingElem::from_w(&spec, w).sub(&RingElem::from_w(&spec, a.constant_term())));
            let ai = a.inv().unwrap();
            assert_eq!(a.mul(&ai), RingElem::one(&spec));
        }
        let x = RingElem::from_i64(&spec, 75); // 3 * 5^2
        assert_eq!(x.div_exact_p(2).unwrap(), RingElem::from_i64(&spec, 3));
        assert!(x.div_exact_p(3).is_err());
    }

    #[test]
    fn embedding_respects_structure() {
        let src = RingSpec::unramified(5, 2, 10).unwrap();
        let dst = RingSpec::unramified(5, 4, 10).unwrap();
        let emb = Embedding::new(&src, &dst).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0005);
        for _ in 0..40 {
            let a = random_elem(&src, &mut rng, 0);
            let b = random_elem(&src, &mut rng, 0);
            assert_eq!(
                emb.apply(&a.mul(&b)),
                emb.apply(&a).mul(&emb.apply(&b))
            );
            // embedding commutes with the Frobenius lifts
            assert_eq!(emb.apply(&a.tau()), emb.apply(&a).tau());
            // extraction round-trips
            let img = emb.apply(&a);
            let back = emb.extract(&img.constant_term()).unwrap();
            assert_eq!(RingElem::from_w(&src, back), a);
        }
    }
}
