//! Arithmetic in the residue field F_{p^f} = F_p[x]/(g), with g the
//! deterministically chosen irreducible polynomial of the ring spec.

use crate::error::{Error, Result};

/// An element of F_{p^f} in the polynomial basis: `f` coefficients mod p.
pub type FqElem = Vec<u64>;

/// The residue field F_{p^f}. `poly` holds the non-leading coefficients of
/// the monic defining polynomial g = x^f + poly[f-1] x^{f-1} + ... + poly[0].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fq {
    pub p: u64,
    pub f: usize,
    pub poly: Vec<u64>,
}

impl Fq {
    pub fn new(p: u64, f: usize, poly: Vec<u64>) -> Self {
        assert_eq!(poly.len(), f);
        Fq { p, f, poly }
    }

    pub fn zero(&self) -> FqElem {
        vec![0; self.f]
    }

    pub fn one(&self) -> FqElem {
        let mut e = vec![0; self.f];
        e[0] = 1;
        e
    }

    pub fn from_u64(&self, a: u64) -> FqElem {
        let mut e = vec![0; self.f];
        e[0] = a % self.p;
        e
    }

    pub fn is_zero(&self, a: &FqElem) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        a.iter().zip(b).map(|(&x, &y)| (x + y) % self.p).collect()
    }

    pub fn sub(&self, a: &FqElem, b: &FqElem) -> FqElem {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x + self.p - y) % self.p)
            .collect()
    }

    pub fn neg(&self, a: &FqElem) -> FqElem {
        a.iter().map(|&x| (self.p - x) % self.p).collect()
    }

    pub fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        let f = self.f;
        if f == 1 {
            return vec![a[0] * b[0] % self.p];
        }
        let mut wide = vec![0u128; 2 * f - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                wide[i + j] += (a[i] as u128) * (b[j] as u128);
            }
        }
        // reduce by g: x^f = -poly
        for k in (f..2 * f - 1).rev() {
            let c = (wide[k] % self.p as u128) as u64;
            wide[k] = 0;
            if c == 0 {
                continue;
            }
            for j in 0..f {
                if self.poly[j] != 0 {
                    let sub = (c as u128) * (self.poly[j] as u128) % self.p as u128;
                    wide[k - f + j] += (self.p as u128) - sub;
                }
            }
        }
        (0..f).map(|i| (wide[i] % self.p as u128) as u64).collect()
    }

    pub fn pow(&self, a: &FqElem, mut e: u128) -> FqElem {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn q(&self) -> u128 {
        (self.p as u128).pow(self.f as u32)
    }

    /// x -> x^p, the absolute Frobenius.
    pub fn frobenius(&self, a: &FqElem) -> FqElem {
        self.pow(a, self.p as u128)
    }

    pub fn frobenius_iter(&self, a: &FqElem, k: usize) -> FqElem {
        let mut x = a.clone();
        for _ in 0..(k % self.f) {
            x = self.frobenius(&x);
        }
        x
    }

    /// Inverse by extended Euclid in F_p[x]; errors on zero.
    pub fn inv(&self, a: &FqElem) -> Result<FqElem> {
        if self.is_zero(a) {
            return Err(Error::InvalidInput("inverse of zero in F_q".into()));
        }
        if self.f == 1 {
            return Ok(vec![inv_mod_p(a[0], self.p)]);
        }
        // extended gcd of a (as polynomial) and g
        let p = self.p;
        let mut g_poly: Vec<u64> = self.poly.clone();
        g_poly.push(1); // monic x^f + ...
        let mut r0 = g_poly;
        let mut r1: Vec<u64> = trim(a.clone());
        let mut s0: Vec<u64> = vec![0];
        let mut s1: Vec<u64> = vec![1];
        while !poly_is_zero(&r1) {
            let (q, r) = poly_divmod(&r0, &r1, p);
            let s = poly_sub(&s0, &poly_mul(&q, &s1, p), p);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        // r0 = gcd (nonzero constant since g irreducible and a != 0 mod g)
        if poly_deg(&r0) != 0 {
            return Err(Error::Invariant(
                "defining polynomial not coprime to element".into(),
            ));
        }
        let c = inv_mod_p(r0[0], p);
        let mut out = vec![0u64; self.f];
        for (i, &coef) in s0.iter().enumerate() {
            if i < self.f {
                out[i] = coef * c % p;
            }
        }
        // s0 may have degree >= f only transiently; reduce defensively
        debug_assert!(poly_deg(&s0) < self.f as i64);
        Ok(out)
    }

    /// Quadratic character: +1 for nonzero squares, -1 for nonsquares.
    /// Errors on zero.
    pub fn chi(&self, a: &FqElem) -> Result<i32> {
        if self.is_zero(a) {
            return Err(Error::InvalidInput("chi(0) undefined".into()));
        }
        let e = (self.q() - 1) / 2;
        let r = self.pow(a, e);
        if r == self.one() {
            Ok(1)
        } else if r == self.neg(&self.one()) {
            Ok(-1)
        } else {
            Err(Error::Invariant("chi value not ±1".into()))
        }
    }

    /// Element with index `k` in the coefficient-lexicographic enumeration.
    pub fn nth(&self, k: u128) -> FqElem {
        let mut e = vec![0u64; self.f];
        let mut k = k;
        for c in e.iter_mut() {
            *c = (k % self.p as u128) as u64;
            k /= self.p as u128;
        }
        e
    }

    /// First nonsquare in the coefficient-lex enumeration.
    pub fn first_nonsquare(&self) -> FqElem {
        for k in 1..self.q() {
            let e = self.nth(k);
            if matches!(self.chi(&e), Ok(-1)) {
                return e;
            }
        }
        unreachable!("half of F_q^* is nonsquare");
    }
}

fn trim(mut v: Vec<u64>) -> Vec<u64> {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
    v
}

fn poly_deg(v: &[u64]) -> i64 {
    for i in (0..v.len()).rev() {
        if v[i] != 0 {
            return i as i64;
        }
    }
    -1
}

fn poly_is_zero(v: &[u64]) -> bool {
    poly_deg(v) < 0
}

fn poly_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let mut out = vec![0u64; n];
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        out[i] = (x + p - y) % p;
    }
    trim(out)
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if poly_is_zero(a) || poly_is_zero(b) {
        return vec![0];
    }
    let mut out = vec![0u128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += (x as u128) * (y as u128);
        }
    }
    trim(out.iter().map(|&c| (c % p as u128) as u64).collect())
}

fn poly_divmod(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let db = poly_deg(b);
    assert!(db >= 0);
    let mut r: Vec<u64> = a.to_vec();
    let mut q = vec![0u64; a.len()];
    let lead_inv = inv_mod_p(b[db as usize], p);
    loop {
        let dr = poly_deg(&r);
        if dr < db {
            break;
        }
        let shift = (dr - db) as usize;
        let c = r[dr as usize] * lead_inv % p;
        q[shift] = (q[shift] + c) % p;
        for j in 0..=db as usize {
            let sub = c * b[j] % p;
            r[shift + j] = (r[shift + j] + p - sub) % p;
        }
    }
    (trim(q), trim(r))
}

pub fn inv_mod_p(a: u64, p: u64) -> u64 {
    // p is a small prime; Fermat
    pow_mod(a % p, p - 2, p)
}

pub fn pow_mod(a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u128;
    let mut base = (a % m) as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m as u128;
        }
        base = base * base % m as u128;
        e >>= 1;
    }
    acc as u64
}

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Irreducibility over F_p via distinct-degree criteria:
/// g (monic, degree f) is irreducible iff x^{p^f} = x mod g and
/// gcd(x^{p^{f/l}} - x, g) = 1 for every prime l | f.
pub fn poly_irreducible(poly_low: &[u64], p: u64) -> bool {
    let f = poly_low.len();
    let fq = Fq::new(p, f, poly_low.to_vec());
    if f == 1 {
        return true;
    }
    // x as an element of F_p[x]/(g)
    let mut x = fq.zero();
    x[1] = 1;
    // x^{p^f} == x
    let mut y = x.clone();
    for _ in 0..f {
        y = fq.frobenius(&y);
    }
    if y != x {
        return false;
    }
    // for each prime l | f: x^{p^{f/l}} - x must be a unit mod g, i.e. the
    // gcd with g is 1; since g may be reducible we test invertibility by
    // extended-euclid directly on the polynomial level.
    let mut m = f;
    let mut primes = vec![];
    let mut d = 2;
    while m > 1 {
        if m % d == 0 {
            primes.push(d);
            while m % d == 0 {
                m /= d;
            }
        }
        d += 1;
    }
    for l in primes {
        let k = f / l;
        let mut z = x.clone();
        for _ in 0..k {
            z = fq.frobenius(&z);
        }
        let diff = fq.sub(&z, &x);
        if fq.is_zero(&diff) {
            return false;
        }
        // gcd(diff-as-poly, g) over F_p[x]
        let mut g_poly: Vec<u64> = poly_low.to_vec();
        g_poly.push(1);
        let mut a = g_poly;
        let mut b = trim(diff);
        while !poly_is_zero(&b) {
            let (_, r) = poly_divmod(&a, &b, p);
            a = b;
            b = r;
        }
        if poly_deg(&a) != 0 {
            return false;
        }
    }
    true
}

/// The first monic irreducible polynomial of degree f over F_p, enumerating
/// the non-leading coefficient tuples (a_0, ..., a_{f-1}) by the integer
/// a_0 + a_1 p + a_2 p^2 + ... in increasing order.
pub fn canonical_irreducible(p: u64, f: usize) -> Vec<u64> {
    if f == 1 {
        // g = x, so the quotient is F_p itself
        return vec![0];
    }
    let mut k: u128 = 0;
    let bound = (p as u128).pow(f as u32);
    while k < bound {
        let mut low = vec![0u64; f];
        let mut kk = k;
        for c in low.iter_mut() {
            *c = (kk % p as u128) as u64;
            kk /= p as u128;
        }
        if poly_irreducible(&low, p) {
            return low;
        }
        k += 1;
    }
    unreachable!("irreducible polynomials of every degree exist");
}
