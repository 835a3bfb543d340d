//! Elements of the unramified local field W(F_{p^f})[1/p] to finite
//! precision, the tame Hilbert symbol, ternary anisotropy, and the search
//! for totally positive anisotropic triples in a real quadratic order.

use std::sync::Arc;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::fq::FqElem;
use crate::ring::{hensel_lift_root, teichmuller, w_is_zero, RingElem, RingSpec, WElem};

pub use crate::ring::Embedding;

/// A nonzero element of W_N(F_{p^f})[1/p], stored as p^val * unit with the
/// unit part known mod p^N. Zero is represented by a zero unit part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFieldElem {
    pub spec: Arc<RingSpec>,
    pub val: i64,
    pub unit: RingElem,
}

impl LocalFieldElem {
    pub fn zero(spec: &Arc<RingSpec>) -> Self {
        LocalFieldElem { spec: spec.clone(), val: 0, unit: RingElem::zero(spec) }
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    /// Normalize a t-constant ring element into p^v * unit form.
    pub fn from_ring(elem: &RingElem, shift: i64) -> Result<Self> {
        if !elem.is_t_constant() {
            return Err(Error::InvalidInput(
                "local field elements must be t-constant".into(),
            ));
        }
        if elem.is_zero() {
            return Ok(Self::zero(&elem.spec));
        }
        let v = elem.gauss_val();
        if v >= elem.spec.n {
            return Err(Error::Precision(
                "element is zero to working precision; valuation undefined".into(),
            ));
        }
        let unit = elem.div_exact_p(v).expect("valuation just computed");
        Ok(LocalFieldElem { spec: elem.spec.clone(), val: shift + v as i64, unit })
    }

    pub fn from_i64(spec: &Arc<RingSpec>, a: i64) -> Result<Self> {
        Self::from_ring(&RingElem::from_i64(spec, a), 0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(&self.spec);
        }
        LocalFieldElem {
            spec: self.spec.clone(),
            val: self.val + other.val,
            unit: self.unit.mul(&other.unit),
        }
    }

    pub fn neg(&self) -> Self {
        LocalFieldElem { spec: self.spec.clone(), val: self.val, unit: self.unit.neg() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let m = self.val.min(other.val);
        let a = shift_up(&self.unit, (self.val - m) as u32);
        let b = shift_up(&other.unit, (other.val - m) as u32);
        Self::from_ring(&a.add(&b), m)
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidInput("inverse of zero".into()));
        }
        Ok(LocalFieldElem { spec: self.spec.clone(), val: -self.val, unit: self.unit.inv()? })
    }

    /// Residue of the unit part in F_{p^f}.
    pub fn unit_residue(&self) -> Result<FqElem> {
        if self.is_zero() {
            return Err(Error::InvalidInput("zero has no unit residue".into()));
        }
        let r = self.unit.reduce_mod_p();
        Ok(r.into_iter().next().expect("t-constant"))
    }
}

fn shift_up(elem: &RingElem, k: u32) -> RingElem {
    let p = RingElem::from_i64(&elem.spec, elem.spec.p as i64);
    let mut out = elem.clone();
    for _ in 0..k {
        out = out.mul(&p);
    }
    out
}

/// Quadratic character of the unit part's residue.
fn chi(e: &LocalFieldElem) -> Result<i32> {
    let fq = e.spec.residue_field();
    fq.chi(&e.unit_residue()?)
}

/// The tame Hilbert symbol over W(F_{p^f})[1/p], odd residue characteristic:
/// for a = p^alpha u and b = p^beta w,
///   (a, b) = chi(u)^beta * chi(w)^alpha * chi(-1)^{alpha beta}
/// with chi the quadratic-residue character of F_{p^f}.
pub fn hilbert_symbol(a: &LocalFieldElem, b: &LocalFieldElem) -> Result<i32> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::InvalidInput("Hilbert symbol needs nonzero arguments".into()));
    }
    let alpha = a.val.rem_euclid(2);
    let beta = b.val.rem_euclid(2);
    let chi_u = chi(a)?;
    let chi_w = chi(b)?;
    let fq = a.spec.residue_field();
    let chi_m1 = fq.chi(&fq.neg(&fq.one()))?;
    let mut s = 1i32;
    if beta == 1 {
        s *= chi_u;
    }
    if alpha == 1 {
        s *= chi_w;
    }
    if alpha == 1 && beta == 1 {
        s *= chi_m1;
    }
    Ok(s)
}

/// Anisotropy of the diagonal ternary form <d1, d2, d3>: anisotropic iff the
/// Hasse invariant prod_{i<j} (d_i, d_j) differs from (-1, -d1 d2 d3).
pub fn ternary_anisotropic(
    d1: &LocalFieldElem,
    d2: &LocalFieldElem,
    d3: &LocalFieldElem,
) -> Result<bool> {
    if d1.is_zero() || d2.is_zero() || d3.is_zero() {
        return Err(Error::InvalidInput("ternary form must be nondegenerate".into()));
    }
    let hasse = hilbert_symbol(d1, d2)? * hilbert_symbol(d1, d3)? * hilbert_symbol(d2, d3)?;
    let disc = d1.mul(d2).mul(d3);
    let minus_one = LocalFieldElem::from_i64(&d1.spec, -1)?;
    let comparison = hilbert_symbol(&minus_one, &disc.neg())?;
    Ok(hasse != comparison)
}

/// Exhaustive residue-level isotropy oracle for diagonal ternary forms whose
/// entries have valuation 0 or 1: such a form is isotropic over the field
/// iff it has a primitive zero mod p^2 (p odd; Hensel on the unit block or
/// its p-complement). Primitive vectors are enumerated up to unit scaling,
/// fixing the first unit coordinate to 1.
pub fn ternary_isotropic_bruteforce(
    d1: &LocalFieldElem,
    d2: &LocalFieldElem,
    d3: &LocalFieldElem,
) -> Result<bool> {
    let spec = &d1.spec;
    for d in [d1, d2, d3] {
        if d.val < 0 || d.val > 1 {
            return Err(Error::InvalidInput(
                "residue oracle needs entries of valuation 0 or 1".into(),
            ));
        }
    }
    let p = spec.p;
    let p2 = p * p;
    let f = spec.f;
    let dv: Vec<(i64, Vec<u64>)> = [d1, d2, d3]
        .iter()
        .map(|d| {
            let coords = d
                .unit
                .constant_term()
                .iter()
                .map(|c| (c % BigUint::from(p2)).to_u64_digits().first().copied().unwrap_or(0))
                .collect();
            (d.val, coords)
        })
        .collect();
    let wmul = |a: &[u64], b: &[u64]| -> Vec<u64> {
        if f == 1 {
            return vec![a[0] * b[0] % p2];
        }
        let mut wide = vec![0u128; 2 * f - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                wide[i + j] += a[i] as u128 * b[j] as u128;
            }
        }
        for k in (f..2 * f - 1).rev() {
            let c = wide[k] % p2 as u128;
            wide[k] = 0;
            if c == 0 {
                continue;
            }
            for j in 0..f {
                if spec.poly[j] != 0 {
                    wide[k - f + j] +=
                        (p2 as u128 - c * spec.poly[j] as u128 % p2 as u128) % p2 as u128;
                }
            }
        }
        (0..f).map(|i| (wide[i] % p2 as u128) as u64).collect()
    };
    let term = |i: usize, x: &[u64]| -> Vec<u64> {
        let (v, ref u) = dv[i];
        let x2 = wmul(x, x);
        let mut t = wmul(&x2, u);
        if v == 1 {
            t = t.iter().map(|&c| c * p % p2).collect();
        }
        t
    };
    let total = p2.pow(f as u32);
    let decode = |mut k: u64| -> Vec<u64> {
        let mut out = vec![0u64; f];
        for c in out.iter_mut() {
            *c = k % p2;
            k /= p2;
        }
        out
    };
    let in_p = |x: &[u64]| x.iter().all(|&c| c % p == 0);
    let one = {
        let mut o = vec![0u64; f];
        o[0] = 1;
        o
    };
    // shape (1, y, z)
    {
        let t0 = term(0, &one);
        for ky in 0..total {
            let t1 = term(1, &decode(ky));
            let s01: Vec<u64> = t0.iter().zip(&t1).map(|(&u, &v)| (u + v) % p2).collect();
            for kz in 0..total {
                let t2 = term(2, &decode(kz));
                if s01.iter().zip(&t2).all(|(&u, &v)| (u + v) % p2 == 0) {
                    return Ok(true);
                }
            }
        }
    }
    // shape (px, 1, z)
    {
        let t1 = term(1, &one);
        for kx in 0..total {
            let x = decode(kx);
            if !in_p(&x) {
                continue;
            }
            let t0 = term(0, &x);
            let s01: Vec<u64> = t0.iter().zip(&t1).map(|(&u, &v)| (u + v) % p2).collect();
            for kz in 0..total {
                let t2 = term(2, &decode(kz));
                if s01.iter().zip(&t2).all(|(&u, &v)| (u + v) % p2 == 0) {
                    return Ok(true);
                }
            }
        }
    }
    // shape (px, py, 1)
    {
        let t2 = term(2, &one);
        for kx in 0..total {
            let x = decode(kx);
            if !in_p(&x) {
                continue;
            }
            let t0 = term(0, &x);
            for ky in 0..total {
                let y = decode(ky);
                if !in_p(&y) {
                    continue;
                }
                let t1 = term(1, &y);
                if t0
                    .iter()
                    .zip(&t1)
                    .zip(&t2)
                    .all(|((&u, &v), &w)| (u + v + w) % p2 == 0)
                {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// An element x + y sqrt(d) of the real quadratic order Z[sqrt(d)].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadElem {
    pub x: i64,
    pub y: i64,
}

impl QuadElem {
    /// Both real embeddings positive: x + y sqrt(d) > 0 and x - y sqrt(d) > 0.
    pub fn totally_positive(&self, d: i64) -> bool {
        self.x > 0 && self.x * self.x > d * self.y * self.y
    }

    pub fn norm(&self, d: i64) -> i64 {
        self.x * self.x - d * self.y * self.y
    }
}

/// The completion map Z[sqrt(d)] -> W_N(F_{p^2}) at an inert odd prime p:
/// sqrt(d) goes to the Hensel lift of a square root of d in F_{p^2}.
pub struct QuadCompletion {
    pub spec: Arc<RingSpec>,
    pub d: i64,
    sqrt_d: RingElem,
}

impl QuadCompletion {
    pub fn new(spec: &Arc<RingSpec>, d: i64) -> Result<Self> {
        if spec.f % 2 != 0 {
            return Err(Error::InvalidInput(
                "quadratic completion needs even residue degree".into(),
            ));
        }
        let p = spec.p as i64;
        if d <= 1 || d % p == 0 {
            return Err(Error::InvalidInput("p must be unramified in Q(sqrt d)".into()));
        }
        let fq = spec.residue_field();
        let d_mod = fq.from_u64(d.rem_euclid(p) as u64);
        let mut root = None;
        for k in 1..fq.q() {
            let cand = fq.nth(k);
            if fq.mul(&cand, &cand) == d_mod {
                root = Some(cand);
                break;
            }
        }
        let root = root.ok_or_else(|| {
            Error::InvalidInput("d has no square root in the residue field".into())
        })?;
        // p inert <=> d is a nonsquare mod p <=> the root falls outside F_p
        if root.iter().skip(1).all(|&c| c == 0) {
            return Err(Error::InvalidInput("p splits in Q(sqrt d); need inert".into()));
        }
        let lifted = hensel_lift_root(spec, &[-d, 0, 1], &root)?;
        Ok(QuadCompletion { spec: spec.clone(), d, sqrt_d: RingElem::from_w(spec, lifted) })
    }

    pub fn sqrt_d(&self) -> &RingElem {
        &self.sqrt_d
    }

    pub fn embed(&self, a: &QuadElem) -> Result<LocalFieldElem> {
        let x = RingElem::from_i64(&self.spec, a.x);
        let y = RingElem::from_i64(&self.spec, a.y);
        LocalFieldElem::from_ring(&x.add(&y.mul(&self.sqrt_d)), 0)
    }
}

/// Search result of `find_anisotropic_triple`.
#[derive(Clone, Debug)]
pub struct AnisotropicTriple {
    pub elems: (QuadElem, QuadElem, QuadElem),
    pub candidates_scanned: usize,
}

/// Deterministic search for totally positive a, b, c in Z[sqrt(d)] whose
/// diagonal ternary form is anisotropic at the inert prime p.
///
/// Elements are enumerated by height max(|x|, |y|) ascending, then by x,
/// then by y; triples (i <= j <= k) over that list are scanned in
/// colexicographic order. `bound` caps the candidate element list.
pub fn find_anisotropic_triple(
    d: i64,
    p: u64,
    n_prec: u32,
    bound: usize,
) -> Result<AnisotropicTriple> {
    let spec = RingSpec::unramified(p, 2, n_prec)?;
    let comp = QuadCompletion::new(&spec, d)?;
    let mut elems: Vec<QuadElem> = vec![];
    let mut height = 1i64;
    while elems.len() < bound && height < 1 << 20 {
        for x in 1..=height {
            for y in -height..=height {
                if x.max(y.abs()) != height {
                    continue;
                }
                let e = QuadElem { x, y };
                if e.totally_positive(d) {
                    elems.push(e);
                }
            }
        }
        height += 1;
    }
    elems.truncate(bound);
    let embedded: Vec<LocalFieldElem> =
        elems.iter().map(|e| comp.embed(e)).collect::<Result<_>>()?;
    let mut scanned = 0usize;
    for k in 0..elems.len() {
        for j in 0..=k {
            for i in 0..=j {
                scanned += 1;
                if ternary_anisotropic(&embedded[i], &embedded[j], &embedded[k])? {
                    return Ok(AnisotropicTriple {
                        elems: (elems[i], elems[j], elems[k]),
                        candidates_scanned: scanned,
                    });
                }
            }
        }
    }
    Err(Error::SearchExhausted {
        bound,
        context: format!("no anisotropic triple in Q(sqrt {d}) at p = {p}"),
    })
}

/// Diagonalization of a symmetric matrix over the local field (p odd),
/// returning the diagonal entries.
pub fn diagonalize_symmetric(gram: &[Vec<LocalFieldElem>]) -> Result<Vec<LocalFieldElem>> {
    let n = gram.len();
    let mut g: Vec<Vec<LocalFieldElem>> = gram.to_vec();
    let mut diag = vec![];
    for k in 0..n {
        if g[k][k].is_zero() {
            let mut fixed = false;
            for j in k + 1..n {
                if !g[j][j].is_zero() {
                    g.swap(k, j);
                    for row in g.iter_mut() {
                        row.swap(k, j);
                    }
                    fixed = true;
                    break;
                }
            }
            if !fixed {
                // char != 2: adding a row with g[k][j] != 0 creates a
                // nonzero diagonal entry 2 g[k][j]
                let mut done = false;
                for j in k + 1..n {
                    if !g[k][j].is_zero() {
                        for i in 0..n {
                            let a = g[j][i].clone();
                            g[k][i] = g[k][i].add(&a)?;
                        }
                        for i in 0..n {
                            let a = g[i][j].clone();
                            g[i][k] = g[i][k].add(&a)?;
                        }
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(Error::DegenerateForm("zero row in symmetric matrix".into()));
                }
            }
        }
        let pivot = g[k][k].clone();
        if pivot.is_zero() {
            return Err(Error::DegenerateForm("degenerate diagonal block".into()));
        }
        let pinv = pivot.inv()?;
        for j in k + 1..n {
            if g[k][j].is_zero() {
                continue;
            }
            let lambda = g[k][j].mul(&pinv).neg();
            for i in 0..n {
                let add = lambda.mul(&g[i][k]);
                g[i][j] = g[i][j].add(&add)?;
            }
            for i in 0..n {
                let add = lambda.mul(&g[k][i]);
                g[j][i] = g[j][i].add(&add)?;
            }
        }
        diag.push(pivot);
    }
    Ok(diag)
}

/// Complete invariants of a nondegenerate form over the local field:
/// rank, discriminant square class (valuation parity and residue
/// character), and Hasse invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormInvariants {
    pub rank: usize,
    pub disc_val_parity: i64,
    pub disc_chi: i32,
    pub hasse: i32,
}

pub fn form_invariants(diag: &[LocalFieldElem]) -> Result<FormInvariants> {
    let mut disc: Option<LocalFieldElem> = None;
    let mut hasse = 1i32;
    for (i, di) in diag.iter().enumerate() {
        for dj in diag.iter().skip(i + 1) {
            hasse *= hilbert_symbol(di, dj)?;
        }
        disc = Some(match disc {
            None => di.clone(),
            Some(d) => d.mul(di),
        });
    }
    let disc = disc.ok_or_else(|| Error::InvalidInput("empty form".into()))?;
    Ok(FormInvariants {
        rank: diag.len(),
        disc_val_parity: disc.val.rem_euclid(2),
        disc_chi: chi(&disc)?,
        hasse,
    })
}

pub fn same_square_class(a: &LocalFieldElem, b: &LocalFieldElem) -> Result<bool> {
    Ok(a.val.rem_euclid(2) == b.val.rem_euclid(2) && chi(a)? == chi(b)?)
}

/// Reinterpret a Witt constant of the big ring that lies in the embedded
/// subring as an element of the subring.
pub fn subfield_descend(emb: &Embedding, value: &WElem) -> Result<RingElem> {
    if w_is_zero(value) {
        return Ok(RingElem::zero(&emb.src));
    }
    let coords = emb.extract(value)?;
    Ok(RingElem::from_w(&emb.src, coords))
}

/// A deterministic nonsquare unit: the Teichmueller lift of the first
/// nonsquare of the residue field in coefficient-lex order.
pub fn canonical_nonsquare_unit(spec: &Arc<RingSpec>) -> LocalFieldElem {
    let fq = spec.residue_field();
    let ns = fq.first_nonsquare();
    LocalFieldElem { spec: spec.clone(), val: 0, unit: teichmuller(spec, &ns) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn lf(spec: &Arc<RingSpec>, a: i64) -> LocalFieldElem {
        LocalFieldElem::from_i64(spec, a).unwrap()
    }

    fn random_unit(spec: &Arc<RingSpec>, rng: &mut ChaCha20Rng) -> LocalFieldElem {
        let fq = spec.residue_field().clone();
        loop {
            let k = rng.random::<u64>() as u128 % fq.q();
            let r = fq.nth(k);
            if !fq.is_zero(&r) {
                let v = rng.random_range(-2i64..=2);
                return LocalFieldElem {
                    spec: spec.clone(),
                    val: v,
                    unit: teichmuller(spec, &r),
                };
            }
        }
    }

    #[test]
    fn hilbert_trivial_and_legendre() {
        let spec = RingSpec::unramified(5, 1, 12).unwrap();
        for b in [2i64, 3, 5, 10, -1, -5, 7] {
            assert_eq!(hilbert_symbol(&lf(&spec, 1), &lf(&spec, b)).unwrap(), 1);
        }
        // (2, 5) = -1 over Q_5: 2 is a nonsquare mod 5 by the Legendre oracle
        let mut squares = std::collections::HashSet::new();
        for x in 1..5u64 {
            squares.insert(x * x % 5);
        }
        assert!(!squares.contains(&2));
        assert_eq!(hilbert_symbol(&lf(&spec, 2), &lf(&spec, 5)).unwrap(), -1);
    }

    #[test]
    fn hilbert_properties_randomized() {
        // symmetry, bimultiplicativity, (a, -a) = 1; 200 pairs per ring
        for p in [3u64, 5, 13] {
            for f in [1usize, 2] {
                let spec = RingSpec::unramified(p, f, 12).unwrap();
                let mut rng = ChaCha20Rng::seed_from_u64(0x10ca1 ^ (p << 8) ^ f as u64);
                for _ in 0..200 {
                    let a = random_unit(&spec, &mut rng);
                    let b = random_unit(&spec, &mut rng);
                    let c = random_unit(&spec, &mut rng);
                    let ab = hilbert_symbol(&a, &b).unwrap();
                    assert_eq!(ab, hilbert_symbol(&b, &a).unwrap());
                    assert_eq!(
                        hilbert_symbol(&a.mul(&c), &b).unwrap(),
                        ab * hilbert_symbol(&c, &b).unwrap()
                    );
                    assert_eq!(hilbert_symbol(&a, &a.neg()).unwrap(), 1);
                }
            }
        }
    }

    #[test]
    fn ternary_examples() {
        let spec = RingSpec::unramified(5, 1, 12).unwrap();
        for c in [1i64, 2, 5, 10] {
            assert!(!ternary_anisotropic(&lf(&spec, 1), &lf(&spec, -1), &lf(&spec, c)).unwrap());
        }
        // <1, 1, 1> is isotropic over Q_p, p odd (Chevalley-Warning oracle
        // is exercised in ternary_oracle_agreement below)
        assert!(!ternary_anisotropic(&lf(&spec, 1), &lf(&spec, 1), &lf(&spec, 1)).unwrap());
        // diag(1, 2p, -2p delta) over W(F_{p^2})[1/p] is anisotropic
        let spec2 = RingSpec::unramified(5, 2, 12).unwrap();
        let delta = canonical_nonsquare_unit(&spec2);
        let two_p = lf(&spec2, 10);
        let d3 = two_p.mul(&delta).neg();
        assert!(ternary_anisotropic(&lf(&spec2, 1), &two_p, &d3).unwrap());
    }

    #[test]
    fn ternary_oracle_agreement() {
        // all diagonal forms with entries in {1, u, p, up}, p in {3, 5},
        // f in {1, 2}, against the mod-p^2 primitive-solution oracle
        for (p, f) in [(3u64, 1usize), (3, 2), (5, 1), (5, 2)] {
            let spec = RingSpec::unramified(p, f, 12).unwrap();
            let u = canonical_nonsquare_unit(&spec);
            let one = lf(&spec, 1);
            let pe = lf(&spec, p as i64);
            let up = u.mul(&pe);
            let entries = [one, u, pe, up];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        let aniso =
                            ternary_anisotropic(&entries[i], &entries[j], &entries[k]).unwrap();
                        let iso =
                            ternary_isotropic_bruteforce(&entries[i], &entries[j], &entries[k])
                                .unwrap();
                        assert_eq!(aniso, !iso, "disagreement at p={p} f={f} ({i},{j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn triple_search_sqrt2_p5() {
        let result = find_anisotropic_triple(2, 5, 12, 50).unwrap();
        let (a, b, c) = result.elems;
        for e in [a, b, c] {
            assert!(e.totally_positive(2));
        }
        // re-verify through the embedding + Hilbert route
        let spec = RingSpec::unramified(5, 2, 12).unwrap();
        let comp = QuadCompletion::new(&spec, 2).unwrap();
        let ea = comp.embed(&a).unwrap();
        let eb = comp.embed(&b).unwrap();
        let ec = comp.embed(&c).unwrap();
        assert!(ternary_anisotropic(&ea, &eb, &ec).unwrap());
        // the symbol identity -(-1,-abc) = (b,c)(a,c)(a,b)
        let prod = ea.mul(&eb).mul(&ec);
        let m1 = LocalFieldElem::from_i64(&spec, -1).unwrap();
        let lhs = -hilbert_symbol(&m1, &prod.neg()).unwrap();
        let rhs = hilbert_symbol(&eb, &ec).unwrap()
            * hilbert_symbol(&ea, &ec).unwrap()
            * hilbert_symbol(&ea, &eb).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn diagonalization_and_invariants() {
        let spec = RingSpec::unramified(5, 1, 12).unwrap();
        let g = vec![
            vec![lf(&spec, 1), lf(&spec, 1)],
            vec![lf(&spec, 1), lf(&spec, 3)],
        ];
        let d = diagonalize_symmetric(&g).unwrap();
        assert_eq!(d.len(), 2);
        // invariant set matches <1, 2>: same determinant class and Hasse
        let inv1 = form_invariants(&d).unwrap();
        let inv2 = form_invariants(&[lf(&spec, 1), lf(&spec, 2)]).unwrap();
        assert_eq!(inv1, inv2);
        // off-diagonal-only form <<0 1; 1 0>> diagonalizes to a hyperbolic
        // plane, invariants of <1, -1>
        let h = vec![
            vec![LocalFieldElem::zero(&spec), lf(&spec, 1)],
            vec![lf(&spec, 1), LocalFieldElem::zero(&spec)],
        ];
        let dh = diagonalize_symmetric(&h).unwrap();
        let invh = form_invariants(&dh).unwrap();
        let invhyp = form_invariants(&[lf(&spec, 1), lf(&spec, -1)]).unwrap();
        assert_eq!(invh, invhyp);
    }
}
