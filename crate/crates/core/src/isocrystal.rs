//! Semilinear Frobenius matrices and their Newton polygons: the finite
//! (characteristic-polynomial) method, the determinantal-divisor brute
//! force used as an independent oracle, Teichmueller specialization for
//! families over the power-series ring, p-rank and slope-one rank, and the
//! graded wedge square with a rank-one twist.

use std::sync::Arc;

use num_rational::Rational64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::fq::FqElem;
use crate::matrix::{adjugate, charpoly_berkowitz, det_local, Mat};
use crate::ring::{teichmuller, Embedding, RingElem, RingSpec};

/// Z/rZ-grading of a module basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grading {
    pub r: usize,
    pub degrees: Vec<usize>,
}

/// A free module with a tau-semilinear Frobenius F(x) = A tau(x), optionally
/// Z/rZ-graded with F homogeneous of degree 1.
#[derive(Clone, Debug)]
pub struct FModule {
    pub spec: Arc<RingSpec>,
    pub rank: usize,
    pub frobenius: Mat,
    pub grading: Option<Grading>,
}

impl FModule {
    pub fn new(frobenius: Mat, grading: Option<Grading>) -> Result<Self> {
        if frobenius.rows != frobenius.cols {
            return Err(Error::InvalidInput("Frobenius matrix must be square".into()));
        }
        let rank = frobenius.rows;
        let spec = frobenius.spec().clone();
        if let Some(g) = &grading {
            if g.degrees.len() != rank {
                return Err(Error::InvalidInput("grading length != rank".into()));
            }
            if g.r == 0 || g.degrees.iter().any(|&d| d >= g.r) {
                return Err(Error::InvalidInput("grading degrees out of range".into()));
            }
            for i in 0..rank {
                for j in 0..rank {
                    if !frobenius.at(i, j).is_zero()
                        && g.degrees[i] != (g.degrees[j] + 1) % g.r
                    {
                        return Err(Error::Invariant(format!(
                            "Frobenius not homogeneous of degree 1 at entry ({i}, {j})"
                        )));
                    }
                }
            }
        }
        // determinant must have finite valuation; for families this is
        // checked on the special fiber (a lower bound for the Gauss value)
        let (v0, _) = det_local(&frobenius.eval_t0())?;
        if v0 >= spec.n {
            return Err(Error::Precision(
                "det(Frobenius) vanishes to working precision at t = 0".into(),
            ));
        }
        Ok(FModule { spec, rank, frobenius, grading })
    }

    pub fn is_t_constant(&self) -> bool {
        self.frobenius.e.iter().all(|e| e.is_t_constant())
    }

    /// Valuation of det(Frobenius) for a t-constant module.
    pub fn det_val(&self) -> Result<u32> {
        Ok(det_local(&self.frobenius)?.0)
    }

    /// The fiber at t = 0, over the same unramified ring.
    pub fn special_fiber(&self) -> FModule {
        let spec = self.spec.with_t_trunc(1);
        let e = self
            .frobenius
            .e
            .iter()
            .map(|x| RingElem::from_w(&spec, x.eval_t0()))
            .collect();
        FModule {
            spec,
            rank: self.rank,
            frobenius: Mat::new(self.rank, self.rank, e),
            grading: self.grading.clone(),
        }
    }

    /// Base change along the canonical embedding into residue degree `f_big`
    /// (a multiple of the current one). Newton polygons are invariant.
    pub fn base_change(&self, f_big: usize) -> Result<FModule> {
        let target = RingSpec::new(self.spec.p, f_big, self.spec.n, self.spec.t_trunc)?;
        let emb = Embedding::new(&self.spec, &target)?;
        let e = self.frobenius.e.iter().map(|x| emb.apply(x)).collect();
        Ok(FModule {
            spec: target,
            rank: self.rank,
            frobenius: Mat::new(self.rank, self.rank, e),
            grading: self.grading.clone(),
        })
    }
}

/// A non-decreasing multiset of rational slopes. Slopes of an integral
/// Frobenius matrix are always >= 0; the sharper bound slopes <= 1 holds
/// for Dieudonné modules (FV = p) and is asserted by their constructors
/// via `fits_dieudonne`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub slopes: Vec<Rational64>,
}

impl NewtonPolygon {
    pub fn new(mut slopes: Vec<Rational64>) -> Result<Self> {
        slopes.sort();
        if let Some(first) = slopes.first() {
            if *first < Rational64::new(0, 1) {
                return Err(Error::Invariant(format!(
                    "negative slope in polygon {slopes:?}"
                )));
            }
        }
        Ok(NewtonPolygon { slopes })
    }

    /// All slopes within [0, 1], the Dieudonné-module range.
    pub fn fits_dieudonne(&self) -> bool {
        self.slopes
            .last()
            .is_none_or(|s| *s <= Rational64::new(1, 1))
    }

    pub fn height(&self) -> usize {
        self.slopes.len()
    }

    pub fn sum(&self) -> Rational64 {
        self.slopes.iter().sum()
    }

    pub fn multiplicity(&self, s: Rational64) -> usize {
        self.slopes.iter().filter(|&&x| x == s).count()
    }

    /// Dual polygon: s -> 1 - s.
    pub fn dual(&self) -> NewtonPolygon {
        let mut slopes: Vec<Rational64> = self
            .slopes
            .iter()
            .map(|s| Rational64::new(1, 1) - s)
            .collect();
        slopes.sort();
        NewtonPolygon { slopes }
    }

    pub fn is_self_dual(&self) -> bool {
        *self == self.dual()
    }

    /// Concatenation (direct sum of isocrystals).
    pub fn concat(&self, other: &NewtonPolygon) -> NewtonPolygon {
        let mut slopes = self.slopes.clone();
        slopes.extend_from_slice(&other.slopes);
        slopes.sort();
        NewtonPolygon { slopes }
    }

    /// Grothendieck ordering: self lies on or below `other` pointwise
    /// (partial sums of ascending slopes). Requires equal heights.
    pub fn lies_on_or_below(&self, other: &NewtonPolygon) -> bool {
        if self.height() != other.height() {
            return false;
        }
        let mut a = Rational64::new(0, 1);
        let mut b = a;
        for i in 0..self.height() {
            a += self.slopes[i];
            b += other.slopes[i];
            if a > b {
                return false;
            }
        }
        true
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.slopes
            .iter()
            .map(|s| format!("{}/{}", s.numer(), s.denom()))
            .collect()
    }
}

impl std::fmt::Display for NewtonPolygon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}]", self.to_strings().join(", "))
    }
}

/// Lower-hull Newton polygon of a characteristic polynomial; coefficients
/// ascending, monic. Returns eigenvalue valuations (with multiplicity);
/// errors when a hull vertex sits at or above the precision ceiling.
fn eigenvalue_valuations(coeffs: &[RingElem], n_prec: u32) -> Result<Vec<Rational64>> {
    let h = coeffs.len() - 1;
    let pts: Vec<(i64, i64)> = (0..=h)
        .map(|i| (i as i64, coeffs[i].gauss_val() as i64))
        .collect();
    // monotone-chain lower hull over all i (valuations capped at N)
    let mut hull: Vec<(i64, i64)> = vec![];
    for &pt in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // keep b only if it turns left (strictly below segment a-pt)
            if (b.1 - a.1) * (pt.0 - a.0) >= (pt.1 - a.1) * (b.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    // verify hull vertices are certified (below precision ceiling), except
    // that leading coefficients of valuation 0 are always exact
    for &(i, v) in &hull {
        if v >= n_prec as i64 && i != h as i64 {
            return Err(Error::Precision(format!(
                "Newton polygon vertex at X^{i} has valuation >= N = {n_prec}"
            )));
        }
    }
    let mut out = vec![];
    for w in hull.windows(2) {
        let (i1, v1) = w[0];
        let (i2, v2) = w[1];
        let mult = (i2 - i1) as usize;
        let mu = Rational64::new(v1 - v2, i2 - i1);
        for _ in 0..mult {
            out.push(mu);
        }
    }
    if out.len() != h {
        return Err(Error::Invariant("hull does not span the polygon".into()));
    }
    out.sort();
    Ok(out)
}

/// Product A tau(A) ... tau^{k-1}(A), the linearization of the k-th
/// Frobenius iterate.
pub fn twisted_product(a: &Mat, k: usize) -> Mat {
    let mut prod = a.clone();
    let mut twisted = a.clone();
    for _ in 1..k {
        twisted = twisted.tau();
        prod = prod.mul(&twisted);
    }
    prod
}

/// Newton slopes of a t-constant module by the Dieudonne-Manin recipe:
/// the p-adic Newton polygon of char(A tau(A) ... tau^{f-1}(A)), slopes
/// divided by f. Exact rationals; certified against the determinant.
pub fn newton_slopes_finite(module: &FModule) -> Result<NewtonPolygon> {
    if !module.is_t_constant() {
        return Err(Error::InvalidInput(
            "newton_slopes_finite needs a t-constant module".into(),
        ));
    }
    let f = module.spec.f;
    let v_det = module.det_val()?;
    if v_det >= module.spec.n {
        return Err(Error::Precision("det valuation beyond precision".into()));
    }
    if (v_det as u64) * (f as u64) + 2 > module.spec.n as u64 {
        return Err(Error::Precision(format!(
            "need N > f * v(det) + 2 = {}, have N = {}",
            f as u64 * v_det as u64 + 2,
            module.spec.n
        )));
    }
    let b = twisted_product(&module.frobenius, f);
    let coeffs = charpoly_berkowitz(&b);
    let eigen = eigenvalue_valuations(&coeffs, module.spec.n)?;
    let slopes: Vec<Rational64> = eigen
        .into_iter()
        .map(|mu| mu / Rational64::new(f as i64, 1))
        .collect();
    let polygon = NewtonPolygon::new(slopes)?;
    // certificate: sum of slopes = v(det A) exactly
    if polygon.sum() != Rational64::new(v_det as i64, 1) {
        return Err(Error::Inconsistency(format!(
            "slope sum {} != v(det) = {v_det}",
            polygon.sum()
        )));
    }
    Ok(polygon)
}

/// Independent oracle: slopes from windowed differences of determinantal-
/// divisor valuations of the n-fold twisted products. Restricted to small
/// rank. The divisor growth is eventually periodic with period dividing
/// lcm(slope denominators) * f, so candidate windows are scanned from the
/// base lcm upward and anchors from late to early; two consecutive window
/// estimates must agree exactly, and the full sum must reproduce v(det).
pub fn newton_slopes_bruteforce(module: &FModule, steps: usize) -> Result<NewtonPolygon> {
    if !module.is_t_constant() {
        return Err(Error::InvalidInput("brute force needs a t-constant module".into()));
    }
    let h = module.rank;
    if h > 4 {
        return Err(Error::InvalidInput("brute force restricted to rank <= 4".into()));
    }
    let n_prec = module.spec.n;
    let v_det = module.det_val()?;
    let base_window = (1..=h as u64).fold(1u64, num_integer::lcm) as usize;
    // all products up to the largest step the precision certifies: the last
    // divisor d_h(m) = m v(det) must stay below N
    let max_last = if v_det == 0 {
        steps.min(4 * base_window * module.spec.f + 4)
    } else {
        steps.min(((n_prec.saturating_sub(2)) as u64 / v_det as u64) as usize)
    };
    if max_last < 2 * base_window + 1 {
        return Err(Error::Precision(format!(
            "brute force needs {} steps within precision; N = {n_prec}, v(det) = {v_det}",
            2 * base_window + 1
        )));
    }
    let mut divisors: Vec<Vec<i64>> = Vec::with_capacity(max_last + 1);
    divisors.push(vec![0; h + 1]); // m = 0: empty product
    let mut prod = module.frobenius.clone();
    let mut twisted = module.frobenius.clone();
    for k in 1..=max_last {
        if k > 1 {
            twisted = twisted.tau();
            prod = prod.mul(&twisted);
        }
        divisors.push(determinantal_divisor_vals(&prod)?);
    }
    let mut windows = vec![base_window];
    let wf = base_window * module.spec.f;
    if wf != base_window {
        windows.push(wf);
    }
    for w in windows {
        if 2 * w + 1 > max_last {
            continue;
        }
        let mut m0 = max_last - 2 * w;
        loop {
            if m0 == 0 {
                break;
            }
            if let Some(slopes) = try_windows(&divisors, h, m0, w) {
                let polygon = NewtonPolygon::new(slopes)?;
                if polygon.sum() == Rational64::new(v_det as i64, 1) {
                    return Ok(polygon);
                }
            }
            m0 -= 1;
        }
    }
    Err(Error::NonStabilization(format!(
        "no agreeing window pair within {max_last} steps"
    )))
}

fn try_windows(divisors: &[Vec<i64>], h: usize, m0: usize, w: usize) -> Option<Vec<Rational64>> {
    let a = &divisors[m0];
    let b = &divisors[m0 + w];
    let c = &divisors[m0 + 2 * w];
    let mut partial: Vec<Rational64> = vec![Rational64::new(0, 1)];
    for i in 1..=h {
        let s1 = Rational64::new(b[i] - a[i], w as i64);
        let s2 = Rational64::new(c[i] - b[i], w as i64);
        if s1 != s2 {
            return None;
        }
        partial.push(s1);
    }
    let mut slopes = vec![];
    for i in 1..=h {
        let s = partial[i] - partial[i - 1];
        if s < Rational64::new(0, 1) || (i > 1 && s < slopes[i - 2]) {
            return None;
        }
        slopes.push(s);
    }
    Some(slopes)
}

/// d_i = min Gauss valuation over all i x i minors, i = 0..=n.
fn determinantal_divisor_vals(m: &Mat) -> Result<Vec<i64>> {
    let n = m.rows;
    let n_prec = m.spec().n;
    let mut out = vec![0i64];
    for i in 1..=n {
        let rows = combinations(n, i);
        let cols = combinations(n, i);
        let mut best = n_prec;
        for rs in &rows {
            for cs in &cols {
                let v = minor_val(m, rs, cs);
                if v < best {
                    best = v;
                }
            }
        }
        if best >= n_prec {
            return Err(Error::Precision(format!(
                "determinantal divisor {i} vanishes to precision"
            )));
        }
        out.push(best as i64);
    }
    Ok(out)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn minor_val(m: &Mat, rows: &[usize], cols: &[usize]) -> u32 {
    // Laplace expansion; minors here are at most 4x4
    fn det_rec(m: &Mat, rows: &[usize], cols: &[usize]) -> RingElem {
        let spec = m.spec().clone();
        if rows.len() == 1 {
            return m.at(rows[0], cols[0]).clone();
        }
        let mut acc = RingElem::zero(&spec);
        for (k, &c) in cols.iter().enumerate() {
            let sub_rows = &rows[1..];
            let sub_cols: Vec<usize> = cols
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &cc)| cc)
                .collect();
            let term = m.at(rows[0], c).mul(&det_rec(m, sub_rows, &sub_cols));
            if k % 2 == 0 {
                acc = acc.add(&term);
            } else {
                acc = acc.sub(&term);
            }
        }
        acc
    }
    det_rec(m, rows, cols).gauss_val()
}

/// Teichmueller specialization t -> [lambda] of a family; `ext` must be a
/// multiple of the base residue degree. The substitution commutes with the
/// Frobenius lifts since tau(t) = t^p goes to [lambda]^p = [lambda^p].
pub fn specialize(module: &FModule, lambda: &FqElem, ext: usize) -> Result<FModule> {
    if ext % module.spec.f != 0 {
        return Err(Error::InvalidInput(
            "specialization extension must be a multiple of the base degree".into(),
        ));
    }
    let target = RingSpec::unramified(module.spec.p, ext, module.spec.n)?;
    let emb = Embedding::new(&module.spec, &target)?;
    let lam = teichmuller(&target, lambda);
    let map = |w: &crate::ring::WElem| emb.apply_w(w);
    let e: Vec<RingElem> = module
        .frobenius
        .e
        .iter()
        .map(|x| x.substitute(&target, &map, &lam))
        .collect();
    Ok(FModule {
        spec: target,
        rank: module.rank,
        frobenius: Mat::new(module.rank, module.rank, e),
        grading: module.grading.clone(),
    })
}

/// One specialization trial: the chosen lambda index, the determinant
/// valuation certificate, and the resulting polygon.
#[derive(Clone, Debug)]
pub struct GenericTrial {
    pub lambda_index: u128,
    pub det_val: u32,
    pub polygon: NewtonPolygon,
}

#[derive(Clone, Debug)]
pub struct GenericSlopes {
    pub polygon: NewtonPolygon,
    pub trials: Vec<GenericTrial>,
    pub seed: u64,
}

/// Newton slopes of the generic fiber by Teichmueller specialization:
/// substitute t -> [lambda] for random lambda in F_{p^ext}, compute the
/// finite polygon per trial, demand det-valuation agreement across trials,
/// and return the lowest polygon.
pub fn newton_slopes_generic(
    module: &FModule,
    trials: usize,
    ext: usize,
    seed: u64,
) -> Result<GenericSlopes> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let target = RingSpec::unramified(module.spec.p, ext, module.spec.n)?;
    let q = target.residue_field().q();
    let mut results: Vec<GenericTrial> = vec![];
    for _ in 0..trials {
        let mut idx = rng.random::<u64>() as u128 % q;
        if idx == 0 {
            idx = 1; // nonzero lambda keeps the specialization generic
        }
        let lambda = target.residue_field().nth(idx);
        let fiber = specialize(module, &lambda, ext)?;
        let det_val = fiber.det_val()?;
        let polygon = newton_slopes_finite(&fiber)?;
        results.push(GenericTrial { lambda_index: idx, det_val, polygon });
    }
    let v0 = results[0].det_val;
    if results.iter().any(|t| t.det_val != v0) {
        return Err(Error::Inconsistency(format!(
            "trial det valuations differ: {:?}",
            results.iter().map(|t| t.det_val).collect::<Vec<_>>()
        )));
    }
    // lowest polygon in the Grothendieck order
    let mut best: Option<NewtonPolygon> = None;
    for t in &results {
        match &best {
            None => best = Some(t.polygon.clone()),
            Some(b) => {
                if t.polygon.lies_on_or_below(b) {
                    best = Some(t.polygon.clone());
                } else if !b.lies_on_or_below(&t.polygon) {
                    return Err(Error::Inconsistency(
                        "trials produced incomparable polygons".into(),
                    ));
                }
            }
        }
    }
    Ok(GenericSlopes { polygon: best.expect("trials nonempty"), trials: results, seed })
}

/// p-rank: multiplicity of slope 0, read off as the stabilized rank of the
/// mod-p twisted Frobenius products. Needs a t-constant module.
pub fn p_rank(module: &FModule) -> Result<usize> {
    if !module.is_t_constant() {
        return Err(Error::InvalidInput(
            "p_rank needs a t-constant module; specialize first".into(),
        ));
    }
    let fq = module.spec.residue_field();
    Ok(module.frobenius.reduce_mod_p(fq).stabilized_twisted_rank(1))
}

/// Slope-one rank: the p-rank of the Verschiebung side, computed from
/// p A^{-1} = adj(A) * unit(det)^{-1} * p^{1 - v(det)} reduced mod p.
pub fn slope_one_rank(module: &FModule) -> Result<usize> {
    if !module.is_t_constant() {
        return Err(Error::InvalidInput(
            "slope_one_rank needs a t-constant module; specialize first".into(),
        ));
    }
    let spec = &module.spec;
    let (d, det) = det_local(&module.frobenius)?;
    if d + 2 > spec.n {
        return Err(Error::Precision("slope_one_rank needs N >= v(det) + 2".into()));
    }
    let adj = adjugate(&module.frobenius);
    let unit = det.div_exact_p(d).expect("valuation from det_local");
    let unit_inv = RingElem::from_w(spec, crate::ring::w_inv(spec, &unit.constant_term())?);
    let scaled = adj.scal(&unit_inv);
    // p A^{-1} = scaled * p^{1-d}
    let v_side = if d == 0 {
        scaled.scal(&RingElem::from_i64(spec, spec.p as i64))
    } else {
        scaled.div_exact_p(d - 1).map_err(|_| {
            Error::NonIntegral("Verschiebung is not integral: FV = p fails".into())
        })?
    };
    let fq = spec.residue_field();
    Ok(v_side.reduce_mod_p(fq).stabilized_twisted_rank(-1))
}

/// Generic-fiber rank data by specialization trials; rank at a
/// specialization never exceeds the generic rank, so the maximum over
/// trials is a certified lower bound that is exact with high probability.
pub fn p_rank_generic(module: &FModule, trials: usize, ext: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let target = RingSpec::unramified(module.spec.p, ext, module.spec.n)?;
    let q = target.residue_field().q();
    let mut best = 0usize;
    for _ in 0..trials.max(1) {
        let mut idx = rng.random::<u64>() as u128 % q;
        if idx == 0 {
            idx = 1;
        }
        let fiber = specialize(module, &target.residue_field().nth(idx), ext)?;
        best = best.max(p_rank(&fiber)?);
    }
    Ok(best)
}

pub fn slope_one_rank_generic(
    module: &FModule,
    trials: usize,
    ext: usize,
    seed: u64,
) -> Result<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5107e);
    let target = RingSpec::unramified(module.spec.p, ext, module.spec.n)?;
    let q = target.residue_field().q();
    let mut best = 0usize;
    for _ in 0..trials.max(1) {
        let mut idx = rng.random::<u64>() as u128 % q;
        if idx == 0 {
            idx = 1;
        }
        let fiber = specialize(module, &target.residue_field().nth(idx), ext)?;
        best = best.max(slope_one_rank(&fiber)?);
    }
    Ok(best)
}

/// The graded wedge square tensored with the dual of a rank-one twist:
/// degree-sigma piece = dual(N_sigma) (x) Lambda^2(M_sigma). The twist must
/// have rank one in every degree and the module rank at least two per
/// degree. Entries of the result are the 2x2 minors of the degree blocks
/// divided by the twist scalar (exact division required).
pub fn wedge_square_twist(module: &FModule, twist: &FModule) -> Result<FModule> {
    let (r, degrees): (usize, Vec<usize>) = match &module.grading {
        Some(g) => (g.r, g.degrees.clone()),
        None => (1, vec![0; module.rank]),
    };
    let twist_degrees: Vec<usize> = match &twist.grading {
        Some(g) => {
            if g.r != r {
                return Err(Error::RankMismatch("twist grading period differs".into()));
            }
            g.degrees.clone()
        }
        None => {
            if r != 1 {
                return Err(Error::RankMismatch("twist must be graded like the module".into()));
            }
            vec![0; twist.rank]
        }
    };
    // indices per degree
    let by_degree = |degs: &[usize], sigma: usize| -> Vec<usize> {
        degs.iter()
            .enumerate()
            .filter(|&(_, &d)| d == sigma)
            .map(|(i, _)| i)
            .collect()
    };
    let mut twist_scalar: Vec<RingElem> = Vec::with_capacity(r);
    for sigma in 0..r {
        let src = by_degree(&twist_degrees, sigma);
        let dst = by_degree(&twist_degrees, (sigma + 1) % r);
        if src.len() != 1 || dst.len() != 1 {
            return Err(Error::RankMismatch("twist must have rank 1 in every degree".into()));
        }
        twist_scalar.push(twist.frobenius.at(dst[0], src[0]).clone());
    }
    // result basis: pairs (i < j) inside each degree, ordered by degree then
    // lexicographically
    let mut pair_index: Vec<(usize, usize, usize)> = vec![]; // (deg, i, j)
    for sigma in 0..r {
        let idx = by_degree(&degrees, sigma);
        if idx.len() < 2 {
            return Err(Error::RankMismatch("module needs rank >= 2 per degree".into()));
        }
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                pair_index.push((sigma, idx[a], idx[b]));
            }
        }
    }
    let n_out = pair_index.len();
    let spec = module.spec.clone();
    let mut out = Mat::zero(&spec, n_out, n_out);
    for (col, &(sigma, i, j)) in pair_index.iter().enumerate() {
        let tgt = (sigma + 1) % r;
        for (row, &(sig2, k, l)) in pair_index.iter().enumerate() {
            if sig2 != tgt {
                continue;
            }
            // minor: F e_i ^ F e_j component on e_k ^ e_l
            let a = module.frobenius.at(k, i).mul(module.frobenius.at(l, j));
            let b = module.frobenius.at(k, j).mul(module.frobenius.at(l, i));
            let minor = a.sub(&b);
            if minor.is_zero() {
                continue;
            }
            *out.at_mut(row, col) = minor.div_exact(&twist_scalar[sigma])?;
        }
    }
    let grading = Some(Grading {
        r,
        degrees: pair_index.iter().map(|&(s, _, _)| s).collect(),
    });
    FModule::new(out, grading)
}
