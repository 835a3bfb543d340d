//! One-parameter window families over W(k)[[t]]: the explicit unipotent
//! deformation of the height-6 module, the two-window lattice-chain
//! construction for Z/rZ-graded modules, window-axiom certificates, Hodge
//! rank bookkeeping, and anchored isogeny-type verification.

use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Rational64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dieudonne::GradedSymmetricModule;
use crate::error::{Error, Result};
use crate::isocrystal::{
    newton_slopes_finite, p_rank, slope_one_rank, specialize, FModule, Grading, NewtonPolygon,
};
use crate::isogeny::IsogenyType;
use crate::matrix::{det_local, solve_exact, Mat};
use crate::ring::{RingElem, RingSpec};

/// A window family: a module over W(k)[[t]]/(t^T) with its Frobenius, the
/// Hodge submodule M_1 = phi^{-1}(p M) given by generator columns
/// (t-constant; unchanged by the unipotent deformations used here), and an
/// optional pairing.
#[derive(Clone, Debug)]
pub struct WindowFamily {
    pub module: FModule,
    /// Generator columns of M_1: kernel lifts completed by p-multiples.
    pub hodge: Mat,
    pub gram: Option<Mat>,
    /// The unipotent matrix composed with the base Frobenius, when the
    /// family arose from a single explicit deformation.
    pub unipotent: Option<Mat>,
}

/// Certificate of the window axiom: phi(M_1) generates p M.
#[derive(Clone, Debug)]
pub struct WindowCertificate {
    /// v(det of phi restricted to the M_1 generators) at t = 0.
    pub det_val: u32,
    pub rank: usize,
    /// Mod-p rank of (phi|M_1)/p at t = 0; full rank means generation.
    pub span_rank: usize,
    pub pass: bool,
}

impl WindowFamily {
    pub fn special_module(&self) -> FModule {
        self.module.special_fiber()
    }

    /// Hodge generators of M_1 = phi^{-1}(p M) for a t-constant Frobenius:
    /// lifts of the mod-p kernel of x -> A sigma(x), completed by p e_i.
    pub fn hodge_generators(a0: &Mat) -> Mat {
        let spec = a0.spec().clone();
        let n = a0.rows;
        let fq = spec.residue_field().clone();
        let am = a0.eval_t0().reduce_mod_p(&fq);
        let mut kernel_cols: Vec<Vec<u64>> = vec![];
        {
            let mut m = am.e.clone();
            let rows = am.rows;
            let colsn = am.cols;
            let mut pivots = vec![usize::MAX; colsn];
            let mut rank = 0usize;
            for c in 0..colsn {
                let mut pr = None;
                for r in rank..rows {
                    if !fq.is_zero(&m[r * colsn + c]) {
                        pr = Some(r);
                        break;
                    }
                }
                let Some(pr) = pr else { continue };
                for cc in 0..colsn {
                    m.swap(rank * colsn + cc, pr * colsn + cc);
                }
                let inv = fq.inv(&m[rank * colsn + c]).expect("pivot");
                for cc in 0..colsn {
                    m[rank * colsn + cc] = fq.mul(&m[rank * colsn + cc], &inv);
                }
                for r in 0..rows {
                    if r != rank && !fq.is_zero(&m[r * colsn + c]) {
                        let f = m[r * colsn + c].clone();
                        for cc in 0..colsn {
                            let s = fq.mul(&f, &m[rank * colsn + cc]);
                            m[r * colsn + cc] = fq.sub(&m[r * colsn + cc], &s);
                        }
                    }
                }
                pivots[c] = rank;
                rank += 1;
            }
            for c in 0..colsn {
                if pivots[c] != usize::MAX {
                    continue;
                }
                let mut v = vec![fq.zero(); colsn];
                v[c] = fq.one();
                for cc in 0..colsn {
                    if pivots[cc] != usize::MAX {
                        v[cc] = fq.neg(&m[pivots[cc] * colsn + c]);
                    }
                }
                // the semilinear kernel {x : A sigma(x) = 0} is sigma^{-1}
                // of the linear one
                let v: Vec<_> = v.iter().map(|x| fq.frobenius_iter(x, fq.f - 1)).collect();
                kernel_cols.push(v.into_iter().flatten().collect());
            }
        }
        let f = spec.f;
        let mut gens = Mat::zero(&spec, n, n);
        let kdim = kernel_cols.len();
        for (j, flat) in kernel_cols.iter().enumerate() {
            for i in 0..n {
                let w: Vec<BigUint> = (0..f).map(|u| BigUint::from(flat[i * f + u])).collect();
                *gens.at_mut(i, j) = RingElem::from_w(&spec, w);
            }
        }
        let p_c = RingElem::from_i64(&spec, spec.p as i64);
        let mut acc = crate::dieudonne::FpAccumulator::new(spec.p);
        for j in 0..kdim {
            let col: Vec<RingElem> = (0..n).map(|i| gens.at(i, j).clone()).collect();
            acc.insert(&crate::dieudonne::flatten_mod_p(&col, f));
        }
        let mut jj = kdim;
        for i in 0..n {
            if jj == n {
                break;
            }
            let mut col = vec![RingElem::zero(&spec); n];
            col[i] = RingElem::one(&spec);
            if acc.insert(&crate::dieudonne::flatten_mod_p(&col, f)) {
                *gens.at_mut(i, jj) = p_c.clone();
                jj += 1;
            }
        }
        assert_eq!(jj, n, "hodge generators must fill the rank");
        gens
    }

    /// Verify phi(M_1) generates p M: every phi(generator) lies in p M and
    /// the p-divided images span with determinant a unit. The determinant
    /// identity v(det phi|M_1) = rank is certified on the divided matrix so
    /// it stays within precision at any rank.
    pub fn check_axiom(&self) -> Result<WindowCertificate> {
        let n = self.module.rank;
        let g = self.module.frobenius.mul(&self.hodge.tau());
        let divided = g
            .div_exact_p(1)
            .map_err(|_| Error::Invariant("phi(M_1) is not contained in p M".into()))?;
        let (dv, _) = det_local(&divided.eval_t0())?;
        let fq = self.module.spec.residue_field();
        let span_rank = divided.eval_t0().reduce_mod_p(fq).rank();
        let pass = dv == 0 && span_rank == n;
        Ok(WindowCertificate { det_val: n as u32 + dv, rank: n, span_rank, pass })
    }

    /// Per-degree Hodge ranks dim M_sigma / M_{sigma,1} of a t-constant
    /// fiber: the mod-p rank of the Frobenius block out of each degree.
    pub fn hodge_rank_profile(fiber: &FModule) -> Result<Vec<usize>> {
        let g = fiber
            .grading
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("profile needs a graded module".into()))?;
        let fq = fiber.spec.residue_field();
        let am = fiber.frobenius.reduce_mod_p(fq);
        let r = g.r;
        let by_degree =
            |sigma: usize| -> Vec<usize> { (0..fiber.rank).filter(|&i| g.degrees[i] == sigma).collect() };
        let mut out = vec![];
        for sigma in 0..r {
            let src = by_degree(sigma);
            let dst = by_degree((sigma + 1) % r);
            let mut block = crate::matrix::FqMat {
                rows: dst.len(),
                cols: src.len(),
                fq: fq.clone(),
                e: vec![fq.zero(); dst.len() * src.len()],
            };
            for (i, &ri) in dst.iter().enumerate() {
                for (j, &cj) in src.iter().enumerate() {
                    block.e[i * src.len() + j] = am.at(ri, cj).clone();
                }
            }
            out.push(block.rank());
        }
        Ok(out)
    }
}

/// The explicit unipotent deformation of the height-6 module: U fixes x1,
/// y1, z1 and sends x0 -> x0, y0 -> y0 + t x0, z0 -> z0 - t y0 - (t^2/2) x0.
/// The deformed Frobenius is the composite of the base Frobenius with U;
/// the special fiber is bit-identical to the base.
pub fn build_prop23_deformation(base: &GradedSymmetricModule) -> Result<WindowFamily> {
    let spec = base.spec().clone();
    if spec.t_trunc < 3 {
        return Err(Error::InvalidInput("need T >= 3 for the degree-2 entry".into()));
    }
    if base.rank() != 6 {
        return Err(Error::InvalidInput("deformation defined for the height-6 module".into()));
    }
    let t = RingElem::t(&spec);
    let half = RingElem::from_i64(&spec, 2).inv()?;
    let mut u = Mat::identity(&spec, 6);
    // columns are images: U(y0) = y0 + t x0, U(z0) = z0 - t y0 - (t^2/2) x0
    *u.at_mut(0, 1) = t.clone();
    *u.at_mut(1, 2) = t.neg();
    *u.at_mut(0, 2) = t.mul(&t).mul(&half).neg();
    if let Some(g) = &base.module.grading {
        for i in 0..6 {
            for j in 0..6 {
                if i != j && !u.at(i, j).is_zero() && g.degrees[i] != g.degrees[j] {
                    return Err(Error::Invariant("U does not respect the grading".into()));
                }
            }
        }
    }
    // U preserves the pairing exactly
    if u.transpose().mul(&base.gram).mul(&u) != base.gram {
        return Err(Error::Invariant("U does not preserve the pairing".into()));
    }
    let deformed = u.mul(&base.module.frobenius);
    if deformed.eval_t0() != base.module.frobenius {
        return Err(Error::Invariant("special fiber differs from the base".into()));
    }
    let hodge = WindowFamily::hodge_generators(&base.module.frobenius);
    let module = FModule::new(deformed, base.module.grading.clone())?;
    let family = WindowFamily {
        module,
        hodge,
        gram: Some(base.gram.clone()),
        unipotent: Some(u),
    };
    let cert = family.check_axiom()?;
    if !cert.pass {
        return Err(Error::Invariant(format!(
            "window axiom fails: det val {}, span {}",
            cert.det_val, cert.span_rank
        )));
    }
    Ok(family)
}

/// Flag data for the two-window construction: the two marked positions and
/// the square-zero endomorphisms attached there. The lattice flags are the
/// canonical Smith refinements, computed deterministically.
#[derive(Clone, Debug)]
pub struct FlagData {
    pub sigma1: usize,
    pub sigma2: usize,
    pub n1: [[i64; 2]; 2],
    pub n2: [[i64; 2]; 2],
}

impl FlagData {
    /// The documented deterministic choice.
    pub fn canonical(sigma1: usize, sigma2: usize) -> FlagData {
        FlagData {
            sigma1,
            sigma2,
            n1: [[0, 0], [1, 0]], // kernel = image = span(e2)
            n2: [[0, 1], [0, 0]], // kernel = image = span(e1)
        }
    }

    /// Candidate square-zero rank-one integer matrices, in search order.
    pub fn nilpotent_candidates() -> Vec<[[i64; 2]; 2]> {
        vec![
            [[0, 0], [1, 0]],
            [[0, 1], [0, 0]],
            [[1, -1], [1, -1]],
            [[-1, 1], [-1, 1]],
            [[1, 1], [-1, -1]],
            [[-1, -1], [1, 1]],
        ]
    }
}

/// Output of the two-window construction.
pub struct TwoslData {
    pub k_family: WindowFamily,
    pub m_family: WindowFamily,
    pub h_module: FModule,
    /// W-lengths of M_2 / phi^{s2-s1}(M_1) and M_1 / phi^{s1-s2+r}(M_2).
    pub lengths: (u64, u64),
    pub r: usize,
    pub flags: FlagData,
}

/// The auxiliary rank-1-per-degree module H of type G_{r-1,1}:
/// F(h_sigma) = h_{sigma+1}, except F(h_{sigma1}) = p h_{sigma1+1}; the
/// single Hodge-rank-zero position sits at sigma1.
pub fn build_h_module(spec: &Arc<RingSpec>, r: usize, sigma1: usize) -> Result<FModule> {
    let mut f = Mat::zero(spec, r, r);
    for sigma in 0..r {
        let c = if sigma == sigma1 { spec.p as i64 } else { 1 };
        *f.at_mut((sigma + 1) % r, sigma) = RingElem::from_i64(spec, c);
    }
    FModule::new(f, Some(Grading { r, degrees: (0..r).collect() }))
}

/// The graded module K of type G_{r-1,1}^2 with Hodge ranks 1 at sigma1 and
/// sigma2 and 2 elsewhere: blocks diag(p, 1) at sigma1, diag(1, p) at
/// sigma2, identity elsewhere.
fn build_k_blocks(spec: &Arc<RingSpec>, r: usize, s1: usize, s2: usize) -> Vec<Mat> {
    (0..r)
        .map(|sigma| {
            if sigma == s1 {
                Mat::from_i64(spec, &[vec![spec.p as i64, 0], vec![0, 1]])
            } else if sigma == s2 {
                Mat::from_i64(spec, &[vec![1, 0], vec![0, spec.p as i64]])
            } else {
                Mat::identity(spec, 2)
            }
        })
        .collect()
}

fn assemble_graded(spec: &Arc<RingSpec>, r: usize, ranks: &[usize], blocks: &[Mat]) -> Mat {
    let offsets: Vec<usize> = ranks
        .iter()
        .scan(0usize, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let total: usize = ranks.iter().sum();
    let mut out = Mat::zero(spec, total, total);
    for sigma in 0..r {
        let b = &blocks[sigma];
        let dst = (sigma + 1) % r;
        for i in 0..ranks[dst] {
            for j in 0..ranks[sigma] {
                *out.at_mut(offsets[dst] + i, offsets[sigma] + j) = b.at(i, j).clone();
            }
        }
    }
    out
}

fn graded_degrees(ranks: &[usize]) -> Vec<usize> {
    let mut out = vec![];
    for (sigma, &k) in ranks.iter().enumerate() {
        out.extend(std::iter::repeat_n(sigma, k));
    }
    out
}

/// Smith reduction over the local ring with inverse-row-operation tracking:
/// A = Rinv D C with C invertible, so the columns of Rinv D span the same
/// lattice as the columns of A. Returns (Rinv, diagonal valuations).
fn smith_row_tracked(spec: &Arc<RingSpec>, a: &Mat) -> (Mat, Vec<u32>) {
    let n = a.rows;
    let mut m: Vec<Vec<RingElem>> = (0..n)
        .map(|i| (0..n).map(|j| a.at(i, j).clone()).collect())
        .collect();
    let mut rinv = Mat::identity(spec, n);
    let mut diag = vec![spec.n; n];
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
            break;
        }
        if pr != k {
            m.swap(k, pr);
            for i in 0..n {
                let tmp = rinv.at(i, k).clone();
                *rinv.at_mut(i, k) = rinv.at(i, pr).clone();
                *rinv.at_mut(i, pr) = tmp;
            }
        }
        if pc != k {
            for row in m.iter_mut() {
                row.swap(k, pc);
            }
        }
        diag[k] = pv;
        let unit = m[k][k].div_exact_p(pv).expect("pivot valuation");
        let unit_inv = unit.inv().expect("unit");
        // row_k <- unit_inv row_k; mirrored as col_k <- unit col_k on Rinv
        for c in k..n {
            m[k][c] = m[k][c].mul(&unit_inv);
        }
        for i in 0..n {
            let v = rinv.at(i, k).mul(&unit);
            *rinv.at_mut(i, k) = v;
        }
        for r in k + 1..n {
            if m[r][k].is_zero() {
                continue;
            }
            let factor = m[r][k].div_exact_p(pv).expect("minimal pivot");
            for c in k..n {
                let s = factor.mul(&m[k][c]);
                m[r][c] = m[r][c].sub(&s);
            }
            for i in 0..n {
                let s = factor.mul(rinv.at(i, r));
                let v = rinv.at(i, k).add(&s);
                *rinv.at_mut(i, k) = v;
            }
        }
        for c in k + 1..n {
            if m[k][c].is_zero() {
                continue;
            }
            let factor = m[k][c].div_exact_p(pv).expect("minimal pivot");
            for r in k..n {
                let s = factor.mul(&m[r][k]);
                m[r][c] = m[r][c].sub(&s);
            }
        }
    }
    (rinv, diag)
}

/// Lattice flags from the image lattice Rinv D up to the standard lattice,
/// lowering one exponent per step; rule: lower the lowest-index position
/// holding the largest remaining exponent.
fn flag_bases(spec: &Arc<RingSpec>, rinv: &Mat, diag: &[u32]) -> Vec<Mat> {
    let n = rinv.rows;
    let mut exps = diag.to_vec();
    let total: u32 = exps.iter().sum();
    let mk = |exps: &[u32]| -> Mat {
        let mut d = Mat::zero(spec, n, n);
        for i in 0..n {
            *d.at_mut(i, i) = RingElem::from_i64(spec, spec.p as i64).pow(exps[i] as u64);
        }
        rinv.mul(&d)
    };
    let mut out = vec![mk(&exps)];
    for _ in 0..total {
        let maxv = *exps.iter().max().unwrap();
        let pos = exps.iter().position(|&e| e == maxv).unwrap();
        exps[pos] -= 1;
        out.push(mk(&exps));
    }
    out
}

/// The two-window construction: the rank-2r deformation K-tilde and the
/// rank-7r lattice-chain module M-tilde, isogenous to K-tilde^2 + H^3, with
/// per-degree Hodge rank at least 6.
pub fn build_twosl(spec: &Arc<RingSpec>, r: usize, flags: &FlagData) -> Result<TwoslData> {
    if spec.f != 1 {
        return Err(Error::InvalidInput(
            "the two-window construction works over the prime ring (f = 1)".into(),
        ));
    }
    if spec.t_trunc < 2 {
        return Err(Error::InvalidInput("need T >= 2".into()));
    }
    if r < 7 {
        return Err(Error::Constraint(format!("need r >= 7, got {r}")));
    }
    let (s1, s2) = (flags.sigma1 % r, flags.sigma2 % r);
    let gap = (s2 + r - s1) % r;
    if !(5..=r - 2).contains(&gap) {
        return Err(Error::Constraint(format!(
            "need 5 <= sigma2 - sigma1 <= r - 2, got {gap}"
        )));
    }
    for (j, nj) in [(1usize, &flags.n1), (2usize, &flags.n2)] {
        let nm = Mat::from_i64(spec, &[nj[0].to_vec(), nj[1].to_vec()]);
        if nm.mul(&nm) != Mat::zero(spec, 2, 2) {
            return Err(Error::Constraint(format!("N{j} is not square-zero")));
        }
        let fq = spec.residue_field();
        if nm.reduce_mod_p(fq).rank() != 1 {
            return Err(Error::Constraint(format!("N{j} must have rank 1")));
        }
        // K_{sigma1,1} reduces to span(e1) mod p, K_{sigma2,1} to span(e2);
        // the image of N_j must escape the corresponding line
        let hodge_row = if j == 1 { 0 } else { 1 };
        let escapes = (0..2).any(|c| nj[1 - hodge_row][c].rem_euclid(spec.p as i64) != 0);
        if !escapes {
            return Err(Error::Constraint(format!("im(N{j}) lies in the Hodge line")));
        }
    }
    let h_module = build_h_module(spec, r, s1)?;
    let k_blocks = build_k_blocks(spec, r, s1, s2);
    let t = RingElem::t(spec);
    let n1m = Mat::from_i64(spec, &[flags.n1[0].to_vec(), flags.n1[1].to_vec()]);
    let n2m = Mat::from_i64(spec, &[flags.n2[0].to_vec(), flags.n2[1].to_vec()]);
    // the deformed Frobenius composes with 1 + t N_j on the block landing
    // in degree sigma_j
    let mut k_tilde_blocks = k_blocks.clone();
    for sigma in 0..r {
        let dst = (sigma + 1) % r;
        let nj = if dst == s1 {
            Some(&n1m)
        } else if dst == s2 {
            Some(&n2m)
        } else {
            None
        };
        if let Some(nj) = nj {
            let twist = Mat::identity(spec, 2).add(&nj.scal(&t));
            k_tilde_blocks[sigma] = twist.mul(&k_tilde_blocks[sigma]);
        }
    }
    let k_ranks = vec![2usize; r];
    let k_tilde_mat = assemble_graded(spec, r, &k_ranks, &k_tilde_blocks);
    let k_undeformed = assemble_graded(spec, r, &k_ranks, &k_blocks);
    let k_module = FModule::new(
        k_tilde_mat,
        Some(Grading { r, degrees: graded_degrees(&k_ranks) }),
    )?;
    let k_family = WindowFamily {
        hodge: WindowFamily::hodge_generators(&k_undeformed),
        module: k_module,
        gram: None,
        unipotent: None,
    };
    let k_cert = k_family.check_axiom()?;
    if !k_cert.pass {
        return Err(Error::Invariant("K window axiom failed".into()));
    }
    // blocks on K^2 + H^3, rank 7 per degree
    let big_block = |sigma: usize| -> Mat {
        let kb = &k_blocks[sigma];
        let h_c = if sigma == s1 { spec.p as i64 } else { 1 };
        let mut b = Mat::zero(spec, 7, 7);
        for copy in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    *b.at_mut(copy * 2 + i, copy * 2 + j) = kb.at(i, j).clone();
                }
            }
        }
        for copy in 0..3 {
            *b.at_mut(4 + copy, 4 + copy) = RingElem::from_i64(spec, h_c);
        }
        b
    };
    let composite = |a: usize, b: usize| -> Mat {
        let mut prod = Mat::identity(spec, 7);
        let mut sigma = a;
        while sigma != b {
            prod = big_block(sigma % r).mul(&prod);
            sigma = (sigma + 1) % r;
            if sigma == a {
                break;
            }
        }
        prod
    };
    let phi_12 = composite(s1, s2);
    let phi_21 = composite(s2, s1);
    let (v5, _) = det_local(&phi_12)?;
    let (v2, _) = det_local(&phi_21)?;
    if (v5 as u64, v2 as u64) != (5, 2) {
        return Err(Error::FlagLength { found: (v5 as u64, v2 as u64), expected: (5, 2) });
    }
    let (rinv_f, diag_f) = smith_row_tracked(spec, &phi_12);
    let f_chain = flag_bases(spec, &rinv_f, &diag_f);
    let (rinv_e, diag_e) = smith_row_tracked(spec, &phi_21);
    let e_chain = flag_bases(spec, &rinv_e, &diag_e);
    // lattice bases: M_sigma = p^{-shift} X_sigma, with the flag pulled
    // back through the remaining composite
    let p_elem = RingElem::from_i64(spec, spec.p as i64);
    let mut bases: Vec<(Mat, u32)> = vec![(Mat::identity(spec, 7), 0); r];
    let mut step = 1usize;
    loop {
        let sigma = (s1 + step) % r;
        if sigma == s2 {
            break;
        }
        let phi = composite(sigma, s2);
        let (e, _) = det_local(&phi)?;
        let fb = &f_chain[step.min(f_chain.len() - 1)];
        let scaled = fb.scal(&p_elem.pow(e as u64));
        let x = solve_exact(&phi, &scaled)?;
        bases[sigma] = normalize_basis(x, e);
        step += 1;
    }
    let mut step = 1usize;
    loop {
        let sigma = (s2 + step) % r;
        if sigma == s1 {
            break;
        }
        let phi = composite(sigma, s1);
        let (e, _) = det_local(&phi)?;
        let eb = &e_chain[step.min(e_chain.len() - 1)];
        let scaled = eb.scal(&p_elem.pow(e as u64));
        let x = solve_exact(&phi, &scaled)?;
        bases[sigma] = normalize_basis(x, e);
        step += 1;
    }
    let mut m_blocks: Vec<Mat> = Vec::with_capacity(r);
    let mut m_blocks_undeformed: Vec<Mat> = Vec::with_capacity(r);
    for sigma in 0..r {
        let dst = (sigma + 1) % r;
        let (x_src, e_src) = &bases[sigma];
        let (x_dst, e_dst) = &bases[dst];
        let raw = big_block(sigma).mul(x_src);
        let b = if e_dst >= e_src {
            let scaled = raw.scal(&p_elem.pow((e_dst - e_src) as u64));
            solve_exact(x_dst, &scaled)?
        } else {
            let sol = solve_exact(x_dst, &raw)?;
            sol.div_exact_p(e_src - e_dst)
                .map_err(|_| Error::Invariant("lattice chain is not phi-stable".into()))?
        };
        m_blocks_undeformed.push(b.clone());
        let twisted = if dst == s1 {
            Mat::identity(spec, 7).add(&embed_nprime(spec, &n1m).scal(&t)).mul(&b)
        } else if dst == s2 {
            Mat::identity(spec, 7).add(&embed_nprime(spec, &n2m).scal(&t)).mul(&b)
        } else {
            b
        };
        m_blocks.push(twisted);
    }
    let m_ranks = vec![7usize; r];
    let m_mat = assemble_graded(spec, r, &m_ranks, &m_blocks);
    let m_undeformed = assemble_graded(spec, r, &m_ranks, &m_blocks_undeformed);
    let m_module = FModule::new(
        m_mat,
        Some(Grading { r, degrees: graded_degrees(&m_ranks) }),
    )?;
    let m_family = WindowFamily {
        hodge: WindowFamily::hodge_generators(&m_undeformed),
        module: m_module,
        gram: None,
        unipotent: None,
    };
    let m_cert = m_family.check_axiom()?;
    if !m_cert.pass {
        return Err(Error::Invariant("M window axiom failed".into()));
    }
    Ok(TwoslData {
        k_family,
        m_family,
        h_module,
        lengths: (v5 as u64, v2 as u64),
        r,
        flags: flags.clone(),
    })
}

/// N'_j: the endomorphism agreeing with N_j on the two K-copies and zero on
/// the three H-copies.
fn embed_nprime(spec: &Arc<RingSpec>, nj: &Mat) -> Mat {
    let mut out = Mat::zero(spec, 7, 7);
    for copy in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                *out.at_mut(copy * 2 + i, copy * 2 + j) = nj.at(i, j).clone();
            }
        }
    }
    out
}

fn normalize_basis(x: Mat, shift: u32) -> (Mat, u32) {
    let v = x.min_val().min(shift);
    if v == 0 {
        return (x, shift);
    }
    (x.div_exact_p(v).expect("min val"), shift - v)
}

/// The deterministic nilpotent search: candidate pairs in a fixed order;
/// the first pair whose deformed K passes the anchored generic certificate
/// for the claimed type wins.
#[allow(clippy::too_many_arguments)]
pub fn find_good_nilpotents(
    spec: &Arc<RingSpec>,
    r: usize,
    s1: usize,
    s2: usize,
    claimed_generic: &IsogenyType,
    trials: usize,
    ext: usize,
    seed: u64,
) -> Result<FlagData> {
    let cands = FlagData::nilpotent_candidates();
    for n1 in &cands {
        for n2 in &cands {
            let flags = FlagData { sigma1: s1, sigma2: s2, n1: *n1, n2: *n2 };
            let data = match build_twosl(spec, r, &flags) {
                Ok(d) => d,
                Err(_) => continue,
            };
            if let Ok(reps) = anchored_type_check_generic(
                &data.k_family.module,
                claimed_generic,
                trials,
                ext,
                seed,
            ) {
                if reps.iter().all(|c| c.pass) {
                    return Ok(flags);
                }
            }
        }
    }
    Err(Error::SearchExhausted {
        bound: cands.len() * cands.len(),
        context: "no nilpotent pair passes the generic certificate".into(),
    })
}

/// Anchored type certificate for a t-constant fiber.
#[derive(Clone, Debug)]
pub struct AnchoredCertificate {
    pub det_val: u32,
    pub slope_sum_expected: Rational64,
    pub p_rank: usize,
    pub p_rank_expected: usize,
    pub slope_one: usize,
    pub slope_one_expected: usize,
    pub height: usize,
    pub height_expected: u64,
    pub pass: bool,
}

/// Verify a claimed isogeny type by four invariants: the determinant
/// valuation (equals the slope sum), the p-rank (slope-0 multiplicity), the
/// slope-one rank, and the height. Under the precondition that the claimed
/// type has at most one isoclinic block with slope strictly inside (0, 1),
/// these four determine the polygon uniquely.
pub fn anchored_type_check(fiber: &FModule, claimed: &IsogenyType) -> Result<AnchoredCertificate> {
    if claimed.middle_block_count() > 1 {
        return Err(Error::Constraint(
            "claimed type has more than one middle block; decompose and check summands".into(),
        ));
    }
    let slopes = claimed.slope_multiset();
    let det_val = fiber.det_val()?;
    let slope_sum_expected = slopes.sum();
    let p_rank_expected = slopes.multiplicity(Rational64::new(0, 1));
    let slope_one_expected = slopes.multiplicity(Rational64::new(1, 1));
    let pr = p_rank(fiber)?;
    let s1 = slope_one_rank(fiber)?;
    let height = fiber.rank;
    let pass = Rational64::new(det_val as i64, 1) == slope_sum_expected
        && pr == p_rank_expected
        && s1 == slope_one_expected
        && height as u64 == claimed.height();
    Ok(AnchoredCertificate {
        det_val,
        slope_sum_expected,
        p_rank: pr,
        p_rank_expected,
        slope_one: s1,
        slope_one_expected,
        height,
        height_expected: claimed.height(),
        pass,
    })
}

/// Anchored certificates for the generic fiber, one per Teichmueller trial.
pub fn anchored_type_check_generic(
    family: &FModule,
    claimed: &IsogenyType,
    trials: usize,
    ext: usize,
    seed: u64,
) -> Result<Vec<AnchoredCertificate>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let target = RingSpec::unramified(family.spec.p, ext, family.spec.n)?;
    let q = target.residue_field().q();
    let mut out = vec![];
    for _ in 0..trials.max(1) {
        let mut idx = rng.random::<u64>() as u128 % q;
        if idx == 0 {
            idx = 1;
        }
        let fiber = specialize(family, &target.residue_field().nth(idx), ext)?;
        out.push(anchored_type_check(&fiber, claimed)?);
    }
    Ok(out)
}

/// The q-dual bookkeeping: the complementary half of the p-divisible group
/// carries the dual formal isogeny type.
pub fn dual_part_type(t: &IsogenyType) -> IsogenyType {
    t.dual()
}

/// Grothendieck specialization: the generic polygon lies on or below the
/// special one.
pub fn specialization_check(family: &WindowFamily, generic: &NewtonPolygon) -> Result<bool> {
    let special = newton_slopes_finite(&family.special_module())?;
    Ok(generic.lies_on_or_below(&special))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dieudonne::build_height6_example;
    use crate::isocrystal::{newton_slopes_generic, p_rank_generic};

    fn prop23_family() -> WindowFamily {
        let spec = RingSpec::new(5, 4, 80, 8).unwrap();
        let base = build_height6_example(&spec).unwrap();
        build_prop23_deformation(&base).unwrap()
    }

    #[test]
    fn prop23_special_and_generic() {
        let fam = prop23_family();
        let special = newton_slopes_finite(&fam.special_module()).unwrap();
        assert_eq!(special.to_strings(), vec!["1/2"; 6]);
        let gen = newton_slopes_generic(&fam.module, 3, 24, 2023).unwrap();
        assert_eq!(
            gen.polygon.to_strings(),
            vec!["0/1", "0/1", "1/2", "1/2", "1/1", "1/1"]
        );
        for t in &gen.trials {
            assert_eq!(t.det_val, 3);
        }
        assert!(gen.polygon.lies_on_or_below(&special));
        assert_eq!(p_rank_generic(&fam.module, 3, 24, 7).unwrap(), 2);
    }

    #[test]
    fn prop23_hodge_bookkeeping() {
        let fam = prop23_family();
        let sp = WindowFamily::hodge_rank_profile(&fam.special_module()).unwrap();
        let lam = RingSpec::unramified(5, 24, 80).unwrap();
        let fiber = specialize(&fam.module, &lam.residue_field().nth(7), 24).unwrap();
        let ge = WindowFamily::hodge_rank_profile(&fiber).unwrap();
        assert_eq!(sp.iter().sum::<usize>(), ge.iter().sum::<usize>());
    }

    #[test]
    fn twosl_r8_construction() {
        let spec = RingSpec::new(5, 1, 56, 4).unwrap();
        let flags = FlagData::canonical(0, 5);
        let data = build_twosl(&spec, 8, &flags).unwrap();
        assert_eq!(data.lengths, (5, 2));
        let profile = WindowFamily::hodge_rank_profile(&data.m_family.special_module()).unwrap();
        assert_eq!(profile.len(), 8);
        assert!(profile.iter().all(|&d| d >= 6), "profile {profile:?}");
        // K special type G_{7,1}^2 by the full polygon
        let ks = newton_slopes_finite(&data.k_family.special_module()).unwrap();
        let expected = IsogenyType::parse("G_{7,1}^2").unwrap().slope_multiset();
        assert_eq!(ks, expected);
        let cert = anchored_type_check(
            &data.k_family.special_module(),
            &IsogenyType::parse("G_{7,1}^2").unwrap(),
        )
        .unwrap();
        assert!(cert.pass, "{cert:?}");
        // M special has a single middle block: anchored against G_{7,1}^7
        let mcert = anchored_type_check(
            &data.m_family.special_module(),
            &IsogenyType::parse("G_{7,1}^7").unwrap(),
        )
        .unwrap();
        assert!(mcert.pass, "{mcert:?}");
    }

    #[test]
    fn twosl_r8_generic_types() {
        let spec = RingSpec::new(5, 1, 56, 4).unwrap();
        let flags = FlagData::canonical(0, 5);
        let data = build_twosl(&spec, 8, &flags).unwrap();
        let claimed = IsogenyType::parse("G_{6,2} + G_{1,0}^8").unwrap();
        let reps =
            anchored_type_check_generic(&data.k_family.module, &claimed, 3, 24, 11).unwrap();
        assert!(reps.iter().all(|c| c.pass), "{reps:?}");
        // the full polygon agrees with the anchored claim at rank 16
        let gen = newton_slopes_generic(&data.k_family.module, 3, 24, 42).unwrap();
        assert_eq!(gen.polygon, claimed.slope_multiset());
        // Grothendieck specialization for K
        assert!(specialization_check(&data.k_family, &gen.polygon).unwrap());
        // M special is isogenous to K_special^2 + H^3 at the polygon level
        let m_special = newton_slopes_finite(&data.m_family.special_module()).unwrap();
        let k_special = newton_slopes_finite(&data.k_family.special_module()).unwrap();
        let h_poly = newton_slopes_finite(&data.h_module).unwrap();
        let assembled = k_special
            .concat(&k_special)
            .concat(&h_poly.concat(&h_poly).concat(&h_poly));
        assert_eq!(m_special, assembled);
    }

    #[test]
    fn twosl_constraints() {
        let spec = RingSpec::new(5, 1, 40, 4).unwrap();
        assert!(matches!(
            build_twosl(&spec, 6, &FlagData::canonical(0, 5)),
            Err(Error::Constraint(_))
        ));
        assert!(matches!(
            build_twosl(&spec, 8, &FlagData::canonical(0, 3)),
            Err(Error::Constraint(_))
        ));
        let mut flags = FlagData::canonical(0, 5);
        flags.n1 = [[0, 1], [0, 0]]; // image = the Hodge line at sigma1
        assert!(matches!(build_twosl(&spec, 8, &flags), Err(Error::Constraint(_))));
    }

    #[test]
    fn anchored_precondition() {
        let two_middle = IsogenyType::parse("G_{6,2}^2 + G_{1,0}^16 + G_{7,1}^3").unwrap();
        let spec = RingSpec::unramified(5, 1, 16).unwrap();
        let m = FModule::new(Mat::from_i64(&spec, &[vec![1]]), None).unwrap();
        assert!(matches!(
            anchored_type_check(&m, &two_middle),
            Err(Error::Constraint(_))
        ));
        let ss = FModule::new(Mat::from_i64(&spec, &[vec![0, 5], vec![1, 0]]), None).unwrap();
        let ty = IsogenyType::from_slopes(&newton_slopes_finite(&ss).unwrap()).unwrap();
        assert!(anchored_type_check(&ss, &ty).unwrap().pass);
    }

    #[test]
    fn thm31_bookkeeping() {
        // M generic assembled by isogeny additivity; the dual is the stated
        // q-part; the ghost type is self-dual and indecomposable
        let k_gen = IsogenyType::parse("G_{6,2} + G_{1,0}^8").unwrap();
        let h_ty = IsogenyType::parse("G_{7,1}").unwrap();
        let m_gen = k_gen.scale(2).sum(&h_ty.scale(3));
        let dual = dual_part_type(&m_gen);
        let stated = IsogenyType::parse("G_{0,1}^16 + G_{1,7}^3 + G_{2,6}^2").unwrap();
        assert_eq!(dual, stated);
        let ghost = h_ty.sum(&h_ty.dual());
        assert_eq!(ghost, IsogenyType::parse("G_{1,7} + G_{7,1}").unwrap());
        assert!(ghost.is_self_dual());
        assert!(!ghost.decomposable_into_self_duals());
        assert_eq!(dual_part_type(&dual_part_type(&m_gen)), m_gen);
    }

    #[test]
    fn twosl_other_periods() {
        // r = 7 forces sigma2 - sigma1 = 5; r = 9 allows up to 7. The
        // quotient lengths and the Hodge bound are period-independent.
        for (r, s2) in [(7usize, 5usize), (9, 5), (9, 6)] {
            let spec = RingSpec::new(5, 1, 50, 4).unwrap();
            let data = build_twosl(&spec, r, &FlagData::canonical(0, s2)).unwrap();
            assert_eq!(data.lengths, (5, 2), "r={r} s2={s2}");
            let profile =
                WindowFamily::hodge_rank_profile(&data.m_family.special_module()).unwrap();
            assert_eq!(profile.len(), r);
            assert!(profile.iter().all(|&d| d >= 6), "r={r}: {profile:?}");
            let claimed = IsogenyType::single(r as u64 - 1, 1, 2).unwrap();
            let cert = anchored_type_check(&data.k_family.special_module(), &claimed).unwrap();
            assert!(cert.pass, "r={r}: {cert:?}");
        }
    }

    #[test]
    fn nilpotent_search_finds_canonical() {
        let spec = RingSpec::new(5, 1, 40, 4).unwrap();
        let claimed = IsogenyType::parse("G_{6,2} + G_{1,0}^8").unwrap();
        let flags = find_good_nilpotents(&spec, 8, 0, 5, &claimed, 2, 24, 3).unwrap();
        assert_eq!(flags.n1, [[0, 0], [1, 0]]);
        assert_eq!(flags.n2, [[0, 1], [0, 0]]);
    }
}
