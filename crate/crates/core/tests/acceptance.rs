//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its certificates and asserting the stated time budget. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use num_rational::Rational64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use dieudonne::deform::{
    anchored_type_check, anchored_type_check_generic, build_prop23_deformation, build_twosl,
    dual_part_type, FlagData, WindowFamily,
};
use dieudonne::dieudonne::{build_height6_example, skeleton_anisotropic, skeleton_solve};
use dieudonne::isocrystal::{
    newton_slopes_bruteforce, newton_slopes_finite, newton_slopes_generic, p_rank_generic,
    wedge_square_twist, FModule, NewtonPolygon,
};
use dieudonne::isogeny::{classify_graded_symmetric, IsogenyType};
use dieudonne::local::{
    canonical_nonsquare_unit, diagonalize_symmetric, find_anisotropic_triple, form_invariants,
    hilbert_symbol, ternary_anisotropic, ternary_isotropic_bruteforce, LocalFieldElem,
    QuadCompletion,
};
use dieudonne::matrix::Mat;
use dieudonne::octonion::{
    check_derivation_invariants, commutant_dimension, derivation_basis, g2_seven_weights,
    ghost_dim, lambda2_split, long_root_sl2_weights, oort_invariant, so3_std_weights,
    so5_std_weights, wedge_action_of, OctonionAlgebra, QMat,
};
use dieudonne::ring::{teichmuller, RingElem, RingSpec};

fn report(criterion: &str, detail: &str, started: Instant, budget_s: u64) {
    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE {criterion}: PASS ({detail}) [{:.2}s < {budget_s}s]",
        elapsed.as_secs_f64()
    );
    assert!(
        elapsed < Duration::from_secs(budget_s),
        "{criterion} exceeded its {budget_s}s budget: {elapsed:?}"
    );
}

#[test]
fn criterion_01_height6_slopes() {
    let started = Instant::now();
    let spec = RingSpec::unramified(5, 4, 16).unwrap();
    let m = build_height6_example(&spec).unwrap();
    let poly = newton_slopes_finite(&m.module).unwrap();
    assert_eq!(poly.slopes, vec![Rational64::new(1, 2); 6]);
    report("1 (height-6 slopes)", &format!("{poly}"), started, 10);
}

#[test]
fn criterion_02_deformation_fibers() {
    let started = Instant::now();
    let spec = RingSpec::new(5, 4, 80, 8).unwrap();
    let base = build_height6_example(&spec).unwrap();
    let fam = build_prop23_deformation(&base).unwrap();
    let special = newton_slopes_finite(&fam.special_module()).unwrap();
    assert_eq!(special.slopes, vec![Rational64::new(1, 2); 6]);
    let gen = newton_slopes_generic(&fam.module, 3, 24, 2023).unwrap();
    let want = NewtonPolygon::new(
        vec![0, 0, 1, 1, 2, 2]
            .into_iter()
            .map(|n| Rational64::new(n, 2))
            .collect(),
    )
    .unwrap();
    assert_eq!(gen.polygon, want);
    // three trials agree, and each carries the det-valuation certificate
    assert_eq!(gen.trials.len(), 3);
    for t in &gen.trials {
        assert_eq!(t.polygon, gen.polygon);
        assert_eq!(t.det_val, 3);
    }
    let pr = p_rank_generic(&fam.module, 3, 24, 7).unwrap();
    assert_eq!(pr, 2);
    report(
        "2 (deformation fibers)",
        &format!("special {special}; generic {}; p-rank {pr}", gen.polygon),
        started,
        120,
    );
}

#[test]
fn criterion_03_classification() {
    let started = Instant::now();
    let c6 = classify_graded_symmetric(6).unwrap();
    let want6 = [
        IsogenyType::parse("G_{1,1}^3").unwrap(),
        IsogenyType::parse("G_{0,1}^2 + G_{1,1} + G_{1,0}^2").unwrap(),
    ];
    assert_eq!(c6.len(), 2);
    assert!(want6.iter().all(|t| c6.contains(t)));
    let c4 = classify_graded_symmetric(4).unwrap();
    let want4 = [
        IsogenyType::parse("G_{1,1}^2").unwrap(),
        IsogenyType::parse("G_{0,1}^2 + G_{1,0}^2").unwrap(),
    ];
    assert_eq!(c4.len(), 2);
    assert!(want4.iter().all(|t| c4.contains(t)));
    report("3 (classification)", "heights 6 and 4 as stated", started, 1);
}

#[test]
fn criterion_04_skeleton() {
    let started = Instant::now();
    let spec = RingSpec::unramified(5, 4, 16).unwrap();
    let m = build_height6_example(&spec).unwrap();
    let skel = skeleton_solve(&m).unwrap();
    assert_eq!(skel.dim, 3);
    assert!(skeleton_anisotropic(&skel).unwrap());
    // restricted form equivalent to diag(1, 2p, -2p delta)
    let diag = diagonalize_symmetric(&skel.gram).unwrap();
    let inv = form_invariants(&diag).unwrap();
    let sub2 = skel.subring.clone();
    let one = LocalFieldElem::from_i64(&sub2, 1).unwrap();
    let two_p = LocalFieldElem::from_i64(&sub2, 10).unwrap();
    let delta = canonical_nonsquare_unit(&sub2);
    let target = [one, two_p.clone(), two_p.mul(&delta).neg()];
    assert_eq!(inv, form_invariants(&target).unwrap());
    // the displayed generators p a x0 + b y0 + tau^2(a) z0 satisfy F^2 = p
    // to precision N - 2 (a over W(F_{p^4}), b over W(F_{p^2}))
    let b_full = m.module.frobenius.mul(&m.module.frobenius.tau());
    let p_c = RingElem::from_i64(&spec, 5);
    let theta4 = {
        let mut w = dieudonne::ring::w_zero(4);
        w[1] = num_bigint::BigUint::from(1u64);
        RingElem::from_w(&spec, w)
    };
    let emb = dieudonne::ring::Embedding::new(&sub2, &spec).unwrap();
    let theta2 = {
        let mut w = dieudonne::ring::w_zero(2);
        w[1] = num_bigint::BigUint::from(1u64);
        emb.apply(&RingElem::from_w(&sub2, w))
    };
    for (alpha, beta) in [
        (RingElem::one(&spec), RingElem::zero(&spec)),
        (theta4.clone(), theta2.clone()),
        (theta4.mul(&theta4), theta2),
    ] {
        let x = [alpha.mul(&p_c),
            beta,
            alpha.tau_iter(2),
            RingElem::zero(&spec),
            RingElem::zero(&spec),
            RingElem::zero(&spec)];
        for i in 0..6 {
            let mut img = RingElem::zero(&spec);
            for k in 0..6 {
                if !b_full.at(i, k).is_zero() {
                    img = img.add(&b_full.at(i, k).mul(&x[k].tau_iter(2)));
                }
            }
            assert!(img.congruent_mod_pk(&x[i].mul(&p_c), spec.n - 2));
        }
    }
    report(
        "4 (skeleton)",
        "dim 3, anisotropic, equivalent to diag(1, 2p, -2p delta)",
        started,
        30,
    );
}

#[test]
fn criterion_05_pairings() {
    let started = Instant::now();
    let spec = RingSpec::new(5, 4, 16, 4).unwrap();
    let base = build_height6_example(&spec).unwrap();
    // the pairing compatibility on all 36 basis pairs: tau(G V) = F^T G
    let lhs = base.gram.mul(&base.verschiebung).tau();
    let rhs = base.module.frobenius.transpose().mul(&base.gram);
    assert_eq!(lhs, rhs);
    // U preserves the pairing exactly
    let fam = build_prop23_deformation(&base).unwrap();
    let u = fam.unipotent.as_ref().unwrap();
    let gram = fam.gram.as_ref().unwrap();
    assert_eq!(u.transpose().mul(gram).mul(u), *gram);
    report(
        "5 (pairings)",
        "tau(G V) = F^T G on 36 pairs; U^T gram U = gram exactly",
        started,
        30,
    );
}

#[test]
fn criterion_06_two_window_construction() {
    let started = Instant::now();
    let spec = RingSpec::new(5, 1, 56, 4).unwrap();
    let flags = FlagData::canonical(0, 5);
    let data = build_twosl(&spec, 8, &flags).unwrap();
    assert_eq!(data.lengths, (5, 2));
    // Hodge ranks at least 6 for all 8 degrees, on both fibers
    let profile_sp = WindowFamily::hodge_rank_profile(&data.m_family.special_module()).unwrap();
    assert_eq!(profile_sp.len(), 8);
    assert!(profile_sp.iter().all(|&d| d >= 6));
    let lam_spec = RingSpec::unramified(5, 24, 56).unwrap();
    let fiber = dieudonne::isocrystal::specialize(
        &data.m_family.module,
        &lam_spec.residue_field().nth(9),
        24,
    )
    .unwrap();
    let profile_gen = WindowFamily::hodge_rank_profile(&fiber).unwrap();
    assert!(profile_gen.iter().all(|&d| d >= 6));
    assert_eq!(
        profile_sp.iter().sum::<usize>(),
        profile_gen.iter().sum::<usize>()
    );
    // K special and generic types via anchored certificates
    let k_special_ty = IsogenyType::parse("G_{7,1}^2").unwrap();
    let cert_s = anchored_type_check(&data.k_family.special_module(), &k_special_ty).unwrap();
    assert!(cert_s.pass, "{cert_s:?}");
    let k_generic_ty = IsogenyType::parse("G_{6,2} + G_{1,0}^8").unwrap();
    let certs = anchored_type_check_generic(&data.k_family.module, &k_generic_ty, 3, 24, 11).unwrap();
    assert!(certs.iter().all(|c| c.pass));
    // H really is G_{7,1}
    let h_ty = IsogenyType::from_slopes(&newton_slopes_finite(&data.h_module).unwrap()).unwrap();
    assert_eq!(h_ty, IsogenyType::parse("G_{7,1}").unwrap());
    // M generic assembled by isogeny additivity; dual as stated
    let m_gen = k_generic_ty.scale(2).sum(&h_ty.scale(3));
    let dual = dual_part_type(&m_gen);
    assert_eq!(
        dual,
        IsogenyType::parse("G_{0,1}^16 + G_{1,7}^3 + G_{2,6}^2").unwrap()
    );
    report(
        "6 (two-window construction)",
        &format!(
            "lengths (5, 2); hodge {profile_sp:?}; K types anchored; dual {dual}"
        ),
        started,
        300,
    );
}

#[test]
fn criterion_07_ghosts() {
    let started = Instant::now();
    assert_eq!(
        ghost_dim(&[so3_std_weights(), so3_std_weights()], &[2, 2]).unwrap(),
        2
    );
    assert_eq!(ghost_dim(&[g2_seven_weights()], &[16]).unwrap(), 8);
    assert_eq!(ghost_dim(&[so5_std_weights()], &[2]).unwrap(), 1);
    let ghost = IsogenyType::parse("G_{1,7} + G_{7,1}").unwrap();
    assert!(ghost.is_self_dual());
    assert!(!ghost.decomposable_into_self_duals());
    report(
        "7 (ghost bookkeeping)",
        "dims 2, 8, 1; ghost type self-dual and indecomposable",
        started,
        30,
    );
}

#[test]
fn criterion_08_octonions() {
    let started = Instant::now();
    let div = OctonionAlgebra::division();
    let split = OctonionAlgebra::split();
    for alg in [&div, &split] {
        let der = derivation_basis(alg).unwrap();
        assert_eq!(der.dim(), 14);
        check_derivation_invariants(alg, &der).unwrap();
    }
    let der = derivation_basis(&split).unwrap();
    let sp = lambda2_split(&split, &der).unwrap();
    assert_eq!(sp.proj_g.rank(), 14);
    assert_eq!(sp.proj_c0.rank(), 7);
    assert!(sp.proj_g.add(&sp.proj_c0).sub(&QMat::identity(21)).is_zero());
    let w = long_root_sl2_weights(&split, &der, 0).unwrap();
    assert_eq!(w.eigenvalues, vec![-1, -1, 0, 0, 0, 1, 1]);
    assert_eq!(commutant_dimension(&der, None, false).unwrap(), 1);
    assert_eq!(commutant_dimension(&der, Some(&sp), true).unwrap(), 2);
    // norm multiplicativity (with the alternative and Moufang identities)
    // on 1000 random pairs per flavor
    div.check_random_identities(1000, 0x0c70).unwrap();
    split.check_random_identities(1000, 0x0c71).unwrap();
    // the wedge zero-weight multiplicity matches the pairwise-sum oracle
    assert_eq!(21 - wedge_action_of(&w.h7).rank(), 7);
    report(
        "8 (octonions)",
        "dim Der 14 (both); ranks (14, 7); weights {-1,-1,0,0,0,1,1}; commutants 1, 2",
        started,
        60,
    );
}

#[test]
fn criterion_09_hilbert_suite() {
    let started = Instant::now();
    // symmetry, bimultiplicativity, (a, -a) = 1 on 200 random pairs
    for p in [3u64, 5, 13] {
        for f in [1usize, 2] {
            let spec = RingSpec::unramified(p, f, 12).unwrap();
            let fq = spec.residue_field().clone();
            let mut rng = ChaCha20Rng::seed_from_u64(0xacce97 ^ (p << 8) ^ f as u64);
            let random_unit = |rng: &mut ChaCha20Rng| loop {
                let k = rng.random::<u64>() as u128 % fq.q();
                let r = fq.nth(k);
                if !fq.is_zero(&r) {
                    let v = rng.random_range(-2i64..=2);
                    return LocalFieldElem {
                        spec: spec.clone(),
                        val: v,
                        unit: teichmuller(&spec, &r),
                    };
                }
            };
            for _ in 0..200 {
                let a = random_unit(&mut rng);
                let b = random_unit(&mut rng);
                let c = random_unit(&mut rng);
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
    // exhaustive residue oracle on the documented finite family: entries
    // from {1, u, p, up, 2p, -1} (all square classes of valuation 0 or 1,
    // plus redundant representatives) over four rings
    for (p, f) in [(3u64, 1usize), (3, 2), (5, 1), (5, 2)] {
        let spec = RingSpec::unramified(p, f, 12).unwrap();
        let u = canonical_nonsquare_unit(&spec);
        let one = LocalFieldElem::from_i64(&spec, 1).unwrap();
        let pe = LocalFieldElem::from_i64(&spec, p as i64).unwrap();
        let up = u.mul(&pe);
        let two_p = LocalFieldElem::from_i64(&spec, 2 * p as i64).unwrap();
        let minus_one = LocalFieldElem::from_i64(&spec, -1).unwrap();
        let entries = [one, u, pe, up, two_p, minus_one];
        let n = entries.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let aniso = ternary_anisotropic(&entries[i], &entries[j], &entries[k]).unwrap();
                    let iso =
                        ternary_isotropic_bruteforce(&entries[i], &entries[j], &entries[k]).unwrap();
                    assert_eq!(aniso, !iso, "p={p} f={f} ({i},{j},{k})");
                }
            }
        }
    }
    // the verified triple over Q(sqrt 2) at p = 5
    let triple = find_anisotropic_triple(2, 5, 12, 50).unwrap();
    let (a, b, c) = triple.elems;
    let spec = RingSpec::unramified(5, 2, 12).unwrap();
    let comp = QuadCompletion::new(&spec, 2).unwrap();
    assert!(ternary_anisotropic(
        &comp.embed(&a).unwrap(),
        &comp.embed(&b).unwrap(),
        &comp.embed(&c).unwrap()
    )
    .unwrap());
    assert!([a, b, c].iter().all(|e| e.totally_positive(2)));
    report(
        "9 (Hilbert and quadratic forms)",
        &format!(
            "1200 random pairs; 864 oracle forms; triple ({}+{}w, {}+{}w, {}+{}w)",
            a.x, a.y, b.x, b.y, c.x, c.y
        ),
        started,
        120,
    );
}

#[test]
fn criterion_10_newton_oracles() {
    let started = Instant::now();
    let spec = RingSpec::unramified(5, 2, 16).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0x04ac1e);
    // 50 random 2x2 matrices
    let mut done2 = 0;
    while done2 < 50 {
        let mut data = vec![vec![0i64; 2], vec![0i64; 2]];
        for r in 0..2 {
            for c in 0..2 {
                data[r][c] = rng.random_range(0..625);
            }
        }
        if rng.random_bool(0.4) {
            for r in 0..2 {
                data[r][0] *= 5;
            }
        }
        let m = match FModule::new(Mat::from_i64(&spec, &data), None) {
            Ok(m) => m,
            Err(_) => continue,
        };
        // the oracle's divisor growth can oscillate with period 4 here
        // (slope denominator times f), which N = 16 cannot certify past
        // v(det) = 1; sample within the certifiable budget
        if m.det_val().unwrap() > 1 {
            continue;
        }
        let fine = newton_slopes_finite(&m).unwrap();
        let brute = newton_slopes_bruteforce(&m, 16).unwrap();
        assert_eq!(fine, brute, "2x2 {data:?}");
        done2 += 1;
    }
    // a handful of structured matrices with known polygons
    for (data, want) in [
        (vec![vec![0i64, 5], vec![1, 0]], vec![(1i64, 2i64); 2]),
        (vec![vec![1, 0], vec![0, 5]], vec![(0, 1), (1, 1)]),
        (vec![vec![5, 0], vec![0, 5]], vec![(1, 1), (1, 1)]),
    ] {
        let m = FModule::new(Mat::from_i64(&spec, &data), None).unwrap();
        let poly = NewtonPolygon::new(
            want.iter().map(|&(a, b)| Rational64::new(a, b)).collect(),
        )
        .unwrap();
        assert_eq!(newton_slopes_finite(&m).unwrap(), poly);
        assert_eq!(newton_slopes_bruteforce(&m, 16).unwrap(), poly);
    }
    // 20 random 3x3 matrices (determinant valuation at most 1 keeps the
    // windowed divisor estimates within N = 16)
    let mut done3 = 0;
    while done3 < 20 {
        let mut data = vec![vec![0i64; 3]; 3];
        for row in data.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.random_range(0..625);
            }
        }
        if rng.random_bool(0.5) {
            for row in data.iter_mut() {
                row[0] *= 5;
            }
        }
        let m = match FModule::new(Mat::from_i64(&spec, &data), None) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if m.det_val().unwrap() > 1 {
            continue;
        }
        let fine = newton_slopes_finite(&m).unwrap();
        let brute = newton_slopes_bruteforce(&m, 16).unwrap();
        assert_eq!(fine, brute, "3x3 {data:?}");
        done3 += 1;
    }
    // wedge-square slope multisets match the pairwise-sum prediction on
    // rank <= 3 test modules
    let spec1 = RingSpec::unramified(5, 1, 20).unwrap();
    let predict = |module: &NewtonPolygon, twist: &NewtonPolygon| -> NewtonPolygon {
        let mu: Rational64 = twist.slopes.iter().sum();
        let mut slopes = vec![];
        for i in 0..module.slopes.len() {
            for j in i + 1..module.slopes.len() {
                slopes.push(module.slopes[i] + module.slopes[j] - mu);
            }
        }
        NewtonPolygon::new(slopes).unwrap()
    };
    type Case = (Vec<Vec<i64>>, Vec<Vec<i64>>);
    let cases: Vec<Case> = vec![
        // supersingular rank 2, trivial twist
        (vec![vec![0, 5], vec![1, 0]], vec![vec![1]]),
        // ordinary rank 2, trivial twist
        (vec![vec![1, 0], vec![0, 5]], vec![vec![1]]),
        // ordinary rank 2, slope-1 twist
        (vec![vec![1, 0], vec![0, 5]], vec![vec![5]]),
        // rank 3: slopes {0, 1/2, 1/2}, trivial twist
        (
            vec![vec![1, 0, 0], vec![0, 0, 5], vec![0, 1, 0]],
            vec![vec![1]],
        ),
        // rank 3: slopes {1/3 x3}, trivial twist
        (
            vec![vec![0, 0, 5], vec![1, 0, 0], vec![0, 1, 0]],
            vec![vec![1]],
        ),
    ];
    for (mdata, tdata) in cases {
        let m = FModule::new(Mat::from_i64(&spec1, &mdata), None).unwrap();
        let t = FModule::new(Mat::from_i64(&spec1, &tdata), None).unwrap();
        let wedge = wedge_square_twist(&m, &t).unwrap();
        let got = newton_slopes_finite(&wedge).unwrap();
        let want = predict(
            &newton_slopes_finite(&m).unwrap(),
            &newton_slopes_finite(&t).unwrap(),
        );
        assert_eq!(got, want, "wedge of {mdata:?} twisted by {tdata:?}");
    }
    report(
        "10 (Newton oracles)",
        "50 2x2 + 20 3x3 brute-force agreements; wedge pairwise-sum matches",
        started,
        300,
    );
}

#[test]
fn criterion_11_oort_fractions() {
    let started = Instant::now();
    assert_eq!(oort_invariant(6, 8).unwrap(), num_rational::Ratio::new(3, 2));
    for g in 5..=10u64 {
        assert_eq!(
            oort_invariant(g, 4).unwrap(),
            num_rational::Ratio::new(g as i64, 2)
        );
    }
    report("11 (fractions)", "2 dim / [End : Q] values as stated", started, 10);
}
