//! Python bindings: the main types and operations of the core crate,
//! exposed with plain-data signatures (integers, strings, lists).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dieudonne::deform::{build_prop23_deformation, build_twosl, FlagData, WindowFamily};
use dieudonne::dieudonne::{build_height6_example, skeleton_anisotropic, skeleton_solve};
use dieudonne::isocrystal::{
    newton_slopes_finite, newton_slopes_generic, p_rank_generic, FModule,
};
use dieudonne::isogeny::IsogenyType as CoreType;
use dieudonne::local::{
    find_anisotropic_triple as core_find_triple, hilbert_symbol as core_hilbert,
    ternary_anisotropic as core_ternary, LocalFieldElem,
};
use dieudonne::matrix::Mat;
use dieudonne::octonion::{
    commutant_dimension, derivation_basis, g2_seven_weights, ghost_dim as core_ghost_dim,
    lambda2_split, long_root_sl2_weights, oort_invariant as core_oort, so3_std_weights,
    so5_std_weights, OctonionAlgebra,
};
use dieudonne::ring::RingSpec;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A formal isogeny type, e.g. IsogenyType("G_{1,1}^3").
#[pyclass(name = "IsogenyType", from_py_object)]
#[derive(Clone)]
struct PyIsogenyType {
    inner: CoreType,
}

#[pymethods]
impl PyIsogenyType {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyIsogenyType { inner: CoreType::parse(text).map_err(err)? })
    }

    fn height(&self) -> u64 {
        self.inner.height()
    }

    fn dimension(&self) -> u64 {
        self.inner.dimension()
    }

    fn dual(&self) -> PyIsogenyType {
        PyIsogenyType { inner: self.inner.dual() }
    }

    fn is_self_dual(&self) -> bool {
        self.inner.is_self_dual()
    }

    fn decomposable_into_self_duals(&self) -> bool {
        self.inner.decomposable_into_self_duals()
    }

    fn slopes(&self) -> Vec<String> {
        self.inner.slope_multiset().to_strings()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("IsogenyType(\"{}\")", self.inner)
    }

    fn __eq__(&self, other: &PyIsogenyType) -> bool {
        self.inner == other.inner
    }
}

/// Graded symmetric isogeny types of the given even height.
#[pyfunction]
fn classify_graded_symmetric(height: u64) -> PyResult<Vec<PyIsogenyType>> {
    Ok(dieudonne::isogeny::classify_graded_symmetric(height)
        .map_err(err)?
        .into_iter()
        .map(|inner| PyIsogenyType { inner })
        .collect())
}

/// The tame Hilbert symbol (a, b) over W(F_{p^f})[1/p] for integers a, b.
#[pyfunction]
fn hilbert_symbol(p: u64, f: usize, a: i64, b: i64) -> PyResult<i32> {
    let spec = RingSpec::unramified(p, f, 16).map_err(err)?;
    let ea = LocalFieldElem::from_i64(&spec, a).map_err(err)?;
    let eb = LocalFieldElem::from_i64(&spec, b).map_err(err)?;
    core_hilbert(&ea, &eb).map_err(err)
}

/// Anisotropy of the diagonal ternary form over W(F_{p^f})[1/p].
#[pyfunction]
fn ternary_anisotropic(p: u64, f: usize, d: [i64; 3]) -> PyResult<bool> {
    let spec = RingSpec::unramified(p, f, 16).map_err(err)?;
    let e = |x: i64| LocalFieldElem::from_i64(&spec, x).map_err(err);
    core_ternary(&e(d[0])?, &e(d[1])?, &e(d[2])?).map_err(err)
}

/// Totally positive anisotropic triple in Z[sqrt(disc)] at the inert prime
/// p; returns ((x, y), ...) coordinate pairs.
#[pyfunction]
#[pyo3(signature = (disc, p, bound = 50))]
fn search_anisotropic_triple(disc: i64, p: u64, bound: usize) -> PyResult<Vec<(i64, i64)>> {
    let res = core_find_triple(disc, p, 16, bound).map_err(err)?;
    let (a, b, c) = res.elems;
    Ok(vec![(a.x, a.y), (b.x, b.y), (c.x, c.y)])
}

/// Newton slopes of an integer Frobenius matrix over W_N(F_{p^f}).
#[pyfunction]
#[pyo3(signature = (p, f, n, matrix))]
fn newton_slopes(p: u64, f: usize, n: u32, matrix: Vec<Vec<i64>>) -> PyResult<Vec<String>> {
    let spec = RingSpec::unramified(p, f, n).map_err(err)?;
    let m = FModule::new(Mat::from_i64(&spec, &matrix), None).map_err(err)?;
    Ok(newton_slopes_finite(&m).map_err(err)?.to_strings())
}

/// The supersingular height-6 module: slopes, skeleton dimension, and the
/// anisotropy verdict, as a dict.
#[pyfunction]
#[pyo3(signature = (p = 5))]
fn height6_example(py: Python<'_>, p: u64) -> PyResult<Py<pyo3::types::PyDict>> {
    let spec = RingSpec::unramified(p, 4, 16).map_err(err)?;
    let m = build_height6_example(&spec).map_err(err)?;
    let poly = newton_slopes_finite(&m.module).map_err(err)?;
    let skel = skeleton_solve(&m).map_err(err)?;
    let verdict = skeleton_anisotropic(&skel).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("slopes", poly.to_strings())?;
    dict.set_item("skeleton_dim", skel.dim)?;
    dict.set_item("skeleton_anisotropic", verdict)?;
    Ok(dict.unbind())
}

/// Special and generic data of the unipotent height-6 deformation.
#[pyfunction]
#[pyo3(signature = (p = 5, trials = 3, ext = 24, seed = 2023))]
fn deformation_fibers(
    py: Python<'_>,
    p: u64,
    trials: usize,
    ext: usize,
    seed: u64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let spec = RingSpec::new(p, 4, 80, 8).map_err(err)?;
    let base = build_height6_example(&spec).map_err(err)?;
    let fam = build_prop23_deformation(&base).map_err(err)?;
    let special = newton_slopes_finite(&fam.special_module()).map_err(err)?;
    let gen = newton_slopes_generic(&fam.module, trials, ext, seed).map_err(err)?;
    let p_rank = p_rank_generic(&fam.module, trials, ext, seed).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("special", special.to_strings())?;
    dict.set_item("generic", gen.polygon.to_strings())?;
    dict.set_item("generic_p_rank", p_rank)?;
    Ok(dict.unbind())
}

/// Certificates of the two-window graded construction for the given r.
#[pyfunction]
#[pyo3(signature = (r = 8, sigma1 = 0, sigma2 = 5))]
fn two_window_summary(
    py: Python<'_>,
    r: usize,
    sigma1: usize,
    sigma2: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let spec = RingSpec::new(5, 1, 56, 4).map_err(err)?;
    let data = build_twosl(&spec, r, &FlagData::canonical(sigma1, sigma2)).map_err(err)?;
    let profile =
        WindowFamily::hodge_rank_profile(&data.m_family.special_module()).map_err(err)?;
    let k_special = newton_slopes_finite(&data.k_family.special_module()).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("lengths", data.lengths)?;
    dict.set_item("hodge_profile", profile)?;
    dict.set_item("k_special_slopes", k_special.to_strings())?;
    Ok(dict.unbind())
}

/// Dimension of the octonion derivation algebra ("division" or "split").
#[pyfunction]
fn derivation_dimension(flavor: &str) -> PyResult<usize> {
    let alg = match flavor {
        "division" => OctonionAlgebra::division(),
        "split" => OctonionAlgebra::split(),
        other => return Err(PyValueError::new_err(format!("unknown flavor {other}"))),
    };
    Ok(derivation_basis(&alg).map_err(err)?.dim())
}

/// Eigenvalues of the long-root sl2 semisimple element on the trace-zero
/// octonions (split flavor).
#[pyfunction]
fn long_root_weights() -> PyResult<Vec<i64>> {
    let alg = OctonionAlgebra::split();
    let der = derivation_basis(&alg).map_err(err)?;
    Ok(long_root_sl2_weights(&alg, &der, 0).map_err(err)?.eigenvalues)
}

/// Ranks of the two complementary projections on the wedge square.
#[pyfunction]
fn lambda2_ranks() -> PyResult<(usize, usize)> {
    let alg = OctonionAlgebra::split();
    let der = derivation_basis(&alg).map_err(err)?;
    let sp = lambda2_split(&alg, &der).map_err(err)?;
    Ok((sp.proj_g.rank(), sp.proj_c0.rank()))
}

/// Commutant dimensions on C_0 and on its wedge square.
#[pyfunction]
fn commutant_dims() -> PyResult<(usize, usize)> {
    let alg = OctonionAlgebra::split();
    let der = derivation_basis(&alg).map_err(err)?;
    let sp = lambda2_split(&alg, &der).map_err(err)?;
    Ok((
        commutant_dimension(&der, None, false).map_err(err)?,
        commutant_dimension(&der, Some(&sp), true).map_err(err)?,
    ))
}

/// Ghost dimension for the bundled cases: "so3", "so5", or "g2" (with r).
#[pyfunction]
#[pyo3(signature = (case, r = 8))]
fn ghost_dim(case: &str, r: u64) -> PyResult<u64> {
    match case {
        "so3" => core_ghost_dim(&[so3_std_weights(), so3_std_weights()], &[2, 2]),
        "so5" => core_ghost_dim(&[so5_std_weights()], &[2]),
        "g2" => core_ghost_dim(&[g2_seven_weights()], &[2 * r]),
        other => return Err(PyValueError::new_err(format!("unknown case {other}"))),
    }
    .map_err(err)
}

/// The fraction 2*dim/end_degree as a string.
#[pyfunction]
fn oort_invariant(dim: u64, end_degree: u64) -> PyResult<String> {
    let v = core_oort(dim, end_degree).map_err(err)?;
    Ok(format!("{}/{}", v.numer(), v.denom()))
}

#[pymodule]
fn dieudonne_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIsogenyType>()?;
    m.add_function(wrap_pyfunction!(classify_graded_symmetric, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(ternary_anisotropic, m)?)?;
    m.add_function(wrap_pyfunction!(search_anisotropic_triple, m)?)?;
    m.add_function(wrap_pyfunction!(newton_slopes, m)?)?;
    m.add_function(wrap_pyfunction!(height6_example, m)?)?;
    m.add_function(wrap_pyfunction!(deformation_fibers, m)?)?;
    m.add_function(wrap_pyfunction!(two_window_summary, m)?)?;
    m.add_function(wrap_pyfunction!(derivation_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(long_root_weights, m)?)?;
    m.add_function(wrap_pyfunction!(lambda2_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(commutant_dims, m)?)?;
    m.add_function(wrap_pyfunction!(ghost_dim, m)?)?;
    m.add_function(wrap_pyfunction!(oort_invariant, m)?)?;
    Ok(())
}
