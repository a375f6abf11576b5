import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msdl.deform import lopez_ros_step
from msdl.domain import AnnularDomain
from msdl.errors import IllDefinedImmersion, NonflatMarginError, PreconditionError
from msdl.funspace import LaurentFunction, evaluate, product
from msdl.weierstrass import (
    Immersion,
    WeierstrassData,
    arc_polyline,
    catenoid,
    catenoid4,
    conformality_residual,
    flat,
    flux,
    from_coefficient_table,
    induced_speed,
    integrate_along,
    integrate_immersion,
    is_full,
    is_nonflat,
    loop_displacement,
    perturb_to_full,
    periods,
    preset,
    residue_periods,
    select_pair,
    spinor_split,
    validation_grid,
)

L = AnnularDomain(0.5, 2.0)
LF = LaurentFunction.from_dict


def test_catenoid_is_conformal():
    assert conformality_residual(catenoid(L)) < 1e-14


def test_non_null_data_residual_is_one():
    C = LaurentFunction.constant
    w = WeierstrassData((C(1.0, L), C(0.0, L), C(0.0, L)), L)
    assert conformality_residual(w) == pytest.approx(1.0)


def test_catenoid_flux_matches_residues():
    F = flux(catenoid(L)).values
    oracle = residue_periods(catenoid(L)).imag
    np.testing.assert_allclose(F, oracle, atol=1e-13)
    np.testing.assert_allclose(F, [[0, 0, 2 * math.pi]], atol=1e-13)


def test_zero_residues_give_zero_flux():
    w = WeierstrassData((LF({-2: 0.5, 0: -0.5}, L), LF({-2: 0.5j, 0: 0.5j}, L), LF({-3: 1}, L)), L)
    assert np.all(flux(w).values == 0) or np.max(np.abs(flux(w).values)) < 1e-14


def test_flux_after_constant_two_multiplier():
    w = catenoid(L)
    h = LaurentFunction.constant(2.0, L)
    out = lopez_ros_step(w, h, 0, 1)
    np.testing.assert_allclose(out.phi[0].as_dict()[-2], 1.0)
    np.testing.assert_allclose(out.phi[0].as_dict()[0], -0.25)
    np.testing.assert_allclose(out.phi[1].as_dict()[-2], 1.0j)
    np.testing.assert_allclose(out.phi[1].as_dict()[0], 0.25j)
    np.testing.assert_allclose(flux(out).values, [[0, 0, 2 * math.pi]], atol=1e-13)
    assert conformality_residual(out) < 1e-12


def test_flux_rejects_real_periods():
    C = LaurentFunction.constant
    w = WeierstrassData((LF({-1: 1.0}, L), LF({-1: 1j}, L), C(0.0, L)), L)
    with pytest.raises(IllDefinedImmersion):
        flux(w)


def test_integrate_immersion_base_point():
    im = Immersion(catenoid(L), 1.0, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(integrate_immersion(im, 1.0), [1.0, 2.0, 3.0])


def test_integrate_immersion_paths_agree():
    im = Immersion(catenoid(L), 1.0)
    z = 1.7 * np.exp(2.3j)
    a = integrate_immersion(im, z, "radial-first")
    b = integrate_immersion(im, z, "angular-first")
    assert np.max(np.abs(a - b)) < 1e-9
    # independent quadrature along the same polyline
    c = integrate_along(catenoid(L), arc_polyline(1.0, z, "radial-first", 2000))
    assert np.max(np.abs(a - c)) < 1e-5


def test_loop_has_no_displacement():
    assert np.max(np.abs(loop_displacement(catenoid(L), 1.0))) < 1e-9


def test_catenoid_on_circle_is_catenoid():
    # u = (x, y, log r) up to the base point; here check |(u1, u2)| = (r + 1/r)/2
    im = Immersion(catenoid(L), 1.0)
    z = 1.6 * np.exp(1j * np.linspace(0, 6, 7))
    u = integrate_immersion(im, z)
    # with phi_3 = 1/z the height is log r
    np.testing.assert_allclose(u[2], np.log(1.6), atol=1e-13)


def test_spinor_split_catenoid():
    f, g, Psi = spinor_split(catenoid(L), 0, 1)
    assert f.trimmed().as_dict() == {-2: 1}
    assert g.trimmed().as_dict() == {0: -1}
    assert Psi.trimmed().as_dict() == {-2: -1}


def test_spinor_split_flat():
    f, g, _ = spinor_split(flat(L), 0, 1)
    assert f.as_dict() == {0: 2}
    assert g.as_dict() == {}


def test_spinor_split_rejects_equal_indices():
    with pytest.raises(PreconditionError):
        spinor_split(catenoid(L), 1, 1)


coeff = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


@st.composite
def data(draw):
    comps = []
    for _ in range(draw(st.integers(3, 4))):
        m = draw(st.integers(0, 3))
        comps.append(LaurentFunction(np.array(draw(st.lists(coeff, min_size=2 * m + 1, max_size=2 * m + 1))), L))
    return WeierstrassData(tuple(comps), L)


@given(data(), st.data())
def test_spinor_identity(w, d):
    a = d.draw(st.integers(0, w.n - 1))
    b = d.draw(st.integers(0, w.n - 1).filter(lambda x: x != a))
    f, g, Psi = spinor_split(w, a, b)
    z = validation_grid(L, 6, 64).ravel()
    v = w.values(z)
    scale = 1 + np.max(np.abs(v)) ** 2
    # f g = phi_a^2 + phi_b^2 always; equal to Psi once the data is null
    assert np.max(np.abs(evaluate(product(f, g), z) - v[a] ** 2 - v[b] ** 2)) < 1e-12 * scale
    others = -sum(v[j] ** 2 for j in range(w.n) if j not in (a, b))
    assert np.max(np.abs(evaluate(Psi, z) - others)) < 1e-12 * scale


@pytest.mark.parametrize("pair", [(0, 1), (0, 2), (1, 2), (2, 0)])
def test_spinor_identity_on_null_data(pair):
    f, g, Psi = spinor_split(catenoid(L), *pair)
    z = validation_grid(L, 6, 64).ravel()
    assert np.max(np.abs(evaluate(product(f, g), z) - evaluate(Psi, z))) < 1e-12 * 64


def test_nonflat_examples():
    rep = is_nonflat(catenoid(L))
    assert rep.ok and rep.rank == 3
    # the two-point witness
    w = catenoid(L)
    M = np.stack([w.values(1.0), w.values(2.0)])
    np.testing.assert_allclose(M[0], [0, 1j, 1])
    np.testing.assert_allclose(M[1], [-3 / 8, 5j / 8, 0.5])
    assert np.linalg.matrix_rank(M) == 2
    C = LaurentFunction.constant
    assert not is_nonflat(WeierstrassData((C(2.0, L), C(2j, L), C(0.0, L)), L)).ok
    zz = WeierstrassData((LF({1: 1}, L), LF({1: 1j}, L), C(0.0, L)), L)
    assert not is_nonflat(zz).ok


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_nonflat_scale_invariant(c):
    w = catenoid(L)
    scaled = WeierstrassData(tuple(p * c for p in w.phi), L)
    assert is_nonflat(scaled).rank == is_nonflat(w).rank


def test_full_examples():
    assert is_full(catenoid(L))
    assert not is_full(flat(L))
    assert not is_full(catenoid4(L))


def test_perturb_full_input_unchanged():
    w = catenoid(L)
    assert perturb_to_full(w, 0.0) is w
    assert perturb_to_full(w, 1e-3) is w


def test_perturb_flat_to_full():
    w = flat(L)
    out = perturb_to_full(w, 1e-2, seed=3)
    assert is_full(out)
    z = validation_grid(AnnularDomain(0.8, 1.25), 8, 64)
    assert np.max(np.abs(out.values(z) - w.values(z))) < 1e-2
    assert conformality_residual(out) < 1e-12
    np.testing.assert_allclose(periods(out), periods(w), atol=1e-12)


def test_induced_speed_examples():
    w = catenoid(L)
    assert induced_speed(w, 1.0) == pytest.approx(1.0)
    scaled = WeierstrassData(tuple(p * 3.0 for p in w.phi), L)
    assert induced_speed(scaled, 1.3 + 0.2j) == pytest.approx(3 * induced_speed(w, 1.3 + 0.2j))


@given(data())
def test_speed_dominates_psi(w):
    z = validation_grid(L, 5, 48).ravel()
    s2 = induced_speed(w, z) ** 2
    vals = w.values(z)
    np.testing.assert_allclose(s2, np.sum(np.abs(vals) ** 2, axis=0) / 2, rtol=1e-12, atol=1e-300)
    _, _, Psi = spinor_split(w, 0, 1)
    assert np.all(s2 >= np.abs(evaluate(Psi, z)) / 2 * (1 - 1e-12) - 1e-300)


def test_select_pair_examples():
    cover = select_pair([catenoid(L)] * 4)
    assert cover.pairs == ((0, 1),)
    assert cover.cover == ((0, 1, 2, 3),)
    with pytest.raises(NonflatMarginError):
        select_pair([catenoid(L), flat(L)])


def test_presets_and_tables():
    assert preset("catenoid").n == 3 and preset("catenoid4").n == 4
    with pytest.raises(PreconditionError):
        preset("helicoid")
    w = from_coefficient_table([{-2: 0.5, 0: -0.5}, {-2: [0, 0.5], 0: [0, 0.5]}, {-1: 1}], L)
    for p, q in zip(w.phi, catenoid(L).phi):
        assert p.trimmed().as_dict() == q.trimmed().as_dict()
