import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefilter.interferometer import InterferometerModel
from phasefilter.ito import (
    DB,
    DBDAG,
    DLAMBDA,
    DT,
    SYMBOLS,
    ItoDifferential,
    ItoSymbol,
    build_dY_counting,
    build_dY_quadrature,
    coherent_expectation,
    counting_square_report,
    ito_product,
    langevin_generator,
    langevin_generator_general,
)
from phasefilter.operators import LinearizedOscillator, random_hermitian

PI = np.pi


# Matrix-unit representation: dt -> E_03, dB_j -> E_0j, dB_j^dag -> E_j3, dLambda_jk -> E_jk.
def _unit(symbol):
    row, col = {
        "dt": (0, 3),
        "dB": (0, symbol.j),
        "dBdag": (symbol.j, 3),
        "dLambda": (symbol.j, symbol.k),
    }[symbol.kind]
    e = np.zeros((4, 4))
    e[row, col] = 1.0
    return e


def _embed(d: ItoDifferential) -> np.ndarray:
    out = np.zeros((4 * d.dim, 4 * d.dim), dtype=complex)
    for s, c in d:
        out += np.kron(_unit(s), c)
    return out


def _random_differential(rng, dim, density=0.7):
    coeffs = {}
    for s in SYMBOLS:
        if rng.random() < density:
            coeffs[s] = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return ItoDifferential(dim, coeffs)


def _zero(dim):
    return ItoDifferential(dim, {})


def test_table_examples():
    one = np.eye(1)
    assert ito_product(ItoDifferential.single(DB[1]), ItoDifferential.single(DBDAG[1])).coefficients.keys() == {DT}
    assert ito_product(ItoDifferential.single(DBDAG[1]), ItoDifferential.single(DB[1])).max_abs() == 0
    prod = ito_product(ItoDifferential.single(DLAMBDA[1, 2]), ItoDifferential.single(DLAMBDA[2, 1]))
    assert np.array_equal(prod.coeff(DLAMBDA[1, 1]), one)
    assert list(prod.coefficients) == [DLAMBDA[1, 1]]


def test_all_81_symbol_pairs_match_matrix_units():
    for a, b in itertools.product(SYMBOLS, SYMBOLS):
        got = _embed(ito_product(ItoDifferential.single(a), ItoDifferential.single(b)))
        want = _unit(a) @ _unit(b)
        assert np.array_equal(got, want), (a, b)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_product_matches_block_representation(dim, seed):
    rng = np.random.default_rng(seed)
    a, b = _random_differential(rng, dim), _random_differential(rng, dim)
    want = _embed(a) @ _embed(b)
    assert np.max(np.abs(_embed(ito_product(a, b)) - want)) <= 1e-12


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_bilinear(dim, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_differential(rng, dim) for _ in range(3))
    alpha = complex(*rng.normal(size=2))
    left = ito_product(alpha * a + b, c)
    right = alpha * ito_product(a, c) + ito_product(b, c)
    assert left.distance(right) <= 1e-12
    left = ito_product(c, alpha * a + b)
    right = alpha * ito_product(c, a) + ito_product(c, b)
    assert left.distance(right) <= 1e-12


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_associative(dim, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_differential(rng, dim) for _ in range(3))
    assert ito_product(ito_product(a, b), c).distance(ito_product(a, ito_product(b, c))) <= 1e-12


def test_associative_on_every_symbol_triple():
    rng = np.random.default_rng(0)
    ops = {s: rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for s in SYMBOLS}
    for a, b, c in itertools.product(SYMBOLS, repeat=3):
        x, y, z = (ItoDifferential(2, {s: ops[s]}) for s in (a, b, c))
        assert ito_product(ito_product(x, y), z).distance(ito_product(x, ito_product(y, z))) <= 1e-12


def test_coefficient_order_is_left_to_right():
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    b = np.array([[0, 0], [1, 0]], dtype=complex)
    prod = ito_product(ItoDifferential(2, {DB[1]: a}), ItoDifferential(2, {DBDAG[1]: b}))
    assert np.array_equal(prod.coeff(DT), a @ b)


def test_malformed_symbol_and_dim_mismatch():
    with pytest.raises(ValueError):
        ItoDifferential(1, {ItoSymbol("dB", 3): np.eye(1)})
    with pytest.raises(ValueError):
        ito_product(_zero(2), _zero(3))


def test_coherent_expectation_examples():
    rate = coherent_expectation(ItoDifferential.single(DLAMBDA[1, 1], np.eye(3)), 2.0)
    assert np.array_equal(rate, 4 * np.eye(3))
    assert np.array_equal(coherent_expectation(ItoDifferential.single(DB[2], np.eye(2)), 1 + 1j), np.zeros((2, 2)))
    for sym in (DBDAG[2], DLAMBDA[1, 2], DLAMBDA[2, 1], DLAMBDA[2, 2]):
        assert coherent_expectation(ItoDifferential.single(sym), 3.0).item() == 0


def test_quadrature_rate_on_bright_eigenstate():
    model = InterferometerModel(np.zeros((1, 1)))
    rate = coherent_expectation(build_dY_quadrature(model), 0.7 + 0.2j)
    assert np.isclose(rate.item(), 1.4)


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_coherent_expectation_linear(seed, beta, scale):
    rng = np.random.default_rng(seed)
    a, b = _random_differential(rng, 2), _random_differential(rng, 2)
    lhs = coherent_expectation(scale * a + b, beta)
    rhs = scale * coherent_expectation(a, beta) + coherent_expectation(b, beta)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(lhs)))


def test_dY_quadrature_examples():
    zero = build_dY_quadrature(InterferometerModel(np.zeros((2, 2))))
    assert np.allclose(zero.coeff(DB[1]), np.eye(2)) and np.allclose(zero.coeff(DBDAG[1]), np.eye(2))
    assert np.allclose(zero.coeff(DB[2]), 0) and np.allclose(zero.coeff(DBDAG[2]), 0)
    dy = build_dY_quadrature(InterferometerModel(np.diag([0, PI])))
    assert np.allclose(dy.coeff(DB[2]), 1j * np.diag([0, 1]), atol=1e-15)


@given(st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_quadrature_record_squares_to_dt(dim, seed):
    model = InterferometerModel(random_hermitian(dim, np.random.default_rng(seed), 2.0))
    dy = build_dY_quadrature(model)
    target = ItoDifferential(dim, {DT: np.eye(dim)})
    assert ito_product(dy, dy).distance(target) <= 1e-12


def test_dY_counting_examples():
    bright = build_dY_counting(InterferometerModel(np.zeros((1, 1))))
    assert np.isclose(bright.coeff(DLAMBDA[1, 1]).item(), 1)
    assert max(abs(bright.coeff(DLAMBDA[j, k]).item()) for j, k in [(1, 2), (2, 1), (2, 2)]) <= 1e-15
    dark = build_dY_counting(InterferometerModel(PI * np.eye(2)))
    assert np.allclose(dark.coeff(DLAMBDA[2, 2]), np.eye(2))
    assert np.allclose(dark.coeff(DLAMBDA[1, 1]), 0, atol=1e-15)
    quarter = build_dY_counting(InterferometerModel(np.diag([0, PI / 2])))
    assert np.allclose(quarter.coeff(DLAMBDA[1, 2]), np.diag([0, 0.5]), atol=1e-15)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_counting_record_square(dim, seed):
    model = InterferometerModel(random_hermitian(dim, np.random.default_rng(seed), 2.0))
    rep = counting_square_report(model)
    assert rep["defect_vs_cos"] <= 1e-12
    assert rep["square_equals_dY"] <= 1e-12


def test_cos_squared_coefficient_is_not_what_the_table_gives():
    rep = counting_square_report(InterferometerModel(np.diag([0.0, PI])))
    assert rep["defect_vs_cos"] <= 1e-15
    assert np.isclose(rep["defect_vs_cos_squared"], 1.0)


def test_langevin_commuting_observable_vanishes():
    model = InterferometerModel(np.diag([0.3, 1.2, -2.0]))
    assert langevin_generator(model, np.diag([1.0, 5.0, -1.0])).max_abs() <= 1e-15


def test_langevin_momentum_kick():
    k, hbar = 0.1, 1.0
    model = InterferometerModel.from_spec(LinearizedOscillator(k, 0, 40, hbar))
    dx = langevin_generator(model, model.momentum)
    for sym, weight in [(DLAMBDA[1, 1], 1), (DLAMBDA[1, 2], -1j), (DLAMBDA[2, 1], 1j), (DLAMBDA[2, 2], 1)]:
        # away from the truncation edge
        block = dx.coeff(sym)[:25, :25]
        assert np.allclose(block, weight * 0.5 * 2 * hbar * k * np.eye(25), atol=1e-8)


def test_langevin_drift_under_coherent_drive(rng):
    model = InterferometerModel(random_hermitian(3, rng))
    x = random_hermitian(3, rng)
    rate = coherent_expectation(langevin_generator(model, x), 1.5 - 0.5j)
    want = 0.5 * (model.u_dag @ x @ model.u - x) * abs(1.5 - 0.5j) ** 2
    assert np.allclose(rate, want, atol=1e-12)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_langevin_closed_form_matches_scattering_form(dim, seed):
    rng = np.random.default_rng(seed)
    model = InterferometerModel(random_hermitian(dim, rng), random_hermitian(dim, rng))
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    assert langevin_generator(model, x).distance(langevin_generator_general(model, x)) <= 1e-12
