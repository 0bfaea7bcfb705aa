import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import poisson

from phasefilter.filters import expected_dy_rate
from phasefilter.interferometer import InterferometerModel, integrate_master_equation
from phasefilter.operators import random_density, random_hermitian
from phasefilter.oracle import (
    OracleConfig,
    SliceOracle,
    TruncationError,
    coherent_amplitudes,
    convergence_study,
    oracle_compare,
    oracle_step,
    quadrature_povm,
)
from phasefilter.trajectories import Scheme

PI = np.pi


def test_quadrature_povm_is_complete():
    _, vec = quadrature_povm(8, 3)
    assert np.allclose(vec.T @ vec.conj(), np.eye(4), atol=1e-12)


def test_coherent_amplitudes_are_normalized():
    c = coherent_amplitudes(0.3 - 0.2j, 3)
    assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(coherent_amplitudes(0.0, 3), [1, 0, 0, 0])


@pytest.mark.parametrize("scheme", list(Scheme))
@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=2))
def test_probabilities_sum_to_one_and_states_are_positive(scheme, dim, seed, beta):
    rng = np.random.default_rng(seed)
    model = InterferometerModel(random_hermitian(dim, rng, 2.0), random_hermitian(dim, rng))
    out = oracle_step(random_density(dim, rng), model, OracleConfig(2.5e-3, 1, scheme, beta))
    assert abs(out.probabilities.sum() - 1) <= 1e-8
    assert np.all(out.probabilities >= -1e-15)
    for s in out.states:
        assert abs(np.trace(s) - 1) <= 1e-10
        assert np.min(np.linalg.eigvalsh(s)) >= -1e-10


def test_bright_eigenstate_counts_are_poisson():
    model = InterferometerModel(np.zeros((1, 1)))
    beta, tau = 1.5, 4e-3
    out = oracle_step(np.eye(1), model, OracleConfig(tau, 1, Scheme.COUNTING, beta))
    want = poisson.pmf(np.arange(4), beta**2 * tau)
    assert np.allclose(out.probabilities, want, atol=1e-8)


def test_intermediate_phase_counts_are_poisson():
    phi = 2 * PI / 3
    model = InterferometerModel(np.diag([phi]))
    beta, tau = 2.0, 2.5e-3
    s11 = (1 + np.exp(1j * phi)) / 2
    out = oracle_step(np.eye(1), model, OracleConfig(tau, 1, Scheme.COUNTING, beta))
    assert np.allclose(out.probabilities, poisson.pmf(np.arange(4), abs(s11 * beta) ** 2 * tau), atol=1e-8)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_vacuum_drive_is_trivial(rng, scheme):
    model = InterferometerModel(random_hermitian(3, rng, 2.0))
    rho = random_density(3, rng)
    out = oracle_step(rho, model, OracleConfig(1e-2, 1, scheme, 0.0))
    for p, s in zip(out.probabilities, out.states):
        if p > 1e-14:
            assert np.allclose(s, rho, atol=1e-12)
    if scheme is Scheme.COUNTING:
        assert out.probabilities[0] == pytest.approx(1.0, abs=1e-15)


def test_truncation_guard():
    with pytest.raises(TruncationError):
        OracleConfig(0.5, 1, Scheme.HOMODYNE, 3.0)
    with pytest.raises(ValueError):
        OracleConfig(1e-3, 1, Scheme.HOMODYNE, 1.0, quadrature_nodes=4)


def test_homodyne_mean_outcome_matches_filter_rate(rng):
    model = InterferometerModel(random_hermitian(2, rng, 2.0))
    rho = random_density(2, rng)
    beta, tau = 1.2 + 0.3j, 1e-3
    out = oracle_step(rho, model, OracleConfig(tau, 1, Scheme.HOMODYNE, beta))
    mean = np.dot(out.probabilities, out.values)
    assert mean == pytest.approx(float(expected_dy_rate(rho, beta, model)) * tau, abs=1e-10)
    second = np.dot(out.probabilities, out.values**2)
    assert second == pytest.approx(tau, rel=1e-2)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_averaged_oracle_step_approaches_master_equation(rng, scheme):
    model = InterferometerModel(random_hermitian(3, rng, 2.0), random_hermitian(3, rng))
    rho = random_density(3, rng)
    beta = 1.0 + 0.5j
    errs = []
    for tau in (4e-3, 2e-3, 1e-3):
        avg = SliceOracle(model, OracleConfig(tau, 1, scheme, beta)).unconditional_step(rho)
        _, me = integrate_master_equation(rho, beta, model, tau / 20, 20, stride=20)
        errs.append(np.max(np.abs(avg - me[-1])))
    errs = np.array(errs)
    # one-step error is O(tau^2), so the accumulated error is O(tau)
    assert np.all(errs[1:] / errs[:-1] <= 0.35)


def test_homodyne_comparison_example(qubit, plus_state):
    run = oracle_compare(qubit, OracleConfig(2.5e-3, 100, Scheme.HOMODYNE, 1.0), plus_state, seed=4)
    assert run.max_deviation["kraus"] <= 5e-2
    assert run.worst_min_eig >= -1e-6
    assert run.deviation[0, 0] == 0.0


def test_counting_comparison_reports_both_variants(qubit, plus_state):
    run = oracle_compare(qubit, OracleConfig(5e-3, 100, Scheme.COUNTING, 1.0), plus_state, seed=4)
    assert set(run.max_deviation) == {"unitary", "paper"}
    assert set(np.unique(run.outcomes)) <= {0.0, 1.0, 2.0, 3.0}


def test_small_convergence_study_shrinks(qubit, plus_state):
    study = convergence_study(qubit, Scheme.HOMODYNE, 1.0, plus_state, taus=(1e-2, 2.5e-3), repeats=8)
    ratio = study.ratios("kraus")[0]
    assert ratio < 0.6  # a quarter of the step size: ideal 0.25
    assert study.worst_min_eig >= -1e-6
