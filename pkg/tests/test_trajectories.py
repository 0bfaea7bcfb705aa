import numpy as np
import pytest

from phasefilter.filters import CountingVariant
from phasefilter.interferometer import InterferometerModel
from phasefilter.operators import (
    DiagonalSpectrum,
    LinearizedOscillator,
    gaussian_state,
    random_density,
    random_hermitian,
)
from phasefilter.trajectories import (
    CoherentAmplitude,
    Scheme,
    TrajectoryConfig,
    collapse_statistics,
    ensemble_average,
    estimation_batch,
    estimation_run,
    run_ensemble,
    simulate,
    simulate_counting,
    simulate_homodyne,
)

PI = np.pi


def _config(model, rho0, scheme=Scheme.HOMODYNE, beta=1.0, T=1.0, dt=1e-3, seed=7, **kw):
    return TrajectoryConfig(
        model=model,
        drive=CoherentAmplitude.constant(beta, T),
        scheme=scheme,
        dt=dt,
        T=T,
        seed=seed,
        initial_state=rho0,
        **kw,
    )


@pytest.mark.parametrize("scheme", list(Scheme))
def test_same_seed_gives_identical_trajectory(plus_state, scheme):
    # both eigenstates click here, so distinct seeds give distinct records
    model = InterferometerModel(np.diag([0.0, PI / 2]))
    cfg = _config(model, plus_state, scheme, beta=2.0, record_stride=10)
    a, b = simulate(cfg), simulate(cfg)
    for key, val in a.columns().items():
        assert np.array_equal(val, b.columns()[key]), key
    assert np.array_equal(a.final_state, b.final_state)
    c = simulate(_config(model, plus_state, scheme, beta=2.0, record_stride=10, seed=8))
    assert not np.array_equal(a.I, c.I)


def test_batch_size_does_not_change_results(qubit, plus_state):
    cfg = _config(qubit, plus_state, T=0.2)
    a = run_ensemble(cfg, 30, batch_size=30)
    b = run_ensemble(cfg, 30, batch_size=7)
    assert np.array_equal(a.I_T, b.I_T)
    assert np.array_equal(a.final_weights, b.final_weights)
    single = simulate(cfg, index=12)
    assert single.I[-1] == a.I_T[12]


def test_scheme_specific_entry_points(qubit, plus_state):
    with pytest.raises(ValueError):
        simulate_counting(_config(qubit, plus_state))
    with pytest.raises(ValueError):
        simulate_homodyne(_config(qubit, plus_state, Scheme.COUNTING))


def test_config_validation(qubit, plus_state):
    with pytest.raises(ValueError):
        _config(qubit, plus_state, dt=2.0, T=1.0)
    with pytest.raises(ValueError):
        _config(qubit, plus_state, Scheme.COUNTING, beta=30.0)
    with pytest.warns(RuntimeWarning):
        _config(qubit, plus_state, Scheme.COUNTING, beta=12.0)
    with pytest.raises(ValueError):
        _config(qubit, plus_state, seed=-1)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_no_drive_keeps_commuting_estimates(rng, scheme):
    model = InterferometerModel(random_hermitian(3, rng, 2.0))
    h = model.theta
    rho0 = random_density(3, rng)
    tr = simulate(_config(model, rho0, scheme, beta=0.0, T=0.5))
    assert np.max(np.abs(tr.final_state - rho0)) <= 1e-12
    assert np.max(np.abs(tr.zeta - tr.zeta[0])) <= 1e-12
    assert np.trace(h @ tr.final_state) == pytest.approx(np.trace(h @ rho0), abs=1e-12)


def test_dark_port_never_clicks(qubit):
    tr = simulate(_config(qubit, np.diag([0.0, 1.0]), Scheme.COUNTING, beta=2.0, T=5.0, dt=1e-3))
    assert tr.Y[-1] == 0
    assert np.all(tr.increment == 0)


def test_bright_port_counts_are_poisson():
    bright = InterferometerModel.from_spec(DiagonalSpectrum([0.0]))
    M = 1000
    ens = run_ensemble(_config(bright, np.eye(1), Scheme.COUNTING, T=10.0, seed=11), M)
    assert abs(np.mean(ens.Y_T) - 10.0) <= 3 * np.sqrt(10.0 / M)
    assert np.var(ens.Y_T, ddof=1) == pytest.approx(10.0, rel=0.15)


def test_counting_collapse_dynamics(qubit):
    cfg = _config(qubit, np.eye(2) / 2, Scheme.COUNTING, T=3.0, seed=3)
    tr = simulate(cfg)
    clicks = np.flatnonzero(tr.increment > 0)
    assert clicks.size > 0
    first = clicks[0]
    bright = tr.eigen_weights[:, 0]
    # no clicks: weight drains monotonically toward the dark state
    assert np.all(np.diff(bright[:first]) < 0)
    assert bright[first] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(bright[first:], 1.0, atol=1e-14)


def test_identical_priors_give_identical_paths(qubit, plus_state):
    for scheme in Scheme:
        cfg = _config(qubit, plus_state, scheme, beta=2.0, filter_initial_state=plus_state, T=0.5)
        truth, est = estimation_run(cfg)
        for key in ("Y", "I", "zeta", "eigen_weights"):
            assert np.array_equal(getattr(truth, key), getattr(est, key)), key
        assert np.array_equal(truth.final_state, est.final_state)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_filter_finds_the_bright_eigenstate(qubit, scheme):
    cfg = _config(qubit, np.diag([1.0, 0.0]), scheme, filter_initial_state=np.eye(2) / 2, T=8.0, seed=5)
    truth, est = estimation_run(cfg)
    assert np.allclose(truth.zeta, 1.0)
    assert est.zeta[0] == pytest.approx(0.0, abs=1e-15)
    assert est.zeta[-1].real >= 0.999


def test_mismatched_prior_error_shrinks_in_linear_model():
    model = InterferometerModel.from_spec(LinearizedOscillator(k=0.1, fock_dim=20))
    cfg = _config(
        model,
        gaussian_state(20, 1.0, 0.8, 0.0, 1.0),
        beta=2.0,
        T=10.0,
        seed=21,
        filter_initial_state=gaussian_state(20, 1.0, -0.5, 0.0, 1.0),
        record_stride=500,
    )
    out = estimation_batch(cfg, range(8))
    mse = np.mean((out["truth"]["mean_q"] - out["filter"]["mean_q"]) ** 2, axis=0)
    quarters = mse[:: len(mse) // 4]
    assert np.all(np.diff(quarters) < 0)
    assert mse[-1] <= 0.5 * mse[0]


def test_no_drive_ensemble_matches_master_equation(rng):
    model = InterferometerModel(random_hermitian(3, rng, 2.0))
    cmp_ = ensemble_average(_config(model, random_density(3, rng), beta=0.0, T=0.2), 4)
    assert cmp_.max_distance <= 1e-12


@pytest.mark.parametrize("scheme", list(Scheme))
def test_unravelling_small_ensemble(qubit, plus_state, scheme):
    M = 400
    cmp_ = ensemble_average(_config(qubit, plus_state, scheme, record_stride=50, seed=99), M)
    # 4 standard errors of an off-diagonal entry, which has variance at most 1/4
    assert cmp_.max_distance <= 4 * 0.5 / np.sqrt(M)


def test_eigenprojection_always_collapses_to_itself():
    model = InterferometerModel.from_spec(DiagonalSpectrum([0.0, PI, PI / 2]))
    cfg = _config(model, np.diag([0.0, 0.0, 1.0]), T=0.5, record_stride=100)
    rep = collapse_statistics(cfg, 50)
    assert list(rep.counts) == [0, 50, 0]  # eigenvalues sorted: 0, pi/2, pi
    assert rep.unclassified == 0


def test_collapse_requires_homodyne_and_no_hamiltonian(qubit, plus_state):
    with pytest.raises(ValueError):
        collapse_statistics(_config(qubit, plus_state, Scheme.COUNTING), 4)
    model = InterferometerModel(np.diag([0.0, PI]), np.array([[0, 1], [1, 0]]))
    with pytest.raises(ValueError):
        collapse_statistics(_config(model, plus_state), 4)


def test_literal_denominator_variant_runs(qubit, plus_state):
    tr = simulate(_config(qubit, plus_state, Scheme.COUNTING, counting_variant=CountingVariant.PAPER_LITERAL))
    assert np.all(tr.trace_err <= 1e-12)
