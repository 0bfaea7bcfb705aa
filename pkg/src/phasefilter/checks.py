"""Invariant suite behind ``phasefilter verify``.

Every check returns a :class:`CheckResult` carrying the measured defect next
to its tolerance, so the JSON summary shows margins and not just booleans.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .filters import (
    ConditionedState,
    CountingVariant,
    filter_consistency_check,
    homodyne_step,
)
from .gaussian import GaussianBelief, run_gaussian
from .interferometer import InterferometerModel, verify_unitarity
from .ito import (
    DT,
    build_dY_counting,
    build_dY_quadrature,
    counting_square_report,
    ito_product,
    langevin_generator,
    langevin_generator_general,
)
from .operators import random_density, random_hermitian
from .oracle import convergence_study, counting_adjudication
from .trajectories import Scheme


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.1e})"

    def as_dict(self) -> dict:
        return asdict(self)


def _result(name, measured, tol, detail=None, upper=True) -> CheckResult:
    measured = float(measured)
    ok = bool(np.isfinite(measured) and (measured <= tol if upper else measured >= tol))
    return CheckResult(name, measured, float(tol), ok, detail or {})


def _random_model(rng, dim_range=(2, 16), with_hamiltonian=False) -> InterferometerModel:
    d = int(rng.integers(dim_range[0], dim_range[1] + 1))
    theta = random_hermitian(d, rng, scale=float(rng.uniform(0.2, 3.0)))
    h = random_hermitian(d, rng) if with_hamiltonian else None
    return InterferometerModel(theta, h)


def check_scattering_and_ito(n_models: int = 50, seed: int = 0, tol: float = 1e-12) -> List[CheckResult]:
    """Unitarity of S and (dY)^2 = dt for the quadrature record, on random theta."""
    rng = np.random.default_rng(seed)
    unit, quad, count = 0.0, 0.0, 0.0
    for _ in range(n_models):
        model = _random_model(rng)
        unit = max(unit, verify_unitarity(model.S))
        dy = build_dY_quadrature(model)
        target = {DT: np.eye(model.dim)}
        sq = ito_product(dy, dy)
        quad = max(quad, sq.distance(type(sq)(model.dim, target)))
        dc = build_dY_counting(model)
        count = max(count, ito_product(dc, dc).distance(dc))
    return [
        _result("scattering unitarity", unit, tol, {"models": n_models}),
        _result("quadrature record squares to dt", quad, tol, {"models": n_models}),
        _result("counting record is idempotent", count, tol, {"models": n_models}),
    ]


def check_langevin_forms(n_models: int = 20, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        model = _random_model(rng, (2, 8), with_hamiltonian=True)
        x = random_hermitian(model.dim, rng)
        worst = max(worst, langevin_generator(model, x).distance(langevin_generator_general(model, x)))
    return _result("Heisenberg increment closed form vs scattering form", worst, tol)


def check_counting_square(model: InterferometerModel, tol: float = 1e-12) -> CheckResult:
    """The click-rate coefficient of (dY)^2 is (1 + cos theta)/2."""
    rep = counting_square_report(model)
    return _result("counting (dY)^2 coefficient equals (1 + cos theta)/2", rep["defect_vs_cos"], tol, rep)


def check_filter_forms(n_cases: int = 200, seed: int = 2, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        model = _random_model(rng, (2, 8), with_hamiltonian=bool(rng.integers(2)))
        rho = random_density(model.dim, rng)
        x = random_hermitian(model.dim, rng)
        beta = complex(rng.normal(), rng.normal()) * rng.uniform(0.1, 2.0)
        worst = max(worst, filter_consistency_check(x, rho, beta, model, dI=float(rng.normal() * 0.05)))
    return _result("filter forms agree (gain, expectation and state forms)", worst, tol, {"cases": n_cases})


def check_positivity(
    model: InterferometerModel, rho0, beta: complex = 1.0, steps: int = 10_000, dt: float = 1e-3, seed: int = 3
) -> CheckResult:
    """Minimum eigenvalue before any clipping over a long homodyne run."""
    rng = np.random.default_rng(seed)
    state = ConditionedState.initial(rho0)
    worst_eig, worst_trace = np.inf, 0.0
    for dI in rng.standard_normal(steps) * np.sqrt(dt):
        state = homodyne_step(state, dI, beta, dt, model)
        worst_eig = min(worst_eig, state.diagnostics.min_eigenvalue)
        worst_trace = max(worst_trace, state.diagnostics.trace_error)
    return _result(
        "homodyne filter stays positive",
        worst_eig,
        -1e-8,
        {"steps": steps, "dt": dt, "worst_trace_error": worst_trace},
        upper=False,
    )


def check_variance_closed_form(tol: float = 1e-4) -> CheckResult:
    dt = 1e-4
    n = int(round(1.0 / dt))
    out = run_gaussian(GaussianBelief.minimum_uncertainty(1.0, 1.0), np.zeros(n), 1.0, dt, stride=n)
    return _result("Gaussian variance at t = 1 equals 0.2", abs(out["V"][-1] - 0.2), tol, {"V": out["V"][-1]})


def check_oracle(model: InterferometerModel, rho0, beta: complex = 1.0, repeats: int = 10) -> List[CheckResult]:
    """Small-scale oracle comparison; deviation bound at the finest slice."""
    study = convergence_study(model, Scheme.HOMODYNE, beta, rho0, repeats=repeats)
    dev = study.deviations["kraus"]
    adj = counting_adjudication(model, beta, rho0, repeats=max(2, repeats // 2))
    return [
        _result(
            "oracle vs homodyne filter at tau = 2.5e-3",
            dev[-1],
            5e-2,
            {"taus": study.taus.tolist(), "deviation": dev.tolist(), "ratios": study.ratios("kraus").tolist()},
        ),
        _result(
            "oracle vs counting filter (unitary gain)",
            adj["deviation_unitary"][-1],
            5e-2,
            adj,
        ),
    ]


def run_suite(
    model: InterferometerModel,
    rho0,
    beta: complex = 1.0,
    quick: bool = True,
    seed: int = 0,
    progress: Optional[Callable[[CheckResult], None]] = None,
) -> List[CheckResult]:
    """All checks; ``quick`` shrinks the random-sample sizes for the CLI."""
    scale = 5 if quick else 1
    results: List[CheckResult] = []

    def add(r):
        for item in r if isinstance(r, list) else [r]:
            results.append(item)
            if progress is not None:
                progress(item)

    add(check_scattering_and_ito(50 // scale, seed))
    add(check_langevin_forms(20 // scale, seed + 1))
    add(check_counting_square(model))
    add(check_filter_forms(200 // scale, seed + 2))
    add(check_positivity(model, rho0, beta, steps=2_000 if quick else 10_000, seed=seed + 3))
    add(check_variance_closed_form())
    if model.dim <= 8:
        add(check_oracle(model, rho0, beta, repeats=10 if quick else 50))
    return results
