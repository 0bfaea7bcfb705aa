"""Full conditioned-state filter against the Gaussian filter for a weakly coupled oscillator.

Both filters are driven by one innovations path: the SME trajectory is
simulated first and its increments ``dI`` are replayed through
:func:`run_gaussian` for each second-moment form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import GaussianBelief, GaussianForm, run_gaussian
from .interferometer import InterferometerModel
from .operators import LinearizedOscillator, gaussian_state
from .trajectories import CoherentAmplitude, Scheme, TrajectoryConfig, simulate


@dataclass(frozen=True)
class LinearRegimeSetup:
    k: float = 0.02
    fock_dim: int = 40
    beta: complex = 4.0
    V0: float = 4.0
    mean_q: float = 0.5
    # starts the momentum below zero so the kick hbar k |beta|^2 t keeps it centred
    mean_p: float = -1.56
    dt: float = 1e-3
    seed: int = 20240601
    hbar: float = 1.0

    @property
    def half_variance_time(self) -> float:
        """Time at which the closed-form position variance reaches V0 / 2."""
        s = 2.0 * float(np.real(self.beta))
        return 1.0 / (self.V0 * self.k**2 * s**2)

    def model(self) -> InterferometerModel:
        return InterferometerModel.from_spec(LinearizedOscillator(self.k, 0, self.fock_dim, self.hbar))

    def initial_state(self) -> np.ndarray:
        return gaussian_state(self.fock_dim, self.hbar, self.mean_q, self.mean_p, self.V0)

    def trajectory_config(self, T: float) -> TrajectoryConfig:
        return TrajectoryConfig(
            model=self.model(),
            drive=CoherentAmplitude.constant(self.beta, T),
            scheme=Scheme.HOMODYNE,
            dt=self.dt,
            T=T,
            seed=self.seed,
            initial_state=self.initial_state(),
        )


@dataclass
class LinearRegimeReport:
    setup: LinearRegimeSetup
    T: float
    t: np.ndarray
    sme_mean_q: np.ndarray
    sme_var_q: np.ndarray
    gaussian: dict  # form value -> run_gaussian output
    rel_mean_error: float
    rel_var_error: float
    final_W: dict  # "sme", "paper", "derived"
    excess_kurtosis: float
    worst_min_eig: float
    worst_trace_err: float
    innovations: np.ndarray = field(repr=False, default=None)

    def summary(self) -> dict:
        return {
            "T": self.T,
            "max_rel_mean_error": self.rel_mean_error,
            "max_rel_var_error": self.rel_var_error,
            "final_W": self.final_W,
            "final_W_rel_error": {
                form: abs(self.final_W[form] - self.final_W["sme"]) / self.final_W["sme"]
                for form in ("paper", "derived")
            },
            "excess_kurtosis": self.excess_kurtosis,
            "worst_min_eig": self.worst_min_eig,
            "worst_trace_err": self.worst_trace_err,
        }


def excess_kurtosis(rho: np.ndarray, q: np.ndarray) -> float:
    """Fourth standardized central moment of q under rho, minus 3."""
    m = float(np.real(np.trace(rho @ q)))
    c = q - m * np.eye(q.shape[0])
    c2 = c @ c
    var = float(np.real(np.trace(rho @ c2)))
    return float(np.real(np.trace(rho @ c2 @ c2))) / var**2 - 3.0


def run_linear_regime(setup: LinearRegimeSetup = LinearRegimeSetup(), T: float | None = None) -> LinearRegimeReport:
    """Run the comparison up to ``T`` (default: the half-variance time)."""
    T = setup.half_variance_time if T is None else float(T)
    cfg = setup.trajectory_config(T)
    model = cfg.model
    traj = simulate(cfg)
    dI = np.diff(traj.I)
    q, p = model.position, model.momentum
    belief = GaussianBelief.from_state(cfg.initial_state, q, p, setup.k, setup.hbar)
    betas = cfg.drive.sample(cfg.dt, cfg.n_steps)
    runs = {form.value: run_gaussian(belief, dI, betas, cfg.dt, form) for form in GaussianForm}

    ref = runs[GaussianForm.PAPER.value]  # mean and V do not depend on the form
    scale = np.maximum(np.abs(ref["mean_q"]), np.sqrt(ref["V"]))
    final = GaussianBelief.from_state(traj.final_state, q, p, setup.k, setup.hbar)
    return LinearRegimeReport(
        setup=setup,
        T=T,
        t=traj.t,
        sme_mean_q=traj.mean_q,
        sme_var_q=traj.var_q,
        gaussian=runs,
        rel_mean_error=float(np.max(np.abs(ref["mean_q"] - traj.mean_q) / scale)),
        rel_var_error=float(np.max(np.abs(ref["V"] - traj.var_q) / ref["V"])),
        final_W={"sme": final.W, **{form: float(r["W"][-1]) for form, r in runs.items()}},
        excess_kurtosis=excess_kurtosis(traj.final_state, q),
        worst_min_eig=float(np.min(traj.min_eig)),
        worst_trace_err=float(np.max(traj.trace_err)),
        innovations=dI,
    )
