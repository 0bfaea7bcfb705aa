"""Measurement records, conditioned trajectories and Monte-Carlo ensembles.

Trajectories are stepped in batches: a stack of density matrices of shape
``(B, d, d)`` advances together, each member drawing its noise from its own
generator seeded by ``(seed, trajectory_index)``. Ensemble chunks are fixed
by ``batch_size`` alone, so the output does not depend on how many workers
run them or in what order they finish.
"""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .filters import (
    CountingVariant,
    HomodyneIntegrator,
    counting_update,
    expected_dy_rate,
    homodyne_update,
    jump_rate,
    stabilize,
)
from .interferometer import InterferometerModel, integrate_master_equation
from .operators import as_density, check_density, trace_distance

NOISE_BLOCK = 1024
DEFAULT_BATCH = 500


class Scheme(enum.Enum):
    HOMODYNE = "homodyne"
    COUNTING = "counting"


@dataclass(frozen=True)
class CoherentAmplitude:
    """Piecewise-constant drive amplitude: segments ``(t_start, t_end, beta)``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(a), float(b), complex(c)) for a, b, c in self.segments)
        if not segs:
            raise ValueError("drive needs at least one segment")
        for (a, b, _), nxt in zip(segs, segs[1:] + (None,)):
            if not a < b:
                raise ValueError(f"segment [{a}, {b}) must have t_start < t_end")
            if nxt is not None and not np.isclose(nxt[0], b, rtol=0, atol=1e-12):
                raise ValueError("segments must be contiguous and non-overlapping")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, beta: complex, T: float) -> "CoherentAmplitude":
        return cls(((0.0, T, beta),))

    def beta_at(self, t: float) -> complex:
        for a, b, beta in self.segments:
            if a <= t < b:
                return beta
        # the closing instant belongs to the last segment; outside the drive is vacuum
        last = self.segments[-1]
        return last[2] if np.isclose(t, last[1]) else 0j

    def sample(self, dt: float, n_steps: int) -> np.ndarray:
        return np.array([self.beta_at(n * dt) for n in range(n_steps)], dtype=complex)

    def max_abs(self) -> float:
        return max(abs(s[2]) for s in self.segments)


@dataclass
class TrajectoryConfig:
    model: InterferometerModel
    drive: CoherentAmplitude
    scheme: Scheme
    dt: float
    T: float
    seed: int
    initial_state: np.ndarray
    filter_initial_state: Optional[np.ndarray] = None
    counting_variant: CountingVariant = CountingVariant.UNITARITY_CONSISTENT
    record_stride: int = 1
    integrator: HomodyneIntegrator = HomodyneIntegrator.KRAUS

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        self.integrator = HomodyneIntegrator(self.integrator)
        self.counting_variant = CountingVariant(self.counting_variant)
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        d = self.model.dim
        self.initial_state = as_density(self.initial_state, d)
        if self.filter_initial_state is not None:
            self.filter_initial_state = as_density(self.filter_initial_state, d)
        if self.scheme is Scheme.COUNTING:
            p = self.dt * self.drive.max_abs() ** 2
            if p > 0.5:
                raise ValueError(f"click probability per step up to {p:.3f} > 0.5")
            if p > 0.1:
                warnings.warn(f"click probability per step up to {p:.3f} exceeds 0.1", RuntimeWarning)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def sample_steps(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.record_stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array(steps)


@dataclass
class Trajectory:
    scheme: Scheme
    t: np.ndarray
    Y: np.ndarray
    I: np.ndarray
    mean_q: np.ndarray
    var_q: np.ndarray
    zeta: np.ndarray
    purity: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    increment: np.ndarray  # change of Y since the previous sample (clicks, for counting)
    eigen_weights: np.ndarray
    final_state: np.ndarray
    quadratic_variation: float = 0.0

    def columns(self) -> dict:
        cols = {
            "t": self.t,
            "Y": self.Y,
            "I": self.I,
            "mean_q": self.mean_q,
            "var_q": self.var_q,
            "re_zeta": self.zeta.real,
            "im_zeta": self.zeta.imag,
            "purity": self.purity,
            "trace_err": self.trace_err,
            "min_eig": self.min_eig,
        }
        cols["dY" if self.scheme is Scheme.HOMODYNE else "clicks"] = self.increment
        return cols


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


class _NoiseSource:
    """Per-trajectory streams read in blocks; block size never changes the values."""

    def __init__(self, seed: int, indices: Sequence[int], scheme: Scheme):
        self.gens = [trajectory_rng(seed, i) for i in indices]
        self.scheme = scheme
        self.block = None
        self.pos = NOISE_BLOCK

    def next(self) -> np.ndarray:
        if self.pos == NOISE_BLOCK:
            if self.scheme is Scheme.HOMODYNE:
                self.block = np.stack([g.standard_normal(NOISE_BLOCK) for g in self.gens])
            else:
                self.block = np.stack([g.random(NOISE_BLOCK) for g in self.gens])
            self.pos = 0
        out = self.block[:, self.pos]
        self.pos += 1
        return out


def _eigen_indicator(model: InterferometerModel):
    theta = model.theta
    diagonal = np.allclose(theta, np.diag(np.diag(theta)), rtol=0, atol=1e-14)
    if diagonal:
        vals, vecs = np.real(np.diag(theta)), None
    else:
        vals, vecs = np.linalg.eigh(theta)
    keys = np.round(vals, 10)
    distinct = np.unique(keys)
    indicator = (keys[:, None] == distinct[None, :]).astype(float)
    return distinct, vecs, indicator


class _Recorder:
    """Samples moments of a state stack; keeps full paths or running sums."""

    def __init__(self, model, n_samples, batch, full):
        self.model = model
        self.full = full
        self.R = model.readout
        self.R2 = self.R @ self.R
        self.eigvals, self.vecs, self.indicator = _eigen_indicator(model)
        n_eig = self.eigvals.size
        d = model.dim
        self.i = 0
        if full:
            shape = (batch, n_samples)
            self.paths = {
                key: np.zeros(shape)
                for key in ("t", "Y", "I", "mean_q", "var_q", "purity", "trace_err", "min_eig", "increment")
            }
            self.paths["zeta"] = np.zeros(shape, dtype=complex)
            self.paths["eigen_weights"] = np.zeros((batch, n_samples, n_eig))
        else:
            self.rho_sum = np.zeros((n_samples, d, d), dtype=complex)
            self.w_sum = np.zeros((n_samples, n_eig))
            self.w_sq = np.zeros((n_samples, n_eig))
        self.times = np.zeros(n_samples)

    def weights(self, rho):
        if self.vecs is None:
            diag = np.real(np.einsum("...ii->...i", rho))
        else:
            v = self.vecs
            diag = np.real(np.einsum("ia,...ij,ja->...a", v.conj(), rho, v))
        return diag @ self.indicator

    def record(self, t, rho, Y, I, increment, trace_err, min_eig):
        i = self.i
        self.times[i] = t
        w = self.weights(rho)
        if self.full:
            p = self.paths
            mq = np.real(np.einsum("...ij,ji->...", rho, self.R))
            p["t"][:, i] = t
            p["Y"][:, i] = Y
            p["I"][:, i] = I
            p["mean_q"][:, i] = mq
            p["var_q"][:, i] = np.real(np.einsum("...ij,ji->...", rho, self.R2)) - mq**2
            p["zeta"][:, i] = np.einsum("...ij,ji->...", rho, self.model.u)
            p["purity"][:, i] = np.sum(np.abs(rho) ** 2, axis=(-2, -1))
            p["trace_err"][:, i] = trace_err
            p["min_eig"][:, i] = min_eig
            p["increment"][:, i] = increment
            p["eigen_weights"][:, i] = w
        else:
            self.rho_sum[i] = np.sum(rho, axis=0)
            self.w_sum[i] = np.sum(w, axis=0)
            self.w_sq[i] = np.sum(w**2, axis=0)
        self.i += 1


def _propagate(config: TrajectoryConfig, indices: Sequence[int], full: bool, with_filter: bool = False):
    model = config.model
    d = model.dim
    B = len(indices)
    dt = config.dt
    n_steps = config.n_steps
    samples = config.sample_steps()
    sample_set = set(samples.tolist())
    betas = config.drive.sample(dt, n_steps)
    noise = _NoiseSource(config.seed, indices, config.scheme)
    homodyne = config.scheme is Scheme.HOMODYNE
    variant = config.counting_variant
    integrator = config.integrator

    rho = np.broadcast_to(config.initial_state, (B, d, d)).copy()
    rec = _Recorder(model, samples.size, B, full)
    Y = np.zeros(B)
    I = np.zeros(B)
    QV = np.zeros(B)
    inc = np.zeros(B)
    Y_last = np.zeros(B)
    diag0 = check_density(config.initial_state)
    terr = np.full(B, diag0.trace_error)
    wmin = np.full(B, diag0.min_eigenvalue)
    worst_min, worst_terr = float(np.min(wmin)), float(np.max(terr))
    rec.record(0.0, rho, Y, I, inc, terr, wmin)

    if with_filter:
        prior = config.filter_initial_state
        prior = config.initial_state if prior is None else prior
        rho_f = np.broadcast_to(prior, (B, d, d)).copy()
        rec_f = _Recorder(model, samples.size, B, full)
        I_f = np.zeros(B)
        terr_f, wmin_f = terr.copy(), wmin.copy()
        rec_f.record(0.0, rho_f, Y, I_f, inc, terr_f, wmin_f)

    sqdt = np.sqrt(dt)
    for n in range(n_steps):
        beta = betas[n]
        draw = noise.next()
        if homodyne:
            rate = expected_dy_rate(rho, beta, model)
            dI = sqdt * draw
            dY = dI + rate * dt
            new = homodyne_update(rho, dI, beta, dt, model, integrator)
        else:
            rate = jump_rate(rho, beta, model)
            click = draw < rate * dt
            dY = click.astype(float)
            dI = dY - rate * dt
            new = counting_update(rho, click, beta, dt, model, variant)
        if with_filter:
            # dY - rate_f dt, arranged to be bitwise dI when the two states agree
            if homodyne:
                dI_f = dI + (rate - expected_dy_rate(rho_f, beta, model)) * dt
                new_f = homodyne_update(rho_f, dI_f, beta, dt, model, integrator)
            else:
                dI_f = dI + (rate - jump_rate(rho_f, beta, model)) * dt
                new_f = counting_update(rho_f, click, beta, dt, model, variant)
            rho_f, wmin_f, terr_f = stabilize(new_f)
            I_f += dI_f
            worst_min = min(worst_min, float(np.min(wmin_f)))
            worst_terr = max(worst_terr, float(np.max(terr_f)))
        rho, wmin, terr = stabilize(new)
        worst_min = min(worst_min, float(np.min(wmin)))
        worst_terr = max(worst_terr, float(np.max(terr)))
        Y += dY
        I += dI
        QV += dI * dI
        if (n + 1) in sample_set:
            t = (n + 1) * dt
            inc = Y - Y_last
            Y_last = Y.copy()
            rec.record(t, rho, Y, I, inc, terr, wmin)
            if with_filter:
                rec_f.record(t, rho_f, Y, I_f, inc, terr_f, wmin_f)

    out = {
        "recorder": rec,
        "rho": rho,
        "Y": Y,
        "I": I,
        "QV": QV,
        "worst_min_eig": worst_min,
        "worst_trace_err": worst_terr,
    }
    if with_filter:
        out["filter_recorder"] = rec_f
        out["filter_rho"] = rho_f
    return out


def _trajectory_from(rec: _Recorder, b: int, scheme: Scheme, final_state, qv) -> Trajectory:
    p = rec.paths
    return Trajectory(
        scheme=scheme,
        t=rec.times.copy(),
        Y=p["Y"][b].copy(),
        I=p["I"][b].copy(),
        mean_q=p["mean_q"][b].copy(),
        var_q=p["var_q"][b].copy(),
        zeta=p["zeta"][b].copy(),
        purity=p["purity"][b].copy(),
        trace_err=p["trace_err"][b].copy(),
        min_eig=p["min_eig"][b].copy(),
        increment=p["increment"][b].copy(),
        eigen_weights=p["eigen_weights"][b].copy(),
        final_state=np.array(final_state),
        quadratic_variation=float(qv),
    )


def simulate(config: TrajectoryConfig, index: int = 0) -> Trajectory:
    """One innovations-driven trajectory; deterministic given ``(seed, index)``."""
    out = _propagate(config, [index], full=True)
    return _trajectory_from(out["recorder"], 0, config.scheme, out["rho"][0], out["QV"][0])


def simulate_homodyne(config: TrajectoryConfig, index: int = 0) -> Trajectory:
    if config.scheme is not Scheme.HOMODYNE:
        raise ValueError("config scheme is not homodyne")
    return simulate(config, index)


def simulate_counting(config: TrajectoryConfig, index: int = 0) -> Trajectory:
    if config.scheme is not Scheme.COUNTING:
        raise ValueError("config scheme is not counting")
    return simulate(config, index)


def estimation_run(config: TrajectoryConfig, index: int = 0) -> tuple[Trajectory, Trajectory]:
    """Truth trajectory plus a second filter fed the truth's record from its own prior."""
    out = _propagate(config, [index], full=True, with_filter=True)
    truth = _trajectory_from(out["recorder"], 0, config.scheme, out["rho"][0], out["QV"][0])
    est = _trajectory_from(out["filter_recorder"], 0, config.scheme, out["filter_rho"][0], 0.0)
    return truth, est


def estimation_batch(config: TrajectoryConfig, indices: Sequence[int]) -> dict:
    """Batched estimation runs; returns full per-trajectory paths for truth and filter."""
    out = _propagate(config, list(indices), full=True, with_filter=True)
    return {
        "t": out["recorder"].times.copy(),
        "truth": out["recorder"].paths,
        "filter": out["filter_recorder"].paths,
        "worst_min_eig": out["worst_min_eig"],
        "worst_trace_err": out["worst_trace_err"],
    }


# ----- ensembles -----

@dataclass
class EnsembleResult:
    M: int
    times: np.ndarray
    mean_rho: np.ndarray
    eigenvalues: np.ndarray
    mean_weights: np.ndarray
    weight_std_err: np.ndarray
    final_weights: np.ndarray
    I_T: np.ndarray
    Y_T: np.ndarray
    quadratic_variation: np.ndarray
    worst_min_eig: float
    worst_trace_err: float


def _chunk_summary(args):
    config, indices = args
    out = _propagate(config, indices, full=False)
    rec = out["recorder"]
    return {
        "rho_sum": rec.rho_sum,
        "w_sum": rec.w_sum,
        "w_sq": rec.w_sq,
        "times": rec.times,
        "final_w": rec.weights(out["rho"]),
        "I": out["I"],
        "Y": out["Y"],
        "QV": out["QV"],
        "worst_min_eig": out["worst_min_eig"],
        "worst_trace_err": out["worst_trace_err"],
    }


def run_ensemble(
    config: TrajectoryConfig, M: int, workers: int = 1, batch_size: int = DEFAULT_BATCH
) -> EnsembleResult:
    if M < 1:
        raise ValueError("M must be positive")
    chunks = [list(range(i, min(i + batch_size, M))) for i in range(0, M, batch_size)]
    jobs = [(config, c) for c in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_summary, jobs))
    else:
        parts = [_chunk_summary(j) for j in jobs]
    # partial sums combined in chunk order with pairwise summation
    rho_sum = np.sum(np.stack([p["rho_sum"] for p in parts]), axis=0)
    w_sum = np.sum(np.stack([p["w_sum"] for p in parts]), axis=0)
    w_sq = np.sum(np.stack([p["w_sq"] for p in parts]), axis=0)
    mean_w = w_sum / M
    var_w = np.maximum(w_sq / M - mean_w**2, 0.0) * (M / max(M - 1, 1))
    eigvals, _, _ = _eigen_indicator(config.model)
    return EnsembleResult(
        M=M,
        times=parts[0]["times"],
        mean_rho=rho_sum / M,
        eigenvalues=eigvals,
        mean_weights=mean_w,
        weight_std_err=np.sqrt(var_w / M),
        final_weights=np.concatenate([p["final_w"] for p in parts]),
        I_T=np.concatenate([p["I"] for p in parts]),
        Y_T=np.concatenate([p["Y"] for p in parts]),
        quadratic_variation=np.concatenate([p["QV"] for p in parts]),
        worst_min_eig=min(p["worst_min_eig"] for p in parts),
        worst_trace_err=max(p["worst_trace_err"] for p in parts),
    )


@dataclass
class EnsembleComparison:
    ensemble: EnsembleResult
    me_states: np.ndarray
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))


def ensemble_average(
    config: TrajectoryConfig, M: int, workers: int = 1, batch_size: int = DEFAULT_BATCH
) -> EnsembleComparison:
    """Average conditioned states over ``M`` trajectories and compare to the RK4 master equation."""
    if M < 2:
        raise ValueError("M must be at least 2")
    ens = run_ensemble(config, M, workers, batch_size)
    _, me = integrate_master_equation(
        config.initial_state, config.drive, config.model, config.dt, config.n_steps
    )
    me = me[config.sample_steps()]
    dist = np.array([trace_distance(a, b) for a, b in zip(ens.mean_rho, me)])
    return EnsembleComparison(ens, me, dist)


@dataclass
class CollapseReport:
    eigenvalues: np.ndarray
    expected: np.ndarray
    counts: np.ndarray
    frequencies: np.ndarray
    unclassified: int
    M: int
    threshold: float
    times: np.ndarray
    mean_weights: np.ndarray
    weight_std_err: np.ndarray
    final_weights: np.ndarray = None
    worst_min_eig: float = 0.0
    worst_trace_err: float = 0.0

    def tolerance(self, n_sigma: float = 3.0) -> np.ndarray:
        p = self.expected
        return n_sigma * np.sqrt(p * (1 - p) / self.M)

    def martingale_deviation(self) -> float:
        """Largest |mean pi_t(P_a) - pi_0(P_a)| in units of its standard error."""
        dev = np.abs(self.mean_weights - self.mean_weights[0])
        se = np.where(self.weight_std_err > 0, self.weight_std_err, np.inf)
        return float(np.max(dev / se))


def collapse_statistics(
    config: TrajectoryConfig,
    M: int,
    threshold: float = 0.99,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> CollapseReport:
    if config.scheme is not Scheme.HOMODYNE:
        raise ValueError("collapse statistics use the homodyne scheme")
    if config.model.has_hamiltonian:
        raise ValueError("collapse statistics require H = 0")
    ens = run_ensemble(config, M, workers, batch_size)
    if ens.eigenvalues.size < 2:
        raise ValueError("theta needs at least two distinct eigenvalues")
    w = ens.final_weights
    settled = w > threshold
    classified = np.any(settled, axis=1)
    counts = np.array([np.sum(settled[:, a]) for a in range(w.shape[1])])
    expected = _Recorder(config.model, 1, 1, False).weights(config.initial_state)
    return CollapseReport(
        eigenvalues=ens.eigenvalues,
        expected=expected,
        counts=counts,
        frequencies=counts / M,
        unclassified=int(np.sum(~classified)),
        M=M,
        threshold=threshold,
        times=ens.times,
        mean_weights=ens.mean_weights,
        weight_std_err=ens.weight_std_err,
        final_weights=w,
        worst_min_eig=ens.worst_min_eig,
        worst_trace_err=ens.worst_trace_err,
    )
