"""Linearized-phase Gaussian filter (quantum Kalman-Bucy form).

Only the means are driven by the innovations; the second moments ``V``
(position variance), ``C`` (symmetrized covariance) and ``W`` (momentum
variance) follow deterministic ODEs. Two sets of second-moment equations are
available:

``GaussianForm.PAPER``
    the literal rates ``dC/dt = -k V C (b + b*)^2 + hbar Im b`` and
    ``dW/dt = (2 hbar k Re b)^2 - (4 k C)^2 - 16 hbar k^2 C Im b``; kept for
    comparison, they drift away from the full filter's momentum variance.
``GaussianForm.DERIVED``
    the equations re-derived from the filter with Gaussian moment closure:
    ``dC/dt = -k^2 V (b + b*) [C (b + b*) + hbar Im b]`` and
    ``dW/dt = 2 hbar^2 k^2 |b|^2 - k^2 (2 C Re b + hbar Im b)^2``.

The ``V`` equation and the mean equations are identical in both.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class GaussianForm(enum.Enum):
    PAPER = "paper"
    DERIVED = "derived"


@dataclass(frozen=True)
class GaussianBelief:
    mean_q: float
    mean_p: float
    V: float
    C: float
    W: float
    k: float
    hbar: float = 1.0

    @classmethod
    def minimum_uncertainty(cls, V: float, k: float, hbar: float = 1.0, mean_q=0.0, mean_p=0.0, C=0.0):
        """Belief with ``V W - C^2 = hbar^2 / 4``."""
        return cls(mean_q, mean_p, V, C, (hbar**2 / 4 + C**2) / V, k, hbar)

    @classmethod
    def from_state(cls, rho, q, p, k: float, hbar: float = 1.0) -> "GaussianBelief":
        """Moments of a density matrix in a truncated oscillator basis."""
        ev = lambda x: float(np.real(np.trace(rho @ x)))
        mq, mp = ev(q), ev(p)
        return cls(
            mq,
            mp,
            ev(q @ q) - mq**2,
            0.5 * ev(q @ p + p @ q) - mq * mp,
            ev(p @ p) - mp**2,
            k,
            hbar,
        )

    def covariance_matrix(self) -> np.ndarray:
        h = 0.5j * self.hbar
        return np.array([[self.V, self.C + h], [self.C - h, self.W]])


def gaussian_step(
    belief: GaussianBelief,
    dI: float,
    beta: complex,
    dt: float,
    form: GaussianForm = GaussianForm.PAPER,
) -> GaussianBelief:
    if not dt > 0:
        raise ValueError("dt must be positive")
    b = belief
    k, hbar = b.k, b.hbar
    re, im = float(np.real(beta)), float(np.imag(beta))
    s = 2.0 * re  # beta + beta^*
    mean_q = b.mean_q - k * b.V * s * dI
    mean_p = b.mean_p + hbar * k * abs(beta) ** 2 * dt - 2 * k * b.C * re * dI - k * hbar * im * dI
    V = b.V - (k * b.V * s) ** 2 * dt
    if form is GaussianForm.PAPER:
        dC = -k * b.V * b.C * s**2 + hbar * im
        dW = (2 * hbar * k * re) ** 2 - (4 * k * b.C) ** 2 - 16 * hbar * k**2 * b.C * im
    else:
        dC = -(k**2) * b.V * s * (b.C * s + hbar * im)
        dW = 2 * (hbar * k) ** 2 * abs(beta) ** 2 - k**2 * (2 * b.C * re + hbar * im) ** 2
    if V < -1e-12:
        raise ValueError(f"variance went negative ({V:.3e}); reduce dt")
    return replace(b, mean_q=mean_q, mean_p=mean_p, V=V, C=b.C + dC * dt, W=b.W + dW * dt)


def variance_closed_form(V0: float, k: float, beta: complex, t):
    """Position variance under constant drive: 1 / (1/V0 + k^2 (b + b*)^2 t)."""
    if not V0 > 0:
        raise ValueError("V0 must be positive")
    s = 2.0 * float(np.real(beta))
    return 1.0 / (1.0 / V0 + k**2 * s**2 * np.asarray(t, dtype=float))


def third_moment_factorize(mx, my, mz, cxy, cxz, cyz):
    """Gaussian closure pi(XYZ) from means and second moments pi(XY), pi(XZ), pi(YZ)."""
    return mx * cyz + my * cxz + mz * cxy - 2.0 * mx * my * mz


def heisenberg_check(belief: GaussianBelief) -> float:
    """Smallest eigenvalue of [[V, C + i hbar/2], [C - i hbar/2, W]]."""
    return float(np.linalg.eigvalsh(belief.covariance_matrix())[0])


def run_gaussian(
    belief: GaussianBelief,
    dI,
    betas,
    dt: float,
    form: GaussianForm = GaussianForm.PAPER,
    stride: int = 1,
) -> dict:
    """Integrate over a given innovations sequence; returns sampled arrays."""
    dI = np.asarray(dI, dtype=float)
    betas = np.broadcast_to(np.asarray(betas, dtype=complex), dI.shape)
    rows = [_row(0.0, belief)]
    for n in range(dI.size):
        belief = gaussian_step(belief, dI[n], betas[n], dt, form)
        if (n + 1) % stride == 0:
            rows.append(_row((n + 1) * dt, belief))
    keys = rows[0].keys()
    return {key: np.array([r[key] for r in rows]) for key in keys}


def _row(t, b: GaussianBelief) -> dict:
    return {
        "t": t,
        "mean_q": b.mean_q,
        "mean_p": b.mean_p,
        "V": b.V,
        "C": b.C,
        "W": b.W,
        "heisenberg_min_eig": heisenberg_check(b),
    }
