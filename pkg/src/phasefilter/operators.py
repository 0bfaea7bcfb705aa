"""Dense operator helpers: the phase observable, the canonical pair and states.

Operators are plain ``numpy`` complex arrays. Validation helpers check the
Hermitian / density-operator invariants and return a fresh array so callers
never alias user input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

HERMITIAN_RTOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class DiagonalSpectrum:
    """Phase observable given directly by its eigenvalues (diagonal basis)."""

    eigenvalues: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("eigenvalues must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError("eigenvalues must be finite")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in vals))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != vals.shape or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ValueError("weights must be a probability vector matching eigenvalues")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))


@dataclass(frozen=True)
class LinearizedOscillator:
    """theta = 2 k q + pi (2 n + 1/2) on a truncated number basis."""

    k: float
    n: int = 0
    fock_dim: int = 30
    hbar: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.k):
            raise ValueError("k must be finite")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError("fock_dim must be an integer >= 2")
        if int(self.n) != self.n:
            raise ValueError("n must be an integer")
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValueError("hbar must be positive")

    @property
    def offset(self) -> float:
        return np.pi * (2 * self.n + 0.5)


PhaseSpec = Union[DiagonalSpectrum, LinearizedOscillator]


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def canonical_pair(dim: int, hbar: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Truncated position and momentum, ``q = sqrt(hbar/2)(a + a^dag)``.

    ``[q, p] = i hbar`` holds except in the last row/column (highest number
    state), where truncation breaks it.
    """
    a = annihilation(dim)
    ad = a.conj().T
    s = np.sqrt(hbar / 2.0)
    q = s * (a + ad)
    p = 1j * s * (ad - a)
    return q, p


def make_phase_operator(spec: PhaseSpec) -> np.ndarray:
    if isinstance(spec, DiagonalSpectrum):
        return np.diag(np.asarray(spec.eigenvalues, dtype=float)).astype(complex)
    if isinstance(spec, LinearizedOscillator):
        q, _ = canonical_pair(spec.fock_dim, spec.hbar)
        return 2.0 * spec.k * q + spec.offset * np.eye(spec.fock_dim, dtype=complex)
    raise TypeError(f"unknown phase spec {spec!r}")


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def as_operator(a, dim: Optional[int] = None) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"operator must be a non-empty square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("operator entries must be finite")
    return arr


def as_hermitian(a, dim: Optional[int] = None) -> np.ndarray:
    arr = as_operator(a, dim)
    scale = float(np.max(np.abs(arr)))
    if hermiticity_defect(arr) > HERMITIAN_RTOL * max(scale, 1e-300):
        raise ValueError("operator is not Hermitian")
    return arr


def phase_unitary(theta: np.ndarray) -> np.ndarray:
    """``exp(i theta)`` for Hermitian ``theta`` via eigendecomposition."""
    theta = as_hermitian(theta)
    # symmetrize so eigh sees an exactly Hermitian matrix
    vals, vecs = np.linalg.eigh(0.5 * (theta + theta.conj().T))
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


def expectation(rho: np.ndarray, x: np.ndarray) -> complex:
    """``tr(rho x)``."""
    rho = np.asarray(rho)
    x = np.asarray(x)
    if rho.shape != x.shape or rho.ndim != 2:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {x.shape}")
    # tr(AB) = sum_ij A_ij B_ji
    return complex(np.einsum("ij,ji->", rho, x))


@dataclass(frozen=True)
class DensityDiagnostics:
    trace_error: float
    min_eigenvalue: float
    hermiticity_defect: float

    @property
    def violation(self) -> bool:
        scale = 1.0
        return (
            self.trace_error > TRACE_TOL
            or self.min_eigenvalue < POSITIVITY_TOL
            or self.hermiticity_defect > HERMITIAN_RTOL * scale
        )

    def as_dict(self) -> dict:
        return {
            "trace_error": self.trace_error,
            "min_eigenvalue": self.min_eigenvalue,
            "hermiticity_defect": self.hermiticity_defect,
            "violation": self.violation,
        }


def check_density(rho) -> DensityDiagnostics:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("check_density expects a square matrix")
    herm = hermiticity_defect(rho)
    sym = 0.5 * (rho + rho.conj().T)
    return DensityDiagnostics(
        trace_error=float(abs(np.trace(rho) - 1.0)),
        min_eigenvalue=float(np.linalg.eigvalsh(sym)[0]),
        hermiticity_defect=herm,
    )


def as_density(rho, dim: Optional[int] = None) -> np.ndarray:
    arr = as_operator(rho, dim)
    diag = check_density(arr)
    if diag.violation:
        raise ValueError(f"not a valid density operator: {diag.as_dict()}")
    return arr


def diagonal_state(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=TRACE_TOL):
        raise ValueError("weights must be a probability vector")
    return np.diag(w).astype(complex)


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def gaussian_state(
    fock_dim: int,
    hbar: float = 1.0,
    mean_q: float = 0.0,
    mean_p: float = 0.0,
    var_q: Optional[float] = None,
    pad: int = 4,
) -> np.ndarray:
    """Minimum-uncertainty Gaussian state truncated to ``fock_dim`` levels.

    Built as ``D(alpha) S(r) |0>`` on a ``pad``-times larger basis, then cut
    and renormalized. ``var_q`` defaults to the vacuum value ``hbar/2``.
    """
    big = pad * fock_dim
    a = annihilation(big)
    ad = a.conj().T
    var_q = hbar / 2.0 if var_q is None else float(var_q)
    if var_q <= 0:
        raise ValueError("var_q must be positive")
    # S(r) = exp(r (a^2 - a^dag^2) / 2) gives var_q = (hbar/2) exp(-2r)
    r = -0.5 * np.log(var_q / (hbar / 2.0))
    squeeze = scipy.linalg.expm(0.5 * r * (a @ a - ad @ ad))
    alpha = (mean_q + 1j * mean_p) / np.sqrt(2.0 * hbar)
    displace = scipy.linalg.expm(alpha * ad - np.conj(alpha) * a)
    vac = np.zeros(big, dtype=complex)
    vac[0] = 1.0
    psi = displace @ (squeeze @ vac)
    return pure_state(psi[:fock_dim])


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (m + m.conj().T)


def random_density(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
