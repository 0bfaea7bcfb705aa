"""Mach-Zehnder scattering matrix and the unconditional (master-equation) dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import (
    LinearizedOscillator,
    PhaseSpec,
    as_hermitian,
    canonical_pair,
    make_phase_operator,
    phase_unitary,
)

UNITARITY_TOL = 1e-12

BEAM_SPLITTER = np.array([[1.0, 1j], [1j, 1.0]]) / np.sqrt(2.0)


def scattering_matrix(theta: np.ndarray) -> np.ndarray:
    """Operator-valued 2x2 scattering matrix, returned as shape ``(2, 2, d, d)``."""
    u = phase_unitary(theta)
    eye = np.eye(u.shape[0], dtype=complex)
    s = np.empty((2, 2) + u.shape, dtype=complex)
    s[0, 0] = 0.5 * (eye + u)
    s[0, 1] = 0.5j * (eye - u)
    s[1, 0] = 0.5j * (eye - u)
    s[1, 1] = -0.5 * (eye + u)
    return s


def scattering_from_product(theta: np.ndarray) -> np.ndarray:
    """Same matrix assembled as T P T with P = diag(1, -exp(i theta))."""
    u = phase_unitary(theta)
    d = u.shape[0]
    eye = np.eye(d, dtype=complex)
    path = np.zeros((2, 2, d, d), dtype=complex)
    path[0, 0] = eye
    path[1, 1] = -u
    bs = np.einsum("ij,ab->ijab", BEAM_SPLITTER, eye)
    return block_matmul(block_matmul(bs, path), bs)


def block_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of operator-valued block matrices of shape (n, m, d, d) and (m, l, d, d)."""
    return np.einsum("ikab,kjbc->ijac", a, b)


def block_dagger(s: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(s, (1, 0, 3, 2)))


def require_unitary(s: np.ndarray, tol: float = UNITARITY_TOL) -> float:
    residual = verify_unitarity(s)
    if residual > tol:
        raise ValueError(f"scattering matrix not unitary (residual {residual:.3e})")
    return residual


def verify_unitarity(s: np.ndarray) -> float:
    """Largest entrywise defect of S^dag S = 1 and S S^dag = 1 (blockwise)."""
    s = np.asarray(s, dtype=complex)
    n, d = s.shape[0], s.shape[2]
    ident = np.einsum("ij,ab->ijab", np.eye(n), np.eye(d))
    left = block_matmul(block_dagger(s), s) - ident
    right = block_matmul(s, block_dagger(s)) - ident
    return float(max(np.max(np.abs(left)), np.max(np.abs(right))))


@dataclass
class InterferometerModel:
    """Phase observable ``theta`` in one arm plus an internal Hamiltonian.

    ``position``/``momentum`` are populated for the oscillator phase spec and
    are the observables the trajectory engine reports as the readout. For a
    diagonal spectrum the readout is ``theta`` itself.
    """

    theta: np.ndarray
    hamiltonian: Optional[np.ndarray] = None
    hbar: float = 1.0
    spec: Optional[PhaseSpec] = None
    position: Optional[np.ndarray] = None
    momentum: Optional[np.ndarray] = None
    u: np.ndarray = field(init=False, repr=False)
    S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.theta = as_hermitian(self.theta)
        d = self.theta.shape[0]
        if self.hamiltonian is None:
            self.hamiltonian = np.zeros((d, d), dtype=complex)
        else:
            self.hamiltonian = as_hermitian(self.hamiltonian, d)
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        self.u = phase_unitary(self.theta)
        self.S = scattering_matrix(self.theta)
        require_unitary(self.S)
        self.u_dag = self.u.conj().T
        self.S11 = self.S[0, 0]
        self.S21 = self.S[1, 0]
        # (1 + cos theta)/2 = S11^dag S11
        self.bright = self.S11.conj().T @ self.S11
        self.cos_theta = 0.5 * (self.u + self.u_dag)
        self.cos2_theta = self.cos_theta @ self.cos_theta
        self.has_hamiltonian = bool(np.any(self.hamiltonian != 0))

    @classmethod
    def from_spec(cls, spec: PhaseSpec, hamiltonian=None) -> "InterferometerModel":
        theta = make_phase_operator(spec)
        if isinstance(spec, LinearizedOscillator):
            q, p = canonical_pair(spec.fock_dim, spec.hbar)
            return cls(theta, hamiltonian, spec.hbar, spec, q, p)
        return cls(theta, hamiltonian, 1.0, spec)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def readout(self) -> np.ndarray:
        return self.theta if self.position is None else self.position

    def eigenprojectors(self, decimals: int = 10) -> tuple[np.ndarray, np.ndarray]:
        """Distinct eigenvalues of theta and the matching spectral projectors."""
        vals, vecs = np.linalg.eigh(self.theta)
        keys = np.round(vals, decimals)
        distinct = np.unique(keys)
        projs = np.empty((distinct.size, self.dim, self.dim), dtype=complex)
        for i, key in enumerate(distinct):
            v = vecs[:, keys == key]
            projs[i] = v @ v.conj().T
        return distinct, projs


def master_equation_rhs(rho: np.ndarray, beta: complex, model: InterferometerModel) -> np.ndarray:
    """Nonselective dynamics; works on a single state or a stack ``(..., d, d)``."""
    u, ud = model.u, model.u_dag
    out = 0.5 * (u @ rho @ ud - rho) * abs(beta) ** 2
    if model.has_hamiltonian:
        h = model.hamiltonian
        out = out + 1j * (rho @ h - h @ rho)
    return out


def integrate_master_equation(
    rho0: np.ndarray,
    beta_of_t,
    model: InterferometerModel,
    dt: float,
    n_steps: int,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4. Returns sample times and states every ``stride`` steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    beta_of_t = _as_beta_function(beta_of_t)
    rho = np.array(rho0, dtype=complex)
    times, states = [0.0], [rho.copy()]
    for n in range(n_steps):
        t = n * dt
        b0, bh, b1 = beta_of_t(t), beta_of_t(t + 0.5 * dt), beta_of_t(t + dt)
        k1 = master_equation_rhs(rho, b0, model)
        k2 = master_equation_rhs(rho + 0.5 * dt * k1, bh, model)
        k3 = master_equation_rhs(rho + 0.5 * dt * k2, bh, model)
        k4 = master_equation_rhs(rho + dt * k3, b1, model)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (n + 1) % stride == 0:
            times.append((n + 1) * dt)
            states.append(rho.copy())
    return np.array(times), np.array(states)


def _as_beta_function(beta):
    if callable(beta):
        return beta
    if hasattr(beta, "beta_at"):
        return beta.beta_at
    value = complex(beta)
    return lambda t: value
