"""Dense complex linear algebra on small Hilbert spaces.

Matrix exponentials, time-ordered propagation of time-dependent Hamiltonians
on a uniform grid, and partial inner products on bipartite spaces.

Tensor-product index convention: the SYSTEM index is the slow (outer) index,
i.e. a joint operator is ``np.kron(op_system, op_reservoir)`` and a joint
state index decomposes as ``i = s * dim_r + r``.  All partial traces and
partial inner products in this package rely on this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DimensionError, InvalidOperand

HERMITICITY_TOL = 1e-12

# Pauli matrices in the (|g>, |e>) ordering used throughout:
# sigma_z = |e><e| - |g><g| = diag(-1, +1).
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise InvalidOperand("matrix has non-finite entries")
    return m


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    scale = max(1.0, np.linalg.norm(m))
    return np.linalg.norm(m - m.conj().T) <= tol * scale


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with ``n_steps`` intervals (``n_steps + 1`` nodes)."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        t = self.times
        return 0.5 * (t[:-1] + t[1:])


@dataclass
class Schedule:
    """Time-dependent Hermitian operator ``H(t)``.

    Wraps an evaluator ``t -> matrix``; samples on a grid are cached.
    """

    evaluator: Callable[[float], np.ndarray]
    dim: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, t: float) -> np.ndarray:
        m = _as_square(self.evaluator(t))
        if m.shape[0] != self.dim:
            raise DimensionError(
                f"schedule evaluator returned dim {m.shape[0]}, declared {self.dim}"
            )
        return m

    @classmethod
    def constant(cls, m) -> "Schedule":
        m = _as_square(m)
        return cls(evaluator=lambda t, _m=m: _m, dim=m.shape[0])

    def sample(self, grid: TimeGrid, at: str = "nodes") -> np.ndarray:
        """Sampled values on grid nodes or interval midpoints, cached."""
        key = (grid, at)
        if key not in self._cache:
            ts = grid.times if at == "nodes" else grid.midpoints
            self._cache[key] = np.array([self(t) for t in ts])
        return self._cache[key]

    def check_hermitian(self, grid: TimeGrid, tol: float = HERMITICITY_TOL):
        for h in self.sample(grid):
            if not is_hermitian(h, tol):
                raise InvalidOperand("schedule is not Hermitian on the grid")


def matexp(m) -> np.ndarray:
    """Matrix exponential.

    Hermitian inputs go through an eigendecomposition, anti-Hermitian inputs
    through the eigendecomposition of ``i*M`` (which keeps the result unitary
    to machine precision); everything else falls back to scaling-and-squaring.
    """
    m = _as_square(m)
    scale = max(1.0, np.linalg.norm(m))
    if np.linalg.norm(m - m.conj().T) <= HERMITICITY_TOL * scale:
        w, v = np.linalg.eigh(m)
        return (v * np.exp(w)) @ v.conj().T
    if np.linalg.norm(m + m.conj().T) <= HERMITICITY_TOL * scale:
        # m = -i*h with h = i*m Hermitian
        w, v = np.linalg.eigh(1j * m)
        return (v * np.exp(-1j * w)) @ v.conj().T
    return scipy.linalg.expm(m)


def time_ordered_propagator(h: Schedule, grid: TimeGrid) -> np.ndarray:
    """Propagators ``U(t_k)`` for all grid nodes, ``U(t_0) = 1``.

    Uses the midpoint-rule product of step exponentials
    ``exp(-i H(t_{k+1/2}) dt)``, which is second order in ``dt`` and exactly
    unitary for Hermitian schedules.
    """
    h_mid = h.sample(grid, at="midpoints")
    dt = grid.dt
    us = np.empty((grid.n_steps + 1, h.dim, h.dim), dtype=complex)
    us[0] = np.eye(h.dim)
    for k in range(grid.n_steps):
        us[k + 1] = matexp(-1j * h_mid[k] * dt) @ us[k]
    return us


def partial_inner(bra_r, u, ket_r, dim_s: int, dim_r: int) -> np.ndarray:
    """System-space operator ``<b_R| U |r>`` for a joint operator ``U``.

    ``bra_r`` enters conjugated; ``U`` acts on the joint space with the system
    as the slow index.
    """
    u = _as_square(u)
    bra_r = np.asarray(bra_r, dtype=complex)
    ket_r = np.asarray(ket_r, dtype=complex)
    if u.shape[0] != dim_s * dim_r:
        raise DimensionError(
            f"joint dim {u.shape[0]} != dim_s*dim_r = {dim_s * dim_r}"
        )
    if bra_r.shape != (dim_r,) or ket_r.shape != (dim_r,):
        raise DimensionError("reservoir vectors must have length dim_r")
    u4 = u.reshape(dim_s, dim_r, dim_s, dim_r)
    return np.einsum("i,aibj,j->ab", bra_r.conj(), u4, ket_r)


def partial_trace_reservoir(rho_joint, dim_s: int, dim_r: int) -> np.ndarray:
    """Trace a joint density matrix over the reservoir factor."""
    rho_joint = _as_square(rho_joint)
    if rho_joint.shape[0] != dim_s * dim_r:
        raise DimensionError("joint dimension mismatch")
    r4 = rho_joint.reshape(dim_s, dim_r, dim_s, dim_r)
    return np.einsum("aibi->ab", r4)
