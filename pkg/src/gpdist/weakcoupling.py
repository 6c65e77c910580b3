"""Second-order perturbation theory for a weakly coupled reservoir.

In the interaction picture the joint propagator factorizes as
``U_SR = U_S U_R Utilde`` with ``Utilde = 1 + A + B + ...`` where

    A(t) = -i * integral_0^t H_I~(t') dt'
    B(t) = -  integral_0^t dt' integral_0^t' dt'' H_I~(t') H_I~(t'')

and ``H_I~ = U_R^dag U_S^dag H_I U_S U_R``.  Under the coupling condition
``<r|R_mu|r> = 0`` for every populated reservoir eigenstate, the first-order
terms drop out of the phase functional and the correction to Z is governed by
the operator B alone, through the functional ``delta_z`` below.  The
perturbative moments of both phase distributions then coincide:

    <e^{ins}>_H = <z^n>_Z / |<z>_Z|^n = e^{in beta0} (1 + i n Im<DeltaZ>).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channels import ReservoirSpec
from .errors import (
    DimensionError,
    InconsistentModel,
    InvalidOperand,
    RCondViolated,
    UndefinedGP,
)
from .hilbert import Schedule, TimeGrid, is_hermitian, matexp, time_ordered_propagator

RCOND_TOL = 1e-10
IM_DZ_WARN = 0.1


@dataclass
class WeakCouplingModel:
    """System schedule, static reservoir, and coupling ``H_I = -sum R_mu S_mu``.

    ``couplings`` is a list of ``(r_op, s_op)`` pairs acting on the reservoir
    and system factors; the joint coupling is ``-sum kron(s_op, r_op)``
    (system slow index).
    """

    hs: Schedule
    hr: np.ndarray
    couplings: list[tuple[np.ndarray, np.ndarray]]
    res: ReservoirSpec
    psi_s: np.ndarray

    def __post_init__(self):
        self.hr = np.asarray(self.hr, dtype=complex)
        self.psi_s = np.asarray(self.psi_s, dtype=complex)
        self.couplings = [
            (np.asarray(r, dtype=complex), np.asarray(s, dtype=complex))
            for r, s in self.couplings
        ]
        if self.hr.shape[0] != self.res.dim:
            raise DimensionError("H_R dimension != reservoir dimension")
        if not is_hermitian(self.h_interaction()):
            raise InvalidOperand("H_I is not Hermitian")

    @property
    def dim_s(self) -> int:
        return self.hs.dim

    @property
    def dim_r(self) -> int:
        return self.hr.shape[0]

    def h_interaction(self) -> np.ndarray:
        out = np.zeros((self.dim_s * self.dim_r,) * 2, dtype=complex)
        for r_op, s_op in self.couplings:
            out -= np.kron(s_op, r_op)
        return out

    def rcond_defect(self) -> float:
        """Largest |<r|R_mu|r>| over populated states and coupling terms."""
        worst = 0.0
        for p, r in zip(self.res.probs, self.res.states):
            if p == 0.0:
                continue
            for r_op, _ in self.couplings:
                worst = max(worst, abs(np.vdot(r, r_op @ r)))
        return worst

    def require_rcond(self, tol: float = RCOND_TOL):
        defect = self.rcond_defect()
        if defect > tol:
            raise RCondViolated(
                f"<r|R|r> reaches {defect:.3e}; the perturbative GP formula "
                "is spurious for this coupling"
            )


@dataclass
class PerturbationOperators:
    """Grid-sampled A, B (joint space) and the system-picture operators the
    phase correction needs."""

    grid: TimeGrid
    a: np.ndarray          # (n+1, d, d) joint, anti-Hermitian
    b: np.ndarray          # (n+1, d, d) joint
    us: np.ndarray         # (n+1, ds, ds) system propagator
    h_int_tilde: np.ndarray  # (n+1, d, d) interaction-picture H_I
    dhs_tilde: np.ndarray  # (n+1, ds, ds) traceless-in-psi_S part of H_S~


def _cumtrapz(samples: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid along the leading axis (matrix-valued)."""
    out = np.zeros_like(samples)
    out[1:] = np.cumsum(0.5 * dt * (samples[:-1] + samples[1:]), axis=0)
    return out


def build_AB(model: WeakCouplingModel, grid: TimeGrid) -> PerturbationOperators:
    """A via trapezoidal accumulation; B via the nested (inner cumulative,
    outer re-integrated) trapezoid, both second order in dt."""
    dim_s, dim_r = model.dim_s, model.dim_r
    us = time_ordered_propagator(model.hs, grid)
    h_i = model.h_interaction()
    ts = grid.times
    h_tilde = np.empty((len(ts), dim_s * dim_r, dim_s * dim_r), dtype=complex)
    for k, t in enumerate(ts):
        ur = matexp(-1j * t * model.hr)
        w = np.kron(us[k], ur)
        h_tilde[k] = w.conj().T @ h_i @ w

    a = -1j * _cumtrapz(h_tilde, grid.dt)
    inner = _cumtrapz(h_tilde, grid.dt)          # integral of H~ up to t'
    b = -_cumtrapz(h_tilde @ inner, grid.dt)

    psi = model.psi_s
    hs_samples = model.hs.sample(grid)
    dhs = np.empty((len(ts), dim_s, dim_s), dtype=complex)
    for k in range(len(ts)):
        hst = us[k].conj().T @ hs_samples[k] @ us[k]
        dhs[k] = hst - np.vdot(psi, hst @ psi) * np.eye(dim_s)
    return PerturbationOperators(grid=grid, a=a, b=b, us=us,
                                 h_int_tilde=h_tilde, dhs_tilde=dhs)


def reservoir_blocks_of_b(
    ops: PerturbationOperators, res: ReservoirSpec, dim_s: int
) -> list[tuple[float, np.ndarray]]:
    """Diagonal reservoir blocks ``<r|B(t)|r>`` as system-operator samples."""
    n = ops.b.shape[0]
    dim_r = res.dim
    out = []
    for p_r, r in zip(res.probs, res.states):
        blk = np.empty((n, dim_s, dim_s), dtype=complex)
        b4 = ops.b.reshape(n, dim_s, dim_r, dim_s, dim_r)
        blk = np.einsum("i,kaibj,j->kab", r.conj(), b4, r)
        out.append((float(p_r), blk))
    return out


def delta_z_from_blocks(
    b_blocks: list[tuple[float, np.ndarray]],
    us: np.ndarray,
    dhs_tilde: np.ndarray,
    psi_s: np.ndarray,
    grid: TimeGrid,
    eps_z: float = 1e-9,
) -> complex:
    """Reservoir-averaged phase correction <DeltaZ> from the blocks of B.

    Per populated reservoir state the correction functional is

        U_S B / <U_S>_S - (B - B^dag)/2
        + i * integral_0^t dt' (B^dag(t') dHs~(t') + dHs~(t') B(t'))

    with B inside the integral evaluated at the running time; everything is
    then taken in the system expectation over psi_S and weighted by p_r.
    """
    psi = np.asarray(psi_s, dtype=complex)
    u_fin = us[-1]
    u_avg = complex(np.vdot(psi, u_fin @ psi))
    if abs(u_avg) < eps_z:
        raise UndefinedGP("<U_S>_S vanishes; perturbative GP undefined")
    acc = 0.0 + 0.0j
    for p_r, blk in b_blocks:
        b_fin = blk[-1]
        term1 = np.vdot(psi, u_fin @ b_fin @ psi) / u_avg
        term2 = -0.5 * np.vdot(psi, (b_fin - b_fin.conj().T) @ psi)
        integrand = np.einsum(
            "i,kij,j->k",
            psi.conj(),
            np.conj(np.transpose(blk, (0, 2, 1))) @ dhs_tilde
            + dhs_tilde @ blk,
            psi,
        )
        term3 = 1j * np.trapezoid(integrand, dx=grid.dt)
        acc += p_r * (term1 + term2 + term3)
    return complex(acc)


def delta_z(
    ops: PerturbationOperators,
    model: WeakCouplingModel,
    grid: TimeGrid,
    eps_z: float = 1e-9,
) -> complex:
    """<DeltaZ> over rho_SR(0); requires the coupling condition to hold."""
    model.require_rcond()
    blocks = reservoir_blocks_of_b(ops, model.res, model.dim_s)
    return delta_z_from_blocks(blocks, ops.us, ops.dhs_tilde, model.psi_s, grid,
                               eps_z=eps_z)


def lindblad_identification(
    b_avg: np.ndarray,
    us: np.ndarray,
    grid: TimeGrid,
    node: int | None = None,
    psd_tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Split ``U_S <dB/dt>_R U_S^dag = -i dH - sum L^dag L`` at a grid node.

    ``b_avg`` holds the reservoir average <B(t)>_R as system-operator samples.
    Returns ``(delta_h, sum_ldag_l)``; a dissipative part that fails to be
    positive semidefinite (beyond ``psd_tol``) raises InconsistentModel.
    """
    if node is None:
        node = b_avg.shape[0] // 2
    b_dot = np.gradient(b_avg, grid.dt, axis=0, edge_order=2)
    m = us[node] @ b_dot[node] @ us[node].conj().T
    sum_ldag_l = -0.5 * (m + m.conj().T)
    delta_h = 0.5j * (m - m.conj().T)
    if np.linalg.eigvalsh(sum_ldag_l).min() < -psd_tol:
        raise InconsistentModel(
            "dissipative part of the identification is not positive"
        )
    return delta_h, sum_ldag_l


def perturbative_moments(dz: complex, beta0: float, n: int = 1) -> complex:
    """Moment prediction ``e^{in beta0} (1 + i n Im<DeltaZ>)``.

    Shared by both distribution measures at second order; warns outside the
    perturbative regime.
    """
    im = float(np.imag(dz))
    if abs(im) > IM_DZ_WARN:
        warnings.warn(
            f"Im<DeltaZ> = {im:.3g} exceeds the perturbative guard "
            f"({IM_DZ_WARN}); the expansion may be unreliable",
            stacklevel=2,
        )
    return complex(np.exp(1j * n * beta0) * (1.0 + 1j * n * im))
