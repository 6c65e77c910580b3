"""Atomic geometric-phase distributions and their moments.

Two candidate distributions are supported:

* Z-valued: atoms at the complex values Z[psi_{r,s}] weighted by the initial
  probabilities p_r * q_s; the mean GP is the argument of the first moment.
* H-valued (Holevo-style): atoms at the unit-modulus phases Z/|Z|; the
  modulus of the first moment sets the spread W = |<e^{i beta}>|^{-2} - 1.

Atoms are exact weighted delta functions (no binning); coincident atoms are
not merged unless asked for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ENERGY_DEGENERACY_TOL, ReservoirSpec
from .errors import InvalidBlock, InvalidDecomposition, UndefinedGP
from .hilbert import partial_inner
from .phase import Trajectory, z_functional

WEIGHT_TOL = 1e-10
# |<e^{is}>|^2 is <= 1 up to rounding; spreads below this floor are reported
# as exactly zero so that sharp distributions come out sharp.
SPREAD_NOISE_FLOOR = 1e-14


@dataclass(frozen=True)
class PhaseDistribution:
    """Weighted atom list; ``kind`` is "z" (complex values) or "h" (phases)."""

    kind: str
    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "values", values)
        if self.kind not in ("z", "h"):
            raise ValueError("kind must be 'z' or 'h'")
        if len(weights) == 0 or len(weights) != len(values):
            raise ValueError("need one weight per atom, at least one atom")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.kind == "h" and np.any(np.abs(np.abs(values) - 1.0) > 1e-12):
            raise ValueError("h-valued atoms must lie on the unit circle")

    def to_h(self) -> "PhaseDistribution":
        """Project Z-valued atoms onto the unit circle."""
        if self.kind == "h":
            return self
        mod = np.abs(self.values)
        if np.any(mod < 1e-300):
            raise UndefinedGP("zero atom cannot be projected onto the circle")
        v = self.values / mod
        return PhaseDistribution(kind="h", weights=self.weights, values=v / np.abs(v))


@dataclass(frozen=True)
class MomentReport:
    mean_gp_z: float          # arg <z>_Z, radians, principal branch
    mean_gp_h: complex        # <e^{is}>_H (phase AND modulus are meaningful)
    spread_w: float           # |<e^{is}>|^{-2} - 1, dimensionless
    z_moments: np.ndarray     # <z^n> for n = 1..n_max
    h_moments: np.ndarray     # <e^{ins}> for n = 1..n_max

    @property
    def mean_gp_h_angle(self) -> float:
        return float(np.angle(self.mean_gp_h))


def build_distribution(
    weighted_trajs: list[tuple[float, Trajectory]],
    kind: str = "z",
    eps_z: float | None = None,
) -> PhaseDistribution:
    """One atom per trajectory, valued Z[psi] ("z") or Z/|Z| ("h").

    A trajectory with undefined GP contributes a legal zero atom to a
    Z-valued build but aborts an H-valued build, which needs every phase.
    """
    weights, values = [], []
    kwargs = {} if eps_z is None else {"eps_z": eps_z}
    for w, traj in weighted_trajs:
        try:
            z = z_functional(traj, **kwargs).z
        except UndefinedGP:
            if kind == "h":
                raise
            z = 0.0
        weights.append(w)
        values.append(z)
    dist = PhaseDistribution(kind="z", weights=np.array(weights),
                             values=np.array(values))
    return dist.to_h() if kind == "h" else dist


def moments(dist: PhaseDistribution, n_max: int = 2,
            eps_z: float = 1e-12) -> MomentReport:
    """First ``n_max`` moments of both measures plus mean GP and spread.

    For a Z-valued input the H-side quantities are computed from the
    projected atoms; a Z-valued first moment below ``eps_z`` raises
    UndefinedGP.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    ns = np.arange(1, n_max + 1)
    z_moms = np.array([np.sum(dist.weights * dist.values**n) for n in ns])
    h = dist.to_h()
    h_moms = np.array([np.sum(h.weights * h.values**n) for n in ns])

    first_z = z_moms[0]
    if abs(first_z) < eps_z:
        raise UndefinedGP("first Z-moment vanishes; mean GP undefined")
    first_h = h_moms[0]
    coherence = first_h.real**2 + first_h.imag**2
    spread = 1.0 / coherence - 1.0
    if abs(spread) < SPREAD_NOISE_FLOOR:
        spread = 0.0
    return MomentReport(
        mean_gp_z=float(np.angle(first_z)),
        mean_gp_h=complex(first_h),
        spread_w=spread,
        z_moments=z_moms,
        h_moments=h_moms,
    )


def merge_atoms(dist: PhaseDistribution, tol: float = 1e-12) -> PhaseDistribution:
    """Merge atoms whose values coincide within ``tol`` (weights add)."""
    vals: list[complex] = []
    wts: list[float] = []
    for w, v in zip(dist.weights, dist.values):
        for i, u in enumerate(vals):
            if abs(v - u) <= tol:
                wts[i] += w
                break
        else:
            vals.append(complex(v))
            wts.append(float(w))
    return PhaseDistribution(kind=dist.kind, weights=np.array(wts),
                             values=np.array(vals))


def block_first_moment(
    u_joint: np.ndarray,
    res: ReservoirSpec,
    psi_s: np.ndarray,
    block: list[int],
    d_e: complex = 1.0,
    energy_tol: float = ENERGY_DEGENERACY_TOL,
) -> complex:
    """Contribution of one degenerate block to the first Z-moment.

    Returns ``D(E) * sum_{r in block} p_r <psi_S|<r|U|r>|psi_S>``, which is a
    trace over the block density matrix and therefore independent of how the
    block is decomposed into pure states.  ``d_e`` is the common
    dynamic-phase factor of the block (1 for parallel-transported states).
    """
    psi_s = np.asarray(psi_s, dtype=complex)
    dim_s = len(psi_s)
    dim_r = res.dim
    e0 = res.energies[block[0]]
    for i in block[1:]:
        if abs(res.energies[i] - e0) >= energy_tol * max(1.0, abs(e0)):
            raise InvalidBlock("block mixes distinct energies")
    acc = 0.0 + 0.0j
    for i in block:
        k = partial_inner(res.states[i], u_joint, res.states[i], dim_s, dim_r)
        acc += res.probs[i] * np.vdot(psi_s, k @ psi_s)
    return complex(d_e * acc)


def redecompose(
    res: ReservoirSpec,
    block_unitaries: dict[int, np.ndarray],
    energy_tol: float = ENERGY_DEGENERACY_TOL,
) -> ReservoirSpec:
    """Alternative pure-state decomposition of the same reservoir density.

    ``block_unitaries`` maps a block index (position in ``res.blocks()``) to
    a unitary V of the block size; the new unnormalized members are
    ``u_j = sum_i V[j, i] sqrt(p_i) |r_i>`` (square-root decomposition
    freedom), so every block density matrix is preserved exactly.
    """
    blocks = res.blocks(energy_tol)
    probs = res.probs.copy()
    states = res.states.copy()
    energies = res.energies.copy()
    for bi, v in block_unitaries.items():
        blk = blocks[bi]
        v = np.asarray(v, dtype=complex)
        k = len(blk)
        if v.shape != (k, k):
            raise InvalidDecomposition(
                f"block {bi} has size {k}, unitary has shape {v.shape}"
            )
        if np.linalg.norm(v.conj().T @ v - np.eye(k)) > 1e-10:
            raise InvalidDecomposition("block transformation is not unitary")
        sq = np.sqrt(probs[blk])[:, None] * states[blk]   # rows sqrt(p_i)|r_i>
        new = v @ sq
        new_p = np.einsum("ji,ji->j", new.conj(), new).real
        if np.any(new_p < 1e-300):
            raise InvalidDecomposition("degenerate member with zero weight")
        probs[blk] = new_p
        states[blk] = new / np.sqrt(new_p)[:, None]
    out = ReservoirSpec(probs=probs, states=states, energies=energies,
                        orthonormal=False)
    for bi in block_unitaries:
        if np.linalg.norm(out.block_density(blocks[bi])
                          - res.block_density(blocks[bi])) > 1e-12:
            raise InvalidDecomposition("block density matrix changed")
    return out
