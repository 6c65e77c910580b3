"""Closed-form two-level-atom models: thermal spontaneous emission and phase
damping.

Basis ordering is (|g>, |e|) with sigma_z = |e><e| - |g><g| = diag(-1, +1)
and H_S = -(omega/2) sigma_z, so the printed Kraus matrices and the
e^{+/- i omega t / 2} phases come out verbatim.  All closed forms are quoted
at one period t = 2*pi/omega unless a time is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, LindbladModel, ReservoirSpec
from .distribution import PhaseDistribution
from .hilbert import SIGMA_Z, Schedule, TimeGrid
from .phase import Trajectory, angle_to_positive_branch
from .weakcoupling import WeakCouplingModel

PROJ_G = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
PROJ_E = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


def hs_schedule(omega: float) -> Schedule:
    return Schedule.constant(-0.5 * omega * SIGMA_Z)


def psi_initial(theta: float) -> np.ndarray:
    """cos(theta/2)|e> + sin(theta/2)|g> in the (g, e) ordering."""
    return np.array([np.sin(theta / 2.0), np.cos(theta / 2.0)], dtype=complex)


def closed_system_gp(theta: float) -> float:
    """Closed-system GP after one precession period, unwrapped: 2 pi sin^2(theta/2)."""
    if not 0.0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    return 2.0 * np.pi * np.sin(theta / 2.0) ** 2


@dataclass(frozen=True)
class TwoLevelAtomParams:
    """Thermal two-level atom: splitting, emission rate, occupation, tilt."""

    omega: float
    gamma0: float
    n_thermal: float = 0.0
    theta: float = np.pi / 2.0

    def __post_init__(self):
        if self.omega <= 0 or self.gamma0 < 0 or self.n_thermal < 0:
            raise ValueError("need omega > 0, gamma0 >= 0, n >= 0")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    @property
    def gamma_n(self) -> float:
        return (2.0 * self.n_thermal + 1.0) * self.gamma0

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega


@dataclass(frozen=True)
class PhaseDampingParams:
    omega: float
    alpha: float
    theta: float = np.pi / 2.0

    def __post_init__(self):
        if self.omega <= 0 or self.alpha < 0:
            raise ValueError("need omega > 0, alpha >= 0")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def r_factor(self, t: float) -> float:
        """(1 + sqrt(1 - e^{-2 alpha t}))^{1/2}, in [1, sqrt(2)]."""
        return float(np.sqrt(1.0 + np.sqrt(1.0 - np.exp(-2.0 * self.alpha * t))))


# ---------------------------------------------------------------------------
# Spontaneous emission
# ---------------------------------------------------------------------------

def se_weights(p: TwoLevelAtomParams) -> np.ndarray:
    n = p.n_thermal
    return np.array([(n + 1), (n + 1), n, n]) / (2.0 * n + 1.0)


def se_kraus_channel(p: TwoLevelAtomParams) -> KrausChannel:
    """The four thermal spontaneous-emission Kraus operators.

    K0/K2 are the no-jump branches (decay on |e> resp. |g>), K1/K3 the
    photon-emission and -absorption jumps; completeness holds analytically.
    """
    w, gn = p.omega, p.gamma_n

    def k0(t):
        return np.diag([np.exp(-0.5j * w * t),
                        np.exp(0.5j * w * t - gn * t)]).astype(complex)

    def k1(t):
        amp = np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * gn * t)))
        out = np.zeros((2, 2), dtype=complex)
        out[0, 1] = amp          # |g><e|
        return out

    def k2(t):
        return np.diag([np.exp(-0.5j * w * t - gn * t),
                        np.exp(0.5j * w * t)]).astype(complex)

    def k3(t):
        amp = np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * gn * t)))
        out = np.zeros((2, 2), dtype=complex)
        out[1, 0] = amp          # |e><g|
        return out

    p0, p1, p2, p3 = se_weights(p)
    return KrausChannel(elements=[(p0, k0), (p1, k1), (p2, k2), (p3, k3)],
                        dim=2)


def se_lindblad_model(p: TwoLevelAtomParams) -> LindbladModel:
    """Jump operators sqrt(gamma0(n+1))|g><e| and sqrt(gamma0 n)|e><g|."""
    l1 = np.sqrt(p.gamma0 * (p.n_thermal + 1.0)) * np.array(
        [[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    l2 = np.sqrt(p.gamma0 * p.n_thermal) * np.array(
        [[0.0, 0.0], [1.0, 0.0]], dtype=complex)
    return LindbladModel(hs=hs_schedule(p.omega), jump_ops=[l1, l2])


def _sz_expectation(theta: float, a: float) -> float:
    """<psi_S| e^{a sigma_z} |psi_S> (real positive)."""
    s2 = np.sin(theta / 2.0) ** 2
    c2 = np.cos(theta / 2.0) ** 2
    return s2 * np.exp(-a) + c2 * np.exp(a)


def se_exact_z_values(p: TwoLevelAtomParams) -> tuple[complex, complex]:
    """Closed-form atom values (f_minus, f_plus) at t = 2 pi / omega.

    f_minus comes from the no-jump branch K0 (weight p0), f_plus from K2
    (weight p2):

        f_-/+ = -e^{-pi gn/w} <e^{-/+ pi gn sz / w}>_S
                 <e^{-/+ 2 pi gn sz / w}>_S ^ {+/- i w / (2 gn)}

    The power has a real positive base, so the principal real logarithm
    applies and no branch ambiguity arises.
    """
    if p.gamma0 == 0.0:
        z = -np.exp(-1j * np.pi * np.cos(p.theta))
        return z, z
    gn, w, th = p.gamma_n, p.omega, p.theta
    x = np.pi * gn / w
    base_m = _sz_expectation(th, -2.0 * x)
    base_p = _sz_expectation(th, 2.0 * x)
    f_minus = (-np.exp(-x) * _sz_expectation(th, -x)
               * np.exp(1j * (w / (2.0 * gn)) * np.log(base_m)))
    f_plus = (-np.exp(-x) * _sz_expectation(th, x)
              * np.exp(-1j * (w / (2.0 * gn)) * np.log(base_p)))
    return complex(f_minus), complex(f_plus)


def se_distributions(
    p: TwoLevelAtomParams,
) -> tuple[PhaseDistribution, PhaseDistribution]:
    """(P_Z, P_H) at one period; the jump branches K1, K3 start at the zero
    vector and are excluded, and the kept weights p0 + p2 already sum to 1."""
    f_minus, f_plus = se_exact_z_values(p)
    p0, _, p2, _ = se_weights(p)
    if p2 == 0.0:
        weights, values = np.array([1.0]), np.array([f_minus])
    else:
        weights = np.array([p0, p2])
        values = np.array([f_minus, f_plus])
    pz = PhaseDistribution(kind="z", weights=weights, values=values)
    return pz, pz.to_h()


def se_mean_gp_zero_temperature(p: TwoLevelAtomParams) -> float:
    """pi + (w / 2 gamma0) ln <e^{-2 pi gamma0 sigma_z / w}>_S, unwrapped."""
    if p.gamma0 == 0.0:
        return closed_system_gp(p.theta)
    a = 2.0 * np.pi * p.gamma0 / p.omega
    return float(np.pi + (p.omega / (2.0 * p.gamma0))
                 * np.log(_sz_expectation(p.theta, -a)))


def se_perturbative_gp(p: TwoLevelAtomParams) -> float:
    """First-order weak-coupling GP: beta0 + pi^2 (gamma0/omega) sin^2 theta."""
    return closed_system_gp(p.theta) + (np.pi**2 * p.gamma0 / p.omega
                                        * np.sin(p.theta) ** 2)


def se_no_jump_trajectory(p: TwoLevelAtomParams, grid: TimeGrid) -> Trajectory:
    """Non-unitary trajectory K0(t)|psi_S> under the effective no-jump decay."""
    w, gn = p.omega, p.gamma_n
    psi = psi_initial(p.theta)

    def k0(t):
        return np.diag([np.exp(-0.5j * w * t),
                        np.exp(0.5j * w * t - gn * t)])

    states = np.array([k0(t) @ psi for t in grid.times])
    return Trajectory(grid=grid, states=states)


def se_effective_b_blocks(p: TwoLevelAtomParams, grid: TimeGrid) -> np.ndarray:
    """Reservoir-averaged perturbation operator <B(t)>_R = -gamma0 (|e><e| + n) t.

    The n-dependence is proportional to the identity, which is why thermal
    fluctuations cancel in the mean GP.
    """
    b0 = -p.gamma0 * (PROJ_E + p.n_thermal * np.eye(2))
    return np.array([b0 * t for t in grid.times])


def se_weak_coupling_model(
    p: TwoLevelAtomParams, dim_bath: int = 4, g: float = 0.1,
    bath_omega: float | None = None,
) -> WeakCouplingModel:
    """Microscopic energy-transferring coupling used for the rcond check.

    One bath oscillator truncated to ``dim_bath`` levels, vacuum state,
    coupling R = a + a^dag (off-diagonal, so <r|R|r> = 0 for every Fock
    state) against S = |g><e| + |e><g|.
    """
    if bath_omega is None:
        bath_omega = p.omega
    a_op = np.diag(np.sqrt(np.arange(1, dim_bath)), k=1).astype(complex)
    r_op = a_op + a_op.conj().T
    s_op = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    probs = np.zeros(dim_bath)
    probs[0] = 1.0
    res = ReservoirSpec(probs=probs, states=np.eye(dim_bath, dtype=complex),
                        energies=bath_omega * np.arange(dim_bath))
    return WeakCouplingModel(
        hs=hs_schedule(p.omega), hr=np.diag(bath_omega * np.arange(dim_bath)),
        couplings=[(g * r_op, s_op)], res=res, psi_s=psi_initial(p.theta),
    )


# ---------------------------------------------------------------------------
# Phase damping
# ---------------------------------------------------------------------------

def pd_kraus_channel(p: PhaseDampingParams) -> KrausChannel:
    """Two-element phase-damping channel with weights 1/2, 1/2.

    Both operators reduce to phase-free unitaries at t = 0, so both branches
    contribute GP atoms.
    """
    w, al = p.omega, p.alpha

    def k0(t):
        r = p.r_factor(t)
        return np.diag([np.exp(-0.5j * w * t - al * t) / r,
                        r * np.exp(0.5j * w * t)]).astype(complex)

    def k1(t):
        r = p.r_factor(t)
        return np.diag([r * np.exp(-0.5j * w * t),
                        np.exp(0.5j * w * t - al * t) / r]).astype(complex)

    return KrausChannel(elements=[(0.5, k0), (0.5, k1)], dim=2)


def pd_lindblad_model(p: PhaseDampingParams) -> LindbladModel:
    """Master-equation twin of the phase-damping channel.

    In the no-1/2 Lindblad convention a jump operator c*sigma_z decoheres at
    rate 4c^2, while the channel above decoheres at exp(-alpha t); the
    consistent jump operator is therefore (sqrt(alpha)/2) sigma_z.
    """
    l1 = 0.5 * np.sqrt(p.alpha) * SIGMA_Z
    return LindbladModel(hs=hs_schedule(p.omega), jump_ops=[l1])


def pd_trajectories(
    p: PhaseDampingParams, grid: TimeGrid
) -> list[tuple[float, Trajectory]]:
    """The two equally weighted conditional trajectories K_i(t)|psi_S>."""
    psi = psi_initial(p.theta)
    channel = pd_kraus_channel(p)
    out = []
    for weight, k in channel.elements:
        states = np.array([k(t) @ psi for t in grid.times])
        out.append((weight, Trajectory(grid=grid, states=states)))
    return out


@dataclass(frozen=True)
class PhaseDampingMoments:
    """Exact two-atom first moments plus the first-order reference values."""

    mean_gp_z: complex        # <z>_Z / |<z>_Z|, exact
    mean_gp_h: complex        # <e^{is}>_H, exact
    spread_w: float           # exact
    ref_mean_gp_z: complex    # e^{i b0} (1 + (2 i pi^2 a/3w) cos sin^2)
    ref_mean_gp_h: complex    # e^{i b0} (1 + (2 pi^2 a/w) sin^2 (i cos - 4/9 sin^2))
    ref_spread_w: float       # 16 pi^2 sin^4(theta) a / (9 w)


def pd_first_order_references(p: PhaseDampingParams) -> tuple[complex, complex, float]:
    b0 = closed_system_gp(p.theta)
    x = p.alpha / p.omega
    s2 = np.sin(p.theta) ** 2
    c = np.cos(p.theta)
    ref_z = np.exp(1j * b0) * (1.0 + (2j * np.pi**2 * x / 3.0) * c * s2)
    ref_h = np.exp(1j * b0) * (
        1.0 + 2.0 * np.pi**2 * x * s2 * (1j * c - (4.0 / 9.0) * s2))
    ref_w = 16.0 * np.pi**2 * s2**2 * x / 9.0
    return complex(ref_z), complex(ref_h), float(ref_w)


def pd_moments(p: PhaseDampingParams, n_steps: int = 4096) -> PhaseDampingMoments:
    """Exact two-atom moments at one period, next to the first-order forms."""
    from .distribution import build_distribution, moments as dist_moments

    grid = TimeGrid(0.0, p.period, n_steps)
    dist = build_distribution(pd_trajectories(p, grid), kind="z")
    rep = dist_moments(dist, n_max=1)
    first_z = rep.z_moments[0]
    ref_z, ref_h, ref_w = pd_first_order_references(p)
    return PhaseDampingMoments(
        mean_gp_z=complex(first_z / abs(first_z)),
        mean_gp_h=rep.mean_gp_h,
        spread_w=rep.spread_w,
        ref_mean_gp_z=ref_z,
        ref_mean_gp_h=ref_h,
        ref_spread_w=ref_w,
    )


def pd_weak_coupling_model(
    p: PhaseDampingParams, dim_bath: int = 4, g: float = 0.1,
    n_thermal: float = 0.5, bath_omega: float = 3.0,
) -> WeakCouplingModel:
    """Thermal oscillator-bath dephasing coupling R = g a^dag a, S = sigma_z.

    In thermal equilibrium <r|R|r> = g n_r != 0 for excited Fock states, so
    the coupling condition fails and the perturbative GP formula must refuse
    to run (RCondViolated).
    """
    ns = np.arange(dim_bath)
    boltz = np.exp(-ns * np.log(1.0 + 1.0 / n_thermal)) if n_thermal > 0 else \
        np.where(ns == 0, 1.0, 0.0)
    probs = boltz / boltz.sum()
    res = ReservoirSpec(probs=probs, states=np.eye(dim_bath, dtype=complex),
                        energies=bath_omega * ns)
    r_op = g * np.diag(ns).astype(complex)
    return WeakCouplingModel(
        hs=hs_schedule(p.omega), hr=np.diag(bath_omega * ns).astype(complex),
        couplings=[(r_op, SIGMA_Z)], res=res, psi_s=psi_initial(p.theta),
    )
