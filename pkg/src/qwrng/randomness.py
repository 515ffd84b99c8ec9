"""
Intrinsic randomness of coin, position and joint measurements.

All Shannon-type quantities are in nats. Min-entropy is in bits so that the
guessing probability is exactly ``2 ** -h_min_bits``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qwrng.core import WalkerState
from qwrng.engines import DensityOperator

__all__ = [
    "PositionDistribution",
    "RandomnessReport",
    "analytic_step1_probabilities",
    "analytic_step1_randomness",
    "analytic_step2_randomness",
    "coin_distribution",
    "intrinsic_randomness",
    "joint_distribution",
    "joint_randomness",
    "min_entropy",
    "position_distribution",
    "quantum_randomness",
    "randomness_report",
    "von_neumann_entropy",
]

State = Union[WalkerState, DensityOperator]

SUM_TOL = 1e-10
NEG_PROB_TOL = 1e-14
# eigenvalues in [-EIG_NEG_TOL, EIG_SNAP] are numerical zeros; above 1 - EIG_SNAP, numerical ones
EIG_NEG_TOL = 1e-10
EIG_SNAP = 1e-12


@dataclass(frozen=True)
class PositionDistribution:
    offset_min: int
    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _validate(self.probs))

    @property
    def positions(self) -> NDArray[np.int64]:
        return np.arange(self.offset_min, self.offset_min + len(self.probs))

    def prob(self, x: int) -> float:
        i = x - self.offset_min
        return float(self.probs[i]) if 0 <= i < len(self.probs) else 0.0

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    @classmethod
    def point_mass(cls, x: int) -> "PositionDistribution":
        return cls(x, np.array([1.0]))


def _validate(probs: ArrayLike) -> NDArray[np.float64]:
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty distribution")
    if not np.all(np.isfinite(p)):
        raise ValueError("distribution contains NaN or Inf")
    if p.min() < -NEG_PROB_TOL:
        raise ValueError(f"negative probability {p.min()!r}")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    # remove rounding drift so that e.g. a single outcome has probability exactly 1
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _entropy(p: NDArray[np.float64]) -> float:
    nz = p[(p > 0) & (p < 1)]
    if nz.size == 0:
        return 0.0
    return float(-np.sum(nz * np.log(nz)))


def intrinsic_randomness(dist: ArrayLike | PositionDistribution) -> float:
    """Shannon entropy ``-sum p ln p`` in nats, with ``0 ln 0 = 0``."""
    if isinstance(dist, PositionDistribution):
        return _entropy(dist.probs)
    return _entropy(_validate(dist))


def joint_distribution(state: State) -> tuple[int, NDArray[np.float64]]:
    """
    Outcome probabilities for a joint (position, coin) detection.

    Returns ``(offset_min, probs)`` with ``probs`` of shape ``(n_positions, 2)``.
    """
    if isinstance(state, WalkerState):
        return state.offset_min, np.abs(state.amps) ** 2
    L = state.n_positions
    diag = np.real(np.diag(state.matrix)).reshape(2, L).T
    return state.offset_min, np.clip(diag, 0.0, None)


def coin_distribution(state: State) -> tuple[float, float]:
    """``(P_up, P_down)`` after tracing out the position."""
    _, joint = joint_distribution(state)
    up, down = joint.sum(axis=0)
    return float(up), float(down)


def position_distribution(state: State) -> PositionDistribution:
    offset, joint = joint_distribution(state)
    return PositionDistribution(offset, joint.sum(axis=1))


def joint_randomness(state: State) -> float:
    _, joint = joint_distribution(state)
    return intrinsic_randomness(joint.ravel())


def von_neumann_entropy(rho: DensityOperator | NDArray[np.complex128]) -> float:
    """
    ``-tr(rho ln rho)`` in nats.

    Eigenvalues within ``EIG_SNAP`` of 0 or 1 are treated as exactly 0 or 1,
    so a pure state gives exactly 0. Anything below ``-EIG_NEG_TOL`` means the
    operator is not a state and raises ``ValueError``.
    """
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    ev = np.linalg.eigvalsh(m)
    if ev.min() < -EIG_NEG_TOL:
        raise ValueError(f"density matrix has eigenvalue {ev.min()!r} < -{EIG_NEG_TOL}")
    ev = ev[(ev > EIG_SNAP) & (ev < 1.0 - EIG_SNAP)]
    if ev.size == 0:
        return 0.0
    return float(-np.sum(ev * np.log(ev)))


def quantum_randomness(r: float, e: float) -> float:
    """Measurement randomness minus noise entropy; negative values are returned as-is."""
    return r - e


def min_entropy(dist: ArrayLike | PositionDistribution) -> tuple[float, float]:
    """``(h_min_bits, p_guess)`` for a trusted device with an uncorrelated adversary."""
    p = dist.probs if isinstance(dist, PositionDistribution) else _validate(dist)
    p_guess = float(p.max())
    return float(-np.log2(p_guess)), p_guess


@dataclass(frozen=True)
class RandomnessReport:
    r_coin: float
    r_pos: float
    r_joint: float
    e_vn: float
    qr: float
    qr_target: str
    h_min_bits: float
    p_guess: float
    flags: tuple[str, ...] = field(default=())


def randomness_report(state: State, target: str = "joint", noise_p: float = 0.0) -> RandomnessReport:
    """
    Collect every randomness measure for one state.

    ``target`` picks which measurement ("coin", "position" or "joint") the
    quantum-origin randomness and min-entropy refer to. A pure ``WalkerState``
    has zero von Neumann entropy by construction.
    """
    r_coin = intrinsic_randomness(coin_distribution(state))
    pos = position_distribution(state)
    r_pos = intrinsic_randomness(pos)
    r_joint = joint_randomness(state)
    e = 0.0 if isinstance(state, WalkerState) else von_neumann_entropy(state)

    if target == "coin":
        r, dist = r_coin, np.array(coin_distribution(state))
    elif target == "position":
        r, dist = r_pos, pos.probs
    elif target == "joint":
        r, dist = r_joint, joint_distribution(state)[1].ravel()
    else:
        raise ValueError(f"unknown target {target!r}")
    h_min, p_guess = min_entropy(dist)

    flags = []
    if noise_p == 0.0 and e > 0.0:
        flags.append("impure-without-noise")
    qr = quantum_randomness(r, e)
    if qr < 0:
        flags.append("negative-qr")
    return RandomnessReport(r_coin, r_pos, r_joint, e, qr, target, h_min, p_guess, tuple(flags))


# ---------------------------------------------------------------------------
# Closed forms for the first two standard-walk steps from |psi_in> at x=0
# ---------------------------------------------------------------------------

def _h(*ps: float) -> float:
    return _entropy(_validate(ps))


def analytic_step1_probabilities(delta: float, eta: float, theta: float) -> tuple[float, float]:
    """``(P_up, P_down)`` after one step; these are also P(x=-1), P(x=+1)."""
    st, ct = np.sin(theta), np.cos(theta)
    sd, cd = np.sin(delta), np.cos(delta)
    cross = 2 * st * ct * sd * cd
    p_up = (ct * cd + st * sd) ** 2 - cross * (1 - np.sin(eta))
    p_down = (ct * sd + st * cd) ** 2 - cross * (1 + np.sin(eta))
    return float(p_up), float(p_down)


def analytic_step1_randomness(delta: float, eta: float, theta: float) -> tuple[float, float]:
    p_up, p_down = analytic_step1_probabilities(delta, eta, theta)
    r = _h(p_up, p_down)
    return r, r


def analytic_step2_randomness(delta: float, eta: float, theta: float) -> tuple[float, float]:
    """
    Returns ``(r_coin, r_pos)`` after two steps.

    Coin diagonal:
        P_up   = cos^4 t cos^2 d + sin(eta) sin 2t cos 2t sin d cos d
                 + 2 sin^2 t cos^2 t sin^2 d + sin^4 t cos^2 d
        P_down = 1 - P_up (written out symmetrically below)
    Position diagonal at x = -2, 0, +2:
        cos^4 t cos^2 d + sin^2 t cos^2 t sin^2 d + 2 sin(eta) sin t cos^3 t sin d cos d,
        sin^2 t,
        cos^4 t sin^2 d + sin^2 t cos^2 t cos^2 d - 2 sin(eta) sin t cos^3 t sin d cos d.
    """
    st, ct = np.sin(theta), np.cos(theta)
    sd, cd = np.sin(delta), np.cos(delta)
    se = np.sin(eta)
    mix = se * np.sin(2 * theta) * np.cos(2 * theta) * sd * cd
    c_up = ct**4 * cd**2 + mix + 2 * st**2 * ct**2 * sd**2 + st**4 * cd**2
    c_down = ct**4 * sd**2 - mix + 2 * st**2 * ct**2 * cd**2 + st**4 * sd**2

    skew = 2 * se * st * ct**3 * sd * cd
    x_left = ct**4 * cd**2 + st**2 * ct**2 * sd**2 + skew
    x_mid = st**2
    x_right = ct**4 * sd**2 + st**2 * ct**2 * cd**2 - skew
    return _h(c_up, c_down), _h(x_left, x_mid, x_right)
