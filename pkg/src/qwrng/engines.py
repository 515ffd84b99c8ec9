"""
Evolution engines for the standard, split-step and directed walks.

Pure states are advanced by direct amplitude updates on the dense window.
Mixed states are advanced by an explicitly assembled sparse walk operator
acting on the full density matrix, followed by the coin bit-flip channel.
The two paths share no stepping code, so agreement at zero noise is a real
cross-check.
"""

from __future__ import annotations

import dataclasses
import enum
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from qwrng.core import InitialState, WalkerState, coin_matrix, make_initial_state

__all__ = [
    "DEFAULT_DENSITY_CAP",
    "DensityOperator",
    "Family",
    "WalkSpec",
    "apply_bitflip_channel",
    "density_cap",
    "directed_coin",
    "evolve",
    "evolve_density",
    "iter_density",
    "iter_states",
    "step",
    "step_dqw",
    "step_dtqw",
    "step_ssqw",
    "walk_operator",
    "walk_window",
]

DEFAULT_DENSITY_CAP = 200


class Family(str, enum.Enum):
    STANDARD = "standard"
    SPLIT_STEP = "split-step"
    DIRECTED = "directed"


@dataclass(frozen=True)
class WalkSpec:
    """Everything needed to reproduce one walk run."""

    family: Family = Family.STANDARD
    theta: float = np.pi / 4
    theta1: float = np.pi / 4
    theta2: float = np.pi / 4
    loop_count_n: int = 2
    init: InitialState = field(default_factory=InitialState)
    steps: int = 0
    noise_p: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps}")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError(f"noise_p must lie in [0, 1], got {self.noise_p}")
        if int(self.loop_count_n) != self.loop_count_n or self.loop_count_n < 2:
            raise ValueError(f"loop_count_n must be an integer >= 2, got {self.loop_count_n}")

    def replace(self, **changes) -> "WalkSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "theta": self.theta,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "loop_count_n": self.loop_count_n,
            "delta": self.init.delta,
            "eta": self.init.eta,
            "steps": self.steps,
            "noise_p": self.noise_p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WalkSpec":
        d = dict(d)
        init = InitialState(d.pop("delta", 0.0), d.pop("eta", 0.0))
        return cls(init=init, **d)


# ---------------------------------------------------------------------------
# Pure-state steps
# ---------------------------------------------------------------------------

def _coin_rows(amps: NDArray[np.complex128], coin: NDArray[np.complex128]):
    # each row is a coin vector; apply coin to all of them at once
    return amps @ coin.T


def step_dtqw(state: WalkerState, theta: float) -> WalkerState:
    """Coin, then shift: up moves to x-1, down moves to x+1."""
    coined = _coin_rows(state.amps, coin_matrix(theta))
    n = len(coined)
    out = np.zeros((n + 2, 2), dtype=np.complex128)
    out[0:n, 0] = coined[:, 0]
    out[2:n + 2, 1] = coined[:, 1]
    return WalkerState(state.offset_min - 1, out, state.t + 1)


def step_ssqw(state: WalkerState, theta1: float, theta2: float) -> WalkerState:
    """
    One split-step: S+ (down moves right), coin(theta1), S- (up moves left),
    coin(theta2), applied in that order.
    """
    n = len(state.amps)
    a = np.zeros((n + 2, 2), dtype=np.complex128)
    # window [off-1, off+n]; original site x sits at index x - off + 1
    a[1:n + 1, 0] = state.amps[:, 0]
    a[2:n + 2, 1] = state.amps[:, 1]
    a = _coin_rows(a, coin_matrix(theta1))
    b = np.zeros_like(a)
    b[0:n + 1, 0] = a[1:n + 2, 0]
    b[:, 1] = a[:, 1]
    b = _coin_rows(b, coin_matrix(theta2))
    return WalkerState(state.offset_min - 1, b, state.t + 1)


def directed_coin(n: int) -> NDArray[np.complex128]:
    """Real reflection coin ``[[a, b], [b, -a]]`` with a=1/sqrt(n), b=sqrt((n-1)/n)."""
    alpha = 1.0 / np.sqrt(n)
    beta = np.sqrt((n - 1) / n)
    return np.array([[alpha, beta], [beta, -alpha]], dtype=np.complex128)


def step_dqw(state: WalkerState, n: int) -> WalkerState:
    """
    One directed-walk step on the non-negative half line.

    Column 0 is the forward edge, column 1 the aggregated self-loop sector.
    Forward amplitude advances by one site, loop amplitude stays put.
    """
    if state.offset_min < 0:
        lead = -state.offset_min
        if np.any(state.amps[:lead] != 0):
            raise ValueError("directed walk state has support on negative positions")
    coined = _coin_rows(state.amps, directed_coin(n))
    m = len(coined)
    out = np.zeros((m + 1, 2), dtype=np.complex128)
    out[1:m + 1, 0] = coined[:, 0]
    out[0:m, 1] = coined[:, 1]
    return WalkerState(state.offset_min, out, state.t + 1)


def step(state: WalkerState, spec: WalkSpec) -> WalkerState:
    if spec.family is Family.STANDARD:
        return step_dtqw(state, spec.theta)
    if spec.family is Family.SPLIT_STEP:
        return step_ssqw(state, spec.theta1, spec.theta2)
    return step_dqw(state, spec.loop_count_n)


def iter_states(spec: WalkSpec) -> Iterator[WalkerState]:
    """Yield the pure state at t = 0, 1, ..., spec.steps."""
    state = make_initial_state(spec.init)
    yield state
    for _ in range(spec.steps):
        state = step(state, spec)
        yield state


def evolve(spec: WalkSpec) -> WalkerState:
    if spec.noise_p > 0:
        raise ValueError("evolve() is the noiseless path; use evolve_density() for noise_p > 0")
    state = make_initial_state(spec.init)
    for _ in range(spec.steps):
        state = step(state, spec)
    return state


# ---------------------------------------------------------------------------
# Density-operator path
# ---------------------------------------------------------------------------

@dataclass
class DensityOperator:
    """Density matrix over ``coin (x) position`` on a fixed position window.

    Basis index of ``(c, x)`` is ``c * n_positions + (x - offset_min)``.
    """

    offset_min: int
    n_positions: int
    matrix: NDArray[np.complex128]
    t: int = 0

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        d = 2 * self.n_positions
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix must be {d}x{d}, got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return 2 * self.n_positions

    @classmethod
    def from_state(cls, state: WalkerState, offset_min: int | None = None,
                   n_positions: int | None = None) -> "DensityOperator":
        if offset_min is None:
            offset_min, n_positions = state.offset_min, len(state.amps)
        psi = state.ket(offset_min, n_positions)
        return cls(offset_min, n_positions, np.outer(psi, psi.conj()), state.t)

    def blocks(self) -> NDArray[np.complex128]:
        """View as a ``(2, L, 2, L)`` tensor indexed ``[c, x, c', x']``."""
        L = self.n_positions
        return self.matrix.reshape(2, L, 2, L)

    def check(self, tol: float = 1e-12, eig_tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian, unit-trace and PSD within tolerance."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise ValueError(f"density matrix trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -eig_tol:
            raise ValueError("density matrix has a negative eigenvalue")


def walk_window(spec: WalkSpec) -> tuple[int, int]:
    """Position window ``(offset_min, n_positions)`` covering all ``spec.steps`` steps."""
    t = spec.steps
    if spec.family is Family.DIRECTED:
        return 0, t + 1
    return -t, 2 * t + 1


def _shift(L: int, move_up: int, move_down: int) -> sp.csr_matrix:
    # periodic on the window; the walk never reaches the seam within spec.steps
    idx = np.arange(L)
    mats = []
    for move in (move_up, move_down):
        mats.append(sp.csr_matrix(
            (np.ones(L), ((idx + move) % L, idx)), shape=(L, L), dtype=np.complex128))
    return sp.block_diag(mats, format="csr")


def walk_operator(spec: WalkSpec, n_positions: int) -> sp.csr_matrix:
    """Sparse one-step unitary on ``coin (x) position`` for a window of ``n_positions``."""
    eye = sp.identity(n_positions, dtype=np.complex128, format="csr")
    if spec.family is Family.STANDARD:
        shift = _shift(n_positions, -1, +1)
        return (shift @ sp.kron(coin_matrix(spec.theta), eye)).tocsr()
    if spec.family is Family.SPLIT_STEP:
        s_plus = _shift(n_positions, 0, +1)
        s_minus = _shift(n_positions, -1, 0)
        c1 = sp.kron(coin_matrix(spec.theta1), eye)
        c2 = sp.kron(coin_matrix(spec.theta2), eye)
        return (c2 @ s_minus @ c1 @ s_plus).tocsr()
    shift = _shift(n_positions, +1, 0)
    return (shift @ sp.kron(directed_coin(spec.loop_count_n), eye)).tocsr()


def apply_bitflip_channel(rho: DensityOperator, p: float) -> DensityOperator:
    """``rho -> p X rho X + (1 - p) rho`` with ``X = sigma_x (x) 1`` on the coin."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"bit-flip probability must lie in [0, 1], got {p}")
    if p == 0.0:
        return DensityOperator(rho.offset_min, rho.n_positions, rho.matrix.copy(), rho.t)
    b = rho.blocks()
    flipped = b[::-1, :, ::-1, :]
    mixed = (p * flipped + (1.0 - p) * b).reshape(rho.dim, rho.dim)
    return DensityOperator(rho.offset_min, rho.n_positions, mixed, rho.t)


def density_cap() -> int:
    """Maximum step count for density evolution; ``QWALK_DENSITY_CAP`` overrides."""
    raw = os.environ.get("QWALK_DENSITY_CAP")
    if raw is None:
        return DEFAULT_DENSITY_CAP
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"QWALK_DENSITY_CAP must be an integer, got {raw!r}") from None


def iter_density(spec: WalkSpec, cap: int | None = None) -> Iterator[DensityOperator]:
    """
    Yield the density operator at t = 0, 1, ..., spec.steps.

    Every yielded operator lives on the final window so all share a dimension.
    Each step is the unitary followed by the bit-flip channel with ``spec.noise_p``.
    """
    cap = density_cap() if cap is None else cap
    if spec.steps > cap:
        raise ValueError(f"density evolution limited to {cap} steps, got {spec.steps}")
    offset_min, L = walk_window(spec)
    W = walk_operator(spec, L)
    rho = DensityOperator.from_state(make_initial_state(spec.init), offset_min, L)
    yield rho
    for t in range(1, spec.steps + 1):
        # W (W rho)^dag = W rho W^dag for Hermitian rho
        m = W @ (W @ rho.matrix).conj().T
        m = 0.5 * (m + m.conj().T)
        rho = apply_bitflip_channel(DensityOperator(offset_min, L, m, t), spec.noise_p)
        yield rho


def evolve_density(spec: WalkSpec, cap: int | None = None) -> DensityOperator:
    rho = None
    for rho in iter_density(spec, cap):
        pass
    return rho
