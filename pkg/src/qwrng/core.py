"""
Walker state, coin operator and initial-state construction.

States are stored densely over the reachable window of lattice sites. The
amplitude array has shape ``(n_positions, 2)``: column 0 holds the spin-up
(or forward, for the directed walk) amplitude, column 1 the spin-down (or
loop) amplitude. Row ``i`` corresponds to lattice position
``offset_min + i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "InitialState",
    "WalkerState",
    "coin_matrix",
    "make_initial_state",
    "norm",
]

UP, DOWN = 0, 1


@dataclass(frozen=True)
class InitialState:
    """Coin state ``cos(delta)|up> + exp(i*eta) sin(delta)|down>`` at x=0.

    Angles are not reduced modulo 2*pi; ``delta`` has period pi up to a
    global phase and ``eta`` has period 2*pi.
    """

    delta: float = 0.0
    eta: float = 0.0


@dataclass
class WalkerState:
    """Pure walker state over a contiguous window of lattice positions."""

    offset_min: int
    amps: NDArray[np.complex128]
    t: int = 0

    def __post_init__(self) -> None:
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.ndim != 2 or self.amps.shape[1] != 2:
            raise ValueError(f"amps must have shape (n, 2), got {self.amps.shape}")

    @property
    def positions(self) -> NDArray[np.int64]:
        return np.arange(self.offset_min, self.offset_min + len(self.amps))

    @property
    def offset_max(self) -> int:
        return self.offset_min + len(self.amps) - 1

    def amplitude(self, x: int) -> NDArray[np.complex128]:
        """(up, down) amplitudes at position ``x``; zeros outside the window."""
        i = x - self.offset_min
        if 0 <= i < len(self.amps):
            return self.amps[i].copy()
        return np.zeros(2, dtype=np.complex128)

    def ket(self, offset_min: int, n_positions: int) -> NDArray[np.complex128]:
        """Flatten into a vector over ``coin (x) position`` for a given window.

        Index of ``(c, x)`` is ``c * n_positions + (x - offset_min)``.
        """
        lo = self.offset_min - offset_min
        hi = lo + len(self.amps)
        if lo < 0 or hi > n_positions:
            raise ValueError("state support does not fit in the requested window")
        vec = np.zeros((2, n_positions), dtype=np.complex128)
        vec[:, lo:hi] = self.amps.T
        return vec.reshape(-1)


def make_initial_state(init: InitialState) -> WalkerState:
    amps = np.array(
        [[np.cos(init.delta), np.exp(1j * init.eta) * np.sin(init.delta)]],
        dtype=np.complex128,
    )
    return WalkerState(offset_min=0, amps=amps, t=0)


def coin_matrix(theta: float) -> NDArray[np.complex128]:
    """
    Return the single-parameter coin

        [[cos(theta), -i sin(theta)],
         [-i sin(theta), cos(theta)]]

    which is unitary for every real ``theta`` and satisfies
    ``coin_matrix(theta) @ coin_matrix(-theta) == I``.
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def norm(state: WalkerState) -> float:
    """Total probability ``sum_x |a_x|^2 + |b_x|^2`` (not its square root)."""
    return float(np.sum(np.abs(state.amps) ** 2))
