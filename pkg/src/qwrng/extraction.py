"""
Bit commitment and simulated detection for walk-based bit generation.

Detection is simulated with a counter-based generator (Philox4x64 keyed by
the seed). Round ``r`` consumes exactly the four 64-bit words of counter
block ``r``: word 0 drives the position draw, word 1 the coin draw. Output is
therefore a pure function of ``(seed, round)`` and does not depend on how
rounds are batched or scheduled. The bits produced are pseudo-random by
construction and the metadata records the seed.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from qwrng import __version__
from qwrng.engines import WalkSpec, evolve
from qwrng.randomness import PositionDistribution, joint_distribution

__all__ = [
    "BitBuffer",
    "CommitmentScheme",
    "JointTable",
    "Mode",
    "ZeroPolicy",
    "bits_needed",
    "commit_coin",
    "commit_position",
    "generate_bits",
    "round_uniforms",
    "sample_measurement",
    "sample_joint",
    "spec_digest",
]

BATCH = 1 << 16


class ZeroPolicy(str, enum.Enum):
    SKIP = "skip"
    ASSIGN_ZERO = "assign-zero"
    ASSIGN_ONE = "assign-one"


class Mode(str, enum.Enum):
    WALK = "walk"
    UNIFORM_REFERENCE = "uniform-reference"


def bits_needed(t: int) -> int:
    """Smallest ``n`` with ``2**n >= 2*t``."""
    if t < 1:
        raise ValueError(f"need at least one step, got t={t}")
    return (2 * t - 1).bit_length()


@dataclass(frozen=True)
class CommitmentScheme:
    """
    Maps detector positions ``-t..-1, 1..t`` to consecutive ``n_bits``-wide
    codewords in order. Position 0 follows ``zero_policy``. When
    ``include_coin_bit`` is set, the coin bit follows the position bits.
    """

    t: int
    zero_policy: ZeroPolicy = ZeroPolicy.SKIP
    include_coin_bit: bool = False
    invert_coin: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "zero_policy", ZeroPolicy(self.zero_policy))
        bits_needed(self.t)

    @property
    def n_bits(self) -> int:
        return bits_needed(self.t)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "n_bits": self.n_bits,
            "zero_policy": self.zero_policy.value,
            "include_coin_bit": self.include_coin_bit,
            "invert_coin": self.invert_coin,
            "bit_order": "position-then-coin",
        }


def commit_position(x: int, scheme: CommitmentScheme) -> str | None:
    """
    Codeword for a detection at ``x``, or ``None`` when nothing is emitted.

    Under ``ASSIGN_ZERO``/``ASSIGN_ONE`` position 0 yields the single bit
    "0"/"1".
    """
    t = scheme.t
    if not -t <= x <= t:
        raise ValueError(f"position {x} outside [-{t}, {t}]")
    if x == 0:
        if scheme.zero_policy is ZeroPolicy.SKIP:
            return None
        return "0" if scheme.zero_policy is ZeroPolicy.ASSIGN_ZERO else "1"
    index = x + t if x < 0 else x + t - 1
    return format(index, f"0{scheme.n_bits}b")


def commit_coin(outcome: str | int, invert: bool = False) -> int:
    """up -> 0, down -> 1 (swapped when ``invert``)."""
    if outcome in ("up", 0):
        bit = 0
    elif outcome in ("down", 1):
        bit = 1
    else:
        raise ValueError(f"unknown coin outcome {outcome!r}")
    return bit ^ int(invert)


def round_uniforms(seed: int, start: int, count: int) -> NDArray[np.float64]:
    """Uniform [0, 1) draws for rounds ``start..start+count-1``, shape ``(count, 4)``."""
    bg = np.random.Philox(key=seed)
    bg.advance(start)
    raw = bg.random_raw(4 * count).reshape(count, 4)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _inverse_cdf(probs: NDArray[np.float64], u: NDArray[np.float64]) -> NDArray[np.int64]:
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    # u * total can round up to total; fall back to the last outcome with mass
    last = int(np.flatnonzero(probs > 0)[-1])
    return np.minimum(idx, last)


def sample_measurement(dist: PositionDistribution, rng: np.random.Generator | NDArray | float):
    """
    Born-rule position draw by inverse CDF.

    ``rng`` is a NumPy generator or pre-drawn uniform(s) in [0, 1). Returns an
    int for a scalar draw, an int array otherwise. Zero-probability positions
    are never returned.
    """
    u = rng.random() if isinstance(rng, np.random.Generator) else rng
    idx = _inverse_cdf(dist.probs, np.asarray(u, dtype=np.float64))
    out = dist.offset_min + idx
    return int(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class JointTable:
    """Joint (position, coin) outcome probabilities, shape ``(n_positions, 2)``."""

    offset_min: int
    probs: NDArray[np.float64]

    @property
    def position(self) -> PositionDistribution:
        return PositionDistribution(self.offset_min, self.probs.sum(axis=1))

    @classmethod
    def point_mass(cls, x: int, coin: str = "up") -> "JointTable":
        row = [1.0, 0.0] if coin == "up" else [0.0, 1.0]
        return cls(x, np.array([row]))

    @classmethod
    def uniform_reference(cls, t: int) -> "JointTable":
        """Uniform over the ``2t`` committed positions and both coin values."""
        probs = np.full((2 * t + 1, 2), 1.0 / (4 * t))
        probs[t] = 0.0
        return cls(-t, probs)


def sample_joint(table: JointTable, u: NDArray[np.float64]) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """
    Draw positions from the marginal with ``u[:, 0]``, then the coin
    conditioned on the drawn position with ``u[:, 1]``. Coin 0 = up, 1 = down.
    """
    pos = table.position
    idx = _inverse_cdf(pos.probs, u[:, 0])
    p_x = pos.probs[idx]
    p_up = np.divide(table.probs[idx, 0], p_x, out=np.zeros_like(p_x), where=p_x > 0)
    coin = (u[:, 1] >= p_up).astype(np.int64)
    return table.offset_min + idx, coin


def spec_digest(spec: WalkSpec) -> str:
    blob = json.dumps(spec.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class BitBuffer:
    """Packed MSB-first bit sequence with an exact length and provenance."""

    data: bytes
    bit_count: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.bit_count > 8 * len(self.data):
            raise ValueError("bit_count exceeds buffer length")

    @classmethod
    def from_bits(cls, bits, metadata: dict | None = None) -> "BitBuffer":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr).tobytes(), int(arr.size), dict(metadata or {}))

    def bits(self) -> NDArray[np.uint8]:
        raw = np.frombuffer(self.data, dtype=np.uint8)
        return np.unpackbits(raw, count=self.bit_count)

    def __len__(self) -> int:
        return self.bit_count

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write raw bytes to ``path`` and JSON metadata to ``path + '.json'``."""
        path = Path(path)
        meta_path = path.with_name(path.name + ".json")
        path.write_bytes(self.data)
        meta = dict(self.metadata, bit_count=self.bit_count)
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path, meta_path

    @classmethod
    def read(cls, path: str | Path) -> "BitBuffer":
        path = Path(path)
        data = path.read_bytes()
        meta_path = path.with_name(path.name + ".json")
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            return cls(data, int(meta["bit_count"]), meta)
        return cls(data, 8 * len(data), {})


def _codebook(scheme: CommitmentScheme, offset_min: int, n_positions: int) -> list[NDArray[np.uint8]]:
    book = []
    for x in range(offset_min, offset_min + n_positions):
        word = commit_position(x, scheme) if abs(x) <= scheme.t else None
        book.append(np.array([int(c) for c in word or ""], dtype=np.uint8))
    return book


def generate_bits(
    spec: WalkSpec,
    scheme: CommitmentScheme,
    rounds: int,
    seed: int,
    mode: Mode | str = Mode.WALK,
    table: JointTable | None = None,
) -> BitBuffer:
    """
    Simulate ``rounds`` independent preparations and detections.

    The walk state is computed once and re-measured each round. ``table``
    overrides the outcome distribution (for testing commitment logic
    against known distributions).
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    mode = Mode(mode)
    if table is None:
        if mode is Mode.UNIFORM_REFERENCE:
            table = JointTable.uniform_reference(scheme.t)
        else:
            table = JointTable(*joint_distribution(evolve(spec)))
    n_pos = table.probs.shape[0]
    positions = table.offset_min + np.arange(n_pos)
    if np.any(table.probs[np.abs(positions) > scheme.t] > 0):
        raise ValueError("distribution has mass outside the scheme's position range")
    book = _codebook(scheme, table.offset_min, n_pos)
    widths = np.array([len(w) for w in book])

    chunks = []
    for start in range(0, rounds, BATCH):
        count = min(BATCH, rounds - start)
        u = round_uniforms(seed, start, count)
        pos, coin = sample_joint(table, u)
        idx = pos - table.offset_min
        pieces = [book[i] for i in idx]
        if scheme.include_coin_bit:
            coin_bits = (coin ^ int(scheme.invert_coin)).astype(np.uint8)
            # the coin bit is emitted only for rounds that commit a position
            emits = widths[idx] > 0
            pieces = [np.append(p, c) if e else p for p, c, e in zip(pieces, coin_bits, emits)]
        if pieces:
            chunks.append(np.concatenate(pieces))
    bits = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)

    metadata = {
        "spec": spec.to_dict(),
        "spec_digest": spec_digest(spec),
        "scheme": scheme.to_dict(),
        "seed": seed,
        "rounds": rounds,
        "mode": mode.value,
        "generator": "philox4x64; round r uses counter block r",
        "tool_version": __version__,
    }
    return BitBuffer.from_bits(bits, metadata)
