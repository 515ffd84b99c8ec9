"""
Four frequency-style randomness tests with closed-form p-values.

Formulas follow the usual SP 800-22 definitions. A report passes when its
p-value is at least ``alpha``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import erfc, log2, sqrt

import numpy as np
from scipy.special import gammaincc

__all__ = [
    "TestReport",
    "battery",
    "block_frequency_test",
    "monobit_test",
    "reports_to_csv",
    "runs_test",
    "serial_test",
]

DEFAULT_ALPHA = 0.01
MIN_BITS = 100


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    p_value: float
    passed: bool
    alpha: float = DEFAULT_ALPHA
    note: str = ""
    p_values: tuple[float, ...] = field(default=())

    @classmethod
    def make(cls, name, statistic, p_value, alpha, note="", p_values=()):
        p_value = float(min(1.0, max(0.0, p_value)))
        return cls(name, float(statistic), p_value, p_value >= alpha, alpha, note, tuple(p_values))


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int8).ravel()
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("bits must be 0 or 1")
    return arr


def _need(n: int, minimum: int = MIN_BITS) -> None:
    if n < minimum:
        raise ValueError(f"test needs at least {minimum} bits, got {n}")


def monobit_test(bits, alpha: float = DEFAULT_ALPHA) -> TestReport:
    b = _as_bits(bits)
    n = b.size
    _need(n)
    s = int(np.sum(2 * b.astype(np.int64) - 1))
    s_obs = abs(s) / sqrt(n)
    return TestReport.make("monobit", s_obs, erfc(s_obs / sqrt(2)), alpha)


def runs_test(bits, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Total number of runs against ``2 n pi (1 - pi)``.

    When the ones-proportion pre-test fails (``|pi - 1/2| >= 2/sqrt(n)``)
    the runs test is not applicable and reports p = 0.
    """
    b = _as_bits(bits)
    n = b.size
    _need(n)
    pi = b.mean()
    if abs(pi - 0.5) >= 2 / sqrt(n):
        return TestReport.make("runs", float("nan"), 0.0, alpha, note="not applicable: monobit pre-test failed")
    runs = 1 + int(np.count_nonzero(np.diff(b)))
    expected = 2 * n * pi * (1 - pi)
    stat = abs(runs - expected) / (2 * sqrt(2 * n) * pi * (1 - pi))
    return TestReport.make("runs", runs, erfc(stat), alpha)


def block_frequency_test(bits, block_len: int = 128, alpha: float = DEFAULT_ALPHA) -> TestReport:
    b = _as_bits(bits)
    n_blocks = b.size // block_len
    if block_len < 1 or n_blocks < 20:
        raise ValueError(f"block frequency test needs >= 20 blocks of {block_len} bits, got {n_blocks}")
    props = b[: n_blocks * block_len].reshape(n_blocks, block_len).mean(axis=1)
    chi2 = 4.0 * block_len * float(np.sum((props - 0.5) ** 2))
    return TestReport.make("block_frequency", chi2, gammaincc(n_blocks / 2, chi2 / 2), alpha)


def _psi_sq(b: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    n = b.size
    ext = np.concatenate([b, b[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for k in range(m):
        codes = (codes << 1) | ext[k:k + n]
    counts = np.bincount(codes, minlength=1 << m)
    return float((1 << m) / n * np.sum(counts.astype(np.float64) ** 2) - n)


def serial_test(bits, m: int = 2, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """
    Overlapping m-bit pattern test.

    ``statistic`` is the first difference of psi-squared; ``p_value`` is the
    smaller of the two p-values, both kept in ``p_values``.
    """
    b = _as_bits(bits)
    n = b.size
    _need(n)
    if m < 2 or m > log2(n) - 2:
        raise ValueError(f"serial test needs 2 <= m <= log2(n) - 2, got m={m}, n={n}")
    p0, p1, p2 = _psi_sq(b, m), _psi_sq(b, m - 1), _psi_sq(b, m - 2)
    d1 = p0 - p1
    d2 = p0 - 2 * p1 + p2
    pv1 = float(gammaincc(2 ** (m - 2), d1 / 2))
    pv2 = float(gammaincc(2 ** (m - 3), d2 / 2))
    return TestReport.make("serial", d1, min(pv1, pv2), alpha, p_values=(pv1, pv2))


def battery(bits, alpha: float = DEFAULT_ALPHA, block_len: int = 128, m: int = 2) -> list[TestReport]:
    return [
        monobit_test(bits, alpha),
        runs_test(bits, alpha),
        block_frequency_test(bits, block_len, alpha),
        serial_test(bits, m, alpha),
    ]


def reports_to_csv(reports: list[TestReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test", "statistic", "p_value", "pass"])
    for r in reports:
        w.writerow([r.name, format(r.statistic, ".17g"), format(r.p_value, ".17g"), str(r.passed).lower()])
    return buf.getvalue()
