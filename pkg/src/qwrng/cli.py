"""
Command-line front end.

    qwrng sweep-delta     randomness vs. initial-state angle delta
    qwrng sweep-steps     randomness vs. step count for all three walks
    qwrng noise-scan      R, E and QR under coin bit-flip noise
    qwrng verify-analytic closed forms vs. simulation for steps 1 and 2
    qwrng genbits         simulate detections and write a bitstream
    qwrng stat-test       run the test battery on a bitstream file

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes replaced by underscores. Explicit flags
override the file.
"""

from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import io
import json
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qwrng import __version__
from qwrng.core import InitialState
from qwrng.engines import Family, WalkSpec, iter_density, iter_states
from qwrng.extraction import BitBuffer, CommitmentScheme, Mode, generate_bits
from qwrng.randomness import (
    analytic_step1_randomness,
    analytic_step2_randomness,
    coin_distribution,
    intrinsic_randomness,
    joint_randomness,
    position_distribution,
    quantum_randomness,
    von_neumann_entropy,
)
from qwrng.stattests import block_frequency_test, monobit_test, reports_to_csv, runs_test, serial_test

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_IO = 4

VERIFY_TOL = 1e-10

SWEEP_DELTA_HEADER = ["family", "delta", "eta", "theta", "steps", "r_coin", "r_pos", "r_joint"]
SWEEP_STEPS_HEADER = ["t", "family", "r_pos", "r_joint", "support", "dr_pos_vs_standard"]
NOISE_HEADER = ["t", "p", "R", "E", "QR"]
VERIFY_HEADER = ["delta", "eta", "theta", "step", "r_coin_analytic", "r_coin_sim",
                 "r_pos_analytic", "r_pos_sim", "max_abs_dev"]


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    family: str = "standard"
    theta: list[float] = field(default_factory=lambda: [math.pi / 4])
    theta1: float = math.pi / 4
    theta2: float = math.pi / 4
    loops: int = 2
    delta: list[float] = field(default_factory=lambda: [0.0])
    eta: list[float] = field(default_factory=lambda: [0.0])
    steps: list[int] = field(default_factory=lambda: [50])
    noise_p: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.4])
    seed: int = 0
    rounds: int = 100_000
    zero_policy: str = "skip"
    include_coin_bit: bool = False
    mode: str = "walk"
    out: str | None = None
    input: str | None = None
    alpha: float = 0.01
    block_len: int = 128
    serial_m: int = 2
    jobs: int = 1

    def spec(self, **over) -> WalkSpec:
        base = dict(
            family=self.family,
            theta=self.theta[0],
            theta1=self.theta1,
            theta2=self.theta2,
            loop_count_n=self.loops,
            init=InitialState(self.delta[0], self.eta[0]),
            steps=self.steps[0],
        )
        base.update(over)
        return WalkSpec(**base)


# Per-command defaults that differ from RunConfig's.
COMMAND_DEFAULTS = {
    "sweep-delta": {
        "delta": list(np.linspace(0.0, math.pi / 2, 65)),
        "theta": [math.pi / 12, math.pi / 4, 5 * math.pi / 12],
        "steps": [0, 25, 50],
    },
    "sweep-steps": {"steps": [50]},
    "noise-scan": {"steps": [50]},
    "verify-analytic": {
        "delta": [k * math.pi / 8 for k in range(5)],
        "eta": [k * math.pi / 8 for k in range(5)],
        "theta": [k * math.pi / 8 for k in range(5)],
    },
    "genbits": {"steps": [8]},
}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str | float | int) -> float:
    """Parse a float or simple arithmetic in ``pi`` such as ``5*pi/12``."""
    if isinstance(text, (int, float)):
        return float(text)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot parse number {text!r}")

    try:
        return ev(ast.parse(str(text).strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def parse_list(value, kind=float) -> list:
    if isinstance(value, (list, tuple)):
        items = list(value)
    elif isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    else:
        items = [value]
    if not items:
        raise ConfigError("empty list")
    out = [parse_number(v) for v in items]
    if kind is int:
        if any(v != int(v) for v in out):
            raise ConfigError(f"expected integers, got {value!r}")
        out = [int(v) for v in out]
    return out


def parse_steps(value) -> list[int]:
    """Step lists accept ``a,b,c`` and inclusive ranges ``a:b``."""
    if isinstance(value, str) and ":" in value:
        lo, hi = (int(parse_number(v)) for v in value.split(":", 1))
        return list(range(lo, hi + 1))
    return parse_list(value, int)


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return format(float(x), ".17g")
    return str(x)


def write_csv(header: list[str], rows: list[list], comments: dict) -> str:
    buf = io.StringIO()
    for key, val in comments.items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse CSV produced by this tool, skipping ``#`` comment lines."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _provenance(cfg: RunConfig, fields_: list[str]) -> dict:
    out = {"tool": f"qwrng {__version__}", "command": cfg.command}
    for name in fields_:
        val = getattr(cfg, name)
        out[name] = ",".join(_fmt(v) for v in val) if isinstance(val, list) else _fmt(val)
    return out


def _pmap(cfg: RunConfig, fn, items):
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sweep_delta(cfg: RunConfig) -> str:
    """
    Rows per (theta, delta, steps). For the split-step family the swept
    theta sets both coins; the directed walk ignores it.
    """
    family = Family(cfg.family)
    eta = cfg.eta[0]
    wanted = sorted(set(cfg.steps))
    grid = [(th, d) for th in cfg.theta for d in cfg.delta]

    def point(args):
        theta, delta = args
        spec = cfg.spec(theta=theta, theta1=theta, theta2=theta,
                        init=InitialState(delta, eta), steps=max(wanted))
        rows = []
        for state in iter_states(spec):
            if state.t in wanted:
                rows.append([family.value, delta, eta, theta, state.t,
                             intrinsic_randomness(coin_distribution(state)),
                             intrinsic_randomness(position_distribution(state)),
                             joint_randomness(state)])
        return rows

    rows = [r for chunk in _pmap(cfg, point, grid) for r in chunk]
    return write_csv(SWEEP_DELTA_HEADER, rows,
                     _provenance(cfg, ["family", "theta", "delta", "eta", "steps", "loops"]))


def cmd_sweep_steps(cfg: RunConfig) -> str:
    """All three families, t = 1..T. ``theta`` is shared by the standard walk and both split-step coins."""
    T = max(cfg.steps)
    theta = cfg.theta[0]
    families = [Family.STANDARD, Family.SPLIT_STEP, Family.DIRECTED]

    def run(family):
        spec = cfg.spec(family=family, theta=theta, theta1=theta, theta2=theta, steps=T)
        out = []
        for state in iter_states(spec):
            if state.t == 0:
                continue
            pos = position_distribution(state)
            out.append((intrinsic_randomness(pos), joint_randomness(state), pos.support_size))
        return out

    results = dict(zip(families, _pmap(cfg, run, families)))
    rows = []
    for i in range(T):
        ref = results[Family.STANDARD][i][0]
        for fam in families:
            r_pos, r_joint, support = results[fam][i]
            rows.append([i + 1, fam.value, r_pos, r_joint, support, r_pos - ref])
    cfg = dataclasses.replace(cfg, theta1=theta, theta2=theta)
    return write_csv(SWEEP_STEPS_HEADER, rows,
                     _provenance(cfg, ["theta", "theta1", "theta2", "delta", "eta", "loops", "steps"]))


def noise_rows(cfg: RunConfig) -> list[list]:
    T = max(cfg.steps)
    for p in cfg.noise_p:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"noise level {p} outside [0, 1]")

    def run(p):
        out = []
        for rho in iter_density(cfg.spec(steps=T, noise_p=p)):
            r = joint_randomness(rho)
            e = von_neumann_entropy(rho)
            out.append([rho.t, p, r, e, quantum_randomness(r, e)])
        return out

    return [row for chunk in _pmap(cfg, run, cfg.noise_p) for row in chunk]


def cmd_noise_scan(cfg: RunConfig) -> str:
    return write_csv(NOISE_HEADER, noise_rows(cfg),
                     _provenance(cfg, ["family", "theta", "theta1", "theta2", "delta", "eta", "steps", "noise_p"]))


def verify_rows(cfg: RunConfig) -> list[list]:
    """Closed forms against simulation at steps 1 and 2 over the (delta, eta, theta) grid."""
    grid = [(d, e, th) for d in cfg.delta for e in cfg.eta for th in cfg.theta]

    def point(args):
        d, e, th = args
        spec = WalkSpec(Family.STANDARD, theta=th, init=InitialState(d, e), steps=2)
        states = list(iter_states(spec))
        out = []
        for step, analytic in ((1, analytic_step1_randomness), (2, analytic_step2_randomness)):
            rc_a, rp_a = analytic(d, e, th)
            s = states[step]
            rc_s = intrinsic_randomness(coin_distribution(s))
            rp_s = intrinsic_randomness(position_distribution(s))
            out.append([d, e, th, step, rc_a, rc_s, rp_a, rp_s, max(abs(rc_a - rc_s), abs(rp_a - rp_s))])
        return out

    return [row for chunk in _pmap(cfg, point, grid) for row in chunk]


def cmd_verify_analytic(cfg: RunConfig) -> tuple[str, float]:
    rows = verify_rows(cfg)
    dev = max(r[-1] for r in rows)
    text = write_csv(VERIFY_HEADER, rows, _provenance(cfg, ["delta", "eta", "theta"]))
    return text, dev


def cmd_genbits(cfg: RunConfig) -> tuple[BitBuffer, str]:
    t = cfg.steps[0]
    spec = cfg.spec(steps=t)
    scheme = CommitmentScheme(t, cfg.zero_policy, cfg.include_coin_bit)
    buf = generate_bits(spec, scheme, cfg.rounds, cfg.seed, cfg.mode)
    return buf, battery_csv(buf.bits(), cfg)


def battery_csv(bits, cfg: RunConfig) -> str:
    tests = [
        lambda: monobit_test(bits, cfg.alpha),
        lambda: runs_test(bits, cfg.alpha),
        lambda: block_frequency_test(bits, cfg.block_len, cfg.alpha),
        lambda: serial_test(bits, cfg.serial_m, cfg.alpha),
    ]
    reports = []
    for test in tests:
        try:
            reports.append(test())
        except ValueError as exc:
            print(f"skipped test: {exc}", file=sys.stderr)
    return reports_to_csv(reports)


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwrng", description="Quantum-walk randomness toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ["sweep-delta", "sweep-steps", "noise-scan", "verify-analytic", "genbits", "stat-test"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--family", choices=[f.value for f in Family])
        p.add_argument("--theta", help="coin angle(s), comma separated; 'pi' allowed")
        p.add_argument("--theta1")
        p.add_argument("--theta2")
        p.add_argument("--loops", help="directed-walk loop count n (>= 2)")
        p.add_argument("--delta")
        p.add_argument("--eta")
        p.add_argument("--steps", help="step count(s): 'a,b,c' or range 'a:b'")
        p.add_argument("--noise-p")
        p.add_argument("--seed")
        p.add_argument("--rounds")
        p.add_argument("--zero-policy", choices=["skip", "assign-zero", "assign-one"])
        p.add_argument("--include-coin-bit", action="store_const", const=True)
        p.add_argument("--mode", choices=[m.value for m in Mode])
        p.add_argument("--out")
        p.add_argument("--input", help="bitstream file (stat-test)")
        p.add_argument("--alpha")
        p.add_argument("--block-len")
        p.add_argument("--serial-m")
        p.add_argument("--jobs")
    return parser


_LIST_FLOAT = {"theta", "delta", "eta", "noise_p"}
_FLOAT = {"theta1", "theta2", "alpha"}
_INT = {"loops", "seed", "rounds", "block_len", "serial_m", "jobs"}


def _coerce(name: str, value):
    if name in _LIST_FLOAT:
        return parse_list(value)
    if name == "steps":
        return parse_steps(value)
    if name in _FLOAT:
        return parse_number(value)
    if name in _INT:
        v = parse_number(value)
        if v != int(v):
            raise ConfigError(f"--{name.replace('_', '-')} must be an integer")
        return int(v)
    if name == "include_coin_bit":
        return bool(value)
    return value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = dict(COMMAND_DEFAULTS.get(args.command, {}))
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(command=args.command, **{k: _coerce(k, v) for k, v in values.items()})
    try:
        Family(cfg.family)
        Mode(cfg.mode)
        cfg.spec()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.jobs < 1 or cfg.rounds < 1:
        raise ConfigError("--jobs and --rounds must be >= 1")
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.command == "sweep-delta":
            _emit(cmd_sweep_delta(cfg), cfg.out)
        elif cfg.command == "sweep-steps":
            _emit(cmd_sweep_steps(cfg), cfg.out)
        elif cfg.command == "noise-scan":
            _emit(cmd_noise_scan(cfg), cfg.out)
        elif cfg.command == "verify-analytic":
            text, dev = cmd_verify_analytic(cfg)
            if cfg.out:
                _emit(text, cfg.out)
            print(f"max abs deviation: {dev:.3e} (tolerance {VERIFY_TOL:.0e})")
            if not dev <= VERIFY_TOL:
                print("verification FAILED", file=sys.stderr)
                return EXIT_VERIFY
        elif cfg.command == "genbits":
            if not cfg.out:
                raise ConfigError("genbits requires --out")
            buf, report = cmd_genbits(cfg)
            bin_path, meta_path = buf.write(cfg.out)
            report_path = Path(cfg.out + ".tests.csv")
            report_path.write_text(report)
            print(f"wrote {buf.bit_count} bits to {bin_path}; metadata {meta_path}; tests {report_path}")
        elif cfg.command == "stat-test":
            if not cfg.input:
                raise ConfigError("stat-test requires --input")
            buf = BitBuffer.read(cfg.input)
            _emit(battery_csv(buf.bits(), cfg), cfg.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
