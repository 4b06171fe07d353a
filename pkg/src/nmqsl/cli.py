"""Command-line front end: ``nmqsl {simulate,classify,qsl,sweep,validate}``.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 domain error.
Usage errors print a single ``nmqsl: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import REPORT_COLUMNS, STRATEGIES, speedup
from .classification import classify
from .control import execute_schedule, schedule_from_events
from .errors import DomainError, RegimeError
from .geometry import BathSpec, BlochVector, check_state
from .profiles import DecayProfile, analysis_end, parse_profile
from .propagator import fmt, free_trajectory

__all__ = ["main", "SweepSpec", "parse_grid", "build_parser", "SWEEP_COLUMNS"]

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3

SWEEP_COLUMNS = (*REPORT_COLUMNS, "status")

# profile family -> {grid/flag name: profile key}
FAMILY_PARAMS = {
    "jc": ("lambda", "gamma0"),
    "const": ("gamma0",),
    "cos": ("zeta", "omega"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostic, exit 2
        raise UsageError(message)


# ------------------------------------------------------------ parsing


def parse_state(text: str) -> BlochVector:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--state expects x,y,z, got {text!r}")
    try:
        state = BlochVector(*(float(p) for p in parts))
    except ValueError:
        raise UsageError(f"--state expects three numbers, got {text!r}") from None
    try:
        check_state(state)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return state


def parse_grid(text: str) -> list[tuple[str, np.ndarray]]:
    """Parse ``name=lo:hi:logN|linN[,name=...]`` into (name, values) pairs."""
    grids = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, rng = item.partition("=")
        bits = rng.split(":")
        if not sep or len(bits) != 3:
            raise UsageError(f"grid item {item!r} is not name=lo:hi:logN|linN")
        lo_s, hi_s, mode = bits
        try:
            lo, hi = float(lo_s), float(hi_s)
        except ValueError:
            raise UsageError(f"grid item {item!r}: bounds must be numbers") from None
        kind, count = mode[:3], mode[3:]
        if kind not in ("log", "lin") or not count.isdigit():
            raise UsageError(f"grid item {item!r}: spacing must be logN or linN")
        n = int(count)
        if n == 0:
            raise UsageError(f"grid {name!r} is empty")
        if kind == "log":
            if lo <= 0.0 or hi <= 0.0:
                raise UsageError(f"grid {name!r}: log spacing needs positive bounds")
            values = np.logspace(math.log10(lo), math.log10(hi), n)
        else:
            values = np.linspace(lo, hi, n)
        grids.append((name.strip(), values))
    if not grids:
        raise UsageError("empty grid")
    return grids


def read_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments ignored."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{no}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# ------------------------------------------------------------ sweep spec


@dataclass
class SweepSpec:
    family: str
    grid: str
    beta: float
    state: str
    eps: float = 0.01
    strategy: str = "cool"
    fixed: dict[str, float] = field(default_factory=dict)
    out: str | None = None
    threads: int = 1
    allow_non_cp: bool = False

    def grids(self) -> list[tuple[str, np.ndarray]]:
        grids = parse_grid(self.grid)
        allowed = FAMILY_PARAMS[self.family]
        for name, _ in grids:
            if name not in allowed:
                raise UsageError(f"{self.family} profiles have no parameter {name!r}")
        return grids

    def points(self) -> list[dict[str, float]]:
        """Grid points in row-major order (last grid varies fastest)."""
        grids = self.grids()
        names = [n for n, _ in grids]
        missing = set(FAMILY_PARAMS[self.family]) - set(names) - set(self.fixed)
        if missing:
            raise UsageError(f"no value for {sorted(missing)}: add a grid or a fixed flag")
        pts = []
        for combo in product(*(v for _, v in grids)):
            p = {k: v for k, v in self.fixed.items() if k in FAMILY_PARAMS[self.family]}
            p.update(zip(names, (float(c) for c in combo)))
            pts.append(p)
        return pts

    def to_config(self) -> str:
        lines = [
            f"profile={self.family}",
            f"grid={self.grid}",
            f"beta={self.beta!r}",
            f"state={self.state}",
            f"eps={self.eps!r}",
            f"strategy={self.strategy}",
        ]
        lines += [f"{k}={v!r}" for k, v in sorted(self.fixed.items())]
        if self.out is not None:
            lines.append(f"out={self.out}")
        lines.append(f"threads={self.threads}")
        if self.allow_non_cp:
            lines.append("allow_non_cp=true")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "SweepSpec":
        family = args.profile.split(":", 1)[0].strip()
        if family not in FAMILY_PARAMS:
            raise UsageError(f"sweep supports profile families {sorted(FAMILY_PARAMS)}, got {family!r}")
        if args.grid is None:
            raise UsageError("sweep needs --grid")
        fixed = {k: getattr(args, k) for k in ("lambda", "gamma0", "zeta", "omega")
                 if getattr(args, k, None) is not None}
        return cls(
            family=family,
            grid=args.grid,
            beta=args.beta,
            state=args.state,
            eps=args.eps,
            strategy=args.strategy,
            fixed=fixed,
            out=args.out,
            threads=args.threads,
            allow_non_cp=args.allow_non_cp,
        )


def _profile_from_point(family: str, point: dict[str, float], allow_non_cp: bool) -> DecayProfile:
    body = ",".join(f"{k}={point[k]!r}" for k in FAMILY_PARAMS[family])
    return parse_profile(f"{family}:{body}", check_cp=not allow_non_cp)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return fmt(v)


def sweep_row(spec: SweepSpec, point: dict[str, float]) -> list[str]:
    row = {c: None for c in REPORT_COLUMNS}
    row["lambda"] = point.get("lambda")
    row["gamma0"] = point.get("gamma0")
    row["omega"] = point.get("omega")
    row["beta"] = spec.beta
    row["eps"] = spec.eps
    try:
        profile = _profile_from_point(spec.family, point, spec.allow_non_cp)
        rep = speedup(parse_state(spec.state), profile, BathSpec(spec.beta), spec.eps, spec.strategy)
        row.update(rep.row())
        status = "ok"
    except (ValueError, DomainError, ArithmeticError) as exc:
        status = "error: " + " ".join(str(exc).split()).replace(",", ";")
    return [_cell(row[c]) for c in REPORT_COLUMNS] + [status]


def run_sweep(spec: SweepSpec) -> tuple[str, int]:
    """Return the CSV text and the number of successful rows."""
    points = spec.points()
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            rows = list(pool.map(lambda p: sweep_row(spec, p), points))
    else:
        rows = [sweep_row(spec, p) for p in points]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    w.writerows(rows)
    return buf.getvalue(), sum(r[-1] == "ok" for r in rows)


# ------------------------------------------------------------ commands


def _require(args: argparse.Namespace, *names: str) -> None:
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"the following argument is required: --{n.replace('_', '-')}")


def _common(args: argparse.Namespace) -> tuple[DecayProfile, BathSpec, BlochVector]:
    _require(args, "profile", "beta", "state")
    try:
        profile = parse_profile(args.profile, check_cp=not args.allow_non_cp)
        bath = BathSpec(args.beta)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if not 0.0 < args.eps < 1.0:
        raise UsageError(f"--eps must lie in (0, 1), got {args.eps}")
    return profile, bath, parse_state(args.state)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        return v

    return json.dumps({k: clean(v) for k, v in obj.items()})


def cmd_simulate(args: argparse.Namespace) -> int:
    profile, bath, state = _common(args)
    if args.schedule is not None:
        try:
            events = json.loads(Path(args.schedule).read_text())
            schedule = schedule_from_events(events)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad schedule {args.schedule}: {exc}") from None
        dt = args.dt_sample or max(schedule.duration, 1e-300) / 1000
        n = max(2, int(round(schedule.duration / dt)) + 1)
        _, traj = execute_schedule(schedule, state, profile, bath, n_samples=n)
    else:
        horizon = args.horizon
        if horizon is None:
            horizon = analysis_end(profile, profile.default_horizon())
        if not horizon > 0.0:
            raise UsageError("--horizon must be > 0")
        dt = args.dt_sample or horizon / 1000
        if not dt > 0.0:
            raise UsageError("--dt-sample must be > 0")
        n = int(math.floor(horizon / dt + 1e-9))
        times = np.append(np.arange(n + 1) * dt, horizon) if n * dt < horizon * (1 - 1e-12) else np.arange(n + 1) * dt
        traj = free_trajectory(state, profile, bath, times)
    _emit(traj.to_csv(), args.out)
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    profile, bath, state = _common(args)
    c = classify(profile, bath, state, args.eps, args.horizon)
    _emit(_json(c.as_dict()) + "\n", args.out)
    return EXIT_OK


def cmd_qsl(args: argparse.Namespace) -> int:
    profile, bath, state = _common(args)
    rep = speedup(state, profile, bath, args.eps, args.strategy)
    _emit(_json(rep.as_dict()) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, "profile", "beta", "state")
    spec = SweepSpec.from_args(args)
    if spec.threads < 1:
        raise UsageError("--threads must be >= 1")
    parse_state(spec.state)
    text, ok = run_sweep(spec)
    _emit(text, spec.out)
    return EXIT_OK if ok else EXIT_DOMAIN


def cmd_validate(args: argparse.Namespace) -> int:
    from .validation import FAIL, run_all

    if not 1e-12 <= args.tol <= 1e-4:
        raise UsageError(f"--tol must lie in [1e-12, 1e-4], got {args.tol}")
    checks = run_all(tol=args.tol, n_oracle=args.cases)
    text = "".join(c.line() + "\n" for c in checks)
    failed = [c for c in checks if c.status == FAIL]
    text += f"{len(checks) - len(failed)}/{len(checks)} checks without failure\n"
    _emit(text, args.out)
    return EXIT_VALIDATION if failed else EXIT_OK


# ------------------------------------------------------------ parser

_CONFIG_TYPES = {
    "beta": float,
    "eps": float,
    "horizon": float,
    "dt_sample": float,
    "threads": int,
    "tol": float,
    "cases": int,
    "lambda": float,
    "gamma0": float,
    "zeta": float,
    "omega": float,
    "seed": int,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--profile", help="jc:lambda=,gamma0= | const:gamma0= | cos:zeta=,omega= | table:PATH")
    common.add_argument("--beta", type=float, help="inverse bath temperature (>= 0)")
    common.add_argument("--state", help="initial Bloch vector x,y,z")
    common.add_argument("--eps", type=float, default=None, help="target radius around the fixed point (default 0.01)")
    common.add_argument("--strategy", choices=sorted(STRATEGIES), default=None)
    common.add_argument("--horizon", type=float, help="time horizon")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, help="reserved; all computations are deterministic")
    common.add_argument("--allow-non-cp", action="store_true", default=None,
                        help="accept damped-cosine rates that violate complete positivity")

    p = _Parser(prog="nmqsl", description="Quantum speed limits of a qubit in a (non-)Markovian thermal bath.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sim = sub.add_parser("simulate", parents=[common], help="trajectory CSV")
    sim.add_argument("--dt-sample", type=float, help="sampling step (default horizon / 1000)")
    sim.add_argument("--schedule", help="JSON event list to replay instead of free evolution")
    sub.add_parser("classify", parents=[common], help="Markovian / Class A / Class B verdict")
    sub.add_parser("qsl", parents=[common], help="QSL report as JSON")
    sw = sub.add_parser("sweep", parents=[common], help="grid sweep CSV")
    sw.add_argument("--grid", help="name=lo:hi:logN|linN[,name=...]")
    for name in ("lambda", "gamma0", "zeta", "omega"):
        sw.add_argument(f"--{name}", type=float, dest=name, help=f"fixed {name}")
    val = sub.add_parser("validate", parents=[common], help="run the self-check suite")
    val.add_argument("--tol", type=float, default=None, help="integrator tolerance for the oracle check")
    val.add_argument("--cases", type=int, default=None, help="random oracle cases (default 100)")
    return p


_DEFAULTS = {"eps": 0.01, "strategy": "cool", "threads": 1, "allow_non_cp": False, "tol": 1e-10, "cases": 100}


def _apply_config(args: argparse.Namespace) -> None:
    if args.config is not None:
        for key, raw in read_config(args.config).items():
            if not hasattr(args, key) or key in ("command", "config"):
                raise UsageError(f"{args.config}: unknown key {key!r}")
            if getattr(args, key) is not None:
                continue  # flag wins
            if key == "allow_non_cp":
                value = raw.lower() in ("1", "true", "yes")
            elif key in _CONFIG_TYPES:
                try:
                    value = _CONFIG_TYPES[key](raw)
                except ValueError:
                    raise UsageError(f"{args.config}: {key}={raw!r} is not a number") from None
            else:
                value = raw
            if key == "strategy" and value not in STRATEGIES:
                raise UsageError(f"{args.config}: unknown strategy {value!r}")
            setattr(args, key, value)
    for key, value in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "qsl": cmd_qsl,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"nmqsl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, RegimeError) as exc:
        print(f"nmqsl: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
