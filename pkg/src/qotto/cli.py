"""Command-line entry point: ``python -m qotto <command> [options]``.

Settings come from a flat ``key = value`` file (``--config``) and are
overridden by flags.  Every output file starts with ``# key = value``
comment lines giving the fully resolved configuration.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 power maximum on a grid boundary.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import ensemble, optics, otto, qdyn, thermo
from .errors import Infeasible, MaxOnBoundary, NonConvergence, OttoError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BOUNDARY = 0, 2, 3, 4

SWEEP_COLUMNS = ("alpha_t_tot", "w_ex", "p_over_alpha2", "eta", "w_fric", "status")
MAX_POWER_COLUMNS = ("param", "alpha_t_max", "p_max_over_alpha2", "eta_at_pmax")
FRICTION_COLUMNS = ("alpha", "relative_entropy", "w_fric", "q_rethermalize")
PV_COLUMNS = ("alpha_t_tot", "eta", "p_over_alpha2")
SCAN_PARAMS = ("sigma2", "beta_h", "beta_ratio", "theta")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    theta: float | None = None
    disorder: str | None = None
    alpha: float = 1.0
    tau_ad: float | None = None
    alpha_t: float | None = None
    grid: str = ""
    tau_iso: float = 0.01
    beta_c: float = 1.0
    beta_h: float = 0.5
    beta: float = 1.0
    tol: float = qdyn.DEFAULT_TOL
    max_steps: int = qdyn.DEFAULT_MAX_STEPS
    nodes: int = 64
    samples: int = 50
    alpha_grid: str = "log:1e-3:1e3:13"
    scan_param: str = "sigma2"
    scan: str = ""
    refine_tol: float = 1e-6
    beta_convention: str = "explicit"
    out: str | None = None
    trajectory: str | None = None
    format: str = "csv"

    def validate(self) -> RunConfig:
        if self.theta is not None and self.disorder is not None:
            raise ConfigError("give either theta or disorder, not both")
        if self.theta is not None and not 0 <= self.theta <= math.pi:
            raise ConfigError("theta must lie in [0, pi]")
        for name in ("alpha", "beta", "tol", "refine_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.beta_h < self.beta_c:
            raise ConfigError("need 0 < beta_h < beta_c")
        if self.tau_iso < 0:
            raise ConfigError("tau_iso must be non-negative")
        if self.nodes < 8:
            raise ConfigError("nodes must be at least 8")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.scan_param not in SCAN_PARAMS:
            raise ConfigError(f"scan_param must be one of {', '.join(SCAN_PARAMS)}")
        return self

    def disorder_spec(self) -> ensemble.DisorderSpec:
        if self.disorder is not None:
            return ensemble.DisorderSpec.parse(self.disorder, self.nodes)
        if self.theta is not None:
            return ensemble.DisorderSpec.delta(self.theta)
        raise ConfigError("need theta or disorder")

    def cycle_params(self) -> ensemble.CycleParams:
        return ensemble.CycleParams(
            alpha=self.alpha,
            tau_iso=self.tau_iso,
            beta_c=self.beta_c,
            beta_h=self.beta_h,
            tol=self.tol,
            max_steps=self.max_steps,
        )

    def stroke_time(self) -> float:
        if self.tau_ad is not None and self.alpha_t is not None:
            raise ConfigError("give either tau_ad or alpha_t, not both")
        if self.tau_ad is not None:
            return self.tau_ad
        if self.alpha_t is not None:
            return self.alpha_t / self.alpha
        raise ConfigError("need tau_ad or alpha_t")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PI_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*([0-9.eE+-]+))?\s*$")


def parse_real(text: str) -> float:
    """Float, a ratio ``a/b``, or a multiple or fraction of pi (``pi/5``, ``0.2*pi``)."""
    text = str(text).strip()
    m = _PI_RE.match(text)
    if m:
        coef = m.group(1)
        factor = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
        div = float(m.group(2)) if m.group(2) else 1.0
        return factor * math.pi / div
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if value.strip().lower() in ("none", ""):
        if "None" in kind:
            return None
        if kind == "str":
            return ""
    if kind.startswith("float"):
        return parse_real(value)
    if kind == "int":
        return int(float(value))
    return value.strip()


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:b:n`` (linear), ``log:a:b:n`` (geometric), a comma list, or empty."""
    text = (text or "").strip()
    if not text:
        return ()
    try:
        if text.startswith("log:"):
            a, b, n = text[4:].split(":")
            return tuple(float(x) for x in np.geomspace(parse_real(a), parse_real(b), int(n)))
        if ":" in text:
            a, b, n = text.split(":")
            return tuple(float(x) for x in np.linspace(parse_real(a), parse_real(b), int(n)))
        return tuple(parse_real(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{n}: unrecognized line {raw!r}")
        out[key] = value.strip()
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = str(flag)
    try:
        values = {k: _coerce(k, v) for k, v in raw.items()}
        return RunConfig(**values).validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def worker_count() -> int:
    text = os.environ.get("OTTO_THREADS", "1").strip() or "1"
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"OTTO_THREADS must be an integer, got {text!r}") from None
    if n < 1:
        raise ConfigError("OTTO_THREADS must be at least 1")
    return n


# --- output --------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return f"{float(v):.9g}"


def _header(cfg: RunConfig, command: str, extra: dict) -> list[str]:
    info = {"command": command}
    info.update({k: v for k, v in asdict(cfg).items() if k not in ("out", "format", "trajectory")})
    info["disorder_normalization"] = "gaussian renormalized on [0, pi], tails beyond 12 sigma dropped"
    info.update(extra)
    return [f"# {k} = {v}" for k, v in info.items()]


def write_table(cfg, command, columns, rows, path=None, extra=None) -> str:
    extra = extra or {}
    if cfg.format == "json":
        doc = {
            "config": {**asdict(cfg), "command": command, **extra},
            "columns": list(columns),
            "rows": [dict(zip(columns, (_json_value(v) for v in r))) for r in rows],
        }
        text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    else:
        lines = _header(cfg, command, extra)
        lines.append(",".join(columns))
        lines += [",".join(_fmt(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, path)
    return text


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, str):
        return v
    v = float(v)
    return v if math.isfinite(v) else str(v)


def _emit(text: str, path: str | None) -> None:
    if path in (None, "", "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- commands ------------------------------------------------------------


def cmd_friction_loop(cfg: RunConfig) -> None:
    theta = cfg.theta if cfg.theta is not None else math.pi / 5
    alpha_t = cfg.alpha_t if cfg.alpha_t is not None else 15.0
    spec = qdyn.HamiltonianSpec(theta)
    ctx = thermo.ThermalContext(cfg.beta)
    rows = []
    for a in parse_grid(cfg.alpha_grid):
        fwd = qdyn.RampProtocol.forward(a, alpha_t / a)
        bwd = qdyn.RampProtocol.backward_to_zero(a, fwd.lambda_end())
        r = thermo.loop_friction(spec, fwd, bwd, ctx, cfg.tol, cfg.max_steps)
        rows.append((a, r.relative_entropy, r.w_fric, r.q_rethermalize))
    write_table(cfg, "friction-loop", FRICTION_COLUMNS, rows, cfg.out, {"theta_used": theta, "alpha_t_used": alpha_t})


def _cycle_spec(cfg: RunConfig) -> otto.CycleSpec:
    if cfg.theta is None:
        raise ConfigError("this command needs theta")
    return otto.CycleSpec(
        qdyn.HamiltonianSpec(cfg.theta), cfg.alpha, cfg.stroke_time(), cfg.tau_iso, cfg.beta_c, cfg.beta_h
    )


def cmd_cycle(cfg: RunConfig) -> None:
    spec = _cycle_spec(cfg)
    rep = otto.run_cycle(spec, cfg.tol, cfg.max_steps)
    cols = ["theta", "alpha", "tau_ad", "w_ex", "q_h", "q_c", "power", "eta", "eta_ideal", "w_fric_total"]
    cols += ["pwc", "pwc_literal", "omega1", "omega2"]
    cols += [f"p0_{p.label}" for p in rep.points] + [f"n_{p.label}" for p in rep.points]
    row = [spec.hspec.theta, spec.alpha, spec.tau_ad, rep.w_ex, rep.q_h, rep.q_c, rep.power, rep.eta]
    row += [rep.eta_ideal, rep.w_fric_total, rep.pwc, rep.pwc_literal, rep.points[0].omega, rep.points[1].omega]
    row += [p.p0 for p in rep.points] + [p.n for p in rep.points]
    write_table(cfg, "cycle", cols, [row], cfg.out)

    traj_path = cfg.trajectory
    if traj_path is None and cfg.out not in (None, "", "-"):
        out = Path(cfg.out)
        traj_path = str(out.with_name(out.stem + "_trajectory" + out.suffix))
    if traj_path:
        samples = otto.cycle_trajectory(spec, cfg.samples, cfg.tol, cfg.max_steps)
        rows = [(s.stroke, s.omega, s.n) for s in samples]
        write_table(cfg, "cycle-trajectory", ("stroke", "omega", "n"), rows, traj_path)


def _sweep_spec(cfg: RunConfig, disorder: ensemble.DisorderSpec) -> ensemble.SweepSpec:
    try:
        return ensemble.SweepSpec(parse_grid(cfg.grid), cfg.cycle_params(), disorder)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sweep_rows(rows):
    return [(r.alpha_t_tot, r.w_ex, r.p_over_alpha2, r.eta, r.w_fric, r.status) for r in rows]


def cmd_sweep(cfg: RunConfig) -> None:
    if cfg.theta is None:
        raise ConfigError("sweep needs theta (use disorder-sweep for distributions)")
    spec = _sweep_spec(cfg, ensemble.DisorderSpec.delta(cfg.theta))
    rows = ensemble.sweep_total_time(spec, worker_count())
    write_table(cfg, "sweep", SWEEP_COLUMNS, _sweep_rows(rows), cfg.out)


def cmd_disorder_sweep(cfg: RunConfig) -> None:
    if cfg.disorder is None:
        raise ConfigError("disorder-sweep needs disorder")
    spec = _sweep_spec(cfg, cfg.disorder_spec())
    rows = ensemble.sweep_total_time(spec, worker_count())
    write_table(cfg, "disorder-sweep", SWEEP_COLUMNS, _sweep_rows(rows), cfg.out)


def cmd_pv_curve(cfg: RunConfig) -> None:
    spec = _sweep_spec(cfg, cfg.disorder_spec())
    rows = ensemble.sweep_total_time(spec, worker_count())
    write_table(cfg, "pv-curve", PV_COLUMNS, [(r.alpha_t_tot, r.eta, r.p_over_alpha2) for r in rows], cfg.out)


def _scan_variant(cfg: RunConfig, value: float) -> RunConfig:
    p = cfg.scan_param
    if p == "sigma2":
        return replace(cfg, disorder=f"gaussian:{value!r}", theta=None)
    if p == "theta":
        return replace(cfg, theta=value, disorder=None)
    if p == "beta_h":
        return replace(cfg, beta_h=value)
    return replace(cfg, beta_h=value * cfg.beta_c)


def cmd_max_power(cfg: RunConfig) -> None:
    values = parse_grid(cfg.scan)
    jobs = []
    for v in values:
        try:
            c = _scan_variant(cfg, v).validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        jobs.append(_sweep_spec(c, c.disorder_spec()))
    results = ensemble.map_ordered(_max_power_job, [(s, cfg.refine_tol) for s in jobs], worker_count())
    rows = []
    for v, r in zip(values, results):
        if isinstance(r, OttoError):
            raise r
        rows.append((v, r.alpha_t_max, r.p_max_over_alpha2, r.eta_at_pmax))
    write_table(cfg, "max-power", MAX_POWER_COLUMNS, rows, cfg.out)


def _max_power_job(args):
    spec, refine_tol = args
    try:
        return ensemble.maximize_power(spec, refine_tol)
    except OttoError as exc:
        return exc


def cmd_optics_compile(cfg: RunConfig) -> None:
    spec = _cycle_spec(cfg)
    prog = optics.compile_cycle(spec, cfg.tol)
    if cfg.format == "json":
        recs = []
        for r in prog.records:
            if r.kind == "ROT":
                recs.append({"kind": "ROT", "note": r.note, **asdict(r.angles)})
            else:
                recs.append({"kind": "THERM", "note": r.note, "theta_x": r.theta_x, "target_p0": r.target_p0, "z": r.z})
        text = json.dumps({"config": {**asdict(cfg), "command": "optics-compile"}, "records": recs}, indent=2) + "\n"
    else:
        text = "\n".join(_header(cfg, "optics-compile", {})) + "\n" + prog.serialize()
    _emit(text, cfg.out)


COMMANDS = {
    "friction-loop": cmd_friction_loop,
    "cycle": cmd_cycle,
    "sweep": cmd_sweep,
    "disorder-sweep": cmd_disorder_sweep,
    "pv-curve": cmd_pv_curve,
    "max-power": cmd_max_power,
    "optics-compile": cmd_optics_compile,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--tol", help="propagator tolerance")
    common.add_argument("--nodes", help="quadrature nodes")
    for key in _FIELD_TYPES:
        if key in ("out", "format", "tol", "nodes"):
            continue
        common.add_argument("--" + key.replace("_", "-"), dest=key)

    parser = argparse.ArgumentParser(prog="qotto", description="Finite-time quantum Otto cycle simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MaxOnBoundary as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except (NonConvergence, Infeasible, OttoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
