"""Command-line front end.

Every subcommand resolves its options from, in order of precedence, the
command line, an optional flat ``key=value`` config file, the ``COOP_SEED``
environment variable (seed only), and built-in defaults.  The resolved
configuration is serialized, hashed, and embedded in every output, so a
run can be replayed byte-for-byte from its own artifact.

Exit codes: 0 success, 1 I/O failure, 2 validation failure (including
argparse usage errors).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import CoopSimError, DomainError
from .graphical import (
    STANDARD,
    build_dual,
    estimate_sterile,
    sample_event_log,
    sterile_probability,
)
from .lattice import Torus, survival_estimate
from .mean_field import classify_regime, fixed_points, integrate, transition_curve
from .params import Params, equal_rate_benefit
from . import percolation as blocks_mod
from .experiments import (
    SweepSpec,
    bracket_critical,
    bracket_to_json,
    monotonicity_check,
    sweep_phase_diagram,
    sweep_to_csv,
)

__all__ = ["main", "RunConfig", "parse_config_text"]


def _fmt(x: float) -> str:
    return format(x, ".17g")


# -------------------------------------------------------------- option table


@dataclass(frozen=True, slots=True)
class Opt:
    name: str
    kind: str  # "float" | "int" | "str" | "bool" | "floats"
    default: object
    required: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _convert(opt: Opt, raw: str):
    if opt.kind == "float":
        return float(raw)
    if opt.kind == "int":
        return int(raw)
    if opt.kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise DomainError(f"config value for {opt.name} is not boolean: {raw!r}")
    if opt.kind == "floats":
        return tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    return raw


_SEED = Opt("seed", "int", 0)
_OUT = Opt("out", "str", None)
_CONFIG = Opt("config", "str", None)
_JOBS = Opt("jobs", "int", 1)

# options that steer runtime plumbing only; excluded from the hashed config
_UNHASHED = {"out", "config", "jobs"}

_COMMON_PROCESS = [
    Opt("beta", "float", None, required=True),
    Opt("beta_c", "float", 0.0),
    Opt("beta_d", "float", 0.0),
    Opt("dim", "int", 1),
]

_OPTIONS: dict[str, list[Opt]] = {
    "meanfield": [
        *_COMMON_PROCESS,
        Opt("x0", "float", 0.2),
        Opt("y0", "float", 0.2),
        Opt("t_end", "float", 50.0),
        Opt("dt", "float", 1e-3),
        Opt("sample_interval", "float", 0.5),
        Opt("phi_curve", "bool", False),
        Opt("beta_c_max", "float", 10.0),
        Opt("points", "int", 100),
        _OUT,
        _CONFIG,
    ],
    "simulate": [
        *_COMMON_PROCESS,
        Opt("side", "int", 50),
        Opt("t_end", "float", 50.0),
        Opt("replicas", "int", 100),
        Opt("rho_c", "float", 0.2),
        Opt("rho_d", "float", 0.2),
        _SEED,
        _JOBS,
        _OUT,
        _CONFIG,
    ],
    "sweep": [
        Opt("beta", "float", None, required=True),
        Opt("beta_c_grid", "floats", None, required=True),
        Opt("beta_d_grid", "floats", None, required=True),
        Opt("dim", "int", 1),
        Opt("side", "int", 50),
        Opt("t_end", "float", 50.0),
        Opt("replicas", "int", 100),
        Opt("rho_c", "float", 0.2),
        Opt("rho_d", "float", 0.2),
        _SEED,
        _JOBS,
        _OUT,
        _CONFIG,
    ],
    "couple": [
        *_COMMON_PROCESS,
        Opt("delta_c", "float", 0.0),
        Opt("delta_d", "float", 0.0),
        Opt("side", "int", 24),
        Opt("t_end", "float", 4.0),
        Opt("replicas", "int", 100),
        Opt("rho_c", "float", 0.25),
        Opt("rho_d", "float", 0.25),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "dual": [
        *_COMMON_PROCESS,
        Opt("side", "int", 20),
        Opt("t_end", "float", 3.0),
        Opt("site", "int", 0),
        Opt("at", "float", None),
        Opt("flavor", "str", STANDARD),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "bracket": [
        Opt("beta", "float", None, required=True),
        Opt("beta_d", "float", 0.0),
        Opt("dim", "int", 1),
        Opt("side", "int", 40),
        Opt("t_end", "float", 120.0),
        Opt("replicas", "int", 40),
        Opt("rho_c", "float", 0.25),
        Opt("rho_d", "float", 0.25),
        Opt("tau", "float", 0.9),
        Opt("lo", "float", 0.0),
        Opt("hi", "float", 16.0),
        Opt("budget", "int", 10),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "sterile": [
        Opt("beta", "float", None, required=True),
        Opt("beta_c", "float", 0.0),
        Opt("side", "int", 60),
        Opt("t_end", "float", 20.0),
        Opt("replicas", "int", 10_000),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "blocks:a1": [
        Opt("T", "float", 1.0),
        Opt("dim", "int", 1),
        Opt("replicas", "int", 10_000),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "blocks:a2": [
        Opt("beta", "float", None, required=True),
        Opt("beta_d", "float", 0.0),
        Opt("dim", "int", 1),
        Opt("T", "float", 1.0),
        Opt("delta", "float", 0.001),
        Opt("replicas", "int", 10_000),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "blocks:a3": [
        Opt("beta", "float", None, required=True),
        Opt("beta_c", "float", 0.0),
        Opt("T", "float", 1.0),
        Opt("delta", "float", 0.5),
        Opt("dim", "int", 1),
        _OUT,
        _CONFIG,
    ],
    "blocks:cplus": [
        Opt("L", "int", 2),
        Opt("dim", "int", 1),
        Opt("rho", "float", 0.001),
        Opt("replicas", "int", 10_000),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "blocks:spread": [
        Opt("beta", "float", None, required=True),
        Opt("beta_d", "float", None, required=True),
        Opt("L", "int", 4),
        Opt("replicas", "int", 40),
        _SEED,
        _OUT,
        _CONFIG,
    ],
    "blocks:perc": [
        Opt("epsilon", "float", 0.05),
        Opt("levels", "int", 20),
        Opt("width", "int", 30),
        _SEED,
        _OUT,
        _CONFIG,
    ],
}


# ------------------------------------------------------------ configuration


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Fully resolved options for one run, in serializable string form."""

    command: str
    entries: tuple[tuple[str, str], ...]

    def to_text(self) -> str:
        lines = [f"command={self.command}"]
        lines += [f"{k}={v}" for k, v in self.entries]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def as_dict(self) -> dict[str, str]:
        return {"command": self.command, **dict(self.entries)}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments ignored."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise DomainError(f"config line {lineno} is not key=value: {line!r}")
        key, _, raw = body.partition("=")
        values[key.strip()] = raw.strip()
    return values


def _value_to_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _resolve(command: str, ns: argparse.Namespace) -> tuple[dict, RunConfig]:
    opts = _OPTIONS[command]
    file_values: dict[str, str] = {}
    config_path = getattr(ns, "config", None)
    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            file_values = parse_config_text(fh.read())

    resolved: dict[str, object] = {}
    for opt in opts:
        value = getattr(ns, opt.name, None)
        if value is None and opt.name in file_values:
            value = _convert(opt, file_values[opt.name])
        if value is None and opt.name == "seed" and "COOP_SEED" in os.environ:
            value = int(os.environ["COOP_SEED"])
        if value is None:
            value = opt.default
        if value is None and opt.required:
            raise DomainError(f"missing required option {opt.flag}")
        resolved[opt.name] = value

    entries = tuple(
        (name, _value_to_text(value))
        for name, value in sorted(resolved.items())
        if name not in _UNHASHED and value is not None
    )
    return resolved, RunConfig(command=command, entries=entries)


def _header_lines(cfg: RunConfig, seed: object) -> list[str]:
    lines = [
        f"# coopsim {__version__}",
        f"# config_hash={cfg.digest()}",
        f"# seed={seed if seed is not None else '-'}",
    ]
    lines += [f"# cfg command={cfg.command}"]
    lines += [f"# cfg {k}={v}" for k, v in cfg.entries]
    return lines


def _json_payload(cfg: RunConfig, seed: object, result: dict) -> str:
    doc = {
        "version": __version__,
        "config_hash": cfg.digest(),
        "seed": seed,
        "config": cfg.as_dict(),
        "result": result,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------- subcommands


def _cmd_meanfield(v: dict, cfg: RunConfig) -> str:
    p = Params(v["beta"], v["beta_c"], v["beta_d"], v["dim"])
    lines = _header_lines(cfg, None)
    if v["phi_curve"]:
        if v["points"] < 2 or v["beta_c_max"] <= 0:
            raise DomainError("phi curve needs points >= 2 and beta_c_max > 0")
        lines.append("beta_c,phi")
        for i in range(v["points"]):
            bc = v["beta_c_max"] * i / (v["points"] - 1)
            lines.append(f"{_fmt(bc)},{_fmt(transition_curve(bc, v['beta']))}")
        return "\n".join(lines) + "\n"

    traj = integrate((v["x0"], v["y0"]), p, v["t_end"], dt=v["dt"])
    reports = [
        {
            "kind": fp.kind,
            "x": _fmt(fp.x),
            "y": _fmt(fp.y),
            "in_simplex": fp.in_simplex,
            "locally_stable": fp.locally_stable,
        }
        for fp in fixed_points(p)
    ]
    lines.append(f"# regime={classify_regime(p)}")
    lines.append(
        f"# terminal x={_fmt(traj.final.x)} y={_fmt(traj.final.y)}"
    )
    lines.append("# fixed_points=" + json.dumps(reports, sort_keys=True))
    lines.append("t,x,y")
    step = max(1, round(v["sample_interval"] / v["dt"]))
    idx = list(range(0, len(traj), step))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    for i in idx:
        lines.append(f"{_fmt(float(traj.t[i]))},{_fmt(float(traj.x[i]))},{_fmt(float(traj.y[i]))}")
    return "\n".join(lines) + "\n"


def _cmd_simulate(v: dict, cfg: RunConfig) -> str:
    p = Params(v["beta"], v["beta_c"], v["beta_d"], v["dim"])
    result = survival_estimate(
        p,
        v["side"],
        v["t_end"],
        v["replicas"],
        v["rho_c"],
        v["rho_d"],
        v["seed"],
        jobs=v["jobs"],
    )
    lines = _header_lines(cfg, v["seed"])
    for name in (
        "freq_c_alive",
        "freq_d_alive",
        "freq_c_wins",
        "freq_d_wins",
        "freq_coexist",
        "freq_both_extinct",
    ):
        lines.append(f"# {name}={_fmt(getattr(result, name))}")
    lines.append("replica,n_c,n_d,n_e")
    for o in result.outcomes:
        lines.append(f"{o.index},{o.n_c},{o.n_d},{o.n_e}")
    return "\n".join(lines) + "\n"


def _cmd_sweep(v: dict, cfg: RunConfig) -> str:
    spec = SweepSpec(
        beta=v["beta"],
        beta_c_grid=v["beta_c_grid"],
        beta_d_grid=v["beta_d_grid"],
        side=v["side"],
        dim=v["dim"],
        horizon=v["t_end"],
        replicas=v["replicas"],
        master_seed=v["seed"],
        rho_c=v["rho_c"],
        rho_d=v["rho_d"],
    )
    rows = sweep_phase_diagram(spec, jobs=v["jobs"])
    return "\n".join(_header_lines(cfg, v["seed"])) + "\n" + sweep_to_csv(spec, rows)


def _cmd_couple(v: dict, cfg: RunConfig) -> str:
    base = Params(v["beta"], v["beta_c"], v["beta_d"], v["dim"])
    rep = monotonicity_check(
        base,
        v["delta_c"],
        v["delta_d"],
        v["replicas"],
        np.random.default_rng(v["seed"]),
        side=v["side"],
        horizon=v["t_end"],
        rho_c=v["rho_c"],
        rho_d=v["rho_d"],
    )
    result = {
        "base": {"beta": _fmt(base.beta), "beta_c": _fmt(base.beta_c), "beta_d": _fmt(base.beta_d)},
        "favored": {
            "beta": _fmt(rep.favored.beta),
            "beta_c": _fmt(rep.favored.beta_c),
            "beta_d": _fmt(rep.favored.beta_d),
        },
        "replicas": rep.replicas,
        "c_sets_nested_at_horizon": rep.c_sets_nested_at_horizon,
        "d_sets_nested_at_horizon": rep.d_sets_nested_at_horizon,
        "identical_trajectories": rep.identical_trajectories,
        "freq_c_alive_favored": _fmt(rep.freq_c_alive_favored),
        "freq_c_alive_base": _fmt(rep.freq_c_alive_base),
        "freq_d_alive_favored": _fmt(rep.freq_d_alive_favored),
        "freq_d_alive_base": _fmt(rep.freq_d_alive_base),
    }
    return _json_payload(cfg, v["seed"], result)


def _cmd_dual(v: dict, cfg: RunConfig) -> str:
    p = Params(v["beta"], v["beta_c"], v["beta_d"], v["dim"])
    torus = Torus(v["side"], dim=v["dim"])
    rng = np.random.default_rng(v["seed"])
    log = sample_event_log(p, torus, v["t_end"], rng, flavor=v["flavor"])
    origin_time = v["at"] if v["at"] is not None else v["t_end"]
    tree = build_dual(log, v["site"], origin_time)
    lines = _header_lines(cfg, v["seed"])
    lines.append(
        f"# origin site={tree.origin_site} time={_fmt(tree.origin_time)}"
        f" horizon={_fmt(tree.horizon)} nodes={len(tree.nodes)}"
    )
    lines.append("index\tsite\tsigma_start\tsigma_stop\tstopped_by_cross")
    for node in tree.nodes:
        idx = "(" + ",".join(str(i) for i in node.index) + ")"
        lines.append(
            f"{idx}\t{node.site}\t{_fmt(node.sigma_start)}\t{_fmt(node.sigma_stop)}"
            f"\t{'yes' if node.stopped_by_cross else 'no'}"
        )
    return "\n".join(lines) + "\n"


def _cmd_bracket(v: dict, cfg: RunConfig) -> str:
    bracket = bracket_critical(
        v["beta"],
        v["beta_d"],
        dim=v["dim"],
        side=v["side"],
        horizon=v["t_end"],
        replicas=v["replicas"],
        rho_c=v["rho_c"],
        rho_d=v["rho_d"],
        master_seed=v["seed"],
        tau=v["tau"],
        lo=v["lo"],
        hi=v["hi"],
        budget=v["budget"],
    )
    body = json.loads(bracket_to_json(bracket, v["beta"], v["beta_d"], v["seed"]))
    return _json_payload(cfg, v["seed"], body)


def _cmd_sterile(v: dict, cfg: RunConfig) -> str:
    freq, stderr = estimate_sterile(
        v["beta"],
        v["beta_c"],
        v["replicas"],
        np.random.default_rng(v["seed"]),
        side=v["side"],
        window=v["t_end"],
    )
    closed = sterile_probability(v["beta"], v["beta_c"])
    result = {
        "estimate": _fmt(freq),
        "stderr": _fmt(stderr),
        "closed_form": _fmt(closed),
        "abs_z": _fmt(abs(freq - closed) / stderr if stderr > 0 else float("inf")),
    }
    return _json_payload(cfg, v["seed"], result)


def _cmd_blocks(action: str, v: dict, cfg: RunConfig) -> str:
    rng = np.random.default_rng(v.get("seed"))
    if action == "a1":
        freq, stderr = blocks_mod.estimate_a1(v["T"], v["dim"], v["replicas"], rng)
        result = {
            "estimate": _fmt(freq),
            "stderr": _fmt(stderr),
            "closed_form": _fmt(blocks_mod.prob_a1(v["T"], v["dim"])),
        }
    elif action == "a2":
        p = Params(v["beta"], 0.0, v["beta_d"], v["dim"])
        freq, stderr = blocks_mod.estimate_a2(
            p, v["T"], v["delta"], v["dim"], v["replicas"], rng
        )
        result = {
            "estimate": _fmt(freq),
            "stderr": _fmt(stderr),
            "lower_bound": _fmt(blocks_mod.bound_a2(v["T"], v["delta"], v["dim"], p)),
        }
    elif action == "a3":
        result = {
            "lower_bound": _fmt(
                blocks_mod.prob_a3_bound(v["beta"], v["beta_c"], v["T"], v["delta"], v["dim"])
            )
        }
    elif action == "cplus":
        freq, stderr = blocks_mod.estimate_c_plus_absence(
            v["L"], v["dim"], v["rho"], v["replicas"], rng
        )
        result = {
            "estimate": _fmt(freq),
            "stderr": _fmt(stderr),
            "closed_form": _fmt(blocks_mod.c_plus_absence_prob(v["L"], v["dim"], v["rho"])),
        }
    elif action == "spread":
        p = Params(v["beta"], equal_rate_benefit(v["beta_d"], 1), v["beta_d"], 1)
        spec = blocks_mod.BlockSpec.for_scale(v["L"])
        res = blocks_mod.block_spread_estimate(p, spec, v["replicas"], rng)
        result = {
            "frequency": _fmt(res.frequency),
            "stderr": _fmt(res.stderr),
            "replicas": res.replicas,
            "L": spec.L,
            "T": _fmt(spec.T),
            "beta_c": _fmt(p.beta_c),
        }
    elif action == "perc":
        field = blocks_mod.percolate(
            v["epsilon"], v["levels"], v["width"], sources="all", rng=rng
        )
        lines = _header_lines(cfg, v.get("seed"))
        wet = ",".join(str(int(n)) for n in field.wet_levels())
        lines.append(f"# wet_per_level={wet}")
        return "\n".join(lines) + "\n" + field.dump_rle()
    else:  # pragma: no cover - argparse restricts choices
        raise DomainError(f"unknown blocks action {action!r}")
    return _json_payload(cfg, v.get("seed"), result)


# ------------------------------------------------------------------ driver


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopsim",
        description="Cooperator/defector lattice dynamics toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"coopsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_options(p: argparse.ArgumentParser, key: str) -> None:
        for opt in _OPTIONS[key]:
            if opt.kind == "bool":
                p.add_argument(opt.flag, dest=opt.name, action=argparse.BooleanOptionalAction, default=None)
            elif opt.kind == "floats":
                p.add_argument(
                    opt.flag,
                    dest=opt.name,
                    type=lambda raw: tuple(float(t) for t in raw.split(",") if t.strip()),
                    default=None,
                    metavar="X,Y,...",
                )
            else:
                p.add_argument(
                    opt.flag,
                    dest=opt.name,
                    type={"float": float, "int": int, "str": str}[opt.kind],
                    default=None,
                )

    for name in ("meanfield", "simulate", "sweep", "couple", "dual", "bracket", "sterile"):
        add_options(sub.add_parser(name), name)

    blocks = sub.add_parser("blocks")
    blocks_sub = blocks.add_subparsers(dest="action", required=True)
    for action in ("a1", "a2", "a3", "cplus", "spread", "perc"):
        add_options(blocks_sub.add_parser(action), f"blocks:{action}")
    return parser


_DISPATCH = {
    "meanfield": _cmd_meanfield,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "couple": _cmd_couple,
    "dual": _cmd_dual,
    "bracket": _cmd_bracket,
    "sterile": _cmd_sterile,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    key = ns.command
    if key == "blocks":
        key = f"blocks:{ns.action}"
    try:
        values, cfg = _resolve(key, ns)
        if ns.command == "blocks":
            payload = _cmd_blocks(ns.action, values, cfg)
        else:
            payload = _DISPATCH[ns.command](values, cfg)
    except CoopSimError as exc:
        print(f"coopsim: error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 2
    except OSError as exc:
        print(f"coopsim: i/o error: {exc}", file=sys.stderr)
        return 1

    out_path = getattr(ns, "out", None) or values.get("out")
    if out_path:
        try:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(payload)
        except OSError as exc:
            print(f"coopsim: i/o error: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(payload)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
