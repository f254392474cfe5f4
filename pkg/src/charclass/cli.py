"""Command-line entry point: verification runs, joint solve, modular checks, snapshots.

Exit codes: 0 all checks pass, 1 a check failed or stalled, 2 usage or
configuration error, 3 a truncation cap was too small (a sufficient cap is
printed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, modular
from .report import CheckResult, Report, timed
from .ring import CapError, LaurentUnderflow
from .scenarios import constructions as B
from .scenarios import pipelines

CONFIG_ENV = "CHARCLASS_CONFIG"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

# key -> (type, must be positive)
KEYS = {
    "order": (int, True),
    "qorder": (int, True),
    "hfloor": (int, False),
    "n": (int, True),
    "jmax": (int, True),
    "jmax3": (int, True),
    "jmax4": (int, True),
    "kill_order": (int, True),
    "kill_qorder": (int, True),
    "odd_order": (int, True),
    "weight": (int, True),
    "xorder": (int, True),
    "kmax": (int, True),
    "jobs": (int, True),
    "only_n3": (bool, False),
    "allow_large": (bool, False),
    "format": (str, False),
    "snapshot_dir": (str, False),
    "fixture_override": (str, False),
}

# what --order means for each verify scenario
ORDER_KEY = {
    "baby": "jmax",
    "blowup": "series",   # total degree of the expansion; survivor cap = order - 6
    "braid": "kill_order",
    "atiyah": "jmax",
    "grassmann": "jmax",
}

SNAPSHOT_DEFAULT = ("baby", "blowup", "atiyah", "modular-ode", "modular-quasijacobi")


class ConfigError(Exception):
    pass


def _parse_value(key: str, raw: str):
    typ, positive = KEYS[key]
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if typ is int:
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
        if positive and v <= 0:
            raise ConfigError(f"{key}: must be positive, got {v}")
        return v
    return raw.strip()


def load_config(path: str | os.PathLike) -> dict:
    """Flat ``key = value`` file; '#' starts a comment; unknown keys are rejected."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {k!r}")
        out[k] = _parse_value(k, v)
    return out


def _check_config(cfg: dict):
    fmt = cfg.get("format", "text")
    if fmt not in ("text", "json"):
        raise ConfigError(f"format must be text or json, got {fmt!r}")
    if "hfloor" in cfg and cfg["hfloor"] >= 0:
        raise ConfigError("hfloor must be negative")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p):
    g = p.add_argument_group("caps and output")
    g.add_argument("--order", type=str, help="main truncation cap (meaning depends on the command)")
    g.add_argument("--qorder", type=str, help="q-adic cap")
    g.add_argument("--hfloor", type=str, help="lowest power of h kept (negative)")
    g.add_argument("--jmax", type=str, help="highest survivor degree extracted")
    g.add_argument("--n", type=str, help="Grassmannian size (3 or 4)")
    g.add_argument("--format", choices=("text", "json"))
    g.add_argument("--jobs", type=str, help="worker processes")
    g.add_argument("--config", help=f"flat key = value file (default: ${CONFIG_ENV})")
    g.add_argument("--snapshot-dir", dest="snapshot_dir")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other config key, repeatable")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="charclass", description="Exact verification of characteristic-class "
                "invariance relations.")
    p.add_argument("--version", action="version", version=f"charclass {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run a scenario end to end")
    v.add_argument("scenario", choices=sorted(pipelines.RUNNERS))
    _common(v)

    j = sub.add_parser("solve-joint", help="joint elimination over the n = 3, 4 relations")
    j.add_argument("--only-n3", action="store_true", dest="only_n3")
    j.add_argument("--fixture", dest="fixture_override",
                   help="expected table file replacing the shipped one")
    _common(j)

    m = sub.add_parser("modular", help="q-series identities")
    m.add_argument("check", choices=("theta", "ode", "quasijacobi", "degenerations", "fourier"))
    m.add_argument("--xorder", type=str)
    m.add_argument("--kmax", type=str)
    _common(m)

    s = sub.add_parser("snapshot", help="write or compare canonical report snapshots")
    s.add_argument("action", choices=("write", "compare"))
    s.add_argument("targets", nargs="*", help=f"default: {' '.join(SNAPSHOT_DEFAULT)}")
    _common(s)
    return p


def resolve_config(args) -> dict:
    """File (``--config`` or $CHARCLASS_CONFIG) first, then flags on top."""
    cfg = {}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        cfg.update(load_config(path))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, val = item.split("=", 1)
        k = k.strip().replace("-", "_")
        if k not in KEYS:
            raise ConfigError(f"unknown key {k!r}")
        cfg[k] = _parse_value(k, val)
    for k in ("order", "qorder", "hfloor", "jmax", "n", "jobs", "xorder", "kmax"):
        raw = getattr(args, k, None)
        if raw is not None:
            cfg[k] = _parse_value(k, raw)
    for k in ("format", "snapshot_dir", "fixture_override"):
        raw = getattr(args, k, None)
        if raw is not None:
            cfg[k] = raw
    if getattr(args, "only_n3", False):
        cfg["only_n3"] = True
    _check_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# commands

def _scenario_cfg(name: str, cfg: dict) -> dict:
    run = {k: v for k, v in cfg.items() if k not in ("format", "snapshot_dir")}
    if "order" in run:
        order = run.pop("order")
        key = ORDER_KEY[name]
        if key == "series":
            depth = B.blowup().recipe.total_order
            if order <= depth:
                raise ConfigError(f"--order must exceed {depth} for {name}")
            run.setdefault("jmax", order - depth)
        else:
            run.setdefault(key, order)
    if name == "grassmann" and run.get("n", 3) not in (3, 4):
        if not run.get("allow_large"):
            raise ConfigError("only n = 3 and n = 4 are supported; set allow_large = true for more")
    return run


def cmd_verify(name: str, cfg: dict) -> Report:
    checks, art = pipelines.RUNNERS[name](_scenario_cfg(name, cfg))
    return Report(f"verify {name}", _echo(cfg), checks, art, __version__)


def cmd_solve_joint(cfg: dict) -> Report:
    run = {k: v for k, v in cfg.items() if k not in ("format", "snapshot_dir")}
    if "jmax" in run:
        j = run.pop("jmax")
        run.setdefault("jmax3", j)
        run.setdefault("jmax4", j)
    if "fixture_override" in run:
        try:
            run["fixture_override"] = Path(run["fixture_override"]).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read fixture: {e.strerror}") from None
    checks, art = pipelines.run_joint(run)
    return Report("solve-joint", _echo(cfg), checks, art, __version__)


def cmd_modular(check: str, cfg: dict) -> Report:
    qc = cfg.get("qorder")
    checks = []
    with timed() as tm:
        if check == "theta":
            checks.append(modular.check_theta_expansion(cfg.get("xorder") or cfg.get("order") or 10,
                                                        qc or 4))
        elif check == "ode":
            checks.append(modular.check_u_ode(cfg.get("kmax") or 6, qc or 4))
            checks.append(modular.check_v_ode(cfg.get("kmax") or 6, qc or 4))
        elif check == "quasijacobi":
            checks += modular.check_quasijacobi(cfg.get("order") or 5, qc or 3,
                                                cfg.get("weight") or 8)
            checks.append(modular.capital_E_check(cfg.get("order") or 5, qc or 3,
                                                  cfg.get("weight") or 8))
        elif check == "degenerations":
            checks += modular.degeneration_checks(qc or 3, cfg.get("order") or 6)
        elif check == "fourier":
            checks.append(modular.check_fourier(cfg.get("order") or 6, qc or 3))
    if len(checks) == 1 and not checks[0].seconds:
        checks[0].seconds = tm.seconds
    return Report(f"modular {check}", _echo(cfg), checks, {}, __version__)


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("format", "snapshot_dir", "jobs")}


def _run_target(target: str, cfg: dict) -> Report:
    if target in pipelines.RUNNERS:
        return cmd_verify(target, cfg)
    if target == "joint":
        return cmd_solve_joint(cfg)
    if target.startswith("modular-"):
        return cmd_modular(target.split("-", 1)[1], cfg)
    raise ConfigError(f"unknown snapshot target {target!r}")


def cmd_snapshot(action: str, targets, cfg: dict) -> tuple:
    """Returns (Report, list of (target, text)) for write, comparison checks for compare."""
    d = Path(cfg.get("snapshot_dir") or "snapshots")
    targets = list(targets) or list(SNAPSHOT_DEFAULT)
    checks = []
    for t in targets:
        rep = _run_target(t, cfg)
        text = rep.to_json(timings=False)
        path = d / f"{t}.json"
        if action == "write":
            d.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            checks.append(CheckResult(f"write {t}", rep.status == "pass",
                                      f"{path} ({rep.status})"))
            continue
        if not path.exists():
            checks.append(CheckResult(f"compare {t}", False, f"no snapshot at {path}"))
            continue
        old = path.read_text()
        if old == text:
            checks.append(CheckResult(f"compare {t}", True, "identical"))
            continue
        try:
            old_cfg = json.loads(old).get("config")
        except ValueError:
            old_cfg = None
        if old_cfg != json.loads(text)["config"]:
            checks.append(CheckResult(f"compare {t}", False,
                                      f"config mismatch: snapshot {old_cfg}, current "
                                      f"{json.loads(text)['config']}"))
        else:
            checks.append(CheckResult(f"compare {t}", False,
                                      "report differs: " + _first_diff(old, text)))
    return Report(f"snapshot {action}", _echo(cfg), checks, {"dir": str(d)}, __version__)


def _first_diff(a: str, b: str) -> str:
    for n, (x, y) in enumerate(zip(a.splitlines(), b.splitlines()), 1):
        if x != y:
            return f"line {n}: {x.strip()!r} -> {y.strip()!r}"
    return "length differs"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            rep = cmd_verify(args.scenario, cfg)
        elif args.command == "solve-joint":
            rep = cmd_solve_joint(cfg)
        elif args.command == "modular":
            rep = cmd_modular(args.check, cfg)
        else:
            rep = cmd_snapshot(args.action, args.targets, cfg)
    except ConfigError as e:
        print(f"charclass: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CapError as e:
        hint = '' if e.suggested is None or "needs" in str(e) else f"; try a cap of at least {e.suggested}"
        print(f"charclass: cap overflow: {e}{hint}", file=sys.stderr)
        return EXIT_CAP
    except LaurentUnderflow as e:
        print(f"charclass: cap overflow: {e}; lower --hfloor", file=sys.stderr)
        return EXIT_CAP
    out = rep.to_json() if cfg.get("format") == "json" else rep.to_text()
    sys.stdout.write(out)
    return EXIT_OK if rep.status == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
