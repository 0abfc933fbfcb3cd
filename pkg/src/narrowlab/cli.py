"""Command-line harness.

Exit codes: 0 when every check passes, 1 when any fails, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .norm_engine import STRATEGIES
from .operator_zoo import ZOO_GRAMMAR
from .verify import (DEFAULT_TOLERANCE_RULE, convergence_passed, convergence_run, cp_table,
                     daugavet_check, format_complex, narrowness_rows, parse_complex,
                     parse_tolerance_rule, single_norm_rows, theorem_check)

SCHEMA = "narrowlab.report/1"

DEFAULTS = {
    "p": "1,1.5,2,3",
    "gamma": "0,0.5,1,1+0.5i",
    "n": "256",
    "zoo": "mean,condexp:m=2,condexp:m=4,condexp:m=8,kernel:st,kernel:exp,rankone:ones",
    "seed": "0",
    "budget": "50000",
    "tolerance_rule": "%g:%g" % DEFAULT_TOLERANCE_RULE,
    "format": "csv",
    "out": None,
    "strategy": "auto",
    "restarts": "32",
    "levels": "1,2,3,4,5,6,7,8,9,10",
    "blocks": "4",
    "scales": "0.5,1",
    "support": "all",
    "threshold": "0.01",
    "jobs": "1",
}

CONFIG_HELP = """\
Config files hold one "key = value" per line; keys are long flag names
(dashes or underscores), "#" starts a comment. Flags override the file.
"""


COMMAND_FLAGS: dict[str, tuple] = {}


class UsageError(Exception):
    pass


def read_config(path: str) -> dict:
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        cfg[key] = val
    return cfg


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _settings(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else cfg.get(key, default)
    return merged


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", help="master seed (default 0)")

    parser = argparse.ArgumentParser(
        prog="narrowlab",
        description="Finite-grid checks of norm estimates for narrow operators on L^p([0,1]).",
        epilog=ZOO_GRAMMAR + "\n" + CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, *flags):
        sp = sub.add_parser(name, parents=[common], help=help_, epilog=ZOO_GRAMMAR,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        COMMAND_FLAGS[name] = ("seed",) + flags
        for f in flags:
            sp.add_argument(f"--{f.replace('_', '-')}", dest=f)
        return sp

    add("cp-table", "C_p for a list of exponents (dual exponents added)", "p")
    add("norm", "induced p-norms of zoo operators", "zoo", "n", "p", "strategy", "restarts")
    add("minmod", "minimal moduli of zoo operators", "zoo", "n", "p", "strategy", "restarts")
    add("verify-theorem", "sweep the zoo against ||I-T|| + inf||(gI-T)u|| >= ||I-gE||",
        "zoo", "n", "p", "gamma", "tolerance_rule", "restarts", "jobs")
    add("daugavet", "exact p=1 check of ||I-T|| = 1+||T|| for T = c E^G",
        "blocks", "scales", "n")
    add("narrowness", "best mean-zero sign value per dyadic level",
        "zoo", "levels", "p", "support", "budget")
    add("convergence", "||I-E|| on grids 2^k against C_p", "p", "levels", "threshold", "restarts")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        s = _settings(args)
        rows, passed = _dispatch(args.command, s)
    except (UsageError, ValueError) as e:
        print(f"narrowlab: error: {e}", file=sys.stderr)
        return 2
    text = render(args.command, s, rows, passed)
    if s["out"]:
        Path(s["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if passed else 1


def _dispatch(cmd: str, s: dict):
    seed = int(s["seed"])
    if cmd == "cp-table":
        return cp_table(_floats(s["p"])), True
    if cmd in ("norm", "minmod"):
        if s["strategy"] not in STRATEGIES:
            raise UsageError(f"unknown strategy {s['strategy']!r}")
        rows = single_norm_rows(s["zoo"], _floats(s["p"]), int(s["n"]),
                                "max" if cmd == "norm" else "min", s["strategy"], seed,
                                int(s["restarts"]))
        return rows, True
    if cmd == "verify-theorem":
        gammas = [parse_complex(g) for g in s["gamma"].split(",") if g.strip()]
        checks = theorem_check(s["zoo"], _floats(s["p"]), gammas, int(s["n"]), seed,
                               parse_tolerance_rule(s["tolerance_rule"]),
                               int(s["restarts"]), int(s["jobs"]))
        rows = [c.as_row() for c in checks]
        return rows, all(c.passed is not False for c in checks)
    if cmd == "daugavet":
        rows = daugavet_check(_ints(s["blocks"]), _floats(s["scales"]), _ints(s["n"]))
        return rows, all(r["pass"] for r in rows)
    if cmd == "narrowness":
        ps = _floats(s["p"])
        if len(ps) != 1:
            raise UsageError("narrowness takes a single --p")
        return narrowness_rows(s["zoo"], _ints(s["levels"]), ps[0], s["support"],
                               int(s["budget"]), seed), True
    if cmd == "convergence":
        rows = convergence_run(_floats(s["p"]), _ints(s["levels"]), seed,
                               float(s["threshold"]), int(s["restarts"]))
        return rows, convergence_passed(rows)
    raise UsageError(f"unknown command {cmd!r}")


def _cell(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, complex):
        return format_complex(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(cmd: str, settings: dict, rows: list[dict], passed: bool) -> str:
    if settings["format"] == "json":
        doc = {
            "schema": SCHEMA,
            "command": cmd,
            "params": {k: settings[k] for k in sorted(COMMAND_FLAGS.get(cmd, ()))},
            "passed": passed,
            "rows": rows,
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        keys = list(rows[0])
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            if cmd == "cp-table":
                w.writerow(["%.12g" % r[k] for k in keys])
            else:
                w.writerow([_cell(r.get(k)) for k in keys])
    return buf.getvalue()


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
