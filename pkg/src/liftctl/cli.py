"""Command-line front end.

    liftctl run         one closed-loop run, trajectory CSV
    liftctl montecarlo  batch of sampled runs, one summary row per trial
    liftctl regions     admissible-set membership on a state grid
    liftctl verify      built-in oracle suites

Exit status: 0 on success, 1 on invalid input, 2 when a verify suite fails.
``--config FILE`` reads flat ``key=value`` lines named after the long flags
(``x1bar=2``, ``rho2=switching``); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from .admissibility import regions_to_csv, sample_regions
from .controller import CommandSignal
from .exceptions import LiftctlError
from .lifting import PAIR_NAMES
from .plant import PLANTS
from .sim import RunConfig, monte_carlo, run
from .verify import SUITES, run_suite

__all__ = ["build_parser", "main", "read_config"]

SEED_ENV = "LIFTCTL_SEED"
IC_MODES = ("deadbeat-feasible", "admissible")


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for flags whose default is spelled out in the help."""

    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config(path: str) -> dict[str, str]:
    """Parse a key=value file; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected key=value, got {line!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("system")
    g.add_argument("--plant", default="double-integrator", choices=sorted(PLANTS))
    g.add_argument("--x1bar", type=float, default=2.0, help="position bound")
    g.add_argument("--x2bar", type=float, default=1.0, help="velocity bound")
    g.add_argument("--sigmoid", default="atanh", choices=PAIR_NAMES, help="sigmoid pair for x1")
    g.add_argument("--sigmoid2", default=None, choices=PAIR_NAMES,
                   help="sigmoid pair for x2 (default: same as --sigmoid)")
    g.add_argument("--guard-band", type=float, default=1e-9,
                   help="refuse to lift states within this fraction of the bound")
    g = p.add_argument_group("controller")
    g.add_argument("--rho1", type=float, default=0.0, help="first-step contraction gain")
    g.add_argument("--rho2", default="switching",
                   help="second-step gain: switching, deadbeat or fixed:<value>")
    g.add_argument("--command", default="const:0",
                   help="reference: const:<v> or sin:A=<a>,omega=<w>")
    g.add_argument("--freeze-command", action="store_true",
                   help="hold the command at x1d(k) over the lookahead")
    g.add_argument("--allow-unproven-rho1", action="store_true",
                   help="permit rho1 != 0, for which invariance is not established")
    g.add_argument("--steps", type=int, default=50, help="horizon K")
    g.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${SEED_ENV}, else 0)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="liftctl", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--config", default=None, help="key=value file of flag defaults")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one trajectory", formatter_class=fmt)
    _common(p)
    p.add_argument("--x10", type=float, default=None, help="initial position (default: sampled)")
    p.add_argument("--x20", type=float, default=None, help="initial velocity (default: sampled)")

    p = sub.add_parser("montecarlo", help="batch of sampled trajectories", formatter_class=fmt)
    _common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ic-mode", default="deadbeat-feasible", choices=IC_MODES,
                   help="deadbeat-feasible also requires |x1+x2-x1d(0)| < x2bar")
    p.add_argument("--random-command", action="store_true",
                   help="draw a constant command per trial instead of --command")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("regions", help="sample the admissible sets on a grid", formatter_class=fmt)
    _common(p)
    p.add_argument("--resolution", type=int, default=101, help="grid nodes per axis")
    p.add_argument("--k", type=int, default=0, help="time step at which the sets are taken")

    p = sub.add_parser("verify", help="run the oracle suites", formatter_class=fmt)
    p.add_argument("--suite", default="all", choices=("all", *SUITES))
    p.add_argument("--out", default=None, help="CSV report file (text summary goes to stdout)")
    return parser


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            values = read_config(known.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        known_keys = set()
        for sp in subs.choices.values():
            dests = {a.dest for a in sp._actions} - {"help"}
            known_keys |= dests
            try:
                sp.set_defaults(**{k: _coerce(sp, k, v) for k, v in values.items() if k in dests})
            except ValueError as exc:
                parser.error(f"{known.config}: {exc}")
        unknown = sorted(set(values) - known_keys)
        if unknown:
            parser.error(f"{known.config}: unknown keys {', '.join(unknown)}")
    return parser.parse_args(argv)


def _coerce(sp: argparse.ArgumentParser, dest: str, text: str):
    action = next(a for a in sp._actions if a.dest == dest)
    if isinstance(action, argparse._StoreTrueAction):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"config key {dest}: expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    return action.type(text) if action.type else text


def _seed(ns: argparse.Namespace) -> int:
    if ns.seed is not None:
        return ns.seed
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _config(ns: argparse.Namespace, **extra) -> RunConfig:
    return RunConfig(
        x1_bar=ns.x1bar, x2_bar=ns.x2bar, steps=ns.steps, command=CommandSignal.parse(ns.command),
        rho1=ns.rho1, rho2=ns.rho2, sigmoid=ns.sigmoid, sigmoid2=ns.sigmoid2, plant=ns.plant,
        seed=_seed(ns), freeze_command=ns.freeze_command,
        allow_unproven_rho1=ns.allow_unproven_rho1, guard_band=ns.guard_band, **extra,
    )


def _fixed_rho2(text: str) -> float:
    text = text.strip()
    if text == "deadbeat":
        return 0.0
    if text.startswith("fixed:"):
        text = text[len("fixed:"):]
    try:
        return float(text)
    except ValueError:
        raise ValueError(
            f"regions needs a constant rho2 (deadbeat, fixed:<v> or a number), got {text!r}"
        ) from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _dispatch(ns: argparse.Namespace) -> int:
    if ns.subcommand == "run":
        rec = run(_config(ns, x10=ns.x10, x20=ns.x20))
        _emit(rec.to_csv(), ns.out)
        if rec.failure is not None:
            f = rec.failure
            print(f"liftctl: run stopped at step {f.k}: {f.kind}: {f.message}", file=sys.stderr)
        return 0
    if ns.subcommand == "montecarlo":
        cfg = _config(ns)
        summary = monte_carlo(
            cfg, ns.trials, cfg.seed, deadbeat_feasible=ns.ic_mode == "deadbeat-feasible",
            random_command=ns.random_command, workers=ns.workers,
        )
        _emit(summary.to_csv(), ns.out)
        return 0
    if ns.subcommand == "regions":
        rho2 = _fixed_rho2(ns.rho2)
        ns.rho2 = f"fixed:{rho2!r}"
        cfg = _config(ns)
        points = sample_regions(cfg.system(), rho2, cfg.command, ns.k, ns.resolution)
        _emit(regions_to_csv(points), ns.out)
        return 0
    reports = run_suite(ns.suite)
    for rep in reports:
        for line in rep.lines():
            print(line)
    if ns.out is not None:
        _emit("".join(r.to_csv(header=i == 0) for i, r in enumerate(reports)), ns.out)
    ok = all(r.passed for r in reports)
    print("verify: all checks passed" if ok else "verify: FAILURES", flush=True)
    return 0 if ok else 2


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = _parse(argv)
    try:
        return _dispatch(ns)
    except (LiftctlError, ValueError, OSError) as exc:
        print(f"liftctl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
