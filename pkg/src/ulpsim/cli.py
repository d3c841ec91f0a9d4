"""ulpsim command-line front end."""
from __future__ import annotations

import argparse
import json
import sys

from . import dt_amp, piezo
from .devices import ModelError, PiezoTransducer
from .repro import BUNDLES
from .runner import compare_rows, resolve_workers, run_scenario, to_csv
from .scenario import MODULE_PARAMS, ConfigError, Scenario, load_scenario

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SIM = 0, 1, 2, 3


def _fail(kind: str, exc: Exception, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "path", None)
    if path:
        payload["path"] = path
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _scenario_for(module: str, config: str | None) -> Scenario:
    if config is None:
        return Scenario(module, module, MODULE_PARAMS[module]())
    scn = load_scenario(config)
    if scn.module != module:
        raise ConfigError(f"scenario is for {scn.module!r}, not {module!r}", "module")
    return scn


def _cmd_module(args) -> int:
    scn = _scenario_for(args.command, args.config)
    header, rows = run_scenario(scn, resolve_workers(args.workers))
    _emit(to_csv(header, rows), args.out or scn.output)
    return EXIT_OK


def _cmd_compare(args) -> int:
    x = PiezoTransducer(v_oc=args.v_oc)
    header, rows = compare_rows(x, args.v_max, args.v_out, args.steps)
    _emit(to_csv(header, rows), args.out)
    return EXIT_OK


def _cmd_repro(args) -> int:
    result = BUNDLES[args.target]()
    _emit(to_csv(result.header, result.rows), args.out)
    report = sys.stdout if args.out else sys.stderr
    for c in result.checks:
        print(c.line(), file=report)
    n_fail = sum(not c.passed for c in result.checks)
    print(f"{args.target}: {len(result.checks) - n_fail}/{len(result.checks)} checks passed",
          file=report)
    return EXIT_OK if n_fail == 0 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ulpsim",
                                description="Ultra-low-power circuit models with CSV output.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--out", help="write CSV here instead of standard output")
        if workers:
            sp.add_argument("--config", help="JSON scenario file")
            sp.add_argument("--workers", type=int,
                            help="sweep worker processes (default: $ULPSIM_WORKERS or 1)")

    helps = {
        "swcap": "switched-capacitor power gating: bias sweep or gate trace",
        "nems-pg": "NEMS vs FinFET power gating energy gain",
        "dt-amp": "discrete-time parametric amplifier",
        "piezo": "piezoelectric rectifier simulation",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.set_defaults(func=_cmd_module)

    sp = sub.add_parser("compare", help="closed-form FoM of every rectifier architecture")
    common(sp, workers=False)
    sp.add_argument("--v-max", type=float, default=3.3)
    sp.add_argument("--v-oc", type=float, default=1.0)
    sp.add_argument("--v-out", type=float, default=1.0)
    sp.add_argument("--steps", type=int, default=25)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("repro", help="run a named reproduction bundle and its checks")
    sp.add_argument("target", choices=sorted(BUNDLES))
    common(sp, workers=False)
    sp.set_defaults(func=_cmd_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (ModelError, dt_amp.SimulationError, piezo.SimulationError) as exc:
        return _fail("simulation", exc, EXIT_SIM)


if __name__ == "__main__":
    sys.exit(main())
