"""Command line: ``eitlab <mode> --config <path> [--out <dir>] [--seed <n>] [--svg]``.

Exit status 0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .dynamics import IntegrationError
from .fitting import FitError
from .params import InvalidParameterError, ParameterConsistencyWarning
from .scenario import MODES, ConfigError, load_config, run
from .spectrum import NoDipError
from .susceptibility import BranchJumpError, QuadratureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (FitError, NoDipError, IntegrationError, QuadratureError, BranchJumpError,
                  InvalidParameterError, np.linalg.LinAlgError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"eitlab: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eitlab", description="Cavity EIT spectra, buildup dynamics and fits.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="64-bit seed (overrides the config seed)")
    p.add_argument("--svg", action="store_true", default=None,
                   help="also render quick-look SVG plots (needs matplotlib)")
    return p


def _module_of(exc) -> str:
    tb = exc.__traceback__
    mod = "eitlab"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("eitlab."):
            mod = name
        tb = tb.tb_next
    return mod


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        with warnings.catch_warnings():
            warnings.simplefilter("always", ParameterConsistencyWarning)
            manifest = run(config, mode=args.mode, out_dir=args.out, seed=args.seed,
                           svg=args.svg, base_dir=Path(args.config).parent)
    except ConfigError as exc:
        print(f"eitlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"eitlab: numerical failure in {_module_of(exc)}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    for line in manifest.summary:
        print(line)
    print(json.dumps({"outputs": [o["file"] for o in manifest.outputs],
                      "duration_s": round(manifest.duration_s, 3)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
