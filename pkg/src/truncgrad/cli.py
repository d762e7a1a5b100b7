"""Command line driver: ``truncgrad --config configs/gm1.toml``.

Exit codes: 0 success, 1 a containment self-check failed, 2 configuration
error, 3 every row failed a model or hypothesis check.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError, ModelError
from .report import MODELS, config_from_dict, emit, load_config, run_sweep

log = logging.getLogger("truncgrad")

EXIT_OK = 0
EXIT_CONTAINMENT = 1
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="truncgrad", description="Certified gradient sweeps over truncation levels.")
    p.add_argument("--config", help="TOML sweep config")
    p.add_argument("--model", choices=MODELS, help="override model.name")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--n-step", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--self-check", action="store_true", default=None,
                   help="check containment of the analytic reference (on by default)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {
        "model": args.model, "n_min": args.n_min, "n_max": args.n_max, "n_step": args.n_step,
        "out_dir": args.out, "threads": args.threads, "self_check": args.self_check,
    }
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        elif args.model:
            cfg = config_from_dict({}, overrides, source="<flags>")
        else:
            raise ConfigurationError("either --config or --model is required")
        records, summary = run_sweep(cfg)
        csv_path, json_path = emit(records, summary, cfg.out_dir, cfg.stem)
    except (ConfigurationError, ModelError) as exc:
        print(f"truncgrad: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for r in records:
        if r.hypothesis_ok:
            log.info("n=%d states=%d gap_rel=%s contraction=%.4g", r.n, r.states, r.gap_rel, r.contraction)
        else:
            log.info("n=%d withheld: %s", r.n, r.error)
    print(f"wrote {csv_path} and {json_path}")
    if records and not any(r.hypothesis_ok for r in records):
        print("truncgrad: every row failed its hypothesis checks", file=sys.stderr)
        return EXIT_ALL_FAILED
    check = summary.get("containment")
    if check is not None and not check["ok"]:
        print(f"truncgrad: containment failed at n = {check['failures']}", file=sys.stderr)
        return EXIT_CONTAINMENT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
