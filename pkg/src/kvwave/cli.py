"""``kvwave`` command line: run, validate, sweep and demo."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_config, parse_config
from .errors import ConfigInvalid
from .runner import OUTPUT_ENV, run

DEMOS = {
    "conservative": """
        # undamped, linear: energy is conserved to roundoff
        task = simulate
        domain.counts = [199]
        regions.A = all
        damping.a_shape = zero
        damping.eta_shape = zero
        time.T_final = 10
        time.solver_tol = 1e-13
        initial.u_modes = [1.0, 0.0, 0.3]
        output.stride = 10
    """,
    "damped": """
        # Kelvin-Voigt outside A plus a frictional collar around it
        task = simulate
        domain.counts = [199]
        regions.A = [0.3, 0.7]
        regions.eps = 0.05
        laws.g = cubic-near-zero
        laws.f = power
        laws.p = 3
        time.T_final = 10
        initial.u_modes = [1.0, 0.5]
        output.stride = 10
    """,
    "eta-violation": """
        # eta is zero on the collar, so the floor eta >= eta_0 fails
        task = simulate
        regions.A = [0.3, 0.7]
        damping.eta_shape = zero
        damping.eta_0 = 0.1
    """,
    "decay": """
        task = decay
        domain.counts = [49]
        regions.A = empty
        damping.a_shape = constant
        damping.eta_shape = zero
        time.T_final = 6
        decay.T = 1
        initial.preset = ensemble
        observability.n_samples = 16
        output.stride = 5
    """,
    "observability": """
        task = observability
        domain.counts = [49]
        regions.A = [0.3, 0.7]
        regions.eps = 0.05
        observability.n_samples = 32
        observability.T = 4
    """,
    "gcc-off": """
        # friction only on a collar around A; the boundary ring stays undamped
        task = sweep
        domain.counts = [49]
        regions.eps = 0.05
        damping.a_shape = zero
        damping.eta_shape = collar
        damping.eta_value = 1.0
        sweep.geometries = [[0.3, 0.7], [0.1, 0.9], "empty"]
        sweep.names = ["collar-narrow", "collar-wide", "undamped"]
        observability.n_samples = 8
        observability.T = 4
    """,
}


def _run_path(path, output=None) -> int:
    try:
        cfg = load_config(path)
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return 2
    res = run(cfg, output)
    if res.exit_code == 0:
        print(f"{path}: ok -> {res.output_dir} ({', '.join(res.artifacts)})")
    else:
        print(f"{path}: exit {res.exit_code}: {res.error}", file=sys.stderr)
    return res.exit_code


def _sweep_one(args):
    path, output = args
    return _run_path(path, output)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvwave", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help=f"output directory (overrides ${OUTPUT_ENV})")
    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("config")
    s = sub.add_parser("sweep", help="run every *.cfg / *.json config in a directory")
    s.add_argument("config_dir")
    s.add_argument("-o", "--output", help="parent directory; one subdirectory per config")
    s.add_argument("-j", "--jobs", type=int, default=1)
    d = sub.add_parser("demo", help="run a built-in scenario")
    d.add_argument("name", choices=sorted(DEMOS))
    d.add_argument("-o", "--output")
    d.add_argument("--print-config", action="store_true", help="print the config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _run_path(args.config, args.output)
    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigInvalid as exc:
            print(exc, file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        print(f"{args.config}: valid ({cfg.task})")
        return 0
    if args.command == "sweep":
        root = Path(args.config_dir)
        paths = sorted(p for p in root.iterdir() if p.suffix in (".cfg", ".json"))
        if not paths:
            print(f"no configs in {root}", file=sys.stderr)
            return 2
        jobs = [(p, str(Path(args.output) / p.stem) if args.output else None) for p in paths]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as ex:
                codes = list(ex.map(_sweep_one, jobs))
        else:
            codes = [_sweep_one(j) for j in jobs]
        return max(codes)
    text = "\n".join(line.strip() for line in DEMOS[args.name].strip().splitlines())
    if args.print_config:
        print(text)
        return 0
    cfg = parse_config(text + f"\noutput.directory = kvwave-demo-{args.name}")
    res = run(cfg, args.output)
    if res.exit_code == 0:
        print(f"demo {args.name}: ok -> {res.output_dir} ({', '.join(res.artifacts)})")
    else:
        print(f"demo {args.name}: exit {res.exit_code}: {res.error}", file=sys.stderr)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
