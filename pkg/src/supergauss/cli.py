"""Command-line interface.

Exit codes: 0 success, 1 usage or validation error, 2 certificate failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION, _parallel
from .direction import SelectionConfig, select_direction
from .distributions import FAMILIES, SourceSpec, load_dataset, sample, save_dataset
from .effective_rank import effective_rank_exact
from .errors import SuperGaussError
from .isotropy import DEFAULT_MAX_ITER, DEFAULT_TOL, isotropize
from .pipeline import PipelineConfig, run_pipeline, stream, SELECTION_STREAM
from .verifier import (DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GRID_STEP, certify, default_grid,
                       default_length, median_abs, tail_curve)

EXIT_OK, EXIT_USAGE, EXIT_CERT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_dist(text: str, n: int | None) -> SourceSpec:
    """Parse ``family[:key=v1,v2;key=...]``; rows of ``atoms`` are separated by '|'."""
    family, _, rest = text.partition(":")
    params: dict = {}
    for item in filter(None, rest.split(";")):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--dist: expected key=value, got {item!r}")
        key = key.strip()
        if key == "atoms":
            params[key] = [[float(v) for v in row.split(",")] for row in value.split("|")]
            continue
        values = [float(v) for v in value.split(",")]
        if key in ("n", "dims"):
            values = [int(v) for v in values]
        params[key] = values[0] if len(values) == 1 and key not in ("dims", "mix", "probs", "cov") else values
    if n is not None and family != "finite_atoms":
        params["n"] = n
    return SourceSpec(family.strip(), params)


def _read_theta(path: str) -> np.ndarray:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(obj, dict):
        for key in ("theta", "functional"):
            if key in obj:
                obj = obj[key]
                break
        else:
            selection = obj.get("selection", {})
            if "theta" not in selection:
                raise UsageError(f"--theta-file: no 'theta' entry in {path}")
            obj = selection["theta"]
    theta = np.asarray(obj, dtype=float)
    norm = np.linalg.norm(theta)
    if theta.ndim != 1 or norm == 0:
        raise UsageError("--theta-file: expected a nonzero vector")
    return theta / norm


def _write_report(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_plot(curve, out: str | None) -> None:
    target = Path(out).with_suffix(".tail.txt") if out else Path("tail_curve.txt")
    rows = "".join(f"{t:.17g} {m:.17g}\n" for t, m in zip(curve.t_grid, curve.min_tail))
    target.write_text(rows, encoding="utf-8")


def _input(args):
    if args.input:
        return load_dataset(args.input)
    if args.dist:
        if args.samples is None:
            raise UsageError("--samples is required with --dist")
        return sample(parse_dist(args.dist, args.n), args.seed, args.samples, args.threads)
    raise UsageError("one of --in or --dist is required")


def _with_schema(obj: dict, kind: str) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": kind, **obj}


def cmd_gen(args) -> int:
    if not args.dist:
        raise UsageError("--dist is required")
    if args.samples is None:
        raise UsageError("--samples is required")
    data = sample(parse_dist(args.dist, args.n), args.seed, args.samples, args.threads)
    if args.out:
        save_dataset(data, args.out)
    else:
        for row in data.samples:
            sys.stdout.write(",".join(format(v, ".17g") for v in row) + "\n")
    return EXIT_OK


def cmd_rank(args) -> int:
    report = effective_rank_exact(_input(args))
    _write_report(_with_schema(report.to_json(), "effective_rank"), args.out)
    return EXIT_OK


def cmd_isotropize(args) -> int:
    data = _input(args)
    transform = isotropize(data, args.tol, args.max_iter, args.threads)
    if args.out_data:
        save_dataset(transform.apply(data), args.out_data)
    _write_report(_with_schema(transform.to_json(), "isotropy_transform"), args.out)
    return EXIT_OK


def cmd_find(args) -> int:
    data = _input(args)
    selection = select_direction(data, SelectionConfig(extra_random_candidates=args.extra_candidates),
                                 stream(args.seed, SELECTION_STREAM), seed=args.seed)
    _write_report(_with_schema(selection.to_json(), "direction_selection"), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    data = _input(args)
    if not args.theta_file:
        raise UsageError("--theta-file is required")
    theta = _read_theta(args.theta_file)
    L = args.length if args.length is not None else default_length(data.n)
    M_med = median_abs(data, theta)
    curve = tail_curve(data, theta, M_med, default_grid(L, args.grid_step))
    cert = certify(curve, args.alpha, args.beta, L, M_med)
    _write_report(_with_schema(cert.to_json(), "certificate"), args.out)
    if args.plot_data:
        _write_plot(curve, args.out)
    return EXIT_OK if cert.passed else EXIT_CERT_FAIL


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig(
        selection=SelectionConfig(extra_random_candidates=args.extra_candidates),
        alpha=args.alpha, beta=args.beta, length=args.length, grid_step=args.grid_step,
        allow_unverified_hypothesis=args.allow_unverified, threads=args.threads,
    )
    if args.input:
        report = run_pipeline(load_dataset(args.input), args.d, cfg, args.seed)
    elif args.dist:
        if args.samples is None:
            raise UsageError("--samples is required with --dist")
        report = run_pipeline(parse_dist(args.dist, args.n), args.d, cfg, args.seed, args.samples)
    else:
        raise UsageError("one of --in or --dist is required")
    _write_report(report.to_json(), args.out)
    if args.plot_data:
        _write_plot(report.certificate.curve, args.out)
    return EXIT_OK if report.passed else EXIT_CERT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="supergauss", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads; default from ${_parallel.THREADS_ENV} or 1")
        p.add_argument("--out", help="report path (default: standard output)")
        p.add_argument("-v", "--verbose", action="store_true")
        if data:
            p.add_argument("--in", dest="input", help="CSV dataset, one sample per row")
        p.add_argument("--dist", help=f"source spec family[:key=v,...;key=v]; families: {', '.join(FAMILIES)}")
        p.add_argument("--n", type=int, help="ambient dimension for --dist")
        p.add_argument("--samples", type=int, help="number of draws for --dist")

    def certificate_flags(p):
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
        p.add_argument("--beta", type=float, default=DEFAULT_BETA)
        p.add_argument("--length", "--L", dest="length", type=float, default=None,
                       help="certificate length in median units (default 0.3*sqrt(n))")
        p.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
        p.add_argument("--plot-data", action="store_true",
                       help="also write (t, min-tail) columns next to the report")

    p = sub.add_parser("gen", help="sample a dataset to CSV")
    common(p, data=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rank", help="exact effective rank of a small atomic law")
    common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("isotropize", help="compute the angularly-isotropic position")
    common(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--out-data", help="write the transformed samples to this CSV")
    p.set_defaults(func=cmd_isotropize)

    p = sub.add_parser("find", help="select a direction on the data as given")
    common(p)
    p.add_argument("--extra-candidates", type=int, default=256)
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("verify", help="certify the tails of <X, theta>")
    common(p)
    p.add_argument("--theta-file", help="JSON with a 'theta' vector (or a pipeline/find report)")
    certificate_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pipeline", help="project, isotropize, select and certify")
    common(p)
    p.add_argument("--d", type=float, default=None, help="project to ceil(d) dimensions first")
    p.add_argument("--extra-candidates", type=int, default=256)
    p.add_argument("--allow-unverified", action="store_true",
                   help="accept a passing certificate even if the angular moment hypothesis fails")
    certificate_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _effective_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    if cfg.get("threads") is None:
        cfg["threads"] = _parallel.default_threads()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads is None:
            args.threads = _parallel.default_threads()
        print("config: " + json.dumps(_effective_config(args), sort_keys=True), file=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SuperGaussError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
