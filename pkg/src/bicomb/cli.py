"""Command line entry point.

Every command prints one JSON report on stdout. Exit status: 0 when the
checked property holds, 2 when the space or bicombing fails it (the report
carries the defect or violation), 1 for usage and input errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time

import numpy as np

from . import __version__

SCHEMA = "bicomb.report/1"
EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# input helpers


def _read_space(path):
    from .metric import MetricError, from_json
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}")
    digest = hashlib.sha256(raw).hexdigest()
    try:
        return from_json(obj), digest, None
    except MetricError as exc:
        return None, digest, exc
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}")


def _load_valid_space(path):
    X, digest, err = _read_space(path)
    if err is not None:
        raise UsageError(f"{path} is not a metric space: {err}")
    return X, digest


def _floats(text):
    try:
        return np.array([float(v) for v in text.split(",")], float)
    except ValueError:
        raise UsageError(f"cannot parse point {text!r}")


def _closure_point(text):
    from .boundary import ClosurePoint
    if text.startswith("dir:"):
        return ClosurePoint.boundary(_floats(text[4:]))
    return ClosurePoint.interior(_floats(text))


def _params(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _args_digest(argv):
    return hashlib.sha256("\0".join(argv).encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serializable: {type(v).__name__}")


# --------------------------------------------------------------------------
# commands (each returns (exit_code, results, input_digest, rng_seed))


def cmd_validate(args, argv):
    from .metric import scalar_to_json
    X, digest, err = _read_space(args.space)
    if err is None:
        return EXIT_OK, {"valid": True, "n": X.n, "diameter": scalar_to_json(X.diameter())}, digest, None
    viol = [{"kind": v.kind, "indices": list(v.indices), "defect": scalar_to_json(v.defect)}
            for v in err.violations]
    return EXIT_FAIL, {"valid": False, "violations": viol}, digest, None


def cmd_tight_span(args, argv):
    from .tight_span import CapExceeded, enumerate_faces, faces_to_json
    X, digest = _load_valid_space(args.space)
    try:
        faces = enumerate_faces(X, args.cap)
    except CapExceeded as exc:
        raise UsageError(str(exc))
    dim = max(f.rank for f in faces)
    return EXIT_OK, {"n": X.n, "dim": dim, "faces": faces_to_json(faces)}, digest, None


def _parse_witness(Z_text, pairs_text):
    from .comb_dim import Involution
    try:
        Z = [int(v) for v in Z_text.split(",")]
        pairs = [tuple(int(v) for v in p.split("-")) for p in pairs_text.split(",")]
        return Z, Involution(tuple(pairs))
    except ValueError as exc:
        raise UsageError(f"bad witness specification: {exc}")


def _witness_result(X, Z, inv, cap):
    from .comb_dim import DressViolation, dress_witness
    try:
        w = dress_witness(X, Z, inv, cap)
    except ValueError as exc:
        raise UsageError(str(exc))
    code = EXIT_FAIL if isinstance(w, DressViolation) else EXIT_OK
    return code, {"witness": w.to_json()}


def cmd_comb_dim(args, argv):
    from .comb_dim import comb_dim_sweep, dress_check
    from .tight_span import CapExceeded
    X, digest = _load_valid_space(args.space)
    results, code = {"n_points": X.n}, EXIT_OK
    try:
        if args.exhaustive or (args.n is None and args.witness is None):
            dim, arg = comb_dim_sweep(X, args.cap)
            results["comb_dim"] = dim
            results["attained_on"] = list(arg)
        if args.n is not None:
            res = dress_check(X, args.n, threads=None)
            results["criterion"] = {"n": args.n, "holds": res.holds, "pairings_checked": res.checked}
            if not res.holds:
                Z, inv = res.violation
                results["criterion"]["violation"] = {"Z": list(Z), "i": [list(p) for p in inv.pairs]}
                code = EXIT_FAIL
        if args.witness is not None:
            Z, inv = _parse_witness(*args.witness)
            wcode, wres = _witness_result(X, Z, inv, args.cap)
            results.update(wres)
            code = max(code, wcode)
    except CapExceeded as exc:
        raise UsageError(str(exc))
    return code, results, digest, None


def cmd_dress_witness(args, argv):
    X, digest = _load_valid_space(args.space)
    Z, inv = _parse_witness(args.Z, args.pairs)
    code, res = _witness_result(X, Z, inv, args.cap)
    return code, res, digest, None


def _make_space(spec):
    """gallery id (butterfly, l-inf:d, or a finite gallery id whose tight span
    is used) or a path to a space JSON file."""
    from . import bicombing as bc
    from . import gallery
    name, _, rest = spec.partition(":")
    if spec == "butterfly":
        return bc.butterfly_space(), _args_digest([spec])
    if name == "l-inf":
        try:
            return bc.linf_space(int(rest)), _args_digest([spec])
        except ValueError:
            raise UsageError(f"bad dimension in {spec!r}")
    if name in gallery.CATALOG:
        params = _params(rest.split(",") if rest else [])
        try:
            X = gallery.build(name, **params)
        except (ValueError, TypeError) as exc:
            raise UsageError(str(exc))
        return bc.tight_span_space(X), _args_digest([spec])
    X, digest = _load_valid_space(spec)
    return bc.tight_span_space(X), digest


def _make_bicombing(args):
    from . import bicombing as bc
    space, digest = _make_space(args.space)
    if args.seed_bicombing == "linear":
        if not space.name.startswith("l-inf"):
            raise UsageError("the linear seed is only available on l-inf spaces")
        seed = bc.LinearBicombing(space)
    else:
        seed = bc.RetractBicombing(space, check_seed=args.rng_seed)
    res = bc.convexify(seed, args.levels, samples=args.samples if args.command_path == "build" else 0,
                       rng_seed=args.rng_seed)
    return res, digest, seed


def _chain_summary(res):
    out = []
    for s in res.chain:
        entry = {"provenance": s.provenance, "grid": s.m}
        if hasattr(s, "log"):
            entry["contraction"] = {"checks": s.log.checks, "ok": s.log.ok,
                                    "worst_excess": s.log.worst_excess,
                                    "max_iterations": s.log.max_iterations}
        out.append(entry)
    return out


def cmd_bicombing_build(args, argv):
    from .bicombing import cascade_n
    res, digest, seed = _make_bicombing(args)
    results = {"space": res.bicombing.space.name, "levels": args.levels,
               "discreteness": cascade_n(args.levels), "uniform_gaps": res.uniform_gaps,
               "chain": _chain_summary(res), "warnings": getattr(seed, "warnings", [])}
    code = EXIT_OK if res.contraction_ok else EXIT_FAIL
    return code, results, digest, args.rng_seed


def cmd_bicombing_check(args, argv):
    from . import bicombing as bc
    res, digest, _ = _make_bicombing(args)
    sigma = res.bicombing
    axiom = args.axiom
    if axiom.startswith("discrete:"):
        try:
            n = int(axiom.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad axiom {axiom!r}")
        rep = bc.discrete_convexity_defect(sigma, n, args.samples, args.rng_seed)
    elif axiom in bc.AXIOMS:
        rep = bc.AXIOMS[axiom](sigma, args.samples, args.rng_seed)
    else:
        raise UsageError(f"unknown axiom {axiom!r}")
    ok = rep.max_defect <= args.tol
    results = {"axiom": axiom, "tol": args.tol, "holds": ok, "report": rep.to_json(),
               "chain": _chain_summary(res)}
    return (EXIT_OK if ok else EXIT_FAIL), results, digest, args.rng_seed


def cmd_boundary_dist(args, argv):
    from .boundary import d_o_metric
    name, _, dim = args.space.partition(":")
    if name != "l-inf":
        raise UsageError("boundary features are available on l-inf:d spaces")
    o, x, y = _floats(args.o), _closure_point(args.x), _closure_point(args.y)
    if not (len(o) == len(x.vec) == len(y.vec) == int(dim)):
        raise UsageError("point dimensions do not match the space")
    D = d_o_metric(x, y, o)
    return EXIT_OK, {"D_o": D, "x": x.to_json(), "y": y.to_json(), "o": o.tolist()}, \
        _args_digest(argv), None


def cmd_boundary_check(args, argv):
    from .boundary import CHECKS
    if args.lemma not in CHECKS:
        raise UsageError(f"unknown check {args.lemma!r}; choose from {sorted(CHECKS)}")
    reports = CHECKS[args.lemma](args.samples, np.random.default_rng(args.rng_seed))
    ok = all(r.ok for r in reports)
    return (EXIT_OK if ok else EXIT_FAIL), {"checks": [r.to_json() for r in reports]}, \
        _args_digest(argv), args.rng_seed


def cmd_gallery_list(args, argv):
    from .gallery import CATALOG
    return EXIT_OK, {"spaces": [{"id": k, "about": v} for k, v in CATALOG.items()]}, \
        _args_digest(argv), None


def cmd_gallery_emit(args, argv):
    from .gallery import build
    try:
        X = build(args.id, **_params(args.params))
    except KeyError as exc:
        raise UsageError(str(exc.args[0]))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc))
    text = X.dumps()
    results = {"id": args.id, "n": X.n}
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
        results["written"] = args.output
    else:
        results["space"] = json.loads(text)
    return EXIT_OK, results, hashlib.sha256(text.encode()).hexdigest(), None


# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="bicomb", description=__doc__.splitlines()[0])
    p.add_argument("--timing", action="store_true", help="add wall_time to the report")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check the metric axioms")
    s.add_argument("space")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("tight-span", help="faces of the tight span")
    s.add_argument("space")
    s.add_argument("--cap", type=int, default=8)
    s.set_defaults(func=cmd_tight_span)

    s = sub.add_parser("comb-dim", help="combinatorial dimension and the pairing criterion")
    s.add_argument("space")
    s.add_argument("--n", type=int)
    s.add_argument("--witness", nargs=2, metavar=("Z", "PAIRS"),
                   help="e.g. 0,1,2,3 0-2,1-3")
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--cap", type=int, default=8)
    s.set_defaults(func=cmd_comb_dim)

    s = sub.add_parser("dress-witness", help="certificate for one pairing")
    s.add_argument("space")
    s.add_argument("--Z", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--cap", type=int, default=8)
    s.set_defaults(func=cmd_dress_witness)

    s = sub.add_parser("bicombing", help="build and check bicombings")
    bsub = s.add_subparsers(dest="command_path", required=True, parser_class=_Parser)
    for name, func in (("build", cmd_bicombing_build), ("check", cmd_bicombing_check)):
        b = bsub.add_parser(name)
        b.add_argument("--space", default="butterfly")
        b.add_argument("--seed-bicombing", choices=["linear", "retract"], default="retract")
        b.add_argument("--levels", type=int, default=1)
        b.add_argument("--samples", type=int, default=1000)
        b.add_argument("--rng-seed", type=int, default=0)
        b.add_argument("--tol", type=float, default=1e-9)
        if name == "check":
            b.add_argument("--axiom", required=True)
        b.set_defaults(func=func)

    s = sub.add_parser("boundary", help="rays, radial retractions and the ray metric")
    bsub = s.add_subparsers(dest="command_path", required=True, parser_class=_Parser)
    b = bsub.add_parser("dist")
    b.add_argument("--space", default="l-inf:2")
    b.add_argument("--o", required=True)
    b.add_argument("--x", required=True)
    b.add_argument("--y", required=True)
    b.set_defaults(func=cmd_boundary_dist)
    b = bsub.add_parser("check")
    b.add_argument("--lemma", required=True)
    b.add_argument("--samples", type=int, default=1000)
    b.add_argument("--rng-seed", type=int, default=0)
    b.set_defaults(func=cmd_boundary_check)

    s = sub.add_parser("gallery", help="example spaces")
    gsub = s.add_subparsers(dest="command_path", required=True, parser_class=_Parser)
    g = gsub.add_parser("list")
    g.set_defaults(func=cmd_gallery_list)
    g = gsub.add_parser("emit")
    g.add_argument("id")
    g.add_argument("params", nargs="*", help="key=value")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gallery_emit)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code, results, digest, seed = args.func(args, argv)
    except UsageError as exc:
        print(f"bicomb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "schema": SCHEMA,
        "command": argv,
        "input_digest": digest,
        "results": results,
        "versions": {"bicomb": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "rng_seed": seed,
        "exit_code": code,
    }
    if args.timing:
        report["wall_time"] = round(time.perf_counter() - start, 6)
    print(json.dumps(report, indent=2, sort_keys=True, default=_jsonable))
    return code


if __name__ == "__main__":
    sys.exit(main())
