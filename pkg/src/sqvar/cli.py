"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 a condition was refuted,
4 numerical failure, 5 solver stopped without a second-order point.
"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import certify as cert
from .errors import BadDimension, DimensionMismatch, NotSymmetric, SqvarError
from .lift import construct_delta, construct_delta_sym, factor_any
from .matcore import RANK_TOL, as_symmetric, random_orthogonal
from .problems import BcProblem, problem_from_dict
from .reproduce import EXAMPLES
from .solve import SECOND_ORDER, SolveOptions, solve_dss, solve_dss_sym, solve_ssv_auglag

EXIT_OK, EXIT_USAGE, EXIT_REFUTED, EXIT_NUMERIC, EXIT_UNSOLVED = 0, 2, 3, 4, 5

POINT_KEYS = {
    "bc": {"X"}, "dss": {"F"}, "dss_sym": {"F"},
    "nsdp": {"x", "Lambda"}, "ssv": {"x", "F", "Lambda"}, "ssv_sym": {"x", "F", "Lambda"},
}

log = logging.getLogger("sqvar")


class UsageError(Exception):
    pass


# --- output --------------------------------------------------------------

def _num(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return repr(float(x))
    return format(x, ".17g")


def dumps(obj, indent=2, _level=0):
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _emit(payload, out):
    text = dumps(payload) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- input ---------------------------------------------------------------

def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc


def _array(v, name):
    try:
        return np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{name} is not a numeric array") from exc


def _matrix(v, name):
    a = _array(v, name)
    if a.ndim != 2:
        raise UsageError(f"{name} must be an array of rows")
    if not np.all(np.isfinite(a)):
        raise UsageError(f"{name} has non-finite entries")
    return a


def _vector(v, name):
    a = _array(v, name).ravel()
    if not np.all(np.isfinite(a)):
        raise UsageError(f"{name} has non-finite entries")
    return a


def load_point(path, formulation):
    data = _load_json(path)
    if not isinstance(data, dict):
        raise UsageError("point file must hold a JSON object")
    want = POINT_KEYS[formulation]
    if set(data) != want:
        raise UsageError(f"point for {formulation} needs exactly the keys {sorted(want)}, got {sorted(data)}")
    out = {}
    for k, v in data.items():
        out[k] = _vector(v, k) if k == "x" else _matrix(v, k)
    return out


def load_problem(path):
    spec = _load_json(path)
    if not isinstance(spec, dict):
        raise UsageError("problem file must hold a JSON object")
    try:
        return problem_from_dict(spec)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad problem specification: {exc}") from exc


def tolerances(args):
    env = os.environ.get("SQVAR_RANK_TOL")
    try:
        rank = float(env) if env else RANK_TOL
    except ValueError as exc:
        raise UsageError(f"SQVAR_RANK_TOL is not a number: {env!r}") from exc
    t = cert.Tolerances(rank_tol=rank)
    over = {"feas_tol": args.tol_feas, "psd_tol": args.tol_psd,
            "curv_tol": args.tol_curv, "rank_tol": args.tol_rank}
    t = cert.with_tols(t, **{k: v for k, v in over.items() if v is not None})
    if min(t.feas_tol, t.psd_tol, t.curv_tol, t.rank_tol) <= 0:
        raise UsageError("tolerances must be positive")
    return t


# --- commands ------------------------------------------------------------

def run_certify(args):
    form = args.formulation
    p = load_problem(args.problem)
    is_bc = isinstance(p, BcProblem)
    if is_bc != (form in ("bc", "dss", "dss_sym")):
        raise UsageError(f"formulation {form} does not match problem family {p.family}")
    pt = load_point(args.point, form)
    tols = tolerances(args)
    second = args.order == 2
    if form == "bc":
        rep = (cert.certify_bc_2nc if second else cert.certify_bc_1c)(p, pt["X"], tols)
    elif form == "dss":
        rep = cert.certify_dss(p, pt["F"], tols)
    elif form == "dss_sym":
        rep = cert.certify_dss_sym(p, pt["F"], tols)
    elif form == "nsdp":
        rep = (cert.certify_nsdp_2nc if second else cert.certify_nsdp_1c)(p, pt["x"], pt["Lambda"], tols)
    elif form == "ssv":
        rep = cert.certify_ssv(p, pt["x"], pt["F"], pt["Lambda"], tols)
    else:
        rep = cert.certify_ssv_sym(p, pt["x"], pt["F"], pt["Lambda"], tols)
    if not second and rep.second_order.evaluated:
        rep.second_order = cert.SecondOrder(False)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_REFUTED


def _solve_opts(args):
    return SolveOptions(max_iter=args.max_iter, seed=args.seed)


def _write_trace(trace, path):
    if path:
        with open(path, "w") as fh:
            fh.write(trace.to_jsonl())


def run_solve(args):
    method = args.method
    opts = _solve_opts(args)
    tols = tolerances(args)
    init = _load_json(args.init) if args.init else {}
    if method == "nnm_dss":
        return _solve_nnm(args, opts, tols)
    p = load_problem(args.problem)
    if method in ("dss", "dss_sym"):
        if not isinstance(p, BcProblem):
            raise UsageError(f"method {method} needs a PSD-constrained problem")
        if method == "dss":
            F0 = _matrix(init["F"], "F") if "F" in init else None
            if F0 is None and args.width:
                F0 = np.random.default_rng(args.seed).standard_normal((p.d, args.width))
            F, trace = solve_dss(p, F0, opts)
            rep = cert.certify_dss(p, F, tols)
        else:
            F0 = as_symmetric(_matrix(init["F"], "F")) if "F" in init else None
            F, trace = solve_dss_sym(p, F0, opts)
            rep = cert.certify_dss_sym(p, F, tols)
        payload = {"solution": {"F": F}, "objective": p.eval(F @ F.T if method == "dss" else F @ F),
                   "termination": trace.termination, "report": rep.to_dict()}
    elif method == "ssv_auglag":
        if isinstance(p, BcProblem):
            raise UsageError("ssv_auglag needs an NSDP problem")
        x0 = _vector(init["x"], "x") if "x" in init else np.zeros(p.n)
        F0 = _matrix(init["F"], "F") if "F" in init else None
        x, F, Lam, trace = solve_ssv_auglag(p, x0, F0, opts)
        rep = cert.certify_ssv(p, x, F, Lam, tols)
        payload = {"solution": {"x": x, "F": F, "Lambda": Lam}, "objective": p.f_eval(x),
                   "termination": trace.termination, "report": rep.to_dict()}
    else:
        raise UsageError(f"unknown method {method}")
    _write_trace(trace, args.trace)
    _emit(payload, args.out)
    return EXIT_OK if trace.termination == SECOND_ORDER else EXIT_UNSOLVED


def _nnm_from_file(path, lam=None):
    from .nucnorm import nnm_problem_from_dict, sensing_instance
    spec = _load_json(path)
    if not isinstance(spec, dict):
        raise UsageError("problem file must hold a JSON object")
    try:
        if spec.get("family") == "nnm_bc":
            return nnm_problem_from_dict(spec["inner"], spec["lambda"]), None
        if spec.get("family", "sensing") == "sensing":
            return sensing_instance(int(spec["d1"]), int(spec["d2"]), int(spec["rank"]), int(spec["m"]),
                                    int(spec.get("seed", 0)), float(spec.get("lambda", lam or 1e-4)))
        return nnm_problem_from_dict(spec, lam), None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad nuclear-norm problem: {exc}") from exc


def _nnm_payload(p, X_true, sol, tols):
    from .nucnorm import certify_nnm_1p
    rep = certify_nnm_1p(p, sol.X, tols)
    err = None
    if X_true is not None:
        err = float(np.linalg.norm(sol.X - X_true) / max(np.linalg.norm(X_true), 1e-300))
    return {"objective": p.objective(sol.X), "recovery_error": err, "certified_1p": rep.passed,
            "termination": sol.trace.termination, "X": sol.X, "report": rep.to_dict()}


def _solve_nnm(args, opts, tols):
    from .nucnorm import solve_nnm_dss
    p, X_true = _nnm_from_file(args.problem)
    sol = solve_nnm_dss(p, opts=opts, seed=args.seed)
    payload = _nnm_payload(p, X_true, sol, tols)
    _write_trace(sol.trace, args.trace)
    _emit(payload, args.out)
    return EXIT_OK if sol.trace.termination == SECOND_ORDER else EXIT_UNSOLVED


def run_nucnorm(args):
    from .nucnorm import sensing_instance, solve_nnm_dss
    tols = tolerances(args)
    if args.dataset:
        p, X_true = _nnm_from_file(args.dataset)
    else:
        p, X_true = sensing_instance(args.d1, args.d2, args.rank, args.m, args.seed, args.lam)
    sol = solve_nnm_dss(p, opts=_solve_opts(args), seed=args.seed)
    payload = _nnm_payload(p, X_true, sol, tols)
    payload.pop("X")
    _write_trace(sol.trace, args.trace)
    _emit(payload, args.out)
    return EXIT_OK if payload["certified_1p"] else EXIT_REFUTED


def run_lift(args):
    data = _load_json(args.point)
    if not isinstance(data, dict):
        raise UsageError("point file must hold a JSON object")
    tols = tolerances(args)
    if args.mode == "factor":
        if set(data) != {"X"}:
            raise UsageError("factor mode needs exactly the key 'X'")
        X = _matrix(data["X"], "X")
        k = args.width or X.shape[0]
        Q = random_orthogonal(k, np.random.default_rng(args.seed)) if args.rotate else None
        F = factor_any(X, k, Q, tols.rank_tol)
        payload = {"F": F, "residual": float(np.linalg.norm(F @ F.T - X))}
    else:
        if set(data) != {"F", "W"}:
            raise UsageError("delta modes need exactly the keys 'F' and 'W'")
        F, W = _matrix(data["F"], "F"), _matrix(data["W"], "W")
        if args.mode == "delta":
            D = construct_delta(F, W, tols.rank_tol)
            R = F @ D.T + D @ F.T
        else:
            D = construct_delta_sym(F, W, tols.rank_tol)
            R = F @ D + D @ F
        payload = {"Delta": D, "residual": float(np.linalg.norm(R - W))}
    _emit(payload, args.out)
    return EXIT_OK


def run_reproduce(args):
    fn = EXAMPLES[args.name]
    if args.name == "ex2.1":
        if args.d < 3 or not 1 <= args.k <= args.d:
            raise UsageError("ex2.1 needs d >= 3 and 1 <= k <= d")
        res = fn(args.d, args.k, seed=args.seed)
    elif args.name == "exB.1":
        res = fn(seed=args.seed)
    else:
        res = fn()
    _emit(res, args.out)
    return EXIT_OK if res["pass"] else EXIT_REFUTED


# --- parser --------------------------------------------------------------

def _common(sp):
    sp.add_argument("--tol-feas", type=float)
    sp.add_argument("--tol-psd", type=float)
    sp.add_argument("--tol-curv", type=float)
    sp.add_argument("--tol-rank", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write JSON here instead of stdout")


def build_parser():
    ap = argparse.ArgumentParser(prog="sqvar", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="check optimality conditions at a point")
    c.add_argument("--formulation", required=True, choices=sorted(POINT_KEYS))
    c.add_argument("--problem", required=True)
    c.add_argument("--point", required=True)
    c.add_argument("--order", type=int, choices=(1, 2), default=2)
    _common(c)
    c.set_defaults(func=run_certify)

    s = sub.add_parser("solve", help="run a second-order solver")
    s.add_argument("--method", required=True, choices=("dss", "dss_sym", "ssv_auglag", "nnm_dss"))
    s.add_argument("--problem", required=True)
    s.add_argument("--init", help="JSON with starting values (F, or x and F)")
    s.add_argument("--width", type=int, help="factor width for a random dss start")
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--trace", help="write per-iteration JSON lines here")
    _common(s)
    s.set_defaults(func=run_solve)

    li = sub.add_parser("lift", help="factor X or lift a direction W")
    li.add_argument("--mode", choices=("factor", "delta", "delta_sym"), default="factor")
    li.add_argument("--point", required=True)
    li.add_argument("--width", type=int)
    li.add_argument("--rotate", action="store_true", help="apply a seeded random rotation")
    _common(li)
    li.set_defaults(func=run_lift)

    r = sub.add_parser("reproduce", help="run a worked example end to end")
    r.add_argument("name", choices=sorted(EXAMPLES))
    r.add_argument("--d", type=int, default=6)
    r.add_argument("--k", type=int, default=3)
    _common(r)
    r.set_defaults(func=run_reproduce)

    n = sub.add_parser("nucnorm", help="nuclear-norm sensing demo")
    nsub = n.add_subparsers(dest="action", required=True)
    demo = nsub.add_parser("demo")
    demo.add_argument("--dataset", help="JSON {d1, d2, rank, m, seed, lambda}")
    demo.add_argument("--d1", type=int, default=8)
    demo.add_argument("--d2", type=int, default=6)
    demo.add_argument("--rank", type=int, default=2)
    demo.add_argument("--m", type=int, default=120)
    demo.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    demo.add_argument("--max-iter", type=int, default=500)
    demo.add_argument("--trace")
    _common(demo)
    demo.set_defaults(func=run_nucnorm)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DimensionMismatch, NotSymmetric, BadDimension) as exc:
        print(f"sqvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SqvarError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"sqvar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
