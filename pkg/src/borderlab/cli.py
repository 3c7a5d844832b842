"""Command-line interface: ``borderlab <subcommand> ...``.

Every subcommand prints one JSON report (``--pretty`` for an indented,
human-oriented rendering).  Exit codes: 0 success, 1 negative mathematical
result (a test failed, a verification did not pass, a reproduction
mismatched), 2 usage error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence

from . import __version__

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(ValueError):
    """Bad command-line input detected after argument parsing."""


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(x: Any) -> Any:
    import numpy as np
    from fractions import Fraction

    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _render_pretty(report: dict) -> str:
    lines = []
    for k, v in report.items():
        if isinstance(v, (dict, list)):
            text = json.dumps(v, indent=2, sort_keys=True)
            lines.append(f"{k}:")
            lines.extend("  " + ln for ln in text.splitlines())
        else:
            lines.append(f"{k:<24} {v}")
    return "\n".join(lines)


def _emit(report: dict, args: argparse.Namespace) -> None:
    report = _jsonable(report)
    text = _render_pretty(report) if getattr(args, "pretty", False) else json.dumps(report, sort_keys=True)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(text)


def _base(args: argparse.Namespace) -> dict:
    return {"command": args.command, "version": __version__}


def _tensor(spec: str, power: int = 1):
    from .tensor import from_spec

    try:
        return from_spec(spec, power)
    except (ValueError, IndexError, KeyError) as exc:
        raise UsageError(f"bad tensor spec {spec!r}: {exc}") from exc


def _decomposition(spec: str, digits: int = 60):
    from .decomp import BorderDecomposition, builtin

    if spec.endswith(".json"):
        with open(spec) as fh:
            return BorderDecomposition.from_json(json.load(fh))
    try:
        return builtin(spec, digits)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_budget(s: str) -> int:
    try:
        return int(float(s))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad budget {s!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_catalog(args) -> int:
    from .tensor import CATALOG_NAMES

    rep = _base(args)
    if args.action == "list":
        rep["tensors"] = list(CATALOG_NAMES)
        _emit(rep, args)
        return EXIT_OK
    if not args.spec:
        raise UsageError("catalog show needs a tensor spec, e.g. cw:2")
    T = _tensor(args.spec, args.power)
    rep.update({"tensor": args.spec, "power": args.power, "dims": list(T.dims), "nnz": T.nnz,
                "symmetric": T.is_symmetric(),
                "entries": [[list(k), str(v)] for k, v in sorted(T.items())][: args.max_entries]})
    _emit(rep, args)
    return EXIT_OK


def cmd_kron(args) -> int:
    from .tensor import kronecker

    T = kronecker(_tensor(args.first), _tensor(args.second))
    rep = _base(args)
    rep.update({"dims": list(T.dims), "nnz": T.nnz})
    if args.save:
        with open(args.save, "w") as fh:
            json.dump(T.to_json(), fh)
        rep["saved"] = args.save
    _emit(rep, args)
    return EXIT_OK


def cmd_koszul(args) -> int:
    from .koszul import lower_bound

    T = _tensor(args.tensor, args.power)
    prime = None if args.prime == "auto" else int(args.prime)
    t0 = time.perf_counter()
    kb = lower_bound(T, args.factor, args.p, seeds=list(range(args.seed, args.seed + args.seeds)),
                     prime=prime, exact=args.exact, tensor_id=f"{args.tensor}^{args.power}")
    rep = _base(args)
    rep.update(kb.to_json())
    rep["seconds"] = round(time.perf_counter() - t0, 3)
    _emit(rep, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .decomp import verify_exact, verify_numeric

    D = _decomposition(args.decomp, args.digits)
    T = _tensor(args.target, args.power)
    if args.mode == "exact":
        if D.field not in ("rational", "cyclotomic12"):
            raise UsageError("exact mode needs a rational or cyclotomic decomposition")
        r = verify_exact(D, T)
    else:
        r = verify_numeric(D, T, digits=args.digits, tol=args.tol)
    rep = _base(args)
    rep.update(r.to_json())
    _emit(rep, args)
    return EXIT_OK if r.passed else EXIT_NEGATIVE


def _load_candidate(path: str):
    from .apolarity import CandidateSpace

    with open(path) as fh:
        return CandidateSpace.from_json(json.load(fh))


def cmd_apolarity(args) -> int:
    from . import apolarity as ap

    rep = _base(args)
    rep["mode"] = args.mode
    classes = {int(k): v for k, v in json.loads(args.classes).items()} if args.classes else None
    if args.mode == "weak":
        if args.m is None:
            raise UsageError("weak mode needs --m")
        E110, E101, E011 = ap.weak_candidate(args.m, args.r)
        tests = [ap.test_210(None, E110), ap.test_120(None, E110),
                 ap.test_210(None, E101), ap.test_120(None, E101),
                 ap.test_210(None, E011), ap.test_120(None, E011),
                 ap.test_111(E110, E101, E011)]
        rep["tests"] = [t.to_json() for t in tests]
        rep["passed"] = all(t.passed for t in tests)
        _emit(rep, args)
        return EXIT_OK if rep["passed"] else EXIT_NEGATIVE
    if not args.tensor:
        raise UsageError(f"{args.mode} mode needs --tensor")
    T = _tensor(args.tensor, args.power)
    if args.mode == "test":
        if not args.candidate:
            raise UsageError("test mode needs --candidate FILE")
        E = _load_candidate(args.candidate)
        t1, t2 = ap.test_210(T, E, args.r), ap.test_120(T, E, args.r)
        rep["tests"] = [t1.to_json(), t2.to_json()]
        if not E.is_parametric and E.marked:
            rep["kappa"] = ap.kappa_split(T, E.complement).to_json()
        rep["passed"] = t1.passed and t2.passed
        _emit(rep, args)
        return EXIT_OK if rep["passed"] else EXIT_NEGATIVE
    if args.mode == "torus":
        cands = ap.torus_candidates(T, args.r, args.budget, classes, args.multiplicity)
        out = []
        for E in cands:
            t1, t2 = ap.test_210(T, E), ap.test_120(T, E)
            out.append({"labels": E.labels, "choices": E.meta.get("choices"), "families": E.nparams,
                        "210": t1.status, "120": t2.status, "passed": t1.passed and t2.passed})
        rep.update({"r": args.r, "candidates": len(cands), "passing": sum(o["passed"] for o in out),
                    "details": out})
        _emit(rep, args)
        return EXIT_OK
    # search
    sr = ap.search_lower_bound(T, args.r, args.budget, classes, args.multiplicity)
    rep.update(sr.to_json())
    _emit(rep, args)
    return EXIT_OK


def cmd_minrank(args) -> int:
    from .apolarity import emptycor_bound

    T = _tensor(args.tensor, args.power)
    t0 = time.perf_counter()
    eb = emptycor_bound(T, args.factor, args.p, args.budget)
    rep = _base(args)
    rep.update(eb.to_json())
    rep["seconds"] = round(time.perf_counter() - t0, 3)
    _emit(rep, args)
    return EXIT_OK


def _weights_arg(args, T):
    from .solve import TightWeights, weights_from_decomposition

    if getattr(args, "weights", None):
        with open(args.weights) as fh:
            return TightWeights.from_json(json.load(fh))
    if getattr(args, "weights_from", None):
        return weights_from_decomposition(_decomposition(args.weights_from, 30))
    return None


def cmd_tight(args) -> int:
    from .solve import equation_count, is_standard_tight, search_min_equations

    T = _tensor(args.tensor, args.power)
    sym = args.symmetric
    rep = _base(args)
    given = _weights_arg(args, T)
    if given is not None:
        tight = is_standard_tight(T, given)
        rep.update({"weights": given.to_json(), "tight": tight,
                    "equations": equation_count(given, sym or given.symmetric) if tight else None})
        _emit(rep, args)
        return EXIT_OK if tight else EXIT_NEGATIVE
    w, count, complete = search_min_equations(T, args.budget, symmetric=sym or None,
                                              time_limit=args.time_limit)
    rep.update({"weights": w.to_json() if w else None, "equations": count, "complete": complete,
                "tight": w is not None})
    _emit(rep, args)
    if w is None:
        return EXIT_NEGATIVE
    return EXIT_OK if complete else EXIT_BUDGET


def cmd_solve(args) -> int:
    from .solve import (LMConfig, TightProblem, assemble_decomposition, equations, isolation, multistart,
                        sparsify)

    if args.problem:
        with open(args.problem) as fh:
            P = TightProblem.from_json(json.load(fh))
    else:
        if not args.tensor or args.r is None:
            raise UsageError("solve needs --problem FILE or --tensor SPEC --r R")
        T = _tensor(args.tensor, args.power)
        w = _weights_arg(args, T)
        P = equations(T, w, args.r, symmetric=True if args.symmetric else None)
    rep = _base(args)
    rep.update({"n_equations": P.n_equations, "n_params": P.n_params, "r": P.r, "symmetric": P.symmetric})
    if args.save_problem:
        with open(args.save_problem, "w") as fh:
            json.dump(P.to_json(), fh)
        rep["saved_problem"] = args.save_problem
    if args.starts == 0:
        _emit(rep, args)
        return EXIT_OK
    cfg = LMConfig(max_iter=args.max_iter, tol=args.tol)
    best, runs = multistart(P, args.starts, args.seed, cfg)
    best = isolation(P, best)
    if args.sparsify and best.converged:
        best = sparsify(P, best, LMConfig(max_iter=200, tol=args.tol))
    rep["runs"] = [{"seed": r.seed, "residual": r.residual_norm, "iterations": r.iterations,
                    "converged": r.converged} for r in runs]
    res = best.to_json()
    if not args.dump_params:
        res.pop("params")
    rep["result"] = res
    if args.save_decomposition and best.converged:
        D = assemble_decomposition(P.weights, best, P)
        with open(args.save_decomposition, "w") as fh:
            json.dump(D.to_json(), fh)
        rep["saved_decomposition"] = args.save_decomposition
    _emit(rep, args)
    return EXIT_OK if best.converged else EXIT_NEGATIVE


def cmd_omega(args) -> int:
    from .decomp import omega_bound

    rep = _base(args)
    rep.update({"q": args.q, "k": args.k, "R": args.R, "omega": omega_bound(args.q, args.k, args.R, args.skew)})
    _emit(rep, args)
    return EXIT_OK


# -- reproduce ----------------------------------------------------------------


def load_manifest() -> dict:
    with resources.files("borderlab.data").joinpath("manifest.json").open("r") as fh:
        return json.load(fh)


def run_claim(cid: str, claim: dict) -> dict:
    """Run one manifest recipe; returns ``{"observed": ..., "ok": bool}``."""
    from . import apolarity as ap
    from .decomp import builtin, omega_bound, verify_exact, verify_numeric
    from .koszul import lower_bound
    from .solve import equations, is_standard_tight, weights_from_decomposition

    kind = claim["kind"]
    exp = claim.get("expect", {})
    obs: Dict[str, Any] = {}
    if kind == "koszul":
        T = _tensor(claim["tensor"], claim.get("power", 1))
        kb = lower_bound(T, claim.get("factor", "A"), claim["p"], seeds=claim.get("seeds", [0]))
        obs = {"bound": kb.bound, "rank": kb.rank, "prime": kb.prime, "seed": kb.seed}
    elif kind == "verify":
        D = builtin(claim["decomp"], claim.get("digits", 60))
        T = _tensor(claim["target"], claim.get("power", 1))
        if claim["mode"] == "exact":
            r = verify_exact(D, T)
        else:
            r = verify_numeric(D, T, digits=claim.get("digits", 60), tol=claim.get("tol"))
        obs = {"passed": r.passed, "terms": r.terms, "max_error": r.max_error}
    elif kind == "apolarity-torus":
        T = _tensor(claim["tensor"], claim.get("power", 1))
        cands = ap.torus_candidates(T, claim["r"])
        obs = {"candidates": len(cands),
               "passing": sum(1 for E in cands if ap.test_210(T, E).passed and ap.test_120(T, E).passed)}
    elif kind == "apolarity-search":
        T = _tensor(claim["tensor"], claim.get("power", 1))
        classes = {int(k): v for k, v in claim.get("classes", {}).items()} or None
        sr = ap.search_lower_bound(T, claim["r"], classes=classes)
        obs = {"triples_passing": len(sr.triples_passing) + len(sr.undecided),
               "triples_tested": sr.triples_tested, "coverage": sr.coverage}
    elif kind == "apolarity-weak":
        E = ap.weak_candidate(claim["m"], claim["r"])
        t111 = ap.test_111(*E)
        passed = all(ap.test_210(None, x).passed and ap.test_120(None, x).passed for x in E) and t111.passed
        obs = {"passed": passed, "dim_111": t111.kernel_dim}
    elif kind == "minrank":
        T = _tensor(claim["tensor"], claim.get("power", 1))
        eb = ap.emptycor_bound(T, claim.get("factor", "C"), claim["p"])
        obs = {"rho": eb.rho, "bound": eb.bound, "points": eb.certificate.points}
    elif kind == "equations":
        D = builtin(claim["decomp"], 30)
        T = _tensor(claim["tensor"], claim.get("power", 1))
        P = equations(T, weights_from_decomposition(D), claim["r"])
        obs = {"n_equations": P.n_equations, "n_params": P.n_params, "convention": "multisets"}
    elif kind == "tight":
        D = builtin(claim["decomp"], 30)
        T = _tensor(claim["tensor"], claim.get("power", 1))
        w = weights_from_decomposition(D)
        obs = {"tight": is_standard_tight(T, w), "weights": w.to_json()}
    elif kind == "omega":
        obs = {"omega": omega_bound(claim["q"], claim["k"], claim["R"])}
    else:  # pragma: no cover - manifest is shipped with the package
        raise UsageError(f"unknown claim kind {kind!r}")
    ok = True
    diff = {}
    for key, val in exp.items():
        if key == "range":
            good = val[0] <= obs["omega"] <= val[1]
        elif key == "min_111":
            good = obs["dim_111"] >= val
        else:
            good = obs.get(key) == val
        if not good:
            ok = False
            diff[key] = {"expected": val, "observed": obs.get(key, obs.get("omega"))}
    out = {"claim": cid, "source": claim.get("source"), "expected": exp, "observed": obs, "ok": ok, "diff": diff}
    if claim.get("note"):
        out["note"] = claim["note"]
    return out


def cmd_reproduce(args) -> int:
    man = load_manifest()["claims"]
    rep = _base(args)
    if args.list:
        rep["claims"] = {k: {"kind": v["kind"], "source": v.get("source")} for k, v in man.items()}
        _emit(rep, args)
        return EXIT_OK
    ids = list(man) if args.all else args.claims
    if not ids:
        raise UsageError("name one or more claim ids (see --list) or use --all")
    unknown = [c for c in ids if c not in man]
    if unknown:
        raise UsageError(f"unknown claim id(s): {', '.join(unknown)}")
    results = []
    for cid in ids:
        t0 = time.perf_counter()
        r = run_claim(cid, man[cid])
        r["seconds"] = round(time.perf_counter() - t0, 3)
        results.append(r)
    rep["results"] = results
    rep["ok"] = all(r["ok"] for r in results)
    _emit(rep, args)
    return EXIT_OK if rep["ok"] else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="human-readable output")
    common.add_argument("--out", help="also write the JSON report to this file")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for compiled kernels (overrides BORDERLAB_THREADS)")

    p = argparse.ArgumentParser(prog="borderlab", description="Border-rank toolkit.")
    p.add_argument("--version", action="version", version=f"borderlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("catalog", parents=[common], help="list or show catalog tensors")
    s.add_argument("action", choices=["list", "show"])
    s.add_argument("spec", nargs="?")
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--max-entries", type=int, default=10000)
    s.set_defaults(func=cmd_catalog)

    s = sub.add_parser("kron", parents=[common], help="Kronecker product of two tensors")
    s.add_argument("first")
    s.add_argument("second")
    s.add_argument("--save", help="write the product as a tensor JSON file")
    s.set_defaults(func=cmd_kron)

    s = sub.add_parser("koszul-bound", parents=[common], help="Koszul-flattening lower bound")
    s.add_argument("--tensor", required=True)
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--factor", default="A", choices=["A", "B", "C"])
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--seeds", type=int, default=3, help="number of restriction seeds")
    s.add_argument("--seed", type=int, default=0, help="first restriction seed")
    s.add_argument("--prime", default="auto")
    s.add_argument("--exact", action="store_true", help="exact rank over Q")
    s.set_defaults(func=cmd_koszul)

    s = sub.add_parser("verify", parents=[common], help="verify a border decomposition")
    s.add_argument("--decomp", required=True, help="builtin:NAME or a decomposition JSON file")
    s.add_argument("--target", required=True)
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--mode", choices=["exact", "numeric"], default="exact")
    s.add_argument("--digits", type=int, default=60)
    s.add_argument("--tol", type=float, default=None)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("apolarity", parents=[common], help="degree-three border apolarity tests")
    s.add_argument("--mode", choices=["torus", "search", "test", "weak"], default="torus")
    s.add_argument("--tensor")
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--candidate", help="candidate JSON file (test mode)")
    s.add_argument("--classes", help='module classes as JSON, e.g. \'{"0": "L"}\'')
    s.add_argument("--multiplicity", choices=["adapted", "abort"], default="adapted")
    s.add_argument("--budget", type=_parse_budget, default=10**6)
    s.set_defaults(func=cmd_apolarity)

    s = sub.add_parser("minrank-cert", parents=[common], help="minimum-rank certificate of a slice space")
    s.add_argument("--tensor", required=True)
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--factor", default="C", choices=["A", "B", "C"])
    s.add_argument("--p", type=int, default=5)
    s.add_argument("--budget", type=_parse_budget, default=10**7)
    s.set_defaults(func=cmd_minrank)

    s = sub.add_parser("tight-weights", parents=[common], help="check or search tight weights")
    s.add_argument("--tensor", required=True)
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--symmetric", action="store_true")
    s.add_argument("--weights", help="weights JSON file to check")
    s.add_argument("--weights-from", help="read weights off a tight-form decomposition")
    s.add_argument("--budget", type=_parse_budget, default=10**5, help="maximum LP solves")
    s.add_argument("--time-limit", type=float, default=60.0, help="seconds for the search")
    s.set_defaults(func=cmd_tight)

    s = sub.add_parser("solve", parents=[common], help="Levenberg-Marquardt search")
    s.add_argument("--problem", help="problem JSON file")
    s.add_argument("--tensor")
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--r", type=int)
    s.add_argument("--symmetric", action="store_true")
    s.add_argument("--weights")
    s.add_argument("--weights-from")
    s.add_argument("--save-problem")
    s.add_argument("--starts", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--sparsify", action="store_true")
    s.add_argument("--dump-params", action="store_true")
    s.add_argument("--save-decomposition")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("omega-bound", parents=[common], help="exponent bound from a border rank")
    s.add_argument("q", type=float)
    s.add_argument("k", type=float)
    s.add_argument("R", type=float)
    s.add_argument("--skew", action="store_true")
    s.set_defaults(func=cmd_omega)

    s = sub.add_parser("reproduce", parents=[common], help="re-run shipped claims")
    s.add_argument("claims", nargs="*")
    s.add_argument("--list", action="store_true")
    s.add_argument("--all", action="store_true")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    if args.threads is not None:
        os.environ["BORDERLAB_THREADS"] = str(args.threads)
        from . import _kernels

        _kernels.set_threads(args.threads)
    from .linalg import BudgetExceeded

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"borderlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        rep = _base(args)
        rep.update({"error": "budget exceeded", "message": str(exc),
                    "partial": getattr(exc, "partial", None)})
        _emit(rep, args)
        return EXIT_BUDGET


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
