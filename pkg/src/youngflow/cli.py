"""``youngflow`` command-line front end.

Exit codes: 0 success, 2 usage error, 3 unreadable or missing input,
4 parameter out of range, 5 numerical or invariant failure.  Every command
writes its outputs atomically: on failure nothing is written.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bundles, homogeneous, linear, manifolds, paths, yde, young
from .errors import InputError, InvariantError, RangeError, YoungflowError
from .io import OutputBatch, read_json, read_path_csv, table_to_csv_text, to_json_text
from .lie import parse_generator, so2_exp, so3_exp

logger = logging.getLogger("youngflow")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_RANGE = 4
EXIT_FAILURE = 5


# ---------------------------------------------------------------- parsing helpers

def _vector(text: str, size: int = None) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise RangeError(f"expected comma-separated numbers, got {text!r}") from None
    if size is not None and v.shape != (size,):
        raise RangeError(f"expected {size} numbers, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise RangeError(f"non-finite entry in {text!r}")
    return v


def _matrix_file(path) -> np.ndarray:
    raw = read_json(path)
    if isinstance(raw, dict):
        raw = raw.get("A", raw.get("matrix"))
    try:
        A = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{path}: expected a nested list of numbers") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{path}: expected a square matrix, got shape {A.shape}")
    return A


_AXIS = {"e1": 0, "e2": 1, "e3": 2}


def _frame_vector(text: str) -> np.ndarray:
    text = text.strip()
    sign = -1.0 if text.startswith("-") else 1.0
    name = text.lstrip("+-")
    if name not in _AXIS:
        raise RangeError(f"frame vectors are named e1, e2, e3 (optionally signed), got {text!r}")
    v = np.zeros(3)
    v[_AXIS[name]] = sign
    return v


def _frame(text: str, p0: np.ndarray) -> np.ndarray:
    if text == "auto":
        return bundles.frame_at(p0)
    parts = text.split(",")
    if len(parts) != 2:
        raise RangeError(f"--frame takes two names such as e1,e2, got {text!r}")
    return np.column_stack([_frame_vector(s) for s in parts])


def _rotation_arg(text: str) -> np.ndarray:
    if text == "identity":
        return np.eye(3)
    return so3_exp(parse_generator(text))


_FUNCTIONS = {
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
    "square": (lambda x: x**2, lambda x: 2 * x),
    "cube": (lambda x: x**3, lambda x: 3 * x**2),
    "tanh": (np.tanh, lambda x: 1.0 / np.cosh(x) ** 2),
    "sin": (np.sin, np.cos),
    "exp": (np.exp, np.exp),
}


def _componentwise(spec: dict):
    name = spec.get("F", "identity")
    if name == "affine":
        a = float(spec.get("a", 1.0))
        b = float(spec.get("b", 0.0))
        return (lambda x: a * x + b), (lambda x: np.full_like(x, a)), name
    if name not in _FUNCTIONS:
        raise RangeError(f"unknown function {name!r}; choose from {sorted(_FUNCTIONS) + ['affine']}")
    f, df = _FUNCTIONS[name]
    return f, df, name


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


# ---------------------------------------------------------------- commands

def cmd_path_gen(args, out: OutputBatch) -> dict:
    kind = args.kind
    if kind == "fbm":
        p = paths.gen_fbm(args.hurst, args.n, T=args.T, seed=args.seed, dim=args.dim, method=args.method)
    elif kind == "weierstrass":
        p = paths.gen_weierstrass(args.a, args.b, args.n, T=args.T)
    elif kind == "linear":
        p = paths.gen_smooth("linear", args.n, T=args.T, slope=args.slope, intercept=args.intercept)
    elif kind == "sine":
        p = paths.gen_smooth("sine", args.n, T=args.T, amp=args.amp, freq=args.freq, phase=args.phase)
    else:
        if args.coeffs is None:
            raise RangeError("polynomial paths need --coeffs")
        p = paths.gen_smooth("polynomial", args.n, T=args.T, coeffs=list(_vector(args.coeffs)))
    out.add_path(args.out, p)
    est = paths.estimate_holder(p) if len(p) >= 64 else None
    return {
        "command": "path-gen",
        "n": len(p),
        "dim": p.dim,
        "alpha": p.alpha,
        "generator": p.meta.get("generator"),
        "method": p.meta.get("method"),
        "holder_estimate": None if est is None else est.exponent,
    }


def cmd_integrate(args, out: OutputBatch) -> dict:
    Z = read_path_csv(args.driver)
    spec = read_json(args.integrand)
    if not isinstance(spec, dict):
        raise InputError(f"{args.integrand}: integrand spec must be a JSON object")
    mode = spec.get("mode", "constant")
    summary = {"command": "integrate", "mode": mode}
    if mode == "constant":
        M = np.atleast_2d(np.array(spec.get("matrix", np.eye(Z.dim)), dtype=float))
        Y = young.IntegrandPath.constant(M, Z)
    elif mode in ("function", "gradient"):
        f, df, name = _componentwise(spec)
        summary["F"] = name
        if mode == "function":
            # integrand f(Z) acting diagonally on dZ
            Y = young.IntegrandPath.from_path(Z, lambda z: _diag(f(z)))
        else:
            Y = young.IntegrandPath.from_path(Z, lambda z: _diag(df(z)))
            summary["ito_residual"] = young.ito_residual(f, lambda z: _diag(df(z)), Z)
    else:
        raise RangeError(f"integrand mode must be constant, function or gradient, got {mode!r}")
    I = young.young_integrate(Y, Z)
    summary["terminal"] = I.values[-1]
    if len(Z) >= 5 and (len(Z) - 1) % 4 == 0:
        refs = young.dyadic_refinements(Y, Z)
        summary["dyadic_terminal_values"] = refs
    out.add_path(args.out, I, prefix="I")
    return summary


def _field(args, n_hint):
    name = args.field
    if name == "builtin:linear":
        if args.A is None:
            raise RangeError("builtin:linear needs --A")
        return yde.linear_field(_matrix_file(args.A))
    if name == "builtin:zero":
        return yde.zero_field(n_hint, 1)
    if name == "builtin:rotation":
        axis = _vector(args.axis, 3)
        return manifolds.rotation_field(axis)
    raise RangeError(f"unknown field {name!r}; choose builtin:linear, builtin:zero or builtin:rotation")


def cmd_solve(args, out: OutputBatch) -> dict:
    Z = read_path_csv(args.driver)
    x0 = _vector(args.x0)
    X = _field(args, len(x0))
    if X.n != len(x0):
        raise RangeError(f"x0 has {len(x0)} entries, field acts on R^{X.n}")
    if X.d != Z.dim:
        raise RangeError(f"field expects a {X.d}-dim driver, got {Z.dim}")
    if args.manifold:
        M = manifolds.manifold_from_config(read_json(args.manifold))
        traj = manifolds.solve_yde_on_manifold(M, X, Z, x0)
    else:
        traj = yde.solve_euler(X, Z, x0)
    m = len(traj.states)
    rows = np.column_stack([Z.times[:m], traj.states])
    out.add(args.out, table_to_csv_text(["t"] + [f"x_{j + 1}" for j in range(X.n)], rows))
    return {
        "command": "solve",
        "nodes": m,
        "explosion_index": traj.explosion_index,
        "explosion_time": traj.explosion_time,
        "final": traj.final,
    }


def _block_header(k, l):
    cols = ["t"]
    for name, (r, c) in zip(("g1", "g2", "g3", "g4"), ((k, k), (k, l), (l, k), (l, l))):
        cols += [f"{name}_{i + 1}{j + 1}" for i in range(r) for j in range(c)]
    return cols


def _explosion_dict(rep):
    if rep is None:
        return None
    return {"time": rep.time, "index": rep.index, "kind": rep.kind, "bracket": list(rep.bracket)}


def cmd_decompose_linear(args, out: OutputBatch) -> dict:
    A = _matrix_file(args.A)
    Z = read_path_csv(args.driver)
    if args.method == "blocks":
        F = linear.fundamental_solution(A, Z)
        dec = linear.decompose_blocks(F, args.k, args.threshold)
        m = len(dec.g1)
        err = float(np.max(np.abs(dec.compose() - F.mats[:m]), initial=0.0))
        if err > args.tol * max(1.0, float(np.max(np.abs(F.mats[:m]), initial=1.0))):
            raise InvariantError(f"eta psi differs from F by {err:.3g}")
    else:
        dec = linear.decompose_via_yde(A, args.k, Z)
        m = len(dec.g1)
        F = linear.fundamental_solution(A, Z)
        err = float(np.max(np.abs(dec.compose() - F.mats[:m]), initial=0.0))
    rep = linear.detect_explosion(A, args.k, Z, args.threshold)
    out.add(args.out, table_to_csv_text(_block_header(args.k, A.shape[0] - args.k), dec.flat()))
    return {
        "command": "decompose-linear",
        "method": args.method,
        "k": args.k,
        "nodes": m,
        "explosion_index": dec.explosion_index,
        "explosion_kind": dec.info.get("explosion_kind"),
        "explosion": _explosion_dict(rep),
        "compose_error": err,
    }


def cmd_detect_explosion(args, out: OutputBatch) -> dict:
    A = _matrix_file(args.A)
    Z = read_path_csv(args.driver)
    rep = linear.detect_explosion(A, args.k, Z, args.threshold)
    summary = {"command": "detect-explosion", "k": args.k, "threshold": args.threshold,
               "explosion": _explosion_dict(rep)}
    if args.out:
        out.add(args.out, to_json_text(summary))
    return summary


def cmd_schur_foliation(args, out: OutputBatch) -> dict:
    A = _matrix_file(args.A)
    fol = linear.schur_foliation(A, args.k)
    k = fol.k
    lower_left = float(np.max(np.abs(fol.T[k:, :k])))
    recon = float(np.max(np.abs(fol.P @ fol.T @ fol.P.T - A)))
    summary = {
        "command": "schur-foliation",
        "k": k,
        "admissible": list(fol.admissible),
        "real_count": fol.real_count,
        "pair_count": fol.pair_count,
        "lower_left_max": lower_left,
        "reconstruction": recon,
        "P": fol.P,
        "T": fol.T,
    }
    if args.out:
        out.add(args.out, to_json_text(summary))
    return summary


def cmd_transport(args, out: OutputBatch) -> dict:
    x = read_path_csv(args.path)
    v = _vector(args.v, 3)
    p0 = x.values[0]
    u0 = _frame(args.frame, p0)
    lift = bundles.horizontal_lift(None, x, u0)
    vT = lift.u[-1] @ (lift.u[0].T @ v)
    summary = {
        "command": "transport",
        "v": v,
        "v_T": vT,
        "norm_change": float(np.linalg.norm(vT) - np.linalg.norm(v)),
        "frame_orthonormality_error": lift.orthonormality_error(),
        "closed": bool(np.allclose(x.values[0], x.values[-1], atol=1e-12)),
    }
    if summary["closed"]:
        summary["holonomy_angle"] = bundles.holonomy_angle(lift)
    out.add(args.out, to_json_text(summary))
    return summary


def cmd_develop(args, out: OutputBatch) -> dict:
    w = read_path_csv(args.plane)
    p0 = _vector(args.p0, 3)
    u0 = _frame(args.frame, p0)
    x = bundles.develop(None, w, u0, p0)
    out.add_path(args.out, x, prefix="x")
    arc = float(np.sum(np.arccos(np.clip(np.einsum("na,na->n", x.values[:-1], x.values[1:]), -1, 1))))
    return {"command": "develop", "nodes": len(x), "final": x.values[-1], "arclength": arc}


def cmd_antidevelop(args, out: OutputBatch) -> dict:
    x = read_path_csv(args.path)
    u0 = _frame(args.frame, x.values[0])
    y = bundles.antidevelop(None, x, u0)
    out.add_path(args.out, y, prefix="w")
    return {"command": "antidevelop", "nodes": len(y), "final": y.values[-1]}


def cmd_decompose_homogeneous(args, out: OutputBatch) -> dict:
    A = parse_generator(args.A)
    Z = read_path_csv(args.driver)
    x = _rotation_arg(args.x)
    dec = homogeneous.decompose_homogeneous(A, Z, x)
    res = dec.residuals
    if res["reconstruction"] > args.tol:
        raise InvariantError(f"reconstruction residual {res['reconstruction']:.3g} exceeds {args.tol:g}")
    summary = {"command": "decompose-homogeneous", "residuals": res, "nodes": len(Z)}
    out.add(args.out, to_json_text({
        **summary,
        "times": dec.times,
        "g": dec.g.reshape(len(Z), 9),
        "gH": dec.gH.reshape(len(Z), 9),
        "h": dec.h.reshape(len(Z), 9),
        "h_angle": dec.h_angle,
        "x": dec.x,
    }))
    return summary


def cmd_trivial_bundle(args, out: OutputBatch) -> dict:
    A = parse_generator(args.A)
    B = args.B * np.array([[0.0, -1.0], [1.0, 0.0]])
    Z = read_path_csv(args.driver)
    x = _rotation_arg(args.x)
    y = so2_exp(args.y)
    tb = homogeneous.trivial_bundle_decompose(A, B, Z, (x, y))
    if tb.reconstruction > args.tol:
        raise InvariantError(f"reconstruction residual {tb.reconstruction:.3g} exceeds {args.tol:g}")
    summary = {"command": "trivial-bundle", "reconstruction": tb.reconstruction, "nodes": len(Z)}
    n = len(Z)
    out.add(args.out, to_json_text({
        **summary,
        "times": tb.times,
        "eta_G": tb.eta_G.reshape(n, 9),
        "h": tb.h.reshape(n, 4),
    }))
    return summary


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--tol", type=float, default=1e-6, help="tolerance for hard invariant checks")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--summary", type=Path, help="also write the JSON summary to this file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="youngflow", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, out_required=True):
        p = sub.add_parser(name, parents=[common], help=help_, allow_abbrev=False)
        p.add_argument("--out", type=Path, required=out_required, help="output file")
        p.set_defaults(func=func)
        return p

    p = add("path-gen", cmd_path_gen, "generate a driver path (CSV + JSON sidecar)")
    p.add_argument("--kind", choices=["fbm", "weierstrass", "linear", "sine", "polynomial"], required=True)
    p.add_argument("--n", type=int, required=True, help="number of grid nodes")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--hurst", type=float, default=0.75)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--method", choices=["auto", "circulant", "cholesky"], default="auto")
    p.add_argument("--a", type=float, default=0.9)
    p.add_argument("--b", type=float, default=1.1)
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--intercept", type=float, default=0.0)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--freq", type=float, default=1.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--coeffs", help="polynomial coefficients, constant term first")

    p = add("integrate", cmd_integrate, "Young integral of an integrand against a driver")
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--integrand", type=Path, required=True, help="JSON integrand spec")

    p = add("solve", cmd_solve, "Euler solution of dx = X(x) dZ")
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--field", default="builtin:linear")
    p.add_argument("--A", type=Path, help="JSON matrix for builtin:linear")
    p.add_argument("--axis", default="0,0,1", help="rotation axis for builtin:rotation")
    p.add_argument("--x0", required=True)
    p.add_argument("--manifold", type=Path, help="JSON manifold config for projected Euler")

    p = add("decompose-linear", cmd_decompose_linear, "split a linear flow into horizontal and vertical factors")
    p.add_argument("--A", type=Path, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--method", choices=["blocks", "yde"], default="blocks")
    p.add_argument("--threshold", type=float, default=linear.DEFAULT_SINGULAR_THRESHOLD)

    p = add("detect-explosion", cmd_detect_explosion, "first time the linear splitting fails", out_required=False)
    p.add_argument("--A", type=Path, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=linear.DEFAULT_SINGULAR_THRESHOLD)

    p = add("schur-foliation", cmd_schur_foliation, "choose an explosion-free splitting from the real Schur form",
            out_required=False)
    p.add_argument("--A", type=Path, required=True)
    p.add_argument("--k", type=int)

    p = add("transport", cmd_transport, "parallel transport along a sphere path")
    p.add_argument("--path", type=Path, required=True)
    p.add_argument("--v", required=True, help="tangent vector at the first node")
    p.add_argument("--frame", default="auto", help="initial frame, e.g. e1,e2, or auto")

    p = add("develop", cmd_develop, "roll a plane path onto the unit sphere")
    p.add_argument("--plane", type=Path, required=True)
    p.add_argument("--p0", default="0,0,1")
    p.add_argument("--frame", default="e1,e2")

    p = add("antidevelop", cmd_antidevelop, "unroll a sphere path into the plane")
    p.add_argument("--path", type=Path, required=True)
    p.add_argument("--frame", default="auto")

    p = add("decompose-homogeneous", cmd_decompose_homogeneous, "split a rotation flow over the sphere")
    p.add_argument("--A", required=True, help="axis:x|y|z or skew:a,b,c")
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--x", default="identity", help="identity or a rotation vector skew:a,b,c")

    p = add("trivial-bundle", cmd_trivial_bundle, "closed-form splitting on SO(3) x SO(2)")
    p.add_argument("--A", required=True)
    p.add_argument("--B", type=float, required=True, help="rotation rate of the SO(2) generator")
    p.add_argument("--driver", type=Path, required=True)
    p.add_argument("--x", default="identity")
    p.add_argument("--y", type=float, default=0.0, help="angle of the SO(2) starting point")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = OutputBatch()
    try:
        with np.errstate(all="ignore"):
            summary = args.func(args, out)
        summary_text = to_json_text(summary)
        if args.summary:
            out.add(args.summary, summary_text)
        out.commit()
    except InputError as exc:
        print(f"youngflow: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RangeError as exc:
        print(f"youngflow: out of range: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except YoungflowError as exc:
        print(f"youngflow: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"youngflow: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(summary_text)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
