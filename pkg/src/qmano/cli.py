"""Command-line driver.

Local data arguments accept a JSON file path, ``js-ref``, or ``random:SEED``.
Complex numbers are written as Python literals (``0.3+0.2j``) or ``re,im``.

Exit codes: 0 success, 1 a check failed or the computation raised a library
error, 2 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fricke as fr
from .datasets import DEFAULT_SEED, js_ref, random_local
from .errors import QDomainError, QManoError
from .jsfamily import (
    PAIRS,
    LocalData,
    MonodromyMatrix,
    det_profile,
    lines_containing,
    pi_invariant,
    pi_prime,
    validate,
)
from .mano import (
    ManoFactors,
    PantsPoint,
    SpecialFiber,
    compose,
    decompose,
    line_matrix,
    pants_matrix,
    recover_pants,
    special_values,
)
from .projective import ProjectivePoint
from .qcore import annulus_rep, log_distance
from .serialize import atomic_write, cjson, to_jsonable

__all__ = ["main", "RunConfig", "build_parser"]


class InputError(Exception):
    """Malformed command-line input (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = DEFAULT_SEED
    tol: float | None = None
    fmt: str = "json"
    out: str | None = None

    def tol_or(self, default: float) -> float:
        return default if self.tol is None else self.tol


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QMANO_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# parsing helpers


def parse_complex(text: str) -> complex:
    s = str(text).strip().replace(" ", "")
    try:
        if "," in s:
            re_, im_ = s.split(",")
            return complex(float(re_), float(im_))
        return complex(s.replace("i", "j"))
    except ValueError as exc:
        raise InputError(f"cannot read a complex number from {text!r}") from exc


def parse_complex_list(text: str, n: int | None = None) -> tuple:
    """Values separated by ``;`` (each as in :func:`parse_complex`)."""
    vals = tuple(parse_complex(p) for p in str(text).split(";") if p.strip())
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} complex values separated by ';', got {len(vals)}")
    return vals


def parse_pair(text: str) -> tuple[int, int]:
    s = str(text).replace(",", "")
    if len(s) != 2 or not s.isdigit():
        raise InputError(f"pair must look like 12 or 1,2; got {text!r}")
    p = tuple(sorted((int(s[0]), int(s[1]))))
    if p not in PAIRS:
        raise InputError(f"pair must be two distinct indices in 1..4; got {text!r}")
    return p


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def load_local(spec: str) -> LocalData:
    if spec == "js-ref":
        return js_ref()
    if spec.startswith("random:"):
        try:
            return random_local(int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise InputError(f"bad random seed in {spec!r}") from exc
    d = _read_json(spec)
    try:
        return LocalData.from_json(d)
    except (QDomainError, ValueError, TypeError) as exc:
        raise InputError(f"malformed local data: {exc}") from exc


def load_matrix(path: str) -> MonodromyMatrix:
    """A matrix file, or any command output carrying a ``matrix`` entry."""
    d = _read_json(path)
    if isinstance(d, dict) and isinstance(d.get("matrix"), dict):
        d = d["matrix"]
    try:
        return MonodromyMatrix.from_json(d)
    except (QDomainError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"malformed matrix: {exc}") from exc


def load_factors(path: str) -> ManoFactors:
    d = _read_json(path)
    if isinstance(d, dict) and isinstance(d.get("factors"), dict):
        d = d["factors"]
    try:
        return ManoFactors.from_json(d)
    except (QDomainError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"malformed factors: {exc}") from exc


# ---------------------------------------------------------------------------
# output


def _p1_columns(prefix: str, p: ProjectivePoint | None) -> dict:
    """Lossless ``(num, den)`` columns plus the chordal scalar ``|z|/sqrt(1+|z|**2)``."""
    if p is None:
        return {f"{prefix}_{k}": "" for k in ("num_re", "num_im", "den_re", "den_im", "chordal")}
    nrm = math.hypot(abs(p.num), abs(p.den))
    return {
        f"{prefix}_num_re": p.num.real, f"{prefix}_num_im": p.num.imag,
        f"{prefix}_den_re": p.den.real, f"{prefix}_den_im": p.den.imag,
        f"{prefix}_chordal": abs(p.num) / nrm,
    }


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(rows[0].keys())
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _flatten(obj, prefix: str = "") -> dict:
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, float) for v in obj):
        out[prefix[:-1] + "_re"] = obj[0]
        out[prefix[:-1] + "_im"] = obj[1]
    elif isinstance(obj, list):
        for n, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{n}."))
    else:
        out[prefix[:-1]] = obj
    return out


def emit(cfg: RunConfig, payload, rows: list[dict] | None = None) -> None:
    """Write ``payload`` (JSON) or ``rows`` (CSV) to ``cfg.out`` or stdout."""
    if cfg.fmt == "csv":
        if rows is None:
            rows = [_flatten(to_jsonable(payload))]
        text = _csv_text(rows)
    else:
        text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig, args) -> int:
    local = load_local(args.local)
    rep = validate(local)
    emit(cfg, {"local": local.to_json(), "report": rep.to_json(), "ok": rep.ok})
    return 0 if rep.ok else 1


def _special_identification(local: LocalData, pair, xi: complex, tol: float = 1e-9):
    """``(kind, h, m)`` when ``xi`` is a special value of the pair, else ``None``."""
    sv = special_values(local, pair)
    i, j = pair
    k, l = [m for m in range(1, 5) if m not in pair]
    labels = [("rho", h, m) for h in (1, 2) for m in (i, j)] + [("sigma", h, m) for h in (1, 2) for m in (k, l)]
    for lab, p in zip(labels, sv.xi_prime + sv.xi_dblprime):
        if log_distance(local.qp, xi, p.value) <= tol:
            return lab
    return None


def cmd_pants(cfg: RunConfig, args) -> int:
    local = load_local(args.local)
    pair = parse_pair(args.pair)
    xi = parse_complex(args.xi)
    eta = parse_complex(args.eta)
    if eta == 0:
        raise InputError("eta must be nonzero")
    qp = local.qp
    lab = _special_identification(local, pair, xi)
    if lab is not None:
        kind, h, m = lab
        M, F = line_matrix(local, kind, h, m, t=eta)
        emit(cfg, {"special_line": f"L_{kind}{h},x{m}", "line_coordinate": cjson(eta),
                   "matrix": M, "factors": F, "lines_containing": [f"L_{a}{b},x{c}" for a, b, c in lines_containing(M)]})
        return 0
    sv = special_values(local, pair)
    kind = args.kind
    if kind == "auto":
        kind = "log" if min(log_distance(qp, xi, u.value) for u in sv.upsilon) <= 1e-9 else "general"
    p = PantsPoint.make(local, pair, xi, eta, kind)
    M, F = pants_matrix(local, p)
    emit(cfg, {"point": p, "chart": kind, "matrix": M, "factors": F})
    return 0


def cmd_decompose(cfg: RunConfig, args) -> int:
    M = load_matrix(args.matrix)
    pair = parse_pair(args.pair)
    F = decompose(M, pair, tol=cfg.tol_or(1e-7))
    rec = recover_pants(M, pair, F)
    out = {"factors": F, "residuals": F.residuals}
    if isinstance(rec, SpecialFiber):
        out["special_fiber"] = rec.to_json()
    else:
        out["point"] = rec
    emit(cfg, out)
    return 0


def cmd_compose(cfg: RunConfig, args) -> int:
    F = load_factors(args.factors)
    M = compose(F, tol=cfg.tol_or(1e-7))
    emit(cfg, M)
    return 0


def _invariant_table(M) -> dict:
    out = {}
    for i, j in PAIRS:
        out[f"Pi{i}{j}"] = _safe(lambda: pi_invariant(M, i, j))
        out[f"Piprime{i}{j}"] = _safe(lambda: pi_prime(M, i, j))
    return out


def _safe(fn):
    try:
        return fn()
    except QManoError:
        return None


def cmd_invariants(cfg: RunConfig, args) -> int:
    M = load_matrix(args.matrix)
    tol = cfg.tol_or(1e-7)
    C, resid = det_profile(M, tol=tol, raise_on_fail=False)
    inv = _invariant_table(M)
    lines = [f"L_{a}{b},x{c}" for a, b, c in lines_containing(M)]
    payload = {"det_constant": cjson(C), "det_residual": resid, "lines": lines,
               "invariants": {k: (v.to_json() if v is not None else None) for k, v in inv.items()}}
    rows = None
    if cfg.fmt == "csv":
        row = {"det_residual": resid, "lines": " ".join(lines)}
        for k, v in inv.items():
            row.update(_p1_columns(k, v))
        rows = [row]
    emit(cfg, payload, rows)
    return 0 if resid <= tol else 1


# scan ------------------------------------------------------------------------


class _NumericProduct:
    """``x -> P(x) Q(x)``: enough of the matrix interface for the invariants."""

    def __init__(self, F: ManoFactors):
        self.local = F.local
        self._F = F
        xs = np.array(F.local.xs)
        self._at_xs = dict(zip(F.local.xs, F.P(xs) @ F.Q(xs)))

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        if x.ndim == 0 and complex(x) in self._at_xs:
            return self._at_xs[complex(x)]
        return self._F.P(x) @ self._F.Q(x)


def scan_grid(local: LocalData, nxi: int, neta: int) -> list[tuple[complex, complex]]:
    """Deterministic ``(xi, eta)`` grid: a golden-angle spiral on the annulus times a log-polar ``eta`` set."""
    q_abs = abs(local.qp.q)
    golden = 0.6180339887498949
    xis = [q_abs ** ((m + 0.5) / nxi) * complex(math.cos(2 * math.pi * ((m * golden) % 1)),
                                                 math.sin(2 * math.pi * ((m * golden) % 1)))
           for m in range(nxi)]
    etas = [math.exp(0.4 * (n - (neta - 1) / 2)) * complex(math.cos(2 * math.pi * n / neta + 0.3),
                                                            math.sin(2 * math.pi * n / neta + 0.3))
            for n in range(neta)]
    return [(x, e) for x in xis for e in etas]


def _scan_row(task) -> dict:
    local_json, pair, xi, eta = task
    local = LocalData.from_json(local_json)
    qp = local.qp
    row = {"xi_re": xi.real, "xi_im": xi.imag, "eta_re": eta.real, "eta_im": eta.imag}
    sv = special_values(local, pair)
    d_ups = min(log_distance(qp, xi, u.value) for u in sv.upsilon)
    d_xi = min(log_distance(qp, xi, p.value) for p in sv.xi_prime + sv.xi_dblprime)
    lab = _special_identification(local, pair, xi)
    try:
        if lab is not None:
            _, F = line_matrix(local, lab[0], lab[1], lab[2], t=eta)
            fiber = f"special:L_{lab[0]}{lab[1]},x{lab[2]}"
        else:
            kind = "log" if d_ups <= 1e-9 else "general"
            from .mano import pants_factors

            F = pants_factors(local, PantsPoint.make(local, pair, xi, eta, kind))
            fiber = "log" if kind == "log" else ("near_special" if min(d_ups, d_xi) < 1e-3 else "general")
        M = _NumericProduct(F)
        inv = _invariant_table(M)
        flag = ""
    except QManoError as exc:
        inv = {f"{p}{i}{j}": None for i, j in PAIRS for p in ("Pi", "Piprime")}
        fiber, flag = "invalid", type(exc).__name__
    row["fiber"] = fiber
    row["flag"] = flag
    for i, j in PAIRS:
        row.update(_p1_columns(f"Pi{i}{j}", inv[f"Pi{i}{j}"]))
    for i, j in PAIRS:
        row.update(_p1_columns(f"Piprime{i}{j}", inv[f"Piprime{i}{j}"]))
    return row


def scan_rows(local: LocalData, pair, nxi: int, neta: int, threads: int = 1) -> list[dict]:
    tasks = [(local.to_json(), pair, x, e) for x, e in scan_grid(local, nxi, neta)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_scan_row, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return [_scan_row(t) for t in tasks]


def cmd_scan(cfg: RunConfig, args) -> int:
    local = load_local(args.local)
    pair = parse_pair(args.pair)
    if args.nxi < 1 or args.neta < 1:
        raise InputError("grid sizes must be positive")
    rows = scan_rows(local, pair, args.nxi, args.neta, _threads())
    emit(cfg, {"local": local.to_json(), "pair": list(pair), "rows": rows}, rows)
    return 0


# fricke ----------------------------------------------------------------------


def _theta_params(args) -> fr.ThetaParams:
    if getattr(args, "e", None):
        return fr.ThetaParams(parse_complex_list(args.e, 4))
    if getattr(args, "a", None):
        return fr.ThetaParams.from_a(parse_complex_list(args.a, 4))
    if getattr(args, "thetas", None):
        return fr.ThetaParams.from_thetas(parse_complex_list(args.thetas, 4))
    raise InputError("give one of --e, --a or --thetas")


def _a_values(args) -> tuple:
    # --a is used verbatim so that e.g. the Cayley parameters stay exact
    if getattr(args, "a", None):
        return parse_complex_list(args.a, 4)
    return _theta_params(args).a


def cmd_fricke(cfg: RunConfig, args) -> int:
    sub = args.fricke_cmd
    tol = cfg.tol_or(1e-9)
    if sub == "eval":
        a = _a_values(args)
        X = parse_complex_list(args.X, 3)
        F, grad = fr.fricke_eval(X, a)
        A = fr.a_to_A(a)
        out = {
            "a": [cjson(v) for v in a],
            "A": {"A0": cjson(A.A0), "At": cjson(A.At), "A1": cjson(A.A1), "Ainf": cjson(A.Ainf)},
            "X": [cjson(v) for v in X], "F": cjson(F), "grad": [cjson(v) for v in grad],
            "goldman": {"{X0,Xt}": cjson(fr.goldman_bracket(X, a, 0, "t")),
                        "{Xt,X1}": cjson(fr.goldman_bracket(X, a, "t", 1)),
                        "{X1,X0}": cjson(fr.goldman_bracket(X, a, 1, 0))},
            "gradient_determinant": {l: cjson(fr.gradient_determinant(X, a, l)) for l in fr.NAMES},
            "on_surface": fr.surface_point(X, a).on_surface,
        }
        emit(cfg, out)
        return 0
    if sub == "lines":
        tp = _theta_params(args)
        lines = fr.lines_24(tp)
        dup = fr.duplicate_lines(lines)
        rows = []
        for n, ln in enumerate(lines):
            worst = max(abs(fr.fricke_eval(ln.point(t), tp)[0]) for t in (-1.3, -0.4, 0.2, 0.9, 1.7))
            rows.append({"index": n, **_flatten(ln.to_json()), "max_residual": worst})
        emit(cfg, {"theta": tp, "lines": [ln.to_json() for ln in lines], "duplicates": dup,
                   "max_residual": max(r["max_residual"] for r in rows)}, rows)
        return 0
    if sub == "smooth":
        tp = _theta_params(args)
        rep = fr.smoothness(tp)
        out = rep.to_json()
        if args.newton:
            hits = fr.singular_point_search(tp.a, starts=args.newton, seed=cfg.seed)
            out["singular_points"] = [[cjson(v) for v in h] for h in hits]
        emit(cfg, out)
        return 0
    if sub == "jimbo":
        a = _a_values(args)
        X1 = parse_complex(args.X1)
        if args.s:
            ss = parse_complex_list(args.s)
        else:
            rng = np.random.default_rng(cfg.seed)
            ss = tuple(complex(np.exp(complex(rng.normal(), rng.uniform(-math.pi, math.pi))))
                       for _ in range(args.n))
        rows = []
        for s in ss:
            X0, Xt = fr.jimbo_param(a, X1, s)
            F, _ = fr.fricke_eval((X0, Xt, X1), a)
            rows.append({"s_re": s.real, "s_im": s.imag, "X0_re": X0.real, "X0_im": X0.imag,
                         "Xt_re": Xt.real, "Xt_im": Xt.imag, "residual": abs(F)})
        worst = max(r["residual"] for r in rows)
        out = {"a": [cjson(v) for v in a], "X1": cjson(X1), "points": rows, "max_residual": worst}
        if args.cross_check:
            if not args.thetas or args.sigma1 is None:
                raise InputError("--cross-check needs --thetas and --sigma1")
            th = parse_complex_list(args.thetas, 4)
            out["cross_check"] = max(fr.jimbo_cross_check(th, parse_complex(args.sigma1), s) for s in ss)
        emit(cfg, out, rows)
        return 0 if worst <= tol else 1
    if sub == "orbit":
        a = _a_values(args)
        word = tuple(args.word)
        if args.X:
            starts = [parse_complex_list(args.X, 3)]
        else:
            starts = _random_surface_points(a, args.starts, cfg.seed)
        tasks = [(X, a, args.n, word) for X in starts]
        if _threads() > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=_threads()) as ex:
                orbits = list(ex.map(_orbit_task, tasks))
        else:
            orbits = [_orbit_task(t) for t in tasks]
        rows = []
        ok = True
        for m, orb in enumerate(orbits):
            for n, (X, on) in enumerate(orb):
                ok &= on
                rows.append({"start": m, "step": n,
                             **{f"X{l}_{c}": getattr(v, c) for l, v in zip(fr.NAMES, X) for c in ("real", "imag")},
                             "on_surface": on})
        emit(cfg, {"a": [cjson(v) for v in a], "word": list(word), "rows": rows, "all_on_surface": ok}, rows)
        return 0 if ok else 1
    raise InputError(f"unknown fricke subcommand {sub!r}")


def _orbit_task(task):
    X, a, n, word = task
    pts = fr.orbit(X, a, n, word)
    return [(p, fr.surface_point(p, a, tol=1e-8).on_surface) for p in pts]


def _random_surface_points(a, n: int, seed: int) -> list[tuple]:
    """Points on ``S(a)`` over random ``X1`` via the conic parameterization."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        X1 = complex(rng.normal(), rng.normal())
        s = complex(np.exp(complex(rng.normal(), rng.uniform(-math.pi, math.pi))))
        try:
            X0, Xt = fr.jimbo_param(a, X1, s)
        except QDomainError:
            continue
        out.append((X0, Xt, X1))
    return out


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmano", description="q-monodromy data, Mano decompositions and the Fricke cubic.")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default %(default)s)")
    p.add_argument("--tol", type=float, default=None, help="override the check tolerance")
    p.add_argument("--format", choices=("json", "csv"), default="json", dest="fmt")
    p.add_argument("--out", default=None, help="output file (written atomically); stdout if omitted")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("validate", help="check FR, NR, non-splitting and Hyp8")
    s.add_argument("local")
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("pants", help="matrix of a chart point (xi, eta)")
    s.add_argument("local")
    s.add_argument("--pair", required=True)
    s.add_argument("--xi", required=True)
    s.add_argument("--eta", required=True)
    s.add_argument("--kind", choices=("auto", "general", "log"), default="auto")
    s.set_defaults(fn=cmd_pants)

    s = sub.add_parser("decompose", help="Mano decomposition of a matrix")
    s.add_argument("matrix")
    s.add_argument("--pair", required=True)
    s.set_defaults(fn=cmd_decompose)

    s = sub.add_parser("compose", help="multiply factors back into a matrix")
    s.add_argument("factors")
    s.set_defaults(fn=cmd_compose)

    s = sub.add_parser("invariants", help="det profile, Pi and Pi' values, special lines")
    s.add_argument("matrix")
    s.set_defaults(fn=cmd_invariants)

    s = sub.add_parser("scan", help="invariants over a (xi, eta) grid")
    s.add_argument("local")
    s.add_argument("--pair", required=True)
    s.add_argument("--nxi", type=int, default=20)
    s.add_argument("--neta", type=int, default=20)
    s.set_defaults(fn=cmd_scan)

    f = sub.add_parser("fricke", help="the Fricke cubic surface")
    fs = f.add_subparsers(dest="fricke_cmd", required=True)

    def params(sp, with_e=True):
        if with_e:
            sp.add_argument("--e", help="e0;et;e1;einf")
        sp.add_argument("--a", help="a0;at;a1;ainf")
        sp.add_argument("--thetas", help="theta0;thetat;theta1;thetainf")

    g = fs.add_parser("eval")
    params(g)
    g.add_argument("--X", required=True, help="X0;Xt;X1")
    g = fs.add_parser("lines")
    params(g)
    g = fs.add_parser("smooth")
    params(g)
    g.add_argument("--newton", type=int, default=0, help="number of Newton starts for a singular-point search")
    g = fs.add_parser("jimbo")
    params(g)
    g.add_argument("--X1", required=True)
    g.add_argument("--s", help="s values separated by ';' (random if omitted)")
    g.add_argument("-n", type=int, default=10)
    g.add_argument("--cross-check", action="store_true", help="compare with the trigonometric formulas")
    g.add_argument("--sigma1")
    g = fs.add_parser("orbit")
    params(g)
    g.add_argument("--X", help="start X0;Xt;X1 (random surface points if omitted)")
    g.add_argument("--starts", type=int, default=1)
    g.add_argument("-n", type=int, default=20)
    g.add_argument("--word", nargs="+", default=["0", "t"], choices=list(fr.NAMES))
    for sp in fs.choices.values():
        sp.set_defaults(fn=cmd_fricke)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig(seed=args.seed, tol=args.tol, fmt=args.fmt, out=args.out)
    try:
        return args.fn(cfg, args)
    except InputError as exc:
        print(f"qmano: error: {exc}", file=sys.stderr)
        return 2
    except QDomainError as exc:
        print(f"qmano: invalid input: {exc}", file=sys.stderr)
        return 2
    except QManoError as exc:
        print(f"qmano: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
