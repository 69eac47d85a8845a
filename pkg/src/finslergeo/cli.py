"""Config-driven command line front end.

Scenarios are JSON documents (version 1) naming a metric, a task and its
parameters; tasks emit a human-readable report plus machine-readable CSV
artifacts. Exit codes: 0 all residuals inside tolerances, 2 residual
failure, 1 configuration or domain error.
"""

from __future__ import annotations

import argparse
import ast
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import identities as ident
from . import metrics as metrics_mod
from . import submanifolds as subm
from .errors import ConfigError, FinslerError
from .jets import smath
from .lifts import (affine_coefficients, classical_lift,
                    condition_residuals, lift_curvature, lift_tensors,
                    random_admissible_lift)
from .metrics import MetricSpec, TangentVector, check_metric, random_tangent
from .rng import SplitMix64
from .spray import PointFrame, curvature_endomorphism, flag_curvature
from .variational import (Curve, FieldAlongCurve, VariationFamily,
                          integrate_geodesic, jacobi_integrate,
                          jacobi_variation_oracle, metric_value_on,
                          parallel_transport, second_variation_formula,
                          variation_energy_derivatives,
                          variation_symmetry_residual)

TASK_NAMES = ("check-metric", "condition-matrix", "curvature-sweep", "geodesic",
              "jacobi-compare", "second-variation", "sff-compare", "lift-independence")

CLASSICAL = ("berwald", "cartan", "chern-rund", "hashiguchi")


# -- expression sub-language -----------------------------------------------------

_EXPR_FUNCS = {"sqrt": smath.sqrt, "sin": smath.sin, "cos": smath.cos,
               "exp": smath.exp, "log": smath.log}

_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name,
                  ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
                  ast.USub, ast.UAdd, ast.Load)


def compile_expression(src: str, dim: int, allow_y: bool = True):
    """Compile an arithmetic expression in x1..xn (and y1..yn) to a generic rule."""
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {src!r}: {exc}") from exc
    names = {f"x{i + 1}" for i in range(dim)}
    if allow_y:
        names |= {f"y{i + 1}" for i in range(dim)}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"expression {src!r}: construct {type(node).__name__} not allowed")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _EXPR_FUNCS:
                raise ConfigError(f"expression {src!r}: only {sorted(_EXPR_FUNCS)} callable")
            if node.keywords:
                raise ConfigError("keyword arguments not allowed in expressions")
        if isinstance(node, ast.Name) and node.id not in names and node.id not in _EXPR_FUNCS:
            raise ConfigError(f"expression {src!r}: unknown name {node.id!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f"expression {src!r}: only numeric constants allowed")
    code = compile(tree, "<scenario expression>", "eval")

    def rule(xs, ys=None):
        env = {f"x{i + 1}": xs[i] for i in range(dim)}
        if allow_y and ys is not None:
            env.update({f"y{i + 1}": ys[i] for i in range(dim)})
        env.update(_EXPR_FUNCS)
        return eval(code, {"__builtins__": {}}, env)  # noqa: S307 - sandboxed AST

    return rule


def metric_from_config(cfg) -> MetricSpec:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("metric descriptor must be a mapping with a 'kind' field")
    kind = cfg["kind"]
    dim = int(cfg.get("dim", 2))
    if kind == "euclidean":
        return metrics_mod.euclidean(dim)
    if kind == "sphere_stereographic":
        return metrics_mod.sphere_stereographic(dim)
    if kind == "poincare_disk":
        return metrics_mod.poincare_disk(dim)
    if kind == "funk":
        return metrics_mod.funk(dim)
    if kind == "randers":
        beta_cfg = cfg.get("beta")
        if beta_cfg is None:
            raise ConfigError("randers metric needs a 'beta' field")
        if all(isinstance(b, (int, float)) for b in beta_cfg):
            beta = [float(b) for b in beta_cfg]
        else:
            comps = [compile_expression(str(b), dim, allow_y=False) for b in beta_cfg]
            beta = lambda xs: [c(xs) for c in comps]
        name = cfg.get("name", "randers")
        return metrics_mod.randers(dim, beta, name=name, params=dict(cfg))
    if kind == "custom":
        if "f2" not in cfg:
            raise ConfigError("custom metric needs an 'f2' expression")
        rule = compile_expression(str(cfg["f2"]), dim, allow_y=True)
        return metrics_mod.custom(dim, lambda xs, ys: rule(xs, ys),
                                  name=cfg.get("name", "custom"), params=dict(cfg))
    raise ConfigError(f"unknown metric kind {kind!r}")


def submanifold_from_config(cfg, dim) -> subm.Submanifold:
    if not isinstance(cfg, dict) or "shape" not in cfg:
        raise ConfigError("submanifold descriptor must be a mapping with a 'shape' field")
    shape = cfg["shape"]
    if shape == "circle":
        return subm.circle(cfg.get("center", [0.0] * dim), float(cfg.get("radius", 1.0)))
    if shape == "line":
        return subm.affine_subspace(cfg.get("point", [0.0] * dim),
                                    [cfg.get("direction", [1.0] + [0.0] * (dim - 1))])
    raise ConfigError(f"unknown submanifold shape {shape!r}")


# -- output helpers ---------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows, metadata):
    lines = [f"# {k} = {_fmt(v)}" for k, v in metadata]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TaskResult:
    def __init__(self, name):
        self.name = name
        self.passed = True
        self.messages = []
        self.csv_header = None
        self.csv_rows = []
        self.metadata = []
        self.worst = 0.0

    def check(self, label, residual, tol, invert=False):
        ok = (residual > tol) if invert else (residual < tol)
        rel = ">" if invert else "<"
        self.messages.append(
            f"  [{'PASS' if ok else 'FAIL'}] {label}: {residual:.3e} {rel} {tol:.1e}")
        if not ok:
            self.passed = False
        if not invert:
            self.worst = max(self.worst, residual)
        return ok

    def note(self, text):
        self.messages.append(f"  {text}")


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FINSLERGEO_WORKERS", "1")))
    except ValueError:
        return 1


def _map_samples(fn, items):
    w = _workers()
    if w == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


# -- tasks ------------------------------------------------------------------------


def task_check_metric(ms, params, seed) -> TaskResult:
    res = TaskResult("check-metric")
    samples = int(params.get("samples", 100))
    tols = params.get("tolerances", {})
    tol_h = float(tols.get("homogeneity", 1e-10))
    tol_g = float(tols.get("gww", 1e-10))
    rep = check_metric(ms, samples, seed)
    res.metadata = [("task", "check-metric"), ("metric", ms.name),
                    ("samples", samples), ("seed", seed)]
    res.csv_header = ("quantity", "value")
    res.csv_rows = [(k, v) for k, v in rep.rows()]
    res.check("homogeneity max residual", rep.homogeneity_max, tol_h)
    res.check("F^2 = g_w(w,w) max residual", rep.gww_identity_max, tol_g)
    expect_pd_failures = bool(params.get("expect_pd_failures", False))
    if expect_pd_failures:
        res.check("positive-definiteness failures found", float(rep.pd_failures), 0.5,
                  invert=True)
    elif rep.pd_failures:
        res.passed = False
        res.note(f"[FAIL] {rep.pd_failures} positive-definiteness failures")
    if params.get("tensor_identities"):
        iden_tols = {"cartan_contract": 1e-9, "cprime_contract": 1e-9,
                     "full_symmetry": 1e-10, "gww_identity": 1e-10,
                     "euler_gradient": 1e-10, "g_homogeneity": 1e-10,
                     "cartan_homogeneity": 1e-9}
        iden_tols.update({k: float(v) for k, v in params.get("identity_tolerances", {}).items()})
        rng = SplitMix64(seed + 1)
        worst = {k: 0.0 for k in iden_tols}
        n_id = int(params.get("identity_samples", 25))
        for _ in range(n_id):
            w = random_tangent(ms, rng)
            for k, v in ident.tensor_identity_residuals(ms, w).items():
                worst[k] = max(worst[k], v)
        for k, tol in iden_tols.items():
            res.check(f"identity {k}", worst[k], tol)
            res.csv_rows.append((k, worst[k]))
    return res


def task_condition_matrix(ms, params, seed) -> TaskResult:
    res = TaskResult("condition-matrix")
    samples = int(params.get("samples", 50))
    tol = float(params.get("tolerance", 1e-7))
    lift_names = params.get("lifts", list(CLASSICAL))
    conditions = tuple(params.get("conditions",
                                  ("T1", "T2", "T3", "M1", "M2", "M3", "M4", "M5", "M6", "M7")))
    lifts = {name: classical_lift(name, ms) for name in lift_names}
    rng = SplitMix64(seed)
    points = [random_tangent(ms, rng) for _ in range(samples)]

    def eval_point(w):
        fr = PointFrame(ms, w, order=4)
        return {name: condition_residuals(lift, fr, conditions)
                for name, lift in lifts.items()}

    per_point = _map_samples(eval_point, points)
    worst = {name: {c: 0.0 for c in conditions} for name in lift_names}
    for entry in per_point:
        for name in lift_names:
            for c in conditions:
                worst[name][c] = max(worst[name][c], entry[name][c])

    res.metadata = [("task", "condition-matrix"), ("metric", ms.name),
                    ("samples", samples), ("seed", seed), ("tolerance", tol)]
    res.csv_header = ("lift", "condition", "max_residual")
    for name in lift_names:
        for c in conditions:
            res.csv_rows.append((name, c, worst[name][c]))

    expected = params.get("expect", {})
    for name, conds in expected.items():
        for c in conds:
            res.check(f"{name} satisfies {c}", worst[name][c], tol)
    for name, fails in params.get("expect_fail", {}).items():
        for c, threshold in fails.items():
            res.check(f"{name} violates {c}", worst[name][c], float(threshold), invert=True)
    for name, conds in params.get("expect_exact", {}).items():
        passing = {c for c in conditions if worst[name][c] < tol}
        ok = passing == set(conds)
        res.messages.append(f"  [{'PASS' if ok else 'FAIL'}] {name} passes exactly {sorted(conds)}"
                            f" (got {sorted(passing)})")
        res.passed &= ok

    identities = params.get("identities")
    if identities:
        _run_identity_battery(ms, identities, seed, res)
    return res


def _run_identity_battery(ms, identities, seed, res: TaskResult):
    rng = SplitMix64(seed + 77)
    n_pts = int(identities.get("samples", 10))
    tol_exact = float(identities.get("tolerance", 1e-7))
    tol_fd = float(identities.get("fd_tolerance", 1e-6))
    points = [random_tangent(ms, rng) for _ in range(n_pts)]
    lifts = {name: classical_lift(name, ms) for name in CLASSICAL}

    worst = 0.0
    for name, lift in lifts.items():
        for w in points:
            worst = max(worst, ident.nabla_s_g_residual(lift, ms, w))
    res.check("nabla_S g = 0 (all classical lifts)", worst, tol_exact)
    res.csv_rows.append(("identity", "nabla_S_g", worst))

    worst = 0.0
    for name, lift in lifts.items():
        for w in points:
            worst = max(worst, ident.symmetry_residual(lift, ms, w.x, rng))
    res.check("covariant symmetry (T2 lifts)", worst, tol_fd)
    res.csv_rows.append(("identity", "symmetry_D", worst))

    worst = 0.0
    for name in ("berwald", "cartan"):
        for w in points:
            worst = max(worst, ident.metric_compat_residual(lifts[name], ms, w.x, rng))
    res.check("metric compatibility (M1+M2)", worst, tol_fd)
    res.csv_rows.append(("identity", "metric_compat", worst))

    worst = 0.0
    for w in points:
        worst = max(worst, ident.metric_compat_geodesic_residual(ms, w.x, rng))
    res.check("metric compatibility along geodesic fields", worst, tol_fd)
    res.csv_rows.append(("identity", "metric_compat_geodesic", worst))

    worst = 0.0
    for name in CLASSICAL:
        for w in points:
            worst = max(worst, ident.family_metric_identity_residual(name, ms, w.x, rng))
    res.check("family metric identities", worst, tol_fd)
    res.csv_rows.append(("identity", "family_metric", worst))

    worst = 0.0
    for name, lift in lifts.items():
        for w in points:
            worst = max(worst, ident.spray_derivative_residual(lift, ms, w, rng))
    res.check("spray-direction derivative identity (T1 lifts)", worst, tol_exact)
    res.csv_rows.append(("identity", "spray_derivative", worst))

    # variation-square symmetry on a bundled family
    base = np.array([0.0, 0.0])
    d = np.array([0.25, 0.1])

    def rule(s, t):
        return base + t * d + np.array([0.05 * s * np.sin(np.pi * t),
                                        0.04 * s * t * (1 - t) + 0.03 * s])

    worst = variation_symmetry_residual(ms, VariationFamily(rule=rule), nodes=101)
    res.check("variation covariant-derivative symmetry", worst, tol_fd)
    res.csv_rows.append(("identity", "variation_symmetry", worst))


def task_curvature_sweep(ms, params, seed) -> TaskResult:
    res = TaskResult("curvature-sweep")
    flags = int(params.get("flags", 100))
    rng = SplitMix64(seed)
    res.metadata = [("task", "curvature-sweep"), ("metric", ms.name),
                    ("flags", flags), ("seed", seed)]
    res.csv_header = ("x", "y", "u", "K")
    samples = []
    for _ in range(flags):
        w = random_tangent(ms, rng)
        u = rng.direction(ms.dim)
        samples.append((w, u))

    def eval_flag(item):
        w, u = item
        fr = PointFrame(ms, w, order=4)
        return flag_curvature(ms, w, u, _frame=fr), fr

    values = []
    for w, u in samples:
        k, fr = eval_flag((w, u))
        values.append(k)
        res.csv_rows.append((";".join(_fmt(v) for v in w.x),
                             ";".join(_fmt(v) for v in w.y),
                             ";".join(_fmt(v) for v in u), k))
    values = np.array(values)
    if "expect_value" in params:
        target = float(params["expect_value"])
        tol = float(params.get("tolerance", 1e-6))
        res.check(f"flag curvature = {target}", float(np.max(np.abs(values - target))), tol)
    if params.get("flag_invariance", True):
        worst = 0.0
        for w, u in samples[: min(20, flags)]:
            k0 = flag_curvature(ms, w, u)
            k1 = flag_curvature(ms, w, u + 3.0 * w.y)
            k2 = flag_curvature(ms, w, 0.2 * u)
            worst = max(worst, abs(k1 - k0), abs(k2 - k0))
        res.check("flag invariance under u -> u + 3w, 0.2u", worst, 1e-9)
    if params.get("christoffel_check"):
        gfield = getattr(ms, "_g_field", None)
        if gfield is None:
            raise ConfigError("christoffel_check requires a Riemannian built-in")
        tol_r = float(params.get("riemann_tolerance", 1e-7))
        tol_a = float(params.get("affine_tolerance", 1e-8))
        from .findiff import christoffel, riemann_jacobi_operator

        worst_r, worst_a, worst_f = 0.0, 0.0, 0.0
        lifts = {name: classical_lift(name, ms) for name in CLASSICAL}
        for w, u in samples[: min(20, flags)]:
            fr = PointFrame(ms, w, order=4)
            oracle = riemann_jacobi_operator(lambda x: gfield(list(x)), w.x, w.y)
            worst_r = max(worst_r, float(np.max(np.abs(fr.R - oracle))))
            gam = christoffel(lambda x: np.asarray(gfield(list(x)), float), w.x)
            a_ref = None
            for name, lift in lifts.items():
                A = affine_coefficients(lift, ms, w, _frame=fr).A
                worst_a = max(worst_a, float(np.max(np.abs(A - gam))))
                if a_ref is None:
                    a_ref = A
                else:
                    worst_f = max(worst_f, float(np.max(np.abs(A - a_ref))))
        res.check("curvature matches Christoffel oracle", worst_r, tol_r)
        res.check("affine coefficients = Levi-Civita symbols", worst_a, tol_a)
        res.check("four classical lifts identical", worst_f, 1e-12)
    return res


def task_geodesic(ms, params, seed) -> TaskResult:
    res = TaskResult("geodesic")
    x0 = [float(v) for v in params.get("x0", [0.0] * ms.dim)]
    y0 = [float(v) for v in params.get("y0", [1.0] + [0.0] * (ms.dim - 1))]
    t_end = float(params.get("t", 1.0))
    rtol = float(params.get("rtol", 1e-9))
    nodes = int(params.get("nodes", 401))
    geo = integrate_geodesic(ms, TangentVector(x0, y0), t_end, rtol=rtol, nodes=nodes)
    res.metadata = [("task", "geodesic"), ("metric", ms.name), ("t", t_end),
                    ("rtol", rtol), ("seed", seed)]
    res.csv_header = tuple(["t"] + [f"x{i + 1}" for i in range(ms.dim)]
                           + [f"y{i + 1}" for i in range(ms.dim)])
    for i, t in enumerate(geo.grid):
        res.csv_rows.append((t, *geo.points[i], *geo.velocities[i]))
    fvals = [metric_value_on(ms, geo, i) for i in range(0, nodes, max(1, nodes // 40))]
    drift = max(fvals) - min(fvals)
    res.check("speed conservation drift", drift, 10.0 * max(rtol, 1e-9) * max(1.0, fvals[0]))
    return res


def task_jacobi_compare(ms, params, seed) -> TaskResult:
    res = TaskResult("jacobi-compare")
    samples = int(params.get("samples", 10))
    tol = float(params.get("tolerance", 1e-3))
    t_end = float(params.get("t", 1.0))
    rng = SplitMix64(seed)
    res.metadata = [("task", "jacobi-compare"), ("metric", ms.name),
                    ("samples", samples), ("seed", seed), ("tolerance", tol)]
    res.csv_header = ("sample", "sup_norm_diff", "profile_residual")
    sinh_tol = float(params.get("profile_tolerance", 1e-3))
    curv = params.get("constant_curvature")

    def one(idx):
        w0 = random_tangent(ms, rng)
        scale = metrics_mod.metric_value(ms, w0)
        w0 = TangentVector(w0.x, w0.y / scale)
        u = rng.direction(ms.dim)
        geo = integrate_geodesic(ms, w0, t_end)
        J = jacobi_integrate(ms, geo, np.zeros(ms.dim), u)
        Jor = jacobi_variation_oracle(ms, w0, u, geo.grid)
        sup = float(np.max(np.abs(J.vectors - Jor)))
        prof = 0.0
        if curv is not None:
            gm0 = PointFrame(ms, w0, order=2).g
            uperp = u - (u @ gm0 @ w0.y) / (w0.y @ gm0 @ w0.y) * w0.y
            unorm = float(np.sqrt(uperp @ gm0 @ uperp))
            Jp = jacobi_integrate(ms, geo, np.zeros(ms.dim), uperp)
            kap = float(curv)
            for i in range(0, len(geo.grid), 40):
                gi = PointFrame(ms, TangentVector(geo.points[i], geo.velocities[i]), order=2).g
                nrm = float(np.sqrt(Jp.vectors[i] @ gi @ Jp.vectors[i]))
                t = geo.grid[i]
                if kap > 0:
                    ref = unorm * np.sin(np.sqrt(kap) * t) / np.sqrt(kap)
                elif kap < 0:
                    ref = unorm * np.sinh(np.sqrt(-kap) * t) / np.sqrt(-kap)
                else:
                    ref = unorm * t
                prof = max(prof, abs(nrm - abs(ref)))
        return sup, prof

    rows = [one(i) for i in range(samples)]
    worst = max(r[0] for r in rows)
    worst_prof = max(r[1] for r in rows)
    for i, (sup, prof) in enumerate(rows):
        res.csv_rows.append((i, sup, prof))
    res.check("ODE vs geodesic-variation oracle (sup norm)", worst, tol)
    if curv is not None:
        res.check(f"constant-curvature profile K={curv}", worst_prof, sinh_tol)
    return res


def _normal_direction(ms, x, vel, rng):
    """A direction g_w-orthogonal to vel at (x, vel)."""
    fr = PointFrame(ms, TangentVector(x, vel), order=2)
    m = fr.g @ vel
    d = rng.direction(len(x))
    d = d - (d @ m) / (vel @ m) * vel
    return d / np.linalg.norm(d)


def task_second_variation(ms, params, seed) -> TaskResult:
    res = TaskResult("second-variation")
    mode = params.get("mode", "fixed")
    tol_rel = float(params.get("tolerance", 1e-3))
    tol_first = float(params.get("first_variation_tolerance", 1e-6))
    rng = SplitMix64(seed)
    res.metadata = [("task", "second-variation"), ("metric", ms.name),
                    ("mode", mode), ("seed", seed)]
    res.csv_header = ("quantity", "value")

    if mode == "fixed":
        w0 = random_tangent(ms, rng)
        w0 = TangentVector(w0.x, w0.y / metrics_mod.metric_value(ms, w0))
        geo = integrate_geodesic(ms, w0, 1.0)
        e0 = _normal_direction(ms, w0.x, w0.y, rng)
        pt = parallel_transport(ms, geo, e0)
        from scipy.interpolate import CubicSpline

        e_spline = CubicSpline(geo.grid, pt.vectors)
        vfield = FieldAlongCurve(geo.grid, np.sin(np.pi * geo.grid)[:, None] * pt.vectors)
        formula = second_variation_formula(ms, geo, vfield)
        dense = geo.dense
        n = ms.dim

        def rule(s, t):
            return dense(t)[:n] + s * np.sin(np.pi * t) * e_spline(t)

        fam = VariationFamily(rule=rule)
        fd = variation_energy_derivatives(ms, fam, 2)
        first = variation_energy_derivatives(ms, fam, 1)
        res.csv_rows += [("formula", formula), ("fd", fd), ("first_variation", first)]
        res.check("second variation formula vs FD (relative)",
                  abs(formula - fd) / max(1e-12, abs(fd)), tol_rel)
        res.check("first variation at geodesic", abs(first), tol_first)
        return res

    if mode != "submanifold":
        raise ConfigError(f"unknown second-variation mode {mode!r}")

    # geodesic segment normal to an affine line at each end
    x_a = np.asarray(params.get("x0", [0.05, -0.1]), float)
    d1v = np.asarray(params.get("direction", [0.9, 0.45]), float)
    line1 = subm.affine_subspace(x_a, [d1v], name="P1")
    guess = np.array([-d1v[1], d1v[0]])
    nv = subm.normal_cone_solve(line1, [0.0], ms, guess=guess)
    geo = integrate_geodesic(ms, TangentVector(x_a, nv.eta), 1.0)
    x_b, vel_b = geo.points[-1], geo.velocities[-1]
    d2v = _normal_direction(ms, x_b, vel_b, rng)
    line2 = subm.affine_subspace(x_b, [d2v], name="P2")

    c1 = 0.8
    c2 = -0.6
    e0 = rng.direction(ms.dim)
    dense = geo.dense
    n = ms.dim

    def vfun(t):
        return (1 - t) * c1 * d1v + t * c2 * d2v + np.sin(np.pi * t) * e0

    def rule(s, t):
        return dense(t)[:n] + s * vfun(t)

    vfield = FieldAlongCurve(geo.grid, np.array([vfun(t) for t in geo.grid]))
    formula = second_variation_formula(ms, geo, vfield, P1=(line1, [0.0]), P2=(line2, [0.0]))
    fam = VariationFamily(rule=rule)
    fd = variation_energy_derivatives(ms, fam, 2)
    first = variation_energy_derivatives(ms, fam, 1)
    from .submanifolds import sff_connection

    h1 = sff_connection(line1, [0.0], geo.velocities[0], [c1], [c1], ms)
    h2 = sff_connection(line2, [0.0], vel_b, [c2], [c2], ms)
    res.csv_rows += [("formula", formula), ("fd", fd), ("first_variation", first),
                     ("h_term_start", h1), ("h_term_end", h2)]
    res.check("second variation formula vs FD (relative)",
              abs(formula - fd) / max(1e-12, abs(fd)), tol_rel)
    res.check("first variation at geodesic", abs(first), tol_first)
    res.check("boundary terms nonzero (exercised)", min(abs(h1), abs(h2)),
              float(params.get("h_term_floor", 1e-4)), invert=True)
    return res


def task_sff_compare(ms, params, seed) -> TaskResult:
    res = TaskResult("sff-compare")
    samples = int(params.get("samples", 10))
    tol = float(params.get("tolerance", 1e-5))
    tol_lag = float(params.get("lagrangean_tolerance", 1e-6))
    rng = SplitMix64(seed)
    subs = [submanifold_from_config(c, ms.dim) for c in params.get(
        "submanifolds", [{"shape": "circle", "radius": 1.0},
                         {"shape": "line", "point": [0.1, -0.2], "direction": [0.8, 0.6]}])]
    res.metadata = [("task", "sff-compare"), ("metric", ms.name),
                    ("samples", samples), ("seed", seed)]
    res.csv_header = ("submanifold", "param", "agreement", "lagrangean", "lift_spread")
    worst_agree, worst_lag, worst_spread, worst_t2 = 0.0, 0.0, 0.0, 0.0
    lifts = [classical_lift(k, ms) for k in CLASSICAL]
    lifts.append(random_admissible_lift(ms, seed + 5, enforce_m1m2=True))
    for i in range(samples):
        sub = subs[i % len(subs)]
        param = [rng.uniform(0.0, 6.28) if sub.name.startswith("circle")
                 else rng.uniform(-0.5, 0.5)]
        x = sub.value(param)
        if ms.domain_margin is not None and ms.domain_margin(x) <= 0.05:
            continue
        tang = sub.jacobian(param)[:, 0]
        guess = np.array([-tang[1], tang[0]])
        if sub.name.startswith("circle"):
            center = np.zeros(ms.dim)
            if guess @ (center - x) < 0:
                guess = -guess
        try:
            nv = subm.normal_cone_solve(sub, param, ms, guess=guess)
        except FinslerError:
            nv = subm.normal_cone_solve(sub, param, ms, guess=-guess)
        u = [rng.uniform(-1.0, 1.0)]
        v = [rng.uniform(-1.0, 1.0)]
        hc = subm.sff_connection(sub, param, nv.eta, u, v, ms)
        bs = subm.sff_symplectic(sub, nv, u, v, ms)
        agree = abs(hc - bs)
        rows = subm.normal_bundle_tangent_basis(sub, nv, ms)
        lag = 0.0
        wtv = TangentVector(nv.x, nv.eta)
        for a in range(ms.dim):
            for b in range(a + 1, ms.dim):
                lag = max(lag, abs(subm.omega_F(ms, wtv, rows[a], rows[b])))
        vals = [subm.sff_connection(sub, param, nv.eta, u, v, ms, lift=lf) for lf in lifts]
        spread = max(vals) - min(vals)
        # unsymmetrized shortcut for torsion-symmetric lifts
        fr = PointFrame(ms, wtv, order=4)
        _, cp = lift_tensors(lifts[1], fr)
        A = fr.B + cp
        basis = sub.jacobian(param)
        hess = sub.hessian(param)
        uu = basis @ np.asarray(u, float)
        vv = basis @ np.asarray(v, float)
        unsym = float(nv.eta @ fr.g @ (
            np.einsum("iab,a,b->i", hess, np.asarray(u, float), np.asarray(v, float))
            + np.einsum("ijk,j,k->i", A, uu, vv)))
        worst_t2 = max(worst_t2, abs(unsym - hc))
        worst_agree = max(worst_agree, agree)
        worst_lag = max(worst_lag, lag)
        worst_spread = max(worst_spread, spread)
        res.csv_rows.append((sub.name, param[0], agree, lag, spread))
    res.check("symplectic vs connection second fundamental form", worst_agree, tol)
    res.check("Lagrangean residual of the normal bundle", worst_lag, tol_lag)
    res.check("lift independence of the second fundamental form", worst_spread,
              float(params.get("lift_tolerance", 1e-8)))
    res.check("unsymmetrized shortcut (torsion-symmetric lift)", worst_t2, 1e-7)
    return res


def task_lift_independence(ms, params, seed) -> TaskResult:
    res = TaskResult("lift-independence")
    samples = int(params.get("samples", 25))
    tol = float(params.get("tolerance", 1e-7))
    n_random = int(params.get("random_lifts", 5))
    checks = params.get("checks", ["curvature", "covariant"])
    rng = SplitMix64(seed)
    res.metadata = [("task", "lift-independence"), ("metric", ms.name),
                    ("samples", samples), ("seed", seed)]
    res.csv_header = ("check", "max_spread")

    if "curvature" in checks or "covariant" in checks:
        lifts = [classical_lift("berwald", ms), classical_lift("cartan", ms)]
        lifts += [random_admissible_lift(ms, seed + 100 + i, enforce_t1=True)
                  for i in range(n_random)]
        worst_curv, worst_cov = 0.0, 0.0
        for _ in range(samples):
            w = random_tangent(ms, rng)
            u = rng.direction(ms.dim)
            if "curvature" in checks:
                base = curvature_endomorphism(ms, w).R @ u
                for lf in lifts:
                    worst_curv = max(worst_curv, float(np.max(np.abs(
                        lift_curvature(lf, ms, w, u) - base))))
            if "covariant" in checks:
                W = ident.AffineField.random(w.x, rng, min_norm=0.6)
                U = ident.AffineField.random(w.x, rng)
                vals = []
                for lf in lifts:
                    A = affine_coefficients(lf, ms, TangentVector(w.x, W(w.x))).A
                    vals.append(U.A @ W(w.x) + np.einsum("ijk,j,k->i", A, W(w.x), U(w.x)))
                spread = float(np.max(np.abs(np.max(vals, axis=0) - np.min(vals, axis=0))))
                worst_cov = max(worst_cov, spread)
        if "curvature" in checks:
            res.check("curvature endomorphism across lifts", worst_curv, tol)
            res.csv_rows.append(("curvature", worst_curv))
        if "covariant" in checks:
            res.check("covariant derivative D^W_W across lifts", worst_cov, tol)
            res.csv_rows.append(("covariant", worst_cov))

    if "affine_families" in checks:
        tol_co = float(params.get("coincidence_tolerance", 1e-12))
        floor = float(params.get("family_difference_floor", 1e-3))
        lifts = {k: classical_lift(k, ms) for k in CLASSICAL}
        worst_bh, worst_cc, best_diff = 0.0, 0.0, 0.0
        for _ in range(samples):
            w = random_tangent(ms, rng)
            fr = PointFrame(ms, w, order=4)
            A = {k: affine_coefficients(lf, ms, w, _frame=fr).A for k, lf in lifts.items()}
            worst_bh = max(worst_bh, float(np.max(np.abs(A["berwald"] - A["hashiguchi"]))))
            worst_cc = max(worst_cc, float(np.max(np.abs(A["cartan"] - A["chern-rund"]))))
            best_diff = max(best_diff, float(np.max(np.abs(A["cartan"] - A["berwald"]))))
            claimed = np.einsum("ijk,j,k->i", A["cartan"], w.y, w.y)
            worst_bh = max(worst_bh, float(np.max(np.abs(claimed - 2.0 * fr.G))))
        res.check("Berwald and Hashiguchi families coincide", worst_bh, tol_co)
        res.check("Cartan and Chern-Rund families coincide", worst_cc, tol_co)
        res.check("the two families differ somewhere", best_diff, floor, invert=True)
        res.csv_rows += [("berwald_vs_hashiguchi", worst_bh),
                         ("cartan_vs_chern_rund", worst_cc),
                         ("family_gap", best_diff)]
    return res


TASKS = {
    "check-metric": task_check_metric,
    "condition-matrix": task_condition_matrix,
    "curvature-sweep": task_curvature_sweep,
    "geodesic": task_geodesic,
    "jacobi-compare": task_jacobi_compare,
    "second-variation": task_second_variation,
    "sff-compare": task_sff_compare,
    "lift-independence": task_lift_independence,
}


# -- scenario runner ----------------------------------------------------------------


def load_scenario(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    validate_scenario(cfg)
    return cfg


def validate_scenario(cfg) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object")
    if cfg.get("version") != 1:
        raise ConfigError("scenario must declare \"version\": 1")
    if cfg.get("task") not in TASK_NAMES:
        raise ConfigError(f"task must be one of {TASK_NAMES}, got {cfg.get('task')!r}")
    if "metric" not in cfg:
        raise ConfigError("scenario must name a metric")
    params = cfg.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a mapping")
    for key in ("tolerance", "lagrangean_tolerance", "profile_tolerance"):
        if key in params and float(params[key]) <= 0:
            raise ConfigError(f"parameter {key} must be positive")
    metric_from_config(cfg["metric"])


def run_scenario_config(cfg: dict, out_dir=None, seed_override=None,
                        stream=sys.stdout) -> int:
    validate_scenario(cfg)
    ms = metric_from_config(cfg["metric"])
    params = cfg.get("parameters", {})
    seed = int(seed_override if seed_override is not None else params.get("seed", 0))
    name = cfg.get("name", cfg["task"])
    t0 = time.perf_counter()
    try:
        result = TASKS[cfg["task"]](ms, params, seed)
    except ConfigError:
        raise
    except FinslerError as exc:
        print(f"scenario {name}: domain error: {exc}", file=stream)
        return 1
    elapsed = time.perf_counter() - t0
    status = "PASS" if result.passed else "FAIL"
    print(f"scenario {name} [{cfg['task']} on {ms.name}] ... {status} ({elapsed:.2f}s)",
          file=stream)
    for msg in result.messages:
        print(msg, file=stream)
    if out_dir is not None and result.csv_header is not None:
        csv_path = Path(out_dir) / f"{name}.csv"
        meta = list(result.metadata) + [("seed", seed)] if not result.metadata else result.metadata
        write_csv(csv_path, result.csv_header, result.csv_rows, meta)
        print(f"  wrote {csv_path}", file=stream)
    return 0 if result.passed else 2


def run_scenario(path, out_dir=None, seed_override=None, stream=sys.stdout) -> int:
    cfg = load_scenario(path)
    return run_scenario_config(cfg, out_dir=out_dir, seed_override=seed_override,
                               stream=stream)


def bundled_scenarios():
    root = resources.files("finslergeo").joinpath("scenarios")
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))
    return [(name, json.loads(root.joinpath(name).read_text(encoding="utf-8")))
            for name in names]


def verify_all(seed=None, out_dir=None, stream=sys.stdout) -> int:
    t0 = time.perf_counter()
    results = []
    for name, cfg in bundled_scenarios():
        cfg = dict(cfg)
        cfg.setdefault("name", name.removesuffix(".json"))
        seed_override = None
        if seed is not None:
            seed_override = int(seed) + int(cfg.get("parameters", {}).get("seed", 0))
        code = run_scenario_config(cfg, out_dir=out_dir, seed_override=seed_override,
                                   stream=stream)
        results.append((cfg["name"], code))
    elapsed = time.perf_counter() - t0
    print("", file=stream)
    print(f"{'scenario':44s} result", file=stream)
    for name, code in results:
        print(f"{name:44s} {'PASS' if code == 0 else 'FAIL'}", file=stream)
    bad = sum(1 for _, code in results if code != 0)
    print(f"\n{len(results) - bad}/{len(results)} scenarios passed in {elapsed:.1f}s",
          file=stream)
    return 0 if bad == 0 else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="finslergeo",
                                     description="Finsler geometry verification engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a JSON scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="directory for CSV artifacts")
    p_run.add_argument("--seed", type=int, default=None)

    p_all = sub.add_parser("verify-all", help="run the bundled verification corpus")
    p_all.add_argument("--seed", type=int, default=None)
    p_all.add_argument("--out", default=None)

    p_geo = sub.add_parser("geodesic", help="integrate one geodesic, CSV to stdout")
    p_geo.add_argument("--metric", required=True,
                       help="built-in name: euclidean, sphere_stereographic, "
                            "poincare_disk, funk, randers")
    p_geo.add_argument("--x0", required=True, help="comma-separated start point")
    p_geo.add_argument("--y0", required=True, help="comma-separated start velocity")
    p_geo.add_argument("--t", type=float, default=1.0)
    p_geo.add_argument("--nodes", type=int, default=101)
    p_geo.add_argument("--beta", default=None,
                       help="comma-separated covector for the randers metric")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_scenario(args.scenario, out_dir=args.out, seed_override=args.seed)
        if args.command == "verify-all":
            return verify_all(seed=args.seed, out_dir=args.out)
        if args.command == "geodesic":
            x0 = [float(v) for v in args.x0.split(",")]
            cfg = {"kind": args.metric, "dim": len(x0)}
            if args.metric == "randers":
                cfg["beta"] = [float(v) for v in (args.beta or "0.5,0").split(",")]
            ms = metric_from_config(cfg)
            y0 = [float(v) for v in args.y0.split(",")]
            geo = integrate_geodesic(ms, TangentVector(x0, y0), args.t, nodes=args.nodes)
            header = ["t"] + [f"x{i + 1}" for i in range(ms.dim)] \
                + [f"y{i + 1}" for i in range(ms.dim)]
            print(",".join(header))
            for i, t in enumerate(geo.grid):
                print(",".join(_fmt(v) for v in (t, *geo.points[i], *geo.velocities[i])))
            return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FinslerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
