"""Lifts of the canonical connection, their torsion/metric conditions,
curvature, and the induced direction-dependent affine connections.

A lift is encoded by its deviation from the Berwald base: a pair of
semibasic tensors, one per adapted-frame block. The covariant derivative of
a vertical section s reads

    over a horizontal direction a:  a^j (ds^i/dx^j|_adapted + (B + Cp)^i_jk s^k)
    over a vertical direction b:    b^j (ds^i/dy^j + Cc^i_jk s^k)

with B the Berwald coefficients and Cc/Cp the lift tensors with the output
index raised (layout [output, direction, section]). Admissibility is the
vanishing of both tensors when the section slot is fed the base direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GridError, InvalidLift, NullReference
from .jets import Jet, smath, solve_linear, space_for
from .metrics import MetricSpec, TangentVector, g_pairing_with_w
from .rng import SplitMix64
from .spray import PointFrame, _add, _ex, _ey

ADMISSIBILITY_TOL = 1e-7

ALL_CONDITIONS = ("T1", "T2", "T3", "M1", "M2", "M3", "M4", "M5", "M6", "M7")


class ClassicalKind(str, Enum):
    BERWALD = "berwald"
    CARTAN = "cartan"
    CHERN_RUND = "chern-rund"
    HASHIGUCHI = "hashiguchi"


# which of (C, C') each classical connection carries
_CLASSICAL_TABLE = {
    ClassicalKind.BERWALD: (False, False),
    ClassicalKind.CARTAN: (True, True),
    ClassicalKind.CHERN_RUND: (False, True),
    ClassicalKind.HASHIGUCHI: (True, False),
}


@dataclass
class GenericTangent:
    """Tangent-vector carrier whose coordinates may be jet scalars."""

    x: list
    y: list


class LiftSpec:
    """A lift of the canonical connection.

    ``c_flat`` / ``cprime_flat``: rules (w, u, v, t) -> scalar for the
    metric-lowered tensors (metric case). ``c_raw`` / ``cprime_raw``: rules
    (w, u, v) -> vector for bare sprays (already output-valued). ``kind``
    marks the four classical connections, which use an exact fast path
    instead of their rule closures.
    """

    def __init__(self, name, c_flat=None, cprime_flat=None, c_raw=None,
                 cprime_raw=None, kind=None):
        self.name = name
        self.c_flat = c_flat
        self.cprime_flat = cprime_flat
        self.c_raw = c_raw
        self.cprime_raw = cprime_raw
        self.kind = ClassicalKind(kind) if kind is not None else None

    def __repr__(self):
        return f"LiftSpec({self.name})"


@dataclass(frozen=True)
class AffineCoefficients:
    at: TangentVector
    A: np.ndarray  # (n,n,n): A^i_jk


@dataclass(frozen=True)
class CPrimeTensor:
    at: TangentVector
    Cp: np.ndarray  # fully symmetric, all indices down


@dataclass(frozen=True)
class SectionJet:
    """A vertical section s^i(x, y) with its first-order jets at a point."""

    value: np.ndarray  # (n,)
    dx: np.ndarray     # (n,n): dx[i,j] = ds^i/dx^j
    dy: np.ndarray     # (n,n)


def section_from_rule(rule, w: TangentVector) -> SectionJet:
    """Jet a generic section rule (xs, ys) -> list of n scalars at w."""
    n = w.n
    sp = space_for(2 * n, 1)
    xs = [sp.coordinate(i, float(w.x[i])) for i in range(n)]
    ys = [sp.coordinate(n + i, float(w.y[i])) for i in range(n)]
    comps = rule(xs, ys)
    value = np.empty(n)
    dx = np.zeros((n, n))
    dy = np.zeros((n, n))
    for i in range(n):
        ci = comps[i]
        if not isinstance(ci, Jet):
            value[i] = float(ci)
            continue
        value[i] = float(ci.value)
        for j in range(n):
            dx[i, j] = ci.partial(_ex(n, j))
            dy[i, j] = ci.partial(_ey(n, j))
    return SectionJet(value, dx, dy)


def canonical_section(w: TangentVector) -> SectionJet:
    """The canonical field: fiber components equal to the fiber coordinates."""
    n = w.n
    return SectionJet(np.array(w.y, float), np.zeros((n, n)), np.eye(n))


def constant_section(w: TangentVector, value) -> SectionJet:
    n = w.n
    return SectionJet(np.asarray(value, float), np.zeros((n, n)), np.zeros((n, n)))


# -- classical lifts ------------------------------------------------------------


def classical_lift(kind, ms: MetricSpec) -> LiftSpec:
    """The Berwald / Cartan / Chern-Rund / Hashiguchi lift of a metric."""
    kind = ClassicalKind(kind)
    use_c, use_cp = _CLASSICAL_TABLE[kind]

    def c_flat(w, u, v, t):
        if not use_c:
            return 0.0
        from .metrics import cartan_tensor

        C = cartan_tensor(ms, w).C
        return float(np.einsum("ijk,i,j,k->", C, np.asarray(u, float),
                               np.asarray(v, float), np.asarray(t, float)))

    def cprime_flat(w, u, v, t):
        if not use_cp:
            return 0.0
        Cp = cprime_tensor(ms, w).Cp
        return float(np.einsum("ijk,i,j,k->", Cp, np.asarray(u, float),
                               np.asarray(v, float), np.asarray(t, float)))

    return LiftSpec(name=kind.value, c_flat=c_flat, cprime_flat=cprime_flat, kind=kind)


def cprime_tensor(ms: MetricSpec, w: TangentVector) -> CPrimeTensor:
    """The Landsberg-type tensor of the metric at w.

    Minus the derivative of the Cartan tensor along the geodesic flow
    (d/dt at t=0 of C along the geodesic with parallel arguments), which is
    the sign for which the classical connections satisfy their metric
    compatibility conditions. Fully symmetric; vanishes against w in any
    slot; identically zero for Berwald-type metrics. Expanded in
    coordinates through the spray jets, no integration involved.
    """
    fr = PointFrame(ms, w, order=4)
    return CPrimeTensor(at=w, Cp=fr.Cp_low)


# -- lift tensors at a point -----------------------------------------------------


def _rule_tensor_flat(rule, w, n) -> np.ndarray:
    """Evaluate a flat rule on the chart basis: out[u, v, t]."""
    basis = np.eye(n)
    out = np.empty((n, n, n))
    for j in range(n):
        for k in range(n):
            for l in range(n):
                out[j, k, l] = rule(w, basis[j], basis[k], basis[l])
    return out


def _rule_tensor_raw(rule, w, n) -> np.ndarray:
    """Evaluate a raw rule on the chart basis: out[output, u, v]."""
    basis = np.eye(n)
    out = np.empty((n, n, n))
    for j in range(n):
        for k in range(n):
            vec = rule(w, basis[j], basis[k])
            for i in range(n):
                out[i, j, k] = vec[i]
    return out


def lift_tensors(lift: LiftSpec, fr: PointFrame):
    """(Cc, Cp) with the output index raised, layout [output, direction, section]."""
    n = fr.n
    if lift.kind is not None:
        use_c, use_cp = _CLASSICAL_TABLE[lift.kind]
        cc = fr.raise_last(fr.C_low) if use_c else np.zeros((n, n, n))
        cp = fr.raise_last(fr.Cp_low) if use_cp else np.zeros((n, n, n))
        return cc, cp
    w = fr.w
    if lift.c_raw is not None or lift.cprime_raw is not None:
        cc = _rule_tensor_raw(lift.c_raw, w, n) if lift.c_raw else np.zeros((n, n, n))
        cp = _rule_tensor_raw(lift.cprime_raw, w, n) if lift.cprime_raw else np.zeros((n, n, n))
        return cc, cp
    ccf = _rule_tensor_flat(lift.c_flat, w, n) if lift.c_flat else np.zeros((n, n, n))
    cpf = _rule_tensor_flat(lift.cprime_flat, w, n) if lift.cprime_flat else np.zeros((n, n, n))
    return fr.raise_last(ccf), fr.raise_last(cpf)


def lift_tensors_flat(lift: LiftSpec, fr: PointFrame):
    """(C_flat, Cp_flat) with layout [direction, section, metric-slot]."""
    n = fr.n
    if lift.kind is not None:
        use_c, use_cp = _CLASSICAL_TABLE[lift.kind]
        ccf = fr.C_low if use_c else np.zeros((n, n, n))
        cpf = fr.Cp_low if use_cp else np.zeros((n, n, n))
        return ccf, cpf
    if lift.c_flat is not None or lift.cprime_flat is not None:
        ccf = _rule_tensor_flat(lift.c_flat, fr.w, n) if lift.c_flat else np.zeros((n, n, n))
        cpf = _rule_tensor_flat(lift.cprime_flat, fr.w, n) if lift.cprime_flat else np.zeros((n, n, n))
        return ccf, cpf
    cc, cp = lift_tensors(lift, fr)
    return np.einsum("il,ijk->jkl", fr.g, cc), np.einsum("il,ijk->jkl", fr.g, cp)


def _check_admissible(cc, cp, y):
    scale = (1.0 + max(np.max(np.abs(cc)), np.max(np.abs(cp)))) * max(1.0, float(np.linalg.norm(y)))
    bad_c = np.max(np.abs(np.einsum("ijk,k->ij", cc, y)))
    bad_p = np.max(np.abs(np.einsum("ijk,k->ij", cp, y)))
    if max(bad_c, bad_p) > ADMISSIBILITY_TOL * scale:
        raise InvalidLift(
            f"lift tensors do not vanish on the base direction: |C(.,w)|={bad_c:.2e}, "
            f"|C'(.,w)|={bad_p:.2e}")


def adapted_split(fr: PointFrame, X):
    """Raw (dx, dy) components -> adapted (horizontal a, vertical-fiber b)."""
    X = np.asarray(X, float)
    n = fr.n
    a = X[:n]
    return a, X[n:] + fr.N @ a


# -- connection application and torsion ------------------------------------------


def nabla_apply(lift: LiftSpec, src, w: TangentVector, X, section: SectionJet,
                _frame: PointFrame | None = None) -> np.ndarray:
    """Fiber components of nabla_X J(Y) for the given section jet at w."""
    fr = _frame if _frame is not None else PointFrame(src, w, order=4)
    cc, cp = lift_tensors(lift, fr)
    _check_admissible(cc, cp, fr.y)
    a, b = adapted_split(fr, X)
    gh = fr.B + cp
    s = section.value
    ds_adapted = section.dx - np.einsum("im,mj->ij", section.dy, fr.N)
    out = ds_adapted @ a + np.einsum("ijk,j,k->i", gh, a, s)
    out += section.dy @ b + np.einsum("ijk,j,k->i", cc, b, s)
    return out


def torsion(lift: LiftSpec, src, w: TangentVector, X, Y,
            _frame: PointFrame | None = None) -> np.ndarray:
    """T(X,Y) evaluated on constant-coefficient adapted extensions of X, Y."""
    fr = _frame if _frame is not None else PointFrame(src, w, order=4)
    cc, cp = lift_tensors(lift, fr)
    a1, b1 = adapted_split(fr, X)
    a2, b2 = adapted_split(fr, Y)
    asym = cp - np.transpose(cp, (0, 2, 1))
    out = np.einsum("ijk,j,k->i", asym, a1, a2)
    out += np.einsum("ijk,j,k->i", cc, b1, a2) - np.einsum("ijk,j,k->i", cc, b2, a1)
    return out


# -- metric compatibility -----------------------------------------------------


def _nabla_g_tensors(lift: LiftSpec, fr: PointFrame):
    """Componentwise nabla g in the adapted frame.

    h[j,i,k] = (nabla_{delta/dx^j} g)(e_i, e_k); v[j,i,k] over d/dy^j.
    """
    cc, cp = lift_tensors(lift, fr)
    g = fr.g
    c2 = 2.0 * fr.C_low
    gh = fr.B + cp
    dg_h = fr.dg_dx - np.einsum("mj,mik->jik", fr.N, c2)
    h = dg_h - np.einsum("mk,mji->jik", g, gh) - np.einsum("im,mjk->jik", g, gh)
    v = c2 - np.einsum("mk,mji->jik", g, cc) - np.einsum("im,mjk->jik", g, cc)
    return h, v


def nabla_g(lift: LiftSpec, ms: MetricSpec, w: TangentVector, X, s1, s2,
            _frame: PointFrame | None = None) -> float:
    """(nabla_X g)(s1, s2) for constant sections s1, s2 (tensorial)."""
    fr = _frame if _frame is not None else PointFrame(ms, w, order=4)
    h, v = _nabla_g_tensors(lift, fr)
    a, b = adapted_split(fr, X)
    s1 = np.asarray(s1, float)
    s2 = np.asarray(s2, float)
    return float(np.einsum("j,jik,i,k->", a, h, s1, s2)
                 + np.einsum("j,jik,i,k->", b, v, s1, s2))


def condition_residuals(lift: LiftSpec, fr: PointFrame, conditions=ALL_CONDITIONS):
    """Sup-norm residual of each requested condition at one point.

    Residuals are coefficient-tensor sup norms, i.e. the exact maximum over
    unit-box argument vectors.
    """
    y = fr.y
    cc, cp = lift_tensors(lift, fr)
    out = {}
    need_metric = any(c.startswith("M") for c in conditions)
    if need_metric:
        h, v = _nabla_g_tensors(lift, fr)
        c2 = 2.0 * fr.C_low
        cp2 = 2.0 * fr.Cp_low
        ccf, _ = lift_tensors_flat(lift, fr)
    for cond in conditions:
        if cond == "T1":
            asym_y = np.einsum("ijk,j->ik", cp, y) - np.einsum("ikj,j->ik", cp, y)
            sec_y = np.einsum("ijk,k->ij", cc, y)
            out[cond] = max(np.max(np.abs(asym_y)), np.max(np.abs(sec_y)))
        elif cond == "T2":
            out[cond] = np.max(np.abs(cp - np.transpose(cp, (0, 2, 1))))
        elif cond == "T3":
            out[cond] = max(np.max(np.abs(cp - np.transpose(cp, (0, 2, 1)))),
                            np.max(np.abs(cc)))
        elif cond == "M1":
            out[cond] = max(np.max(np.abs(np.einsum("jik,k->ji", h, y))),
                            np.max(np.abs(np.einsum("jik,k->ji", v, y))))
        elif cond == "M2":
            out[cond] = np.max(np.abs(np.einsum("jkl,l->jk", ccf, y)))
        elif cond == "M3":
            out[cond] = max(np.max(np.abs(h)), np.max(np.abs(v - c2)))
        elif cond == "M4":
            out[cond] = max(np.max(np.abs(h - cp2)), np.max(np.abs(v)))
        elif cond == "M5":
            out[cond] = max(np.max(np.abs(h - cp2)), np.max(np.abs(v - c2)))
        elif cond == "M6":
            out[cond] = max(np.max(np.abs(h)), np.max(np.abs(v)))
        elif cond == "M7":
            out[cond] = np.max(np.abs(ccf - np.transpose(ccf, (0, 2, 1))))
        else:
            raise ValueError(f"unknown condition {cond!r}")
    return out


@dataclass
class ConditionReport:
    lift: str
    metric: str
    samples: int
    seed: int
    residuals: dict

    def max_residual(self, condition: str) -> float:
        return self.residuals[condition]

    def satisfied(self, conditions, tol: float) -> bool:
        return all(self.residuals[c] < tol for c in conditions)

    def rows(self):
        return sorted(self.residuals.items())


def check_conditions(lift: LiftSpec, ms, conditions=ALL_CONDITIONS, samples: int = 25,
                     seed: int = 0) -> ConditionReport:
    """Max residual of each condition over random admissible points."""
    from .metrics import random_tangent

    conditions = tuple(conditions)
    if any(c.startswith("M") for c in conditions) and not isinstance(ms, MetricSpec):
        raise TypeError("metric conditions require a MetricSpec")
    rng = SplitMix64(seed)
    worst = {c: 0.0 for c in conditions}
    for _ in range(samples):
        w = random_tangent(ms, rng)
        fr = PointFrame(ms, w, order=4)
        res = condition_residuals(lift, fr, conditions)
        for c in conditions:
            worst[c] = max(worst[c], res[c])
    return ConditionReport(lift=lift.name, metric=ms.name, samples=samples,
                           seed=seed, residuals=worst)


# -- affine family ---------------------------------------------------------------


def affine_coefficients(lift: LiftSpec, src, w: TangentVector,
                        _frame: PointFrame | None = None) -> AffineCoefficients:
    """A^i_jk(w) of the affine connection induced by the lift at direction w."""
    fr = _frame if _frame is not None else PointFrame(src, w, order=4)
    _, cp = lift_tensors(lift, fr)
    return AffineCoefficients(at=w, A=fr.B + cp)


def covariant_derivative_curve(lift: LiftSpec, src, curve, W, V):
    """(D^W V / dt) along a curve from grid samples of W and V.

    Uses the coefficient form Vdot + A(lambda(t), W(t))(lambdadot, V); the
    correction term of the non-horizontal-lift formula cancels exactly
    against the vertical transport term (a dedicated test re-verifies this
    against the raw two-term evaluation).
    """
    from .variational import FieldAlongCurve, fd_derivative

    grid = np.asarray(curve.grid, float)
    if W.vectors.shape != V.vectors.shape or len(grid) != len(W.vectors):
        raise GridError("curve and field grids do not match")
    if not np.allclose(np.asarray(W.grid), grid) or not np.allclose(np.asarray(V.grid), grid):
        raise GridError("curve and field grids do not match")
    if np.min(np.linalg.norm(W.vectors, axis=1)) < 1e-12:
        raise NullReference("reference field W vanishes at a node")
    vdot = fd_derivative(V.vectors, grid)
    out = np.empty_like(V.vectors)
    for i, t in enumerate(grid):
        wt = TangentVector(curve.points[i], W.vectors[i])
        fr = PointFrame(src, wt, order=4)
        _, cp = lift_tensors(lift, fr)
        a = fr.B + cp
        out[i] = vdot[i] + np.einsum("ijk,j,k->i", a, curve.velocities[i], V.vectors[i])
    return FieldAlongCurve(grid=grid, vectors=out)


# -- honest curvature of a lift ---------------------------------------------------


class _FieldJet:
    """Value and first derivatives of a tensor field at the base point."""

    __slots__ = ("val", "dx", "dy")

    def __init__(self, shape, n):
        self.val = np.zeros(shape)
        self.dx = np.zeros((n,) + shape)
        self.dy = np.zeros((n,) + shape)


def _collect_field(polys, shape, n) -> _FieldJet:
    """Extract (value, d/dx, d/dy) from a nest of order-1 jets in 2n vars."""
    fj = _FieldJet(shape, n)
    it = np.ndindex(*shape)
    for idx in it:
        p = polys
        for i in idx:
            p = p[i]
        if isinstance(p, Jet):
            fj.val[idx] = float(p.value)
            for l in range(n):
                fj.dx[(l,) + idx] = p.partial(_ex(n, l))
                fj.dy[(l,) + idx] = p.partial(_ey(n, l))
        else:
            fj.val[idx] = float(p)
    return fj


def _lift_field_jets(lift: LiftSpec, fr5: PointFrame):
    """First-order jets of the raised lift tensor fields Cc, Cp at fr5's point.

    Classical metric lifts are assembled inside the truncated polynomial
    ring from the order-5 metric jet; rule-based lifts are jetted directly
    by evaluating their rules at jet-valued tangent points.
    """
    n = fr5.n
    sp1 = space_for(2 * n, 1)
    zero = _FieldJet((n, n, n), n)
    if lift.kind is not None:
        use_c, use_cp = _CLASSICAL_TABLE[lift.kind]
        if not (use_c or use_cp):
            return zero, _FieldJet((n, n, n), n)
        f = fr5.f
        # flat Cartan tensor as order-2 polynomials
        cpoly = [[[None] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            fi = f.partial_poly(n + i)
            for j in range(n):
                fij = fi.partial_poly(n + j)
                for k in range(n):
                    cpoly[i][j][k] = fij.partial_poly(n + k) * 0.25
        g1 = [[fr5.gpoly[i][j].truncate(1) for j in range(n)] for i in range(n)]
        eye = [[sp1.constant(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
        ginv1_cols = [solve_linear(g1, [eye[i][j] for i in range(n)]) for j in range(n)]
        ginv1 = [[ginv1_cols[j][i] for j in range(n)] for i in range(n)]  # [i][l]
        ypoly = [sp1.coordinate(n + r, fr5.y[r]) for r in range(n)]
        gpoly1 = [p.truncate(1) for p in fr5.Gpoly]
        npoly1 = [[fr5.Gpoly[i].partial_poly(n + j).truncate(1) for j in range(n)]
                  for i in range(n)]

        def raise_last_poly(tlow):
            out = [[[None] * n for _ in range(n)] for _ in range(n)]
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        acc = None
                        for l in range(n):
                            term = ginv1[i][l] * tlow[j][k][l]
                            acc = term if acc is None else acc + term
                        out[i][j][k] = acc
            return out

        c1 = [[[cpoly[i][j][k].truncate(1) for k in range(n)] for j in range(n)]
              for i in range(n)]
        cc_polys = raise_last_poly(c1) if use_c else None
        cp_polys = None
        if use_cp:
            cpf = [[[None] * n for _ in range(n)] for _ in range(n)]
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        acc = None
                        for l in range(n):
                            term = ypoly[l] * cpoly[i][j][k].partial_poly(l)
                            term = term - 2.0 * gpoly1[l] * cpoly[i][j][k].partial_poly(n + l)
                            acc = term if acc is None else acc + term
                        for m in range(n):
                            acc = acc - npoly1[m][i] * c1[m][j][k]
                            acc = acc - npoly1[m][j] * c1[i][m][k]
                            acc = acc - npoly1[m][k] * c1[i][j][m]
                        # same sign convention as PointFrame.Cp_low
                        cpf[i][j][k] = -acc
            cp_polys = raise_last_poly(cpf)
        cc_fj = _collect_field(cc_polys, (n, n, n), n) if use_c else zero
        cp_fj = _collect_field(cp_polys, (n, n, n), n) if use_cp else _FieldJet((n, n, n), n)
        return cc_fj, cp_fj

    # rule-based lift: evaluate the rules at a jet-valued tangent point
    xs = [sp1.coordinate(i, fr5.x[i]) for i in range(n)]
    ys = [sp1.coordinate(n + i, fr5.y[i]) for i in range(n)]
    wjet = GenericTangent(xs, ys)
    basis = np.eye(n)

    def tensor_polys(flat_rule, raw_rule):
        out = [[[None] * n for _ in range(n)] for _ in range(n)]
        if raw_rule is not None:
            for j in range(n):
                for k in range(n):
                    vec = raw_rule(wjet, basis[j], basis[k])
                    for i in range(n):
                        out[i][j][k] = vec[i]
            return out
        if flat_rule is None:
            return None
        if fr5.metric is None:
            raise InvalidLift("flat lift rules require a metric")
        g1 = [[fr5.gpoly[i][j].truncate(1) for j in range(n)] for i in range(n)]
        eye = [[sp1.constant(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
        ginv1_cols = [solve_linear(g1, [eye[i][j] for i in range(n)]) for j in range(n)]
        flat = [[[flat_rule(wjet, basis[j], basis[k], basis[l]) for l in range(n)]
                 for k in range(n)] for j in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = None
                    for l in range(n):
                        term = ginv1_cols[l][i] * flat[j][k][l]
                        acc = term if acc is None else acc + term
                    out[i][j][k] = acc
        return out

    cc_polys = tensor_polys(lift.c_flat, lift.c_raw)
    cp_polys = tensor_polys(lift.cprime_flat, lift.cprime_raw)
    cc_fj = _collect_field(cc_polys, (n, n, n), n) if cc_polys is not None else zero
    cp_fj = _collect_field(cp_polys, (n, n, n), n) if cp_polys is not None else _FieldJet((n, n, n), n)
    return cc_fj, cp_fj


def lift_curvature(lift: LiftSpec, src, w: TangentVector, u, vertical_noise=None) -> np.ndarray:
    """i_w^{-1} R(S, X)C computed from the lift's coefficient fields.

    X is the horizontal lift of u, optionally plus vertical noise (fiber
    components). The curvature expression is evaluated honestly: the
    intermediate sections nabla_{.}C are built as fields from the lift's
    coefficient-field jets and differentiated, with no analytic cancellation
    of the lift-dependent terms; lift independence is then a numerical fact
    to be observed, not an input.
    """
    fr5 = PointFrame(src, w, order=5)
    n = fr5.n
    y = fr5.y
    u = np.asarray(u, float)
    cc_fj, cp_fj = _lift_field_jets(lift, fr5)

    # N and B fields from the (order-3) spray polynomials
    N = fr5.N
    B = fr5.B
    dNdx = np.empty((n, n, n))
    dNdy = np.empty((n, n, n))
    dBdx = np.empty((n, n, n, n))
    dBdy = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for l in range(n):
                dNdx[l, i, j] = fr5.Gpoly[i].partial(_add(_ex(n, l), _ey(n, j)))
                dNdy[l, i, j] = fr5.Gpoly[i].partial(_add(_ey(n, l), _ey(n, j)))
                for k in range(n):
                    dBdx[l, i, j, k] = fr5.Gpoly[i].partial(
                        _add(_add(_ex(n, l), _ey(n, j)), _ey(n, k)))
                    dBdy[l, i, j, k] = fr5.Gpoly[i].partial(
                        _add(_add(_ey(n, l), _ey(n, j)), _ey(n, k)))

    gh = B + cp_fj.val                      # Gamma_h^i_{jm}
    cc = cc_fj.val

    # section field P[i,k] = (nabla_{delta/dx^k} C)^i evaluated as a field
    P = -N + np.einsum("ikr,r->ik", B + cp_fj.val, y)
    dPdx = -dNdx + np.einsum("likr,r->lik", dBdx + cp_fj.dx, y)
    # d/dy^l of Gamma_h^i_{kr} Y^r contributes the extra Gamma_h^i_{kl}
    dPdy = (-dNdy + np.einsum("likr,r->lik", dBdy + cp_fj.dy, y)
            + np.transpose(B + cp_fj.val, (2, 0, 1)))

    # section field V[i,m] = (nabla_{d/dy^m} C)^i
    V = np.eye(n) + np.einsum("imr,r->im", cc, y)
    dVdx = np.einsum("limr,r->lim", cc_fj.dx, y)
    dVdy = np.einsum("limr,r->lim", cc_fj.dy, y) + np.transpose(cc, (2, 0, 1))

    # frame bracket curvature of the nonlinear connection
    rho = (np.einsum("kmj->mjk", dNdx) - np.einsum("jmk->mjk", dNdx)
           + np.einsum("aj,mka->mjk", N, B) - np.einsum("ak,mja->mjk", N, B))

    def delta_x(field_val_dx_dy):
        val, dx, dy = field_val_dx_dy
        return dx - np.einsum("aj,a...->j...", N, dy)

    dP_h = delta_x((P, dPdx, dPdy))         # [j, i, k]
    dV_h = delta_x((V, dVdx, dVdy))         # [j, i, m]

    # R(delta_j, delta_k)C, contracted later with y^j u^k
    r_hh = (np.einsum("mjk,im->ijk", rho, V)
            - np.einsum("jik->ijk", dP_h) - np.einsum("ijm,mk->ijk", gh, P)
            + np.einsum("kij->ijk", dP_h) + np.einsum("ikm,mj->ijk", gh, P))

    out = np.einsum("ijk,j,k->i", r_hh, y, u)
    if vertical_noise is not None:
        nu = np.asarray(vertical_noise, float)
        # R(delta_j, d/dy^m)C
        r_hv = (np.einsum("bjm,ib->ijm", B, V)
                - np.einsum("jim->ijm", dV_h) - np.einsum("ijr,rm->ijm", gh, V)
                + np.einsum("mij->ijm", dPdy) + np.einsum("imr,rj->ijm", cc, P))
        out = out + np.einsum("ijm,j,m->i", r_hv, y, nu)
    return out


# -- random admissible lifts ------------------------------------------------------


def random_admissible_lift(ms: MetricSpec, seed: int, enforce_t1: bool = False,
                           enforce_m1m2: bool = False, amplitude: float = 0.4) -> LiftSpec:
    """A random smooth lift, encoded by generic flat rules.

    Both tensors get smooth (x, y)-dependent coefficients; the section slot
    is then projected g-orthogonally to the base direction (admissibility).
    ``enforce_t1`` also projects the direction slot of the C'-part;
    ``enforce_m1m2`` instead projects the metric slot of both parts.
    """
    n = ms.dim
    rng = SplitMix64(seed)

    def draw():
        k0 = np.array([[[rng.uniform(-amplitude, amplitude) for _ in range(n)]
                        for _ in range(n)] for _ in range(n)])
        k1 = np.array([[[rng.uniform(-amplitude, amplitude) for _ in range(n)]
                        for _ in range(n)] for _ in range(n)])
        px = [rng.uniform(-1.0, 1.0) for _ in range(n)]
        py = [rng.uniform(-1.0, 1.0) for _ in range(n)]
        return k0, k1, px, py

    par_c = draw()
    par_p = draw()

    def project(w, v):
        """g_w-orthogonal projection of v killing the base direction."""
        gv = g_pairing_with_w(ms, w.x, w.y, v)
        f2 = ms.f2(list(w.x), list(w.y))
        coef = gv / f2
        return [v[i] - coef * w.y[i] for i in range(n)]

    def make_rule(params, project_u, project_v, project_t):
        k0, k1, px, py = params

        def rule(w, u, v, t):
            uu = project(w, u) if project_u else list(u)
            vv = project(w, v) if project_v else list(v)
            tt = project(w, t) if project_t else list(t)
            phase = smath.dot(px, w.x) + smath.dot(py, w.y)
            s = smath.sin(phase)
            acc = None
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        term = (k0[i, j, k] + k1[i, j, k] * s) * uu[i] * vv[j] * tt[k]
                        acc = term if acc is None else acc + term
            return acc

        return rule

    c_rule = make_rule(par_c, False, True, enforce_m1m2)
    p_rule = make_rule(par_p, enforce_t1, True, enforce_m1m2)
    tags = "".join([".t1" if enforce_t1 else "", ".m1m2" if enforce_m1m2 else ""])
    return LiftSpec(name=f"random[{seed}]{tags}", c_flat=c_rule, cprime_flat=p_rule)
