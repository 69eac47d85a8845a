"""Residual evaluators for the identity battery behind the verification suite.

Each function returns a nonnegative residual that vanishes (to numerical
precision) exactly when the corresponding assertion holds. They are shared
by the CLI verification tasks and the test suite.
"""

from __future__ import annotations

import numpy as np

from .findiff import d1
from .jets import lift_any
from .lifts import (LiftSpec, affine_coefficients, classical_lift,
                    lift_tensors, nabla_apply, nabla_g, section_from_rule,
                    SectionJet)
from .metrics import MetricSpec, TangentVector, g_bilinear
from .rng import SplitMix64
from .spray import PointFrame


class AffineField:
    """An affine vector field U(x) = u0 + A (x - x0) for identity tests."""

    def __init__(self, x0, u0, A):
        self.x0 = np.asarray(x0, float)
        self.u0 = np.asarray(u0, float)
        self.A = np.asarray(A, float)

    def __call__(self, x):
        return self.u0 + self.A @ (np.asarray(x, float) - self.x0)

    @staticmethod
    def random(x0, rng: SplitMix64, min_norm: float = 0.4) -> "AffineField":
        n = len(x0)
        u0 = rng.direction(n, min_norm)
        A = np.array([[rng.uniform(-0.5, 0.5) for _ in range(n)] for _ in range(n)])
        return AffineField(x0, u0, A)


def _affine_cov(lift: LiftSpec, ms, x0, w0, U: AffineField, V: AffineField) -> np.ndarray:
    """D^W_U V at x0 for affine fields, with the direction value w0 = W(x0)."""
    A = affine_coefficients(lift, ms, TangentVector(x0, w0)).A
    return V.A @ U(x0) + np.einsum("ijk,j,k->i", A, U(x0), V(x0))


def nabla_s_g_residual(lift: LiftSpec, ms: MetricSpec, w: TangentVector) -> float:
    """| (nabla_S g) | at w, exact zero for every lift of the canonical connection."""
    fr = PointFrame(ms, w, order=4)
    s_raw = np.concatenate([fr.y, -fr.N @ fr.y])
    worst = 0.0
    eye = np.eye(ms.dim)
    for i in range(ms.dim):
        for k in range(ms.dim):
            worst = max(worst, abs(nabla_g(lift, ms, w, s_raw, eye[i], eye[k], _frame=fr)))
    return worst


def symmetry_residual(lift: LiftSpec, ms: MetricSpec, x0, rng: SplitMix64) -> float:
    """Torsion symmetry of the affine family: D^W_U V - D^W_V U - [U, V]."""
    n = ms.dim
    W = AffineField.random(x0, rng)
    U = AffineField.random(x0, rng)
    V = AffineField.random(x0, rng)
    w0 = W(x0)
    bracket = V.A @ U(x0) - U.A @ V(x0)
    lhs = _affine_cov(lift, ms, x0, w0, U, V) - _affine_cov(lift, ms, x0, w0, V, U)
    return float(np.max(np.abs(lhs - bracket)))


def metric_compat_residual(lift: LiftSpec, ms: MetricSpec, x0, rng: SplitMix64,
                           h: float = 1e-4) -> float:
    """M1+M2 compatibility: U g_W(W,V) = g(D^W_U W, V) + g(W, D^W_U V).

    The left side is a finite-difference directional derivative.
    """
    W = AffineField.random(x0, rng, min_norm=0.6)
    U = AffineField.random(x0, rng)
    V = AffineField.random(x0, rng)
    u0 = U(x0)

    def phi(t):
        x = np.asarray(x0, float) + t * u0
        wx = W(x)
        return g_bilinear(ms, list(x), list(wx), wx, V(x))

    lhs = d1(phi, 0.0, h)
    w0 = W(x0)
    duw = W.A @ u0 + np.einsum("ijk,j,k->i",
                               affine_coefficients(lift, ms, TangentVector(x0, w0)).A, u0, w0)
    duv = _affine_cov(lift, ms, x0, w0, U, V)
    fr = PointFrame(ms, TangentVector(x0, w0), order=2)
    rhs = duw @ fr.g @ V(x0) + w0 @ fr.g @ duv
    return float(abs(lhs - rhs))


def metric_compat_geodesic_residual(ms: MetricSpec, x0, rng: SplitMix64,
                                    lift: LiftSpec | None = None, h: float = 1e-4) -> float:
    """W g_W(T,V) = g(D^W_W T, V) + g(T, D^W_W V) where W's integral curve is
    a geodesic through x0 (constructed by matching the spray at x0)."""
    if lift is None:
        lift = classical_lift("berwald", ms)
    n = ms.dim
    w0 = rng.direction(n, 0.6)
    fr = PointFrame(ms, TangentVector(x0, w0), order=4)
    a_w = np.outer(-2.0 * fr.G, w0) / float(w0 @ w0)
    W = AffineField(x0, w0, a_w)
    T = AffineField.random(x0, rng)
    V = AffineField.random(x0, rng)

    def phi(t):
        x = np.asarray(x0, float) + t * w0
        wx = W(x)
        return g_bilinear(ms, list(x), list(wx), T(x), V(x))

    lhs = d1(phi, 0.0, h)
    dwt = _affine_cov(lift, ms, x0, w0, W, T)
    dwv = _affine_cov(lift, ms, x0, w0, W, V)
    rhs = dwt @ fr.g @ V(x0) + T(x0) @ fr.g @ dwv
    return float(abs(lhs - rhs))


def family_metric_identity_residual(kind: str, ms: MetricSpec, x0, rng: SplitMix64, h: float = 1e-5) -> float:
    """Family-level metric identities of the classical connections.

    Cartan/Chern-Rund family: (D^W_U g_W)(T,V) = 2 C_W(D^W_U W, T, V).
    Berwald/Hashiguchi family: ... = 2 C_W(D^W_U W, T, V) + 2 C'_W(U, T, V).
    """
    lift = classical_lift(kind, ms)
    W = AffineField.random(x0, rng, min_norm=0.6)
    U = AffineField.random(x0, rng)
    T = AffineField.random(x0, rng)
    V = AffineField.random(x0, rng)
    u0, t0, v0 = U(x0), T(x0), V(x0)
    w0 = W(x0)
    fr = PointFrame(ms, TangentVector(x0, w0), order=4)

    def phi(s):
        x = np.asarray(x0, float) + s * u0
        wx = W(x)
        return g_bilinear(ms, list(x), list(wx), t0, v0)

    dg = d1(phi, 0.0, h)
    dut = _affine_cov(lift, ms, x0, w0, U, AffineField(x0, t0, np.zeros((ms.dim, ms.dim))))
    duv = _affine_cov(lift, ms, x0, w0, U, AffineField(x0, v0, np.zeros((ms.dim, ms.dim))))
    lhs = dg - dut @ fr.g @ v0 - t0 @ fr.g @ duv
    duw = W.A @ u0 + np.einsum("ijk,j,k->i",
                               affine_coefficients(lift, ms, TangentVector(x0, w0)).A, u0, w0)
    rhs = 2.0 * np.einsum("ijk,i,j,k->", fr.C_low, duw, t0, v0)
    if kind in ("berwald", "hashiguchi"):
        rhs += 2.0 * np.einsum("ijk,i,j,k->", fr.Cp_low, u0, t0, v0)
    return float(abs(lhs - rhs))


def spray_derivative_residual(lift: LiftSpec, ms: MetricSpec, w: TangentVector,
                     rng: SplitMix64) -> float:
    """For T1 lifts: nabla_S J(Y) = V[S, J(Y)] for projectable Y."""
    n = ms.dim
    U = AffineField.random(w.x, rng)
    fr = PointFrame(ms, w, order=4)
    s_raw = np.concatenate([fr.y, -fr.N @ fr.y])
    section = SectionJet(U(w.x), U.A.copy(), np.zeros((n, n)))
    lhs = nabla_apply(lift, ms, w, s_raw, section, _frame=fr)
    rhs = U.A @ fr.y + fr.N @ U(w.x)
    return float(np.max(np.abs(lhs - rhs)))


def cprime_transport_residual(ms: MetricSpec, w: TangentVector, tau: float = 1e-3,
                              rng: SplitMix64 | None = None) -> float:
    """Package C' against the geodesic-transport oracle.

    The oracle integrates the geodesic and the parallel transports of three
    random vectors and differentiates the Cartan contraction in t; the
    package tensor is minus that derivative (see the C' sign convention).
    """
    from scipy.integrate import solve_ivp

    from .lifts import cprime_tensor
    from .spray import spray_values

    rng = rng or SplitMix64(1)
    n = ms.dim
    u0 = rng.direction(n)
    v0 = rng.direction(n)
    z0 = rng.direction(n)

    def rhs(t, s):
        x, y = s[:n], s[n:2 * n]
        fr = PointFrame(ms, TangentVector(x, y), order=3)
        out = [y, -2.0 * spray_values(ms, x, y)]
        for m in range(3):
            V = s[2 * n + m * n:2 * n + (m + 1) * n]
            out.append(-fr.N @ V)
        return np.concatenate(out)

    state0 = np.concatenate([w.x, w.y, u0, v0, z0])

    def contraction(t):
        if t == 0.0:
            x, y, u, v, z = w.x, w.y, u0, v0, z0
        else:
            sol = solve_ivp(rhs, (0.0, t), state0, rtol=1e-11, atol=1e-13)
            st = sol.y[:, -1]
            x, y = st[:n], st[n:2 * n]
            u, v, z = st[2 * n:3 * n], st[3 * n:4 * n], st[4 * n:5 * n]
        C = PointFrame(ms, TangentVector(x, y), order=3).C_low
        return np.einsum("ijk,i,j,k->", C, u, v, z)

    oracle = (contraction(tau) - contraction(-tau)) / (2.0 * tau)
    mine = np.einsum("ijk,i,j,k->", cprime_tensor(ms, w).Cp, u0, v0, z0)
    return float(abs(mine + oracle))


def tensor_identity_residuals(ms: MetricSpec, w: TangentVector) -> dict:
    """Pointwise tensor identities: contractions, symmetry, Euler, homogeneity."""
    fr = PointFrame(ms, w, order=4)
    y = fr.y
    C = fr.C_low
    Cp = fr.Cp_low
    out = {}
    out["cartan_contract"] = float(np.max(np.abs(np.einsum("ijk,k->ij", C, y))))
    out["cprime_contract"] = float(np.max(np.abs(np.einsum("ijk,k->ij", Cp, y))))
    sym = 0.0
    for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        sym = max(sym, float(np.max(np.abs(C - np.transpose(C, perm)))))
        sym = max(sym, float(np.max(np.abs(Cp - np.transpose(Cp, perm)))))
    out["full_symmetry"] = sym
    f2 = ms.f2(list(w.x), list(w.y))
    out["gww_identity"] = float(abs(y @ fr.g @ y - f2))
    # Euler: g_w(w, .) equals half the fiber gradient of F^2
    jet = lift_any(lambda ys: ms.f2(list(w.x), ys), list(w.y), 1)
    grad = np.array([jet.partial([1 if i == j else 0 for j in range(ms.dim)])
                     for i in range(ms.dim)])
    out["euler_gradient"] = float(np.max(np.abs(fr.g @ y - 0.5 * grad)))
    # homogeneity of g (degree 0) and C (degree -1)
    res_g, res_c = 0.0, 0.0
    for lam in (0.5, 3.0):
        fr2 = PointFrame(ms, TangentVector(w.x, lam * y), order=4)
        res_g = max(res_g, float(np.max(np.abs(fr2.g - fr.g))))
        res_c = max(res_c, float(np.max(np.abs(fr2.C_low - C / lam))))
    out["g_homogeneity"] = res_g
    out["cartan_homogeneity"] = res_c
    return out
