"""Geodesic sprays, the canonical nonlinear connection and curvature.

Everything is extracted from a single joint (x, y)-jet of F^2: the spray
coefficients G^i are solved for inside the truncated polynomial ring, so
their partial derivatives (N = dG/dy, Berwald B = d2G/dy dy, and the mixed
x-derivatives entering the curvature) are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFlag, NotPositiveDefinite, NullDirection
from .jets import lift_any, solve_linear, space_for
from .metrics import MetricSpec, TangentVector, NULL_DIRECTION_TOL

COND_LIMIT = 1e12


@dataclass(frozen=True)
class SprayData:
    at: TangentVector
    G: np.ndarray   # (n,)
    N: np.ndarray   # (n,n): N^i_j = dG^i/dy^j
    B: np.ndarray   # (n,n,n): B^i_jk = d2 G^i / dy^j dy^k


@dataclass(frozen=True)
class CurvatureEndomorphism:
    at: TangentVector
    R: np.ndarray   # (n,n): R^i_k


class SpraySpec:
    """A bare spray given by a generic coefficient rule (xs, ys) -> [G^1..G^n].

    Accepted wherever no metric structure is required.
    """

    def __init__(self, dim, g_rule, name="spray", domain_margin=None, sample_radius=1.0):
        self.dim = int(dim)
        self.g_rule = g_rule
        self.name = name
        self.kind = "spray"
        self.domain_margin = domain_margin
        self.sample_radius = float(sample_radius)

    def check_tangent(self, w: TangentVector) -> None:
        if w.n != self.dim:
            raise ValueError("dimension mismatch")
        if float(np.linalg.norm(w.y)) < NULL_DIRECTION_TOL:
            raise NullDirection("fiber direction is numerically zero")
        if self.domain_margin is not None and self.domain_margin(w.x) <= 0.0:
            from .errors import DomainError

            raise DomainError(f"point {w.x} outside validity region of {self.name}")

    def __repr__(self):
        return f"SpraySpec({self.name}, dim={self.dim})"


def _ex(n, k):
    a = [0] * (2 * n)
    a[k] = 1
    return a


def _ey(n, k):
    a = [0] * (2 * n)
    a[n + k] = 1
    return a


def _add(a, b):
    return [x + y for x, y in zip(a, b)]


class PointFrame:
    """All jets of a metric/spray at one tangent point, order-managed.

    ``order`` is the F^2 jet order q; spray polynomials live at order q-2.
    q=4 serves every pointwise tensor; q=5 additionally provides first
    derivatives of the Berwald and Cartan-derived coefficient fields (used
    by the honest lift-curvature evaluation).
    """

    def __init__(self, src, w: TangentVector, order: int = 4):
        src.check_tangent(w)
        self.src = src
        self.metric = src if isinstance(src, MetricSpec) else None
        self.w = w
        self.n = src.dim
        self.order = order
        self.x = np.asarray(w.x, float)
        self.y = np.asarray(w.y, float)
        n = self.n
        center = list(self.x) + list(self.y)
        p = order - 2
        if self.metric is not None:
            self.f = lift_any(lambda v: src.f2(v[:n], v[n:]), center, order)
            gpoly = [[None] * n for _ in range(n)]
            for i in range(n):
                fi = self.f.partial_poly(n + i)
                for j in range(i, n):
                    gij = fi.partial_poly(n + j) * 0.5
                    gpoly[i][j] = gij
                    gpoly[j][i] = gij
            self.gpoly = gpoly
            g = np.array([[gpoly[i][j].value for j in range(n)] for i in range(n)])
            self.g = 0.5 * (g + g.T)
            if np.linalg.cond(self.g) > COND_LIMIT:
                raise NotPositiveDefinite(
                    f"fundamental tensor near-degenerate at x={self.x}, y={self.y}")
            self.ginv = np.linalg.inv(self.g)
            sp = space_for(2 * n, p)
            ypoly = [sp.coordinate(n + k, self.y[k]) for k in range(n)]
            rhs = []
            for l in range(n):
                fl = self.f.partial_poly(n + l)
                acc = None
                for k in range(n):
                    term = ypoly[k] * fl.partial_poly(k)
                    acc = term if acc is None else acc + term
                rhs.append(acc - self.f.partial_poly(l).truncate(p))
            self.Gpoly = [u * 0.25 for u in solve_linear(gpoly, rhs)]
        else:
            self.f = None
            self.gpoly = None
            self.g = None
            self.ginv = None
            self.Gpoly = [
                lift_any(lambda v, i=i: src.g_rule(v[:n], v[n:])[i], center, p)
                for i in range(n)
            ]
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # -- spray values and derivatives ---------------------------------------

    @property
    def G(self):
        return self._get("G", lambda: np.array([float(p.value) for p in self.Gpoly]))

    @property
    def N(self):
        def build():
            n = self.n
            return np.array([[self.Gpoly[i].partial(_ey(n, j)) for j in range(n)] for i in range(n)])

        return self._get("N", build)

    @property
    def B(self):
        def build():
            n = self.n
            out = np.empty((n, n, n))
            for i in range(n):
                for j in range(n):
                    for k in range(j, n):
                        v = self.Gpoly[i].partial(_add(_ey(n, j), _ey(n, k)))
                        out[i, j, k] = out[i, k, j] = v
            return out

        return self._get("B", build)

    @property
    def Gx(self):
        def build():
            n = self.n
            return np.array([[self.Gpoly[i].partial(_ex(n, k)) for k in range(n)] for i in range(n)])

        return self._get("Gx", build)

    @property
    def Gxy(self):
        def build():
            n = self.n
            out = np.empty((n, n, n))
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        out[i, j, k] = self.Gpoly[i].partial(_add(_ex(n, j), _ey(n, k)))
            return out

        return self._get("Gxy", build)

    @property
    def R(self):
        """Curvature endomorphism matrix R^i_k of the spray."""

        def build():
            y = self.y
            return (2.0 * self.Gx
                    - np.einsum("j,ijk->ik", y, self.Gxy)
                    + 2.0 * np.einsum("j,ijk->ik", self.G, self.B)
                    - self.N @ self.N)

        return self._get("R", build)

    # -- metric tensors -------------------------------------------------------

    def _need_metric(self):
        if self.metric is None:
            raise TypeError("operation requires a metric, got a bare spray")

    @property
    def C_low(self):
        """Cartan tensor with all indices down (fully symmetric)."""

        def build():
            self._need_metric()
            n = self.n
            out = np.empty((n, n, n))
            for i in range(n):
                for j in range(i, n):
                    for k in range(j, n):
                        alpha = _add(_add(_ey(n, i), _ey(n, j)), _ey(n, k))
                        v = 0.25 * self.f.partial(alpha)
                        for p in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                            out[p] = v
            return out

        return self._get("C_low", build)

    @property
    def dC_dx(self):
        """(l,i,j,k): d C_ijk / dx^l."""

        def build():
            self._need_metric()
            n = self.n
            out = np.empty((n, n, n, n))
            for l in range(n):
                for i in range(n):
                    for j in range(i, n):
                        for k in range(j, n):
                            alpha = _add(_add(_add(_ey(n, i), _ey(n, j)), _ey(n, k)), _ex(n, l))
                            v = 0.25 * self.f.partial(alpha)
                            for p in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                                out[(l,) + p] = v
            return out

        return self._get("dC_dx", build)

    @property
    def dC_dy(self):
        """(l,i,j,k): d C_ijk / dy^l."""

        def build():
            self._need_metric()
            n = self.n
            out = np.empty((n, n, n, n))
            for l in range(n):
                for i in range(n):
                    for j in range(i, n):
                        for k in range(j, n):
                            alpha = _add(_add(_add(_ey(n, i), _ey(n, j)), _ey(n, k)), _ey(n, l))
                            v = 0.25 * self.f.partial(alpha)
                            for p in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                                out[(l,) + p] = v
            return out

        return self._get("dC_dy", build)

    @property
    def Cdot_low(self):
        """Derivative of the Cartan tensor along the geodesic flow (indices down).

        d/dt at t=0 of C_{gdot(t)}(U,V,Z) with parallel U,V,Z, expanded in
        coordinates: the chain rule along the flow (x-dot = y,
        y-dot = -2G) plus parallel-transport corrections through the
        Berwald coefficients (B y = N by homogeneity).
        """

        def build():
            C = self.C_low
            return (np.einsum("l,lijk->ijk", self.y, self.dC_dx)
                    - 2.0 * np.einsum("l,lijk->ijk", self.G, self.dC_dy)
                    - np.einsum("mi,mjk->ijk", self.N, C)
                    - np.einsum("mj,imk->ijk", self.N, C)
                    - np.einsum("mk,ijm->ijk", self.N, C))

        return self._get("Cdot_low", build)

    @property
    def Cp_low(self):
        """The Landsberg-type tensor entering the classical connections.

        Equals half the Berwald horizontal derivative of g, which is minus
        the flow derivative of the Cartan tensor; this is the sign for
        which the Berwald lift satisfies its metric compatibility
        condition (and with it the whole classical classification).
        """
        return self._get("Cp_low_signed", lambda: -self.Cdot_low)

    @property
    def dg_dx(self):
        """(k,i,j): d g_ij / dx^k."""

        def build():
            self._need_metric()
            n = self.n
            out = np.empty((n, n, n))
            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        alpha = _add(_add(_ey(n, i), _ey(n, j)), _ex(n, k))
                        v = 0.5 * self.f.partial(alpha)
                        out[k, i, j] = out[k, j, i] = v
            return out

        return self._get("dg_dx", build)

    def raise_last(self, t_low: np.ndarray) -> np.ndarray:
        """Raise the last index of a (u,v,t)-flat tensor: T^i_jk = g^il T_jkl."""
        self._need_metric()
        return np.einsum("il,jkl->ijk", self.ginv, t_low)


def frame(src, w: TangentVector, order: int = 4) -> PointFrame:
    return PointFrame(src, w, order)


# -- public operations ---------------------------------------------------------


def spray_coefficients(src, w: TangentVector) -> SprayData:
    """G, N = dG/dy and Berwald B = d2G/dydy of the geodesic spray at w."""
    fr = PointFrame(src, w, order=4)
    return SprayData(at=w, G=fr.G, N=fr.N, B=fr.B)


def spray_values(src, x, y) -> np.ndarray:
    """Fast G-only evaluation for ODE right-hand sides."""
    n = len(x)
    if isinstance(src, MetricSpec):
        f = lift_any(lambda v: src.f2(v[:n], v[n:]), list(x) + list(y), 2)
        g = np.empty((n, n))
        rhs = np.empty(n)
        for i in range(n):
            fi = f.partial_poly(n + i)
            for j in range(i, n):
                g[i, j] = g[j, i] = 0.5 * fi.partial(tuple(_ey(n, j))[:])
        for l in range(n):
            fl = f.partial_poly(n + l)
            acc = 0.0
            for k in range(n):
                acc += y[k] * fl.partial(tuple(_ex(n, k)))
            rhs[l] = acc - f.partial(tuple(_ex(n, l)))
        return 0.25 * np.linalg.solve(g, rhs)
    return np.array([float(v) for v in src.g_rule(list(x), list(y))])


def horizontal_lift(s: SprayData, u) -> np.ndarray:
    """Raw (dx, dy) components of the horizontal lift of u at s.at."""
    u = np.asarray(u, float)
    return np.concatenate([u, -s.N @ u])


def vertical_projector(s: SprayData, X) -> np.ndarray:
    """Fiber components of the vertical projection of a raw tangent vector."""
    X = np.asarray(X, float)
    n = s.N.shape[0]
    return X[n:] + s.N @ X[:n]


def curvature_endomorphism(src, w: TangentVector) -> CurvatureEndomorphism:
    """R_w from the spray jets (the coordinate form of R(S, .^h)C)."""
    fr = PointFrame(src, w, order=4)
    return CurvatureEndomorphism(at=w, R=fr.R)


def flag_curvature(ms: MetricSpec, w: TangentVector, u, _frame: PointFrame | None = None) -> float:
    """K(w,u) = g(R_w(u),u) / (g(w,w) g(u,u) - g(w,u)^2)."""
    if not isinstance(ms, MetricSpec):
        raise TypeError("flag curvature requires a metric")
    fr = _frame if _frame is not None else PointFrame(ms, w, order=4)
    u = np.asarray(u, float)
    g = fr.g
    y = fr.y
    denom = (y @ g @ y) * (u @ g @ u) - (y @ g @ u) ** 2
    if denom < 1e-10:
        raise DegenerateFlag(f"flag (w,u) degenerate: denominator {denom}")
    return float((u @ g @ (fr.R @ u)) / denom)
