"""Finsler metrics on coordinate charts: F, fundamental tensor, Cartan tensor.

A metric is specified by its squared norm F^2 as a rule generic over the jet
scalar type; every tensor below is extracted from jets of that single rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotPositiveDefinite, NullDirection
from .jets import Jet, lift_any, smath, space_for
from .rng import SplitMix64

NULL_DIRECTION_TOL = 1e-12


@dataclass(frozen=True)
class TangentVector:
    """Base point x and fiber direction y in a single chart."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same dimension")

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class FundamentalTensor:
    at: TangentVector
    g: np.ndarray


@dataclass(frozen=True)
class CartanTensor:
    at: TangentVector
    C: np.ndarray


class MetricSpec:
    """A Finsler norm on a chart, defined through its generic F^2 rule.

    ``f2(xs, ys)`` receives two lists of scalars (floats or jets) and must
    only use arithmetic and ``smath`` functions. ``domain_margin(x)`` is
    positive inside the validity region of the chart (None: everywhere).
    """

    def __init__(self, dim, f2, name="custom", kind="custom", domain_margin=None,
                 sample_radius=1.0, params=None, riemannian=False):
        self.dim = int(dim)
        self.f2 = f2
        self.name = name
        self.kind = kind
        self.domain_margin = domain_margin
        self.sample_radius = float(sample_radius)
        self.params = dict(params or {})
        self.riemannian = bool(riemannian)

    def __repr__(self):
        return f"MetricSpec({self.name}, dim={self.dim})"

    def check_point(self, x) -> None:
        if self.domain_margin is not None and self.domain_margin(np.asarray(x, float)) <= 0.0:
            raise DomainError(f"point {np.asarray(x)} outside validity region of {self.name}")

    def check_tangent(self, w: TangentVector) -> None:
        if w.n != self.dim:
            raise ValueError(f"dimension mismatch: metric dim {self.dim}, vector dim {w.n}")
        if float(np.linalg.norm(w.y)) < NULL_DIRECTION_TOL:
            raise NullDirection("fiber direction is numerically zero")
        self.check_point(w.x)


# -- built-in metrics ----------------------------------------------------------


def euclidean(n: int) -> MetricSpec:
    def f2(xs, ys):
        return smath.dot(ys, ys)

    return MetricSpec(n, f2, name="euclidean", kind="euclidean",
                      params={"dim": n}, riemannian=True)


def riemannian(n: int, g_field, name="riemannian", domain_margin=None,
               sample_radius=1.0, params=None) -> MetricSpec:
    """Riemannian metric from a generic coefficient field x -> n x n matrix."""

    def f2(xs, ys):
        gm = g_field(xs)
        acc = None
        for i in range(n):
            for j in range(n):
                term = gm[i][j] * ys[i] * ys[j]
                acc = term if acc is None else acc + term
        return acc

    ms = MetricSpec(n, f2, name=name, kind="riemannian", domain_margin=domain_margin,
                    sample_radius=sample_radius, params=params, riemannian=True)
    ms._g_field = g_field
    return ms


def sphere_stereographic(n: int = 2) -> MetricSpec:
    """Round unit sphere in stereographic chart: g = 4 delta / (1+|x|^2)^2."""

    def g_field(xs):
        r2 = smath.dot(xs, xs)
        conf = 4.0 / ((1.0 + r2) * (1.0 + r2))
        return [[conf if i == j else 0.0 for j in range(n)] for i in range(n)]

    return riemannian(n, g_field, name="sphere_stereographic",
                      sample_radius=1.2, params={"dim": n})


def poincare_disk(n: int = 2) -> MetricSpec:
    """Hyperbolic space in the Poincare ball: g = 4 delta / (1-|x|^2)^2."""

    def g_field(xs):
        r2 = smath.dot(xs, xs)
        conf = 4.0 / ((1.0 - r2) * (1.0 - r2))
        return [[conf if i == j else 0.0 for j in range(n)] for i in range(n)]

    return riemannian(n, g_field, name="poincare_disk",
                      domain_margin=lambda x: 1.0 - float(x @ x),
                      sample_radius=0.6, params={"dim": n})


def randers(n: int, beta, alpha=None, name="randers", sample_radius=1.0, params=None) -> MetricSpec:
    """Randers metric F = sqrt(y^T a(x) y) + b(x).y.

    ``beta``: constant covector or generic rule xs -> list of n scalars.
    ``alpha``: None (identity) or generic rule xs -> n x n matrix.
    Validity (the Randers condition |b|_a < 1) is *not* enforced here; it
    surfaces as positive-definiteness failures during checks.
    """
    if not callable(beta):
        bconst = [float(v) for v in beta]
        beta_rule = lambda xs: bconst
    else:
        beta_rule = beta

    def f2(xs, ys):
        if alpha is None:
            a_quad = smath.dot(ys, ys)
        else:
            am = alpha(xs)
            a_quad = None
            for i in range(n):
                for j in range(n):
                    term = am[i][j] * ys[i] * ys[j]
                    a_quad = term if a_quad is None else a_quad + term
        b = beta_rule(xs)
        froot = smath.sqrt(a_quad) + smath.dot(b, ys)
        return froot * froot

    return MetricSpec(n, f2, name=name, kind="randers",
                      sample_radius=sample_radius, params=params)


def funk(n: int = 2) -> MetricSpec:
    """Funk metric of the unit ball (non-reversible, flag curvature -1/4)."""

    def f2(xs, ys):
        xy = smath.dot(xs, ys)
        y2 = smath.dot(ys, ys)
        x2 = smath.dot(xs, xs)
        froot = (smath.sqrt(xy * xy + y2 * (1.0 - x2)) + xy) / (1.0 - x2)
        return froot * froot

    return MetricSpec(n, f2, name="funk", kind="funk",
                      domain_margin=lambda x: 1.0 - float(x @ x),
                      sample_radius=0.6, params={"dim": n})


def custom(n: int, f2, name="custom", domain_margin=None, sample_radius=1.0,
           params=None) -> MetricSpec:
    return MetricSpec(n, f2, name=name, kind="custom", domain_margin=domain_margin,
                      sample_radius=sample_radius, params=params)


# -- tensor operations ---------------------------------------------------------


def _f2_y_jet(ms: MetricSpec, w: TangentVector, order: int) -> Jet:
    """Jet of y -> F^2(x0, y) at y0 (x held fixed)."""
    xs = list(w.x)
    return lift_any(lambda ys: ms.f2(xs, ys), list(w.y), order)


def metric_value(ms: MetricSpec, w: TangentVector) -> float:
    """F(w) > 0 on the slit bundle."""
    ms.check_tangent(w)
    v = ms.f2(list(w.x), list(w.y))
    if v <= 0.0:
        raise DomainError(f"F^2(w) = {v} <= 0; invalid metric or point")
    return float(np.sqrt(v))


def pivoted_cholesky_pd(a: np.ndarray, tol: float = 1e-12) -> bool:
    """Positive-definiteness via diagonally pivoted Cholesky."""
    m = np.array(a, dtype=float)
    n = m.shape[0]
    scale = max(np.max(np.abs(np.diag(m))), 1e-30)
    for k in range(n):
        piv = k + int(np.argmax(np.diag(m)[k:]))
        if m[piv, piv] <= tol * scale:
            return False
        m[[k, piv]] = m[[piv, k]]
        m[:, [k, piv]] = m[:, [piv, k]]
        m[k, k] = np.sqrt(m[k, k])
        m[k + 1:, k] /= m[k, k]
        m[k + 1:, k + 1:] -= np.outer(m[k + 1:, k], m[k + 1:, k])
    return True


def fundamental_tensor(ms: MetricSpec, w: TangentVector) -> FundamentalTensor:
    """g_w = half the fiber Hessian of F^2 at w; checked positive definite."""
    ms.check_tangent(w)
    n = ms.dim
    jet = _f2_y_jet(ms, w, 2)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * n
            alpha[i] += 1
            alpha[j] += 1
            g[i, j] = g[j, i] = 0.5 * jet.partial(alpha)
    if not pivoted_cholesky_pd(g):
        raise NotPositiveDefinite(
            f"fundamental tensor of {ms.name} at x={w.x}, y={w.y} is not positive definite")
    return FundamentalTensor(w, g)


def cartan_tensor(ms: MetricSpec, w: TangentVector) -> CartanTensor:
    """Fully symmetric C_w(u,v,z) = (1/4) third fiber derivative of F^2."""
    ms.check_tangent(w)
    n = ms.dim
    jet = _f2_y_jet(ms, w, 3)
    c = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                alpha[k] += 1
                val = 0.25 * jet.partial(alpha)
                for perm in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                    c[perm] = val
    return CartanTensor(w, c)


def g_bilinear(ms: MetricSpec, xs, ys, t_vec, v_vec):
    """g_w(t_vec, v_vec) evaluated generically (works at jet-valued xs, ys).

    Half the mixed second derivative of (s, t) -> F^2(x, y + s T + t V).
    """
    probe = ys[0]
    sp = space_for(2, 2)
    zero = probe.space.constant(0.0) if isinstance(probe, Jet) else 0.0
    s = sp.coordinate(0, zero)
    t = sp.coordinate(1, zero)
    shifted = [ys[i] + s * float(t_vec[i]) + t * float(v_vec[i]) for i in range(len(ys))]
    out = ms.f2(xs, shifted)
    return out.partial((1, 1)) * 0.5


def g_pairing_with_w(ms: MetricSpec, xs, ys, v):
    """g_w(w, v) evaluated generically (Euler: half the y-gradient of F^2 against v).

    Works at jet-valued (xs, ys) through one extra nesting level; used by
    rule-based lift projections.
    """
    probe = ys[0]
    sp = space_for(1, 1)
    zero = probe.space.constant(0.0) if isinstance(probe, Jet) else 0.0
    s = sp.coordinate(0, zero)
    shifted = [ys[i] + s * float(v[i]) for i in range(len(ys))]
    out = ms.f2(xs, shifted)
    return out.partial((1,)) * 0.5


# -- metric validation ----------------------------------------------------------


@dataclass
class MetricValidationReport:
    metric: str
    samples: int
    seed: int
    homogeneity_max: float = 0.0
    gww_identity_max: float = 0.0
    pd_failures: int = 0
    failures: list = field(default_factory=list)

    def passed(self, homogeneity_tol=1e-10, gww_tol=1e-10) -> bool:
        return (self.pd_failures == 0 and self.homogeneity_max < homogeneity_tol
                and self.gww_identity_max < gww_tol)

    def rows(self):
        return [
            ("homogeneity_max", self.homogeneity_max),
            ("gww_identity_max", self.gww_identity_max),
            ("pd_failures", float(self.pd_failures)),
        ]


def random_tangent(ms: MetricSpec, rng: SplitMix64, radius: float | None = None) -> TangentVector:
    """Random admissible chart point and direction for sweeps."""
    r = ms.sample_radius if radius is None else radius
    for _ in range(1000):
        x = rng.vector(ms.dim, -r, r)
        if ms.domain_margin is None or ms.domain_margin(x) > 0.05:
            break
    else:
        raise DomainError(f"could not sample an admissible point for {ms.name}")
    y = rng.direction(ms.dim)
    return TangentVector(x, y)


def check_metric(ms: MetricSpec, samples: int, seed: int,
                 lambdas=(0.5, 2.0, 7.0)) -> MetricValidationReport:
    """Sweep homogeneity, positive definiteness and F^2 = g_w(w,w).

    Failures are reported, never raised.
    """
    rng = SplitMix64(seed)
    rep = MetricValidationReport(metric=ms.name, samples=samples, seed=seed)
    for _ in range(samples):
        w = random_tangent(ms, rng)
        try:
            fval = metric_value(ms, w)
            for lam in lambdas:
                fl = metric_value(ms, TangentVector(w.x, lam * w.y))
                rep.homogeneity_max = max(rep.homogeneity_max, abs(fl - lam * fval) / max(1.0, lam))
            g = fundamental_tensor(ms, w).g
            rep.gww_identity_max = max(rep.gww_identity_max, abs(w.y @ g @ w.y - fval ** 2))
        except NotPositiveDefinite:
            rep.pd_failures += 1
            rep.failures.append(("not_positive_definite", w.x.tolist(), w.y.tolist()))
        except DomainError:
            rep.failures.append(("domain_error", w.x.tolist(), w.y.tolist()))
    return rep
