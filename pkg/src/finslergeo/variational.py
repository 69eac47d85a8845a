"""Geodesic integration, energy, Jacobi fields and the second variation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (DomainExit, GridError, NormalityViolation, NullDirection,
                     StepFailure)
from .lifts import LiftSpec, classical_lift, covariant_derivative_curve
from .metrics import MetricSpec, TangentVector, metric_value
from .spray import PointFrame, spray_values

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-11
DEFAULT_NODES = 401


@dataclass
class Curve:
    """A regular discretized curve: strictly increasing grid, nonzero speeds."""

    grid: np.ndarray
    points: np.ndarray      # (N, n)
    velocities: np.ndarray  # (N, n)
    dense: object = None    # optional dense-output callable t -> state
    solver_nodes: np.ndarray | None = None  # accepted integrator times

    def __post_init__(self):
        self.grid = np.asarray(self.grid, float)
        self.points = np.asarray(self.points, float)
        self.velocities = np.asarray(self.velocities, float)
        if np.any(np.diff(self.grid) <= 0):
            raise GridError("curve grid must be strictly increasing")
        if np.min(np.linalg.norm(self.velocities, axis=1)) < 1e-12:
            raise NullDirection("curve has a node with zero velocity")

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass
class FieldAlongCurve:
    grid: np.ndarray
    vectors: np.ndarray
    covariant_derivative: np.ndarray | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, float)
        self.vectors = np.asarray(self.vectors, float)


@dataclass
class VariationFamily:
    """A smooth family of curves: rule(s, t) -> chart point."""

    rule: object
    eps: float = 1e-2


def fd_derivative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """d/dt of grid samples: 4th-order central inside, 3rd-order one-sided ends.

    Requires a uniform grid.
    """
    values = np.asarray(values, float)
    grid = np.asarray(grid, float)
    hs = np.diff(grid)
    h = hs[0]
    if np.max(np.abs(hs - h)) > 1e-10 * max(1.0, abs(h)):
        raise GridError("finite differencing requires a uniform grid")
    if len(grid) < 5:
        raise GridError("need at least 5 nodes for the differentiation stencils")
    v = values
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    out[0] = (-11 * v[0] + 18 * v[1] - 9 * v[2] + 2 * v[3]) / (6 * h)
    out[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    out[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    out[-1] = (11 * v[-1] - 18 * v[-2] + 9 * v[-3] - 2 * v[-4]) / (6 * h)
    return out


def _margin_event(src, dim):
    margin = getattr(src, "domain_margin", None)
    if margin is None:
        return None

    def event(t, s):
        return margin(s[:dim]) - 1e-9

    event.terminal = True
    event.direction = -1
    return event


def _solve(src, rhs, state0, t_end, rtol, atol, dim):
    events = _margin_event(src, dim)
    sol = solve_ivp(rhs, (0.0, t_end), state0, method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, events=[events] if events else None)
    if sol.status == 1:
        raise DomainExit(f"trajectory left the validity region at t={sol.t_events[0][0]:.6g}")
    if not sol.success:
        raise StepFailure(f"integrator failed: {sol.message}")
    return sol


def integrate_geodesic(src, w0: TangentVector, t_end: float,
                       rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                       nodes: int = DEFAULT_NODES) -> Curve:
    """Solve x-ddot = -2 G(x, x-dot) from w0 and sample on a uniform grid."""
    src.check_tangent(w0)
    if t_end == 0:
        raise ValueError("t_end must be nonzero")
    n = src.dim

    def rhs(t, s):
        return np.concatenate([s[n:], -2.0 * spray_values(src, s[:n], s[n:])])

    state0 = np.concatenate([w0.x, w0.y])
    sol = _solve(src, rhs, state0, t_end, rtol, atol, n)
    grid = np.linspace(0.0, t_end, nodes)
    if t_end < 0:
        grid = grid[::-1]
    states = sol.sol(grid)
    return Curve(grid=grid, points=states[:n].T, velocities=states[n:].T, dense=sol.sol,
                 solver_nodes=np.sort(sol.t))


def exponential_map(src, x0, v, t: float, rtol: float = DEFAULT_RTOL,
                    atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Endpoint of the geodesic with initial point x0 and velocity v at time t."""
    if t == 0:
        return np.asarray(x0, float).copy()
    geo = integrate_geodesic(src, TangentVector(x0, v), t, rtol=rtol, atol=atol, nodes=5)
    return geo.points[-1] if t > 0 else geo.points[0]


_GAUSS4_NODES = np.array([-0.8611363115940526, -0.3399810435848563,
                          0.3399810435848563, 0.8611363115940526])
_GAUSS4_WEIGHTS = np.array([0.3478548451374538, 0.6521451548625461,
                            0.6521451548625461, 0.3478548451374538])


def geodesic_residual(src, curve: Curve, stride: int = 1) -> float:
    """Scale-normalized defect of the geodesic equation along the curve.

    With dense output the defect is measured in integrated form per
    accepted step, | dx-dot - integral of -2G | (Gauss quadrature against
    the dense states), normalized by the local state scale; this equals the
    integrator's local error and involves no numerical differentiation.
    Hand-built curves fall back to grid-stencil acceleration.
    """
    n = curve.n
    if curve.dense is not None and curve.solver_nodes is not None and len(curve.solver_nodes) > 1:
        ts = curve.solver_nodes
        worst = 0.0
        for i in range(0, len(ts) - 1, stride):
            a, b = ts[i], ts[i + 1]
            if b <= a:
                continue
            half = 0.5 * (b - a)
            quad = np.zeros(n)
            scale = 1.0
            for node, weight in zip(_GAUSS4_NODES, _GAUSS4_WEIGHTS):
                st = curve.dense(0.5 * (a + b) + half * node)
                g2 = 2.0 * spray_values(src, st[:n], st[n:])
                quad += weight * g2
                scale = max(scale, float(np.max(np.abs(st))))
            defect = (curve.dense(b)[n:] - curve.dense(a)[n:]) + half * quad
            worst = max(worst, float(np.max(np.abs(defect))) / scale)
        return worst
    acc = fd_derivative(curve.velocities, curve.grid)
    worst = 0.0
    for i in range(0, len(curve.grid), stride):
        g2 = 2.0 * spray_values(src, curve.points[i], curve.velocities[i])
        scale = max(1.0, float(np.max(np.abs(curve.points[i]))),
                    float(np.max(np.abs(curve.velocities[i]))))
        worst = max(worst, float(np.max(np.abs(acc[i] + g2))) / scale)
    return worst


def energy(ms: MetricSpec, curve: Curve) -> float:
    """E = (1/2) integral of F(velocity)^2 by composite Simpson."""
    grid = curve.grid
    points = curve.points
    vels = curve.velocities
    if len(grid) < DEFAULT_NODES and curve.dense is not None:
        grid = np.linspace(curve.grid[0], curve.grid[-1], DEFAULT_NODES)
        states = curve.dense(grid)
        n = curve.n
        points, vels = states[:n].T, states[n:].T
    if len(grid) % 2 == 0:
        raise GridError("Simpson quadrature needs an odd number of nodes")
    hs = np.diff(grid)
    if np.max(np.abs(hs - hs[0])) > 1e-10 * max(1.0, abs(hs[0])):
        raise GridError("energy quadrature requires a uniform grid")
    vals = np.empty(len(grid))
    for i in range(len(grid)):
        if np.linalg.norm(vels[i]) < 1e-12:
            raise NullDirection(f"zero velocity at node {i}")
        vals[i] = ms.f2(list(points[i]), list(vels[i]))
    h = hs[0]
    weights = np.ones(len(grid))
    weights[1:-1:2] = 4.0
    weights[2:-2:2] = 2.0
    return float(0.5 * h / 3.0 * np.sum(weights * vals))


def metric_value_on(ms: MetricSpec, curve: Curve, i: int) -> float:
    """F of the curve velocity at node i."""
    return metric_value(ms, TangentVector(curve.points[i], curve.velocities[i]))


def _n_matrix(src, x, y):
    return PointFrame(src, TangentVector(x, y), order=3).N


def jacobi_integrate(src, geo: Curve, J0, J0dot, rtol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL) -> FieldAlongCurve:
    """Integrate the Jacobi equation D^2 J + R(J) = 0 along a geodesic.

    First-order form in (J, K = covariant derivative of J): the geodesic is
    re-integrated jointly so R and the connection are evaluated on the exact
    flow. ``J0dot`` is the initial covariant derivative.
    """
    res = geodesic_residual(src, geo, stride=8)
    if res > 1e-6:
        raise GridError(f"input curve is not a geodesic (residual {res:.2e})")
    n = geo.n

    def rhs(t, s):
        x, y, J, K = s[:n], s[n:2 * n], s[2 * n:3 * n], s[3 * n:]
        fr = PointFrame(src, TangentVector(x, y), order=4)
        return np.concatenate([
            y, -2.0 * fr.G,
            K - fr.N @ J,
            -fr.R @ J - fr.N @ K,
        ])

    state0 = np.concatenate([geo.points[0], geo.velocities[0],
                             np.asarray(J0, float), np.asarray(J0dot, float)])
    t_end = geo.grid[-1] - geo.grid[0]
    sol = _solve(src, rhs, state0, t_end, rtol, atol, n)
    states = sol.sol(geo.grid - geo.grid[0])
    return FieldAlongCurve(grid=geo.grid, vectors=states[2 * n:3 * n].T,
                           covariant_derivative=states[3 * n:].T)


def jacobi_variation_oracle(src, w0: TangentVector, u, t, h: float = 1e-3,
                            rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
    """Geodesic-variation Jacobi field by central differences of the exponential.

    Returns (exp(x0, y0 + h u, t) - exp(x0, y0 - h u, t)) / 2h, the Jacobi
    field with J(0) = 0 and covariant initial derivative u; ``t`` may be a
    scalar or a grid.
    """
    u = np.asarray(u, float)
    tarr = np.atleast_1d(np.asarray(t, float))
    t_end = float(np.max(tarr))
    n = src.dim

    def rhs(tt, s):
        return np.concatenate([s[n:], -2.0 * spray_values(src, s[:n], s[n:])])

    sols = []
    for sign in (+1.0, -1.0):
        state0 = np.concatenate([w0.x, w0.y + sign * h * u])
        sols.append(_solve(src, rhs, state0, t_end, rtol, atol, n))
    out = np.empty((tarr.size, n))
    for i, ti in enumerate(tarr):
        xp = sols[0].sol(ti)[:n]
        xm = sols[1].sol(ti)[:n]
        out[i] = (xp - xm) / (2.0 * h)
    return out[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def parallel_transport(src, geo: Curve, v0) -> FieldAlongCurve:
    """Solve D^{gdot} V/dt = 0 along a geodesic."""
    res = geodesic_residual(src, geo, stride=8)
    if res > 1e-6:
        raise GridError(f"input curve is not a geodesic (residual {res:.2e})")
    n = geo.n

    def rhs(t, s):
        x, y, V = s[:n], s[n:2 * n], s[2 * n:]
        N = _n_matrix(src, x, y)
        return np.concatenate([y, -2.0 * spray_values(src, x, y), -N @ V])

    state0 = np.concatenate([geo.points[0], geo.velocities[0], np.asarray(v0, float)])
    sol = _solve(src, rhs, state0, geo.grid[-1] - geo.grid[0], DEFAULT_RTOL, DEFAULT_ATOL, n)
    states = sol.sol(geo.grid - geo.grid[0])
    return FieldAlongCurve(grid=geo.grid, vectors=states[2 * n:].T)


# -- second variation -----------------------------------------------------------


def _endpoint_tangent_basis(endpoint):
    """(submanifold, param) -> columns spanning the tangent space at the point."""
    sub, param = endpoint
    return sub.jacobian(param)


def second_variation_formula(ms: MetricSpec, geo: Curve, V: FieldAlongCurve,
                             P1=None, P2=None, lift: LiftSpec | None = None) -> float:
    """Index-form value of eq-style second variation with submanifold ends.

    integral of g(DV, DV) - g(R(V), V) plus the second-fundamental-form
    boundary terms; P1/P2 are (Submanifold, param) pairs or None for fixed
    endpoints (where V must vanish).
    """
    from .submanifolds import sff_connection

    if lift is None:
        lift = classical_lift("berwald", ms)
    grid = geo.grid
    if V.vectors.shape != geo.points.shape or not np.allclose(V.grid, grid):
        raise GridError("variation field must live on the geodesic grid")

    boundary = 0.0
    for which, endpoint, sign in (("start", P1, -1.0), ("end", P2, +1.0)):
        idx = 0 if which == "start" else -1
        vel = geo.velocities[idx]
        vend = V.vectors[idx]
        if endpoint is None:
            if np.linalg.norm(vend) > 1e-6:
                raise NormalityViolation(
                    f"fixed-endpoint variation must vanish at the {which} (|V|={np.linalg.norm(vend):.2e})")
            continue
        sub, param = endpoint
        basis = _endpoint_tangent_basis(endpoint)
        if np.max(np.abs(sub.value(param) - geo.points[idx])) > 1e-8:
            raise NormalityViolation(f"{which} submanifold does not pass through the endpoint")
        fr = PointFrame(ms, TangentVector(geo.points[idx], vel), order=2)
        normality = np.max(np.abs(basis.T @ (fr.g @ vel)))
        if normality > 1e-6:
            raise NormalityViolation(
                f"geodesic is not normal to the {which} submanifold (residual {normality:.2e})")
        coeffs, res, *_ = np.linalg.lstsq(basis, vend, rcond=None)
        if np.max(np.abs(basis @ coeffs - vend)) > 1e-6:
            raise NormalityViolation(f"variation field is not tangent at the {which} submanifold")
        boundary += sign * sff_connection(sub, param, vel, coeffs, coeffs, ms, lift=lift)

    W = FieldAlongCurve(grid=grid, vectors=geo.velocities)
    DV = covariant_derivative_curve(lift, ms, geo, W, V)
    vals = np.empty(len(grid))
    for i in range(len(grid)):
        fr = PointFrame(ms, TangentVector(geo.points[i], geo.velocities[i]), order=4)
        dv = DV.vectors[i]
        vals[i] = dv @ fr.g @ dv - (fr.R @ V.vectors[i]) @ fr.g @ V.vectors[i]
    h = grid[1] - grid[0]
    weights = np.ones(len(grid))
    weights[1:-1:2] = 4.0
    weights[2:-2:2] = 2.0
    return float(h / 3.0 * np.sum(weights * vals) + boundary)


def family_curve(fam: VariationFamily, s: float, t0: float = 0.0, t1: float = 1.0,
                 nodes: int = 801) -> Curve:
    """Sample one member of a variation family; velocities by finite differences."""
    grid = np.linspace(t0, t1, nodes)
    pts = np.array([np.asarray(fam.rule(s, t), float) for t in grid])
    vels = fd_derivative(pts, grid)
    return Curve(grid=grid, points=pts, velocities=vels)


def variation_energy_derivatives(ms: MetricSpec, fam: VariationFamily, order: int,
                                 h: float = 1e-3, nodes: int = 801) -> float:
    """d/ds or d^2/ds^2 of s -> E(lambda_s) at s=0, 4th-order stencils."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    evals = {}
    svals = (-2, -1, 1, 2) if order == 1 else (-2, -1, 0, 1, 2)
    for k in svals:
        evals[k] = energy(ms, family_curve(fam, k * h, nodes=nodes))
    if order == 1:
        return (evals[-2] - 8 * evals[-1] + 8 * evals[1] - evals[2]) / (12 * h)
    return (-evals[-2] + 16 * evals[-1] - 30 * evals[0] + 16 * evals[1]
            - evals[2]) / (12 * h * h)


def variation_symmetry_residual(ms: MetricSpec, fam: VariationFamily, lift: LiftSpec | None = None,
                                h: float = 1e-3, nodes: int = 201) -> float:
    """Node-wise residual of the covariant-derivative symmetry of a variation.

    Compares the s-derivative of T = dH/dt with the t-derivative of
    U = dH/ds, both corrected by the affine coefficients at direction T;
    zero for torsion-condition-satisfying lifts.
    """
    from .lifts import affine_coefficients

    if lift is None:
        lift = classical_lift("berwald", ms)
    grid = np.linspace(0.0, 1.0, nodes)
    svals = np.array([-2 * h, -h, 0.0, h, 2 * h])
    pts = np.array([[np.asarray(fam.rule(s, t), float) for t in grid] for s in svals])
    T = np.array([fd_derivative(pts[j], grid) for j in range(len(svals))])
    U = np.empty_like(T)
    for i in range(len(grid)):
        U[:, i, :] = fd_derivative(pts[:, i, :], svals)
    dT_ds = np.empty_like(T[2])
    for i in range(len(grid)):
        dT_ds[i] = fd_derivative(T[:, i, :], svals)[2]
    dU_dt = fd_derivative(U[2], grid)
    worst = 0.0
    for i in range(len(grid)):
        x = pts[2, i]
        tvec = T[2, i]
        A = affine_coefficients(lift, ms, TangentVector(x, tvec)).A
        lhs = dT_ds[i] + np.einsum("ijk,j,k->i", A, U[2, i], tvec)
        rhs = dU_dt[i] + np.einsum("ijk,j,k->i", A, tvec, U[2, i])
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
