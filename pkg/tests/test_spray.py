import numpy as np
import pytest

from finslergeo import metrics
from finslergeo.errors import DegenerateFlag, NotPositiveDefinite
from finslergeo.findiff import riemann_jacobi_operator
from finslergeo.metrics import TangentVector, random_tangent
from finslergeo.rng import SplitMix64
from finslergeo.spray import (PointFrame, SpraySpec, curvature_endomorphism,
                              flag_curvature, horizontal_lift,
                              spray_coefficients, vertical_projector)

from oracles import euler_lagrange_spray


def test_euclidean_spray_vanishes(euclid2):
    sd = spray_coefficients(euclid2, TangentVector([0.3, -0.2], [1.0, 0.5]))
    assert np.max(np.abs(sd.G)) == 0.0
    assert np.max(np.abs(sd.N)) == 0.0
    assert np.max(np.abs(sd.B)) == 0.0


def test_sphere_origin_spray_vanishes(sphere):
    sd = spray_coefficients(sphere, TangentVector([0.0, 0.0], [0.7, -0.3]))
    assert np.max(np.abs(sd.G)) < 1e-14


def test_spray_matches_euler_lagrange_oracle(randers_var):
    for (x, y) in ([[0.0, 0.0], [0.0, 1.0]], [[0.3, -0.4], [0.8, 0.5]],
                   [[-0.2, 0.6], [0.4, -0.9]]):
        sd = spray_coefficients(randers_var, TangentVector(x, y))
        oracle = euler_lagrange_spray(randers_var, x, y)
        assert np.max(np.abs(sd.G - oracle)) < 1e-5


@pytest.mark.parametrize("name", ["sphere", "poincare", "funk", "randers_var"])
def test_homogeneity_chain(name, request):
    ms = request.getfixturevalue(name)
    rng = SplitMix64(3)
    for _ in range(50):
        w = random_tangent(ms, rng)
        sd = spray_coefficients(ms, w)
        assert np.max(np.abs(sd.N @ w.y - 2 * sd.G)) < 1e-9
        assert np.max(np.abs(np.einsum("ijk,j,k->i", sd.B, w.y, w.y) - 2 * sd.G)) < 1e-9


def test_horizontal_vertical_split(randers_var):
    w = TangentVector([0.2, 0.1], [0.9, -0.4])
    sd = spray_coefficients(randers_var, w)
    u = np.array([1.0, 0.0])
    lifted = horizontal_lift(sd, u)
    assert np.allclose(lifted[:2], u)
    assert np.max(np.abs(vertical_projector(sd, lifted))) < 1e-12
    assert np.max(np.abs(horizontal_lift(sd, [0.0, 0.0]))) == 0.0
    # vertical vectors keep their fiber components
    assert np.allclose(vertical_projector(sd, [0.0, 0.0, 0.3, -0.7]), [0.3, -0.7])
    # reconstruction: X - hor(dpi X) is vertical with the projected components
    X = np.array([0.5, -0.2, 0.7, 0.1])
    rem = X - horizontal_lift(sd, X[:2])
    assert np.max(np.abs(rem[:2])) < 1e-15
    assert np.max(np.abs(rem[2:] - vertical_projector(sd, X))) < 1e-12


def test_euclidean_curvature_zero(euclid2):
    R = curvature_endomorphism(euclid2, TangentVector([1.0, 2.0], [0.3, 0.4])).R
    assert np.max(np.abs(R)) == 0.0


def test_sphere_unit_curvature_ratio(sphere):
    rng = SplitMix64(8)
    for _ in range(20):
        w = random_tangent(sphere, rng)
        u = rng.direction(2)
        k = flag_curvature(sphere, w, u)
        assert abs(k - 1.0) < 1e-6


def test_poincare_and_funk_flag_values(poincare, funk):
    rng = SplitMix64(12)
    for _ in range(100):
        w = random_tangent(poincare, rng)
        assert abs(flag_curvature(poincare, w, rng.direction(2)) + 1.0) < 1e-6
    for _ in range(100):
        w = random_tangent(funk, rng)
        assert abs(flag_curvature(funk, w, rng.direction(2)) + 0.25) < 1e-4


def test_flag_invariance(randers_var):
    rng = SplitMix64(31)
    for _ in range(10):
        w = random_tangent(randers_var, rng)
        u = rng.direction(2)
        k0 = flag_curvature(randers_var, w, u)
        assert abs(flag_curvature(randers_var, w, u + 3.0 * w.y) - k0) < 1e-9
        assert abs(flag_curvature(randers_var, w, 0.2 * u) - k0) < 1e-9


def test_degenerate_flag_raises(euclid2):
    w = TangentVector([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(DegenerateFlag):
        flag_curvature(euclid2, w, [2.0, 0.0])


def test_curvature_g_symmetry_and_kernel(randers_var, funk):
    rng = SplitMix64(44)
    for ms in (randers_var, funk):
        for _ in range(10):
            w = random_tangent(ms, rng)
            fr = PointFrame(ms, w, order=4)
            gr = fr.g @ fr.R
            assert np.max(np.abs(gr - gr.T)) < 1e-7
            assert np.max(np.abs(fr.R @ w.y)) < 1e-8


def test_riemannian_reduction_against_christoffel_oracle(sphere, poincare):
    rng = SplitMix64(50)
    for ms in (sphere, poincare):
        gfield = ms._g_field
        for _ in range(5):
            w = random_tangent(ms, rng)
            fr = PointFrame(ms, w, order=4)
            oracle = riemann_jacobi_operator(lambda x: gfield(list(x)), w.x, w.y)
            assert np.max(np.abs(fr.R - oracle)) < 1e-7


def test_bare_spray_accepted():
    # constant-coefficient quadratic spray (not from any metric)
    gam = np.array([[[0.3, 0.1], [0.1, -0.2]], [[0.0, 0.25], [0.25, 0.4]]])

    def g_rule(xs, ys):
        return [0.5 * sum(gam[i][j][k] * ys[j] * ys[k] for j in range(2) for k in range(2))
                for i in range(2)]

    spray = SpraySpec(2, g_rule, name="quadratic")
    w = TangentVector([0.4, -0.1], [0.8, 0.6])
    sd = spray_coefficients(spray, w)
    assert np.max(np.abs(sd.B - gam)) < 1e-12
    assert np.max(np.abs(sd.N @ w.y - 2 * sd.G)) < 1e-12
    R = curvature_endomorphism(spray, w).R
    # constant symbols: R = 2 G B - N N, both computable by hand
    expect = 2 * np.einsum("j,ijk->ik", sd.G, gam) - sd.N @ sd.N
    assert np.max(np.abs(R - expect)) < 1e-12
    with pytest.raises(TypeError):
        flag_curvature(spray, w, [1.0, 0.0])


def test_condition_number_guard():
    ill = metrics.riemannian(2, lambda xs: [[1.0, 0.0], [0.0, 1e-14]], name="ill")
    with pytest.raises(NotPositiveDefinite):
        spray_coefficients(ill, TangentVector([0.0, 0.0], [1.0, 1.0]))
