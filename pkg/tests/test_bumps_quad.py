"""Test functions (closed-form Laplacians, norms) and the 2-D quadrature."""

import numpy as np
import pytest

from ellipticlab import TestFunction as Bump
from ellipticlab.quad2d import QuadratureError, adaptive_quad2d


def fd_laplacian(f, z, h=1e-4):
    return (f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h) - 4 * f(z)) / h ** 2


class TestBumps:
    @pytest.mark.parametrize("kind", ["polynomial-bump", "gaussian-bump"])
    def test_laplacian_matches_finite_differences(self, kind):
        tf = Bump(kind=kind, center=0.2 - 0.1j, radius=0.7)
        rng = np.random.default_rng(1)
        for _ in range(25):
            z = tf.center + 0.6 * tf.radius * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
            assert fd_laplacian(tf.f, z) == pytest.approx(float(tf.laplacian(z)),
                                                          rel=2e-4, abs=1e-5)

    @pytest.mark.parametrize("kind", ["polynomial-bump", "gaussian-bump"])
    def test_compact_support_and_c2(self, kind):
        tf = Bump(kind=kind)
        assert tf.f(1.0 + 0.0j) == 0.0
        assert tf.f(2.0) == 0.0
        assert tf.laplacian(1.0 + 1e-12j) == 0.0
        # value and Laplacian decay continuously to the boundary
        assert abs(tf.f(0.999)) < 1e-4 or kind == "polynomial-bump"
        assert abs(tf.f(0.9999)) < 1e-9

    def test_poly_delta_l1_closed_form(self):
        # 2 pi * 12 * int_0^1 (1-r^2)|3r^2-1| r dr = 32 pi / 9
        tf = Bump(kind="polynomial-bump")
        assert tf.norm_delta_l1 == pytest.approx(32 * np.pi / 9, rel=1e-9)

    def test_l1_scale_invariance(self):
        a = Bump(radius=1.0).norm_delta_l1
        b = Bump(radius=0.2).norm_delta_l1
        assert a == pytest.approx(b, rel=1e-9)

    def test_observable_scaling(self):
        tf = Bump(center=0.3, alpha=0.25)
        n = 256
        z = 0.3 + 0.01j
        base = tf.f(tf.center + (z - tf.center) * tf.scale(n))
        assert tf.observable(z, n) == pytest.approx(tf.scale(n) ** 2 * float(base))
        assert tf.support_radius(n) == pytest.approx(n ** -0.25)

    def test_observable_laplacian_consistency(self):
        tf = Bump(center=0.1 + 0.1j, alpha=0.3)
        n = 64
        f_obs = lambda z: tf.observable(z, n)
        z = tf.center + 0.4 * tf.support_radius(n)
        assert fd_laplacian(f_obs, z, h=1e-5) == pytest.approx(
            float(tf.observable_laplacian(z, n)), rel=1e-3)

    def test_laplacian_integrates_to_zero(self):
        tf = Bump(kind="gaussian-bump", radius=0.5)
        val, _ = adaptive_quad2d(lambda p: np.real(tf.laplacian(p)),
                                 (-0.5, 0.5, -0.5, 0.5), tol=1e-6)
        assert abs(val) < 1e-5

    def test_validation(self):
        with pytest.raises(ValueError):
            Bump(kind="sombrero")
        with pytest.raises(ValueError):
            Bump(alpha=0.5)
        with pytest.raises(ValueError):
            Bump(radius=0.0)
        Bump().validate(256)  # smooth bump on the unit disk passes


class TestQuad2d:
    def test_separable_polynomial(self):
        val, err = adaptive_quad2d(lambda p: p.real ** 2 * p.imag ** 2,
                                   (0.0, 1.0, 0.0, 2.0), tol=1e-10)
        assert val == pytest.approx((1 / 3) * (8 / 3), abs=1e-9)
        assert err < 1e-8

    def test_gaussian_integral(self):
        val, _ = adaptive_quad2d(lambda p: np.exp(-np.abs(p) ** 2),
                                 (-6.0, 6.0, -6.0, 6.0), tol=1e-9)
        assert val == pytest.approx(np.pi, abs=1e-7)

    def test_disc_indicator(self):
        val, _ = adaptive_quad2d(lambda p: (np.abs(p) <= 0.8).astype(float),
                                 (-1.0, 1.0, -1.0, 1.0), tol=1e-4)
        assert val == pytest.approx(np.pi * 0.64, abs=2e-3)

    def test_bump_mass_matches_radial_quadrature(self):
        tf = Bump(kind="polynomial-bump", center=0.5j, radius=0.4)
        val, _ = adaptive_quad2d(lambda p: np.real(tf.f(p)),
                                 (-0.4, 0.4, 0.1, 0.9), tol=1e-9)
        # int (1-r^2)^3 over the unit disk = pi/4, scaled by radius^2
        assert val == pytest.approx(np.pi / 4 * 0.4 ** 2, rel=1e-7)

    def test_cell_budget_raises(self):
        with pytest.raises(QuadratureError):
            adaptive_quad2d(lambda p: np.sin(60.0 * p.real) * np.cos(77.0 * p.imag),
                            (0.0, 10.0, 0.0, 10.0), tol=1e-14, max_depth=30,
                            max_cells=500)

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            adaptive_quad2d(lambda p: np.ones_like(p.real), (0, 0, 0, 1), tol=1e-6)
