import numpy as np
import pytest

from khgraph import bodies
from khgraph.errors import GridConstructionError
from khgraph.grid import build_grid


BODIES = {
    "ball": lambda: bodies.ball(0.5),
    "off-center ball": lambda: bodies.ball(0.4, center=[0.2, -0.1]),
    "ellipse": lambda: bodies.ellipse((0.45, 0.3)),
    "rotated ellipse": lambda: bodies.ellipse((0.6, 0.35), angle=0.4),
    "superellipse": lambda: bodies.superellipse((0.5, 0.4), 4.0),
}


class TestDefiningFunctions:
    @pytest.mark.parametrize("name", sorted(BODIES))
    def test_boundary_level_and_unit_gradient(self, name):
        body = BODIES[name]()
        thetas = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
        worst_h, worst_g = 0.0, 0.0
        for t in thetas:
            p = body.boundary_param(t)
            worst_h = max(worst_h, abs(body.h(p)))
            worst_g = max(worst_g, abs(np.linalg.norm(body.grad_h(p)) - 1.0))
        assert worst_h <= 1e-10
        assert worst_g <= 1e-10

    @pytest.mark.parametrize("name", sorted(BODIES))
    def test_positive_inside_uniformly_concave(self, name):
        body = BODIES[name]()
        rng = np.random.default_rng(0)
        for _ in range(200):
            t = rng.uniform(0, 2 * np.pi)
            r = rng.uniform(0.05, 0.95)
            p = body.interior_point + r * body.gauge_radius(t) * np.array(
                [np.cos(t), np.sin(t)]
            )
            assert body.h(p) > 0
        theta_c = body.concavity_probe(n_samples=200, rng=1)
        assert theta_c > 1e-3

    @pytest.mark.parametrize("name", sorted(BODIES))
    def test_interior_normal_direction(self, name):
        body = BODIES[name]()
        for t in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            p = body.boundary_param(t)
            nu = np.asarray(body.grad_h(p))
            # a small step along Dh must increase h (into the body)
            assert body.h(p + 1e-6 * nu) > body.h(p)

    def test_ball_closed_form(self):
        body = bodies.ball(0.5)
        p = np.array([0.1, 0.2])
        assert body.h(p) == pytest.approx((0.25 - 0.05) / 1.0, rel=1e-14)
        np.testing.assert_allclose(body.hess_h(p), -np.eye(2) / 0.5, atol=0)

    def test_gradient_oracle_matches_fd(self):
        rng = np.random.default_rng(2)
        for name in ("ellipse", "superellipse"):
            body = BODIES[name]()
            for _ in range(10):
                t = rng.uniform(0, 2 * np.pi)
                r = rng.uniform(0.3, 0.9)
                p = body.interior_point + r * body.gauge_radius(t) * np.array(
                    [np.cos(t), np.sin(t)]
                )
                step = 1e-6
                fd = np.array(
                    [
                        (body.h(p + step * e) - body.h(p - step * e)) / (2 * step)
                        for e in np.eye(2)
                    ]
                )
                np.testing.assert_allclose(body.grad_h(p), fd, atol=1e-7)

    def test_superellipse_rejects_exponent_below_two(self):
        with pytest.raises(ValueError):
            bodies.superellipse((0.5, 0.4), 1.5)

    def test_gauge_boundary_consistency(self):
        for name in sorted(BODIES):
            body = BODIES[name]()
            for t in np.linspace(0, 2 * np.pi, 12, endpoint=False):
                via_gauge = body.interior_point + body.gauge_radius(t) * np.array(
                    [np.cos(t), np.sin(t)]
                )
                assert abs(body.h(via_gauge)) <= 1e-10


class TestGrid:
    def test_disk_counts_and_boundary_ring(self):
        g = build_grid(bodies.ball(1.0), 8, 16)
        assert g.n_nodes == 128
        r = np.linalg.norm(g.nodes[g.boundary_idx], axis=1)
        np.testing.assert_allclose(r, 1.0, atol=1e-14)

    def test_ellipse_boundary_on_level(self):
        body = bodies.ellipse((1.0, 0.6))
        g = build_grid(body, 12, 24)
        worst = max(abs(body.h(p)) for p in g.nodes[g.boundary_idx])
        assert worst <= 1e-12

    def test_stencils_exact_on_quadratics(self):
        for body, nr, nt in (
            (bodies.ball(0.5), 16, 32),
            (bodies.ellipse((0.45, 0.3)), 16, 32),
            (bodies.ball(0.5), 64, 128),
        ):
            g = build_grid(body, nr, nt)
            x, y = g.nodes[:, 0], g.nodes[:, 1]
            checks = [
                (x * x, {"dx": 2 * x, "dxx": 2.0, "dxy": 0.0, "dyy": 0.0}),
                (x * y, {"dx": y, "dy": x, "dxy": 1.0, "dxx": 0.0}),
                (y * y, {"dy": 2 * y, "dyy": 2.0, "dxx": 0.0, "dxy": 0.0}),
            ]
            for u, exact in checks:
                for name, target in exact.items():
                    assert np.abs(g.ops[name] @ u - target).max() <= 1e-11

    def test_quadratic_hessian_reproduced(self):
        g = build_grid(bodies.ball(0.5), 16, 32)
        x, y = g.nodes[:, 0], g.nodes[:, 1]
        u = 0.8 * x * x - 0.3 * x * y + 0.6 * y * y
        h = g.hessians(u)[g.interior_idx]
        np.testing.assert_allclose(h[:, 0, 0], 1.6, atol=1e-11)
        np.testing.assert_allclose(h[:, 0, 1], -0.3, atol=1e-11)
        np.testing.assert_allclose(h[:, 1, 1], 1.2, atol=1e-11)

    def test_quadrature_against_closed_areas(self):
        for body, area in (
            (bodies.ball(0.5), np.pi * 0.25),
            (bodies.ellipse((0.45, 0.3)), np.pi * 0.45 * 0.3),
        ):
            g = build_grid(body, 32, 64)
            assert g.quad_weights.sum() == pytest.approx(area, rel=1e-10)

    def test_smooth_integrand_quadrature_order(self):
        body = bodies.ball(1.0)
        exact = float(np.pi * (1 - 1 / np.e))  # integral of exp(-|y|^2)

        def integral(nr, nt):
            g = build_grid(body, nr, nt)
            f = np.exp(-(g.nodes**2).sum(axis=1))
            return float((g.quad_weights * f).sum())

        e1 = abs(integral(16, 32) - exact)
        e2 = abs(integral(32, 64) - exact)
        assert e2 < e1 / 3

    def test_too_small_grid_rejected(self):
        with pytest.raises(GridConstructionError):
            build_grid(bodies.ball(1.0), 4, 16)
        with pytest.raises(GridConstructionError):
            build_grid(bodies.ball(1.0), 8, 8)

    def test_jet_interpolant_reproduces_cubics(self):
        g = build_grid(bodies.ball(0.5), 16, 32)
        x, y = g.nodes[:, 0], g.nodes[:, 1]
        u = x**3 - 2 * x * y * y + 0.5 * y**3 + x * y
        interp = g.jet_interpolant(u)
        rng = np.random.default_rng(3)
        for _ in range(20):
            t = rng.uniform(0, 2 * np.pi)
            r = rng.uniform(0.1, 0.95) * 0.5
            q = r * np.array([np.cos(t), np.sin(t)])
            jet = interp(q)
            qx, qy = q
            assert jet.value == pytest.approx(
                qx**3 - 2 * qx * qy * qy + 0.5 * qy**3 + qx * qy, abs=1e-11
            )
            np.testing.assert_allclose(
                jet.gradient,
                [3 * qx**2 - 2 * qy**2 + qy, -4 * qx * qy + 1.5 * qy**2 + qx],
                atol=1e-10,
            )
            np.testing.assert_allclose(
                jet.hessian,
                [[6 * qx, -4 * qy + 1], [-4 * qy + 1, -4 * qx + 3 * qy]],
                atol=1e-9,
            )

    def test_boundary_normals_and_tangents(self):
        body = bodies.ellipse((0.45, 0.3))
        g = build_grid(body, 12, 24)
        for i, idx in enumerate(g.boundary_idx):
            nu = g.boundary_normals[i]
            tau = g.boundary_tangents[i]
            assert abs(nu @ nu - 1) < 1e-12
            assert abs(nu @ tau) < 1e-12
            assert body.h(g.nodes[idx] + 1e-6 * nu) > 0  # points inward
