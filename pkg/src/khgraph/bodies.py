"""Strictly convex bodies with uniformly concave defining functions.

A body carries a defining function h with h > 0 inside, h = 0 and |Dh| = 1 on
the boundary, and D^2 h bounded above by a negative multiple of the identity;
Dh is then the interior unit normal field on the boundary.

Construction: balls use the closed form (rho^2 - |p-c|^2)/(2 rho), which is
globally smooth.  Other shapes use h = d - lambda d^2 / 2 built on the
distance d to the boundary (closest-point projection): on the boundary Dh =
Dd is the unit interior normal, and the -lambda/2 d^2 correction makes the
normal direction uniformly concave.  d has the usual kink on the medial set
deep inside the body; h stays continuous and concave there and nothing in the
solver evaluates second derivatives near it.

The superellipse kind blends the quartic gauge with a small elliptic term so
the axis points keep strictly positive curvature (a pure exponent-q > 2
superellipse has flat points and would fail the concavity probe).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridConstructionError


@dataclass
class ConvexBody:
    """A strictly convex planar (or ball: any-dimensional) domain.

    h/grad_h/hess_h is the defining-function oracle; boundary_param maps an
    angle to a boundary point; gauge_radius is the Minkowski gauge distance
    from the interior point along a direction angle.
    """

    kind: str
    dim: int
    interior_point: np.ndarray
    h: Callable[[np.ndarray], float]
    grad_h: Callable[[np.ndarray], np.ndarray]
    hess_h: Callable[[np.ndarray], np.ndarray]
    boundary_param: Callable[[float], np.ndarray]
    boundary_tangent: Callable[[float], np.ndarray]
    gauge_radius: Callable[[float], float]
    bounding_radius: float
    params: dict = field(default_factory=dict)

    def sample_boundary(self, m: int) -> np.ndarray:
        thetas = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        return np.stack([self.boundary_param(t) for t in thetas])

    def contains(self, p: np.ndarray) -> bool:
        return self.h(np.asarray(p, dtype=float)) > 0.0

    def concavity_probe(self, n_samples: int = 200, rng=None) -> float:
        """theta_c > 0 such that D^2 h <= -theta_c I on the random probe sample."""
        rng = np.random.default_rng(rng)
        worst = np.inf
        for _ in range(n_samples):
            theta = rng.uniform(0.0, 2.0 * np.pi)
            r = np.sqrt(rng.uniform(0.05, 0.95))
            p = self.interior_point + r * self.gauge_radius(theta) * np.array(
                [np.cos(theta), np.sin(theta)]
            )
            lam_max = float(np.linalg.eigvalsh(self.hess_h(p))[-1])
            worst = min(worst, -lam_max)
        return worst

    def boundary_curvature(self, theta: float) -> float:
        """Curvature of the boundary at parameter theta (finite differences)."""
        dt = 1e-5
        xm = self.boundary_param(theta - dt)
        x0 = self.boundary_param(theta)
        xp = self.boundary_param(theta + dt)
        d1 = (xp - xm) / (2.0 * dt)
        d2 = (xp - 2.0 * x0 + xm) / dt**2
        cross = d1[0] * d2[1] - d1[1] * d2[0]
        return float(cross / np.linalg.norm(d1) ** 3)


def ball(radius: float, center=None, dim: int = 2) -> ConvexBody:
    """Ball of given radius; h = (rho^2 - |p-c|^2) / (2 rho) is globally smooth."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    rho = float(radius)
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float).ravel()
    if c.size != dim:
        raise ValueError("center/dim mismatch")

    def h(p):
        p = np.asarray(p, dtype=float)
        return (rho * rho - ((p - c) ** 2).sum()) / (2.0 * rho)

    def grad_h(p):
        p = np.asarray(p, dtype=float)
        return -(p - c) / rho

    def hess_h(p):
        return -np.eye(dim) / rho

    def boundary_param(theta):
        if dim != 2:
            raise NotImplementedError("angle parameterization is planar only")
        return c + rho * np.array([np.cos(theta), np.sin(theta)])

    def boundary_tangent(theta):
        return np.array([-np.sin(theta), np.cos(theta)])

    body = ConvexBody(
        kind="ball",
        dim=dim,
        interior_point=c,
        h=h,
        grad_h=grad_h,
        hess_h=hess_h,
        boundary_param=boundary_param,
        boundary_tangent=boundary_tangent,
        gauge_radius=lambda theta: rho,
        bounding_radius=float(np.linalg.norm(c) + rho),
        params={"radius": rho, "center": c.tolist()},
    )
    if dim != 2:
        # boundary sampling for n != 2 uses deterministic sphere directions
        def sample_boundary(m, _c=c, _rho=rho, _dim=dim):
            rng = np.random.default_rng(1234)
            dirs = rng.normal(size=(m, _dim))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            return _c + _rho * dirs

        body.sample_boundary = sample_boundary  # type: ignore[method-assign]
    return body


class _DistanceBody:
    """Closest-point machinery shared by the parametric planar bodies."""

    def __init__(self, boundary_param, boundary_d1, boundary_d2, lam: float):
        self.param = boundary_param
        self.d1 = boundary_d1
        self.d2 = boundary_d2
        self.lam = float(lam)

    def closest_theta(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        thetas = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
        pts = np.stack([self.param(t) for t in thetas])
        j = int(np.argmin(((pts - p) ** 2).sum(axis=1)))
        theta = thetas[j]
        for _ in range(60):
            x = self.param(theta)
            t1 = self.d1(theta)
            t2 = self.d2(theta)
            g = (x - p) @ t1
            hh = (t1 @ t1) + (x - p) @ t2
            if hh <= 0.0:
                break
            step = -g / hh
            theta += np.clip(step, -0.5, 0.5)
            if abs(step) < 1e-15:
                break
        return theta

    def signed_pieces(self, p: np.ndarray):
        """(d, Dd, curvature at contact, tangent at contact) for an inside point."""
        p = np.asarray(p, dtype=float)
        theta = self.closest_theta(p)
        x = self.param(theta)
        t1 = self.d1(theta)
        t2 = self.d2(theta)
        tau = t1 / np.linalg.norm(t1)
        nrm_in = np.array([-tau[1], tau[0]])  # ccw parameterization: interior left
        diff = p - x
        d = float(diff @ nrm_in)  # signed: positive inside
        cross = t1[0] * t2[1] - t1[1] * t2[0]
        kappa = float(cross / np.linalg.norm(t1) ** 3)
        return d, nrm_in, kappa, tau

    def h(self, p) -> float:
        d, _, _, _ = self.signed_pieces(p)
        return d - 0.5 * self.lam * d * d

    def grad_h(self, p) -> np.ndarray:
        d, nrm, _, _ = self.signed_pieces(p)
        return (1.0 - self.lam * d) * nrm

    def hess_h(self, p) -> np.ndarray:
        d, nrm, kappa, tau = self.signed_pieces(p)
        denom = 1.0 - kappa * d
        dd2 = -(kappa / denom) * np.outer(tau, tau)
        return (1.0 - self.lam * d) * dd2 - self.lam * np.outer(nrm, nrm)


def _parametric_body(kind, param, d1, d2, center, gauge_radius, bounding, params):
    # inradius estimate from gauge samples fixes the concavity weight lambda
    thetas = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    rmin = min(gauge_radius(t) for t in thetas)
    lam = 1.0 / (1.6 * rmin)
    core = _DistanceBody(param, d1, d2, lam)
    return ConvexBody(
        kind=kind,
        dim=2,
        interior_point=np.asarray(center, dtype=float),
        h=core.h,
        grad_h=core.grad_h,
        hess_h=core.hess_h,
        boundary_param=param,
        boundary_tangent=lambda t: d1(t) / np.linalg.norm(d1(t)),
        gauge_radius=gauge_radius,
        bounding_radius=bounding,
        params=params,
    )


def ellipse(semi_axes, center=None, angle: float = 0.0) -> ConvexBody:
    """Ellipse with given semi-axes, optionally rotated about its center."""
    a, b = (float(s) for s in semi_axes)
    if a <= 0.0 or b <= 0.0:
        raise ValueError("semi-axes must be positive")
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float).ravel()
    q = np.array(
        [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
    )

    def param(theta):
        return c + q @ np.array([a * np.cos(theta), b * np.sin(theta)])

    def d1(theta):
        return q @ np.array([-a * np.sin(theta), b * np.cos(theta)])

    def d2(theta):
        return q @ np.array([-a * np.cos(theta), -b * np.sin(theta)])

    def gauge_radius(theta):
        d = q.T @ np.array([np.cos(theta), np.sin(theta)])
        return 1.0 / np.sqrt((d[0] / a) ** 2 + (d[1] / b) ** 2)

    return _parametric_body(
        "ellipse",
        param,
        d1,
        d2,
        c,
        gauge_radius,
        float(np.linalg.norm(c) + max(a, b)),
        {"semi_axes": [a, b], "center": c.tolist(), "angle": float(angle)},
    )


def superellipse(
    semi_axes, exponent: float, center=None, blend: float = 0.1
) -> ConvexBody:
    """Blended superellipse: gauge^2 = (1-mu) [(x/a)^q + (y/b)^q]^(2/q) + mu [(x/a)^2 + (y/b)^2].

    For exponent q >= 2; the elliptic blend keeps the curvature strictly
    positive at the axis points, where the pure superellipse is flat.
    """
    a, b = (float(s) for s in semi_axes)
    qexp = float(exponent)
    mu = float(blend)
    if a <= 0.0 or b <= 0.0:
        raise ValueError("semi-axes must be positive")
    if qexp < 2.0:
        raise ValueError("superellipse exponent must be >= 2")
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float).ravel()

    def gauge_sq(u: np.ndarray) -> float:
        # u in body coordinates (centered); 2-homogeneous in u
        s = (abs(u[0]) / a) ** qexp + (abs(u[1]) / b) ** qexp
        e = (u[0] / a) ** 2 + (u[1] / b) ** 2
        return (1.0 - mu) * s ** (2.0 / qexp) + mu * e

    def gauge_radius(theta):
        d = np.array([np.cos(theta), np.sin(theta)])
        return 1.0 / np.sqrt(gauge_sq(d))

    def param(theta):
        d = np.array([np.cos(theta), np.sin(theta)])
        return c + gauge_radius(theta) * d

    def d1(theta, dt=1e-6):
        return (param(theta + dt) - param(theta - dt)) / (2.0 * dt)

    def d2(theta, dt=1e-5):
        return (param(theta + dt) - 2.0 * param(theta) + param(theta - dt)) / dt**2

    return _parametric_body(
        "superellipse",
        param,
        d1,
        d2,
        c,
        gauge_radius,
        float(np.linalg.norm(c) + max(a, b)),
        {
            "semi_axes": [a, b],
            "exponent": qexp,
            "center": c.tolist(),
            "blend": mu,
        },
    )


def gauge_map(body: ConvexBody, r: float, theta: float) -> np.ndarray:
    """Point at gauge fraction r in direction theta from the interior point."""
    if r < 0.0:
        raise GridConstructionError("negative gauge fraction")
    return body.interior_point + r * body.gauge_radius(theta) * np.array(
        [np.cos(theta), np.sin(theta)]
    )
