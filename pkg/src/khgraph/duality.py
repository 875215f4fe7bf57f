"""Hemisphere projection, support data, and the Legendre transform.

Three equivalent pictures of the same convex graph are wired together here:

* the projected chart y of the upper hemisphere, with y = P(N) = Du,
* the support function v = -<X, N> as a function on the sphere, carried in
  the chart as the function u* = w_star * v (w_star = sqrt(1 + |y|^2)),
* the Legendre transform u*(y) = x.y - u(x) with y = Du(x).

Sign convention: psi's first argument is the support value z = <X, N> on the
primal side; the dual right-hand side composes psi with u*/w_star, i.e. with
-<X, N> expressed through the Gauss chart.  That is the composition that
makes the dual zeroth-order term monotone increasing, and it is the one used
throughout (see psi_star_spec).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import symfun
from .errors import OutOfImageError
from .geometry import Jet2
from .meshfree import JetInterpolant
from .psi import PsiSpec


def project(x: np.ndarray) -> np.ndarray:
    """Central projection of an upper-hemisphere point to the chart, y_i = -x_i/x_{n+1}."""
    x = np.asarray(x, dtype=float).ravel()
    if abs(x @ x - 1.0) > 1e-10:
        raise ValueError("projection input must be a unit vector")
    if x[-1] <= 0.0:
        raise ValueError("projection requires a point in the open upper hemisphere")
    return -x[:-1] / x[-1]


def unproject(y: np.ndarray) -> np.ndarray:
    """Inverse projection, x = (-y, 1)/sqrt(1 + |y|^2)."""
    y = np.asarray(y, dtype=float).ravel()
    w = np.sqrt(1.0 + y @ y)
    return np.concatenate([-y, [1.0]]) / w


def wstar(y) -> np.ndarray:
    """sqrt(1 + |y|^2), broadcasting over a leading axis."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + (y * y).sum(axis=-1))


def bstar(y: np.ndarray) -> np.ndarray:
    """b*_ij = delta_ij + y_i y_j/(1 + w_star), square root of I + y y^T."""
    y = np.asarray(y, dtype=float).ravel()
    w = float(np.sqrt(1.0 + y @ y))
    return np.eye(y.size) + np.outer(y, y) / (1.0 + w)


def bstar_inv(y: np.ndarray) -> np.ndarray:
    """Inverse of b*, delta_ij - y_i y_j/(w_star (1 + w_star))."""
    y = np.asarray(y, dtype=float).ravel()
    w = float(np.sqrt(1.0 + y @ y))
    return np.eye(y.size) - np.outer(y, y) / (w * (1.0 + w))


def chart_metric_inv(y: np.ndarray) -> np.ndarray:
    """g^ij = delta_ij - y_i y_j / (1 + |y|^2); w_star^2 times the sphere metric."""
    y = np.asarray(y, dtype=float).ravel()
    return np.eye(y.size) - np.outer(y, y) / (1.0 + y @ y)


def christoffel(y: np.ndarray) -> np.ndarray:
    """Christoffel symbols of the projected sphere metric in the chart.

    Gamma^k_ij = -(y_i delta_kj + y_j delta_ki)/(1 + |y|^2); returned with
    axes [k, i, j].  Used by the finite-difference covariant-Hessian oracle.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    w2 = 1.0 + y @ y
    gamma = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                gamma[k, i, j] = -(y[i] * (k == j) + y[j] * (k == i)) / w2
    return gamma


@dataclass
class DualChartPack:
    """Chart-side quantities of a dual jet: the argument matrix of F* and its spectrum."""

    y: np.ndarray
    w_star: float
    b_star: np.ndarray
    g_y: np.ndarray
    dual_matrix: np.ndarray
    radii: np.ndarray  # ascending; curvature radii when the jet is a Legendre dual


def dual_chart_pack(jet_star: Jet2) -> DualChartPack:
    y = jet_star.point
    w = float(wstar(y))
    b = bstar(y)
    dual = w * (b @ jet_star.hessian @ b)
    dual = 0.5 * (dual + dual.T)
    radii, _ = symfun.jacobi_eigh(dual)
    return DualChartPack(
        y=y,
        w_star=w,
        b_star=b,
        g_y=np.eye(y.size) + np.outer(y, y),
        dual_matrix=dual,
        radii=radii,
    )


def gauss_image(jet: Jet2) -> np.ndarray:
    """The gradient map Du, which equals the projected Gauss map P(N)."""
    return jet.gradient.copy()


@dataclass
class SupportData:
    v: float
    grad_v: np.ndarray  # components in the orthonormal frame e_i = w* b*_ik d_k
    lambda_matrix: np.ndarray


def spherical_hessian(v_chart: Jet2) -> SupportData:
    """Spherical Hessian from a chart jet of the function u* = w_star * v.

    lambda_matrix is w* b* D^2(u*) b*, which by the frame identity equals
    grad^2 v + v delta in the orthonormal frame; its eigenvalues are the
    curvature radii when v is the support function.
    """
    y = v_chart.point
    w = float(wstar(y))
    b = bstar(y)
    lam = w * (b @ v_chart.hessian @ b)
    lam = 0.5 * (lam + lam.T)
    v = v_chart.value / w
    # d_k (V/w*) = V_k / w* - V y_k / w*^3, then rotate into the frame.
    dv_chart = v_chart.gradient / w - v_chart.value * y / w**3
    grad_v = w * (b @ dv_chart)
    return SupportData(v=v, grad_v=grad_v, lambda_matrix=lam)


@dataclass
class DualPsi:
    """The dual right-hand side psi*(y, z) = 1/psi(z/w*, (-y,1)/w*) with partials.

    Broadcasts over a leading axis of y (m, n) and z (m,).  If the primal psi
    is nonincreasing in z then psi* is nondecreasing (the monotonicity that
    makes the dual Newton linearization uniformly invertible).
    """

    base: PsiSpec

    def _pieces(self, y, z):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        z = np.asarray(z, dtype=float).reshape(y.shape[0])
        w = np.sqrt(1.0 + (y * y).sum(axis=1))
        q = np.concatenate([-y, np.ones((y.shape[0], 1))], axis=1) / w[:, None]
        v = z / w
        return y, z, w, q, v

    def evaluate(self, y, z):
        y0 = np.asarray(y, dtype=float)
        scalar = y0.ndim == 1
        y, z, w, q, v = self._pieces(y0, z)
        out = 1.0 / self.base.evaluate(v, q)
        return float(out[0]) if scalar else out

    def partial_z(self, y, z):
        self.base.require_partials()
        y0 = np.asarray(y, dtype=float)
        scalar = y0.ndim == 1
        y, z, w, q, v = self._pieces(y0, z)
        f = self.base.evaluate(v, q)
        out = -self.base.partial_z(v, q) / (w * f * f)
        return float(out[0]) if scalar else out

    def partial_y(self, y, z):
        self.base.require_partials()
        y0 = np.asarray(y, dtype=float)
        scalar = y0.ndim == 1
        y, z, w, q, v = self._pieces(y0, z)
        n = y.shape[1]
        f = self.base.evaluate(v, q)
        fz = self.base.partial_z(v, q)
        fp = self.base.partial_p(v, q)
        # dv/dy_m = -z y_m / w^3 ; dq_i/dy_m = -delta_im/w + y_i y_m/w^3 ;
        # dq_{n+1}/dy_m = -y_m / w^3
        dv = -z[:, None] * y / w[:, None] ** 3
        term = fz[:, None] * dv
        term += -fp[:, :n] / w[:, None] + (
            (fp[:, :n] * y).sum(axis=1)[:, None] * y
        ) / w[:, None] ** 3
        term += -fp[:, n][:, None] * y / w[:, None] ** 3
        out = -term / (f * f)[:, None]
        return out[0] if scalar else out


def psi_conversions(psi: PsiSpec):
    """(psi_tilde, psi_star) from a primal psi.

    psi_tilde(x, v) = 1/psi(v, x) is the sphere-model right-hand side
    (x a unit normal, v the support value); psi_star is the chart-model DualPsi.
    """

    def psi_tilde(x, v):
        return 1.0 / psi.evaluate(v, np.asarray(x, dtype=float))

    return psi_tilde, DualPsi(psi)


def dual_residual(jet_star: Jet2, k: int, psi: PsiSpec) -> float:
    """F*(w* b* D^2u* b*) - psi*(y, u*) at a dual jet."""
    pack = dual_chart_pack(jet_star)
    op = symfun.eval_operator(symfun.SpectrumRequest(pack.dual_matrix, k, "dual"))
    _, star = psi_conversions(psi)
    return op.value - star.evaluate(jet_star.point, jet_star.value)


@dataclass
class SampledFunction:
    """A convex function known at sample points, optionally with exact jets.

    When jets is None the derivative oracle is a local quadratic
    least-squares fit of the sampled values: gradients are then second-order
    accurate, which is the accuracy class of every sampled-transform
    contract here (grid-backed solver states carry their own cubic-fit
    oracle instead).
    """

    points: np.ndarray
    values: np.ndarray
    jets: Optional[Callable[[np.ndarray], Jet2]] = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).ravel()

    def jet_oracle(self) -> Callable[[np.ndarray], Jet2]:
        if self.jets is not None:
            return self.jets
        return JetInterpolant(self.points, self.values, degree=2)


@dataclass
class LegendreResult(SampledFunction):
    """Sampled Legendre transform: values of u* and gradients Du* = x(y)."""

    gradients: np.ndarray = None
    newton_iterations: np.ndarray = None


def invert_gradient_map(
    jets: Callable[[np.ndarray], Jet2],
    target: np.ndarray,
    seed: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 60,
    stall_tol: float = 1e-8,
):
    """Solve Du(x) = target by damped Newton from the seed; returns (x, jet, iters).

    Estimated jet oracles are only piecewise smooth (the fitting patch
    switches between queries), so the iteration may stall at the oracle's
    roughness level; a stall below stall_tol counts as converged, anything
    larger raises OutOfImageError.
    """
    x = np.asarray(seed, dtype=float).copy()
    jet = jets(x)
    res = jet.gradient - target
    rn = float(np.linalg.norm(res))
    for it in range(max_iter):
        if rn <= tol:
            return x, jet, it
        try:
            step = np.linalg.solve(jet.hessian, -res)
        except np.linalg.LinAlgError as exc:
            raise OutOfImageError(target, rn) from exc
        alpha = 1.0
        while alpha > 1e-8:
            x_new = x + alpha * step
            jet_new = jets(x_new)
            res_new = jet_new.gradient - target
            rn_new = float(np.linalg.norm(res_new))
            if rn_new <= (1.0 - 1e-4 * alpha) * rn:
                break
            alpha *= 0.5
        else:
            if rn <= stall_tol:
                return x, jet, it
            raise OutOfImageError(target, rn)
        x, jet, res, rn = x_new, jet_new, res_new, rn_new
    if rn <= max(tol * 10, stall_tol):
        return x, jet, max_iter
    raise OutOfImageError(target, rn)


def legendre(
    f: SampledFunction,
    targets: Optional[np.ndarray] = None,
    tol: float = 1e-12,
    stall_tol: float = 1e-8,
) -> LegendreResult:
    """Legendre transform of a sampled strictly convex function.

    u*(y) = x(y).y - u(x(y)) with x(y) the Newton inverse of the gradient
    map, seeded from the sample whose gradient is nearest to y.  Default
    targets are the gradient images of the sample points themselves, so the
    result is sampled on Du(domain).  The returned object carries exact dual
    jets through the inverse-Hessian relation D^2u*(y) = (D^2u(x(y)))^{-1}.
    """
    jets = f.jet_oracle()
    grads = np.stack([jets(p).gradient for p in f.points])
    if targets is None:
        targets = grads.copy()
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    seed_tree = cKDTree(grads)
    values = np.empty(targets.shape[0])
    xs = np.empty_like(targets)
    iters = np.empty(targets.shape[0], dtype=int)
    for i, y in enumerate(targets):
        _, j = seed_tree.query(y)
        x, jet, it = invert_gradient_map(
            jets, y, f.points[j], tol=tol, stall_tol=stall_tol
        )
        values[i] = x @ y - jet.value
        xs[i] = x
        iters[i] = it

    def dual_jets(yq: np.ndarray) -> Jet2:
        yq = np.asarray(yq, dtype=float).ravel()
        _, j = seed_tree.query(yq)
        x, jet, _ = invert_gradient_map(
            jets, yq, f.points[j], tol=tol, stall_tol=stall_tol
        )
        return Jet2(
            point=yq,
            value=x @ yq - jet.value,
            gradient=x,
            hessian=np.linalg.inv(jet.hessian),
        )

    return LegendreResult(
        points=targets,
        values=values,
        jets=dual_jets,
        gradients=xs,
        newton_iterations=iters,
    )
