"""One-parameter rotation groups of the ambient space and their chart fields.

A rotation of R^{n+1} acts on the unit sphere; conjugating with the hemisphere
projection P gives a one-parameter transformation group sigma_t of the chart,
whose generator T is a polynomial vector field of degree 2.  Fields are
anchored at a boundary point y0 with a prescribed unit tangent xi and satisfy

    T(y0) = sqrt(1 + |y0|^2) * xi        (exactly),

which fixes the rotation plane span(x0, e1) and the angular speed

    s = sqrt(1 - <y0, xi>^2 / (1 + |y0|^2)) <= 1.

The speed factor is 1 whenever y0 is orthogonal to xi (e.g. any boundary
point of a centered ball) and is what keeps the tangency identity exact for
anchors where the chart tangent is not sphere-orthogonal to the radial
direction.

Norm convention for the envelope bound: the identity

    T^T (I - y y^T/(1+|y|^2)) T = s^2 (1 + |y|^2) (a0^2 + a1^2) <= 1 + |y|^2

holds for every y (a_i are the components of P^{-1}(y) in the orthonormal
frame).  The plain Euclidean square of T satisfies no such identity; the
chart quadratic form above is the sphere metric scaled by 1 + |y|^2, and the
finite-difference flow oracle in the tests pins T itself, so nothing here
depends on the choice of norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .duality import chart_metric_inv, project, unproject
from .errors import HemisphereExitError, PreconditionError
from .geometry import Jet2


@dataclass
class RotationField:
    """Rotation-generated chart vector field anchored at a boundary point."""

    y0: np.ndarray
    xi: np.ndarray
    x0: np.ndarray
    frame: np.ndarray  # rows: e_1 .. e_n, orthonormal completion of x0
    speed: float  # angular speed of the rotation family, in [0, 1]
    t_max: float

    @property
    def dim(self) -> int:
        return self.y0.size

    @property
    def e1(self) -> np.ndarray:
        return self.frame[0]

    def components(self, y: np.ndarray) -> np.ndarray:
        """(a_0, a_1, ..., a_n): components of P^{-1}(y) in the frame (x0, e_i)."""
        x = unproject(y)
        return np.concatenate([[x @ self.x0], self.frame @ x])


def _complete_frame(x0: np.ndarray, e1: np.ndarray) -> np.ndarray:
    """Deterministic Gram-Schmidt completion of {x0, e1} over coordinate axes."""
    n1 = x0.size
    basis = [x0, e1]
    for j in range(n1):
        cand = np.zeros(n1)
        cand[j] = 1.0
        for b in basis:
            cand = cand - (cand @ b) * b
        nrm = np.linalg.norm(cand)
        if nrm > 1e-8:
            basis.append(cand / nrm)
        if len(basis) == n1:
            break
    frame = np.stack(basis[1:])
    return frame


def make_field(y0, xi, body, t_cap: float = 0.5) -> RotationField:
    """Construct the rotation field anchored at y0 with tangent xi on the body.

    Preconditions: y0 on the boundary (|h| <= 1e-10), xi unit and tangent
    there (both within 1e-10).  A zero xi is accepted as the degenerate probe
    and yields the zero field (identity flow).
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    n = y0.size
    x0 = unproject(y0)
    w0 = np.sqrt(1.0 + y0 @ y0)

    xi_norm = float(np.linalg.norm(xi))
    if xi_norm == 0.0:
        # degenerate probe: zero field, identity flow
        frame = _complete_frame(x0, _any_orthonormal(x0))
        return RotationField(y0=y0, xi=xi, x0=x0, frame=frame, speed=0.0,
                             t_max=t_cap)

    level = abs(float(body.h(y0)))
    if level > 1e-10:
        raise PreconditionError("anchor off the boundary", level, 1e-10)
    if abs(xi_norm - 1.0) > 1e-10:
        raise PreconditionError("tangent not unit", abs(xi_norm - 1.0), 1e-10)
    dh = np.asarray(body.grad_h(y0), dtype=float)
    tang_defect = abs(float(dh @ xi)) / max(np.linalg.norm(dh), 1e-300)
    if tang_defect > 1e-10:
        raise PreconditionError("xi not tangent to the boundary", tang_defect, 1e-10)

    # dP^{-1}(xi) at y0; orthogonal to x0 by construction.
    d = -np.concatenate([xi, [0.0]]) / w0 - ((y0 @ xi) / w0**2) * x0
    dn = float(np.linalg.norm(d))
    speed = w0 * dn  # = sqrt(1 - <y0,xi>^2/(1+|y0|^2)) <= 1
    e1 = d / dn
    frame = _complete_frame(x0, e1)
    field = RotationField(y0=y0, xi=xi, x0=x0, frame=frame, speed=speed,
                          t_max=t_cap)
    field.t_max = _fit_t_max(field, body, t_cap)
    return field


def _any_orthonormal(x0: np.ndarray) -> np.ndarray:
    j = int(np.argmin(np.abs(x0)))
    cand = np.zeros(x0.size)
    cand[j] = 1.0
    cand -= (cand @ x0) * x0
    return cand / np.linalg.norm(cand)


def _fit_t_max(field: RotationField, body, t_cap: float) -> float:
    """Largest t <= t_cap keeping the rotated hemisphere height >= 0.1 on probes."""
    probes = np.atleast_2d(body.sample_boundary(64))
    probes = np.vstack([probes, np.asarray(body.interior_point, dtype=float)])

    def min_height(t):
        heights = []
        for y in probes:
            x = unproject(y)
            xt = _rotate(field, t, x)
            heights.append(xt[-1])
        return min(heights)

    if min_height(t_cap) >= 0.1:
        return t_cap
    lo, hi = 0.0, t_cap
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if min_height(mid) >= 0.1:
            lo = mid
        else:
            hi = mid
    return lo


def _rotate(field: RotationField, t: float, x: np.ndarray) -> np.ndarray:
    """Apply the rotation family to an ambient point."""
    phi = field.speed * t
    a0 = x @ field.x0
    a1 = x @ field.e1
    rest = x - a0 * field.x0 - a1 * field.e1
    c, s = np.cos(phi), np.sin(phi)
    return (a0 * c - a1 * s) * field.x0 + (a0 * s + a1 * c) * field.e1 + rest


def flow(field: RotationField, t: float, y: np.ndarray) -> np.ndarray:
    """sigma_t(y) = P(A_t(P^{-1}(y))); errors out when the image leaves the hemisphere."""
    xt = _rotate(field, t, unproject(y))
    if xt[-1] < 1e-10:
        raise HemisphereExitError(t, xt[-1])
    return -xt[:-1] / xt[-1]


def _coeffs(field: RotationField):
    n = field.dim
    u0, d0 = field.x0[:n], field.x0[n]
    u1, d1 = field.e1[:n], field.e1[n]
    s = field.speed
    c = s * (d1 * u0 - d0 * u1)
    b = s * (np.outer(u1, u0) - np.outer(u0, u1))
    return c, b


def field_eval(field: RotationField, y: np.ndarray) -> np.ndarray:
    """T(y), the generator of the flow, from its degree-2 closed form."""
    y = np.asarray(y, dtype=float).ravel()
    c, b = _coeffs(field)
    return c + b @ y + (c @ y) * y


def field_polynomial(field: RotationField):
    """Polynomial coefficients of T: T_m(y) = c_m + sum_j B_mj y_j + y_m (c.y).

    Returns (c, B, Q) with Q[m, j, k] the symmetric quadratic tensor; the
    quadratic part is rank-structured, Q[m,j,k] = (delta_mj c_k +
    delta_mk c_j)/2.
    """
    n = field.dim
    c, b = _coeffs(field)
    q = np.zeros((n, n, n))
    for m in range(n):
        for j in range(n):
            for k in range(n):
                q[m, j, k] = 0.5 * ((m == j) * c[k] + (m == k) * c[j])
    return c, b, q


def field_jacobian(field: RotationField, y: np.ndarray) -> np.ndarray:
    """DT(y): (DT)_mj = dT_m/dy_j, affine in y."""
    y = np.asarray(y, dtype=float).ravel()
    c, b = _coeffs(field)
    cy = c @ y
    return b + cy * np.eye(field.dim) + np.outer(y, c)


def envelope_terms(field: RotationField, y: np.ndarray) -> dict:
    """Chart-metric envelope identity pieces at y.

    lhs = T^T (I - y y^T / (1+|y|^2)) T, identity = s^2 (1+|y|^2)(a0^2+a1^2),
    bound = 1+|y|^2.  lhs == identity holds exactly; lhs <= bound always.
    """
    y = np.asarray(y, dtype=float).ravel()
    t = field_eval(field, y)
    g = chart_metric_inv(y)
    comps = field.components(y)
    a0, a1 = comps[0], comps[1]
    w2 = 1.0 + y @ y
    return {
        "lhs": float(t @ g @ t),
        "identity": field.speed**2 * w2 * (a0 * a0 + a1 * a1),
        "bound": float(w2),
        "a0": float(a0),
        "a1": float(a1),
    }


def derivative_along(field: RotationField, jets, y: np.ndarray):
    """(T u, T^2 u, D_TT u) of a sampled function along the field at y.

    T^2 u expands through the polynomial coefficients of T; the connection
    correction uses DT applied to T componentwise, so that
    D_TT u = T^2 u - (D_T T) u.
    """
    y = np.asarray(y, dtype=float).ravel()
    jet = jets(y)
    t = field_eval(field, y)
    dt = field_jacobian(field, y)
    tu = float(t @ jet.gradient)
    dtt = dt @ t  # (D_T T)_j = sum_m T_m dT_j/dy_m
    d_tt_u = float(t @ jet.hessian @ t)
    ttu = float(dtt @ jet.gradient) + d_tt_u
    return tu, ttu, d_tt_u


def differentiated_equation_check(
    field: RotationField,
    jets,
    psi,
    k: int,
    point: np.ndarray,
    h: float = 1.0 / 128.0,
    body=None,
) -> float:
    """Defect of the rotation-differentiated dual equation at an interior point.

    The solved dual state enters through `jets` (y -> Jet2 of u*).  The check
    contracts F*^{ij} w* b* (D^2 phi) b* against the finite-difference Hessian
    of phi = w* T(u*/w*) and compares with T psi* + psi*_z T u*; on an exact
    solution the defect is O(h^2) plus the solve tolerance.
    """
    from . import duality, symfun

    point = np.asarray(point, dtype=float).ravel()
    n = point.size

    def phi(yq: np.ndarray) -> float:
        jet = jets(yq)
        w = float(np.sqrt(1.0 + yq @ yq))
        tvec = field_eval(field, yq)
        dv = jet.gradient / w - jet.value * yq / w**3
        return w * float(tvec @ dv)

    # interior check: all FD probes must stay inside the domain
    if body is not None:
        offsets = [np.zeros(n)]
        for i in range(n):
            for sgn in (-1.0, 1.0):
                offsets.append(sgn * h * np.eye(n)[i])
        for i in range(n):
            for j in range(i + 1, n):
                for si in (-1.0, 1.0):
                    for sj in (-1.0, 1.0):
                        offsets.append(h * (si * np.eye(n)[i] + sj * np.eye(n)[j]))
        for off in offsets:
            if body.h(point + off) < 0.0:
                raise PreconditionError(
                    "finite-difference probe leaves the domain",
                    -float(body.h(point + off)),
                    0.0,
                )

    hess_phi = np.empty((n, n))
    phi0 = phi(point)
    for i in range(n):
        ei = np.eye(n)[i]
        hess_phi[i, i] = (phi(point + h * ei) - 2.0 * phi0 + phi(point - h * ei)) / h**2
    for i in range(n):
        for j in range(i + 1, n):
            ei, ej = np.eye(n)[i], np.eye(n)[j]
            val = (
                phi(point + h * (ei + ej))
                - phi(point + h * (ei - ej))
                - phi(point - h * (ei - ej))
                + phi(point - h * (ei + ej))
            ) / (4.0 * h**2)
            hess_phi[i, j] = hess_phi[j, i] = val

    jet = jets(point)
    w = float(np.sqrt(1.0 + point @ point))
    b = duality.bstar(point)
    amat = w * (b @ jet.hessian @ b)
    amat = 0.5 * (amat + amat.T)
    op = symfun.eval_operator(symfun.SpectrumRequest(amat, k, "dual"))
    lhs = float(np.sum(op.gradient * (w * (b @ hess_phi @ b))))

    # accept either a primal PsiSpec (converted here) or a ready dual-side
    # object exposing evaluate/partial_z/partial_y
    if hasattr(psi, "partial_y"):
        star = psi
    else:
        _, star = duality.psi_conversions(psi)
    tvec = field_eval(field, point)
    tpsi = float(tvec @ star.partial_y(point, jet.value))
    tu = float(tvec @ jet.gradient)
    rhs = tpsi + float(star.partial_z(point, jet.value)) * tu
    return abs(lhs - rhs)
