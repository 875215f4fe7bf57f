"""Local polynomial least-squares jets for scattered and grid samples.

A query point gets a weighted degree-d polynomial fit over its nearby sample
points; value, gradient and Hessian of the fit at the query are the jet.  The
fit is exact on polynomials up to the chosen degree whenever the neighborhood
is poised, which is what the grid stencil validation asserts.  Degree 3 gives
second-order accurate Hessians on smooth data.

Patches on body-fitted polar grids are strongly anisotropic near the center
(thin radial slivers), so the fit runs in a whitened local frame: principal
axes of the patch scatter, each scaled to unit spread.  The derivative
functionals are transformed back to the original coordinates, keeping
exactness.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """All exponent multi-indices with |alpha| <= degree, graded order."""
    exps = [np.zeros(dim, dtype=int)]
    frontier = [np.zeros(dim, dtype=int)]
    for _ in range(degree):
        nxt = []
        seen = set()
        for e in frontier:
            for j in range(dim):
                f = e.copy()
                f[j] += 1
                key = tuple(f)
                if key not in seen:
                    seen.add(key)
                    nxt.append(f)
        exps.extend(nxt)
        frontier = nxt
    return np.array(exps)


def jet_functionals(exps: np.ndarray, dim: int):
    """Indices of the coefficients giving (value, gradient, hessian) at the center."""
    idx_val = int(np.where((exps == 0).all(axis=1))[0][0])
    idx_grad = np.empty(dim, dtype=int)
    for j in range(dim):
        e = np.zeros(dim, dtype=int)
        e[j] = 1
        idx_grad[j] = int(np.where((exps == e).all(axis=1))[0][0])
    idx_hess = np.empty((dim, dim), dtype=int)
    for i in range(dim):
        for j in range(dim):
            e = np.zeros(dim, dtype=int)
            e[i] += 1
            e[j] += 1
            idx_hess[i, j] = int(np.where((exps == e).all(axis=1))[0][0])
    return idx_val, idx_grad, idx_hess


def _design_matrix(xi: np.ndarray, exps: np.ndarray) -> np.ndarray:
    cols = []
    for e in exps:
        col = np.ones(xi.shape[0])
        for j, p in enumerate(e):
            if p:
                col = col * xi[:, j] ** p
        cols.append(col)
    return np.stack(cols, axis=1)


def _solve_longdouble(g: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting in extended precision.

    The stencil back-transform multiplies solve-level rounding by 1/h^2, so
    float64 least squares leaves ~1e-11 exactness defects on fine grids;
    80-bit arithmetic on the tiny normal system removes them.
    """
    g = g.astype(np.longdouble).copy()
    rhs = rhs.astype(np.longdouble).copy()
    n = g.shape[0]
    for c in range(n):
        p = int(np.argmax(np.abs(g[c:, c]))) + c
        if p != c:
            g[[c, p]] = g[[p, c]]
            rhs[[c, p]] = rhs[[p, c]]
        piv = g[c, c]
        for r in range(c + 1, n):
            f = g[r, c] / piv
            if f != 0.0:
                g[r, c:] -= f * g[c, c:]
                rhs[r] -= f * rhs[c]
    out = np.zeros_like(rhs)
    for r in range(n - 1, -1, -1):
        out[r] = (rhs[r] - g[r, r + 1 :] @ out[r + 1 :]) / g[r, r]
    return out


def jet_weight_rows(points: np.ndarray, center: np.ndarray, degree: int):
    """Weight rows (w_val, w_grad, w_hess) mapping sample values to a jet.

    value = w_val @ f, gradient[a] = w_grad[a] @ f, hessian[a,b] =
    w_hess[a,b] @ f, exact whenever f is a polynomial of total degree <=
    degree on a poised patch.
    """
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float).ravel()
    dim = center.size
    delta = (points - center[None, :]).astype(np.longdouble)
    # whitened local frame fixes the conditioning of anisotropic patches;
    # the frame itself need not be exact, only applied consistently, so the
    # eigen-decomposition runs in float64 and everything downstream in
    # extended precision (final weights round once, at the end)
    cov64 = np.asarray(delta.T @ delta / delta.shape[0], dtype=float)
    evals, rot64 = np.linalg.eigh(cov64)
    floor = max(float(evals.max()), 1e-300) * 1e-10
    scales = np.sqrt(np.maximum(evals, floor).astype(np.longdouble))
    rot = rot64.astype(np.longdouble)
    xi = (delta @ rot) / scales[None, :]

    exps = monomial_exponents(dim, degree)
    a = _design_matrix(xi, exps)
    dist2 = (xi * xi).sum(axis=1)
    wts = 1.0 / (1.0 + dist2) ** 2
    aw2 = (a * wts[:, None] ** 2).T
    gram = aw2 @ a
    coef = _solve_longdouble(gram, aw2)

    iv, ig, ih = jet_functionals(exps, dim)
    w_val = coef[iv].astype(float)
    grad_xi = coef[ig]  # (dim, m)
    hess_xi = np.empty((dim, dim, points.shape[0]), dtype=np.longdouble)
    for i in range(dim):
        for j in range(dim):
            c = coef[ih[i, j]]
            hess_xi[i, j] = 2.0 * c if i == j else c
    hess_xi = 0.5 * (hess_xi + hess_xi.transpose(1, 0, 2))

    # back to original coordinates: d/d_delta = R S^{-1} d/d_xi
    rs = rot / scales[None, :]  # columns are R[:,i]/s_i
    w_grad = (rs @ grad_xi).astype(float)
    w_hess = np.einsum("ai,ijm,bj->abm", rs, hess_xi, rs).astype(float)
    return w_val, w_grad, w_hess


class JetInterpolant:
    """Scattered-data jets: value/gradient/Hessian estimates at query points."""

    def __init__(self, points, values, degree: int = 3, n_neighbors: int | None = None):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float).ravel()
        if self.points.shape[0] != self.values.size:
            raise ValueError("points/values length mismatch")
        self.dim = self.points.shape[1]
        self.degree = degree
        n_basis = monomial_exponents(self.dim, degree).shape[0]
        self.n_neighbors = n_neighbors or min(
            self.points.shape[0], max(2 * n_basis, n_basis + 6)
        )
        self.tree = cKDTree(self.points)

    def jet(self, query: np.ndarray):
        """(value, gradient, hessian) of the local fit at one query point."""
        query = np.asarray(query, dtype=float).ravel()
        _, idx = self.tree.query(query, k=self.n_neighbors)
        idx = np.atleast_1d(idx)
        w_val, w_grad, w_hess = jet_weight_rows(self.points[idx], query, self.degree)
        f = self.values[idx]
        value = float(w_val @ f)
        grad = w_grad @ f
        hess = w_hess @ f
        return value, grad, 0.5 * (hess + hess.T)

    def __call__(self, query):
        from .geometry import Jet2

        value, grad, hess = self.jet(query)
        return Jet2(point=np.asarray(query, dtype=float), value=value,
                    gradient=grad, hessian=hess)
