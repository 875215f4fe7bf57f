"""Pointwise graph-hypersurface tensors from a 2-jet of u.

Everything here is pointwise algebra on a Jet2 (value, gradient, Hessian at a
point), so grid and discretization concerns never enter.  Conventions, with
w = sqrt(1 + |Du|^2):

    g_ij   = delta_ij + u_i u_j          (induced metric)
    g^ij   = delta_ij - u_i u_j / w^2
    h_ij   = u_ij / w                    (second fundamental form)
    N      = (-Du, 1) / w                (upward unit normal)
    b^ij   = delta_ij - u_i u_j / (w (1 + w))   (square root of g^ij)
    b_ij   = delta_ij + u_i u_j / (1 + w)       (inverse of b^ij)
    a_ij   = (1/w) b^ik u_kl b^lj        (symmetric curvature matrix)

The principal curvatures are the eigenvalues of a_ij, equivalently of the
shape operator h_ik g^kj.  The support value is <X, N> = (u - x.Du)/w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import symfun
from .errors import BoundaryMismatchError, PreconditionError
from .psi import PsiSpec

_SYM_TOL = 1e-13


@dataclass
class Jet2:
    """Point sample of (u, Du, D^2u); the universal unit all formulas consume."""

    point: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float).ravel()
        self.value = float(self.value)
        self.gradient = np.asarray(self.gradient, dtype=float).ravel()
        self.hessian = np.asarray(self.hessian, dtype=float)
        n = self.point.size
        if self.gradient.size != n or self.hessian.shape != (n, n):
            raise ValueError("jet shapes inconsistent with point dimension")
        scale = max(1.0, float(np.abs(self.hessian).max()))
        if np.abs(self.hessian - self.hessian.T).max() > _SYM_TOL * scale:
            raise ValueError("jet hessian is not symmetric within tolerance")
        self.hessian = 0.5 * (self.hessian + self.hessian.T)

    @property
    def dim(self) -> int:
        return self.point.size


@dataclass
class CurvaturePack:
    """All pointwise hypersurface tensors of a graph at one point."""

    w: float
    g: np.ndarray
    g_inv: np.ndarray
    b: np.ndarray
    b_inv: np.ndarray
    normal: np.ndarray
    second_form: np.ndarray
    curvature_matrix: np.ndarray
    kappa: np.ndarray  # ascending


def graph_factors(gradient: np.ndarray):
    """(w, b, b_inv) from a gradient vector; b is the square root of g^ij."""
    du = np.asarray(gradient, dtype=float).ravel()
    n = du.size
    w = float(np.sqrt(1.0 + du @ du))
    outer = np.outer(du, du)
    b = np.eye(n) - outer / (w * (1.0 + w))
    b_inv = np.eye(n) + outer / (1.0 + w)
    return w, b, b_inv


def curvature_pack(jet: Jet2) -> CurvaturePack:
    """Assemble metric, normal, curvature matrix and principal curvatures."""
    du = jet.gradient
    n = jet.dim
    w, b, b_inv = graph_factors(du)
    outer = np.outer(du, du)
    g = np.eye(n) + outer
    g_inv = np.eye(n) - outer / (w * w)
    second = jet.hessian / w
    a = (b @ jet.hessian @ b) / w
    a = 0.5 * (a + a.T)
    kappa, _ = symfun.jacobi_eigh(a)
    normal = np.concatenate([-du, [1.0]]) / w
    return CurvaturePack(
        w=w,
        g=g,
        g_inv=g_inv,
        b=b,
        b_inv=b_inv,
        normal=normal,
        second_form=second,
        curvature_matrix=a,
        kappa=kappa,
    )


def support_value(jet: Jet2) -> float:
    """<X, N> = (u - x.Du)/w without forming the ambient position vector."""
    w = float(np.sqrt(1.0 + jet.gradient @ jet.gradient))
    return (jet.value - jet.point @ jet.gradient) / w


def primal_residual(jet: Jet2, k: int, psi: PsiSpec) -> float:
    """F(a_ij) - psi(<X,N>, N) at the jet; raises on cone violations."""
    pack = curvature_pack(jet)
    op = symfun.eval_operator(
        symfun.SpectrumRequest(pack.curvature_matrix, k, "primal")
    )
    z = support_value(jet)
    return op.value - float(psi.evaluate(z, pack.normal))


def primal_linearization(jet: Jet2, k: int, psi: PsiSpec):
    """Coefficients (G^ij, G^s, psi^s) of the linearized primal operator.

    G(Du, D^2u) = sigma_k(a_ij).  With S = d sigma_k / da (the Newton
    transformation of a) and M = D^2u:

        G^ij = (1/w) (b S b)_ij
        G^s  = -(u_s/w^2) tr(S a)
               - 2/(w(1+w)) * [ w (b S a Du) + (b a S Du) ]_s

    The second line is the contracted form of
    sum sigma_k^{ij} a_{it} (w u_t b^{sj} + u_j b^{ts}): the index pairing
    that reproduces the finite-difference oracle is exactly the two matrix
    products (b S a Du) and (b a S Du).  The zeroth term carries 1/w^2 (from
    differentiating the 1/w prefactor of a), not 1/w; both facts are pinned
    by the oracle in tests/test_geometry.py.

    psi^s is the chain rule of psi(z, p) through z = (u - x.Du)/w and
    p = (-Du, 1)/w with the point held fixed.
    """
    psi.require_partials()
    du = jet.gradient
    m = jet.hessian
    x = jet.point
    n = jet.dim
    w, b, _ = graph_factors(du)
    a = (b @ m @ b) / w
    a = 0.5 * (a + a.T)
    kappa, _ = symfun.jacobi_eigh(a)
    if kappa[0] <= 0.0:
        from .errors import ConeViolationError

        raise ConeViolationError(kappa)
    s_mat = symfun.sigma_k_matrix_gradient(a, k)
    gij = (b @ s_mat @ b) / w

    tr_sa = float(np.sum(s_mat * a))
    term = w * (b @ (s_mat @ (a @ du))) + b @ (a @ (s_mat @ du))
    gs = -(tr_sa / w**2) * du - (2.0 / (w * (1.0 + w))) * term

    z = (jet.value - x @ du) / w
    normal = np.concatenate([-du, [1.0]]) / w
    # dz/du_s = -x_s/w - (u - x.Du) u_s / w^3
    dz = -x / w - (jet.value - x @ du) * du / w**3
    # dp_i/du_s = -delta_is/w + u_i u_s / w^3 (i <= n); dp_{n+1}/du_s = -u_s/w^3
    dp = np.zeros((n + 1, n))
    dp[:n, :] = -np.eye(n) / w + np.outer(du, du) / w**3
    dp[n, :] = -du / w**3
    psis = float(psi.partial_z(z, normal)) * dz + np.asarray(
        psi.partial_p(z, normal), dtype=float
    ) @ dp
    return gij, gs, psis


def obliqueness_chi(jet: Jet2, nu: np.ndarray, target) -> tuple[float, float]:
    """Obliqueness at a boundary point, by definition and by the closed formula.

    chi_def = <Dh(Du), nu> with h the target domain's defining function and nu
    the interior unit normal of the source boundary; chi_formula =
    sqrt(u^{ij} nu_i nu_j * u_kl h_k h_l).  The two agree whenever the
    gradient image traces the target boundary, which is required up to 1e-8.
    """
    nu = np.asarray(nu, dtype=float).ravel()
    du = jet.gradient
    level = abs(float(target.h(du)))
    if level > 1e-8:
        raise BoundaryMismatchError(level, 1e-8)
    dh = np.asarray(target.grad_h(du), dtype=float).ravel()
    chi_def = float(dh @ nu)
    hess = jet.hessian
    try:
        hess_inv = np.linalg.inv(hess)
    except np.linalg.LinAlgError as exc:
        raise PreconditionError("jet hessian not invertible", 0.0, 0.0) from exc
    quad_nu = float(nu @ hess_inv @ nu)
    quad_h = float(dh @ hess @ dh)
    chi_formula = float(np.sqrt(max(0.0, quad_nu * quad_h)))
    return chi_def, chi_formula
