"""Damped-Newton solver for the dual oblique boundary value problem.

Unknown is the Legendre dual u* on a body-fitted grid over the target domain
(the gradient image).  Interior rows impose

    F*( w* b* D^2u* b* ) = exp(eps u*) psi*_0(y),

boundary rows impose h_omega(Du*) = 0 with h_omega the defining function of
the source domain.  The dual side is solved because its argument matrix is
SPD exactly on convex states, the boundary condition is classically oblique
(strict obliqueness), and the exponential zeroth-order term is monotone
increasing in u*, which keeps the Newton linearization uniformly invertible
for eps > 0.  At eps = 0 the solution is unique only up to a constant, so the
continuation stops at a positive eps and extrapolates.

The constant reported by the continuation is the one of the un-powered
equation sigma_k(kappa) = c psi0^k: the recovered primal mean satisfies
k * eps * mean(u_eps) -> log c, which is Richardson-extrapolated linearly in
eps from the last two levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import duality, geometry, rotations
from .bodies import ConvexBody
from .errors import (
    ConeViolationError,
    ContinuationError,
    LineSearchStallError,
    NonConvergenceError,
    OutOfImageError,
    SingularJacobianError,
)
from .grid import Grid
from .psi import PsiSpec, exponential_psi

SPD_FLOOR = 1e-8
NEWTON_TOL = 1e-10
MAX_NEWTON_ITER = 200
ARMIJO = 1e-4
DEFAULT_EPS_SCHEDULE = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass
class SolverState:
    grid: Grid
    u_star: np.ndarray
    eps: float
    residual_norm: float
    history: list = field(default_factory=list)  # (eps, iterations, residual)
    diagnostics: dict = field(default_factory=dict)

    def jets(self):
        """Jet oracle of the discrete dual solution (logical-window fits)."""
        return self.grid.jet_interpolant(self.u_star)


# ---------------------------------------------------------------------------
# batched dual-operator evaluation (hot path; cross-checked against symfun)


def _sigma_batch(lams: np.ndarray) -> np.ndarray:
    """Elementary symmetric functions e_0..e_n along the last axis, batched."""
    m, n = lams.shape
    e = np.zeros((m, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        e[:, 1 : i + 2] = e[:, 1 : i + 2] + lams[:, i : i + 1] * e[:, 0 : i + 1]
    return e


def dual_operator_batch(mats: np.ndarray, k: int):
    """(F*, dF*/dA) of the quotient operator on a batch of SPD matrices.

    Spectral chain rule through numpy's batched symmetric eigensolver; the
    per-matrix reference path lives in symfun.eval_operator and the test
    suite pins the two against each other.
    """
    lam, vec = np.linalg.eigh(mats)
    if np.any(lam[:, 0] <= 0.0):
        bad = np.where(lam[:, 0] <= 0.0)[0]
        raise ConeViolationError(lam[bad[0]], nodes=bad)
    m, n = lam.shape
    e = _sigma_batch(lam)
    sn = e[:, n]
    snk = e[:, n - k]
    value = (sn / snk) ** (1.0 / k)
    # per-eigenvalue partials via drop-one elementary symmetric functions
    phi = np.empty((m, n))
    for p in range(n):
        drop = _sigma_batch(np.delete(lam, p, axis=1))
        dsn = drop[:, n - 1]
        dsnk = drop[:, n - k - 1] if n - k >= 1 else np.zeros(m)
        phi[:, p] = (value / k) * (dsn / sn - dsnk / snk)
    grad = np.einsum("mip,mp,mjp->mij", vec, phi, vec)
    return value, grad


# ---------------------------------------------------------------------------
# problem assembly


class DualProblem:
    """Grid-bound assembly of the dual residual and Jacobian.

    omega is the source body (its defining function drives the boundary
    rows); psi_base is the primal psi0 (constant or normal-only) that the
    continuation wraps exponentially.
    """

    def __init__(self, grid: Grid, omega: ConvexBody, k: int, psi_base: PsiSpec):
        self.grid = grid
        self.omega = omega
        self.k = k
        self.psi_base = psi_base
        y = grid.nodes
        self.wstar = np.sqrt(1.0 + (y * y).sum(axis=1))
        n = y.shape[0]
        self.bstar = np.empty((n, 2, 2))
        outer = np.einsum("mi,mj->mij", y, y)
        self.bstar = np.eye(2)[None, :, :] + outer / (1.0 + self.wstar)[:, None, None]
        self.interior = grid.interior_idx
        self.boundary = grid.boundary_idx

    def dual_psi(self, eps: float) -> duality.DualPsi:
        return duality.DualPsi(exponential_psi(eps, self.psi_base))

    def hessians(self, u: np.ndarray) -> np.ndarray:
        return self.grid.hessians(u)

    def spd_margin(self, u: np.ndarray) -> float:
        """Smallest eigenvalue of the node Hessian estimates."""
        h = self.hessians(u)
        tr = h[:, 0, 0] + h[:, 1, 1]
        disc = np.sqrt((h[:, 0, 0] - h[:, 1, 1]) ** 2 + 4.0 * h[:, 0, 1] ** 2)
        return float((0.5 * (tr - disc)).min())

    def argument_matrices(self, u: np.ndarray) -> np.ndarray:
        h = self.hessians(u)
        bhb = np.einsum("mij,mjk,mkl->mil", self.bstar, h, self.bstar)
        a = self.wstar[:, None, None] * bhb
        return 0.5 * (a + a.transpose(0, 2, 1))

    def boundary_h(self, du: np.ndarray):
        vals = np.array([self.omega.h(p) for p in du])
        grads = np.stack([np.asarray(self.omega.grad_h(p), float) for p in du])
        return vals, grads

    def residual(self, u: np.ndarray, eps: float) -> np.ndarray:
        """Residual vector; raises ConeViolationError off the convex cone."""
        a = self.argument_matrices(u)
        fval, _ = dual_operator_batch(a[self.interior], self.k)
        psi_star = self.dual_psi(eps)
        res = np.empty(self.grid.n_nodes)
        res[self.interior] = fval - psi_star.evaluate(
            self.grid.nodes[self.interior], u[self.interior]
        )
        du = self.grid.gradient(u)
        hvals, _ = self.boundary_h(du[self.boundary])
        res[self.boundary] = hvals
        return res

    def jacobian(self, u: np.ndarray, eps: float) -> sp.csr_matrix:
        a = self.argument_matrices(u)
        _, dop = dual_operator_batch(a[self.interior], self.k)
        # chain rule through A = w* b* H b*: dF*/dH_pq = (w* b* F*' b*)_pq
        coef = np.zeros((self.grid.n_nodes, 2, 2))
        coef[self.interior] = self.wstar[self.interior, None, None] * np.einsum(
            "mij,mjk,mkl->mil", self.bstar[self.interior], dop, self.bstar[self.interior]
        )
        ops = self.grid.ops
        jac = (
            sp.diags(coef[:, 0, 0]) @ ops["dxx"].matrix
            + sp.diags(coef[:, 1, 1]) @ ops["dyy"].matrix
            + sp.diags(2.0 * coef[:, 0, 1]) @ ops["dxy"].matrix
        )
        psi_star = self.dual_psi(eps)
        dz = np.zeros(self.grid.n_nodes)
        dz[self.interior] = psi_star.partial_z(
            self.grid.nodes[self.interior], u[self.interior]
        )
        jac = jac - sp.diags(dz)
        # boundary rows: beta . grad(du*) with beta = Dh_omega(Du*)
        du = self.grid.gradient(u)
        _, beta = self.boundary_h(du[self.boundary])
        b1 = np.zeros(self.grid.n_nodes)
        b2 = np.zeros(self.grid.n_nodes)
        b1[self.boundary] = beta[:, 0]
        b2[self.boundary] = beta[:, 1]
        jac_b = sp.diags(b1) @ ops["dx"].matrix + sp.diags(b2) @ ops["dy"].matrix
        mask_i = sp.diags(np.where(self.grid.is_boundary, 0.0, 1.0))
        mask_b = sp.diags(np.where(self.grid.is_boundary, 1.0, 0.0))
        return (mask_i @ jac + mask_b @ jac_b).tocsr()


def initial_guess(grid: Grid, omega: ConvexBody, n_fit: int = 16) -> np.ndarray:
    """Cap-profile start alpha * w_star + beta . y, least-squares fitted.

    alpha and beta are chosen so the gradient map of the guess carries
    boundary samples of the target domain near the boundary of omega.
    """
    idx = grid.boundary_idx[:: max(1, grid.n_theta // n_fit)]
    yb = grid.nodes[idx]
    wb = np.sqrt(1.0 + (yb * yb).sum(axis=1))
    # match by gauge angle: boundary point of omega on the same ray
    targets = np.stack(
        [omega.boundary_param(t) for t in grid.thetas[:: max(1, grid.n_theta // n_fit)]]
    )[: yb.shape[0]]
    design = np.concatenate(
        [(yb / wb[:, None]).reshape(-1, 1), np.tile(np.eye(2), (yb.shape[0], 1))],
        axis=1,
    )
    sol, *_ = np.linalg.lstsq(design, targets.reshape(-1), rcond=None)
    alpha = float(sol[0])
    beta = sol[1:3]
    if alpha <= 0.1:
        alpha, beta = 1.0, np.zeros(2)
    w = np.sqrt(1.0 + (grid.nodes**2).sum(axis=1))
    return alpha * w + grid.nodes @ beta


def spd_repair(problem: DualProblem, u0: np.ndarray, spd_floor: float) -> np.ndarray:
    """Blend an infeasible start toward the canonical convex profile.

    The cap profile alpha * w_star is uniformly convex, so some convex
    combination restores the SPD floor; bisection finds a small blend.
    """
    anchor = initial_guess(problem.grid, problem.omega)
    if problem.spd_margin(u0) >= spd_floor:
        return u0

    def margin(t):
        return problem.spd_margin((1.0 - t) * u0 + t * anchor)

    if margin(1.0) < spd_floor:
        raise LineSearchStallError(
            "infeasible start could not be repaired", history=[]
        )
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 2.0 * spd_floor:
            hi = mid
        else:
            lo = mid
    return (1.0 - hi) * u0 + hi * anchor


def newton_solve(
    problem: DualProblem,
    u0: np.ndarray,
    eps: float,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_NEWTON_ITER,
    spd_floor: float = SPD_FLOOR,
    repair: bool = True,
):
    """Damped Newton with backtracking on the residual sup norm.

    Trial steps that push any node Hessian below the SPD floor are rejected
    by the line search; cone violations during probing are caught and
    treated the same way.  An infeasible start is repaired by blending
    toward the convex cap profile (or raises a stall error cleanly).
    Returns (u, iterations, residual_history).
    """
    u = np.asarray(u0, dtype=float).copy()
    if problem.spd_margin(u) < spd_floor:
        if not repair:
            raise LineSearchStallError(
                "initial iterate is not uniformly convex", history=[]
            )
        u = spd_repair(problem, u, spd_floor)
    res = problem.residual(u, eps)
    rn = float(np.abs(res).max())
    hist = [rn]
    for it in range(max_iter):
        if rn <= tol:
            return u, it, hist
        jac = problem.jacobian(u, eps)
        try:
            lu = spla.splu(jac.tocsc())
            step = lu.solve(-res)
        except RuntimeError as exc:
            smin = spla.eigsh(
                (jac.T @ jac).tocsc(), k=1, which="SM", return_eigenvectors=False
            )
            raise SingularJacobianError(float(np.sqrt(max(smin[0], 0.0)))) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError(0.0)
        alpha = 1.0
        while True:
            u_try = u + alpha * step
            if problem.spd_margin(u_try) >= spd_floor:
                try:
                    res_try = problem.residual(u_try, eps)
                    rn_try = float(np.abs(res_try).max())
                    if rn_try <= (1.0 - ARMIJO * alpha) * rn:
                        break
                except ConeViolationError:
                    pass
            alpha *= 0.5
            if alpha < 1e-12:
                raise LineSearchStallError(
                    f"line search stalled at residual {rn:.3e}",
                    history=hist,
                    iterate=u,
                )
        u, res, rn = u_try, res_try, rn_try
        hist.append(rn)
    raise NonConvergenceError(
        f"no convergence in {max_iter} iterations (residual {rn:.3e})",
        history=hist,
        iterate=u,
    )


def primal_mean(problem: DualProblem, u: np.ndarray) -> float:
    """Mean of the recovered primal u over the source domain.

    Pulls the integral back through the gradient map: x = Du*(y) maps the
    grid onto omega with area element det D^2u*(y) dy, and u(x) = x.y - u*.
    """
    du = problem.grid.gradient(u)
    h = problem.hessians(u)
    det = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] ** 2
    u_primal = (du * problem.grid.nodes).sum(axis=1) - u
    w = problem.grid.quad_weights * det
    return float((u_primal * w).sum() / w.sum())


def continuation_solve(
    grid: Grid,
    omega: ConvexBody,
    k: int,
    psi_base: PsiSpec,
    eps_schedule=DEFAULT_EPS_SCHEDULE,
    tol: float = NEWTON_TOL,
    spd_floor: float = SPD_FLOOR,
) -> SolverState:
    """Solve along a decreasing eps schedule, warm-starting each level.

    c_estimate extrapolates k * eps * mean(u_eps) linearly in eps to zero
    from the last two levels; mean_u and the normalized u_hat of the final
    level are recorded in the diagnostics.
    """
    schedule = list(eps_schedule)
    if any(e <= 0 for e in schedule) or any(
        schedule[i + 1] >= schedule[i] for i in range(len(schedule) - 1)
    ):
        raise ValueError("eps schedule must be strictly decreasing and positive")
    problem = DualProblem(grid, omega, k, psi_base)
    u = initial_guess(grid, omega)
    history = []
    logc = []
    completed = []
    for eps in schedule:
        try:
            u, iters, hist = newton_solve(
                problem, u, eps, tol=tol, spd_floor=spd_floor
            )
        except (NonConvergenceError, LineSearchStallError, SingularJacobianError) as exc:
            raise ContinuationError(
                f"continuation failed at eps = {eps:g}: {exc}", completed
            ) from exc
        mean_u = primal_mean(problem, u)
        history.append({"eps": eps, "iterations": iters, "residual": hist[-1],
                        "mean_u": mean_u})
        logc.append(k * eps * mean_u)
        completed.append((eps, u.copy()))
    if len(logc) >= 2:
        e1, e2 = schedule[-2], schedule[-1]
        g1, g2 = logc[-2], logc[-1]
        logc0 = g2 - e2 * (g1 - g2) / (e1 - e2)
    else:
        logc0 = logc[-1]
    state = SolverState(
        grid=grid,
        u_star=u,
        eps=schedule[-1],
        residual_norm=history[-1]["residual"],
        history=history,
    )
    state.diagnostics.update(
        c_estimate=float(np.exp(logc0)),
        mean_u=history[-1]["mean_u"],
        u_hat=u - float(u.mean()),
    )
    return state


@dataclass
class PrimalRecovery:
    points: np.ndarray  # samples of the source domain (gradient images)
    values: np.ndarray  # primal u there
    hausdorff: float  # distance between Du(boundary) and the target boundary
    boundary_defect: float  # max |h_target(Du(x))| over boundary samples
    mean_u: float


def recover_primal(
    state: SolverState, problem: DualProblem, n_boundary: int | None = None
) -> PrimalRecovery:
    """Invert the dual gradient map and report gradient-image fidelity.

    The node samples come for free (x = Du*(y), u(x) = x.y - u*); the
    boundary report re-samples the source boundary independently, maps it
    through Du by Newton inversion of Du*, and measures how far the image
    lies from the target boundary.
    """
    grid = state.grid
    u = state.u_star
    du = grid.gradient(u)
    values = (du * grid.nodes).sum(axis=1) - u
    jets = state.jets()
    n_b = n_boundary or grid.n_theta
    thetas = np.linspace(0.0, 2.0 * np.pi, n_b, endpoint=False)
    bnd_x = np.stack([problem.omega.boundary_param(t) for t in thetas])
    # seed the inversion from the boundary node whose image is closest
    images = du[grid.boundary_idx]
    ys = np.empty_like(bnd_x)
    for i, x in enumerate(bnd_x):
        j = int(np.argmin(((images - x) ** 2).sum(axis=1)))
        seed = grid.nodes[grid.boundary_idx[j]]
        yq, _, _ = duality.invert_gradient_map(jets, x, seed, tol=1e-10)
        ys[i] = yq
    target = grid.body
    defect = max(abs(float(target.h(y))) for y in ys)
    bnd_star = np.stack([target.boundary_param(t) for t in thetas])
    hausdorff = _hausdorff(ys, bnd_star)
    return PrimalRecovery(
        points=du,
        values=values,
        hausdorff=hausdorff,
        boundary_defect=defect,
        mean_u=primal_mean(problem, u),
    )


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def diagnostics(state: SolverState, problem: DualProblem) -> dict:
    """chi_min (both routes), M, M_tilde of a converged state."""
    grid = state.grid
    u = state.u_star
    du = grid.gradient(u)
    h = problem.hessians(u)
    a = problem.argument_matrices(u)
    lam = np.linalg.eigvalsh(a)
    m_big = float(lam[:, -1].max())

    bidx = grid.boundary_idx
    chi_def = np.empty(bidx.size)
    chi_formula = np.empty(bidx.size)
    for i, idx in enumerate(bidx):
        x = du[idx]  # point on the source boundary
        nu = np.asarray(problem.omega.grad_h(x), float)
        nu = nu / np.linalg.norm(nu)
        # primal jet at x through the Legendre pairing
        jet = geometry.Jet2(
            point=x,
            value=float(grid.nodes[idx] @ x - u[idx]),
            gradient=grid.nodes[idx],
            hessian=np.linalg.inv(h[idx]),
        )
        chi_def[i], chi_formula[i] = geometry.obliqueness_chi(jet, nu, grid.body)
    tang = grid.boundary_tangents
    w2 = 1.0 + (grid.nodes[bidx] ** 2).sum(axis=1)
    d_nn = np.einsum("mi,mij,mj->m", tang, h[bidx], tang)
    m_tilde = float((w2 * d_nn).max())
    i_min = int(np.argmin(chi_def))
    return {
        "chi_min": float(chi_def.min()),
        "chi_min_angle": float(grid.thetas[i_min % grid.n_theta]),
        "chi_formula_min": float(chi_formula.min()),
        "chi_gap_max": float(np.abs(chi_def - chi_formula).max()),
        "M": m_big,
        "M_tilde": m_tilde,
    }


def differentiated_equation_defect(
    state: SolverState,
    problem: DualProblem,
    fld: "rotations.RotationField",
    eps: float,
    node: int,
) -> float:
    """Grid-stencil version of the rotation-differentiated equation check.

    phi = w* T(u*/w*) is built from the state's own stencil gradient and
    differentiated by the same stencils, so the defect at an interior node is
    O(h^2) plus the solve tolerance.
    """
    grid = state.grid
    u = state.u_star
    y = grid.nodes
    w = np.sqrt(1.0 + (y * y).sum(axis=1))
    du = grid.gradient(u)
    t_vec = np.stack([rotations.field_eval(fld, yq) for yq in y])
    dv = du / w[:, None] - (u / w**3)[:, None] * y
    phi = w * (t_vec * dv).sum(axis=1)
    hphi = grid.hessians(phi)[node]
    a = problem.argument_matrices(u)[node]
    from . import symfun

    op = symfun.eval_operator(symfun.SpectrumRequest(a, problem.k, "dual"))
    b = duality.bstar(y[node])
    lhs = float(np.sum(op.gradient * (w[node] * (b @ hphi @ b))))
    star = problem.dual_psi(eps)
    tn = t_vec[node]
    rhs = float(tn @ star.partial_y(y[node], u[node])) + float(
        star.partial_z(y[node], u[node])
    ) * float(tn @ du[node])
    return abs(lhs - rhs)
