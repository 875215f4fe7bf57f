"""Invariant verification suites, runnable from the CLI.

Each check is a named callable returning (passed, detail).  Suites mirror the
library layering: 'identities' covers the symmetric-function and pointwise
geometry identities, 'duality' the projection/support/Legendre layer,
'rotations' the flow fields (dimension-generic, exercised at n = 2 and 3).
The full pytest suite is the authoritative gate; these are the fast,
machine-readable subset the harness exposes.
"""

from __future__ import annotations

import numpy as np

from . import bodies, duality, geometry, rotations, symfun
from .geometry import Jet2
from .psi import constant_psi


def _random_convex_jet(rng, n=2):
    b = rng.normal(size=(n, n))
    h = b @ b.T + (0.4 + rng.uniform()) * np.eye(n)
    return Jet2(rng.normal(size=n) * 0.4, rng.normal() * 0.5,
                rng.normal(size=n) * 0.6, h)


# --- identities suite -------------------------------------------------------


def check_newton_maclaurin(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(2000):
        n = int(rng.integers(2, 7))
        lam = rng.uniform(0.05, 3.0, n)
        vals = [
            (symfun.sigma_k(lam, k) / symfun.binomial(n, k)) ** (1.0 / k)
            for k in range(1, n + 1)
        ]
        worst = max(worst, max(np.diff(vals)))
    return worst <= 1e-12, f"max increase {worst:.2e}"


def check_operator_concavity(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        mats = []
        for _ in range(2):
            b = rng.normal(size=(n, n))
            mats.append(b @ b.T + 0.3 * np.eye(n))
        t = rng.uniform()
        mid = t * mats[0] + (1 - t) * mats[1]
        for mode in ("primal", "dual"):
            fm = symfun.eval_operator(symfun.SpectrumRequest(mid, k, mode)).value
            f0 = symfun.eval_operator(symfun.SpectrumRequest(mats[0], k, mode)).value
            f1 = symfun.eval_operator(symfun.SpectrumRequest(mats[1], k, mode)).value
            worst = max(worst, t * f0 + (1 - t) * f1 - fm)
    return worst <= 1e-12, f"max convexity defect {worst:.2e}"


def check_duality_product(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        kappa = rng.uniform(0.05, 4.0, n)
        worst = max(worst, abs(symfun.duality_product(kappa, k) - 1.0))
    return worst <= 1e-12, f"max |F F* - 1| = {worst:.2e}"


def check_orthogonal_invariance(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        b = rng.normal(size=(n, n))
        a = b @ b.T + 0.5 * np.eye(n)
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        f1 = symfun.eval_operator(symfun.SpectrumRequest(a, k, "primal")).value
        f2 = symfun.eval_operator(
            symfun.SpectrumRequest(q.T @ a @ q, k, "primal")
        ).value
        worst = max(worst, abs(f1 - f2))
    return worst <= 1e-12, f"max |F(QtAQ) - F(A)| = {worst:.2e}"


def check_curvature_pack_identities(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        jet = _random_convex_jet(rng, n)
        pk = geometry.curvature_pack(jet)
        worst = max(worst, np.abs(pk.b @ pk.b - pk.g_inv).max())
        worst = max(worst, np.abs(pk.b @ pk.b_inv - np.eye(n)).max())
    return worst <= 1e-12, f"max b-identity defect {worst:.2e}"


def check_shape_operator_similarity(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        jet = _random_convex_jet(rng, n)
        pk = geometry.curvature_pack(jet)
        shape = pk.second_form @ pk.g_inv
        kappa2 = np.sort(np.linalg.eigvals(shape).real)
        worst = max(worst, np.abs(pk.kappa - kappa2).max())
    return worst <= 1e-10, f"max spectrum gap {worst:.2e}"


def check_rotation_invariance_residual(seed):
    rng = np.random.default_rng(seed)
    ps = constant_psi(1.3)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        jet = _random_convex_jet(rng, n)
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        jet_rot = Jet2(q.T @ jet.point, jet.value, q.T @ jet.gradient,
                       q.T @ jet.hessian @ q)
        r1 = geometry.primal_residual(jet, k, ps)
        r2 = geometry.primal_residual(jet_rot, k, ps)
        worst = max(worst, abs(r1 - r2))
    return worst <= 1e-12, f"max residual change {worst:.2e}"


def check_linearization_fd(seed):
    rng = np.random.default_rng(seed)
    from .psi import normal_poly_psi

    ps = normal_poly_psi(3.0, linear=[0.15, -0.1, 0.2])
    worst = 0.0
    for _ in range(20):
        jet = _random_convex_jet(rng, 2)
        k = int(rng.integers(1, 3))
        gij, gs, psis = geometry.primal_linearization(jet, k, ps)

        def gval(du, hess):
            w = np.sqrt(1 + du @ du)
            b = np.eye(2) - np.outer(du, du) / (w * (1 + w))
            return symfun.sigma_k(np.linalg.eigvalsh(b @ hess @ b / w), k)

        t = 1e-6
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] += t / 2
                e[j, i] += t / 2
                fd = (
                    gval(jet.gradient, jet.hessian + e)
                    - gval(jet.gradient, jet.hessian - e)
                ) / (2 * t)
                worst = max(worst, abs(fd - gij[i, j]) / max(abs(gij).max(), 1))
        for s in range(2):
            e = np.zeros(2)
            e[s] = t
            fd = (
                gval(jet.gradient + e, jet.hessian)
                - gval(jet.gradient - e, jet.hessian)
            ) / (2 * t)
            worst = max(worst, abs(fd - gs[s]) / max(abs(gs).max(), 1))
    return worst <= 1e-6, f"max FD gap {worst:.2e}"


# --- duality suite ----------------------------------------------------------


def check_bstar_square_root(seed):
    """b* is the positive square root of I + y y^T with b*_inv its inverse."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    min_eig = np.inf
    for _ in range(200):
        n = int(rng.integers(2, 5))
        y = rng.normal(size=n) * 2.0
        b = duality.bstar(y)
        worst = max(worst, np.abs(b @ b - (np.eye(n) + np.outer(y, y))).max())
        worst = max(worst, np.abs(b @ duality.bstar_inv(y) - np.eye(n)).max())
        min_eig = min(min_eig, float(np.linalg.eigvalsh(b)[0]))
    ok = worst <= 1e-12 and min_eig > 0.0
    return ok, f"identity defect {worst:.2e}, min eig {min_eig:.2e}"


def check_projection_roundtrip(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        y = rng.normal(size=n) * 2.0
        worst = max(
            worst, np.abs(duality.project(duality.unproject(y)) - y).max()
        )
    return worst <= 1e-13, f"max roundtrip gap {worst:.2e}"


def check_gauss_chart_consistency(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 5))
        jet = _random_convex_jet(rng, n)
        pk = geometry.curvature_pack(jet)
        worst = max(
            worst,
            np.abs(duality.project(pk.normal) - duality.gauss_image(jet)).max(),
        )
    return worst <= 1e-13, f"max P(N) vs Du gap {worst:.2e}"


def check_reciprocal_spectrum(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        jet = _random_convex_jet(rng, 2)
        pk = geometry.curvature_pack(jet)
        y = jet.gradient
        dual_jet = Jet2(
            point=y,
            value=jet.point @ y - jet.value,
            gradient=jet.point,
            hessian=np.linalg.inv(jet.hessian),
        )
        pack = duality.dual_chart_pack(dual_jet)
        worst = max(
            worst, np.abs(pack.radii - np.sort(1.0 / pk.kappa)).max()
        )
    return worst <= 1e-10, f"max radii vs 1/kappa gap {worst:.2e}"


def check_frame_identity(seed):
    """Matrix spherical Hessian vs finite-difference covariant Hessian."""
    rng = np.random.default_rng(seed)

    def vfun(y):
        return 0.7 * np.sqrt(1 + y @ y) + 0.3 * np.sin(y[0]) * np.cos(0.7 * y[1])

    def ratios(y0):
        out = []
        for h in (2e-3, 1e-3):
            n = y0.size
            # chart jet of V by finite differences
            grad = np.zeros(n)
            hess = np.zeros((n, n))
            v0 = vfun(y0)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                grad[i] = (vfun(y0 + e) - vfun(y0 - e)) / (2 * h)
                hess[i, i] = (vfun(y0 + e) - 2 * v0 + vfun(y0 - e)) / h**2
            for i in range(n):
                for j in range(i + 1, n):
                    ei, ej = np.zeros(n), np.zeros(n)
                    ei[i] = h
                    ej[j] = h
                    hess[i, j] = hess[j, i] = (
                        vfun(y0 + ei + ej)
                        - vfun(y0 + ei - ej)
                        - vfun(y0 - ei + ej)
                        + vfun(y0 - ei - ej)
                    ) / (4 * h**2)
            jet = Jet2(y0, v0, grad, hess)
            lam_matrix = duality.spherical_hessian(jet).lambda_matrix
            # oracle: covariant derivatives in the chart with the derived
            # Christoffel symbols, then frame rotation
            w = np.sqrt(1 + y0 @ y0)
            gam = duality.christoffel(y0)

            def vt(y):
                return vfun(y) / np.sqrt(1 + y @ y)

            gradt = np.zeros(n)
            hesst = np.zeros((n, n))
            vt0 = vt(y0)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                gradt[i] = (vt(y0 + e) - vt(y0 - e)) / (2 * h)
                hesst[i, i] = (vt(y0 + e) - 2 * vt0 + vt(y0 - e)) / h**2
            for i in range(n):
                for j in range(i + 1, n):
                    ei, ej = np.zeros(n), np.zeros(n)
                    ei[i] = h
                    ej[j] = h
                    hesst[i, j] = hesst[j, i] = (
                        vt(y0 + ei + ej)
                        - vt(y0 + ei - ej)
                        - vt(y0 - ei + ej)
                        + vt(y0 - ei - ej)
                    ) / (4 * h**2)
            cov = hesst - np.einsum("kij,k->ij", gam, gradt)
            b = duality.bstar(y0)
            oracle = w**2 * (b @ cov @ b) + vt0 * np.eye(n)
            out.append(np.abs(lam_matrix - oracle).max())
        return out

    y0 = rng.normal(size=2) * 0.5
    e_h, e_h2 = ratios(y0)
    ratio = e_h / max(e_h2, 1e-300)
    return 3.0 <= ratio <= 5.5, f"O(h^2) ratio {ratio:.2f}"


def check_support_reconstruction(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        jet = _random_convex_jet(rng, 2)
        y = jet.gradient
        w = np.sqrt(1 + y @ y)
        ustar = jet.point @ y - jet.value
        dual_jet = Jet2(y, ustar, jet.point, np.linalg.inv(jet.hessian))
        sd = duality.spherical_hessian(dual_jet)
        lhs = sd.grad_v @ sd.grad_v + sd.v**2
        rhs = jet.point @ jet.point + jet.value**2
        worst = max(worst, abs(lhs - rhs))
    return worst <= 1e-10, f"max |X|^2 gap {worst:.2e}"


def check_psi_star_monotone(seed):
    rng = np.random.default_rng(seed)
    from .psi import exponential_psi, normal_poly_psi

    base = normal_poly_psi(2.0, linear=[0.1, 0.1, -0.2])
    worst = np.inf
    for eps in (0.0, 0.1, 0.5):
        ps = exponential_psi(eps, base)
        _, star = duality.psi_conversions(ps)
        for _ in range(100):
            y = rng.normal(size=2)
            z = rng.normal() * 2
            worst = min(worst, float(star.partial_z(y, z)))
    return worst >= -1e-12, f"min psi*_z = {worst:.2e}"


# --- rotations suite --------------------------------------------------------


def _random_field(rng, dim=2):
    body = bodies.ball(0.5 + 0.3 * rng.uniform(), dim=dim)
    if dim == 2:
        theta = rng.uniform(0, 2 * np.pi)
        y0 = body.boundary_param(theta)
        xi = body.boundary_tangent(theta)
    else:
        d = rng.normal(size=dim)
        d /= np.linalg.norm(d)
        y0 = body.interior_point + body.params["radius"] * d
        t = rng.normal(size=dim)
        t -= (t @ d) * d
        xi = t / np.linalg.norm(t)
    return rotations.make_field(y0, xi, body), body


def check_tangency(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        dim = 2 if rng.uniform() < 0.7 else 3
        fld, _ = _random_field(rng, dim)
        w0 = np.sqrt(1 + fld.y0 @ fld.y0)
        worst = max(
            worst,
            np.abs(rotations.field_eval(fld, fld.y0) - w0 * fld.xi).max(),
        )
    return worst <= 1e-12, f"max tangency defect {worst:.2e}"


def check_group_law(seed):
    rng = np.random.default_rng(seed)
    fld, _ = _random_field(rng, 2)
    worst = 0.0
    for _ in range(1000):
        t, s = rng.uniform(0, fld.t_max / 2, 2)
        y = rng.normal(size=2) * 0.5
        a = rotations.flow(fld, t + s, y)
        b = rotations.flow(fld, t, rotations.flow(fld, s, y))
        c = rotations.flow(fld, s, rotations.flow(fld, t, y))
        worst = max(worst, np.abs(a - b).max(), np.abs(a - c).max())
    return worst <= 1e-10, f"max group-law defect {worst:.2e}"


def check_envelope(seed):
    rng = np.random.default_rng(seed)
    worst_id, worst_bound = 0.0, -np.inf
    for _ in range(20):
        dim = 2 if rng.uniform() < 0.7 else 3
        fld, _ = _random_field(rng, dim)
        for _ in range(50):
            y = rng.normal(size=dim) * rng.uniform(0, 2)
            e = rotations.envelope_terms(fld, y)
            worst_id = max(worst_id, abs(e["lhs"] - e["identity"]))
            worst_bound = max(worst_bound, e["lhs"] - e["bound"])
    ok = worst_id <= 1e-12 and worst_bound <= 1e-12
    return ok, f"identity gap {worst_id:.2e}, bound excess {worst_bound:.2e}"


def check_flow_derivative(seed):
    rng = np.random.default_rng(seed)
    fld, _ = _random_field(rng, 2)
    ys = rng.normal(size=(30, 2)) * 0.5
    errs = []
    for dt in (1e-3, 5e-4):
        worst = 0.0
        for y in ys:
            fd = (rotations.flow(fld, dt, y) - rotations.flow(fld, -dt, y)) / (2 * dt)
            worst = max(worst, np.abs(fd - rotations.field_eval(fld, y)).max())
        errs.append(worst)
    ratio = errs[0] / max(errs[1], 1e-300)
    return 3.0 <= ratio <= 5.0, f"O(dt^2) ratio {ratio:.2f}"


def check_degree_two(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        fld, _ = _random_field(rng, 2)
        y = rng.normal(size=2)
        d = rng.normal(size=2)
        h = 0.41
        vals = np.stack([rotations.field_eval(fld, y + m * h * d) for m in range(4)])
        third = vals[3] - 3 * vals[2] + 3 * vals[1] - vals[0]
        worst = max(worst, np.abs(third).max())
    return worst <= 1e-10, f"max third difference {worst:.2e}"


def check_unit_components(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        dim = 2 if rng.uniform() < 0.7 else 3
        fld, _ = _random_field(rng, dim)
        y = rng.normal(size=dim) * rng.uniform(0, 2)
        comps = fld.components(y)
        worst = max(worst, abs(comps @ comps - 1.0))
    return worst <= 1e-13, f"max |a|^2 - 1 = {worst:.2e}"


def check_transport(seed):
    rng = np.random.default_rng(seed)
    fld, _ = _random_field(rng, 2)
    coeff = rng.normal(size=6)

    def hfun(y):
        return (
            coeff[0]
            + coeff[1] * y[0]
            + coeff[2] * y[1]
            + coeff[3] * y[0] * y[1]
            + coeff[4] * y[0] ** 2
            + coeff[5] * y[1] ** 2
        )

    y = rng.normal(size=2) * 0.3
    errs = []
    for dt in (1e-3, 5e-4):
        d1 = (hfun(rotations.flow(fld, dt, y)) - hfun(rotations.flow(fld, -dt, y))) / (
            2 * dt
        )
        t = rotations.field_eval(fld, y)
        grad = np.array(
            [
                coeff[1] + coeff[3] * y[1] + 2 * coeff[4] * y[0],
                coeff[2] + coeff[3] * y[0] + 2 * coeff[5] * y[1],
            ]
        )
        errs.append(abs(d1 - t @ grad))
    ratio = errs[0] / max(errs[1], 1e-300)
    return 3.0 <= ratio <= 5.0, f"O(dt^2) transport ratio {ratio:.2f}"


SUITES = {
    "identities": [
        ("newton_maclaurin_monotone", check_newton_maclaurin),
        ("operator_concavity", check_operator_concavity),
        ("duality_product_unity", check_duality_product),
        ("orthogonal_invariance", check_orthogonal_invariance),
        ("curvature_pack_b_identities", check_curvature_pack_identities),
        ("shape_operator_similarity", check_shape_operator_similarity),
        ("residual_rotation_invariance", check_rotation_invariance_residual),
        ("linearization_finite_difference", check_linearization_fd),
    ],
    "duality": [
        ("bstar_square_root", check_bstar_square_root),
        ("projection_roundtrip", check_projection_roundtrip),
        ("gauss_chart_consistency", check_gauss_chart_consistency),
        ("reciprocal_spectrum", check_reciprocal_spectrum),
        ("frame_identity_order", check_frame_identity),
        ("support_reconstruction", check_support_reconstruction),
        ("psi_star_monotonicity", check_psi_star_monotone),
    ],
    "rotations": [
        ("anchor_tangency", check_tangency),
        ("group_law", check_group_law),
        ("envelope_identity", check_envelope),
        ("flow_derivative_order", check_flow_derivative),
        ("degree_two_structure", check_degree_two),
        ("unit_frame_components", check_unit_components),
        ("transport_order", check_transport),
    ],
}


def run_verify(suite: str = "all", seed: int = 0) -> dict:
    """Run an invariant suite; failures are report content, not exceptions."""
    if suite == "all":
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES)} or 'all'")
    report = {"suite": suite, "seed": seed, "checks": [], "all_passed": True}
    for name in names:
        for check_name, fn in SUITES[name]:
            try:
                passed, detail = fn(seed)
            except Exception as exc:  # noqa: BLE001 - failures are report content
                passed, detail = False, f"exception: {exc!r}"
            report["checks"].append(
                {"suite": name, "name": check_name, "passed": bool(passed),
                 "detail": detail}
            )
            report["all_passed"] = report["all_passed"] and bool(passed)
    return report
