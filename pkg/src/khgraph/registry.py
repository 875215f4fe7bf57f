"""Named problem instances, so acceptance runs need no hand-written configs."""

from __future__ import annotations

import json

import numpy as np

from .config import ProblemConfig, parse_config


def _cfg(**kwargs) -> ProblemConfig:
    return parse_config(json.dumps(kwargs))


def cap_instance(rho: float = 0.5, k: int = 1, grid=(64, 128)) -> ProblemConfig:
    """Symmetric spherical-cap instance: Omega = Omega* = B_rho, psi == 1.

    Closed forms: the solution is the cap of radius R = sqrt(1 + rho^2) up to
    a constant, with c = binom(2,k)/R^k for the un-powered sigma_k equation.
    """
    return _cfg(
        dimension=2,
        k=k,
        omega={"kind": "ball", "radius": rho},
        omega_star={"kind": "ball", "radius": rho},
        psi={"kind": "constant", "value": 1.0},
        grid=list(grid),
    )


def ellipse_instance(k: int = 1, grid=(32, 64), angle: float = 0.0) -> ProblemConfig:
    """Ball source, ellipse gradient image."""
    return _cfg(
        dimension=2,
        k=k,
        omega={"kind": "ball", "radius": 0.5},
        omega_star={"kind": "ellipse", "semi_axes": [0.45, 0.3], "angle": angle},
        psi={"kind": "constant", "value": 1.0},
        grid=list(grid),
    )


def superellipse_instance(k: int = 2, grid=(24, 48)) -> ProblemConfig:
    """Superellipse pair (blended quartic gauges) with a normal-only psi."""
    return _cfg(
        dimension=2,
        k=k,
        omega={"kind": "superellipse", "semi_axes": [0.5, 0.4], "exponent": 4.0},
        omega_star={"kind": "superellipse", "semi_axes": [0.42, 0.34], "exponent": 4.0},
        psi={"kind": "normal-only", "const": 1.0, "linear": [0.1, -0.05, 0.08]},
        grid=list(grid),
    )


INSTANCES = {
    "cap-k1": lambda: cap_instance(k=1),
    "cap-k2": lambda: cap_instance(k=2),
    "cap-k1-small": lambda: cap_instance(k=1, grid=(24, 48)),
    "cap-k2-small": lambda: cap_instance(k=2, grid=(24, 48)),
    "ellipse-k1": lambda: ellipse_instance(k=1),
    "ellipse-k2": lambda: ellipse_instance(k=2),
    "superellipse-k2": lambda: superellipse_instance(),
}


def get_instance(name: str) -> ProblemConfig:
    try:
        return INSTANCES[name]()
    except KeyError as exc:
        raise KeyError(
            f"unknown instance {name!r}; available: {sorted(INSTANCES)}"
        ) from exc


def cap_exact_constant(rho: float, k: int, n: int = 2) -> float:
    """c of sigma_k(kappa) = c for the cap over B_rho (R^2 = 1 + rho^2)."""
    from math import comb

    return comb(n, k) / float(np.sqrt(1.0 + rho * rho)) ** k


def cap_dual_exact(nodes: np.ndarray, rho: float) -> np.ndarray:
    """Exact dual solution R * w_star on given chart nodes (zero shift)."""
    r = float(np.sqrt(1.0 + rho * rho))
    return r * np.sqrt(1.0 + (nodes**2).sum(axis=1))
