"""Problem configuration: strict JSON schema, body/psi builders, defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import bodies, psi
from .errors import ConfigError, StrictConvexityError

DEFAULT_GRID = (64, 128)
DEFAULT_SCHEDULE = [0.4, 0.2, 0.1, 0.05, 0.025]
DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_SPD_FLOOR = 1e-8

_BODY_KINDS = ("ball", "ellipse", "superellipse")
_PSI_KINDS = ("constant", "normal-only", "exponential")


@dataclass
class ProblemConfig:
    dimension: int
    k: int
    omega: dict
    omega_star: dict
    psi: dict
    grid: tuple = DEFAULT_GRID
    continuation: list = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    tolerances: dict = field(
        default_factory=lambda: {
            "newton_tol": DEFAULT_NEWTON_TOL,
            "spd_floor": DEFAULT_SPD_FLOOR,
        }
    )

    def build_omega(self) -> bodies.ConvexBody:
        return build_body(self.omega, "omega")

    def build_omega_star(self) -> bodies.ConvexBody:
        return build_body(self.omega_star, "omega_star")

    def build_psi(self) -> psi.PsiSpec:
        return build_psi(self.psi, "psi")

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "k": self.k,
            "omega": self.omega,
            "omega_star": self.omega_star,
            "psi": self.psi,
            "grid": list(self.grid),
            "continuation": list(self.continuation),
            "tolerances": dict(self.tolerances),
        }


def _reject_unknown(d: dict, allowed, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}", "unknown key")


def build_body(spec: dict, where: str) -> bodies.ConvexBody:
    if not isinstance(spec, dict):
        raise ConfigError(where, "body spec must be an object")
    kind = spec.get("kind")
    if kind not in _BODY_KINDS:
        raise ConfigError(f"{where}.kind", f"must be one of {_BODY_KINDS}")
    if kind == "ball":
        _reject_unknown(spec, {"kind", "radius", "center"}, where)
        if "radius" not in spec or spec["radius"] <= 0:
            raise ConfigError(f"{where}.radius", "positive radius required")
        body = bodies.ball(spec["radius"], spec.get("center"))
    elif kind == "ellipse":
        _reject_unknown(spec, {"kind", "semi_axes", "center", "angle"}, where)
        axes = spec.get("semi_axes")
        if not axes or len(axes) != 2 or min(axes) <= 0:
            raise ConfigError(f"{where}.semi_axes", "two positive semi-axes required")
        body = bodies.ellipse(axes, spec.get("center"), spec.get("angle", 0.0))
    else:
        _reject_unknown(
            spec, {"kind", "semi_axes", "exponent", "center", "blend"}, where
        )
        axes = spec.get("semi_axes")
        if not axes or len(axes) != 2 or min(axes) <= 0:
            raise ConfigError(f"{where}.semi_axes", "two positive semi-axes required")
        exponent = spec.get("exponent", 4.0)
        if exponent < 2.0:
            raise StrictConvexityError(
                f"{where}.exponent",
                f"exponent {exponent} < 2 fails the uniform-concavity probe",
            )
        body = bodies.superellipse(
            axes, exponent, spec.get("center"), spec.get("blend", 0.1)
        )
    theta_c = body.concavity_probe(n_samples=60, rng=0)
    if theta_c <= 1e-8:
        raise StrictConvexityError(
            where, f"defining function not uniformly concave (theta_c = {theta_c:.2e})"
        )
    return body


def build_psi(spec: dict, where: str) -> psi.PsiSpec:
    if not isinstance(spec, dict):
        raise ConfigError(where, "psi spec must be an object")
    kind = spec.get("kind")
    if kind not in _PSI_KINDS:
        raise ConfigError(f"{where}.kind", f"must be one of {_PSI_KINDS}")
    if kind == "constant":
        _reject_unknown(spec, {"kind", "value"}, where)
        value = spec.get("value")
        if value is None or value <= 0:
            raise ConfigError(f"{where}.value", "positive value required")
        return psi.constant_psi(value)
    if kind == "normal-only":
        _reject_unknown(spec, {"kind", "const", "linear", "quadratic"}, where)
        const = spec.get("const")
        if const is None or const <= 0:
            raise ConfigError(f"{where}.const", "positive constant term required")
        try:
            return psi.normal_poly_psi(
                const, spec.get("linear"), spec.get("quadratic")
            )
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from exc
    _reject_unknown(spec, {"kind", "eps", "base"}, where)
    eps = spec.get("eps")
    if eps is None or eps < 0:
        raise ConfigError(f"{where}.eps", "nonnegative eps required")
    base = spec.get("base")
    if base is None:
        raise ConfigError(f"{where}.base", "exponential family needs a base psi")
    return psi.exponential_psi(eps, build_psi(base, f"{where}.base"))


def parse_config(text: str) -> ProblemConfig:
    """Parse and validate a JSON problem configuration.

    Unknown keys are rejected anywhere in the document; body parameters are
    probed for strict convexity at parse time so invalid shapes fail early.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<document>", "top level must be an object")
    allowed = {
        "dimension",
        "k",
        "omega",
        "omega_star",
        "psi",
        "grid",
        "continuation",
        "tolerances",
    }
    _reject_unknown(raw, allowed, "<top>")
    for key in ("dimension", "k", "omega", "omega_star", "psi"):
        if key not in raw:
            raise ConfigError(key, "required key missing")
    dimension = raw["dimension"]
    if not isinstance(dimension, int) or dimension < 2:
        raise ConfigError("dimension", "integer >= 2 required")
    k = raw["k"]
    if not isinstance(k, int) or not 1 <= k <= dimension:
        raise ConfigError("k", f"integer in 1..{dimension} required")

    grid = raw.get("grid", list(DEFAULT_GRID))
    if (
        not isinstance(grid, (list, tuple))
        or len(grid) != 2
        or any(not isinstance(g, int) or g <= 0 for g in grid)
    ):
        raise ConfigError("grid", "expected [N_r, N_theta] positive integers")

    continuation = raw.get("continuation", list(DEFAULT_SCHEDULE))
    if (
        not isinstance(continuation, list)
        or not continuation
        or any(e <= 0 for e in continuation)
        or any(
            continuation[i + 1] >= continuation[i]
            for i in range(len(continuation) - 1)
        )
    ):
        raise ConfigError("continuation", "strictly decreasing positive eps list")

    tol_raw = raw.get("tolerances", {})
    _reject_unknown(tol_raw, {"newton_tol", "spd_floor"}, "tolerances")
    tolerances = {
        "newton_tol": float(tol_raw.get("newton_tol", DEFAULT_NEWTON_TOL)),
        "spd_floor": float(tol_raw.get("spd_floor", DEFAULT_SPD_FLOOR)),
    }
    if tolerances["newton_tol"] <= 0 or tolerances["spd_floor"] <= 0:
        raise ConfigError("tolerances", "tolerances must be positive")

    cfg = ProblemConfig(
        dimension=dimension,
        k=k,
        omega=raw["omega"],
        omega_star=raw["omega_star"],
        psi=raw["psi"],
        grid=tuple(grid),
        continuation=list(continuation),
        tolerances=tolerances,
    )
    # validate the specs eagerly (builds are cheap at parse scale)
    cfg.build_omega()
    cfg.build_omega_star()
    cfg.build_psi()
    return cfg
