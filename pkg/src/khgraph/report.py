"""Solve reports and grid dumps: canonical JSON and full-precision CSV."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

REPORT_KEYS = (
    "c_estimate",
    "residual_history",
    "chi_min",
    "M",
    "M_tilde",
    "mean_u",
    "grid_dump_path",
    "wall_time",
    "convergence_flag",
)

CSV_COLUMNS = ("y1", "y2", "u_star", "du1", "du2", "lambda_min", "lambda_max")


@dataclass
class SolveReport:
    c_estimate: float
    residual_history: list  # [eps, iterations, residual] per level
    chi_min: float
    M: float
    M_tilde: float
    mean_u: float
    grid_dump_path: str
    wall_time: float
    convergence_flag: bool

    def to_json(self) -> str:
        """Canonical serialization: sorted keys, repr floats, trailing newline.

        parse(to_json()) followed by to_json() is byte-identical.
        """
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SolveReport":
        raw = json.loads(text)
        extra = set(raw) - set(REPORT_KEYS)
        if extra:
            raise ValueError(f"unknown report keys: {sorted(extra)}")
        missing = set(REPORT_KEYS) - set(raw)
        if missing:
            raise ValueError(f"missing report keys: {sorted(missing)}")
        return cls(**raw)


def write_grid_csv(path, nodes, u_star, gradients, radii) -> None:
    """Dump the solved grid with 17 significant digits (bit-faithful floats).

    radii holds the eigenvalues of the dual argument matrix per node (the
    curvature radii on converged states), sorted ascending.
    """
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(nodes.shape[0]):
            row = (
                nodes[i, 0],
                nodes[i, 1],
                u_star[i],
                gradients[i, 0],
                gradients[i, 1],
                radii[i, 0],
                radii[i, -1],
            )
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_grid_csv(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}
