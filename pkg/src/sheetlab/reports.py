"""Residual reports shared by the PDE verification and density modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = ["SystemId", "ResidualReport"]


class SystemId(enum.Enum):
    FOURTH_ORDER = "fourth-order"
    HALF_FRACTIONAL = "half-fractional"
    BETA_FRACTIONAL = "beta-fractional"
    ORDER_2NU = "order-2nu"
    EQUIV_COND_BTBS = "equiv-cond-btbs"
    EQUIV_COND_ISLTBS = "equiv-cond-isltbs"
    DENSITY_PDE = "density-pde"


@dataclass(frozen=True)
class ResidualReport:
    """LHS - RHS of one PDE identity on one grid, with norms.

    ``residual_l2_norm`` is the root-mean-square over reported points.
    ``per_point`` optionally keeps the raw residual array; ``coords``
    optionally carries the matching (t..., x...) coordinates, one row per
    point, for serialization.
    """

    system: SystemId
    j: int | None
    grid_desc: str
    residual_inf_norm: float
    residual_l2_norm: float
    per_point: np.ndarray | None = None
    coords: np.ndarray | None = None
    commute_gap: float | None = None

    def __post_init__(self):
        if self.residual_inf_norm < 0 or self.residual_l2_norm < 0:
            raise ValueError("norms must be nonnegative")

    def summary_row(self) -> str:
        j = "" if self.j is None else str(self.j)
        return f"{self.system.value},{j},{self.residual_inf_norm:.17g},{self.residual_l2_norm:.17g},{self.grid_desc}"

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header_comment:
                fh.write(header_comment.rstrip("\n") + "\n")
            fh.write("system,j,inf_norm,l2_norm,grid_desc\n")
            fh.write(self.summary_row() + "\n")

    def write_per_point_csv(self, path, coord_names, header_comment: str | None = None) -> None:
        if self.per_point is None or self.coords is None:
            raise ValueError("per-point data was not recorded for this report")
        flat = self.per_point.reshape(-1)
        with open(path, "w", encoding="utf-8") as fh:
            if header_comment:
                fh.write(header_comment.rstrip("\n") + "\n")
            fh.write(",".join(coord_names) + ",residual\n")
            for row, val in zip(self.coords, flat):
                cells = [f"{c:.17g}" for c in np.atleast_1d(row)]
                fh.write(",".join(cells) + f",{val:.17g}\n")
