"""Grid sweep over the example family: correlations and convergence rate."""

from __future__ import annotations

import numpy as np

from .lindblad import Liouvillian, spectral_gap
from .metrics import (
    FAMILY_BASIS,
    concurrence_family,
    discord_family,
    family_probabilities,
    is_ppt_separable,
    family_state,
)

SWEEP_COLUMNS = ["alpha", "beta", "p1", "p2", "p3", "p4",
                 "discord", "concurrence", "ppt_separable", "gap_over_gbar"]


def family_gap(alpha: float, beta: float, gbar: float = 1.0) -> float:
    """Liouvillian gap of the protocol stabilizing the family state, in units of ``gbar``."""
    g = gbar * family_probabilities(alpha, beta)
    return spectral_gap(Liouvillian.from_rates(FAMILY_BASIS, g)) / gbar


def sweep_family(grid: int, gbar: float = 1.0) -> list[dict]:
    """Rows for an equally spaced ``grid x grid`` lattice on ``[0, 1]^2``, sorted by (alpha, beta)."""
    if grid < 2:
        raise ValueError("grid must be at least 2")
    values = np.linspace(0.0, 1.0, grid)
    rows = []
    for alpha in values:
        for beta in values:
            a, b = float(alpha), float(beta)
            p = family_probabilities(a, b)
            rows.append({
                "alpha": a,
                "beta": b,
                "p1": p[0], "p2": p[1], "p3": p[2], "p4": p[3],
                "discord": discord_family(a, b),
                "concurrence": concurrence_family(a, b),
                "ppt_separable": is_ppt_separable(family_state(a, b)),
                "gap_over_gbar": family_gap(a, b, gbar),
            })
    rows.sort(key=lambda r: (r["alpha"], r["beta"]))
    return rows
