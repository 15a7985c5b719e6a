"""The score-tilted sampling target and a small-instance grid oracle.

After t observations the sampler targets the (unnormalized) density

    target(c) = exp(-lam * S_t(c)) * prior(c)

over the union of fixed-k slices.  Everything is done in log space: the
score grows linearly with t and raw densities would overflow long before
the acceptance ratio needs them.

The grid oracle brute-force normalizes the target on toy instances
(d <= 2, at most 3 slices) by tiling the exact support of every slice --
intervals in d=1, polar sectors in d=2 -- with midpoint cells.  It exists
to validate the sampler, not to be fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from .core import Centers
from .priors import PriorSpec, log_prior, log_prior_batch
from .scoring import ScoreContext, score, score_batch

__all__ = [
    "TargetDensity",
    "log_target",
    "GridTooLargeError",
    "GridOracle",
    "grid_oracle",
]

MAX_GRID_CELLS = 10**7


@dataclass(frozen=True)
class TargetDensity:
    """One step's sampling target: inverse temperature, score context, prior.

    ``lam`` = 0 is allowed and makes the target coincide with the prior
    (used by diagnostics); schedules always emit strictly positive values.

    ``label_weighted`` multiplies each k-slice by k!.  The sampler's
    independence proposals anchor one ordering of the fitted locations per
    dimension, so on data-anchored targets the chain explores a single
    representative of each center vector's k! equivalent orderings;
    weighting slices by k! makes the visited representative carry its
    configuration's full mass.  Leave it off for targets whose slices are
    not label-anchored (priors, toy oracle checks): there the orderings
    are freely reachable and the factor would double-count.
    """

    lam: float
    ctx: ScoreContext
    prior: PriorSpec
    label_weighted: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("inverse temperature must be >= 0")
        if self.ctx.t > 0 and self.ctx.observations.shape[1] != self.prior.dim:
            raise ValueError("score context dimension != prior dimension")

    @classmethod
    def prior_only(cls, prior: PriorSpec) -> "TargetDensity":
        return cls(0.0, ScoreContext.empty(prior.dim), prior)


def log_target(c: Centers, tgt: TargetDensity) -> float:
    """Unnormalized log-density of the target at c; -inf outside the prior support."""
    lp = log_prior(c, tgt.prior)
    if lp == -math.inf:
        return -math.inf
    out = lp if (tgt.lam == 0.0 or tgt.ctx.t == 0) else lp - tgt.lam * score(c, tgt.ctx)
    if tgt.label_weighted:
        out += math.lgamma(c.k + 1)
    return out


class GridTooLargeError(ValueError):
    """Requested grid exceeds the cell budget or the oracle's size limits."""


def _block_cells(dim: int, radius: float, resolution: int):
    """Midpoint cells tiling the ball of radius 2R for one center block.

    Returns (points (B, dim), volumes (B,)).  In d=1 the cells are
    intervals; in d=2 annular sectors whose areas are exact, so the tiling
    introduces no support-boundary error.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lim = 2.0 * radius
    if dim == 1:
        edges = np.linspace(-lim, lim, resolution + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        vols = np.diff(edges)
        return mids.reshape(-1, 1), vols
    if dim == 2:
        r_edges = np.linspace(0.0, lim, resolution + 1)
        a_edges = np.linspace(0.0, 2.0 * math.pi, resolution + 1)
        r_mid = 0.5 * (r_edges[:-1] + r_edges[1:])
        a_mid = 0.5 * (a_edges[:-1] + a_edges[1:])
        # exact sector areas: (r_hi^2 - r_lo^2)/2 * dtheta
        areas = 0.5 * np.diff(r_edges**2)[:, None] * np.diff(a_edges)[None, :]
        rr, aa = np.meshgrid(r_mid, a_mid, indexing="ij")
        pts = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1).reshape(-1, 2)
        return pts, areas.reshape(-1)
    raise GridTooLargeError(f"grid oracle supports d in {{1, 2}}, got d={dim}")


@dataclass(frozen=True)
class GridOracle:
    """Normalized Riemann-sum table of the target over all (k, cell) pairs."""

    resolution: int
    slice_masses: np.ndarray  # (p,) probability of each k-slice
    cell_masses: Dict[int, np.ndarray]  # k -> normalized per-cell masses

    def k_marginal(self) -> np.ndarray:
        return self.slice_masses

    def total_mass(self) -> float:
        return float(sum(float(v.sum()) for v in self.cell_masses.values()))


def grid_oracle(tgt: TargetDensity, resolution: int, max_cells: int = MAX_GRID_CELLS) -> GridOracle:
    """Brute-force normalization of the target on a toy instance.

    resolution
        Number of cells per axis (d=1) or per polar axis (d=2: resolution
        radial x resolution angular cells per block).
    """
    spec = tgt.prior
    if spec.dim > 2:
        raise GridTooLargeError("grid oracle is limited to d <= 2")
    if spec.max_clusters > 3:
        raise GridTooLargeError("grid oracle is limited to at most 3 slices")
    if math.isinf(spec.radius):
        raise GridTooLargeError("grid oracle needs a finite support radius")

    block_pts, block_vols = _block_cells(spec.dim, spec.radius, resolution)
    b = block_pts.shape[0]
    total = sum(b**k for k in range(1, spec.max_clusters + 1))
    if total > max_cells:
        raise GridTooLargeError(f"grid would need {total} cells (budget {max_cells})")

    log_block_vols = np.log(block_vols)
    slice_logs = {}
    for k in range(1, spec.max_clusters + 1):
        idx = np.indices((b,) * k).reshape(k, -1).T  # (b^k, k)
        pts = block_pts[idx]  # (b^k, k, d)
        logdens = log_prior_batch(pts, spec)
        if tgt.lam > 0.0 and tgt.ctx.t > 0:
            logdens = logdens - tgt.lam * score_batch(pts, tgt.ctx)
        if tgt.label_weighted:
            logdens = logdens + math.lgamma(k + 1)
        slice_logs[k] = logdens + log_block_vols[idx].sum(axis=1)

    peak = max(float(v.max()) for v in slice_logs.values())
    unnorm = {k: np.exp(v - peak) for k, v in slice_logs.items()}
    z = sum(float(v.sum()) for v in unnorm.values())
    cell_masses = {k: v / z for k, v in unnorm.items()}
    slice_masses = np.array(
        [float(cell_masses[k].sum()) for k in range(1, spec.max_clusters + 1)]
    )
    return GridOracle(resolution=resolution, slice_masses=slice_masses, cell_masses=cell_masses)
