"""Log-densities of the model-selection prior over variable-length center sets.

The prior factorizes as a discrete distribution q over the number of
clusters k in {1..p} times, per k, a product of k independent blocks in
R^d.  Two block families are provided:

* ``uniform``: uniform on the ball of radius 2R (closed-form constant);
* ``student``: heavy-tailed block with 3 degrees of freedom and scale
  ``tau0``, truncated to the same ball.  The truncation probability has no
  closed form and is estimated once by Monte Carlo, cached per
  (dim, radius, scale) together with its standard error so tests can
  budget it.

All densities are exact (normalizing constants included) because ratios
across different k enter the transdimensional acceptance probability.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import Centers, seeded_rng

__all__ = [
    "log_q",
    "q_masses",
    "TruncationEstimate",
    "estimate_truncation_prob",
    "PriorSpec",
    "log_prior_uniform",
    "log_prior_student",
    "log_prior",
    "log_prior_batch",
    "sample_prior",
    "student_block_log_norm",
]

_TRUNC_SAMPLES = 1_000_000
_TRUNC_SEED = 20_170_301


def log_q(k: int, p: int, eta: float) -> float:
    """Log-mass of the cluster-count prior q(k) = exp(-eta*k) / sum_i exp(-eta*i)."""
    if not 1 <= k <= p:
        raise ValueError(f"k={k} outside {{1..{p}}}")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    ks = np.arange(1, p + 1, dtype=float)
    return float(-eta * k - logsumexp(-eta * ks))


def q_masses(p: int, eta: float) -> np.ndarray:
    """All p masses of q at once."""
    ks = np.arange(1, p + 1, dtype=float)
    logs = -eta * ks - logsumexp(-eta * ks)
    return np.exp(logs)


def student_block_log_norm(dim: int, tau: float) -> float:
    """Log normalizing constant of one untruncated heavy-tailed block.

    The block density is  C * (1 + |x - m|^2 / (6 tau^2))^(-(3+d)/2),
    i.e. a d-variate Student distribution with 3 degrees of freedom and
    scale matrix 2 tau^2 I; this returns log C.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return (
        math.lgamma((3 + dim) / 2)
        - math.lgamma(1.5)
        - (dim / 2) * math.log(6 * math.pi)
        - dim * math.log(tau)
    )


def sample_student_blocks(k: int, dim: int, tau: float, loc: np.ndarray | float, rng) -> np.ndarray:
    """Draw k independent blocks of the 3-dof heavy-tailed family, scale tau."""
    g = rng.standard_normal((k, dim))
    w = rng.chisquare(3, size=(k, 1))
    return np.asarray(loc, dtype=float) + math.sqrt(2.0) * tau * g / np.sqrt(w / 3.0)


@dataclass(frozen=True)
class TruncationEstimate:
    """Monte-Carlo estimate of a block's mass inside the ball of radius 2R."""

    prob: float
    stderr: float
    n_samples: int
    seed: int


_trunc_cache: dict = {}
_trunc_lock = threading.Lock()


def estimate_truncation_prob(
    dim: int,
    radius: float,
    scale: float,
    n_samples: int = _TRUNC_SAMPLES,
    seed: int = _TRUNC_SEED,
) -> TruncationEstimate:
    """P(|X|_2 <= 2*radius) for one untruncated block, by seeded Monte Carlo.

    Estimates are cached per (dim, radius, scale, n_samples, seed); the
    recorded standard error lets callers budget the residual bias when
    checking normalizations.
    """
    if math.isinf(radius):
        return TruncationEstimate(1.0, 0.0, 0, seed)
    key = (dim, float(radius), float(scale), n_samples, seed)
    with _trunc_lock:
        hit = _trunc_cache.get(key)
    if hit is not None:
        return hit
    rng = seeded_rng(seed, (dim, n_samples))
    limit = 2.0 * radius
    inside = 0
    chunk = 200_000
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        draws = sample_student_blocks(m, dim, scale, 0.0, rng)
        inside += int(np.count_nonzero(np.einsum("ij,ij->i", draws, draws) <= limit * limit))
        done += m
    prob = inside / n_samples
    stderr = math.sqrt(max(prob * (1.0 - prob), 1e-300) / n_samples)
    est = TruncationEstimate(prob, stderr, n_samples, seed)
    with _trunc_lock:
        _trunc_cache[key] = est
    return est


@dataclass(frozen=True)
class PriorSpec:
    """Fully resolved prior: block family plus the cluster-count law."""

    kind: str  # "uniform" | "student"
    dim: int
    max_clusters: int
    radius: float
    decay: float = 0.0
    scale: float = 1.0  # student only
    trunc: Optional[TruncationEstimate] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "student"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.dim < 1 or self.max_clusters < 1:
            raise ValueError("dim and max_clusters must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be > 0")
        if math.isinf(self.radius) and self.kind != "student":
            raise ValueError("only the student prior supports radius=inf")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.kind == "student" and self.trunc is None:
            object.__setattr__(
                self, "trunc", estimate_truncation_prob(self.dim, self.radius, self.scale)
            )

    @classmethod
    def from_config(cls, cfg) -> "PriorSpec":
        return cls(
            kind=cfg.prior_kind,
            dim=cfg.dim,
            max_clusters=cfg.max_clusters,
            radius=cfg.radius,
            decay=cfg.decay,
            scale=cfg.prior_scale,
        )

    def block_log_norm(self) -> float:
        """Log-density constant shared by every in-support block."""
        if self.kind == "uniform":
            return (
                math.lgamma(self.dim / 2 + 1)
                - (self.dim / 2) * math.log(math.pi)
                - self.dim * math.log(2 * self.radius)
            )
        return student_block_log_norm(self.dim, self.scale) - math.log(self.trunc.prob)


def _support_radius_ok(points: np.ndarray, radius: float) -> bool:
    if math.isinf(radius):
        return True
    norms2 = np.einsum("kd,kd->k", points, points)
    return bool(np.all(norms2 <= (2.0 * radius) ** 2))


def log_prior_uniform(c: Centers, radius: float) -> float:
    """Exact log-density of k independent uniform-ball blocks (radius 2R)."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    if not _support_radius_ok(c.points, radius):
        return -math.inf
    const = (
        math.lgamma(c.dim / 2 + 1)
        - (c.dim / 2) * math.log(math.pi)
        - c.dim * math.log(2 * radius)
    )
    return c.k * const


def log_prior_student(c: Centers, radius: float, scale: float, spec: PriorSpec | None = None) -> float:
    """Exact log-density of k truncated heavy-tailed blocks.

    The truncation constant is read from ``spec`` when given (cached
    estimate), otherwise estimated on demand.
    """
    if spec is not None and (spec.kind != "student" or spec.radius != radius or spec.scale != scale):
        raise ValueError("spec does not match the requested student prior parameters")
    if not _support_radius_ok(c.points, radius):
        return -math.inf
    trunc = spec.trunc if spec is not None else estimate_truncation_prob(c.dim, radius, scale)
    norms2 = np.einsum("kd,kd->k", c.points, c.points)
    shape_term = -0.5 * (3 + c.dim) * np.log1p(norms2 / (6.0 * scale * scale)).sum()
    return c.k * (student_block_log_norm(c.dim, scale) - math.log(trunc.prob)) + float(shape_term)


def log_prior(c: Centers, spec: PriorSpec) -> float:
    """Mixture prior over (k, centers): log q(k) + per-k block density."""
    if c.dim != spec.dim:
        raise ValueError(f"center dimension {c.dim} != prior dimension {spec.dim}")
    if c.k > spec.max_clusters:
        raise ValueError(f"k={c.k} exceeds max_clusters={spec.max_clusters}")
    lq = log_q(c.k, spec.max_clusters, spec.decay)
    if spec.kind == "uniform":
        return lq + log_prior_uniform(c, spec.radius)
    return lq + log_prior_student(c, spec.radius, spec.scale, spec)


def log_prior_batch(points: np.ndarray, spec: PriorSpec) -> np.ndarray:
    """Vectorized ``log_prior`` over a (n, k, d) stack of same-k center vectors."""
    points = np.asarray(points, dtype=float)
    n, k, _ = points.shape
    if k > spec.max_clusters:
        raise ValueError(f"k={k} exceeds max_clusters={spec.max_clusters}")
    out = np.full(n, log_q(k, spec.max_clusters, spec.decay))
    norms2 = np.einsum("nkd,nkd->nk", points, points)
    if not math.isinf(spec.radius):
        outside = (norms2 > (2.0 * spec.radius) ** 2).any(axis=1)
    else:
        outside = np.zeros(n, dtype=bool)
    out += k * spec.block_log_norm()
    if spec.kind == "student":
        out += -0.5 * (3 + spec.dim) * np.log1p(norms2 / (6.0 * spec.scale**2)).sum(axis=1)
    out[outside] = -math.inf
    return out


def sample_prior(spec: PriorSpec, rng) -> Centers:
    """Exact draw from the prior: k from q, then k independent blocks."""
    probs = q_masses(spec.max_clusters, spec.decay)
    k = int(rng.choice(spec.max_clusters, p=probs)) + 1
    if spec.kind == "uniform":
        g = rng.standard_normal((k, spec.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = 2.0 * spec.radius * rng.random((k, 1)) ** (1.0 / spec.dim)
        return Centers(g * r)
    # student blocks: per-block rejection against the truncation ball
    limit2 = (2.0 * spec.radius) ** 2
    rows = np.empty((k, spec.dim))
    filled = 0
    while filled < k:
        cand = sample_student_blocks(k - filled, spec.dim, spec.scale, 0.0, rng)
        keep = np.einsum("ij,ij->i", cand, cand) <= limit2
        m = int(keep.sum())
        if m:
            rows[filled : filled + m] = cand[keep]
            filled += m
    return Centers(rows)
