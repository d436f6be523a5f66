"""Metric-space substrate: point samples, distance-to-set, slack nearest points,
ball covers, greedy refinements and partitions of unity.

A space is a finite list of sample points together with a metric.  Two modes
are supported:

* ``finite`` -- the samples *are* the space.  Every subset is open and
  "interior at scale 1/j" means distance to the sampled complement >= 1/j.
* ``sampled`` -- the samples discretize a continuum at resolution ``delta``;
  interiors are only trusted at scale delta.

All objects are immutable after construction and all operations are pure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SampledSpace",
    "MetricBall",
    "CoverSystem",
    "SpaceConfigError",
    "RefinementError",
    "CoverageError",
    "dist_to_set",
    "nearest_with_slack",
    "build_refinement",
    "partition_of_unity",
    "load_space_json",
]


class SpaceConfigError(ValueError):
    """Invalid space definition (empty H, bad matrix, broken triangle...)."""


class RefinementError(ValueError):
    """A point's rule radius does not fit inside any raw ball."""


class CoverageError(ValueError):
    """A declared point is not covered by any ball of a cover."""


@dataclass(frozen=True)
class MetricBall:
    """Open metric ball B(center, radius); ``center`` is a sample index."""

    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SampledSpace:
    """A finite point sample of a metric space with a marked closed subset H.

    Either ``coords`` (Euclidean metric) or ``dmat`` (explicit distance
    matrix) must be given.  ``h_idx`` are the indices of the samples of H.
    """

    coords: Optional[np.ndarray]  # (N, dim) or None
    dmat: Optional[np.ndarray]  # (N, N) or None
    h_idx: np.ndarray  # sorted indices into the sample list
    mode: str = "sampled"  # "finite" | "sampled"
    delta: float = 0.0  # resolution; required > 0 in sampled mode
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.coords is None and self.dmat is None:
            raise SpaceConfigError("need coords or an explicit distance matrix")
        if len(self.h_idx) == 0:
            raise SpaceConfigError("H must be nonempty")
        if self.mode not in ("finite", "sampled"):
            raise SpaceConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and not self.delta > 0:
            raise SpaceConfigError("sampled mode requires delta > 0")

    # -- basic geometry -------------------------------------------------

    @property
    def n_points(self) -> int:
        return len(self.coords) if self.coords is not None else len(self.dmat)

    @property
    def h_mask(self) -> np.ndarray:
        m = np.zeros(self.n_points, dtype=bool)
        m[self.h_idx] = True
        return m

    @property
    def not_h_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.h_mask)

    def dists_from(self, i: int) -> np.ndarray:
        """Distances from sample ``i`` to every sample."""
        if self.dmat is not None:
            return self.dmat[i]
        return np.linalg.norm(self.coords - self.coords[i], axis=1)

    def pair_dist(self, i: int, j: int) -> float:
        if self.dmat is not None:
            return float(self.dmat[i, j])
        return float(np.linalg.norm(self.coords[i] - self.coords[j]))

    def dists_coords(self, q: np.ndarray, idx: Optional[np.ndarray] = None) -> np.ndarray:
        """Distances from free coordinate points ``q`` (k, dim) to samples.

        Only available for Euclidean spaces.
        """
        if self.coords is None:
            raise SpaceConfigError("coordinate queries need a Euclidean space")
        pts = self.coords if idx is None else self.coords[idx]
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return np.linalg.norm(q[:, None, :] - pts[None, :, :], axis=2)

    def dense_matrix(self) -> np.ndarray:
        if self.dmat is not None:
            return self.dmat
        d = self.coords[:, None, :] - self.coords[None, :, :]
        return np.linalg.norm(d, axis=2)

    def resolution(self) -> float:
        """Smallest positive pairwise distance among the samples."""
        m = self.dense_matrix()
        pos = m[m > 0]
        return float(pos.min()) if pos.size else np.inf

    def restrict(self, indices: np.ndarray) -> "SampledSpace":
        """Subspace on ``indices`` with a dense distance matrix; every point of
        the restriction is marked as belonging to H."""
        indices = np.asarray(indices)
        m = self.dense_matrix()[np.ix_(indices, indices)]
        coords = self.coords[indices] if self.coords is not None else None
        return SampledSpace(
            coords=coords,
            dmat=m,
            h_idx=np.arange(len(indices)),
            mode=self.mode,
            delta=self.delta,
        )

    def h_space(self) -> "SampledSpace":
        return self.restrict(self.h_idx)


@dataclass(frozen=True)
class CoverSystem:
    """A finite family of metric balls with optional refinement links and
    partition-of-unity weights.

    ``weights`` (when filled) has shape (n_points, n_balls); row sums are 1 on
    covered points and a ball's weight vanishes outside the ball.
    """

    centers: np.ndarray  # (nb,) sample indices
    radii: np.ndarray  # (nb,)
    covered: np.ndarray  # indices of points the cover must contain
    parents: Optional[np.ndarray] = None  # (nb,) index into parent cover
    parent: Optional["CoverSystem"] = None
    weights: Optional[np.ndarray] = None

    @property
    def n_balls(self) -> int:
        return len(self.centers)

    @property
    def balls(self) -> list[MetricBall]:
        return [MetricBall(int(c), float(r)) for c, r in zip(self.centers, self.radii)]

    def membership(self, space: SampledSpace) -> np.ndarray:
        """Boolean (n_points, n_balls): point lies in the open ball."""
        n = space.n_points
        out = np.zeros((n, self.n_balls), dtype=bool)
        for b, (c, r) in enumerate(zip(self.centers, self.radii)):
            out[:, b] = space.dists_from(int(c)) < r
        return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def dist_to_set(space: SampledSpace, x: int) -> float:
    """dist(x, H) over the sampled H; zero iff x is an H sample (finite mode)."""
    return float(space.dists_from(x)[space.h_idx].min())


def dist_coords_to_set(space: SampledSpace, q: np.ndarray) -> np.ndarray:
    """Vectorized dist(., H) for free coordinate points (Euclidean only)."""
    return space.dists_coords(q, space.h_idx).min(axis=1)


def nearest_with_slack(space: SampledSpace, x: int) -> int:
    """An H sample u(x) with d(x, u(x)) <= 2 dist(x, H).

    Returns the exact nearest H sample (ties broken by lowest index), which
    satisfies the factor-2 slack contract with room to spare.
    """
    d = space.dists_from(x)[space.h_idx]
    return int(space.h_idx[int(np.argmin(d))])


def build_refinement(
    space: SampledSpace,
    raw: CoverSystem,
    radius_rule: np.ndarray | Callable[[int], float],
) -> CoverSystem:
    """Greedy locally finite refinement of ``raw``.

    Points are scanned in index order; an uncovered point p emits the ball
    B(p, rule(p)/2) linked to a raw ball that contains it with slack >= rule(p).
    """
    pts = np.asarray(raw.covered)
    if callable(radius_rule):
        rule = np.array([radius_rule(int(p)) for p in pts], dtype=float)
    else:
        rule = np.asarray(radius_rule, dtype=float)[pts]

    centers, radii, parents = [], [], []
    covered = np.zeros(space.n_points, dtype=bool)
    for k, p in enumerate(pts):
        if covered[p]:
            continue
        r_new = rule[k] / 2.0
        d_raw = np.array([space.pair_dist(int(p), int(c)) for c in raw.centers])
        fits = np.flatnonzero(d_raw + r_new <= raw.radii)
        if fits.size == 0:
            raise RefinementError(
                f"point {int(p)} (rule radius {rule[k]}) fits in no raw ball"
            )
        centers.append(int(p))
        radii.append(r_new)
        parents.append(int(fits[0]))
        covered |= space.dists_from(int(p)) < r_new
    return CoverSystem(
        centers=np.array(centers, dtype=int),
        radii=np.array(radii, dtype=float),
        covered=pts,
        parents=np.array(parents, dtype=int),
        parent=raw,
    )


def partition_of_unity(space: SampledSpace, cover: CoverSystem) -> CoverSystem:
    """Fill normalized weights w_U(y)/W(y) with w_U(y) = dist(y, complement of U).

    Finite mode takes the distance to the sampled complement (capped at the
    radius); sampled mode uses the analytic distance radius - d(center, y).
    """
    n = space.n_points
    nb = cover.n_balls
    w = np.zeros((n, nb), dtype=float)
    for b, (c, r) in enumerate(zip(cover.centers, cover.radii)):
        d = space.dists_from(int(c))
        inside = d < r
        if space.mode == "finite":
            outside = ~inside
            if outside.any():
                m = space.dense_matrix()
                wb = m[:, outside].min(axis=1)
            else:
                wb = np.full(n, r)
            w[inside, b] = np.minimum(wb[inside], r)
        else:
            w[inside, b] = r - d[inside]
    tot = w.sum(axis=1)
    bad = [int(p) for p in cover.covered if tot[p] <= 0]
    if bad:
        raise CoverageError(f"point {bad[0]} is not covered by any ball")
    norm = np.where(tot > 0, tot, 1.0)
    return replace(cover, weights=w / norm[:, None])


# ---------------------------------------------------------------------------
# explicit finite metric spaces from JSON
# ---------------------------------------------------------------------------

def _expand_lower_triangular(tri: Sequence[float], n: int) -> np.ndarray:
    need = n * (n + 1) // 2
    if len(tri) != need:
        raise SpaceConfigError(
            f"lower-triangular matrix for {n} points needs {need} entries, got {len(tri)}"
        )
    m = np.zeros((n, n), dtype=float)
    k = 0
    for i in range(n):
        for j in range(i + 1):
            m[i, j] = m[j, i] = tri[k]
            k += 1
    return m


def validate_metric(m: np.ndarray) -> None:
    """Check symmetry, nonnegativity, zero diagonal and the triangle
    inequality; raise naming the first violating triple."""
    n = len(m)
    if np.any(np.diag(m) != 0):
        raise SpaceConfigError("metric has a nonzero diagonal entry")
    if np.any(m < 0):
        raise SpaceConfigError("metric has a negative entry")
    if np.any(m != m.T):
        raise SpaceConfigError("metric is not symmetric")
    for i in range(n):
        # d(i,k) <= d(i,j) + d(j,k) for all j, k
        slack = m[i][None, :] - (m[i][:, None] + m)
        bad = np.argwhere(slack > 1e-12)
        if bad.size:
            j, k = int(bad[0][0]), int(bad[0][1])
            raise SpaceConfigError(
                f"triangle inequality fails on triple ({i}, {j}, {k}): "
                f"d({i},{k})={m[i, k]} > d({i},{j})+d({j},{k})={m[i, j] + m[j, k]}"
            )


def load_space_json(text: str, mode: str = "finite", delta: float = 0.0) -> SampledSpace:
    """Load a finite metric space from a JSON document.

    Schema: {"points": [labels], "dist": row-major lower-triangular matrix,
    "H": [indices]}.
    """
    doc = json.loads(text)
    labels = tuple(doc["points"])
    m = _expand_lower_triangular(doc["dist"], len(labels))
    validate_metric(m)
    h = np.array(sorted(doc["H"]), dtype=int)
    if h.size and (h[0] < 0 or h[-1] >= len(labels)):
        raise SpaceConfigError("H index out of range")
    return SampledSpace(coords=None, dmat=m, h_idx=h, mode=mode, delta=delta, labels=labels)
