"""Built-in scenarios: concrete spaces, function sequences, query sets and
verification plans exercising the approximation pipeline and the extension
operator end to end.

S0  constant            smoke test; every check passes trivially
S1  jump-segment        2D grid, H a segment, jump limit; NT + continuity
S2  moving-bump         finite mode on [0,1]; raw sequence converges only
                        pointwise near 0, the pipeline restores uniformity
S3  boundary-blowup     1D grid, H = {0} u {1/k}; boundedness bookkeeping
                        with an unbounded limit near the accumulation point
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .extension import select_ceiling
from .pipeline import FunctionBundle
from .space import SampledSpace
from .target import norm
from .verify import ApproachPath, oscillation

__all__ = [
    "ScenarioConfig",
    "PlannedCheck",
    "ScenarioData",
    "Scenario",
    "SCENARIOS",
    "get_scenario",
    "list_scenarios",
]


@dataclass(frozen=True)
class ScenarioConfig:
    grid: int = 201
    norm: str = "linf"
    mode: Optional[str] = None  # None = scenario default
    tol: float = 5e-2
    steps: int = 12
    seed: int = 0


@dataclass
class PlannedCheck:
    kind: str  # nt | continuity | boundedness | ucpc
    path: Optional[ApproachPath] = None
    anchor_y: Optional[int] = None
    r: Optional[float] = None
    sup_cert: Optional[float] = None  # p0, or None = hypothesis not certified
    y0: Optional[int] = None


@dataclass
class ScenarioData:
    space: SampledSpace
    bundle: FunctionBundle
    n_seq: int
    query_idx: np.ndarray
    plan: list[PlannedCheck]
    primary_anchor_y: int
    run_extension: bool = True


@dataclass(frozen=True)
class Scenario:
    name: str
    title: str
    summary: str
    properties: tuple[str, ...]
    default_mode: str
    supported_modes: tuple[str, ...]
    build: Callable[[ScenarioConfig], ScenarioData] = field(compare=False)


class _PointSet:
    """Append-only point list with tolerance-based deduplication."""

    def __init__(self, dim: int, tol: float = 1e-9):
        self.pts = np.zeros((0, dim))
        self.tol = tol

    def add(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = []
        for p in pts:
            if len(self.pts):
                d = np.linalg.norm(self.pts - p, axis=1)
                j = int(np.argmin(d))
                if d[j] <= self.tol:
                    out.append(j)
                    continue
            self.pts = np.vstack([self.pts, p[None, :]])
            out.append(len(self.pts) - 1)
        return np.array(out, dtype=int)


def _validate_continuity_declarations(
    hspace: SampledSpace, f_values: np.ndarray, idx: np.ndarray, scale: float, tag: str
) -> None:
    """Declared continuity points must show oscillation shrinking to zero as
    the probe radius drops through grid scale."""
    for y in idx:
        oscs = [oscillation(hspace, f_values, int(y), k * scale, tag) for k in (8, 4, 2, 1)]
        if any(b > a + 1e-12 for a, b in zip(oscs, oscs[1:])) or oscs[-1] > 1e-9:
            raise ValueError(
                f"declared continuity point {int(y)} has oscillation profile {oscs}"
            )


def _sequence_length(space: SampledSpace, query_idx: np.ndarray) -> int:
    """Items needed so the selection scan can start at its analytic ceiling
    for every query and for the midpoint smoothing centers, whose distance to
    H is at least half the query's."""
    worst = 1
    for q in query_idx:
        d = float(space.dists_from(int(q))[space.h_idx].min())
        worst = max(worst, select_ceiling(d / 2.0))
    return worst


def _geometric_radii(t0: float, steps: int) -> np.ndarray:
    return t0 * 0.5 ** np.arange(1, steps + 1)


# ---------------------------------------------------------------------------
# S0: constant limit
# ---------------------------------------------------------------------------

def _build_s0(cfg: ScenarioConfig) -> ScenarioData:
    g = min(max(cfg.grid, 21), 81)
    axis = np.linspace(-1.0, 1.0, g)
    spacing = 2.0 / (g - 1)
    mode = cfg.mode or "finite"
    c = np.array([0.5, -0.25])

    ps = _PointSet(1)
    h_idx_all = ps.add(axis[axis <= 1e-15][:, None])
    anchor_x = int(ps.add(np.array([[0.0]]))[0])
    nH = len(ps.pts)
    radii = _geometric_radii(0.25, cfg.steps)
    path_idx = ps.add(radii[:, None])
    grid_q = ps.add(axis[axis > 1e-15][:, None])
    query_idx = np.unique(np.concatenate([path_idx, grid_q]))
    query_idx = query_idx[query_idx >= nH]
    query_idx = np.concatenate([query_idx, path_idx[path_idx < nH]])  # none expected
    query_idx = np.unique(query_idx)

    space = SampledSpace(
        coords=ps.pts,
        dmat=None,
        h_idx=np.arange(nH),
        mode=mode,
        delta=spacing if mode == "sampled" else 0.0,
    )
    hspace = space.h_space()
    n_seq = _sequence_length(space, query_idx)
    f_values = np.tile(c, (nH, 1))
    h_values = np.tile(c, (n_seq, nH, 1))
    bundle = FunctionBundle(
        hspace=hspace,
        m=2,
        norm_tag=cfg.norm,
        h_values=h_values,
        f_values=f_values,
        h_lip=(lambda n, cc, rho: 0.0) if mode == "sampled" else None,
        conv_mask=np.ones(nH, dtype=bool),
        ucpc_certified=True,
        continuity_idx=np.arange(nH),
        discontinuity_idx=np.array([], dtype=int),
    )
    scale = spacing
    _validate_continuity_declarations(hspace, f_values, bundle.continuity_idx, scale, cfg.norm)

    path = ApproachPath(anchor_x=anchor_x, anchor_y=anchor_x, points=path_idx, kind="radial")
    plan = [
        PlannedCheck(kind="nt", path=path),
        PlannedCheck(kind="continuity", path=path),
        PlannedCheck(kind="boundedness", anchor_y=anchor_x, r=0.25, sup_cert=1.0),
        PlannedCheck(kind="ucpc", y0=nH // 2),
    ]
    return ScenarioData(
        space=space,
        bundle=bundle,
        n_seq=n_seq,
        query_idx=query_idx,
        plan=plan,
        primary_anchor_y=anchor_x,
    )


# ---------------------------------------------------------------------------
# S1: jump along a segment in the plane
# ---------------------------------------------------------------------------

def _build_s1(cfg: ScenarioConfig) -> ScenarioData:
    g = max(cfg.grid, 41)
    if g % 2 == 0:
        g += 1  # keep 0 on the axis
    axis = np.linspace(-1.0, 1.0, g)
    delta = 2.0 / (g - 1)
    steps = cfg.steps
    t0 = 0.02
    radii = _geometric_radii(t0, steps)
    sin_t = 0.199
    cos_t = math.sqrt(1.0 - sin_t * sin_t)

    ps = _PointSet(2)
    ps.add(np.column_stack([axis, np.zeros(g)]))  # the H segment samples
    a0 = int(ps.add(np.array([[0.0, 0.0]]))[0])
    ap = int(ps.add(np.array([[0.5, 0.0]]))[0])
    am = int(ps.add(np.array([[-0.5, 0.0]]))[0])
    ps.add(np.column_stack([radii * cos_t, np.zeros(steps)]))  # tangential feet
    nH = len(ps.pts)

    # approach paths (queries off H)
    p_rad = ps.add(np.column_stack([np.zeros(steps), radii]))
    p_tan = ps.add(np.column_stack([radii * cos_t, radii * sin_t]))
    p_cp = ps.add(np.column_stack([np.full(steps, 0.5), radii]))
    p_cm = ps.add(np.column_stack([np.full(steps, -0.5), radii]))
    # thinned background grid
    off = cfg.seed % 5
    tx = axis[off::5]
    ty = axis[off::5]
    ty = ty[np.abs(ty) > 1e-12]
    gx, gy = np.meshgrid(tx, ty)
    p_grid = ps.add(np.column_stack([gx.ravel(), gy.ravel()]))
    query_idx = np.unique(np.concatenate([p_rad, p_tan, p_cp, p_cm, p_grid]))
    if (query_idx < nH).any():
        raise ValueError("an S1 query collided with an H sample")

    space = SampledSpace(
        coords=ps.pts, dmat=None, h_idx=np.arange(nH), mode="sampled", delta=delta
    )
    hspace = space.h_space()
    t = hspace.coords[:, 0]
    f_values = np.column_stack([np.where(t >= -1e-15, 1.0, -1.0), np.zeros(nH)])
    n_seq = _sequence_length(space, query_idx)
    h_values = np.zeros((n_seq, nH, 2))
    for n in range(1, n_seq + 1):
        h_values[n - 1, :, 0] = np.clip(n * t + 1.0, -1.0, 1.0)

    def h_lip(n: int, c: int, rho: float) -> float:
        # the ramp of h_n lives on (-2/n, 0); outside it the value is constant
        tc = t[c]
        if tc - rho >= 0.0 or tc + rho <= -2.0 / n:
            return 0.0
        return float(n)

    cont = np.flatnonzero(np.abs(t) > 1e-12)
    disc = np.flatnonzero(np.abs(t) <= 1e-12)
    bundle = FunctionBundle(
        hspace=hspace,
        m=2,
        norm_tag=cfg.norm,
        h_values=h_values,
        f_values=f_values,
        h_lip=h_lip,
        conv_mask=np.ones(nH, dtype=bool),
        ucpc_certified=True,
        continuity_idx=cont,
        discontinuity_idx=disc,
    )
    _validate_continuity_declarations(hspace, f_values, cont, delta, cfg.norm)

    plan = [
        PlannedCheck(kind="nt", path=ApproachPath(a0, a0, p_rad, kind="radial")),
        PlannedCheck(kind="nt", path=ApproachPath(a0, a0, p_tan, kind="tangential", eps=0.2)),
        PlannedCheck(kind="continuity", path=ApproachPath(ap, ap, p_cp, kind="radial")),
        PlannedCheck(kind="continuity", path=ApproachPath(am, am, p_cm, kind="radial")),
        PlannedCheck(kind="boundedness", anchor_y=ap, r=0.25, sup_cert=2.0),
        PlannedCheck(kind="ucpc", y0=ap),
    ]
    return ScenarioData(
        space=space,
        bundle=bundle,
        n_seq=n_seq,
        query_idx=query_idx,
        plan=plan,
        primary_anchor_y=a0,
    )


# ---------------------------------------------------------------------------
# S2: moving bump with a slow pedestal at 0 (finite mode)
# ---------------------------------------------------------------------------

_S2_K0 = 200.0
_S2_PEDESTAL_RADIUS = 0.05


def s2_raw_value(k: int, y: np.ndarray) -> np.ndarray:
    """Raw h_k: tent of height 1 at 1/k plus a pedestal at 0 of height
    0.75*K0/(K0+k) — pointwise null, but stuck above 1/2 at y=0 for small k."""
    w = 1.0 / (4.0 * k * (k + 1))
    tent = np.maximum(0.0, 1.0 - np.abs(y - 1.0 / k) / w)
    v = 0.75 * _S2_K0 / (_S2_K0 + k)
    pedestal = v * np.maximum(0.0, 1.0 - y / _S2_PEDESTAL_RADIUS)
    return tent + pedestal


def _build_s2(cfg: ScenarioConfig) -> ScenarioData:
    nY = min(max(cfg.grid, 41), 201)
    ys = np.linspace(0.0, 1.0, nY)
    space = SampledSpace(
        coords=ys[:, None], dmat=None, h_idx=np.arange(nY), mode="finite", delta=0.0
    )
    n_seq = 10
    h_values = np.stack([s2_raw_value(k, ys)[:, None] for k in range(1, n_seq + 1)])
    f_values = np.zeros((nY, 1))
    bundle = FunctionBundle(
        hspace=space,
        m=1,
        norm_tag=cfg.norm,
        h_values=h_values,
        f_values=f_values,
        h_lip=None,
        conv_mask=np.ones(nY, dtype=bool),
        ucpc_certified=False,
        continuity_idx=np.arange(nY),
        discontinuity_idx=np.array([], dtype=int),
    )
    _validate_continuity_declarations(
        space, f_values, bundle.continuity_idx, space.resolution(), cfg.norm
    )
    plan = [
        PlannedCheck(kind="ucpc", y0=0),
        PlannedCheck(kind="ucpc", y0=nY // 2),
        PlannedCheck(kind="ucpc", y0=nY - 1),
    ]
    return ScenarioData(
        space=space,
        bundle=bundle,
        n_seq=n_seq,
        query_idx=np.array([], dtype=int),
        plan=plan,
        primary_anchor_y=0,
        run_extension=False,
    )


# ---------------------------------------------------------------------------
# S3: blowup of f at the accumulation point of H = {0} u {1/k}
# ---------------------------------------------------------------------------

_S3_KMAX = 10


def _build_s3(cfg: ScenarioConfig) -> ScenarioData:
    g = max(cfg.grid, 101)
    if g % 2 == 0:
        g += 1
    axis = np.linspace(-1.0, 1.0, g)
    delta = 2.0 / (g - 1)

    ps = _PointSet(1)
    h_vals = np.array([1.0 / k for k in range(1, _S3_KMAX + 1)] + [0.0])
    ps.add(h_vals[:, None])
    nH = len(ps.pts)  # = KMAX + 1
    a_half = 1  # index of 1/2
    a_zero = _S3_KMAX  # index of 0

    radii = _geometric_radii(0.02, cfg.steps)
    p_rad = ps.add((0.5 + radii)[:, None])
    grid_q = ps.add(axis[:, None])
    query_idx = np.unique(np.concatenate([p_rad, grid_q]))
    query_idx = query_idx[query_idx >= nH]

    space = SampledSpace(
        coords=ps.pts, dmat=None, h_idx=np.arange(nH), mode="sampled", delta=delta
    )
    # H itself is a genuinely finite set, so Y runs in finite mode
    hspace = SampledSpace(
        coords=ps.pts[:nH].copy(), dmat=None, h_idx=np.arange(nH), mode="finite", delta=0.0
    )
    f_values = np.array([[float(k)] for k in range(1, _S3_KMAX + 1)] + [[0.0]])
    n_seq = _sequence_length(space, query_idx)
    h_values = np.zeros((n_seq, nH, 1))
    for n in range(1, n_seq + 1):
        for k in range(1, _S3_KMAX + 1):
            h_values[n - 1, k - 1, 0] = float(k) if k <= n else 0.0

    cont = np.arange(_S3_KMAX)  # every 1/k is isolated in H
    disc = np.array([a_zero])
    bundle = FunctionBundle(
        hspace=hspace,
        m=1,
        norm_tag=cfg.norm,
        h_values=h_values,
        f_values=f_values,
        h_lip=None,
        conv_mask=np.ones(nH, dtype=bool),
        ucpc_certified=True,
        continuity_idx=cont,
        discontinuity_idx=disc,
    )
    _validate_continuity_declarations(hspace, f_values, cont, hspace.resolution(), cfg.norm)

    path = ApproachPath(anchor_x=a_half, anchor_y=a_half, points=p_rad, kind="radial")
    plan = [
        PlannedCheck(kind="nt", path=path),
        PlannedCheck(kind="continuity", path=path),
        PlannedCheck(kind="boundedness", anchor_y=a_half, r=0.125, sup_cert=float(_S3_KMAX) + 1.0),
        PlannedCheck(kind="boundedness", anchor_y=a_zero, r=0.125, sup_cert=None),
        PlannedCheck(kind="ucpc", y0=a_half),
    ]
    return ScenarioData(
        space=space,
        bundle=bundle,
        n_seq=n_seq,
        query_idx=query_idx,
        plan=plan,
        primary_anchor_y=a_half,
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

SCENARIOS: dict[str, Scenario] = {
    "S0": Scenario(
        name="S0",
        title="constant limit",
        summary=(
            "f is constant on a half-line H; every item of the sequence equals f. "
            "Smoke test: the non-tangential limit, continuity, boundedness and "
            "uniform-convergence checks all pass trivially."
        ),
        properties=("NT", "C", "B", "UCPC"),
        default_mode="finite",
        supported_modes=("finite", "sampled"),
        build=_build_s0,
    ),
    "S1": Scenario(
        name="S1",
        title="jump along a segment",
        summary=(
            "X = [-1,1]^2, H the segment y=0, f jumps from (-1,0) to (+1,0) at "
            "the origin. Exercises the non-tangential limit at the jump (radial "
            "and tangential approach) and continuity preservation away from it."
        ),
        properties=("NT", "C", "B"),
        default_mode="sampled",
        supported_modes=("sampled",),
        build=_build_s1,
    ),
    "S2": Scenario(
        name="S2",
        title="moving bump (finite mode)",
        summary=(
            "Y = H = a grid on [0,1]; h_k is a unit tent at 1/k plus a slowly "
            "decaying pedestal at 0, f = 0. The raw sequence converges only "
            "pointwise near 0; the selection transform restores uniform "
            "convergence at every continuity point (UCPC)."
        ),
        properties=("UCPC",),
        default_mode="finite",
        supported_modes=("finite",),
        build=_build_s2,
    ),
    "S3": Scenario(
        name="S3",
        title="boundary blowup",
        summary=(
            "X = [-1,1], H = {0} u {1/k : k <= 10}, f(1/k) = k grows without "
            "bound toward the accumulation point 0. Exercises the local "
            "boundedness bookkeeping: the bound certificate exists at a = 1/2 "
            "and is reported as not-met at a = 0."
        ),
        properties=("B", "NT", "C"),
        default_mode="sampled",
        supported_modes=("sampled",),
        build=_build_s3,
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}") from None


def list_scenarios() -> list[Scenario]:
    return [SCENARIOS[k] for k in sorted(SCENARIOS)]
