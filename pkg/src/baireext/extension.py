"""Extension operator: builds g on X \\ H from the pipeline output on H and
smooths it to a continuous blend g_smooth.

Per query x the operator picks the nearest H sample u(x), the scale index
n(x) = the largest n whose certified local Lipschitz constant K_{x,n} of item
n around u(x) still satisfies dist(x,H) < 1/(n K_{x,n} (n M_n + 2)), and sets
g(x) = f_{n(x)}(u(x)) with f_0 = 0.  The smoothing step blends g values over
the cover {B(x_a, dist(x_a,H)/3)} with partition-of-unity weights.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .pipeline import FunSeqItem
from .space import CoverageError, SampledSpace
from .target import norm

__all__ = [
    "ExtensionField",
    "m_bound",
    "local_lip_K",
    "defnx_satisfied",
    "select_ceiling",
    "select_n",
    "extend_point",
    "build_extension",
    "smooth_extension",
    "nt_quotient",
    "alp5_rhs",
    "general_inequality_slacks",
    "branch_condition_violations",
    "factor4_ratio_range",
    "field_to_csv",
    "CSV_NUM_FMT",
]


def m_bound(n: int) -> float:
    """Certified sup bound M_n = n + 2 of the finished pipeline item n."""
    return float(n + 2)


def local_lip_K(items: list[FunSeqItem], n: int, u_y: int, dist_h: float) -> float:
    """K_{x,n}: certified Lipschitz bound of item n over the ball around u(x)
    of radius (n M_n + 2) dist(x,H), floored at 1; may be infinite."""
    if n < 1:
        raise ValueError("K is defined for n >= 1")
    radius = (n * m_bound(n) + 2.0) * dist_h
    return max(1.0, float(items[n - 1].lip_bound(u_y, radius)))


def defnx_satisfied(items: list[FunSeqItem], n: int, u_y: int, dist_h: float) -> bool:
    """Whether index n passes the selection test dist < 1/(n K (n M_n + 2));
    an infinite K disqualifies n via the 1/inf = 0 convention."""
    k = local_lip_K(items, n, u_y, dist_h)
    if np.isinf(k):
        return False
    return dist_h < 1.0 / (n * k * (n * m_bound(n) + 2.0))


def select_ceiling(dist_h: float) -> int:
    """Largest n that could pass the selection test even with K = 1; any
    satisfying n obeys n (n (n+2) + 2) < 1/dist, so the scan starts here."""
    n = 0
    while (n + 1) * ((n + 1) * (n + 3) + 2) * dist_h < 1.0:
        n += 1
    return n


def select_n(
    items: list[FunSeqItem], u_y: int, dist_h: float
) -> tuple[int, dict[int, float]]:
    """Descending scan from the analytic ceiling; returns (n(x), K table).

    The satisfying set need not be an interval, so the scan walks down and
    returns the first (hence largest) passing n, or 0 when none passes.
    """
    if not dist_h > 0:
        raise ValueError("selection needs dist(x, H) > 0")
    ceiling = select_ceiling(dist_h)
    if ceiling > len(items):
        raise ValueError(
            f"selection ceiling {ceiling} exceeds the {len(items)} built items; "
            "increase the sequence length"
        )
    table: dict[int, float] = {}
    for n in range(ceiling, 0, -1):
        k = local_lip_K(items, n, u_y, dist_h)
        table[n] = k
        if np.isinf(k):
            continue
        if dist_h < 1.0 / (n * k * (n * m_bound(n) + 2.0)):
            return n, table
    return 0, table


@dataclass
class ExtensionField:
    """g and g_smooth over a finite query set in X \\ H, with diagnostics."""

    space: SampledSpace
    items: list[FunSeqItem]
    f_h: np.ndarray  # (nH, m) limit values in H-sample order
    norm_tag: str
    query_idx: np.ndarray  # (nq,) X sample indices
    qh: np.ndarray  # (nq, nH) query-to-H distances
    dist_h: np.ndarray  # (nq,)
    u_x: np.ndarray  # (nq,) X index of the nearest H sample
    u_y: np.ndarray  # (nq,) same, in H-sample order
    n_of_x: np.ndarray  # (nq,)
    g: np.ndarray  # (nq, m)
    k_tables: list[dict[int, float]]
    # smoothing data (filled by smooth_extension)
    center_pos: Optional[np.ndarray] = None  # coords (nc, dim) or X indices (nc,)
    center_g: Optional[np.ndarray] = None
    center_dist_h: Optional[np.ndarray] = None
    center_qh: Optional[np.ndarray] = None
    contributors: Optional[list[np.ndarray]] = None
    contrib_w: Optional[list[np.ndarray]] = None
    g_smooth: Optional[np.ndarray] = None

    @property
    def n_queries(self) -> int:
        return len(self.query_idx)

    def row_of(self, x_idx: int) -> int:
        rows = np.flatnonzero(self.query_idx == x_idx)
        if rows.size == 0:
            raise KeyError(f"sample {x_idx} is not a query of this field")
        return int(rows[0])


def _extend_rows(items, f_h, qh_rows):
    """Core per-query extension given query-to-H distance rows."""
    nq = len(qh_rows)
    m = f_h.shape[1]
    dist_h = qh_rows.min(axis=1)
    u_y = qh_rows.argmin(axis=1)
    n_of = np.zeros(nq, dtype=int)
    g = np.zeros((nq, m))
    tables: list[dict[int, float]] = []
    for q in range(nq):
        n, table = select_n(items, int(u_y[q]), float(dist_h[q]))
        n_of[q] = n
        tables.append(table)
        if n > 0:
            g[q] = items[n - 1].values[int(u_y[q])]
    return dist_h, u_y, n_of, g, tables


def extend_point(
    space: SampledSpace, items: list[FunSeqItem], f_h: np.ndarray, x: int
) -> tuple[float, int, int, np.ndarray, dict[int, float]]:
    """Extend at one X sample: returns (dist_h, u_y, n_of_x, g, K table)."""
    row = space.dists_from(int(x))[space.h_idx][None, :]
    dist_h, u_y, n_of, g, tables = _extend_rows(items, f_h, row)
    return float(dist_h[0]), int(u_y[0]), int(n_of[0]), g[0], tables[0]


def build_extension(
    space: SampledSpace,
    items: list[FunSeqItem],
    f_h: np.ndarray,
    query_idx: np.ndarray,
    norm_tag: str = "linf",
) -> ExtensionField:
    """Run the extension at every query sample (all must lie off H)."""
    query_idx = np.asarray(query_idx, dtype=int)
    qh = np.stack([space.dists_from(int(x))[space.h_idx] for x in query_idx])
    if not np.all(qh.min(axis=1) > 0):
        bad = int(query_idx[int(np.argmin(qh.min(axis=1)))])
        raise ValueError(f"query {bad} lies on a sampled H point")
    dist_h, u_y, n_of, g, tables = _extend_rows(items, f_h, qh)
    return ExtensionField(
        space=space,
        items=items,
        f_h=f_h,
        norm_tag=norm_tag,
        query_idx=query_idx,
        qh=qh,
        dist_h=dist_h,
        u_x=space.h_idx[u_y],
        u_y=u_y,
        n_of_x=n_of,
        g=g,
        k_tables=tables,
    )


def smooth_extension(field: ExtensionField, extra_midpoints: bool = True) -> ExtensionField:
    """Fill g_smooth: blend of g values over {B(x_a, dist(x_a,H)/3)}.

    Centers are the queries themselves (each query covers itself, so coverage
    holds by construction) plus, on coordinate spaces, the midpoints between
    each query and its nearest H sample, which refine the cover toward H.
    """
    space = field.space
    items, f_h = field.items, field.f_h

    if space.coords is not None:
        pos = [space.coords[field.query_idx]]
        cg = [field.g]
        cdh = [field.dist_h]
        cqh = [field.qh]
        if extra_midpoints:
            mids = (space.coords[field.query_idx] + space.coords[field.u_x]) / 2.0
            mqh = space.dists_coords(mids, space.h_idx)
            mdh, mu, mn, mg, _ = _extend_rows(items, f_h, mqh)
            keep = mdh > 0
            pos.append(mids[keep])
            cg.append(mg[keep])
            cdh.append(mdh[keep])
            cqh.append(mqh[keep])
        center_pos = np.concatenate(pos)
        center_g = np.concatenate(cg)
        center_dh = np.concatenate(cdh)
        center_qh = np.concatenate(cqh)
        qpos = space.coords[field.query_idx]
        dqc = np.linalg.norm(qpos[:, None, :] - center_pos[None, :, :], axis=2)
    else:
        center_pos = field.query_idx.copy()
        center_g = field.g.copy()
        center_dh = field.dist_h.copy()
        center_qh = field.qh.copy()
        dqc = np.stack(
            [field.space.dists_from(int(x))[field.query_idx] for x in field.query_idx]
        )

    radii = center_dh / 3.0
    contributors, weights = [], []
    g_smooth = np.zeros_like(field.g)
    for q in range(field.n_queries):
        w = radii - dqc[q]
        inside = w > 0
        if not inside.any():
            raise CoverageError(
                f"query {int(field.query_idx[q])} is covered by no smoothing ball"
            )
        idx = np.flatnonzero(inside)
        wv = w[idx]
        lam = wv / wv.sum()
        contributors.append(idx)
        weights.append(lam)
        g_smooth[q] = lam @ center_g[idx]
    return replace(
        field,
        center_pos=center_pos,
        center_g=center_g,
        center_dist_h=center_dh,
        center_qh=center_qh,
        contributors=contributors,
        contrib_w=weights,
        g_smooth=g_smooth,
    )


# ---------------------------------------------------------------------------
# inequality diagnostics
# ---------------------------------------------------------------------------

def nt_quotient(field: ExtensionField, anchor_y: int) -> np.ndarray:
    """q(x) = ||g(x) - f(a)|| dist(x,H)/d(x,a) per query, for anchor a in H."""
    dev = norm(field.g - field.f_h[anchor_y], field.norm_tag)
    return dev * field.dist_h / field.qh[:, anchor_y]


def alp5_rhs(field: ExtensionField, anchor_y: int) -> np.ndarray:
    """Right-hand side 1/n + ||f(a)||/n + ||f_n(a) - f(a)|| per query; +inf on
    queries with n(x) = 0, where g = 0 and the bound is not asserted."""
    out = np.full(field.n_queries, np.inf)
    fa = field.f_h[anchor_y]
    fa_n = float(norm(fa, field.norm_tag))
    for n in np.unique(field.n_of_x):
        if n == 0:
            continue
        rows = field.n_of_x == n
        dev_n = float(norm(field.items[n - 1].values[anchor_y] - fa, field.norm_tag))
        out[rows] = 1.0 / n + fa_n / n + dev_n
    return out


def general_inequality_slacks(field: ExtensionField) -> dict[str, float]:
    """Worst-case slacks of dist(x,H) <= d(x,a) and d(a,u(x)) <= 3 d(a,x) over
    every (query, H sample) pair; both must be >= 0."""
    d_xa = field.qh  # (nq, nH)
    slack1 = float((d_xa - field.dist_h[:, None]).min())
    hs = field.space.h_space()
    d_au = hs.dense_matrix()[field.u_y]  # (nq, nH): d(u(x), a)
    slack2 = float((3.0 * d_xa - d_au).min())
    return {"dist_le_d": slack1, "dau_le_3dax": slack2}


def branch_condition_violations(field: ExtensionField) -> int:
    """Count of (query, a) pairs violating: dist/d > 1/(n M_n) implies
    d(u(x), a) < 1/(n K_{x,n}); pairs with K = inf are skipped."""
    hs = field.space.h_space()
    d_au = hs.dense_matrix()[field.u_y]
    bad = 0
    for q in range(field.n_queries):
        n = int(field.n_of_x[q])
        if n == 0:
            continue
        k = field.k_tables[q][n]
        if np.isinf(k):
            continue
        ratio = field.dist_h[q] / field.qh[q]
        hot = ratio > 1.0 / (n * m_bound(n))
        bad += int(np.count_nonzero(hot & ~(d_au[q] < 1.0 / (n * k))))
    return bad


def factor4_ratio_range(field: ExtensionField) -> tuple[float, float]:
    """Range of (dist(x_a,H)/d(x_a,a')) / (dist(x,H)/d(x,a')) over every
    (query, contributing center, sampled a') triple; must stay in [1/4, 4]."""
    if field.contributors is None:
        raise ValueError("smooth_extension has not been run")
    lo, hi = np.inf, -np.inf
    ratio_q = field.dist_h[:, None] / field.qh  # (nq, nH)
    ratio_c = field.center_dist_h[:, None] / field.center_qh  # (nc, nH)
    for q in range(field.n_queries):
        rr = ratio_c[field.contributors[q]] / ratio_q[q][None, :]
        lo = min(lo, float(rr.min()))
        hi = max(hi, float(rr.max()))
    return lo, hi


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_NUM_FMT = repr  # shortest round-trip float text; bit-stable across runs


def field_to_csv(field: ExtensionField, anchor_y: int) -> str:
    """One row per query: x coords..., dist_h, n_of_x, u_index, g...,
    g_smooth..., q_nt, alp5_rhs, alp5_slack (NT columns vs the given anchor).
    """
    space = field.space
    m = field.f_h.shape[1]
    if space.coords is not None:
        dim = space.coords.shape[1]
        coord_cols = [f"x{i}" for i in range(dim)]
    else:
        coord_cols = ["x_index"]
    cols = (
        coord_cols
        + ["dist_h", "n_of_x", "u_index"]
        + [f"g{i}" for i in range(m)]
        + [f"g_smooth{i}" for i in range(m)]
        + ["q_nt", "alp5_rhs", "alp5_slack"]
    )
    q_nt = nt_quotient(field, anchor_y)
    rhs = alp5_rhs(field, anchor_y)
    slack = rhs - q_nt
    gs = field.g_smooth if field.g_smooth is not None else np.full_like(field.g, np.nan)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for q in range(field.n_queries):
        x = int(field.query_idx[q])
        row = (
            [CSV_NUM_FMT(float(c)) for c in space.coords[x]]
            if space.coords is not None
            else [str(x)]
        )
        row += [CSV_NUM_FMT(float(field.dist_h[q])), str(int(field.n_of_x[q])), str(int(field.u_x[q]))]
        row += [CSV_NUM_FMT(float(v)) for v in field.g[q]]
        row += [CSV_NUM_FMT(float(v)) for v in gs[q]]
        row += [CSV_NUM_FMT(float(q_nt[q])), CSV_NUM_FMT(float(rhs[q])), CSV_NUM_FMT(float(slack[q]))]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
