"""Extension operator: scale-index selection, the g field, smoothing, and the
inequality diagnostics."""
import numpy as np
import pytest

from baireext.extension import (
    alp5_rhs,
    branch_condition_violations,
    build_extension,
    defnx_satisfied,
    extend_point,
    factor4_ratio_range,
    field_to_csv,
    general_inequality_slacks,
    local_lip_K,
    m_bound,
    nt_quotient,
    select_ceiling,
    select_n,
)
from baireext.pipeline import FunSeqItem
from baireext.target import norm


def flat_items(count, lip_value=0.0, m=1, nY=4):
    """Items with constant values and a constant Lipschitz-bound oracle."""
    return [
        FunSeqItem(
            n=n,
            values=np.zeros((nY, m)),
            sup_bound=0.0,
            lip_bound=lambda c, rho, _l=lip_value: _l,
        )
        for n in range(1, count + 1)
    ]


class TestSelection:
    def test_k_floors_at_one_for_constant_items(self):
        items = flat_items(3)
        assert local_lip_K(items, 2, 0, 0.01) == 1.0

    def test_k_reports_global_constant(self):
        items = flat_items(3, lip_value=7.5)
        assert local_lip_K(items, 1, 0, 0.01) == 7.5

    def test_k_rejects_n_zero(self):
        with pytest.raises(ValueError, match="n >= 1"):
            local_lip_K(flat_items(1), 0, 0, 0.01)

    def test_ceiling_examples(self):
        # n (n (n+2) + 2) < 1/dist with K = 1
        assert select_ceiling(0.049) == 2  # 2*10 = 20 < 1/0.049; 3*17 = 51 is not
        assert select_ceiling(0.2) == 0  # even n=1 needs 5*dist < 1
        assert select_ceiling(1e-3) == 9

    def test_select_example_near_one_twentieth(self):
        items = flat_items(3)
        n, table = select_n(items, 0, 0.049)
        assert n == 2
        assert table[2] == 1.0
        # n = 3 genuinely fails the test at this distance
        assert not defnx_satisfied(items, 3, 0, 0.049)
        assert defnx_satisfied(items, 2, 0, 0.049)

    def test_boundary_distance_is_excluded(self):
        # at dist = 1/20 exactly, n = 2 fails the strict inequality
        items = flat_items(3)
        n, _ = select_n(items, 0, 0.05)
        assert n < 2

    def test_infinite_k_gives_n_zero(self):
        items = [
            FunSeqItem(
                n=1, values=np.zeros((4, 1)), sup_bound=0.0,
                lip_bound=lambda c, rho: np.inf,
            )
        ]
        n, table = select_n(items, 0, 0.15)
        assert n == 0
        assert np.isinf(table[1])

    def test_zero_distance_rejected(self):
        with pytest.raises(ValueError, match="dist"):
            select_n(flat_items(1), 0, 0.0)

    def test_ceiling_above_item_count_raises(self):
        with pytest.raises(ValueError, match="ceiling"):
            select_n(flat_items(1), 0, 1e-3)

    @pytest.mark.parametrize("which", ["s1", "s3"])
    def test_selected_index_is_maximal(self, which, s1_run, s3_run):
        run = {"s1": s1_run, "s3": s3_run}[which]
        field = run.field
        rng = np.random.default_rng(2)
        rows = rng.choice(field.n_queries, size=min(25, field.n_queries), replace=False)
        for q in rows:
            q = int(q)
            n = int(field.n_of_x[q])
            ceiling = select_ceiling(float(field.dist_h[q]))
            if n > 0:
                assert defnx_satisfied(field.items, n, int(field.u_y[q]), float(field.dist_h[q]))
            for n2 in range(n + 1, ceiling + 1):
                assert not defnx_satisfied(
                    field.items, n2, int(field.u_y[q]), float(field.dist_h[q])
                )


class TestField:
    def test_g_is_zero_where_n_is_zero(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            zero = run.field.n_of_x == 0
            assert np.all(run.field.g[zero] == 0.0)

    def test_g_comes_from_selected_item(self, s1_run):
        field = s1_run.field
        for q in range(0, field.n_queries, 37):
            n = int(field.n_of_x[q])
            if n > 0:
                expect = field.items[n - 1].values[int(field.u_y[q])]
                assert np.array_equal(field.g[q], expect)

    def test_extend_point_matches_batch(self, s1_run):
        field = s1_run.field
        x = int(field.query_idx[3])
        dh, uy, n, g, table = extend_point(field.space, field.items, field.f_h, x)
        assert dh == pytest.approx(float(field.dist_h[3]))
        assert uy == int(field.u_y[3])
        assert n == int(field.n_of_x[3])
        assert np.array_equal(g, field.g[3])

    def test_query_on_h_rejected(self, s1_run):
        field = s1_run.field
        h0 = int(field.space.h_idx[0])
        with pytest.raises(ValueError, match="lies on"):
            build_extension(
                field.space, field.items, field.f_h, np.array([h0]), field.norm_tag
            )

    def test_selection_index_grows_along_radial_path(self, s1_run):
        # n(x) -> infinity as x -> a is the mechanism behind the NT limit
        path = s1_run.data.plan[0].path
        rows = [s1_run.field.row_of(int(x)) for x in path.points]
        ns = s1_run.field.n_of_x[rows]
        assert ns[-1] > ns[0]
        assert np.all(np.diff(ns) >= 0)


class TestSmoothing:
    def test_smooth_is_convex_combination(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            field = run.field
            for q in range(field.n_queries):
                lam = field.contrib_w[q]
                assert np.all(lam > 0)
                assert lam.sum() == pytest.approx(1.0, abs=1e-12)
                contrib = field.center_g[field.contributors[q]]
                cap = float(norm(contrib, field.norm_tag).max())
                assert float(norm(field.g_smooth[q], field.norm_tag)) <= cap + 1e-12

    def test_every_query_covers_itself(self, s1_run):
        field = s1_run.field
        for q in range(field.n_queries):
            # center q is the query itself; its ball of radius dist/3 holds it
            assert q in set(field.contributors[q].tolist())

    def test_factor4_ratio_range(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            lo, hi = factor4_ratio_range(run.field)
            assert lo >= 0.25 - 1e-12
            assert hi <= 4.0 + 1e-12

    def test_factor4_requires_smoothing(self, s1_run):
        field = s1_run.field
        bare = build_extension(
            field.space, field.items, field.f_h, field.query_idx[:4], field.norm_tag
        )
        with pytest.raises(ValueError, match="smooth_extension"):
            factor4_ratio_range(bare)


class TestInequalities:
    def test_general_inequality_slacks(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            slacks = general_inequality_slacks(run.field)
            assert slacks["dist_le_d"] >= -1e-12
            assert slacks["dau_le_3dax"] >= -1e-12

    def test_branch_condition_holds(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            assert branch_condition_violations(run.field) == 0

    def test_alp5_bounds_nt_quotient(self, s1_run, s3_run):
        for run in (s1_run, s3_run):
            field = run.field
            for a in (run.data.primary_anchor_y, 0):
                q = nt_quotient(field, a)
                rhs = alp5_rhs(field, a)
                sel = field.n_of_x > 0
                assert np.all(q[sel] <= rhs[sel] + 1e-12)

    def test_m_bound(self):
        assert m_bound(3) == 5.0


class TestCsv:
    def test_column_order_and_row_count(self, s1_run):
        field = s1_run.field
        text = field_to_csv(field, s1_run.data.primary_anchor_y)
        lines = text.strip().split("\n")
        assert lines[0] == (
            "x0,x1,dist_h,n_of_x,u_index,g0,g1,g_smooth0,g_smooth1,"
            "q_nt,alp5_rhs,alp5_slack"
        )
        assert len(lines) == field.n_queries + 1
        first = lines[1].split(",")
        assert float(first[2]) == float(field.dist_h[0])
        assert int(first[3]) == int(field.n_of_x[0])
