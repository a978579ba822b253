"""Best-arm identification rules and the main loop."""

import dataclasses
import math

import numpy as np
import pytest

from dagbandit.bai import (
    BaiParams,
    bai_add,
    bai_pair,
    bai_reco,
    bai_select,
    bai_stop,
    bar_set,
    expand_due,
    expansion_index,
    floor_pow,
    full_dag,
    initial_dag,
    run_bai,
    uniform_scorer,
)
from dagbandit.bounds import ExplorationFn
from dagbandit.dag import SearchDag, StructuralError
from dagbandit.feature_space import FixedDepthLattice, FixedDepthTree
from dagbandit.oracles import make_sigmoid_bernoulli_oracles

BETA = ExplorationFn("practical", 0.1)


def two_arm_dag(bounds_a, bounds_b):
    """Root with two sampled leaf arms whose (L, U) are forced."""
    dag = SearchDag(FixedDepthLattice(2, 1), BETA)
    a = dag.insert_node((0,))
    b = dag.insert_node((1,))
    dag.record_sample(a, 0.5)
    dag.record_sample(b, 0.5)
    dag.lower[a], dag.upper[a] = bounds_a
    dag.lower[b], dag.upper[b] = bounds_b
    dag._recompute(dag.root)
    return dag, a, b


class TestBarSet:
    def test_shared_representative_leaf_empties_the_set(self):
        # both arms' representative leaf is the same transposition-shared node
        dag = SearchDag(FixedDepthLattice(2, 2), BETA)
        a = dag.insert_node((0,))
        b = dag.insert_node((1,))
        dag.insert_node((0, 1))
        assert bar_set(dag, dag.root, a) == []
        assert bar_set(dag, dag.root, b) == []

    def test_distinct_leaves_challenge_each_other(self):
        dag, a, b = two_arm_dag((0.1, 0.5), (0.2, 0.6))
        assert bar_set(dag, dag.root, a) == [b]
        assert bar_set(dag, dag.root, b) == [a]

    def test_pairwise_sharing(self):
        # three arms, two sharing one representative leaf
        dag = SearchDag(FixedDepthLattice(3, 2), BETA)
        a = dag.insert_node((0,))
        b = dag.insert_node((1,))
        c = dag.insert_node((2,))
        ab = dag.insert_node((0, 1))
        assert dag.representative_leaf(a) == ab == dag.representative_leaf(b)
        assert bar_set(dag, dag.root, a) == [c]
        assert bar_set(dag, dag.root, c) == [a, b]

    def test_tree_mode_compares_denoted_positions(self):
        # distinct tree nodes for the same position cannot challenge
        dag = full_dag(FixedDepthTree(2, 2), BETA)
        a = dag.node_id((0,))
        b = dag.node_id((1,))
        assert dag.representative_leaf(a) != dag.representative_leaf(b)
        assert bar_set(dag, dag.root, a) == []
        assert bar_set(dag, dag.root, b) == []


class TestSelectStopReco:
    def test_select_hand_trace(self):
        dag, a, b = two_arm_dag((0.3, 0.5), (0.1, 0.6))
        b_t, c_t, r = bai_select(dag, dag.root)
        assert b_t == a  # max lower bound
        assert c_t == b  # max upper bound among distinct-leaf arms
        assert r == b  # widths 0.2 vs 0.5

    def test_select_tie_breaks_to_lowest_id(self):
        dag, a, b = two_arm_dag((0.1, 0.6), (0.2, 0.7))
        # equal widths 0.5: pick the lower node id among (b_t=b, c_t=a)
        b_t, c_t, r = bai_select(dag, dag.root)
        assert (b_t, c_t) == (b, a)
        assert r == a

    def test_stop_threshold(self):
        dag, a, b = two_arm_dag((0.30, 0.80), (0.10, 0.34))
        assert bai_stop(dag, dag.root, 0.05)  # 0.34 - 0.30 < 0.05
        dag.upper[b] = 0.60
        assert not bai_stop(dag, dag.root, 0.05)

    def test_trivial_stop_when_all_arms_share_one_leaf(self):
        dag = SearchDag(FixedDepthLattice(2, 2), BETA)
        dag.insert_node((0,))
        dag.insert_node((1,))
        dag.insert_node((0, 1))
        assert bai_stop(dag, dag.root, 0.0)
        with pytest.raises(StructuralError):
            bai_select(dag, dag.root)

    def test_reco_is_argmax_lower(self):
        dag, a, b = two_arm_dag((0.3, 0.5), (0.4, 0.45))
        assert bai_reco(dag, dag.root) == b

    def test_reco_stable_under_further_samples_of_other_arms(self):
        dom = FixedDepthLattice(2, 1)
        oracles = make_sigmoid_bernoulli_oracles([80.0, -80.0])  # means ~1 and ~0
        dag = full_dag(dom, BETA)
        report = run_bai(dag, dom, oracles, BaiParams(0.1, 0.1, 0.0, 100_000, 3))
        assert report.stopped and report.recommended == (0,)
        loser = dag.node_id((1,))
        for _ in range(500):
            dag.record_sample(loser, 0.0)
        assert bai_reco(dag, dag.root) == dag.node_id((0,))


class TestExpansionSchedule:
    def test_reference_points(self):
        assert expand_due(0, 0.3)
        assert expand_due(10, 0.3)  # floor(11^0.3)=2, floor(10^0.3)=1
        assert not expand_due(5, 0.3)
        assert not expand_due(7, 0.0)

    def test_schedule_telescopes_to_floor_power(self):
        for b in np.arange(0.1, 1.05, 0.1):
            b = round(float(b), 1)
            fired = 0
            for t in range(10_000):
                fired += expand_due(t, b)
                assert fired == floor_pow(t + 1, b)

    def test_b_one_expands_every_step(self):
        assert all(expand_due(t, 1.0) for t in range(100))


class TestAdditionRule:
    def test_index_values(self):
        dag = full_dag(FixedDepthLattice(6, 3), BETA)
        node = dag.node_id((0, 1))  # depth 2, 4 children in the full DAG
        dag.visits[node] = 10
        assert expansion_index(dag, node) == pytest.approx(10 / 5 / 2)

    def test_fresh_leaf_index_finite(self):
        dag = SearchDag(FixedDepthLattice(6, 3), BETA)
        leaf = dag.insert_node((0,))
        dag.visits[leaf] = 3
        assert expansion_index(dag, leaf) == pytest.approx(3.0)

    def test_root_uses_unit_depth_factor(self):
        dag = SearchDag(FixedDepthLattice(6, 3), BETA)
        dag.visits[dag.root] = 12
        assert expansion_index(dag, dag.root) == pytest.approx(12.0)

    def test_fully_realized_nodes_excluded(self, rng):
        dom = FixedDepthLattice(2, 2)
        dag = full_dag(dom, BETA)  # everything materialized
        assert bai_add(dag, dom, dag.root, uniform_scorer, rng) is None

    def test_add_wires_all_present_parents(self, rng):
        dom = FixedDepthLattice(2, 2)
        dag = initial_dag(dom, BETA)
        dag.visits[dag.node_id((0,))] = 5
        new = bai_add(dag, dom, dag.root, uniform_scorer, rng)
        assert dag.keys[new] == (0, 1)
        assert sorted(dag.parents[new]) == sorted(
            [dag.node_id((0,)), dag.node_id((1,))]
        )

    def test_restricted_to_subroot(self, rng):
        dom = FixedDepthLattice(3, 3)
        dag = initial_dag(dom, BETA)
        sub = dag.node_id((0,))
        dag.visits[dag.node_id((1,))] = 100  # tempting but outside the subDAG
        new = bai_add(dag, dom, sub, uniform_scorer, rng)
        assert 0 in dag.keys[new]


class TestRunBai:
    def test_separated_deterministic_arms(self):
        dom = FixedDepthLattice(2, 1)
        oracles = make_sigmoid_bernoulli_oracles([60.0, -60.0])
        dag = full_dag(dom, BETA)
        report = run_bai(dag, dom, oracles, BaiParams(0.1, 0.1, 0.0, 1_000_000, 0))
        assert report.stopped
        assert report.recommended == (0,)
        assert 0 < report.samples < 2000

    def test_trivial_stop_reported(self):
        dom = FixedDepthLattice(2, 2)
        oracles = make_sigmoid_bernoulli_oracles([0.5, 0.2])
        dag = full_dag(dom, BETA)  # both arms share the single leaf {f1,f2}
        report = run_bai(dag, dom, oracles, BaiParams(0.0, 0.1, 0.0, 1000, 0))
        assert report.trivial_stop and report.stopped
        assert report.samples == 0

    def test_determinism(self, bench_scores):
        dom = FixedDepthLattice(6, 3)
        oracles = make_sigmoid_bernoulli_oracles(bench_scores)
        params = BaiParams(0.05, 0.1, 0.0, 10_000_000, seed=77)
        reports = []
        for _ in range(2):
            dag = full_dag(dom, BETA)
            reports.append(run_bai(dag, dom, oracles, params))
        a = dataclasses.asdict(reports[0])
        b = dataclasses.asdict(reports[1])
        a.pop("wall_time"), b.pop("wall_time")
        assert a == b

    def test_max_steps_cap_reports_not_stopped(self, bench_scores):
        dom = FixedDepthLattice(6, 3)
        oracles = make_sigmoid_bernoulli_oracles(bench_scores)
        dag = full_dag(dom, BETA)
        report = run_bai(dag, dom, oracles, BaiParams(0.0, 0.1, 0.0, 500, 1))
        assert not report.stopped
        assert report.samples == 500

    def test_expanding_run_obeys_proposition_one(self):
        dom = FixedDepthLattice(8, 8)
        oracles = make_sigmoid_bernoulli_oracles([0.0] * 8)
        beta = ExplorationFn("theory", 0.1)
        dag = initial_dag(dom, beta)
        explored0 = dag.explored_leaf_count
        violations = []

        def check(d, t):
            if d.explored_leaf_count - explored0 > t**0.3:
                violations.append(t)

        params = BaiParams(0.3, 0.1, 0.3, 20_000, seed=5)
        run_bai(dag, dom, oracles, params, instrument=check)
        assert violations == []

    def test_delta_mismatch_rejected(self, bench_scores):
        dom = FixedDepthLattice(6, 3)
        oracles = make_sigmoid_bernoulli_oracles(bench_scores)
        dag = full_dag(dom, ExplorationFn("practical", 0.2))
        with pytest.raises(ValueError):
            run_bai(dag, dom, oracles, BaiParams(0.0, 0.1, 0.0, 10, 0))


class TestParamsValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            BaiParams(epsilon=-0.1, delta=0.1, b=0.0)
        with pytest.raises(ValueError):
            BaiParams(epsilon=0.1, delta=1.1, b=0.0)
        with pytest.raises(ValueError):
            BaiParams(epsilon=0.1, delta=0.1, b=1.5)
        with pytest.raises(ValueError):
            BaiParams(epsilon=0.1, delta=0.1, b=0.3, max_steps=0)
