"""Best-leaf identification: stage selection, initialization and full runs."""

import numpy as np
import pytest

from dagbandit.bai import bai_reco, bai_stop, initial_dag
from dagbandit.bli import BliParams, bli_select, bli_stop, init_stage, run_bli
from dagbandit.bounds import ExplorationFn
from dagbandit.dag import SearchDag
from dagbandit.feature_space import STOP, FeatureLattice, RaveTable, rave_record
from dagbandit.oracles import OracleSpec, make_sigmoid_bernoulli_oracles
from tests.test_feature_space import constant_oracles

BETA = ExplorationFn("practical", 0.1)


class TestBliStopSelect:
    def test_stop_only_on_terminal(self):
        dag = SearchDag(FeatureLattice(2), BETA)
        internal = dag.insert_node(((0,), False))
        terminal = dag.insert_node(((0,), True))
        assert bli_stop(dag, terminal)
        assert not bli_stop(dag, internal)
        assert not bli_stop(dag, dag.root)

    def test_unsolved_root_selects_root(self):
        dag = initial_dag(FeatureLattice(2), BETA)
        assert bli_select(dag, dag.root, 0.1) == dag.root

    def test_descends_through_solved_stage(self):
        dag = initial_dag(FeatureLattice(2), BETA)
        ids = {dag.keys[c]: c for c in dag.children[dag.root]}
        # force the root stage solved with a clear winner
        for c in dag.children[dag.root]:
            for _ in range(60):
                dag.record_sample(c, 1.0 if dag.keys[c] == ((0,), False) else 0.0)
        assert bai_stop(dag, dag.root, 0.5)
        winner = ids[((0,), False)]
        assert bai_reco(dag, dag.root) == winner
        assert bli_select(dag, dag.root, 0.5) == winner  # winner itself unsolved

    def test_chain_reaches_terminal_leaf(self):
        dag = SearchDag(FeatureLattice(1), BETA)
        arm = dag.insert_node(((0,), False))
        rootstop = dag.insert_node(((), True))
        term = dag.insert_node(((0,), True))
        for _ in range(200):
            dag.record_sample(term, 1.0)
            dag.record_sample(rootstop, 0.0)
        # root solved (arm's interval strictly above root-stop), arm solved
        # trivially (single child)
        assert bli_select(dag, dag.root, 0.9) == term


class TestInitStage:
    def test_materializes_depth_two_neighbourhood(self):
        dom = FeatureLattice(10)
        dag = initial_dag(dom, BETA)
        node = dag.node_id(((0,), False))
        rave = RaveTable()
        for f, v in ((1, 0.9), (2, 0.8), (3, 0.7)):
            rave_record(rave, frozenset({f}), v, [])
        inserted = init_stage(dag, dom, node, rave, width=3)
        keys = {dag.keys[i] for i in inserted}
        # stop child plus the two top-RAVE features at depth 1
        assert ((0,), True) in keys
        assert ((0, 1), False) in keys and ((0, 2), False) in keys
        # their pairings at depth 2, stop children included
        assert ((0, 1, 2), False) in keys
        assert ((0, 1), True) in keys and ((0, 2), True) in keys
        assert ((0, 3), False) not in keys  # below the width cutoff

    def test_idempotent_on_existing_nodes(self):
        dom = FeatureLattice(5)
        dag = initial_dag(dom, BETA)
        node = dag.node_id(((0,), False))
        rave = RaveTable()
        first = init_stage(dag, dom, node, rave, width=3)
        again = init_stage(dag, dom, node, rave, width=3)
        assert first and not again


class TestRunBli:
    def test_single_terminal_under_root(self):
        """A one-feature domain: each stage stops trivially and the run ends
        on a terminal leaf."""
        dom = FeatureLattice(1)
        oracles = constant_oracles({(0,): 0.9, (): 0.1}, intermediate_value=0.5)
        dag = initial_dag(dom, BETA)
        report = run_bli(
            dag, dom, oracles, BliParams(0.05, 0.1, 0.3, 50_000, 0, init_width=0)
        )
        assert report.stopped
        assert report.recommended[1]  # terminal

    def test_two_feature_deterministic_domain(self):
        """Hand-enumerable 8-node domain where {f1,stop} dominates."""
        dom = FeatureLattice(2)
        oracles = constant_oracles(
            {(0,): 0.9, (1,): 0.4, (): 0.1, (0, 1): 0.6},
            intermediate_value=0.5,
        )
        for seed in range(5):
            dag = initial_dag(dom, BETA)
            report = run_bli(
                dag, dom, oracles,
                BliParams(0.05, 0.1, 0.3, 200_000, seed, init_width=3),
                rave=RaveTable(),
            )
            assert report.stopped
            assert report.recommended == ((0,), True)
            assert report.value_estimate == pytest.approx(0.9)
            assert report.n_features == 1

    def test_terminal_guarantee_and_chain_soundness(self, bench_scores):
        """At stop the frontier is terminal, every chain stage satisfies its
        stopping rule, and the chain's lower bounds equal the recommended
        leaf's."""
        dom = FeatureLattice(3)
        oracles = make_sigmoid_bernoulli_oracles([1.0, 0.7, -0.8])
        dag = initial_dag(dom, BETA)
        params = BliParams(0.1, 0.1, 0.3, 500_000, 11, init_width=7)
        report = run_bli(dag, dom, oracles, params, rave=RaveTable())
        assert report.stopped
        assert bli_stop(dag, report.recommended_id)
        node = dag.root
        chain = [node]
        while node != report.recommended_id:
            assert bai_stop(dag, node, params.epsilon)
            node = bai_reco(dag, node)
            chain.append(node)
        leaf_lower = dag.lower[report.recommended_id]
        for node in chain[1:]:
            assert dag.lower[node] == pytest.approx(leaf_lower, abs=1e-12)

    def test_cap_reports_not_stopped(self):
        dom = FeatureLattice(3)
        oracles = make_sigmoid_bernoulli_oracles([0.1, 0.1, 0.1])
        dag = initial_dag(dom, BETA)
        report = run_bli(
            dag, dom, oracles, BliParams(0.001, 0.1, 0.3, 300, 0, init_width=3),
            rave=RaveTable(),
        )
        assert not report.stopped
        assert report.samples == 300

    def test_determinism(self):
        dom = FeatureLattice(3)
        oracles = make_sigmoid_bernoulli_oracles([0.8, 0.2, -0.5])
        outcomes = []
        for _ in range(2):
            dag = initial_dag(dom, BETA)
            rep = run_bli(
                dag, dom, oracles,
                BliParams(0.1, 0.1, 0.3, 500_000, 21, init_width=7),
                rave=RaveTable(),
            )
            outcomes.append((rep.recommended, rep.samples, rep.node_updates))
        assert outcomes[0] == outcomes[1]

    def test_per_stage_clocks_sum_to_total(self):
        dom = FeatureLattice(3)
        oracles = make_sigmoid_bernoulli_oracles([1.0, 0.5, -0.5])
        dag = initial_dag(dom, BETA)
        report = run_bli(
            dag, dom, oracles, BliParams(0.1, 0.1, 0.3, 500_000, 3, init_width=7),
            rave=RaveTable(),
        )
        assert sum(report.per_stage_samples.values()) == report.samples

    def test_theory_variant_refreshes_bounds(self):
        dom = FeatureLattice(3)
        oracles = make_sigmoid_bernoulli_oracles([1.0, 0.5, -0.5])
        dag = initial_dag(dom, ExplorationFn("theory", 0.1))
        report = run_bli(
            dag, dom, oracles,
            BliParams(0.15, 0.1, 0.3, 500_000, 3, init_width=7),
            rave=RaveTable(),
        )
        assert report.stopped
        dag.check_bounds_fixpoint()
