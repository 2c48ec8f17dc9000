"""Snapshot structures, pair counting and the streaming engine.

Co-occurrence and opportunity computations are checked against literal
triple-loop enumeration; engine behavior is checked against the scalar
belief operations and against hand-derived toy values.
"""

import numpy as np
import pytest

from assocnet.errors import SequencingError
from assocnet.model import PairObservation, PairPosterior, update_cumulative
from assocnet.projection import (
    BipartiteSnapshot,
    EngineState,
    NodeRegistry,
    active_observations,
    co_occurrences,
    opportunities,
)
from assocnet.synth import builtin_seeds


def brute_force_counts(snapshot):
    """Oracle: per-pair co-occurrences and opportunities by triple loop."""
    n, k = snapshot.source_count, snapshot.target_count
    b = np.zeros((n, k), dtype=bool)
    for i, t in snapshot.links:
        b[i, t] = True
    w = {}
    x = {}
    for i in range(n):
        for j in range(i + 1, n):
            wij = sum(int(b[i, kk] and b[j, kk]) for kk in range(k))
            xij = sum(int(b[i, kk] or b[j, kk]) for kk in range(k))
            w[(i, j)] = wij
            x[(i, j)] = xij
    return w, x


def random_snapshot(rng, n=None, k=None, density=0.25, t=1):
    n = n if n is not None else int(rng.integers(2, 51))
    k = k if k is not None else int(rng.integers(1, 51))
    mask = rng.random((n, k)) < density
    return BipartiteSnapshot.from_dense(mask, t=t)


def template_snapshot(t=1):
    template, _, _ = builtin_seeds()
    return BipartiteSnapshot.from_dense(template.probabilities, t=t)


class TestSnapshot:
    def test_links_are_deduplicated_and_sorted(self):
        snap = BipartiteSnapshot(
            t=0, source_count=3, target_count=3,
            links=[(2, 1), (0, 2), (2, 1), (0, 0)],
        )
        assert snap.links.tolist() == [[0, 0], [0, 2], [2, 1]]
        assert len(snap) == 3

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            BipartiteSnapshot(t=0, source_count=2, target_count=2, links=[(2, 0)])
        with pytest.raises(ValueError):
            BipartiteSnapshot(t=0, source_count=2, target_count=2, links=[(0, -1)])
        with pytest.raises(ValueError):
            BipartiteSnapshot(t=-1, source_count=2, target_count=2, links=[])

    def test_degrees(self):
        snap = template_snapshot()
        assert snap.degrees().tolist() == [2, 2, 4, 2, 2]


class TestCoOccurrences:
    def test_template_matrix(self):
        got = co_occurrences(template_snapshot())
        assert got[(0, 1)] == 2  # sources 1 and 2 share both their targets
        assert got[(0, 2)] == 2
        assert got[(2, 3)] == 2
        assert (0, 3) not in got  # sources 1 and 4 never co-occur
        assert got == {
            (0, 1): 2, (0, 2): 2, (1, 2): 2, (2, 3): 2, (2, 4): 2, (3, 4): 2,
        }

    def test_empty_snapshot(self):
        snap = BipartiteSnapshot(t=0, source_count=4, target_count=3, links=[])
        assert co_occurrences(snap) == {}

    def test_matches_brute_force_on_random_snapshot(self):
        rng = np.random.default_rng(30)
        snap = random_snapshot(rng, n=30, k=20)
        w_oracle, _ = brute_force_counts(snap)
        got = co_occurrences(snap)
        assert got == {p: c for p, c in w_oracle.items() if c > 0}


class TestOpportunities:
    def test_template_pairs(self):
        snap = template_snapshot()
        assert opportunities(snap, [(0, 1)]) == {(0, 1): 2}
        assert opportunities(snap, [(0, 2)]) == {(0, 2): 4}

    def test_isolated_pair_has_zero(self):
        snap = BipartiteSnapshot(
            t=0, source_count=4, target_count=3, links=[(0, 0)]
        )
        assert opportunities(snap, [(2, 3)]) == {(2, 3): 0}

    def test_keys_normalized_and_validated(self):
        snap = template_snapshot()
        assert opportunities(snap, [(1, 0)]) == {(0, 1): 2}
        with pytest.raises(ValueError):
            opportunities(snap, [(0, 9)])
        with pytest.raises(ValueError):
            opportunities(snap, [(2, 2)])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        snap = random_snapshot(rng, n=25, k=30)
        _, x_oracle = brute_force_counts(snap)
        got = opportunities(snap, list(x_oracle))
        assert got == x_oracle


class TestActiveObservations:
    def test_identities_on_random_snapshots(self):
        """w <= x <= min(K, d_i + d_j) and x = d_i + d_j - w on every pair."""
        rng = np.random.default_rng(32)
        for _ in range(20):
            snap = random_snapshot(rng)
            d = snap.degrees()
            obs = active_observations(snap)
            assert np.all(obs.w <= obs.x)
            assert np.all(obs.x == d[obs.i] + d[obs.j] - obs.w)
            assert np.all(obs.x <= np.minimum(snap.target_count, d[obs.i] + d[obs.j]))
            assert np.all(obs.x > 0)

    def test_covers_exactly_the_pairs_with_opportunities(self):
        rng = np.random.default_rng(33)
        snap = random_snapshot(rng, n=20, k=10, density=0.1)
        _, x_oracle = brute_force_counts(snap)
        obs = active_observations(snap)
        got = {(int(a), int(b)) for a, b in zip(obs.i, obs.j)}
        assert got == {p for p, x in x_oracle.items() if x > 0}


class TestEngineStep:
    def test_first_template_step(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        frame = engine.step(template_snapshot(t=1))
        post, summary = engine.query_pair("1", "2")
        assert (post.alpha, post.beta) == (12.0, 10.0)
        assert summary.mean_pi == pytest.approx(12 / 22)
        # matches the scalar operation it composes
        scalar = update_cumulative(PairPosterior(10, 10), PairObservation(2, 2))
        assert (scalar.alpha, scalar.beta) == (post.alpha, post.beta)
        assert frame.t == 1 and len(frame) == 10

    def test_empty_snapshot_changes_nothing(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        engine.step(template_snapshot(t=1))
        before = {
            pair: engine.query_pair(*pair)
            for pair in [("1", "2"), ("2", "4"), ("3", "5")]
        }
        frame = engine.step(
            BipartiteSnapshot(t=2, source_count=5, target_count=4, links=[])
        )
        assert len(frame) == 0
        for pair, (post, summary) in before.items():
            post2, summary2 = engine.query_pair(*pair)
            assert (post2.alpha, post2.beta) == (post.alpha, post.beta)
            assert summary2 == summary

    def test_sequencing_enforced(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        engine.step(template_snapshot(t=1))
        with pytest.raises(SequencingError):
            engine.step(template_snapshot(t=3))
        with pytest.raises(SequencingError):
            engine.step(template_snapshot(t=1))

    def test_first_snapshot_may_start_anywhere(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        engine.step(template_snapshot(t=7))
        assert engine.current_step == 7

    def test_mixed_rule_and_skip_of_inactive_pairs(self):
        engine = EngineState(registry=NodeRegistry.numeric(3))
        snap1 = BipartiteSnapshot(
            t=1, source_count=3, target_count=2, links=[(0, 0), (1, 0)]
        )
        engine.step(snap1, kappa=0.5)
        post, _ = engine.query_pair("1", "2")
        # prior (10,10) mixed with (w=1, x=1): (0.5*10+0.5, 0.5*10)
        assert (post.alpha, post.beta) == (5.5, 5.0)
        # node 3 never active: pairs with it materialize too (x=d_other>0)
        post13, _ = engine.query_pair("1", "3")
        assert (post13.alpha, post13.beta) == (5.0, 5.5)
        # an all-empty snapshot must leave mixed-rule beliefs untouched
        engine.step(
            BipartiteSnapshot(t=2, source_count=3, target_count=2, links=[]),
            kappa=0.5,
        )
        post_after, _ = engine.query_pair("1", "2")
        assert (post_after.alpha, post_after.beta) == (5.5, 5.0)

    def test_lazy_materialization(self):
        engine = EngineState(registry=NodeRegistry.numeric(6))
        snap = BipartiteSnapshot(
            t=1, source_count=6, target_count=3, links=[(0, 0), (1, 0)]
        )
        engine.step(snap)
        # pairs among the four absent nodes never materialize
        assert engine.num_pairs == 9  # pairs touching node 0 or 1
        post, summary = engine.query_pair("5", "6")
        assert (post.alpha, post.beta) == (10.0, 10.0)
        assert summary.mean_pi == 0.5 and summary.expected_w == 0.0

    def test_growing_node_universe(self):
        engine = EngineState(registry=NodeRegistry.numeric(2))
        engine.step(BipartiteSnapshot(
            t=1, source_count=2, target_count=2, links=[(0, 0), (1, 0)]
        ))
        engine.registry.index("3")
        engine.step(BipartiteSnapshot(
            t=2, source_count=3, target_count=2, links=[(0, 0), (2, 0)]
        ))
        post, _ = engine.query_pair("1", "3")
        assert (post.alpha, post.beta) == (11.0, 10.0)


class TestQueryPair:
    def test_fresh_state_reports_prior(self):
        engine = EngineState(registry=NodeRegistry.numeric(4))
        post, summary = engine.query_pair("2", "4")
        assert (post.alpha, post.beta) == (10.0, 10.0)
        assert summary.mean_pi == 0.5

    def test_self_pair_rejected(self):
        engine = EngineState(registry=NodeRegistry.numeric(4))
        with pytest.raises(ValueError):
            engine.query_pair("2", "2")

    def test_unknown_identifier_rejected(self):
        engine = EngineState(registry=NodeRegistry.numeric(4))
        with pytest.raises(KeyError):
            engine.query_pair("2", "nope")

    def test_query_never_mutates(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        engine.step(template_snapshot(t=1))
        n_before = engine.num_pairs
        engine.query_pair("1", "4")
        assert engine.num_pairs == n_before


class TestFrame:
    def test_symmetric_lookup(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        frame = engine.step(template_snapshot(t=1))
        assert frame.pair("1", "2") == frame.pair("2", "1")

    def test_missing_pair_raises(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        frame = engine.step(template_snapshot(t=1))
        obs, post, summary = frame.pair("1", "4")  # active: x = 4
        assert obs == PairObservation(0, 4)
        frame2 = engine.step(
            BipartiteSnapshot(t=2, source_count=5, target_count=4, links=[])
        )
        with pytest.raises(KeyError):
            frame2.pair("1", "2")

    def test_rows_are_consistent(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        frame = engine.step(template_snapshot(t=1))
        rows = list(frame.rows())
        assert len(rows) == len(frame)
        for id_i, id_j, w, x, alpha, beta, mean, ew in rows:
            assert w <= x
            assert mean == pytest.approx(alpha / (alpha + beta))
            assert ew == pytest.approx(x * mean)


class TestDeterminism:
    def test_identical_streams_give_identical_state(self):
        rng = np.random.default_rng(55)
        snaps = [random_snapshot(rng, n=12, k=8, t=t) for t in range(1, 11)]

        def run(threads):
            eng = EngineState(registry=NodeRegistry.numeric(12))
            for s in snaps:
                eng.step(s, threads=threads)
            return eng

        a, b, c = run(1), run(1), run(4)
        for other in (b, c):
            assert np.array_equal(a._codes, other._codes)
            assert np.array_equal(a._alpha, other._alpha)
            assert np.array_equal(a._beta, other._beta)
            assert np.array_equal(a._last_x, other._last_x)

    def test_predictive_score_thread_invariant(self):
        rng = np.random.default_rng(56)
        snap = random_snapshot(rng, n=40, k=30, t=1)
        eng = EngineState(registry=NodeRegistry.numeric(40))
        eng.step(snap)
        obs = active_observations(random_snapshot(rng, n=40, k=30, t=2))
        assert eng.predictive_log_score(obs, threads=1) == eng.predictive_log_score(
            obs, threads=4
        )


class TestMeanMatrix:
    def test_dense_matrix_shape_and_symmetry(self):
        engine = EngineState(registry=NodeRegistry.numeric(5))
        engine.step(template_snapshot(t=1))
        m = engine.posterior_mean_matrix()
        assert m.shape == (5, 5)
        assert np.all(np.isnan(np.diag(m)))
        off = ~np.eye(5, dtype=bool)
        assert np.array_equal(m[off], m.T[off])
        assert m[0, 1] == pytest.approx(12 / 22)
