"""Sparse bipartite snapshots and the streaming pairwise belief engine.

A snapshot is one time step's boolean incidence structure between N source
nodes and K target nodes. Projecting a snapshot means counting, for every
unordered source pair, how many targets both touched (co-occurrences w) and
how many either touched (opportunities x), then folding (w, x) into the
pair's Beta belief. The engine keeps one belief per pair that has ever seen
an opportunity; everything else answers with the configured default prior.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from .errors import SequencingError
from .model import (
    PairObservation,
    PairPosterior,
    PosteriorSummary,
    _beta_binomial_log_pmf_arrays,
    _update_arrays,
    summarize,
)

# Pair keys are packed into one int64: high word = smaller index, low word =
# larger index. Keeps per-pair state in flat sorted arrays.
_CODE_SHIFT = 32
_CODE_MASK = (1 << _CODE_SHIFT) - 1

# Work items per parallel chunk. Fixed so that results never depend on the
# worker count, only on the data.
_CHUNK = 1 << 16


def _pack(i, j):
    return (np.asarray(i, dtype=np.int64) << _CODE_SHIFT) | np.asarray(j, dtype=np.int64)


def _unpack(codes):
    return codes >> _CODE_SHIFT, codes & _CODE_MASK


class NodeRegistry:
    """Bidirectional map between external node identifiers and dense indices.

    Identifiers register in first-seen order and keep their index forever,
    so a registry can only grow.
    """

    def __init__(self, ids: Iterable[str] = ()):
        self._ids: list[str] = []
        self._index: dict[str, int] = {}
        for node_id in ids:
            self.index(node_id)

    @classmethod
    def numeric(cls, n: int) -> "NodeRegistry":
        """Registry labelling indices 0..n-1 as "1".."n"."""
        return cls(str(i + 1) for i in range(n))

    def index(self, node_id: str) -> int:
        """Dense index for an identifier, registering it if unseen."""
        idx = self._index.get(node_id)
        if idx is None:
            idx = len(self._ids)
            self._index[node_id] = idx
            self._ids.append(node_id)
        return idx

    def get(self, node_id: str) -> int:
        """Dense index for a known identifier; KeyError if unregistered."""
        return self._index[node_id]

    def id_of(self, idx: int) -> str:
        return self._ids[idx]

    def ids(self) -> list[str]:
        return list(self._ids)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index


@dataclass(eq=False)
class BipartiteSnapshot:
    """One time step's links between source and target nodes.

    links is an (m, 2) integer array of (source_index, target_index) rows;
    it is deduplicated and sorted lexicographically on construction, so two
    snapshots built from the same link set compare identically.
    """

    t: int
    source_count: int
    target_count: int
    links: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"step index must be nonnegative, got {self.t}")
        if self.source_count < 0 or self.target_count < 0:
            raise ValueError("node counts must be nonnegative")
        links = np.asarray(self.links, dtype=np.int64).reshape(-1, 2)
        if links.size:
            if links[:, 0].min() < 0 or links[:, 0].max() >= self.source_count:
                raise ValueError("source index out of range")
            if links[:, 1].min() < 0 or links[:, 1].max() >= self.target_count:
                raise ValueError("target index out of range")
            # dedupe and sort lexicographically via packed codes
            codes = np.unique(_pack(links[:, 0], links[:, 1]))
            links = np.column_stack(_unpack(codes))
        self.links = links

    @classmethod
    def from_dense(cls, matrix, t: int = 1) -> "BipartiteSnapshot":
        """Snapshot from a dense boolean (or 0/1) incidence matrix."""
        m = np.asarray(matrix)
        rows, cols = np.nonzero(m)
        return cls(t=t, source_count=m.shape[0], target_count=m.shape[1],
                   links=np.column_stack([rows, cols]))

    def degrees(self) -> np.ndarray:
        """Per-source number of distinct targets."""
        return np.bincount(self.links[:, 0], minlength=self.source_count)

    def incidence(self) -> sp.csr_matrix:
        """Sparse 0/1 incidence matrix, sources by targets."""
        data = np.ones(len(self.links), dtype=np.int64)
        return sp.csr_matrix(
            (data, (self.links[:, 0], self.links[:, 1])),
            shape=(self.source_count, self.target_count),
        )

    def __len__(self) -> int:
        return len(self.links)


def co_occurrences(s: BipartiteSnapshot) -> dict[tuple[int, int], int]:
    """Shared-target counts for every unordered source pair with at least one.

    Equals the strict upper triangle of the incidence product B B^T; pairs
    with zero shared targets are omitted.
    """
    i, j, w = _cooccurrence_arrays(s)
    return {(int(a), int(b)): int(c) for a, b, c in zip(i, j, w)}


def opportunities(
    s: BipartiteSnapshot, pairs: Iterable[tuple[int, int]]
) -> dict[tuple[int, int], int]:
    """Union-of-targets counts x_ij = d_i + d_j - w_ij for requested pairs.

    Keys in the result are normalized to (min, max). Self-pairs are rejected;
    the projection never scores a node against itself.
    """
    d = s.degrees()
    wi, wj, wd = _cooccurrence_arrays(s)
    wmap = dict(zip(_pack(wi, wj).tolist(), wd.tolist()))
    out: dict[tuple[int, int], int] = {}
    for a, b in pairs:
        if a == b:
            raise ValueError(f"self-pair ({a}, {b}) has no opportunity count")
        if not (0 <= a < s.source_count and 0 <= b < s.source_count):
            raise ValueError(f"pair ({a}, {b}) out of range for {s.source_count} sources")
        lo, hi = (a, b) if a < b else (b, a)
        w = wmap.get((lo << _CODE_SHIFT) | hi, 0)
        out[(lo, hi)] = int(d[lo] + d[hi] - w)
    return out


def _cooccurrence_arrays(s: BipartiteSnapshot):
    """Upper-triangle nonzeros of B B^T as parallel (i, j, w) arrays.

    Output is sorted by (i, j); the product matrix is put in canonical order
    first so no extra sort is needed.
    """
    if not len(s.links):
        e = np.empty(0, dtype=np.int64)
        return e, e, e
    b = s.incidence()
    prod = (b @ b.T).tocsr()
    prod.sum_duplicates()
    prod.sort_indices()
    coo = prod.tocoo()
    mask = coo.row < coo.col
    i = coo.row[mask].astype(np.int64)
    j = coo.col[mask].astype(np.int64)
    w = coo.data[mask].astype(np.int64)
    return i, j, w


@dataclass(eq=False)
class PairActivity:
    """All pairs with x > 0 in one snapshot, sorted by packed pair code."""

    codes: np.ndarray
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray
    x: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)


# Enumerating the active pair set costs O(N^2); on a stream where the same
# nodes stay present step after step the set never changes, so the last
# enumeration is kept and reused. Key: (source_count, packed absent set).
_ENUM_CACHE: dict[tuple[int, bytes], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _enumerate_active_pairs(source_count: int, present: np.ndarray, absent: np.ndarray):
    key = (source_count, absent.tobytes())
    hit = _ENUM_CACHE.get(key)
    if hit is not None:
        return hit

    iu, ju = np.triu_indices(present.size, k=1)
    pp_i = present[iu]
    pp_j = present[ju]
    if absent.size:
        ca = np.repeat(present, absent.size)
        cb = np.tile(absent, present.size)
        i = np.concatenate([pp_i, np.minimum(ca, cb)])
        j = np.concatenate([pp_j, np.maximum(ca, cb)])
        codes = _pack(i, j)
        order = np.argsort(codes)
        codes, i, j = codes[order], i[order], j[order]
    else:
        # triu_indices walks rows in order, so the packed codes are sorted
        i, j = pp_i, pp_j
        codes = _pack(i, j)
    _ENUM_CACHE.clear()
    _ENUM_CACHE[key] = (codes, i, j)
    return codes, i, j


def active_observations(s: BipartiteSnapshot) -> PairActivity:
    """Per-pair (w, x) for every pair with at least one opportunity.

    A pair has x > 0 exactly when at least one member linked to a target, so
    the active set is all pairs among present nodes plus every cross pair of
    a present node with an absent one.
    """
    d = s.degrees()
    present = np.flatnonzero(d > 0)
    absent = np.flatnonzero(d == 0)
    codes, i, j = _enumerate_active_pairs(s.source_count, present, absent)

    wi, wj, wd = _cooccurrence_arrays(s)
    w = np.zeros(codes.size, dtype=np.int64)
    if wd.size:
        wcodes = _pack(wi, wj)
        pos = np.searchsorted(wcodes, codes)
        pos_safe = np.minimum(pos, wcodes.size - 1)
        hit = wcodes[pos_safe] == codes
        w[hit] = wd[pos_safe[hit]]
    x = d[i] + d[j] - w
    return PairActivity(codes=codes, i=i, j=j, w=w, x=x)


@dataclass(eq=False)
class ProjectionFrame:
    """Per-step projection output: one row per pair active at step t.

    Rows are sorted by (i, j) dense index; lookups are symmetric in the two
    node identifiers. alpha/beta are the belief parameters after the step,
    mean_pi and expected_w the corresponding point summaries.
    """

    t: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray
    x: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mean_pi: np.ndarray
    expected_w: np.ndarray
    registry: NodeRegistry
    _codes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._codes is None:
            self._codes = _pack(self.i, self.j)

    def __len__(self) -> int:
        return len(self.i)

    def pair(
        self, a: str, b: str
    ) -> tuple[PairObservation, PairPosterior, PosteriorSummary]:
        """Frame row for the pair of two node identifiers, order-free."""
        ia, ib = self.registry.get(a), self.registry.get(b)
        if ia == ib:
            raise ValueError(f"self-pair ({a}, {b}) is never projected")
        lo, hi = (ia, ib) if ia < ib else (ib, ia)
        code = (lo << _CODE_SHIFT) | hi
        pos = int(np.searchsorted(self._codes, code))
        if pos >= len(self._codes) or self._codes[pos] != code:
            raise KeyError(f"pair ({a}, {b}) not active at step {self.t}")
        return (
            PairObservation(int(self.w[pos]), int(self.x[pos])),
            PairPosterior(float(self.alpha[pos]), float(self.beta[pos])),
            PosteriorSummary(float(self.mean_pi[pos]), float(self.expected_w[pos])),
        )

    def rows(self) -> Iterator[tuple]:
        """Yield (id_i, id_j, w, x, alpha, beta, mean_pi, expected_w) rows."""
        for k in range(len(self.i)):
            yield (
                self.registry.id_of(int(self.i[k])),
                self.registry.id_of(int(self.j[k])),
                int(self.w[k]),
                int(self.x[k]),
                float(self.alpha[k]),
                float(self.beta[k]),
                float(self.mean_pi[k]),
                float(self.expected_w[k]),
            )


class EngineState:
    """Streaming belief table over source pairs, fed one snapshot at a time.

    Pair beliefs materialize lazily: a pair gets a record the first time it
    has an opportunity, and unmaterialized pairs answer queries with the
    default prior. Snapshots must arrive with consecutive step indices.
    Within a step all per-pair work is independent and is chunked across
    worker threads when threads > 1; chunk boundaries are fixed, so results
    are identical for every thread count.
    """

    def __init__(
        self,
        prior: tuple[float, float] = (10.0, 10.0),
        registry: NodeRegistry | None = None,
    ):
        prior_alpha, prior_beta = float(prior[0]), float(prior[1])
        if not (prior_alpha > 0.0 and prior_beta > 0.0):
            raise ValueError(f"prior parameters must be positive, got {prior}")
        self.prior_alpha = prior_alpha
        self.prior_beta = prior_beta
        self.registry = registry if registry is not None else NodeRegistry()
        self.current_step: int | None = None
        self._codes = np.empty(0, dtype=np.int64)
        self._alpha = np.empty(0, dtype=np.float64)
        self._beta = np.empty(0, dtype=np.float64)
        self._last_x = np.empty(0, dtype=np.int64)

    @property
    def num_pairs(self) -> int:
        """Number of materialized pair beliefs."""
        return len(self._codes)

    def state_bytes(self) -> int:
        """Memory held by the per-pair tables."""
        return (
            self._codes.nbytes + self._alpha.nbytes
            + self._beta.nbytes + self._last_x.nbytes
        )

    def step(
        self,
        snapshot: BipartiteSnapshot,
        kappa: float | None = None,
        threads: int = 1,
    ) -> ProjectionFrame:
        """Fold one snapshot into the belief table and report the active pairs.

        kappa=None applies the cumulative conjugate update; a value in [0, 1]
        applies the forgetful convex-mix update instead. Pairs without an
        opportunity this step are left untouched under either rule.
        """
        obs = active_observations(snapshot)
        return self.apply_observations(snapshot.t, obs, kappa=kappa, threads=threads)

    def apply_observations(
        self,
        t: int,
        obs: PairActivity,
        kappa: float | None = None,
        threads: int = 1,
    ) -> ProjectionFrame:
        """Low-level step on precomputed pair activity (shared by the bank)."""
        if kappa is not None and not 0.0 <= kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
        if self.current_step is not None and t != self.current_step + 1:
            raise SequencingError(
                f"expected step {self.current_step + 1}, got {t}"
            )

        cur_alpha, cur_beta, pos, found = self._gather(obs.codes)
        n = len(obs)
        new_alpha = np.empty(n, dtype=np.float64)
        new_beta = np.empty(n, dtype=np.float64)
        mean = np.empty(n, dtype=np.float64)
        ew = np.empty(n, dtype=np.float64)

        w = obs.w.astype(np.float64)
        x = obs.x.astype(np.float64)

        def work(lo: int, hi: int) -> None:
            a, b = _update_arrays(
                cur_alpha[lo:hi], cur_beta[lo:hi], w[lo:hi], x[lo:hi], kappa=kappa
            )
            new_alpha[lo:hi] = a
            new_beta[lo:hi] = b
            m = a / (a + b)
            mean[lo:hi] = m
            ew[lo:hi] = x[lo:hi] * m

        _map_chunks(n, threads, work)

        self._alpha[pos[found]] = new_alpha[found]
        self._beta[pos[found]] = new_beta[found]
        self._last_x[pos[found]] = obs.x[found]
        fresh = ~found
        if fresh.any():
            merged_codes = np.concatenate([self._codes, obs.codes[fresh]])
            merged_alpha = np.concatenate([self._alpha, new_alpha[fresh]])
            merged_beta = np.concatenate([self._beta, new_beta[fresh]])
            merged_x = np.concatenate([self._last_x, obs.x[fresh]])
            order = np.argsort(merged_codes)
            self._codes = merged_codes[order]
            self._alpha = merged_alpha[order]
            self._beta = merged_beta[order]
            self._last_x = merged_x[order]

        self.current_step = t
        return ProjectionFrame(
            t=t, i=obs.i, j=obs.j, w=obs.w, x=obs.x,
            alpha=new_alpha, beta=new_beta, mean_pi=mean, expected_w=ew,
            registry=self.registry, _codes=obs.codes,
        )

    def predictive_log_score(self, obs: PairActivity, threads: int = 1) -> float:
        """Sum of predictive log-pmf values of (w, x) under current beliefs.

        Evaluated before any update, with unmaterialized pairs scored under
        the default prior. The summation order is fixed by pair code, so the
        score is identical for every thread count.
        """
        cur_alpha, cur_beta, _, _ = self._gather(obs.codes)
        n = len(obs)
        out = np.empty(n, dtype=np.float64)

        def work(lo: int, hi: int) -> None:
            out[lo:hi] = _beta_binomial_log_pmf_arrays(
                obs.w[lo:hi], obs.x[lo:hi], cur_alpha[lo:hi], cur_beta[lo:hi]
            )

        _map_chunks(n, threads, work)
        return float(np.sum(out))

    def query_pair(self, a: str, b: str) -> tuple[PairPosterior, PosteriorSummary]:
        """Current belief and summary for a pair of node identifiers.

        Unmaterialized pairs report the default prior with zero expected
        weight. Unknown identifiers raise KeyError; self-pairs are rejected.
        """
        ia, ib = self.registry.get(a), self.registry.get(b)
        if ia == ib:
            raise ValueError(f"self-pair ({a}, {b}) is never projected")
        lo, hi = (ia, ib) if ia < ib else (ib, ia)
        code = (lo << _CODE_SHIFT) | hi
        pos = int(np.searchsorted(self._codes, code))
        if pos < len(self._codes) and self._codes[pos] == code:
            post = PairPosterior(float(self._alpha[pos]), float(self._beta[pos]))
            return post, summarize(post, int(self._last_x[pos]))
        post = PairPosterior(self.prior_alpha, self.prior_beta)
        return post, summarize(post, 0)

    def posterior_mean_matrix(self) -> np.ndarray:
        """Dense symmetric matrix of mean attraction over registered nodes.

        Unmaterialized pairs show the prior mean; the diagonal is NaN since
        self-association is never modelled.
        """
        n = len(self.registry)
        out = np.full((n, n), self.prior_alpha / (self.prior_alpha + self.prior_beta))
        i, j = _unpack(self._codes)
        keep = (i < n) & (j < n)
        m = self._alpha[keep] / (self._alpha[keep] + self._beta[keep])
        out[i[keep], j[keep]] = m
        out[j[keep], i[keep]] = m
        np.fill_diagonal(out, np.nan)
        return out

    def _gather(self, codes: np.ndarray):
        """Current (alpha, beta) per code, prior-filled for unknown codes."""
        if self._codes.size == codes.size and np.array_equal(self._codes, codes):
            # steady state: the active set is exactly the materialized set
            pos = np.arange(codes.size, dtype=np.int64)
            found = np.ones(codes.size, dtype=bool)
            return self._alpha.copy(), self._beta.copy(), pos, found
        pos = np.searchsorted(self._codes, codes)
        if self._codes.size:
            pos_safe = np.minimum(pos, self._codes.size - 1)
            found = self._codes[pos_safe] == codes
            pos = pos_safe
        else:
            found = np.zeros(codes.size, dtype=bool)
            pos = np.zeros(codes.size, dtype=np.int64)
        alpha = np.full(codes.size, self.prior_alpha)
        beta = np.full(codes.size, self.prior_beta)
        alpha[found] = self._alpha[pos[found]]
        beta[found] = self._beta[pos[found]]
        return alpha, beta, pos, found


def _map_chunks(n: int, threads: int, work) -> None:
    """Run work(lo, hi) over fixed-size chunks, optionally on a thread pool.

    Chunk boundaries depend only on n, never on the thread count, and every
    chunk writes to disjoint output slices.
    """
    if n == 0:
        return
    if threads <= 1 or n <= _CHUNK:
        work(0, n)
        return
    starts = list(range(0, n, _CHUNK))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, lo, min(lo + _CHUNK, n)) for lo in starts]
        for f in futures:
            f.result()
