"""Synthetic snapshot streams drawn cell-wise from seed probability matrices.

Each cell (i, k) of a seed matrix gives the per-step Bernoulli probability
that source i links target k. Streams may switch seed matrices at fixed
steps, which is how drifting regimes are simulated. Draws use a counter-based
generator keyed by (rng_seed, t), so any snapshot can be produced on its own,
in any order, and still match the full sequential run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import ConfigError
from .projection import BipartiteSnapshot


@dataclass(eq=False)
class SeedMatrix:
    """Per-cell Bernoulli success probabilities for one generating regime."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 2:
            raise ConfigError(f"seed matrix must be 2-d, got shape {p.shape}")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ConfigError("seed probabilities must lie in [0, 1]")
        self.probabilities = p

    @classmethod
    def from_text(cls, path) -> "SeedMatrix":
        """Load a seed matrix from a whitespace-separated numeric grid file."""
        return cls(np.atleast_2d(np.loadtxt(path, dtype=np.float64)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.probabilities.shape


@dataclass(eq=False)
class GeneratorConfig:
    """Ordered seed-matrix segments plus the master RNG seed.

    Steps are numbered from 1; segment durations are counted in steps and
    all segment matrices must share one shape.
    """

    segments: tuple[tuple[SeedMatrix, int], ...]
    rng_seed: int

    def __post_init__(self):
        segments = tuple((seed, int(steps)) for seed, steps in self.segments)
        if not segments:
            raise ConfigError("need at least one generator segment")
        shape = segments[0][0].shape
        for seed, steps in segments:
            if steps <= 0:
                raise ConfigError(f"segment durations must be positive, got {steps}")
            if seed.shape != shape:
                raise ConfigError(
                    f"segment shapes differ: {seed.shape} vs {shape}"
                )
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed must fit in an unsigned 64-bit integer")
        self.segments = segments
        self.rng_seed = int(self.rng_seed)

    @property
    def total_steps(self) -> int:
        return sum(steps for _, steps in self.segments)

    @property
    def shape(self) -> tuple[int, int]:
        return self.segments[0][0].shape

    def seed_at(self, t: int) -> SeedMatrix:
        """Seed matrix in force at step t (1-based)."""
        if not 1 <= t <= self.total_steps:
            raise ConfigError(f"step {t} outside 1..{self.total_steps}")
        upto = 0
        for seed, steps in self.segments:
            upto += steps
            if t <= upto:
                return seed
        raise AssertionError("unreachable")


def snapshot_at(config: GeneratorConfig, t: int) -> BipartiteSnapshot:
    """Draw snapshot t of a stream, independent of every other step.

    Cell (i, k) links when the (i*K + k)-th uniform of the step's dedicated
    Philox substream falls below the active seed probability.
    """
    probs = config.seed_at(t).probabilities
    n, k = probs.shape
    u = Generator(Philox(key=config.rng_seed).jumped(t)).random((n, k))
    rows, cols = np.nonzero(u < probs)
    return BipartiteSnapshot(
        t=t, source_count=n, target_count=k,
        links=np.column_stack([rows, cols]),
    )


def generate(config: GeneratorConfig) -> list[BipartiteSnapshot]:
    """Materialize the full snapshot stream, steps 1..total."""
    return [snapshot_at(config, t) for t in range(1, config.total_steps + 1)]


def builtin_seeds() -> tuple[SeedMatrix, SeedMatrix, SeedMatrix]:
    """The built-in 5x4 toy matrices: template, noisy seed, post-change seed.

    The template wires sources 1-2 to targets 1-2, sources 4-5 to targets
    3-4, and source 3 to everything. The noisy seed softens the template
    into link probabilities; the post-change seed rewires the groups so
    sources 1 and 4 (and 2 and 5) become the co-occurring pairs.
    """
    template = SeedMatrix(np.array([
        [1, 1, 0, 0],
        [1, 1, 0, 0],
        [1, 1, 1, 1],
        [0, 0, 1, 1],
        [0, 0, 1, 1],
    ], dtype=np.float64))
    stationary = SeedMatrix(np.array([
        [0.80, 0.90, 0.00, 0.00],
        [0.90, 0.70, 0.00, 0.00],
        [0.90, 0.80, 0.90, 0.90],
        [0.00, 0.00, 0.80, 0.90],
        [0.00, 0.00, 0.60, 0.90],
    ]))
    shifted = SeedMatrix(np.array([
        [0.90, 0.80, 0.00, 0.00],
        [0.00, 0.00, 0.90, 0.90],
        [0.80, 0.90, 0.80, 0.90],
        [0.90, 0.80, 0.00, 0.00],
        [0.00, 0.00, 0.90, 0.80],
    ]))
    return template, stationary, shifted
