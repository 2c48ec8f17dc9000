"""Snapshot ingestion and result export.

Snapshot streams are tab-separated edge lists, one link per line:
``t<TAB>source_id<TAB>target_id`` with ``#`` comment lines ignored and step
indices nondecreasing. Projection results leave either as one record per
active pair per step or as dense mean-attraction matrices, with numeric
fields carrying six significant digits. All writers produce byte-identical
output for identical inputs, whatever the worker thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np
import polars as pl

from .errors import ConfigError, ParseError, SequencingError
from .projection import BipartiteSnapshot, NodeRegistry, ProjectionFrame

SIGNIFICANT_DIGITS = 6
STAT_COLUMNS = ("alpha", "beta", "e_pi", "e_w")


@dataclass(frozen=True)
class SnapshotRecord:
    """One parsed edge-list line."""

    t: int
    source_id: str
    target_id: str


@dataclass(eq=False)
class RunConfig:
    """Everything a projection run needs besides the snapshots themselves."""

    prior_alpha: float = 10.0
    prior_beta: float = 10.0
    mode: str = "cumulative"
    kappa: float | None = None
    bank_grid: tuple[float, ...] | None = None
    bank_discount: float = 0.98
    dense: bool = False
    stats: tuple[str, ...] = STAT_COLUMNS
    threads: int = 1

    def __post_init__(self):
        if not (self.prior_alpha > 0.0 and self.prior_beta > 0.0):
            raise ConfigError(
                f"prior parameters must be positive, got "
                f"({self.prior_alpha}, {self.prior_beta})"
            )
        if self.mode not in ("cumulative", "mixed", "bank"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "mixed":
            if self.kappa is None or not 0.0 <= self.kappa <= 1.0:
                raise ConfigError(f"mixed mode needs kappa in [0, 1], got {self.kappa}")
        elif self.kappa is not None:
            raise ConfigError(f"kappa is only valid in mixed mode")
        if self.mode == "bank":
            if not self.bank_grid:
                raise ConfigError("bank mode needs at least one kappa candidate")
        elif self.bank_grid is not None:
            raise ConfigError("bank_grid is only valid in bank mode")
        unknown = set(self.stats) - set(STAT_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown statistics flags {sorted(unknown)}")
        self.stats = tuple(c for c in STAT_COLUMNS if c in set(self.stats))
        if self.threads < 1:
            raise ConfigError(f"thread count must be at least 1, got {self.threads}")


def iter_records(lines: Iterable[str]) -> Iterator[SnapshotRecord]:
    """Parse raw edge-list lines, reporting the offending line on failure."""
    last_t = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(parts)}", line_no
            )
        t_text, source_id, target_id = parts
        try:
            t = int(t_text)
        except ValueError:
            raise ParseError(f"step index {t_text!r} is not an integer", line_no)
        if t < 0:
            raise ParseError(f"step index must be nonnegative, got {t}", line_no)
        if not source_id or not target_id:
            raise ParseError("empty node identifier", line_no)
        if last_t is not None and t < last_t:
            raise SequencingError(
                f"line {line_no}: step index decreased from {last_t} to {t}"
            )
        last_t = t
        yield SnapshotRecord(t=t, source_id=source_id, target_id=target_id)


@dataclass(eq=False)
class ParsedStream:
    """Snapshots plus the registries built while reading them."""

    snapshots: list[BipartiteSnapshot]
    sources: NodeRegistry
    targets: NodeRegistry


def parse_snapshots(lines: Iterable[str]) -> ParsedStream:
    """Group edge-list lines into snapshots, registering identifiers.

    Steps missing from the file (gaps in t) become empty snapshots, so the
    result is always a consecutive stream. Duplicate links within one step
    collapse to a single link.
    """
    sources = NodeRegistry()
    targets = NodeRegistry()
    snapshots: list[BipartiteSnapshot] = []
    cur_t: int | None = None
    cur_links: list[tuple[int, int]] = []

    def finalize(t: int) -> None:
        snapshots.append(
            BipartiteSnapshot(
                t=t, source_count=len(sources), target_count=len(targets),
                links=np.array(cur_links, dtype=np.int64).reshape(-1, 2),
            )
        )

    for rec in iter_records(lines):
        if cur_t is None:
            cur_t = rec.t
        elif rec.t > cur_t:
            finalize(cur_t)
            cur_links = []
            for gap_t in range(cur_t + 1, rec.t):
                finalize(gap_t)
            cur_t = rec.t
        cur_links.append((sources.index(rec.source_id), targets.index(rec.target_id)))
    if cur_t is not None:
        finalize(cur_t)
    return ParsedStream(snapshots=snapshots, sources=sources, targets=targets)


def load_snapshots(path) -> ParsedStream:
    """Parse an edge-list file, preferring a vectorized bulk reader.

    The bulk reader handles the common case (clean tab-separated triples);
    anything unusual falls back to the line-by-line parser, which produces
    precise, line-numbered errors. Both paths yield identical streams.
    """
    path = Path(path)
    try:
        return _load_snapshots_bulk(path)
    except _BulkParseFallback:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_snapshots(fh)


class _BulkParseFallback(Exception):
    """Internal: the bulk reader met something it cannot classify precisely."""


def _first_seen_dense(series: pl.Series):
    """Dense indices in first-appearance order, registry, first-row indices."""
    cat = series.cast(pl.Categorical)
    dense = cat.to_physical().to_numpy().astype(np.int64)
    registry = NodeRegistry(cat.cat.get_categories().to_list())
    _, first_pos = np.unique(dense, return_index=True)
    return dense, registry, first_pos


def _load_snapshots_bulk(path: Path) -> ParsedStream:
    try:
        table = pl.read_csv(
            path, separator="\t", has_header=False, comment_prefix="#",
            quote_char=None, new_columns=["t", "source", "target"],
            schema={"t": pl.Int64, "source": pl.Utf8, "target": pl.Utf8},
        )
    except pl.exceptions.NoDataError:
        return ParsedStream(snapshots=[], sources=NodeRegistry(), targets=NodeRegistry())
    except pl.exceptions.PolarsError:
        raise _BulkParseFallback
    if table.null_count().sum_horizontal().item() > 0:
        raise _BulkParseFallback
    if len(table) == 0:
        return ParsedStream(snapshots=[], sources=NodeRegistry(), targets=NodeRegistry())

    t = table["t"].to_numpy()
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise _BulkParseFallback
    if (table["source"].str.len_chars() == 0).any() or (
        table["target"].str.len_chars() == 0
    ).any():
        raise _BulkParseFallback

    src_dense, sources, src_first = _first_seen_dense(table["source"])
    tgt_dense, targets, tgt_first = _first_seen_dense(table["target"])
    src_first_t = np.sort(t[src_first])
    tgt_first_t = np.sort(t[tgt_first])

    snapshots: list[BipartiteSnapshot] = []
    t_values = np.unique(t)
    bounds = np.searchsorted(t, t_values, side="left").tolist() + [len(t)]
    by_t = {
        int(tv): slice(bounds[k], bounds[k + 1]) for k, tv in enumerate(t_values)
    }
    for step in range(int(t_values[0]), int(t_values[-1]) + 1):
        n = int(np.searchsorted(src_first_t, step, side="right"))
        k = int(np.searchsorted(tgt_first_t, step, side="right"))
        rows = by_t.get(step)
        links = (
            np.column_stack([src_dense[rows], tgt_dense[rows]])
            if rows is not None
            else np.empty((0, 2), dtype=np.int64)
        )
        snapshots.append(
            BipartiteSnapshot(t=step, source_count=n, target_count=k, links=links)
        )
    return ParsedStream(snapshots=snapshots, sources=sources, targets=targets)


def round_significant(values, digits: int = SIGNIFICANT_DIGITS) -> np.ndarray:
    """Round floats to a number of significant digits, elementwise."""
    a = np.asarray(values, dtype=np.float64)
    out = a.copy()
    m = np.isfinite(a) & (a != 0.0)
    mag = np.floor(np.log10(np.abs(a[m])))
    scale = np.power(10.0, (digits - 1) - mag)
    out[m] = np.round(a[m] * scale) / scale
    return out


def format_number(value: float) -> str:
    """Render one number with six significant digits."""
    return f"{value:.6g}"


def write_snapshots(
    path, snapshots: Iterable[BipartiteSnapshot],
    sources: NodeRegistry, targets: NodeRegistry,
) -> Path:
    """Write a snapshot stream as a tab-separated edge list."""
    path = Path(path)
    src_ids = np.asarray(sources.ids(), dtype=str)
    tgt_ids = np.asarray(targets.ids(), dtype=str)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# t\tsource\ttarget\n")
        for snap in snapshots:
            if not len(snap.links):
                continue
            chunk = pl.DataFrame({
                "t": np.full(len(snap.links), snap.t, dtype=np.int64),
                "source": src_ids[snap.links[:, 0]],
                "target": tgt_ids[snap.links[:, 1]],
            })
            fh.write(chunk.write_csv(separator="\t", include_header=False))
    return path


class FrameRecordWriter:
    """Streams projection frames into one pair-records file.

    Rows are ordered by step, then by the lexicographically smaller node
    identifier of each pair (ties on the larger one). Float columns are
    rounded to six significant digits before the formatter sees them. The
    file is written in binary so the CSV encoder can emit bytes directly.
    """

    def __init__(self, path, config: RunConfig):
        self.path = Path(path)
        self.config = config
        self._fh: IO[bytes] = open(self.path, "wb")
        header = "\t".join(("t", "i", "j", "w", "x") + config.stats) + "\n"
        self._fh.write(header.encode("utf-8"))
        self._ids: pl.Series | None = None
        self._rank: np.ndarray | None = None

    def write_frame(self, frame: ProjectionFrame) -> None:
        registry = frame.registry
        if self._ids is None or len(self._ids) != len(registry):
            ids = registry.ids()
            self._ids = pl.Series("ids", ids)
            self._rank = np.empty(len(ids), dtype=np.int64)
            self._rank[np.argsort(np.asarray(ids, dtype=str))] = np.arange(len(ids))
        if not len(frame):
            return
        ri = self._rank[frame.i]
        rj = self._rank[frame.j]
        swap = rj < ri
        lo = np.where(swap, frame.j, frame.i)
        hi = np.where(swap, frame.i, frame.j)
        order = np.lexsort((self._rank[hi], self._rank[lo]))

        chunk = pl.DataFrame({
            "t": np.full(len(frame), frame.t, dtype=np.int64),
            "i": self._ids.gather(lo[order]),
            "j": self._ids.gather(hi[order]),
            "w": frame.w[order],
            "x": frame.x[order],
        })
        stat_values = {
            "alpha": frame.alpha, "beta": frame.beta,
            "e_pi": frame.mean_pi, "e_w": frame.expected_w,
        }
        for name in self.config.stats:
            chunk = chunk.with_columns(
                pl.Series(name, round_significant(stat_values[name][order]))
            )
        chunk.write_csv(self._fh, separator="\t", include_header=False)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FrameRecordWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def export_frames(frames: Iterable[ProjectionFrame], out_dir, config: RunConfig) -> Path:
    """Write frames as pair records to ``frames.tsv`` inside out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "frames.tsv"
    with FrameRecordWriter(path, config) as writer:
        for frame in frames:
            writer.write_frame(frame)
    return path


def write_dense_matrix(path, matrix: np.ndarray, ids: list[str]) -> Path:
    """Write one symmetric mean-attraction matrix; NaN marks the diagonal."""
    path = Path(path)
    rounded = round_significant(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node\t" + "\t".join(ids) + "\n")
        for node_id, row in zip(ids, rounded):
            fh.write(node_id + "\t" + "\t".join(format_number(v) for v in row) + "\n")
    return path


def dense_matrix_path(out_dir, t: int) -> Path:
    return Path(out_dir) / f"dense_t{t:06d}.tsv"


def read_pair_records(path) -> pl.DataFrame:
    """Load a pair-records file with identifier columns kept as text."""
    return pl.read_csv(
        path, separator="\t", schema_overrides={"i": pl.Utf8, "j": pl.Utf8}
    )


def write_key_values(path, rows: Iterable[tuple[str, object]]) -> Path:
    """Write a two-column key/value summary table."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key\tvalue\n")
        for key, value in rows:
            if isinstance(value, float):
                value = format_number(value)
            fh.write(f"{key}\t{value}\n")
    return path


def write_columns(path, columns: dict[str, Iterable]) -> Path:
    """Write named columns as a TSV table with six-significant-digit floats."""
    path = Path(path)
    names = list(columns)
    series = []
    for name in names:
        arr = np.asarray(columns[name])
        if arr.dtype.kind == "f":
            arr = round_significant(arr)
        series.append(arr)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(names) + "\n")
        table = pl.DataFrame({n: s for n, s in zip(names, series)})
        fh.write(table.write_csv(separator="\t", include_header=False))
    return path
