"""Tabular datasets with typed columns, CSV round-trip, and entropy-based
binning of continuous features.

A :class:`Dataset` is an immutable row-major table.  Continuous columns hold
real values, nominal columns hold category indices ``0..arity-1``.  Class
labels are optional per row; :data:`MISSING_LABEL` marks a row without one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MISSING_LABEL = -1
MISSING_TOKEN = "?"


class SchemaError(ValueError):
    """File contents do not match the declared column layout."""


@dataclass(frozen=True)
class FeatureKind:
    """Column type: continuous ("num") or nominal ("cat") with a category count.

    Nominal columns produced by binning a continuous feature may degenerate to
    a single category, so ``arity >= 1`` is accepted.
    """

    kind: str
    arity: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("num", "cat"):
            raise ValueError(f"unknown feature kind: {self.kind!r}")
        if self.kind == "cat":
            if self.arity is None or int(self.arity) < 1:
                raise ValueError("nominal feature needs arity >= 1")
            object.__setattr__(self, "arity", int(self.arity))
        elif self.arity is not None:
            raise ValueError("continuous feature carries no arity")

    @classmethod
    def continuous(cls) -> "FeatureKind":
        return cls("num")

    @classmethod
    def nominal(cls, arity: int) -> "FeatureKind":
        return cls("cat", arity)

    @property
    def is_nominal(self) -> bool:
        return self.kind == "cat"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature table with per-column kinds and optional labels.

    ``X`` is ``(n_rows, n_features)`` float64; nominal cells store integral
    category indices.  ``labels`` is ``(n_rows,)`` int64 with
    :data:`MISSING_LABEL` for unlabeled rows.  NaN is tolerated only in
    continuous columns (a to-be-binarized target); nominal cells and labels
    must be in range.
    """

    name: str
    X: np.ndarray
    meta: tuple[FeatureKind, ...]
    labels: np.ndarray
    n_classes: int
    columns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        X = _readonly(np.asarray(self.X, dtype=float))
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        object.__setattr__(self, "X", X)
        meta = tuple(self.meta)
        if len(meta) != X.shape[1]:
            raise ValueError("meta length must equal the number of columns")
        object.__setattr__(self, "meta", meta)
        labels = _readonly(np.asarray(self.labels, dtype=np.int64))
        if labels.shape != (X.shape[0],):
            raise ValueError("labels must be one entry per row")
        object.__setattr__(self, "labels", labels)
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        cols = tuple(self.columns) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(cols) != X.shape[1]:
            raise ValueError("columns length must equal the number of columns")
        object.__setattr__(self, "columns", cols)

        for j, kind in enumerate(meta):
            col = X[:, j]
            if kind.is_nominal:
                if col.size and (np.any(~np.isfinite(col)) or np.any(col != np.floor(col))):
                    raise ValueError(f"column {j} holds non-integral nominal values")
                if col.size and (col.min() < 0 or col.max() >= kind.arity):
                    raise ValueError(f"column {j} has category outside 0..{kind.arity - 1}")
            else:
                if np.any(np.isinf(col)):
                    raise ValueError(f"column {j} holds non-finite values")
        bad = (labels != MISSING_LABEL) & ((labels < 0) | (labels >= self.n_classes))
        if np.any(bad):
            raise ValueError("labels must be missing or in 0..n_classes-1")

    # -- basic accessors ---------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != MISSING_LABEL

    @property
    def continuous_columns(self) -> tuple[int, ...]:
        return tuple(j for j, k in enumerate(self.meta) if not k.is_nominal)

    @property
    def nominal_columns(self) -> tuple[int, ...]:
        return tuple(j for j, k in enumerate(self.meta) if k.is_nominal)

    def is_fully_labeled(self) -> bool:
        return bool(np.all(self.labeled_mask))

    # -- derived copies ----------------------------------------------------

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        """Same features, new label vector (shares the feature matrix)."""
        return Dataset(self.name, self.X, self.meta, labels, self.n_classes, self.columns)

    def with_name(self, name: str) -> "Dataset":
        return Dataset(name, self.X, self.meta, self.labels, self.n_classes, self.columns)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.name, self.X[rows], self.meta, self.labels[rows],
                       self.n_classes, self.columns)


@dataclass(frozen=True)
class LabeledSplit:
    """Disjoint partition of a training table into labeled and unlabeled rows."""

    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray

    def __post_init__(self) -> None:
        lab = _readonly(np.unique(np.asarray(self.labeled_idx, dtype=np.int64)))
        unl = _readonly(np.unique(np.asarray(self.unlabeled_idx, dtype=np.int64)))
        if np.intersect1d(lab, unl).size:
            raise ValueError("labeled and unlabeled index sets overlap")
        object.__setattr__(self, "labeled_idx", lab)
        object.__setattr__(self, "unlabeled_idx", unl)

    @classmethod
    def for_data(cls, data: Dataset, labeled_idx) -> "LabeledSplit":
        """Build a split covering every row of ``data``; labeled rows must carry labels."""
        lab = np.unique(np.asarray(labeled_idx, dtype=np.int64))
        mask = np.zeros(data.n_rows, dtype=bool)
        mask[lab] = True
        split = cls(lab, np.flatnonzero(~mask))
        split.validate(data)
        return split

    @property
    def n(self) -> int:
        return self.labeled_idx.size + self.unlabeled_idx.size

    def validate(self, data: Dataset) -> None:
        if self.n != data.n_rows:
            raise ValueError("split does not cover every row exactly once")
        if self.labeled_idx.size and (self.labeled_idx.min() < 0 or
                                      self.labeled_idx.max() >= data.n_rows):
            raise ValueError("labeled index out of range")
        if self.unlabeled_idx.size and (self.unlabeled_idx.min() < 0 or
                                        self.unlabeled_idx.max() >= data.n_rows):
            raise ValueError("unlabeled index out of range")
        if np.any(data.labels[self.labeled_idx] == MISSING_LABEL):
            raise ValueError("labeled rows must carry labels")


def masked_labels(data: Dataset, split: LabeledSplit) -> np.ndarray:
    """Label vector with unlabeled rows forced to :data:`MISSING_LABEL`.

    Learning code should consume this instead of ``data.labels`` so hidden
    ground truth on unlabeled rows can never leak into training.
    """
    out = data.labels.copy()
    out[split.unlabeled_idx] = MISSING_LABEL
    return out


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_header(header: str) -> list[tuple[str, str, int | None]]:
    """Parse ``name:type`` declarations; type is num, cat, cat(K) or class."""
    cols: list[tuple[str, str, int | None]] = []
    n_class = 0
    for part in header.strip().split(","):
        if ":" not in part:
            raise SchemaError(f"malformed column declaration: {part!r}")
        name, kind = part.rsplit(":", 1)
        name, kind = name.strip(), kind.strip()
        arity = None
        if kind.startswith("cat(") and kind.endswith(")"):
            try:
                arity = int(kind[4:-1])
            except ValueError as exc:
                raise SchemaError(f"bad arity in {part!r}") from exc
            if arity < 1:
                raise SchemaError(f"arity must be >= 1 in {part!r}")
            kind = "cat"
        if kind not in ("num", "cat", "class"):
            raise SchemaError(f"unknown column type {kind!r} for {name!r}")
        if kind == "class":
            n_class += 1
            if n_class > 1:
                raise SchemaError("more than one class column declared")
        cols.append((name, kind, arity))
    return cols


def _encode_categories(tokens: list[str], where: str,
                       fixed_arity: int | None) -> tuple[np.ndarray, int]:
    """Map raw category tokens to indices.

    All-integer tokens pass through (arity = max + 1); otherwise the sorted
    distinct tokens define the index order.  A fixed arity restricts tokens to
    integer indices below it.
    """
    if fixed_arity is not None:
        vals = np.empty(len(tokens))
        for i, tok in enumerate(tokens):
            try:
                v = int(tok)
            except ValueError as exc:
                raise SchemaError(f"unknown category {tok!r} in {where}") from exc
            if not 0 <= v < fixed_arity:
                raise SchemaError(f"unknown category {tok!r} in {where}")
            vals[i] = v
        return vals, fixed_arity
    try:
        ints = [int(t) for t in tokens]
    except ValueError:
        order = {t: i for i, t in enumerate(sorted(set(tokens)))}
        return np.array([order[t] for t in tokens], dtype=float), len(order)
    vals = np.asarray(ints, dtype=float)
    if vals.size and vals.min() < 0:
        raise SchemaError(f"negative category index in {where}")
    return vals, int(vals.max()) + 1 if vals.size else 1


def load_table(path, schema: str | None = None) -> Dataset:
    """Read a dataset from CSV.

    The first line is the header unless ``schema`` supplies one (in which case
    every line is data).  Header syntax: ``name:type,...`` with type ``num``,
    ``cat``, ``cat(K)`` or ``class``; ``?`` marks a missing class label and,
    in a num column, a missing to-be-binarized target value.
    """
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if schema is None:
        if not lines:
            raise SchemaError(f"{path} is empty")
        header, rows = lines[0], lines[1:]
    else:
        header, rows = schema, lines
    cols = _parse_header(header)
    width = len(cols)

    cells: list[list[str]] = []
    for i, line in enumerate(rows):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != width:
            raise SchemaError(f"row width {len(parts)} != {width} columns at data line {i + 1}")
        cells.append(parts)

    n = len(cells)
    feat_names: list[str] = []
    meta: list[FeatureKind] = []
    columns: list[np.ndarray] = []
    labels = np.full(n, MISSING_LABEL, dtype=np.int64)
    n_classes = 2
    have_class = False

    for j, (name, kind, fixed_arity) in enumerate(cols):
        tokens = [row[j] for row in cells]
        if kind == "num":
            vals = np.empty(n)
            for i, tok in enumerate(tokens):
                if tok in ("", MISSING_TOKEN):
                    vals[i] = np.nan
                    continue
                try:
                    vals[i] = float(tok)
                except ValueError as exc:
                    raise SchemaError(f"non-numeric value {tok!r} in column {name!r}") from exc
            feat_names.append(name)
            meta.append(FeatureKind.continuous())
            columns.append(vals)
        elif kind == "cat":
            vals, arity = _encode_categories(tokens, f"column {name!r}", fixed_arity)
            feat_names.append(name)
            meta.append(FeatureKind.nominal(arity))
            columns.append(vals)
        else:  # class
            have_class = True
            present = [(i, t) for i, t in enumerate(tokens) if t != MISSING_TOKEN and t != ""]
            if present:
                vals, k = _encode_categories([t for _, t in present], "class column", None)
                for (i, _), v in zip(present, vals):
                    labels[i] = int(v)
                n_classes = max(2, k)

    X = np.column_stack(columns) if columns else np.empty((n, 0))
    if not have_class and n:
        labels = np.full(n, MISSING_LABEL, dtype=np.int64)
    return Dataset(path.stem, X, tuple(meta), labels, n_classes, tuple(feat_names))


def save_table(data: Dataset, path) -> None:
    """Write ``data`` in the same CSV format :func:`load_table` reads."""
    parts = []
    for name, kind in zip(data.columns, data.meta):
        parts.append(f"{name}:cat({kind.arity})" if kind.is_nominal else f"{name}:num")
    parts.append("class:class")
    lines = [",".join(parts)]
    nominal = [k.is_nominal for k in data.meta]
    for i in range(data.n_rows):
        row = []
        for j in range(data.n_features):
            v = data.X[i, j]
            row.append(str(int(v)) if nominal[j] else (MISSING_TOKEN if math.isnan(v) else repr(float(v))))
        y = data.labels[i]
        row.append(MISSING_TOKEN if y == MISSING_LABEL else str(int(y)))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Entropy-based binning of continuous features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscretizationMap:
    """Per continuous column, a strictly increasing tuple of cut points.

    Built against a specific column layout (``meta``); applying it to a table
    with different meta is rejected.
    """

    cuts: dict[int, tuple[float, ...]]
    meta: tuple[FeatureKind, ...]

    def __post_init__(self) -> None:
        cont = {j for j, k in enumerate(self.meta) if not k.is_nominal}
        if set(self.cuts) != cont:
            raise ValueError("map must cover exactly the continuous columns")
        for j, cs in self.cuts.items():
            if any(b <= a for a, b in zip(cs, cs[1:])):
                raise ValueError(f"cuts for column {j} are not strictly increasing")


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _best_boundary(values: np.ndarray, y: np.ndarray, n_classes: int):
    """Best class-boundary midpoint by information gain over a sorted block.

    Returns ``(gain, pos, cut, left_counts, right_counts)`` or None.  Ties in
    gain resolve to the lowest cut value.
    """
    n = values.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    prefix = np.cumsum(onehot, axis=0)
    total = prefix[-1]
    h_total = _entropy(total)

    # Runs of equal value; a boundary between two runs is a candidate unless
    # both runs are pure with the same class.
    edges = np.concatenate(([0], np.flatnonzero(np.diff(values) > 0) + 1, [n]))
    best = None
    for b in range(1, edges.size - 1):
        lo, pos, hi = edges[b - 1], edges[b], edges[b + 1]
        run_lo = prefix[pos - 1] - (prefix[lo - 1] if lo > 0 else 0.0)
        run_hi = prefix[hi - 1] - prefix[pos - 1]
        lo_nz = np.flatnonzero(run_lo)
        hi_nz = np.flatnonzero(run_hi)
        if lo_nz.size == 1 and hi_nz.size == 1 and lo_nz[0] == hi_nz[0]:
            continue
        left = prefix[pos - 1]
        right = total - left
        gain = h_total - (pos / n) * _entropy(left) - ((n - pos) / n) * _entropy(right)
        if best is None or gain > best[0] + 1e-12:
            cut = (values[pos - 1] + values[pos]) / 2.0
            best = (gain, int(pos), float(cut), left, right)
    return best


def _mdl_accepts(gain: float, n: int, h: float, hl: float, hr: float,
                 k: int, kl: int, kr: int) -> bool:
    delta = math.log2(3 ** k - 2) - (k * h - kl * hl - kr * hr)
    return gain > (math.log2(n - 1) + delta) / n


def _split_block(values: np.ndarray, y: np.ndarray, n_classes: int,
                 out: list[float]) -> None:
    if values.size < 2:
        return
    best = _best_boundary(values, y, n_classes)
    if best is None:
        return
    gain, pos, cut, left, right = best
    h = _entropy(left + right)
    hl, hr = _entropy(left), _entropy(right)
    k = int(np.count_nonzero(left + right))
    kl, kr = int(np.count_nonzero(left)), int(np.count_nonzero(right))
    if not _mdl_accepts(gain, values.size, h, hl, hr, k, kl, kr):
        return
    out.append(cut)
    _split_block(values[:pos], y[:pos], n_classes, out)
    _split_block(values[pos:], y[pos:], n_classes, out)


def discretize_mdl(data: Dataset, idx) -> DiscretizationMap:
    """Recursive entropy-minimizing cuts per continuous feature.

    A binary split is kept only while its information gain beats the minimum
    description length of encoding it; features never split get an empty cut
    tuple.  Only the given labeled rows feed the search.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("need at least one labeled row")
    y = data.labels[idx]
    if np.any(y == MISSING_LABEL):
        raise ValueError("all rows used for discretization must be labeled")

    cuts: dict[int, tuple[float, ...]] = {}
    for j in data.continuous_columns:
        values = data.X[idx, j]
        order = np.argsort(values, kind="stable")
        out: list[float] = []
        _split_block(values[order], y[order], data.n_classes, out)
        cuts[j] = tuple(sorted(out))
    return DiscretizationMap(cuts, data.meta)


def apply_cuts(data: Dataset, dmap: DiscretizationMap) -> Dataset:
    """Replace continuous columns by bin indices: value < cut goes left,
    value >= cut goes right; arity is ``len(cuts) + 1``."""
    if dmap.meta != data.meta:
        raise ValueError("map was built for a table with different meta")
    X = data.X.copy()
    meta = list(data.meta)
    for j, cs in dmap.cuts.items():
        X[:, j] = np.searchsorted(np.asarray(cs), data.X[:, j], side="right")
        meta[j] = FeatureKind.nominal(len(cs) + 1)
    return Dataset(data.name, X, tuple(meta), data.labels, data.n_classes, data.columns)
