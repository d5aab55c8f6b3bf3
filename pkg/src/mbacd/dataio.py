"""LibSVM text datasets.

Lines look like ``<label> <idx>:<val> <idx>:<val> ...`` with 1-based,
strictly increasing feature indices. Lines starting with ``#`` are comments.
Labels are normalized to -1/+1 (0 maps to -1).
"""
from dataclasses import dataclass

import numpy as np

DEFAULT_BUDGET = 50_000_000  # dense entries


class ParseError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Dataset:
    rows: int
    cols: int
    entries: tuple  # (row, col, value) triples, 0-based
    labels: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
            and np.array_equal(self.labels, other.labels)
        )


def _label(tok):
    y = float(tok)
    if y == 0:
        return -1.0
    if y not in (-1.0, 1.0):
        raise ValueError(f"label {tok!r} is not one of -1, 0, +1")
    return y


def parse_libsvm(path, dims=None):
    """Read a LibSVM file. ``dims=(m, n)`` overrides the inferred shape."""
    entries, labels = [], []
    n = 0
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            line = line.split("#", 1)[0]
            tokens = line.split()
            try:
                labels.append(_label(tokens[0]))
            except ValueError as err:
                raise ParseError(path, lineno, str(err)) from None
            row = len(labels) - 1
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(path, lineno, f"expected <index>:<value>, got {tok!r}")
                try:
                    i, x = int(idx), float(val)
                except ValueError:
                    raise ParseError(path, lineno, f"malformed feature {tok!r}") from None
                if i < 1:
                    raise ParseError(path, lineno, f"feature index {i} is not 1-based")
                if i == last:
                    raise ParseError(path, lineno, f"repeated feature index {i}")
                if i < last:
                    raise ParseError(path, lineno, f"feature indices not increasing at {i}")
                last = i
                n = max(n, i)
                entries.append((row, i - 1, x))
    m = len(labels)
    if dims is not None:
        dm, dn = dims
        if dm != m or dn < n:
            raise ValueError(f"{path}: --dims {dm},{dn} inconsistent with data ({m} rows, max index {n})")
        n = dn
    return Dataset(m, n, tuple(entries), np.array(labels))


def write_libsvm(ds, path):
    by_row = [[] for _ in range(ds.rows)]
    for r, c, x in ds.entries:
        by_row[r].append((c, x))
    with open(path, "w") as fh:
        for label, feats in zip(ds.labels, by_row):
            parts = ["+1" if label > 0 else "-1"]
            parts += [f"{c + 1}:{x!r}" for c, x in sorted(feats)]
            fh.write(" ".join(parts) + "\n")


def to_dense(ds, budget=DEFAULT_BUDGET):
    if ds.rows * ds.cols > budget:
        raise MemoryError(
            f"dense {ds.rows}x{ds.cols} matrix exceeds the budget of {budget} entries; "
            "use a diagonal smoothness estimate instead of the exact matrix"
        )
    A = np.zeros((ds.rows, ds.cols))
    for r, c, x in ds.entries:
        A[r, c] = x
    return A


def from_dense(A, labels):
    A = np.asarray(A, dtype=float)
    rows, cols = np.nonzero(A)
    entries = tuple((int(r), int(c), float(A[r, c])) for r, c in zip(rows, cols))
    return Dataset(A.shape[0], A.shape[1], entries, np.asarray(labels, dtype=float))


def make_toy_dataset(m, n, seed, density=0.3):
    """Sparse Gaussian features with labels from a random hyperplane plus noise."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    w = rng.standard_normal(n)
    labels = np.where(A @ w + 0.5 * rng.standard_normal(m) >= 0, 1.0, -1.0)
    return from_dense(A, labels)
