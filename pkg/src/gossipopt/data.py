"""Dataset ingestion and distribution across agents.

Parses LIBSVM-format text, splits samples over the network (uniform
shuffle or label-sorted for a strongly heterogeneous layout), and
measures how far apart the resulting local gradients are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolationError, ParseError
from .objective import (
    GlobalObjective,
    RegularizedLogisticObjective,
    global_loss_and_gradient,
    local_gradient,
)

IID_SHUFFLE = "iid_shuffle"
LABEL_SORTED = "label_sorted"
PARTITION_MODES = (IID_SHUFFLE, LABEL_SORTED)

# local blocks at most this many cells are stored dense for speed
_DENSE_CELL_LIMIT = 32768
_DENSE_DENSITY = 0.25


@dataclass(frozen=True)
class SparseSample:
    """One labelled sample; entries are (0-based index, value), indices strictly increasing."""

    label: int
    entries: tuple[tuple[int, float], ...]


@dataclass
class Partition:
    """Disjoint sample-index lists, one per agent, covering the dataset."""

    assignment: list[list[int]]
    mode: str


def parse_libsvm(source) -> tuple[list[SparseSample], int]:
    """Parse LIBSVM text into samples and the shared dimension.

    ``source`` may be a string or any iterable of lines. Each data line is
    "label idx:val idx:val ..." with 1-based, strictly increasing indices;
    '#' starts a comment, blank lines are skipped. Labels map to +/-1
    (any nonpositive numeric label reads as -1). The dimension is the
    largest index seen across the whole input.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source
    samples: list[SparseSample] = []
    dim = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label_value = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label token {tokens[0]!r}", lineno) from None
        label = 1 if label_value > 0 else -1
        entries: list[tuple[int, float]] = []
        prev = 0
        for token in tokens[1:]:
            idx_text, sep, val_text = token.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val pair, got {token!r}", lineno)
            try:
                idx = int(idx_text)
                val = float(val_text)
            except ValueError:
                raise ParseError(f"malformed idx:val pair {token!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not a positive integer", lineno)
            if idx <= prev:
                raise ParseError(
                    f"indices must be strictly increasing ({idx} after {prev})", lineno
                )
            prev = idx
            entries.append((idx - 1, val))
        if prev > dim:
            dim = prev
        samples.append(SparseSample(label=label, entries=tuple(entries)))
    return samples, dim


def dump_libsvm(samples: list[SparseSample]) -> str:
    """Serialize samples back to LIBSVM text (1-based indices, '\\n' endings)."""
    lines = []
    for s in samples:
        parts = ["+1" if s.label > 0 else "-1"]
        parts.extend(f"{idx + 1}:{val:.17g}" for idx, val in s.entries)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def partition(
    samples: list[SparseSample],
    n_agents: int,
    mode: str,
    rng: np.random.Generator,
) -> Partition:
    """Split sample indices into n contiguous blocks of near-equal size.

    Label-sorted ordering stable-sorts by label (-1 before +1) first;
    the shuffle mode uses a uniform permutation. Remainder samples go to
    the lowest-numbered agents.
    """
    m = len(samples)
    if n_agents < 1:
        raise ConfigurationError(f"need at least one agent, got {n_agents}")
    if m < n_agents:
        raise ConfigurationError(
            f"cannot split {m} samples over {n_agents} agents"
        )
    if mode == LABEL_SORTED:
        labels = np.array([s.label for s in samples])
        order = np.argsort(labels, kind="stable")
    elif mode == IID_SHUFFLE:
        order = rng.permutation(m)
    else:
        raise ConfigurationError(f"unknown partition mode {mode!r}")
    base, extra = divmod(m, n_agents)
    assignment = []
    start = 0
    for i in range(n_agents):
        size = base + (1 if i < extra else 0)
        assignment.append([int(j) for j in order[start : start + size]])
        start += size
    return Partition(assignment=assignment, mode=mode)


def samples_to_arrays(
    samples: list[SparseSample], dim: int, dense: bool | None = None
):
    """Stack samples into a feature matrix and a label vector.

    Returns CSR by default; small or dense blocks come back as ndarrays
    (much faster to evaluate), unless ``dense`` forces either layout.
    """
    m = len(samples)
    labels = np.array([float(s.label) for s in samples])
    nnz = sum(len(s.entries) for s in samples)
    if dense is None:
        cells = m * dim
        dense = cells <= _DENSE_CELL_LIMIT or (cells > 0 and nnz / cells > _DENSE_DENSITY)
    if dense:
        A = np.zeros((m, dim))
        for row, s in enumerate(samples):
            for idx, val in s.entries:
                A[row, idx] = val
        return A, labels
    data = np.empty(nnz)
    indices = np.empty(nnz, dtype=np.int64)
    indptr = np.zeros(m + 1, dtype=np.int64)
    pos = 0
    for row, s in enumerate(samples):
        for idx, val in s.entries:
            data[pos] = val
            indices[pos] = idx
            pos += 1
        indptr[row + 1] = pos
    A = sp.csr_matrix((data, indices, indptr), shape=(m, dim))
    return A, labels


def build_objectives(
    samples: list[SparseSample],
    dim: int,
    part: Partition,
    alpha: float,
    dense: bool | None = None,
) -> GlobalObjective:
    """Materialize one local objective per agent from a partition.

    The full feature matrix is stacked once and the per-agent blocks are
    row slices of it; the dense/sparse choice follows the largest block.
    """
    if dense is None:
        max_block = max(len(ix) for ix in part.assignment)
        nnz = sum(len(s.entries) for s in samples)
        cells = len(samples) * dim
        dense = max_block * dim <= _DENSE_CELL_LIMIT or (
            cells > 0 and nnz / cells > _DENSE_DENSITY
        )
    A, y = samples_to_arrays(samples, dim, dense=dense)
    locals_ = [
        RegularizedLogisticObjective(A[idx_list], y[idx_list], alpha)
        for idx_list in part.assignment
    ]
    return GlobalObjective(locals_)


def estimate_heterogeneity(glob: GlobalObjective, x: np.ndarray) -> float:
    """Mean squared deviation of local gradients from the global gradient at x."""
    _, grad = global_loss_and_gradient(glob, x)
    total = 0.0
    for obj in glob.locals:
        diff = local_gradient(obj, x) - grad
        total += float(diff @ diff)
    return total / glob.n_agents


def synthetic_blobs(
    m: int,
    dim: int,
    seed: int,
    separation: float = 4.0,
    scale: float = 1.0,
) -> list[SparseSample]:
    """Two separable Gaussian blobs, one per label, as dense sparse samples.

    The class means sit at (separation/2) along two orthogonal random
    unit directions, one per label, with isotropic noise of the given
    scale. Keeping the means non-antipodal matters: it makes the local
    gradients of label-skewed agents genuinely disagree, which is the
    whole point of a heterogeneous layout. Labels are balanced (the odd
    sample, if any, is positive).
    """
    if m < 1:
        raise ContractViolationError(f"need at least one sample, got {m}")
    if dim < 1:
        raise ContractViolationError(f"need at least one dimension, got {dim}")
    rng = np.random.default_rng(seed)
    if dim == 1:
        centers = {1: np.array([0.5 * separation]), -1: np.array([-0.5 * separation])}
    else:
        basis, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
        centers = {1: 0.5 * separation * basis[:, 0], -1: 0.5 * separation * basis[:, 1]}
    n_pos = (m + 1) // 2
    labels = np.where(rng.permutation(m) < n_pos, 1, -1)
    samples = []
    for label in labels:
        x = centers[int(label)] + scale * rng.standard_normal(dim)
        entries = tuple((k, float(x[k])) for k in range(dim))
        samples.append(SparseSample(label=int(label), entries=entries))
    return samples
