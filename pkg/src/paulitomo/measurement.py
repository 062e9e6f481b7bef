"""Simulated and recorded Pauli measurement counts.

Measuring ``B_j`` on n copies yields n outcomes in {+1, -1}; the number of
+1 outcomes is Binomial(n, (1 + beta_j)/2) and is all the estimator needs.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._text import body_lines, parse_header
from .errors import FormatError, InputError
from .pauli import as_label, format_label, index_to_label, label_to_index, parse_label
from .state import DensityState

RECORD_FORMAT = "pauli-counts v1"
_MAX_INDEX_QUBITS = 31  # flat indices are int64


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Counts of +1 outcomes per measured observable.

    ``indices`` are flat (0-based) label indices in ascending order; labels
    absent from the record were not measured.
    """

    qubits: int
    shots: int
    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        cnt = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if self.qubits < 1:
            raise InputError(f"qubit count must be >= 1, got {self.qubits}")
        if self.shots < 1:
            raise InputError(f"shots must be >= 1, got {self.shots}")
        if idx.shape != cnt.shape:
            raise InputError("indices and counts must have equal length")
        if np.any(idx == 0):
            raise InputError("the identity observable cannot be measured")
        if np.any(idx < 0) or np.any(idx >= 4**self.qubits):
            raise InputError("label index out of range")
        if np.any(cnt < 0) or np.any(cnt > self.shots):
            bad = int(np.flatnonzero((cnt < 0) | (cnt > self.shots))[0])
            raise InputError(
                f"count {cnt[bad]} for {format_label(index_to_label(int(idx[bad]) + 1, self.qubits))} "
                f"outside [0, {self.shots}]"
            )
        order = np.argsort(idx, kind="stable")
        idx, cnt = idx[order], cnt[order]
        if np.any(np.diff(idx) == 0):
            raise InputError("duplicate labels in record")
        idx.setflags(write=False)
        cnt.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", cnt)

    @classmethod
    def from_mapping(cls, qubits: int, shots: int, counts: dict) -> MeasurementRecord:
        idx = []
        for label in counts:
            label = as_label(label)
            if len(label) != qubits:
                raise InputError(f"label {format_label(label)} does not have {qubits} qubits")
            idx.append(label_to_index(label) - 1)
        return cls(qubits, shots, np.array(idx, dtype=np.int64), np.array(list(counts.values())))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MeasurementRecord):
            return NotImplemented
        return (
            self.qubits == other.qubits
            and self.shots == other.shots
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.counts, other.counts)
        )

    def __len__(self) -> int:
        return len(self.indices)

    def labels(self):
        return [index_to_label(int(f) + 1, self.qubits) for f in self.indices]

    def to_dict(self):
        return dict(zip(self.labels(), self.counts.tolist()))


@dataclass(frozen=True, eq=False)
class AverageOutcomes:
    """Sample means ``N_j = 2 count_j / n - 1`` keyed by flat index."""

    qubits: int
    shots: int
    indices: np.ndarray
    values: np.ndarray = field(repr=False)

    def to_dict(self):
        labels = [index_to_label(int(f) + 1, self.qubits) for f in self.indices]
        return dict(zip(labels, self.values.tolist()))


def all_nonidentity_indices(b: int) -> np.ndarray:
    if not 1 <= b <= _MAX_INDEX_QUBITS:
        raise InputError(f"qubit count must lie in [1, {_MAX_INDEX_QUBITS}], got {b}")
    return np.arange(1, 4**b, dtype=np.int64)


def all_nonidentity_labels(b: int) -> list[tuple[int, ...]]:
    """All ``4^b - 1`` non-identity labels in index order."""
    return [index_to_label(int(f) + 1, b) for f in all_nonidentity_indices(b)]


def _canonical_indices(labels: Iterable | None, b: int) -> np.ndarray:
    if labels is None:
        return all_nonidentity_indices(b)
    if isinstance(labels, np.ndarray):
        flat = labels.astype(np.int64).reshape(-1)
    else:
        flat = []
        for label in labels:
            label = as_label(label)
            if len(label) != b:
                raise InputError(f"label {format_label(label)} does not have {b} qubits")
            flat.append(label_to_index(label) - 1)
        flat = np.array(flat, dtype=np.int64)
    if np.any(flat == 0):
        raise InputError("the identity observable cannot be measured")
    return np.unique(flat)


def sample_measurements(
    state: DensityState,
    n: int,
    labels: Iterable | None,
    rng: np.random.Generator,
) -> MeasurementRecord:
    """Draw exact binomial counts for each requested observable.

    ``labels=None`` measures every non-identity observable. Labels (or flat
    index arrays) are sorted by index before drawing, so the caller's order
    never affects the result.
    """
    if n < 1:
        raise InputError(f"shots must be >= 1, got {n}")
    b = state.qubits
    flat = _canonical_indices(labels, b)
    beta = np.zeros(len(flat))
    exp = state.expansion
    pos = np.searchsorted(exp.indices, flat)
    hit = pos < len(exp.indices)
    hit[hit] = exp.indices[pos[hit]] == flat[hit]
    beta[hit] = exp.values[pos[hit]]
    if np.any(np.abs(beta) > 1):
        raise InputError("coefficient magnitude above 1: the state is not physical")
    p = np.clip((1.0 + beta) / 2.0, 0.0, 1.0)
    counts = rng.binomial(n, p)
    return MeasurementRecord(b, n, flat, counts)


def averages(record: MeasurementRecord) -> AverageOutcomes:
    values = 2.0 * record.counts / record.shots - 1.0
    return AverageOutcomes(record.qubits, record.shots, record.indices, values)


# ---------------------------------------------------------------------------
# Text format


def format_record(record: MeasurementRecord) -> str:
    lines = [f"{RECORD_FORMAT} qubits={record.qubits} shots={record.shots}"]
    for f, c in zip(record.indices.tolist(), record.counts.tolist()):
        lines.append(f"{format_label(index_to_label(f + 1, record.qubits))} {c}")
    return "\n".join(lines) + "\n"


def parse_record(text: str, path: str | None = None) -> MeasurementRecord:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty record file", 1, path)
    header = parse_header(lines[0], RECORD_FORMAT, ("qubits", "shots"), path)
    b, n = header["qubits"], header["shots"]
    if not 1 <= b <= _MAX_INDEX_QUBITS:
        raise FormatError(f"qubits must lie in [1, {_MAX_INDEX_QUBITS}], got {b}", 1, path)
    if n < 1:
        raise FormatError(f"shots must be >= 1, got {n}", 1, path)
    idx, cnt, seen = [], [], set()
    for no, tokens in body_lines(text):
        if len(tokens) != 2:
            raise FormatError("expected '<LABEL> <count>'", no, path)
        try:
            label = parse_label(tokens[0])
        except InputError as exc:
            raise FormatError(str(exc), no, path) from None
        try:
            count = int(tokens[1])
        except ValueError:
            raise FormatError(f"count {tokens[1]!r} is not an integer", no, path) from None
        if len(label) != b:
            raise FormatError(f"label {tokens[0]} does not have {b} qubits", no, path)
        j = label_to_index(label)
        if j == 1:
            raise FormatError("the identity observable cannot be measured", no, path)
        if not 0 <= count <= n:
            raise FormatError(f"count {count} outside [0, {n}]", no, path)
        if j in seen:
            raise FormatError(f"duplicate label {tokens[0]}", no, path)
        seen.add(j)
        idx.append(j - 1)
        cnt.append(count)
    return MeasurementRecord(b, n, np.array(idx, dtype=np.int64), np.array(cnt, dtype=np.int64))


def save_record(record: MeasurementRecord, path: str | Path) -> None:
    Path(path).write_text(format_record(record))


def load_record(path: str | Path) -> MeasurementRecord:
    return parse_record(Path(path).read_text(), str(path))


def exact_record(state: DensityState, n: int, labels: Sequence | None = None) -> MeasurementRecord:
    """Counts set to their rounded expectations ``n (1 + beta_j) / 2`` (noise-free proxy)."""
    flat = _canonical_indices(labels, state.qubits)
    full = state.expansion.full()
    counts = np.rint(n * (1.0 + full[flat]) / 2.0).astype(np.int64)
    return MeasurementRecord(state.qubits, n, flat, counts)
