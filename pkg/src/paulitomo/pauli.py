"""Tensor-product Pauli operators on b qubits.

A label is a tuple of symbols in {0, 1, 2, 3} (I, X, Y, Z) of length b.
Labels are numbered big-endian in base 4: the 1-based index of
``(l_1, ..., l_b)`` is ``1 + sum(l_k * 4**(b - k))``, so index 1 is the
identity and text labels sort in index order. Internally the library works
with the 0-based "flat" index ``j - 1``.

The first symbol acts on the most significant bit of the computational
basis index, matching ``np.kron(s_1, np.kron(s_2, ...))``.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

SYMBOLS = "IXYZ"

#: Largest qubit count for which explicit d x d matrices are built.
DENSE_QUBIT_LIMIT = 10

SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)

PauliLabel = tuple[int, ...]


def make_label(symbols: Iterable[int]) -> PauliLabel:
    label = tuple(int(s) for s in symbols)
    if not label:
        raise InputError("a Pauli label needs at least one qubit")
    if any(s < 0 or s > 3 for s in label):
        raise InputError(f"Pauli symbols must lie in 0..3, got {label}")
    return label


def parse_label(text: str) -> PauliLabel:
    """Parse a word over ``IXYZ`` such as ``"XZI"``."""
    if not text or any(c not in SYMBOLS for c in text):
        raise InputError(f"invalid Pauli label {text!r}; expected a word over I, X, Y, Z")
    return tuple(SYMBOLS.index(c) for c in text)


def format_label(label: Sequence[int]) -> str:
    return "".join(SYMBOLS[s] for s in label)


def as_label(label: str | Sequence[int]) -> PauliLabel:
    if isinstance(label, str):
        return parse_label(label)
    return make_label(label)


def label_to_index(label: str | Sequence[int]) -> int:
    """1-based index of ``label``; the identity maps to 1."""
    flat = 0
    for s in as_label(label):
        flat = 4 * flat + s
    return flat + 1


def index_to_label(j: int, b: int) -> PauliLabel:
    if b < 1:
        raise InputError(f"qubit count must be >= 1, got {b}")
    if not 1 <= j <= 4**b:
        raise InputError(f"index {j} out of range [1, {4**b}] for {b} qubits")
    flat = j - 1
    digits = []
    for _ in range(b):
        flat, r = divmod(flat, 4)
        digits.append(r)
    return tuple(reversed(digits))


def _check_vector(v: np.ndarray, b: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] != 2**b:
        raise InputError(f"vector of shape {v.shape} does not match {b} qubits (length {2**b})")
    return v


def pauli_matvec(label: str | Sequence[int], v: np.ndarray) -> np.ndarray:
    """Apply ``B_label`` to ``v`` one single-qubit factor at a time, in O(d b)."""
    label = as_label(label)
    b = len(label)
    v = _check_vector(v, b)
    t = v.reshape((2,) * b)
    for axis, s in enumerate(label):
        if s == 0:
            continue
        t = np.moveaxis(np.tensordot(SIGMA[s], t, axes=([1], [axis])), 0, axis)
    return np.ascontiguousarray(t).reshape(2**b)


def pauli_dense(label: str | Sequence[int], max_qubits: int = DENSE_QUBIT_LIMIT) -> np.ndarray:
    """Explicit Kronecker product ``sigma_{l_1} (x) ... (x) sigma_{l_b}``."""
    label = as_label(label)
    if len(label) > max_qubits:
        raise InputError(f"{len(label)} qubits exceeds the dense limit of {max_qubits}")
    out = np.ones((1, 1), dtype=np.complex128)
    for s in label:
        out = np.kron(out, SIGMA[s])
    return out


def trace_product(a: str | Sequence[int], b2: str | Sequence[int]) -> float:
    """``tr(B_a B_b2)``: d when the labels coincide, else 0."""
    a, b2 = as_label(a), as_label(b2)
    if len(a) != len(b2):
        raise InputError(f"label lengths differ: {len(a)} vs {len(b2)}")
    return float(2 ** len(a)) if a == b2 else 0.0


# ---------------------------------------------------------------------------
# Vectorised bit-mask representation


def flat_digits(flat: np.ndarray, b: int) -> np.ndarray:
    """Base-4 digits of flat indices, shape ``(len(flat), b)``, most significant first."""
    flat = np.asarray(flat, dtype=np.int64)
    shifts = 2 * np.arange(b - 1, -1, -1, dtype=np.int64)
    return (flat[:, None] >> shifts[None, :]) & 3


def _bit_masks(flat: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """X-mask, Z-mask and Y-count of each label (qubit 1 is the top bit)."""
    digits = flat_digits(flat, b)
    weights = np.left_shift(1, np.arange(b - 1, -1, -1, dtype=np.int64))
    has_x = (digits == 1) | (digits == 2)
    has_z = (digits == 2) | (digits == 3)
    xmask = (has_x * weights).sum(axis=1)
    zmask = (has_z * weights).sum(axis=1)
    ycount = (digits == 2).sum(axis=1)
    return xmask, zmask, ycount


def _apply_terms(
    flat: np.ndarray, coeffs: np.ndarray, b: int, v: np.ndarray, chunk: int
) -> np.ndarray:
    d = 2**b
    rows = np.arange(d, dtype=np.int64)
    out = np.zeros(d, dtype=np.complex128)
    for start in range(0, len(flat), chunk):
        xmask, zmask, ycount = _bit_masks(flat[start : start + chunk], b)
        # (B v)[k] = i^{nY} (-1)^{popcount((k ^ x) & z)} v[k ^ x]
        src = rows[None, :] ^ xmask[:, None]
        sign = 1 - 2 * (np.bitwise_count(src & zmask[:, None]) & 1).astype(np.int8)
        phase = (1j) ** (ycount % 4) * coeffs[start : start + chunk]
        out += (phase[:, None] * sign * v[src]).sum(axis=0)
    return out


class PauliExpansion:
    """Sparse real coefficients on non-identity Pauli labels.

    Stored as sorted flat indices (``j - 1``, never 0) and matching values.
    Instances are treated as immutable.
    """

    __slots__ = ("qubits", "indices", "values")

    def __init__(self, qubits: int, indices=(), values=()):
        if qubits < 1:
            raise InputError(f"qubit count must be >= 1, got {qubits}")
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if indices.shape != values.shape:
            raise InputError("indices and values must have equal length")
        if np.any(indices <= 0) or np.any(indices >= 4**qubits):
            raise InputError("expansion indices must address non-identity labels")
        if not np.all(np.isfinite(values)):
            raise InputError("expansion coefficients must be finite")
        order = np.argsort(indices, kind="stable")
        indices, values = indices[order], values[order]
        if np.any(np.diff(indices) == 0):
            raise InputError("duplicate labels in expansion")
        indices.setflags(write=False)
        values.setflags(write=False)
        self.qubits = int(qubits)
        self.indices = indices
        self.values = values

    @classmethod
    def from_mapping(cls, qubits: int, terms: Mapping) -> PauliExpansion:
        idx, vals = [], []
        for label, value in terms.items():
            label = as_label(label)
            if len(label) != qubits:
                raise InputError(f"label {format_label(label)} does not have {qubits} qubits")
            j = label_to_index(label)
            if j == 1:
                raise InputError("the identity label cannot carry a coefficient")
            idx.append(j - 1)
            vals.append(float(value))
        return cls(qubits, idx, vals)

    @classmethod
    def from_full(cls, qubits: int, full: np.ndarray, drop_tolerance: float = 0.0) -> PauliExpansion:
        """Build from a length-4^b coefficient vector; entry 0 (identity) is ignored."""
        full = np.asarray(full, dtype=np.float64)
        if full.shape != (4**qubits,):
            raise InputError(f"expected {4**qubits} coefficients, got shape {full.shape}")
        keep = np.flatnonzero(np.abs(full) > drop_tolerance) if drop_tolerance > 0 else np.flatnonzero(full)
        keep = keep[keep > 0]
        return cls(qubits, keep, full[keep])

    @property
    def dim(self) -> int:
        return 2**self.qubits

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliExpansion):
            return NotImplemented
        return (
            self.qubits == other.qubits
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"PauliExpansion(qubits={self.qubits}, terms={len(self)})"

    def labels(self) -> list[PauliLabel]:
        return [index_to_label(int(f) + 1, self.qubits) for f in self.indices]

    def to_dict(self) -> dict[PauliLabel, float]:
        return dict(zip(self.labels(), self.values.tolist()))

    def get(self, label: str | Sequence[int]) -> float:
        label = as_label(label)
        if len(label) != self.qubits:
            raise InputError(f"label {format_label(label)} does not have {self.qubits} qubits")
        flat = label_to_index(label) - 1
        pos = np.searchsorted(self.indices, flat)
        if pos < len(self.indices) and self.indices[pos] == flat:
            return float(self.values[pos])
        return 0.0

    def full(self) -> np.ndarray:
        """Dense length-4^b coefficient vector with 0 at the identity slot."""
        out = np.zeros(4**self.qubits)
        out[self.indices] = self.values
        return out

    def scaled(self, factor: float) -> PauliExpansion:
        return PauliExpansion(self.qubits, self.indices, self.values * factor)

    def __add__(self, other: PauliExpansion) -> PauliExpansion:
        if not isinstance(other, PauliExpansion):
            return NotImplemented
        if other.qubits != self.qubits:
            raise InputError(f"qubit counts differ: {self.qubits} vs {other.qubits}")
        idx = np.union1d(self.indices, other.indices)
        vals = np.zeros(len(idx))
        vals[np.searchsorted(idx, self.indices)] += self.values
        vals[np.searchsorted(idx, other.indices)] += other.values
        nz = vals != 0
        return PauliExpansion(self.qubits, idx[nz], vals[nz])

    def __sub__(self, other: PauliExpansion) -> PauliExpansion:
        if not isinstance(other, PauliExpansion):
            return NotImplemented
        return self + other.scaled(-1.0)


def expansion_matvec(
    coeffs: PauliExpansion | Mapping, scale: float, v: np.ndarray, *, chunk: int | None = None
) -> np.ndarray:
    """Compute ``scale * sum_j c_j B_j v`` without forming any matrix.

    Cost is O(s d) for s stored terms; terms are processed in chunks so the
    working set stays near ``chunk * d`` entries.
    """
    if not isinstance(coeffs, PauliExpansion):
        if not coeffs:
            raise InputError("cannot infer the qubit count of an empty mapping")
        b = len(as_label(next(iter(coeffs))))
        coeffs = PauliExpansion.from_mapping(b, coeffs)
    b = coeffs.qubits
    v = _check_vector(v, b)
    if len(coeffs) == 0:
        return np.zeros_like(v)
    if chunk is None:
        chunk = max(1, min(len(coeffs), (1 << 22) // v.shape[0]))
    return scale * _apply_terms(coeffs.indices, coeffs.values, b, v, chunk)


# ---------------------------------------------------------------------------
# Fast transforms between coefficient vectors and dense matrices

_SIGMA_T = np.ascontiguousarray(SIGMA.transpose(0, 2, 1))


def synthesize(full: np.ndarray, b: int) -> np.ndarray:
    """Dense ``sum_l full[l] B_l`` from a length-4^b coefficient vector, in O(b 4^b).

    Leading axes of ``full`` are treated as a batch.
    """
    full = np.asarray(full)
    if full.shape[-1:] != (4**b,):
        raise InputError(f"expected {4**b} coefficients, got shape {full.shape}")
    if b > DENSE_QUBIT_LIMIT:
        raise InputError(f"{b} qubits exceeds the dense limit of {DENSE_QUBIT_LIMIT}")
    batch = full.shape[:-1]
    nb = len(batch)
    t = full.astype(np.complex128).reshape(batch + (4,) * b)
    for _ in range(b):
        t = np.tensordot(t, SIGMA, axes=([nb], [0]))
    # trailing axes are now (i1, j1, i2, j2, ...)
    perm = list(range(nb)) + [nb + k for k in range(0, 2 * b, 2)] + [nb + k for k in range(1, 2 * b, 2)]
    d = 2**b
    return np.ascontiguousarray(t.transpose(perm)).reshape(batch + (d, d))


def analyze(m: np.ndarray) -> np.ndarray:
    """All traces ``tr(m B_l)`` as a length-4^b complex vector, in O(b 4^b)."""
    m = np.asarray(m, dtype=np.complex128)
    d = m.shape[0]
    if m.ndim != 2 or m.shape != (d, d) or d < 2 or d & (d - 1):
        raise InputError(f"expected a square matrix with power-of-two size, got {m.shape}")
    b = d.bit_length() - 1
    t = m.reshape((2,) * (2 * b))
    perm = [x for k in range(b) for x in (k, b + k)]
    t = t.transpose(perm)
    # tr(m B) = sum_{i,j} m[i, j] B[j, i]
    for _ in range(b):
        t = np.tensordot(t, _SIGMA_T, axes=([0, 1], [1, 2]))
    return t.reshape(4**b)
