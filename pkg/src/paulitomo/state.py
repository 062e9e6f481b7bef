"""Density matrices in Pauli form, ``rho = I/d + sum_j beta_j B_j / d``.

Only the non-identity coefficients are stored; the identity coefficient is
fixed at 1, so every :class:`DensityState` has unit trace and is Hermitian by
construction. Positive semidefiniteness is a separate check.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._text import body_lines, parse_header
from .errors import FormatError, GenerationError, InputError
from .lanczos import lanczos_extremes
from .pauli import (
    DENSE_QUBIT_LIMIT,
    PauliExpansion,
    analyze,
    as_label,
    expansion_matvec,
    format_label,
    label_to_index,
    parse_label,
    synthesize,
)

PSD_TOLERANCE = 1e-10
DROP_TOLERANCE = 1e-14
#: Qubit count up to which eigenvalues are computed by full decomposition.
NORM_DENSE_QUBIT_LIMIT = 8
MAX_RETRIES = 10_000

STATE_FORMAT = "pauli-state v1"


@dataclass(frozen=True)
class DensityState:
    expansion: PauliExpansion

    @classmethod
    def maximally_mixed(cls, qubits: int) -> DensityState:
        return cls(PauliExpansion(qubits))

    @classmethod
    def from_terms(cls, qubits: int, terms: dict) -> DensityState:
        return cls(PauliExpansion.from_mapping(qubits, terms))

    @property
    def qubits(self) -> int:
        return self.expansion.qubits

    @property
    def dim(self) -> int:
        return self.expansion.dim

    def __len__(self) -> int:
        return len(self.expansion)

    def coefficient(self, label: str | Sequence[int]) -> float:
        return coefficient(self, label)

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def full(self) -> np.ndarray:
        """Length-4^b coefficient vector including the identity coefficient 1."""
        out = self.expansion.full()
        out[0] = 1.0
        return out


@dataclass(frozen=True)
class SparsityModel:
    """l_q ball ``sum |beta_j|^q <= budget``."""

    q: float
    budget: float

    def __post_init__(self):
        if not 0 <= self.q < 1:
            raise InputError(f"q must lie in [0, 1), got {self.q}")
        if self.budget <= 0:
            raise InputError(f"budget must be positive, got {self.budget}")

    def contains(self, state: DensityState) -> bool:
        return sparsity_norm(state, self.q) <= self.budget


@dataclass(frozen=True)
class SupportRule:
    """Support size ``round(factor * log(d))`` for generated states."""

    factor: float = 6.0
    log_base: str = "natural"
    rounding: str = "floor"

    def __post_init__(self):
        if self.log_base not in ("natural", "ten", "two"):
            raise InputError(f"unknown log base {self.log_base!r}")
        if self.rounding not in ("floor", "round"):
            raise InputError(f"unknown rounding {self.rounding!r}")

    def size(self, d: int) -> int:
        base = {"natural": math.e, "ten": 10.0, "two": 2.0}[self.log_base]
        x = self.factor * math.log(d) / math.log(base)
        # guard against 6*log2(32) = 29.999999... style rounding
        x = round(x, 9)
        return int(math.floor(x)) if self.rounding == "floor" else int(math.floor(x + 0.5))


def coefficient(state: DensityState, label: str | Sequence[int]) -> float:
    """``beta_j = tr(rho B_j)``; 1 for the identity, 0 for absent labels."""
    label = as_label(label)
    if len(label) != state.qubits:
        raise InputError(f"label {format_label(label)} does not have {state.qubits} qubits")
    if label_to_index(label) == 1:
        return 1.0
    return state.expansion.get(label)


def to_dense(state: DensityState) -> np.ndarray:
    if state.qubits > DENSE_QUBIT_LIMIT:
        raise InputError(f"{state.qubits} qubits exceeds the dense limit of {DENSE_QUBIT_LIMIT}")
    m = synthesize(state.full(), state.qubits) / state.dim
    return 0.5 * (m + m.conj().T)


def from_dense(
    m: np.ndarray, *, drop_tolerance: float = DROP_TOLERANCE, atol: float = 1e-9
) -> DensityState:
    """Pauli coefficients ``tr(m B_j)`` of a unit-trace Hermitian matrix."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.conj().T, rtol=0, atol=atol):
        raise InputError("matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1) > atol:
        raise InputError(f"matrix trace is {tr.real:.12g}, expected 1")
    b = m.shape[0].bit_length() - 1
    betas = analyze(m).real
    return DensityState(PauliExpansion.from_full(b, betas, drop_tolerance=drop_tolerance))


def _state_matvec(state: DensityState):
    d = state.dim
    exp = state.expansion

    def mv(v):
        return v / d + expansion_matvec(exp, 1.0 / d, v)

    return mv


def min_eigenvalue(state: DensityState, method: str = "auto") -> float:
    """Smallest eigenvalue of rho, by dense decomposition or matrix-free Lanczos."""
    if method == "auto":
        method = "dense" if state.qubits <= NORM_DENSE_QUBIT_LIMIT else "iterative"
    if method == "dense":
        if state.qubits > NORM_DENSE_QUBIT_LIMIT:
            raise InputError(
                f"{state.qubits} qubits exceeds the dense eigensolver limit of {NORM_DENSE_QUBIT_LIMIT}"
            )
        return float(np.linalg.eigvalsh(to_dense(state))[0])
    if method == "iterative":
        res = lanczos_extremes(_state_matvec(state), state.dim, which="smallest")
        return res.smallest.value
    raise InputError(f"unknown method {method!r}")


def is_physical(state: DensityState, tolerance: float = PSD_TOLERANCE) -> bool:
    return min_eigenvalue(state) >= -tolerance


def generate_state(
    b: int,
    rng: np.random.Generator,
    support_size: int | None = None,
    amplitude: float = 0.2,
    *,
    support_rule: SupportRule = SupportRule(),
    psd_tolerance: float = PSD_TOLERANCE,
    max_retries: int = MAX_RETRIES,
) -> tuple[DensityState, int]:
    """Draw a random sparse density state; returns ``(state, attempts)``.

    Each attempt picks ``support_size`` non-identity labels uniformly without
    replacement and gives them i.i.d. Uniform[-amplitude, amplitude]
    coefficients. Attempts are rejected until the matrix is PSD within
    ``psd_tolerance``.
    """
    if b < 1:
        raise InputError(f"qubit count must be >= 1, got {b}")
    d = 2**b
    if support_size is None:
        support_size = support_rule.size(d)
    if not 0 <= support_size <= d * d - 1:
        raise InputError(f"support size {support_size} outside [0, {d * d - 1}]")
    if not 0 < amplitude <= 1:
        raise InputError(f"amplitude must lie in (0, 1], got {amplitude}")
    for attempt in range(1, max_retries + 1):
        flat = rng.choice(d * d - 1, size=support_size, replace=False) + 1
        values = rng.uniform(-amplitude, amplitude, size=support_size)
        state = DensityState(PauliExpansion(b, flat, values))
        if support_size == 0 or min_eigenvalue(state) >= -psd_tolerance:
            return state, attempt
    raise GenerationError(
        f"no PSD state after {max_retries} attempts (qubits={b}, support={support_size}, "
        f"amplitude={amplitude})"
    )


def random_sparse_state(
    b: int,
    rng: np.random.Generator,
    support_size: int | None = None,
    amplitude: float = 0.2,
    **kwargs,
) -> DensityState:
    return generate_state(b, rng, support_size, amplitude, **kwargs)[0]


def sparsity_norm(state: DensityState, q: float) -> float:
    """``sum |beta_j|^q`` over stored coefficients, with ``0^0 = 0``."""
    if not 0 <= q <= 1:
        raise InputError(f"q must lie in [0, 1], got {q}")
    a = np.abs(state.expansion.values)
    a = a[a > 0]
    if q == 0:
        return float(a.size)
    return float(np.sum(a**q))


# ---------------------------------------------------------------------------
# Text format


def _format_float(x: float) -> str:
    return f"{x:.16e}"


def format_state(state: DensityState) -> str:
    lines = [f"{STATE_FORMAT} qubits={state.qubits}"]
    for label, value in zip(state.expansion.labels(), state.expansion.values.tolist()):
        lines.append(f"{format_label(label)} {_format_float(value)}")
    return "\n".join(lines) + "\n"


def parse_state(text: str, path: str | None = None) -> DensityState:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty state file", 1, path)
    b = parse_header(lines[0], STATE_FORMAT, ("qubits",), path)["qubits"]
    if b < 1:
        raise FormatError(f"qubits must be >= 1, got {b}", 1, path)
    terms = {}
    for no, tokens in body_lines(text):
        if len(tokens) != 2:
            raise FormatError("expected '<LABEL> <coefficient>'", no, path)
        try:
            label = parse_label(tokens[0])
            value = float(tokens[1])
        except (InputError, ValueError) as exc:
            raise FormatError(str(exc), no, path) from None
        if len(label) != b:
            raise FormatError(f"label {tokens[0]} does not have {b} qubits", no, path)
        if label_to_index(label) == 1:
            raise FormatError("the identity coefficient is implicit and must not be listed", no, path)
        if not math.isfinite(value):
            raise FormatError(f"coefficient {tokens[1]} is not finite", no, path)
        if label in terms:
            raise FormatError(f"duplicate label {tokens[0]}", no, path)
        terms[label] = value
    return DensityState(PauliExpansion.from_mapping(b, terms))


def save_state(state: DensityState, path: str | Path) -> None:
    Path(path).write_text(format_state(state))


def load_state(path: str | Path) -> DensityState:
    return parse_state(Path(path).read_text(), str(path))
