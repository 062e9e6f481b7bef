"""Error norms between density states.

For ``Delta = sum_j delta_j B_j / d`` the Frobenius norm is available in
coefficient space, ``||Delta||_F^2 = sum_j delta_j^2 / d``. Spectral and
Schatten norms need eigenvalues: full decomposition for small d, Lanczos on
the matrix-free operator otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .lanczos import lanczos_extremes
from .pauli import PauliExpansion, expansion_matvec, synthesize
from .state import NORM_DENSE_QUBIT_LIMIT, DensityState

#: Eigenvalues below this magnitude are dropped from Schatten sums.
EIGEN_ZERO = 1e-14


@dataclass(frozen=True)
class ErrorReport:
    spectral_sq: float
    frobenius_sq: float
    schatten: dict[float, float] = field(default_factory=dict)
    method: str = "dense"


def difference(a: DensityState, b2: DensityState) -> PauliExpansion:
    if a.qubits != b2.qubits:
        raise InputError(f"qubit counts differ: {a.qubits} vs {b2.qubits}")
    return a.expansion - b2.expansion


def frobenius_error_sq(a: DensityState, b2: DensityState) -> float:
    """``||a - b2||_F^2 = sum_j (beta^a_j - beta^b_j)^2 / d``, no matrices formed."""
    delta = difference(a, b2)
    return float(np.dot(delta.values, delta.values)) / a.dim


def _check_dense(b: int) -> None:
    if b > NORM_DENSE_QUBIT_LIMIT:
        raise InputError(f"{b} qubits exceeds the dense eigensolver limit of {NORM_DENSE_QUBIT_LIMIT}")


def difference_eigenvalues(delta_full: np.ndarray, b: int) -> np.ndarray:
    """Eigenvalues of ``sum_j delta_j B_j / d`` from length-4^b coefficient vectors.

    Leading axes are a batch; eigenvalues come back ascending along the last axis.
    """
    _check_dense(b)
    return np.linalg.eigvalsh(synthesize(delta_full, b) / 2**b)


def spectral_from_coefficients(delta_full: np.ndarray, b: int) -> np.ndarray:
    ev = difference_eigenvalues(delta_full, b)
    return np.maximum(np.abs(ev[..., 0]), np.abs(ev[..., -1]))


def _difference_operator(delta: PauliExpansion):
    d = delta.dim

    def mv(v):
        return expansion_matvec(delta, 1.0 / d, v)

    return mv


def spectral_error(
    a: DensityState,
    b2: DensityState,
    method: str = "auto",
    *,
    max_iter: int | None = None,
) -> float:
    """Largest absolute eigenvalue of ``a - b2``."""
    delta = difference(a, b2)
    if method == "auto":
        method = "dense" if a.qubits <= NORM_DENSE_QUBIT_LIMIT else "iterative"
    if method == "dense":
        return float(spectral_from_coefficients(delta.full(), a.qubits))
    if method == "iterative":
        if len(delta) == 0:
            return 0.0
        res = lanczos_extremes(_difference_operator(delta), a.dim, which="max_abs", max_iter=max_iter)
        return abs(res.max_abs.value)
    raise InputError(f"unknown method {method!r}")


def spectral_pair(a: DensityState, b2: DensityState, *, max_iter: int | None = None):
    """Lanczos Ritz pair for the largest-magnitude eigenvalue of ``a - b2``."""
    delta = difference(a, b2)
    return lanczos_extremes(
        _difference_operator(delta), a.dim, which="max_abs", max_iter=max_iter
    ).max_abs


def schatten_error(a: DensityState, b2: DensityState, s: float) -> float:
    """``(sum |lambda_i|^s)^(1/s)`` over the eigenvalues of ``a - b2``; s may be inf."""
    if not s >= 1:
        raise InputError(f"Schatten index must be >= 1, got {s}")
    delta = difference(a, b2)
    ev = np.abs(difference_eigenvalues(delta.full(), a.qubits))
    if math.isinf(s):
        return float(ev.max())
    ev = ev[ev >= EIGEN_ZERO]
    if ev.size == 0:
        return 0.0
    top = ev.max()
    return float(top * np.sum((ev / top) ** s) ** (1.0 / s))


@dataclass(frozen=True)
class NormCheck:
    ok: bool
    spectral: float
    frobenius: float
    max_row_sum: float
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def norm_inequality_check(a: DensityState, b2: DensityState, *, rtol: float = 1e-10) -> NormCheck:
    """Check ``spec <= frob <= sqrt(d) spec`` and ``spec <= max row sum`` on ``a - b2``."""
    delta = difference(a, b2)
    _check_dense(a.qubits)
    m = synthesize(delta.full(), a.qubits) / a.dim
    return dense_norm_check(m, rtol=rtol)


def dense_norm_check(m: np.ndarray, *, rtol: float = 1e-10) -> NormCheck:
    d = m.shape[0]
    ev = np.linalg.eigvalsh(m)
    spec = float(np.abs(ev).max()) if d else 0.0
    frob = float(np.linalg.norm(m, "fro"))
    row = float(np.abs(m).sum(axis=1).max())
    slack = rtol * max(spec, frob, row, 1e-300)
    problems = []
    if spec > frob + slack:
        problems.append(f"spectral {spec:.6g} > frobenius {frob:.6g}")
    if frob > math.sqrt(d) * spec + slack:
        problems.append(f"frobenius {frob:.6g} > sqrt(d) * spectral {math.sqrt(d) * spec:.6g}")
    if spec > row + slack:
        problems.append(f"spectral {spec:.6g} > max row sum {row:.6g}")
    return NormCheck(not problems, spec, frob, row, tuple(problems))


def error_report(
    a: DensityState,
    b2: DensityState,
    *,
    schatten: tuple[float, ...] = (),
    method: str = "auto",
) -> ErrorReport:
    if method == "auto":
        method = "dense" if a.qubits <= NORM_DENSE_QUBIT_LIMIT else "iterative"
    spec = spectral_error(a, b2, method)
    return ErrorReport(
        spectral_sq=spec**2,
        frobenius_sq=frobenius_error_sq(a, b2),
        schatten={s: schatten_error(a, b2, s) for s in schatten},
        method=method,
    )
