"""Thresholding estimator for sparse density matrices.

Each measured ``N_j`` is hard- or soft-thresholded at ``varpi_j`` and the
survivors form ``rho_hat = I/d + sum_j beta_hat_j B_j / d``. The identity
coefficient is never touched, so every estimate has unit trace.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .measurement import MeasurementRecord, averages
from .norms import spectral_from_coefficients
from .pauli import PauliExpansion, index_to_label
from .state import DensityState, from_dense, to_dense

RULES = ("hard", "soft")
LOG_BASES = ("ten", "natural")
DEFAULT_HBAR = 1.01
DEFAULT_LOG_BASE = "ten"
DEFAULT_GRID_POINTS = 200


def _log(x: float, base: str) -> float:
    if base == "ten":
        return math.log10(x)
    if base == "natural":
        return math.log(x)
    raise InputError(f"unknown log base {base!r}; expected one of {LOG_BASES}")


def _check_rule(rule: str) -> str:
    if rule not in RULES:
        raise InputError(f"unknown threshold rule {rule!r}; expected hard or soft")
    return rule


@dataclass(frozen=True)
class ThresholdPolicy:
    """How thresholds are chosen.

    ``kind`` is one of ``universal``, ``individual``, ``fixed`` or
    ``optimal_grid``; only the fields relevant to the kind are used.
    """

    kind: str
    hbar: float = DEFAULT_HBAR
    log_base: str = DEFAULT_LOG_BASE
    varpi: float | None = None
    grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind in ("universal", "individual"):
            if not self.hbar > 1:
                raise InputError(f"hbar must exceed 1, got {self.hbar}")
            _log(2.0, self.log_base)
        elif self.kind == "fixed":
            if self.varpi is None or not self.varpi >= 0:
                raise InputError(f"fixed threshold must be >= 0, got {self.varpi}")
        elif self.kind == "optimal_grid":
            g = np.asarray(self.grid if self.grid is not None else (), dtype=float)
            if g.size == 0:
                raise InputError("threshold grid must be nonempty")
            if np.any(g < 0) or np.any(np.diff(g) <= 0):
                raise InputError("threshold grid must be nonnegative and strictly ascending")
            object.__setattr__(self, "grid", tuple(g.tolist()))
        else:
            raise InputError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def universal(cls, hbar: float = DEFAULT_HBAR, log_base: str = DEFAULT_LOG_BASE):
        return cls("universal", hbar=hbar, log_base=log_base)

    @classmethod
    def individual(cls, hbar: float = DEFAULT_HBAR, log_base: str = DEFAULT_LOG_BASE):
        return cls("individual", hbar=hbar, log_base=log_base)

    @classmethod
    def fixed(cls, varpi: float):
        return cls("fixed", varpi=float(varpi))

    @classmethod
    def optimal_grid(cls, grid: Sequence[float]):
        return cls("optimal_grid", grid=tuple(grid))

    @classmethod
    def parse(cls, text: str, hbar: float = DEFAULT_HBAR, log_base: str = DEFAULT_LOG_BASE):
        """Parse ``universal``, ``individual`` or ``fixed:<value>``."""
        if text == "universal":
            return cls.universal(hbar, log_base)
        if text == "individual":
            return cls.individual(hbar, log_base)
        if text.startswith("fixed:"):
            try:
                return cls.fixed(float(text[len("fixed:") :]))
            except ValueError:
                raise InputError(f"bad fixed threshold {text!r}") from None
        raise InputError(f"unknown policy {text!r}; expected universal, individual or fixed:<v>")

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.varpi!r}"
        if self.kind == "optimal_grid":
            return f"optimal_grid[{len(self.grid)}]"
        return f"{self.kind}(hbar={self.hbar!r}, log_base={self.log_base})"


def universal_threshold(n: int, d: int, hbar: float = DEFAULT_HBAR, log_base: str = DEFAULT_LOG_BASE) -> float:
    """``hbar * sqrt(4 log(d) / n)``."""
    if n < 1 or d < 2:
        raise InputError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
    return hbar * math.sqrt(4.0 * _log(d, log_base) / n)


def individual_threshold(N, n: int, d: int, hbar: float = DEFAULT_HBAR, log_base: str = DEFAULT_LOG_BASE):
    """``hbar * sqrt(4 (1 - N^2) log(d) / n)``; vectorised over ``N``."""
    N = np.asarray(N, dtype=float)
    if np.any(np.abs(N) > 1):
        raise InputError("|N| must not exceed 1")
    out = universal_threshold(n, d, hbar, log_base) * np.sqrt(1.0 - N**2)
    return float(out) if out.ndim == 0 else out


def apply_threshold(N, varpi, rule: str):
    """Hard (``N 1(|N| >= varpi)``) or soft (``sign(N)(|N| - varpi)_+``) rule.

    Works elementwise on arrays; a tie ``|N| == varpi`` survives the hard rule.
    """
    _check_rule(rule)
    N = np.asarray(N, dtype=float)
    varpi = np.asarray(varpi, dtype=float)
    if np.any(varpi < 0):
        raise InputError("threshold must be >= 0")
    if rule == "hard":
        out = np.where(np.abs(N) >= varpi, N, 0.0)
    else:
        out = np.sign(N) * np.maximum(np.abs(N) - varpi, 0.0)
    out = out + 0.0  # normalise -0.0
    return float(out) if out.ndim == 0 else out


def thresholds_for(policy: ThresholdPolicy, N: np.ndarray, n: int, d: int) -> np.ndarray:
    if policy.kind == "universal":
        return np.full(N.shape, universal_threshold(n, d, policy.hbar, policy.log_base))
    if policy.kind == "individual":
        return individual_threshold(N, n, d, policy.hbar, policy.log_base) * np.ones(N.shape)
    if policy.kind == "fixed":
        return np.full(N.shape, policy.varpi)
    raise InputError("optimal_grid thresholds need the true state; use optimal_threshold_search")


@dataclass(frozen=True)
class EstimateReport:
    estimate: DensityState
    indices: np.ndarray
    thresholds: np.ndarray
    survivors: int
    policy: ThresholdPolicy
    rule: str

    @property
    def thresholds_used(self) -> dict:
        q = self.estimate.qubits
        return {index_to_label(int(f) + 1, q): float(t) for f, t in zip(self.indices, self.thresholds)}


def estimate(record: MeasurementRecord, policy: ThresholdPolicy, rule: str) -> EstimateReport:
    """Threshold every measured ``N_j``; unmeasured labels stay at zero."""
    _check_rule(rule)
    if policy.kind == "optimal_grid":
        raise InputError("optimal_grid needs the true state; use optimal_threshold_search")
    avg = averages(record)
    d = 2**record.qubits
    varpi = thresholds_for(policy, avg.values, record.shots, d)
    beta_hat = np.asarray(apply_threshold(avg.values, varpi, rule), dtype=float).reshape(-1)
    keep = beta_hat != 0
    state = DensityState(PauliExpansion(record.qubits, avg.indices[keep], beta_hat[keep]))
    return EstimateReport(state, avg.indices, varpi, int(keep.sum()), policy, rule)


# ---------------------------------------------------------------------------
# Grid search for the oracle-optimal threshold


def default_grid(
    n: int,
    d: int,
    hbar: float = DEFAULT_HBAR,
    log_base: str = DEFAULT_LOG_BASE,
    points: int = DEFAULT_GRID_POINTS,
) -> np.ndarray:
    """Evenly spaced thresholds on ``[0, 2 * universal_threshold]``."""
    return np.linspace(0.0, 2.0 * universal_threshold(n, d, hbar, log_base), points)


def record_averages_full(record: MeasurementRecord) -> tuple[np.ndarray, np.ndarray]:
    """``(N, measured)`` as length-4^b vectors; unmeasured slots hold 0 / False."""
    size = 4**record.qubits
    N = np.zeros(size)
    measured = np.zeros(size, dtype=bool)
    avg = averages(record)
    N[avg.indices] = avg.values
    measured[avg.indices] = True
    return N, measured


def grid_squared_errors(
    truths: np.ndarray,
    N: np.ndarray,
    rule: str,
    grid: Sequence[float],
    norm: str,
    b: int,
    *,
    batch: int = 64,
) -> np.ndarray:
    """Squared errors for every (replicate, grid point), shape ``(reps, len(grid))``.

    ``truths`` and ``N`` are ``(reps, 4^b)`` coefficient arrays whose identity
    column is ignored; unmeasured entries of ``N`` should be 0.
    """
    _check_rule(rule)
    if norm not in ("spectral", "frobenius"):
        raise InputError(f"unknown norm {norm!r}")
    truths = np.atleast_2d(np.asarray(truths, dtype=float)).copy()
    N = np.atleast_2d(np.asarray(N, dtype=float))
    truths[:, 0] = 0.0
    grid = np.asarray(grid, dtype=float)
    d = 2**b
    out = np.empty((truths.shape[0], grid.size))
    for r in range(truths.shape[0]):
        absN = np.abs(N[r])
        if rule == "hard":
            # thresholds with the same survivor set give the same estimate
            survivors = (absN[None, :] >= grid[:, None]).sum(axis=1)
            _, first, inverse = np.unique(survivors, return_index=True, return_inverse=True)
            distinct = grid[first]
        else:
            distinct, inverse = grid, np.arange(grid.size)
        errs = np.empty(distinct.size)
        for start in range(0, distinct.size, batch):
            g = distinct[start : start + batch]
            delta = apply_threshold(N[r][None, :], g[:, None], rule) - truths[r][None, :]
            delta[:, 0] = 0.0
            if norm == "frobenius":
                errs[start : start + batch] = np.einsum("ij,ij->i", delta, delta) / d
            else:
                errs[start : start + batch] = spectral_from_coefficients(delta, b) ** 2
        out[r] = errs[inverse.reshape(-1)]
    return out


def pick_minimum(grid: Sequence[float], mse: np.ndarray) -> tuple[float, float]:
    """Grid minimiser with ties broken toward the smaller threshold."""
    k = int(np.argmin(mse))  # argmin returns the first (smallest-threshold) minimiser
    return float(grid[k]), float(mse[k])


def optimal_threshold_search(
    truth: DensityState,
    replicate_records: Sequence[MeasurementRecord],
    rule: str,
    grid: Sequence[float],
    norm: str,
) -> tuple[float, float]:
    """Threshold on ``grid`` minimising the replicate-averaged squared error.

    Returns ``(varpi_star, mse_star)``.
    """
    if not replicate_records:
        raise InputError("need at least one replicate record")
    grid = ThresholdPolicy.optimal_grid(grid).grid
    b = truth.qubits
    for r in replicate_records:
        if r.qubits != b:
            raise InputError(f"record has {r.qubits} qubits, truth has {b}")
    N = np.stack([record_averages_full(r)[0] for r in replicate_records])
    truths = np.broadcast_to(truth.full(), N.shape)
    mse = grid_squared_errors(truths, N, rule, grid, norm, b).mean(axis=0)
    return pick_minimum(grid, mse)


# ---------------------------------------------------------------------------
# Projection onto density matrices


def simplex_projection(v) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex.

    Sort in decreasing order, find the largest k with
    ``u_k - (sum_{i<=k} u_i - 1)/k > 0`` and shift by that amount.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InputError("expected a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - css / k > 0)[0][-1])
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def project_hermitian(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest density matrix to a Hermitian matrix."""
    m = np.asarray(m, dtype=np.complex128)
    w, U = np.linalg.eigh(0.5 * (m + m.conj().T))
    p = simplex_projection(w)
    out = (U * p) @ U.conj().T
    return 0.5 * (out + out.conj().T)


def psd_project(state: DensityState) -> DensityState:
    """Frobenius-nearest density matrix to ``state`` (eigenvalues onto the simplex)."""
    return from_dense(project_hermitian(to_dense(state)))
