"""Lanczos iteration with full reorthogonalisation for Hermitian operators.

Only the two ends of the spectrum are needed here (smallest eigenvalue of a
state, largest magnitude of a difference), so the solver tracks both extreme
Ritz values and certifies the one requested with an explicit residual.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError, InputError

Matvec = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RitzPair:
    value: float
    vector: np.ndarray
    residual: float


@dataclass(frozen=True)
class LanczosResult:
    smallest: RitzPair
    largest: RitzPair
    iterations: int

    @property
    def max_abs(self) -> RitzPair:
        if abs(self.largest.value) >= abs(self.smallest.value):
            return self.largest
        return self.smallest


def _ritz(V: np.ndarray, s: np.ndarray) -> np.ndarray:
    y = s @ V
    return y / np.linalg.norm(y)


def lanczos_extremes(
    matvec: Matvec,
    dim: int,
    *,
    which: str = "both",
    tol: float = 1e-10,
    residual_tol: float = 1e-8,
    max_iter: int | None = None,
    seed: int = 0,
) -> LanczosResult:
    """Extreme eigenpairs of the Hermitian operator ``matvec`` on C^dim.

    Iterates until both tracked Ritz values move by less than ``tol`` between
    steps and the certified pair satisfies
    ``||A y - theta y|| <= residual_tol * max(|theta_min|, |theta_max|)``.
    ``which`` selects what must be certified: ``"smallest"``, ``"largest"``,
    ``"max_abs"`` or ``"both"``. The Krylov dimension never exceeds ``dim``,
    at which point the tridiagonal spectrum is exact.
    """
    if which not in ("smallest", "largest", "max_abs", "both"):
        raise InputError(f"unknown target {which!r}")
    if max_iter is None:
        max_iter = 5 * dim
    steps = min(max_iter, dim)

    rng = np.random.default_rng(seed)
    q = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    q /= np.linalg.norm(q)

    V = np.empty((steps, dim), dtype=np.complex128)
    alphas: list[float] = []
    betas: list[float] = []
    prev = None
    k = 0
    result = None
    scale = 0.0
    while k < steps:
        V[k] = q
        w = matvec(q)
        alpha = float(np.vdot(q, w).real)
        w = w - alpha * q
        if k > 0:
            w = w - betas[-1] * V[k - 1]
        # full reorthogonalisation, applied twice for stability
        basis = V[: k + 1]
        for _ in range(2):
            w = w - (basis.conj() @ w) @ basis
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)
        k += 1

        theta, S = eigh_tridiagonal(np.array(alphas), np.array(betas)) if k > 1 else (
            np.array(alphas),
            np.ones((1, 1)),
        )
        lo, hi = float(theta[0]), float(theta[-1])
        scale = max(abs(lo), abs(hi))
        invariant = beta <= 1e-14 * max(scale, 1.0)
        # cheap residual bound |beta_k * s_last| for each end
        bound_lo = beta * abs(S[-1, 0])
        bound_hi = beta * abs(S[-1, -1])
        settled = prev is not None and abs(lo - prev[0]) < tol and abs(hi - prev[1]) < tol
        prev = (lo, hi)

        want = {
            "smallest": (bound_lo,),
            "largest": (bound_hi,),
            "max_abs": (bound_hi if abs(hi) >= abs(lo) else bound_lo,),
            "both": (bound_lo, bound_hi),
        }[which]
        if invariant or k == steps or (settled and max(want) <= residual_tol * scale):
            Vk = V[:k]
            pairs = []
            for s, val in ((S[:, 0], lo), (S[:, -1], hi)):
                y = _ritz(Vk, s)
                r = float(np.linalg.norm(matvec(y) - val * y))
                pairs.append(RitzPair(val, y, r))
            result = LanczosResult(pairs[0], pairs[1], k)
            targets = {
                "smallest": (result.smallest,),
                "largest": (result.largest,),
                "max_abs": (result.max_abs,),
                "both": (result.smallest, result.largest),
            }[which]
            if all(p.residual <= residual_tol * scale for p in targets):
                return result
            if invariant or k == steps:
                worst = max(targets, key=lambda p: p.residual)
                raise ConvergenceError(
                    "Lanczos residual certificate failed", worst.value, worst.residual, k
                )
        q = w / beta
        betas.append(beta)

    worst = result.max_abs if result is not None else RitzPair(float("nan"), q, float("inf"))
    raise ConvergenceError("Lanczos did not converge", worst.value, worst.residual, k)
