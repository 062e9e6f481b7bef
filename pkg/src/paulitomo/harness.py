"""Replicated generate -> measure -> estimate -> evaluate simulation study.

Every replicate draws from its own generator, seeded from
``(master_seed, purpose, qubits, [shots,] replicate)`` through
:class:`numpy.random.SeedSequence`, and is computed the same way whichever
worker runs it. Aggregation happens in replicate order, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import FormatError, GenerationError, InputError, TomographyError
from .estimator import (
    LOG_BASES,
    RULES,
    apply_threshold,
    default_grid,
    grid_squared_errors,
    individual_threshold,
    pick_minimum,
    record_averages_full,
    universal_threshold,
)
from .measurement import sample_measurements
from .norms import spectral_from_coefficients
from .state import DensityState, SupportRule, generate_state

POLICIES = ("none", "optimal", "universal", "individual")
NORMS = ("spectral", "frobenius")
SUMMARY_COLUMNS = (
    ("none", "none"),
    ("optimal", "hard"),
    ("optimal", "soft"),
    ("universal", "hard"),
    ("universal", "soft"),
    ("individual", "hard"),
    ("individual", "soft"),
)
CSV_COLUMNS = ("d", "n", "policy", "rule", "norm", "mse", "sem", "replicates", "threshold_mean", "diagnostic")

_TRUTH, _MEASURE = 1, 2


# ---------------------------------------------------------------------------
# Configuration


def _parse_list(text: str, cast) -> tuple:
    return tuple(cast(x.strip()) for x in text.split(",") if x.strip())


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    qubit_list: tuple[int, ...] = (5, 6, 7)
    shots_list: tuple[int, ...] = (100, 200, 500, 1000, 2000)
    replicates: int = 200
    policies: tuple[str, ...] = POLICIES
    rules: tuple[str, ...] = RULES
    hbar: float = 1.01
    log_base: str = "ten"
    support_factor: float = 6.0
    support_log_base: str = "natural"
    support_rounding: str = "floor"
    amplitude: float = 0.2
    master_seed: int = 20150601
    fresh_state_per_replicate: bool = True
    grid_points: int = 200

    def __post_init__(self):
        for name in ("qubit_list", "shots_list", "policies", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise InputError(f"{name} must be nonempty")
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if any(b < 1 for b in self.qubit_list) or any(n < 1 for n in self.shots_list):
            raise InputError("qubit and shot counts must be >= 1")
        if max(self.qubit_list) > 8:
            raise InputError("the harness evaluates spectral norms densely; use at most 8 qubits")
        for p in self.policies:
            if p not in POLICIES:
                raise InputError(f"unknown policy {p!r}; expected one of {POLICIES}")
        for r in self.rules:
            if r not in RULES:
                raise InputError(f"unknown rule {r!r}")
        if self.log_base not in LOG_BASES:
            raise InputError(f"unknown log base {self.log_base!r}")
        if not self.hbar > 1:
            raise InputError("hbar must exceed 1")
        if not 0 < self.amplitude <= 1:
            raise InputError("amplitude must lie in (0, 1]")
        if self.master_seed < 0:
            raise InputError("master_seed must be >= 0")
        if self.grid_points < 1:
            raise InputError("grid_points must be >= 1")
        SupportRule(self.support_factor, self.support_log_base, self.support_rounding)

    @property
    def support_rule(self) -> SupportRule:
        return SupportRule(self.support_factor, self.support_log_base, self.support_rounding)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            else:
                value = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path: str | None = None) -> ExperimentConfig:
        casts = {
            "qubit_list": lambda s: _parse_list(s, int),
            "shots_list": lambda s: _parse_list(s, int),
            "policies": lambda s: _parse_list(s, str),
            "rules": lambda s: _parse_list(s, str),
            "replicates": int,
            "master_seed": int,
            "grid_points": int,
            "hbar": float,
            "support_factor": float,
            "amplitude": float,
            "fresh_state_per_replicate": _parse_bool,
            "log_base": str.strip,
            "support_log_base": str.strip,
            "support_rounding": str.strip,
        }
        values = {}
        for no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep or key not in casts:
                raise FormatError(f"unknown or malformed setting {line!r}", no, path)
            if key in values:
                raise FormatError(f"duplicate setting {key}", no, path)
            try:
                values[key] = casts[key](raw.strip())
            except ValueError as exc:
                raise FormatError(f"bad value for {key}: {exc}", no, path) from None
        try:
            return cls(**values)
        except InputError as exc:
            raise FormatError(str(exc), None, path) from None

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def single_truth_config(**overrides) -> ExperimentConfig:
    """One true state per dimension shared by every replicate and shot count."""
    return replace(ExperimentConfig(fresh_state_per_replicate=False), **overrides)


# ---------------------------------------------------------------------------
# Seeding


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``keys``, via ``SeedSequence([master_seed, *keys])``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, *keys])))


def truth_rng(config: ExperimentConfig, b: int, rep: int) -> np.random.Generator:
    slot = rep + 1 if config.fresh_state_per_replicate else 0
    return derive_rng(config.master_seed, _TRUTH, b, slot)


def measurement_rng(config: ExperimentConfig, b: int, n: int, rep: int) -> np.random.Generator:
    return derive_rng(config.master_seed, _MEASURE, b, n, rep)


def make_truth(config: ExperimentConfig, b: int, rep: int = 0) -> tuple[DensityState, int]:
    return generate_state(
        b, truth_rng(config, b, rep), amplitude=config.amplitude, support_rule=config.support_rule
    )


# ---------------------------------------------------------------------------
# One replicate


@dataclass
class ReplicateResult:
    b: int
    rep: int
    errors: dict = field(default_factory=dict)  # (n, policy, rule, norm) -> squared error
    thresholds: dict = field(default_factory=dict)  # (n, policy, rule) -> mean threshold
    grid_errors: dict = field(default_factory=dict)  # (n, rule, norm) -> array over grid
    baseline_expectation: dict = field(default_factory=dict)  # n -> E ||N - beta||_F^2
    failure: str | None = None


def _estimators(config: ExperimentConfig, N: np.ndarray, n: int, d: int):
    """Yield ``(policy, rule, beta_hat, mean_threshold)`` for the fixed-threshold policies."""
    if "none" in config.policies:
        yield "none", "none", N, 0.0
    for policy in ("universal", "individual"):
        if policy not in config.policies:
            continue
        if policy == "universal":
            varpi = np.full(N.shape, universal_threshold(n, d, config.hbar, config.log_base))
        else:
            varpi = individual_threshold(N, n, d, config.hbar, config.log_base)
        mean_varpi = float(varpi[1:].mean())
        for rule in config.rules:
            yield policy, rule, apply_threshold(N, varpi, rule), mean_varpi


def run_replicate(config: ExperimentConfig, b: int, rep: int, truth: DensityState | None = None) -> ReplicateResult:
    """All shot counts of one replicate at ``b`` qubits."""
    out = ReplicateResult(b, rep)
    d = 2**b
    if truth is None:
        try:
            truth, _ = make_truth(config, b, rep)
        except GenerationError as exc:
            out.failure = str(exc)
            return out
    beta = truth.full()
    beta[0] = 0.0
    for n in config.shots_list:
        record = sample_measurements(truth, n, None, measurement_rng(config, b, n, rep))
        N, _ = record_averages_full(record)
        keys, deltas = [], []
        for policy, rule, beta_hat, mean_varpi in _estimators(config, N, n, d):
            delta = beta_hat - beta
            delta[0] = 0.0
            keys.append((policy, rule))
            deltas.append(delta)
            out.thresholds[(n, policy, rule)] = mean_varpi
        if deltas:
            deltas = np.stack(deltas)
            frob = np.einsum("ij,ij->i", deltas, deltas) / d
            spec = spectral_from_coefficients(deltas, b) ** 2
            for (policy, rule), f, s in zip(keys, frob, spec):
                out.errors[(n, policy, rule, "frobenius")] = float(f)
                out.errors[(n, policy, rule, "spectral")] = float(s)
        if "optimal" in config.policies:
            grid = default_grid(n, d, config.hbar, config.log_base, config.grid_points)
            for rule in config.rules:
                for norm in NORMS:
                    out.grid_errors[(n, rule, norm)] = grid_squared_errors(
                        beta[None, :], N[None, :], rule, grid, norm, b
                    )[0]
        out.baseline_expectation[n] = float(np.sum(1.0 - beta[1:] ** 2) / (n * d))
    return out


def _run_chunk(args) -> list[ReplicateResult]:
    config, b, reps, truth = args
    return [run_replicate(config, b, rep, truth) for rep in reps]


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class MseRow:
    d: int
    n: int
    policy: str
    rule: str
    norm: str
    mse: float
    sem: float
    replicates: int
    threshold_mean: float
    diagnostic: str = ""


@dataclass
class MseTable:
    rows: list[MseRow] = field(default_factory=list)
    #: per (d, n) replicate average of the closed-form no-threshold Frobenius risk
    baseline_expectation: dict = field(default_factory=dict)
    baseline_expectation_sem: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, d: int, n: int, policy: str, rule: str, norm: str) -> MseRow:
        for row in self.rows:
            if (row.d, row.n, row.policy, row.rule, row.norm) == (d, n, policy, rule, norm):
                return row
        raise KeyError((d, n, policy, rule, norm))

    def dims(self) -> list[int]:
        return sorted({r.d for r in self.rows})

    def shots(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def series_keys(self) -> list[tuple[str, str, str]]:
        seen = []
        for r in self.rows:
            key = (r.policy, r.rule, r.norm)
            if key not in seen:
                seen.append(key)
        return seen


def _sort_key(row: MseRow):
    col = SUMMARY_COLUMNS.index((row.policy, row.rule)) if (row.policy, row.rule) in SUMMARY_COLUMNS else 99
    return (row.d, row.n, NORMS.index(row.norm), col, row.policy, row.rule)


def _mean_sem(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.sum() / values.size)  # sequential sum: worker-count independent
    if values.size < 2:
        return mean, float("nan")
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def _aggregate(config: ExperimentConfig, results: dict[int, list[ReplicateResult]]) -> MseTable:
    table = MseTable()
    for b in config.qubit_list:
        d = 2**b
        reps = sorted(results[b], key=lambda r: r.rep)
        failure = next((r.failure for r in reps if r.failure), None)
        cells = []
        if "none" in config.policies:
            cells.append(("none", "none"))
        for policy in ("optimal", "universal", "individual"):
            if policy in config.policies:
                cells.extend((policy, rule) for rule in config.rules)
        for n in config.shots_list:
            if failure:
                for policy, rule in cells:
                    for norm in NORMS:
                        table.rows.append(
                            MseRow(d, n, policy, rule, norm, float("nan"), float("nan"), 0, float("nan"), failure)
                        )
                continue
            expect = np.array([r.baseline_expectation[n] for r in reps])
            table.baseline_expectation[(d, n)], table.baseline_expectation_sem[(d, n)] = _mean_sem(expect)
            for policy, rule in cells:
                for norm in NORMS:
                    if policy == "optimal":
                        grid = default_grid(n, d, config.hbar, config.log_base, config.grid_points)
                        errs = np.stack([r.grid_errors[(n, rule, norm)] for r in reps])
                        mse_curve = errs.sum(axis=0) / errs.shape[0]
                        varpi, _ = pick_minimum(grid, mse_curve)
                        k = int(np.argmin(mse_curve))
                        mse, sem = _mean_sem(errs[:, k])
                        thr = varpi
                    else:
                        mse, sem = _mean_sem(np.array([r.errors[(n, policy, rule, norm)] for r in reps]))
                        thr = float(np.mean([r.thresholds[(n, policy, rule)] for r in reps]))
                    table.rows.append(MseRow(d, n, policy, rule, norm, mse, sem, len(reps), thr))
    table.rows.sort(key=_sort_key)
    return table


def run_experiment(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10) -> MseTable:
    """Run every (qubits, shots) cell of ``config`` and tabulate MSEs.

    Includes the unthresholded estimator (policy ``none``) when requested.
    Output is identical for any ``workers``.
    """
    tasks = []
    results: dict[int, list[ReplicateResult]] = defaultdict(list)
    for b in config.qubit_list:
        truth = None
        if not config.fresh_state_per_replicate:
            try:
                truth, _ = make_truth(config, b)
            except GenerationError as exc:
                results[b] = [ReplicateResult(b, 0, failure=str(exc))]
                continue
        reps = list(range(config.replicates))
        for start in range(0, len(reps), chunk_size):
            tasks.append((config, b, reps[start : start + chunk_size], truth))
    if workers <= 1:
        outputs = map(_run_chunk, tasks)
        for chunk in outputs:
            for r in chunk:
                results[r.b].append(r)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_chunk, tasks):
                for r in chunk:
                    results[r.b].append(r)
    return _aggregate(config, results)


# ---------------------------------------------------------------------------
# Output


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def emit_table(table: MseTable, path: str | Path, layout: str = "long") -> None:
    """Write ``table`` as CSV.

    ``layout="long"`` has one row per (d, n, policy, rule, norm);
    ``layout="wide"`` has one row per (norm, d, n) with the estimator
    columns in a fixed order followed by the threshold columns.
    """
    if not table.rows:
        raise InputError("empty table")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if layout == "long":
            w.writerow(CSV_COLUMNS)
            for row in table.rows:
                w.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
        elif layout == "wide":
            names = [f"{p}_{r}" if p != "none" else "without" for p, r in SUMMARY_COLUMNS]
            w.writerow(["norm", "d", "n", *names, "threshold_universal", "threshold_optimal_hard", "threshold_optimal_soft"])
            index = {(r.d, r.n, r.policy, r.rule, r.norm): r for r in table.rows}
            for norm in NORMS:
                for d in table.dims():
                    for n in table.shots():
                        cells = [index.get((d, n, p, r, norm)) for p, r in SUMMARY_COLUMNS]
                        thr = [
                            index.get((d, n, "universal", "hard", norm)),
                            index.get((d, n, "optimal", "hard", norm)),
                            index.get((d, n, "optimal", "soft", norm)),
                        ]
                        w.writerow(
                            [norm, d, n]
                            + [_fmt(c.mse) if c else "" for c in cells]
                            + [_fmt(c.threshold_mean) if c else "" for c in thr]
                        )
        else:
            raise InputError(f"unknown layout {layout!r}")


def read_table(path: str | Path) -> MseTable:
    table = MseTable()
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InputError(f"{path}: unexpected columns {reader.fieldnames}")
        for rec in reader:
            table.rows.append(
                MseRow(
                    d=int(rec["d"]),
                    n=int(rec["n"]),
                    policy=rec["policy"],
                    rule=rec["rule"],
                    norm=rec["norm"],
                    mse=float(rec["mse"]),
                    sem=float(rec["sem"]),
                    replicates=int(rec["replicates"]),
                    threshold_mean=float(rec["threshold_mean"]),
                    diagnostic=rec["diagnostic"],
                )
            )
    return table


PLOT_MODES = ("mse_vs_n", "mse_vs_d", "rescaled_vs_d")


def plot_series(table: MseTable, mode: str) -> tuple[str, list[int], dict[str, list[float]]]:
    """``(x_name, xs, {series_name: ys})`` for one of :data:`PLOT_MODES`."""
    if mode not in PLOT_MODES:
        raise InputError(f"unknown plot mode {mode!r}; expected one of {PLOT_MODES}")
    index = {(r.d, r.n, r.policy, r.rule, r.norm): r for r in table.rows}
    if mode == "mse_vs_n":
        x_name, xs, groups = "n", table.shots(), table.dims()
    else:
        x_name, xs, groups = "d", table.dims(), table.shots()
    if not xs:
        raise InputError("table is empty")
    series = {}
    for policy, rule, norm in table.series_keys():
        for g in groups:
            name = f"{norm}:{policy}-{rule}:{'d' if mode == 'mse_vs_n' else 'n'}={g}"
            ys = []
            for x in xs:
                key = (g, x) if mode == "mse_vs_n" else (x, g)
                row = index.get((*key, policy, rule, norm))
                if row is None:
                    raise InputError(f"missing cell d={key[0]} n={key[1]} {policy}/{rule}/{norm}")
                y = row.mse
                if mode == "rescaled_vs_d":
                    y = y * (row.d**2 if norm == "spectral" else row.d)
                ys.append(y)
            series[name] = ys
    return x_name, xs, series


def emit_plot_data(table: MseTable, mode: str, path: str | Path) -> None:
    """Wide CSV: first column is the x axis, one column per series.

    ``rescaled_vs_d`` multiplies spectral MSEs by d^2 and Frobenius MSEs by d.
    """
    x_name, xs, series = plot_series(table, mode)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([x_name, *series])
        for i, x in enumerate(xs):
            w.writerow([x, *(_fmt(ys[i]) for ys in series.values())])


# ---------------------------------------------------------------------------
# Rate checks


@dataclass(frozen=True)
class SlopeFit:
    d: int
    policy: str
    rule: str
    norm: str
    slope: float
    ci_low: float
    ci_high: float
    expected: float
    points: int


def fit_slope(ns: Sequence[float], mses: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """OLS slope of log(mse) on log(n) with a t-based confidence interval."""
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(mses, float))
    fit = stats.linregress(x, y)
    if len(x) > 2:
        half = stats.t.ppf(0.5 + level / 2, len(x) - 2) * fit.stderr
    else:
        half = float("nan")
    return float(fit.slope), float(fit.slope - half), float(fit.slope + half)


def scaling_check(table: MseTable, q: float = 0.0, level: float = 0.95) -> list[SlopeFit]:
    """Fit MSE-vs-n slopes per (d, policy, rule, norm) series.

    The reference exponents are ``-(1 - q)`` for the spectral norm and
    ``-(1 - q/2)`` for the Frobenius norm (up to log factors).
    """
    out = []
    for d in table.dims():
        for policy, rule, norm in table.series_keys():
            rows = sorted(
                (r for r in table.rows if (r.d, r.policy, r.rule, r.norm) == (d, policy, rule, norm)),
                key=lambda r: r.n,
            )
            rows = [r for r in rows if r.mse > 0 and math.isfinite(r.mse)]
            if len(rows) < 3:
                continue
            slope, lo, hi = fit_slope([r.n for r in rows], [r.mse for r in rows], level)
            expected = -(1 - q) if norm == "spectral" else -(1 - q / 2)
            out.append(SlopeFit(d, policy, rule, norm, slope, lo, hi, expected, len(rows)))
    if not out:
        raise InputError("scaling check needs at least 3 shot counts at a fixed dimension")
    return out


def format_scaling(fits: Iterable[SlopeFit]) -> str:
    lines = ["d policy rule norm slope ci_low ci_high expected points"]
    for f in fits:
        lines.append(
            f"{f.d} {f.policy} {f.rule} {f.norm} {f.slope:.6f} {f.ci_low:.6f} {f.ci_high:.6f} "
            f"{f.expected:.6f} {f.points}"
        )
    return "\n".join(lines) + "\n"


def rescaled_trend(table: MseTable, n_sigma: float = 2.0) -> dict[tuple, bool]:
    """Whether each rescaled-vs-d series is nondecreasing within ``n_sigma`` SEMs.

    Keys are ``(policy, rule, norm, n)``.
    """
    out = {}
    dims = table.dims()
    for policy, rule, norm in table.series_keys():
        for n in table.shots():
            rows = [table.get(d, n, policy, rule, norm) for d in dims]
            ok = True
            for a, b in zip(rows, rows[1:]):
                fa = a.d**2 if norm == "spectral" else a.d
                fb = b.d**2 if norm == "spectral" else b.d
                slack = n_sigma * math.hypot(a.sem * fa, b.sem * fb)
                if b.mse * fb < a.mse * fa - slack:
                    ok = False
            out[(policy, rule, norm, n)] = ok
    return out


def write_manifest(config: ExperimentConfig, path: str | Path, version: str) -> None:
    text = (
        f"paulitomo {version}\n"
        f"master_seed={config.master_seed}\n"
        f"config_sha256={config.config_hash()}\n"
        + config.to_text()
    )
    Path(path).write_text(text)


def run_bench(config: ExperimentConfig, out_dir: str | Path, workers: int = 1, version: str = "") -> MseTable:
    """Run ``config`` and write ``mse.csv``, ``summary.csv``, ``plot_*.csv``, ``scaling.txt`` and ``manifest.txt``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = run_experiment(config, workers=workers)
    emit_table(table, out_dir / "mse.csv")
    emit_table(table, out_dir / "summary.csv", layout="wide")
    for mode in PLOT_MODES:
        emit_plot_data(table, mode, out_dir / f"plot_{mode}.csv")
    try:
        scaling = format_scaling(scaling_check(table))
    except TomographyError as exc:
        scaling = f"# scaling check skipped: {exc}\n"
    (out_dir / "scaling.txt").write_text(scaling)
    write_manifest(config, out_dir / "manifest.txt", version)
    return table


__all__ = [
    "ExperimentConfig",
    "MseRow",
    "MseTable",
    "ReplicateResult",
    "SlopeFit",
    "derive_rng",
    "emit_plot_data",
    "emit_table",
    "fit_slope",
    "make_truth",
    "read_table",
    "rescaled_trend",
    "run_bench",
    "run_experiment",
    "run_replicate",
    "scaling_check",
    "single_truth_config",
]
