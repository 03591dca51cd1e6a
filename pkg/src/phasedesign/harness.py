"""Seeded Monte Carlo sweeps comparing designed and random measurement matrices.

Every random draw is keyed by ``(master_seed, hash(parts))`` where ``parts``
names the purpose, the cell and the trial, so results do not depend on the
order in which cells or trials are executed.

Matrix labels
-------------
``UC``   unconstrained design
``MF``   masked Fourier design
``UC_I`` / ``MF_I`` the same projections with the alignment fixed to identity
``OK``   rank-one low-SNR optimum
``RG``   i.i.d. proper Gaussian, redrawn every trial
``CD``   coded diffraction with octanary masks, redrawn every trial
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .design import (MASKED_FOURIER, UNCONSTRAINED, DesignBudget, DesignCollapsedError,
                     EigenvalueTieError, alternating_design, coded_diffraction_matrix,
                     design_from_target, low_snr_optimal_matrix, random_gaussian_matrix,
                     waterfill_lifted)
from .retrieval import RECOVERY, forward_observe, phase_aligned_error
from .soi import (ANALYTIC, CovariancePair, ProperGaussian, RngStream, SumExponentials,
                  analytic_pair, empirical_lifted_covariance, stable_hash)

DESIGNED = ("UC", "MF", "UC_I", "MF_I", "OK")
RANDOM = ("RG", "CD")
KNOWN_LABELS = DESIGNED + RANDOM
SOI_MODELS = ("sum_exponentials", "proper_gaussian")
SUMMARY_COLUMNS = ("label", "snr_db", "m", "n", "trials", "mean_eps", "median_eps", "stderr")
BUDGET_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    soi: str = "sum_exponentials"
    n: int = 10
    sweep: str = "snr"                      # "snr" or "complexity"
    snr_db: list[float] = field(default_factory=lambda: [-10.0, 0.0, 10.0, 20.0, 30.0])
    ratios: list[int] | None = None         # default: 2 .. min(n, 10)
    m: int | None = None                    # fixed m for snr sweeps (default 6n)
    fixed_snr_db: float = 10.0              # fixed SNR for complexity sweeps
    matrices: list[str] = field(default_factory=lambda: ["UC", "MF", "OK", "RG", "CD"])
    trials: int = 200
    master_seed: int = 0
    recovery: str = "taf"
    recovery_options: dict = field(default_factory=dict)
    covariance: str = "auto"                # "auto", "analytic" or "empirical"
    covariance_samples: int = 200_000
    design_max_iters: int = 200
    design_tol: float = 1e-8
    multi_start: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.soi not in SOI_MODELS:
            raise ConfigError(f"soi must be one of {SOI_MODELS}, got {self.soi!r}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ConfigError("n must be a positive integer")
        if self.sweep not in ("snr", "complexity"):
            raise ConfigError("sweep must be 'snr' or 'complexity'")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise ConfigError("trials must be >= 1")
        vals = list(self.snr_db) + [self.fixed_snr_db]
        if not all(isinstance(s, (int, float)) and math.isfinite(s) for s in vals):
            raise ConfigError("SNR values must be finite numbers")
        if not self.snr_db:
            raise ConfigError("snr_db must not be empty")
        bad = [lab for lab in self.matrices if lab not in KNOWN_LABELS]
        if bad or not self.matrices:
            raise ConfigError(f"unknown matrix labels {bad}; known: {KNOWN_LABELS}")
        if self.recovery not in RECOVERY:
            raise ConfigError(f"recovery must be one of {tuple(RECOVERY)}")
        if self.covariance not in ("auto", "analytic", "empirical"):
            raise ConfigError("covariance must be 'auto', 'analytic' or 'empirical'")
        if self.covariance == "analytic" and self.soi == "sum_exponentials":
            raise ConfigError("no closed-form lifted covariance for sum_exponentials")
        if self.covariance_samples < 10 * self.n * self.n:
            raise ConfigError("covariance_samples must be at least 10 n^2")
        if self.m is not None and not (self.n <= self.m <= self.n * self.n):
            raise ConfigError("m must satisfy n <= m <= n^2")
        if not self.ratio_list or any((not isinstance(r, int)) or r < 1 or r > self.n for r in self.ratio_list):
            raise ConfigError("ratios must be integers in [1, n]")
        if self.design_max_iters < 0 or self.design_tol < 0 or self.multi_start < 1:
            raise ConfigError("invalid design options")

    @property
    def ratio_list(self) -> list[int]:
        if self.ratios is None:
            return list(range(2, min(self.n, 10) + 1)) or [1]
        return list(self.ratios)

    @property
    def fixed_m(self) -> int:
        return min(6 * self.n, self.n * self.n) if self.m is None else self.m

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(d)


# --------------------------------------------------------------------------- results


@dataclass(frozen=True)
class TrialRecord:
    label: str
    snr_db: float
    m: int
    n: int
    trial_index: int
    eps: float
    iterations: int


@dataclass(frozen=True)
class CellSummary:
    label: str
    snr_db: float
    m: int
    n: int
    trials: int
    mean_eps: float
    median_eps: float
    stderr: float


@dataclass
class ResultTable:
    records: list[TrialRecord] = field(default_factory=list)
    failed_cells: list[dict] = field(default_factory=list)
    config: dict | None = None

    def sorted_records(self) -> list[TrialRecord]:
        return sorted(self.records, key=lambda r: (r.label, r.snr_db, r.m, r.trial_index))

    def summary(self) -> list[CellSummary]:
        cells: dict[tuple, list[TrialRecord]] = {}
        for r in self.records:
            cells.setdefault((r.label, r.snr_db, r.m, r.n), []).append(r)
        for f in self.failed_cells:
            cells.setdefault((f["label"], f["snr_db"], f["m"], f["n"]), [])
        out = []
        for key in sorted(cells):
            eps = np.array([r.eps for r in sorted(cells[key], key=lambda r: r.trial_index)])
            out.append(CellSummary(*key, *_aggregate(eps)))
        return out

    def cell(self, label: str, snr_db: float | None = None, m: int | None = None) -> list[CellSummary]:
        return [s for s in self.summary() if s.label == label
                and (snr_db is None or s.snr_db == float(snr_db)) and (m is None or s.m == m)]

    def curve(self, label: str, by: str = "snr_db") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x, mean_eps, stderr)`` for one label, sorted by ``by`` (``snr_db`` or ``m``)."""
        rows = sorted((s for s in self.summary() if s.label == label and s.trials > 0),
                      key=lambda s: getattr(s, by))
        return (np.array([getattr(s, by) for s in rows], float),
                np.array([s.mean_eps for s in rows]), np.array([s.stderr for s in rows]))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": [asdict(r) for r in self.sorted_records()],
            "summary": [asdict(s) for s in self.summary()],
            "failed_cells": sorted(self.failed_cells, key=lambda f: (f["label"], f["snr_db"], f["m"])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultTable":
        return cls([TrialRecord(**r) for r in d.get("records", [])],
                   list(d.get("failed_cells", [])), d.get("config"))


def _aggregate(eps: np.ndarray) -> tuple[int, float, float, float]:
    k = eps.size
    if k == 0:
        return 0, math.nan, math.nan, math.nan
    se = float(np.std(eps, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return k, float(np.mean(eps)), float(np.median(eps)), se


def crossing_point(x: np.ndarray, y: np.ndarray, level: float) -> float:
    """First ``x`` (linearly interpolated) at which the curve ``y`` drops to ``level``; ``inf`` if never."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    for i in range(x.size):
        if y[i] <= level:
            if i == 0:
                return float(x[0])
            x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
            return float(x0 + (y0 - level) * (x1 - x0) / (y0 - y1))
    return math.inf


# --------------------------------------------------------------------------- building blocks


def make_model(cfg: ExperimentConfig):
    return SumExponentials(cfg.n) if cfg.soi == "sum_exponentials" else ProperGaussian(cfg.n)


def stream(master_seed: int, *parts) -> RngStream:
    return RngStream(master_seed, stable_hash(*parts))


def covariance_for(cfg: ExperimentConfig) -> CovariancePair:
    model = make_model(cfg)
    use_analytic = cfg.covariance == "analytic" or (cfg.covariance == "auto" and cfg.soi == "proper_gaussian")
    if use_analytic:
        return analytic_pair(model.analytic_covariance())
    return empirical_lifted_covariance(model, cfg.covariance_samples,
                                       stream(cfg.master_seed, "covariance"))


def build_design(label: str, pair: CovariancePair, budget: DesignBudget,
                 max_iters: int = 200, tol: float = 1e-8, multi_start: int = 1,
                 seed: int = 0) -> np.ndarray:
    """Deterministic designed matrix for ``label`` in ``DESIGNED``."""
    c_u = pair.c_u if pair.provenance == ANALYTIC else None
    if label == "OK":
        return low_snr_optimal_matrix(pair.c_u, budget)
    constraint = UNCONSTRAINED if label.startswith("UC") else MASKED_FOURIER
    b = budget.m // budget.n if constraint == MASKED_FOURIER else None
    if label.endswith("_I"):
        target = waterfill_lifted(pair.c_x, budget, c_u=c_u).lifted_target
        return design_from_target(target, budget.p, budget.n, constraint, b, max_iters=0).matrix
    rng = stream(seed, "multi_start", label, budget.m, budget.sigma_w_sq)
    return alternating_design(pair.c_x, budget, constraint, b, max_iters=max_iters, tol=tol,
                              multi_start=multi_start, rng=rng, c_u=c_u).matrix


def _check_budget(a: np.ndarray, p: float, label: str) -> None:
    if abs(np.linalg.norm(a) ** 2 - p) > BUDGET_TOL * p:
        raise DesignCollapsedError(f"{label} violates the power budget")


def _run_cell(cfg: ExperimentConfig, pair: CovariancePair, labels: list[str], snr_db: float,
              m: int, table: ResultTable) -> None:
    n = cfg.n
    model = make_model(cfg)
    budget = DesignBudget.from_snr_db(m, n, snr_db)
    cell = ("cell", float(snr_db), int(m))
    fixed: dict[str, np.ndarray] = {}
    live = []
    for label in labels:
        if label in ("MF", "MF_I", "CD") and m % n:
            table.failed_cells.append(dict(label=label, snr_db=float(snr_db), m=m, n=n,
                                           reason="masked Fourier needs m to be a multiple of n"))
            continue
        if label in DESIGNED:
            try:
                a = build_design(label, pair, budget, cfg.design_max_iters, cfg.design_tol,
                                 cfg.multi_start, cfg.master_seed)
                _check_budget(a, budget.p, label)
            except (DesignCollapsedError, EigenvalueTieError) as exc:
                table.failed_cells.append(dict(label=label, snr_db=float(snr_db), m=m, n=n,
                                               reason=str(exc)))
                continue
            fixed[label] = a
        live.append(label)
    recover = RECOVERY[cfg.recovery]
    for t in range(cfg.trials):
        u = model.sample(stream(cfg.master_seed, "soi", cell, t))
        for label in live:
            if label in fixed:
                a = fixed[label]
            elif label == "RG":
                a = random_gaussian_matrix(budget, stream(cfg.master_seed, "matrix", label, cell, t))
            else:
                a = coded_diffraction_matrix(m // n, n, stream(cfg.master_seed, "matrix", label, cell, t))
            obs = forward_observe(a, u, budget.sigma_w_sq,
                                  stream(cfg.master_seed, "noise", label, cell, t), label)
            res = recover(a, obs, **cfg.recovery_options)
            table.records.append(TrialRecord(label, float(snr_db), int(m), n, t,
                                             phase_aligned_error(u, res.estimate), int(res.iterations)))


def run_snr_sweep(cfg: ExperimentConfig, pair: CovariancePair | None = None) -> ResultTable:
    """Fixed ``m``, SNR varied over ``cfg.snr_db``."""
    pair = covariance_for(cfg) if pair is None else pair
    table = ResultTable(config=cfg.to_dict())
    for snr in cfg.snr_db:
        _run_cell(cfg, pair, list(cfg.matrices), float(snr), cfg.fixed_m, table)
    return table


def run_complexity_sweep(cfg: ExperimentConfig, pair: CovariancePair | None = None) -> ResultTable:
    """Fixed SNR, ``m = ratio * n`` over ``cfg.ratios``; masked Fourier uses ``ratio`` masks."""
    pair = covariance_for(cfg) if pair is None else pair
    table = ResultTable(config=cfg.to_dict())
    for r in cfg.ratio_list:
        _run_cell(cfg, pair, list(cfg.matrices), float(cfg.fixed_snr_db), r * cfg.n, table)
    return table


def run_config(cfg: ExperimentConfig) -> ResultTable:
    return run_snr_sweep(cfg) if cfg.sweep == "snr" else run_complexity_sweep(cfg)


@dataclass(frozen=True)
class FrobeniusRow:
    snr_db: float
    label: str
    objective: float


def run_frobenius_comparison(cfg: ExperimentConfig, pair: CovariancePair | None = None) -> list[FrobeniusRow]:
    """``||V T - row_wise_krp(A_hat)||_F`` for UC, UC_I, MF and MF_I at each SNR.

    Evaluated on the unnormalized structured fit ``A_hat``, i.e. before the
    final rescaling to the power budget.
    """
    pair = covariance_for(cfg) if pair is None else pair
    m, n = cfg.fixed_m, cfg.n
    c_u = pair.c_u if pair.provenance == ANALYTIC else None
    rows = []
    for snr in cfg.snr_db:
        budget = DesignBudget.from_snr_db(m, n, float(snr))
        target = waterfill_lifted(pair.c_x, budget, c_u=c_u).lifted_target
        for constraint, tag in ((UNCONSTRAINED, "UC"), (MASKED_FOURIER, "MF")):
            if constraint == MASKED_FOURIER and m % n:
                continue
            b = m // n if constraint == MASKED_FOURIER else None
            fixed = design_from_target(target, budget.p, n, constraint, b, max_iters=0)
            opt = design_from_target(target, budget.p, n, constraint, b,
                                     max_iters=cfg.design_max_iters, tol=cfg.design_tol)
            rows.append(FrobeniusRow(float(snr), tag, opt.final_objective))
            rows.append(FrobeniusRow(float(snr), tag + "_I", fixed.final_objective))
    return sorted(rows, key=lambda r: (r.snr_db, r.label))


# --------------------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def results_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in table.summary():
        w.writerow([_fmt(getattr(s, c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def results_json(table: ResultTable) -> str:
    return json.dumps(table.to_dict(), indent=1, sort_keys=True, allow_nan=True) + "\n"


def frobenius_csv(rows: list[FrobeniusRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("snr_db", "label", "objective"))
    for r in rows:
        w.writerow((_fmt(r.snr_db), r.label, _fmt(r.objective)))
    return buf.getvalue()


def frobenius_json(rows: list[FrobeniusRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1, sort_keys=True) + "\n"


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc
    return path


def emit_results(table: ResultTable, path: str | Path, format: str = "csv") -> Path:
    """Write the summary CSV or the full JSON document; output is byte-stable."""
    if format == "csv":
        return write_text(path, results_csv(table))
    if format == "json":
        return write_text(path, results_json(table))
    raise ValueError(f"unknown format {format!r}")
