"""Seeded benchmark campaigns comparing the three calibration methods.

Each trial draws a fresh pair of synthetic sensors, generates one shared
pair of calibration datasets, runs the covariance-propagating method, the
diagonal-covariance variant, and the lookup-table baseline on identical
data, and scores each with the simulation cost oracle.  Campaigns are pure
functions of (base seed, trial count, config), regardless of parallelism.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cascade, lut, sim
from .cascade import CascadeConfig
from .errors import CascalError, ConfigError, EmptyCampaign
from .kernels import Hyperparameters

METHODS = ("bayes", "alt1", "alt2")


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs besides its seed."""

    n_terms: int = 10
    coeff_var: float = 1e-4
    freq_var: float = 6.0
    noise_var: float = 1e-8
    n_grid: int = 100
    edge_remove: int = 8
    center_remove: int = 20
    n1: int = 100
    n_quad: int = 2001
    cascade: CascadeConfig = CascadeConfig()
    lut_extrapolation: str = "slope"


@dataclass(frozen=True)
class TrialResult:
    """Costs and diagnostics for one seed.

    Wall times are excluded from equality so that results compare by their
    deterministic payload only.
    """

    seed: int
    j_bayes: float
    j_alt1: float
    j_alt2: float
    hp_stage_one: Hyperparameters | None = None
    hp_stage_two: Hyperparameters | None = None
    rejected_draws: int = 0
    flag: str | None = None
    d1_checksum: str | None = None
    d2_checksum: str | None = None
    wall_time_ms: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.flag is None

    def j_for(self, method: str) -> float:
        return {"bayes": self.j_bayes, "alt1": self.j_alt1, "alt2": self.j_alt2}[
            method
        ]


def dataset_checksum(ds: cascade.CalibrationDataset) -> str:
    """SHA-256 over the raw bytes of the dataset arrays."""
    h = hashlib.sha256()
    h.update(ds.x.tobytes())
    h.update(ds.y.tobytes())
    return h.hexdigest()


def run_trial(seed: int, cfg: TrialConfig = TrialConfig()) -> TrialResult:
    """Run all three methods on one seeded problem.

    Any method failure flags the whole trial (costs become NaN) so that
    summaries only ever compare methods on identical draws.
    """
    try:
        pair, rejected = sim.sample_truth_pair(
            seed,
            n_terms=cfg.n_terms,
            coeff_var=cfg.coeff_var,
            freq_var=cfg.freq_var,
            noise_variance=cfg.noise_var,
        )
        d1 = sim.generate_d1(pair, cfg.n1, sim.substream(seed, 1))
        d2 = sim.generate_d2(
            pair, cfg.n_grid, cfg.edge_remove, cfg.center_remove, sim.substream(seed, 2)
        )
    except ConfigError:
        raise
    except (CascalError, ValueError) as exc:
        return TrialResult(
            seed=seed,
            j_bayes=math.nan,
            j_alt1=math.nan,
            j_alt2=math.nan,
            flag=f"{type(exc).__name__}: {exc}",
        )

    costs: dict[str, float] = {}
    times: dict[str, float] = {}
    hp1 = hp2 = None
    try:
        t0 = time.perf_counter()
        stage_one = cascade.calibrate_stage_one(d2, cfg.cascade)
        t_shared = time.perf_counter() - t0

        t0 = time.perf_counter()
        bayes = cascade.calibrate_cascaded(d1, d2, cfg.cascade, stage_one=stage_one)
        costs["bayes"] = sim.cost_j(bayes.apply, pair, cfg.n_quad)
        times["bayes"] = 1e3 * (t_shared + time.perf_counter() - t0)
        hp1, hp2 = bayes.stage_one.hp, bayes.stage_two.hp

        t0 = time.perf_counter()
        alt1 = cascade.calibrate_alternative1(d1, d2, cfg.cascade, stage_one=stage_one)
        costs["alt1"] = sim.cost_j(alt1.apply, pair, cfg.n_quad)
        times["alt1"] = 1e3 * (t_shared + time.perf_counter() - t0)

        t0 = time.perf_counter()
        alt2 = lut.calibrate_lut_cascade(d1, d2, cfg.lut_extrapolation)
        costs["alt2"] = sim.cost_j(alt2.apply, pair, cfg.n_quad)
        times["alt2"] = 1e3 * (time.perf_counter() - t0)
        flag = None
    except (CascalError, ValueError) as exc:
        flag = f"{type(exc).__name__}: {exc}"
        costs.clear()

    return TrialResult(
        seed=seed,
        j_bayes=costs.get("bayes", math.nan),
        j_alt1=costs.get("alt1", math.nan),
        j_alt2=costs.get("alt2", math.nan),
        hp_stage_one=hp1,
        hp_stage_two=hp2,
        rejected_draws=rejected,
        flag=flag,
        d1_checksum=dataset_checksum(d1),
        d2_checksum=dataset_checksum(d2),
        wall_time_ms=times,
    )


def run_campaign(
    n_trials: int,
    base_seed: int,
    cfg: TrialConfig = TrialConfig(),
    max_parallel: int = 1,
) -> list[TrialResult]:
    """Run trials for seeds base_seed .. base_seed + n_trials - 1.

    Results are returned in seed order and are identical for any
    ``max_parallel``.
    """
    if n_trials < 1:
        raise ConfigError(f"n_trials must be >= 1, got {n_trials}")
    seeds = range(base_seed, base_seed + n_trials)
    if max_parallel <= 1:
        return [run_trial(s, cfg) for s in seeds]
    with ProcessPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(run_trial, seeds, [cfg] * n_trials))


@dataclass(frozen=True)
class MethodSummary:
    median: float
    mean: float
    q05: float
    q25: float
    q75: float
    q95: float
    win_rate: dict
    density: np.ndarray
    cdf_values: np.ndarray
    cdf_fractions: np.ndarray


@dataclass(frozen=True)
class CampaignSummary:
    n_trials: int
    n_flagged: int
    bin_edges: np.ndarray
    methods: dict

    def to_dict(self) -> dict:
        return {
            "n_trials": int(self.n_trials),
            "n_flagged": int(self.n_flagged),
            "bin_edges": [float(v) for v in self.bin_edges],
            "methods": {
                name: {
                    "median": float(m.median),
                    "mean": float(m.mean),
                    "q05": float(m.q05),
                    "q25": float(m.q25),
                    "q75": float(m.q75),
                    "q95": float(m.q95),
                    "win_rate": {k: float(v) for k, v in m.win_rate.items()},
                    "density": [float(v) for v in m.density],
                    "cdf_values": [float(v) for v in m.cdf_values],
                    "cdf_fractions": [float(v) for v in m.cdf_fractions],
                }
                for name, m in self.methods.items()
            },
        }


def summarize(results: list, n_bins: int = 60) -> CampaignSummary:
    """Aggregate a campaign into per-method statistics.

    Histograms share common bin edges spanning [0, 99.5th percentile of the
    pooled costs] and are normalized to unit area over the binned range;
    win rates count strict wins (ties favor neither side).
    """
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}")
    ok = [r for r in results if r.ok]
    if not ok:
        raise EmptyCampaign("no unflagged trials to summarize")
    n_flagged = len(results) - len(ok)

    js = {m: np.array([r.j_for(m) for r in ok]) for m in METHODS}
    pooled = np.concatenate(list(js.values()))
    hi = float(np.percentile(pooled, 99.5))
    if hi <= 0.0:
        hi = 1e-12
    edges = np.linspace(0.0, hi, n_bins + 1)
    widths = np.diff(edges)

    methods = {}
    for m in METHODS:
        j = js[m]
        counts, _ = np.histogram(j, bins=edges)
        total = counts.sum()
        density = counts / (total * widths) if total else np.zeros(n_bins)
        order = np.sort(j)
        fractions = np.arange(1, len(order) + 1) / len(order)
        win_rate = {
            other: float(np.mean(j < js[other]))
            for other in METHODS
            if other != m
        }
        methods[m] = MethodSummary(
            median=float(np.median(j)),
            mean=float(np.mean(j)),
            q05=float(np.percentile(j, 5)),
            q25=float(np.percentile(j, 25)),
            q75=float(np.percentile(j, 75)),
            q95=float(np.percentile(j, 95)),
            win_rate=win_rate,
            density=density,
            cdf_values=order,
            cdf_fractions=fractions,
        )
    return CampaignSummary(
        n_trials=len(ok), n_flagged=n_flagged, bin_edges=edges, methods=methods
    )


# ---------------------------------------------------------------------------
# results export
# ---------------------------------------------------------------------------

TRIALS_HEADER = ["seed", "j_bayes", "j_alt1", "j_alt2", "flag"]


def write_trials_csv(results: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIALS_HEADER)
        for r in results:
            writer.writerow(
                [
                    int(r.seed),
                    repr(float(r.j_bayes)),
                    repr(float(r.j_alt1)),
                    repr(float(r.j_alt2)),
                    r.flag or "",
                ]
            )


def read_trials_csv(path) -> list:
    results = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIALS_HEADER:
            raise ConfigError(
                f"{path}: expected header {','.join(TRIALS_HEADER)!r}"
            )
        for row in reader:
            if not row:
                continue
            results.append(
                TrialResult(
                    seed=int(row[0]),
                    j_bayes=float(row[1]),
                    j_alt1=float(row[2]),
                    j_alt2=float(row[3]),
                    flag=row[4] or None,
                )
            )
    return results


def write_summary_json(summary: CampaignSummary, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
