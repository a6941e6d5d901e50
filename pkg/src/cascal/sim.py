"""Synthetic sensors, dataset generation, and the accuracy cost oracle.

Each synthetic sensor reads the true position plus a random finite Fourier
series (smooth, position-dependent inaccuracy) plus white noise.  The true
correction map is only available here, by numerically inverting the
noiseless response, which is what makes the accuracy cost computable in
simulation while it never is on hardware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import CalibrationDataset
from .errors import ConfigError, NonMonotonic

#: Fraction of the position range added on each side before checking
#: monotonicity and bracketing inversions.
RANGE_PAD = 0.05

#: Grid resolution for the monotonicity check / inversion bracket.
MONOTONE_GRID = 4001

#: Give up redrawing non-monotone truths after this many attempts.
MAX_TRUTH_ATTEMPTS = 1000


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible random stream for (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class SensorTruth:
    """Ground-truth inaccuracy model of one sensor.

    reading(p) = p + sum_k sin_coeffs[k]*sin(freqs[k]*p)
                   + cos_coeffs[k]*cos(freqs[k]*p) + noise
    """

    sin_coeffs: np.ndarray
    cos_coeffs: np.ndarray
    freqs: np.ndarray
    noise_variance: float

    def __post_init__(self) -> None:
        sin_c = np.asarray(self.sin_coeffs, dtype=float).ravel()
        cos_c = np.asarray(self.cos_coeffs, dtype=float).ravel()
        freqs = np.asarray(self.freqs, dtype=float).ravel()
        object.__setattr__(self, "sin_coeffs", sin_c)
        object.__setattr__(self, "cos_coeffs", cos_c)
        object.__setattr__(self, "freqs", freqs)
        if not (sin_c.shape == cos_c.shape == freqs.shape):
            raise ValueError("coefficient and frequency vectors must match in length")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")

    def to_dict(self) -> dict:
        return {
            "sin_coeffs": [float(v) for v in self.sin_coeffs],
            "cos_coeffs": [float(v) for v in self.cos_coeffs],
            "freqs": [float(v) for v in self.freqs],
            "noise_variance": float(self.noise_variance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorTruth":
        return cls(
            sin_coeffs=np.asarray(d["sin_coeffs"], dtype=float),
            cos_coeffs=np.asarray(d["cos_coeffs"], dtype=float),
            freqs=np.asarray(d["freqs"], dtype=float),
            noise_variance=float(d["noise_variance"]),
        )


@dataclass(frozen=True)
class TruthPair:
    """Ground truth for one simulated calibration problem.

    ``sensor1`` is the device under calibration, ``sensor2`` the test bed;
    the reference instrument reads the true position directly (plus noise).
    """

    sensor1: SensorTruth
    sensor2: SensorTruth
    range: tuple = (0.0, 1.0)

    def __post_init__(self) -> None:
        lo, hi = float(self.range[0]), float(self.range[1])
        object.__setattr__(self, "range", (lo, hi))
        if not lo < hi:
            raise ValueError(f"range must be well-ordered, got {self.range}")

    def to_dict(self) -> dict:
        return {
            "sensor1": self.sensor1.to_dict(),
            "sensor2": self.sensor2.to_dict(),
            "range": [self.range[0], self.range[1]],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruthPair":
        return cls(
            sensor1=SensorTruth.from_dict(d["sensor1"]),
            sensor2=SensorTruth.from_dict(d["sensor2"]),
            range=(float(d["range"][0]), float(d["range"][1])),
        )


def sample_truth(
    rng_seed,
    n_terms: int = 10,
    coeff_var: float = 1e-4,
    freq_var: float = 6.0,
    noise_variance: float = 1e-8,
) -> SensorTruth:
    """Draw one random sensor truth.

    Coefficients are i.i.d. Normal(0, coeff_var) and frequencies
    Normal(0, freq_var) — both arguments are variances.  ``rng_seed`` may
    be an integer seed or a Generator.
    """
    if coeff_var < 0 or freq_var < 0 or noise_variance < 0 or n_terms < 0:
        raise ValueError("variances and n_terms must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    return SensorTruth(
        sin_coeffs=rng.normal(0.0, math.sqrt(coeff_var), n_terms),
        cos_coeffs=rng.normal(0.0, math.sqrt(coeff_var), n_terms),
        freqs=rng.normal(0.0, math.sqrt(freq_var), n_terms),
        noise_variance=noise_variance,
    )


def sensor_eval(t: SensorTruth, y_star) -> np.ndarray:
    """Noiseless sensor response at true position(s)."""
    y = np.asarray(y_star, dtype=float)
    phase = np.multiply.outer(y, t.freqs)
    dev = np.sin(phase) @ t.sin_coeffs + np.cos(phase) @ t.cos_coeffs
    return y + dev


def sensor_read(t: SensorTruth, y_star, rng: np.random.Generator):
    """Noisy sensor reading(s) at true position(s)."""
    clean = sensor_eval(t, y_star)
    noise = rng.normal(0.0, math.sqrt(t.noise_variance), np.shape(clean))
    out = clean + noise
    if np.ndim(y_star) == 0:
        return float(out)
    return out


def _padded_range(rng_range: tuple) -> tuple:
    lo, hi = rng_range
    pad = RANGE_PAD * (hi - lo)
    return lo - pad, hi + pad


def _monotone_grid(t: SensorTruth, rng_range: tuple) -> tuple:
    """Grid and values for bracketing; raises NonMonotonic if not increasing."""
    lo, hi = _padded_range(rng_range)
    grid = np.linspace(lo, hi, MONOTONE_GRID)
    vals = sensor_eval(t, grid)
    if not np.all(np.diff(vals) > 0):
        raise NonMonotonic(
            "sensor response is not strictly increasing on the padded range"
        )
    return grid, vals


def is_monotone(t: SensorTruth, rng_range: tuple = (0.0, 1.0)) -> bool:
    """Whether the noiseless response is strictly increasing on the padded range."""
    try:
        _monotone_grid(t, rng_range)
    except NonMonotonic:
        return False
    return True


def invert_sensor(
    t: SensorTruth, y_obs, tol: float = 1e-10, rng_range: tuple = (0.0, 1.0)
):
    """Invert the noiseless response by bisection.

    Returns the true position(s) whose noiseless reading equals ``y_obs``
    to within ``tol``.  Accepts a scalar or an array.
    """
    grid, vals = _monotone_grid(t, rng_range)
    y = np.atleast_1d(np.asarray(y_obs, dtype=float))
    if np.any(y < vals[0]) or np.any(y > vals[-1]):
        raise ValueError(
            "observation outside the invertible range "
            f"[{vals[0]:.6g}, {vals[-1]:.6g}]"
        )
    idx = np.clip(np.searchsorted(vals, y), 1, len(grid) - 1)
    lo = grid[idx - 1]
    hi = grid[idx]
    # Bisect all queries in lockstep; the bracket starts one grid cell wide,
    # so ~60 halvings put the width far below any useful tolerance.
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = sensor_eval(t, mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < tol * 1e-2:
            break
    root = 0.5 * (lo + hi)
    if np.ndim(y_obs) == 0:
        return float(root[0])
    return root


def sample_truth_pair(
    seed: int,
    n_terms: int = 10,
    coeff_var: float = 1e-4,
    freq_var: float = 6.0,
    noise_variance: float = 1e-8,
    rng_range: tuple = (0.0, 1.0),
) -> tuple:
    """Draw a truth pair, redrawing until both sensors are invertible.

    Non-monotone draws are rejected and redrawn from the next seed
    substream.  Returns (pair, rejected_count).
    """
    for attempt in range(MAX_TRUTH_ATTEMPTS):
        rng = substream(seed, 0, attempt)
        sensor1 = sample_truth(rng, n_terms, coeff_var, freq_var, noise_variance)
        sensor2 = sample_truth(rng, n_terms, coeff_var, freq_var, noise_variance)
        if is_monotone(sensor1, rng_range) and is_monotone(sensor2, rng_range):
            return TruthPair(sensor1, sensor2, rng_range), attempt
    raise NonMonotonic(
        f"no invertible truth pair found in {MAX_TRUTH_ATTEMPTS} draws for seed {seed}"
    )


def generate_d2(
    pair: TruthPair,
    n_grid: int = 100,
    edge_remove: int = 8,
    center_remove: int = 20,
    rng: np.random.Generator | None = None,
) -> CalibrationDataset:
    """Test-bed vs reference dataset on a gappy position grid.

    ``n_grid`` equally spaced true positions are read by the test-bed
    sensor and the reference; ``edge_remove`` points are dropped from each
    end and ``center_remove`` consecutive points from the middle, modelling
    positions the reference instrument cannot reach.
    """
    if n_grid < 4:
        raise ConfigError(f"n_grid must be >= 4, got {n_grid}")
    if edge_remove < 0 or center_remove < 0:
        raise ConfigError("removal counts must be nonnegative")
    center_start = (n_grid - center_remove) // 2
    kept = n_grid - 2 * edge_remove - center_remove
    if kept < 2:
        raise ConfigError(
            f"removals leave {kept} of {n_grid} points; need at least 2"
        )
    if center_start < edge_remove or center_start + center_remove > n_grid - edge_remove:
        raise ConfigError("center removal overlaps the edge removals")
    rng = np.random.default_rng(rng)

    lo, hi = pair.range
    y_star = np.linspace(lo, hi, n_grid)
    y2 = sensor_read(pair.sensor2, y_star, rng)
    y3 = y_star + rng.normal(
        0.0, math.sqrt(pair.sensor2.noise_variance), n_grid
    )
    keep = np.ones(n_grid, dtype=bool)
    keep[:edge_remove] = False
    if edge_remove:
        keep[-edge_remove:] = False
    keep[center_start : center_start + center_remove] = False
    return CalibrationDataset(x=y2[keep], y=y3[keep])


def generate_d1(
    pair: TruthPair,
    n1: int = 100,
    rng: np.random.Generator | None = None,
) -> CalibrationDataset:
    """Device vs test-bed dataset on an equally spaced device-reading grid.

    The grid spans the device sensor's noiseless image of the position
    range; true positions are recovered by inversion, then read by the
    test-bed sensor.  The recorded device readings carry their own noise.
    """
    if n1 < 2:
        raise ConfigError(f"n1 must be >= 2, got {n1}")
    rng = np.random.default_rng(rng)
    lo, hi = pair.range
    y1_lo = float(sensor_eval(pair.sensor1, lo))
    y1_hi = float(sensor_eval(pair.sensor1, hi))
    y1_grid = np.linspace(y1_lo, y1_hi, n1)
    y_star = invert_sensor(pair.sensor1, y1_grid, rng_range=pair.range)
    y2 = sensor_read(pair.sensor2, y_star, rng)
    x = y1_grid + rng.normal(0.0, math.sqrt(pair.sensor1.noise_variance), n1)
    return CalibrationDataset(x=x, y=y2)


def true_f13(pair: TruthPair, y1):
    """Ground-truth correction map: device reading to true position."""
    return invert_sensor(pair.sensor1, y1, rng_range=pair.range)


def cost_j(model_apply, pair: TruthPair, n_quad: int = 2001) -> float:
    """Normalized root-integrated-squared error of a calibration map.

    Evaluates the map against the ground-truth correction on an equally
    spaced grid over the device sensor's noiseless reading range and
    integrates with the composite trapezoid rule.
    """
    if n_quad < 2:
        raise ConfigError(f"n_quad must be >= 2, got {n_quad}")
    lo, hi = pair.range
    y1_lo = float(sensor_eval(pair.sensor1, lo))
    y1_hi = float(sensor_eval(pair.sensor1, hi))
    if not y1_lo < y1_hi:
        raise NonMonotonic("device sensor range collapsed; cannot evaluate cost")
    grid = np.linspace(y1_lo, y1_hi, n_quad)
    err = np.asarray(model_apply(grid), dtype=float) - true_f13(pair, grid)
    mean_sq = np.trapezoid(err * err, grid) / (y1_hi - y1_lo)
    return float(math.sqrt(mean_sq))


def save_truth_pair(pair: TruthPair, path) -> None:
    import json

    with open(path, "w") as fh:
        json.dump(pair.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_truth_pair(path) -> TruthPair:
    import json

    with open(path) as fh:
        return TruthPair.from_dict(json.load(fh))
