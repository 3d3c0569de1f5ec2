"""Path-gain models, shadowing fields and model fitting.

The slope-intercept family PG(d) = PG_1m - 10 n log10(d) + N(0, sigma^2)
covers everything here.  Preset parameter rows bundle published indoor
factory models (measurement fits, Friis, close-in 28 GHz sparse clutter,
3GPP TR 38.901 InF and the Chizhik et al. factory model) for LoS and NLoS.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtri

from .layout import OutOfGridError, Visibility

SPEED_OF_LIGHT = 299792458.0


class DegenerateFitError(ValueError):
    """Regression input cannot identify a slope-intercept model."""


@dataclass(frozen=True)
class PathGainModel:
    pg_1m: float   # dB at the 1 m reference distance
    n: float       # path-loss exponent
    sigma: float   # shadowing standard deviation, dB

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("path-loss exponent n must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0 dB")


class ModelPreset(Enum):
    """Published slope-intercept parameter rows for factory halls.

    Chizhik carries sigma = 0 because no deviation was published for it; use
    it for mean-line RMSE scoring only.
    """

    MEASFIT_LOS = ("MeasFit-LoS", PathGainModel(-58.8, 2.29, 4.6))
    FRIIS = ("Friis", PathGainModel(-60.9, 2.00, 0.0))
    CI_LOS_SC = ("CI-LoS-SC", PathGainModel(-60.9, 1.98, 4.3))
    INF_LOS = ("InF-LoS", PathGainModel(-58.9, 2.15, 4.3))
    MEASFIT_NLOS = ("MeasFit-NLoS", PathGainModel(-39.6, 4.40, 5.8))
    INF_NLOS_DL = ("InF-NLoS-DL", PathGainModel(-47.1, 3.57, 7.2))
    CHIZHIK = ("Chizhik", PathGainModel(-41.9, 4.04, 0.0))

    def __init__(self, preset_name: str, model: PathGainModel):
        self.preset_name = preset_name
        self.model = model

    @classmethod
    def by_name(cls, name: str) -> "ModelPreset":
        for preset in cls:
            if preset.preset_name == name:
                return preset
        raise KeyError(f"unknown model preset {name!r}; "
                       f"available: {[p.preset_name for p in cls]}")


LOS_PRESETS = (ModelPreset.MEASFIT_LOS, ModelPreset.FRIIS, ModelPreset.CI_LOS_SC,
               ModelPreset.INF_LOS)
NLOS_PRESETS = (ModelPreset.MEASFIT_NLOS, ModelPreset.INF_NLOS_DL, ModelPreset.CHIZHIK)


def path_gain_mean(model: PathGainModel, d) -> np.ndarray | float:
    """Deterministic path gain at 3D distance d >= 1 m."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("path_gain_mean is anchored at 1 m; d < 1 m is out of domain")
    out = model.pg_1m - 10.0 * model.n * np.log10(d)
    return float(out) if out.ndim == 0 else out


def friis_pg1m(freq: float) -> float:
    """Free-space path gain at the 1 m reference for the given carrier."""
    if freq <= 0:
        raise ValueError("carrier frequency must be > 0")
    return -20.0 * math.log10(4.0 * math.pi * freq / SPEED_OF_LIGHT)


def effective_gain_correction(vis: Visibility) -> float:
    """Median effective-gain degradation of a directive TX in clutter (dB).

    Subtracted from the nominal TX gain during synthesis and added back when
    extracting path gain: 1.0 dB in LoS, 4.9 dB in NLoS.
    """
    return 1.0 if Visibility(vis) is Visibility.LOS else 4.9


# ---------------------------------------------------------------------------
# shadowing

def _splitmix64(x: np.ndarray) -> np.ndarray:
    # 64-bit avalanche mix; wraps mod 2**64 by unsigned overflow
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)).astype(np.uint64)
    return x ^ (x >> np.uint64(31))


def _hash_normal(seed: int, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    """Standard-normal draw keyed by (seed, quantized position)."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    h = _splitmix64(xq.astype(np.uint64) ^ s)
    h = _splitmix64(h ^ yq.astype(np.uint64) ^ np.uint64(0xD1B54A32D192ED03))
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


MAX_FIELD_NODES = 20000


@dataclass(frozen=True)
class ShadowingField:
    """Zero-mean Gaussian shadowing over a node lattice.

    Node values carry an exponential autocorrelation exp(-d/d0) and exact
    marginal deviation ``sigma``; queries between nodes are bilinear, which
    dips the local variance by a few percent at sub-node scale.  With
    ``decorrelation_distance == 0`` the field degenerates to white noise:
    each queried position gets an independent draw, deterministic in
    (seed, position).
    """

    sigma: float
    decorrelation_distance: float
    seed: int
    extent: tuple[float, float, float, float]
    node_dx: float
    node_dy: float
    values: np.ndarray | None  # (n_nodes_y, n_nodes_x); None in white mode

    @classmethod
    def generate(
        cls,
        extent: tuple[float, float, float, float],
        sigma: float,
        decorrelation_distance: float = 10.0,
        seed: int = 0,
        node_spacing: float | None = None,
    ) -> "ShadowingField":
        x0, y0, x1, y1 = map(float, extent)
        if not (x1 > x0 and y1 > y0):
            raise ValueError("field extent must be non-degenerate")
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        if decorrelation_distance < 0:
            raise ValueError("decorrelation_distance must be >= 0")
        if decorrelation_distance == 0.0 or sigma == 0.0:
            return cls(sigma, decorrelation_distance, seed, (x0, y0, x1, y1),
                       0.0, 0.0, None)
        if node_spacing is None:
            node_spacing = decorrelation_distance / 10.0
        nnx = int(math.ceil((x1 - x0) / node_spacing)) + 1
        nny = int(math.ceil((y1 - y0) / node_spacing)) + 1
        if nnx * nny > MAX_FIELD_NODES:
            raise ValueError(
                f"{nnx * nny} field nodes exceed the {MAX_FIELD_NODES} limit; "
                "use a coarser node_spacing")
        xs = x0 + np.arange(nnx) * node_spacing
        ys = y0 + np.arange(nny) * node_spacing
        gx, gy = np.meshgrid(xs, ys)
        nodes = np.column_stack([gx.ravel(), gy.ravel()])
        dist = np.hypot(nodes[:, 0, None] - nodes[None, :, 0],
                        nodes[:, 1, None] - nodes[None, :, 1])
        cov = sigma ** 2 * np.exp(-dist / decorrelation_distance)
        cov[np.diag_indices_from(cov)] += 1e-10 * sigma ** 2
        chol = np.linalg.cholesky(cov)
        z = np.random.default_rng(seed).standard_normal(len(nodes))
        values = (chol @ z).reshape(nny, nnx)
        return cls(sigma, decorrelation_distance, seed,
                   (x0, y0, x0 + (nnx - 1) * node_spacing, y0 + (nny - 1) * node_spacing),
                   node_spacing, node_spacing, values)

    @classmethod
    def white(cls, extent, sigma: float, seed: int = 0) -> "ShadowingField":
        """Spatially uncorrelated field (decorrelation distance 0)."""
        return cls.generate(extent, sigma, decorrelation_distance=0.0, seed=seed)

    def sample_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, y0, x1, y1 = self.extent
        x, y = pts[:, 0], pts[:, 1]
        ok = (x >= x0 - 1e-9) & (x <= x1 + 1e-9) & (y >= y0 - 1e-9) & (y <= y1 + 1e-9)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise OutOfGridError(
                f"point ({x[bad]:.3f}, {y[bad]:.3f}) outside shadowing extent {self.extent}")
        if self.sigma == 0.0:
            return np.zeros(len(pts))
        if self.values is None:  # white mode, keyed on micrometre-quantized position
            xq = np.round((x - x0) * 1e6).astype(np.int64)
            yq = np.round((y - y0) * 1e6).astype(np.int64)
            return self.sigma * _hash_normal(self.seed, xq, yq)
        fx = np.clip((x - x0) / self.node_dx, 0.0, self.values.shape[1] - 1.0)
        fy = np.clip((y - y0) / self.node_dy, 0.0, self.values.shape[0] - 1.0)
        ix = np.minimum(fx.astype(int), self.values.shape[1] - 2)
        iy = np.minimum(fy.astype(int), self.values.shape[0] - 2)
        tx = fx - ix
        ty = fy - iy
        v = self.values
        return ((1 - tx) * (1 - ty) * v[iy, ix]
                + tx * (1 - ty) * v[iy, ix + 1]
                + (1 - tx) * ty * v[iy + 1, ix]
                + tx * ty * v[iy + 1, ix + 1])


def sample_shadowing(field: ShadowingField, p) -> float:
    """Shadowing value at a single point (bilinear node interpolation)."""
    return float(field.sample_many([p])[0])


# ---------------------------------------------------------------------------
# fitting

def fit_slope_intercept(samples) -> PathGainModel:
    """Ordinary least squares of path gain against log10(distance).

    Intercept gives pg_1m, slope gives -10 n, and sigma is the residual
    standard deviation.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise DegenerateFitError("need at least 3 (distance, path gain) samples")
    d, pg = arr[:, 0], arr[:, 1]
    if np.any(d < 1.0):
        raise DegenerateFitError("all distances must be >= 1 m")
    x = np.log10(d)
    if np.ptp(x) < 1e-12:
        raise DegenerateFitError("need at least two distinct distances")
    slope, intercept = np.polyfit(x, pg, 1)
    resid = pg - (intercept + slope * x)
    return PathGainModel(float(intercept), float(-slope / 10.0), float(np.std(resid)))


def model_rmse(model: PathGainModel, samples) -> float:
    """Root-mean-square error of samples against the model's mean line."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("model_rmse needs at least one sample")
    arr = np.atleast_2d(arr)
    resid = arr[:, 1] - path_gain_mean(model, arr[:, 0])
    return float(np.sqrt(np.mean(resid ** 2)))


def draw_path_gain(model: PathGainModel, d, rng) -> np.ndarray:
    """Mean line plus iid N(0, sigma^2) noise; handy for round-trip checks."""
    d = np.asarray(d, dtype=float)
    return path_gain_mean(model, d) + model.sigma * rng.standard_normal(d.shape)


def write_preset_table(path) -> None:
    """Export the preset rows as CSV (name, pg_1m_db, n, sigma_db)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "pg_1m_db", "n", "sigma_db"])
        for preset in ModelPreset:
            m = preset.model
            w.writerow([preset.preset_name, f"{m.pg_1m:.1f}", f"{m.n:.2f}", f"{m.sigma:.1f}"])
