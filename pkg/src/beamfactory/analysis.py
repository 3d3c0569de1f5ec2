"""Campaign analytics: grid averaging, campaign comparison maps, coverage
probabilities, beam-recovery gap statistics, route smoothing and
beam-dominance maps.

All functions are pure over immutable traces.  Cell averages default to the
dB domain (arithmetic mean of dBm values, the classic local-average choice
for log-normal data); a mW-domain option exists behind ``domain="mw"``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .beams import SsbId
from .layout import FactoryLayout, GridSpec, angles_to_tx_many
from .link import MeasurementTrace
from .propagation import SPEED_OF_LIGHT

# grid used for beam-dominance density maps
DOMINANCE_CELL_DX = 2.7
DOMINANCE_CELL_DY = 2.4


def _cell_mean(values: np.ndarray, flat_idx: np.ndarray, n_cells: int,
               domain: str) -> tuple[np.ndarray, np.ndarray]:
    count = np.bincount(flat_idx, minlength=n_cells)
    if domain == "mw":
        acc = np.bincount(flat_idx, weights=10.0 ** (values / 10.0), minlength=n_cells)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = 10.0 * np.log10(acc / count)
    elif domain == "db":
        acc = np.bincount(flat_idx, weights=values, minlength=n_cells)
        with np.errstate(invalid="ignore"):
            mean = acc / count
    else:
        raise ValueError("domain must be 'db' or 'mw'")
    mean[count == 0] = np.nan
    return mean, count


@dataclass(frozen=True)
class GridStat:
    """Per-cell mean of the per-burst strongest RSRP; empty cells are NaN."""
    grid: GridSpec
    mean: np.ndarray   # (ny, nx), dBm, NaN where no samples
    count: np.ndarray  # (ny, nx)


def local_average(trace: MeasurementTrace, grid: GridSpec, domain: str = "db") -> GridStat:
    """Average the per-burst strongest RSRP over grid cells.

    Cells tens of wavelengths wide strip small-scale fading while keeping
    the local mean; bursts with no detected beam are skipped.
    """
    if trace.n_samples == 0:
        raise ValueError("trace is empty")
    best, col = trace.strongest()
    ok = col >= 0
    if not ok.any():
        raise ValueError("trace has no detected beams")
    ix, iy = grid.indices(trace.positions[ok])
    flat = iy * grid.nx + ix
    mean, count = _cell_mean(best[ok], flat, grid.n_cells, domain)
    return GridStat(grid, mean.reshape(grid.ny, grid.nx), count.reshape(grid.ny, grid.nx))


@dataclass(frozen=True)
class ComparisonMap:
    """Cell-wise difference of two grid averages, defined on joint support."""
    grid: GridSpec
    diff: np.ndarray  # (ny, nx), dB, NaN outside joint support


def gamma_map(a: GridStat, b: GridStat) -> ComparisonMap:
    """Per-cell RSRP advantage of campaign ``a`` over campaign ``b`` (dB)."""
    if a.grid != b.grid:
        raise ValueError("grid averages must share the same GridSpec")
    joint = (a.count > 0) & (b.count > 0)
    diff = np.where(joint, a.mean - b.mean, np.nan)
    return ComparisonMap(a.grid, diff)


# ---------------------------------------------------------------------------
# coverage

@dataclass(frozen=True)
class CoverageResult:
    threshold: float
    bins: tuple[tuple[float, float], ...]
    probability: np.ndarray          # per bin, NaN where the bin is empty
    count: np.ndarray                # samples per bin
    cdfs: tuple                      # per bin: (sorted values, cumulative probs)


def coverage_probability(trace: MeasurementTrace, threshold: float,
                         distance_bins, layout: FactoryLayout) -> CoverageResult:
    """P(strongest RSRP < threshold | TX-RX range in bin), with per-bin CDFs.

    Distances are the 3D TX-to-RX range.  Empty bins report NaN, never 0.
    """
    bins = tuple((float(lo), float(hi)) for lo, hi in distance_bins)
    for k, (lo, hi) in enumerate(bins):
        if hi <= lo:
            raise ValueError(f"bin {k}: upper edge must exceed lower edge")
        for lo2, hi2 in bins[k + 1:]:
            if max(lo, lo2) < min(hi, hi2):
                raise ValueError("distance bins must not overlap")
    best, col = trace.strongest()
    ok = col >= 0
    _az, _tilt, d3 = angles_to_tx_many(layout, trace.positions)
    prob = np.full(len(bins), np.nan)
    count = np.zeros(len(bins), dtype=int)
    cdfs = []
    for k, (lo, hi) in enumerate(bins):
        sel = ok & (d3 >= lo) & (d3 < hi)
        values = best[sel]
        count[k] = len(values)
        if len(values):
            prob[k] = float(np.mean(values < threshold))
            v = np.sort(values)
            cdfs.append((v, np.arange(1, len(v) + 1) / len(v)))
        else:
            cdfs.append((np.array([]), np.array([])))
    return CoverageResult(float(threshold), bins, prob, count, tuple(cdfs))


# ---------------------------------------------------------------------------
# beam-recovery gap statistics

@dataclass(frozen=True)
class BeamDeltaStats:
    """Per-burst RSRP gaps between the strongest and the i-th strongest beam.

    ``deltas[i]`` holds one non-negative gap per burst that detected at
    least i beams; gaps grow with i inside every burst by construction.
    """
    max_i: int
    deltas: dict[int, np.ndarray]
    n_bursts: int

    def cdf(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        v = np.sort(self.deltas[i])
        return v, np.arange(1, len(v) + 1) / len(v)

    def percentile(self, i: int, prob: float) -> float:
        """Gap value x with P(gap_i < x) = prob, by linear CDF interpolation."""
        return float(np.quantile(self.deltas[i], prob, method="linear"))

    def percentile_table(self, probs=(0.25, 0.50, 0.75)) -> dict[float, dict[int, float]]:
        return {p: {i: self.percentile(i, p) for i in sorted(self.deltas)} for p in probs}


def delta_stats(trace: MeasurementTrace, max_i: int) -> BeamDeltaStats:
    """Gap of each backup beam order i = 2..max_i to the per-burst strongest.

    Bursts detecting fewer than i beams contribute only their available
    orders, matching a scanner that only reports detected SSBs.
    """
    if max_i < 2:
        raise ValueError("max_i must be >= 2")
    filled = np.where(np.isfinite(trace.rsrp), trace.rsrp, -np.inf)
    order = np.sort(filled, axis=1)[:, ::-1]  # descending per burst
    n_detected = np.isfinite(trace.rsrp).sum(axis=1)
    if not (n_detected >= 2).any():
        raise ValueError("no burst detected two or more beams")
    deltas: dict[int, np.ndarray] = {}
    for i in range(2, max_i + 1):
        rows = n_detected >= i
        if rows.any():
            deltas[i] = order[rows, 0] - order[rows, i - 1]
    return BeamDeltaStats(max_i, deltas, int(trace.n_samples))


# ---------------------------------------------------------------------------
# route smoothing

@dataclass(frozen=True)
class SmoothedRoute:
    """Spatially averaged per-beam RSRP along a route (dual indexing).

    ``distance_m`` is the travelled arc length, ``azimuth_deg`` the TX-frame
    azimuth of each sample; both index the same rows of ``smoothed``.
    """
    beam_ids: tuple[SsbId, ...]
    distance_m: np.ndarray
    azimuth_deg: np.ndarray
    smoothed: np.ndarray        # (n_samples, n_beams), NaN where never detected
    window_m: float
    degenerate: bool            # True when the window exceeded the route length


def route_smoothing(trace: MeasurementTrace, layout: FactoryLayout,
                    window_wavelengths: float = 40.0,
                    carrier_freq: float | None = None) -> SmoothedRoute:
    """Centered moving average over a spatial window of N wavelengths.

    Averaging over tens of wavelengths of travelled distance removes
    small-scale fading while preserving the local mean per beam.
    """
    if carrier_freq is None:
        carrier_freq = trace.metadata.get("carrier_freq_hz")
    if not carrier_freq:
        raise ValueError("carrier_freq is required (not present in trace metadata)")
    window = window_wavelengths * SPEED_OF_LIGHT / float(carrier_freq)
    step = np.hypot(*np.diff(trace.positions, axis=0).T) if trace.n_samples > 1 else np.array([])
    s = np.concatenate([[0.0], np.cumsum(step)])
    az, _tilt, _d3 = angles_to_tx_many(layout, trace.positions)

    degenerate = s[-1] <= window
    half = window / 2.0
    lo = np.searchsorted(s, s - half, side="left")
    hi = np.searchsorted(s, s + half, side="right")
    if degenerate:
        lo = np.zeros(len(s), dtype=int)
        hi = np.full(len(s), len(s), dtype=int)

    finite = np.isfinite(trace.rsrp)
    values = np.where(finite, trace.rsrp, 0.0)
    cum_v = np.vstack([np.zeros(trace.rsrp.shape[1]), np.cumsum(values, axis=0)])
    cum_n = np.vstack([np.zeros(trace.rsrp.shape[1]), np.cumsum(finite, axis=0)])
    n_in = cum_n[hi] - cum_n[lo]
    with np.errstate(invalid="ignore"):
        smoothed = (cum_v[hi] - cum_v[lo]) / n_in
    smoothed[n_in == 0] = np.nan
    return SmoothedRoute(trace.beam_ids, s, az, smoothed, window, bool(degenerate))


# ---------------------------------------------------------------------------
# dominance maps

@dataclass(frozen=True)
class DominanceMap:
    """Fraction of bursts per cell whose strongest beam lies in a queried subset."""
    grid: GridSpec
    subset: frozenset
    fraction: np.ndarray  # (ny, nx) in [0, 1], NaN where no bursts landed
    count: np.ndarray


def dominance_map(trace: MeasurementTrace, subset, grid: GridSpec | None = None) -> DominanceMap:
    """How often the queried SSB subset holds the strongest beam, per cell."""
    subset = frozenset(subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    known = set(trace.beam_ids)
    unknown = subset - known
    if unknown:
        raise KeyError(f"beams {sorted(map(str, unknown))} not in configuration {trace.config}")
    if grid is None:
        grid = GridSpec.cover(trace.positions, DOMINANCE_CELL_DX, DOMINANCE_CELL_DY)
    _best, col = trace.strongest()
    ok = col >= 0
    in_subset = np.zeros(len(trace.beam_ids), dtype=bool)
    for k, ssb in enumerate(trace.beam_ids):
        in_subset[k] = ssb in subset
    ix, iy = grid.indices(trace.positions[ok])
    flat = iy * grid.nx + ix
    hits = np.bincount(flat, weights=in_subset[col[ok]].astype(float), minlength=grid.n_cells)
    count = np.bincount(flat, minlength=grid.n_cells)
    with np.errstate(invalid="ignore"):
        frac = hits / count
    frac[count == 0] = np.nan
    return DominanceMap(grid, subset, frac.reshape(grid.ny, grid.nx),
                        count.reshape(grid.ny, grid.nx))


# ---------------------------------------------------------------------------
# CSV export helpers

def write_grid_csv(path, grid: GridSpec, matrix: np.ndarray, value_name: str) -> None:
    """Matrix CSV (rows south to north) plus a JSON sidecar with grid geometry."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for j in range(matrix.shape[0]):
            w.writerow(["" if not np.isfinite(v) else f"{v:.3f}" for v in matrix[j]])
    sidecar = {
        "value": value_name,
        "origin_x_m": grid.origin[0],
        "origin_y_m": grid.origin[1],
        "cell_dx_m": grid.cell_dx,
        "cell_dy_m": grid.cell_dy,
        "nx": grid.nx,
        "ny": grid.ny,
        "row_order": "y index 0 first (south to north)",
    }
    with open(path.rsplit(".", 1)[0] + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_cdf_csv(path, values: np.ndarray, probs: np.ndarray,
                  value_name: str = "value") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([value_name, "probability"])
        for v, p in zip(values, probs):
            w.writerow([f"{v:.4f}", f"{p:.6f}"])
