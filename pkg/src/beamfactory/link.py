"""Link budget, per-SSB RSRP synthesis and the measurement-campaign runner.

RSRP is modelled per resource element: the budget identity

    PG[dB] = RSRP[dBm] - P_TX/RE[dBm] - G_TX[dB] - G_RX[dB]

is applied in reverse during synthesis (with the clutter gain correction
folded into G_TX) and forward in :func:`extract_path_gain`, so the two are
exact algebraic inverses.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .beams import BeamGridConfig, SsbId, gain_matrix, make_config
from .layout import (FactoryLayout, OutOfLayoutError, RouteSpec, angles_to_tx_many,
                     blocking_excess_db, classify_visibility_many, sample_route)
from .propagation import (PathGainModel, ShadowingField, SPEED_OF_LIGHT, _hash_normal,
                          path_gain_mean)

DEFAULT_NOISE_FLOOR_DBM = -120.0


@dataclass(frozen=True)
class LinkBudget:
    p_c: float = 21.2               # total carrier power, dBm
    carrier_bandwidth: float = 100e6
    scs: float = 120e3
    n_rb: int = 66
    n_re: int = 792                 # 12 subcarriers per PRB
    g_rx: float = 0.0               # omnidirectional biconical RX
    carrier_freq: float = 26.0e9

    def __post_init__(self):
        if self.n_re != 12 * self.n_rb:
            raise ValueError("n_re must equal 12 * n_rb")
        if not math.isfinite(self.p_c):
            raise ValueError("p_c must be finite")
        ratio = self.scs / 15e3
        mu = round(math.log2(ratio)) if ratio > 0 else -1
        if mu < 0 or abs(ratio - 2 ** mu) > 1e-9:
            raise ValueError("scs must be 15 kHz * 2^n for integer n >= 0")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass(frozen=True)
class SsbTiming:
    burst_periodicity: float = 0.020
    burst_duration: float = 0.005
    symbol_duration: float = 8.91e-6

    def __post_init__(self):
        if min(self.burst_periodicity, self.burst_duration, self.symbol_duration) <= 0:
            raise ValueError("all SSB timing values must be > 0")
        if self.burst_duration >= self.burst_periodicity:
            raise ValueError("burst_duration must be shorter than burst_periodicity")


def tx_power_per_re(budget: LinkBudget) -> float:
    """Transmit power per resource element: P_c spread over n_re subcarriers."""
    return budget.p_c - 10.0 * math.log10(budget.n_re)


def doppler_shift(speed: float, freq: float) -> float:
    """Maximum Doppler shift at the given platform speed, Hz."""
    if speed < 0:
        raise ValueError("speed must be >= 0")
    return speed * freq / SPEED_OF_LIGHT


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class MeasurementSample:
    time: float
    position: tuple[float, float]
    entries: tuple[tuple[SsbId, float], ...]  # (beam id, RSRP dBm), detected beams only


class MeasurementTrace:
    """Time-ordered per-SSB RSRP record of one campaign.

    Internally a dense (n_samples, n_beams) matrix with NaN for beams below
    the detection floor; ``samples`` materializes the per-burst entry lists.
    """

    def __init__(self, config: str, times, positions, rsrp, beam_ids,
                 metadata: dict | None = None, route_index=None):
        self.config = str(config)
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        self.rsrp = np.asarray(rsrp, dtype=float)
        self.beam_ids = tuple(beam_ids)
        self.metadata = dict(metadata or {})
        self.route_index = None if route_index is None else np.asarray(route_index, dtype=int)
        if self.rsrp.shape != (len(self.times), len(self.beam_ids)):
            raise ValueError("rsrp matrix must be (n_samples, n_beams)")
        if len(self.positions) != len(self.times):
            raise ValueError("positions and times must have equal length")
        if len(self.times) == 0:
            raise ValueError("trace must contain at least one sample")
        diffs = np.diff(self.times)
        if len(diffs) and (diffs <= 0).any():
            raise ValueError("trace timestamps must be strictly increasing")
        # 2.5e-6 s slack absorbs the 6-decimal CSV quantization of timestamps
        if len(diffs) and np.ptp(diffs) > 2.5e-6:
            raise ValueError("trace timestamps must be uniformly spaced")
        for ssb in self.beam_ids:
            if ssb.config != self.config:
                raise ValueError(f"beam {ssb} does not belong to configuration {self.config}")

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def burst_periodicity(self) -> float:
        if len(self.times) < 2:
            return float(self.metadata.get("burst_periodicity_s", 0.020))
        return float(self.times[1] - self.times[0])

    @property
    def samples(self) -> list[MeasurementSample]:
        out = []
        for k in range(self.n_samples):
            row = self.rsrp[k]
            entries = tuple((self.beam_ids[b], float(row[b]))
                            for b in np.flatnonzero(np.isfinite(row)))
            out.append(MeasurementSample(float(self.times[k]),
                                         (float(self.positions[k, 0]), float(self.positions[k, 1])),
                                         entries))
        return out

    def strongest(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-burst strongest RSRP and its beam column (-1, NaN when empty)."""
        filled = np.where(np.isfinite(self.rsrp), self.rsrp, -np.inf)
        any_entry = np.isfinite(self.rsrp).any(axis=1)
        col = np.where(any_entry, np.argmax(filled, axis=1), -1)
        best = np.where(any_entry, filled[np.arange(len(filled)), np.clip(col, 0, None)], np.nan)
        return best, col

    def route_slice(self, route: int | str) -> "MeasurementTrace":
        if self.route_index is None:
            raise ValueError("trace carries no route bookkeeping")
        if isinstance(route, str):
            names = self.metadata.get("routes", [])
            if route not in names:
                raise KeyError(f"unknown route {route!r}; trace has {names}")
            route = names.index(route)
        mask = self.route_index == route
        if not mask.any():
            raise KeyError(f"route index {route} has no samples")
        idx = np.flatnonzero(mask)
        times = np.arange(len(idx)) * self.burst_periodicity
        return MeasurementTrace(self.config, times, self.positions[idx], self.rsrp[idx],
                                self.beam_ids, dict(self.metadata), None)


# ---------------------------------------------------------------------------
# synthesis

def _synthesize_matrix(layout, cfg, model_los, model_nlos, fld, budget,
                       positions, fading_db, noise_floor_dbm) -> np.ndarray:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    is_los = classify_visibility_many(layout, positions)
    az, tilt, d3 = angles_to_tx_many(layout, positions)
    pg = np.where(is_los,
                  path_gain_mean(model_los, np.maximum(d3, 1.0)),
                  path_gain_mean(model_nlos, np.maximum(d3, 1.0)))
    if np.any(d3 < 1.0):
        raise ValueError("link distance below the 1 m model reference")
    pg = pg - blocking_excess_db(layout, positions)
    shade = fld.sample_many(positions) if fld is not None else np.zeros(len(positions))
    correction = np.where(is_los, 1.0, 4.9)
    g_tx = gain_matrix(cfg, az, tilt)
    p_re = tx_power_per_re(budget)
    fading = np.zeros(len(positions)) if fading_db is None else np.asarray(fading_db, dtype=float)
    rsrp = (pg + shade + fading)[:, None] + p_re + (g_tx - correction[:, None]) + budget.g_rx
    return np.where(rsrp >= noise_floor_dbm, rsrp, np.nan)


def synthesize_rsrp(
    layout: FactoryLayout,
    cfg: BeamGridConfig,
    model_los: PathGainModel,
    model_nlos: PathGainModel,
    fld: ShadowingField | None,
    budget: LinkBudget,
    p,
    noise_floor_dbm: float = DEFAULT_NOISE_FLOOR_DBM,
    fading_db: float = 0.0,
) -> list[tuple[SsbId, float]]:
    """Per-beam RSRP at point ``p``; beams below the detection floor are omitted.

    One shadowing realization is shared by every beam at the point: the
    noise term attaches to the path, not to the beam.
    """
    row = _synthesize_matrix(layout, cfg, model_los, model_nlos, fld, budget,
                             [p], [fading_db], noise_floor_dbm)[0]
    return [(cfg.beams[b].id, float(row[b])) for b in np.flatnonzero(np.isfinite(row))]


def extract_path_gain(
    sample: MeasurementSample,
    ssb: SsbId,
    cfg: BeamGridConfig,
    layout: FactoryLayout,
    budget: LinkBudget,
) -> float:
    """Invert the budget arithmetic: RSRP entry -> path gain (+ shadowing), dB."""
    rsrp = None
    for beam_id, value in sample.entries:
        if beam_id == ssb:
            rsrp = value
            break
    if rsrp is None:
        raise KeyError(f"sample at t={sample.time:.3f}s has no entry for beam {ssb}")
    beam = cfg.beam(ssb)  # raises KeyError for ids outside the configuration
    az, tilt, _d3 = angles_to_tx_many(layout, [sample.position])
    is_los = classify_visibility_many(layout, [sample.position])[0]
    correction = 1.0 if is_los else 4.9
    g_tx = float(gain_matrix(cfg, az, tilt)[0, cfg.beam_index(beam.id)])
    return rsrp - tx_power_per_re(budget) - (g_tx - correction) - budget.g_rx


def trace_path_gain_samples(trace: MeasurementTrace, cfg: BeamGridConfig,
                            layout: FactoryLayout, budget: LinkBudget,
                            strongest_only: bool = True) -> np.ndarray:
    """(distance m, path gain dB) pairs recovered from a trace, vectorized."""
    az, tilt, d3 = angles_to_tx_many(layout, trace.positions)
    is_los = classify_visibility_many(layout, trace.positions)
    correction = np.where(is_los, 1.0, 4.9)
    g_tx = gain_matrix(cfg, az, tilt)
    p_re = tx_power_per_re(budget)
    pg = trace.rsrp - p_re - (g_tx - correction[:, None]) - budget.g_rx
    if strongest_only:
        best, col = trace.strongest()
        ok = col >= 0
        rows = np.flatnonzero(ok)
        return np.column_stack([d3[rows], pg[rows, col[rows]]])
    rows, cols = np.nonzero(np.isfinite(pg))
    return np.column_stack([d3[rows], pg[rows, cols]])


# ---------------------------------------------------------------------------
# campaign runner

def _fading_for(seed: int, burst_index: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(len(burst_index))
    # keyed on (seed, burst index): schedule-independent across workers
    return sigma * _hash_normal(seed ^ 0x5DEECE66D, burst_index.astype(np.int64),
                                np.zeros(len(burst_index), dtype=np.int64))


def run_campaign(
    layout: FactoryLayout,
    cfg: BeamGridConfig,
    model_los: PathGainModel,
    model_nlos: PathGainModel,
    fld: ShadowingField | None,
    budget: LinkBudget,
    routes: list[RouteSpec],
    seed: int = 0,
    timing: SsbTiming = SsbTiming(),
    noise_floor_dbm: float = DEFAULT_NOISE_FLOOR_DBM,
    fast_fading_sigma: float = 0.0,
    workers: int = 1,
) -> MeasurementTrace:
    """Simulate a scanner run over the given routes, one burst per periodicity.

    Route positions are resampled at the SSB burst periodicity and
    concatenated; the k-th burst is stamped k * periodicity.  Every random
    term is keyed on position or burst index, so the result is independent
    of ``workers`` and identical for a fixed seed.
    """
    if not routes:
        raise ValueError("run_campaign needs at least one route")
    positions = []
    route_index = []
    for r, route in enumerate(routes):
        pts = [p for _t, p in sample_route(route.with_period(timing.burst_periodicity))]
        positions.extend(pts)
        route_index.extend([r] * len(pts))
    positions = np.asarray(positions)
    route_index = np.asarray(route_index)

    inside = layout.contains(positions[:, 0], positions[:, 1])
    if not inside.all():
        k = int(np.flatnonzero(~inside)[0])
        raise OutOfLayoutError(
            f"sample {k} of route {routes[route_index[k]].name!r} at "
            f"({positions[k, 0]:.3f}, {positions[k, 1]:.3f}) leaves the layout")

    n = len(positions)
    fading = _fading_for(seed, np.arange(n), fast_fading_sigma)

    def chunk(lo: int, hi: int) -> np.ndarray:
        return _synthesize_matrix(layout, cfg, model_los, model_nlos, fld, budget,
                                  positions[lo:hi], fading[lo:hi], noise_floor_dbm)

    if workers <= 1 or n < 2 * workers:
        rsrp = chunk(0, n)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda be: chunk(be[0], be[1]),
                                  zip(bounds[:-1], bounds[1:])))
        rsrp = np.vstack(parts)

    times = np.arange(n) * timing.burst_periodicity
    metadata = {
        "seed": int(seed),
        "config": cfg.config,
        "model_los": f"({model_los.pg_1m}, {model_los.n}, {model_los.sigma})",
        "model_nlos": f"({model_nlos.pg_1m}, {model_nlos.n}, {model_nlos.sigma})",
        "routes": [r.name for r in routes],
        "burst_periodicity_s": timing.burst_periodicity,
        "carrier_freq_hz": budget.carrier_freq,
        "noise_floor_dbm": noise_floor_dbm,
        "fast_fading_sigma_db": fast_fading_sigma,
        "sss_bandwidth_hz": 15.24e6,  # scanner averaging bandwidth, recorded only
    }
    beam_ids = tuple(b.id for b in cfg.beams)
    return MeasurementTrace(cfg.config, times, positions, rsrp, beam_ids, metadata, route_index)


# ---------------------------------------------------------------------------
# trace CSV (schema: time_s,x_m,y_m,config,row,col,rsrp_dbm)

TRACE_HEADER = ["time_s", "x_m", "y_m", "config", "row", "col", "rsrp_dbm"]


def trace_to_csv(trace: MeasurementTrace, path) -> None:
    """One line per detected (sample, beam) entry; fixed decimal formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for k in range(trace.n_samples):
            t = trace.times[k]
            x, y = trace.positions[k]
            row = trace.rsrp[k]
            for b in np.flatnonzero(np.isfinite(row)):
                ssb = trace.beam_ids[b]
                w.writerow([f"{t:.6f}", f"{x:.3f}", f"{y:.3f}",
                            ssb.config, ssb.row, ssb.col, f"{row[b]:.2f}"])


def trace_from_csv(path) -> MeasurementTrace:
    """Read a trace written by :func:`trace_to_csv` (or an external scanner export)."""
    per_time: dict[float, dict] = {}
    configs = set()
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header!r}; expected {TRACE_HEADER}")
        for line_no, rec in enumerate(r, start=2):
            if not rec:
                continue
            if len(rec) != 7:
                raise ValueError(f"{path}:{line_no}: expected 7 columns, got {len(rec)}")
            t = float(rec[0])
            ssb = SsbId(rec[3], int(rec[4]), int(rec[5]))
            configs.add(ssb.config)
            slot = per_time.setdefault(t, {"pos": (float(rec[1]), float(rec[2])), "entries": {}})
            if ssb in slot["entries"]:
                raise ValueError(f"{path}:{line_no}: duplicate entry for beam {ssb} "
                                 f"at t={t}")
            slot["entries"][ssb] = float(rec[6])
    if not per_time:
        raise ValueError(f"{path}: empty trace")
    if len(configs) != 1:
        raise ValueError(f"{path}: trace mixes configurations {sorted(configs)}")
    config = configs.pop()
    beam_ids = tuple(b.id for b in make_config(config).beams)
    col = {ssb: k for k, ssb in enumerate(beam_ids)}
    times = np.array(sorted(per_time))
    positions = np.array([per_time[t]["pos"] for t in times])
    rsrp = np.full((len(times), len(beam_ids)), np.nan)
    for k, t in enumerate(times):
        for ssb, value in per_time[t]["entries"].items():
            rsrp[k, col[ssb]] = value
    return MeasurementTrace(config, times, positions, rsrp, beam_ids,
                            {"source": str(path)})
