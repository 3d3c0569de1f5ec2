"""SSB beam grids for the two TX panel configurations, pattern model and gain lookup.

Configuration A packs 32 beams into a 120 deg horizontal span (rows of 16,
15 and 1 at 0/7/15 deg downtilt).  Configuration B spreads 27 beams over a
150 deg span (rows of 10, 10 and 7 at -7/0/8 deg downtilt).  Per-beam
boresights are placed on a uniform grid with a half-step edge offset, which
reproduces the published counts and spans; the exact per-beam angles of the
hardware are not public, so this is a documented approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Pattern defaults.  Beamwidths are the midpoints of the published 8-12 deg
# (azimuth) and 6-10 deg (elevation) ranges; 27 dBi comes from the elliptical
# aperture directivity estimate at those widths.
DEFAULT_HPBW_AZ = 10.0
DEFAULT_HPBW_EL = 8.0
DEFAULT_PEAK_GAIN_DBI = 27.0
PATTERN_FLOOR_DB = 30.0

HPBW_AZ_RANGE = (8.0, 12.0)
HPBW_EL_RANGE = (6.0, 10.0)

# per-configuration grid geometry: row beam counts, row downtilts, azimuth span
CONFIG_TABLE = {
    "A": {"rows": (16, 15, 1), "downtilts": (0.0, 7.0, 15.0), "az_span": (-30.0, 90.0)},
    "B": {"rows": (10, 10, 7), "downtilts": (-7.0, 0.0, 8.0), "az_span": (-75.0, 75.0)},
}


def aperture_gain_dbi(hpbw_az: float, hpbw_el: float) -> float:
    """Elliptical-aperture directivity estimate for a pencil beam."""
    return 10.0 * math.log10(41253.0 / (hpbw_az * hpbw_el))


@dataclass(frozen=True, order=True)
class SsbId:
    config: str
    row: int  # 1-based, top to bottom
    col: int  # 1-based, left to right

    def __post_init__(self):
        if self.config not in CONFIG_TABLE:
            raise ValueError(f"unknown configuration {self.config!r}")
        rows = CONFIG_TABLE[self.config]["rows"]
        if not (1 <= self.row <= len(rows)):
            raise ValueError(f"row {self.row} out of range for configuration {self.config}")
        if not (1 <= self.col <= rows[self.row - 1]):
            raise ValueError(
                f"col {self.col} out of range for row {self.row} of configuration {self.config}")

    def __str__(self) -> str:  # CSV rendering, e.g. "B-3-4"
        return f"{self.config}-{self.row}-{self.col}"

    @classmethod
    def parse(cls, text: str) -> "SsbId":
        cfg, row, col = text.strip().split("-")
        return cls(cfg, int(row), int(col))


@dataclass(frozen=True)
class Beam:
    id: SsbId
    boresight_az: float
    boresight_downtilt: float
    hpbw_az: float = DEFAULT_HPBW_AZ
    hpbw_el: float = DEFAULT_HPBW_EL
    peak_gain: float = DEFAULT_PEAK_GAIN_DBI

    def __post_init__(self):
        if not (HPBW_AZ_RANGE[0] <= self.hpbw_az <= HPBW_AZ_RANGE[1]):
            raise ValueError(f"{self.id}: hpbw_az must be within {HPBW_AZ_RANGE}")
        if not (HPBW_EL_RANGE[0] <= self.hpbw_el <= HPBW_EL_RANGE[1]):
            raise ValueError(f"{self.id}: hpbw_el must be within {HPBW_EL_RANGE}")
        if self.peak_gain <= 0:
            raise ValueError(f"{self.id}: peak_gain must be > 0 dBi")


@dataclass(frozen=True)
class BeamGridConfig:
    config: str
    beams: tuple[Beam, ...]
    rows: tuple[int, ...]
    az_span: tuple[float, float]
    downtilts: tuple[float, ...]

    def __post_init__(self):
        table = CONFIG_TABLE[self.config]
        if tuple(self.rows) != table["rows"]:
            raise ValueError(f"configuration {self.config}: row counts must be {table['rows']}")
        if len(self.beams) != sum(self.rows):
            raise ValueError(f"configuration {self.config}: expected {sum(self.rows)} beams")
        object.__setattr__(self, "beams", tuple(self.beams))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "downtilts", tuple(self.downtilts))

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    def beam(self, ssb: SsbId) -> Beam:
        try:
            return self._by_id[ssb]
        except AttributeError:
            object.__setattr__(self, "_by_id", {b.id: b for b in self.beams})
            return self._by_id[ssb]

    def beam_index(self, ssb: SsbId) -> int:
        try:
            return self._index[ssb]
        except AttributeError:
            object.__setattr__(self, "_index", {b.id: k for k, b in enumerate(self.beams)})
            return self._index[ssb]


def make_config(
    which: str,
    hpbw_az: float = DEFAULT_HPBW_AZ,
    hpbw_el: float = DEFAULT_HPBW_EL,
    peak_gain: float = DEFAULT_PEAK_GAIN_DBI,
    row_overrides: dict[int, dict] | None = None,
) -> BeamGridConfig:
    """Build the full beam grid for configuration A or B.

    Boresight azimuths in each row sit at span_min + span * (k + 0.5) / count.
    ``row_overrides`` maps a 1-based row to replacement pattern parameters
    (``hpbw_az``, ``hpbw_el``, ``peak_gain``).
    """
    if which not in CONFIG_TABLE:
        raise ValueError(f"unknown configuration {which!r} (expected 'A' or 'B')")
    table = CONFIG_TABLE[which]
    span_min, span_max = table["az_span"]
    span = span_max - span_min
    overrides = row_overrides or {}
    beams = []
    for r, (count, tilt) in enumerate(zip(table["rows"], table["downtilts"]), start=1):
        params = {"hpbw_az": hpbw_az, "hpbw_el": hpbw_el, "peak_gain": peak_gain}
        params.update(overrides.get(r, {}))
        for c in range(1, count + 1):
            az = span_min + span * (c - 0.5) / count
            beams.append(Beam(SsbId(which, r, c), az, tilt, **params))
    return BeamGridConfig(which, tuple(beams), table["rows"], table["az_span"], table["downtilts"])


def _wrap_deg(a):
    return (np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0


def beam_gain(beam: Beam, az, downtilt, floor_db: float = PATTERN_FLOOR_DB):
    """Parabolic (Gaussian-in-dB) pattern gain toward (az, downtilt).

    peak - 12 * [(daz/hpbw_az)^2 + (del/hpbw_el)^2], clamped at
    peak - floor_db.  Broadcasts over array inputs.
    """
    daz = _wrap_deg(np.asarray(az, dtype=float) - beam.boresight_az)
    de = _wrap_deg(np.asarray(downtilt, dtype=float) - beam.boresight_downtilt)
    g = beam.peak_gain - 12.0 * ((daz / beam.hpbw_az) ** 2 + (de / beam.hpbw_el) ** 2)
    out = np.maximum(g, beam.peak_gain - floor_db)
    return float(out) if out.ndim == 0 else out


def gain_matrix(cfg: BeamGridConfig, az, downtilt, floor_db: float = PATTERN_FLOOR_DB) -> np.ndarray:
    """Gain of every beam toward every direction, shape (n_points, n_beams)."""
    az = np.atleast_1d(np.asarray(az, dtype=float))
    tilt = np.atleast_1d(np.asarray(downtilt, dtype=float))
    bore_az = np.array([b.boresight_az for b in cfg.beams])
    bore_el = np.array([b.boresight_downtilt for b in cfg.beams])
    w_az = np.array([b.hpbw_az for b in cfg.beams])
    w_el = np.array([b.hpbw_el for b in cfg.beams])
    peak = np.array([b.peak_gain for b in cfg.beams])
    daz = _wrap_deg(az[:, None] - bore_az[None, :])
    de = _wrap_deg(tilt[:, None] - bore_el[None, :])
    g = peak - 12.0 * ((daz / w_az) ** 2 + (de / w_el) ** 2)
    return np.maximum(g, peak - floor_db)


def strongest_beam_free_space(cfg: BeamGridConfig, az: float, downtilt: float) -> SsbId:
    """Beam with the highest pattern gain toward (az, downtilt).

    Ties break toward the lowest (row, col); beams are stored in that order,
    so the first argmax wins.
    """
    g = gain_matrix(cfg, [az], [downtilt])[0]
    return cfg.beams[int(np.argmax(g))].id
