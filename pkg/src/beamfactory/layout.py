"""Factory floor geometry: halls, transmitter pose, visibility regions, grids and routes.

Coordinate convention used throughout the package: x grows east, y grows
north, all lengths in meters, all angles in degrees.  Azimuth is the signed
angle from the TX panel normal to the TX->point direction, positive toward
north.  Downtilt is positive below horizontal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class Visibility(str, Enum):
    LOS = "LoS"
    NLOS = "NLoS"


class OutOfLayoutError(ValueError):
    """Point does not fall inside any hall of the layout."""


class OutOfGridError(ValueError):
    """Point falls outside a grid or field extent."""


class UndefinedAngleError(ValueError):
    """TX->point direction is undefined (zero-length vector)."""


# ---------------------------------------------------------------------------
# polygons

def _as_polygon(points) -> np.ndarray:
    poly = np.asarray(points, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
        raise ValueError("polygon needs at least 3 (x, y) vertices")
    return poly


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Boundary-inclusive containment test, vectorized over points.

    Ray casting for the interior plus an explicit on-edge check so points on
    shared region borders are never dropped.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        # crossing-number ray cast (ray toward +x)
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xi)
        # on-segment: zero cross product and within the bounding box
        cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        within = (
            (np.minimum(x0, x1) - 1e-9 <= x) & (x <= np.maximum(x0, x1) + 1e-9)
            & (np.minimum(y0, y1) - 1e-9 <= y) & (y <= np.maximum(y0, y1) + 1e-9)
        )
        on_edge |= (np.abs(cross) < 1e-9) & within
    return inside | on_edge


def rect_polygon(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


# ---------------------------------------------------------------------------
# layout types

@dataclass(frozen=True)
class Hall:
    name: str
    clutter: str  # "sparse" | "dense"
    rect: tuple[float, float, float, float]  # x0, y0, x1, y1

    def __post_init__(self):
        x0, y0, x1, y1 = self.rect
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"hall {self.name!r}: degenerate rectangle {self.rect}")
        if self.clutter not in ("sparse", "dense"):
            raise ValueError(f"hall {self.name!r}: clutter must be sparse|dense")

    def contains(self, x, y) -> np.ndarray:
        x0, y0, x1, y1 = self.rect
        return (x0 <= np.asarray(x)) & (np.asarray(x) <= x1) & \
               (y0 <= np.asarray(y)) & (np.asarray(y) <= y1)


@dataclass(frozen=True)
class VisibilityRegion:
    tag: Visibility
    polygon: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "polygon", _as_polygon(self.polygon))
        object.__setattr__(self, "tag", Visibility(self.tag))


@dataclass(frozen=True)
class BlockingRegion:
    """Full-blockage zone (e.g. storage racks taller than the TX).

    Points inside classify as NLoS and pick up ``excess_loss_db`` of extra
    path loss on top of the NLoS model.
    """
    polygon: np.ndarray
    excess_loss_db: float = 15.0

    def __post_init__(self):
        object.__setattr__(self, "polygon", _as_polygon(self.polygon))


@dataclass(frozen=True)
class FactoryLayout:
    halls: tuple[Hall, ...]
    tx_position: tuple[float, float, float] = (0.0, 0.0, 3.0)
    rx_height: float = 1.5
    visibility_regions: tuple[VisibilityRegion, ...] = ()
    blocking_regions: tuple[BlockingRegion, ...] = ()
    tx_boresight_deg: float = 0.0  # world bearing of the panel normal, 0 = +x

    def __post_init__(self):
        if not self.halls:
            raise ValueError("layout needs at least one hall")
        if self.rx_height <= 0:
            raise ValueError("rx_height must be > 0")
        tx = np.asarray(self.tx_position, dtype=float)
        if tx.shape != (3,):
            raise ValueError("tx_position must be (x, y, z)")
        object.__setattr__(self, "tx_position", tuple(tx))
        object.__setattr__(self, "halls", tuple(self.halls))
        object.__setattr__(self, "visibility_regions", tuple(self.visibility_regions))
        object.__setattr__(self, "blocking_regions", tuple(self.blocking_regions))
        if not self.contains(tx[0], tx[1]).all():
            raise ValueError("tx_position must lie within or on a hall boundary")

    @property
    def tx_height(self) -> float:
        return self.tx_position[2]

    def contains(self, x, y) -> np.ndarray:
        """True where (x, y) lies inside the union of halls (boundaries included)."""
        inside = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=bool)
        for hall in self.halls:
            inside |= hall.contains(x, y)
        return inside

    def bounding_box(self) -> tuple[float, float, float, float]:
        rects = np.array([h.rect for h in self.halls])
        return (rects[:, 0].min(), rects[:, 1].min(), rects[:, 2].max(), rects[:, 3].max())


# ---------------------------------------------------------------------------
# layout operations

def classify_visibility_many(layout: FactoryLayout, pts) -> np.ndarray:
    """Visibility class for each point; True entries are LoS.

    Points must lie inside the hall union.  Blocking regions force NLoS no
    matter which visibility region covers the point.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    inside = layout.contains(pts[:, 0], pts[:, 1])
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise OutOfLayoutError(
            f"point ({pts[bad, 0]:.3f}, {pts[bad, 1]:.3f}) is outside all halls")
    is_los = np.zeros(len(pts), dtype=bool)
    assigned = np.zeros(len(pts), dtype=bool)
    for region in layout.visibility_regions:
        hit = points_in_polygon(pts, region.polygon) & ~assigned
        assigned |= hit
        if region.tag is Visibility.LOS:
            is_los |= hit
    if not assigned.all():
        bad = int(np.flatnonzero(~assigned)[0])
        raise OutOfLayoutError(
            f"point ({pts[bad, 0]:.3f}, {pts[bad, 1]:.3f}) is covered by no visibility region")
    for region in layout.blocking_regions:
        is_los &= ~points_in_polygon(pts, region.polygon)
    return is_los


def classify_visibility(layout: FactoryLayout, p) -> Visibility:
    """LoS/NLoS tag of the region containing ``p`` (blockage wins)."""
    is_los = classify_visibility_many(layout, [p])[0]
    return Visibility.LOS if is_los else Visibility.NLOS


def blocking_excess_db(layout: FactoryLayout, pts) -> np.ndarray:
    """Extra loss (dB) from blocking regions, 0 where unblocked."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    excess = np.zeros(len(pts))
    for region in layout.blocking_regions:
        hit = points_in_polygon(pts, region.polygon)
        excess = np.where(hit & (excess == 0.0), region.excess_loss_db, excess)
    return excess


def angles_to_tx_many(layout: FactoryLayout, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(azimuth deg, downtilt deg, 3D distance m) from the TX to each point.

    The receiver sits at ``layout.rx_height``; azimuth is relative to the TX
    panel normal.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    txx, txy, txz = layout.tx_position
    dx = pts[:, 0] - txx
    dy = pts[:, 1] - txy
    dz = txz - layout.rx_height  # positive when TX above RX
    d_h = np.hypot(dx, dy)
    if np.any((d_h == 0.0) & (dz == 0.0)):
        raise UndefinedAngleError("point coincides with the TX position")
    az = np.degrees(np.arctan2(dy, dx)) - layout.tx_boresight_deg
    az = (az + 180.0) % 360.0 - 180.0
    downtilt = np.degrees(np.arctan2(dz, d_h))
    d3 = np.hypot(d_h, dz)
    return az, downtilt, d3


def angles_to_tx(layout: FactoryLayout, p) -> tuple[float, float, float]:
    az, tilt, d3 = angles_to_tx_many(layout, [p])
    return float(az[0]), float(tilt[0]), float(d3[0])


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    cell_dx: float
    cell_dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.cell_dx <= 0 or self.cell_dy <= 0:
            raise ValueError("cell_dx and cell_dy must be > 0")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, y0, x0 + self.nx * self.cell_dx, y0 + self.ny * self.cell_dy)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def indices(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices (i along x, j along y) with floor-division binning.

        Boundary points land in the cell they open (their lower edge); the
        global maximum edge folds back into the last cell.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, y0, x1, y1 = self.extent
        x, y = pts[:, 0], pts[:, 1]
        ok = (x >= x0 - 1e-9) & (x <= x1 + 1e-9) & (y >= y0 - 1e-9) & (y <= y1 + 1e-9)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise OutOfGridError(
                f"point ({x[bad]:.3f}, {y[bad]:.3f}) outside grid extent {self.extent}")
        i = np.floor((x - x0) / self.cell_dx).astype(int)
        j = np.floor((y - y0) / self.cell_dy).astype(int)
        return np.clip(i, 0, self.nx - 1), np.clip(j, 0, self.ny - 1)

    def index(self, p) -> tuple[int, int]:
        i, j = self.indices([p])
        return int(i[0]), int(j[0])

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0 = self.origin
        cx = x0 + (np.arange(self.nx) + 0.5) * self.cell_dx
        cy = y0 + (np.arange(self.ny) + 0.5) * self.cell_dy
        return cx, cy

    @staticmethod
    def cover(pts, cell_dx: float, cell_dy: float, origin=None) -> "GridSpec":
        """Smallest grid with the given cell size covering all points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if origin is None:
            origin = (
                math.floor(pts[:, 0].min() / cell_dx) * cell_dx,
                math.floor(pts[:, 1].min() / cell_dy) * cell_dy,
            )
        nx = max(1, math.ceil((pts[:, 0].max() - origin[0]) / cell_dx - 1e-9))
        ny = max(1, math.ceil((pts[:, 1].max() - origin[1]) / cell_dy - 1e-9))
        # max edge folds back, so a point exactly on it needs no extra cell
        return GridSpec(origin, cell_dx, cell_dy, nx, ny)


def grid_index(grid: GridSpec, p) -> tuple[int, int]:
    return grid.index(p)


# ---------------------------------------------------------------------------
# routes

MAX_PLATFORM_SPEED = 2.0  # m/s, mobile-robot platform limit


@dataclass(frozen=True)
class RouteSpec:
    waypoints: tuple[tuple[float, float], ...]
    speed: float = 1.5
    sample_period: float = 0.020
    name: str = "route"

    def __post_init__(self):
        wps = tuple((float(x), float(y)) for x, y in self.waypoints)
        if len(wps) < 2:
            raise ValueError(f"route {self.name!r}: needs at least 2 waypoints")
        if not (0.0 < self.speed <= MAX_PLATFORM_SPEED):
            raise ValueError(
                f"route {self.name!r}: speed must be in (0, {MAX_PLATFORM_SPEED}] m/s")
        if self.sample_period <= 0:
            raise ValueError(f"route {self.name!r}: sample_period must be > 0")
        object.__setattr__(self, "waypoints", wps)

    def with_period(self, period: float) -> "RouteSpec":
        return replace(self, sample_period=period)


def sample_route(route: RouteSpec) -> list[tuple[float, tuple[float, float]]]:
    """Constant-speed samples along the waypoint polyline.

    One sample per ``sample_period`` starting at t=0 on the first waypoint;
    the final waypoint is always emitted as the last sample (so the closing
    step may be shorter than the others).  Zero-length segments collapse.
    """
    wps = np.asarray(route.waypoints, dtype=float)
    seg = np.diff(wps, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 1e-12
    if not keep.any():
        raise ValueError(f"route {route.name!r}: zero total length")
    starts = wps[:-1][keep]
    seg = seg[keep]
    seg_len = seg_len[keep]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    duration = total / route.speed

    n_steps = int(math.floor(duration / route.sample_period + 1e-9))
    times = np.arange(n_steps + 1) * route.sample_period
    if times[-1] < duration - 1e-9 * max(1.0, duration):
        times = np.append(times, duration)
    s = np.minimum(times * route.speed, total)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    pos = starts[idx] + seg[idx] * frac[:, None]
    return [(float(t), (float(p[0]), float(p[1]))) for t, p in zip(times, pos)]
