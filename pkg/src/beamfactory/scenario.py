"""Scenario files: a YAML description of layout, beams, models, budget and routes.

The bundled default approximates a two-hall production lab: a 15 x 40 m
sparse hall in line of sight of a wall-mounted TX (west side, 3 m up,
panel facing east) and a 25 x 30 m dense hall in NLoS.  Hall placement is
an approximation assembled from published dimensions, so treat absolute
coordinates as illustrative.

Schema (all lengths meters, angles degrees; see README for the full list):

    name: str
    seed: int
    beam_config: A | B
    layout:
      rx_height_m: float
      tx: {position_m: [x, y, z], boresight_az_deg: float}
      halls: [{name, clutter: sparse|dense, rect_m: [x0, y0, x1, y1]}]
      visibility: [{tag: LoS|NLoS, polygon_m: [[x, y], ...]}]
      blocking: [{polygon_m: [...], excess_loss_db: float}]   # optional
    propagation:
      los_model / nlos_model: preset name or {pg_1m_db, n, sigma_db}
      shadowing: {sigma_db: float | null, decorrelation_m, node_spacing_m, seed}
      fast_fading_sigma_db: float
    beams: {hpbw_az_deg, hpbw_el_deg, peak_gain_dbi, rows: {row: {...}}}
    link: {p_c_dbm, carrier_bandwidth_hz, scs_hz, n_rb, g_rx_dbi,
           carrier_freq_hz, noise_floor_dbm}
    routes: [{name, speed_mps, sample_period_s, waypoints_m: [[x, y], ...]}]
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources

import yaml

from .beams import BeamGridConfig, make_config
from .layout import (BlockingRegion, FactoryLayout, Hall, RouteSpec,
                     VisibilityRegion)
from .link import DEFAULT_NOISE_FLOOR_DBM, LinkBudget, SsbTiming
from .propagation import ModelPreset, PathGainModel, ShadowingField


class ScenarioError(ValueError):
    """Scenario file violates the schema; message carries the field path."""


def _need(mapping, key, path, kind=None):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ScenarioError(f"{path}.{key}: required field is missing")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _number(mapping, key, path, default=None, minimum=None, maximum=None):
    value = mapping.get(key, default)
    if value is None:
        raise ScenarioError(f"{path}.{key}: required field is missing")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number")
    value = float(value)
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{path}.{key}: must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise ScenarioError(f"{path}.{key}: must be <= {maximum}")
    return value


def _model(entry, path) -> PathGainModel:
    if isinstance(entry, str):
        try:
            return ModelPreset.by_name(entry).model
        except KeyError as exc:
            raise ScenarioError(f"{path}: {exc.args[0]}") from None
    if isinstance(entry, dict):
        return PathGainModel(
            _number(entry, "pg_1m_db", path),
            _number(entry, "n", path, minimum=1e-9),
            _number(entry, "sigma_db", path, default=0.0, minimum=0.0),
        )
    raise ScenarioError(f"{path}: expected a preset name or a parameter mapping")


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully built scenario: immutable inputs for campaigns and analyses."""
    name: str
    seed: int
    layout: FactoryLayout
    beam_config: BeamGridConfig
    model_los: PathGainModel
    model_nlos: PathGainModel
    budget: LinkBudget
    timing: SsbTiming
    routes: tuple[RouteSpec, ...]
    noise_floor_dbm: float
    fast_fading_sigma: float
    shadowing_sigma: float | None      # None: use the NLoS/LoS model sigma per class
    shadowing_decorrelation: float
    shadowing_node_spacing: float | None
    shadowing_seed: int | None         # None: derive from the campaign seed
    raw: dict

    def shadowing_field(self, seed: int | None = None) -> ShadowingField:
        """Build the shadowing field over the layout bounding box.

        A single field (one sigma) is shared by both visibility classes; by
        default the larger of the two model sigmas is used so the marginal
        is never under-dispersed, and each class contract is checked in
        tests through its own campaigns.
        """
        sigma = self.shadowing_sigma
        if sigma is None:
            sigma = max(self.model_los.sigma, self.model_nlos.sigma)
        use_seed = self.shadowing_seed
        if use_seed is None:
            use_seed = (seed if seed is not None else self.seed) ^ 0x5F5E1
        return ShadowingField.generate(
            self.layout.bounding_box(), sigma,
            decorrelation_distance=self.shadowing_decorrelation,
            seed=use_seed, node_spacing=self.shadowing_node_spacing)

    def with_beam_config(self, which: str) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw["beam_config"] = which
        return build_scenario(raw)


def build_scenario(raw: dict) -> ScenarioConfig:
    """Validate a scenario mapping and construct every domain object."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: top level must be a mapping")
    name = raw.get("name", "scenario")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
        raise ScenarioError("scenario.seed: expected an unsigned 64-bit integer")

    which = raw.get("beam_config", "B")
    if which not in ("A", "B"):
        raise ScenarioError("scenario.beam_config: must be 'A' or 'B'")

    lay = _need(raw, "layout", "scenario", dict)
    tx = _need(lay, "tx", "scenario.layout", dict)
    tx_pos = _need(tx, "position_m", "scenario.layout.tx", list)
    if len(tx_pos) != 3:
        raise ScenarioError("scenario.layout.tx.position_m: expected [x, y, z]")
    halls = []
    for k, h in enumerate(_need(lay, "halls", "scenario.layout", list)):
        path = f"scenario.layout.halls[{k}]"
        rect = _need(h, "rect_m", path, list)
        if len(rect) != 4:
            raise ScenarioError(f"{path}.rect_m: expected [x0, y0, x1, y1]")
        try:
            halls.append(Hall(_need(h, "name", path, str),
                              _need(h, "clutter", path, str), tuple(map(float, rect))))
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    regions = []
    for k, v in enumerate(_need(lay, "visibility", "scenario.layout", list)):
        path = f"scenario.layout.visibility[{k}]"
        tag = _need(v, "tag", path, str)
        if tag not in ("LoS", "NLoS"):
            raise ScenarioError(f"{path}.tag: must be 'LoS' or 'NLoS'")
        regions.append(VisibilityRegion(tag, _need(v, "polygon_m", path, list)))
    blocking = []
    for k, b in enumerate(lay.get("blocking", []) or []):
        path = f"scenario.layout.blocking[{k}]"
        blocking.append(BlockingRegion(
            _need(b, "polygon_m", path, list),
            _number(b, "excess_loss_db", path, default=15.0, minimum=0.0)))
    try:
        layout = FactoryLayout(
            halls=tuple(halls),
            tx_position=tuple(map(float, tx_pos)),
            rx_height=_number(lay, "rx_height_m", "scenario.layout", default=1.5, minimum=1e-6),
            visibility_regions=tuple(regions),
            blocking_regions=tuple(blocking),
            tx_boresight_deg=_number(tx, "boresight_az_deg", "scenario.layout.tx", default=0.0),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.layout: {exc}") from None

    beams_raw = raw.get("beams", {}) or {}
    row_overrides = {}
    for key, entry in (beams_raw.get("rows", {}) or {}).items():
        path = f"scenario.beams.rows[{key}]"
        try:
            row = int(key)
        except (TypeError, ValueError):
            raise ScenarioError(f"{path}: row keys must be integers") from None
        row_overrides[row] = {
            name: _number(entry, src, path)
            for name, src in (("hpbw_az", "hpbw_az_deg"), ("hpbw_el", "hpbw_el_deg"),
                              ("peak_gain", "peak_gain_dbi"))
            if src in entry
        }
    try:
        beam_config = make_config(
            which,
            hpbw_az=_number(beams_raw, "hpbw_az_deg", "scenario.beams", default=10.0),
            hpbw_el=_number(beams_raw, "hpbw_el_deg", "scenario.beams", default=8.0),
            peak_gain=_number(beams_raw, "peak_gain_dbi", "scenario.beams", default=27.0),
            row_overrides=row_overrides or None,
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.beams: {exc}") from None

    prop = _need(raw, "propagation", "scenario", dict)
    model_los = _model(_need(prop, "los_model", "scenario.propagation"),
                       "scenario.propagation.los_model")
    model_nlos = _model(_need(prop, "nlos_model", "scenario.propagation"),
                        "scenario.propagation.nlos_model")
    shadow = prop.get("shadowing", {}) or {}
    sigma = shadow.get("sigma_db")
    if sigma is not None:
        sigma = _number(shadow, "sigma_db", "scenario.propagation.shadowing", minimum=0.0)
    node_spacing = shadow.get("node_spacing_m")
    if node_spacing is not None:
        node_spacing = _number(shadow, "node_spacing_m",
                               "scenario.propagation.shadowing", minimum=1e-6)
    shadow_seed = shadow.get("seed")
    if shadow_seed is not None and (isinstance(shadow_seed, bool)
                                    or not isinstance(shadow_seed, int)):
        raise ScenarioError("scenario.propagation.shadowing.seed: expected an integer")

    link_raw = raw.get("link", {}) or {}
    try:
        n_rb = int(_number(link_raw, "n_rb", "scenario.link", default=66, minimum=1))
        budget = LinkBudget(
            p_c=_number(link_raw, "p_c_dbm", "scenario.link", default=21.2),
            carrier_bandwidth=_number(link_raw, "carrier_bandwidth_hz", "scenario.link",
                                      default=100e6, minimum=1.0),
            scs=_number(link_raw, "scs_hz", "scenario.link", default=120e3, minimum=1.0),
            n_rb=n_rb,
            n_re=12 * n_rb,
            g_rx=_number(link_raw, "g_rx_dbi", "scenario.link", default=0.0),
            carrier_freq=_number(link_raw, "carrier_freq_hz", "scenario.link",
                                 default=26.0e9, minimum=1.0),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.link: {exc}") from None

    routes = []
    for k, r in enumerate(_need(raw, "routes", "scenario", list)):
        path = f"scenario.routes[{k}]"
        wps = _need(r, "waypoints_m", path, list)
        try:
            routes.append(RouteSpec(
                waypoints=tuple((float(p[0]), float(p[1])) for p in wps),
                speed=_number(r, "speed_mps", path, default=1.5),
                sample_period=_number(r, "sample_period_s", path, default=0.020),
                name=str(r.get("name", f"route-{k}")),
            ))
        except (ValueError, TypeError, IndexError) as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    if not routes:
        raise ScenarioError("scenario.routes: at least one route is required")

    return ScenarioConfig(
        name=str(name),
        seed=seed,
        layout=layout,
        beam_config=beam_config,
        model_los=model_los,
        model_nlos=model_nlos,
        budget=budget,
        timing=SsbTiming(),
        routes=tuple(routes),
        noise_floor_dbm=_number(link_raw, "noise_floor_dbm", "scenario.link",
                                default=DEFAULT_NOISE_FLOOR_DBM),
        fast_fading_sigma=_number(prop, "fast_fading_sigma_db", "scenario.propagation",
                                  default=0.0, minimum=0.0),
        shadowing_sigma=sigma,
        shadowing_decorrelation=_number(shadow, "decorrelation_m",
                                        "scenario.propagation.shadowing",
                                        default=10.0, minimum=0.0),
        shadowing_node_spacing=node_spacing,
        shadowing_seed=shadow_seed,
        raw=copy.deepcopy(raw),
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: invalid YAML ({exc})") from None
    return build_scenario(raw)


def default_scenario() -> ScenarioConfig:
    """The bundled two-hall scenario (configuration B, measurement-fit models)."""
    text = resources.files("beamfactory.data").joinpath("default_scenario.yaml").read_text()
    return build_scenario(yaml.safe_load(text))


def default_scenario_path() -> str:
    return str(resources.files("beamfactory.data").joinpath("default_scenario.yaml"))
