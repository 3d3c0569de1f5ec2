import numpy as np
import pytest

from beamfactory.beams import make_config
from beamfactory.layout import (FactoryLayout, Hall, VisibilityRegion,
                                rect_polygon)
from beamfactory.link import MeasurementTrace, run_campaign
from beamfactory.scenario import default_scenario


@pytest.fixture(scope="session")
def default_sc():
    return default_scenario()


def _campaign(scenario, which, seed):
    variant = scenario.with_beam_config(which)
    fld = variant.shadowing_field(seed)
    return run_campaign(variant.layout, variant.beam_config, variant.model_los,
                        variant.model_nlos, fld, variant.budget, list(variant.routes),
                        seed=seed, noise_floor_dbm=variant.noise_floor_dbm)


@pytest.fixture(scope="session")
def trace_b(default_sc):
    return _campaign(default_sc, "B", default_sc.seed)


@pytest.fixture(scope="session")
def trace_a(default_sc):
    return _campaign(default_sc, "A", default_sc.seed)


def single_hall_layout(width=40.0, height=20.0, tx=(0.0, 10.0, 3.0), los=True,
                       rx_height=1.5):
    """One rectangular hall, uniformly LoS or NLoS."""
    tag = "LoS" if los else "NLoS"
    return FactoryLayout(
        halls=(Hall("hall", "sparse" if los else "dense", (0.0, 0.0, width, height)),),
        tx_position=tx,
        rx_height=rx_height,
        visibility_regions=(VisibilityRegion(tag, rect_polygon(0.0, 0.0, width, height)),),
    )


def make_trace(config, positions, entries, periodicity=0.020, metadata=None):
    """Hand-built trace; ``entries`` is one {SsbId: rsrp} dict per sample."""
    cfg = make_config(config)
    beam_ids = tuple(b.id for b in cfg.beams)
    col = {ssb: k for k, ssb in enumerate(beam_ids)}
    rsrp = np.full((len(positions), len(beam_ids)), np.nan)
    for k, per_sample in enumerate(entries):
        for ssb, value in per_sample.items():
            rsrp[k, col[ssb]] = value
    times = np.arange(len(positions)) * periodicity
    return MeasurementTrace(config, times, np.asarray(positions, dtype=float), rsrp,
                            beam_ids, metadata or {})


def serpentine(x_lo, x_hi, y_lo, y_hi, n_legs):
    """Vertical zigzag waypoints covering [x_lo, x_hi] x [y_lo, y_hi]."""
    xs = np.linspace(x_lo, x_hi, n_legs)
    pts = []
    for k, x in enumerate(xs):
        if k % 2 == 0:
            pts += [(x, y_lo), (x, y_hi)]
        else:
            pts += [(x, y_hi), (x, y_lo)]
    return pts
