#!/usr/bin/env python3
"""Beam sweeping along the LoS corridor route.

Follows the bundled corridor route (azimuth sweep of roughly -50 to +50
degrees seen from the TX), smooths each beam's RSRP over a 40-wavelength
spatial window and reports which bottom-row beam dominates each angular
range, next to the free-space prediction from the pattern model.
"""
import os

import numpy as np

from beamfactory import run_campaign, strongest_beam_free_space
from beamfactory.analysis import route_smoothing
from beamfactory.layout import angles_to_tx_many
from beamfactory.scenario import default_scenario

scenario = default_scenario()
field = scenario.shadowing_field()
corridor = [r for r in scenario.routes if r.name == "corridor"]
trace = run_campaign(scenario.layout, scenario.beam_config, scenario.model_los,
                     scenario.model_nlos, field, scenario.budget, corridor,
                     seed=scenario.seed, noise_floor_dbm=scenario.noise_floor_dbm)

smoothed = route_smoothing(trace, scenario.layout)
print(f"corridor: {trace.n_samples} bursts over "
      f"{smoothed.distance_m[-1]:.1f} m, azimuth "
      f"{smoothed.azimuth_deg.min():.0f} .. {smoothed.azimuth_deg.max():.0f} deg, "
      f"smoothing window {smoothed.window_m * 100:.1f} cm")

cfg = scenario.beam_config
bottom = [k for k, ssb in enumerate(smoothed.beam_ids) if ssb.row == 3]
winners = np.nanargmax(smoothed.smoothed[:, bottom], axis=1)

az, tilt, _d3 = angles_to_tx_many(scenario.layout, trace.positions)
print("\n  azimuth    winner (smoothed)   free-space prediction")
previous = None
for k in range(trace.n_samples):
    ssb = smoothed.beam_ids[bottom[winners[k]]]
    if ssb != previous:
        predicted = strongest_beam_free_space(cfg, az[k], tilt[k])
        print(f"  {smoothed.azimuth_deg[k]:7.1f}    {str(ssb):<18}  {predicted}")
        previous = ssb

matches = 0
for k in range(trace.n_samples):
    ssb = smoothed.beam_ids[bottom[winners[k]]]
    pred = strongest_beam_free_space(cfg, az[k], tilt[k])
    matches += ssb == pred
print(f"\nsmoothed winner equals the free-space pick on "
      f"{matches / trace.n_samples * 100:.0f}% of the route")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
    os.makedirs(out, exist_ok=True)
    fig, ax = plt.subplots(figsize=(9, 5))
    for k in bottom:
        ax.plot(smoothed.azimuth_deg, smoothed.smoothed[:, k],
                label=str(smoothed.beam_ids[k]))
    ax.set_xlabel("azimuth from panel normal [deg]")
    ax.set_ylabel("smoothed RSRP [dBm]")
    ax.set_title("bottom-row beams along the corridor route")
    ax.legend(ncol=2, fontsize=8)
    ax.grid(alpha=0.3)
    secax = ax.twiny()
    secax.plot(smoothed.distance_m, smoothed.smoothed[:, bottom[0]], alpha=0)
    secax.set_xlabel("distance travelled [m]")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "beam_sweeping.png"), dpi=130)
    print("beam_sweeping.png written")
except ImportError:
    print("matplotlib not available; skipped PNG output")
