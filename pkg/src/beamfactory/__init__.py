"""beamfactory: FR2 indoor-factory coverage and SSB beam-management toolkit.

Synthesizes per-SSB RSRP measurement campaigns over a two-hall factory
layout, reproduces the standard drive-test analytics (grid-averaged
coverage maps, campaign comparison maps, cell-coverage probabilities,
beam-recovery gap statistics, route sweeping) and solves the beam
switch-off subset selection with exhaustive, genetic and density-based
solvers.
"""

__version__ = "0.1.0"

from .analysis import (BeamDeltaStats, ComparisonMap, CoverageResult, DominanceMap,
                       GridStat, SmoothedRoute, coverage_probability, delta_stats,
                       dominance_map, gamma_map, local_average, route_smoothing)
from .beams import (Beam, BeamGridConfig, SsbId, beam_gain, make_config,
                    strongest_beam_free_space)
from .layout import (BlockingRegion, FactoryLayout, GridSpec, Hall, RouteSpec,
                     Visibility, VisibilityRegion, angles_to_tx, classify_visibility,
                     grid_index, sample_route)
from .link import (LinkBudget, MeasurementSample, MeasurementTrace, SsbTiming,
                   doppler_shift, extract_path_gain, run_campaign, synthesize_rsrp,
                   trace_from_csv, trace_to_csv, tx_power_per_re)
from .propagation import (ModelPreset, PathGainModel, ShadowingField,
                          effective_gain_correction, fit_slope_intercept, friis_pg1m,
                          model_rmse, path_gain_mean, sample_shadowing)
from .scenario import ScenarioConfig, build_scenario, default_scenario, load_scenario
from .switchoff import (BeamMask, GaParams, SolverResult, SwitchOffProblem,
                        build_problem, objective, solve_dbscan, solve_exhaustive,
                        solve_ga)
