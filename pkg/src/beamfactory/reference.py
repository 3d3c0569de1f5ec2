"""Reference values from the measurement campaign behind the bundled presets.

These are shipped for report comparison only: they came out of a physical
drive test and are not reproducible from the published models, so nothing
in the test suite asserts synthetic results against them.
"""

# Beam-recovery gap percentiles, dB: {config: {backup order i: {probability: gap}}}
DELTA_PERCENTILES_DB = {
    "A": {
        2: {0.25: 0.3, 0.50: 0.7, 0.75: 1.2},
        3: {0.25: 1.0, 0.50: 1.7, 0.75: 2.6},
        4: {0.25: 1.6, 0.50: 2.5, 0.75: 3.9},
    },
    "B": {
        2: {0.25: 0.7, 0.50: 1.6, 0.75: 3.0},
        3: {0.25: 1.9, 0.50: 3.2, 0.75: 4.8},
        4: {0.25: 3.0, 0.50: 4.4, 0.75: 6.2},
    },
}

# RMSE of each reference model against the measured path gains, dB
MEASURED_RMSE_DB = {
    "LoS": {"Friis": 4.7, "CI-LoS-SC": 4.8, "InF-LoS": 4.8},
    "NLoS": {"Friis": 10.8, "InF-NLoS-DL": 6.5, "Chizhik": 6.1},
}

# Mean coverage degradation of the optimized switch-off masks, dB per cardinality
SWITCHOFF_DEGRADATION_DB = {3: 3.8, 5: 1.9, 10: 0.7}
