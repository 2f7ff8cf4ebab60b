"""Writes ieee39.case.json from the standard IEEE 39-bus (New England) case data.

Branch reactances and ratings follow the widely distributed MATPOWER case39
(base 100 MVA).  Susceptance is stored as 1/x in per unit; resistance, line
charging and transformer taps are dropped because the dispatch model is DC.
Generator limits, cost coefficients and ramp rates are the G1..G10 table used
for the dispatch studies; G1..G10 sit at buses 30..39.
"""
import json

loads = {1: 97.6, 3: 322, 4: 500, 7: 233.8, 8: 522, 9: 6.5, 12: 8.53, 15: 320,
         16: 329, 18: 158, 20: 680, 21: 274, 23: 247.5, 24: 308.6, 25: 224,
         26: 139, 27: 281, 28: 206, 29: 283.5, 31: 9.2, 39: 1104}

branches = [
    (1, 2, 0.0411, 600), (1, 39, 0.025, 1000), (2, 3, 0.0151, 500), (2, 25, 0.0086, 500),
    (2, 30, 0.0181, 900), (3, 4, 0.0213, 500), (3, 18, 0.0133, 500), (4, 5, 0.0128, 600),
    (4, 14, 0.0129, 500), (5, 6, 0.0026, 1200), (5, 8, 0.0112, 900), (6, 7, 0.0092, 900),
    (6, 11, 0.0082, 480), (6, 31, 0.025, 1800), (7, 8, 0.0046, 900), (8, 9, 0.0363, 900),
    (9, 39, 0.025, 900), (10, 11, 0.0043, 600), (10, 13, 0.0043, 600), (10, 32, 0.02, 900),
    (12, 11, 0.0435, 500), (12, 13, 0.0435, 500), (13, 14, 0.0101, 600), (14, 15, 0.0217, 600),
    (15, 16, 0.0094, 600), (16, 17, 0.0089, 600), (16, 19, 0.0195, 600), (16, 21, 0.0135, 600),
    (16, 24, 0.0059, 600), (17, 18, 0.0082, 600), (17, 27, 0.0173, 600), (19, 20, 0.0138, 900),
    (19, 33, 0.0142, 900), (20, 34, 0.018, 900), (21, 22, 0.014, 900), (22, 23, 0.0096, 600),
    (22, 35, 0.0143, 900), (23, 24, 0.035, 600), (23, 36, 0.0272, 900), (25, 26, 0.0323, 600),
    (25, 37, 0.0232, 900), (26, 27, 0.0147, 600), (26, 28, 0.0474, 600), (26, 29, 0.0625, 600),
    (28, 29, 0.0151, 600), (29, 38, 0.0156, 1200),
]

# id, bus, pmax, pmin, a, b, c, ramp (MW/min)
gens = [
    ("G1", 30, 1040, 0, 0.00048, 16.19, 1000, 6.2),
    ("G2", 31, 646, 0, 0.00031, 17.26, 970, 3.8),
    ("G3", 32, 725, 0, 0.00211, 16.50, 680, 4.3),
    ("G4", 33, 652, 0, 0.00200, 16.60, 700, 3.9),
    ("G5", 34, 508, 0, 0.00398, 19.70, 450, 3.1),
    ("G6", 35, 687, 0, 0.00712, 22.26, 370, 4.11),
    ("G7", 36, 580, 0, 0.00079, 27.74, 480, 3.5),
    ("G8", 37, 564, 0, 0.00413, 25.92, 660, 3.4),
    ("G9", 38, 865, 0, 0.00222, 27.27, 665, 5.2),
    ("G10", 39, 1100, 0, 0.00173, 27.79, 670, 6.6),
]

case = {
    "schema": "sded-case/1",
    "name": "ieee39",
    "provenance": __doc__.strip().replace("\n", " "),
    "base_mva": 100.0,
    "buses": [{"id": i, "demand_mw": float(loads.get(i, 0.0)), "is_reference": i == 31}
              for i in range(1, 40)],
    "lines": [{"from_bus": f, "to_bus": t, "susceptance_pu": 1.0 / x, "limit_mw": float(r),
               "angle_diff_bounds_rad": [-0.6, 0.6], "phase_shift_rad": 0.0}
              for f, t, x, r in branches],
    "generators": [{"id": g, "bus": b, "p_max_mw": float(pmax), "p_min_mw": float(pmin),
                    "cost_a": a, "cost_b": bb, "cost_c": float(c), "ramp_mw_per_min": r,
                    "provides_regulation": True}
                   for g, b, pmax, pmin, a, bb, c, r in gens],
    "wind_plants": [],
    "storage": [],
}

if __name__ == "__main__":
    import os
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "ieee39.case.json"), "w") as f:
        json.dump(case, f, indent=2)
        f.write("\n")
