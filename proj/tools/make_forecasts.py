#!/usr/bin/env python3
"""Writes the bundled percentile forecast fixtures under data/forecasts/.

The real PERFORM percentile files are not redistributed. These stand-ins put
the median path on the 2-hour, 15-minute dispatch profile (system demand and
available wind of the 20% penetration case, in MW) and spread the 99
percentiles with an adaptive Gaussian: sigma grows with lead time.

Files are plain CSV: timestamp,p1,...,p99. Values are written in MW; the
loader normalizes each file so its median path averages 1.0.
"""
import os
from statistics import NormalDist

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data", "forecasts")

STAMPS = ["2018-01-04T15:00:00Z", "2018-01-04T15:15:00Z", "2018-01-04T15:30:00Z", "2018-01-04T15:45:00Z",
          "2018-01-04T16:00:00Z", "2018-01-04T16:15:00Z", "2018-01-04T16:30:00Z", "2018-01-04T16:45:00Z"]

DEMAND = [4598.9, 4669.3, 4379.1, 4170.6, 4143.8, 4399.4, 3603.5, 3799.1]
WIND = [475.1, 476.0, 453.9, 455.6, 407.1, 371.8, 338.7, 336.8]

# three-bus fixture: two periods
SMALL_STAMPS = STAMPS[:2]
SMALL_DEMAND = [250.0, 200.0]
SMALL_WIND = [60.0, 90.0]


def percentiles(median, sigma):
    z = [NormalDist().inv_cdf(k / 100.0) for k in range(1, 100)]
    return [max(0.0, median * (1.0 + sigma * zk)) for zk in z]


def write(name, stamps, medians, sigma0, sigma_step):
    path = os.path.join(OUT, name)
    with open(path, "w", newline="\n") as f:
        f.write("timestamp," + ",".join(f"p{k}" for k in range(1, 100)) + "\n")
        for t, (ts, m) in enumerate(zip(stamps, medians)):
            row = percentiles(m, sigma0 + sigma_step * t)
            f.write(ts + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
    print("wrote", os.path.relpath(path))


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    write("load_percentiles.csv", STAMPS, DEMAND, 0.010, 0.001)
    write("wind_percentiles.csv", STAMPS, WIND, 0.06, 0.01)
    write("three_bus_load.csv", SMALL_STAMPS, SMALL_DEMAND, 0.03, 0.0)
    write("three_bus_wind.csv", SMALL_STAMPS, SMALL_WIND, 0.20, 0.0)
