"""Write the small synthetic income data set used by the demo configs.

Dagum incomes on a 4 x 4 grid of regions with an age smooth, an east
indicator and a household random effect in the scale parameter.
"""
import os

import numpy as np

from distreg.families import get_family
from distreg.simulation import grid_adjacency

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def main(n=800, seed=20):
    rng = np.random.default_rng(seed)
    adj = grid_adjacency(4)
    region = np.asarray(adj.regions, dtype=object)[rng.integers(0, adj.size, n)]
    # regions in the two left columns count as "east"
    east = np.array([float(int(r.split("_")[1]) < 2) for r in region])
    age = rng.uniform(20, 65, n)
    hh = np.array([f"h{i}" for i in rng.integers(0, 40, n)], dtype=object)
    hh_eff = {f"h{i}": v for i, v in enumerate(rng.normal(0, 0.1, 40))}
    log_b = (7.5 + 0.4 * np.sin((age - 20) / 45 * np.pi) - 0.3 * east
             + np.array([hh_eff[h] for h in hh]))
    theta = [np.full(n, 3.5), np.exp(log_b), np.full(n, 1.2)]
    y = get_family("dagum").rvs(theta, rng)
    os.makedirs(HERE, exist_ok=True)
    with open(os.path.join(HERE, "income.csv"), "w", encoding="utf-8") as fh:
        fh.write("y,age,east,region,household\n")
        for row in zip(y, age, east, region, hh):
            fh.write(f"{row[0]:.6f},{row[1]:.4f},{row[2]:.0f},{row[3]},{row[4]}\n")
    adj.to_file(os.path.join(HERE, "regions.adj"))


if __name__ == "__main__":
    main()
