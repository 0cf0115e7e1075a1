"""Reduce an unbounded exponential sample to a bounded one without changing U_n."""

import numpy as np

from epl.distmodel import Exponential, Normal, StdNormal
from epl.errors import ConsistencyError
from epl.procgen import ProcessSpec, generate
from epl.reduction import build_reduction, find_bad_intervals, verify_transport

if __name__ == "__main__":
    model = Exponential(2.0)
    bad = find_bad_intervals(model)
    print("exponential(2) intervals where F grows at least at unit rate:", bad.to_list())
    g = build_reduction(model, bad)
    for s in (0.0, 0.4, 0.7968, 1.5, 5.0):
        print(f"  g({s}) = {float(g(s)):.6f}")

    path = generate(ProcessSpec.iid(model), 100, master_seed=11)
    grid = np.linspace(-0.5, 4.0, 1000)
    print(f"max |U_n(t) - V_n(g(t))| over the grid: {verify_transport(path, model, g, grid):.2e}")

    print("\nstandard normal has none:", find_bad_intervals(StdNormal()).to_list())
    try:
        find_bad_intervals(Normal(0.0, 0.1))
    except ConsistencyError as exc:
        print("normal(0, 0.1) is rejected:", exc)
