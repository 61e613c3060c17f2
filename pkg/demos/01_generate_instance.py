# # Building a 24-hour commitment instance
#
# A bundled network file only fixes one load snapshot. The generator turns it
# into a day: each load bus follows a demand shape, each unit gets a type that
# sets ramp limits, minimum up/down times and its fixed and startup costs.

import numpy as np

from acuc.case_io import builtin_case
from acuc.instance_gen import builtin_profiles, generate_instance

net = builtin_case("case9")
print(net.n_bus, "buses,", net.n_gen, "units,", len(net.branches), "lines")

# The same seed gives the same instance, so runs can be repeated exactly.
inst = generate_instance(net, seed=1, name="case9-TYP")
assert inst == generate_instance(net, seed=1, name="case9-TYP")

# Each unit's type decides its technical limits.
for g, par in zip(net.generators, inst.gen_params):
    print(f"unit at bus {g.bus}: type {par.type}, ramp {par.RU:.3f} pu/h, "
          f"min up {par.MinUp} h, startup cost {par.startup_cost:.0f}")

# System demand over the day, in per unit.
total = inst.pd.sum(axis=0)
print("hourly demand:", np.round(total, 3))
print("valley at hour", int(total.argmin()) + 1, "peak at hour", int(total.argmax()) + 1)

# The available demand shapes, peak-normalised.
for name, prof in builtin_profiles().items():
    print(f"{name:10s} min {min(prof.values):.3f}")
