# # Splitting the day into time blocks
#
# The decomposition prices the rows that tie consecutive blocks together, such as ramps
# and minimum up/down times, and solves each block on its own. That gives a lower bound. A
# restricted MISOCP, built from the blocks' commitments, gives an upper bound.
# Subgradient steps on the prices close the gap.

from acuc.case_io import builtin_case
from acuc.instance_gen import generate_instance
from acuc.lagrangian import run_decomposition

inst = generate_instance(builtin_case("case9"), seed=1, name="case9-TYP")

# gap_target is a fraction: stop below 1%
res = run_decomposition(inst, 4, max_iters=3, gap_target=0.01)
for rec in res.iterations:
    print(f"iter {rec.iteration}: lb {rec.best_lb:.2f}  ub {rec.best_ub:.2f}  gap {100 * rec.gap:.3f}%")
print(f"stopped after {len(res.iterations)} iterations, gap {100 * res.iterations[-1].gap:.3f}%")
