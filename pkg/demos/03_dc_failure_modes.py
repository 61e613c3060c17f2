# # Where a DC commitment goes wrong
#
# A DC model ignores losses, voltage magnitudes and reactive power. Three tiny
# networks show each failure: the DC problem has no solution, the DC schedule
# has no AC dispatch, or the AC dispatch it leads to costs more than needed.

import math

from acuc.case_io import BranchRecord, BusRecord, GeneratorRecord, Network, branch_admittance
from acuc.instance_gen import UcGeneratorParams, make_instance
from acuc.runs import format_table, run_base, run_dc

NAMES = ("Gff", "Bff", "Gft", "Bft", "Gtf", "Btf", "Gtt", "Btt")


def line(f, t, r, x, s_max=math.inf):
    blocks = branch_admittance(r, x, 0.0, 1.0, 0.0)
    return BranchRecord(from_bus=f, to_bus=t, r=r, x=x, b_charge=0.0, tap=1.0, shift=0.0, s_max=s_max,
                        angle_min=-math.radians(30), angle_max=math.radians(30), **dict(zip(NAMES, blocks)))


def bus(k, pd=0.0, qd=0.0, ref=False):
    return BusRecord(id=k, type="ref" if ref else "PQ", pd=pd, qd=qd, gs_shunt=0.0, bs_shunt=0.0,
                     vmin=0.9, vmax=1.1)


def unit(b, c1, pmax=2.0, qmin=-2.0, qmax=2.0):
    return GeneratorRecord(bus=b, pmin=0.0, pmax=pmax, qmin=qmin, qmax=qmax, cost_quadratic=1.0,
                           cost_linear=c1, cost_constant=0.0)


def instance(buses, branches, gens, name, fixed=0.0):
    net = Network(name=name, base_mva=100.0, buses=buses, branches=branches, generators=gens)
    pd = [[b.pd] * 2 for b in buses]
    qd = [[b.qd] * 2 for b in buses]
    # fixed (no-load) cost makes running a second unit a real decision
    par = [UcGeneratorParams(type=1, RU=10.0, RD=10.0, MinUp=1, MinDw=1, fixed_cost=fixed, startup_cost=0.0)
           for _ in gens]
    return make_instance(net, pd, qd, par, name=name)


# Lossless angles force 0.4 pu over the rated 1-3 line, so DC finds nothing.
# The AC model can steer flow through voltage magnitudes and stay in limits.
a = instance([bus(1, ref=True), bus(2), bus(3, pd=0.8, qd=0.08)],
             [line(1, 2, 0.0, 0.1), line(2, 3, 0.0, 0.1), line(1, 3, 0.3, 0.1, s_max=0.5)],
             [unit(1, 10.0)], "dc-infeasible", fixed=1.0)

# DC switches off the expensive unit at the load, but the cheap one cannot
# make reactive power, so nothing covers the 0.6 pu reactive demand.
b = instance([bus(1, ref=True), bus(2, pd=0.5, qd=0.6)], [line(1, 2, 0.01, 0.1)],
             [unit(1, 10.0, qmin=0.0, qmax=0.0), unit(2, 12.0)], "reactive-blind", fixed=5.0)

# DC buys power across a lossy line because it cannot see the losses.
c = instance([bus(1, ref=True), bus(2, pd=0.5, qd=0.1)], [line(1, 2, 0.3, 0.1)],
             [unit(1, 10.0), unit(2, 11.0)], "loss-blind", fixed=5.0)

reports = []
for inst in (a, b, c):
    reports += [run_dc(inst), run_base(inst)]
print(format_table(reports))
