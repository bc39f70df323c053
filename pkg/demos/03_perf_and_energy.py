"""Cycle and energy model: one tile, peak numbers, and a Network-B dry run.

    python3 demos/03_perf_and_energy.py
"""

from pathlib import Path

from cimu import numfmt
from cimu.fileio import read_network
from cimu.mapper import lower_network
from cimu.network import perf_summary
from cimu.perf_model import matrix_load_cycles, mvm_cycles, mvm_energy, peak_tops, vector_transfer_cycles
from cimu.plan import ExecutionPlan

DATA = Path(__file__).parent / "data"

print(f"matrix load: {matrix_load_cycles(1)} cycles/segment, {matrix_load_cycles()} for the whole array")
print(f"1-b input vector of 2304: {vector_transfer_cycles(2304, 1)} cycles")
print(f"peak: {peak_tops(f_clk=100e6):.3f} 1b-TOPS @100 MHz, {peak_tops(f_clk=40e6):.3f} @40 MHz")

for bx in (1, 4, 8):
    p = ExecutionPlan("tile", numfmt.twos(1), numfmt.twos(bx), 2304, 256, n_mvm=100)
    c = mvm_cycles(p)
    print(f"B_x={bx}: 100 MVMs, steady state {c.phases['steady_state']} cycles, "
          f"busy {c.busy}, transfer bound: {c.transfer_bound}")

bnn = ExecutionPlan("bnn", numfmt.xnor(1), numfmt.xnor(1), 2304, 256, n_mvm=1000, path="abn", full_scale=2304)
for corner in ("high", "low"):
    print(f"ABN path, {corner} corner: {mvm_energy(bnn, corner).core_tops_per_w:.1f} 1b-TOPS/W (core only)")

graph = read_network(DATA / "network_b.net").random_weights(0)
stages = lower_network(graph)
s = perf_summary(stages, "low")
print(f"\nNetwork-B dry run, {len(stages)} stages, low corner:")
print(f"  {s.energy_uj:.2f} uJ/inference, {s.rate:.1f} inferences/s")
