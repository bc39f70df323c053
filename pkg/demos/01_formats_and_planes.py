"""Number formats and bit-plane execution of one small MVM.

Shows the two signed formats, how a value splits into bit planes, and that
running the planes through the simulated array recombines to the exact
integer product.

    python3 demos/01_formats_and_planes.py
"""

import numpy as np

from cimu import numfmt
from cimu.core import run_mvm
from cimu.verify_oracle import reference_mvm

for fmt in (numfmt.twos(3), numfmt.xnor(3), numfmt.xnor(1)):
    print(f"{fmt}: weights {numfmt.bit_weights(fmt).tolist()}, values {fmt.values().tolist()}")

fmt = numfmt.xnor(3)
for v in (-4, 0, 2):
    print(f"  {v:+d} -> bits {numfmt.decompose(v, fmt)}")

rng = np.random.default_rng(1)
fa, fx = numfmt.twos(4), numfmt.twos(3)
A = rng.choice(fa.values(), size=(6, 40))
x = rng.choice(fx.values(), size=40)
r = run_mvm(A, x, fa, fx)
print("\nraw column sums per input plane (first 6 physical columns):")
print(r.sums[:, :6])
print("recombined y :", r.y.tolist())
print("A @ x        :", reference_mvm(A, x).tolist())
print("exact:", r.exact, "| bit-true:", np.array_equal(r.y, reference_mvm(A, x)))
