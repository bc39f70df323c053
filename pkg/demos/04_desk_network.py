"""A three-layer network through the full stack, checked against the integer reference.

Uses the bundled 1-b XNOR and 4-b two's-complement desk networks; rebuild
them with ``python3 demos/build_bundle.py``.  The same run is available as
``cimu run-network --network demos/data/desk_xnor1.net --check``.

    python3 demos/04_desk_network.py
"""

from pathlib import Path

import numpy as np

from cimu.fileio import read_network, read_tensor
from cimu.mapper import lower_network
from cimu.network import reference_network, run_network

DATA = Path(__file__).parent / "data"

for name in ("desk_xnor1", "desk_twos4"):
    stages = lower_network(read_network(DATA / f"{name}.net"))
    x, _ = read_tensor(DATA / f"{name}_input.bin")
    res = run_network(stages, x)
    ref = reference_network(stages, x)
    print(f"{name}:")
    for st, got, want in zip(stages, res.outputs, ref):
        print(f"  {st.layer.kind:<6} path={st.path} out {tuple(got.shape)} match={np.array_equal(got, want)}")
    print(f"  final: {res.final.ravel().tolist()}")
    print(f"  {res.unit.stats}")
