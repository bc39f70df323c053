"""Regenerate the files in demos/data.

Everything is derived from fixed seeds; expected outputs come from the
integer reference, never from the simulator itself.

    python3 demos/build_bundle.py
"""

from pathlib import Path

import numpy as np

from cimu.fileio import atomic_write, read_network, write_tensor
from cimu.mapper import lower_network
from cimu.network import reference_network
from cimu.numfmt import twos, xnor
from cimu.verify_oracle import reference_mvm

DATA = Path(__file__).resolve().parent / "data"

NETWORK_B = """\
# Layer list of the 1-b CIFAR-10 network (shapes only; weights are drawn at run time)
name = network_b
input = 32x32x3
format = xnor
ba = 1
bx = 1
L1: 128 CONV3 - BN - SIGN
L2: 128 CONV3 - POOL - BN - SIGN
L3: 256 CONV3 - BN - SIGN
L4: 256 CONV3 - POOL - BN - SIGN
L5: 256 CONV3 - BN - SIGN
L6: 256 CONV3 - POOL - BN - SIGN
L7-8: 1024 FC - BN - SIGN
L9: 10 FC - BN
"""

DESK = {
    "desk_xnor1": ("xnor", 1, "SIGN"),
    "desk_twos4": ("twos", 4, "RELU"),
}


def desk_text(name, kind, b, act):
    return (
        f"# three-layer desk-scale network, {b}-b {kind}\n"
        f"name = {name}\ninput = 8x8x3\nformat = {kind}\nba = {b}\nbx = {b}\n"
        f"L1: 16 CONV3 - BN - {act} - POOL weights={name}_L1.bin\n"
        f"L2: 16 CONV3 - BN - {act} pad=0 weights={name}_L2.bin\n"
        f"L3: 10 FC weights={name}_L3.bin\n"
    )


def main():
    DATA.mkdir(exist_ok=True)
    atomic_write(DATA / "network_b.net", NETWORK_B)

    for i, (name, (kind, b, act)) in enumerate(DESK.items()):
        fmt = xnor(b) if kind == "xnor" else twos(b)
        rng = np.random.default_rng(100 + i)
        # symmetric weights; the lone -2^(B-1) code would bias every sum negative behind a ReLU
        w = fmt.values()[1:] if kind == "twos" else fmt.values()
        write_tensor(DATA / f"{name}_L1.bin", rng.choice(w, size=(16, 3, 3, 3)), fmt)
        write_tensor(DATA / f"{name}_L2.bin", rng.choice(w, size=(16, 16, 3, 3)), fmt)
        write_tensor(DATA / f"{name}_L3.bin", rng.choice(w, size=(10, 64)), fmt)
        atomic_write(DATA / f"{name}.net", desk_text(name, kind, b, act))
        x = rng.choice(fmt.values(), size=(8, 8, 3))
        write_tensor(DATA / f"{name}_input.bin", x, fmt)
        ref = reference_network(lower_network(read_network(DATA / f"{name}.net")), x)
        write_tensor(DATA / f"{name}_expected.bin", ref[-1], dtype="int32")

    rng = np.random.default_rng(7)
    A = rng.choice(twos(4).values(), size=(64, 255))
    x = rng.choice(twos(3).values(), size=255)
    write_tensor(DATA / "mvm_A.bin", A, twos(4))
    write_tensor(DATA / "mvm_x.bin", x, twos(3))
    write_tensor(DATA / "mvm_y_expected.bin", reference_mvm(A, x), dtype="int32")
    print(f"wrote {len(list(DATA.iterdir()))} files to {DATA}")


if __name__ == "__main__":
    main()
