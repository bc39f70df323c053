"""Batch command-line frontend.

Every failure prints one line, ``error: <Code>: <text>``, to stderr and
exits 2 (input), 3 (capacity / plan) or 4 (internal).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cima_array import COLS, ROWS, ROWS_PER_SEGMENT, N_SEGMENTS, Mode
from .core import Cimu
from .errors import CimuError, InputError
from .fileio import read_network, read_tensor, write_report, write_tensor, atomic_write
from .mapper import resolve_full_scale, lower_network, network_plans
from .network import reference_network, run_network
from .numfmt import NumberFormat, parse_format
from .perf_model import CycleConstants, get_corner, matrix_load_cycles, peak_tops, summarize
from .plan import ExecutionPlan
from .verify_oracle import linearity_sweep, sqnr_sweep


class UsageError(InputError):
    code = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _policy(text: str):
    if text == "auto":
        return "auto"
    if text.startswith("fixed:"):
        try:
            k = int(text[6:])
        except ValueError:
            k = 0
        if k >= 1:
            return k
    raise UsageError(f"--full-scale-policy must be 'auto' or 'fixed:K' with K >= 1, got {text!r}")


def _int_list(text: str) -> list:
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        try:
            out += list(range(int(lo), int(hi or lo) + 1))
        except ValueError:
            raise UsageError(f"bad integer list {text!r}") from None
    return out


def _fmt(text, fallback, what) -> NumberFormat:
    if text:
        try:
            return parse_format(text)
        except (ValueError, CimuError) as e:
            raise UsageError(f"bad {what} format {text!r}: {e}") from None
    if fallback is None:
        raise UsageError(f"{what} format unknown: give it in the tensor header or on the command line")
    return fallback


def _consts(args) -> CycleConstants:
    return CycleConstants(ii=args.ii)


def _emit_report(args, d: dict):
    from .fileio import dump_kv
    if getattr(args, "report", None):
        write_report(args.report, d)
    else:
        sys.stdout.write(dump_kv(d))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cimu", description="Compute-in-memory MVM accelerator simulator")
    p.add_argument("--version", action="version", version=f"cimu {__version__}")
    p.add_argument("--corner", default="high", help="energy/frequency corner: high or low")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ii", type=int, default=CycleConstants().ii, help="initiation interval in cycles")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="column-sum noise (unit charges)")
    p.add_argument("--full-scale-policy", default="auto", help="auto or fixed:K")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run-mvm", help="one matrix-vector multiply")
    r.add_argument("--matrix", required=True)
    r.add_argument("--vector", required=True)
    r.add_argument("--fmt-a")
    r.add_argument("--fmt-x")
    r.add_argument("--path", choices=("adc", "abn"), default="adc")
    r.add_argument("--thresholds", help="tensor of per-output ABN threshold codes")
    r.add_argument("--no-sparsity", action="store_true", help="do not mask zero inputs (multi-bit XNOR)")
    r.add_argument("--out", required=True)
    r.add_argument("--report")

    n = sub.add_parser("run-network", help="lower and run a network description")
    n.add_argument("--network", required=True)
    n.add_argument("--input", help="input activation tensor (random if omitted)")
    n.add_argument("--dry-run", action="store_true", help="shapes and reports only, random weights")
    n.add_argument("--out-dir")
    n.add_argument("--check", action="store_true", help="also run the integer reference and compare")
    n.add_argument("--report")

    s = sub.add_parser("sqnr", help="SQNR sweep over B_A for several B_x")
    s.add_argument("--n", type=int, default=ROWS)
    s.add_argument("--mode", choices=("and", "xnor"), default="and")
    s.add_argument("--ba", default="1-8")
    s.add_argument("--bx", default="1,2,4,8")
    s.add_argument("--sparsity", type=float, default=0.0)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--out")

    li = sub.add_parser("linearity", help="all-ones column transfer sweep")
    li.add_argument("--path", choices=("adc", "abn"), default="adc")
    li.add_argument("--n", type=int, default=255)
    li.add_argument("--out")

    pf = sub.add_parser("perf", help="cycle / energy report for a matrix load, a tile, or a network")
    pf.add_argument("--load-segments", type=int, help="report a matrix load of this many segments")
    pf.add_argument("--n", type=int, default=ROWS)
    pf.add_argument("--m", type=int, help="logical outputs (default 256 // B_A)")
    pf.add_argument("--ba", type=int, default=1)
    pf.add_argument("--bx", type=int, default=1)
    pf.add_argument("--mode", choices=("and", "xnor"), default="xnor")
    pf.add_argument("--path", choices=("adc", "abn"), default="abn")
    pf.add_argument("--n-mvm", type=int, default=1)
    pf.add_argument("--network", help="network description; overrides the tile options")
    pf.add_argument("--report")
    return p


# ---------------------------------------------------------------------------
# commands


def cmd_run_mvm(args) -> int:
    A, hdr_a = read_tensor(args.matrix)
    x, hdr_x = read_tensor(args.vector)
    fmt_a = _fmt(args.fmt_a, hdr_a, "matrix")
    fmt_x = _fmt(args.fmt_x, hdr_x, "vector")
    if A.ndim != 2 or x.ndim != 1:
        raise UsageError(f"need a 2-D matrix and a 1-D vector, got {A.shape} and {x.shape}")
    m, n = A.shape
    policy = _policy(args.full_scale_policy)
    F, lossy = resolve_full_scale(n, policy)
    unit = Cimu(args.noise_sigma, args.seed)
    unit.load_matrix(A, fmt_a)
    unit.set_input(x, fmt_x)
    kw = {"path": args.path, "full_scale": F, "sparsity": not args.no_sparsity}
    if args.path == "abn":
        kw["full_scale"] = F if policy != "auto" else n
        kw["thresholds"] = read_tensor(args.thresholds)[0] if args.thresholds else 0
    res = unit.run(**kw)
    out = res.outputs if args.path == "abn" else res.y
    write_tensor(args.out, np.asarray(out, dtype=np.int64), dtype="int32")

    plan = ExecutionPlan("mvm", fmt_a, fmt_x, n_rows=n, m_logical=m, n_mvm=1, path=args.path,
                         full_scale=res.full_scale, lossy=lossy,
                         zero_fraction=float(np.mean(x == 0)) if fmt_a.is_xnor else 0.0)
    summ = summarize([plan], args.corner, _consts(args))
    d = {"command": "run-mvm", "n": n, "m": m, "fmt_a": fmt_a, "fmt_x": fmt_x, "path": args.path,
         "full_scale": res.full_scale, "exact": res.exact, "zero_tally": res.zero_tally,
         "seed": args.seed, "noise_sigma": args.noise_sigma}
    d.update(summ.to_dict())
    _emit_report(args, d)
    return 0


def cmd_run_network(args) -> int:
    policy = _policy(args.full_scale_policy)
    graph = read_network(args.network)
    graph.random_weights(args.seed)
    stages = lower_network(graph, policy)
    plans = network_plans(stages)
    summ = summarize(plans, args.corner, _consts(args))
    d = {"command": "run-network", "network": graph.name, "input_shape": graph.input_shape,
         "stages": len(stages), "plans": len(plans), "extension_tiles": sum(p.extension for p in plans)}
    if not args.dry_run:
        if args.input:
            x, _ = read_tensor(args.input)
        else:
            fmt = stages[0].layer.fmt_x
            x = np.random.default_rng(args.seed).choice(fmt.values(), size=graph.input_shape)
        if tuple(x.shape) != tuple(graph.input_shape):
            raise UsageError(f"input shape {x.shape} != network input {graph.input_shape}")
        res = run_network(stages, x, noise_sigma=args.noise_sigma, seed=args.seed)
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            for st, y in zip(stages, res.outputs):
                write_tensor(out_dir / f"{st.layer.name}.bin", y, dtype="int32")
        d["output"] = np.asarray(res.final).ravel()
        if args.check:
            ref = reference_network(stages, x)
            d["matches_reference"] = all(np.array_equal(a, b) for a, b in zip(res.outputs, ref))
    d.update(summ.to_dict())
    d["energy_uj_per_inference"] = summ.energy_uj
    d["inferences_per_s"] = summ.rate
    _emit_report(args, d)
    return 0 if d.get("matches_reference", True) else 4


def _write_text(path, text: str):
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def cmd_sqnr(args) -> int:
    policy = _policy(args.full_scale_policy)
    ba, bx = _int_list(args.ba), _int_list(args.bx)
    if not all(1 <= b <= 8 for b in ba + bx):
        raise UsageError("ba and bx must be in 1..8")
    if not 1 <= args.n <= ROWS or args.trials < 1 or not 0 <= args.sparsity <= 1:
        raise UsageError(f"need 1 <= n <= {ROWS}, trials >= 1 and 0 <= sparsity <= 1")
    curve = sqnr_sweep(args.n, Mode(args.mode), ba, bx, args.sparsity,
                       None if policy == "auto" else policy, args.trials, args.seed,
                       noise_sigma=args.noise_sigma)
    _write_text(args.out, curve.to_text())
    return 0


def cmd_linearity(args) -> int:
    policy = _policy(args.full_scale_policy)
    if not 1 <= args.n <= ROWS:
        raise UsageError(f"need 1 <= n <= {ROWS}")
    t = linearity_sweep(args.path, args.n, None if policy == "auto" else policy, args.noise_sigma, args.seed)
    _write_text(args.out, t.to_text())
    return 0


def cmd_perf(args) -> int:
    consts = _consts(args)
    t = get_corner(args.corner)
    if args.load_segments is not None:
        if not 0 <= args.load_segments <= N_SEGMENTS:
            raise UsageError(f"segments must be in [0, {N_SEGMENTS}]")
        d = {"command": "perf", "segments": args.load_segments,
             "cycles.matrix_load": matrix_load_cycles(args.load_segments, consts),
             "cycles.per_segment": matrix_load_cycles(1, consts)}
        _emit_report(args, d)
        return 0
    if args.network:
        graph = read_network(args.network).random_weights(args.seed)
        plans = network_plans(lower_network(graph, _policy(args.full_scale_policy)))
        d = {"command": "perf", "network": graph.name}
    else:
        kind = "xnor" if args.mode == "xnor" else "twos"
        fmt_a, fmt_x = parse_format(f"{kind}{args.ba}"), parse_format(f"{kind}{args.bx}")
        m = args.m if args.m is not None else COLS // args.ba
        F, lossy = resolve_full_scale(args.n, _policy(args.full_scale_policy))
        plans = [ExecutionPlan("tile", fmt_a, fmt_x, n_rows=args.n, m_logical=m, n_mvm=args.n_mvm,
                               path=args.path, full_scale=F, lossy=lossy,
                               matrix_segments=-(-args.n // ROWS_PER_SEGMENT))]
        d = {"command": "perf", "n": args.n, "m": m, "ba": args.ba, "bx": args.bx, "path": args.path,
             "peak_tops_1b": peak_tops(args.n, m, args.ba, args.bx, t.f_clk, consts)}
    summ = summarize(plans, t, consts)
    d.update(summ.to_dict())
    _emit_report(args, d)
    return 0


COMMANDS = {
    "run-mvm": cmd_run_mvm,
    "run-network": cmd_run_network,
    "sqnr": cmd_sqnr,
    "linearity": cmd_linearity,
    "perf": cmd_perf,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.ii < 1:
            raise UsageError("--ii must be >= 1")
        if args.noise_sigma < 0:
            raise UsageError("--noise-sigma must be >= 0")
        get_corner(args.corner)
        _policy(args.full_scale_policy)
        return COMMANDS[args.command](args)
    except CimuError as e:
        msg = " ".join(str(e).split())
        print(f"error: {e.code}: {msg}", file=sys.stderr)
        return e.exit_status
    except Exception as e:  # invariant violations surface as exit 4
        msg = " ".join(str(e).split())
        print(f"error: InternalError: {type(e).__name__}: {msg}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
