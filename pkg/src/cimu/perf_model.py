"""Cycle and energy accounting for lowered execution plans.

Cycle model per plan::

    matrix load      segments * max(C_A, C_LOAD), C_A = DMA cycles per 768-b segment
    steady state     n_mvm * max(B_x * II, C_x, C_y)
    pipeline fill    C_CIMA + (C_ADC | C_ABN) + C_NEARMEM, once per plan
    host             one cycle per host instruction

Energy per bit-plane evaluation scales with the active (ungated) columns;
the array term is additionally scaled by the active row fraction and half of
it (broadcast + bit-cell compute) by the non-zero input fraction.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .cima_array import COLS, N_SEGMENTS, ROWS, ROWS_PER_SEGMENT, SEGMENT_BITS
from .errors import UnknownCorner, UnloweredPlan
from .io_frontend import WORD_BITS, words_for
from .near_mem import output_width
from .plan import ExecutionPlan

BROADCAST_SHARE = 0.5  # fraction of array energy spent on input broadcast + cell compute


@dataclass(frozen=True)
class CycleConstants:
    rdwr: int = 20
    cima: int = 50
    adc: int = 20
    abn: int = 20
    nearmem: int = 8
    load: int = 20
    dma_cycles_per_word: int = 1
    ii: int = 25

    def __post_init__(self):
        for k, v in asdict(self).items():
            if int(v) != v or v < 1:
                raise ValueError(f"{k} must be a positive integer")

    @property
    def segment_dma(self) -> int:
        """C_A: cycles to DMA one 768-b row segment."""
        return (SEGMENT_BITS // WORD_BITS) * self.dma_cycles_per_word


@dataclass(frozen=True)
class EnergyTable:
    """Per-event energies in pJ and the clock for one supply corner."""

    name: str
    cpu_per_instr: float
    pdmem_per_32b: float
    dma_per_32b: float
    cima_per_column: float
    adc_per_column: float
    abn_per_column: float
    reshape_per_32b_input: float
    digital_datapath_per_output: float
    f_clk: float  # Hz


CORNERS = {
    "high": EnergyTable("high", 52, 96, 13.5, 20.4, 3.56, 9.78, 35, 14.7, 100e6),
    "low": EnergyTable("low", 26, 33, 7.0, 9.7, 1.79, 4.92, 12, 8.3, 40e6),
}


def get_corner(corner) -> EnergyTable:
    if isinstance(corner, EnergyTable):
        return corner
    try:
        return CORNERS[corner]
    except KeyError:
        raise UnknownCorner(f"unknown corner {corner!r}; expected one of {sorted(CORNERS)}") from None


def matrix_load_cycles(segments: int = N_SEGMENTS, consts: CycleConstants = CycleConstants()) -> int:
    return int(segments) * max(consts.segment_dma, consts.load)


def vector_transfer_cycles(n: int, bx: int, consts: CycleConstants = CycleConstants()) -> int:
    return words_for(n, bx) * consts.dma_cycles_per_word


def output_transfer_cycles(m_logical: int, by: int, consts: CycleConstants = CycleConstants()) -> int:
    return -(-int(m_logical) * int(by) // WORD_BITS) * consts.dma_cycles_per_word


def plan_output_bits(plan: ExecutionPlan) -> int:
    if plan.output_bits is not None:
        return plan.output_bits
    if plan.path == "abn":
        return 1
    return output_width(plan.fmt_x.width, plan.fmt_a.width)


def plan_input_words(plan: ExecutionPlan) -> int:
    if plan.input_words is not None:
        return plan.input_words
    return plan.n_mvm * words_for(plan.n_rows, plan.fmt_x.width)


def plan_segments(plan: ExecutionPlan) -> int:
    if plan.matrix_segments is not None:
        return plan.matrix_segments
    return -(-plan.n_rows // ROWS_PER_SEGMENT)


def ops_per_mvm(plan: ExecutionPlan) -> int:
    """1-b operations per MVM: two per 1-b multiply-accumulate."""
    return 2 * plan.n_rows * plan.m_logical * plan.fmt_a.width * plan.fmt_x.width


def peak_tops(n: int = ROWS, m: int = COLS, ba: int = 1, bx: int = 1,
              f_clk: float = 100e6, consts: CycleConstants = CycleConstants()) -> float:
    """Compute-bound 1-b TOPS for an n x m logical matrix of ba-bit elements."""
    ops = 2 * n * m * ba * bx
    return ops * f_clk / (bx * consts.ii) / 1e12


@dataclass
class CycleReport:
    """Non-overlapping cycle phases (they sum to ``total``) plus overlapped busy counts."""

    phases: dict
    busy: dict
    n_mvm: int
    transfer_bound: bool
    ops: int
    f_clk: float

    @property
    def total(self) -> int:
        return int(sum(self.phases.values()))

    @property
    def seconds(self) -> float:
        return self.total / self.f_clk

    @property
    def effective_tops(self) -> float:
        return self.ops / self.seconds / 1e12 if self.total else 0.0

    def to_dict(self) -> dict:
        d = {f"cycles.{k}": v for k, v in self.phases.items()}
        d.update({f"busy.{k}": v for k, v in self.busy.items()})
        d.update({"cycles.total": self.total, "n_mvm": self.n_mvm,
                  "transfer_bound": int(self.transfer_bound),
                  "effective_tops_1b": self.effective_tops})
        return d

    def __add__(self, other: "CycleReport") -> "CycleReport":
        return CycleReport(
            _merge(self.phases, other.phases), _merge(self.busy, other.busy),
            self.n_mvm + other.n_mvm, self.transfer_bound or other.transfer_bound,
            self.ops + other.ops, self.f_clk,
        )


@dataclass
class EnergyReport:
    phases: dict  # pJ
    ops: int
    corner: str
    core_phases: tuple = ("cima", "conversion", "datapath")

    @property
    def total(self) -> float:
        return float(sum(self.phases.values()))

    @property
    def core(self) -> float:
        return float(sum(self.phases.get(k, 0.0) for k in self.core_phases))

    @property
    def tops_per_w(self) -> float:
        """Whole-plan efficiency (all phases)."""
        return self.ops / self.total if self.total else 0.0

    @property
    def core_tops_per_w(self) -> float:
        """Array + converters + datapath only; ops per pJ equals TOPS/W."""
        return self.ops / self.core if self.core else 0.0

    def to_dict(self) -> dict:
        d = {f"energy_pj.{k}": v for k, v in self.phases.items()}
        d.update({"energy_pj.total": self.total, "energy_pj.core": self.core,
                  "tops_per_w_1b": self.tops_per_w, "core_tops_per_w_1b": self.core_tops_per_w})
        return d

    def __add__(self, other: "EnergyReport") -> "EnergyReport":
        return EnergyReport(_merge(self.phases, other.phases), self.ops + other.ops, self.corner)


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


def _check(plan):
    if not isinstance(plan, ExecutionPlan) or not plan.lowered:
        raise UnloweredPlan("perf accounting needs a lowered ExecutionPlan")


def host_cycles(plan: ExecutionPlan) -> int:
    return sum(op.instructions for op in plan.host_ops)


def mvm_cycles(plan: ExecutionPlan, consts: CycleConstants = CycleConstants(), f_clk: float = 100e6) -> CycleReport:
    _check(plan)
    bx = plan.fmt_x.width
    compute = bx * consts.ii
    c_x = -(-plan_input_words(plan) // max(plan.n_mvm, 1)) * consts.dma_cycles_per_word if plan.n_mvm else 0
    c_y = output_transfer_cycles(plan.m_logical, plan_output_bits(plan), consts)
    per_mvm = max(compute, c_x, c_y)
    convert = consts.abn if plan.path == "abn" else consts.adc
    phases = {
        "matrix_load": matrix_load_cycles(plan_segments(plan), consts),
        "pipeline_fill": consts.cima + convert + consts.nearmem if plan.n_mvm else 0,
        "steady_state": plan.n_mvm * per_mvm,
        "host": host_cycles(plan),
    }
    busy = {
        "compute": plan.n_mvm * compute,
        "input_dma": plan_input_words(plan) * consts.dma_cycles_per_word,
        "output_dma": plan.n_mvm * c_y,
    }
    return CycleReport(phases, busy, plan.n_mvm, c_x > compute, plan.n_mvm * ops_per_mvm(plan), f_clk)


def mvm_energy(plan: ExecutionPlan, corner="high") -> EnergyReport:
    _check(plan)
    t = get_corner(corner)
    cols = plan.active_columns
    names = ("cima", "conversion", "datapath", "reshape", "dma", "matrix_load", "host_cpu", "host_mem")
    phases = dict.fromkeys(names, 0.0)
    if cols == 0:
        return EnergyReport(phases, 0, t.name)
    evals = plan.n_mvm * plan.fmt_x.width
    row_frac = plan.n_conf / ROWS
    nonzero = 1.0 - plan.zero_fraction
    per_col_cima = t.cima_per_column * row_frac * ((1 - BROADCAST_SHARE) + BROADCAST_SHARE * nonzero)
    per_col_conv = t.abn_per_column if plan.path == "abn" else t.adc_per_column
    in_words = plan_input_words(plan)
    out_words = plan.n_mvm * -(-plan.m_logical * plan_output_bits(plan) // WORD_BITS)
    seg_words = plan_segments(plan) * (SEGMENT_BITS // WORD_BITS)
    phases["cima"] = evals * cols * per_col_cima
    phases["conversion"] = evals * cols * per_col_conv
    if plan.path == "adc":
        phases["datapath"] = evals * plan.m_logical * t.digital_datapath_per_output
    phases["reshape"] = in_words * t.reshape_per_32b_input
    phases["dma"] = (in_words + out_words) * t.dma_per_32b
    phases["matrix_load"] = seg_words * t.dma_per_32b
    phases["host_cpu"] = host_cycles(plan) * t.cpu_per_instr
    phases["host_mem"] = sum(op.mem_accesses for op in plan.host_ops) * t.pdmem_per_32b
    return EnergyReport(phases, plan.n_mvm * ops_per_mvm(plan), t.name)


@dataclass
class PerfSummary:
    """Aggregate over a sequence of plans (e.g. one network inference)."""

    cycles: CycleReport
    energy: EnergyReport
    corner: str
    per_plan: list = field(default_factory=list)

    @property
    def seconds(self) -> float:
        return self.cycles.seconds

    @property
    def energy_uj(self) -> float:
        return self.energy.total * 1e-6

    @property
    def rate(self) -> float:
        return 1.0 / self.seconds if self.seconds else 0.0

    def to_dict(self) -> dict:
        d = {"corner": self.corner}
        d.update(self.cycles.to_dict())
        d.update(self.energy.to_dict())
        d["energy_uj"] = self.energy_uj
        d["rate_per_s"] = self.rate
        return d


def summarize(plans, corner="high", consts: CycleConstants = CycleConstants(), extra_host=()) -> PerfSummary:
    t = get_corner(corner)
    plans = list(plans)
    cyc = CycleReport(dict.fromkeys(("matrix_load", "pipeline_fill", "steady_state", "host"), 0),
                      dict.fromkeys(("compute", "input_dma", "output_dma"), 0), 0, False, 0, t.f_clk)
    en = EnergyReport(dict.fromkeys(("cima", "conversion", "datapath", "reshape", "dma",
                                     "matrix_load", "host_cpu", "host_mem"), 0.0), 0, t.name)
    rows = []
    for p in plans:
        c, e = mvm_cycles(p, consts, t.f_clk), mvm_energy(p, t)
        cyc, en = cyc + c, en + e
        rows.append((p.name, c, e))
    for op in extra_host:
        cyc.phases["host"] += op.instructions
        en.phases["host_cpu"] += op.instructions * t.cpu_per_instr
        en.phases["host_mem"] += op.mem_accesses * t.pdmem_per_32b
    return PerfSummary(cyc, en, t.name, rows)
