"""Lowered execution plans shared by the mapper, the executor and the perf model."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cima_array import COL_QUANTUM, ROW_QUANTUM, Mode, mode_for
from .numfmt import NumberFormat


@dataclass(frozen=True)
class HostOp:
    """Work done by the host CPU (pooling, partial-sum accumulation, ...)."""

    kind: str
    instructions: int
    mem_accesses: int
    elements: int = 0


@dataclass
class ExecutionPlan:
    """One matrix tile resident in the array plus the input vectors streamed through it.

    ``row_range`` / ``col_range`` index the layer's flattened input
    dimension and its logical outputs.  ``input_words`` is the total number
    of 32-b words streamed for all ``n_mvm`` vectors (stride reuse included).
    """

    name: str
    fmt_a: NumberFormat
    fmt_x: NumberFormat
    n_rows: int
    m_logical: int
    n_mvm: int = 1
    path: str = "adc"  # adc | abn
    full_scale: int | None = None
    lossy: bool = False
    mask_policy: str = "zeros"  # zeros | padding
    post_ops: list = field(default_factory=list)
    thresholds: object = None  # per-output ABN threshold codes
    row_range: tuple = (0, 0)
    col_range: tuple = (0, 0)
    input_words: int | None = None
    output_bits: int | None = None
    matrix_segments: int | None = None
    zero_fraction: float = 0.0
    stride_reuse: bool = False
    host_ops: list = field(default_factory=list)
    extension: bool = False
    lowered: bool = True
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.row_range == (0, 0):
            self.row_range = (0, self.n_rows)
        if self.col_range == (0, 0):
            self.col_range = (0, self.m_logical)

    @property
    def mode(self) -> Mode:
        return mode_for(self.fmt_a)

    @property
    def row_quanta(self) -> int:
        return max(1, -(-self.n_rows // ROW_QUANTUM))

    @property
    def col_quanta(self) -> int:
        return -(-(self.m_logical * self.fmt_a.width) // COL_QUANTUM)

    @property
    def n_conf(self) -> int:
        return self.row_quanta * ROW_QUANTUM

    @property
    def active_columns(self) -> int:
        return self.col_quanta * COL_QUANTUM
