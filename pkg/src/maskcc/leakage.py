"""Hamming-distance transition simulator and leakage-equivalence checks.

Observables, per executed instruction:

* ROT -- a register write leaks HW(new xor previous content of that register);
  the first write to a register leaks against its initial content (argument
  registers hold the inputs, every other register starts at zero).
* MRE -- a memory operation leaks HW(data xor previous bus data); the first
  one leaks against the constant initial bus word. Loads place the loaded
  word on the bus and then write it to a register, in that order.

Two independent implementations produce the trace: a forward machine walk
(`simulate`) and a literal backwards recursion over the instruction sequence
(`leak_trace_recursive`); tests compare them on every fixture.

Statistics are exact rationals under exhaustive enumeration of the random
inputs. Equivalence of two secret instances compares the sums of means and
of variances over all leak positions.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .bits import apply_binop, apply_unop, hw, mask
from .ir import SecurityClass
from .model import ExtendedModel, LitOperand, Solution, SolutionView

EXHAUSTIVE_BOUND = 2**20
DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 2024


class SimulationError(Exception):
    pass


# value sources: ('reg', index) | ('lit', value)
# memory refs:   ('slot', index) | ('lit', address) | ('reg', index)


@dataclass(frozen=True)
class MInstr:
    pos: int  # stable position key, unique per instruction
    opcode: str
    dest: int | None  # register index written, None for store
    srcs: tuple[tuple[str, int], ...]
    mem: tuple[str, int] | None = None  # set for load/store


@dataclass
class MachineState:
    width: int
    regs: dict[int, int] = field(default_factory=dict)
    bus: int = 0  # initial memory-bus content, a constant
    memory: dict[object, int] = field(default_factory=dict)


@dataclass(frozen=True)
class LeakObs:
    pos: int
    kind: str  # 'ROT' | 'MRE'
    value: int


@dataclass(frozen=True)
class Harness:
    """A runnable linearization plus its input/output binding."""

    instrs: tuple[MInstr, ...]
    inputs: tuple[tuple[int, SecurityClass, int], ...]  # (temp id, class, register)
    width: int
    result_reg: int | None = None

    def random_inputs(self) -> tuple[int, ...]:
        return tuple(t for t, c, _ in self.inputs if c is SecurityClass.RANDOM)

    def initial_regs(self, values: dict[int, int]) -> dict[int, int]:
        return {reg: values[t] & mask(self.width) for t, _, reg in self.inputs}


def linearize(model: ExtendedModel, sol: Solution) -> Harness:
    """Lower a complete solution to executable machine instructions."""
    prog = model.program
    v = SolutionView(model, sol)
    nregs = model.target.num_registers
    instrs: list[MInstr] = []

    def src_of(op_id: int, i: int, slot) -> tuple[str, int]:
        if isinstance(slot, LitOperand):
            return ("lit", slot.value)
        t = v.selmap[(op_id, i)]
        return ("reg", v.reg[t])

    def mem_of(op) -> tuple[str, int]:
        if op.kind in ("spill_store", "spill_load"):
            stack_t = op.defs[0] if op.kind == "spill_store" else op.operands[0].alts[0]
            return ("slot", v.reg[stack_t] - nregs)
        addr = op.mem_addr
        if isinstance(addr, LitOperand):
            return ("lit", addr.value)
        t = v.selmap[(op.id, -1)]
        return ("reg", v.reg[t])

    for op_id in sorted(v.active, key=lambda o: v.cycle[o]):
        op = prog.op(op_id)
        if op.kind in ("in", "out"):
            continue
        if op.kind == "spill_store":
            instrs.append(
                MInstr(op.id, "store", None, (src_of(op.id, 0, op.operands[0]),), mem_of(op))
            )
        elif op.kind == "spill_load":
            instrs.append(MInstr(op.id, "load", v.reg[op.defs[0]], (), mem_of(op)))
        elif op.opcode == "store":
            instrs.append(
                MInstr(op.id, "store", None, (src_of(op.id, 0, op.operands[0]),), mem_of(op))
            )
        elif op.opcode == "load":
            instrs.append(MInstr(op.id, "load", v.reg[op.defs[0]], (), mem_of(op)))
        else:
            srcs = tuple(
                src_of(op.id, i, slot) for i, slot in enumerate(op.operands)
            )
            instrs.append(MInstr(op.id, op.opcode, v.reg[op.defs[0]], srcs))

    out_op = next(o for o in prog.ops if o.kind == "out")
    first_out = v.selmap.get((out_op.id, 0))
    return Harness(
        instrs=tuple(instrs),
        inputs=tuple(
            (t.id, cls, prog.temps[t.id].input_index) for t, cls in prog.inputs
        ),
        width=prog.width,
        result_reg=v.reg.get(first_out) if first_out is not None else None,
    )


def simulate(
    instrs: tuple[MInstr, ...] | list[MInstr],
    width: int,
    regs0: dict[int, int],
    mem0: dict | None = None,
    bus0: int = 0,
) -> tuple[MachineState, list[LeakObs]]:
    """Forward machine walk emitting one observation per transition."""
    st = MachineState(width=width, regs=dict(regs0), bus=bus0 & mask(width), memory=dict(mem0 or {}))
    trace: list[LeakObs] = []

    def resolve(src: tuple[str, int]) -> int:
        kind, x = src
        if kind == "lit":
            return x & mask(width)
        return st.regs.get(x, 0)

    def memkey(ref: tuple[str, int]) -> object:
        kind, x = ref
        if kind == "slot":
            return ("slot", x)
        if kind == "lit":
            return ("abs", x)
        return ("abs", st.regs.get(x, 0))

    def write_reg(pos: int, reg: int, value: int) -> None:
        old = st.regs.get(reg, 0)
        trace.append(LeakObs(pos, "ROT", hw(value ^ old)))
        st.regs[reg] = value

    def write_bus(pos: int, value: int) -> None:
        trace.append(LeakObs(pos, "MRE", hw(value ^ st.bus)))
        st.bus = value

    for ins in instrs:
        if ins.opcode == "store":
            val = resolve(ins.srcs[0])
            write_bus(ins.pos, val)
            st.memory[memkey(ins.mem)] = val
        elif ins.opcode == "load":
            key = memkey(ins.mem)
            if key not in st.memory:
                raise SimulationError(f"read of uninitialized memory address {key}")
            val = st.memory[key]
            write_bus(ins.pos, val)
            write_reg(ins.pos, ins.dest, val)
        elif ins.opcode in ("not", "copy"):
            val = apply_unop(ins.opcode, resolve(ins.srcs[0]), width)
            write_reg(ins.pos, ins.dest, val)
        else:
            val = apply_binop(
                ins.opcode, resolve(ins.srcs[0]), resolve(ins.srcs[1]), width
            )
            write_reg(ins.pos, ins.dest, val)
    return st, trace


def leak_trace_recursive(
    instrs: tuple[MInstr, ...] | list[MInstr],
    width: int,
    regs0: dict[int, int],
    mem0: dict | None = None,
    bus0: int = 0,
) -> list[tuple[str, int]]:
    """The leakage recursion evaluated literally on the write-event sequence.

    Loads are first transformed into a bus write followed by a register
    write. The result is the (kind, observation) sequence in program order;
    it must agree with `simulate`'s trace values.
    """
    st = MachineState(width=width, regs=dict(regs0), bus=bus0 & mask(width), memory=dict(mem0 or {}))

    # forward pass only to learn each event's written value
    events: list[tuple[str, int, int]] = []  # ('reg', regindex, value) | ('mem', -1, value)

    def resolve(src):
        kind, x = src
        return x & mask(width) if kind == "lit" else st.regs.get(x, 0)

    def memkey(ref):
        kind, x = ref
        if kind == "slot":
            return ("slot", x)
        if kind == "lit":
            return ("abs", x)
        return ("abs", st.regs.get(x, 0))

    for ins in instrs:
        if ins.opcode == "store":
            val = resolve(ins.srcs[0])
            events.append(("mem", -1, val))
            st.memory[memkey(ins.mem)] = val
        elif ins.opcode == "load":
            key = memkey(ins.mem)
            if key not in st.memory:
                raise SimulationError(f"read of uninitialized memory address {key}")
            val = st.memory[key]
            events.append(("mem", -1, val))
            events.append(("reg", ins.dest, val))
            st.regs[ins.dest] = val
        else:
            if ins.opcode in ("not", "copy"):
                val = apply_unop(ins.opcode, resolve(ins.srcs[0]), width)
            else:
                val = apply_binop(
                    ins.opcode, resolve(ins.srcs[0]), resolve(ins.srcs[1]), width
                )
            events.append(("reg", ins.dest, val))
            st.regs[ins.dest] = val

    def leakage(k: int) -> list[tuple[str, int]]:
        if k == 0:
            return []
        kind, where, value = events[k - 1]
        prefix = leakage(k - 1)
        if kind == "reg":
            prev = None
            for j in range(k - 2, -1, -1):
                kj, wj, vj = events[j]
                if kj == "reg" and wj == where:
                    prev = vj
                    break
            if prev is None:
                prev = regs0.get(where, 0)
            return prefix + [("ROT", hw(value ^ prev))]
        prev = None
        for j in range(k - 2, -1, -1):
            if events[j][0] == "mem":
                prev = events[j][2]
                break
        if prev is None:
            prev = bus0 & mask(width)
        return prefix + [("MRE", hw(value ^ prev))]

    return leakage(len(events))


# -- statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class Exhaustive:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED


Sampling = Exhaustive | MonteCarlo


@dataclass
class LeakStats:
    positions: tuple[tuple[int, str], ...]
    mean: dict[tuple[int, str], Fraction]
    var: dict[tuple[int, str], Fraction]

    @property
    def sum_mean(self) -> Fraction:
        return sum(self.mean.values(), Fraction(0))

    @property
    def sum_var(self) -> Fraction:
        return sum(self.var.values(), Fraction(0))


def _random_assignments(harness: Harness, sampling: Sampling):
    rand = harness.random_inputs()
    w = harness.width
    if isinstance(sampling, Exhaustive):
        total = (1 << w) ** len(rand)
        if total > EXHAUSTIVE_BOUND:
            raise SimulationError(
                f"exhaustive enumeration of {total} assignments exceeds the bound"
            )
        for combo in itertools.product(range(1 << w), repeat=len(rand)):
            yield dict(zip(rand, combo))
    else:
        rng = random.Random(sampling.seed)
        for _ in range(sampling.samples):
            yield {t: rng.randrange(1 << w) for t in rand}


def leak_stats(
    harness: Harness, fixed: dict[int, int], sampling: Sampling = Exhaustive()
) -> LeakStats:
    """Per-position mean and variance over the random-input distribution."""
    counts = 0
    sums: dict[tuple[int, str], int] = {}
    sqs: dict[tuple[int, str], int] = {}
    order: list[tuple[int, str]] = []
    for rvals in _random_assignments(harness, sampling):
        values = dict(fixed)
        values.update(rvals)
        _, trace = simulate(
            harness.instrs, harness.width, harness.initial_regs(values)
        )
        counts += 1
        if not order:
            order = [(o.pos, o.kind) for o in trace]
        for o in trace:
            key = (o.pos, o.kind)
            sums[key] = sums.get(key, 0) + o.value
            sqs[key] = sqs.get(key, 0) + o.value * o.value
    mean = {k: Fraction(s, counts) for k, s in sums.items()}
    var = {
        k: Fraction(sqs[k], counts) - mean[k] * mean[k] for k in sums
    }
    return LeakStats(tuple(order), mean, var)


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    positions: tuple[tuple[int, str], ...] = ()
    delta_mean: Fraction = Fraction(0)
    delta_var: Fraction = Fraction(0)

    def __str__(self) -> str:
        if self.equivalent:
            return "Equivalent"
        return (
            f"Leaky(positions={list(self.positions)}, "
            f"dmean={self.delta_mean}, dvar={self.delta_var})"
        )


def check_equivalence(
    harness: Harness,
    pub: dict[int, int],
    secrets: tuple[dict[int, int], dict[int, int]],
    sampling: Sampling = Exhaustive(),
    tolerance: Fraction | float | None = None,
) -> Verdict:
    """Compare the leak distributions of two secret instances.

    Exact comparison under Exhaustive. Under MonteCarlo the default
    tolerance covers sampling noise (about four standard deviations of the
    summed-mean estimate); matched seeds keep the verdict reproducible but
    cannot make a finite sample cancel exactly.
    """
    s1, s2 = secrets
    st1 = leak_stats(harness, {**pub, **s1}, sampling)
    st2 = leak_stats(harness, {**pub, **s2}, sampling)
    if tolerance is None:
        tolerance = Fraction(0)
        if isinstance(sampling, MonteCarlo):
            positions = max(1, len(st1.positions))
            # per-position HW variance is at most width/4
            sigma_sq = Fraction(positions * harness.width, 2 * sampling.samples)
            tolerance = 4 * Fraction(int(float(sigma_sq) ** 0.5 * 10**9), 10**9)
    dmean = st1.sum_mean - st2.sum_mean
    dvar = st1.sum_var - st2.sum_var
    if abs(dmean) <= tolerance and abs(dvar) <= tolerance:
        return Verdict(True)
    bad = tuple(
        k
        for k in st1.positions
        if abs(st1.mean[k] - st2.mean[k]) > tolerance
        or abs(st1.var[k] - st2.var[k]) > tolerance
    )
    return Verdict(False, bad, dmean, dvar)


def exhaustive_ok(harness: Harness) -> bool:
    total = (1 << harness.width) ** len(harness.random_inputs())
    return total <= EXHAUSTIVE_BOUND
