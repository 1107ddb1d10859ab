"""Combinatorial backend model: copies, decision variables, constraints.

Elaboration mirrors the backend's view of a program: the bracketing in/out
pseudo-ops become operations, every value gets one optional register copy
(inserted right after the input block or right after the defining operation),
and, under the full copy budget, one optional spill pair (store to a stack
slot plus reload) appended after the visible operations. Operands select
among equal-valued temporaries.

A Solution fixes activeness, issue cycles, registers and operand selections.
Cycles are canonical: every solution's schedule is the compaction of its
issue order (each active operation issues at the earliest cycle after its
predecessor that satisfies the selected data dependencies). Security
predicates depend only on the order, so the canonical space preserves both
the optimum and the set of reachable leakage behaviours, and it is finite,
which keeps exhaustive enumeration meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ir import Literal, Program, SecurityClass, Temp
from .target import TargetDesc
from . import typeinf
from .typeinf import TypeEnv


class ModelBuildError(Exception):
    pass


@dataclass(frozen=True)
class TempOperand:
    """Operand slot selecting among equal-valued temps (tuple order = branch order)."""

    alts: tuple[int, ...]


@dataclass(frozen=True)
class LitOperand:
    value: int


OperandSlot = TempOperand | LitOperand


@dataclass(frozen=True)
class ModelTemp:
    id: int
    rep: int  # id of the original temp carrying this value
    kind: str  # 'reg' | 'stack'
    defined_by: int  # op id
    input_index: int | None = None

    @property
    def is_input(self) -> bool:
        return self.input_index is not None

    def __str__(self) -> str:
        return f"t{self.id}"


@dataclass(frozen=True)
class ModelOp:
    id: int  # 1-based; printed as o<id>
    kind: str  # in|out|body|copy|spill_store|spill_load
    opcode: str
    defs: tuple[int, ...]
    operands: tuple[OperandSlot, ...]
    mandatory: bool
    is_memory: bool = False
    src_op: int | None = None  # originating source-IR operation id
    mem_addr: OperandSlot | None = None  # address slot for source load/store

    def __str__(self) -> str:
        return f"o{self.id}"


class _OpView:
    """IrOperation-shaped adapter so typeinf can walk elaborated programs."""

    __slots__ = ("id", "opcode", "uses", "defs")

    def __init__(self, id, opcode, uses, defs):
        self.id = id
        self.opcode = opcode
        self.uses = uses
        self.defs = defs


@dataclass
class ElabProgram:
    source: Program
    name: str
    width: int
    inputs: tuple[tuple[Temp, SecurityClass], ...]
    ops: tuple[ModelOp, ...]
    temps: dict[int, ModelTemp]
    classes: dict[int, tuple[int, ...]]  # rep -> register-allocatable members
    out_temps: tuple[int, ...]  # report-only, defined by the out op
    mem_candidates: tuple[int, ...]  # op ids treated as potential memory ops
    tm: dict[int, int]  # memory candidate op id -> data temp id
    copy_budget: str
    src2elab: dict[int, int]
    mem_deps: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def operations(self):
        """Expression-building view: copies/spills transparent, loads tracked."""
        views = []
        for op in self.ops:
            if op.kind == "in":
                views.append(_OpView(op.id, "in", (), None))
            elif op.kind in ("copy", "spill_store", "spill_load"):
                src = op.operands[0].alts[0]
                views.append(_OpView(op.id, "copy", (Temp(src),), Temp(op.defs[0])))
            elif op.kind == "out":
                for slot, dt in zip(op.operands, op.defs):
                    views.append(_OpView(op.id, "out", (Temp(slot.alts[0]),), Temp(dt)))
            else:  # body
                views.append(self._body_view(op))
        return tuple(views)

    def _body_view(self, op: ModelOp) -> _OpView:
        def slot_use(slot: OperandSlot):
            if isinstance(slot, LitOperand):
                return Literal(slot.value)
            return Temp(slot.alts[0])

        if op.opcode == "store":
            return _OpView(
                op.id, "store", (slot_use(op.mem_addr), slot_use(op.operands[0])), None
            )
        if op.opcode == "load":
            return _OpView(op.id, "load", (slot_use(op.mem_addr),), Temp(op.defs[0]))
        uses = tuple(slot_use(s) for s in op.operands)
        return _OpView(op.id, op.opcode, uses, Temp(op.defs[0]))

    def op(self, op_id: int) -> ModelOp:
        return self.ops[op_id - 1]

    def reg_temps(self) -> list[int]:
        return sorted(t for t, mt in self.temps.items() if mt.kind == "reg")

    def visible_temps(self) -> list[int]:
        """Temps shown in analysis reports: everything except spill plumbing."""
        vis = [t.id for t, _ in self.inputs]
        for op in self.ops:
            if op.kind in ("body", "copy", "out"):
                vis.extend(op.defs)
        return sorted(vis)


def elaborate(p: Program, copy_budget: str = "full") -> ElabProgram:
    """Insert optional copies (and spill pairs) and renumber temps densely.

    copy_budget: 'none' (no optional ops), 'reg' (register copies only),
    'full' (register copies plus one spill store/load pair per value).
    """
    if copy_budget not in ("none", "reg", "full"):
        raise ModelBuildError(f"bad copy budget {copy_budget!r}")
    ops: list[ModelOp] = []
    temps: dict[int, ModelTemp] = {}
    classes: dict[int, list[int]] = {}
    src2elab: dict[int, int] = {}
    tm: dict[int, int] = {}
    mem_candidates: list[int] = []
    next_temp = 0
    next_op = 1

    def new_temp(rep, kind, op_id, input_index=None):
        nonlocal next_temp
        t = ModelTemp(next_temp, rep, kind, op_id, input_index)
        temps[t.id] = t
        next_temp += 1
        return t.id

    def add_copy(src_id: int) -> None:
        nonlocal next_op
        if copy_budget == "none":
            return
        cid = new_temp(temps[src_id].rep, "reg", next_op)
        ops.append(
            ModelOp(next_op, "copy", "copy", (cid,), (TempOperand((src_id,)),), False)
        )
        classes[temps[src_id].rep].append(cid)
        tm[next_op] = cid
        mem_candidates.append(next_op)
        next_op += 1

    # in op
    in_defs = []
    elab_inputs = []
    for i, (t, cls) in enumerate(p.inputs):
        tid = new_temp(None, "reg", 1, input_index=i)
        temps[tid] = replace(temps[tid], rep=tid)
        classes[tid] = [tid]
        src2elab[t.id] = tid
        in_defs.append(tid)
        elab_inputs.append((Temp(tid), cls))
    ops.append(ModelOp(1, "in", "in", tuple(in_defs), (), True))
    next_op = 2
    for tid in in_defs:
        add_copy(tid)

    def alts_of(src_temp: Temp) -> tuple[int, ...]:
        rep = src2elab[src_temp.id]
        return tuple(classes[rep])

    def slot_of(u) -> OperandSlot:
        if isinstance(u, Literal):
            return LitOperand(u.value)
        return TempOperand(alts_of(u))

    # body ops, each def followed by its optional copy
    src_memops: list[tuple[int, bool, object]] = []  # (op id, is_store, addr key)

    def addr_key(u) -> object:
        return ("lit", u.value) if isinstance(u, Literal) else ("any",)

    for sop in p.body:
        if sop.opcode == "store":
            op = ModelOp(
                next_op,
                "body",
                "store",
                (),
                (slot_of(sop.uses[1]),),
                True,
                is_memory=True,
                src_op=sop.id,
                mem_addr=slot_of(sop.uses[0]),
            )
            ops.append(op)
            tm[next_op] = op.operands[0].alts[0]
            mem_candidates.append(next_op)
            src_memops.append((next_op, True, addr_key(sop.uses[0])))
            next_op += 1
            continue
        if sop.opcode == "load":
            did = new_temp(None, "reg", next_op)
            temps[did] = replace(temps[did], rep=did)
            classes[did] = [did]
            src2elab[sop.defs.id] = did
            op = ModelOp(
                next_op,
                "body",
                "load",
                (did,),
                (),
                True,
                is_memory=True,
                src_op=sop.id,
                mem_addr=slot_of(sop.uses[0]),
            )
            ops.append(op)
            tm[next_op] = did
            mem_candidates.append(next_op)
            src_memops.append((next_op, False, addr_key(sop.uses[0])))
            next_op += 1
            add_copy(did)
            continue
        did = new_temp(None, "reg", next_op)
        temps[did] = replace(temps[did], rep=did)
        classes[did] = [did]
        src2elab[sop.defs.id] = did
        ops.append(
            ModelOp(
                next_op,
                "body",
                sop.opcode,
                (did,),
                tuple(slot_of(u) for u in sop.uses),
                True,
                src_op=sop.id,
            )
        )
        next_op += 1
        add_copy(did)

    # out op defines one report-only temp per output
    out_defs = []
    out_slots = []
    for t in p.outputs:
        out_slots.append(TempOperand(alts_of(t)))
        oid = new_temp(src2elab[t.id], "reg", next_op)
        out_defs.append(oid)
    out_op_id = next_op
    ops.append(
        ModelOp(out_op_id, "out", "out", tuple(out_defs), tuple(out_slots), True)
    )
    next_op += 1
    out_temps = tuple(out_defs)
    for oid in out_defs:
        del temps[oid]  # report-only; re-added below as pseudo entries
    # keep out temps known but not register-allocatable
    pseudo_out = {
        oid: ModelTemp(oid, src2elab[t.id], "out", out_op_id)
        for oid, t in zip(out_defs, p.outputs)
    }

    # spill pairs per value class, appended after the visible program
    if copy_budget == "full":
        for rep in sorted(classes):
            orig = rep
            sid = new_temp(rep, "stack", next_op)
            ops.append(
                ModelOp(
                    next_op,
                    "spill_store",
                    "store",
                    (sid,),
                    (TempOperand((orig,)),),
                    False,
                    is_memory=True,
                )
            )
            store_id = next_op
            next_op += 1
            lid = new_temp(rep, "reg", next_op)
            ops.append(
                ModelOp(
                    next_op,
                    "spill_load",
                    "load",
                    (lid,),
                    (TempOperand((sid,)),),
                    False,
                    is_memory=True,
                )
            )
            next_op += 1
            classes[rep].append(lid)
            tm[store_id] = sid
            tm[store_id + 1] = lid

    # widen operand alternatives now that classes are complete
    final_ops = []
    for op in ops:
        if op.kind in ("body", "out"):
            new_slots = tuple(
                TempOperand(tuple(classes[temps[s.alts[0]].rep]))
                if isinstance(s, TempOperand)
                else s
                for s in op.operands
            )
            new_addr = op.mem_addr
            if isinstance(new_addr, TempOperand):
                new_addr = TempOperand(tuple(classes[temps[new_addr.alts[0]].rep]))
            final_ops.append(replace(op, operands=new_slots, mem_addr=new_addr))
        else:
            final_ops.append(op)

    # program-order dependencies between aliasing source memory operations
    mem_deps: dict[int, tuple[int, ...]] = {}
    for i, (o2, st2, a2) in enumerate(src_memops):
        deps = []
        for o1, st1, a1 in src_memops[:i]:
            alias = a1 == ("any",) or a2 == ("any",) or a1 == a2
            if alias and (st1 or st2):
                deps.append(o1)
        if deps:
            mem_deps[o2] = tuple(deps)

    all_temps = dict(temps)
    all_temps.update(pseudo_out)
    return ElabProgram(
        source=p,
        name=p.name,
        width=p.width,
        inputs=tuple(elab_inputs),
        ops=tuple(final_ops),
        temps=all_temps,
        classes={r: tuple(ms) for r, ms in classes.items()},
        out_temps=out_temps,
        mem_candidates=tuple(mem_candidates),
        tm=tm,
        copy_budget=copy_budget,
        src2elab=src2elab,
        mem_deps=mem_deps,
    )


# -- decision variables, constraints, the extended model -----------------------


@dataclass(frozen=True)
class Constraint:
    family: str  # e.g. 'data-dep', 'rpairs', ...
    kind: str  # 'base' | 'security' | 'implied'
    args: tuple = ()

    def describe(self) -> str:
        return f"{self.family}{list(self.args)}"


@dataclass
class DecisionVars:
    maxc: int
    a_dom: dict[int, tuple[bool, ...]]  # op -> allowed activeness
    c_dom: dict[int, tuple[int, int]]  # op -> cycle bounds
    r_dom: dict[int, tuple[int, ...]]  # temp -> allowed locations
    y_dom: dict[tuple[int, int], tuple[int, ...]]  # (op, slot) -> alternatives


@dataclass
class ExtendedModel:
    program: ElabProgram
    target: TargetDesc
    env: TypeEnv
    vars: DecisionVars
    constraints: tuple[Constraint, ...]
    objective: str = "makespan"
    sets: object = None  # SecuritySets once security constraints are added
    pins: tuple[tuple[int, int], ...] = ()  # forced (temp, location) pairs

    @property
    def secure(self) -> bool:
        return any(c.kind == "security" for c in self.constraints)

    def with_constraints(self, extra, sets=None) -> "ExtendedModel":
        return ExtendedModel(
            program=self.program,
            target=self.target,
            env=self.env,
            vars=self.vars,
            constraints=self.constraints + tuple(extra),
            objective=self.objective,
            sets=sets if sets is not None else self.sets,
            pins=self.pins,
        )

    def with_pins(self, pins: dict[int, int]) -> "ExtendedModel":
        return ExtendedModel(
            program=self.program,
            target=self.target,
            env=self.env,
            vars=self.vars,
            constraints=self.constraints,
            objective=self.objective,
            sets=self.sets,
            pins=self.pins + tuple(sorted(pins.items())),
        )

    def latency(self, op: ModelOp) -> int:
        if op.kind == "in":
            return 1
        if op.kind == "out":
            return 0
        return self.target.latency(op.opcode)

    def two_address(self, op: ModelOp) -> bool:
        return op.kind == "body" and self.target.two_address(op.opcode)


def _capacity_check(prog: ElabProgram, target: TargetDesc) -> None:
    """Reject programs whose mandatory pressure cannot fit registers + slots."""
    capacity = target.num_registers + target.stack_slots
    mandatory = [op for op in prog.ops if op.mandatory]
    last_use: dict[int, int] = {}
    for op in mandatory:
        for slot in op.operands:
            if isinstance(slot, TempOperand):
                last_use[prog.temps[slot.alts[0]].rep] = op.id
        if isinstance(op.mem_addr, TempOperand):
            last_use[prog.temps[op.mem_addr.alts[0]].rep] = op.id
    live = 0
    peak = 0
    events: dict[int, int] = {}
    for op in mandatory:
        for d in op.defs:
            if op.kind == "out":
                continue
            live += 1
            end = last_use.get(prog.temps[d].rep)
            if end is not None:
                events[end] = events.get(end, 0) + 1
        peak = max(peak, live)
        live -= events.get(op.id, 0)
    if peak > capacity:
        raise ModelBuildError(
            f"program needs {peak} simultaneously live values; "
            f"target provides {capacity} (registers + stack slots)"
        )


def build_base_model(
    p: Program, target: TargetDesc, copy_budget: str = "full"
) -> ExtendedModel:
    """Backend model with base constraints only (no security)."""
    prog = elaborate(p, copy_budget)
    if len(p.inputs) > len(target.args):
        raise ModelBuildError(
            f"{len(p.inputs)} inputs exceed {len(target.args)} argument registers"
        )
    _capacity_check(prog, target)
    env = typeinf.infer_types(prog)

    maxc = sum(
        (1 if op.kind == "in" else 0 if op.kind == "out" else target.latency(op.opcode))
        for op in prog.ops
    ) + len(prog.ops) + 1
    nregs = target.num_registers
    a_dom = {
        op.id: ((True,) if op.mandatory else (False, True)) for op in prog.ops
    }
    c_dom = {op.id: ((0, 0) if op.kind == "in" else (1, maxc)) for op in prog.ops}
    r_dom: dict[int, tuple[int, ...]] = {}
    for tid, mt in prog.temps.items():
        if mt.kind == "reg":
            if mt.is_input:
                r_dom[tid] = (mt.input_index,)  # argument register preassignment
            else:
                r_dom[tid] = tuple(range(nregs))
        elif mt.kind == "stack":
            r_dom[tid] = tuple(range(nregs, nregs + target.stack_slots))
    y_dom = {}
    for op in prog.ops:
        for i, slot in enumerate(op.operands):
            if isinstance(slot, TempOperand):
                y_dom[(op.id, i)] = slot.alts
        if isinstance(op.mem_addr, TempOperand):
            y_dom[(op.id, -1)] = op.mem_addr.alts

    cons: list[Constraint] = [
        Constraint("data-dep", "base"),
        Constraint("single-issue", "base"),
        Constraint("in-first-out-last", "base"),
        Constraint("no-overlap", "base"),
        Constraint("live-range", "base"),
    ]
    for op in prog.ops:
        if op.kind == "spill_load":
            cons.append(Constraint("spill-chain", "base", (op.id - 1, op.id)))
        if op.kind == "body" and target.two_address(op.opcode):
            cons.append(Constraint("two-address", "base", (op.id,)))
    for o2, deps in sorted(prog.mem_deps.items()):
        for o1 in deps:
            cons.append(Constraint("mem-order", "base", (o1, o2)))
    for tid, mt in prog.temps.items():
        if mt.kind == "reg" and mt.is_input:
            cons.append(Constraint("preassign-arg", "base", (tid, mt.input_index)))
    result_index = target.registers.index(target.result)
    cons.append(Constraint("preassign-result", "base", (result_index,)))

    return ExtendedModel(
        program=prog,
        target=target,
        env=env,
        vars=DecisionVars(maxc, a_dom, c_dom, r_dom, y_dom),
        constraints=tuple(cons),
    )


def add_security_constraints(m: ExtendedModel, sets) -> ExtendedModel:
    """Extend the model with the transition-leak prohibitions.

    The pair sets are class-level underneath; here they are expanded over all
    register-allocatable members of each value class, so spill reloads are
    constrained exactly like the temps they duplicate.
    """
    prog = m.program
    cons: list[Constraint] = []
    members = {rep: [t for t in ms if prog.temps[t].kind == "reg"]
               for rep, ms in prog.classes.items()}

    def non_input_members(rep):
        return [t for t in members[rep] if not prog.temps[t].is_input]

    seen = set()
    for ra, rb in sorted(sets.class_rpairs):
        for t1 in members[ra]:
            for t2 in members[rb]:
                if t1 == t2:
                    continue
                key = (min(t1, t2), max(t1, t2))
                if key not in seen:
                    seen.add(key)
                    cons.append(Constraint("rpairs", "security", key))
    for key_rep in sorted(sets.class_spairs):
        hiders = tuple(
            sorted(t for hr in sets.class_spairs[key_rep] for t in non_input_members(hr))
        )
        for ts in non_input_members(key_rep):
            cons.append(Constraint("spairs", "security", (ts, hiders)))
    for ts, bad_reps in sorted(sets.sec_input_bad.items()):
        bad = tuple(
            sorted(t for br in bad_reps for t in members[br] if t != ts)
        )
        if bad:
            cons.append(Constraint("sec-input-guard", "security", (ts, bad)))

    mem_ops = [op for op in prog.ops if op.is_memory]
    data_class = {op.id: prog.temps[prog.tm[op.id]].rep for op in mem_ops}
    mm = set(map(tuple, map(sorted, sets.class_mmpairs)))
    for i, o1 in enumerate(mem_ops):
        for o2 in mem_ops[i + 1 :]:
            pair = tuple(sorted((data_class[o1.id], data_class[o2.id])))
            if pair in mm and o1.id != o2.id:
                cons.append(Constraint("mmpairs", "security", (o1.id, o2.id)))
    for op in mem_ops:
        dc = data_class[op.id]
        if dc in sets.class_mspairs:
            hider_classes = set(sets.class_mspairs[dc])
            hiders = tuple(
                sorted(o.id for o in mem_ops if data_class[o.id] in hider_classes)
            )
            cons.append(Constraint("mspairs", "security", (op.id, hiders)))
    return m.with_constraints(cons, sets=sets)


def add_implied_constraints(m: ExtendedModel, sets) -> ExtendedModel:
    """Constraints logically implied by the security families (solver hints)."""
    prog = m.program
    cons: list[Constraint] = []
    rpair_set = {
        tuple(sorted(c.args)) for c in m.constraints if c.family == "rpairs"
    }
    # result-overwrites-operand: when an operation's source selection and its
    # definition form an rpair, they can never share a register (the selected
    # source is still held at issue, so sharing forces the banned transition)
    for op in prog.ops:
        if op.kind not in ("body", "copy"):
            continue
        for d in op.defs:
            if prog.temps[d].kind != "reg":
                continue
            for i, slot in enumerate(op.operands):
                if not isinstance(slot, TempOperand):
                    continue
                for s in slot.alts:
                    if prog.temps[s].kind != "reg":
                        continue
                    if tuple(sorted((d, s))) in rpair_set:
                        cons.append(
                            Constraint(
                                "implied-accumulator", "implied", (op.id, i, d, s)
                            )
                        )
    # preassigned rpair members sharing a register need an interposer each
    preassigned = {t for t, mt in prog.temps.items() if mt.kind == "reg" and mt.is_input}
    for c in sorted(rpair_set):
        t1, t2 = c
        if t1 in preassigned and t2 in preassigned:
            cons.append(Constraint("implied-preassign", "implied", (t1, t2)))
    return m.with_constraints(cons)


# -- solutions and derived predicates ------------------------------------------


@dataclass(frozen=True)
class Solution:
    active: frozenset[int]
    cycles: tuple[tuple[int, int], ...]
    regs: tuple[tuple[int, int], ...]
    sels: tuple[tuple[tuple[int, int], int], ...]
    objective: int

    def cycle_of(self, op_id: int) -> int | None:
        return dict(self.cycles).get(op_id)

    def reg_of(self, t: int) -> int | None:
        return dict(self.regs).get(t)

    def sel(self, op_id: int, slot: int) -> int | None:
        return dict(self.sels).get((op_id, slot))

    def sort_key(self):
        return (self.objective, tuple(sorted(self.active)), self.cycles, self.regs, self.sels)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "active": sorted(self.active),
            "cycles": {f"o{o}": c for o, c in self.cycles},
            "regs": {f"t{t}": r for t, r in self.regs},
            "selections": {f"o{o}[{i}]": f"t{t}" for (o, i), t in self.sels},
        }


def make_solution(model, active, cycles, regs, sels) -> Solution:
    out_id = next(op.id for op in model.program.ops if op.kind == "out")
    objective = dict(cycles)[out_id]
    return Solution(
        active=frozenset(active),
        cycles=tuple(sorted(dict(cycles).items())),
        regs=tuple(sorted(dict(regs).items())),
        sels=tuple(sorted(dict(sels).items())),
        objective=objective,
    )


class SolutionView:
    """Derived values (liveness, ranges, predicates) for one complete solution."""

    def __init__(self, model: ExtendedModel, sol: Solution):
        self.model = model
        self.prog = model.program
        self.sol = sol
        self.cycle = dict(sol.cycles)
        self.reg = dict(sol.regs)
        self.selmap = dict(sol.sels)
        self._derive()

    def _derive(self):
        prog = self.prog
        self.active = set(self.sol.active)
        self.live: set[int] = set()
        self.ls: dict[int, int] = {}
        self.le: dict[int, int] = {}
        readers: dict[int, list[int]] = {}
        for op in prog.ops:
            if op.id not in self.active:
                continue
            for i, slot in enumerate(op.operands):
                if isinstance(slot, TempOperand):
                    t = self.selmap.get((op.id, i), slot.alts[0])
                    readers.setdefault(t, []).append(op.id)
            if isinstance(op.mem_addr, TempOperand):
                t = self.selmap.get((op.id, -1), op.mem_addr.alts[0])
                readers.setdefault(t, []).append(op.id)
        for tid, mt in prog.temps.items():
            if mt.kind == "out":
                continue
            if mt.defined_by in self.active:
                self.live.add(tid)
                start = self.cycle[mt.defined_by]
                self.ls[tid] = start
                use_cycles = [
                    self.cycle[o]
                    for o in readers.get(tid, [])
                    if self.prog.op(o).kind != "out"
                ]
                out_users = [
                    self.cycle[o]
                    for o in readers.get(tid, [])
                    if self.prog.op(o).kind == "out"
                ]
                self.le[tid] = max(use_cycles + out_users + [start + 1])

    # -- predicates ------------------------------------------------------

    def is_live(self, t: int) -> bool:
        return t in self.live

    def samereg(self, t1: int, t2: int) -> bool:
        return (
            t1 in self.live
            and t2 in self.live
            and self.reg.get(t1) is not None
            and self.reg.get(t1) == self.reg.get(t2)
        )

    def is_before(self, t1: int, t2: int) -> bool:
        return self.samereg(t1, t2) and self.le[t1] <= self.ls[t2]

    def lk(self, t: int) -> int:
        if t not in self.live:
            return -1
        best = -1
        for t2 in self.live:
            if t2 != t and self.is_before(t2, t):
                best = max(best, self.le[t2])
        return best

    def subseq(self, t1: int, t2: int) -> bool:
        if t1 == t2:
            return False
        return self.samereg(t1, t2) and self.lk(t2) == self.le[t1]

    def mem_ops_active(self) -> list[int]:
        return sorted(
            (o for o in self.active if self.prog.op(o).is_memory),
            key=lambda o: self.cycle[o],
        )

    def is_before_mem(self, o1: int, o2: int) -> bool:
        return (
            o1 != o2
            and o1 in self.active
            and o2 in self.active
            and self.prog.op(o1).is_memory
            and self.prog.op(o2).is_memory
            and self.cycle[o1] <= self.cycle[o2]
        )

    def ok(self, o: int) -> int:
        if o not in self.active or not self.prog.op(o).is_memory:
            return -1
        best = -1
        for o2 in self.active:
            if self.prog.op(o2).is_memory and self.is_before_mem(o2, o):
                best = max(best, self.cycle[o2])
        return best

    def msubseq(self, o1: int, o2: int) -> bool:
        if o1 == o2:
            return False
        return (
            o1 in self.active
            and o2 in self.active
            and self.prog.op(o1).is_memory
            and self.prog.op(o2).is_memory
            and self.ok(o2) == self.cycle[o1]
        )

    def subseq_pairs(self) -> set[tuple[int, int]]:
        """All (t1, t2) register-temp pairs with subseq true."""
        regs = [t for t in self.live if self.prog.temps[t].kind == "reg"]
        return {
            (t1, t2)
            for t1 in regs
            for t2 in regs
            if t1 != t2 and self.subseq(t1, t2)
        }

    def msubseq_pairs(self) -> set[tuple[int, int]]:
        mems = self.mem_ops_active()
        return {
            (o1, o2)
            for o1 in mems
            for o2 in mems
            if o1 != o2 and self.msubseq(o1, o2)
        }


def samereg(model, sol, t1, t2) -> bool:
    return SolutionView(model, sol).samereg(t1, t2)


def is_before(model, sol, t1, t2) -> bool:
    return SolutionView(model, sol).is_before(t1, t2)


def lk(model, sol, t) -> int:
    return SolutionView(model, sol).lk(t)


def ok(model, sol, o) -> int:
    return SolutionView(model, sol).ok(o)


def subseq(model, sol, t1, t2) -> bool:
    return SolutionView(model, sol).subseq(t1, t2)


def msubseq(model, sol, o1, o2) -> bool:
    return SolutionView(model, sol).msubseq(o1, o2)


def check_solution(model: ExtendedModel, sol: Solution) -> list[str]:
    """Re-evaluate every model constraint on a complete assignment.

    Returns human-readable violations; empty means the solution satisfies the
    model. This is the solver-independent admissibility check.
    """
    v = SolutionView(model, sol)
    prog = model.program
    errs: list[str] = []
    active_ops = [prog.op(o) for o in sorted(v.active)]

    for op in prog.ops:
        if op.mandatory and op.id not in v.active:
            errs.append(f"mandatory {op} inactive")

    # cycles: in at 0, distinct, out last
    cycles = [(v.cycle[o.id], o.id) for o in active_ops]
    if len({c for c, _ in cycles}) != len(cycles):
        errs.append("single-issue violated (duplicate cycles)")
    in_op = next(o for o in prog.ops if o.kind == "in")
    out_op = next(o for o in prog.ops if o.kind == "out")
    if v.cycle.get(in_op.id) != 0:
        errs.append("in not at cycle 0")
    if any(
        v.cycle[o.id] >= v.cycle[out_op.id] for o in active_ops if o.id != out_op.id
    ):
        errs.append("out not last")
    if sol.objective != v.cycle[out_op.id]:
        errs.append("objective != makespan")

    # data dependencies over selected temps
    for op in active_ops:
        slots = list(enumerate(op.operands))
        if isinstance(op.mem_addr, TempOperand):
            slots.append((-1, op.mem_addr))
        for i, slot in slots:
            if not isinstance(slot, TempOperand):
                continue
            t = v.selmap.get((op.id, i))
            if t is None:
                errs.append(f"{op} slot {i} unselected")
                continue
            if t not in slot.alts:
                errs.append(f"{op} slot {i} selected non-alternative t{t}")
                continue
            mt = prog.temps[t]
            if mt.defined_by not in v.active:
                errs.append(f"{op} reads t{t} whose definer is inactive")
                continue
            if op.kind == "out":
                continue
            def_op = prog.op(mt.defined_by)
            if mt.defined_by == op.id:
                errs.append(f"{op} reads its own def")
            elif v.cycle[def_op.id] + model.latency(def_op) > v.cycle[op.id]:
                errs.append(f"{op} issues before t{t} is ready")

    # registers assigned and in-domain for live temps
    for t in v.live:
        mt = prog.temps[t]
        if mt.kind == "out":
            continue
        r = v.reg.get(t)
        if r is None:
            errs.append(f"live t{t} has no location")
            continue
        if r not in model.vars.r_dom[t]:
            errs.append(f"t{t} location {r} outside domain")

    # no-overlap per location
    by_loc: dict[int, list[int]] = {}
    for t in v.live:
        if prog.temps[t].kind == "out":
            continue
        by_loc.setdefault(v.reg[t], []).append(t)
    for loc, ts in by_loc.items():
        for i, t1 in enumerate(ts):
            for t2 in ts[i + 1 :]:
                if not (v.ls[t1] >= v.le[t2] or v.ls[t2] >= v.le[t1]):
                    errs.append(f"live ranges of t{t1} and t{t2} overlap in loc {loc}")

    # live-range strictness
    for t in v.live:
        if not v.le[t] > v.ls[t]:
            errs.append(f"le(t{t}) not strictly after ls")

    for c in model.constraints:
        errs.extend(_check_constraint(model, v, c))

    for t, r in model.pins:
        if v.reg.get(t) != r:
            errs.append(f"pin t{t}={r} violated")
    return errs


def _check_constraint(model: ExtendedModel, v: SolutionView, c: Constraint) -> list[str]:
    prog = model.program
    errs = []
    if c.family == "spill-chain":
        store, load = c.args
        if load in v.active:
            if store not in v.active:
                errs.append(f"spill load o{load} without its store")
            elif v.cycle[store] + model.latency(prog.op(store)) > v.cycle[load]:
                errs.append(f"spill load o{load} before store data ready")
    elif c.family == "mem-order":
        o1, o2 = c.args
        if o1 in v.active and o2 in v.active and v.cycle[o1] >= v.cycle[o2]:
            errs.append(f"memory order violated: o{o1} must precede o{o2}")
    elif c.family == "two-address":
        (op_id,) = c.args
        if op_id in v.active:
            op = prog.op(op_id)
            src_regs = [
                v.reg[v.selmap[(op_id, i)]]
                for i, slot in enumerate(op.operands)
                if isinstance(slot, TempOperand)
            ]
            d = op.defs[0]
            if src_regs and v.reg[d] not in src_regs:
                errs.append(f"two-address {op} writes outside its source registers")
    elif c.family == "preassign-arg":
        t, reg = c.args
        if t in v.live and v.reg.get(t) != reg:
            errs.append(f"input t{t} not in argument register {reg}")
    elif c.family == "preassign-result":
        (result_reg,) = c.args
        out_op = next(o for o in prog.ops if o.kind == "out")
        first = v.selmap.get((out_op.id, 0))
        if first is not None and v.reg.get(first) != result_reg:
            errs.append("first output not in result register")
    elif c.family == "rpairs":
        t1, t2 = c.args
        if v.subseq(t1, t2) or v.subseq(t2, t1):
            errs.append(f"rpairs violated for (t{t1}, t{t2})")
    elif c.family == "spairs":
        ts, hiders = c.args
        if v.is_live(ts):
            if not any(v.is_live(h) and v.subseq(h, ts) for h in hiders):
                errs.append(f"spairs: no hider precedes t{ts}")
            if not any(v.is_live(h) and v.subseq(ts, h) for h in hiders):
                errs.append(f"spairs: no hider follows t{ts}")
    elif c.family == "sec-input-guard":
        ts, bad = c.args
        for b in bad:
            if v.subseq(ts, b):
                errs.append(f"secret input t{ts} overwritten by leaking t{b}")
    elif c.family == "mmpairs":
        o1, o2 = c.args
        if o1 in v.active and o2 in v.active:
            if v.msubseq(o1, o2) or v.msubseq(o2, o1):
                errs.append(f"mmpairs violated for (o{o1}, o{o2})")
    elif c.family == "mspairs":
        os_, hiders = c.args
        if os_ in v.active:
            if not any(h in v.active and v.msubseq(h, os_) for h in hiders):
                errs.append(f"mspairs: no random memory op precedes o{os_}")
            if not any(h in v.active and v.msubseq(os_, h) for h in hiders):
                errs.append(f"mspairs: no random memory op follows o{os_}")
    elif c.family == "implied-accumulator":
        op_id, slot, d, s = c.args
        if op_id in v.active and v.selmap.get((op_id, slot)) == s and v.samereg(d, s):
            errs.append(f"implied-accumulator: t{d}, t{s} share a register")
    elif c.family == "implied-preassign":
        t1, t2 = c.args
        if v.samereg(t1, t2):
            for t in (t1, t2):
                if not any(
                    v.subseq(t, x) or v.subseq(x, t)
                    for x in v.live
                    if x != t and prog.temps[x].kind == "reg"
                ):
                    errs.append(f"implied-preassign: t{t} has no register neighbour")
    return errs


def dump_model(model: ExtendedModel) -> dict:
    """Constraint-graph JSON for external inspection."""
    prog = model.program
    return {
        "program": prog.name,
        "target": model.target.name,
        "objective": model.objective,
        "maxc": model.vars.maxc,
        "operations": [
            {
                "id": f"o{op.id}",
                "kind": op.kind,
                "opcode": op.opcode,
                "defs": [f"t{d}" for d in op.defs],
                "operands": [
                    {"alts": [f"t{t}" for t in s.alts]}
                    if isinstance(s, TempOperand)
                    else {"literal": s.value}
                    for s in op.operands
                ],
                "mandatory": op.mandatory,
                "memory": op.is_memory,
            }
            for op in prog.ops
        ],
        "temps": [
            {
                "id": f"t{t}",
                "class": f"t{mt.rep}",
                "kind": mt.kind,
                "locations": list(model.vars.r_dom.get(t, ())),
            }
            for t, mt in sorted(prog.temps.items())
        ],
        "constraints": [
            {"family": c.family, "kind": c.kind, "args": list(c.args)}
            for c in model.constraints
        ],
    }
