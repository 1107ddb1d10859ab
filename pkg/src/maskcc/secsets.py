"""The four pair sets that parameterize the secure backend constraints.

All pair classification runs the base (conservative) inference on the xor of
the two expressions. Copies share expressions, so pairs are really relations
between value classes; the visible sets are the expansion over the temps an
analysis report shows, and the class-level relations drive the constraint
expansion over every register-allocatable member (including spill reloads).

Membership rules, over register temps:

* rpairs: both members Random/Public, their xor classifies Secret. Unordered,
  no self pairs.
* spairs: keyed by Secret temps that an instruction writes (input temps are
  live on entry, never written, and nothing can precede them, so they are
  not keys); the hider set holds Random non-input temps whose xor with the
  key stays Random.
* mmpairs / mspairs: the same relations over the data temps of potential
  memory operations (source loads/stores plus every optional copy, which a
  solution may turn into a spill).

Secret *input* temps get a separate guard relation: any temp whose xor with
the input classifies Secret must never immediately overwrite it.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .ir import SecurityClass
from .model import ElabProgram
from .typeinf import Binary, TypeEnv

R, P, S = SecurityClass.RANDOM, SecurityClass.PUBLIC, SecurityClass.SECRET


@dataclass(frozen=True)
class SecuritySets:
    rpairs: frozenset[tuple[int, int]]  # unordered visible temp pairs (lo, hi)
    spairs: dict[int, tuple[int, ...]]  # secret temp -> hider temps
    mmpairs: frozenset[tuple[int, int]]  # unordered memory candidate op pairs
    mspairs: dict[int, tuple[int, ...]]  # secret-data op -> hider ops
    tm: dict[int, int]  # memory candidate op -> data temp
    # class-level relations driving model expansion
    class_rpairs: frozenset[tuple[int, int]]
    class_spairs: dict[int, tuple[int, ...]]
    class_mmpairs: frozenset[tuple[int, int]]
    class_mspairs: dict[int, tuple[int, ...]]
    sec_input_bad: dict[int, tuple[int, ...]]

    def is_empty(self) -> bool:
        return not (self.rpairs or self.spairs or self.mmpairs or self.mspairs)


def xor_class(env: TypeEnv, t1: int, t2: int) -> SecurityClass:
    """Class of the register transition between two temps (base rules).

    A temp against itself is the zero word: Public.
    """
    if t1 == t2:
        return P
    e = Binary("xor", env.expr(t1), env.expr(t2))
    return env.classifier.classify_base(e)


def compute_rpairs(env: TypeEnv, temps: list[int]) -> frozenset[tuple[int, int]]:
    pairs = set()
    for t1, t2 in combinations(sorted(temps), 2):
        if env.cls(t1) in (R, P) and env.cls(t2) in (R, P):
            if xor_class(env, t1, t2) is S:
                pairs.add((t1, t2))
    return frozenset(pairs)


def compute_spairs(
    env: TypeEnv, temps: list[int], is_input
) -> dict[int, tuple[int, ...]]:
    keys = [t for t in temps if env.cls(t) is S and not is_input(t)]
    hiders_pool = [t for t in temps if env.cls(t) is R and not is_input(t)]
    out = {}
    for ts in keys:
        out[ts] = tuple(
            t for t in hiders_pool if t != ts and xor_class(env, t, ts) is R
        )
    return out


def compute_mmpairs(
    env: TypeEnv, memops: list[int], tm: dict[int, int]
) -> frozenset[tuple[int, int]]:
    pairs = set()
    for o1, o2 in combinations(sorted(memops), 2):
        d1, d2 = tm[o1], tm[o2]
        if env.cls(d1) in (R, P) and env.cls(d2) in (R, P):
            if xor_class(env, d1, d2) is S:
                pairs.add((o1, o2))
    return frozenset(pairs)


def compute_mspairs(
    env: TypeEnv, memops: list[int], tm: dict[int, int]
) -> dict[int, tuple[int, ...]]:
    out = {}
    for o in sorted(memops):
        if env.cls(tm[o]) is S:
            out[o] = tuple(
                o2
                for o2 in sorted(memops)
                if o2 != o
                and env.cls(tm[o2]) is R
                and xor_class(env, tm[o2], tm[o]) is R
            )
    return out


def compute_sets(prog: ElabProgram, env: TypeEnv) -> SecuritySets:
    """All security relations for an elaborated program."""
    visible = [
        t
        for t in prog.visible_temps()
        if t not in prog.out_temps and prog.temps[t].kind == "reg"
    ]
    inputs = {t.id for t, _ in prog.inputs}

    def is_input(t: int) -> bool:
        return t in inputs

    rpairs = compute_rpairs(env, visible)
    spairs = compute_spairs(env, visible, is_input)
    memops = list(prog.mem_candidates)
    mmpairs = compute_mmpairs(env, memops, prog.tm)
    mspairs = compute_mspairs(env, memops, prog.tm)

    # class-level views (representatives are value-class ids)
    rep = {t: prog.temps[t].rep for t in prog.temps}
    reps = sorted({rep[t] for t in visible})
    class_rpairs = set()
    for ra, rb in combinations(reps, 2):
        if env.cls(ra) in (R, P) and env.cls(rb) in (R, P):
            if xor_class(env, ra, rb) is S:
                class_rpairs.add((ra, rb))
    for ra in reps:  # equal-valued temps: conservative self relation
        if env.cls(ra) in (R, P) and xor_self_class(env, ra) is S:
            class_rpairs.add((ra, ra))
    class_spairs = {}
    for ra in reps:
        if env.cls(ra) is S:
            class_spairs[ra] = tuple(
                rb
                for rb in reps
                if env.cls(rb) is R and xor_class(env, rb, ra) is R
            )
    sec_input_bad = {}
    for t in sorted(inputs):
        if env.cls(t) is S:
            bad = tuple(
                rb
                for rb in reps
                if (rb == rep[t] and xor_self_class(env, rb) is S)
                or (rb != rep[t] and xor_class(env, rb, t) is S)
            )
            sec_input_bad[t] = bad

    mem_reps = sorted({rep[prog.tm[o]] for o in memops})
    class_mmpairs = set()
    for ra, rb in combinations(mem_reps, 2):
        if env.cls(ra) in (R, P) and env.cls(rb) in (R, P):
            if xor_class(env, ra, rb) is S:
                class_mmpairs.add((ra, rb))
    for ra in mem_reps:
        if env.cls(ra) in (R, P) and xor_self_class(env, ra) is S:
            class_mmpairs.add((ra, ra))
    class_mspairs = {}
    for ra in mem_reps:
        if env.cls(ra) is S:
            class_mspairs[ra] = tuple(
                rb
                for rb in mem_reps
                if env.cls(rb) is R and xor_class(env, rb, ra) is R
            )

    return SecuritySets(
        rpairs=rpairs,
        spairs=spairs,
        mmpairs=mmpairs,
        mspairs=mspairs,
        tm={o: prog.tm[o] for o in memops},
        class_rpairs=frozenset(class_rpairs),
        class_spairs=class_spairs,
        class_mmpairs=frozenset(class_mmpairs),
        class_mspairs=class_mspairs,
        sec_input_bad=sec_input_bad,
    )


def xor_self_class(env: TypeEnv, t: int) -> SecurityClass:
    """Base class of xoring two distinct equal-valued temps (same expression)."""
    e = Binary("xor", env.expr(t), env.expr(t))
    return env.classifier.classify_base(e)


def sets_to_dict(sets: SecuritySets) -> dict:
    return {
        "rpairs": [[f"t{a}", f"t{b}"] for a, b in sorted(sets.rpairs)],
        "spairs": {
            f"t{k}": [f"t{h}" for h in hs] for k, hs in sorted(sets.spairs.items())
        },
        "mmpairs": [[f"o{a}", f"o{b}"] for a, b in sorted(sets.mmpairs)],
        "mspairs": {
            f"o{k}": [f"o{h}" for h in hs] for k, hs in sorted(sets.mspairs.items())
        },
        "tm": {f"o{o}": f"t{t}" for o, t in sorted(sets.tm.items())},
    }
