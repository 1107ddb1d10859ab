"""Security-class inference for straight-line programs.

Every temporary gets an expression over input leaves (copies are transparent:
a copy shares its source's expression object), and a class:

  Random  -- uniformly distributed for every fixed secret/public assignment
  Public  -- distribution independent of the secrets
  Secret  -- everything we cannot prove to be one of the above

Two rule sets coexist:

* the extended classifier (`Classifier.classify`) applies the cancellation-
  aware support plus the structural PUB/NEST/DISTR rules; it is used for
  per-temp typing, and NEST/DISTR act as rewrite-then-reclassify steps with
  a fixed depth bound;
* the base classifier (`Classifier.classify_base`) uses plain syntactic
  support with only the uniform-random and no-secret rules. The pair sets
  fed to the secure backend are computed with the base classifier, which is
  deliberately more conservative on xors of equal-valued temporaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import apply_binop, apply_unop, mask
from .ir import Literal, SecurityClass

REWRITE_DEPTH = 3

XOR_OPS = ("xor",)
GFMUL_OPS = ("gf_mul",)


def op_group(op: str) -> str:
    """Bucket a binary opcode: 'xor', 'gfmul' or 'other'."""
    if op in XOR_OPS:
        return "xor"
    if op in GFMUL_OPS:
        return "gfmul"
    return "other"


@dataclass(frozen=True)
class Var:
    """Input leaf. Carries its own security class so exprs are self-contained."""

    id: int
    cls: SecurityClass

    def __str__(self) -> str:
        return f"t{self.id}"


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __str__(self) -> str:
        return f"{self.op}({self.child})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


Expr = Var | Const | Unary | Binary


class Classifier:
    """Caches supp/unq/dom per expression object (exprs form a shared DAG).

    Caches are keyed by object identity; cached expressions are pinned so a
    recycled address can never alias a dead node.
    """

    def __init__(self) -> None:
        self._pin: dict[int, Expr] = {}
        self._supp: dict[int, frozenset[int]] = {}
        self._unq: dict[int, frozenset[int]] = {}
        self._dom: dict[int, frozenset[int]] = {}
        self._xoronly: dict[int, bool] = {}
        self._supp_b: dict[int, frozenset[int]] = {}
        self._unq_b: dict[int, frozenset[int]] = {}
        self._dom_b: dict[int, frozenset[int]] = {}
        self._cls: dict[int, SecurityClass] = {}

    def _key(self, e: Expr) -> int:
        k = id(e)
        self._pin[k] = e
        return k

    # -- extended auxiliary functions -------------------------------------

    def xor_only(self, e: Expr) -> bool:
        """True iff every binary node in e is an exclusive or."""
        key = self._key(e)
        if key not in self._xoronly:
            if isinstance(e, (Var, Const)):
                r = True
            elif isinstance(e, Unary):
                r = self.xor_only(e.child)
            else:
                r = (
                    op_group(e.op) == "xor"
                    and self.xor_only(e.left)
                    and self.xor_only(e.right)
                )
            self._xoronly[key] = r
        return self._xoronly[key]

    def supp(self, e: Expr) -> frozenset[int]:
        """Input leaves feeding e, after xor-cancellation simplifications."""
        key = self._key(e)
        if key in self._supp:
            return self._supp[key]
        if isinstance(e, Var):
            r = frozenset([e.id])
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.supp(e.child)
        elif op_group(e.op) == "xor" and self.xor_only(e):
            # symmetric difference: shared leaves cancel pairwise
            r = self.supp(e.left) ^ self.supp(e.right)
        elif (
            op_group(e.op) == "xor"
            and isinstance(e.right, Binary)
            and op_group(e.right.op) == "xor"
            and e.right.left == e.left
        ):
            # nested cancellation: a ^ (a ^ b) keeps only b
            r = self.supp(e.right.right)
        else:
            r = self.supp(e.left) | self.supp(e.right)
        self._supp[key] = r
        return r

    def unq(self, e: Expr) -> frozenset[int]:
        """Random leaves appearing exactly once (shared support removed)."""
        key = self._key(e)
        if key in self._unq:
            return self._unq[key]
        if isinstance(e, Var):
            r = frozenset([e.id]) if e.cls is SecurityClass.RANDOM else frozenset()
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.unq(e.child)
        else:
            r = (self.unq(e.left) | self.unq(e.right)) - (
                self.supp(e.left) & self.supp(e.right)
            )
        self._unq[key] = r
        return r

    def dom(self, e: Expr) -> frozenset[int]:
        """Random leaves that still mask e (xor:ed in, used once)."""
        key = self._key(e)
        if key in self._dom:
            return self._dom[key]
        if isinstance(e, Var):
            r = frozenset([e.id]) if e.cls is SecurityClass.RANDOM else frozenset()
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.dom(e.child)
        elif op_group(e.op) == "xor":
            r = (self.dom(e.left) | self.dom(e.right)) & self.unq(e)
        else:
            r = frozenset()
        self._dom[key] = r
        return r

    def secrets(self, e: Expr) -> frozenset[int]:
        if isinstance(e, Var):
            return frozenset([e.id]) if e.cls is SecurityClass.SECRET else frozenset()
        if isinstance(e, Const):
            return frozenset()
        if isinstance(e, Unary):
            return self.secrets(e.child)
        return self.secrets(e.left) | self.secrets(e.right)

    # -- base auxiliary functions (no cancellation) ------------------------

    def supp_base(self, e: Expr) -> frozenset[int]:
        key = self._key(e)
        if key in self._supp_b:
            return self._supp_b[key]
        if isinstance(e, Var):
            r = frozenset([e.id])
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.supp_base(e.child)
        else:
            r = self.supp_base(e.left) | self.supp_base(e.right)
        self._supp_b[key] = r
        return r

    def unq_base(self, e: Expr) -> frozenset[int]:
        key = self._key(e)
        if key in self._unq_b:
            return self._unq_b[key]
        if isinstance(e, Var):
            r = frozenset([e.id]) if e.cls is SecurityClass.RANDOM else frozenset()
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.unq_base(e.child)
        else:
            r = (self.unq_base(e.left) | self.unq_base(e.right)) - (
                self.supp_base(e.left) & self.supp_base(e.right)
            )
        self._unq_b[key] = r
        return r

    def dom_base(self, e: Expr) -> frozenset[int]:
        key = self._key(e)
        if key in self._dom_b:
            return self._dom_b[key]
        if isinstance(e, Var):
            r = frozenset([e.id]) if e.cls is SecurityClass.RANDOM else frozenset()
        elif isinstance(e, Const):
            r = frozenset()
        elif isinstance(e, Unary):
            r = self.dom_base(e.child)
        elif op_group(e.op) == "xor":
            r = (self.dom_base(e.left) | self.dom_base(e.right)) & self.unq_base(e)
        else:
            r = frozenset()
        self._dom_b[key] = r
        return r

    def classify_base(self, e: Expr) -> SecurityClass:
        if self.dom_base(e):
            return SecurityClass.RANDOM
        if not (self.supp_base(e) & self._all_secrets(e)):
            return SecurityClass.PUBLIC
        return SecurityClass.SECRET

    def _all_secrets(self, e: Expr) -> frozenset[int]:
        return self.secrets(e)

    # -- extended classification -------------------------------------------

    def classify(self, e: Expr, depth: int = 0) -> SecurityClass:
        key = self._key(e)
        if depth == 0 and key in self._cls:
            return self._cls[key]
        r = self._classify(e, depth)
        if depth == 0:
            self._cls[key] = r
        return r

    def _classify(self, e: Expr, depth: int) -> SecurityClass:
        R, P, S = SecurityClass.RANDOM, SecurityClass.PUBLIC, SecurityClass.SECRET
        if self.dom(e):  # RAND
            return R
        if not (self.supp(e) & self.secrets(e)):  # PUB1 (dom is empty here)
            return P
        if not isinstance(e, Binary):
            return S
        a, b = e.left, e.right
        group = op_group(e.op)
        ca, cb = self.classify(a, depth), self.classify(b, depth)
        # PUB2: both public, disjoint support
        if ca is P and cb is P and not (self.supp(a) & self.supp(b)):
            return P
        if group == "other":
            # PUB3: both random, one mask outside the other's support
            if ca is R and cb is R and (
                self.dom(a) - self.supp(b) or self.dom(b) - self.supp(a)
            ):
                return P
            # PUB7: public/random with disjoint support
            for x, cx, y, cy in ((a, ca, b, cb), (b, cb, a, ca)):
                if cx is P and cy is R and not (self.supp(x) & self.supp(y)):
                    return P
        if group == "gfmul":
            # PUB4: both random, masks not identical
            if ca is R and cb is R and (
                self.dom(a) - self.dom(b) or self.dom(b) - self.dom(a)
            ):
                return P
            # PUB6: random times public with a surviving mask
            for x, cx, y, cy in ((a, ca, b, cb), (b, cb, a, ca)):
                if cx is R and cy is P and (self.dom(x) - self.supp(y)):
                    return P
        # PUB5: random operand whose mask/support mirror the other side
        for x, cx, y in ((a, ca, b), (b, cb, a)):
            if (
                cx is R
                and not (self.dom(x) - self.supp(y))
                and self.dom(x) == self.dom(y)
                and self.supp(x) == self.supp(y)
            ):
                return P
        if group == "xor":
            # PUB9: both public, no shared random leaf
            if ca is P and cb is P:
                rand_ids = self._random_ids(a) | self._random_ids(b)
                if not (self.supp(a) & self.supp(b) & rand_ids):
                    return P
            # PUB8: one side is the product of the other with a third factor
            for x, y, cy in ((a, b, cb), (b, a, ca)):
                if isinstance(x, Binary) and op_group(x.op) == "gfmul":
                    other = None
                    if x.left == y:
                        other = x.right
                    elif x.right == y:
                        other = x.left
                    if other is not None and cy is not S:
                        if self.classify(other, depth) is not S:
                            return P
            if depth < REWRITE_DEPTH:
                res = self._rewrite_rules(e, a, b, depth)
                if res is not None:
                    return res
        return S

    def _random_ids(self, e: Expr) -> frozenset[int]:
        if isinstance(e, Var):
            return frozenset([e.id]) if e.cls is SecurityClass.RANDOM else frozenset()
        if isinstance(e, Const):
            return frozenset()
        if isinstance(e, Unary):
            return self._random_ids(e.child)
        return self._random_ids(e.left) | self._random_ids(e.right)

    def _rewrite_rules(self, e: Binary, a: Expr, b: Expr, depth: int) -> SecurityClass | None:
        # NEST1: y ^ (y ^ t2)  ->  t2
        for x, y in ((a, b), (b, a)):
            if isinstance(x, Binary) and op_group(x.op) == "xor":
                if x.left == y:
                    return self.classify(x.right, depth + 1)
                if x.right == y:
                    return self.classify(x.left, depth + 1)
        # NEST2: y ^ (y | t2)  ->  ~y & t2
        for x, y in ((a, b), (b, a)):
            if isinstance(x, Binary) and x.op == "or":
                for t2 in self._partner(x, y):
                    return self.classify(Binary("and", Unary("not", y), t2), depth + 1)
        # NEST3: y ^ (y & t2)  ->  y & ~t2
        for x, y in ((a, b), (b, a)):
            if isinstance(x, Binary) and x.op == "and":
                for t2 in self._partner(x, y):
                    return self.classify(Binary("and", y, Unary("not", t2)), depth + 1)
        # DISTR0-3: (t0*t1) ^ (t?*t?) with a shared factor -> factored form
        if (
            isinstance(a, Binary)
            and op_group(a.op) == "gfmul"
            and isinstance(b, Binary)
            and op_group(b.op) == "gfmul"
        ):
            t0, t1 = a.left, a.right
            if b.left == t0:  # (t0*t1) ^ (t0*t2)
                return self.classify(
                    Binary("gf_mul", t0, Binary("xor", t1, b.right)), depth + 1
                )
            if b.right == t0:  # (t0*t1) ^ (t2*t0)
                return self.classify(
                    Binary("gf_mul", t0, Binary("xor", t1, b.left)), depth + 1
                )
            if b.left == t1:  # (t0*t1) ^ (t1*t2)
                return self.classify(
                    Binary("gf_mul", t1, Binary("xor", t0, b.right)), depth + 1
                )
            if b.right == t1:  # (t0*t1) ^ (t2*t1)
                return self.classify(
                    Binary("gf_mul", t1, Binary("xor", t0, b.left)), depth + 1
                )
        return None

    @staticmethod
    def _partner(x: Binary, y: Expr):
        if x.left == y:
            yield x.right
        elif x.right == y:
            yield x.left


@dataclass
class TypeEnv:
    """Total map from temp id to class and expression."""

    classes: dict[int, SecurityClass]
    exprs: dict[int, Expr]
    classifier: Classifier

    def cls(self, t: int) -> SecurityClass:
        return self.classes[t]

    def expr(self, t: int) -> Expr:
        return self.exprs[t]

    def temps(self) -> list[int]:
        return sorted(self.classes)


def build_exprs(p) -> dict[int, Expr]:
    """Forward-substitute every temp to an expression over input leaves.

    Accepts anything with `.inputs` and `.operations` shaped like ir.Program.
    Copies are transparent; a load takes the expression last stored at the
    same address key (literal value, or address temp), defaulting to the
    constant initial memory content.
    """
    exprs: dict[int, Expr] = {}
    for t, cls in p.inputs:
        exprs[t.id] = Var(t.id, cls)
    memory: dict[object, Expr] = {}

    def operand_expr(u) -> Expr:
        if isinstance(u, Literal):
            return Const(u.value)
        return exprs[u.id]

    def addr_key(u) -> object:
        if isinstance(u, Literal):
            return ("lit", u.value)
        return ("tmp", u.id)

    for op in p.operations:
        if op.opcode == "in":
            continue
        if op.opcode == "store":
            memory[addr_key(op.uses[0])] = operand_expr(op.uses[1])
            continue
        if op.opcode == "load":
            if op.defs is not None:
                exprs[op.defs.id] = memory.get(addr_key(op.uses[0]), Const(0))
            continue
        if op.opcode in ("copy", "out"):
            if op.defs is not None:
                exprs[op.defs.id] = operand_expr(op.uses[0])
            continue
        if op.defs is None:
            continue
        if op.opcode == "not":
            exprs[op.defs.id] = Unary("not", operand_expr(op.uses[0]))
        else:
            exprs[op.defs.id] = Binary(
                op.opcode, operand_expr(op.uses[0]), operand_expr(op.uses[1])
            )
    return exprs


def infer_types(p) -> TypeEnv:
    """Classify every temp of a (source or elaborated) program."""
    cl = Classifier()
    exprs = build_exprs(p)
    classes = {t: cl.classify(e) for t, e in exprs.items()}
    return TypeEnv(classes, exprs, cl)


def xor_only(e: Expr) -> bool:
    return Classifier().xor_only(e)


def supp(e: Expr) -> frozenset[int]:
    return Classifier().supp(e)


def unq(e: Expr) -> frozenset[int]:
    return Classifier().unq(e)


def dom(e: Expr) -> frozenset[int]:
    return Classifier().dom(e)


def classify(e: Expr) -> SecurityClass:
    return Classifier().classify(e)


# -- concrete evaluation (used by the simulator and the distribution checks) --


def eval_expr(e: Expr, values: dict[int, int], width: int) -> int:
    if isinstance(e, Var):
        return values[e.id] & mask(width)
    if isinstance(e, Const):
        return e.value & mask(width)
    if isinstance(e, Unary):
        return apply_unop(e.op, eval_expr(e.child, values, width), width)
    return apply_binop(
        e.op,
        eval_expr(e.left, values, width),
        eval_expr(e.right, values, width),
        width,
    )


def eval_expr_vec(e: Expr, values: dict[int, np.ndarray], width: int) -> np.ndarray:
    """Vectorized eval_expr over numpy arrays of input assignments."""
    m = mask(width)
    if isinstance(e, Var):
        return values[e.id] & m
    if isinstance(e, Const):
        shape = next(iter(values.values())).shape if values else ()
        return np.full(shape, e.value & m, dtype=np.int64)
    if isinstance(e, Unary):
        return ~eval_expr_vec(e.child, values, width) & m
    a = eval_expr_vec(e.left, values, width)
    b = eval_expr_vec(e.right, values, width)
    if e.op == "xor":
        return (a ^ b) & m
    if e.op == "and":
        return a & b
    if e.op == "or":
        return a | b
    if e.op == "add":
        return (a + b) & m
    if e.op == "gf_mul":
        acc = np.zeros_like(a)
        aa = a.copy()
        bb = b.copy()
        from .bits import REDUCTION_POLY

        poly = REDUCTION_POLY[width]
        for _ in range(width):
            acc ^= np.where(bb & 1, aa, 0)
            bb >>= 1
            aa <<= 1
            aa = np.where(aa >> width, aa ^ poly, aa)
        return acc & m
    raise ValueError(e.op)
