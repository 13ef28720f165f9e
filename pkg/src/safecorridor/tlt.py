"""Temporal logic trees for the intersection specification.

A vehicle's specification is ``eventually g and always c and always not d``:
reach the exit, stay on the road, never enter a higher-priority vehicle's
danger set. Plain subformulas (propositions, their negations, and/or of those)
map to set algebra; the ``eventually goal and always constraint`` pattern maps
to a single constrained backward reachability solve. Anything else is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import CorridorError, GridMismatch, UnboundProposition, UnsupportedPattern
from .grid import TimeStateSet, aligned_values, set_complement, set_intersection, set_union
from .reach import backward_tube


# --- formula nodes -------------------------------------------------------------------


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Eventually:
    child: "Formula"


@dataclass(frozen=True)
class Always:
    child: "Formula"


Formula = Prop | Not | And | Or | Eventually | Always


def props(f: Formula) -> set[str]:
    if isinstance(f, Prop):
        return {f.name}
    if isinstance(f, (Not, Eventually, Always)):
        return props(f.child)
    return set().union(*(props(c) for c in f.children))


def _is_plain(f: Formula) -> bool:
    if isinstance(f, Prop):
        return True
    if isinstance(f, Not):
        return isinstance(f.child, Prop)
    if isinstance(f, (And, Or)):
        return all(_is_plain(c) for c in f.children)
    return False


def _check_nnf(f: Formula) -> None:
    if isinstance(f, Not):
        if not isinstance(f.child, Prop):
            raise UnsupportedPattern("negation must sit directly above a proposition")
        return
    if isinstance(f, (Eventually, Always)):
        _check_nnf(f.child)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            _check_nnf(c)


@dataclass(frozen=True, eq=False)
class SpecFormula:
    """A formula together with the time-state set bound to each proposition."""

    formula: Formula
    bindings: Mapping[str, TimeStateSet]

    def __post_init__(self):
        _check_nnf(self.formula)
        grids = {b.grid for b in self.bindings.values()}
        if len(grids) > 1:
            raise GridMismatch("bound sets live on different grids")
        dts = {round(b.dt, 9) for b in self.bindings.values()}
        if len(dts) > 1:
            raise GridMismatch("bound sets use different time steps")


def build_intersection_spec(
    goal: TimeStateSet, constraint: TimeStateSet, dangers: list[TimeStateSet] = ()
) -> SpecFormula:
    """``eventually g and always c and always not (d_1 or ... or d_n)``.

    The dangers are unioned into one proposition ``d``; with no dangers the
    third conjunct is dropped (an empty disjunction is false, its negation true).
    """
    bindings = {"g": goal, "c": constraint}
    conj: list[Formula] = [Eventually(Prop("g")), Always(Prop("c"))]
    if dangers:
        d = dangers[0]
        for other in dangers[1:]:
            d = set_union(d, other)
        bindings["d"] = d
        conj.append(Always(Not(Prop("d"))))
    for b in bindings.values():
        if b.grid != constraint.grid:
            raise GridMismatch("goal, constraint and dangers must share one grid")
    return SpecFormula(And(tuple(conj)), bindings)


# --- evaluation ----------------------------------------------------------------------


@dataclass(eq=False)
class LogicTree:
    """Mirror of a formula where every node holds the set computed for it.

    Temporal nodes absorbed into a reachability solve hold their operand's set
    and are marked ``absorbed``.
    """

    formula: Formula
    value: TimeStateSet
    children: list["LogicTree"] = field(default_factory=list)
    absorbed: bool = False

    @property
    def root(self) -> TimeStateSet:
        return self.value


def _plain(f: Formula, bindings) -> LogicTree:
    if isinstance(f, Prop):
        if f.name not in bindings:
            raise UnboundProposition(f.name)
        return LogicTree(f, bindings[f.name])
    if isinstance(f, Not):
        child = _plain(f.child, bindings)
        return LogicTree(f, set_complement(child.value), [child])
    kids = [_plain(c, bindings) for c in f.children]
    op = set_intersection if isinstance(f, And) else set_union
    acc = kids[0].value
    for k in kids[1:]:
        acc = op(acc, k.value)
    return LogicTree(f, acc, kids)


def _full_like(tss: TimeStateSet) -> TimeStateSet:
    return TimeStateSet(tss.grid, tss.t0, tss.dt, np.broadcast_to(np.float32(-1.0), tss.values.shape))


def evaluate(spec: SpecFormula, model=None, **solve_kw) -> LogicTree:
    """Evaluate the tree bottom-up.

    ``model`` is required once a temporal operator is present; further keyword
    arguments (``span``, ``terminal``, ``backend``, ...) go to the solve.
    """
    missing = props(spec.formula) - set(spec.bindings)
    if missing:
        raise UnboundProposition(", ".join(sorted(missing)))
    f, b = spec.formula, spec.bindings
    if _is_plain(f):
        return _plain(f, b)
    if isinstance(f, Eventually) and _is_plain(f.child):
        goal = _plain(f.child, b)
        tube = backward_tube(_need(model), goal.value, _full_like(goal.value), **solve_kw)
        return LogicTree(f, tube, [goal])
    if not isinstance(f, And):
        raise UnsupportedPattern(f"cannot evaluate {type(f).__name__} at the root")

    reach = [c for c in f.children if isinstance(c, Eventually)]
    keep = [c for c in f.children if isinstance(c, Always)]
    plain = [c for c in f.children if _is_plain(c)]
    if len(reach) != 1 or len(reach) + len(keep) + len(plain) != len(f.children):
        raise UnsupportedPattern("expected exactly one 'eventually' conjunct beside 'always' and plain ones")
    if not _is_plain(reach[0].child) or not all(_is_plain(c.child) for c in keep):
        raise UnsupportedPattern("nested temporal operators are outside the supported fragment")

    goal = _plain(reach[0].child, b)
    inv = [_plain(c.child, b) for c in keep]
    if not inv:
        raise UnsupportedPattern("the reach pattern needs at least one 'always' constraint")
    cons = inv[0].value
    for t in inv[1:]:
        cons = set_intersection(cons, t.value)
    tube = backward_tube(_need(model), goal.value, cons, **solve_kw)
    children = [LogicTree(reach[0], goal.value, [goal], absorbed=True)]
    children += [LogicTree(c, t.value, [t], absorbed=True) for c, t in zip(keep, inv)]
    # plain conjuncts hold at the current instant only, so they intersect the result
    for c in plain:
        node = _plain(c, b)
        tube = set_intersection(tube, _on_lattice(node.value, tube))
        children.append(node)
    return LogicTree(f, tube, children)


def _need(model):
    if model is None:
        raise TypeError("evaluate() needs model=<dynamics> for reachability patterns")
    return model


def _on_lattice(tss: TimeStateSet, like: TimeStateSet) -> TimeStateSet:
    if len(tss) == len(like) and abs(tss.t0 - like.t0) < 1e-9:
        return tss
    raise GridMismatch("plain conjunct is not on the tube's time lattice")


def check_satisfiable(tree: LogicTree, query: TimeStateSet) -> bool:
    """True iff ``query`` meets the root set somewhere (beyond the emptiness threshold)."""
    try:
        root = aligned_values(tree.root, query)
    except CorridorError:
        return False
    both = np.maximum(root, query.values)
    return bool(both.min() <= -query.grid.eps_empty)
