from __future__ import annotations

import numpy as np
import pytest

from safecorridor.dynamics import DoubleIntegrator
from safecorridor.errors import GridMismatch, UnboundProposition, UnsupportedPattern
from safecorridor.grid import StateGrid, TimeStateSet, box_field, set_complement, set_intersection, set_union
from safecorridor.reach import backward_tube
from safecorridor.tlt import (
    Always,
    And,
    Eventually,
    Not,
    Or,
    Prop,
    SpecFormula,
    build_intersection_spec,
    check_satisfiable,
    evaluate,
    props,
)

DI = DoubleIntegrator()
G = StateGrid(((-1.0, 1.0), (-0.5, 0.5)), (41, 21), (False, False))
DT, K = 0.2, 8


def tss(box, window=(0.0, (K - 1) * DT)):
    """Box set on the lattice slices inside ``window``, empty elsewhere."""
    full = np.ones((K,) + G.shape, np.float32)
    part = TimeStateSet.on_window(box_field(G, box), window, 0.0, DT)
    k0 = int(round(part.t0 / DT))
    full[k0 : k0 + len(part)] = part.values
    return TimeStateSet(G, 0.0, DT, full)


A = tss({0: (-0.5, 0.5)})
B = tss({0: (0.0, 0.8)})
GOAL = tss({0: (0.6, 0.9), 1: (-0.2, 0.2)}, ((K - 1) * DT, (K - 1) * DT))
ROAD = tss({0: (-0.9, 0.95)})
DANGER = tss({0: (0.2, 0.4), 1: (-0.5, 0.5)}, (0.4, 0.8))


def test_props_and_nnf_check():
    f = And((Eventually(Prop("g")), Always(Not(Prop("d")))))
    assert props(f) == {"g", "d"}
    with pytest.raises(UnsupportedPattern):
        SpecFormula(Not(And((Prop("a"), Prop("b")))), {"a": A, "b": B})


def test_plain_formulas_are_set_algebra():
    tree = evaluate(SpecFormula(Or((Prop("a"), Not(Prop("b")))), {"a": A, "b": B}))
    assert np.array_equal(tree.root.values, set_union(A, set_complement(B)).values)
    tree = evaluate(SpecFormula(And((Prop("a"), Prop("b"))), {"a": A, "b": B}))
    assert np.array_equal(tree.root.values, set_intersection(A, B).values)
    assert len(tree.children) == 2


def test_reach_pattern_is_one_constrained_solve():
    tree = evaluate(build_intersection_spec(GOAL, ROAD), model=DI)
    direct = backward_tube(DI, GOAL, ROAD)
    assert np.array_equal(tree.root.values, direct.values)
    assert all(c.absorbed for c in tree.children)


def test_dangers_shrink_the_result():
    free = evaluate(build_intersection_spec(GOAL, ROAD), model=DI).root
    blocked = evaluate(build_intersection_spec(GOAL, ROAD, [DANGER]), model=DI).root
    assert np.all(blocked.values >= free.values - 1e-6)
    # nothing in the result meets the danger set
    both = np.maximum(blocked.values, DANGER.values)
    assert both.min() >= 0.0


def test_eventually_alone():
    tree = evaluate(SpecFormula(Eventually(Prop("g")), {"g": GOAL}), model=DI)
    assert not tree.root.is_empty()


def test_rejections():
    with pytest.raises(UnboundProposition):
        evaluate(SpecFormula(And((Prop("a"), Prop("zz"))), {"a": A}))
    with pytest.raises(UnsupportedPattern):
        evaluate(SpecFormula(Always(Prop("a")), {"a": A}), model=DI)
    with pytest.raises(UnsupportedPattern):
        evaluate(SpecFormula(And((Eventually(Prop("a")), Eventually(Prop("b")))), {"a": A, "b": B}), model=DI)
    with pytest.raises(UnsupportedPattern):
        evaluate(SpecFormula(And((Eventually(Always(Prop("a"))), Always(Prop("b")))), {"a": A, "b": B}), model=DI)
    with pytest.raises(TypeError):
        evaluate(build_intersection_spec(GOAL, ROAD))
    other = StateGrid(((-2.0, 2.0), (-0.5, 0.5)), (41, 21), (False, False))
    with pytest.raises(GridMismatch):
        build_intersection_spec(GOAL, TimeStateSet.constant_in_time(box_field(other, {}), 0.0, DT, K))


def test_check_satisfiable():
    tree = evaluate(build_intersection_spec(GOAL, ROAD), model=DI)
    start = tss({0: (-0.2, 0.2), 1: (0.1, 0.4)}, (0.0, 0.0))
    far = tss({0: (-0.98, -0.92)}, (0.0, 0.0))
    assert check_satisfiable(tree, start)
    assert not check_satisfiable(tree, far)
