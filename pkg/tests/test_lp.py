import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from ecsplan.farm import CostModel
from ecsplan.lp import AUTO_DENSE_LIMIT, LpStatus, choose_backend, solve_lp
from ecsplan.model import EQ, GE, LE, MilpModel, build_milp


def one_var(rows):
    m = MilpModel()
    m.add_column("x", -np.inf, np.inf, obj=1.0)
    for k, (sense, rhs) in enumerate(rows):
        m.add_row(f"r{k}", {0: 1.0}, sense, rhs)
    return m


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_min_x_examples(backend):
    res = solve_lp(one_var([(GE, 3), (LE, 10)]), backend=backend)
    assert res.status == LpStatus.OPTIMAL
    assert res.objective == pytest.approx(3.0)
    bad = solve_lp(one_var([(LE, 1), (GE, 2)]), backend=backend)
    assert bad.status == LpStatus.INFEASIBLE
    unb = solve_lp(one_var([(LE, 1)]), backend=backend)
    assert unb.status == LpStatus.UNBOUNDED


def test_crossed_bounds_infeasible():
    m = one_var([])
    assert solve_lp(m, col_lo=[2.0], col_hi=[1.0]).status == LpStatus.INFEASIBLE


def scipy_reference(model):
    """Solve with HiGHS straight from the row list, independent of the in-repo wrapper."""
    n = model.n_cols
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row in model.rows:
        a = np.zeros(n)
        for k, v in row.coeffs.items():
            a[k] = v
        if row.sense == LE:
            A_ub.append(a)
            b_ub.append(row.rhs)
        elif row.sense == GE:
            A_ub.append(-a)
            b_ub.append(-row.rhs)
        else:
            A_eq.append(a)
            b_eq.append(row.rhs)
    bounds = [(None if math.isinf(c.lb) else c.lb, None if math.isinf(c.ub) else c.ub) for c in model.columns]
    return linprog(
        [c.obj for c in model.columns],
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=b_ub or None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=b_eq or None,
        bounds=bounds,
        method="highs",
    )


@st.composite
def random_lp(draw):
    n = draw(st.integers(1, 6))
    m = draw(st.integers(0, 6))
    model = MilpModel()
    small = st.integers(-3, 3)
    for k in range(n):
        kind = draw(st.sampled_from(["box", "lower", "upper", "free", "fixed"]))
        lo, hi = sorted((draw(small), draw(small)))
        lb, ub = {
            "box": (lo, hi),
            "lower": (lo, np.inf),
            "upper": (-np.inf, hi),
            "free": (-np.inf, np.inf),
            "fixed": (lo, lo),
        }[kind]
        model.add_column(f"c{k}", lb, ub, obj=draw(small))
    for r in range(m):
        coeffs = {k: draw(small) for k in range(n)}
        model.add_row(f"r{r}", coeffs, draw(st.sampled_from([LE, GE, EQ])), draw(st.integers(-6, 6)))
    return model


STATUS = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}


@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(random_lp())
def test_simplex_matches_highs(model):
    ref = scipy_reference(model)
    assert ref.status in STATUS
    res = solve_lp(model, backend="simplex")
    assert res.status == STATUS[ref.status]
    if res.status == LpStatus.OPTIMAL:
        assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        assert model.violations(res.values) == []


@settings(max_examples=100, deadline=None)
@given(random_lp(), st.integers(0, 5), st.integers(-3, 3))
def test_warm_start_after_bound_change(model, col, new_bound):
    col = col % model.n_cols
    first = solve_lp(model, backend="simplex")
    if first.status != LpStatus.OPTIMAL:
        return
    lo, hi = model.bounds()
    hi = hi.copy()
    hi[col] = min(hi[col], float(new_bound))
    if hi[col] < lo[col]:
        return
    warm = solve_lp(model, col_hi=hi, warm_basis=first.basis, backend="simplex")
    cold = solve_lp(model, col_hi=hi, backend="simplex")
    assert warm.status == cold.status
    if cold.status == LpStatus.OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, rel=1e-9, abs=1e-9)


def test_fixture_relaxation_backends_agree(oracle_fixture):
    model, vm = build_milp(oracle_fixture.graph, oracle_fixture.config, CostModel())
    a = solve_lp(model, backend="simplex")
    b = solve_lp(model, backend="highs")
    assert a.status == b.status == LpStatus.OPTIMAL
    assert a.objective == pytest.approx(b.objective, rel=1e-8)
    assert model.violations(a.values) == []


def test_warm_start_saves_iterations(fx2x3):
    model, vm = build_milp(fx2x3.graph, fx2x3.config, CostModel())
    root = solve_lp(model, backend="simplex")
    lo, hi = model.bounds()
    frac = max(vm.x, key=lambda c: min(root.values[c], 1 - root.values[c]))
    hi = hi.copy()
    hi[frac] = 0.0
    warm = solve_lp(model, col_hi=hi, warm_basis=root.basis, backend="simplex")
    cold = solve_lp(model, col_hi=hi, backend="simplex")
    assert warm.objective == pytest.approx(cold.objective, rel=1e-9)
    assert warm.iterations < cold.iterations


def test_choose_backend():
    small = one_var([(GE, 1)])
    assert choose_backend(small) == "simplex"
    assert choose_backend(small, "highs") == "highs"
    big = MilpModel()
    big.add_column("x", 0, 1)
    for k in range(AUTO_DENSE_LIMIT + 1):
        big.add_row(f"r{k}", {0: 1}, LE, 1)
    assert choose_backend(big) == "highs"
    with pytest.raises(ValueError):
        choose_backend(small, "cplex")
