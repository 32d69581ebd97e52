import math

import numpy as np
import pytest
from scipy.optimize import brentq

from helpers import scalar_scenario
from neurospike import hybrid, lif
from neurospike.errors import NumericalFailure, PreconditionError
from neurospike.hybrid import (HybridState, HybridSystemDef, HybridTime, SolverOptions, integrate_flow,
                               locate_guard_crossing, simulate)


def lin(t, q):
    return q if np.ndim(q) == 0 else [v for v in q]


class TestIntegrateFlow:
    def test_exponential_step(self):
        assert abs(integrate_flow(1.0, 0.01, lambda t, x: x) - math.exp(0.01)) < 1e-10

    def test_zero_dynamics(self):
        assert integrate_flow(5.0, 1.0, lambda t, x: 0.0) == 5.0

    def test_origin_is_fixed(self):
        assert integrate_flow(0.0, 0.5, lambda t, x: x) == 0.0

    def test_vector_and_state_inputs(self):
        out = integrate_flow((1.0, 2.0), 0.01, lin)
        assert out == pytest.approx((math.exp(0.01), 2 * math.exp(0.01)), rel=1e-12)
        st = integrate_flow(HybridState((1.0,), 0.0, 0.0), 0.01, lin)
        assert isinstance(st, HybridState)

    def test_fifth_order_local_error(self):
        # halving h should shrink the local error by ~32
        errs = [abs(integrate_flow(1.0, h, lambda t, x: x) - math.exp(h)) for h in (0.2, 0.1)]
        assert 25 < errs[0] / errs[1] < 40

    def test_non_finite_derivative(self):
        with pytest.raises(NumericalFailure) as ei:
            integrate_flow(1.0, 0.1, lambda t, x: math.inf)
        assert ei.value.state == (1.0,)

    def test_rejects_bad_step(self):
        with pytest.raises(PreconditionError):
            integrate_flow(1.0, 0.0, lambda t, x: x)


class TestLocateGuardCrossing:
    def test_linear_root(self):
        # state s' = 1 from 0, guard s - 0.5
        t_star, q_star = locate_guard_crossing((0.0,), 0.0, (1.0,), 1.0, lambda q: q[0] - 0.5,
                                               lambda t, q: [1.0])
        assert abs(t_star - 0.5) <= 1e-12
        assert q_star[0] - 0.5 >= -1e-9

    def test_scalar_loop_first_spike(self):
        a, mu, delta, x = 1.0, 0.5, 0.1, 20.0
        oracle = brentq(lambda s: x / (mu + a) * (math.exp(a * s) - math.exp(-mu * s)) - delta, 0, 1, xtol=1e-15)
        sys = lif.build_hybrid_system(scalar_scenario())
        q0 = [x, 0.0, 0.0]
        q1 = hybrid._rk4(sys.flow_map, 0.0, q0, 0.01)
        t_star, q_star = locate_guard_crossing(q0, 0.0, q1, 0.01, lambda q: q[1] - delta, sys.flow_map)
        assert abs(t_star - 4.994e-3) <= 1e-6
        assert abs(t_star - oracle) <= 1e-9
        assert q_star[1] - delta >= -1e-9

    def test_invalid_bracket(self):
        with pytest.raises(PreconditionError):
            locate_guard_crossing((1.0,), 0.0, (2.0,), 1.0, lambda q: q[0] - 0.5, lambda t, q: [1.0])
        with pytest.raises(PreconditionError):
            locate_guard_crossing((0.0,), 1.0, (1.0,), 1.0, lambda q: q[0] - 0.5, lambda t, q: [1.0])


def test_hybrid_time_ordering():
    assert HybridTime(1.0, 2) < HybridTime(1.0, 3) < HybridTime(1.5, 0)
    with pytest.raises(PreconditionError):
        HybridTime(-1.0, 0)


@pytest.mark.parametrize("kw", [dict(h=0), dict(t_end=-1), dict(j_max=0), dict(event_tol_state=0),
                                dict(event_tol_time=-1), dict(h=math.nan)])
def test_solver_options_validation(kw):
    with pytest.raises(PreconditionError):
        SolverOptions(**kw)


def check_trace_invariants(trace, sys, opts):
    t, j = trace.t, trace.j
    dt, dj = np.diff(t), np.diff(j)
    assert np.all(dt >= 0) and np.all((dj == 0) | (dj == 1))
    assert np.all(dt[dj == 1] == 0)
    # flow samples stay (within tolerance) in the flow set
    res = np.array([sys.guard_values(q) for q in trace.q])
    assert res.max() <= opts.event_tol_state
    for k, jr in enumerate(trace.jumps):
        r = sys.guard_values(jr.state_before)[jr.active_guard - 1]
        assert abs(r) <= opts.event_tol_state
        assert list(jr.state_after) == list(sys.jump_map(list(jr.state_before), jr.active_guard))
        assert jr.j_before == k
    arcs = list(trace.arcs())
    assert len(arcs) == len(trace.jumps) + 1
    for k, jr in enumerate(trace.jumps):
        assert arcs[k].t[-1] == jr.t == arcs[k + 1].t[0]
        assert arcs[k + 1].j == arcs[k].j + 1


class TestSimulate:
    def test_nominal_invariants(self, nominal_trace):
        sc = lif.fig3_nominal()
        check_trace_invariants(nominal_trace, lif.build_hybrid_system(sc), sc.solver)
        assert nominal_trace.termination == "time_horizon"
        assert nominal_trace.t[-1] == sc.solver.t_end

    def test_nominal_jump_count(self, nominal_trace):
        # closed-form chain on [0, 15] gives 73 spikes
        assert len(nominal_trace.jumps) == 73

    def test_zero_state_never_jumps(self, backend):
        tr = lif.simulate_scenario(scalar_scenario(x0=0.0), backend)
        assert len(tr.jumps) == 0
        assert np.all(tr.x == 0.0)

    def test_jump_limit(self, backend):
        tr = lif.simulate_scenario(lif.fig3_nominal(j_max=3), backend)
        assert tr.termination == "jump_limit"
        assert len(tr.jumps) == 3 and tr.j[-1] == 3
        assert tr.t[-1] == tr.jumps[-1].t

    def test_determinism(self):
        sc = lif.fig3_noisy_asym(seed=5, t_end=3.0)
        sys = lif.build_hybrid_system(sc)
        a = simulate(sys, sc.q0, sc.solver)
        b = simulate(lif.build_hybrid_system(lif.fig3_noisy_asym(seed=5, t_end=3.0)), sc.q0, sc.solver)
        assert a.equals(b)

    def test_initial_jump(self):
        sc = scalar_scenario(x0=1.0)
        sys = lif.build_hybrid_system(sc)
        tr = simulate(sys, [1.0, 0.1, 0.0], sc.solver.__class__(t_end=0.01))
        assert tr.jumps[0].t == 0.0 and tr.jumps[0].active_guard == 1
        assert tr.q[1].tolist() == [0.5, 0.0, 0.0]

    def test_flow_escape(self):
        sys = HybridSystemDef(lambda t, q: [q[0] ** 3, 0.0, 0.0], lambda q: (-1.0, -1.0), lambda q, a: q)
        with pytest.raises(NumericalFailure) as ei:
            simulate(sys, [10.0, 0.0, 0.0], SolverOptions(h=0.1, t_end=10.0))
        assert ei.value.trace.termination == "flow_escape"
        assert np.all(np.isfinite(ei.value.trace.q))

    def test_dimension_mismatch(self):
        sys = lif.build_hybrid_system(scalar_scenario())
        with pytest.raises(PreconditionError):
            simulate(sys, [1.0, 2.0, 0.0, 0.0], SolverOptions())

    @pytest.mark.parametrize("a", [-1.0, 0.3, 1.0, 3.0])
    def test_single_arc_matches_exponential(self, a, backend):
        sc = scalar_scenario(x0=0.7, a=a, delta=1e6, t_end=1.0)
        tr = lif.simulate_scenario(sc, backend)
        assert len(tr.jumps) == 0
        exact = 0.7 * np.exp(a * tr.t)
        assert np.max(np.abs(tr.x[:, 0] / exact - 1)) < 1e-7

    def test_trace_is_read_only(self, nominal_trace):
        with pytest.raises(ValueError):
            nominal_trace.q[0, 0] = 1.0
