"""Generic hybrid-system integration.

Flow is advanced with fixed-step classical RK4. When a guard residual turns
non-negative inside a step, the crossing is localized by bisection with
re-integration from the start of the step, and the jump is applied at the
localized state. States are handled internally as flat float vectors
``(x_1, ..., x_n, xi1, xi2)``; :class:`HybridState` is the public view.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ContractError, NumericalFailure, PreconditionError

FlowMap = Callable[[float, Sequence[float]], Sequence[float]]
GuardMap = Callable[[Sequence[float]], Sequence[float]]

TIME_HORIZON = "time_horizon"
JUMP_LIMIT = "jump_limit"
FLOW_ESCAPE = "flow_escape"
TERMINATION_REASONS = (TIME_HORIZON, JUMP_LIMIT, FLOW_ESCAPE)


@dataclass(frozen=True, order=True)
class HybridTime:
    """A point ``(t, j)`` of a hybrid time domain, ordered lexicographically."""

    t: float
    j: int

    def __post_init__(self):
        if not self.t >= 0.0 or self.j < 0:
            raise PreconditionError(f"hybrid time must satisfy t >= 0, j >= 0, got {self}")


@dataclass(frozen=True)
class HybridState:
    """Closed-loop state: plant state ``x`` and membrane potentials."""

    x: tuple
    xi1: float = 0.0
    xi2: float = 0.0

    def __post_init__(self):
        x = self.x
        if np.ndim(x) == 0:
            x = (float(x),)
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "xi1", float(self.xi1))
        object.__setattr__(self, "xi2", float(self.xi2))
        if len(self.x) < 1:
            raise PreconditionError("plant state must have at least one component")

    @property
    def n_x(self) -> int:
        return len(self.x)

    def as_vector(self) -> tuple:
        return self.x + (self.xi1, self.xi2)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "HybridState":
        v = tuple(float(c) for c in v)
        return cls(x=v[:-2], xi1=v[-2], xi2=v[-1])


@dataclass(frozen=True)
class SolverOptions:
    h: float = 1e-3
    t_end: float = 15.0
    j_max: int = 10**6
    event_tol_state: float = 1e-9
    event_tol_time: float = 1e-12

    def __post_init__(self):
        if not (self.h > 0 and self.t_end > 0):
            raise PreconditionError("h and t_end must be positive")
        if not (self.event_tol_state > 0 and self.event_tol_time > 0):
            raise PreconditionError("event tolerances must be positive")
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise PreconditionError("j_max must be an integer >= 1")
        if not all(map(math.isfinite, (self.h, self.t_end, self.event_tol_state, self.event_tol_time))):
            raise PreconditionError("solver options must be finite")

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "t_end": self.t_end,
            "j_max": int(self.j_max),
            "tolerances": {"state": self.event_tol_state, "time": self.event_tol_time},
        }


@dataclass(frozen=True)
class HybridSystemDef:
    """Data ``(F, C, G, D)`` of a hybrid system with guard residuals.

    ``flow_map(t, q)`` returns the derivative, ``guard_values(q)`` the
    residual of every guard (jump enabled when a residual is >= 0), and
    ``jump_map(q, active)`` the post-jump state for the 1-based guard index
    ``active``.
    """

    flow_map: FlowMap
    guard_values: GuardMap
    jump_map: Callable[[Sequence[float], int], Sequence[float]]
    n_x: int = 1

    def flow_set_test(self, q: Sequence[float]) -> bool:
        return max(self.guard_values(q)) <= 0.0

    def jump_set_test(self, q: Sequence[float]) -> bool:
        return max(self.guard_values(q)) >= 0.0


@dataclass(frozen=True)
class JumpRecord:
    t: float
    j_before: int
    active_guard: int
    state_before: tuple
    state_after: tuple
    simultaneous_guards: bool = False


@dataclass(frozen=True)
class Arc:
    """One interval of flow at a fixed jump count."""

    j: int
    t: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class HybridTrace:
    """Solution samples over a hybrid time domain.

    ``t``, ``j`` and ``q`` are aligned arrays, one row per sample; ``q`` has
    ``n_x + 2`` columns. A jump contributes two samples at the same ``t``:
    the last sample of the arc before and the first sample of the arc after.
    """

    t: np.ndarray
    j: np.ndarray
    q: np.ndarray
    jumps: tuple
    n_x: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        j = np.array(self.j, dtype=np.int64)
        q = np.array(self.q, dtype=float).reshape(len(t), -1)
        if q.shape[1] != self.n_x + 2 or len(j) != len(t):
            raise ContractError("trace arrays have inconsistent shapes")
        for a in (t, j, q):
            a.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "jumps", tuple(self.jumps))

    def __len__(self):
        return len(self.t)

    @property
    def x(self) -> np.ndarray:
        return self.q[:, : self.n_x]

    @property
    def xi1(self) -> np.ndarray:
        return self.q[:, self.n_x]

    @property
    def xi2(self) -> np.ndarray:
        return self.q[:, self.n_x + 1]

    @property
    def termination(self) -> str | None:
        return self.meta.get("termination")

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([jr.t for jr in self.jumps], dtype=float)

    def arcs(self) -> Iterator[Arc]:
        if len(self.t) == 0:
            return
        bounds = np.flatnonzero(np.diff(self.j)) + 1
        for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(self.t)]):
            yield Arc(j=int(self.j[lo]), t=self.t[lo:hi], q=self.q[lo:hi])

    def state(self, k: int) -> HybridState:
        return HybridState.from_vector(self.q[k])

    def equals(self, other: "HybridTrace") -> bool:
        """Bitwise equality of samples and jump records."""
        return (
            self.n_x == other.n_x
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.j, other.j)
            and np.array_equal(self.q, other.q)
            and self.jumps == other.jumps
            and self.termination == other.termination
        )


def _check_finite(values, state):
    for v in values:
        if not math.isfinite(v):
            raise NumericalFailure(f"non-finite value in flow at state {tuple(state)}", state=tuple(state))


def _rk4(f: FlowMap, t: float, q: Sequence[float], h: float) -> list:
    try:
        return _rk4_step(f, t, q, h)
    except OverflowError as exc:
        raise NumericalFailure(f"overflow in flow at state {tuple(q)}", state=tuple(q)) from exc


def _rk4_step(f, t, q, h):
    # Operation order is mirrored by the compiled kernel; keep in sync.
    n = len(q)
    h2 = 0.5 * h
    k1 = f(t, q)
    _check_finite(k1, q)
    s = [q[i] + h2 * k1[i] for i in range(n)]
    k2 = f(t + h2, s)
    _check_finite(k2, s)
    s = [q[i] + h2 * k2[i] for i in range(n)]
    k3 = f(t + h2, s)
    _check_finite(k3, s)
    s = [q[i] + h * k3[i] for i in range(n)]
    k4 = f(t + h, s)
    _check_finite(k4, s)
    h6 = h / 6.0
    out = [q[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)]
    _check_finite(out, q)
    return out


def integrate_flow(q, h: float, f: FlowMap, t: float = 0.0):
    """Advance ``q' = f(t, q)`` by one classical RK4 step of size ``h``.

    ``q`` may be a scalar or a sequence; the result has the same kind.
    Raises :class:`NumericalFailure` on a non-finite derivative.
    """
    if not h > 0:
        raise PreconditionError(f"step size must be positive, got {h}")
    if isinstance(q, HybridState):
        return HybridState.from_vector(_rk4(f, t, q.as_vector(), h))
    if np.ndim(q) == 0:
        return _rk4(lambda s, v: [f(s, v[0])], t, [float(q)], h)[0]
    return tuple(_rk4(f, t, [float(v) for v in q], h))


def _bisect(f, guard, t_lo, q_lo, span, q_hi, tol_time):
    lo, hi = 0.0, span
    while hi - lo > tol_time:
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        qm = _rk4(f, t_lo, q_lo, mid)
        if guard(qm) >= 0.0:
            hi = mid
            q_hi = qm
        else:
            lo = mid
    return hi, q_hi


def locate_guard_crossing(q_lo, t_lo: float, q_hi, t_hi: float, guard, f: FlowMap,
                          event_tol_time: float = 1e-12, event_tol_state: float = 1e-9):
    """Localize the upward zero crossing of ``guard`` between two flow samples.

    Bisects the step offset, re-integrating from ``(t_lo, q_lo)`` with one
    RK4 step per probe, until the bracket is narrower than
    ``event_tol_time``. Returns ``(t_star, q_star)`` with ``guard(q_star) >= 0``
    taken from the upper end of the final bracket.
    """
    as_state = isinstance(q_lo, HybridState)
    v_lo = list(q_lo.as_vector()) if as_state else [float(v) for v in np.atleast_1d(q_lo)]
    v_hi = list(q_hi.as_vector()) if as_state else [float(v) for v in np.atleast_1d(q_hi)]
    g = guard if not as_state else (lambda v: guard(HybridState.from_vector(v)))
    if not t_lo < t_hi:
        raise PreconditionError("crossing bracket needs t_lo < t_hi")
    g_lo, g_hi = g(v_lo), g(v_hi)
    if not (g_lo < 0.0 <= g_hi):
        raise PreconditionError(f"invalid crossing bracket: guard {g_lo!r} at t_lo, {g_hi!r} at t_hi")
    off, q_star = _bisect(f, g, t_lo, v_lo, t_hi - t_lo, v_hi, event_tol_time)
    t_star = t_hi if off == t_hi - t_lo else t_lo + off
    if as_state:
        return t_star, HybridState.from_vector(q_star)
    if np.ndim(q_lo) == 0:
        return t_star, q_star[0]
    return t_star, tuple(q_star)


def select_active_guard(residuals: Sequence[float], tol_state: float) -> tuple[int, bool]:
    """Pick the guard to fire: the lowest index within tolerance of its threshold.

    Returns ``(active, simultaneous)`` with a 1-based index.
    """
    candidates = [i + 1 for i, r in enumerate(residuals) if r >= -tol_state]
    if not candidates:
        raise ContractError("no guard is active")
    return candidates[0], len(candidates) > 1


def simulate(sys: HybridSystemDef, q0, opts: SolverOptions, meta: dict | None = None) -> HybridTrace:
    """Run the hybrid system from ``q0`` until ``t_end`` or ``j_max`` jumps.

    Jumps take priority over flow whenever some residual is >= 0. Raises
    :class:`NumericalFailure` (carrying the partial trace with termination
    ``flow_escape``) when the flow produces non-finite values.
    """
    q = list(q0.as_vector()) if isinstance(q0, HybridState) else [float(v) for v in q0]
    n_x = len(q) - 2
    if n_x != sys.n_x:
        raise PreconditionError(f"initial state has n_x={n_x}, system expects {sys.n_x}")
    if not (sys.flow_set_test(q) or sys.jump_set_test(q)):
        raise PreconditionError("initial state is in neither the flow set nor the jump set")

    h, t_end, j_max = opts.h, opts.t_end, opts.j_max
    tol_state, tol_time = opts.event_tol_state, opts.event_tol_time
    f, guards = sys.flow_map, sys.guard_values

    def gmax(v):
        return max(guards(v))

    t = 0.0
    j = 0
    ts, js, qs = [t], [j], [tuple(q)]
    jumps = []
    termination = TIME_HORIZON

    def build(reason):
        m = dict(meta or {})
        m.update(opts.to_dict())
        m["termination"] = reason
        return HybridTrace(np.array(ts), np.array(js, dtype=np.int64),
                           np.array(qs).reshape(len(ts), n_x + 2), tuple(jumps), n_x, m)

    try:
        while True:
            res = guards(q)
            if max(res) >= 0.0:
                active, simultaneous = select_active_guard(res, tol_state)
                after = [float(v) for v in sys.jump_map(q, active)]
                jumps.append(JumpRecord(t, j, active, tuple(q), tuple(after), simultaneous))
                q = after
                j += 1
                ts.append(t)
                js.append(j)
                qs.append(tuple(q))
                if j >= j_max:
                    termination = JUMP_LIMIT
                    break
                continue
            if t >= t_end:
                break
            t_new = t + h if t + h < t_end else t_end
            span = t_new - t
            q_new = _rk4(f, t, q, span)
            if gmax(q_new) >= 0.0:
                off, q_new = _bisect(f, gmax, t, q, span, q_new, tol_time)
                if off != span:
                    t_new = t + off
            t = t_new
            q = q_new
            ts.append(t)
            js.append(j)
            qs.append(tuple(q))
    except NumericalFailure as exc:
        exc.trace = build(FLOW_ESCAPE)
        raise
    return build(termination)
