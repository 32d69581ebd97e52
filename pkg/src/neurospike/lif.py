"""Closed loop of an LTI plant with a pair of leaky integrate-and-fire neurons.

Neuron 1 integrates the positive part of the measured output and, on
reaching its threshold, kicks the plant by ``-B*alpha1``; neuron 2 does the
same for the negative part with ``+B*alpha2``. The firing neuron resets to
zero and the other keeps its potential.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import hybrid
from .errors import ConfigurationError, ContractError, NumericalFailure
from .hybrid import HybridState, HybridSystemDef, HybridTrace, JumpRecord, SolverOptions
from .signals import PiecewiseLinearSignal

SCHEMA_VERSION = 1


def _finite(name, values):
    for v in values:
        if not math.isfinite(v):
            raise ConfigurationError(f"{name} has non-finite entries")


@dataclass(frozen=True)
class PlantParams:
    """``x' = A x + B u``, ``y = C x`` with scalar input and output."""

    A: tuple
    B: tuple
    C: tuple

    def __post_init__(self):
        try:
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            B = np.atleast_1d(np.asarray(self.B, dtype=float)).ravel()
            C = np.atleast_1d(np.asarray(self.C, dtype=float)).ravel()
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"plant matrices are not numeric: {exc}") from exc
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise ConfigurationError(f"A must be square, got shape {A.shape}")
        if B.shape != (n,):
            raise ConfigurationError(f"B must have length {n}, got {B.shape[0]}")
        if C.shape != (n,):
            raise ConfigurationError(f"C must have length {n}, got {C.shape[0]}")
        _finite("A", A.ravel())
        _finite("B", B)
        _finite("C", C)
        object.__setattr__(self, "A", tuple(tuple(float(v) for v in row) for row in A))
        object.__setattr__(self, "B", tuple(float(v) for v in B))
        object.__setattr__(self, "C", tuple(float(v) for v in C))

    @property
    def n_x(self) -> int:
        return len(self.B)

    @classmethod
    def scalar(cls, a: float, b: float = 1.0, c: float = 1.0) -> "PlantParams":
        return cls(((a,),), (b,), (c,))

    def to_dict(self) -> dict:
        return {"A": [list(r) for r in self.A], "B": list(self.B), "C": list(self.C)}


@dataclass(frozen=True)
class NeuronParams:
    alpha1: float
    alpha2: float
    mu1: float
    mu2: float
    delta1: float
    delta2: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "mu1", "mu2", "delta1", "delta2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ConfigurationError("spike amplitudes must satisfy alpha > 0")
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ConfigurationError("thresholds must satisfy delta > 0")
        if not (self.mu1 >= 0 and self.mu2 >= 0):
            raise ConfigurationError("leak rates must satisfy mu >= 0")

    @classmethod
    def symmetric(cls, alpha: float, mu: float, delta: float) -> "NeuronParams":
        return cls(alpha, alpha, mu, mu, delta, delta)

    @property
    def alpha(self) -> tuple:
        return (self.alpha1, self.alpha2)

    @property
    def mu(self) -> tuple:
        return (self.mu1, self.mu2)

    @property
    def delta(self) -> tuple:
        return (self.delta1, self.delta2)

    @property
    def is_symmetric(self) -> bool:
        return self.alpha1 == self.alpha2 and self.mu1 == self.mu2 and self.delta1 == self.delta2

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha1", "alpha2", "mu1", "mu2", "delta1", "delta2")}


@dataclass(frozen=True)
class ClosedLoopScenario:
    plant: PlantParams
    neurons: NeuronParams
    q0: HybridState
    solver: SolverOptions = field(default_factory=SolverOptions)
    disturbance: PiecewiseLinearSignal | None = None
    noise: PiecewiseLinearSignal | None = None
    name: str = ""

    def __post_init__(self):
        if self.q0.n_x != self.plant.n_x:
            raise ConfigurationError(f"initial state has {self.q0.n_x} components, plant has {self.plant.n_x}")
        if self.q0.xi1 < 0 or self.q0.xi2 < 0:
            raise ConfigurationError("membrane potentials must start non-negative")
        _finite("initial state", self.q0.as_vector())

    def to_dict(self) -> dict:
        d = {
            "spec": SCHEMA_VERSION,
            "name": self.name,
            "plant": self.plant.to_dict(),
            "neurons": self.neurons.to_dict(),
            "initial": {"x": list(self.q0.x), "xi1": self.q0.xi1, "xi2": self.q0.xi2},
            "solver": self.solver.to_dict(),
        }
        if self.disturbance is not None:
            d["disturbance"] = self.disturbance.to_dict()
        if self.noise is not None:
            d["noise"] = self.noise.to_dict()
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_solver(self, **changes) -> "ClosedLoopScenario":
        opts = dict(h=self.solver.h, t_end=self.solver.t_end, j_max=self.solver.j_max,
                    event_tol_state=self.solver.event_tol_state, event_tol_time=self.solver.event_tol_time)
        opts.update({k: v for k, v in changes.items() if v is not None})
        return _replace(self, solver=SolverOptions(**opts))

    def with_seed(self, seed: int) -> "ClosedLoopScenario":
        def reseed(sig):
            if sig is None:
                return None
            return PiecewiseLinearSignal(sig.grid_step, sig.amplitude, seed, sig.stream)
        return _replace(self, disturbance=reseed(self.disturbance), noise=reseed(self.noise))


def _replace(obj, **changes):
    from dataclasses import replace
    return replace(obj, **changes)


def _as_vector(q) -> list:
    if isinstance(q, HybridState):
        return list(q.as_vector())
    return [float(v) for v in q]


def flow_map(q, plant: PlantParams, neurons: NeuronParams, v: float = 0.0, w: float = 0.0) -> tuple:
    """Derivative ``(A x + v, -mu1 xi1 + max(0, y), -mu2 xi2 + max(0, -y))`` with ``y = C x + w``."""
    return tuple(_flow(_as_vector(q), plant.n_x, plant.A, plant.C, neurons.mu1, neurons.mu2, v, w))


def _flow(q, n, A, C, mu1, mu2, v, w):
    # Operation order is mirrored by the compiled kernel; keep in sync.
    out = []
    for i in range(n):
        row = A[i]
        acc = 0.0
        for k in range(n):
            acc = acc + row[k] * q[k]
        out.append(acc + v)
    y = 0.0
    for k in range(n):
        y = y + C[k] * q[k]
    y = y + w
    out.append(-mu1 * q[n] + (y if y > 0.0 else 0.0))
    out.append(-mu2 * q[n + 1] + (-y if y < 0.0 else 0.0))
    return out


def guard_residuals(q, neurons: NeuronParams) -> tuple:
    """``(xi1 - delta1, xi2 - delta2)``; jump enabled iff the max is >= 0."""
    v = _as_vector(q)
    return (v[-2] - neurons.delta1, v[-1] - neurons.delta2)


def _jump(q, active, B, alpha1, alpha2, n):
    if active == 1:
        return [q[i] - B[i] * alpha1 for i in range(n)] + [0.0, q[n + 1]]
    return [q[i] + B[i] * alpha2 for i in range(n)] + [q[n], 0.0]


def jump_map(q, active: int, plant: PlantParams, neurons: NeuronParams, event_tol_state: float = 1e-9):
    """Fire neuron ``active``: reset its potential and kick the plant by ``-/+ B*alpha``."""
    if active not in (1, 2):
        raise ContractError(f"active guard must be 1 or 2, got {active!r}")
    v = _as_vector(q)
    r = guard_residuals(v, neurons)[active - 1]
    if r < -event_tol_state:
        raise ContractError(f"neuron {active} is below threshold (residual {r:.3g})")
    out = _jump(v, active, plant.B, neurons.alpha1, neurons.alpha2, plant.n_x)
    if isinstance(q, HybridState):
        return HybridState.from_vector(out)
    return tuple(out)


def build_hybrid_system(scenario: ClosedLoopScenario) -> HybridSystemDef:
    """Wire the closed loop into a :class:`HybridSystemDef` for the generic engine."""
    plant, neurons = scenario.plant, scenario.neurons
    n, A, B, C = plant.n_x, plant.A, plant.B, plant.C
    mu1, mu2 = neurons.mu1, neurons.mu2
    d1, d2 = neurons.delta1, neurons.delta2
    a1, a2 = neurons.alpha1, neurons.alpha2
    dist, noise = scenario.disturbance, scenario.noise

    if dist is None and noise is None:
        def f(t, q):
            return _flow(q, n, A, C, mu1, mu2, 0.0, 0.0)
    else:
        def f(t, q):
            v = dist.sample(t) if dist is not None else 0.0
            w = noise.sample(t) if noise is not None else 0.0
            return _flow(q, n, A, C, mu1, mu2, v, w)

    def guards(q):
        return (q[n] - d1, q[n + 1] - d2)

    def jump(q, active):
        return _jump(q, active, B, a1, a2, n)

    return HybridSystemDef(flow_map=f, guard_values=guards, jump_map=jump, n_x=n)


def _kernel_args(scenario: ClosedLoopScenario) -> tuple:
    p, nr, o = scenario.plant, scenario.neurons, scenario.solver
    empty = np.zeros(0)

    def knots(sig):
        if sig is None:
            return empty, 1.0
        return np.array(sig.knots_until(o.t_end + o.h)), sig.grid_step

    dk, ds = knots(scenario.disturbance)
    nk, ns = knots(scenario.noise)
    return (
        np.ascontiguousarray(p.A, dtype=float), np.ascontiguousarray(p.B, dtype=float),
        np.ascontiguousarray(p.C, dtype=float),
        np.array(nr.alpha), np.array(nr.mu), np.array(nr.delta),
        np.array(scenario.q0.as_vector()),
        o.h, o.t_end, int(o.j_max), o.event_tol_state, o.event_tol_time,
        dk, ds, scenario.disturbance is not None, nk, ns, scenario.noise is not None,
    )


_TERMINATIONS = {0: hybrid.TIME_HORIZON, 1: hybrid.JUMP_LIMIT, 2: hybrid.FLOW_ESCAPE}


def _run_compiled(scenario: ClosedLoopScenario, meta: dict) -> HybridTrace:
    from . import _backend

    out = _backend.compiled_kernel()(*_kernel_args(scenario))
    t, j, q, jt, jb, jg, js, qb, qa, code = out
    n = scenario.plant.n_x
    jumps = tuple(
        JumpRecord(float(jt[k]), int(jb[k]), int(jg[k]), tuple(map(float, qb[k])), tuple(map(float, qa[k])),
                   bool(js[k]))
        for k in range(len(jt))
    )
    m = dict(meta)
    m.update(scenario.solver.to_dict())
    m["termination"] = _TERMINATIONS[int(code)]
    trace = HybridTrace(t, j, q, jumps, n, m)
    if code == 2:
        raise NumericalFailure("non-finite value in flow", state=tuple(map(float, q[-1])), trace=trace)
    return trace


def simulate_scenario(scenario: ClosedLoopScenario, backend: str | None = None) -> HybridTrace:
    """Simulate the closed loop.

    ``backend`` is ``"compiled"`` (Cython kernel), ``"python"`` (generic
    engine on :func:`build_hybrid_system`) or ``None`` for the import-time
    default. Both produce bit-identical traces.
    """
    from . import _backend

    backend = backend or _backend.DEFAULT_BACKEND
    meta = {"scenario": scenario.name, "scenario_hash": scenario.digest(), "backend": backend}
    if backend == "compiled":
        return _run_compiled(scenario, meta)
    if backend == "python":
        return hybrid.simulate(build_hybrid_system(scenario), scenario.q0, scenario.solver, meta)
    raise ConfigurationError(f"unknown backend {backend!r}")


# -- scenario documents -------------------------------------------------------

def _vector(v, name):
    if isinstance(v, (int, float)):
        return [float(v)]
    if not isinstance(v, list):
        raise ConfigurationError(f"{name} must be a number or a list")
    return v


def scenario_from_dict(d: dict) -> ClosedLoopScenario:
    if not isinstance(d, dict):
        raise ConfigurationError("scenario document must be a JSON object")
    if d.get("spec") != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported scenario schema version {d.get('spec')!r}")
    unknown = set(d) - {"spec", "name", "plant", "neurons", "initial", "solver", "disturbance", "noise"}
    if unknown:
        raise ConfigurationError(f"unknown scenario blocks: {sorted(unknown)}")
    try:
        pl = d["plant"]
        A = pl["A"]
        if isinstance(A, (int, float)):
            A = [[float(A)]]
        plant = PlantParams(A, _vector(pl["B"], "B"), _vector(pl["C"], "C"))
        nd = d["neurons"]
        if {"alpha", "mu", "delta"} <= set(nd):
            neurons = NeuronParams.symmetric(nd["alpha"], nd["mu"], nd["delta"])
        else:
            neurons = NeuronParams(**{k: nd[k] for k in ("alpha1", "alpha2", "mu1", "mu2", "delta1", "delta2")})
        ini = d["initial"]
        q0 = HybridState(tuple(float(v) for v in _vector(ini["x"], "initial.x")),
                         float(ini.get("xi1", 0.0)), float(ini.get("xi2", 0.0)))
        so = d.get("solver", {})
        tol = so.get("tolerances", {})
        solver = SolverOptions(
            h=float(so.get("h", 1e-3)), t_end=float(so["t_end"]), j_max=int(so.get("j_max", 10**6)),
            event_tol_state=float(tol.get("state", 1e-9)), event_tol_time=float(tol.get("time", 1e-12)),
        )
        dist = PiecewiseLinearSignal.from_dict(d["disturbance"], 0) if d.get("disturbance") else None
        noise = PiecewiseLinearSignal.from_dict(d["noise"], 1) if d.get("noise") else None
    except KeyError as exc:
        raise ConfigurationError(f"missing scenario field {exc}") from exc
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid scenario: {exc}") from exc
    return ClosedLoopScenario(plant, neurons, q0, solver, dist, noise, name=str(d.get("name", "")))


def load_scenario(path) -> ClosedLoopScenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: malformed JSON ({exc})") from exc
    return scenario_from_dict(doc)


def save_scenario(scenario: ClosedLoopScenario, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario.to_dict(), indent=2))
    return path


# -- built-in scenarios -------------------------------------------------------

def fig3_nominal(h: float = 1e-3, t_end: float = 15.0, j_max: int = 10**6) -> ClosedLoopScenario:
    """Unstable scalar plant ``x' = x`` from ``x0 = 20`` with a symmetric neuron pair."""
    return ClosedLoopScenario(
        PlantParams.scalar(1.0), NeuronParams.symmetric(0.5, 0.5, 0.1), HybridState((20.0,), 0.0, 0.0),
        SolverOptions(h=h, t_end=t_end, j_max=j_max), name="fig3-nominal",
    )


def fig3_noisy_asym(seed: int = 1, h: float = 1e-3, t_end: float = 15.0, j_max: int = 10**6) -> ClosedLoopScenario:
    """Asymmetric neurons with uniform +-0.1 disturbance and measurement noise."""
    return ClosedLoopScenario(
        PlantParams.scalar(1.0), NeuronParams(0.3, 0.5, 0.2, 0.5, 0.1, 0.2), HybridState((20.0,), 0.0, 0.0),
        SolverOptions(h=h, t_end=t_end, j_max=j_max),
        disturbance=PiecewiseLinearSignal(0.01, 0.1, seed, stream=0),
        noise=PiecewiseLinearSignal(0.01, 0.1, seed, stream=1),
        name="fig3-noisy-asym",
    )


def certified_scenario(h: float = 1e-3, t_end: float = 15.0, j_max: int = 10**6) -> ClosedLoopScenario:
    """Parameters obtained from the certificate with rho=0.5, sigma=0.6, started at sigma*Psi."""
    return ClosedLoopScenario(
        PlantParams.scalar(1.0), NeuronParams.symmetric(0.5, 0.5, 1.0 / 6.0), HybridState((0.36,), 0.0, 0.0),
        SolverOptions(h=h, t_end=t_end, j_max=j_max), name="certified",
    )


BUILTIN_SCENARIOS = {
    "fig3-nominal": fig3_nominal,
    "fig3-noisy-asym": fig3_noisy_asym,
    "certified": certified_scenario,
}


def builtin_scenario(name: str, **kw) -> ClosedLoopScenario:
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTIN_SCENARIOS)}")
    return factory(**kw)
