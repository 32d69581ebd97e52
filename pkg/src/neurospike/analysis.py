"""Parameter design and trace certification for the scalar closed loop.

Covers the unstable scalar plant ``x' = a x`` (``a > 0``) driven by a
symmetric neuron pair. Plants with input/output gains ``b, c > 0`` are
mapped onto the normalized loop ``z = c x`` with amplitude ``b*c*alpha``;
certificates store quantities in those normalized coordinates.

Closed forms used as oracles for the simulator, for an arc starting at a
jump with both potentials at zero::

    x(t_i + s)   = exp(a s) x_i
    xi(t_i + s)  = |x_i| (exp(a s) - exp(-mu s)) / (mu + a)

and the next firing time is bracketed by
``(1/a) log(delta (mu + a) / |x_i| + 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, DesignError, NoSpikeError, PreconditionError
from .hybrid import HybridTrace

# relative slack on design inequalities so boundary values such as
# delta == rho*alpha/(mu+a) survive rounding
_DESIGN_RTOL = 1e-12


@dataclass(frozen=True)
class ScalarPlant:
    a: float
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0):
            raise DesignError("input and output gains must be positive", "b > 0, c > 0")

    @property
    def certifiable(self) -> bool:
        return self.a > 0


def closed_form_state(x_i: float, a: float, dt: float) -> float:
    if dt < 0:
        raise PreconditionError("dt must be non-negative")
    return math.exp(a * dt) * x_i


def closed_form_xi(x_i: float, a: float, mu: float, dt: float) -> float:
    """Potential of the active neuron ``dt`` after an arc start with zeroed neurons."""
    if dt < 0:
        raise PreconditionError("dt must be non-negative")
    if not mu + a > 0:
        raise PreconditionError("closed form needs mu + a > 0")
    return abs(x_i) / (mu + a) * (math.expm1(a * dt) - math.expm1(-mu * dt))


def spike_time_upper_bound(x_i: float, a: float, mu: float, delta: float) -> float:
    return math.log1p(delta * (mu + a) / abs(x_i)) / a


def next_spike_time(x_i: float, a: float, mu: float, delta: float, tol: float = 1e-12) -> float:
    """Time from an arc start at ``x_i`` until the active neuron reaches ``delta``.

    Bisection on ``[0, ub]`` where ``ub`` is the logarithmic upper bound
    (valid because the leak term only slows the charge), refined to ``tol``.
    """
    if x_i == 0:
        raise NoSpikeError("x_i = 0: the loop stays at the origin and never fires")
    if not (a > 0 and mu >= 0 and delta > 0):
        raise PreconditionError("next_spike_time needs a > 0, mu >= 0, delta > 0")

    def resid(s):
        return closed_form_xi(x_i, a, mu, s) - delta

    lo, hi = 0.0, spike_time_upper_bound(x_i, a, mu, delta)
    while resid(hi) < 0:  # rounding at the bound
        hi = math.nextafter(hi, math.inf)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if resid(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chain_spike_times(x0: float, a: float, alpha: float, mu: float, delta: float, count: int):
    """Firing times and pre/post-jump states of the first ``count`` spikes, closed form only."""
    t, x = 0.0, float(x0)
    out = []
    for _ in range(count):
        dt = next_spike_time(x, a, mu, delta)
        t += dt
        before = closed_form_state(x, a, dt)
        after = before - alpha if x > 0 else before + alpha
        out.append((t, before, after))
        x = after
        if x == 0:
            break
    return out


# -- design -------------------------------------------------------------------

def roa_radius(rho: float, alpha: float) -> float:
    """Certified radius ``(rho+1)/((rho+1)^2 - 1) * alpha``."""
    return (rho + 1.0) / (rho * (rho + 2.0)) * alpha


def sigma_lower_bound(rho: float) -> float:
    s2 = (rho + 1.0) ** 2
    return (s2 - 1.0) / s2


def delta_upper_bound(rho: float, alpha: float, mu: float, a: float) -> float:
    return rho * alpha / (mu + a)


@dataclass(frozen=True)
class StabilityCertificate:
    """Guarantees for the normalized scalar loop.

    ``psi`` is the certified radius, ``gamma`` the per-jump contraction,
    ``upsilon = psi + 2 alpha`` the state bound and ``tau = delta /
    upsilon`` the dwell time.
    """

    a: float
    alpha: float
    mu: float
    rho: float
    sigma: float
    delta: float
    psi: float
    delta_max: float
    gamma: float
    upsilon: float
    tau: float
    b: float = 1.0
    c: float = 1.0

    @property
    def sigma_min(self) -> float:
        return sigma_lower_bound(self.rho)

    @property
    def x0_max(self) -> float:
        """Largest certified ``|x(0,0)|`` in plant coordinates."""
        return self.sigma * self.psi / self.c

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityCertificate":
        names = {f for f in cls.__dataclass_fields__}
        missing = names - set(d) - {"b", "c"}
        if missing:
            raise ContractError(f"certificate is missing fields {sorted(missing)}")
        return cls(**{k: float(d[k]) for k in names if k in d})


def _dumps(obj) -> str:
    # 17 significant digits round-trip every double
    def enc(v):
        if isinstance(v, float):
            if math.isinf(v):
                return "Infinity" if v > 0 else "-Infinity"
            return float(format(v, ".17g"))
        if isinstance(v, dict):
            return {k: enc(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [enc(x) for x in v]
        return v
    return json.dumps(enc(obj), indent=2)


def design_certificate(a: float, alpha: float, mu: float, rho: float, sigma: float,
                       delta: float | None = None, b: float = 1.0, c: float = 1.0) -> StabilityCertificate:
    """Substitute the design parameters into the stability guarantees.

    ``delta`` defaults to the largest admissible threshold. Raises
    :class:`DesignError` naming the first violated inequality.
    """
    def need(cond, ineq, detail):
        if not cond:
            raise DesignError(f"infeasible design: {ineq} violated ({detail})", ineq)

    need(a > 0, "a > 0", f"a={a}; certification covers unstable scalar plants only")
    need(b > 0 and c > 0, "b > 0 and c > 0", f"b={b}, c={c}")
    need(alpha > 0, "alpha > 0", f"alpha={alpha}")
    need(mu >= 0, "mu >= 0", f"mu={mu}")
    need(0 < rho < 1, "0 < rho < 1", f"rho={rho}")
    alpha_n = b * c * alpha
    s_min = sigma_lower_bound(rho)
    need(sigma >= s_min * (1 - _DESIGN_RTOL), "sigma >= ((rho+1)^2-1)/(rho+1)^2",
         f"sigma={sigma}, lower bound {s_min:.17g}")
    need(sigma < 1, "sigma < 1", f"sigma={sigma}")
    d_max = delta_upper_bound(rho, alpha_n, mu, a)
    if delta is None:
        delta = d_max
    need(delta > 0, "delta > 0", f"delta={delta}")
    need(delta <= d_max * (1 + _DESIGN_RTOL), "delta <= rho*alpha/(mu+a)",
         f"delta={delta}, delta_max={d_max:.17g}")
    psi = roa_radius(rho, alpha_n)
    gamma = math.sqrt(max(0.0, 1.0 - (1.0 - sigma) * (rho + 1.0) ** 2))
    upsilon = psi + 2.0 * alpha_n
    return StabilityCertificate(a=a, alpha=alpha_n, mu=mu, rho=rho, sigma=sigma, delta=delta, psi=psi,
                                delta_max=d_max, gamma=gamma, upsilon=upsilon, tau=delta / upsilon, b=b, c=c)


def solve_rho_for_roa(alpha: float, psi_desired: float) -> float:
    """Invert the radius formula for ``rho``.

    Feasible iff ``psi_desired > 2*alpha/3`` (the ``rho -> 1`` limit).
    """
    if not (alpha > 0 and psi_desired > 0):
        raise PreconditionError("alpha and psi must be positive")
    k = alpha / psi_desired
    # root of rho^2 + (2-k) rho - k = 0, rationalized; 2-k > 0 on the feasible range
    rho = 2.0 * k / ((2.0 - k) + math.sqrt(k * k + 4.0)) if k < 2 else (k - 2.0 + math.sqrt(k * k + 4.0)) / 2.0
    if not 0 < rho < 1:
        raise DesignError(
            f"infeasible design: psi={psi_desired} needs rho={rho:.6g} outside (0, 1); "
            f"psi must exceed 2*alpha/3 = {2 * alpha / 3:.6g}",
            "0 < rho < 1",
        )
    return rho


# -- certification -----------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    t: float
    j: int
    quantity: str
    observed: float
    allowed: float


@dataclass(frozen=True)
class CertificationReport:
    bound_ok: bool
    bound_margin: float
    dwell_ok: bool
    min_interspike: float
    tau: float
    xi_bounded_ok: bool
    xi_margin: float
    precondition_ok: bool
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.bound_ok and self.dwell_ok and self.xi_bounded_ok and self.precondition_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        d["violations"] = [asdict(v) for v in self.violations]
        return d

    def to_json(self) -> str:
        return _dumps(self.to_dict())


def certify_trace(trace: HybridTrace, cert: StabilityCertificate, x0: float | None = None,
                  event_tol_state: float = 1e-9, event_tol_time: float = 1e-12) -> CertificationReport:
    """Check a scalar trace against the certificate's guarantees.

    * state bound ``|x(t,j)| <= gamma**j |x0| + 2 alpha`` with slack
      ``1e-9 + 1e-7 |x0|``, at every sample;
    * consecutive jump gaps ``>= tau - event_tol_time``;
    * ``xi_l <= delta + event_tol_state``;
    * the precondition ``|x0| <= sigma psi``.

    Violations are returned as data, ordered by quantity then time.

    The certificate's bounds are checked, not assumed: for very small ``rho``
    the state decreases by roughly ``alpha`` per spike, which can overtake the
    geometric bound even from an admissible initial state.
    """
    if trace.n_x != 1:
        raise ContractError("certification needs a scalar trace")
    if len(trace) == 0:
        raise ContractError("empty trace")
    c = cert.c
    x = trace.x[:, 0] * c
    z0 = abs(float(x[0]) if x0 is None else float(x0) * c)
    violations = []

    pre_ok = z0 <= cert.sigma * cert.psi * (1 + _DESIGN_RTOL)
    if not pre_ok:
        violations.append(Violation(0.0, 0, "initial_condition", z0 / c, cert.sigma * cert.psi / c))

    slack = 1e-9 + 1e-7 * z0
    allowed = np.power(cert.gamma, trace.j.astype(float)) * z0 + 2.0 * cert.alpha + slack
    margin = allowed - np.abs(x)
    bad = np.flatnonzero(margin < 0)
    for k in bad:
        violations.append(Violation(float(trace.t[k]), int(trace.j[k]), "state_bound", float(abs(x[k]) / c),
                                    float(allowed[k] / c)))

    jt = trace.jump_times
    gaps = np.diff(jt)
    min_gap = float(gaps.min()) if len(gaps) else math.inf
    for k in np.flatnonzero(gaps < cert.tau - event_tol_time):
        violations.append(Violation(float(jt[k + 1]), int(trace.jumps[k + 1].j_before), "dwell_time",
                                    float(gaps[k]), cert.tau))

    xi_lim = cert.delta + event_tol_state
    xi_max = np.maximum(trace.xi1, trace.xi2)
    for k in np.flatnonzero(xi_max > xi_lim):
        violations.append(Violation(float(trace.t[k]), int(trace.j[k]), "membrane_potential", float(xi_max[k]),
                                    xi_lim))

    return CertificationReport(
        bound_ok=len(bad) == 0,
        bound_margin=float(margin.min() / c),
        dwell_ok=not any(v.quantity == "dwell_time" for v in violations),
        min_interspike=min_gap,
        tau=cert.tau,
        xi_bounded_ok=not any(v.quantity == "membrane_potential" for v in violations),
        xi_margin=float(xi_lim - xi_max.max()),
        precondition_ok=pre_ok,
        violations=tuple(violations),
    )


# -- empirical statistics -------------------------------------------------------

def ultimate_bound_estimate(trace: HybridTrace, t_cut: float) -> float:
    """Largest ``|x|`` (max over components) over samples with ``t >= t_cut``."""
    mask = trace.t >= t_cut
    if not mask.any():
        raise ContractError(f"no samples with t >= {t_cut}")
    return float(np.abs(trace.x[mask]).max())


def min_interspike(trace: HybridTrace, t_cut: float = 0.0) -> float | None:
    """Smallest gap between consecutive jumps at ``t >= t_cut``; ``None`` with fewer than two."""
    jt = trace.jump_times
    jt = jt[jt >= t_cut]
    if len(jt) < 2:
        return None
    return float(np.diff(jt).min())


def per_jump_contraction(trace: HybridTrace, cert: StabilityCertificate):
    """``(|x_i|, |x_{i+1}|)`` post-jump magnitude pairs for arcs starting above ``alpha``.

    Includes the initial state as ``x_0``. Values are in normalized units.
    """
    starts = [abs(float(trace.x[0, 0]))] + [abs(jr.state_after[0]) for jr in trace.jumps]
    starts = [s * cert.c for s in starts]
    return [(s, n) for s, n in zip(starts[:-1], starts[1:]) if s > cert.alpha]
