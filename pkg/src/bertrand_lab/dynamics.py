"""Central-force motion on a surface of revolution.

With ``K = eps f^2 phidot`` conserved, the radial motion is one-dimensional
in the effective potential ``W(r) = V(r) + eps K^2 / (2 f(r)^2)`` and

    H = p_r^2 / 2 + W(r),    phidot = eps K / f(r)^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError
from .numerics import ROOT_TOL, find_roots, sample_interval
from .surface import SurfaceOfRevolution

# Yoshida triple-jump weights: a 4th-order symmetric composition of leapfrog
_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y0 = 1.0 - 2.0 * _Y1
SCHEMES = {"leapfrog": (1.0,), "yoshida4": (_Y1, _Y0, _Y1)}
BOUNDARY_STEPS = 10


class PotentialKind(str, Enum):
    CONSTANT = "constant"
    GRAVITATIONAL_THETA = "gravitational_theta"
    OSCILLATOR_THETA = "oscillator_theta"
    CUSTOM_RADIAL = "custom_radial"


@dataclass(frozen=True)
class PowerLaw:
    """``V(r) = sum c_i r^p_i``, a picklable custom radial potential."""
    terms: tuple  # ((coefficient, power), ...)

    def __call__(self, r):
        v = d1 = d2 = 0.0
        for c, p in self.terms:
            v += c * r**p
            if p != 0:
                d1 += c * p * r ** (p - 1)
                if p != 1:
                    d2 += c * p * (p - 1) * r ** (p - 2)
        return v, d1, d2


@dataclass(frozen=True)
class CentralPotential:
    kind: PotentialKind
    A: float = 0.0
    B: float = 0.0
    custom: Optional[Callable] = None

    def evaluate(self, surface: SurfaceOfRevolution, r):
        """Return ``(V, V', V'')`` at radius ``r`` on ``surface``."""
        k = self.kind
        if k is PotentialKind.CONSTANT:
            return self.B, 0.0, 0.0
        if k is PotentialKind.CUSTOM_RADIAL:
            return self.custom(r)
        th, th1, th2 = surface.theta_chart(r)
        A = self.A
        if k is PotentialKind.GRAVITATIONAL_THETA:
            return -A * th + self.B, -A * th1, -A * th2
        # oscillator: A / (2 theta^2)
        return (A / (2.0 * th * th) + self.B,
                -A * th1 / th**3,
                3.0 * A * th1 * th1 / th**4 - A * th2 / th**3)

    def check(self, surface: SurfaceOfRevolution) -> list[str]:
        """Validate against ``surface``; returns warning messages (also emitted)."""
        notes = []
        if self.kind in (PotentialKind.GRAVITATIONAL_THETA, PotentialKind.OSCILLATOR_THETA):
            if surface.theta_chart is None:
                raise DomainError(f"{self.kind.value} needs a surface with a Bertrand theta chart")
            if self.kind is PotentialKind.GRAVITATIONAL_THETA and surface.family is not None and surface.family.delta != 0:
                notes.append("gravitational_theta on a delta != 0 Bertrand surface: only the oscillator potential is closing there")
        if self.kind is PotentialKind.CUSTOM_RADIAL and self.custom is None:
            raise DomainError("custom_radial potential needs a radial function")
        for msg in notes:
            warnings.warn(msg, stacklevel=2)
        return notes

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "A": self.A, "B": self.B}
        if isinstance(self.custom, PowerLaw):
            out["terms"] = [list(t) for t in self.custom.terms]
        return out


def make_potential(kind, A: float = 0.0, B: float = 0.0, custom: Optional[Callable] = None) -> CentralPotential:
    kind = PotentialKind(kind)
    if kind is PotentialKind.CUSTOM_RADIAL and custom is None:
        raise DomainError("custom_radial potential needs a radial function")
    return CentralPotential(kind, float(A), float(B), custom)


def constant_potential(value: float = 0.0) -> CentralPotential:
    return make_potential("constant", B=value)


def power_law_potential(*terms) -> CentralPotential:
    """``power_law_potential((-1, -1), (0.1, 1))`` is ``-1/r + 0.1 r``."""
    return make_potential("custom_radial", custom=PowerLaw(tuple((float(c), float(p)) for c, p in terms)))


def kepler(k: float = 1.0) -> CentralPotential:
    return power_law_potential((-k, -1))


def oscillator(k: float = 1.0) -> CentralPotential:
    return power_law_potential((0.5 * k, 2))


@dataclass(frozen=True)
class PhaseState:
    r: float
    phi: float
    p_r: float
    K: float

    @classmethod
    def from_velocity(cls, surface: SurfaceOfRevolution, r, phi, rdot, phidot) -> "PhaseState":
        return cls(r, phi, rdot, surface.epsilon * surface.f(r) ** 2 * phidot)


@dataclass(frozen=True)
class EffectivePotential:
    surface: SurfaceOfRevolution
    potential: CentralPotential
    K: float

    def all(self, r):
        """``(W, W', W'')`` at ``r``."""
        f, f1, f2 = self.surface.profile(r)
        V, V1, V2 = self.potential.evaluate(self.surface, r)
        c = self.surface.epsilon * self.K * self.K
        return (V + 0.5 * c / (f * f),
                V1 - c * f1 / f**3,
                V2 + c * (3.0 * f1 * f1 - f * f2) / f**4)

    def __call__(self, r):
        return self.all(r)[0]

    def d1(self, r):
        return self.all(r)[1]

    def d2(self, r):
        return self.all(r)[2]


def effective_potential(surface, potential, K) -> EffectivePotential:
    if not math.isfinite(K):
        raise DomainError("K must be finite")
    potential.check(surface)
    return EffectivePotential(surface, potential, float(K))


def energy(surface, potential, state: PhaseState) -> float:
    f = surface.f(state.r)
    V = potential.evaluate(surface, state.r)[0]
    return 0.5 * state.p_r**2 + V + 0.5 * surface.epsilon * state.K**2 / f**2


class ExitReason(str, Enum):
    TIME_BUDGET = "time_budget"
    LEFT_DOMAIN = "left_domain"
    STEP_FAILURE = "step_failure"


@dataclass
class Trajectory:
    """Time-ordered samples of a reduced central-force trajectory.

    Samples are stored column-wise; ``K`` is constant along the run.
    """
    t: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    p_r: np.ndarray
    H: np.ndarray
    K: float
    H0: float
    K0: float
    drift_H: float
    drift_K: float
    exit_reason: ExitReason
    notes: list = field(default_factory=list)

    @property
    def drift(self) -> tuple[float, float]:
        return self.drift_H, self.drift_K

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> PhaseState:
        return PhaseState(float(self.r[i]), float(self.phi[i]), float(self.p_r[i]), self.K)

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def rows(self):
        """CSV rows ``t, r, phi, p_r, H, K, driftH``."""
        for i in range(len(self.t)):
            yield (self.t[i], self.r[i], self.phi[i], self.p_r[i], self.H[i], self.K, abs(self.H[i] - self.H0))


def integrate(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    state0: PhaseState,
    t_end: float,
    step: float,
    scheme: str = "yoshida4",
    sample_every: int = 1,
) -> Trajectory:
    """Fixed-step symplectic integration of the reduced system.

    Each step is a composition of kick-drift-kick leapfrog substeps on
    ``p_r^2/2 + W(r)``; ``phi`` advances by the midpoint rule on each drift.
    The run stops at ``t_end`` or when ``r`` comes within ``10*step`` of the
    interval boundary.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    if not surface.contains(state0.r):
        raise DomainError(f"initial radius {state0.r} outside ({surface.a}, {surface.b})")
    weights = SCHEMES[scheme]
    W = effective_potential(surface, potential, state0.K)
    prof = surface.profile
    epsK = surface.epsilon * state0.K
    wall = BOUNDARY_STEPS * step
    lo, hi = surface.a + wall, surface.b - wall

    r, p, phi, t = float(state0.r), float(state0.p_r), float(state0.phi), 0.0
    Wr, W1 = W.all(r)[:2]
    H0 = 0.5 * p * p + Wr
    n_steps = int(math.ceil(t_end / step - 1e-12))
    ts, rs, phis, ps, Hs = [t], [r], [phi], [p], [H0]
    drift = 0.0
    reason = ExitReason.TIME_BUDGET
    for n in range(1, n_steps + 1):
        h_n = min(step, t_end - t)
        for w in weights:
            hh = w * h_n
            p -= 0.5 * hh * W1
            r_new = r + hh * p
            f_mid = prof(0.5 * (r + r_new))[0]
            phi += hh * epsK / (f_mid * f_mid)
            r = r_new
            Wr, W1 = W.all(r)[:2]
            p -= 0.5 * hh * W1
        t = n * step if n < n_steps else t_end
        H = 0.5 * p * p + Wr
        if not (math.isfinite(H) and math.isfinite(phi)):
            reason = ExitReason.STEP_FAILURE
            break
        d = abs(H - H0)
        if d > drift:
            drift = d
        exiting = not (lo < r < hi)
        if n % sample_every == 0 or n == n_steps or exiting:
            ts.append(t); rs.append(r); phis.append(phi); ps.append(p); Hs.append(H)
        if exiting:
            reason = ExitReason.LEFT_DOMAIN
            break
    notes = []
    if state0.K == 0:
        notes.append("singular orbit (K = 0): radial motion only")
    return Trajectory(np.array(ts), np.array(rs), np.array(phis), np.array(ps), np.array(Hs),
                      state0.K, H0, state0.K, drift, 0.0, reason, notes)


def reversed_state(state: PhaseState) -> PhaseState:
    """Momentum flip; integrating from it retraces the trajectory backwards."""
    return PhaseState(state.r, state.phi, -state.p_r, -state.K)


@dataclass
class AdaptiveRun:
    t: np.ndarray
    y: np.ndarray  # rows: r, p_r, phi
    exit_reason: ExitReason
    t_events: list
    y_events: list


def _rhs(W: EffectivePotential):
    prof = W.surface.profile
    surface, potential = W.surface, W.potential
    epsK = surface.epsilon * W.K
    c = epsK * W.K
    a, b = surface.a, surface.b

    def rhs(t, y):
        # trial stages may probe past a wall before the event fires
        r = min(max(y[0], a), b)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            f, f1, _ = prof(r)
            V1 = potential.evaluate(surface, r)[1]
            return [y[1], c * f1 / (f * f * f) - V1, epsK / (f * f)]
    return rhs


def integrate_adaptive(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    state0: PhaseState,
    t_end: float,
    rtol: float = 1e-11,
    atol: float = 1e-12,
    margin: Optional[float] = None,
    events: tuple = (),
    dense: bool = False,
    max_step: float = math.inf,
) -> AdaptiveRun:
    """High-order adaptive integration (DOP853) of the same reduced system.

    Used as an independent oracle for the symplectic stepper and for closure
    detection. Stops when ``r`` reaches ``margin`` from a finite boundary.
    """
    W = effective_potential(surface, potential, state0.K)
    if margin is None:
        margin = 1e-6 * (surface.b - surface.a) if math.isfinite(surface.b - surface.a) else 1e-6
    walls = []
    if math.isfinite(surface.a):
        lo = surface.a + margin
        ev_lo = lambda t, y: y[0] - lo  # noqa: E731
        ev_lo.terminal = True
        walls.append(ev_lo)
    if math.isfinite(surface.b):
        hi = surface.b - margin
        ev_hi = lambda t, y: hi - y[0]  # noqa: E731
        ev_hi.terminal = True
        walls.append(ev_hi)
    all_events = list(events) + walls
    sol = solve_ivp(_rhs(W), (0.0, t_end), [state0.r, state0.p_r, state0.phi], method="DOP853",
                    rtol=rtol, atol=atol, events=all_events or None, dense_output=dense, max_step=max_step)
    reason = ExitReason.TIME_BUDGET
    if sol.status == 1 and walls and any(len(te) for te in sol.t_events[len(events):]):
        reason = ExitReason.LEFT_DOMAIN
    elif sol.status == -1:
        reason = ExitReason.STEP_FAILURE
    n_ev = len(events)
    return AdaptiveRun(sol.t, sol.y, reason,
                       list(sol.t_events[:n_ev]) if all_events else [],
                       list(sol.y_events[:n_ev]) if all_events else [])


@dataclass(frozen=True)
class CircularOrbit:
    r0: float
    K0: float
    E0: float
    w2: float
    strongly_stable: bool
    is_equator: bool

    def to_dict(self) -> dict:
        return {"r0": self.r0, "K0": self.K0, "E0": self.E0, "w2": self.w2,
                "strongly_stable": self.strongly_stable, "is_equator": self.is_equator}


def circular_orbits(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    K: float,
    bracket: Optional[tuple[float, float]] = None,
    resolution: int = 4000,
    equator_tol: float = 1e-8,
) -> list[CircularOrbit]:
    """Critical points of ``W`` (roots of ``W'``) inside ``bracket``."""
    a, b = bracket if bracket is not None else (surface.a, surface.b)
    if a < surface.a or b > surface.b or not a < b:
        raise DomainError(f"bracket {bracket} not inside ({surface.a}, {surface.b})")
    W = effective_potential(surface, potential, K)
    grid = sample_interval(a, b, resolution)
    roots = find_roots(lambda r: float(W.d1(r)), grid, dg=lambda r: float(W.d2(r)), tol=ROOT_TOL)
    out = []
    for r0 in roots:
        if not (a < r0 < b):
            continue
        w, _, w2 = W.all(r0)
        out.append(CircularOrbit(float(r0), float(K), float(w), float(w2), bool(w2 > 0),
                                 bool(abs(surface.df(r0)) < equator_tol)))
    return out
