"""Maupertuis (Jacobi) transform and the non-closed geodesic search.

At energy ``E`` the trajectories of ``(S, ds^2, V)`` are, up to
reparametrization, geodesics of ``g_E = (E - V) ds^2`` on ``{V < E}``. In
arclength form the transformed surface has

    dr~ = sqrt(E - V(r)) dr,    f~ = sqrt(E - V(r)) f(r),

with the same signature. The falsifier samples geodesics of ``g_E`` by
tangent class and looks for one that is not closed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .closure import closure_by_integration, turning_points
from .dynamics import (
    CentralPotential,
    ExitReason,
    PhaseState,
    constant_potential,
    effective_potential,
    energy,
    integrate,
    integrate_adaptive,
)
from .errors import NoDomainError, PreconditionError, UnboundedOrbitError
from .numerics import ReparametrizedChart, sample_interval
from .surface import ChartProfile, SurfaceOfRevolution, TangentClass, classify_tangent

NO_RETURN_MIN = 1e-2
NO_RETURN_WINDOW = 10
CORE_FRACTION = 0.9
FREE_POTENTIAL = constant_potential(0.0)


@dataclass(frozen=True)
class _ConformalWeight:
    """``w(r) = sqrt(E - V(r))`` on the base surface."""
    base: SurfaceOfRevolution
    potential: CentralPotential
    E: float

    def __call__(self, r):
        V = self.potential.evaluate(self.base, r)[0] + np.zeros_like(r, dtype=float)
        return np.sqrt(self.E - V)

    def derivative(self, r):
        V, V1, _ = self.potential.evaluate(self.base, r)
        return -0.5 * V1 / np.sqrt(self.E - V) + np.zeros_like(r, dtype=float)


@dataclass(frozen=True)
class _ConformalProfile:
    """``f~ = sqrt(q) f`` with ``q = E - V`` and its base-r derivatives."""
    base: SurfaceOfRevolution
    potential: CentralPotential
    E: float

    def __call__(self, r):
        f, f1, f2 = self.base.profile(r)
        V, V1, V2 = self.potential.evaluate(self.base, r)
        q = self.E - V
        sq = np.sqrt(q)
        sq1 = -0.5 * V1 / sq
        sq2 = -0.5 * V2 / sq - 0.25 * V1 * V1 / (q * sq)
        return sq * f, sq1 * f + sq * f1, sq2 * f + 2.0 * sq1 * f1 + sq * f2


@dataclass(frozen=True)
class MaupertuisSurface:
    base: SurfaceOfRevolution
    potential: CentralPotential
    E: float
    domain: tuple
    transformed: SurfaceOfRevolution
    chart: ReparametrizedChart

    def to_base(self, r_tilde):
        return self.chart.s_of(r_tilde)

    def from_base(self, r):
        return self.chart.r_of(r)

    def conformal_factor(self, r):
        return self.E - self.potential.evaluate(self.base, r)[0]


def _sublevel_component(surface, potential, E, r_ref, n=4000):
    """Component of ``{V < E}`` containing ``r_ref`` (or the longest one)."""
    from scipy.optimize import brentq

    xs = sample_interval(surface.a, surface.b, n)
    V = np.array([potential.evaluate(surface, float(x))[0] for x in xs])
    inside = V < E
    if not inside.any():
        raise NoDomainError(f"V >= E = {E} everywhere on the surface")
    comps, start = [], None
    for i, flag in enumerate(inside):
        if flag and start is None:
            start = i
        if not flag and start is not None:
            comps.append((start, i - 1))
            start = None
    if start is not None:
        comps.append((start, len(xs) - 1))
    if r_ref is not None:
        pick = [c for c in comps if xs[c[0]] <= r_ref <= xs[c[1]]]
        comp = pick[0] if pick else max(comps, key=lambda c: xs[c[1]] - xs[c[0]])
    else:
        comp = max(comps, key=lambda c: xs[c[1]] - xs[c[0]])
    g = lambda r: potential.evaluate(surface, r)[0] - E  # noqa: E731
    i, j = comp
    lo = surface.a if i == 0 else brentq(g, xs[i - 1], xs[i], xtol=1e-15)
    hi = surface.b if j == len(xs) - 1 else brentq(g, xs[j], xs[j + 1], xtol=1e-15)
    return lo, hi


def maupertuis_metric(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    E: float,
    r_ref: Optional[float] = None,
    extent: float = 100.0,
    trim: float = 1e-6,
    n_knots: int = 2049,
) -> MaupertuisSurface:
    """Conformal surface ``(E - V) ds^2`` on the sublevel set ``{V < E}``.

    Infinite domain ends are truncated ``extent`` away from the finite end;
    both ends are pulled in by ``trim`` times the domain length so that the
    conformal factor stays positive on the closed chart interval.
    """
    lo, hi = _sublevel_component(surface, potential, E, r_ref)
    if not math.isfinite(lo) and not math.isfinite(hi):
        lo, hi = -extent, extent
    elif not math.isfinite(hi):
        hi = lo + extent
    elif not math.isfinite(lo):
        lo = hi - extent
    pad = trim * (hi - lo)
    s_lo, s_hi = lo + pad, hi - pad
    weight = _ConformalWeight(surface, potential, E)
    chart = ReparametrizedChart(s_lo, s_hi, weight, weight.derivative, anchor=s_lo,
                                r_anchor=s_lo * float(weight(s_lo)), n=n_knots)
    transformed = SurfaceOfRevolution(
        chart.r_lo, chart.r_hi, ChartProfile(chart, _ConformalProfile(surface, potential, E)),
        surface.epsilon, chart_label="maupertuis", name=f"maupertuis[{surface.name}]",
        params={"E": E},
    )
    return MaupertuisSurface(surface, potential, E, (lo, hi), transformed, chart)


# --------------------------------------------------------------------------
# Trajectory / geodesic comparison
# --------------------------------------------------------------------------

def _directed_polyline_distance(A: np.ndarray, B: np.ndarray, k: int = 4) -> float:
    """``max_a min_{segment of B} dist(a, segment)``."""
    if len(B) == 1:
        return float(np.max(np.linalg.norm(A - B[0], axis=1)))
    tree = cKDTree(B)
    k = min(k, len(B))
    _, idx = tree.query(A, k=k)
    idx = idx.reshape(len(A), -1)
    best = np.full(len(A), np.inf)
    for col in range(idx.shape[1]):
        for off in (-1, 0):
            i0 = np.clip(idx[:, col] + off, 0, len(B) - 2)
            P, Q = B[i0], B[i0 + 1]
            d = Q - P
            L2 = np.einsum("ij,ij->i", d, d)
            t = np.where(L2 > 0, np.einsum("ij,ij->i", A - P, d) / np.where(L2 > 0, L2, 1.0), 0.0)
            t = np.clip(t, 0.0, 1.0)
            proj = P + t[:, None] * d
            best = np.minimum(best, np.linalg.norm(A - proj, axis=1))
    return float(np.max(best))


def hausdorff_polyline(A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two sampled curves (as polylines)."""
    return max(_directed_polyline_distance(A, B), _directed_polyline_distance(B, A))


@dataclass
class MatchResult:
    discrepancy: float
    partial: bool
    tau_end: float
    n_trajectory: int
    n_geodesic: int


def trajectory_geodesic_match(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    E: float,
    state0: PhaseState,
    t_end: float,
    step: float = 1e-3,
    scheme: str = "yoshida4",
) -> MatchResult:
    """Hausdorff distance in ``(r, phi)`` between the trajectory at energy ``E``
    and the ``g_E`` geodesic started in the same direction."""
    H = energy(surface, potential, state0)
    if abs(H - E) > 1e-9 * max(1.0, abs(E)):
        raise PreconditionError(f"state energy {H} differs from E = {E}")
    ms = maupertuis_metric(surface, potential, E, r_ref=state0.r)
    traj = integrate(surface, potential, state0, t_end, step, scheme=scheme)
    lo, hi = ms.chart.s_knots[0], ms.chart.s_knots[-1]
    partial = bool(traj.exit_reason is not ExitReason.TIME_BUDGET or traj.r.min() <= lo or traj.r.max() >= hi)
    q = np.array([ms.conformal_factor(float(r)) for r in traj.r])
    # Jacobi time: dtau = (E - V) dt
    tau_end = float(simpson(q, x=traj.t)) if len(traj.t) > 2 else float(np.trapz(q, traj.t))
    q0 = ms.conformal_factor(state0.r)
    geo0 = PhaseState(ms.from_base(state0.r), state0.phi, state0.p_r / math.sqrt(q0), state0.K)
    # step in tau scaled by the mean conformal factor keeps the two samplings aligned
    geo = integrate(ms.transformed, FREE_POTENTIAL, geo0, tau_end, step * tau_end / traj.t[-1], scheme=scheme)
    partial = partial or geo.exit_reason is not ExitReason.TIME_BUDGET
    A = np.column_stack([traj.r, traj.phi])
    B = np.column_stack([np.asarray(ms.to_base(geo.r)), geo.phi])
    return MatchResult(hausdorff_polyline(A, B), partial, tau_end, len(A), len(B))


# --------------------------------------------------------------------------
# Geodesic sampling and closure classification
# --------------------------------------------------------------------------

def unit_direction(epsilon: int, stratum: TangentClass, u: float, chi_max: float = 2.0) -> tuple[float, float]:
    """Orthonormal-frame components ``(a, b)`` = (radial, angular) of a sampled
    direction of the given class; ``u`` in ``[0, 1)``."""
    if epsilon == 1:
        if stratum is not TangentClass.SPACELIKE:
            raise PreconditionError("a Riemannian surface has only spacelike directions")
        ang = 2.0 * math.pi * u
        return math.cos(ang), math.sin(ang)
    sign = 1.0 if u < 0.5 else -1.0
    v = 2.0 * u if u < 0.5 else 2.0 * u - 1.0
    chi = chi_max * (2.0 * v - 1.0)
    if stratum is TangentClass.SPACELIKE:
        return sign * math.cosh(chi), math.sinh(chi)
    if stratum is TangentClass.TIMELIKE:
        return math.sinh(chi), sign * math.cosh(chi)
    return sign, 1.0 if v < 0.5 else -1.0


def geodesic_state(surface: SurfaceOfRevolution, r0: float, a: float, b: float, phi0: float = 0.0) -> PhaseState:
    """Geodesic with orthonormal velocity components ``(a, b)`` at ``r0``."""
    f = float(surface.f(r0))
    return PhaseState(float(r0), float(phi0), float(a), surface.epsilon * f * float(b))


def core_interval(surface: SurfaceOfRevolution, fraction: float = CORE_FRACTION) -> tuple[float, float]:
    a, b = surface.a, surface.b
    if not (math.isfinite(a) and math.isfinite(b)):
        raise PreconditionError("core interval needs a finite surface interval")
    pad = 0.5 * (1.0 - fraction) * (b - a)
    return a + pad, b - pad


def sample_geodesics(surface: SurfaceOfRevolution, n: int, stratum: TangentClass, seed: int = 0,
                     core: Optional[tuple] = None, chi_max: float = 2.0) -> list[PhaseState]:
    """``n`` geodesic initial conditions of one tangent class from a scrambled
    Halton sequence over (radius, direction)."""
    lo, hi = core if core is not None else core_interval(surface)
    pts = qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    out = []
    for u0, u1 in pts:
        a, b = unit_direction(surface.epsilon, stratum, float(u1), chi_max)
        out.append(geodesic_state(surface, lo + float(u0) * (hi - lo), a, b))
    return out


@dataclass
class GeodesicOutcome:
    kind: str  # closed | escaped_domain | no_return | not_closed | singular | undecided
    return_distance: float
    periods: int
    tangent: TangentClass


def classify_geodesic(surface: SurfaceOfRevolution, state: PhaseState, max_radial_periods: int = 50,
                      tol: float = 1e-6, escape_time: Optional[float] = None) -> GeodesicOutcome:
    """Closed, escaping or non-returning geodesic (``V = 0`` on ``surface``)."""
    tangent = classify_tangent(surface, state)
    if state.K == 0:
        return GeodesicOutcome("singular", math.inf, 0, tangent)
    W = effective_potential(surface, FREE_POTENTIAL, state.K)
    E = energy(surface, FREE_POTENTIAL, state)
    try:
        turning_points(W, E, state.r)
        bounded = True
    except UnboundedOrbitError:
        bounded = False
    if not bounded:
        speed = math.sqrt(state.p_r**2 + state.K**2 / surface.f(state.r) ** 2)
        t_budget = escape_time or 1e3 * (surface.b - surface.a) / max(speed, 1e-12)
        run = integrate_adaptive(surface, FREE_POTENTIAL, state, t_budget, rtol=1e-9, atol=1e-11)
        if run.exit_reason is ExitReason.LEFT_DOMAIN:
            return GeodesicOutcome("escaped_domain", math.inf, 0, tangent)
        return GeodesicOutcome("undecided", math.inf, 0, tangent)
    ret = closure_by_integration(surface, FREE_POTENTIAL, state, max_radial_periods, tol=tol)
    if ret.exit_reason is ExitReason.LEFT_DOMAIN:
        return GeodesicOutcome("escaped_domain", ret.return_distance, ret.periods, tangent)
    if ret.closed:
        return GeodesicOutcome("closed", ret.return_distance, ret.periods, tangent)
    d = ret.distances
    if (len(d) >= max_radial_periods and min(d) > NO_RETURN_MIN
            and min(d[-NO_RETURN_WINDOW:]) >= min(d[:-NO_RETURN_WINDOW])):
        return GeodesicOutcome("no_return", ret.return_distance, ret.periods, tangent)
    return GeodesicOutcome("not_closed", ret.return_distance, ret.periods, tangent)


# --------------------------------------------------------------------------
# Falsifier
# --------------------------------------------------------------------------

@dataclass
class Witness:
    trial: int
    E: float
    r0_base: float
    state: PhaseState  # on the Maupertuis surface
    tangent: TangentClass
    evidence: str

    def to_dict(self) -> dict:
        s = self.state
        return {
            "trial": self.trial,
            "E": self.E,
            "r0_base": self.r0_base,
            "state": {"r": s.r, "phi": s.phi, "p_r": s.p_r, "K": s.K},
            "state_hex": {"r": s.r.hex(), "phi": float(s.phi).hex(), "p_r": s.p_r.hex(), "K": s.K.hex()},
            "tangent_class": self.tangent.value,
            "evidence": self.evidence,
        }


@dataclass
class FalsifierReport:
    witness: Optional[Witness]
    trials: int
    budget: int
    E_list: list
    lightlike_witness: Optional[Witness] = None
    strata: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def evidence(self) -> str:
        return self.witness.evidence if self.witness else "resource_exhausted"

    def to_dict(self) -> dict:
        return {
            "evidence": self.evidence,
            "witness": self.witness.to_dict() if self.witness else None,
            "lightlike_witness": self.lightlike_witness.to_dict() if self.lightlike_witness else None,
            "trials": self.trials,
            "budget": self.budget,
            "E_list": list(self.E_list),
            "strata": self.strata,
        }


def default_energies(surface: SurfaceOfRevolution, potential: CentralPotential, n: int = 4000) -> list[float]:
    xs = sample_interval(surface.a, surface.b, n)
    v_inf = min(float(potential.evaluate(surface, float(x))[0]) for x in xs)
    return [v_inf + 1.0, v_inf + 10.0]


def _trial_plan(epsilon: int, budget: int, n_energies: int, seed: int):
    strata = ([TangentClass.TIMELIKE, TangentClass.SPACELIKE, TangentClass.LIGHTLIKE]
              if epsilon == -1 else [TangentClass.SPACELIKE])
    pts = qmc.Halton(d=2, scramble=True, seed=seed).random(budget)
    for i in range(budget):
        yield i, i % n_energies, strata[(i // n_energies) % len(strata)], float(pts[i, 0]), float(pts[i, 1])


def _run_trial(args) -> GeodesicOutcome:
    surface, state, max_radial_periods = args
    return classify_geodesic(surface, state, max_radial_periods)


FALSIFIER_CSV_HEADER = ("trial", "E", "tangent_class", "r0", "p_r", "K", "outcome", "return_distance", "periods")


def falsify_completely_bertrand(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    E_list: Optional[Sequence[float]] = None,
    budget: int = 200,
    allow_riemannian: bool = False,
    seed: int = 0,
    max_radial_periods: int = 50,
    jobs: int = 1,
) -> FalsifierReport:
    """Search the Maupertuis surfaces ``g_E`` for a geodesic that is not closed.

    Trials are judged in index order and the first timelike or spacelike
    witness ends the search, whatever ``jobs`` is; lightlike witnesses are
    kept separately.
    """
    if budget < 1:
        raise PreconditionError("budget must be at least 1")
    if surface.epsilon != -1 and not allow_riemannian:
        raise PreconditionError("falsifier expects a pseudo-Riemannian surface (epsilon = -1)")
    energies = list(E_list) if E_list is not None else default_energies(surface, potential)
    mss = [maupertuis_metric(surface, potential, E) for E in energies]
    plan = []
    for i, k, stratum, u0, u1 in _trial_plan(surface.epsilon, budget, len(energies), seed):
        S = mss[k].transformed
        lo, hi = core_interval(S)
        a, b = unit_direction(S.epsilon, stratum, u1)
        plan.append((i, k, stratum, geodesic_state(S, lo + u0 * (hi - lo), a, b)))

    report = FalsifierReport(None, 0, budget, energies)
    batch = 1 if jobs <= 1 else 2 * jobs
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for start in range(0, len(plan), batch):
            chunk = plan[start:start + batch]
            args = [(mss[k].transformed, st, max_radial_periods) for _, k, _, st in chunk]
            outcomes = list(pool.map(_run_trial, args)) if pool else [_run_trial(a) for a in args]
            for (i, k, stratum, state), out in zip(chunk, outcomes):
                report.trials += 1
                report.log.append((i, energies[k], stratum.value, state.r, state.p_r, state.K,
                                   out.kind, out.return_distance, out.periods))
                tally = report.strata.setdefault(stratum.value, {"trials": 0, "closed": 0, "witnesses": 0})
                tally["trials"] += 1
                tally["closed"] += out.kind == "closed"
                if out.kind not in ("escaped_domain", "no_return"):
                    continue
                tally["witnesses"] += 1
                w = Witness(i, energies[k], float(mss[k].to_base(state.r)), state, stratum, out.kind)
                if stratum is TangentClass.LIGHTLIKE:
                    report.lightlike_witness = report.lightlike_witness or w
                else:
                    report.witness = w
                    return report
    finally:
        if pool:
            pool.shutdown()
    return report
