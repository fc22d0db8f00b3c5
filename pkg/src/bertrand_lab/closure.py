"""Closure of bounded orbits.

Two independent routes decide whether a bounded, nonsingular orbit closes:

* the apsidal angle ``Phi`` (pericenter to apocenter sweep in ``phi``) from
  a singular quadrature, followed by a continued-fraction test of ``Phi/pi``;
* direct integration with pericenter events, checking whether some
  pericenter passage returns to the starting point modulo ``2 pi``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .dynamics import (
    CentralPotential,
    EffectivePotential,
    ExitReason,
    PhaseState,
    circular_orbits,
    effective_potential,
    energy,
    integrate_adaptive,
)
from .errors import DomainError, PreconditionError, UnboundedOrbitError
from .numerics import sample_interval
from .surface import SurfaceOfRevolution

Q_MAX = 50
RETURN_TOL = 1e-6
MAX_RADIAL_PERIODS = 50
RATIONAL_TOL_FLOOR = 1e-9


@dataclass(frozen=True)
class TurningPoints:
    r_minus: float
    r_plus: float
    degenerate: bool = False


@dataclass(frozen=True)
class ApsidalResult:
    phi_half: float
    err: float
    converged: bool = True
    nodes: int = 0


@dataclass(frozen=True)
class RationalityVerdict:
    is_rational: bool
    p: int
    q: int
    residual: float


class Verdict(str, Enum):
    CLOSED = "closed"
    NOT_CLOSED = "not_closed"
    INCONCLUSIVE = "inconclusive"


# --------------------------------------------------------------------------
# Turning points
# --------------------------------------------------------------------------

def _outward_root(g, seed: float, direction: int, boundary: float, h0: float) -> float:
    """First sign change of ``g`` (positive at ``seed``) walking toward ``boundary``."""
    x_prev, h = seed, h0
    while True:
        x = x_prev + direction * h
        if math.isfinite(boundary) and direction * (x - boundary) >= 0:
            # close in on the boundary geometrically
            x = x_prev + 0.5 * (boundary - x_prev)
            if abs(boundary - x_prev) < 1e-13 * max(1.0, abs(boundary)):
                raise UnboundedOrbitError(f"no turning point before boundary {boundary}")
        elif abs(x) > 1e12:
            raise UnboundedOrbitError("no turning point before infinity")
        gx = g(x)
        if not math.isfinite(gx) or gx <= 0.0:
            break
        x_prev, h = x, h * 1.25
    if not math.isfinite(gx):
        # g blows down at a boundary singularity; bisect on finiteness first
        lo, hi = x_prev, x
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if math.isfinite(gm) and gm > 0:
                lo = mid
            elif math.isfinite(gm):
                hi, gx = mid, gm
                break
            else:
                hi = mid
        else:
            raise UnboundedOrbitError("turning point search hit a singular boundary")
        x = hi
    from scipy.optimize import brentq

    a, b = (x_prev, x) if x_prev < x else (x, x_prev)
    root = brentq(g, a, b, xtol=1e-15 * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps)
    # keep E - W >= 0 at the returned point
    for _ in range(64):
        if g(root) >= 0.0:
            break
        root = np.nextafter(root, seed)
    return float(root)


def turning_points(W: EffectivePotential, E: float, r_seed: float, tol: float = 1e-12) -> TurningPoints:
    """Nearest roots of ``E - W`` on either side of ``r_seed``."""
    s = W.surface
    if not s.contains(r_seed):
        raise DomainError(f"seed {r_seed} outside ({s.a}, {s.b})")
    g = lambda r: E - W(r)  # noqa: E731
    g0 = g(r_seed)
    scale = max(1.0, abs(E))
    if g0 < -tol * scale:
        raise DomainError(f"W(seed) = {E - g0} exceeds E = {E}")
    width = s.b - s.a
    h0 = 1e-4 * (min(width, max(1.0, abs(r_seed))) if math.isfinite(width) else max(1.0, abs(r_seed)))
    if g0 < tol * scale:
        _, w1, w2 = W.all(r_seed)
        if w2 > 0 and abs(w1) * h0 < tol * scale:
            return TurningPoints(r_seed, r_seed, True)
        # seed sits on a turning point: step into the allowed region
        step = h0 * 1e-6
        for _ in range(60):
            trial = r_seed - math.copysign(step, w1)
            if s.contains(trial) and g(trial) > 0:
                r_seed = trial
                break
            step *= 2.0
        else:
            raise DomainError("seed is an isolated point of the allowed region")
    r_minus = _outward_root(g, r_seed, -1, s.a, h0)
    r_plus = _outward_root(g, r_seed, +1, s.b, h0)
    return TurningPoints(r_minus, r_plus, False)


# --------------------------------------------------------------------------
# Apsidal angle
# --------------------------------------------------------------------------

def _sin2_midpoint(integrand, n: int) -> float:
    """Midpoint rule for ``int_0^{pi/2} integrand(u) du``.

    After the ``sin^2`` substitution the integrand extends to a smooth
    periodic function, so the rule converges geometrically.
    """
    u = (np.arange(n) + 0.5) * (0.5 * math.pi / n)
    return float(np.sum(integrand(u)) * (0.5 * math.pi / n))


def _radial_integrand(W: EffectivePotential, E: float, tp: TurningPoints, weight):
    r_lo, span = tp.r_minus, tp.r_plus - tp.r_minus
    # slopes of E - W at the turning points, used where E - W drowns in rounding
    a = -float(W.d1(tp.r_minus)) * span
    b = float(W.d1(tp.r_plus)) * span
    eps = np.finfo(float).eps

    def integrand(u):
        su, cu = np.sin(u), np.cos(u)
        r = r_lo + span * su * su
        Wr = W(r)
        D = E - Wr
        lin = np.where(su < cu, a * su * su, b * cu * cu)
        D = np.where(D > 1e3 * eps * (abs(E) + np.abs(Wr)), D, lin)
        D = np.maximum(D, np.finfo(float).tiny)
        return weight(r) * 2.0 * span * su * cu / np.sqrt(2.0 * D)
    return integrand


def _adaptive_sin2(integrand, tol: float, n0: int = 64, n_max: int = 1 << 18) -> ApsidalResult:
    n = n0
    prev = _sin2_midpoint(integrand, n)
    while True:
        n *= 2
        cur = _sin2_midpoint(integrand, n)
        err = abs(cur - prev)
        if err <= tol * max(1.0, abs(cur)):
            return ApsidalResult(cur, err, True, n)
        if n >= n_max:
            return ApsidalResult(cur, err, False, n)
        prev = cur


def apsidal_angle(surface: SurfaceOfRevolution, potential: CentralPotential, E: float, K: float,
                  turning: TurningPoints, tol: float = 1e-10) -> ApsidalResult:
    """``Phi = int_{r-}^{r+} |K| / f^2 / sqrt(2 (E - W)) dr`` via ``r = r- + (r+ - r-) sin^2 u``."""
    if turning.degenerate or turning.r_plus <= turning.r_minus:
        raise PreconditionError("apsidal angle needs non-degenerate turning points")
    if K == 0:
        raise PreconditionError("singular orbit (K = 0) has no apsidal angle")
    W = effective_potential(surface, potential, K)
    absK = abs(K)
    integrand = _radial_integrand(W, E, turning, lambda r: absK / surface.f(r) ** 2)
    return _adaptive_sin2(integrand, tol)


def radial_period(W: EffectivePotential, E: float, turning: TurningPoints, tol: float = 1e-12) -> float:
    """Time from pericenter back to pericenter."""
    integrand = _radial_integrand(W, E, turning, lambda r: 1.0)
    return 2.0 * _adaptive_sin2(integrand, tol).phi_half


def circular_limit(surface: SurfaceOfRevolution, potential: CentralPotential, K: float, r0: float) -> float:
    """Small-oscillation apsidal angle ``pi |K| / (|f(r0)^2| sqrt(W''(r0)))``."""
    W = effective_potential(surface, potential, K)
    return math.pi * abs(K) / (abs(surface.f(r0) ** 2) * math.sqrt(W.d2(r0)))


# --------------------------------------------------------------------------
# Rationality
# --------------------------------------------------------------------------

def convergents(x: float, q_max: int):
    """Continued-fraction convergents ``(p, q)`` of ``x`` with ``q <= q_max``."""
    p0, q0, p1, q1 = 0, 1, 1, 0
    y = x
    for _ in range(64):
        a = math.floor(y)
        p2, q2 = a * p1 + p0, a * q1 + q0
        if q2 > q_max:
            return
        yield p2, q2
        frac = y - a
        if frac == 0.0:
            return
        y = 1.0 / frac
        p0, q0, p1, q1 = p1, q1, p2, q2


def detect_rational(x: float, q_max: int = Q_MAX, tol: float = RATIONAL_TOL_FLOOR) -> RationalityVerdict:
    if not math.isfinite(x):
        raise DomainError("x must be finite")
    best = None
    for p, q in convergents(x, q_max):
        res = abs(x - p / q)
        if res <= tol:
            return RationalityVerdict(True, p, q, res)
        best = (p, q, res)
    if best is None:
        return RationalityVerdict(False, 0, 1, abs(x))
    return RationalityVerdict(False, *best)


# --------------------------------------------------------------------------
# Closure by direct integration
# --------------------------------------------------------------------------

@dataclass
class ReturnTest:
    closed: bool
    return_distance: float
    periods: int
    distances: list = field(default_factory=list)
    exit_reason: ExitReason = ExitReason.TIME_BUDGET


def _pericenter(t, y):
    return y[1]


_pericenter.direction = 1.0


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def closure_by_integration(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    state0: PhaseState,
    max_radial_periods: int = MAX_RADIAL_PERIODS,
    tol: float = RETURN_TOL,
    rtol: float = 1e-10,
    chunk: int = 5,
    stop_on_close: bool = True,
) -> ReturnTest:
    """Integrate and compare pericenter passages with the first one."""
    W = effective_potential(surface, potential, state0.K)
    E = energy(surface, potential, state0)
    tp = turning_points(W, E, state0.r)
    if tp.degenerate:
        return ReturnTest(True, 0.0, 0, [0.0])
    T = radial_period(W, E, tp)
    ref = None
    dists: list[float] = []
    t0, state = 0.0, state0
    total_t = (max_radial_periods + 1.25) * T
    while t0 < total_t:
        span = min(chunk * T, total_t - t0)
        run = integrate_adaptive(surface, potential, state, span, rtol=rtol, atol=rtol * 1e-1,
                                 events=(_pericenter,))
        for ye in run.y_events[0]:
            r_e, phi_e = float(ye[0]), float(ye[2])
            if ref is None:
                ref = (r_e, phi_e)
                continue
            d = math.hypot(r_e - ref[0], _wrap(phi_e - ref[1]))
            dists.append(d)
            if d < tol and stop_on_close:
                return ReturnTest(True, min(dists), len(dists), dists)
            if len(dists) >= max_radial_periods:
                break
        if run.exit_reason is not ExitReason.TIME_BUDGET:
            return ReturnTest(False, min(dists) if dists else math.inf, len(dists), dists, run.exit_reason)
        if len(dists) >= max_radial_periods:
            break
        y = run.y[:, -1]
        t0 += float(run.t[-1])
        state = PhaseState(float(y[0]), float(y[2]), float(y[1]), state0.K)
    best = min(dists) if dists else math.inf
    return ReturnTest(best < tol, best, len(dists), dists)


# --------------------------------------------------------------------------
# Reports and scans
# --------------------------------------------------------------------------

@dataclass
class ClosureReport:
    E: float
    K: float
    turning: TurningPoints
    apsidal: ApsidalResult
    rationality: RationalityVerdict
    poincare_confirmed: bool
    return_distance: float
    verdict: Verdict

    @property
    def phi_over_pi(self) -> float:
        return self.apsidal.phi_half / math.pi


def potential_wells(W: EffectivePotential, resolution: int = 4000) -> list:
    """Strongly stable circular orbits of ``W`` sorted by depth."""
    s = W.surface
    orbits = [o for o in circular_orbits(s, W.potential, W.K, resolution=resolution) if o.strongly_stable]
    return sorted(orbits, key=lambda o: o.E0)


def closure_report(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    E: float,
    K: float,
    q_max: int = Q_MAX,
    max_radial_periods: int = MAX_RADIAL_PERIODS,
    r_seed: Optional[float] = None,
) -> ClosureReport:
    if K == 0:
        raise PreconditionError("singular orbit (K = 0) excluded")
    W = effective_potential(surface, potential, K)
    if r_seed is None:
        wells = [o for o in potential_wells(W) if o.E0 <= E]
        if not wells:
            raise UnboundedOrbitError(f"no potential well below E = {E} for K = {K}")
        r_seed = wells[0].r0
    tp = turning_points(W, E, r_seed)
    if tp.degenerate:
        phi = circular_limit(surface, potential, K, tp.r_minus)
        ap = ApsidalResult(phi, 0.0)
        rat = detect_rational(phi / math.pi, q_max, RATIONAL_TOL_FLOOR)
        return ClosureReport(E, K, tp, ap, rat, True, 0.0, Verdict.CLOSED)
    ap = apsidal_angle(surface, potential, E, K, tp)
    rat = detect_rational(ap.phi_half / math.pi, q_max, max(10.0 * ap.err, RATIONAL_TOL_FLOOR))
    ret = closure_by_integration(surface, potential, PhaseState(tp.r_minus, 0.0, 0.0, K), max_radial_periods)
    if not ap.converged or ret.exit_reason is not ExitReason.TIME_BUDGET:
        verdict = Verdict.INCONCLUSIVE
    elif rat.is_rational and ret.closed:
        verdict = Verdict.CLOSED
    elif not rat.is_rational and not ret.closed:
        verdict = Verdict.NOT_CLOSED
    else:
        verdict = Verdict.INCONCLUSIVE
    return ClosureReport(E, K, tp, ap, rat, ret.closed, ret.return_distance, verdict)


def well_rims(W: EffectivePotential, r0: float, resolution: int = 4000) -> tuple[float, float]:
    """Highest ``W`` between the well at ``r0`` and each boundary (sampled)."""
    s = W.surface
    left = sample_interval(s.a, r0, resolution)
    right = sample_interval(r0, s.b, resolution)
    wl = np.array([W(float(r)) for r in left])
    wr = np.array([W(float(r)) for r in right])
    # the barrier is the highest point between the well and the boundary
    return float(np.nanmax(wl)), float(np.nanmax(wr))


def bound_orbit_grid(surface: SurfaceOfRevolution, potential: CentralPotential, K_values: Iterable[float],
                     fractions: Sequence[float]) -> list[tuple[float, float]]:
    """``(E, K)`` pairs at the given fractions of each well's depth.

    For each ``K`` the deepest well ``W0`` and its lower rim ``E_rim`` are
    located and ``E = W0 + frac * (E_rim - W0)``; an open-topped well is
    capped at ``W0 + max(1, |W0|)``.
    """
    grid = []
    for K in K_values:
        W = effective_potential(surface, potential, K)
        wells = potential_wells(W)
        if not wells:
            continue
        w0 = wells[0]
        rim = min(well_rims(W, w0.r0))
        rim = min(rim, w0.E0 + max(1.0, abs(w0.E0)))
        for fr in fractions:
            grid.append((w0.E0 + fr * (rim - w0.E0), float(K)))
    return grid


class PointStatus(str, Enum):
    CLOSED = "closed"
    NOT_CLOSED = "not_closed"
    INCONCLUSIVE = "inconclusive"
    UNBOUNDED = "unbounded"
    SINGULAR = "singular"
    OUTSIDE_RING = "outside_ring"


@dataclass
class ScanRow:
    E: float
    K: float
    status: PointStatus
    report: Optional[ClosureReport] = None

    def csv_row(self) -> tuple:
        rep = self.report
        if rep is None:
            return (self.E, self.K, None, None, None, None, None, self.status.value)
        rat = rep.rationality
        return (self.E, self.K, rep.turning.r_minus, rep.turning.r_plus, rep.phi_over_pi,
                rat.p if rat.is_rational else None, rat.q if rat.is_rational else None, self.status.value)


SCAN_CSV_HEADER = ("E", "K", "r_minus", "r_plus", "phi_over_pi", "p", "q", "verdict")


@dataclass
class ScanSummary:
    rows: list
    counts: dict
    witnesses: list
    exists: bool
    forall: bool

    @property
    def closing_evidence(self) -> bool:
        return self.exists and self.forall

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "witnesses": [list(w) for w in self.witnesses],
                "exists": self.exists, "forall": self.forall, "closing_evidence": self.closing_evidence}


@dataclass(frozen=True)
class Ring:
    r0: float
    eps: float
    K0: Optional[float] = None


def _scan_point(args) -> ScanRow:
    surface, potential, E, K, ring, q_max, max_periods = args
    if K == 0:
        return ScanRow(E, K, PointStatus.SINGULAR)
    if ring is not None and ring.K0 is not None and abs(K - ring.K0) >= ring.eps:
        return ScanRow(E, K, PointStatus.OUTSIDE_RING)
    try:
        seed = ring.r0 if ring is not None else None
        rep = closure_report(surface, potential, E, K, q_max, max_periods, r_seed=seed)
    except (UnboundedOrbitError, DomainError):
        return ScanRow(E, K, PointStatus.UNBOUNDED)
    if ring is not None and not (ring.r0 - ring.eps <= rep.turning.r_minus and rep.turning.r_plus <= ring.r0 + ring.eps):
        return ScanRow(E, K, PointStatus.OUTSIDE_RING, rep)
    return ScanRow(E, K, PointStatus(rep.verdict.value), rep)


def default_jobs() -> int:
    env = os.environ.get("BERTRAND_LAB_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def scan_closing(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    grid: Sequence[tuple[float, float]],
    ring: Optional[Ring] = None,
    q_max: int = Q_MAX,
    max_radial_periods: int = MAX_RADIAL_PERIODS,
    jobs: int = 1,
) -> ScanSummary:
    """Closure reports over a grid of ``(E, K)``; results keep grid order."""
    if not grid:
        raise DomainError("scan grid is empty")
    tasks = [(surface, potential, float(E), float(K), ring, q_max, max_radial_periods) for E, K in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_point, tasks))
    else:
        rows = [_scan_point(t) for t in tasks]
    counts = {s.value: 0 for s in PointStatus}
    for row in rows:
        counts[row.status.value] += 1
    witnesses = [(row.E, row.K) for row in rows if row.status is PointStatus.NOT_CLOSED]
    considered = [r for r in rows if r.status in (PointStatus.CLOSED, PointStatus.NOT_CLOSED, PointStatus.INCONCLUSIVE)]
    exists = any(not r.report.turning.degenerate for r in considered)
    forall = bool(considered) and all(r.status is PointStatus.CLOSED for r in considered)
    return ScanSummary(rows, counts, witnesses, exists, forall)
