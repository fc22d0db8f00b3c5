"""Surfaces of revolution ``ds^2 = dr^2 + eps * f(r)^2 dphi^2``.

Besides the generic :class:`SurfaceOfRevolution` container this module holds
the Bertrand metric family

    ds^2 = dtheta^2 / Psi^2 + dphi^2 / (mu * Psi),   Psi = theta^2 + c - delta/theta^2,

with its parameter-regime table, the Tannery (all geodesics closed) metrics,
and the built-in profile fixtures used across the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import InvalidFunctionError, InvalidIntervalError, InvalidSurfaceError, DomainError
from .numerics import ReparametrizedChart, find_roots, sample_interval

INF = math.inf
LIGHTLIKE_TOL = 1e-12
EQUATOR_TOL = 1e-10


# --------------------------------------------------------------------------
# Profiles. Each is a picklable callable r -> (f, f', f'').
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatProfile:
    def __call__(self, r):
        return r, np.ones_like(r) if np.ndim(r) else 1.0, np.zeros_like(r) if np.ndim(r) else 0.0


@dataclass(frozen=True)
class SineProfile:
    """f = R sin(r/R), the round sphere of radius R."""
    R: float = 1.0

    def __call__(self, r):
        x = r / self.R
        return self.R * np.sin(x), np.cos(x), -np.sin(x) / self.R


@dataclass(frozen=True)
class CoshProfile:
    def __call__(self, r):
        return np.cosh(r), np.sinh(r), np.cosh(r)


@dataclass(frozen=True)
class OffsetSineProfile:
    """f = A + sin r; for A > 1 this has an equator at every pi/2 + k pi."""
    A: float = 2.0

    def __call__(self, r):
        return self.A + np.sin(r), np.cos(r), -np.sin(r)


@dataclass(frozen=True)
class SplineProfile:
    """Cubic-spline profile through sampled ``(r, f)`` pairs."""
    r_samples: tuple
    f_samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicSpline(np.asarray(self.r_samples), np.asarray(self.f_samples)))

    def __call__(self, r):
        sp = self._spline
        vals = sp(r), sp(r, 1), sp(r, 2)
        if np.ndim(r) == 0:
            return tuple(float(v) for v in vals)
        return vals


@dataclass(frozen=True)
class ChartProfile:
    """Profile given in an auxiliary coordinate s, pulled back to arclength.

    ``in_s`` maps s -> (f, df/ds, d2f/ds2); ``chart`` maps r -> (s, s', s'').
    """
    chart: ReparametrizedChart
    in_s: Callable

    def __call__(self, r):
        s, s1, s2 = self.chart(r)
        f, fs, fss = self.in_s(s)
        return f, fs * s1, fss * s1 * s1 + fs * s2


@dataclass(frozen=True)
class InverseRadiusChart:
    """theta = 1/r, the Bertrand chart of the flat plane (mu=1, c=0, delta=0)."""

    def __call__(self, r):
        return 1.0 / r, -1.0 / r**2, 2.0 / r**3


# --------------------------------------------------------------------------
# Surface container
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceOfRevolution:
    """The configuration space ``(a, b) x S^1`` with profile ``f`` and sign ``epsilon``.

    ``theta_chart`` is present for Bertrand pullbacks (and the flat plane) and
    maps r -> (theta, dtheta/dr, d2theta/dr2); potentials written in theta need it.
    """
    a: float
    b: float
    profile: Callable
    epsilon: int = 1
    chart_label: str = "arclength-r"
    name: str = "custom"
    theta_chart: Optional[Callable] = None
    family: Optional["BertrandFamily"] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epsilon not in (1, -1):
            raise InvalidSurfaceError(f"epsilon must be +1 or -1, got {self.epsilon}")
        if not self.a < self.b:
            raise InvalidSurfaceError(f"empty interval ({self.a}, {self.b})")
        fs = np.array([self.f(float(r)) for r in sample_interval(self.a, self.b, 257)])
        if not np.all(np.isfinite(fs)) or np.any(fs == 0.0) or (fs.min() < 0.0 < fs.max()):
            raise InvalidSurfaceError("profile must be finite and nonvanishing on the open interval")

    @property
    def riemannian(self) -> bool:
        return self.epsilon == 1

    def f(self, r):
        return self.profile(r)[0]

    def df(self, r):
        return self.profile(r)[1]

    def d2f(self, r):
        return self.profile(r)[2]

    def contains(self, r: float) -> bool:
        return self.a < r < self.b

    def describe(self) -> dict:
        out = {"name": self.name, "a": self.a, "b": self.b, "epsilon": self.epsilon, "chart": self.chart_label}
        out.update(self.params)
        return out


def equators(surface: SurfaceOfRevolution, resolution: int = 2000) -> list[float]:
    """Radii ``r0`` in ``(a, b)`` with ``f'(r0) = 0``."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    grid = sample_interval(surface.a, surface.b, resolution)
    roots = find_roots(lambda r: float(surface.df(r)), grid, dg=lambda r: float(surface.d2f(r)), tol=EQUATOR_TOL)
    return [r for r in roots if surface.contains(r)]


class TangentClass(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


def tangent_norm(surface: SurfaceOfRevolution, r: float, p_r: float, K: float) -> float:
    """Squared length ``rdot^2 + eps f^2 phidot^2`` with ``phidot = eps K / f^2``."""
    f = surface.f(r)
    return p_r * p_r + surface.epsilon * K * K / (f * f)


def classify_tangent(surface: SurfaceOfRevolution, state) -> TangentClass:
    f = surface.f(state.r)
    kin = state.p_r**2 + state.K**2 / f**2
    value = tangent_norm(surface, state.r, state.p_r, state.K)
    if abs(value) <= LIGHTLIKE_TOL * max(kin, 1e-300):
        return TangentClass.LIGHTLIKE
    return TangentClass.SPACELIKE if value > 0 else TangentClass.TIMELIKE


# --------------------------------------------------------------------------
# Bertrand family
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BertrandFamily:
    mu: Fraction
    c: float
    delta: float

    def __post_init__(self):
        mu = Fraction(self.mu)
        if mu <= 0:
            raise DomainError("mu must be a positive rational")
        object.__setattr__(self, "mu", mu)

    @property
    def mu_pair(self) -> tuple[int, int]:
        return self.mu.numerator, self.mu.denominator


def psi(theta, family: BertrandFamily):
    """Psi(theta) = theta^2 + c - delta / theta^2."""
    if np.any(np.asarray(theta) <= 0):
        raise DomainError("theta must be positive")
    return theta * theta + family.c - family.delta / (theta * theta)


def dpsi(theta, family: BertrandFamily):
    return 2.0 * theta + 2.0 * family.delta / theta**3


def d2psi(theta, family: BertrandFamily):
    return 2.0 - 6.0 * family.delta / theta**4


def psi_roots(family: BertrandFamily) -> list[float]:
    """Positive roots of ``theta^4 + c theta^2 - delta = 0``."""
    c, d = family.c, family.delta
    disc = c * c + 4.0 * d
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    # stable quadratic roots in u = theta^2
    if c >= 0:
        q = -0.5 * (c + sq)
    else:
        q = -0.5 * (c - sq)
    us = []
    if q != 0.0:
        us = [q, -d / q]
    elif d == 0.0:
        us = [0.0, -c]
    us = sorted({u for u in us if u > 0.0})
    return [math.sqrt(u) for u in us]


class Regime(str, Enum):
    ROW1 = "c>=0, delta=0"
    ROW2 = "c<0, delta=0"
    ROW3 = "delta>0"
    ROW4 = "delta<0, c<0, c^2+4delta>0"
    ROW5 = "delta<0, (c>0, c^2+4delta>0) or c^2+4delta<=0"

    @property
    def row(self) -> int:
        return list(Regime).index(self) + 1


@dataclass(frozen=True)
class RegimeReport:
    family: BertrandFamily
    regime: Regime
    psi_roots: list
    riemannian_intervals: list
    pseudo_intervals: list
    equator_theta: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "c": self.family.c,
            "delta": self.family.delta,
            "mu": f"{self.family.mu.numerator}/{self.family.mu.denominator}",
            "regime_row": self.regime.row,
            "regime": self.regime.value,
            "psi_roots": list(self.psi_roots),
            "riemannian_intervals": [list(iv) for iv in self.riemannian_intervals],
            "pseudo_intervals": [list(iv) for iv in self.pseudo_intervals],
            "equator_theta": self.equator_theta,
        }


def classify_regime(family: BertrandFamily) -> RegimeReport:
    c, d = family.c, family.delta
    roots = psi_roots(family)
    eq = (-d) ** 0.25 if d < 0 else None
    disc = c * c + 4.0 * d
    if d == 0 and c >= 0:
        regime, riem, pseudo = Regime.ROW1, [(0.0, INF)], []
    elif d == 0:
        s = math.sqrt(-c)
        regime, riem, pseudo = Regime.ROW2, [(s, INF)], [(0.0, s)]
    elif d > 0:
        t2 = roots[-1]
        regime, riem, pseudo = Regime.ROW3, [(t2, INF)], [(0.0, t2)]
    elif c < 0 and disc > 0:
        t1, t2 = roots
        regime, riem, pseudo = Regime.ROW4, [(0.0, t1), (t2, INF)], [(t1, eq), (eq, t2)]
    else:
        regime, riem, pseudo = Regime.ROW5, [(0.0, eq), (eq, INF)], []
    return RegimeReport(family, regime, roots, riem, pseudo, eq)


@dataclass(frozen=True)
class _BertrandWeight:
    family: BertrandFamily

    def __call__(self, theta):
        return 1.0 / np.abs(psi(theta, self.family))

    def derivative(self, theta):
        p = psi(theta, self.family)
        return -np.sign(p) * dpsi(theta, self.family) / p**2


@dataclass(frozen=True)
class _BertrandThetaProfile:
    """f(theta) = (mu |Psi|)^(-1/2) and its theta-derivatives."""
    family: BertrandFamily

    def __call__(self, theta):
        fam = self.family
        mu = float(fam.mu)
        p = psi(theta, fam)
        s = np.sign(p)
        ap = np.abs(p)
        dp, ddp = dpsi(theta, fam), d2psi(theta, fam)
        f = (mu * ap) ** -0.5
        # d|Psi| = s dPsi
        f1 = -0.5 * mu**-0.5 * ap**-1.5 * s * dp
        f2 = 0.75 * mu**-0.5 * ap**-2.5 * dp * dp - 0.5 * mu**-0.5 * ap**-1.5 * s * ddp
        return f, f1, f2


def bertrand_surface(family: BertrandFamily, interval: tuple[float, float], n_knots: int = 2049) -> SurfaceOfRevolution:
    """Bertrand metric pulled back to arclength, ``r(theta) = int dtheta/|Psi|``
    measured from the midpoint of ``interval``.

    ``interval`` must be a finite ``[theta_lo, theta_hi]`` with ``theta_lo > 0``
    lying inside a single interval of :func:`classify_regime`.
    """
    lo, hi = map(float, interval)
    if not (0.0 < lo < hi < INF):
        raise InvalidIntervalError(f"theta interval must satisfy 0 < lo < hi < inf, got {interval}")
    report = classify_regime(family)
    host = None
    for iv in report.riemannian_intervals + report.pseudo_intervals:
        if iv[0] <= lo and hi <= iv[1]:
            host = iv
            break
    if host is None:
        raise InvalidIntervalError(
            f"theta interval {interval} crosses a root of Psi or the equator value; "
            f"admissible intervals: {report.riemannian_intervals + report.pseudo_intervals}"
        )
    p_lo, p_hi = psi(lo, family), psi(hi, family)
    if p_lo == 0.0 or p_hi == 0.0 or (report.equator_theta is not None and lo <= report.equator_theta <= hi):
        raise InvalidIntervalError(f"theta interval {interval} touches a root of Psi or the equator value")
    weight = _BertrandWeight(family)
    chart = ReparametrizedChart(lo, hi, weight, weight.derivative, n=n_knots)
    eps = 1 if p_lo > 0 else -1
    return SurfaceOfRevolution(
        a=chart.r_lo,
        b=chart.r_hi,
        profile=ChartProfile(chart, _BertrandThetaProfile(family)),
        epsilon=eps,
        chart_label="bertrand-theta-pullback",
        name="bertrand",
        theta_chart=chart,
        family=family,
        params={"mu": f"{family.mu.numerator}/{family.mu.denominator}", "c": family.c, "delta": family.delta,
                "theta_lo": lo, "theta_hi": hi},
    )


# --------------------------------------------------------------------------
# Tannery metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TanneryMetric:
    """``R^2((1 + h(cos psi))^2 / beta^2 dpsi^2 + sin^2 psi dphi^2)``.

    ``h_coeffs`` are ascending polynomial coefficients of the odd function h.
    """
    R: float = 1.0
    beta: Fraction = Fraction(1)
    h_coeffs: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "beta", Fraction(self.beta))
        object.__setattr__(self, "h_coeffs", tuple(float(c) for c in self.h_coeffs))
        if self.R <= 0 or self.beta <= 0:
            raise DomainError("R and beta must be positive")

    @property
    def h(self) -> Polynomial:
        return Polynomial(self.h_coeffs)

    def validate(self, n: int = 401) -> None:
        x = np.linspace(-1.0, 1.0, n + 2)[1:-1]
        h = self.h
        hx = h(x)
        if np.max(np.abs(hx + h(-x))) > 1e-12:
            raise InvalidFunctionError("h must be odd: h(-x) = -h(x)")
        if np.max(np.abs(hx)) >= 1.0:
            raise InvalidFunctionError("h must map (-1, 1) into (-1, 1)")


@dataclass(frozen=True)
class _TanneryWeight:
    scale: float
    h: Polynomial
    dh: Polynomial

    def __call__(self, psi_):
        return self.scale * (1.0 + self.h(np.cos(psi_)))

    def derivative(self, psi_):
        return -self.scale * self.dh(np.cos(psi_)) * np.sin(psi_)


@dataclass(frozen=True)
class _TanneryPsiProfile:
    R: float

    def __call__(self, psi_):
        return self.R * np.sin(psi_), self.R * np.cos(psi_), -self.R * np.sin(psi_)


def tannery_surface(metric: TanneryMetric, n_knots: int = 2049) -> SurfaceOfRevolution:
    metric.validate()
    h = metric.h
    weight = _TanneryWeight(metric.R / float(metric.beta), h, h.deriv())
    chart = ReparametrizedChart(0.0, math.pi, weight, weight.derivative, anchor=0.0, r_anchor=0.0, n=n_knots)
    return SurfaceOfRevolution(
        a=chart.r_lo,
        b=chart.r_hi,
        profile=ChartProfile(chart, _TanneryPsiProfile(metric.R)),
        epsilon=1,
        chart_label="tannery-psi-pullback",
        name="tannery",
        params={"R": metric.R, "beta": f"{metric.beta.numerator}/{metric.beta.denominator}",
                "h_coeffs": list(metric.h_coeffs)},
    )


# --------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------

def flat_plane(b: float = INF) -> SurfaceOfRevolution:
    """Euclidean plane in polar coordinates; carries the theta = 1/r Bertrand chart."""
    return SurfaceOfRevolution(0.0, b, FlatProfile(), 1, name="flat", theta_chart=InverseRadiusChart(),
                               family=BertrandFamily(Fraction(1), 0.0, 0.0))


def round_sphere(R: float = 1.0) -> SurfaceOfRevolution:
    return SurfaceOfRevolution(0.0, math.pi * R, SineProfile(R), 1, name="sphere", params={"R": R})


def de_sitter(a: float = -5.0, b: float = 5.0) -> SurfaceOfRevolution:
    """``dr^2 - cosh(r)^2 dphi^2``: equator at r = 0."""
    return SurfaceOfRevolution(a, b, CoshProfile(), -1, name="de_sitter")


def cosh_surface(a: float = -5.0, b: float = 5.0, epsilon: int = 1) -> SurfaceOfRevolution:
    return SurfaceOfRevolution(a, b, CoshProfile(), epsilon, name="cosh")


def multi_equator(A: float = 2.0, a: float = 0.0, b: float = 4 * math.pi, epsilon: int = 1) -> SurfaceOfRevolution:
    return SurfaceOfRevolution(a, b, OffsetSineProfile(A), epsilon, name="multi_equator", params={"A": A})


def spline_surface(r_samples: Sequence[float], f_samples: Sequence[float], epsilon: int = 1) -> SurfaceOfRevolution:
    r = tuple(float(x) for x in r_samples)
    f = tuple(float(x) for x in f_samples)
    if len(r) < 4 or any(y <= x for x, y in zip(r, r[1:])):
        raise InvalidSurfaceError("spline profile needs at least 4 strictly increasing r samples")
    return SurfaceOfRevolution(r[0], r[-1], SplineProfile(r, f), epsilon, name="spline")


def bertrand_belt(lo: float = 0.05, hi: float = 0.95) -> SurfaceOfRevolution:
    """Pseudo-Riemannian belt of (mu=1, c=-1, delta=0), where Psi < 0 on (0, 1)."""
    return bertrand_surface(BertrandFamily(Fraction(1), -1.0, 0.0), (lo, hi))
