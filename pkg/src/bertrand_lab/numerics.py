"""Low-level numerical helpers: interval sampling, 1D root location and
monotone chart inversion."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import BPoly

ROOT_TOL = 1e-10
NEWTON_MAX_ITER = 50
# span used to stand in for an infinite interval end
FAR = 1e6
NEAR = 1e-6


def sample_interval(a: float, b: float, n: int) -> np.ndarray:
    """Return ``n`` strictly interior, increasing sample points of ``(a, b)``.

    Finite intervals are sampled uniformly. A semi-infinite end is replaced
    by geometrically spaced offsets from the finite end (``NEAR`` to ``FAR``),
    a doubly infinite interval by ``sinh`` spacing.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if math.isfinite(a) and math.isfinite(b):
        return np.linspace(a, b, n + 2)[1:-1]
    if math.isfinite(a):
        return a + np.geomspace(NEAR, FAR, n)
    if math.isfinite(b):
        return (b - np.geomspace(NEAR, FAR, n))[::-1]
    lim = math.asinh(FAR)
    return np.sinh(np.linspace(-lim, lim, n))


def _polish(g, dg, x, lo, hi):
    """Newton polish of a bracketed root; never leaves ``[lo, hi]`` and
    never accepts an iterate that increases ``|g|``."""
    gx = g(x)
    for _ in range(NEWTON_MAX_ITER):
        if gx == 0.0:
            break
        d = dg(x)
        if not d or not math.isfinite(d):
            break
        x_new = x - gx / d
        if not (lo <= x_new <= hi):
            break
        g_new = g(x_new)
        if abs(g_new) >= abs(gx):
            break
        x, gx = x_new, g_new
    return x


def find_roots(
    g: Callable[[float], float],
    grid: np.ndarray,
    dg: Optional[Callable[[float], float]] = None,
    tol: float = ROOT_TOL,
) -> list[float]:
    """All roots of ``g`` visible on ``grid``.

    Sign changes between neighbouring samples are bracketed with Brent's
    method; roots without a sign change (even multiplicity) are picked up as
    local minima of ``|g|`` that refine to below ``tol``.
    """
    xs = np.asarray(grid, dtype=float)
    vals = np.array([g(float(x)) for x in xs])
    roots: list[float] = []
    for i in range(len(xs) - 1):
        x0, x1, v0, v1 = float(xs[i]), float(xs[i + 1]), vals[i], vals[i + 1]
        if v0 == 0.0:
            roots.append(x0)
            continue
        if math.copysign(1.0, v0) != math.copysign(1.0, v1) and v1 != 0.0:
            x = optimize.brentq(g, x0, x1, xtol=1e-15 * max(1.0, abs(x0)), rtol=4 * np.finfo(float).eps)
            if dg is not None:
                x = _polish(g, dg, x, x0, x1)
            roots.append(x)
    if len(xs) and vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    mag = np.abs(vals)
    for i in range(1, len(xs) - 1):
        if np.sign(vals[i - 1]) * np.sign(vals[i]) <= 0.0 or np.sign(vals[i]) * np.sign(vals[i + 1]) <= 0.0:
            continue
        if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
            lo, hi = float(xs[i - 1]), float(xs[i + 1])
            res = optimize.minimize_scalar(
                lambda x: abs(g(x)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14}
            )
            if res.fun < tol:
                roots.append(float(res.x))
    roots.sort()
    dedup: list[float] = []
    for x in roots:
        if not dedup or abs(x - dedup[-1]) > 1e-9 * max(1.0, abs(x)):
            dedup.append(x)
    return dedup


def chebyshev_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes on ``[lo, hi]``, clustered at both ends."""
    k = np.arange(n)
    t = 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))
    x = lo + (hi - lo) * t
    x[0], x[-1] = lo, hi
    return x


class ReparametrizedChart:
    """Arclength chart ``r(s) = r0 + int_{s_anchor}^{s} w(u) du`` for a
    positive weight ``w`` and its inverse ``s(r)``.

    The inverse is a quintic Hermite interpolant through the quadrature knots
    using the exact derivatives ``ds/dr = 1/w`` and ``d2s/dr2 = -w'/w^3``, so
    it is C2 and sixth-order accurate. Calling the chart returns
    ``(s, ds/dr, d2s/dr2)``.
    """

    def __init__(
        self,
        s_lo: float,
        s_hi: float,
        weight: Callable,
        dweight: Callable,
        anchor: Optional[float] = None,
        r_anchor: float = 0.0,
        n: int = 2049,
        rtol: float = 1e-10,
    ):
        if not (math.isfinite(s_lo) and math.isfinite(s_hi) and s_lo < s_hi):
            raise ValueError("chart needs a finite, nonempty parameter interval")
        self.weight = weight
        self.dweight = dweight
        self.rtol = rtol
        s = chebyshev_nodes(s_lo, s_hi, n)
        w = np.asarray(weight(s), dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("chart weight must be finite and positive on the closed interval")
        seg = np.empty(n - 1)
        for i in range(n - 1):
            seg[i] = integrate.quad(weight, s[i], s[i + 1], epsabs=1e-15, epsrel=rtol, limit=200)[0]
        r = np.concatenate(([0.0], np.cumsum(seg)))
        self.anchor = 0.5 * (s_lo + s_hi) if anchor is None else float(anchor)
        shift = r_anchor - self._forward(s, r, self.anchor)
        self.s_knots = s
        self.r_knots = r + shift
        dw = np.asarray(dweight(s), dtype=float)
        self._inverse = BPoly.from_derivatives(self.r_knots, np.stack([s, 1.0 / w, -dw / w**3], axis=1))

    def _forward(self, s_knots, r_knots, s):
        i = int(np.clip(np.searchsorted(s_knots, s) - 1, 0, len(s_knots) - 2))
        return r_knots[i] + integrate.quad(self.weight, s_knots[i], s, epsabs=1e-15, epsrel=self.rtol)[0]

    @property
    def r_lo(self) -> float:
        return float(self.r_knots[0])

    @property
    def r_hi(self) -> float:
        return float(self.r_knots[-1])

    def r_of(self, s):
        """Forward map by direct quadrature from the nearest knot."""
        if np.ndim(s) == 0:
            return float(self._forward(self.s_knots, self.r_knots, float(s)))
        return np.array([self._forward(self.s_knots, self.r_knots, float(x)) for x in np.ravel(s)]).reshape(np.shape(s))

    def s_of(self, r):
        out = self._inverse(r)
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, r):
        s = self.s_of(r)
        w = self.weight(s)
        return s, 1.0 / w, -self.dweight(s) / w**3
