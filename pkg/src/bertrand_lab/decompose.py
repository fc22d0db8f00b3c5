"""Equator decomposition and the cap / black box / cap census.

A surface is cut at its equators. Pieces bounded by two equators are
*interior*, pieces with one equator and one surface boundary are *exterior*,
and a surface without equators is a single *whole* piece. On each piece we
record the strongly stable circular orbits that are not equators.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dynamics import CentralPotential, CircularOrbit, circular_orbits, effective_potential
from .surface import SurfaceOfRevolution, equators

DEFAULT_K_GRID = tuple(float(k) for k in np.logspace(-2, 2, 16))
EQUATOR_TOL = 1e-8
CENSUS_TOL = 1e-8


class PieceKind(str, Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    WHOLE = "whole"


class BoundaryKind(str, Enum):
    EQUATOR = "equator"
    SURFACE_BOUNDARY = "surface_boundary"


@dataclass(frozen=True)
class Piece:
    interval: tuple
    kind: PieceKind
    left_boundary: BoundaryKind
    right_boundary: BoundaryKind
    census: tuple = ()
    equatorial: tuple = ()
    scanned: bool = False

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "kind": self.kind.value,
            "left_boundary": self.left_boundary.value,
            "right_boundary": self.right_boundary.value,
            "census": [o.to_dict() for o in self.census],
            "equatorial": [o.to_dict() for o in self.equatorial],
        }


@dataclass
class CapReport:
    left_cap: Optional[Piece]
    right_cap: Optional[Piece]
    black_box: tuple
    single_belt: bool = False

    def to_dict(self) -> dict:
        return {
            "left_cap": list(self.left_cap.interval) if self.left_cap else None,
            "right_cap": list(self.right_cap.interval) if self.right_cap else None,
            "black_box": list(self.black_box),
            "single_belt": self.single_belt,
        }


@dataclass
class Decomposition:
    surface_interval: tuple
    equators: list
    pieces: list
    cap_report: Optional[CapReport] = None
    consistent: Optional[bool] = None
    K_grid: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "surface_interval": list(self.surface_interval),
            "equators": list(self.equators),
            "pieces": [p.to_dict() for p in self.pieces],
            "cap_report": self.cap_report.to_dict() if self.cap_report else None,
            "consistent": self.consistent,
            "K_grid": list(self.K_grid),
        }


def split_at_equators(surface: SurfaceOfRevolution, resolution: int = 2000) -> Decomposition:
    eq = equators(surface, resolution)
    cuts = [surface.a, *eq, surface.b]
    pieces = []
    for i in range(len(cuts) - 1):
        left = BoundaryKind.EQUATOR if i > 0 else BoundaryKind.SURFACE_BOUNDARY
        right = BoundaryKind.EQUATOR if i < len(cuts) - 2 else BoundaryKind.SURFACE_BOUNDARY
        n_eq = (left is BoundaryKind.EQUATOR) + (right is BoundaryKind.EQUATOR)
        kind = (PieceKind.INTERIOR, PieceKind.EXTERIOR)[2 - n_eq] if n_eq else PieceKind.WHOLE
        pieces.append(Piece((cuts[i], cuts[i + 1]), kind, left, right))
    return Decomposition((surface.a, surface.b), eq, pieces)


def _equator_orbit(surface, potential, r0, K) -> Optional[CircularOrbit]:
    W = effective_potential(surface, potential, K)
    w, w1, w2 = W.all(r0)
    if abs(w1) >= CENSUS_TOL * max(1.0, abs(w)):
        return None
    return CircularOrbit(float(r0), float(K), float(w), float(w2), bool(w2 > 0), True)


def census_stable_orbits(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    piece: Piece,
    K_grid: Sequence[float] = DEFAULT_K_GRID,
) -> Piece:
    """Strongly stable non-equatorial circular orbits inside ``piece``; circular
    orbits sitting on its equator ends are listed separately."""
    if len(K_grid) == 0:
        raise ValueError("K_grid must be nonempty")
    lo, hi = piece.interval
    census, eq_hits = [], []
    for K in K_grid:
        for orb in circular_orbits(surface, potential, float(K), bracket=(lo, hi), equator_tol=EQUATOR_TOL):
            if orb.is_equator:
                eq_hits.append(orb)
            elif orb.strongly_stable:
                census.append(orb)
        for r0, kind in ((lo, piece.left_boundary), (hi, piece.right_boundary)):
            if kind is BoundaryKind.EQUATOR:
                orb = _equator_orbit(surface, potential, r0, float(K))
                if orb is not None:
                    eq_hits.append(orb)
    return replace(piece, census=tuple(census), equatorial=tuple(eq_hits), scanned=True)


def _census_task(args):
    return census_stable_orbits(*args)


def cap_structure(
    surface: SurfaceOfRevolution,
    potential: CentralPotential,
    K_grid: Sequence[float] = DEFAULT_K_GRID,
    jobs: int = 1,
    resolution: int = 2000,
) -> Decomposition:
    """Full decomposition with a census on every piece.

    Caps are the exterior pieces with a nonempty census; the black box is the
    span between them. ``consistent`` is False when an interior piece carries
    a non-equatorial strongly stable orbit.
    """
    dec = split_at_equators(surface, resolution)
    tasks = [(surface, potential, p, tuple(K_grid)) for p in dec.pieces]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            dec.pieces = list(pool.map(_census_task, tasks))
    else:
        dec.pieces = [_census_task(t) for t in tasks]
    dec.K_grid = [float(k) for k in K_grid]
    if not dec.equators:
        only = dec.pieces[0]
        dec.cap_report = CapReport(None, None, only.interval, single_belt=True)
        dec.consistent = True
        return dec
    first, last = dec.pieces[0], dec.pieces[-1]
    left = first if first.kind is PieceKind.EXTERIOR and first.census else None
    right = last if last.kind is PieceKind.EXTERIOR and last.census else None
    bb_lo = left.interval[1] if left else surface.a
    bb_hi = right.interval[0] if right else surface.b
    dec.cap_report = CapReport(left, right, (bb_lo, bb_hi))
    dec.consistent = not any(p.census for p in dec.pieces if p.kind is PieceKind.INTERIOR)
    return dec


def black_box_is_whole(dec: Decomposition) -> bool:
    lo, hi = dec.surface_interval
    bb = dec.cap_report.black_box if dec.cap_report else (math.nan, math.nan)
    return bb[0] == lo and bb[1] == hi
