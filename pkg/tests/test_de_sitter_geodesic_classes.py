"""Geodesic classes on the de Sitter fixture dr^2 - cosh(r)^2 dphi^2.

With this sign convention the timelike geodesics are the bounded ones: they
oscillate about the equator r = 0 and close, while spacelike geodesics run
out of every compact band.
"""

from bertrand_lab.maupertuis import classify_geodesic, sample_geodesics
from bertrand_lab.surface import TangentClass, de_sitter


def test_timelike_geodesics_close_near_equator():
    s = de_sitter(-5.0, 5.0)
    states = sample_geodesics(s, 20, TangentClass.TIMELIKE, seed=0, core=(-1.0, 1.0), chi_max=1.0)
    outcomes = [classify_geodesic(s, st, 50, tol=1e-5) for st in states]
    assert all(o.tangent is TangentClass.TIMELIKE for o in outcomes)
    assert [o.kind for o in outcomes] == ["closed"] * 20
    assert max(o.return_distance for o in outcomes) < 1e-5


def test_spacelike_geodesics_escape():
    s = de_sitter(-5.0, 5.0)
    states = sample_geodesics(s, 20, TangentClass.SPACELIKE, seed=0)
    kinds = {classify_geodesic(s, st, 50).kind for st in states}
    assert kinds == {"escaped_domain"}
