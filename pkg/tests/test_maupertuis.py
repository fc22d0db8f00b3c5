import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bertrand_lab.dynamics import PhaseState, constant_potential, energy, kepler, oscillator
from bertrand_lab.errors import NoDomainError, PreconditionError
from bertrand_lab.maupertuis import (
    classify_geodesic,
    falsify_completely_bertrand,
    hausdorff_polyline,
    maupertuis_metric,
    sample_geodesics,
    trajectory_geodesic_match,
    unit_direction,
)
from bertrand_lab.surface import TangentClass, classify_tangent, de_sitter, flat_plane, round_sphere


def test_domain_examples():
    assert maupertuis_metric(flat_plane(), kepler(), -0.375).domain == pytest.approx((0.0, 8 / 3), abs=1e-12)
    assert maupertuis_metric(flat_plane(), oscillator(), 2.0).domain == pytest.approx((0.0, 2.0), abs=1e-12)


def test_empty_domain():
    with pytest.raises(NoDomainError):
        maupertuis_metric(round_sphere(), constant_potential(1.0), 0.5)


def test_constant_potential_is_a_scaling():
    ms = maupertuis_metric(round_sphere(), constant_potential(), 2.0)
    for r in np.linspace(0.1, 3.0, 9):
        rt = ms.from_base(r)
        assert rt == pytest.approx(math.sqrt(2) * r, rel=1e-10)
        assert ms.transformed.f(rt) == pytest.approx(math.sqrt(2) * math.sin(r), rel=1e-10)


def test_conformal_consistency_on_random_points():
    s, V, E = flat_plane(), kepler(), -0.375
    ms = maupertuis_metric(s, V, E)
    lo, hi = ms.chart.s_knots[0], ms.chart.s_knots[-1]
    rng = np.random.default_rng(7)
    for r in rng.uniform(lo, hi, 100):
        q = E - V.evaluate(s, r)[0]
        rt = ms.from_base(r)
        # f~^2 = (E - V) f^2 and (dr~/dr)^2 = E - V
        assert ms.transformed.f(rt) ** 2 == pytest.approx(q * s.f(r) ** 2, rel=1e-8)
        ds_drt = ms.chart(rt)[1]
        assert 1.0 / ds_drt**2 == pytest.approx(q, rel=1e-8)
        assert q > 0


@given(st.floats(0.05, 0.95), st.floats(0.0, 0.999), st.sampled_from(list(TangentClass)))
def test_tangent_class_preserved(u_r, u_dir, stratum):
    s, V, E = de_sitter(), constant_potential(), 3.0
    ms = maupertuis_metric(s, V, E)
    r = s.a + u_r * (s.b - s.a)
    a, b = unit_direction(-1, stratum, u_dir)
    base = PhaseState(r, 0.0, a, -s.f(r) * b)
    q = E - V.evaluate(s, r)[0]
    # direction preserved, speed renormalized by 1/sqrt(q): same K, p~ = p / sqrt(q)
    geo = PhaseState(ms.from_base(r), 0.0, a / math.sqrt(q), base.K)
    assert classify_tangent(s, base) is classify_tangent(ms.transformed, geo) is stratum


def test_hausdorff_polyline_basics():
    A = np.column_stack([np.linspace(0, 1, 11), np.zeros(11)])
    B = np.column_stack([np.linspace(0, 1, 3), np.full(3, 0.5)])
    assert hausdorff_polyline(A, B) == pytest.approx(0.5)
    assert hausdorff_polyline(A, A) == 0.0
    # dense sampling of the same segment is at distance zero from the coarse polyline
    C = np.column_stack([np.linspace(0, 1, 2), np.zeros(2)])
    assert hausdorff_polyline(A, C) == pytest.approx(0.0, abs=1e-15)


def test_match_free_motion_is_exact():
    s, V = round_sphere(), constant_potential()
    st0 = PhaseState(1.0, 0.0, 0.6, 0.5)
    E = energy(s, V, st0)
    m = trajectory_geodesic_match(s, V, E, st0, 3.0, 1e-3)
    assert m.discrepancy < 1e-10 and not m.partial


def test_match_circular_orbit():
    s, V = flat_plane(), kepler()
    st0 = PhaseState(1.0, 0.0, 0.0, 1.0)
    m = trajectory_geodesic_match(s, V, energy(s, V, st0), st0, 6.0, 1e-3)
    assert m.discrepancy < 1e-8


def test_match_rejects_wrong_energy():
    with pytest.raises(PreconditionError):
        trajectory_geodesic_match(flat_plane(), kepler(), -0.3, PhaseState(1.0, 0.0, 0.5, 1.0), 1.0)


def test_geodesic_classification_on_de_sitter():
    s = de_sitter()
    timelike = sample_geodesics(s, 4, TangentClass.TIMELIKE, seed=3, core=(-1, 1), chi_max=1.0)
    assert all(classify_geodesic(s, g).kind == "closed" for g in timelike)
    spacelike = sample_geodesics(s, 4, TangentClass.SPACELIKE, seed=3)
    assert all(classify_geodesic(s, g).kind == "escaped_domain" for g in spacelike)


def test_falsifier_rejects_riemannian_without_flag():
    with pytest.raises(PreconditionError):
        falsify_completely_bertrand(round_sphere(), constant_potential(), budget=5)
    with pytest.raises(PreconditionError):
        falsify_completely_bertrand(de_sitter(), constant_potential(), budget=0)


def test_falsifier_report_is_replayable():
    rep = falsify_completely_bertrand(de_sitter(), constant_potential(), budget=10, seed=0)
    assert rep.witness is not None and rep.evidence in ("escaped_domain", "no_return")
    d = json.loads(json.dumps(rep.to_dict()))
    w = d["witness"]
    assert float.fromhex(w["state_hex"]["K"]) == w["state"]["K"] == rep.witness.state.K
    assert rep.trials == rep.witness.trial + 1 == len(rep.log)


def test_falsifier_jobs_do_not_change_the_witness():
    a = falsify_completely_bertrand(de_sitter(), constant_potential(), budget=8, seed=1, jobs=1)
    b = falsify_completely_bertrand(de_sitter(), constant_potential(), budget=8, seed=1, jobs=2)
    assert a.to_dict() == b.to_dict() and a.log == b.log


def test_scaling_neutrality():
    verdicts = []
    for E in (1.0, 4.0, 9.0):
        rep = falsify_completely_bertrand(de_sitter(), constant_potential(), E_list=[E], budget=6, seed=2)
        verdicts.append((rep.evidence, rep.witness.trial if rep.witness else None,
                         [row[6] for row in rep.log]))
    assert verdicts[0] == verdicts[1] == verdicts[2]


def test_sphere_control_small_budget():
    rep = falsify_completely_bertrand(round_sphere(), constant_potential(), budget=12, allow_riemannian=True)
    assert rep.evidence == "resource_exhausted" and rep.trials == 12
