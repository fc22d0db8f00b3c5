"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 2, 6 and 7 run through the CLI so that criterion 9 can compare the
CSV files of two independent runs byte for byte.
"""

import csv
import json
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from bertrand_lab.cli import main
from bertrand_lab.decompose import DEFAULT_K_GRID, PieceKind, cap_structure
from bertrand_lab.dynamics import PhaseState, constant_potential, integrate, kepler, reversed_state
from bertrand_lab.maupertuis import trajectory_geodesic_match
from bertrand_lab.surface import BertrandFamily, classify_regime, flat_plane, multi_equator

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

CLI_RUNS = {
    # criterion: [(command, config, extra args)]
    2: [("scan", "kepler_scan", []), ("scan", "oscillator_scan", []), ("scan", "perturbed_kepler_scan", [])],
    6: [("falsify", "de_sitter_falsify", []), ("falsify", "belt_falsify", []),
        ("falsify", "belt_oscillator_falsify", []), ("falsify", "sphere_control_falsify", ["--allow-riemannian"])],
    7: [("tannery", "tannery_sphere", []), ("tannery", "tannery_odd", []),
        ("tannery", "de_sitter_spacelike_census", []), ("tannery", "de_sitter_timelike_census", [])],
}


def _run_all(base: Path) -> dict:
    """Run every CLI config under ``base``; returns {criterion: seconds}."""
    times = {}
    for crit, runs in CLI_RUNS.items():
        t0 = time.perf_counter()
        for cmd, name, extra in runs:
            argv = [cmd, "--config", str(CONFIGS / f"{name}.ini"), "--out", str(base / name),
                    "--seed", "0", "--jobs", "1", *extra]
            assert main(argv) == 0, f"{cmd} {name} exited nonzero"
        times[crit] = time.perf_counter() - t0
    return times


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("first")
    return base, _run_all(base)


def _csv(path: Path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _json(path: Path) -> dict:
    return json.loads(path.read_text())


def _closed_form_endpoints(c, delta):
    """Interval endpoints written out by hand, not through the classifier."""
    pts = []
    if delta == 0 and c < 0:
        pts.append(math.sqrt(-c))
    disc = c * c + 4 * delta
    if delta > 0:
        pts.append(math.sqrt((-c + math.sqrt(disc)) / 2))
    if delta < 0 and c < 0 and disc > 0:
        pts += [math.sqrt((-c - math.sqrt(disc)) / 2), math.sqrt((-c + math.sqrt(disc)) / 2)]
    if delta < 0:
        pts.append((-delta) ** 0.25)
    return sorted(pts)


def _quartic_oracle(c, delta):
    roots = np.roots([1.0, 0.0, c, 0.0, -delta])
    out = [float(x.real) for x in roots if abs(x.imag) < 1e-12 and x.real > 0]
    if delta < 0:
        out.append((-delta) ** 0.25)
    return sorted(set(round(x, 14) for x in out))


def test_criterion_1_regime_table(acceptance_record):
    cases = [((1, 0), 1), ((0, 0), 1), ((-1, 0), 2), ((-1, 1), 3), ((-3, -1), 4), ((1, -0.1), 5), ((0, -1), 5)]
    t0 = time.perf_counter()
    errs, rows_ok = [], True
    for (c, delta), row in cases:
        rep = classify_regime(BertrandFamily(Fraction(1), c, delta))
        rows_ok &= rep.regime.row == row
        ends = sorted({x for iv in rep.riemannian_intervals + rep.pseudo_intervals for x in iv
                       if 0 < x < math.inf})
        for oracle in (_quartic_oracle(c, delta), _closed_form_endpoints(c, delta)):
            if len(ends) != len(oracle):
                errs.append(math.inf)
            else:
                errs += [abs(a - b) for a, b in zip(ends, oracle)]
    dt = time.perf_counter() - t0
    worst = max(errs, default=0.0)
    ok = rows_ok and worst < 1e-9 and dt < 1.0
    acceptance_record(1, ok, f"rows match = {rows_ok}, max endpoint error = {worst:.2e}, {dt:.3f} s")
    assert ok


def test_criterion_2_classical_bertrand(first_run, acceptance_record):
    base, times = first_run
    kep = _csv(base / "kepler_scan" / "scan.csv")
    osc = _csv(base / "oscillator_scan" / "scan.csv")
    pert = _csv(base / "perturbed_kepler_scan" / "scan.csv")
    err_k = max(abs(float(r["phi_over_pi"]) - 1.0) for r in kep)
    err_o = max(abs(float(r["phi_over_pi"]) - 0.5) for r in osc)
    frac = sum(r["verdict"] == "not_closed" for r in pert) / len(pert)
    sizes = (len(kep), len(osc), len(pert))
    ok = sizes == (25, 25, 25) and err_k < 1e-6 and err_o < 1e-6 and frac >= 0.9 and times[2] < 30
    acceptance_record(2, ok, f"kepler err = {err_k:.1e}, oscillator err = {err_o:.1e}, "
                             f"perturbed not_closed = {frac:.0%}, grids = {sizes}, {times[2]:.1f} s")
    assert ok


def test_criterion_3_bertrand_family(tmp_path, acceptance_record):
    t0 = time.perf_counter()
    for name in ("bertrand_mu4_scan", "belt_oscillator_scan"):
        argv = ["scan", "--config", str(CONFIGS / f"{name}.ini"), "--out", str(tmp_path / name), "--jobs", "1"]
        assert main(argv) == 0
    dt = time.perf_counter() - t0

    mu4 = _csv(tmp_path / "bertrand_mu4_scan" / "scan.csv")
    vals = [float(r["phi_over_pi"]) for r in mu4]
    err = max(abs(v - 0.5) for v in vals)
    mu4_ok = len(mu4) == 20 and err < 1e-5

    belt = _csv(tmp_path / "belt_oscillator_scan" / "scan.csv")
    fracs = {(r["p"], r["q"]) if r["verdict"] == "closed" else None for r in belt}
    belt_ok = None not in fracs and len(fracs) == 1 and int(next(iter(fracs))[1]) <= 4
    belt_val = "/".join(next(iter(fracs))) if belt_ok else str(sorted(map(str, fracs)))
    ok = mu4_ok and belt_ok and dt < 120
    acceptance_record(3, ok, f"mu=4: Phi/pi = {np.mean(vals):.6f} (target 1/2, max err {err:.1e}, "
                             f"{len(mu4)} pts); belt: Phi/pi = {belt_val} on {len(belt)} pts; {dt:.1f} s")
    assert ok


def test_criterion_4_conservation(acceptance_record):
    surface, pot = flat_plane(), kepler(1.0)
    s0 = PhaseState(1.0, 0.0, 0.2, 0.9)
    t0 = time.perf_counter()
    fwd = integrate(surface, pot, s0, 1000.0, 1e-3, sample_every=10_000)
    back = integrate(surface, pot, reversed_state(fwd.final), 1000.0, 1e-3, sample_every=10_000)
    dt = time.perf_counter() - t0
    ret = reversed_state(back.final)
    err = max(abs(ret.r - s0.r), abs(ret.phi - s0.phi), abs(ret.p_r - s0.p_r), abs(ret.K - s0.K))
    ok = fwd.drift_H < 1e-8 and fwd.drift_K == 0.0 and err < 1e-9 and dt < 60
    acceptance_record(4, ok, f"max|H-H0| = {fwd.drift_H:.2e}, K drift = {fwd.drift_K}, "
                             f"reversal error = {err:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_5_maupertuis(acceptance_record):
    # E = -3/8 with K = 1: r in (2/3, 2), period 2 pi (4/3)^{3/2}
    surface, pot = flat_plane(), kepler(1.0)
    E, K, r0 = -0.375, 1.0, 1.0
    p_r = math.sqrt(2 * (E + 1 / r0) - K * K / r0 ** 2)
    period = 2 * math.pi * (4 / 3) ** 1.5
    d = [trajectory_geodesic_match(surface, pot, E, PhaseState(r0, 0.0, p_r, K), period, h).discrepancy
         for h in (2e-3, 1e-3, 5e-4)]
    mono = d[0] > d[1] > d[2]
    ok = max(d) < 1e-4 and mono
    acceptance_record(5, ok, "Hausdorff = " + ", ".join(f"{x:.2e}" for x in d) + f" (h, h/2, h/4), decreasing = {mono}")
    assert ok


def test_criterion_6_falsifier(first_run, acceptance_record):
    base, times = first_run
    ev = {name: _json(base / name / "falsifier.json")["evidence"] for _, name, _ in CLI_RUNS[6]}
    fixtures = ("de_sitter_falsify", "belt_falsify", "belt_oscillator_falsify")
    found = all(ev[n] in ("escaped_domain", "no_return") for n in fixtures)
    control = ev["sphere_control_falsify"] == "resource_exhausted"
    budgets = all(_json(base / n / "falsifier.json")["budget"] == 200 for _, n, _ in CLI_RUNS[6])
    ok = found and control and budgets and times[6] < 300
    acceptance_record(6, ok, ", ".join(f"{n.removesuffix('_falsify')}: {ev[n]}" for _, n, _ in CLI_RUNS[6])
                      + f", {times[6]:.1f} s")
    assert ok


def test_criterion_7_tannery_and_sc(first_run, acceptance_record):
    base, times = first_run
    parts = {}
    for name in ("tannery_sphere", "tannery_odd"):
        rows = _csv(base / name / "tannery.csv")
        closed = [r for r in rows if r["outcome"] == "closed" and float(r["return_distance"]) < 1e-5]
        parts[name] = (len(rows) == 50 and len(closed) == 50, f"{len(closed)}/{len(rows)} closed")
    space = _csv(base / "de_sitter_spacelike_census" / "tannery.csv")
    n_sp = sum(r["outcome"] == "closed" for r in space)
    parts["de_sitter spacelike"] = (len(space) == 20 and n_sp == 20, f"{n_sp}/{len(space)} closed")
    time_ = _csv(base / "de_sitter_timelike_census" / "tannery.csv")
    n_tl = sum(r["outcome"] != "closed" for r in time_)
    parts["de_sitter timelike"] = (len(time_) == 20 and n_tl == 20, f"{n_tl}/{len(time_)} fail closure")
    ok = all(p for p, _ in parts.values()) and times[7] < 120
    acceptance_record(7, ok, "; ".join(f"{k}: {v} [{'ok' if p else 'no'}]" for k, (p, v) in parts.items())
                      + f"; {times[7]:.1f} s")
    assert ok


def test_criterion_8_decomposition(acceptance_record):
    t0 = time.perf_counter()
    dec = cap_structure(multi_equator(2.0, 0.0, 4 * math.pi), constant_potential(0.0), DEFAULT_K_GRID)
    dt = time.perf_counter() - t0
    interior = [p for p in dec.pieces if p.kind is PieceKind.INTERIOR]
    empty = all(len(p.census) == 0 for p in interior)
    ok = len(dec.equators) == 4 and len(dec.pieces) == 5 and len(interior) == 3 and empty and dt < 60
    acceptance_record(8, ok, f"equators = {len(dec.equators)}, pieces = {len(dec.pieces)}, "
                             f"interior = {len(interior)}, interior census empty = {empty}, {dt:.1f} s")
    assert ok


def test_criterion_9_determinism(first_run, tmp_path, acceptance_record):
    base, _ = first_run
    _run_all(tmp_path)
    files = sorted(p.relative_to(base) for p in base.rglob("*.csv"))
    diff = [str(f) for f in files if (base / f).read_bytes() != (tmp_path / f).read_bytes()]
    ok = len(files) == 11 and not diff
    acceptance_record(9, ok, f"{len(files) - len(diff)}/{len(files)} CSV files byte-identical"
                             + (f", differing: {diff}" if diff else ""))
    assert ok
