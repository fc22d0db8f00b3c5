"""``bertrand-lab`` command line.

Every subcommand reads an optional INI file with ``[surface]``,
``[potential]`` and ``[experiment]`` sections, applies ``--set
section.key=value`` overrides and subcommand flags on top, validates the
result, runs, and writes its outputs plus a ``manifest.json`` into ``--out``.

Exit codes: 0 success, 1 domain or precondition error, 2 config error.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from . import __version__
from .closure import (
    SCAN_CSV_HEADER,
    Ring,
    bound_orbit_grid,
    closure_report,
    scan_closing,
)
from .decompose import DEFAULT_K_GRID, cap_structure
from .dynamics import PhaseState, PowerLaw, integrate, make_potential
from .errors import BertrandLabError, ConfigError
from .maupertuis import FALSIFIER_CSV_HEADER, classify_geodesic, falsify_completely_bertrand, sample_geodesics
from .serialize import canonical_json, csv_text, sha256_file, write_text
from .surface import (
    BertrandFamily,
    TangentClass,
    TanneryMetric,
    bertrand_surface,
    classify_regime,
    cosh_surface,
    de_sitter,
    flat_plane,
    multi_equator,
    round_sphere,
    spline_surface,
    tannery_surface,
)

SECTIONS = ("surface", "potential", "experiment")
TANNERY_CSV_HEADER = ("index", "r0", "p_r", "K", "tangent_class", "outcome", "return_distance", "periods")


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    surface: dict
    potential: dict
    experiment: dict
    seed: int = 0
    out: Optional[Path] = None
    source: Optional[str] = None
    lines: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"surface": dict(self.surface), "potential": dict(self.potential),
                "experiment": dict(self.experiment), "seed": self.seed, "source": self.source}


def _line_index(path: str) -> dict:
    """``(section, key) -> line number`` for error messages."""
    index, section = {}, None
    for no, line in enumerate(Path(path).read_text().splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section:
            index[(section, m.group(1).strip().lower())] = no
    return index


def load_config(path: Optional[str], overrides: list[str], seed: Optional[int], out: Optional[str]) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    lines = {}
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"{path}: no such config file")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        unknown = [s for s in parser.sections() if s not in SECTIONS]
        if unknown:
            raise ConfigError(f"{path}: unknown section(s) {unknown}; expected {list(SECTIONS)}")
        lines = {k: f"{path}:{v}" for k, v in _line_index(path).items()}
    data = {s: dict(parser[s]) if parser.has_section(s) else {} for s in SECTIONS}
    for item in overrides:
        m = re.fullmatch(r"(\w+)\.(\w+)=(.*)", item)
        if not m or m.group(1) not in SECTIONS:
            raise ConfigError(f"--set {item!r}: expected section.key=value with section in {list(SECTIONS)}")
        data[m.group(1)][m.group(2).lower()] = m.group(3)
        lines[(m.group(1), m.group(2).lower())] = f"--set {item}"
    if seed is None:
        seed = int(data["experiment"].pop("seed", 0) or 0)
    return RunConfig(data["surface"], data["potential"], data["experiment"], seed,
                     Path(out) if out else None, path, lines)


class _Reader:
    """Typed access to one config section with located error messages."""

    def __init__(self, cfg: RunConfig, section: str):
        self.cfg, self.section = cfg, section
        self.values = getattr(cfg, section)
        self.used: set = set()

    def _where(self, key: str) -> str:
        loc = self.cfg.lines.get((self.section, key))
        return f"{loc}: [{self.section}] {key}" if loc else f"[{self.section}] {key}"

    def raw(self, key: str, default=None):
        self.used.add(key)
        v = self.values.get(key)
        return default if v is None or str(v).strip() == "" else str(v).strip()

    def _convert(self, key, conv, default, what):
        v = self.raw(key)
        if v is None:
            if default is ...:
                raise ConfigError(f"{self._where(key)}: required {what} is missing")
            return default
        try:
            return conv(v)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{self._where(key)}: expected {what}, got {v!r}") from exc

    def float(self, key, default=...):
        return self._convert(key, _parse_float, default, "a number")

    def int(self, key, default=...):
        return self._convert(key, int, default, "an integer")

    def bool(self, key, default=False):
        return self._convert(key, _parse_bool, default, "a boolean")

    def floats(self, key, default=...):
        return self._convert(key, lambda v: [_parse_float(x) for x in v.split(",") if x.strip()], default,
                             "a comma separated list of numbers")

    def fraction(self, key, default=...):
        return self._convert(key, lambda v: Fraction(v.strip()), default, "a rational number such as 3/2")

    def choice(self, key, options, default=...):
        v = self._convert(key, str, default, f"one of {sorted(options)}")
        if v not in options:
            raise ConfigError(f"{self._where(key)}: expected one of {sorted(options)}, got {v!r}")
        return v

    def check_unused(self):
        extra = sorted(set(self.values) - self.used)
        if extra:
            raise ConfigError(f"{self._where(extra[0])}: unknown key (known: {sorted(self.used)})")


def _parse_float(v: str) -> float:
    v = v.strip().lower()
    if v in ("inf", "+inf", "infinity"):
        return math.inf
    if v in ("-inf", "-infinity"):
        return -math.inf
    if "/" in v:
        return float(Fraction(v))
    if v == "pi" or v.endswith("pi"):
        head = v[:-2].rstrip("*")
        return (float(head) if head else 1.0) * math.pi
    return float(v)


def _parse_bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


SURFACE_FAMILIES = ("flat", "sphere", "de_sitter", "cosh", "multi_equator", "bertrand", "tannery", "spline")


def build_surface(cfg: RunConfig):
    rd = _Reader(cfg, "surface")
    fam = rd.choice("family", SURFACE_FAMILIES)
    if fam == "flat":
        s = flat_plane(rd.float("b", math.inf))
    elif fam == "sphere":
        s = round_sphere(rd.float("r", 1.0))
    elif fam == "de_sitter":
        s = de_sitter(rd.float("a", -5.0), rd.float("b", 5.0))
    elif fam == "cosh":
        s = cosh_surface(rd.float("a", -5.0), rd.float("b", 5.0), rd.int("epsilon", 1))
    elif fam == "multi_equator":
        s = multi_equator(rd.float("offset", 2.0), rd.float("a", 0.0), rd.float("b", 4 * math.pi), rd.int("epsilon", 1))
    elif fam == "bertrand":
        family = BertrandFamily(rd.fraction("mu", Fraction(1)), rd.float("c"), rd.float("delta"))
        s = bertrand_surface(family, (rd.float("theta_lo"), rd.float("theta_hi")))
    elif fam == "tannery":
        metric = TanneryMetric(rd.float("r", 1.0), rd.fraction("beta", Fraction(1)), tuple(rd.floats("h_coeffs", [0.0])))
        s = tannery_surface(metric)
    else:
        s = spline_surface(rd.floats("r_samples"), rd.floats("f_samples"), rd.int("epsilon", 1))
    rd.check_unused()
    return s


def build_potential(cfg: RunConfig):
    rd = _Reader(cfg, "potential")
    kind = rd.choice("kind", ("constant", "gravitational_theta", "oscillator_theta", "custom_radial"), "constant")
    A = 0.0 if kind == "constant" else rd.float("a", 1.0)
    B = rd.float("b", 0.0)
    custom = None
    if kind == "custom_radial":
        def terms(v):
            out = []
            for item in v.split(","):
                c, p = item.split(":")
                out.append((_parse_float(c), _parse_float(p)))
            return tuple(out)
        custom = PowerLaw(rd._convert("terms", terms, ..., "coefficient:power pairs such as -1:-1, 0.1:1"))
    rd.check_unused()
    return make_potential(kind, A, B, custom)


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

class Outputs:
    def __init__(self, out: Path):
        self.out = out
        self.files: list[Path] = []

    def text(self, name: str, text: str) -> Path:
        path = write_text(self.out / name, text)
        self.files.append(path)
        return path

    def svg(self, name: str, draw: Callable) -> Path:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        matplotlib.rcParams["svg.hashsalt"] = "bertrand-lab"
        fig = draw(plt)
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        self.files.append(path)
        return path

    def manifest(self, command: str, cfg: Optional[RunConfig], summary: dict, wall: float) -> Path:
        doc = {
            "tool": "bertrand-lab",
            "version": __version__,
            "command": command,
            "config": cfg.echo() if cfg else None,
            "wall_time_s": wall,
            "summary": summary,
            "outputs": {p.name: sha256_file(p) for p in self.files},
        }
        return write_text(self.out / "manifest.json", canonical_json(doc))


def resolve_jobs(flag: Optional[int]) -> int:
    env = os.environ.get("BERTRAND_LAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"BERTRAND_LAB_JOBS={env!r}: expected an integer") from exc
    if flag is not None:
        return max(1, flag)
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_classify(args) -> dict:
    if args.c is None or args.delta is None:
        raise ConfigError("classify needs --c and --delta")
    try:
        mu = Fraction(args.mu)
    except ValueError as exc:
        raise ConfigError(f"--mu: expected a rational number, got {args.mu!r}") from exc
    report = classify_regime(BertrandFamily(mu, args.c, args.delta))
    d = report.to_dict()
    fmt = lambda ivs: ", ".join(f"({a:.10g}, {b:.10g})" for a, b in ivs) or "empty"  # noqa: E731
    print(f"c = {args.c:g}, delta = {args.delta:g}, mu = {d['mu']}")
    print(f"  regime row      : {d['regime_row']}  ({d['regime']})")
    print(f"  Riemannian      : {fmt(report.riemannian_intervals)}")
    print(f"  pseudo-Riemann. : {fmt(report.pseudo_intervals)}")
    if report.equator_theta is not None:
        print(f"  equator theta   : {report.equator_theta:.10g}")
    if args.json:
        sys.stdout.write(canonical_json(d))
    if args.out:
        outs = Outputs(Path(args.out))
        outs.text("regime.json", canonical_json(d))
        outs.manifest("classify", None, d, 0.0)
    return d


def _experiment(cfg: RunConfig) -> _Reader:
    return _Reader(cfg, "experiment")


def cmd_simulate(args, cfg: RunConfig, outs: Outputs) -> dict:
    surface, potential = build_surface(cfg), build_potential(cfg)
    ex = _experiment(cfg)
    state = PhaseState(ex.float("r0"), ex.float("phi0", 0.0), ex.float("p_r0", 0.0), ex.float("k"))
    t_end, step = ex.float("t_end"), ex.float("step", 1e-3)
    scheme = ex.choice("scheme", ("leapfrog", "yoshida4"), "yoshida4")
    every = ex.int("sample_every", 1)
    plot = ex.bool("plot", False) or args.plot
    ex.check_unused()
    if not surface.contains(state.r):
        raise ConfigError(f"[experiment] r0 = {state.r} is outside the surface interval ({surface.a}, {surface.b})")
    if step <= 0 or t_end <= 0 or every < 1:
        raise ConfigError("[experiment] t_end and step must be positive and sample_every >= 1")
    potential.check(surface)
    traj = integrate(surface, potential, state, t_end, step, scheme=scheme, sample_every=every)
    outs.text("trajectory.csv", csv_text(("t", "r", "phi", "p_r", "H", "K", "driftH"), traj.rows()))
    if plot:
        outs.svg("orbit.svg", lambda plt: _orbit_figure(plt, surface, traj))
    return {"exit_reason": traj.exit_reason.value, "drift_H": traj.drift_H, "drift_K": traj.drift_K,
            "H0": traj.H0, "K0": traj.K0, "notes": list(traj.notes), "samples": len(traj.t)}


def _orbit_figure(plt, surface, traj):
    import numpy as np
    if surface.riemannian and surface.a >= 0:
        fig, ax = plt.subplots(subplot_kw={"projection": "polar"}, figsize=(5, 5))
        ax.plot(traj.phi, traj.r, lw=0.8)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.mod(traj.phi, 2 * np.pi), traj.r, ",", ms=1)
        ax.set_xlabel("phi mod 2 pi")
        ax.set_ylabel("r")
    ax.set_title(f"{surface.name}: {traj.exit_reason.value}")
    return fig


def cmd_apsidal(args, cfg: RunConfig, outs: Outputs) -> dict:
    surface, potential = build_surface(cfg), build_potential(cfg)
    ex = _experiment(cfg)
    E, K = ex.float("e"), ex.float("k")
    q_max, periods = ex.int("q_max", 50), ex.int("max_radial_periods", 50)
    r_seed = ex.float("r_seed", None)
    ex.check_unused()
    potential.check(surface)
    rep = closure_report(surface, potential, E, K, q_max, periods, r_seed=r_seed)
    rat = rep.rationality
    d = {
        "E": E, "K": K,
        "r_minus": rep.turning.r_minus, "r_plus": rep.turning.r_plus, "degenerate": rep.turning.degenerate,
        "apsidal_angle": rep.apsidal.phi_half, "phi_over_pi": rep.phi_over_pi,
        "quadrature_error": rep.apsidal.err, "quadrature_converged": rep.apsidal.converged,
        "rational": rat.is_rational, "p": rat.p, "q": rat.q,
        "poincare_confirmed": rep.poincare_confirmed, "return_distance": rep.return_distance,
        "verdict": rep.verdict.value,
    }
    print(f"Phi/pi = {rep.phi_over_pi:.15g}  verdict = {rep.verdict.value}")
    outs.text("apsidal.json", canonical_json(d))
    return d


def scan_grid(surface, potential, ex: _Reader) -> list:
    K_values = ex.floats("k_values")
    E_values = ex.floats("e_values", None)
    fractions = ex.floats("fractions", None)
    if E_values is not None and fractions is not None:
        raise ConfigError("[experiment] give either e_values or fractions, not both")
    if E_values is not None:
        return [(E, K) for K in K_values for E in E_values]
    return bound_orbit_grid(surface, potential, K_values, fractions or [0.1, 0.3, 0.5, 0.7, 0.9])


def cmd_scan(args, cfg: RunConfig, outs: Outputs) -> dict:
    surface, potential = build_surface(cfg), build_potential(cfg)
    ex = _experiment(cfg)
    potential.check(surface)
    grid = scan_grid(surface, potential, ex)
    q_max, periods = ex.int("q_max", 50), ex.int("max_radial_periods", 50)
    ring = None
    if ex.raw("ring_r0") is not None:
        ring = Ring(ex.float("ring_r0"), ex.float("ring_eps"), ex.float("ring_k0", None))
    plot = ex.bool("plot", False) or args.plot
    ex.check_unused()
    summary = scan_closing(surface, potential, grid, ring, q_max, periods, jobs=args.jobs_resolved)
    outs.text("scan.csv", csv_text(SCAN_CSV_HEADER, (r.csv_row() for r in summary.rows)))
    d = summary.to_dict()
    outs.text("summary.json", canonical_json(d))
    if plot:
        outs.svg("scan.svg", lambda plt: _scan_figure(plt, summary))
    print(f"exists = {d['exists']}  forall = {d['forall']}  counts = {d['counts']}")
    if summary.witnesses:
        E, K = summary.witnesses[0]
        print(f"first non-closing point: E = {E:.17g}, K = {K:.17g}")
    return d


def _scan_figure(plt, summary):
    fig, ax = plt.subplots(figsize=(6, 4))
    pts = [(r.K, r.report.phi_over_pi) for r in summary.rows if r.report is not None]
    if pts:
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", ms=3)
    ax.set_xlabel("K")
    ax.set_ylabel("Phi / pi")
    return fig


def cmd_falsify(args, cfg: RunConfig, outs: Outputs) -> dict:
    surface, potential = build_surface(cfg), build_potential(cfg)
    ex = _experiment(cfg)
    E_list = ex.floats("e_list", None)
    budget = ex.int("budget", 200)
    periods = ex.int("max_radial_periods", 50)
    allow = ex.bool("allow_riemannian", False) or args.allow_riemannian
    ex.check_unused()
    if budget < 1:
        raise ConfigError("[experiment] budget must be at least 1")
    potential.check(surface)
    rep = falsify_completely_bertrand(surface, potential, E_list, budget, allow, cfg.seed, periods,
                                      jobs=args.jobs_resolved)
    d = rep.to_dict()
    outs.text("falsifier.json", canonical_json(d))
    outs.text("trials.csv", csv_text(FALSIFIER_CSV_HEADER, rep.log))
    print(f"evidence = {rep.evidence}  trials = {rep.trials}/{rep.budget}")
    return {"evidence": rep.evidence, "trials": rep.trials, "budget": rep.budget,
            "witness_tangent_class": rep.witness.tangent.value if rep.witness else None}


def cmd_decompose(args, cfg: RunConfig, outs: Outputs) -> dict:
    surface, potential = build_surface(cfg), build_potential(cfg)
    ex = _experiment(cfg)
    K_grid = ex.floats("k_grid", list(DEFAULT_K_GRID))
    ex.check_unused()
    if not K_grid:
        raise ConfigError("[experiment] k_grid must be nonempty")
    potential.check(surface)
    dec = cap_structure(surface, potential, K_grid, jobs=args.jobs_resolved)
    d = dec.to_dict()
    outs.text("decomposition.json", canonical_json(d))
    kinds = [p.kind.value for p in dec.pieces]
    print(f"equators = {len(dec.equators)}  pieces = {kinds}  consistent = {dec.consistent}")
    return {"equators": len(dec.equators), "pieces": kinds, "consistent": dec.consistent}


def cmd_tannery(args, cfg: RunConfig, outs: Outputs) -> dict:
    if not cfg.surface:
        cfg.surface = {"family": "tannery"}
    surface = build_surface(cfg)
    ex = _experiment(cfg)
    n = ex.int("n_geodesics", 50)
    periods = ex.int("max_radial_periods", 50)
    tol = ex.float("tol", 1e-5)
    stratum = TangentClass(ex.choice("tangent_class", ("spacelike", "timelike", "lightlike"), "spacelike"))
    core = (ex.float("core_lo"), ex.float("core_hi")) if ex.raw("core_lo") is not None else None
    chi_max = ex.float("chi_max", 2.0)
    ex.check_unused()
    states = sample_geodesics(surface, n, stratum, seed=cfg.seed, core=core, chi_max=chi_max)
    rows, closed = [], 0
    for i, st in enumerate(states):
        out = classify_geodesic(surface, st, periods, tol=tol)
        closed += out.kind == "closed"
        rows.append((i, st.r, st.p_r, st.K, out.tangent.value, out.kind, out.return_distance, out.periods))
    outs.text("tannery.csv", csv_text(TANNERY_CSV_HEADER, rows))
    d = {"n": n, "closed": closed, "all_closed": closed == n, "tangent_class": stratum.value,
         "max_return_distance": max((r[6] for r in rows if r[5] == "closed"), default=None)}
    outs.text("summary.json", canonical_json(d))
    print(f"{closed}/{n} geodesics closed")
    return d


COMMANDS = {
    "simulate": cmd_simulate,
    "apsidal": cmd_apsidal,
    "scan": cmd_scan,
    "falsify": cmd_falsify,
    "decompose": cmd_decompose,
    "tannery": cmd_tannery,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bertrand-lab", description="Closed orbits on surfaces of revolution.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="regime table of the (c, delta) family")
    c.add_argument("--c", type=float)
    c.add_argument("--delta", type=float)
    c.add_argument("--mu", default="1")
    c.add_argument("--json", action="store_true", help="also print the report as JSON")
    c.add_argument("--out", help="write regime.json and a manifest here")

    helps = {
        "simulate": "integrate one orbit and write trajectory.csv",
        "apsidal": "apsidal angle and closure verdict at one (E, K)",
        "scan": "closure scan over an (E, K) grid",
        "falsify": "search the Maupertuis surfaces for a non-closed geodesic",
        "decompose": "equator decomposition and stable-orbit census",
        "tannery": "closure census of sampled geodesics",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="INI file with [surface], [potential], [experiment]")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        s.add_argument("--seed", type=int)
        s.add_argument("--jobs", type=int)
        s.add_argument("--out", help="output directory (default runs/<command>)")
        if name in ("simulate", "scan"):
            s.add_argument("--plot", action="store_true", help="also write an SVG")
        if name == "falsify":
            s.add_argument("--allow-riemannian", action="store_true", help="run on epsilon = +1 as a control")
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "classify":
            cmd_classify(args)
            return 0
        cfg = load_config(args.config, args.set, args.seed, args.out)
        args.jobs_resolved = resolve_jobs(args.jobs)
        out = cfg.out or Path("runs") / args.command
        outs = Outputs(out)
        t0 = time.perf_counter()
        summary = COMMANDS[args.command](args, cfg, outs)
        outs.manifest(args.command, cfg, summary, time.perf_counter() - t0)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BertrandLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
