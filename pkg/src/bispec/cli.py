"""Batch front end: config parsing, experiment suites and report emission.

Usage::

    bispec <command> --config <path> [--out <dir>] [--jobs N] [--seed S]

The config is plain ``key = value`` text with ``#`` comments and
``[section]`` headers.  Exit codes: 0 when every check whose hypothesis
holds passed, 1 when one failed, 2 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .core import (
    AngularSector,
    CheckReport,
    DimensionError,
    InvalidArgument,
    Potential,
    RadialGrid,
    require_dimension,
    sharp_constants,
)
from .discretize import build_hamiltonian
from .identities import (
    manufactured_suite,
    refinement_rate,
    verify_A,
    verify_S1,
    verify_S2,
)
from .inequalities import (
    ConstantKind,
    admissibility,
    admissible_threshold,
    cone_threshold,
    estimate_constant,
    nsa_constant,
    rellich_smallness_coefficient,
    repulsivity_coefficient,
    sa_constants,
    threshold_coefficients,
)
from .resolvent import (
    all_quadrant_grid,
    apriori_check_neg,
    apriori_check_pos,
    bump_source,
    gauge_contrast,
    left_half_plane_grid,
    potential_chain_check,
    sa_apriori_check,
    schrodinger_checks,
    sweep_resolvent_norm,
)
from .spectra import check_cone_enclosure, check_total_absence, persistent_candidates

log = logging.getLogger("bispec")

COMMANDS = ("constants", "smallness", "spectrum", "resolvent-sweep", "identities", "full-report")
CSV_COLUMNS = ("re_z", "im_z", "norm", "condition_flag", "sector", "R", "n")

# Residuals below this are rounding noise; no convergence rate can be read off them.
ROUNDING_FLOOR = 1e-12


class ConfigError(ValueError):
    """Malformed or invalid configuration; carries the offending line."""

    def __init__(self, message, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

def _parse_bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_complex(s):
    t = s.replace(" ", "")
    if t.endswith("i"):
        t = t[:-1] + "j"
    z = complex(t)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("must be finite")
    return z


def _parse_float(s):
    x = float(s)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _parse_int_list(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _parse_complex_list(s):
    return tuple(_parse_complex(x) for x in s.split(",") if x.strip())


def _parse_command(s):
    if s not in COMMANDS:
        raise ValueError(f"unknown command {s!r} (expected one of {', '.join(COMMANDS)})")
    return s


# (section, key) -> (parser, default)
SCHEMA = {
    ("", "command"): (_parse_command, None),
    ("", "d"): (int, None),
    ("", "delta"): (_parse_float, 1.0),
    ("", "out"): (str, "."),
    ("", "seed"): (int, 0),
    ("grid", "n"): (int, 2000),
    ("grid", "R"): (_parse_float, 20.0),
    ("grid", "r_doubling"): (_parse_bool, True),
    ("potential", "kind"): (str, "zero"),
    ("potential", "alpha"): (_parse_complex, None),
    ("potential", "height"): (_parse_complex, None),
    ("potential", "center"): (_parse_float, None),
    ("potential", "width"): (_parse_float, None),
    ("potential", "radius"): (_parse_float, None),
    ("potential", "smoothing"): (_parse_float, 0.0),
    ("z_grid", "kind"): (str, "all_quadrant"),
    ("z_grid", "n_modulus"): (int, 10),
    ("z_grid", "n_angle"): (int, 10),
    ("z_grid", "rmin"): (_parse_float, 0.01),
    ("z_grid", "rmax"): (_parse_float, 100.0),
    ("z_grid", "points"): (_parse_complex_list, ()),
    ("z_grid", "sectors"): (_parse_int_list, (0,)),
    ("spectrum", "sectors"): (_parse_int_list, (0, 1, 2, 3)),
    ("spectrum", "method"): (str, "auto"),
    ("identities", "count"): (int, 10),
    ("identities", "n"): (int, 2000),
    ("identities", "R"): (_parse_float, 8.0),
    ("tolerances", "slack"): (_parse_float, 0.02),
    ("tolerances", "constant"): (_parse_float, 0.03),
    ("tolerances", "identity"): (_parse_float, 1e-4),
    ("tolerances", "rate"): (_parse_float, 0.4),
    ("tolerances", "persistence"): (_parse_float, 1e-3),
    ("tolerances", "drift"): (_parse_float, 1.5),
    ("tolerances", "window"): (_parse_float, 1e-3),
    ("tolerances", "angular"): (_parse_float, 1e-3),
    ("tolerances", "uniformity"): (_parse_float, 0.10),
    ("tolerances", "resolvent"): (_parse_float, 1e-6),
}
SECTIONS = {s for s, _ in SCHEMA}
POTENTIAL_PARAMS = {
    "zero": (),
    "rellich": ("alpha",),
    "bump": ("height", "center", "width"),
    "step": ("height", "radius"),
}
Z_GRID_KINDS = ("all_quadrant", "left_half", "list")


@dataclass
class RunConfig:
    """Validated run configuration."""

    command: str
    d: int
    n: int = 2000
    R: float = 20.0
    r_doubling: bool = True
    potential: dict = field(default_factory=lambda: {"kind": "zero"})
    z_grid: dict = field(default_factory=lambda: {"kind": "all_quadrant"})
    delta: float = 1.0
    out: str = "."
    seed: int = 0
    spectrum: dict = field(default_factory=dict)
    identities: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def build_potential(self) -> Potential:
        p = dict(self.potential)
        kind = p.pop("kind")
        if kind == "zero":
            return Potential.zero()
        if kind == "rellich":
            return Potential.rellich(p["alpha"])
        if kind == "bump":
            return Potential.bump(p["height"], p["center"], p["width"])
        return Potential.step(p["height"], p["radius"], p.get("smoothing", 0.0))

    def build_z_grid(self) -> np.ndarray:
        z = self.z_grid
        if z["kind"] == "list":
            return np.array(z["points"], dtype=complex)
        f = all_quadrant_grid if z["kind"] == "all_quadrant" else left_half_plane_grid
        return f(z["n_modulus"], z["n_angle"], z["rmin"], z["rmax"])

    def tol(self, key):
        return self.tolerances[key]


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate config text.

    Parameters
    ----------
    text : str
    command : str, optional
        Command given on the command line.  It must agree with a
        ``command`` key when both are present.

    Raises
    ------
    ConfigError
        With the line number for malformed lines, unknown or duplicate keys,
        bad values and failed domain checks.
    """
    values, lines = {}, {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        slot = (section, key)
        name = f"{section}.{key}" if section else key
        if slot not in SCHEMA:
            raise ConfigError(f"unknown key {name!r}", lineno)
        if slot in values:
            raise ConfigError(f"duplicate key {name!r} (lines {lines[slot]} and {lineno})", lineno)
        parser = SCHEMA[slot][0]
        try:
            values[slot] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name!r}: {exc}", lineno) from None
        lines[slot] = lineno

    def get(section, key):
        return values.get((section, key), SCHEMA[(section, key)][1])

    def where(section, key):
        return lines.get((section, key))

    cmd = get("", "command")
    if command is not None:
        if cmd is not None and cmd != command:
            raise ConfigError(f"config command {cmd!r} differs from requested {command!r}",
                              where("", "command"))
        cmd = _parse_command(command)
    if cmd is None:
        raise ConfigError("missing required key 'command'")
    if ("", "d") not in values:
        raise ConfigError("missing required key 'd'")
    try:
        d = require_dimension(values[("", "d")])
    except DimensionError as exc:
        raise ConfigError(str(exc), where("", "d")) from None

    n, R = get("grid", "n"), get("grid", "R")
    if n < 8:
        raise ConfigError("grid.n must be at least 8", where("grid", "n"))
    if not R > 0:
        raise ConfigError("grid.R must be positive", where("grid", "R"))
    if not get("", "delta") > 0:
        raise ConfigError("delta must be positive", where("", "delta"))

    kind = get("potential", "kind")
    if kind not in POTENTIAL_PARAMS:
        raise ConfigError(f"unknown potential kind {kind!r}", where("potential", "kind"))
    pot = {"kind": kind}
    for key in POTENTIAL_PARAMS[kind]:
        if ("potential", key) not in values:
            raise ConfigError(f"potential kind {kind!r} needs 'potential.{key}'",
                              where("potential", "kind"))
        pot[key] = values[("potential", key)]
    if kind == "step":
        pot["smoothing"] = get("potential", "smoothing")
    extra = {k for (s, k) in values if s == "potential"} - set(pot) - {"kind"}
    if extra:
        k = sorted(extra)[0]
        raise ConfigError(f"key 'potential.{k}' does not apply to kind {kind!r}",
                          where("potential", k))

    zkind = get("z_grid", "kind")
    if zkind not in Z_GRID_KINDS:
        raise ConfigError(f"unknown z_grid kind {zkind!r}", where("z_grid", "kind"))
    zg = {k: get("z_grid", k) for (s, k) in SCHEMA if s == "z_grid"}
    if zkind == "list" and not zg["points"]:
        raise ConfigError("z_grid kind 'list' needs 'points'", where("z_grid", "kind"))
    if zkind != "list" and not 0 < zg["rmin"] < zg["rmax"]:
        raise ConfigError("z_grid needs 0 < rmin < rmax", where("z_grid", "rmin"))
    for key in ("sectors",):
        if any(l < 0 for l in zg[key]) or not zg[key]:
            raise ConfigError("sectors must be non-negative integers", where("z_grid", key))

    spectrum_opts = {k: get("spectrum", k) for (s, k) in SCHEMA if s == "spectrum"}
    if spectrum_opts["method"] not in ("auto", "dense", "arnoldi"):
        raise ConfigError(f"unknown spectrum method {spectrum_opts['method']!r}", where("spectrum", "method"))
    if not spectrum_opts["sectors"] or any(l < 0 for l in spectrum_opts["sectors"]):
        raise ConfigError("sectors must be non-negative integers", where("spectrum", "sectors"))
    ident = {k: get("identities", k) for (s, k) in SCHEMA if s == "identities"}
    if ident["n"] < 64 or not ident["R"] > 0 or ident["count"] < 1:
        raise ConfigError("identities needs n >= 64, R > 0 and count >= 1",
                          where("identities", "n") or where("identities", "R"))
    tols = {k: get("tolerances", k) for (s, k) in SCHEMA if s == "tolerances"}
    for k, v in tols.items():
        if not v > 0:
            raise ConfigError(f"tolerances.{k} must be positive", where("tolerances", k))

    cfg = RunConfig(cmd, d, n, R, get("grid", "r_doubling"), pot, zg, get("", "delta"),
                    get("", "out"), get("", "seed"), spectrum_opts, ident, tols)
    try:
        cfg.build_potential()
    except InvalidArgument as exc:
        raise ConfigError(str(exc), where("potential", "kind")) from None
    return cfg


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_jsonable(obj):
    """Convert report content to plain JSON types.

    Complex numbers become ``{"re": .., "im": ..}`` and non-finite floats
    become ``null``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(report: dict) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def write_csv(path: Path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_csv_cell(row[c]) for c in CSV_COLUMNS])


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

class Report:
    """Accumulates report sections, checks and sweep tables."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.sections = {}
        self.checks: list[CheckReport] = []
        self.sweeps: dict[str, list[dict]] = {}

    def add_checks(self, reports):
        self.checks.extend(reports)

    def summary(self) -> dict:
        failed = [c.name for c in self.checks if c.hypothesis_met and c.passed is False]
        unmet = [c.name for c in self.checks if not c.hypothesis_met]
        return {"checks": len(self.checks), "failed": failed, "hypothesis_unmet": unmet,
                "exit_code": 1 if failed else 0}

    def to_dict(self) -> dict:
        return {"command": self.cfg.command, "config": asdict(self.cfg),
                "checks": [c.to_dict() for c in self.checks],
                "sweep_files": sorted(self.sweeps), "summary": self.summary(), **self.sections}


def _grid(cfg):
    return RadialGrid(cfg.n, cfg.R, cfg.d)


def suite_constants(cfg: RunConfig, rep: Report, **_):
    """Discrete sharp constants at ``(n, R)`` (and ``(2n, 2R)``)."""
    kinds = [(ConstantKind.HARDY, None), (ConstantKind.RELLICH, None),
             (ConstantKind.HARDY_RELLICH, None), (ConstantKind.WEIGHTED_HARDY, -1.0)]
    grids = [_grid(cfg)] + ([_grid(cfg).extended(2)] if cfg.r_doubling else [])
    out = []
    for kind, gamma in kinds:
        ests = [estimate_constant(kind, cfg.d, g, gamma=gamma) for g in grids]
        e = ests[0]
        row = e.to_dict() | {"within_tolerance": bool(0 <= e.relative_gap <= cfg.tol("constant")),
                             "tolerance": cfg.tol("constant")}
        trend = {"gap_R": e.relative_gap}
        if len(ests) > 1:
            trend["gap_2R"] = ests[1].relative_gap
            row["at_2R"] = ests[1].to_dict()
        out.append(row)
        # The discrete quotient of a sharp inequality can never undercut its constant.
        rep.add_checks([CheckReport(f"constant_lower_bound_{kind.value}",
                                    -min(x.relative_gap for x in ests), 1e-9, trend=trend,
                                    details={"n": cfg.n, "R": cfg.R, "d": cfg.d, "gamma": gamma})])
    rep.sections["constants"] = out


def suite_smallness(cfg: RunConfig, rep: Report, **_):
    """Smallness coefficients of ``V`` against every threshold."""
    V = cfg.build_potential()
    d, g = cfg.d, _grid(cfg)
    adm = admissibility(V, d, cfg.n, cfg.R, r_doubling=cfg.r_doubling)
    a_delta = max(rellich_smallness_coefficient(V, d, g, AngularSector(l, d)) for l in (0, 1, 2))
    p, q = threshold_coefficients(d)
    sec = {"admissibility": adm.to_dict(), "a_star": admissible_threshold(d),
           "threshold_coefficients": {"p": p, "q": q},
           "cone": {"delta": cfg.delta, "a_delta": a_delta,
                    "threshold": cone_threshold(cfg.delta, d),
                    "enclosure_hypothesis": a_delta < cone_threshold(cfg.delta, d)},
           "constants": asdict(sharp_constants(d))}
    try:
        sec["nsa_constant"] = nsa_constant(d, adm.a_measured)
    except InvalidArgument as exc:
        sec["nsa_constant"] = None
        sec["nsa_note"] = str(exc)
    if V.is_real:
        try:
            a = repulsivity_coefficient(V, d, g)
            sec["repulsivity"] = {"a": a, "hypothesis": a < 1}
            if a < 1:
                c, ct = sa_constants(d, a)
                sec["repulsivity"] |= {"c": c, "c_tilde": ct}
        except InvalidArgument as exc:
            sec["repulsivity"] = {"note": str(exc)}
    rep.sections["smallness"] = sec


def suite_spectrum(cfg: RunConfig, rep: Report, **_):
    """Persistent off-axis eigenvalues: total absence and cone enclosure."""
    V = cfg.build_potential()
    t = cfg.tolerances
    sectors = cfg.spectrum["sectors"]
    cand = persistent_candidates(V, cfg.d, cfg.n, cfg.R, sectors, t["persistence"], t["drift"],
                                 t["window"], cfg.spectrum["method"])
    ver = check_total_absence(V, cfg.d, cfg.n, cfg.R, sectors, candidates=cand)
    absence = CheckReport("total_absence", float(np.count_nonzero(ver.persistent)), 0.0,
                          hypothesis_met=ver.hypothesis_met,
                          details={"n": cfg.n, "R": cfg.R, "d": cfg.d,
                                   "persistent_eigenvalues": ver.persistent_eigenvalues})
    cone = check_cone_enclosure(V, cfg.d, cfg.delta, cfg.n, cfg.R, sectors, t["angular"],
                                candidates=cand)
    rep.add_checks([absence, cone])
    rep.sections["spectrum"] = ver.to_dict()


def suite_sweep(cfg: RunConfig, rep: Report, jobs: int = 1, seed: int = 0):
    """Weighted resolvent norms over the z grid, per sector and radius."""
    V = cfg.build_potential()
    d = cfg.d
    zg = cfg.build_z_grid()
    grids = [_grid(cfg)] + ([_grid(cfg).extended(2)] if cfg.r_doubling else [])
    sups, out = [], []
    for g in grids:
        sup = -math.inf
        for ell in cfg.z_grid["sectors"]:
            H = build_hamiltonian(d, AngularSector(ell, d), g, V)
            sw = sweep_resolvent_norm(H, zg, tol=cfg.tol("resolvent"), jobs=jobs, seed=seed)
            name = f"sweep_l{ell}_R{g.R:g}.csv"
            rep.sweeps[name] = sw.rows()
            out.append(sw.to_dict() | {"csv": name})
            if np.isfinite(sw.sup_norm):
                sup = max(sup, sw.sup_norm)
        sups.append(sup)
    rep.sections["sweeps"] = out
    adm = admissibility(V, d, cfg.n, cfg.R, r_doubling=cfg.r_doubling)
    if len(sups) > 1:
        change = abs(sups[1] / sups[0] - 1) if math.isfinite(sups[0]) and sups[0] else math.inf
        rep.add_checks([CheckReport("resolvent_uniformity", change, cfg.tol("uniformity"),
                                    hypothesis_met=adm.admissible,
                                    trend={"sup_R": sups[0], "sup_2R": sups[1]},
                                    details={"a_measured": adm.a_measured, "a_star": adm.a_star,
                                             "points": len(zg)})])
    if V.kind.value == "zero" and np.all(zg.real < 0):
        c = sharp_constants(d)
        rep.add_checks([CheckReport("free_resolvent_bound", max(sups),
                                    (1 + cfg.tol("slack")) / c.C_R,
                                    details={"constant": 1 / c.C_R, "points": len(zg)})])


def suite_identities(cfg: RunConfig, rep: Report, seed: int = 0, **_):
    """Multiplier identities on the manufactured suite over three doublings."""
    d = cfg.d
    R = cfg.identities["R"]
    n = cfg.identities["n"]
    ns = [n // 8, n // 4, n // 2, n]
    V = Potential.step(1.0, 3.0, 2.0)
    suite = manufactured_suite(d, cfg.identities["count"], seed)
    rows = {"S1": [], "S2": [], "A": []}
    for m in suite:
        sector = AngularSector(m.ell, d)
        res = {k: [] for k in rows}
        hs = []
        for n in ns:
            g = RadialGrid(n, R, d)
            r = g.nodes
            u = m.u(r)
            b = m.bilaplacian(r)
            hs.append(g.h)
            z1, z2, z3 = 1 + 1j, 2 - 3j, 0.5
            res["S1"].append(verify_S1(u, b - z1 * u, z1, g, d, sector))
            res["S2"].append(verify_S2(u, b - z2 * u, z2, g, d, sector))
            res["A"].append(verify_A(u, V, b + V(r) * u - z3 * u, None, z3, g, d, sector))
        for k, lst in res.items():
            vals = [x.residual for x in lst]
            rows[k].append({"coeffs": list(m.coeffs), "lam": m.lam, "sector": m.ell,
                            "residuals": vals, "ns": ns, "R": R,
                            "rate": refinement_rate(hs, vals)})
    checks = []
    for k, lst in rows.items():
        worst = max(r["residuals"][-1] for r in lst)
        checks.append(CheckReport(f"identity_{k}", worst, cfg.tol("identity"),
                                  details={"n": n, "R": R, "inputs": len(lst)}))
        # A rate is only meaningful while residuals stay above rounding noise.
        measurable = all(min(r["residuals"]) > ROUNDING_FLOOR for r in lst)
        dev = max(abs(r["rate"] - 2.0) if math.isfinite(r["rate"]) else math.inf for r in lst)
        checks.append(CheckReport(f"identity_rate_{k}", dev, cfg.tol("rate"),
                                  hypothesis_met=measurable,
                                  details={"target": 2.0, "ns": ns, "rounding_floor": ROUNDING_FLOOR,
                                           "rates": [r["rate"] for r in lst]}))
    rep.add_checks(checks)
    rep.sections["identities"] = rows


def suite_apriori(cfg: RunConfig, rep: Report, **_):
    """A priori resolvent estimates, Schrodinger lemmas and potential chains."""
    V = cfg.build_potential()
    d, g = cfg.d, _grid(cfg)
    f = bump_source()
    s0 = AngularSector(0, d)
    H = build_hamiltonian(d, s0, g, V)
    checks = [apriori_check_neg(H, z, f, V, cfg.tol("slack")) for z in (-1.0, -1 + 1j, -10 - 5j)]
    if V.kind.value == "zero":
        checks.append(apriori_check_pos(4.0, f, g, cfg.r_doubling))
        checks.append(gauge_contrast(4.0, f, g))
    for kappa in (1.0, 1 + 1j, 5.0):
        checks.extend(schrodinger_checks(kappa, f, g, cfg.tol("slack")))
    if V.kind.value != "zero":
        checks.extend(potential_chain_check(V, d, g, f, 4.0))
    if V.is_real and V.derivative(g.nodes) is not None:
        for z in (-10.0, 0.0, 10.0, 100.0):
            checks.extend(sa_apriori_check(V, z, f, g, cfg.tol("slack"), cfg.r_doubling))
    rep.add_checks(checks)


SUITES = {
    "constants": (suite_constants,),
    "smallness": (suite_smallness,),
    "spectrum": (suite_spectrum,),
    "resolvent-sweep": (suite_sweep,),
    "identities": (suite_identities,),
    "full-report": (suite_constants, suite_smallness, suite_spectrum, suite_sweep,
                    suite_identities, suite_apriori),
}


def execute(cfg: RunConfig, jobs: int = 1, seed: int | None = None) -> Report:
    """Run the suites of ``cfg.command`` and return the assembled report."""
    seed = cfg.seed if seed is None else seed
    rep = Report(cfg)
    for suite in SUITES[cfg.command]:
        log.info("running %s", suite.__name__)
        suite(cfg, rep, jobs=jobs, seed=seed)
    return rep


def run(cfg: RunConfig, out: str | Path | None = None, jobs: int = 1,
        seed: int | None = None) -> int:
    """Execute ``cfg`` and write ``<command>.json`` plus one CSV per sweep.

    Returns the exit code: 0, 1 when a hypothesis-met check failed, 2 on
    runtime or I/O errors.
    """
    try:
        rep = execute(cfg, jobs, seed)
        outdir = Path(cfg.out if out is None else out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"{cfg.command}.json").write_text(dump_json(rep.to_dict()), encoding="utf-8")
        for name, rows in rep.sweeps.items():
            write_csv(outdir / name, rows)
    except (InvalidArgument, OSError, RuntimeError) as exc:
        print(f"bispec: error: {exc}", file=sys.stderr)
        return 2
    summary = rep.summary()
    for name in summary["failed"]:
        print(f"bispec: check failed: {name}", file=sys.stderr)
    return summary["exit_code"]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bispec", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="key = value config file")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.jobs < 1:
        print("bispec: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.command)
    except (OSError, UnicodeDecodeError, ConfigError) as exc:
        print(f"bispec: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, args.out, args.jobs, args.seed)


if __name__ == "__main__":
    sys.exit(main())
