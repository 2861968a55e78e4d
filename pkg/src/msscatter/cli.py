"""
Command line runner: msscatter {profile,remainder,solve,budget,check,run}.

A TOML config with sections [grid] [data] [times] [solver] [budget]
[outputs] [suites] drives every stage; all keys have defaults and unknown
keys are rejected. Each run writes CSV traces, JSON reports, MSFLD1
snapshots and manifest.json into the output directory. The exit code is 0
only when every enabled assertion passes (1 on failed assertions, 2 on a
bad config, 3 when a stage raises).
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import tomli
import tomli_w

from . import __version__
from . import checks as ck
from . import remainders as rm
from . import solver as so
from . import spectral as sp
from .families import magnetic_from_spec, schrodinger_from_spec
from .profiles import AsymptoticState, Profile

STAGES = ("profile", "remainder", "solve", "budget", "check")
CHECK_GROUPS = ("two-route", "decay", "scaling", "ablation", "box-A1", "conservation", "wave-strichartz", "hartree")
# the default data are sized for the solver; the remainder decay, two-route and
# phase-ablation checks need their own scenarios (see demos/configs)
DEFAULT_STAGES = ("profile", "solve", "budget", "check")
DEFAULT_CHECKS = ("scaling", "box-A1", "conservation", "wave-strichartz", "hartree")

DEFAULTS = {
    "grid": {"n": 32, "L_xi": 3.0, "nodes": 48, "refine": 1},
    "data": {
        "schrodinger": {"family": "gaussian", "width": 4.0, "amplitude": 0.00215, "momentum": [0.1, 0.0, 0.0]},
        "magnetic": {"family": "gaussian-curl", "amplitude": 1.0, "width": 1.0, "center": [0.5, 0.3, 0.0]},
        "phased": True,
    },
    "times": {"T": 4.0, "t0": 1024.0, "ratio": 2.0 ** (1.0 / 16.0), "profile_times": [4.0],
              "remainder_range": [10.0, 1000.0], "remainder_samples": 17, "two_route_times": [2.0, 8.0, 32.0]},
    "solver": {"c_cfl": 2.0, "tol": 1e-6, "max_iter": 25, "window": [1.1, 1.35], "t0_factors": [],
               "energy_fit_fraction": 0.125, "min_contracting": 4},
    "budget": {"mode": "unit", "C": [1.0] * 7, "a": 1.0, "c": 1.0, "c3": 0.1, "c4": 0.1, "r1": 1.0, "r2": 1.0},
    "outputs": {"dir": "out", "formats": ["csv", "json", "msfld"]},
    "suites": {"enabled": list(DEFAULT_STAGES), "checks": list(DEFAULT_CHECKS), "seed": 0},
}

FREE_TABLES = {("data", "schrodinger"), ("data", "magnetic")}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, err, manifest):
        super().__init__(f"stage {stage!r} failed: {err}")
        self.stage, self.err, self.manifest = stage, err, manifest


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _merge(base, over, path=()):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = ".".join(path + (k,))
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[k], dict) and path + (k,) not in FREE_TABLES:
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[k] = _merge(base[k], v, path + (k,))
        elif path + (k,) in FREE_TABLES:
            if not isinstance(v, dict) or "family" not in v:
                raise ConfigError(f"{where!r} must be a table with a 'family' key")
            out[k] = copy.deepcopy(v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d):
        cfg = cls(_merge(DEFAULTS, d))
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text):
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path):
        return cls.from_toml(Path(path).read_text())

    def to_toml(self):
        return tomli_w.dumps(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def validate(self):
        v = self.values
        for s in v["suites"]["enabled"]:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}")
        for s in v["suites"]["checks"]:
            if s not in CHECK_GROUPS:
                raise ConfigError(f"unknown check group {s!r}")
        if v["budget"]["mode"] not in ("unit", "measured"):
            raise ConfigError("budget.mode must be 'unit' or 'measured'")
        if len(v["budget"]["C"]) != 7:
            raise ConfigError("budget.C needs seven entries")
        if not 1 <= v["times"]["T"] < v["times"]["t0"]:
            raise ConfigError("need 1 <= T < t0")
        if v["grid"]["n"] % 2:
            raise ConfigError("grid.n must be even")
        try:
            self.build_state()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"data: {e}") from e

    def digest(self):
        return hashlib.sha256(json.dumps(self.values, sort_keys=True).encode()).hexdigest()

    def build_state(self):
        g = self.values["grid"]
        dg = sp.Grid3(int(g["n"]), 2 * np.pi * g["n"] / g["L_xi"])
        u = schrodinger_from_spec(dg, self.values["data"]["schrodinger"])
        mag = magnetic_from_spec(self.values["data"]["magnetic"])
        return AsymptoticState.from_families(dg, u, mag)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    versions: dict
    stages: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self):
        return all(a["passed"] for a in self.assertions) and self.error is None

    def as_dict(self):
        return {"config_hash": self.config_hash, "seed": self.seed, "versions": self.versions,
                "stages": self.stages, "assertions": self.assertions, "files": self.files,
                "wall_clock": self.wall_clock, "error": self.error, "passed": self.passed}

    def reproducible_part(self):
        d = self.as_dict()
        d.pop("wall_clock")
        return d


def _versions():
    return {"msscatter": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


class _Run:
    def __init__(self, cfg: RunConfig, out, seed):
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.formats = set(cfg["outputs"]["formats"])
        self.manifest = RunManifest(cfg.digest(), seed, _versions())
        self._profile = None
        self._track = None
        self.measured = {}

    # -- shared objects -------------------------------------------------------

    @property
    def profile(self) -> Profile:
        if self._profile is None:
            self._profile = Profile.from_state(self.cfg.build_state(), nodes=self.cfg["grid"]["nodes"])
        return self._profile

    def track(self):
        if self._track is None:
            tc = self.cfg["times"]
            ts = so.geometric_times(tc["T"], tc["t0"], tc["ratio"])
            self._track = so.ProfileTrack(self.profile, ts)
        return self._track

    # -- persistence ----------------------------------------------------------

    def _register(self, path):
        data = Path(path).read_bytes()
        self.manifest.files[str(Path(path).relative_to(self.out))] = hashlib.sha256(data).hexdigest()

    def write_json(self, name, obj):
        if "json" not in self.formats:
            return
        p = self.out / name
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default))
        self._register(p)

    def write_traces(self, name, traces):
        if "csv" not in self.formats:
            return
        p = self.out / name
        rm.write_traces_csv(p, traces)
        self._register(p)

    def write_field(self, name, grid, values):
        if "msfld" not in self.formats:
            return
        p = self.out / name
        F = sp.VectorField(grid, values) if np.ndim(values) == 4 else sp.ScalarField(grid, values)
        sp.write_snapshot(p, F)
        self._register(p)

    def add(self, stage, assertions):
        for a in assertions:
            d = a.as_dict()
            d["stage"] = stage
            self.manifest.assertions.append(d)

    # -- stages ----------------------------------------------------------------

    def stage_profile(self):
        prof = self.profile
        info = {"quadrature": prof.quad_info, "data_size": dict(zip(("w3", "xw4"), ck.data_size(prof)))}
        for t in self.cfg["times"]["profile_times"]:
            b = prof.bundle(t, self.cfg["grid"]["refine"])
            self.write_field(f"profile_u_a_t{t:g}.msfld", b.x_grid, b.u_a)
            self.write_field(f"profile_A_a_t{t:g}.msfld", b.x_grid, b.A_a)
        self.write_field("profile_w_plus.msfld", prof.grid, prof.w)
        self.write_json("profile.json", info)
        self.add("profile", ck.scaling_identities(prof))

    def stage_remainder(self):
        tc = self.cfg["times"]
        traces, fits = ck.decay_study(self.profile, tc["remainder_range"], tc["remainder_samples"],
                                      self.cfg["data"]["phased"])
        self.write_traces("remainder_traces.csv", list(traces.values()))
        rows = ck.fit_report(list(traces.values()), fits=fits)
        self.write_json("remainder_fits.json", rows)
        for r in rows:
            if r["expected"] is not None:
                lo, hi = r["expected"]
                self.add("remainder", [ck.inside(f"decay exponent {r['name']}", r["alpha"], lo, hi),
                                       ck.upper(f"decay residual {r['name']}", r["residual"], ck.FIT_RESIDUAL)])

    def stage_solve(self):
        sc = self.cfg["solver"]
        tc = self.cfg["times"]
        tr = self.track()
        solver = so.ComovingSolver(tr, sc["c_cfl"], tuple(sc["window"]))
        X, rep = so.fixed_point_iterate(solver, tol=sc["tol"], max_iter=sc["max_iter"])
        assertions, xr = ck.converged_pair(X, tr.grid, solver.window)
        assertions += ck.contraction(rep, sc["min_contracting"])
        e_as, etr, efit = ck.energy_shape(X, tr.grid, solver.window, t_max=tc["T"] + sc["energy_fit_fraction"] * (tc["t0"] - tc["T"]))
        assertions += e_as
        fn = so.frame_norms(X, tr.grid, solver.window)
        names = [k for k in so.FrameNorms.__dataclass_fields__ if k != "t"]
        self.write_traces("solve_norms.csv", [rm.DecayTrace(k, fn.t, getattr(fn, k), "solver") for k in names] + [etr])
        self.write_field(f"solve_v_t{tc['T']:g}.msfld", tr.grid, X.v[0])
        self.write_field(f"solve_B_t{tc['T']:g}.msfld", tr.grid, X.B[0])
        report = {"contraction": {"distances": rep.distances, "ratios": rep.ratios, "converged": rep.converged,
                                  "iterations": rep.iterations, "tol": rep.tol},
                  "x_norm": {"N": xr.N, "N_half": xr.N_half, "x_norm": xr.x_norm, "h": xr.h_params},
                  "energy_fit": None if efit is None else {"alpha": efit.exponent, "beta": efit.log_power,
                                                           "slope": efit.slope, "residual": efit.residual}}
        if sc["t0_factors"]:
            study = so.t0_study(tr, tc["T"], sc["t0_factors"], sc["c_cfl"], tuple(sc["window"]), sc["tol"], sc["max_iter"])
            report["t0_study"] = {"t0": study.t0s, "seminorms": study.seminorms, "differences": study.differences,
                                  "constants": study.constants}
            assertions += ck.t0_stability(study)
        self.measured["profile"] = so.profile_constants(tr, solver.window)
        report["profile_constants"] = self.measured["profile"]
        self.write_json("solve_report.json", report)
        self.add("solve", assertions)

    def stage_budget(self):
        bc = self.cfg["budget"]
        b = so.NormBudget(C=tuple(bc["C"]), a=bc["a"], c=bc["c"], c3=bc["c3"], c4=bc["c4"], r1=bc["r1"], r2=bc["r2"])
        if bc["mode"] == "measured":
            pc = self.measured.get("profile") or so.profile_constants(self.track())
            C = measured_linear_constants(self.seed)
            b = so.NormBudget(C=C, **{k: pc[k] for k in ("a", "c", "c3", "c4", "a0", "r1", "r2", "r11", "r12")})
        small = b.C[0] * (b.C[2] * b.c4**2 + b.c3**2)
        try:
            so.solve_norm_budget(b)
        except so.BudgetInfeasible as e:
            self.write_json("budget.json", {"feasible": False, "reason": str(e), "smallness": small})
            self.add("budget", [ck.Assertion("budget feasible", small, 1.0, False, "<")])
            return
        self.write_json("budget.json", {"mode": bc["mode"], "C": b.C, "a": b.a, "c": b.c, "c3": b.c3, "c4": b.c4,
                                        "r1": b.r1, "r2": b.r2, "N": b.N, "feasible": b.feasible,
                                        "conditions": b.conditions, "T_min": b.T_min})
        self.add("budget", [ck.Assertion("budget feasible", small, 1.0, bool(small < 1), "<")])

    def stage_check(self):
        groups = self.cfg["suites"]["checks"]
        prof = self.profile
        out = {}
        for gname in groups:
            if gname == "two-route":
                a = ck.two_route(prof, self.cfg["times"]["two_route_times"], self.cfg["grid"]["refine"])
            elif gname == "decay":
                a, traces, _ = ck.decay_exponents(prof)
            elif gname == "scaling":
                a = ck.scaling_identities(prof)
            elif gname == "ablation":
                a = ck.phase_ablation(prof)
            elif gname == "box-A1":
                a = ck.box_A1_checks(prof, self.cfg["grid"]["nodes"])
            elif gname == "conservation":
                a = ck.conservation()
            elif gname == "wave-strichartz":
                a, rep = ck.wave_strichartz(self.seed)
            elif gname == "hartree":
                a, _ = ck.hartree_ensemble(self.seed)
            out[gname] = [x.as_dict() for x in a]
            self.add(f"check:{gname}", a)
        self.write_json("checks.json", out)


def measured_linear_constants(seed=0):
    """C_i from the measured ratios of the linear estimates.

    C2 = C6 from the wave Strichartz ratios, C0, C1, C3, C4 from the Hartree
    ensemble, C5 = 1 (the N5 relation carries no estimate constant).
    """
    _, rep = ck.wave_strichartz(seed)
    cw = max(rep.ratios.values())
    _, ch = ck.hartree_ensemble(seed)
    ch = max(ch, 1.0)
    return (ch, ch, cw, ch, ch, 1.0, cw)


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def run_scenario(cfg: RunConfig, out=None, seed=None, stages=None):
    """Run enabled stages in order; return the manifest (also written to disk)."""
    out = cfg["outputs"]["dir"] if out is None else out
    seed = cfg["suites"]["seed"] if seed is None else seed
    run = _Run(cfg, out, seed)
    enabled = cfg["suites"]["enabled"] if stages is None else stages
    t_start = time.perf_counter()
    for st in STAGES:
        if st not in enabled:
            continue
        t0 = time.perf_counter()
        try:
            getattr(run, f"stage_{st}")()
        except Exception as e:
            run.manifest.error = f"{st}: {type(e).__name__}: {e}"
            run.manifest.wall_clock[st] = time.perf_counter() - t0
            _write_manifest(run)
            raise StageError(st, e, run.manifest) from e
        run.manifest.stages.append(st)
        run.manifest.wall_clock[st] = time.perf_counter() - t0
    run.manifest.wall_clock["total"] = time.perf_counter() - t_start
    _write_manifest(run)
    return run.manifest


def _write_manifest(run):
    (run.out / "manifest.json").write_text(json.dumps(run.manifest.as_dict(), indent=2, sort_keys=True, default=_default))


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="msscatter", description="Long-range scattering lab: profiles, remainders, "
                                "backward solver, norm budget and inequality checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [("profile", "build and dump profile bundles"), ("remainder", "remainder decay study"),
                       ("solve", "fixed point of the backward map"), ("budget", "resolve the norm budget"),
                       ("check", "inequality and identity suites"), ("run", "all enabled stages")]:
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="TOML config file")
        s.add_argument("--out", type=Path, help="output directory")
        s.add_argument("--seed", type=int, help="seed for randomized ensembles")
        s.add_argument("--suite", help="comma separated stages or check groups")
        s.add_argument("--strict", action="store_true", help="turn warnings into errors")
    return p


def _select(cfg, command, suite):
    stages = list(STAGES) if command == "run" else [command]
    if command == "run":
        stages = list(cfg["suites"]["enabled"])
    if suite:
        names = [s.strip() for s in suite.split(",") if s.strip()]
        bad = [s for s in names if s not in STAGES and s not in CHECK_GROUPS]
        if bad:
            raise ConfigError(f"unknown suite(s) {bad}")
        groups = [s for s in names if s in CHECK_GROUPS]
        picked = [s for s in names if s in STAGES]
        if groups:
            cfg.values["suites"]["checks"] = groups
            if "check" not in picked:
                picked.append("check")
        stages = [s for s in STAGES if s in picked] if command == "run" else [s for s in stages if s in picked]
    return stages


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if not args.config:
            cfg.validate()
        stages = _select(cfg, args.command, args.suite)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    with warnings.catch_warnings():
        if args.strict:
            warnings.simplefilter("error")
        try:
            m = run_scenario(cfg, args.out, args.seed, stages)
        except StageError as e:
            print(f"error: {e}", file=sys.stderr)
            return 3
    for a in m.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'}  [{a['stage']}] {a['name']}: {a['value']} {a['relation']} {a['bound']}")
    print(f"{sum(a['passed'] for a in m.assertions)}/{len(m.assertions)} assertions passed; "
          f"outputs in {args.out or cfg['outputs']['dir']}")
    return 0 if m.passed else 1


if __name__ == "__main__":
    sys.exit(main())
