"""Batch driver: strict run configuration, scans and CSV/JSON export.

Usage::

    polarmol TASK [--config FILE] [--out DIR] [--workers N] [--seed N]
    polarmol run --config FILE            # task taken from the config
    polarmol figure fig2..fig8 [--out DIR]

Exit codes: 0 success, 1 other package error, 2 configuration error,
3 convergence failure, 4 window/edge error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, spectra
from .cavity import (CavityParams, boa_absorption_single, coupled_pes_single, exact_absorption_single,
                     ground_photon_number, ground_state_pes_usc, solve_exact_cavity, vertical_gap_omega,
                     zero_detuning_omega)
from .errors import (BoxTooSmallError, ConvergenceError, NotStronglyCoupledError, ParameterError, PolarmolError,
                     WindowError)
from .molecule import (FIXTURE_NAMES, MoleculeParams, bare_absorption, build_bo_structure, calibrate, default_grids,
                       load_fixture, measure_observables, surface_minimum, targets_from, vibrational_levels)
from .multimol import (boa_absorption_two, collective_scaling_report, coupled_pes_two, exact_absorption_two,
                       fit_two_mol_surfaces)
from .nonbo import (boa_validity, fine_structure_near_crossing, harmonic_from_fixture, linearized_from_fixture,
                    lorentzian_fwhm, nonbo_model, nonbo_numeric, relative_l2)
from .numerics import Grid1D
from .units import BOHR_MILLIANGSTROM, au_to_ev

log = logging.getLogger(__name__)

TASKS = ("calibrate", "bare", "absorb", "pes1", "pes2", "nonbo", "usc-scan", "scaling-report")
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
FORMAT_VERSION = 1

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_WINDOW = 0, 1, 2, 3, 4


class ConfigError(ParameterError):
    """Malformed or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# configuration

# section -> key -> default (None: no default / optional)
_SCHEMA = {
    "run": {"task": None, "out": "polarmol-out"},
    "molecule": {"fixture": "anthracene_like", "fixture2": None, "molecules": "1"},
    "cavity": {"omega_c": "auto", "g": "0.002", "n_max": "4"},
    "grids": {"x_spacing": "0.1", "x_extent": None, "points_per_width": "6"},
    "spectrum": {"epsilon_ev": str(spectra.DEFAULT_EPSILON_EV), "half_span_ev": str(spectra.DEFAULT_HALF_SPAN_EV),
                 "n_omega": str(spectra.DEFAULT_N_OMEGA)},
    "calibrate": {"targets": None, "init": None, "restarts": "3", "name": "calibrated"},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration.

    ``omega_c`` is ``"auto"`` (bare absorption maximum), ``"vertical"``
    (E_e - E_g at the ground minimum) or a number in a.u.; ``g`` is a
    tuple of couplings in a.u.; ``targets`` are (omega_vib eV, Delta R
    bohr, transition eV) for the calibrate task.
    """

    task: str
    fixture: str = "anthracene_like"
    fixture2: str | None = None
    molecules: int = 1
    omega_c: str | float = "auto"
    g: tuple = (0.002,)
    n_max: int = 4
    x_spacing: float = 0.1
    x_extent: float | None = None
    points_per_width: float = 6.0
    epsilon_ev: float = spectra.DEFAULT_EPSILON_EV
    half_span_ev: float = spectra.DEFAULT_HALF_SPAN_EV
    n_omega: int = spectra.DEFAULT_N_OMEGA
    targets: tuple | None = None
    init: str | None = None
    restarts: int = 3
    name: str = "calibrated"
    out: str = "polarmol-out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose one of {', '.join(TASKS)}")
        if self.molecules not in (1, 2):
            raise ConfigError("molecules must be 1 or 2")
        if isinstance(self.omega_c, str) and self.omega_c not in ("auto", "vertical"):
            raise ConfigError(f"omega_c must be auto, vertical or a number, got {self.omega_c!r}")
        if not isinstance(self.omega_c, str) and not self.omega_c > 0:
            raise ConfigError("omega_c must be positive")
        if any(g < 0 for g in self.g) or not self.g:
            raise ConfigError("g must be a non-empty list of non-negative couplings")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.task in ("scaling-report", "usc-scan", "nonbo") and any(g == 0 for g in self.g):
            raise ConfigError(f"{self.task} needs couplings g > 0")
        if self.task == "scaling-report" and len(set(self.g)) < 2:
            raise ConfigError("scaling-report needs at least two distinct g values to fit slopes")
        if self.task == "calibrate" and (self.targets is None or len(self.targets) != 3):
            raise ConfigError("calibrate needs [calibrate] targets = omega_vib_eV, delta_R_bohr, transition_eV")

    @classmethod
    def from_text(cls, text: str, **overrides) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from None
        raw = {}
        for section in cp.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]; allowed: {', '.join(_SCHEMA)}")
            for key, value in cp[section].items():
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: {', '.join(_SCHEMA[section])}")
                raw[key] = value.strip()
        return cls.from_mapping(raw, **overrides)

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, **overrides)

    @classmethod
    def from_mapping(cls, raw: dict, **overrides) -> "RunConfig":
        vals = {k: v for sec in _SCHEMA.values() for k, v in sec.items()}
        vals.update(raw)
        task = overrides.pop("task", None) or vals["task"]
        if task is None:
            raise ConfigError("no task given (command line verb or [run] task)")
        if vals["task"] is not None and task != vals["task"]:
            raise ConfigError(f"verb {task!r} conflicts with configured task {vals['task']!r}")
        try:
            kw = dict(
                task=task,
                fixture=vals["fixture"],
                fixture2=vals["fixture2"] or None,
                molecules=int(vals["molecules"]),
                omega_c=vals["omega_c"] if vals["omega_c"] in ("auto", "vertical") else float(vals["omega_c"]),
                g=tuple(float(s) for s in str(vals["g"]).split(",") if s.strip()),
                n_max=int(vals["n_max"]),
                x_spacing=float(vals["x_spacing"]),
                x_extent=None if vals["x_extent"] in (None, "", "auto") else float(vals["x_extent"]),
                points_per_width=float(vals["points_per_width"]),
                epsilon_ev=float(vals["epsilon_ev"]),
                half_span_ev=float(vals["half_span_ev"]),
                n_omega=int(vals["n_omega"]),
                targets=None if not vals["targets"] else tuple(float(s) for s in vals["targets"].split(",")),
                init=vals["init"] or None,
                restarts=int(vals["restarts"]),
                name=vals["name"],
                out=vals["out"],
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value in configuration: {exc}") from None
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["g"] = list(self.g)
        d["targets"] = None if self.targets is None else list(self.targets)
        return d


def resolve_fixture(name: str) -> MoleculeParams:
    """A shipped fixture name or the path of a parameter file."""
    if name in FIXTURE_NAMES:
        return load_fixture(name)
    path = Path(name)
    if path.is_file():
        return MoleculeParams.read(path)
    raise ConfigError(f"fixture {name!r} not found: use one of {', '.join(FIXTURE_NAMES)} or a parameter file; "
                      "new fixtures are produced by the 'calibrate' task")


# ---------------------------------------------------------------------------
# output


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12e}"


@dataclass
class Table:
    """Named columns with units, written as CSV with '#' comment lines."""

    name: str
    columns: dict
    units: dict = field(default_factory=dict)
    notes: tuple = ()
    block: str | None = None   # column whose changes start a new (blank-line separated) block

    def render(self, run_id: str) -> str:
        names = list(self.columns)
        cols = [np.asarray(self.columns[k]) for k in names]
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise ValueError(f"ragged columns in table {self.name}")
        lines = [f"# polarmol {__version__}; format {FORMAT_VERSION}; run {run_id[:16]}"]
        lines += [f"# {note}" for note in self.notes]
        lines.append("# units: " + ", ".join(f"{k} [{self.units.get(k, '-')}]" for k in names))
        lines.append(",".join(names))
        prev = None
        for i in range(n):
            if self.block is not None:
                key = self.columns[self.block][i]
                if prev is not None and key != prev:
                    lines.append("")
                prev = key
            lines.append(",".join(_fmt(c[i]) for c in cols))
        return "\n".join(lines) + "\n"


def read_table(path) -> dict:
    """Columns of a CSV written by :class:`Table`, as float arrays."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    names = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    out = {}
    for j, name in enumerate(names):
        col = [r[j] for r in rows]
        try:
            out[name] = np.array(col, dtype=float)
        except ValueError:
            out[name] = np.array(col)
    return out


class Output:
    """Collects tables and JSON documents, then writes them with a manifest."""

    def __init__(self, directory, config: dict, params: dict):
        self.dir = Path(directory)
        self.config = config
        self.params = params
        canon = json.dumps({"config": config, "params": params}, sort_keys=True).encode()
        self.run_id = _sha256(canon)
        self.files: dict[str, str] = {}

    def table(self, t: Table) -> Path:
        return self._write(f"{t.name}.csv", t.render(self.run_id))

    def json(self, name: str, doc: dict) -> Path:
        doc = dict(doc, run=self.run_id[:16], format=FORMAT_VERSION)
        return self._write(f"{name}.json", json.dumps(_plain(doc), indent=1, sort_keys=True) + "\n")

    def text(self, name: str, body: str) -> Path:
        return self._write(name, body)

    def _write(self, name, body: str) -> Path:
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body)
        self.files[name] = _sha256(body.encode())
        return path

    def manifest(self) -> Path:
        doc = {
            "tool": "polarmol",
            "version": __version__,
            "format_version": FORMAT_VERSION,
            "run_id": self.run_id,
            "config": self.config,
            "params": self.params,
            "params_hash": _sha256(json.dumps(self.params, sort_keys=True).encode()),
            "files": dict(sorted(self.files.items())),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        path = self.dir / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_plain(doc), indent=1) + "\n")
        return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _gtag(g: float) -> str:
    return f"g{g:.4f}"


# ---------------------------------------------------------------------------
# shared setup


@dataclass(frozen=True)
class Context:
    """Everything a worker needs; picklable."""

    params: MoleculeParams
    grid_x: Grid1D
    grid_R: Grid1D
    omega_c: float
    n_max: int
    epsilon_ev: float
    omega_ev: tuple
    molecules: int = 1

    @property
    def grids(self):
        return self.grid_x, self.grid_R

    def structure(self):
        return _structure(self.params, self.grid_x, self.grid_R)

    def cavity(self, g: float) -> CavityParams:
        return CavityParams(self.omega_c, g, self.n_max)


_ES_CACHE: dict = {}


def _structure(p, gx, gR, keep_vectors=False):
    key = (p, gx, gR, keep_vectors)
    if key not in _ES_CACHE:
        _ES_CACHE[key] = build_bo_structure(p, gx, gR, keep_vectors=keep_vectors)
    return _ES_CACHE[key]


def _grids(cfg: RunConfig, p: MoleculeParams):
    return default_grids(p, x_spacing=cfg.x_spacing, x_extent=cfg.x_extent, points_per_width=cfg.points_per_width)


def _omega_c(cfg: RunConfig, es, omega_ev=None) -> float:
    if cfg.omega_c == "vertical":
        return vertical_gap_omega(es)
    if cfg.omega_c == "auto":
        bare = bare_absorption(es, epsilon_ev=cfg.epsilon_ev, omega_ev=omega_ev)
        return zero_detuning_omega(bare)
    return float(cfg.omega_c)


def _omega_grid(cfg: RunConfig, es) -> np.ndarray:
    r_e, _, _ = surface_minimum(es.R, es.E_g)
    center = au_to_ev(float(np.diff(es.energies_at(r_e))[0]))
    return spectra.default_omega_grid(center, cfg.half_span_ev, cfg.n_omega)


def build_context(cfg: RunConfig, params: MoleculeParams | None = None) -> Context:
    p = resolve_fixture(cfg.fixture) if params is None else params
    gx, gR = _grids(cfg, p)
    es = _structure(p, gx, gR)
    om = _omega_grid(cfg, es)
    return Context(p, gx, gR, _omega_c(cfg, es, om), cfg.n_max, cfg.epsilon_ev, tuple(om), cfg.molecules)


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# tasks


def task_calibrate(cfg: RunConfig, out: Output) -> dict:
    init = resolve_fixture(cfg.init or cfg.fixture)
    targets = targets_from(*cfg.targets)
    try:
        res = calibrate(targets, init, restarts=cfg.restarts, seed=cfg.seed)
    except ConvergenceError as exc:
        if exc.best is not None:
            out.text("calibration_report.txt", exc.best.report + "\n")
        raise
    m = res.measured
    header = "\n".join([
        f"{cfg.name}: calibrated model molecule, atomic units.",
        f"Generated by polarmol {__version__} calibrate from {cfg.init or cfg.fixture}, seed {cfg.seed}.",
        f"Targets: omega_vib {targets.omega_vib} eV, delta_R {targets.delta_R} bohr, "
        f"absorption maximum {targets.transition_energy} eV.",
        f"Measured: omega_vib {m.omega_vib:.5f} eV, delta_R {m.delta_R:.5f} bohr, "
        f"absorption maximum {m.transition_energy:.4f} eV,",
        f"vertical gap {m.vertical_gap:.4f} eV, mu_eg(R_e) {m.dipole_at_Re:.3f} a.u.",
    ])
    out.text(f"{cfg.name}.params", res.params.to_text(header))
    out.text("calibration_report.txt", res.report + "\n")
    return {"params": asdict(res.params), "relative_errors": res.relative_errors}


def task_bare(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "",
              absorption_name: str | None = None) -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    es = ctx.structure()
    out.table(Table(prefix + "pes", {"R": es.R, "E_g": es.E_g, "E_e": es.E_e, "mu_eg": es.mu_eg},
                    {"R": "bohr", "E_g": "Ha", "E_e": "Ha", "mu_eg": "a.u."}))
    for which in ("g", "e"):
        lv = vibrational_levels(es, which, n=10)
        cols = {"R": es.R}
        for k in range(len(lv.energies)):
            cols[f"density_{k}"] = lv.densities[:, k]
        out.table(Table(f"{prefix}densities_{which}", cols, {"R": "bohr"},
                        notes=(f"|chi_k(R)|^2 on E_{which}, normalised on the R grid",)))
        cols = {"k": np.arange(len(lv.energies)), "energy": lv.energies, "energy_ev": au_to_ev(lv.energies)}
        out.table(Table(f"{prefix}levels_{which}", cols, {"energy": "Ha", "energy_ev": "eV"}))
    s = bare_absorption(es, epsilon_ev=ctx.epsilon_ev, omega_ev=np.array(ctx.omega_ev))
    out.table(Table(absorption_name or prefix + "absorption", {"omega": s.omega, "sigma": s.sigma},
                    {"omega": "eV", "sigma": "a.u."}))
    obs = measure_observables(es, epsilon_ev=ctx.epsilon_ev)
    doc = {"observables": asdict(obs), "omega_c_au": ctx.omega_c, "omega_c_ev": au_to_ev(ctx.omega_c)}
    out.json(prefix + "observables", doc)
    return doc


def _absorb_one(args):
    ctx, g = args
    c = ctx.cavity(g)
    om = np.array(ctx.omega_ev)
    es = ctx.structure()
    if ctx.molecules == 1:
        exact = exact_absorption_single(ctx.params, c, ctx.grids, ctx.epsilon_ev, om)
        boa = boa_absorption_single(es, c, ctx.epsilon_ev, om)
    else:
        exact = exact_absorption_two(ctx.params, c, ctx.grids, ctx.epsilon_ev, om)
        boa = boa_absorption_two(es, c, ctx.epsilon_ev, om)
    return g, exact, boa


def _split(s):
    try:
        return spectra.rabi_splitting(s)
    except NotStronglyCoupledError:
        return float("nan")


def task_absorb(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "") -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    if ctx.molecules == 2 and cfg.fixture2 not in (None, cfg.fixture):
        raise ConfigError("two-molecule absorption is implemented for identical molecules only")
    es = ctx.structure()
    rows = {"g": [], "overlap": [], "splitting_exact": [], "splitting_boa": [], "two_g_mu_sqrtN": []}
    mu_c = abs(float(es.dipoles_at(_crossing_or_min(es, ctx.omega_c))[1, 0]))
    for g, exact, boa in _pmap(_absorb_one, [(ctx, g) for g in cfg.g], cfg.workers):
        out.table(Table(f"{prefix}absorption_{_gtag(g)}", {"omega": exact.omega, "sigma_exact": exact.sigma,
                                                           "sigma_boa": boa.sigma},
                        {"omega": "eV", "sigma_exact": "a.u.", "sigma_boa": "a.u."},
                        notes=(f"molecules {ctx.molecules}; g {g} a.u.; omega_c {au_to_ev(ctx.omega_c):.6f} eV",)))
        rows["g"].append(g)
        rows["overlap"].append(spectra.spectral_overlap(boa, exact))
        rows["splitting_exact"].append(_split(exact))
        rows["splitting_boa"].append(_split(boa))
        rows["two_g_mu_sqrtN"].append(au_to_ev(2 * g * mu_c * np.sqrt(ctx.molecules)))
    out.table(Table(prefix + "absorb_summary", rows, {"g": "a.u.", "overlap": "-", "splitting_exact": "eV",
                                                      "splitting_boa": "eV", "two_g_mu_sqrtN": "eV"}))
    return {k: list(v) for k, v in rows.items()}


def _crossing_or_min(es, omega_c):
    from .nonbo import crossing_point
    try:
        return crossing_point(es, omega_c)
    except WindowError:
        return surface_minimum(es.R, es.E_g)[0]


def task_pes1(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "") -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    es = ctx.structure()
    for g in cfg.g:
        pes = coupled_pes_single(es, ctx.cavity(g))
        cols = {"R": es.R, "E_g": es.E_g, "E_e": es.E_e, "E_g_plus_omega_c": es.E_g + ctx.omega_c,
                "G": pes["G"], "LP": pes["LP"], "UP": pes["UP"],
                "photon_LP": pes.photon_weight("LP"), "photon_UP": pes.photon_weight("UP")}
        units = {k: "Ha" for k in cols}
        units.update(R="bohr", photon_LP="-", photon_UP="-")
        out.table(Table(f"{prefix}pes1_{_gtag(g)}", cols, units, notes=(f"g {g} a.u.; n_max {ctx.n_max}",)))
    return {"omega_c_au": ctx.omega_c}


def task_pes2(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "", stride: int = 2,
              fit: bool = True) -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    es1 = ctx.structure()
    if cfg.fixture2 not in (None, cfg.fixture):
        p2 = resolve_fixture(cfg.fixture2)
        es2 = _structure(p2, *_grids(cfg, p2))
    else:
        es2 = es1
    R1 = es1.R[::stride]
    R2 = es2.R[::stride]
    g1 = Grid1D(float(R1[0]), float(R1[-1]), len(R1))
    g2 = Grid1D(float(R2[0]), float(R2[-1]), len(R2))
    fits = {"g": [], "label": [], "alpha": [], "beta": [], "beta_over_alpha": [], "residual": []}
    for g in cfg.g:
        pes = coupled_pes_two(es1, es2, ctx.cavity(g), g1, g2)
        A, B = np.meshgrid(R1, R2, indexing="ij")
        cols = {"R1": A.ravel(), "R2": B.ravel()}
        for lab in ("G", "LP", "DS", "UP"):
            cols[lab] = pes[lab].ravel()
        for lab in ("LP", "DS", "UP"):
            cols[f"photon_{lab}"] = pes.photon_weight[lab].ravel()
        units = {k: "Ha" for k in cols}
        units.update({k: "-" for k in cols if k.startswith("photon")}, R1="bohr", R2="bohr")
        out.table(Table(f"{prefix}pes2_{_gtag(g)}", cols, units, notes=(f"g {g} a.u.; n_max {ctx.n_max}",),
                        block="R1"))
        if fit and es2 is es1 and g > 0:
            for lab, f in fit_two_mol_surfaces(es1, ctx.cavity(g)).items():
                fits["g"].append(g)
                fits["label"].append(lab)
                fits["alpha"].append(f.alpha)
                fits["beta"].append(f.beta)
                fits["beta_over_alpha"].append(f.ratio)
                fits["residual"].append(f.residual)
    if fits["g"]:
        out.table(Table(prefix + "pes2_fits", fits, {"g": "a.u.", "alpha": "Ha/bohr^2", "beta": "Ha/bohr^2"}))
    return {"omega_c_au": ctx.omega_c}


def task_nonbo(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "") -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    es = ctx.structure()
    reports = {}
    for g in cfg.g:
        if g == 0:
            raise ConfigError("non-adiabatic couplings are singular at g = 0")
        c = CavityParams(ctx.omega_c, g, 1)
        fine = fine_structure_near_crossing(es, c)
        num = nonbo_numeric(fine, c)
        lin = linearized_from_fixture(es, c)
        mod = nonbo_model(lin, fine.grid_R)
        cols = {"R": fine.R}
        for k, v in num.columns().items():
            if k != "R":
                cols[k] = v
        for k, v in mod.columns().items():
            if k != "R":
                cols[f"model_{k}"] = v
        units = {k: ("bohr^-2" if "P2" in k else "bohr^-1") for k in cols}
        units["R"] = "bohr"
        out.table(Table(f"{prefix}nonbo_{_gtag(g)}", cols, units, notes=(
            "P_offdiag is Im<-|P|+>; P2_* are <.|P^2|.> with P = -i d/dR.",
            "P and P^2 terms carry different units and are not directly comparable.",
            f"g {g} a.u.; crossing at R = {lin.Rc:.8f} bohr")))
        window = np.abs(fine.R - lin.Rc) <= 5 * lin.fwhm
        peak = float(np.max(np.abs(num.P_offdiag)))
        doc = {"g": g, "Rc": lin.Rc, "a0": lin.a0, "h0": lin.h0,
               "relative_l2_P": relative_l2(num.P_offdiag[window], mod.P_offdiag[window], fine.R[window]),
               "peak_numeric": peak, "peak_model": lin.peak_P,
               "fwhm_numeric": lorentzian_fwhm(fine.R, num.P_offdiag), "fwhm_model": lin.fwhm}
        try:
            harm = harmonic_from_fixture(es, c)
            doc["harmonic_model"] = asdict(harm)
            doc["validity_N1"] = asdict(boa_validity(harm, N=1))
            doc["validity_N2"] = asdict(boa_validity(harm, N=2))
        except PolarmolError as exc:
            doc["harmonic_model_error"] = str(exc)
        reports[_gtag(g)] = doc
    out.json(prefix + "nonbo_report", reports)
    return reports


def _usc_one(args):
    ctx, g = args
    es = ctx.structure()
    bare_R, bare_E, _ = surface_minimum(es.R, es.E_g)
    c = ctx.cavity(g)
    pes = ground_state_pes_usc(es, c)
    Rm, Em, _ = surface_minimum(es.R, pes.exact)
    sol = solve_exact_cavity(ctx.params, c.replace(n_max=max(c.n_max, 4)), ctx.grids, k=1)
    return {"g": g, "delta_E0": Em - bare_E, "delta_E0_mev": au_to_ev(Em - bare_E) * 1e3, "delta_R0": Rm - bare_R,
            "delta_R0_mA": (Rm - bare_R) * BOHR_MILLIANGSTROM, "photon_number": ground_photon_number(sol),
            "exact_ground_energy": float(sol.energies[0])}


def task_usc_scan(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "") -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    rows = _pmap(_usc_one, [(ctx, g) for g in cfg.g], cfg.workers)
    cols = {k: [r[k] for r in rows] for k in rows[0]}
    out.table(Table(prefix + "usc_scan", cols, {"g": "a.u.", "delta_E0": "Ha", "delta_E0_mev": "meV",
                                                "delta_R0": "bohr", "delta_R0_mA": "mA", "photon_number": "-",
                                                "exact_ground_energy": "Ha"}))
    return cols


def task_scaling_report(cfg: RunConfig, out: Output, ctx: Context | None = None, prefix: str = "") -> dict:
    ctx = build_context(cfg) if ctx is None else ctx
    rep = collective_scaling_report(ctx.structure(), ctx.omega_c, cfg.g, n_max=max(ctx.n_max, 6))
    rows = rep["rows"]
    out.table(Table(prefix + "scaling_rows", {k: [r[k] for r in rows] for k in rows[0]},
                    {"g": "a.u.", "delta_E0_au": "Ha", "delta_E0_meV": "meV", "delta_R0_au": "bohr",
                     "delta_R0_mA": "mA", "beta_ground": "Ha/bohr^2"}))
    out.json(prefix + "scaling_report", rep)
    return rep


_TASKS = {"bare": task_bare, "absorb": task_absorb, "pes1": task_pes1, "pes2": task_pes2, "nonbo": task_nonbo,
          "usc-scan": task_usc_scan, "scaling-report": task_scaling_report}


def _params_doc(cfg: RunConfig) -> dict:
    names = [cfg.init or cfg.fixture] if cfg.task == "calibrate" else [cfg.fixture] + (
        [cfg.fixture2] if cfg.fixture2 else [])
    return {n: asdict(resolve_fixture(n)) for n in names}


def run(cfg: RunConfig, out_dir=None) -> Path:
    """Execute one task; returns the manifest path."""
    out = Output(out_dir or cfg.out, cfg.to_dict(), _params_doc(cfg))
    if cfg.task == "calibrate":
        task_calibrate(cfg, out)
    else:
        _TASKS[cfg.task](cfg, out)
    return out.manifest()


# ---------------------------------------------------------------------------
# figure data

FIGURE_G = {
    "r6g_like": (0.001, 0.002, 0.004, 0.008),
    "anthracene_like": (0.002, 0.004, 0.008, 0.016),
}


def reproduce_figure(tag: str, out_dir, workers: int = 1) -> Path:
    """Write the data behind one figure (one CSV per panel) plus a manifest."""
    if tag not in FIGURES:
        raise ConfigError(f"unknown figure {tag!r}; choose one of {', '.join(FIGURES)}")
    for name in FIXTURE_NAMES:
        resolve_fixture(name)
    out_dir = Path(out_dir) / tag
    base = {"task": "bare", "workers": workers}
    out = Output(out_dir, {"figure": tag}, {n: asdict(load_fixture(n)) for n in FIXTURE_NAMES})

    def cfg_for(task, fixture, **kw):
        return RunConfig(**dict(base, task=task, fixture=fixture, **kw))

    if tag == "fig2":
        for pes_panel, abs_panel, name in (("a", "b", "r6g_like"), ("c", "d", "anthracene_like")):
            task_bare(cfg_for("bare", name), out, prefix=f"panel_{pes_panel}_",
                      absorption_name=f"panel_{abs_panel}_absorption")
    elif tag == "fig3":
        cfg = cfg_for("pes1", "anthracene_like", g=(0.001, 0.008), n_max=1)
        task_pes1(cfg, out, prefix="panel_")
    elif tag in ("fig4", "fig6"):
        N = 1 if tag == "fig4" else 2
        for panel, name in (("a", "r6g_like"), ("b", "anthracene_like")):
            gs = tuple(g / np.sqrt(N) for g in FIGURE_G[name])
            task_absorb(cfg_for("absorb", name, g=gs, molecules=N), out, prefix=f"panel_{panel}_")
    elif tag == "fig5":
        cfg = cfg_for("pes2", "anthracene_like", g=(0.002, 0.013), n_max=1)
        ctx = build_context(cfg)
        es = ctx.structure()
        R = es.R[::2]
        A, B = np.meshgrid(R, R, indexing="ij")
        Eg1, Ee1 = es.energies_at(A)[..., 0], es.energies_at(A)[..., 1]
        Eg2, Ee2 = es.energies_at(B)[..., 0], es.energies_at(B)[..., 1]
        cols = {"R1": A.ravel(), "R2": B.ravel(), "E_eg0": (Ee1 + Eg2).ravel(), "E_ge0": (Eg1 + Ee2).ravel(),
                "E_gg1": (Eg1 + Eg2 + ctx.omega_c).ravel()}
        units = {k: "Ha" for k in cols}
        units.update(R1="bohr", R2="bohr")
        out.table(Table("panel_a_uncoupled", cols, units, block="R1"))
        task_pes2(cfg, out, ctx=ctx, prefix="panel_", fit=False)
    elif tag == "fig7":
        cfg = cfg_for("pes2", "r6g_like", omega_c="vertical", n_max=1)
        ctx = build_context(cfg)
        es = ctx.structure()
        gs = np.round(np.linspace(0.002, 0.01, 9), 6)
        cols = {"g": gs}
        fits = [fit_two_mol_surfaces(es, ctx.cavity(g)) for g in gs]
        for lab in ("LP", "DS", "UP", "G"):
            cols[f"beta_over_alpha_{lab}"] = [f[lab].ratio for f in fits]
        out.table(Table("beta_over_alpha", cols, {"g": "a.u."},
                        notes=("omega_c = E_e(R_e) - E_g(R_e); fits over +-3 RMS vibrational amplitudes",)))
    elif tag == "fig8":
        task_nonbo(cfg_for("nonbo", "anthracene_like", g=(0.002,)), out, prefix="")
    return out.manifest()


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarmol", description="Model molecules in an optical cavity.")
    ap.add_argument("verb", choices=TASKS + ("run", "figure"), help="task to run, 'run' or 'figure'")
    ap.add_argument("target", nargs="?", help="figure tag (fig2 .. fig8) for the 'figure' verb")
    ap.add_argument("--config", help="run configuration file (sectioned key = value)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--workers", type=int, default=1, help="process cap for scans over g")
    ap.add_argument("--seed", type=int, default=0, help="seed for the calibration simplex restarts")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verb == "figure":
            if args.target is None:
                raise ConfigError("figure needs a tag: " + ", ".join(FIGURES))
            path = reproduce_figure(args.target, args.out or "polarmol-figures", workers=args.workers)
        else:
            if args.target is not None:
                raise ConfigError(f"unexpected argument {args.target!r}")
            task = None if args.verb == "run" else args.verb
            over = dict(task=task, seed=args.seed, workers=args.workers)
            cfg = (RunConfig.from_file(args.config, **over) if args.config
                   else RunConfig.from_mapping({}, **over))
            path = run(cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (WindowError, BoxTooSmallError) as exc:
        print(f"window error: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except PolarmolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(path)
    return EXIT_OK


__all__ = ["RunConfig", "ConfigError", "Table", "Output", "read_table", "run", "reproduce_figure", "main", "TASKS",
           "FIGURES"]
