"""Run configuration, on-disk layout, caching and the solve/observe/analyze stages."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import FESError, NoCoupling, StateFileError
from .fes import (
    DRecord,
    ScalingDataset,
    build_record,
    default_s_grid,
    eigenvalue_ratio_diagnostic,
    estimate_exponent,
    fes_exponent_curve,
    fit_central_charge,
    fit_kappa,
    infinite_scale_estimate,
    length_scaling_slopes,
)
from .isolve import expectation_two_site, solve_ground_state
from .models import MODELS, build_model
from .observables import CorrelatorSeries, EntropyRecord, ising_operators
from .statefile import (
    atomic_write,
    dumps,
    file_hash,
    read_csv,
    read_state,
    text_hash,
    write_csv,
    write_state,
)
from .umps import fixed_point_residuals, fixed_points

log = logging.getLogger(__name__)

PRIMARIES = ("sigma", "eps", "mu", "psi")
DERIVATIVES = {"sigma": ("dsigma", "d2sigma", "d3sigma"), "eps": ("deps",)}
DEFAULT_OPS = ("sigma", "eps", "mu", "psi", "dsigma", "d2sigma", "d3sigma", "deps")
INTERVAL_FOOTNOTE = (
    "Interval entropies at s = 0.1 follow the reference choice; that scale has not been "
    "checked for lattice-cutoff effects."
)


class ConfigError(FESError):
    """Invalid run configuration."""


class LockHeld(FESError):
    """Another process owns the run directory."""


# --------------------------------------------------------------------------
# configuration


def _split_list(value, cast=str):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return [cast(v.strip()) if isinstance(v, str) else cast(v) for v in value]


@dataclass
class RunConfig:
    model: str = "ising"
    J: float = 1.0
    h: float = 1.0
    dims: List[int] = field(default_factory=lambda: [8, 12, 16, 20, 24, 28, 32])
    tol: float = 1e-8
    max_iter: int = 2000
    seed: int = 0
    ops: List[str] = field(default_factory=lambda: list(DEFAULT_OPS))
    derivatives: bool = True
    connected: List[str] = field(default_factory=lambda: ["eps", "deps"])
    entropy: List[str] = field(default_factory=lambda: ["half", "interval:0.1"])
    K: int = 15
    n_couplings: int = 8
    per_decade: int = 24
    interpolant: str = "spline"
    s_min: float = 0.05
    s_max: float = 40.0
    n_scales: int = 160
    interval_max_D: int = 32
    out: str = "runs/crit"

    LIST_FIELDS = {"dims": int, "ops": str, "connected": str, "entropy": str}

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        known = set(cls.field_names())
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = {}
        for name, value in mapping.items():
            if value is None:
                continue
            if name in cls.LIST_FIELDS:
                value = _split_list(value, cls.LIST_FIELDS[name])
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, path, overrides=None) -> "RunConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        # allow either a flat table or a [run] table
        data = data.get("run", data)
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(data)

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        self.dims = [int(D) for D in self.dims]
        if not self.dims or any(D < 1 for D in self.dims):
            raise ConfigError("dims must be positive integers")
        if any(b <= a for a, b in zip(self.dims, self.dims[1:])):
            raise ConfigError("dims must be strictly ascending")
        if self.tol <= 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter >= 1")
        known = set(ising_operators())
        bad = [o for o in self.ops if o not in known]
        if bad:
            raise ConfigError(f"unknown operators {bad}; available {sorted(known)}")
        for kind in self.entropy:
            parse_entropy_kind(kind)
        if self.interpolant not in ("spline", "linear"):
            raise ConfigError("interpolant must be 'spline' or 'linear'")
        if not 0 < self.s_min < self.s_max or self.n_scales < 2:
            raise ConfigError("need 0 < s_min < s_max and n_scales >= 2")
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        return self

    @property
    def params(self):
        return {"J": float(self.J), "h": float(self.h)}

    def operator_labels(self):
        labels = list(self.ops)
        if self.derivatives:
            for base, ders in DERIVATIVES.items():
                if base in labels:
                    labels += [d for d in ders if d not in labels]
        return labels

    def interval_scales(self):
        return [s for kind, s in map(parse_entropy_kind, self.entropy) if kind == "interval"]

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["version"] = __version__
        return out


def parse_entropy_kind(kind):
    kind = kind.strip()
    if kind in ("half", "half_line"):
        return "half_line", None
    if kind.startswith("interval:"):
        try:
            s = float(kind.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad interval scale in {kind!r}") from None
        if s <= 0:
            raise ConfigError("interval scale must be positive")
        return "interval", s
    raise ConfigError(f"unknown entropy kind {kind!r}; use 'half' or 'interval:<s>'")


# --------------------------------------------------------------------------
# manifest and lock


def cache_key(**inputs) -> str:
    return text_hash(json.dumps({"code": __version__, **inputs}, sort_keys=True, default=str))


class RunManifest:
    """Per-directory record of stage entries, their cache keys and file hashes."""

    FILENAME = "manifest.json"

    def __init__(self, root, config: Optional[dict] = None):
        self.root = Path(root)
        self.data = {"config": config or {}, "code_version": __version__, "stages": {}, "files": {}, "timings": {}}

    @classmethod
    def load(cls, root, config=None) -> "RunManifest":
        m = cls(root, config)
        path = m.root / cls.FILENAME
        if path.exists():
            try:
                old = json.loads(path.read_text())
            except json.JSONDecodeError:
                log.warning("ignoring unreadable manifest %s", path)
                return m
            if config is None:
                m.data["config"] = old.get("config", {})
            m.data["stages"] = old.get("stages", {})
            m.data["files"] = old.get("files", {})
            m.data["timings"] = old.get("timings", {})
        return m

    def rel(self, path):
        return os.path.relpath(Path(path), self.root)

    def lookup(self, stage, item, key):
        """Cached entry when the key matches and every file still hash-matches."""
        entry = self.data["stages"].get(stage, {}).get("entries", {}).get(str(item))
        if not entry or entry.get("key") != key:
            return None
        for rel, digest in entry.get("files", {}).items():
            path = self.root / rel
            if not path.exists() or file_hash(path) != digest:
                return None
        return entry

    def record(self, stage, item, key, files, status="ok", info=None):
        hashes = {self.rel(p): file_hash(p) for p in files}
        st = self.data["stages"].setdefault(stage, {"status": "ok", "entries": {}})
        st["entries"][str(item)] = {"key": key, "files": hashes, "status": status, "info": info or {}}
        self.data["files"].update(hashes)

    def set_status(self, stage, status):
        self.data["stages"].setdefault(stage, {"entries": {}})["status"] = status

    def status(self, stage):
        return self.data["stages"].get(stage, {}).get("status")

    def add_timing(self, stage, seconds):
        self.data["timings"][stage] = seconds

    def save(self):
        atomic_write(self.root / self.FILENAME, dumps(self.data))

    def verify(self):
        """Files that are missing or whose content changed since they were recorded."""
        problems = []
        for rel, digest in self.data["files"].items():
            path = self.root / rel
            if not path.exists():
                problems.append(f"missing: {rel}")
            elif file_hash(path) != digest:
                problems.append(f"hash mismatch: {rel}")
        return problems


class RunLock:
    """Exclusive lock file so a run directory has a single writer."""

    def __init__(self, root):
        self.path = Path(root) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockHeld(f"{self.path} exists; another run owns this directory") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False


# --------------------------------------------------------------------------
# stages


def state_path(root, D):
    return Path(root) / f"state_D{D}.json"


def solve_stage(cfg: RunConfig, root, manifest: RunManifest):
    """Warm-started sweep over ``cfg.dims``; returns ``{D: (state, file_hash)}`` for good states."""
    root = Path(root)
    model = build_model(cfg.model, **cfg.params)
    states = {}
    prev, prev_key = None, None
    flagged = False
    t0 = time.perf_counter()
    for D in cfg.dims:
        key = cache_key(stage="solve", model=cfg.model, params=cfg.params, D=D, tol=cfg.tol,
                        max_iter=cfg.max_iter, seed=cfg.seed, init=prev_key)
        spath = state_path(root, D)
        rpath = root / f"solve_report_D{D}.json"
        entry = manifest.lookup("solve", D, key)
        if entry is not None:
            state, _ = read_state(spath)
            log.info("solve D=%d: cached", D)
            status = entry["status"]
        else:
            try:
                state, report = solve_ground_state(model, D, cfg.tol, init=prev, seed=cfg.seed, max_iter=cfg.max_iter)
            except Exception as exc:  # noqa: BLE001 - record and continue with the next D
                log.error("solve D=%d failed: %s", D, exc)
                manifest.record("solve", D, key, [], "failed", {"error": repr(exc)})
                flagged = True
                continue
            write_state(spath, state, cfg.model, cfg.params, report.energy_density, report.gradient_norm)
            atomic_write(rpath, dumps(report.to_dict()))
            status = "ok" if report.converged else "not_converged"
            manifest.record("solve", D, key, [spath, rpath], status,
                            {"energy_density": report.energy_density, "gradient_norm": report.gradient_norm})
            manifest.save()
            # reload so downstream work sees exactly what is on disk
            state, _ = read_state(spath)
        flagged |= status != "ok"
        states[D] = (state, file_hash(spath))
        prev, prev_key = state, key
    manifest.set_status("solve", "partial" if flagged else "ok")
    manifest.add_timing("solve", time.perf_counter() - t0)
    return states


def load_states(root):
    """``{D: (state, file_hash)}`` for every ``state_D*.json`` under ``root``."""
    out = {}
    for path in sorted(Path(root).glob("state_D*.json")):
        state, meta = read_state(path)
        out[int(meta["D"])] = (state, file_hash(path))
    return dict(sorted(out.items()))


def _record_files(obs_dir, D):
    obs_dir = Path(obs_dir)
    return {
        "spectrum": obs_dir / f"spectrum_D{D}.csv",
        "couplings": obs_dir / f"couplings_D{D}.csv",
        "entropy": obs_dir / f"entropy_D{D}.csv",
        "schmidt": obs_dir / f"schmidt_D{D}.csv",
    }


def corr_path(obs_dir, label, D):
    return Path(obs_dir) / f"corr_{label}_D{D}.csv"


def write_record(obs_dir, rec: DRecord):
    files = _record_files(obs_dir, rec.D)
    write_csv(files["spectrum"], ["I", "re_lambda", "im_lambda", "mu"],
              [[i + 1, float(l.real), float(l.imag), float(m)] for i, (l, m) in enumerate(zip(rec.eigenvalues, rec.mus))])
    rows = []
    for label, terms in rec.couplings.items():
        for i, (lam, c) in enumerate(terms):
            rows.append([label, i + 1, float(lam.real), float(lam.imag), float(c.real), float(c.imag)])
    write_csv(files["couplings"], ["op", "I", "re_lambda", "im_lambda", "re_c", "im_c"], rows)
    ents = [rec.half_line] + list(rec.intervals)
    write_csv(files["entropy"], ["D", "kind", "x", "S"],
              [[e.D, e.kind, None if e.x is None else float(e.x), float(e.S)] for e in ents])
    write_csv(files["schmidt"], ["kind", "x", "index", "lambda"],
              [[e.kind, None if e.x is None else float(e.x), i + 1, float(v)]
               for e in ents for i, v in enumerate(e.schmidt)])
    paths = list(files.values())
    for label, ser in rec.correlators.items():
        p = corr_path(obs_dir, label, rec.D)
        sub = float(np.real(ser.disconnected)) if ser.connected else 0.0
        write_csv(p, ["x", "reG", "imG", "connected_subtraction"],
                  [[int(x), float(g.real), float(g.imag), sub] for x, g in zip(ser.x, ser.G)])
        paths.append(p)
    return paths


def read_record(obs_dir, D, labels, connected=(), interpolant="spline") -> DRecord:
    files = _record_files(obs_dir, D)
    _, rows = read_csv(files["spectrum"])
    lam = np.array([r[1] + 1j * r[2] for r in rows])
    mus = np.array([r[3] for r in rows])
    mu2 = float(mus[1]) if len(mus) > 1 else float("inf")
    rec = DRecord(D, mu2, mus, lam)
    _, rows = read_csv(files["couplings"])
    for op, _, lre, lim, cre, cim in rows:
        rec.couplings.setdefault(op, []).append((complex(lre, lim), complex(cre, cim)))
    _, rows = read_csv(files["entropy"])
    _, srows = read_csv(files["schmidt"])
    for _, kind, x, S in rows:
        sch = np.array([r[3] for r in srows if r[0] == kind and r[1] == x])
        e = EntropyRecord(D, kind, S, sch, x)
        if kind == "half_line":
            rec.half_line = e
        else:
            rec.intervals.append(e)
    for label in labels:
        _, rows = read_csv(corr_path(obs_dir, label, D))
        x = np.array([int(r[0]) for r in rows])
        G = np.array([r[1] + 1j * r[2] for r in rows])
        is_conn = label in connected
        rec.correlators[label] = CorrelatorSeries(label, D, x, G, is_conn, rows[0][3] if is_conn else 0.0, interpolant, mu2)
    return rec


def observe_stage(cfg: RunConfig, states, obs_dir, manifest: RunManifest):
    """Correlators, spectra, couplings and entropies for each state; returns ``{D: DRecord}``."""
    obs_dir = Path(obs_dir)
    all_ops = ising_operators(cfg.J)
    labels = cfg.operator_labels()
    ops = {k: all_ops[k] for k in labels}
    connected = [c for c in cfg.connected if c in labels]
    flagged = False
    records = {}
    t0 = time.perf_counter()
    for D, (state, shash) in states.items():
        key = cache_key(stage="observe", state=shash, ops=labels, connected=connected, K=cfg.K,
                        n_couplings=cfg.n_couplings, per_decade=cfg.per_decade, s_max=cfg.s_max,
                        entropy=cfg.entropy, interval_max_D=cfg.interval_max_D, J=cfg.J)
        if manifest.lookup("observe", D, key) is not None:
            log.info("observe D=%d: cached", D)
        else:
            try:
                rec = build_record(state, ops, connected, cfg.K, cfg.n_couplings, cfg.per_decade, cfg.s_max,
                                   cfg.interval_scales(), cfg.interpolant, cfg.interval_max_D)
            except Exception as exc:  # noqa: BLE001
                log.error("observe D=%d failed: %s", D, exc)
                manifest.record("observe", D, key, [], "failed", {"error": repr(exc)})
                flagged = True
                continue
            paths = write_record(obs_dir, rec)
            manifest.record("observe", D, key, paths, "ok", {"mu2": rec.mu2, "state_hash": shash})
            manifest.save()
        records[D] = read_record(obs_dir, D, labels, connected, cfg.interpolant)
    index = {
        "model": cfg.model,
        "params": cfg.params,
        "dims": sorted(records),
        "ops": labels,
        "connected": connected,
        "interpolant": cfg.interpolant,
        "state_hashes": {str(D): states[D][1] for D in sorted(records)},
    }
    text = dumps(index)
    index_path = obs_dir / "observables.json"
    if not index_path.exists() or index_path.read_text() != text:
        atomic_write(index_path, text)
    manifest.record("observe", "index", text_hash(text), [index_path])
    manifest.set_status("observe", "partial" if flagged else "ok")
    manifest.add_timing("observe", time.perf_counter() - t0)
    return records


def load_dataset(obs_dir) -> Tuple[ScalingDataset, dict]:
    """Dataset rebuilt from an observe directory, with its ``observables.json`` index."""
    obs_dir = Path(obs_dir)
    index = json.loads((obs_dir / "observables.json").read_text())
    recs = [read_record(obs_dir, D, index["ops"], index["connected"], index["interpolant"]) for D in index["dims"]]
    return ScalingDataset(recs, index["model"], index["params"]), index


def _curve_rows(curve, est_inf=None):
    rows = [[p.s, p.fit.slope, p.fit.ci[0.95], p.fit.ci[0.9973]] for p in curve if not p.skipped]
    if est_inf is not None:
        rows.append([float("inf"), est_inf.slope, est_inf.ci[0.95], est_inf.ci[0.9973]])
    return rows


def analyze(data: ScalingDataset, labels, s_grid, interval_scales=(0.1,), K=15):
    """All fits for one dataset as a JSON-ready dict plus CSV tables ``{name: (header, rows)}``."""
    report = {"exponents": {}, "central_charge": [], "errors": {}}
    tables = {}
    for label in labels:
        try:
            est = estimate_exponent(data, label, s_grid)
            curve = fes_exponent_curve(data, label, s_grid)
            try:
                inf_fit = infinite_scale_estimate(data, label)
            except NoCoupling:
                inf_fit = None
        except (FESError, KeyError) as exc:
            report["errors"][label] = repr(exc)
            continue
        entry = est.to_dict()
        entry["infinite_scale"] = None if inf_fit is None else inf_fit.to_dict()
        entry["skipped_scales"] = [p.s for p in curve if p.skipped]
        report["exponents"][label] = entry
        tables[f"exponent_curve_{label}.csv"] = (["s", "slope", "ci95", "ci9973"], _curve_rows(curve, inf_fit))

    cc_rows = []
    try:
        cc = fit_central_charge(data, "half_line")
        report["central_charge"].append(cc.to_dict())
        cc_rows.append(["half_line", None, cc.c, cc.ci[0.95], cc.ci[0.9973], cc.fit.slope, cc.fit.r2, cc.fit.n_points])
    except FESError as exc:
        report["errors"]["central_charge_half_line"] = repr(exc)
    for s in interval_scales:
        try:
            cc = fit_central_charge(data, "interval", s)
            report["central_charge"].append(cc.to_dict())
            cc_rows.append(["interval", s, cc.c, cc.ci[0.95], cc.ci[0.9973], cc.fit.slope, cc.fit.r2, cc.fit.n_points])
        except FESError as exc:
            report["errors"][f"central_charge_interval_{s}"] = repr(exc)
    try:
        kf = fit_kappa(data)
        report["kappa"] = kf.to_dict()
        if kf.c_free is not None:
            report["central_charge"].append({
                "source": "kappa_free", "c": kf.c_free, "ci95": kf.c_free_ci[0.95],
                "ci9973": kf.c_free_ci[0.9973], "scale": None, "fit": kf.entropy_fit.to_dict(),
            })
            cc_rows.append(["kappa_free", None, kf.c_free, kf.c_free_ci[0.95], kf.c_free_ci[0.9973],
                            kf.entropy_fit.slope, kf.entropy_fit.r2, kf.entropy_fit.n_points])
        tables["kappa.csv"] = (
            ["D", "mu2", "S_half", "log_mu2_fit"],
            [[r.D, r.mu2, r.half_line.S if r.half_line else None,
              kf.fit.intercept + kf.fit.slope * np.log(r.D)] for r in data.records],
        )
        report["length_slopes"] = {str(I): f.to_dict() for I, f in length_scaling_slopes(data, K).items()}
    except FESError as exc:
        report["errors"]["kappa"] = repr(exc)
    tables["central_charge.csv"] = (["source", "scale", "c", "ci95", "ci9973", "slope", "r2", "n_points"], cc_rows)

    diag = eigenvalue_ratio_diagnostic(data, K)
    report["ratios"] = {
        "drift": {str(I): v for I, v in diag.drift.items()},
        "converged": {str(I): v for I, v in diag.converged.items()},
    }
    mu_by = {r.D: r.mus for r in data.records}
    tables["ratios.csv"] = (["D", "I", "ratio", "mu"], [[row["D"], row["I"], row["ratio"], float(mu_by[row["D"]][row["I"] - 1])]
                                                         for row in diag.rows])
    return report, tables


def analyze_stage(cfg: RunConfig, obs_dir, report_path, csv_dir, manifest: RunManifest):
    obs_dir = Path(obs_dir)
    t0 = time.perf_counter()
    data, index = load_dataset(obs_dir)
    obs_files = sorted(p for p in obs_dir.glob("*.csv"))
    inputs = {manifest.rel(p): file_hash(p) for p in obs_files}
    labels = [l for l in cfg.operator_labels() if l in index["ops"]]
    key = cache_key(stage="analyze", inputs=inputs, labels=labels, s_min=cfg.s_min, s_max=cfg.s_max,
                    n_scales=cfg.n_scales, intervals=cfg.interval_scales(), K=cfg.K)
    report_path, csv_dir = Path(report_path), Path(csv_dir)
    entry = manifest.lookup("analyze", "report", key)
    if entry is not None:
        log.info("analyze: cached")
        manifest.set_status("analyze", entry["status"])
        return json.loads(report_path.read_text())

    s_grid = default_s_grid(cfg.n_scales, cfg.s_min, cfg.s_max)
    body, tables = analyze(data, labels, s_grid, cfg.interval_scales(), cfg.K)
    paths = []
    for name, (header, rows) in tables.items():
        p = csv_dir / name
        write_csv(p, header, rows)
        paths.append(p)
    report = {
        "code_version": __version__,
        "model": data.model,
        "params": data.params,
        "dims": data.D_range,
        "mu2": {str(r.D): r.mu2 for r in data.records},
        "provenance": {
            "state_hashes": index["state_hashes"],
            "s_grid": {"min": cfg.s_min, "max": cfg.s_max, "n": cfg.n_scales, "spacing": "log", "infinite_point": True},
            "confidence_levels": [0.95, 0.9973],
            "connected": index["connected"],
            "interpolant": index["interpolant"],
        },
        **body,
        "csv_files": {manifest.rel(p): file_hash(p) for p in paths},
        "footnotes": [INTERVAL_FOOTNOTE] if cfg.interval_scales() else [],
    }
    atomic_write(report_path, dumps(report))
    status = "partial" if body["errors"] else "ok"
    manifest.record("analyze", "report", key, [report_path] + paths, status)
    manifest.set_status("analyze", status)
    manifest.add_timing("analyze", time.perf_counter() - t0)
    return report


def run_pipeline(cfg: RunConfig) -> RunManifest:
    """solve -> observe -> analyze in ``cfg.out``, reusing cached stages."""
    root = Path(cfg.out)
    root.mkdir(parents=True, exist_ok=True)
    with RunLock(root):
        manifest = RunManifest.load(root, cfg.to_dict())
        try:
            states = solve_stage(cfg, root, manifest)
            if not states:
                manifest.set_status("observe", "skipped")
                manifest.set_status("analyze", "skipped")
                return manifest
            observe_stage(cfg, states, root / "obs", manifest)
            analyze_stage(cfg, root / "obs", root / "report.json", root / "report_csv", manifest)
        finally:
            manifest.save()
    return manifest


# --------------------------------------------------------------------------
# validation


def validate_states(root, tol=1e-10, norm_tol=1e-10, energy_tol=1e-10):
    """Re-check stored states; returns a list of ``{path, problem}`` dicts (empty when clean)."""
    root = Path(root)
    problems = []
    paths = sorted(root.glob("state_D*.json"))
    if not paths:
        problems.append({"path": str(root), "problem": "no state files"})
    for path in paths:
        try:
            state, meta = read_state(path)
        except StateFileError as exc:
            problems.append({"path": str(path), "problem": str(exc)})
            continue
        ev, _, _ = fixed_points(np.asarray(state.A))
        if abs(ev - 1.0) > norm_tol:
            problems.append({"path": str(path), "problem": f"normalization: dominant eigenvalue {ev:.15g} != 1"})
            continue
        for name, val in zip(("left", "right"), fixed_point_residuals(state)):
            if val > tol:
                problems.append({"path": str(path), "problem": f"fixed-point residual {name} = {val:.3e}"})
        try:
            model = build_model(meta["model"], **meta["params"])
        except (ValueError, TypeError) as exc:
            problems.append({"path": str(path), "problem": f"model: {exc}"})
            continue
        e = float(np.real(expectation_two_site(state, model.h2)))
        if abs(e - meta["energy_density"]) > energy_tol:
            problems.append({"path": str(path), "problem": f"energy mismatch: stored {meta['energy_density']!r}, recomputed {e!r}"})
        rpath = root / f"solve_report_D{meta['D']}.json"
        if rpath.exists():
            rep = json.loads(rpath.read_text())
            rtol = rep.get("tol")
            if rep.get("converged") and rtol is not None and rep["gradient_norm"] > rtol:
                problems.append({"path": str(rpath), "problem": "converged flag set with gradient above tol"})
            if rep.get("gradient_norm") != meta["gradient_norm"]:
                problems.append({"path": str(rpath), "problem": "gradient norm differs from state file"})
    manifest_path = root / RunManifest.FILENAME
    if manifest_path.exists():
        m = RunManifest.load(root)
        problems += [{"path": str(manifest_path), "problem": p} for p in m.verify()]
    return problems
