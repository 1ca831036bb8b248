"""Configuration, stage graph and file formats behind the command-line runner."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import tempfile
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import cs_spectra as cs
from . import lr_analysis as lr
from . import moments as mom
from . import ramsey
from .spin_system import HamiltonianSpec, apply_pauli, diagonalize_tfim, expectation, gap_sweep
from .trap_chain import J0_CONVENTIONS, ChainSolution, TrapParams, solve_chain, tune_axial
from .units import to_angular

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("chain", "gap", "traces", "moments", "cs", "lr")
SIG_DIGITS = 12


class ConfigError(ValueError):
    """Invalid configuration field; the message names the field."""


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


class ArtifactNotFound(FileNotFoundError):
    def __init__(self, stage, path):
        super().__init__(f"missing artifact from stage {stage!r}: {path}")
        self.stage = stage


@dataclass
class RunConfig:
    ion_count: int = 10
    alpha: float | None = 1.0  # target power-law exponent (tunes the axial frequency)
    axial_khz: float | None = None  # fixes the axial frequency instead of alpha
    sign: int = 1
    j0_convention: str = "nn-mean"
    b0_ratio: float = 10.0
    tau_j0: float = 0.85
    b_ratios: tuple = (0.94, 0.74, 0.49, 0.35)
    trace_window: float = 6.0  # ms
    trace_samples: int = 6001
    trace_site: int = 0
    trace_targets: tuple = (0, 1, 4, 9)
    gap_min: float = 0.1
    gap_max: float = 3.0
    gap_points: int = 50
    cs_m: int = 64
    cs_n_step: int = 1024
    cs_seed: int = 0
    cs_threshold: float = 0.05
    cs_reference_floor: float = 1e-2  # reference lines below this fraction of the largest are ignored
    lr_alphas: tuple = (0.90, 1.00, 1.12)
    lr_mode: str = "relative"
    lr_levels: tuple = lr.RELATIVE_INTERCEPTS
    dead_band: float = lr.DEAD_BAND
    output: str = "run"
    seed: int = 0
    workers: int = 1
    stages: tuple = STAGES

    # fields that do not change any number written to disk
    NON_NUMERIC = ("output", "workers", "stages")

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, name, why):
            if not cond:
                raise ConfigError(f"{name}: {why}")

        need(isinstance(self.ion_count, int) and 1 <= self.ion_count <= 14, "ion_count",
             "must be an integer in [1, 14]")
        need(self.alpha is not None or self.axial_khz is not None or self.ion_count < 3,
             "alpha", "set alpha or axial_khz")
        if self.axial_khz is not None:
            need(self.axial_khz > 0, "axial_khz", "must be positive")
        need(self.sign in (1, -1), "sign", "must be +1 or -1")
        need(self.j0_convention in J0_CONVENTIONS, "j0_convention", f"one of {J0_CONVENTIONS}")
        need(self.b0_ratio > 0 and self.tau_j0 > 0, "b0_ratio", "ramp parameters must be positive")
        need(len(self.b_ratios) > 0 and all(0 < b < self.b0_ratio for b in self.b_ratios),
             "b_ratios", "need 0 < B/J0 < b0_ratio")
        need(self.trace_window > 0, "trace_window", "must be positive")
        need(self.trace_samples >= 5, "trace_samples", "need at least 5")
        need(0 <= self.trace_site < self.ion_count, "trace_site", "site out of range")
        need(0 < self.gap_min < self.gap_max and self.gap_points >= 2, "gap_min",
             "need 0 < gap_min < gap_max and gap_points >= 2")
        need(1 <= self.cs_m <= self.cs_n_step, "cs_m", "need 1 <= cs_m <= cs_n_step")
        need(0 < self.cs_threshold < 1, "cs_threshold", "must lie in (0, 1)")
        need(self.lr_mode in ("relative", "absolute"), "lr_mode", "relative or absolute")
        need(len(self.lr_levels) > 0 and all(c != 0 for c in self.lr_levels), "lr_levels",
             "need nonzero levels")
        need(self.workers >= 1, "workers", "must be >= 1")
        bad = [s for s in self.stages if s not in STAGES]
        need(not bad, "stages", f"unknown {bad}")

    # --- file form --------------------------------------------------------
    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {f.name: _encode(getattr(self, f.name)) for f in fields(self)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        if "run" not in cp:
            raise ConfigError("config: missing [run] section")
        return cls.from_mapping(dict(cp["run"]))

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, val in raw.items():
            if key not in known:
                raise ConfigError(f"{key}: unknown field")
            kw[key] = _decode(val, known[key], key) if isinstance(val, str) else val
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def numeric_dict(self) -> dict:
        return {f.name: _jsonable(getattr(self, f.name)) for f in fields(self)
                if f.name not in self.NON_NUMERIC}

    @property
    def fingerprint(self) -> str:
        return digest(self.numeric_dict())

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def _encode(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_encode(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _scalar(text, kind, name):
    text = text.strip()
    if text.lower() == "none":
        return None
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {kind.__name__}") from None
    return text


_FIELD_KINDS = {"ion_count": int, "sign": int, "trace_samples": int, "trace_site": int,
                "gap_points": int, "cs_m": int, "cs_n_step": int, "cs_seed": int, "seed": int,
                "workers": int, "trace_targets": (tuple, int), "b_ratios": (tuple, float),
                "lr_alphas": (tuple, float), "lr_levels": (tuple, float), "stages": (tuple, str),
                "j0_convention": str, "lr_mode": str, "output": str}


def _decode(text, f, name):
    kind = _FIELD_KINDS.get(name, float)
    if isinstance(kind, tuple):
        parts = [p for p in text.split(",") if p.strip()]
        return tuple(_scalar(p, kind[1], name) for p in parts)
    return _scalar(text, kind, name)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --- deterministic writers -------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x) + 0.0:.{SIG_DIGITS}g}"  # + 0.0 folds -0 into 0


def _round(obj):
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            return None
        return float(f"{x + 0.0:.{SIG_DIGITS}g}")
    return obj


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_text(obj, fingerprint: str) -> str:
    payload = {"schema": SCHEMA_VERSION, "fingerprint": fingerprint, **_round(obj)}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def csv_text(header: list[str], rows, fingerprint: str, meta: dict | None = None) -> str:
    buf = io.StringIO()
    tags = {"schema": SCHEMA_VERSION, "fingerprint": fingerprint, **(meta or {})}
    buf.write("# " + " ".join(f"{k}={fmt(v)}" for k, v in tags.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def read_csv(path: Path) -> tuple[dict, list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    rows = list(csv.reader(lines[1:]))
    return meta, rows[0], rows[1:]


# --- stages ----------------------------------------------------------------

def single_ion_unit(cm):
    """A lone ion has no couplings; fields are then quoted in units of 1 kHz."""
    return dataclasses.replace(cm, J0=1.0) if cm.J0 == 0.0 else cm


def build_chain(cfg: RunConfig, alpha: float | None = None) -> ChainSolution:
    trap = TrapParams(ion_count=cfg.ion_count)
    target = cfg.alpha if alpha is None else alpha
    if alpha is None and cfg.axial_khz is not None:
        trap = trap.with_axial(cfg.axial_khz)
    elif cfg.ion_count >= 3 and target is not None:
        trap = tune_axial(target, trap)
    sol = solve_chain(trap, sign=cfg.sign, j0_convention=cfg.j0_convention)
    sol.couplings = single_ion_unit(sol.couplings)
    return sol


def chain_summary(sol: ChainSolution) -> dict:
    t = sol.trap
    return {"ion_count": t.ion_count, "axial_khz": t.axial_com_frequency,
            "transverse_khz": t.transverse_com_frequency, "detuning_khz": t.detuning,
            "detuning_ratio": t.detuning / t.transverse_com_frequency,
            "mode_frequencies_khz": sol.modes.frequencies, "positions": sol.chain.positions,
            "J_khz": sol.couplings.J, "J0_khz": sol.couplings.J0,
            "j0_convention": sol.couplings.j0_convention, "sign": sol.couplings.sign,
            "alpha": None if sol.fit is None else sol.fit.exponent,
            "alpha_prefactor": None if sol.fit is None else sol.fit.prefactor,
            "alpha_rms_log_residual": None if sol.fit is None else sol.fit.rms_log_residual}


class Run:
    """One run directory. Stages write whole files atomically; failures leave an error file."""

    def __init__(self, cfg: RunConfig, root: Path | None = None, cache: bool = True):
        self.cfg = cfg
        self.cache = cache
        self.root = Path(root if root is not None else cfg.output)
        self.fp = cfg.fingerprint
        self._chains: dict = {}
        self._states: dict = {}

    # paths
    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def write_json(self, rel, obj):
        atomic_write(self.path(rel), json_text(obj, self.fp))
        return rel

    def write_csv(self, rel, header, rows, meta=None):
        atomic_write(self.path(rel), csv_text(header, rows, self.fp, meta))
        return rel

    # cached upstream products
    def chain(self, alpha: float | None = None) -> ChainSolution:
        key = "main" if alpha is None else round(float(alpha), 9)
        if key not in self._chains:
            sol = build_chain(self.cfg, alpha)
            # runs that tune to the same trap share one chain object
            for other in self._chains.values():
                if other.trap == sol.trap:
                    sol = other
                    break
            self._chains[key] = sol
        return self._chains[key]

    def state(self, sol: ChainSolution, b_ratio: float) -> ramsey.PreparedState:
        cfg = self.cfg
        up = {"trap": dataclasses.asdict(sol.trap), "sign": cfg.sign, "j0": cfg.j0_convention,
              "B": b_ratio, "B0": cfg.b0_ratio, "tau": cfg.tau_j0}
        key = digest(up)
        if key in self._states:
            return self._states[key]
        alpha = None if sol.fit is None else sol.fit.exponent
        cache = self.path("cache", f"psi0_{key}.npz")
        if self.cache and cache.exists():
            with np.load(cache) as z:
                psi, steps = z["psi0"], int(z["ramp_steps"])
            field_ = b_ratio * to_angular(sol.couplings.J0)
            eig = diagonalize_tfim(HamiltonianSpec(sol.couplings, field_))
            fp = {"N": sol.trap.ion_count, "alpha": None if alpha is None else round(alpha, 6),
                  "B_over_J0": float(b_ratio), "B0_over_J0": cfg.b0_ratio, "tau_J0": cfg.tau_j0,
                  "j0_convention": cfg.j0_convention, "seed": cfg.seed}
            st = ramsey.PreparedState(sol.couplings, field_, psi, eig, fp, steps)
        else:
            st = ramsey.prepare_state(sol.couplings, b_ratio, b0_ratio=cfg.b0_ratio,
                                      tau_j0=cfg.tau_j0, alpha=alpha, seed=cfg.seed)
            if self.cache:
                cache.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=cache.parent, suffix=".npz")
                os.close(fd)
                np.savez(tmp, psi0=st.psi0, ramp_steps=st.ramp_steps)
                os.replace(tmp, cache)
        self._states[key] = st
        return st

    def _map(self, fn, items):
        items = list(items)
        if self.cfg.workers == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as ex:
            return list(ex.map(fn, items))

    def _targets(self):
        return [j for j in self.cfg.trace_targets if j < self.cfg.ion_count]

    def _states_for(self, sol):
        # ramps run in the pool; results come back in b_ratios order
        return self._map(lambda b: self.state(sol, b), self.cfg.b_ratios)

    # stage bodies return the list of files they wrote
    def stage_chain(self):
        sol = self.chain()
        s = chain_summary(sol)
        out = [self.write_json("chain.json", s)]
        n = sol.trap.ion_count
        rows = [(i, j, sol.couplings.J[i, j], abs(sol.chain.positions[i] - sol.chain.positions[j]))
                for i in range(n) for j in range(n)]
        out.append(self.write_csv("couplings.csv", ["i", "j", "J_khz", "distance"], rows))
        return out

    def stage_gap(self):
        cfg = self.cfg
        sol = self.chain()
        ratios = np.linspace(cfg.gap_min, cfg.gap_max, cfg.gap_points)
        gaps = gap_sweep(sol.couplings, ratios)
        k = int(np.nanargmin(gaps))
        rows = list(zip(ratios, gaps))
        return [self.write_csv("gap.csv", ["B_over_J0", "gap_over_J0"], rows,
                               {"minimum_at": ratios[k]})]

    def stage_traces(self):
        cfg = self.cfg
        sol = self.chain()
        alpha = None if sol.fit is None else sol.fit.exponent
        out, summary = [], []
        for b, st in zip(cfg.b_ratios, self._states_for(sol)):
            trs = ramsey.scan_site_traces(st, cfg.trace_site, self._targets(),
                                          cfg.trace_window, cfg.trace_samples)
            for tr in trs:
                meta = {"i": tr.i, "j": tr.j, "B/J0": b, "alpha": alpha}
                rel = f"traces/trace_B{fmt(b)}_i{tr.i}_j{tr.j}.csv"
                out.append(self.write_csv(rel, ["t_ms", "G"], zip(tr.times, tr.values), meta))
            low = st.eig.energies[:8]
            summary.append({"B_over_J0": b, "field_rad_per_ms": st.field,
                            "lowest_energies": low, "lowest_parities": st.eig.parity[:8],
                            "ramp_steps": st.ramp_steps,
                            "ground_population": abs(np.vdot(st.eig.vectors[:, 0], st.psi0)) ** 2})
        out.append(self.write_json("eigen_summary.json", {"states": summary}))
        return out

    def stage_moments(self):
        cfg = self.cfg
        sol = self.chain()
        reports = []
        for b, st in zip(cfg.b_ratios, self._states_for(sol)):
            i = cfg.trace_site
            h = mom.default_step(st.eig.norm)
            for j in self._targets():
                g = lambda t, j=j: ramsey.green_direct(st.psi0, st.eig, i, j, t, causal=False)
                rep = mom.analytic_moments(st.psi0, sol.couplings, st.field, i, j).merged(
                    mom.numeric_moments(g, h=h, i=i, j=j))
                d = rep.as_dict()
                d["B_over_J0"] = b
                d["sigma_y_i"] = expectation(st.psi0, lambda v: apply_pauli("y", i, v)).real
                reports.append(d)
        return [self.write_json("moments.json", {"reports": reports})]

    def stage_cs(self):
        cfg = self.cfg
        sol = self.chain()
        prob = cs.build_problem(cfg.cs_m, cfg.cs_n_step, cfg.trace_window, cfg.cs_seed)
        out = []
        i = j = cfg.trace_site
        for b, st in zip(cfg.b_ratios, self._states_for(sol)):
            g = ramsey.green_direct(st.psi0, st.eig, i, j, prob.times)
            spec = cs.basis_pursuit(prob, g)
            peaks = cs.extract_peaks(spec, cfg.cs_threshold)
            ref = cs.lehmann_reference(st.eig.overlaps(st.psi0), st.eig, i, j)
            sig = ref.significant(cfg.cs_reference_floor)
            rep = cs.match_peaks([p.frequency for p in peaks], sig.frequencies,
                                 prob.bin_width, prob.period)
            obj = {"B_over_J0": b, "i": i, "j": j, "M": prob.M, "N_step": prob.N_step,
                   "dt_ms": prob.dt, "bin_width": prob.bin_width, "period": prob.period,
                   "diagnostics": spec.diagnostics,
                   "peaks": [{"frequency": p.frequency, "magnitude": p.magnitude,
                              "bins": list(p.bins), "unresolved": p.unresolved} for p in peaks],
                   "reference": [{"frequency": f, "scaled_weight": abs(w) * prob.N_step}
                                 for f, w in zip(sig.frequencies, sig.weights)],
                   "match": rep.as_dict()}
            out.append(self.write_json(f"spectra/cs_B{fmt(b)}.json", obj))
            rows = zip(prob.signed_omega(), np.abs(spec.amplitudes))
            out.append(self.write_csv(f"spectra/cs_B{fmt(b)}.csv", ["omega_rad_per_ms", "magnitude"],
                                      rows, {"i": i, "j": j, "B/J0": b}))
        return out

    def stage_lr(self):
        cfg = self.cfg
        alphas = cfg.lr_alphas or ((cfg.alpha,) if cfg.alpha is not None else ())
        if cfg.ion_count < 5:
            raise ValueError("the distance fits need at least 5 ions")
        entries = []
        for a in alphas:
            sol = self.chain(a)
            for b, st in zip(cfg.b_ratios, self._states_for(sol)):
                trs = ramsey.scan_site_traces(st, cfg.trace_site, range(cfg.ion_count),
                                              cfg.trace_window, cfg.trace_samples)
                entries.append(lr.LrInput(a, b, trs, sol.chain.positions))
        fractions = cfg.lr_levels
        rows = []
        for e in entries:
            levels = (lr.intercept_levels(e.traces, "absolute") if cfg.lr_mode == "absolute"
                      else lr.intercept_levels(e.traces, "relative", fractions))
            rows.extend(lr.feature_fits(e, levels, cfg.dead_band))
        data = [{"alpha": r.alpha, "B_over_J0": r.b_ratio, "feature": r.feature, "level": r.level,
                 "gamma": r.fit.gamma, "prefactor": r.fit.prefactor, "residual": r.fit.residual,
                 "points": r.fit.points, "status": r.fit.status} for r in rows]
        return [self.write_json("lr.json", {"mode": cfg.lr_mode, "fits": data})]

    def execute(self) -> dict:
        self.root.mkdir(parents=True, exist_ok=True)
        atomic_write(self.path("config.ini"), self.cfg.to_text())
        manifest = {"schema": SCHEMA_VERSION, "fingerprint": self.fp,
                    "config": self.cfg.numeric_dict(), "stages": {}}
        failed = None
        for name in STAGES:
            if name not in self.cfg.stages:
                continue
            err = self.path("errors", f"{name}.txt")
            try:
                files = getattr(self, f"stage_{name}")()
                manifest["stages"][name] = {"status": "ok", "files": sorted(files)}
                if err.exists():
                    err.unlink()
            except Exception as exc:  # noqa: BLE001 - recorded per stage
                log.error("stage %s failed: %s", name, exc)
                atomic_write(err, f"stage: {name}\nfingerprint: {self.fp}\n"
                                  f"error: {exc!r}\n\n{traceback.format_exc()}")
                manifest["stages"][name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
                failed = failed or name
        atomic_write(self.path("manifest.json"), json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        if failed:
            raise StageError(failed, manifest["stages"][failed]["error"])
        return manifest


def run(cfg: RunConfig, root: Path | None = None) -> Path:
    r = Run(cfg, root)
    r.execute()
    return r.root


# --- export ----------------------------------------------------------------

EXPORTS = ("trace", "lr-table", "spectra", "gap", "chain", "moments", "manifest")
_EXPORT_STAGE = {"trace": "traces", "lr-table": "lr", "spectra": "cs", "gap": "gap",
                 "chain": "chain", "moments": "moments", "manifest": "run"}


def _need(root: Path, rel: str, what: str) -> Path:
    p = root / rel
    if not p.exists():
        raise ArtifactNotFound(_EXPORT_STAGE[what], p)
    return p


def _manifest(root: Path) -> dict:
    return json.loads(_need(root, "manifest.json", "manifest").read_text())


def export(root, what: str, *, b_ratio: float | None = None, i: int | None = None,
           j: int | None = None) -> str:
    """Plot-ready CSV (or JSON for the manifest) of one artifact kind."""
    root = Path(root)
    if what not in EXPORTS:
        raise ValueError(f"unknown export {what!r}; choose from {EXPORTS}")
    man = _manifest(root)
    fp = man["fingerprint"]
    if what == "manifest":
        return json.dumps(man, sort_keys=True, indent=2) + "\n"
    if what == "trace":
        cfg = man["config"]
        b = cfg["b_ratios"][0] if b_ratio is None else b_ratio
        ii = cfg["trace_site"] if i is None else i
        jj = ([t for t in cfg["trace_targets"] if t < cfg["ion_count"]][0] if j is None else j)
        return _need(root, f"traces/trace_B{fmt(b)}_i{ii}_j{jj}.csv", what).read_text()
    if what == "gap":
        return _need(root, "gap.csv", what).read_text()
    if what == "chain":
        return _need(root, "couplings.csv", what).read_text()
    if what == "moments":
        reps = json.loads(_need(root, "moments.json", what).read_text())["reports"]
        rows = [[r["B_over_J0"], r["i"], r["j"], *r["analytic"], *r["numeric"]] for r in reps]
        head = ["B_over_J0", "i", "j"] + [f"analytic_mu{n}" for n in range(4)] + \
               [f"derivative_mu{n}" for n in range(4)]
        return csv_text(head, rows, fp)
    if what == "lr-table":
        data = json.loads(_need(root, "lr.json", what).read_text())
        return lr_table_csv(data, fp)
    # spectra: recovered peaks next to the reference lines, one block per field
    cfg = man["config"]
    bs = cfg["b_ratios"] if b_ratio is None else [b_ratio]
    rows = []
    for b in bs:
        obj = json.loads(_need(root, f"spectra/cs_B{fmt(b)}.json", what).read_text())
        matched = {m[0]: m[1] for m in obj["match"]["matched"]}
        spurious = set(obj["match"]["spurious"])
        sums = set(obj["match"]["sum_artifacts"])
        peaks, ref = obj["peaks"], obj["reference"]
        for k in range(max(len(peaks), len(ref))):
            p = peaks[k] if k < len(peaks) else None
            r = ref[k] if k < len(ref) else None
            flag = "" if p is None else ("sum" if k in sums else "spurious" if k in spurious
                                         else f"ref{matched[k]}")
            rows.append([b, k, None if p is None else p["frequency"],
                         None if p is None else p["magnitude"], flag,
                         None if r is None else r["frequency"],
                         None if r is None else r["scaled_weight"]])
    head = ["B_over_J0", "row", "peak_omega", "peak_magnitude", "peak_match",
            "reference_omega", "reference_scaled_weight"]
    return csv_text(head, rows, fp)


def lr_table_csv(data: dict, fp: str) -> str:
    fits = data["fits"]
    features = []
    for f in fits:
        if f["feature"] not in features:
            features.append(f["feature"])
    labels = {}
    if data["mode"] == "absolute":  # relative levels differ between rows
        for f in fits:
            if f["level"] is not None:
                labels.setdefault(f["feature"], f"c={fmt(f['level'])}")
    head = ["B_over_J0", "alpha"] + [labels.get(k, k) for k in features]
    keys = []
    for f in fits:
        k = (f["B_over_J0"], f["alpha"])
        if k not in keys:
            keys.append(k)
    keys.sort(key=lambda k: (-k[0], k[1]))
    cell = {(f["B_over_J0"], f["alpha"], f["feature"]): f for f in fits}
    rows = []
    for b, a in keys:
        row = [b, a]
        for k in features:
            f = cell.get((b, a, k))
            row.append(f"{f['gamma']:.2f}" if f and f["status"] == "ok" else "---")
        rows.append(row)
    return csv_text(head, rows, fp, {"mode": data["mode"]})
