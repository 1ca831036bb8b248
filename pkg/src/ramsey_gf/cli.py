"""Command-line entry point: ``ramsey-gf <subcommand>``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import cs_spectra as cs
from . import lr_analysis as lr
from . import moments as mom
from . import ramsey
from .pipeline import (EXPORTS, ArtifactNotFound, ConfigError, Run, RunConfig, StageError,
                       build_chain, chain_summary, csv_text, export, json_text, lr_table_csv, run)
from .spin_system import apply_pauli, expectation, gap_sweep

log = logging.getLogger("ramsey_gf")


def _tuple_of(kind):
    return lambda s: tuple(kind(x) for x in s.split(",") if x.strip())


def _optional_float(s):
    return None if s.lower() == "none" else float(s)


_ARG_TYPES = {"alpha": _optional_float, "axial_khz": _optional_float,
              "b_ratios": _tuple_of(float), "trace_targets": _tuple_of(int),
              "lr_alphas": _tuple_of(float), "lr_levels": _tuple_of(float),
              "stages": _tuple_of(str)}


def _add_config_flags(p, names=None):
    """One --flag per RunConfig field (or the listed subset); unset flags keep the defaults."""
    defaults = RunConfig()
    for f in dataclasses.fields(RunConfig):
        if names is not None and f.name not in names:
            continue
        kind = _ARG_TYPES.get(f.name)
        if kind is None:
            val = getattr(defaults, f.name)
            kind = type(val) if val is not None else float
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None,
                       help=f"default: {getattr(defaults, f.name)!r}")


def _config(args, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    over = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
            if getattr(args, f.name, None) is not None}
    return RunConfig.from_mapping({**{f.name: getattr(base, f.name)
                                      for f in dataclasses.fields(RunConfig)}, **over})


CHAIN_FLAGS = ("ion_count", "alpha", "axial_khz", "sign", "j0_convention")
RAMP_FLAGS = CHAIN_FLAGS + ("b0_ratio", "tau_j0", "seed")


def _emit(text: str, out: str | None):
    if out:
        from .pipeline import atomic_write
        atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _state(cfg, b_ratio):
    sol = build_chain(cfg)
    return sol, Run(cfg, cache=False).state(sol, b_ratio)


def cmd_chain(args):
    cfg = _config(args)
    _emit(json_text(chain_summary(build_chain(cfg)), cfg.fingerprint), args.out)


def cmd_gap(args):
    cfg = _config(args)
    sol = build_chain(cfg)
    ratios = np.linspace(cfg.gap_min, cfg.gap_max, cfg.gap_points)
    gaps = gap_sweep(sol.couplings, ratios)
    k = int(np.nanargmin(gaps))
    _emit(csv_text(["B_over_J0", "gap_over_J0"], zip(ratios, gaps), cfg.fingerprint,
                   {"minimum_at": ratios[k]}), args.out)


def cmd_trace(args):
    cfg = _config(args)
    sol, st = _state(cfg, args.b_ratio)
    tr = ramsey.scan_trace(st, args.i, args.j, cfg.trace_window, cfg.trace_samples, args.method)
    alpha = None if sol.fit is None else sol.fit.exponent
    meta = {"i": args.i, "j": args.j, "B/J0": args.b_ratio, "alpha": alpha, "method": args.method}
    _emit(csv_text(["t_ms", "G"], zip(tr.times, tr.values), cfg.fingerprint, meta), args.out)


def cmd_moments(args):
    cfg = _config(args)
    sol, st = _state(cfg, args.b_ratio)
    g = lambda t: ramsey.green_direct(st.psi0, st.eig, args.i, args.j, t, causal=False)
    h = args.step or mom.default_step(st.eig.norm)
    rep = mom.analytic_moments(st.psi0, sol.couplings, st.field, args.i, args.j).merged(
        mom.numeric_moments(g, h=h, i=args.i, j=args.j))
    d = rep.as_dict()
    d["B_over_J0"] = args.b_ratio
    d["sigma_y_i"] = expectation(st.psi0, lambda v: apply_pauli("y", args.i, v)).real
    _emit(json_text(d, cfg.fingerprint), args.out)


def cmd_cs(args):
    cfg = _config(args)
    sol, st = _state(cfg, args.b_ratio)
    prob = cs.build_problem(cfg.cs_m, cfg.cs_n_step, cfg.trace_window, cfg.cs_seed)
    g = ramsey.green_direct(st.psi0, st.eig, args.i, args.j, prob.times)
    spec = cs.basis_pursuit(prob, g)
    peaks = cs.extract_peaks(spec, cfg.cs_threshold)
    ref = cs.lehmann_reference(st.eig.overlaps(st.psi0), st.eig, args.i, args.j)
    sig = ref.significant(cfg.cs_reference_floor)
    rep = cs.match_peaks([p.frequency for p in peaks], sig.frequencies, prob.bin_width, prob.period)
    obj = {"B_over_J0": args.b_ratio, "i": args.i, "j": args.j, "diagnostics": spec.diagnostics,
           "bin_width": prob.bin_width, "period": prob.period,
           "peaks": [{"frequency": p.frequency, "magnitude": p.magnitude, "unresolved": p.unresolved}
                     for p in peaks],
           "reference": [{"frequency": f, "scaled_weight": abs(w) * prob.N_step}
                         for f, w in zip(sig.frequencies, sig.weights)],
           "match": rep.as_dict()}
    _emit(json_text(obj, cfg.fingerprint), args.out)


def cmd_lr(args):
    cfg = _config(args)
    r = Run(cfg, cache=False)
    rows = []
    for a in cfg.lr_alphas:
        sol = r.chain(a)
        for b in cfg.b_ratios:
            st = r.state(sol, b)
            trs = ramsey.scan_site_traces(st, cfg.trace_site, range(cfg.ion_count),
                                          cfg.trace_window, cfg.trace_samples)
            e = lr.LrInput(a, b, trs, sol.chain.positions)
            levels = lr.intercept_levels(trs, cfg.lr_mode, cfg.lr_levels)
            rows.extend(lr.feature_fits(e, levels, cfg.dead_band))
    data = {"mode": cfg.lr_mode,
            "fits": [{"alpha": x.alpha, "B_over_J0": x.b_ratio, "feature": x.feature,
                      "level": x.level, "gamma": x.fit.gamma, "status": x.fit.status} for x in rows]}
    _emit(lr_table_csv(data, cfg.fingerprint), args.out)


def cmd_run(args):
    base = RunConfig.load(args.config) if args.config else RunConfig()
    cfg = _config(args, base)
    root = run(cfg)
    print(root)


def cmd_export(args):
    _emit(export(args.run_dir, args.what, b_ratio=args.b_ratio, i=args.i, j=args.j), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ramsey-gf",
                                description="Ramsey-protocol Green's functions of trapped-ion Ising chains")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, flags, help_):
        sp = sub.add_parser(name, help=help_)
        _add_config_flags(sp, flags)
        sp.add_argument("--out", default=None, help="write to a file instead of stdout")
        sp.set_defaults(func=fn)
        return sp

    command("chain", cmd_chain, CHAIN_FLAGS, "equilibrium chain, couplings and alpha fit")
    command("spectrum-gap", cmd_gap, CHAIN_FLAGS + ("gap_min", "gap_max", "gap_points"),
            "coupled gap against B/J0")
    for name, fn, extra, help_ in (
            ("trace", cmd_trace, ("trace_window", "trace_samples"), "G_ij(t) on a uniform grid"),
            ("moments", cmd_moments, (), "closed-form and derivative spectral moments"),
            ("cs", cmd_cs, ("trace_window", "cs_m", "cs_n_step", "cs_seed", "cs_threshold",
                            "cs_reference_floor"), "compressed-sensing spectrum vs Lehmann lines")):
        sp = command(name, fn, RAMP_FLAGS + extra, help_)
        sp.add_argument("--b-ratio", type=float, default=0.94, help="B/J0 after the ramp")
        sp.add_argument("--i", type=int, default=0)
        sp.add_argument("--j", type=int, default=0)
        if name == "trace":
            sp.add_argument("--method", choices=("direct", "protocol", "heisenberg"), default="direct")
        if name == "moments":
            sp.add_argument("--step", type=float, default=None, help="finite-difference step (ms)")
    command("lr", cmd_lr, RAMP_FLAGS + ("b_ratios", "lr_alphas", "lr_mode", "lr_levels",
                                        "trace_window", "trace_samples", "trace_site", "dead_band"),
            "power-law fits of feature times against distance")

    sp = sub.add_parser("run", help="full pipeline into a run directory")
    sp.add_argument("--config", default=None, help="key=value file with a [run] section")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("export", help="CSV/JSON views of a finished run")
    sp.add_argument("run_dir")
    sp.add_argument("what", choices=EXPORTS)
    sp.add_argument("--b-ratio", type=float, default=None)
    sp.add_argument("--i", type=int, default=None)
    sp.add_argument("--j", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 3
    except ArtifactNotFound as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 - reported with the subcommand as stage
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
