"""Compare the compiled and numpy kernel backends.

Times the three kernels on their own, then two workloads built on them:
a field ramp (Lanczos steps call the Hamiltonian kernel) and a basis-pursuit
solve (every ADMM iteration calls the shrinkage kernel). Results are checked
for agreement before timings are printed.

    python benchmarks/bench_kernels.py [--sites 8 10 12] [--repeat 5]
"""
import argparse
import contextlib
import time

import numpy as np

from ramsey_gf import cs_spectra, kernels
from ramsey_gf import evolution as ev
from ramsey_gf.spin_system import initial_state
from ramsey_gf.trap_chain import TrapParams, solve_chain
from ramsey_gf.units import to_angular

NAMES = ("apply_tfim", "apply_pauli", "soft_threshold")


@contextlib.contextmanager
def backend(name):
    """Temporarily route every kernel call through one backend."""
    if name == "cython" and kernels.BACKEND != "cython":
        raise RuntimeError("compiled extension not available")
    impl = kernels.PYTHON_KERNELS if name == "python" else kernels._impl
    saved = {k: getattr(kernels, k) for k in NAMES}
    saved_cs = cs_spectra.soft_threshold
    try:
        for k in NAMES:
            setattr(kernels, k, getattr(impl, k))
        cs_spectra.soft_threshold = impl.soft_threshold
        yield
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)
        cs_spectra.soft_threshold = saved_cs


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases(n, rng):
    dim = 1 << n
    J = np.ascontiguousarray(rng.uniform(0.1, 1.0, (n, n)))
    J = np.ascontiguousarray(J + J.T)
    np.fill_diagonal(J, 0.0)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    out = np.empty(dim, complex)
    x = rng.standard_normal(64 * dim) + 1j * rng.standard_normal(64 * dim)
    out_x = np.empty_like(x)
    return {
        "apply_tfim": lambda: kernels.apply_tfim(J, 2.0, psi, out).copy(),
        "apply_pauli": lambda: kernels.apply_pauli(1, n // 2, psi, out).copy(),
        "soft_threshold": lambda: kernels.soft_threshold(x, 1.0, out_x).copy(),
    }


def ramp_case(n):
    cm = solve_chain(TrapParams(ion_count=n)).couplings
    j0 = to_angular(cm.J0)
    sched = ev.RampSchedule.standard(j0, 0.94)
    cfg = ev.CfetConfig(sched.t0 / 200, adaptive=False)
    return lambda: ev.evolve_ramp(sched, cm, initial_state(n), cfg)


def cs_case(rng):
    prob = cs_spectra.build_problem(64, 1024, 6.0, seed=1)
    x = np.zeros(1024, complex)
    x[[40, 300, 700]] = 1024.0
    g = np.exp(-1j * np.outer(prob.times, prob.omega)) @ x / 1024
    return lambda: cs_spectra.basis_pursuit(prob, g).amplitudes


def run(args):
    rng = np.random.default_rng(0)
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"active backend: {kernels.BACKEND}")
    rows = []
    for n in args.sites:
        for name, fn in kernel_cases(n, rng).items():
            rows.append((f"{name} N={n}", fn))
    for n in args.ramp_sites:
        rows.append((f"ramp N={n} (200 steps)", ramp_case(n)))
    rows.append(("basis pursuit M=64 N_step=1024", cs_case(rng)))

    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + ("     speed-up" if len(backends) > 1 else ""))
    for label, fn in rows:
        res = {}
        for b in backends:
            with backend(b):
                res[b] = best_of(fn, args.repeat)
        if len(backends) > 1:
            a, c = res["python"][1], res["cython"][1]
            err = np.abs(a - c).max() / max(np.abs(a).max(), 1e-300)
            if err > 1e-9:
                raise AssertionError(f"{label}: backends disagree ({err:.2e})")
        line = f"{label:34s}" + "".join(f"{res[b][0] * 1e3:10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{res['python'][0] / res['cython'][0]:12.1f}x"
        print(line)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sites", type=int, nargs="+", default=[8, 10, 12])
    p.add_argument("--ramp-sites", type=int, nargs="+", default=[8, 10])
    p.add_argument("--repeat", type=int, default=5)
    run(p.parse_args(argv))


if __name__ == "__main__":
    main()
