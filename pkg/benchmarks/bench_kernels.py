"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py --N 32 --k 3 --points 200000

Times point location, field evaluation at located points and one full
transport step, after a warm-up call so numba compilation is excluded.
"""
import argparse
import time

import numpy as np

from nclg import set_backend
from nclg._backend import HAVE_NUMBA
from nclg.characteristics import build_step_feet
from nclg.harness import pulse_problem
from nclg.kernels import evaluate, locate
from nclg.mesh import LOCATE_TOL, build_uniform_square_mesh
from nclg.scheme import History, Operators, SchemeConfig, step
from nclg.space import build_space, interpolate


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    prob = pulse_problem()
    mesh = build_uniform_square_mesh(prob.box, args.N)
    space = build_space(mesh, args.k)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, (args.points, 2))
    coeffs = interpolate(space, prob.exact, 0.0).coeffs
    hosts, xh, _ = locate(mesh, pts, LOCATE_TOL)

    cfg = SchemeConfig(q=args.q, dt=0.01, mu=prob.mu)
    ops = Operators(space, cfg)
    hist = History(cfg.q, cfg.dt)
    for i in range(cfg.q):
        hist.push(i * cfg.dt, interpolate(space, prob.exact, i * cfg.dt))
    t_n = cfg.q * cfg.dt

    cases = {
        "locate": lambda: locate(mesh, pts, LOCATE_TOL),
        "evaluate": lambda: evaluate(args.k, space.cell_dofs, coeffs, hosts, xh),
        "feet": lambda: build_step_feet(space, t_n, cfg.dt, cfg.q, prob.velocity, ops.quad),
        "step": lambda: step(hist, cfg, ops, prob.velocity, None, t_n),
    }
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    results = {}
    for name in backends:
        set_backend(name)
        results[name] = {case: best_of(fn, args.repeat) for case, fn in cases.items()}

    print(f"N={args.N} k={args.k} q={args.q} points={args.points} elements={mesh.n_elements}")
    print(f"{'case':<10}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if HAVE_NUMBA else ""))
    for case in cases:
        row = f"{case:<10}" + "".join(f"{results[b][case]:>11.4f}s" for b in backends)
        if HAVE_NUMBA:
            row += f"{results['numpy'][case] / results['numba'][case]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
