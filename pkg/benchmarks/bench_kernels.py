"""Time the hot kernels under numba and under the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from RTDP_LAB_NO_NUMBA.

    python3 benchmarks/bench_kernels.py            # both backends, side by side
    python3 benchmarks/bench_kernels.py --backend numpy --json
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat=5, number=200):
    fn()  # warm-up, includes compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def measure(hidden=256, batch=16):
    from rtdp_lab._jit import NUMBA_ENABLED
    from rtdp_lab.agent import AgentConfig, BudgetSpec, run_training
    from rtdp_lab.net import OptState, adam_step, forward, init_params, loss_and_gradients

    rng = np.random.default_rng(0)
    params = init_params(4, 2, rng, hidden=hidden, head_scale=0.1)
    X = rng.uniform(-1, 1, size=(batch, 4))
    P = rng.dirichlet(np.ones(2), size=batch)
    V = rng.normal(size=batch)
    grads = params.zeros_like()
    opt = OptState.for_params(params)
    x = X[0]

    def train_step():
        loss_and_gradients(params, X, P, V, out=grads)
        adam_step(params, grads, opt, inplace=True)

    cfg = AgentConfig.for_env("cartpole", n_mcts=8, budget=BudgetSpec("total_traces", 4000))
    run_training(cfg, 0)  # warm-up
    t0 = time.perf_counter()
    run_training(cfg, 0)
    loop = time.perf_counter() - t0

    return {
        "backend": "numba" if NUMBA_ENABLED else "numpy",
        "forward_one_us": best_of(lambda: forward(params, x)) * 1e6,
        "loss_and_grads_us": best_of(lambda: loss_and_gradients(params, X, P, V, out=grads)) * 1e6,
        "adam_us": best_of(lambda: adam_step(params, grads, opt, inplace=True)) * 1e6,
        "train_step_us": best_of(train_step) * 1e6,
        "run_500_real_steps_s": loop,
    }


def run_backend(name):
    env = dict(os.environ)
    env.pop("RTDP_LAB_NO_NUMBA", None)
    if name == "numpy":
        env["RTDP_LAB_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, __file__, "--backend", name, "--json"],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--backend", choices=["numba", "numpy"],
                    help="measure this process only (the env flag must already match)")
    ap.add_argument("--json", action="store_true", help="print raw JSON")
    args = ap.parse_args(argv)

    if args.backend:
        result = measure()
        if result["backend"] != args.backend:
            sys.exit(f"asked for {args.backend} but the process is running {result['backend']}")
        print(json.dumps(result) if args.json else result)
        return

    rows = [run_backend("numba"), run_backend("numpy")]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:<24}{a:>12.2f}{b:>12.2f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
