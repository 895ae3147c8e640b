"""Timing comparison of the jit and numpy kernel backends.

Run as a script:

    python3 benchmarks/bench_kernels.py [--repeats 30]

Each kernel is timed on workloads shaped like real training batches (the
policy trunk at its production width, minibatch-sized loss/grad calls, an
episode-sized advantage pass, and a full-parameter optimizer step). The
numba path is warmed before timing so compilation is excluded.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fairfleet.kernels import numpy_backend
from fairfleet.policy import init_policy

try:
    from fairfleet.kernels import numba_backend
except ImportError:
    numba_backend = None


def _workloads(rng: np.random.Generator) -> dict[str, tuple]:
    params = init_policy(41, 5, rng, n_heads=1, n_hidden=64)
    w1, b1, w2, b2 = params._split()
    batch = 64
    x = rng.normal(size=(batch, 41))
    mask = np.ones((batch, 5))
    mask[:, 3:] = (rng.random((batch, 2)) < 0.5).astype(np.float64)
    actions = rng.integers(0, 3, size=(batch, 1))
    old_logp = np.full(batch, -np.log(3.0))
    adv = rng.normal(size=batch)
    ret = rng.normal(size=batch)

    horizon = 250
    rewards = rng.normal(size=horizon)
    values = rng.normal(size=horizon)
    dones = np.zeros(horizon, dtype=np.bool_)
    dones[49::50] = True

    n_params = len(params.flat)
    grads = rng.normal(size=n_params)

    return {
        "policy_forward": (x, w1, b1, w2, b2, mask, 1),
        "ppo_loss_grads": (
            x, w1, b1, w2, b2, mask, 1, actions, old_logp, adv, ret, 0.2, 0.01
        ),
        "gae": (rewards, values, dones, 0.99, 0.95),
        "adam_step": (
            params.flat.copy(), grads, np.zeros(n_params), np.zeros(n_params),
            1, 5e-4, 0.9, 0.999, 1e-8,
        ),
    }


def _time_call(fn, args, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30,
                        help="timed repetitions per kernel; the best is kept")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    workloads = _workloads(rng)

    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        for name, call_args in workloads.items():
            getattr(numba_backend, name)(*call_args)  # warm the jit cache
        backends.append(("numba", numba_backend))
    else:
        print("numba backend unavailable; timing numpy only")

    print(f"{'kernel':<16}" + "".join(f"{name + ' (us)':>14}" for name, _ in backends)
          + ("{:>10}".format("speedup") if len(backends) == 2 else ""))
    for name, call_args in workloads.items():
        row = f"{name:<16}"
        times = []
        for _, backend in backends:
            best = _time_call(getattr(backend, name), call_args, args.repeats)
            times.append(best)
            row += f"{best * 1e6:>14.1f}"
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
