#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Exercises the three hot paths: default-policy rollouts, planner node
expansion, and formula evaluation over bitmask traces, plus one end-to-end
plan search per backend. Run from the repo root:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from handover._kernel import ATOM_BIT, available_backends, pybackend
from handover.road import Obstacle, Road, Segment, SegmentTag
from handover.tql import compile_formula, default_catalog
from handover.world import SimParams

ROAD = Road((
    Segment(900.0, 2, 36.0),
    Segment(900.0, 2, 36.0, tags=frozenset({SegmentTag.FOG})),
    Segment(600.0, 2, 36.0, obstacles=(Obstacle(0, 100.0), Obstacle(1, 160.0))),
))
P = SimParams(cruise_speed=36.0)


def backends():
    out = [("python", pybackend)]
    if "native" in available_backends():
        from handover._kernel import _native
        out.append(("native", _native))
    return out


def bench(label: str, fn, n: int) -> float:
    fn()   # warm up
    start = time.perf_counter()
    for _ in range(n):
        fn()
    elapsed = time.perf_counter() - start
    rate = n / elapsed
    print(f"  {label:<28} {rate:>12,.0f} ops/s   ({elapsed / n * 1e6:8.2f} us/op)")
    return rate


def main() -> None:
    pack = ROAD.pack
    programs = [compile_formula(e.formula, ATOM_BIT)
                for e in default_catalog().entries]
    rng = np.random.default_rng(7)
    trace_bits = rng.integers(0, 1 << len(ATOM_BIT), size=31, dtype=np.int64)

    rates: dict[str, dict[str, float]] = {}
    for name, impl in backends():
        print(f"backend: {name}")
        rates[name] = {}
        rates[name]["rollout(30)"] = bench(
            "rollout, horizon 30",
            lambda: impl.rollout_kernel(pack, 0.0, 0, 36.0, 1.0, 30, P.dt,
                                        P.a_max, P.v_max, P.cruise_speed,
                                        P.high_speed_threshold,
                                        P.obstacle_horizon),
            2_000)
        rates[name]["expand"] = bench(
            "planner node expansion",
            lambda: impl.expand_kernel(pack, 850.0, 0, 30.0, 1.0, P.dt, P.a_max,
                                       P.v_max, P.cruise_speed,
                                       P.high_speed_threshold,
                                       P.obstacle_horizon),
            20_000)
        rates[name]["eval"] = bench(
            "catalog eval on 31-state trace",
            lambda: [impl.eval_kernel(pr.op, pr.arg, pr.left, pr.right, pr.root,
                                      trace_bits, 0) for pr in programs],
            20_000)

    if len(rates) == 2:
        print("speedup (native / python):")
        for key in rates["python"]:
            print(f"  {key:<28} {rates['native'][key] / rates['python'][key]:6.1f}x")

    # End-to-end: one plan search per backend via the environment switch.
    import subprocess
    import sys
    snippet = (
        "import time\n"
        "from handover.planner import find_safe_plan\n"
        "from handover.road import Obstacle, Road, Segment\n"
        "from handover.tql import default_catalog\n"
        "from handover.world import SimParams, WorldState\n"
        "road = Road((Segment(2000.0, 2, 33.0,\n"
        "    obstacles=(Obstacle(0, 700.0), Obstacle(1, 760.0))),))\n"
        "t0 = time.perf_counter()\n"
        "out = find_safe_plan(WorldState(300.0, 0, 30.0), road,\n"
        "    SimParams(cruise_speed=30.0), 30, default_catalog())\n"
        "print(f'  find_safe_plan(horizon 30): "
        "{time.perf_counter() - t0:.3f} s ({type(out).__name__})')\n")
    for name, _ in backends():
        print(f"end-to-end with HANDOVER_KERNEL={name}")
        subprocess.run([sys.executable, "-c", snippet],
                       env={"HANDOVER_KERNEL": name, "PATH": "/usr/bin:/bin"},
                       check=True)


if __name__ == "__main__":
    main()
