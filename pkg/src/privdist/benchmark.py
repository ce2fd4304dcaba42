"""Throughput benchmark of the sampling kernels: compiled versus pure numpy.

Run with ``python -m privdist.benchmark [--draws N]``. Both backends consume
identical uniform streams, so outputs are also checked for equality.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import _kernels_py, backend
from ._rng import as_generator
from .dist_core import Pmf


def _time_backend(impl, accept, alias, u_cell, u_acc, repeats: int = 3) -> tuple[float, np.ndarray]:
    best = float("inf")
    out = None
    for _ in range(repeats):
        start = time.perf_counter()
        out = impl(accept, alias, u_cell, u_acc)
        best = min(best, time.perf_counter() - start)
    return best, out


def run(draws: int = 5_000_000, domain: int = 1000, seed: int = 0) -> list[dict]:
    rng = as_generator(seed)
    weights = rng.random(domain) + 0.01
    pmf = Pmf.renormalized(weights)
    accept, alias = pmf._alias_table
    u_cell = rng.random(draws)
    u_acc = rng.random(draws)

    impls = {"python": _kernels_py.alias_pick}
    try:
        from . import _kernels

        impls["compiled"] = _kernels.alias_pick
    except ImportError:
        pass

    rows = []
    outputs = {}
    for name, impl in impls.items():
        elapsed, out = _time_backend(impl, accept, alias, u_cell, u_acc)
        outputs[name] = out
        rows.append(
            {
                "backend": name,
                "draws": draws,
                "seconds": elapsed,
                "draws_per_sec": draws / elapsed,
            }
        )
    if len(outputs) == 2:
        match = bool(np.array_equal(outputs["python"], outputs["compiled"]))
        for row in rows:
            row["bit_identical"] = match
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--draws", type=int, default=5_000_000)
    parser.add_argument("--domain", type=int, default=1000)
    args = parser.parse_args(argv)
    rows = run(args.draws, args.domain)
    print(f"active backend: {backend.BACKEND}")
    for row in rows:
        line = (
            f"{row['backend']:>9}: {row['seconds']*1e3:8.1f} ms "
            f"({row['draws_per_sec']/1e6:7.1f} M draws/s)"
        )
        if "bit_identical" in row:
            line += f"  bit_identical={row['bit_identical']}"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
