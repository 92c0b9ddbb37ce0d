"""Benchmark the compiled kernels against the NumPy fallback.

Runs each hot kernel on representative shapes with both backends loaded
side by side, verifies they agree, and prints median wall times plus the
speedup. Usage:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from shelltriage.kernels import _numpy

try:
    from shelltriage import _native
except ImportError:
    _native = None


def _time(fn, repeats: int) -> float:
    # one warmup, then median of wall times in milliseconds
    fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(samples)


def _row(name: str, native_ms: float | None, numpy_ms: float) -> None:
    if native_ms is None:
        print(f"{name:<38} {'-':>12} {numpy_ms:>12.3f} {'-':>9}")
        return
    speedup = numpy_ms / native_ms if native_ms > 0 else float("inf")
    print(f"{name:<38} {native_ms:>12.3f} {numpy_ms:>12.3f} {speedup:>8.1f}x")


def bench_resize(rng: np.random.Generator, repeats: int) -> None:
    for shape in ((640, 480), (1024, 768), (3000, 2000)):
        src = rng.integers(0, 256, size=(*shape, 3), dtype=np.uint8)
        if _native is not None:
            got = np.asarray(_native.resize_bilinear_u8(src, 224, 224))
            want = np.asarray(_numpy.resize_bilinear_u8(src, 224, 224))
            assert np.array_equal(got, want), f"resize mismatch at {shape}"
        _row(
            f"resize {shape[0]}x{shape[1]} -> 224",
            None
            if _native is None
            else _time(lambda: _native.resize_bilinear_u8(src, 224, 224), repeats),
            _time(lambda: _numpy.resize_bilinear_u8(src, 224, 224), repeats),
        )


def bench_grid_features(rng: np.random.Generator, repeats: int) -> None:
    img = rng.integers(0, 256, size=(224, 224, 3), dtype=np.uint8)
    if _native is not None:
        got = np.asarray(_native.grid_features_u8(img, 16))
        want = np.asarray(_numpy.grid_features_u8(img, 16))
        assert np.array_equal(got, want), "grid features mismatch"
    _row(
        "grid features 224x224, 16x16 cells",
        None if _native is None else _time(lambda: _native.grid_features_u8(img, 16), repeats),
        _time(lambda: _numpy.grid_features_u8(img, 16), repeats),
    )


def bench_cosine(rng: np.random.Generator, repeats: int) -> None:
    for n in (1_000, 19_058):
        mat = rng.normal(size=(n, 1000))
        norms = np.linalg.norm(mat, axis=1)
        query = rng.normal(size=1000)
        qnorm = float(np.linalg.norm(query))
        if _native is not None:
            got = np.asarray(_native.cosine_scores(mat, norms, query, qnorm))
            want = np.asarray(_numpy.cosine_scores(mat, norms, query, qnorm))
            assert np.allclose(got, want, atol=1e-12), f"cosine mismatch at n={n}"
        _row(
            f"cosine scores {n}x1000",
            None
            if _native is None
            else _time(lambda: _native.cosine_scores(mat, norms, query, qnorm), repeats),
            _time(lambda: _numpy.cosine_scores(mat, norms, query, qnorm), repeats),
        )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=9, help="samples per kernel")
    args = parser.parse_args()

    if _native is None:
        print("compiled extension not importable; timing the NumPy fallback only\n")
    print(f"{'kernel':<38} {'native ms':>12} {'numpy ms':>12} {'speedup':>9}")
    print("-" * 73)
    rng = np.random.default_rng(0)
    bench_resize(rng, args.repeats)
    bench_grid_features(rng, args.repeats)
    bench_cosine(rng, args.repeats)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
