"""Time each numba kernel against its numpy counterpart.

    python3 benchmarks/bench_kernels.py --repeat 20

Both implementations are imported directly, so ``MEMCLASS_NUMBA`` does not
matter here. Outputs are also checked for equality.
"""
import argparse
import time

import numpy as np

from memclass import kernels as K
from memclass.synth import ColorDatasetSpec, CorruptionSpec, corrupt, generate_color_dataset


def best_of(fn, repeat):
    fn()  # warm-up (compiles numba on first call)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(size, seed):
    train, _ = generate_color_dataset(ColorDatasetSpec(L=size, w=max(2, size // 10), n_train=1, n_test=1, seed=seed))
    clean = train.images[0].pixels
    noisy = corrupt(train.images[0], CorruptionSpec("gaussian_noise", 3, seed)).pixels
    codes = K.quantize_codes(noisy, 64)
    labels = K.label_components(codes)
    rng = np.random.default_rng(seed)
    n = 400
    sim = rng.random((n, n))
    members = np.arange(5)
    nonmembers = np.arange(5, n)
    positions = rng.integers(0, 5, 2000)
    picks = rng.integers(0, n - 5, 2000)
    return [
        ("quantize (noisy)", lambda: K.quantize_codes_numba(noisy, 64, 4), lambda: K.quantize_codes_numpy(noisy, 64, 4)),
        ("label (clean)", lambda: K.label_components_numba(K.quantize_codes(clean, 64)),
         lambda: K.label_components_numpy(K.quantize_codes(clean, 64))),
        ("label (noisy)", lambda: K.label_components_numba(codes), lambda: K.label_components_numpy(codes)),
        ("region stats", lambda: K.region_stats_numba(labels, noisy, int(labels.max()) + 1),
         lambda: K.region_stats_numpy(labels, noisy, int(labels.max()) + 1)),
        ("rgb -> hsv", lambda: K.rgb_to_hsv_image_numba(noisy), lambda: K.rgb_to_hsv_image_numpy(noisy)),
        ("local search n=400", lambda: K.local_search_numba(sim, members, nonmembers, positions, picks),
         lambda: K.local_search_numpy(lambda i: sim[i], members, nonmembers, positions, picks)),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=0, atol=1e-9)
    return a == b or np.isclose(a, b, rtol=0, atol=1e-9)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=500, help="image side")
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'kernel':<22}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  equal")
    for name, fast, slow in cases(args.size, args.seed):
        tf = best_of(fast, args.repeat)
        ts = best_of(slow, args.repeat)
        print(f"{name:<22}{tf * 1e3:>10.3f}{ts * 1e3:>10.3f}{ts / tf:>8.1f}x  {same(fast(), slow())}")


if __name__ == "__main__":
    main()
