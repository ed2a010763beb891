"""Compare the numba kernels against the plain Python/numpy fallback.

    python benchmarks/bench_kernels.py [--symbols N] [--repeat R]

The fallback timings come from a child process started with
``LVC_DISABLE_JIT=1``, so every kernel (range coder helpers included) runs
uncompiled there. Both processes digest their outputs; the digests must match.
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def run(symbols, repeat):
    from lvc.kernels import rangecoder as rc
    from lvc.kernels.texture import texture_energy
    from lvc.kernels.warp import warp_array

    rng = np.random.default_rng(0)
    mu = rng.normal(scale=3, size=symbols)
    sigma = rng.uniform(0.11, 6, size=symbols)
    sym = np.round(mu + sigma * rng.normal(size=symbols)).astype(np.int64)
    out = np.zeros(8 * symbols + 1024, dtype=np.uint8)
    dec = np.zeros(symbols, dtype=np.int64)
    luma = rng.uniform(0, 255, size=(1088, 1920))
    src = rng.uniform(size=(16, 256, 256))
    flow = rng.normal(scale=4, size=(256, 256, 2))

    size = rc.gaussian_encode_kernel(sym, mu, sigma, out)
    coded = out[:size].copy()
    rc.gaussian_decode_kernel(coded, mu, sigma, dec)
    assert np.array_equal(dec, sym)
    digest = hashlib.sha256(coded.tobytes())
    digest.update(np.round(texture_energy(luma), 6).tobytes())
    digest.update(np.round(warp_array(src, flow), 9).tobytes())

    timings = {
        "range encode": (symbols, best_of(lambda: rc.gaussian_encode_kernel(sym, mu, sigma, out), repeat)),
        "range decode": (symbols, best_of(lambda: rc.gaussian_decode_kernel(coded, mu, sigma, dec), repeat)),
        "texture energy 1920x1088": (luma.size, best_of(lambda: texture_energy(luma), repeat)),
        "warp 16x256x256": (src.size, best_of(lambda: warp_array(src, flow), repeat)),
    }
    return {"digest": digest.hexdigest(), "timings": timings}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--symbols", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(run(args.symbols, args.repeat)))
        return

    from lvc._jit import JIT_ENABLED

    if not JIT_ENABLED:
        raise SystemExit("JIT is disabled (LVC_DISABLE_JIT); nothing to compare")
    jit = run(args.symbols, args.repeat)
    env = dict(os.environ, LVC_DISABLE_JIT="1")
    child = subprocess.run([sys.executable, __file__, "--child", "--symbols", str(args.symbols),
                            "--repeat", "1"], env=env, check=True, capture_output=True, text=True)
    fallback = json.loads(child.stdout)
    if fallback["digest"] != jit["digest"]:
        raise SystemExit("numba and fallback outputs differ")

    print(f"{'kernel':28s} {'items':>9s} {'numba s':>10s} {'fallback s':>11s} {'speed-up':>9s}")
    for name, (items, t_jit) in jit["timings"].items():
        t_py = fallback["timings"][name][1]
        print(f"{name:28s} {items:9d} {t_jit:10.4f} {t_py:11.4f} {t_py / t_jit:8.1f}x")
    print("outputs identical on both paths")


if __name__ == "__main__":
    main()
