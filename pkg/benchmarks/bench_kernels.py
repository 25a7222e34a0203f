"""Time the numba and numpy kernels side by side on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both backends live in the same module, so one process can time both; the
GRAPECOUNT_DISABLE_NUMBA flag only changes which one the library calls.
"""

import argparse
import time

import numpy as np

from grapecount import _kernels
from grapecount._accel import HAVE_NUMBA
from grapecount.geometry import CameraIntrinsics, RigidTransform


def registration_inputs(rng):
    k = CameraIntrinsics.kinect()
    depth = rng.uniform(0.5, 9.0, (k.height, k.width))
    depth[rng.random(depth.shape) < 0.1] = 0.0
    t = RigidTransform.from_axis_angle([0, 1, 0], 0.01, [0.025, 0.0, 0.0])
    return depth, k.as_array(), k.as_array(), k.width, k.height, t.matrix, t.translation


def disc_inputs(rng, n=60):
    k = CameraIntrinsics.kinect()
    zs = rng.uniform(1.0, 4.0, n)
    return (rng.uniform(0, k.width, n), rng.uniform(0, k.height, n), 52.5 / zs, zs, np.arange(n, dtype=np.int64)), k


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    reg = registration_inputs(rng)
    (us, vs, radii, zs, ids), k = disc_inputs(rng)

    def paint(kernel):
        def run():
            zbuf = np.full((k.height, k.width), 10.0)
            label = np.full((k.height, k.width), -1, dtype=np.int64)
            kernel(zbuf, label, us, vs, radii, zs, ids)
            return zbuf, label
        return run

    cases = {
        "register_depth 640x480": {
            "numpy": lambda: _kernels.register_depth_numpy(*reg),
            "numba": lambda: _kernels.register_depth_numba(*reg),
        },
        "paint_discs 60 discs": {"numpy": paint(_kernels.paint_discs_numpy), "numba": paint(_kernels.paint_discs_numba)},
    }
    print(f"numba available: {HAVE_NUMBA}")
    print(f"{'kernel':<24}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}  identical")
    for name, fns in cases.items():
        a, b = fns["numpy"](), fns["numba"]()
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        t_np = best_of(fns["numpy"], args.repeat) * 1e3
        t_nb = best_of(fns["numba"], args.repeat) * 1e3
        print(f"{name:<24}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
