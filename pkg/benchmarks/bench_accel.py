"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_accel.py [--points 3600] [--repeat 20]

For an end-to-end comparison run the same config twice, once with
``DELTABO_NO_NUMBA=1``.
"""
import argparse
import timeit

import numpy as np

from deltabo import _accel


def bench(label, fn_np, fn_nb, repeat):
    fn_nb()  # compile outside the timer
    t_np = min(timeit.repeat(fn_np, number=1, repeat=repeat))
    t_nb = min(timeit.repeat(fn_nb, number=1, repeat=repeat))
    print(f"{label:<24}{t_np * 1e3:>10.3f}{t_nb * 1e3:>10.3f}{t_np / t_nb:>9.2f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=3600)
    ap.add_argument("--train", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    r = np.random.default_rng(0)
    m, n = args.points, args.train
    dom = r.uniform(-1, 1, (m, 2))
    train = r.uniform(-1, 1, (n, 2))
    v_rows = r.normal(size=(n, m))
    l_vec = r.normal(size=n)
    k_new = r.normal(size=m)
    mu_g, mu_d = r.normal(size=m), r.normal(size=m)
    var_g, var_d = r.uniform(0, 1, m), r.uniform(0, 1, m)

    print(f"m={m} domain points, n={n} training points; best of {args.repeat}, ms")
    print(f"{'operation':<24}{'numpy':>10}{'numba':>10}{'speedup':>10}")
    for name, code in (("se", _accel.SE), ("matern52", _accel.MATERN52)):
        bench(f"cross_kernel {name}",
              lambda: _accel.cross_kernel_np(code, 1.0, 0.7, train, dom),
              lambda: _accel.cross_kernel_nb(code, 1.0, 0.7, train, dom), args.repeat)
    bench("sym_kernel matern52 n",
          lambda: _accel.sym_kernel_np(_accel.MATERN52, 1.0, 0.7, train),
          lambda: _accel.sym_kernel_nb(_accel.MATERN52, 1.0, 0.7, train), args.repeat)

    def ext(fn):
        mean, var = mu_g.copy(), var_g.copy() + 5.0
        fn(k_new, l_vec, v_rows, 1.3, 0.2, mean, var)

    bench("extend_rows", lambda: ext(_accel.extend_rows_np), lambda: ext(_accel.extend_rows_nb), args.repeat)
    bench("delta_ucb_argmax",
          lambda: _accel.delta_ucb_argmax_np(mu_g, var_g, mu_d, var_d, 0.2),
          lambda: _accel.delta_ucb_argmax_nb(mu_g, var_g, mu_d, var_d, 0.2), args.repeat)


if __name__ == "__main__":
    main()
