"""Smoke test for the turbo_rei_py extension module."""

import math

import turbo_rei_py as tr


def main():
    bench = tr.Benchmark("ackley", 2)
    assert bench.dim == 2
    lo, hi = bench.bounds
    assert lo == [-5.0, -5.0] and hi == [10.0, 10.0]
    # raw zero sits at unit coordinate 1/3
    assert abs(bench([1 / 3, 1 / 3])) < 1e-9

    assert abs(tr.ei(0.0, 1.0, 0.0) - 1 / math.sqrt(2 * math.pi)) < 1e-12
    assert abs(math.exp(tr.log_ei(0.3, 0.5, 0.0)) - tr.ei(0.3, 0.5, 0.0)) < 1e-12
    assert tr.log_ei(40.0, 1.0, 0.0) < -800.0

    xs = [[i / 9] for i in range(10)]
    ys = [math.sin(6 * x[0]) for x in xs]
    gp = tr.GaussianProcess(xs, ys, seed=1)
    mean, var = gp.predict(xs)
    assert max(abs(m - y) for m, y in zip(mean, ys)) < 0.05
    assert all(v >= 0 for v in var)
    assert len(gp.lengthscales) == 1
    ei = gp.expected_improvement([[0.5], [0.8]])
    assert all(v >= 0 for v in ei)
    q = gp.regional([0.8], [0.2], kind="qrei")
    r = gp.regional([0.8], [0.2], kind="rei")
    assert q >= 0 and r >= 0

    records = tr.run("levy", 3, method="turbo1-logei", budget=25, n_init=10, seed=3)
    assert len(records) == 25
    assert [r["eval_index"] for r in records] == list(range(1, 26))
    best = [r["best_f"] for r in records]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert all(r["event"] == "init" for r in records[:10])

    stat, p = tr.wilcoxon_signed_rank(list(range(11)), [v + 1.0 + 0.1 * v for v in range(11)])
    assert stat == 0.0 and abs(p - 2 / 2048) < 1e-15
    _, p = tr.wilcoxon_rank_sum([1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0])
    assert abs(p - 2 / 70) < 1e-15

    try:
        tr.Benchmark("nope", 2)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown benchmark accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
