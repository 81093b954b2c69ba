"""Smoke test for the pyunfoldcp extension.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, or
`cargo build --release -p unfoldcp-py --features extension-module` and put
the resulting library on PYTHONPATH as `pyunfoldcp.so`.
"""

import math

import pyunfoldcp as cp


def main():
    ds = cp.Dataset.generate("two-block", seed=3)
    assert (ds.n, ds.num_times, ds.num_classes) == (200, 2, 2)
    rows, nnz, symmetric = ds.representation("unfolded")
    assert rows == 200 + 2 * 200 and symmetric
    assert all(w == 1.0 for _, _, w in ds.snapshot(0))

    scores = cp.label_scores([0.7, 0.2, 0.1])
    assert [round(s, 12) for s in scores] == [0.7, 0.9, 1.0]

    cal = [i / 100 for i in range(99)]
    q = cp.calibrate(cal, 0.1)
    assert math.isclose(q, 0.89)
    assert cp.prediction_set([0.1, 0.95, 0.5], q) == [0, 2]
    assert cp.full_conformal_split(cal, [0.1, 0.95, 0.5], 0.1) == [0, 2]

    stat, p = cp.energy_test([[0.0], [1.0]], [[0.0], [1.0]], permutations=9)
    assert stat == 0.0 and p == 1.0

    report = ds.run("unfolded", "gcn", "transductive", n_fits=1, n_permutations=5, seed=1)
    cov, _ = report["coverage"]
    assert 0.0 <= cov <= 1.0 and report["instances"][0] == 5

    assert "[regime]" in cp.load_config("sbm_ugcn_trans")
    print("pyunfoldcp", cp.__version__, "ok: coverage", round(cov, 3))


if __name__ == "__main__":
    main()
