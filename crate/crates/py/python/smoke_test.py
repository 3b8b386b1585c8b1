"""Smoke test for the forcesense extension module.

Build and install first, e.g. `maturin develop --release` from crates/py,
then run `python python/smoke_test.py` or `pytest python/`.
"""

import json
import math
import os
import tempfile

import forcesense as fs

SMALL = {
    "freespace": {"duration_s": 120.0},
    "contact": {"duration_s": 30.0},
    "predictor": {"hidden_dim": 4, "window_len": 8, "max_epochs": 2, "windows_per_epoch": 200},
}


def test_config_is_strict():
    cfg = fs.Config(json.dumps(SMALL))
    assert len(cfg.fingerprint()) == 64
    assert json.loads(cfg.to_json())["predictor"]["hidden_dim"] == 4
    try:
        fs.Config('{"sead": 1}')
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")


def test_estimator_round_trip():
    chain = fs.Chain.reference()
    q = [0.1, -0.2, 0.15, 0.3, -0.1, 0.2]
    j = chain.jacobian(q)
    f = [1.0, -2.0, 3.0, 0.01, 0.02, -0.03]
    tau = [sum(j[r][c] * f[r] for r in range(6)) for c in range(6)]
    est = fs.estimate_wrench(j, tau, [0.0] * 6, policy="exact")
    assert all(math.isclose(a, b, abs_tol=1e-9) for a, b in zip(est["wrench"], f))
    assert est["solve"] == "exact"


def test_pipeline():
    cfg = fs.Config(json.dumps(SMALL))
    free, contact = fs.generate_data(cfg, "si")
    assert len(free) == 12000 and len(contact) == 3000
    assert free.profile == "si"
    assert contact.contact_wrench()[0] is not None

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "free.csv")
        free.save_csv(path)
        assert fs.Dataset.load_csv(path).tau_measured() == free.tau_measured()

        model = fs.train(cfg, free)
        pred = model.predict(contact)
        assert pred[0] is None and pred[-1] is not None
        model.save(os.path.join(d, "model.json"))
        again = fs.Model.load(os.path.join(d, "model.json"))
        assert again.predict(contact) == pred

    bias = fs.Baseline.fit("bias", cfg, free)
    assert len(bias.bias) == 6
    vs = fs.Baseline.fit("vector_search", cfg, free)
    assert len(vs.predict(contact)) == len(contact)


def test_benchmark_report():
    cfg = fs.Config(json.dumps(SMALL))
    report = fs.benchmark(cfg, "classic")
    methods = [m["method"] for m in report["methods"]]
    assert methods == ["measure_only", "bias", "vector_search", "nn"]
    for m in report["methods"]:
        axes = [a["rmse"] for a in m["axes"]]
        assert abs(sum(axes) / 3 - m["average_rmse"]) < 1e-12
    assert "Fx" in fs.table([report])


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
