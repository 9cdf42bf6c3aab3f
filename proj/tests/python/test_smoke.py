import numpy as np
import pytest

import infuse

SMALL = {
    "svm.c": "10",
    "svm.gamma": "0.05",
    "svm.cap": "300",
    "tree.max_features": "30",
    "forest.estimators": "5",
    "forest.max_features": "8",
    "ae1.widths": "24,16,12,10,8",
    "ae1.epochs": "4",
    "ae1.lr": "2e-3",
    "ae2.widths": "20,14,10,6",
    "ae2.epochs": "4",
    "ae2.lr": "2e-3",
    "meta.hidden": "16,8,8,4,4",
    "meta.lr": "0.05",
    "meta.epochs": "20",
    "svm_meta.cap": "200",
}


def test_metrics_identities():
    y = [1, 1, 1, 0, 0, 1, 0, 1]
    p = [1, 0, 1, 0, 1, 1, 0, 1]
    m = infuse.metrics(y, p, [0.9, 0.4, 0.8, 0.1, 0.6, 0.7, 0.2, 0.95])
    assert (m["tp"], m["tn"], m["fp"], m["fn"]) == (4, 2, 1, 1)
    assert m["recall"] + m["fnr"] == pytest.approx(1.0)
    assert m["f_score"] == pytest.approx(0.8)
    assert m["auc_roc"] == pytest.approx(infuse.roc_auc(y, [0.9, 0.4, 0.8, 0.1, 0.6, 0.7, 0.2, 0.95]))


def test_statistics():
    d, p = infuse.ks_two_sample([0.0, 1.0, 2.0], [10.0, 11.0, 12.0])
    assert d == 1.0
    assert 0.0 < p < 0.2
    r = infuse.mcnemar([1] * 10, [0] * 10, [1] * 10)
    assert (r["b"], r["c"]) == (10, 0)
    assert r["chi2"] == pytest.approx(10.0)


def test_config_errors_map_to_value_error():
    assert "seed = 42" in infuse.effective_config()
    assert "seed = 5" in infuse.effective_config({"seed": "5"})
    with pytest.raises(ValueError):
        infuse.effective_config({"no.such.key": "1"})
    with pytest.raises(ValueError):
        infuse.run("nonsense")


def test_pipeline_round_trip(tmp_path):
    paths = infuse.write_synthetic_dataset(tmp_path / "data", 500, 200, 100)
    settings = dict(SMALL)
    settings.update(
        train_path=str(paths["train"]),
        test_plus_path=str(paths["test_plus"]),
        test21_path=str(paths["test21"]),
        out=str(tmp_path / "out"),
    )
    for verb in ("preprocess", "train", "evaluate"):
        infuse.run(verb, settings)
    bundle = infuse.load_bundle(tmp_path / "out" / "bundle")
    x, y, attack = infuse.encode_file(paths["test_plus"], tmp_path / "out" / "bundle" / "schema.txt")
    assert x.shape == (200, bundle.input_width)
    p = bundle.predict(x)
    assert p.shape == (200,)
    assert np.all((p > 0) & (p < 1))
    z = bundle.pool(x)
    assert np.allclose(z[:, 0::2] + z[:, 1::2], 1.0)
    assert len(attack) == len(y) == 200

    csv = (tmp_path / "out" / "eval" / "test_plus" / "predictions.csv").read_text().splitlines()
    written = np.array([float(line.split(",")[3]) for line in csv[1:]])
    assert np.array_equal(written, p)


def test_missing_input_is_io_error(tmp_path):
    with pytest.raises(OSError):
        infuse.run("preprocess", {"train_path": str(tmp_path / "absent.txt"), "out": str(tmp_path / "o")})
