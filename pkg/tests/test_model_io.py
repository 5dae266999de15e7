import numpy as np
import pytest

from binfm.binarized import BinFmOvrModel, train_ovr
from binfm.datasets import Dataset, Sample
from binfm.encoding import EncodedDataset, encode_dataset, fit_bins
from binfm.fm import FmModel, FmOvrModel, fm_train_ovr
from binfm.model_io import (
    LoadedModel,
    load_model,
    predicted_labels,
    prepare_inputs,
    save_binarized,
    save_float,
    score_matrix,
)
from binfm.packing import ModelFormatError


def _blob_dataset(classes=3, per_class=30, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-2, 2, size=(classes, 2))
    pts = np.vstack([rng.normal(c, 0.2, size=(per_class, 2)) for c in centers])
    labels = np.repeat(np.arange(classes), per_class)
    idx = np.arange(2, dtype=np.int64)
    samples = tuple(
        Sample(idx, row.astype(np.float64), int(y)) for row, y in zip(pts, labels)
    )
    return Dataset(samples, dim=2, classes=classes)


class TestFloatFormat:
    def test_raw_fm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        model = FmModel(w=rng.normal(size=5), V=rng.normal(size=(5, 3)))
        path = tmp_path / "m.ffm"
        save_float(path, FmOvrModel(heads=[model], classes=2), None)
        loaded = load_model(path)
        assert loaded.kind == "fm"
        assert loaded.binning is None
        np.testing.assert_array_equal(loaded.heads[0].w, model.w)
        np.testing.assert_array_equal(loaded.heads[0].V, model.V)

    def test_sefm_roundtrip(self, tmp_path):
        ds = _blob_dataset(classes=2)
        spec = fit_bins(ds, 4)
        rng = np.random.default_rng(2)
        model = FmModel(w=rng.normal(size=8), V=rng.normal(size=(8, 2)))
        path = tmp_path / "m.ffm"
        save_float(path, FmOvrModel(heads=[model], classes=2), spec)
        loaded = load_model(path)
        assert loaded.kind == "sefm"
        np.testing.assert_array_equal(loaded.binning.boundaries, spec.boundaries)
        assert loaded.binning.strategy == spec.strategy

    def test_truncation_rejected(self, tmp_path):
        rng = np.random.default_rng(3)
        model = FmModel(w=rng.normal(size=4), V=rng.normal(size=(4, 2)))
        path = tmp_path / "m.ffm"
        save_float(path, FmOvrModel(heads=[model], classes=2), None)
        blob = path.read_bytes()
        bad = tmp_path / "bad.ffm"
        bad.write_bytes(blob[:-5])
        with pytest.raises(ModelFormatError, match="truncated"):
            load_model(bad)

    def test_unknown_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"WHAT" + b"\x00" * 50)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)


class TestMulticlassContainers:
    def test_binarized_three_class_roundtrip(self, tmp_path):
        ds = _blob_dataset(classes=3, seed=4)
        spec = fit_bins(ds, 5)
        enc = encode_dataset(spec, ds)
        ovr = train_ovr(enc, rank=2, epochs=2, seed=4)
        path = tmp_path / "m.bfm"
        save_binarized(path, ovr, spec)
        loaded = load_model(path)
        assert loaded.kind == "binfm"
        assert loaded.classes == 3
        assert len(loaded.heads) == 3
        for head, trained in zip(loaded.heads, ovr.heads):
            assert head.alpha == trained.alpha
            assert head.beta == trained.beta

    def test_float_three_class_roundtrip(self, tmp_path):
        ds = _blob_dataset(classes=3, seed=5)
        spec = fit_bins(ds, 5)
        enc = encode_dataset(spec, ds)
        ovr = fm_train_ovr(enc, rank=2, epochs=2, seed=5)
        path = tmp_path / "m.ffm"
        save_float(path, ovr, spec)
        loaded = load_model(path)
        assert loaded.kind == "sefm"
        assert len(loaded.heads) == 3

    def test_scores_roundtrip_exactly(self, tmp_path):
        ds = _blob_dataset(classes=3, seed=6)
        spec = fit_bins(ds, 5)
        enc = encode_dataset(spec, ds)
        ovr = train_ovr(enc, rank=2, epochs=2, seed=6)
        path = tmp_path / "m.bfm"
        save_binarized(path, ovr, spec)
        loaded = load_model(path)
        from binfm.binarized import ovr_decision_matrix

        in_memory = ovr_decision_matrix(ovr, enc)
        from_file = score_matrix(loaded, prepare_inputs(loaded, ds))
        np.testing.assert_allclose(from_file, in_memory, rtol=1e-12)


class TestPrediction:
    def test_dim_mismatch(self, tmp_path):
        ds = _blob_dataset(classes=2, seed=7)
        spec = fit_bins(ds, 4)
        enc = encode_dataset(spec, ds)
        ovr = train_ovr(enc, rank=2, epochs=1, seed=7)
        path = tmp_path / "m.bfm"
        save_binarized(path, ovr, spec)
        loaded = load_model(path)
        idx = np.arange(3, dtype=np.int64)
        wrong = Dataset(
            (Sample(idx, np.zeros(3), 0), Sample(idx, np.ones(3), 1)),
            dim=3,
            classes=2,
        )
        with pytest.raises(ModelFormatError, match="features"):
            prepare_inputs(loaded, wrong)

    def test_predicted_labels_binary_rule(self):
        scores = np.array([[0.5], [-0.5], [0.0]])
        np.testing.assert_array_equal(predicted_labels(scores, 2), [1, 0, 0])

    def test_predicted_labels_argmax_tie(self):
        scores = np.array([[1.0, 1.0, 0.5], [0.2, 0.9, 0.9]])
        np.testing.assert_array_equal(predicted_labels(scores, 3), [0, 1])
