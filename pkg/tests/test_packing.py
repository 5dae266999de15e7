import numpy as np
import pytest

from binfm.binarized import BinFmModel, binfm_predict, quantize_sign
from binfm.encoding import BinningSpec
from binfm.packing import (
    MAGIC,
    ModelFormatError,
    PackedModel,
    active_mask,
    active_masks_batch,
    dumps,
    load,
    loads,
    memory_report,
    pack,
    pack_signs,
    popcount,
    popcount_predict,
    popcount_predict_batch,
    save,
    unpack,
    unpack_signs,
)


def _spec(dim, bins, seed=0):
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.normal(size=(dim, bins - 1)), axis=1)
    return BinningSpec(dim=dim, bins=bins, boundaries=cuts, strategy="quantile")


def _model(rng, dim, bins, rank):
    p = dim * bins
    proxy_w = rng.uniform(-1, 1, size=p)
    proxy_V = rng.uniform(-1, 1, size=(p, rank))
    return BinFmModel(
        proxy_w=proxy_w,
        proxy_V=proxy_V,
        sign_w=quantize_sign(proxy_w),
        sign_V=quantize_sign(proxy_V),
        alpha=float(rng.uniform(0.1, 2)),
        beta=float(rng.uniform(0.1, 2)),
    )


def _packed(seed=0, dim=2, bins=5, rank=3):
    rng = np.random.default_rng(seed)
    return pack(_model(rng, dim, bins, rank), _spec(dim, bins, seed))


class TestBitPacking:
    def test_low_bits_order(self):
        words = pack_signs(np.array([1.0, -1.0, 1.0]))
        assert words[0] == 0b101

    def test_padding_bits_zero(self):
        words = pack_signs(np.ones(3))
        assert words[0] == 0b111  # bits 3..63 are zero

    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        for p in (1, 63, 64, 65, 130):
            signs = quantize_sign(rng.normal(size=p))
            np.testing.assert_array_equal(unpack_signs(pack_signs(signs), p), signs)

    def test_pack_unpack_model(self):
        rng = np.random.default_rng(2)
        model = _model(rng, 3, 4, 5)
        pm = pack(model, _spec(3, 4))
        sign_w, sign_V = unpack(pm)
        np.testing.assert_array_equal(sign_w, model.sign_w)
        np.testing.assert_array_equal(sign_V, model.sign_V)

    def test_payload_bits_exact(self):
        pm = _packed(dim=3, bins=7, rank=4)
        assert pm.sign_payload_bits() == 21 * (1 + 4)

    def test_pack_rejects_mismatched_spec(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            pack(_model(rng, 2, 5, 2), _spec(2, 4))


class TestActiveMask:
    def test_popcount_equals_active_count(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = int(rng.integers(2, 200))
            d = int(rng.integers(1, min(p, 9)))
            idx = np.sort(rng.choice(p, size=d, replace=False)).astype(np.int64)
            assert popcount(active_mask(idx, p)) == d

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            active_mask(np.array([70]), 64)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(5)
        active = np.stack(
            [np.sort(rng.choice(100, size=4, replace=False)) for _ in range(10)]
        ).astype(np.int64)
        batch = active_masks_batch(active, 100)
        for row, mask in zip(active, batch):
            np.testing.assert_array_equal(mask, active_mask(row, 100))


class TestPopcountPredict:
    def test_worked_example(self):
        # d=2, m=1, all +1 signs, unit scales: 2 + (4 - 2)/2 = 3
        rng = np.random.default_rng(6)
        model = _model(rng, 2, 3, 1)
        model.sign_w[:] = 1.0
        model.sign_V[:] = 1.0
        model.alpha = model.beta = 1.0
        pm = pack(model, _spec(2, 3))
        mask = active_mask(np.array([0, 4]), pm.n_params)
        assert popcount_predict(pm, mask) == pytest.approx(3.0)

    def test_all_plus_one_linear_term(self):
        rng = np.random.default_rng(7)
        model = _model(rng, 4, 8, 2)
        model.sign_w[:] = 1.0
        pm = pack(model, _spec(4, 8))
        active = np.array([0, 8, 16, 24])
        mask = active_mask(active, pm.n_params)
        sums = model.sign_V[active].sum(axis=0)
        expected_inter = 0.5 * model.beta**2 * float((sums**2 - 4).sum())
        assert popcount_predict(pm, mask) == pytest.approx(
            model.alpha * 4 + expected_inter
        )

    def test_matches_float_path(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            dim = int(rng.integers(1, 6))
            bins = int(rng.integers(2, 9))
            rank = int(rng.integers(1, 6))
            model = _model(rng, dim, bins, rank)
            pm = pack(model, _spec(dim, bins, seed=int(rng.integers(1e6))))
            active = (
                np.arange(dim) * bins + rng.integers(0, bins, size=dim)
            ).astype(np.int64)
            float_score = binfm_predict(model, active)
            bit_score = popcount_predict(pm, active_mask(active, pm.n_params))
            assert bit_score == pytest.approx(float_score, rel=1e-9, abs=1e-9)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        pm = _packed(seed=10, dim=3, bins=30, rank=4)
        active = np.stack(
            [np.arange(3) * 30 + rng.integers(0, 30, size=3) for _ in range(25)]
        ).astype(np.int64)
        masks = active_masks_batch(active, pm.n_params)
        batch = popcount_predict_batch(pm, masks)
        singles = [popcount_predict(pm, m) for m in masks]
        np.testing.assert_allclose(batch, singles, rtol=1e-12)

    def test_wrong_popcount_rejected(self):
        pm = _packed()
        mask = active_mask(np.array([0]), pm.n_params)  # d=2 model, 1 bit
        with pytest.raises(ValueError, match="active bits"):
            popcount_predict(pm, mask)


class TestSignSumIdentity:
    """2*popcount(mask & bits) - popcount(mask) == sum of masked signs."""

    def _oracle(self, mask_bits, sign_bits, p):
        total = 0
        for j in range(p):
            if mask_bits >> j & 1:
                total += 1 if sign_bits >> j & 1 else -1
        return total

    @pytest.mark.parametrize("p", [1, 3, 6])
    def test_exhaustive_pairs_small(self, p):
        for mask in range(1 << p):
            m = np.array([mask], dtype=np.uint64)
            d = popcount(m)
            for signs in range(1 << p):
                s = np.array([signs], dtype=np.uint64)
                got = 2 * popcount(m & s) - d
                assert got == self._oracle(mask, signs, p)

    def test_random_wide(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            p = int(rng.integers(1, 200))
            words = (p + 63) // 64
            mask = rng.integers(0, 2**63, size=words, dtype=np.uint64)
            sign = rng.integers(0, 2**63, size=words, dtype=np.uint64)
            mask[-1] &= np.uint64((1 << (p - 64 * (words - 1))) - 1)
            got = 2 * popcount(mask & sign) - popcount(mask)
            expected = sum(
                self._oracle(int(m), int(s), 64) for m, s in zip(mask, sign)
            )
            assert got == expected


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        pm = _packed(seed=12, dim=3, bins=11, rank=5)
        path = tmp_path / "model.bfm"
        save(pm, path)
        back = load(path)
        assert (back.dim, back.bins, back.rank) == (pm.dim, pm.bins, pm.rank)
        assert back.alpha == pm.alpha and back.beta == pm.beta
        np.testing.assert_array_equal(back.w_bits, pm.w_bits)
        np.testing.assert_array_equal(back.v_bits, pm.v_bits)
        np.testing.assert_array_equal(back.binning.boundaries, pm.binning.boundaries)
        assert back.binning.strategy == pm.binning.strategy
        # serialize-again must reproduce the exact bytes
        assert dumps(back) == path.read_bytes()

    def test_bad_magic(self):
        data = bytearray(dumps(_packed()))
        data[:4] = b"NOPE"
        with pytest.raises(ModelFormatError, match="magic"):
            loads(bytes(data))

    def test_bad_version(self):
        data = bytearray(dumps(_packed()))
        data[4:8] = (99).to_bytes(4, "little")
        with pytest.raises(ModelFormatError, match="version"):
            loads(bytes(data))

    def test_truncations(self):
        blob = dumps(_packed())
        for cut in (0, 3, 10, len(blob) // 2, len(blob) - 1):
            with pytest.raises(ModelFormatError, match="truncated"):
                loads(blob[:cut])

    def test_trailing_bytes(self):
        with pytest.raises(ModelFormatError, match="trailing"):
            loads(dumps(_packed()) + b"\x00")

    def test_dimension_inconsistency(self):
        data = bytearray(dumps(_packed(dim=2, bins=5)))
        # header field p (offset 8) no longer equals dim*bins
        data[8:16] = (11).to_bytes(8, "little")
        with pytest.raises(ModelFormatError, match="dimensions"):
            loads(bytes(data))

    def test_file_layout_size(self):
        pm = _packed(dim=3, bins=9, rank=4)
        blob = dumps(pm)
        words = (pm.n_params + 63) // 64
        header = 4 + 4 + 4 * 8 + 2 * 8
        spec_bytes = 4 + 8 * pm.dim * (pm.bins - 1)
        payload = 8 * (words + pm.rank * words)
        assert len(blob) == header + spec_bytes + payload
        assert blob[:4] == MAGIC


class TestMemoryReport:
    def test_table_formulas(self):
        report = memory_report(2, 30, 16)
        d, b, m = 2, 30, 16
        assert report["FM"].bits == 32 * (d + m * d)
        assert report["SEFM"].bits == 32 * (d * b + m * d * b)
        assert report["DFM"].bits == 32 * d + m * d
        assert report["Binarized FM"].bits == d * b + m * d * b

    def test_ratios(self):
        report = memory_report(2, 30, 16)
        assert report["Binarized FM"].ratio_vs_fm == pytest.approx(30 / 32)
        assert report["SEFM"].ratio_vs_fm == pytest.approx(30.0)
        assert report["FM"].ratio_vs_fm == 1.0

    def test_minimal_case(self):
        report = memory_report(1, 1, 1)
        assert report["FM"].bits == 64
        assert report["Binarized FM"].bits == 2

    def test_domain(self):
        with pytest.raises(ValueError):
            memory_report(0, 30, 16)
