"""The deployable artifact: one bit per coefficient, scored with popcount.

Packing keeps only the coefficient signs (bit 1 means +1), the two scale
factors, and the bin boundaries. A sum of +/-1 weights over a sample's d
active bins collapses to 2 * popcount(mask AND bits) - d, so inference does
word-wide ANDs and popcounts instead of float multiply-adds.
"""

import time

import numpy as np

from binfm import fit_bins, encode_dataset, gen_moons, pack, split, train
from binfm.binarized import binfm_predict
from binfm.packing import (
    active_mask,
    active_masks_batch,
    load,
    popcount_predict,
    popcount_predict_batch,
    save,
)

ds = gen_moons(n=4000, noise=0.05, seed=1)
train_ds, test_ds = split(ds, 0.7, seed=1)
spec = fit_bins(train_ds, 30)
enc_train = encode_dataset(spec, train_ds)
enc_test = encode_dataset(spec, test_ds)

model = train(enc_train, rank=16, seed=1)
packed = pack(model, spec)
print(f"packed model: p={packed.n_params}, rank={packed.rank}")
print(f"sign payload: {packed.sign_payload_bits()} bits "
      f"(= p * (1 + rank) = {packed.n_params} * {1 + packed.rank})")

# the bit path reproduces the float path exactly
z = enc_test.sample(0)
mask = active_mask(z.active, packed.n_params)
float_score = binfm_predict(model, z)
bit_score = popcount_predict(packed, mask)
print(f"\nsample 0: float path {float_score:.12f}")
print(f"          bit path   {bit_score:.12f}")
assert abs(float_score - bit_score) < 1e-9

masks = active_masks_batch(enc_test.active, packed.n_params)
t0 = time.perf_counter()
scores = popcount_predict_batch(packed, masks)
dt = time.perf_counter() - t0
acc = ((scores > 0).astype(int) == enc_test.labels).mean()
print(f"\nscored {len(masks)} samples in {dt * 1e3:.2f} ms "
      f"({dt / len(masks) * 1e6:.2f} us/sample), accuracy {acc:.4f}")

path = "/tmp/moons_model.bfm"
save(packed, path)
reloaded = load(path)
assert (reloaded.w_bits == packed.w_bits).all()
assert (reloaded.v_bits == packed.v_bits).all()
print(f"\nwrote and reloaded {path} bit-exactly "
      f"({len(open(path, 'rb').read())} bytes on disk)")
