"""Binarized factorization machines.

Train nonlinear classifiers by one-hot binning every input feature, then
constraining all model coefficients to +/-1 (one bit each) learned through
straight-through proxy gradients with per-coordinate adaptive steps. The
deployable artifact is a bit-packed model scored with mask-AND + popcount.
"""

from .binarized import (
    AdagradState,
    BinFmModel,
    BinFmOvrModel,
    adagrad_update,
    binfm_predict,
    quantize_sign,
    refresh_scaling,
    ste_grad_v,
    ste_grad_w,
    train,
    train_ovr,
)
from .datasets import (
    DataError,
    Dataset,
    Sample,
    gen_circles,
    gen_moons,
    load_libsvm,
    save_libsvm,
    split,
)
from .encoding import (
    BinningSpec,
    EncodedDataset,
    EncodedSample,
    encode,
    encode_dataset,
    fit_bins,
    sparsity_report,
)
from .fm import (
    FmModel,
    FmOvrModel,
    TrainingDivergedError,
    TrainingHistory,
    fm_predict,
    fm_sgd_step,
    fm_train,
    fm_train_ovr,
    loss_and_dloss,
)
from .packing import (
    MemoryCost,
    ModelFormatError,
    PackedModel,
    active_mask,
    memory_report,
    pack,
    popcount_predict,
    unpack,
)

__version__ = "0.1.0"

__all__ = [
    "AdagradState",
    "BinFmModel",
    "BinFmOvrModel",
    "BinningSpec",
    "DataError",
    "Dataset",
    "EncodedDataset",
    "EncodedSample",
    "FmModel",
    "FmOvrModel",
    "MemoryCost",
    "ModelFormatError",
    "PackedModel",
    "Sample",
    "TrainingDivergedError",
    "TrainingHistory",
    "active_mask",
    "adagrad_update",
    "binfm_predict",
    "encode",
    "encode_dataset",
    "fit_bins",
    "fm_predict",
    "fm_sgd_step",
    "fm_train",
    "fm_train_ovr",
    "gen_circles",
    "gen_moons",
    "load_libsvm",
    "loss_and_dloss",
    "memory_report",
    "pack",
    "popcount_predict",
    "quantize_sign",
    "refresh_scaling",
    "save_libsvm",
    "split",
    "ste_grad_v",
    "ste_grad_w",
    "train",
    "train_ovr",
    "unpack",
]
