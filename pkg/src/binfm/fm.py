"""Full-precision degree-2 factorization machine.

Prediction uses the factorized identity, so scoring a sample with nnz active
features costs O(rank * nnz) instead of the O(nnz^2) pairwise sum. Trained on
one-hot encoded data this is the subspace-encoded FM baseline; trained on raw
features it is the plain FM baseline.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .datasets import Dataset, Sample
from .encoding import EncodedDataset, EncodedSample

LOSSES = ("logistic", "hinge", "squared")


class TrainingDivergedError(RuntimeError):
    """Raised when an epoch produces a non-finite training loss."""


@dataclasses.dataclass
class TrainingHistory:
    """Mean training loss before any update, then once per completed epoch."""

    initial_loss: float
    epoch_losses: list[float]


@dataclasses.dataclass
class FmModel:
    """Linear weights ``w`` (length p) and factor matrix ``V`` (p x rank)."""

    w: np.ndarray
    V: np.ndarray
    history: TrainingHistory | None = dataclasses.field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return len(self.w)

    @property
    def rank(self) -> int:
        return self.V.shape[1]


def loss_and_dloss(kind: str, y: float, f: float) -> tuple[float, float]:
    """Per-sample loss and its derivative w.r.t. the score, for y in {-1,+1}.

    The logistic branch is overflow-safe for any score magnitude.
    """
    if kind == "logistic":
        z = y * f
        if z >= 0:
            e = math.exp(-z)
            return math.log1p(e), -y * e / (1.0 + e)
        return -z + math.log1p(math.exp(z)), -y / (1.0 + math.exp(z))
    if kind == "hinge":
        z = y * f
        if z < 1.0:
            return 1.0 - z, -y
        return 0.0, 0.0
    if kind == "squared":
        r = f - y
        return 0.5 * r * r, r
    raise ValueError(f"loss must be one of {LOSSES}")


def _as_indices_values(sample) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(sample, Sample):
        return sample.indices, sample.values
    if isinstance(sample, EncodedSample):
        return sample.active, np.ones(len(sample.active))
    indices, values = sample
    return np.asarray(indices), np.asarray(values, dtype=np.float64)


def fm_predict(model: FmModel, sample) -> float:
    """Score one sparse sample via the factorized interaction identity.

    ``sample`` may be a Sample, an EncodedSample (implicit unit values), or an
    (indices, values) pair.
    """
    idx, vals = _as_indices_values(sample)
    linear = float(model.w[idx] @ vals)
    vx = model.V[idx] * vals[:, None]
    sums = vx.sum(axis=0)
    sums_sq = (vx * vx).sum(axis=0)
    return linear + 0.5 * float((sums * sums - sums_sq).sum())


def fm_predict_brute(model: FmModel, sample) -> float:
    """O(nnz^2) pairwise-sum oracle; reference for fm_predict."""
    idx, vals = _as_indices_values(sample)
    score = float(model.w[idx] @ vals)
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            inter = float(model.V[idx[a]] @ model.V[idx[b]])
            score += inter * vals[a] * vals[b]
    return score


def fm_sgd_step(
    model: FmModel,
    sample,
    y: float,
    eta: float,
    lam1: float = 0.0,
    lam2: float = 0.0,
    kind: str = "logistic",
) -> float:
    """One SGD update on the active coordinates, in place.

    The per-factor sums are cached before any coordinate moves. Returns the
    sample loss measured before the update.
    """
    idx, vals = _as_indices_values(sample)
    w_act = model.w[idx]
    vx = model.V[idx] * vals[:, None]
    sums = vx.sum(axis=0)
    score = float(w_act @ vals) + 0.5 * float((sums * sums - (vx * vx).sum(axis=0)).sum())
    loss, dldf = loss_and_dloss(kind, y, score)
    model.w[idx] = w_act - eta * (dldf * vals + lam1 * w_act)
    v_act = model.V[idx]
    grad_v = vals[:, None] * sums[None, :] - v_act * (vals * vals)[:, None]
    model.V[idx] = v_act - eta * (dldf * grad_v + lam2 * v_act)
    return loss


def decision_scores(model: FmModel, data) -> np.ndarray:
    """Vectorized scores for a Dataset or EncodedDataset."""
    if isinstance(data, EncodedDataset):
        active = data.active
        sums = model.V[active].sum(axis=1)
        sums_sq = (model.V**2)[active].sum(axis=1)
        linear = model.w[active].sum(axis=1)
    else:
        X = data.to_csr()
        sums = X @ model.V
        sums_sq = X.multiply(X) @ (model.V**2)
        linear = X @ model.w
    return linear + 0.5 * (sums**2 - sums_sq).sum(axis=1)


def _signed_labels(labels: np.ndarray, positive_class: int) -> np.ndarray:
    return np.where(labels == positive_class, 1.0, -1.0)


def _train_loop(samples, y_pm, model, eta, lam1, lam2, kind, epochs, tol, rng, score_all):
    n = len(y_pm)
    initial = float(
        np.mean([loss_and_dloss(kind, y_pm[i], s)[0] for i, s in enumerate(score_all(model))])
    )
    epoch_losses: list[float] = []
    for _ in range(epochs):
        total = 0.0
        for i in rng.permutation(n):
            total += fm_sgd_step(model, samples[i], y_pm[i], eta, lam1, lam2, kind)
        mean_loss = float(total / n)
        if not math.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"non-finite training loss {mean_loss} at epoch {len(epoch_losses) + 1}"
            )
        epoch_losses.append(mean_loss)
        if tol > 0 and len(epoch_losses) >= 2:
            prev, cur = epoch_losses[-2], epoch_losses[-1]
            if prev - cur < tol * abs(prev):
                break
    model.history = TrainingHistory(initial_loss=initial, epoch_losses=epoch_losses)
    return model


def fm_train(
    data,
    rank: int,
    eta: float = 0.05,
    lam1: float = 1e-4,
    lam2: float = 1e-4,
    kind: str = "logistic",
    epochs: int = 30,
    seed=0,
    tol: float = 1e-4,
    n_features: int | None = None,
    positive_class: int = 1,
) -> FmModel:
    """SGD-train a binary FM on a Dataset or EncodedDataset.

    ``w`` starts at zero; ``V`` at small seeded uniform values (zero factor
    init would keep every column identical forever). Samples are visited in a
    fresh seeded shuffle each epoch; training stops early once the relative
    loss improvement over an epoch falls below ``tol`` (0 disables).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if data.classes != 2:
        raise ValueError("fm_train handles binary data; use fm_train_ovr")
    if isinstance(data, EncodedDataset):
        p = data.encoded_dim
        labels = data.labels
        samples = [data.sample(i) for i in range(len(data))]
    else:
        p = data.dim
        labels = data.labels()
        samples = list(data.samples)
    if n_features is not None:
        if n_features < p:
            raise ValueError("n_features smaller than the data dimensionality")
        p = n_features
    rng = np.random.default_rng(seed)
    model = FmModel(w=np.zeros(p), V=rng.uniform(-0.01, 0.01, size=(p, rank)))
    y_pm = _signed_labels(labels, positive_class)
    return _train_loop(
        samples, y_pm, model, eta, lam1, lam2, kind, epochs, tol, rng,
        score_all=lambda mdl: decision_scores(mdl, data),
    )


@dataclasses.dataclass
class FmOvrModel:
    """One FM head per class (single head for binary problems)."""

    heads: list[FmModel]
    classes: int


def fm_train_ovr(data, rank: int, seed=0, **params) -> FmOvrModel:
    """One-vs-rest reduction: class c scores +1 against the rest."""
    labels = data.labels if isinstance(data, EncodedDataset) else data.labels()
    if data.classes == 2:
        return FmOvrModel(heads=[fm_train(data, rank, seed=seed, **params)], classes=2)
    present = np.unique(labels)
    missing = sorted(set(range(data.classes)) - set(present.tolist()))
    if missing:
        raise ValueError(f"classes absent from training data: {missing}")
    heads = []
    for c in range(data.classes):
        relabeled = _with_binary_labels(data, labels, c)
        heads.append(fm_train(relabeled, rank, seed=[seed, c], **params))
    return FmOvrModel(heads=heads, classes=data.classes)


def _with_binary_labels(data, labels, positive_class):
    two_way = np.where(labels == positive_class, 1, 0).astype(np.int64)
    if isinstance(data, EncodedDataset):
        return dataclasses.replace(data, labels=two_way, classes=2)
    samples = tuple(
        dataclasses.replace(s, label=int(t)) for s, t in zip(data.samples, two_way)
    )
    return Dataset(samples=samples, dim=data.dim, classes=2)


def ovr_decision_matrix(ovr: FmOvrModel, data) -> np.ndarray:
    return np.column_stack([decision_scores(h, data) for h in ovr.heads])


def ovr_predict(ovr: FmOvrModel, data) -> np.ndarray:
    """Predicted class ids; argmax over heads, ties to the lowest class."""
    scores = ovr_decision_matrix(ovr, data)
    if ovr.classes == 2:
        return (scores[:, 0] > 0).astype(np.int64)
    return np.argmax(scores, axis=1)
