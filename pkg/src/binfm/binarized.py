"""Sign-constrained factorization machine trained with straight-through
proxies.

Full-precision proxy parameters are updated by per-coordinate adaptive
gradient steps; the deployed model is their elementwise sign plus two
closed-form scale factors (the mean absolute proxy values, which minimize the
squared approximation error to the proxies). Gradients pass through the sign
function as identity but are cancelled outside [-1, 1], so a proxy that
escapes that band keeps its sign permanently.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .encoding import EncodedDataset, EncodedSample
from .fm import LOSSES, TrainingDivergedError, TrainingHistory, loss_and_dloss

OPTIMIZERS = ("adagrad", "sgd")

SCALE_FLOOR = 1e-8


@dataclasses.dataclass
class BinFmModel:
    """Proxy weights, their signs, and the two scale factors.

    ``sign_w``/``sign_V`` are dense +/-1.0 arrays kept consistent with the
    proxies (sign of 0 is +1). ``alpha`` scales the linear term, ``beta`` the
    factors.
    """

    proxy_w: np.ndarray
    proxy_V: np.ndarray
    sign_w: np.ndarray
    sign_V: np.ndarray
    alpha: float
    beta: float
    history: TrainingHistory | None = dataclasses.field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return len(self.proxy_w)

    @property
    def rank(self) -> int:
        return self.proxy_V.shape[1]


@dataclasses.dataclass
class AdagradState:
    """Per-coordinate sums of squared gradients plus the step-size constants."""

    s_w: np.ndarray
    s_V: np.ndarray
    eta: float
    eps: float


def quantize_sign(v) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, as +/-1.0 floats."""
    return np.where(np.asarray(v, dtype=np.float64) >= 0.0, 1.0, -1.0)


def refresh_scaling(model: BinFmModel) -> tuple[float, float]:
    """Set alpha/beta to the mean absolute proxy values and return them.

    This is the least-squares optimal scale for approximating each proxy
    array by scale * sign(proxy). All-zero proxies get a tiny floor so the
    scales stay positive.
    """
    alpha = float(np.abs(model.proxy_w).mean())
    beta = float(np.abs(model.proxy_V).mean())
    model.alpha = max(alpha, SCALE_FLOOR)
    model.beta = max(beta, SCALE_FLOOR)
    return model.alpha, model.beta


def _active_of(z) -> np.ndarray:
    if isinstance(z, EncodedSample):
        return z.active
    return np.asarray(z)


def binfm_predict(model: BinFmModel, z) -> float:
    """Score an encoded sample from the signs and scales alone.

    Because every squared sign is 1 and the sample has exactly d active unit
    entries, the pairwise term reduces to sums of signs over the active set.
    """
    active = _active_of(z)
    d = len(active)
    linear = model.alpha * float(model.sign_w[active].sum())
    sums = model.sign_V[active].sum(axis=0)
    interaction = 0.5 * model.beta**2 * float((sums * sums).sum() - model.rank * d)
    return linear + interaction


def binfm_predict_brute(model: BinFmModel, z) -> float:
    """O(d^2 rank) pairwise-sum oracle; reference for binfm_predict."""
    active = _active_of(z)
    score = model.alpha * float(model.sign_w[active].sum())
    for a in range(len(active)):
        for b in range(a + 1, len(active)):
            score += model.beta**2 * float(
                model.sign_V[active[a]] @ model.sign_V[active[b]]
            )
    return score


def decision_scores(model: BinFmModel, enc) -> np.ndarray:
    """Vectorized binfm_predict over an EncodedDataset or (n, d) index matrix."""
    active = enc.active if isinstance(enc, EncodedDataset) else np.asarray(enc)
    d = active.shape[1]
    linear = model.alpha * model.sign_w[active].sum(axis=1)
    sums = model.sign_V[active].sum(axis=1)
    inter = 0.5 * model.beta**2 * ((sums**2).sum(axis=1) - model.rank * d)
    return linear + inter


def ste_grad_w(model: BinFmModel, z, dldf: float, lam1: float, j: int) -> float:
    """Straight-through gradient for proxy weight j on an active index.

    Zero whenever the proxy magnitude exceeds 1; the clip covers the
    regularization term as well.
    """
    active = _active_of(z)
    if j not in active:
        raise ValueError(f"index {j} is not active in this sample")
    if abs(model.proxy_w[j]) > 1.0:
        return 0.0
    return dldf * model.alpha + lam1 * model.alpha * float(model.sign_w[j])


def ste_grad_v(
    model: BinFmModel,
    z,
    dldf: float,
    lam2: float,
    j: int,
    f: int,
    cached_sum_f: float,
) -> float:
    """Straight-through gradient for proxy factor (j, f) on an active index.

    ``cached_sum_f`` is the sample's precomputed sum of sign_V[:, f] over the
    active set; the sign's own contribution is subtracted out, so a sample
    with a single active feature never moves its factors.
    """
    active = _active_of(z)
    if j not in active:
        raise ValueError(f"index {j} is not active in this sample")
    if abs(model.proxy_V[j, f]) > 1.0:
        return 0.0
    sign = float(model.sign_V[j, f])
    return dldf * model.beta**2 * (cached_sum_f - sign) + lam2 * model.beta * sign


def adagrad_update(
    accumulator: np.ndarray, slot, param: float, grad: float, eta: float, eps: float
) -> float:
    """One adaptive step: accumulate grad^2 into the slot, then step by
    eta * grad / sqrt(accumulator + eps). Returns the updated parameter."""
    accumulator[slot] += grad * grad
    return param - eta * grad / math.sqrt(accumulator[slot] + eps)


def _init_model(p: int, rank: int, rng: np.random.Generator) -> BinFmModel:
    # Zero factor proxies would give every column the same gradient forever;
    # scales start at 1 so the first epoch sees nonzero forward/backward terms.
    proxy_w = np.zeros(p)
    proxy_V = rng.uniform(-0.01, 0.01, size=(p, rank))
    return BinFmModel(
        proxy_w=proxy_w,
        proxy_V=proxy_V,
        sign_w=quantize_sign(proxy_w),
        sign_V=quantize_sign(proxy_V),
        alpha=1.0,
        beta=1.0,
    )


def _train_signs(
    active: np.ndarray,
    y_pm: np.ndarray,
    p: int,
    rank: int,
    eta: float,
    lam1: float,
    lam2: float,
    eps: float,
    kind: str,
    epochs: int,
    optimizer: str,
    use_scaling: bool,
    seed,
    tol: float,
) -> BinFmModel:
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if kind not in LOSSES:
        raise ValueError(f"loss must be one of {LOSSES}")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
    n, d = active.shape
    rng = np.random.default_rng(seed)
    model = _init_model(p, rank, rng)
    state = AdagradState(s_w=np.zeros(p), s_V=np.zeros((p, rank)), eta=eta, eps=eps)
    adaptive = optimizer == "adagrad"

    initial_scores = decision_scores(model, active)
    initial = float(
        np.mean([loss_and_dloss(kind, y_pm[i], s)[0] for i, s in enumerate(initial_scores)])
    )

    md = rank * d
    epoch_losses: list[float] = []
    for _ in range(epochs):
        total = 0.0
        alpha, beta = model.alpha, model.beta
        beta_sq = beta * beta
        for i in rng.permutation(n):
            idx = active[i]
            sign_v_act = model.sign_V[idx]
            sums = sign_v_act.sum(axis=0)
            score = alpha * model.sign_w[idx].sum() + 0.5 * beta_sq * (
                (sums * sums).sum() - md
            )
            loss, dldf = loss_and_dloss(kind, y_pm[i], float(score))
            total += loss

            # Linear proxies: gradient is clipped outside [-1, 1], signs
            # refreshed immediately after the step.
            pw = model.proxy_w[idx]
            open_w = np.abs(pw) <= 1.0
            g_w = (dldf * alpha + lam1 * alpha * model.sign_w[idx]) * open_w
            if adaptive:
                acc = state.s_w[idx] + g_w * g_w
                state.s_w[idx] = acc
                pw = pw - eta * g_w / np.sqrt(acc + eps)
            else:
                pw = pw - eta * g_w
            model.proxy_w[idx] = pw
            model.sign_w[idx] = quantize_sign(pw)

            # Factor proxies: all (j, f) gradients use the sums cached above,
            # so the vectorized step equals the sequential per-coordinate one.
            pv = model.proxy_V[idx]
            open_v = np.abs(pv) <= 1.0
            g_v = (
                dldf * beta_sq * (sums[None, :] - sign_v_act)
                + lam2 * beta * sign_v_act
            ) * open_v
            if adaptive:
                acc_v = state.s_V[idx] + g_v * g_v
                state.s_V[idx] = acc_v
                pv = pv - eta * g_v / np.sqrt(acc_v + eps)
            else:
                pv = pv - eta * g_v
            model.proxy_V[idx] = pv
            model.sign_V[idx] = quantize_sign(pv)

        mean_loss = float(total / n)
        if not math.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"non-finite training loss {mean_loss} at epoch {len(epoch_losses) + 1}"
            )
        epoch_losses.append(mean_loss)
        if use_scaling:
            refresh_scaling(model)
        # The first epoch runs at unit scales, so its loss is not comparable
        # to post-refresh epochs; improvement checks start at epoch 3.
        if tol > 0 and len(epoch_losses) >= 3:
            prev, cur = epoch_losses[-2], epoch_losses[-1]
            if prev - cur < tol * abs(prev):
                break

    model.history = TrainingHistory(initial_loss=initial, epoch_losses=epoch_losses)
    return model


def train(
    enc: EncodedDataset,
    rank: int,
    eta: float = 0.1,
    lam1: float = 1e-4,
    lam2: float = 1e-4,
    eps: float = 1e-8,
    kind: str = "logistic",
    epochs: int = 30,
    optimizer: str = "adagrad",
    use_scaling: bool = True,
    seed=0,
    tol: float = 1e-4,
    positive_class: int = 1,
) -> BinFmModel:
    """Train a binary sign-constrained FM on encoded data.

    Scales start at 1.0 and are refreshed to the mean absolute proxy values
    at the end of every epoch (fixed at 1.0 when ``use_scaling`` is off).
    ``optimizer="sgd"`` uses plain eta-sized steps for comparison runs.
    Stops early when the relative loss improvement over an epoch drops below
    ``tol`` (0 disables); raises TrainingDivergedError on non-finite loss.
    """
    if enc.classes != 2:
        raise ValueError("train handles binary data; use train_ovr")
    y_pm = np.where(enc.labels == positive_class, 1.0, -1.0)
    return _train_signs(
        enc.active, y_pm, enc.encoded_dim, rank,
        eta, lam1, lam2, eps, kind, epochs, optimizer, use_scaling, seed, tol,
    )


@dataclasses.dataclass
class BinFmOvrModel:
    """One binarized head per class (single head for binary problems)."""

    heads: list[BinFmModel]
    classes: int


def train_ovr(enc: EncodedDataset, rank: int, seed=0, **params) -> BinFmOvrModel:
    """One-vs-rest reduction: head c is trained with class c as +1."""
    if enc.classes == 2:
        return BinFmOvrModel(heads=[train(enc, rank, seed=seed, **params)], classes=2)
    present = set(np.unique(enc.labels).tolist())
    missing = sorted(set(range(enc.classes)) - present)
    if missing:
        raise ValueError(f"classes absent from training data: {missing}")
    heads = []
    for c in range(enc.classes):
        head_enc = dataclasses.replace(
            enc, labels=np.where(enc.labels == c, 1, 0).astype(np.int64), classes=2
        )
        heads.append(train(head_enc, rank, seed=[seed, c], **params))
    return BinFmOvrModel(heads=heads, classes=enc.classes)


def ovr_decision_matrix(ovr: BinFmOvrModel, enc) -> np.ndarray:
    return np.column_stack([decision_scores(h, enc) for h in ovr.heads])


def ovr_predict(ovr: BinFmOvrModel, enc) -> np.ndarray:
    """Predicted class ids; argmax over heads, ties to the lowest class."""
    scores = ovr_decision_matrix(ovr, enc)
    if ovr.classes == 2:
        return (scores[:, 0] > 0).astype(np.int64)
    return np.argmax(scores, axis=1)
