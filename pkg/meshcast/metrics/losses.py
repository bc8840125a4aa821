"""
Training losses on sigmoid probabilities.

Both losses are sums over pixels. The joint loss adds, for each of the WT,
TC and ET channels, ``lam * dice + (1 - lam) * bce``.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .. import tensor as tt
from ..tensor import Tensor
from ..utils.errors import ShapeError
from .targets import TargetMask

PROB_EPS = 1e-7


class LossConfig(BaseModel):
    """Weights of the joint loss.

    Attributes:
        lam: Dice weight, strictly between 0 and 1
        tau: Dice smoothing constant
    """

    model_config = ConfigDict(frozen=True)

    lam: float = Field(default=0.5, gt=0.0, lt=1.0)
    tau: float = Field(default=1e-5, gt=0.0)


def _as_target(target, like: Tensor) -> Tensor:
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target), dtype=like.dtype)
    if target.shape != like.shape:
        raise ShapeError(f"Prediction {list(like.shape)} and target {list(target.shape)} differ in shape")
    return target


def bce_loss(prob: Tensor, target, eps: float = PROB_EPS) -> Tensor:
    """Summed binary cross-entropy with ``prob`` clamped to ``[eps, 1 - eps]``."""
    target = _as_target(target, prob)
    p = tt.clip(prob, eps, 1.0 - eps)
    return -tt.sum(target * tt.log(p) + (1.0 - target) * tt.log(1.0 - p))


def dice_loss(prob: Tensor, target, tau: float = 1e-5) -> Tensor:
    """``1 - 2 * (sum(p*t) + tau) / (sum(p) + sum(t) + tau)``."""
    target = _as_target(target, prob)
    overlap = tt.sum(prob * target)
    return 1.0 - 2.0 * (overlap + tau) / (tt.sum(prob) + tt.sum(target) + tau)


def joint_loss(logits: Tensor, targets: TargetMask, cfg: LossConfig = LossConfig()) -> Tensor:
    """Joint loss of ``logits[T, 3, H, W]`` against the WT/TC/ET masks."""
    if logits.ndim != 4 or logits.shape[1] != 3:
        raise ShapeError(f"Logits must be [T, 3, H, W], got {list(logits.shape)}")
    stacked = targets.stacked(axis=1)
    if stacked.shape != logits.shape:
        raise ShapeError(f"Targets {list(stacked.shape)} do not match logits {list(logits.shape)}")
    prob = tt.sigmoid(logits)
    total = None
    for channel in range(3):
        p = prob[:, channel]
        t = stacked[:, channel]
        term = cfg.lam * dice_loss(p, t, cfg.tau) + (1.0 - cfg.lam) * bce_loss(p, t)
        total = term if total is None else total + term
    return total
