"""Connectivity-aware loss built on centerline-distance weight maps.

Each class contributes a four-term objective; the total is their mean over
classes, and an analytic gradient is provided alongside.

All sums run over voxels in C (linear-index) order on float64 arrays so
results do not depend on how classes are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .kernels import edt, skeletonize
from .volume import (
    CowClass,
    LabelVolume,
    ProbVolume,
    Spacing,
    ValidationError,
    one_hot,
)


@dataclass(frozen=True)
class CalConfig:
    alpha_t: float = 0.2
    beta_t: float = 0.8
    lambda_fg: float = 20.0
    epsilon: float = 0.01
    focal_exponent: float = 2.0
    prob_floor: float = 1e-7
    weight_floor: float = 0.0

    def __post_init__(self):
        if abs(self.alpha_t + self.beta_t - 1.0) > 1e-12:
            raise ValidationError("alpha_t + beta_t must equal 1")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if not self.lambda_fg > 0:
            raise ValidationError("lambda_fg must be positive")
        if not 0 < self.prob_floor < 0.5:
            raise ValidationError("prob_floor must lie in (0, 0.5)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Per-voxel CE weights of one class; ``raw`` skips the weight_floor clamp."""

    weights: np.ndarray
    raw: np.ndarray
    distance: np.ndarray | None
    dc_max: float
    spacing: Spacing


def centerline_weights(mask: np.ndarray, spacing, cfg: CalConfig = CalConfig()) -> WeightMap:
    """Weight map of a binary class mask.

    Background voxels get 1. Foreground voxels get
    ``-lambda_fg * ln(dc / dc_max + epsilon)``, where dc is the mm distance to
    the class skeleton and dc_max its maximum over the class, clamped below
    at ``weight_floor``.
    """
    mask = np.asarray(mask, dtype=bool)
    spacing = Spacing.of(spacing)
    raw = np.ones(mask.shape)
    if not mask.any():
        return WeightMap(raw, raw.copy(), None, 0.0, spacing)
    skel = skeletonize(mask).mask
    dist = edt(skel, spacing)
    dc_max = float(dist[mask].max())
    ratio = dist[mask] / dc_max if dc_max > 0 else np.zeros(np.count_nonzero(mask))
    raw[mask] = -cfg.lambda_fg * np.log(ratio + cfg.epsilon)
    weights = raw.copy()
    weights[mask] = np.maximum(weights[mask], cfg.weight_floor)
    return WeightMap(weights, raw, dist, dc_max, spacing)


def weight_map(lbl: LabelVolume, c: CowClass | str | int, cfg: CalConfig = CalConfig()) -> WeightMap:
    return centerline_weights(one_hot(lbl, c), lbl.spacing, cfg)


@dataclass(frozen=True)
class ClassLoss:
    dice: float
    focal: float
    tversky: float
    wce: float

    @property
    def total(self) -> float:
        return self.dice + self.focal + self.tversky + self.wce

    def to_dict(self) -> dict:
        return {"dice": self.dice, "focal": self.focal, "tversky": self.tversky,
                "wce": self.wce, "total": self.total}


@dataclass(frozen=True)
class LossBreakdown:
    per_class: dict[str, ClassLoss]
    total: float
    n_classes: int
    n_voxels: int

    def to_dict(self) -> dict:
        return {
            "per_class": {k: v.to_dict() for k, v in self.per_class.items()},
            "L_total": self.total,
            "n_classes": self.n_classes,
            "n_voxels": self.n_voxels,
        }


def _check(prob, target, weights=None):
    if prob.shape != target.shape or (weights is not None and weights.shape != prob.shape):
        raise ValidationError(f"shape mismatch: prob {prob.shape}, target {target.shape}")


def _safe_log(x, floor):
    # logs of exact 0/1 targets stay exact (ln 1 = 0); only the argument is floored
    return np.log(np.maximum(x, floor))


def _dlog(x, floor):
    # derivative of _safe_log: zero where the argument is floored
    return np.where(x > floor, 1.0 / np.maximum(x, floor), 0.0)


def class_loss(prob: np.ndarray, target: np.ndarray, weights: np.ndarray | WeightMap,
               cfg: CalConfig = CalConfig()) -> ClassLoss:
    """Dice + focal + Tversky + weighted-CE terms of one class channel."""
    if isinstance(weights, WeightMap):
        weights = weights.weights
    p = np.asarray(prob, dtype=np.float64).ravel()
    y = np.asarray(target, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    _check(np.asarray(prob), np.asarray(target), np.asarray(weights))
    fl = cfg.prob_floor
    s_py, s_p, s_y = float(np.dot(p, y)), float(p.sum()), float(y.sum())

    denom = s_p + s_y
    dice = -2.0 * s_py / denom if denom > 0 else -1.0

    fg = y > 0.5
    p_t = np.where(fg, p, 1.0 - p)
    focal = -float(np.sum((1.0 - p_t) ** cfg.focal_exponent * _safe_log(p_t, fl))) / p.size

    d_tv = cfg.alpha_t * s_p + cfg.beta_t * s_y
    tversky = 1.0 - s_py / d_tv if d_tv > 0 else 0.0

    ce = -(y * _safe_log(p, fl) + (1.0 - y) * _safe_log(1.0 - p, fl))
    wce = float(np.dot(w, ce))
    return ClassLoss(dice, focal, tversky, wce)


def class_loss_gradient(prob: np.ndarray, target: np.ndarray, weights: np.ndarray | WeightMap,
                        cfg: CalConfig = CalConfig()) -> dict[str, np.ndarray]:
    """Per-term derivatives of ``class_loss`` w.r.t. each voxel's probability.

    Exact wherever no log argument sits on ``prob_floor``; weights are constants.
    Returns a dict with keys dice, focal, tversky, wce, total.
    """
    if isinstance(weights, WeightMap):
        weights = weights.weights
    _check(np.asarray(prob), np.asarray(target), np.asarray(weights))
    shape = np.shape(prob)
    p = np.asarray(prob, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    s_py, s_p, s_y = float(np.sum(p * y)), float(p.sum()), float(y.sum())
    g = cfg.focal_exponent

    denom = s_p + s_y
    d_dice = -2.0 * (y * denom - s_py) / denom ** 2 if denom > 0 else np.zeros(shape)

    fg = y > 0.5
    p_t = np.where(fg, p, 1.0 - p)
    # d/dp_t of (1 - p_t)^g ln p_t, then chain through dp_t/dp = +-1
    fl = cfg.prob_floor
    df_dpt = -g * (1.0 - p_t) ** (g - 1) * _safe_log(p_t, fl) + (1.0 - p_t) ** g * _dlog(p_t, fl)
    d_focal = -np.where(fg, df_dpt, -df_dpt) / p.size

    d_tv_den = cfg.alpha_t * s_p + cfg.beta_t * s_y
    if d_tv_den > 0:
        d_tversky = -(y * d_tv_den - s_py * cfg.alpha_t) / d_tv_den ** 2
    else:
        d_tversky = np.zeros(shape)

    d_wce = w * (-y * _dlog(p, fl) + (1.0 - y) * _dlog(1.0 - p, fl))
    total = d_dice + d_focal + d_tversky + d_wce
    return {"dice": d_dice, "focal": d_focal, "tversky": d_tversky, "wce": d_wce, "total": total}


def _aligned(prob: ProbVolume, lbl: LabelVolume):
    if tuple(prob.shape) != tuple(lbl.shape):
        raise ValidationError(f"shape mismatch: prob {prob.shape}, label {lbl.shape}")


def total_loss(prob: ProbVolume, lbl: LabelVolume, cfg: CalConfig = CalConfig(),
               classes=tuple(CowClass)) -> LossBreakdown:
    """Mean of the per-class losses over ``classes`` (all 13 by default)."""
    _aligned(prob, lbl)
    per_class = {}
    for c in classes:
        c = CowClass.parse(c)
        target = one_hot(lbl, c)
        per_class[c.label] = class_loss(prob.channel(c), target, weight_map(lbl, c, cfg), cfg)
    total = math.fsum(v.total for v in per_class.values()) / len(per_class)
    return LossBreakdown(per_class, total, len(per_class), int(np.prod(lbl.shape)))


def loss_gradient(prob: ProbVolume, lbl: LabelVolume, cfg: CalConfig = CalConfig(),
                  classes=tuple(CowClass)) -> np.ndarray:
    """d L_total / d prob, shaped like ``prob.data``; background channel is zero."""
    _aligned(prob, lbl)
    grad = np.zeros(prob.data.shape)
    classes = [CowClass.parse(c) for c in classes]
    for c in classes:
        target = one_hot(lbl, c)
        g = class_loss_gradient(prob.channel(c), target, weight_map(lbl, c, cfg), cfg)
        grad[int(c)] = g["total"] / len(classes)
    return grad

