"""Overlap and topology metrics for segmentations, plus graph-classification accuracy."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .kernels import count_components, edt, skeletonize
from .tasks import CowGraph, GraphDeriveConfig, derive_graph
from .volume import CowClass, LabelVolume, Spacing, ValidationError, one_hot

CLASS_MODES = ("present", "all13")


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape}, gt {gt.shape}")
    return pred, gt


def dice(pred_mask, gt_mask) -> float:
    """2|P & G| / (|P| + |G|); two empty masks score 1."""
    p, g = _pair(pred_mask, gt_mask)
    denom = np.count_nonzero(p) + np.count_nonzero(g)
    if denom == 0:
        return 1.0
    return 2.0 * np.count_nonzero(p & g) / denom


def cl_dice(pred_mask, gt_mask) -> float:
    """Harmonic mean of topology precision and sensitivity.

    Both masks empty gives 1; exactly one empty gives 0.
    """
    p, g = _pair(pred_mask, gt_mask)
    if not p.any() and not g.any():
        return 1.0
    if not p.any() or not g.any():
        return 0.0
    sp, sg = skeletonize(p).mask, skeletonize(g).mask
    tprec = np.count_nonzero(sp & g) / np.count_nonzero(sp)
    tsens = np.count_nonzero(sg & p) / np.count_nonzero(sg)
    if tprec + tsens == 0:
        return 0.0
    return 2.0 * tprec * tsens / (tprec + tsens)


def b0_error(pred_mask, gt_mask, conn: int = 26) -> int:
    p, g = _pair(pred_mask, gt_mask)
    return abs(count_components(p, conn) - count_components(g, conn))


def surface(mask: np.ndarray) -> np.ndarray:
    """Mask voxels with at least one 6-neighbour outside the mask (or the grid)."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndi.binary_erosion(mask, structure=ndi.generate_binary_structure(3, 1), border_value=0)


def volume_diagonal(shape, spacing) -> float:
    return math.sqrt(sum((n * s) ** 2 for n, s in zip(shape, Spacing.of(spacing))))


def surface_distances(pred_mask, gt_mask, spacing) -> np.ndarray:
    """Symmetric surface-distance multiset (pred->gt then gt->pred), in mm."""
    p, g = _pair(pred_mask, gt_mask)
    sp, sg = surface(p), surface(g)
    return np.concatenate([edt(sg, spacing)[sp], edt(sp, spacing)[sg]])


def hd95(pred_mask, gt_mask, spacing, empty_penalty: float | None = None) -> tuple[float, bool]:
    """95th percentile of symmetric surface distances.

    Returns ``(value, defined)``. Two empty masks give ``(0.0, True)``; one
    empty side gives ``(penalty, False)`` with the penalty defaulting to the
    volume diagonal in mm.
    """
    p, g = _pair(pred_mask, gt_mask)
    if not p.any() and not g.any():
        return 0.0, True
    if not p.any() or not g.any():
        pen = volume_diagonal(p.shape, spacing) if empty_penalty is None else float(empty_penalty)
        return pen, False
    return float(np.percentile(surface_distances(p, g, spacing), 95)), True


def balanced_accuracy(preds, actuals) -> float:
    """Mean per-class recall over the classes that occur in ``actuals``."""
    preds, actuals = list(preds), list(actuals)
    if not actuals or len(preds) != len(actuals):
        raise ValueError("balanced_accuracy needs equal-length, non-empty inputs")
    totals = Counter(actuals)
    hits = Counter(a for p, a in zip(preds, actuals) if p == a)
    return math.fsum(hits[c] / n for c, n in totals.items()) / len(totals)


@dataclass
class ClassMetrics:
    dice: float
    hd95: float
    hd95_defined: bool
    b0_error: int
    present_in_gt: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CaseMetrics:
    per_class: dict[str, ClassMetrics]
    class_avg_dice: float | None
    class_avg_hd95: float | None
    class_avg_b0: float | None
    cldice: float
    graph_pred: CowGraph
    graph_gt: CowGraph
    classes_mode: str = "present"
    case_id: str | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "classes_mode": self.classes_mode,
            "per_class": {k: v.to_dict() for k, v in self.per_class.items()},
            "class_avg_dice": self.class_avg_dice,
            "class_avg_hd95": self.class_avg_hd95,
            "class_avg_b0": self.class_avg_b0,
            "cldice": self.cldice,
            "graph_pred": self.graph_pred.to_dict(),
            "graph_gt": self.graph_gt.to_dict(),
        }


def evaluate_case(pred: LabelVolume, gt: LabelVolume, classes_mode: str = "present", conn: int = 26,
                  hd95_penalty: float | None = None,
                  graph_cfg: GraphDeriveConfig = GraphDeriveConfig(), case_id: str | None = None) -> CaseMetrics:
    """Per-class and class-averaged metrics for one case.

    Averages run over classes present in ``gt`` (``"present"``) or over all
    13 (``"all13"``), where a class absent from both volumes scores perfectly.
    """
    if classes_mode not in CLASS_MODES:
        raise ValueError(f"classes_mode must be one of {CLASS_MODES}")
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape}, gt {gt.shape}")
    per_class = {}
    for c in CowClass:
        p, g = one_hot(pred, c), one_hot(gt, c)
        h, defined = hd95(p, g, gt.spacing, hd95_penalty)
        per_class[c.label] = ClassMetrics(dice(p, g), h, defined, b0_error(p, g, conn), bool(g.any()))
    chosen = [m for m in per_class.values() if classes_mode == "all13" or m.present_in_gt]

    def avg(attr):
        return math.fsum(getattr(m, attr) for m in chosen) / len(chosen) if chosen else None

    return CaseMetrics(
        per_class=per_class,
        class_avg_dice=avg("dice"),
        class_avg_hd95=avg("hd95"),
        class_avg_b0=avg("b0_error"),
        cldice=cl_dice(pred.data != 0, gt.data != 0),
        graph_pred=derive_graph(pred, graph_cfg),
        graph_gt=derive_graph(gt, graph_cfg),
        classes_mode=classes_mode,
        case_id=case_id,
    )


def _mean_sd(values) -> dict:
    values = [v for v in values if v is not None]
    if not values:
        return {"mean": None, "sd": None, "n": 0}
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "sd": float(arr.std()), "n": len(values)}


def cohort_summary(cases: list[CaseMetrics]) -> dict:
    """Mean and (population) sd of each case-level metric plus graph accuracies."""
    summary = {
        "class_avg_dice": _mean_sd(c.class_avg_dice for c in cases),
        "cldice": _mean_sd(c.cldice for c in cases),
        "class_avg_b0": _mean_sd(c.class_avg_b0 for c in cases),
        "class_avg_hd95": _mean_sd(c.class_avg_hd95 for c in cases),
    }
    if cases:
        summary["anterior_balanced_acc"] = balanced_accuracy(
            [c.graph_pred.anterior_code for c in cases], [c.graph_gt.anterior_code for c in cases])
        summary["posterior_balanced_acc"] = balanced_accuracy(
            [c.graph_pred.posterior_code for c in cases], [c.graph_gt.posterior_code for c in cases])
    return summary
