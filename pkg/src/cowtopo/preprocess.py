"""Per-modality intensity windowing and min-max scaling on a common voxel grid."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .volume import LabelVolume, Spacing, ValidationError, Volume


class Modality(str, enum.Enum):
    CTA = "cta"
    MRA = "mra"

    @classmethod
    def parse(cls, value: "str | Modality") -> "Modality":
        if isinstance(value, Modality):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown modality {value!r}; expected 'cta' or 'mra'") from None


@dataclass(frozen=True)
class PreprocessConfig:
    cta_window: tuple[float, float] = (-1000.0, 1800.0)
    mra_window: tuple[float, float] = (0.0, 700.0)
    target_spacing: Spacing = field(default_factory=lambda: Spacing(0.6, 0.3525, 0.3525))
    intensity_order: int = 1
    label_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cta_window", tuple(float(v) for v in self.cta_window))
        object.__setattr__(self, "mra_window", tuple(float(v) for v in self.mra_window))
        object.__setattr__(self, "target_spacing", Spacing.of(self.target_spacing))
        for name in ("cta_window", "mra_window"):
            low, high = getattr(self, name)
            if not low < high:
                raise ValidationError(f"{name} must satisfy low < high, got {(low, high)}")
        if not 0 <= self.intensity_order <= 5:
            raise ValidationError("intensity_order must be in 0..5")
        if self.label_order != 0:
            raise ValidationError("labels are resampled with nearest neighbour only (label_order=0)")

    def window(self, modality: Modality | str) -> tuple[float, float]:
        return self.cta_window if Modality.parse(modality) is Modality.CTA else self.mra_window

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_spacing"] = list(self.target_spacing.as_tuple())
        d["cta_window"] = list(self.cta_window)
        d["mra_window"] = list(self.mra_window)
        return d


def truncate(v: Volume, modality: Modality | str, cfg: PreprocessConfig = PreprocessConfig()) -> Volume:
    low, high = cfg.window(modality)
    return v.with_data(np.clip(v.data.astype(np.float64), low, high))


def resampled_shape(shape, spacing: Spacing, target: Spacing) -> tuple[int, int, int]:
    return tuple(max(1, int(round(n * s / t))) for n, s, t in zip(shape, spacing, target))


def _rescale_affine(affine: np.ndarray, spacing: Spacing, target: Spacing) -> np.ndarray:
    # affine columns 0, 1, 2 step along x, y, z
    ratios = np.array([target.dx / spacing.dx, target.dy / spacing.dy, target.dz / spacing.dz])
    out = np.array(affine, dtype=float)
    out[:3, :3] = out[:3, :3] * ratios
    # keep the physical center of voxel 0 aligned with the center-of-cell mapping
    out[:3, 3] = affine[:3, 3] + np.asarray(affine)[:3, :3] @ (0.5 * ratios - 0.5)
    return out


def resample(v, cfg: PreprocessConfig = PreprocessConfig()):
    """Resample a Volume (configured order) or LabelVolume (nearest) to the target spacing.

    Output voxel o samples input coordinate (o + 0.5) * target / spacing - 0.5
    per axis, i.e. cell centers are aligned; edges replicate the border value.
    """
    target = cfg.target_spacing
    spacing = v.spacing
    shape = resampled_shape(v.shape, spacing, target)
    if shape == v.shape and np.allclose(spacing.as_tuple(), target.as_tuple(), rtol=0, atol=1e-6):
        return v.with_data(np.array(v.data), spacing=target)
    is_label = isinstance(v, LabelVolume)
    order = cfg.label_order if is_label else cfg.intensity_order
    scale = np.array(target.as_tuple()) / np.array(spacing.as_tuple())
    data = v.data if is_label else v.data.astype(np.float64)
    out = ndi.affine_transform(
        data,
        np.diag(scale),
        offset=0.5 * scale - 0.5,
        output_shape=shape,
        order=order,
        mode="nearest",
        prefilter=order > 1,
    )
    return v.with_data(out, spacing=target, affine=_rescale_affine(v.affine, spacing, target))


def normalize(v: Volume) -> Volume:
    """Per-case min-max scaling to [0, 1]; a constant volume becomes all zeros."""
    data = v.data.astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    # a range at round-off level (e.g. a resampled constant) counts as constant
    if hi - lo <= 1e-12 * max(abs(lo), abs(hi), 1.0):
        return v.with_data(np.zeros_like(data))
    return v.with_data(np.clip((data - lo) / (hi - lo), 0.0, 1.0))


def preprocess_case(v: Volume, modality: Modality | str, cfg: PreprocessConfig = PreprocessConfig()) -> Volume:
    """truncate -> resample -> normalize."""
    return normalize(resample(truncate(v, modality, cfg), cfg))
