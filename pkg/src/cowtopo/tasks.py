"""Detection boxes from RoI masks and CoW graph edge lists from class labels."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .kernels import edt, largest_component
from .volume import CowClass, LabelVolume, ValidationError, one_hot

ANTERIOR_EDGES = ("L-A1", "Acom", "3rd-A2", "R-A1")
POSTERIOR_EDGES = ("L-Pcom", "L-P1", "R-P1", "R-Pcom")


@dataclass(frozen=True)
class BoundingBox3D:
    """Axis-aligned box with inclusive (z, y, x) voxel corners."""

    min: tuple[int, int, int]
    max: tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.min)
        hi = tuple(int(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
            raise ValidationError(f"invalid box {lo}-{hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> tuple[int, int, int]:
        return tuple(b - a + 1 for a, b in zip(self.min, self.max))

    @property
    def volume(self) -> int:
        ez, ey, ex = self.extent
        return ez * ey * ex

    def intersect(self, other: "BoundingBox3D") -> "BoundingBox3D | None":
        lo = tuple(max(a, b) for a, b in zip(self.min, other.min))
        hi = tuple(min(a, b) for a, b in zip(self.max, other.max))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return BoundingBox3D(lo, hi)

    def shrink(self, d: int) -> "BoundingBox3D | None":
        lo = tuple(v + d for v in self.min)
        hi = tuple(v - d for v in self.max)
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return BoundingBox3D(lo, hi)

    def world_corners(self, affine: np.ndarray) -> tuple[list[float], list[float]]:
        """World coordinates of the min and max corner voxel centers."""
        affine = np.asarray(affine, dtype=float)
        out = []
        for z, y, x in (self.min, self.max):
            out.append((affine @ np.array([x, y, z, 1.0]))[:3].tolist())
        return out[0], out[1]

    def to_dict(self) -> dict:
        return {"min": list(self.min), "max": list(self.max)}


def roi_box_from_mask(roi_mask: np.ndarray, conn: int = 26) -> BoundingBox3D:
    """Tight box around the largest connected component of an RoI mask."""
    lcc = largest_component(roi_mask, conn)
    if not lcc.any():
        raise ValidationError("no RoI predicted")
    idx = np.argwhere(lcc)
    return BoundingBox3D(tuple(idx.min(axis=0)), tuple(idx.max(axis=0)))


def _overlap(a: BoundingBox3D | None, b: BoundingBox3D | None) -> int:
    if a is None or b is None:
        return 0
    inter = a.intersect(b)
    return 0 if inter is None else inter.volume


def box_iou(a: BoundingBox3D, b: BoundingBox3D) -> float:
    inter = _overlap(a, b)
    return inter / (a.volume + b.volume - inter)


def box_boundary_iou(a: BoundingBox3D, b: BoundingBox3D, d: int = 2) -> float:
    """IoU of the boxes' inner shells of thickness ``d`` voxels.

    A shell is the box minus the box shrunk by ``d`` on every face, so the
    shell overlap follows from four box intersections by inclusion-exclusion.
    """
    if d < 1:
        raise ValueError("shell thickness must be >= 1")
    ia, ib = a.shrink(d), b.shrink(d)
    shell_a = a.volume - (ia.volume if ia else 0)
    shell_b = b.volume - (ib.volume if ib else 0)
    inter = _overlap(a, b) - _overlap(a, ib) - _overlap(ia, b) + _overlap(ia, ib)
    return inter / (shell_a + shell_b - inter)


@dataclass(frozen=True)
class GraphDeriveConfig:
    presence_min_voxels: int = 20
    adjacency_radius_mm: float = 1.0
    connectivity: int = 26

    def __post_init__(self):
        if self.presence_min_voxels < 1 or not self.adjacency_radius_mm > 0:
            raise ValidationError("presence_min_voxels and adjacency_radius_mm must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CowGraph:
    """Edge presence bits, each list ordered roughly left to right."""

    anterior: tuple[int, int, int, int]
    posterior: tuple[int, int, int, int]

    def __post_init__(self):
        for name in ("anterior", "posterior"):
            bits = tuple(int(b) for b in getattr(self, name))
            if len(bits) != 4 or any(b not in (0, 1) for b in bits):
                raise ValidationError(f"{name} must be 4 bits, got {bits}")
            object.__setattr__(self, name, bits)

    @property
    def edges(self) -> dict[str, int]:
        return {**dict(zip(ANTERIOR_EDGES, self.anterior)), **dict(zip(POSTERIOR_EDGES, self.posterior))}

    @property
    def anterior_code(self) -> str:
        return "".join(map(str, self.anterior))

    @property
    def posterior_code(self) -> str:
        return "".join(map(str, self.posterior))

    def to_dict(self) -> dict:
        return {"anterior": list(self.anterior), "posterior": list(self.posterior)}


def _present(mask: np.ndarray, cfg: GraphDeriveConfig) -> int:
    if not mask.any():
        return 0
    return int(np.count_nonzero(largest_component(mask, cfg.connectivity)) >= cfg.presence_min_voxels)


def _touching(a: np.ndarray, b: np.ndarray, spacing, radius_mm: float) -> int:
    if not a.any() or not b.any():
        return 0
    # nearest-voxel pairs always lie inside the joint bounding box
    idx = np.argwhere(a | b)
    box = tuple(slice(lo, hi + 1) for lo, hi in zip(idx.min(axis=0), idx.max(axis=0)))
    dist = edt(b[box], spacing)
    return int(dist[a[box]].min() <= radius_mm)


def derive_graph(lbl: LabelVolume, cfg: GraphDeriveConfig = GraphDeriveConfig()) -> CowGraph:
    """Edge bits deduced from a multi-class segmentation.

    Communicating and accessory vessels (Acom, Pcoms, 3rd-A2) are present when
    their largest fragment reaches ``presence_min_voxels``. A1 and P1 are
    present when the distal artery (ACA / PCA) comes within
    ``adjacency_radius_mm`` of its parent (ICA / BA).
    """
    m = {c: one_hot(lbl, c) for c in CowClass}
    sp = lbl.spacing
    r = cfg.adjacency_radius_mm
    anterior = (
        _touching(m[CowClass.L_ACA], m[CowClass.L_ICA], sp, r),
        _present(m[CowClass.ACOM], cfg),
        _present(m[CowClass.THIRD_A2], cfg),
        _touching(m[CowClass.R_ACA], m[CowClass.R_ICA], sp, r),
    )
    posterior = (
        _present(m[CowClass.L_PCOM], cfg),
        _touching(m[CowClass.L_PCA], m[CowClass.BA], sp, r),
        _touching(m[CowClass.R_PCA], m[CowClass.BA], sp, r),
        _present(m[CowClass.R_PCOM], cfg),
    )
    return CowGraph(anterior, posterior)
