"""Synthetic label volumes shared by the tests."""

import numpy as np

from cowtopo.volume import CowClass, LabelVolume

TARGET_SPACING = (0.6, 0.3525, 0.3525)

# (y0, y1, x0, x1) half-open rectangles, extruded over z in [4, 7).
COMPLETE_COW_LAYOUT = {
    CowClass.BA: (40, 56, 36, 46),
    CowClass.L_PCA: (36, 40, 16, 41),
    CowClass.R_PCA: (36, 40, 41, 66),
    CowClass.L_PCOM: (20, 36, 16, 20),
    CowClass.R_PCOM: (20, 36, 62, 66),
    CowClass.L_ICA: (14, 20, 12, 22),
    CowClass.R_ICA: (14, 20, 58, 68),
    CowClass.L_MCA: (14, 18, 2, 12),
    CowClass.R_MCA: (14, 18, 68, 78),
    CowClass.L_ACA: (10, 14, 18, 38),
    CowClass.R_ACA: (10, 14, 42, 62),
    CowClass.ACOM: (10, 14, 38, 42),
    CowClass.THIRD_A2: (2, 10, 38, 42),
}
COW_SHAPE = (12, 60, 80)
SLAB = slice(4, 7)


def complete_cow(layout=None, shape=COW_SHAPE) -> LabelVolume:
    """Planar toy CoW: every segment touches its anatomical neighbours."""
    data = np.zeros(shape, dtype=np.int16)
    for c, (y0, y1, x0, x1) in (layout or COMPLETE_COW_LAYOUT).items():
        data[SLAB, y0:y1, x0:x1] = int(c)
    return LabelVolume(data, TARGET_SPACING)


def fetal_left_cow() -> LabelVolume:
    """L-PCA pulled 4 voxels (1.41 mm) away from BA; still fed by L-Pcom."""
    layout = dict(COMPLETE_COW_LAYOUT)
    layout[CowClass.L_PCA] = (36, 40, 16, 32)
    return complete_cow(layout)


def split_pcom_pair() -> tuple[LabelVolume, LabelVolume]:
    """(prediction, ground truth): the prediction's L-Pcom has a 2-slice break."""
    gt = complete_cow()
    pred = np.array(gt.data)
    pred[SLAB, 26:28, 16:20] = 0
    return gt.with_data(pred), gt


def thick_split_vessel(gap: int = 1, radius: int = 3, length: int = 120):
    """Cylinder along z broken by a ``gap``-slice cut; returns (broken, intact) masks."""
    size = 2 * radius + 5
    z, y, x = np.mgrid[: length + 10, :size, :size]
    c = size // 2
    intact = ((y - c) ** 2 + (x - c) ** 2 <= radius ** 2) & (z >= 5) & (z < length + 5)
    broken = intact.copy()
    mid = 5 + length // 2
    broken[mid:mid + gap] = False
    return broken, intact


def line_pair(len_a, len_b, gap, pad=3):
    """Two colinear 1-voxel tubes along z separated by ``gap`` empty voxels."""
    n = len_a + gap + len_b + 2 * pad
    m = np.zeros((n, 5, 5), dtype=bool)
    m[pad:pad + len_a, 2, 2] = True
    m[pad + len_a + gap:pad + len_a + gap + len_b, 2, 2] = True
    return m
