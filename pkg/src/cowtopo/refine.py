"""Rule-based topological refinement of individual vessel classes.

A class that breaks into two meaningful fragments is bridged between its
closest skeleton endpoints when they are near enough; otherwise only the
largest fragment survives, and a class made only of tiny fragments is
removed. More than two fragments are first reduced to the two largest.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .kernels import connected_components, count_components, dilate, skeletonize
from .volume import CowClass, LabelVolume, Spacing, ValidationError

UNCHANGED = "unchanged"
BRIDGED = "bridged"
KEPT_LARGEST = "kept-largest"
ZEROED = "zeroed"
REDUCED = "reduced-then-"

DEFAULT_REFINE_CLASSES = (CowClass.ACOM, CowClass.R_PCOM, CowClass.L_PCOM)


@dataclass(frozen=True)
class RefineConfig:
    t_com: int = 20
    t_dis: float = 10.0
    t_dis_unit: str = "voxel"
    classes_to_refine: tuple[CowClass, ...] = DEFAULT_REFINE_CLASSES
    bridge_dilation_radius: int = 1
    connectivity: int = 26
    bridge_mode: str = "line"
    spline_tail: int = 5

    def __post_init__(self):
        object.__setattr__(self, "classes_to_refine",
                           tuple(CowClass.parse(c) for c in self.classes_to_refine))
        if self.t_com < 1:
            raise ValidationError("t_com must be >= 1")
        if not self.t_dis > 0:
            raise ValidationError("t_dis must be positive")
        if self.t_dis_unit not in ("voxel", "mm"):
            raise ValidationError("t_dis_unit must be 'voxel' or 'mm'")
        if self.bridge_mode not in ("line", "spline"):
            raise ValidationError("bridge_mode must be 'line' or 'spline'")
        if self.bridge_dilation_radius < 0:
            raise ValidationError("bridge_dilation_radius must be >= 0")
        if self.connectivity not in (6, 18, 26):
            raise ValidationError("connectivity must be 6, 18 or 26")

    def to_dict(self) -> dict:
        return {
            "t_com": self.t_com,
            "t_dis": self.t_dis,
            "t_dis_unit": self.t_dis_unit,
            "classes_to_refine": [c.label for c in self.classes_to_refine],
            "bridge_dilation_radius": self.bridge_dilation_radius,
            "connectivity": self.connectivity,
            "bridge_mode": self.bridge_mode,
            "spline_tail": self.spline_tail,
        }


@dataclass
class RefineEntry:
    action: str
    components_before: int
    components_after: int
    voxels_added: int = 0
    voxels_removed: int = 0
    endpoints: list | None = None
    endpoint_distance: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class RefineReport:
    classes: dict[str, RefineEntry] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {name: entry.to_dict() for name, entry in self.classes.items()}


def rasterize_segment(a, b) -> np.ndarray:
    """26-connected voxel path from ``a`` to ``b`` inclusive."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = int(np.max(np.abs(np.rint(b) - np.rint(a))))
    if n == 0:
        return np.rint(a).astype(int)[None]
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return np.rint(a + t * (b - a)).astype(int)


def _skeleton_tail(skel: np.ndarray, start, k: int) -> np.ndarray:
    """First ``k`` skeleton voxels reached by 26-BFS from ``start``."""
    start = tuple(int(v) for v in start)
    seen = {start}
    order = [start]
    queue = deque([start])
    shape = skel.shape
    while queue and len(order) < k:
        z, y, x = queue.popleft()
        for dz in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    q = (z + dz, y + dy, x + dx)
                    if q in seen or not all(0 <= q[i] < shape[i] for i in range(3)):
                        continue
                    if skel[q]:
                        seen.add(q)
                        order.append(q)
                        queue.append(q)
    return np.array(order[:k], dtype=float)


def _outward(tail: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    if len(tail) > 1:
        d = tail[0] - tail[1:].mean(axis=0)
        n = np.linalg.norm(d)
        if n > 0:
            return d / n
    n = np.linalg.norm(fallback)
    return fallback / n if n > 0 else fallback


def spline_path(p0, p1, skel0, skel1, k: int, shape) -> np.ndarray:
    """Cubic Hermite path leaving ``p0`` along skeleton ``skel0``'s direction and
    entering ``p1`` against ``skel1``'s direction."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    chord = p1 - p0
    length = float(np.linalg.norm(chord))
    if length == 0:
        return p0.astype(int)[None]
    m0 = length * _outward(_skeleton_tail(skel0, p0, k), chord)
    m1 = -length * _outward(_skeleton_tail(skel1, p1, k), -chord)
    t = np.linspace(0.0, 1.0, int(math.ceil(4 * length)) + 2)[:, None]
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    pts = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
    pts = np.clip(np.rint(pts), 0, np.array(shape) - 1)
    segments = [rasterize_segment(a, b) for a, b in zip(pts[:-1], pts[1:])]
    return np.concatenate(segments, axis=0)


def closest_endpoints(comp_a: np.ndarray, comp_b: np.ndarray, scale=(1.0, 1.0, 1.0)):
    """Closest pair of skeleton endpoints, one from each component.

    A skeleton without endpoints (a loop) offers all its voxels. Returns
    (point_a, point_b, distance, skel_a, skel_b); the first minimal pair in
    linear-index order wins ties.
    """
    sk_a, sk_b = skeletonize(comp_a), skeletonize(comp_b)
    cand_a = sk_a.endpoints if len(sk_a.endpoints) else np.argwhere(sk_a.mask)
    cand_b = sk_b.endpoints if len(sk_b.endpoints) else np.argwhere(sk_b.mask)
    scale = np.asarray(scale, dtype=float)
    diff = (cand_a[:, None, :] - cand_b[None, :, :]) * scale
    dist = np.sqrt((diff**2).sum(axis=-1))
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return cand_a[i], cand_b[j], float(dist[i, j]), sk_a.mask, sk_b.mask


def refine_class(mask: np.ndarray, cfg: RefineConfig = RefineConfig(), spacing=None,
                 blocked: np.ndarray | None = None) -> tuple[np.ndarray, RefineEntry]:
    """Refine one binary class mask. ``blocked`` voxels are never bridged into."""
    mask = np.asarray(mask, dtype=bool)
    conn = cfg.connectivity
    cs = connected_components(mask, conn)
    num = cs.num
    if num <= 1:
        return mask.copy(), RefineEntry(UNCHANGED, num, num)

    prefix = REDUCED if num > 2 else ""
    first, second = cs.labels == 1, cs.labels == 2
    work = first | second
    big_first, big_second = cs.sizes[0] >= cfg.t_com, cs.sizes[1] >= cfg.t_com

    def finish(out, action, **extra):
        entry = RefineEntry(
            prefix + action, num, count_components(out, conn),
            voxels_added=int(np.count_nonzero(out & ~mask)),
            voxels_removed=int(np.count_nonzero(mask & ~out)),
            **extra,
        )
        return out, entry

    if not big_first and not big_second:
        return finish(np.zeros_like(mask), ZEROED)
    if not big_second:
        return finish(first, KEPT_LARGEST)

    if cfg.t_dis_unit == "mm" and spacing is None:
        raise ValidationError("t_dis in mm needs the voxel spacing")
    scale = Spacing.of(spacing).as_tuple() if cfg.t_dis_unit == "mm" else (1.0, 1.0, 1.0)
    pa, pb, dist, sk_a, sk_b = closest_endpoints(first, second, scale)
    info = {"endpoints": [pa.tolist(), pb.tolist()], "endpoint_distance": dist}
    if dist > cfg.t_dis:
        return finish(first, KEPT_LARGEST, **info)

    if cfg.bridge_mode == "spline":
        path = spline_path(pa, pb, sk_a, sk_b, cfg.spline_tail, mask.shape)
    else:
        path = rasterize_segment(pa, pb)
    bridge = np.zeros_like(mask)
    bridge[tuple(path.T)] = True
    bridge = dilate(bridge, cfg.bridge_dilation_radius)
    if blocked is not None:
        bridge &= ~np.asarray(blocked, dtype=bool)
    out = work | bridge
    if count_components(out, conn) != 1:
        return finish(first, KEPT_LARGEST, **info)
    return finish(out, BRIDGED, **info)


def refine_volume(lbl: LabelVolume, cfg: RefineConfig = RefineConfig()) -> tuple[LabelVolume, RefineReport]:
    """Refine each configured class in class-id order; other classes are untouched.

    Bridges only claim background voxels, so class masks stay disjoint.
    """
    data = np.array(lbl.data)
    report = RefineReport()
    for c in sorted(cfg.classes_to_refine, key=lbl.class_map.id_of):
        cid = lbl.class_map.id_of(c)
        mask = data == cid
        blocked = (data != 0) & ~mask
        out, entry = refine_class(mask, cfg, lbl.spacing, blocked)
        data[mask & ~out] = 0
        data[out & ~mask] = cid
        report.classes[c.label] = entry
    return lbl.with_data(data), report
