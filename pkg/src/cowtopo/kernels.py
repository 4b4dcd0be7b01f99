"""Connected components, exact anisotropic EDT, 3D thinning, and ball dilation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np
from scipy import ndimage as ndi

from .volume import Spacing

CONNECTIVITIES = (6, 18, 26)


def structure(conn: int) -> np.ndarray:
    """3x3x3 structuring element for 6-, 18- or 26-adjacency."""
    if conn not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be one of {CONNECTIVITIES}, got {conn}")
    return ndi.generate_binary_structure(3, {6: 1, 18: 2, 26: 3}[conn])


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Component id grid (0 = background), ids ordered by descending size.

    ``sizes[k]`` is the voxel count of component ``k + 1``.
    """

    labels: np.ndarray
    sizes: np.ndarray

    @property
    def num(self) -> int:
        return len(self.sizes)

    def component(self, k: int) -> np.ndarray:
        return self.labels == k


def connected_components(mask: np.ndarray, conn: int = 26) -> ComponentSet:
    """Label the maximal ``conn``-connected regions of ``mask``.

    Ids are dense and deterministic: larger components first, ties broken by
    the smallest linear voxel index.
    """
    mask = np.asarray(mask, dtype=bool)
    raw, num = ndi.label(mask, structure=structure(conn))
    if num == 0:
        return ComponentSet(np.zeros(mask.shape, dtype=np.int32), np.zeros(0, dtype=np.int64))
    flat = raw.ravel()
    sizes = np.bincount(flat, minlength=num + 1)[1:]
    ids, first = np.unique(flat, return_index=True)
    first_index = np.empty(num, dtype=np.int64)
    first_index[ids[ids > 0] - 1] = first[ids > 0]
    order = np.lexsort((first_index, -sizes))
    remap = np.zeros(num + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, num + 1, dtype=np.int32)
    return ComponentSet(remap[raw], sizes[order].astype(np.int64))


def largest_component(mask: np.ndarray, conn: int = 26) -> np.ndarray:
    cs = connected_components(mask, conn)
    if cs.num == 0:
        return np.zeros(np.shape(mask), dtype=bool)
    return cs.labels == 1


def count_components(mask: np.ndarray, conn: int = 26) -> int:
    return int(ndi.label(np.asarray(mask, dtype=bool), structure=structure(conn))[1])


def edt(reference: np.ndarray, spacing: Spacing | Iterable[float]) -> np.ndarray:
    """Exact Euclidean distance (mm) from every voxel to the nearest reference voxel."""
    reference = np.asarray(reference, dtype=bool)
    if not reference.any():
        raise ValueError("empty reference set")
    return ndi.distance_transform_edt(~reference, sampling=Spacing.of(spacing).as_tuple())


# --- thinning -----------------------------------------------------------------

def _neighbourhood_tables():
    offsets = [(dz, dy, dx) for dz in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    index = {o: i for i, o in enumerate(offsets)}
    center = index[(0, 0, 0)]
    n26 = np.zeros((27, 26), dtype=np.int64)
    n26_len = np.zeros(27, dtype=np.int64)
    n6 = np.zeros((27, 6), dtype=np.int64)
    n6_len = np.zeros(27, dtype=np.int64)
    for i, a in enumerate(offsets):
        for j, b in enumerate(offsets):
            if i == j or j == center:
                continue
            d = [abs(a[k] - b[k]) for k in range(3)]
            if max(d) == 1:
                n26[i, n26_len[i]] = j
                n26_len[i] += 1
                if sum(d) == 1:
                    n6[i, n6_len[i]] = j
                    n6_len[i] += 1
    in18 = np.array([sum(map(abs, o)) in (1, 2) for o in offsets])
    faces = np.array([index[o] for o in offsets if sum(map(abs, o)) == 1], dtype=np.int64)
    return n26, n26_len, n6, n6_len, in18, faces, center


_N26, _N26_LEN, _N6, _N6_LEN, _IN18, _FACES, _CENTER = _neighbourhood_tables()


@numba.njit(cache=True)
def _is_simple(nb, n26, n26_len, n6, n6_len, in18, faces, center):
    # Foreground: exactly one 26-component in N26*.  Background: exactly one
    # 6-component of the N18* background that touches a face neighbour.
    seen = np.zeros(27, dtype=np.bool_)
    stack = np.empty(27, dtype=np.int64)
    comps = 0
    for s in range(27):
        if s == center or not nb[s] or seen[s]:
            continue
        comps += 1
        if comps > 1:
            return False
        top = 0
        stack[0] = s
        seen[s] = True
        while top >= 0:
            v = stack[top]
            top -= 1
            for k in range(n26_len[v]):
                w = n26[v, k]
                if nb[w] and not seen[w]:
                    seen[w] = True
                    top += 1
                    stack[top] = w
    if comps != 1:
        return False
    seen[:] = False
    comps = 0
    for f in range(faces.shape[0]):
        s = faces[f]
        if nb[s] or seen[s]:
            continue
        comps += 1
        if comps > 1:
            return False
        top = 0
        stack[0] = s
        seen[s] = True
        while top >= 0:
            v = stack[top]
            top -= 1
            for k in range(n6_len[v]):
                w = n6[v, k]
                if in18[w] and not nb[w] and not seen[w]:
                    seen[w] = True
                    top += 1
                    stack[top] = w
    return comps == 1


@numba.njit(cache=True)
def _neighbourhood(img, z, y, x, nb):
    i = 0
    for dz in range(-1, 2):
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                nb[i] = img[z + dz, y + dy, x + dx]
                i += 1


@numba.njit(cache=True)
def _thin(img, one_sided, n26, n26_len, n6, n6_len, in18, faces, center):
    # img is zero-padded by one voxel; modified in place. With one_sided, a
    # voxel is a candidate only if its neighbour opposite the peel direction
    # is set, so one-voxel-thick layers are peeled by the other directions.
    dirs = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]])
    nb = np.zeros(27, dtype=np.bool_)
    nz, ny, nx = img.shape
    changed = True
    while changed:
        changed = False
        for d in range(6):
            ddz, ddy, ddx = dirs[d, 0], dirs[d, 1], dirs[d, 2]
            cand = []
            for z in range(1, nz - 1):
                for y in range(1, ny - 1):
                    for x in range(1, nx - 1):
                        if not img[z, y, x] or img[z + ddz, y + ddy, x + ddx]:
                            continue
                        if one_sided and not img[z - ddz, y - ddy, x - ddx]:
                            continue
                        _neighbourhood(img, z, y, x, nb)
                        count = 0
                        for k in range(27):
                            if nb[k]:
                                count += 1
                        if count - 1 <= 1:
                            continue
                        if _is_simple(nb, n26, n26_len, n6, n6_len, in18, faces, center):
                            cand.append((z, y, x))
            for z, y, x in cand:
                _neighbourhood(img, z, y, x, nb)
                count = 0
                for k in range(27):
                    if nb[k]:
                        count += 1
                if count - 1 <= 1:
                    continue
                if _is_simple(nb, n26, n26_len, n6, n6_len, in18, faces, center):
                    img[z, y, x] = False
                    changed = True


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Centerline grid plus endpoint coordinates (rows of (z, y, x))."""

    mask: np.ndarray
    endpoints: np.ndarray


def neighbour_count(mask: np.ndarray) -> np.ndarray:
    """Number of set 26-neighbours of every voxel (zero outside the grid)."""
    m = np.asarray(mask, dtype=np.int32)
    return ndi.convolve(m, np.ones((3, 3, 3), dtype=np.int32), mode="constant") - m


def endpoints(skel: np.ndarray) -> np.ndarray:
    """Skeleton voxels with at most one 26-neighbour, in linear-index order."""
    skel = np.asarray(skel, dtype=bool)
    return np.argwhere(skel & (neighbour_count(skel) <= 1))


def thin(mask: np.ndarray) -> np.ndarray:
    """Topology-preserving curve thinning.

    Border voxels are peeled in the fixed direction order -z, +z, -y, +y, -x,
    +x. Within a sub-iteration, candidates are collected in linear-index order
    and deleted one at a time after re-checking that each is still simple, so
    every deletion preserves topology. Voxels with at most one 26-neighbour
    are curve ends and are never deleted.

    The first phase only peels voxels that are border on one side of the
    current direction, which keeps the result centered; the second phase
    drops that restriction to finish residual diagonal sheets.
    """
    mask = np.asarray(mask, dtype=bool)
    img = np.pad(mask, 1)
    for one_sided in (True, False):
        _thin(img, one_sided, _N26, _N26_LEN, _N6, _N6_LEN, _IN18, _FACES, _CENTER)
    return img[1:-1, 1:-1, 1:-1].copy()


def skeletonize(mask: np.ndarray) -> Skeleton:
    skel = thin(mask)
    return Skeleton(skel, endpoints(skel))


def ball(radius: int) -> np.ndarray:
    """Voxels within Euclidean distance ``radius`` of the center."""
    r = int(radius)
    g = np.mgrid[-r:r + 1, -r:r + 1, -r:r + 1]
    return (g ** 2).sum(axis=0) <= r * r


def dilate(mask: np.ndarray, radius_vox: int) -> np.ndarray:
    if radius_vox < 0:
        raise ValueError("dilation radius must be >= 0")
    mask = np.asarray(mask, dtype=bool)
    if radius_vox == 0 or not mask.any():
        return mask.copy()
    return ndi.binary_dilation(mask, structure=ball(radius_vox))


def component_stats(mask: np.ndarray, conn: int = 26) -> dict:
    """JSON-ready component and skeleton summary of a binary mask."""
    cs = connected_components(mask, conn)
    sk = skeletonize(mask)
    return {
        "connectivity": conn,
        "num_components": cs.num,
        "component_sizes": [int(s) for s in cs.sizes],
        "foreground_voxels": int(np.count_nonzero(mask)),
        "skeleton_voxels": int(np.count_nonzero(sk.mask)),
        "num_endpoints": int(len(sk.endpoints)),
    }
