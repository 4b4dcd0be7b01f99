"""Slow, independent reference implementations used only as test oracles."""

import itertools
import math
from collections import deque

import numpy as np


def neighbour_offsets(conn):
    out = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        s = sum(map(abs, d))
        if s == 0:
            continue
        if conn == 6 and s > 1 or conn == 18 and s > 2:
            continue
        out.append(d)
    return out


def flood_fill_labels(mask, conn=26):
    """BFS labelling; components numbered in order of their first linear index."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.zeros(mask.shape, dtype=np.int64)
    offs = neighbour_offsets(conn)
    shape = mask.shape
    n = 0
    for start in zip(*np.nonzero(mask)):
        if labels[start]:
            continue
        n += 1
        labels[start] = n
        queue = deque([start])
        while queue:
            z, y, x = queue.popleft()
            for dz, dy, dx in offs:
                q = (z + dz, y + dy, x + dx)
                if 0 <= q[0] < shape[0] and 0 <= q[1] < shape[1] and 0 <= q[2] < shape[2]:
                    if mask[q] and not labels[q]:
                        labels[q] = n
                        queue.append(q)
    return labels, n


def brute_force_edt(reference, spacing):
    ref = np.argwhere(reference) * np.asarray(spacing, dtype=float)
    pts = np.argwhere(np.ones(reference.shape, dtype=bool)) * np.asarray(spacing, dtype=float)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), 2048):
        chunk = pts[lo:lo + 2048]
        d2 = ((chunk[:, None, :] - ref[None, :, :]) ** 2).sum(axis=-1)
        out[lo:lo + 2048] = np.sqrt(d2.min(axis=1))
    return out.reshape(reference.shape)


def surface_by_neighbours(mask):
    """Voxels with a 6-neighbour outside the mask, by explicit shifted comparisons."""
    padded = np.pad(np.asarray(mask, dtype=bool), 1)
    core = padded[1:-1, 1:-1, 1:-1]
    interior = core.copy()
    for axis in range(3):
        for step in (-1, 1):
            interior &= np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
    return core & ~interior


def linear_percentile(values, q):
    v = sorted(values)
    rank = q / 100 * (len(v) - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (rank - lo) * (v[hi] - v[lo])


def brute_force_hd95(pred, gt, spacing):
    sp = np.argwhere(surface_by_neighbours(pred)) * np.asarray(spacing, dtype=float)
    sg = np.argwhere(surface_by_neighbours(gt)) * np.asarray(spacing, dtype=float)
    d = np.sqrt(((sp[:, None, :] - sg[None, :, :]) ** 2).sum(axis=-1))
    return linear_percentile(list(d.min(axis=1)) + list(d.min(axis=0)), 95)


def voxelize_box(box, shape):
    grid = np.zeros(shape, dtype=bool)
    grid[tuple(slice(a, b + 1) for a, b in zip(box.min, box.max))] = True
    return grid


def voxelize_shell(box, d, shape):
    """Box voxels lying within ``d`` voxels of a face, tested voxel by voxel."""
    grid = np.zeros(shape, dtype=bool)
    for z in range(box.min[0], box.max[0] + 1):
        for y in range(box.min[1], box.max[1] + 1):
            for x in range(box.min[2], box.max[2] + 1):
                depth = min(v - lo for v, lo in zip((z, y, x), box.min))
                depth = min(depth, min(hi - v for v, hi in zip((z, y, x), box.max)))
                grid[z, y, x] = depth < d
    return grid


def mask_iou(a, b):
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 1.0
