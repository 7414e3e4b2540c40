"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's morphology or metric code.
"""

from collections import deque
from itertools import product

import numpy as np


def neighbour_offsets(connectivity):
    offs = []
    for d in product((-1, 0, 1), repeat=3):
        nz = sum(1 for x in d if x)
        if nz == 0:
            continue
        if connectivity == 6 and nz > 1:
            continue
        if connectivity == 18 and nz > 2:
            continue
        offs.append(d)
    return offs


def flood_fill(mask, connectivity=26):
    """BFS component labelling; ids in raster order of each component's first voxel."""
    mask = np.asarray(mask, bool)
    fg = set(map(tuple, np.argwhere(mask)))
    ids = np.zeros(mask.shape, np.int32)
    offs = neighbour_offsets(connectivity)
    n = 0
    for start in sorted(fg):
        if ids[start]:
            continue
        n += 1
        ids[start] = n
        q = deque([start])
        while q:
            v = q.popleft()
            for d in offs:
                w = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
                if w in fg and not ids[w]:
                    ids[w] = n
                    q.append(w)
    sizes = [int((ids == i).sum()) for i in range(1, n + 1)]
    return ids, n, sizes


def chebyshev_dilate(mask, r):
    """Set every voxel within Chebyshev distance r of the foreground, via explicit shifts."""
    mask = np.asarray(mask, bool)
    out = np.zeros_like(mask)
    nx, ny, nz = mask.shape
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            for dz in range(-r, r + 1):
                src = mask[max(0, -dx):nx - max(0, dx), max(0, -dy):ny - max(0, dy), max(0, -dz):nz - max(0, dz)]
                out[max(0, dx):nx - max(0, -dx) or None, max(0, dy):ny - max(0, -dy) or None,
                    max(0, dz):nz - max(0, -dz) or None] |= src
    return out


def surface(mask):
    """Foreground voxels with a 6-neighbour outside the mask or the grid (explicit loop)."""
    mask = np.asarray(mask, bool)
    out = np.zeros_like(mask)
    shape = mask.shape
    for v in map(tuple, np.argwhere(mask)):
        for d in neighbour_offsets(6):
            w = tuple(a + b for a, b in zip(v, d))
            if any(c < 0 or c >= n for c, n in zip(w, shape)) or not mask[w]:
                out[v] = True
                break
    return out


def pairwise_min_dist(src_pts, dst_pts, spacing):
    """For each point in src, distance in mm to the nearest point of dst (all pairs)."""
    s = np.asarray(spacing, dtype=np.float64)
    out = np.empty(len(src_pts))
    dst = np.asarray(dst_pts)
    for i, p in enumerate(np.asarray(src_pts)):
        sq = np.zeros(len(dst))
        for ax in range(3):
            d = (dst[:, ax] - p[ax]) * float(s[ax])
            sq += d * d
        out[i] = np.sqrt(sq.min())
    return out


def brute_edt(mask, spacing):
    fg = np.argwhere(mask)
    allv = np.argwhere(np.ones(mask.shape, bool))
    return pairwise_min_dist(allv, fg, spacing).reshape(mask.shape)


def percentile_linear(values, q):
    """Linear-interpolation percentile written out by hand.

    The lerp is evaluated from the nearer endpoint (upper one when the
    fraction is >= 0.5), the same floating-point form numpy uses, so results
    agree bit-for-bit rather than to within an ulp.
    """
    v = sorted(float(x) for x in values)
    pos = (len(v) - 1) * (q / 100.0)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    frac = pos - lo
    diff = v[hi] - v[lo]
    if frac >= 0.5:
        return v[hi] - diff * (1.0 - frac)
    return v[lo] + diff * frac


def brute_surface_distances(a, b, spacing):
    sa, sb = np.argwhere(surface(a)), np.argwhere(surface(b))
    return np.concatenate([pairwise_min_dist(sa, sb, spacing), pairwise_min_dist(sb, sa, spacing)])


def brute_hd95(a, b, spacing):
    return percentile_linear(brute_surface_distances(a, b, spacing), 95)


def brute_dice(a, b):
    a = np.asarray(a, bool).ravel().tolist()
    b = np.asarray(b, bool).ravel().tolist()
    inter = sum(1 for x, y in zip(a, b) if x and y)
    total = sum(a) + sum(b)
    return 1.0 if total == 0 else 2.0 * inter / total


def brute_lesion_wise(gt, pred, spacing, radius=3, min_size=10, penalty=374.0, connectivity=26):
    """Reference lesion-wise Dice/HD95 following the documented procedure step by step."""
    gt_ids, n_gt, gt_sizes = flood_fill(gt, connectivity)
    kept = [i for i in range(1, n_gt + 1) if gt_sizes[i - 1] >= min_size]
    dil = {i: chebyshev_dilate(gt_ids == i, radius) if radius else gt_ids == i for i in kept}
    # merge lesions whose dilated footprints overlap (transitively)
    groups = [{i} for i in kept]
    merged = True
    while merged:
        merged = False
        for x in range(len(groups)):
            for y in range(x + 1, len(groups)):
                if any((dil[i] & dil[j]).any() for i in groups[x] for j in groups[y]):
                    groups[x] |= groups.pop(y)
                    merged = True
                    break
            if merged:
                break
    pred_ids, n_pred, _ = flood_fill(pred, connectivity)
    dices, hds, used = [], [], set()
    for g in sorted(groups, key=min):
        foot = np.zeros(gt.shape, bool)
        lesion = np.zeros(gt.shape, bool)
        for i in g:
            foot |= dil[i]
            lesion |= gt_ids == i
        hit = set(int(x) for x in np.unique(pred_ids[foot]) if x)
        if not hit:
            dices.append(0.0)
            hds.append(penalty)
            continue
        used |= hit
        p = np.isin(pred_ids, sorted(hit))
        dices.append(brute_dice(lesion, p))
        hds.append(brute_hd95(lesion, p, spacing))
    for pid in range(1, n_pred + 1):
        if pid not in used:
            dices.append(0.0)
            hds.append(penalty)
    if not dices:
        return 1.0, 0.0, 0
    return sum(dices) / len(dices), sum(hds) / len(hds), len(dices)


def naive_ssim(a, b, data_range, size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Literal sliding-window SSIM over every fully-contained 3D window."""
    x = np.arange(size) - (size - 1) / 2.0
    g1 = np.exp(-x * x / (2 * sigma * sigma))
    w = g1[:, None, None] * g1[None, :, None] * g1[None, None, :]
    w /= w.sum()
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    vals = []
    nx, ny, nz = a.shape
    for i in range(nx - size + 1):
        for j in range(ny - size + 1):
            for k in range(nz - size + 1):
                pa = a[i:i + size, j:j + size, k:k + size]
                pb = b[i:i + size, j:j + size, k:k + size]
                ma, mb = (w * pa).sum(), (w * pb).sum()
                va = (w * (pa - ma) ** 2).sum()
                vb = (w * (pb - mb) ** 2).sum()
                cov = (w * (pa - ma) * (pb - mb)).sum()
                vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def direct_dft3(x):
    """O(N^2) DFT via explicit Fourier matrices."""
    out = np.asarray(x, dtype=complex)
    for ax, n in enumerate(x.shape):
        k = np.arange(n)
        F = np.exp(-2j * np.pi * np.outer(k, k) / n)
        out = np.moveaxis(np.tensordot(F, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out
