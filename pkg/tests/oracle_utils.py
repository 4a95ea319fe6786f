"""Independent oracles used by the tests: sampling/rasterization-based geometry
checks and an exhaustive gated-matching optimizer. These deliberately avoid the
polygon-clipping and Hungarian code paths they verify."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from motrack.geometry import Box2D, Box3D


def iou_2d_monte_carlo(a: Box2D, b: Box2D, n: int = 200_000, seed: int = 0) -> float:
    """IoU estimated by uniform sampling over the joint bounding box."""
    rng = np.random.default_rng(seed)
    xmin, xmax = min(a.x1, b.x1), max(a.x2, b.x2)
    ymin, ymax = min(a.y1, b.y1), max(a.y2, b.y2)
    xs = rng.uniform(xmin, xmax, n)
    ys = rng.uniform(ymin, ymax, n)
    in_a = (xs >= a.x1) & (xs <= a.x2) & (ys >= a.y1) & (ys <= a.y2)
    in_b = (xs >= b.x1) & (xs <= b.x2) & (ys >= b.y1) & (ys <= b.y2)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def _footprint_mask(box: Box3D, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Point-in-rotated-rectangle test in the box's local frame."""
    dx = xs - box.x
    dy = ys - box.y
    c, s = np.cos(box.theta), np.sin(box.theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= box.l / 2.0) & (np.abs(v) <= box.w / 2.0)


def giou_3d_voxel(a: Box3D, b: Box3D, cell: float = 0.02) -> float:
    """GIoU with footprint areas measured on a raster grid at the given pitch.

    The vertical direction is axis-aligned for both boxes, so the z overlap is
    exact interval arithmetic; the rotated-footprint areas (the part the
    clipping code computes) come from counting grid-cell centers.
    """
    corners = np.vstack(
        [np.asarray(box.bev_corners()) for box in (a, b)]
    )
    xmin, ymin = corners.min(axis=0) - cell
    xmax, ymax = corners.max(axis=0) + cell
    gx = np.arange(xmin + cell / 2.0, xmax, cell)
    gy = np.arange(ymin + cell / 2.0, ymax, cell)
    xs, ys = np.meshgrid(gx, gy, indexing="ij")
    in_a = _footprint_mask(a, xs, ys)
    in_b = _footprint_mask(b, xs, ys)
    cell_area = cell * cell
    area_a = np.count_nonzero(in_a) * cell_area
    area_b = np.count_nonzero(in_b) * cell_area
    inter_area = np.count_nonzero(in_a & in_b) * cell_area

    za0, za1 = a.z_interval
    zb0, zb1 = b.z_interval
    overlap_h = max(0.0, min(za1, zb1) - max(za0, zb0))
    inter = inter_area * overlap_h
    union = area_a * a.h + area_b * b.h - inter

    spans = corners.max(axis=0) - corners.min(axis=0)
    enclosing = spans[0] * spans[1] * (max(za1, zb1) - min(za0, zb0))
    return inter / union - (enclosing - union) / enclosing


def giou_3d_axis_aligned(a: Box3D, b: Box3D) -> float:
    """Closed form for yaw-free boxes: rectangle overlap and an axis-aligned
    enclosing volume."""
    assert a.theta == 0.0 and b.theta == 0.0
    ix = max(0.0, min(a.x + a.l / 2, b.x + b.l / 2) - max(a.x - a.l / 2, b.x - b.l / 2))
    iy = max(0.0, min(a.y + a.w / 2, b.y + b.w / 2) - max(a.y - a.w / 2, b.y - b.w / 2))
    iz = max(0.0, min(a.z + a.h / 2, b.z + b.h / 2) - max(a.z - a.h / 2, b.z - b.h / 2))
    inter = ix * iy * iz
    union = a.volume + b.volume - inter
    cx = max(a.x + a.l / 2, b.x + b.l / 2) - min(a.x - a.l / 2, b.x - b.l / 2)
    cy = max(a.y + a.w / 2, b.y + b.w / 2) - min(a.y - a.w / 2, b.y - b.w / 2)
    cz = max(a.z + a.h / 2, b.z + b.h / 2) - min(a.z - a.h / 2, b.z - b.h / 2)
    enclosing = cx * cy * cz
    return inter / union - (enclosing - union) / enclosing


def clear_counts_reference(gt, pred, threshold: float = 0.5):
    """From-scratch CLEAR counter for 2D outputs: persistence plus exhaustive
    optimal per-frame matching. Returns (mota, fp, fn, ids)."""
    from motrack.geometry import iou_2d

    gt_frames, pred_frames = gt.frames(), pred.frames()
    fp = fn = ids = 0
    persisting: dict[int, int] = {}
    last: dict[int, int] = {}
    for frame in sorted(set(gt_frames) | set(pred_frames)):
        g = gt_frames.get(frame, [])
        p = pred_frames.get(frame, [])
        matches: dict[int, int] = {}
        used: set[int] = set()
        pid_idx = {rec.track_id: j for j, rec in enumerate(p)}
        for i, rec in enumerate(g):
            j = pid_idx.get(persisting.get(rec.track_id))
            if j is not None and j not in used and iou_2d(rec.box, p[j].box) >= threshold:
                matches[i] = j
                used.add(j)

        rows = [i for i in range(len(g)) if i not in matches]
        cols = frozenset(j for j in range(len(p)) if j not in used)
        best = (0.0, ())

        def search(k, free, total, chosen):
            nonlocal best
            if total > best[0] + 1e-15:
                best = (total, tuple(chosen))
            if k == len(rows):
                return
            search(k + 1, free, total, chosen)
            for j in free:
                value = iou_2d(g[rows[k]].box, p[j].box)
                if value >= threshold:
                    chosen.append((rows[k], j))
                    search(k + 1, free - {j}, total + value, chosen)
                    chosen.pop()

        search(0, cols, 0.0, [])
        matches.update(best[1])
        for i, j in matches.items():
            gid, pid = g[i].track_id, p[j].track_id
            if gid in last and last[gid] != pid:
                ids += 1
            last[gid] = pid
        fp += len(p) - len(matches)
        fn += len(g) - len(matches)
        persisting = {g[i].track_id: p[j].track_id for i, j in matches.items()}

    total_gt = len(gt.records)
    mota = 1.0 - (ids + fp + fn) / total_gt if total_gt else float("nan")
    return mota, fp, fn, ids


def idf1_reference(gt, pred, threshold: float = 0.5) -> float:
    """IDF1 by enumerating every one-to-one trajectory mapping (small inputs)."""
    from itertools import permutations

    from motrack.geometry import iou_2d

    gt_traj, pred_traj = gt.trajectories(), pred.trajectories()
    if not gt_traj or not pred_traj:
        return 0.0
    gt_ids, pred_ids = sorted(gt_traj), sorted(pred_traj)
    overlap = {}
    for gid in gt_ids:
        for pid in pred_ids:
            shared = gt_traj[gid].keys() & pred_traj[pid].keys()
            overlap[(gid, pid)] = sum(
                1 for f in shared
                if iou_2d(gt_traj[gid][f].box, pred_traj[pid][f].box) >= threshold
            )
    short, long_, flip = (gt_ids, pred_ids, False) if len(gt_ids) <= len(pred_ids) \
        else (pred_ids, gt_ids, True)
    best = 0
    for perm in permutations(long_, len(short)):
        total = sum(
            overlap[(a, b)] if not flip else overlap[(b, a)]
            for a, b in zip(short, perm)
        )
        best = max(best, total)
    return 2.0 * best / (2.0 * best + (len(pred.records) - best) + (len(gt.records) - best))


def best_gated_matching(values: np.ndarray, gate) -> float:
    """Exhaustive maximum total similarity over gated partial matchings.

    Complete search (memoized over column bitmasks), independent of the
    Hungarian solver. Leaving a pair unmatched contributes zero.
    """
    values = np.asarray(values, dtype=float)
    n_rows, n_cols = values.shape
    gate_arr = np.broadcast_to(np.asarray(gate, dtype=float), values.shape)
    admissible = values >= gate_arr

    @lru_cache(maxsize=None)
    def best(row: int, free_cols: int) -> float:
        if row == n_rows:
            return 0.0
        result = best(row + 1, free_cols)
        for col in range(n_cols):
            if free_cols & (1 << col) and admissible[row, col]:
                candidate = values[row, col] + best(row + 1, free_cols & ~(1 << col))
                if candidate > result:
                    result = candidate
        return result

    try:
        return best(0, (1 << n_cols) - 1)
    finally:
        best.cache_clear()
