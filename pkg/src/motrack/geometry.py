"""Box representations and the geometric similarity measures used for matching.

2D boxes are axis-aligned image rectangles (pixels); 3D boxes are yaw-rotated
cuboids in world coordinates (meters / radians). Overlap of rotated 3D boxes is
computed in bird's-eye view (BEV): footprint intersection via convex polygon
clipping, times the vertical interval overlap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# On-edge classification tolerance for polygon clipping.
_CLIP_EPS = 1e-9


class Metric(enum.Enum):
    """Similarity metric for a detection/tracklet box pair."""

    IOU_2D = "iou_2d"
    GIOU_3D = "giou_3d"


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image box given by top-left and bottom-right corners."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        # The ordering test also rejects NaN corners.
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(
                f"Box2D corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )
        if not (math.isfinite(self.x1) and math.isfinite(self.y1)
                and math.isfinite(self.x2) and math.isfinite(self.y2)):
            raise ValueError("Box2D coordinates must be finite")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box2D":
        """Build from top-left corner plus width/height."""
        return cls(x, y, x + w, y + h)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.width, self.height)


@dataclass(frozen=True)
class Box3D:
    """Yaw-rotated cuboid: world-frame center, heading, and dimensions.

    The yaw is normalized to (-pi, pi] on construction. Length runs along the
    heading, width across it, height vertically; (x, y, z) is the volumetric
    center.
    """

    x: float
    y: float
    z: float
    theta: float
    l: float
    w: float
    h: float

    def __post_init__(self):
        # The positivity test also rejects NaN dimensions.
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError(
                f"Box3D dimensions must be positive, got l={self.l}, w={self.w}, h={self.h}"
            )
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)
                and math.isfinite(self.theta) and math.isfinite(self.l)
                and math.isfinite(self.w) and math.isfinite(self.h)):
            raise ValueError("Box3D fields must be finite")
        if not -math.pi < self.theta <= math.pi:
            object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    @property
    def bev_area(self) -> float:
        return self.l * self.w

    @property
    def z_interval(self) -> tuple[float, float]:
        half = self.h / 2.0
        return (self.z - half, self.z + half)

    def bev_corners(self) -> np.ndarray:
        """Footprint corners as a (4, 2) array in counterclockwise order."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = self.l / 2.0, self.w / 2.0
        local = ((dx, dy), (-dx, dy), (-dx, -dy), (dx, -dy))
        return np.array(
            [(self.x + c * px - s * py, self.y + s * px + c * py) for px, py in local]
        )


Box = Union[Box2D, Box3D]


def _unchecked_box2d(x1: float, y1: float, x2: float, y2: float) -> Box2D:
    # Constructor bypass for coordinates produced by the filter math, which
    # are finite and ordered by construction (hot path).
    box = object.__new__(Box2D)
    object.__setattr__(box, "x1", x1)
    object.__setattr__(box, "y1", y1)
    object.__setattr__(box, "x2", x2)
    object.__setattr__(box, "y2", y2)
    return box


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise similarity scores between detections (rows) and tracklets (columns)."""

    values: np.ndarray
    row_ids: tuple[int, ...]
    col_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"similarity values must be 2-D, got shape {values.shape}")
        if values.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError(
                f"shape {values.shape} does not match id lists "
                f"({len(self.row_ids)} x {len(self.col_ids)})"
            )
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def iou_2d(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two 2D boxes; 0 for disjoint or zero-area unions."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _polygon_area(points: Sequence[tuple[float, float]]) -> float:
    if len(points) < 3:
        return 0.0
    total = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0


def _clip_convex(
    subject: list[tuple[float, float]], clip: list[tuple[float, float]]
) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex subject polygon by a CCW convex clip polygon."""
    output = subject
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        input_pts = output
        output = []
        px, py = input_pts[-1]
        prev_inside = ex * (py - ay) - ey * (px - ax) >= -_CLIP_EPS
        for cx, cy in input_pts:
            cur_inside = ex * (cy - ay) - ey * (cx - ax) >= -_CLIP_EPS
            if cur_inside != prev_inside:
                dx, dy = cx - px, cy - py
                denom = ex * dy - ey * dx
                if abs(denom) > _CLIP_EPS * _CLIP_EPS:
                    t = -(ex * (py - ay) - ey * (px - ax)) / denom
                    output.append((px + t * dx, py + t * dy))
                else:
                    # Grazing segment along the clip edge; keep the endpoint.
                    output.append((cx, cy))
            if cur_inside:
                output.append((cx, cy))
            px, py, prev_inside = cx, cy, cur_inside
    return output


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    """Intersection area of two yaw-rotated footprint rectangles, in square meters."""
    corners_a = [tuple(p) for p in a.bev_corners()]
    corners_b = [tuple(p) for p in b.bev_corners()]
    return _polygon_area(_clip_convex(corners_a, corners_b))


def giou_3d(a: Box3D, b: Box3D) -> float:
    """Generalized IoU of two 3D boxes, in (-1, 1].

    The overlap volume is the BEV footprint intersection times the vertical
    interval overlap. The enclosing region is the axis-aligned BEV bounding box
    of both footprints times the union of the vertical extents, so the result
    never exceeds the plain IoU and approaches -1 for far-separated boxes.
    """
    za0, za1 = a.z_interval
    zb0, zb1 = b.z_interval
    overlap_h = min(za1, zb1) - max(za0, zb0)
    inter = bev_intersection_area(a, b) * overlap_h if overlap_h > 0.0 else 0.0
    union = a.volume + b.volume - inter

    corners = np.vstack((a.bev_corners(), b.bev_corners()))
    spans = corners.max(axis=0) - corners.min(axis=0)
    enclosing = spans[0] * spans[1] * (max(za1, zb1) - min(za0, zb0))

    return inter / union - (enclosing - union) / enclosing


def _iou_matrix_2d(rows: Sequence[Box2D], cols: Sequence[Box2D]) -> np.ndarray:
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)))
    a = np.array([(box.x1, box.y1, box.x2, box.y2) for box in rows])
    b = np.array([(box.x1, box.y1, box.x2, box.y2) for box in cols])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0.0)


def _check_dimensionality(boxes: Sequence[Box], metric: Metric, kind: str) -> None:
    wanted = Box2D if metric is Metric.IOU_2D else Box3D
    for box in boxes:
        if not isinstance(box, wanted):
            raise ValueError(
                f"{metric.value} cannot score a {type(box).__name__} {kind} box"
            )


def similarity_matrix(
    detections: Sequence[Box],
    tracklets: Sequence[Box],
    metric: Metric,
    row_ids: Sequence[int] | None = None,
    col_ids: Sequence[int] | None = None,
) -> SimilarityMatrix:
    """Score every detection box against every tracklet box.

    Args:
        detections: boxes forming the matrix rows.
        tracklets: boxes forming the matrix columns.
        metric: which geometric similarity to apply; its dimensionality must
            match the boxes or a ValueError is raised.
        row_ids / col_ids: optional external indices; default to positions.

    Returns:
        An M x N SimilarityMatrix (possibly empty when either side is empty).
    """
    _check_dimensionality(detections, metric, "detection")
    _check_dimensionality(tracklets, metric, "tracklet")
    if metric is Metric.IOU_2D:
        values = _iou_matrix_2d(detections, tracklets)
    else:
        values = np.zeros((len(detections), len(tracklets)))
        for i, det in enumerate(detections):
            for j, trk in enumerate(tracklets):
                values[i, j] = giou_3d(det, trk)
    rows = tuple(row_ids) if row_ids is not None else tuple(range(len(detections)))
    cols = tuple(col_ids) if col_ids is not None else tuple(range(len(tracklets)))
    return SimilarityMatrix(values, rows, cols)
