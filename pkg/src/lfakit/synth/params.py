"""Cassette scene description and ground-truth geometry.

The cassette lives in a local (u, v) frame centered on the body: u runs
along the cassette length, v across it. A rotation + mild perspective
homography places it on the canvas. Ground truth (class, membrane box,
line geometry) is computed analytically from the same scene parameters
the renderer consumes, so labels can never drift from pixels.

Line "intensity" is defined as the peak darkening of the most affected
color channel relative to the membrane background, before illumination
and noise. A line is visible when that contrast is at least
VISIBLE_THRESHOLD; the class rule is:

    Positive  control visible and test visible
    Negative  control visible, test not visible
    Invalid   control not visible (regardless of the test line)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ..labels import ClassLabel

VISIBLE_THRESHOLD = 0.08
FAINT_RANGE = (0.08, 0.2)


def classify_intensities(control: float, test: float) -> ClassLabel:
    if control >= VISIBLE_THRESHOLD:
        return ClassLabel.POSITIVE if test >= VISIBLE_THRESHOLD else ClassLabel.NEGATIVE
    return ClassLabel.INVALID


def is_faint(intensity: float) -> bool:
    return FAINT_RANGE[0] <= intensity <= FAINT_RANGE[1]


@dataclass(frozen=True)
class ArtifactSpec:
    """A surface defect: ink dot, smudge streak, or printed arrow."""
    kind: str          # "ink" | "smudge" | "arrow"
    u: float           # local coords (canvas coords for background marks)
    v: float
    size: float
    opacity: float
    angle: float = 0.0
    on_body: bool = True


@dataclass
class CassetteParams:
    canvas_w: int = 256
    canvas_h: int = 256
    center: tuple = (128.0, 128.0)
    body_len: float = 160.0
    body_h: float = 56.0
    corner_radius: float = 10.0
    body_color: tuple = (0.91, 0.91, 0.93)
    membrane_offset: float = -8.0   # u of membrane window center
    membrane_len: float = 68.0
    membrane_h: float = 26.0
    well_offset: float = 52.0
    well_radius: float = 11.0
    control_pos: float = -17.0      # line centers, u relative to membrane center
    test_pos: float = 17.0
    line_width: float = 4.0
    control_line_intensity: float = 0.8
    test_line_intensity: float = 0.0
    rotation_deg: float = 0.0
    perspective_x: float = 0.0
    perspective_y: float = 0.0
    illumination_gain: float = 1.0
    illum_gx: float = 0.0
    illum_gy: float = 0.0
    noise_sigma: float = 0.01
    artifacts: tuple = ()
    background_id: int = 0
    seed: int = 0

    def validate(self):
        for name in ("control_line_intensity", "test_line_intensity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.canvas_w < 8 or self.canvas_h < 8:
            raise ValueError("canvas too small")
        half_m = self.membrane_len / 2
        if abs(self.membrane_offset) + half_m > self.body_len / 2:
            raise ValueError("membrane window extends past the cassette body")
        if self.membrane_h > self.body_h:
            raise ValueError("membrane window taller than the cassette body")
        for pos in (self.control_pos, self.test_pos):
            if abs(pos) + self.line_width / 2 > half_m:
                raise ValueError("line position outside the membrane window")
        return self

    # -- placement geometry --------------------------------------------------

    def homography(self) -> np.ndarray:
        """Local (u, v) -> image (x, y) projective map."""
        th = math.radians(self.rotation_deg)
        c, s = math.cos(th), math.sin(th)
        cx, cy = self.center
        return np.array([
            [c + cx * self.perspective_x, -s + cx * self.perspective_y, cx],
            [s + cy * self.perspective_x, c + cy * self.perspective_y, cy],
            [self.perspective_x, self.perspective_y, 1.0],
        ])

    def map_points(self, pts) -> np.ndarray:
        """Apply the homography to (N, 2) local points."""
        pts = np.asarray(pts, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        proj = np.hstack([pts, ones]) @ self.homography().T
        return proj[:, :2] / proj[:, 2:3]

    def membrane_rect_local(self):
        """(u0, v0, w, h) of the membrane window in local coords."""
        return (self.membrane_offset - self.membrane_len / 2, -self.membrane_h / 2,
                self.membrane_len, self.membrane_h)

    def line_rect_local(self, which: str):
        """Line rectangle in membrane-local coords (origin at window top-left)."""
        pos = self.control_pos if which == "control" else self.test_pos
        x_in_membrane = pos + self.membrane_len / 2 - self.line_width / 2
        return (x_in_membrane, 0.0, self.line_width, self.membrane_h)

    def _rect_corners(self, u0, v0, w, h):
        return [(u0, v0), (u0 + w, v0), (u0 + w, v0 + h), (u0, v0 + h)]

    def membrane_polygon(self) -> np.ndarray:
        u0, v0, w, h = self.membrane_rect_local()
        return self.map_points(self._rect_corners(u0, v0, w, h))

    def line_polygon(self, which: str) -> np.ndarray:
        mu0, mv0, _, _ = self.membrane_rect_local()
        x0, y0, w, h = self.line_rect_local(which)
        return self.map_points(self._rect_corners(mu0 + x0, mv0 + y0, w, h))

    def body_polygon(self) -> np.ndarray:
        return self.map_points(self._rect_corners(
            -self.body_len / 2, -self.body_h / 2, self.body_len, self.body_h))


def polygon_bbox(poly) -> tuple:
    """Tight axis-aligned (x, y, w, h) of a polygon, float coords."""
    poly = np.asarray(poly)
    x0, y0 = poly.min(axis=0)
    x1, y1 = poly.max(axis=0)
    return (float(x0), float(y0), float(x1 - x0), float(y1 - y0))


@dataclass
class GroundTruth:
    label: ClassLabel
    membrane_bbox: tuple          # (x, y, w, h), image coords, floats
    membrane_polygon: np.ndarray  # (4, 2) image coords
    control_rect: tuple           # membrane-local (x, y, w, h)
    test_rect: tuple
    control_polygon: np.ndarray   # (4, 2) image coords
    test_polygon: np.ndarray
    control_intensity: float
    test_intensity: float

    @property
    def faint(self) -> bool:
        candidates = [i for i in (self.control_intensity, self.test_intensity)
                      if i >= VISIBLE_THRESHOLD]
        return any(is_faint(i) for i in candidates)


def ground_truth_for(params: CassetteParams) -> GroundTruth:
    poly = params.membrane_polygon()
    return GroundTruth(
        label=classify_intensities(params.control_line_intensity,
                                   params.test_line_intensity),
        membrane_bbox=polygon_bbox(poly),
        membrane_polygon=poly,
        control_rect=params.line_rect_local("control"),
        test_rect=params.line_rect_local("test"),
        control_polygon=params.line_polygon("control"),
        test_polygon=params.line_polygon("test"),
        control_intensity=params.control_line_intensity,
        test_intensity=params.test_line_intensity,
    )
