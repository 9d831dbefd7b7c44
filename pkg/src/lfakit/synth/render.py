"""Cassette image rendering.

Each pixel center is inverse-mapped through the placement homography
into the cassette's local frame and shaded from signed-distance
functions (1-pixel linear ramps stand in for antialiasing). Every
random draw comes from a generator seeded by params.seed in a fixed
order, so identical params give byte-identical images.
"""
from __future__ import annotations

import numpy as np

from .params import CassetteParams, GroundTruth, ground_truth_for

_MEMBRANE_COLOR = np.array([0.97, 0.95, 0.91], dtype=np.float32)
_LINE_TINT = np.array([0.14, 1.0, 0.76], dtype=np.float32)  # peak drop per unit intensity
_WELL_COLOR = np.array([0.74, 0.74, 0.78], dtype=np.float32)
_INK_COLOR = np.array([0.10, 0.10, 0.16], dtype=np.float32)
_GLYPH_DROP = 0.55


def _coverage(sdf):
    """Signed distance (px) -> opacity with a 1-px edge ramp."""
    return np.clip(0.5 - sdf, 0.0, 1.0)


def _rect_sdf(u, v, cu, cv, half_w, half_h):
    qx = np.abs(u - cu) - half_w
    qy = np.abs(v - cv) - half_h
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


def _rounded_rect_sdf(u, v, half_w, half_h, r):
    return _rect_sdf(u, v, 0.0, 0.0, half_w - r, half_h - r) - r


def _blend(img, color, alpha):
    img += alpha[..., None] * (color - img)


def _background(params: CassetteParams, xs, ys, rng) -> np.ndarray:
    h, w = ys.shape
    img = np.empty((h, w, 3), dtype=np.float32)
    nx = xs / params.canvas_w
    ny = ys / params.canvas_h
    if params.background_id == 1:
        base = np.array([0.52, 0.53, 0.56], dtype=np.float32)
        img[...] = base
        tone = np.zeros_like(nx, dtype=np.float32)
        for _ in range(3):
            fx, fy = rng.uniform(2.0, 7.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            tone += np.sin(2 * np.pi * (fx * nx + fy * ny) + phase).astype(np.float32)
        img += (tone * 0.02)[..., None]
    elif params.background_id == 2:
        base = np.array([0.46, 0.39, 0.33], dtype=np.float32)
        img[...] = base
        angle = rng.uniform(-0.4, 0.4)
        freq = rng.uniform(9.0, 16.0)
        phase = rng.uniform(0, 2 * np.pi)
        grain = np.sin(2 * np.pi * freq * (nx * np.cos(angle) + ny * np.sin(angle)) + phase)
        img += (grain * 0.025).astype(np.float32)[..., None]
    else:
        base = np.array([0.56, 0.57, 0.60], dtype=np.float32)
        img[...] = base
        rng.uniform(0, 1, size=3)  # keep the draw order aligned across texture ids
        img += (0.05 * (ny - 0.5))[..., None].astype(np.float32)
    return img


def _draw_artifacts(img, params, u, v, xs, ys, body_alpha):
    for a in params.artifacts:
        au, av = (u, v) if a.on_body else (xs, ys)
        du = au - a.u
        dv = av - a.v
        if a.kind == "ink":
            alpha = a.opacity * np.exp(-(du * du + dv * dv) / (2 * (a.size / 2) ** 2))
        elif a.kind == "smudge":
            ca, sa = np.cos(a.angle), np.sin(a.angle)
            lon = du * ca + dv * sa
            lat = -du * sa + dv * ca
            alpha = 0.6 * a.opacity * np.exp(
                -(lon ** 2) / (2 * (2.0 * a.size) ** 2) - (lat ** 2) / (2 * (a.size / 2) ** 2))
        else:  # arrow: solid triangle pointing along `angle`
            ca, sa = np.cos(a.angle), np.sin(a.angle)
            lon = du * ca + dv * sa
            lat = -du * sa + dv * ca
            s = a.size
            # tip at +s, base at -s spanning +/-0.7s
            inside = (lon <= s) & (lon >= -s) & (np.abs(lat) <= 0.7 * (s - lon) / 2)
            alpha = a.opacity * inside.astype(np.float32)
        alpha = alpha.astype(np.float32)
        if a.on_body:
            alpha = alpha * body_alpha
        _blend(img, _INK_COLOR, alpha)


def render_sample(params: CassetteParams):
    """Render one cassette photo; returns (uint8 RGB image, GroundTruth)."""
    params.validate()
    gt = ground_truth_for(params)
    w, h = params.canvas_w, params.canvas_h
    poly = gt.membrane_polygon
    if (poly[:, 0].min() < 0 or poly[:, 1].min() < 0
            or poly[:, 0].max() > w or poly[:, 1].max() > h):
        raise ValueError("membrane falls outside the canvas after placement")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(params.seed)))
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs + 0.5
    ys = ys + 0.5

    # invert the placement homography once for the whole pixel grid
    hinv = np.linalg.inv(params.homography())
    denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    u = ((hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / denom).astype(np.float32)
    v = ((hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / denom).astype(np.float32)

    img = _background(params, xs, ys, rng)

    body_sdf = _rounded_rect_sdf(u, v, params.body_len / 2, params.body_h / 2,
                                 params.corner_radius)
    body_alpha = _coverage(body_sdf)
    shade = (1.0 - 0.06 * (v / max(params.body_h, 1.0))).astype(np.float32)
    body_color = np.asarray(params.body_color, dtype=np.float32)
    _blend(img, body_color * shade[..., None], body_alpha)

    # membrane window with a 1.5 px recessed rim
    mem_sdf = _rect_sdf(u, v, params.membrane_offset, 0.0,
                        params.membrane_len / 2, params.membrane_h / 2)
    rim = _coverage(mem_sdf - 1.5) - _coverage(mem_sdf)
    _blend(img, body_color * 0.72, np.clip(rim, 0, 1) * body_alpha)
    mem_alpha = _coverage(mem_sdf) * body_alpha
    _blend(img, _MEMBRANE_COLOR, mem_alpha)

    for pos, intensity in ((params.control_pos, params.control_line_intensity),
                           (params.test_pos, params.test_line_intensity)):
        if intensity <= 0:
            continue
        du = np.abs(u - (params.membrane_offset + pos))
        profile = np.clip(params.line_width / 2 - du + 0.5, 0.0, 1.0)
        drop = (intensity * profile * mem_alpha)[..., None] * _LINE_TINT
        img -= drop
        np.clip(img, 0.0, 1.0, out=img)

    well_sdf = np.hypot(u - params.well_offset, v) - params.well_radius
    _blend(img, _WELL_COLOR, _coverage(well_sdf) * body_alpha)
    _blend(img, _WELL_COLOR * 0.85, _coverage(well_sdf + 3.0) * body_alpha)

    # printed C/T ticks above the window
    glyph_v = -(params.membrane_h / 2 + 5.0)
    for pos in (params.control_pos, params.test_pos):
        g_sdf = _rect_sdf(u, v, params.membrane_offset + pos, glyph_v, 1.2, 2.6)
        img -= (_GLYPH_DROP * _coverage(g_sdf) * body_alpha)[..., None]
    np.clip(img, 0.0, 1.0, out=img)

    _draw_artifacts(img, params, u, v, xs, ys, body_alpha)

    gain = params.illumination_gain * (
        1.0 + params.illum_gx * (2.0 * xs / w - 1.0)
        + params.illum_gy * (2.0 * ys / h - 1.0))
    img *= np.maximum(gain, 0.0)[..., None].astype(np.float32)

    if params.noise_sigma > 0:
        img += rng.standard_normal(img.shape, dtype=np.float32) * params.noise_sigma
    np.clip(img, 0.0, 1.0, out=img)
    return (img * 255.0 + 0.5).astype(np.uint8), gt
