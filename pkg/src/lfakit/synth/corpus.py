"""Seeded corpus generation: class-exact mixes, per-sample derived seeds."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..labels import ClassLabel
from ..manifest import record_for, write_manifest
from .params import ArtifactSpec, CassetteParams, VISIBLE_THRESHOLD
from .render import render_sample

_BODY_COLORS = ((0.91, 0.91, 0.93), (0.88, 0.91, 0.95), (0.93, 0.93, 0.90),
                (0.87, 0.92, 0.90))


@dataclass
class GenRanges:
    """Sampling ranges for scene parameters; (lo, hi) inclusive-ish."""
    canvas: tuple = (256, 256)
    body_len: tuple = (128.0, 196.0)
    body_aspect: tuple = (0.30, 0.40)       # body height / body length
    membrane_frac: tuple = (0.38, 0.48)     # membrane length / body length
    membrane_h_frac: tuple = (0.42, 0.55)   # membrane height / body height
    line_pos_frac: tuple = (0.20, 0.30)     # |line u| / membrane length
    line_width: tuple = (3.0, 5.0)
    rotation_deg: tuple = (-12.0, 12.0)
    perspective: tuple = (-4e-4, 4e-4)
    gain: tuple = (0.80, 1.15)
    gradient: tuple = (-0.12, 0.12)
    noise_sigma: tuple = (0.004, 0.02)
    visible_intensity: tuple = (0.25, 0.95)   # clearly developed lines
    test_intensity: tuple = (0.12, 0.95)      # positive test lines (incl. faint)
    ghost_intensity: tuple = (0.0, 0.04)      # sub-threshold residue
    edge_margin: tuple = (2.0, 2.0)

    def validate(self):
        for name, val in self.__dict__.items():
            if isinstance(val, tuple) and len(val) == 2 and val[0] > val[1]:
                raise ValueError(f"range {name} is empty: {val}")
        if self.test_intensity[0] < VISIBLE_THRESHOLD:
            raise ValueError("positive test-line intensities must be visible")
        if self.ghost_intensity[1] >= VISIBLE_THRESHOLD:
            raise ValueError("ghost intensities must stay below the visible threshold")
        return self


def exact_class_counts(n: int, class_mix) -> list:
    """Largest-remainder rounding of n * mix, ordered by class ordinal."""
    mix = np.asarray(class_mix, dtype=np.float64)
    if mix.shape != (3,) or (mix < 0).any():
        raise ValueError("class_mix must be three non-negative fractions")
    if abs(mix.sum() - 1.0) > 1e-9:
        raise ValueError("class_mix must sum to 1")
    raw = n * mix
    base = np.floor(raw).astype(int)
    short = n - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    for i in range(short):
        base[order[i]] += 1
    return [int(c) for c in base]


def _sample_artifacts(rng, body_len, body_h, mem_u0, mem_u1, mem_v) -> tuple:
    count = rng.choice(4, p=(0.45, 0.30, 0.15, 0.10))
    out = []
    for _ in range(count):
        kind = rng.choice(("ink", "smudge", "arrow"), p=(0.5, 0.3, 0.2))
        size = float(rng.uniform(2.5, 6.0))
        opacity = float(rng.uniform(0.3, 0.8))
        angle = float(rng.uniform(0, 2 * np.pi))
        for _try in range(12):
            u = float(rng.uniform(-body_len / 2 + 8, body_len / 2 - 8))
            v = float(rng.uniform(-body_h / 2 + 5, body_h / 2 - 5))
            # keep the membrane window itself clean so labels stay exact
            if not (mem_u0 - 4 - size < u < mem_u1 + 4 + size and abs(v) < mem_v + 4 + size):
                break
        else:
            continue
        out.append(ArtifactSpec(kind=kind, u=u, v=v, size=size,
                                opacity=opacity, angle=angle, on_body=True))
    return tuple(out)


def sample_params(label: ClassLabel, rng, ranges: GenRanges, seed: int,
                  edge_touch=False, invalid_with_test_line=False) -> CassetteParams:
    """Draw one scene consistent with `label` from the given ranges."""
    r = ranges
    body_len = rng.uniform(*r.body_len)
    body_h = body_len * rng.uniform(*r.body_aspect)
    mem_len = body_len * rng.uniform(*r.membrane_frac)
    mem_h = body_h * rng.uniform(*r.membrane_h_frac)
    mem_off = -body_len * rng.uniform(0.02, 0.08)
    line_pos = mem_len * rng.uniform(*r.line_pos_frac)
    rotation = rng.uniform(*r.rotation_deg)

    if label is ClassLabel.POSITIVE:
        control = rng.uniform(*r.visible_intensity)
        test = rng.uniform(*r.test_intensity)
    elif label is ClassLabel.NEGATIVE:
        control = rng.uniform(*r.visible_intensity)
        test = rng.uniform(*r.ghost_intensity) if rng.random() < 0.25 else 0.0
    else:  # invalid: control absent; optionally a developed test line
        control = rng.uniform(*r.ghost_intensity) if rng.random() < 0.25 else 0.0
        if invalid_with_test_line and rng.random() < 0.4:
            test = rng.uniform(*r.test_intensity)
        else:
            test = rng.uniform(*r.ghost_intensity) if rng.random() < 0.15 else 0.0

    canvas_w, canvas_h = r.canvas
    th = np.radians(rotation)
    hx = (body_len / 2) * abs(np.cos(th)) + (body_h / 2) * abs(np.sin(th)) + 3.0
    hy = (body_len / 2) * abs(np.sin(th)) + (body_h / 2) * abs(np.cos(th)) + 3.0
    if hx * 2 > canvas_w - 4 or hy * 2 > canvas_h - 4:
        raise ValueError("cassette ranges cannot fit the canvas")
    if edge_touch:
        side = rng.choice(("left", "right", "top", "bottom"))
        off = rng.uniform(0.0, 2.0)
        cx = rng.uniform(hx + 2, canvas_w - hx - 2)
        cy = rng.uniform(hy + 2, canvas_h - hy - 2)
        if side == "left":
            cx = hx + off
        elif side == "right":
            cx = canvas_w - hx - off
        elif side == "top":
            cy = hy + off
        else:
            cy = canvas_h - hy - off
    else:
        cx = rng.uniform(hx + 2, canvas_w - hx - 2)
        cy = rng.uniform(hy + 2, canvas_h - hy - 2)

    artifacts = _sample_artifacts(
        rng, body_len, body_h,
        mem_off - mem_len / 2, mem_off + mem_len / 2, mem_h / 2)

    return CassetteParams(
        canvas_w=canvas_w, canvas_h=canvas_h, center=(float(cx), float(cy)),
        body_len=float(body_len), body_h=float(body_h),
        corner_radius=float(min(12.0, body_h * 0.2)),
        body_color=_BODY_COLORS[int(rng.integers(len(_BODY_COLORS)))],
        membrane_offset=float(mem_off), membrane_len=float(mem_len),
        membrane_h=float(mem_h),
        well_offset=float(body_len * rng.uniform(0.28, 0.36)),
        well_radius=float(body_h * rng.uniform(0.16, 0.22)),
        control_pos=float(-line_pos), test_pos=float(line_pos),
        line_width=float(rng.uniform(*r.line_width)),
        control_line_intensity=float(control), test_line_intensity=float(test),
        rotation_deg=float(rotation),
        perspective_x=float(rng.uniform(*r.perspective)),
        perspective_y=float(rng.uniform(*r.perspective)),
        illumination_gain=float(rng.uniform(*r.gain)),
        illum_gx=float(rng.uniform(*r.gradient)),
        illum_gy=float(rng.uniform(*r.gradient)),
        noise_sigma=float(rng.uniform(*r.noise_sigma)),
        artifacts=artifacts,
        background_id=int(rng.integers(0, 3)),
        seed=int(seed),
    )


def generate_corpus(out_dir, n, class_mix=(1 / 3, 1 / 3, 1 / 3), ranges=None,
                    seed=0, edge_touch_fraction=0.0, invalid_with_test_line=False):
    """Render n samples with an exact class mix; returns the manifest records.

    Images land in out_dir/images/, the manifest in out_dir/manifest.jsonl.
    Every sample's scene is drawn from a seed derived from (seed, index),
    so corpora are reproducible byte for byte.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    ranges = (ranges or GenRanges()).validate()
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    counts = exact_class_counts(n, class_mix)
    labels = ([ClassLabel.POSITIVE] * counts[0] + [ClassLabel.NEGATIVE] * counts[1]
              + [ClassLabel.INVALID] * counts[2])
    top = np.random.SeedSequence(seed)
    order_rng = np.random.Generator(np.random.PCG64(top))
    order_rng.shuffle(labels)
    n_edge = int(round(edge_touch_fraction * n))

    records = []
    for i, (label, child) in enumerate(zip(labels, top.spawn(n))):
        rng = np.random.Generator(np.random.PCG64(child))
        sample_seed = int(rng.integers(0, 2 ** 62))
        params = sample_params(label, rng, ranges, sample_seed,
                               edge_touch=(i < n_edge),
                               invalid_with_test_line=invalid_with_test_line)
        img, gt = render_sample(params)
        assert gt.label is label
        rel = f"images/{i:05d}.png"
        Image.fromarray(img).save(out_dir / rel, format="PNG")
        records.append(record_for(rel, params, gt))
    write_manifest(out_dir / "manifest.jsonl", records)
    return records
