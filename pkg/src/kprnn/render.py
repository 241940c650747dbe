"""Stick-figure rasterization of BODY_25 poses.

Limbs are drawn as colored line segments (one fixed palette entry per
limb), then joint circles on top; a joint or limb is only drawn when the
keypoints involved were detected (c > 0).  Raw-pixel input is mapped
onto the canvas preserving aspect ratio (letterboxed) by default;
normalized input fills the canvas since its source aspect is unknown.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .errors import DataError
from .pose import NORMALIZED, RAW_PIXELS, SPACES, PoseFrame, PoseSequence

# BODY_25 limb connectivity (joint index pairs), fixed and normative for
# this renderer so output images are reproducible.
LIMB_PAIRS = (
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7),
    (8, 9), (9, 10), (10, 11), (8, 12), (12, 13), (13, 14),
    (1, 0), (0, 15), (15, 17), (0, 16), (16, 18),
    (14, 19), (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
)

# One color per limb, OpenPose-style hue wheel.
LIMB_PALETTE = (
    (255, 0, 85), (255, 0, 0), (255, 85, 0), (255, 170, 0),
    (255, 255, 0), (170, 255, 0), (85, 255, 0), (0, 255, 0),
    (0, 255, 85), (0, 255, 170), (0, 255, 255), (0, 170, 255),
    (0, 85, 255), (0, 0, 255), (85, 0, 255), (170, 0, 255),
    (255, 0, 255), (255, 0, 170), (128, 128, 0), (0, 128, 128),
    (128, 0, 128), (128, 128, 255), (255, 128, 128), (128, 255, 128),
)


def _joint_colors(palette) -> tuple:
    """Joint j takes the color of the first limb that touches it."""
    colors = [None] * 25
    for limb, (a, b) in enumerate(LIMB_PAIRS):
        for j in (a, b):
            if colors[j] is None:
                colors[j] = palette[limb]
    return tuple(colors)


@dataclass(frozen=True)
class RenderStyle:
    width: int = 512
    height: int = 512
    background: tuple = (0, 0, 0)
    limb_thickness: int = 4
    joint_radius: int = 4
    palette: tuple = LIMB_PALETTE
    letterbox: bool = True

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"canvas must be positive, got {self.width}x{self.height}")
        if self.limb_thickness < 1:
            raise ValueError("limb_thickness must be >= 1")
        if self.joint_radius < 0:
            raise ValueError("joint_radius must be >= 0")
        if len(self.palette) != len(LIMB_PAIRS):
            raise ValueError(
                f"palette needs {len(LIMB_PAIRS)} colors, got {len(self.palette)}"
            )
        if len(self.background) != 3:
            raise ValueError("background must be an (r, g, b) triple")


DEFAULT_STYLE = RenderStyle()


def _mapper(space: str, source_size, style: RenderStyle):
    if space not in SPACES:
        raise ValueError(f"unknown coordinate space {space!r}")
    if space == NORMALIZED:
        return lambda x, y: (x * style.width, y * style.height)
    if source_size is None:
        raise ValueError("raw-pixel rendering needs the source (width, height)")
    sw, sh = float(source_size[0]), float(source_size[1])
    if sw <= 0 or sh <= 0:
        raise ValueError(f"source dimensions must be positive, got {source_size}")
    if style.letterbox:
        s = min(style.width / sw, style.height / sh)
        ox = (style.width - sw * s) / 2.0
        oy = (style.height - sh * s) / 2.0
        return lambda x, y: (ox + x * s, oy + y * s)
    return lambda x, y: (x * style.width / sw, y * style.height / sh)


def render_frame(frame: PoseFrame, space: str = NORMALIZED, source_size=None,
                 style: RenderStyle = DEFAULT_STYLE) -> np.ndarray:
    """Rasterize one pose; returns an (H, W, 3) uint8 array."""
    to_px = _mapper(space, source_size, style)
    img = Image.new("RGB", (style.width, style.height), tuple(style.background))
    draw = ImageDraw.Draw(img)

    pts = [None] * 25
    for j, kp in enumerate(frame.keypoints):
        if not kp.missing:
            pts[j] = to_px(kp.x, kp.y)

    for limb, (a, b) in enumerate(LIMB_PAIRS):
        pa, pb = pts[a], pts[b]
        if pa is None or pb is None:
            continue
        color = tuple(style.palette[limb])
        if pa == pb:
            # Zero-length limb: a single dot instead of a degenerate line.
            r = max(1, style.limb_thickness // 2)
            draw.ellipse([pa[0] - r, pa[1] - r, pa[0] + r, pa[1] + r], fill=color)
        else:
            draw.line([pa, pb], fill=color, width=style.limb_thickness)

    joint_colors = _joint_colors(style.palette)
    r = style.joint_radius
    if r > 0:
        for j, p in enumerate(pts):
            if p is not None:
                draw.ellipse([p[0] - r, p[1] - r, p[0] + r, p[1] + r],
                             fill=tuple(joint_colors[j]))
    return np.array(img)


def frame_filename(frame_index: int) -> str:
    return f"frame_{frame_index:06d}.png"


def render_sequence(seq: PoseSequence, style: RenderStyle, out_dir,
                    overwrite: bool = False) -> list:
    """Render every frame to ``out_dir`` as frame_%06d.png.

    Existing conflicting files abort the run unless ``overwrite`` is set.
    Writes go through a temp file + rename so partial frames never appear
    under their final name.
    """
    os.makedirs(out_dir, exist_ok=True)
    names = [frame_filename(f.frame_index) for f in seq.frames]
    if not overwrite:
        clashes = [n for n in names if os.path.exists(os.path.join(out_dir, n))]
        if clashes:
            raise DataError(
                f"{out_dir} already contains {clashes[0]} "
                f"(+{len(clashes) - 1} more); pass overwrite to replace"
            )
    paths = []
    for frame, name in zip(seq.frames, names):
        arr = render_frame(frame, seq.space, (seq.width, seq.height), style)
        final = os.path.join(out_dir, name)
        tmp = os.path.join(out_dir, f".tmp-{name}")
        Image.fromarray(arr).save(tmp, format="PNG")
        os.replace(tmp, final)
        paths.append(final)
    return paths
