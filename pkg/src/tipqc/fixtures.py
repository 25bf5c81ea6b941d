"""Deterministic procedural renderer of pipette-tip images.

Stands in for the robot camera (REAL_STYLE) and the hosted image
generator (SYN_STYLE) at desk scale. The silhouette is a downward cone
(apex near the bottom of the frame) that widens into a vertical-walled
shaft exiting the top of the frame, with a liquid column inside and
optional air bubbles rendered as darker disks with a bright rim.

The two styles are intentionally different in measurable statistics
(background level, sensor noise, rim/glare intensity, vignette) so that
a classifier trained on one style degrades on the other.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image


class Style(str, Enum):
    REAL_STYLE = "REAL_STYLE"
    SYN_STYLE = "SYN_STYLE"


#: 10 px per mm at capture scale; bubble diameter 0.2-1.5 mm -> radius 1-8 px.
PX_PER_MM = 10
BUBBLE_RADIUS_RANGE = (1, 8)
BUBBLE_COUNT_RANGE = (1, 15)

PALETTE: dict[str, tuple[int, int, int]] = {
    "transparent": (205, 205, 205),
    "red": (200, 45, 45),
    "yellow": (210, 195, 60),
    "blue": (50, 60, 205),
    "green": (60, 185, 70),
}

# Style constants, calibrated so the cross-style domain gap is large
# enough for the mixing ablation while each style stays >=95% separable.
_STYLE = {
    Style.REAL_STYLE: dict(
        background=18.0,
        wall=205.0,
        empty=110.0,
        rim_gain=40.0,
        glare_gain=0.0,
        vignette=0.28,
        offset=0.0,
    ),
    Style.SYN_STYLE: dict(
        background=8.0,
        wall=232.0,
        empty=124.0,
        rim_gain=95.0,
        glare_gain=55.0,
        vignette=0.0,
        offset=12.0,
    ),
}


class FixtureGeometryError(ValueError):
    """Raised when a RenderSpec describes impossible geometry."""


@dataclass(frozen=True)
class RenderSpec:
    width_px: int = 600
    height_px: int = 1500
    style: Style = Style.REAL_STYLE
    liquid_color: tuple[int, int, int] = PALETTE["transparent"]
    level_pct: float = 60.0
    vertex_angle_deg: float = 30.0
    wall_offset_px: int = 8
    bubbles: tuple[tuple[int, int, int], ...] = ()
    noise_sigma: float = 5.0
    seed: int = 0

    def digest(self) -> str:
        payload = {
            "width_px": self.width_px,
            "height_px": self.height_px,
            "style": self.style.value,
            "liquid_color": list(self.liquid_color),
            "level_pct": self.level_pct,
            "vertex_angle_deg": self.vertex_angle_deg,
            "wall_offset_px": self.wall_offset_px,
            "bubbles": [list(b) for b in self.bubbles],
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class TipGeometry:
    """Derived silhouette geometry for a RenderSpec (y grows downward)."""

    apex_x: float
    apex_y: int
    half_angle_rad: float
    half_width_max: float
    surface_y: int  # first liquid row; > apex_y means no liquid

    def outer_half_width(self, y: np.ndarray | float):
        taper = np.tan(self.half_angle_rad) * (self.apex_y - np.asarray(y, dtype=float))
        return np.clip(np.minimum(taper, self.half_width_max), 0.0, None)


def geometry(spec: RenderSpec) -> TipGeometry:
    h, w = spec.height_px, spec.width_px
    apex_y = h - 1 - max(8, round(0.025 * h))
    half_width_max = round(0.19 * w)
    half_angle = math.radians(spec.vertex_angle_deg) / 2.0
    if spec.level_pct <= 0:
        surface_y = apex_y + 1
    else:
        surface_y = apex_y - int(round(spec.level_pct / 100.0 * apex_y))
    return TipGeometry(
        apex_x=(w - 1) / 2.0,
        apex_y=apex_y,
        half_angle_rad=half_angle,
        half_width_max=float(half_width_max),
        surface_y=surface_y,
    )


def _row_profiles(spec: RenderSpec):
    """Per-row outer and interior half-widths, -1 below the apex."""
    geo = geometry(spec)
    y = np.arange(spec.height_px, dtype=np.float64)
    hw = geo.outer_half_width(y)
    hw[y > geo.apex_y] = -1.0
    ihw = hw - spec.wall_offset_px
    ihw[hw <= 0] = -1.0
    return geo, hw, ihw


def silhouette_mask(spec: RenderSpec) -> np.ndarray:
    """Boolean mask of the full tip silhouette (walls + interior)."""
    geo, hw, _ = _row_profiles(spec)
    u = np.abs(np.arange(spec.width_px, dtype=np.float64) - geo.apex_x)
    return u[None, :] <= hw[:, None]


def interior_mask(spec: RenderSpec) -> np.ndarray:
    geo, _, ihw = _row_profiles(spec)
    u = np.abs(np.arange(spec.width_px, dtype=np.float64) - geo.apex_x)
    return u[None, :] <= ihw[:, None]


def liquid_mask(spec: RenderSpec) -> np.ndarray:
    geo, _, ihw = _row_profiles(spec)
    ihw = ihw.copy()
    ihw[: max(0, min(geo.surface_y, spec.height_px))] = -1.0
    u = np.abs(np.arange(spec.width_px, dtype=np.float64) - geo.apex_x)
    return u[None, :] <= ihw[:, None]


def validate_spec(spec: RenderSpec) -> None:
    """Raise FixtureGeometryError with a diagnostic on invalid geometry."""
    if spec.width_px < 16 or spec.height_px < 16:
        raise FixtureGeometryError(f"frame {spec.width_px}x{spec.height_px} too small")
    if not 5.0 < spec.vertex_angle_deg < 90.0:
        raise FixtureGeometryError(f"vertex angle {spec.vertex_angle_deg} outside (5, 90)")
    if not 0.0 <= spec.level_pct <= 100.0:
        raise FixtureGeometryError(f"level_pct {spec.level_pct} outside [0, 100]")
    if spec.wall_offset_px < 0:
        raise FixtureGeometryError("wall_offset_px must be >= 0")
    if spec.noise_sigma < 0:
        raise FixtureGeometryError("noise_sigma must be >= 0")
    if any(not 0 <= c <= 255 for c in spec.liquid_color):
        raise FixtureGeometryError(f"liquid_color {spec.liquid_color} outside [0,255]^3")
    if spec.level_pct <= 0 and spec.bubbles:
        raise FixtureGeometryError("bubbles listed for an empty tip (level_pct=0)")
    if spec.bubbles:
        geo, _, ihw = _row_profiles(spec)
        for i, (cx, cy, r) in enumerate(spec.bubbles):
            if r < 1:
                raise FixtureGeometryError(f"bubble {i}: radius {r} < 1")
            inside = (
                0 <= cy < spec.height_px
                and 0 <= cx < spec.width_px
                and cy >= geo.surface_y
                and abs(cx - geo.apex_x) <= ihw[cy]
            )
            if not inside:
                raise FixtureGeometryError(
                    f"bubble {i}: center ({cx},{cy}) outside the liquid column"
                )


@functools.lru_cache(maxsize=8)
def _vignette_map(h: int, w: int, strength: float) -> np.ndarray:
    ry = (np.arange(h, dtype=np.float32) - (h - 1) / 2.0) / (h / 2.0)
    rx = (np.arange(w, dtype=np.float32) - (w - 1) / 2.0) / (w / 2.0)
    return (1.0 - strength * (rx[None, :] ** 2 + ry[:, None] ** 2)).astype(np.float32)


def render(spec: RenderSpec) -> tuple[np.ndarray, int]:
    """Render a spec to an RGB uint8 raster plus its ground-truth label.

    Pure function of the spec (noise is drawn from spec.seed), so the
    same spec always produces a bit-identical buffer. Label is 1 iff
    the bubble list is non-empty.
    """
    validate_spec(spec)
    geo, hw, ihw = _row_profiles(spec)
    st = _STYLE[spec.style]
    h, w = spec.height_px, spec.width_px

    # Inclusive per-row column bounds; right < left means an empty row.
    sl = np.ceil(geo.apex_x - hw).astype(np.int64).clip(0, w)
    sr = np.floor(geo.apex_x + hw).astype(np.int64).clip(-1, w - 1)
    sr[hw < 0] = -1
    il = np.ceil(geo.apex_x - ihw).astype(np.int64).clip(0, w)
    ir = np.floor(geo.apex_x + ihw).astype(np.int64).clip(-1, w - 1)
    ir[ihw < 0] = -1

    # The frame decomposes per channel c as  base + tint_c * tint_weight:
    # base carries the channel-independent luminance (background, walls,
    # empty interior, additive highlights, noise), tint_weight weights the
    # liquid color (0 outside the liquid, scaled down inside bubble disks).
    base = np.full((h, w), np.float32(st["background"]), dtype=np.float32)
    tint_weight = np.zeros((h, w), dtype=np.float32)
    surface = geo.surface_y
    for y in range(min(geo.apex_y + 1, h)):
        if sr[y] >= sl[y]:
            base[y, sl[y] : sr[y] + 1] = st["wall"]
        if ir[y] >= il[y]:
            if y >= surface:
                base[y, il[y] : ir[y] + 1] = 0.0
                tint_weight[y, il[y] : ir[y] + 1] = 1.0
            else:
                base[y, il[y] : ir[y] + 1] = st["empty"]

    # Meniscus: slightly brighter band at the liquid surface.
    if 0 <= surface <= geo.apex_y:
        for y in range(max(0, surface), min(h, surface + 2)):
            if ir[y] >= il[y]:
                base[y, il[y] : ir[y] + 1] += 30.0

    # Bubbles: darker disk with a 1-px brighter rim, clipped to the liquid.
    for cx, cy, r in spec.bubbles:
        y0, y1 = max(0, cy - r - 2), min(h, cy + r + 3)
        x0, x1 = max(0, cx - r - 2), min(w, cx + r + 3)
        wy = np.arange(y0, y1, dtype=np.float32) - cy
        wx = np.arange(x0, x1, dtype=np.float32) - cx
        d2 = wy[:, None] ** 2 + wx[None, :] ** 2
        cols = np.arange(x0, x1)
        local_liq = (
            (wy[:, None] + cy >= surface)
            & (cols[None, :] >= il[y0:y1, None])
            & (cols[None, :] <= ir[y0:y1, None])
        )
        disk = (d2 <= r * r) & local_liq
        rim = (d2 > r * r) & (d2 <= (r + 1.0) ** 2) & local_liq
        tint_weight[y0:y1, x0:x1][disk] *= 0.72
        base[y0:y1, x0:x1][rim] += st["rim_gain"]

    # SYN_STYLE specular glare: a bright band along the inner left wall.
    if st["glare_gain"] > 0:
        edge = np.floor(geo.apex_x - ihw + 2.0).astype(np.int64)
        for y in range(min(geo.apex_y + 1, h)):
            if ir[y] >= il[y]:
                base[y, il[y] : min(edge[y], ir[y]) + 1] += st["glare_gain"]

    if st["vignette"] > 0:
        vig = _vignette_map(h, w, st["vignette"])
        base *= vig
        tint_weight *= vig
    if st["offset"]:
        base += np.float32(st["offset"])
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        base += rng.standard_normal((h, w), dtype=np.float32) * np.float32(spec.noise_sigma)

    # Expand to RGB: outside the liquid all channels equal base, so the
    # per-channel work is confined to the liquid's bounding box.
    gray = np.clip(np.rint(base), 0, 255).astype(np.uint8)
    out = np.repeat(gray[:, :, None], 3, axis=2)
    liquid_rows = [y for y in range(max(0, surface), min(geo.apex_y + 1, h)) if ir[y] >= il[y]]
    if liquid_rows:
        ry0, ry1 = liquid_rows[0], liquid_rows[-1] + 1
        rx0 = int(il[ry0:ry1].min())
        rx1 = int(ir[ry0:ry1].max()) + 1
        color = np.asarray(spec.liquid_color, dtype=np.float32)
        tint = (0.3 * st["empty"] + 0.7 * color * (200.0 / 255.0)).astype(np.float32)
        sub = (
            base[ry0:ry1, rx0:rx1, None]
            + tint_weight[ry0:ry1, rx0:rx1, None] * tint[None, None, :]
        )
        out[ry0:ry1, rx0:rx1] = np.clip(np.rint(sub), 0, 255).astype(np.uint8)

    label = 1 if spec.bubbles else 0
    return out, label


def render_to_png(spec: RenderSpec, path: str | Path) -> int:
    img, label = render(spec)
    Image.fromarray(img, mode="RGB").save(path)
    return label


def _place_bubbles(spec_wo_bubbles: RenderSpec, count: int, rng: np.random.Generator):
    """Sample bubble (cx, cy, r) triples strictly inside the liquid column."""
    geo = geometry(spec_wo_bubbles)
    tan = math.tan(geo.half_angle_rad)
    wall = spec_wo_bubbles.wall_offset_px
    # Interior half-width >= 3 requires apex_y - y >= (3 + wall)/tan.
    y_hi = geo.apex_y - int(math.ceil((3 + wall) / tan)) - 1
    y_lo = geo.surface_y + 3
    if y_hi <= y_lo:
        raise FixtureGeometryError("liquid column too small to hold bubbles")
    bubbles = []
    for _ in range(count):
        r = int(rng.integers(BUBBLE_RADIUS_RANGE[0], BUBBLE_RADIUS_RANGE[1] + 1))
        cy = int(rng.integers(y_lo, y_hi + 1))
        ihw = float(geo.outer_half_width(cy)) - wall
        span = max(1, int(ihw) - 3)
        cx = int(round(geo.apex_x)) + int(rng.integers(-span, span + 1))
        bubbles.append((cx, cy, r))
    return tuple(bubbles)


def sample_specs(
    n: int,
    class_balance: float,
    style: Style,
    rng_seed: int,
    width_px: int = 600,
    height_px: int = 1500,
) -> list[RenderSpec]:
    """Draw n RenderSpecs, round(n*class_balance) of them with bubbles.

    Bubble count is uniform on {1..15}; colors come from the five-color
    palette; vertex angles come from two clusters (long/short tips).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= class_balance <= 1.0:
        raise ValueError("class_balance must be in [0, 1]")
    style = Style(style)
    rng = np.random.default_rng(rng_seed)
    n_bubble = int(round(n * class_balance))
    colors = list(PALETTE.values())
    specs = []
    for i in range(n):
        with_bubbles = i < n_bubble
        long_tip = bool(rng.integers(0, 2))
        angle = float(rng.uniform(16.0, 24.0)) if long_tip else float(rng.uniform(28.0, 40.0))
        level = float(rng.integers(30, 91)) if with_bubbles else float(rng.integers(20, 91))
        if style is Style.REAL_STYLE:
            sigma = float(rng.uniform(4.0, 7.0))
        else:
            sigma = float(rng.uniform(0.5, 1.5))
        base = RenderSpec(
            width_px=width_px,
            height_px=height_px,
            style=style,
            liquid_color=colors[int(rng.integers(0, len(colors)))],
            level_pct=level,
            vertex_angle_deg=angle,
            wall_offset_px=int(rng.integers(6, 13)),
            bubbles=(),
            noise_sigma=sigma,
            seed=int(rng.integers(0, 2**63)),
        )
        if with_bubbles:
            count = int(rng.integers(BUBBLE_COUNT_RANGE[0], BUBBLE_COUNT_RANGE[1] + 1))
            base = dataclasses.replace(base, bubbles=_place_bubbles(base, count, rng))
        specs.append(base)
    return specs


def generate_dataset(
    n: int,
    class_balance: float,
    style: Style,
    seed: int,
    out_dir: str | Path,
    width_px: int = 600,
    height_px: int = 1500,
) -> Path:
    """Render a labeled dataset to out_dir; returns the listing path.

    The sidecar listing has one line per file: path, label, spec digest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = sample_specs(n, class_balance, style, seed, width_px, height_px)
    listing = out / "ground_truth.jsonl"
    with listing.open("w", encoding="utf-8") as fh:
        for i, spec in enumerate(specs):
            name = f"fixture_{i:05d}.png"
            label = render_to_png(spec, out / name)
            fh.write(
                json.dumps({"path": name, "label": label, "spec_digest": spec.digest()}) + "\n"
            )
    return listing
