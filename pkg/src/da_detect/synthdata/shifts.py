"""Domain shifts applied to rendered images: style, fog and scale."""

import numpy as np

from .rng import SplitMix64

AIRLIGHT = 0.8

# Output channel rows of the full-strength channel remix (rows sum to 1).
# A partial cyclic hue rotation: pure red ends up green-dominant at full
# strength, but class colours stay distinct at intermediate intensities.
STYLE_REMIX = np.array([
    [0.4, 0.1, 0.5],
    [0.5, 0.4, 0.1],
    [0.1, 0.5, 0.4],
])
STYLE_CONTRAST = 0.2  # contrast is scaled by 1 - 0.2 * intensity
STYLE_BRIGHTNESS = 0.075
STYLE_NOISE = 0.04
STYLE_NOISE_GRID = 8


def depth_ramp(height, width, near=0.5, far=3.0):
    """Synthetic pseudo-depth: ``far`` at the top row, ``near`` at the bottom."""
    y = (np.arange(height, dtype=np.float64) + 0.5) / height
    d = far + (near - far) * y
    return np.repeat(d[:, None], width, axis=1)


def apply_fog(image, beta, depth=None, airlight=AIRLIGHT):
    """Blend towards a gray airlight: ``t * image + (1 - t) * airlight``, t = exp(-beta * depth)."""
    if beta < 0:
        raise ValueError("fog density must be non-negative")
    image = np.asarray(image)
    if beta == 0:
        return image.copy()
    _, H, W = image.shape
    d = depth_ramp(H, W) if depth is None else np.asarray(depth, dtype=np.float64)
    t = np.exp(-beta * d)
    out = t[None] * image + (1.0 - t[None]) * airlight
    return out.astype(image.dtype)


def upsample_bilinear(grid, height, width):
    """Bilinearly stretch a coarse [C, h, w] grid over [C, height, width] pixel centres."""
    grid = np.asarray(grid, dtype=np.float64)
    _, gh, gw = grid.shape
    ys = (np.arange(height) + 0.5) * gh / height - 0.5
    xs = (np.arange(width) + 0.5) * gw / width - 0.5
    ys = np.clip(ys, 0, gh - 1)
    xs = np.clip(xs, 0, gw - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[:, y0][:, :, x0] * (1 - fx) + grid[:, y0][:, :, x1] * fx
    bot = grid[:, y1][:, :, x0] * (1 - fx) + grid[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bot * fy


def apply_style_shift(image, intensity, seed=0):
    """Channel remix, contrast/brightness change and low-frequency noise.

    Every component scales with ``intensity`` in [0, 1]; 0 returns the
    input unchanged. Geometry is untouched.
    """
    if not 0 <= intensity <= 1:
        raise ValueError("style intensity must lie in [0, 1]")
    image = np.asarray(image)
    if intensity == 0:
        return image.copy()
    C, H, W = image.shape
    s = float(intensity)
    mix = (1 - s) * np.eye(3) + s * STYLE_REMIX
    x = np.einsum("oc,chw->ohw", mix, image.astype(np.float64))
    contrast = 1 - STYLE_CONTRAST * s
    x = (x - 0.5) * contrast + 0.5 + STYLE_BRIGHTNESS * s
    rng = SplitMix64(seed)
    g = STYLE_NOISE_GRID
    noise = rng.uniform_array(C * g * g, -1.0, 1.0).reshape(C, g, g)
    x = x + STYLE_NOISE * s * upsample_bilinear(noise, H, W)
    return np.clip(x, 0.0, 1.0).astype(image.dtype)


def rescale_image(image, factor):
    """Resize [C, H, W] by ``factor`` (output round(H * factor)), sampling bilinearly."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    image = np.asarray(image)
    C, H, W = image.shape
    oh = max(1, int(round(H * factor)))
    ow = max(1, int(round(W * factor)))
    if (oh, ow) == (H, W) and factor == 1:
        return image.copy()
    ys = np.clip((np.arange(oh) + 0.5) / factor - 0.5, 0, H - 1)
    xs = np.clip((np.arange(ow) + 0.5) / factor - 0.5, 0, W - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    img = image.astype(np.float64)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(image.dtype)


def rescale_boxes(boxes, factor):
    return (np.asarray(boxes, dtype=np.float64) * factor).astype(np.asarray(boxes).dtype)
