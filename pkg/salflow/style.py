"""Colour tools for preview rasters and synthetic scenes."""

import colorsys

import cv2
import numpy as np


def rgb(r, g, b):
    return (r / 255.0, g / 255.0, b / 255.0)


def darken_rgb(rgb):
    """Produce a darker version of a base colour."""
    h, l, s = colorsys.rgb_to_hls(*rgb)
    hls_new = (h, max(0, l * 0.6), s)
    return colorsys.hls_to_rgb(*hls_new)


def lighten_rgb(rgb, times=1):
    """Produce a lighter version of a given base colour."""
    h, l, s = colorsys.rgb_to_hls(*rgb)
    mult = 1.4**times
    hls_new = (h, 1 - (1 - l) / mult, s)
    return colorsys.hls_to_rgb(*hls_new)


# saturated enough that every channel of a coloured object differs from the
# gray background texture
COLOURS_RGB = {
    'red': rgb(0xEE, 0x1F, 0x60),
    'blue': rgb(0x3B, 0x7E, 0xA1),
    'yellow': rgb(0xFD, 0xB5, 0x15),
    'green': rgb(0x85, 0x94, 0x38),
    'grey': rgb(162, 163, 175),
}
FIXATION_COLOUR = lighten_rgb(COLOURS_RGB['red'], 0.5)
HEAT_COLORMAP = cv2.COLORMAP_INFERNO


def heat_preview(values):
    """Map values in [0, 1] to an H×W×3 RGB heat image in [0, 1]."""
    values = np.clip(np.asarray(values, dtype=np.float64), 0, 1)
    codes = np.round(values * 255).astype(np.uint8)
    bgr = cv2.applyColorMap(codes, HEAT_COLORMAP)
    return bgr[..., ::-1].astype(np.float64) / 255.0


def flow_preview(u1, u2, max_magnitude=None):
    """Colour-wheel rendering: hue is direction, value is magnitude relative
    to `max_magnitude` (the largest magnitude present by default)."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    magnitude = np.hypot(u1, u2)
    if max_magnitude is None:
        max_magnitude = magnitude.max() if magnitude.size else 0.0
    if max_magnitude <= 0:
        return np.zeros(u1.shape + (3, ))
    angle = np.degrees(np.arctan2(u2, u1)) % 360.0
    hsv = np.stack([
        angle,
        np.ones_like(angle),
        np.clip(magnitude / max_magnitude, 0, 1),
    ], axis=-1).astype(np.float32)
    return cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB).astype(np.float64)


def fixation_overlay(image, mask, colour=FIXATION_COLOUR):
    """Paint fixated pixels of `mask` over a gray or RGB image in [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        image = np.repeat(image[..., None], 3, axis=2)
    out = image.copy()
    out[np.asarray(mask, dtype=bool)] = colour
    return out
