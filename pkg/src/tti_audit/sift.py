"""SIFT keypoint detection and description, implemented from scratch.

Fixed parameter set: base sigma 1.6 over an assumed 0.5 camera blur,
3 sampled scales per octave, octaves stacked until the smaller side of the
working image drops below 16 px (no initial upsampling octave), contrast
threshold 0.03 on [0,1]-normalized DoG values, principal-curvature edge
ratio 10, and 4x4x8 descriptors clamped at 0.2 then renormalized to unit
length. Everything is plain array math, so results are bitwise
reproducible for a fixed input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import FormatError, ValidationError
from .pixels import RgbImage

BASE_SIGMA = 1.6
CAMERA_SIGMA = 0.5
NUM_SCALES = 3  # sampled DoG scales per octave; 6 gaussian levels
MIN_OCTAVE_SIDE = 16
CONTRAST_THRESHOLD = 0.03
EDGE_RATIO = 10.0
MAX_REFINE_STEPS = 5

ORI_BINS = 36
ORI_SIGMA_FACTOR = 1.5
ORI_RADIUS_FACTOR = 3.0  # window radius = 3 * (1.5 * sigma)
ORI_PEAK_RATIO = 0.8

DESC_WIDTH = 4  # spatial bins per side
DESC_ORI_BINS = 8
DESC_SCALE_FACTOR = 3.0  # spatial bin width = 3 * sigma
DESC_CLAMP = 0.2

MIN_IMAGE_SIDE = 32


@dataclass
class DescriptorSet:
    """Keypoints (x, y, scale, orientation) with their 128-d descriptors."""

    image_id: str
    keypoints: np.ndarray  # (n, 4) float32
    descriptors: np.ndarray  # (n, 128) float32, unit rows

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float32).reshape(-1, 4)
        self.descriptors = np.asarray(self.descriptors, dtype=np.float32).reshape(-1, 128)
        if len(self.keypoints) != len(self.descriptors):
            raise ValidationError("keypoint/descriptor count mismatch")

    def __len__(self) -> int:
        return len(self.keypoints)


def _gaussian_levels(base: np.ndarray) -> list[np.ndarray]:
    """One octave of progressively blurred images (NUM_SCALES + 3 levels)."""
    levels = [base]
    k = 2.0 ** (1.0 / NUM_SCALES)
    sigmas = BASE_SIGMA * k ** np.arange(NUM_SCALES + 3)
    for prev, total in zip(sigmas[:-1], sigmas[1:]):
        inc = math.sqrt(total * total - prev * prev)
        levels.append(gaussian_filter(levels[-1], inc))
    return levels


def _build_pyramid(gray: np.ndarray) -> list[list[np.ndarray]]:
    inc = math.sqrt(BASE_SIGMA**2 - CAMERA_SIGMA**2)
    image = gaussian_filter(gray, inc)
    octaves = []
    while min(image.shape) >= MIN_OCTAVE_SIDE:
        levels = _gaussian_levels(image)
        octaves.append(levels)
        # level NUM_SCALES carries exactly twice the base blur
        image = levels[NUM_SCALES][::2, ::2]
    return octaves


def _extremum_candidates(dog: np.ndarray) -> np.ndarray:
    """Integer (layer, row, col) triples that are strict 26-neighbor extrema."""
    candidates = []
    pre_threshold = 0.5 * CONTRAST_THRESHOLD
    for layer in range(1, dog.shape[0] - 1):
        center = dog[layer, 1:-1, 1:-1]
        strong = np.abs(center) > pre_threshold
        if not strong.any():
            continue
        is_max = strong.copy()
        is_min = strong.copy()
        for dl in (-1, 0, 1):
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dl == 0 and dr == 0 and dc == 0:
                        continue
                    neighbor = dog[
                        layer + dl,
                        1 + dr : dog.shape[1] - 1 + dr,
                        1 + dc : dog.shape[2] - 1 + dc,
                    ]
                    is_max &= center > neighbor
                    is_min &= center < neighbor
                    if not (is_max.any() or is_min.any()):
                        break
        rows, cols = np.nonzero(is_max | is_min)
        for r, c in zip(rows, cols):
            candidates.append((layer, int(r) + 1, int(c) + 1))
    return np.array(candidates, dtype=np.int64).reshape(-1, 3)


def _refine(dog: np.ndarray, layer: int, row: int, col: int):
    """Quadratic subpixel refinement; returns (layer, row, col, offset,
    contrast) or None when the candidate is rejected."""
    n_layers, h, w = dog.shape
    for _ in range(MAX_REFINE_STEPS):
        d0, d1, d2 = dog[layer - 1], dog[layer], dog[layer + 1]
        grad = 0.5 * np.array(
            [
                d1[row, col + 1] - d1[row, col - 1],
                d1[row + 1, col] - d1[row - 1, col],
                d2[row, col] - d0[row, col],
            ]
        )
        center = d1[row, col]
        dxx = d1[row, col + 1] - 2 * center + d1[row, col - 1]
        dyy = d1[row + 1, col] - 2 * center + d1[row - 1, col]
        dss = d2[row, col] - 2 * center + d0[row, col]
        dxy = 0.25 * (
            d1[row + 1, col + 1] - d1[row + 1, col - 1]
            - d1[row - 1, col + 1] + d1[row - 1, col - 1]
        )
        dxs = 0.25 * (
            d2[row, col + 1] - d2[row, col - 1] - d0[row, col + 1] + d0[row, col - 1]
        )
        dys = 0.25 * (
            d2[row + 1, col] - d2[row - 1, col] - d0[row + 1, col] + d0[row - 1, col]
        )
        hessian = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        try:
            offset = -np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(offset) < 0.5):
            contrast = center + 0.5 * float(grad @ offset)
            if abs(contrast) < CONTRAST_THRESHOLD:
                return None
            trace = dxx + dyy
            det = dxx * dyy - dxy * dxy
            if det <= 0 or trace * trace * EDGE_RATIO >= det * (EDGE_RATIO + 1) ** 2:
                return None
            return layer, row, col, offset, contrast
        col += int(round(offset[0]))
        row += int(round(offset[1]))
        layer += int(round(offset[2]))
        if not (1 <= layer < n_layers - 1 and 1 <= row < h - 1 and 1 <= col < w - 1):
            return None
    return None


def _orientations(mag: np.ndarray, ang: np.ndarray, row: int, col: int, sigma: float):
    """Dominant gradient orientations (radians) around one keypoint."""
    h, w = mag.shape
    weight_sigma = ORI_SIGMA_FACTOR * sigma
    radius = int(round(ORI_RADIUS_FACTOR * weight_sigma))
    r0, r1 = max(row - radius, 1), min(row + radius, h - 2)
    c0, c1 = max(col - radius, 1), min(col + radius, w - 2)
    if r0 > r1 or c0 > c1:
        return []
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    weights = np.exp(-((rr - row) ** 2 + (cc - col) ** 2) / (2.0 * weight_sigma**2))
    votes = weights * mag[r0 : r1 + 1, c0 : c1 + 1]
    bins = np.floor(ang[r0 : r1 + 1, c0 : c1 + 1] * (ORI_BINS / (2.0 * np.pi)))
    bins = bins.astype(np.int64) % ORI_BINS
    hist = np.zeros(ORI_BINS)
    np.add.at(hist, bins.ravel(), votes.ravel())
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    padded = np.concatenate([hist[-2:], hist, hist[:2]])
    hist = np.convolve(padded, kernel, mode="valid")
    peak = hist.max()
    if peak <= 0:
        return []
    out = []
    left = np.roll(hist, 1)
    right = np.roll(hist, -1)
    for i in np.nonzero((hist > left) & (hist > right) & (hist >= ORI_PEAK_RATIO * peak))[0]:
        denom = left[i] - 2.0 * hist[i] + right[i]
        shift = 0.0 if denom == 0 else 0.5 * (left[i] - right[i]) / denom
        theta = (i + shift) * (2.0 * np.pi / ORI_BINS)
        out.append(float(theta % (2.0 * np.pi)))
    return out


def _descriptor(mag, ang, row_f, col_f, sigma, theta) -> np.ndarray | None:
    """4x4x8 gradient histogram with trilinear interpolation."""
    h, w = mag.shape
    bin_width = DESC_SCALE_FACTOR * sigma
    radius = int(round(bin_width * math.sqrt(2) * (DESC_WIDTH + 1) * 0.5))
    radius = min(radius, int(math.hypot(h, w)))
    r0 = max(int(row_f) - radius, 1)
    r1 = min(int(row_f) + radius, h - 2)
    c0 = max(int(col_f) - radius, 1)
    c1 = min(int(col_f) + radius, w - 2)
    if r0 > r1 or c0 > c1:
        return None
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    dr = (rr - row_f).ravel()
    dc = (cc - col_f).ravel()
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # rotate offsets into the keypoint frame, in units of descriptor bins
    row_rot = (-sin_t * dc + cos_t * dr) / bin_width
    col_rot = (cos_t * dc + sin_t * dr) / bin_width
    row_bin = row_rot + 0.5 * DESC_WIDTH - 0.5
    col_bin = col_rot + 0.5 * DESC_WIDTH - 0.5
    keep = (row_bin > -1) & (row_bin < DESC_WIDTH) & (col_bin > -1) & (col_bin < DESC_WIDTH)
    if not keep.any():
        return None
    row_bin, col_bin = row_bin[keep], col_bin[keep]
    win_mag = mag[r0 : r1 + 1, c0 : c1 + 1].ravel()[keep]
    win_ang = ang[r0 : r1 + 1, c0 : c1 + 1].ravel()[keep]
    weight = np.exp(
        -(row_rot[keep] ** 2 + col_rot[keep] ** 2) / (2.0 * (0.5 * DESC_WIDTH) ** 2)
    )
    ori_bin = ((win_ang - theta) % (2.0 * np.pi)) * (DESC_ORI_BINS / (2.0 * np.pi))

    hist = np.zeros((DESC_WIDTH + 2, DESC_WIDTH + 2, DESC_ORI_BINS))
    r_floor = np.floor(row_bin).astype(np.int64)
    c_floor = np.floor(col_bin).astype(np.int64)
    o_floor = np.floor(ori_bin).astype(np.int64)
    r_frac = row_bin - r_floor
    c_frac = col_bin - c_floor
    o_frac = ori_bin - o_floor
    value = win_mag * weight
    for dr_bin in (0, 1):
        wr = value * (r_frac if dr_bin else 1.0 - r_frac)
        for dc_bin in (0, 1):
            wc = wr * (c_frac if dc_bin else 1.0 - c_frac)
            for do_bin in (0, 1):
                wo = wc * (o_frac if do_bin else 1.0 - o_frac)
                np.add.at(
                    hist,
                    (r_floor + dr_bin + 1, c_floor + dc_bin + 1, (o_floor + do_bin) % DESC_ORI_BINS),
                    wo,
                )
    vec = hist[1:-1, 1:-1, :].ravel()
    return clamp_normalize(vec)


def clamp_normalize(vec: np.ndarray) -> np.ndarray | None:
    """Unit-normalize, clamp entries at 0.2, renormalize to unit length."""
    norm = np.linalg.norm(vec)
    if norm == 0:
        return None
    clamped = np.minimum(vec / norm, DESC_CLAMP)
    norm = np.linalg.norm(clamped)
    if norm == 0:
        return None
    return (clamped / norm).astype(np.float32)


def sift_descriptors(image: RgbImage, image_id: str = "") -> DescriptorSet:
    """Detect scale-space keypoints and compute their descriptors."""
    if min(image.width, image.height) < MIN_IMAGE_SIDE:
        raise ValidationError(
            f"image too small for SIFT: min side {min(image.width, image.height)} < {MIN_IMAGE_SIDE}"
        )
    gray = image.gray() / 255.0
    keypoints = []
    descriptors = []
    for octave, levels in enumerate(_build_pyramid(gray)):
        dog = np.stack([b - a for a, b in zip(levels[:-1], levels[1:])])
        grads = []
        for level in levels:
            gy, gx = np.gradient(level)
            grads.append((np.hypot(gx, gy), np.arctan2(gy, gx) % (2.0 * np.pi)))
        for layer, row, col in _extremum_candidates(dog):
            refined = _refine(dog, int(layer), int(row), int(col))
            if refined is None:
                continue
            layer, row, col, offset, _ = refined
            sigma_oct = BASE_SIGMA * 2.0 ** ((layer + offset[2]) / NUM_SCALES)
            grad_level = int(round(layer + offset[2]))
            grad_level = min(max(grad_level, 0), len(levels) - 1)
            mag, ang = grads[grad_level]
            row_f = row + float(offset[1])
            col_f = col + float(offset[0])
            scale = 2.0**octave
            for theta in _orientations(mag, ang, row, col, sigma_oct):
                vec = _descriptor(mag, ang, row_f, col_f, sigma_oct, theta)
                if vec is None:
                    continue
                keypoints.append((col_f * scale, row_f * scale, sigma_oct * scale, theta))
                descriptors.append(vec)
    if not keypoints:
        return DescriptorSet(
            image_id=image_id,
            keypoints=np.empty((0, 4), dtype=np.float32),
            descriptors=np.empty((0, 128), dtype=np.float32),
        )
    order = sorted(range(len(keypoints)), key=lambda i: keypoints[i])
    # drop exact duplicates produced by neighboring octaves
    uniq_kp, uniq_desc, seen = [], [], set()
    for i in order:
        key = keypoints[i]
        if key in seen:
            continue
        seen.add(key)
        uniq_kp.append(keypoints[i])
        uniq_desc.append(descriptors[i])
    return DescriptorSet(
        image_id=image_id,
        keypoints=np.array(uniq_kp, dtype=np.float32),
        descriptors=np.array(uniq_desc, dtype=np.float32),
    )


def match_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each descriptor in `a`, the distance to its nearest in `b`."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        return np.full(len(a), np.inf)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.sqrt(np.maximum(sq, 0.0)).min(axis=1)


# -- SFT1 descriptor file format --------------------------------------------

SFT_MAGIC = b"SFT1"


def save_descriptors(dset: DescriptorSet, path) -> None:
    """Write the SFT1 layout: magic, u32 count, then count rows of
    132 little-endian f32 (x, y, scale, orientation, 128 descriptor)."""
    rows = np.concatenate([dset.keypoints, dset.descriptors], axis=1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(SFT_MAGIC)
        fh.write(np.array([len(rows)], dtype="<u4").tobytes())
        fh.write(rows.tobytes())


def load_descriptors(path, image_id: str = "") -> DescriptorSet:
    raw = Path(path).read_bytes()
    if raw[:4] != SFT_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    count = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    body = np.frombuffer(raw, dtype="<f4", offset=8)
    if body.size != count * 132:
        raise FormatError(f"{path}: expected {count * 132} floats, found {body.size}")
    if not np.isfinite(body).all():
        raise FormatError(f"{path}: non-finite descriptor payload")
    rows = body.reshape(count, 132)
    return DescriptorSet(image_id=image_id, keypoints=rows[:, :4], descriptors=rows[:, 4:])
