"""
Synthetic four-modality volumes with slowly drifting nested lesions.

Each case has an elliptical brain of positive intensities with smooth noise
and an ellipsoidal lesion whose center drifts less than one pixel per slice.
The lesion holds three nested regions: edema (label 2), a core (label 1) and
an enhancing center (label 4).
"""

import logging
from typing import List, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .volume import MODALITIES, VolumeRecord

logger = logging.getLogger(__name__)

DEFAULT_SHAPE = (30, 160, 160)

# Relative radii of the nested regions
CORE_RATIO = 0.6
ENHANCING_RATIO = 0.35

# Intensity offsets per modality (t1, t1ce, t2, flair) for labels 2, 1, 4
CONTRAST = {
    2: np.array([-0.1, 0.0, 0.5, 0.7]),
    1: np.array([-0.4, 0.1, 0.3, 0.3]),
    4: np.array([-0.2, 0.8, 0.2, 0.4]),
}


def _lesion_labels(shape: Tuple[int, int, int], rng: np.random.Generator) -> np.ndarray:
    depth, height, width = shape
    zz = np.arange(depth)[:, None, None]
    yy = np.arange(height)[None, :, None]
    xx = np.arange(width)[None, None, :]

    radius = rng.uniform(0.12, 0.18) * min(height, width)
    z_center = depth / 2 + rng.uniform(-0.1, 0.1) * depth
    z_radius = rng.uniform(0.35, 0.45) * depth
    drift = rng.uniform(-0.5, 0.5, size=2)
    y0 = height / 2 + rng.uniform(-0.1, 0.1) * height
    x0 = width / 2 + rng.uniform(-0.1, 0.1) * width
    yc = y0 + drift[0] * (zz - depth / 2)
    xc = x0 + drift[1] * (zz - depth / 2)

    # squared normalized distance in the slice plane, shrinking toward the lesion ends
    taper = np.clip(1.0 - ((zz - z_center) / z_radius) ** 2, 0.0, None)
    planar = ((yy - yc) ** 2 + (xx - xc) ** 2) / radius ** 2

    labels = np.zeros(shape, dtype=np.uint8)
    alive = taper > 0
    labels[alive & (planar <= taper)] = 2
    labels[alive & (planar <= taper * CORE_RATIO ** 2)] = 1
    labels[alive & (planar <= taper * ENHANCING_RATIO ** 2)] = 4
    return labels


def synth_case(case_id: str, shape: Tuple[int, int, int], rng: np.random.Generator) -> VolumeRecord:
    depth, height, width = shape
    yy = (np.arange(height)[:, None] - (height - 1) / 2) / (0.45 * height)
    xx = (np.arange(width)[None, :] - (width - 1) / 2) / (0.45 * width)
    brain = np.broadcast_to((yy ** 2 + xx ** 2) <= 1.0, shape)

    labels = _lesion_labels(shape, rng)
    labels[~brain] = 0
    modalities = np.zeros((len(MODALITIES),) + tuple(shape), dtype=np.float32)
    for index in range(len(MODALITIES)):
        noise = gaussian_filter(rng.normal(size=shape), sigma=(1.0, 2.0, 2.0))
        volume = 1.0 + 0.15 * noise / (noise.std() + 1e-12)
        for label, offsets in CONTRAST.items():
            volume[labels == label] += offsets[index]
        volume = np.clip(volume, 0.05, None)
        volume[~brain] = 0.0
        modalities[index] = volume.astype(np.float32)
    return VolumeRecord(case_id=case_id, modalities=modalities, labels=labels)


def synth_generate(n_cases: int, shape: Tuple[int, int, int] = DEFAULT_SHAPE, seed: int = 0) -> List[VolumeRecord]:
    """Generate ``n_cases`` cases; case k is drawn from the generator seeded ``(seed, k)``."""
    records = [synth_case(f"synth_{k:04d}", tuple(shape), np.random.default_rng([seed, k]))
               for k in range(n_cases)]
    logger.info("Generated %d synthetic cases of shape %s", n_cases, tuple(shape))
    return records
