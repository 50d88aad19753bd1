import numpy as np
from skimage.color import rgb2gray, rgb2lab

from errors import InputError
from models import FeatureMatrix, SuperpixelMap


def rgb_to_lab(pixel) -> np.ndarray:
    """CIE-LAB (D65) of one 8-bit sRGB triple."""
    rgb = np.asarray(pixel, dtype=float).reshape(1, 1, 3) / 255.0
    return rgb2lab(rgb)[0, 0]


def image_to_lab(image: np.ndarray) -> np.ndarray:
    """H×W×3 uint8 sRGB image to float LAB (L in [0, 100])."""
    return rgb2lab(image)


def image_to_gray(image: np.ndarray) -> np.ndarray:
    """Luminance in 0..255, the intensity scale the flow estimator works on."""
    return rgb2gray(image) * 255.0


def mean_features(region: np.ndarray, spmap: SuperpixelMap) -> FeatureMatrix:
    """Mean LAB colour of every superpixel, one row per label."""
    if region.shape[:2] != spmap.shape:
        raise InputError(f"Region of shape {region.shape[:2]} does not match label map {spmap.shape}")
    labels = spmap.labels.ravel()
    counts = np.bincount(labels, minlength=spmap.k).astype(float)
    channels = region.reshape(-1, region.shape[2]) if region.ndim == 3 else region.reshape(-1, 1)
    sums = np.stack(
        [np.bincount(labels, weights=channels[:, c], minlength=spmap.k) for c in range(channels.shape[1])],
        axis=1,
    )
    return sums / counts[:, None]
