"""Single-scale SSIM on 8-bit luma."""

from __future__ import annotations

import numpy as np

WINDOW = 11
SIGMA = 1.5
K1, K2, L = 0.01, 0.03, 255.0
C1 = (K1 * L) ** 2
C2 = (K2 * L) ** 2
LUMA = np.array([0.299, 0.587, 0.114])


def luma(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        return a[..., :3] @ LUMA
    if a.ndim == 2:
        return a
    raise ValueError(f"expected an (H, W) or (H, W, 3) image, got shape {a.shape}")


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable 'valid' correlation with the 1D kernel ``g`` along both axes."""
    n = len(g)
    h, w = img.shape
    rows = sum(g[k] * img[:, k:w - n + 1 + k] for k in range(n))
    return sum(g[k] * rows[k:h - n + 1 + k, :] for k in range(n))


def _check(a, b):
    ya, yb = luma(a), luma(b)
    if ya.shape != yb.shape:
        raise ValueError(f"image shapes differ: {ya.shape} vs {yb.shape}")
    if min(ya.shape) < WINDOW:
        raise ValueError(f"images must be at least {WINDOW}x{WINDOW}")
    return ya, yb


def _combine(mx, my, sxx, syy, sxy):
    num = (2.0 * (mx * my) + C1) * (2.0 * sxy + C2)
    den = (mx * mx + my * my + C1) * (sxx + syy + C2)
    return num / den


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, y = _check(a, b)
    g = gaussian_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    return _combine(mx, my, sxx, syy, sxy)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over all fully contained 11x11 windows, in ``[-1, 1]``."""
    return float(ssim_map(a, b).mean())


def ssim_reference(a: np.ndarray, b: np.ndarray) -> float:
    """Direct per-window evaluation of the SSIM definition (slow; for cross-checks)."""
    x, y = _check(a, b)
    g = gaussian_window()
    w2 = np.outer(g, g)
    h, w = x.shape
    vals = []
    for i in range(h - WINDOW + 1):
        for j in range(w - WINDOW + 1):
            px = x[i:i + WINDOW, j:j + WINDOW]
            py = y[i:i + WINDOW, j:j + WINDOW]
            mx = float((w2 * px).sum())
            my = float((w2 * py).sum())
            sxx = float((w2 * (px - mx) ** 2).sum())
            syy = float((w2 * (py - my) ** 2).sum())
            sxy = float((w2 * (px - mx) * (py - my)).sum())
            vals.append(_combine(mx, my, sxx, syy, sxy))
    return float(np.mean(vals))
