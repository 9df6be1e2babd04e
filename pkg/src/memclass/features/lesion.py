import numpy as np

HIST_BINS = 32


def _red_hist(img):
    px = img.pixels.reshape(-1, 3)
    px = px[px.any(axis=1)]
    hist, _ = np.histogram(px[:, 0], bins=HIST_BINS, range=(0, 256))
    total = hist.sum()
    return hist / total if total else hist.astype(np.float64)


def lesion_features(crop, neighbor_patch, median_lesion_size, overexposure_threshold=250):
    """Size, redness and saturation of a lesion crop.

    Pixels that are zero in every channel are treated as masked out. Redness
    is ``1 - pearson(r_hist(crop), r_hist(neighbor))`` on 32-bin normalized
    red histograms, clamped to [0, 1], and 0 when either histogram is flat.
    """
    if median_lesion_size <= 0:
        raise ValueError("median_lesion_size must be positive")
    if crop.pixels.size == 0 or neighbor_patch.pixels.size == 0:
        raise ValueError("crop and neighbor patch must be nonempty")
    px = crop.pixels.reshape(-1, 3)
    masked = px[px.any(axis=1)]
    size = len(masked) / float(median_lesion_size)

    a, b = _red_hist(crop), _red_hist(neighbor_patch)
    if a.std() == 0 or b.std() == 0:
        redness = 0.0
    else:
        rho = float(np.corrcoef(a, b)[0, 1])
        redness = min(max(1.0 - rho, 0.0), 1.0)

    if len(masked) == 0:
        sat = 0
    else:
        bright = (masked.min(axis=1) >= overexposure_threshold).mean()
        sat = int(bright > 0.5)
    return size, redness, sat
