"""Natural-scene-statistics features.

Spatial features: 2 scales x 20 statistical maps x 17 summary statistics
per frame (680 dims), pooled as mean and std across frames sampled at
2 fps (1360 dims). Temporal features: Haar bandpass of consecutive luma
frames at 2 temporal scales, 28 maps x 17 statistics (476 dims),
mean-pooled over the clip. Video vector: 1360 + 476 = 1836 dims.

The exact map/statistic catalogue is fixed here and frozen by a golden
test; the dimensional contracts are the hard invariants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dataset import Frame, SamplingPolicy, VideoRecord, frame_ycbcr, sample_frames
from .kernels import resize_bilinear, separable_filter

SPATIAL_DIM = 680
TEMPORAL_DIM = 476
VIDEO_DIM = 2 * SPATIAL_DIM + TEMPORAL_DIM  # 1836

MSCN_C = 1.0
_LOG_EPS = 0.1

# 7-tap Gaussian window, sigma = 7/6, normalized to unit sum.
_GAUSS_TAPS = np.exp(-0.5 * (np.arange(-3, 4) / (7.0 / 6.0)) ** 2)
_GAUSS_TAPS /= _GAUSS_TAPS.sum()

# Moment-ratio grid for GGD/AGGD inversion: rho(alpha) is increasing in
# alpha, so the inverse is a searchsorted over a precomputed table.
ALPHA_GRID = np.logspace(np.log10(0.02), np.log10(10.0), 9801)


def _ratio(alpha: np.ndarray) -> np.ndarray:
    return np.exp(2.0 * gammaln(2.0 / alpha) - gammaln(1.0 / alpha) - gammaln(3.0 / alpha))


_RATIO_GRID = _ratio(ALPHA_GRID)


class DegenerateInputError(ValueError):
    """Raised when a fit is requested on constant or invalid samples."""


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    sigma: float


@dataclass(frozen=True)
class AggdParams:
    alpha: float
    sigma_l: float
    sigma_r: float
    eta: float
    fallback: bool = False


@dataclass(frozen=True)
class NssVector:
    spatial_mean: np.ndarray  # 680
    spatial_std: np.ndarray  # 680
    temporal: np.ndarray  # 476

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.spatial_mean, self.spatial_std, self.temporal])


def _alpha_from_ratio(r: float) -> float:
    idx = int(np.searchsorted(_RATIO_GRID, r))
    if idx <= 0:
        return float(ALPHA_GRID[0])
    if idx >= len(ALPHA_GRID):
        return float(ALPHA_GRID[-1])
    # nearest of the two bracketing grid points
    if r - _RATIO_GRID[idx - 1] <= _RATIO_GRID[idx] - r:
        return float(ALPHA_GRID[idx - 1])
    return float(ALPHA_GRID[idx])


def fit_ggd(samples: np.ndarray) -> GgdParams:
    """Moment-matching GGD fit: alpha from (E|x|)^2 / E[x^2], sigma from E[x^2]."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise DegenerateInputError("need at least 100 samples")
    m2 = float(np.mean(x * x))
    if m2 <= 0.0 or not np.isfinite(m2):
        raise DegenerateInputError("zero-variance input")
    m1 = float(np.mean(np.abs(x)))
    alpha = _alpha_from_ratio(m1 * m1 / m2)
    return GgdParams(alpha=alpha, sigma=float(np.sqrt(m2)))


def fit_aggd(samples: np.ndarray) -> AggdParams:
    """Asymmetric moment matching on the negative/positive sample subsets."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise DegenerateInputError("need at least 100 samples")
    neg = x[x < 0.0]
    pos = x[x > 0.0]
    if neg.size == 0 or pos.size == 0:
        ggd = fit_ggd(x)
        return AggdParams(alpha=ggd.alpha, sigma_l=ggd.sigma, sigma_r=ggd.sigma, eta=0.0, fallback=True)
    sigma_l = float(np.sqrt(np.mean(neg * neg)))
    sigma_r = float(np.sqrt(np.mean(pos * pos)))
    gamma_hat = sigma_l / sigma_r
    m2 = float(np.mean(x * x))
    rhat = float(np.mean(np.abs(x))) ** 2 / m2
    rhat_norm = rhat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    alpha = _alpha_from_ratio(rhat_norm)
    # Gamma(2/a) / sqrt(Gamma(1/a) * Gamma(3/a)), via lgamma for stability
    scale = np.exp(gammaln(2.0 / alpha) - 0.5 * gammaln(1.0 / alpha) - 0.5 * gammaln(3.0 / alpha))
    eta = (sigma_r - sigma_l) * float(scale)
    return AggdParams(alpha=alpha, sigma_l=sigma_l, sigma_r=sigma_r, eta=eta)


def local_mean_std(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-windowed local mean and std (7x7 separable window)."""
    mu = separable_filter(plane, _GAUSS_TAPS)
    mu2 = separable_filter(plane * plane, _GAUSS_TAPS)
    var = mu2 - mu * mu
    np.maximum(var, 0.0, out=var)
    return mu, np.sqrt(var)


def mscn_transform(plane: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients of a 2-D map."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.shape[0] < 7 or plane.shape[1] < 7:
        raise ValueError("map smaller than the 7x7 window")
    mu, sigma = local_mean_std(plane)
    return (plane - mu) / (sigma + MSCN_C)


def _paired_products(mscn: np.ndarray) -> list[np.ndarray]:
    return [
        mscn[:, :-1] * mscn[:, 1:],  # horizontal
        mscn[:-1, :] * mscn[1:, :],  # vertical
        mscn[:-1, :-1] * mscn[1:, 1:],  # main diagonal
        mscn[:-1, 1:] * mscn[1:, :-1],  # secondary diagonal
    ]


def _log_derivatives(plane: np.ndarray) -> list[np.ndarray]:
    """Seven first/second-order log-derivative maps of a positive map."""
    lg = np.log(plane + _LOG_EPS)
    c = lg[1:-1, 1:-1]
    return [
        lg[1:-1, 2:] - c,
        lg[2:, 1:-1] - c,
        lg[2:, 2:] - c,
        lg[2:, :-2] - c,
        lg[:-2, 1:-1] + lg[2:, 1:-1] - lg[1:-1, :-2] - lg[1:-1, 2:],
        c + lg[2:, 2:] - lg[1:-1, 2:] - lg[2:, 1:-1],
        lg[:-2, :-2] + lg[2:, 2:] - lg[:-2, 2:] - lg[2:, :-2],
    ]


def _sample_stats(x: np.ndarray) -> list[float]:
    """Eleven fixed sample statistics, finite for any input."""
    x = x.ravel()
    mean = float(np.mean(x))
    std = float(np.std(x))
    if std > 0.0:
        z = (x - mean) / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4) - 3.0)
    else:
        skew = 0.0
        kurt = 0.0
    p10, med, p90 = (float(v) for v in np.percentile(x, [10.0, 50.0, 90.0]))
    return [
        mean,
        std,
        skew,
        kurt,
        float(np.min(x)),
        float(np.max(x)),
        med,
        float(np.mean(np.abs(x))),
        float(np.sqrt(np.mean(x * x))),
        p10,
        p90,
    ]


_GGD_FALLBACK = (2.0, 0.0)
_AGGD_FALLBACK = (2.0, 0.0, 0.0, 0.0)


def _map_stats(m: np.ndarray) -> list[float]:
    """17 summary statistics of one map: GGD(2) + AGGD(4) + 11 sample stats."""
    flat = m.ravel()
    try:
        ggd = fit_ggd(flat)
        g = (ggd.alpha, ggd.sigma)
    except DegenerateInputError:
        g = _GGD_FALLBACK
    try:
        aggd = fit_aggd(flat)
        a = (aggd.alpha, aggd.sigma_l, aggd.sigma_r, aggd.eta)
    except DegenerateInputError:
        a = _AGGD_FALLBACK
    return [*g, *a, *_sample_stats(flat)]


def _downsample2(plane: np.ndarray) -> np.ndarray:
    return resize_bilinear(plane, max(plane.shape[0] // 2, 7), max(plane.shape[1] // 2, 7))


def _spatial_maps(luma: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> list[np.ndarray]:
    """The 20-map spatial catalogue at one scale."""
    mscn_y = mscn_transform(luma)
    _, sigma_y = local_mean_std(luma)
    maps = [mscn_y]
    maps.extend(_paired_products(mscn_y))
    maps.append(sigma_y)
    maps.extend(_log_derivatives(luma))
    mscn_cb = mscn_transform(cb)
    mscn_cr = mscn_transform(cr)
    cm = np.sqrt(cb * cb + cr * cr)
    mscn_cm = mscn_transform(cm)
    _, sigma_cb = local_mean_std(cb)
    _, sigma_cr = local_mean_std(cr)
    _, sigma_cm = local_mean_std(cm)
    maps.extend([mscn_cb, mscn_cr, mscn_cm, sigma_cb, sigma_cr, sigma_cm, mscn_cb * mscn_cr])
    return maps


def spatial_nss_frame(frame: Frame) -> np.ndarray:
    """680-dim spatial NSS vector of one frame (2 scales x 20 maps x 17 stats)."""
    luma, cb, cr = frame_ycbcr(frame)
    feats: list[float] = []
    for _scale in range(2):
        for m in _spatial_maps(luma, cb, cr):
            feats.extend(_map_stats(m))
        luma = _downsample2(luma)
        cb = _downsample2(cb)
        cr = _downsample2(cr)
    out = np.asarray(feats, dtype=np.float64)
    assert out.shape == (SPATIAL_DIM,)
    return out


def _temporal_maps(diff: np.ndarray) -> list[np.ndarray]:
    """The 14-map temporal catalogue for one Haar bandpass frame."""
    mscn_d = mscn_transform(diff)
    _, sigma_d = local_mean_std(diff)
    maps = [diff, mscn_d]
    maps.extend(_paired_products(mscn_d))
    maps.append(sigma_d)
    maps.extend(_log_derivatives(np.abs(diff)))
    return maps


def temporal_nss(frames_8fps: list[Frame]) -> np.ndarray:
    """476-dim temporal NSS vector (2 temporal scales x 14 maps x 17 stats)."""
    if len(frames_8fps) < 2:
        # single frame: no temporal information; zero-filled, flagged by shape only
        return np.zeros(TEMPORAL_DIM, dtype=np.float64)
    lumas = [frame_ycbcr(f)[0] for f in frames_8fps]
    sqrt2 = np.sqrt(2.0)

    def scale_stats(planes: list[np.ndarray]) -> np.ndarray:
        if len(planes) < 2:
            return np.zeros(14 * 17, dtype=np.float64)
        acc = np.zeros(14 * 17, dtype=np.float64)
        count = 0
        for a, b in zip(planes[:-1], planes[1:]):
            diff = (b - a) / sqrt2
            stats: list[float] = []
            for m in _temporal_maps(diff):
                stats.extend(_map_stats(m))
            acc += np.asarray(stats, dtype=np.float64)
            count += 1
        return acc / count

    # temporal scale 2: Haar lowpass (pairwise averages) then bandpass
    lows = [(lumas[2 * s] + lumas[2 * s + 1]) / 2.0 for s in range(len(lumas) // 2)]
    out = np.concatenate([scale_stats(lumas), scale_stats(lows)])
    assert out.shape == (TEMPORAL_DIM,)
    return out


def nss_video_vector(video: VideoRecord) -> NssVector:
    """1836-dim NSS vector: spatial mean+std at 2 fps, temporal at 8 fps."""
    spatial_frames = sample_frames(video, SamplingPolicy.per_second(2))
    per_frame = np.stack([spatial_nss_frame(f) for f in spatial_frames])
    spatial_mean = per_frame.mean(axis=0)
    spatial_std = per_frame.std(axis=0)
    temporal_frames = sample_frames(video, SamplingPolicy.per_second(8))
    temporal = temporal_nss(temporal_frames)
    return NssVector(spatial_mean=spatial_mean, spatial_std=spatial_std, temporal=temporal)
