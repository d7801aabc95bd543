"""Motion/rest segmentation of a single channel.

Chain: moving median -> analytic envelope -> log -> zero-phase low-pass ->
exp (homomorphic baseline) -> min-max normalisation -> power threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .exceptions import CutoffOutOfRange, EvenOrder, OrderExceedsLength, TooShort

DEGENERATE_RANGE = 1e-12


@dataclass(frozen=True)
class FilterSpec:
    """Segmentation parameters.

    ``lowpass_order`` is the effective order after the forward and backward
    passes, so each pass uses a stage of half that order.
    """

    median_order: int = 3
    lowpass_cutoff_hz: float = 3.0
    lowpass_order: int = 8
    log_floor: float = 1e-12
    threshold: float = 0.10

    def __post_init__(self):
        if self.median_order < 1 or self.median_order % 2 == 0:
            raise EvenOrder(f"median order must be odd and >= 1, got {self.median_order}")
        if self.lowpass_order < 2 or self.lowpass_order % 2:
            raise ValueError(f"lowpass order must be even and >= 2, got {self.lowpass_order}")
        if self.lowpass_cutoff_hz <= 0:
            raise CutoffOutOfRange(f"cutoff must be positive, got {self.lowpass_cutoff_hz}")
        if self.log_floor <= 0:
            raise ValueError("log floor must be positive")


def moving_median(x, order: int = 3) -> np.ndarray:
    """Centred running median; windows shrink symmetrically at the edges."""
    x = np.asarray(x, dtype=float)
    if order < 1 or order % 2 == 0:
        raise EvenOrder(f"order must be odd, got {order}")
    n = len(x)
    if order > n:
        raise OrderExceedsLength(f"order {order} exceeds signal length {n}")
    half = order // 2
    out = np.empty_like(x)
    if half == 0:
        out[:] = x
        return out
    out[half:n - half] = np.median(sliding_window_view(x, order), axis=1)
    for i in range(half):
        out[i] = np.median(x[:2 * i + 1])
        out[n - 1 - i] = np.median(x[n - 1 - 2 * i:])
    return out


def analytic_envelope(x) -> np.ndarray:
    """Magnitude of the analytic signal ``x + j H(x)``."""
    x = np.asarray(x, dtype=float)
    if len(x) < 4:
        raise TooShort(f"need at least 4 samples, got {len(x)}")
    return np.abs(sps.hilbert(x))


def _lowpass_sos(spec: FilterSpec, fs: float) -> np.ndarray:
    if not 0 < spec.lowpass_cutoff_hz < fs / 2:
        raise CutoffOutOfRange(f"cutoff {spec.lowpass_cutoff_hz} Hz outside (0, {fs / 2}) Hz")
    return sps.butter(spec.lowpass_order // 2, spec.lowpass_cutoff_hz, btype="low", fs=fs, output="sos")


def zero_phase_lowpass(x, fs: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Butterworth low-pass run forward then backward (no phase delay)."""
    x = np.asarray(x, dtype=float)
    sos = _lowpass_sos(spec, fs)
    stage = spec.lowpass_order // 2
    padlen = min(3 * stage, len(x) - 1)
    return sps.sosfiltfilt(sos, x, padtype="even" if padlen > 0 else None, padlen=max(padlen, 0))


@dataclass(frozen=True, eq=False)
class HomomorphicResult:
    envelope: np.ndarray
    log_envelope: np.ndarray
    baseline: np.ndarray
    residual: np.ndarray
    degenerate: bool


def homomorphic_baseline(x, fs: float, spec: FilterSpec = FilterSpec()) -> HomomorphicResult:
    """Split the envelope into a slow baseline and a fast residual.

    ``baseline * residual`` reproduces the envelope; the baseline carries the
    low-frequency content below ``spec.lowpass_cutoff_hz``.
    """
    env = analytic_envelope(x)
    eps = spec.log_floor
    log_env = np.log(np.maximum(env, eps))
    baseline = np.exp(zero_phase_lowpass(log_env, fs, spec))
    degenerate = bool(env.max() <= eps)
    if degenerate:
        residual = np.ones_like(env)
    else:
        residual = env / np.maximum(baseline, eps)
    return HomomorphicResult(env, log_env, baseline, residual, degenerate)


def minmax_normalize(x, with_flag: bool = False):
    """Rescale to [0, 1]. A constant input maps to zeros and is degenerate."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return (x.copy(), True) if with_flag else x.copy()
    lo, hi = x.min(), x.max()
    span = hi - lo
    if not span > DEGENERATE_RANGE * max(1.0, abs(hi), abs(lo)):
        y = np.zeros_like(x)
        return (y, True) if with_flag else y
    y = (x - lo) / span
    np.clip(y, 0.0, 1.0, out=y)
    return (y, False) if with_flag else y


@dataclass(frozen=True, eq=False)
class SegmentMask:
    """Boolean motion mask and its runs as half-open ``(start, end)`` pairs."""

    motion: np.ndarray
    threshold: float
    runs: tuple[tuple[int, int], ...]

    @property
    def n_motion(self) -> int:
        return int(self.motion.sum())

    def apply(self, x) -> np.ndarray:
        """Keep only the motion samples of ``x``, in order."""
        return np.asarray(x)[self.motion]


def mask_runs(mask) -> tuple[tuple[int, int], ...]:
    m = np.asarray(mask, dtype=bool)
    edges = np.diff(np.concatenate(([0], m.view(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return tuple((int(s), int(e)) for s, e in zip(starts, ends))


def segment_motion(baseline_norm, threshold: float = 0.10) -> SegmentMask:
    """Motion wherever the squared normalised baseline exceeds ``threshold``."""
    b = np.asarray(baseline_norm, dtype=float)
    motion = b * b > threshold
    return SegmentMask(motion, threshold, mask_runs(motion))


@dataclass(frozen=True, eq=False)
class SegmentationTrace:
    """Every intermediate signal of :func:`segment_signal`, for debugging."""

    despiked: np.ndarray
    homomorphic: HomomorphicResult
    baseline_norm: np.ndarray
    mask: SegmentMask
    segmented: np.ndarray
    degenerate: bool

    def to_columns(self) -> dict[str, np.ndarray]:
        h = self.homomorphic
        return {
            "despiked": self.despiked,
            "envelope": h.envelope,
            "log_envelope": h.log_envelope,
            "baseline": h.baseline,
            "baseline_norm": self.baseline_norm,
            "motion": self.mask.motion.astype(float),
        }


def segment_signal(x, fs: float, spec: FilterSpec = FilterSpec()) -> SegmentationTrace:
    """Run the full segmentation chain on one channel.

    The segmented output is the *original* signal restricted to motion
    samples.
    """
    x = np.asarray(x, dtype=float)
    order = min(spec.median_order, len(x) if len(x) % 2 else len(x) - 1)
    despiked = moving_median(x, max(order, 1))
    homo = homomorphic_baseline(despiked, fs, spec)
    norm, flat = minmax_normalize(homo.baseline, with_flag=True)
    mask = segment_motion(norm, spec.threshold)
    return SegmentationTrace(despiked, homo, norm, mask, mask.apply(x), homo.degenerate or flat)
