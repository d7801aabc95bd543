"""Per-channel feature blocks (370 values) and per-cow feature vectors.

Block layout, in order::

    czt_orig(90) czt_seg(90) stats_orig(3) stats_seg(3)
    power_orig(2) power_seg(2) cdf_orig(90) cdf_seg(90)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dsp import FilterSpec, SegmentMask, minmax_normalize, segment_signal
from .exceptions import BadDimensions, EmptySignal
from .ingest import CHANNEL_NAMES, NOMINAL_RATE_HZ, CowRecord

PROFILE_LENGTH = 90
BLOCK_SIZE = 370

_LAYOUT = (
    ("czt_orig", PROFILE_LENGTH),
    ("czt_seg", PROFILE_LENGTH),
    ("stats_orig", 3),
    ("stats_seg", 3),
    ("power_orig", 2),
    ("power_seg", 2),
    ("cdf_orig", PROFILE_LENGTH),
    ("cdf_seg", PROFILE_LENGTH),
)


def _slices():
    out, start = {}, 0
    for name, size in _LAYOUT:
        out[name] = slice(start, start + size)
        start += size
    assert start == BLOCK_SIZE
    return out


BLOCK_SLICES: dict[str, slice] = _slices()

CHANNEL_GROUPS: dict[str, tuple[str, ...]] = {
    "accel": CHANNEL_NAMES[0:3],
    "gravity": CHANNEL_NAMES[3:6],
    "gyro": CHANNEL_NAMES[6:9],
    "attitude": CHANNEL_NAMES[9:12],
    "all": CHANNEL_NAMES,
}

# Columns kept by each feature-family ablation arm, within one block.
FEATURE_FAMILIES: dict[str, tuple[str, ...]] = {
    "czt": ("czt_orig", "czt_seg", "stats_orig", "stats_seg"),
    "cdf": ("cdf_orig", "cdf_seg"),
    "power": ("power_orig", "power_seg"),
    "all": tuple(name for name, _ in _LAYOUT),
}


@dataclass(frozen=True)
class CztParams:
    """Arc of the z-plane sampled by the transform, plus decimation.

    ``z_k = A * W**-k`` with ``A = a0 * exp(j theta0)`` and
    ``W = w0 * exp(-j phi0)``. ``phi0=None`` means ``2 pi / M`` so the
    defaults sample the whole unit circle (a DFT of length M).
    ``n_bins=None`` means ``output_length * decimation``.
    """

    a0: float = 1.0
    theta0: float = 0.0
    w0: float = 1.0
    phi0: float | None = None
    n_bins: int | None = None
    decimation: int = 100
    output_length: int = PROFILE_LENGTH

    def __post_init__(self):
        if self.a0 <= 0 or self.w0 <= 0:
            raise ValueError("a0 and w0 must be positive")
        if self.decimation < 1 or self.output_length < 1:
            raise ValueError("decimation and output_length must be >= 1")
        if self.n_bins is not None and self.n_bins < self.output_length:
            raise BadDimensions(f"n_bins {self.n_bins} < output length {self.output_length}")

    @property
    def m(self) -> int:
        return self.n_bins if self.n_bins is not None else self.output_length * self.decimation

    @property
    def a(self) -> complex:
        return self.a0 * complex(math.cos(self.theta0), math.sin(self.theta0))

    @property
    def phi(self) -> float:
        return 2 * math.pi / self.m if self.phi0 is None else self.phi0

    @property
    def w(self) -> complex:
        return self.w0 * complex(math.cos(self.phi), -math.sin(self.phi))


def _chirp(k: np.ndarray, w0: float, phi: float, circle_m: int | None = None) -> np.ndarray:
    """``W ** (k**2 / 2)`` evaluated in polar form.

    With ``circle_m`` set, ``phi == 2 pi / circle_m`` and the phase is reduced
    modulo 2 pi in integer arithmetic first.
    """
    half_sq = k.astype(float) ** 2 / 2
    if circle_m is not None:
        k = k.astype(np.int64)
        phase = -np.pi * ((k * k) % (2 * circle_m)) / circle_m
    else:
        phase = -phi * half_sq
    if w0 == 1.0:
        return np.exp(1j * phase)
    return np.exp(half_sq * math.log(w0) + 1j * phase)


def czt(x, params: CztParams = CztParams()) -> np.ndarray:
    """Chirp z-transform ``X_k = sum_n x[n] z_k**-n`` for ``k < M``.

    Bluestein's identity ``nk = (n**2 + k**2 - (k-n)**2) / 2`` turns the sum
    into a linear convolution done with FFTs, O((N+M) log(N+M)).
    """
    x = np.asarray(x)
    n = len(x)
    if n == 0:
        raise EmptySignal("czt of an empty signal")
    m = params.m
    w0, phi = params.w0, params.phi
    circle = m if params.phi0 is None else None
    a = params.a
    kn = np.arange(n)
    km = np.arange(m)
    # A**-n in polar form to stay accurate for large n
    a_pow = np.exp(-kn * math.log(params.a0) - 1j * params.theta0 * kn) if a != 1 else 1.0
    y = x * a_pow * _chirp(kn, w0, phi, circle)
    L = 1 << (n + m - 2).bit_length()
    kk = np.arange(-(n - 1), m)
    v = 1.0 / _chirp(kk, w0, phi, circle)
    Y = np.fft.fft(y, L)
    V = np.fft.fft(v, L)
    g = np.fft.ifft(Y * V)[n - 1:n - 1 + m]
    return g * _chirp(km, w0, phi, circle)


def czt_profile(x, params: CztParams = CztParams(), with_flag: bool = False):
    """Block-averaged ``|czt(x)|`` normalised to [0, 1]."""
    m, d, length = params.m, params.decimation, params.output_length
    if m != length * d:
        raise BadDimensions(f"M={m} is not {length} blocks of {d} bins")
    mag = np.abs(czt(x, params))
    return minmax_normalize(mag.reshape(length, d).mean(axis=1), with_flag=with_flag)


def stats_features(profile) -> tuple[float, float, float]:
    """Mean, population standard deviation and mean/std (0 when std ~ 0)."""
    p = np.asarray(profile, dtype=float)
    mu = float(p.mean())
    sigma = float(np.sqrt(np.mean((p - mu) ** 2)))
    icv = mu / sigma if sigma >= 1e-12 else 0.0
    return mu, sigma, icv


def power_percentage(seg, unseg) -> float:
    """Energy of the segmented signal over energy of the whole signal."""
    total = float(np.sum(np.square(unseg, dtype=float)))
    if not total > 0:
        return 0.0
    return min(float(np.sum(np.square(seg, dtype=float))) / total, 1.0)


def power_crossing(profile) -> float:
    """Normalised position where the profile first drops through its mean.

    The crossing is linearly interpolated between the last bin above the
    mean and the first bin at or below it; 1.0 when there is no crossing.
    """
    p = np.asarray(profile, dtype=float)
    mu = p.mean()
    above = p > mu
    hits = np.flatnonzero(above[:-1] & ~above[1:])
    if hits.size == 0:
        return 1.0
    k = int(hits[0]) + 1
    frac = (p[k - 1] - mu) / (p[k - 1] - p[k])
    return float(((k - 1) + frac) / (len(p) - 1))


def motion_percentage(mask: SegmentMask) -> float:
    motion = np.asarray(mask.motion if isinstance(mask, SegmentMask) else mask, dtype=bool)
    return float(motion.mean()) if motion.size else 0.0


def cdf_profile(x, length: int = PROFILE_LENGTH, with_flag: bool = False):
    """Cumulative rectified amplitude sampled at ``length`` even positions.

    Inputs shorter than ``length`` are padded by repeating the last sample
    and reported as degenerate.
    """
    x = np.abs(np.asarray(x, dtype=float))
    short = len(x) < length
    if len(x) == 0:
        out = np.zeros(length)
        return (out, True) if with_flag else out
    if short:
        x = np.concatenate([x, np.full(length - len(x), x[-1])])
    c = np.cumsum(x)
    pos = np.linspace(0, len(c) - 1, length)
    prof, flat = minmax_normalize(np.interp(pos, np.arange(len(c)), c), with_flag=True)
    prof = np.maximum.accumulate(prof)
    return (prof, short or flat) if with_flag else prof


@dataclass(frozen=True, eq=False)
class FeatureBlock:
    """The 370 features of one channel, split by family and version."""

    czt: np.ndarray
    stats: np.ndarray
    power: np.ndarray
    cdf: np.ndarray
    degenerate: bool = False

    def assembled(self) -> np.ndarray:
        return np.concatenate([
            self.czt[0], self.czt[1], self.stats[0], self.stats[1],
            self.power[0], self.power[1], self.cdf[0], self.cdf[1],
        ])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.assembled()[BLOCK_SLICES[name]]

    @classmethod
    def from_vector(cls, v, degenerate: bool = False) -> "FeatureBlock":
        v = np.asarray(v, dtype=float)
        if v.shape != (BLOCK_SIZE,):
            raise BadDimensions(f"expected {BLOCK_SIZE} values, got {v.shape}")
        s = BLOCK_SLICES
        return cls(
            czt=np.vstack([v[s["czt_orig"]], v[s["czt_seg"]]]),
            stats=np.vstack([v[s["stats_orig"]], v[s["stats_seg"]]]),
            power=np.vstack([v[s["power_orig"]], v[s["power_seg"]]]),
            cdf=np.vstack([v[s["cdf_orig"]], v[s["cdf_seg"]]]),
            degenerate=degenerate,
        )

    @classmethod
    def zeros(cls) -> "FeatureBlock":
        return cls.from_vector(np.zeros(BLOCK_SIZE), degenerate=True)


def channel_features(
    channel,
    fs: float = NOMINAL_RATE_HZ,
    spec: FilterSpec = FilterSpec(),
    czt_params: CztParams = CztParams(),
) -> FeatureBlock:
    """Feature block for one channel.

    Power slots: the original half holds (motion percentage, power crossing
    of its CZT profile); the segmented half holds (power percentage, power
    crossing of its CZT profile).
    """
    x = np.asarray(channel, dtype=float)
    if x.size == 0:
        raise EmptySignal("empty channel")
    if not np.any(x):
        return FeatureBlock.zeros()
    trace = segment_signal(x, fs, spec)
    seg = trace.segmented

    czt_o, flat_o = czt_profile(x, czt_params, with_flag=True)
    cdf_o = cdf_profile(x, czt_params.output_length)
    if seg.size:
        czt_s = czt_profile(seg, czt_params)
        cdf_s = cdf_profile(seg, czt_params.output_length)
    else:
        czt_s = np.zeros(czt_params.output_length)
        cdf_s = np.zeros(czt_params.output_length)
    return FeatureBlock(
        czt=np.vstack([czt_o, czt_s]),
        stats=np.array([stats_features(czt_o), stats_features(czt_s)]),
        power=np.array([
            [motion_percentage(trace.mask), power_crossing(czt_o)],
            [power_percentage(seg, x), power_crossing(czt_s)],
        ]),
        cdf=np.vstack([cdf_o, cdf_s]),
        degenerate=trace.degenerate and flat_o,
    )


def group_channel_indices(group: str) -> list[int]:
    try:
        names = CHANNEL_GROUPS[group.lower()]
    except KeyError:
        raise ValueError(f"unknown channel group {group!r}; choose from {sorted(CHANNEL_GROUPS)}") from None
    return [CHANNEL_NAMES.index(n) for n in names]


def assemble_cow_features(
    rec: CowRecord,
    channel_group: str = "all",
    spec: FilterSpec = FilterSpec(),
    czt_params: CztParams = CztParams(),
) -> np.ndarray:
    """Concatenate per-channel blocks for a channel group (1110 or 4440 values)."""
    idx = group_channel_indices(channel_group)
    return np.concatenate([
        channel_features(rec.channels[:, i], rec.sample_rate_hz, spec, czt_params).assembled() for i in idx
    ])


def group_columns(group: str) -> np.ndarray:
    """Column indices of a channel group inside the full 4440-wide matrix."""
    idx = group_channel_indices(group)
    return np.concatenate([np.arange(i * BLOCK_SIZE, (i + 1) * BLOCK_SIZE) for i in idx])


def family_columns(family: str, n_channels: int = len(CHANNEL_NAMES)) -> np.ndarray:
    """Column indices kept by a feature-family mask across ``n_channels`` blocks."""
    try:
        parts = FEATURE_FAMILIES[family.lower()]
    except KeyError:
        raise ValueError(f"unknown feature family {family!r}; choose from {sorted(FEATURE_FAMILIES)}") from None
    within = np.concatenate([np.arange(BLOCK_SLICES[p].start, BLOCK_SLICES[p].stop) for p in parts])
    within.sort()
    return np.concatenate([within + c * BLOCK_SIZE for c in range(n_channels)])


def feature_names(channel_group: str = "all") -> list[str]:
    names = []
    for ch in CHANNEL_GROUPS[channel_group.lower()]:
        for part, size in _LAYOUT:
            names.extend(f"{ch}__{part}_{i:02d}" for i in range(size))
    return names


class CowFeatureExtractor(TransformerMixin, BaseEstimator):
    """Transform a list of :class:`CowRecord` into a feature matrix.

    Stateless: ``fit`` only records the output width. Rows follow the input
    order; ``n_jobs`` parallelises over cows without changing the result.
    """

    def __init__(
        self,
        channel_group="all",
        median_order=3,
        lowpass_cutoff_hz=3.0,
        lowpass_order=8,
        threshold=0.10,
        log_floor=1e-12,
        a0=1.0,
        theta0=0.0,
        w0=1.0,
        phi0=None,
        decimation=100,
        n_jobs=None,
    ):
        self.channel_group = channel_group
        self.median_order = median_order
        self.lowpass_cutoff_hz = lowpass_cutoff_hz
        self.lowpass_order = lowpass_order
        self.threshold = threshold
        self.log_floor = log_floor
        self.a0 = a0
        self.theta0 = theta0
        self.w0 = w0
        self.phi0 = phi0
        self.decimation = decimation
        self.n_jobs = n_jobs

    def _specs(self):
        spec = FilterSpec(
            median_order=self.median_order,
            lowpass_cutoff_hz=self.lowpass_cutoff_hz,
            lowpass_order=self.lowpass_order,
            log_floor=self.log_floor,
            threshold=self.threshold,
        )
        cp = CztParams(a0=self.a0, theta0=self.theta0, w0=self.w0, phi0=self.phi0, decimation=self.decimation)
        return spec, cp

    def fit(self, records, y=None):
        self._specs()
        self.n_features_out_ = BLOCK_SIZE * len(group_channel_indices(self.channel_group))
        return self

    def transform(self, records) -> np.ndarray:
        spec, cp = self._specs()
        records = list(records)
        if self.n_jobs is not None and self.n_jobs != 1 and len(records) > 1:
            from joblib import Parallel, delayed

            rows = Parallel(n_jobs=self.n_jobs)(
                delayed(assemble_cow_features)(r, self.channel_group, spec, cp) for r in records
            )
        else:
            rows = [assemble_cow_features(r, self.channel_group, spec, cp) for r in records]
        width = BLOCK_SIZE * len(group_channel_indices(self.channel_group))
        return np.vstack(rows) if rows else np.empty((0, width))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(feature_names(self.channel_group), dtype=object)


def spec_fields(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}
