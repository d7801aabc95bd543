"""Synthetic 13-channel cow recordings with controllable gait.

Walking bouts carry step impulses rendered as damped oscillations on the
accelerometer and gyroscope axes. Every second step belongs to the affected
leg and is scaled by ``1 - asymmetry`` (reluctance to bear weight), so both
the spectrum and the energy profile shift with severity. Gravity is a slowly
tilting vector of constant norm and attitude is the smoothed, integrated
gyro wrapped to (-pi, pi].
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .exceptions import BadSpec
from .ingest import (
    LEGS,
    NOMINAL_RATE_HZ,
    NOMINAL_ROWS,
    SCORES,
    DatasetManifest,
    SampleFile,
    SampleMeta,
    build_manifest,
    render_metadata,
    serialize_sample_file,
)

GRAVITY = 9.81
SIGNAL_GROUPS = ("accel", "gravity", "gyro", "attitude")

# score -> (asymmetry, motion_duty, step_rate_hz)
DEFAULT_SEVERITY = {
    1: (0.0, 0.60, 1.00),
    2: (0.3, 0.52, 0.95),
    3: (0.5, 0.45, 0.90),
    4: (0.7, 0.38, 0.85),
    5: (0.8, 0.30, 0.80),
}
EASY_SEVERITY = {
    1: (0.0, 0.65, 1.00),
    2: (0.7, 0.35, 0.80),
    3: (0.75, 0.33, 0.80),
    4: (0.8, 0.31, 0.78),
    5: (0.85, 0.30, 0.75),
}
NULL_SEVERITY = {s: (0.4, 0.45, 0.90) for s in SCORES}

REFERENCE_HERD = {1: 19, 2: 7, 3: 6, 4: 6, 5: 5}


@dataclass(frozen=True)
class GaitSpec:
    """Generator settings.

    ``severity_map`` overrides asymmetry, duty and step rate per score;
    the scalar fields are used for scores missing from the map.
    ``informative_groups`` lists the signal groups that follow the cow's
    score; the other groups are driven by a score-independent gait.
    """

    step_rate_hz: float = 1.0
    step_energy: float = 2.0
    asymmetry: float = 0.0
    motion_duty: float = 0.5
    noise_sigma: float = 0.05
    severity_map: dict = field(default_factory=lambda: dict(DEFAULT_SEVERITY))
    informative_groups: tuple[str, ...] = SIGNAL_GROUPS
    cow_jitter: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.step_rate_hz <= 0 or self.step_energy < 0 or self.noise_sigma < 0:
            raise BadSpec("step rate must be positive; energy and noise non-negative")
        if not 0 <= self.asymmetry <= 1 or not 0 <= self.motion_duty <= 1:
            raise BadSpec("asymmetry and motion_duty must lie in [0, 1]")
        if not 0 <= self.cow_jitter < 1:
            raise BadSpec("cow_jitter must lie in [0, 1)")
        unknown = set(self.informative_groups) - set(SIGNAL_GROUPS)
        if unknown:
            raise BadSpec(f"unknown signal groups {sorted(unknown)}")
        for s, (a, d, r) in self.severity_map.items():
            if s not in SCORES or not 0 <= a <= 1 or not 0 <= d <= 1 or r <= 0:
                raise BadSpec(f"bad severity entry {s}: {(a, d, r)}")

    def gait_for(self, score: int) -> tuple[float, float, float]:
        return self.severity_map.get(score, (self.asymmetry, self.motion_duty, self.step_rate_hz))

    def is_monotone(self) -> bool:
        """Higher score never means less asymmetry or more walking."""
        items = sorted(self.severity_map.items())
        return all(a1 <= a2 and d1 >= d2 for (_, (a1, d1, _r1)), (_, (a2, d2, _r2)) in zip(items, items[1:]))


def preset(name: str, **overrides) -> GaitSpec:
    """Named generator settings: ``default``, ``easy`` or ``null``."""
    maps = {"default": DEFAULT_SEVERITY, "easy": EASY_SEVERITY, "null": NULL_SEVERITY}
    if name not in maps:
        raise BadSpec(f"unknown preset {name!r}")
    base = GaitSpec(severity_map=dict(maps[name]), noise_sigma=0.05)
    return replace(base, **overrides)


def cow_seed(master_seed: int, cow_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, zlib.crc32(str(cow_id).encode())])


def _burst_kernel(fs: float, freq: float, decay_s: float) -> np.ndarray:
    t = np.arange(int(round(5 * decay_s * fs))) / fs
    return np.exp(-t / decay_s) * np.sin(2 * np.pi * freq * t)


def _walking_mask(rng, n: int, duty: float, fs: float, bout_s: float = 5.0) -> np.ndarray:
    """Exactly ``round(duty * n_bouts)`` walking bouts placed at random."""
    bout = int(round(bout_s * fs))
    n_bouts = max(1, n // bout)
    n_walk = int(round(duty * n_bouts))
    walk = np.zeros(n_bouts, dtype=bool)
    walk[rng.permutation(n_bouts)[:n_walk]] = True
    mask = np.repeat(walk, bout)
    if len(mask) < n:
        mask = np.concatenate([mask, np.full(n - len(mask), walk[-1])])
    return mask[:n]


def _step_train(rng, mask: np.ndarray, rate: float, asym: float, energy: float, fs: float) -> np.ndarray:
    """Impulse train: alternate steps scaled by 1 and (1 - asym)."""
    n = len(mask)
    imp = np.zeros(n)
    period = fs / rate
    pos = rng.uniform(0, period)
    k = 0
    while pos < n:
        i = int(pos)
        if mask[i]:
            amp = np.sqrt(energy) * (1.0 if k % 2 == 0 else 1.0 - asym)
            imp[i] += amp * rng.uniform(0.9, 1.1)
            k += 1
        pos += period * rng.uniform(0.95, 1.05)
    return imp


def _render_gait(rng, n: int, fs: float, asym: float, duty: float, rate: float, spec: GaitSpec, scale: float):
    mask = _walking_mask(rng, n, duty, fs)
    imp = _step_train(rng, mask, rate, asym, spec.step_energy * scale, fs)
    acc_b = np.convolve(imp, _burst_kernel(fs, 8.0, 0.08))[:n]
    gyr_b = np.convolve(imp, _burst_kernel(fs, 3.0, 0.15))[:n]
    return mask, acc_b, gyr_b


def _wrap(a: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi]."""
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    w[w == -np.pi] = np.pi
    return w


def gen_cow(spec: GaitSpec, score: int, n_files: int, cow_id: str = "001",
            start_time: datetime | None = None, leg: str | None = None,
            n_samples: int = NOMINAL_ROWS, fs: float = NOMINAL_RATE_HZ) -> list[tuple[SampleMeta, SampleFile]]:
    """Generate ``n_files`` consecutive 90 s files for one cow."""
    if n_files < 1:
        raise BadSpec("n_files must be >= 1")
    if score not in SCORES:
        raise BadSpec(f"score {score} not in 1..5")
    rng = np.random.default_rng(cow_seed(spec.seed, cow_id))
    j = spec.cow_jitter
    scale = rng.uniform(1 - j, 1 + j)
    rate_jit = rng.uniform(1 - j / 2, 1 + j / 2)
    tilt0 = rng.uniform(0.1, 0.4)
    heading = rng.uniform(-np.pi, np.pi)
    if leg is None:
        leg = LEGS[int(rng.integers(len(LEGS)))]
    if start_time is None:
        start_time = datetime(2022, 5, 15, 8, 0, 0, tzinfo=timezone.utc)
    asym, duty, rate = spec.gait_for(score)
    neutral = spec.gait_for(1) if spec.severity_map else (spec.asymmetry, spec.motion_duty, spec.step_rate_hz)

    axis_acc = np.array([1.0, 0.6, 0.8])
    axis_gyr = np.array([0.5, 1.0, 0.3])
    # per-cow draw of a score-independent gait for uninformative groups
    null_asym = rng.uniform(0, max(a for a, _, _ in spec.severity_map.values()) if spec.severity_map else 0)
    null_duty = rng.uniform(min(d for _, d, _ in spec.severity_map.values()) if spec.severity_map else duty,
                            neutral[1])

    out = []
    for f in range(n_files):
        t = np.arange(n_samples) / fs
        gaits = {}
        for informative in (True, False):
            a, d, r = (asym, duty, rate) if informative else (null_asym, null_duty, neutral[2])
            gaits[informative] = _render_gait(rng, n_samples, fs, a, d, r * rate_jit, spec, scale)

        def gait(group):
            return gaits[group in spec.informative_groups]

        noise = spec.noise_sigma
        _, acc_b, _ = gait("accel")
        accel = np.outer(acc_b, axis_acc) + noise * rng.standard_normal((n_samples, 3))
        _, _, gyr_b = gait("gyro")
        gyro = np.outer(gyr_b, axis_gyr) + noise * rng.standard_normal((n_samples, 3))

        g_mask, _, g_b = gait("gravity")
        sway = np.convolve(np.abs(g_b), np.ones(50) / 50, mode="same")
        tilt = tilt0 + 0.05 * np.sin(2 * np.pi * 0.01 * (t + 90 * f)) + 0.1 * sway
        tilt = tilt + noise * 0.1 * rng.standard_normal(n_samples)
        psi = heading + 0.02 * np.cumsum(g_mask) / fs
        gravity = GRAVITY * np.column_stack([np.sin(tilt) * np.cos(psi), np.sin(tilt) * np.sin(psi), np.cos(tilt)])

        _, _, att_b = gait("attitude")
        kernel = np.ones(25) / 25
        att_rate = np.outer(np.convolve(att_b, kernel, mode="same"), axis_gyr)
        attitude = np.cumsum(att_rate, axis=0) / fs * 5.0
        attitude += np.array([0.0, tilt0, heading])
        attitude += noise * 0.1 * rng.standard_normal((n_samples, 3))
        attitude = _wrap(attitude)

        meta = SampleMeta(str(cow_id), score, leg, start_time + timedelta(seconds=90 * f))
        sample = SampleFile(meta, t, accel, gravity, gyro, attitude, fs)
        out.append((meta, sample))
    return out


def gen_dataset(n_per_score: dict[int, int], spec: GaitSpec, out_dir, n_files: int = 2,
                digits: int = 7) -> DatasetManifest:
    """Write a canonical-named tree and return its manifest.

    Cow ids are numbered ``001, 002, ...`` in score order. A
    ``manifest.csv`` is written next to the sample files.
    """
    if sum(n_per_score.values()) < 2:
        raise BadSpec("need at least two cows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cow_no = 0
    base = datetime(2022, 5, 15, 8, 0, 0, tzinfo=timezone.utc)
    for score in sorted(n_per_score):
        for _ in range(n_per_score[score]):
            cow_no += 1
            cow_id = f"{cow_no:03d}"
            start = base + timedelta(hours=cow_no)
            for meta, sample in gen_cow(spec, score, n_files, cow_id, start):
                path = out / render_metadata(meta)
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(serialize_sample_file(sample, digits=digits))
                tmp.replace(path)
    manifest = build_manifest(out)
    (out / "manifest.csv").write_text(manifest.to_csv())
    return manifest


def reference_herd_counts() -> dict[int, int]:
    return dict(REFERENCE_HERD)
