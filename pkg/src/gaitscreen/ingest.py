"""Sample-file parsing, dataset manifests and per-cow concatenation.

A sample file is one 90 s recording with 13 comma-separated columns::

    time, accel x/y/z, gravity x/y/z, gyro x/y/z, roll, pitch, yaw

and its metadata lives in the file name, e.g.
``cow017_S1_RL_20220515T111457.csv`` (cow 017, score 1, rear-left leg).
"""

from __future__ import annotations

import csv
import io
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import (
    BadTimestamp,
    ConflictingScore,
    DataError,
    EmptyDataset,
    EmptyFile,
    MalformedName,
    NonMonotonicTime,
    ScoreOutOfRange,
    UnknownCow,
    WrongColumnCount,
)

N_COLUMNS = 13
NOMINAL_RATE_HZ = 100.0
NOMINAL_ROWS = 9000
LENGTH_TOLERANCE = 0.10
LEGS = ("FL", "FR", "RL", "RR")
SCORES = (1, 2, 3, 4, 5)
CHANNEL_NAMES = (
    "accel_x", "accel_y", "accel_z",
    "gravity_x", "gravity_y", "gravity_z",
    "gyro_x", "gyro_y", "gyro_z",
    "roll", "pitch", "yaw",
)
MANIFEST_COLUMNS = ("cow_id", "score", "leg", "start_time", "path", "rows")

_CANONICAL_NAME = re.compile(
    r"^cow(?P<cow>[A-Za-z0-9]+)_S(?P<score>\d+)_(?P<leg>[A-Z]{2})_"
    r"(?P<date>\d{8})T(?P<time>\d{6})\.csv$"
)

# Each adapter maps a foreign file name to the canonical grammar, or returns
# None when the name is not its concern.
NAME_ADAPTERS: list[Callable[[str], str | None]] = []


def register_name_adapter(adapter: Callable[[str], str | None]) -> None:
    NAME_ADAPTERS.append(adapter)


def _dashed_adapter(name: str) -> str | None:
    # "cow-017_score-1_RL_2022-05-15_11-14-57.csv"
    m = re.match(
        r"^cow-(\w+?)_score-(\d+)_([A-Z]{2})_(\d{4})-(\d{2})-(\d{2})_(\d{2})-(\d{2})-(\d{2})\.csv$",
        name,
    )
    if m is None:
        return None
    cow, score, leg, y, mo, d, h, mi, s = m.groups()
    return f"cow{cow}_S{score}_{leg}_{y}{mo}{d}T{h}{mi}{s}.csv"


register_name_adapter(_dashed_adapter)


@dataclass(frozen=True, order=True)
class SampleMeta:
    """Metadata encoded in a sample file name."""

    cow_id: str
    lameness_score: int
    leg: str
    start_time: datetime
    source_path: str = ""

    @property
    def is_healthy(self) -> bool:
        return self.lameness_score == 1

    @property
    def binary_label(self) -> int:
        """+1 for healthy (score 1), -1 for lame (scores 2-5)."""
        return 1 if self.is_healthy else -1


def parse_metadata(filename: str, utc_offset_hours: float = 0.0) -> SampleMeta:
    """Decode cow id, score, leg and start time from a sample file name.

    The timestamp in the name is naive local time; it is shifted by
    ``utc_offset_hours`` and stored as UTC.
    """
    path = str(filename)
    name = Path(path).name
    m = _CANONICAL_NAME.match(name)
    if m is None:
        for adapter in NAME_ADAPTERS:
            converted = adapter(name)
            if converted is not None:
                m = _CANONICAL_NAME.match(converted)
                if m is not None:
                    break
    if m is None:
        raise MalformedName(f"{name!r} does not match cow<ID>_S<score>_<leg>_<YYYYMMDD>T<HHMMSS>.csv")
    score = int(m["score"])
    if score not in SCORES:
        raise ScoreOutOfRange(f"{name!r}: score {score} not in 1..5")
    if m["leg"] not in LEGS:
        raise MalformedName(f"{name!r}: leg {m['leg']!r} not in {LEGS}")
    try:
        local = datetime.strptime(m["date"] + m["time"], "%Y%m%d%H%M%S")
    except ValueError as exc:
        raise BadTimestamp(f"{name!r}: {exc}") from None
    tz = timezone(timedelta(hours=utc_offset_hours))
    start = local.replace(tzinfo=tz).astimezone(timezone.utc)
    return SampleMeta(m["cow"], score, m["leg"], start, path)


def render_metadata(meta: SampleMeta, utc_offset_hours: float = 0.0) -> str:
    """Inverse of :func:`parse_metadata` (file name only, no directory)."""
    tz = timezone(timedelta(hours=utc_offset_hours))
    local = meta.start_time.astimezone(tz)
    return f"cow{meta.cow_id}_S{meta.lameness_score}_{meta.leg}_{local:%Y%m%dT%H%M%S}.csv"


@dataclass(frozen=True, eq=False)
class SampleFile:
    """One parsed recording. Vector channels are ``(n, 3)`` arrays."""

    meta: SampleMeta
    time: np.ndarray
    accel: np.ndarray
    gravity: np.ndarray
    gyro: np.ndarray
    attitude: np.ndarray
    sample_rate_hz: float = NOMINAL_RATE_HZ
    rejected_rows: int = 0

    @property
    def n_samples(self) -> int:
        return len(self.time)

    @property
    def duration(self) -> float:
        return float(self.time[-1] - self.time[0]) if self.n_samples > 1 else 0.0

    @property
    def length_ok(self) -> bool:
        """False when the row count is outside 9000 +/- 10 %."""
        return abs(self.n_samples - NOMINAL_ROWS) <= LENGTH_TOLERANCE * NOMINAL_ROWS

    @property
    def signals(self) -> np.ndarray:
        """The 12 signal channels as an ``(n, 12)`` array, time excluded."""
        return np.hstack([self.accel, self.gravity, self.gyro, self.attitude])

    def to_array(self) -> np.ndarray:
        return np.column_stack([self.time, self.signals])


def _looks_numeric(cells: Sequence[str]) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def parse_sample_file(content: bytes | str, meta: SampleMeta) -> SampleFile:
    """Parse the CSV body of a sample file.

    A single leading header row is skipped. Rows with non-numeric or
    non-finite cells are dropped and counted in ``rejected_rows``; a row with
    the wrong number of columns is a hard error.
    """
    text = content.decode("utf-8-sig") if isinstance(content, bytes) else content
    rows: list[list[float]] = []
    rejected = 0
    first = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if first:
            first = False
            if not _looks_numeric(cells):
                continue
        if len(cells) != N_COLUMNS:
            raise WrongColumnCount(f"{meta.source_path or 'input'}:{lineno}: {len(cells)} columns, expected 13")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            rejected += 1
            continue
        if not all(math.isfinite(v) for v in values):
            rejected += 1
            continue
        rows.append(values)
    if not rows:
        raise EmptyFile(f"{meta.source_path or 'input'}: no data rows")
    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        bad = int(np.argmax(np.diff(t) <= 0)) + 1
        raise NonMonotonicTime(f"{meta.source_path or 'input'}: time not increasing at data row {bad}")
    rate = 1.0 / float(np.median(np.diff(t))) if len(t) > 1 else NOMINAL_RATE_HZ
    return SampleFile(
        meta=meta,
        time=t,
        accel=data[:, 1:4],
        gravity=data[:, 4:7],
        gyro=data[:, 7:10],
        attitude=data[:, 10:13],
        sample_rate_hz=rate,
        rejected_rows=rejected,
    )


def serialize_sample_file(sample: SampleFile, digits: int = 12, header: bool = False) -> bytes:
    """Render a :class:`SampleFile` back to CSV bytes (LF line endings)."""
    fmt = f"%.{digits}g"
    buf = io.StringIO()
    if header:
        buf.write("time," + ",".join(CHANNEL_NAMES) + "\n")
    np.savetxt(buf, sample.to_array(), fmt=fmt, delimiter=",")
    return buf.getvalue().encode("ascii")


def read_sample_file(path: str | Path, utc_offset_hours: float = 0.0) -> SampleFile:
    path = Path(path)
    meta = parse_metadata(str(path), utc_offset_hours)
    return parse_sample_file(path.read_bytes(), meta)


@dataclass(frozen=True)
class ManifestEntry:
    meta: SampleMeta
    rows: int
    duration: float

    @property
    def path(self) -> str:
        return self.meta.source_path


@dataclass(frozen=True)
class CowSummary:
    lameness_score: int
    n_files: int
    duration: float


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed files sorted by ``(cow_id, start_time)`` plus a skip report."""

    entries: tuple[ManifestEntry, ...]
    skipped: tuple[tuple[str, str], ...] = ()
    cows: dict[str, CowSummary] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: (e.meta.cow_id, e.meta.start_time, e.path)))
        object.__setattr__(self, "entries", entries)
        scores: dict[str, int] = {}
        files: Counter = Counter()
        seconds: dict[str, float] = defaultdict(float)
        for e in entries:
            cow = e.meta.cow_id
            prev = scores.setdefault(cow, e.meta.lameness_score)
            if prev != e.meta.lameness_score:
                raise ConflictingScore(f"cow {cow} has scores {prev} and {e.meta.lameness_score}")
            files[cow] += 1
            seconds[cow] += e.duration
        cows = {c: CowSummary(scores[c], files[c], seconds[c]) for c in sorted(scores)}
        object.__setattr__(self, "cows", cows)

    @classmethod
    def from_metas(cls, metas: Iterable[SampleMeta], rows: int = NOMINAL_ROWS) -> "DatasetManifest":
        """Manifest from metadata alone, assuming nominal file length."""
        dur = (rows - 1) / NOMINAL_RATE_HZ
        return cls(tuple(ManifestEntry(m, rows, dur) for m in metas))

    @property
    def cow_ids(self) -> list[str]:
        return list(self.cows)

    def files_for(self, cow_id: str) -> list[ManifestEntry]:
        if cow_id not in self.cows:
            raise UnknownCow(cow_id)
        return [e for e in self.entries if e.meta.cow_id == cow_id]

    def score_histogram(self) -> dict[int, int]:
        """Number of cows per lameness score (all five scores listed)."""
        hist = Counter(s.lameness_score for s in self.cows.values())
        return {s: hist.get(s, 0) for s in SCORES}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in self.entries:
            m = e.meta
            w.writerow([m.cow_id, m.lameness_score, m.leg, m.start_time.strftime("%Y-%m-%dT%H:%M:%SZ"), m.source_path, e.rows])
        return buf.getvalue()


def _scan_one(path: Path, utc_offset_hours: float):
    try:
        sample = read_sample_file(path, utc_offset_hours)
    except DataError as exc:
        return None, (str(path), str(exc))
    return ManifestEntry(sample.meta, sample.n_samples, sample.duration), None


def build_manifest(root: str | Path, utc_offset_hours: float = 0.0, n_jobs: int | None = None) -> DatasetManifest:
    """Scan ``root`` recursively for ``*.csv`` sample files.

    Files whose name or content cannot be parsed are listed in
    ``manifest.skipped`` rather than aborting the scan.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    paths = sorted(p for p in root.rglob("*.csv") if p.name != "manifest.csv")
    if n_jobs is not None and n_jobs != 1 and len(paths) > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_scan_one)(p, utc_offset_hours) for p in paths)
    else:
        results = [_scan_one(p, utc_offset_hours) for p in paths]
    entries = tuple(e for e, _ in results if e is not None)
    skipped = tuple(s for _, s in results if s is not None)
    if not entries:
        raise EmptyDataset(f"no parseable sample files under {root}")
    return DatasetManifest(entries, skipped)


@dataclass(frozen=True, eq=False)
class CowRecord:
    """All of one cow's files joined end to end.

    ``channels`` is ``(n_total, 12)`` in :data:`CHANNEL_NAMES` order and
    ``boundaries`` holds the row index where each subsequent file starts.
    """

    cow_id: str
    lameness_score: int
    channels: np.ndarray
    boundaries: tuple[int, ...]
    sample_rate_hz: float = NOMINAL_RATE_HZ
    start_times: tuple[datetime, ...] = ()

    @property
    def binary_label(self) -> int:
        return 1 if self.lameness_score == 1 else -1

    @property
    def n_samples(self) -> int:
        return self.channels.shape[0]

    def channel(self, name: str) -> np.ndarray:
        return self.channels[:, CHANNEL_NAMES.index(name)]


def concat_cow(manifest: DatasetManifest, files: Sequence[SampleFile] | None, cow_id: str) -> CowRecord:
    """Concatenate a cow's files in start-time order.

    ``files`` may hold already-parsed samples (any order, other cows allowed);
    when None the cow's files are read from the paths in the manifest.
    """
    if cow_id not in manifest.cows:
        raise UnknownCow(f"cow {cow_id!r} not in manifest")
    if files is None:
        samples = [read_sample_file(e.path) for e in manifest.files_for(cow_id)]
    else:
        samples = [f for f in files if f.meta.cow_id == cow_id]
    if not samples:
        raise UnknownCow(f"no files supplied for cow {cow_id!r}")
    samples.sort(key=lambda s: (s.meta.start_time, s.meta.source_path))
    lengths = [s.n_samples for s in samples]
    boundaries = tuple(int(b) for b in np.cumsum(lengths)[:-1])
    rate = float(np.median([s.sample_rate_hz for s in samples]))
    return CowRecord(
        cow_id=cow_id,
        lameness_score=manifest.cows[cow_id].lameness_score,
        channels=np.vstack([s.signals for s in samples]),
        boundaries=boundaries,
        sample_rate_hz=rate,
        start_times=tuple(s.meta.start_time for s in samples),
    )


def load_records(manifest: DatasetManifest, n_jobs: int | None = None) -> list[CowRecord]:
    """Build a :class:`CowRecord` for every cow, ordered by cow id."""
    if n_jobs is not None and n_jobs != 1 and len(manifest.cows) > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=n_jobs)(delayed(concat_cow)(manifest, None, c) for c in manifest.cow_ids)
    return [concat_cow(manifest, None, c) for c in manifest.cow_ids]


@dataclass(frozen=True)
class DatasetStats:
    n_cows: int
    n_sensors: int
    n_observations: int
    cows_per_score: dict[int, int]
    samples_per_score: dict[int, int]

    @property
    def summary(self) -> str:
        """The ``N_C (N_S x N_DO)`` rendering."""
        return f"{self.n_cows} ({self.n_sensors}x{self.n_observations})"

    @property
    def product(self) -> int:
        return self.n_cows * self.n_observations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["score", "cows", "samples"])
        for s in SCORES:
            w.writerow([s, self.cows_per_score[s], self.samples_per_score[s]])
        w.writerow(["total", self.n_cows, self.n_observations])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"cows (N_C):          {self.n_cows}",
            f"sensors (N_S):       {self.n_sensors}",
            f"observations (N_DO): {self.n_observations}",
            f"S_S = {self.summary}",
            f"N_C x N_DO = {self.product:,}",
            "",
            "score  cows  samples",
        ]
        for s in SCORES:
            lines.append(f"{s:>5}  {self.cows_per_score[s]:>4}  {self.samples_per_score[s]:>7}")
        healthy_c, healthy_s = self.cows_per_score[1], self.samples_per_score[1]
        lines.append(f"healthy vs lame cows: {healthy_c} vs {self.n_cows - healthy_c}")
        lines.append(f"healthy vs lame samples: {healthy_s} vs {self.n_observations - healthy_s}")
        return "\n".join(lines) + "\n"


def dataset_stats(manifest: DatasetManifest, n_sensors: int = 3) -> DatasetStats:
    """Cow and sample (file) counts per lameness score.

    ``n_sensors`` defaults to the watch's accelerometer, gyroscope and
    magnetometer.
    """
    if not manifest.entries:
        raise EmptyDataset("manifest has no entries")
    samples = Counter(e.meta.lameness_score for e in manifest.entries)
    return DatasetStats(
        n_cows=len(manifest.cows),
        n_sensors=n_sensors,
        n_observations=len(manifest.entries),
        cows_per_score=manifest.score_histogram(),
        samples_per_score={s: samples.get(s, 0) for s in SCORES},
    )
