"""Run configuration: a flat ``key = value`` text file plus command-line overrides."""

from __future__ import annotations

import os
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .dsp import FilterSpec
from .features import CztParams


@dataclass(frozen=True)
class RunConfig:
    # segmentation
    median_order: int = field(default=3, metadata={"help": "moving-median window (odd)"})
    lowpass_cutoff_hz: float = field(default=3.0, metadata={"help": "homomorphic low-pass cutoff in Hz"})
    lowpass_order: int = field(default=8, metadata={"help": "effective zero-phase low-pass order (even)"})
    threshold: float = field(default=0.10, metadata={"help": "motion threshold on squared normalised baseline"})
    log_floor: float = field(default=1e-12, metadata={"help": "floor applied before the logarithm"})
    # chirp z-transform
    czt_a0: float = field(default=1.0, metadata={"help": "arc start radius"})
    czt_theta0: float = field(default=0.0, metadata={"help": "arc start angle (rad)"})
    czt_w0: float = field(default=1.0, metadata={"help": "arc radial ratio per bin"})
    czt_phi0: float | None = field(default=None, metadata={"help": "angular step (rad); none = 2*pi/M"})
    decimation: int = field(default=100, metadata={"help": "CZT bins averaged per profile point"})
    # classifier
    C: float = field(default=1.0, metadata={"help": "SVM box constraint"})
    degree: int = field(default=3, metadata={"help": "polynomial kernel degree"})
    gamma: float | None = field(default=None, metadata={"help": "kernel scale; none = 1/n_features"})
    coef0: float = field(default=1.0, metadata={"help": "kernel offset"})
    tol: float = field(default=1e-3, metadata={"help": "SMO KKT tolerance"})
    max_iter: int = field(default=100_000, metadata={"help": "SMO iteration cap"})
    standardize: bool = field(default=True, metadata={"help": "z-score features with training statistics"})
    # evaluation
    folds: int = field(default=10, metadata={"help": "number of cow-level folds"})
    test_size: float = field(default=0.3, metadata={"help": "fraction of cows held out per fold"})
    seed: int = field(default=0, metadata={"help": "fold / generator seed"})
    channel_group: str = field(default="all", metadata={"help": "accel|gravity|gyro|attitude|all"})
    feature_family: str = field(default="all", metadata={"help": "czt|cdf|power|all"})
    # ingest / runtime
    utc_offset_hours: float = field(default=0.0, metadata={"help": "offset of file-name timestamps from UTC"})
    jobs: int | None = field(default=None, metadata={"help": "parallel workers; none = GAITSCREEN_JOBS or all cores"})

    @property
    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self.median_order, self.lowpass_cutoff_hz, self.lowpass_order, self.log_floor, self.threshold)

    @property
    def czt_params(self) -> CztParams:
        return CztParams(a0=self.czt_a0, theta0=self.czt_theta0, w0=self.czt_w0, phi0=self.czt_phi0,
                         decimation=self.decimation)

    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            return self.jobs
        env = os.environ.get("GAITSCREEN_JOBS")
        if env:
            return int(env)
        return os.cpu_count() or 1

    def svm_params(self) -> dict:
        return dict(C=self.C, degree=self.degree, gamma=self.gamma, coef0=self.coef0, tol=self.tol,
                    max_iter=self.max_iter, standardize=self.standardize)

    def updated(self, **overrides) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: _coerce(self, k, v) for k, v in overrides.items()})

    def to_text(self) -> str:
        lines = [f"# gaitscreen {__version__}"]
        lines += [f"{k} = {_render(v)}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected 'key = value', got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            values[k] = v
        return cls().updated(**values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def describe(cls) -> list[tuple[str, str, str]]:
        """``(key, default, help)`` for every configuration key."""
        out = []
        for f in fields(cls):
            default = f.default if f.default is not MISSING else None
            out.append((f.name, _render(default), f.metadata.get("help", "")))
        return out


def _render(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_TYPES = {
    "int": int, "float": float, "str": str, "bool": bool,
    "float | None": float, "int | None": int,
}


def _coerce(cfg: RunConfig, key: str, value):
    if not isinstance(value, str):
        return value
    ftype = next(f.type for f in fields(cfg) if f.name == key)
    ftype = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    v = value.strip()
    if "None" in ftype and v.lower() in ("none", "auto", ""):
        return None
    base = _TYPES.get(ftype, str)
    if base is bool:
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {value!r}")
    try:
        return base(v)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {value!r} as {ftype}") from None
