"""Pipeline configuration: a TOML file with a default for every field.

Unknown keys are rejected so typos fail loudly instead of silently using
defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .pnp import RansacConfig
from .registration import IcpConfig
from .renderer import SplatConfig


@dataclass(frozen=True)
class RenderSettings:
    width: int = 640
    height: int = 360
    fx: float = 500.0
    fy: float = 500.0
    cx: Optional[float] = None  # None = image center
    cy: Optional[float] = None
    point_size_m: float = 0.01
    max_radius_px: int = 64
    shrink_m: float = 0.5
    height_min: float = 1.0
    height_max: float = 1.6
    pitch_deg: float = 15.0
    roll_deg: float = 5.0
    min_valid_fraction: float = 0.05
    max_retries: int = 10

    def splat(self) -> SplatConfig:
        return SplatConfig(point_size_m=self.point_size_m,
                           max_radius_px=self.max_radius_px)


@dataclass(frozen=True)
class HistmatchSettings:
    per_image: bool = False   # pool-level matching by default
    mask_holes: bool = True   # exclude rendered holes from the source CDF


@dataclass(frozen=True)
class SolveSettings:
    threshold_px: float = 10.0
    confidence: float = 0.99
    max_iterations: int = 1000
    min_inliers: int = 12
    refine_iterations: int = 20
    stride: int = 8

    def ransac(self, seed: int = 0) -> RansacConfig:
        return RansacConfig(inlier_threshold_px=self.threshold_px,
                            confidence=self.confidence,
                            max_iterations=self.max_iterations,
                            min_inliers=self.min_inliers,
                            refine_iterations=self.refine_iterations,
                            seed=seed)


@dataclass(frozen=True)
class AlignSettings:
    max_iterations: int = 50
    convergence_rms_m: float = 1e-6
    max_correspondence_m: float = 0.5

    def icp(self, seed: int = 0) -> IcpConfig:
        return IcpConfig(max_iterations=self.max_iterations,
                         convergence_rms_m=self.convergence_rms_m,
                         max_correspondence_m=self.max_correspondence_m,
                         seed=seed)


@dataclass(frozen=True)
class Seeds:
    render: int = 0
    solve: int = 0
    align: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    render: RenderSettings = field(default_factory=RenderSettings)
    histmatch: HistmatchSettings = field(default_factory=HistmatchSettings)
    solve: SolveSettings = field(default_factory=SolveSettings)
    align: AlignSettings = field(default_factory=AlignSettings)
    seeds: Seeds = field(default_factory=Seeds)


_SECTIONS = {
    "render": RenderSettings,
    "histmatch": HistmatchSettings,
    "solve": SolveSettings,
    "align": AlignSettings,
    "seeds": Seeds,
}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    return cls(**data)


def load_config(path=None) -> PipelineConfig:
    """Load a TOML pipeline config; a None path gives all defaults.

    Raises:
        ConfigError: unknown section or key, or unparsable TOML.
    """
    if path is None:
        return PipelineConfig()
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    parts = {name: _build_section(cls, data.get(name, {}), name)
             for name, cls in _SECTIONS.items()}
    return PipelineConfig(**parts)
