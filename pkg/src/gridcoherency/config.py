"""Pipeline configuration.

Files are plain ``key = value`` lines; ``#`` starts a comment and nested
keys use dotted paths (``hdbscan.m_pts = 4``). An empty value unsets an
optional key. Precedence is command-line flags, then the file, then the
defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, GridCoherencyError
from .hdbscan import HdbscanParams
from .spectrum import BandSpec
from .timeseries import WindowSpec

# key -> (type, default); a default of None marks an optional key
DEFAULTS = {
    "window.length": (int, 200),
    "window.stride": (int, 50),
    "band.drop_dc": (bool, True),
    "band.f_lo_hz": (float, 0.1),
    "band.f_hi_hz": (float, 2.5),
    "band.max_bins": (int, None),
    "hdbscan.m_pts": (int, 4),
    "hdbscan.min_cluster_size": (int, 3),
    "hdbscan.d_floor": (float, 1e-12),
    "baseline_sample": (int, 0),
    "report.window": (int, -1),
    "seed": (int, 0),
    "input.angles": (str, None),
    "input.topology": (str, None),
    "input.system": (str, None),
    "input.faults": (str, None),
    "input.planted": (str, None),
    "input.tolerance": (float, 0.01),
    "simulate.dt": (float, 0.01),
    "simulate.t_end": (float, 12.0),
    "output.dir": (str, "out"),
    "output.figures": (bool, False),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw):
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind, default = DEFAULTS[key]
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text == "":
        if default is None:
            return None
        raise ConfigError(f"{key} needs a value")
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config_text(text: str, source="<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = _coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def merge_config(file_values=None, overrides=None) -> dict:
    """Defaults, then file values, then overrides (``None`` overrides are ignored)."""
    merged = {key: default for key, (_, default) in DEFAULTS.items()}
    merged.update(file_values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = _coerce(key, value)
    return merged


def dump_config(values: dict) -> str:
    lines = []
    for key in DEFAULTS:
        v = values.get(key)
        if v is None:
            text = ""
        elif isinstance(v, bool):
            text = "true" if v else "false"
        else:
            text = str(v)
        lines.append(f"{key} = {text}".rstrip())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PipelineConfig:
    window: WindowSpec
    band: BandSpec
    hdbscan: HdbscanParams
    baseline_sample: int
    report_window: int
    seed: int
    values: dict

    @classmethod
    def from_values(cls, values: dict) -> PipelineConfig:
        try:
            return cls(
                window=WindowSpec(values["window.length"], values["window.stride"]),
                band=BandSpec(
                    drop_dc=values["band.drop_dc"],
                    f_lo_hz=values["band.f_lo_hz"],
                    f_hi_hz=values["band.f_hi_hz"],
                    max_bins=values["band.max_bins"],
                ),
                hdbscan=HdbscanParams(
                    m_pts=values["hdbscan.m_pts"],
                    min_cluster_size=values["hdbscan.min_cluster_size"],
                    d_floor=values["hdbscan.d_floor"],
                ),
                baseline_sample=values["baseline_sample"],
                report_window=values["report.window"],
                seed=values["seed"],
                values=dict(values),
            )
        except GridCoherencyError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path=None, overrides=None) -> PipelineConfig:
        file_values = load_config_file(path) if path else {}
        return cls.from_values(merge_config(file_values, overrides))

    def get(self, key):
        return self.values[key]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output.dir"])

    def as_report_dict(self) -> dict:
        """Effective configuration as embedded in reports."""
        return {key: self.values.get(key) for key in DEFAULTS}
