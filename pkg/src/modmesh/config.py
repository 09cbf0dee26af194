"""Device configuration files (schema version 1).

A config names the geometry, the fabrication statistics, the detector noise
and a master seed. Every key is optional; missing keys take the
characterised three-chip defaults, unknown keys are rejected.

The master seed is split with ``SeedSequence.spawn``: child 0 draws the
device, child 1 drives the protocol being run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .imperfections import ImperfectionSpec, Layout, sample_hardware
from .linalg import spawn_seeds
from .mesh import Assembly, NoiseSpec
from .serialize import loads, validate

__all__ = ["CONFIG_SCHEMA", "DeviceConfig", "load_config"]

SCHEMA_VERSION = 1

_nonneg = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "n_modes": {"type": "integer", "minimum": 2},
        "n_modules": {"type": "integer", "minimum": 1},
        "width": {"type": "integer", "minimum": 1},
        "parity": {"const": "alternating"},
        "chip_length_cm": _nonneg,
        "noise_sigma": _nonneg,
        "seed": {"type": "integer", "minimum": 0},
        "push_pull": {"type": "boolean"},
        "imperfections": {
            "type": "object",
            "properties": {
                **{f.name: _nonneg for f in fields(ImperfectionSpec) if f.name != "quantize"},
                "coupling_mean": {"type": "number", "minimum": 0, "maximum": 1},
                "tuning_range_pi_mean": {"type": "number", "exclusiveMinimum": 0},
                "quantize": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class DeviceConfig:
    layout: Layout = Layout()
    imperfections: ImperfectionSpec = ImperfectionSpec()
    noise_sigma: float = 0.005
    seed: int = 0
    push_pull: bool = True
    parity: str = "alternating"

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.noise_sigma)

    def seeds(self, seed: int | None = None) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
        """(device, protocol) seed streams for ``seed`` (default: the config's)."""
        hw, run = spawn_seeds(self.seed if seed is None else seed, 2)
        return hw, run

    def build(self, seed: int | None = None) -> Assembly:
        a = sample_hardware(self.imperfections, self.layout, self.seeds(seed)[0])
        return replace(a, push_pull=self.push_pull)

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "n_modes": self.layout.n_modes,
            "n_modules": self.layout.n_modules,
            "width": self.layout.width,
            "parity": self.parity,
            "chip_length_cm": self.layout.chip_length_cm,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "push_pull": self.push_pull,
            "imperfections": asdict(self.imperfections),
        }

    @classmethod
    def from_json(cls, doc: Any, source: str = "<config>") -> "DeviceConfig":
        validate(doc, CONFIG_SCHEMA, source)
        d = cls()
        try:
            layout = Layout(doc.get("n_modes", d.layout.n_modes),
                            doc.get("n_modules", d.layout.n_modules),
                            doc.get("width", d.layout.width),
                            doc.get("chip_length_cm", d.layout.chip_length_cm))
            spec = replace(d.imperfections, **doc.get("imperfections", {}))
        except ValidationError as exc:
            raise ValidationError(f"{source}: {exc}") from None
        return cls(layout, spec, doc.get("noise_sigma", d.noise_sigma), doc.get("seed", d.seed),
                   doc.get("push_pull", d.push_pull))


def load_config(path: str | Path) -> DeviceConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read config: {exc.strerror}") from None
    return DeviceConfig.from_json(loads(text, str(path)), str(path))
