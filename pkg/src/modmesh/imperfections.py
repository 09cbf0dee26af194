"""Fabrication statistics, thermal crosstalk and the 8-bit drive chain.

Defaults of :class:`ImperfectionSpec` are the typical single-module
characterisation values of the three-chip silica device at 780 nm. Random
draws use numpy's PCG64 ``Generator`` (``numpy.random.default_rng``),
seeded explicitly by every caller.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .errors import UnreachablePhaseError, ValidationError
from .mesh import (
    TWO_PI,
    Assembly,
    ChipModule,
    MZIHardware,
    MZISetting,
    TuningCurve,
)

__all__ = [
    "ImperfectionSpec",
    "Layout",
    "TuningCurve",
    "apply_crosstalk",
    "apply_drive",
    "crosstalk_matrix",
    "quantize_drive",
    "sample_hardware",
    "zero_drive",
]


@dataclass(frozen=True)
class ImperfectionSpec:
    coupling_mean: float = 0.57
    coupling_sd: float = 0.04
    coupler_excess_db_mean: float = 2.1
    coupler_excess_db_sd: float = 0.3
    fiber_db: float = 0.3
    interface_db: float = 0.2
    propagation_db_per_cm: float = 0.35
    tuning_range_pi_mean: float = 2.7
    tuning_range_pi_sd: float = 0.2
    crosstalk_neighbor: float = 0.01
    crosstalk_next: float = 0.007
    single_heater_factor: float = 2.0
    # not characterised in the source data; zero keeps heaters unbiased
    phase_offset_sd: float = 0.0
    quantize: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name != "quantize" and (not np.isfinite(v) or v < 0):
                raise ValidationError(f"{f.name} must be finite and nonnegative, got {v}")
        if self.coupling_mean > 1:
            raise ValidationError("coupling_mean is an intensity ratio and must be <= 1")
        if self.tuning_range_pi_mean <= 0:
            raise ValidationError("tuning_range_pi_mean must be positive")

    @classmethod
    def ideal(cls, quantize: bool = False) -> "ImperfectionSpec":
        """Lossless 50:50 couplers, identical heaters, no crosstalk."""
        return cls(coupling_mean=0.5, coupling_sd=0.0, coupler_excess_db_mean=0.0,
                   coupler_excess_db_sd=0.0, fiber_db=0.0, interface_db=0.0,
                   propagation_db_per_cm=0.0, tuning_range_pi_sd=0.0,
                   crosstalk_neighbor=0.0, crosstalk_next=0.0, quantize=quantize)


@dataclass(frozen=True)
class Layout:
    """Geometry of an assembly: ``n_modules`` chips of ``width`` MZIs each."""

    n_modes: int = 20
    n_modules: int = 3
    width: int = 10
    chip_length_cm: float = 2.5

    def __post_init__(self):
        if self.n_modes < 2 or self.n_modules < 1 or self.width < 1:
            raise ValidationError(f"invalid layout {self}")
        if self.chip_length_cm < 0:
            raise ValidationError("chip length must be nonnegative")


def _truncated_normal(rng, mean, sd, size, lo=0.0, hi=np.inf):
    return np.clip(rng.normal(mean, sd, size), lo, hi)


def sample_hardware(spec: ImperfectionSpec, layout: Layout = Layout(), seed=None) -> Assembly:
    """Draw one fabricated device.

    Per module the draws happen in a fixed order (coupler ratios, coupler
    excess losses, tuning ranges, phase offsets), each of shape
    ``(width, 2)``, so a given seed always yields the same device. Heaters
    start at the zero-actuation word.
    """
    rng = np.random.default_rng(seed)
    arm_db = spec.propagation_db_per_cm * layout.chip_length_cm
    w = layout.width
    modules = []
    for k in range(layout.n_modules):
        r = _truncated_normal(rng, spec.coupling_mean, spec.coupling_sd, (w, 2), 0.0, 1.0)
        loss = _truncated_normal(rng, spec.coupler_excess_db_mean, spec.coupler_excess_db_sd, (w, 2))
        rng_pi = _truncated_normal(rng, spec.tuning_range_pi_mean, spec.tuning_range_pi_sd, (w, 2), 1e-3)
        phi0 = rng.normal(0.0, spec.phase_offset_sd, (w, 2))
        hardware = tuple(
            MZIHardware(float(r[j, 0]), float(r[j, 1]),
                        (float(loss[j, 0]), float(loss[j, 1])), arm_db)
            for j in range(w)
        )
        tuning = tuple(
            (TuningCurve(float(rng_pi[j, 0] * np.pi), float(phi0[j, 0])),
             TuningCurve(float(rng_pi[j, 1] * np.pi), float(phi0[j, 1])))
            for j in range(w)
        )
        settings = tuple(MZISetting(t[0].phi0, t[1].phi0) for t in tuning)
        modules.append(ChipModule(k % 2, hardware, settings, tuning, arm_db))
    return Assembly(
        layout.n_modes, tuple(modules),
        fiber_loss_db=spec.fiber_db,
        interface_loss_db=spec.interface_db,
        crosstalk=(spec.crosstalk_neighbor, spec.crosstalk_next),
        single_heater_factor=spec.single_heater_factor,
        push_pull=True,
        analog_drive=not spec.quantize,
    )


def crosstalk_matrix(n: int, neighbor: float, next_nearest: float) -> np.ndarray:
    """Linear map from commanded to effective phases along one module."""
    m = np.eye(n)
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    m[dist == 1] = neighbor
    m[dist == 2] = next_nearest
    return m


def apply_crosstalk(commanded: Sequence[float], spec: ImperfectionSpec,
                    push_pull: bool = True) -> np.ndarray:
    """Effective phases of one module's heaters after thermal crosstalk.

    ``effective_j = commanded_j + sum_i c(|i-j|) commanded_i`` with
    ``c(1)``/``c(2)`` from ``spec`` (scaled by ``single_heater_factor``
    without push-pull) and no coupling beyond next-nearest neighbours.
    """
    commanded = np.asarray(commanded, dtype=float)
    scale = 1.0 if push_pull else spec.single_heater_factor
    m = crosstalk_matrix(len(commanded), scale * spec.crosstalk_neighbor,
                         scale * spec.crosstalk_next)
    return m @ commanded


def quantize_drive(target_phase: float, curve: TuningCurve,
                   analog: bool = False) -> tuple[float, float]:
    """Drive word realising ``target_phase`` (mod 2pi) on ``curve``.

    Every 2pi-equivalent of the target that lies in the actuated span is a
    candidate; the one with the smallest quantisation error wins, ties going
    to the smaller actuation. Returns ``(word, realized_phase)``; the word is
    an int unless ``analog``.
    """
    if not np.isfinite(target_phase):
        raise ValidationError(f"non-finite target phase {target_phase}")
    step = curve.step
    lo = float(curve.phase(0))
    hi = float(curve.phase(curve.max_word))
    slack = 0.0 if analog else step / 2
    k_lo = int(np.ceil((lo - slack - target_phase) / TWO_PI))
    k_hi = int(np.floor((hi + slack - target_phase) / TWO_PI))
    best = None
    for k in range(k_lo, k_hi + 1):
        t = target_phase + k * TWO_PI
        w = float(curve.word_for_actuation(t - curve.phi0))
        if not analog:
            w = float(np.clip(np.rint(w), 0, curve.max_word))
        realized = float(curve.phase(w))
        key = (round(abs(realized - t), 15), abs(w - curve.zero_word), w)
        if best is None or key < best[0]:
            best = (key, w, realized)
    if best is None:
        raise UnreachablePhaseError(
            f"phase {target_phase:.6g} rad is not reachable within the span "
            f"[{lo:.6g}, {hi:.6g}] rad")
    _, w, realized = best
    return (w if analog else int(w)), realized


def zero_drive(a: Assembly) -> list[np.ndarray]:
    """Drive words that leave every heater unactuated."""
    return [np.full((m.width, 2), float(m.tuning[0][0].zero_word)) for m in a.modules]


def apply_drive(a: Assembly, words: Sequence[np.ndarray | None]) -> Assembly:
    """Set module phases from heater drive words.

    ``words[k]`` has shape ``(width, 2)`` holding the internal and external
    heater words of module ``k``; ``None`` leaves that module untouched.
    Actuation follows each heater's true tuning curve, then crosstalk mixes
    same-kind heaters inside the module.
    """
    scale = 1.0 if a.push_pull else a.single_heater_factor
    c1, c2 = (scale * c for c in a.crosstalk)
    mods = list(a.modules)
    for k, w in enumerate(words):
        if w is None:
            continue
        mod = mods[k]
        w = np.asarray(w, dtype=float)
        if w.shape != (mod.width, 2):
            raise ValidationError(f"module {k} needs drive words of shape {(mod.width, 2)}")
        curve = mod.tuning[0][0]
        w = np.clip(w if a.analog_drive else np.rint(w), 0, curve.max_word)
        act = mod.arrays["alpha"] * curve.power(w)
        eff = crosstalk_matrix(mod.width, c1, c2) @ act + mod.arrays["phi0"]
        settings = tuple(MZISetting(t, p) for t, p in eff)
        mods[k] = replace(mod, settings=settings)
    return replace(a, modules=tuple(mods))

