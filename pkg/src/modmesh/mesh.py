"""Transfer-matrix model of MZIs, chip modules and interlaced assemblies.

Conventions
-----------
An MZI acting on modes ``(m, m+1)`` has transfer matrix

    T = L * C(r2) @ P(theta) @ C(r1) @ P(phi)

with ``P(x) = diag(exp(ix), 1)`` (the heater sits on the top arm, i.e. the
lower mode index) and ``C(r) = [[sqrt(r), i sqrt(1-r)], [i sqrt(1-r), sqrt(r)]]``.
``L`` is the amplitude transmission from the coupler excess losses and the
arm propagation loss. With 50:50 lossless couplers ``|T00|**2 = sin(theta/2)**2``,
so ``theta = 0`` is the cross state and ``theta = pi`` the bar state.

Module ``k`` of an assembly has parity ``k % 2``; its MZI ``j`` couples modes
``(parity + 2j, parity + 2j + 1)``. MZIs that would run off the last mode are
inactive, and modes not covered by an active MZI pass straight through.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, ModeIndexError, ValidationError

TWO_PI = 2.0 * np.pi
NOMINAL_TUNING_RANGE = 2.7 * np.pi
DRIVE_LEVELS = 256


def wrap_phase(x: float) -> float:
    """Wrap into ``[0, 2pi)``; guards the float edge case where ``x % 2pi == 2pi``."""
    w = float(x) % TWO_PI
    return 0.0 if w >= TWO_PI else w


def db_to_amplitude(db) -> np.ndarray | float:
    return 10.0 ** (-np.asarray(db, dtype=float) / 20.0)


@dataclass(frozen=True)
class MZISetting:
    """Internal phase ``theta`` and input-arm phase ``phi`` (radians, stored wrapped)."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.phi)):
            raise ValidationError(f"non-finite MZI phases ({self.theta}, {self.phi})")
        object.__setattr__(self, "theta", wrap_phase(self.theta))
        object.__setattr__(self, "phi", wrap_phase(self.phi))


BAR = MZISetting(np.pi, 0.0)
CROSS = MZISetting(0.0, 0.0)


@dataclass(frozen=True)
class MZIHardware:
    """Fabricated parameters of one MZI.

    ``r1`` and ``r2`` are the intensity ratios that stay in the same waveguide
    at the input and output coupler. ``coupler_excess_loss_db`` holds the
    excess loss of each of the two couplers.
    """

    r1: float = 0.5
    r2: float = 0.5
    coupler_excess_loss_db: tuple[float, float] = (0.0, 0.0)
    arm_loss_db: float = 0.0

    def __post_init__(self):
        for name in ("r1", "r2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if min(self.coupler_excess_loss_db) < 0 or self.arm_loss_db < 0:
            raise ValidationError("loss values must be nonnegative")

    @property
    def loss_db(self) -> float:
        return float(sum(self.coupler_excess_loss_db) + self.arm_loss_db)

    @property
    def amplitude(self) -> float:
        return float(db_to_amplitude(self.loss_db))


IDEAL_MZI = MZIHardware()


@dataclass(frozen=True)
class TuningCurve:
    """Heater response: phase versus PWM drive word in push-pull operation.

    The normalised push-pull power is ``p(d) = (d - levels//2) / (levels - 1)``,
    so word 128 is exactly zero actuation and the 256 words span one unit of
    power. The phase is ``phi0 + alpha * p(d)`` and the actuated span equals
    ``alpha``.
    """

    alpha: float = NOMINAL_TUNING_RANGE
    phi0: float = 0.0
    levels: int = DRIVE_LEVELS

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError(f"tuning curve needs alpha > 0, got {self.alpha}")
        if self.levels < 2:
            raise ValidationError("tuning curve needs at least two drive levels")

    @property
    def zero_word(self) -> int:
        return self.levels // 2

    @property
    def max_word(self) -> int:
        return self.levels - 1

    @property
    def range(self) -> float:
        return self.alpha

    @property
    def step(self) -> float:
        return self.alpha / (self.levels - 1)

    def power(self, word):
        return (np.asarray(word, dtype=float) - self.zero_word) / (self.levels - 1)

    def actuation(self, word):
        return self.alpha * self.power(word)

    def phase(self, word):
        return self.phi0 + self.actuation(word)

    def word_for_actuation(self, actuation):
        """Fractional drive word producing the given actuated phase."""
        return self.zero_word + np.asarray(actuation, dtype=float) / self.step


NOMINAL_CURVE = TuningCurve()


def _mzi_blocks(theta, phi, r1, r2, amp):
    """Vectorised 2x2 entries (t00, t01, t10, t11) of the MZI model."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s1, c1 = np.sqrt(r1), 1j * np.sqrt(1.0 - np.asarray(r1))
    s2, c2 = np.sqrt(r2), 1j * np.sqrt(1.0 - np.asarray(r2))
    et = np.exp(1j * theta)
    ep = np.exp(1j * phi)
    # C(r2) P(theta) C(r1), then the input phase multiplies column 0
    a00 = s2 * et * s1 + c2 * c1
    a01 = s2 * et * c1 + c2 * s1
    a10 = c2 * et * s1 + s2 * c1
    a11 = c2 * et * c1 + s2 * s1
    return amp * a00 * ep, amp * a01, amp * a10 * ep, amp * a11


def mzi_transfer(setting: MZISetting, hardware: MZIHardware = IDEAL_MZI) -> np.ndarray:
    t00, t01, t10, t11 = _mzi_blocks(setting.theta, setting.phi, hardware.r1,
                                     hardware.r2, hardware.amplitude)
    return np.array([[t00, t01], [t10, t11]], dtype=complex)


@dataclass(frozen=True)
class ChipModule:
    """One chip: a column of MZIs at a fixed parity offset.

    ``hardware``, ``settings`` and ``tuning`` are indexed by MZI position;
    ``tuning[j]`` is the ``(internal, external)`` heater pair of MZI ``j``.
    ``arm_loss_db`` is the propagation loss seen by pass-through waveguides.
    """

    parity: int
    hardware: tuple[MZIHardware, ...]
    settings: tuple[MZISetting, ...]
    tuning: tuple[tuple[TuningCurve, TuningCurve], ...] = ()
    arm_loss_db: float = 0.0

    def __post_init__(self):
        if self.parity not in (0, 1):
            raise ValidationError(f"parity must be 0 or 1, got {self.parity}")
        w = len(self.hardware)
        if w == 0:
            raise ValidationError("a module needs at least one MZI")
        object.__setattr__(self, "hardware", tuple(self.hardware))
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.tuning:
            object.__setattr__(self, "tuning", ((NOMINAL_CURVE, NOMINAL_CURVE),) * w)
        else:
            object.__setattr__(self, "tuning", tuple(tuple(t) for t in self.tuning))
        if len(self.settings) != w or len(self.tuning) != w:
            raise ValidationError("hardware, settings and tuning lengths differ")

    @classmethod
    def ideal(cls, width: int, parity: int, settings: Sequence[MZISetting] | None = None):
        if settings is None:
            settings = (CROSS,) * width
        return cls(parity, (IDEAL_MZI,) * width, tuple(settings))

    @property
    def width(self) -> int:
        return len(self.hardware)

    def modes(self, j: int) -> tuple[int, int]:
        top = self.parity + 2 * j
        return top, top + 1

    def n_active(self, n_modes: int) -> int:
        return max(0, min(self.width, (n_modes - self.parity) // 2))

    def mzi_at(self, mode: int, n_modes: int) -> int | None:
        """Index of the active MZI touching ``mode``, or None for a pass-through."""
        j = (mode - self.parity) // 2
        if mode < self.parity or j >= self.n_active(n_modes):
            return None
        return j

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        """Per-MZI parameters as arrays (cached; modules are immutable)."""
        return {
            "theta": np.array([s.theta for s in self.settings]),
            "phi": np.array([s.phi for s in self.settings]),
            "r1": np.array([h.r1 for h in self.hardware]),
            "r2": np.array([h.r2 for h in self.hardware]),
            "amp": np.array([h.amplitude for h in self.hardware]),
            "alpha": np.array([[t.alpha for t in pair] for pair in self.tuning]),
            "phi0": np.array([[t.phi0 for t in pair] for pair in self.tuning]),
        }

    @cached_property
    def blocks(self) -> tuple[np.ndarray, ...]:
        """Cached ``(t00, t01, t10, t11)`` arrays over all MZIs."""
        p = self.arrays
        return _mzi_blocks(p["theta"], p["phi"], p["r1"], p["r2"], p["amp"])

    def with_settings(self, settings: Sequence[MZISetting]) -> "ChipModule":
        return replace(self, settings=tuple(settings))

    def with_setting(self, j: int, setting: MZISetting) -> "ChipModule":
        s = list(self.settings)
        s[j] = setting
        return replace(self, settings=tuple(s))


def _apply_module(mod: ChipModule, x: np.ndarray) -> np.ndarray:
    """Propagate fields ``x`` (modes x columns) through one module."""
    n = x.shape[0]
    k = mod.n_active(n)
    out = x * db_to_amplitude(mod.arm_loss_db)
    if k == 0:
        return out
    t00, t01, t10, t11 = (t[:k] for t in mod.blocks)
    top = slice(mod.parity, mod.parity + 2 * k, 2)
    bot = slice(mod.parity + 1, mod.parity + 2 * k + 1, 2)
    a, b = x[top], x[bot]
    out[top] = t00[:, None] * a + t01[:, None] * b
    out[bot] = t10[:, None] * a + t11[:, None] * b
    return out


def module_transfer(mod: ChipModule, n_modes: int) -> np.ndarray:
    if n_modes < 2 or mod.n_active(n_modes) == 0:
        raise DimensionError(f"module with parity {mod.parity} does not fit in {n_modes} modes")
    return _apply_module(mod, np.eye(n_modes, dtype=complex))


@dataclass(frozen=True)
class Assembly:
    """Ordered stack of interlaced modules plus the drive-chain properties.

    ``crosstalk`` holds the push-pull thermal coupling to the nearest and
    next-nearest heater (in units of the aggressor's actuated phase); it is
    multiplied by ``single_heater_factor`` when ``push_pull`` is off.
    ``analog_drive`` lifts the 8-bit restriction on drive words.
    """

    n_modes: int
    modules: tuple[ChipModule, ...]
    fiber_loss_db: float = 0.0
    interface_loss_db: float = 0.0
    crosstalk: tuple[float, float] = (0.0, 0.0)
    single_heater_factor: float = 2.0
    push_pull: bool = True
    analog_drive: bool = False

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        object.__setattr__(self, "crosstalk", tuple(float(c) for c in self.crosstalk))
        if self.n_modes < 2:
            raise DimensionError(f"an assembly needs at least 2 modes, got {self.n_modes}")
        for k, mod in enumerate(self.modules):
            if mod.parity != k % 2:
                raise ValidationError(f"module {k} has parity {mod.parity}, expected {k % 2}")
        if self.fiber_loss_db < 0 or self.interface_loss_db < 0:
            raise ValidationError("loss values must be nonnegative")

    @property
    def n_modules(self) -> int:
        return len(self.modules)

    def replace_module(self, k: int, mod: ChipModule) -> "Assembly":
        mods = list(self.modules)
        mods[k] = mod
        return replace(self, modules=tuple(mods))

    def with_setting(self, k: int, j: int, setting: MZISetting) -> "Assembly":
        return self.replace_module(k, self.modules[k].with_setting(j, setting))

    def bench(self, k: int) -> "Assembly":
        """Module ``k`` alone between two fibers, as characterised before assembly."""
        mod = replace(self.modules[k], parity=0)
        return replace(self, n_modes=2 * mod.width, modules=(mod,), interface_loss_db=0.0)


def ideal_assembly(n_modes: int, n_modules: int, width: int | None = None) -> Assembly:
    """Lossless 50:50 assembly with every MZI in the cross state."""
    if n_modules < 1:
        raise DimensionError("an assembly needs at least one module")
    w = width if width is not None else max(1, n_modes // 2)
    mods = tuple(ChipModule.ideal(w, k % 2) for k in range(n_modules))
    return Assembly(n_modes, mods, analog_drive=True)


def propagate(a: Assembly, x: np.ndarray) -> np.ndarray:
    """Output fields for input fields ``x`` (shape ``(n_modes,)`` or ``(n_modes, k)``)."""
    if not a.modules:
        raise DimensionError("assembly has no modules")
    x = np.asarray(x, dtype=complex)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    if x.shape[0] != a.n_modes:
        raise DimensionError(f"input has {x.shape[0]} modes, assembly has {a.n_modes}")
    fiber = db_to_amplitude(a.fiber_loss_db)
    iface = db_to_amplitude(a.interface_loss_db)
    y = x * fiber
    for k, mod in enumerate(a.modules):
        if k:
            y = y * iface
        y = _apply_module(mod, y)
    y = y * fiber
    return y[:, 0] if vec else y


def assembly_transfer(a: Assembly) -> np.ndarray:
    return propagate(a, np.eye(a.n_modes, dtype=complex))


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative Gaussian detector noise with relative s.d. ``sigma``."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("noise sigma must be nonnegative")


NOISELESS = NoiseSpec(0.0)


def detect(power: np.ndarray, noise: NoiseSpec, rng: np.random.Generator | None) -> np.ndarray:
    power = np.asarray(power, dtype=float)
    if noise.sigma == 0:
        return power
    if rng is None:
        raise ValidationError("noisy detection needs a random generator")
    return np.clip(power * (1.0 + noise.sigma * rng.standard_normal(power.shape)), 0.0, None)


def measure_intensities(a: Assembly, input_mode: int, noise: NoiseSpec = NOISELESS,
                        seed=None) -> np.ndarray:
    """Output powers for unit power injected into ``input_mode``."""
    if not 0 <= input_mode < a.n_modes:
        raise ModeIndexError(f"input mode {input_mode} outside 0..{a.n_modes - 1}")
    x = np.zeros(a.n_modes, dtype=complex)
    x[input_mode] = 1.0
    rng = np.random.default_rng(seed) if noise.sigma else None
    return detect(np.abs(propagate(a, x)) ** 2, noise, rng)
