"""Simulated characterisation: heater fringe scans, tuning-curve fits and
the thermal-crosstalk measurement.

Scans only look at detector readings. The reference phase that links a
fitted fringe to the heater phase is taken from an ideal nominal model of
the same optical configuration, which is all an experimenter would know.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, RoutingError, ValidationError
from .linalg import spawn_seeds
from .imperfections import apply_drive, quantize_drive, zero_drive
from .mesh import (
    BAR,
    NOISELESS,
    Assembly,
    MZISetting,
    NoiseSpec,
    TuningCurve,
    detect,
    ideal_assembly,
    propagate,
    wrap_phase,
)

INTERNAL, EXTERNAL = 0, 1
HEATERS = {"internal": INTERNAL, "external": EXTERNAL}

MzId = tuple[int, int]


@dataclass(frozen=True)
class FringeScan:
    mzi_id: MzId
    drive_words: np.ndarray
    intensities: np.ndarray
    heater: str = "internal"
    # fitted fringe phase minus heater phase, from the nominal model
    reference_phase: float = np.pi
    levels: int = 256

    def __post_init__(self):
        w = np.asarray(self.drive_words, dtype=float)
        i = np.asarray(self.intensities, dtype=float)
        if w.shape != i.shape or w.ndim != 1:
            raise ValidationError("drive words and intensities must be 1-D and equally long")
        if np.any(np.diff(w) <= 0):
            raise ValidationError("drive words must be strictly increasing")
        if np.any(i < 0):
            raise ValidationError("intensities must be nonnegative")
        object.__setattr__(self, "drive_words", w)
        object.__setattr__(self, "intensities", i)


@dataclass(frozen=True)
class FringeFit:
    """Result of fitting ``I = offset + amplitude * cos(alpha * p + phase)``."""

    curve: TuningCurve
    offset: float
    amplitude: float
    phase: float
    residual_rms: float

    @property
    def visibility(self) -> float:
        return float(np.clip(self.amplitude / self.offset, 0.0, 1.0)) if self.offset > 0 else 0.0

    @property
    def coupling_product(self) -> float:
        """``r(1-r)`` of the couplers, exact when both couplers are equal."""
        v = self.visibility
        return v / (2.0 * (1.0 + v))

    def fringe_curve(self) -> TuningCurve:
        """The fit expressed as a curve of fringe phase versus drive word."""
        return replace(self.curve, phi0=self.phase)


@dataclass(frozen=True)
class MZICalibration:
    internal: FringeFit
    external: FringeFit | None = None


@dataclass
class CalibrationTable:
    """Fitted heater curves per ``(module, mzi)``; unknown heaters fall back
    to the nominal curve."""

    entries: dict[MzId, MZICalibration] = field(default_factory=dict)

    def curve(self, mzi_id: MzId, heater: int = INTERNAL) -> TuningCurve:
        cal = self.entries.get(tuple(mzi_id))
        if cal is None:
            return TuningCurve()
        fit = cal.internal if heater == INTERNAL else cal.external
        return fit.curve if fit is not None else TuningCurve()

    def __contains__(self, mzi_id) -> bool:
        return tuple(mzi_id) in self.entries

    def __len__(self):
        return len(self.entries)


def _curve(table: CalibrationTable | None, mzi_id: MzId, heater: int) -> TuningCurve:
    return table.curve(mzi_id, heater) if table is not None else TuningCurve()


def program(a: Assembly, targets: dict[MzId, MZISetting], table: CalibrationTable | None = None,
            words: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """Drive words realising ``targets`` through the (fitted) tuning curves.

    Heaters not named in ``targets`` keep their entry in ``words`` (default:
    unactuated).
    """
    words = [w.copy() for w in (words if words is not None else zero_drive(a))]
    for (k, j), s in targets.items():
        for h, phase in ((INTERNAL, s.theta), (EXTERNAL, s.phi)):
            words[k][j, h] = quantize_drive(phase, _curve(table, (k, j), h), a.analog_drive)[0]
    return words


def _check_mzi(a: Assembly, mzi_id: MzId) -> tuple[int, int]:
    k, j = mzi_id
    if not 0 <= k < a.n_modules:
        raise RoutingError(f"module {k} does not exist")
    if not 0 <= j < a.modules[k].n_active(a.n_modes):
        raise RoutingError(f"MZI {j} of module {k} is not connected to any fiber")
    return k, j


def _route(a: Assembly, mzi_id: MzId, modes: Iterable[int]) -> dict[MzId, MZISetting]:
    """Bar-state settings carrying ``modes`` straight from the input fibers to
    the target module and on to the output fibers.

    Light entering fiber ``m`` reaches mode ``m`` of any module in as few
    MZIs as possible by going straight, so the straight bar chain is a
    shortest route.
    """
    route = {}
    for kk, mod in enumerate(a.modules):
        if kk == mzi_id[0]:
            continue
        for m in modes:
            j = mod.mzi_at(m, a.n_modes)
            if j is not None:
                route[(kk, j)] = BAR
    return route


def _reference_phase(a: Assembly, mzi_id: MzId, route, heater: int, field_in, out_mode) -> float:
    """Fringe phase at zero heater phase in an ideal copy of the configuration."""
    k, j = mzi_id
    width = max(m.width for m in a.modules)
    ideal = ideal_assembly(a.n_modes, a.n_modules, width)
    for (kk, jj), s in route.items():
        ideal = ideal.with_setting(kk, jj, s)

    def out(x):
        s = MZISetting(x, 0.0) if heater == INTERNAL else MZISetting(np.pi / 2, x)
        return propagate(ideal.with_setting(k, j, s), field_in)[out_mode]

    f0, f1 = out(0.0), out(np.pi / 2)
    q = (f0 - f1) / (1.0 - 1j)
    p = f0 - q
    return wrap_phase(np.angle(q) - np.angle(p))


def fringe_scan(a: Assembly, mzi_id: MzId, n_points: int = 256, seed=None,
                heater: str = "internal", noise: NoiseSpec = NOISELESS,
                table: CalibrationTable | None = None,
                words: list[np.ndarray] | None = None) -> FringeScan:
    """Sweep one heater of ``mzi_id`` and record the power at one output.

    The internal scan injects light into the MZI's top waveguide and watches
    its bar output; the external scan injects equal coherent light into both
    inputs with the internal phase near pi/2. Every MZI touching those
    waveguides elsewhere in the assembly is driven to the bar state using
    ``table`` (or nominal curves).
    """
    if heater not in HEATERS:
        raise ValidationError(f"heater must be one of {sorted(HEATERS)}")
    h = HEATERS[heater]
    k, j = _check_mzi(a, mzi_id)
    if n_points < 2:
        raise ValidationError("a scan needs at least two points")
    top = a.modules[k].modes(j)[0]
    field_in = np.zeros(a.n_modes, dtype=complex)
    if h == INTERNAL:
        modes = (top,)
        field_in[top] = 1.0
    else:
        modes = (top, top + 1)
        field_in[[top, top + 1]] = 1.0 / np.sqrt(2.0)
    route = _route(a, (k, j), modes)
    base = program(a, route, table, words)
    if h == EXTERNAL:
        base[k][j, INTERNAL] = quantize_drive(np.pi / 2, _curve(table, (k, j), INTERNAL),
                                              a.analog_drive)[0]
    max_word = a.modules[k].tuning[j][h].max_word
    scan_words = np.unique(np.rint(np.linspace(0, max_word, n_points)))
    rng = np.random.default_rng(seed)
    out = np.empty(len(scan_words))
    for i, w in enumerate(scan_words):
        base[k][j, h] = w
        driven = apply_drive(a, base)
        out[i] = detect(np.abs(propagate(driven, field_in)[top]) ** 2, noise, rng)
    ref = _reference_phase(a, (k, j), route, h, field_in, top)
    levels = a.modules[k].tuning[j][h].levels
    return FringeScan((k, j), scan_words, out, heater, ref, levels)


def _design(alpha, p):
    ap = alpha * p
    return np.stack([np.ones_like(ap), np.cos(ap), np.sin(ap)], axis=-1)


def fit_tuning_curve(scan: FringeScan, max_iter: int = 200, step_tol: float = 1e-10) -> FringeFit:
    """Least-squares fit of a sinusoidal fringe to a heater scan.

    The frequency is seeded from the strongest sinusoid of a dense
    least-squares periodogram, then all four parameters are refined by
    Levenberg-Marquardt. ``phi0`` of the returned curve is the fitted
    fringe phase minus ``scan.reference_phase``.
    """
    y = scan.intensities
    nominal = TuningCurve(levels=scan.levels)
    p = nominal.power(scan.drive_words)
    if len(y) < 8:
        raise FitError(f"need at least 8 scan points, got {len(y)}")
    span = float(p[-1] - p[0])
    scale = float(np.mean(y))
    if scale <= 0 or np.std(y) < 1e-9 * max(scale, 1e-300):
        raise FitError("scan shows no fringe (constant intensity)")

    # Nyquist: adjacent samples must differ by less than pi in phase
    alpha_max = np.pi / float(np.max(np.diff(p)))
    alphas = np.linspace(0.25 * np.pi / span, alpha_max, 1200)
    x = _design(alphas[:, None], p[None, :])
    gram = np.einsum("kni,knj->kij", x, x)
    rhs = np.einsum("kni,n->ki", x, y)
    coefs = np.linalg.solve(gram, rhs[..., None])[..., 0]
    res = np.sum((np.einsum("kni,ki->kn", x, coefs) - y) ** 2, axis=1)
    best = int(np.argmin(res))
    alpha0, (c0, cc, cs) = alphas[best], coefs[best]
    seed = np.array([c0, np.hypot(cc, cs), alpha0, np.arctan2(-cs, cc)])

    def resid(v):
        return v[0] + v[1] * np.cos(v[2] * p + v[3]) - y

    sol = least_squares(resid, seed, method="lm", xtol=step_tol, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_iter * (len(seed) + 1))
    a0, b, alpha, phase = sol.x
    if b < 0:
        b, phase = -b, phase + np.pi
    if alpha < 0:
        alpha, phase = -alpha, -phase
    if b < 1e-6 * abs(a0):
        raise FitError("fitted fringe amplitude is zero")
    if alpha * span < 2 * np.pi:
        raise FitError(f"scan covers {alpha * span / (2 * np.pi):.2f} fringes; need at least one")
    rms = float(np.sqrt(np.mean(resid(sol.x) ** 2)))
    phase = wrap_phase(phase)
    curve = TuningCurve(float(alpha), wrap_phase(phase - scan.reference_phase), scan.levels)
    return FringeFit(curve, float(a0), float(b), phase, rms)


def calibrate_mzi(a: Assembly, mzi_id: MzId, n_points: int = 256,
                  noise: NoiseSpec = NOISELESS, seed=None, bench: bool = True,
                  external: bool = True) -> MZICalibration:
    """Fit both heaters of one MZI.

    With ``bench`` the module is characterised on its own, before assembly,
    so no other MZI needs to be routed.
    """
    k, j = _check_mzi(a, mzi_id)
    target, key = (a.bench(k), (0, j)) if bench else (a, (k, j))
    s_int, s_ext = spawn_seeds(seed, 2)
    internal = fit_tuning_curve(fringe_scan(target, key, n_points, s_int, "internal", noise))
    ext = None
    if external:
        table = CalibrationTable({key: MZICalibration(internal)})
        ext = fit_tuning_curve(fringe_scan(target, key, n_points, s_ext, "external", noise,
                                           table=table))
    return MZICalibration(internal, ext)


def calibrate(a: Assembly, mzis: Iterable[MzId] | None = None, n_points: int = 256,
              noise: NoiseSpec = NOISELESS, seed=None, bench: bool = True) -> CalibrationTable:
    """Calibrate ``mzis`` (default: every connected MZI) in a fixed order.

    Each MZI gets its own child of ``SeedSequence(seed)`` for detector noise.
    """
    if mzis is None:
        mzis = [(k, j) for k, m in enumerate(a.modules) for j in range(m.n_active(a.n_modes))]
    mzis = list(mzis)
    seeds = spawn_seeds(seed, len(mzis))
    return CalibrationTable({tuple(m): calibrate_mzi(a, m, n_points, noise, s, bench)
                             for m, s in zip(mzis, seeds)})


def measure_crosstalk(a: Assembly, victim: MzId, aggressor: MzId, push_pull: bool = True,
                      noise: NoiseSpec = NoiseSpec(0.005), seed=None,
                      repeats: int = 16) -> float:
    """Crosstalk coefficient of ``aggressor`` onto ``victim`` (phase per phase).

    Both internal heaters are first fitted on the module bench. The victim is
    parked at its steepest fringe point, the aggressor is stepped through
    every drive word from zero to pi of actuation, and the victim's phase is
    read back from its fringe. The slope of victim phase against aggressor
    phase is returned, i.e. the victim deviation per pi of aggressor sweep
    divided by pi.
    """
    victim, aggressor = tuple(victim), tuple(aggressor)
    if victim == aggressor:
        raise ValidationError("victim and aggressor must be different MZIs")
    if victim[0] != aggressor[0]:
        raise ValidationError("crosstalk is only defined between MZIs of the same module")
    k = victim[0]
    _check_mzi(a, victim)
    _check_mzi(a, aggressor)
    bench = replace(a.bench(k), push_pull=push_pull)
    v, g = (0, victim[1]), (0, aggressor[1])
    s_v, s_g, s_m = spawn_seeds(seed, 3)
    fit_v = fit_tuning_curve(fringe_scan(bench, v, 256, s_v, "internal", noise))
    fit_g = fit_tuning_curve(fringe_scan(bench, g, 256, s_g, "internal", noise))

    words = zero_drive(bench)
    words[0][v[1], INTERNAL] = quantize_drive(np.pi / 2, fit_v.fringe_curve(), bench.analog_drive)[0]
    g_curve = fit_g.curve
    g_end = int(np.rint(g_curve.word_for_actuation(np.pi)))
    if g_end > g_curve.max_word:
        raise ValidationError("aggressor cannot be actuated by pi")
    g_words = np.arange(g_curve.zero_word, g_end + 1, dtype=float)

    top = bench.modules[0].modes(v[1])[0]
    field_in = np.zeros(bench.n_modes, dtype=complex)
    field_in[top] = 1.0
    rng = np.random.default_rng(s_m)
    readings = np.empty(len(g_words))
    for i, w in enumerate(g_words):
        words[0][g[1], INTERNAL] = w
        power = np.abs(propagate(apply_drive(bench, words), field_in)[top]) ** 2
        readings[i] = np.mean(detect(np.full(repeats, power), noise, rng))
    c = np.clip((readings - fit_v.offset) / fit_v.amplitude, -1.0, 1.0)
    u = np.arccos(c)  # victim sits near +pi/2 on its fringe
    slope = np.polyfit(g_curve.actuation(g_words), u, 1)[0]
    return float(slope)
