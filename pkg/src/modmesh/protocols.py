"""End-to-end experiments on a simulated device: optical switching,
self-configured tritter and the random-unitary fidelity study."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .calibration import CalibrationTable, INTERNAL, EXTERNAL, calibrate, program
from .decompose import (
    MeshSettings,
    clements_decompose,
    submesh_offset,
    submesh_parking,
    submesh_targets,
)
from .errors import ConvergenceError, DimensionError, MeshError, ModeIndexError, RoutingError
from .imperfections import apply_drive, quantize_drive, zero_drive
from .linalg import amplitude_fidelity, haar_random_unitary, spawn_seeds
from .mesh import (
    NOISELESS,
    Assembly,
    MZISetting,
    NoiseSpec,
    TuningCurve,
    detect,
    propagate,
)

log = logging.getLogger(__name__)

MzId = tuple[int, int]


# --- topology -------------------------------------------------------------

def _successors(a: Assembly, k: int, mode: int):
    """``(mzi_id or None, next_mode)`` pairs leaving module ``k`` from ``mode``; bar first."""
    j = a.modules[k].mzi_at(mode, a.n_modes)
    if j is None:
        return [(None, mode)]
    top, bot = a.modules[k].modes(j)
    other = bot if mode == top else top
    return [((k, j), mode), ((k, j), other)]


def reachable_outputs(a: Assembly, input_mode: int) -> list[int]:
    if not 0 <= input_mode < a.n_modes:
        raise ModeIndexError(f"input mode {input_mode} outside 0..{a.n_modes - 1}")
    modes = {input_mode}
    for k in range(a.n_modules):
        modes = {m2 for m in modes for _, m2 in _successors(a, k, m)}
    return sorted(modes)


def find_path(a: Assembly, input_mode: int, output_mode: int) -> list[MzId]:
    """MZIs met on the way from ``input_mode`` to ``output_mode`` (breadth-first,
    bar moves explored first so ties resolve deterministically)."""
    for m in (input_mode, output_mode):
        if not 0 <= m < a.n_modes:
            raise ModeIndexError(f"mode {m} outside 0..{a.n_modes - 1}")
    start = (0, input_mode)
    prev = {start: None}
    queue = deque([start])
    while queue:
        k, m = queue.popleft()
        if k == a.n_modules:
            continue
        for mzi, m2 in _successors(a, k, m):
            node = (k + 1, m2)
            if node not in prev:
                prev[node] = ((k, m), mzi)
                queue.append(node)
    goal = (a.n_modules, output_mode)
    if goal not in prev:
        raise RoutingError(f"output {output_mode} is not reachable from input {input_mode} "
                           f"through {a.n_modules} modules")
    path = []
    node = goal
    while prev[node] is not None:
        node, mzi = prev[node]
        if mzi is not None:
            path.append(mzi)
    return path[::-1]


# --- measurement ------------------------------------------------------------

def measure_transfer_matrix(a: Assembly, inputs: Sequence[int], outputs: Sequence[int],
                            noise: NoiseSpec = NOISELESS, seed=None) -> np.ndarray:
    """Raw output powers, ``[i, j]`` = power at ``outputs[i]`` for unit input at ``inputs[j]``."""
    for name, modes in (("input", inputs), ("output", outputs)):
        if len(set(modes)) != len(modes) or not modes:
            raise ModeIndexError(f"{name} modes must be distinct and non-empty")
        for m in modes:
            if not 0 <= m < a.n_modes:
                raise ModeIndexError(f"{name} mode {m} outside 0..{a.n_modes - 1}")
    x = np.zeros((a.n_modes, len(inputs)), dtype=complex)
    x[list(inputs), np.arange(len(inputs))] = 1.0
    power = np.abs(propagate(a, x)[list(outputs)]) ** 2
    rng = np.random.default_rng(seed) if noise.sigma else None
    return detect(power, noise, rng)


class _Rig:
    """Mutable drive state of one device during an optimisation run."""

    def __init__(self, a: Assembly, words: list[np.ndarray]):
        self.base = a
        self.words = [w.copy() for w in words]
        self.driven = apply_drive(a, self.words)

    def set(self, k: int, j: int, h: int, w: float):
        self.words[k][j, h] = w
        upd = [None] * self.base.n_modules
        upd[k] = self.words[k]
        self.driven = apply_drive(self.driven, upd)

    def line_search(self, k, j, h, objective, current, analog: bool, maximize=False):
        """Grid sweep of one heater, optionally refined between grid points.

        Keeps the new word only if it strictly improves ``objective``.
        """
        sign = -1.0 if maximize else 1.0
        start = self.words[k][j, h]
        max_word = self.base.modules[k].tuning[j][h].max_word

        def f(w):
            self.set(k, j, h, w)
            return sign * objective(self.driven)

        grid = np.arange(max_word + 1, dtype=float)
        vals = np.array([f(w) for w in grid])
        i = int(np.argmin(vals))
        best_w, best_v = grid[i], vals[i]
        if analog:
            lo, hi = max(0.0, best_w - 1), min(float(max_word), best_w + 1)
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-9, "maxiter": 200})
            if res.fun < best_v:
                best_w, best_v = float(res.x), float(res.fun)
        if best_v < sign * current:
            self.set(k, j, h, best_w)
            return sign * best_v
        self.set(k, j, h, start)
        return current


# --- switch ---------------------------------------------------------------

@dataclass
class SwitchResult:
    input_mode: int
    output_mode: int
    path: list[MzId]
    words: list[np.ndarray]
    assembly: Assembly
    output_powers: np.ndarray
    sweeps: int

    @property
    def routed_fraction(self) -> float:
        return float(self.output_powers[self.output_mode] / self.output_powers.sum())


def configure_switch(a: Assembly, input_mode: int, output_mode: int, max_sweeps: int = 10,
                     tol: float = 1e-6, words: list[np.ndarray] | None = None) -> SwitchResult:
    """Route light from ``input_mode`` to ``output_mode`` by coordinate ascent.

    The MZIs on the breadth-first path start near 50:50 (nominal curve) and
    are then optimised one at a time, in path order, to maximise the power at
    the monitored output. Passes repeat until one improves the power by less
    than ``tol``.
    """
    path = find_path(a, input_mode, output_mode)
    w0 = zero_drive(a) if words is None else words
    rig = _Rig(a, w0)
    for k, j in path:
        half = quantize_drive(np.pi / 2, TuningCurve(), a.analog_drive)[0]
        rig.set(k, j, INTERNAL, half)
    x = np.zeros(a.n_modes, dtype=complex)
    x[input_mode] = 1.0

    def monitored(dev):
        return float(np.abs(propagate(dev, x)[output_mode]) ** 2)

    power = monitored(rig.driven)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        before = power
        for k, j in path:
            power = rig.line_search(k, j, INTERNAL, monitored, power, a.analog_drive,
                                    maximize=True)
        if power - before < tol:
            break
    out = np.abs(propagate(rig.driven, x)) ** 2
    return SwitchResult(input_mode, output_mode, path, rig.words, rig.driven, out, sweeps)


def run_switch_experiment(a: Assembly, input_mode: int | None = None,
                          max_sweeps: int = 10) -> list[SwitchResult]:
    """Switch one input to each reachable output in turn."""
    if input_mode is None:
        input_mode = submesh_offset(a.n_modes, 2) + 1 if a.n_modes > 2 else 0
    return [configure_switch(a, input_mode, o, max_sweeps)
            for o in reachable_outputs(a, input_mode)]


# --- tritter --------------------------------------------------------------

@dataclass
class TritterResult:
    modes: tuple[int, ...]
    words: list[np.ndarray]
    assembly: Assembly
    intensities: np.ndarray
    objective: float
    history: list[float]
    converged: bool


def _uniform_objective(p: np.ndarray) -> float:
    # a dark column scores as all-zero rather than aborting the sweep
    tot = p.sum(axis=0)
    q = np.divide(p, tot, out=np.zeros_like(p), where=tot > 0)
    return float(np.sum((q - 1.0 / p.shape[0]) ** 2))


def self_configure_tritter(a: Assembly, max_sweeps: int = 60, tol: float = 1e-6,
                           noise: NoiseSpec = NOISELESS, seed=None,
                           max_restarts: int = 3,
                           balance: bool = True) -> TritterResult:
    """Tune the central three-mode sub-mesh into a balanced 3x3 splitter.

    Only intensity readings are used. Heaters are visited module by module,
    top to bottom, internal before external, each with a full-grid sweep that
    minimises the squared deviation of the column-normalised 3x3 intensity
    matrix from 1/3. Neighbouring MZIs that touch the three modes start in
    the bar state through their nominal curves. If the descent stalls and
    ``balance`` is set, their internal heaters join the sweep (after the
    mesh MZIs) as variable attenuators that even out unequal path losses.
    A descent that stalls again restarts from a random point drawn from
    ``seed`` (at most ``max_restarts`` times). ``history`` records the
    objective after every accepted or rejected step. Raises
    :class:`ConvergenceError` (carrying the best result) when ``tol`` is not
    reached within ``max_sweeps`` or progress stalls.
    """
    size = 3
    if a.n_modes < size or a.n_modules < size:
        raise DimensionError("a tritter needs at least 3 modes and 3 modules")
    offset, mesh, park = universal_mzis(a, size)
    modes = tuple(range(offset, offset + size))
    slots = sorted(mesh)
    rng = np.random.default_rng(seed)
    nominal = TuningCurve()

    def objective(dev):
        return _uniform_objective(measure_transfer_matrix(dev, modes, modes, noise, rng))

    def start(internal, external):
        words = program(a, park)
        for (k, j), ti, te in zip(slots, internal, external):
            words[k][j, INTERNAL] = quantize_drive(ti, nominal, a.analog_drive)[0]
            words[k][j, EXTERNAL] = quantize_drive(te, nominal, a.analog_drive)[0]
        return _Rig(a, words)

    # 50:50 splitters with unequal input phases; equal phases sit on a saddle
    rig = start([np.pi / 2] * len(slots), [np.pi * q / len(slots) for q in range(len(slots))])
    order = [(k, j, h) for k, j in slots for h in (INTERNAL, EXTERNAL)]
    attenuators = [(k, j, INTERNAL) for k, j in sorted(park)] if balance else []
    current = objective(rig.driven)
    history = [current]
    best = (current, rig)
    restarts = 0
    for _ in range(max_sweeps):
        before = current
        for k, j, h in order:
            current = rig.line_search(k, j, h, objective, current, a.analog_drive)
            history.append(current)
            if current < tol:
                break
        if current < best[0] or rig is best[1]:
            best = (current, rig)
        if current < tol:
            break
        if before - current <= 1e-12 * max(before, 1e-300):
            if attenuators:
                # mesh alone is stuck: let the neighbours trim path losses
                order, attenuators = order + attenuators, []
                continue
            if restarts == max_restarts:
                break
            # stalled away from the target: restart from a random point
            restarts += 1
            rig = start(rng.uniform(0, 2 * np.pi, len(slots)), rng.uniform(0, 2 * np.pi, len(slots)))
            current = objective(rig.driven)
            history.append(current)
    current, rig = best
    p = measure_transfer_matrix(rig.driven, modes, modes)
    result = TritterResult(modes, rig.words, rig.driven, p, current, history, current < tol)
    if not result.converged:
        raise ConvergenceError(
            f"tritter objective {current:.3g} did not reach {tol:g}", current, result)
    return result


# --- universal interferometer -------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    target: np.ndarray | None = None
    settings: MeshSettings | None = None
    measured: np.ndarray | None = None
    fidelity: float | None = None
    error: str | None = None


@dataclass
class ExperimentReport:
    kind: str
    records: list[TrialRecord] = field(default_factory=list)
    modes: tuple[int, ...] = ()

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([r.fidelity for r in self.records if r.fidelity is not None])

    def summary(self) -> dict:
        f = self.fidelities
        if f.size == 0:
            return {"n_trials": len(self.records), "n_ok": 0, "mean": None, "sd": None, "min": None}
        return {"n_trials": len(self.records), "n_ok": int(f.size), "mean": float(f.mean()),
                "sd": float(f.std(ddof=1)) if f.size > 1 else 0.0, "min": float(f.min())}


def universal_mzis(a: Assembly, size: int = 3) -> tuple[int, dict, dict]:
    """Sub-mesh offset, its MZI slots and the bar-parked neighbours."""
    if a.n_modules < size:
        raise DimensionError(f"a {size}x{size} universal mesh needs {size} modules, "
                             f"assembly has {a.n_modules}")
    offset = submesh_offset(a.n_modes, size)
    dummy = MeshSettings(size, tuple((MZISetting(),) * ((size - l % 2) // 2) for l in range(size)),
                         (0.0,) * size)
    mesh = submesh_targets(dummy, offset)
    park = {key: s for key, s in submesh_parking(a, offset, size, mesh).items() if key[0] < size}
    return offset, mesh, park


def program_submesh(a: Assembly, settings: MeshSettings,
                    calibration: CalibrationTable | None = None) -> Assembly:
    """Drive ``settings`` onto the central sub-mesh, parking its neighbours.

    Phases go through the (fitted) tuning curves of ``calibration`` and the
    drive chain, so crosstalk and quantisation act as on the real device.
    """
    offset, mesh, park = universal_mzis(a, settings.n_modes)
    targets = dict(park)
    targets.update(submesh_targets(settings, offset))
    words = program(a, targets, calibration)
    touched = {k for k, _ in targets}
    return apply_drive(a, [words[k] if k in touched else None for k in range(a.n_modules)])


def run_universal_experiment(a: Assembly, n_trials: int = 50, seed=None,
                             noise: NoiseSpec = NoiseSpec(0.005), size: int = 3,
                             calibration: CalibrationTable | None = None,
                             n_cal_points: int = 256) -> ExperimentReport:
    """Program random unitaries into the central sub-mesh and score them.

    Child ``0`` of ``SeedSequence(seed)`` drives calibration noise; child
    ``i + 1`` is split into (unitary, detector) streams for trial ``i``, so
    a trial's outcome does not depend on how many trials run. Calibration is
    done once, on the module bench, unless ``calibration`` is supplied.
    """
    offset, mesh, park = universal_mzis(a, size)
    modes = tuple(range(offset, offset + size))
    children = spawn_seeds(seed, n_trials + 1)
    report = ExperimentReport("universal", modes=modes)
    if n_trials == 0:
        return report
    if calibration is None:
        calibration = calibrate(a, sorted(set(mesh) | set(park)), n_cal_points, noise, children[0])
    for t in range(n_trials):
        rec = TrialRecord(t)
        try:
            s_u, s_noise = spawn_seeds(children[t + 1], 2)
            rec.target = haar_random_unitary(size, s_u)
            rec.settings = clements_decompose(rec.target)
            driven = program_submesh(a, rec.settings, calibration)
            rec.measured = measure_transfer_matrix(driven, modes, modes, noise, s_noise)
            rec.fidelity = amplitude_fidelity(rec.measured, rec.target)
        except MeshError as exc:
            log.warning("trial %d failed: %s", t, exc)
            rec.error = f"{type(exc).__name__}: {exc}"
        report.records.append(rec)
    return report
