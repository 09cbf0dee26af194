"""Rectangular (Clements-style) compilation of unitaries into MZI phases.

``clements_decompose`` nulls the lower triangle of ``U`` along successive
anti-diagonals, alternating between inverse MZIs applied on the right
(column operations) and MZIs applied on the left (row operations). The
left-applied blocks are then moved through the remaining diagonal so that
``U = diag(exp(i*output_phases)) @ prod(MZI blocks)``. Every block lands in
the layer whose parity matches its top mode, giving ``N`` layers for ``N``
modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .linalg import UNITARY_ATOL, unitarity_error
from .mesh import (
    CROSS,
    BAR,
    Assembly,
    ChipModule,
    MZISetting,
    assembly_transfer,
)

ZERO_TOL = 1e-14


@dataclass(frozen=True)
class MeshSettings:
    """Phases for an ``n_modes``-mode rectangular mesh.

    ``layers[l][q]`` is the MZI of layer ``l`` acting on modes
    ``(l % 2 + 2q, l % 2 + 2q + 1)``. The mesh implements
    ``exp(i*global_phase) * diag(exp(i*output_phases)) @ mesh``.
    """

    n_modes: int
    layers: tuple[tuple[MZISetting, ...], ...]
    output_phases: tuple[float, ...]
    global_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(l) for l in self.layers))
        object.__setattr__(self, "output_phases", tuple(float(p) for p in self.output_phases))
        n = self.n_modes
        if n < 2:
            raise DimensionError("a mesh needs at least 2 modes")
        if len(self.layers) != n:
            raise DimensionError(f"{n}-mode mesh needs {n} layers, got {len(self.layers)}")
        for l, layer in enumerate(self.layers):
            if len(layer) != layer_size(n, l):
                raise DimensionError(
                    f"layer {l} needs {layer_size(n, l)} MZIs, got {len(layer)}")
        if len(self.output_phases) != n:
            raise DimensionError(f"expected {n} output phases")

    def mzis(self):
        """Yield ``(layer, position, top_mode, setting)``."""
        for l, layer in enumerate(self.layers):
            for q, s in enumerate(layer):
                yield l, q, l % 2 + 2 * q, s


def layer_size(n: int, layer: int) -> int:
    return (n - layer % 2) // 2


def _null_column_pair(a: complex, b: complex) -> tuple[float, float]:
    """Phases making ``[a, b] @ T^dagger`` vanish in its first entry."""
    if abs(a) < ZERO_TOL:
        return np.pi, 0.0
    theta = 2.0 * np.arctan2(abs(b), abs(a))
    phi = 0.0 if abs(b) < ZERO_TOL else float(np.angle(-a / b))
    return theta, phi


def _null_row_pair(a: complex, b: complex) -> tuple[float, float]:
    """Phases making the second entry of ``T @ [a, b]`` vanish."""
    if abs(b) < ZERO_TOL:
        return np.pi, 0.0
    theta = 2.0 * np.arctan2(abs(a), abs(b))
    phi = 0.0 if abs(a) < ZERO_TOL else float(np.angle(b / a))
    return theta, phi


def _block(theta: float, phi: float) -> np.ndarray:
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    e = np.exp(1j * phi)
    return 1j * np.exp(1j * theta / 2) * np.array([[e * s, c], [e * c, -s]])


def _commute(theta: float, phi: float, d1: complex, d2: complex):
    """Rewrite ``T(theta, phi)^-1 diag(d1, d2)`` as ``diag(e1, e2) T(theta, phi_new)``."""
    g = -np.exp(-1j * theta)
    s, c = abs(np.sin(theta / 2)), abs(np.cos(theta / 2))
    if c < ZERO_TOL:
        return 0.0, g * np.exp(-1j * phi) * d1, g * d2
    if s < ZERO_TOL:
        return 0.0, g * np.exp(-1j * phi) * d2, g * d1
    return float(np.angle(d1 / d2)), g * np.exp(-1j * phi) * d2, g * d2


def clements_decompose(u: np.ndarray) -> MeshSettings:
    u = np.array(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {u.shape}")
    n = u.shape[0]
    if n < 2:
        raise DimensionError("decomposition needs at least 2 modes")
    err = unitarity_error(u)
    if not err < UNITARY_ATOL:
        raise ValidationError(f"matrix is not unitary (max |U^dag U - I| = {err:.3g})")

    right, left = [], []  # (top mode, theta, phi)
    for i in range(n - 1):
        if i % 2 == 0:
            for j in range(i + 1):
                r, c = n - 1 - j, i - j
                theta, phi = _null_column_pair(u[r, c], u[r, c + 1])
                u[:, c:c + 2] = u[:, c:c + 2] @ _block(theta, phi).conj().T
                right.append((c, theta, phi))
        else:
            for j in range(i + 1):
                r, c = n - 1 - i + j, j
                theta, phi = _null_row_pair(u[r - 1, c], u[r, c])
                u[r - 1:r + 1, :] = _block(theta, phi) @ u[r - 1:r + 1, :]
                left.append((r - 1, theta, phi))

    d = np.diag(u).copy()
    moved = []
    for m, theta, phi in reversed(left):
        phi_new, d[m], d[m + 1] = _commute(theta, phi, d[m], d[m + 1])
        moved.append((m, theta, phi_new))

    # light meets the right-hand blocks first, then the moved ones
    layers = [dict() for _ in range(n)]
    front = [0] * n
    for m, theta, phi in right + moved:
        l = max(front[m], front[m + 1])
        if l >= n or l % 2 != m % 2:
            raise AssertionError(f"block on modes ({m}, {m + 1}) fell into layer {l}")
        layers[l][m] = MZISetting(theta, phi)
        front[m] = front[m + 1] = l + 1

    out = tuple(tuple(layer[m] for m in sorted(layer)) for layer in layers)
    return MeshSettings(n, out, tuple(float(np.angle(x)) % (2 * np.pi) for x in d))


def mesh_assembly(settings: MeshSettings) -> Assembly:
    """Ideal lossless assembly carrying ``settings`` (output phases not included)."""
    n = settings.n_modes
    w = max(1, n // 2)
    mods = []
    for l, layer in enumerate(settings.layers):
        s = list(layer) + [CROSS] * (w - len(layer))
        mods.append(ChipModule.ideal(w, l % 2, s))
    return Assembly(n, tuple(mods), analog_drive=True)


def reconstruct(settings: MeshSettings, n: int | None = None) -> np.ndarray:
    if n is not None and n != settings.n_modes:
        raise DimensionError(f"settings describe {settings.n_modes} modes, not {n}")
    t = assembly_transfer(mesh_assembly(settings))
    phases = np.exp(1j * (np.asarray(settings.output_phases) + settings.global_phase))
    return phases[:, None] * t


def submesh_offset(n_modes: int, size: int) -> int:
    """Even top mode of the most central ``size``-mode window."""
    if size > n_modes:
        raise DimensionError(f"a {size}-mode mesh does not fit in {n_modes} modes")
    a = (n_modes - size) // 2
    return a - a % 2


def submesh_targets(settings: MeshSettings, offset: int) -> dict[tuple[int, int], MZISetting]:
    """Map mesh MZIs to ``(module, mzi)`` slots of an assembly at ``offset``."""
    if offset % 2:
        raise DimensionError("sub-mesh offset must be even to keep layer parity")
    return {(l, offset // 2 + q): s for l, q, _, s in settings.mzis()}


def submesh_parking(a: Assembly, offset: int, size: int,
                    used: dict[tuple[int, int], MZISetting]) -> dict[tuple[int, int], MZISetting]:
    """Bar-state settings for every other MZI that touches the sub-mesh modes."""
    modes = range(offset, offset + size)
    park = {}
    for k, mod in enumerate(a.modules):
        for m in modes:
            j = mod.mzi_at(m, a.n_modes)
            if j is not None and (k, j) not in used:
                park[(k, j)] = BAR
    return park
