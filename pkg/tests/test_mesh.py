import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, strategies as st

from modmesh.errors import DimensionError, ModeIndexError, ValidationError
from modmesh.linalg import haar_random_unitary, unitarity_error
from modmesh.mesh import (
    BAR,
    CROSS,
    Assembly,
    ChipModule,
    MZIHardware,
    MZISetting,
    NoiseSpec,
    assembly_transfer,
    ideal_assembly,
    measure_intensities,
    module_transfer,
    mzi_transfer,
)

phases = st.floats(-20, 20, allow_nan=False)
ratios = st.floats(0, 1)


def oracle_mzi(theta, phi, r1=0.5, r2=0.5, loss_db=0.0):
    def coupler(r):
        return np.array([[np.sqrt(r), 1j * np.sqrt(1 - r)], [1j * np.sqrt(1 - r), np.sqrt(r)]])

    def shift(x):
        return np.diag([np.exp(1j * x), 1.0])

    return 10 ** (-loss_db / 20) * coupler(r2) @ shift(theta) @ coupler(r1) @ shift(phi)


def random_assembly(n, n_modules, rng, lossless=True):
    w = n // 2
    mods = []
    for k in range(n_modules):
        s = [MZISetting(*rng.uniform(0, 2 * np.pi, 2)) for _ in range(w)]
        mods.append(ChipModule.ideal(w, k % 2, s))
    return Assembly(n, tuple(mods))


# --- single MZI -----------------------------------------------------------

def test_cross_state():
    assert np.allclose(mzi_transfer(CROSS), [[0, 1j], [1j, 0]], atol=1e-15)


def test_bar_state():
    assert np.allclose(mzi_transfer(BAR), [[-1, 0], [0, 1]], atol=1e-15)


@given(phases, phases, ratios, ratios, st.floats(0, 10))
def test_mzi_matches_explicit_product(theta, phi, r1, r2, loss):
    h = MZIHardware(r1, r2, (loss / 2, loss / 4), loss / 4)
    t = mzi_transfer(MZISetting(theta, phi), h)
    assert np.allclose(t, oracle_mzi(theta, phi, r1, r2, loss), atol=1e-12)


@given(phases, phases)
def test_ideal_reflectivity_law(theta, phi):
    t = mzi_transfer(MZISetting(theta, phi))
    assert abs(abs(t[0, 0]) ** 2 - np.sin(theta / 2) ** 2) < 1e-12
    assert unitarity_error(t) < 1e-12


def test_imperfect_coupler_extinction_floor():
    # (sqrt(r1 r2) - sqrt((1-r1)(1-r2)))^2 at r1 = r2 = 0.57
    h = MZIHardware(0.57, 0.57)
    thetas = np.linspace(0, 2 * np.pi, 20001)
    p = [abs(mzi_transfer(MZISetting(t, 0.0), h)[0, 0]) ** 2 for t in thetas]
    assert abs(min(p) - 0.0196) < 1e-8


@given(phases, phases, ratios, ratios)
def test_intensities_two_pi_periodic(theta, phi, r1, r2):
    h = MZIHardware(r1, r2)
    a = np.abs(mzi_transfer(MZISetting(theta, phi), h)) ** 2
    b = np.abs(mzi_transfer(MZISetting(theta + 2 * np.pi, phi - 2 * np.pi), h)) ** 2
    assert np.allclose(a, b, atol=1e-12)


@given(phases, phases)
def test_setting_wraps_into_range(theta, phi):
    s = MZISetting(theta, phi)
    assert 0 <= s.theta < 2 * np.pi and 0 <= s.phi < 2 * np.pi


def test_setting_rejects_nan():
    with pytest.raises(ValidationError):
        MZISetting(np.nan, 0.0)


def test_hardware_validation():
    with pytest.raises(ValidationError):
        MZIHardware(r1=1.2)
    with pytest.raises(ValidationError):
        MZIHardware(coupler_excess_loss_db=(-1.0, 0.0))


# --- modules --------------------------------------------------------------

def test_bar_module_parity0():
    mod = ChipModule.ideal(3, 0, [BAR] * 3)
    assert np.allclose(module_transfer(mod, 6), np.diag([-1, 1, -1, 1, -1, 1]))


def test_parity1_module_passes_edge_modes():
    rng = np.random.default_rng(0)
    s = [MZISetting(*rng.uniform(0, 6, 2)) for _ in range(10)]
    mod = replace(ChipModule.ideal(10, 1, s), arm_loss_db=0.875)
    assert mod.n_active(20) == 9
    m = module_transfer(mod, 20)
    amp = 10 ** (-0.875 / 20)
    for edge in (0, 19):
        e = np.zeros(20)
        e[edge] = 1
        assert np.allclose(m[:, edge], amp * e)
        assert np.allclose(m[edge, :], amp * e)


def test_single_mzi_splitter():
    mod = ChipModule.ideal(1, 0, [MZISetting(np.pi / 2, 0.0)])
    p = np.abs(module_transfer(mod, 2)[:, 0]) ** 2
    assert np.allclose(p, [0.5, 0.5], atol=1e-15)


def test_mzi_modes_geometry():
    mod = ChipModule.ideal(10, 1)
    assert mod.modes(0) == (1, 2)
    assert mod.modes(8) == (17, 18)
    assert mod.mzi_at(0, 20) is None and mod.mzi_at(19, 20) is None
    assert mod.mzi_at(5, 20) == 2


def test_module_parity_checked():
    with pytest.raises(ValidationError):
        ChipModule.ideal(2, 2)


# --- assemblies -----------------------------------------------------------

def test_alternating_parity_enforced():
    mods = (ChipModule.ideal(2, 0), ChipModule.ideal(2, 0))
    with pytest.raises(ValidationError):
        Assembly(4, mods)


def test_three_bar_modules_identity_pattern():
    a = ideal_assembly(20, 3)
    for k in range(3):
        a = Assembly(20, tuple(m.with_settings([BAR] * m.width) for m in a.modules))
    t = assembly_transfer(a)
    assert np.allclose(np.abs(np.diag(t)) ** 2, 1.0)
    assert np.allclose(np.abs(t) ** 2, np.eye(20), atol=1e-15)


@pytest.mark.parametrize("n", [4, 6, 20])
def test_lossless_assemblies_are_unitary(n):
    rng = np.random.default_rng(n)
    for _ in range(1000 if n < 20 else 200):
        a = random_assembly(n, n, rng)
        assert unitarity_error(assembly_transfer(a)) < 1e-10


def test_bar_path_transmission():
    # fibers 0.3 dB x2, interfaces 0.2 dB x2, couplers 2.1 dB x 6 = 13.6 dB
    hw = MZIHardware(0.5, 0.5, (2.1, 2.1), 0.0)
    mods = tuple(ChipModule(k % 2, (hw,) * 10, (BAR,) * 10) for k in range(3))
    a = Assembly(20, mods, fiber_loss_db=0.3, interface_loss_db=0.2)
    p = measure_intensities(a, 9)
    expected = 10 ** (-(0.3 * 2 + 0.2 * 2 + 2.1 * 6) / 10)
    assert abs(p[9] - expected) < 1e-12
    assert abs(expected - 0.043652) < 1e-6


def test_lossy_assembly_is_subunitary(rng):
    from modmesh.imperfections import ImperfectionSpec, Layout, sample_hardware
    a = sample_hardware(ImperfectionSpec(), Layout(), seed=3)
    sv = np.linalg.svd(assembly_transfer(a), compute_uv=False)
    assert sv.max() <= 1 + 1e-12


@given(st.integers(0, 10**6), st.floats(0.01, 3))
def test_extra_loss_lowers_every_output(s, extra):
    rng = np.random.default_rng(s)
    a = random_assembly(8, 4, rng)
    a = replace(a, fiber_loss_db=0.1, interface_loss_db=0.1)
    base = measure_intensities(a, 3)
    m1 = a.modules[1]
    hot = replace(m1, arm_loss_db=extra,
                  hardware=tuple(replace(h, arm_loss_db=extra) for h in m1.hardware))
    for lossier in (replace(a, fiber_loss_db=0.1 + extra),
                    replace(a, interface_loss_db=0.1 + extra),
                    a.replace_module(1, hot)):
        p = measure_intensities(lossier, 3)
        nz = base > 1e-12
        assert np.all(p[nz] < base[nz])


def test_one_input_reaches_at_most_six_outputs():
    rng = np.random.default_rng(1)
    sizes = []
    for _ in range(50):
        a = random_assembly(20, 3, rng)
        for m in (0, 9, 19):
            p = measure_intensities(a, m)
            sizes.append((m, int(np.sum(p > 1e-20))))
    assert all(s <= 6 for _, s in sizes)
    assert all(s == 6 for m, s in sizes if m == 9)


def test_measure_intensities_bar_state():
    a = ideal_assembly(20, 3)
    a = Assembly(20, tuple(m.with_settings([BAR] * m.width) for m in a.modules))
    p = measure_intensities(a, 4)
    e = np.zeros(20)
    e[4] = 1
    assert np.allclose(p, e, atol=1e-15)


def test_measure_intensities_sum_and_noise_reproducible():
    rng = np.random.default_rng(3)
    a = random_assembly(20, 3, rng)
    assert measure_intensities(a, 7).sum() <= 1 + 1e-12
    x = measure_intensities(a, 7, NoiseSpec(0.01), seed=5)
    y = measure_intensities(a, 7, NoiseSpec(0.01), seed=5)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, measure_intensities(a, 7))


def test_measure_intensities_bad_mode():
    with pytest.raises(ModeIndexError):
        measure_intensities(ideal_assembly(4, 2), 4)


def test_empty_assembly_rejected():
    with pytest.raises(DimensionError):
        assembly_transfer(Assembly(4, ()))


def test_bench_is_a_standalone_module():
    a = ideal_assembly(20, 3)
    b = a.bench(1)
    assert b.n_modes == 20 and b.n_modules == 1 and b.modules[0].parity == 0
    assert b.modules[0].n_active(20) == 10


def test_haar_unitary_dimension_mismatch():
    with pytest.raises(DimensionError):
        from modmesh.mesh import propagate
        propagate(ideal_assembly(4, 2), haar_random_unitary(3, 0))
