import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autohet.entanglement import (entropy_vs_pump_sweep, pulsed_grid, pulsed_model_jsa,
                                  schmidt_decompose, schmidt_from_matrix)
from autohet.errors import ConfigurationError
from autohet.spectral import Axis, single_mode_lorentzian_g

TWO_PI = 2 * math.pi
GAMMA = TWO_PI * 7e6
WM0 = TWO_PI * 250e6


def test_separable_input():
    x = np.linspace(-3, 3, 128)
    m = np.outer(np.exp(-x ** 2), np.exp(-(x - 0.5) ** 2 / 2) * np.exp(1j * x))
    sp = schmidt_from_matrix(m)
    assert sp.coefficients[0] == pytest.approx(1.0, abs=1e-8)
    assert sp.entropy_nat == pytest.approx(0.0, abs=1e-8)
    assert sp.schmidt_number == pytest.approx(1.0, abs=1e-8)


def test_two_term_superposition():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(64, 2)) + 1j * rng.normal(size=(64, 2)))
    r, _ = np.linalg.qr(rng.normal(size=(64, 2)))
    m = np.outer(q[:, 0], r[:, 0]) + np.outer(q[:, 1], r[:, 1])
    sp = schmidt_from_matrix(m)
    assert sp.entropy_bits == pytest.approx(1.0, abs=1e-12)
    assert sp.entropy_nat == pytest.approx(math.log(2), abs=1e-12)
    assert sp.schmidt_number == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * math.pi))
def test_invariants_and_global_phase(seed, phase):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(20, 30)) + 1j * rng.normal(size=(20, 30))
    a = schmidt_from_matrix(m)
    b = schmidt_from_matrix(m * np.exp(1j * phase))
    np.testing.assert_allclose(a.coefficients, b.coefficients, rtol=0, atol=1e-12)
    assert abs(a.coefficients.sum() - 1) < 1e-9
    assert np.all(np.diff(a.coefficients) <= 0) and np.all(a.coefficients >= 0)
    assert a.entropy_nat >= 0 and a.schmidt_number >= 1


def test_k_one_iff_e_zero():
    x = np.linspace(-2, 2, 64)
    sep = schmidt_from_matrix(np.outer(x + 3, np.cos(x)))
    assert sep.schmidt_number == pytest.approx(1, abs=1e-10) and sep.entropy_nat < 1e-10
    ent = schmidt_from_matrix(np.exp(-np.subtract.outer(x, x) ** 2))
    assert ent.schmidt_number > 1 + 1e-3 and ent.entropy_nat > 1e-3


def test_cw_amplitude_rejected():
    jsa = single_mode_lorentzian_g(Axis(0.0, 10 * WM0, 256), GAMMA, WM0)
    with pytest.raises(ConfigurationError, match="cw"):
        schmidt_decompose(jsa)


def test_grid_convergence_at_model_parameters():
    sigma = TWO_PI * 5e6
    coarse = schmidt_decompose(pulsed_model_jsa(sigma, GAMMA, WM0))
    n = pulsed_grid(0.5 * WM0, -0.5 * WM0, GAMMA, sigma).signal_axis.n_points
    fine = schmidt_decompose(pulsed_model_jsa(sigma, GAMMA, WM0, points_per_fwhm=16))
    assert pulsed_grid(0.5 * WM0, -0.5 * WM0, GAMMA, sigma, points_per_fwhm=16).signal_axis.n_points == 2 * n
    assert abs(fine.entropy_nat / coarse.entropy_nat - 1) < 0.01


def test_sweep_strictly_decreasing_and_sorted():
    rows = entropy_vs_pump_sweep([TWO_PI * 50e6, TWO_PI * 5e6, TWO_PI * 0.5e6], GAMMA, WM0)
    assert [r["sigma_p_hz"] for r in rows] == pytest.approx([0.5e6, 5e6, 50e6])
    e = [r["entropy_nat"] for r in rows]
    assert e[0] > e[1] > e[2] > 0
    for r in rows:
        assert r["entropy_bits"] == pytest.approx(r["entropy_nat"] / math.log(2))


def test_broad_pump_is_near_separable():
    sp = schmidt_decompose(pulsed_model_jsa(1e4 * GAMMA, GAMMA, WM0))
    assert sp.entropy_nat < 0.05 and sp.entropy_bits < 0.05


def test_filters_need_parameters():
    with pytest.raises(ConfigurationError):
        pulsed_model_jsa(TWO_PI * 5e6, GAMMA, WM0, include_filters=True)
