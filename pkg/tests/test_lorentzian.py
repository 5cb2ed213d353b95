import itertools
import warnings

import numpy as np
import pytest

from loopchi.lorentzian import (LorentzianGreens, OffResonanceWarning, chi3_loop,
                                chi3_offresonant_symmetric, chi3_timeordered,
                                resonance_closed_form, resonance_diagram_sum)
from loopchi.model import SystemSpec, two_level_model, vee_model


def ladder_model():
    V = np.zeros((3, 3), dtype=complex)
    V[0, 1] = 1.0
    V[1, 2] = 0.7 + 0.2j
    V[0, 2] = 0.3
    V = V + V.conj().T
    return SystemSpec(("g", "e", "f"), [0.0, 1.1, 2.5], V, [0.7, 0.3, 0.0])


def test_zero_dipoles_give_zero():
    system = SystemSpec(("g", "e"), [0, 1], np.zeros((2, 2)), [1, 0])
    g = LorentzianGreens(system)
    assert chi3_loop(system, g, 0.3, 0.2, 0.1) == 0
    assert chi3_timeordered(system, g, 0.3, 0.2, 0.1) == 0


@pytest.mark.parametrize("model", ["two", "ladder"])
def test_loop_equals_timeordered_isolated(model):
    system = two_level_model(1.0)[0] if model == "two" else ladder_model()
    g = LorentzianGreens(system, eta_reg=1e-10)
    rng = np.random.default_rng(11)
    for _ in range(20):
        w = rng.uniform(-3, 3, 3) + 0.2j
        a = chi3_loop(system, g, *w)
        b = chi3_timeordered(system, g, *w)
        assert abs(a - b) <= 1e-8 * abs(b)


def test_loop_timeordered_gap_scales_with_eta_reg():
    system = two_level_model(1.0)[0]
    w = np.array([0.3, 0.45, -0.2]) + 0.3j
    gaps = []
    for eta in (1e-4, 1e-6):
        g = LorentzianGreens(system, eta_reg=eta)
        gaps.append(abs(chi3_loop(system, g, *w) - chi3_timeordered(system, g, *w)))
    assert gaps[0] / gaps[1] == pytest.approx(100, rel=1e-3)


def test_correlated_vee_loop_misses_resonance():
    system, bath = vee_model(0.5, mode="fast", lam=0.1)
    g = LorentzianGreens.from_bath(system, bath)
    # on the w1 - w2 = w_bd diagonal (field 2 enters as -w2)
    w1, w2, w3 = 9.6, 8.6, 5.0
    a = chi3_loop(system, g, w1, -w2, w3)
    b = chi3_timeordered(system, g, w1, -w2, w3)
    assert abs(a - b) / abs(b) > 0.1


def test_loop_is_eta_independent_for_vee():
    vals = []
    for eta in (0.0, 0.5, 1.0):
        system, bath = vee_model(eta, mode="fast", lam=0.1)
        vals.append(chi3_loop(system, LorentzianGreens.from_bath(system, bath), 9.6, -8.6, 5.0))
    assert vals[0] == pytest.approx(vals[1], rel=1e-14)
    assert vals[0] == pytest.approx(vals[2], rel=1e-14)


def test_broadcasting():
    system, bath = vee_model(0.3, mode="fast")
    g = LorentzianGreens.from_bath(system, bath)
    w1 = np.linspace(9, 10, 4)
    out = chi3_timeordered(system, g, w1, -8.5, 5.0)
    assert out.shape == (4,)
    assert out[2] == pytest.approx(chi3_timeordered(system, g, w1[2], -8.5, 5.0))


def test_symmetric_form_equals_real_loop():
    system = two_level_model(1.0)[0]
    g = LorentzianGreens(system, real=True, eta_reg=0.0)
    w = (0.21, 0.13, -0.07)
    a = chi3_offresonant_symmetric(system, g, *w)
    b = chi3_loop(system, g, *w)
    assert abs(a - b) <= 1e-10 * abs(b)
    for p in itertools.permutations(w):
        assert chi3_offresonant_symmetric(system, g, *p) == pytest.approx(a, rel=1e-14)


def test_symmetric_form_warns_near_resonance():
    system = two_level_model(1.0)[0]
    g = LorentzianGreens(system, widths=np.full((2, 2), 0.01))
    with pytest.warns(OffResonanceWarning):
        chi3_offresonant_symmetric(system, g, 0.9, 0.01, 0.01)
    # every partial sum of (w1, w2, w3, -ws) stays >= 0.13 away from 0 and +-1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        chi3_offresonant_symmetric(system, g, 0.25, 0.4, -0.12)


def test_closed_form_against_uncombined_diagrams():
    rng = np.random.default_rng(12)
    for _ in range(50):
        eta = rng.uniform(0, 1)
        w1, w2 = rng.uniform(8, 11, 2)
        ws = w1 - w2 + rng.uniform(3, 6)
        args = (1.0, 0.8, 10.0, 9.0, 0.1, 0.15, eta, w1, w2, ws)
        assert resonance_closed_form(*args) == pytest.approx(resonance_diagram_sum(*args),
                                                             rel=1e-12)


def test_closed_form_bracket_cancels_at_eta_zero():
    # at eta = 0 the bracket is 1: no w1 - w2 structure beyond the prefactors
    x = np.linspace(0.5, 1.5, 11)
    vals = resonance_closed_form(1, 1, 10, 9, 0.1, 0.1, 0.0, 9 + x / 2, 9 - x / 2, 0.0)
    pre = 1 / ((-10 + 1j * 0.1) * (9 + x / 2 - 10 + 1j * 0.1) * (-(9 - x / 2) + 9 + 1j * 0.1))
    assert np.allclose(vals, pre, rtol=1e-13)


def test_greens_validation():
    system = two_level_model()[0]
    with pytest.raises(ValueError):
        LorentzianGreens(system, eta_reg=0.0)
    with pytest.raises(ValueError):
        LorentzianGreens(system, widths=-np.ones((2, 2)))
