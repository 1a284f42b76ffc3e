import numpy as np
import pytest
from scipy.integrate import quad

from fscl.errors import ConfigurationError
from fscl.flux import FluxModel, engquist_osher, lax_friedrichs, max_wave_speed
from fscl.grid import Field, make_grid


def eo_oracle(uL, uR, model):
    # split the integrals at the sign changes of a so quad sees smooth pieces
    roots = np.polynomial.Polynomial(model.coef).deriv().roots()
    kinks = sorted(r.real for r in roots if abs(r.imag) < 1e-12)

    def signed(f, lo, hi):
        pts = [lo] + [k for k in kinks if min(lo, hi) < k < max(lo, hi)][:: 1 if hi >= lo else -1] + [hi]
        return sum(quad(f, a, b, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(pts, pts[1:]))

    pos = signed(lambda s: max(model.a(s), 0.0), 0.0, uL)
    neg = signed(lambda s: min(model.a(s), 0.0), 0.0, uR)
    return model.A(0.0) + pos + neg


def test_engquist_osher_examples():
    burgers = FluxModel("burgers")
    assert engquist_osher(1.0, -1.0, burgers) == 1.0
    for c in (-2.0, -0.3, 0.0, 1.5):
        assert engquist_osher(c, c, burgers) == c * c / 2
    assert engquist_osher(3.0, 7.0, FluxModel("linear", speed=2.0)) == 6.0


def test_polynomial_burgers_matches_closed_form(rng):
    poly = FluxModel("polynomial", coefficients=(0.0, 0.0, 0.5))
    burgers = FluxModel("burgers")
    uL, uR = rng.uniform(-3, 3, size=(2, 50))
    assert np.allclose(engquist_osher(uL, uR, poly), engquist_osher(uL, uR, burgers),
                       rtol=0, atol=1e-14)


@pytest.mark.parametrize("coef", [(0.1, -0.2, 0.3, 0.4), (0.0, 1.0, 0.0, -1.0, 0.25)])
def test_polynomial_eo_against_quadrature(coef, rng):
    model = FluxModel("polynomial", coefficients=coef)
    for uL, uR in rng.uniform(-2, 2, size=(20, 2)):
        assert engquist_osher(uL, uR, model) == pytest.approx(eo_oracle(uL, uR, model),
                                                               rel=1e-10, abs=1e-12)


def test_consistency_random(rng):
    model = FluxModel("polynomial", coefficients=(0.0, 0.3, -0.5, 0.2))
    c = rng.uniform(-3, 3, size=100)
    assert np.allclose(engquist_osher(c, c, model), model.A(c), rtol=1e-12, atol=1e-12)


def test_monotonicity(rng):
    for model in (FluxModel("burgers"), FluxModel("polynomial", coefficients=(0, 0.2, -1, 0, 0.3))):
        uL, uR = rng.uniform(-2, 2, size=(2, 500))
        h = rng.uniform(1e-6, 1e-2, size=500)
        base = engquist_osher(uL, uR, model)
        assert np.all(engquist_osher(uL + h, uR, model) >= base)
        assert np.all(engquist_osher(uL, uR + h, model) <= base)


def test_lax_friedrichs_consistent():
    model = FluxModel("burgers")
    assert lax_friedrichs(0.7, 0.7, model, 2.0) == pytest.approx(0.245, rel=1e-15)


def test_max_wave_speed_examples():
    g = make_grid(1.0, 8)
    f = Field(g, np.linspace(-2.0, 3.0, 8))
    assert max_wave_speed(f, FluxModel("burgers")) == 3.0
    assert max_wave_speed(f, FluxModel("linear", speed=-4.0)) == 4.0
    assert max_wave_speed(Field(g, np.zeros(8)), FluxModel("burgers")) == 0.0


def test_bad_flux_rejected():
    with pytest.raises(ConfigurationError):
        FluxModel("cubic")
    with pytest.raises(ConfigurationError):
        FluxModel("polynomial", coefficients=(1, 2, 3, 4, 5, 6))
