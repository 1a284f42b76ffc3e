import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fscl.flux import FluxModel, engquist_osher
from fscl.fractional import QuadratureSpec, quadrature_weights
from fscl.grid import Field, integrate, make_grid, positive_part_integral
from fscl.kinetic import XiGrid, compute_m1
from fscl.noise import NoiseIncrement, NoiseModel
from fscl.solver import SolverConfig, step

finite = st.floats(-3.0, 3.0, allow_nan=False)
coefs = st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=1, max_size=5)
alphas = st.floats(0.05, 0.95)


def fields(n):
    return arrays(float, n, elements=st.floats(-2.0, 2.0, allow_nan=False))


def flux_models():
    return st.one_of(
        st.just(FluxModel("burgers")),
        st.floats(-2.0, 2.0).map(lambda s: FluxModel("linear", speed=s)),
        coefs.map(lambda c: FluxModel("polynomial", coefficients=tuple(c))),
    )


@given(flux_models(), finite, finite, st.floats(0.0, 1.0))
def test_eo_monotone_and_consistent(model, u, v, h):
    # nondecreasing in the left state, nonincreasing in the right state
    assert engquist_osher(u + h, v, model) >= engquist_osher(u, v, model)
    assert engquist_osher(u, v + h, model) <= engquist_osher(u, v, model)
    assert np.isclose(engquist_osher(u, u, model), model.A(u), rtol=1e-12, atol=1e-11)


@settings(deadline=None, max_examples=50)
@given(fields(32), alphas)
def test_quadrature_form_nonnegative(v, alpha):
    w = quadrature_weights(make_grid(1.0, 32), alpha)
    assert np.all(w >= 0)
    form = sum(w[j] * np.dot(v - np.roll(v, -j), v - np.roll(v, -j)) for j in range(1, 32))
    assert form >= 0


@settings(deadline=None, max_examples=40)
@given(fields(16), alphas, st.floats(0.02, 0.5))
def test_m1_nonnegative_with_exact_total(v, alpha, dxi):
    g = make_grid(1.0, 16)
    xi = XiGrid.bracketing(v.min(), v.max(), dxi)
    w = np.asarray(quadrature_weights(g, alpha))
    m = compute_m1(Field(g, v), alpha, QuadratureSpec(), xi)
    assert np.all(m >= 0)
    total = g.dx * sum(w[j] * np.dot(v - np.roll(v, -j), v - np.roll(v, -j))
                       for j in range(1, 16)) / 2
    assert np.isclose(m.sum(), total, rtol=1e-10, atol=1e-12)


@given(fields(16), fields(16), finite, finite)
def test_integrate_is_linear(a, b, s, t):
    g = make_grid(2.0, 16)
    lhs = integrate(Field(g, s * a + t * b))
    rhs = s * integrate(Field(g, a)) + t * integrate(Field(g, b))
    assert np.isclose(lhs, rhs, atol=1e-10)


@given(fields(16), fields(16))
def test_positive_part_identity(a, b):
    g = make_grid(1.0, 16)
    f, h = Field(g, a), Field(g, b)
    # (f - g)^+ - (g - f)^+ = f - g and (f - g)^+ + (g - f)^+ = |f - g|
    pp, pm = positive_part_integral(f, h), positive_part_integral(h, f)
    assert np.isclose(pp - pm, integrate(Field(g, a - b)), atol=1e-12)
    assert np.isclose(pp + pm, g.dx * np.sum(np.abs(a - b)), atol=1e-12)


@settings(deadline=None, max_examples=40)
@given(fields(32), alphas, st.floats(0.0, 0.1), st.floats(1e-4, 0.05),
       st.booleans(), st.integers(0, 2**31))
def test_step_conserves_mass(v, alpha, eps, dt, noisy, seed):
    noise = NoiseModel(K=4, c=0.2 if noisy else 0.0, b1=0.0)
    cfg = SolverConfig(N=32, alpha=alpha, epsilon=eps, noise=noise)
    inc = NoiseIncrement(np.random.default_rng(seed).normal(0, np.sqrt(dt), 4), dt, (seed,))
    u = Field(cfg.grid, v)
    out = step(u, dt, cfg, inc)
    # noise modes have zero mean, so additive forcing preserves mass too
    assert abs(integrate(out) - integrate(u)) <= 1e-12 * (1 + np.abs(v).sum())
