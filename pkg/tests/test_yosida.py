import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import custom_generator
from gbsde_lab.errors import BracketFailure, ConfigError
from gbsde_lab.yosida import (dissipative_part, make_generator, regularized_generator,
                              regularized_spec, resolvent, validate_assumptions,
                              yosida_approximant)

ZERO = make_generator("zero", 1.0)
LIN2 = custom_generator(lambda t, y, z: -2.0 * np.asarray(y))          # F = -2y
CUBIC = custom_generator(lambda t, y, z: -np.asarray(y) ** 3)           # F = -y^3


def linear_with_rate(k, u):
    """f = -k y + u y, so F = -k y whatever the rate."""
    return custom_generator(lambda t, y, z: (u - k) * np.asarray(y), u=u)


# F = f - u y

def test_dissipative_part_cancels_rate_term():
    spec = custom_generator(lambda t, y, z: 0.3 * np.asarray(y), u=0.3)
    assert dissipative_part(spec, 0.2, np.array([-4.0, 0.0, 5.0]), 0.0).tolist() == [0.0, 0.0, 0.0]


def test_dissipative_part_linear():
    assert dissipative_part(linear_with_rate(2.0, 0.7), 0.0, 3.0, 0.0) == pytest.approx(-6.0)


def test_dissipative_part_signed_sqrt():
    spec = custom_generator(lambda t, y, z: -np.sign(y) * np.sqrt(np.abs(y)), u=1.0)
    assert dissipative_part(spec, 0.0, 4.0, 0.0) == -6.0


# resolvent

@pytest.mark.parametrize("alpha", [1e-4, 0.5, 3.0])
def test_identity_resolvent(alpha):
    assert resolvent(ZERO, alpha, 0.0, 7.0, 0.0).x == 7.0


def test_linear_resolvent():
    assert resolvent(LIN2, 0.5, 0.0, 3.0, 0.0).x == pytest.approx(1.5, abs=1e-12)


def test_cubic_resolvent():
    res = resolvent(CUBIC, 1.0, 0.0, 2.0, 0.0)
    assert abs(res.x - 1.0) <= 1e-10
    assert abs(res.residual) <= 1e-12


def test_resolvent_is_deterministic():
    y = np.linspace(-9, 9, 41)
    a = resolvent(CUBIC, 0.37, 0.0, y, 0.0).x
    b = resolvent(CUBIC, 0.37, 0.0, y, 0.0).x
    assert np.array_equal(a, b)


def test_resolvent_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        resolvent(CUBIC, 0.0, 0.0, 1.0, 0.0)


def test_non_finite_generator_fails_to_bracket():
    spec = custom_generator(lambda t, y, z: np.full(np.shape(y), np.inf))
    with pytest.raises(BracketFailure):
        resolvent(spec, 1.0, 0.0, 1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(1e-4, 1.0), st.floats(-50.0, 50.0))
def test_linear_resolvent_closed_form(k, alpha, y):
    x = resolvent(linear_with_rate(k, 0.0), alpha, 0.0, y, 0.0).x
    assert abs(x - y / (1 + alpha * k)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 0.99))
def test_resolvent_is_a_contraction(alpha, y1, y2, t):
    spec = make_generator("signed_sqrt", 1.0)
    x = resolvent(spec, alpha, t, np.array([y1, y2]), 0.3).x
    assert abs(x[0] - x[1]) <= abs(y1 - y2) + 4e-12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_singular_rate_at_horizon_fails_to_bracket():
    with pytest.raises(BracketFailure):
        resolvent(make_generator("signed_sqrt", 1.0), 0.5, 1.0, 0.0, 0.0)


# Yosida approximant and regularized generator

def test_approximant_of_zero_is_zero():
    assert yosida_approximant(ZERO, 0.2, 0.0, 5.0, 0.0) == 0.0


def test_approximant_linear():
    value = yosida_approximant(LIN2, 0.5, 0.0, 3.0, 0.0)
    assert value == pytest.approx(-3.0, abs=1e-11)
    assert abs(value) <= 6.0


def test_approximant_cubic():
    assert yosida_approximant(CUBIC, 1.0, 0.0, 2.0, 0.0) == pytest.approx(-1.0, abs=1e-10)


def test_regularized_pure_rate_term():
    spec = custom_generator(lambda t, y, z: 0.3 * np.asarray(y), u=0.3)
    assert regularized_generator(spec, 0.5, 0.0, 3.0, 0.0) == pytest.approx(0.9, abs=1e-15)


def test_regularized_linear():
    spec = linear_with_rate(2.0, 0.3)
    assert regularized_generator(spec, 0.5, 0.0, 3.0, 0.0) == pytest.approx(-2.1, abs=1e-11)


def test_regularized_cubic_limit():
    gaps = [abs(regularized_generator(CUBIC, a, 0.0, 2.0, 0.0) + 8.0)
            for a in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2


def test_regularized_spec_wraps_generator():
    spec = make_generator("piecewise_kink", 1.0)
    reg = regularized_spec(spec, 0.1)
    assert reg.L == spec.L and reg.params["alpha"] == 0.1
    assert reg(0.2, 1.5, 0.4) == regularized_generator(spec, 0.1, 0.2, 1.5, 0.4)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 0.9))
def test_regularized_generator_is_lipschitz_in_y(alpha, y1, y2, t):
    spec = make_generator("signed_sqrt", 1.0)
    f = regularized_generator(spec, alpha, t, np.array([y1, y2]), 0.0)
    lip = 2.0 / alpha + float(spec.u(t))
    assert abs(f[0] - f[1]) <= lip * abs(y1 - y2) + 8e-12 / alpha


# generator catalog

@pytest.mark.parametrize("name", ["zero", "linear_decay", "signed_sqrt", "piecewise_kink"])
def test_catalog_generators_satisfy_assumptions(name):
    report = validate_assumptions(make_generator(name, 1.0), 10_000, seed=3)
    assert report.passed, report.to_json()


def test_signed_sqrt_constants():
    spec = make_generator("signed_sqrt", 1.0, {"L": 0.7})
    assert spec.L == 0.7
    assert spec.u_squared_integral() == pytest.approx(2.0, rel=1e-6)
    assert spec.u_squared_integral() <= spec.M * (1 + 1e-6)
    assert float(spec.f(0.0, 4.0, 0.0)) == -2.0


def test_make_generator_rejects_unknowns():
    with pytest.raises(ConfigError, match="unknown generator"):
        make_generator("quadratic", 1.0)
    with pytest.raises(ConfigError, match="does not take"):
        make_generator("signed_sqrt", 1.0, {"k": 1.0})


# assumption validator

def test_squared_generator_fails_monotonicity_with_witness():
    spec = custom_generator(lambda t, y, z: np.asarray(y) ** 2, u=1.0)
    report = validate_assumptions(spec, 2000, seed=0)
    h2 = report.checks["monotone_y"]
    assert not report.passed and not h2["passed"]
    w = h2["witness"]
    assert (w["y1"] - w["y2"]) * (w["y1"] ** 2 - w["y2"] ** 2) > (w["y1"] - w["y2"]) ** 2


def test_squared_generator_hand_witness():
    spec = custom_generator(lambda t, y, z: np.asarray(y) ** 2, u=1.0)
    lhs = (2 - 0) * (spec.f(0, 2.0, 0) - spec.f(0, 0.0, 0))
    assert lhs == 8.0 > float(spec.u(0.0)) * 2 ** 2


def test_zero_generator_passes_everything():
    report = validate_assumptions(ZERO, 500)
    assert report.passed
    assert set(report.checks) == {"monotone_y", "growth", "lipschitz_z", "rate"}


def test_validator_is_seed_deterministic():
    spec = custom_generator(lambda t, y, z: np.asarray(y) ** 2, u=1.0)
    a = validate_assumptions(spec, 300, seed=11).to_json()
    assert a == validate_assumptions(spec, 300, seed=11).to_json()
    assert math.isfinite(validate_assumptions(spec, 300, seed=12).checks["monotone_y"]["witness"]["y1"])
