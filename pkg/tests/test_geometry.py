import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjbr import DomainSpec, InvalidParamsError, boundary_distance, contains, phi_eval, phi_grad, project_to_domain

alphas = st.floats(0.1, 5.0)


def test_phi_on_boundary_and_centre():
    dom = DomainSpec(1.0)
    assert phi_eval(dom, 1.0) == 0.0
    assert phi_eval(dom, -1.0) == 0.0
    assert phi_eval(dom, 0.0) == pytest.approx(-0.5 * np.e)


def test_unit_outward_normal_at_boundary():
    # At |x| = alpha the gradient is x / alpha: the outward unit normal.
    for alpha in (0.5, 1.0, 2.0):
        dom = DomainSpec(alpha)
        np.testing.assert_allclose(phi_grad(dom, dom.boundary_points), [-1.0, 1.0], rtol=0, atol=1e-15)


@given(alphas, st.floats(-1.0, 1.0))
def test_phi_negative_inside(alpha, s):
    dom = DomainSpec(alpha)
    x = 0.999 * s * alpha
    assert phi_eval(dom, x) < 0


@given(alphas, st.floats(-0.99, 0.99))
def test_gradient_matches_finite_difference(alpha, s):
    dom = DomainSpec(alpha)
    x = s * alpha
    h = 1e-6 * alpha
    fd = (phi_eval(dom, x + h) - phi_eval(dom, x - h)) / (2 * h)
    # Central differences lose digits in proportion to |phi| ~ exp(alpha^2).
    scale = np.exp(alpha * alpha)
    assert phi_grad(dom, x) == pytest.approx(fd, rel=1e-6, abs=1e-7 * scale)


def test_ball_gradient_matches_finite_difference(rng):
    dom = DomainSpec(1.5, dim=3)
    x = rng.uniform(-0.8, 0.8, size=3)
    h = 1e-6
    fd = [(phi_eval(dom, x + h * e) - phi_eval(dom, x - h * e)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(phi_grad(dom, x), fd, rtol=1e-6, atol=1e-8)


@given(alphas, st.floats(-10.0, 10.0))
def test_projection_interval(alpha, x):
    dom = DomainSpec(alpha)
    xp, dl = project_to_domain(dom, x)
    assert bool(contains(dom, xp))
    assert dl >= 0
    assert dl == pytest.approx(abs(x - xp))
    if abs(x) <= alpha:
        assert xp == x and dl == 0
    else:
        assert boundary_distance(dom, xp) == 0


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_projection_ball(coords):
    dom = DomainSpec(1.0, dim=2)
    x = np.array(coords)
    xp, dl = project_to_domain(dom, x)
    assert np.linalg.norm(xp) <= 1.0
    assert dl == pytest.approx(max(np.linalg.norm(x) - 1.0, 0.0), abs=1e-12)


def test_projection_idempotent(rng):
    dom = DomainSpec(1.0)
    x = rng.normal(scale=3, size=100)
    xp, _ = project_to_domain(dom, x)
    xpp, dl = project_to_domain(dom, xp)
    np.testing.assert_array_equal(xp, xpp)
    assert np.all(dl == 0)


@pytest.mark.parametrize("alpha", [0.0, -1.0, np.inf, np.nan])
def test_invalid_alpha(alpha):
    with pytest.raises(InvalidParamsError):
        DomainSpec(alpha)


def test_boundary_points_interval_only():
    with pytest.raises(InvalidParamsError):
        DomainSpec(1.0, dim=2).boundary_points
