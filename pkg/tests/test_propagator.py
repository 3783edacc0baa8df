import math

import numpy as np
import pytest
import scipy.integrate

from conftest import random_hpd
from oracles import implicit_midpoint, taylor_expm
from evofam.examples import random_problem
from evofam.forms import FormError, NonautonomousForm, NotCoerciveError, shift
from evofam.gelfand import GelfandTriple
from evofam.propagator import (
    ConvergenceError,
    Propagator,
    Subdivision,
    averaged_generator,
    convergence_study,
    fitted_order,
    propagate,
    reference_propagator,
    step,
)


def autonomous(triple, A0, horizon=1.0):
    return NonautonomousForm(triple, horizon, lambda t: A0, 100.0, 0.1)


def test_subdivision_reverse():
    uni = Subdivision.uniform(1.0, 8)
    assert np.allclose(uni.reverse().points, uni.points, atol=1e-15)
    sub = Subdivision([0.0, 0.1, 1.0])
    assert np.allclose(sub.reverse().points, [0.0, 0.9, 1.0], atol=1e-15)
    assert sub.reverse().mesh == pytest.approx(sub.mesh)
    rnd = Subdivision(np.concatenate([[0], np.sort(np.random.default_rng(1).uniform(0, 3, 7)), [3]]))
    assert np.array_equal(rnd.reverse().reverse().points, rnd.points)


def test_subdivision_validation():
    for pts in ([0.0], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, 0.6, 0.4, 1.0]):
        with pytest.raises(FormError):
            Subdivision(pts)


def test_averaged_generator_exactness(rng):
    A0 = rng.standard_normal((3, 3))
    A1 = rng.standard_normal((3, 3))
    tri = GelfandTriple(np.eye(3), np.eye(3))
    form = autonomous(tri, A0)
    assert np.array_equal(averaged_generator(form, 0.2, 0.7), A0) or np.allclose(
        averaged_generator(form, 0.2, 0.7), A0, rtol=0, atol=1e-15
    )
    lin = NonautonomousForm(tri, 1.0, lambda t: A0 + t * A1, 10.0, 0.1)
    for order in (1, 2, 8):
        assert np.allclose(averaged_generator(lin, 0.0, 1.0, order), A0 + 0.5 * A1, atol=1e-14)
    with pytest.raises(FormError):
        averaged_generator(lin, 0.5, 0.5)


def test_averaged_generator_sine(rng):
    B = rng.standard_normal((3, 3))
    tri = GelfandTriple(np.eye(3), np.eye(3))
    form = NonautonomousForm(tri, math.pi, lambda t: math.sin(t) * B, 10.0, 0.1)
    # closed form: (1/pi) int_0^pi sin = 2/pi
    assert np.max(np.abs(averaged_generator(form, 0.0, math.pi, 8) - 2 / math.pi * B)) <= 1e-12


def test_averaged_generator_polynomial_degree(rng):
    tri = GelfandTriple(np.eye(2), np.eye(2))
    B = rng.standard_normal((2, 2))
    # degree 2*order - 1 = 5 is integrated exactly by 3 points
    form = NonautonomousForm(tri, 1.0, lambda t: t**5 * B, 10.0, 0.1)
    assert np.allclose(averaged_generator(form, 0.0, 1.0, 3), B / 6, atol=1e-15)


def test_step_trivial(triple6):
    A = random_hpd(np.random.default_rng(0), 6)
    assert np.array_equal(step(A, 0.0, triple6), np.eye(6))
    E = step(triple6.mass, 0.7, triple6)
    assert np.allclose(E, math.exp(-0.7) * np.eye(6), atol=1e-13)
    with pytest.raises(FormError):
        step(A, -1.0, triple6)
    with pytest.raises(FloatingPointError):
        step(A * np.nan, 0.1, triple6)


def test_step_matches_taylor_oracle(rng):
    tri = GelfandTriple(random_hpd(rng, 4), random_hpd(rng, 4, shift=1.0))
    Y = rng.standard_normal((4, 4))
    A = tri.vgram + (Y - Y.T)
    E = step(A, 0.3, tri)
    ref = taylor_expm(-0.3 * np.linalg.solve(tri.mass, A))
    assert np.max(np.abs(E - ref)) <= 1e-11


def test_propagate_autonomous_collapses(triple6, rng):
    A0 = triple6.vgram + 0.3j * (lambda Y: Y - Y.conj().T)(rng.standard_normal((6, 6)))
    form = autonomous(triple6, A0)
    sub = Subdivision([0.0, 0.13, 0.4, 0.41, 0.8, 1.0])
    for t, s in ((0.9, 0.05), (0.4, 0.13), (1.0, 0.0), (0.3, 0.2)):
        U = propagate(form, sub, t, s).matrix
        assert np.max(np.abs(U - step(A0, t - s, triple6))) <= 1e-12


def test_propagate_identity_and_errors():
    _, form = random_problem(4, seed=0)
    sub = Subdivision.uniform(1.0, 4)
    for t in (0.0, 0.3, 1.0):
        assert np.array_equal(propagate(form, sub, t, t).matrix, np.eye(4))
    with pytest.raises(FormError):
        propagate(form, sub, 0.2, 0.5)
    with pytest.raises(FormError):
        propagate(form, Subdivision.uniform(2.0, 4), 0.5, 0.2)
    with pytest.raises(FormError):
        propagate(form, sub, 1.5, 0.2)


def test_propagate_matches_hand_product():
    tri, form = random_problem(5, seed=11)
    sub = Subdivision([0.0, 0.2, 0.45, 0.7, 1.0])
    pts = sub.points
    A = [averaged_generator(form, pts[k], pts[k + 1]) for k in range(4)]
    t, s = 0.9, 0.1
    expect = step(A[3], t - pts[3], tri) @ step(A[2], pts[3] - pts[2], tri) @ step(A[1], pts[2] - pts[1], tri) @ step(
        A[0], pts[1] - s, tri
    )
    assert np.max(np.abs(propagate(form, sub, t, s).matrix - expect)) <= 1e-12
    # inside a single cell
    assert np.max(np.abs(propagate(form, sub, 0.4, 0.25).matrix - step(A[1], 0.15, tri))) <= 1e-13


def test_cocycle_contractivity_refinement():
    tri, form = random_problem(5, seed=5)
    sub = Subdivision([0.0, 0.15, 0.5, 0.55, 0.9, 1.0])
    prop = Propagator(form, sub)
    rng = np.random.default_rng(3)
    for _ in range(20):
        s, r, t = np.sort(rng.uniform(0, 1, 3))
        U = prop.matrix(t, s)
        assert tri.op_norm(U - prop.matrix(t, r) @ prop.matrix(r, s)) <= 1e-10
        # A0 + phi B has positive semidefinite Hermitian part
        assert tri.op_norm(U) <= 1 + 1e-10
    U = prop.matrix(0.52, 0.1)
    finer = Propagator(form, sub.insert(0.95)).matrix(0.52, 0.1)
    assert np.max(np.abs(U - finer)) <= 1e-13


@pytest.mark.parametrize("omega", [-1.0, 0.0, 2.5])
def test_rescaling_invariance(omega):
    tri, form = random_problem(5, seed=9)
    sub = Subdivision([0.0, 0.3, 0.35, 0.8, 1.0])
    shifted = shift(form, omega)
    for t, s in ((0.9, 0.1), (0.34, 0.31), (1.0, 0.0)):
        lhs = propagate(shifted, sub, t, s).matrix
        rhs = math.exp(-omega * (t - s)) * propagate(form, sub, t, s).matrix
        assert tri.op_norm(lhs - rhs) <= 1e-11


def test_not_coercive_rejected(triple6):
    form = NonautonomousForm(triple6, 1.0, lambda t: -triple6.vgram, 1.0, -1.0)
    with pytest.raises(NotCoerciveError):
        propagate(form, Subdivision.uniform(1.0, 2), 0.5, 0.0)
    # -vgram + w mass is positive definite once w > lambda_max
    shifted = shift(form, 2 * triple6.eigenvalues[-1])
    assert shifted.coercivity > 0
    propagate(shifted, Subdivision.uniform(1.0, 2), 0.5, 0.0)


def test_reference_autonomous(triple6):
    form = autonomous(triple6, 2 * triple6.vgram)
    ref = reference_propagator(form, 0.8, 0.1, tol=1e-10)
    assert ref.level == 2 and ref.difference <= 1e-14
    assert np.max(np.abs(ref.matrix - step(2 * triple6.vgram, 0.7, triple6))) <= 1e-12


def test_reference_failure_is_reported():
    _, form = random_problem(4, seed=2)
    with pytest.raises(ConvergenceError) as info:
        reference_propagator(form, 1.0, 0.0, tol=1e-14, max_level=3)
    assert info.value.last is not None and info.value.difference > 1e-14


def test_reference_against_ode_oracle():
    # Lipschitz-in-t 4x4 form
    tri, form = random_problem(4, seed=21, stiffness=20.0)
    ref = reference_propagator(form, 0.8, 0.1, tol=1e-9)
    Y, _ = implicit_midpoint(form, 0.8, 0.1, tol=1e-11)
    assert tri.op_norm(ref.matrix - Y) <= 1e-6


def test_reference_against_scipy_ode():
    tri, form = random_problem(3, seed=4, stiffness=5.0)
    ref = reference_propagator(form, 1.0, 0.0, tol=1e-9)
    G = lambda t: np.linalg.solve(tri.mass, form(t))
    cols = []
    for j in range(3):
        sol = scipy.integrate.solve_ivp(
            lambda t, y: -G(t) @ y, (0.0, 1.0), np.eye(3, dtype=complex)[j], method="DOP853", rtol=1e-12, atol=1e-13
        )
        cols.append(sol.y[:, -1])
    assert np.max(np.abs(ref.matrix - np.array(cols).T)) <= 1e-7


def test_convergence_study_autonomous(triple6):
    form = autonomous(triple6, triple6.vgram)
    table = convergence_study(form, 1.0, 0.0, [2, 4, 8])
    assert max(table.errors) <= 1e-12


def test_convergence_study_linear_form(rng):
    tri = GelfandTriple(random_hpd(rng, 4), random_hpd(rng, 4, shift=2.0))
    A0 = tri.vgram.copy()
    Y = rng.standard_normal((4, 4))
    A1 = 0.3 * (Y - Y.T) + 0.2 * tri.mass
    form = NonautonomousForm(tri, 1.0, lambda t: A0 + t * A1, 10.0, 0.1)
    levels = [2**k for k in range(1, 9)]
    table = convergence_study(form, 1.0, 0.0, levels, ref_tol=1e-9)
    assert all(b <= a + 1e-13 for a, b in zip(table.errors, table.errors[1:]))
    assert table.order == pytest.approx(2.0, abs=0.2)


def test_convergence_study_errors():
    _, form = random_problem(3, seed=0)
    with pytest.raises(FormError):
        convergence_study(form, 1.0, 0.0, [4, 2])
    with pytest.raises(FormError):
        convergence_study(form, 0.5, 0.5, [2, 4])


def test_fitted_order():
    h = np.array([0.1, 0.05, 0.025])
    assert fitted_order(h, 3 * h**2) == pytest.approx(2.0)
    assert math.isnan(fitted_order([0.1], [1.0]))
