import numpy as np
import pytest

from conftest import random_hpd
from evofam.examples import build_robin, random_problem, stock_problem, RobinProblem
from evofam.forms import FormError, NonautonomousForm, shift
from evofam.gelfand import GelfandTriple
from evofam.propagator import Propagator, Subdivision
from evofam.properties import (
    MODULUS_SPACES,
    check_axioms,
    check_duality,
    check_rescaling,
    continuity_modulus,
    modulus_tables,
    pair_grid,
    random_pairs,
    random_triples,
    vprime_extension_bound,
)


@pytest.fixture(scope="module")
def stock():
    return stock_problem()[1]


@pytest.fixture(scope="module")
def sub8():
    return Subdivision.random(1.0, 8, seed=3)


def hermitian_autonomous(rng, n=5):
    tri = GelfandTriple(random_hpd(rng, n), random_hpd(rng, n, shift=2.0))
    return NonautonomousForm(tri, 1.0, lambda t: tri.vgram, 1.0, 1.0)


def test_axioms_autonomous(rng):
    form = hermitian_autonomous(rng)
    rep = check_axioms(form, Subdivision.random(1.0, 5, seed=1), random_triples(1.0, 30, seed=2))
    assert rep.max_identity_defect == 0.0
    assert rep.max_cocycle_defect <= 1e-11
    assert rep.samples == 30


def test_axioms_stock(stock, sub8):
    rep = check_axioms(stock, sub8, random_triples(1.0, 50, seed=7))
    assert rep.max_identity_defect == 0.0
    assert rep.max_cocycle_defect <= 1e-10


def test_axioms_rejects_malformed_triples(stock, sub8):
    with pytest.raises(FormError):
        check_axioms(stock, sub8, [(0.2, 0.5, 0.9)])
    with pytest.raises(FormError):
        check_axioms(stock, sub8, [(0.2, 0.1)])


def test_duality_autonomous_hermitian(rng):
    form = hermitian_autonomous(rng)
    rep = check_duality(form, Subdivision.random(1.0, 6, seed=4), random_pairs(1.0, 10, seed=5))
    assert rep.max_defect <= 1e-11


def test_duality_small_nonsymmetric():
    tri, form = random_problem(2, seed=11)
    rep = check_duality(form, Subdivision.random(1.0, 4, seed=2), random_pairs(1.0, 10, seed=3))
    assert rep.max_defect <= 1e-10


def test_duality_wrong_partition_is_large(stock, sub8):
    pairs = random_pairs(1.0, 10, seed=1)
    good = check_duality(stock, sub8, pairs)
    bad = check_duality(stock, sub8, pairs, reverse_partition=False)
    assert good.max_defect <= 1e-9
    assert bad.max_defect > 1e-3
    # on a uniform partition the mirror coincides with the partition
    uni = Subdivision.uniform(1.0, 8)
    assert check_duality(stock, uni, pairs, reverse_partition=False).max_defect <= 1e-9


def test_duality_rejects_pairs_outside_triangle(stock, sub8):
    for bad in ([(0.2, 0.5)], [(1.5, 0.0)], [(0.5, -0.1)]):
        with pytest.raises(FormError):
            check_duality(stock, sub8, bad)


@pytest.mark.parametrize("omega", [-1.0, 2.5])
def test_duality_shift_invariant(stock, sub8, omega):
    pairs = random_pairs(1.0, 8, seed=9)
    base = check_duality(stock, sub8, pairs).max_defect
    shifted = check_duality(shift(stock, omega), sub8, pairs).max_defect
    assert abs(shifted - base) <= 1e-11


@pytest.mark.parametrize("omega", [-1.0, 0.0, 2.5])
def test_rescaling(stock, sub8, omega):
    rep = check_rescaling(stock, sub8, random_pairs(1.0, 10, seed=1), omega)
    assert rep.max_defect <= 1e-11
    if omega == 0.0:
        assert rep.max_defect == 0.0


def test_extension_autonomous_contraction(rng):
    form = hermitian_autonomous(rng)
    rep = vprime_extension_bound(form, Subdivision.uniform(1.0, 4), random_pairs(1.0, 10, seed=2))
    for c in (rep.bound_vprime, rep.bound_adjoint_v, rep.bound_h, rep.bound_v):
        assert c <= 1 + 1e-10


def test_extension_agreement(stock, sub8):
    rep = vprime_extension_bound(stock, sub8, random_pairs(1.0, 10, seed=1))
    assert rep.agreement_defect <= 1e-9
    assert abs(rep.bound_vprime - rep.bound_adjoint_v) <= 1e-9
    assert np.isfinite(rep.bound_vprime)


def test_extension_robin_finite():
    _, form = build_robin(RobinProblem(n_elems=16))
    rep = vprime_extension_bound(form, Subdivision.random(1.0, 8, seed=0), random_pairs(1.0, 6, seed=0))
    assert 0 < rep.bound_vprime < np.inf
    assert rep.agreement_defect <= 1e-9


def test_pair_grid_properties():
    grid = pair_grid(1.0, 0.1, 30, seed=4, decades=2.0)
    deltas = [abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in grid]
    assert max(deltas) / min(deltas) == pytest.approx(100.0, rel=1e-9)
    for a, b in grid:
        for t, s in (a, b):
            assert 0 <= s and t <= 1.0 and t - s >= 0.1
    assert grid == pair_grid(1.0, 0.1, 30, seed=4, decades=2.0)
    with pytest.raises(FormError):
        pair_grid(1.0, 0.0, 5)
    with pytest.raises(FormError):
        pair_grid(1.0, 1.0, 5)


def test_modulus_autonomous_equal_elapsed(rng):
    form = hermitian_autonomous(rng)
    prop = Propagator(form, Subdivision.uniform(1.0, 10))
    # pairs with equal elapsed time give equal increments
    shifts = [0.0, 0.05, 0.13, 0.2]
    for sp in MODULUS_SPACES:
        incs = []
        for c in shifts:
            D = prop.matrix(0.7 + c, 0.1 + c) - prop.matrix(0.75 + c, 0.1 + c)
            incs.append(form.triple.op_norm(D, sp))
        assert max(incs) - min(incs) <= 1e-11
    grid = [((0.7 + c, 0.1 + c), (0.75 + c, 0.1 + c)) for c in shifts]
    tab = continuity_modulus(form, Subdivision.uniform(1.0, 10), "H", 0.1, grid)
    assert np.ptp(tab.increments) <= 1e-11


def test_modulus_rejects_near_diagonal(stock, sub8):
    with pytest.raises(FormError):
        continuity_modulus(stock, sub8, "H", 0.1, [((0.5, 0.45), (0.6, 0.3))])
    with pytest.raises(FormError):
        continuity_modulus(stock, sub8, "L2", 0.1, [((0.5, 0.1), (0.6, 0.3))])
    with pytest.raises(FormError):
        continuity_modulus(stock, sub8, "H", -1.0, [((0.5, 0.1), (0.6, 0.3))])


def test_modulus_tables_stock(stock):
    fine = Subdivision.uniform(1.0, 64)
    grid = pair_grid(1.0, 0.1, 24, seed=2, decades=2.5)
    tables = modulus_tables(stock, fine, 0.1, grid)
    for sp in MODULUS_SPACES:
        tab = tables[sp]
        assert tab.fitted_exponent > 0
        assert np.all(tab.increments >= 0)
        inc = tab.increments[np.argsort(tab.deltas)]
        k = max(1, len(inc) // 10)
        assert inc[:k].max() < inc[-k:].max()
        # agrees with the single-space route
        single = continuity_modulus(stock, fine, sp, 0.1, grid)
        assert np.allclose(single.increments, tab.increments, rtol=0, atol=1e-15)
    h, v, vp = (tables[sp].increments for sp in ("H", "V", "Vprime"))
    assert np.all(h <= np.sqrt(v * vp) * (1 + 1e-6))


def test_checks_independent_of_workers(stock, sub8):
    pairs = random_pairs(1.0, 10, seed=1)
    a = check_duality(stock, sub8, pairs, workers=1)
    b = check_duality(stock, sub8, pairs, workers=4)
    assert a.to_dict() == b.to_dict()
    grid = pair_grid(1.0, 0.1, 12, seed=0)
    ta = modulus_tables(stock, sub8, 0.1, grid, workers=1)
    tb = modulus_tables(stock, sub8, 0.1, grid, workers=3)
    assert all(ta[sp].entries == tb[sp].entries for sp in MODULUS_SPACES)
