import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gjm.postsel import (
    NO_CLICK, abe_dist, closed_form_entropies, entropies, evaluate_form, exact_information_form,
    log2_form, monte_carlo, parity_reconcile,
)

FIELDS = ("h_A_given_E", "h_A_given_Eprime", "i_AB_minus_AE", "i_BA_minus_BE")


def test_table_example_two_thirds():
    dist = abe_dist(2, Fraction(2, 3))
    assert dist.exact
    assert dist.table[(0, 0, 0)] == Fraction(1, 3)
    assert dist.table[(1, 1, 1)] == Fraction(1, 3)
    for a in range(2):
        for e in range(2):
            assert dist.table[(a, NO_CLICK, e)] == Fraction(1, 12)
    assert dist.table[(0, 0, 1)] == 0
    assert sum(dist.table.values()) == 1


def test_table_extremes():
    one = abe_dist(3, 1)
    assert {k for k, p in one.cells()} == {(a, a, a) for a in range(3)}
    zero = abe_dist(3, 0)
    cells = dict(zero.cells())
    assert all(b == NO_CLICK for _, b, _ in cells)
    assert all(p == Fraction(1, 9) for p in cells.values())


def test_table_accepts_rational_strings_and_floats():
    assert abe_dist(2, "2/3").eta == Fraction(2, 3)
    dist = abe_dist(5, 0.37)
    assert not dist.exact
    assert sum(dist.table.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d,eta", [(1, 0.5), (2.5, 0.5), (2, 1.5), (2, -0.1)])
def test_domain_errors(d, eta):
    with pytest.raises(ValueError):
        abe_dist(d, eta)


def test_two_thirds_example():
    dist = abe_dist(2, Fraction(2, 3))
    assert exact_information_form(dist, "i_BA_minus_BE") == {}
    rep = entropies(dist)
    assert rep.i_BA_minus_BE == pytest.approx(0.0, abs=1e-15)
    assert rep.h_A_given_Eprime == pytest.approx(1 / 3, abs=1e-12)
    assert rep.i_AB_minus_AE > 0
    assert exact_information_form(dist, "i_AB_minus_AE") != {}


def test_exact_form_evaluates_to_float_value():
    dist = abe_dist(3, Fraction(1, 4))
    for name in FIELDS:
        form = exact_information_form(dist, name)
        assert evaluate_form(form) == pytest.approx(getattr(entropies(dist), name), abs=1e-12)
    with pytest.raises(ValueError):
        exact_information_form(abe_dist(2, 0.5), "h_A_given_E")


def test_log2_form():
    assert log2_form(Fraction(12, 5)) == {2: 2, 3: 1, 5: -1}
    assert log2_form(Fraction(1)) == {}


@pytest.mark.parametrize("d", range(2, 7))
def test_closed_forms_match_table_summation(d):
    for i in range(11):
        eta = i / 10
        table = entropies(abe_dist(d, eta))
        closed = closed_form_entropies(d, eta)
        for name in FIELDS:
            assert abs(getattr(table, name) - getattr(closed, name)) <= 1e-12


@pytest.mark.parametrize("d", range(2, 7))
def test_announcement_lowers_eve_uncertainty(d):
    for i in range(1, 10):
        rep = entropies(abe_dist(d, i / 10))
        assert rep.h_A_given_Eprime < rep.h_A_given_E
        assert min(rep.h_A_given_E, rep.h_A_given_Eprime) >= 0


@pytest.mark.parametrize("d", range(2, 7))
@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
def test_direct_reconciliation_rate_positive(d, eta):
    assert entropies(abe_dist(d, eta)).i_AB_minus_AE > 0


def test_reverse_reconciliation_rate_vanishes_exactly():
    for d in (2, 3, 5):
        for eta in (Fraction(1, 7), Fraction(1, 2), Fraction(9, 10)):
            assert exact_information_form(abe_dist(d, eta), "i_BA_minus_BE") == {}


def test_scaling_by_rounds():
    rep = entropies(abe_dist(2, Fraction(2, 3))).scaled(15)
    assert rep.n_rounds == 15
    assert rep.h_A_given_Eprime == pytest.approx(5.0)


def test_monte_carlo_within_three_sigma():
    est = monte_carlo(abe_dist(4, 0.5), 1_000_000, seed=7)
    closed = closed_form_entropies(4, 0.5)
    for name in FIELDS:
        e = est[name]
        assert e.samples == 1_000_000
        assert abs(e.value - getattr(closed, name)) <= 3 * e.sigma


def test_monte_carlo_is_seeded():
    a = monte_carlo(abe_dist(2, 0.5), 10_000, seed=3, bootstrap=20)
    b = monte_carlo(abe_dist(2, 0.5), 10_000, seed=3, bootstrap=20)
    assert {k: v.value for k, v in a.items()} == {k: v.value for k, v in b.items()}


# --- parity reconciliation -----------------------------------------------

def test_parity_example():
    out, leaked = parity_reconcile("00101", f"001{NO_CLICK}1", 5)
    assert out == "00101"
    assert leaked == [(0, 0)]


def test_parity_without_erasures_leaks_one_parity():
    out, leaked = parity_reconcile("10110", "10110", 5)
    assert out == "10110" and len(leaked) == 1


def test_parity_two_erasures_unchanged():
    bob = f"0{NO_CLICK}1{NO_CLICK}1"
    out, _ = parity_reconcile("00101", bob, 5)
    assert out == bob


def test_parity_errors():
    with pytest.raises(ValueError):
        parity_reconcile("0010", "00101", 5)
    with pytest.raises(ValueError):
        parity_reconcile("00101", "00101", 1)
    with pytest.raises(ValueError):
        parity_reconcile("00101", "00x01", 5)


@given(st.data())
def test_parity_never_corrupts(data):
    n = data.draw(st.integers(2, 40))
    alice = data.draw(st.text("01", min_size=n, max_size=n))
    mask = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    block = data.draw(st.integers(2, 8))
    bob = "".join(NO_CLICK if m else a for a, m in zip(alice, mask))
    out, leaked = parity_reconcile(alice, bob, block)
    assert len(leaked) == math.ceil(n / block)
    for i, (a, b, o) in enumerate(zip(alice, bob, out)):
        if b != NO_CLICK:
            assert o == b
        elif o != NO_CLICK:
            assert o == a
