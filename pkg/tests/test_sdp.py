import numpy as np
import pytest

from gjm.matqm import unit
from gjm.povm import NO_CLICK, GSpec, GSpecError, apply_loss, gspec_case, qubit_assembly
from gjm.sdp import threshold as threshold_mod
from gjm.sdp.ipm import solve_lmi
from gjm.sdp.program import STAR, FeasibilityReport, Status, build_program, check_witness, is_gjm, solve
from gjm.sdp.threshold import ThresholdError, feasibility_at, threshold

from .conftest import X, Z, pair

CASES = ("a", "b", "c", "d")


def lossy_program(dirs, eta, case, reduce=True):
    a = apply_loss(qubit_assembly(dirs), eta)
    return build_program(a, gspec_case(case, a), reduce=reduce)


def random_dirs(rng, n):
    return [unit(rng.normal(size=3)) for _ in range(n)]


def random_sub_gspec(rng, g):
    return GSpec([[b for b in sorted(s, key=repr) if rng.random() < 0.5] for s in g.subsets])


# --- program structure --------------------------------------------------

def test_case_c_pair_block_count():
    p = lossy_program([Z, X], 0.5, "c")
    assert len(p.beta_tuples) == 4
    assert len(p.keys) == 16
    for beta in p.beta_tuples:
        for y in range(2):
            assert {k[2] for k in p.keys if k[0] == beta and k[1] == y} == {NO_CLICK, STAR}


def test_beta_tuple_count_is_product():
    a = apply_loss(qubit_assembly([Z, X, Z]), 0.5)
    g = GSpec([[1, -1, NO_CLICK], [1], []])
    assert len(build_program(a, g).beta_tuples) == 3 * 1 * 1


def test_all_guessable_keeps_only_star_blocks(zx):
    g = GSpec([p.labels for p in zx])
    p = build_program(zx, g)
    assert all(k[2] == STAR for k in p.keys)
    assert len(p.beta_tuples) == 4
    # projective Z and X are not jointly measurable
    assert solve(p).status == Status.INFEASIBLE
    same = qubit_assembly([Z, -Z])
    assert solve(build_program(same, GSpec([q.labels for q in same]))).feasible


def test_empty_gspec_single_tuple_always_feasible(zx):
    g = GSpec([[], []])
    p = build_program(zx, g)
    assert p.beta_tuples == [(None, None)]
    rep = solve(p)
    assert rep.feasible
    for y, povm in enumerate(zx):
        for b, eff in povm.items():
            np.testing.assert_allclose(rep.witness_blocks[((None, None), y, b)], eff, atol=1e-9)


def test_unknown_label_rejected(zx):
    with pytest.raises(GSpecError):
        build_program(zx, GSpec([[7], []]))
    with pytest.raises(GSpecError):
        build_program(zx, GSpec([[1]]))


def test_every_block_enters_a_constraint():
    p = lossy_program([Z, X], 0.6, "c")
    used = set()
    for kind, _, members, _ in p.equations:
        if kind == "consistency":
            used.update(members)
        else:
            used.update(members[0])
            used.update(members[1])
    assert used == set(p.keys)


# --- solve ---------------------------------------------------------------

def test_solve_examples():
    assert solve(lossy_program([Z, X], 0.4, "a")).status == Status.FEASIBLE
    assert solve(lossy_program([Z, X], 0.9, "c")).status == Status.INFEASIBLE


@pytest.mark.parametrize("case", ["b", "c", "d"])
def test_eta_zero_feasible(case, rng):
    for _ in range(3):
        rep = solve(lossy_program(random_dirs(rng, 3), 0.0, case))
        assert rep.feasible


def test_solve_is_deterministic():
    p = lossy_program([Z, X], 0.58, "c")
    r1, r2 = solve(p), solve(p)
    assert r1.status == r2.status and r1.slack == r2.slack and r1.iterations == r2.iterations


def test_report_invariants(rng):
    for eta in (0.2, 0.55, 0.6, 0.95):
        for case in CASES:
            rep = solve(lossy_program(random_dirs(rng, 2), eta, case))
            if rep.status == Status.FEASIBLE:
                assert rep.slack >= -1e-7 and rep.residuals <= 1e-7
            elif rep.status == Status.INFEASIBLE:
                assert rep.slack < -1e-7
                assert rep.witness_blocks is None
            else:
                assert abs(rep.slack) <= 1e-7


def test_witness_reconstructs_effects(rng):
    for case in CASES:
        a = apply_loss(qubit_assembly(random_dirs(rng, 2)), 0.3)
        g = gspec_case(case, a)
        rep = solve(build_program(a, g))
        assert rep.status == Status.FEASIBLE
        res = check_witness(a, g, rep.witness_blocks)
        assert res["consistency"] <= 1e-7
        assert res["no_signaling"] <= 1e-7
        assert res["partial_jm"] == 0.0
        assert res["min_eig"] >= -1e-7


def test_reduced_and_full_programs_agree():
    for eta, expect in ((0.4, True), (0.8, False)):
        for reduce in (True, False):
            assert solve(lossy_program(pair(np.pi / 3), eta, "c", reduce=reduce)).feasible is expect


def test_is_gjm(zx):
    assert is_gjm(zx, GSpec([[], []]))
    assert not is_gjm(zx, GSpec([[1, -1], [1, -1]]))


def test_ipm_recovers_smallest_eigenvalue(rng):
    for _ in range(5):
        m = rng.normal(size=(4, 4))
        c = (m + m.T) / 2
        lam = np.linalg.eigvalsh(c)[0]
        res = solve_lmi([c], [np.eye(4)[None]], np.array([1.0]), y0=np.array([lam - 1]))
        assert res.converged
        assert res.lower == pytest.approx(lam, abs=1e-8)
        assert res.upper == pytest.approx(lam, abs=1e-8)


# --- downward closure and monotonicity ------------------------------------

@pytest.mark.parametrize("case", CASES)
def test_downward_closure_by_explicit_witness(case, rng):
    dirs = random_dirs(rng, 2)
    ideal = qubit_assembly(dirs)
    eta2 = 0.45
    a2 = apply_loss(ideal, eta2)
    g = gspec_case(case, a2)
    w2 = solve(build_program(a2, g)).witness_blocks
    w0 = solve(build_program(apply_loss(ideal, 0.0), g)).witness_blocks
    assert w2 is not None and w0 is not None
    for eta1 in (0.0, 0.1, 0.3, 0.44):
        lam = eta1 / eta2
        combo = {k: lam * w2[k] + (1 - lam) * w0[k] for k in w2}
        res = check_witness(apply_loss(ideal, eta1), g, combo)
        assert res["consistency"] <= 1e-9 and res["no_signaling"] <= 1e-9
        assert res["min_eig"] >= -1e-9 and res["partial_jm"] == 0.0
        assert feasibility_at(ideal, case, eta1).feasible


def test_shrinking_gspec_relaxes(rng):
    checked = 0
    for _ in range(12):
        a = apply_loss(qubit_assembly(random_dirs(rng, 2)), rng.uniform(0.45, 0.75))
        g = gspec_case("a", a)
        sub = random_sub_gspec(rng, g)
        assert sub.issubset(g)
        big, small = solve(build_program(a, g)), solve(build_program(a, sub))
        assert not (big.status == Status.FEASIBLE and small.status == Status.INFEASIBLE)
        checked += big.feasible
    assert checked > 0


def test_dropping_settings_relaxes(rng):
    for _ in range(8):
        a = apply_loss(qubit_assembly(random_dirs(rng, 3)), rng.uniform(0.35, 0.7))
        g = gspec_case("c", a)
        rep = solve(build_program(a, g))
        keep = sorted(rng.choice(3, size=2, replace=False).tolist())
        part = solve(build_program(a.subset(keep), g.restrict(keep)))
        assert not (rep.status == Status.FEASIBLE and part.status == Status.INFEASIBLE)


@pytest.mark.parametrize("theta", [np.pi / 5, np.pi / 3, np.pi / 2])
def test_cases_a_and_b_coincide(theta):
    ideal = qubit_assembly(pair(theta))
    ta = threshold(ideal, "a", 1e-4).eta_star
    tb = threshold(ideal, "b", 1e-4).eta_star
    assert abs(ta - tb) <= 2e-4


# --- threshold -------------------------------------------------------------

@pytest.mark.parametrize("case,expected", [("c", 2 - np.sqrt(2)), ("d", 2 / 3), ("a", 0.5)])
def test_threshold_examples(zx, case, expected):
    res = threshold(zx, case, 1e-4)
    assert res.eta_star == pytest.approx(expected, abs=1e-3)
    lo, hi = res.bracket
    assert hi - lo <= 1e-4
    assert res.lo_report.feasible and not res.hi_report.feasible


def test_threshold_accepts_explicit_gspec(zx):
    lossy = apply_loss(zx, 0.5)
    res = threshold(zx, gspec_case("c", lossy), 1e-3)
    assert res.eta_star == pytest.approx(2 - np.sqrt(2), abs=2e-3)


def test_threshold_always_jm_for_coincident_axes():
    res = threshold(qubit_assembly([Z, Z]), "c", 1e-4)
    assert res.always_jm and res.eta_star == 1.0


def test_threshold_rejects_infeasible_origin(zx, monkeypatch):
    bad = FeasibilityReport(Status.INFEASIBLE, -1.0, None, 0, 0.0)
    monkeypatch.setattr(threshold_mod, "feasibility_at", lambda *a, **k: bad)
    with pytest.raises(ThresholdError):
        threshold(zx, "c", 1e-3)


def test_threshold_rejects_bad_tol(zx):
    with pytest.raises(ValueError):
        threshold(zx, "c", 0.0)


def test_visibility_raises_threshold(zx):
    clean = threshold(zx, "a", 1e-3).eta_star
    noisy = threshold(zx, "a", 1e-3, nu_vis=0.9).eta_star
    assert noisy > clean + 0.05
