import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gjm.matqm import random_unitary
from gjm.povm import (
    NO_CLICK,
    Assembly,
    AssemblyError,
    GSpec,
    GSpecError,
    LossParams,
    Povm,
    apply_loss,
    apply_loss_visibility,
    assembly_from_dict,
    assembly_to_dict,
    dumps_assembly,
    gspec_case,
    loads_assembly,
    qubit_assembly,
)

from .conftest import X, Z

seeds = st.integers(0, 2**32 - 1)


def random_assembly(rng, d=2, n=2, k=2):
    povms = []
    for _ in range(n):
        u = random_unitary(d, rng)
        vecs = [u[:, i] for i in range(d)]
        # group basis vectors into k coarse-grained projectors
        groups = np.array_split(np.arange(d), k)
        effects = [sum(np.outer(vecs[i], vecs[i].conj()) for i in g) for g in groups]
        povms.append(Povm(tuple(range(1, k + 1)), effects))
    return Assembly(povms)


def test_qubit_assembly_examples():
    a = qubit_assembly([Z])
    assert a.n == 1 and np.allclose(a[0][1], np.diag([1, 0])) and np.allclose(a[0][-1], np.diag([0, 1]))
    zx = qubit_assembly([Z, X])
    assert np.allclose(zx[1][1], 0.5 * np.ones((2, 2)))
    with pytest.raises(AssemblyError):
        qubit_assembly([])


def test_apply_loss_examples():
    z = qubit_assembly([Z])
    full = apply_loss(z, 1.0)[0]
    assert np.allclose(full[1], np.diag([1, 0])) and np.allclose(full[NO_CLICK], 0)
    none = apply_loss(z, 0.0)[0]
    assert np.allclose(none[1], 0) and np.allclose(none[NO_CLICK], np.eye(2))
    half = apply_loss(z, 0.5)[0]
    assert np.allclose(half[1], np.diag([0.5, 0])) and np.allclose(half[-1], np.diag([0, 0.5]))
    assert np.allclose(half[NO_CLICK], 0.5 * np.eye(2))


def test_double_loss_rejected():
    with pytest.raises(AssemblyError):
        apply_loss(apply_loss(qubit_assembly([Z]), 0.5), 0.5)


def test_apply_loss_visibility_examples():
    z = qubit_assembly([Z, X])
    assert all(np.allclose(e1, e2) for p, q in zip(apply_loss_visibility(z, LossParams(0.7, 1.0)),
                                                     apply_loss(z, 0.7))
               for e1, e2 in zip(p.effects, q.effects))
    flat = apply_loss_visibility(z, LossParams(1.0, 0.0))
    for p in flat:
        assert np.allclose(p[1], 0.5 * np.eye(2)) and np.allclose(p[-1], 0.5 * np.eye(2))
    p = apply_loss_visibility(qubit_assembly([Z]), LossParams(0.8, 0.9))[0]
    assert np.allclose(p[1], 0.8 * (0.9 * np.diag([1, 0]) + 0.05 * np.eye(2)))
    assert np.allclose(p[NO_CLICK], 0.2 * np.eye(2))
    assert np.allclose(sum(p.effects), np.eye(2))


def test_loss_params_domain():
    with pytest.raises(ValueError):
        LossParams(1.2)
    with pytest.raises(ValueError):
        LossParams(0.5, -0.1)


def test_gspec_case_examples(zx):
    lossy = apply_loss(zx, 0.5)
    a = gspec_case("a", lossy)
    assert a[0] == a[1] == {1, -1, NO_CLICK}
    c = gspec_case("c", lossy)
    assert c[0] == c[1] == {1, -1}
    d = gspec_case("d", lossy)
    assert d[0] == {1, -1} and d[1] == frozenset()
    with pytest.raises(GSpecError):
        gspec_case("e", lossy)


def test_gspec_validate_unknown_label(zx):
    with pytest.raises(GSpecError):
        GSpec([{1, 7}, set()]).validate(apply_loss(zx, 0.5))


@given(seeds, st.floats(0, 1))
def test_loss_completeness_and_affinity(seed, eta):
    a = random_assembly(np.random.default_rng(seed), d=3, n=2, k=2)
    lossy = apply_loss(a, eta)
    one, zero = apply_loss(a, 1.0), apply_loss(a, 0.0)
    for p, p1, p0 in zip(lossy, one, zero):
        assert np.max(np.abs(sum(p.effects) - np.eye(3))) <= 1e-12
        for e, e1, e0 in zip(p.effects, p1.effects, p0.effects):
            assert np.max(np.abs(e - (eta * e1 + (1 - eta) * e0))) <= 1e-12


@given(seeds)
def test_gspec_case_preorder(seed):
    a = apply_loss(random_assembly(np.random.default_rng(seed), n=3), 0.5)
    g = {c: gspec_case(c, a) for c in "abcd"}
    assert g["d"].issubset(g["b"]) and g["d"].issubset(g["c"]) and g["c"].issubset(g["a"])
    assert g["b"].issubset(g["a"])


def test_json_round_trip(rng):
    a = random_assembly(rng, d=3, n=2, k=3)
    doc = json.loads(dumps_assembly(a))
    assert set(doc) == {"dim", "settings"} and set(doc["settings"][0]) == {"labels", "effects"}
    b = loads_assembly(dumps_assembly(a))
    for p, q in zip(a, b):
        assert p.labels == q.labels
        assert all(np.allclose(e, f, atol=0) for e, f in zip(p.effects, q.effects))
    lossy = apply_loss(a, 0.3)
    assert assembly_from_dict(assembly_to_dict(lossy))[0].labels[-1] == NO_CLICK


def test_json_dimension_mismatch():
    doc = assembly_to_dict(qubit_assembly([Z]))
    doc["dim"] = 3
    with pytest.raises(AssemblyError):
        assembly_from_dict(doc)
