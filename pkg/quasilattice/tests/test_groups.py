import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilattice.exceptions import PreconditionError, SpecParseError, StructuralError
from quasilattice.groups import (
    DualElement,
    GroupElement,
    GroupSpec,
    add,
    character_eval,
    character_matrix,
    dual_add,
    dual_haar_measure,
    first_primes,
    haar_measure,
    independent_vector,
    is_prime,
    negate,
    prime_factors,
)

SPEC = GroupSpec(d=1, torus=1, torsion=(4, 6))

reals = st.floats(min_value=-50, max_value=50, allow_nan=False)
units = st.floats(min_value=0, max_value=1, exclude_max=True)
ints = st.integers(min_value=-20, max_value=20)


@st.composite
def elements(draw):
    return GroupElement.make(SPEC, [draw(reals)], [draw(units)], [draw(ints), draw(ints)])


@st.composite
def characters(draw):
    return DualElement.make(SPEC, [draw(st.floats(min_value=-5, max_value=5))], [draw(ints)],
                            [draw(ints), draw(ints)])


def test_primes():
    assert first_primes(5) == (2, 3, 5, 7, 11)
    assert len(first_primes(1000)) == 1000
    assert first_primes(1000)[-1] == 7919
    assert is_prime(7919) and not is_prime(7917)
    assert prime_factors(12) == (2, 3)
    assert prime_factors(49) == (7,)


def test_independent_vector():
    assert np.allclose(independent_vector(2), [1 / np.sqrt(2), 1 / np.sqrt(3)])
    xi = independent_vector(3, eps=0.5)
    assert np.linalg.norm(xi) < 0.5
    assert np.allclose(xi, 1 / np.sqrt([11, 13, 17]))
    with pytest.raises(PreconditionError):
        independent_vector(0)


def test_group_spec_validation():
    with pytest.raises(StructuralError):
        GroupSpec(d=1, torsion=(1,))
    with pytest.raises(StructuralError):
        GroupSpec()
    with pytest.raises(SpecParseError):
        GroupSpec.from_json({"d": 1, "torsoin": [2]})
    with pytest.raises(SpecParseError):
        GroupSpec.from_json({"d": 1, "torsion": [0]})
    assert GroupSpec.from_json({"d": 1, "torsion": [2, 2]}) == GroupSpec(d=1, torsion=(2, 2))


def test_residues_and_dual():
    spec = GroupSpec(d=1, torsion=(2, 3))
    assert spec.order == 6
    assert spec.residues().tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
    dual = spec.dual()
    assert (dual.d, dual.zrank, dual.torsion, dual.order) == (1, 0, (2, 3), 6)
    assert GroupSpec(d=2, torus=1).dual().zrank == 1


def test_element_normalisation():
    g = GroupElement.make(SPEC, [1.5], [1.25], [5, -1])
    assert g.torus == (0.25,)
    assert g.disc == (1, 5)
    with pytest.raises(StructuralError):
        GroupElement.make(SPEC, [1.0, 2.0], [0.0], [0, 0])


def test_group_law():
    g = GroupElement.make(SPEC, [1.0], [0.75], [3, 5])
    h = GroupElement.make(SPEC, [2.0], [0.5], [2, 4])
    s = add(g, h, SPEC)
    assert s.real == (3.0,)
    assert s.torus == pytest.approx((0.25,))
    assert s.disc == (1, 3)
    assert add(g, negate(g, SPEC), SPEC) == GroupElement.identity(SPEC)
    xi = DualElement.make(SPEC, [0.5], [2], [1, 1])
    assert dual_add(xi, xi, SPEC).disc == (2, 2)


@settings(max_examples=60, deadline=None)
@given(elements(), elements(), characters())
def test_character_is_multiplicative(g, h, xi):
    lhs = character_eval(xi, add(g, h, SPEC), SPEC)
    rhs = character_eval(xi, g, SPEC) * character_eval(xi, h, SPEC)
    assert abs(lhs - rhs) < 1e-9


@settings(max_examples=60, deadline=None)
@given(elements(), characters(), characters())
def test_character_is_additive_in_the_frequency(g, xi, zeta):
    lhs = character_eval(dual_add(xi, zeta, SPEC), g, SPEC)
    rhs = character_eval(xi, g, SPEC) * character_eval(zeta, g, SPEC)
    assert abs(lhs - rhs) < 1e-9


def test_character_examples():
    spec = GroupSpec(torsion=(4,))
    assert character_eval(DualElement.make(spec, disc=[1]), GroupElement.make(spec, disc=[1]), spec) \
        == pytest.approx(1j)
    spec = GroupSpec(d=1)
    value = character_eval(DualElement.make(spec, [0.25]), GroupElement.make(spec, [1.0]), spec)
    assert value == pytest.approx(cmath.exp(0.5j * cmath.pi))
    assert character_eval(DualElement.zero(SPEC), GroupElement.make(SPEC, [3.3], [0.7], [1, 2]), SPEC) == 1


def test_character_matrix_matches_scalar():
    rng = np.random.default_rng(3)
    pts = (rng.uniform(-5, 5, (7, 1)), rng.uniform(0, 1, (7, 1)), rng.integers(0, 4, (7, 2)))
    freqs = (rng.uniform(-2, 2, (5, 1)), rng.integers(-3, 3, (5, 1)), rng.integers(0, 6, (5, 2)))
    E = character_matrix(SPEC, pts, freqs)
    assert E.shape == (7, 5)
    for j in range(7):
        for k in range(5):
            g = GroupElement.make(SPEC, pts[0][j], pts[1][j], pts[2][j])
            xi = DualElement.make(SPEC, freqs[0][k], freqs[1][k], freqs[2][k])
            assert abs(E[j, k] - character_eval(xi, g, SPEC)) < 1e-9
    with pytest.raises(StructuralError):
        character_matrix(SPEC, (pts[0], pts[1], pts[2][:, :1]), freqs)


def test_haar_measures():
    spec = GroupSpec(d=1, torsion=(2, 3))
    assert haar_measure([0.0], [2.0], spec) == 12.0
    assert haar_measure([0.0], [2.0], spec, residues=[[0, 0], [1, 1], [3, 4]]) == 4.0
    assert haar_measure([1.0], [0.0], spec) == 0.0
    assert dual_haar_measure(1.0, 1, 6, spec) == 1.0
    with pytest.raises(PreconditionError):
        haar_measure([0.0], [np.inf], spec)
