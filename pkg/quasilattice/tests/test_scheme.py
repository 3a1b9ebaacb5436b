import math

import numpy as np
import pytest

from quasilattice.exceptions import (
    ConsistencyError,
    ObstructedGroupError,
    PreconditionError,
    SlotCollisionError,
    SpecParseError,
    StructuralError,
)
from quasilattice.groups import GroupSpec, character_eval, prime_factors
from quasilattice.scheme import (
    SchemeDescriptor,
    Truncation,
    assign_slots,
    build_T,
    dual_project,
    fibonacci_descriptor,
    make_params,
    primary_decomposition,
    project_point,
    rank_p,
    scheme_exists,
    scheme_from_descriptor,
    scheme_from_json,
    structure_check,
    translation_numerators,
)

from .conftest import build

ALPHA, BETA = 1 / math.sqrt(2), 1 / math.sqrt(3)


def cyclic_multisets(limit, smallest=2):
    """Non-decreasing factor lists with product <= limit (the empty list included)."""
    yield ()
    for n in range(smallest, limit + 1):
        for rest in cyclic_multisets(limit // n, n):
            yield (n,) + rest


def brute_rank(torsion, p):
    # p-torsion subgroup of Z_n has gcd(n, p) elements
    count = 1
    for n in torsion:
        count *= math.gcd(n, p)
    return round(math.log(count, p))


def check_existence_against_brute_force(limit):
    for torsion in cyclic_multisets(limit):
        primes = {p for n in torsion for p in prime_factors(n)}
        worst = max((brute_rank(torsion, p) for p in primes), default=0)
        for m, d in ((1, 0), (1, 1), (2, 1), (1, 3), (2, 2)):
            if d == 0 and not torsion:
                continue
            result = scheme_exists(m, GroupSpec(d=d, torsion=torsion))
            assert bool(result) == (worst <= m + d), (torsion, m, d)


def test_existence_examples():
    assert not scheme_exists(1, GroupSpec(d=1, torsion=(2, 2, 2)))
    assert scheme_exists(1, GroupSpec(d=1, torsion=(2, 2, 2))).message == "obstructed at p=2"
    assert scheme_exists(1, GroupSpec(d=1, torsion=(2, 2))).message == "exists"
    assert scheme_exists(2, GroupSpec(d=1, torsion=(2, 2, 2)))
    assert not scheme_exists(1, GroupSpec(d=1, torsion=(4, 2, 6)))
    result = scheme_exists(1, GroupSpec(d=1, torsion=(3, 9, 27, 2)))
    assert (result.prime, result.rank, result.limit) == (3, 3, 2)
    with pytest.raises(PreconditionError):
        scheme_exists(0, GroupSpec(d=1))


def test_primary_decomposition():
    assert primary_decomposition((12, 18)) == {2: [4, 2], 3: [3, 9]}
    assert rank_p((12, 18, 5), 3) == 2
    with pytest.raises(PreconditionError):
        rank_p((12,), 4)


def test_existence_agrees_with_brute_force_small():
    check_existence_against_brute_force(200)


@pytest.mark.slow
def test_existence_agrees_with_brute_force_full():
    check_existence_against_brute_force(10_000)


def test_build_T():
    T = build_T([ALPHA], [BETA])
    assert np.allclose(T, [[0, ALPHA * BETA], [ALPHA * BETA, 0]])
    assert np.linalg.norm(T, 2) == pytest.approx(ALPHA * BETA)
    with pytest.raises(PreconditionError):
        build_T([1.0, 1.0], [1.0])


def test_slot_assignment():
    assert assign_slots((4, 3), 2) == {(0, 2): 0, (1, 3): 0}
    assert assign_slots((2, 2), 2) == {(0, 2): 0, (1, 2): 1}
    with pytest.raises(ObstructedGroupError) as exc:
        assign_slots((2, 2, 2), 2)
    assert exc.value.prime == 2
    forced = assign_slots((2, 2, 2), 2, force=True)
    assert [forced[(i, 2)] for i in range(3)] == [0, 1, 0]
    with pytest.raises(SlotCollisionError):
        assign_slots((2, 2), 2, overrides=[1, 1])
    with pytest.raises(SpecParseError):
        assign_slots((2, 2), 2, overrides=[1, 3])


def test_composite_factor_translation_is_one_over_n():
    wnum = translation_numerators((6,), assign_slots((6,), 2), 2)
    assert wnum[0, 0] % 6 == 1
    assert wnum[1, 0] == 0
    slots = assign_slots((6,), 2, overrides=None)
    assert set(slots) == {(0, 2), (0, 3)}


def test_fibonacci_scheme(fibonacci):
    B = fibonacci.basis.B
    assert np.allclose(B, [[1.0, ALPHA], [1.0, BETA]])
    assert fibonacci.section_mass == pytest.approx(ALPHA - BETA)
    assert fibonacci.dual_section_mass == pytest.approx(1 / (ALPHA - BETA))
    p1, p2 = project_point(fibonacci, [2, 3])
    assert p1[0] == pytest.approx(2 + 3 * ALPHA)
    assert p2.real[0] == pytest.approx(2 + 3 * BETA)


def test_section_masses_multiply_to_one(standard_schemes):
    for name, scheme in standard_schemes.items():
        assert scheme.section_mass * scheme.dual_section_mass == pytest.approx(1.0, abs=1e-9), name
        assert scheme.basis.volume * scheme.group.order == pytest.approx(scheme.section_mass), name
        residual = scheme.basis.B.T @ scheme.dual_basis.B - np.eye(scheme.layout.N)
        assert np.max(np.abs(residual)) < 1e-10, name


def test_lift_lands_in_the_canonical_cell(r_z4_z3, r_torus):
    rng = np.random.default_rng(0)
    v = rng.integers(-30, 30, (50, 2))
    for r in r_z4_z3.group.residues():
        z = r_z4_z3.lift(v, r)
        p = r_z4_z3.project(z)
        assert np.all(p.disc == r)
    z = r_torus.lift(v, np.zeros((1, 0), dtype=np.int64))
    torus_rows = r_torus.basis.vectors(z)[:, 2]
    assert np.all((torus_rows >= -1e-12) & (torus_rows < 1.0 + 1e-12))


def test_annihilator_pairing(standard_schemes):
    rng = np.random.default_rng(11)
    for name, scheme in standard_schemes.items():
        N = scheme.layout.N
        for _ in range(200):
            z = rng.integers(-20, 21, N)
            w = rng.integers(-20, 21, N)
            p1, g = project_point(scheme, z)
            q1, xi = dual_project(scheme, w)
            value = np.exp(2j * np.pi * float(np.dot(p1, q1))) * character_eval(xi, g, scheme.group)
            assert abs(value - 1.0) < 1e-8, name


def test_descriptor_json_round_trip():
    descriptor = SchemeDescriptor(
        m=1,
        group=GroupSpec(d=1, torsion=(2,)),
        truncations=(Truncation(p=3, s=2), Truncation(q_denominator=5)),
    )
    again = SchemeDescriptor.from_json(descriptor.to_json())
    assert again == descriptor
    assert again.effective_group() == GroupSpec(d=1, torsion=(2, 9, 5))
    with pytest.raises(SpecParseError):
        SchemeDescriptor.from_json({"m": 1})
    with pytest.raises(SpecParseError):
        SchemeDescriptor.from_json({"m": 1, "group": {"d": 1}, "colour": "red"})
    with pytest.raises(SpecParseError):
        Truncation(p=4, s=1)


def test_rational_truncation_shifts_the_base_matrix():
    scheme = scheme_from_descriptor(SchemeDescriptor(
        m=1, group=GroupSpec(d=1), truncations=(Truncation(q_denominator=3),),
    ))
    eta = scheme.params.eta
    assert len(eta) == 1
    assert scheme.base[0, 0] == pytest.approx(1.0 + scheme.params.alpha[0] * eta[0])
    assert scheme.group.torsion == (3,)


@pytest.mark.parametrize("q", [2, 4, 6])
def test_rational_truncation_counts_toward_the_p_rank(q):
    # Z_Q sits inside D as a finite subgroup, so Z_2^2 x Z_Q holds a copy of Z_2^3
    group = GroupSpec(d=1, torsion=(2, 2))
    assert scheme_exists(1, group)
    descriptor = SchemeDescriptor(m=1, group=group, truncations=(Truncation(q_denominator=q),))
    assert not scheme_exists(1, descriptor.effective_group())
    with pytest.raises(ObstructedGroupError):
        scheme_from_descriptor(descriptor)


def test_rational_truncation_with_a_coprime_denominator_builds():
    scheme = scheme_from_descriptor(SchemeDescriptor(
        m=1, group=GroupSpec(d=1, torsion=(2, 2)), truncations=(Truncation(q_denominator=3),),
    ))
    assert scheme.group.torsion == (2, 2, 3)
    assert scheme.section_mass * scheme.dual_section_mass == pytest.approx(1.0)


def test_rational_generator_keeps_p2_injective():
    q = 5
    scheme = scheme_from_descriptor(SchemeDescriptor(
        m=1, group=GroupSpec(d=1), truncations=(Truncation(q_denominator=q),),
    ))
    z = np.zeros(scheme.layout.N, dtype=np.int64)
    z[-1] = q
    p = scheme.project(z)
    # q times the Z_Q generator has trivial residue, so it must move the physical part
    assert p.disc.tolist() == [[0]]
    assert abs(p.real[0, 0]) > 1e-3
    assert abs(p.internal[0, 0]) > 1e-3


def test_obstructed_build_is_refused():
    with pytest.raises(ObstructedGroupError):
        build(torsion=(2, 2, 2))


def test_forced_obstruction_exhibits_a_collision():
    scheme = scheme_from_descriptor(
        SchemeDescriptor(m=1, group=GroupSpec(d=1, torsion=(2, 2, 2))), force=True
    )
    report = structure_check(scheme, 2)
    assert report.p1_collision
    assert not report.ok
    witness = np.asarray(report.witness)
    assert np.any(witness != 0)
    assert abs(scheme.basis.vectors(witness)[0]) < 1e-9


def test_structure_check_clean_schemes(standard_schemes):
    for name, scheme in standard_schemes.items():
        report = structure_check(scheme, 6)
        assert report.ok, (name, report.to_dict())


def test_covering_radius_shrinks(fibonacci, r_z2, r_torus):
    for scheme in (fibonacci, r_z2, r_torus):
        coarse = structure_check(scheme, 4)
        fine = structure_check(scheme, 16)
        assert fine.p1_covering_radius < coarse.p1_covering_radius
        assert fine.p2_covering_radius < coarse.p2_covering_radius


@pytest.mark.slow
def test_structure_check_acceptance(standard_schemes):
    for name, scheme in standard_schemes.items():
        report = structure_check(scheme, 20)
        assert report.ok, name
        coarse, fine = structure_check(scheme, 10), structure_check(scheme, 50)
        assert fine.p1_covering_radius < coarse.p1_covering_radius, name
        assert fine.p2_covering_radius < coarse.p2_covering_radius, name


def test_scheme_json_round_trip(r_z4_z3):
    data = r_z4_z3.to_json()
    again = scheme_from_json(data)
    assert np.array_equal(again.basis.B, r_z4_z3.basis.B)
    data["basis"][0][0] += 1e-6
    with pytest.raises(ConsistencyError):
        scheme_from_json(data)
    assert scheme_from_json(fibonacci_descriptor().to_json()).section_mass == pytest.approx(ALPHA - BETA)


def test_params_shape_checks():
    params = make_params(SchemeDescriptor(m=2, group=GroupSpec(d=1, torus=1)))
    assert (len(params.alpha), len(params.beta), len(params.gamma)) == (2, 1, 1)
    assert np.linalg.norm(params.alpha) * np.linalg.norm(params.beta) < 1
    with pytest.raises(StructuralError):
        project_point(build(), [1, 2, 3])
