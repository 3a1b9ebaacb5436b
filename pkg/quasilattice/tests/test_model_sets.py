import math

import numpy as np
import pytest

from quasilattice.exceptions import PreconditionError, SpecParseError, StructuralError
from quasilattice.groups import GroupSpec
from quasilattice.lattice import Box
from quasilattice.model_sets import (
    PointSet,
    SpectrumWindow,
    Window,
    dual_model_set,
    lattice_elements,
    min_separation,
    quasicrystal,
    symmetry_check,
)

ALPHA, BETA = 1 / math.sqrt(2), 1 / math.sqrt(3)


def fibonacci_brute_force(lo, hi, L):
    """x = n + beta k with n + alpha k in [lo, hi) and x in [0, L)."""
    reach = int(L / (ALPHA - BETA)) + 20
    k = np.arange(-reach, reach + 1)
    points = []
    for shift in range(int(math.ceil(hi - lo)) + 1):
        n = np.ceil(lo - ALPHA * k) + shift
        p1 = n + ALPHA * k
        x = n + BETA * k
        keep = (p1 >= lo) & (p1 < hi) & (x >= 0) & (x < L)
        points.append(x[keep])
    return np.sort(np.concatenate(points))


def test_window_basics():
    S = Window((Box([0.0], [1.0]), Box([2.0], [2.5])))
    assert S.measure == 1.5
    assert S.contains([[0.0], [1.0], [2.25], [2.5]]).tolist() == [True, False, True, False]
    assert np.allclose(S.center, [1.25])
    assert Window.interval(-0.5, 0.5).is_symmetric()
    assert not S.is_symmetric()
    assert Window.interval(0.0, 1.0).dilate(2.0) == Window.interval(-0.5, 1.5)
    assert Window.from_json("0:1") == Window.interval(0.0, 1.0)
    assert Window.from_json({"boxes": [{"lo": [0], "hi": [1]}]}) == Window.interval(0.0, 1.0)
    with pytest.raises(PreconditionError):
        Window((Box([0.0], [1.0]), Box([0.5], [2.0])))
    with pytest.raises(StructuralError):
        Window((Box([0.0], [1.0]), Box([0.0, 0.0], [1.0, 1.0])))
    with pytest.raises(SpecParseError):
        Window.from_json({"lo": [0]})


def test_window_boundary():
    S = Window.interval(-0.5, 0.5)
    assert S.on_boundary([[0.5], [-0.5 + 1e-12], [0.0]], 1e-9).tolist() == [True, True, False]


def test_spectrum_window_measure_counts_residues():
    group = GroupSpec(d=1, torsion=(2,))
    K = SpectrumWindow(group, (Box([0.0], [1.0]),), residues=((0,),))
    assert K.measure == pytest.approx(0.5)
    assert SpectrumWindow(group, (Box([0.0], [1.0]),)).measure == pytest.approx(1.0)
    assert K.contains([[0.5], [0.5], [1.5]], np.zeros((3, 0)), [[0], [1], [0]]).tolist() == [True, False, False]
    K3 = SpectrumWindow(GroupSpec(d=1, torus=1), (Box([0.0], [2.0]),), zfreqs=((0,), (1,), (-1,)))
    assert K3.measure == pytest.approx(6.0)
    assert K3.contains([[1.0], [1.0]], [[1], [2]], np.zeros((2, 0))).tolist() == [True, False]
    with pytest.raises(StructuralError):
        SpectrumWindow(group, (Box([0.0, 0.0], [1.0, 1.0]),))
    parsed = SpectrumWindow.from_json({"real_boxes": ["0:1"], "residues": [[1]]}, group)
    assert parsed.residues == ((1,),)
    with pytest.raises(SpecParseError):
        SpectrumWindow.from_json({"real_boxes": [], "colour": 1}, group)


@pytest.mark.parametrize("window", [(0.0, 1.0), (-0.5, 0.5), (0.25, 2.0)])
def test_fibonacci_quasicrystal_matches_brute_force(fibonacci, window):
    L = 60.0
    ps = quasicrystal(fibonacci, Window.interval(*window), Box([0.0], [L]))
    expected = fibonacci_brute_force(window[0], window[1], L)
    assert len(ps) == len(expected)
    assert np.allclose(np.sort(ps.real[:, 0]), expected)
    assert ps.kind == "quasicrystal"
    assert ps.coords.shape == (len(ps), 2)


def test_fibonacci_point_count_tracks_the_density(fibonacci):
    L = 2000.0
    ps = quasicrystal(fibonacci, Window.interval(0.0, 1.0), Box([0.0], [L]))
    assert len(ps) / L == pytest.approx(1.0 / (ALPHA - BETA), rel=5e-3)


def test_quasicrystal_points_satisfy_the_window(r_z4_z3, r_torus):
    S = Window.interval(-0.5, 0.5)
    for scheme in (r_z4_z3, r_torus):
        ps = quasicrystal(scheme, S, Box([-20.0], [20.0]))
        assert len(ps) > 0
        assert np.all(S.contains(ps.internal))
        assert np.all((ps.real >= -20.0) & (ps.real < 20.0))
        projected = scheme.project(ps.coords)
        assert np.allclose(projected.real, ps.real)
        assert np.array_equal(projected.disc, ps.disc)


def test_every_residue_appears(r_z4_z3):
    ps = quasicrystal(r_z4_z3, Window.interval(0.0, 1.0), Box([0.0], [200.0]))
    seen = {tuple(r) for r in ps.disc}
    assert seen == {tuple(r) for r in r_z4_z3.group.residues()}


def test_lattice_elements_respect_both_boxes(r_z2):
    z = lattice_elements(r_z2, Box([0.0], [1.0]), Box([0.0], [30.0]))
    p = r_z2.project(z)
    assert np.all((p.internal >= -1e-12) & (p.internal < 1.0 + 1e-12))
    assert np.all((p.real >= -1e-12) & (p.real < 30.0 + 1e-12))
    with pytest.raises(StructuralError):
        lattice_elements(r_z2, Box([0.0, 0.0], [1.0, 1.0]), Box([0.0], [1.0]))


def test_quasicrystal_is_uniformly_discrete(fibonacci, r_z2):
    for scheme in (fibonacci, r_z2):
        ps = quasicrystal(scheme, Window.interval(0.0, 1.0), Box([0.0], [300.0]))
        assert min_separation(ps) > 1e-3


def test_separation_is_stable_as_the_box_grows(fibonacci):
    S = Window.interval(0.0, 1.0)
    small = min_separation(quasicrystal(fibonacci, S, Box([0.0], [100.0])))
    large = min_separation(quasicrystal(fibonacci, S, Box([0.0], [1000.0])))
    # n + beta k - (n + alpha k) for (n, k) = (-4, 7) is the shortest gap
    assert small == pytest.approx(abs(-4 + 7 * BETA), abs=1e-9)
    assert large == pytest.approx(small, abs=1e-9)


@pytest.mark.parametrize("inner, outer", [((0.0, 0.5), (0.0, 1.0)), ((0.2, 0.7), (0.0, 1.0)),
                                          ((-0.25, 0.25), (-0.5, 0.5))])
def test_larger_window_gives_a_superset(fibonacci, r_z4_z3, inner, outer):
    obs = Box([0.0], [150.0])
    for scheme in (fibonacci, r_z4_z3):
        small = quasicrystal(scheme, Window.interval(*inner), obs)
        large = quasicrystal(scheme, Window.interval(*outer), obs)
        assert 0 < len(small) < len(large)
        assert {tuple(c) for c in small.coords} <= {tuple(c) for c in large.coords}


def test_translated_windows_share_density_and_separation(fibonacci):
    L = 1000.0
    separations = []
    for tau in (0.0, 0.3, 0.7):
        window = Window.interval(tau, tau + 1.0)
        ps = quasicrystal(fibonacci, window, Box([0.0], [L]))
        assert len(ps) / L == pytest.approx(1.0 / (ALPHA - BETA), rel=0.02)
        expected = fibonacci_brute_force(tau, tau + 1.0, 60.0)
        head = np.sort(ps.real[ps.real[:, 0] < 60.0, 0])
        assert np.allclose(head, expected)
        separations.append(min_separation(ps))
    assert max(separations) - min(separations) < 1e-9


def test_quasicrystal_rejects_bad_shapes(fibonacci):
    with pytest.raises(StructuralError):
        quasicrystal(fibonacci, Window((Box([0.0, 0.0], [1.0, 1.0]),)), Box([0.0], [1.0]))
    with pytest.raises(StructuralError):
        quasicrystal(fibonacci, Window.interval(0.0, 1.0), Box([0.0, 0.0], [1.0, 1.0]))
    with pytest.raises(PreconditionError):
        quasicrystal(fibonacci, Window.interval(0.0, 1.0), Box([0.0], [np.inf]))


def test_dual_model_set_matches_brute_force(fibonacci):
    L = 80
    K = SpectrumWindow(GroupSpec(d=1), (Box([0.0], [1.0]),))
    ps = dual_model_set(fibonacci, K, Box([0.0], [float(L)]))
    dual = fibonacci.dual_basis.B
    w0 = np.arange(-3, L + 4)
    points = []
    for offset in range(-3, 4):
        w = np.stack([w0, np.floor(ALPHA * w0) + offset], axis=1)
        y = w @ dual.T
        keep = (y[:, 1] >= 0) & (y[:, 1] < 1) & (y[:, 0] >= 0) & (y[:, 0] < L)
        points.append(y[keep, 0])
    expected = np.sort(np.concatenate(points))
    assert ps.kind == "dual"
    assert len(ps) == len(expected)
    assert np.allclose(np.sort(ps.real[:, 0]), expected)
    assert np.all(K.contains(ps.internal, np.zeros((len(ps), 0)), np.zeros((len(ps), 0))))


def test_dual_model_set_respects_residues(r_z2):
    obs = Box([-40.0], [40.0])
    everything = dual_model_set(r_z2, SpectrumWindow(r_z2.group, (Box([0.0], [1.0]),)), obs)
    even = dual_model_set(r_z2, SpectrumWindow(r_z2.group, (Box([0.0], [1.0]),), residues=((0,),)), obs)
    assert 0 < len(even) < len(everything)
    assert np.all(even.labels[:, -1] == 0)
    assert set(everything.labels[:, -1].tolist()) == {0, 1}


def test_dual_model_set_with_torus_frequencies(r_torus):
    K = SpectrumWindow(r_torus.group, (Box([-1.0], [1.0]),), zfreqs=((0,), (1,)))
    ps = dual_model_set(r_torus, K, Box([-30.0], [30.0]))
    assert len(ps) > 0
    assert set(ps.labels[:, 0].tolist()) <= {0, 1}
    with pytest.raises(StructuralError):
        dual_model_set(r_torus, SpectrumWindow(GroupSpec(d=1), (Box([0.0], [1.0]),)), Box([0.0], [1.0]))


def test_empty_spectrum_gives_no_points(fibonacci):
    K = SpectrumWindow(GroupSpec(d=1), (Box([1.0], [1.0]),))
    assert len(dual_model_set(fibonacci, K, Box([0.0], [10.0]))) == 0


@pytest.mark.parametrize("name", ["fibonacci", "RxT", "RxZ2", "RxZ4+Z3"])
def test_symmetric_window_gives_a_symmetric_set(standard_schemes, name):
    ps = quasicrystal(standard_schemes[name], Window.interval(-0.5, 0.5), Box([-40.0], [40.0]))
    assert symmetry_check(ps)


def test_symmetry_check_sees_a_missing_point(fibonacci):
    ps = quasicrystal(fibonacci, Window.interval(-0.5, 0.5), Box([-40.0], [40.0]))
    x = ps.real[:, 0]
    i = int(np.flatnonzero((np.abs(x) > 1.0) & (np.abs(x) < 20.0))[0])
    assert not symmetry_check(ps.without(i))


def test_symmetry_check_preconditions(fibonacci):
    ps = quasicrystal(fibonacci, Window.interval(0.0, 1.0), Box([-10.0], [10.0]))
    with pytest.raises(PreconditionError):
        symmetry_check(ps)
    with pytest.raises(PreconditionError):
        symmetry_check(PointSet.from_real([[0.0], [1.0]]))


def test_plain_point_sets():
    ps = PointSet.from_real([0.0, 0.5, 3.0])
    assert len(ps) == 3
    assert ps.obs == Box([0.0], [4.0])
    assert min_separation(ps) == pytest.approx(0.5)
    assert len(ps.without(0)) == 2
