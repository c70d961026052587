import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zerodensity.bundle import Curvature
from zerodensity.closed_form import (
    JUMP_LIMIT, _wrap, branch_integers, closed_form_density, default_schedule, delta_section,
    expected_density_field, expected_index, face_phases, omega_track, round_half_away, smoothed_delta_products,
)
from zerodensity.errors import NegativeT, OutOfGrid, TZero, UnwrapAmbiguous
from zerodensity.index import face_indices
from zerodensity.laplace import MassMatrix
from zerodensity.spectral import smooth_section

from conftest import random_sections


@pytest.fixture(scope="module")
def ell2_field(ell2_setup, ell2_basis):
    return closed_form_density(ell2_basis, ell2_setup.mesh, ell2_setup.curvature)


def test_delta_section_evaluates(ell2_setup, rng):
    M = ell2_setup.mass
    phi = random_sections(rng, len(M.diag))
    for i in (0, 17, 100):
        d = delta_section(M, i)
        assert M.inner(d, phi) == phi[i]
        assert M.inner(d, d) == pytest.approx(1 / M.diag[i], rel=1e-15)
        assert M.inner(d, delta_section(M, i + 1)) == 0


def test_delta_products_three_ways(ell2_setup, ell2_basis):
    M = ell2_setup.mass
    b = ell2_basis
    f = ell2_setup.mesh.faces[11]
    for t in (0.01, 0.3, 2.0):
        g = smoothed_delta_products(b, f, t)
        s = [smooth_section(b, delta_section(M, int(v)), t) for v in f]
        direct = [M.inner(s[0], s[1]), M.inner(s[1], s[2]), M.inner(s[2], s[0])]
        np.testing.assert_allclose(g, direct, rtol=1e-10)
        s2 = [smooth_section(b, delta_section(M, int(v)), 2 * t) for v in f]
        cross = [M.inner(delta_section(M, int(f[0])), s2[1]), M.inner(delta_section(M, int(f[1])), s2[2]),
                 M.inner(delta_section(M, int(f[2])), s2[0])]
        np.testing.assert_allclose(g, cross, rtol=1e-10)
        # conjugate symmetry
        rev = smoothed_delta_products(b, f[::-1], t)
        np.testing.assert_allclose(np.conj(rev), [g[1], g[0], g[2]], rtol=1e-12)
        gn = smoothed_delta_products(b, f, t, normalized=True)
        np.testing.assert_allclose(np.array(gn) * np.exp(-2 * t * b.eigenvalues[0]), g, rtol=1e-12)


def test_delta_products_rank_one_limit(ell2_setup, ell2_basis):
    b = ell2_basis
    t = 15 / b.spectral_gap  # exp(-2t gap) ~ 1e-13
    v = b.vectors[:, 0]
    for f in ell2_setup.mesh.faces[::40]:
        g = smoothed_delta_products(b, f, t, normalized=True)
        i, j, k = f
        np.testing.assert_allclose(g, [v[i] * np.conj(v[j]), v[j] * np.conj(v[k]), v[k] * np.conj(v[i])],
                                   rtol=1e-10)


def test_delta_products_errors(ell2_basis):
    with pytest.raises(TZero):
        smoothed_delta_products(ell2_basis, (0, 1, 2), 0.0)
    with pytest.raises(NegativeT):
        smoothed_delta_products(ell2_basis, (0, 1, 2), -1.0)


def test_rounding_helpers():
    np.testing.assert_array_equal(round_half_away([0.5, -0.5, 1.5, 2.49, -2.5]), [1, -1, 2, 2, -3])
    with pytest.warns(RuntimeWarning):
        assert list(branch_integers([np.pi, -np.pi])) == [1, -1]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert list(branch_integers([1.5 * np.pi, 0.3, 7.0])) == [1, 0, 1]


@settings(max_examples=200, deadline=None)
@given(om=st.floats(-40, 40))
def test_t0_identity(om):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ell = int(branch_integers([om])[0])
    w0 = om - 2 * np.pi * ell
    assert -np.pi <= w0 <= np.pi
    assert w0 / (2 * np.pi) + ell == pytest.approx(om / (2 * np.pi), abs=1e-14)


def test_icosahedron_track(ico_setup):
    b = ico_setup.eigenbasis()
    ts = default_schedule(b, t_max=20.0)
    fld = closed_form_density(b, ico_setup.mesh, ico_setup.curvature, ts)
    np.testing.assert_allclose(fld.omega[0], np.pi / 5, atol=1e-12)
    np.testing.assert_array_equal(fld.at(0.0), ico_setup.curvature.omega / (2 * np.pi))
    assert fld.at(0.0).sum() == pytest.approx(2, abs=1e-12)
    assert np.all(fld.conservation_residual < 1e-6)
    tr = omega_track(b, ico_setup.mesh, ico_setup.curvature, 3, ts)
    assert tr.omega0 == pytest.approx(np.pi / 5)
    assert tr.branch == 0
    assert expected_index(tr, 0.0) == pytest.approx(0.1, abs=1e-15)


def test_external_curvature_branch(ico_setup):
    om = np.array(ico_setup.curvature.omega)
    om[0] += 2 * np.pi
    ext = Curvature.external(ico_setup.connection, om)
    b = ico_setup.eigenbasis()
    fld = closed_form_density(b, ico_setup.mesh, ext, default_schedule(b, t_max=5.0))
    assert fld.branch[0] == 1
    assert fld.degree == 3
    assert np.all(fld.conservation_residual < 1e-6)


def test_field_invariants(ell2_setup, ell2_basis, ell2_field):
    fld = ell2_field
    assert fld.t[0] == 0
    np.testing.assert_array_equal(fld.expected_index[0], ell2_setup.curvature.omega / (2 * np.pi))
    # conservation holds wherever no face has lost phase precision
    clean = ~fld.unreliable.any(axis=1)
    assert clean.mean() > 0.8
    assert np.all(fld.conservation_residual[clean] < 1e-6)
    assert np.all(fld.conservation_residual[fld.t * ell2_basis.spectral_gap <= 15] < 1e-6)
    # mod 2 pi fidelity against freshly computed raw phases
    for m in range(1, len(fld.t), 9):
        raw = face_phases(ell2_basis, ell2_setup.mesh, fld.t[m])
        k = (fld.omega[m] - raw) / (2 * np.pi)
        assert np.max(np.abs(k - np.rint(k))) < 1e-9 / (2 * np.pi)
    # density is index per area
    np.testing.assert_allclose(fld.density, fld.expected_index / ell2_setup.mesh.geometry.face_area, rtol=1e-14)


def test_unwrapped_steps_are_small(ell2_field):
    fld = ell2_field
    for f in range(fld.omega.shape[1]):
        if fld.discontinuous[f]:
            assert not fld.confident[f]
            continue
        tr = fld.track(f)
        bad = fld.unreliable[:, f]
        stop = fld.t[np.argmax(bad)] if bad.any() else np.inf
        w = tr.omega[tr.t < stop]
        if not fld.confident[f]:
            w = w[1:]  # the step off t = 0 lands on the other branch here
        assert np.max(np.abs(np.diff(w)), initial=0) < JUMP_LIMIT


def test_late_anchors_start_half_a_turn_away(ell2_field):
    fld = ell2_field
    late = ~fld.confident
    assert late.any()
    d = np.abs(_wrap(fld.omega[1, late] - fld.omega[0, late]))
    assert np.all(d > JUMP_LIMIT)


def test_subset_matches_full(ell2_setup, ell2_basis, ell2_field):
    sub = [5, 77, 140, 201]
    part = closed_form_density(ell2_basis, ell2_setup.mesh, ell2_setup.curvature, ell2_field.t, faces=sub)
    np.testing.assert_allclose(part.omega, ell2_field.omega[:, sub], atol=1e-12)
    assert part.track(1).face == 77


def test_large_t_limit_is_index_of_ground_state(ell2_setup, ell2_basis, ell2_field):
    # v_1 vanishes at the axis tips by symmetry; a tiny v_2 admixture only matters there
    v = ell2_basis.vectors
    mag = np.abs(v[:, 0])
    lim = face_indices(v[:, 0] + 1e-8 * v[:, 1], ell2_setup.connection, ell2_setup.curvature)
    away = np.all(mag[ell2_setup.mesh.faces] > 1e-6 * mag.max(), axis=1)
    assert away.mean() > 0.9
    m = np.searchsorted(ell2_field.t, 15 / ell2_basis.spectral_gap)
    np.testing.assert_allclose(ell2_field.expected_index[m, away], lim[away], atol=1e-6)


def test_truncation_stability(ell2_setup, ell2_basis):
    t = 12 / ell2_basis.spectral_gap
    mesh, cur = ell2_setup.mesh, ell2_setup.curvature
    full = closed_form_density(ell2_basis, mesh, cur, default_schedule(ell2_basis, extra=[t]))
    m = np.searchsorted(full.t, t)
    for k in (1, 2, 10, 40):
        b = ell2_basis.truncate(k)
        fk = closed_form_density(b, mesh, cur, default_schedule(b, t_max=2 * t, extra=[t]))
        mk = np.searchsorted(fk.t, t)
        ok = ~full.unreliable[m] & ~fk.unreliable[mk]
        assert ok.mean() > 0.9
        assert np.max(np.abs(fk.at(t) - full.at(t))[ok]) < 1e-6


def test_at_interpolates_linearly(ell2_field):
    fld = ell2_field
    m = len(fld.t) // 2
    ta, tb = fld.t[m], fld.t[m + 1]
    mid = fld.at(0.5 * (ta + tb))
    plain = [f for f in range(fld.omega.shape[1]) if f not in fld.inserted]
    want = (0.5 * (fld.omega[m] + fld.omega[m + 1])) / (2 * np.pi) + fld.branch
    np.testing.assert_allclose(mid[plain], want[plain], atol=1e-14)
    with pytest.raises(OutOfGrid):
        fld.at(fld.t[-1] * 2)
    with pytest.raises(OutOfGrid):
        fld.at(-1.0)


def test_expected_density_field(ell2_setup, ell2_basis):
    t = 1 / ell2_basis.eigenvalues[1]
    P = expected_density_field(ell2_basis, ell2_setup.mesh, ell2_setup.curvature, t)
    assert P.shape == (ell2_setup.mesh.n_faces,)
    assert (P * ell2_setup.mesh.geometry.face_area).sum() == pytest.approx(2, abs=1e-6)
    with pytest.raises(NegativeT):
        expected_density_field(ell2_basis, ell2_setup.mesh, ell2_setup.curvature, -1)


def test_schedule_rules(ell2_setup, ell2_basis):
    b = ell2_basis
    ts = default_schedule(b)
    assert ts[0] == 0 and ts[1] == pytest.approx(0.01 / b.eigenvalues[-1])
    assert np.all(np.diff(ts) > 0)
    assert np.exp(-ts[-1] * b.spectral_gap) <= 1e-10 * (1 + 1e-9)
    assert np.exp(-ts[-2] * b.spectral_gap) > 1e-10
    np.testing.assert_allclose(ts[2:-1] / ts[1:-2], 1.25)
    assert 0.77 in default_schedule(b, t_max=2.0, extra=[0.77])
    with pytest.raises(TZero):
        closed_form_density(b, ell2_setup.mesh, ell2_setup.curvature, [0.1, 0.2])
    with pytest.raises(NegativeT):
        default_schedule(b, extra=[-1])
    with pytest.raises(ValueError):
        closed_form_density(b, ell2_setup.mesh, ell2_setup.curvature, [0, 0.2, 0.1])


def test_degenerate_gap_needs_cap(ico_setup):
    b = ico_setup.eigenbasis()
    with pytest.raises(ValueError):
        default_schedule(b)


def test_unresolvable_step_raises(ell2_setup, ell2_basis):
    with pytest.raises(UnwrapAmbiguous):
        closed_form_density(ell2_basis, ell2_setup.mesh, ell2_setup.curvature,
                            [0, 1e-4, 0.1, 1.0, 5.0, 20.0], max_depth=0)


def test_wrap_range():
    x = np.linspace(-20, 20, 1001)
    w = _wrap(x)
    assert np.all((w >= -np.pi) & (w < np.pi))
    np.testing.assert_allclose(np.exp(1j * w), np.exp(1j * x), atol=1e-13)
