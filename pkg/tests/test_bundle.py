import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zerodensity.bundle import (
    Connection, Curvature, _frame_angles, build_levi_civita_connection, curvature_from_holonomy, degree,
    degree_residual, transport, vertex_normals,
)
from zerodensity.errors import BranchBoundary, DisconnectedPath, HolonomyMismatch, NotInteger, ValidationError
from zerodensity.shapes import box, cubed_ellipsoid, ellipsoid, icosahedron, icosphere, tetrahedron


def _face_connection(mesh, face, angle):
    """Each half-edge of ``face`` rotates by ``angle``; all other edges trivial."""
    a = np.zeros(mesh.n_edges)
    a[mesh.face_edges[face]] = angle * mesh.face_edge_sign[face]
    return Connection.from_angles(mesh, a)


@pytest.mark.parametrize("make", [icosahedron, lambda: icosphere(2), lambda: ellipsoid(level=2),
                                  lambda: box(3), lambda: cubed_ellipsoid(4)])
def test_levi_civita_unitary_and_gauss_bonnet(make):
    m = make()
    c = build_levi_civita_connection(m)
    assert np.max(np.abs(np.abs(c.r) - 1)) < 1e-12
    assert np.max(np.abs(c.r * c.r.conj() - 1)) < 1e-12
    cur = curvature_from_holonomy(m, c)
    assert np.max(np.abs(c.holonomy() - np.exp(1j * cur.omega))) < 1e-9
    defect = 2 * np.pi * m.n_vertices - m.geometry.corner_angle.sum()
    assert cur.total == pytest.approx(defect, abs=1e-9)
    assert cur.total == pytest.approx(4 * np.pi, abs=1e-9)
    assert degree(m, cur) == 2


def test_icosahedron_curvature_per_face(ico):
    cur = curvature_from_holonomy(ico, build_levi_civita_connection(ico))
    np.testing.assert_allclose(cur.omega, np.pi / 5, atol=1e-12)


def test_reverse_direction_is_conjugate(ico):
    c = build_levi_civita_connection(ico)
    for i, j in ico.edges[:15]:
        assert c.value(int(j), int(i)) == np.conj(c.value(int(i), int(j)))
        assert c.value(int(i), int(j)) * c.value(int(j), int(i)) == pytest.approx(1, abs=1e-15)


def test_flat_region_transport_is_trivial_after_frame_alignment():
    m = box(3)
    nrm = vertex_normals(m)
    fn = m.face_normals
    n = m.n_vertices
    # vertices whose every incident face lies in the same plane
    flat = np.ones(n, dtype=bool)
    for f in range(m.n_faces):
        for v in m.faces[f]:
            flat[v] &= np.allclose(fn[f], nrm[v], atol=1e-12)
    assert flat.sum() > 0
    theta = _frame_angles(m, nrm)
    # global angle of the reference direction at each flat vertex
    beta = np.full(n, np.nan)
    for f in range(m.n_faces):
        for c in range(3):
            i, j = m.faces[f, c], m.faces[f, (c + 1) % 3]
            if flat[i] and np.isnan(beta[i]):
                u = np.array([1.0, 0, 0]) if abs(nrm[i, 0]) < 0.9 else np.array([0, 1.0, 0])
                u = u - (u @ nrm[i]) * nrm[i]
                u /= np.linalg.norm(u)
                w = np.cross(nrm[i], u)
                d = m.vertices[j] - m.vertices[i]
                beta[i] = np.arctan2(d @ w, d @ u) - theta[f, c]
    conn = build_levi_civita_connection(m)
    g = np.where(flat, np.exp(-1j * np.nan_to_num(beta)), 1.0)
    aligned = conn.gauge(g)
    inner = flat[m.edges[:, 0]] & flat[m.edges[:, 1]]
    same_side = np.all(np.isclose(nrm[m.edges[inner, 0]], nrm[m.edges[inner, 1]]), axis=1)
    sel = np.nonzero(inner)[0][same_side]
    assert len(sel) > 0
    np.testing.assert_allclose(aligned.r[sel], 1.0, atol=1e-12)
    cur = curvature_from_holonomy(m, conn)
    flat_faces = np.all(flat[m.faces], axis=1)
    np.testing.assert_allclose(cur.omega[flat_faces], 0.0, atol=1e-12)


def test_trivial_connection():
    m = icosphere(1)
    c = Connection.trivial(m)
    cur = curvature_from_holonomy(m, c)
    np.testing.assert_array_equal(cur.omega, 0.0)
    assert degree(m, cur) == 0


def test_face_rotation_example():
    m = tetrahedron()
    c = _face_connection(m, 0, 2 * np.pi / 9)
    h = c.halfedge_values()[0]
    assert np.prod(h) == pytest.approx(np.exp(2j * np.pi / 3), abs=1e-14)
    cur = curvature_from_holonomy(m, c)
    assert cur.omega[0] == pytest.approx(2 * np.pi / 3, abs=1e-12)


def test_external_curvature_shift_changes_degree(ico):
    c = build_levi_civita_connection(ico)
    om = curvature_from_holonomy(ico, c).omega.copy()
    om[7] += 2 * np.pi
    ext = Curvature.external(c, om)
    assert ext.source == "external"
    assert degree(ico, ext) == 3
    with pytest.raises(HolonomyMismatch):
        Curvature.external(c, om + 0.01)
    with pytest.raises(ValidationError):
        Curvature.external(c, om[:-1])


def test_non_integer_degree(ico):
    c = Connection.trivial(ico)
    om = np.zeros(ico.n_faces)
    cur = Curvature(om + 1e-3, "external")  # bypasses the holonomy check on purpose
    with pytest.raises(NotInteger):
        degree(ico, cur)
    d, res = degree_residual(cur)
    assert d == 0 and res == pytest.approx(20e-3 / (2 * np.pi))


def test_branch_boundary():
    m = tetrahedron()
    with pytest.raises(BranchBoundary):
        curvature_from_holonomy(m, _face_connection(m, 0, np.pi / 3))


def test_connection_validation(ico):
    with pytest.raises(ValidationError):
        Connection(ico, np.full(ico.n_edges, 1.001))
    with pytest.raises(ValidationError):
        Connection(ico, np.ones(3))
    c = Connection.trivial(ico)
    with pytest.raises(ValueError):
        c.r[0] = 2


def test_transport_examples(ico):
    c = build_levi_civita_connection(ico)
    cur = curvature_from_holonomy(ico, c)
    assert transport(c, [], 0.3 + 0.4j) == 0.3 + 0.4j
    i, j = map(int, ico.edges[0])
    assert transport(c, [(i, j), (j, i)], 1.0) == pytest.approx(1.0, abs=1e-15)
    for f in range(ico.n_faces):
        a, b, k = map(int, ico.faces[f])
        z = transport(c, [(a, b), (b, k), (k, a)], 1.0)
        assert abs(z - np.exp(1j * cur.omega[f])) < 1e-9
    with pytest.raises(DisconnectedPath):
        transport(c, [(a, b), (a, k)], 1.0)
    with pytest.raises(DisconnectedPath):
        transport(c, [(0, 0)], 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 60))
def test_transport_preserves_modulus_on_random_walks(seed, steps):
    m = icosphere(1)
    rng = np.random.default_rng(seed)
    c = Connection.from_angles(m, rng.uniform(-np.pi, np.pi, m.n_edges))
    nbrs = [[] for _ in range(m.n_vertices)]
    for a, b in m.edges:
        nbrs[a].append(int(b))
        nbrs[b].append(int(a))
    v = int(rng.integers(m.n_vertices))
    path = []
    for _ in range(steps):
        w = nbrs[v][rng.integers(len(nbrs[v]))]
        path.append((v, w))
        v = w
    z0 = complex(rng.standard_normal(), rng.standard_normal())
    assert abs(abs(transport(c, path, z0)) - abs(z0)) < 1e-12 * abs(z0)
    # walking back undoes it
    back = [(b, a) for a, b in reversed(path)]
    assert abs(transport(c, path + back, z0) - z0) < 1e-12 * abs(z0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gauge_change_keeps_holonomy(seed):
    m = ellipsoid(level=1)
    rng = np.random.default_rng(seed)
    c = build_levi_civita_connection(m)
    g = np.exp(1j * rng.uniform(-np.pi, np.pi, m.n_vertices))
    c2 = c.gauge(g)
    np.testing.assert_allclose(c2.holonomy(), c.holonomy(), atol=1e-13)
    assert np.max(np.abs(np.abs(c2.r) - 1)) < 1e-12


def test_edge_along_normal_is_rejected(ico):
    from zerodensity.errors import ZeroProjection
    nrm = vertex_normals(ico).copy()
    i, j = ico.edges[0]
    d = ico.vertices[j] - ico.vertices[i]
    nrm[i] = d / np.linalg.norm(d)
    with pytest.raises(ZeroProjection):
        _frame_angles(ico, nrm)


def test_reference_direction_falls_back(ico):
    # a nearly parallel first half-edge is skipped in favour of the next one
    nrm = vertex_normals(ico).copy()
    f0 = ico.faces[0]
    d = ico.vertices[f0[1]] - ico.vertices[f0[0]]
    tilt = np.cross(d, nrm[f0[0]])
    n = d / np.linalg.norm(d) + 1e-10 * tilt / np.linalg.norm(tilt)
    nrm[f0[0]] = n / np.linalg.norm(n)
    theta = _frame_angles(ico, nrm)
    assert np.isfinite(theta).all()
    assert theta[0, 0] != 0.0  # the first half-edge no longer defines the zero angle
