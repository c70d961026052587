"""Expected signed zero count of smoothed random sections, in closed form.

For a face ``(i, j, k)`` and smoothing time ``t > 0`` let
``G_ab = <<S_t delta_a, S_t delta_b>>`` and take the phase

    omega(t) = arg(G_ji G_kj G_ik) = -arg(G_ij G_jk G_ki),

unwrapped continuously in ``t``.  With the branch integer
``l = round(Omega / 2 pi)`` and ``omega(0) = Omega - 2 pi l`` the expected
index of the face is

    I(t) = omega(t) / (2 pi) + l,

which reduces to ``Omega / 2 pi`` at ``t = 0``.  ``G_ab`` is evaluated
spectrally as ``sum_l exp(-2 t lambda_l) (v_l)_a conj((v_l)_b)``.

Tracking
--------
The phase is followed along a geometric t-grid.  A step whose wrapped jump
is ``>= pi/2`` is bisected (geometric midpoint) up to 40 times.  The track
is anchored at the first small ``t`` whose phase lies within ``pi/2`` of
``omega(0)`` modulo ``2 pi``; the search first halves ``t`` towards 0 and
then, failing that, scans forward.  Grid points preceding such a late
anchor are unwrapped backwards from it and flagged as not confident.  This
happens on faces with an odd number of negative cotan weights: there the
phase starts near ``Omega + pi`` for ``t`` below the squared mesh size
and only settles afterwards.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bundle import Curvature
from .errors import NegativeT, OutOfGrid, ShapeMismatch, TZero, UnwrapAmbiguous
from .laplace import MassMatrix
from .mesh import SurfaceMesh
from .spectral import EigenBasis

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
JUMP_LIMIT = np.pi / 2
MAX_DEPTH = 40
SEED_FLOOR = 1e-9  # times 1/lambda_k
CONSERVATION_TOL = 1e-6


def _wrap(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x) + np.pi) % TWO_PI - np.pi


def round_half_away(x):
    """Round to nearest integer with halves going away from zero."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def branch_integers(omega) -> np.ndarray:
    """``l = round(Omega / 2 pi)``; warns on exact ties."""
    x = np.asarray(omega, dtype=float) / TWO_PI
    frac = np.abs(x - np.trunc(x))
    if np.any(np.isclose(frac, 0.5, rtol=0, atol=1e-12)):
        warnings.warn("curvature at an exact branch tie; rounding half away from zero", RuntimeWarning, stacklevel=2)
    return round_half_away(x).astype(np.int64)


def delta_section(mass, i: int) -> np.ndarray:
    """Coordinates of the delta section at vertex ``i``: ``1/A_i`` there, 0 elsewhere."""
    d = np.asarray(mass.diag if isinstance(mass, MassMatrix) else mass, dtype=float)
    out = np.zeros(len(d), dtype=complex)
    out[i] = 1.0 / d[i]
    return out


MODE_CUTOFF = 1e-18


def _weights(basis: EigenBasis, t: float, cutoff: float = 0.0):
    """Rows ``v_l * exp(-t (lambda_l - lambda_1))``; the common scale drops out of phases.

    Modes whose factor is below ``cutoff`` are left out.
    """
    w = np.exp(-t * (basis.eigenvalues - basis.eigenvalues[0]))
    keep = int(np.searchsorted(-w, -cutoff, side="right")) if cutoff > 0 else len(w)
    return basis.vectors[:, :keep] * w[None, :keep]


def smoothed_delta_products(basis: EigenBasis, face, t: float, *, normalized: bool = False):
    """``<<S_t d_i, S_t d_j>>, <<S_t d_j, S_t d_k>>, <<S_t d_k, S_t d_i>>`` for a vertex triple.

    With ``normalized=True`` every product is divided by
    ``exp(-2 t lambda_1)``, which leaves the phases unchanged and avoids
    underflow at large ``t``.
    """
    if t < 0:
        raise NegativeT(f"t must be >= 0, got {t}")
    if t == 0:
        raise TZero("products of distinct delta sections vanish at t = 0")
    i, j, k = (int(a) for a in face)
    W = _weights(basis, t)[[i, j, k]]
    if not normalized:
        W = W * math.exp(-t * basis.eigenvalues[0])
    g = lambda a, b: complex(np.dot(W[a], W[b].conj()))
    return g(0, 1), g(1, 2), g(2, 0)


def _edge_products(W, edges, chunk: int = 2048):
    Wc = W.conj()
    out = np.empty(len(edges), dtype=complex)
    for s in range(0, len(edges), chunk):
        e = edges[s:s + chunk]
        out[s:s + chunk] = np.einsum("el,el->e", W[e[:, 0]], Wc[e[:, 1]])
    return out


EIG_NOISE = 1e-13  # assumed relative error of eigenvector entries
PRECISION_TOL = 1e-6


def face_phases(basis: EigenBasis, mesh: SurfaceMesh, t: float, faces=None, *, error: bool = False):
    """Raw phase ``arg(G_ji G_kj G_ik)`` per face in ``[-pi, pi]``.

    With ``error=True`` also return a bound on the phase error caused by
    eigenvector noise of relative size ``EIG_NOISE``.  Where a product
    ``G_ab`` is itself at that noise level (a zero of the dominant
    eigenvector sitting on a vertex, at large ``t``) the bound exceeds 1.
    """
    if t <= 0:
        raise TZero("phases need t > 0")
    W = _weights(basis, t, MODE_CUTOFF)
    if faces is None:
        G = _edge_products(W, mesh.edges)
        h = np.where(mesh.face_edge_sign > 0, G[mesh.face_edges], np.conj(G[mesh.face_edges]))
        tri = mesh.faces
    else:
        tri = mesh.faces[np.asarray(faces)]
        Wt = W[tri]  # (F, 3, k)
        h = np.einsum("fcl,fcl->fc", Wt, np.roll(Wt, -1, axis=1).conj())
    ph = -np.angle(h[:, 0] * h[:, 1] * h[:, 2])
    if not error:
        return ph
    rn = np.sqrt(np.einsum("il,il->i", W.real, W.real) + np.einsum("il,il->i", W.imag, W.imag))
    delta = EIG_NOISE * rn.max()
    a = rn[tri]
    est = delta * (a + np.roll(a, -1, axis=1)) / np.maximum(np.abs(h), np.finfo(float).tiny)
    return ph, est.sum(axis=1)


@dataclass
class OmegaTrack:
    """Unwrapped phase of one face over a t-grid.

    Attributes
    ----------
    face : int
    t, omega : ndarray
        Grid (starting at 0, including bisection points) and phase values.
    branch : int
        ``l = round(Omega / 2 pi)``.
    curvature : float
        ``Omega`` of the face.
    seed_t : float
        Time at which the track was anchored to ``omega(0)``.
    confident : bool
        False when schedule points precede the anchor.
    refined : bool
        True when bisection points were inserted.
    """

    face: int
    t: np.ndarray
    omega: np.ndarray
    branch: int
    curvature: float
    seed_t: float
    confident: bool = True
    refined: bool = False

    @property
    def omega0(self) -> float:
        return float(self.omega[0])


def expected_index(track: OmegaTrack, t: float) -> float:
    """Expected index ``omega(t) / 2 pi + l``, linear in ``omega`` between grid points.

    At ``t = 0`` this is exactly ``Omega / 2 pi``.
    """
    if t < 0 or t > track.t[-1] * (1 + 1e-12):
        raise OutOfGrid(f"t={t} outside [0, {track.t[-1]}]")
    if t == 0:
        return track.curvature / TWO_PI
    w = float(np.interp(t, track.t, track.omega))
    return w / TWO_PI + track.branch


def default_schedule(basis: EigenBasis, *, t_max: float | None = None, t0: float | None = None,
                     growth: float = 1.25, tol: float = 1e-10, extra=()) -> np.ndarray:
    """Geometric grid ``{0} U {t0 g^m}`` up to the plateau or ``t_max``.

    ``t0`` defaults to ``0.01 / lambda_k``.  Without ``t_max`` the grid
    stops at the first point with ``exp(-t (lambda_2 - lambda_1)) < tol``;
    this needs a basis with at least two modes and a non-degenerate gap.
    ``extra`` times are merged in.
    """
    lam = basis.eigenvalues
    if t0 is None:
        t0 = 0.01 / lam[-1]
    if t0 <= 0 or growth <= 1:
        raise ValueError("need t0 > 0 and growth > 1")
    if t_max is None:
        gap = basis.spectral_gap
        if not math.isfinite(gap) or gap <= 1e-8 * max(lam[0], 1e-300):
            raise ValueError("degenerate or undefined spectral gap; pass t_max")
        t_max = math.log(1 / tol) / gap
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    m = max(0, math.ceil(math.log(t_max / t0) / math.log(growth) - 1e-12))
    ts = t0 * growth ** np.arange(m + 1)
    ts = ts[ts <= t_max * (1 + 1e-12)]
    if len(ts) == 0 or ts[-1] < t_max * (1 - 1e-12):
        ts = np.append(ts, t_max)
    extra = np.asarray(list(extra), dtype=float)
    if np.any(extra < 0):
        raise NegativeT("schedule times must be >= 0")
    return np.unique(np.concatenate([[0.0], ts, extra]))


class _Tracker:
    """Shared state for tracking many faces on one basis."""

    def __init__(self, basis, mesh, gid, max_depth):
        self.gid = gid
        self.mesh = mesh
        self.max_depth = max_depth
        self.lam = basis.eigenvalues
        self.V = basis.vectors
        self.broken: set[int] = set()

    def phase(self, face, t):
        w = np.exp(-t * (self.lam - self.lam[0]))
        keep = int(np.searchsorted(-w, -MODE_CUTOFF, side="right"))
        W = self.V[self.mesh.faces[self.gid[face]], :keep] * w[:keep]
        h = [np.dot(W[c], W[(c + 1) % 3].conj()) for c in range(3)]
        return float(-np.angle(h[0] * h[1] * h[2]))

    def step(self, face, ta, wa, tb, rb=None, depth=0, strict=True):
        """Unwrap from ``(ta, wa)`` to ``tb``; returns the list of ``(t, omega)`` reached.

        With ``strict=False`` an unresolvable jump is taken on the nearest
        branch and the face is recorded in ``self.broken``.
        """
        if rb is None:
            rb = self.phase(face, tb)
        d = float(_wrap(rb - wa))
        if abs(d) < JUMP_LIMIT:
            return [(tb, wa + d)]
        if depth >= self.max_depth:
            if not strict:
                self.broken.add(int(face))
                return [(tb, wa + d)]
            raise UnwrapAmbiguous(self.gid[face], f"phase on face {self.gid[face]} jumps by {d:.3f} between t={ta:.6g} and t={tb:.6g}")
        tm = math.sqrt(ta * tb) if ta > 0 else 0.5 * tb
        left = self.step(face, ta, wa, tm, None, depth + 1, strict)
        right = self.step(face, tm, left[-1][1], tb, rb, depth + 1, strict)
        return left + right


@dataclass
class DensityField:
    """Closed-form expected index over a schedule for every face.

    Attributes
    ----------
    t : ndarray, shape (T,)
        The schedule (``t[0] == 0``).
    omega, expected_index, density : ndarray, shape (T, F)
        Phase, expected index and expected index per unit area.
    branch : ndarray, shape (F,)
    seed_t : ndarray, shape (F,)
    confident, refined : ndarray of bool, shape (F,)
    discontinuous : ndarray of bool, shape (F,)
        Faces whose phase jumped by about ``pi`` before the anchor, where a
        smoothed delta product passes through zero.
    unreliable : ndarray of bool, shape (T, F)
        Grid values whose phase error bound exceeds ``PRECISION_TOL``.
    conservation_residual : ndarray, shape (T,)
        ``|sum_f I_f(t) - degree|``.
    degree : int
    """

    t: np.ndarray
    omega: np.ndarray
    expected_index: np.ndarray
    density: np.ndarray
    branch: np.ndarray
    curvature: np.ndarray
    seed_t: np.ndarray
    confident: np.ndarray
    refined: np.ndarray
    conservation_residual: np.ndarray
    degree: int
    inserted: dict = field(default_factory=dict, repr=False)
    faces: np.ndarray | None = None
    discontinuous: np.ndarray | None = None
    unreliable: np.ndarray | None = None

    def at(self, t: float) -> np.ndarray:
        """Expected index per face at ``t`` (linear interpolation in ``omega``)."""
        if t < 0 or t > self.t[-1] * (1 + 1e-12):
            raise OutOfGrid(f"t={t} outside [0, {self.t[-1]}]")
        if t == 0:
            return self.curvature / TWO_PI
        out = self._interp(t)
        for f in self.inserted:
            out[f] = expected_index(self.track(f), t)
        return out

    def _interp(self, t):
        m = int(np.searchsorted(self.t, t))
        if self.t[m] == t:
            return self.expected_index[m].copy()
        a = (t - self.t[m - 1]) / (self.t[m] - self.t[m - 1])
        w = (1 - a) * self.omega[m - 1] + a * self.omega[m]
        return w / TWO_PI + self.branch

    def track(self, face: int) -> OmegaTrack:
        t, w = self.t, self.omega[:, face]
        ins = self.inserted.get(face)
        if ins:
            ti, wi = np.array(ins).T
            t = np.concatenate([t, ti])
            w = np.concatenate([w, wi])
            o = np.argsort(t, kind="stable")
            t, w = t[o], w[o]
        gface = face if self.faces is None else int(self.faces[face])
        return OmegaTrack(gface, t, w, int(self.branch[face]), float(self.curvature[face]),
                          float(self.seed_t[face]), bool(self.confident[face]), bool(self.refined[face]))

    @property
    def conserved(self) -> bool:
        return bool(np.all(self.conservation_residual <= CONSERVATION_TOL))


def _check_schedule(schedule):
    ts = np.asarray(schedule, dtype=float)
    if ts.ndim != 1 or len(ts) == 0:
        raise ValueError("empty schedule")
    if np.any(ts < 0):
        raise NegativeT("schedule times must be >= 0")
    if ts[0] != 0:
        raise TZero("schedule must start at t = 0, where the phase is fixed by the curvature")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("schedule must be strictly increasing")
    return ts


def closed_form_density(basis: EigenBasis, mesh: SurfaceMesh, curvature: Curvature, schedule=None,
                        *, faces=None, max_depth: int = MAX_DEPTH) -> DensityField:
    """Track every face over ``schedule`` and evaluate the expected index.

    ``faces`` restricts the computation to a subset; columns of the result
    then follow that order and conservation is not checked.

    Raises
    ------
    UnwrapAmbiguous
        When bisection cannot resolve a step, or no grid point is close to
        the anchor value.
    """
    if basis.n != mesh.n_vertices:
        raise ShapeMismatch("basis and mesh have different vertex counts")
    ts = _check_schedule(default_schedule(basis) if schedule is None else schedule)
    sub = None if faces is None else np.asarray(faces, dtype=np.int64).ravel()
    Om = np.asarray(curvature.omega, dtype=float)
    if sub is not None:
        Om = Om[sub]
    gid = np.arange(mesh.n_faces) if sub is None else sub  # column -> mesh face
    F = len(Om)
    ell = branch_integers(Om)
    w0 = Om - TWO_PI * ell
    T = len(ts)

    raw = np.empty((T, F))
    err = np.zeros((T, F))
    raw[0] = w0
    for m in range(1, T):
        raw[m], err[m] = face_phases(basis, mesh, ts[m], sub, error=True)

    tr = _Tracker(basis, mesh, gid, max_depth)
    omega = np.full((T, F), np.nan)
    omega[0] = w0
    seed_m = np.full(F, -1)  # base index of the anchor, 0 when anchored below t_1
    seed_t = np.full(F, np.nan)
    inserted: dict[int, list] = {}

    if T > 1:
        # anchor at t_1 where possible
        near = np.abs(_wrap(raw[1] - w0)) < JUMP_LIMIT
        omega[1, near] = w0[near] + _wrap(raw[1, near] - w0[near])
        seed_m[near] = 1
        seed_t[near] = ts[1]
        # otherwise halve towards 0
        floor = SEED_FLOOR / basis.eigenvalues[-1]
        todo = np.nonzero(~near)[0]
        halving = {int(f): [] for f in todo}
        tt = ts[1]
        while len(todo) and tt / 2 >= floor:
            tt /= 2
            r = face_phases(basis, mesh, tt, gid[todo])
            ok = np.abs(_wrap(r - w0[todo])) < JUMP_LIMIT
            for f, rf in zip(todo[ok], r[ok]):
                f = int(f)
                pts = [(tt, w0[f] + float(_wrap(rf - w0[f])))]
                for tb, rb in reversed(halving.pop(f)):
                    pts += tr.step(f, pts[-1][0], pts[-1][1], tb, rb)
                pts += tr.step(f, pts[-1][0], pts[-1][1], ts[1], raw[1, f])
                omega[1, f] = pts[-1][1]
                inserted[f] = pts[:-1]
                seed_m[f] = 0
                seed_t[f] = tt
            for f, rf in zip(todo[~ok], r[~ok]):
                halving[int(f)].append((tt, float(rf)))
            todo = todo[~ok]
        # still unanchored: first schedule point near the anchor value
        for f in todo.tolist():
            hits = np.nonzero(np.abs(_wrap(raw[1:, f] - w0[f])) < JUMP_LIMIT)[0]
            if len(hits) == 0:
                raise UnwrapAmbiguous(gid[f], f"no point of the schedule has a phase near omega(0) on face {gid[f]}")
            m = int(hits[0]) + 1
            seed_m[f] = m
            seed_t[f] = ts[m]
            omega[m, f] = w0[f] + _wrap(raw[m, f] - w0[f])
            pts = []
            for mm in range(m - 1, 0, -1):  # backwards from the anchor
                seg = tr.step(f, ts[mm + 1], omega[mm + 1, f], ts[mm], raw[mm, f], strict=False)
                omega[mm, f] = seg[-1][1]
                pts += seg[:-1]
            if pts:
                inserted[f] = pts
        # forward unwrap of everything after the anchors
        for m in range(2, T):
            act = np.nonzero(seed_m < m)[0]
            d = _wrap(raw[m, act] - omega[m - 1, act])
            ok = np.abs(d) < JUMP_LIMIT
            omega[m, act[ok]] = omega[m - 1, act[ok]] + d[ok]
            for f in act[~ok].tolist():
                seg = tr.step(f, ts[m - 1], omega[m - 1, f], ts[m], raw[m, f])
                omega[m, f] = seg[-1][1]
                inserted.setdefault(f, []).extend(seg[:-1])

    ind = omega / TWO_PI + ell[None, :]
    ind[0] = Om / TWO_PI
    deg = int(np.rint(Om.sum() / TWO_PI))
    resid = np.abs(ind.sum(axis=1) - deg)
    if sub is None and np.any(resid > CONSERVATION_TOL):
        bad = np.nonzero(resid > CONSERVATION_TOL)[0]
        lost = int((err[bad] > PRECISION_TOL).any(axis=0).sum())
        log.warning("expected index not conserved at %d of %d grid times (worst %.3g, first at t=%.6g);"
                    " %d faces have lost phase precision there", len(bad), T, resid.max(), ts[bad[0]], lost)
    refined = np.zeros(F, dtype=bool)
    refined[list(inserted)] = True
    confident = seed_m <= 1
    broken = np.zeros(F, dtype=bool)
    broken[list(tr.broken)] = True
    area = mesh.geometry.face_area[gid]
    return DensityField(ts, omega, ind, ind / area[None, :], ell, Om, seed_t, confident, refined, resid, deg,
                        {f: v for f, v in inserted.items() if v}, gid, broken, err > PRECISION_TOL)


def omega_track(basis: EigenBasis, mesh: SurfaceMesh, curvature: Curvature, face: int, schedule) -> OmegaTrack:
    """Track of a single face (see :func:`closed_form_density`)."""
    return closed_form_density(basis, mesh, curvature, schedule, faces=[face]).track(0)


def expected_density_field(basis: EigenBasis, mesh: SurfaceMesh, curvature: Curvature, t: float,
                           schedule=None) -> np.ndarray:
    """Expected zero density ``I / area`` per face at time ``t``."""
    if t < 0:
        raise NegativeT(f"t must be >= 0, got {t}")
    if schedule is None:
        try:
            schedule = default_schedule(basis, extra=[t])
        except ValueError:
            schedule = default_schedule(basis, t_max=max(t, 1.0 / basis.eigenvalues[-1]), extra=[t])
    else:
        schedule = np.unique(np.append(_check_schedule(schedule), t))
    fld = closed_form_density(basis, mesh, curvature, schedule)
    if t > fld.t[-1]:
        raise OutOfGrid(f"t={t} beyond the schedule")
    m = int(np.searchsorted(fld.t, t))
    return fld.density[m]
