"""Monte Carlo estimate of per-face expected indices.

Random sections are ``phi = sum_l z_l v_l`` with ``z_l = x_l + i y_l`` and
``x, y`` independent standard normals.  Samples are drawn in fixed-size
blocks, each block from its own stream ``SeedSequence(seed, spawn_key=(b,))``,
so the result does not depend on how blocks are spread over workers.
Index sums are accumulated as integers, which makes the merge exact.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TooManyDegenerate
from .index import batch_face_indices
from .problem import BundleSetup
from .spectral import EigenBasis

BLOCK_SIZE = 500
MAX_DEGENERATE = 0.01


def sample_random_section(basis, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw Gaussian random sections.

    Parameters
    ----------
    basis : EigenBasis or int
        With an int ``n`` the complex Gaussians are returned directly as
        per-vertex coefficients.
    size : int, optional
        Number of sections; returns shape ``(n, size)`` when given.
    """
    k = basis if isinstance(basis, (int, np.integer)) else basis.k
    shape = (k,) if size is None else (k, size)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z if isinstance(basis, (int, np.integer)) else basis.vectors @ z


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


@dataclass(frozen=True)
class SampleStats:
    """Accumulated per-face index statistics.

    ``sum_ind`` and ``sum_sq`` are exact integer sums over the ``count``
    non-degenerate samples.
    """

    t: float
    count: int
    sum_ind: np.ndarray
    sum_sq: np.ndarray
    n_requested: int
    n_degenerate: int
    conservation_failures: int
    degree: int
    max_residue: float

    @property
    def mean(self) -> np.ndarray:
        return self.sum_ind / self.count

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance per face."""
        n = self.count
        if n < 2:
            return np.full(len(self.sum_ind), np.nan)
        return np.maximum(self.sum_sq - self.sum_ind.astype(float) ** 2 / n, 0.0) / (n - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)

    @property
    def total_mean(self) -> float:
        return float(self.sum_ind.sum() / self.count)


def _run_block(args):
    setup, V, damp, omega, seed, b, lo, hi = args
    rng = block_rng(seed, b)
    z = rng.standard_normal((len(damp), hi - lo)) + 1j * rng.standard_normal((len(damp), hi - lo))
    phi = V @ (damp[:, None] * z)
    ind, res, deg = batch_face_indices(phi, setup.connection, omega)
    good = ~deg
    ig = ind[:, good]
    totals = ig.sum(axis=0)
    return (ig.sum(axis=1), (ig * ig).sum(axis=1), int(good.sum()), int(deg.sum()),
            totals, float(res[good].max(initial=0.0)))


def empirical_index_stats(setup: BundleSetup, t: float, n_samples: int, seed: int, k: int | None = None, *,
                          basis: EigenBasis | None = None, workers: int = 1,
                          block_size: int = BLOCK_SIZE) -> SampleStats:
    """Sample, smooth at ``t`` and count face indices.

    Parameters
    ----------
    setup : BundleSetup
    t : float
        Smoothing time, ``>= 0``.
    n_samples : int
    seed : int
    k : int, optional
        Truncation; the full basis is used when None (and ``basis`` is None).
    basis : EigenBasis, optional
        Precomputed basis (truncated to ``k`` if both are given).
    workers : int
        Thread count; does not change the result.

    Raises
    ------
    TooManyDegenerate
        More than 1% of samples hit a zero vertex or an antipodal edge.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if t < 0:
        from .errors import NegativeT
        raise NegativeT(f"t must be >= 0, got {t}")
    if basis is None:
        basis = setup.eigenbasis(k)
    elif k is not None and k < basis.k:
        basis = basis.truncate(k)
    damp = np.exp(-t * (basis.eigenvalues - basis.eigenvalues[0]))  # overall scale is irrelevant
    omega = np.asarray(setup.curvature.omega, dtype=float)
    deg = setup.degree
    nb = math.ceil(n_samples / block_size)
    jobs = [(setup, basis.vectors, damp, omega, seed, b, b * block_size, min(n_samples, (b + 1) * block_size))
            for b in range(nb)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]

    F = setup.mesh.n_faces
    s1 = np.zeros(F, dtype=np.int64)
    s2 = np.zeros(F, dtype=np.int64)
    cnt = ndeg = fails = 0
    res = 0.0
    for a, b2, c, d, totals, r in parts:  # merged in block order
        s1 += a
        s2 += b2
        cnt += c
        ndeg += d
        fails += int(np.sum(totals != deg))
        res = max(res, r)
    if ndeg > MAX_DEGENERATE * n_samples:
        raise TooManyDegenerate(f"{ndeg} of {n_samples} samples were degenerate")
    if cnt == 0:
        raise TooManyDegenerate("every sample was degenerate")
    return SampleStats(float(t), cnt, s1, s2, n_samples, ndeg, fails, deg, res)


@dataclass(frozen=True)
class ComparisonReport:
    """Per-face agreement between sampled means and closed-form values.

    ``stderr`` is the sample standard error raised, where needed, to the
    smallest value an integer-valued variable with mean ``expected`` can
    have: ``frac (1 - frac) / N`` with ``frac`` the fractional part of the
    expected value.  The sample variance is near zero for faces whose index
    is rarely nonzero, and the floor keeps such faces from producing huge
    z-scores out of a handful of hits.
    """

    mean: np.ndarray
    expected: np.ndarray
    stderr: np.ndarray
    z: np.ndarray
    degree: int
    mc_total: float
    expected_total: float
    conservation_failures: int
    total_tol: float = 1e-6

    @property
    def within(self) -> np.ndarray:
        return np.abs(np.nan_to_num(self.z, nan=np.inf)) < 3

    @property
    def fraction_within(self) -> float:
        return float(self.within.mean())

    @property
    def flagged(self) -> np.ndarray:
        return np.nonzero(~self.within)[0]

    @property
    def conservation_ok(self) -> bool:
        return (self.conservation_failures == 0
                and abs(self.expected_total - self.degree) <= self.total_tol
                and abs(self.mc_total - self.degree) <= self.total_tol)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["face", "mc_mean", "mc_stderr", "closed_form", "z", "flag"])
        for f in range(len(self.mean)):
            w.writerow([f, repr(float(self.mean[f])), repr(float(self.stderr[f])), repr(float(self.expected[f])),
                        repr(float(self.z[f])), int(not self.within[f])])
        return buf.getvalue()

    def summary(self) -> str:
        return (f"faces within 3 stderr: {self.within.sum()}/{len(self.mean)} ({100 * self.fraction_within:.2f}%)\n"
                f"total: monte carlo {self.mc_total:.9g}, closed form {self.expected_total:.9g}, degree {self.degree}\n"
                f"conservation: {'ok' if self.conservation_ok else 'FAILED'}"
                f" ({self.conservation_failures} samples off-degree)\n"
                f"flagged faces: {' '.join(map(str, self.flagged[:20]))}{' ...' if len(self.flagged) > 20 else ''}")


def compare_report(stats: SampleStats, closed_form, *, floor: bool = True) -> ComparisonReport:
    """z-scores ``(mean - closed_form) / stderr`` per face.

    Faces with zero standard error get an undefined (NaN) z-score and are
    flagged.

    Raises
    ------
    ShapeMismatch
    """
    expected = np.asarray(closed_form, dtype=float)
    if expected.shape != stats.sum_ind.shape:
        raise ShapeMismatch(f"closed form has shape {expected.shape}, statistics {stats.sum_ind.shape}")
    return compare_arrays(stats.mean, stats.stderr, expected, degree=stats.degree, count=stats.count,
                          conservation_failures=stats.conservation_failures, floor=floor)


def compare_arrays(mean, stderr, expected, *, degree: int, count: float = math.inf,
                   conservation_failures: int = 0, floor: bool = True) -> ComparisonReport:
    """Array-level core of :func:`compare_report`.

    ``count`` is the sample size behind ``mean``; with the default
    (infinite) the variance floor vanishes.
    """
    mean = np.asarray(mean, dtype=float)
    expected = np.asarray(expected, dtype=float)
    se = np.asarray(stderr, dtype=float)
    if not (mean.shape == expected.shape == se.shape):
        raise ShapeMismatch("mean, stderr and expected must have the same shape")
    var = se**2
    if floor and math.isfinite(count):
        frac = expected - np.floor(expected)
        var = np.maximum(var, frac * (1 - frac) / count)
    se = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (mean - expected) / np.where(se > 0, se, 1.0), np.nan)
    return ComparisonReport(mean, expected, se, z, int(degree), float(mean.sum()), float(expected.sum()),
                            int(conservation_failures))
