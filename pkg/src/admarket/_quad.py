"""Small quadrature helpers shared across the numerical modules."""

from __future__ import annotations

import numpy as np

_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEGGAUSS_CACHE[n]


def gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def segment_points(a: float, b: float, breaks) -> np.ndarray:
    """Sorted endpoints a, b plus the interior break points strictly inside (a, b)."""
    pts = [a, b]
    for p in np.atleast_1d(np.asarray(breaks, dtype=float)):
        if np.isfinite(p) and a + 1e-13 < p < b - 1e-13:
            pts.append(float(p))
    pts = np.array(sorted(pts))
    # drop near-duplicates
    keep = np.concatenate(([True], np.diff(pts) > 1e-13))
    return pts[keep]


def gl_nodes_segmented(a: float, b: float, breaks, n_per_seg: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [a, b] split at the given break points.

    Splitting at known kinks/jumps restores spectral accuracy for piecewise-smooth
    integrands.
    """
    pts = segment_points(a, b, breaks)
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        x, w = gl_nodes(lo, hi, n_per_seg)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    if b <= a:
        return 0.0

    def simp(lo, mid, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm = f(lmid)
        frm = f(rmid)
        left = simp(lo, lmid, mid, flo, flm, fmid)
        right = simp(mid, rmid, hi, fmid, frm, fhi)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1)
                + recurse(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1))

    mid = 0.5 * (a + b)
    fa, fm, fb = f(a), f(mid), f(b)
    whole = simp(a, mid, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def adaptive_simpson_segmented(f, a: float, b: float, breaks, tol: float = 1e-9) -> float:
    """Adaptive Simpson with forced splits at known kink locations."""
    pts = segment_points(a, b, breaks)
    n_seg = len(pts) - 1
    return sum(adaptive_simpson(f, lo, hi, tol / max(n_seg, 1))
               for lo, hi in zip(pts[:-1], pts[1:]))
