"""Pointwise exterior algebra in chart coordinates.

A p-form at a point is stored as the full antisymmetric array of shape
(n,)*p; evaluation on p tangent vectors is plain index contraction.  With
this convention d(one-form) has entries dF[a,b] = d_a F_b - d_b F_a, and
the Cartan identity d eta(X,Y) = X(eta(Y)) - Y(eta(X)) - eta([X,Y]) holds.

Coefficient functions are differentiated by 4th-order central finite
differences; everything here is single-point (these live at sample points,
not in integrator hot loops).
"""

from itertools import permutations

import numpy as np

from .frames import as_points, fd_step


def _perm_sign(p) -> int:
    sign, seen = 1, list(p)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _factorial(p: int) -> int:
    out = 1
    for m in range(2, p + 1):
        out *= m
    return out


def alternate(T: np.ndarray, p: int) -> np.ndarray:
    """Antisymmetrization (1/p!) sum_sigma sign(sigma) T_sigma over the last
    p axes of a single-point tensor."""
    if p <= 1:
        return T
    out = np.zeros_like(T)
    axes = list(range(T.ndim - p, T.ndim))
    for perm in permutations(range(p)):
        order = list(range(T.ndim - p)) + [axes[i] for i in perm]
        out += _perm_sign(perm) * np.transpose(T, order)
    return out / _factorial(p)


def wedge(a: np.ndarray, p: int, b: np.ndarray, q: int) -> np.ndarray:
    """Wedge product of a p-form and a q-form (single point)."""
    t = np.tensordot(a, b, axes=0)
    return alternate(t, p + q) * (_factorial(p + q) // (_factorial(p) * _factorial(q)))


def interior(X: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Contraction i_X F on the first slot."""
    return np.tensordot(np.asarray(X, dtype=float), F, axes=(0, 0))


def evaluate(F: np.ndarray, *vectors) -> float:
    out = F
    for v in vectors:
        out = np.tensordot(np.asarray(v, dtype=float), out, axes=(0, 0))
    return out


def exterior_d(form_fn, p: int, q, scale: float = None) -> np.ndarray:
    """Coordinate exterior derivative of a p-form field at chart point q.

    form_fn maps a point to the (n,)*p coefficient array; the partials are
    4th-order central differences, antisymmetrized into a (p+1)-form.
    """
    q = as_points(q)
    n = q.shape[-1]
    h = float(fd_step(q, scale))
    partials = []
    for m in range(n):
        d = np.zeros(n)
        d[m] = h
        fm2, fm1 = np.asarray(form_fn(q - 2 * d)), np.asarray(form_fn(q - d))
        fp1, fp2 = np.asarray(form_fn(q + d)), np.asarray(form_fn(q + 2 * d))
        partials.append((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
    D = np.stack(partials, axis=0)            # D[m, a_1..a_p] = d_m F
    return alternate(D, p + 1) * (p + 1)


def d_scalar(fn, q, scale: float = None) -> np.ndarray:
    """df as a 1-form (coordinate gradient by 4th-order FD)."""
    return exterior_d(lambda p: np.asarray(fn(p), dtype=float), 0, q, scale)


def nform_ratio(num: np.ndarray, den: np.ndarray, n: int) -> float:
    """Ratio of two top-degree forms (both multiples of dx^1^...^dx^n)."""
    idx = tuple(range(n))
    d = den[idx]
    if d == 0:
        raise ZeroDivisionError("denominator n-form vanishes at this point")
    return float(num[idx] / d)


def wedge_power(F: np.ndarray, p: int, m: int) -> np.ndarray:
    """F^^m (wedge of F with itself m times); m = 0 gives the scalar 1."""
    if m == 0:
        return np.array(1.0)
    out, deg = F, p
    for _ in range(m - 1):
        out = wedge(out, deg, F, p)
        deg += p
    return out
