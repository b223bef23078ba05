"""Shared numerical kernels.

Dense matrix exponential, eigendecomposition with a diagonalizability
contract, eigenvector condition numbers, safeguarded first-root location
(forward march + Brent refinement), and adaptive ODE integration.  The
design envelope is small dense systems (n <= 20).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import NoCrossingError, StiffnessError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues/eigenvectors of a square matrix with a diagonalizability
    verdict (smallest singular value of V above 1e-10 of the largest)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    is_diagonalizable: bool


@dataclass(frozen=True)
class RootBracket:
    """Sign-change bracket [lo, hi] with the function values at both ends."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float


def expm(M: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Evaluate e^{M t} by scaling-and-squaring (Pade), via scipy.

    Raises OverflowError when the result overflows double precision, and
    ValueError on non-finite input.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)) or not np.isfinite(t):
        raise ValueError("expm requires finite entries")
    with warnings.catch_warnings(), np.errstate(over="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        out = scipy.linalg.expm(M * t)
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential overflow: ||M t|| too large")
    return out


def eigendecompose(M: np.ndarray) -> EigenDecomposition:
    """Dense nonsymmetric eigendecomposition with unit-normalized columns."""
    M = np.asarray(M, dtype=float)
    lam, V = np.linalg.eig(M)
    norms = np.linalg.norm(V, axis=0)
    V = V / norms
    sv = np.linalg.svd(V, compute_uv=False)
    diagonalizable = bool(sv[-1] > 1e-10 * sv[0])
    return EigenDecomposition(lam, V, diagonalizable)


def bauer_fike(e: EigenDecomposition) -> float:
    """2-norm condition number of the (unit-column) eigenvector matrix.

    This bounds the sensitivity of the computed eigenvalues; it is >= 1 and
    equals 1 exactly for normal matrices.
    """
    if not e.is_diagonalizable:
        raise ValueError("non-diagonalizable: eigenvector matrix is singular")
    V = e.eigenvectors / np.linalg.norm(e.eigenvectors, axis=0)
    sv = np.linalg.svd(V, compute_uv=False)
    return float(sv[0] / sv[-1])


def _brent(f, a, b, fa, fb, f_tol, max_iter=200):
    """Classic safeguarded Brent iteration on a sign-change bracket.

    Runs until the bracket width drops below 1e-12 * max(1, |root|) and the
    residual below ``f_tol`` (or the width reaches the machine floor, where
    no further progress is possible in double precision).
    """
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol_act = 2.0 * _EPS * abs(b) + 0.5e-15
        m = 0.5 * (c - b)
        width_tol = 1e-12 * max(1.0, abs(b))
        if fb == 0.0 or (abs(m) <= width_tol and abs(fb) <= f_tol):
            return b
        if abs(m) <= tol_act:
            return b  # machine floor reached
        if abs(e) < tol_act or abs(fa) <= abs(fb):
            d = e = m
        else:
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol_act * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = e = m
        a, fa = b, fb
        b = b + (d if abs(d) > tol_act else np.copysign(tol_act, m))
        fb = f(b)
        if not np.isfinite(fb):
            raise ValueError("non-finite function value during root refinement")
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
    return b


def brent_root(f: Callable[[float], float], lo: float, hi: float,
               *, f_tol: float = 1e-12) -> float:
    """Refine a sign-change bracket [lo, hi] to a root with Brent's method."""
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError("not a sign-change bracket")
    return float(_brent(f, lo, hi, f_lo, f_hi, f_tol))


def find_first_root(
    f: Callable[[float], float],
    t_start: float,
    t_max: float,
    step_hint: float | None = None,
    *,
    f_tol: float = 1e-12,
    vectorized: bool = False,
    check_grazing: bool = True,
    allow_negative_start: bool = False,
) -> float:
    """Locate the first zero crossing of ``f`` after ``t_start``.

    Marches forward with step ``step_hint`` until a sign-change bracket is
    found, then refines it with Brent's method to |f| < ``f_tol`` and
    bracket width < 1e-12 * max(1, t).  The first crossing is guaranteed not
    to be skipped at resolution ``step_hint``; crossings finer than the hint
    are invisible by design (choose the hint from a minimum inter-event
    bound when one is available).

    Parameters
    ----------
    f : callable
        Continuous scalar function of time; f(t_start) must be >= 0 (a zero
        start is allowed when f moves positive immediately after).
    t_start, t_max : float
        Search window.
    step_hint : float, optional
        Marching step; defaults to (t_max - t_start) / 1e4.
    vectorized : bool
        When True, ``f`` accepts an ndarray of times (marching is batched).
    check_grazing : bool
        When True, warns if the slope magnitude at the root is below 1e-8
        (near-tangential crossing: the root is numerically fragile).
    allow_negative_start : bool
        Accept f(t_start) < 0 and search for the first down-crossing after
        f has lifted above zero.  This evaluates the analytic continuation
        of a crossing time at starts nudged past the zero set, which is what
        finite-difference probing of crossing maps needs.

    Raises
    ------
    NoCrossingError
        No sign change found before ``t_max``.
    """
    if t_max <= t_start:
        raise ValueError("t_max must exceed t_start")
    h = step_hint if step_hint is not None else (t_max - t_start) / 1e4
    if h <= 0:
        raise ValueError("step_hint must be positive")

    f0 = float(f(np.array([t_start]))[0]) if vectorized else float(f(t_start))
    if not np.isfinite(f0):
        raise ValueError("non-finite function value at t_start")
    if f0 < -f_tol and not allow_negative_start:
        raise ValueError("f(t_start) must be nonnegative")

    scalar_f = (lambda t: float(f(np.array([t]))[0])) if vectorized else f

    # When the start sits on zero, only a strictly negative sample counts as
    # a crossing until f has visibly lifted off ("armed"); otherwise a zero
    # start would be returned as its own root.  A below-zero start (when
    # allowed) must lift off before any crossing is armed at all.
    armed = f0 > f_tol
    immediate_ok = f0 >= -f_tol
    bracket = None
    t_prev, f_prev = t_start, f0
    block = 64 if vectorized else 1
    t = t_start
    while t < t_max and bracket is None:
        ts = t + h * np.arange(1, block + 1)
        ts = ts[ts <= t_max]
        if len(ts) == 0:
            break
        if vectorized:
            vals = np.asarray(f(ts), dtype=float)
        else:
            vals = np.array([float(f(tk)) for tk in ts])
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite function value during marching")
        for tk, fk in zip(ts, vals):
            if not armed:
                if fk > f_tol:
                    armed = True
                elif fk < -f_tol and immediate_ok:
                    bracket = RootBracket(t_prev, float(tk), f_prev, float(fk))
                    break
                t_prev, f_prev = float(tk), float(fk)
                continue
            if fk <= 0.0:
                bracket = RootBracket(t_prev, float(tk), f_prev, float(fk))
                break
            t_prev, f_prev = float(tk), float(fk)
        t = float(ts[-1])

    if bracket is None:
        raise NoCrossingError(f"no crossing of zero in ({t_start}, {t_max}]")

    if bracket.f_hi == 0.0 and bracket.f_lo > 0.0:
        root = bracket.hi
    else:
        root = _brent(scalar_f, bracket.lo, bracket.hi, bracket.f_lo,
                      bracket.f_hi, f_tol)

    if check_grazing:
        d = max(1e-9, 1e-7 * max(1.0, abs(root)))
        slope = (scalar_f(min(root + d, t_max)) - scalar_f(max(root - d, t_start))) / (2 * d)
        if abs(slope) < 1e-8:
            warnings.warn("near-tangential crossing at t=%g" % root, RuntimeWarning)
    return float(root)


def integrate_adaptive(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0: np.ndarray,
    t_span: tuple[float, float],
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    *,
    method: str = "DOP853",
    max_step: float = np.inf,
    dense_output: bool = True,
    events=None,
):
    """Adaptive embedded Runge-Kutta integration with dense output.

    Thin contract wrapper around scipy's solve_ivp (RK45/DOP853 pairs).
    Raises StiffnessError when the step controller gives up, which for the
    smooth relay approximation usually means the gain is too large for the
    requested tolerance.
    """
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    sol = solve_ivp(
        rhs,
        t_span,
        np.asarray(x0, dtype=float),
        method=method,
        rtol=rel_tol,
        atol=abs_tol,
        dense_output=dense_output,
        max_step=max_step,
        events=events,
    )
    if not sol.success and sol.status == -1:
        raise StiffnessError(
            "integration step underflow: " + sol.message
            + " (reduce the gain or loosen the tolerance)"
        )
    if not sol.success and sol.status != 1:
        raise StiffnessError("integration failed: " + sol.message)
    return sol
