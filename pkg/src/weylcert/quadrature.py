"""Adaptive 1D quadrature with error control.

Single numeric backbone for every norm, volume and weighted volume in the
package: adaptive Simpson with interval bisection and Richardson error
estimation, honoring caller-declared breakpoints (kinks) exactly and an
optional oscillation hint for phase-like integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, EvaluationError

__all__ = ["QuadratureResult", "integrate", "integrate_relative"]

_MAX_DEPTH = 60


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.abs_error_estimate < 0 or self.evaluations < 1:
            raise ValueError("invalid quadrature result")


def _vectorize(g):
    """Wrap g so it maps float arrays to float arrays.

    Array-native callables are used directly; scalar callables fall back to a
    per-point loop.
    """

    def gv(x: np.ndarray) -> np.ndarray:
        try:
            y = np.asarray(g(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError, IndexError):
            pass
        return np.array([float(g(float(xi))) for xi in x])

    return gv


def _check_finite(y: np.ndarray, x: np.ndarray):
    bad = ~np.isfinite(y)
    if bad.any():
        pt = float(x[bad][0])
        raise EvaluationError(f"integrand returned non-finite value at x={pt!r}", pt)


def integrate(
    g,
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    breakpoints=(),
    weight=None,
    period_hint: float | None = None,
    max_evals: int = 4_000_000,
) -> QuadratureResult:
    """Integrate g over [a, b] to absolute tolerance tol.

    breakpoints: interior kink locations where subdivision is forced, so
    piecewise-smooth integrands are handled panel-exactly.
    weight: an object with a volume_density(r) method (e.g. a ModelManifold);
    the integrand becomes g(r) * weight.volume_density(r).
    period_hint: for integrands oscillating like exp(i*w*r) pass w; the
    initial subdivision then uses at least 8 panels per period 2*pi/w.
    """
    if not (a <= b):
        raise ValueError(f"need a <= b, got [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return QuadratureResult(0.0, 0.0, 1)

    gv = _vectorize(g)
    if weight is not None:
        base = gv

        def gv(x, _base=base):  # noqa: E731 - rebinding keeps one eval path
            return _base(x) * weight.volume_density(x)

    cuts = sorted({float(a), float(b), *(float(c) for c in breakpoints if a < c < b)})
    edges = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = 1
        if period_hint is not None and period_hint > 0:
            period = 2.0 * np.pi / period_hint
            n = max(1, int(np.ceil((hi - lo) / (period / 8.0))))
        n = min(n, 100_000)
        edges.append(np.linspace(lo, hi, n + 1))

    lo = np.concatenate([e[:-1] for e in edges])
    hi = np.concatenate([e[1:] for e in edges])
    mid = 0.5 * (lo + hi)

    pts = np.concatenate([lo, hi, mid])
    vals = gv(pts)
    _check_finite(vals, pts)
    m = lo.size
    flo, fhi, fmid = vals[:m], vals[m : 2 * m], vals[2 * m :]
    evaluations = pts.size

    simpson = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    total_width = b - a
    value = 0.0
    err_total = 0.0
    depth = 0
    while lo.size:
        depth += 1
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        pts = np.concatenate([lm, rm])
        vals = gv(pts)
        _check_finite(vals, pts)
        evaluations += pts.size
        m = lo.size
        flm, frm = vals[:m], vals[m:]

        # use exact child widths: mid = 0.5*(lo+hi) rounds, and a half-ulp
        # width mismatch times a large integrand puts a hard floor under the
        # Richardson error estimate that no subdivision can get past
        s_left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        s_right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        s2 = s_left + s_right
        err = np.abs(s2 - simpson) / 15.0
        budget = tol * (hi - lo) / total_width
        # roundoff floor: once the Richardson estimate is at machine level
        # relative to the local integrand mass, refinement only chases noise
        eps = np.finfo(float).eps
        sabs = (mid - lo) / 6.0 * (np.abs(flo) + 4.0 * np.abs(flm) + np.abs(fmid)) + (
            hi - mid
        ) / 6.0 * (np.abs(fmid) + 4.0 * np.abs(frm) + np.abs(fhi))
        floor = 16.0 * eps * sabs

        tiny = (hi - lo) <= 64.0 * eps * np.maximum(np.abs(lo), np.abs(hi))
        done = (err <= np.maximum(budget, floor)) | tiny | (depth >= _MAX_DEPTH)
        # global stopping: if everything still pending already fits in the
        # overall tolerance, stop -- per-panel budgets can stall forever when
        # the integrand has evaluation noise (error and budget then shrink at
        # the same rate under subdivision)
        if err_total + float(np.sum(err)) <= tol:
            done = np.ones_like(done)
        value += float(np.sum(s2[done] + (s2[done] - simpson[done]) / 15.0))
        err_total += float(np.sum(err[done]))

        keep = ~done
        if evaluations > max_evals and keep.any():
            best = value + float(np.sum(s2[keep]))
            raise ConvergenceError(
                f"quadrature exceeded {max_evals} evaluations on [{a}, {b}]",
                best_estimate=best,
                error_estimate=err_total + float(np.sum(err[keep])),
            )
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        flo = np.concatenate([flo[keep], fmid[keep]])
        fhi = np.concatenate([fmid[keep], fhi[keep]])
        mid = np.concatenate([lm[keep], rm[keep]])
        fmid = np.concatenate([flm[keep], frm[keep]])
        simpson = np.concatenate([s_left[keep], s_right[keep]])

    return QuadratureResult(value, err_total, evaluations)


def integrate_relative(
    g,
    a: float,
    b: float,
    rel_tol: float = 1e-8,
    *,
    breakpoints=(),
    weight=None,
    period_hint: float | None = None,
    floor: float = 1e-300,
) -> QuadratureResult:
    """Integrate to a relative tolerance via a pilot scale estimate."""
    if a == b:
        return QuadratureResult(0.0, 0.0, 1)
    gv = _vectorize(g)
    xs = np.linspace(a, b, 65)
    ys = gv(xs)
    if weight is not None:
        ys = ys * weight.volume_density(xs)
    _check_finite(ys, xs)
    scale = float(np.mean(np.abs(ys))) * (b - a)
    tol = rel_tol * max(scale, floor)
    res = integrate(
        g, a, b, tol, breakpoints=breakpoints, weight=weight, period_hint=period_hint
    )
    # One refinement pass if the pilot badly underestimated the magnitude.
    if abs(res.value) > 10.0 * max(scale, floor):
        res2 = integrate(
            g,
            a,
            b,
            rel_tol * abs(res.value),
            breakpoints=breakpoints,
            weight=weight,
            period_hint=period_hint,
        )
        return QuadratureResult(
            res2.value, res2.abs_error_estimate, res.evaluations + res2.evaluations + 65
        )
    return QuadratureResult(res.value, res.abs_error_estimate, res.evaluations + 65)
