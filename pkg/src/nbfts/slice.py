"""Univariate slice sampling with stepping out and shrinkage."""
from __future__ import annotations

import math

from .errors import InvalidStateError

MAX_STEPS = 50


def slice_step(logf, x0, width, rng, lower=-math.inf, upper=math.inf, max_steps=MAX_STEPS, logf0=None):
    """One slice-sampling transition for the unnormalised log density ``logf``.

    The bracket is stepped out by ``width`` at most ``max_steps`` times on each
    side and clipped to ``(lower, upper)``; proposals are then drawn uniformly
    and the bracket shrinks towards ``x0`` on rejection.
    """
    if logf0 is None:
        logf0 = logf(x0)
    if not math.isfinite(logf0):
        raise InvalidStateError(f"log density is not finite at the current point {x0!r}")
    log_y = logf0 + math.log(rng.random())

    left = x0 - width * rng.random()
    right = left + width
    j = int(math.floor(max_steps * rng.random()))
    k = max_steps - 1 - j
    while j > 0 and left > lower and logf(left) > log_y:
        left -= width
        j -= 1
    while k > 0 and right < upper and logf(right) > log_y:
        right += width
        k -= 1
    left = max(left, lower)
    right = min(right, upper)

    while True:
        x1 = left + (right - left) * rng.random()
        if lower < x1 < upper:
            lp = logf(x1)
            if lp > log_y:
                return x1
        if x1 < x0:
            left = x1
        elif x1 > x0:
            right = x1
        else:
            return x0
        if right - left <= 1e-14 * max(1.0, abs(x0)):
            return x0


def slice_sample(logdensity, x0, width, rng):
    """Slice transition for a density on (0, inf), run on the log scale.

    ``logdensity`` is the log density of x itself; the log-Jacobian of the
    transformation is added internally.
    """
    if not x0 > 0:
        raise InvalidStateError("slice_sample needs a positive starting point")

    def logf(u):
        x = math.exp(u)
        if x <= 0.0 or not math.isfinite(x):
            return -math.inf
        return logdensity(x) + u

    u = slice_step(logf, math.log(x0), width, rng)
    return math.exp(u)


def slice_sample_bounded(logdensity, x0, lower, upper, width, rng):
    """Slice transition restricted to the open interval (lower, upper)."""
    if not lower < x0 < upper:
        raise InvalidStateError(f"starting point {x0!r} lies outside ({lower}, {upper})")
    return slice_step(logdensity, x0, width, rng, lower=lower, upper=upper)
