"""Closed-form semiclassical predictions.

All functions take the model constants (anything with ``theta0`` and ``C1``
attributes) and the curvature data (anything with ``k_max`` and ``k2``).
Eigenvalue expansions are truncated after the ``h^{7/4}`` term; the neglected
remainder is ``O(h^{15/8})`` and every table row carries that order marker.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

from .errors import DegenerateGeometry, InputError, ThresholdViolation

ORDER = "h^7/4"
BPT_THRESHOLD = 10.0
BPT_REMAINDER = 1.0


def _check(cp):
    k2 = getattr(cp, "k2", math.nan)
    if not k2 > 0:
        raise DegenerateGeometry(
            f"k2 = {k2} is not positive: the non-degenerate curvature maximum hypothesis "
            "(k2 = -kappa''(s0) != 0) fails")


@dataclass(frozen=True)
class ExpansionCoefficients:
    c_h: float
    c_32: float
    c_74_unit: float
    var_74: float
    order: str = ORDER

    def c_74(self, n: int) -> float:
        """Coefficient of ``h^{7/4}`` for the ``n``-th eigenvalue."""
        if n < 1:
            raise InputError("level n must be >= 1")
        return self.c_74_unit * (2 * n - 1)


def coefficients(mc, cp) -> ExpansionCoefficients:
    _check(cp)
    base = mc.C1 * mc.theta0 ** 0.25 * math.sqrt(1.5 * cp.k2)
    return ExpansionCoefficients(
        c_h=mc.theta0,
        c_32=-mc.C1 * cp.k_max,
        c_74_unit=base,
        var_74=math.sqrt(cp.k2 * mc.C1 / 2),
    )


def eigenvalue_expansion(n: int, h: float, mc, cp) -> float:
    """``Theta0 h - k_max C1 h^{3/2} + C1 Theta0^{1/4} sqrt(3 k2 / 2) (2n-1) h^{7/4}``."""
    if not h > 0:
        raise InputError("h must be positive")
    c = coefficients(mc, cp)
    return c.c_h * h + c.c_32 * h ** 1.5 + c.c_74(n) * h ** 1.75


def gap_expansion(h: float, mc, cp) -> float:
    """Leading spectral gap ``C1 Theta0^{1/4} sqrt(6 k2) h^{7/4}``."""
    _check(cp)
    if not h > 0:
        raise InputError("h must be positive")
    return mc.C1 * mc.theta0 ** 0.25 * math.sqrt(6 * cp.k2) * h ** 1.75


def variational_bound(h: float, mc, cp):
    """Upper bound from the Gaussian trial state and its optimal width.

    Returns
    -------
    bound : float
        ``Theta0 h - k_max C1 h^{3/2} + sqrt(k2 C1 / 2) h^{7/4}``.
    alpha_opt : float
        ``sqrt(k2 C1 / 8)``, the Gaussian parameter minimising the
        ``h^{7/4}`` coefficient ``(2 alpha + k2 C1 / (4 alpha)) / 2``.
    """
    c = coefficients(mc, cp)
    if not h > 0:
        raise InputError("h must be positive")
    bound = c.c_h * h + c.c_32 * h ** 1.5 + c.var_74 * h ** 1.75
    return bound, math.sqrt(cp.k2 * mc.C1 / 8)


def gaussian_coefficient(alpha: float, mc, cp) -> float:
    """``h^{7/4}`` coefficient of the trial energy for Gaussian width ``alpha``."""
    return 0.5 * (2 * alpha + cp.k2 * mc.C1 / (4 * alpha))


@dataclass(frozen=True)
class HarmonicLevels:
    """Spectrum of ``A D^2 + B sigma^2``: ``e_l = sqrt(A B) (2l + 1)``."""

    A: float
    B: float
    levels: tuple

    @property
    def omega(self) -> float:
        return math.sqrt(self.A * self.B)


def harmonic_levels(count: int, mc=None, cp=None, *, A=None, B=None) -> HarmonicLevels:
    """Levels of the effective oscillator ``3 C1 sqrt(Theta0) D^2 + C1 k2 sigma^2 / 2``.

    ``A`` and ``B`` may be passed directly instead of ``mc`` and ``cp``.
    """
    if A is None or B is None:
        _check(cp)
        A = 3 * mc.C1 * math.sqrt(mc.theta0)
        B = mc.C1 * cp.k2 / 2
    if not (A > 0 and B > 0):
        raise DegenerateGeometry("oscillator coefficients must be positive")
    w = math.sqrt(A * B)
    return HarmonicLevels(A, B, tuple(w * (2 * l + 1) for l in range(count)))


def disc_lower_bound(h: float, b: float, R: float, mc, C_threshold: float = BPT_THRESHOLD,
                     C_rem: float = BPT_REMAINDER) -> float:
    """Lower bound shape for the disc: ``Theta0 b h - C1 b^{1/2} h^{3/2} / R - C_rem h^2 / R^2``.

    The threshold and remainder constants are not quantified by the theory;
    they are configuration parameters.
    """
    if not (h > 0 and b > 0 and R > 0):
        raise InputError("h, b and R must be positive")
    if b * R * R / h < C_threshold:
        raise ThresholdViolation(f"b R^2 / h = {b * R * R / h:.3g} is below the threshold {C_threshold:g}")
    return mc.theta0 * b * h - mc.C1 * math.sqrt(b) * h ** 1.5 / R - C_rem * h * h / (R * R)


def expansion_table(levels, hs, mc, cp):
    """Rows ``(h, n, value, order)`` for every level and h."""
    return [(float(h), int(n), eigenvalue_expansion(n, h, mc, cp), ORDER)
            for h in hs for n in levels]


def write_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "n", "value", "order_marker"])
        for h, n, v, o in rows:
            w.writerow([repr(h), n, repr(v), o])


def write_table_json(rows, coeffs: ExpansionCoefficients, path):
    doc = {
        "coefficients": asdict(coeffs),
        "rows": [{"h": h, "n": n, "value": v, "order_marker": o} for h, n, v, o in rows],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")

