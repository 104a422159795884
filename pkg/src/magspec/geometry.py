"""Smooth closed boundary curves, curvature profiles and boundary coordinates.

Curves are sampled at ``samples`` equispaced parameter values and represented
by their trigonometric interpolant. For smooth periodic data this is
spectrally accurate, so arc length, tangent angle and curvature are obtained
from FFT derivatives and the arc-length map is the exact antiderivative of the
interpolated speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateMaximum,
    InputError,
    MultipleMaxima,
    NonSmooth,
    NotSimpleCurve,
    StripTooDeep,
)

K2_FLOOR = 1e-6
TIE_TOL = 1e-9
FIT_HALF_WIDTH = 4


class _TrigSeries:
    """Real trigonometric interpolant of equispaced periodic samples."""

    def __init__(self, values, rel_cut=1e-14):
        values = np.asarray(values, dtype=float)
        self.n = values.size
        c = np.fft.rfft(values) / self.n
        self.magnitudes = np.abs(c)
        if self.n % 2 == 0:
            c[-1] *= 0.5  # split Nyquist mode symmetrically
        keep = np.abs(c) > rel_cut * max(np.abs(c).max(), 1e-300)
        keep[0] = True
        self.k = np.nonzero(keep)[0]
        self.c = c[keep]

    def __call__(self, theta, deriv=0):
        theta = np.asarray(theta, dtype=float)
        ph = np.exp(1j * np.multiply.outer(theta, self.k))
        coef = self.c * (1j * self.k) ** deriv
        scale = np.where(self.k == 0, 1.0, 2.0)
        return np.real(ph @ (coef * scale))

    def tail(self):
        """Relative size of the highest 5% of resolved modes."""
        m = self.magnitudes
        return m[int(0.95 * m.size):].max() / max(m.max(), 1e-300)


def _spectral_derivative(values, order):
    n = values.size
    k = np.fft.rfftfreq(n, 1.0 / n)
    c = np.fft.rfft(values)
    if n % 2 == 0:
        c[-1] = 0.0
    return np.fft.irfft(c * (1j * k) ** order, n)


@dataclass(frozen=True)
class ParametricBoundary:
    """Closed smooth curve ``theta -> (x, y)`` on ``[0, 2 pi)``.

    Use :meth:`ellipse`, :meth:`circle` or :meth:`custom` to construct. A
    clockwise curve is reversed on construction so that the interior lies to
    the left of the tangent.
    """

    kind: str
    params: tuple
    samples: int = 4096
    point: Callable | None = field(default=None, repr=False, compare=False)
    reversed: bool = False

    @classmethod
    def ellipse(cls, a: float, b: float, samples: int = 4096):
        if not (a > 0 and b > 0):
            raise InputError("ellipse semi-axes must be positive")
        return cls._build("ellipse", (float(a), float(b)), samples, None)

    @classmethod
    def circle(cls, R: float, samples: int = 4096):
        if not R > 0:
            raise InputError("circle radius must be positive")
        return cls._build("circle", (float(R),), samples, None)

    @classmethod
    def custom(cls, point: Callable, samples: int = 4096, name: str = "custom"):
        """``point(theta)`` must accept an array and return ``(x, y)`` arrays."""
        return cls._build("custom", (name,), samples, point)

    @classmethod
    def _build(cls, kind, params, samples, point):
        if int(samples) != samples or samples < 64:
            raise InputError("samples must be an integer >= 64")
        b = cls(kind, params, int(samples), point)
        b._validate_closed()
        x, y = b._raw(b.thetas())
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area < 0:
            b = cls(kind, params, int(samples), point, reversed=True)
        b._validate_simple()
        return b

    def _raw(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "ellipse":
            a, b = self.params
            return a * np.cos(theta), b * np.sin(theta)
        if self.kind == "circle":
            (R,) = self.params
            return R * np.cos(theta), R * np.sin(theta)
        x, y = self.point(theta)
        return np.asarray(x, dtype=float) * np.ones_like(theta), np.asarray(y, dtype=float) * np.ones_like(theta)

    def points(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self._raw(-theta if self.reversed else theta)

    def thetas(self):
        return 2 * np.pi * np.arange(self.samples) / self.samples

    def _validate_closed(self):
        x0, y0 = self._raw(np.array([0.0]))
        x1, y1 = self._raw(np.array([2 * np.pi]))
        gap = math.hypot(x1[0] - x0[0], y1[0] - y0[0])
        if gap > 1e-12 * max(1.0, abs(x0[0]), abs(y0[0])):
            raise NotSimpleCurve(f"curve is not closed: endpoint gap {gap:.3e}")

    def _validate_simple(self):
        from shapely.geometry import LinearRing

        x, y = self.points(self.thetas())
        if not LinearRing(np.column_stack([x, y])).is_simple:
            raise NotSimpleCurve("curve self-intersects at sample resolution")


@dataclass(frozen=True)
class CurvatureProfile:
    """Arc-length data and curvature of a boundary.

    ``kappa`` is sampled on ``s_lattice = perimeter * j / samples``, with
    ``s = 0`` at ``theta = 0``. ``s0``, ``k_max``, ``k2`` are NaN until
    :func:`locate_max` succeeds; ``symmetry`` counts maxima related by a
    rotational symmetry of the curvature (1 for a unique maximum).
    """

    perimeter: float
    area: float
    arc_table: np.ndarray = field(repr=False)
    s_lattice: np.ndarray = field(repr=False)
    kappa: np.ndarray = field(repr=False)
    s0: float = math.nan
    k_max: float = math.nan
    k2: float = math.nan
    symmetry: int = 1
    boundary: ParametricBoundary | None = field(default=None, repr=False)
    _x: _TrigSeries | None = field(default=None, repr=False, compare=False)
    _y: _TrigSeries | None = field(default=None, repr=False, compare=False)
    _speed: _TrigSeries | None = field(default=None, repr=False, compare=False)

    def arclength(self, theta):
        """``s(theta)`` for arbitrary (unwrapped) ``theta``."""
        theta = np.asarray(theta, dtype=float)
        c0 = self._speed.c[0].real
        osc = self._speed_antiderivative(theta) - self._speed_antiderivative(np.zeros(1))[0]
        return c0 * theta + osc

    def _speed_antiderivative(self, theta):
        sp_ = self._speed
        k = sp_.k[1:]
        c = sp_.c[1:] / (1j * k)
        ph = np.exp(1j * np.multiply.outer(theta, k))
        return 2 * np.real(ph @ c)

    def theta_of_s(self, s, iters=30):
        """Invert the arc-length map by Newton iteration."""
        s = np.asarray(s, dtype=float)
        th = 2 * np.pi * s / self.perimeter
        for _ in range(iters):
            step = (self.arclength(th) - s) / self._speed(th)
            th = th - step
            if np.max(np.abs(step), initial=0.0) < 1e-13:
                break
        return th

    def kappa_at(self, s):
        """Curvature at arbitrary arc length (periodic)."""
        s = np.asarray(s, dtype=float)
        s = np.mod(s, self.perimeter)
        th = self.theta_of_s(s)
        return _curvature(self._x, self._y, th)

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.s_lattice, self.kappa]), delimiter=",",
                   header="s,kappa", comments="", fmt="%.17g")


def _curvature(X, Y, th):
    x1, y1 = X(th, 1), Y(th, 1)
    x2, y2 = X(th, 2), Y(th, 2)
    return (x1 * y2 - y1 * x2) / (x1 * x1 + y1 * y1) ** 1.5


def build_profile(b: ParametricBoundary) -> CurvatureProfile:
    """Arc length, area and curvature on a uniform arc-length lattice.

    The profile is returned without maximum data; see :func:`profile` for
    the combined call.
    """
    th = b.thetas()
    x, y = b.points(th)
    X, Y = _TrigSeries(x), _TrigSeries(y)
    for series in (X, Y):
        if series.tail() > 1e-10:
            raise NonSmooth("curve is not resolved by its samples (Fourier tail too large); "
                            "increase samples or check smoothness")
    x1 = _spectral_derivative(x, 1)
    y1 = _spectral_derivative(y, 1)
    speed = np.hypot(x1, y1)
    if speed.min() <= 1e-12 * speed.max():
        raise NotSimpleCurve("parametrisation has a stationary point")
    S = _TrigSeries(speed)
    if S.tail() > 1e-10:
        raise NonSmooth("arc-length integrand is not resolved by the samples")
    area = 0.5 * np.mean(x * y1 - y * x1) * 2 * np.pi
    perimeter = 2 * np.pi * S.c[0].real
    prof = CurvatureProfile(perimeter, float(area), np.empty((0, 2)), np.empty(0), np.empty(0),
                            boundary=b, _x=X, _y=Y, _speed=S)
    arc = prof.arclength(np.append(th, 2 * np.pi))
    if np.any(np.diff(arc) <= 0):
        raise NotSimpleCurve("arc-length table is not strictly monotone")
    s_lat = perimeter * np.arange(b.samples) / b.samples
    kap = prof.kappa_at(s_lat)
    object.__setattr__(prof, "arc_table", np.column_stack([np.append(th, 2 * np.pi), arc]))
    object.__setattr__(prof, "s_lattice", s_lat)
    object.__setattr__(prof, "kappa", kap)
    return prof


def _quadratic_fit(kappa, i, ds, half=FIT_HALF_WIDTH):
    n = kappa.size
    j = np.arange(-half, half + 1)
    d = j * ds
    c2, c1, c0 = np.polyfit(d, kappa[(i + j) % n], 2)
    return c0, c1, c2


def locate_max(p: CurvatureProfile, k2_floor: float = K2_FLOOR, tie_tol: float = TIE_TOL):
    """Global curvature maximum refined by a 9-point least-squares parabola.

    Returns
    -------
    (s0, k_max, k2, symmetry)
        ``symmetry`` is the number of maxima related by a rotational symmetry of
        ``kappa`` (for example 2 on an ellipse). Such maxima are equivalent for
        the spectral problem and the one with the smallest ``s`` is returned.

    Raises
    ------
    DegenerateMaximum
        If ``k2 <= k2_floor``.
    MultipleMaxima
        If a second, non-adjacent lattice maximum lies within ``tie_tol`` and is
        not an image of the first under a symmetry of ``kappa``.
    """
    kap = p.kappa
    n = kap.size
    ds = p.perimeter / n
    i = int(np.argmax(kap))
    c0, c1, c2 = _quadratic_fit(kap, i, ds)
    k2 = -2.0 * c2
    if not k2 > k2_floor:
        raise DegenerateMaximum(
            f"curvature maximum is degenerate (k2 = {k2:.3e} <= {k2_floor:g}); "
            "the non-degeneracy hypothesis k2 = -kappa''(s0) > 0 fails")
    top = kap[i]
    local = (kap >= np.roll(kap, 1)) & (kap >= np.roll(kap, -1)) & (kap >= top - tie_tol)
    cand = np.nonzero(local)[0]
    dist = np.minimum(np.abs(cand - i), n - np.abs(cand - i))
    cand = np.sort(cand[dist > 1])
    symmetry = 1
    if cand.size:
        q = cand.size + 1
        shift = n // q
        period_ok = n % q == 0 and np.max(np.abs(np.roll(kap, -shift) - kap)) <= 1e3 * tie_tol * max(1.0, abs(top))
        spacing_ok = np.all(np.isin((i + shift * np.arange(1, q)) % n, np.concatenate([cand, cand - 1, cand + 1]) % n))
        if not (period_ok and spacing_ok):
            raise MultipleMaxima(f"curvature attains its maximum at {q} separate lattice points")
        symmetry = q
        i = int(min(np.concatenate([[i], cand])))  # representative with smallest s
        c0, c1, c2 = _quadratic_fit(kap, i, ds)
        k2 = -2.0 * c2
    d = -c1 / (2 * c2)
    s0 = (p.s_lattice[i] + d) % p.perimeter
    if s0 > p.perimeter - 0.5 * ds:
        s0 -= p.perimeter
    k_max = c0 - c1 * c1 / (4 * c2)
    return float(s0), float(k_max), float(k2), symmetry


def profile(b: ParametricBoundary, k2_floor: float = K2_FLOOR, tie_tol: float = TIE_TOL) -> CurvatureProfile:
    """:func:`build_profile` followed by :func:`locate_max`."""
    from dataclasses import replace

    p = build_profile(b)
    s0, k_max, k2, q = locate_max(p, k2_floor, tie_tol)
    return replace(p, s0=s0, k_max=k_max, k2=k2, symmetry=q)


@dataclass(frozen=True)
class StripMetric:
    """Boundary-coordinate data of the tubular strip ``0 <= t < t0``.

    The tangential gauge is ``flux_offset + A1(s, t)`` with
    ``A1 = -t (1 - t kappa / 2)``; the normal component vanishes. The constant
    offset makes the circulation along ``t = 0`` equal to the enclosed area,
    which is what the full-domain operator sees on the periodic strip.
    """

    t0: float
    perimeter: float
    flux_offset: float
    kappa_fn: Callable = field(repr=False, compare=False)
    k_max: float
    s0: float = 0.0
    k2: float = math.nan
    symmetry: int = 1

    def kappa(self, s):
        return self.kappa_fn(np.asarray(s, dtype=float))

    def a(self, s, t):
        return 1.0 - np.asarray(t) * self.kappa(s)

    def A1(self, s, t):
        t = np.asarray(t, dtype=float)
        return -t * (1.0 - 0.5 * t * self.kappa(s))

    @classmethod
    def flat(cls, t0: float, perimeter: float, flux_offset: float = 0.0):
        """Synthetic zero-curvature strip (half-plane model on a periodic cell)."""
        if not (t0 > 0 and perimeter > 0):
            raise InputError("t0 and perimeter must be positive")
        return cls(float(t0), float(perimeter), float(flux_offset),
                   lambda s: np.zeros_like(np.asarray(s, dtype=float)), 0.0, 0.0, 0.0, 1)


def default_depth(k_max: float) -> float:
    """Default strip depth ``0.95 / k_max`` (so ``a >= 0.05`` on the strip)."""
    return 0.95 / k_max


def strip_metric(p: CurvatureProfile, t0: float | None = None) -> StripMetric:
    """Strip metric over a profile; raises :class:`StripTooDeep` unless ``t0 < 1/k_max``."""
    k_ref = p.k_max if not math.isnan(p.k_max) else float(np.max(p.kappa))
    if t0 is None:
        t0 = default_depth(k_ref)
    if not t0 > 0:
        raise InputError("strip depth t0 must be positive")
    if k_ref > 0 and t0 * k_ref >= 1.0:
        raise StripTooDeep(f"t0 = {t0:g} >= 1/k_max = {1 / k_ref:g}: the metric weight a = 1 - t kappa degenerates")
    return StripMetric(float(t0), p.perimeter, p.area / p.perimeter, p.kappa_at, float(k_ref),
                       0.0 if math.isnan(p.s0) else p.s0, p.k2, p.symmetry)


def parse_curve(spec: str, samples: int = 4096) -> ParametricBoundary:
    """Parse ``'ellipse:a,b'`` or ``'circle:R'``."""
    try:
        kind, _, args = spec.partition(":")
        vals = [float(v) for v in args.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse curve spec {spec!r}") from exc
    kind = kind.strip().lower()
    if kind == "ellipse" and len(vals) == 2:
        return ParametricBoundary.ellipse(*vals, samples=samples)
    if kind == "circle" and len(vals) == 1:
        return ParametricBoundary.circle(vals[0], samples=samples)
    raise InputError(f"curve spec {spec!r} must be 'ellipse:a,b' or 'circle:R'")
