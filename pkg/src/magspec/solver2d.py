"""Direct eigensolvers for the magnetic Neumann operator.

Two independent solvers:

* the boundary strip ``{(s, t): s periodic, 0 <= t < t0}`` in boundary
  coordinates, Neumann at ``t = 0`` and Dirichlet at ``t = t0``, for any
  smooth domain; and
* the disc, reduced by rotation invariance to one radial problem per angular
  momentum ``m``.

Strip discretisation
--------------------
The quadratic form on the strip is

    q(v) = int int  a^{-1} |(h D_s - A1) v|^2 + a |h D_t v|^2  ds dt,
    ||v||^2 = int int a |v|^2 ds dt,

with ``a = 1 - t kappa(s)`` and ``A1 = F - t (1 - t kappa / 2)``. Nodes sit at
``s_j`` (uniform, periodic) and ``t_i = i dt``. Tangential differences are
gauge covariant: the link ``j -> j+1`` carries the phase
``exp(-i/h int A1 ds)`` (integrated by Simpson's rule), so that
``(h D_s - A1) v`` becomes ``(h / i ds) (U v_{j+1} - v_j)``. Normal links use
``a`` at ``t`` midpoints; the node ``t = 0`` has half weight, which imposes the
natural (Neumann) condition. The stiffness ``K`` is Hermitian and the mass ``M``
diagonal, and the solver works with ``S = M^{-1/2} K M^{-1/2}``.

The covariant form has no odd/even decoupling (centred node differences of a
first-order term would give a doubled, spurious spectrum at this resolution)
and is exactly invariant under the large gauge transformation
``F -> F + 2 pi h / period``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .errors import (
    FactorizationFailure,
    InputError,
    MetricDegenerate,
    NonConvergence,
    ResolutionTooCoarse,
    StripTooDeep,
    WindowTooNarrow,
)
from .geometry import StripMetric

THETA0 = 0.5901061  # rounded; only used to place shifts
EIG_TOL = 1e-12


@dataclass(frozen=True)
class GridPolicy:
    """Strip grid in units of the normal length scale ``sqrt(h)``.

    ``ds = ds_scale sqrt(h)``, ``dt = dtau sqrt(h)``. With ``richardson`` the
    eigenvalues are extrapolated from this grid and the one with twice the
    spacing in both directions.
    """

    ds_scale: float = 0.1
    dtau: float = 0.04
    richardson: bool = True

    def __post_init__(self):
        if not (self.ds_scale > 0 and self.dtau > 0):
            raise InputError("grid scales must be positive")


@dataclass(frozen=True)
class StripProblem:
    """One discretised strip problem.

    ``fold`` > 1 restricts to the sector of functions invariant under the
    rotation by ``perimeter / fold``; the strip then has period
    ``perimeter / fold``. This is used when the curvature has ``fold``
    equivalent maxima (ellipse: 2), so that the low spectrum is that of a
    single well.
    """

    h: float
    metric: StripMetric
    ns: int
    nt: int
    fold: int = 1

    @property
    def period(self) -> float:
        return self.metric.perimeter / self.fold

    @property
    def ds(self) -> float:
        return self.period / self.ns

    @property
    def dt(self) -> float:
        return self.metric.t0 / self.nt

    @property
    def s(self) -> np.ndarray:
        return self.metric.s0 - 0.5 * self.period + self.ds * np.arange(self.ns)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    @property
    def size(self) -> int:
        return self.ns * self.nt

    @classmethod
    def from_policy(cls, h: float, metric: StripMetric, policy: GridPolicy | None = None,
                    fold: int | None = None):
        policy = policy or GridPolicy()
        if not h > 0:
            raise InputError("h must be positive")
        fold = metric.symmetry if fold is None else int(fold)
        period = metric.perimeter / fold
        r = math.sqrt(h)
        ns = 2 * max(8, math.ceil(period / (policy.ds_scale * r) / 2))
        nt = max(64, math.ceil(metric.t0 / (policy.dtau * r)))
        nt += nt % 2
        return cls(float(h), metric, ns, nt, fold)

    def coarsened(self):
        """Same problem with twice the spacing in both directions."""
        return replace(self, ns=self.ns // 2, nt=self.nt // 2)

    def validate(self):
        if self.ns % 2:
            raise InputError("ns must be even")
        if self.nt < 64:
            raise ResolutionTooCoarse(f"nt = {self.nt} < 64")
        r = math.sqrt(self.h)
        if self.dt > r / 12:
            raise ResolutionTooCoarse(f"dt = {self.dt:.3g} exceeds sqrt(h)/12 = {r / 12:.3g}")
        if self.ds > self.h ** 0.125 / 12:
            raise ResolutionTooCoarse(f"ds = {self.ds:.3g} exceeds h^(1/8)/12 = {self.h ** 0.125 / 12:.3g}")


@dataclass
class StripOperator:
    S: sp.csc_matrix
    mass: np.ndarray
    problem: StripProblem

    def to_physical(self, y):
        """Map eigenvectors of ``S`` to nodal values ``v = M^{-1/2} y``."""
        return y / np.sqrt(self.mass)[:, None] if y.ndim == 2 else y / np.sqrt(self.mass)

    def dump(self, path):
        """Write ``S`` as ``row col re im`` triplets (0-based), header gives the shape."""
        C = self.S.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
            np.savetxt(fh, np.column_stack([C.row, C.col, C.data.real, C.data.imag]),
                       fmt=["%d", "%d", "%.17g", "%.17g"])


def assemble_strip(p: StripProblem, check: bool = True) -> StripOperator:
    """Assemble ``S = M^{-1/2} K M^{-1/2}`` (complex Hermitian, CSC).

    Unknowns are ordered ``index = i_t * ns + j_s``.
    """
    if check:
        p.validate()
    m = p.metric
    h, ns, nt, ds, dt = p.h, p.ns, p.nt, p.ds, p.dt
    s, t = p.s, p.t
    kn = m.kappa(s)
    kh = m.kappa(s + 0.5 * ds)
    if float(np.max(kn, initial=0.0)) * m.t0 >= 1.0 or float(np.max(kh, initial=0.0)) * m.t0 >= 1.0:
        raise MetricDegenerate("a = 1 - t kappa vanishes inside the strip")
    kint = (kn + 4 * kh + np.roll(kn, -1)) / 6 * ds  # int kappa over each link
    w = np.ones(nt)
    w[0] = 0.5
    T = t[:, None]
    idx = np.arange(nt * ns).reshape(nt, ns)

    # tangential links j -> j+1 (periodic)
    phase = ((m.flux_offset - T) * ds + 0.5 * T * T * kint[None, :]) / h
    U = np.exp(-1j * phase)
    a_link = 1.0 - T * kh[None, :]
    c = (w[:, None] * dt) * h * h / (ds * a_link)
    i1 = idx.ravel()
    i2 = np.roll(idx, -1, axis=1).ravel()
    rows = [i1, i2, i1, i2]
    cols = [i1, i2, i2, i1]
    vals = [c.ravel(), c.ravel(), (-c * U).ravel(), (-c * np.conj(U)).ravel()]

    # normal links i -> i+1; the last one ends on the Dirichlet node
    tm = t + 0.5 * dt
    cn = ds * (1.0 - tm[:, None] * kn[None, :]) * h * h / dt
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(cn.ravel())
    lo, hi, cc = idx[:-1].ravel(), idx[1:].ravel(), cn[:-1].ravel()
    rows += [hi, lo, hi]
    cols += [hi, hi, lo]
    vals += [cc, -cc, -cc]

    n = nt * ns
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    mass = (w[:, None] * dt * ds * (1.0 - T * kn[None, :])).ravel()
    d = sp.diags(1.0 / np.sqrt(mass))
    S = (d @ K @ d).tocsc()
    S = (0.5 * (S + S.conj().T)).tocsc()  # exact Hermitian symmetry
    return StripOperator(S, mass, p)


@dataclass
class SpectralResult:
    h: float
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    labels: tuple | None = None
    meta: dict = field(default_factory=dict)
    vectors: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "h": self.h,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in self.residual_norms],
            "diagnostics": self.diagnostics,
            "meta": self.meta,
        }
        if self.labels is not None:
            out["m"] = [int(v) for v in self.labels]
        return out


def _shift_chain(p: StripProblem, theta0: float):
    base = theta0 * p.h
    first = base * (1.0 - p.metric.k_max * math.sqrt(p.h))
    return [first, 0.9 * base, 0.5 * first]


def _shift_invert(S, k, sigma, tol, ncv):
    n = S.shape[0]
    try:
        lu = spla.splu((S - sigma * sp.identity(n, dtype=S.dtype, format="csc")).tocsc())
    except RuntimeError as exc:
        raise FactorizationFailure(f"sparse LU failed at shift {sigma:.6g}: {exc}") from exc
    op = spla.LinearOperator(S.shape, matvec=lu.solve, dtype=S.dtype)
    rng = np.random.default_rng(12345)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    try:
        vals, vecs = spla.eigs(S, k=k, sigma=sigma, OPinv=op, which="LM", tol=tol, v0=v0,
                               ncv=min(n - 1, max(2 * k + 1, ncv)), maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise NonConvergence(f"ARPACK did not converge at shift {sigma:.6g}",
                             {"converged": len(exc.eigenvalues), "shift": sigma}) from exc
    order = np.argsort(vals.real)
    return vals[order], vecs[:, order]


def _solve_grid(p, k, theta0, tol, shift, ncv, check=True):
    op = assemble_strip(p, check=check)
    shifts = [shift] if shift is not None else _shift_chain(p, theta0)
    last = None
    for sigma in shifts:
        try:
            vals, vecs = _shift_invert(op.S, k, sigma, tol, ncv)
        except (FactorizationFailure, NonConvergence) as exc:
            last = exc
            continue
        if shift is None and vals.real.min() < sigma:
            # shift landed inside the spectrum; lower eigenvalues may be missing
            last = NonConvergence(f"shift {sigma:.6g} lies above an eigenvalue", {"shift": sigma})
            continue
        return op, vals, vecs, sigma
    raise last


def _diagnostics(p, y):
    s, t = p.s, p.t
    dens = np.abs(y) ** 2
    dens = dens / dens.sum(axis=0)
    dens = dens.reshape(p.nt, p.ns, -1)
    pt = dens.sum(axis=1)
    ps = dens.sum(axis=0)
    r = math.sqrt(p.h)
    ds_ = s - p.metric.s0
    return {
        "t_mass_tail": [float(v) for v in pt[t > 0.5 * p.metric.t0].sum(axis=0)],
        "s_spread": [float(v) for v in np.sqrt((ps * ds_[:, None] ** 2).sum(axis=0))],
        "mass_t_lt_6sqrth": [float(v) for v in pt[t < 6 * r].sum(axis=0)],
        "mass_s_near_s0": [float(v) for v in ps[np.abs(ds_) < 10 * p.h ** 0.125].sum(axis=0)],
    }


def lowest_eigs(p: StripProblem, k: int = 2, *, richardson: bool = True, theta0: float = THETA0,
                tol: float = EIG_TOL, shift: float | None = None, ncv: int = 20,
                keep_vectors: bool = False) -> SpectralResult:
    """Lowest ``k`` eigenvalues of the strip operator by shift-invert Arnoldi.

    The shift defaults to ``theta0 h (1 - k_max sqrt(h))`` with fallbacks
    ``0.9 theta0 h`` and half the first shift. With ``richardson`` the
    problem is also solved with twice the spacing in both directions and the
    reported eigenvalues are ``(4 mu_fine - mu_coarse) / 3``; residuals and
    diagnostics refer to the fine grid.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    op, vals, vecs, sigma = _solve_grid(p, k, theta0, tol, shift, ncv)
    mu = vals.real
    res = np.linalg.norm(op.S @ vecs - vecs * vals[None, :], axis=0) / np.linalg.norm(vecs, axis=0)
    meta = {
        "arithmetic": "complex Hermitian",
        "ns": p.ns, "nt": p.nt, "t0": p.metric.t0, "fold": p.fold, "shift": sigma,
        "max_imag": float(np.max(np.abs(vals.imag))),
        "richardson": bool(richardson),
    }
    if richardson:
        pc = p.coarsened()
        _, vals_c, _, _ = _solve_grid(pc, k, theta0, tol, shift, ncv, check=False)
        meta["fine"] = [float(v) for v in mu]
        meta["coarse"] = [float(v) for v in vals_c.real]
        mu = (4 * mu - vals_c.real) / 3
    return SpectralResult(p.h, mu, res, _diagnostics(p, vecs), None, meta,
                          op.to_physical(vecs) if keep_vectors else None)


def truncation_sensitivity(p: StripProblem, factor: float = 1.5, k: int = 1, **kw):
    """Eigenvalues before and after deepening the strip by ``factor`` at fixed ``dt``."""
    t0 = p.metric.t0 * factor
    if p.metric.k_max * t0 >= 1.0:
        raise StripTooDeep(f"deepened strip t0 = {t0:g} reaches 1/k_max")
    deep = replace(p, metric=replace(p.metric, t0=t0), nt=int(round(p.nt * factor)))
    deep = replace(deep, nt=deep.nt + deep.nt % 2)
    deep = replace(deep, metric=replace(deep.metric, t0=p.dt * deep.nt))
    return lowest_eigs(p, k, **kw).eigenvalues, lowest_eigs(deep, k, **kw).eigenvalues


def gauge_sensitivity(p: StripProblem, quanta: int = 1, k: int = 2, **kw):
    """Eigenvalues before and after ``F -> F + quanta * 2 pi h / period``."""
    F = p.metric.flux_offset + quanta * 2 * math.pi * p.h / p.period
    q = replace(p, metric=replace(p.metric, flux_offset=F))
    return lowest_eigs(p, k, **kw).eigenvalues, lowest_eigs(q, k, **kw).eigenvalues


# --------------------------------------------------------------------------- disc


@dataclass(frozen=True)
class DiscProblem:
    """Disc of radius ``R`` in the field ``b``; angular window defaults to
    ``[flux/h (1 - margin), flux/h (1 + margin)]`` with ``flux = b R^2 / 2``."""

    h: float
    R: float = 1.0
    b: float = 1.0
    m_min: int | None = None
    m_max: int | None = None
    nr: int = 4000
    margin: float = 0.5

    def __post_init__(self):
        if not (self.h > 0 and self.R > 0 and self.b > 0):
            raise InputError("h, R and b must be positive")
        if self.nr < 64:
            raise InputError("nr must be >= 64")

    def window(self):
        flux = self.b * self.R ** 2 / 2
        lo = self.m_min if self.m_min is not None else math.floor(flux / self.h * (1 - self.margin))
        hi = self.m_max if self.m_max is not None else math.ceil(flux / self.h * (1 + self.margin))
        if hi < lo:
            raise InputError("empty angular window")
        return int(lo), int(hi)


def radial_eigs(h: float, m: int, R: float = 1.0, b: float = 1.0, nr: int = 4000, k: int = 1):
    """Lowest ``k`` eigenvalues of the ``m``-sector radial operator.

    Cell-centred finite volumes for ``-h^2 r^{-1} (r u')' + (h m / r - b r / 2)^2 u``
    in ``L^2(r dr)``; the Neumann condition at ``R`` is natural.
    """
    dr = R / nr
    r = (np.arange(nr) + 0.5) * dr
    rf = np.arange(1, nr) * dr
    mass = r * dr
    c = rf * h * h / dr
    d = mass * (h * m / r - 0.5 * b * r) ** 2
    d[:-1] += c
    d[1:] += c
    q = 1.0 / np.sqrt(mass)
    vals, vecs = eigh_tridiagonal(d * q * q, -c * q[:-1] * q[1:], select="i", select_range=(0, k - 1))
    T_v = d * q * q * vecs.T
    T_v[:, :-1] += (-c * q[:-1] * q[1:]) * vecs.T[:, 1:]
    T_v[:, 1:] += (-c * q[:-1] * q[1:]) * vecs.T[:, :-1]
    res = np.linalg.norm(T_v - vals[:, None] * vecs.T, axis=1)
    return vals, res


def disc_solve(p: DiscProblem, k: int = 2, workers: int = 1) -> SpectralResult:
    """Lowest ``k`` disc eigenvalues merged over the angular window, with ``m`` labels."""
    lo, hi = p.window()
    ms = list(range(lo, hi + 1))

    def one(m):
        return m, radial_eigs(p.h, m, p.R, p.b, p.nr, k)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, ms))
    else:
        out = [one(m) for m in ms]
    rows = sorted((float(v), m, float(r)) for m, (vals, res) in out for v, r in zip(vals, res))[:k]
    labels = tuple(m for _, m, _ in rows)
    if any(m in (lo, hi) for m in labels):
        raise WindowTooNarrow(f"minimising m touches the window edge [{lo}, {hi}]")
    return SpectralResult(
        p.h,
        np.array([v for v, _, _ in rows]),
        np.array([r for _, _, r in rows]),
        {"m_window": [lo, hi]},
        labels,
        {"method": "radial finite volume", "nr": p.nr, "R": p.R, "b": p.b},
    )


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
