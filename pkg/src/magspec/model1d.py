"""Half-line de Gennes model operator and its universal constants.

The family ``H(xi) = D_x^2 + (x + xi)^2`` on ``x > 0`` with a Neumann condition
at ``x = 0`` is discretised by second-order finite differences on a uniform
grid over ``[0, L]`` with a homogeneous Dirichlet condition at ``x = L``.

The ghost-node Neumann stencil is equivalent to giving the boundary node half
weight in the discrete inner product, so the discrete problem is the symmetric
generalised pencil ``K u = mu W u`` with ``K`` tridiagonal and ``W`` diagonal
(trapezoid weights). Everything downstream (moments, resolvent, identities)
uses that same inner product, which keeps the identity residuals at the level
of the O(spacing^2) discretisation error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import (
    BracketingFailure,
    GridTooCoarse,
    IdentityViolation,
    InputError,
    NonConvergence,
    SingularSystem,
)

TOL_ID = 1e-6
TOL_FD = 1e-4
FD_STEP = 0.02


@dataclass(frozen=True)
class HalfLineGrid:
    """Uniform grid on ``[0, L]``; the node at ``L`` carries the Dirichlet value."""

    L: float = 12.0
    n: int = 8192

    def __post_init__(self):
        if not (self.L >= 8.0):
            raise InputError(f"truncation length L={self.L} must be >= 8")
        if int(self.n) != self.n or self.n < 256:
            raise InputError(f"node count n={self.n} must be an integer >= 256")

    @property
    def spacing(self) -> float:
        return self.L / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights (including the spacing) on all ``n`` nodes."""
        w = np.full(self.n, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f))


@dataclass(frozen=True)
class ModelEigenpair:
    xi: float
    mu: float
    u: np.ndarray = field(repr=False)
    u_at_0: float
    grid: HalfLineGrid
    mu_next: float = math.nan


def _pencil(xi, grid):
    """Tridiagonal stiffness ``(d, e)`` and mass diagonal on the free nodes."""
    dx = grid.spacing
    x = grid.x[:-1]
    w = np.full(x.size, dx)
    w[0] *= 0.5
    d = np.full(x.size, 2.0 / dx)
    d[0] = 1.0 / dx
    d += w * (x + xi) ** 2
    e = np.full(x.size - 1, -1.0 / dx)
    return d, e, w


def _rayleigh(u, xi, grid):
    """Rayleigh quotient in difference form (no cancellation against ``2/dx^2``)."""
    dx = grid.spacing
    x = grid.x
    kin = np.sum(np.diff(u) ** 2) / dx
    w = grid.weights
    pot = np.dot(w, (x + xi) ** 2 * u * u)
    return (kin + pot) / np.dot(w, u * u)


def _solve(xi, grid, count=2):
    d, e, w = _pencil(xi, grid)
    r = 1.0 / np.sqrt(w)
    try:
        vals, vecs = eigh_tridiagonal(d * r * r, e * r[:-1] * r[1:], select="i",
                                      select_range=(0, count - 1))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"tridiagonal eigensolve failed at xi={xi}: {exc}") from exc
    u = np.zeros(grid.n)
    u[:-1] = vecs[:, 0] * r
    u /= math.sqrt(grid.integrate(u * u))
    if u[0] < 0:
        u = -u
    return _rayleigh(u, xi, grid), u, vals


def solve_model(xi: float, grid: HalfLineGrid | None = None, tol: float | None = None) -> ModelEigenpair:
    """Lowest eigenpair of the discrete half-line model at offset ``xi``.

    Parameters
    ----------
    xi : float
        Offset of the harmonic well.
    grid : HalfLineGrid, optional
        Defaults to ``L = 12``, ``n = 8192``.
    tol : float, optional
        If given, the eigenvalue is also computed on a companion grid of
        twice (or, for very small grids, half) the spacing and the Richardson
        estimate of the discretisation error must
        not exceed ``tol``.

    Returns
    -------
    ModelEigenpair
        Eigenvalue (Rayleigh-quotient refined), the positive eigenfunction on
        all grid nodes normalised in the trapezoid inner product, and the
        second eigenvalue of the same discretisation.
    """
    grid = grid or HalfLineGrid()
    if not np.isfinite(xi):
        raise InputError("xi must be finite")
    mu, u, vals = _solve(float(xi), grid)
    if not np.all(u[:-1] > 0):
        raise NonConvergence(f"ground state at xi={xi} is not positive on the grid")
    if tol is not None:
        # companion grid at twice the spacing, or half the spacing when the
        # coarser grid would fall below the minimum node count
        n_c = (grid.n + 1) // 2 if grid.n >= 512 else 2 * grid.n - 1
        other = HalfLineGrid(grid.L, n_c)
        mu_c = _solve(float(xi), other, count=1)[0]
        ratio = (other.spacing / grid.spacing) ** 2
        est = abs(mu - mu_c) / abs(ratio - 1.0)
        if est > tol:
            raise GridTooCoarse(f"estimated discretisation error {est:.2e} exceeds {tol:.1e}")
    return ModelEigenpair(float(xi), float(mu), u, float(u[0]), grid, float(vals[1]))


def mu_derivative(pair: ModelEigenpair) -> float:
    """Derivative ``mu'(xi) = (mu - xi^2) u(0)^2`` from a single eigenpair."""
    return (pair.mu - pair.xi ** 2) * pair.u_at_0 ** 2


@dataclass(frozen=True)
class ModelConstants:
    """Universal constants of the half-line model at its minimum ``xi0``.

    ``I2``, ``mu2_at_xi0`` and ``E2_at_0`` are NaN on the partial object
    returned by :func:`find_xi0`; :func:`model_constants` fills them in.
    """

    theta0: float
    xi0: float
    u0: np.ndarray = field(repr=False)
    C1: float
    moments: tuple
    grid: HalfLineGrid
    I2: float = math.nan
    mu2_at_xi0: float = math.nan
    E2_at_0: float = math.nan
    second_eigenvalue: float = math.nan

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def u0_at_0(self) -> float:
        return float(self.u0[0])

    @cached_property
    def _u0_spline(self):
        return CubicSpline(self.grid.x, self.u0)

    def u0_interp(self, tau):
        """Cubic interpolant of ``u0`` (zero beyond ``L``)."""
        tau = np.asarray(tau, dtype=float)
        out = self._u0_spline(np.clip(tau, 0.0, self.grid.L))
        return np.where(tau > self.grid.L, 0.0, out)


def _scan_bracket(grid, lo=-3.0, hi=0.0, step=0.1):
    xs = np.round(np.arange(lo, hi + step / 2, step), 12)
    g = [_solve(x, grid, 1)[0] - x * x for x in xs]
    for a, b, ga, gb in zip(xs[:-1], xs[1:], g[:-1], g[1:]):
        if ga < 0 <= gb:
            return float(a), float(b)
    raise BracketingFailure("no sign change of mu(xi) - xi^2 on [-3, 0]")


def find_xi0(grid: HalfLineGrid | None = None, tol: float = 1e-13) -> ModelConstants:
    """Locate ``xi0`` as the root of ``mu(xi) = xi^2`` and evaluate the moments.

    The returned constants are partial: the resolvent integral and second
    derivatives are left as NaN.
    """
    grid = grid or HalfLineGrid()
    if not tol > 0:
        raise InputError("tol must be positive")
    a, b = _scan_bracket(grid)
    xi0 = brentq(lambda x: _solve(x, grid, 1)[0] - x * x, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
    theta0, u0, vals = _solve(xi0, grid)
    x = grid.x
    moments = tuple(grid.integrate((x + xi0) ** k * u0 * u0) for k in range(4))
    return ModelConstants(
        theta0=float(theta0), xi0=float(xi0), u0=u0, C1=float(u0[0] ** 2 / 3.0),
        moments=moments, grid=grid, second_eigenvalue=float(vals[1]),
    )


def _bordered_matrix(constants):
    grid = constants.grid
    d, e, w = _pencil(constants.xi0, grid)
    d = d - constants.theta0 * w
    n = d.size
    P = sp.diags([e, d, e], [-1, 0, 1], format="csc")
    wu = (w * constants.u0[:-1]).reshape(-1, 1)
    return sp.bmat([[P, sp.csc_matrix(wu)], [sp.csc_matrix(wu.T), None]], format="csc"), w, n


def resolvent_apply(constants: ModelConstants, f) -> np.ndarray:
    """Regularised inverse of ``P0 = H(xi0) - Theta0`` on the complement of ``u0``.

    Solves the bordered system ``[[P0, W u0], [u0^T W, 0]] [g, lam] = [W f_perp, 0]``
    where ``f_perp = f - <u0, f> u0``. The returned ``g`` (on all grid nodes,
    zero at ``L``) satisfies ``P0 g = f_perp`` and ``<u0, g> = 0``.
    """
    grid = constants.grid
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise InputError(f"f must be sampled on the {grid.n} grid nodes")
    u0 = constants.u0
    fp = f - grid.integrate(u0 * f) * u0
    A, w, n = _bordered_matrix(constants)
    rhs = np.concatenate([w * fp[:-1], [0.0]])
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystem(f"bordered resolvent system is singular: {exc}") from exc
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("bordered resolvent solve produced non-finite values")
    resid = np.linalg.norm(A @ sol - rhs)
    if resid > 1e-8 * max(np.linalg.norm(rhs), 1e-300) + 1e-300:
        raise SingularSystem(f"bordered resolvent residual {resid:.2e} too large")
    g = np.zeros(grid.n)
    g[:-1] = sol[:n]
    return g


def compute_I2(constants: ModelConstants) -> float:
    """``I2 = <(x+xi0) u0, P0^{-1} (x+xi0) u0>``."""
    f = (constants.x + constants.xi0) * constants.u0
    return constants.grid.integrate(f * resolvent_apply(constants, f))


def mu_second_derivative(xi: float, grid: HalfLineGrid, step: float = FD_STEP) -> float:
    """Five-point finite-difference second derivative of ``mu(xi)``."""
    m = [_solve(xi + k * step, grid, 1)[0] for k in (-2, -1, 0, 1, 2)]
    return (-m[0] + 16 * m[1] - 30 * m[2] + 16 * m[3] - m[4]) / (12 * step * step)


@dataclass(frozen=True)
class IdentityReport:
    I11: float
    I12: float

    @property
    def total(self) -> float:
        return self.I11 + self.I12


def _iij(constants):
    x = constants.x
    tau_xi = x + constants.xi0
    u0 = constants.u0
    i11 = constants.grid.integrate((2 * x * tau_xi ** 2 - x * x * tau_xi) * u0 * u0)
    du = np.gradient(u0, constants.grid.spacing, edge_order=2)
    du[0] = 0.0  # Neumann
    i12 = constants.grid.integrate(u0 * du)
    return IdentityReport(float(i11), float(i12))


def identity_residuals(constants: ModelConstants) -> dict:
    """Signed residual of every identity satisfied by the model constants."""
    c = constants
    u00 = c.u0_at_0
    M = c.moments
    iij = _iij(c)
    out = {
        "theta0=xi0^2": c.theta0 - c.xi0 ** 2,
        "M0=1": M[0] - 1.0,
        "M1=0": M[1],
        "M2=theta0/2": M[2] - c.theta0 / 2,
        "M3=u0(0)^2/6": M[3] - u00 ** 2 / 6,
        "I11=C1/2": iij.I11 - c.C1 / 2,
        "I12=-3C1/2": iij.I12 + 1.5 * c.C1,
        "I11+I12=-C1": iij.total + c.C1,
    }
    if not math.isnan(c.I2):
        out["1-4I2=3C1sqrt(theta0)"] = (1 - 4 * c.I2) - 3 * c.C1 * math.sqrt(c.theta0)
    if not math.isnan(c.mu2_at_xi0):
        out["mu''(xi0)=-2xi0u0(0)^2"] = c.mu2_at_xi0 + 2 * c.xi0 * u00 ** 2
    return out


def check_Iij(constants: ModelConstants, tol: float = TOL_ID) -> IdentityReport:
    """Evaluate ``I11``, ``I12`` by quadrature and assert their closed forms."""
    rep = _iij(constants)
    res = identity_residuals(constants)
    for name in ("I11=C1/2", "I12=-3C1/2", "I11+I12=-C1"):
        if abs(res[name]) > tol:
            raise IdentityViolation(name, abs(res[name]), tol)
    return rep


def check_identities(constants: ModelConstants, tol_id: float = TOL_ID, tol_fd: float = TOL_FD) -> dict:
    """Assert every identity; returns the residual table on success."""
    res = identity_residuals(constants)
    for name, r in res.items():
        tol = tol_fd if name.startswith("mu''") else tol_id
        if not abs(r) <= tol:
            raise IdentityViolation(name, abs(r), tol)
    q = 3 * constants.C1 * math.sqrt(constants.theta0)
    if not 0 < q < 1:
        raise IdentityViolation("0<3C1sqrt(theta0)<1", q, 0.0)
    return res


def model_constants(grid: HalfLineGrid | None = None, tol: float = 1e-13) -> ModelConstants:
    """Full set of model constants on ``grid`` (identities not asserted)."""
    c = find_xi0(grid, tol)
    I2 = compute_I2(c)
    mu2 = mu_second_derivative(c.xi0, c.grid)
    return replace(c, I2=float(I2), mu2_at_xi0=float(mu2), E2_at_0=float(2 * (1 - 4 * I2)))


_REFERENCE: dict = {}


def reference_constants(L: float = 12.0, n: int = 8192) -> ModelConstants:
    """Memoised :func:`model_constants` for a given grid."""
    key = (float(L), int(n))
    if key not in _REFERENCE:
        _REFERENCE[key] = model_constants(HalfLineGrid(L, n))
    return _REFERENCE[key]


def decay_envelope(constants: ModelConstants, x_min: float = 8.0) -> float:
    """``max |u0(x)| exp(x^2/4)`` over grid nodes with ``x >= x_min``."""
    x = constants.x
    sel = x >= x_min
    return float(np.max(np.abs(constants.u0[sel]) * np.exp(x[sel] ** 2 / 4)))


def constants_to_dict(constants: ModelConstants) -> dict:
    res = identity_residuals(constants)
    return {
        "theta0": constants.theta0,
        "xi0": constants.xi0,
        "C1": constants.C1,
        "M": list(constants.moments),
        "I2": constants.I2,
        "mu2_at_xi0": constants.mu2_at_xi0,
        "E2_at_0": constants.E2_at_0,
        "second_eigenvalue": constants.second_eigenvalue,
        "grid": {"L": constants.grid.L, "n": constants.grid.n},
        "identities": [{"name": k, "residual": v} for k, v in res.items()],
    }


def write_constants_json(constants: ModelConstants, path) -> None:
    with open(path, "w") as fh:
        json.dump(constants_to_dict(constants), fh, indent=2)
        fh.write("\n")


def write_u0_csv(constants: ModelConstants, path) -> None:
    data = np.column_stack([constants.x, constants.u0])
    np.savetxt(path, data, delimiter=",", header="x,u0", comments="", fmt="%.17g")
