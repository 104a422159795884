import csv
import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from magspec import effective
from magspec.errors import DegenerateGeometry, InputError, ThresholdViolation
from magspec.geometry import ParametricBoundary, build_profile

UNIT = SimpleNamespace(theta0=1.0, C1=1.0)
CURV = SimpleNamespace(k_max=1.0, k2=1.0)


def test_unit_constant_plug_in():
    # with all constants equal to one the level-1 value is 1 - 1 + sqrt(3/2)
    assert effective.eigenvalue_expansion(1, 1.0, UNIT, CURV) == pytest.approx(math.sqrt(1.5), rel=1e-15)
    assert effective.eigenvalue_expansion(2, 1.0, UNIT, CURV) == pytest.approx(3 * math.sqrt(1.5), rel=1e-15)


def test_level_ratio_of_top_coefficient(mc, ellipse):
    c = effective.coefficients(mc, ellipse)
    for n in range(1, 6):
        assert c.c_74(n) / c.c_74(1) == pytest.approx(2 * n - 1, rel=1e-14)
    with pytest.raises(InputError):
        c.c_74(0)


def test_gap_identities(mc, ellipse):
    for h in (0.02, 0.005):
        d = effective.eigenvalue_expansion(2, h, mc, ellipse) - effective.eigenvalue_expansion(1, h, mc, ellipse)
        assert d == pytest.approx(effective.gap_expansion(h, mc, ellipse), rel=1e-12)
    levels = effective.harmonic_levels(2, mc, ellipse)
    h = 0.01
    assert levels.levels[1] - levels.levels[0] == pytest.approx(effective.gap_expansion(h, mc, ellipse) / h ** 1.75,
                                                                rel=1e-12)


def test_gaussian_width_and_bound(mc, ellipse):
    h = 0.01
    bound, alpha = effective.variational_bound(h, mc, ellipse)
    assert alpha == pytest.approx(math.sqrt(ellipse.k2 * mc.C1 / 8))
    # the optimum of the width functional is the bound coefficient
    coef = effective.gaussian_coefficient(alpha, mc, ellipse)
    assert coef == pytest.approx(math.sqrt(ellipse.k2 * mc.C1 / 2), rel=1e-14)
    for f in (0.7, 0.9, 1.1, 1.5):
        assert effective.gaussian_coefficient(f * alpha, mc, ellipse) > coef
    # the ratio of the two top coefficients is 1 / sqrt(3 C1 sqrt(theta0)) > 1
    assert bound >= effective.eigenvalue_expansion(1, h, mc, ellipse)


def test_gaussian_moment_ratio():
    # <sigma^2> for exp(-2 alpha sigma^2) is 1/(4 alpha); check by quadrature
    alpha = 0.8
    s = np.linspace(-12, 12, 200001)
    g = np.exp(-2 * alpha * s * s)
    assert np.sum(s * s * g) / np.sum(g) == pytest.approx(1 / (4 * alpha), rel=1e-10)


def _fd_oscillator(A, B, count, L=12.0, n=40001):
    x = np.linspace(-L, L, n)
    dx = x[1] - x[0]
    d = 2 * A / dx ** 2 + B * x[1:-1] ** 2
    e = np.full(n - 3, -A / dx ** 2)
    lo = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1), eigvals_only=True)
    # one Richardson step on the second-order scheme
    x2 = x[::2]
    dx2 = 2 * dx
    d2 = 2 * A / dx2 ** 2 + B * x2[1:-1] ** 2
    e2 = np.full(x2.size - 3, -A / dx2 ** 2)
    lo2 = eigh_tridiagonal(d2, e2, select="i", select_range=(0, count - 1), eigvals_only=True)
    return (4 * lo - lo2) / 3


def test_harmonic_levels_against_fd(mc, ellipse):
    lv = effective.harmonic_levels(4, mc, ellipse)
    fd = _fd_oscillator(lv.A, lv.B, 4, L=12 / (lv.B / lv.A) ** 0.25)
    assert np.max(np.abs(fd - np.array(lv.levels))) < 1e-6


def test_harmonic_levels_direct():
    lv = effective.harmonic_levels(3, A=2.0, B=8.0)
    assert lv.omega == 4.0
    assert lv.levels == (4.0, 12.0, 20.0)
    with pytest.raises(DegenerateGeometry):
        effective.harmonic_levels(2, A=0.0, B=1.0)


def test_disc_lower_bound(mc):
    v = effective.disc_lower_bound(0.01, 1.0, 1.0, mc)
    assert v == pytest.approx(mc.theta0 * 0.01 - mc.C1 * 1e-3 - 1e-4)
    with pytest.raises(ThresholdViolation):
        effective.disc_lower_bound(0.2, 1.0, 1.0, mc)
    assert effective.disc_lower_bound(0.2, 1.0, 1.0, mc, C_threshold=1.0) < mc.theta0 * 0.2
    with pytest.raises(InputError):
        effective.disc_lower_bound(-0.01, 1.0, 1.0, mc)


def test_disc_bound_scaling(mc):
    # without the remainder, bound / h depends on h and R only through h / R^2
    a = effective.disc_lower_bound(0.01, 1.0, 1.0, mc, C_rem=0.0)
    b = effective.disc_lower_bound(0.04, 1.0, 2.0, mc, C_rem=0.0)
    assert b / 0.04 - a / 0.01 == pytest.approx(0.0, abs=1e-15)


def test_expansion_monotone_in_h_and_level(mc, ellipse):
    hs = [0.02, 0.014, 0.01, 0.007, 0.005]
    rows = effective.expansion_table([1, 2, 3], hs, mc, ellipse)
    assert len(rows) == 15
    assert all(r[3] == effective.ORDER for r in rows)
    for n in (1, 2, 3):
        vals = [v for h, m, v, _ in rows if m == n]
        assert all(np.diff(vals) < 0)
    for h in hs:
        vals = [v for g, m, v, _ in rows if g == h]
        assert vals[0] < vals[1] < vals[2]


def test_degenerate_curvature_refused(mc):
    circle = build_profile(ParametricBoundary.circle(1.0))
    for fn in (lambda: effective.eigenvalue_expansion(1, 0.01, mc, circle),
               lambda: effective.gap_expansion(0.01, mc, circle),
               lambda: effective.variational_bound(0.01, mc, circle),
               lambda: effective.harmonic_levels(2, mc, circle)):
        with pytest.raises(DegenerateGeometry):
            fn()
    with pytest.raises(DegenerateGeometry):
        effective.coefficients(mc, SimpleNamespace(k_max=1.0, k2=-1.0))


def test_table_files(mc, ellipse, tmp_path):
    rows = effective.expansion_table([1, 2], [0.01], mc, ellipse)
    effective.write_table_csv(rows, tmp_path / "e.csv")
    effective.write_table_json(rows, effective.coefficients(mc, ellipse), tmp_path / "e.json")
    with open(tmp_path / "e.csv") as fh:
        table = list(csv.DictReader(fh))
    assert [r["n"] for r in table] == ["1", "2"]
    assert float(table[0]["value"]) == rows[0][2]
    doc = json.loads((tmp_path / "e.json").read_text())
    assert doc["coefficients"]["order"] == effective.ORDER
    assert doc["rows"][1]["value"] == rows[1][2]
