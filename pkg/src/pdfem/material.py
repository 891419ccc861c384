"""Peridynamic constitutive data and calibration from engineering constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

# integer codes understood by the compiled and fallback kernels
INFLUENCE_CODES = {"one_minus_r": 0, "const": 1}
HYDROSTATIC_CODES = {"quadratic": 0, "convex_concave": 1}


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class InfluenceFunction:
    kind: str  # "one_minus_r" or "const"

    def __post_init__(self):
        if self.kind not in INFLUENCE_CODES:
            raise ValueError(f"unknown influence function {self.kind!r}; expected one of {sorted(INFLUENCE_CODES)}")

    @property
    def code(self) -> int:
        return INFLUENCE_CODES[self.kind]

    @property
    def bound(self) -> float:
        return 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1.0
        if self.kind == "one_minus_r":
            val = np.where(inside, 1.0 - r, 0.0)
        else:
            val = np.where(inside, 1.0, 0.0)
        return val if val.ndim else float(val)


class MaterialError(ValueError):
    pass


def moment(J, alpha: float, d: int = 2) -> float:
    """Moment ``(1/w_d) * int_{|xi|<1} J(|xi|) |xi|^-alpha dxi`` in ``d`` dimensions.

    The angular integral cancels the unit-ball volume up to a factor ``d``,
    leaving ``d * int_0^1 J(r) r^(d-1-alpha) dr``.
    """
    power = d - 1 - alpha
    if power <= -1:
        raise MaterialError(f"moment diverges for alpha={alpha} in d={d}")
    val, _ = integrate.quad(lambda r: J(r) * r**power, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
    return d * val


def shape_moment_MJ(J) -> float:
    val, _ = integrate.quad(lambda r: J(r) * r * r, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _bisect_inflection(d2, scale: float, sign: int) -> float:
    """Root of the second derivative on ``(0, 10*scale]`` (or its mirror)."""
    hi = sign * 10.0 * scale
    grid = np.linspace(0.0, hi, 2001)[1:]
    vals = d2(grid)
    change = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if change.size == 0:
        raise MaterialError("potential has no inflection point in the search bracket")
    a, b = grid[change[0]], grid[change[0] + 1]
    return optimize.bisect(d2, a, b, xtol=1e-16 * abs(hi), rtol=1e-15, maxiter=500)


@dataclass(frozen=True)
class PairwisePotential:
    """Bond potential ``f(r) = c (1 - exp(-beta r^2))``."""

    c: float
    beta: float
    r_plus: float = field(init=False)
    r_minus: float = field(init=False)

    def __post_init__(self):
        if not (self.c > 0 and self.beta > 0):
            raise MaterialError("pairwise potential needs c > 0 and beta > 0")
        scale = 1.0 / math.sqrt(self.beta)
        object.__setattr__(self, "r_plus", _bisect_inflection(self.d2f, scale, +1))
        object.__setattr__(self, "r_minus", _bisect_inflection(self.d2f, scale, -1))

    def f(self, r):
        return self.c * (1.0 - np.exp(-self.beta * np.square(r)))

    def df(self, r):
        return 2.0 * self.c * self.beta * r * np.exp(-self.beta * np.square(r))

    def d2f(self, r):
        br2 = self.beta * np.square(r)
        return 2.0 * self.c * self.beta * (1.0 - 2.0 * br2) * np.exp(-br2)

    @property
    def d2f0(self) -> float:
        return 2.0 * self.c * self.beta

    @property
    def r_bar_printed(self) -> float:
        # inflection as printed alongside the experiment; differs from the true root by sqrt(2)
        return 1.0 / math.sqrt(self.beta)


@dataclass(frozen=True)
class HydrostaticPotential:
    """Either ``g = Cbar r^2 / 2`` or ``g = c_g (1 - exp(-beta_g r^2))``."""

    kind: str
    Cbar: float = 0.0
    c_g: float = 0.0
    beta_g: float = 0.0

    def __post_init__(self):
        if self.kind not in HYDROSTATIC_CODES:
            raise MaterialError(f"unknown hydrostatic kind {self.kind!r}")
        if self.kind == "convex_concave" and not (self.c_g > 0 and self.beta_g > 0):
            raise MaterialError("convex-concave hydrostatic potential needs c_g > 0 and beta_g > 0")

    @property
    def code(self) -> int:
        return HYDROSTATIC_CODES[self.kind]

    def g(self, r):
        if self.kind == "quadratic":
            return 0.5 * self.Cbar * np.square(r)
        return self.c_g * (1.0 - np.exp(-self.beta_g * np.square(r)))

    def dg(self, r):
        if self.kind == "quadratic":
            return self.Cbar * np.asarray(r, dtype=float)
        return 2.0 * self.c_g * self.beta_g * r * np.exp(-self.beta_g * np.square(r))

    def d2g(self, r):
        if self.kind == "quadratic":
            return np.full_like(np.asarray(r, dtype=float), self.Cbar)
        br2 = self.beta_g * np.square(r)
        return 2.0 * self.c_g * self.beta_g * (1.0 - 2.0 * br2) * np.exp(-br2)

    @property
    def d2g0(self) -> float:
        return self.Cbar if self.kind == "quadratic" else 2.0 * self.c_g * self.beta_g

    def inflections(self) -> tuple[float, float]:
        """Critical hydrostatic strains (theta_c^+, theta_c^-)."""
        if self.kind == "quadratic":
            raise MaterialError("a quadratic hydrostatic potential has no inflection points")
        scale = 1.0 / math.sqrt(self.beta_g)
        return _bisect_inflection(self.d2g, scale, +1), _bisect_inflection(self.d2g, scale, -1)


@dataclass(frozen=True)
class MaterialModel:
    density: float
    horizon: float
    influence: InfluenceFunction
    pairwise: PairwisePotential
    hydrostatic: HydrostaticPotential
    dim: int = 2
    inflection: str = "analytic"  # or "printed"

    def __post_init__(self):
        if not self.density > 0:
            raise MaterialError("density must be positive")
        if not self.horizon > 0:
            raise MaterialError("horizon must be positive")
        if self.inflection not in ("analytic", "printed"):
            raise MaterialError(f"unknown inflection mode {self.inflection!r}")

    @property
    def r_plus(self) -> float:
        """Inflection of f used for damage reporting."""
        return self.pairwise.r_plus if self.inflection == "analytic" else self.pairwise.r_bar_printed

    @property
    def unit_volume(self) -> float:
        return unit_ball_volume(self.dim)


def lame_from_bulk(K: float, nu: float) -> tuple[float, float]:
    lam = 3.0 * K * nu / (1.0 + nu)
    mu = 3.0 * K * (1.0 - 2.0 * nu) / (2.0 * (1.0 + nu))
    return lam, mu


def calibrate(K: float, nu: float, Gc: float, J) -> tuple[float, float, float]:
    """Peridynamic (c, beta, Cbar) reproducing Lame constants and fracture toughness.

    Args:
        K: bulk modulus [Pa]
        nu: Poisson ratio
        Gc: critical energy release rate [J/m^2]
        J: influence function on [0, 1]

    Returns:
        (c, beta, Cbar)
    """
    if not K > 0:
        raise MaterialError("bulk modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise MaterialError(f"Poisson ratio {nu} outside (-1, 0.5)")
    if not Gc > 0:
        raise MaterialError("fracture toughness must be positive")
    lam, mu = lame_from_bulk(K, nu)
    MJ = shape_moment_MJ(J)
    c = math.pi * Gc / (4.0 * MJ)
    beta = 4.0 * mu / (c * MJ)
    Cbar = 2.0 * (lam - mu) / MJ**2
    return c, beta, Cbar


def critical_bond_strain(f: PairwisePotential, bond_length: float, r_plus: float | None = None):
    if not bond_length > 0:
        raise MaterialError("bond length must be positive")
    rp = f.r_plus if r_plus is None else r_plus
    rm = f.r_minus if r_plus is None else -r_plus
    s = math.sqrt(bond_length)
    return rp / s, rm / s


def sup_abs(func, scale: float) -> float:
    """Global sup of ``|func|`` by dense sampling over +-20 scale, then local refinement."""
    grid = np.linspace(-20.0 * scale, 20.0 * scale, 40001)
    vals = np.abs(func(grid))
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda r: -abs(float(func(r))), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12 * scale})
    return max(float(vals[k]), -float(res.fun))


def lipschitz_constant(f: PairwisePotential, g: HydrostaticPotential, J, horizon: float, d: int = 2) -> float:
    """L / eps^2 for the L2 Lipschitz bound of the peridynamic force."""
    C2f = sup_abs(f.d2f, 1.0 / math.sqrt(f.beta))
    if g.kind == "quadratic":
        C2g = abs(g.d2g0)
    else:
        C2g = sup_abs(g.d2g, 1.0 / math.sqrt(g.beta_g))
    J1 = moment(J, 1.0, d)
    J0 = moment(J, 0.0, d)
    return 4.0 * (C2f * J1 + C2g * J0**2) / horizon**2


def plexiglass(horizon: float = 0.004, influence: str = "one_minus_r", inflection: str = "analytic") -> MaterialModel:
    """Material used in the crack-propagation experiment (rho=1200, K=25 GPa, nu=0.245, Gc=500)."""
    J = InfluenceFunction(influence)
    c, beta, Cbar = calibrate(25e9, 0.245, 500.0, J)
    return MaterialModel(1200.0, horizon, J, PairwisePotential(c, beta), HydrostaticPotential("quadratic", Cbar),
                         inflection=inflection)
