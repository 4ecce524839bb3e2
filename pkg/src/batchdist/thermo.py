"""Pure-component and mixture thermodynamics.

Vapor pressures follow the Antoine form ``ln P[Pa] = A - B / (T[K] + C)``,
liquid heat capacities are polynomials in T, enthalpies of vaporization use
the Watson correlation, and liquid non-ideality is described by NRTL with
``tau_ij = a_ij + b_ij / T``. The vapor phase is an ideal gas, so
``K_i = gamma_i * Psat_i / P``.

Enthalpy datum: pure saturated liquid at the mixture's reference temperature
(ideal mixing, no excess enthalpy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import BubblePointError, InvalidInputError

COMPOSITION_TOL = 1e-10


class PropertyValue(float):
    """A float carrying an ``extrapolated`` flag.

    Set when the evaluation temperature lies outside the component's
    declared validity interval.
    """

    extrapolated: bool

    def __new__(cls, value, extrapolated=False):
        obj = super().__new__(cls, value)
        obj.extrapolated = bool(extrapolated)
        return obj

    def __repr__(self):
        flag = ", extrapolated" if self.extrapolated else ""
        return f"PropertyValue({float(self)!r}{flag})"


@dataclass(frozen=True)
class PureComponent:
    """Correlation coefficients for one component, SI units throughout.

    Attributes
    ----------
    antoine : (A, B, C) for ln P[Pa] = A - B / (T[K] + C)
    cp_liquid : polynomial coefficients of cp_L(T) in J/mol/K, lowest order first
    dh_vap : Watson parameters (dh_ref J/mol, T_ref K, T_crit K, exponent)
    t_range : validity interval (K)
    molar_mass : kg/mol
    """

    name: str
    antoine: tuple[float, float, float]
    cp_liquid: tuple[float, ...]
    dh_vap: tuple[float, float, float, float]
    t_range: tuple[float, float]
    molar_mass: float

    def __post_init__(self):
        object.__setattr__(self, "antoine", tuple(float(v) for v in self.antoine))
        object.__setattr__(self, "cp_liquid", tuple(float(v) for v in self.cp_liquid))
        object.__setattr__(self, "dh_vap", tuple(float(v) for v in self.dh_vap))
        object.__setattr__(self, "t_range", tuple(float(v) for v in self.t_range))
        t_lo, t_hi = self.t_range
        if len(self.antoine) != 3 or len(self.dh_vap) != 4 or not self.cp_liquid:
            raise InvalidInputError(f"{self.name}: malformed coefficient blocks")
        if not 0 < t_lo < t_hi:
            raise InvalidInputError(f"{self.name}: invalid t_range {self.t_range}")
        # Psat increasing on the interval iff B > 0 and T + C stays positive
        if self.antoine[1] <= 0 or t_lo + self.antoine[2] <= 0:
            raise InvalidInputError(f"{self.name}: Antoine form not increasing over t_range")
        if self.dh_vap[2] <= t_hi or self.dh_vap[0] <= 0:
            raise InvalidInputError(f"{self.name}: dh_vap must stay positive over t_range")
        grid = np.linspace(t_lo, t_hi, 64)
        cp = np.polynomial.polynomial.polyval(grid, self.cp_liquid)
        if np.any(cp <= 0):
            raise InvalidInputError(f"{self.name}: cp_liquid not positive over t_range")
        if self.molar_mass <= 0:
            raise InvalidInputError(f"{self.name}: molar_mass must be positive")

    def in_range(self, T):
        return self.t_range[0] <= T <= self.t_range[1]

    def saturation_temperature(self, P):
        """Invert the Antoine form; no range check."""
        A, B, C = self.antoine
        return B / (A - math.log(P)) - C


@dataclass(frozen=True)
class BinaryParameters:
    """NRTL parameters for the ordered pair (i, j); ``b`` in K."""

    a_ij: float = 0.0
    a_ji: float = 0.0
    b_ij: float = 0.0
    b_ji: float = 0.0
    alpha: float = 0.3


class ThermoArrays(NamedTuple):
    antoine: np.ndarray
    cp: np.ndarray
    watson: np.ndarray
    tau_a: np.ndarray
    tau_b: np.ndarray
    alpha: np.ndarray


@dataclass(frozen=True)
class MixtureModel:
    """Immutable mixture description shared by all simulations.

    ``binary_params`` maps ``(name_i, name_j)`` to :class:`BinaryParameters`;
    every unordered pair must be present exactly once, in either order.
    """

    components: tuple[PureComponent, ...]
    binary_params: Mapping[tuple[str, str], BinaryParameters]
    reference_temperature: float = 273.15
    arrays: ThermoArrays = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) < 2:
            raise InvalidInputError("a mixture needs at least two components")
        names = [c.name for c in comps]
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate component names in {names}")
        C = len(comps)
        index = {name: i for i, name in enumerate(names)}
        tau_a = np.zeros((C, C))
        tau_b = np.zeros((C, C))
        alpha = np.full((C, C), 0.3)
        seen = set()
        for (ni, nj), bp in self.binary_params.items():
            if ni not in index or nj not in index or ni == nj:
                raise InvalidInputError(f"binary pair ({ni}, {nj}) does not match the components")
            key = frozenset((ni, nj))
            if key in seen:
                raise InvalidInputError(f"binary pair ({ni}, {nj}) given twice")
            seen.add(key)
            i, j = index[ni], index[nj]
            tau_a[i, j], tau_a[j, i] = bp.a_ij, bp.a_ji
            tau_b[i, j], tau_b[j, i] = bp.b_ij, bp.b_ji
            alpha[i, j] = alpha[j, i] = bp.alpha
        missing = [
            (names[i], names[j])
            for i in range(C)
            for j in range(i + 1, C)
            if frozenset((names[i], names[j])) not in seen
        ]
        if missing:
            raise InvalidInputError(f"missing binary parameters for {missing}")
        K = max(len(c.cp_liquid) for c in comps)
        cp = np.zeros((C, K))
        for i, c in enumerate(comps):
            cp[i, : len(c.cp_liquid)] = c.cp_liquid
        arrays = ThermoArrays(
            antoine=np.array([c.antoine for c in comps]),
            cp=cp,
            watson=np.array([c.dh_vap for c in comps]),
            tau_a=tau_a,
            tau_b=tau_b,
            alpha=alpha,
        )
        for a in arrays:
            a.setflags(write=False)
        object.__setattr__(self, "binary_params", dict(self.binary_params))
        object.__setattr__(self, "arrays", arrays)

    @property
    def names(self):
        return tuple(c.name for c in self.components)

    @property
    def n_components(self):
        return len(self.components)

    def index(self, name):
        return self.names.index(name)


def ideal_mixture(components: Sequence[PureComponent], reference_temperature=273.15):
    """Mixture with all NRTL parameters zero (gamma = 1)."""
    pairs = {
        (components[i].name, components[j].name): BinaryParameters()
        for i in range(len(components))
        for j in range(i + 1, len(components))
    }
    return MixtureModel(tuple(components), pairs, reference_temperature)


def _finite_temperature(T):
    T = float(T)
    if not math.isfinite(T) or T <= 0:
        raise InvalidInputError(f"temperature must be finite and positive, got {T}")
    return T


def as_composition(x, n_components, name="x"):
    """Validate a mole-fraction vector and return it as a float array."""
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n_components,):
        raise InvalidInputError(f"{name} must have shape ({n_components},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.any(arr < 0) or np.any(arr > 1):
        raise InvalidInputError(f"{name} entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > COMPOSITION_TOL:
        raise InvalidInputError(f"{name} must sum to 1 (sum = {arr.sum()!r})")
    return arr


def vapor_pressure(component: PureComponent, T) -> PropertyValue:
    T = _finite_temperature(T)
    A, B, C = component.antoine
    return PropertyValue(math.exp(A - B / (T + C)), not component.in_range(T))


def activity_coefficients(mixture: MixtureModel, x, T) -> np.ndarray:
    x = as_composition(x, mixture.n_components)
    T = _finite_temperature(T)
    a = mixture.arrays
    ln_g = kernels.nrtl_ln_gamma(x[np.newaxis, :], np.array([T]), a.tau_a, a.tau_b, a.alpha)
    return np.exp(ln_g[0])


def excess_gibbs(mixture: MixtureModel, x, T) -> float:
    """Molar excess Gibbs energy divided by RT."""
    x = np.asarray(x, dtype=float)
    a = mixture.arrays
    return float(
        kernels.nrtl_excess_gibbs(x[np.newaxis, :], np.array([float(T)]), a.tau_a, a.tau_b, a.alpha)[0]
    )


def k_values(mixture: MixtureModel, x, T, P) -> np.ndarray:
    P = float(P)
    if not math.isfinite(P) or P <= 0:
        raise InvalidInputError(f"pressure must be positive, got {P}")
    gamma = activity_coefficients(mixture, x, T)
    ln_psat = kernels.ln_vapor_pressure(np.array([float(T)]), mixture.arrays.antoine)[0]
    return gamma * np.exp(ln_psat) / P


class BubblePoint(NamedTuple):
    T: float
    y: np.ndarray


def _bubble_residual(mixture, x, T, P):
    return float(np.dot(k_values(mixture, x, T, P), x)) - 1.0


def bubble_point(mixture: MixtureModel, x, P, tol=1e-10, max_iter=100) -> BubblePoint:
    """Bubble temperature and incipient vapor composition at pressure ``P``.

    Safeguarded Newton on T inside a bracket spanning the pure-component
    saturation temperatures (+- 5 K). When strong non-ideality pushes the
    root outside that bracket it is widened in 5 K steps, but never beyond
    the union of the components' validity intervals.
    """
    x = as_composition(x, mixture.n_components)
    P = float(P)
    if not math.isfinite(P) or P <= 0:
        raise InvalidInputError(f"pressure must be positive, got {P}")
    comps = mixture.components
    t_sat = []
    for c in comps:
        try:
            t_sat.append(c.saturation_temperature(P))
        except (ValueError, ZeroDivisionError):
            t_sat.append(math.inf)
    hull_lo = min(c.t_range[0] for c in comps)
    hull_hi = max(c.t_range[1] for c in comps)
    lo = max(min(t_sat) - 5.0, hull_lo)
    hi = min(max(t_sat) + 5.0, hull_hi)
    if not (lo < hi and all(math.isfinite(t) and t > 0 for t in t_sat)):
        raise BubblePointError(
            f"no bubble-point bracket at P={P:g} Pa: saturation temperatures {t_sat} "
            f"fall outside the validity hull [{hull_lo}, {hull_hi}] K"
        )
    f_lo = _bubble_residual(mixture, x, lo, P)
    f_hi = _bubble_residual(mixture, x, hi, P)
    while f_lo > 0 and lo > hull_lo:
        lo = max(lo - 5.0, hull_lo)
        f_lo = _bubble_residual(mixture, x, lo, P)
    while f_hi < 0 and hi < hull_hi:
        hi = min(hi + 5.0, hull_hi)
        f_hi = _bubble_residual(mixture, x, hi, P)
    if f_lo > 0 or f_hi < 0:
        raise BubblePointError(
            f"bubble-point residual does not change sign on [{lo}, {hi}] K",
            residual=min(abs(f_lo), abs(f_hi)),
        )

    T = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    f = _bubble_residual(mixture, x, T, P)
    for _ in range(max_iter):
        if abs(f) <= tol:
            return BubblePoint(T, k_values(mixture, x, T, P) * x)
        if f > 0:
            hi = T
        else:
            lo = T
        h = 1e-6 * T
        slope = (_bubble_residual(mixture, x, T + h, P) - f) / h
        T_new = T - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < T_new < hi:
            T_new = 0.5 * (lo + hi)
        T = T_new
        f = _bubble_residual(mixture, x, T, P)
    raise BubblePointError(f"bubble point did not converge at P={P:g} Pa", residual=abs(f))


def liquid_enthalpy(mixture: MixtureModel, x, T) -> float:
    x = as_composition(x, mixture.n_components)
    T = _finite_temperature(T)
    H = kernels.pure_liquid_enthalpy(np.array([T]), mixture.arrays.cp, mixture.reference_temperature)
    return float(np.dot(x, H[0]))


def vapor_enthalpy(mixture: MixtureModel, y, T) -> float:
    y = as_composition(y, mixture.n_components, name="y")
    T = _finite_temperature(T)
    dh = kernels.enthalpy_of_vaporization(np.array([T]), mixture.arrays.watson)[0]
    return liquid_enthalpy(mixture, y, T) + float(np.dot(y, dh))
