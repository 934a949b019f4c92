"""
Φ-Function Module

Defines, evaluates and audits generalized Φ-functions A(x,ℓ) together with
their density a(x,r) (A(x,ℓ) = ∫₀^ℓ a(x,r) r dr), conjugate A′, left inverse
A⁻¹ and the growth conditions (Inc)_p, (Dec)_q, (A0), (A1), (A2).

Spatial parameters are either scalars or arrays shaped like the grid. The
point argument `x` of every evaluation is either None (evaluate on the whole
parameter field, broadcasting against the argument) or an index into it.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from src.utils.constants import (
    COMPANION_SPAN,
    COMPANION_STEPS,
    CONDITION_IDS,
    CONDITION_RTOL,
    DENSITY_RTOL,
    LADDER_MAX,
    LADDER_MIN,
    PHI_FAMILIES,
    R_MIN,
    TOL_CONJ,
    TOL_INV,
)
from src.utils.errors import ConfigurationError, DomainError, RangeError

logger = logging.getLogger(__name__)

Point = Optional[Union[int, Tuple[int, ...]]]

MAX_EXPANSIONS = 2100
MAX_BISECTIONS = 200
ROOT_RTOL = 1e-14


@dataclass(frozen=True)
class GrowthExponents:
    """Exponents of (Inc)_p and (Dec)_q, 1 < p ≤ q < ∞."""

    p: float
    q: float

    def __post_init__(self):
        if not (1.0 < self.p <= self.q < np.inf):
            raise DomainError(f"growth exponents need 1 < p <= q < inf, got p={self.p}, q={self.q}")


def default_ladder() -> np.ndarray:
    return 2.0 ** np.arange(LADDER_MIN, LADDER_MAX + 1, dtype=float)


def _solve_increasing(fn: Callable[[np.ndarray], np.ndarray], target: np.ndarray) -> np.ndarray:
    """
    Solve fn(y) = target for y ≥ 0, elementwise, with fn increasing and fn(0) = 0.

    Geometric bracket expansion followed by bisection in log space to a
    relative width of ROOT_RTOL.
    """
    target = np.asarray(target, dtype=float)
    active = target > 0.0
    lo = np.ones(target.shape)
    hi = np.ones(target.shape)

    with np.errstate(over='ignore', under='ignore', invalid='ignore', divide='ignore'):
        for _ in range(MAX_EXPANSIONS):
            low_hi = active & (fn(hi) < target)
            if not low_hi.any():
                break
            hi = np.where(low_hi, 2.0 * hi, hi)
        else:
            raise RangeError("upper bracket not found; argument beyond the representable range")

        for _ in range(MAX_EXPANSIONS):
            high_lo = active & (fn(lo) > target)
            if not high_lo.any():
                break
            lo = np.where(high_lo, 0.5 * lo, lo)
        else:
            raise RangeError("lower bracket not found; argument below the representable range")

        if not (np.all(np.isfinite(hi[active])) and np.all(lo[active] > 0.0)):
            raise RangeError("bracket left the floating-point range")

        for _ in range(MAX_BISECTIONS):
            if np.all(hi - lo <= ROOT_RTOL * hi):
                break
            mid = np.sqrt(lo * hi)
            below = fn(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)

    return np.where(active, 0.5 * (lo + hi), 0.0)


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """
    A spatially dependent Φ-function A(x,ℓ) with density a(x,r).

    Build instances with the family constructors (`power`, `variable_exponent`,
    `log_perturbed`, `double_phase`, `custom`) or `build_sobolev_companion`.
    """

    family: str
    growth: GrowthExponents
    params: Dict[str, Any] = field(default_factory=dict)
    name: str = ''

    def __post_init__(self):
        if self.family not in PHI_FAMILIES:
            raise ConfigurationError(f"unknown Φ-function family: {self.family}")
        if not self.name:
            object.__setattr__(self, 'name', self.family)

    # -- constructors -------------------------------------------------------

    @classmethod
    def power(cls, p: float, scale: float = 1.0) -> 'PhiFunction':
        """A(ℓ) = scale·ℓ^p."""
        if not scale > 0:
            raise DomainError(f"power family needs a positive scale, got {scale}")
        return cls('power', GrowthExponents(p, p), {'p': float(p), 'scale': float(scale)},
                   name=f"power(p={p:g}, scale={scale:g})")

    @classmethod
    def variable_exponent(cls, p_field: Any, alpha: Any = 1.0) -> 'PhiFunction':
        """A(x,ℓ) = α(x)·ℓ^{p(x)} with 1 < p⁻ ≤ p⁺ < ∞ and α comparable to 1."""
        p_field = np.asarray(p_field, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0):
            raise DomainError("variable-exponent weight α must be positive")
        growth = GrowthExponents(float(np.min(p_field)), float(np.max(p_field)))
        return cls('variable-exponent', growth, {'p': _squeeze(p_field), 'alpha': _squeeze(alpha)},
                   name=f"variable-exponent(p in [{growth.p:g}, {growth.q:g}])")

    @classmethod
    def log_perturbed(cls, p_field: Any) -> 'PhiFunction':
        """
        A(x,ℓ) = ℓ^{p(x)} log(e + ℓ).

        Declared growth is (p⁻, p⁺ + 1): A/ℓ^{p⁺} = log(e+ℓ) keeps increasing,
        while ℓA′/A ≤ p + 0.32 everywhere.
        """
        p_field = np.asarray(p_field, dtype=float)
        p_min, p_max = float(np.min(p_field)), float(np.max(p_field))
        return cls('log-perturbed', GrowthExponents(p_min, p_max + 1.0), {'p': _squeeze(p_field)},
                   name=f"log-perturbed(p in [{p_min:g}, {p_max:g}])")

    @classmethod
    def double_phase(cls, p: float, q: float, alpha: Any) -> 'PhiFunction':
        """A(x,ℓ) = ℓ^p + α(x)ℓ^q with 1 < p < q and α ≥ 0 bounded."""
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < 0):
            raise DomainError("double-phase weight α must be nonnegative")
        return cls('double-phase', GrowthExponents(p, q),
                   {'p': float(p), 'q': float(q), 'alpha': _squeeze(alpha)},
                   name=f"double-phase(p={p:g}, q={q:g})")

    @classmethod
    def custom(
        cls,
        value: Callable[[Point, np.ndarray], np.ndarray],
        growth: GrowthExponents,
        density: Optional[Callable[[Point, np.ndarray], np.ndarray]] = None,
        name: str = 'custom',
    ) -> 'PhiFunction':
        """User-supplied A(x,ℓ); the density defaults to a centered difference."""
        return cls('custom', growth, {'value': value, 'density': density}, name=name)

    # -- parameter access ---------------------------------------------------

    @property
    def param_shape(self) -> Tuple[int, ...]:
        """Shape of the spatial parameter fields, () when A is x-independent."""
        for key in ('p', 'alpha', 'log_ell'):
            value = self.params.get(key)
            if isinstance(value, np.ndarray):
                return value.shape if key != 'log_ell' else value.shape[1:]
        source = self.params.get('source')
        return source.param_shape if source is not None else ()

    def _at(self, key: str, x: Point) -> Any:
        value = self.params[key]
        if isinstance(value, np.ndarray) and x is not None:
            return value[x]
        return value

    # -- evaluation ---------------------------------------------------------

    def value(self, ell: Any, x: Point = None) -> np.ndarray:
        """A(x,ℓ), vectorized over ℓ (and over the grid when x is None)."""
        ell = np.asarray(ell, dtype=float)
        with np.errstate(over='ignore'):
            if self.family == 'power':
                return self.params['scale'] * ell ** self.params['p']
            elif self.family == 'variable-exponent':
                return self._at('alpha', x) * ell ** self._at('p', x)
            elif self.family == 'log-perturbed':
                return ell ** self._at('p', x) * np.log(np.e + ell)
            elif self.family == 'double-phase':
                return ell ** self.params['p'] + self._at('alpha', x) * ell ** self.params['q']
            elif self.family == 'tabulated':
                return self._table_value(ell, x)
            else:
                return np.asarray(self.params['value'](x, ell), dtype=float)

    def density(self, r: Any, x: Point = None) -> np.ndarray:
        """a(x,r) for r > 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(over='ignore', divide='ignore'):
            if self.family == 'power':
                p = self.params['p']
                return self.params['scale'] * p * r ** (p - 2.0)
            elif self.family == 'variable-exponent':
                p = self._at('p', x)
                return self._at('alpha', x) * p * r ** (p - 2.0)
            elif self.family == 'log-perturbed':
                p = self._at('p', x)
                return p * r ** (p - 2.0) * np.log(np.e + r) + r ** (p - 1.0) / (np.e + r)
            elif self.family == 'double-phase':
                p, q = self.params['p'], self.params['q']
                return p * r ** (p - 2.0) + q * self._at('alpha', x) * r ** (q - 2.0)
            elif self.family == 'tabulated':
                return self._table_density(r, x)
            elif self.params.get('density') is not None:
                return np.asarray(self.params['density'](x, r), dtype=float)
            else:
                h = 1e-6
                slope = (self.value(r * (1 + h), x) - self.value(r * (1 - h), x)) / (2 * h * r)
                return slope / r

    def derivative(self, ell: Any, x: Point = None) -> np.ndarray:
        """∂_ℓ A(x,ℓ) = a(x,ℓ)ℓ, with the density floored at R_MIN."""
        ell = np.asarray(ell, dtype=float)
        return self.density(np.maximum(ell, R_MIN), x) * ell

    def inverse(self, t: Any, x: Point = None) -> np.ndarray:
        """Left inverse A⁻¹(x,t), vectorized."""
        t = np.asarray(t, dtype=float)
        if self.family == 'power':
            return (t / self.params['scale']) ** (1.0 / self.params['p'])
        elif self.family == 'variable-exponent':
            return (t / self._at('alpha', x)) ** (1.0 / self._at('p', x))
        elif self.family == 'tabulated':
            return t ** (-self.params['gamma']) * self.params['source'].inverse(t, x)
        target = np.broadcast_to(t, np.broadcast_shapes(t.shape, self._shape_at(x)))
        return _solve_increasing(lambda y: self.value(y, x), target)

    def conjugate(self, ell: Any, x: Point = None) -> np.ndarray:
        """A′(x,ℓ) = sup_r (rℓ − A(x,r)), vectorized."""
        ell = np.asarray(ell, dtype=float)
        if self.family in ('power', 'variable-exponent'):
            if self.family == 'power':
                c, p = self.params['scale'], self.params['p']
            else:
                c, p = self._at('alpha', x), self._at('p', x)
            r_star = (ell / (c * p)) ** (1.0 / (p - 1.0))
            return c * (p - 1.0) * r_star ** p
        target = np.broadcast_to(ell, np.broadcast_shapes(ell.shape, self._shape_at(x)))
        r_star = _solve_increasing(lambda r: self.derivative(r, x), target)
        return np.maximum(r_star * target - self.value(r_star, x), 0.0)

    def _shape_at(self, x: Point) -> Tuple[int, ...]:
        return self.param_shape if x is None else ()

    # -- tabulated family ---------------------------------------------------

    def _table_segments(self, ell: np.ndarray, x: Point):
        table = self.params['log_ell']
        if x is not None and table.ndim > 1:
            table = table[(slice(None),) + (x if isinstance(x, tuple) else (x,))]
        log_t = self.params['log_t']
        with np.errstate(divide='ignore'):
            query = np.log(ell)
        k = table.shape[0]
        if table.ndim == 1:
            idx = np.searchsorted(table, query)
        else:
            if query.shape != table.shape[1:]:
                raise ConfigurationError("tabulated Φ-function with spatial tables needs grid-shaped arguments")
            idx = np.sum(table < query[np.newaxis], axis=0)
        idx = np.clip(idx, 1, k - 1)
        if table.ndim == 1:
            left, right = table[idx - 1], table[idx]
        else:
            left = np.take_along_axis(table, (idx - 1)[np.newaxis], axis=0)[0]
            right = np.take_along_axis(table, idx[np.newaxis], axis=0)[0]
        slope = (log_t[idx] - log_t[idx - 1]) / (right - left)
        return query, left, log_t[idx - 1], slope

    def _table_value(self, ell: np.ndarray, x: Point) -> np.ndarray:
        positive = ell > 0.0
        query, left, base, slope = self._table_segments(np.where(positive, ell, 1.0), x)
        return np.where(positive, np.exp(base + slope * (query - left)), 0.0)

    def _table_density(self, r: np.ndarray, x: Point) -> np.ndarray:
        query, left, base, slope = self._table_segments(r, x)
        return slope * np.exp(base + slope * (query - left)) / r ** 2


def _squeeze(array: np.ndarray) -> Any:
    """Collapse a constant parameter array to a float."""
    if array.ndim == 0 or np.all(array == array.flat[0]):
        return float(array.flat[0])
    array = array.copy()
    array.flags.writeable = False
    return array


# -- pointwise operations -----------------------------------------------------

def eval_phi(phi: PhiFunction, x: Point, ell: float) -> float:
    """A(x,ℓ); A(x,0) = 0 exactly."""
    if ell < 0:
        raise DomainError(f"A(x,ℓ) needs ℓ >= 0, got {ell}")
    if ell == 0:
        return 0.0
    return float(phi.value(ell, x))


def eval_density(phi: PhiFunction, x: Point, r: float) -> float:
    """a(x,r) for r > 0."""
    if r <= 0:
        raise DomainError(f"a(x,r) needs r > 0, got {r}")
    return float(phi.density(r, x))


def _bracket(fn: Callable[[float], float], target: float) -> Tuple[float, float]:
    hi = 1.0
    while fn(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise RangeError(f"no bracket for target {target:.3e}")
    lo = min(hi / 2.0, 1.0)
    while lo > 0.0 and fn(lo) > target:
        lo /= 2.0
    return lo, hi


def conjugate_phi(phi: PhiFunction, x: Point, ell: float) -> float:
    """
    A′(x,ℓ) = sup_{r≥0} (rℓ − A(x,r)).

    Closed form for the power and variable-exponent families; otherwise the
    maximizer r* solves a(x,r)r = ℓ by bisection (tolerance TOL_CONJ on r).
    """
    if ell < 0:
        raise DomainError(f"A′(x,ℓ) needs ℓ >= 0, got {ell}")
    if ell == 0:
        return 0.0
    if phi.family in ('power', 'variable-exponent'):
        return float(phi.conjugate(ell, x))

    def slope(r: float) -> float:
        return float(phi.derivative(r, x))

    lo, hi = _bracket(slope, ell)
    r_star = bisect(lambda r: slope(r) - ell, lo, hi, xtol=TOL_CONJ, rtol=4 * np.finfo(float).eps)
    return max(r_star * ell - float(phi.value(r_star, x)), 0.0)


def left_inverse(phi: PhiFunction, x: Point, r: float) -> float:
    """A⁻¹(x,r) = inf{ℓ ≥ 0 : A(x,ℓ) ≥ r}, bisection to TOL_INV absolute."""
    if r < 0:
        raise DomainError(f"A⁻¹(x,r) needs r >= 0, got {r}")
    if r == 0:
        return 0.0
    if phi.family in ('power', 'variable-exponent', 'tabulated'):
        return float(phi.inverse(r, x))

    def value(ell: float) -> float:
        return float(phi.value(ell, x))

    lo, hi = _bracket(value, r)
    return bisect(lambda ell: value(ell) - r, lo, hi, xtol=TOL_INV, rtol=4 * np.finfo(float).eps)


# -- condition audits -----------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """
    Points and ladder on which a condition is checked.

    `balls` lists (points, measure) pairs for (A1); `points`, `h` and `sigma`
    drive (A2). `beta` is the declared constant of (A1)/(A2), if any.
    """

    x_samples: Tuple[Point, ...] = (None,)
    ladder: np.ndarray = field(default_factory=default_ladder)
    exponent: Optional[float] = None
    a_minus: Optional[float] = None
    a_plus: Optional[float] = None
    balls: Tuple[Tuple[Tuple[Point, ...], float], ...] = ()
    points: Tuple[Point, ...] = ()
    h: Any = 0.0
    sigma: float = 1.0
    beta: Optional[float] = None

    @classmethod
    def for_phi(cls, phi: PhiFunction, max_points: int = 16, **kwargs) -> 'SamplingPlan':
        """Evenly spread x-samples over the parameter fields of `phi`."""
        shape = phi.param_shape
        if not shape:
            return cls(x_samples=(None,), **kwargs)
        size = int(np.prod(shape))
        flat = np.unique(np.linspace(0, size - 1, min(max_points, size)).astype(int))
        samples = tuple(
            tuple(int(i) for i in np.unravel_index(f, shape)) if len(shape) > 1 else int(f)
            for f in flat
        )
        return cls(x_samples=samples, **kwargs)


@dataclass
class ConditionReport:
    """Outcome of one condition audit; failures carry a witness."""

    condition: str
    passed: bool
    samples: int
    witness: Optional[Dict[str, Any]] = None
    sampled: bool = False
    detail: Dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return 'sampled' if self.sampled else 'checked'

    def to_record(self) -> Dict[str, Any]:
        witness = self.witness or {}
        return {
            'condition': self.condition,
            'pass': self.passed,
            'label': self.label,
            'samples': self.samples,
            'witness_x': None if witness.get('x') is None else str(witness.get('x')),
            'witness_arg': witness.get('arg'),
            'violation': witness.get('violation'),
            **{f'detail_{k}': v for k, v in sorted(self.detail.items())},
        }


def _worst(violations: List[Tuple[float, Point, float]]) -> Optional[Dict[str, Any]]:
    bad = [v for v in violations if v[0] > 0.0]
    if not bad:
        return None
    magnitude, x, arg = max(bad, key=lambda v: v[0])
    return {'x': x, 'arg': arg, 'violation': magnitude}


def check_condition(phi: PhiFunction, condition: str, plan: SamplingPlan) -> ConditionReport:
    """
    Audit one growth or structure condition on a sampling plan.

    Condition ids: inc, dec, a0, a1, a2, hypothesis-on-a, pointwise-bounds,
    delta2, definition. (A1)/(A2) reports are labelled "sampled".

    Raises:
        ConfigurationError: empty sampling plan or unknown condition
    """
    if condition not in CONDITION_IDS:
        raise ConfigurationError(f"unknown condition id: {condition}")
    ladder = np.asarray(plan.ladder, dtype=float)
    if len(plan.x_samples) == 0 or ladder.size == 0:
        raise ConfigurationError("sampling plan is empty")
    ladder = np.sort(ladder)

    if condition == 'a0':
        return _check_a0(phi, plan)
    if condition in ('a1', 'a2'):
        return _check_inverse_comparison(phi, condition, plan, ladder)

    violations: List[Tuple[float, Point, float]] = []
    detail: Dict[str, Any] = {}
    a_minus = plan.a_minus if plan.a_minus is not None else phi.growth.p - 1.0
    a_plus = plan.a_plus if plan.a_plus is not None else phi.growth.q - 1.0

    for x in plan.x_samples:
        values = phi.value(ladder, x)
        if condition in ('inc', 'dec'):
            exponent = plan.exponent
            if exponent is None:
                exponent = phi.growth.p if condition == 'inc' else phi.growth.q
            detail['exponent'] = exponent
            ratio = values / ladder ** exponent
            step = (ratio[:-1] - ratio[1:]) if condition == 'inc' else (ratio[1:] - ratio[:-1])
            excess = step / ratio[:-1] - CONDITION_RTOL
            violations += [(float(e), x, float(ladder[k + 1])) for k, e in enumerate(excess)]
        elif condition == 'hypothesis-on-a':
            h = 1e-4
            up = phi.density(ladder * np.exp(h), x)
            down = phi.density(ladder * np.exp(-h), x)
            index = (np.log(up) - np.log(down)) / (2 * h) + 1.0
            excess = np.maximum(a_minus - index, index - a_plus) - 1e-6
            detail.update(a_minus=a_minus, a_plus=a_plus)
            violations += [(float(e), x, float(r)) for e, r in zip(excess, ladder)]
        elif condition == 'pointwise-bounds':
            middle = ladder ** 2 * phi.density(ladder, x)
            excess = np.maximum((a_minus + 1) * values - middle, middle - (a_plus + 1) * values)
            excess = excess / values - CONDITION_RTOL
            detail.update(a_minus=a_minus, a_plus=a_plus)
            violations += [(float(e), x, float(l)) for e, l in zip(excess, ladder)]
        elif condition == 'delta2':
            constant = 2.0 ** phi.growth.q
            excess = phi.value(2 * ladder, x) / (constant * values) - 1.0 - CONDITION_RTOL
            detail['K'] = constant
            violations += [(float(e), x, float(l)) for e, l in zip(excess, ladder)]
        else:
            violations += _definition_violations(phi, x, ladder, values)

    witness = _worst(violations)
    return ConditionReport(condition, witness is None, len(violations), witness, detail=detail)


def _definition_violations(phi, x, ladder, values) -> List[Tuple[float, Point, float]]:
    out = [(abs(float(phi.value(0.0, x))), x, 0.0)]
    steps = (values[:-1] - values[1:]) / np.maximum(values[1:], 1e-300)
    out += [(float(e) - CONDITION_RTOL, x, float(l)) for e, l in zip(steps, ladder[1:])]
    midpoint = phi.value(0.5 * (ladder[:-1] + ladder[1:]), x)
    chord = 0.5 * (values[:-1] + values[1:])
    out += [(float(e) - CONDITION_RTOL, x, float(l))
            for e, l in zip((midpoint - chord) / chord, ladder[1:])]
    out.append((float(1.0 - values[-1]), x, float(ladder[-1])))
    return out


def _check_a0(phi: PhiFunction, plan: SamplingPlan) -> ConditionReport:
    """Largest β ∈ (0,1] with A(x,β) ≤ 1 ≤ A(x,1/β) at every sampled x."""
    def holds(beta: float) -> bool:
        return all(phi.value(beta, x) <= 1.0 and phi.value(1.0 / beta, x) >= 1.0
                   for x in plan.x_samples)

    floor = 2.0 ** LADDER_MIN
    samples = len(plan.x_samples)
    if holds(1.0):
        return ConditionReport('a0', True, samples, detail={'beta': 1.0})
    if not holds(floor):
        worst = max(plan.x_samples, key=lambda x: float(phi.value(floor, x)) - float(phi.value(1 / floor, x)))
        violation = max(float(phi.value(floor, worst)) - 1.0, 1.0 - float(phi.value(1 / floor, worst)))
        return ConditionReport('a0', False, samples, {'x': worst, 'arg': floor, 'violation': violation})
    lo, hi = floor, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if holds(mid) else (lo, mid)
    logger.debug("(A0) β = %.6g for %s", lo, phi.name)
    return ConditionReport('a0', True, samples, detail={'beta': lo})


def _check_inverse_comparison(phi: PhiFunction, condition: str, plan: SamplingPlan,
                              ladder: np.ndarray) -> ConditionReport:
    """Sampled (A1)/(A2): the smallest ratio A⁻¹(y,·)/A⁻¹(x,·) is the observed β."""
    observed = np.inf
    witness = None
    samples = 0
    if condition == 'a1':
        groups = [(points, ladder[(ladder >= 1.0) & (ladder <= 1.0 / measure)])
                  for points, measure in plan.balls if 0 < measure <= 1.0]
        pairs = [(x, y, levels, levels) for points, levels in groups for x in points for y in points]
    else:
        h = plan.h
        levels = ladder[ladder <= plan.sigma]
        pairs = [(x, y, levels, levels + _h_at(h, x) + _h_at(h, y))
                 for x in plan.points for y in plan.points]
    if not pairs:
        raise ConfigurationError(f"({condition.upper()}) needs declared sample balls or points")

    for x, y, levels, shifted in pairs:
        if levels.size == 0:
            continue
        left = phi.inverse(levels, x)
        right = phi.inverse(shifted, y)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(left > 0, right / left, np.inf)
        k = int(np.argmin(ratio))
        samples += levels.size
        if ratio[k] < observed:
            observed = float(ratio[k])
            witness = {'x': (x, y), 'arg': float(levels[k]), 'violation': None}

    beta = min(observed, 1.0)
    passed = bool(np.isfinite(observed) and beta > 0.0)
    if plan.beta is not None:
        passed = passed and beta >= plan.beta
    if not passed and witness is not None:
        witness['violation'] = (plan.beta or 0.0) - beta
    else:
        witness = None
    return ConditionReport(condition, passed, samples, witness, sampled=True, detail={'beta': beta})


def _h_at(h: Any, x: Point) -> float:
    if isinstance(h, np.ndarray) and x is not None:
        return float(h[x])
    return float(h)


# -- calculus audits --------------------------------------------------------------

def young_inequality_gap(phi: PhiFunction, plan: SamplingPlan) -> float:
    """Largest relative excess of rℓ over A(x,r) + A′(x,ℓ) on ladder pairs."""
    ladder = np.asarray(plan.ladder, dtype=float)
    worst = -np.inf
    for x in plan.x_samples:
        total = phi.value(ladder, x)[:, None] + phi.conjugate(ladder, x)[None, :]
        product = ladder[:, None] * ladder[None, :]
        worst = max(worst, float(np.max((product - total) / total)))
    return worst


def double_conjugate_gap(phi: PhiFunction, plan: SamplingPlan) -> float:
    """
    Largest relative gap |A″ − A| on the ladder.

    The sup defining A″(ℓ) = sup_y (yℓ − A′(y)) is attained at y = ∂_ℓA(x,ℓ),
    with A′ computed numerically.
    """
    ladder = np.asarray(plan.ladder, dtype=float)
    worst = 0.0
    for x in plan.x_samples:
        slope = phi.derivative(ladder, x)
        twice = slope * ladder - phi.conjugate(slope, x)
        values = phi.value(ladder, x)
        worst = max(worst, float(np.max(np.abs(twice - values) / values)))
    return worst


def inverse_consistency_gap(phi: PhiFunction, plan: SamplingPlan, tol: float = 1e-8) -> float:
    """
    Largest violation of A(x, A⁻¹(x,r)) ≥ r − tol·r and A⁻¹(x, A(x,ℓ)) ≤ ℓ + tol·ℓ.

    Returns ≤ 0 when both hold everywhere on the ladder.
    """
    ladder = np.asarray(plan.ladder, dtype=float)
    worst = -np.inf
    for x in plan.x_samples:
        forward = phi.value(phi.inverse(ladder, x), x)
        backward = phi.inverse(phi.value(ladder, x), x)
        worst = max(worst,
                    float(np.max((ladder - forward) / ladder - tol)),
                    float(np.max((backward - ladder) / ladder - tol)))
    return worst


def density_quadrature_gap(phi: PhiFunction, plan: SamplingPlan) -> float:
    """
    Largest relative mismatch between ∫₀^ℓ a(x,r) r dr and A(x,ℓ).

    The cell [0, R_MIN] is integrated with the power-law model a(r)r ∝ r^{p-1}
    implied by (Inc)_p; the rest by adaptive quadrature in log r.
    """
    ladder = np.asarray(plan.ladder, dtype=float)
    p = phi.growth.p
    worst = 0.0
    for x in plan.x_samples:
        head = float(phi.density(R_MIN, x)) * R_MIN ** 2 / p

        def integrand(t: float) -> float:
            r = np.exp(t)
            return float(phi.density(r, x)) * r * r

        for ell in ladder:
            body, _ = quad(integrand, np.log(R_MIN), np.log(ell), epsrel=1e-11, epsabs=0.0, limit=200)
            value = float(phi.value(ell, x))
            worst = max(worst, abs(head + body - value) / value)
    return worst


def audit_family(phi: PhiFunction, plan: Optional[SamplingPlan] = None) -> List[ConditionReport]:
    """(Inc)_p, (Dec)_q and (A0) at the declared growth exponents."""
    plan = plan or SamplingPlan.for_phi(phi)
    return [check_condition(phi, condition, plan) for condition in ('inc', 'dec', 'a0')]


def calculus_report(phi: PhiFunction, plan: Optional[SamplingPlan] = None) -> Dict[str, float]:
    """Worst gaps of the Young, Fenchel–Moreau, inverse and density audits."""
    plan = plan or SamplingPlan.for_phi(phi, max_points=4)
    return {
        'young': young_inequality_gap(phi, plan),
        'double_conjugate': double_conjugate_gap(phi, plan),
        'inverse': inverse_consistency_gap(phi, plan),
        'density': density_quadrature_gap(phi, plan),
    }


CALCULUS_TOLERANCES = {
    'young': 1e-12,
    'double_conjugate': 1e-6,
    'inverse': 0.0,
    'density': DENSITY_RTOL,
}


# -- Sobolev companion --------------------------------------------------------------

def build_sobolev_companion(phi: PhiFunction, gamma: float) -> PhiFunction:
    """
    Companion B of the Sobolev inequality: B⁻¹(x,t) = t^{−γ} A⁻¹(x,t).

    B is tabulated on the ladder t = 2^{k/COMPANION_STEPS} and interpolated
    linearly in log-log coordinates, which is monotone and exact for powers.

    Raises:
        DomainError: γ outside (0,1), or γ ≥ 1/q so B has no finite growth
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"γ must lie in (0, 1), got {gamma}")
    p, q = phi.growth.p, phi.growth.q
    if gamma >= 1.0 / q:
        raise DomainError(f"companion needs γ < 1/q = {1.0 / q:.4g}, got {gamma}")
    growth = GrowthExponents(1.0 / (1.0 / p - gamma), 1.0 / (1.0 / q - gamma))

    k = np.arange(-COMPANION_SPAN * COMPANION_STEPS, COMPANION_SPAN * COMPANION_STEPS + 1)
    t = 2.0 ** (k / COMPANION_STEPS)
    shape = phi.param_shape
    nodes = t.reshape((-1,) + (1,) * len(shape))
    ell = nodes ** (-gamma) * phi.inverse(nodes, None)
    log_ell = np.log(np.broadcast_to(ell, (t.size,) + shape)).copy()
    log_ell.flags.writeable = False

    logger.debug("companion of %s with γ=%.4g tabulated on %d nodes", phi.name, gamma, t.size)
    return PhiFunction(
        'tabulated',
        growth,
        {'log_ell': log_ell, 'log_t': np.log(t), 'gamma': float(gamma), 'source': phi},
        name=f"companion({phi.name}, γ={gamma:.4g})",
    )
