"""
Orlicz Space Module

Modulars, Luxemburg norms and dual pairings of grid fields, plus the
norm–modular relations that hold under (Inc)_p and (Dec)_q.

Integrals are cell-volume-weighted sums over the grid (or over a mask).
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional
import logging

import numpy as np
from scipy.optimize import brentq

from src.modules.phi_functions import PhiFunction
from src.modules.spectral_ops import Field, GridField, VectorGridField, riesz_gradient
from src.utils.constants import TOL_LUX
from src.utils.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

MAX_BRACKET_STEPS = 200


@dataclass(frozen=True)
class ModularValue:
    """J_A(u) = ∫ A(x,|u(x)|) dx for one field."""

    value: float
    phi_id: str
    field_id: str = ''


@dataclass(frozen=True, eq=False)
class DualPairRHS:
    """
    Right-hand side F = f − D^s·𝒇, applied weakly.

    `f` is supported on the domain mask; `fvec` lives on the whole grid.
    """

    f: GridField
    fvec: VectorGridField
    s: float

    def __post_init__(self):
        if self.f.grid != self.fvec.grid:
            raise ConfigurationError("f and 𝒇 live on different grids")
        if not 0.0 < self.s <= 1.0:
            raise DomainError(f"s must lie in (0, 1], got {self.s}")

    @classmethod
    def zero(cls, grid, s: float) -> 'DualPairRHS':
        return cls(GridField.zeros(grid), VectorGridField.zeros(grid), s)

    @classmethod
    def from_potential(cls, fvec: VectorGridField, s: float) -> 'DualPairRHS':
        """F = −D^s·𝒇 with no L^{A′} part."""
        return cls(GridField.zeros(fvec.grid), fvec, s)


def _check_grid(u: Field, phi: PhiFunction) -> None:
    shape = phi.param_shape
    if shape and shape != u.grid.shape:
        raise ConfigurationError(
            f"Φ-function parameters have shape {shape}, field grid has {u.grid.shape}")


def _weights(u: Field, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is None:
        return np.full(u.grid.shape, u.grid.cell_volume)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != u.grid.shape:
        raise ConfigurationError(f"mask shape {mask.shape} does not match grid {u.grid.shape}")
    return mask * u.grid.cell_volume


def _integral(evaluate: Callable[..., np.ndarray], magnitude: np.ndarray, weights: np.ndarray) -> float:
    support = weights > 0
    values = np.zeros(magnitude.shape)
    positive = support & (magnitude > 0)
    if positive.any():
        values = np.where(positive, evaluate(np.where(positive, magnitude, 1.0)), 0.0)
    return float(np.sum(values * weights))


def modular(u: Field, phi: PhiFunction, mask: Optional[np.ndarray] = None,
            field_id: str = '') -> ModularValue:
    """
    Modular J_A(u) = Σ A(x,|u(x)|)·cellvol.

    Vector fields use the Euclidean magnitude. With `mask` the sum runs over Ω.

    Raises:
        ConfigurationError: Φ-function parameters on another grid
    """
    _check_grid(u, phi)
    value = _integral(phi.value, u.magnitude(), _weights(u, mask))
    return ModularValue(value, phi.name, field_id)


def _luxemburg(u: Field, evaluate: Callable[..., np.ndarray], mask: Optional[np.ndarray]) -> float:
    """inf{ρ > 0 : Σ F(|u|/ρ)·cellvol ≤ 1}, solved for log ρ with brentq."""
    magnitude = u.magnitude()
    if not np.all(np.isfinite(magnitude)):
        raise DomainError("field has non-finite samples")
    weights = _weights(u, mask)
    top = float(np.max(magnitude * (weights > 0)))
    if top == 0.0:
        return 0.0

    def excess(t: float) -> float:
        with np.errstate(over='ignore'):
            return _integral(evaluate, magnitude * np.exp(-t), weights) - 1.0

    lo = hi = np.log(top)
    steps = 0
    while excess(lo) < 0.0:
        lo -= 1.0 + steps
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise DomainError("Luxemburg bracket failed below")
    while excess(hi) > 0.0:
        hi += 1.0 + steps
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise DomainError("Luxemburg bracket failed above")
    if steps:
        logger.debug("Luxemburg bracket expanded %d times", steps)
    if excess(hi) == 0.0:
        return float(np.exp(hi))
    return float(np.exp(brentq(excess, lo, hi, xtol=1e-5 * TOL_LUX, rtol=4 * np.finfo(float).eps)))


def luxemburg_norm(u: Field, phi: PhiFunction, mask: Optional[np.ndarray] = None) -> float:
    """
    Luxemburg norm ∥u∥_{L^A} = inf{ρ > 0 : J_A(u/ρ) ≤ 1}.

    Returns 0 for the zero field; otherwise J_A(u/ρ*) = 1 to within TOL_LUX.

    Raises:
        DomainError: non-finite samples
        ConfigurationError: Φ-function parameters on another grid
    """
    _check_grid(u, phi)
    return _luxemburg(u, phi.value, mask)


def conjugate_norm(u: Field, phi: PhiFunction, mask: Optional[np.ndarray] = None) -> float:
    """∥u∥_{L^{A′}}, the Luxemburg norm of the conjugate A′."""
    _check_grid(u, phi)
    return _luxemburg(u, phi.conjugate, mask)


def lp_norm(u: Field, p: float, mask: Optional[np.ndarray] = None) -> float:
    """Discrete Lebesgue norm (Σ|u|^p·cellvol)^{1/p}."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    return float(np.sum(u.magnitude() ** p * _weights(u, mask)) ** (1.0 / p))


def lambda_norm(u: GridField, s: float, phi: PhiFunction) -> float:
    """Norm of Λ^{s,A}_0: ∥u∥_{L^A} + ∥D^s u∥_{L^A}."""
    return luxemburg_norm(u, phi) + luxemburg_norm(riesz_gradient(u, s), phi)


@dataclass
class NormModularReport:
    """Quantities of the two norm–modular displays for one field."""

    phi_id: str
    field_id: str
    modular: float
    norm: float
    bounds: Dict[str, float]
    passed: bool

    def to_record(self) -> Dict[str, Any]:
        return {
            'phi': self.phi_id,
            'field': self.field_id,
            'J': self.modular,
            'norm': self.norm,
            'bounds': dict(self.bounds),
            'pass': self.passed,
        }


def verify_norm_modular(u: Field, phi: PhiFunction, field_id: str = '',
                        mask: Optional[np.ndarray] = None, rtol: float = 1e-6) -> NormModularReport:
    """
    Check both displays relating J = J_A(u) and ∥u∥ = ∥u∥_{L^A}:

        min{J^{1/p}, J^{1/q}} ≤ ∥u∥ ≤ max{J^{1/p}, J^{1/q}} ≤ J + 1
        ½ min{∥u∥^p, ∥u∥^q} ≤ J ≤ 2 max{∥u∥^p, ∥u∥^q}
    """
    p, q = phi.growth.p, phi.growth.q
    j = modular(u, phi, mask, field_id).value
    norm = luxemburg_norm(u, phi, mask)
    bounds = {
        'norm_lower': min(j ** (1 / p), j ** (1 / q)),
        'norm_upper': max(j ** (1 / p), j ** (1 / q)),
        'norm_upper_affine': j + 1.0,
        'modular_lower': 0.5 * min(norm ** p, norm ** q),
        'modular_upper': 2.0 * max(norm ** p, norm ** q),
    }
    slack = 1.0 + rtol
    passed = (
        bounds['norm_lower'] <= norm * slack
        and norm <= bounds['norm_upper'] * slack
        and bounds['norm_upper'] <= bounds['norm_upper_affine'] * slack
        and bounds['modular_lower'] <= j * slack
        and j <= bounds['modular_upper'] * slack
    )
    return NormModularReport(phi.name, field_id, j, norm, bounds, bool(passed))


def dual_pairing(rhs: DualPairRHS, g: GridField, phi: Optional[PhiFunction] = None) -> float:
    """⟨F, g⟩ = ∫ f·g + ∫ 𝒇·D^s g."""
    if g.grid != rhs.f.grid:
        raise ConfigurationError("right-hand side and test field live on different grids")
    return rhs.f.inner(g) + rhs.fvec.inner(riesz_gradient(g, rhs.s))


def lebesgue_comparison_report(u: Field, phi: PhiFunction,
                               mask: Optional[np.ndarray] = None) -> Dict[str, Any]:
    """
    ∥u∥_{L^p(Ω)}, ∥u∥_{L^A(Ω)}, ∥u∥_{L^q(Ω)} and their two ratios.

    Only finiteness is asserted; the inclusion constants are not known.
    """
    p, q = phi.growth.p, phi.growth.q
    lp = lp_norm(u, p, mask)
    la = luxemburg_norm(u, phi, mask)
    lq = lp_norm(u, q, mask)
    ratio_low = lp / la if la > 0 else 0.0
    ratio_high = la / lq if lq > 0 else 0.0
    return {
        'phi': phi.name,
        'lp': lp,
        'la': la,
        'lq': lq,
        'ratio_lp_la': ratio_low,
        'ratio_la_lq': ratio_high,
        'pass': bool(np.isfinite([lp, la, lq, ratio_low, ratio_high]).all()),
    }
