"""
Inequality Lab Module

Turns the Poincaré, interpolation, decreasing-spaces and Sobolev inequalities
and the continuity of s ↦ D^s u into "uniformly bounded ratio over a fixed
suite" checks. The constants are existential, so every ratio is compared
against a baseline captured on a reference run.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence
import logging

import numpy as np

from src.modules.dirichlet_solver import DomainMask
from src.modules.orlicz_space import luxemburg_norm, lp_norm
from src.modules.phi_functions import PhiFunction, build_sobolev_companion
from src.modules.spectral_ops import (
    Grid,
    GridField,
    band_limited_field,
    interpolation_multiplier,
    riesz_gradient,
)
from src.utils.constants import (
    BASELINE_DRIFT,
    INEQUALITY_COLUMNS,
    SUITE_BUMP_WIDTHS,
    SUITE_PLACEMENTS,
    SUITE_PURE_MODES,
    SUITE_RANDOM_FIELDS,
    SUITE_RANDOM_MODES,
)
from src.utils.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

CONTINUITY_WINDOW = 1e-3
CONTINUITY_RTOL = 1e-3
CONTINUITY_FLOOR = 1e-12   # errors below this fraction of ∥D^σ u∥ count as zero


@dataclass(frozen=True, eq=False)
class TestSuite:
    """Deterministic family of fields supported in a domain mask."""

    __test__ = False

    mask: DomainMask
    seed: int
    fields: Dict[str, GridField]

    @property
    def grid(self) -> Grid:
        return self.mask.grid

    def __iter__(self):
        return iter(self.fields.items())

    def __len__(self) -> int:
        return len(self.fields)


def smooth_bump(grid: Grid, center: Sequence[float], radius: float) -> GridField:
    """exp(1 − 1/(1 − |x−c|²/ρ²)) inside the ball of radius ρ, 0 outside."""
    distance2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center)) / radius ** 2
    inside = distance2 < 1.0
    samples = np.zeros(grid.shape)
    samples[inside] = np.exp(1.0 - 1.0 / (1.0 - distance2[inside]))
    return GridField(grid, samples)


def build_test_suite(mask: DomainMask, seed: int = 0) -> TestSuite:
    """
    Bumps (three widths × two placements), seeded band-limited random fields
    and pure modes, each vanishing outside the mask.

    On a bounded mask the random fields and modes are cut off by the widest
    centred bump; on the full torus they are used as they are.
    """
    grid = mask.grid
    centre = mask.centroid() if not mask.periodic else np.zeros(grid.d)
    radius = mask.inscribed_radius()
    if mask.periodic:
        radius = 0.25 * grid.length
    fields: Dict[str, GridField] = {}

    for width in SUITE_BUMP_WIDTHS:
        for offset in SUITE_PLACEMENTS:
            shift = np.zeros(grid.d)
            shift[0] = offset * radius
            bump = smooth_bump(grid, centre + shift, width * (1.0 - offset) * radius)
            fields[f'bump-w{width:g}-o{offset:g}'] = bump

    cutoff = None if mask.periodic else smooth_bump(grid, centre, radius)
    modes = min(SUITE_RANDOM_MODES, grid.n // 2 - 1)
    for k in range(SUITE_RANDOM_FIELDS):
        random = band_limited_field(grid, seed + k, max_mode=modes)
        if cutoff is not None:
            random = random.with_samples(random.samples * cutoff.samples)
        fields[f'random-{seed + k}'] = random

    x = grid.coordinates()[0]
    for k in SUITE_PURE_MODES:
        if mask.periodic:
            wave = np.sin(2.0 * np.pi * k * x / grid.length)
        else:
            wave = np.sin(np.pi * k * (x - centre[0]) / radius) * cutoff.samples
        fields[f'mode-{k}'] = GridField(grid, wave)

    fields = {name: mask.project(u) if not mask.periodic else u for name, u in fields.items()}
    logger.debug("test suite with %d fields (seed %d)", len(fields), seed)
    return TestSuite(mask, seed, fields)


@dataclass
class InequalityRecord:
    """
    One evaluated ratio lhs / rhs-without-constant.

    `scale` is the shape factor the baseline multiplies (1 for most checks,
    the decreasing-spaces constant shape C(σ) for that check). A record
    passes when ratio ≤ baseline·scale·(1 + BASELINE_DRIFT); without a
    baseline only finiteness is required.
    """

    inequality_id: str
    lhs: float
    rhs: float
    r: Optional[float] = None
    s: Optional[float] = None
    t: Optional[float] = None
    sigma: Optional[float] = None
    field_id: str = ''
    scale: float = 1.0
    baseline: Optional[float] = None
    exact: Optional[float] = None

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else np.inf
        return self.lhs / self.rhs

    @property
    def normalised(self) -> float:
        return self.ratio / self.scale

    @property
    def passed(self) -> bool:
        ratio = self.ratio
        if not (np.isfinite(ratio) and ratio >= 0.0):
            return False
        if self.exact is not None and abs(ratio - self.exact) > 1e-10 * max(1.0, self.exact):
            return False
        if self.baseline is None:
            return True
        return ratio <= self.baseline * self.scale * (1.0 + BASELINE_DRIFT)

    def with_baseline(self, baseline: Optional[float]) -> 'InequalityRecord':
        return replace(self, baseline=baseline)

    def to_row(self) -> Dict[str, Any]:
        row = {
            'inequality_id': self.inequality_id,
            'r': self.r,
            's': self.s,
            't': self.t,
            'sigma': self.sigma,
            'field_id': self.field_id,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'ratio': self.ratio,
            'baseline': self.baseline,
            'pass': self.passed,
        }
        return {key: row[key] for key in INEQUALITY_COLUMNS}


# -- baselines ------------------------------------------------------------------------

def baseline_key(record: InequalityRecord) -> str:
    return record.inequality_id


def capture_baselines(records: Iterable[InequalityRecord]) -> Dict[str, float]:
    """Per inequality id, the largest normalised ratio observed."""
    baselines: Dict[str, float] = {}
    for record in records:
        value = record.normalised
        if record.exact is not None or not np.isfinite(value):
            continue
        key = baseline_key(record)
        baselines[key] = max(baselines.get(key, 0.0), float(value))
    return baselines


def apply_baselines(records: Iterable[InequalityRecord],
                    baselines: Dict[str, float]) -> List[InequalityRecord]:
    out = []
    missing = set()
    for record in records:
        key = baseline_key(record)
        if record.exact is None and key not in baselines:
            missing.add(key)
        out.append(record.with_baseline(baselines.get(key)) if record.exact is None else record)
    for key in sorted(missing):
        logger.warning("no baseline for %s; checking finiteness only", key)
    return out


# -- checks ----------------------------------------------------------------------------

def _ds_norm(u: GridField, s: float, phi: PhiFunction) -> float:
    return luxemburg_norm(riesz_gradient(u, s), phi)


def _region(mask: DomainMask) -> Optional[np.ndarray]:
    return None if mask.periodic else mask.indicator


def poincare_sweep(suite: TestSuite, phi: PhiFunction, s_grid: Sequence[float],
                   scales: Sequence[float] = (1.0,)) -> List[InequalityRecord]:
    """
    ∥u∥_{L^A(Ω)} against ∥D^s u∥_{L^A}/(1 − 2^{−s}) for every suite member and s.

    The stored ratio is (1 − 2^{−s})·∥u∥/∥D^s u∥, the quantity bounded by one
    constant across the sweep. `scales` evaluates λu for each listed λ.

    Raises:
        DomainError: some s ∉ (0, 1]
    """
    if any(not 0.0 < s <= 1.0 for s in s_grid):
        raise DomainError("Poincaré sweep needs every s in (0, 1]")
    region = _region(suite.mask)
    records = []
    for name, u in suite:
        if u.max_abs() == 0.0:
            continue
        for lam in scales:
            v = u * lam
            lhs = luxemburg_norm(v, phi, region)
            field_id = name if lam == 1.0 else f'{name}*{lam:g}'
            for s in s_grid:
                rhs = _ds_norm(v, s, phi) / (1.0 - 2.0 ** (-s))
                records.append(InequalityRecord('poincare', lhs, rhs, s=s, field_id=field_id))
    return records


def interpolation_check(u: GridField, r: float, s: float, t: float, phi: PhiFunction,
                        field_id: str = '') -> InequalityRecord:
    """
    ∥D^s u∥ against ∥D^r u∥^{(t−s)/(t−r)}·∥D^t u∥^{(s−r)/(t−r)}, norms in L^A.

    r = 0 uses ∥u∥_{L^A} for the lower norm. Degenerate triples (r = s or
    s = t) collapse to ratio 1 exactly.

    Raises:
        DomainError: ordering 0 ≤ r ≤ s ≤ t ≤ 1 violated
    """
    if not 0.0 <= r <= s <= t <= 1.0:
        raise DomainError(f"need 0 <= r <= s <= t <= 1, got ({r}, {s}, {t})")

    def norm(order: float) -> float:
        return luxemburg_norm(u, phi) if order == 0.0 else _ds_norm(u, order, phi)

    lhs = norm(s)
    if s == r or s == t:
        return InequalityRecord('interpolation', lhs, lhs, r=r, s=s, t=t, field_id=field_id, exact=1.0)
    theta = (s - r) / (t - r)
    rhs = norm(r) ** (1.0 - theta) * norm(t) ** theta
    return InequalityRecord('interpolation', lhs, rhs, r=r, s=s, t=t, field_id=field_id)


def spaces_decrease_shape(d: int, sigma: float) -> float:
    """C(σ) = 1/(d−1+σ)·(1 + 1/(1−2^{−σ})) + (1/σ)·1/(1−2^{−σ})."""
    geometric = 1.0 / (1.0 - 2.0 ** (-sigma))
    return (1.0 + geometric) / (d - 1.0 + sigma) + geometric / sigma


def spaces_decrease_check(u: GridField, sigma: float, s: float, phi: PhiFunction,
                          field_id: str = '') -> InequalityRecord:
    """
    ∥D^σ u∥_{L^A} against ∥D^s u∥_{L^A}, 0 < σ < s ≤ 1.

    The baseline multiplies the shape C(σ), so one fitted constant covers
    the whole (σ, s) grid.
    """
    if not 0.0 < sigma < s <= 1.0:
        raise DomainError(f"need 0 < σ < s <= 1, got σ={sigma}, s={s}")
    return InequalityRecord(
        'spaces_decrease', _ds_norm(u, sigma, phi), _ds_norm(u, s, phi),
        s=s, sigma=sigma, field_id=field_id, scale=spaces_decrease_shape(u.grid.d, sigma),
    )


def sobolev_check(u: GridField, s: float, phi: PhiFunction, mask: Optional[DomainMask] = None,
                  field_id: str = '', companion: Optional[PhiFunction] = None) -> InequalityRecord:
    """
    ∥u∥_{L^B(Ω)} against ∥D^s u∥_{L^A} with B the companion for γ = s/d.

    Raises:
        DomainError: companion construction fails (γ ∉ (0,1) or γ ≥ 1/q)
    """
    gamma = s / u.grid.d
    companion = companion or build_sobolev_companion(phi, gamma)
    region = _region(mask) if mask is not None else None
    return InequalityRecord('sobolev', luxemburg_norm(u, companion, region), _ds_norm(u, s, phi),
                            s=s, field_id=field_id)


def classical_sobolev_ratio(u: GridField, s: float, p: float, mask: Optional[DomainMask] = None) -> float:
    """∥u∥_{L^{p*}(Ω)}/∥D^s u∥_{L^p} with 1/p* = 1/p − s/d, for A = ℓ^p."""
    exponent = 1.0 / (1.0 / p - s / u.grid.d)
    region = _region(mask) if mask is not None else None
    return lp_norm(u, exponent, region) / lp_norm(riesz_gradient(u, s), p)


@dataclass
class ContinuityStudy:
    """Errors e_n = ∥D^{s_n}u − D^σ u∥_{L^A} along a sequence s_n → σ."""

    sigma: float
    s_sequence: List[float]
    errors: List[float]
    reference: float
    field_id: str = ''

    @property
    def decreasing(self) -> bool:
        """e_n strictly decreasing wherever |s_n − σ| strictly decreases, until it is negligible."""
        negligible = CONTINUITY_FLOOR * self.reference
        gaps = [abs(s - self.sigma) for s in self.s_sequence]
        for (gap_a, e_a), (gap_b, e_b) in zip(zip(gaps, self.errors), zip(gaps[1:], self.errors[1:])):
            if gap_b < gap_a and not (e_b < e_a or e_b <= negligible):
                return False
        return True

    @property
    def passed(self) -> bool:
        """Finite decreasing errors, and a relative tail error below CONTINUITY_RTOL near σ."""
        errors = np.asarray(self.errors)
        if not np.all(np.isfinite(errors)) or not self.decreasing:
            return False
        if abs(self.s_sequence[-1] - self.sigma) <= CONTINUITY_WINDOW:
            return bool(errors[-1] <= CONTINUITY_RTOL * self.reference + 1e-14)
        return True

    def to_rows(self) -> List[Dict[str, Any]]:
        return [{'inequality_id': 's_continuity', 's': s, 'sigma': self.sigma,
                 'field_id': self.field_id, 'lhs': e, 'rhs': self.reference,
                 'ratio': e / self.reference if self.reference else 0.0,
                 'pass': self.passed}
                for s, e in zip(self.s_sequence, self.errors)]


def s_continuity_study(u: GridField, sigma: float, s_sequence: Sequence[float], phi: PhiFunction,
                       field_id: str = '') -> ContinuityStudy:
    """e_n = ∥D^{s_n}u − D^σ u∥_{L^A} for s_n → σ within [0, 1]."""
    if not 0.0 <= sigma <= 1.0 or any(not 0.0 <= s <= 1.0 for s in s_sequence):
        raise DomainError("orders must lie in [0, 1]")
    target = riesz_gradient(u, sigma)
    errors = [0.0 if s == sigma else luxemburg_norm(riesz_gradient(u, s) - target, phi)
              for s in s_sequence]
    return ContinuityStudy(sigma, list(s_sequence), errors, luxemburg_norm(target, phi), field_id)


def interpolation_multiplier_boundedness(v: GridField, s: float, sigma: float, phi: PhiFunction,
                                         field_id: str = '') -> InequalityRecord:
    """∥T_{s,σ} v∥_{L^A}/∥v∥_{L^A} with symbol |ξ|^σ/(1 + |ξ|^s), 0 ≤ σ ≤ s ≤ 1."""
    if not 0.0 <= sigma <= s <= 1.0:
        raise DomainError(f"need 0 <= σ <= s <= 1, got σ={sigma}, s={s}")
    return InequalityRecord('multiplier', luxemburg_norm(interpolation_multiplier(v, s, sigma), phi),
                            luxemburg_norm(v, phi), s=s, sigma=sigma, field_id=field_id)


# -- sweeps -----------------------------------------------------------------------------

@dataclass
class SweepResult:
    """Records of a full inequality sweep plus the continuity studies."""

    records: List[InequalityRecord] = field(default_factory=list)
    continuity: List[ContinuityStudy] = field(default_factory=list)

    @property
    def failures(self) -> List[Dict[str, Any]]:
        failed = [r.to_row() for r in self.records if not r.passed]
        failed += [row for study in self.continuity if not study.passed for row in study.to_rows()[-1:]]
        return failed

    def rows(self) -> List[Dict[str, Any]]:
        rows = [r.to_row() for r in self.records]
        for study in self.continuity:
            rows += [{key: row.get(key) for key in INEQUALITY_COLUMNS} for row in study.to_rows()]
        return rows


def run_inequality_sweep(
    suite: TestSuite,
    phi: PhiFunction,
    s_grid: Sequence[float],
    baselines: Optional[Dict[str, float]] = None,
    include_sobolev: bool = True,
    continuity_depth: int = 14,
) -> SweepResult:
    """Every check of the lab over one suite and s grid."""
    if not s_grid:
        raise ConfigurationError("inequality sweep needs a nonempty s grid")
    s_grid = sorted(s_grid)
    records = poincare_sweep(suite, phi, s_grid, scales=(1.0, 10.0))
    continuity = []
    below_one = [s for s in s_grid if s < 1.0]
    sigma_mid = below_one[len(below_one) // 2] if below_one else None
    if sigma_mid is None:
        logger.info("s-continuity study skipped: no σ < 1 in the s grid")

    companions: Dict[float, PhiFunction] = {}
    if include_sobolev:
        for s in s_grid:
            try:
                companions[s] = build_sobolev_companion(phi, s / suite.grid.d)
            except DomainError as e:
                logger.debug("sobolev check skipped at s=%.3g: %s", s, e)

    for name, u in suite:
        records.append(interpolation_check(u, 0.0, 0.5, 1.0, phi, field_id=name))
        for r, s, t in zip(s_grid, s_grid[1:], s_grid[2:]):
            records.append(interpolation_check(u, r, s, t, phi, field_id=name))
        for i, sigma in enumerate(s_grid):
            for s in s_grid[i + 1:]:
                records.append(spaces_decrease_check(u, sigma, s, phi, field_id=name))
        for s in s_grid:
            for sigma in (0.0, 0.5 * s, s):
                records.append(interpolation_multiplier_boundedness(u, s, sigma, phi, field_id=name))
        for s, companion in companions.items():
            records.append(sobolev_check(u, s, phi, suite.mask, field_id=name, companion=companion))
        if sigma_mid is not None:
            sequence = [sigma_mid + 2.0 ** (-n) for n in range(1, continuity_depth + 1)
                        if sigma_mid + 2.0 ** (-n) <= 1.0]
            continuity.append(s_continuity_study(u, sigma_mid, sequence, phi, field_id=name))

    if baselines is not None:
        records = apply_baselines(records, baselines)
    logger.info("inequality sweep: %d records over %d fields", len(records), len(suite))
    return SweepResult(records, continuity)
