"""
Prox inversion, implicit regularizers and property audits

A learned prox f = grad psi is the proximal operator of

    R(v) = psi*(v) - 1/2 |v|^2,

where psi* is the convex conjugate. At a point x_hat with a preimage y
(f(y) = x_hat) the conjugate is psi*(x_hat) = <x_hat, y> - psi(y), hence

    R(x_hat) = <x_hat, y> - psi(y) - 1/2 |x_hat|^2.

The preimage is found by minimising psi(y) - <x_hat, y>, which is strongly
convex whenever psi carries a quadratic term (alpha > 0, or the mean channel
of the centred variants). R is only defined up to an additive constant; the
anchored mode subtracts its value at a reference point.

The audits sample inputs and report the largest deviation from a structural
property (monotone gradient, equivariance, homogeneity, Jacobian symmetry,
prox optimality, nonnegative z-path weights) together with the worst case.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core.rng import Rng
from .core.signal import as_signal, psnr_batch
from .errors import ConfigError, IncompatibleVariantError, InversionError
from .icnn import IcnnParams
from .parallel import map_rows
from .potential import ProxModel, VariantKind

logger = logging.getLogger(__name__)

RowMap = Callable[[np.ndarray], np.ndarray]

AUDIT_SCALES = (0.1, 1.0, 10.0)
SCALE_GRID = (0.1, 0.5, 2.0, 10.0)
SHIFT_GRID = (-5.0, -0.3, 0.3, 5.0)
AFFINE_GRID = tuple(itertools.product((0.25, 0.5, 1.0, 2.0, 4.0), (-0.5, 0.0, 0.5)))
BRIGHTNESS_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


def brightness_grid(alphas: Sequence[float] = BRIGHTNESS_ALPHAS) -> List[Tuple[float, float]]:
    """Group elements g(x) = alpha x + (1 - alpha), a brightness change of unit-peak images"""
    return [(float(a), 1.0 - float(a)) for a in alphas]


def scale_grid(scales: Sequence[float] = SCALE_GRID) -> List[Tuple[float, float]]:
    return [(float(a), 0.0) for a in scales]


def shift_grid(shifts: Sequence[float] = SHIFT_GRID) -> List[Tuple[float, float]]:
    return [(1.0, float(b)) for b in shifts]


@dataclass(frozen=True)
class InversionSettings:
    """Stopping rule and line-search constants for prox inversion"""
    tol: float = 1e-8
    max_iter: int = 10000
    shrink: float = 0.5
    armijo: float = 1e-4
    initial_step: float = 1.0
    max_step: float = 1e6
    max_backtracks: int = 60
    # Relative slack on the sufficient-decrease test for values near roundoff
    roundoff: float = 1e-14

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.shrink < 1:
            raise ConfigError(f"shrink must lie in (0, 1), got {self.shrink}")
        if not 0 < self.armijo < 1:
            raise ConfigError(f"armijo must lie in (0, 1), got {self.armijo}")
        if not 0 < self.initial_step <= self.max_step:
            raise ConfigError("Need 0 < initial_step <= max_step")


@dataclass
class InversionResult:
    """Per-row preimages y with f(y) ~ x, their residuals and iteration counts"""
    y: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _require_potential(model: ProxModel) -> None:
    if model.kind is VariantKind.NORM_TRICK:
        raise IncompatibleVariantError(
            "The normalization trick is not a proximal operator; it has no regularizer"
        )


def _objective(model: ProxModel, y: np.ndarray, target: np.ndarray):
    value, grad = model.value_and_grad(y)
    return value - np.sum(target * y, axis=1), grad - target


def solve_inverse(model: ProxModel, x, settings: Optional[InversionSettings] = None) -> InversionResult:
    """
    Minimise psi(y) - <x, y> row by row with backtracking gradient descent

    Every row starts at y = x with the initial step. An accepted step doubles
    the next trial step (up to max_step); a rejected one multiplies it by
    ``shrink``. Rows stop when |grad psi(y) - x|_inf <= tol, when they run out
    of iterations, or when the line search stalls. Never raises on
    non-convergence; see ``converged``.
    """
    _require_potential(model)
    s = settings or InversionSettings()
    arr = as_signal(x)
    target = np.atleast_2d(arr).copy()
    rows = target.shape[0]

    y = target.copy()
    phi, g = _objective(model, y, target)
    residual = np.max(np.abs(g), axis=1)
    best_y, best_residual = y.copy(), residual.copy()
    step = np.full(rows, s.initial_step)
    iterations = np.zeros(rows, dtype=np.int64)
    stalled = np.zeros(rows, dtype=bool)

    for _ in range(s.max_iter):
        active = np.flatnonzero((residual > s.tol) & ~stalled)
        if active.size == 0:
            break
        g2 = np.sum(g[active] ** 2, axis=1)
        trial = step[active].copy()
        pending = np.arange(active.size)
        for _ in range(s.max_backtracks):
            idx = active[pending]
            candidate = y[idx] - trial[pending, None] * g[idx]
            phi_c, g_c = _objective(model, candidate, target[idx])
            slack = s.roundoff * (1.0 + np.abs(phi[idx]))
            ok = phi_c <= phi[idx] - s.armijo * trial[pending] * g2[pending] + slack
            good = idx[ok]
            y[good], phi[good], g[good] = candidate[ok], phi_c[ok], g_c[ok]
            step[good] = np.minimum(trial[pending][ok] / s.shrink, s.max_step)
            trial[pending[~ok]] *= s.shrink
            pending = pending[~ok]
            if pending.size == 0:
                break
        if pending.size:
            stuck = active[pending]
            stalled[stuck] = True
            logger.debug("Line search stalled on %d row(s)", stuck.size)
        moved = np.setdiff1d(active, active[pending]) if pending.size else active
        iterations[moved] += 1
        residual[moved] = np.max(np.abs(g[moved]), axis=1)
        better = moved[residual[moved] < best_residual[moved]]
        best_y[better], best_residual[better] = y[better], residual[better]

    converged = best_residual <= s.tol
    if not np.all(converged):
        logger.debug(
            "Inversion failed on %d of %d row(s); worst residual %.3e",
            int(np.sum(~converged)), rows, float(best_residual.max()),
        )
    if arr.ndim == 1:
        return InversionResult(best_y[0], best_residual[:1], iterations[:1], converged[:1])
    return InversionResult(best_y, best_residual, iterations, converged)


def invert_prox(model: ProxModel, x, settings: Optional[InversionSettings] = None) -> np.ndarray:
    """
    Find y with prox_apply(model, y) = x

    Args:
        model: Learned prox with a strongly convex potential
        x: Signal or stack of signals in the range of the prox
        settings: Inversion settings

    Returns:
        The preimage(s), same shape as ``x``

    Raises:
        InversionError: When any row misses the residual tolerance
    """
    result = solve_inverse(model, x, settings)
    if not result.all_converged:
        failed = ~result.converged
        raise InversionError(
            float(result.residual[failed].max()), int(result.iterations[failed].max())
        )
    return result.y


def moreau_regularizer(model: ProxModel, x_hat, y) -> np.ndarray:
    """R(x_hat) = <x_hat, y> - psi(y) - 1/2 |x_hat|^2 for preimages y of x_hat"""
    x_hat = np.atleast_2d(as_signal(x_hat))
    y = np.atleast_2d(as_signal(y))
    psi = np.atleast_1d(model.potential_value(y))
    return np.sum(x_hat * y, axis=1) - psi - 0.5 * np.sum(x_hat**2, axis=1)


@dataclass
class RegularizerResult:
    """R at each point; NaN where inversion failed"""
    points: np.ndarray
    values: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def regularizer_table(
    model: ProxModel,
    points,
    settings: Optional[InversionSettings] = None,
    anchor=None,
) -> RegularizerResult:
    """
    Evaluate R at many points without failing on individual rows

    Args:
        model: Learned prox
        points: Stack of signals
        settings: Inversion settings
        anchor: Optional reference point; its R value is subtracted

    Raises:
        InversionError: When the anchor itself cannot be inverted
    """
    pts = np.atleast_2d(as_signal(points))
    result = solve_inverse(model, pts, settings)
    values = np.full(pts.shape[0], np.nan)
    ok = result.converged
    if np.any(ok):
        values[ok] = moreau_regularizer(model, pts[ok], result.y[ok])
    if anchor is not None:
        values = values - regularizer_eval(model, anchor, settings)
    return RegularizerResult(pts, values, result.residual, result.iterations, result.converged)


def regularizer_eval(
    model: ProxModel, x_hat, settings: Optional[InversionSettings] = None, anchor=None
):
    """
    Implicit regularizer R(x_hat), optionally anchored

    Returns a float for one signal and an array for a stack.

    Raises:
        InversionError: When inversion fails at any point
    """
    arr = as_signal(x_hat)
    y = invert_prox(model, arr, settings)
    values = moreau_regularizer(model, arr, y)
    if anchor is not None:
        values = values - regularizer_eval(model, anchor, settings)
    return float(values[0]) if arr.ndim == 1 else values


# Audits ----------------------------------------------------------------------

@dataclass
class AuditReport:
    """Largest deviation from a property over sampled cases"""
    name: str
    max_deviation: float
    worst_case: Any
    samples: int
    violations: int
    threshold: float
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: {verdict} (max deviation {self.max_deviation:.3e}, "
            f"{self.violations}/{self.samples} above {self.threshold:.1e})"
        )


def _log_verdict(report: AuditReport) -> AuditReport:
    if report.passed:
        logger.info(report.summary())
    else:
        logger.warning(report.summary())
    return report


def _inputs(inputs, samples: int, n: int, rng: Rng) -> np.ndarray:
    if inputs is not None:
        return np.atleast_2d(as_signal(inputs))
    return rng.normal((samples, n))


def convexity_audit(
    gradient: RowMap,
    n: int,
    pairs: int,
    rng: Rng,
    scales: Sequence[float] = AUDIT_SCALES,
    tol: float = 1e-8,
) -> AuditReport:
    """
    Sampled monotonicity of a gradient field

    Pairs (x, x') are drawn from N(0, I) and scaled by ``scales`` in turn. A pair
    violates when <grad(x) - grad(x'), x - x'> < -tol |x - x'|^2.

    Args:
        gradient: Maps a (batch, n) stack to gradients of the same shape
        n: Signal length
        pairs: Number of pairs
        rng: Sampling stream
        scales: Input scales cycled over the pairs
        tol: Relative slack

    Returns:
        AuditReport whose max_deviation is the largest normalised negative gap
    """
    if pairs < 1:
        raise ConfigError(f"pairs must be at least 1, got {pairs}")
    scale = np.asarray(scales, dtype=np.float64)[np.arange(pairs) % len(scales)][:, None]
    x = rng.normal((pairs, n)) * scale
    x_prime = rng.normal((pairs, n)) * scale
    d = x - x_prime
    gap = np.sum((map_rows(gradient, x) - map_rows(gradient, x_prime)) * d, axis=1)
    dist2 = np.sum(d * d, axis=1)
    normalized = gap / dist2
    worst = int(np.argmin(normalized))
    return _log_verdict(AuditReport(
        name="convexity",
        max_deviation=max(0.0, -float(normalized[worst])),
        worst_case={"x": x[worst], "x_prime": x_prime[worst], "scale": float(scale[worst, 0])},
        samples=pairs,
        violations=int(np.sum(gap < -tol * dist2)),
        threshold=tol,
        details={"min_gap": float(gap.min()), "min_normalized_gap": float(normalized[worst])},
    ))


def equivariance_audit(
    prox: RowMap,
    n: int,
    grid: Sequence[Tuple[float, float]],
    samples: int,
    rng: Rng,
    inputs=None,
    threshold: float = 1e-6,
    peak: float = 1.0,
) -> AuditReport:
    """
    Deviation from f(a x + b 1) = a f(x) + b 1 over a grid of group elements

    The deviation of one case is |f(a x + b) - (a f(x) + b)|_inf / (1 + |a f(x) + b|_inf).
    The PSNR between f(g(x)) and g(f(x)) is reported per group element as well,
    which is the brightness-robustness measure for unit-peak images.

    Args:
        prox: Maps a (batch, n) stack to outputs of the same shape
        n: Signal length
        grid: (a, b) pairs with a > 0
        samples: Number of random inputs when ``inputs`` is not given
        rng: Sampling stream
        inputs: Optional (batch, n) stack to audit on instead of N(0, I) draws
        threshold: Deviation above which a case counts as a violation
        peak: PSNR peak value
    """
    for a, _ in grid:
        if not a > 0:
            raise ConfigError(f"Group scales must be positive, got {a}")
    x = _inputs(inputs, samples, n, rng)
    fx = map_rows(prox, x)
    worst_dev, worst_case = 0.0, None
    violations, per_element, all_psnr = 0, [], []
    for a, b in grid:
        expected = a * fx + b
        observed = map_rows(prox, a * x + b)
        dev = np.max(np.abs(observed - expected), axis=1) / (1.0 + np.max(np.abs(expected), axis=1))
        psnrs = psnr_batch(observed, expected, peak)
        all_psnr.append(psnrs)
        violations += int(np.sum(dev > threshold))
        i = int(np.argmax(dev))
        if dev[i] > worst_dev or worst_case is None:
            worst_dev, worst_case = float(dev[i]), {"input": x[i], "a": a, "b": b}
        per_element.append({
            "a": a,
            "b": b,
            "max_deviation": float(dev.max()),
            "mean_psnr": float(psnrs.mean()),
            "min_psnr": float(psnrs.min()),
        })
    psnr_all = np.concatenate(all_psnr)
    return _log_verdict(AuditReport(
        name="equivariance",
        max_deviation=worst_dev,
        worst_case=worst_case,
        samples=x.shape[0] * len(grid),
        violations=violations,
        threshold=threshold,
        details={
            "min_psnr": float(psnr_all.min()),
            "mean_psnr": float(psnr_all.mean()),
            "per_element": per_element,
        },
    ))


def homogeneity_audit(
    fn: RowMap,
    n: int,
    degree: int,
    scales: Sequence[float],
    samples: int,
    rng: Rng,
    inputs=None,
    threshold: float = 1e-8,
) -> AuditReport:
    """
    Deviation from fn(a x) = a^degree fn(x) for a > 0

    ``fn`` may return scalars (batch,) or vectors (batch, m); the deviation of
    a case is |fn(a x) - a^k fn(x)|_inf / (a^k (1 + |fn(x)|_inf)).
    """
    x = _inputs(inputs, samples, n, rng)
    rows = x.shape[0]
    fx = map_rows(fn, x).reshape(rows, -1)
    bound = 1.0 + np.max(np.abs(fx), axis=1)
    worst_dev, worst_case, violations = 0.0, None, 0
    for a in scales:
        if not a > 0:
            raise ConfigError(f"Scales must be positive, got {a}")
        factor = float(a) ** degree
        fa = map_rows(fn, a * x).reshape(rows, -1)
        dev = np.max(np.abs(fa - factor * fx), axis=1) / (factor * bound)
        violations += int(np.sum(dev > threshold))
        i = int(np.argmax(dev))
        if dev[i] > worst_dev or worst_case is None:
            worst_dev, worst_case = float(dev[i]), {"input": x[i], "a": float(a)}
    return _log_verdict(AuditReport(
        name=f"homogeneity-{degree}",
        max_deviation=worst_dev,
        worst_case=worst_case,
        samples=rows * len(scales),
        violations=violations,
        threshold=threshold,
        details={"degree": degree, "scales": [float(a) for a in scales]},
    ))


def finite_difference_jacobian(prox: RowMap, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """J[i, j] = d f_i / d x_j by central differences"""
    n = x.shape[-1]
    offsets = np.eye(n) * step
    values = map_rows(prox, np.concatenate([x + offsets, x - offsets]))
    return (values[:n] - values[n:]).T / (2.0 * step)


def jacobian_symmetry_audit(
    prox: RowMap,
    n: int,
    points: int,
    rng: Rng,
    step: float = 1e-5,
    threshold: float = 1e-5,
    inputs=None,
) -> AuditReport:
    """
    Largest |dF_i/dx_j - dF_j/dx_i| over sampled points

    A gradient field has a symmetric Jacobian wherever it is differentiable.
    """
    x = _inputs(inputs, points, n, rng)
    worst_dev, worst_case, violations = 0.0, None, 0
    for k in range(x.shape[0]):
        jac = finite_difference_jacobian(prox, x[k], step)
        asym = np.abs(jac - jac.T)
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        dev = float(asym[i, j])
        violations += int(dev > threshold)
        if dev > worst_dev or worst_case is None:
            worst_dev, worst_case = dev, {"input": x[k], "i": int(i), "j": int(j)}
    return _log_verdict(AuditReport(
        name="jacobian-symmetry",
        max_deviation=worst_dev,
        worst_case=worst_case,
        samples=x.shape[0],
        violations=violations,
        threshold=threshold,
        details={"step": step},
    ))


def _ball(rng: Rng, count: int, n: int, radius: float) -> np.ndarray:
    direction = rng.normal((count, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / n))


def prox_objective_audit(
    model: ProxModel,
    points: int,
    perturbations: int,
    rng: Rng,
    radius: float = 0.1,
    settings: Optional[InversionSettings] = None,
    slack: float = 1e-6,
    inputs=None,
) -> AuditReport:
    """
    Check that f(y) minimises 1/2 |v - y|^2 + R(v) against nearby v

    R at f(y) is exact because y is a known preimage; R at each perturbation
    f(y) + delta (|delta| <= radius) needs an inversion. Perturbations whose
    inversion fails are counted as unresolved, not as violations.
    """
    _require_potential(model)
    n = model.input_dim
    y = _inputs(inputs, points, n, rng)
    psi_y, x_hat = model.value_and_grad(y)
    r_center = np.sum(x_hat * y, axis=1) - psi_y - 0.5 * np.sum(x_hat**2, axis=1)
    center_obj = 0.5 * np.sum((x_hat - y) ** 2, axis=1) + r_center

    count = y.shape[0]
    owner = np.repeat(np.arange(count), perturbations)
    v = x_hat[owner] + _ball(rng, count * perturbations, n, radius)
    result = solve_inverse(model, v, settings)
    ok = result.converged
    objective = np.full(v.shape[0], np.inf)
    if np.any(ok):
        objective[ok] = (
            0.5 * np.sum((v[ok] - y[owner[ok]]) ** 2, axis=1)
            + moreau_regularizer(model, v[ok], result.y[ok])
        )
    gain = center_obj[owner] - objective
    violations = int(np.sum(ok & (gain > slack)))
    i = int(np.argmax(np.where(ok, gain, -np.inf))) if np.any(ok) else 0
    return _log_verdict(AuditReport(
        name="prox-objective",
        max_deviation=max(0.0, float(gain[i])) if np.any(ok) else 0.0,
        worst_case={"y": y[owner[i]], "v": v[i]},
        samples=int(v.shape[0]),
        violations=violations,
        threshold=slack,
        details={"unresolved": int(np.sum(~ok)), "radius": radius},
    ))


def constraint_audit(params: IcnnParams) -> AuditReport:
    """Nonnegativity of every z-path weight"""
    names = params.z_path_names()
    mins = {name: float(params[name].min()) for name in names}
    worst = min(mins, key=mins.get)
    negatives = sum(int(np.sum(params[name] < 0)) for name in names)
    return _log_verdict(AuditReport(
        name="constraint",
        max_deviation=max(0.0, -mins[worst]),
        worst_case={"parameter": worst, "index": int(np.argmin(params[worst]))},
        samples=sum(params[name].size for name in names),
        violations=negatives,
        threshold=0.0,
        details={"min_z_weight": mins[worst]},
    ))
