"""
Desk-scale experiments

Each ``run_*`` function is one CLI command without the command-line layer:
it takes plain arguments, returns checkpoints and reports, and leaves
writing files to the caller. All randomness comes from named streams of the
command's seed (``data``, ``init``, ``noise``, ``eval``, ``audit``).
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import (
    AFFINE_GRID,
    SCALE_GRID,
    AuditReport,
    InversionSettings,
    brightness_grid,
    constraint_audit,
    convexity_audit,
    equivariance_audit,
    homogeneity_audit,
    jacobian_symmetry_audit,
    prox_objective_audit,
    regularizer_table,
    scale_grid,
    shift_grid,
)
from .checkpoint import Checkpoint
from .core.rng import Rng
from .core.signal import gaussian_corrupt, psnr_batch
from .core.splitnormal import SplitNormalParams, split_normal_neglogpdf, split_normal_prox_oracle
from .data.patches import PatchSpec, tile_image, untile_image
from .data.pnm import load_pnm, write_pnm
from .data.sources import PatchSource, SplitNormalSource, image_paths, split_paths
from .errors import ConfigError, IncompatibleVariantError, ShapeError
from .icnn import Activation
from .parallel import map_rows
from .potential import ProxModel, VariantKind, build_model, parse_variant
from .report import Report, ReportRow, wide_report
from .training import EvalSet, TrainConfig, train

logger = logging.getLogger(__name__)

SPLIT_NORMAL = SplitNormalParams(mu=0.0, sigma1=1.0, sigma2=2.0)
SPLIT_NORMAL_WIDTHS = (16, 16)
DENOISER_WIDTHS = (128, 128)
NOISE_SWEEP_SIGMAS = (0.05, 0.1, 0.2, 0.3, 0.4)
SPLIT_NORMAL_COLUMNS = ("x", "learned_prox", "oracle_prox", "potential", "regularizer")
INVERT_COLUMNS = ("point", "regularizer", "residual", "iterations", "converged")

# Evaluation windows for the split-normal summary metrics
PROX_WINDOW = (-3.0, 3.0)
REGULARIZER_WINDOW = (-2.0, 2.0)


def grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid start, start + step, ..., stop"""
    if not step > 0 or stop < start:
        raise ConfigError(f"Invalid grid {start}:{stop}:{step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


# Split normal ----------------------------------------------------------------

def realized_splitnormal_variant(kind: VariantKind) -> VariantKind:
    """
    Variant actually trained on one-dimensional data

    With n = 1 the centred part of x vanishes, so the affine-equivariant
    construction reduces to the identity map; the scale-equivariant
    construction carries all the equivariance a 1-D prox can have.
    """
    if kind is VariantKind.AFFINE:
        logger.info("n=1: training the 'ae' variant as the scale-equivariant construction")
        return VariantKind.SCALE
    if kind in (VariantKind.SHIFT, VariantKind.NORM_TRICK):
        logger.warning("n=1: the %r construction is the identity map", kind.value)
    return kind


@dataclass
class SplitNormalRun:
    checkpoint: Checkpoint
    table: Report
    summary: Report


def split_normal_table(
    model: ProxModel,
    xs: np.ndarray,
    sigma: float,
    name: str,
    settings: Optional[InversionSettings] = None,
    params: SplitNormalParams = SPLIT_NORMAL,
) -> Report:
    """
    Wide table over a 1-D grid: learned prox, oracle prox, potential and R / sigma^2

    The regularizer column is anchored at x = 0 so it is comparable with
    -log p(x) + log p(0). Cells are empty where a value does not exist
    (normalization trick) or inversion failed.
    """
    points = xs.reshape(-1, 1)
    learned = model.prox_apply(points)[:, 0]
    oracle = split_normal_prox_oracle(xs, sigma**2, params)
    potential: List[Optional[float]] = [None] * len(xs)
    regularizer: List[Optional[float]] = [None] * len(xs)
    if model.kind is not VariantKind.NORM_TRICK:
        potential = [float(v) for v in model.potential_value(points)]
        table = regularizer_table(model, points, settings)
        anchor = regularizer_table(model, np.zeros((1, 1)), settings)
        if anchor.converged[0]:
            scaled = (table.values - anchor.values[0]) / sigma**2
            regularizer = [float(v) if ok else None for v, ok in zip(scaled, table.converged)]
        else:
            logger.warning("Could not invert the prox at x=0; regularizer column left empty")
    report = wide_report(name, SPLIT_NORMAL_COLUMNS)
    for i, x in enumerate(xs):
        report.add_values(
            x=float(x),
            learned_prox=float(learned[i]),
            oracle_prox=float(oracle[i]),
            potential=potential[i],
            regularizer=regularizer[i],
        )
    return report


def split_normal_summary(
    model: ProxModel, table: Report, sigma: float, seed: int, name: str,
    params: SplitNormalParams = SPLIT_NORMAL,
) -> Report:
    """Acceptance metrics of a split-normal run in the long format"""
    xs = np.asarray(table.column("x"), dtype=np.float64)
    learned = np.asarray(table.column("learned_prox"), dtype=np.float64)
    oracle = np.asarray(table.column("oracle_prox"), dtype=np.float64)
    summary = Report(name)
    tag = model.kind.value

    def row(metric: str, value: float) -> None:
        summary.add(ReportRow("splitnormal", tag, "sigma", sigma, metric, float(value), seed))

    window = (xs >= PROX_WINDOW[0] - 1e-12) & (xs <= PROX_WINDOW[1] + 1e-12)
    row("max_prox_error", np.max(np.abs(learned[window] - oracle[window])))
    doubled = model.prox_apply(2.0 * xs.reshape(-1, 1))[:, 0]
    row("scale_deviation_a2", np.max(np.abs(doubled - 2.0 * learned)))
    shifted = model.prox_apply(xs.reshape(-1, 1) + 1.0)[:, 0]
    row("shift_deviation_b1", np.max(np.abs(shifted - (learned + 1.0))))

    reg = np.array([np.nan if v is None else v for v in table.column("regularizer")], dtype=np.float64)
    reg_window = (xs >= REGULARIZER_WINDOW[0] - 1e-12) & (xs <= REGULARIZER_WINDOW[1] + 1e-12)
    if np.all(np.isfinite(reg[reg_window])):
        target = split_normal_neglogpdf(xs, params) - split_normal_neglogpdf(0.0, params)
        row("max_regularizer_error", np.max(np.abs(reg[reg_window] - target[reg_window])))
    return summary


def run_train_splitnormal(
    kind: str,
    seed: int,
    cfg: Optional[TrainConfig] = None,
    widths: Sequence[int] = SPLIT_NORMAL_WIDTHS,
    alpha: float = 0.0,
    activation: Activation = Activation.PAIRWISE_MAX,
    xs: Optional[np.ndarray] = None,
    settings: Optional[InversionSettings] = None,
) -> SplitNormalRun:
    """
    Train on split-normal draws corrupted with Gaussian noise and tabulate the result

    Args:
        kind: Requested variant ("lpn", "scale", "shift", "ae", "normtrick")
        seed: Root seed for data, init and noise
        cfg: Training configuration (defaults to the split-normal preset)
        widths: ICNN hidden widths
        alpha: Strong-convexity weight
        activation: Pairing activation of equivariant models
        xs: Evaluation grid (defaults to -4 .. 4 step 0.05)
        settings: Inversion settings for the regularizer column
    """
    requested = parse_variant(kind)
    realized = realized_splitnormal_variant(requested)
    cfg = (cfg or TrainConfig.split_normal()).override(seed=seed)
    rng = Rng(seed)
    model = build_model(realized, 1, widths, rng.stream("init"), alpha, activation)
    source = SplitNormalSource(SPLIT_NORMAL, rng.stream("data"))
    trained, history = train(model, source, cfg)

    xs = grid(-4.0, 4.0, 0.05) if xs is None else np.asarray(xs, dtype=np.float64)
    name = f"splitnormal-{requested.value}"
    table = split_normal_table(trained, xs, cfg.sigma_noise, name, settings)
    summary = split_normal_summary(trained, table, cfg.sigma_noise, seed, f"{name}-summary")
    meta = {
        "experiment": "splitnormal",
        "seed": seed,
        "requested_variant": requested.value,
        "variant": realized.value,
        "train_config": cfg.to_dict(),
        "model": trained.to_dict(),
        "split_normal": {"mu": SPLIT_NORMAL.mu, "sigma1": SPLIT_NORMAL.sigma1, "sigma2": SPLIT_NORMAL.sigma2},
    }
    table.meta.update(meta)
    summary.meta.update(meta)
    checkpoint = Checkpoint(
        trained, seed, cfg, history,
        {"experiment": "splitnormal", "requested_variant": requested.value},
    )
    return SplitNormalRun(checkpoint, table, summary)


# Patch denoisers -------------------------------------------------------------

def patch_spec_for(checkpoint: Checkpoint) -> PatchSpec:
    """Patch geometry stored with a checkpoint, else the square one matching input_dim"""
    stored = checkpoint.metadata.get("patch")
    if stored:
        return PatchSpec(int(stored[0]), int(stored[1]))
    n = checkpoint.model.input_dim
    side = math.isqrt(n)
    if side * side != n:
        raise ShapeError(f"Cannot infer a square patch for input dimension {n}; pass the patch size")
    return PatchSpec(side, side)


def eval_source(spec: PatchSpec, seed: int, data_dir=None) -> PatchSource:
    """
    Evaluation patches: the held-out split of ``data_dir``, or synthetic images

    The eval stream is independent of the training streams of the same seed.
    """
    rng = Rng(seed).stream("eval")
    if data_dir is None:
        return PatchSource.synthetic(spec, rng)
    _, test = split_paths(image_paths(data_dir), seed)
    return PatchSource.from_paths(test, spec, rng.stream("crops"))


def run_train_denoiser(
    kind: str,
    seed: int,
    cfg: Optional[TrainConfig] = None,
    patch: PatchSpec = PatchSpec(),
    widths: Sequence[int] = DENOISER_WIDTHS,
    alpha: float = 0.0,
    activation: Activation = Activation.PAIRWISE_MAX,
    data_dir=None,
    eval_patches: int = 64,
) -> Checkpoint:
    """
    Train a patch denoiser on PGM/PPM images or synthetic images

    With ``data_dir`` the images are split 80/20 by the seed; training crops
    come from the first part and the history's eval PSNR from the second.
    """
    variant = parse_variant(kind)
    cfg = (cfg or TrainConfig.denoiser(patch.dim, variant)).override(seed=seed)
    rng = Rng(seed)
    model = build_model(variant, patch.dim, widths, rng.stream("init"), alpha, activation)

    if data_dir is None:
        source = PatchSource.synthetic(patch, rng.stream("data"))
        data_meta: Dict[str, object] = {"data": "synthetic"}
    else:
        train_paths, test_paths = split_paths(image_paths(data_dir), seed)
        source = PatchSource.from_paths(train_paths, patch, rng.stream("data"))
        data_meta = {
            "data": str(data_dir),
            "train_files": [p.name for p in train_paths],
            "test_files": [p.name for p in test_paths],
        }
    evals = EvalSet.draw(
        eval_source(patch, seed, data_dir), eval_patches, cfg.sigma_noise, rng.stream("eval").stream("noise")
    )
    trained, history = train(model, source, cfg, evals)
    metadata = {"experiment": "denoiser", "patch": [patch.height, patch.width], **data_meta}
    return Checkpoint(trained, seed, cfg, history, metadata)


@dataclass
class TaggedModel:
    """A model under evaluation and the name it appears under in reports"""
    tag: str
    model: ProxModel


def evaluation_models(checkpoints: Sequence[Tuple[str, Checkpoint]], with_normtrick: bool = False) -> List[TaggedModel]:
    """Models to evaluate; plain checkpoints optionally also contribute their normalization-trick wrapper"""
    if not checkpoints:
        raise ConfigError("At least one checkpoint is required")
    dims = {ckpt.model.input_dim for _, ckpt in checkpoints}
    if len(dims) != 1:
        raise ShapeError(f"Checkpoints disagree on input dimension: {sorted(dims)}")
    models = []
    for tag, ckpt in checkpoints:
        models.append(TaggedModel(tag, ckpt.model))
        if with_normtrick and ckpt.model.kind is VariantKind.PLAIN:
            models.append(TaggedModel(f"{tag}+normtrick", ckpt.model.as_norm_trick()))
    return models


def run_eval_noise_sweep(
    checkpoints: Sequence[Tuple[str, Checkpoint]],
    seed: int,
    sigmas: Sequence[float] = NOISE_SWEEP_SIGMAS,
    patches: int = 200,
    data_dir=None,
    with_normtrick: bool = False,
) -> Report:
    """
    Mean PSNR of each model's denoised patches against the clean ones, per test sigma

    Every model sees the same clean patches and the same noise. A ``noisy``
    row per sigma scores the unprocessed input.
    """
    models = evaluation_models(checkpoints, with_normtrick)
    spec = patch_spec_for(checkpoints[0][1])
    if spec.dim != models[0].model.input_dim:
        raise ShapeError(f"Patch {spec.height}x{spec.width} does not match input dimension {models[0].model.input_dim}")
    clean = eval_source(spec, seed, data_dir).batch(patches)
    report = Report("noise-sweep", meta={"experiment": "noise-sweep", "seed": seed, "sigmas": [float(s) for s in sigmas], "patches": patches})
    noise = Rng(seed).stream("noise")
    for sigma in sigmas:
        noisy = gaussian_corrupt(clean, sigma, noise.stream(f"sigma={sigma!r}"))
        report.add(ReportRow("noise-sweep", "noisy", "sigma", float(sigma), "psnr", float(np.mean(psnr_batch(noisy, clean))), seed))
        for entry in models:
            denoised = map_rows(entry.model.prox_apply, noisy)
            value = float(np.mean(psnr_batch(denoised, clean)))
            report.add(ReportRow("noise-sweep", entry.tag, "sigma", float(sigma), "psnr", value, seed))
            logger.info("%s sigma=%g: %.2f dB", entry.tag, sigma, value)
    return report


def run_eval_affine(
    checkpoints: Sequence[Tuple[str, Checkpoint]],
    seed: int,
    alphas: Sequence[float] = tuple(round(0.1 * k, 1) for k in range(1, 11)),
    patches: int = 100,
    sigma: float = 0.1,
    data_dir=None,
    with_normtrick: bool = False,
) -> Report:
    """
    Equivariance PSNR between f(g(y)) and g(f(y)) for g(y) = alpha y + (1 - alpha)

    The inputs y are noisy evaluation patches at the training noise level.
    """
    models = evaluation_models(checkpoints, with_normtrick)
    spec = patch_spec_for(checkpoints[0][1])
    clean = eval_source(spec, seed, data_dir).batch(patches)
    noisy = gaussian_corrupt(clean, sigma, Rng(seed).stream("noise"))
    report = Report("eval-affine", meta={"experiment": "eval-affine", "seed": seed, "alphas": [float(a) for a in alphas], "patches": patches, "sigma": sigma})
    for entry in models:
        audit = equivariance_audit(
            entry.model.prox_apply, entry.model.input_dim, brightness_grid(alphas), patches,
            Rng(seed).stream("audit"), inputs=noisy,
        )
        for element in audit.details["per_element"]:
            alpha = float(element["a"])
            report.add(ReportRow("eval-affine", entry.tag, "alpha", alpha, "equivariance_psnr", element["mean_psnr"], seed))
            report.add(ReportRow("eval-affine", entry.tag, "alpha", alpha, "equivariance_deviation", element["max_deviation"], seed))
    return report


# Audits ----------------------------------------------------------------------

@dataclass
class AuditSettings:
    """Sample counts for run_audit"""
    pairs: int = 10000
    samples: int = 200
    jacobian_points: int = 100
    objective_points: int = 20
    perturbations: int = 50
    radius: float = 0.1
    inversion: InversionSettings = field(default_factory=lambda: InversionSettings(max_iter=2000))


def model_audits(model: ProxModel, seed: int, settings: Optional[AuditSettings] = None) -> List[AuditReport]:
    """
    Structural audits that apply to a model's variant

    Always: z-path constraint, gradient monotonicity, Jacobian symmetry.
    Scale-equivariant variants add homogeneity of the potential (degree 2)
    and the prox (degree 1); equivariant variants add the matching
    equivariance grid; variants with a potential add the prox-objective check.
    """
    s = settings or AuditSettings()
    n = model.input_dim
    audit_rng = Rng(seed).stream("audit")
    kind = model.kind
    reports = [
        constraint_audit(model.params),
        convexity_audit(model.prox_apply, n, s.pairs, audit_rng.stream("convexity")),
    ]
    if kind.scale_equivariant and kind is not VariantKind.NORM_TRICK:
        reports.append(homogeneity_audit(
            model.potential_value, n, 2, SCALE_GRID, s.samples, audit_rng.stream("homogeneity-2"), threshold=1e-8,
        ))
        reports.append(homogeneity_audit(
            model.prox_apply, n, 1, SCALE_GRID, s.samples, audit_rng.stream("homogeneity-1"), threshold=1e-7,
        ))
    if kind.scale_equivariant and kind.shift_equivariant:
        reports.append(equivariance_audit(model.prox_apply, n, AFFINE_GRID, s.samples, audit_rng.stream("equivariance")))
    elif kind.scale_equivariant:
        reports.append(equivariance_audit(model.prox_apply, n, scale_grid(), s.samples, audit_rng.stream("equivariance")))
    elif kind.shift_equivariant:
        reports.append(equivariance_audit(
            model.prox_apply, n, shift_grid(), s.samples, audit_rng.stream("equivariance"), threshold=1e-8,
        ))
    reports.append(jacobian_symmetry_audit(model.prox_apply, n, s.jacobian_points, audit_rng.stream("jacobian")))
    if kind is not VariantKind.NORM_TRICK:
        reports.append(prox_objective_audit(
            model, s.objective_points, s.perturbations, audit_rng.stream("objective"), s.radius, s.inversion,
        ))
    return reports


def audit_report(tag: str, reports: Sequence[AuditReport], seed: int) -> Report:
    report = Report("audit", meta={"experiment": "audit", "model": tag, "seed": seed})
    for audit in reports:
        for metric, value in (
            ("max_deviation", audit.max_deviation),
            ("violations", float(audit.violations)),
            ("samples", float(audit.samples)),
            ("passed", 1.0 if audit.passed else 0.0),
        ):
            report.add(ReportRow("audit", tag, "audit", 0.0, f"{audit.name}.{metric}", value, seed))
    return report


# Inversion -------------------------------------------------------------------

def run_invert(
    model: ProxModel,
    points: np.ndarray,
    settings: Optional[InversionSettings] = None,
    anchor: Optional[np.ndarray] = None,
) -> Report:
    """
    Evaluate R at each point and report the inversion residual and iteration count

    For one-dimensional models the ``point`` column holds the point itself,
    otherwise its row index. Rows that did not converge have an empty
    regularizer cell and converged = 0.
    """
    if model.kind is VariantKind.NORM_TRICK:
        raise IncompatibleVariantError("The normalization trick has no regularizer to evaluate")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != model.input_dim:
        raise ShapeError(f"Points have length {pts.shape[1]}, model expects {model.input_dim}")
    result = regularizer_table(model, pts, settings, anchor)
    report = wide_report("invert", INVERT_COLUMNS, {"experiment": "invert", "model": model.to_dict()})
    for i in range(pts.shape[0]):
        report.add_values(
            point=float(pts[i, 0]) if model.input_dim == 1 else i,
            regularizer=float(result.values[i]) if result.converged[i] else None,
            residual=float(result.residual[i]),
            iterations=int(result.iterations[i]),
            converged=bool(result.converged[i]),
        )
    failed = int(np.sum(~result.converged))
    if failed:
        logger.warning("%d of %d inversions missed the tolerance", failed, pts.shape[0])
    return report


# Visual denoising ------------------------------------------------------------

def run_denoise(
    checkpoint: Checkpoint,
    image_path,
    out_dir,
    seed: int,
    sigmas: Sequence[float] = NOISE_SWEEP_SIGMAS,
    tag: str = "model",
) -> Report:
    """
    Denoise one image tile by tile at several noise levels

    Writes ``noisy-<sigma>.pgm`` and ``denoised-<sigma>.pgm`` into ``out_dir``.
    Values outside [0, 1] are clipped for the PGM files only, and the number
    of clipped pixels is logged; PSNR is computed before clipping.
    """
    spec = patch_spec_for(checkpoint)
    clean_tiles, layout = tile_image(load_pnm(image_path), spec)
    clean = untile_image(clean_tiles, layout, spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = Report("denoise", meta={"experiment": "denoise", "image": str(image_path), "seed": seed})
    noise = Rng(seed).stream("noise")
    for sigma in sigmas:
        noisy_tiles = gaussian_corrupt(clean_tiles, sigma, noise.stream(f"sigma={sigma!r}"))
        denoised_tiles = map_rows(checkpoint.model.prox_apply, noisy_tiles)
        for label, tiles in (("noisy", noisy_tiles), ("denoised", denoised_tiles)):
            image = untile_image(tiles, layout, spec)
            value = float(psnr_batch(image.reshape(1, -1), clean.reshape(1, -1))[0])
            report.add(ReportRow("denoise", tag if label == "denoised" else "noisy", "sigma", float(sigma), "psnr", value, seed))
            clipped = int(np.sum((image < 0.0) | (image > 1.0)))
            if clipped:
                logger.info("%s sigma=%g: clipping %d pixel(s) to [0, 1] for the PGM", label, sigma, clipped)
            write_pnm(out / f"{label}-{sigma:g}.pgm", np.clip(image, 0.0, 1.0))
    return report
