#!/usr/bin/env python3
"""
AE-LPN CLI

Command-line interface for training, evaluating and auditing learned
proximal networks.

Exit codes: 0 success, 1 usage error, 2 numerical failure (non-finite loss,
inversion failure, failed audit under --strict), 3 I/O error.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

try:
    import click
    from rich.console import Console
    from rich.logging import RichHandler
    from rich.table import Table
    CLICK_AVAILABLE = True
except ImportError:
    CLICK_AVAILABLE = False

from . import __version__
from .analysis import BRIGHTNESS_ALPHAS, InversionSettings
from .checkpoint import Checkpoint
from .core.rng import MAX_SEED
from .data.patches import PatchSpec
from .data.tensors import load_tensor
from .errors import (
    CheckpointError,
    ConfigError,
    DataFormatError,
    NumericalError,
    ShapeError,
)
from .experiments import (
    DENOISER_WIDTHS,
    NOISE_SWEEP_SIGMAS,
    SPLIT_NORMAL_WIDTHS,
    AuditSettings,
    audit_report,
    grid,
    model_audits,
    run_denoise,
    run_eval_affine,
    run_eval_noise_sweep,
    run_invert,
    run_train_denoiser,
    run_train_splitnormal,
)
from .icnn import Activation
from .potential import VariantKind
from .report import Report
from .training import TrainConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

VARIANTS = [k.value for k in VariantKind]


def parse_floats(text: str) -> Tuple[float, ...]:
    """Parse a comma-separated list of reals, e.g. "0.05,0.1,0.2" """
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"Expected comma-separated numbers, got {text!r}") from e
    if not values:
        raise ConfigError("Expected at least one number")
    return values


def parse_widths(text: str) -> Tuple[int, ...]:
    """Parse hidden widths such as "128,128" """
    try:
        widths = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"Invalid widths {text!r}") from e
    if not widths or min(widths) < 1:
        raise ConfigError(f"Invalid widths {text!r}")
    return widths


def parse_grid(text: str):
    """Parse "start:stop:step" into an inclusive grid"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"Grid must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"Invalid grid {text!r}") from e
    return grid(start, stop, step)


def exit_code_for(error: BaseException) -> int:
    """Map a library exception onto the CLI's exit codes"""
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (CheckpointError, DataFormatError, OSError)):
        return EXIT_IO
    if isinstance(error, (ConfigError, ShapeError)):
        return EXIT_USAGE
    raise error


def configure_logging(verbose: bool) -> None:
    """Route the ``aelpn`` logger through rich; DEBUG with --verbose, INFO otherwise"""
    root = logging.getLogger("aelpn")
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def load_checkpoints(paths: Sequence[str]) -> List[Tuple[str, Checkpoint]]:
    """Checkpoints tagged by file stem"""
    return [(Path(p).stem, Checkpoint.load(p)) for p in paths]


def train_config(
    base: TrainConfig,
    config: Optional[str],
    steps: Optional[int],
    pretrain_steps: Optional[int],
    match_steps: Optional[int],
    lr: Optional[float],
    **flags,
) -> TrainConfig:
    """File values over the preset, explicit flags over both"""
    cfg = TrainConfig.from_yaml(config, base) if config else base
    return cfg.override(
        pretrain_steps=pretrain_steps if pretrain_steps is not None else steps,
        match_steps=match_steps if match_steps is not None else steps,
        lr_pretrain=lr,
        lr_match=lr,
        **flags,
    )


if CLICK_AVAILABLE:
    class AelpnGroup(click.Group):
        """Command group that turns usage errors and library exceptions into exit codes"""

        def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
            try:
                rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            except click.exceptions.Abort:
                click.echo("Aborted!", err=True)
                sys.exit(EXIT_USAGE)
            except click.ClickException as e:
                e.show()
                sys.exit(EXIT_USAGE)
            except (NumericalError, CheckpointError, DataFormatError, OSError, ConfigError, ShapeError) as e:
                code = exit_code_for(e)
                click.echo(f"Error: {e}", err=True)
                logger.debug("Command failed", exc_info=True)
                sys.exit(code)
            if standalone_mode:
                sys.exit(rv if isinstance(rv, int) else EXIT_OK)
            return rv

    def common_options(fn: Callable) -> Callable:
        """--seed, --out, --json and --verbose, shared by every command"""
        @click.option("--seed", type=click.IntRange(0, MAX_SEED), default=0, show_default=True,
                      help="Root seed for every random stream")
        @click.option("--out", "-o", type=click.Path(file_okay=False), default="results", show_default=True,
                      help="Output directory for checkpoints and reports")
        @click.option("--json", "json_mirror", is_flag=True, help="Also write a JSON mirror of each report")
        @click.option("--verbose", "-v", is_flag=True, help="Debug logging")
        @functools.wraps(fn)
        def wrapper(*args, verbose: bool, **kwargs):
            configure_logging(verbose)
            return fn(*args, **kwargs)
        return wrapper

    def training_options(fn: Callable) -> Callable:
        """Flags that override the preset and --config values"""
        options = [
            click.option("--variant", type=click.Choice(VARIANTS), default=VariantKind.AFFINE.value,
                         show_default=True, help="Potential construction"),
            click.option("--config", type=click.Path(dir_okay=False), help="YAML training config"),
            click.option("--steps", type=click.IntRange(min=0), help="Steps per phase"),
            click.option("--pretrain-steps", type=click.IntRange(min=0), help="l1 pretraining steps"),
            click.option("--match-steps", type=click.IntRange(min=0), help="Proximal-matching steps"),
            click.option("--lr", type=float, help="Learning rate for both phases"),
            click.option("--gamma0", type=float, help="Initial proximal-matching gamma"),
            click.option("--sigma", type=float, help="Training noise level"),
            click.option("--batch-size", type=click.IntRange(min=1), help="Samples per step"),
            click.option("--alpha", type=click.FloatRange(min=0.0), default=0.0, show_default=True,
                         help="Strong-convexity weight"),
            click.option("--activation", type=click.Choice([a.value for a in Activation if a.pairs]),
                         default=Activation.PAIRWISE_MAX.value, show_default=True,
                         help="Pairing activation of equivariant models"),
            click.option("--widths", help="Hidden widths, comma-separated"),
        ]
        for option in reversed(options):
            fn = option(fn)
        return fn

    def emit(report: Report, out: str, json_mirror: bool, console: "Console") -> None:
        path = report.write(out, json_mirror=json_mirror)
        console.print(f"Wrote {path} ({len(report.rows)} rows)")

    def show_long_report(report: Report, console: "Console") -> None:
        table = Table(title=report.name)
        for column in ("model", "param_name", "param", "metric", "value"):
            table.add_column(column)
        for r in report.records():
            table.add_row(str(r["model"]), str(r["param_name"]), f"{r['param']:g}", str(r["metric"]), f"{r['value']:.4g}")
        console.print(table)

    @click.group(cls=AelpnGroup)
    @click.version_option(version=__version__)
    def cli():
        """AE-LPN: affine-equivariant learned proximal networks"""

    @cli.command("train-splitnormal")
    @training_options
    @common_options
    def train_splitnormal(variant, config, steps, pretrain_steps, match_steps, lr, gamma0, sigma,
                          batch_size, alpha, activation, widths, seed, out, json_mirror):
        """Train on the one-dimensional split normal and tabulate the learned prox"""
        cfg = train_config(
            TrainConfig.split_normal(), config, steps, pretrain_steps, match_steps, lr,
            gamma0=gamma0, sigma_noise=sigma, batch_size=batch_size, seed=seed,
        )
        hidden = parse_widths(widths) if widths else SPLIT_NORMAL_WIDTHS
        run = run_train_splitnormal(variant, seed, cfg, hidden, alpha, Activation(activation))
        console = Console()
        Path(out).mkdir(parents=True, exist_ok=True)
        path = Path(out) / f"splitnormal-{variant}.ckpt"
        run.checkpoint.save(path)
        console.print(f"Saved checkpoint {path}")
        emit(run.table, out, json_mirror, console)
        emit(run.summary, out, json_mirror, console)
        show_long_report(run.summary, console)

    @cli.command("train-denoiser")
    @training_options
    @click.option("--data", "data_dir", type=click.Path(file_okay=False), help="Directory of PGM/PPM images")
    @click.option("--synthetic", is_flag=True, help="Train on synthetic piecewise-smooth images")
    @click.option("--patch", default="16", show_default=True, help="Patch size, e.g. 16 or 16x12")
    @click.option("--eval-patches", type=click.IntRange(min=1), default=64, show_default=True,
                  help="Patches scored at each history interval")
    @common_options
    def train_denoiser(variant, config, steps, pretrain_steps, match_steps, lr, gamma0, sigma,
                       batch_size, alpha, activation, widths, data_dir, synthetic, patch,
                       eval_patches, seed, out, json_mirror):
        """Train a patch denoiser"""
        if bool(data_dir) == bool(synthetic):
            raise click.UsageError("Pass exactly one of --data DIR or --synthetic")
        spec = PatchSpec.parse(patch)
        cfg = train_config(
            TrainConfig.denoiser(spec.dim, variant), config, steps, pretrain_steps, match_steps, lr,
            gamma0=gamma0, sigma_noise=sigma, batch_size=batch_size, seed=seed,
        )
        hidden = parse_widths(widths) if widths else DENOISER_WIDTHS
        checkpoint = run_train_denoiser(
            variant, seed, cfg, spec, hidden, alpha, Activation(activation), data_dir, eval_patches,
        )
        Path(out).mkdir(parents=True, exist_ok=True)
        path = Path(out) / f"denoiser-{variant}.ckpt"
        checkpoint.save(path)
        click.echo(f"Saved checkpoint {path}")
        if checkpoint.history and checkpoint.history.entries:
            last = checkpoint.history.entries[-1]
            if last.eval_psnr is not None:
                click.echo(f"Final eval PSNR {last.eval_psnr:.2f} dB")

    @cli.command("eval-noise-sweep")
    @click.argument("checkpoints", nargs=-1, required=True)
    @click.option("--sigmas", default=",".join(str(s) for s in NOISE_SWEEP_SIGMAS), show_default=True,
                  help="Test noise levels")
    @click.option("--patches", type=click.IntRange(min=1), default=200, show_default=True)
    @click.option("--data", "data_dir", type=click.Path(file_okay=False),
                  help="Image directory; its held-out split is evaluated (default: synthetic)")
    @click.option("--with-normtrick", is_flag=True, help="Also evaluate plain models wrapped by the normalization trick")
    @common_options
    def eval_noise_sweep(checkpoints, sigmas, patches, data_dir, with_normtrick, seed, out, json_mirror):
        """Mean PSNR per model across test noise levels"""
        report = run_eval_noise_sweep(
            load_checkpoints(checkpoints), seed, parse_floats(sigmas), patches, data_dir, with_normtrick,
        )
        console = Console()
        emit(report, out, json_mirror, console)
        show_long_report(report, console)

    @cli.command("eval-affine")
    @click.argument("checkpoints", nargs=-1, required=True)
    @click.option("--alphas", default=",".join(str(a) for a in BRIGHTNESS_ALPHAS), show_default=True,
                  help="Brightness factors alpha in g(x) = alpha x + (1 - alpha)")
    @click.option("--patches", type=click.IntRange(min=1), default=100, show_default=True)
    @click.option("--sigma", type=click.FloatRange(min=0.0), default=0.1, show_default=True,
                  help="Noise level of the evaluated inputs")
    @click.option("--data", "data_dir", type=click.Path(file_okay=False))
    @click.option("--with-normtrick", is_flag=True)
    @common_options
    def eval_affine(checkpoints, alphas, patches, sigma, data_dir, with_normtrick, seed, out, json_mirror):
        """Equivariance PSNR under brightness changes"""
        report = run_eval_affine(
            load_checkpoints(checkpoints), seed, parse_floats(alphas), patches, sigma, data_dir, with_normtrick,
        )
        emit(report, out, json_mirror, Console())

    @cli.command()
    @click.argument("checkpoint")
    @click.option("--pairs", type=click.IntRange(min=1), default=10000, show_default=True,
                  help="Monotonicity pairs")
    @click.option("--samples", type=click.IntRange(min=1), default=200, show_default=True,
                  help="Inputs per equivariance/homogeneity audit")
    @click.option("--points", type=click.IntRange(min=1), default=100, show_default=True,
                  help="Jacobian-symmetry points")
    @click.option("--objective-points", type=click.IntRange(min=1), default=20, show_default=True)
    @click.option("--strict", is_flag=True, help="Exit with code 2 when any audit fails")
    @common_options
    def audit(checkpoint, pairs, samples, points, objective_points, strict, seed, out, json_mirror):
        """Check a checkpoint's structural properties"""
        ckpt = Checkpoint.load(checkpoint)
        settings = AuditSettings(pairs=pairs, samples=samples, jacobian_points=points,
                                 objective_points=objective_points)
        reports = model_audits(ckpt.model, seed, settings)
        console = Console()
        table = Table(title=f"{Path(checkpoint).name} ({ckpt.model.kind.value}, "
                            f"{ckpt.model.config.activation.value})")
        for column in ("audit", "verdict", "max deviation", "violations", "threshold"):
            table.add_column(column)
        for r in reports:
            table.add_row(r.name, "pass" if r.passed else "FAIL", f"{r.max_deviation:.3e}",
                          f"{r.violations}/{r.samples}", f"{r.threshold:.1e}")
        console.print(table)
        emit(audit_report(Path(checkpoint).stem, reports, seed), out, json_mirror, console)
        if strict and not all(r.passed for r in reports):
            sys.exit(EXIT_NUMERICAL)

    @cli.command()
    @click.argument("checkpoint")
    @click.option("--alpha", type=click.FloatRange(min=0.0), help="Override the strong-convexity weight")
    @click.option("--grid", "grid_text", default="-2:2:0.1", show_default=True,
                  help="start:stop:step; constant signals for models with n > 1")
    @click.option("--points", "points_file", type=click.Path(dir_okay=False),
                  help="Raw tensor file of shape (m, n) to evaluate instead of the grid")
    @click.option("--anchor", type=float, help="Subtract R at this constant signal")
    @click.option("--tol", type=click.FloatRange(min=0.0, min_open=True), default=1e-8, show_default=True)
    @click.option("--max-iter", type=click.IntRange(min=1), default=10000, show_default=True)
    @common_options
    def invert(checkpoint, alpha, grid_text, points_file, anchor, tol, max_iter, seed, out, json_mirror):
        """Evaluate the implicit regularizer by inverting the prox"""
        model = Checkpoint.load(checkpoint).model
        if alpha is not None:
            model = model.with_alpha(alpha)
        if model.alpha <= 0:
            raise ConfigError("Inversion needs strong convexity: the checkpoint has alpha = 0, pass --alpha")
        n = model.input_dim
        if points_file:
            points = load_tensor(points_file).reshape(-1, n)
        else:
            points = parse_grid(grid_text)[:, None] * np.ones((1, n))
        anchor_point = None if anchor is None else [anchor] * n
        report = run_invert(model, points, InversionSettings(tol=tol, max_iter=max_iter), anchor_point)
        report.meta["seed"] = seed
        report.meta["checkpoint"] = str(checkpoint)
        emit(report, out, json_mirror, Console())

    @cli.command()
    @click.argument("checkpoint")
    @click.argument("image")
    @click.option("--sigmas", default=",".join(str(s) for s in NOISE_SWEEP_SIGMAS), show_default=True)
    @common_options
    def denoise(checkpoint, image, sigmas, seed, out, json_mirror):
        """Write noisy and denoised versions of an image at several noise levels"""
        report = run_denoise(Checkpoint.load(checkpoint), image, out, seed, parse_floats(sigmas),
                             tag=Path(checkpoint).stem)
        console = Console()
        emit(report, out, json_mirror, console)
        show_long_report(report, console)


def main():
    """Entry point for CLI"""
    if CLICK_AVAILABLE:
        cli()
    else:
        print("AE-LPN CLI")
        print(f"Version: {__version__}")
        print("\nThe command-line interface needs 'click' and 'rich':")
        print("  pip install aelpn[cli]")
        sys.exit(EXIT_USAGE)


if __name__ == '__main__':
    main()
