"""Command-line entry points.

  dicti edit    one image + prompt -> edited variations
  dicti ingest  print a dataset manifest
  dicti eval    image-by-prompt batch run with metrics
  dicti ablate  dilation-radius sweep from a YAML config
  dicti serve   run the HTTP job service
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import yaml

from .errors import DictiError
from .maskgen import MaskGenConfig
from .metrics import create_extractor
from .parsers import create_parser
from .pipeline import (
    AblationGrid,
    EditJobSpec,
    ingest_fashionpedia,
    ingest_viton,
    load_prompts,
    run_ablation,
    run_edit,
    run_eval,
)
from .synthesis import (
    DEFAULT_GUIDANCE,
    DEFAULT_STEPS,
    DEFAULT_VARIATIONS,
    create_backend,
    load_backend_config,
)


@click.group()
def main():
    """Text-guided garment editing toolkit."""


def _backend(name: str, config_path: str | None):
    config = load_backend_config(config_path) if config_path else {}
    return create_backend(name, config)


def _ingest(dataset: str, root: str, labels: str | None):
    if dataset == "viton":
        return ingest_viton(root, labels_dir=labels, record_sizes=True)
    return ingest_fashionpedia(root, labels_root=labels)


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--prompt", required=True, help="Garment description.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, path_type=Path),
              help="Precomputed label-map PNG for this image.")
@click.option("--parser", "parser_spec",
              help="Label provider when --labels is absent: synthetic, precomputed:DIR, command:TEMPLATE.")
@click.option("--d", default=70, show_default=True, help="Body dilation radius, px.")
@click.option("--e", default=10, show_default=True, help="Preservation erosion radius, px.")
@click.option("--f", default=5, show_default=True, help="Head erosion radius, px.")
@click.option("--seed", default=0, show_default=True)
@click.option("--steps", default=DEFAULT_STEPS, show_default=True)
@click.option("--guidance", default=DEFAULT_GUIDANCE, show_default=True)
@click.option("--variations", default=DEFAULT_VARIATIONS, show_default=True)
@click.option("--backend", default="stub", show_default=True, help="stub or diffusion.")
@click.option("--backend-config", type=click.Path(exists=True), help="YAML backend config.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--save-intermediates", is_flag=True, help="Also write masks and pre-stitch images.")
def edit(image_path, prompt, labels_path, parser_spec, d, e, f, seed, steps, guidance,
         variations, backend, backend_config, out_dir, save_intermediates):
    """Edit one image according to a prompt."""
    spec = EditJobSpec(
        image_path=image_path,
        prompt=prompt,
        maskgen=MaskGenConfig(d=d, e=e, f=f),
        seed=seed,
        steps=steps,
        guidance_scale=guidance,
        variations=variations,
        backend=backend,
        labels_path=labels_path,
        out_dir=out_dir,
        save_intermediates=save_intermediates,
    )
    parser = create_parser(parser_spec) if parser_spec else None
    edited = run_edit(spec, parser, _backend(backend, backend_config))
    click.echo(f"wrote {len(edited)} variation(s) to {out_dir}")


@main.command()
@click.option("--dataset", type=click.Choice(["viton", "fashionpedia"]), required=True)
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--labels", type=click.Path(exists=True), help="Label-map directory.")
def ingest(dataset, root, labels):
    """Print the dataset manifest, one line per image."""
    manifest = _ingest(dataset, root, labels)
    for entry in manifest.entries:
        size = f"{entry.width}x{entry.height}" if entry.width else "-"
        click.echo(f"{entry.image_id}\t{entry.image_path}\t{entry.label_path or '-'}\t{size}")
    click.echo(f"# {manifest.name}: {len(manifest)} entries", err=True)


@main.command()
@click.option("--dataset", type=click.Choice(["viton", "fashionpedia"]), required=True)
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option("--labels", type=click.Path(exists=True), help="Label-map directory.")
@click.option("--parser", "parser_spec", help="Fallback label provider.")
@click.option("--backend", default="stub", show_default=True)
@click.option("--backend-config", type=click.Path(exists=True))
@click.option("--extractor", default="stub", show_default=True, help="stub or clip.")
@click.option("--d", default=70, show_default=True)
@click.option("--e", default=10, show_default=True)
@click.option("--f", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--square-crop", is_flag=True, help="Crop the top square region before editing.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def eval(dataset, root, prompts_path, labels, parser_spec, backend, backend_config,
         extractor, d, e, f, seed, square_crop, out_dir):
    """Generate one edit per (image, prompt) pair and score the set."""
    manifest = _ingest(dataset, root, labels)
    prompts = load_prompts(prompts_path)
    parser = create_parser(parser_spec) if parser_spec else None
    run = run_eval(
        manifest,
        prompts,
        _backend(backend, backend_config),
        create_extractor(extractor),
        parser,
        out_dir,
        cfg=MaskGenConfig(d=d, e=e, f=f),
        base_seed=seed,
        square_crop=square_crop,
    )
    r = run.report
    click.echo(
        f"n={r.n_images} kid={r.kid_mean:.6f}±{r.kid_std:.6f} "
        f"clip_s={r.clip_s_mean:.3f} clip_iqa={r.clip_iqa_mean:.4f}"
    )
    if run.failures:
        click.echo(f"{len(run.failures)} cell(s) failed; see failures.csv", err=True)
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="YAML sweep config; see README for the schema.")
def ablate(config_path):
    """Run the dilation-radius sweep described by a config file."""
    with open(config_path) as fh:
        cfg = yaml.safe_load(fh)
    manifest = _ingest(cfg["dataset"], cfg["root"], cfg.get("labels"))
    entries = manifest.entries
    if "max_images" in cfg:
        entries = entries[: int(cfg["max_images"])]
    grid = AblationGrid(
        d_values=[int(v) for v in cfg["d_values"]],
        prompts=load_prompts(cfg["prompts"]),
        entries=entries,
        variations=int(cfg.get("variations", 5)),
        e=int(cfg.get("e", 10)),
        f=int(cfg.get("f", 5)),
        base_seed=int(cfg.get("seed", 0)),
    )
    parser = create_parser(cfg["parser"]) if cfg.get("parser") else None
    run = run_ablation(
        grid,
        create_backend(cfg.get("backend", "stub"), cfg.get("backend_config", {})),
        create_extractor(cfg.get("extractor", "stub")),
        parser,
        cfg["out"],
        square_crop=bool(cfg.get("square_crop", False)),
        save_intermediates=bool(cfg.get("save_intermediates", True)),
    )
    for s in run.summaries:
        click.echo(
            f"d={s.d:<4d} kid={s.kid_mean:.6f} clip_s={s.clip_s_mean:.3f} "
            f"clip_iqa={s.clip_iqa_mean:.4f} mask_area_mean={s.mask_area_mean:.0f}"
        )
    if run.failures:
        click.echo(f"{len(run.failures)} cell(s) failed; see failures.csv", err=True)
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--backend", default="stub", show_default=True)
@click.option("--backend-config", type=click.Path(exists=True))
@click.option("--parser", "parser_spec", default="synthetic", show_default=True)
def serve(host, port, data_dir, backend, backend_config, parser_spec):
    """Run the HTTP job service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        data_dir=data_dir,
        backend=backend,
        backend_config=load_backend_config(backend_config) if backend_config else {},
        parser=parser_spec,
    )
    uvicorn.run(create_app(config), host=host, port=port)


def run():
    try:
        main(standalone_mode=True)
    except DictiError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
