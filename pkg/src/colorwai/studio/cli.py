"""Command-line interface for the colorway pipeline and studio service.

Workspace resolution order: --workspace flag, COLORWAI_WORKSPACE env var,
`workspace` key in ./colorwai.toml (simple key = value lines), ./workspace.
Exit codes: 0 success, 2 validation/usage error, 1 internal error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from colorwai.studio.engine import NotFoundError, StudioEngine, ValidationError
from colorwai.studio.store import WorkspaceStore

CONFIG_FILE = "colorwai.toml"


def read_config(path=CONFIG_FILE) -> dict:
    """Parse `key = value` lines; quotes optional, # comments allowed."""
    cfg = {}
    p = Path(path)
    if not p.exists():
        return cfg
    for line in p.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        cfg[key] = value.strip("\"'")
    return cfg


def resolve_workspace(flag_value: str | None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("COLORWAI_WORKSPACE")
    if env:
        return Path(env)
    cfg = read_config()
    if "workspace" in cfg:
        return Path(cfg["workspace"])
    return Path("workspace")


@click.group()
@click.option("--workspace", "workspace", default=None,
              help="Workspace root (default: $COLORWAI_WORKSPACE or ./workspace).")
@click.pass_context
def cli(ctx, workspace):
    """Generative colorway studio."""
    ctx.obj = StudioEngine(WorkspaceStore(resolve_workspace(workspace)))


@cli.command("gen-corpus")
@click.option("--n", default=256, show_default=True, help="Number of samples.")
@click.option("--seed", default=1000, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--resolution", default=None, type=int, help="Override render size.")
@click.pass_obj
def gen_corpus(engine, n, seed, out, resolution):
    """Render a seeded procedural corpus with a manifest CSV."""
    from colorwai import texgen

    gen = engine.texture_generator()
    if resolution:
        gen = texgen.ProceduralGenerator(gen.mapping_seed, gen.latent_dim, resolution)
    book = None
    if engine.store.exists("codebook.json"):
        book = engine.codebook()
    texgen.export_corpus(gen, n, seed, out, book=book, cfg=engine.annotation)
    click.echo(f"wrote {n} patterns to {out}")


@cli.command("build-codebook")
@click.option("--n", default=200, show_default=True, help="Corpus size for palette pool.")
@click.option("--seed", default=1000, show_default=True)
@click.option("--k", default=19, show_default=True, help="Codebook size.")
@click.option("--corpus", default=None, type=click.Path(exists=True),
              help="Existing corpus directory (default: render internally).")
@click.pass_obj
def build_codebook(engine, n, seed, k, corpus):
    """Derive the predominant-color codebook from corpus palettes."""
    if corpus:
        from colorwai import colorlab, texgen

        rows = texgen.read_manifest(Path(corpus) / "manifest.csv")
        palettes = [
            colorlab.extract_palette(
                colorlab.load_image_png(Path(corpus) / fname), engine.annotation)
            for fname, _, _ in rows
        ]
        book = colorlab.build_codebook(palettes, k)
        engine.store.write_json("codebook.json", book.to_document())
        texgen.annotate_corpus(corpus, book, engine.annotation)
    else:
        book = engine.build_codebook(corpus_n=n, seed=seed, k=k)
    click.echo(f"codebook with {len(book)} colors written to workspace")


@cli.command("train-diffusion")
@click.option("--epochs", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--corpus-n", default=256, show_default=True)
@click.pass_obj
def train_diffusion(engine, epochs, seed, corpus_n):
    """Train the diffusion denoiser on procedural renders."""
    result = engine.train_diffusion(corpus_n=corpus_n, epochs=epochs, seed=seed)
    click.echo(f"trained denoiser, final loss {result['final_loss']:.4f}")


@cli.command("couple")
@click.option("--backend", default="texgen", show_default=True)
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def couple_cmd(engine, backend, n, seed):
    """Annotate latent codes with predominant colors (pipeline stage 1)."""
    data = engine.couple_dataset(backend, n=n, seed=seed)
    counts = data.class_counts()
    click.echo(f"coupled {data.n} codes in {data.space_tag}; "
               f"colors hit: {len(counts)}; hash {data.content_hash()}")


@cli.command("fit")
@click.option("--backend", default="texgen", show_default=True)
@click.option("--method", default="shapleyvec", show_default=True,
              type=click.Choice(["interfacegan", "stylespace", "shapleyvec"]))
@click.option("--explanation", "-e", default=0.5, show_default=True,
              help="Shapley importance mass to keep (shapleyvec).")
@click.option("--k", default=40, show_default=True, help="Dimensions to keep (stylespace).")
@click.option("--c-reg", default=0.1, show_default=True, help="Inverse regularization.")
@click.option("--kind", default="logistic", type=click.Choice(["logistic", "hinge"]),
              show_default=True)
@click.option("--n", default=1000, show_default=True, help="Coupling size if not cached.")
@click.option("--seed", default=0, show_default=True)
@click.option("--recouple", is_flag=True, help="Ignore any cached coupled dataset.")
@click.pass_obj
def fit(engine, backend, method, explanation, k, c_reg, kind, n, seed, recouple):
    """Fit one latent direction per codebook color (stages 1-2)."""
    from colorwai.disentangle import FitConfig

    cfg = FitConfig(method=method, kind=kind, c_reg=c_reg, k=k,
                    explanation=explanation, seed=seed)
    dirset, version = engine.fit_directions(backend, cfg, n=n, seed=seed,
                                            reuse_dataset=not recouple)
    msg = f"fitted {len(dirset.directions)} directions ({method} v{version})"
    if dirset.partial:
        msg += f"; partial: {dirset.partial}"
    click.echo(msg)


@cli.command("eval")
@click.option("--backend", default="texgen", show_default=True)
@click.option("--method", default="shapleyvec", show_default=True)
@click.option("--samples", default=100, show_default=True, help="Eval sample count m.")
@click.option("--alpha-samples", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def eval_cmd(engine, backend, method, samples, alpha_samples, seed):
    """Alpha-optimal search plus accuracy metrics and confusion matrix."""
    from colorwai.evalkit import EvalConfig

    cfg = EvalConfig(m_eval_samples=samples, n_alpha_samples=alpha_samples, seed=seed)
    doc = engine.run_eval(backend, method, cfg)
    agg = doc["aggregates"]
    click.echo(f"p-acc {agg['p_acc_mean']:.3f} ({agg['p_acc_std']:.3f})  "
               f"relaxed-acc {agg['relaxed_mean']:.3f} ({agg['relaxed_std']:.3f})")
    click.echo(f"reports written under {engine.store.path('reports')}")


@cli.command("report")
@click.option("--backend", default="texgen", show_default=True)
@click.option("--method", default="shapleyvec", show_default=True)
@click.pass_obj
def report(engine, backend, method):
    """Representation report: direction cosines and support overlaps."""
    doc = engine.run_representation_report(backend, method)
    sizes = doc["support_sizes"]
    click.echo(f"directions: {len(sizes)}; mean support {sum(sizes)/len(sizes):.1f}")
    click.echo(f"reports written under {engine.store.path('reports')}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.pass_obj
def serve(engine, host, port):
    """Run the studio HTTP service."""
    import uvicorn

    from colorwai.studio.api import create_app

    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")


@cli.command("export-board")
@click.option("--board", "board_id", required=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def export_board(engine, board_id, out):
    """Write a board as a PNG contact sheet plus a JSON document."""
    png = engine.export_board_png(board_id)
    out = Path(out)
    out.write_bytes(png)
    sidecar = out.with_suffix(".json")
    sidecar.write_text(json.dumps(engine.load_board(board_id), indent=1))
    click.echo(f"wrote {out} and {sidecar}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except (ValidationError, NotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # internal error
        click.echo(f"internal error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
