"""scoring-shim executable: serve the completions protocol over HTTP."""

from __future__ import annotations

import sys

import click
import uvicorn

from .model import load_model
from .server import create_app


@click.command()
@click.option("--model", default="builtin:tiny", show_default=True,
              help="'builtin:tiny[:seed]' or a directory with weights.pt")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8700, show_default=True, type=int)
@click.option("--device", default="cpu", show_default=True,
              type=click.Choice(["cpu"]), help="only CPU inference is supported")
@click.option("--max-concurrency", default=4, show_default=True, type=int)
def main(model: str, host: str, port: int, device: str, max_concurrency: int):
    if max_concurrency < 1:
        click.echo("--max-concurrency must be >= 1", err=True)
        sys.exit(2)
    try:
        service = load_model(model)
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"failed to load model: {exc}", err=True)
        sys.exit(2)
    app = create_app(service, max_concurrency=max_concurrency, model_name=model)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
