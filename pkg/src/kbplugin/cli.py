"""Command-line client for the engine service.

Every subcommand builds a request model, sends it over HTTP, and prints
the JSON response. By default the service runs in-process (no daemon
needed); pass --server to talk to a running instance instead. Machine
output goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import json

import click
import httpx


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=300.0)
    import warnings

    with warnings.catch_warnings():
        # starlette nags about its httpx backend; irrelevant to callers
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _call(ctx, path: str, payload: dict):
    client = _client(ctx.obj.get("server"))
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"transport error: {exc}", err=True)
        raise SystemExit(2)
    body = resp.json()
    if resp.status_code != 200:
        message = body.get("message") or body.get("detail") or resp.text
        error = body.get("error", f"HTTP {resp.status_code}")
        click.echo(f"{error}: {message}", err=True)
        raise SystemExit(1)
    click.echo(json.dumps(body, ensure_ascii=False, indent=1, sort_keys=True))
    return body


def _split_names(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Knowledge-base program induction toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--kb", required=True, help="KB file path.")
@click.pass_context
def validate(ctx, kb):
    """Load a KB file and report its stats, or fail with the first error."""
    _call(ctx, "/validate", {"kb": kb})


@main.command()
@click.option("--kb", required=True)
@click.pass_context
def stats(ctx, kb):
    """Size summary of a KB."""
    _call(ctx, "/stats", {"kb": kb})


@main.command("exec")
@click.option("--kb", required=True)
@click.option("--program", required=True, help="Program text to execute.")
@click.pass_context
def exec_cmd(ctx, kb, program):
    """Execute a program and print its denotation."""
    _call(ctx, "/exec", {"kb": kb, "program": program})


@main.command()
@click.option("--kb", required=True)
@click.option("--prefix", default="", help="Program prefix; empty for the seed step.")
@click.option("--topics", default="", help="Comma-separated topic entity names.")
@click.option("--topic-concepts", default="", help="Comma-separated topic concept names.")
@click.pass_context
def enumerate(ctx, kb, prefix, topics, topic_concepts):
    """List admissible next chunks, one per line on stderr-free stdout."""
    client = _client(ctx.obj.get("server"))
    resp = client.post("/enumerate", json={
        "kb": kb,
        "prefix": prefix,
        "topic_entities": _split_names(topics),
        "topic_concepts": _split_names(topic_concepts),
    })
    body = resp.json()
    if resp.status_code != 200:
        click.echo(f"{body.get('error')}: {body.get('message')}", err=True)
        raise SystemExit(1)
    for candidate in body["candidates"]:
        click.echo(candidate)


@main.command()
@click.option("--kb", required=True)
@click.option("--data", required=True, help="JSONL file of question/program records.")
@click.option("--n", default=16, show_default=True, help="Number of KB variants.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Output directory.")
@click.pass_context
def augment(ctx, kb, data, n, seed, out):
    """Generate alias-variant KBs and the aligned multi-program dataset."""
    _call(ctx, "/augment", {"kb": kb, "data": data, "n": n, "seed": seed, "out": out})


@main.command("schema-data")
@click.option("--kb", required=True)
@click.option("-K", "k", required=True, type=int, help="Per-item triple sample cap.")
@click.option("--out", required=True, help="Output corpus file (JSONL).")
@click.pass_context
def schema_data(ctx, kb, k, out):
    """Build the triple-completion training corpus."""
    if k < 1:
        raise click.BadParameter("K must be >= 1", param_hint="-K")
    _call(ctx, "/schema-data", {"kb": kb, "k": k, "out": out})


@main.command()
@click.option("--kb", required=True)
@click.option("--question", default="")
@click.option("--topics", default="", help="Comma-separated topic entity names.")
@click.option("--topic-concepts", default="", help="Comma-separated topic concept names.")
@click.option("--scorer", default=None, help="Remote scorer base URL.")
@click.option("--mock-oracle", default=None, help="Gold program for the oracle scorer.")
@click.option("--beam", default=5, show_default=True)
@click.option("--max-steps", default=20, show_default=True)
@click.pass_context
def induce(ctx, kb, question, topics, topic_concepts, scorer, mock_oracle, beam, max_steps):
    """Run constrained beam search and print ranked programs."""
    if not scorer and not mock_oracle:
        raise click.UsageError("one of --scorer or --mock-oracle is required")
    _call(ctx, "/induce", {
        "kb": kb,
        "question": question,
        "topic_entities": _split_names(topics),
        "topic_concepts": _split_names(topic_concepts),
        "scorer": scorer,
        "mock_oracle": mock_oracle,
        "beam": beam,
        "max_steps": max_steps,
    })


@main.command("eval")
@click.option("--kb", required=True)
@click.option("--dataset", required=True, help="JSONL file of evaluation records.")
@click.option("--scorer", required=True, help="Remote scorer URL, or 'oracle'.")
@click.option("--metric", default="f1", show_default=True,
              type=click.Choice(["f1", "hit1", "accuracy"]))
@click.option("--beam", default=5, show_default=True)
@click.option("--max-steps", default=20, show_default=True)
@click.option("--parallel", default=1, show_default=True)
@click.option("--timeout", default=30.0, show_default=True, help="Per-record seconds.")
@click.pass_context
def eval_cmd(ctx, kb, dataset, scorer, metric, beam, max_steps, parallel, timeout):
    """Evaluate induction over a dataset and print the report."""
    _call(ctx, "/eval", {
        "kb": kb, "dataset": dataset, "scorer": scorer, "metric": metric,
        "beam": beam, "max_steps": max_steps, "parallel": parallel,
        "timeout": timeout,
    })


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the service with uvicorn."""
    import uvicorn

    uvicorn.run("kbplugin.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
