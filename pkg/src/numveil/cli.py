"""Command-line front end.

Every command speaks to the HTTP service: a remote one when --server is
given, otherwise an in-process instance of the same app, so the two paths
exercise identical endpoints.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import click
import httpx

from .config import load_config
from .evaluation import aggregate, transmitted_payload_text
from .pipeline import read_records, record_from_dict
from .query import dump_dataset, load_dataset, query_to_dict
from .service import create_app
from .simulate import demo_dataset

__all__ = ["main"]


def _open_client(server: str | None, config_path: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    return TestClient(
        create_app(load_config(config_path)), raise_server_exceptions=False
    )


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        raise click.ClickException(f"{path} failed: {response.text}")
    return response.json()


@click.group()
def main() -> None:
    """Privacy-preserving cascade for numerical reasoning over documents."""


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", default="records.jsonl", show_default=True)
@click.option("--tau", type=float, default=None, help="Override the routing threshold.")
@click.option("--server", default=None, help="Base URL of a running service.")
def run(dataset: str, config_path: str | None, out: str, tau: float | None, server: str | None) -> None:
    """Answer every query in a JSONL dataset and write answer records."""
    queries = load_dataset(dataset)
    client = _open_client(server, config_path)
    try:
        rows = []
        for query in queries:
            row = _post(
                client, "/answer", {"query": query_to_dict(query), "tau": tau}
            )
            rows.append(row)
            click.echo(f"{row['id']}\t{row['path']}\t{row['answer']}")
    finally:
        client.close()
    with open(out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    report = aggregate([record_from_dict(r) for r in rows])
    click.echo(json.dumps(report.to_dict()))
    click.echo(f"wrote {len(rows)} records to {out}")


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--taus", default="0,0.2,0.4,0.6,0.8,1", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", default="-", show_default=True, help="CSV path, - for stdout.")
@click.option("--no-judge", is_flag=True, help="Skip leakage judging.")
@click.option("--server", default=None)
def sweep(
    dataset: str,
    taus: str,
    config_path: str | None,
    out: str,
    no_judge: bool,
    server: str | None,
) -> None:
    """Trace accuracy and leakage across routing thresholds."""
    queries = load_dataset(dataset)
    tau_values = [float(part) for part in taus.split(",") if part.strip()]
    client = _open_client(server, config_path)
    try:
        result = _post(
            client,
            "/sweep",
            {
                "queries": [query_to_dict(q) for q in queries],
                "taus": tau_values,
                "judge": not no_judge,
            },
        )
    finally:
        client.close()
    if out == "-":
        click.echo(result["csv"], nl=False)
    else:
        Path(out).write_text(result["csv"], encoding="utf-8")
        click.echo(f"wrote sweep to {out}")


@main.command(name="judge-leakage")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--server", default=None)
def judge_leakage_cmd(records_path: str, config_path: str | None, server: str | None) -> None:
    """Judge whether each record's transmissions reuse its original context."""
    records = read_records(records_path)
    client = _open_client(server, config_path)
    leaked = 0
    judged = 0
    try:
        for record in records:
            payload = transmitted_payload_text(record)
            if not payload:
                click.echo(f"{record.query_id}\tlocal\tclean")
                continue
            verdict = _post(
                client,
                "/judge",
                {"context_a": record.context_text, "context_b": payload},
            )
            judged += 1
            leaked += 1 if verdict["leaked"] else 0
            click.echo(
                f"{record.query_id}\tremote\t"
                f"{'leaked' if verdict['leaked'] else 'clean'}"
            )
    finally:
        client.close()
    total = len(records)
    rate = leaked / total if total else 0.0
    click.echo(
        json.dumps(
            {
                "records": total,
                "judged": judged,
                "leaked": leaked,
                "leakage_rate": rate,
                "protection_rate": 1 - rate,
            }
        )
    )


@main.command()
@click.option("--text", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--server", default=None)
def switch(text: str, seed: int, config_path: str | None, server: str | None) -> None:
    """Show the numeric switch applied to a piece of text."""
    client = _open_client(server, config_path)
    try:
        result = _post(client, "/switch", {"text": text, "seed": seed})
    finally:
        client.close()
    click.echo(json.dumps(result, indent=2))


@main.command(name="filter-train")
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", default="filtered.jsonl", show_default=True)
@click.option("--server", default=None)
def filter_train(
    candidates_path: str, config_path: str | None, out: str, server: str | None
) -> None:
    """Run the training-data filter over candidate rewrites."""
    rows = []
    with open(candidates_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    client = _open_client(server, config_path)
    try:
        result = _post(client, "/filter", {"candidates": rows})
    finally:
        client.close()
    with open(out, "w", encoding="utf-8") as fh:
        for row in result["outcomes"]:
            fh.write(json.dumps(row) + "\n")
    click.echo(json.dumps(result["summary"]))
    click.echo(f"wrote outcomes to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(config_path: str | None, host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(load_config(config_path)), host=host, port=port)


@main.command(name="demo-data")
@click.option("--out", default="demo.jsonl", show_default=True)
@click.option("--n", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def demo_data(out: str, n: int, seed: int) -> None:
    """Generate a synthetic dataset the simulated models can solve."""
    dump_dataset(demo_dataset(n, seed), out)
    click.echo(f"wrote {n} queries to {out}")


if __name__ == "__main__":
    main()
