"""Command-line entry point.

The CLI is a thin client: it reads and writes local files, but every
computation goes through the service API (mounted in-process by default,
or a remote ``--server-url``). Flags override config-file values, which
override built-in defaults; see README for the config key set.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .backends import TableBackend
from .client import ServiceClient
from .data import Dataset, load_dataset, samples_from_records, save_dataset_alpaca, save_dataset_jsonl
from .diversity import EmbeddingSet, save_embeddings
from .errors import ConfigError, ToolError
from .manifest import build_manifest, write_manifest
from .report import write_quantile_csv, write_verb_noun_csv
from .analysis import DistributionSummary
from .scoring import read_scores, rows_to_dicts, write_scores, rows_from_dicts

DEFAULTS = {
    "server_url": None,
    "format": None,
    "template": "vicuna-v1",
    "workers": 1,
    "max_failure_fraction": 0.01,
    "ratio": 0.05,
    "ifd_cap": "1.0",
    "budgets": "0.05,0.10,0.15",
    "pre_ratio": 0.20,
    "final_ratio": 0.02,
    "embedder": "hashed-bow:1024",
    "fraction": 0.05,
    "top_k_rows": 10,
    "output_format": "alpaca-json",
    "max_length": None,
    "timeout": 60.0,
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _resolve(flag_value, key: str, config: dict):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return DEFAULTS[key]


def _parse_cap(raw) -> float | None:
    text = str(raw).strip().lower()
    if text in ("inf", "infinity", "none"):
        return None
    try:
        cap = float(text)
    except ValueError:
        raise ConfigError(f"--ifd-cap must be a number or 'inf', got {raw!r}") from None
    if cap <= 0:
        raise ConfigError(f"--ifd-cap must be > 0, got {cap}")
    return cap


def _backend_wire(spec: str, max_length: int | None, timeout: float) -> dict:
    kind, sep, param = spec.partition(":")
    if not sep:
        raise ConfigError(f"backend spec {spec!r} must look like kind:parameter")
    if kind == "uniform":
        try:
            return {"kind": "uniform", "vocab_size": int(param)}
        except ValueError:
            raise ConfigError(f"uniform backend needs an integer vocab size, got {param!r}") from None
    if kind == "table":
        table = TableBackend.from_file(param)
        return {
            "kind": "table",
            "name": table.name,
            "default": table.default,
            "entries": table.entries,
        }
    if kind == "remote":
        return {"kind": "remote", "url": param, "max_length": max_length, "timeout": timeout}
    raise ConfigError(f"unknown backend kind {kind!r} (expected uniform, table, or remote)")


def _embedder_wire(spec: str) -> dict:
    kind, sep, param = spec.partition(":")
    if kind == "hashed-bow":
        dim = int(param) if sep else 1024
        return {"kind": "hashed-bow", "dim": dim}
    if kind == "remote":
        if not sep:
            raise ConfigError("remote embedder needs a URL: remote:http://...")
        return {"kind": "remote", "url": param}
    raise ConfigError(f"unknown embedder {spec!r} (expected hashed-bow[:dim] or remote:url)")


def _template_wire(name: str, template_file: str | None) -> dict:
    if template_file:
        try:
            spec = json.loads(Path(template_file).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read template file {template_file}: {e}") from e
        return {
            "name": spec.get("name", Path(template_file).stem),
            "with_input_pattern": spec["with_input_pattern"],
            "without_input_pattern": spec["without_input_pattern"],
        }
    return {"name": name}


def _samples_wire(dataset: Dataset) -> list[dict]:
    return [
        {"id": x.id, "instruction": x.instruction, "input": x.input, "response": x.response}
        for x in dataset.samples
    ]


def _write_subset(subset_records: list[dict], path: Path, output_format: str) -> None:
    dataset = Dataset(samples=samples_from_records(list(subset_records)))
    if output_format == "alpaca-json":
        save_dataset_alpaca(dataset, path)
    elif output_format == "jsonl":
        save_dataset_jsonl(dataset, path)
    else:
        raise ConfigError(f"unknown output format {output_format!r}")


class _Run:
    """Shared per-command plumbing: timing, client, manifest."""

    def __init__(self, ctx: click.Context):
        self.config = _load_config(ctx.obj.get("config"))
        self.server_url = ctx.obj.get("server_url") or self.config.get("server_url")
        self.start = time.perf_counter()

    def client(self) -> ServiceClient:
        return ServiceClient(self.server_url)

    def finish(self, command: str, config: dict, inputs: dict, output: Path) -> None:
        manifest = build_manifest(
            command=command,
            config=config,
            inputs=inputs,
            wall_clock_seconds=time.perf_counter() - self.start,
        )
        write_manifest(output, manifest)


@click.group()
@click.version_option(version=__version__)
@click.option("--server-url", default=None, help="Target a running service instead of in-process.")
@click.option("--config", default=None, type=click.Path(), help="JSON config file with defaults.")
@click.pass_context
def main(ctx: click.Context, server_url: str | None, config: str | None) -> None:
    """Score, select, compare, diversify, and report on instruction datasets."""
    ctx.ensure_object(dict)
    ctx.obj["server_url"] = server_url
    ctx.obj["config"] = config


def _fail(e: ToolError) -> None:
    click.echo(f"error ({e.wire_type}): {e}", err=True)
    sys.exit(e.exit_code)


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--backend", "backend_spec", required=True, help="uniform:V | table:PATH | remote:URL")
@click.option("--template", default=None, help="Built-in template name.")
@click.option("--template-file", default=None, type=click.Path(exists=True))
@click.option("--workers", default=None, type=int)
@click.option("--max-failure-fraction", default=None, type=float)
@click.option("--max-length", default=None, type=int, help="Remote backend context budget.")
@click.option("--timeout", default=None, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def score(ctx, dataset_path, format_, backend_spec, template, template_file,
          workers, max_failure_fraction, max_length, timeout, out_path):
    """Score every sample's perplexities and IFD with a backend."""
    try:
        run = _Run(ctx)
        cfg = run.config
        template = _resolve(template, "template", cfg)
        workers = int(_resolve(workers, "workers", cfg))
        max_failure_fraction = float(_resolve(max_failure_fraction, "max_failure_fraction", cfg))
        max_length = _resolve(max_length, "max_length", cfg)
        timeout = float(_resolve(timeout, "timeout", cfg))

        dataset = load_dataset(dataset_path, format=_resolve(format_, "format", cfg))
        backend = _backend_wire(backend_spec, max_length, timeout)
        with run.client() as client:
            result = client.score(
                _samples_wire(dataset),
                backend=backend,
                template=_template_wire(template, template_file),
                workers=workers,
                max_failure_fraction=max_failure_fraction,
            )
        rows = rows_from_dicts(result["rows"])
        write_scores(out_path, rows, result["meta"])
        elapsed = result["elapsed_seconds"]
        rate = len(rows) / elapsed if elapsed > 0 else float("inf")
        click.echo(
            f"scored {len(rows)}/{dataset.n} samples in {elapsed:.2f}s "
            f"({rate:.1f} samples/s), scorer: {result['meta']['backend']}"
        )
        if result["failures"]:
            click.echo(f"excluded {len(result['failures'])} failed samples", err=True)
        run.finish(
            "score",
            {
                "backend": backend_spec,
                "template": template,
                "template_file": template_file,
                "workers": workers,
                "max_failure_fraction": max_failure_fraction,
                "max_length": max_length,
                "timeout": timeout,
            },
            {"dataset": dataset_path},
            Path(out_path),
        )
    except ToolError as e:
        _fail(e)


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--ratio", default=None, type=float)
@click.option("--ifd-cap", "ifd_cap", default=None, help="Number or 'inf' to disable.")
@click.option("--output-format", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def select(ctx, dataset_path, format_, scores_path, ratio, ifd_cap, output_format, out_path):
    """Materialize the top-IFD subset under the cap."""
    try:
        run = _Run(ctx)
        cfg = run.config
        ratio = float(_resolve(ratio, "ratio", cfg))
        cap = _parse_cap(_resolve(ifd_cap, "ifd_cap", cfg))
        output_format = _resolve(output_format, "output_format", cfg)

        dataset = load_dataset(dataset_path, format=_resolve(format_, "format", cfg))
        _, rows = read_scores(scores_path)
        with run.client() as client:
            result = client.select(_samples_wire(dataset), rows_to_dicts(rows), ratio, cap)
        _write_subset(result["subset"], Path(out_path), output_format)
        click.echo(
            f"selected {len(result['selected_ids'])} of budget {result['budget']} "
            f"({result['n_excluded_by_cap']} excluded by cap"
            + (", underfilled)" if result["underfilled"] else ")")
        )
        run.finish(
            "select",
            {"ratio": ratio, "ifd_cap": "inf" if cap is None else cap, "output_format": output_format},
            {"dataset": dataset_path, "scores": scores_path},
            Path(out_path),
        )
    except ToolError as e:
        _fail(e)


@main.command()
@click.option("--scores-a", required=True, type=click.Path(exists=True))
@click.option("--scores-b", required=True, type=click.Path(exists=True))
@click.option("--budgets", default=None, help="Comma-separated fractions, e.g. 0.05,0.10,0.15")
@click.option("--ifd-cap", "ifd_cap", default=None, help="Number or 'inf' to disable.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def compare(ctx, scores_a, scores_b, budgets, ifd_cap, out_path):
    """Consistency report between two score files."""
    try:
        run = _Run(ctx)
        cfg = run.config
        budgets = str(_resolve(budgets, "budgets", cfg))
        cap = _parse_cap(_resolve(ifd_cap, "ifd_cap", cfg))
        fractions = [float(b) for b in budgets.split(",") if b.strip()]

        _, rows_a = read_scores(scores_a)
        _, rows_b = read_scores(scores_b)
        with run.client() as client:
            report = client.compare(rows_to_dicts(rows_a), rows_to_dicts(rows_b), fractions, cap)
        Path(out_path).write_text(
            json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        rho_ppl = report["spearman_ppl"]
        rho_ifd = report["spearman_ifd"]
        click.echo(f"scorers: {report['scorer_a']} vs {report['scorer_b']} (n={report['n_common']})")
        click.echo(f"spearman ppl: {'degenerate' if rho_ppl is None else f'{rho_ppl:.4f}'}")
        click.echo(f"spearman ifd: {'degenerate' if rho_ifd is None else f'{rho_ifd:.4f}'}")
        for frac, val in report["overlap"].items():
            click.echo(f"overlap @ {frac}: {val:.4f}")
        for key, note in report.get("notes", {}).items():
            click.echo(f"note ({key}): {note}")
        run.finish(
            "compare",
            {"budgets": fractions, "ifd_cap": "inf" if cap is None else cap},
            {"scores_a": scores_a, "scores_b": scores_b},
            Path(out_path),
        )
    except ToolError as e:
        _fail(e)


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--pre-ratio", default=None, type=float)
@click.option("--final-ratio", default=None, type=float)
@click.option("--ifd-cap", "ifd_cap", default=None, help="Number or 'inf' to disable.")
@click.option("--embedder", default=None, help="hashed-bow[:dim] | remote:URL")
@click.option("--output-format", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--save-embeddings", "embeddings_out", default=None, type=click.Path(),
              help="Also write the stage-1 pool embeddings as a binary cache.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def diversify(ctx, dataset_path, format_, scores_path, pre_ratio, final_ratio,
              ifd_cap, embedder, output_format, embeddings_out, out_path):
    """Two-stage selection: IFD pre-filter, then facility-location greedy."""
    try:
        run = _Run(ctx)
        cfg = run.config
        pre_ratio = float(_resolve(pre_ratio, "pre_ratio", cfg))
        final_ratio = float(_resolve(final_ratio, "final_ratio", cfg))
        cap = _parse_cap(_resolve(ifd_cap, "ifd_cap", cfg))
        embedder = _resolve(embedder, "embedder", cfg)
        output_format = _resolve(output_format, "output_format", cfg)

        dataset = load_dataset(dataset_path, format=_resolve(format_, "format", cfg))
        _, rows = read_scores(scores_path)
        with run.client() as client:
            result = client.diversify(
                _samples_wire(dataset),
                rows_to_dicts(rows),
                pre_ratio=pre_ratio,
                final_ratio=final_ratio,
                ifd_cap=cap,
                embedder=_embedder_wire(embedder),
                return_vectors=embeddings_out is not None,
            )
        _write_subset(result["subset"], Path(out_path), output_format)
        if embeddings_out:
            import numpy as np

            embeddings = EmbeddingSet(
                ids=result["vector_ids"],
                vectors=np.asarray(result["vectors"], dtype=np.float32),
                embedder=result["metadata"]["embedder"],
            )
            save_embeddings(embeddings, embeddings_out)
        click.echo(
            f"stage 1 kept {result['pool_size']} samples; stage 2 picked {result['k']} "
            f"(embedder: {result['metadata']['embedder']})"
        )
        run.finish(
            "diversify",
            {
                "pre_ratio": pre_ratio,
                "final_ratio": final_ratio,
                "ifd_cap": "inf" if cap is None else cap,
                "embedder": embedder,
                "output_format": output_format,
            },
            {"dataset": dataset_path, "scores": scores_path},
            Path(out_path),
        )
    except ToolError as e:
        _fail(e)


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--format", "format_", default=None, type=click.Choice(["alpaca-json", "jsonl"]))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--fraction", default=None, type=float, help="Verb-noun slice fraction.")
@click.option("--top-k-rows", default=None, type=int)
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.pass_context
def report(ctx, dataset_path, format_, scores_path, fraction, top_k_rows, out_dir):
    """Dataset quality report: distributions, cap stats, verb-noun tables."""
    try:
        run = _Run(ctx)
        cfg = run.config
        fraction = float(_resolve(fraction, "fraction", cfg))
        top_k_rows = int(_resolve(top_k_rows, "top_k_rows", cfg))

        dataset = load_dataset(dataset_path, format=_resolve(format_, "format", cfg))
        _, rows = read_scores(scores_path)
        with run.client() as client:
            result = client.report(_samples_wire(dataset), rows_to_dicts(rows), fraction, top_k_rows)
        doc = result["report"]

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out / "report.txt").write_text(result["text"], encoding="utf-8")

        summaries = [
            DistributionSummary(
                scorer=doc["scorer"],
                metric=metric,
                quantiles={int(p): v for p, v in doc["distributions"][metric]["quantiles"].items()},
                mean=doc["distributions"][metric]["mean"],
                count=doc["distributions"][metric]["count"],
            )
            for metric in ("ppl_cond", "ifd")
        ]
        write_quantile_csv(summaries, out / "quantiles.csv")
        from .report import VerbNounTable

        for which in ("top", "bottom"):
            table = VerbNounTable(
                slice=which,
                fraction=doc["verb_noun"]["fraction"],
                rows=[(r["verb"], r["noun"], r["count"]) for r in doc["verb_noun"][which]],
            )
            write_verb_noun_csv(table, out / f"verb_noun_{which}.csv")

        if doc["degenerate"]:
            click.echo("WARNING: degenerate dataset — no sample has IFD < 1", err=True)
        click.echo(result["text"], nl=False)
        run.finish(
            "report",
            {"fraction": fraction, "top_k_rows": top_k_rows},
            {"dataset": dataset_path, "scores": scores_path},
            out / "report.json",
        )
    except ToolError as e:
        _fail(e)


if __name__ == "__main__":
    main()
