"""Command-line entry point: extract, mine, stats, train, predict, baseline."""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import IO, Iterator

import click
import numpy as np

from . import __version__, ingest
from .analyze import InsufficientClass as AnalyzeInsufficient
from .analyze import compare_all
from .dataset import Dataset, DatasetError, SurvivalLabel
from .extract import extract_snapshot
from .llm_baseline import HttpChatProvider, ProviderConfig, evaluate_llm
from .metrics import compute_features
from .model import (
    EvalReport,
    ForestModel,
    Hyperparams,
    InsufficientClass,
    MissingClass,
    SchemaMismatch,
    evaluate_cv,
    random_baseline,
    samples_to_arrays,
    train_forest,
    undersample_indices,
)
from .track import DEFAULT_THRESHOLD, MethodSource, added_methods, build_samples

log = logging.getLogger("cutpredict")

FORMATS = click.Choice(["table", "json-lines"])


@contextlib.contextmanager
def _output(path: str | None) -> Iterator[IO[str]]:
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            yield fp


def _json_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def _load_config(ctx: click.Context, _param, value: str | None):
    if not value:
        return value
    try:
        with open(value, encoding="utf-8") as fp:
            data = json.load(fp)
    except (OSError, ValueError) as exc:
        raise click.BadParameter(f"cannot read config {value}: {exc}") from exc
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return value


@click.group(context_settings={"auto_envvar_prefix": "CUTPREDICT", "show_default": True})
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True,
              expose_value=False, help="JSON file of per-command option defaults.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.version_option(__version__)
def main(verbose: int) -> None:
    """Predict which methods added in a pull request will be deleted before merge."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _has_commits(repo: str) -> bool:
    proc = ingest._git(repo, "rev-list", "-n", "1", "--all", check=False)
    return proc.returncode == 0 and bool(proc.stdout.strip())


@main.command("extract")
@click.argument("repo", type=click.Path(exists=True, file_okay=False))
@click.argument("revision", default="HEAD")
@click.option("--out", "-o", default="-", help="Output file (line-delimited JSON).")
@click.option("--filter", "path_filter", multiple=True, help="Glob restricting extracted paths.")
def cmd_extract(repo: str, revision: str, out: str, path_filter: tuple[str, ...]) -> None:
    """Dump every method and its features at one revision."""
    try:
        snap = ingest.snapshot(repo, revision, list(path_filter) or None)
    except ingest.UnresolvableRef as exc:
        if not _has_commits(repo):
            with _output(out):
                return
        raise click.ClickException(str(exc)) from exc
    except ingest.GitError as exc:
        raise click.ClickException(str(exc)) from exc
    skipped: list = []
    methods = extract_snapshot(snap, skipped)
    with _output(out) as fp:
        for ident in sorted(methods):
            rec = methods[ident]
            fp.write(_json_line({
                "file_path": ident.file_path,
                "scope_path": list(ident.scope_path),
                "name": ident.name,
                "start_line": rec.start_line,
                "end_line": rec.end_line,
                "is_async": rec.is_async,
                "decorators": list(rec.decorators),
                "features": compute_features(rec).as_dict(),
                "source_text": rec.source_text,
            }))
    for err in skipped:
        click.echo(f"skipped {err.file_path}: {err.message}", err=True)


def read_triples(path: str) -> list[ingest.RevisionTriple]:
    triples = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            text = line.rstrip("\n")
            if not text.strip() or text.lstrip().startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) != 4 or not all(p.strip() for p in parts):
                raise click.UsageError(
                    f"{path}:{lineno}: expected pr_id<TAB>base<TAB>head<TAB>merge"
                )
            pr_id, base, head, merge = (p.strip() for p in parts)
            triples.append(ingest.RevisionTriple(base=base, head=head, merge=merge, pr_id=pr_id))
    return triples


@main.command("mine")
@click.argument("repo", type=click.Path(exists=True, file_okay=False))
@click.argument("triples_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", default="-", help="Dataset output file.")
@click.option("--chain/--no-chain", default=False, help="Match methods commit by commit.")
@click.option("--threshold", type=click.FloatRange(0, 1, min_open=True), default=DEFAULT_THRESHOLD,
              help="Body similarity needed to accept a rename or move.")
@click.option("--filter", "path_filter", multiple=True, help="Glob restricting mined paths.")
@click.option("--jobs", type=click.IntRange(1), default=1, help="Triples processed in parallel.")
@click.option("--skip-report", default=None, help="Write skipped PRs/files as line-delimited JSON.")
def cmd_mine(repo, triples_file, out, chain, threshold, path_filter, jobs, skip_report) -> None:
    """Build a labeled dataset from a file of pr_id/base/head/merge rows."""
    triples = read_triples(triples_file)
    result = build_samples(repo, triples, threshold, chain, list(path_filter) or None, jobs)
    dataset = Dataset(result.samples)
    with _output(out) as fp:
        dataset.write(fp)
    if skip_report:
        with _output(skip_report) as fp:
            for entry in result.skipped:
                fp.write(_json_line(entry.to_json()))
    click.echo(
        f"mined {len(dataset)} methods from {len(triples)} PRs ({len(result.skipped)} skipped)",
        err=True,
    )


def _load_dataset(path: str) -> Dataset:
    try:
        return Dataset.load(path)
    except (OSError, DatasetError, ValueError) as exc:
        raise click.ClickException(f"cannot read dataset {path}: {exc}") from exc


def deletion_summary(dataset: Dataset) -> dict:
    def rates(samples) -> dict:
        n = len(samples)
        method = sum(s.label is SurvivalLabel.DELETED_METHOD for s in samples)
        file_ = sum(s.label is SurvivalLabel.DELETED_FILE for s in samples)
        pct = (lambda c: 100.0 * c / n if n else 0.0)
        return {
            "methods": n,
            "prs": len({s.pr_id for s in samples}),
            "deleted": method + file_,
            "deleted_method_level": method,
            "deleted_file_level": file_,
            "deleted_pct": pct(method + file_),
            "method_level_pct": pct(method),
            "file_level_pct": pct(file_),
        }

    return {
        "all": rates(dataset.samples),
        "with_revisions": rates([s for s in dataset.samples if s.review_revisions > 0]),
    }


@main.command("stats")
@click.argument("dataset_path", metavar="DATASET", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", default="-")
@click.option("--format", "fmt", type=FORMATS, default="table")
def cmd_stats(dataset_path: str, out: str, fmt: str) -> None:
    """Deletion rates and per-feature deleted-vs-survived comparison."""
    dataset = _load_dataset(dataset_path)
    summary = deletion_summary(dataset)
    try:
        comparisons = compare_all(dataset.samples)
    except AnalyzeInsufficient as exc:
        comparisons = None
        problem = str(exc)
    with _output(out) as fp:
        if fmt == "json-lines":
            fp.write(_json_line({"summary": summary}))
            for c in comparisons or []:
                fp.write(_json_line(c.to_json()))
        else:
            for scope, label in (("all", "All PRs"), ("with_revisions", "PRs with revisions")):
                r = summary[scope]
                fp.write(
                    f"{label}: {r['methods']} methods in {r['prs']} PRs, "
                    f"deleted {r['deleted_pct']:.1f}% "
                    f"(method level {r['method_level_pct']:.1f}%, file level {r['file_level_pct']:.1f}%)\n"
                )
            if comparisons:
                fp.write("\n")
                fp.write(f"{'feature':<24}{'n_surv':>8}{'n_del':>8}{'U':>12}{'p':>11}{'delta':>9}  magnitude\n")
                for c in comparisons:
                    fp.write(
                        f"{c.feature_name:<24}{c.n_survived:>8}{c.n_deleted:>8}{c.u_statistic:>12.1f}"
                        f"{c.p_value:>11.3g}{c.cliffs_delta:>9.3f}  {c.magnitude}"
                        f"{' (degenerate)' if c.degenerate else ''}\n"
                    )
    if comparisons is None:
        raise click.ClickException(problem)


def _write_report(report: EvalReport, fp: IO[str], fmt: str, top: int = 10) -> None:
    if fmt == "json-lines":
        fp.write(_json_line(report.to_json()))
        return
    fp.write(f"{report.kind}: {len(report.folds)} fold(s), {report.n_samples} samples")
    if report.excluded:
        fp.write(f", {report.excluded} excluded")
    fp.write("\n")
    for metric, value in report.median.items():
        fp.write(f"  median {metric:<10}{value:.3f}\n")
    if report.importance_median:
        fp.write(f"\n{'feature':<24}{'median':>8}{'std':>8}\n")
        for name, med, std in report.importance_table(top):
            fp.write(f"{name:<24}{med:>8.3f}{std:>8.3f}\n")


def _hyperparams(trees, max_features, min_leaf, max_depth, seed) -> Hyperparams:
    if max_features not in ("sqrt", "log2", "all"):
        try:
            max_features = int(max_features)
        except ValueError:
            raise click.BadParameter("use sqrt, log2, all or an integer", param_hint="--max-features")
    return Hyperparams(n_trees=trees, max_features=max_features, min_leaf=min_leaf,
                       max_depth=max_depth, seed=seed)


@main.command("train")
@click.argument("dataset_path", metavar="DATASET", type=click.Path(exists=True, dir_okay=False))
@click.option("--folds", type=click.IntRange(2), default=10)
@click.option("--seed", type=click.IntRange(0), default=0)
@click.option("--trees", type=click.IntRange(1), default=100)
@click.option("--max-features", default="sqrt", help="sqrt, log2, all or an integer.")
@click.option("--min-leaf", type=click.IntRange(1), default=1)
@click.option("--max-depth", type=click.IntRange(1), default=None)
@click.option("--model-out", default=None, help="Where to save the model trained on all data.")
@click.option("--report-out", default=None, help="Where to save the CV report (JSON).")
@click.option("--format", "fmt", type=FORMATS, default="table")
def cmd_train(dataset_path, folds, seed, trees, max_features, min_leaf, max_depth, model_out, report_out, fmt):
    """Cross-validate the forest and fit a final model on the undersampled dataset."""
    dataset = _load_dataset(dataset_path)
    X, y = samples_to_arrays(dataset.samples)
    params = _hyperparams(trees, max_features, min_leaf, max_depth, seed)
    try:
        report = evaluate_cv(X, y, folds, params, seed)
        keep = undersample_indices(y, [seed, 3])
        model = train_forest(X[keep], y[keep], params)
    except (InsufficientClass, MissingClass) as exc:
        raise click.ClickException(str(exc)) from exc
    if model_out:
        model.save(model_out)
    if report_out:
        with _output(report_out) as fp:
            json.dump(report.to_json(), fp, indent=1)
            fp.write("\n")
    _write_report(report, sys.stdout, fmt)


@main.command("predict")
@click.argument("model_path", metavar="MODEL", type=click.Path(exists=True, dir_okay=False))
@click.argument("repo", type=click.Path(exists=True, file_okay=False))
@click.option("--base", required=True, help="Revision the pull request branched from.")
@click.option("--head", default="HEAD", help="Revision under review.")
@click.option("--threshold", type=click.FloatRange(0, 1, min_open=True), default=DEFAULT_THRESHOLD)
@click.option("--filter", "path_filter", multiple=True)
@click.option("--report-out", "--out", "-o", "out", default="-")
@click.option("--format", "fmt", type=FORMATS, default="table")
def cmd_predict(model_path, repo, base, head, threshold, path_filter, out, fmt):
    """Rank methods added between BASE and HEAD by predicted deletion probability."""
    try:
        model = ForestModel.load(model_path)
    except SchemaMismatch as exc:
        raise click.ClickException(str(exc)) from exc
    except (OSError, ValueError, KeyError) as exc:
        raise click.ClickException(f"cannot read model {model_path}: {exc}") from exc
    try:
        b = ingest.resolve_ref(repo, base)
        h = ingest.resolve_ref(repo, head)
        if not ingest.is_ancestor(repo, b, h):
            raise ingest.AncestryViolation(f"{base} is not an ancestor of {head}")
        triple = ingest.RevisionTriple(b, h, h)
        source = MethodSource(repo, list(path_filter) or None, ingest.changed_python_paths(repo, b, h))
        added = sorted(added_methods(triple, source, threshold))
    except ingest.GitError as exc:
        raise click.ClickException(str(exc)) from exc
    records = [source.methods(h)[ident] for ident in added]
    rows = []
    if records:
        X = np.array([compute_features(r).as_floats() for r in records])
        for rec, p in zip(records, model.predict_proba(X)):
            rows.append((float(p), rec))
    rows.sort(key=lambda r: (-r[0], r[1].identity))
    with _output(out) as fp:
        if fmt == "table" and rows:
            fp.write(f"{'rank':>4}  {'p_delete':>8}  method\n")
        for rank, (p, rec) in enumerate(rows, start=1):
            ident = rec.identity
            if fmt == "json-lines":
                fp.write(_json_line({
                    "rank": rank,
                    "probability": p,
                    "file_path": ident.file_path,
                    "qualname": ident.qualname(),
                    "start_line": rec.start_line,
                    "end_line": rec.end_line,
                }))
            else:
                fp.write(f"{rank:>4}  {p:>8.3f}  {ident.file_path}:{rec.start_line} {ident.qualname()}\n")


class CachedProvider:
    """Reuses earlier completions stored as one file per prompt hash."""

    def __init__(self, inner, cache_dir: str, model: str) -> None:
        self.inner = inner
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.model = model

    def complete(self, prompt: str) -> str:
        key = hashlib.sha256(f"{self.model}\0{prompt}".encode()).hexdigest()
        path = self.dir / f"{key}.txt"
        if path.exists():
            return path.read_text(encoding="utf-8")
        reply = self.inner.complete(prompt)
        path.write_text(reply, encoding="utf-8")
        return reply


@main.command("baseline")
@click.argument("dataset_path", metavar="DATASET", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["random", "llm"]), required=True)
@click.option("--folds", type=click.IntRange(1), default=10, help="1 scores the whole dataset at once.")
@click.option("--seed", type=click.IntRange(0), default=0)
@click.option("--base-url", default=ProviderConfig.base_url)
@click.option("--model", "model_name", default=ProviderConfig.model)
@click.option("--token-env", default=ProviderConfig.token_env, help="Environment variable holding the API token.")
@click.option("--max-retries", type=click.IntRange(0), default=ProviderConfig.max_retries)
@click.option("--concurrency", type=click.IntRange(1), default=ProviderConfig.max_concurrency)
@click.option("--audit", default=None, help="Append request/response bodies to this file.")
@click.option("--cache-dir", envvar="CUTPREDICT_CACHE_DIR", default=None, help="Completion cache directory.")
@click.option("--out", "-o", default="-")
@click.option("--format", "fmt", type=FORMATS, default="table")
def cmd_baseline(dataset_path, kind, folds, seed, base_url, model_name, token_env, max_retries,
                 concurrency, audit, cache_dir, out, fmt):
    """Random or LLM baseline metrics on a dataset."""
    dataset = _load_dataset(dataset_path)
    try:
        if kind == "random":
            _, y = samples_to_arrays(dataset.samples)
            report = random_baseline(y, seed=seed, k=folds)
        else:
            config = ProviderConfig(base_url=base_url, model=model_name, token_env=token_env,
                                    max_retries=max_retries, max_concurrency=concurrency,
                                    audit_path=audit)
            provider = HttpChatProvider(config)
            if cache_dir:
                provider = CachedProvider(provider, cache_dir, model_name)
            report = evaluate_llm(dataset.samples, provider, config, k=folds, seed=seed)
    except (InsufficientClass, MissingClass) as exc:
        raise click.ClickException(str(exc)) from exc
    with _output(out) as fp:
        _write_report(report, fp, fmt)


if __name__ == "__main__":  # pragma: no cover
    main()
