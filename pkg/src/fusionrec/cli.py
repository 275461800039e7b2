"""Command-line pipeline: prepare -> enrich/encode -> train -> evaluate,
plus ablation sweeps and embedding export.

Exit codes: 0 success, 2 usage/config, 3 data, 4 transport, 5 numeric.
Artifacts land under the configured output directory, keyed by fingerprints,
and reruns with unchanged inputs are no-ops.
"""

import json
import sys
from pathlib import Path

import click

from . import corpus
from .config import RunConfig, load_config
from .enrichment import (
    EnrichmentCache,
    NO_TITLE_SPEC,
    PromptSpec,
    VLMClient,
    build_feature_tables,
    enrich_corpus,
    make_encoder,
)
from .errors import ConfigError, DataError, FusionRecError, TransportError
from .estimator import BASELINES, FusionGraphRecommender, make_baseline
from .evaluation import MetricsReport
from .export import write_embeddings
from .features import read_table, write_table
from .fingerprint import file_sha256, sha256_hex
from .graphs import (
    build_item_knn,
    build_norm_bipartite,
    build_user_knn,
    read_graph,
    write_graph,
)
from .model.network import ABLATION_ARMS
from .trainer import TrainingData

ARM_LABELS = {
    "raw_visual": "Original",
    "vlm_no_title": "VLM w.o title",
    "pooling": "Pooling",
    "concat": "Concat",
    "weighted_concat": "Weighted Concat",
    "full": "full",
}


@click.group()
@click.option("--config", "-c", "config_path", default="config.yaml", show_default=True,
              help="Path to the YAML run configuration.")
@click.option("--seed", type=int, default=None, help="Override train.seed (and the split seed).")
@click.pass_context
def cli(ctx, config_path, seed):
    """Multimodal recommender pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed


def _load(ctx) -> RunConfig:
    config = load_config(ctx.obj["config_path"])
    if ctx.obj.get("seed") is not None:
        config.train.seed = ctx.obj["seed"]
    return config


def _split_dir(config: RunConfig) -> Path:
    return config.output_dir / "split"


def _features_dir(config: RunConfig) -> Path:
    return config.output_dir / "features"


def _graphs_dir(config: RunConfig) -> Path:
    return config.output_dir / "graphs"


def _read_bundle(config: RunConfig) -> corpus.SplitBundle:
    split_dir = _split_dir(config)
    if not (split_dir / "split.json").exists():
        raise DataError(
            f"no prepared split under {split_dir}; run `fusionrec prepare` first"
        )
    return corpus.read_split(split_dir)


def _graph_if_fresh(path: Path, expected: dict):
    header_path = Path(str(path) + ".json")
    if not path.exists() or not header_path.exists():
        return None
    with open(header_path, "r", encoding="utf-8") as f:
        header = json.load(f)
    if all(header.get(key) == value for key, value in expected.items()):
        return read_graph(path)
    return None


def _maybe_build_item_graph(config: RunConfig, quiet: bool = False) -> bool:
    """Build and persist the item KNN graph when both feature tables exist."""
    features_dir = _features_dir(config)
    visual_path = features_dir / "visual.vft"
    textual_path = features_dir / "textual.vft"
    if not (visual_path.exists() and textual_path.exists()):
        if not quiet:
            click.echo("item graph deferred: feature tables not built yet (run enrich)")
        return False
    visual = read_table(visual_path)
    textual = read_table(textual_path)
    expected = {
        "visual_fingerprint": visual.fingerprint,
        "textual_fingerprint": textual.fingerprint,
        "k": config.train.knn_k,
    }
    path = _graphs_dir(config) / "item_knn.graph"
    if _graph_if_fresh(path, expected) is not None:
        return True
    graph = build_item_knn(visual, textual, config.train.knn_k)
    write_graph(graph, path, extra_header=expected)
    if not quiet:
        click.echo(f"wrote item graph: {graph.n_edges} edges -> {path}")
    return True


@cli.command()
@click.option("--force", is_flag=True, help="Rebuild even when fingerprints match.")
@click.pass_context
def prepare(ctx, force):
    """Ingest interactions, apply k-core filtering, split, and build graphs."""
    config = _load(ctx)
    interactions = config.data.interactions
    if not interactions or not Path(interactions).exists():
        raise ConfigError(f"interactions file not found: {interactions!r}")
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config.write_resolved(out / "config.resolved.yaml")

    input_fp = sha256_hex(
        file_sha256(interactions),
        {
            "kcore": config.data.kcore,
            "ratios": list(config.data.split_ratios),
            "seed": config.train.seed,
            "knn_k": config.train.knn_k,
            "normalize_user_graph": config.train.normalize_user_graph,
        },
    )
    manifest_path = out / "prepare.json"
    if manifest_path.exists() and not force:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("input_fingerprint") == input_fp:
            _maybe_build_item_graph(config, quiet=True)
            click.echo("up-to-date (input fingerprint match)")
            return

    interactions_set = corpus.load_interactions(interactions)
    filtered = corpus.apply_kcore(interactions_set, config.data.kcore)
    bundle = corpus.split(filtered, config.data.split_ratios, seed=config.train.seed)
    header = corpus.write_split(bundle, _split_dir(config))

    bipartite = build_norm_bipartite(bundle.train)
    write_graph(
        bipartite,
        _graphs_dir(config) / "bipartite.graph",
        extra_header={"train_fingerprint": bundle.train.fingerprint()},
    )
    user_graph = build_user_knn(
        bundle.train, config.train.knn_k, normalize=config.train.normalize_user_graph
    )
    write_graph(
        user_graph,
        _graphs_dir(config) / "user_knn.graph",
        extra_header={
            "train_fingerprint": bundle.train.fingerprint(),
            "k": config.train.knn_k,
            "normalized": config.train.normalize_user_graph,
        },
    )
    _maybe_build_item_graph(config)

    manifest = {
        "input_fingerprint": input_fp,
        "split_fingerprint": bundle.fingerprint(),
        "n_users": bundle.n_users,
        "n_items": bundle.n_items,
        "counts": header["counts"],
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    click.echo(
        f"prepared {bundle.n_users} users x {bundle.n_items} items "
        f"(train/val/test = {header['counts']['train']}/"
        f"{header['counts']['validation']}/{header['counts']['test']})"
    )


def _make_client(config: RunConfig, offline: bool = False) -> VLMClient:
    if offline or not config.endpoint.url:
        def refuse(url, payload, headers, timeout):
            raise RuntimeError("no endpoint configured (offline mode)")

        return VLMClient(
            url="offline://none", model=config.endpoint.model,
            max_attempts=1, backoff_start=0.0, transport=refuse,
        )
    return VLMClient(
        url=config.endpoint.url,
        model=config.endpoint.model,
        temperature=config.endpoint.temperature,
        timeout=config.endpoint.timeout,
        max_attempts=config.endpoint.max_attempts,
        backoff_start=config.endpoint.backoff_start,
    )


def _encoder(config: RunConfig):
    return make_encoder(
        kind=config.encoder.kind,
        dim=config.encoder.dim,
        seed=config.encoder.seed,
        model_name=config.encoder.model_name,
    )


def _run_enrichment(config: RunConfig, no_title: bool, offline: bool):
    bundle = _read_bundle(config)
    if not config.data.metadata or not Path(config.data.metadata).exists():
        raise ConfigError(f"metadata file not found: {config.data.metadata!r}")
    metadata = corpus.load_metadata(config.data.metadata, bundle.train)
    cache = EnrichmentCache(config.cache_dir)
    client = _make_client(config, offline=offline)
    spec = NO_TITLE_SPEC if no_title else PromptSpec()
    titles = [""] * len(metadata) if no_title else None
    descriptions, failures = enrich_corpus(
        metadata, client, cache, spec, titles=titles,
        concurrency=config.endpoint.concurrency,
    )
    encoder = _encoder(config)
    visual, textual = build_feature_tables(
        metadata, descriptions, encoder, cot_marker=config.cot_marker or None
    )
    features_dir = _features_dir(config)
    visual_name = "visual_no_title.vft" if no_title else "visual.vft"
    write_table(visual, features_dir / visual_name)
    write_table(textual, features_dir / "textual.vft")
    config.write_resolved(config.output_dir / "config.resolved.yaml")

    degraded = sum(1 for d in descriptions.values() if d.degraded)
    click.echo(
        f"described {len(descriptions)}/{len(metadata)} items "
        f"({degraded} degraded, {client.n_requests} endpoint calls, "
        f"title coverage {metadata.title_coverage:.2f}, "
        f"image coverage {metadata.image_coverage:.2f})"
    )
    click.echo(f"wrote {features_dir / visual_name} and {features_dir / 'textual.vft'}")
    if not no_title:
        _maybe_build_item_graph(config, quiet=True)
    if failures:
        failures_path = config.output_dir / "failures.json"
        with open(failures_path, "w", encoding="utf-8") as f:
            json.dump(failures, f, indent=2, sort_keys=True)
        raise TransportError(
            f"partial enrichment: {len(failures)} item(s) failed; see {failures_path}"
        )


@cli.command()
@click.option("--no-title", is_flag=True,
              help="Render prompts without the item title (ablation input).")
@click.pass_context
def enrich(ctx, no_title):
    """Generate cached item descriptions and encode the visual feature table."""
    _run_enrichment(_load(ctx), no_title=no_title, offline=False)


@cli.command()
@click.option("--no-title", is_flag=True, help="Encode the no-title description set.")
@click.pass_context
def encode(ctx, no_title):
    """Rebuild feature tables offline from cached descriptions and metadata."""
    _run_enrichment(_load(ctx), no_title=no_title, offline=True)


def _tables_for_arm(config: RunConfig, arm: str):
    features_dir = _features_dir(config)
    textual_path = features_dir / "textual.vft"
    if not textual_path.exists():
        raise DataError(f"missing {textual_path}; run `fusionrec enrich` first")
    textual = read_table(textual_path)
    if arm == "raw_visual":
        raw_path = config.data.raw_visual_features
        if not raw_path or not Path(raw_path).exists():
            raise DataError(
                "the raw_visual arm needs data.raw_visual_features pointing at a "
                "feature container of original image embeddings"
            )
        visual = read_table(raw_path)
    elif arm == "vlm_no_title":
        path = features_dir / "visual_no_title.vft"
        if not path.exists():
            raise DataError(f"missing {path}; run `fusionrec enrich --no-title` first")
        visual = read_table(path)
    else:
        path = features_dir / "visual.vft"
        if not path.exists():
            raise DataError(f"missing {path}; run `fusionrec enrich` first")
        visual = read_table(path)
    return visual, textual


def _training_data(config: RunConfig, arm: str) -> TrainingData:
    bundle = _read_bundle(config)
    visual, textual = _tables_for_arm(config, arm)
    graphs_dir = _graphs_dir(config)
    bipartite = _graph_if_fresh(
        graphs_dir / "bipartite.graph",
        {"train_fingerprint": bundle.train.fingerprint()},
    )
    user_graph = _graph_if_fresh(
        graphs_dir / "user_knn.graph",
        {
            "train_fingerprint": bundle.train.fingerprint(),
            "k": config.train.knn_k,
            "normalized": config.train.normalize_user_graph,
        },
    )
    item_graph = _graph_if_fresh(
        graphs_dir / "item_knn.graph",
        {
            "visual_fingerprint": visual.fingerprint,
            "textual_fingerprint": textual.fingerprint,
            "k": config.train.knn_k,
        },
    )
    return TrainingData(
        bundle=bundle, visual=visual, textual=textual,
        bipartite=bipartite, item_graph=item_graph, user_graph=user_graph,
    )


def _train_arm(config: RunConfig, arm: str, force: bool = False):
    """Train one arm (or reuse its keyed run directory); returns (report, run_dir)."""
    data = _training_data(config, arm)
    estimator = FusionGraphRecommender.from_train_config(config.train, arm=arm)
    run_key = estimator.config_fingerprint(data)[:12]
    run_dir = config.output_dir / "runs" / run_key
    metrics_path = run_dir / "metrics_test.json"
    if metrics_path.exists() and not force:
        click.echo(f"[{arm}] up-to-date (run {run_key})")
        with open(metrics_path, "r", encoding="utf-8") as f:
            return MetricsReport.from_dict(json.load(f)), run_dir

    run_dir.mkdir(parents=True, exist_ok=True)
    config.write_resolved(run_dir / "config.yaml")
    log_path = run_dir / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_file:
        def log_fn(record):
            log_file.write(json.dumps(record, sort_keys=True) + "\n")

        estimator.fit(data, log_fn=log_fn)
    estimator.save(run_dir / "checkpoint")
    with open(run_dir / "metrics_validation.json", "w", encoding="utf-8") as f:
        f.write(estimator.validation_report_.to_json() + "\n")
    with open(metrics_path, "w", encoding="utf-8") as f:
        f.write(estimator.test_report_.to_json() + "\n")
    click.echo(
        f"[{arm}] best epoch {estimator.best_epoch_}, run {run_key}\n"
        + estimator.test_report_.to_text_table()
    )
    return estimator.test_report_, run_dir


@cli.command()
@click.option("--arm", type=click.Choice(ABLATION_ARMS), default=None,
              help="Override the configured ablation arm.")
@click.option("--force", is_flag=True, help="Retrain even when the keyed run exists.")
@click.pass_context
def train(ctx, arm, force):
    """Fit the recommender and report validation/test metrics."""
    config = _load(ctx)
    _train_arm(config, arm or config.train.arm, force=force)


def _default_run_dir(config: RunConfig, arm: str) -> Path:
    data = _training_data(config, arm)
    estimator = FusionGraphRecommender.from_train_config(config.train, arm=arm)
    return config.output_dir / "runs" / estimator.config_fingerprint(data)[:12]


@cli.command()
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(), default=None,
              help="Checkpoint directory (defaults to the configured run's).")
@click.option("--baseline", type=click.Choice(sorted(BASELINES)), default=None,
              help="Evaluate a reference baseline instead of a checkpoint.")
@click.pass_context
def evaluate(ctx, checkpoint_dir, baseline):
    """Evaluate a trained checkpoint (or a baseline) on validation and test."""
    config = _load(ctx)
    config.write_resolved(config.output_dir / "config.resolved.yaml")
    arm = config.train.arm
    if baseline is not None:
        data = _training_data(config, arm)
        est = make_baseline(baseline)
        if baseline == "bpr_mf":
            est.set_params(seed=config.train.seed,
                           embedding_dim=config.train.embedding_dim)
        est.fit(data)
        report = est.evaluate("test", ks=config.train.eval_ks)
        click.echo(f"{baseline} baseline (test)\n" + report.to_text_table())
        return
    data = _training_data(config, arm)
    if checkpoint_dir is None:
        run_dir = _default_run_dir(config, arm)
        checkpoint_dir = run_dir / "checkpoint"
    else:
        run_dir = Path(checkpoint_dir).parent
        checkpoint_dir = Path(checkpoint_dir)
    if not Path(checkpoint_dir).exists():
        raise DataError(f"no checkpoint at {checkpoint_dir}; run `fusionrec train` first")
    est = FusionGraphRecommender.load(checkpoint_dir, data)
    reports = {
        part: est.evaluate(part, ks=config.train.eval_ks)
        for part in ("validation", "test")
    }
    out_path = run_dir / "metrics_evaluate.json"
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump({part: r.to_dict() for part, r in reports.items()}, f,
                  indent=2, sort_keys=True)
        f.write("\n")
    for part, report in reports.items():
        click.echo(f"{part}\n{report.to_text_table()}")


@cli.command()
@click.option("--arms", default="raw_visual,vlm_no_title,pooling,concat,weighted_concat,full",
              show_default=True, help="Comma-separated ablation arms to run.")
@click.option("--force", is_flag=True)
@click.pass_context
def ablate(ctx, arms, force):
    """Run the ablation arms and emit a combined comparison table."""
    config = _load(ctx)
    arm_list = [a.strip() for a in arms.split(",") if a.strip()]
    unknown = [a for a in arm_list if a not in ABLATION_ARMS]
    if unknown:
        raise ConfigError(
            f"unknown arm(s): {', '.join(unknown)}; valid: {', '.join(ABLATION_ARMS)}"
        )
    config.write_resolved(config.output_dir / "config.resolved.yaml")
    rows = {}
    for arm in arm_list:
        report, _ = _train_arm(config, arm, force=force)
        rows[arm] = report

    ks = sorted(next(iter(rows.values())).recall)
    lines = ["approach".ljust(18) + "".join(
        f"{'R@' + str(k):>10}" for k in ks) + "".join(f"{'N@' + str(k):>10}" for k in ks)]
    for arm in arm_list:
        report = rows[arm]
        lines.append(
            ARM_LABELS[arm].ljust(18)
            + "".join(f"{report.recall[k]:>10.4f}" for k in ks)
            + "".join(f"{report.ndcg[k]:>10.4f}" for k in ks)
        )
    table = "\n".join(lines)
    out_dir = config.output_dir
    with open(out_dir / "ablation.json", "w", encoding="utf-8") as f:
        json.dump({ARM_LABELS[a]: rows[a].to_dict() for a in arm_list}, f,
                  indent=2, sort_keys=True)
        f.write("\n")
    (out_dir / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    click.echo(table)


@cli.command("export-embeddings")
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(), default=None)
@click.option("--output", "output_path", type=click.Path(), default=None)
@click.pass_context
def export_embeddings(ctx, checkpoint_dir, output_path):
    """Write item embeddings plus top-2 principal-component coordinates."""
    config = _load(ctx)
    config.write_resolved(config.output_dir / "config.resolved.yaml")
    arm = config.train.arm
    data = _training_data(config, arm)
    if checkpoint_dir is None:
        checkpoint_dir = _default_run_dir(config, arm) / "checkpoint"
    if not Path(checkpoint_dir).exists():
        raise DataError(f"no checkpoint at {checkpoint_dir}; run `fusionrec train` first")
    est = FusionGraphRecommender.load(checkpoint_dir, data)
    if output_path is None:
        output_path = config.output_dir / "embeddings_2d.tsv"
    write_embeddings(output_path, data.bundle.train.item_ids, est.z_i_)
    click.echo(f"wrote {est.z_i_.shape[0]} rows -> {output_path}")


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.UsageError as e:
        e.show()
        sys.exit(2)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except FusionRecError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(e.exit_code)
    sys.exit(0)


if __name__ == "__main__":
    main()
