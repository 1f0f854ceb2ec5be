"""Command-line entry points tying the pipeline stages together."""

from __future__ import annotations

import functools
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import requests

from . import autolabel, evaluation, export, geo, imagery, inference, prompting, synth
from .errors import SolarscanError
from .model import GroundTruthLabel, LocationLabel, PvAssessment, QuantityBucket
from .store import Store, slugify


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _emit(obj: dict):
    click.echo(json.dumps(obj, sort_keys=True))


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SolarscanError as exc:
            click.echo(f"error [{type(exc).__name__}]: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--data-dir", default="data", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True), help="JSON config file; CLI flags take precedence.")
@click.pass_context
def main(ctx, data_dir, config_path):
    """Rooftop solar panel assessment pipeline."""
    config = {}
    if config_path:
        config = json.loads(Path(config_path).read_text())
    ctx.obj = {"store": Store(data_dir), "config": config, "data_dir": data_dir}


def _cfg(ctx, key, flag_value, default):
    """CLI flag > config file > default."""
    source = ctx.get_parameter_source(key)
    if source is not None and source.name != "DEFAULT":
        return flag_value
    return ctx.obj["config"].get(key.replace("_", "-"), ctx.obj["config"].get(key, default))


@main.command()
@click.option("--regions", "regions_file", type=click.Path(exists=True), default=None, help="Region definitions (newline-delimited JSON); defaults to the shipped six regions.")
@click.option("--overpass-url", default=geo.DEFAULT_OVERPASS_URL, show_default=True)
@click.option("--payload-dir", type=click.Path(exists=True), default=None, help="Directory with pre-fetched <region-slug>.json responses (offline mode).")
@click.option("--timeout", default=60, show_default=True)
@click.pass_context
@handle_errors
def ingest(ctx, regions_file, overpass_url, payload_dir, timeout):
    """Query known solar installation sites for each region."""
    store: Store = ctx.obj["store"]
    started = _now()
    regions = geo.load_regions(regions_file)
    counts = {}
    with store.lock():
        for region in regions:
            if payload_dir:
                payload_path = Path(payload_dir) / f"{slugify(region.name)}.json"
                payload = payload_path.read_text()
            else:
                query = geo.build_site_query(region, timeout_s=timeout)
                resp = requests.post(overpass_url, data={"data": query}, timeout=timeout + 30)
                resp.raise_for_status()
                payload = resp.text
            sites = geo.filter_sites_to_region(geo.parse_site_response(payload), region)
            path = store.sites_path(region.name)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as fh:
                for site in sites:
                    fh.write(json.dumps(site.to_json()) + "\n")
            counts[region.name] = len(sites)
        store.record_run("ingest", {"regions_file": regions_file, "overpass_url": overpass_url}, counts, started)
    _emit({"stage": "ingest", "sites": counts})


@main.command()
@click.option("--zoom", default=20, show_default=True)
@click.option("--size", default=640, show_default=True)
@click.option("--base-url", default="https://maps.googleapis.com/maps/api/staticmap", show_default=True)
@click.option("--seed", default=0, show_default=True, help="Seed for per-region site sampling.")
@click.option("--regions", "regions_file", type=click.Path(exists=True), default=None)
@click.pass_context
@handle_errors
def fetch(ctx, zoom, size, base_url, seed, regions_file):
    """Fetch satellite scenes for sampled sites."""
    store: Store = ctx.obj["store"]
    started = _now()
    zoom = _cfg(ctx, "zoom", zoom, 20)
    size = _cfg(ctx, "size", size, 640)
    config = imagery.StaticMapConfig(cache_dir=store.cache_dir, base_url=base_url)
    regions = geo.load_regions(regions_file)
    counts = {}
    with store.lock():
        for region in regions:
            rows = [geo.InstallationSite.from_json(o) for o in _read_jsonl(store.sites_path(region.name))]
            if not rows:
                counts[region.name] = 0
                continue
            k = min(region.sample_target, len(rows))
            sampled = geo.sample_sites(rows, k, seed)
            fetched = 0
            for site in sampled:
                scene = imagery.fetch_scene(site.point, zoom, size, config, region_name=region.name)
                store.save_scene(scene)
                fetched += 1
            counts[region.name] = fetched
        store.record_run("fetch", {"zoom": zoom, "size": size, "base_url": base_url}, counts, started)
    _emit({"stage": "fetch", "scenes": counts})


def _read_jsonl(path):
    from .store import read_jsonl

    return read_jsonl(path)


@main.command(name="slice")
@click.pass_context
@handle_errors
def slice_cmd(ctx):
    """Slice every fetched scene into 16 tiles (idempotent)."""
    store: Store = ctx.obj["store"]
    started = _now()
    n = 0
    with store.lock():
        for entry in store.scene_entries():
            scene = store.load_scene(entry)
            store.save_tiles(imagery.slice_scene(scene))
            n += 16
        store.record_run("slice", {}, {"tiles": n}, started)
    _emit({"stage": "slice", "tiles": n})


@main.group()
def labels():
    """Ground-truth label management."""


@labels.command(name="import")
@click.argument("label_file", type=click.Path(exists=True))
@click.pass_context
@handle_errors
def labels_import(ctx, label_file):
    """Append labels from a newline-delimited JSON file to the manifest."""
    store: Store = ctx.obj["store"]
    started = _now()
    imported = [GroundTruthLabel.from_json(obj) for obj in _read_jsonl(label_file)]
    with store.lock():
        store.append_labels(imported)
        store.record_run("labels-import", {"file": label_file}, {"labels": len(imported)}, started)
    _emit({"stage": "labels-import", "labels": len(imported)})


@main.command(name="synth")
@click.option("--spec", "spec_file", type=click.Path(exists=True), required=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_context
@handle_errors
def synth_cmd(ctx, spec_file, seed):
    """Generate synthetic scenes, tiles, and exact ground truth."""
    store: Store = ctx.obj["store"]
    started = _now()
    layouts, options = synth.layouts_from_spec_file(spec_file)
    if layouts is None:
        layouts = synth.random_layouts(
            options["scenes"], seed, options["empty_tile_fraction"], options["max_panels"]
        )
    with store.lock():
        counts = synth.generate_dataset(store, layouts, seed, size=options["size"])
        store.record_run("synth", {"spec": spec_file, "seed": seed}, counts, started)
    _emit({"stage": "synth", **counts})


@main.command()
@click.option("--backend", "backend_kind", type=click.Choice(["remote", "replay", "mock"]), default="mock", show_default=True)
@click.option("--k", default=5, show_default=True)
@click.option("--temperature", default=0.0, show_default=True)
@click.option("--endpoint", default="")
@click.option("--model-id", default="")
@click.option("--fixtures-dir", type=click.Path(), default=None)
@click.option("--parallelism", default=4, show_default=True)
@click.option("--examples-file", type=click.Path(exists=True), default=None)
@click.option("--template-file", type=click.Path(exists=True), default=None)
@click.pass_context
@handle_errors
def predict(ctx, backend_kind, k, temperature, endpoint, model_id, fixtures_dir, parallelism, examples_file, template_file):
    """Run inference over every tile; journal one record per tile."""
    store: Store = ctx.obj["store"]
    started = _now()
    template = prompting.load_template(template_file) if template_file else prompting.default_template()
    examples = prompting.load_example_bank(examples_file)
    backend = inference.BackendConfig(
        kind=backend_kind,
        endpoint=endpoint,
        model_id=model_id,
        fixtures_dir=fixtures_dir,
        parallelism=parallelism,
    )
    with store.lock():
        tiles = store.all_tiles()
        if not tiles:
            raise SolarscanError("no tiles to predict on; run slice or synth first")
        store.journal_path.unlink(missing_ok=True)
        records, summary = inference.run_batch(
            backend, tiles, template, examples, k, journal_path=store.journal_path
        )
        store.record_run(
            "predict",
            {"backend": backend_kind, "k": k, "temperature": temperature, "parallelism": parallelism},
            summary.__dict__,
            started,
        )
    _emit({"stage": "predict", **summary.__dict__})


def _aligned_pairs(records, truths, reject_as_negative):
    truth_by_id = {t.tile_id: t for t in truths}
    pairs = []
    for record in records:
        truth = truth_by_id.get(record.tile_id)
        if truth is None:
            continue
        assessment = record.outcome.assessment
        if assessment is None:
            if not reject_as_negative:
                continue
            assessment = PvAssessment(False, LocationLabel.NA, QuantityBucket.NA, 0.5, 0.0)
        pairs.append((evaluation.Prediction(record.tile_id, assessment), truth))
    pairs.sort(key=lambda pair: pair[0].tile_id)
    return pairs


@main.command()
@click.option("--by-region", is_flag=True, default=False)
@click.option("--reject-as-negative", is_flag=True, default=False, help='Count rejected parses as "no solar" predictions instead of excluding them.')
@click.option("--include-auto", is_flag=True, default=False, help="Use auto labels as ground truth too.")
@click.pass_context
@handle_errors
def evaluate(ctx, by_region, reject_as_negative, include_auto):
    """Compute metric reports from the journal and ground-truth manifest."""
    store: Store = ctx.obj["store"]
    started = _now()
    with store.lock():
        records = inference.read_journal(store.journal_path)
        truths = store.labels(include_auto=include_auto)
        pairs = _aligned_pairs(records, truths, reject_as_negative)
        if not pairs:
            raise SolarscanError("no aligned prediction/truth pairs to evaluate")
        excluded = len(records) - len(pairs)
        store.reports_dir.mkdir(parents=True, exist_ok=True)

        groups = {"all": pairs}
        if by_region:
            region_of = store.region_by_scene()
            for pred, truth in pairs:
                scene_id = pred.tile_id.rsplit("_", 2)[0]
                region = region_of.get(scene_id, "") or "unknown"
                groups.setdefault(region, []).append((pred, truth))

        summaries = {}
        for region, group in groups.items():
            preds = [p for p, _ in group]
            group_truths = [t for _, t in group]
            report = evaluation.compute_report(preds, group_truths, region=region)
            slug = slugify(region) or "all"
            (store.reports_dir / f"{slug}.csv").write_text(evaluation.render_report(report, "csv"))
            (store.reports_dir / f"{slug}.json").write_text(evaluation.render_report(report, "json"))
            if region == "all":
                (store.reports_dir / "latest.json").write_text(evaluation.render_report(report, "json"))
            summaries[region] = {
                "pairs": len(group),
                "weighted_f1": report.weighted.f1,
                "location_accuracy_solar": report.location_accuracy_solar,
                "calibration_bce": report.calibration_bce,
            }
        store.record_run(
            "evaluate",
            {"by_region": by_region, "reject_as_negative": reject_as_negative},
            {"pairs": len(pairs), "excluded_records": excluded},
            started,
        )
    _emit({"stage": "evaluate", "excluded_records": excluded, "reports": summaries})


@main.command()
@click.option("--confidence-threshold", default=0.8, show_default=True)
@click.option("--likelihood-margin", default=0.1, show_default=True)
@click.pass_context
@handle_errors
def triage(ctx, confidence_threshold, likelihood_margin):
    """Split journal predictions into auto labels and a review queue."""
    store: Store = ctx.obj["store"]
    started = _now()
    try:
        cfg = autolabel.TriageConfig(confidence_threshold, likelihood_margin)
    except ValueError as exc:
        raise SolarscanError(str(exc))
    with store.lock():
        records = inference.read_journal(store.journal_path)
        if not records:
            raise SolarscanError("empty journal; run predict first")
        accepted, queue = autolabel.triage_batch(records, cfg)
        store.append_labels(accepted)
        review = autolabel.ReviewQueue(store.queue_path, store.labels_path)
        review.save(queue)
        store.triage_config_path.write_text(json.dumps(cfg.to_json(), indent=2))
        try:
            summary = autolabel.likelihood_summary(records, store.labels(include_auto=False))
            (store.root / "distribution_summary.json").write_text(
                json.dumps(summary.to_json(), indent=2)
            )
        except SolarscanError:
            pass  # analytics need both classes labeled; triage itself proceeds
        counts = {"auto_accepted": len(accepted), "review": len(queue)}
        store.record_run("triage", cfg.to_json(), counts, started)
    _emit({"stage": "triage", **counts})


@main.command(name="export-finetune")
@click.option("--ratio", default=0.8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Defaults to <data-dir>/finetune.")
@click.option("--stratified/--no-stratified", default=True, show_default=True)
@click.pass_context
@handle_errors
def export_finetune(ctx, ratio, seed, out_dir, stratified):
    """Export the labeled tiles as a chat-format JSONL fine-tuning dataset."""
    store: Store = ctx.obj["store"]
    started = _now()
    out = Path(out_dir) if out_dir else store.root / "finetune"
    template = prompting.default_template()
    with store.lock():
        truths = {l.tile_id: l for l in store.labels(include_auto=True)}
        tiles = {}
        for tile_id in truths:
            path = store.tile_png_path(tile_id)
            if path.exists():
                tiles[tile_id] = path.read_bytes()
        usable = [truths[t] for t in sorted(tiles)]
        split = export.split_dataset(usable, ratio, seed, stratified)
        count = export.export_jsonl(split, tiles, truths, template, out / "train.jsonl")
        export.write_export_manifest(out / "manifest.json", split, template, count)
        report = export.validate_jsonl(out / "train.jsonl")
        store.record_run("export-finetune", {"ratio": ratio, "seed": seed}, report, started)
    _emit({"stage": "export-finetune", "lines": count, "validation": report})


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
@handle_errors
def serve(ctx, port, host):
    """Serve the review API and UI."""
    import uvicorn

    from .service import create_app

    app = create_app(ctx.obj["data_dir"])
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
