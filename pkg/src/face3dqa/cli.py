"""Command-line front door for the whole pipeline.

Exit codes: 0 success, 2 validation problem (bad flag, missing file, schema
violation), 1 runtime failure. A TOML file passed via --config supplies
defaults per subcommand section (flags on the command line win); the [loss]
section configures combined-loss weights. G3DHF_LOG controls verbosity.
"""

from __future__ import annotations

import functools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import bench, io, losses, mos, salmetrics, saliency
from .agreement import QaMode, qa_accuracy
from .core import Dimension
from .io import SchemaError
from .prompts import QUESTION_TEMPLATES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("face3dqa")


def _guard(fn):
    # data/validation problems exit 2; anything unexpected bubbles up (exit 1)
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (SchemaError, ValueError, FileNotFoundError) as exc:
            raise click.UsageError(str(exc))

    return wrapper


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML config providing per-subcommand defaults.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Subjective quality assessment toolkit for generated 3D-face media."""
    level = os.environ.get("G3DHF_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    if config_path:
        with open(config_path, "rb") as fh:
            config = tomllib.load(fh)
        ctx.obj["config"] = config
        ctx.default_map = {name: section for name, section in config.items()
                           if isinstance(section, dict)}
    else:
        ctx.obj["config"] = {}


def _screening_policy(screen: str, outlier_k: float, outlier_frac: float,
                      reject_frac: float, dispersion: float) -> mos.ScreeningPolicy:
    return mos.ScreeningPolicy(
        mode=mos.ScreeningMode(screen),
        outlier_k=outlier_k,
        outlier_fraction=outlier_frac,
        reject_fraction=reject_frac,
        dispersion_ratio=dispersion,
    )


@main.command("mos")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ratings JSONL.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="MOS CSV output.")
@click.option("--rejects", "rejects_path", type=click.Path(dir_okay=False), default=None,
              help="Rejection report JSON (default: <out>.rejects.json).")
@click.option("--screen", type=click.Choice([m.value for m in mos.ScreeningMode]),
              default=mos.ScreeningMode.ITU_ANNEX2.value, show_default=True)
@click.option("--outlier-k", type=float, default=2.0, show_default=True)
@click.option("--outlier-frac", type=float, default=0.05, show_default=True)
@click.option("--reject-frac", type=float, default=0.05, show_default=True)
@click.option("--dispersion", type=float, default=0.3, show_default=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Validate item ids against this manifest.")
@_guard
def mos_cmd(in_path, out_path, rejects_path, screen, outlier_k, outlier_frac,
            reject_frac, dispersion, manifest_path):
    """Convert raw ratings into per-item Mean Opinion Scores."""
    records = io.read_ratings_jsonl(in_path)
    known = None
    if manifest_path:
        known = set(io.load_manifest(manifest_path).ids())
    from .core import validate_ratings

    report = validate_ratings(records, known_items=known)
    for finding in report.findings:
        log.warning("%s: %s", finding.kind, finding.message)
    policy = _screening_policy(screen, outlier_k, outlier_frac, reject_frac, dispersion)
    table = mos.aggregate_mos(records, policy)
    table.write_csv(out_path)
    table.write_rejection_report(rejects_path or f"{out_path}.rejects.json")
    click.echo(f"wrote {len(table.entries)} MOS entries to {out_path} "
               f"({len(table.retained_subjects)} subjects retained, "
               f"{len(table.rejections)} rejected)")


@main.command("saliency")
@click.option("--fixations", "fixations_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Fixations JSON.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--sigma", type=float, default=5.0, show_default=True,
              help="Gaussian standard deviation in pixels of the annotated image.")
@click.option("--norm", type=click.Choice([m.value for m in saliency.NormMode]),
              default=saliency.NormMode.MAX_ONE.value, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["pgm", "g3ds", "both"]),
              default="both", show_default=True)
@click.option("--jobs", type=int, default=os.cpu_count, help="Worker threads.")
@_guard
def saliency_cmd(fixations_path, out_dir, sigma, norm, fmt, jobs):
    """Render distortion-aware saliency maps from click annotations."""
    if sigma <= 0:
        raise click.UsageError("sigma must be > 0")
    annotations = io.read_fixations_json(fixations_path)
    by_item: dict[str, list] = {}
    for ann in annotations:
        by_item.setdefault(ann.item_id, []).append(ann)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def render(item_id: str) -> str:
        fmap = saliency.merge_annotations(by_item[item_id])
        smap = saliency.normalize(saliency.gaussian_blur(fmap, sigma),
                                  saliency.NormMode(norm))
        if fmt in ("pgm", "both"):
            saliency.write_pgm(smap, out / f"{item_id}.pgm")
        if fmt in ("g3ds", "both"):
            saliency.write_g3ds(smap, out / f"{item_id}.g3ds")
        return item_id

    done = _parallel_map(render, sorted(by_item), jobs or 1)
    click.echo(f"wrote saliency maps for {len(done)} items to {out_dir}")


@main.command("eval-scores")
@click.option("--mos", "mos_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ground-truth MOS CSV.")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Predictions CSV (item_id,quality_score,authenticity_score).")
@click.option("--split", "split_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Evaluate per fold of this split instead of over all items.")
@click.option("--predictor", default=None, help="Predictor name for the report.")
@click.option("--out-json", type=click.Path(dir_okay=False), default=None,
              help="Write a metric report JSON for the report subcommand.")
@_guard
def eval_scores_cmd(mos_path, pred_path, split_path, predictor, out_json):
    """Correlation metrics (SRCC/PLCC/KRCC) of predicted scores against MOS."""
    entries = mos.read_mos_csv(mos_path)
    predictions = bench.read_predictions_csv(pred_path)
    name = predictor or Path(pred_path).stem
    if split_path:
        split = bench.SplitSpec.read(split_path)
        folds = [
            bench.evaluate_fold(entries, predictions, fold, split)
            for fold in range(split.k)
        ]
    else:
        items = sorted({item for item, _ in entries})
        split = bench.SplitSpec(seed=0, k=1, folds={i: 0 for i in items})
        folds = [bench.evaluate_fold(entries, predictions, 0, split)]
    fingerprint = bench.config_fingerprint({"mos": str(mos_path), "pred": str(pred_path),
                                            "split": str(split_path)})
    report = bench.MetricReport(predictor=name, fold_metrics=folds,
                                config_fingerprint=fingerprint)
    mean = report.mean_metrics()
    for key in sorted(mean):
        click.echo(f"{key}: {mean[key]:.4f}")
    if out_json:
        report.write(out_json)


@main.command("eval-saliency")
@click.option("--fixations", "fixations_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Ground-truth fixations JSON.")
@click.option("--pred-dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of predicted <item_id>.g3ds maps.")
@click.option("--gt-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of ground-truth maps; default: blur the fixations.")
@click.option("--sigma", type=float, default=5.0, show_default=True)
@click.option("--epsilon", type=float, default=salmetrics.DEFAULT_EPSILON, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Per-item CSV (plus a mean row).")
@click.option("--combined-loss", is_flag=True, default=False,
              help="Add a combined loss column using the [loss] config weights.")
@click.option("--jobs", type=int, default=os.cpu_count)
@click.pass_context
@_guard
def eval_saliency_cmd(ctx, fixations_path, pred_dir, gt_dir, sigma, epsilon, out_path,
                      combined_loss, jobs):
    """The five saliency consistency metrics per item: AUC, NSS, CC, SIM, KLD."""
    if sigma <= 0:
        raise click.UsageError("sigma must be > 0")
    annotations = io.read_fixations_json(fixations_path)
    by_item: dict[str, list] = {}
    for ann in annotations:
        by_item.setdefault(ann.item_id, []).append(ann)
    loss_section = ctx.obj.get("config", {}).get("loss", {})
    weights = losses.LossWeights(
        w1=float(loss_section.get("w1", 1.0)), w2=float(loss_section.get("w2", 1.0)),
        w3=float(loss_section.get("w3", 1.0)), w4=float(loss_section.get("w4", 1.0)),
    )

    def evaluate(item_id: str):
        fmap = saliency.merge_annotations(by_item[item_id])
        pred_path = Path(pred_dir) / f"{item_id}.g3ds"
        if not pred_path.exists():
            raise bench.MissingPredictionError([item_id], what="saliency map")
        pred = saliency.read_g3ds(pred_path)
        if gt_dir:
            gt = saliency.read_g3ds(Path(gt_dir) / f"{item_id}.g3ds")
        else:
            gt = saliency.gaussian_blur(fmap, sigma)
        row = salmetrics.evaluate_pair(pred, gt, fmap, epsilon=epsilon)
        if combined_loss:
            row["combined_loss"] = losses.combined_loss(
                saliency.normalize(pred, saliency.NormMode.MAX_ONE).grid,
                saliency.normalize(gt, saliency.NormMode.MAX_ONE).grid,
                weights, epsilon=epsilon)
        return item_id, row

    results = _parallel_map(evaluate, sorted(by_item), jobs or 1)
    columns = ["auc", "nss", "cc", "sim", "kld"] + (["combined_loss"] if combined_loss else [])
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# auc=judd nss=population-std kld=gt||pred epsilon={epsilon!r}\n")
        fh.write("item_id," + ",".join(columns) + "\n")
        for item_id, row in results:
            fh.write(item_id + "," + ",".join(repr(row[c]) for c in columns) + "\n")
        if results:
            fh.write("mean," + ",".join(
                repr(sum(row[c] for _, row in results) / len(results)) for c in columns
            ) + "\n")
    click.echo(f"wrote saliency metrics for {len(results)} items to {out_path}")


@main.command("eval-qa")
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ground-truth distortion labels JSON.")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Predicted categories JSON: list of {item_id, categories}.")
@click.option("--mode", type=click.Choice([m.value for m in QaMode]),
              default=QaMode.EXACT_MATCH.value, show_default=True)
@click.option("--out-json", type=click.Path(dir_okay=False), default=None)
@_guard
def eval_qa_cmd(truth_path, pred_path, mode, out_json):
    """Average accuracy of predicted distortion categories."""
    truth_labels = io.read_labels_json(truth_path)
    truth: dict[str, set] = {}
    for label in truth_labels:
        truth.setdefault(label.item_id, set()).update(label.categories)
    predicted_labels = io.read_labels_json(pred_path)
    predicted: dict[str, set] = {}
    for label in predicted_labels:
        predicted.setdefault(label.item_id, set()).update(label.categories)
    items = sorted(truth)
    missing = [i for i in items if i not in predicted]
    if missing:
        raise bench.MissingPredictionError(missing, what="category prediction")
    qa_mode = QaMode(mode)
    accuracy = qa_accuracy([truth[i] for i in items], [predicted[i] for i in items], mode=qa_mode)
    click.echo(f"qa_accuracy ({qa_mode.value}): {accuracy:.4f}")
    if out_json:
        report = bench.MetricReport(
            predictor=Path(pred_path).stem,
            fold_metrics=[{"qa_accuracy": accuracy}],
            config_fingerprint=bench.config_fingerprint({"truth": str(truth_path),
                                                         "pred": str(pred_path),
                                                         "mode": qa_mode.value}),
            qa_mode=qa_mode.value,
        )
        report.write(out_json)


@main.command("split")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guard
def split_cmd(manifest_path, k, seed, out_path):
    """Deterministic stratified k-fold split of a dataset manifest."""
    manifest = io.load_manifest(manifest_path)
    split = bench.make_splits(manifest, k=k, seed=seed)
    split.write(out_path)
    sizes = [len(split.test_items(f)) for f in range(k)]
    click.echo(f"wrote split with fold sizes {sizes} to {out_path}")


@main.command("report")
@click.argument("report_paths", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out-md", required=True, type=click.Path(dir_okay=False))
@click.option("--out-csv", required=True, type=click.Path(dir_okay=False))
@_guard
def report_cmd(report_paths, out_md, out_csv):
    """Render metric report JSONs into a markdown table and CSV."""
    reports = [bench.MetricReport.read(p) for p in report_paths]
    Path(out_md).write_text(bench.render_report_markdown(reports), encoding="utf-8")
    Path(out_csv).write_text(bench.render_report_csv(reports), encoding="utf-8")
    click.echo(f"rendered {len(reports)} predictor reports to {out_md} and {out_csv}")


@main.command("serve")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False),
              help="Append-only event log file.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--media-root", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Static frontend build to serve at /.")
@click.option("--strict-manifest", is_flag=True, default=False,
              help="Require every manifest media path to resolve.")
@click.option("--no-durable", is_flag=True, default=False,
              help="Skip fsync on every append.")
@_guard
def serve_cmd(manifest_path, log_path, host, port, media_root, ui_dir,
              strict_manifest, no_durable):
    """Run the annotation session service."""
    import uvicorn

    from .service import EventLogStore, create_app

    manifest = io.load_manifest(manifest_path, strict=strict_manifest)
    store = EventLogStore(log_path, manifest, durable=not no_durable)
    app = create_app(store, media_root=media_root, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("prompts")
@click.option("--name", type=click.Choice(sorted(QUESTION_TEMPLATES)), default=None,
              help="Emit a single question template.")
@_guard
def prompts_cmd(name):
    """Emit the evaluation question templates."""
    if name:
        click.echo(QUESTION_TEMPLATES[name])
        return
    for key in ("quality", "authenticity", "distortion"):
        click.echo(f"[{key}]")
        click.echo(QUESTION_TEMPLATES[key])
        click.echo()


if __name__ == "__main__":
    main()
