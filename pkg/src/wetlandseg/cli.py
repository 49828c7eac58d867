"""Command-line pipeline: synth / train / cross-validate / predict / vectorize / evaluate.

Exit codes: 0 success, 1 usage or configuration error, 2 data or format
error, 3 numerical divergence.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from wetlandseg import folds as folds_mod
from wetlandseg import geodata, metrics, postproc
from wetlandseg.errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EmptySupportError,
    ShapeError,
    WetlandsegError,
)
from wetlandseg.model import (
    forward,
    halo_of,
    load_checkpoint,
    netspec_for_scale,
    save_checkpoint,
)
from wetlandseg.optim import TrainConfig, train
from wetlandseg.runconfig import RunConfig, echo_config, load_config
from wetlandseg.synthmap import Corpus, SynthConfig, SynthScene, generate, generate_corpus


def _train_config(cfg: RunConfig) -> TrainConfig:
    try:
        return TrainConfig(
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            dropout_rate=cfg.dropout_rate,
            validation_fraction=cfg.validation_fraction,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            epsilon=cfg.epsilon,
            seed=cfg.seed,
            channel_scale=cfg.channel_scale,
            leaky_slope=cfg.leaky_slope,
            overlap_margin=cfg.overlap_margin,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve(cfg_path_value, flag_value, name: str) -> str:
    value = flag_value or cfg_path_value
    if not value:
        raise ConfigError(f"no {name} given: pass --{name} or set paths.{name} in the config")
    return value


def _load_scene(cfg: RunConfig, map_path, labels_path) -> tuple[geodata.GeoRaster, geodata.LabelRaster, postproc.VectorLayer]:
    raster = geodata.read_raster(map_path, crs_label=cfg.crs_label)
    truth = postproc.read_geojson(labels_path)
    labels = geodata.rasterize_polygons(truth, raster.transform, (raster.rows, raster.cols))
    return raster, labels, truth


def _build_corpus(cfg: RunConfig, raster, labels) -> Corpus:
    spec = netspec_for_scale(cfg.channel_scale)
    halo = halo_of(spec)
    scene = SynthScene(raster, postproc.VectorLayer(crs_label=cfg.crs_label), labels)
    return generate_corpus(scene, halo, cfg.core_size, cfg.overlap_margin,
                           cfg.fold_split_axis)


def _write_history(path, history) -> None:
    with open(path, "w") as fh:
        for record in history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


@click.group()
def cli():
    """Extract wetland polygons from scanned historical map rasters."""


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth(config_path, out_dir):
    """Generate a synthetic map scene: raster, labels, ground-truth GeoJSON."""
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = generate(SynthConfig(
        seed=cfg.seed,
        rows=cfg.synth.rows,
        cols=cfg.synth.cols,
        pixel_size=cfg.pixel_size,
        wetland_fraction=cfg.synth.wetland_fraction,
        clutter_density=cfg.synth.clutter_density,
        palette={k: tuple(v) for k, v in cfg.synth.palette.items()},
        crs_label=cfg.crs_label,
    ))
    geodata.write_raster(out / "map.png", scene.raster)
    labels_img = geodata.GeoRaster((scene.labels.labels * 255).astype(np.uint8),
                                   scene.labels.transform)
    geodata.write_raster(out / "labels.png", labels_img)
    postproc.write_geojson(out / "truth.geojson", scene.truth)
    echo_config(out, cfg)
    click.echo(f"scene: {scene.raster.rows}x{scene.raster.cols} px, "
               f"{len(scene.truth.features)} wetlands, "
               f"label fraction {scene.labels.labels.mean():.3f}")


@cli.command(name="train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--map", "map_path", type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path())
def train_cmd(config_path, map_path, labels_path, out_dir):
    """Train on all tiles of a map and write the best checkpoint + history."""
    cfg = load_config(config_path)
    map_path = _resolve(cfg.paths.map, map_path, "map")
    labels_path = _resolve(cfg.paths.labels, labels_path, "labels")
    out = Path(_resolve(cfg.paths.out, out_dir, "out"))
    out.mkdir(parents=True, exist_ok=True)

    raster, labels, _ = _load_scene(cfg, map_path, labels_path)
    spec = netspec_for_scale(cfg.channel_scale)
    corpus = _build_corpus(cfg, raster, labels)
    result = train(corpus.tiles, _train_config(cfg), spec)
    save_checkpoint(out / "model.ckpt", result.checkpoint)
    _write_history(out / "history.jsonl", result.history)
    echo_config(out, cfg)
    click.echo(f"best validation loss {result.checkpoint.validation_loss:.6f} "
               f"at epoch {result.checkpoint.epoch}")


@cli.command(name="cross-validate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--map", "map_path", type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path())
@click.option("--jobs", type=int, default=None, help="Concurrent folds; 1 = deterministic mode.")
def cross_validate_cmd(config_path, map_path, labels_path, out_dir, jobs):
    """Run the spatial 10-fold evaluation; write checkpoints and a metrics report."""
    cfg = load_config(config_path)
    map_path = _resolve(cfg.paths.map, map_path, "map")
    labels_path = _resolve(cfg.paths.labels, labels_path, "labels")
    out = Path(_resolve(cfg.paths.out, out_dir, "out"))
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs if jobs is not None else cfg.jobs

    raster, labels, _ = _load_scene(cfg, map_path, labels_path)
    spec = netspec_for_scale(cfg.channel_scale)
    corpus = _build_corpus(cfg, raster, labels)
    result = folds_mod.cross_validate(corpus.tiles, spec, _train_config(cfg),
                                      jobs=jobs, threshold_cut=cfg.threshold)
    for fr in result.per_fold:
        save_checkpoint(out / f"fold_{fr.fold}.ckpt", fr.checkpoint)
        _write_history(out / f"fold_{fr.fold}_history.jsonl", fr.history)
    folds_mod.save_fold_spec(out / "folds.json", corpus.fold_spec)
    report = result.report_dict()
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    echo_config(out, cfg)
    pooled = result.pooled
    click.echo(f"pooled precision {pooled.precision:.3f} recall {pooled.recall:.3f} "
               f"f1 {pooled.f1:.3f}" if pooled.f1 is not None else "pooled metrics undefined")


@cli.command()
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--map", "map_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Optional run config; its channel_scale must match the checkpoint.")
@click.option("--overlap-margin", type=int, default=None)
@click.option("--batch-size", type=int, default=16)
def predict(ckpt_path, map_path, out_dir, config_path, overlap_margin, batch_size):
    """Run the model over a map and write a 16-bit probability raster."""
    ckpt = load_checkpoint(ckpt_path)
    cfg = load_config(config_path) if config_path else None
    if cfg is not None:
        expected = netspec_for_scale(cfg.channel_scale)
        if expected != ckpt.spec:
            raise ShapeError(
                f"checkpoint architecture {ckpt.spec.hidden_channels} does not match "
                f"config channel_scale {cfg.channel_scale} "
                f"(expects {expected.hidden_channels})"
            )
    margin = overlap_margin if overlap_margin is not None else (
        cfg.overlap_margin if cfg else 0
    )
    core = cfg.core_size if cfg else 80
    crs = cfg.crs_label if cfg else "local"

    raster = geodata.read_raster(map_path, crs_label=crs)
    halo = halo_of(ckpt.spec)
    plan = geodata.plan_tiles((raster.rows, raster.cols), core, halo, margin)
    core_dims = plan.core_dims()
    predictions = {}
    origins = list(plan.origins)
    for start in range(0, len(origins), batch_size):
        chunk = origins[start:start + batch_size]
        windows = np.stack([
            geodata.extract_window(raster.values, origin, core_dims, plan.pad)
            for origin in chunk
        ])
        prob = forward(ckpt.spec, ckpt.weights, windows, mode="eval")
        if margin:
            prob = prob[:, :, margin:-margin, margin:-margin]
        for i, origin in enumerate(chunk):
            predictions[origin] = prob[i, 0]
    stitched = geodata.stitch(predictions, plan, raster.transform)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geodata.write_probability_raster(out / "probability.png", stitched)
    if cfg is not None:
        echo_config(out, cfg)
    click.echo(f"probability raster: {stitched.rows}x{stitched.cols} px")


@cli.command(name="vectorize")
@click.option("--prob", "prob_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-area", type=float, default=1000.0, show_default=True,
              help="Remove features strictly smaller than this many m2.")
@click.option("--threshold", "cut", type=float, default=0.5, show_default=True)
def vectorize_cmd(prob_path, out_path, min_area, cut):
    """Threshold a probability raster and write filtered wetland polygons."""
    raster = geodata.read_probability_raster(prob_path)
    mask = postproc.threshold(raster.values[0], cut)
    labels, _ = postproc.connected_components(mask)
    layer = postproc.vectorize(labels, raster.transform)
    layer = postproc.filter_min_area(layer, min_area)
    postproc.write_geojson(out_path, layer)
    click.echo(f"{len(layer.features)} features, total area {layer.total_area():.1f} m2")


@cli.command()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True),
              help="Prediction: probability PNG or polygon GeoJSON.")
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--pixel-size", type=float, default=None,
              help="Grid resolution; required when --pred is GeoJSON.")
@click.option("--threshold", "cut", type=float, default=0.5, show_default=True)
@click.option("--agreement", "agreement_path", type=click.Path(), default=None,
              help="Agreement-map PNG (default: next to --out).")
def evaluate(pred_path, truth_path, out_path, pixel_size, cut, agreement_path):
    """Compare a prediction against truth polygons; write metrics + agreement map."""
    truth_layer = postproc.read_geojson(truth_path)
    if str(pred_path).lower().endswith((".png",)):
        prob = geodata.read_probability_raster(pred_path)
        pred_mask = postproc.threshold(prob.values[0], cut)
        transform = prob.transform
        dims = (prob.rows, prob.cols)
    else:
        pred_layer = postproc.read_geojson(pred_path)
        if pixel_size is None:
            raise ConfigError("--pixel-size is required when --pred is a GeoJSON layer")
        xs, ys = [], []
        for layer in (pred_layer, truth_layer):
            for f in layer.features:
                for x, y in f.exterior:
                    xs.append(x)
                    ys.append(y)
        if not xs:
            raise DataError("neither layer contains any features to compare")
        transform = geodata.GeoTransform(
            origin_x=min(xs) + pixel_size / 2.0,
            origin_y=max(ys) - pixel_size / 2.0,
            pixel_size_x=pixel_size,
            pixel_size_y=pixel_size,
            crs_label=truth_layer.crs_label,
        )
        dims = (int(np.ceil((max(ys) - min(ys)) / pixel_size)),
                int(np.ceil((max(xs) - min(xs)) / pixel_size)))
        pred_mask = geodata.rasterize_polygons(pred_layer, transform, dims).labels

    truth_raster = geodata.rasterize_polygons(truth_layer, transform, dims)
    conf = metrics.confusion(pred_mask, truth_raster.labels, truth_raster.validity)
    scores = metrics.precision_recall_f1(conf)
    categories = metrics.agreement_map(pred_mask, truth_raster.labels, truth_raster.validity)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    report = {**scores.as_dict(), "confusion": conf.as_dict()}
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    agreement_file = Path(agreement_path) if agreement_path else out.with_name(
        out.stem + "-agreement.png"
    )
    metrics.write_agreement_png(agreement_file, categories)
    shown = {k: (round(v, 4) if isinstance(v, float) else v)
             for k, v in scores.as_dict().items()}
    click.echo(json.dumps(shown))


_EXIT_CODES = (
    (ConfigError, 1),
    (DivergenceError, 3),
    (DataError, 2),
    (ShapeError, 2),
    (EmptySupportError, 2),
    (WetlandsegError, 2),
)


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        return 1
    except WetlandsegError as exc:
        for err_type, code in _EXIT_CODES:
            if isinstance(exc, err_type):
                click.echo(f"error: {exc}", err=True)
                return code
        return 2


if __name__ == "__main__":
    sys.exit(main())
