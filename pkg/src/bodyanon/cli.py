"""Command line interface: manifolds, detection, anonymization, evaluation."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .backends.client import HttpHub, HubDetector
from .backends.mock import DEFAULT_EMBED_DIM, MockHub
from .backends.server import create_mock_app
from .gateway.config import ServiceConfig, load_config
from .gateway.service import create_app
from .manifold import (BodyManifold, ManifoldEntry, ManifoldError,
                       build_manifold, read_manifold, select_face_guide,
                       select_guide, write_manifold)
from .metrics import (EvalReport, ReidInstance, detection_delta, fid, psnr,
                      reid_eval)
from .pipeline import (AnonymizationChoice, AnonymizationRequest, anonymize,
                       detect_bodies)
from .raster import decode_png, encode_png

DEMO_ACTIVITIES = tuple(f"mock-activity-{i}" for i in range(4))
DEMO_PER_CLASS = 8


def _demo_manifold(seed: int, dim: int = DEFAULT_EMBED_DIM,
                   per_class: int = DEMO_PER_CLASS) -> BodyManifold:
    """Synthetic manifold whose activity labels match the mock embedder."""
    rng = np.random.default_rng(seed)
    entries = []
    for activity in DEMO_ACTIVITIES:
        for index in range(per_class):
            entries.append(ManifoldEntry.create(
                id=f"{activity}-{index:03d}", activity=activity,
                embedding=rng.standard_normal(dim)))
    return build_manifold(entries, per_class_count=per_class, dim=dim)


def _load_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise click.ClickException(
                    f"{path}:{number}: not valid JSON: {exc}") from exc
    return records


def _resolve_hub(config_path: str | None, mock_seed: int | None):
    if mock_seed is not None:
        return MockHub(seed=mock_seed), None
    if config_path is None:
        raise click.ClickException("pass --config or --mock-seed")
    config = load_config(config_path)
    config.validate_endpoints()
    return HttpHub(config.endpoints), config


def _load_manifold_option(path: str | None, mock_seed: int | None,
                          label: str) -> BodyManifold | None:
    if path:
        return read_manifold(path)
    if mock_seed is not None:
        return _demo_manifold(mock_seed)
    return None


@click.group()
def main() -> None:
    """Full-body anonymization toolkit."""


@main.group()
def manifold() -> None:
    """Build and query embedding manifolds."""


@manifold.command("build")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {id, activity, embedding[, source_uri]} records.")
@click.option("--per-class", "per_class", required=True, type=int,
              help="Entries kept per activity class.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Destination manifold file.")
@click.option("--dim", default=None, type=int,
              help="Embedding dimension (default: taken from the first record).")
def manifold_build(input_path: str, per_class: int, out_path: str,
                   dim: int | None) -> None:
    """Build a balanced manifold file from raw embedding records."""
    records = _load_jsonl(input_path)
    if not records:
        raise click.ClickException(f"{input_path} holds no records")
    entries = []
    for record in records:
        try:
            entries.append(ManifoldEntry.create(
                id=record["id"], activity=record["activity"],
                embedding=np.asarray(record["embedding"], dtype=np.float64),
                source_uri=record.get("source_uri")))
        except (KeyError, ValueError) as exc:
            raise click.ClickException(f"bad record {record.get('id')!r}: "
                                       f"{exc}") from exc
    if dim is None:
        dim = entries[0].embedding.size
    try:
        built = build_manifold(entries, per_class_count=per_class, dim=dim)
    except (ValueError, ManifoldError) as exc:
        raise click.ClickException(str(exc)) from exc
    size = write_manifold(built, out_path)
    click.echo(f"wrote {len(built.entries)} entries "
               f"({len(built.activities)} classes) to {out_path} "
               f"({size} bytes)")


@manifold.command("query")
@click.option("--manifold", "manifold_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--embedding", "embedding_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON array of floats.")
@click.option("--activity", default=None,
              help="Activity class to search within (omit with --sphere-k).")
@click.option("--sphere-k", "sphere_k", default=None, type=int,
              help="Randomized face-guide mode: sample from the K farthest.")
@click.option("--seed", default=0, type=int, show_default=True)
def manifold_query(manifold_path: str, embedding_path: str,
                   activity: str | None, sphere_k: int | None,
                   seed: int) -> None:
    """Select the guide entry for a query embedding."""
    loaded = read_manifold(manifold_path)
    query = np.asarray(json.loads(Path(embedding_path).read_text()),
                       dtype=np.float64)
    try:
        if sphere_k is not None:
            entry = select_face_guide(loaded, query, sphere_k=sphere_k,
                                      seed=seed)
        elif activity is not None:
            entry = select_guide(loaded, query, activity)
        else:
            raise click.ClickException("pass --activity or --sphere-k")
        click.echo(json.dumps({"id": entry.id, "activity": entry.activity,
                               "source_uri": entry.source_uri}))
    except (ValueError, ManifoldError) as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mock-seed", default=None, type=int,
              help="Use in-process mock backends with this seed.")
def detect(image_path: str, config_path: str | None,
           mock_seed: int | None) -> None:
    """List detected bodies (canonical order) for an image."""
    hub, _ = _resolve_hub(config_path, mock_seed)
    image = decode_png(Path(image_path).read_bytes())
    bodies = detect_bodies(image, hub)
    click.echo(json.dumps({"bodies": [
        {"body_id": b.body_id, "bbox": b.bbox.as_list(),
         "confidence": b.confidence} for b in bodies]}, indent=2))


@main.command("anonymize")
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--choices", "choices_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON list of {body_id | index, option}.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mock-seed", default=None, type=int)
@click.option("--manifold", "manifold_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--face-manifold", "face_manifold_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
def anonymize_command(image_path: str, choices_path: str, seed: int,
                      out_path: str, config_path: str | None,
                      mock_seed: int | None, manifold_path: str | None,
                      face_manifold_path: str | None) -> None:
    """Run the anonymization pipeline on one image."""
    hub, config = _resolve_hub(config_path, mock_seed)
    if config is not None:
        manifold_path = manifold_path or config.body_manifold
        face_manifold_path = face_manifold_path or config.face_manifold
    body_manifold = _load_manifold_option(manifold_path, mock_seed, "body")
    face_manifold = _load_manifold_option(face_manifold_path, mock_seed,
                                          "face")

    image = decode_png(Path(image_path).read_bytes())
    raw = json.loads(Path(choices_path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise click.ClickException("choices file must hold a JSON list")

    bodies = detect_bodies(image, hub)
    choices = []
    for item in raw:
        option = AnonymizationChoice.parse(str(item.get("option")))
        if "body_id" in item:
            body_id = item["body_id"]
        elif "index" in item:
            index = int(item["index"])
            if not 0 <= index < len(bodies):
                raise click.ClickException(
                    f"index {index} out of range; image has "
                    f"{len(bodies)} bodies")
            body_id = bodies[index].body_id
        else:
            raise click.ClickException("each choice needs body_id or index")
        choices.append((body_id, option))

    pipeline_config = (config.pipeline_config() if config is not None
                       else AnonymizationRequest(image=image,
                                                 choices=[]).config)
    warnings: list[str] = []
    result = anonymize(
        AnonymizationRequest(image=image, choices=choices, seed=seed,
                             config=pipeline_config),
        hub, manifold=body_manifold, face_manifold=face_manifold,
        warnings=warnings)
    Path(out_path).write_bytes(encode_png(result))
    for message in warnings:
        click.echo(f"warning: {message}", err=True)
    click.echo(f"wrote {out_path}")


@main.group("eval")
def eval_group() -> None:
    """Evaluation reports."""


def _report_out(report: EvalReport, json_out: str | None) -> None:
    click.echo(report.text_table())
    if json_out:
        Path(json_out).write_text(report.to_json() + "\n", encoding="utf-8")
        click.echo(f"wrote {json_out}")


@eval_group.command("adv")
@click.option("--before", "before_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--after", "after_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mock-seed", default=None, type=int)
@click.option("--threshold", default=0.5, type=float, show_default=True)
@click.option("--dataset", default="adversarial", show_default=True)
@click.option("--json-out", default=None, type=click.Path())
def eval_adv(before_dir: str, after_dir: str, config_path: str | None,
             mock_seed: int | None, threshold: float, dataset: str,
             json_out: str | None) -> None:
    """Detection accuracy before/after plus PSNR over aligned image pairs."""
    hub, _ = _resolve_hub(config_path, mock_seed)
    detector = HubDetector(hub)
    before_paths = sorted(Path(before_dir).glob("*.png"))
    after_paths = sorted(Path(after_dir).glob("*.png"))
    if len(before_paths) != len(after_paths) or not before_paths:
        raise click.ClickException(
            f"directories must hold the same non-zero number of .png files "
            f"({len(before_paths)} vs {len(after_paths)})")
    before = [decode_png(p.read_bytes()) for p in before_paths]
    after = [decode_png(p.read_bytes()) for p in after_paths]
    acc_before, acc_after = detection_delta(before, after, detector,
                                            threshold=threshold)
    values = [psnr(x, y) for x, y in zip(before, after)]
    mean_psnr = (math.inf if any(math.isinf(v) for v in values)
                 else float(np.mean(values)))
    humans = sum(
        1 for image in before
        for d in detector.score(image) if d.objectness > threshold)
    report = EvalReport(dataset=dataset, humans=humans,
                        accuracy_before=acc_before, accuracy_after=acc_after,
                        psnr=mean_psnr)
    _report_out(report, json_out)


def _embedding_records(path: str, need_label: bool) -> tuple[list, list]:
    records = _load_jsonl(path)
    embeddings, labels = [], []
    for record in records:
        embeddings.append(np.asarray(record["embedding"], dtype=np.float64))
        if need_label:
            labels.append(str(record["label"]))
    return embeddings, labels


@eval_group.command("reid")
@click.option("--queries", "query_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {label, embedding}.")
@click.option("--gallery", "gallery_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", default="reid", show_default=True)
@click.option("--json-out", default=None, type=click.Path())
def eval_reid(query_path: str, gallery_path: str, dataset: str,
              json_out: str | None) -> None:
    """Market-style mAP and Rank-k over query/gallery embeddings."""
    q_emb, q_labels = _embedding_records(query_path, need_label=True)
    g_emb, g_labels = _embedding_records(gallery_path, need_label=True)
    try:
        instance = ReidInstance(query_embeddings=np.stack(q_emb),
                                query_labels=tuple(q_labels),
                                gallery_embeddings=np.stack(g_emb),
                                gallery_labels=tuple(g_labels))
        mean_ap, rank_k = reid_eval(instance)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    report = EvalReport(dataset=dataset, humans=len(q_labels), map=mean_ap,
                        rank_k=rank_k)
    _report_out(report, json_out)


@eval_group.command("fid")
@click.option("--first", "first_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {embedding}.")
@click.option("--second", "second_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", default="fid", show_default=True)
@click.option("--json-out", default=None, type=click.Path())
def eval_fid(first_path: str, second_path: str, dataset: str,
             json_out: str | None) -> None:
    """Frechet distance between two embedding populations."""
    a_emb, _ = _embedding_records(first_path, need_label=False)
    b_emb, _ = _embedding_records(second_path, need_label=False)
    try:
        value = fid(np.stack(a_emb), np.stack(b_emb))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    report = EvalReport(dataset=dataset, humans=len(a_emb), fid=value)
    _report_out(report, json_out)


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mock-seed", default=None, type=int,
              help="Serve against in-process mocks (demo manifolds included).")
def serve(config_path: str | None, mock_seed: int | None) -> None:
    """Run the anonymization gateway."""
    import uvicorn

    if config_path is not None:
        config = load_config(config_path)
    elif mock_seed is not None:
        config = ServiceConfig()
    else:
        raise click.ClickException("pass --config or --mock-seed")

    if mock_seed is not None:
        hub = MockHub(seed=mock_seed)
        body_manifold = (read_manifold(config.body_manifold)
                         if config.body_manifold else _demo_manifold(mock_seed))
        face_manifold = (read_manifold(config.face_manifold)
                         if config.face_manifold
                         else _demo_manifold(mock_seed + 1))
        app = create_app(config, hub=hub, body_manifold=body_manifold,
                         face_manifold=face_manifold)
    else:
        app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)


@main.command("mock-backends")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--listen", default="127.0.0.1:9000", show_default=True)
def mock_backends(seed: int, listen: str) -> None:
    """Serve every mock backend role over HTTP."""
    import uvicorn

    host, port = listen.rsplit(":", 1)
    uvicorn.run(create_mock_app(seed=seed), host=host, port=int(port))


if __name__ == "__main__":
    sys.exit(main())
