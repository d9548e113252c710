"""Command line interface tests driven through click's test runner."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from bodyanon.backends import MockHub
from bodyanon.cli import main
from bodyanon.manifold import read_manifold
from bodyanon.pipeline import detect_bodies
from bodyanon.raster import decode_png, encode_png
from helpers import (BACKGROUND_GRAY, make_body_image, oracle_farthest,
                     oracle_select_guide)

TWO_BODY = [(6, 6, 14, 22), (32, 8, 14, 22)]


@pytest.fixture()
def runner():
    return CliRunner()


def write_records(path, rng, per_class=2, classes=("walking", "sitting"),
                  dim=8):
    lines = []
    for activity in classes:
        for index in range(per_class):
            lines.append(json.dumps({
                "id": f"{activity}-{index}", "activity": activity,
                "embedding": rng.standard_normal(dim).tolist()}))
    path.write_text("\n".join(lines) + "\n")


class TestManifoldBuild:
    def test_build_reports_counts(self, runner, tmp_path):
        records = tmp_path / "records.jsonl"
        out = tmp_path / "manifold.jsonl"
        write_records(records, np.random.default_rng(0))
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "wrote 4 entries (2 classes)" in result.output
        built = read_manifold(out)
        assert len(built.entries) == 4
        assert built.dim == 8

    def test_build_insufficient_class_fails(self, runner, tmp_path):
        records = tmp_path / "records.jsonl"
        out = tmp_path / "manifold.jsonl"
        write_records(records, np.random.default_rng(0))
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "3", "--out", str(out)])
        assert result.exit_code != 0
        assert "has 2 entries, needs 3" in result.output

    def test_build_bad_record_names_id(self, runner, tmp_path):
        records = tmp_path / "records.jsonl"
        records.write_text(json.dumps({"id": "broken",
                                       "activity": "walking"}) + "\n")
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "1", "--out", str(tmp_path / "m.jsonl")])
        assert result.exit_code != 0
        assert "broken" in result.output

    def test_build_empty_input_fails(self, runner, tmp_path):
        records = tmp_path / "records.jsonl"
        records.write_text("")
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "1", "--out", str(tmp_path / "m.jsonl")])
        assert result.exit_code != 0
        assert "no records" in result.output

    def test_build_invalid_jsonl_points_at_line(self, runner, tmp_path):
        records = tmp_path / "records.jsonl"
        records.write_text('{"id": "a"}\n{broken\n')
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "1", "--out", str(tmp_path / "m.jsonl")])
        assert result.exit_code != 0
        assert ":2:" in result.output


class TestManifoldQuery:
    @pytest.fixture()
    def built(self, runner, tmp_path):
        rng = np.random.default_rng(42)
        records = tmp_path / "records.jsonl"
        out = tmp_path / "manifold.jsonl"
        write_records(records, rng, per_class=5, dim=8)
        result = runner.invoke(main, [
            "manifold", "build", "--input", str(records),
            "--per-class", "5", "--out", str(out)])
        assert result.exit_code == 0
        query = tmp_path / "query.json"
        query.write_text(json.dumps(rng.standard_normal(8).tolist()))
        return out, query

    def test_activity_query_matches_oracle(self, runner, tmp_path, built):
        out, query = built
        result = runner.invoke(main, [
            "manifold", "query", "--manifold", str(out),
            "--embedding", str(query), "--activity", "walking"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        manifold = read_manifold(out)
        q = np.asarray(json.loads(query.read_text()))
        expected = oracle_select_guide(manifold, q, "walking")
        assert payload == {"id": expected.id, "activity": expected.activity,
                           "source_uri": expected.source_uri}

    def test_sphere_k_one_matches_farthest(self, runner, built):
        out, query = built
        result = runner.invoke(main, [
            "manifold", "query", "--manifold", str(out),
            "--embedding", str(query), "--sphere-k", "1", "--seed", "0"])
        assert result.exit_code == 0, result.output
        manifold = read_manifold(out)
        q = np.asarray(json.loads(query.read_text()))
        assert json.loads(result.output)["id"] == oracle_farthest(
            manifold, q, 1)[0].id

    def test_sphere_selection_is_seed_stable(self, runner, built):
        out, query = built
        args = ["manifold", "query", "--manifold", str(out),
                "--embedding", str(query), "--sphere-k", "4", "--seed", "11"]
        first = runner.invoke(main, args)
        second = runner.invoke(main, args)
        assert first.output == second.output
        manifold = read_manifold(out)
        q = np.asarray(json.loads(query.read_text()))
        top = {entry.id for entry in oracle_farthest(manifold, q, 4)}
        assert json.loads(first.output)["id"] in top

    def test_query_without_mode_fails(self, runner, built):
        out, query = built
        result = runner.invoke(main, [
            "manifold", "query", "--manifold", str(out),
            "--embedding", str(query)])
        assert result.exit_code != 0
        assert "pass --activity or --sphere-k" in result.output

    def test_unknown_activity_fails(self, runner, built):
        out, query = built
        result = runner.invoke(main, [
            "manifold", "query", "--manifold", str(out),
            "--embedding", str(query), "--activity", "flying"])
        assert result.exit_code != 0
        assert "flying" in result.output


class TestDetect:
    def test_detect_matches_library(self, runner, tmp_path):
        png = tmp_path / "scene.png"
        image = make_body_image((40, 56), TWO_BODY)
        png.write_bytes(encode_png(image))
        result = runner.invoke(main, ["detect", "--image", str(png),
                                      "--mock-seed", "7"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        direct = detect_bodies(image, MockHub(seed=7))
        assert payload["bodies"] == [
            {"body_id": b.body_id, "bbox": b.bbox.as_list(),
             "confidence": b.confidence} for b in direct]

    def test_detect_requires_hub_choice(self, runner, tmp_path):
        png = tmp_path / "scene.png"
        png.write_bytes(encode_png(make_body_image((24, 24), [])))
        result = runner.invoke(main, ["detect", "--image", str(png)])
        assert result.exit_code != 0
        assert "pass --config or --mock-seed" in result.output


class TestAnonymize:
    def run_anonymize(self, runner, tmp_path, choices, seed=0):
        png = tmp_path / "scene.png"
        image = make_body_image((40, 56), TWO_BODY)
        png.write_bytes(encode_png(image))
        choices_path = tmp_path / "choices.json"
        choices_path.write_text(json.dumps(choices))
        out = tmp_path / "out.png"
        result = runner.invoke(main, [
            "anonymize", "--image", str(png), "--choices",
            str(choices_path), "--out", str(out), "--mock-seed", "5",
            "--seed", str(seed)])
        return result, image, out

    def test_no_action_by_index_is_identity(self, runner, tmp_path):
        result, image, out = self.run_anonymize(
            runner, tmp_path, [{"index": 0, "option": "no_action"},
                               {"index": 1, "option": "no_action"}])
        assert result.exit_code == 0, result.output
        assert f"wrote {out}" in result.output
        assert np.array_equal(decode_png(out.read_bytes()), image)

    def test_physical_by_body_id_changes_pixels(self, runner, tmp_path):
        png = tmp_path / "scene.png"
        image = make_body_image((40, 56), TWO_BODY)
        png.write_bytes(encode_png(image))
        listing = runner.invoke(main, ["detect", "--image", str(png),
                                       "--mock-seed", "5"])
        body_id = json.loads(listing.output)["bodies"][0]["body_id"]
        result, image, out = self.run_anonymize(
            runner, tmp_path, [{"body_id": body_id,
                                "option": "physical_removal"}])
        assert result.exit_code == 0, result.output
        assert not np.array_equal(decode_png(out.read_bytes()), image)

    def test_mask_based_runs_with_demo_manifold(self, runner, tmp_path):
        result, image, out = self.run_anonymize(
            runner, tmp_path, [{"index": 0, "option": "mask_based_removal"}])
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_index_out_of_range_fails(self, runner, tmp_path):
        result, _, _ = self.run_anonymize(
            runner, tmp_path, [{"index": 9, "option": "no_action"}])
        assert result.exit_code != 0
        assert "index" in result.output

    def test_choices_must_be_json_list(self, runner, tmp_path):
        result, _, _ = self.run_anonymize(
            runner, tmp_path, {"index": 0, "option": "no_action"})
        assert result.exit_code != 0
        assert "JSON list" in result.output

    def test_choice_without_target_fails(self, runner, tmp_path):
        result, _, _ = self.run_anonymize(
            runner, tmp_path, [{"option": "no_action"}])
        assert result.exit_code != 0
        assert "body_id or index" in result.output

    def test_unknown_option_fails(self, runner, tmp_path):
        result, _, _ = self.run_anonymize(
            runner, tmp_path, [{"index": 0, "option": "blur"}])
        assert result.exit_code != 0

    def test_small_body_warning_goes_to_stderr(self, runner, tmp_path):
        png = tmp_path / "scene.png"
        image = make_body_image((24, 60), [(4, 4, 10, 8)])
        png.write_bytes(encode_png(image))
        choices_path = tmp_path / "choices.json"
        choices_path.write_text(json.dumps(
            [{"index": 0, "option": "identity_removal"}]))
        out = tmp_path / "out.png"
        result = runner.invoke(main, [
            "anonymize", "--image", str(png), "--choices",
            str(choices_path), "--out", str(out), "--mock-seed", "5"])
        assert result.exit_code == 0, result.output
        assert "warning:" in result.stderr
        assert "too small" in result.stderr
        assert "warning:" not in result.stdout


def write_embeddings(path, rows, labels=None):
    lines = []
    for index, row in enumerate(rows):
        record = {"embedding": list(row)}
        if labels is not None:
            record["label"] = labels[index]
        lines.append(json.dumps(record))
    path.write_text("\n".join(lines) + "\n")


class TestEval:
    def test_reid_half_map_case(self, runner, tmp_path):
        queries = tmp_path / "q.jsonl"
        gallery = tmp_path / "g.jsonl"
        write_embeddings(queries, [[1.0, 0.0]], ["alice"])
        write_embeddings(gallery, [[0.9, 0.1], [0.1, 0.9]],
                         ["bob", "alice"])
        json_out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "reid", "--queries", str(queries), "--gallery",
            str(gallery), "--json-out", str(json_out)])
        assert result.exit_code == 0, result.output
        report = json.loads(json_out.read_text())
        assert report["map"] == 50.0
        assert report["rank_k"]["1"] == 0.0
        assert report["humans"] == 1
        assert f"wrote {json_out}" in result.output
        table_lines = [l for l in result.output.splitlines() if l.strip()
                       and "wrote" not in l]
        assert len(table_lines) == 2

    def test_reid_validation_error_is_clean(self, runner, tmp_path):
        queries = tmp_path / "q.jsonl"
        gallery = tmp_path / "g.jsonl"
        write_embeddings(queries, [[1.0, 0.0]], ["ghost"])
        write_embeddings(gallery, [[0.9, 0.1]], ["bob"])
        result = runner.invoke(main, [
            "eval", "reid", "--queries", str(queries),
            "--gallery", str(gallery)])
        assert result.exit_code != 0
        assert "ghost" in result.output

    def test_fid_same_population_is_zero(self, runner, tmp_path):
        rows = np.random.default_rng(3).standard_normal((12, 4)).tolist()
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        write_embeddings(first, rows)
        write_embeddings(second, rows)
        json_out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "fid", "--first", str(first), "--second", str(second),
            "--json-out", str(json_out)])
        assert result.exit_code == 0, result.output
        assert abs(json.loads(json_out.read_text())["fid"]) < 1e-6

    def test_adv_before_after_accuracy(self, runner, tmp_path):
        before = tmp_path / "before"
        after = tmp_path / "after"
        before.mkdir()
        after.mkdir()
        rng = np.random.default_rng(0)
        for index, boxes in enumerate([TWO_BODY,
                                       [(4, 4, 12, 20), (30, 10, 12, 20)]]):
            image = make_body_image((40, 56), boxes)
            (before / f"{index:02d}.png").write_bytes(encode_png(image))
            # low-chroma noise reads as background to the detector
            noise = rng.integers(BACKGROUND_GRAY - 10, BACKGROUND_GRAY + 10,
                                 size=image.shape[:2])
            cleaned = np.repeat(noise[..., None], 3, axis=2).astype(np.uint8)
            (after / f"{index:02d}.png").write_bytes(encode_png(cleaned))
        json_out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "eval", "adv", "--before", str(before), "--after", str(after),
            "--mock-seed", "7", "--json-out", str(json_out)])
        assert result.exit_code == 0, result.output
        report = json.loads(json_out.read_text())
        assert report["accuracy_before"] == 100.0
        assert report["accuracy_after"] == 0.0
        assert report["humans"] == 4  # two bodies in each of two images
        assert np.isfinite(report["psnr"])

    def test_adv_count_mismatch_fails(self, runner, tmp_path):
        before = tmp_path / "before"
        after = tmp_path / "after"
        before.mkdir()
        after.mkdir()
        image = encode_png(make_body_image((24, 24), []))
        (before / "a.png").write_bytes(image)
        result = runner.invoke(main, [
            "eval", "adv", "--before", str(before), "--after", str(after),
            "--mock-seed", "7"])
        assert result.exit_code != 0
        assert "same non-zero number" in result.output


class TestServe:
    def test_serve_requires_config_or_seed(self, runner):
        result = runner.invoke(main, ["serve"])
        assert result.exit_code != 0
        assert "pass --config or --mock-seed" in result.output

    def test_help_lists_commands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for name in ("manifold", "detect", "anonymize", "eval", "serve",
                     "mock-backends"):
            assert name in result.output
