import json

import numpy as np
import pytest
from click.testing import CliRunner

from face3dqa.cli import main
from face3dqa.core import Dimension, FixationAnnotation
from face3dqa.io import write_fixations_json, write_ratings_jsonl
from face3dqa.mos import ScreeningMode, ScreeningPolicy, aggregate_mos, read_mos_csv
from face3dqa.prompts import QUESTION_TEMPLATES
from face3dqa.saliency import read_g3ds

from conftest import ratings_for_subject


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def ratings_file(tmp_path):
    records = (ratings_for_subject("s1", {"A": 1.0, "B": 3.0, "C": 2.0})
               + ratings_for_subject("s2", {"A": 2.0, "B": 4.0, "C": 2.5})
               + ratings_for_subject("s3", {"A": 1.5, "B": 3.5, "C": 2.2}))
    path = tmp_path / "ratings.jsonl"
    write_ratings_jsonl(records, path)
    return path, records


@pytest.fixture
def fixations_file(tmp_path):
    anns = [
        FixationAnnotation("A", "ann1", 32, 24, points=((5, 6), (20, 10))),
        FixationAnnotation("A", "ann2", 32, 24, points=((5, 6), (12, 12))),
        FixationAnnotation("B", "ann1", 32, 24, points=((1, 1),)),
    ]
    path = tmp_path / "fixations.json"
    write_fixations_json(anns, path)
    return path


class TestHelp:
    @pytest.mark.parametrize("cmd", ["mos", "saliency", "eval-scores", "eval-saliency",
                                     "eval-qa", "split", "report", "serve", "prompts"])
    def test_every_subcommand_has_help(self, runner, cmd):
        result = runner.invoke(main, [cmd, "--help"])
        assert result.exit_code == 0
        assert "--help" in result.output


class TestMos:
    def test_writes_csv_and_rejects(self, runner, ratings_file, tmp_path):
        in_path, records = ratings_file
        out = tmp_path / "mos.csv"
        result = runner.invoke(main, ["mos", "--in", str(in_path), "--out", str(out),
                                      "--screen", "itu"])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert (tmp_path / "mos.csv.rejects.json").exists()
        expected = aggregate_mos(records, ScreeningPolicy(mode=ScreeningMode.ITU_ANNEX2))
        got = read_mos_csv(out)
        assert got.keys() == expected.entries.keys()
        for key in got:
            assert got[key].mos == expected.entries[key].mos

    def test_idempotent_bytes(self, runner, ratings_file, tmp_path):
        in_path, _ = ratings_file
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            result = runner.invoke(main, ["mos", "--in", str(in_path), "--out", str(out)])
            assert result.exit_code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_missing_input_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["mos", "--in", str(tmp_path / "nope.jsonl"),
                                      "--out", str(tmp_path / "o.csv")])
        assert result.exit_code == 2

    def test_schema_violation_reports_location(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"subject_id": "s"}\n')
        result = runner.invoke(main, ["mos", "--in", str(bad),
                                      "--out", str(tmp_path / "o.csv")])
        assert result.exit_code == 2
        assert "bad.jsonl:1" in result.output


class TestSaliency:
    def test_sigma_zero_is_usage_error(self, runner, fixations_file, tmp_path):
        result = runner.invoke(main, ["saliency", "--fixations", str(fixations_file),
                                      "--out-dir", str(tmp_path / "maps"), "--sigma", "0"])
        assert result.exit_code == 2
        assert "sigma must be > 0" in result.output

    def test_writes_both_formats(self, runner, fixations_file, tmp_path):
        out_dir = tmp_path / "maps"
        result = runner.invoke(main, ["saliency", "--fixations", str(fixations_file),
                                      "--out-dir", str(out_dir), "--sigma", "2.5",
                                      "--jobs", "2"])
        assert result.exit_code == 0, result.output
        for item in ("A", "B"):
            assert (out_dir / f"{item}.pgm").exists()
            assert (out_dir / f"{item}.g3ds").exists()
        smap = read_g3ds(out_dir / "A.g3ds")
        assert (smap.width, smap.height) == (32, 24)
        assert smap.grid.max() == pytest.approx(1.0, abs=1e-6)  # max-normalized

    def test_deterministic(self, runner, fixations_file, tmp_path):
        blobs = []
        for name in ("m1", "m2"):
            out_dir = tmp_path / name
            runner.invoke(main, ["saliency", "--fixations", str(fixations_file),
                                 "--out-dir", str(out_dir), "--sigma", "2.5"])
            blobs.append((out_dir / "A.g3ds").read_bytes())
        assert blobs[0] == blobs[1]


class TestEvalScores:
    def _mos_csv(self, runner, ratings_file, tmp_path):
        in_path, _ = ratings_file
        out = tmp_path / "mos.csv"
        runner.invoke(main, ["mos", "--in", str(in_path), "--out", str(out),
                             "--screen", "none"])
        return out

    def test_oracle_predictor(self, runner, ratings_file, tmp_path):
        mos_csv = self._mos_csv(runner, ratings_file, tmp_path)
        entries = read_mos_csv(mos_csv)
        pred = tmp_path / "pred.csv"
        lines = ["item_id,quality_score,authenticity_score"]
        for item in sorted({i for i, _ in entries}):
            q = entries[(item, Dimension.QUALITY)].mos
            a = entries[(item, Dimension.AUTHENTICITY)].mos
            lines.append(f"{item},{q!r},{a!r}")
        pred.write_text("\n".join(lines) + "\n")
        report_json = tmp_path / "report.json"
        result = runner.invoke(main, ["eval-scores", "--mos", str(mos_csv),
                                      "--pred", str(pred), "--out-json", str(report_json)])
        assert result.exit_code == 0, result.output
        assert "quality_srcc: 1.0000" in result.output
        data = json.loads(report_json.read_text())
        assert data["mean"]["authenticity_plcc"] == 1.0
        return report_json

    def test_report_rendering(self, runner, ratings_file, tmp_path):
        report_json = self.test_oracle_predictor(runner, ratings_file, tmp_path)
        out_md = tmp_path / "table.md"
        out_csv = tmp_path / "table.csv"
        result = runner.invoke(main, ["report", str(report_json),
                                      "--out-md", str(out_md), "--out-csv", str(out_csv)])
        assert result.exit_code == 0, result.output
        assert "| predictor |" in out_md.read_text()
        header = out_csv.read_text().split("\n")[0]
        assert header.startswith("predictor,fold,config,")


class TestEvalSaliency:
    def test_identity_predictions(self, runner, fixations_file, tmp_path):
        maps_dir = tmp_path / "maps"
        runner.invoke(main, ["saliency", "--fixations", str(fixations_file),
                             "--out-dir", str(maps_dir), "--sigma", "2.0",
                             "--norm", "raw", "--format", "g3ds"])
        out = tmp_path / "metrics.csv"
        result = runner.invoke(main, ["eval-saliency", "--fixations", str(fixations_file),
                                      "--pred-dir", str(maps_dir), "--sigma", "2.0",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("#")  # conventions header
        assert lines[1] == "item_id,auc,nss,cc,sim,kld"
        assert lines[-1].startswith("mean,")
        cc_by_item = {l.split(",")[0]: float(l.split(",")[3]) for l in lines[2:]}
        assert cc_by_item["A"] == pytest.approx(1.0, abs=1e-6)


class TestEvalQa:
    def test_accuracy(self, runner, tmp_path):
        truth = tmp_path / "truth.json"
        truth.write_text(json.dumps([
            {"item_id": "A", "annotator_id": "x", "categories": ["Eye Distortions"]},
            {"item_id": "B", "annotator_id": "x", "categories": ["No Distortion"]},
        ]))
        pred = tmp_path / "pred.json"
        pred.write_text(json.dumps([
            {"item_id": "A", "categories": ["Eye Distortions"]},
            {"item_id": "B", "categories": ["Hair Distortions"]},
        ]))
        result = runner.invoke(main, ["eval-qa", "--truth", str(truth), "--pred", str(pred)])
        assert result.exit_code == 0, result.output
        assert "qa_accuracy (exact): 0.5000" in result.output


class TestSplit:
    def _manifest(self, tmp_path, n=20):
        path = tmp_path / "manifest.json"
        items = [{"id": f"item-{i}", "model_tag": f"gen-{i % 2}"} for i in range(n)]
        path.write_text(json.dumps({"items": items}))
        return path

    def test_deterministic_bytes(self, runner, tmp_path):
        manifest = self._manifest(tmp_path)
        outs = []
        for name in ("s1.json", "s2.json"):
            out = tmp_path / name
            result = runner.invoke(main, ["split", "--manifest", str(manifest),
                                          "--k", "5", "--seed", "42", "--out", str(out)])
            assert result.exit_code == 0, result.output
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_too_few_items(self, runner, tmp_path):
        manifest = self._manifest(tmp_path, n=3)
        result = runner.invoke(main, ["split", "--manifest", str(manifest),
                                      "--k", "5", "--out", str(tmp_path / "s.json")])
        assert result.exit_code == 2


class TestPrompts:
    def test_emits_all_templates(self, runner):
        result = runner.invoke(main, ["prompts"])
        assert result.exit_code == 0
        for text in QUESTION_TEMPLATES.values():
            assert text in result.output

    def test_single_template(self, runner):
        result = runner.invoke(main, ["prompts", "--name", "quality"])
        assert result.exit_code == 0
        assert result.output.strip() == QUESTION_TEMPLATES["quality"]
        assert result.output.startswith("Please rate the quality of the human face")


class TestConfigMerge:
    def test_config_supplies_defaults_flags_win(self, runner, ratings_file, tmp_path):
        in_path, records = ratings_file
        config = tmp_path / "cfg.toml"
        config.write_text('[mos]\nscreen = "none"\n')
        out = tmp_path / "mos.csv"
        result = runner.invoke(main, ["--config", str(config), "mos",
                                      "--in", str(in_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        rejects = json.loads((tmp_path / "mos.csv.rejects.json").read_text())
        assert rejects["policy"] == "none"
        # explicit flag overrides the config default
        result = runner.invoke(main, ["--config", str(config), "mos",
                                      "--in", str(in_path), "--out", str(out),
                                      "--screen", "itu"])
        assert result.exit_code == 0
        rejects = json.loads((tmp_path / "mos.csv.rejects.json").read_text())
        assert rejects["policy"] == "itu"
