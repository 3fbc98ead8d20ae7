from __future__ import annotations

import json

import pytest

from quizeval.cli import main

from .conftest import make_manifest, make_question


def run_cli(*argv: str) -> int:
    return main(list(argv))


class TestValidate:
    def test_sample_manifest(self, sample_paths, capsys):
        code = run_cli("validate", "--manifest", str(sample_paths.manifest))
        assert code == 0
        assert "8 quizzes, 79 questions, 0 errors" in capsys.readouterr().out

    def test_empty_manifest(self, manifest_factory, capsys):
        path = manifest_factory({"tag_vocabulary": [], "quizzes": []})
        code = run_cli("validate", "--manifest", str(path))
        assert code == 0
        assert "0 quizzes, 0 questions, 0 errors" in capsys.readouterr().out

    def test_missing_image_listed(self, manifest_factory, capsys):
        path = manifest_factory(make_manifest({"qz1": [make_question("q1")]}), create_images=False)
        code = run_cli("validate", "--manifest", str(path))
        assert code == 1
        err = capsys.readouterr().err
        assert "MissingImage" in err and "1 errors" in err

    def test_unparseable_manifest(self, tmp_path, capsys):
        path = tmp_path / "manifest.json"
        path.write_text("}{")
        assert run_cli("validate", "--manifest", str(path)) == 1


class TestRun:
    def test_replay_run_prints_scores_and_writes_transcript(self, sample_paths, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli(
            "run", "--manifest", str(sample_paths.manifest),
            "--backend", "replay", "--fixture", str(sample_paths.fixture),
            "--out", str(out),
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert "total 66/79 (83.54%)" in captured
        assert "ratio 0.8354" in captured
        assert (out / "transcript.json").is_file()
        doc = json.loads((out / "transcript.json").read_text())
        assert doc["scores"]["correct"] == 66

    def test_live_without_credentials_fails_fast(self, sample_paths, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("QUIZEVAL_API_KEY", raising=False)
        code = run_cli(
            "run", "--manifest", str(sample_paths.manifest),
            "--backend", "live", "--out", str(tmp_path / "out"),
        )
        assert code == 1
        assert "QUIZEVAL_API_KEY" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_replay_without_fixture(self, sample_paths, tmp_path, capsys):
        code = run_cli(
            "run", "--manifest", str(sample_paths.manifest),
            "--backend", "replay", "--out", str(tmp_path / "out"),
        )
        assert code == 1
        assert "fixture" in capsys.readouterr().err

    def test_parallelism_levels_agree(self, sample_paths, tmp_path, capsys):
        outs = []
        for parallelism in ("1", "8"):
            out = tmp_path / f"out{parallelism}"
            assert run_cli(
                "run", "--manifest", str(sample_paths.manifest),
                "--backend", "replay", "--fixture", str(sample_paths.fixture),
                "--parallelism", parallelism, "--out", str(out),
            ) == 0
            doc = json.loads((out / "transcript.json").read_text())
            doc["run"].pop("timestamp")
            outs.append(json.dumps(doc, sort_keys=True))
        assert outs[0] == outs[1]

    def test_invalid_manifest_exits_one(self, manifest_factory, tmp_path, capsys):
        path = manifest_factory(make_manifest({"qz1": [make_question("q1", correct="F")]}))
        fixture = tmp_path / "f.json"
        fixture.write_text("{}")
        code = run_cli("run", "--manifest", str(path), "--backend", "replay",
                       "--fixture", str(fixture), "--out", str(tmp_path / "out"))
        assert code == 1

    def test_config_file_with_flag_override(self, sample_paths, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "manifest": str(sample_paths.manifest),
            "backend": "replay",
            "fixture": str(sample_paths.fixture),
            "out": str(tmp_path / "from-config"),
            "parallelism": 2,
        }))
        override_out = tmp_path / "from-flag"
        code = run_cli("run", "--config", str(config_path), "--out", str(override_out))
        assert code == 0
        assert (override_out / "transcript.json").is_file()
        assert not (tmp_path / "from-config").exists()

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"bogus": 1}))
        assert run_cli("run", "--config", str(config_path)) == 1

    def test_usage_error_exits_one(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli("run", "--backend", "teapot")
        assert excinfo.value.code == 1


@pytest.fixture
def analyzed(sample_paths, tmp_path, capsys):
    run_out = tmp_path / "run"
    assert run_cli(
        "run", "--manifest", str(sample_paths.manifest),
        "--backend", "replay", "--fixture", str(sample_paths.fixture),
        "--out", str(run_out),
    ) == 0
    analysis_out = tmp_path / "analysis"
    assert run_cli(
        "analyze", "--transcript", str(run_out / "transcript.json"),
        "--manifest", str(sample_paths.manifest), "--out", str(analysis_out),
    ) == 0
    capsys.readouterr()
    return run_out, analysis_out


class TestAnalyze:
    def test_produces_full_bundle(self, analyzed):
        _, out = analyzed
        names = {p.name for p in out.iterdir()}
        assert {
            "report.json", "scores.csv", "ima.csv", "entity_frequencies.csv",
            "graph_metrics.csv", "requirements.csv", "entities.csv",
            "correct_graph.dot", "incorrect_graph.dot",
            "correct_graph.graphml", "incorrect_graph.graphml",
        } <= names

    def test_report_ima_matches_expected(self, analyzed):
        _, out = analyzed
        doc = json.loads((out / "report.json").read_text())
        assert doc["ima"]["incorrect"] == {
            "CV": 3, "SKIN": 2, "ENDO": 2, "EYE": 1, "LIVER": 1,
            "HN": 1, "FEM": 1, "INFL": 1, "LUNG": 1,
        }
        assert set(doc["ima"]["incorrect_only_tags"]) >= {"EYE", "HN"}

    def test_requires_no_network_with_gazetteer(self, analyzed):
        # Everything above ran offline; double-check by re-running analysis.
        run_out, _ = analyzed
        assert run_cli(
            "analyze", "--transcript", str(run_out / "transcript.json"),
            "--manifest", str(run_out.parent / ".." / "nonexistent"),
        ) == 1  # bad manifest still fails cleanly without touching the network

    def test_llm_extractor_without_key(self, analyzed, sample_paths, monkeypatch, capsys):
        run_out, _ = analyzed
        monkeypatch.delenv("QUIZEVAL_API_KEY", raising=False)
        code = run_cli(
            "analyze", "--transcript", str(run_out / "transcript.json"),
            "--manifest", str(sample_paths.manifest), "--extractor", "llm",
        )
        assert code == 1
        assert "ExtractorUnavailable" in capsys.readouterr().err

    def test_mismatched_corpus(self, analyzed, manifest_factory, capsys):
        run_out, _ = analyzed
        other = manifest_factory(make_manifest({"qz1": [make_question("q1")]}))
        code = run_cli(
            "analyze", "--transcript", str(run_out / "transcript.json"),
            "--manifest", str(other),
        )
        assert code == 1
        assert "RunMismatch" in capsys.readouterr().err

    def test_all_correct_transcript_degenerate_branch(self, manifest_factory, tmp_path, capsys):
        questions = [make_question(f"q{i}", correct="A") for i in range(3)]
        path = manifest_factory(make_manifest({"qz1": questions}))
        fixture = tmp_path / "perfect.json"
        fixture.write_text(json.dumps({f"q{i}": "Correct Choice:A" for i in range(3)}))
        run_out, analysis_out = tmp_path / "run", tmp_path / "analysis"
        assert run_cli("run", "--manifest", str(path), "--backend", "replay",
                       "--fixture", str(fixture), "--out", str(run_out)) == 0
        assert run_cli("analyze", "--transcript", str(run_out / "transcript.json"),
                       "--manifest", str(path), "--out", str(analysis_out)) == 0
        doc = json.loads((analysis_out / "report.json").read_text())
        assert doc["graphs"]["incorrect"] == {"nodes": [], "edges": []}
        assert doc["metrics"]["incorrect"]["density"] is None
        kinds = {w["kind"] for w in doc["requirements"]}
        assert "DenseFailureCluster" not in kinds and "IncorrectOnlyTag" not in kinds

    def test_custom_lexicon(self, analyzed, sample_paths, tmp_path, capsys):
        run_out, _ = analyzed
        lexicon = tmp_path / "lexicon.json"
        lexicon.write_text(json.dumps({"ORGAN": ["heart", "lung", "liver", "skin"]}))
        out = tmp_path / "custom"
        code = run_cli(
            "analyze", "--transcript", str(run_out / "transcript.json"),
            "--manifest", str(sample_paths.manifest),
            "--lexicon", str(lexicon), "--out", str(out),
        )
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert set(doc["entity_frequencies"]["correct"]) == {"ORGAN"}


class TestSample:
    def test_materializes_bundle(self, tmp_path, capsys):
        out = tmp_path / "bundle"
        assert run_cli("sample", "--out", str(out)) == 0
        assert (out / "manifest.json").is_file()
        assert (out / "replay_fixture.json").is_file()
        assert len(list((out / "images").glob("*.png"))) == 79

    def test_deterministic(self, tmp_path, capsys):
        first, second = tmp_path / "a", tmp_path / "b"
        run_cli("sample", "--out", str(first))
        run_cli("sample", "--out", str(second))
        assert (first / "manifest.json").read_bytes() == (second / "manifest.json").read_bytes()
        assert (first / "replay_fixture.json").read_bytes() == (second / "replay_fixture.json").read_bytes()
