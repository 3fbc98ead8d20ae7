from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import pytest

from quizeval.client import open_replay
from quizeval.corpus import load_corpus
from quizeval.evaluator import run_evaluation
from quizeval.prompting import EngineConfig, RulesOfConduct
from quizeval.sampledata import SamplePaths, materialize_sample


def tiny_png() -> bytes:
    def chunk(tag: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", zlib.compress(b"\x00\x80")) + chunk(b"IEND", b"")


TINY_PNG = tiny_png()


def make_question(qid: str, *, tag: str = "CV", correct: str = "A", image: str | None = None,
                  stem: str = "What does the image show?", explanation: str = "Because of the finding.",
                  n_choices: int = 5) -> dict:
    letters = "ABCDE"[:n_choices]
    return {
        "id": qid,
        "stem": stem,
        "choices": [{"letter": letter, "text": f"Option {letter}"} for letter in letters],
        "correct_letter": correct,
        "explanation": explanation,
        "image": {"path": image or f"images/{qid}.png", "domain_tag": tag},
    }


def make_manifest(questions_by_quiz: dict[str, list[dict]], vocabulary: list[str] | None = None) -> dict:
    return {
        "tag_vocabulary": vocabulary or ["CV", "SKIN", "ENDO", "EYE", "HN", "LUNG", "LIVER", "INFL", "FEM"],
        "quizzes": [
            {"id": quiz_id, "title": quiz_id.title(), "questions": questions}
            for quiz_id, questions in questions_by_quiz.items()
        ],
    }


@pytest.fixture
def manifest_factory(tmp_path):
    """Write a manifest dict (and placeholder images for its questions) to disk."""

    def write(manifest: dict, *, create_images: bool = True, dirname: str = "corpus") -> Path:
        root = tmp_path / dirname
        root.mkdir(parents=True, exist_ok=True)
        if create_images:
            for quiz in manifest.get("quizzes", []):
                for question in quiz.get("questions", []):
                    image_path = root / question["image"]["path"]
                    image_path.parent.mkdir(parents=True, exist_ok=True)
                    image_path.write_bytes(TINY_PNG)
        path = root / "manifest.json"
        path.write_text(json.dumps(manifest), encoding="utf-8")
        return path

    return write


@pytest.fixture(scope="session")
def sample_paths(tmp_path_factory) -> SamplePaths:
    return materialize_sample(tmp_path_factory.mktemp("sample"))


@pytest.fixture(scope="session")
def sample_corpus(sample_paths):
    return load_corpus(sample_paths.manifest)


@pytest.fixture(scope="session")
def sample_transcript(sample_paths, sample_corpus):
    completion = open_replay(sample_paths.fixture)
    return run_evaluation(
        sample_corpus, RulesOfConduct(), EngineConfig(), completion, 1, backend="replay"
    )
