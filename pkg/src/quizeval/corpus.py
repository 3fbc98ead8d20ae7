"""Loading and validation of image-paired multiple-choice quiz corpora.

A corpus lives in a single JSON manifest:

    {
      "tag_vocabulary": ["CV", "SKIN", ...],
      "quizzes": [
        {"id": "quiz1", "title": "...", "questions": [
          {"id": "q101",
           "stem": "...",
           "choices": [{"letter": "A", "text": "..."}, ...],
           "correct_letter": "D",
           "explanation": "...",
           "image": {"path": "images/q101.png", "domain_tag": "CV"}}
        ]}
      ]
    }

Image paths are resolved relative to the manifest's directory and must point
at readable JPEG or PNG files. Every question carries exactly one domain tag
drawn from the corpus-declared vocabulary. Loaded corpora are immutable and
safe to share across threads.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

LETTER_SEQUENCE = "ABCDE"
MIN_CHOICES = 2
MAX_CHOICES = 5
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class CorpusError(Exception):
    """Base class for corpus loading and validation failures."""


class MalformedManifestError(CorpusError):
    """The manifest file is missing, unparseable, or not manifest-shaped."""


@dataclass(frozen=True)
class ValidationIssue:
    """One problem found while validating a manifest.

    ``kind`` is one of: MissingImage, DuplicateId, InvalidCorrectLetter,
    UnknownTag, MalformedManifest.
    """

    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class CorpusValidationError(CorpusError):
    """Raised with the full list of issues found in a manifest."""

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = tuple(issues)
        summary = "; ".join(str(i) for i in self.issues[:5])
        if len(self.issues) > 5:
            summary += f" (+{len(self.issues) - 5} more)"
        super().__init__(f"{len(self.issues)} validation issue(s): {summary}")


@dataclass(frozen=True)
class ImageRef:
    """A question's image: file location plus its domain tag (e.g. CV, SKIN)."""

    path: Path
    domain_tag: str


@dataclass(frozen=True)
class Choice:
    letter: str
    text: str


@dataclass(frozen=True)
class Question:
    """One quiz item: stem, lettered choices, official answer and explanation.

    The explanation is mandatory even though only incorrectly answered
    questions consume it downstream; which answers will be wrong is unknown
    until a run happens.
    """

    id: str
    quiz_id: str
    stem: str
    choices: tuple[Choice, ...]
    correct_letter: str
    explanation: str
    image: ImageRef

    @property
    def choice_letters(self) -> tuple[str, ...]:
        return tuple(c.letter for c in self.choices)


@dataclass(frozen=True)
class Quiz:
    id: str
    title: str
    questions: tuple[Question, ...]


@dataclass(frozen=True)
class QuizCorpus:
    quizzes: tuple[Quiz, ...]
    tag_vocabulary: frozenset[str]

    @property
    def question_count(self) -> int:
        return sum(len(q.questions) for q in self.quizzes)

    def iter_questions(self) -> Iterator[Question]:
        for quiz in self.quizzes:
            yield from quiz.questions

    def get_question(self, question_id: str) -> Question:
        for q in self.iter_questions():
            if q.id == question_id:
                return q
        raise KeyError(question_id)


@dataclass(frozen=True)
class CorpusStats:
    total_questions: int
    per_quiz: dict[str, int]
    tag_histogram: dict[str, int]


def load_corpus(manifest_path: str | Path) -> QuizCorpus:
    """Load and fully validate a corpus manifest.

    Raises MalformedManifestError when the file cannot be parsed at all, and
    CorpusValidationError carrying every issue found otherwise.
    """
    manifest_path = Path(manifest_path)
    try:
        raw = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedManifestError("manifest top level must be a JSON object")
    return _corpus_from_dict(doc, base_dir=manifest_path.parent)


def _corpus_from_dict(doc: dict, base_dir: Path) -> QuizCorpus:
    issues: list[ValidationIssue] = []

    vocab_raw = doc.get("tag_vocabulary")
    if not isinstance(vocab_raw, list) or not all(isinstance(t, str) for t in vocab_raw):
        raise MalformedManifestError("tag_vocabulary must be an array of strings")
    vocabulary = frozenset(vocab_raw)

    quizzes_raw = doc.get("quizzes")
    if not isinstance(quizzes_raw, list):
        raise MalformedManifestError("quizzes must be an array")

    seen_question_ids: set[str] = set()
    seen_quiz_ids: set[str] = set()
    quizzes: list[Quiz] = []
    for qz in quizzes_raw:
        quiz = _parse_quiz(qz, base_dir, vocabulary, seen_question_ids, seen_quiz_ids, issues)
        if quiz is not None:
            quizzes.append(quiz)

    if issues:
        raise CorpusValidationError(issues)
    return QuizCorpus(quizzes=tuple(quizzes), tag_vocabulary=vocabulary)


def _parse_quiz(
    qz: object,
    base_dir: Path,
    vocabulary: frozenset[str],
    seen_question_ids: set[str],
    seen_quiz_ids: set[str],
    issues: list[ValidationIssue],
) -> Quiz | None:
    if not isinstance(qz, dict):
        issues.append(ValidationIssue("MalformedManifest", "quiz entry must be an object"))
        return None
    quiz_id = qz.get("id")
    title = qz.get("title", "")
    questions_raw = qz.get("questions")
    if not isinstance(quiz_id, str) or not quiz_id:
        issues.append(ValidationIssue("MalformedManifest", "quiz id must be a non-empty string"))
        return None
    if quiz_id in seen_quiz_ids:
        issues.append(ValidationIssue("DuplicateId", f"quiz id {quiz_id!r} appears more than once"))
        return None
    seen_quiz_ids.add(quiz_id)
    if not isinstance(title, str):
        issues.append(ValidationIssue("MalformedManifest", f"quiz {quiz_id}: title must be a string"))
        title = ""
    if not isinstance(questions_raw, list):
        issues.append(ValidationIssue("MalformedManifest", f"quiz {quiz_id}: questions must be an array"))
        return None

    questions: list[Question] = []
    for entry in questions_raw:
        q = _parse_question(entry, quiz_id, base_dir, vocabulary, seen_question_ids, issues)
        if q is not None:
            questions.append(q)
    return Quiz(id=quiz_id, title=title, questions=tuple(questions))


def _parse_question(
    entry: object,
    quiz_id: str,
    base_dir: Path,
    vocabulary: frozenset[str],
    seen_question_ids: set[str],
    issues: list[ValidationIssue],
) -> Question | None:
    if not isinstance(entry, dict):
        issues.append(ValidationIssue("MalformedManifest", f"quiz {quiz_id}: question entry must be an object"))
        return None
    qid = entry.get("id")
    if not isinstance(qid, str) or not qid:
        issues.append(ValidationIssue("MalformedManifest", f"quiz {quiz_id}: question id must be a non-empty string"))
        return None
    if qid in seen_question_ids:
        issues.append(ValidationIssue("DuplicateId", f"question id {qid!r} appears more than once"))
        return None
    seen_question_ids.add(qid)

    ok = True
    stem = entry.get("stem")
    if not isinstance(stem, str):
        issues.append(ValidationIssue("MalformedManifest", f"question {qid}: stem must be a string"))
        ok = False

    choices = _parse_choices(entry.get("choices"), qid, issues)
    if choices is None:
        ok = False

    correct = entry.get("correct_letter")
    if not isinstance(correct, str):
        issues.append(ValidationIssue("MalformedManifest", f"question {qid}: correct_letter must be a string"))
        ok = False
    elif choices is not None and correct not in tuple(c.letter for c in choices):
        issues.append(
            ValidationIssue(
                "InvalidCorrectLetter",
                f"question {qid}: correct_letter {correct!r} is not among the choice letters",
            )
        )
        ok = False

    explanation = entry.get("explanation")
    if not isinstance(explanation, str) or not explanation.strip():
        issues.append(ValidationIssue("MalformedManifest", f"question {qid}: explanation must be non-empty"))
        ok = False

    image = _parse_image(entry.get("image"), qid, base_dir, vocabulary, issues)
    if image is None:
        ok = False

    if not ok:
        return None
    return Question(
        id=qid,
        quiz_id=quiz_id,
        stem=stem,
        choices=choices,
        correct_letter=correct,
        explanation=explanation,
        image=image,
    )


def _parse_choices(raw: object, qid: str, issues: list[ValidationIssue]) -> tuple[Choice, ...] | None:
    if not isinstance(raw, list) or not (MIN_CHOICES <= len(raw) <= MAX_CHOICES):
        issues.append(
            ValidationIssue(
                "MalformedManifest",
                f"question {qid}: choices must be an array of {MIN_CHOICES}-{MAX_CHOICES} entries",
            )
        )
        return None
    choices: list[Choice] = []
    for item in raw:
        if not isinstance(item, dict) or not isinstance(item.get("letter"), str) or not isinstance(item.get("text"), str):
            issues.append(ValidationIssue("MalformedManifest", f"question {qid}: each choice needs letter and text"))
            return None
        choices.append(Choice(letter=item["letter"], text=item["text"]))
    letters = tuple(c.letter for c in choices)
    if letters != tuple(LETTER_SEQUENCE[: len(letters)]):
        issues.append(
            ValidationIssue(
                "MalformedManifest",
                f"question {qid}: choice letters must be A..{LETTER_SEQUENCE[len(letters) - 1]} in order, got {letters}",
            )
        )
        return None
    return tuple(choices)


def _parse_image(
    raw: object, qid: str, base_dir: Path, vocabulary: frozenset[str], issues: list[ValidationIssue]
) -> ImageRef | None:
    if not isinstance(raw, dict) or not isinstance(raw.get("path"), str) or not isinstance(raw.get("domain_tag"), str):
        issues.append(ValidationIssue("MalformedManifest", f"question {qid}: image needs path and domain_tag"))
        return None
    tag = raw["domain_tag"]
    ok = True
    if tag not in vocabulary:
        issues.append(ValidationIssue("UnknownTag", f"question {qid}: tag {tag!r} is not in the tag vocabulary"))
        ok = False
    rel = Path(raw["path"])
    path = rel if rel.is_absolute() else base_dir / rel
    if path.suffix.lower() not in IMAGE_SUFFIXES:
        issues.append(
            ValidationIssue("MalformedManifest", f"question {qid}: image {path.name!r} is not a JPEG or PNG file")
        )
        ok = False
    if not path.is_file() or not os.access(path, os.R_OK):
        issues.append(ValidationIssue("MissingImage", f"question {qid}: image file {str(path)!r} is not readable"))
        ok = False
    if not ok:
        return None
    return ImageRef(path=path, domain_tag=tag)


def corpus_stats(corpus: QuizCorpus) -> CorpusStats:
    """Per-quiz question counts plus a histogram of domain tags."""
    per_quiz = {quiz.id: len(quiz.questions) for quiz in corpus.quizzes}
    histogram: dict[str, int] = {}
    for question in corpus.iter_questions():
        tag = question.image.domain_tag
        histogram[tag] = histogram.get(tag, 0) + 1
    return CorpusStats(
        total_questions=corpus.question_count,
        per_quiz=per_quiz,
        tag_histogram=dict(sorted(histogram.items())),
    )


def serialize_corpus(corpus: QuizCorpus, base_dir: str | Path) -> dict:
    """Render a corpus back into manifest form, relativizing image paths."""
    base_dir = Path(base_dir)
    return {
        "tag_vocabulary": sorted(corpus.tag_vocabulary),
        "quizzes": [
            {
                "id": quiz.id,
                "title": quiz.title,
                "questions": [
                    {
                        "id": q.id,
                        "stem": q.stem,
                        "choices": [{"letter": c.letter, "text": c.text} for c in q.choices],
                        "correct_letter": q.correct_letter,
                        "explanation": q.explanation,
                        "image": {
                            "path": os.path.relpath(q.image.path, base_dir),
                            "domain_tag": q.image.domain_tag,
                        },
                    }
                    for q in quiz.questions
                ],
            }
            for quiz in corpus.quizzes
        ],
    }


def write_manifest(corpus: QuizCorpus, path: str | Path) -> Path:
    """Write the manifest-form serialization next to its images."""
    path = Path(path)
    doc = serialize_corpus(corpus, base_dir=path.parent)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path
