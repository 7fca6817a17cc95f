"""Document corpus and free-text title resolution."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class CorpusError(ValueError):
    pass


class DuplicateDocError(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate doc_id {doc_id!r}")
        self.doc_id = doc_id


class UnknownDocError(KeyError):
    pass


def count_words(paragraphs: Iterable[str]) -> int:
    return len(" ".join(paragraphs).split())


@dataclass
class Document:
    doc_id: str
    title: str
    paragraphs: list[str] = field(default_factory=list)
    redirects: set[str] = field(default_factory=set)
    aliases: set[str] = field(default_factory=set)
    pageviews: int = 0
    word_count: int | None = None
    infobox_template: str | None = None
    disambiguation: bool = False

    def __post_init__(self) -> None:
        if self.pageviews < 0:
            raise CorpusError(f"{self.doc_id}: negative pageviews")
        self.redirects = {r for r in self.redirects if r != self.title}
        self.aliases = {a for a in self.aliases if a != self.title}
        if self.word_count is None:
            self.word_count = count_words(self.paragraphs)

    @property
    def text(self) -> str:
        return "\n".join(self.paragraphs)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "paragraphs": list(self.paragraphs),
            "redirects": sorted(self.redirects),
            "aliases": sorted(self.aliases),
            "pageviews": self.pageviews,
            "word_count": self.word_count,
            "infobox_template": self.infobox_template,
            "disambiguation": self.disambiguation,
        }


class Stage(str, Enum):
    EXACT = "exact"
    INEXACT = "inexact"
    SHORTENED_EXACT = "shortened_exact"
    SHORTENED_INEXACT = "shortened_inexact"
    UNMATCHED = "unmatched"


@dataclass(frozen=True)
class TitleResolution:
    matched_doc_id: str | None
    stage: Stage

    def __post_init__(self) -> None:
        if (self.stage is Stage.UNMATCHED) != (self.matched_doc_id is None):
            raise ValueError("unmatched stage iff no doc id")


_WS = re.compile(r"\s+")
_TRAILING_PAREN = re.compile(r"\s*\([^()]*\)\s*$")


def normalize_title(title: str) -> str:
    """Casefold + NFC + collapsed whitespace."""
    t = unicodedata.normalize("NFC", title)
    return _WS.sub(" ", t).strip().casefold()


def strip_parenthetical(title: str) -> str | None:
    """Drop one trailing ``(...)`` group; ``None`` if there is none to drop."""
    stripped = _TRAILING_PAREN.sub("", title)
    if stripped == title or not stripped.strip():
        return None
    return stripped


class Corpus:
    """Immutable, ingestion-ordered collection of documents."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in self._docs:
                raise DuplicateDocError(doc.doc_id)
            self._docs[doc.doc_id] = doc
        self._ids = list(self._docs)
        self._exact: dict[str, str] = {}
        self._inexact: dict[str, str] = {}
        self._build_title_maps()

    def _build_title_maps(self) -> None:
        exact: dict[str, list[Document]] = {}
        inexact: dict[str, list[Document]] = {}
        for doc in self._docs.values():
            exact.setdefault(normalize_title(doc.title), []).append(doc)
            for name in doc.redirects | doc.aliases:
                inexact.setdefault(normalize_title(name), []).append(doc)
        # shared names go to the most viewed doc, then lowest doc_id
        pick = lambda docs: min(docs, key=lambda d: (-d.pageviews, d.doc_id)).doc_id
        self._exact = {k: pick(v) for k, v in exact.items()}
        self._inexact = {k: pick(v) for k, v in inexact.items()}

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._docs

    def __iter__(self) -> Iterator[Document]:
        return (self._docs[i] for i in self._ids)

    def lookup(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise UnknownDocError(doc_id) from None

    def all_ids(self) -> list[str]:
        return list(self._ids)

    def resolve_title(self, title: str) -> TitleResolution:
        """Exact title, then redirect/alias, then both again without a
        trailing parenthetical. First hit wins."""
        stages = [(title, Stage.EXACT, Stage.INEXACT)]
        shortened = strip_parenthetical(title)
        if shortened is not None:
            stages.append((shortened, Stage.SHORTENED_EXACT, Stage.SHORTENED_INEXACT))
        for text, exact_stage, inexact_stage in stages:
            key = normalize_title(text)
            if key in self._exact:
                return TitleResolution(self._exact[key], exact_stage)
            if key in self._inexact:
                return TitleResolution(self._inexact[key], inexact_stage)
        return TitleResolution(None, Stage.UNMATCHED)

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for doc in self:
                fh.write(json.dumps(doc.to_json(), ensure_ascii=False) + "\n")


_REQUIRED = ("doc_id", "title", "paragraphs")


def _parse_record(obj: object, lineno: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    for key in _REQUIRED:
        if key not in obj:
            raise CorpusError(f"line {lineno}: missing key {key!r}")
    paragraphs = obj["paragraphs"]
    if not isinstance(paragraphs, list) or not all(isinstance(p, str) for p in paragraphs):
        raise CorpusError(f"line {lineno}: paragraphs must be a list of strings")
    pageviews = obj.get("pageviews", 0)
    if not isinstance(pageviews, int) or pageviews < 0:
        raise CorpusError(f"line {lineno}: pageviews must be a non-negative integer")
    word_count = obj.get("word_count")
    if word_count is not None and (not isinstance(word_count, int) or word_count < 0):
        raise CorpusError(f"line {lineno}: word_count must be a non-negative integer")
    return Document(
        doc_id=str(obj["doc_id"]),
        title=str(obj["title"]),
        paragraphs=paragraphs,
        redirects=set(obj.get("redirects") or ()),
        aliases=set(obj.get("aliases") or ()),
        pageviews=pageviews,
        word_count=word_count,
        infobox_template=obj.get("infobox_template"),
        disambiguation=bool(obj.get("disambiguation", False)),
    )


def ingest_corpus(source: str | Path, format: str = "jsonl") -> Corpus:
    """Load a JSONL corpus file. Malformed lines are reported by line number."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")

    def records():
        with open(source, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: {exc.msg}") from exc
                yield _parse_record(obj, lineno)

    return Corpus(records())
