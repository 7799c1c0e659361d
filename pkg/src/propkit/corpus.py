"""Article and annotation I/O, offset-preserving tokenization, BIO codec, splits.

All offsets are character offsets into the article text, counting Unicode
code points, with newlines counting as one character. Spans are half-open
``[start, end)`` intervals.
"""

from __future__ import annotations

import random
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import FormatError

# Fixed BIO tag inventory: single entity class, three tags.
BIO_TAGS = ("O", "B-PROP", "I-PROP")
O_TAG, B_TAG, I_TAG = 0, 1, 2
NUM_TAGS = 3

UNLABELED = "?"

_ARTICLE_FILE = re.compile(r"article(.+)\.txt$")
_TOKEN = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)


@dataclass(frozen=True, order=True)
class CharSpan:
    """Half-open character interval ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    def __len__(self):
        return self.end - self.start

    def overlaps(self, other: CharSpan) -> bool:
        return self.start < other.end and other.start < self.end

    def strictly_contains(self, other: CharSpan) -> bool:
        """Proper containment: ``other`` inside self and not equal to it."""
        return (
            self.start <= other.start
            and other.end <= self.end
            and (self.start, self.end) != (other.start, other.end)
        )

    def intersection_length(self, other: CharSpan) -> int:
        return max(0, min(self.end, other.end) - max(self.start, other.start))


@dataclass(frozen=True)
class Article:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("article id must be non-empty")

    def check_span(self, span: CharSpan):
        if span.end > len(self.text):
            raise ValueError(
                f"span ({span.start}, {span.end}) exceeds article {self.id} "
                f"length {len(self.text)}"
            )


@dataclass(frozen=True)
class LabeledSpan:
    span: CharSpan
    technique: str


@dataclass(frozen=True)
class Token:
    text: str
    span: CharSpan


@dataclass(frozen=True)
class TcRow:
    """One row of a technique-classification file, in file order.

    ``ordinal`` is the zero-based data-row index, kept so predictions can be
    written back line-aligned. Identical ``(article_id, span)`` rows form a
    multiplicity group; the group size is the number of distinct techniques
    the span must receive.
    """

    ordinal: int
    article_id: str
    technique: str
    span: CharSpan


class TechniqueSet:
    """Ordered technique inventory; order defines probability-vector layout."""

    def __init__(self, names):
        names = tuple(names)
        if not names:
            raise ValueError("technique set must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("technique set contains duplicates")
        self.names = names
        self._index = {name: i for i, name in enumerate(names)}

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name):
        return name in self._index

    def __eq__(self, other):
        return isinstance(other, TechniqueSet) and self.names == other.names

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown technique {name!r}") from None

    @classmethod
    def from_file(cls, path) -> TechniqueSet:
        names = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    names.append(line)
        return cls(names)

    @classmethod
    def default(cls) -> TechniqueSet:
        text = resources.files("propkit.data").joinpath("techniques.txt").read_text("utf-8")
        return cls(line.strip() for line in text.splitlines() if line.strip())


def _id_sort_key(article_id: str):
    # numeric ids sort numerically, anything else lexicographically after them
    return (0, int(article_id), "") if article_id.isdigit() else (1, 0, article_id)


def load_articles(directory) -> list[Article]:
    """Read every ``article<ID>.txt`` file in ``directory``, sorted by id."""
    directory = Path(directory)
    articles = {}
    for path in sorted(directory.iterdir()):
        match = _ARTICLE_FILE.fullmatch(path.name)
        if not match:
            continue
        article_id = match.group(1)
        if article_id in articles:
            raise FormatError(f"duplicate article id {article_id!r} in {directory}")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read article file {path}: {exc}") from exc
        articles[article_id] = Article(id=article_id, text=text)
    return sorted(articles.values(), key=lambda a: _id_sort_key(a.id))


def article_index(articles) -> dict[str, Article]:
    if isinstance(articles, dict):
        return articles
    return {a.id: a for a in articles}


def _parse_offset(field: str, path, lineno) -> int:
    try:
        return int(field)
    except ValueError:
        raise FormatError.at(path, lineno, f"non-integer offset {field!r}") from None


def _split_row(line: str, n_fields: int, path, lineno) -> list[str]:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != n_fields:
        raise FormatError.at(
            path, lineno, f"expected {n_fields} tab-separated fields, got {len(fields)}"
        )
    return fields


def _check_row_span(articles: dict, article_id: str, start: int, end: int, path, lineno) -> CharSpan:
    if article_id not in articles:
        raise FormatError.at(path, lineno, f"unknown article id {article_id!r}")
    if start < 0 or end <= start:
        raise FormatError.at(path, lineno, f"invalid span ({start}, {end})")
    text_len = len(articles[article_id].text)
    if end > text_len:
        raise FormatError.at(
            path, lineno, f"span ({start}, {end}) exceeds article length {text_len}"
        )
    return CharSpan(start, end)


def load_si_labels(path, articles) -> dict[str, list[CharSpan]]:
    """Read span-identification labels: ``article_id \\t start \\t end`` rows."""
    articles = article_index(articles)
    spans: dict[str, list[CharSpan]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line == "\n" and lineno > 1:
                raise FormatError.at(path, lineno, "blank line")
            article_id, start_s, end_s = _split_row(line, 3, path, lineno)
            start = _parse_offset(start_s, path, lineno)
            end = _parse_offset(end_s, path, lineno)
            span = _check_row_span(articles, article_id, start, end, path, lineno)
            spans.setdefault(article_id, []).append(span)
    for lst in spans.values():
        lst.sort(key=lambda s: (s.start, s.end))
    return spans


def write_si_labels(path, spans_by_article: dict[str, list[CharSpan]]):
    with open(path, "w", encoding="utf-8") as fh:
        for article_id in sorted(spans_by_article, key=_id_sort_key):
            for span in sorted(spans_by_article[article_id], key=lambda s: (s.start, s.end)):
                fh.write(f"{article_id}\t{span.start}\t{span.end}\n")


def load_tc_rows(path, articles, with_labels: bool, techniques: TechniqueSet | None = None) -> list[TcRow]:
    """Read technique-classification rows, preserving file order and duplicates.

    Rows are ``article_id \\t technique \\t start \\t end``; the technique
    column holds ``?`` for unlabeled test rows. When ``with_labels`` is set,
    technique names are validated against ``techniques``.
    """
    if with_labels and techniques is None:
        raise ValueError("techniques required when with_labels is set")
    articles = article_index(articles)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line == "\n":
                raise FormatError.at(path, lineno, "blank line breaks row alignment")
            article_id, technique, start_s, end_s = _split_row(line, 4, path, lineno)
            start = _parse_offset(start_s, path, lineno)
            end = _parse_offset(end_s, path, lineno)
            span = _check_row_span(articles, article_id, start, end, path, lineno)
            if with_labels and technique not in techniques:
                raise FormatError.at(path, lineno, f"unknown technique {technique!r}")
            rows.append(TcRow(ordinal=len(rows), article_id=article_id, technique=technique, span=span))
    return rows


def write_tc_rows(path, rows: list[TcRow]):
    """Write TC rows in ordinal order (line-aligned with the source file)."""
    ordered = sorted(rows, key=lambda r: r.ordinal)
    if [r.ordinal for r in ordered] != list(range(len(ordered))):
        raise ValueError("row ordinals must be a gap-free 0..N-1 sequence")
    with open(path, "w", encoding="utf-8") as fh:
        for row in ordered:
            fh.write(f"{row.article_id}\t{row.technique}\t{row.span.start}\t{row.span.end}\n")


def multiplicity_groups(rows: list[TcRow]) -> dict[tuple[str, int, int], list[TcRow]]:
    """Group rows by ``(article_id, start, end)``; group size = multiplicity."""
    groups: dict[tuple[str, int, int], list[TcRow]] = {}
    for row in rows:
        groups.setdefault((row.article_id, row.span.start, row.span.end), []).append(row)
    return groups


def tokenize(text: str) -> list[Token]:
    """Split text into offset-exact tokens.

    Maximal runs of alphanumeric characters form one token each; every other
    non-whitespace character is its own single-character token.
    """
    return [
        Token(text=m.group(), span=CharSpan(m.start(), m.end()))
        for m in _TOKEN.finditer(text)
    ]


def merge_overlapping(spans) -> list[CharSpan]:
    """Coalesce spans with non-empty intersection; touching spans stay apart."""
    merged: list[list[int]] = []
    for span in sorted(spans, key=lambda s: (s.start, s.end)):
        if merged and span.start < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], span.end)
        else:
            merged.append([span.start, span.end])
    return [CharSpan(a, b) for a, b in merged]


def encode_bio(tokens: list[Token], spans) -> list[int]:
    """Convert character spans to per-token BIO tags.

    Input spans are first unioned into disjoint intervals (gold spans may
    nest or overlap). A token counts as inside if its interval intersects a
    merged span; the first token of each inside run gets B-PROP. Two disjoint
    spans that share a straddling token collapse into one run, matching the
    decode side's token-boundary snapping.
    """
    tags = [O_TAG] * len(tokens)
    if not tokens:
        return tags
    starts = [t.span.start for t in tokens]
    ends = [t.span.end for t in tokens]
    ranges = []
    for span in merge_overlapping(spans):
        first = bisect_right(ends, span.start)
        last = bisect_left(starts, span.end) - 1
        if first <= last:
            ranges.append((first, last))
    ranges.sort()
    coalesced: list[list[int]] = []
    for first, last in ranges:
        if coalesced and first <= coalesced[-1][1]:
            coalesced[-1][1] = max(coalesced[-1][1], last)
        else:
            coalesced.append([first, last])
    for first, last in coalesced:
        tags[first] = B_TAG
        for i in range(first + 1, last + 1):
            tags[i] = I_TAG
    return tags


def decode_bio(tokens: list[Token], tags) -> list[CharSpan]:
    """Convert BIO tags back to character spans.

    Decoding is lenient: an I-PROP with no open run starts a new span, so any
    tag sequence decodes without error.
    """
    if len(tags) != len(tokens):
        raise ValueError(f"{len(tags)} tags for {len(tokens)} tokens")
    spans = []
    run_start = None
    for i, tag in enumerate(tags):
        if tag == B_TAG or (tag == I_TAG and run_start is None):
            if run_start is not None:
                spans.append(CharSpan(tokens[run_start].span.start, tokens[i - 1].span.end))
            run_start = i
        elif tag == O_TAG and run_start is not None:
            spans.append(CharSpan(tokens[run_start].span.start, tokens[i - 1].span.end))
            run_start = None
    if run_start is not None:
        spans.append(CharSpan(tokens[run_start].span.start, tokens[-1].span.end))
    return spans


def split_train_dev(articles: list[Article], fraction: float, seed: int):
    """Deterministic whole-article split; held-out size = round(fraction * N)."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if len(articles) < 2:
        raise ValueError("need at least 2 articles to split")
    order = sorted(articles, key=lambda a: _id_sort_key(a.id))
    random.Random(seed).shuffle(order)
    n_held = round(fraction * len(order))
    held = sorted(order[:n_held], key=lambda a: _id_sort_key(a.id))
    train = sorted(order[n_held:], key=lambda a: _id_sort_key(a.id))
    return train, held
