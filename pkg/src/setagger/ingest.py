"""Read StackExchange dumps into posts, strip markup, and pick the tag set.

Two input formats are understood:

``xml``
    The ``Posts.xml`` file of a StackExchange data dump, one ``<row .../>``
    element per post.
``lines``
    A tab separated ``id<TAB>title<TAB>body`` file plus a sidecar
    ``id<TAB>tag1,tag2`` file carrying the tags.
"""

from __future__ import annotations

import io
import logging
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import BinaryIO, Iterable, Iterator

logger = logging.getLogger(__name__)

FORMATS = ("xml", "lines")

_TAG_RE = re.compile(r"<([^<>]+)>")
_WS_RE = re.compile(r"\s+")
_MARKUP_LIKE_RE = re.compile(r"<(?=[A-Za-z/!])")


class IngestError(ValueError):
    """Raised for unusable input (strict parse failures, too few tags)."""


@dataclass(frozen=True)
class RecordError:
    """A single row that could not be turned into a post."""

    line: int
    message: str


@dataclass(frozen=True)
class RawPost:
    id: int
    title: str
    body_html: str
    tags: tuple[str, ...]


@dataclass(frozen=True)
class CleanPost:
    id: int
    text: str
    tags: tuple[str, ...]


@dataclass(frozen=True)
class LabelCatalog:
    labels: tuple[str, ...]
    counts: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)


def _normalize_tags(tags: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for tag in tags:
        tag = tag.strip().lower()
        if tag and "<" not in tag and ">" not in tag:
            seen.setdefault(tag, None)
    return tuple(seen)


def decode_tag_attribute(value: str) -> tuple[str, ...]:
    """``"<java><android>"`` (entity-decoded dump attribute) -> tag tuple."""
    return _normalize_tags(_TAG_RE.findall(value))


def _text_lines(stream: BinaryIO) -> Iterator[str]:
    wrapper = io.TextIOWrapper(stream, encoding="utf-8", errors="replace", newline=None)
    try:
        yield from wrapper
    finally:
        # Leave the caller's stream open (it may already be closed when an
        # abandoned generator is finalized late).
        try:
            wrapper.detach()
        except ValueError:
            pass


def _iter_xml_rows(stream: BinaryIO) -> Iterator[tuple[int, str]]:
    # Dumps carry one row per line; tolerate rows that wrap across lines.
    buf: list[str] = []
    start = 0
    for lineno, raw in enumerate(_text_lines(stream), 1):
        line = raw.strip()
        if not buf:
            if not line.startswith("<row"):
                continue
            start = lineno
        buf.append(line)
        if line.endswith("/>") or line.endswith("</row>"):
            yield start, " ".join(buf)
            buf = []
    if buf:
        yield start, " ".join(buf)


def _parse_xml(stream: BinaryIO, strict: bool, errors: list[RecordError]) -> list[RawPost]:
    posts = []
    for lineno, text in _iter_xml_rows(stream):
        try:
            elem = ET.fromstring(text)
        except ET.ParseError as exc:
            _record(errors, strict, lineno, f"malformed row: {exc}")
            continue
        attrs = elem.attrib
        if attrs.get("PostTypeId") != "1" or "Tags" not in attrs:
            continue
        try:
            post_id = int(attrs["Id"])
        except (KeyError, ValueError):
            _record(errors, strict, lineno, "row has no valid Id")
            continue
        tags = decode_tag_attribute(attrs["Tags"])
        if not tags:
            continue
        posts.append(RawPost(post_id, attrs.get("Title", ""), attrs.get("Body", ""), tags))
    return posts


def read_tag_sidecar(stream: BinaryIO) -> dict[int, tuple[str, ...]]:
    tags = {}
    for lineno, raw in enumerate(_text_lines(stream), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        ident, _, tag_field = line.partition("\t")
        try:
            tags[int(ident)] = _normalize_tags(tag_field.split(","))
        except ValueError:
            raise IngestError(f"tag sidecar line {lineno}: invalid id {ident!r}") from None
    return tags


def _parse_lines(
    stream: BinaryIO,
    tag_map: dict[int, tuple[str, ...]],
    strict: bool,
    errors: list[RecordError],
) -> list[RawPost]:
    posts = []
    for lineno, raw in enumerate(_text_lines(stream), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t", 2)
        if len(fields) != 3:
            _record(errors, strict, lineno, f"expected 3 tab-separated fields, got {len(fields)}")
            continue
        try:
            post_id = int(fields[0])
        except ValueError:
            _record(errors, strict, lineno, f"invalid id {fields[0]!r}")
            continue
        tags = tag_map.get(post_id, ())
        if tags:
            posts.append(RawPost(post_id, fields[1], fields[2], tags))
    return posts


def _record(errors: list[RecordError], strict: bool, line: int, message: str) -> None:
    if strict:
        raise IngestError(f"line {line}: {message}")
    logger.warning("skipping line %d: %s", line, message)
    errors.append(RecordError(line, message))


def parse_posts(
    dump_stream: BinaryIO,
    format: str = "xml",
    *,
    tags_stream: BinaryIO | None = None,
    strict: bool = False,
    errors: list[RecordError] | None = None,
) -> list[RawPost]:
    """Parse question posts from a dump stream, preserving input order.

    Only questions (``PostTypeId="1"``) carrying tags are returned. Rows that
    cannot be parsed are appended to ``errors`` (when given) and skipped, or
    raise :class:`IngestError` when ``strict`` is set.
    """
    if errors is None:
        errors = []
    if format == "xml":
        posts = _parse_xml(dump_stream, strict, errors)
    elif format == "lines":
        if tags_stream is None:
            raise IngestError("the 'lines' format needs a tag sidecar stream")
        posts = _parse_lines(dump_stream, read_tag_sidecar(tags_stream), strict, errors)
    else:
        raise IngestError(f"unknown dump format {format!r}; expected one of {FORMATS}")
    seen = set()
    unique = []
    for post in posts:
        if post.id in seen:
            _record(errors, strict, 0, f"duplicate post id {post.id}")
            continue
        seen.add(post.id)
        unique.append(post)
    return unique


class _TextExtractor(HTMLParser):
    _DROP = frozenset({"code", "pre"})

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.drop_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._DROP:
            self.drop_depth += 1
        self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in self._DROP and self.drop_depth:
            self.drop_depth -= 1
        self.parts.append(" ")

    def handle_data(self, data):
        if not self.drop_depth:
            self.parts.append(data)


def html_to_text(html: str) -> str:
    """Visible text of an HTML fragment with code/pre content removed."""
    parser = _TextExtractor()
    parser.feed(html)
    parser.close()
    return _tidy("".join(parser.parts))


def _tidy(text: str) -> str:
    # Decoded entities such as "&lt;div&gt;" must not read as markup again.
    text = _MARKUP_LIKE_RE.sub("< ", text)
    return _WS_RE.sub(" ", text).strip()


def strip_html_code(post: RawPost) -> CleanPost:
    title = _tidy(post.title)
    body = html_to_text(post.body_html)
    text = f"{title} {body}".strip()
    return CleanPost(post.id, text, post.tags)


def select_labels(posts: list[CleanPost], k: int) -> tuple[LabelCatalog, list[CleanPost]]:
    """Keep the ``k`` most frequent tags and the posts that carry one of them.

    Ties in frequency are broken by ascending tag string.
    """
    if k < 1:
        raise IngestError(f"k must be >= 1, got {k}")
    if not posts:
        raise IngestError("cannot select labels from an empty corpus")
    counts = Counter(tag for post in posts for tag in set(post.tags))
    if len(counts) < k:
        raise IngestError(
            f"corpus has only {len(counts)} distinct tags, {k - len(counts)} short of k={k}"
        )
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:k]
    catalog = LabelCatalog(tuple(t for t, _ in ranked), tuple(c for _, c in ranked))
    keep = set(catalog.labels)
    selected = []
    for post in posts:
        tags = tuple(t for t in post.tags if t in keep)
        if tags:
            selected.append(CleanPost(post.id, post.text, tags))
    return catalog, selected


def load_corpus(
    path: str,
    format: str = "xml",
    *,
    tags_path: str | None = None,
    strict: bool = False,
    errors: list[RecordError] | None = None,
) -> list[CleanPost]:
    """Parse and clean every question post in a dump file."""
    with open(path, "rb") as fh:
        if format == "lines":
            if tags_path is None:
                raise IngestError("the 'lines' format needs --tags")
            with open(tags_path, "rb") as tags_fh:
                raw = parse_posts(fh, format, tags_stream=tags_fh, strict=strict, errors=errors)
        else:
            raw = parse_posts(fh, format, strict=strict, errors=errors)
    return [strip_html_code(post) for post in raw]


def write_clean_posts(posts: Iterable[CleanPost], fh) -> None:
    """``id<TAB>text<TAB>tag1,tag2`` per line."""
    for post in posts:
        fh.write(f"{post.id}\t{post.text}\t{','.join(post.tags)}\n")


def read_clean_posts(fh) -> list[CleanPost]:
    posts = []
    for lineno, line in enumerate(fh, 1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0].isdigit():
            raise IngestError(f"line {lineno}: expected 'id<TAB>text<TAB>tags'")
        ident, text, tags = parts
        posts.append(CleanPost(int(ident), text, tuple(t for t in tags.split(",") if t)))
    return posts


__all__ = [
    "CleanPost",
    "IngestError",
    "LabelCatalog",
    "RawPost",
    "RecordError",
    "decode_tag_attribute",
    "html_to_text",
    "load_corpus",
    "parse_posts",
    "read_clean_posts",
    "select_labels",
    "strip_html_code",
    "write_clean_posts",
]
