"""Seeded synthetic question corpus with planted tag keywords.

Each post mentions keywords of its own tags in prose, surrounded by filler
words, and carries a ``<code>`` block quoting keywords of some other tag.
The code block is a decoy that only a working code stripper ignores.
"""

from __future__ import annotations

import os
import random

__all__ = ["TAG_KEYWORDS", "FILLER", "make_corpus", "write_corpus"]

TAG_KEYWORDS: dict[str, tuple[str, ...]] = {
    "python": ("interpreter", "indentation", "virtualenv"),
    "java": ("classpath", "bytecode", "jvm"),
    "android": ("activity", "emulator", "apk"),
    "javascript": ("browser", "callback", "dom"),
    "sql": ("query", "join", "schema"),
    "linux": ("kernel", "shell", "filesystem"),
    "git": ("commit", "rebase", "branch"),
    "css": ("stylesheet", "selector", "layout"),
    "c++": ("template", "pointer", "destructor"),
    "networking": ("socket", "router", "packet"),
    "regex": ("pattern", "capture", "lookahead"),
    "security": ("encryption", "certificate", "password"),
}

FILLER: tuple[str, ...] = tuple("""
problem trying figure working output result error message understand simple
example question answer solution approach different value number string list
function method variable object instance parameter return call wrong correct
expected behaviour behavior strange issue change update version install setup
project file folder directory path config option setting default custom test
case input user data record item element field line text word name type size
length count index order sort filter search find match replace remove delete
create build compile deploy server client request response time date format
convert parse read write load save open close start stop run execute process
thread memory performance speed slow fast large small simple complex easy hard
""".split())


def _post(rng: random.Random, post_id: int, tags: list[str], all_tags: list[str]) -> tuple[str, str]:
    words = [rng.choice(FILLER) for _ in range(rng.randint(10, 20))]
    for tag in tags:
        for _ in range(rng.randint(2, 3)):
            words.insert(rng.randrange(len(words) + 1), rng.choice(TAG_KEYWORDS[tag]))
    split = rng.randint(3, len(words) - 3)
    first, second = " ".join(words[:split]), " ".join(words[split:])
    others = [t for t in all_tags if t not in tags]
    decoy = " ".join(rng.choice(TAG_KEYWORDS[rng.choice(others)]) for _ in range(3))
    title_words = [rng.choice(FILLER), rng.choice(TAG_KEYWORDS[tags[0]]), rng.choice(FILLER)]
    title = " ".join(title_words).capitalize() + "?"
    body = (
        f"<p>{first} &amp; more.</p>"
        f"<pre><code>{decoy}(x) &lt; 10</code></pre>"
        f"<p>{second} <em>thanks</em></p>"
    )
    return title, body


def make_corpus(n_posts: int = 500, n_tags: int = 10, seed: int = 0) -> tuple[list[str], list[str]]:
    """Return (post lines, tag lines) in the ``lines`` dump format."""
    if not 2 <= n_tags <= len(TAG_KEYWORDS):
        raise ValueError(f"n_tags must lie in [2, {len(TAG_KEYWORDS)}]")
    rng = random.Random(seed)
    all_tags = list(TAG_KEYWORDS)[:n_tags]
    posts, tag_lines = [], []
    for post_id in range(1, n_posts + 1):
        n_labels = rng.choices((1, 2, 3), weights=(0.6, 0.3, 0.1))[0]
        tags = rng.sample(all_tags, n_labels)
        title, body = _post(rng, post_id, tags, all_tags)
        posts.append(f"{post_id}\t{title}\t{body}")
        tag_lines.append(f"{post_id}\t{','.join(tags)}")
    return posts, tag_lines


def write_corpus(directory: str, n_posts: int = 500, n_tags: int = 10, seed: int = 0) -> tuple[str, str]:
    """Write ``posts.tsv`` and ``tags.tsv`` into ``directory``; return their paths."""
    os.makedirs(directory, exist_ok=True)
    posts, tags = make_corpus(n_posts, n_tags, seed)
    posts_path = os.path.join(directory, "posts.tsv")
    tags_path = os.path.join(directory, "tags.tsv")
    with open(posts_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(posts) + "\n")
    with open(tags_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(tags) + "\n")
    return posts_path, tags_path
