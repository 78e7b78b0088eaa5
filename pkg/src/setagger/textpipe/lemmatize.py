"""Rule based lemmatizer: an exception table followed by inflection rules.

It only undoes regular plural, past and progressive inflections. Irregular
forms have to come from the exception table.
"""

from __future__ import annotations

from importlib import resources
from typing import Mapping

_VOWELS = frozenset("aeiou")
_SIBILANT_ES = ("sses", "xes", "zes", "ches", "shes")
_ADD_E_ENDINGS = ("iz", "bl", "us", "uc", "v", "c")


def load_exceptions(path: str | None = None) -> dict[str, str]:
    """Read a ``form<TAB>lemma`` table; ``#`` lines are comments."""
    if path is None:
        text = resources.files("setagger.data").joinpath("lemma_exceptions.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        form, lemma = line.split("\t")
        table[form.strip()] = lemma.strip()
    return table


DEFAULT_EXCEPTIONS = load_exceptions()


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _short_cvc(stem: str) -> bool:
    # consonant-vowel-consonant ending with a single vowel group (hop, tap)
    if len(stem) < 3 or stem[-1] in "wxy":
        return False
    n = len(stem)
    if not (_is_cons(stem, n - 1) and not _is_cons(stem, n - 2) and _is_cons(stem, n - 3)):
        return False
    groups = 0
    prev_vowel = False
    for i in range(n):
        vowel = not _is_cons(stem, i)
        if vowel and not prev_vowel:
            groups += 1
        prev_vowel = vowel
    return groups == 1


def _restore(stem: str) -> str:
    """Undo spelling changes made when a verb suffix was attached."""
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_cons(stem, len(stem) - 1) and stem[-1] not in "lsz":
        return stem[:-1]
    if stem.endswith(_ADD_E_ENDINGS) or _short_cvc(stem):
        return stem + "e"
    if stem.endswith("at") and len(stem) > 3 and _is_cons(stem, len(stem) - 3):
        return stem + "e"
    return stem


def lemmatize(token: str, exceptions: Mapping[str, str] = DEFAULT_EXCEPTIONS) -> str:
    if token in exceptions:
        return exceptions[token]
    if not token.isalpha():
        return token
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) > 3:
        if token.endswith(_SIBILANT_ES):
            return token[:-2]
        return token[:-1]
    if token.endswith("s") and len(token) > 3 and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    if token.endswith("ied") and len(token) > 4:
        return token[:-3] + "y"
    for suffix in ("ed", "ing"):
        if token.endswith(suffix):
            stem = token[: -len(suffix)]
            if len(stem) >= 2 and _has_vowel(stem):
                if suffix == "ed" and stem.endswith("e"):
                    return stem + "e"  # agreed, freed
                return _restore(stem)
            return token
    return token
