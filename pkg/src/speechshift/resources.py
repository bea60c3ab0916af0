"""Access to the word lists shipped inside the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources as _res

_DATA = "speechshift.data"

AUXILIARY_FILE = "auxiliary.json"
LIWC_FILE = "liwc_fr_mini.json"


def data_text(name: str) -> str:
    return _res.files(_DATA).joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def auxiliary() -> dict[str, list[str]]:
    return json.loads(data_text(AUXILIARY_FILE))


@lru_cache(maxsize=None)
def wordlists() -> dict[str, list[str]]:
    return json.loads(data_text("wordlists.json"))


@lru_cache(maxsize=None)
def wordset(name: str) -> frozenset[str]:
    return frozenset(wordlists()[name])


def function_words() -> frozenset[str]:
    return wordset("function_words")


@lru_cache(maxsize=None)
def french_frequent() -> frozenset[str]:
    words = set()
    for line in data_text("fr_frequent.txt").splitlines():
        if line.startswith("#"):
            continue
        words.update(w.lower() for w in line.split())
    return frozenset(words)
