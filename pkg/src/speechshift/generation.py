"""Persuasiveness rewrites through a pluggable chat-completion backend.

Prompts are rendered from editable templates; responses are parsed into a
score and a body text and checked (score present, enough text, French).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import string
import threading
import time
import urllib.error
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from . import resources
from .corpus import CorpusSample
from .errors import ConfigError, TemplateError
from .text_model import tokenize

log = logging.getLogger(__name__)

DIRECTIONS = ("upgrade", "downgrade")
VARIANT_OF = {"upgrade": "upgraded", "downgrade": "downgraded"}
REQUIRED_PLACEHOLDERS = frozenset(
    {"context_note", "persuasiveness_definition", "direction_instruction", "format_contract", "text"}
)

# Reconstructed wording; the original prompts are not reproduced here.
DEFAULT_CONTEXT = (
    "Le texte ci-dessous est la transcription d'une présentation orale du concours "
    "« Ma thèse en 180 secondes », où un doctorant présente son sujet de recherche "
    "à un public non spécialiste en trois minutes."
)
DEFAULT_DEFINITION = (
    "Un discours persuasif convainc l'auditoire, suscite son adhésion et lui donne envie "
    "d'en savoir plus ; il repose sur la clarté du message, l'engagement de l'orateur "
    "et la capacité à capter l'attention."
)
DIRECTION_INSTRUCTIONS = {
    "upgrade": (
        "Réécris cette transcription pour la rendre plus persuasive, "
        "en conservant le sujet, le contexte oral et la langue française."
    ),
    "downgrade": (
        "Réécris cette transcription pour la rendre moins persuasive, "
        "en conservant le sujet, le contexte oral et la langue française."
    ),
}
FORMAT_CONTRACT = (
    "Score : <nouvelle note de persuasion entre 1 et 5>\n"
    "Texte : <transcription modifiée>\n"
    "Explication : <brève justification des modifications>"
)
TEXT_START, TEXT_END = "<<<TEXTE>>>", "<<<FIN>>>"

MIN_BODY_WORDS = 50
FRENCH_TOP_K = 50
FRENCH_MIN_SHARE = 0.60


@dataclass(frozen=True)
class RewriteRequest:
    sample_id: str
    direction: str
    prompt_template_id: str = "mt180_v1"
    context_note: str = DEFAULT_CONTEXT
    persuasiveness_definition: str = DEFAULT_DEFINITION


@dataclass
class RewriteResult:
    sample_id: str
    direction: str
    new_text: str
    claimed_score: float | None
    raw_response: str
    latency_ms: int
    token_count: int
    valid: bool
    validation_failures: list[str] = field(default_factory=list)
    retries: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "direction": self.direction,
            "new_text": self.new_text,
            "claimed_score": self.claimed_score,
            "raw_response": self.raw_response,
            "latency_ms": self.latency_ms,
            "token_count": self.token_count,
            "valid": self.valid,
            "validation_failures": self.validation_failures,
            "retries": self.retries,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "RewriteResult":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


# --------------------------------------------------------------------------
# templates

_PLACEHOLDER_RE = re.compile(r"\$(?:(\$)|([_a-z][_a-z0-9]*)|{([_a-z][_a-z0-9]*)})", re.IGNORECASE)


def _identifiers(template: str) -> set[str]:
    return {m.group(2) or m.group(3) for m in _PLACEHOLDER_RE.finditer(template) if not m.group(1)}


def check_template(template: str) -> None:
    names = _identifiers(template)
    missing = REQUIRED_PLACEHOLDERS - names
    unknown = names - REQUIRED_PLACEHOLDERS
    if missing:
        raise TemplateError(f"template lacks placeholders: {', '.join(sorted(missing))}")
    if unknown:
        raise TemplateError(f"template has unknown placeholders: {', '.join(sorted(unknown))}")


def bundled_templates() -> dict[str, str]:
    return {"mt180_v1": resources.data_text("templates/mt180_v1.txt")}


def load_templates(directory: str | Path | None = None) -> dict[str, str]:
    """Bundled templates plus any ``*.txt`` files from ``directory`` (id = file stem)."""
    templates = bundled_templates()
    if directory is not None:
        for path in sorted(Path(directory).glob("*.txt")):
            templates[path.stem] = path.read_text(encoding="utf-8")
    return templates


def build_prompt(req: RewriteRequest, text: str, templates: Mapping[str, str] | None = None) -> str:
    templates = bundled_templates() if templates is None else templates
    if req.direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {req.direction!r}")
    try:
        template = templates[req.prompt_template_id]
    except KeyError:
        raise TemplateError(f"unknown template id {req.prompt_template_id!r}") from None
    check_template(template)
    return string.Template(template).substitute(
        context_note=req.context_note,
        persuasiveness_definition=req.persuasiveness_definition,
        direction_instruction=DIRECTION_INSTRUCTIONS[req.direction],
        format_contract=FORMAT_CONTRACT,
        text=text.strip(),
    )


# --------------------------------------------------------------------------
# response parsing

_NUMBER_RE = re.compile(r"\d+(?:[.,]\d+)?")
_LABEL_RE = re.compile(r"^[\s*#_>-]*(?P<label>[^\W\d_]+(?: [^\W\d_]+)?)[\s*_]*:\s*(?P<rest>.*)$")
_TEXT_LABELS = {"texte", "text", "texte modifié", "nouveau texte", "transcription", "transcription modifiée"}
_EXPLANATION_LABELS = {"explication", "explications", "explanation", "justification"}


@dataclass
class ParsedResponse:
    claimed_score: float | None
    new_text: str
    validation_failures: list[str]

    @property
    def valid(self) -> bool:
        return not self.validation_failures


def french_share(text: str, top_k: int = FRENCH_TOP_K) -> float:
    """Share of the ``top_k`` most frequent word types found in the French word list."""
    norms = [t.norm for t in tokenize(text) if t.is_word and not t.norm[0].isdigit()]
    if not norms:
        return 0.0
    counts = Counter(norms)
    first = {}
    for i, w in enumerate(norms):
        first.setdefault(w, i)
    top = sorted(counts, key=lambda w: (-counts[w], first[w]))[:top_k]
    vocab = resources.french_frequent()
    return sum(1 for w in top if w in vocab) / len(top)


def _label(line: str) -> tuple[str | None, str]:
    m = _LABEL_RE.match(line)
    if not m:
        return None, line
    return m.group("label").lower(), m.group("rest").lstrip("*_ ")


def parse_and_validate(raw_response: str) -> ParsedResponse:
    """Extract the claimed score and body; never raises."""
    failures: list[str] = []
    lines = raw_response.replace("\r\n", "\n").split("\n")
    score: float | None = None
    score_line = None
    for i, line in enumerate(lines):
        if "score" in line.lower():
            m = _NUMBER_RE.search(line[line.lower().index("score"):])
            if m:
                score = float(m.group(0).replace(",", "."))
                score_line = i
                break
    if score is None:
        failures.append("missing-score")
    elif not 1.0 <= score <= 5.0:
        failures.append("score-out-of-range")

    body_lines: list[str] = []
    labelled = any(_label(l)[0] in _TEXT_LABELS for l in lines)
    in_body = not labelled
    for i, line in enumerate(lines):
        if i == score_line:
            continue
        label, rest = _label(line)
        if label in _EXPLANATION_LABELS:
            in_body = False
            continue
        if label in _TEXT_LABELS:
            in_body = True
            if rest.strip():
                body_lines.append(rest)
            continue
        if in_body:
            body_lines.append(line)
    body = "\n".join(body_lines).strip()

    n_words = sum(1 for t in tokenize(body) if t.is_word)
    if n_words < MIN_BODY_WORDS:
        failures.append("missing-text")
    if n_words and french_share(body) < FRENCH_MIN_SHARE:
        failures.append("not-french")
    return ParsedResponse(score, body, failures)


# --------------------------------------------------------------------------
# backends


@dataclass
class Completion:
    text: str
    token_count: int = 0
    latency_ms: int | None = None  # backends that simulate timing report it here


class BackendError(RuntimeError):
    pass


class Backend(Protocol):
    name: str

    def complete(self, prompt: str, params: Mapping[str, object]) -> Completion: ...


class ChatCompletionBackend:
    """HTTP backend for OpenAI-style ``/chat/completions`` endpoints."""

    name = "chat"

    def __init__(self, endpoint: str, model: str, temperature: float = 1.0,
                 api_key_env: str = "OPENAI_API_KEY", timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, prompt: str, params: Mapping[str, object]) -> Completion:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendError(f"environment variable {self.api_key_env} is not set")
        body = json.dumps(
            {
                "model": params.get("model", self.model),
                "temperature": params.get("temperature", self.temperature),
                "messages": [{"role": "user", "content": prompt}],
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint,
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {key}"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise BackendError(str(exc)) from exc
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendError(f"unexpected response shape: {str(payload)[:200]}") from None
        usage = payload.get("usage") or {}
        return Completion(text, int(usage.get("total_tokens", 0)))


_FILLER_RE = re.compile(r"\b(?:euh|alors|bon|voilà|bref|enfin|quoi)\b\s*,?\s*", re.IGNORECASE)

_UPGRADE_QUESTIONS = (
    "Vous rendez-vous compte de ce que cette découverte change pour chacun d'entre nous ?",
    "Pourquoi attendre encore pour agir ensemble ?",
    "Comment ne pas être fier d'une telle avancée ?",
    "Et si demain cette idée transformait votre quotidien ?",
)
_UPGRADE_EXCLAMATIONS = (
    "Quel bonheur de voir une recherche porter de si beaux fruits !",
    "C'est une aventure formidable et passionnante !",
    "Imaginez la joie immense de tout un laboratoire !",
    "Ensemble, nous pouvons réussir ce pari magnifique !",
)
_DOWNGRADE_SENTENCES = (
    "Ce travail décrit une méthode précise appliquée à un échantillon limité.",
    "Les mesures suivent un protocole établi par des études antérieures.",
    "Plusieurs résultats intermédiaires restent à vérifier dans une phase ultérieure.",
    "La démarche repose sur des outils standard utilisés en laboratoire.",
)


class MockBackend:
    """Deterministic offline backend producing well-formed rewrites.

    Upgrades add questions, exclamations and positive vocabulary;
    downgrades neutralise sentence mood, drop emotion words and append
    matter-of-fact statements.  ``fail_first`` makes the first N calls for
    every prompt raise :class:`BackendError`.
    """

    name = "mock"

    def __init__(self, fail_first: int = 0, score_up: float = 4.5, score_down: float = 2.5):
        self.fail_first = fail_first
        self.score_up = score_up
        self.score_down = score_down
        self.calls: list[str] = []
        self._failures: Counter[str] = Counter()
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: Mapping[str, object]) -> Completion:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        with self._lock:
            self.calls.append(digest)
            if self._failures[digest] < self.fail_first:
                self._failures[digest] += 1
                raise BackendError("mock transient failure")
        text = prompt.split(TEXT_START, 1)[-1].split(TEXT_END, 1)[0].strip()
        seed = int(digest[:8], 16)
        if DIRECTION_INSTRUCTIONS["upgrade"] in prompt:
            body, score = self._upgrade(text, seed), self.score_up
            why = "Ajout de questions rhétoriques et d'un vocabulaire plus émotionnel."
        else:
            body, score = self._downgrade(text, seed), self.score_down
            why = "Ton plus neutre et phrases déclaratives."
        response = f"Score : {score}\nTexte : {body}\nExplication : {why}"
        tokens = len(prompt.split()) + len(response.split())
        return Completion(response, tokens, latency_ms=5 * tokens)

    @staticmethod
    def _tidy(text: str) -> str:
        text = re.sub(r"\s+", " ", text).strip()
        text = re.sub(r"\s+([,.])", r"\1", text)
        text = re.sub(r"([.!?…]\s+|^)([a-zà-ÿ])", lambda m: m.group(1) + m.group(2).upper(), text)
        return text

    def _upgrade(self, text: str, seed: int) -> str:
        text = _FILLER_RE.sub("", text)
        q = _UPGRADE_QUESTIONS
        e = _UPGRADE_EXCLAMATIONS
        opening = q[seed % len(q)] + " " + e[seed % len(e)]
        closing = q[(seed + 1) % len(q)] + " " + e[(seed + 2) % len(e)]
        return self._tidy(f"{opening} {text} {closing}")

    def _downgrade(self, text: str, seed: int) -> str:
        from .lexicon import default_lexicon, find_matches
        from .text_model import segment

        text = _FILLER_RE.sub("", text)
        doc = segment(text)
        lex = default_lexicon()
        drop = {(m.sentence, i) for cat in ("affect", "positive_emotion", "negative_emotion")
                for m in find_matches(doc, cat, lex) for i in range(m.start, m.end)}
        parts = []
        for k, sent in enumerate(doc.sentences):
            words = []
            for tok in sent.tokens:
                if (k, tok.index) in drop:
                    continue
                s = tok.surface
                if s in {"!", "?"} or s in {"!!", "?!", "!?"}:
                    s = "."
                words.append(s)
            parts.append(" ".join(words))
        body = " ".join(parts)
        body = re.sub(r"(\w['’]) ", r"\1", body)
        extra = _DOWNGRADE_SENTENCES
        tail = extra[seed % len(extra)] + " " + extra[(seed + 1) % len(extra)]
        return self._tidy(f"{body} {tail}")


def make_backend(name: str, **settings) -> Backend:
    if name == "mock":
        return MockBackend(**{k: v for k, v in settings.items() if k in {"fail_first"}})
    if name in {"chat", "openai"}:
        return ChatCompletionBackend(
            endpoint=settings.get("endpoint") or "https://api.openai.com/v1/chat/completions",
            model=settings.get("model") or "gpt-4o",
            temperature=float(settings.get("temperature", 1.0)),
            api_key_env=settings.get("api_key_env") or "OPENAI_API_KEY",
        )
    raise ConfigError(f"unknown backend {name!r}")


# --------------------------------------------------------------------------
# batch orchestration


def read_ledger(path: str | Path) -> dict[tuple[str, str], RewriteResult]:
    path = Path(path)
    done: dict[tuple[str, str], RewriteResult] = {}
    if not path.exists():
        return done
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            res = RewriteResult.from_json(json.loads(line))
        except (json.JSONDecodeError, TypeError, KeyError):
            log.warning("skipping unreadable ledger line in %s", path)
            continue
        done[(res.sample_id, res.direction)] = res
    return done


def _attempt(prompt: str, item: tuple[str, str], backend: Backend, params: Mapping[str, object],
             retries: int, backoff: float, sleep: Callable[[float], None]) -> RewriteResult:
    sample_id, direction = item
    last_error = ""
    for attempt in range(retries + 1):
        start = time.monotonic()
        try:
            completion = backend.complete(prompt, params)
        except BackendError as exc:
            last_error = str(exc)
            log.info("backend failure for %s/%s (attempt %d): %s", sample_id, direction, attempt + 1, exc)
            if attempt < retries:
                sleep(backoff * 2 ** attempt)
            continue
        latency = completion.latency_ms
        if latency is None:
            latency = int(round((time.monotonic() - start) * 1000))
        parsed = parse_and_validate(completion.text)
        return RewriteResult(
            sample_id, direction, parsed.new_text, parsed.claimed_score, completion.text,
            latency, completion.token_count, parsed.valid, parsed.validation_failures, attempt,
        )
    return RewriteResult(
        sample_id, direction, "", None, "", 0, 0, False, ["backend-error"], retries, last_error
    )


def run_batch(samples: Sequence[CorpusSample], directions: Iterable[str], backend: Backend,
              concurrency_limit: int = 4, retries: int = 3, ledger_path: str | Path | None = None,
              template_id: str = "mt180_v1", templates: Mapping[str, str] | None = None,
              params: Mapping[str, object] | None = None, backoff: float = 1.0,
              sleep: Callable[[float], None] = time.sleep) -> list[RewriteResult]:
    """One rewrite per (sample, direction), resumable through a JSON-Lines ledger.

    Items already in the ledger (other than backend failures) are not re-sent.
    """
    directions = list(directions)
    for d in directions:
        if d not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {d!r}")
    params = dict(params or {})
    items = [(s.id, d) for s in samples for d in directions]
    texts = {s.id: s.text for s in samples}
    done = read_ledger(ledger_path) if ledger_path else {}
    done = {k: v for k, v in done.items() if k in set(items) and v.error is None}
    todo = [it for it in items if it not in done]

    ledger = Path(ledger_path) if ledger_path else None
    if ledger is not None:
        ledger.parent.mkdir(parents=True, exist_ok=True)

    def append(res: RewriteResult) -> None:
        if ledger is None:
            return
        with ledger.open("a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(res.to_json(), ensure_ascii=False) + "\n")

    results = dict(done)
    prompts = {it: build_prompt(RewriteRequest(it[0], it[1], template_id), texts[it[0]], templates) for it in todo}
    pool = ThreadPoolExecutor(max_workers=max(1, concurrency_limit))
    try:
        futures = {
            pool.submit(_attempt, prompts[it], it, backend, params, retries, backoff, sleep): it for it in todo
        }
        for fut in as_completed(futures):
            res = fut.result()
            results[futures[fut]] = res
            append(res)  # single writer: only this thread touches the ledger
    finally:
        pool.shutdown(wait=True, cancel_futures=True)
        if ledger is not None and results:
            ordered = [results[it] for it in items if it in results]
            tmp = ledger.with_suffix(ledger.suffix + ".tmp")
            tmp.write_text(
                "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in ordered),
                encoding="utf-8",
            )
            tmp.replace(ledger)
    return [results[it] for it in items]


def results_to_samples(results: Iterable[RewriteResult], originals: Mapping[str, CorpusSample]) -> list[CorpusSample]:
    """Valid rewrites as corpus samples of the ``upgraded``/``downgraded`` variants."""
    out = []
    for res in results:
        if not res.valid:
            continue
        base = originals[res.sample_id]
        meta = dict(base.meta)
        meta["claimed_score"] = res.claimed_score
        out.append(CorpusSample(res.sample_id, VARIANT_OF[res.direction], res.new_text, [], False, meta))
    return out
