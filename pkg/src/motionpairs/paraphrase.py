"""Verb-variation paraphrasing through a text-completion endpoint.

The endpoint is anything with a ``model_id`` and ``complete(prompt) -> str``.
Two HTTP adapters (chat-style and raw completion) and a deterministic offline
rewriter are provided. Every paraphrase is screened against the template
caption's slots before it is accepted.
"""

from __future__ import annotations

import configparser
import logging
import os
import re
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from .captions import MotionCaption, parse_caption
from .errors import ConfigError, GatewayError

log = logging.getLogger(__name__)

PREAMBLE = (
    "A chat between a curious user and an artificial intelligence assistant. "
    "The assistant gives helpful, detailed, and polite answers to the user's questions."
)
USER_TURN = "Rephrase this video caption using verbs related to {object} to describe the motion: {caption}"

OPPOSITE = {"upwards": "downwards", "downwards": "upwards", "left": "right", "right": "left"}
_TOKEN_RE = re.compile(r"[a-z]+(?:-[a-z]+)*|[,.;:!?]")
_STOP = {"and", "while", "moves", "then", "before", "after", "as", "but", ",", ".", ";"}


@dataclass(frozen=True)
class PromptTemplate:
    system_preamble: str = PREAMBLE
    user_turn: str = USER_TURN

    def render(self, object_name: str, caption: str) -> str:
        if not object_name or not caption:
            raise ValueError("object name and caption must be non-empty")
        # str.replace, not format: captions may contain braces
        user = self.user_turn.replace("{object}", object_name).replace("{caption}", caption)
        return "\n".join([self.system_preamble, "USER: Hello!", "ASSISTANT: Hi!</s>", f"USER: {user}", "ASSISTANT:"])


def render_prompt(object_name: str, caption: str) -> str:
    return PromptTemplate().render(object_name, caption)


class Lexicon:
    """Direction / rotation / object word classes read from an INI asset."""

    def __init__(self, parser: configparser.ConfigParser):
        def entries(section, key):
            return [w.strip() for w in parser.get(section, key, fallback="").split(",") if w.strip()]

        self.direction = {d: set(entries("direction", d)) for d in ("upwards", "downwards", "left", "right")}
        self.rotation = {d: set(entries("rotation", d)) for d in ("left", "right")}
        self.rotation_verbs = set(entries("rotation_verbs", "words"))
        self.position_preps = set(entries("position", "prepositions"))
        self.position_words = set(entries("position", "words"))
        self.object_synonyms = {k: entries("objects", k) for k in parser.options("objects")} if parser.has_section("objects") else {}
        self.offline = {
            sec: {k: entries(sec, k) for k in parser.options(sec)}
            for sec in ("offline.direction", "offline.modifiers", "offline.rotation", "offline.connectives")
            if parser.has_section(sec)
        }

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Lexicon":
        parser = configparser.ConfigParser(inline_comment_prefixes=None)
        if path is None:
            parser.read_string(resources.files("motionpairs").joinpath("data/lexicon.ini").read_text("utf-8"))
        else:
            parser.read(path, encoding="utf-8")
        return cls(parser)


_DEFAULT_LEXICON: Lexicon | None = None


def default_lexicon() -> Lexicon:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = Lexicon.load()
    return _DEFAULT_LEXICON


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = ""

    def __str__(self) -> str:
        return "accepted" if self.accepted else f"rejected({self.reason})"


ACCEPTED = Verdict(True)


@dataclass(frozen=True)
class Mentions:
    directions: frozenset
    rotations: frozenset


def find_mentions(text: str, lexicon: Lexicon) -> Mentions:
    """Translation and rotation direction classes mentioned in free text.

    Position phrases ("in the top left") and rotation phrases ("turning
    slightly clockwise") are consumed first so their left/right words are
    not read as translation directions.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    used = [False] * len(tokens)
    rotations = set()
    for i, tok in enumerate(tokens):
        if tok in lexicon.position_preps and i + 1 < len(tokens) and tokens[i + 1] == "the":
            j = i + 2
            while j < len(tokens) and j < i + 4 and tokens[j] in lexicon.position_words:
                used[j] = True
                j += 1
        if tok in lexicon.rotation_verbs:
            for j in range(i + 1, min(i + 5, len(tokens))):
                if tokens[j] in _STOP:
                    break
                for d, words in lexicon.rotation.items():
                    if tokens[j] in words and not used[j]:
                        rotations.add(d)
                        used[j] = True
    directions = set()
    for tok, u in zip(tokens, used):
        if u:
            continue
        for d, words in lexicon.direction.items():
            if tok in words:
                directions.add(d)
    return Mentions(frozenset(directions), frozenset(rotations))


def _mentions_object(text: str, name: str, lexicon: Lexicon) -> bool:
    lowered = " ".join(_TOKEN_RE.findall(text.lower()))
    for cand in [name.lower(), *lexicon.object_synonyms.get(name.lower(), [])]:
        if re.search(rf"\b{re.escape(cand)}(?:s|es)?\b", lowered):
            return True
    return False


def screen_consistency(original: MotionCaption, paraphrase: str, lexicon: Lexicon | None = None) -> Verdict:
    """Reject paraphrases that drop the object or contradict a motion fact."""
    lexicon = lexicon or default_lexicon()
    if not paraphrase.strip():
        return Verdict(False, "empty")
    slots = original.slots
    if not _mentions_object(paraphrase, slots.object, lexicon):
        return Verdict(False, "object-missing")
    said = find_mentions(paraphrase, lexicon)
    wanted = {s.direction for s in slots.segments if s.direction}
    for d in sorted(wanted):
        if OPPOSITE[d] in said.directions and OPPOSITE[d] not in wanted:
            return Verdict(False, "direction-contradiction")
    for d in sorted(wanted):
        if d not in said.directions:
            return Verdict(False, "direction-missing")
    turns = {s.rot_direction for s in slots.segments if s.rot_direction}
    if said.rotations - turns:
        return Verdict(False, "rotation-contradiction")
    return ACCEPTED


# offline rewriter ---------------------------------------------------------

_TRANSLATE_RE = re.compile(
    r"\bmoves((?: (?:quickly|slowly|diagonally|upwards|downwards|left|right|a lot|a little))+)"
)
_ROTATE_RE = re.compile(r"\bwhile rotating (left|right)(?: (slightly|significantly))?")
_MOD_RE = re.compile(r"quickly|slowly|diagonally|upwards|downwards|left|right|a lot|a little")


class OfflineParaphraser:
    """Deterministic synonym rewrites, used when no LLM endpoint is available."""

    model_id = "offline-synonym-v1"

    def __init__(self, lexicon: Lexicon | None = None):
        self.lexicon = lexicon or default_lexicon()

    def _pick(self, options: Sequence[str], key: str) -> str:
        return options[zlib.crc32(key.encode("utf-8")) % len(options)]

    def rewrite(self, caption: str) -> str:
        off = self.lexicon.offline
        mods = off["offline.modifiers"]
        counter = [0]

        def key(tag):
            counter[0] += 1
            return f"{caption}|{tag}|{counter[0]}"

        def translate(m):
            words = _MOD_RE.findall(m[1])
            direction = next(w for w in words if w in OPPOSITE)
            parts = [self._pick(off["offline.direction"][direction], key("dir"))]
            for w in ("quickly", "slowly", "diagonally", "a lot", "a little"):
                if w in words:
                    parts.append(self._pick(mods[w], key(w)))
            return " ".join(parts)

        def rotate(m):
            parts = ["while turning"]
            if m[2]:
                parts.append(self._pick(mods[m[2]], key(m[2])))
            parts.append(self._pick(off["offline.rotation"][m[1]], key("rot")))
            return " ".join(parts)

        out = _TRANSLATE_RE.sub(translate, caption)
        out = _ROTATE_RE.sub(rotate, out)
        conn = off["offline.connectives"]
        out = out.replace(", before it ", f", {self._pick(conn['before it'], key('then'))} ")
        out = re.sub(r"\bpauses\b", lambda _: self._pick(conn["pauses"], key("pause")), out)
        return out

    def complete(self, prompt: str) -> str:
        marker = "to describe the motion: "
        line = next((ln for ln in prompt.splitlines() if marker in ln), prompt)
        caption = line.split(marker, 1)[-1].strip()
        return self.rewrite(caption)


# HTTP adapters ------------------------------------------------------------

class CompletionEndpoint(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


class TransientError(Exception):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


@dataclass
class HttpEndpoint:
    """Text completion over HTTP.

    ``style="chat"`` posts OpenAI-style ``messages`` and reads
    ``choices[0].message.content``; ``style="completion"`` posts the raw
    prompt and reads ``choices[0].text``.
    """

    url: str
    model: str = "vicuna-13b-v1.5"
    headers: dict = field(default_factory=dict)
    style: str = "chat"
    max_tokens: int = 96
    temperature: float = 0.7
    timeout: float = 60.0
    client: httpx.Client | None = None

    @property
    def model_id(self) -> str:
        return self.model

    def _payload(self, prompt: str) -> dict:
        body = {"model": self.model, "max_tokens": self.max_tokens, "temperature": self.temperature}
        if self.style == "completion":
            body["prompt"] = prompt
            body["stop"] = ["</s>", "\nUSER:"]
            return body
        if self.style != "chat":
            raise ConfigError(f"unknown endpoint style {self.style!r}")
        lines = prompt.splitlines()
        system, turns = lines[0], lines[1:]
        messages = [{"role": "system", "content": system}]
        for ln in turns:
            role, _, content = ln.partition(": ")
            content = content.replace("</s>", "").strip()
            if role == "USER":
                messages.append({"role": "user", "content": content})
            elif role.startswith("ASSISTANT") and content:
                messages.append({"role": "assistant", "content": content})
        body["messages"] = messages
        return body

    def complete(self, prompt: str) -> str:
        client = self.client or httpx.Client(timeout=self.timeout)
        try:
            resp = client.post(self.url, json=self._payload(prompt), headers=self.headers)
        except httpx.TransportError as e:
            raise TransientError(f"transport error: {e}") from e
        finally:
            if self.client is None:
                client.close()
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}", resp.status_code)
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
        choice = resp.json()["choices"][0]
        if self.style == "completion":
            return choice.get("text") or ""
        return (choice.get("message") or {}).get("content") or ""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 0.5
    max_delay: float = 8.0

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * 2 ** attempt)


@dataclass(frozen=True)
class ParaphraseResult:
    text: str
    verdict: Verdict
    model_id: str
    latency_ms: float

    @property
    def accepted(self) -> bool:
        return self.verdict.accepted


def _after_assistant(text: str) -> str:
    i = text.rfind("ASSISTANT:")
    if i >= 0:
        text = text[i + len("ASSISTANT:"):]
    return text.replace("</s>", "").strip()


def paraphrase(caption: MotionCaption, endpoint: CompletionEndpoint, retry: RetryPolicy = RetryPolicy(),
               lexicon: Lexicon | None = None, template: PromptTemplate = PromptTemplate(),
               sleep: Callable[[float], None] = time.sleep) -> ParaphraseResult:
    prompt = template.render(caption.slots.object, caption.rendered)
    start = time.perf_counter()
    last_status = None
    for attempt in range(retry.max_attempts):
        try:
            raw = endpoint.complete(prompt)
            break
        except TransientError as e:
            last_status = e.status
            if attempt + 1 == retry.max_attempts:
                raise GatewayError(f"gave up after {retry.max_attempts} attempts: {e}", last_status) from e
            wait = retry.delay(attempt)
            log.warning("paraphrase attempt %d failed (%s); retrying in %.1fs", attempt + 1, e, wait)
            sleep(wait)
    text = _after_assistant(raw)
    verdict = screen_consistency(caption, text, lexicon) if text else Verdict(False, "empty")
    return ParaphraseResult(text, verdict, endpoint.model_id, (time.perf_counter() - start) * 1000)


def paraphrase_batch(captions: Sequence[MotionCaption], endpoint: CompletionEndpoint, max_in_flight: int = 4,
                     **kwargs) -> list[ParaphraseResult]:
    """Paraphrase many captions with at most ``max_in_flight`` concurrent requests; order is kept."""
    if max_in_flight <= 1:
        return [paraphrase(c, endpoint, **kwargs) for c in captions]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda c: paraphrase(c, endpoint, **kwargs), captions))


# configuration ------------------------------------------------------------

ENV_PREFIX = "MOTIONPAIRS_PARAPHRASE_"


@dataclass(frozen=True)
class ParaphraseConfig:
    mode: str = "off"  # off | offline | online
    url: str = ""
    api_key: str = ""
    auth_header: str = "Authorization"
    model: str = "vicuna-13b-v1.5"
    style: str = "chat"
    max_tokens: int = 96
    temperature: float = 0.7
    max_attempts: int = 5
    base_delay: float = 0.5
    concurrency: int = 4
    strict: bool = False  # drop rejected samples instead of falling back to the template caption

    @classmethod
    def from_dict(cls, d: dict | None = None, environ: dict | None = None) -> "ParaphraseConfig":
        """Build from a config mapping; ``MOTIONPAIRS_PARAPHRASE_<FIELD>`` env vars win."""
        values = dict(d or {})
        environ = os.environ if environ is None else environ
        types = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(types)
        if unknown:
            raise ConfigError(f"unknown paraphrase settings: {sorted(unknown)}")
        for name in types:
            raw = environ.get(ENV_PREFIX + name.upper())
            if raw is None:
                continue
            default = getattr(cls, name)
            if isinstance(default, bool):
                values[name] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                values[name] = type(default)(raw)
        cfg = cls(**values)
        if cfg.mode not in ("off", "offline", "online"):
            raise ConfigError(f"paraphrase mode must be off, offline or online, got {cfg.mode!r}")
        if cfg.mode == "online" and not cfg.url:
            raise ConfigError("online paraphrasing needs a url")
        return cfg

    def to_public_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.pop("api_key")
        return d

    def endpoint(self, client: httpx.Client | None = None) -> CompletionEndpoint | None:
        if self.mode == "off":
            return None
        if self.mode == "offline":
            return OfflineParaphraser()
        headers = {}
        if self.api_key:
            value = self.api_key if self.auth_header.lower() != "authorization" else f"Bearer {self.api_key}"
            headers[self.auth_header] = value
        return HttpEndpoint(self.url, self.model, headers, self.style, self.max_tokens, self.temperature, client=client)

    @property
    def retry(self) -> RetryPolicy:
        return RetryPolicy(self.max_attempts, self.base_delay)


def caption_from_text(text: str, num_segments: int | None = None) -> MotionCaption:
    """Wrap a rendered template caption so it can be paraphrased or screened."""
    return MotionCaption(text, parse_caption(text, num_segments))
