"""LLM provider gateway: dispatch, raw-response capture, regeneration.

Providers implement ``complete(bundle, scenario=None) -> str``. Live HTTP
adapters are selected by ``ProviderConfig.kind``; offline work uses the
scripted, fixture and echo stubs.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .errors import MinebenchError, MissingCredential, ParseError, ProviderError
from .metrics import MetricsReport, grade
from .model import PolicySet, Scenario
from .prompts import PromptBundle, PromptStrategy, build_prompt, expected_semantics
from .serialization import emit_rules, scan_rule_lines

log = logging.getLogger(__name__)

__all__ = [
    "ProviderConfig",
    "MiningAttempt",
    "AttemptStore",
    "ScriptedProvider",
    "FixtureProvider",
    "EchoProvider",
    "HttpChatProvider",
    "GeminiProvider",
    "make_provider",
    "mine_once",
    "is_anomalous",
    "mine_with_regeneration",
    "ANOMALY_THRESHOLD",
]

ANOMALY_THRESHOLD = Fraction(9, 10)  # exact: float 0.9 is slightly above 9/10


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for one provider.

    ``credential`` names the environment variable holding the key (default
    ``MINEBENCH_<PROVIDER_ID>_KEY``); the secret itself is read at call time
    and never stored or logged. ``options`` (temperature etc.) are passed
    through to the wire request untouched.
    """

    provider_id: str
    model_name: str = ""
    endpoint: str = ""
    credential: str = ""
    timeout: float = 120.0
    max_output_tokens: int = 8192
    kind: str = "openai-chat"
    min_interval: float = 0.0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    @property
    def credential_env(self) -> str:
        if self.credential:
            return self.credential
        slug = "".join(ch if ch.isalnum() else "_" for ch in self.provider_id.upper())
        return f"MINEBENCH_{slug}_KEY"

    def secret(self) -> str:
        value = os.environ.get(self.credential_env)
        if not value:
            raise MissingCredential(f"set {self.credential_env} to use provider {self.provider_id!r}")
        return value


@dataclass(frozen=True)
class MiningAttempt:
    scenario_id: str
    strategy: str
    provider: str
    raw_response: str
    policy: Optional[PolicySet] = None
    failure: Optional[str] = None
    metrics: Optional[MetricsReport] = None
    timestamp: str = ""
    attempt_index: int = 1
    skipped_lines: int = 0

    @property
    def failed(self) -> bool:
        return self.metrics is None

    @property
    def size(self) -> Optional[int]:
        return None if self.policy is None else len(self.policy)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "strategy": self.strategy,
            "provider": self.provider,
            "attempt_index": self.attempt_index,
            "timestamp": self.timestamp,
            "failed": self.failed,
            "failure": self.failure,
            "skipped_lines": self.skipped_lines,
            "rules": emit_rules(self.policy).splitlines() if self.policy is not None else None,
            "metrics": self.metrics.to_dict() if self.metrics is not None else None,
        }


def _now() -> str:
    # honour SOURCE_DATE_EPOCH so offline runs can produce identical records
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return ts.isoformat(timespec="seconds")


class AttemptStore:
    """Append-only attempt persistence: ``<stem>.txt`` raw, ``<stem>.json`` record."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _stem(self, scenario_id, strategy, provider, index):
        base = f"{scenario_id}__{strategy}__{provider}__a{index}".replace("/", "_")
        stem, n = base, 0
        while (self.directory / f"{stem}.txt").exists():
            n += 1
            stem = f"{base}-r{n}"
        return stem

    def save_raw(self, scenario_id, strategy, provider, index, raw: str) -> str:
        with self._lock:
            stem = self._stem(scenario_id, strategy, provider, index)
            with open(self.directory / f"{stem}.txt", "x", encoding="utf-8", newline="\n") as fh:
                fh.write(raw)
        return stem

    def save_attempt(self, stem: str, attempt: MiningAttempt):
        with open(self.directory / f"{stem}.json", "x", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(attempt.to_dict(), indent=2, sort_keys=True) + "\n")


# -- providers --------------------------------------------------------------


class ScriptedProvider:
    """Returns canned responses in order; an ``Exception`` entry is raised instead."""

    def __init__(self, responses, provider_id="scripted"):
        self.responses = list(responses)
        self.config = ProviderConfig(provider_id, kind="scripted")
        self.calls = 0
        self.prompts = []

    def complete(self, bundle: PromptBundle, scenario=None) -> str:
        self.prompts.append(bundle)
        if self.calls >= len(self.responses):
            raise ProviderError("scripted provider ran out of responses")
        item = self.responses[self.calls]
        self.calls += 1
        if isinstance(item, BaseException):
            raise item
        if callable(item):
            return item(bundle, scenario)
        return item


class EchoProvider:
    """Answers with the scenario's own ground-truth rules."""

    def __init__(self, provider_id="echo"):
        self.config = ProviderConfig(provider_id, kind="echo")
        self.calls = 0

    def complete(self, bundle: PromptBundle, scenario=None) -> str:
        if scenario is None:
            raise ProviderError("echo provider needs the scenario")
        self.calls += 1
        return emit_rules(scenario.ground_truth)


class FixtureProvider:
    """Replays recorded responses from ``<dir>/<scenario_id>__<strategy>[__a<n>].txt``.

    Attempt-specific files win; otherwise the same response is replayed for
    every attempt.
    """

    def __init__(self, directory, provider_id="fixture"):
        self.directory = Path(directory)
        self.config = ProviderConfig(provider_id, endpoint=str(directory), kind="fixture")
        self.calls = 0
        self._seen = {}
        self._lock = threading.Lock()

    def complete(self, bundle: PromptBundle, scenario=None) -> str:
        sid = scenario.scenario_id if scenario is not None else ""
        key = (sid, bundle.strategy.value)
        with self._lock:
            self.calls += 1
            n = self._seen[key] = self._seen.get(key, 0) + 1
        for name in (f"{sid}__{bundle.strategy.value}__a{n}.txt", f"{sid}__{bundle.strategy.value}.txt"):
            path = self.directory / name
            if path.exists():
                return path.read_text(encoding="utf-8")
        raise ProviderError(f"no fixture for {sid!r}/{bundle.strategy.value} in {self.directory}")


class _HttpProvider:
    def __init__(self, config: ProviderConfig, transport=None):
        import httpx

        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._lock = threading.Lock()
        self._last = 0.0
        self.calls = 0

    def _throttle(self):
        if self.config.min_interval <= 0:
            return
        with self._lock:
            wait = self._last + self.config.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()

    def complete(self, bundle: PromptBundle, scenario=None) -> str:
        import httpx

        self._throttle()
        self.calls += 1
        url, headers, body = self._request(bundle)
        log.info("POST %s model=%s options=%s", url.split("?")[0], self.config.model_name, self.config.options)
        try:
            resp = self._client.post(url, headers=headers, json=body)
            resp.raise_for_status()
            return self._extract(resp.json())
        except httpx.HTTPError as exc:
            raise ProviderError(f"{self.config.provider_id}: {type(exc).__name__}: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"{self.config.provider_id}: unexpected response shape") from exc


class HttpChatProvider(_HttpProvider):
    """OpenAI-style ``/chat/completions`` endpoint."""

    def _request(self, bundle):
        headers = {"Authorization": f"Bearer {self.config.secret()}"}
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": bundle.as_single_text()}],
            "max_tokens": self.config.max_output_tokens,
            **self.config.options,
        }
        return self.config.endpoint, headers, body

    def _extract(self, doc):
        return doc["choices"][0]["message"]["content"]


class GeminiProvider(_HttpProvider):
    """Google ``models/<model>:generateContent`` endpoint."""

    def _request(self, bundle):
        base = self.config.endpoint or "https://generativelanguage.googleapis.com/v1beta"
        url = f"{base.rstrip('/')}/models/{self.config.model_name}:generateContent"
        headers = {"x-goog-api-key": self.config.secret()}
        body = {
            "contents": [{"role": "user", "parts": [{"text": bundle.as_single_text()}]}],
            "generationConfig": {"maxOutputTokens": self.config.max_output_tokens, **self.config.options},
        }
        return url, headers, body

    def _extract(self, doc):
        parts = doc["candidates"][0]["content"]["parts"]
        return "".join(p.get("text", "") for p in parts)


def make_provider(config: ProviderConfig, offline: bool = False, transport=None):
    kind = config.kind
    if kind == "echo":
        return EchoProvider(config.provider_id)
    if kind == "fixture":
        return FixtureProvider(config.endpoint, config.provider_id)
    if offline:
        raise ProviderError(f"provider {config.provider_id!r} ({kind}) needs the network but --offline is set")
    if kind == "openai-chat":
        return HttpChatProvider(config, transport)
    if kind == "gemini":
        return GeminiProvider(config, transport)
    raise ValueError(f"unknown provider kind {kind!r}")


# -- mining protocol --------------------------------------------------------


def _call(provider, bundle, scenario):
    # a missing key is a configuration error, not a data outcome
    try:
        return provider.complete(bundle, scenario), None
    except MissingCredential:
        raise
    except ProviderError as first:
        log.warning("provider call failed (%s); retrying once", first)
        try:
            return provider.complete(bundle, scenario), None
        except MissingCredential:
            raise
        except ProviderError as second:
            return None, str(second)


def mine_once(
    scenario: Scenario,
    strategy,
    provider,
    attempt_index: int = 1,
    store: Optional[AttemptStore] = None,
    clock: Callable[[], str] = _now,
) -> MiningAttempt:
    """One prompt -> response -> parse -> grade round.

    Parse and grading problems produce a failed attempt (the ``*`` outcome)
    rather than an exception.
    """
    strategy = PromptStrategy(strategy)
    pid = provider.config.provider_id
    sid = scenario.scenario_id
    bundle = build_prompt(strategy, scenario)
    raw, cause = _call(provider, bundle, scenario)
    base = dict(scenario_id=sid, strategy=strategy.value, provider=pid, timestamp=clock(), attempt_index=attempt_index)

    stem = store.save_raw(sid, strategy.value, pid, attempt_index, raw or "") if store else None
    if raw is None:
        attempt = MiningAttempt(raw_response="", failure=f"transport: {cause}", **base)
    else:
        attempt = _grade_response(scenario, strategy, raw, base)
    if store:
        store.save_attempt(stem, attempt)
    return attempt


def _grade_response(scenario, strategy, raw, base) -> MiningAttempt:
    try:
        scan = scan_rule_lines(raw)
    except ParseError as exc:
        return MiningAttempt(raw_response=raw, failure=f"parse: {exc}", **base)
    try:
        report = grade(scenario, scan.policy, expected_semantics(strategy))
    except MinebenchError as exc:
        return MiningAttempt(
            raw_response=raw,
            policy=scan.policy,
            failure=f"grade: {type(exc).__name__}: {exc}",
            skipped_lines=scan.n_skipped,
            **base,
        )
    return MiningAttempt(raw_response=raw, policy=scan.policy, metrics=report, skipped_lines=scan.n_skipped, **base)


def is_anomalous(attempt: MiningAttempt, scenario: Scenario) -> bool:
    if attempt.failed:
        return True
    m = attempt.metrics
    if m.accuracy < ANOMALY_THRESHOLD or m.precision < ANOMALY_THRESHOLD:
        return True
    # one rule per permit cell is the trivial, non-generalizing answer
    return len(attempt.policy) == scenario.acm.ones


def _rank(attempt: MiningAttempt):
    if attempt.failed:
        return (0,)
    m = attempt.metrics
    return (1, m.f1, m.accuracy, -len(attempt.policy))


def mine_with_regeneration(scenario, strategy, provider, store=None, clock=_now) -> MiningAttempt:
    """Run once; if the result is anomalous, run exactly once more and keep the better.

    "Better" orders by F1, then accuracy, then smaller policy; the first
    attempt wins ties.
    """
    first = mine_once(scenario, strategy, provider, 1, store, clock)
    if not is_anomalous(first, scenario):
        return first
    second = mine_once(scenario, strategy, provider, 2, store, clock)
    return second if _rank(second) > _rank(first) else first
