"""Prompt templates and prompt assembly.

Templates live in ``templates/<strategy-file>.txt`` inside the package, or in
the directory named by ``MINEBENCH_PROMPT_DIR``. Leading ``#`` comment lines
are stripped before use. Built-in templates are checksum-pinned so an edited
resource fails loudly instead of silently changing every run.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

from .engine import Semantics
from .errors import IncompatibleInputMethod, TemplateChecksumMismatch
from .serialization import InputMethod, render_access_data, render_acl_input, render_acm_input

log = logging.getLogger(__name__)

__all__ = [
    "PromptStrategy",
    "PromptBundle",
    "build_prompt",
    "expected_semantics",
    "load_template",
    "extract_dataset",
    "DATASET_DELIMITER",
    "PROMPT_DIR_ENV",
]

PROMPT_DIR_ENV = "MINEBENCH_PROMPT_DIR"
DATASET_DELIMITER = "DATASET:"
BUILTIN_DIR = Path(__file__).with_name("templates")


class PromptStrategy(str, Enum):
    PROMPT1 = "prompt1"
    PROMPT2_ZERO_SHOT = "prompt2"
    PROMPT3_EXAMPLES = "prompt3"
    CHAIN_OF_THOUGHT = "cot"
    NO_0_TO_1 = "no0to1"
    DENY_ALLOWED = "deny-allowed"
    ACM_PROMPT = "acm"
    ACL_PROMPT = "acl"

    @property
    def template_file(self) -> str:
        return _FILES[self]

    @property
    def input_method(self) -> InputMethod:
        if self is PromptStrategy.ACM_PROMPT:
            return InputMethod.ACM_PLUS_ATTRIBUTES
        if self is PromptStrategy.ACL_PROMPT:
            return InputMethod.ACL_PLUS_ATTRIBUTES
        return InputMethod.ACCESS_DATA


_FILES = {
    PromptStrategy.PROMPT1: "prompt1.txt",
    PromptStrategy.PROMPT2_ZERO_SHOT: "prompt2_zero_shot.txt",
    PromptStrategy.PROMPT3_EXAMPLES: "prompt3_examples.txt",
    PromptStrategy.CHAIN_OF_THOUGHT: "chain_of_thought.txt",
    PromptStrategy.NO_0_TO_1: "no_0_to_1.txt",
    PromptStrategy.DENY_ALLOWED: "deny_allowed.txt",
    PromptStrategy.ACM_PROMPT: "acm_prompt.txt",
    PromptStrategy.ACL_PROMPT: "acl_prompt.txt",
}

# sha256 of the built-in template files (header comment included)
CHECKSUMS = {
    "prompt1.txt": "66644192c926209385ce5557d966cf5f8f706d55ed00969d7f8dcfa94eb3a242",
    "prompt2_zero_shot.txt": "f614a2f79c35fef0904163e3c7eb881d987e1aa8b0537dfad2771a99dc40289f",
    "prompt3_examples.txt": "b25f9fd951c4fba96a17fead1baca86ec73601d3192a00ddd917cef91485e3e7",
    "chain_of_thought.txt": "94eede0d4dec5909813a954e9cb145f0dc2c02c3574933b753f92a3165a1639e",
    "no_0_to_1.txt": "db998615bdee1dd742e0416a5264e229d67e77b7a312121d4cde27a921b3e791",
    "deny_allowed.txt": "dc2031bc15f607c1226318801a03c0be7fad557d475c702ac95c743faf20344b",
    "acm_prompt.txt": "ab662efb8accd78c312f5f4b70cb83ed935063c162f7fc7cefd681309e76d90e",
    "acl_prompt.txt": "022c44ea2b8619660a8c6011c459f24eb6040d46decc461b24a326050c48df81",
}


def template_dir() -> Path:
    override = os.environ.get(PROMPT_DIR_ENV)
    return Path(override) if override else BUILTIN_DIR


def _strip_header(raw: str) -> str:
    lines = raw.splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        i += 1
    return "".join(lines[i:])


@lru_cache(maxsize=None)
def _read(path: str, pinned: bool) -> str:
    data = Path(path).read_bytes()
    if pinned:
        digest = hashlib.sha256(data).hexdigest()
        want = CHECKSUMS[Path(path).name]
        if digest != want:
            raise TemplateChecksumMismatch(f"{Path(path).name}: sha256 {digest} != pinned {want}")
    return _strip_header(data.decode("utf-8"))


def load_template(strategy) -> str:
    strategy = PromptStrategy(strategy)
    root = template_dir()
    pinned = root.resolve() == BUILTIN_DIR.resolve()
    if not pinned:
        log.info("using unpinned prompt templates from %s", root)
    return _read(str(root / strategy.template_file), pinned)


@dataclass(frozen=True)
class PromptBundle:
    strategy: PromptStrategy
    input_method: InputMethod
    text: str
    attachments: dict = field(default_factory=dict)

    def as_single_text(self) -> str:
        """Text with attachments inlined, for providers without file support."""
        if not self.attachments:
            return self.text
        parts = [self.text]
        for name, body in self.attachments.items():
            parts.append(f"\n{name}:\n{body}")
        return "".join(parts)


def build_prompt(strategy, scenario, input_method=None) -> PromptBundle:
    strategy = PromptStrategy(strategy)
    method = strategy.input_method if input_method is None else InputMethod(input_method)
    if method is not strategy.input_method:
        raise IncompatibleInputMethod(f"{strategy.value} expects {strategy.input_method.value} input, got {method.value}")
    template = load_template(strategy)
    if method is InputMethod.ACCESS_DATA:
        text = f"{template}\n{DATASET_DELIMITER}\n{render_access_data(scenario)}"
        return PromptBundle(strategy, method, text)
    if method is InputMethod.ACM_PLUS_ATTRIBUTES:
        matrix, attrs = render_acm_input(scenario)
        files = {"output.json": attrs, "ACM.txt": matrix}
    else:
        matrix, attrs = render_acl_input(scenario)
        files = {"output.json": attrs, "ACL.txt": matrix}
    return PromptBundle(strategy, method, template, files)


def extract_dataset(prompt_text: str) -> str:
    """Return the access-data block appended after the dataset delimiter."""
    marker = f"\n{DATASET_DELIMITER}\n"
    idx = prompt_text.rfind(marker)
    if idx < 0:
        raise ValueError("prompt has no dataset section")
    return prompt_text[idx + len(marker) :]


def expected_semantics(strategy) -> Semantics:
    if PromptStrategy(strategy) is PromptStrategy.DENY_ALLOWED:
        return Semantics.DENY_OVERRIDES
    return Semantics.PERMIT_ONLY
