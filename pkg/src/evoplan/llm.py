"""Chat-completion-driven mutation: prompt assembly, diffs, pools, transports.

The mutator fills data-driven templates (system framing plus API reference
in the system role, the mutation or repair template in the user role),
samples one endpoint uniformly from the relevant pool, and applies the
SEARCH/REPLACE blocks of the response to the parent source.  All network
behavior goes through a transport object, so tests run entirely against a
recorded-response stub; credentials come from environment variables and
are scrubbed from every diagnostic that could reach logs or prompts.
"""

from __future__ import annotations

import os
import random
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .evolution import Individual, MutationFailure


class ConfigError(Exception):
    """The run configuration cannot be used as given."""


class AssemblyError(ValueError):
    """A template placeholder survived prompt assembly."""


class UnparseableResponse(ValueError):
    """The response contains no well-formed SEARCH/REPLACE block."""


class DiffApplyError(ValueError):
    """A SEARCH section matched the source zero or multiple times."""


class TransportError(RuntimeError):
    """The HTTP call failed or timed out; retriable."""


@dataclass(frozen=True)
class PoolMember:
    base_url: str
    model: str
    credential_env: str
    timeout_s: float = 300.0


@dataclass(frozen=True)
class ModelPool:
    generation: tuple[PoolMember, ...]
    repair: tuple[PoolMember, ...]

    def __post_init__(self):
        if not self.generation or not self.repair:
            raise ConfigError("generation and repair pools must both be nonempty")


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str


@dataclass(frozen=True)
class PromptTemplates:
    system_framing: str
    api_reference: str
    mutation_user: str
    history: str
    repair_user: str

    _FILES = {
        "system_framing": "system_framing.md",
        "api_reference": "api_reference.md",
        "mutation_user": "mutation_user.md",
        "history": "history.md",
        "repair_user": "repair_user.md",
    }

    @classmethod
    def load(cls, directory: str | Path) -> "PromptTemplates":
        directory = Path(directory)
        values = {}
        for attr, filename in cls._FILES.items():
            path = directory / filename
            if not path.exists():
                raise ConfigError(f"missing prompt template file: {path}")
            values[attr] = path.read_text(encoding="utf-8")
        return cls(**values)

    @classmethod
    def defaults(cls) -> "PromptTemplates":
        package = resources.files("evoplan") / "templates"
        return cls(
            **{
                attr: (package / filename).read_text(encoding="utf-8")
                for attr, filename in cls._FILES.items()
            }
        )


_PLACEHOLDER_PATTERN = re.compile(
    r"\{(fitness_score|feature_coords|improvement_areas|artifacts|evolution_history"
    r"|language|current_program|feature_dimensions|top_programs|error_message"
    r"|repair_context|broken_code)\}"
)

FEATURE_DIMENSIONS = "normalized evaluations (lower is better), evaluations per second (higher is better)"


def _check_filled(text: str):
    leftover = _PLACEHOLDER_PATTERN.search(text)
    if leftover:
        raise AssemblyError(f"unfilled placeholder {leftover.group(0)} in assembled prompt")


def _fill(template: str, values: dict[str, str]) -> str:
    result = template
    for key, value in values.items():
        result = result.replace("{" + key + "}", value)
    return result


def format_top_programs(inspirations: list[Individual], language: str = "python") -> str:
    if not inspirations:
        return "(the archive holds no other programs yet)"
    sections = []
    for rank, ind in enumerate(inspirations, 1):
        features = (
            f"({ind.features[0]:.4g}, {ind.features[1]:.4g})" if ind.features else "(unknown)"
        )
        sections.append(
            f"### Program {rank} (score {ind.score:.4f}, features {features})\n"
            f"```{language}\n{ind.genome}\n```"
        )
    return "\n\n".join(sections)


def improvement_areas(parent: Individual) -> str:
    if parent.features is None:
        return "overall fitness"
    areas = []
    if parent.features[0] > 1.0:
        areas.append("reduce the number of state evaluations (better guidance)")
    if parent.features[1] <= 0.0:
        areas.append("make the program solve tasks at all")
    else:
        areas.append("raise evaluations per second (cheaper per-state work)")
    return "; ".join(areas)


def assemble_generation_prompt(
    parent: Individual,
    inspirations: list[Individual],
    templates: PromptTemplates,
    language: str = "python",
    artifacts: str = "",
) -> PromptBundle:
    """Fill the mutation template; raises AssemblyError on leftover placeholders."""
    if not isinstance(parent.genome, str):
        raise ValueError("generation prompts need a source-text genome")
    history = _fill(
        templates.history, {"top_programs": format_top_programs(inspirations, language)}
    )
    user = _fill(
        templates.mutation_user,
        {
            "fitness_score": f"{parent.score:.6f}" if parent.score is not None else "unknown",
            "feature_coords": (
                f"({parent.features[0]:.6g}, {parent.features[1]:.6g})"
                if parent.features
                else "unknown"
            ),
            "improvement_areas": improvement_areas(parent),
            "artifacts": artifacts or "(no evaluation artifacts)",
            "evolution_history": history,
            "language": language,
            "current_program": parent.genome,
            "feature_dimensions": FEATURE_DIMENSIONS,
        },
    )
    system = templates.system_framing + "\n\n" + templates.api_reference
    _check_filled(user)
    return PromptBundle(system=system, user=user)


def assemble_repair_prompt(
    broken_source: str,
    error_message: str,
    templates: PromptTemplates,
    language: str = "python",
    repair_context: str = "",
) -> PromptBundle:
    user = _fill(
        templates.repair_user,
        {
            "error_message": error_message,
            "repair_context": repair_context or "(no additional context)",
            "broken_code": broken_source,
            "language": language,
        },
    )
    system = templates.system_framing + "\n\n" + templates.api_reference
    _check_filled(user)
    return PromptBundle(system=system, user=user)


_SEARCH_MARKER = "<<<<<<< SEARCH"
_DIVIDER_MARKER = "======="
_REPLACE_MARKER = ">>>>>>> REPLACE"


def extract_diff_blocks(response: str) -> list[tuple[str, str]]:
    """Scan for SEARCH/REPLACE blocks, ignoring everything outside them."""
    blocks = []
    state = "outside"
    search_lines: list[str] = []
    replace_lines: list[str] = []
    for line in response.splitlines():
        stripped = line.strip()
        if state == "outside":
            if stripped == _SEARCH_MARKER:
                state = "search"
                search_lines = []
        elif state == "search":
            if stripped == _DIVIDER_MARKER:
                state = "replace"
                replace_lines = []
            else:
                search_lines.append(line)
        elif state == "replace":
            if stripped == _REPLACE_MARKER:
                blocks.append(("\n".join(search_lines), "\n".join(replace_lines)))
                state = "outside"
            else:
                replace_lines.append(line)
    if not blocks:
        raise UnparseableResponse("response contains no SEARCH/REPLACE block")
    return blocks


def apply_search_replace_diff(source: str, response: str) -> str:
    """Apply each block in order against the progressively updated source."""
    blocks = extract_diff_blocks(response)
    for number, (search, replace) in enumerate(blocks, 1):
        if not search:
            raise DiffApplyError(f"block {number}: empty SEARCH section")
        occurrences = source.count(search)
        if occurrences == 0:
            raise DiffApplyError(f"block {number}: SEARCH text not found in source")
        if occurrences > 1:
            raise DiffApplyError(
                f"block {number}: SEARCH text is ambiguous ({occurrences} matches)"
            )
        source = source.replace(search, replace, 1)
    return source


class HttpxTransport:
    """Thin blocking POST over httpx; import deferred so tests stay offline."""

    def post(self, url: str, headers: dict, payload: dict, timeout: float) -> dict:
        import httpx

        try:
            response = httpx.post(url, headers=headers, json=payload, timeout=timeout)
            response.raise_for_status()
            return response.json()
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc


class StubTransport:
    """Recorded-response transport; safe for concurrent use by tests.

    Each queued entry is a response-body dict, a bare string (wrapped into
    a chat-completion body), or an exception instance to raise.
    """

    def __init__(self, responses=()):
        self._lock = threading.Lock()
        self._responses = list(responses)
        self.requests: list[dict] = []

    def queue(self, *responses):
        with self._lock:
            self._responses.extend(responses)

    def post(self, url: str, headers: dict, payload: dict, timeout: float) -> dict:
        with self._lock:
            self.requests.append(
                {"url": url, "headers": headers, "payload": payload, "timeout": timeout}
            )
            if not self._responses:
                raise TransportError("stub transport has no queued responses")
            entry = self._responses.pop(0)
        if isinstance(entry, Exception):
            raise entry
        if isinstance(entry, str):
            return {"choices": [{"message": {"content": entry}}]}
        return entry


class LlmMutator:
    """Mutator over source-text genomes backed by chat-completion endpoints.

    Credentials are resolved once at construction so a misconfigured run
    fails before any work happens.
    """

    def __init__(
        self,
        pools: ModelPool,
        templates: PromptTemplates | None = None,
        transport=None,
        rng: random.Random | None = None,
        max_transport_retries: int = 2,
        language: str = "python",
    ):
        self.pools = pools
        self.templates = templates or PromptTemplates.defaults()
        self.transport = transport or HttpxTransport()
        self.rng = rng or random.Random()
        self.max_transport_retries = max_transport_retries
        self.language = language
        self._secrets: dict[str, str] = {}
        for member in (*pools.generation, *pools.repair):
            value = os.environ.get(member.credential_env)
            if not value:
                raise ConfigError(
                    f"credential environment variable '{member.credential_env}' is not set"
                )
            self._secrets[member.credential_env] = value

    def _redact(self, text: str) -> str:
        for secret in self._secrets.values():
            text = text.replace(secret, "[redacted]")
        return text

    def _call(self, member: PoolMember, bundle: PromptBundle) -> str:
        url = member.base_url.rstrip("/") + "/chat/completions"
        headers = {
            "Authorization": f"Bearer {self._secrets[member.credential_env]}",
            "Content-Type": "application/json",
        }
        payload = {
            "model": member.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": bundle.user},
            ],
        }
        last_error = None
        for _ in range(self.max_transport_retries + 1):
            try:
                body = self.transport.post(url, headers, payload, member.timeout_s)
                break
            except TransportError as exc:
                last_error = exc
        else:
            raise MutationFailure(self._redact(f"transport failure: {last_error}"))
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MutationFailure(
                self._redact(f"malformed chat-completion response body: {body!r:.500}")
            ) from None

    def _mutate(self, pool: tuple[PoolMember, ...], bundle: PromptBundle, source: str) -> str:
        member = pool[self.rng.randrange(len(pool))]
        content = self._call(member, bundle)
        try:
            return apply_search_replace_diff(source, content)
        except (UnparseableResponse, DiffApplyError) as exc:
            raise MutationFailure(
                self._redact(f"{exc}; raw response starts: {content[:400]!r}")
            ) from exc

    def propose(self, parent: Individual, inspirations: list[Individual]) -> str:
        bundle = assemble_generation_prompt(
            parent, list(inspirations), self.templates, self.language
        )
        return self._mutate(self.pools.generation, bundle, parent.genome)

    def repair(self, genome: str, diagnostic: str) -> str:
        bundle = assemble_repair_prompt(
            genome, self._redact(diagnostic), self.templates, self.language
        )
        return self._mutate(self.pools.repair, bundle, genome)


def load_seed_source(name: str) -> str:
    """Bundled source-text seeds for source-genome runs: 'blind' or 'ff'."""
    if name not in ("blind", "ff"):
        raise ValueError(f"unknown seed source '{name}'")
    return (resources.files("evoplan") / "seeds" / f"{name}.py").read_text(encoding="utf-8")
