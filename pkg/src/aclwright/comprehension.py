"""Natural-language intent comprehension.

An operator sentence goes to a chat-completion backend together with a system
prompt that embeds a slice of the network mapping table; the backend answers
with a structured intermediate representation (IR).  Large mapping tables are
partitioned into slices that each fit the context budget, and endpoints not
found in one slice are retried against the next.  Backend output is parsed
leniently (first well-formed JSON object wins) and then validated strictly,
so a chatty model cannot smuggle in fabricated network facts.

Two backends are provided: an HTTP client for a chat-completions endpoint,
and a deterministic table-driven mock whose entity matching tolerates typos
up to edit distance 2.  The mock only ever consults the mapping-table slice
embedded in the system prompt it receives.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from .flowset import AppAtom, Rule
from .netmodel import Interface, IPv4Net, SNMT, parse_prefix
from .timealg import ALL_DAYS, ANY_TIME, TimeRange, WEEKDAYS, WEEKEND, _DAY_NAMES


class ComprehensionError(RuntimeError):
    pass


class MalformedOutputError(ComprehensionError):
    def __init__(self, raw: str):
        super().__init__(f"backend output is not a parseable IR: {raw[:200]!r}")
        self.raw = raw


class BackendError(ComprehensionError):
    """Transport-level backend failure; safe to retry."""


class RoundsExhaustedError(ComprehensionError):
    def __init__(self, rounds: int):
        super().__init__(
            f"feedback rounds exhausted after {rounds}; enter the IR manually")


def _load_services() -> Dict[str, List[AppAtom]]:
    raw = json.loads(resources.files("aclwright").joinpath("fixtures/apps.json")
                     .read_text())
    return {name: [(p, q) for p, q in pairs] for name, pairs in raw.items()}


# Protocol-port pairs the mock backend "knows" for common service names.
SERVICES: Dict[str, List[AppAtom]] = _load_services()

APP_ALIASES = {"web": "http", "ping": "icmp", "mail": "smtp",
               "remote desktop": "rdp", "name resolution": "dns"}


# ---------------------------------------------------------------------------
# IR

@dataclass
class Endpoint:
    name: str
    pairs: List[Tuple[Interface, IPv4Net]] = field(default_factory=list)
    unresolved: bool = False

    @property
    def is_any(self) -> bool:
        return not self.unresolved and not self.pairs and \
            self.name.strip().lower() in ("any", "anywhere", "all", "*")

    def prefixes(self) -> List[IPv4Net]:
        seen: List[IPv4Net] = []
        for _, p in self.pairs:
            if p not in seen:
                seen.append(p)
        return seen

    def to_json(self) -> dict:
        return {"name": self.name,
                "pairs": [{"gateway": str(g), "prefix": str(p)} for g, p in self.pairs],
                "unresolved": self.unresolved}

    @classmethod
    def from_json(cls, obj) -> "Endpoint":
        pairs = [(Interface.parse(p["gateway"]), parse_prefix(p["prefix"]))
                 for p in obj.get("pairs", [])]
        return cls(str(obj.get("name", "any")), pairs, bool(obj.get("unresolved")))

    @classmethod
    def any(cls) -> "Endpoint":
        return cls("any")


@dataclass
class AppField:
    name: str
    pairs: List[AppAtom] = field(default_factory=list)

    @property
    def is_any(self) -> bool:
        return not self.pairs

    def to_json(self) -> dict:
        return {"name": self.name,
                "pairs": [{"protocol": p, "port": q} for p, q in self.pairs]}

    @classmethod
    def from_json(cls, obj) -> "AppField":
        pairs = [(str(p["protocol"]).lower(), p.get("port")) for p in obj.get("pairs", [])]
        return cls(str(obj.get("name", "any")), pairs)

    @classmethod
    def any(cls) -> "AppField":
        return cls("any")


@dataclass
class IR:
    source: Endpoint
    destination: Endpoint
    application: AppField
    time: TimeRange
    action: str

    def to_json(self) -> dict:
        return {"source": self.source.to_json(),
                "destination": self.destination.to_json(),
                "application": self.application.to_json(),
                "time": self.time.to_json(),
                "action": self.action}

    @classmethod
    def from_json(cls, obj: dict) -> "IR":
        return cls(Endpoint.from_json(obj.get("source", {"name": "any"})),
                   Endpoint.from_json(obj.get("destination", {"name": "any"})),
                   AppField.from_json(obj.get("application", {"name": "any"})),
                   TimeRange.from_json(obj.get("time")),
                   str(obj.get("action", "permit")).lower())


@dataclass
class FeedbackRecord:
    intent_text: str
    prior_ir: IR
    feedback: str
    round: int


# ---------------------------------------------------------------------------
# Prompt assembly and SNMT slicing

@dataclass
class BackendConfig:
    endpoint: str = ""
    model: str = "default"
    key: str = ""
    context_budget: int = 8000  # tokens
    max_rounds: int = 3

    @classmethod
    def from_env(cls, **overrides) -> "BackendConfig":
        cfg = cls(endpoint=os.environ.get("ACLW_LLM_ENDPOINT", ""),
                  key=os.environ.get("ACLW_LLM_KEY", ""))
        return replace(cfg, **overrides)


@dataclass
class PromptBundle:
    sections: List[Tuple[str, str]]  # (section name, text), in fixed order

    @property
    def text(self) -> str:
        return "\n\n".join(body for _, body in self.sections)

    def token_estimate(self) -> int:
        return estimate_tokens(self.text)


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def _template(name: str) -> str:
    return resources.files("aclwright").joinpath(f"prompts/{name}.txt").read_text()


def _entity_line(name: str, pairs) -> str:
    return "ENTITY " + json.dumps(
        {"name": name,
         "pairs": [{"gateway": str(g), "prefix": str(p)} for g, p in pairs]},
        sort_keys=True)


def slice_snmt(snmt: SNMT, cfg: BackendConfig) -> List[List[str]]:
    """Partition entity names into slices whose rendered prompt fits the
    budget; estimates are conservative (90% of budget, chars/4 per token)."""
    if not snmt.entries:
        raise ComprehensionError("mapping table is empty")
    fixed = sum(estimate_tokens(_template(n))
                for n in ("task_overview", "chain_of_thought", "few_shot"))
    avail = int(cfg.context_budget * 0.9) - fixed
    if avail <= 0:
        raise ComprehensionError("context budget too small for fixed prompt sections")

    slices: List[List[str]] = []
    current: List[str] = []
    used = 0
    for name in snmt.entries:
        cost = estimate_tokens(_entity_line(name, snmt.entries[name]) + "\n")
        if cost > avail:
            raise ComprehensionError(
                f"entity {name!r} alone exceeds the context budget")
        if current and used + cost > avail:
            slices.append(current)
            current, used = [], 0
        current.append(name)
        used += cost
    slices.append(current)
    return slices


def assemble_system_prompt(snmt: SNMT, entity_names: Sequence[str],
                           cfg: BackendConfig) -> PromptBundle:
    """System prompt for one slice; section order is part of the contract."""
    table = "## Network mapping table\n" + "\n".join(
        _entity_line(n, snmt.entries[n]) for n in entity_names)
    bundle = PromptBundle([
        ("task-overview", _template("task_overview")),
        ("snmt-slice", table),
        ("chain-of-thought", _template("chain_of_thought")),
        ("few-shot", _template("few_shot")),
    ])
    if bundle.token_estimate() > cfg.context_budget:
        raise ComprehensionError("assembled prompt exceeds context budget")
    return bundle


# ---------------------------------------------------------------------------
# Backends

class HttpChatBackend:
    """Client for an HTTP chat-completions endpoint."""

    def __init__(self, cfg: BackendConfig):
        if not cfg.endpoint:
            raise BackendError("no backend endpoint configured (ACLW_LLM_ENDPOINT)")
        self.cfg = cfg

    def chat(self, messages: List[dict]) -> str:
        import httpx
        headers = {}
        if self.cfg.key:
            headers["Authorization"] = f"Bearer {self.cfg.key}"
        try:
            resp = httpx.post(self.cfg.endpoint, headers=headers, timeout=60.0,
                              json={"model": self.cfg.model, "messages": messages,
                                    "temperature": 0})
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as e:
            raise BackendError(f"backend request failed: {e}") from e


def edit_distance(a: str, b: str, cutoff: int = 3) -> int:
    if abs(len(a) - len(b)) > cutoff:
        return cutoff + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        if min(cur) > cutoff:
            return cutoff + 1
        prev = cur
    return prev[-1]


def _normalize(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip().lower())


_ANY_WORDS = {"any", "anywhere", "all", "everyone", "everywhere", "any destination",
              "all destinations", "any source", "the internet", "*"}

_ACTION_VERBS = [
    ("protect", ("protect", "preserve", "keep", "retain")),
    ("deny", ("block", "deny", "disallow", "prevent", "stop", "forbid", "drop",
              "disable", "ban")),
    ("permit", ("allow", "permit", "enable", "grant", "let", "open")),
]

_FROM_TO = re.compile(
    r"\bfrom\s+(?P<src>.+?)\s+to\s+(?P<dst>.+?)"
    r"(?=$|[,.;]|\s+(?:on|during|between|over|for|using|via|except|every)\b)",
    re.IGNORECASE | re.DOTALL)

_WINDOW = re.compile(r"between\s+(\d{4}-\d{2}-\d{2})\s+and\s+(\d{4}-\d{2}-\d{2})",
                     re.IGNORECASE)

_DAY_WORDS = {"monday": 0, "tuesday": 1, "wednesday": 2, "thursday": 3,
              "friday": 4, "saturday": 5, "sunday": 6}


class MockChatBackend:
    """Deterministic stand-in for a live model.

    Parses the mapping-table slice out of the system prompt (and nothing
    else), extracts endpoints, application, time, and action from the user
    text with simple rules, and answers with an IR embedded in some chatter.
    Entity names match fuzzily (edit distance at most 2) against slice names
    and any configured aliases.  `script` maps a substring of the user
    message to a queue of canned raw responses, consumed one per call, for
    driving feedback-loop tests.
    """

    def __init__(self, aliases: Optional[Dict[str, str]] = None,
                 script: Optional[Dict[str, List[str]]] = None):
        self.aliases = {_normalize(k): v for k, v in (aliases or {}).items()}
        self.script = {k: list(v) for k, v in (script or {}).items()}

    def chat(self, messages: List[dict]) -> str:
        system = next((m["content"] for m in messages if m["role"] == "system"), "")
        user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        for key, queue in self.script.items():
            if key in user and queue:
                return queue.pop(0)
        entities = self._slice_table(system)
        intent = user
        m = re.search(r"Original intent:\s*(.+)", user)
        if m:
            intent = m.group(1).splitlines()[0]
        ir = self._comprehend(intent, entities)
        return ("Here is the intermediate representation you asked for:\n"
                + json.dumps(ir, sort_keys=True) + "\nLet me know if anything is off.")

    @staticmethod
    def _slice_table(system: str) -> Dict[str, List[dict]]:
        out: Dict[str, List[dict]] = {}
        for line in system.splitlines():
            if line.startswith("ENTITY "):
                obj = json.loads(line[len("ENTITY "):])
                out[obj["name"]] = obj["pairs"]
        return out

    def _resolve(self, phrase: str, entities: Dict[str, List[dict]]) -> dict:
        norm = _normalize(re.sub(r"^(the|a|an)\s+", "", phrase.strip(), flags=re.I))
        norm = re.sub(r"\s*(traffic|servers?|hosts?)$", "", norm)
        if norm in _ANY_WORDS:
            return {"name": "any", "pairs": [], "unresolved": False}
        candidates: Dict[str, str] = {_normalize(n): n for n in entities}
        for alias, target in self.aliases.items():
            if target in entities:
                candidates.setdefault(alias, target)
        best: Optional[Tuple[int, str, str]] = None
        for key in sorted(candidates):
            dist = edit_distance(norm, key, cutoff=2)
            if dist <= 2 and (best is None or (dist, key) < best[:2]):
                best = (dist, key, candidates[key])
        if best is None:
            return {"name": phrase.strip(), "pairs": [], "unresolved": True}
        name = best[2]
        return {"name": name, "pairs": entities[name], "unresolved": False}

    def _comprehend(self, text: str, entities: Dict[str, List[dict]]) -> dict:
        src = {"name": "any", "pairs": [], "unresolved": False}
        dst = dict(src)
        m = _FROM_TO.search(text)
        if m:
            src = self._resolve(m.group("src"), entities)
            dst = self._resolve(m.group("dst"), entities)

        low = _normalize(text)
        app = {"name": "any", "pairs": []}
        hits = []
        for name in SERVICES:
            if re.search(rf"\b{re.escape(name)}\b", low):
                hits.append(name)
        for alias, target in APP_ALIASES.items():
            if re.search(rf"\b{re.escape(alias)}\b", low):
                hits.append(target)
        if hits:
            name = sorted(hits)[0]
            app = {"name": name,
                   "pairs": [{"protocol": p, "port": q} for p, q in SERVICES[name]]}

        time_obj = "any"
        days = []
        if "weekday" in low:
            days = [_DAY_NAMES[d] for d in range(5)]
        elif "weekend" in low:
            days = ["sat", "sun"]
        else:
            for word, idx in _DAY_WORDS.items():
                if re.search(rf"\b{word}s?\b", low):
                    days.append(_DAY_NAMES[idx])
        window = None
        wm = _WINDOW.search(text)
        if wm:
            window = [wm.group(1), wm.group(2)]
        if days or window:
            time_obj = {}
            if days:
                time_obj["days"] = days
            if window:
                time_obj["window"] = window

        action = "permit"
        for act, verbs in _ACTION_VERBS:
            if any(re.search(rf"\b{v}\b", low) for v in verbs):
                action = act
                break

        return {"source": src, "destination": dst, "application": app,
                "time": time_obj, "action": action}


# ---------------------------------------------------------------------------
# Parsing and validation

def parse_ir(raw: str) -> IR:
    """Extract the first well-formed JSON object from backend output, then
    build the IR strictly from it."""
    decoder = json.JSONDecoder()
    for pos in range(len(raw)):
        if raw[pos] != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except ValueError:
            continue
        if isinstance(obj, dict):
            try:
                return IR.from_json(obj)
            except (KeyError, ValueError, TypeError):
                continue
    raise MalformedOutputError(raw)


@dataclass(frozen=True)
class Diagnostic:
    code: str  # "unresolved" | "range" | "dependency" | "action"
    message: str


def validate_ir(ir: IR, snmt: SNMT) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    for label, ep in (("source", ir.source), ("destination", ir.destination)):
        if ep.unresolved:
            out.append(Diagnostic("unresolved",
                                  f"{label} {ep.name!r} was not found in the mapping table"))
            continue
        if not ep.pairs and not ep.is_any:
            out.append(Diagnostic("range",
                                  f"{label} {ep.name!r} has no gateway-prefix pairs"))
        known = {(g, p) for pairs in snmt.entries.values() for g, p in pairs}
        for g, p in ep.pairs:
            if (g, p) not in known:
                out.append(Diagnostic("range",
                                      f"{label} pair ({g}, {p}) is not in the mapping table"))
    for proto, port in ir.application.pairs:
        if proto not in ("tcp", "udp", "icmp"):
            out.append(Diagnostic("dependency", f"unknown protocol {proto!r}"))
        elif port is not None and proto not in ("tcp", "udp"):
            out.append(Diagnostic("dependency",
                                  f"protocol {proto} cannot carry port {port}"))
        elif port is not None and not 0 <= int(port) <= 65535:
            out.append(Diagnostic("dependency", f"port {port} out of range"))
    if ir.action not in ("permit", "deny", "protect"):
        out.append(Diagnostic("action", f"unknown action {ir.action!r}"))
    return out


# ---------------------------------------------------------------------------
# Comprehension loop

def _merge(base: IR, update: IR) -> IR:
    source = update.source if base.source.unresolved else base.source
    dest = update.destination if base.destination.unresolved else base.destination
    return IR(source, dest, base.application, base.time, base.action)


def comprehend(intent_text: str, backend, snmt: SNMT, cfg: BackendConfig) -> IR:
    """Run the intent through every slice until all endpoints resolve."""
    ir: Optional[IR] = None
    for names in slice_snmt(snmt, cfg):
        bundle = assemble_system_prompt(snmt, names, cfg)
        raw = backend.chat([{"role": "system", "content": bundle.text},
                            {"role": "user", "content": intent_text}])
        part = parse_ir(raw)
        ir = part if ir is None else _merge(ir, part)
        if not (ir.source.unresolved or ir.destination.unresolved):
            break
    assert ir is not None
    return ir


def refine(record: FeedbackRecord, backend, snmt: SNMT, cfg: BackendConfig) -> IR:
    """One feedback round: prior IR + operator feedback + original intent."""
    if record.round >= cfg.max_rounds:
        raise RoundsExhaustedError(record.round)
    user = (f"Original intent: {record.intent_text}\n"
            f"Previous IR: {json.dumps(record.prior_ir.to_json(), sort_keys=True)}\n"
            f"Feedback: {record.feedback}\n"
            "Produce a corrected IR.")
    ir: Optional[IR] = None
    for names in slice_snmt(snmt, cfg):
        bundle = assemble_system_prompt(snmt, names, cfg)
        raw = backend.chat([{"role": "system", "content": bundle.text},
                            {"role": "user", "content": user}])
        part = parse_ir(raw)
        ir = part if ir is None else _merge(ir, part)
        if not (ir.source.unresolved or ir.destination.unresolved):
            break
    assert ir is not None
    return ir


# ---------------------------------------------------------------------------
# Rule generation

@dataclass
class GeneratedRule:
    rule: Rule
    src_gateways: List[Interface]
    dst_gateways: List[Interface]
    intent_action: str  # permit | deny | protect


def generate_rules(ir: IR, snmt: SNMT) -> List[GeneratedRule]:
    """Enumerate sources x destinations x applications into concrete rules."""
    if ir.source.unresolved or ir.destination.unresolved:
        raise ComprehensionError("cannot generate rules from unresolved endpoints")
    if ir.action not in ("permit", "deny", "protect"):
        raise ComprehensionError(f"bad action {ir.action!r}")

    def expand_endpoint(ep: Endpoint):
        if ep.is_any or not ep.pairs:
            all_gws = sorted({g for pairs in snmt.entries.values() for g, _ in pairs})
            return [(None, all_gws)]
        return [(p, [g for g, q in ep.pairs if q == p]) for p in ep.prefixes()]

    apps = ir.application.pairs or [(None, None)]
    # Protect rules get their real (anti-intent) action during resolution.
    rule_action = ir.action if ir.action != "protect" else "permit"

    out: List[GeneratedRule] = []
    for src, src_gws in expand_endpoint(ir.source):
        for dst, dst_gws in expand_endpoint(ir.destination):
            for app in apps:
                out.append(GeneratedRule(
                    Rule(src, dst, app, rule_action, ir.time),
                    src_gws, dst_gws, ir.action))
    return out
