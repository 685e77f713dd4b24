"""Canonical text documents for negotiations, summaries, verdicts and traces.

All documents are JSON.  Negotiations are written with a fixed layout (one
transition or transformer pair per line) so that serialization is canonical
and diagnostics can point at lines.  Reduction traces are JSON Lines: a
header followed by one rule application per line.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Any

from .analysis import Classification, SoundnessVerdict
from .model import Atom, Negotiation, Transformer, validate
from .reduction import Metrics, ReductionTrace, RuleApplication
from .summary import Summary

IDENTITY = "identity"


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    category: str  # "syntax" or "semantic"
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.category} error: {self.message}"


class ParseError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(map(str, diagnostics)))
        self.diagnostics = diagnostics

    @property
    def category(self) -> str:
        return self.diagnostics[0].category


def _j(value: Any) -> str:
    return json.dumps(value, ensure_ascii=False)


def serialize(n: Negotiation, check: bool = True) -> str:
    """Canonical document for ``n`` (stable key order, sorted sets, trailing newline)."""
    if check:
        problems = validate(n, generalized=True)
        if problems:
            raise ValueError("cannot serialize an invalid negotiation: " + "; ".join(map(str, problems)))
    lines = ["{", '  "kind": "negotiation",', '  "agents": {']
    agents = [f"    {_j(a)}: {_j(list(n.agents[a]))}" for a in n.agent_order]
    lines.append(",\n".join(agents))
    lines.append("  },")
    lines.append('  "atoms": {')
    atoms = [
        f"    {_j(k)}: {{\"parties\": {_j(n.atoms[k].party_order)}, \"outcomes\": {_j(list(n.atoms[k].outcomes))}}}"
        for k in n.atom_order
    ]
    lines.append(",\n".join(atoms))
    lines.append("  },")
    lines.append(f'  "initial": {_j(n.initial)},')
    lines.append(f'  "final": {_j(n.final)},')
    lines.append('  "transitions": [')
    trans = [
        f"    {{\"atom\": {_j(k)}, \"agent\": {_j(a)}, \"outcome\": {_j(r)}, "
        f"\"targets\": {_j(sorted(n.transitions[k, a, r]))}}}"
        for k, a, r in n.triples()
    ]
    lines.append(",\n".join(trans))
    lines.append("  ],")
    lines.append('  "transformers": {')
    blocks = []
    for k in n.atom_order:
        atom = n.atoms[k]
        entries = []
        for r in atom.outcomes:
            t = atom.delta[r]
            if t.is_identity(n.agents):
                entries.append(f"      {_j(r)}: {_j(IDENTITY)}")
                continue
            pos = [{q: i for i, q in enumerate(n.agents[a])} for a in t.parties]
            order = sorted(t.pairs, key=lambda p: ([x[q] for x, q in zip(pos, p[0])], [x[q] for x, q in zip(pos, p[1])]))
            pairs = ",\n".join(f"        {_j([list(q), list(q2)])}" for q, q2 in order)
            entries.append(f"      {_j(r)}: [\n{pairs}\n      ]")
        blocks.append(f"    {_j(k)}: {{\n" + ",\n".join(entries) + "\n    }")
    lines.append(",\n".join(blocks))
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def fingerprint(n: Negotiation) -> str:
    return hashlib.sha256(serialize(n, check=False).encode()).hexdigest()


# -- parsing ----------------------------------------------------------------

def _line_of(text: str, *needles: str) -> int:
    """1-based line of the first needle found (searched in sequence), else 1."""
    pos = 0
    for needle in needles:
        i = text.find(needle, pos)
        if i < 0:
            break
        pos = i
    return text.count("\n", 0, pos) + 1


def _locate(text: str, locus: tuple) -> int:
    if not locus:
        return 1
    kind = locus[0]
    if kind == "transition" and len(locus) > 1:
        k, a, r = locus[1]
        pattern = re.compile(
            r'"atom":\s*' + re.escape(_j(k)) + r',\s*"agent":\s*' + re.escape(_j(a))
            + r',\s*"outcome":\s*' + re.escape(_j(r))
        )
        m = pattern.search(text)
        if m:
            return text.count("\n", 0, m.start()) + 1
        return _line_of(text, '"transitions"')
    if kind == "transformer":
        return _line_of(text, '"transformers"', _j(locus[1]) + ":", _j(locus[2]) + ":")
    if kind == "atom":
        return _line_of(text, '"atoms"', _j(locus[1]) + ":")
    if kind == "agent":
        return _line_of(text, '"agents"', _j(locus[1]) + ":")
    if kind in ("initial", "final"):
        return _line_of(text, f'"{kind}"')
    return 1


def _semantic(text: str, message: str, *locus) -> Diagnostic:
    return Diagnostic(_locate(text, locus), 1, "semantic", message)


def _strings(value: Any) -> bool:
    return isinstance(value, list) and all(isinstance(x, str) for x in value)


def parse(text: str, generalized: bool = False) -> Negotiation:
    """Parse and validate a negotiation document.

    Raises ParseError with syntax diagnostics (malformed JSON or wrong shapes)
    or semantic diagnostics (failed validation).  Nothing is repaired.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([Diagnostic(exc.lineno, exc.colno, "syntax", exc.msg)]) from None
    diags: list[Diagnostic] = []

    def syntax(message: str, *locus) -> None:
        diags.append(Diagnostic(_locate(text, locus), 1, "syntax", message))

    if not isinstance(doc, dict):
        raise ParseError([Diagnostic(1, 1, "syntax", "document must be a JSON object")])
    kind = doc.get("kind", "negotiation")
    if kind != "negotiation":
        raise ParseError([Diagnostic(_line_of(text, '"kind"'), 1, "syntax", f"not a negotiation document: {kind!r}")])
    missing = [key for key in ("agents", "atoms", "initial", "final", "transitions", "transformers")
               if key not in doc]
    if missing:
        raise ParseError([Diagnostic(1, 1, "semantic", f"missing required field {key!r}") for key in missing])

    agents = doc["agents"]
    if not isinstance(agents, dict) or not all(_strings(v) for v in agents.values()):
        syntax("'agents' must map agent names to lists of state names", "agents")
    atoms_doc = doc["atoms"]
    if not isinstance(atoms_doc, dict) or not all(
        isinstance(v, dict) and _strings(v.get("parties")) and _strings(v.get("outcomes")) for v in atoms_doc.values()
    ):
        syntax("'atoms' must map atom ids to {\"parties\": [...], \"outcomes\": [...]}", "atoms")
    for key in ("initial", "final"):
        if not isinstance(doc[key], str):
            syntax(f"'{key}' must be an atom id", key)
    trans_doc = doc["transitions"]
    if not isinstance(trans_doc, list) or not all(
        isinstance(e, dict) and all(isinstance(e.get(f), str) for f in ("atom", "agent", "outcome"))
        and _strings(e.get("targets")) for e in trans_doc
    ):
        syntax("'transitions' must be a list of {atom, agent, outcome, targets}", "transitions")
    tf_doc = doc["transformers"]
    if not isinstance(tf_doc, dict) or not all(isinstance(v, dict) for v in tf_doc.values()):
        syntax("'transformers' must map atom ids to outcome tables", "transformers")
    if diags:
        raise ParseError(diags)

    spaces = {a: tuple(qs) for a, qs in agents.items()}
    transitions = {}
    for e in trans_doc:
        t = (e["atom"], e["agent"], e["outcome"])
        if t in transitions:
            diags.append(_semantic(text, f"duplicate transition {t}", "transition", t))
        transitions[t] = frozenset(e["targets"])
    atoms = {}
    for k, body in atoms_doc.items():
        parties = frozenset(body["parties"])
        table = tf_doc.get(k, {})
        if k not in tf_doc:
            diags.append(_semantic(text, f"atom {k} has no transformers", "atom", k))
        delta = {}
        for r in body["outcomes"]:
            spec = table.get(r)
            if spec is None:
                if k in tf_doc:
                    diags.append(_semantic(text, f"no transformer for ({k}, {r})", "transformer", k, r))
                continue
            if spec == IDENTITY:
                if all(a in spaces for a in parties):
                    delta[r] = Transformer.identity(parties, spaces)
                continue
            if not isinstance(spec, list) or not all(
                isinstance(p, list) and len(p) == 2 and all(_strings(x) for x in p) for p in spec
            ):
                diags.append(Diagnostic(_locate(text, ("transformer", k, r)), 1, "syntax",
                                        f"transformer of ({k}, {r}) must be \"identity\" or a list of [in, out] pairs"))
                continue
            delta[r] = Transformer(tuple(sorted(parties)), frozenset((tuple(q), tuple(q2)) for q, q2 in spec))
        for r in table:
            if r not in body["outcomes"]:
                diags.append(_semantic(text, f"transformer for unknown outcome ({k}, {r})", "transformer", k, r))
        atoms[k] = Atom(k, parties, tuple(body["outcomes"]), delta)
    for k in tf_doc:
        if k not in atoms:
            diags.append(_semantic(text, f"transformers given for unknown atom {k}", "transformer", k, ""))
    if diags:
        raise ParseError(sorted(diags, key=lambda d: (d.category != "syntax", d.line)))

    n = Negotiation(spaces, atoms, doc["initial"], doc["final"], transitions)
    problems = [v for v in validate(n, generalized) if not v.message.startswith("atom ") or "no transformer" not in v.message]
    if problems:
        raise ParseError([_semantic(text, v.message, *v.locus) for v in problems])
    return n


# -- other documents --------------------------------------------------------

def verdict_doc(v: SoundnessVerdict) -> dict:
    return {
        "kind": "verdict",
        "sound": v.sound,
        "unreached_atoms": sorted(v.unreached_atoms),
        "witness": None if v.witness is None else [list(s) for s in v.witness],
        "witness_ends_in_deadlock": v.deadlock if v.witness is not None else None,
    }


def classification_doc(c: Classification) -> dict:
    return {
        "kind": "classification",
        "acyclic": c.acyclic,
        "deterministic_agents": sorted(c.deterministic_agents),
        "deterministic": c.deterministic,
        "weakly_deterministic": c.weakly_deterministic,
    }


def summary_doc(s: Summary) -> dict:
    doc = {"kind": "summary", "agents": list(s.domain.agents), "verdict": verdict_doc(s.verdict)}
    if s.transformers is not None:
        doc["transformers"] = {
            r: [[list(q), list(q2)] for q, q2 in rel.sorted_pairs()] for r, rel in sorted(s.transformers.items())
        }
    return doc


def metrics_doc(m: Metrics) -> dict:
    return {
        "kind": "metrics",
        "out": m.out,
        "shoc": m.shoc,
        "shoc_per_pair": [[k, r, v] for (k, r), v in sorted(m.shoc_per_pair.items())],
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def application_doc(app: RuleApplication) -> dict:
    return {
        "kind": "application",
        "rule": app.rule,
        "params": list(app.params),
        "fresh": dict(app.fresh),
        "renamed": dict(app.renamed),
        "atoms_before": app.atoms_before,
        "atoms_after": app.atoms_after,
    }


def write_trace(trace: ReductionTrace) -> str:
    header = {"kind": "trace", "source": fingerprint(trace.source), "result": fingerprint(trace.result),
              "applications": len(trace.applications)}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(application_doc(app), sort_keys=True) for app in trace.applications]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TraceFile:
    source: str
    result: str
    applications: list[RuleApplication]


def read_trace(text: str) -> TraceFile:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError([Diagnostic(lineno, exc.colno, "syntax", exc.msg)]) from None
    if not rows or rows[0][1].get("kind") != "trace":
        raise ParseError([Diagnostic(1, 1, "syntax", "trace must start with a {\"kind\": \"trace\"} header")])
    header = rows[0][1]
    apps = []
    for lineno, row in rows[1:]:
        if row.get("kind") != "application" or not isinstance(row.get("params"), list):
            raise ParseError([Diagnostic(lineno, 1, "syntax", "expected a rule application")])
        apps.append(RuleApplication(row["rule"], tuple(row["params"]), row.get("fresh", {}), row.get("renamed", {}),
                                    row.get("atoms_before", 0), row.get("atoms_after", 0)))
    if header.get("applications", len(apps)) != len(apps):
        raise ParseError([Diagnostic(1, 1, "semantic", "header application count does not match the trace")])
    return TraceFile(header.get("source", ""), header.get("result", ""), apps)


def parse_any(text: str) -> dict:
    """Load a machine-readable output document and check its kind discriminator."""
    if text.lstrip().startswith('{"'):
        first = text.splitlines()[0]
        try:
            head = json.loads(first)
        except json.JSONDecodeError:
            head = None
        if isinstance(head, dict) and head.get("kind") == "trace":
            read_trace(text)
            return head
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([Diagnostic(exc.lineno, exc.colno, "syntax", exc.msg)]) from None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError([Diagnostic(1, 1, "syntax", "document has no 'kind'")])
    return doc


__all__ = [
    "Diagnostic", "ParseError", "serialize", "parse", "fingerprint", "verdict_doc", "classification_doc",
    "summary_doc", "metrics_doc", "dumps", "write_trace", "read_trace", "TraceFile", "parse_any",
]

