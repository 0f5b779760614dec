"""Keyword-driven translation of plain-English objectives into candidate queries.

Layer mentions come from a synonym map (phrase -> layer id), analysis and
operator words from a :class:`KeywordTable`. Operators between two mentioned
layers are resolved through :func:`~mlnkit.model.theta_options`, so the same
word ("and") becomes a Boolean AND between sibling layers and a matching
between linked layers. Anything that cannot be resolved yields a
``NotTranslatable`` diagnostic naming the text span; nothing is guessed.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .errors import MlnError, NoLayerMention
from .exprlang.ast import LayerRef, Not, PsiNode, Query, SortBy, ThetaNode, TopK
from .exprlang.check import typecheck
from .exprlang.syntax import format
from .model import AttributeStore, MlnSchema, PsiKind, ThetaKind, theta_options
from .psi import HubRule

HOMLN, HEMLN = "HoMLN", "HeMLN"

# centrality hubs need a rule once they feed a composition
TRANSLATED_HUB_RULE = HubRule("top_pct", 10.0)


@dataclass(frozen=True)
class KeywordRow:
    phrases: frozenset[str]
    target: str                 # "psi" | "not" | "theta"
    value: str | None = None    # PsiKind / ThetaKind value, or "substructure"
    context: str | None = None  # HoMLN | HeMLN for operator rows


DEFAULT_ROWS = (
    KeywordRow(frozenset({"group", "cluster", "strong group", "dense group"}), "psi", PsiKind.COMMUNITY.value),
    KeywordRow(frozenset({"coverage"}), "psi", PsiKind.CLOSENESS.value),
    KeywordRow(frozenset({"direct neighbors", "hubs"}), "psi", PsiKind.DEGREE.value),
    KeywordRow(frozenset({"frequent patterns", "interesting patterns"}), "psi", "substructure"),
    KeywordRow(frozenset({"never", "not"}), "not"),
    KeywordRow(frozenset({"and", "but", "yet"}), "theta", ThetaKind.AND.value, HOMLN),
    KeywordRow(frozenset({"or", "either"}), "theta", ThetaKind.OR.value, HOMLN),
    KeywordRow(frozenset({"and", "but", "yet", "for each", "for every"}), "theta", ThetaKind.MWM.value, HEMLN),
)


_WORD = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


def _norm(tok: str) -> str:
    # tolerate plurals: "groups" ~ "group", "hubs" ~ "hub"
    return tok[:-1] if len(tok) > 3 and tok.endswith("s") and not tok.endswith("ss") else tok


def tokenize(text: str) -> list[tuple[str, int, int]]:
    return [(_norm(m.group()), m.start(), m.end()) for m in _WORD.finditer(text.lower())]


def _phrase_tokens(phrase: str) -> tuple[str, ...]:
    return tuple(t for t, _, _ in tokenize(phrase))


class KeywordTable:
    def __init__(self, rows=DEFAULT_ROWS):
        self.rows = list(rows)

    def extend(self, rows, override: bool = False) -> "KeywordTable":
        """Add user rows. Without ``override`` a phrase already mapped by a default row
        keeps its default meaning alongside the new one."""
        rows = list(rows)
        if override:
            taken = {p for r in rows for p in r.phrases}
            base = [KeywordRow(r.phrases - taken, r.target, r.value, r.context) for r in self.rows]
            return KeywordTable([r for r in base if r.phrases] + rows)
        return KeywordTable(self.rows + rows)

    def phrase_index(self) -> dict[tuple[str, ...], list[KeywordRow]]:
        out: dict[tuple[str, ...], list[KeywordRow]] = {}
        for r in self.rows:
            for p in r.phrases:
                out.setdefault(_phrase_tokens(p), []).append(r)
        return out

    def lookup(self, phrase: str) -> list[KeywordRow]:
        return self.phrase_index().get(_phrase_tokens(phrase), [])


@dataclass(frozen=True)
class Diagnostic:
    code: str
    span: tuple[int, int]
    text: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} [{self.span[0]}:{self.span[1]}] {self.text!r}: {self.message}"


@dataclass
class Candidate:
    expression: str
    query: Query
    coverage: float
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class Translation:
    candidates: list[Candidate]
    diagnostics: list[Diagnostic]

    def expressions(self) -> list[str]:
        return [c.expression for c in self.candidates]


@dataclass
class _Hit:
    kind: str            # layer | psi | not | theta | filter
    start: int           # token index
    end: int
    span: tuple[int, int]
    payload: object


_NUMBER_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
                 "eight": 8, "nine": 9, "ten": 10, "twenty": 20}


def _synonym_index(schema: MlnSchema, synonyms: dict[str, list[str]]):
    index: dict[tuple[str, ...], set[str]] = {}
    for lid, phrases in synonyms.items():
        schema.layer(lid)
        for p in phrases:
            toks = _phrase_tokens(p)
            if toks:
                index.setdefault(toks, set()).add(lid)
    return index


def _scan(toks, index, kw_index, text):
    """Longest-first phrase matching; layer mentions take precedence over keywords."""
    hits: list[_Hit] = []
    max_layer = max((len(k) for k in index), default=0)
    max_kw = max((len(k) for k in kw_index), default=0)
    words = [t for t, _, _ in toks]
    i = 0
    while i < len(toks):
        matched = False
        for size in range(min(max_layer, len(toks) - i), 0, -1):
            key = tuple(words[i:i + size])
            if key in index:
                span = (toks[i][1], toks[i + size - 1][2])
                hits.append(_Hit("layer", i, i + size, span, sorted(index[key])))
                i += size
                matched = True
                break
        if matched:
            continue
        for size in range(min(max_kw, len(toks) - i), 0, -1):
            key = tuple(words[i:i + size])
            if key in kw_index:
                span = (toks[i][1], toks[i + size - 1][2])
                rows = kw_index[key]
                kinds = {r.target for r in rows}
                kind = "theta" if "theta" in kinds else rows[0].target
                hits.append(_Hit(kind, i, i + size, span, rows))
                i += size
                matched = True
                break
        if matched:
            continue
        # filters: "top five", "top 5", "sort by X", "taking its X into consideration"
        if words[i] == "top" and i + 1 < len(toks):
            nxt = words[i + 1]
            k = int(nxt) if nxt.isdigit() else _NUMBER_WORDS.get(nxt)
            if k:
                hits.append(_Hit("filter", i, i + 2, (toks[i][1], toks[i + 1][2]), TopK(k)))
                i += 2
                continue
        if words[i] == "sort" and i + 2 < len(toks) and words[i + 1] == "by":
            hits.append(_Hit("filter", i, i + 3, (toks[i][1], toks[i + 2][2]),
                             ("sort_by", text[toks[i + 2][1]:toks[i + 2][2]])))
            i += 3
            continue
        if words[i] == "taking" and i + 4 < len(toks) and words[i + 1] in ("it", "its") \
                and words[i + 3] == "into" and words[i + 4] == "consideration":
            hits.append(_Hit("filter", i, i + 5, (toks[i][1], toks[i + 4][2]),
                             ("sort_by", text[toks[i + 2][1]:toks[i + 2][2]])))
            i += 5
            continue
        i += 1
    return hits


def translate(objective: str, schema: MlnSchema, synonyms: dict[str, list[str]],
              table: KeywordTable | None = None, store: AttributeStore | None = None) -> Translation:
    """Candidate queries for an English objective, best coverage first.

    Raises :class:`NoLayerMention` when no synonym phrase occurs in the text.
    Every returned candidate type-checks against ``schema``.
    """
    table = table or KeywordTable()
    text = " ".join(objective.split())
    toks = tokenize(text)
    index = _synonym_index(schema, synonyms)
    hits = _scan(toks, index, table.phrase_index(), text)
    diags: list[Diagnostic] = []

    def diag(hit_or_span, message, code="NotTranslatable"):
        span = hit_or_span.span if isinstance(hit_or_span, _Hit) else hit_or_span
        diags.append(Diagnostic(code, span, text[span[0]:span[1]], message))

    mentions = [h for h in hits if h.kind == "layer"]
    if not mentions:
        raise NoLayerMention(f"no known layer is mentioned in {objective!r}")
    for h in mentions:
        if len(h.payload) > 1:
            diag(h, f"phrase maps to several layers: {', '.join(h.payload)}", "AmbiguousLayer")
    layers = [h.payload[0] for h in mentions]

    # NOT scopes to the next layer mention
    negated = [False] * len(mentions)
    used: set[int] = set()
    for idx, h in enumerate(hits):
        if h.kind != "not":
            continue
        nxt = next((j for j, m in enumerate(mentions) if m.start >= h.end), None)
        if nxt is None:
            diag(h, "negation is not followed by a layer mention")
        else:
            negated[nxt] = not negated[nxt]
            used.add(idx)

    # analysis per layer: the nearest analysis keyword
    psi_hits = [(i, h) for i, h in enumerate(hits) if h.kind == "psi"]
    psi_for: list[PsiKind | None] = []
    for m in mentions:
        if not psi_hits:
            psi_for.append(None)
            continue
        i, h = min(psi_hits, key=lambda ih: (min(abs(ih[1].start - m.end), abs(m.start - ih[1].end)),
                                             ih[1].start < m.start))
        value = h.payload[0].value
        if value == "substructure":
            diag(h, "substructure discovery is recognized but not implemented")
            psi_for.append(None)
        else:
            used.add(i)
            psi_for.append(PsiKind(value))
    if not psi_hits:
        diag((0, len(text)), "no analysis keyword (e.g. group, coverage, hubs) found")

    # operator options per gap between consecutive mentions
    gap_options: list[list[tuple[ThetaKind, int]]] = []
    for g in range(len(mentions) - 1):
        a, b = mentions[g], mentions[g + 1]
        in_gap = [(i, h) for i, h in enumerate(hits) if h.kind == "theta" and a.end <= h.start < b.start]
        if g == 0:
            # "for each X ..." before the first mention links the first pair
            in_gap += [(i, h) for i, h in enumerate(hits)
                       if h.kind == "theta" and h.end <= a.start
                       and any(r.value == ThetaKind.MWM.value and r.context == HEMLN for r in h.payload)]
        legal = theta_options(schema, layers[g], layers[g + 1])
        opts: dict[ThetaKind, int] = {}
        for i, h in in_gap:
            for r in h.payload:
                kind = ThetaKind(r.value)
                ctx_ok = (r.context == HOMLN and ThetaKind.AND in legal) or \
                         (r.context == HEMLN and ThetaKind.MWM in legal)
                if ctx_ok and kind in legal:
                    opts.setdefault(kind, i)
        if not in_gap:
            diag((a.span[1], b.span[0]) if a.span[1] < b.span[0] else a.span,
                 f"no operator word between {layers[g]!r} and {layers[g + 1]!r}")
        elif not opts:
            diag(in_gap[0][1], f"no legal operator for {layers[g]!r} and {layers[g + 1]!r} "
                               f"(legal: {sorted(k.value for k in legal) or 'none'})")
        gap_options.append(sorted(opts.items(), key=lambda kv: kv[0].value))

    filter_hits = [(i, h) for i, h in enumerate(hits) if h.kind == "filter"]
    keyword_total = len(hits)

    candidates: list[Candidate] = []
    if any(p is None for p in psi_for) or any(not o for o in gap_options):
        return Translation([], diags)

    for combo in itertools.product(*gap_options):
        is_match = any(k is ThetaKind.MWM for k, _ in combo)
        leaves = []
        for lid, neg, psi in zip(layers, negated, psi_for):
            le = LayerRef(lid)
            if neg:
                le = Not(le)
            rule = TRANSLATED_HUB_RULE if psi is not PsiKind.COMMUNITY and len(layers) > 1 else None
            leaves.append(PsiNode(psi, le, rule))
        expr = leaves[0]
        for (kind, _), leaf in zip(combo, leaves[1:]):
            expr = ThetaNode(kind, expr, leaf)
        filters = []
        cand_used = set(used) | {i for _, i in combo} | {i for i, h in enumerate(hits) if h.kind == "layer"}
        cand_diags: list[Diagnostic] = []
        for i, h in filter_hits:
            if is_match:
                cand_diags.append(Diagnostic("NotTranslatable", h.span, text[h.span[0]:h.span[1]],
                                             "filters do not apply to matching results"))
                continue
            if isinstance(h.payload, TopK):
                filters.append(h.payload)
                cand_used.add(i)
            else:
                attr = h.payload[1]
                entity = schema.layer(layers[0]).entity_type
                declared = store is not None and (store.is_declared(entity, attr)
                                                  or store.is_declared(entity, attr.lower()))
                if declared:
                    name = attr if store.is_declared(entity, attr) else attr.lower()
                    filters.append(SortBy(name))
                    cand_used.add(i)
                else:
                    cand_diags.append(Diagnostic("NotTranslatable", h.span, text[h.span[0]:h.span[1]],
                                                 f"{attr!r} is not a declared attribute of {entity}"))
        # sort before truncating, except raw scores: those are ranked by top_k first
        raw_scores = isinstance(expr, PsiNode) and expr.kind is not PsiKind.COMMUNITY and expr.hub_rule is None
        filters.sort(key=lambda f: isinstance(f, SortBy) == raw_scores)
        query = Query(expr, tuple(filters))
        try:
            typecheck(query, schema, store)
        except MlnError as exc:
            diags.append(Diagnostic("NotTranslatable", (0, len(text)), text,
                                    f"candidate {format(query)!r} rejected: {exc}"))
            continue
        coverage = len(cand_used) / keyword_total if keyword_total else 0.0
        candidates.append(Candidate(format(query), query, coverage, cand_diags))

    candidates.sort(key=lambda c: (-c.coverage, c.expression))
    return Translation(candidates, diags)
