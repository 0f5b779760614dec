"""Tokenizer, recursive-descent parser, canonical formatter, group expansion.

Grammar (keywords are case-insensitive, identifiers are not)::

    query     := expr (';' 'FILTER' filter (',' filter)*)?
    expr      := term (theta term)*                     left-associative
    theta     := 'AND' | 'OR' | 'MINUS' | 'MWM' ('[' 'anchor' '=' IDENT ']')?
    term      := 'PSI' '[' psi (';' rule)? ']' '(' layer ')'
               | 'NODESET' '(' IDENT ')'
               | '(' expr ')'
    psi       := 'community' | 'degree' | 'closeness'
    rule      := 'top_k' '=' INT | 'threshold' '=' NUM | 'top_pct' '=' NUM
    layer     := IDENT | 'NOT' '(' layer ')'
    filter    := 'top_k' '(' INT ')'
               | 'sort_by' '(' IDENT (',' ('asc' | 'desc'))? ')'
               | 'subtract' '(' 'NODESET' '(' IDENT ')' ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ConfigError, ExpressionSyntaxError, UnknownLayer
from ..model import PsiKind, ThetaKind
from ..psi import HubRule
from .ast import (
    LayerRef,
    Not,
    NodeSetRef,
    PsiNode,
    Query,
    SortBy,
    SubtractNodeSet,
    ThetaNode,
    TopK,
)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_\-.]*)
  | (?P<punct>[()\[\];,=])
""", re.VERBOSE)

PSI_NAMES = {
    "community": PsiKind.COMMUNITY,
    "degree": PsiKind.DEGREE,
    "degree-centrality": PsiKind.DEGREE,
    "closeness": PsiKind.CLOSENESS,
    "closeness-centrality": PsiKind.CLOSENESS,
}
THETA_NAMES = {k.value: k for k in ThetaKind}
RULE_NAMES = ("top_k", "threshold", "top_pct")


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | punct | end
    text: str
    pos: int

    def kw(self) -> str:
        return self.text.upper() if self.kind == "ident" else ""


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def fail(self, what: str):
        t = self.cur
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExpressionSyntaxError(f"expected {what}, found {found}", t.pos, self.text)

    def take(self, text: str) -> Token:
        t = self.cur
        if t.kind == "punct" and t.text == text:
            self.i += 1
            return t
        self.fail(repr(text))

    def take_kw(self, kw: str) -> Token:
        if self.cur.kw() == kw:
            self.i += 1
            return self.toks[self.i - 1]
        self.fail(kw)

    def ident(self, what: str = "identifier") -> str:
        t = self.cur
        if t.kind != "ident":
            self.fail(what)
        self.i += 1
        return t.text

    def number(self, what: str = "number") -> str:
        t = self.cur
        if t.kind != "num":
            self.fail(what)
        self.i += 1
        return t.text

    def at_punct(self, text: str) -> bool:
        return self.cur.kind == "punct" and self.cur.text == text

    # -- productions --------------------------------------------------------

    def query(self) -> Query:
        expr = self.expr()
        filters = []
        if self.at_punct(";"):
            self.i += 1
            self.take_kw("FILTER")
            filters.append(self.filter())
            while self.at_punct(","):
                self.i += 1
                filters.append(self.filter())
        if self.cur.kind != "end":
            self.fail("an operator, ';' or end of input")
        return Query(expr, tuple(filters))

    def expr(self):
        left = self.term()
        while self.cur.kw() in THETA_NAMES:
            kind = THETA_NAMES[self.cur.kw()]
            self.i += 1
            anchor = None
            if self.at_punct("["):
                if kind is not ThetaKind.MWM:
                    self.fail(f"a term after {kind.value} (anchors are only allowed on MWM)")
                self.i += 1
                if self.ident("'anchor'").lower() != "anchor":
                    self.i -= 1
                    self.fail("'anchor'")
                self.take("=")
                anchor = self.ident("layer id")
                self.take("]")
            right = self.term()
            left = ThetaNode(kind, left, right, anchor)
        return left

    def term(self):
        kw = self.cur.kw()
        if kw == "PSI":
            self.i += 1
            self.take("[")
            name_tok = self.cur
            name = self.ident("analysis name").lower()
            if name not in PSI_NAMES:
                raise ExpressionSyntaxError(f"unknown analysis {name!r}", name_tok.pos, self.text)
            rule = None
            if self.at_punct(";"):
                self.i += 1
                rule = self.hub_rule()
            self.take("]")
            self.take("(")
            layer = self.layer()
            self.take(")")
            return PsiNode(PSI_NAMES[name], layer, rule)
        if kw == "NODESET":
            self.i += 1
            self.take("(")
            name = self.ident("node set name")
            self.take(")")
            return NodeSetRef(name)
        if self.at_punct("("):
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        self.fail("PSI[...](...), NODESET(...) or '('")

    def hub_rule(self) -> HubRule:
        tok = self.cur
        name = self.ident("hub rule").lower()
        if name not in RULE_NAMES:
            raise ExpressionSyntaxError(f"unknown hub rule {name!r}", tok.pos, self.text)
        self.take("=")
        vtok = self.cur
        raw = self.number("rule value")
        if name == "top_k" and not raw.lstrip("+").isdigit():
            raise ExpressionSyntaxError(f"top_k needs an integer, got {raw}", vtok.pos, self.text)
        try:
            return HubRule(name, int(raw) if name == "top_k" else float(raw))
        except ConfigError as exc:
            raise ExpressionSyntaxError(str(exc), vtok.pos, self.text) from None

    def layer(self):
        if self.cur.kw() == "NOT" and self.toks[self.i + 1].text == "(":
            self.i += 1
            self.take("(")
            inner = self.layer()
            self.take(")")
            return Not(inner)
        return LayerRef(self.ident("layer id"))

    def filter(self):
        tok = self.cur
        name = self.ident("filter").lower()
        self.take("(")
        if name == "top_k":
            ktok = self.cur
            raw = self.number("integer")
            if not raw.lstrip("+").isdigit() or int(raw) < 1:
                raise ExpressionSyntaxError(f"top_k needs an integer >= 1, got {raw}", ktok.pos, self.text)
            f = TopK(int(raw))
        elif name == "sort_by":
            attr = self.ident("attribute name")
            desc = True
            if self.at_punct(","):
                self.i += 1
                dtok = self.cur
                d = self.ident("asc or desc").lower()
                if d not in ("asc", "desc"):
                    raise ExpressionSyntaxError(f"expected asc or desc, found {d!r}", dtok.pos, self.text)
                desc = d == "desc"
            f = SortBy(attr, desc)
        elif name == "subtract":
            self.take_kw("NODESET")
            self.take("(")
            f = SubtractNodeSet(self.ident("node set name"))
            self.take(")")
        else:
            raise ExpressionSyntaxError(f"unknown filter {name!r}", tok.pos, self.text)
        self.take(")")
        return f


def parse(text: str) -> Query:
    """Parse one query. Raises :class:`ExpressionSyntaxError` with a character position."""
    return _Parser(text).query()


def parse_expr(text: str):
    return parse(text).expr


# -- formatting ---------------------------------------------------------------

def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_layer(le) -> str:
    if isinstance(le, Not):
        return f"NOT({format_layer(le.inner)})"
    return le.name


def format_expr(node) -> str:
    if isinstance(node, PsiNode):
        rule = ""
        if node.hub_rule is not None:
            r = node.hub_rule
            rule = f";{r.kind}={int(r.value) if r.kind == 'top_k' else _fmt_num(r.value)}"
        return f"PSI[{node.kind.value}{rule}]({format_layer(node.layer)})"
    if isinstance(node, NodeSetRef):
        return f"NODESET({node.name})"
    if isinstance(node, ThetaNode):
        op = node.kind.value + (f"[anchor={node.anchor}]" if node.anchor else "")
        right = format_expr(node.right)
        if isinstance(node.right, ThetaNode):
            right = f"({right})"
        return f"{format_expr(node.left)} {op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def format_filter(f) -> str:
    if isinstance(f, TopK):
        return f"top_k({f.k})"
    if isinstance(f, SortBy):
        return f"sort_by({f.attr}, {'desc' if f.descending else 'asc'})"
    if isinstance(f, SubtractNodeSet):
        return f"subtract(NODESET({f.name}))"
    raise TypeError(f"not a filter: {f!r}")


def format(node) -> str:  # noqa: A001 - mirrors parse()
    """Canonical text; ``parse(format(q)) == q``."""
    if isinstance(node, Query):
        text = format_expr(node.expr)
        if node.filters:
            text += "; FILTER " + ", ".join(format_filter(f) for f in node.filters)
        return text
    return format_expr(node)


# -- layer-group expansion ----------------------------------------------------

_EACH = re.compile(r"\$EACH\(\s*([A-Za-z_][A-Za-z0-9_\-.]*)\s*\)")


def _group(groups: dict, name: str, pos: int, text: str) -> list[str]:
    if name not in groups:
        raise UnknownLayer(f"unknown layer group {name!r} at position {pos}")
    return groups[name]


def expand_groups(text: str, groups: dict[str, list[str]]) -> list[str]:
    """Expand ``$EACH(group)`` macros into plain queries.

    Inside braces, ``{OP template}`` becomes ``((t1) OP (t2) OP ...)`` with
    one copy of the template per group member. Outside braces, a query that
    mentions ``$EACH(group)`` becomes one query per member.
    """
    out_text = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "}":
            raise ExpressionSyntaxError("unbalanced '}'", i, text)
        if ch != "{":
            out_text.append(ch)
            i += 1
            continue
        j = text.find("}", i)
        if j < 0:
            raise ExpressionSyntaxError("unbalanced '{'", i, text)
        body = text[i + 1:j]
        if "{" in body:
            raise ExpressionSyntaxError("nested braces are not supported", i + 1 + body.index("{"), text)
        m = re.match(r"\s*(AND|OR|MINUS)\b", body, re.IGNORECASE)
        if m is None:
            raise ExpressionSyntaxError("expected AND, OR or MINUS after '{'", i + 1, text)
        op = m.group(1).upper()
        template = body[m.end():]
        names = {g.group(1) for g in _EACH.finditer(template)}
        if len(names) != 1:
            raise ExpressionSyntaxError("a braced template needs exactly one $EACH(group)", i, text)
        name = names.pop()
        members = _group(groups, name, i, text)
        copies = [f"({_EACH.sub(lid, template).strip()})" for lid in members]
        out_text.append("(" + f" {op} ".join(copies) + ")")
        i = j + 1
    flat = "".join(out_text)
    names = {g.group(1) for g in _EACH.finditer(flat)}
    if not names:
        return [flat]
    if len(names) > 1:
        raise ExpressionSyntaxError("only one layer group may be fanned out per query", 0, text)
    name = names.pop()
    return [_EACH.sub(lid, flat) for lid in _group(groups, name, 0, text)]
