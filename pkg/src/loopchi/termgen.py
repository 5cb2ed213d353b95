"""Symbolic term lists for chi^(n): loop (partially time-ordered) and Liouville-pathway forms.

Terms are purely combinatorial. Frequency arguments are integer combinations
over (w1, ..., wn, ws); the overall -1/(2 pi)^2 prefactor is applied by the
evaluators.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field

RETARDED = "retarded"
ADVANCED = "advanced"
LOOP = "loop"
TIMEORDERED = "time-ordered"


@dataclass(frozen=True)
class FreqCombo:
    """Integer coefficients over (w1, ..., wn, ws); the last slot is ws."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        if not any(self.coeffs):
            raise ValueError("frequency combination must have a nonzero coefficient")
        if any(c not in (-1, 0, 1) for c in self.coeffs):
            raise ValueError(f"coefficients must lie in {{-1, 0, 1}}: {self.coeffs}")

    @property
    def n(self) -> int:
        return len(self.coeffs) - 1

    def evaluate(self, omegas, omega_s=None):
        """Numerical value for field frequencies ``omegas`` (ws defaults to their sum)."""
        if omega_s is None:
            omega_s = sum(omegas)
        val = self.coeffs[-1] * omega_s
        for c, w in zip(self.coeffs[:-1], omegas):
            if c:
                val = val + c * w
        return val

    def render(self) -> str:
        names = [f"w{i + 1}" for i in range(self.n)]
        parts = []
        if self.coeffs[-1]:
            parts.append(("-" if self.coeffs[-1] < 0 else "") + "ws")
        for c, name in zip(self.coeffs[:-1], names):
            if c:
                sign = "-" if c < 0 else ("+" if parts else "")
                parts.append(sign + name)
        return "".join(parts)


@dataclass(frozen=True)
class PropagatorDescriptor:
    kind: str
    arg: FreqCombo

    def render(self) -> str:
        return ("G†" if self.kind == ADVANCED else "G") + f"({self.arg.render()})"


@dataclass(frozen=True)
class ExpansionTerm:
    sign: int
    chain: tuple[PropagatorDescriptor, ...]  # innermost (earliest) first
    vertex_tags: tuple[str, ...]  # chronological, n + 1 entries, last is the signal vertex
    origin: str
    permutation: tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.chain)

    def n_advanced(self) -> int:
        return sum(p.kind == ADVANCED for p in self.chain)

    def to_dict(self) -> dict:
        return {
            "sign": self.sign,
            "chain": [{"kind": p.kind, "coeffs": list(p.arg.coeffs)} for p in self.chain],
            "tags": list(self.vertex_tags),
            "origin": self.origin,
            "permutation": list(self.permutation),
        }


def _combo(n, idx, ws=0):
    c = [0] * (n + 1)
    for i in idx:
        c[i] = 1
    c[n] = ws
    return FreqCombo(tuple(c))


def gen_loop_terms(n: int) -> list[ExpansionTerm]:
    """The n + 1 loop terms, one per position of the signal vertex along the loop.

    Term k has k propagators after the signal vertex (advanced, argument
    -ws + earlier frequencies) and sign (-1)^k.
    """
    if n < 1:
        raise ValueError("order n must be >= 1")
    terms = []
    for k in range(n + 1):
        chain = []
        for j in range(1, n + 1):
            if j <= n - k:
                chain.append(PropagatorDescriptor(RETARDED, _combo(n, range(j))))
            else:
                chain.append(PropagatorDescriptor(ADVANCED, _combo(n, range(j - 1), ws=-1)))
        terms.append(ExpansionTerm((-1) ** k, tuple(chain), ("L",) * (n + 1), LOOP,
                                   tuple(range(n))))
    return terms


def gen_timeordered_terms(n: int) -> list[ExpansionTerm]:
    """The 2^n Liouville pathways of the nested commutator.

    Each early interaction acts from the left (L) or right (R); the sign is
    (-1)^(number of R); the signal vertex is always L.
    """
    if n < 1:
        raise ValueError("order n must be >= 1")
    chain = tuple(PropagatorDescriptor(RETARDED, _combo(n, range(j))) for j in range(1, n + 1))
    terms = []
    for tags in itertools.product("LR", repeat=n):
        sign = (-1) ** tags.count("R")
        terms.append(ExpansionTerm(sign, chain, tags + ("L",), TIMEORDERED, tuple(range(n))))
    return terms


def _permute(term: ExpansionTerm, perm: tuple[int, ...]) -> ExpansionTerm:
    n = term.n
    chain = []
    for p in term.chain:
        c = [0] * (n + 1)
        c[n] = p.arg.coeffs[n]
        for i in range(n):
            c[perm[i]] = p.arg.coeffs[i]
        chain.append(PropagatorDescriptor(p.kind, FreqCombo(tuple(c))))
    return ExpansionTerm(term.sign, tuple(chain), term.vertex_tags, term.origin, tuple(perm))


def expand_permutations(terms: list[ExpansionTerm], n: int) -> list[ExpansionTerm]:
    """Replicate every term over all n! assignments of the field frequencies.

    ``perm[i] = j`` means the i-th interaction carries field j.
    """
    out = []
    for perm in itertools.permutations(range(n)):
        for t in terms:
            out.append(_permute(t, perm))
    return out


class PermutedTerms:
    """Lazy sequence of ``terms`` over all n! field assignments, in the same
    order as :func:`expand_permutations` (permutation-major).

    Large orders (n = 8 gives 10^7 time-ordered terms) can be counted and
    indexed without materializing every term.
    """

    def __init__(self, terms: list[ExpansionTerm], n: int):
        self.terms = list(terms)
        self.n = n
        self._perms = list(itertools.permutations(range(n)))

    def __len__(self) -> int:
        return len(self._perms) * len(self.terms)

    def __getitem__(self, i: int) -> ExpansionTerm:
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        p, k = divmod(i, len(self.terms))
        return _permute(self.terms[k], self._perms[p])

    def __iter__(self):
        for perm in self._perms:
            for t in self.terms:
                yield _permute(t, perm)


def render_term(term: ExpansionTerm) -> str:
    loop = term.origin == LOOP
    tags = term.vertex_tags
    pieces = ["V" if loop else "V" + tags[-1]]
    for j in range(term.n - 1, -1, -1):
        pieces.append(term.chain[j].render())
        pieces.append("V" if loop else "V" + tags[j])
    return ("+ " if term.sign > 0 else "- ") + "<" + " ".join(pieces) + ">"


_PROP_RE = re.compile(r"^(G†?)\(([^)]*)\)$")
_TOK_RE = re.compile(r"([+-]?)(ws|w\d+)")


def _parse_combo(text: str, n: int) -> FreqCombo:
    c = [0] * (n + 1)
    pos = 0
    for m in _TOK_RE.finditer(text):
        if m.start() != pos:
            raise ValueError(f"bad frequency combination {text!r}")
        pos = m.end()
        s = -1 if m.group(1) == "-" else 1
        name = m.group(2)
        c[n if name == "ws" else int(name[1:]) - 1] = s
    if pos != len(text):
        raise ValueError(f"bad frequency combination {text!r}")
    return FreqCombo(tuple(c))


def parse_term(text: str) -> ExpansionTerm:
    """Inverse of :func:`render_term`."""
    text = text.strip()
    if text[:2] not in ("+ ", "- ") or not (text[2] == "<" and text[-1] == ">"):
        raise ValueError(f"unrecognised term {text!r}")
    sign = 1 if text[0] == "+" else -1
    toks = text[3:-1].split()
    verts, props = toks[0::2], toks[1::2]
    n = len(props)
    loop = all(v == "V" for v in verts)
    chain = []
    for p in reversed(props):
        m = _PROP_RE.match(p)
        if not m:
            raise ValueError(f"bad propagator {p!r}")
        kind = ADVANCED if m.group(1) == "G†" else RETARDED
        chain.append(PropagatorDescriptor(kind, _parse_combo(m.group(2), n)))
    tags = ("L",) * (n + 1) if loop else tuple(v[1] for v in reversed(verts))
    # recover the field order from the frequencies each propagator adds
    order, prev = [], (0,) * (n + 1)
    for p in chain:
        diff = [a - b for a, b in zip(p.arg.coeffs[:n], prev[:n])]
        order += [i for i, d in enumerate(diff) if d]
        prev = p.arg.coeffs
    order += [i for i in range(n) if i not in order]
    return ExpansionTerm(sign, tuple(chain), tags, LOOP if loop else TIMEORDERED, tuple(order))


def count_summary(n: int, expansion: str) -> str:
    if expansion == LOOP:
        return f"loop: n+1 = {n + 1} base terms, (n+1)! = {math.factorial(n + 1)} with permutations"
    return (f"time-ordered: 2^n = {2 ** n} base terms, 2^n n! = "
            f"{2 ** n * math.factorial(n)} with permutations")
