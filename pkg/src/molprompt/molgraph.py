"""Molecular graphs parsed from a SMILES subset, plus ring perception,
a deterministic SMILES writer, and exact small-graph isomorphism.

Supported SMILES subset: organic-subset atoms (B, C, N, O, P, S, F, Cl, Br, I),
aromatic lowercase b/c/n/o/p/s, bracket atoms with charge and explicit H,
ring closures 1-9 and %nn, bond symbols - = # :, and branches. Stereochemistry
marks (/ \\ @ @@) are consumed and dropped with a StereoIgnoredWarning.
Aromaticity is trust-the-input: lowercase means aromatic, no Hueckel model.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, replace

from .errors import (
    MultiFragmentError,
    SizeLimitError,
    SmilesSyntaxError,
    StereoIgnoredWarning,
    ValenceError,
)
from .tables import AROMATIC_ELEMENTS, ORGANIC_SUBSET, max_valence, allowed_valences

SINGLE = "single"
DOUBLE = "double"
TRIPLE = "triple"
AROMATIC = "aromatic"

BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)

# Order contribution to the valence sum. Aromatic bonds count 1; the pi system
# is not double-counted (see implicit-H rule below).
ORDER_VALENCE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 1}

ISOMORPHISM_ATOM_LIMIT = 64


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    explicit_h: int = 0
    aromatic: bool = False
    in_ring: bool = False


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str = SINGLE
    in_ring: bool = False

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


class MolecularGraph:
    """Attributed, connected, undirected molecular graph.

    Instances are treated as immutable after construction. Construction
    validates connectivity, valence, and aromatic placement, and computes
    ring membership flags.
    """

    def __init__(self, atoms, bonds, positions=None):
        atoms = list(atoms)
        bonds = list(bonds)
        seen_pairs = set()
        for bond in bonds:
            if bond.a == bond.b:
                raise ValueError(f"self-loop on atom {bond.a}")
            if not (0 <= bond.a < len(atoms) and 0 <= bond.b < len(atoms)):
                raise ValueError("bond endpoint out of range")
            pair = frozenset((bond.a, bond.b))
            if pair in seen_pairs:
                raise ValueError(f"duplicate bond between {bond.a} and {bond.b}")
            seen_pairs.add(pair)

        adjacency = [[] for _ in atoms]
        for bidx, bond in enumerate(bonds):
            adjacency[bond.a].append((bond.b, bidx))
            adjacency[bond.b].append((bond.a, bidx))

        if atoms and not _connected(len(atoms), adjacency):
            raise ValueError("graph is not connected")

        ring_atoms, ring_bonds = _ring_membership(len(atoms), bonds, adjacency)

        # Unspecified bonds between aromatic atoms default to aromatic at parse
        # time; outside rings that reading is wrong (e.g. biphenyl linker), so
        # demote them to single before validation.
        for bidx, bond in enumerate(bonds):
            if bond.order == AROMATIC and bidx not in ring_bonds:
                bonds[bidx] = replace(bond, order=SINGLE)

        for idx, atom in enumerate(atoms):
            if atom.aromatic and idx not in ring_atoms:
                raise SmilesSyntaxError(
                    f"aromatic atom {atom.element} outside any ring",
                    positions[idx] if positions else 0,
                )

        atoms = [replace(a, in_ring=(i in ring_atoms)) for i, a in enumerate(atoms)]
        bonds = [replace(b, in_ring=(i in ring_bonds)) for i, b in enumerate(bonds)]

        for idx, atom in enumerate(atoms):
            total = _bond_order_sum(idx, bonds, adjacency) + atom.explicit_h
            limit = max_valence(atom.element, atom.formal_charge)
            if total > limit:
                raise ValenceError(
                    f"atom {idx} ({atom.element}) has valence {total} > {limit}",
                    positions[idx] if positions else None,
                )

        self.atoms = tuple(atoms)
        self.bonds = tuple(bonds)
        self.adjacency = tuple(tuple(nbrs) for nbrs in adjacency)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def degree(self, idx: int) -> int:
        return len(self.adjacency[idx])

    def bond_between(self, a: int, b: int) -> Bond | None:
        for nbr, bidx in self.adjacency[a]:
            if nbr == b:
                return self.bonds[bidx]
        return None

    def __repr__(self):
        return f"MolecularGraph({self.num_atoms} atoms, {self.num_bonds} bonds)"


def _connected(n, adjacency) -> bool:
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        v = stack.pop()
        for u, _ in adjacency[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == n


def _bond_order_sum(idx, bonds, adjacency) -> int:
    return sum(ORDER_VALENCE[bonds[bidx].order] for _, bidx in adjacency[idx])


def _ring_membership(n, bonds, adjacency):
    """Atoms/bonds on at least one simple cycle, from a spanning-tree cycle basis.

    The union of fundamental-cycle edges equals the set of non-bridge edges,
    which is exactly the set of ring bonds.
    """
    if n == 0:
        return set(), set()
    parent_bond = [-1] * n
    parent = [-1] * n
    depth = [-1] * n
    order = []
    stack = [0]
    depth[0] = 0
    while stack:
        v = stack.pop()
        order.append(v)
        for u, bidx in adjacency[v]:
            if depth[u] == -1:
                depth[u] = depth[v] + 1
                parent[u] = v
                parent_bond[u] = bidx
                stack.append(u)

    tree_bonds = {parent_bond[v] for v in range(n) if parent_bond[v] >= 0}
    ring_bonds: set[int] = set()
    for bidx, bond in enumerate(bonds):
        if bidx in tree_bonds:
            continue
        # back edge: walk both endpoints up to their common ancestor
        ring_bonds.add(bidx)
        u, v = bond.a, bond.b
        while u != v:
            if depth[u] < depth[v]:
                u, v = v, u
            ring_bonds.add(parent_bond[u])
            u = parent[u]

    ring_atoms: set[int] = set()
    for bidx in ring_bonds:
        ring_atoms.add(bonds[bidx].a)
        ring_atoms.add(bonds[bidx].b)
    return ring_atoms, ring_bonds


EMPTY_GRAPH = MolecularGraph([], [])


def perceive_rings(g: MolecularGraph) -> tuple[set[int], set[int]]:
    """Return (ring atom indices, ring bond indices) of ``g``."""
    adjacency = [list(nbrs) for nbrs in g.adjacency]
    return _ring_membership(g.num_atoms, list(g.bonds), adjacency)


def fundamental_cycles(g: MolecularGraph) -> list[set[int]]:
    """Atom sets of the spanning-tree cycle basis (one per back edge)."""
    if g.num_atoms == 0:
        return []
    parent = [-1] * g.num_atoms
    parent_bond = [-1] * g.num_atoms
    depth = [-1] * g.num_atoms
    stack = [0]
    depth[0] = 0
    while stack:
        v = stack.pop()
        for u, bidx in g.adjacency[v]:
            if depth[u] == -1:
                depth[u] = depth[v] + 1
                parent[u] = v
                parent_bond[u] = bidx
                stack.append(u)
    tree_bonds = {parent_bond[v] for v in range(g.num_atoms) if parent_bond[v] >= 0}
    cycles = []
    for bidx, bond in enumerate(g.bonds):
        if bidx in tree_bonds:
            continue
        cycle = {bond.a, bond.b}
        u, v = bond.a, bond.b
        while u != v:
            if depth[u] < depth[v]:
                u, v = v, u
            u = parent[u]
            cycle.add(u)
        cycles.append(cycle)
    return cycles


def induced_subgraph(
    g: MolecularGraph, keep: set[int], cap_hydrogens: bool = True
) -> MolecularGraph:
    """Subgraph on ``keep`` (must stay connected). With ``cap_hydrogens``,
    severed bond orders are converted into explicit hydrogens on the kept
    endpoint so total valence is preserved."""
    if not keep:
        return EMPTY_GRAPH
    old_to_new = {old: new for new, old in enumerate(sorted(keep))}
    atoms = []
    for old in sorted(keep):
        atom = g.atoms[old]
        lost = sum(
            ORDER_VALENCE[g.bonds[bidx].order]
            for nbr, bidx in g.adjacency[old]
            if nbr not in keep
        )
        h = atom.explicit_h + lost if cap_hydrogens else atom.explicit_h
        atoms.append(Atom(atom.element, atom.formal_charge, h, atom.aromatic))
    bonds = [
        Bond(old_to_new[b.a], old_to_new[b.b], b.order)
        for b in g.bonds
        if b.a in keep and b.b in keep
    ]
    return MolecularGraph(atoms, bonds)


def derived_implicit_h(element: str, aromatic: bool, order_sum: int) -> int:
    """Implicit hydrogen count for an unbracketed atom.

    Aliphatic atoms fill up to the smallest allowed valence that fits the bond
    order sum. Aromatic atoms reserve one valence unit for the pi system.
    """
    if aromatic:
        return max(0, allowed_valences(element)[0] - order_sum - 1)
    for valence in allowed_valences(element):
        if order_sum <= valence:
            return valence - order_sum
    return 0


# --- SMILES parsing ---------------------------------------------------------

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?(?P<symbol>[A-Za-z][a-z]?)(?P<stereo>@{1,2})?"
    r"(?P<hcount>H\d*)?(?P<charge>\+\d+|-\d+|\++|-+)?$"
)

_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}


class _ParsedAtom:
    __slots__ = ("element", "aromatic", "charge", "explicit_h", "from_bracket", "position")

    def __init__(self, element, aromatic, charge, explicit_h, from_bracket, position):
        self.element = element
        self.aromatic = aromatic
        self.charge = charge
        self.explicit_h = explicit_h
        self.from_bracket = from_bracket
        self.position = position


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a connected :class:`MolecularGraph`.

    Raises :class:`SmilesSyntaxError`, :class:`ValenceError`, or
    :class:`MultiFragmentError` on bad input; errors carry 0-based character
    offsets. Stereochemistry marks are dropped with a warning.
    """
    if not isinstance(text, str) or not text.strip():
        raise SmilesSyntaxError("empty SMILES", 0)
    text = text.strip()
    if not text.isascii():
        raise SmilesSyntaxError("non-ASCII character in SMILES", 0)

    atoms: list[_ParsedAtom] = []
    raw_bonds: list[tuple[int, int, str | None, int]] = []  # (a, b, order, pos)
    branch_stack: list[int] = []
    branch_positions: list[int] = []
    ring_open: dict[int, tuple[int, str | None, int]] = {}
    prev_atom = -1
    pending_order: str | None = None
    pending_pos = -1
    stereo_seen = 0

    def add_atom(parsed: _ParsedAtom):
        nonlocal prev_atom, pending_order
        atoms.append(parsed)
        idx = len(atoms) - 1
        if prev_atom >= 0:
            raw_bonds.append((prev_atom, idx, pending_order, parsed.position))
        prev_atom = idx
        pending_order = None

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == ".":
            raise MultiFragmentError("multi-fragment SMILES not supported", i)
        if ch == "(":
            if prev_atom < 0:
                raise SmilesSyntaxError("branch with no preceding atom", i)
            branch_stack.append(prev_atom)
            branch_positions.append(i)
            i += 1
            continue
        if ch == ")":
            if not branch_stack:
                raise SmilesSyntaxError("unmatched ')'", i)
            if pending_order is not None:
                raise SmilesSyntaxError("dangling bond symbol before ')'", pending_pos)
            prev_atom = branch_stack.pop()
            branch_positions.pop()
            i += 1
            continue
        if ch in _BOND_SYMBOLS:
            if pending_order is not None:
                raise SmilesSyntaxError("two bond symbols in a row", i)
            pending_order = _BOND_SYMBOLS[ch]
            pending_pos = i
            i += 1
            continue
        if ch in "/\\":
            # directional single bond; geometry is dropped
            stereo_seen += 1
            if pending_order is None:
                pending_order = SINGLE
                pending_pos = i
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            if prev_atom < 0:
                raise SmilesSyntaxError("ring closure with no preceding atom", i)
            if ch == "%":
                if i + 2 >= n or not text[i + 1 : i + 3].isdigit():
                    raise SmilesSyntaxError("'%' needs two digits", i)
                ring_num = int(text[i + 1 : i + 3])
                width = 3
            else:
                ring_num = int(ch)
                width = 1
            if ring_num in ring_open:
                other, open_order, open_pos = ring_open.pop(ring_num)
                order = _merge_ring_orders(open_order, pending_order, i)
                if other == prev_atom:
                    raise SmilesSyntaxError("ring closure to the same atom", i)
                raw_bonds.append((other, prev_atom, order, i))
            else:
                ring_open[ring_num] = (prev_atom, pending_order, i)
            pending_order = None
            i += width
            continue
        if ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise SmilesSyntaxError("unclosed '['", i)
            parsed, stereo = _parse_bracket(text[i + 1 : end], i)
            stereo_seen += stereo
            add_atom(parsed)
            i = end + 1
            continue
        matched = _match_organic(text, i)
        if matched is None:
            raise SmilesSyntaxError(f"unexpected character {ch!r}", i)
        symbol, width = matched
        aromatic = symbol[0].islower()
        element = symbol.capitalize() if aromatic else symbol
        add_atom(_ParsedAtom(element, aromatic, 0, 0, False, i))
        i += width

    if branch_stack:
        raise SmilesSyntaxError("unclosed '('", branch_positions[-1])
    if ring_open:
        num, (_, _, pos) = next(iter(ring_open.items()))
        raise SmilesSyntaxError(f"unclosed ring index {num}", pos)
    if pending_order is not None:
        raise SmilesSyntaxError("dangling bond symbol", pending_pos)

    # resolve unspecified bond orders: aromatic between two aromatic atoms
    bonds = []
    for a, b, order, pos in raw_bonds:
        if order is None:
            order = AROMATIC if (atoms[a].aromatic and atoms[b].aromatic) else SINGLE
        bonds.append(Bond(a, b, order))

    order_sums = [0] * len(atoms)
    for bond in bonds:
        order_sums[bond.a] += ORDER_VALENCE[bond.order]
        order_sums[bond.b] += ORDER_VALENCE[bond.order]

    final_atoms = []
    for idx, pa in enumerate(atoms):
        h = pa.explicit_h
        if not pa.from_bracket:
            h = derived_implicit_h(pa.element, pa.aromatic, order_sums[idx])
        final_atoms.append(Atom(pa.element, pa.charge, h, pa.aromatic))

    if stereo_seen:
        warnings.warn(
            f"ignored {stereo_seen} stereochemistry mark(s)", StereoIgnoredWarning,
            stacklevel=2,
        )

    positions = [pa.position for pa in atoms]
    return MolecularGraph(final_atoms, bonds, positions=positions)


def _merge_ring_orders(open_order, close_order, pos):
    if open_order is None:
        return close_order
    if close_order is None or close_order == open_order:
        return open_order
    raise SmilesSyntaxError("conflicting bond orders at ring closure", pos)


def _match_organic(text, i):
    if text[i : i + 2] in ("Cl", "Br"):
        return text[i : i + 2], 2
    ch = text[i]
    if ch in "BCNOPSFI":
        return ch, 1
    if ch in AROMATIC_ELEMENTS:
        return ch, 1
    return None


def _parse_bracket(body: str, pos: int) -> tuple[_ParsedAtom, int]:
    m = _BRACKET_RE.match(body)
    if not m:
        raise SmilesSyntaxError(f"cannot parse bracket atom [{body}]", pos)
    if m.group("isotope"):
        raise SmilesSyntaxError("isotopes not supported", pos)
    symbol = m.group("symbol")
    aromatic = symbol[0].islower()
    element = symbol.capitalize() if aromatic else symbol
    if element not in ORGANIC_SUBSET:
        raise SmilesSyntaxError(f"unknown element {symbol!r}", pos)
    if aromatic and symbol not in AROMATIC_ELEMENTS:
        raise SmilesSyntaxError(f"element {element} cannot be aromatic", pos)
    hcount = 0
    if m.group("hcount"):
        digits = m.group("hcount")[1:]
        hcount = int(digits) if digits else 1
    charge = 0
    raw = m.group("charge")
    if raw:
        if raw in ("+", "-"):
            charge = 1 if raw == "+" else -1
        elif set(raw) == {"+"}:
            charge = len(raw)
        elif set(raw) == {"-"}:
            charge = -len(raw)
        else:
            charge = int(raw)
    stereo = 1 if m.group("stereo") else 0
    return _ParsedAtom(element, aromatic, charge, hcount, True, pos), stereo


# --- SMILES writing ---------------------------------------------------------


def canonical_ranks(g: MolecularGraph) -> list[int]:
    """Total atom order from iterative neighborhood refinement.

    Initial invariant is (element, charge, degree); refinement folds in sorted
    neighbor ranks until stable; remaining ties break by input index, so the
    order is deterministic for a given graph but not canonical across
    relabelings.
    """
    n = g.num_atoms
    keys = [
        (g.atoms[v].element, g.atoms[v].formal_charge, g.degree(v), g.atoms[v].explicit_h)
        for v in range(n)
    ]
    ranks = _dense_rank(keys)
    for _ in range(n):
        keys = [
            (ranks[v], tuple(sorted(ranks[u] for u, _ in g.adjacency[v])))
            for v in range(n)
        ]
        new_ranks = _dense_rank(keys)
        if new_ranks == ranks:
            break
        ranks = new_ranks
    order = sorted(range(n), key=lambda v: (ranks[v], v))
    final = [0] * n
    for position, v in enumerate(order):
        final[v] = position
    return final


def _dense_rank(keys):
    uniq = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [uniq[k] for k in keys]


def write_smiles(g: MolecularGraph) -> str:
    """Serialize ``g``; re-parsing yields an isomorphic graph."""
    if g.num_atoms == 0:
        return ""
    ranks = canonical_ranks(g)
    start = ranks.index(0)

    # DFS spanning tree following rank order; non-tree edges become closures
    children: dict[int, list[tuple[int, int]]] = {v: [] for v in range(g.num_atoms)}
    back_edges: list[tuple[int, int, int]] = []  # (first_seen, later, bond_idx)
    visited = {start}
    seen_bonds = set()
    visit_order = {start: 0}

    def explore(v):
        for u, bidx in sorted(g.adjacency[v], key=lambda t: ranks[t[0]]):
            if bidx in seen_bonds:
                continue
            if u in visited:
                seen_bonds.add(bidx)
                back_edges.append((u, v, bidx))
            else:
                seen_bonds.add(bidx)
                visited.add(u)
                visit_order[u] = len(visit_order)
                children[v].append((u, bidx))
                explore(u)

    explore(start)

    opens: dict[int, list[tuple[int, int]]] = {}
    closes: dict[int, list[tuple[int, int]]] = {}
    for u, v, bidx in back_edges:
        first, later = (u, v) if visit_order[u] < visit_order[v] else (v, u)
        opens.setdefault(first, []).append((later, bidx))
        closes.setdefault(later, []).append((first, bidx))

    digit_for_bond: dict[int, int] = {}
    free_digits = list(range(99, 0, -1))
    out: list[str] = []

    def bond_token(bond: Bond) -> str:
        both_aromatic = g.atoms[bond.a].aromatic and g.atoms[bond.b].aromatic
        default = AROMATIC if both_aromatic else SINGLE
        if bond.order == default:
            return ""
        return {SINGLE: "-", DOUBLE: "=", TRIPLE: "#", AROMATIC: ":"}[bond.order]

    def digit_token(d: int) -> str:
        return str(d) if d <= 9 else f"%{d:02d}"

    def emit(v):
        out.append(_atom_token(g, v))
        for _, bidx in sorted(closes.get(v, []), key=lambda t: digit_for_bond[t[1]]):
            d = digit_for_bond.pop(bidx)
            out.append(bond_token(g.bonds[bidx]) + digit_token(d))
            free_digits.append(d)
            free_digits.sort(reverse=True)
        for _, bidx in opens.get(v, []):
            d = free_digits.pop()
            digit_for_bond[bidx] = d
            out.append(bond_token(g.bonds[bidx]) + digit_token(d))
        kids = children[v]
        for child, bidx in kids[:-1]:
            out.append("(" + bond_token(g.bonds[bidx]))
            emit(child)
            out.append(")")
        if kids:
            child, bidx = kids[-1]
            out.append(bond_token(g.bonds[bidx]))
            emit(child)

    emit(start)
    return "".join(out)


def _atom_token(g: MolecularGraph, v: int) -> str:
    atom = g.atoms[v]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    order_sum = sum(ORDER_VALENCE[g.bonds[b].order] for _, b in g.adjacency[v])
    plain_h = derived_implicit_h(atom.element, atom.aromatic, order_sum)
    if atom.formal_charge == 0 and atom.explicit_h == plain_h:
        return symbol
    parts = [symbol]
    if atom.explicit_h == 1:
        parts.append("H")
    elif atom.explicit_h > 1:
        parts.append(f"H{atom.explicit_h}")
    q = atom.formal_charge
    if q == 1:
        parts.append("+")
    elif q == -1:
        parts.append("-")
    elif q > 1:
        parts.append(f"+{q}")
    elif q < -1:
        parts.append(f"-{abs(q)}")
    return "[" + "".join(parts) + "]"


# --- isomorphism -------------------------------------------------------------


def _atom_key(atom: Atom):
    return (atom.element, atom.formal_charge, atom.aromatic)


def graphs_isomorphic(a: MolecularGraph, b: MolecularGraph) -> bool:
    """Exact attribute-preserving isomorphism (element, charge, aromatic flag,
    bond order) via backtracking with degree/element pruning. Intended for
    graphs of at most 64 atoms."""
    if a.num_atoms > ISOMORPHISM_ATOM_LIMIT or b.num_atoms > ISOMORPHISM_ATOM_LIMIT:
        raise SizeLimitError(
            f"isomorphism search limited to {ISOMORPHISM_ATOM_LIMIT} atoms"
        )
    if a.num_atoms != b.num_atoms or a.num_bonds != b.num_bonds:
        return False
    if a.num_atoms == 0:
        return True
    if sorted(map(_atom_key, a.atoms)) != sorted(map(_atom_key, b.atoms)):
        return False
    if sorted(a.degree(v) for v in range(a.num_atoms)) != sorted(
        b.degree(v) for v in range(b.num_atoms)
    ):
        return False
    if sorted(x.order for x in a.bonds) != sorted(x.order for x in b.bonds):
        return False

    # visit a's atoms in a connected order so each new atom (after the first)
    # has a mapped neighbor to anchor on
    order = []
    seen = set()
    stack = [0]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        order.append(v)
        for u, _ in a.adjacency[v]:
            if u not in seen:
                stack.append(u)

    n = a.num_atoms
    mapping = [-1] * n
    used = [False] * n

    def feasible(u: int, v: int) -> bool:
        if _atom_key(a.atoms[u]) != _atom_key(b.atoms[v]):
            return False
        if a.degree(u) != b.degree(v):
            return False
        for nbr, bidx in a.adjacency[u]:
            img = mapping[nbr]
            if img >= 0:
                other = b.bond_between(v, img)
                if other is None or other.order != a.bonds[bidx].order:
                    return False
        mapped_back = sum(1 for nbr, _ in b.adjacency[v] if used[nbr])
        mapped_fwd = sum(1 for nbr, _ in a.adjacency[u] if mapping[nbr] >= 0)
        return mapped_back == mapped_fwd

    def search(pos: int) -> bool:
        if pos == n:
            return True
        u = order[pos]
        for v in range(n):
            if not used[v]:
                if feasible(u, v):
                    mapping[u] = v
                    used[v] = True
                    if search(pos + 1):
                        return True
                    mapping[u] = -1
                    used[v] = False
        return False

    return search(0)
