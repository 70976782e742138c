"""Conventional structural features: circular fingerprints, Tanimoto
similarity, Bemis-Murcko scaffolds, functional-group descriptors, and scalar
descriptors.

Fingerprinting hashes circular atom neighborhoods with a stable 64-bit hash;
duplicate environments are not deduplicated before folding, which is fine for
the similarity-relative uses in this package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .molgraph import (
    DOUBLE,
    EMPTY_GRAPH,
    SINGLE,
    TRIPLE,
    MolecularGraph,
    fundamental_cycles,
    induced_subgraph,
)
from .tables import atomic_mass, functional_group_names

_ORDER_CODE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, "aromatic": 4}


@dataclass(frozen=True)
class Fingerprint:
    """Folded circular fingerprint stored as an int bitmask."""

    bits: int
    nbits: int = 512
    radius: int = 2

    def popcount(self) -> int:
        return self.bits.bit_count()

    def on_bits(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.nbits) if self.bits >> i & 1)

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.nbits, dtype=np.float64)
        for i in self.on_bits():
            out[i] = 1.0
        return out


def _stable_hash(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def morgan_fingerprint(g: MolecularGraph, radius: int = 2, nbits: int = 512) -> Fingerprint:
    """Circular fingerprint: every atom invariant at every round sets one bit.

    The round-0 invariant hashes (element, degree, charge, explicit_h,
    in_ring, aromatic); round r hashes the previous invariant together with
    the sorted (bond order, neighbor invariant) list.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if nbits < 64 or nbits & (nbits - 1):
        raise ValueError("nbits must be a power of two >= 64")
    bits = 0
    invariants = []
    for idx, atom in enumerate(g.atoms):
        inv = _stable_hash(
            atom.element,
            g.degree(idx),
            atom.formal_charge,
            atom.explicit_h,
            atom.in_ring,
            atom.aromatic,
        )
        invariants.append(inv)
        bits |= 1 << (inv % nbits)
    for _ in range(radius):
        nxt = []
        for idx in range(g.num_atoms):
            env = sorted(
                (_ORDER_CODE[g.bonds[bidx].order], invariants[nbr])
                for nbr, bidx in g.adjacency[idx]
            )
            inv = _stable_hash(invariants[idx], tuple(env))
            nxt.append(inv)
            bits |= 1 << (inv % nbits)
        invariants = nxt
    return Fingerprint(bits, nbits, radius)


def environment_bit_trace(
    g: MolecularGraph, radius: int = 2, nbits: int = 512
) -> dict[tuple[int, int], int]:
    """Bit index set by each (atom, round) environment; introspection helper
    for debugging which neighborhoods light which fingerprint bits."""
    trace: dict[tuple[int, int], int] = {}
    invariants = []
    for idx, atom in enumerate(g.atoms):
        inv = _stable_hash(
            atom.element,
            g.degree(idx),
            atom.formal_charge,
            atom.explicit_h,
            atom.in_ring,
            atom.aromatic,
        )
        invariants.append(inv)
        trace[(idx, 0)] = inv % nbits
    for r in range(1, radius + 1):
        nxt = []
        for idx in range(g.num_atoms):
            env = sorted(
                (_ORDER_CODE[g.bonds[bidx].order], invariants[nbr])
                for nbr, bidx in g.adjacency[idx]
            )
            inv = _stable_hash(invariants[idx], tuple(env))
            nxt.append(inv)
            trace[(idx, r)] = inv % nbits
        invariants = nxt
    return trace


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; 1.0 when both fingerprints are empty."""
    if a.nbits != b.nbits:
        raise ValueError(f"fingerprint length mismatch: {a.nbits} != {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def fingerprint_matrix(fps: list[Fingerprint]) -> np.ndarray:
    """Stack fingerprints into an (n, nbits) float matrix."""
    return np.stack([fp.to_array() for fp in fps]) if fps else np.zeros((0, 0))


def scaffold_atoms(g: MolecularGraph) -> set[int]:
    """Indices of Bemis-Murcko scaffold atoms: rings, linkers, and exocyclic
    double/triple-bonded terminals attached to them."""
    if g.num_atoms == 0:
        return set()
    alive = set(range(g.num_atoms))
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if g.atoms[v].in_ring:
                continue
            deg = sum(1 for nbr, _ in g.adjacency[v] if nbr in alive)
            if deg <= 1:
                alive.discard(v)
                changed = True
    if not alive:
        return set()
    # keep exocyclic double/triple-bonded terminals (e.g. ring C=O)
    for bond in g.bonds:
        if bond.order in (DOUBLE, TRIPLE):
            if bond.a in alive and bond.b not in alive:
                alive.add(bond.b)
            elif bond.b in alive and bond.a not in alive:
                alive.add(bond.a)
    return alive


def bemis_murcko_scaffold(g: MolecularGraph) -> MolecularGraph:
    """Ring systems plus linkers; terminal side chains pruned. Acyclic
    molecules give the empty graph. Severed attachment points are capped
    with hydrogens."""
    alive = scaffold_atoms(g)
    if not alive:
        return EMPTY_GRAPH
    return induced_subgraph(g, alive, cap_hydrogens=True)


@dataclass(frozen=True)
class FunctionalGroupVector:
    counts: np.ndarray
    normalized: np.ndarray

    @property
    def names(self) -> tuple[str, ...]:
        return functional_group_names()


def functional_group_descriptors(g: MolecularGraph) -> FunctionalGroupVector:
    """Counts over the fixed 16-entry detector table.

    Detectors are local adjacency matchers applied in table order; a
    heteroatom claimed by an earlier pattern is invisible to later ones
    (so ester oxygens are not also ethers, etc.).
    """
    names = functional_group_names()
    counts = dict.fromkeys(names, 0)
    claimed: set[int] = set()

    def neighbors(v):
        return [(u, g.bonds[bidx]) for u, bidx in g.adjacency[v]]

    def elem(v):
        return g.atoms[v].element

    def carbonyl_oxygens(c):
        """Degree-1 oxygens double-bonded to carbon ``c``."""
        return [
            u
            for u, bond in neighbors(c)
            if elem(u) == "O" and bond.order == DOUBLE and g.degree(u) == 1
        ]

    for v, atom in enumerate(g.atoms):
        if atom.element != "O" or atom.aromatic or v in claimed:
            continue
        if atom.explicit_h >= 1 and g.degree(v) == 1:
            (u, bond) = neighbors(v)[0]
            if elem(u) == "C" and bond.order == SINGLE and not carbonyl_oxygens(u):
                counts["hydroxyl"] += 1
                claimed.add(v)

    def is_plain_amine_n(v, atom):
        if atom.element != "N" or atom.aromatic or atom.formal_charge != 0:
            return False
        if v in claimed:
            return False
        if any(bond.order != SINGLE for _, bond in neighbors(v)):
            return False
        return not any(elem(u) == "C" and carbonyl_oxygens(u) for u, _ in neighbors(v))

    for v, atom in enumerate(g.atoms):
        if is_plain_amine_n(v, atom) and g.degree(v) == 1 and atom.explicit_h == 2:
            counts["primary_amine"] += 1
            claimed.add(v)
    for v, atom in enumerate(g.atoms):
        if is_plain_amine_n(v, atom) and g.degree(v) >= 2:
            counts["sec_tert_amine"] += 1
            claimed.add(v)

    for v, atom in enumerate(g.atoms):
        if atom.element != "C" or v in claimed:
            continue
        ketos = [u for u in carbonyl_oxygens(v) if u not in claimed]
        if not ketos:
            continue
        single_o = [
            u
            for u, bond in neighbors(v)
            if elem(u) == "O" and bond.order == SINGLE and u not in claimed
        ]
        acid_o = [u for u in single_o if g.degree(u) == 1 and g.atoms[u].explicit_h >= 1]
        ester_o = [
            u
            for u in single_o
            if g.degree(u) == 2
            and all(elem(w) == "C" for w, _ in neighbors(u))
        ]
        amide_n = [
            u
            for u, bond in neighbors(v)
            if elem(u) == "N" and bond.order == SINGLE and u not in claimed
        ]
        if acid_o:
            counts["carboxylic_acid"] += 1
            claimed.update({v, ketos[0], acid_o[0]})
        elif ester_o:
            counts["ester"] += 1
            claimed.update({v, ketos[0], ester_o[0]})
        elif amide_n:
            counts["amide"] += 1
            claimed.update({v, ketos[0], amide_n[0]})

    for v, atom in enumerate(g.atoms):
        if atom.element == "C" and v not in claimed:
            ketos = [u for u in carbonyl_oxygens(v) if u not in claimed]
            if ketos:
                counts["carbonyl"] += 1
                claimed.update({v, ketos[0]})

    for v, atom in enumerate(g.atoms):
        if atom.element != "O" or atom.aromatic or v in claimed:
            continue
        nbrs = neighbors(v)
        if len(nbrs) == 2 and all(
            bond.order == SINGLE and elem(u) == "C" for u, bond in nbrs
        ):
            counts["ether"] += 1
            claimed.add(v)

    for v, atom in enumerate(g.atoms):
        if atom.element != "S" or atom.aromatic or v in claimed:
            continue
        nbrs = neighbors(v)
        if len(nbrs) == 2 and all(
            bond.order == SINGLE and elem(u) == "C" for u, bond in nbrs
        ):
            counts["thioether"] += 1
            claimed.add(v)

    for bond in g.bonds:
        if bond.order != TRIPLE:
            continue
        pair = {elem(bond.a), elem(bond.b)}
        if pair == {"C", "N"}:
            n = bond.a if elem(bond.a) == "N" else bond.b
            if g.degree(n) == 1 and n not in claimed:
                counts["nitrile"] += 1
                claimed.update({bond.a, bond.b})
        elif pair == {"C"}:
            deg1 = [x for x in (bond.a, bond.b) if g.degree(x) == 1]
            if deg1 and bond.a not in claimed and bond.b not in claimed:
                counts["terminal_alkyne"] += 1
                claimed.update({bond.a, bond.b})

    for v, atom in enumerate(g.atoms):
        if atom.element != "N" or v in claimed:
            continue
        term_o = [
            (u, bond)
            for u, bond in neighbors(v)
            if elem(u) == "O" and g.degree(u) == 1 and u not in claimed
        ]
        if len(term_o) >= 2 and any(bond.order == DOUBLE for _, bond in term_o):
            counts["nitro"] += 1
            claimed.add(v)
            claimed.update(u for u, _ in term_o[:2])

    counts["halogen"] = sum(1 for a in g.atoms if a.element in ("F", "Cl", "Br", "I"))

    for cycle in fundamental_cycles(g):
        if all(g.atoms[v].aromatic for v in cycle):
            counts["aromatic_ring"] += 1
        else:
            counts["aliphatic_ring"] += 1

    for v, atom in enumerate(g.atoms):
        if atom.element != "S" or v in claimed:
            continue
        dbl_o = [
            u
            for u, bond in neighbors(v)
            if elem(u) == "O" and bond.order == DOUBLE and g.degree(u) == 1
        ]
        if len(dbl_o) >= 2:
            counts["sulfonyl"] += 1
            claimed.add(v)
            claimed.update(dbl_o[:2])

    raw = np.array([counts[name] for name in names], dtype=np.int64)
    heavy = max(1, g.num_atoms)
    return FunctionalGroupVector(raw, raw.astype(np.float64) / heavy)


def scalar_descriptors(g: MolecularGraph) -> tuple[float, float, int]:
    """(molecular weight, scaffold weight, heavy atom count) in daltons.

    Weights include implicit/explicit hydrogens; the scaffold weight is 0 for
    acyclic molecules.
    """
    mw = molecular_weight(g)
    scaffold = bemis_murcko_scaffold(g)
    smw = molecular_weight(scaffold) if scaffold.num_atoms else 0.0
    return mw, smw, g.num_atoms


def molecular_weight(g: MolecularGraph) -> float:
    h = atomic_mass("H")
    return sum(atomic_mass(a.element) + h * a.explicit_h for a in g.atoms)
