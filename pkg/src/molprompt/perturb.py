"""Positive-sample generation for the contrastive channels: attribute-level
subgraph masking, and scaffold-invariant side-chain replacement from a
fragment pool.

Fragment replacement deletes a terminal side-chain fragment of at most 4
atoms and attaches a pool fragment (also at most 4 atoms) with a single bond
at the same anchor, so every perturbation changes fewer than five atoms and
preserves the Bemis-Murcko scaffold.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .chemfeat import scaffold_atoms
from .errors import InputError, NoPerturbationSite, NoValidFragment, ValenceError
from .losses import ContextLabel, build_context_label
from .molgraph import (
    ORDER_VALENCE,
    SINGLE,
    Atom,
    Bond,
    MolecularGraph,
    derived_implicit_h,
    parse_smiles,
)
from .tables import max_valence

MAX_FRAGMENT_ATOMS = 4


@dataclass(frozen=True)
class MaskedGraph:
    """A molecule with one subgraph (center + one-hop neighbors) masked at
    the attribute level; topology is untouched."""

    base: MolecularGraph
    masked_atoms: frozenset[int]
    context_label: ContextLabel


def subgraph_mask(g: MolecularGraph, rng: np.random.Generator) -> MaskedGraph:
    """Mask a uniformly random center atom together with its neighbors."""
    if g.num_atoms < 2:
        raise ValueError("subgraph masking needs at least 2 atoms")
    center = int(rng.integers(g.num_atoms))
    masked = frozenset({center} | {u for u, _ in g.adjacency[center]})
    return MaskedGraph(g, masked, build_context_label(g, masked))


@dataclass(frozen=True)
class PoolFragment:
    graph: MolecularGraph
    attachment: int
    smiles: str

    def free_valence(self) -> int:
        """Capacity for one more bond at the attachment atom; hydrogens are
        displaceable and do not count against it."""
        atom = self.graph.atoms[self.attachment]
        order_sum = sum(
            ORDER_VALENCE[self.graph.bonds[b].order]
            for _, b in self.graph.adjacency[self.attachment]
        )
        return max_valence(atom.element, atom.formal_charge) - order_sum


@dataclass(frozen=True)
class FragmentPool:
    fragments: tuple[PoolFragment, ...]
    source: str

    def __len__(self):
        return len(self.fragments)


def build_fragment_pool(source: str | Path = "builtin") -> FragmentPool:
    """Load and validate a fragment pool.

    ``builtin`` loads the packaged substituent table; otherwise ``source`` is
    a UTF-8 file of "SMILES<TAB>attachment_index" lines with '#' comments.
    """
    if source == "builtin":
        text = resources.files("molprompt").joinpath("data/fragments.tsv").read_text(
            encoding="utf-8"
        )
        label = "builtin"
    else:
        path = Path(source)
        if not path.exists():
            raise InputError(f"fragment pool file not found: {path}")
        text = path.read_text(encoding="utf-8")
        label = str(path)

    fragments: list[PoolFragment] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise InputError(
                f"{label}:{lineno}: expected 'SMILES<TAB>attachment_index'"
            )
        smiles, idx_text = parts
        try:
            idx = int(idx_text)
        except ValueError:
            raise InputError(f"{label}:{lineno}: bad attachment index {idx_text!r}")
        try:
            graph = parse_smiles(smiles)
        except InputError as err:
            raise InputError(f"{label}:{lineno}: {err}") from err
        if graph.num_atoms > MAX_FRAGMENT_ATOMS:
            raise InputError(
                f"{label}:{lineno}: fragment has {graph.num_atoms} heavy atoms "
                f"(limit {MAX_FRAGMENT_ATOMS})"
            )
        if not 0 <= idx < graph.num_atoms:
            raise InputError(f"{label}:{lineno}: attachment index {idx} out of range")
        fragment = PoolFragment(graph, idx, smiles)
        if fragment.free_valence() < 1:
            raise InputError(
                f"{label}:{lineno}: attachment atom has no free valence"
            )
        fragments.append(fragment)
    if not fragments:
        raise InputError(f"{label}: empty fragment pool")
    return FragmentPool(tuple(fragments), label)


def _side_chain_components(g: MolecularGraph, scaffold: set[int]) -> list[set[int]]:
    outside = set(range(g.num_atoms)) - scaffold
    components = []
    remaining = set(outside)
    while remaining:
        seed = remaining.pop()
        comp = {seed}
        stack = [seed]
        while stack:
            v = stack.pop()
            for u, _ in g.adjacency[v]:
                if u in outside and u not in comp:
                    comp.add(u)
                    remaining.discard(u)
                    stack.append(u)
        components.append(comp)
    return components


def _deletion_plan(g: MolecularGraph, comp: set[int], scaffold: set[int]):
    """Pick the atoms to delete from one side chain and the anchor they hang
    off. Returns (delete_set, anchor) or None if no single-bond cut exists.
    Side chains are trees: ring atoms always belong to the scaffold."""
    root = None
    scaffold_anchor = None
    for v in comp:
        for u, bidx in g.adjacency[v]:
            if u in scaffold:
                root, scaffold_anchor = v, u
                break
        if root is not None:
            break
    if len(comp) <= MAX_FRAGMENT_ATOMS:
        return comp, scaffold_anchor

    parent: dict[int, int] = {root: -1}
    depth = {root: 0}
    order = [root]
    stack = [root]
    while stack:
        v = stack.pop()
        for u, _ in g.adjacency[v]:
            if u in comp and u not in parent:
                parent[u] = v
                depth[u] = depth[v] + 1
                order.append(u)
                stack.append(u)
    size = dict.fromkeys(comp, 1)
    for v in reversed(order):
        if parent[v] != -1:
            size[parent[v]] += size[v]

    deepest = max(comp, key=lambda v: (depth[v], v))
    # highest ancestor of the deepest leaf whose subtree still fits and whose
    # bond to its parent is single
    path = []
    v = deepest
    while v != root:
        path.append(v)
        v = parent[v]
    cut = None
    for v in reversed(path):  # nearest to root first
        if size[v] <= MAX_FRAGMENT_ATOMS and g.bond_between(parent[v], v).order == SINGLE:
            cut = v
            break
    if cut is None:
        return None
    delete = {
        u for u in comp if _is_descendant(u, cut, parent)
    }
    return delete, parent[cut]


def _is_descendant(node: int, ancestor: int, parent: dict[int, int]) -> bool:
    while node != -1:
        if node == ancestor:
            return True
        node = parent[node]
    return False


def scaffold_invariant_perturb(
    g: MolecularGraph, pool: FragmentPool, rng: np.random.Generator
) -> MolecularGraph:
    """Replace one terminal side-chain fragment with a pool fragment.

    The scaffold is untouched, fewer than five atoms are deleted and fewer
    than five added, and the result passes valence validation. Raises
    NoPerturbationSite for scaffold-free or side-chain-free molecules and
    NoValidFragment when no pool fragment fits.
    """
    scaffold = scaffold_atoms(g)
    if not scaffold:
        raise NoPerturbationSite("molecule has no scaffold")
    components = _side_chain_components(g, scaffold)
    if not components:
        raise NoPerturbationSite("molecule has no side chain")

    plan = None
    for idx in rng.permutation(len(components)):
        plan = _deletion_plan(g, components[int(idx)], scaffold)
        if plan is not None:
            break
    if plan is None:
        raise NoPerturbationSite("no side chain offers a single-bond cut")
    delete, anchor = plan

    for fidx in rng.permutation(len(pool.fragments)):
        fragment = pool.fragments[int(fidx)]
        try:
            return _splice(g, delete, anchor, fragment)
        except ValenceError:
            continue
    raise NoValidFragment("no pool fragment fits the attachment site")


def attach_fragment(
    g: MolecularGraph, anchor: int, fragment: PoolFragment
) -> MolecularGraph:
    """Attach a pool fragment to ``anchor`` with a single bond (no deletion).
    Raises ValenceError when the site cannot take another bond."""
    return _splice(g, set(), anchor, fragment)


def _anchor_hydrogens(atom: Atom, new_order_sum: int, replaced: bool) -> int:
    """Hydrogens left on an attachment site after gaining a bond.

    When the new bond replaces a severed one the count is unchanged. A fresh
    bond on an aromatic site substitutes a hydrogen (pyridine-type ring atoms
    without one are not valid sites; rejecting them keeps scaffold
    hydrogen-capping exact); other sites shed hydrogens only on overflow.
    """
    if replaced:
        return atom.explicit_h
    if atom.aromatic:
        if atom.explicit_h < 1:
            raise ValenceError("aromatic site has no substitutable hydrogen")
        return atom.explicit_h - 1
    overflow = new_order_sum + atom.explicit_h - max_valence(
        atom.element, atom.formal_charge
    )
    return atom.explicit_h - overflow if overflow > 0 else atom.explicit_h


def _splice(
    g: MolecularGraph, delete: set[int], anchor: int, fragment: PoolFragment
) -> MolecularGraph:
    keep = sorted(set(range(g.num_atoms)) - delete)
    old_to_new = {old: new for new, old in enumerate(keep)}
    atoms = [g.atoms[old] for old in keep]
    bonds = [
        Bond(old_to_new[b.a], old_to_new[b.b], b.order)
        for b in g.bonds
        if b.a not in delete and b.b not in delete
    ]
    anchor_order_sum = 1 + sum(
        ORDER_VALENCE[g.bonds[bidx].order]
        for nbr, bidx in g.adjacency[anchor]
        if nbr not in delete
    )
    replaced = any(nbr in delete for nbr, _ in g.adjacency[anchor])
    old_anchor = g.atoms[anchor]
    atoms[old_to_new[anchor]] = Atom(
        old_anchor.element,
        old_anchor.formal_charge,
        max(0, _anchor_hydrogens(old_anchor, anchor_order_sum, replaced)),
        old_anchor.aromatic,
    )

    frag = fragment.graph
    offset = len(atoms)
    for v, atom in enumerate(frag.atoms):
        h = atom.explicit_h
        if v == fragment.attachment:
            order_sum = sum(
                ORDER_VALENCE[frag.bonds[b].order] for _, b in frag.adjacency[v]
            )
            h = min(h, derived_implicit_h(atom.element, atom.aromatic, order_sum + 1))
        atoms.append(Atom(atom.element, atom.formal_charge, h, atom.aromatic))
    bonds.extend(
        Bond(b.a + offset, b.b + offset, b.order) for b in frag.bonds
    )
    bonds.append(Bond(old_to_new[anchor], fragment.attachment + offset, SINGLE))
    return MolecularGraph(atoms, bonds)
