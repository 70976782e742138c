import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molprompt.errors import (
    MultiFragmentError,
    SizeLimitError,
    SmilesSyntaxError,
    StereoIgnoredWarning,
    ValenceError,
)
from molprompt.molgraph import (
    AROMATIC,
    DOUBLE,
    SINGLE,
    Atom,
    Bond,
    MolecularGraph,
    canonical_ranks,
    graphs_isomorphic,
    induced_subgraph,
    parse_smiles,
    perceive_rings,
    write_smiles,
)

SAMPLE_SMILES = [
    "C",
    "CC",
    "CCO",
    "c1ccccc1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "C1CCCCC1",
    "C1CC1CC2CC2",
    "c1ccc2ccccc2c1",
    "C1=CC=CC=C1C(=O)O",
    "CC(=O)OC",
    "CC(=O)Nc1ccccc1",
    "N#Cc1ccc(O)cc1",
    "[NH4+]",
    "[O-]C(=O)C",
    "O=S(=O)(N)c1ccccc1",
    "c1ccccc1-c2ccccc2",
    "C#CCO",
    "[O-][N+](=O)c1ccc(Cl)cc1",
    "c1ccoc1",
    "c1cc[nH]c1",
    "c1ccncc1",
    "c1ccsc1",
    "FC(F)(F)c1ccccc1",
    "CN(C)CCOC(=O)c1ccccc1",
]


class TestParse:
    def test_single_carbon(self):
        g = parse_smiles("C")
        assert g.num_atoms == 1
        assert g.num_bonds == 0
        assert g.atoms[0].element == "C"
        assert g.atoms[0].explicit_h == 4

    def test_benzene_topology(self):
        # hand enumeration: 6 aromatic carbons, 6 aromatic ring bonds
        g = parse_smiles("c1ccccc1")
        assert g.num_atoms == 6
        assert g.num_bonds == 6
        assert all(a.aromatic and a.in_ring for a in g.atoms)
        assert all(b.order == AROMATIC and b.in_ring for b in g.bonds)
        assert all(g.degree(v) == 2 for v in range(6))

    def test_benzoic_acid_kekule(self):
        # hand enumeration: 9 heavy atoms, ring flagged, one C=O on the
        # carboxyl carbon
        g = parse_smiles("C1=CC=CC=C1C(=O)O")
        assert g.num_atoms == 9
        ring_atoms, ring_bonds = perceive_rings(g)
        assert len(ring_atoms) == 6
        assert len(ring_bonds) == 6
        carboxyl = next(
            v
            for v in range(g.num_atoms)
            if g.atoms[v].element == "C" and not g.atoms[v].in_ring
        )
        dbl = [
            b
            for b in g.bonds
            if carboxyl in (b.a, b.b) and b.order == DOUBLE
        ]
        assert len(dbl) == 1
        other = dbl[0].other(carboxyl)
        assert g.atoms[other].element == "O"

    def test_implicit_hydrogens(self):
        assert parse_smiles("CCO").atoms[2].explicit_h == 1
        assert parse_smiles("c1ccncc1").atoms[3].explicit_h == 0
        assert parse_smiles("c1cc[nH]c1").atoms[3].explicit_h == 1

    def test_charges(self):
        g = parse_smiles("[NH4+]")
        assert g.atoms[0].formal_charge == 1
        assert g.atoms[0].explicit_h == 4
        g = parse_smiles("[O-]C")
        assert g.atoms[0].formal_charge == -1

    def test_stereo_dropped_with_warning(self):
        with pytest.warns(StereoIgnoredWarning):
            g = parse_smiles("F/C=C/F")
        assert g.num_atoms == 4
        with pytest.warns(StereoIgnoredWarning):
            parse_smiles("N[C@H](C)C(=O)O")

    @pytest.mark.parametrize(
        "bad,exc,pos",
        [
            ("", SmilesSyntaxError, 0),
            ("C(C", SmilesSyntaxError, 1),
            ("CC)", SmilesSyntaxError, 2),
            ("C1CC", SmilesSyntaxError, 1),
            ("C%1C", SmilesSyntaxError, 1),
            ("CXC", SmilesSyntaxError, 1),
            ("[Zz]", SmilesSyntaxError, 0),
            ("C=#C", SmilesSyntaxError, 2),
            ("C=", SmilesSyntaxError, 1),
            ("CC.CC", MultiFragmentError, 2),
        ],
    )
    def test_syntax_errors_carry_position(self, bad, exc, pos):
        with pytest.raises(exc) as err:
            parse_smiles(bad)
        assert err.value.position == pos

    def test_valence_error(self):
        with pytest.raises(ValenceError):
            parse_smiles("C(C)(C)(C)(C)C")
        with pytest.raises(ValenceError):
            parse_smiles("O(C)(C)C")

    def test_unclosed_bracket(self):
        with pytest.raises(SmilesSyntaxError):
            parse_smiles("[NH4")

    def test_conflicting_ring_orders(self):
        with pytest.raises(SmilesSyntaxError):
            parse_smiles("C=1CCCCC#1")

    def test_matching_ring_orders_ok(self):
        g = parse_smiles("C=1CCCCC=1")
        closure = [b for b in g.bonds if {b.a, b.b} == {0, 5}][0]
        assert closure.order == DOUBLE

    def test_two_digit_ring_closure(self):
        g = parse_smiles("C%10CCCCC%10")
        assert graphs_isomorphic(g, parse_smiles("C1CCCCC1"))

    def test_biphenyl_linker_is_single(self):
        g = parse_smiles("c1ccccc1c2ccccc2")
        linker = [b for b in g.bonds if not b.in_ring]
        assert len(linker) == 1
        assert linker[0].order == SINGLE

    def test_aromatic_atom_outside_ring_rejected(self):
        with pytest.raises(SmilesSyntaxError):
            parse_smiles("cc")


class TestRings:
    def test_acyclic_chain(self):
        ring_atoms, ring_bonds = perceive_rings(parse_smiles("CCCC"))
        assert ring_atoms == set()
        assert ring_bonds == set()

    def test_benzene_all_in_ring(self):
        g = parse_smiles("c1ccccc1")
        ring_atoms, ring_bonds = perceive_rings(g)
        assert ring_atoms == set(range(6))
        assert ring_bonds == set(range(6))

    def test_two_cyclopropanes_with_linker(self):
        # hand enumeration: 6 ring atoms; the two bonds touching the linker
        # carbon are not ring bonds
        g = parse_smiles("C1CC1CC2CC2")
        ring_atoms, ring_bonds = perceive_rings(g)
        assert len(ring_atoms) == 6
        assert 3 not in ring_atoms
        assert len(ring_bonds) == 6
        for bidx in set(range(g.num_bonds)) - ring_bonds:
            assert 3 in (g.bonds[bidx].a, g.bonds[bidx].b)

    def test_ring_flags_invariant_under_relabeling(self):
        a = parse_smiles("C1CC1CC2CC2")
        b = parse_smiles("C2CC2CC1CC1")
        assert [x.in_ring for x in a.atoms] == [x.in_ring for x in b.atoms]


class TestWrite:
    def test_single_carbon(self):
        assert write_smiles(parse_smiles("C")) == "C"

    def test_deterministic(self):
        g = parse_smiles("CCOC(=O)c1ccc(N)cc1")
        assert write_smiles(g) == write_smiles(g)

    @pytest.mark.parametrize("smiles", SAMPLE_SMILES)
    def test_round_trip_isomorphic(self, smiles):
        g = parse_smiles(smiles)
        again = parse_smiles(write_smiles(g))
        assert graphs_isomorphic(again, g)

    def test_double_round_trip_stable(self):
        for smiles in SAMPLE_SMILES:
            once = write_smiles(parse_smiles(smiles))
            twice = write_smiles(parse_smiles(once))
            assert once == twice


class TestIsomorphism:
    def test_identity(self):
        g = parse_smiles("CC(=O)Nc1ccccc1")
        assert graphs_isomorphic(g, g)

    def test_relabeling(self):
        assert graphs_isomorphic(parse_smiles("CCO"), parse_smiles("OCC"))

    def test_element_mismatch(self):
        assert not graphs_isomorphic(parse_smiles("CCO"), parse_smiles("CCN"))

    def test_bond_order_matters(self):
        assert not graphs_isomorphic(parse_smiles("C=CCC"), parse_smiles("CC=CC"))

    def test_charge_matters(self):
        assert not graphs_isomorphic(parse_smiles("[O-]C"), parse_smiles("OC"))

    def test_same_formula_different_topology(self):
        assert not graphs_isomorphic(parse_smiles("CCCC"), parse_smiles("CC(C)C"))

    def test_size_limit(self):
        big = parse_smiles("C" * 65)
        with pytest.raises(SizeLimitError):
            graphs_isomorphic(big, big)

    def test_canonical_ranks_total_order(self):
        g = parse_smiles("CC(=O)Nc1ccccc1")
        ranks = canonical_ranks(g)
        assert sorted(ranks) == list(range(g.num_atoms))


class TestSubgraph:
    def test_capped_hydrogens(self):
        g = parse_smiles("Cc1ccccc1")
        sub = induced_subgraph(g, set(range(1, 7)))
        assert graphs_isomorphic(sub, parse_smiles("c1ccccc1"))
        assert sum(a.explicit_h for a in sub.atoms) == 6

    def test_graph_validation(self):
        atoms = [Atom("C"), Atom("C")]
        with pytest.raises(ValueError):
            MolecularGraph(atoms, [Bond(0, 0)])
        with pytest.raises(ValueError):
            MolecularGraph(atoms, [Bond(0, 1), Bond(1, 0)])
        with pytest.raises(ValueError):
            MolecularGraph([Atom("C"), Atom("C")], [])


@st.composite
def random_alkane_graph(draw):
    """Random tree-shaped alkane; keeps every carbon within valence."""
    n = draw(st.integers(min_value=1, max_value=12))
    atoms = [Atom("C", explicit_h=4)]
    bonds = []
    degree = [0] * n
    for v in range(1, n):
        parent = draw(st.integers(min_value=0, max_value=v - 1))
        if degree[parent] >= 4:
            parent = min(range(v), key=lambda u: degree[u])
        bonds.append(Bond(parent, v))
        degree[parent] += 1
        degree[v] += 1
        atoms.append(Atom("C"))
    atoms = [Atom("C", explicit_h=4 - degree[v]) for v in range(n)]
    return MolecularGraph(atoms, bonds)


@settings(max_examples=60, deadline=None)
@given(random_alkane_graph())
def test_property_round_trip_random_trees(g):
    text = write_smiles(g)
    assert graphs_isomorphic(parse_smiles(text), g)
