"""Dataset ingestion, deterministic splits, and the bundled toy corpus.

The toy corpus is generated, not curated: ~300 molecules built by decorating
a dozen scaffolds with random substituents. Labels follow a fixed affine
formula over fingerprint bits plus a scaffold offset, so structure-property
signal exists by construction. The exact formula lives in
:func:`toy_label`; the shipped CSV is byte-reproducible from
:func:`make_toy_corpus`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .chemfeat import bemis_murcko_scaffold, morgan_fingerprint
from .errors import InputError, MolpromptError
from .molgraph import MolecularGraph, parse_smiles, write_smiles
from .perturb import attach_fragment, build_fragment_pool
from .spacemetrics import kmeans


@dataclass
class RejectedRow:
    row: int
    smiles: str
    reason: str


@dataclass
class Dataset:
    name: str
    smiles: list[str]
    molecules: list[MolecularGraph]
    labels: np.ndarray | None = None
    rejects: list[RejectedRow] = field(default_factory=list)

    def __len__(self):
        return len(self.molecules)

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def subset(self, indices) -> "Dataset":
        indices = list(indices)
        return Dataset(
            self.name,
            [self.smiles[i] for i in indices],
            [self.molecules[i] for i in indices],
            None if self.labels is None else self.labels[indices],
        )


def load_dataset(
    path, smiles_column: str = "smiles", label_column: str | None = "label",
    name: str | None = None,
) -> Dataset:
    """Read a CSV with a header row; parse failures land in the rejects list
    with their row number and reason."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or smiles_column not in reader.fieldnames:
            raise InputError(f"{path}: missing column {smiles_column!r}")
        has_labels = label_column is not None and label_column in reader.fieldnames
        smiles, molecules, labels, rejects = [], [], [], []
        for rownum, row in enumerate(reader, start=2):  # 1-based incl. header
            text = (row[smiles_column] or "").strip()
            try:
                mol = parse_smiles(text)
                label = float(row[label_column]) if has_labels else None
            except MolpromptError as err:
                rejects.append(RejectedRow(rownum, text, str(err)))
                continue
            except ValueError as err:
                rejects.append(RejectedRow(rownum, text, f"bad label: {err}"))
                continue
            smiles.append(text)
            molecules.append(mol)
            if has_labels:
                labels.append(label)
    if not molecules:
        raise InputError(f"{path}: empty dataset after {len(rejects)} rejects")
    return Dataset(
        name or path.stem,
        smiles,
        molecules,
        np.array(labels) if has_labels else None,
        rejects,
    )


def scaffold_key(g: MolecularGraph) -> str:
    """Canonical scaffold SMILES; empty string for acyclic molecules."""
    return write_smiles(bemis_murcko_scaffold(g))


def scaffold_split(
    ds: Dataset,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    deterministic: bool = True,
    rng: np.random.Generator | None = None,
) -> tuple[list[int], list[int], list[int]]:
    """Group molecules by canonical scaffold and greedily fill train, then
    validation, then test. Groups never straddle splits."""
    _check_ratios(ratios)
    groups: dict[str, list[int]] = {}
    for idx, mol in enumerate(ds.molecules):
        groups.setdefault(scaffold_key(mol), []).append(idx)
    ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    if not deterministic:
        rng = rng or np.random.default_rng(0)
        order = rng.permutation(len(ordered))
        ordered = [ordered[int(i)] for i in order]

    n = len(ds)
    n_train = round(ratios[0] * n)
    n_val = round(ratios[1] * n)
    train, val, test = [], [], []
    for _, members in ordered:
        if len(train) < n_train:
            train.extend(members)
        elif len(val) < n_val:
            val.extend(members)
        else:
            test.extend(members)
    return train, val, test


def stratified_split(
    ds: Dataset,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    fewshot_fraction: float = 1.0,
    k: int = 10,
    rng: np.random.Generator | None = None,
) -> tuple[list[int], list[int], list[int]]:
    """Diversity-aware split: k-means on molecule fingerprints, then
    round-robin selection across clusters taking nearest-to-centroid first.

    The train quota shrinks with ``fewshot_fraction``; validation takes the
    next points in the same round-robin order and test takes the remainder,
    so the split stays disjoint and exhaustive at any fraction.
    """
    _check_ratios(ratios)
    if not 0 < fewshot_fraction <= 1:
        raise InputError("few-shot fraction must be in (0, 1]")
    rng = rng or np.random.default_rng(0)
    n = len(ds)
    fps = np.stack(
        [morgan_fingerprint(m).to_array() for m in ds.molecules]
    )
    assignment = kmeans(fps, min(k, n), rng)
    centroids = np.stack(
        [fps[assignment.members(c)].mean(axis=0) for c in range(assignment.k)]
    )

    queues = []
    for c in range(assignment.k):
        members = assignment.members(c)
        dist = np.linalg.norm(fps[members] - centroids[c], axis=1)
        queues.append(list(members[np.argsort(dist, kind="stable")]))

    order: list[int] = []
    while any(queues):
        for q in queues:
            if q:
                order.append(int(q.pop(0)))

    n_train_full = round(ratios[0] * n)
    n_train = max(1, round(fewshot_fraction * n_train_full))
    n_val = round(ratios[1] * n)
    train = order[:n_train]
    val = order[n_train_full : n_train_full + n_val]
    leftover = order[n_train:n_train_full] + order[n_train_full + n_val :]
    return train, val, leftover


def _check_ratios(ratios):
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise InputError(f"split ratios must sum to 1, got {ratios}")


# --- toy corpus ----------------------------------------------------------------

TOY_SCAFFOLDS = (
    "c1ccccc1",
    "c1ccncc1",
    "c1ccoc1",
    "c1ccsc1",
    "c1cc[nH]c1",
    "c1cncnc1",
    "c1ccc2ccccc2c1",
    "C1CCCCC1",
    "C1CCCC1",
    "C1CCNCC1",
    "C1CCOC1",
    "C1CNCCN1",
)

_LABEL_BITS_SEED = 20240601
_LABEL_BIT_COUNT = 48
_LABEL_BASE = 6.0
_OFFSET_SPREAD = 2.0
_BIT_WEIGHT_SCALE = 0.8


def toy_label_weights(nbits: int = 512):
    """Frozen affine formula: (bit indices, bit weights, scaffold offsets)."""
    rng = np.random.default_rng(_LABEL_BITS_SEED)
    bits = rng.choice(nbits, size=_LABEL_BIT_COUNT, replace=False)
    weights = rng.normal(0.0, _BIT_WEIGHT_SCALE, size=_LABEL_BIT_COUNT)
    offsets = rng.uniform(-_OFFSET_SPREAD, _OFFSET_SPREAD, size=len(TOY_SCAFFOLDS))
    return bits, weights, offsets


def toy_label(g: MolecularGraph, scaffold_index: int) -> float:
    """Synthetic potency-like label: base + affine function of fingerprint
    bits + scaffold offset."""
    bits, weights, offsets = toy_label_weights()
    fp = morgan_fingerprint(g)
    active = np.array([float(fp.bits >> int(b) & 1) for b in bits])
    return float(_LABEL_BASE + active @ weights + offsets[scaffold_index])


def make_toy_corpus(n: int = 300, seed: int = 20240601) -> Dataset:
    """Generate the bundled corpus: scaffolds decorated with 1-3 random
    substituents, deduplicated, with deterministic synthetic labels."""
    rng = np.random.default_rng(seed)
    pool = build_fragment_pool()
    scaffold_graphs = [parse_smiles(s) for s in TOY_SCAFFOLDS]
    smiles_list: list[str] = []
    molecules: list[MolecularGraph] = []
    labels: list[float] = []
    seen: set[str] = set()
    attempts = 0
    while len(molecules) < n and attempts < n * 60:
        attempts += 1
        scaffold_idx = int(rng.integers(len(TOY_SCAFFOLDS)))
        mol = scaffold_graphs[scaffold_idx]
        n_subs = int(rng.integers(1, 4))
        ok = True
        for _ in range(n_subs):
            sites = [
                v
                for v in range(mol.num_atoms)
                if mol.atoms[v].in_ring
                and mol.degree(v) == 2
                and mol.atoms[v].explicit_h >= 1
            ]
            if not sites:
                ok = False
                break
            anchor = int(sites[int(rng.integers(len(sites)))])
            fragment = pool.fragments[int(rng.integers(len(pool.fragments)))]
            try:
                mol = attach_fragment(mol, anchor, fragment)
            except MolpromptError:
                ok = False
                break
        if not ok:
            continue
        text = write_smiles(mol)
        if text in seen:
            continue
        seen.add(text)
        # re-parse so the graph matches what reading the CSV produces; the
        # atom order then agrees byte-for-byte between make and load paths
        mol = parse_smiles(text)
        smiles_list.append(text)
        molecules.append(mol)
        labels.append(toy_label(mol, scaffold_idx))
    if len(molecules) < n:
        raise MolpromptError(f"toy corpus generation stalled at {len(molecules)}")
    return Dataset("toy", smiles_list, molecules, np.array(labels))


def toy_corpus_csv() -> str:
    ds = make_toy_corpus()
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["smiles", "label"])
    for text, label in zip(ds.smiles, ds.labels):
        writer.writerow([text, repr(float(label))])
    return out.getvalue()


def load_toy_corpus() -> Dataset:
    """The bundled corpus CSV (identical to ``make_toy_corpus()`` output)."""
    text = resources.files("molprompt").joinpath("data/toy_corpus.csv").read_text(
        encoding="utf-8"
    )
    ds = _dataset_from_csv_text(text, "toy")
    return ds


def _dataset_from_csv_text(text: str, name: str) -> Dataset:
    reader = csv.DictReader(io.StringIO(text))
    smiles, molecules, labels = [], [], []
    for row in reader:
        smiles.append(row["smiles"])
        molecules.append(parse_smiles(row["smiles"]))
        labels.append(float(row["label"]))
    return Dataset(name, smiles, molecules, np.array(labels))
