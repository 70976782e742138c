"""Pre-training objectives: adaptive-margin quadruplet contrastive loss,
context-prediction losses, attention and channel-alignment regularizers, and
the overall weighted sum.

The quadruplet loss extends the plain triplet hinge with structure-aware
margins: the anchor-negative margin scales with (1 - Tanimoto similarity),
and a third hinge orders the two negatives by their similarity gap to the
anchor. All distances are Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .chemfeat import functional_group_descriptors
from .encoder import CHANNELS, ModelParams, encode_batch, prompt_aggregate_spans
from .molgraph import BOND_ORDERS, MolecularGraph
from .tables import ORGANIC_SUBSET

REGULARIZATION_FACTOR = 0.1
DISTANCE_EPS = 1e-12

# channel order (MCD, SCD, CP); molecular weight leans on whole-molecule and
# local views, scaffold weight on scaffold and local views, heavy-atom count
# is neutral
ALIGNMENT_PRESETS = (
    (0.45, 0.10, 0.45),
    (0.10, 0.45, 0.45),
    (1 / 3, 1 / 3, 1 / 3),
)


@dataclass(frozen=True)
class ContextLabel:
    """Targets for the context-prediction channel."""

    atom_presence: np.ndarray  # multi-hot over the element vocabulary
    bond_presence: np.ndarray  # multi-hot over bond orders
    fg_target: np.ndarray  # normalized functional-group descriptors

    @property
    def presence(self) -> np.ndarray:
        return np.concatenate([self.atom_presence, self.bond_presence])


def build_context_label(g: MolecularGraph, masked_atoms: frozenset[int]) -> ContextLabel:
    """Element/bond-order presence of the masked region plus the molecule's
    normalized functional-group vector."""
    atom_presence = np.zeros(len(ORGANIC_SUBSET))
    for v in masked_atoms:
        atom_presence[ORGANIC_SUBSET.index(g.atoms[v].element)] = 1.0
    bond_presence = np.zeros(len(BOND_ORDERS))
    for bond in g.bonds:
        if bond.a in masked_atoms and bond.b in masked_atoms:
            bond_presence[BOND_ORDERS.index(bond.order)] = 1.0
    fg = functional_group_descriptors(g).normalized
    return ContextLabel(atom_presence, bond_presence, fg)


@dataclass(frozen=True)
class Quadruplet:
    anchor: int
    positive: int  # augmentation slot of the anchor
    j: int
    k: int
    alpha1_ij: float
    alpha1_ik: float
    alpha2: float


def adaptive_margins(sim_ij: float, sim_ik: float, alpha_offset: float = 1.0):
    """(alpha1_ij, alpha1_ik, alpha2): margins scale with dissimilarity, and
    the negative-ordering margin with the similarity gap."""
    alpha1_ij = alpha_offset * (1.0 - sim_ij)
    alpha1_ik = alpha_offset * (1.0 - sim_ik)
    alpha2 = alpha_offset * (sim_ij - sim_ik)
    return alpha1_ij, alpha1_ik, alpha2


def sample_quadruplets(
    sim_matrix: np.ndarray,
    budget_per_anchor: int,
    rng: np.random.Generator,
    positives_per_anchor: int = 5,
    alpha_offset: float = 1.0,
) -> list[Quadruplet]:
    """Per anchor, keep up to ``budget_per_anchor`` (j, k) pairs sampled
    without replacement with probability proportional to
    max(0, sim_ij - sim_ik) + 1e-6. Pairs with a negative gap are dropped, so
    every retained quadruplet has alpha2 >= 0. Positive slots are assigned
    round-robin."""
    sim_matrix = np.asarray(sim_matrix, dtype=np.float64)
    n = sim_matrix.shape[0]
    if n < 3:
        raise ValueError("quadruplet sampling needs a batch of at least 3")
    quads: list[Quadruplet] = []
    for i in range(n):
        row = sim_matrix[i]
        gap = row[:, None] - row[None, :]  # gap[j, k] = sim_ij - sim_ik
        valid = gap >= 0
        valid[i, :] = False
        valid[:, i] = False
        np.fill_diagonal(valid, False)
        js, ks = np.nonzero(valid)
        if len(js) == 0:
            continue
        weights = gap[js, ks] + 1e-6
        take = min(budget_per_anchor, len(js))
        probs = weights / weights.sum()
        chosen = rng.choice(len(js), size=take, replace=False, p=probs)
        for slot, c in enumerate(sorted(chosen.tolist())):
            j, k = int(js[c]), int(ks[c])
            a1_ij, a1_ik, a2 = adaptive_margins(row[j], row[k], alpha_offset)
            quads.append(
                Quadruplet(i, slot % positives_per_anchor, j, k, a1_ij, a1_ik, a2)
            )
    return quads


def _row_distances(a: Tensor, b: Tensor) -> Tensor:
    diff = a - b
    return ad.sqrt(ad.tensor_sum(ad.square(diff), axis=1), eps=DISTANCE_EPS)


def adaptive_margin_loss(
    embeddings: Tensor,
    positive_embeddings: Tensor,
    quadruplets: list[Quadruplet],
    positives_per_anchor: int = 5,
    include_negative_ordering: bool = True,
) -> Tensor:
    """Mean over quadruplets of the three-hinge adaptive-margin loss.

    ``positive_embeddings`` holds augmentation rows laid out as
    anchor * positives_per_anchor + slot. Disabling the negative-ordering
    hinge reduces the formulation to a pair of plain triplet losses.
    """
    if not quadruplets:
        return Tensor(0.0)
    ai = [q.anchor for q in quadruplets]
    pi = [q.anchor * positives_per_anchor + q.positive for q in quadruplets]
    ji = [q.j for q in quadruplets]
    ki = [q.k for q in quadruplets]
    a1_ij = np.array([q.alpha1_ij for q in quadruplets])
    a1_ik = np.array([q.alpha1_ik for q in quadruplets])
    a2 = np.array([q.alpha2 for q in quadruplets])

    anchors = ad.gather_rows(embeddings, ai)
    positives = ad.gather_rows(positive_embeddings, pi)
    neg_j = ad.gather_rows(embeddings, ji)
    neg_k = ad.gather_rows(embeddings, ki)

    d_pos = _row_distances(anchors, positives)
    d_j = _row_distances(anchors, neg_j)
    d_k = _row_distances(anchors, neg_k)

    total = ad.relu(d_pos - d_j + a1_ij) + ad.relu(d_pos - d_k + a1_ik)
    if include_negative_ordering:
        total = total + ad.relu(d_j - d_k + a2)
    return ad.mean_all(total)


def cp_loss(
    presence_logits: Tensor, fg_pred: Tensor, labels: list[ContextLabel]
) -> Tensor:
    """Binary cross-entropy (with logits) over the presence vocabulary plus
    smooth-L1 (threshold 1.0) against the functional-group targets."""
    presence = np.stack([lab.presence for lab in labels])
    fg = np.stack([lab.fg_target for lab in labels])
    bce = ad.mean_all(ad.bce_with_logits(presence_logits, presence))
    huber = ad.mean_all(ad.smooth_l1(fg_pred, Tensor(fg), beta=1.0))
    return bce + huber


def _attention_targets(spans, target_mode, scaffold_sets, total_rows):
    """Per-atom target row and averaging weight for the attention
    regularizer; excluded graphs (empty scaffold in scaffold mode) get zero
    weight but still count in the denominator."""
    target = np.zeros((total_rows, 1))
    weight = np.zeros((total_rows, 1))
    n_graphs = len(spans)
    for idx, (lo, hi) in enumerate(spans):
        size = hi - lo
        if target_mode == "all-atoms":
            target[lo:hi] = 1.0 / size
            weight[lo:hi] = 1.0 / (size * n_graphs)
        else:
            scaffold = scaffold_sets[idx] if scaffold_sets else set()
            if not scaffold:
                continue
            rows = lo + np.array(sorted(scaffold))
            target[rows] = 1.0 / len(scaffold)
            weight[lo:hi] = 1.0 / (size * n_graphs)
    return target, weight


def attention_regularizer_spans(
    attention: Tensor,
    spans,
    target_mode: str,
    scaffold_sets: list[set[int]] | None = None,
) -> Tensor:
    """Span-batched attention regularizer over (atoms, heads) columns."""
    if target_mode not in ("all-atoms", "scaffold-only"):
        raise ValueError(f"unknown target mode {target_mode!r}")
    heads = attention.shape[1]
    target, weight = _attention_targets(
        spans, target_mode, scaffold_sets, attention.shape[0]
    )
    mean_col = ad.tensor_sum(attention, axis=1, keepdims=True) / heads
    return ad.tensor_sum(ad.smooth_l1(mean_col, Tensor(target), beta=1.0) * weight)


def attention_regularizer(
    attention_maps: list[Tensor],
    target_mode: str,
    scaffold_sets: list[set[int]] | None = None,
) -> Tensor:
    """Smooth-L1 between head-averaged attention rows and the atom-importance
    target: uniform over all atoms, or uniform over scaffold atoms with zero
    elsewhere. Graphs with empty scaffolds contribute zero in scaffold mode.
    """
    if target_mode not in ("all-atoms", "scaffold-only"):
        raise ValueError(f"unknown target mode {target_mode!r}")
    total: Tensor | None = None
    for idx, attn in enumerate(attention_maps):
        heads, atoms = attn.shape
        if target_mode == "all-atoms":
            target = np.full((1, atoms), 1.0 / atoms)
        else:
            scaffold = scaffold_sets[idx] if scaffold_sets else set()
            if not scaffold:
                continue
            target = np.zeros((1, atoms))
            target[0, sorted(scaffold)] = 1.0 / len(scaffold)
        mean_row = ad.tensor_sum(attn, axis=0, keepdims=True) / heads
        term = ad.mean_all(ad.smooth_l1(mean_row, Tensor(target), beta=1.0))
        total = term if total is None else total + term
    if total is None:
        return Tensor(0.0)
    return total / len(attention_maps)


def alignment_regularizer(
    channel_embeddings: dict[str, Tensor],
    heads: list[tuple[Tensor, Tensor]],
    targets: np.ndarray,
    presets=ALIGNMENT_PRESETS,
) -> Tensor:
    """Composite representations under fixed prompt-weight presets predict
    standardized scalar descriptors through per-task linear heads; smooth-L1,
    summed over the three tasks."""
    total: Tensor | None = None
    for task, preset in enumerate(presets):
        composite: Tensor | None = None
        for channel, weight in zip(CHANNELS, preset):
            part = channel_embeddings[channel] * weight
            composite = part if composite is None else composite + part
        w, b = heads[task]
        pred = composite @ w + b
        target = targets[:, task : task + 1]
        term = ad.mean_all(ad.smooth_l1(pred, Tensor(target), beta=1.0))
        total = term if total is None else total + term
    return total


@dataclass
class PretrainBatchPlan:
    """One batch with all sampling decisions frozen.

    Separating sampling from evaluation keeps the loss a deterministic
    function of the parameters, which the finite-difference checker requires.
    """

    anchors: list[MolecularGraph]
    masked: list  # positives_per_anchor MaskedGraphs per anchor, flattened
    perturbed: list[MolecularGraph]  # same layout, SCD positives
    cp_inputs: list  # one MaskedGraph per anchor
    cp_labels: list[ContextLabel]
    mcd_quadruplets: list[Quadruplet]
    scd_quadruplets: list[Quadruplet]
    scaffold_sets: list[set[int]]
    align_targets: np.ndarray  # (batch, 3) standardized descriptors
    positives_per_anchor: int = 5


@dataclass
class LossBreakdown:
    mcd: float
    scd: float
    cp: float
    regu: float
    total: float


def overall_pretrain_loss(
    plan: PretrainBatchPlan, params: ModelParams
) -> tuple[Tensor, LossBreakdown]:
    """L_MCD + L_SCD + L_CP + 0.1 * (attention + alignment regularizers).

    Each item set (anchors, masked positives, perturbed positives) runs
    through the message-passing stack once; channels share the node matrix
    and differ only in their aggregators.
    """
    p = plan.positives_per_anchor

    h_anchor, spans_anchor = encode_batch(plan.anchors, params)
    anchor_mcd, attn_mcd = prompt_aggregate_spans(h_anchor, spans_anchor, params, "MCD")
    anchor_scd, attn_scd = prompt_aggregate_spans(h_anchor, spans_anchor, params, "SCD")
    anchor_cp, _ = prompt_aggregate_spans(h_anchor, spans_anchor, params, "CP")

    h_masked, spans_masked = encode_batch(plan.masked, params)
    pos_mcd, _ = prompt_aggregate_spans(h_masked, spans_masked, params, "MCD")
    mcd = adaptive_margin_loss(anchor_mcd, pos_mcd, plan.mcd_quadruplets, p)

    h_pert, spans_pert = encode_batch(plan.perturbed, params)
    pos_scd, _ = prompt_aggregate_spans(h_pert, spans_pert, params, "SCD")
    scd = adaptive_margin_loss(anchor_scd, pos_scd, plan.scd_quadruplets, p)

    # the CP inputs are the first masked positive per anchor; reuse their
    # already-encoded rows instead of a fourth pass
    cp_rows: list[int] = []
    cp_spans: list[tuple[int, int]] = []
    for i in range(len(plan.anchors)):
        lo, hi = spans_masked[i * p]
        cp_spans.append((len(cp_rows), len(cp_rows) + hi - lo))
        cp_rows.extend(range(lo, hi))
    h_cp = ad.gather_rows(h_masked, cp_rows)
    masked_cp, _ = prompt_aggregate_spans(h_cp, cp_spans, params, "CP")
    presence_logits = masked_cp @ params["cp/W_presence"] + params["cp/b_presence"]
    fg_pred = masked_cp @ params["cp/W_fg"] + params["cp/b_fg"]
    cp = cp_loss(presence_logits, fg_pred, plan.cp_labels)

    regu = attention_regularizer_spans(attn_mcd, spans_anchor, "all-atoms")
    regu = regu + attention_regularizer_spans(
        attn_scd, spans_anchor, "scaffold-only", plan.scaffold_sets
    )
    align_heads = [
        (params[f"align/task{t}/W"], params[f"align/task{t}/b"]) for t in range(3)
    ]
    channel_embs = {"MCD": anchor_mcd, "SCD": anchor_scd, "CP": anchor_cp}
    regu = regu + alignment_regularizer(channel_embs, align_heads, plan.align_targets)

    total = mcd + scd + cp + regu * REGULARIZATION_FACTOR
    breakdown = LossBreakdown(
        mcd.item(), scd.item(), cp.item(), regu.item(), total.item()
    )
    return total, breakdown
