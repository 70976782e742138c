"""Training orchestration: corpus featurization, pre-training over the three
channels, ROGI-driven prompt-weight initialization, fine-tuning with frozen
aggregators, representation probing, and the channel-activation ablation.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .chemfeat import (
    bemis_murcko_scaffold,
    fingerprint_matrix,
    functional_group_descriptors,
    morgan_fingerprint,
    scaffold_atoms,
    scalar_descriptors,
    tanimoto,
)
from .datasets import Dataset, stratified_split, scaffold_split
from .encoder import (
    CHANNELS,
    ModelConfig,
    ModelParams,
    encode_batch,
    init_params,
    prompt_aggregate_spans,
    save_checkpoint,
)
from .errors import EmptyClass, InputError, NumericError, NoPerturbationSite, NoValidFragment
from .losses import (
    LossBreakdown,
    PretrainBatchPlan,
    overall_pretrain_loss,
    sample_quadruplets,
)
from .perturb import FragmentPool, build_fragment_pool, scaffold_invariant_perturb, subgraph_mask
from .spacemetrics import (
    LabeledSpace,
    cliff_noncliff_ratio,
    detect_mmps,
    kmeans,
    min_max_normalize,
    rand_index,
    rogi,
)


@dataclass
class TrainConfig:
    seed: int = 0
    pretrain_epochs: int = 50
    finetune_epochs: int = 100
    batch_size: int = 32
    pretrain_lr: float = 1e-3
    finetune_lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    alpha_offset: float = 1.0
    quadruplet_budget: int = 4
    positives_per_anchor: int = 5
    probe_epochs: tuple = (0, 10, 20, 50, 100)
    split_ratios: tuple = (0.8, 0.1, 0.1)
    split_kind: str = "stratified"  # "stratified" | "scaffold"
    fewshot_fraction: float = 1.0
    hidden_dim: int = 64
    num_layers: int = 5
    heads: int = 4
    aggregate_values: bool = True
    layer_norm: bool = False
    grid_step: float = 0.05
    perturbation_bank: int = 8
    kmeans_k: int = 0  # 0: max(2, round(sqrt(n/2)))

    def __post_init__(self):
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise InputError("split ratios must sum to 1")
        if any(e < 0 for e in self.probe_epochs):
            raise InputError("probe epochs must be non-negative")
        if self.positives_per_anchor < 1:
            raise InputError("need at least one positive per anchor")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            hidden_dim=self.hidden_dim,
            num_layers=self.num_layers,
            heads=self.heads,
            aggregate_values=self.aggregate_values,
            layer_norm=self.layer_norm,
            seed=self.seed,
        )

    def clusters_for(self, n: int) -> int:
        if self.kmeans_k:
            return min(self.kmeans_k, n)
        return max(2, min(n, round(np.sqrt(n / 2))))

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        for key in ("probe_epochs", "split_ratios"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


@dataclass
class PromptWeights:
    logits: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        shifted = self.logits - self.logits.max()
        ex = np.exp(shifted)
        return ex / ex.sum()

    @classmethod
    def from_weights(cls, weights) -> "PromptWeights":
        weights = np.asarray(weights, dtype=np.float64)
        return cls(np.log(weights + 1e-8))


@dataclass
class CorpusFeatures:
    fingerprints: list
    scaffold_fps: list
    sim_molecule: np.ndarray
    sim_scaffold: np.ndarray
    scaffold_sets: list[set[int]]
    fg_matrix: np.ndarray
    descriptor_targets: np.ndarray  # raw (n, 3): mw, scaffold mw, heavy atoms
    target_mean: np.ndarray
    target_std: np.ndarray

    @property
    def standardized_targets(self) -> np.ndarray:
        return (self.descriptor_targets - self.target_mean) / self.target_std


def corpus_features(molecules) -> CorpusFeatures:
    fps = [morgan_fingerprint(m) for m in molecules]
    scaffold_graphs = [bemis_murcko_scaffold(m) for m in molecules]
    sfps = [morgan_fingerprint(s) for s in scaffold_graphs]
    n = len(molecules)
    sim_mol = np.eye(n)
    sim_scaf = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            sim_mol[i, j] = sim_mol[j, i] = tanimoto(fps[i], fps[j])
            sim_scaf[i, j] = sim_scaf[j, i] = tanimoto(sfps[i], sfps[j])
    fg = np.stack([functional_group_descriptors(m).normalized for m in molecules])
    targets = np.array([scalar_descriptors(m) for m in molecules], dtype=np.float64)
    mean = targets.mean(axis=0)
    std = np.maximum(targets.std(axis=0), 1e-8)
    return CorpusFeatures(
        fps,
        sfps,
        sim_mol,
        sim_scaf,
        [scaffold_atoms(m) for m in molecules],
        fg,
        targets,
        mean,
        std,
    )


def _perturbation_banks(molecules, pool: FragmentPool, size: int,
                        rng: np.random.Generator) -> list[list]:
    banks: list[list] = []
    for mol in molecules:
        variants = []
        for _ in range(size):
            try:
                variants.append(scaffold_invariant_perturb(mol, pool, rng))
            except (NoPerturbationSite, NoValidFragment):
                break
        banks.append(variants)
    return banks


def build_pretrain_plan(
    batch: list[int],
    molecules,
    features: CorpusFeatures,
    banks: list[list],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> PretrainBatchPlan:
    """Freeze all sampling decisions (masks, positives, quadruplets) for one
    batch so the loss becomes a pure function of the parameters."""
    p = cfg.positives_per_anchor
    anchors = [molecules[i] for i in batch]
    masked = []
    for mol in anchors:
        masked.extend(subgraph_mask(mol, rng) for _ in range(p))
    perturbed = []
    perturbable = []
    for i in batch:
        bank = banks[i]
        perturbable.append(bool(bank))
        if bank:
            picks = rng.choice(len(bank), size=p, replace=len(bank) < p)
            perturbed.extend(bank[int(x)] for x in picks)
        else:
            # no perturbation site: the molecule stands in for its positives
            # and is excluded from SCD anchor duty below
            perturbed.extend(molecules[i] for _ in range(p))

    cp_inputs = [masked[i * p] for i in range(len(batch))]
    cp_labels = [m.context_label for m in cp_inputs]

    sim_mcd = features.sim_molecule[np.ix_(batch, batch)]
    sim_scd = features.sim_scaffold[np.ix_(batch, batch)]
    mcd_quads = sample_quadruplets(
        sim_mcd, cfg.quadruplet_budget, rng, p, cfg.alpha_offset
    )
    scd_quads = [
        q
        for q in sample_quadruplets(
            sim_scd, cfg.quadruplet_budget, rng, p, cfg.alpha_offset
        )
        if perturbable[q.anchor]
    ]
    return PretrainBatchPlan(
        anchors=anchors,
        masked=masked,
        perturbed=perturbed,
        cp_inputs=cp_inputs,
        cp_labels=cp_labels,
        mcd_quadruplets=mcd_quads,
        scd_quadruplets=scd_quads,
        scaffold_sets=[features.scaffold_sets[i] for i in batch],
        align_targets=features.standardized_targets[batch],
        positives_per_anchor=p,
    )


def _batches(order: np.ndarray, batch_size: int) -> list[list[int]]:
    chunks = [
        [int(i) for i in order[start : start + batch_size]]
        for start in range(0, len(order), batch_size)
    ]
    if len(chunks) > 1 and len(chunks[-1]) < 3:
        chunks[-2].extend(chunks[-1])
        chunks.pop()
    return chunks


@dataclass
class PretrainResult:
    params: ModelParams
    epoch_losses: list[tuple[int, LossBreakdown]]
    features: CorpusFeatures

    def loss_csv(self) -> str:
        lines = ["epoch,mcd,scd,cp,regu,total"]
        for epoch, br in self.epoch_losses:
            lines.append(
                f"{epoch},{br.mcd:.8f},{br.scd:.8f},{br.cp:.8f},"
                f"{br.regu:.8f},{br.total:.8f}"
            )
        return "\n".join(lines) + "\n"


def pretrain(corpus: Dataset, cfg: TrainConfig, out_dir=None) -> PretrainResult:
    """Self-supervised pre-training over the three channels.

    Deterministic under a fixed config and seed: one generator drives batch
    order, masking, perturbation choice, and quadruplet sampling.
    """
    if len(corpus) < 3:
        raise InputError("pre-training needs at least 3 molecules")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.model_config())
    features = corpus_features(corpus.molecules)
    pool = build_fragment_pool()
    banks = _perturbation_banks(corpus.molecules, pool, cfg.perturbation_bank, rng)
    optimizer = Adam(
        params.tensors, lr=cfg.pretrain_lr, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.adam_eps,
    )

    probe_epochs = {e for e in cfg.probe_epochs if 0 < e <= cfg.pretrain_epochs}
    epoch_losses: list[tuple[int, LossBreakdown]] = []
    for epoch in range(1, cfg.pretrain_epochs + 1):
        order = rng.permutation(len(corpus))
        sums = np.zeros(5)
        batches = _batches(order, cfg.batch_size)
        for batch in batches:
            plan = build_pretrain_plan(
                batch, corpus.molecules, features, banks, cfg, rng
            )
            loss, breakdown = overall_pretrain_loss(plan, params)
            if not np.isfinite(loss.value):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}: {breakdown}"
                )
            optimizer.zero_grad()
            ad.backward(loss)
            optimizer.step()
            sums += (
                breakdown.mcd,
                breakdown.scd,
                breakdown.cp,
                breakdown.regu,
                breakdown.total,
            )
        mean = sums / len(batches)
        epoch_losses.append((epoch, LossBreakdown(*mean)))
        if out_dir is not None and epoch in probe_epochs:
            save_checkpoint(f"{out_dir}/checkpoint_epoch{epoch}.mspc", params)

    result = PretrainResult(params, epoch_losses, features)
    if out_dir is not None:
        save_checkpoint(f"{out_dir}/checkpoint.mspc", params)
        with open(f"{out_dir}/pretrain_losses.csv", "w", encoding="utf-8") as fh:
            fh.write(result.loss_csv())
    return result


def compute_channel_embeddings(
    molecules, params: ModelParams, batch_size: int = 64
) -> tuple[dict[str, np.ndarray], dict[str, list[np.ndarray]]]:
    """Per-channel graph vectors and (heads, atoms) attention rows."""
    embeddings: dict[str, list[np.ndarray]] = {c: [] for c in CHANNELS}
    attention: dict[str, list[np.ndarray]] = {c: [] for c in CHANNELS}
    for start in range(0, len(molecules), batch_size):
        chunk = molecules[start : start + batch_size]
        h, spans = encode_batch(chunk, params)
        for channel in CHANNELS:
            vecs, attn = prompt_aggregate_spans(h, spans, params, channel)
            embeddings[channel].append(vecs.value.copy())
            attention[channel].extend(
                attn.value[lo:hi].T.copy() for lo, hi in spans
            )
    return (
        {c: np.concatenate(v, axis=0) for c, v in embeddings.items()},
        attention,
    )


def composite_embedding(
    channel_embs: dict[str, np.ndarray], weights: np.ndarray
) -> np.ndarray:
    out = np.zeros_like(channel_embs[CHANNELS[0]])
    for channel, w in zip(CHANNELS, weights):
        out = out + w * channel_embs[channel]
    return out


def init_prompt_weights(
    channel_embs: dict[str, np.ndarray],
    labels,
    grid_step: float = 0.05,
) -> PromptWeights:
    """Exhaustive simplex grid search for the composite with minimum ROGI.

    Ties resolve to the lexicographically smallest (w_MCD, w_SCD, w_CP);
    strict improvement keeps the first minimum found in enumeration order.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all(np.isfinite(labels)):
        raise InputError("labels contain non-finite values")
    labels01 = min_max_normalize(labels)
    steps = round(1.0 / grid_step)
    best_weights = None
    best_value = np.inf
    for a in range(steps + 1):
        for b in range(steps + 1 - a):
            weights = np.array([a, b, steps - a - b], dtype=np.float64) / steps
            comp = composite_embedding(channel_embs, weights)
            value = rogi(LabeledSpace(comp, labels01, "euclidean"))
            if value < best_value - 1e-15:
                best_value = value
                best_weights = weights
    if best_weights is None:
        raise NumericError("ROGI grid search produced no finite candidate")
    return PromptWeights.from_weights(best_weights)


def simplex_grid(grid_step: float = 0.05) -> list[np.ndarray]:
    steps = round(1.0 / grid_step)
    return [
        np.array([a, b, steps - a - b], dtype=np.float64) / steps
        for a in range(steps + 1)
        for b in range(steps + 1 - a)
    ]


def r_squared(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        return 0.0
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def roc_auc(y_true, scores) -> float:
    """Rank-based AUC with midrank tie handling."""
    y_true = np.asarray(y_true, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    pos = y_true > 0.5
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        warnings.warn("ROC-AUC undefined for a single class; returning 0.5")
        return 0.5
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


@dataclass
class ProbeReport:
    epoch: int
    train_rogi: float
    train_rand_index: float
    validation_metric: float
    cliff_ratio: float | None
    prompt_weights: np.ndarray
    validation_embeddings: np.ndarray


@dataclass
class FinetuneResult:
    params: ModelParams
    probes: list[ProbeReport]
    epoch_losses: list[tuple[int, float]]
    split: tuple[list[int], list[int], list[int]]
    task: str
    aggregators_frozen: bool
    final_validation_metric: float
    y_mean: float = 0.0
    y_std: float = 1.0

    def probes_csv(self) -> str:
        lines = ["epoch,train_rogi,train_rand_index,validation_metric,cliff_ratio,w_mcd,w_scd,w_cp"]
        for probe in self.probes:
            ratio = "" if probe.cliff_ratio is None else f"{probe.cliff_ratio:.8f}"
            w = probe.prompt_weights
            lines.append(
                f"{probe.epoch},{probe.train_rogi:.8f},{probe.train_rand_index:.8f},"
                f"{probe.validation_metric:.8f},{ratio},"
                f"{w[0]:.8f},{w[1]:.8f},{w[2]:.8f}"
            )
        return "\n".join(lines) + "\n"


def _aggregator_bytes(params: ModelParams) -> bytes:
    return b"".join(
        params.tensors[name].value.tobytes()
        for name in sorted(params.aggregator_names())
    )


def finetune(
    ds: Dataset,
    cfg: TrainConfig,
    task: str = "regression",
    pretrained: ModelParams | None = None,
    split: tuple[list[int], list[int], list[int]] | None = None,
    fixed_weights: np.ndarray | None = None,
    out_dir=None,
    name: str = "finetune",
) -> FinetuneResult:
    """Fine-tune toward property labels with frozen aggregation modules.

    The composite representation is the prompt-weighted sum of channel
    vectors; prompt logits, encoder, and the linear head train. Prompt
    weights start at the ROGI-grid minimum unless ``fixed_weights`` pins
    them (then the logits are frozen too, as in the channel ablation).
    """
    if task not in ("regression", "classification"):
        raise InputError(f"unknown task {task!r}")
    if not ds.labeled:
        raise InputError("fine-tuning needs a labeled dataset")
    if not np.all(np.isfinite(ds.labels)):
        raise InputError("labels contain non-finite values")
    rng = np.random.default_rng(cfg.seed)
    if split is None:
        if cfg.split_kind == "scaffold":
            split = scaffold_split(ds, cfg.split_ratios)
        else:
            split = stratified_split(
                ds, cfg.split_ratios, cfg.fewshot_fraction, rng=rng
            )
    train_idx, val_idx, _ = split
    if not train_idx or not val_idx:
        raise InputError("empty train or validation split")

    params = (
        copy.deepcopy(pretrained) if pretrained is not None
        else init_params(cfg.model_config())
    )
    # fresh zero head: epoch-0 predictions sit at the label mean, so the
    # head grows along useful directions instead of unlearning random noise
    params["head/W"].value[:] = 0.0
    params["head/b"].value[:] = 0.0
    frozen_before = _aggregator_bytes(params)

    train_mols = [ds.molecules[i] for i in train_idx]
    val_mols = [ds.molecules[i] for i in val_idx]
    y_train = ds.labels[train_idx]
    y_val = ds.labels[val_idx]

    if task == "regression":
        y_mean, y_std = float(y_train.mean()), float(max(y_train.std(), 1e-8))
    else:
        y_mean, y_std = 0.0, 1.0
        if not set(np.unique(ds.labels)) <= {0.0, 1.0}:
            raise InputError("classification labels must be 0/1")
    y_fit = (y_train - y_mean) / y_std

    if fixed_weights is not None:
        pw = PromptWeights.from_weights(fixed_weights)
    else:
        train_embs, _ = compute_channel_embeddings(train_mols, params)
        pw = init_prompt_weights(train_embs, y_train, cfg.grid_step)
    params["prompt_logits"].value[:] = pw.logits[None, :]

    trainable = params.trainable(
        freeze_aggregators=True, freeze_prompt_logits=fixed_weights is not None
    )
    optimizer = Adam(
        trainable, lr=cfg.finetune_lr, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.adam_eps,
    )

    # probing inputs that do not depend on the model
    train_fp_matrix = fingerprint_matrix(
        [morgan_fingerprint(m) for m in train_mols]
    )
    val_features = corpus_features(val_mols) if len(val_mols) > 1 else None
    val_mmps = (
        detect_mmps(val_features.fingerprints, val_features.scaffold_fps, y_val)
        if val_features is not None
        else []
    )
    k_clusters = cfg.clusters_for(len(train_mols))
    labels01 = min_max_normalize(y_train)

    def predict_tensor(mols_batch) -> Tensor:
        h, spans = encode_batch(mols_batch, params)
        weights = ad.softmax(params["prompt_logits"], axis=1)
        comp: Tensor | None = None
        for c_idx, channel in enumerate(CHANNELS):
            vecs, _ = prompt_aggregate_spans(h, spans, params, channel)
            part = vecs * ad.slice_rows(weights.T, c_idx, c_idx + 1)
            comp = part if comp is None else comp + part
        return comp @ params["head/W"] + params["head/b"]

    def probe(epoch: int) -> ProbeReport:
        train_embs, _ = compute_channel_embeddings(train_mols, params)
        val_embs, _ = compute_channel_embeddings(val_mols, params)
        weights = PromptWeights(params["prompt_logits"].value[0].copy()).weights
        comp_train = composite_embedding(train_embs, weights)
        comp_val = composite_embedding(val_embs, weights)

        train_rogi = rogi(LabeledSpace(comp_train, labels01, "euclidean"))
        fp_clusters = kmeans(train_fp_matrix, k_clusters, np.random.default_rng(cfg.seed))
        emb_clusters = kmeans(comp_train, k_clusters, np.random.default_rng(cfg.seed))
        train_rand = rand_index(fp_clusters, emb_clusters)

        raw_pred = predict_tensor(val_mols).value[:, 0] * y_std + y_mean
        if task == "regression":
            val_metric = r_squared(y_val, raw_pred)
        else:
            val_metric = roc_auc(y_val, raw_pred)
        try:
            ratio = cliff_noncliff_ratio(comp_val, val_mmps) if val_mmps else None
        except EmptyClass:
            ratio = None
        report = ProbeReport(
            epoch, train_rogi, train_rand, val_metric, ratio, weights, comp_val
        )
        if out_dir is not None:
            np.savetxt(
                f"{out_dir}/{name}_embeddings_epoch{epoch}.csv",
                comp_val,
                delimiter=",",
            )
        return report

    probe_epochs = sorted({e for e in cfg.probe_epochs if e <= cfg.finetune_epochs})
    probes: list[ProbeReport] = []
    if 0 in probe_epochs:
        probes.append(probe(0))

    epoch_losses: list[tuple[int, float]] = []
    for epoch in range(1, cfg.finetune_epochs + 1):
        order = rng.permutation(len(train_mols))
        total = 0.0
        batches = [
            [int(i) for i in order[s : s + cfg.batch_size]]
            for s in range(0, len(order), cfg.batch_size)
        ]
        for batch in batches:
            pred = predict_tensor([train_mols[i] for i in batch])
            target = y_fit[batch][:, None]
            if task == "regression":
                loss = ad.mean_all(ad.square(pred - Tensor(target)))
            else:
                loss = ad.mean_all(ad.bce_with_logits(pred, target))
            if not np.isfinite(loss.value):
                raise NumericError(f"non-finite fine-tune loss at epoch {epoch}")
            optimizer.zero_grad()
            ad.backward(loss)
            optimizer.step()
            total += loss.item() * len(batch)
        epoch_losses.append((epoch, total / len(train_mols)))
        if epoch in probe_epochs:
            probes.append(probe(epoch))

    frozen_ok = _aggregator_bytes(params) == frozen_before
    final_metric = probes[-1].validation_metric if probes else probe(cfg.finetune_epochs).validation_metric
    result = FinetuneResult(
        params, probes, epoch_losses, split, task, frozen_ok, final_metric,
        y_mean, y_std,
    )
    if out_dir is not None:
        with open(f"{out_dir}/{name}_probes.csv", "w", encoding="utf-8") as fh:
            fh.write(result.probes_csv())
        with open(f"{out_dir}/{name}_losses.csv", "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for epoch, value in epoch_losses:
                fh.write(f"{epoch},{value:.8f}\n")
        save_checkpoint(f"{out_dir}/{name}.mspc", params)
    return result


def predict_values(
    params: ModelParams, molecules, y_mean: float = 0.0, y_std: float = 1.0,
    batch_size: int = 64,
) -> np.ndarray:
    """Head predictions from the prompt-weighted composite representation."""
    out = []
    weights = PromptWeights(params["prompt_logits"].value[0].copy()).weights
    for start in range(0, len(molecules), batch_size):
        chunk = molecules[start : start + batch_size]
        h, spans = encode_batch(chunk, params)
        comp = None
        for channel, w in zip(CHANNELS, weights):
            vecs, _ = prompt_aggregate_spans(h, spans, params, channel)
            part = vecs.value * w
            comp = part if comp is None else comp + part
        pred = comp @ params["head/W"].value + params["head/b"].value
        out.append(pred[:, 0])
    return np.concatenate(out) * y_std + y_mean


ABLATION_MASKS = (
    ("MCD",),
    ("SCD",),
    ("CP",),
    ("MCD", "SCD"),
    ("SCD", "CP"),
    ("MCD", "CP"),
    ("MCD", "SCD", "CP"),
)


def channel_ablation(
    ds: Dataset,
    cfg: TrainConfig,
    pretrained: ModelParams,
    task: str = "regression",
    split=None,
    masks=ABLATION_MASKS,
) -> list[dict]:
    """Fine-tune once per channel-activation mask with prompt weights pinned
    uniform over the active channels (logits frozen)."""
    rows = []
    for mask in masks:
        if not mask:
            raise InputError("ablation mask cannot be empty")
        weights = np.array(
            [1.0 / len(mask) if c in mask else 0.0 for c in CHANNELS]
        )
        result = finetune(
            ds, cfg, task=task, pretrained=pretrained, split=split,
            fixed_weights=weights, name="ablate_" + "_".join(mask).lower(),
        )
        rows.append(
            {
                "mask": "+".join(mask),
                "weights": weights,
                "validation_metric": result.final_validation_metric,
            }
        )
    return rows
