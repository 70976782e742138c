"""Command-line pipeline: parsing, featurization, splits, perturbation,
pre-training, fine-tuning, ablation, and the chemical-space probing reports.

Exit codes: 0 on success, 2 on input errors, 3 on numeric failure. Tables are
UTF-8 CSV with a header row; scalar summaries are JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .chemfeat import (
    bemis_murcko_scaffold,
    functional_group_descriptors,
    morgan_fingerprint,
    scalar_descriptors,
    tanimoto,
)
from .datasets import (
    Dataset,
    load_dataset,
    load_toy_corpus,
    scaffold_split,
    stratified_split,
)
from .encoder import CHANNELS, load_checkpoint
from .errors import InputError, MolpromptError, NoPerturbationSite, NoValidFragment, NumericError
from .molgraph import parse_smiles, perceive_rings, write_smiles
from .perturb import build_fragment_pool, scaffold_invariant_perturb
from .spacemetrics import (
    LabeledSpace,
    correlation_report,
    hierarchical_three_stage,
    kmeans,
    min_max_normalize,
    rand_index,
    rogi,
)
from .tables import functional_group_names
from .training import (
    TrainConfig,
    channel_ablation,
    composite_embedding,
    compute_channel_embeddings,
    corpus_features,
    finetune,
    pretrain,
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global RNG seed")
    common.add_argument("--config", type=Path, default=None,
                        help="JSON file mirroring the training config fields")
    common.add_argument("--out", type=Path, default=None, help="output directory")

    parser = argparse.ArgumentParser(
        prog="molprompt",
        description="prompt-guided multi-channel molecular representation learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def dataset_args(p):
        p.add_argument("--input", type=Path, help="CSV with a header row")
        p.add_argument("--toy", action="store_true", help="use the bundled corpus")
        p.add_argument("--smiles-column", default="smiles")
        p.add_argument("--label-column", default="label")

    p = sub.add_parser("parse", parents=[common],
                       help="parse SMILES and write canonical forms")
    p.add_argument("smiles", nargs="*", help="SMILES strings")
    p.add_argument("--input", type=Path)
    p.add_argument("--smiles-column", default="smiles")

    p = sub.add_parser("featurize", parents=[common],
                       help="fingerprints and descriptors")
    dataset_args(p)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--nbits", type=int, default=512)

    p = sub.add_parser("split", parents=[common], help="scaffold or stratified split")
    dataset_args(p)
    p.add_argument("--kind", choices=("scaffold", "stratified"), default="scaffold")
    p.add_argument("--fraction", type=float, default=1.0,
                   help="few-shot train fraction (stratified only)")

    p = sub.add_parser("perturb", parents=[common],
                       help="scaffold-invariant perturbations")
    dataset_args(p)
    p.add_argument("--count", type=int, default=1, help="perturbations per molecule")
    p.add_argument("--pool", default="builtin", help="fragment pool file")

    p = sub.add_parser("pretrain", parents=[common],
                       help="run self-supervised pre-training")
    dataset_args(p)

    p = sub.add_parser("finetune", parents=[common], help="fine-tune toward labels")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path,
                   help="pretrained model (omit for from-scratch)")
    p.add_argument("--task", choices=("regression", "classification"),
                   default="regression")
    p.add_argument("--fewshot", type=float, default=1.0)

    p = sub.add_parser("ablate", parents=[common], help="channel-activation ablation")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--task", choices=("regression", "classification"),
                   default="regression")

    p = sub.add_parser("rogi", parents=[common],
                       help="landscape roughness of a labeled dataset")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path, help="also report per-channel ROGI")

    p = sub.add_parser("probe", parents=[common],
                       help="representation metrics of a checkpoint")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("cluster-hierarchy", parents=[common],
                       help="three-stage hierarchical clustering")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--ks", default="8,4,3", help="stage cluster counts")
    p.add_argument("--top", type=int, default=10)

    p = sub.add_parser("correlate", parents=[common],
                       help="embedding distance vs conventional similarity")
    dataset_args(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pairs", type=int, default=1000)
    return parser


def _load_config(args) -> TrainConfig:
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = TrainConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def _load_input(args, need_labels=False) -> Dataset:
    if getattr(args, "toy", False):
        return load_toy_corpus()
    if args.input is None:
        raise InputError("provide --input CSV or --toy")
    label_col = getattr(args, "label_column", "label")
    ds = load_dataset(args.input, args.smiles_column, label_col)
    for reject in ds.rejects:
        print(f"reject row {reject.row}: {reject.smiles!r}: {reject.reason}",
              file=sys.stderr)
    if need_labels and not ds.labeled:
        raise InputError(f"{args.input}: label column {label_col!r} required")
    return ds


def _out_dir(args) -> Path:
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {path}")


def _write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")


def _embeddings_for(ds, checkpoint):
    params = load_checkpoint(checkpoint)
    embs, attn = compute_channel_embeddings(ds.molecules, params)
    return params, embs, attn


def cmd_parse(args) -> int:
    texts = list(args.smiles)
    if args.input is not None:
        ds = load_dataset(args.input, args.smiles_column, None)
        texts.extend(ds.smiles)
    if not texts:
        raise InputError("no SMILES given")
    rows = []
    for text in texts:
        g = parse_smiles(text)
        ring_atoms, _ = perceive_rings(g)
        rows.append([text, write_smiles(g), g.num_atoms, g.num_bonds, len(ring_atoms)])
    _write_csv(_out_dir(args) / "parse.csv",
               ["smiles", "canonical", "atoms", "bonds", "ring_atoms"], rows)
    return 0


def cmd_featurize(args) -> int:
    ds = _load_input(args)
    names = list(functional_group_names())
    rows = []
    for text, mol in zip(ds.smiles, ds.molecules):
        fp = morgan_fingerprint(mol, args.radius, args.nbits)
        mw, smw, heavy = scalar_descriptors(mol)
        fg = functional_group_descriptors(mol)
        rows.append(
            [text, f"{fp.bits:0{args.nbits // 4}x}", f"{mw:.3f}", f"{smw:.3f}", heavy]
            + fg.counts.tolist()
        )
    _write_csv(
        _out_dir(args) / "featurize.csv",
        ["smiles", "fingerprint_hex", "molecular_weight", "scaffold_weight",
         "heavy_atoms"] + names,
        rows,
    )
    return 0


def cmd_split(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed)
    if args.kind == "scaffold":
        train, val, test = scaffold_split(ds, cfg.split_ratios)
    else:
        train, val, test = stratified_split(
            ds, cfg.split_ratios, args.fraction, rng=rng
        )
    subset = {}
    for name, indices in (("train", train), ("validation", val), ("test", test)):
        for i in indices:
            subset[i] = name
    rows = [[i, ds.smiles[i], subset[i]] for i in range(len(ds))]
    _write_csv(_out_dir(args) / "split.csv", ["index", "smiles", "subset"], rows)
    return 0


def cmd_perturb(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    pool = build_fragment_pool(args.pool)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for idx, (text, mol) in enumerate(zip(ds.smiles, ds.molecules)):
        for _ in range(args.count):
            try:
                out = scaffold_invariant_perturb(mol, pool, rng)
                rows.append([idx, text, write_smiles(out), ""])
            except (NoPerturbationSite, NoValidFragment) as err:
                rows.append([idx, text, "", str(err)])
                break
    _write_csv(_out_dir(args) / "perturb.csv",
               ["index", "smiles", "perturbed", "error"], rows)
    return 0


def cmd_pretrain(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    out = _out_dir(args)
    pretrain(ds, cfg, out_dir=out)
    print(f"wrote {out / 'checkpoint.mspc'}")
    print(f"wrote {out / 'pretrain_losses.csv'}")
    return 0


def cmd_finetune(args) -> int:
    ds = _load_input(args, need_labels=True)
    cfg = _load_config(args)
    cfg.fewshot_fraction = args.fewshot
    out = _out_dir(args)
    pretrained = load_checkpoint(args.checkpoint) if args.checkpoint else None
    result = finetune(ds, cfg, task=args.task, pretrained=pretrained, out_dir=out)
    _write_json(
        out / "finetune_summary.json",
        {
            "task": args.task,
            "final_validation_metric": result.final_validation_metric,
            "aggregators_frozen": result.aggregators_frozen,
            "prompt_weights": result.probes[-1].prompt_weights.tolist(),
        },
    )
    return 0


def cmd_ablate(args) -> int:
    ds = _load_input(args, need_labels=True)
    cfg = _load_config(args)
    pretrained = load_checkpoint(args.checkpoint)
    rows = channel_ablation(ds, cfg, pretrained, task=args.task)
    _write_csv(
        _out_dir(args) / "ablation.csv",
        ["mask", "w_mcd", "w_scd", "w_cp", "validation_metric"],
        [
            [r["mask"], *[f"{w:.4f}" for w in r["weights"]],
             f"{r['validation_metric']:.6f}"]
            for r in rows
        ],
    )
    return 0


def cmd_rogi(args) -> int:
    ds = _load_input(args, need_labels=True)
    labels01 = min_max_normalize(ds.labels)
    fps = np.stack([morgan_fingerprint(m).to_array() for m in ds.molecules])
    payload = {
        "fingerprint": rogi(LabeledSpace(fps, labels01, metric="tanimoto")),
        "n_molecules": len(ds),
    }
    if args.checkpoint:
        _, embs, _ = _embeddings_for(ds, args.checkpoint)
        for channel in CHANNELS:
            payload[channel.lower()] = rogi(
                LabeledSpace(embs[channel], labels01)
            )
        uniform = composite_embedding(embs, np.full(3, 1 / 3))
        payload["composite_uniform"] = rogi(LabeledSpace(uniform, labels01))
    _write_json(_out_dir(args) / "rogi.json", payload)
    return 0


def cmd_probe(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    params, embs, attn = _embeddings_for(ds, args.checkpoint)
    features = corpus_features(ds.molecules)
    payload: dict = {"n_molecules": len(ds)}

    fps = np.stack([fp.to_array() for fp in features.fingerprints])
    k = cfg.clusters_for(len(ds))
    fp_clusters = kmeans(fps, k, np.random.default_rng(cfg.seed))
    for channel in CHANNELS:
        emb_clusters = kmeans(embs[channel], k, np.random.default_rng(cfg.seed))
        payload[f"rand_index_{channel.lower()}"] = rand_index(fp_clusters, emb_clusters)
    if ds.labeled:
        labels01 = min_max_normalize(ds.labels)
        for channel in CHANNELS:
            payload[f"rogi_{channel.lower()}"] = rogi(
                LabeledSpace(embs[channel], labels01)
            )
    masses = []
    for i, attn_map in enumerate(attn["SCD"]):
        scaffold = features.scaffold_sets[i]
        if scaffold:
            masses.append(float(attn_map.mean(axis=0)[sorted(scaffold)].sum()))
    payload["scd_scaffold_attention_mass"] = float(np.mean(masses)) if masses else None
    _write_json(_out_dir(args) / "probe.json", payload)
    return 0


def cmd_cluster_hierarchy(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    try:
        ks = tuple(int(x) for x in args.ks.split(","))
        if len(ks) != 3:
            raise ValueError
    except ValueError:
        raise InputError(f"--ks must be three comma-separated integers, got {args.ks!r}")
    _, embs, _ = _embeddings_for(ds, args.checkpoint)
    features = corpus_features(ds.molecules)
    scaffold_keys = [write_smiles(bemis_murcko_scaffold(m)) for m in ds.molecules]
    scaf_fp = np.stack([fp.to_array() for fp in features.scaffold_fps])
    report = hierarchical_three_stage(
        embs, features.fg_matrix, scaf_fp, scaffold_keys,
        stage_ks=ks, top_m=args.top, rng=np.random.default_rng(cfg.seed),
    )
    out = _out_dir(args)
    rows = [
        [i, ds.smiles[i], int(report.assignments[0][i]), int(report.assignments[1][i]),
         int(report.assignments[2][i])]
        for i in range(len(ds))
    ]
    _write_csv(out / "cluster_hierarchy.csv",
               ["index", "smiles", "stage1", "stage2", "stage3"], rows)
    stats = [
        [
            {
                "cluster": s.cluster,
                "size": s.size,
                "unique_scaffolds": s.unique_scaffolds,
                "intra_inter_ratio": s.intra_inter_ratio,
            }
            for s in stage
        ]
        for stage in report.stats
    ]
    _write_json(out / "cluster_stats.json", {"stages": stats})
    return 0


def cmd_correlate(args) -> int:
    ds = _load_input(args)
    cfg = _load_config(args)
    _, embs, _ = _embeddings_for(ds, args.checkpoint)
    features = corpus_features(ds.molecules)
    n = len(ds)
    fg_binary = features.fg_matrix > 0
    inter = fg_binary.astype(float) @ fg_binary.T
    pop = fg_binary.sum(axis=1)
    union = np.maximum(pop[:, None] + pop[None, :] - inter, 1)
    fg_sims = np.where(pop[:, None] + pop[None, :] - inter > 0, inter / union, 1.0)
    conventional = {
        "MCD": features.sim_molecule,
        "SCD": features.sim_scaffold,
        "CP": fg_sims,
    }
    report = correlation_report(
        embs, conventional, pair_sample=args.pairs,
        rng=np.random.default_rng(cfg.seed),
    )
    out = _out_dir(args)
    rows = []
    for channel, series in report.items():
        for d, s in zip(series.distances, series.similarities):
            rows.append([channel, f"{d:.8f}", f"{s:.8f}"])
    _write_csv(out / "correlate.csv", ["channel", "distance", "similarity"], rows)
    _write_json(
        out / "correlate.json",
        {channel: series.pearson_r for channel, series in report.items()},
    )
    return 0


HANDLERS = {
    "parse": cmd_parse,
    "featurize": cmd_featurize,
    "split": cmd_split,
    "perturb": cmd_perturb,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "ablate": cmd_ablate,
    "rogi": cmd_rogi,
    "probe": cmd_probe,
    "cluster-hierarchy": cmd_cluster_hierarchy,
    "correlate": cmd_correlate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MolpromptError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
