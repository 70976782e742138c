"""Quantitative chemical-space analysis: landscape roughness (ROGI), k-means,
Rand index, activity-cliff matched pairs, the cliff/non-cliff distance ratio,
QSPR correlations, representation-similarity reports, and the three-stage
hierarchical clustering.

ROGI integrates the drop of the size-weighted label dispersion as
complete-linkage clustering coarsens the space: low values mean a smooth
structure-property landscape.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import pdist, squareform

from .errors import EmptyClass

log = logging.getLogger(__name__)


@dataclass
class LabeledSpace:
    """Vectors plus scalar labels under a chosen metric.

    With ``metric="precomputed"`` the ``vectors`` field holds a square
    dissimilarity matrix instead (complete linkage does not require
    metricity, so arbitrary dissimilarities are fine).
    """

    vectors: np.ndarray
    labels: np.ndarray
    metric: str = "euclidean"  # "tanimoto" for binary vectors, or "precomputed"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.vectors) == 0:
            raise ValueError("vectors must be a non-empty 2-D array")
        if len(self.labels) != len(self.vectors):
            raise ValueError("labels and vectors must have equal length")
        if self.metric not in ("euclidean", "tanimoto", "precomputed"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "precomputed" and (
            self.vectors.shape[0] != self.vectors.shape[1]
        ):
            raise ValueError("precomputed metric needs a square matrix")

    def condensed_distances(self) -> np.ndarray:
        if self.metric == "euclidean":
            return pdist(self.vectors)
        if self.metric == "precomputed":
            return squareform(self.vectors, checks=False)
        binary = self.vectors > 0
        inter = np.asarray(binary, dtype=np.float64) @ binary.T
        pop = binary.sum(axis=1)
        union = pop[:, None] + pop[None, :] - inter
        with np.errstate(invalid="ignore"):
            sim = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
        return squareform(1.0 - sim, checks=False)


def min_max_normalize(labels) -> np.ndarray:
    """Labels rescaled to [0, 1]; constant labels map to zeros."""
    labels = np.asarray(labels, dtype=np.float64)
    span = labels.max() - labels.min()
    if span == 0:
        return np.zeros_like(labels)
    return (labels - labels.min()) / span


def rogi_curve(space: LabeledSpace) -> tuple[np.ndarray, np.ndarray]:
    """(merge thresholds, sigma after each merge) for the dispersion curve.

    Thresholds are complete-linkage merge heights on distances normalized by
    the maximum pairwise distance; sigma_t is the size-weighted standard
    deviation of cluster-mean labels and is non-increasing per merge.
    """
    n = len(space.vectors)
    if n < 2:
        raise ValueError("ROGI needs at least 2 points")
    labels = space.labels
    if labels.min() < 0 or labels.max() > 1:
        raise ValueError("ROGI labels must lie in [0, 1]")
    dist = space.condensed_distances()
    max_d = dist.max()
    if max_d == 0:
        return np.array([]), np.array([])
    merges = linkage(dist / max_d, method="complete")

    total_mean = labels.mean()
    # cluster id layout follows scipy: 0..n-1 are points, n+m is merge m
    sums = {i: labels[i] for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    weighted = float(np.sum((labels - total_mean) ** 2))  # sum n_c (mu_c - mu)^2
    thresholds = np.empty(len(merges))
    sigmas = np.empty(len(merges))
    prev_sigma = np.sqrt(weighted / n)
    for m, (left, right, height, _) in enumerate(merges):
        left, right = int(left), int(right)
        s_left, s_right = sums.pop(left), sums.pop(right)
        n_left, n_right = sizes.pop(left), sizes.pop(right)
        weighted -= n_left * (s_left / n_left - total_mean) ** 2
        weighted -= n_right * (s_right / n_right - total_mean) ** 2
        s, c = s_left + s_right, n_left + n_right
        weighted += c * (s / c - total_mean) ** 2
        weighted = max(weighted, 0.0)
        sums[n + m] = s
        sizes[n + m] = c
        sigma = np.sqrt(weighted / n)
        sigma = min(sigma, prev_sigma)  # clip float dust; merging never raises it
        thresholds[m] = min(float(height), 1.0)
        sigmas[m] = sigma
        prev_sigma = sigma
    return thresholds, sigmas


def rogi(space: LabeledSpace) -> float:
    """Integral over t in [0, 1] of 2 * (sigma_0 - sigma_t), evaluated exactly
    on the piecewise-constant dispersion curve."""
    thresholds, sigmas = rogi_curve(space)
    labels = space.labels
    sigma0 = float(np.sqrt(np.mean((labels - labels.mean()) ** 2)))
    if len(thresholds) == 0:
        return 0.0
    total = 0.0
    prev_t = 0.0
    prev_sigma = sigma0
    for t, sigma in zip(thresholds, sigmas):
        total += 2.0 * (sigma0 - prev_sigma) * (t - prev_t)
        prev_t, prev_sigma = t, sigma
    total += 2.0 * (sigma0 - prev_sigma) * (1.0 - prev_t)
    return float(total)


@dataclass
class ClusterAssignment:
    assignment: np.ndarray
    k: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


def kmeans(
    vectors,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterAssignment:
    """Deterministic k-means++ / Lloyd iterations under a seeded generator.

    Empty clusters are re-seeded to the point farthest from its centroid;
    when the data cannot support k distinct clusters (duplicate points), the
    result is compacted to the non-empty ones.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    if k < 1:
        raise ValueError("k must be >= 1")

    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    chosen = {first}
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            idx = int(rng.choice(n, p=probs))
        else:
            remaining = [i for i in range(n) if i not in chosen]
            idx = int(rng.choice(remaining)) if remaining else int(rng.integers(n))
        chosen.add(idx)
        centers[c] = x[idx]
        closest = np.minimum(closest, np.sum((x - centers[c]) ** 2, axis=1))

    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assignment = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = assignment == c
            if members.any():
                new_centers[c] = x[members].mean(axis=0)
        # re-seed empties to the globally farthest point
        for c in range(k):
            if not (assignment == c).any():
                per_point = d2[np.arange(n), assignment]
                far = int(per_point.argmax())
                if per_point[far] == 0:
                    break
                new_centers[c] = x[far]
                assignment[far] = c
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assignment = d2.argmin(axis=1)

    used = np.unique(assignment)
    remap = {old: new for new, old in enumerate(used.tolist())}
    assignment = np.array([remap[a] for a in assignment], dtype=np.int64)
    return ClusterAssignment(assignment, len(used))


def rand_index(a: ClusterAssignment, b: ClusterAssignment) -> float:
    """Fraction of point pairs on which the two clusterings agree."""
    x = a.assignment
    y = b.assignment
    if len(x) != len(y):
        raise ValueError("clusterings must cover the same points")
    n = len(x)
    if n < 2:
        return 1.0
    same_a = x[:, None] == x[None, :]
    same_b = y[:, None] == y[None, :]
    iu = np.triu_indices(n, k=1)
    return float((same_a[iu] == same_b[iu]).mean())


@dataclass(frozen=True)
class MMPRecord:
    pair: tuple[int, int]
    similarity: float
    label_gap: float
    is_cliff: bool


def detect_mmps(
    fingerprints,
    scaffold_fingerprints,
    labels,
    sim_threshold: float = 0.9,
    cliff_gap: float = 1.0,
) -> list[MMPRecord]:
    """Exhaustive matched-molecular-pair scan.

    A pair qualifies when max(molecule Tanimoto, scaffold Tanimoto) reaches
    the similarity threshold; it is a cliff when the label gap reaches
    ``cliff_gap`` (one log unit = tenfold potency). Pairs are stored once
    with i < j.
    """
    from .chemfeat import tanimoto

    labels = np.asarray(labels, dtype=np.float64)
    n = len(labels)
    records = []
    for i in range(n):
        for j in range(i + 1, n):
            sim = max(
                tanimoto(fingerprints[i], fingerprints[j]),
                tanimoto(scaffold_fingerprints[i], scaffold_fingerprints[j]),
            )
            if sim >= sim_threshold:
                gap = abs(labels[i] - labels[j])
                records.append(MMPRecord((i, j), sim, float(gap), bool(gap >= cliff_gap)))
    return records


def cliff_noncliff_ratio(embeddings, mmps: list[MMPRecord]) -> float:
    """Mean embedding distance over cliff pairs divided by the mean over
    non-cliff pairs. Degenerate 0/0 is defined as 1.0 and logged."""
    x = np.asarray(embeddings, dtype=np.float64)
    cliff = [m.pair for m in mmps if m.is_cliff]
    flat = [m.pair for m in mmps if not m.is_cliff]
    if not cliff or not flat:
        raise EmptyClass(
            f"need both classes: {len(cliff)} cliff and {len(flat)} non-cliff pairs"
        )

    def mean_distance(pairs):
        return float(
            np.mean([np.linalg.norm(x[i] - x[j]) for i, j in pairs])
        )

    num = mean_distance(cliff)
    den = mean_distance(flat)
    if num == 0.0 and den == 0.0:
        log.info("cliff and non-cliff distances all zero; ratio defined as 1.0")
        return 1.0
    if den == 0.0:
        return float("inf")
    return num / den


def pearson(x, y) -> float:
    """Pearson r; zero-variance series give 0 with a warning."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.std() == 0 or y.std() == 0:
        warnings.warn("zero variance in correlation input; r set to 0")
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def sample_pairs(n: int, sample_size: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """All index pairs when few enough, otherwise a seeded sample without
    replacement."""
    total = n * (n - 1) // 2
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if total <= sample_size:
        return pairs
    picked = rng.choice(total, size=sample_size, replace=False)
    return [pairs[i] for i in sorted(picked.tolist())]


def qspr_correlation(
    channel_sims: dict[str, np.ndarray],
    labels,
    pair_sample: int = 1000,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict[str, float]]:
    """Pearson r between (1 - similarity) and |label difference| per channel,
    clamped at zero and normalized to sum to 1.

    ``channel_sims`` maps channel name to an (n, n) similarity matrix in the
    order the output vector should follow (dict order is preserved).
    """
    rng = rng or np.random.default_rng(0)
    labels = np.asarray(labels, dtype=np.float64)
    n = len(labels)
    if n < 2:
        raise ValueError("need at least 2 molecules")
    pairs = sample_pairs(n, pair_sample, rng)
    gaps = np.array([abs(labels[i] - labels[j]) for i, j in pairs])
    raw: dict[str, float] = {}
    for name, sims in channel_sims.items():
        diffs = np.array([1.0 - sims[i, j] for i, j in pairs])
        raw[name] = pearson(diffs, gaps)
    clamped = np.array([max(0.0, r) for r in raw.values()])
    total = clamped.sum()
    normalized = clamped / total if total > 0 else clamped
    return normalized, raw


@dataclass
class CorrelationSeries:
    pearson_r: float
    distances: np.ndarray
    similarities: np.ndarray


def correlation_report(
    channel_embeddings: dict[str, np.ndarray],
    conventional_sims: dict[str, np.ndarray],
    pair_sample: int = 1000,
    rng: np.random.Generator | None = None,
) -> dict[str, CorrelationSeries]:
    """Per channel: normalized embedding L2 distance vs the matching
    conventional similarity over sampled pairs, with the raw series kept for
    plotting."""
    rng = rng or np.random.default_rng(0)
    sizes = {len(e) for e in channel_embeddings.values()}
    if len(sizes) != 1:
        raise ValueError("channel embeddings must cover the same molecules")
    n = sizes.pop()
    pairs = sample_pairs(n, pair_sample, rng)
    out: dict[str, CorrelationSeries] = {}
    for channel, emb in channel_embeddings.items():
        emb = np.asarray(emb, dtype=np.float64)
        sims_matrix = conventional_sims[channel]
        dists = np.array([np.linalg.norm(emb[i] - emb[j]) for i, j in pairs])
        max_d = dists.max()
        if max_d > 0:
            dists = dists / max_d
        sims = np.array([sims_matrix[i, j] for i, j in pairs])
        out[channel] = CorrelationSeries(pearson(dists, sims), dists, sims)
    return out


@dataclass
class ClusterStat:
    cluster: int
    size: int
    unique_scaffolds: int
    intra_inter_ratio: float | None


@dataclass
class HierarchyReport:
    assignments: list[np.ndarray]  # one global assignment per stage
    stats: list[list[ClusterStat]] = field(default_factory=list)


def _refine(assignment: np.ndarray, vectors: np.ndarray, k: int,
            rng: np.random.Generator) -> np.ndarray:
    """Split every cluster of ``assignment`` with k-means on ``vectors``;
    clusters smaller than k pass through unsplit."""
    out = np.zeros_like(assignment)
    next_id = 0
    for cluster in np.unique(assignment):
        members = np.flatnonzero(assignment == cluster)
        if len(members) < k:
            out[members] = next_id
            next_id += 1
            continue
        sub = kmeans(vectors[members], k, rng)
        for local in range(sub.k):
            out[members[sub.members(local)]] = next_id + local
        next_id += sub.k
    return out


def _intra_inter_ratio(features: np.ndarray, members: np.ndarray) -> float | None:
    outside = np.setdiff1d(np.arange(len(features)), members)
    if len(members) < 2 or len(outside) == 0:
        return None
    inside = features[members]
    intra = pdist(inside)
    inter = np.linalg.norm(
        inside[:, None, :] - features[outside][None, :, :], axis=2
    )
    intra_mean = float(intra.mean()) if len(intra) else 0.0
    inter_mean = float(inter.mean())
    if inter_mean == 0:
        return 1.0 if intra_mean == 0 else None
    return intra_mean / inter_mean


def hierarchical_three_stage(
    channel_embeddings: dict[str, np.ndarray],
    fg_matrix,
    scaffold_fp_matrix,
    scaffold_keys: list[str],
    stage_ks: tuple[int, int, int] = (8, 4, 3),
    top_m: int = 10,
    rng: np.random.Generator | None = None,
) -> HierarchyReport:
    """Coarse-to-fine clustering: local-view (CP) first, then scaffold view
    (SCD) inside each cluster, then whole-molecule view (MCD).

    For the top-m largest clusters per stage: cluster size, unique scaffold
    count, and the intra/inter distance ratio of functional-group descriptors
    (stage 1) or scaffold fingerprints (stage 2).
    """
    rng = rng or np.random.default_rng(0)
    fg_matrix = np.asarray(fg_matrix, dtype=np.float64)
    scaffold_fp_matrix = np.asarray(scaffold_fp_matrix, dtype=np.float64)
    n = len(scaffold_keys)

    cp = np.asarray(channel_embeddings["CP"], dtype=np.float64)
    scd = np.asarray(channel_embeddings["SCD"], dtype=np.float64)
    mcd = np.asarray(channel_embeddings["MCD"], dtype=np.float64)

    stage1 = kmeans(cp, min(stage_ks[0], n), rng).assignment
    stage2 = _refine(stage1, scd, stage_ks[1], rng)
    stage3 = _refine(stage2, mcd, stage_ks[2], rng)

    report = HierarchyReport([stage1, stage2, stage3])
    ratio_features = [fg_matrix, scaffold_fp_matrix, None]
    for stage_idx, assignment in enumerate(report.assignments):
        clusters, counts = np.unique(assignment, return_counts=True)
        top = clusters[np.argsort(-counts)][:top_m]
        rows = []
        for cluster in top:
            members = np.flatnonzero(assignment == cluster)
            unique_scaffolds = len({scaffold_keys[i] for i in members})
            features = ratio_features[stage_idx]
            ratio = (
                _intra_inter_ratio(features, members) if features is not None else None
            )
            rows.append(ClusterStat(int(cluster), len(members), unique_scaffolds, ratio))
        report.stats.append(rows)
    return report
