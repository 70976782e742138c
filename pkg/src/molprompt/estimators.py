"""Scikit-learn style estimators wrapping the training pipeline.

``MoleculeChannelPretrainer`` is an unsupervised transformer (fit on SMILES,
transform to embeddings); ``PromptMoleculeRegressor`` and
``PromptMoleculeClassifier`` fine-tune a pretrained model toward labels and
predict through the prompt-weighted composite representation. All estimators
accept either SMILES strings or already-parsed molecular graphs.
"""

from __future__ import annotations


import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .datasets import Dataset
from .encoder import CHANNELS, ModelParams, load_checkpoint, save_checkpoint
from .errors import InputError
from .molgraph import MolecularGraph, parse_smiles, write_smiles
from .training import (
    TrainConfig,
    compute_channel_embeddings,
    composite_embedding,
    finetune,
    predict_values,
    pretrain,
)


def check_molecule_list(X) -> tuple[list[MolecularGraph], list[str]]:
    """Validate an iterable of SMILES strings or molecular graphs.

    Returns (graphs, smiles). Raises :class:`InputError` naming the first
    offending position.
    """
    if isinstance(X, (str, MolecularGraph)):
        X = [X]
    graphs: list[MolecularGraph] = []
    smiles: list[str] = []
    for pos, item in enumerate(X):
        if isinstance(item, MolecularGraph):
            graphs.append(item)
            smiles.append(write_smiles(item))
        elif isinstance(item, str):
            try:
                graphs.append(parse_smiles(item))
            except InputError as err:
                raise InputError(f"X[{pos}]: {err}") from err
            smiles.append(item)
        else:
            raise InputError(f"X[{pos}]: expected SMILES or MolecularGraph, got {type(item).__name__}")
    if not graphs:
        raise InputError("X is empty")
    return graphs, smiles


def check_label_array(y, n: int, binary: bool = False) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) != n:
        raise InputError(f"y has {len(y)} entries for {n} molecules")
    if not np.all(np.isfinite(y)):
        raise InputError("y contains non-finite values")
    if binary and not set(np.unique(y)) <= {0.0, 1.0}:
        raise InputError("classification labels must be 0/1")
    return y


class MoleculeChannelPretrainer(BaseEstimator, TransformerMixin):
    """Self-supervised multi-channel molecular representation learner.

    ``fit`` pre-trains on an unlabeled molecule list; ``transform`` emits
    embeddings: the uniform-weight composite by default, a single channel,
    or all channels concatenated.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        num_layers: int = 5,
        heads: int = 4,
        epochs: int = 50,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        alpha_offset: float = 1.0,
        quadruplet_budget: int = 4,
        positives_per_anchor: int = 5,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.heads = heads
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.alpha_offset = alpha_offset
        self.quadruplet_budget = quadruplet_budget
        self.positives_per_anchor = positives_per_anchor
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            seed=self.seed,
            pretrain_epochs=self.epochs,
            batch_size=self.batch_size,
            pretrain_lr=self.learning_rate,
            alpha_offset=self.alpha_offset,
            quadruplet_budget=self.quadruplet_budget,
            positives_per_anchor=self.positives_per_anchor,
            hidden_dim=self.hidden_dim,
            num_layers=self.num_layers,
            heads=self.heads,
        )

    def fit(self, X, y=None):
        graphs, smiles = check_molecule_list(X)
        corpus = Dataset("fit", smiles, graphs)
        result = pretrain(corpus, self._config())
        self.params_ = result.params
        self.loss_history_ = result.epoch_losses
        return self

    def transform(self, X, channel: str = "composite") -> np.ndarray:
        self._check_fitted()
        graphs, _ = check_molecule_list(X)
        embs, _ = compute_channel_embeddings(graphs, self.params_)
        if channel == "composite":
            return composite_embedding(embs, np.full(3, 1 / 3))
        if channel == "stacked":
            return np.concatenate([embs[c] for c in CHANNELS], axis=1)
        if channel in CHANNELS:
            return embs[channel]
        raise InputError(f"unknown channel {channel!r}")

    def save(self, path):
        self._check_fitted()
        save_checkpoint(path, self.params_)

    @classmethod
    def from_checkpoint(cls, path) -> "MoleculeChannelPretrainer":
        params = load_checkpoint(path)
        cfg = params.config
        est = cls(
            hidden_dim=cfg.hidden_dim,
            num_layers=cfg.num_layers,
            heads=cfg.heads,
            seed=cfg.seed,
        )
        est.params_ = params
        est.loss_history_ = []
        return est

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit() or from_checkpoint() first")


class _PromptModelBase(BaseEstimator):
    _task = "regression"

    def __init__(
        self,
        pretrained=None,
        epochs: int = 100,
        batch_size: int = 32,
        learning_rate: float = 1e-4,
        grid_step: float = 0.05,
        validation_fraction: float = 0.1,
        hidden_dim: int = 64,
        num_layers: int = 5,
        heads: int = 4,
        seed: int = 0,
    ):
        self.pretrained = pretrained
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.grid_step = grid_step
        self.validation_fraction = validation_fraction
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.heads = heads
        self.seed = seed

    def _resolve_pretrained(self) -> ModelParams | None:
        src = self.pretrained
        if src is None:
            return None
        if isinstance(src, ModelParams):
            return src
        if isinstance(src, MoleculeChannelPretrainer):
            src._check_fitted()
            return src.params_
        return load_checkpoint(src)

    def _config(self) -> TrainConfig:
        if not 0 < self.validation_fraction < 1:
            raise InputError("validation_fraction must be in (0, 1)")
        return TrainConfig(
            seed=self.seed,
            finetune_epochs=self.epochs,
            batch_size=self.batch_size,
            finetune_lr=self.learning_rate,
            grid_step=self.grid_step,
            split_ratios=(1 - self.validation_fraction, self.validation_fraction, 0.0),
            probe_epochs=(0, self.epochs),
            hidden_dim=self.hidden_dim,
            num_layers=self.num_layers,
            heads=self.heads,
        )

    def fit(self, X, y):
        graphs, smiles = check_molecule_list(X)
        y = check_label_array(y, len(graphs), binary=self._task == "classification")
        params = self._resolve_pretrained()
        if params is not None:
            cfg_model = params.config
            if cfg_model.hidden_dim != self.hidden_dim or cfg_model.num_layers != self.num_layers:
                raise InputError(
                    "pretrained architecture does not match estimator parameters"
                )
        ds = Dataset("fit", smiles, graphs, y)
        result = finetune(ds, self._config(), task=self._task, pretrained=params)
        self.params_ = result.params
        self.result_ = result
        self.prompt_weights_ = result.probes[-1].prompt_weights
        self.validation_metric_ = result.final_validation_metric
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit() first")

    def _raw_predictions(self, X) -> np.ndarray:
        self._check_fitted()
        graphs, _ = check_molecule_list(X)
        return predict_values(
            self.params_, graphs, self.result_.y_mean, self.result_.y_std
        )


class PromptMoleculeRegressor(_PromptModelBase, RegressorMixin):
    """Property regressor over the prompt-weighted composite representation."""

    _task = "regression"

    def predict(self, X) -> np.ndarray:
        return self._raw_predictions(X)


class PromptMoleculeClassifier(_PromptModelBase, ClassifierMixin):
    """Binary classifier over the prompt-weighted composite representation."""

    _task = "classification"

    def fit(self, X, y):
        super().fit(X, y)
        self.classes_ = np.array([0.0, 1.0])
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._raw_predictions(X)

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        p = 1.0 / (1.0 + np.exp(-logits))
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.float64)
