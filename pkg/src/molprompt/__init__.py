"""Prompt-guided multi-channel molecular representation learning toolkit."""

__version__ = "0.1.0"

from .molgraph import MolecularGraph, parse_smiles, write_smiles, graphs_isomorphic
from .chemfeat import morgan_fingerprint, tanimoto, bemis_murcko_scaffold
from .estimators import (
    MoleculeChannelPretrainer,
    PromptMoleculeClassifier,
    PromptMoleculeRegressor,
)

__all__ = [
    "MolecularGraph",
    "parse_smiles",
    "write_smiles",
    "graphs_isomorphic",
    "morgan_fingerprint",
    "tanimoto",
    "bemis_murcko_scaffold",
    "MoleculeChannelPretrainer",
    "PromptMoleculeClassifier",
    "PromptMoleculeRegressor",
]
