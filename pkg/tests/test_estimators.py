import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from molprompt.datasets import make_toy_corpus
from molprompt.errors import InputError
from molprompt.estimators import (
    MoleculeChannelPretrainer,
    PromptMoleculeClassifier,
    PromptMoleculeRegressor,
    check_label_array,
    check_molecule_list,
)
from molprompt.molgraph import parse_smiles

FAST = dict(hidden_dim=8, num_layers=1, heads=2, epochs=2, batch_size=12, seed=3)


@pytest.fixture(scope="module")
def corpus():
    ds = make_toy_corpus().subset(range(30))
    return ds.smiles, ds.labels


@pytest.fixture(scope="module")
def fitted_pretrainer(corpus):
    smiles, _ = corpus
    est = MoleculeChannelPretrainer(
        **FAST, positives_per_anchor=2, quadruplet_budget=2
    )
    return est.fit(smiles)


class TestValidation:
    def test_accepts_smiles_and_graphs(self):
        graphs, smiles = check_molecule_list(["CCO", parse_smiles("CC")])
        assert len(graphs) == 2
        assert smiles[0] == "CCO"

    def test_bad_smiles_names_position(self):
        with pytest.raises(InputError) as err:
            check_molecule_list(["CCO", "C1CC"])
        assert "X[1]" in str(err.value)

    def test_wrong_type_rejected(self):
        with pytest.raises(InputError):
            check_molecule_list([3.14])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            check_molecule_list([])

    def test_label_length_checked(self):
        with pytest.raises(InputError):
            check_label_array([1.0], 2)

    def test_binary_labels_checked(self):
        with pytest.raises(InputError):
            check_label_array([0.0, 0.5], 2, binary=True)


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = MoleculeChannelPretrainer(hidden_dim=16, seed=9)
        params = est.get_params()
        assert params["hidden_dim"] == 16
        est.set_params(hidden_dim=32)
        assert est.hidden_dim == 32

    def test_clone(self):
        est = PromptMoleculeRegressor(epochs=5, seed=2)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_not_fitted_errors(self):
        with pytest.raises(NotFittedError):
            MoleculeChannelPretrainer().transform(["CCO"])
        with pytest.raises(NotFittedError):
            PromptMoleculeRegressor().predict(["CCO"])


class TestPretrainer:
    def test_fit_transform_shapes(self, fitted_pretrainer, corpus):
        smiles, _ = corpus
        est = fitted_pretrainer
        composite = est.transform(smiles[:5])
        assert composite.shape == (5, 8)
        stacked = est.transform(smiles[:5], channel="stacked")
        assert stacked.shape == (5, 24)
        mcd = est.transform(smiles[:5], channel="MCD")
        assert mcd.shape == (5, 8)
        with pytest.raises(InputError):
            est.transform(smiles[:2], channel="bogus")

    def test_transform_deterministic(self, fitted_pretrainer, corpus):
        smiles, _ = corpus
        a = fitted_pretrainer.transform(smiles[:4])
        b = fitted_pretrainer.transform(smiles[:4])
        np.testing.assert_array_equal(a, b)

    def test_save_and_reload(self, fitted_pretrainer, corpus, tmp_path):
        smiles, _ = corpus
        path = tmp_path / "model.mspc"
        fitted_pretrainer.save(path)
        again = MoleculeChannelPretrainer.from_checkpoint(path)
        np.testing.assert_array_equal(
            fitted_pretrainer.transform(smiles[:3]), again.transform(smiles[:3])
        )

    def test_loss_history_recorded(self, fitted_pretrainer):
        assert len(fitted_pretrainer.loss_history_) == FAST["epochs"]


class TestRegressor:
    def test_fit_predict_score(self, fitted_pretrainer, corpus):
        smiles, labels = corpus
        est = PromptMoleculeRegressor(
            pretrained=fitted_pretrainer,
            epochs=3,
            batch_size=12,
            hidden_dim=8,
            num_layers=1,
            heads=2,
            grid_step=0.5,
            seed=1,
        )
        est.fit(smiles, labels)
        pred = est.predict(smiles[:6])
        assert pred.shape == (6,)
        assert np.all(np.isfinite(pred))
        assert est.prompt_weights_.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.isfinite(est.score(smiles, labels))

    def test_from_scratch_allowed(self, corpus):
        smiles, labels = corpus
        est = PromptMoleculeRegressor(
            epochs=2, batch_size=12, hidden_dim=8, num_layers=1, heads=2,
            grid_step=0.5, seed=0,
        )
        est.fit(smiles, labels)
        assert est.predict(smiles[:2]).shape == (2,)

    def test_architecture_mismatch_rejected(self, fitted_pretrainer, corpus):
        smiles, labels = corpus
        est = PromptMoleculeRegressor(
            pretrained=fitted_pretrainer, hidden_dim=16, epochs=1
        )
        with pytest.raises(InputError):
            est.fit(smiles, labels)


class TestClassifier:
    def test_fit_predict_proba(self, fitted_pretrainer, corpus):
        smiles, labels = corpus
        binary = (labels > np.median(labels)).astype(float)
        est = PromptMoleculeClassifier(
            pretrained=fitted_pretrainer,
            epochs=3,
            batch_size=12,
            hidden_dim=8,
            num_layers=1,
            heads=2,
            grid_step=0.5,
            seed=1,
        )
        est.fit(smiles, binary)
        proba = est.predict_proba(smiles[:5])
        assert proba.shape == (5, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        pred = est.predict(smiles[:5])
        assert set(pred.tolist()) <= {0.0, 1.0}
        assert est.classes_.tolist() == [0.0, 1.0]

    def test_non_binary_rejected(self, fitted_pretrainer, corpus):
        smiles, labels = corpus
        est = PromptMoleculeClassifier(pretrained=fitted_pretrainer, epochs=1)
        with pytest.raises(InputError):
            est.fit(smiles, labels)
