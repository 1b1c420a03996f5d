import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gmgini.estimators import BiasCorrectedGini, GammaMixture
from gmgini.fit import FitConfig, em_fit
from gmgini.gini import bias, sample_gini
from gmgini.mixture import MixtureParams, logpdf, sample
from gmgini.specfun import DomainError

SCENARIO = MixtureParams([0.6, 0.4], [0.5, 2.0], 1.0)


def test_gamma_mixture_matches_functional_fit():
    x = sample(SCENARIO, 200, 1)
    gm = GammaMixture(2, random_state=5).fit(x)
    ref = em_fit(x, FitConfig(m=2, seed=5))
    assert gm.params_ == ref.params
    assert gm.loglik_ == ref.loglik
    np.testing.assert_array_equal(gm.shapes_, ref.params.shapes)


def test_gamma_mixture_accepts_column_vector():
    x = sample(SCENARIO, 100, 2)
    a = GammaMixture().fit(x)
    b = GammaMixture().fit(x.reshape(-1, 1))
    assert a.params_ == b.params_


def test_gamma_mixture_scores_and_posteriors():
    x = sample(SCENARIO, 300, 3)
    gm = GammaMixture().fit(x)
    np.testing.assert_allclose(gm.score_samples(x), logpdf(gm.params_, x), rtol=1e-14)
    assert gm.score(x) == pytest.approx(gm.loglik_ / x.size, rel=1e-12)
    proba = gm.predict_proba(x[:10])
    assert proba.shape == (10, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, rtol=1e-14)
    np.testing.assert_array_equal(gm.predict(x[:10]), proba.argmax(axis=1))


def test_gamma_mixture_sample():
    gm = GammaMixture().fit(sample(SCENARIO, 300, 4))
    X, labels = gm.sample(50, random_state=1)
    assert X.shape == (50,) and labels.shape == (50,)
    assert np.all(X > 0)


def test_get_params_and_clone():
    gm = GammaMixture(3, n_starts=4, random_state=2)
    params = gm.get_params()
    assert params["n_components"] == 3 and params["n_starts"] == 4
    c = clone(gm)
    assert c.get_params() == params
    gm.set_params(n_components=2)
    assert gm.n_components == 2


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GammaMixture().predict([1.0, 2.0])
    with pytest.raises(NotFittedError):
        BiasCorrectedGini().transform()


@pytest.mark.parametrize("X", [[1.0, 2.0, -1.0, 4.0], np.ones((4, 2)), [1.0, np.nan, 2.0, 3.0]])
def test_input_validation(X):
    with pytest.raises(DomainError):
        GammaMixture().fit(X)


def test_too_few_points():
    with pytest.raises(DomainError):
        GammaMixture(3).fit([1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(DomainError):
        GammaMixture(n_components=1.5).fit([1.0, 2.0, 3.0])


def test_bias_corrected_with_known_params():
    x = sample(SCENARIO, 15, 6)
    est = BiasCorrectedGini(mixture_params=SCENARIO).fit(x)
    assert est.gini_ == sample_gini(x)
    assert est.bias_ == bias(SCENARIO, 15).bias
    assert est.gini_bc_ < est.gini_
    np.testing.assert_array_equal(est.transform(), [[est.gini_, est.gini_bc_]])


def test_bias_corrected_with_fit():
    x = sample(SCENARIO, 15, 7)
    est = BiasCorrectedGini(random_state=3).fit(x)
    fitted = em_fit(x, FitConfig(seed=3)).params
    assert est.mixture_ == fitted
    assert est.gini_bc_ == pytest.approx(sample_gini(x) - bias(fitted, 15).bias, abs=0)


def test_bias_corrected_accepts_mapping():
    x = [1.0, 3.0]
    est = BiasCorrectedGini(mixture_params={"weights": [0.5, 0.5], "shapes": [2, 2], "rate": 1})
    out = est.fit_transform(x)
    np.testing.assert_allclose(out, [[0.5, 0.5]], atol=1e-12)
