"""Generator tests: marginal distributions, outcome model, selection bias."""

import numpy as np
import pytest
from scipy import stats

from pseudofuse import dgp


def _single_spec(kind, **params):
    return dgp.CovariateSpec([dgp.DimensionSpec(kind, params)])


def _column(kind, n=100_000, seed=0, **params):
    return dgp.gen_covariates(_single_spec(kind, **params), n, seed)[:, 0]


class TestGenCovariates:
    def test_normal_moments(self):
        col = _column("normal", mu=0.0, sigma=1.0)
        assert -0.02 <= col.mean() <= 0.02
        assert 0.97 <= col.var() <= 1.03

    def test_uniform_support(self):
        col = _column("uniform", lo=0.0, hi=1.0)
        assert col.min() >= 0.0
        assert col.max() <= 1.0

    def test_bimodal_matches_direct_mixture_sampling(self):
        col = _column("bimodal", mu1=-2.0, s1=1.0, mu2=2.0, s2=1.0, w=0.5)
        assert -0.05 <= col.mean() <= 0.05
        # oracle: sample the mixture directly and compare distributions
        rng = np.random.default_rng(123)
        pick = rng.random(100_000) < 0.5
        oracle = np.where(pick, rng.normal(-2, 1, 100_000), rng.normal(2, 1, 100_000))
        assert stats.ks_2samp(col, oracle).pvalue > 0.01
        # mass near zero is far below either mode's peak: bimodal dip
        hist, _ = np.histogram(col, bins=np.linspace(-4, 4, 17), density=True)
        assert hist[7] < 0.6 * max(hist[2], hist[13])

    def test_poisson_and_binomial_are_integral(self):
        assert np.all(_column("poisson", n=1000, lam=3.0) % 1 == 0)
        spec = dgp.CovariateSpec([dgp.DimensionSpec("binomial", {"n": 1, "p": 0.5})])
        col = dgp.gen_covariates(spec, 1000, 0)[:, 0]
        assert set(np.unique(col)) <= {0.0, 1.0}

    def test_combination_references_validated(self):
        spec = dgp.CovariateSpec(
            [
                dgp.DimensionSpec("normal", {"mu": 0, "sigma": 1}),
                dgp.DimensionSpec("linear", {"refs": [1], "coeffs": [1.0]}),
            ]
        )
        with pytest.raises(dgp.ConfigError, match="dimension 1"):
            dgp.gen_covariates(spec, 10, 0)

    def test_invalid_parameters_name_the_dimension(self):
        with pytest.raises(dgp.ConfigError, match="dimension 0"):
            dgp.gen_covariates(_single_spec("normal", mu=0.0, sigma=-1.0), 10, 0)

    def test_deterministic(self):
        spec = dgp.default_config().covariates
        a = dgp.gen_covariates(spec, 500, seed=7)
        b = dgp.gen_covariates(spec, 500, seed=7)
        assert np.array_equal(a, b)


def _scalar_outcome_spec(a=0.0, b=0.0, c=(0.0,), d=(0.0,), e=(0.0,), g=(0.0,), mu=0.0):
    return dgp.OutcomeModelSpec(a=a, b=b, c=c, d=d, e=e, g=g, mu=mu)


class TestOutcomeScore:
    def test_all_zero_coefficients(self):
        spec = _scalar_outcome_spec()
        assert dgp.outcome_score(np.array([3.7]), 1, spec) == 0.0

    def test_scalar_only(self):
        spec = _scalar_outcome_spec(a=1.0, b=2.0)
        x = np.array([5.0])
        assert dgp.outcome_score(x, 1, spec) == 3.0
        assert dgp.outcome_score(x, 0, spec) == 1.0

    def test_hand_evaluated_vector_case(self):
        spec = dgp.OutcomeModelSpec(
            a=0.0, b=0.0, c=(1.0, 0.0), d=(0.0, 1.0), e=(0.0, 0.0), g=(0.0, 0.0), mu=0.0
        )
        assert dgp.outcome_score(np.array([2.0, 3.0]), 1, spec) == pytest.approx(11.0)

    def test_dimension_mismatch(self):
        with pytest.raises(dgp.ConfigError, match="dimension"):
            dgp.outcome_score(np.array([1.0, 2.0]), 1, _scalar_outcome_spec())


class TestSampleOutcome:
    def test_rate_half_at_threshold(self):
        spec = _scalar_outcome_spec(mu=0.0)
        rng = np.random.default_rng(0)
        y = dgp.sample_outcome(np.zeros((100_000, 1)), 0, spec, rng)
        assert 0.494 <= y.mean() <= 0.506

    def test_far_above_threshold(self):
        spec = _scalar_outcome_spec(a=10.0, mu=0.0)
        rng = np.random.default_rng(0)
        y = dgp.sample_outcome(np.zeros((100_000, 1)), 0, spec, rng)
        assert y.mean() >= 0.9999

    def test_rate_matches_normal_cdf(self):
        # oracle: standard normal CDF at 1
        spec = _scalar_outcome_spec(a=1.0, mu=0.0)
        rng = np.random.default_rng(1)
        y = dgp.sample_outcome(np.zeros((100_000, 1)), 0, spec, rng)
        assert y.mean() == pytest.approx(stats.norm.cdf(1.0), abs=0.005)


class TestTrueOutcomeProb:
    def test_at_threshold(self):
        assert dgp.true_outcome_prob(np.array([0.0]), 0, _scalar_outcome_spec()) == 0.5

    def test_limit(self):
        spec = _scalar_outcome_spec(a=40.0)
        assert dgp.true_outcome_prob(np.array([0.0]), 0, spec) == pytest.approx(1.0)

    def test_cdf_value(self):
        spec = _scalar_outcome_spec(a=1.0)
        p = dgp.true_outcome_prob(np.array([0.0]), 0, spec)
        assert p == pytest.approx(stats.norm.cdf(1.0), abs=1e-4)

    def test_consistent_with_sampling(self):
        spec = dgp.default_config().outcome
        rng = np.random.default_rng(5)
        X = dgp.gen_covariates(dgp.default_config().covariates, 20, seed=5)
        for i in range(20):
            t = int(rng.integers(0, 2))
            p = dgp.true_outcome_prob(X[i], t, spec)
            draws = dgp.sample_outcome(np.tile(X[i], (100_000, 1)), t, spec, rng)
            se = np.sqrt(p * (1 - p) / 100_000)
            assert abs(draws.mean() - p) <= 3 * se + 1e-12


class TestAssignTreatment:
    def test_uniform_frequencies(self):
        rng = np.random.default_rng(0)
        t = dgp.assign_uniform(100_000, 2, rng)
        assert abs((t == 0).mean() - 0.5) <= 0.01

    def test_region_probability(self):
        spec = dgp.SelectionBiasSpec(region_column=0, threshold=0.0, magnitude=0.3)
        X = np.ones((100_000, 1))  # everyone in region 1 -> P(T=1) = 0.8
        rng = np.random.default_rng(0)
        t = dgp.assign_treatment(X, spec, rng)
        assert (t == 1).mean() == pytest.approx(0.8, abs=0.01)

    def test_chi_square_detects_region_dependence(self):
        spec = dgp.SelectionBiasSpec(region_column=0, threshold=0.0, magnitude=0.2)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100_000, 1))
        t = dgp.assign_treatment(X, spec, rng)
        region = (X[:, 0] >= 0).astype(int)
        table = np.array(
            [[np.sum((region == r) & (t == ti)) for ti in (0, 1)] for r in (0, 1)]
        )
        assert stats.chi2_contingency(table).pvalue < 0.001


@pytest.fixture(scope="module")
def data():
    return dgp.generate(dgp.default_config(n_rct=1000, seed=0))


class TestGenerate:
    def test_sizes(self, data):
        assert data.biased_rct.n_rows == 1000
        assert data.observational.n_rows == 100_000
        assert data.ground_truth.n_rows == 100_000

    def test_category_counts_near_reference(self, data):
        counts = {c: int(np.sum(data.rct_categories == c)) for c in dgp.CATEGORIES}
        expected = {"Persuadable": 237, "SureThing": 183, "LostCause": 560, "SleepingDog": 20}
        for cat, ref in expected.items():
            assert abs(counts[cat] - ref) <= 0.15 * ref + 3 * np.sqrt(ref), (cat, counts)

    def test_determinism(self):
        cfg = dgp.default_config(n_rct=200, seed=3)
        cfg.obs_multiplier = cfg.ground_truth_multiplier = 2
        a, b = dgp.generate(cfg), dgp.generate(cfg)
        for da, db in [
            (a.biased_rct, b.biased_rct),
            (a.observational, b.observational),
            (a.ground_truth, b.ground_truth),
        ]:
            assert da.to_frame().equals(db.to_frame())

    def test_ground_truth_assignment_independent(self, data):
        gt = data.ground_truth
        bucket = (gt.features[:, 0] >= 0).astype(int)
        table = np.array(
            [[np.sum((bucket == r) & (gt.treatment == t)) for t in (0, 1)] for r in (0, 1)]
        )
        assert stats.chi2_contingency(table).pvalue > 0.01

    def test_true_uplift_attached(self, data):
        assert data.biased_rct.true_uplift is not None
        cfg = dgp.default_config()
        expected = dgp.true_uplift(data.biased_rct.features[:5], cfg.outcome)
        assert np.allclose(data.biased_rct.true_uplift[:5], expected)


class TestClassifyCategory:
    @pytest.mark.parametrize(
        "y1,y0,expected",
        [(1, 0, "Persuadable"), (1, 1, "SureThing"), (0, 0, "LostCause"), (0, 1, "SleepingDog")],
    )
    def test_truth_table(self, y1, y0, expected):
        assert dgp.classify_category(np.array([y1]), np.array([y0]))[0] == expected


def test_smd_ordering_obs_exceeds_rct_exceeds_gt():
    from pseudofuse import fusion

    cfg = dgp.default_config(n_rct=2000, seed=11)
    cfg.obs_multiplier = cfg.ground_truth_multiplier = 5
    data = dgp.generate(cfg)
    sel = list(range(data.biased_rct.n_features))
    smd = {
        name: fusion.smd_summary(fusion.smd_report(ds, sel))["mean_smd"]
        for name, ds in [
            ("obs", data.observational),
            ("rct", data.biased_rct),
            ("gt", data.ground_truth),
        ]
    }
    assert smd["obs"] > smd["rct"] > smd["gt"]
