import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import within_se
from hdtd.errors import DegenerateSample, NonpositiveScale, NullAlternative, SingularMatrix
from hdtd.hypothesis_tests import (
    NullKind,
    NullSpec,
    PowerBoundInputs,
    ScaleMode,
    Target,
    identity_test,
    known_covariance_test,
    normal_sf,
    power_bound_identity,
    power_bound_sphericity,
    run_test,
    sigma_u0_hat,
    sphericity_test,
    upper_quantile,
)
from hdtd.matrix_core import MatrixSample, transpose_sample
from hdtd.simulation import CovConfig, ModelSpec, PreparedModel, build_cov
from hdtd.trace_estimators import TraceEstimates, estimate_all

SPH = NullSpec()
IDN = NullSpec(kind=NullKind.IDENTITY)


def rate(spec, null, reps, scale=1.0):
    model = PreparedModel(spec)
    hits = 0
    for k in range(reps):
        s = model.draw(k)
        if scale != 1.0:
            s = s.map(lambda x: scale * x)
        hits += run_test(s, null).reject
    return hits / reps


def random_sample(seed, n=8, r=4, c=5):
    g = np.random.default_rng(seed)
    return MatrixSample(g.standard_normal((n, r, c)) * g.uniform(0.5, 2.0, (1, r, 1)))


class TestNormal:
    def test_quantile(self):
        assert upper_quantile(0.05) == pytest.approx(1.6448536269514722, abs=1e-14)
        assert upper_quantile(0.5) == 0.0

    def test_tail(self):
        assert normal_sf(0.0) == 0.5
        assert normal_sf(1.6448536269514722) == pytest.approx(0.05, abs=1e-15)
        # far tail keeps relative accuracy
        assert normal_sf(10.0) == pytest.approx(7.619853024160527e-24, rel=1e-12)

    @given(st.floats(1e-10, 1 - 1e-10))
    def test_roundtrip(self, a):
        assert normal_sf(upper_quantile(a)) == pytest.approx(a, rel=1e-9, abs=1e-15)


class TestNullSpec:
    def test_alpha(self):
        with pytest.raises(ValueError):
            NullSpec(alpha=0.0)
        with pytest.raises(ValueError):
            NullSpec(alpha=1.0)

    def test_sigma_presence(self):
        with pytest.raises(ValueError):
            NullSpec(kind=NullKind.KNOWN)
        with pytest.raises(ValueError):
            NullSpec(kind=NullKind.IDENTITY, sigma_r0=np.eye(2))

    def test_coerces_strings(self):
        n = NullSpec(kind="identity", target="column", scale_mode="estimate")
        assert n.kind is NullKind.IDENTITY and n.target is Target.COLUMNS and n.scale_mode is ScaleMode.ESTIMATE_SCALE


class TestSigmaU0:
    def test_identity_columns(self):
        est = TraceEstimates(t1=8.0, t2=8.0, t2_star=80.0, tr_sigma_c2_hat=10.0, n=20, rows=8, cols=10)
        assert sigma_u0_hat(est) == pytest.approx(0.01, rel=1e-15)
        est2 = TraceEstimates(t1=8.0, t2=8.0, t2_star=80.0, tr_sigma_c2_hat=10.0, n=40, rows=8, cols=10)
        assert sigma_u0_hat(est2) == sigma_u0_hat(est) / 2

    def test_recompute(self):
        est = estimate_all(random_sample(1))
        ref = (2.0 / est.n) * est.tr_sigma_c2_hat / est.cols**2
        assert sigma_u0_hat(est) == pytest.approx(ref, rel=1e-14)

    def test_degenerate(self):
        est = TraceEstimates(t1=1.0, t2=-1.0, t2_star=1.0, tr_sigma_c2_hat=-1.0, n=5, rows=2, cols=2)
        with pytest.raises(DegenerateSample):
            sigma_u0_hat(est)


class TestOutcomeContract:
    @settings(max_examples=80)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.01, 0.05, 0.1, 0.5]), st.sampled_from(["sphericity", "identity"]))
    def test_decision_consistency(self, seed, alpha, kind):
        out = run_test(random_sample(seed), NullSpec(kind=kind, alpha=alpha))
        assert out.p_value == normal_sf(out.statistic)
        assert 0.0 <= out.p_value <= 1.0
        assert out.reject == (out.statistic >= out.z_alpha) == (out.p_value <= alpha)

    def test_boundary_rejects(self):
        z = upper_quantile(0.05)
        assert normal_sf(z) <= 0.05 or math.isclose(normal_sf(z), 0.05)


class TestSphericity:
    def test_statistic(self):
        s = random_sample(2)
        out = sphericity_test(s)
        e = out.estimates
        u = e.rows * e.t2 / e.t1**2 - 1.0
        assert out.statistic == pytest.approx(u / sigma_u0_hat(e), rel=1e-14)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_location_scale_invariance(self, seed, t):
        s = random_sample(seed)
        m = np.random.default_rng(seed + 1).standard_normal((4, 5)) * 10
        a = sphericity_test(s).statistic
        b = sphericity_test(s.map(lambda x: t * x + m)).statistic
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))

    def test_wrong_kind(self):
        with pytest.raises(ValueError):
            sphericity_test(random_sample(3), IDN)

    def test_zero_data(self):
        with pytest.raises(DegenerateSample):
            sphericity_test(MatrixSample(np.zeros((5, 3, 3))))

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["sphericity", "identity"]))
    def test_duality(self, seed, kind):
        s = random_sample(seed, r=3, c=6)
        col = run_test(s, NullSpec(kind=kind, target=Target.COLUMNS)).statistic
        row = run_test(transpose_sample(s), NullSpec(kind=kind)).statistic
        assert col == row

    def test_power_separates_scale_alternative(self):
        spec = ModelSpec(n=40, row_cov=CovConfig("scaled", 8, (2.0,)), col_cov=CovConfig("ar1", 50, (0.15,)), seed=21)
        assert rate(spec, IDN, 1000) >= 0.99
        assert 0.03 <= rate(spec, SPH, 1000) <= 0.09


class TestIdentity:
    def test_null_mean_zero(self):
        spec = ModelSpec(n=20, row_cov=CovConfig("identity", 6), col_cov=CovConfig("ar1", 8, (0.3,)), seed=22)
        model = PreparedModel(spec)
        vals = []
        for k in range(3000):
            e = estimate_all(model.draw(k))
            vals.append(e.t2 / e.rows - 2 * e.t1 / e.rows + 1)
        assert within_se(vals, 0.0)

    def test_location_but_not_scale_invariant(self):
        s = random_sample(4)
        m = np.full((4, 5), 3.0)
        a = identity_test(s).statistic
        assert identity_test(s.map(lambda x: x + m)).statistic == pytest.approx(a, rel=1e-9)
        b = identity_test(s.map(lambda x: 2 * x)).statistic
        assert abs(a - b) > 1e-6 * max(1.0, abs(a))


class TestKnown:
    def test_identity_reduction(self):
        for seed in range(10):
            s = random_sample(seed)
            known = known_covariance_test(s, NullSpec(kind=NullKind.KNOWN, sigma_r0=np.eye(4)))
            assert known.statistic == identity_test(s).statistic
            assert known.p_value == identity_test(s).p_value

    def test_column_target(self):
        s = random_sample(5, r=3, c=4)
        out = known_covariance_test(s, NullSpec(kind=NullKind.KNOWN, sigma_r0=np.eye(4), target=Target.COLUMNS))
        assert out.statistic == identity_test(s, NullSpec(kind=NullKind.IDENTITY, target=Target.COLUMNS)).statistic

    def test_errors(self):
        s = random_sample(6)
        with pytest.raises(SingularMatrix):
            known_covariance_test(s, NullSpec(kind=NullKind.KNOWN, sigma_r0=np.diag([1.0, 1.0, 1.0, 0.0])))
        with pytest.raises(ValueError):
            known_covariance_test(s, NullSpec(kind=NullKind.KNOWN, sigma_r0=np.eye(3)))
        # T1N* equals the trace of the sample covariance, so only identical matrices give k = 0
        with pytest.raises(NonpositiveScale):
            known_covariance_test(
                MatrixSample(np.ones((5, 2, 3))),
                NullSpec(kind=NullKind.KNOWN, sigma_r0=np.eye(2), scale_mode=ScaleMode.ESTIMATE_SCALE),
            )

    def test_estimate_scale_k(self):
        s = random_sample(7)
        out = known_covariance_test(s, NullSpec(kind=NullKind.KNOWN, sigma_r0=2 * np.eye(4), scale_mode="estimate"))
        from hdtd.trace_estimators import t1n_star

        assert out.k_hat == pytest.approx(t1n_star(s) / 8.0, rel=1e-14)

    def test_size_and_scale_modes(self):
        spec = ModelSpec(n=40, row_cov=CovConfig("cs", 8), col_cov=CovConfig("ar1", 50, (0.5,)), seed=23)
        s0 = build_cov(spec.row_cov)
        known = NullSpec(kind=NullKind.KNOWN, sigma_r0=s0)
        est = NullSpec(kind=NullKind.KNOWN, sigma_r0=s0, scale_mode=ScaleMode.ESTIMATE_SCALE)
        assert 0.02 <= rate(spec, est, 1000) <= 0.10
        # Sigma_R = 2 Sigma0: the trace-known mode sees the factor, the estimating mode absorbs it
        assert rate(spec, known, 1000, scale=math.sqrt(2.0)) >= 0.99
        assert 0.02 <= rate(spec, est, 1000, scale=math.sqrt(2.0)) <= 0.10


class TestPowerBounds:
    def inputs(self, sr, n=40, c=10, b=0.0):
        return PowerBoundInputs(sigma_r=sr, sigma_c=np.eye(c), n=n, b=b)

    def test_null_alternatives(self):
        with pytest.raises(NullAlternative):
            power_bound_sphericity(self.inputs(3.0 * np.eye(8)))
        with pytest.raises(NullAlternative):
            power_bound_identity(self.inputs(np.eye(8)))

    def test_psi_floor(self):
        sr = np.diag([2.0] + [1.0] * 7)
        assert power_bound_sphericity(self.inputs(sr, b=-2.0)) == power_bound_sphericity(self.inputs(sr, b=0.0))
        assert power_bound_identity(self.inputs(sr, b=-2.0)) == power_bound_identity(self.inputs(sr, b=0.0))
        assert power_bound_sphericity(self.inputs(sr, b=1.5)) < power_bound_sphericity(self.inputs(sr))

    def test_identity_monotone_in_n(self):
        sr = 2.0 * np.eye(8)
        vals = [power_bound_identity(self.inputs(sr, n=n)) for n in (5, 10, 20, 40)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_in_unit_interval(self):
        sr = build_cov(CovConfig("tridiag", 8))
        for n in (4, 20, 200):
            assert 0.0 <= power_bound_sphericity(self.inputs(sr, n=n)) <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            PowerBoundInputs(sigma_r=np.eye(2), sigma_c=2 * np.eye(3), n=10)
        with pytest.raises(ValueError):
            PowerBoundInputs(sigma_r=np.eye(2), sigma_c=np.eye(3), n=10, b=-3.0)

    def test_column_factor(self):
        inp = PowerBoundInputs(sigma_r=np.eye(2), sigma_c=np.eye(10), n=10)
        assert inp.column_factor() == pytest.approx(math.sqrt(10.0))
