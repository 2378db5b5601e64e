import numpy as np
import pytest

from cano.errors import InvalidInputError
from cano.criteria import CriterionConfig, horizontal_geometric
from cano.geometry import LabeledCloud, Rotation, geodesic_angle
from cano.metrics import (NO_SYMMETRY, ErrorSample, SymmetrySpec, accuracy_at,
                          gt_equivariance_consistency, instance_consistency, iqr,
                          mean_abs_error, sym_aware_angle)

from shapes import make_template

# mean and second moment of the relative-angle distribution of Haar-random
# rotation pairs, density (1 - cos t) / pi on [0, pi]
HAAR_MEAN_RAD = np.pi / 2 + 2 / np.pi


def replay_canonicalizer(seed, n, transform=lambda r: r.inverse(), sampler=None):
    """Canonicalizer that replays the metric driver's seeded rotation stream
    and answers transform(R_j) for trial j, independent of the cloud."""
    rng = np.random.default_rng(seed)
    sampler = sampler or Rotation.random
    queue = [sampler(rng) for _ in range(n)]
    it = iter(queue)

    def canon(cloud):
        return transform(next(it))

    return canon


class TestSymAwareAngle:
    def test_equal_any_symmetry(self):
        rng = np.random.default_rng(0)
        r = Rotation.random(rng)
        for sym in (NO_SYMMETRY,
                    SymmetrySpec(kind="discrete", angle_deg=90.0),
                    SymmetrySpec(kind="continuous")):
            assert sym_aware_angle(r, r, sym) == 0.0

    def test_continuous_spin_free(self):
        rng = np.random.default_rng(1)
        sym = SymmetrySpec(kind="continuous")
        for deg in (73.0, 10.0, 180.0):
            gt = Rotation.random(rng)
            pred = gt @ Rotation.rot_z(np.radians(deg))
            assert sym_aware_angle(pred, gt, sym) == 0.0

    def test_discrete_quarter_symmetry(self):
        sym = SymmetrySpec(kind="discrete", angle_deg=90.0)
        rng = np.random.default_rng(2)
        gt = Rotation.random(rng)
        pred = gt @ Rotation.rot_z(np.radians(85.0))
        err = sym_aware_angle(pred, gt, sym)
        assert abs(err - 5.0) < 1e-9
        # the enumeration over the 4 symmetry elements is the oracle
        oracle = min(geodesic_angle(pred, gt @ Rotation.rot_z(np.radians(a)))
                     for a in (0.0, 90.0, 180.0, 270.0))
        assert abs(err - oracle) < 1e-12

    def test_never_exceeds_geodesic(self):
        rng = np.random.default_rng(3)
        for sym in (SymmetrySpec(kind="discrete", angle_deg=120.0),
                    SymmetrySpec(kind="continuous")):
            for _ in range(50):
                a, b = Rotation.random(rng), Rotation.random(rng)
                assert sym_aware_angle(a, b, sym) <= geodesic_angle(a, b) + 1e-9

    def test_invariant_to_symmetry_composition(self):
        sym = SymmetrySpec(kind="discrete", angle_deg=60.0)
        rng = np.random.default_rng(4)
        pred, gt = Rotation.random(rng), Rotation.random(rng)
        base = sym_aware_angle(pred, gt, sym)
        for s in sym.elements():
            assert abs(sym_aware_angle(pred, gt @ s, sym) - base) < 1e-9

    def test_bad_specs_rejected(self):
        with pytest.raises(InvalidInputError):
            SymmetrySpec(kind="discrete", angle_deg=70.0)  # does not divide 360
        with pytest.raises(InvalidInputError):
            SymmetrySpec(kind="fancy")
        with pytest.raises(InvalidInputError):
            SymmetrySpec(axis=(0, 0, 0))


class TestScalarMetrics:
    def test_fixture_accuracy(self):
        errs = [5.0, 15.0, 25.0, 35.0]
        assert accuracy_at(errs, 10.0) == 0.25
        assert accuracy_at(errs, 30.0) == 0.75
        assert accuracy_at([0.0] * 7, 10.0) == 1.0

    def test_fixture_mean_and_iqr(self):
        errs = [1.0, 2.0, 3.0, 4.0]
        assert mean_abs_error(errs) == 2.5
        assert abs(iqr(errs) - 1.5) < 1e-12  # Q3=3.25, Q1=1.75
        assert iqr([7.0]) == 0.0
        assert iqr([3.0] * 9) == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        errs = list(rng.uniform(0, 180, 31))
        shuffled = list(rng.permutation(errs))
        assert accuracy_at(errs, 30) == accuracy_at(shuffled, 30)
        assert abs(mean_abs_error(errs) - mean_abs_error(shuffled)) < 1e-10
        assert abs(iqr(errs) - iqr(shuffled)) < 1e-12

    def test_empty_rejected(self):
        for fn in (lambda: accuracy_at([], 10), mean_abs_error, iqr):
            with pytest.raises(InvalidInputError):
                fn() if fn.__name__ == "<lambda>" else fn([])

    def test_error_sample_range(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            s = ErrorSample("x", Rotation.random(rng), Rotation.random(rng))
            assert 0.0 <= s.error_deg <= 180.0

    def test_accuracy_matches_haar_cap_measure(self):
        # P(angle <= eps) for Haar rotations = (eps - sin eps) / pi
        rng = np.random.default_rng(7)
        samples = [ErrorSample("x", Rotation.random(rng), Rotation.identity())
                   for _ in range(1000)]
        eps = np.pi / 6
        expected = (eps - np.sin(eps)) / np.pi  # ~0.00751
        assert abs(accuracy_at(samples, 30.0) - expected) < 0.02


class TestConsistency:
    def test_exact_inverse_oracle_is_zero(self):
        cloud = LabeledCloud(np.random.default_rng(8).normal(size=(30, 3)))
        for seed in (0, 11, 202):
            canon = replay_canonicalizer(seed, 16)
            res = instance_consistency(canon, cloud, n_trials=16, seed=seed)
            assert res.value == 0.0
            assert res.failures == 0
            canon = replay_canonicalizer(seed, 16)
            res = gt_equivariance_consistency(canon, cloud, Rotation.identity(),
                                              n_trials=16, seed=seed)
            assert res.value == 0.0

    def test_identity_canonicalizer_matches_haar_mean(self):
        cloud = LabeledCloud(np.random.default_rng(9).normal(size=(10, 3)))
        res = instance_consistency(lambda c: Rotation.identity(), cloud,
                                   n_trials=100, seed=42)
        assert abs(res.value - HAAR_MEAN_RAD) < 0.05
        # independent Monte-Carlo oracle over a fresh Haar stream
        rng = np.random.default_rng(4242)
        rots = [Rotation.random(rng) for _ in range(100)]
        mc = np.mean([np.radians(geodesic_angle(rots[j], rots[l]))
                      for j in range(100) for l in range(j + 1, 100)])
        assert abs(res.value - mc) < 0.05

    def test_constant_bias_gec(self):
        cloud = LabeledCloud(np.random.default_rng(10).normal(size=(10, 3)))
        bias = Rotation.rot_z(0.1)
        canon = replay_canonicalizer(3, 20, transform=lambda r: bias @ r.inverse())
        res = gt_equivariance_consistency(canon, cloud, Rotation.identity(),
                                          n_trials=20, seed=3)
        assert abs(res.value - 0.1) < 1e-6

    def test_failures_counted(self):
        cloud = LabeledCloud(np.random.default_rng(11).normal(size=(10, 3)))
        calls = {"n": 0}

        def flaky(c):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise RuntimeError("boom")
            return Rotation.identity()

        res = instance_consistency(flaky, cloud, n_trials=9, seed=0)
        assert res.failures == 3
        assert res.n_trials == 9

    def test_too_few_trials_rejected(self):
        cloud = LabeledCloud(np.random.default_rng(12).normal(size=(10, 3)))
        with pytest.raises(InvalidInputError):
            instance_consistency(lambda c: Rotation.identity(), cloud, n_trials=1)

    def test_triangle_inequality_audit(self):
        # pairwise distance between canonical orientations never exceeds the
        # sum of their distances to ground truth
        rng = np.random.default_rng(13)
        orients = [Rotation.rot_z(w) @ Rotation.about_axis([1, 0, 0], t)
                   for w, t in rng.uniform(-0.2, 0.2, size=(12, 2))]
        gt = Rotation.identity()
        gec = [geodesic_angle(o, gt) for o in orients]
        for j in range(len(orients)):
            for l in range(j + 1, len(orients)):
                assert geodesic_angle(orients[j], orients[l]) <= gec[j] + gec[l] + 1e-9

    def test_hg_canonicalizer_yaw_consistency(self):
        template, _ = make_template(1, n_points=200)
        cfg = CriterionConfig()

        def canon(cloud):
            return horizontal_geometric(cloud, template, cfg).r_g

        def yaw_sampler(rng):
            return Rotation.rot_z(float(rng.uniform(0, 2 * np.pi)))

        res = instance_consistency(canon, template.cloud, n_trials=10, seed=5,
                                   sampler=yaw_sampler)
        assert res.failures == 0
        assert res.value <= 0.004
