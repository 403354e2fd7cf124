import numpy as np
import pytest

from ralp.channel import ActivityMap, ChannelConfig, db_to_linear, draw_activity, synthesize, synthesize_batch


def cfg(**kw):
    base = dict(m=10, p1=db_to_linear(12), p2=db_to_linear(6), n0=1.0, k1=2, k2=5)
    base.update(kw)
    return ChannelConfig(**base)


class TestConfig:
    def test_from_db(self):
        c = ChannelConfig.from_db(m=10, p1_db=12, p2_db=6, k1=2, k2=5)
        assert c.p1 == pytest.approx(15.848931924611133)
        assert c.p2 == pytest.approx(3.981071705534973)
        assert c.n0 == 1.0

    @pytest.mark.parametrize(
        "kw", [dict(p1=1.0, p2=2.0), dict(p1=1.0, p2=1.0), dict(p2=0.0), dict(m=0), dict(n0=-1.0), dict(k1=-1)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)


class TestDrawActivity:
    def test_empty(self, pool13, rng):
        act = draw_activity(pool13, cfg(k1=0, k2=0), rng)
        assert act.k1 == 0 and act.k2 == 0
        assert act.type1_fading.shape == (0, 10)

    def test_distinct_choices(self, pool13, rng):
        for _ in range(50):
            act = draw_activity(pool13, cfg(k1=2, k2=5), rng)
            assert len(set(act.type1_choices)) == 2 and len(set(act.type2_choices)) == 5
            assert act.type1_choices.max() < 13 and act.type2_choices.max() < 65
            assert act.type1_fading.shape == (2, 10) and act.type2_fading.shape == (5, 10)

    def test_seeded_determinism(self, pool13):
        a = draw_activity(pool13, cfg(), np.random.default_rng(5))
        b = draw_activity(pool13, cfg(), np.random.default_rng(5))
        for f in ("type1_choices", "type2_choices", "type1_fading", "type2_fading"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_choices_uniform(self, pool13):
        rng = np.random.default_rng(1)
        counts = np.zeros(13)
        for _ in range(3000):
            counts[draw_activity(pool13, cfg(k1=2, k2=0), rng).type1_choices] += 1
        # 6000 picks over 13 preambles
        assert np.all(np.abs(counts - 6000 / 13) < 5 * np.sqrt(6000 / 13))

    def test_too_many_devices(self, pool13, rng):
        with pytest.raises(ValueError):
            draw_activity(pool13, cfg(k1=14), rng)
        with pytest.raises(ValueError):
            draw_activity(pool13, cfg(k2=66), rng)


class TestSynthesize:
    def test_noise_only_variance(self, pool13):
        rng = np.random.default_rng(2)
        c = cfg(k1=0, k2=0, n0=1.0)
        act = draw_activity(pool13, c, rng)
        ys = np.stack([synthesize(pool13, act, c, rng).y for _ in range(2000)])
        assert np.mean(np.abs(ys) ** 2) == pytest.approx(1.0, abs=0.02)
        # circular symmetry: equal real/imaginary power, no pseudo-covariance
        assert np.mean(ys.real**2) == pytest.approx(0.5, abs=0.01)
        assert abs(np.mean(ys**2)) < 0.01

    def test_single_type1_device_noiseless(self, pool13, rng):
        c = cfg(k1=1, k2=0, n0=0.0)
        act = draw_activity(pool13, c, rng)
        y = synthesize(pool13, act, c, rng).y
        l = act.type1_choices[0]
        v = act.type1_fading[0]
        np.testing.assert_allclose(y @ pool13.l1[l], np.sqrt(c.p1) * v, atol=1e-12)
        np.testing.assert_allclose(y, np.sqrt(c.p1) * np.outer(v, pool13.l1[l].conj()), atol=1e-12)

    def test_energy_identity(self, pool13):
        # E||Y||_F^2 = M (K1 P1 + K2 P2 + N N0)
        c = cfg(k1=2, k2=10)
        rng = np.random.default_rng(3)
        e = []
        for _ in range(10_000):
            act = draw_activity(pool13, c, rng)
            e.append(np.sum(np.abs(synthesize(pool13, act, c, rng).y) ** 2))
        e = np.array(e)
        expected = c.m * (c.k1 * c.p1 + c.k2 * c.p2 + 13 * c.n0)
        assert abs(e.mean() / expected - 1) < 0.02
        assert abs(e.mean() - expected) < 3 * e.std() / np.sqrt(e.size)

    def test_energy_identity_batch(self, pool13):
        c = cfg(k1=2, k2=10)
        y, ch1, ch2 = synthesize_batch(pool13, c, np.random.default_rng(4), 20_000)
        e = np.sum(np.abs(y) ** 2, axis=(1, 2))
        expected = c.m * (c.k1 * c.p1 + c.k2 * c.p2 + 13 * c.n0)
        assert abs(e.mean() - expected) < 3 * e.std() / np.sqrt(e.size)
        assert ch1.shape == (20_000, 2) and np.all(ch1[:, 0] < ch1[:, 1])
        assert ch2.shape == (20_000, 10) and np.all(np.diff(ch2, axis=1) > 0)

    def test_linear_in_fading(self, pool13, rng):
        c = cfg()
        act = draw_activity(pool13, c, rng)
        doubled = ActivityMap(act.type1_choices, act.type2_choices, 2 * act.type1_fading, 2 * act.type2_fading)
        s1 = synthesize(pool13, act, c, np.random.default_rng(9))
        s2 = synthesize(pool13, doubled, c, np.random.default_rng(9))
        np.testing.assert_allclose(s2.y - s2.noise, 2 * (s1.y - s1.noise), atol=1e-12)

    def test_dimension_mismatch(self, pool13, rng):
        c = cfg()
        act = draw_activity(pool13, c, rng)
        with pytest.raises(ValueError):
            synthesize(pool13, act, cfg(m=4), rng)
