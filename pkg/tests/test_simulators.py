import numpy as np
import pytest
from scipy import stats

from curveclust import gen_three_class, gen_waveform
from curveclust.simulators import THREE_CLASS_PI, generate, h1, h2, h3, three_class_means, truth, waveform_means


def test_three_class_shape():
    ds = gen_three_class(100, seed=1)
    assert ds.n == 100 and set(ds.lengths) == {50}
    assert set(np.unique(ds.labels)) <= {1, 2, 3}
    np.testing.assert_allclose(ds.curves[0].x, np.linspace(0, 1, 50))


def test_three_class_zero_noise():
    ds = gen_three_class(30, seed=2, noise_sd=0.0)
    mu = three_class_means(np.linspace(0, 1, 50))
    for c, z in zip(ds.curves, ds.labels):
        np.testing.assert_array_equal(c.y, mu[z - 1])


def test_three_class_means_formula():
    x = np.array([0.0, 0.25, 1.0])
    expected = [
        [0.8 + 0.5 * np.exp(-1.5 * v) * np.sin(1.3 * np.pi * v) for v in x],
        [0.5 + 0.8 * np.exp(-v) * np.sin(0.9 * np.pi * v) for v in x],
        [1.0 + 0.5 * np.exp(-v) * np.sin(1.2 * np.pi * v) for v in x],
    ]
    np.testing.assert_allclose(three_class_means(x), expected, rtol=1e-15)


def test_three_class_noise_variance():
    ds = gen_three_class(1000, seed=3)
    mu = three_class_means(ds.curves[0].x)
    R = ds.response_matrix() - mu[ds.labels - 1]
    for k in (1, 2, 3):
        v = R[ds.labels == k].var(ddof=1)
        assert abs(v - 0.01) / 0.01 < 0.2


def test_pulses():
    t = np.arange(1.0, 22.0)
    assert h1(t).max() == 6 and t[np.argmax(h1(t))] == 11
    assert np.all(h1(t)[np.abs(t - 11) >= 6] == 0)
    np.testing.assert_array_equal(h2(t), h1(t - 4))
    np.testing.assert_array_equal(h3(t), h1(t + 4))


def test_waveform_shape_and_endpoint():
    ds = gen_waveform(500, seed=7)
    assert ds.n == 500 and set(ds.lengths) == {21}
    clean = gen_waveform(60, seed=1, noise_sd=0.0, u=1.0)
    t = clean.curves[0].x
    firsts = {1: h1(t), 2: h2(t), 3: h1(t)}
    for c, z in zip(clean.curves, clean.labels):
        np.testing.assert_array_equal(c.y, firsts[int(z)])


def test_waveform_class_means_at_half():
    clean = gen_waveform(30, seed=4, noise_sd=0.0, u=0.5)
    mu = waveform_means()
    for c, z in zip(clean.curves, clean.labels):
        np.testing.assert_allclose(c.y, mu[z - 1])


def test_waveform_noise_variance():
    # the noise is the part left after removing the u-dependent signal; recover it with u=0.5 and zero noise
    ds = gen_waveform(2000, seed=5, u=0.5)
    R = ds.response_matrix() - waveform_means()[ds.labels - 1]
    assert abs(R.var(ddof=1) - 1.0) < 0.1


def test_determinism_and_seed_dependence():
    a, b, c = gen_waveform(50, 9), gen_waveform(50, 9), gen_waveform(50, 10)
    np.testing.assert_array_equal(a.response_matrix(), b.response_matrix())
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.response_matrix(), c.response_matrix())
    np.testing.assert_array_equal(a.curves[0].x, c.curves[0].x)


@pytest.mark.parametrize("gen,pi", [(gen_three_class, THREE_CLASS_PI), (gen_waveform, np.full(3, 1 / 3))])
def test_label_frequencies(gen, pi):
    ds = gen(5000, seed=12)
    counts = np.bincount(ds.labels, minlength=4)[1:]
    assert stats.chisquare(counts, 5000 * pi).pvalue > 0.001


def test_fixed_counts():
    ds = gen_three_class(100, seed=1, fixed_counts=True)
    assert list(np.bincount(ds.labels)[1:]) == [40, 30, 30]
    ds = gen_waveform(500, seed=1, fixed_counts=True)
    assert sorted(np.bincount(ds.labels)[1:]) == [166, 167, 167]


def test_truth_and_dispatch():
    tr = truth("three_class")
    assert tr["means"].shape == (3, 50) and tr["sigma"] == 0.1
    assert truth("waveform")["means"].shape == (3, 21)
    assert generate("waveform", 10, 3).n == 10
    with pytest.raises(ValueError):
        generate("phonemes", 10, 3)
    with pytest.raises(ValueError):
        gen_three_class(2, 0)


def test_waveform_optimal_error_rate():
    # Bayes classifier on the true generative model: the class likelihood
    # integrates the Gaussian density over the uniform mixing weight.
    from scipy.special import logsumexp

    ds = gen_waveform(6000, seed=21)
    Y = ds.response_matrix()
    t = ds.curves[0].x
    u = (np.arange(400) + 0.5) / 400
    pairs = ((h1, h2), (h2, h3), (h1, h3))
    loglik = []
    for a, b in pairs:
        mu = u[:, None] * a(t)[None, :] + (1 - u[:, None]) * b(t)[None, :]
        sq = (Y ** 2).sum(1)[:, None] - 2 * Y @ mu.T + (mu ** 2).sum(1)[None, :]
        loglik.append(logsumexp(-0.5 * sq, axis=1))
    z = np.argmax(np.column_stack(loglik), axis=1) + 1
    err = np.mean(z != ds.labels)
    # well above any single-digit error rate: the classes overlap heavily
    assert 0.11 < err < 0.145
