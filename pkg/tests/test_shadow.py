import numpy as np
import pytest

from reconlab import metrics, nn, shadow
from reconlab.data import SplitSpec, synth_classification, split


def tiny_setup(d=8, k=3, fixed_n=30, pool_n=60, seed=1):
    ds = synth_classification(d, k, fixed_n + pool_n + 5, 0.15, seed=seed)
    fixed, pool, targets = split(ds, SplitSpec(fixed_n, pool_n, 5, split_seed=2))
    arch = nn.MlpArchitecture((d, 6, k))
    cfg = nn.TrainConfig(epochs=10, init_seed=11, shuffle_seed=12, noise_seed=13)
    return fixed, pool, targets, arch, cfg


# ------------------------------------------------------------ featurizers

def test_feature_lengths_match_reference_mlp():
    # width-10 hidden layer over 784 inputs and 10 classes
    arch = nn.MlpArchitecture((784, 10, 10))
    model = nn.init_params(arch, 0)
    assert shadow.featurize(model, shadow.Featurizer("whitebox")).shape == (7960,)
    assert shadow.featurize(model, shadow.Featurizer("layers", layers=(1,))).shape == (110,)
    probe = np.random.default_rng(0).uniform(size=(200, 784))
    assert shadow.featurize(model, shadow.Featurizer("blackbox", probe=probe)).shape == (2000,)


def test_featurizer_layer_bounds():
    model = nn.init_params(nn.MlpArchitecture((4, 3, 2)), 0)
    with pytest.raises(ValueError):
        shadow.featurize(model, shadow.Featurizer("layers", layers=(5,)))


def test_whitebox_equals_flatten():
    model = nn.init_params(nn.MlpArchitecture((5, 4, 3)), 1)
    assert np.array_equal(
        shadow.featurize(model, shadow.Featurizer("whitebox")), model.flatten()
    )


# ---------------------------------------------------------- normalization

def test_norm_stats_zero_mean_unit_var():
    F = np.random.default_rng(0).normal(3.0, 2.5, size=(500, 12))
    stats = shadow.NormStats.fit(F)
    out = stats.apply(F)
    assert np.max(np.abs(out.mean(axis=0))) <= 1e-9
    assert np.max(np.abs(out.std(axis=0) - 1.0)) <= 1e-9


def test_norm_stats_constant_coordinate():
    F = np.random.default_rng(1).normal(size=(100, 3))
    F[:, 1] = 4.2
    stats = shadow.NormStats.fit(F)
    out = stats.apply(F)
    assert np.max(np.abs(out[:, 1])) <= 1e-12
    assert np.isfinite(out).all()


def test_norm_stats_inverse_roundtrip():
    F = np.random.default_rng(2).normal(size=(50, 6))
    stats = shadow.NormStats.fit(F)
    back = stats.inverse(stats.apply(F))
    assert np.max(np.abs(back - F)) <= 1e-12


# -------------------------------------------------------------- shadows

def test_gen_shadows_deterministic_and_finite():
    fixed, pool, _, arch, cfg = tiny_setup()
    feat = shadow.Featurizer("whitebox")
    a = shadow.gen_shadows(fixed, pool, arch, cfg, feat)
    b = shadow.gen_shadows(fixed, pool, arch, cfg, feat)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.targets, b.targets)
    assert np.isfinite(a.features).all()
    assert len(a) == len(pool)
    normed = a.stats.apply(a.features)
    assert np.max(np.abs(normed.mean(axis=0))) <= 1e-9


def test_shared_init_shadows_reproduce_release():
    # informed-adversary consistency: a shadow trained on the released target
    # with the shared seeds is bitwise the released model
    fixed, pool, targets, arch, cfg = tiny_setup()
    release = nn.train(fixed.with_point(targets[0]), arch, cfg)
    one_target_pool = pool.subset([0]).with_point(targets[0]).subset([1])
    models = shadow.gen_shadow_models(fixed, one_target_pool, arch, cfg)
    assert np.array_equal(models[0].flatten(), release.flatten())


def test_random_init_ablation_changes_models():
    fixed, pool, _, arch, cfg = tiny_setup(pool_n=4)
    shared = shadow.gen_shadow_models(fixed, pool, arch, cfg, random_init=False)
    varied = shadow.gen_shadow_models(fixed, pool, arch, cfg, random_init=True)
    assert any(not np.array_equal(s.flatten(), v.flatten())
               for s, v in zip(shared, varied))
    # and distinct shadows get distinct inits under the ablation
    assert shadow.shadow_config(cfg, 0, True).init_seed != \
        shadow.shadow_config(cfg, 1, True).init_seed


def test_parallel_serial_equivalence(monkeypatch):
    fixed, pool, _, arch, cfg = tiny_setup(pool_n=8)
    feat = shadow.Featurizer("whitebox")
    serial = shadow.gen_shadows(fixed, pool, arch, cfg, feat, workers=1)
    parallel = shadow.gen_shadows(fixed, pool, arch, cfg, feat, workers=4)
    assert np.array_equal(serial.features, parallel.features)


def test_workers_env_variable(monkeypatch):
    monkeypatch.setenv("RECONLAB_THREADS", "3")
    assert shadow.default_workers() == 3
    monkeypatch.delenv("RECONLAB_THREADS")
    assert shadow.default_workers() == 1


# ------------------------------------------------------------ persistence

@pytest.mark.parametrize("mode", ["whitebox", "layers", "blackbox"])
def test_shadow_set_roundtrip(tmp_path, mode):
    fixed, pool, _, arch, cfg = tiny_setup(pool_n=10)
    if mode == "whitebox":
        feat = shadow.Featurizer("whitebox")
    elif mode == "layers":
        feat = shadow.Featurizer("layers", layers=(1,))
    else:
        feat = shadow.Featurizer("blackbox", probe=fixed.X[:5])
    s = shadow.gen_shadows(fixed, pool, arch, cfg, feat)
    prefix = str(tmp_path / "shadows")
    s.save(prefix)
    back = shadow.ShadowSet.load(prefix)
    assert np.array_equal(back.features, s.features)
    assert np.array_equal(back.targets, s.targets)
    assert back.featurizer.mode == mode
    assert np.allclose(back.stats.mean, s.stats.mean)
    assert np.allclose(back.stats.std, s.stats.std)
    if mode == "blackbox":
        assert np.array_equal(back.featurizer.probe, feat.probe)


# ------------------------------------------------------------- reconn

def test_reconn_deterministic():
    fixed, pool, _, arch, cfg = tiny_setup(pool_n=40)
    s = shadow.gen_shadows(fixed, pool, arch, cfg, shadow.Featurizer("whitebox"))
    rc = shadow.RecoNNConfig(epochs=5, batch_size=16, seed=3)
    a = shadow.train_reconn(s, rc)
    b = shadow.train_reconn(s, rc)
    assert np.array_equal(a.params.flatten(), b.params.flatten())


def test_reconn_batch_size_check():
    fixed, pool, _, arch, cfg = tiny_setup(pool_n=10)
    s = shadow.gen_shadows(fixed, pool, arch, cfg, shadow.Featurizer("whitebox"))
    with pytest.raises(ValueError):
        shadow.train_reconn(s, shadow.RecoNNConfig(batch_size=128))


def test_reconn_memorizes_training_pairs():
    fixed, pool, _, arch, cfg = tiny_setup(d=8, pool_n=60)
    s = shadow.gen_shadows(fixed, pool, arch, cfg, shadow.Featurizer("whitebox"))
    phi = shadow.train_reconn(s, shadow.RecoNNConfig(epochs=200, batch_size=32, seed=3))
    preds = phi.predict(s.stats.apply(s.features))
    train_mse = float(np.mean((preds - s.targets) ** 2))
    pair_dists = [metrics.mse(s.targets[i], s.targets[j])
                  for i in range(0, 60, 6) for j in range(i + 1, 60, 7)]
    assert train_mse <= 0.1 * float(np.mean(pair_dists))


def test_attack_outputs_deterministic_and_bounded():
    fixed, pool, targets, arch, cfg = tiny_setup(pool_n=40)
    feat = shadow.Featurizer("whitebox")
    s = shadow.gen_shadows(fixed, pool, arch, cfg, feat)
    phi = shadow.train_reconn(s, shadow.RecoNNConfig(epochs=10, batch_size=16, seed=3))
    release = nn.train(fixed.with_point(targets[0]), arch, cfg)
    a = shadow.attack(phi, release, feat, s.stats)
    b = shadow.attack(phi, release, feat, s.stats)
    assert np.array_equal(a, b)
    assert a.shape == (fixed.dim,)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_run_protocol_oracle_attack_scores_zero():
    fixed, _, targets, arch, cfg = tiny_setup()
    z = targets[0]
    score = shadow.run_protocol(fixed, z, arch, cfg, attack_fn=lambda theta: z.x)
    assert score == 0.0


def test_run_protocol_deterministic():
    fixed, pool, targets, arch, cfg = tiny_setup(pool_n=40)
    feat = shadow.Featurizer("whitebox")
    s = shadow.gen_shadows(fixed, pool, arch, cfg, feat)
    phi = shadow.train_reconn(s, shadow.RecoNNConfig(epochs=10, batch_size=16, seed=3))
    bundle = shadow.AttackBundle(phi, feat, s.stats)
    a = shadow.run_protocol(fixed, targets[1], arch, cfg, bundle)
    b = shadow.run_protocol(fixed, targets[1], arch, cfg, bundle)
    assert a == b
