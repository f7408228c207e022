"""Experiment orchestration CLI.

Reproduces the attack protocols end-to-end from flat key=value config
files, persists artifacts, and emits CSV report tables. Exit codes: 0 on
success, 2 on validation errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import accounting, data, glm, metrics, mia, nn, rero, shadow
from .persist import config_hash, load_model, save_model, write_csv
from .rng import _derive

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- config file

def parse_config(path: str) -> dict:
    """Flat key=value file with [section] headers -> {"section.key": value}."""
    cfg = {}
    section = ""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(str(e)) from None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed config line: {raw!r}")
        cfg[f"{section}.{key.strip()}"] = val.strip()
    cfg["__hash__"] = config_hash(text)
    return cfg


def _get(cfg, key, default=None, cast=str):
    if key not in cfg or cfg[key] == "":
        if default is None:
            raise ConfigError(f"missing config key {key}")
        return default
    return cast(cfg[key])


def load_profile(cfg: dict):
    """Build (fixed, shadow_pool, targets, arch, train_config) from a config."""
    profile = _get(cfg, "profile.name", "desk_synthetic")
    if profile == "desk_synthetic":
        dataset = data.synth_classification(
            d=_get(cfg, "data.d", 64, int),
            num_classes=_get(cfg, "data.num_classes", 10, int),
            n=_get(cfg, "data.n", 5000, int),
            cluster_std=_get(cfg, "data.cluster_std", 0.15, float),
            seed=_get(cfg, "profile.seed", 11, int),
        )
    elif profile in ("desk_mnist14", "full_mnist"):
        dataset = data.load_idx(_get(cfg, "data.images"), _get(cfg, "data.labels"))
        if profile == "desk_mnist14":
            side = int(math.isqrt(dataset.dim))
            factor = _get(cfg, "data.downsample_factor", 2, int)
            dataset = data.downsample_images(dataset, side, side, factor)
    else:
        raise ConfigError(f"unknown profile {profile!r}")

    spec = data.SplitSpec(
        fixed_size=_get(cfg, "split.fixed_size", 500, int),
        shadow_size=_get(cfg, "split.shadow_size", 2000, int),
        test_target_size=_get(cfg, "split.test_target_size", 100, int),
        split_seed=_get(cfg, "split.split_seed", 5, int),
    )
    fixed, shadow_pool, targets = data.split(dataset, spec)

    hidden = tuple(
        int(w) for w in _get(cfg, "released.hidden_widths", "10").split(",") if w
    )
    arch = nn.MlpArchitecture(
        (dataset.dim, *hidden, dataset.num_classes),
        activation=_get(cfg, "released.activation", "elu"),
    )
    batch = _get(cfg, "released.batch_size", "full")
    noise = _get(cfg, "released.noise_multiplier", "none")
    train_cfg = nn.TrainConfig(
        optimizer=_get(cfg, "released.optimizer", "gd_momentum"),
        learning_rate=_get(cfg, "released.learning_rate", 0.2, float),
        momentum=_get(cfg, "released.momentum", 0.9, float),
        epochs=_get(cfg, "released.epochs", 50, int),
        batch_size="full" if batch == "full" else int(batch),
        clip_norm=_get(cfg, "released.clip_norm", 0.0, float) or None,
        noise_multiplier=None if noise == "none" else float(noise),
        init_seed=_get(cfg, "released.init_seed", 101, int),
        shuffle_seed=_get(cfg, "released.shuffle_seed", 102, int),
        noise_seed=_get(cfg, "released.noise_seed", 103, int),
    )
    return fixed, shadow_pool, targets, arch, train_cfg


def reconn_config(cfg: dict) -> shadow.RecoNNConfig:
    widths = _get(cfg, "reconn.hidden_widths", "auto")
    return shadow.RecoNNConfig(
        hidden_widths=None if widths == "auto" else tuple(int(w) for w in widths.split(",")),
        learning_rate=_get(cfg, "reconn.learning_rate", 1e-3, float),
        batch_size=_get(cfg, "reconn.batch_size", 128, int),
        epochs=_get(cfg, "reconn.epochs", 100, int),
        seed=_get(cfg, "reconn.seed", 7, int),
    )


def build_featurizer(cfg: dict, shadow_pool, mode=None, layers=None, probe_size=None):
    """Featurizer from config/flags. Blackbox probes are the first P shadow-pool
    points, which are then excluded from shadow targets; returns (featurizer,
    remaining shadow pool)."""
    mode = mode or _get(cfg, "featurizer.mode", "whitebox")
    if mode == "whitebox":
        return shadow.Featurizer("whitebox"), shadow_pool
    if mode == "layers":
        if layers is None:
            layers = _get(cfg, "featurizer.layers", "-1")
        idx = tuple(int(i) for i in str(layers).split(",") if i)
        return shadow.Featurizer("layers", layers=idx), shadow_pool
    if mode == "blackbox":
        p = probe_size or _get(cfg, "featurizer.probe_size", 200, int)
        if p >= len(shadow_pool):
            raise ConfigError("probe_size must be smaller than the shadow pool")
        probe = shadow_pool.subset(range(p))
        rest = shadow_pool.subset(range(p, len(shadow_pool)))
        return shadow.Featurizer("blackbox", probe=probe.X), rest
    raise ConfigError(f"unknown featurizer mode {mode!r}")


# ------------------------------------------------------------- subcommands

def cmd_train_released(args) -> int:
    cfg = parse_config(args.config)
    fixed, _, targets, arch, train_cfg = load_profile(cfg)
    os.makedirs(args.out, exist_ok=True)
    for i in range(len(targets)):
        z = targets[i]
        try:
            theta = nn.train(fixed.with_point(z), arch, train_cfg)
        except nn.DivergenceError as e:
            print(f"error: target {i}: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        save_model(
            os.path.join(args.out, f"target_{i:04d}.model"),
            theta,
            {
                "target_index": i,
                "config_hash": cfg["__hash__"],
                "init_seed": train_cfg.init_seed,
                "shuffle_seed": train_cfg.shuffle_seed,
                "noise_seed": train_cfg.noise_seed,
            },
        )
    targets_path = os.path.join(args.out, "targets.csv")
    data.save_csv(targets, targets_path)
    print(f"wrote {len(targets)} released models to {args.out}")
    return EXIT_OK


def cmd_gen_shadows(args) -> int:
    cfg = parse_config(args.config)
    fixed, shadow_pool, _, arch, train_cfg = load_profile(cfg)
    if args.k is not None:
        if args.k <= 0:
            print("error: --k must be positive", file=sys.stderr)
            return EXIT_VALIDATION
        if args.k > len(shadow_pool):
            print("error: --k exceeds shadow pool size", file=sys.stderr)
            return EXIT_VALIDATION
    if args.ood_pool:
        ood = data.load_csv(args.ood_pool, args.ood_label_column)
        shadow_pool = data.relabel_random(
            ood, fixed.num_classes, seed=_get(cfg, "profile.seed", 11, int)
        )
    featurizer, shadow_pool = build_featurizer(
        cfg, shadow_pool, args.featurizer, args.layers, args.probe_size
    )
    if args.k is not None:
        shadow_pool = shadow_pool.subset(range(args.k))
    try:
        shadow_set = shadow.gen_shadows(
            fixed, shadow_pool, arch, train_cfg, featurizer, random_init=args.random_init
        )
    except nn.DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    os.makedirs(args.out, exist_ok=True)
    prefix = os.path.join(args.out, "shadows")
    shadow_set.save(prefix)
    data.save_csv(shadow_pool, os.path.join(args.out, "shadow_targets.csv"))
    print(
        f"wrote shadow set: k={len(shadow_set)} feature_len={shadow_set.features.shape[1]}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = parse_config(args.config)
    fixed, shadow_pool, _, _, _ = load_profile(cfg)
    shadow_set = shadow.ShadowSet.load(os.path.join(args.shadows, "shadows"))
    try:
        phi = shadow.train_reconn(shadow_set, reconn_config(cfg))
    except nn.DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    bundle = shadow.AttackBundle(phi, shadow_set.featurizer, shadow_set.stats)

    targets = data.load_csv(os.path.join(args.released, "targets.csv"), "label")
    pool_X = np.vstack([fixed.X, shadow_pool.X])
    report = metrics.oracle_report(targets.X, pool_X)
    threshold = report.mean_nn_distance

    rows = []
    for i in range(len(targets)):
        theta, _ = load_model(os.path.join(args.released, f"target_{i:04d}.model"))
        z_hat = bundle(theta)
        err = metrics.mse(targets.X[i], z_hat)
        rows.append((i, err, report.nn_distances[i], metrics.judge_success(err, threshold)))

    os.makedirs(args.out, exist_ok=True)
    write_csv(
        os.path.join(args.out, "attack_results.csv"),
        ["target", "mse", "nn_oracle_distance", "success"],
        rows,
        cfg["__hash__"],
    )
    mean_mse = float(np.mean([r[1] for r in rows]))
    with open(os.path.join(args.out, "summary.txt"), "w") as f:
        f.write(f"# config_hash={cfg['__hash__']}\n")
        f.write(f"mean_attack_mse={mean_mse}\n")
        f.write(f"oracle_threshold={threshold}\n")
        f.write(f"success={metrics.judge_success(mean_mse, threshold)}\n")
        for p, v in report.percentiles.items():
            f.write(f"oracle_percentile_{p}={v}\n")
    print(f"mean attack MSE {mean_mse:.6f} vs oracle {threshold:.6f}")
    return EXIT_OK


def cmd_glm_attack(args) -> int:
    # read numerically (regression responses need not be integer class labels)
    with open(args.fixed) as f:
        header = f.readline().strip().split(",")
    if args.label_column not in header:
        print(f"error: label column {args.label_column!r} not in header", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        table = np.loadtxt(args.fixed, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    li = header.index(args.label_column)
    Y = table[:, li]
    X = np.delete(table, li, axis=1)
    theta = np.loadtxt(args.theta, delimiter=",", ndmin=1)
    if args.no_intercept:
        if args.target_label is None:
            print("error: --no-intercept requires --target-label", file=sys.stderr)
            return EXIT_VALIDATION
        try:
            c1, c2 = glm.reconstruct_linreg_no_intercept(theta, X, Y, args.target_label)
        except glm.GlmError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        print("candidate_1=" + ",".join(repr(float(v)) for v in c1))
        print("candidate_2=" + ",".join(repr(float(v)) for v in c2))
        return EXIT_OK
    spec = glm.GlmSpec(args.family, args.lam)
    try:
        x, y = glm.reconstruct_glm(theta, glm.add_intercept(X), Y, spec)
    except glm.GlmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("x=" + ",".join(repr(float(v)) for v in x))
    print(f"y={float(y)!r}")
    return EXIT_OK


def cmd_mia(args) -> int:
    cfg = parse_config(args.config)
    fixed, _, targets, arch, train_cfg = load_profile(cfg)
    if len(targets) < 2:
        print("error: need at least two test targets", file=sys.stderr)
        return EXIT_VALIDATION
    z0, z1 = targets[0], targets[1]
    if args.attack == "trivial":
        attack_fn = mia.trivial_deterministic_mia
    else:  # constant guesser baseline
        attack_fn = lambda *a: 0
    rows = []
    for t in range(args.trials):
        try:
            trial = mia.informed_mia_protocol(
                fixed, z0, z1, arch, train_cfg, attack_fn,
                trial_seed=_derive(args.seed, ("mia", t)),
            )
        except (nn.DivergenceError, mia.UndecidedError) as e:
            print(f"error: trial {t}: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        rows.append((t, trial.b, trial.b_hat, int(trial.correct)))
    os.makedirs(args.out, exist_ok=True)
    write_csv(
        os.path.join(args.out, "mia_trials.csv"),
        ["trial", "b", "b_hat", "correct"],
        rows,
        cfg["__hash__"],
    )
    acc = sum(r[3] for r in rows) / len(rows)
    print(f"accuracy={acc}")
    return EXIT_OK


def cmd_dp_sweep(args) -> int:
    cfg = parse_config(args.config)
    fixed, shadow_pool, targets, arch, base_cfg = load_profile(cfg)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    delta = _get(cfg, "dp.delta", 1e-5, float)
    clip = _get(cfg, "dp.clip_norm", 1.0, float)
    rc = reconn_config(cfg)
    featurizer = shadow.Featurizer("whitebox")
    pool_X = np.vstack([fixed.X, shadow_pool.X])
    threshold = metrics.oracle_report(targets.X, pool_X).mean_nn_distance

    rows = []
    for sigma in sigmas:
        per_rep = []
        acc_rep = []
        for rep in range(args.repeats):
            if sigma == 0.0:
                run_cfg = base_cfg.with_seeds(init_seed=_derive(base_cfg.init_seed, ("rep", rep)))
            else:
                run_cfg = nn.TrainConfig(
                    optimizer="dpgd",
                    learning_rate=base_cfg.learning_rate,
                    momentum=base_cfg.momentum,
                    epochs=base_cfg.epochs,
                    clip_norm=clip,
                    noise_multiplier=sigma,
                    init_seed=_derive(base_cfg.init_seed, ("rep", rep)),
                    shuffle_seed=base_cfg.shuffle_seed,
                    noise_seed=_derive(base_cfg.noise_seed, ("adv", sigma, rep)),
                )
            try:
                shadow_set = shadow.gen_shadows(fixed, shadow_pool, arch, run_cfg, featurizer)
                phi = shadow.train_reconn(shadow_set, rc)
                bundle = shadow.AttackBundle(phi, featurizer, shadow_set.stats)
                mses, accs = [], []
                for i in range(len(targets)):
                    rel_cfg = run_cfg.with_seeds(
                        noise_seed=_derive(base_cfg.noise_seed, ("released", sigma, rep, i))
                    )
                    theta = nn.train(fixed.with_point(targets[i]), arch, rel_cfg)
                    mses.append(metrics.mse(targets.X[i], bundle(theta)))
                    accs.append(nn.accuracy(theta, targets))
            except nn.DivergenceError as e:
                print(f"error: {e}", file=sys.stderr)
                return EXIT_NUMERICAL
            per_rep.append(float(np.mean(mses)))
            acc_rep.append(float(np.mean(accs)))
        if sigma == 0.0:
            eps = math.inf
        else:
            rho = accounting.account_dpgd(base_cfg.epochs, clip, sigma)
            eps = accounting.zcdp_to_approx_dp(rho, delta)
        se = float(np.std(per_rep, ddof=1) / math.sqrt(len(per_rep))) if len(per_rep) > 1 else 0.0
        rows.append((sigma, eps, float(np.mean(per_rep)), se, float(np.mean(acc_rep))))
    os.makedirs(args.out, exist_ok=True)
    write_csv(
        os.path.join(args.out, "dp_sweep.csv"),
        ["sigma", "epsilon", "mean_attack_mse", "stderr", "test_accuracy"],
        rows,
        cfg["__hash__"],
    )
    print(f"oracle_threshold={threshold}")
    for row in rows:
        print("sigma=%g eps=%g mse=%g stderr=%g acc=%g" % row)
    return EXIT_OK


def cmd_rero_bound(args) -> int:
    try:
        if args.thm3:
            if args.gamma is None:
                raise ValueError("--thm3 requires --gamma")
            print(f"delta={rero.rero_to_dp(args.eps, args.gamma)!r}")
            return EXIT_OK
        if args.thm2:
            b = rero.rdp_to_rero(args.alpha, args.eps, args.kappa, args.eta)
        elif args.cor1:
            b = rero.puredp_to_rero(args.eps, args.kappa, args.eta)
        elif args.cor2:
            b = rero.zcdp_to_rero(args.rho, args.kappa, args.eta)
        elif args.prop1:
            privacy = {"rho": args.rho} if args.rho is not None else {"eps": args.eps}
            b = rero.prop_gamma(args.d, args.eta, privacy, "uniform_ball")
        elif args.prop2:
            privacy = {"rho": args.rho} if args.rho is not None else {"eps": args.eps}
            b = rero.prop_gamma(args.d, args.eta, privacy, "gaussian", sigma=args.sigma)
        else:
            raise ValueError("choose one of --thm2/--cor1/--cor2/--thm3/--prop1/--prop2")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"gamma={b.gamma!r}")
    print(f"kappa={b.kappa!r}")
    print(f"source={b.source}")
    return EXIT_OK


def rero_soundness_grid(n_trials: int = 500, seed: int = 0):
    """Gaussian mean-release mechanism over a 3x3x3 grid; yields per-cell results."""
    g = np.random.default_rng(seed)
    fixed = g.uniform(0, 1, size=(9, 2))
    n = fixed.shape[0] + 1
    priors = [
        rero.FiniteDiscretePrior(g.uniform(0, 1, size=(5, 2)), g.dirichlet(np.ones(5)))
        for _ in range(3)
    ]
    for noise in (0.02, 0.05, 0.15):
        for eta in (0.05, 0.15, 0.4):
            for pi, prior in enumerate(priors):
                diam = max(
                    float(np.linalg.norm(a - b)) for a in prior.points for b in prior.points
                )
                rho = accounting.gaussian_mechanism_zcdp(diam / n, noise)
                kappa, _ = rero.kappa_monte_carlo(prior, rero.l2_error, eta, prior.points)
                gamma = 1.0 if kappa >= 1.0 else rero.zcdp_to_rero(rho, kappa, eta).gamma

                def mechanism(points, rng, noise=noise):
                    return points.mean(axis=0) + rng.normal(0.0, noise, size=points.shape[1])

                def likelihood(theta, zs, noise=noise):
                    mu = (fixed.sum(axis=0)[None, :] + zs) / n
                    sq = ((np.asarray(theta)[None, :] - mu) ** 2).sum(axis=1)
                    return np.exp(-sq / (2 * noise ** 2))

                def attack_fn(theta, prior=prior, eta=eta, likelihood=likelihood):
                    return rero.map_attack_finite(
                        prior, likelihood, theta, rero.l2_error, eta
                    )

                rate, (lo, hi) = rero.empirical_rero(
                    mechanism, prior, attack_fn, fixed, rero.l2_error, eta,
                    n_trials=n_trials, seed=_derive(seed, ("cell", noise, eta, pi)),
                )
                ci_half = max(0.0, hi - rate)
                yield {
                    "noise": noise,
                    "eta": eta,
                    "prior": pi,
                    "kappa": kappa,
                    "gamma": gamma,
                    "rate": rate,
                    "ci_half": ci_half,
                    "sound": rate <= gamma + 3 * ci_half + 1e-12,
                }


def cmd_rero_check(args) -> int:
    violations = 0
    for cell in rero_soundness_grid(n_trials=args.trials, seed=args.seed):
        status = "ok" if cell["sound"] else "VIOLATION"
        print(
            "noise=%(noise)g eta=%(eta)g prior=%(prior)d kappa=%(kappa).4f "
            "gamma=%(gamma).4f rate=%(rate).4f" % cell,
            status,
        )
        if not cell["sound"]:
            violations += 1
    if violations:
        print(f"error: {violations} soundness violations", file=sys.stderr)
        return 1
    print("all cells sound")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reconlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-released", help="train one released model per test target")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_released)

    p = sub.add_parser("gen-shadows", help="materialize a shadow set")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--ood-pool")
    p.add_argument("--ood-label-column", default="label")
    p.add_argument("--random-init", action="store_true")
    p.add_argument("--featurizer", choices=["whitebox", "layers", "blackbox"])
    p.add_argument("--layers")
    p.add_argument("--probe-size", type=int)
    p.set_defaults(fn=cmd_gen_shadows)

    p = sub.add_parser("attack", help="train the reconstructor and attack released models")
    p.add_argument("--config", required=True)
    p.add_argument("--shadows", required=True)
    p.add_argument("--released", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("glm-attack", help="closed-form GLM reconstruction from CSV data")
    p.add_argument("--fixed", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--theta", required=True)
    p.add_argument("--family", default="linear", choices=["linear", "ridge", "logistic"])
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--target-label", type=float)
    p.set_defaults(fn=cmd_glm_attack)

    p = sub.add_parser("mia", help="run the informed membership-inference game")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--attack", choices=["trivial", "constant"], default="trivial")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_mia)

    p = sub.add_parser("dp-sweep", help="sweep DP noise levels and report the trade-off")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigmas", default="0,0.5,2,8")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=cmd_dp_sweep)

    p = sub.add_parser("rero-bound", help="evaluate a reconstruction-robustness formula")
    p.add_argument("--thm2", action="store_true")
    p.add_argument("--cor1", action="store_true")
    p.add_argument("--cor2", action="store_true")
    p.add_argument("--thm3", action="store_true")
    p.add_argument("--prop1", action="store_true")
    p.add_argument("--prop2", action="store_true")
    p.add_argument("--kappa", type=float)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--sigma", type=float)
    p.set_defaults(fn=cmd_rero_bound)

    p = sub.add_parser("rero-check", help="empirical soundness suite for the ReRo bounds")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_rero_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, data.FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (nn.DivergenceError, glm.GlmError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
