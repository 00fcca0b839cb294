"""Command-line front end for the embedding-defense pipeline.

Every subcommand reads an optional flat ``key = value`` config file and
accepts a same-named flag per key; flags win over the file. Exit codes
identify the error class that aborted the run and never encode a
verification decision.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import ksg_mi as _ksg_module
from ._pmap import THREADS_ENV_VAR, resolve_threads
from ._version import __version__
from .certification import (
    CertificationParams,
    render_certificate,
    verify,
    write_certificate,
)
from .embedding_io import clip_embeddings, load_embeddings, save_embeddings
from .errors import CreditError, FormatError, IoError, ParamError, SensitivityError
from .gaussian_mechanism import DefenseParams, apply_mechanism, mi_upper_bound
from .ksg_mi import KsgConfig, ksg_estimate
from .oracles import ChannelSpec, gaussian_mi_closed_form, tightness_check
from .simulation import ExperimentConfig, run_separation_experiment
from .tradeoff import (
    TradeoffConfig,
    covariance_spectrum,
    default_sigma_grid,
    select_sigma,
    tradeoff_table_csv,
)

FAULT_ENV_VAR = "CREDIT_SELFCHECK_FAULT"

# Keys owned by the root parser; config files may still set them.
_RESERVED = ("seed", "threads", "format")


def _bad(key: str, text: str, want: str) -> ParamError:
    return ParamError(f"config key {key}={text!r} is not {want}")


def _as_int(key: str, text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise _bad(key, text, "an integer") from None


def _as_u64(key: str, text: str) -> int:
    v = _as_int(key, text)
    if not 0 <= v < 2**64:
        raise _bad(key, text, "an unsigned 64-bit integer")
    return v


def _as_float(key: str, text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise _bad(key, text, "a real number") from None
    if not np.isfinite(v):
        raise _bad(key, text, "finite")
    return v


def _as_opt_float(key: str, text: str) -> float | None:
    if text.strip().lower() == "none":
        return None
    return _as_float(key, text)


def _as_str(key: str, text: str) -> str:
    return text


def _as_save_format(key: str, text: str) -> str:
    if text not in ("binary", "csv"):
        raise _bad(key, text, "one of binary, csv")
    return text


def _as_float_list(key: str, text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise _bad(key, text, "a comma-separated list of reals")
    return tuple(_as_float(key, p) for p in parts)


@dataclass(frozen=True)
class _Opt:
    name: str
    parse: Callable[[str, str], object]
    default: object = None
    required: bool = False
    help: str = ""


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` comments and blank lines ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise FormatError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ParamError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _resolve(opts: tuple[_Opt, ...], ns: argparse.Namespace) -> dict[str, object]:
    """Merge defaults, config file, and flags; flags take precedence."""
    file_cfg = parse_config_file(ns.config) if ns.config else {}
    known = {o.name for o in opts} | set(_RESERVED)
    for key in file_cfg:
        if key not in known:
            raise ParamError(f"config key {key!r} is not used by this command")
    settings: dict[str, object] = {}
    for opt in opts:
        flag_value = getattr(ns, opt.name, None)
        if flag_value is not None:
            settings[opt.name] = opt.parse(opt.name, flag_value)
        elif opt.name in file_cfg:
            settings[opt.name] = opt.parse(opt.name, file_cfg[opt.name])
        elif opt.required:
            raise ParamError(f"missing required key {opt.name!r}")
        else:
            settings[opt.name] = opt.default
    # reserved keys: flag > config > env (threads only) > default;
    # seed stays None so commands can keep their own default
    for key, conv, default in (
        ("seed", _as_u64, None),
        ("threads", _as_int, None),
        ("format", _as_save_format, "binary"),
    ):
        flag_value = getattr(ns, key, None)
        if flag_value is not None:
            settings[key] = conv(key, str(flag_value))
        elif key in file_cfg:
            settings[key] = conv(key, file_cfg[key])
        else:
            settings[key] = default
    settings["threads"] = resolve_threads(settings["threads"])
    return settings


def _fmt_value(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return "none"
    return str(v)


def _record(pairs: list[tuple[str, object]]) -> str:
    return "".join(f"{k} = {_fmt_value(v)}\n" for k, v in pairs)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------- defend

_DEFEND_OPTS = (
    _Opt("input", _as_str, required=True, help="embeddings to defend"),
    _Opt("out", _as_str, required=True, help="output path for defended embeddings"),
    _Opt("sigma", _as_float, required=True, help="noise scale"),
    _Opt("clip_radius", _as_opt_float, help="clip rows to this l2 radius first"),
)


def cmd_defend(settings: dict[str, object]) -> int:
    m = load_embeddings(settings["input"])
    if settings["clip_radius"] is not None:
        m = clip_embeddings(m, settings["clip_radius"])
    if m.clip_radius is None:
        raise SensitivityError(
            "input embeddings are unclipped; pass clip_radius or clip them first"
        )
    params = DefenseParams(
        sigma=settings["sigma"],
        delta_sensitivity=2.0 * m.clip_radius,
        d=m.d,
        seed=settings["seed"] if settings["seed"] is not None else 0,
    )
    defended = apply_mechanism(m, params)
    save_embeddings(defended, settings["out"], fmt=settings["format"])
    sidecar = str(settings["out"]) + ".defense"
    _write_text(
        sidecar,
        _record(
            [
                ("sigma", params.sigma),
                ("delta_sensitivity", params.delta_sensitivity),
                ("d", params.d),
                ("noise_seed", params.seed),
            ]
        ),
    )
    print(f"defended {m.n}x{m.d} embeddings -> {settings['out']}")
    print(f"recorded sigma={_fmt_value(params.sigma)} "
          f"delta={_fmt_value(params.delta_sensitivity)} seed={params.seed} -> {sidecar}")
    return 0


# ----------------------------------------------------------- estimate-mi

_ESTIMATE_OPTS = (
    _Opt("x", _as_str, required=True, help="first embedding file"),
    _Opt("y", _as_str, required=True, help="second embedding file"),
    _Opt("k", _as_int, default=3),
    _Opt("tie_jitter_seed", _as_u64, default=0),
    _Opt("jitter_scale", _as_float, default=0.0),
    _Opt("out", _as_str, help="optional path for the key = value record"),
)


def cmd_estimate_mi(settings: dict[str, object]) -> int:
    mx = load_embeddings(settings["x"])
    my = load_embeddings(settings["y"])
    cfg = KsgConfig(
        k=settings["k"],
        tie_jitter_seed=settings["tie_jitter_seed"],
        jitter_scale=settings["jitter_scale"],
    )
    estimate = ksg_estimate(mx, my, cfg)
    record = _record(
        [
            ("mi_estimate", estimate),
            ("n", mx.n),
            ("d_x", mx.d),
            ("d_y", my.d),
            ("k", cfg.k),
        ]
    )
    sys.stdout.write(record)
    if settings["out"]:
        _write_text(settings["out"], record)
    return 0


# ---------------------------------------------------------------- verify

_VERIFY_OPTS = (
    _Opt("suspect", _as_str, required=True),
    _Opt("defended", _as_str, required=True),
    _Opt("out", _as_str, help="certificate output path"),
    _Opt("rho", _as_float, default=0.5),
    _Opt("eta", _as_float, default=0.5),
    _Opt("q_budget", _as_int, default=5000),
    _Opt("v_size", _as_int, default=1000),
    _Opt("d", _as_int, default=1024),
    _Opt("k", _as_int, default=3),
    _Opt("mu_ind", _as_float, default=0.0),
    _Opt("i_sur", _as_opt_float),
    _Opt("beta", _as_opt_float, help="MI budget; derived from sigma when absent"),
    _Opt("sigma", _as_opt_float),
    _Opt("delta_sensitivity", _as_opt_float),
    _Opt("noise_seed", _as_u64, default=0),
    _Opt("n_comp", _as_int, default=1),
    _Opt("tie_jitter_seed", _as_u64, default=0),
    _Opt("jitter_scale", _as_float, default=0.0),
)


def cmd_verify(settings: dict[str, object]) -> int:
    suspect = load_embeddings(settings["suspect"])
    defended = load_embeddings(settings["defended"])
    if settings["d"] != defended.d:
        raise ParamError(
            f"d={settings['d']} but the defended embeddings have d={defended.d}; "
            "set d to the embedding dimension"
        )
    sigma, delta = settings["sigma"], settings["delta_sensitivity"]
    if (sigma is None) != (delta is None):
        raise ParamError("sigma and delta_sensitivity must be given together")
    defense = None
    if sigma is not None:
        defense = DefenseParams(
            sigma=sigma,
            delta_sensitivity=delta,
            d=defended.d,
            seed=settings["noise_seed"],
        )
    beta = settings["beta"]
    if beta is None:
        if defense is None:
            raise ParamError("supply beta or the (sigma, delta_sensitivity) pair")
        beta = mi_upper_bound(delta, sigma, settings["n_comp"])
    params = CertificationParams(
        rho=settings["rho"],
        eta=settings["eta"],
        q_budget=settings["q_budget"],
        v_size=settings["v_size"],
        d=settings["d"],
        k=settings["k"],
        beta=beta,
        mu_ind=settings["mu_ind"],
        i_sur=settings["i_sur"],
    )
    cfg = KsgConfig(
        k=settings["k"],
        tie_jitter_seed=settings["tie_jitter_seed"],
        jitter_scale=settings["jitter_scale"],
    )
    cert = verify(
        suspect, defended, params, cfg, defense=defense, threads=settings["threads"]
    )
    if settings["out"]:
        write_certificate(cert, settings["out"])
    else:
        sys.stdout.write(render_certificate(cert))
    print(
        f"decision={cert.decision} mi={_fmt_value(cert.mi_estimate)} "
        f"tau={_fmt_value(cert.tau)} gamma1={_fmt_value(cert.gamma1)} "
        f"gamma2={_fmt_value(cert.gamma2)}"
    )
    return 0


# -------------------------------------------------------- calibrate-sigma

_CALIBRATE_OPTS = (
    _Opt("input", _as_str, required=True, help="reference embeddings for the spectrum"),
    _Opt("out", _as_str, help="trade-off table CSV path"),
    _Opt("sigma_grid", _as_float_list),
    _Opt("lambda_util", _as_float, default=1.0),
    _Opt("lambda_ver", _as_float, default=1.0),
    _Opt("pi0", _as_float, default=0.5),
    _Opt("pi1", _as_float, default=0.5),
    _Opt("n_comp", _as_int, default=1),
    _Opt("clip_radius", _as_opt_float),
    _Opt("delta_sensitivity", _as_opt_float),
    _Opt("rho", _as_float, default=0.5),
    _Opt("eta", _as_float, default=0.5),
    _Opt("q_budget", _as_int, default=5000),
    _Opt("v_size", _as_int, default=1000),
    _Opt("k", _as_int, default=3),
    _Opt("mu_ind", _as_float, default=0.0),
    _Opt("i_sur", _as_opt_float),
)


def cmd_calibrate_sigma(settings: dict[str, object]) -> int:
    m = load_embeddings(settings["input"])
    if settings["clip_radius"] is not None:
        m = clip_embeddings(m, settings["clip_radius"])
    delta = settings["delta_sensitivity"]
    if delta is None:
        if m.clip_radius is None:
            raise SensitivityError(
                "no sensitivity available; pass delta_sensitivity or clip_radius"
            )
        delta = 2.0 * m.clip_radius
    template = CertificationParams(
        rho=settings["rho"],
        eta=settings["eta"],
        q_budget=settings["q_budget"],
        v_size=settings["v_size"],
        d=m.d,
        k=settings["k"],
        beta=1.0,  # placeholder, recomputed per grid point
        mu_ind=settings["mu_ind"],
        i_sur=settings["i_sur"],
    )
    grid = settings["sigma_grid"] or default_sigma_grid()
    cfg = TradeoffConfig(
        sigma_grid=tuple(grid),
        spectrum=covariance_spectrum(m),
        cert_template=template,
        lambda_util=settings["lambda_util"],
        lambda_ver=settings["lambda_ver"],
        pi0=settings["pi0"],
        pi1=settings["pi1"],
        n_comp=settings["n_comp"],
    )
    defense = DefenseParams(sigma=1.0, delta_sensitivity=delta, d=m.d, seed=0)
    sigma_star, rows = select_sigma(cfg, defense)
    best = next(r for r in rows if r.sigma == sigma_star)
    sys.stdout.write(
        _record(
            [
                ("sigma_star", sigma_star),
                ("beta", best.beta),
                ("tau", best.tau),
                ("objective", best.objective),
                ("grid_points", len(rows)),
            ]
        )
    )
    if settings["out"]:
        _write_text(settings["out"], tradeoff_table_csv(rows))
    return 0


# -------------------------------------------------------------- simulate

_SIMULATE_OPTS = (
    _Opt("n_surrogates", _as_int, default=10),
    _Opt("n_independents", _as_int, default=10),
    _Opt("out", _as_str, help="optional report path (includes certificates)"),
    _Opt("d_in", _as_int),
    _Opt("d", _as_int),
    _Opt("v_size", _as_int),
    _Opt("clip_radius", _as_float),
    _Opt("sigma", _as_float),
    _Opt("rho", _as_float),
    _Opt("eta", _as_float),
    _Opt("q_budget", _as_int),
    _Opt("k", _as_int),
    _Opt("attack_budget", _as_int),
    _Opt("repeat_factor", _as_int),
    _Opt("mu_ind", _as_float),
)


def cmd_simulate(settings: dict[str, object]) -> int:
    config = ExperimentConfig()
    overrides = {
        name: settings[name]
        for name in (
            "d_in", "d", "v_size", "clip_radius", "sigma", "rho", "eta",
            "q_budget", "k", "attack_budget", "repeat_factor", "mu_ind", "seed",
        )
        if settings[name] is not None
    }
    if overrides:
        config = replace(config, **overrides)
    result = run_separation_experiment(
        settings["n_surrogates"],
        settings["n_independents"],
        config,
        threads=settings["threads"],
    )
    lines = [
        f"auc = {_fmt_value(result.auc)}",
        f"tau = {_fmt_value(result.tau)}",
        f"seed = {config.seed}",
        "",
        "kind         index  mi_estimate            decision",
    ]
    for rec in result.surrogates + result.independents:
        lines.append(
            f"{rec.kind:<12} {rec.index:>5}  {_fmt_value(rec.mi):<22} {rec.decision}"
        )
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if settings["out"]:
        certs = "\n".join(
            render_certificate(rec.certificate)
            for rec in result.surrogates + result.independents
        )
        _write_text(settings["out"], report + "\n" + certs)
    return 0


# ------------------------------------------------------------- selfcheck

# Reference digamma values, precomputed at high precision.
_DIGAMMA_REFS = (
    (0.5, -1.9635100260214235),
    (1.0, -0.5772156649015329),
    (2.0, 0.42278433509846713),
    (10.0, 2.2517525890667214),
    (1000.0, 6.9072551956488117),
)


def cmd_selfcheck(settings: dict[str, object]) -> int:
    del settings
    started = time.perf_counter()
    failures: list[str] = []

    fault = os.environ.get(FAULT_ENV_VAR, "")
    pristine = _ksg_module.digamma
    if fault == "digamma":
        _ksg_module.digamma = lambda x: pristine(x) + 0.05
    try:
        worst = max(abs(_ksg_module.digamma(x) - ref) for x, ref in _DIGAMMA_REFS)
        ok = worst <= 1e-10
        print(f"selfcheck digamma: {'PASS' if ok else 'FAIL'} (max_err={worst:.3g})")
        if not ok:
            failures.append("digamma")

        rng = np.random.default_rng(7)
        corr = 0.6
        xy = rng.multivariate_normal([0.0, 0.0], [[1.0, corr], [corr, 1.0]], 500)
        estimate = ksg_estimate(xy[:, :1], xy[:, 1:], KsgConfig(k=3))
        want = gaussian_mi_closed_form(corr)
        err = abs(estimate - want)
        ok = err <= 0.1
        print(f"selfcheck ksg_gaussian: {'PASS' if ok else 'FAIL'} (err={err:.3g})")
        if not ok:
            failures.append("ksg_gaussian")

        sigmas = (1.5811388300841898, 2.23606797749979, 3.1622776601683795, 5.0)
        specs = tuple(ChannelSpec(delta=1.0, sigma=s) for s in sigmas)
        try:
            report = tightness_check(specs)
            print("selfcheck tightness: PASS")
            sys.stdout.write(report.to_text())
        except CreditError as exc:
            print(f"selfcheck tightness: FAIL ({exc})")
            failures.append("tightness")
    finally:
        _ksg_module.digamma = pristine

    elapsed = time.perf_counter() - started
    print(f"selfcheck elapsed: {elapsed:.2f}s")
    if failures:
        raise CreditError("selfcheck failed: " + ", ".join(failures))
    print("selfcheck: all checks passed")
    return 0


# ------------------------------------------------------------ dispatcher

_COMMANDS: dict[str, tuple[tuple[_Opt, ...], Callable[[dict[str, object]], int]]] = {
    "defend": (_DEFEND_OPTS, cmd_defend),
    "estimate-mi": (_ESTIMATE_OPTS, cmd_estimate_mi),
    "verify": (_VERIFY_OPTS, cmd_verify),
    "calibrate-sigma": (_CALIBRATE_OPTS, cmd_calibrate_sigma),
    "simulate": (_SIMULATE_OPTS, cmd_simulate),
    "selfcheck": ((), cmd_selfcheck),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="credit",
        description="Defend embeddings with Gaussian noise and verify "
        "suspected surrogates with certified error bounds.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument("--seed", metavar="U64", help="RNG seed where the command uses one")
    parser.add_argument(
        "--threads",
        metavar="N",
        help=f"worker threads (falls back to ${THREADS_ENV_VAR}, then 1)",
    )
    parser.add_argument("--format", choices=("binary", "csv"), help="output format for written embeddings")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (opts, _) in _COMMANDS.items():
        sub = subs.add_parser(name)
        for opt in opts:
            sub.add_argument(
                "--" + opt.name.replace("_", "-"),
                dest=opt.name,
                metavar="V",
                help=opt.help or None,
            )
        for reserved in ("config", "seed", "threads", "format"):
            # accepted after the subcommand too; SUPPRESS keeps the root value
            sub.add_argument(
                "--" + reserved, dest=reserved, default=argparse.SUPPRESS,
                help=argparse.SUPPRESS,
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    opts, command = _COMMANDS[ns.command]
    try:
        settings = _resolve(opts, ns)
        return command(settings)
    except CreditError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
