"""Command-line entry point.

Defaults reproduce the four-arm polynomial experiment out of the box:
T=1024, 20 repeats, delta=0.1, eta=200*rho^2, eta1=eta2=1, and the
degree-3 offset-1 polynomial kernel on both spaces.  A TOML config file can
supply any value; explicit flags win over the file.  Exit codes: 0 success,
2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .kernels import KernelSpec
from .runner import (
    POLICY_KINDS,
    RunConfig,
    emit_csv,
    emit_metadata,
    resolve_env,
    run_experiment,
)

_DEFAULTS = {
    "T": 1024,
    "repeats": 20,
    "seed": 0,
    "K": 4,
    "rho": 0.95,
    "eta": None,
    "eta1": 1.0,
    "eta2": 1.0,
    "delta": 0.1,
    "kernel": "polynomial",
    "degree": 3,
    "offset": 1.0,
    "bandwidth": 1.0,
    "schedule": "doubling",
    "policy": "div-els",
    "nu": None,
    "d_tilde": None,
    "noise_scale": None,
    "workers": 1,
    "out": "regret.csv",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ivbandit",
        description="Simulate confounded contextual bandits with dual-IV regression.",
    )
    p.add_argument("--T", type=int, help="time horizon (default 1024)")
    p.add_argument("--K", type=int, help="number of arms (default 4)")
    p.add_argument("--rho", type=float, help="instrument strength in [0,1] (default 0.95)")
    p.add_argument("--eta", type=float, help="exploration tuning (default 200*rho^2)")
    p.add_argument("--eta1", type=float, help="u-side regularizer scale (default 1)")
    p.add_argument("--eta2", type=float, help="f-side regularizer scale (default 1)")
    p.add_argument("--delta", type=float, help="confidence parameter (default 0.1)")
    p.add_argument(
        "--kernel",
        choices=["linear", "polynomial", "rbf"],
        help="kernel family for both spaces (default polynomial)",
    )
    p.add_argument("--degree", type=int, help="polynomial degree (default 3)")
    p.add_argument("--offset", type=float, help="polynomial offset (default 1)")
    p.add_argument("--bandwidth", type=float, help="rbf bandwidth (default 1)")
    p.add_argument(
        "--schedule",
        choices=["doubling", "horizon"],
        help="epoch schedule (default doubling)",
    )
    p.add_argument("--policy", choices=list(POLICY_KINDS), help="default div-els")
    p.add_argument("--nu", type=float, help="smoothness for div-els-infinite")
    p.add_argument("--d-tilde", dest="d_tilde", type=int, help="override effective dimension")
    p.add_argument("--repeats", type=int, help="independent runs to average (default 20)")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed+i (default 0)")
    p.add_argument("--out", help="CSV output path (default regret.csv)")
    p.add_argument("--config", help="TOML config file; flags override file values")
    p.add_argument("--workers", type=int, help="process-pool size for repeats (default 1)")
    return p


def _load_config_file(path: str) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    flat = {}
    for key in ("T", "repeats", "seed", "out", "workers", "schedule"):
        if key in doc:
            flat[key] = doc[key]
    env = doc.get("env", {})
    for src, dst in (("K", "K"), ("rho", "rho"), ("noise_scale", "noise_scale")):
        if src in env:
            flat[dst] = env[src]
    pol = doc.get("policy", {})
    for key in ("eta", "eta1", "eta2", "delta", "nu", "d_tilde"):
        if key in pol:
            flat[key] = pol[key]
    if "kind" in pol:
        flat["policy"] = pol["kind"]
    ker = doc.get("kernel", {})
    for src, dst in (
        ("family", "kernel"),
        ("degree", "degree"),
        ("offset", "offset"),
        ("bandwidth", "bandwidth"),
    ):
        if src in ker:
            flat[dst] = ker[src]
    return flat


def _merge_settings(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    settings = dict(_DEFAULTS)
    if args.config:
        try:
            settings.update(_load_config_file(args.config))
        except FileNotFoundError:
            parser.error(f"config file not found: {args.config}")
        except tomllib.TOMLDecodeError as exc:
            parser.error(f"invalid config file: {exc}")
    for key in _DEFAULTS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            settings[key] = flag_val
    return settings


def _validate(settings: dict, args, parser: argparse.ArgumentParser):
    finite = settings["policy"] in ("div-els", "naive-krr")
    if args.nu is not None and settings["policy"] != "div-els-infinite":
        parser.error("--nu only applies to --policy div-els-infinite")
    if settings["policy"] == "div-els-infinite" and settings["nu"] is None:
        parser.error("--policy div-els-infinite requires --nu")
    if settings["kernel"] == "rbf" and finite and settings["d_tilde"] is None:
        parser.error(
            "rbf kernel has no finite effective dimension; use --policy "
            "div-els-infinite or supply --d-tilde"
        )
    if args.degree is not None and settings["kernel"] != "polynomial":
        parser.error("--degree only applies to the polynomial kernel")
    if args.offset is not None and settings["kernel"] != "polynomial":
        parser.error("--offset only applies to the polynomial kernel")
    if args.bandwidth is not None and settings["kernel"] != "rbf":
        parser.error("--bandwidth only applies to the rbf kernel")


def _kernel_from_settings(settings: dict) -> KernelSpec:
    family = settings["kernel"]
    if family == "linear":
        return KernelSpec.linear()
    if family == "polynomial":
        return KernelSpec.polynomial(settings["degree"], settings["offset"])
    return KernelSpec.rbf(settings["bandwidth"])


def config_from_settings(settings: dict) -> RunConfig:
    kwargs = {
        "T": settings["T"],
        "repeats": settings["repeats"],
        "base_seed": settings["seed"],
        "n_arms": settings["K"],
        "rho": settings["rho"],
        "policy": settings["policy"],
        "schedule": settings["schedule"],
        "kernel": _kernel_from_settings(settings),
        "eta": settings["eta"],
        "eta1": settings["eta1"],
        "eta2": settings["eta2"],
        "delta": settings["delta"],
        "d_tilde": settings["d_tilde"],
        "nu": settings["nu"],
        "workers": settings["workers"],
        "out": settings["out"],
    }
    if settings["noise_scale"] is not None:
        kwargs["noise_scale"] = settings["noise_scale"]
    return RunConfig(**kwargs)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = _merge_settings(args, parser)
    _validate(settings, args, parser)
    try:
        config = config_from_settings(settings)
    except ValueError as exc:
        parser.error(str(exc))

    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    try:
        result = run_experiment(config)
        emit_csv(result, config.out)
        envs = [resolve_env(config, i) for i in range(config.repeats)]
        meta_path = Path(config.out).with_suffix(".meta.json")
        emit_metadata(config, envs, meta_path)
    except Exception as exc:
        print(f"ivbandit: error: {exc}", file=sys.stderr)
        return 1
    final = result.mean[-1]
    print(f"T={config.T} repeats={config.repeats} mean_regret={final:.6g} -> {config.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
