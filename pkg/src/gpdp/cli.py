"""Command-line interface: ``gpdp {release,serve,audit,bandwidth}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audit import analytic_dp_check, power_experiment
from .errors import GpdpError, LicenseError, ParameterError
from .estimators import (
    Dataset,
    kde_build,
    kde_build_aniso,
    licensed_noise_kernel,
    load_csv,
    release_function,
    rule_of_thumb_bandwidth,
    svm_train,
)
from .kernels import KernelSpec
from .privacy import PrivacyParams, Provenance, SensitivityBound, noise_scale
from .sensitivity import (
    erm_sensitivity,
    kde_sensitivity_anisotropic,
    kde_sensitivity_gaussian,
    kde_sensitivity_sobolev,
)
from .server import OnlineServer

PIPELINES = {
    "kdeiso": "KdeIso", "kde-iso": "KdeIso",
    "kdeaniso": "KdeAniso", "kde-aniso": "KdeAniso",
    "kdesobolev": "KdeSobolev", "kde-sobolev": "KdeSobolev",
    "svm": "Svm",
}
DEFAULT_AUDIT_GRID = 32


@dataclass
class ReleaseConfig:
    pipeline: str
    alpha: float
    beta: float
    data: Optional[str] = None
    h: Optional[float] = None
    H: Optional[list] = None
    gamma: Optional[float] = None
    lam: Optional[float] = None
    delta: Optional[float] = None
    seed: int = 0
    strategy: Optional[str] = None
    state: Optional[str] = None
    allow_empirical: bool = False

    def validate(self):
        """Check parameter combinations; runs before any data is read."""
        PrivacyParams(self.alpha, self.beta)
        p = self.pipeline
        if p in ("KdeIso", "KdeSobolev") and (self.h is None or not self.h > 0):
            raise ParameterError(f"{p} needs --h > 0")
        if p == "KdeAniso":
            if not self.H or any(not v > 0 for v in self.H):
                raise ParameterError("KdeAniso needs --H with positive diagonal entries")
        if p == "KdeSobolev" and self.gamma is not None:
            if not math.isclose(self.gamma, 1.0 / self.h, rel_tol=1e-12):
                raise LicenseError(
                    "the Sobolev bound licenses only gamma = 1/h; drop --gamma or set it to 1/h"
                )
        if p in ("KdeIso", "KdeAniso") and self.gamma is not None:
            raise LicenseError(f"{p} noise is Gaussian; --gamma does not apply")
        if p == "Svm":
            if (self.h is None) == (self.gamma is None):
                raise ParameterError("Svm needs exactly one of --h (Gaussian) or --gamma (exp-l1)")
            if self.lam is None or not self.lam > 0:
                raise ParameterError("Svm needs --lambda > 0")
        if self.delta is not None:
            if not self.delta >= 0:
                raise ParameterError("--delta must be >= 0")
            if not self.allow_empirical:
                raise LicenseError(
                    "a user-supplied --delta is not a certified bound; "
                    "add --allow-empirical-sensitivity to use it"
                )
        if self.strategy == "fast":
            fast_ok = (p == "KdeSobolev") or (p == "Svm" and self.gamma is not None)
            if not fast_ok:
                raise LicenseError("--strategy fast needs exp-l1 noise (KdeSobolev or Svm with --gamma)")


def config_from_args(args) -> ReleaseConfig:
    key = args.pipeline.lower()
    if key not in PIPELINES:
        raise ParameterError(f"unknown pipeline {args.pipeline!r}")
    H = None
    if args.H is not None:
        try:
            H = [float(v) for v in args.H.split(",")]
        except ValueError as exc:
            raise ParameterError("--H must be comma-separated numbers") from exc
    cfg = ReleaseConfig(
        pipeline=PIPELINES[key],
        alpha=args.alpha,
        beta=args.beta,
        data=args.data,
        h=args.h,
        H=H,
        gamma=args.gamma,
        lam=args.lam,
        delta=args.delta,
        seed=args.seed,
        strategy=args.strategy,
        state=getattr(args, "state", None),
        allow_empirical=args.allow_empirical_sensitivity,
    )
    cfg.validate()
    return cfg


def load_data(cfg: ReleaseConfig) -> Dataset:
    if cfg.data is None:
        raise ParameterError("--data is required")
    data = load_csv(cfg.data, labels=cfg.pipeline == "Svm")
    if cfg.pipeline == "KdeAniso" and data.d != len(cfg.H):
        raise ParameterError(f"--H has {len(cfg.H)} entries but data has {data.d} columns")
    if cfg.strategy == "fast" and data.d != 1:
        raise LicenseError("--strategy fast needs 1-d data")
    return data


def build_function(cfg: ReleaseConfig, data: Dataset):
    """Non-private function and its certified sensitivity bound."""
    p = cfg.pipeline
    if p == "KdeIso":
        return kde_build(data, cfg.h), kde_sensitivity_gaussian(data.n, cfg.h, data.d)
    if p == "KdeAniso":
        H = np.diag(cfg.H)
        return kde_build_aniso(data, H), kde_sensitivity_anisotropic(data.n, H)
    if p == "KdeSobolev":
        return kde_build(data, cfg.h), kde_sensitivity_sobolev(data.n, cfg.h, data.d)
    if cfg.h is not None:
        kernel = KernelSpec.gaussian_iso(cfg.h, data.d)
    else:
        kernel = KernelSpec.exp_l1(cfg.gamma, data.d)
    f = svm_train(data, kernel, cfg.lam, seed=cfg.seed)
    return f, erm_sensitivity(1.0, cfg.lam, data.n, kernel.sup_diag(), kernel)


def _bound(cfg, bound):
    if cfg.delta is None:
        return bound
    return SensitivityBound(cfg.delta, Provenance.EMPIRICAL, bound.kernel)


def _default_strategy(cfg, bound, serving):
    if cfg.strategy is not None:
        return cfg.strategy
    if not serving:
        return "batch"
    k = bound.kernel
    if k is not None and k.variant == "exp_l1" and k.dim == 1:
        return "fast"
    return "online"


def read_points(path, dim):
    """Query points from a CSV file (header row optional)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    rows = []
    for i, ln in enumerate(lines):
        cells = [c.strip() for c in ln.split(",")]
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if i == 0:
                continue
            raise ParameterError(f"{path}: non-numeric query on line {i + 1}")
    if not rows:
        return np.zeros((0, dim))
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ParameterError(f"{path}: query points must have {dim} columns")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{path}: query points must be finite")
    return arr


def cmd_release(args):
    cfg = config_from_args(args)
    if args.queries is None:
        raise ParameterError("--queries is required")
    data = load_data(cfg)
    base, bound = build_function(cfg, data)
    points = read_points(args.queries, data.d)
    params = PrivacyParams(cfg.alpha, cfg.beta)
    strategy = _default_strategy(cfg, bound, serving=False)
    released = release_function(base, _bound(cfg, bound), params, strategy=strategy,
                                 seed=cfg.seed, allow_empirical=cfg.allow_empirical)
    values = released.evaluate(points) if len(points) else np.zeros(0)
    if args.post_clamp_nonnegative:
        values = np.maximum(values, 0.0)
    lines = [json.dumps({"x": p.tolist(), "value": float(v)}) for p, v in zip(points, values)]
    text = "".join(ln + "\n" for ln in lines)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def cmd_serve(args):
    cfg = config_from_args(args)
    if cfg.state is None:
        raise ParameterError("--state is required")
    if cfg.strategy == "batch":
        raise ParameterError("serve answers queries one at a time; use --strategy online or fast")
    data = load_data(cfg)
    base, bound = build_function(cfg, data)
    params = PrivacyParams(cfg.alpha, cfg.beta)
    strategy = _default_strategy(cfg, bound, serving=True)
    released = release_function(base, _bound(cfg, bound), params, strategy=strategy,
                                seed=cfg.seed, allow_empirical=cfg.allow_empirical)
    server = OnlineServer(released, cfg.state, clamp_nonnegative=args.post_clamp_nonnegative)
    try:
        if args.listen:
            host, _, port = args.listen.rpartition(":")
            server.serve_tcp(host or "127.0.0.1", int(port))
        else:
            server.serve_stream(sys.stdin, sys.stdout)
    finally:
        server.close()
    return 0


def _parse_neighbor(spec, data: Dataset, pipeline):
    vals = [float(v) for v in spec.split(",")]
    want = data.d + (1 if pipeline == "Svm" else 0)
    if len(vals) != want:
        raise ParameterError(f"--neighbor needs {want} comma-separated values")
    label = vals[data.d] if pipeline == "Svm" else None
    return np.array(vals[:data.d]), label


def _default_neighbor(data: Dataset, pipeline):
    """Last record reflected through the data mean (label flipped for Svm)."""
    point = 2.0 * data.points.mean(axis=0) - data.points[-1]
    if pipeline == "KdeSobolev":
        point = np.clip(point, 0.0, 1.0)
    label = -data.labels[-1] if pipeline == "Svm" else None
    return point, label


def _default_grid(cfg, data: Dataset, seed):
    if cfg.pipeline == "KdeSobolev":
        lo, hi = np.zeros(data.d), np.ones(data.d)
    else:
        lo, hi = data.points.min(axis=0), data.points.max(axis=0)
    if data.d == 1:
        return np.linspace(lo[0], hi[0], DEFAULT_AUDIT_GRID)[:, None]
    rng = np.random.default_rng(seed)
    return lo + (hi - lo) * rng.uniform(size=(DEFAULT_AUDIT_GRID, data.d))


def cmd_audit(args):
    cfg = config_from_args(args)
    if not args.sigma_scale > 0:
        raise ParameterError("--sigma-scale must be > 0")
    data = load_data(cfg)
    if args.neighbor:
        point, label = _parse_neighbor(args.neighbor, data, cfg.pipeline)
    else:
        point, label = _default_neighbor(data, cfg.pipeline)
    neighbor = data.replace(data.n - 1, point, label)
    f1, bound = build_function(cfg, data)
    f2, _ = build_function(cfg, neighbor)
    bound = _bound(cfg, bound)
    if bound.provenance is Provenance.EMPIRICAL and not cfg.allow_empirical:
        raise LicenseError("empirical sensitivity needs --allow-empirical-sensitivity")
    params = PrivacyParams(cfg.alpha, cfg.beta)
    kernel = licensed_noise_kernel(f1, bound)
    sigma = noise_scale(params, bound) * args.sigma_scale
    if args.queries:
        grid = read_points(args.queries, data.d)
    else:
        grid = _default_grid(cfg, data, cfg.seed)
    if args.power:
        report = power_experiment(f2, f1, grid, sigma, params, args.gamma_level,
                                  reps=args.reps, seed=cfg.seed, kernel=kernel)
    else:
        report = analytic_dp_check(f1, f2, grid, sigma, params, kernel=kernel)
    out = report.to_dict()
    out.setdefault("power_estimate", None)
    out.setdefault("power_se", None)
    out["sigma"] = sigma
    out["delta"] = bound.delta
    out["provenance"] = bound.provenance.value
    sys.stdout.write(json.dumps(out) + "\n")
    return 0


def cmd_bandwidth(args):
    if args.data is None:
        raise ParameterError("--data is required")
    est = rule_of_thumb_bandwidth(load_csv(args.data))
    sys.stdout.write(json.dumps({
        "h": est.h.tolist(),
        "H_diag": (est.h ** 2).tolist(),
        "private": est.private,
        "note": "computed from raw data; not differentially private",
    }) + "\n")
    return 0


def _add_release_flags(p, with_state=False):
    p.add_argument("--pipeline", required=True,
                   help="KdeIso | KdeAniso | KdeSobolev | Svm")
    p.add_argument("--data", help="CSV of records (Svm: final column is the +-1 label)")
    p.add_argument("--h", type=float, help="Gaussian bandwidth")
    p.add_argument("--H", help="comma-separated diagonal of the bandwidth matrix")
    p.add_argument("--gamma", type=float, help="exp-l1 kernel rate")
    p.add_argument("--lambda", dest="lam", type=float, help="Svm regularization weight")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=["batch", "online", "fast"])
    p.add_argument("--delta", type=float,
                   help="override sensitivity (uncertified; needs --allow-empirical-sensitivity)")
    p.add_argument("--allow-empirical-sensitivity", action="store_true")
    p.add_argument("--post-clamp-nonnegative", action="store_true",
                   help="clamp released values at zero (post-processing)")
    if with_state:
        p.add_argument("--state", help="append-only noise state file")
        p.add_argument("--listen", help="HOST:PORT to serve over TCP instead of stdin")


def build_parser():
    parser = argparse.ArgumentParser(prog="gpdp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("release", help="evaluate a private release at given points")
    _add_release_flags(p)
    p.add_argument("--queries", help="CSV of query points")
    p.add_argument("--out", help="output file (JSON lines); default stdout")
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("serve", help="answer evaluation requests online")
    _add_release_flags(p, with_state=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("audit", help="certify a release on a finite grid")
    _add_release_flags(p)
    p.add_argument("--queries", help="CSV of grid points (default: 32 points)")
    p.add_argument("--neighbor", help="replacement for the last record (x1,..,xd[,label])")
    p.add_argument("--sigma-scale", type=float, default=1.0)
    p.add_argument("--power", action="store_true", help="run the test-power experiment")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--gamma-level", type=float, default=0.05)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bandwidth", help="rule-of-thumb bandwidth (non-private)")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_bandwidth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GpdpError, OSError) as exc:
        sys.stderr.write(f"gpdp {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
