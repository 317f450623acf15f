"""Command line entry point: ``otvsim simulate | analyze | verify-toy``.

``simulate`` fans seeded replications out over ``OTVSIM_WORKERS`` processes
(default 1) and writes, under ``--out``::

    <label>/seed<N>/report.json    one run
    <label>/seed<N>/metrics.csv    time series of tip pool and branch AW
    summary.json                   median / p10 / p90 per sweep point
    sweep.csv                      one row per run (only for sweeps)

A config may carry a ``[sweep]`` table with ``key`` (dotted, e.g.
``"adversary.q"``) and ``values``; every value gets its own replications.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .analytics import LoadParams, confluence_time, expected_tip_pool, first_approval_time, ttc_bound
from .netsim import ConfigError, from_dict, run
from .netsim.config import tomllib
from .netsim.metrics import _quantiles
from .toy import verify_toy
from .weights import zipf_weights

log = logging.getLogger("otvsim")

WORKERS_ENV = "OTVSIM_WORKERS"


# -- config loading ------------------------------------------------------------------


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("otvsim.presets").iterdir() if p.name.endswith(".toml"))


def read_raw(path: str) -> dict:
    """Load a TOML/JSON file; a bare name like ``xi_baseline`` resolves to a bundled preset."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        res = resources.files("otvsim.presets") / f"{path}.toml"
        if not res.is_file():
            raise ConfigError(f"no such config or preset: {path}")
        text, suffix = res.read_text(), ".toml"
    else:
        try:
            text, suffix = p.read_text(), p.suffix
        except OSError as e:
            raise ConfigError(f"cannot read {p}: {e}") from None
    try:
        return json.loads(text) if suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None


def _set_dotted(raw: dict, key: str, value) -> None:
    *path, last = key.split(".")
    d = raw
    for part in path:
        d = d.setdefault(part, {})
    d[last] = value


def expand(raw: dict) -> list[tuple[str, dict]]:
    """Split off the optional sweep table; return ``(label, config dict)`` pairs."""
    raw = copy.deepcopy(raw)
    sweep = raw.pop("sweep", None)
    if not sweep:
        return [("run", raw)]
    try:
        key, values = sweep["key"], list(sweep["values"])
    except (KeyError, TypeError):
        raise ConfigError("[sweep] needs 'key' and 'values'") from None
    out = []
    for v in values:
        r = copy.deepcopy(raw)
        _set_dotted(r, key, v)
        out.append((f"{key.split('.')[-1]}={v}", r))
    return out


# -- simulate ---------------------------------------------------------------------------


def _one(job):
    cfg_dict, seed = job
    cfg = from_dict({**cfg_dict, "seed": seed})
    t = time.perf_counter()
    rep = run(cfg)
    return rep, time.perf_counter() - t


def run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) == 1:
        return [_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_one, jobs))


def summarize(reports) -> dict:
    """Pooled block confirmation times plus the per-run consensus times."""
    ttc = [float("inf") if x is None else x for r in reports for x in r.confirmation_times]
    cons = [r.consensus_time if r.consensus_time is not None else float("inf") for r in reports]
    return {
        "runs": len(reports),
        "seeds": [r.seed for r in reports],
        "confirmation": _quantiles(ttc),
        "consensus": _quantiles(cons),
        "consensus_rate": sum(r.consensus_reached for r in reports) / len(reports),
        "broken_safety_runs": sum(r.broken_safety for r in reports),
        "tip_pool": _quantiles([r.tip_pool_mean for r in reports if r.tip_pool_mean is not None]),
    }


def cmd_simulate(config: str, seed: int | None = None, replications: int | None = None,
                 out: str | None = None, workers: int | None = None) -> dict:
    raw = read_raw(config)
    points = expand(raw)
    # validate every point up front so a bad sweep fails before any work
    cfgs = [(label, from_dict(d)) for label, d in points]
    base = cfgs[0][1]
    seed = base.seed if seed is None else seed
    reps = replications or base.replications
    out = out or base.out
    workers = workers or int(os.environ.get(WORKERS_ENV, "1"))

    jobs, owners = [], []
    for label, cfg in cfgs:
        d = cfg.to_dict()
        for r in range(reps):
            jobs.append((d, seed + r))
            owners.append(label)
    log.info("%d runs on %d worker(s)", len(jobs), workers)
    results = run_jobs(jobs, workers)

    summary = {"config": config if not Path(config).exists() else Path(config).name, "seed_base": seed,
               "replications": reps, "points": {}}
    by_label: dict[str, list] = {}
    for label, (rep, _) in zip(owners, results):
        by_label.setdefault(label, []).append(rep)
    for label, reports in by_label.items():
        summary["points"][label] = summarize(reports)

    if out:
        root = Path(out)
        try:
            for label, (rep, _) in zip(owners, results):
                d = root / label / f"seed{rep.seed}"
                d.mkdir(parents=True, exist_ok=True)
                (d / "report.json").write_text(rep.to_json())
                (d / "metrics.csv").write_text(rep.metrics_csv())
            (root / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1, allow_nan=False))
            if len(cfgs) > 1:
                with open(root / "sweep.csv", "w", newline="") as f:
                    w = csv.writer(f)
                    w.writerow(["point", "seed", "consensus_time", "broken_safety", "median_confirmation"])
                    for label, (rep, _) in zip(owners, results):
                        ct = "" if rep.consensus_time is None else rep.consensus_time
                        med = rep.confirmation["median"]
                        w.writerow([label, rep.seed, ct, int(rep.broken_safety), "" if med is None else med])
        except OSError as e:
            raise ConfigError(f"cannot write to {root}: {e}") from None
    return summary


def _print_summary(summary: dict) -> None:
    print(f"{'point':<18}{'runs':>5}{'ttc med':>9}{'p10':>7}{'p90':>7}{'cons rate':>10}{'cons med':>9}{'broken':>7}")
    for label, s in summary["points"].items():
        c, k = s["confirmation"], s["consensus"]

        def f(x):
            return "-" if x is None else f"{x:.2f}"

        print(f"{label:<18}{s['runs']:>5}{f(c['median']):>9}{f(c['p10']):>7}{f(c['p90']):>7}"
              f"{s['consensus_rate']:>10.2f}{f(k['median']):>9}{s['broken_safety_runs']:>7}")


# -- analyze ----------------------------------------------------------------------------


def cmd_analyze(config: str) -> list[tuple[str, float]]:
    rows = []
    for label, d in expand(read_raw(config)):
        cfg = from_dict(d)
        try:
            p = LoadParams(lam=cfg.lam, h=cfg.delay.h, k=cfg.k, theta=cfg.theta)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        table = zipf_weights(cfg.nodes, cfg.zipf_s)
        ct = confluence_time(p)
        b = ttc_bound(p, table)
        rows += [
            (f"{label}: tip pool L0", expected_tip_pool(p)),
            (f"{label}: first approval (s)", first_approval_time(p)),
            (f"{label}: confluence exact (s)", ct.exact),
            (f"{label}: confluence large-k (s)", ct.large_k),
            (f"{label}: issuance (s)", b.issuance),
            (f"{label}: TTC bound (s)", b.total),
        ]
    return rows


# -- main -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otvsim", description="On-Tangle-Voting simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("simulate", help="run seeded replications of a config")
    s.add_argument("--config", required=True, help="TOML/JSON file or bundled preset name")
    s.add_argument("--seed", type=int, help="seed of the first replication")
    s.add_argument("--replications", type=int)
    s.add_argument("--out", help="output directory")
    a = sub.add_parser("analyze", help="print the heuristic timing table for a config")
    a.add_argument("--config", required=True)
    sub.add_parser("verify-toy", help="check the seven-block worked example")
    sub.add_parser("presets", help="list bundled presets")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.cmd == "verify-toy":
            bad = verify_toy()
            if bad:
                for what, want, got in bad:
                    print(f"MISMATCH {what}: expected {want}, got {got}")
                return 1
            print("toy example reproduced")
            return 0
        if args.cmd == "presets":
            print("\n".join(preset_names()))
            return 0
        if args.cmd == "analyze":
            for name, v in cmd_analyze(args.config):
                print(f"{name:<40}{v:>10.4f}")
            return 0
        summary = cmd_simulate(args.config, args.seed, args.replications, args.out)
        _print_summary(summary)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
