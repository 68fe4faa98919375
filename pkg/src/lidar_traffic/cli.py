"""Command-line front end: ``lidar-traffic <subcommand> [options]``.

Subcommands: fit, gof, sample, generate, simulate, compare.  Every output
file gets a ``<output>.manifest.json`` sibling recording the fully resolved
invocation, so rerunning ``manifest["argv"]`` reproduces the outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import distributions as dist
from . import gof, linksim, sampling, traffic
from .errors import InvalidParams, TraceParseError, TrafficModelError

log = logging.getLogger("lidar_traffic")

TRAFFIC_STREAM = linksim.MODEL_STREAM


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# argument grammar
# ---------------------------------------------------------------------------


def _families(text: str):
    if text.strip().lower() == "all":
        return list(dist.FAMILIES)
    return [dist.Family.parse(t) for t in text.split(",") if t.strip()]


def _distances(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


def parse_params(text: str) -> dict[str, float]:
    """``"mu=1.5,sigma=2"`` -> ``{"mu": 1.5, "sigma": 2.0}``."""
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise InvalidParams(f"parameter {item!r} is not of the form name=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise InvalidParams(f"parameter {k.strip()!r} has non-numeric value {v!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lidar-traffic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("fit", help="bootstrap KS test of candidate families and model selection")
    common(sp, "GoF report CSV (stdout if omitted)")
    sp.add_argument("--input", required=True, help="trace CSV (frame sizes in bytes)")
    sp.add_argument("--families", type=_families, default="all")
    sp.add_argument("--bootstrap-l", type=int, default=1000)
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("gof", help="KS test of a trace against a fully specified model")
    common(sp, "GoF report CSV (stdout if omitted)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--family", required=True)
    sp.add_argument("--params", required=True, help="name=value,... in kB")
    sp.add_argument("--alpha", type=float, default=0.01)

    sp = sub.add_parser("sample", help="draw variates from a distribution")
    common(sp, "CSV index,value_kb (stdout if omitted)")
    sp.add_argument("--family", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--n", type=int, default=1000)

    sp = sub.add_parser("generate", help="model-driven burst generation")
    common(sp, "burst CSV (stdout if omitted)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--frames", type=int, default=1000)
    sp.add_argument("--trace", action="store_true", help="write frame_index,size_bytes instead")

    for name, hlp in (("simulate", "simulate one uplink"), ("compare", "trace- vs model-driven KS comparison")):
        sp = sub.add_parser(name, help=hlp)
        common(sp, "per-burst CSV" if name == "simulate" else "comparison CSV")
        sp.add_argument("--model", required=True)
        sp.add_argument("--input", help="trace CSV; omitted means model-driven"
                        if name == "simulate" else "trace CSV; omitted means presampled from the model")
        sp.add_argument("--frames", type=int, default=1000)
        sp.add_argument("--distance", type=float)
        sp.add_argument("--mtu", type=int, default=traffic.DEFAULT_MTU)
        sp.add_argument("--link-profile")
        sp.add_argument("--buffer-bytes", type=int, default=12_000_000)
        sp.add_argument("--overhead", type=float, default=0.02)
        if name == "simulate":
            sp.add_argument("--distances", type=_distances, help="comma list, runs a sweep")
            sp.add_argument("--summary", help="summary CSV path (default <out stem>_summary.csv)")
            sp.add_argument("--workers", type=int, default=1)
    return p


def _read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise TraceParseError(f"config entry {s!r} is not key = value", lineno)
            k, v = s.split("=", 1)
            values[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return values


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    choices = parser._subparsers._group_actions[0].choices
    if path and command in choices:
        # config values become subcommand defaults, so explicit flags still win
        sp = choices[command]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for k, v in _read_config(path).items():
            if k not in known or k in ("config", "help"):
                raise UsageError(f"unknown config key {k!r}")
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    defaults[k] = act.type(v) if act.type else v
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"bad config value for {k!r}: {exc}") from None
        sp.set_defaults(**defaults)
        for a in sp._actions:
            if a.dest in defaults:
                a.required = False
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def _replay_argv(args: argparse.Namespace) -> list[str]:
    out = [args.command]
    for k, v in sorted(vars(args).items()):
        if k in ("command", "config", "verbose") or v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            out.append(flag)
        elif k == "families":
            out += [flag, ",".join(f.value for f in v)]
        elif k == "distances":
            out += [flag, ",".join(f"{d:g}" for d in v)]
        else:
            out += [flag, str(v)]
    return out


def _options(args) -> dict:
    opts = {}
    for k, v in vars(args).items():
        if k == "families":
            v = [f.value for f in v]
        opts[k] = v
    return opts


def _emit(path, text: str, args, written: list[str]):
    if path is None:
        sys.stdout.write(text)
        return
    traffic.write_text_atomic(path, text)
    written.append(os.fspath(path))


def _write_manifest(args, written: list[str]):
    if not written:
        return
    manifest = {
        "tool": "lidar-traffic",
        "version": __version__,
        "subcommand": args.command,
        "seed": args.seed,
        "options": _options(args),
        "inputs": [p for p in (getattr(args, "input", None), getattr(args, "link_profile", None)) if p],
        "outputs": written,
        "argv": _replay_argv(args),
    }
    primary = args.out if getattr(args, "out", None) else written[0]
    traffic.write_text_atomic(primary + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _stem(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root


def _sample_kb(path) -> dist.SampleSet:
    trace = traffic.read_trace(path)
    return dist.SampleSet.of_sizes(np.asarray(trace.sizes, dtype=float) / 1000.0)


def model_record_csv(models) -> str:
    lines = ["family,parameters,log_likelihood,sample_size"]
    for m in models:
        rec = m.as_record()
        params = ";".join(f"{k}={rec[k]:.6g}" for k in m.params)
        lines.append(f"{m.family.value},{params},{m.log_likelihood:.10g},{m.sample_size}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args, written):
    sample = _sample_kb(args.input)
    cfg = gof.BootstrapConfig(args.bootstrap_l, args.alpha, args.seed, args.workers)
    result = gof.select_model(sample, args.families, cfg)
    _emit(args.out, gof.format_gof_report(result), args, written)
    models = [o.fitted for o in result.outcomes if o.fitted is not None]
    if args.out:
        _emit(_stem(args.out) + ".models.csv", model_record_csv(models), args, written)
        _emit(_stem(args.out) + ".chosen.json",
              json.dumps(result.chosen_model.as_record(), indent=2) + "\n", args, written)
    else:
        sys.stdout.write(json.dumps(result.chosen_model.as_record()) + "\n")


def cmd_gof(args, written):
    sample = _sample_kb(args.input)
    fam = dist.Family.parse(args.family)
    params = dist.make_params(fam, parse_params(args.params))
    ks = gof.ks_one_sample(sample, fam, params)
    e = dist.ecdf(sample)
    nr = gof.nrmse(e, lambda x: dist.cdf(fam, params, x))
    ll = dist.log_likelihood(fam, params, sample)
    passed = ks.p_value >= args.alpha
    text = (",".join(gof.GOF_HEADER) + "\n"
            + f"{fam.value},{ks.statistic:.6g},{ks.p_value:.6g},{'true' if passed else 'false'},{nr:.6g},{ll:.10g}\n")
    _emit(args.out, text, args, written)


def cmd_sample(args, written):
    if args.n < 1:
        raise InvalidParams("--n must be >= 1")
    fam = dist.Family.parse(args.family)
    values = sampling.draw(fam, parse_params(args.params), sampling.RngStream(args.seed, TRAFFIC_STREAM), size=args.n)
    lines = ["index,value_kb"] + [f"{i},{v:.17g}" for i, v in enumerate(values)]
    _emit(args.out, "\n".join(lines) + "\n", args, written)


def cmd_generate(args, written):
    cfg = traffic.builtin_config(args.model)
    bursts = traffic.generate_bursts(cfg, args.frames, sampling.RngStream(args.seed, TRAFFIC_STREAM))
    text = traffic.format_trace(b.size_bytes for b in bursts) if args.trace else traffic.format_bursts(bursts)
    _emit(args.out, text, args, written)


def _link(args) -> linksim.LinkProfile:
    if args.link_profile:
        with open(args.link_profile) as fh:
            return linksim.parse_link_profile(fh.read())
    return linksim.default_link_profile()


def _bursts(args, cfg):
    if args.input:
        return traffic.bursts_from_trace(traffic.read_trace(args.input), cfg.frame_period_ms)
    return traffic.generate_bursts(cfg, args.frames, sampling.RngStream(args.seed, TRAFFIC_STREAM))


def _sim_config(args, distance, index=0):
    return linksim.SimConfig(distance, args.buffer_bytes, args.overhead, args.mtu, args.seed, index)


def _run_one(job):
    bursts, cfg, sim, link = job
    return linksim.run_sim(bursts, cfg, sim, link)


def cmd_simulate(args, written):
    cfg = traffic.builtin_config(args.model)
    link = _link(args)
    bursts = _bursts(args, cfg)
    if args.distances:
        distances = args.distances
    elif args.distance is not None:
        distances = [args.distance]
    else:
        raise UsageError("simulate needs --distance or --distances")
    jobs = [(bursts, cfg, _sim_config(args, d, i), link) for i, d in enumerate(distances)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    if args.out:
        if len(results) == 1:
            _emit(args.out, linksim.format_burst_records(results[0]), args, written)
        else:
            root, ext = os.path.splitext(args.out)
            for d, r in zip(distances, results):
                _emit(f"{root}_d{d:g}{ext or '.csv'}", linksim.format_burst_records(r), args, written)
        summary = args.summary or _stem(args.out) + "_summary.csv"
        _emit(summary, linksim.format_summary(results), args, written)
    else:
        _emit(args.summary, linksim.format_summary(results), args, written)


def cmd_compare(args, written):
    cfg = traffic.builtin_config(args.model)
    if args.distance is None:
        raise UsageError("compare needs --distance")
    trace = traffic.read_trace(args.input) if args.input else None
    lat, thr = linksim.trace_vs_model(
        cfg, args.distance, args.frames, args.seed, _link(args), trace,
        buffer_bytes=args.buffer_bytes, overhead_fraction=args.overhead, mtu=args.mtu,
    )
    lines = ["metric,ks_statistic,p_value,n_eff"]
    for name, r in (("latency", lat), ("throughput", thr)):
        lines.append(f"{name},{r.statistic:.6g},{r.p_value:.6g},{r.n:.6g}")
    _emit(args.out, "\n".join(lines) + "\n", args, written)


COMMANDS = {
    "fit": cmd_fit, "gof": cmd_gof, "sample": cmd_sample,
    "generate": cmd_generate, "simulate": cmd_simulate, "compare": cmd_compare,
}


def run_command(argv: list[str]) -> int:
    """Run one CLI invocation; returns the process exit code."""
    try:
        args = parse_args(list(argv))
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (TrafficModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    written: list[str] = []
    try:
        COMMANDS[args.command](args, written)
        _write_manifest(args, written)
    except UsageError as exc:
        print(f"lidar-traffic {args.command}: {exc}", file=sys.stderr)
        return 2
    except (TrafficModelError, OSError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
