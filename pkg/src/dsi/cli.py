"""Command-line front end. Every subcommand writes one CSV table.

Exit status: 0 on success, 1 on a usage or input error, 2 on a numerical
failure (infeasible distortion, non-convergence, singular systems, search
budget exceeded).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import warnings

import numpy as np

from . import analytic, numeric, sim
from .errors import BudgetError, ConvergenceError, InfeasibleError, ModelError, SingularSystemError
from .model import (
    LN2,
    DistortionTensor,
    QDistribution,
    RDCurve,
    binary_entropy_bits,
    independent_model,
    load_model_json,
    parse_discrete_q,
    to_units,
)

NUMERIC_ERRORS = (InfeasibleError, ConvergenceError, SingularSystemError, BudgetError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def write_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _default_seed():
    raw = os.environ.get("DSI_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"DSI_SEED must be an integer, got {raw!r}") from exc


def _checked(curve: RDCurve):
    problems = curve.violations()
    if problems:
        raise InfeasibleError("curve failed its invariants: " + "; ".join(problems))
    return curve


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def cmd_curves_hamming(args):
    if args.preset == "noisy-obs":
        model = analytic.model_noisy_obs(args.N)
    else:
        model = analytic.model_weighted(args.N, args.gamma)
    if args.D:
        D = np.array(sorted(args.D))
    else:
        D = np.linspace(model.d_min, model.d_max, args.points)
    none = np.array([analytic.rd_hamming_none(model, d, args.units) for d in D])
    both = np.array([analytic.rd_hamming_both(model, d, args.units).R for d in D])
    for R in (none, both):
        _checked(RDCurve(D, R, args.units))
    write_csv(["D", "R_none", "R_both"], zip(D, none, both), args.out)


def cmd_curves_gaussian(args):
    q = parse_discrete_q(args.q)
    model = analytic.GaussQModel.from_q(q)
    if args.D:
        D = np.array(sorted(args.D))
    else:
        D = np.geomspace(args.d_min, model.mean_q, args.points)
    none = np.array([analytic.rd_gauss_none(model, d) for d in D])
    both = np.array([analytic.rd_gauss_both(model, d).R for d in D])
    enc_curve = numeric.gauss_enc_upper_curve(model, eval_D=D)
    enc = numeric.envelope_rate(np.column_stack([enc_curve.D, enc_curve.R]), D)
    if not np.all(np.isfinite(enc)):
        raise InfeasibleError("requested D lies below the encoder-only sweep")
    spec = analytic.FisherSpec(args.J, model.q_min)
    fisher = np.array([b + analytic.fisher_bound(spec, d) for b, d in zip(both, D)])
    cols = [none, both, enc, fisher]
    for R in cols[:3]:
        _checked(RDCurve(D, R, "nats"))
    cols = [to_units(c, args.units) for c in cols]
    write_csv(["D", "R_none", "R_both", "R_enc_upper", "fisher_bound"], zip(D, *cols), args.out)


# ---------------------------------------------------------------------------
# gap
# ---------------------------------------------------------------------------

FAMILY_PARAMS = {
    "constant": ("c",),
    "exponential": ("tau",),
    "uniform01": (),
    "lognormal": ("M", "Q2"),
    "pareto": ("a", "b"),
    "gamma": ("a", "b"),
    "pathological": ("eps",),
    "positive-cauchy": (),
}


def _family(args):
    if args.family == "discrete":
        if not args.q:
            raise UsageError("--family discrete needs --q value:prob,...")
        return parse_discrete_q(args.q)
    values = []
    for name in FAMILY_PARAMS[args.family]:
        v = getattr(args, name)
        if v is None:
            raise UsageError(f"--family {args.family} needs --{name}")
        values.append(v)
    return QDistribution(args.family, tuple(values))


def cmd_gap(args):
    q = _family(args)
    gap = analytic.rate_gap_hr(q, k=args.k, r=args.r, method=args.method, units=args.units)
    params = ";".join(f"{n}={fmt(v)}" for n, v in zip(FAMILY_PARAMS.get(q.family, ()), q.params))
    if q.family == "discrete":
        params = args.q
    write_csv(["family", "params", "k", "r", "gap", "units", "divergent"],
              [(q.family, params, args.k, fmt(args.r), gap, args.units, int(math.isinf(gap)))],
              args.out)


# ---------------------------------------------------------------------------
# ba
# ---------------------------------------------------------------------------

def cmd_ba(args):
    model, d = load_model_json(args.model)
    rows = []
    for s in args.slopes:
        if not s > 0:
            raise UsageError("slopes must be positive")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = numeric.solve_model(model, d, s, args.mode)
        if not res.converged:
            raise ConvergenceError(
                f"Blahut-Arimoto did not converge at slope {s} after {res.iterations} iterations"
            )
        extra = to_units(res.I_xhat_q, args.units) if res.I_xhat_q is not None else math.nan
        rows.append((s, res.D, to_units(res.R, args.units), extra, res.iterations))
    write_csv(["slope", "D", "R", "I_xhat_q", "iterations"], rows, args.out)


# ---------------------------------------------------------------------------
# Wyner-Ziv oracle
# ---------------------------------------------------------------------------

def _symmetric_binary_scaled_hamming(q):
    model = independent_model([0.5, 0.5], q.probs)
    ham = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = DistortionTensor(ham[:, :, None] * np.array(q.values)[None, None, :])
    return model, d


def cmd_wz(args):
    if args.model:
        model, d = load_model_json(args.model)
        reference = None
    else:
        q = parse_discrete_q(args.q)
        model, d = _symmetric_binary_scaled_hamming(q)
        mean_q = float(np.dot(q.values, q.probs))
        reference = lambda D: max(0.0, 1.0 - float(binary_entropy_bits(min(D / mean_q, 0.5))))
    grid = numeric.WzGrid(args.u_size, args.resolution)
    rows = []
    for D in args.D:
        res = numeric.wz_bruteforce(model, d, D, grid)
        ref = reference(D) if reference else math.nan
        rows.append((D, to_units(res.R, args.units), to_units(ref * LN2, args.units)
                     if reference else math.nan, res.candidates))
    write_csv(["D", "R_wz", "R_reference", "candidates"], rows, args.out)


# ---------------------------------------------------------------------------
# codecs and simulations
# ---------------------------------------------------------------------------

def cmd_codec_erasure(args):
    r = sim.mc_erasure(args.n, args.k, args.m, sim.McConfig(args.seed, args.trials))
    b = r.bits_per_relevant_symbol
    write_csv(
        ["n", "k", "m", "trials", "seed", "relevant_errors", "bits_per_relevant_symbol",
         "stderr", "payload_bits", "uninformed_bits_per_relevant_symbol"],
        [(r.n, r.k, r.m, b.trials, b.seed, r.relevant_errors, b.mean, b.stderr,
          r.payload_bits, r.uninformed_bits_per_relevant_symbol)],
        args.out,
    )


def cmd_codec_dft(args):
    r = sim.mc_dft(args.n, args.k, args.step, sim.McConfig(args.seed, args.trials))
    head = ["n", "k", "step", "trials", "seed", "relevant_mse", "relevant_mse_stderr",
            "coeff_mse", "coeff_mse_stderr", "ratio", "ratio_stderr", "singular",
            "max_identity_error", "index_entropy_bits"]
    row = [args.n, args.k, args.step, args.trials, args.seed,
           r.relevant_mse.mean, r.relevant_mse.stderr, r.coeff_mse.mean, r.coeff_mse.stderr,
           r.ratio.mean, r.ratio.stderr, r.singular, r.max_identity_error,
           r.index_entropy_bits]
    head += [f"kappa_log10_{k}" for k in r.kappa_hist]
    row += list(r.kappa_hist.values())
    write_csv(head, [row], args.out)


def cmd_sim_lattice(args):
    cfg = sim.McConfig(args.seed, args.trials)
    modes = sim.LATTICE_MODES if args.mode == "all" else (args.mode,)
    rows = []
    for mode in modes:
        r = sim.lattice2d_sim(mode, args.delta, args.p_axis, cfg,
                              both_relevant=args.both_relevant,
                              irrelevant_index=args.irrelevant_index)
        rows.append((mode, args.delta, args.p_axis, args.trials, args.seed,
                     r.rate_bits.mean, r.rate_bits.stderr,
                     r.relevant_mse.mean, r.relevant_mse.stderr))
    write_csv(["mode", "delta", "p_axis", "trials", "seed", "rate_bits", "rate_stderr",
               "relevant_mse", "relevant_mse_stderr"], rows, args.out)


def cmd_slb(args):
    q = parse_discrete_q(args.q)
    rows = []
    for D in args.D:
        r = analytic.slb_group_hamming(args.m, q.values, q.probs, D, units=args.units)
        rows.append((D, r.R, r.mu))
    write_csv(["D", "R_slb", "mu"], rows, args.out)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _common(p, units="bits", seed=False):
    p.add_argument("--units", choices=("bits", "nats"), default=units)
    p.add_argument("--out", default=None, help="output CSV path (default: standard output)")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help="64-bit seed (default: $DSI_SEED or 0)")
        p.add_argument("--trials", type=_positive_int, default=10_000)


def build_parser():
    parser = _Parser(prog="dsi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    curves = sub.add_parser("curves", help="rate-distortion curves")
    csub = curves.add_subparsers(dest="curve", required=True, parser_class=_Parser)
    ham = csub.add_parser("hamming", help="binary source, side-information Hamming distortion")
    _common(ham)
    ham.add_argument("preset", choices=("noisy-obs", "weighted"))
    ham.add_argument("--N", type=_positive_int, required=True)
    ham.add_argument("--gamma", type=float, default=5.0)
    ham.add_argument("--points", type=_positive_int, default=20)
    ham.add_argument("--D", type=float, nargs="+")
    ham.set_defaults(func=cmd_curves_hamming)

    gau = csub.add_parser("gaussian", help="Gaussian source, scaled squared error")
    _common(gau)
    gau.add_argument("--q", default="1:0.6,10:0.4", help='discrete q as "value:prob,..."')
    gau.add_argument("--points", type=_positive_int, default=50)
    gau.add_argument("--d-min", type=float, default=1e-3)
    gau.add_argument("--D", type=float, nargs="+")
    gau.add_argument("--J", type=float, default=1.0, help="Fisher information for the bound column")
    gau.set_defaults(func=cmd_curves_gaussian)

    gap = sub.add_parser("gap", help="high-resolution rate gap for a q family")
    _common(gap, units="nats")
    gap.add_argument("--family", required=True, choices=(*FAMILY_PARAMS, "discrete"))
    for name in ("c", "tau", "M", "Q2", "a", "b", "eps"):
        gap.add_argument(f"--{name}", type=float)
    gap.add_argument("--q", help="discrete q as value:prob,...")
    gap.add_argument("--k", type=_positive_int, default=1)
    gap.add_argument("--r", type=float, default=2.0)
    gap.add_argument("--method", choices=("auto", "closed", "quadrature"), default="auto")
    gap.set_defaults(func=cmd_gap)

    ba = sub.add_parser("ba", help="Blahut-Arimoto on a JSON model")
    _common(ba)
    ba.add_argument("--model", required=True)
    ba.add_argument("--mode", choices=("none", "both", "enc"), required=True)
    ba.add_argument("--slopes", type=float, nargs="+", required=True)
    ba.set_defaults(func=cmd_ba)

    wz = sub.add_parser("wz-oracle", help="brute-force decoder-side-information rate")
    _common(wz)
    wz.add_argument("--model", help="JSON model (default: symmetric binary, scaled Hamming)")
    wz.add_argument("--q", default="1:0.5,2:0.5")
    wz.add_argument("--D", type=float, nargs="+", required=True)
    wz.add_argument("--u-size", type=_positive_int, default=3)
    wz.add_argument("--resolution", type=int, default=33)
    wz.set_defaults(func=cmd_wz)

    codec = sub.add_parser("codec", help="codec Monte Carlo")
    cosub = codec.add_subparsers(dest="codec", required=True, parser_class=_Parser)
    er = cosub.add_parser("erasure", help="GF(2^m) curve-fitting codec")
    _common(er, seed=True)
    er.add_argument("--n", type=_positive_int, required=True)
    er.add_argument("--k", type=_positive_int, required=True)
    er.add_argument("--m", type=int, choices=(3, 4, 8), default=8)
    er.set_defaults(func=cmd_codec_erasure)
    df = cosub.add_parser("dft", help="band-limited DFT codec")
    _common(df, seed=True)
    df.add_argument("--n", type=_positive_int, required=True)
    df.add_argument("--k", type=_positive_int, required=True)
    df.add_argument("--step", type=float, default=0.25)
    df.set_defaults(func=cmd_codec_dft)

    sm = sub.add_parser("sim", help="quantizer simulations")
    ssub = sm.add_subparsers(dest="sim", required=True, parser_class=_Parser)
    lat = ssub.add_parser("lattice2d", help="2-D fixed-codebook quantizer")
    _common(lat, seed=True)
    lat.add_argument("--mode", choices=(*sim.LATTICE_MODES, "all"), default="all")
    lat.add_argument("--delta", type=float, default=0.25)
    lat.add_argument("--p-axis", type=float, default=0.5)
    lat.add_argument("--both-relevant", action="store_true")
    lat.add_argument("--irrelevant-index", choices=("center", "copy"), default="center")
    lat.set_defaults(func=cmd_sim_lattice)

    slb = sub.add_parser("slb", help="conditional Shannon lower bounds")
    slsub = slb.add_subparsers(dest="slb", required=True, parser_class=_Parser)
    gh = slsub.add_parser("group-hamming", help="group Hamming distortion on Z_m")
    _common(gh)
    gh.add_argument("--m", type=int, required=True)
    gh.add_argument("--q", required=True)
    gh.add_argument("--D", type=float, nargs="+", required=True)
    gh.set_defaults(func=cmd_slb)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"dsi: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ModelError, ValueError, OSError) as exc:
        print(f"dsi: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
