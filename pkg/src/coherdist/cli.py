"""``coherdist`` command-line front end.

Exit codes: 0 success, 2 usage or bad input, 3 infeasible conversion,
4 validation failure. Floats are printed as shortest round-trip decimals.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import checks, optics
from .distillation import (
    distillation_fidelity,
    embed_target,
    fidelity_regions,
    m_distillation_norm,
    one_shot_distillable_coherence,
    optimal_target,
)
from .errors import CoherdistError, InfeasibleConversionError
from .sio import plan_conversion, realized_fidelities
from .states import FAMILIES, family_state, make_pure_state, maximally_coherent

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 2, 3, 4


def fmt(x: float) -> str:
    return repr(float(x))


def _amps_json(amps) -> list:
    amps = np.asarray(amps)
    if np.all(amps.imag == 0):
        return [float(a) for a in amps.real]
    return [{"re": float(a.real), "im": float(a.imag)} for a in amps]


def _parse_amps(text: str):
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse amplitude list {text!r}")


def _state_from_args(args, prefix: str = ""):
    amps = getattr(args, prefix + "amps")
    if amps is not None:
        return make_pure_state(amps)
    family, alpha = getattr(args, prefix + "family"), getattr(args, prefix + "alpha")
    if family is None or alpha is None:
        raise argparse.ArgumentTypeError("give either --amps or both --family and --alpha")
    return family_state(family, alpha)


def _add_state_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=sorted(FAMILIES))
    p.add_argument("--alpha", type=float)
    p.add_argument("--amps", type=_parse_amps, help="comma-separated amplitudes, e.g. 1,0 or 0.6,0.8j")


def _emit(args, doc: dict, lines: Sequence[str]) -> None:
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print("\n".join(lines))


# --- subcommands ------------------------------------------------------------


def cmd_fidelity(args) -> int:
    state = _state_from_args(args)
    nb = m_distillation_norm(state, args.m)
    f = distillation_fidelity(state, args.m)
    doc = {"m": nb.m, "fidelity": f, "k_star": nb.k_star, "head_l1": nb.head_l1,
           "tail_l2": nb.tail_l2, "norm": nb.norm_value}
    _emit(args, doc, [f"fidelity {fmt(f)}", f"k_star {nb.k_star}", f"head_l1 {fmt(nb.head_l1)}",
                      f"tail_l2 {fmt(nb.tail_l2)}", f"norm {fmt(nb.norm_value)}"])
    return EXIT_OK


def cmd_distill(args) -> int:
    state = _state_from_args(args)
    rep = one_shot_distillable_coherence(state, args.eps)
    target = rep.best_target
    doc = {
        "input": _amps_json(state.amps),
        "epsilon": rep.epsilon,
        "best_m": rep.best_m,
        "coherence_bits": rep.coherence_bits,
        "fidelities": {str(r.m): r.fidelity for r in rep.per_m},
        "target": _amps_json(target.amps),
        "target_on_input_modes": _amps_json(embed_target(state, target).amps),
    }
    lines = [f"best_m {rep.best_m}", f"coherence_bits {fmt(rep.coherence_bits)}"]
    lines += [f"F_m{r.m} {fmt(r.fidelity)}" for r in rep.per_m]
    lines.append("target " + " ".join(fmt(a) for a in np.abs(target.amps)))
    _emit(args, doc, lines)
    return EXIT_OK


def sweep_alphas(start: float, end: float, step: float) -> list[float]:
    if step <= 0:
        raise argparse.ArgumentTypeError("--step must be positive")
    if end < start:
        raise argparse.ArgumentTypeError("--end must not be below --start")
    n = int(math.floor((end - start) / step + 1e-9))
    alphas = [round(start + k * step, 12) for k in range(n + 1)]
    return [min(a, end) for a in alphas]


def sweep_row(job) -> list[str]:
    family, alpha, ms, epsilons = job
    state = family_state(family, alpha)
    row = [fmt(alpha)] + [fmt(distillation_fidelity(state, m)) for m in ms]
    reports = [one_shot_distillable_coherence(state, e) for e in epsilons]
    row += [fmt(r.coherence_bits) for r in reports]
    row.append(";".join(f"eps{fmt(e)}:m{r.best_m}" for e, r in zip(epsilons, reports)))
    return row


def sweep_csv(family: str, alphas, ms, epsilons, jobs: int = 1) -> str:
    header = ["alpha"] + [f"F_m{m}" for m in ms] + [f"Cd_eps{fmt(e)}" for e in epsilons] + ["region"]
    work = [(family, a, tuple(ms), tuple(epsilons)) for a in alphas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_row, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [sweep_row(w) for w in work]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    ctor, (lo, hi) = FAMILIES[args.family]
    start = lo if args.start is None else args.start
    end = hi if args.end is None else args.end
    if not lo <= start <= end <= hi:
        raise argparse.ArgumentTypeError(f"{args.family} sweep must stay inside [{lo}, {hi}]")
    dim = ctor(lo).dim
    bad = [m for m in args.m if not 1 <= m <= dim]
    if bad:
        raise argparse.ArgumentTypeError(f"m must lie in [1, {dim}] for {args.family}")
    if any(not 0 <= e <= 1 for e in args.eps):
        raise argparse.ArgumentTypeError("epsilons must lie in [0, 1]")
    text = sweep_csv(args.family, sweep_alphas(start, end, args.step), args.m, args.eps, args.jobs)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_boundaries(args) -> int:
    ctor, domain = FAMILIES[args.family]
    if not 0 <= args.eps < 1:
        raise argparse.ArgumentTypeError("--eps must lie in [0, 1)")
    dim = ctor(domain[0]).dim
    ms = args.m or list(range(2, dim + 1))
    regions = {str(m): [list(r) for r in fidelity_regions(ctor, m, args.eps, domain, tol=args.tol)] for m in ms}
    doc = {"family": args.family, "epsilon": args.eps, "tolerance": args.tol, "regions": regions}
    lines = []
    for m, rs in regions.items():
        spans = " U ".join(f"[{fmt(a)}, {fmt(b)}]" for a, b in rs) or "empty"
        lines.append(f"m={m}: {spans}")
    _emit(args, doc, lines)
    return EXIT_OK


def _target_from_args(args, source):
    given = [x is not None for x in (args.target_amps, args.target_max, args.target_optimal)]
    if sum(given) != 1:
        raise argparse.ArgumentTypeError("give exactly one of --target-amps, --target-max, --target-optimal")
    if args.target_amps is not None:
        return make_pure_state(args.target_amps)
    if args.target_max is not None:
        return maximally_coherent(args.target_max)
    return embed_target(source, optimal_target(source, args.target_optimal))


def cmd_synthesize(args) -> int:
    source = _state_from_args(args)
    target = _target_from_args(args, source)
    try:
        plan = plan_conversion(source, target)
    except InfeasibleConversionError as exc:
        v = exc.verdict
        print(f"infeasible: {exc}", file=sys.stderr)
        if v is not None and v.first_violation is not None:
            k = v.first_violation
            print(f"first majorization violation at k={k}: source partial sum "
                  f"{fmt(v.partial_sums_src[k])} > target partial sum {fmt(v.partial_sums_tgt[k])}", file=sys.stderr)
        return EXIT_INFEASIBLE
    steps = [{"i": s.i, "j": s.j, "a": s.a_ij,
              "theta_rad": [s.theta1, s.theta2, s.theta3],
              "theta_deg": [math.degrees(t) for t in (s.theta1, s.theta2, s.theta3)]} for s in plan.steps]
    fids = realized_fidelities(plan)
    doc = {"n_steps": len(steps), "n_kraus": len(plan.total_channel), "steps": steps,
           "relabel": None if plan.relabel is None else [int(r) for r in plan.relabel],
           "min_branch_fidelity": min(fids)}
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(plan.total_channel.to_json(indent=2))
        doc["channel_file"] = args.output
    lines = [f"{len(steps)} step(s), {len(plan.total_channel)} Kraus operator(s)"]
    for n, s in enumerate(steps, 1):
        deg = ", ".join(f"{t:.6f}" for t in s["theta_deg"])
        rad = ", ".join(fmt(t) for t in s["theta_rad"])
        lines.append(f"step {n}: modes ({s['i']}, {s['j']}) a={fmt(s['a'])} theta_deg=({deg}) theta_rad=({rad})")
    if plan.relabel is not None:
        lines.append("relabel " + " ".join(str(int(r)) for r in plan.relabel))
    lines.append(f"min_branch_fidelity {fmt(min(fids))}")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = optics.simulate_figure(args.figure, args.alpha)
    doc = {"figure": run.figure, "alpha": run.alpha,
           "rho": {"re": run.rho.real.tolist(), "im": run.rho.imag.tolist()},
           "target": _amps_json(run.target.amps), "fidelity": run.fidelity,
           "worst_branch_fidelity": run.worst_branch_fidelity, "channel_distance": run.channel_distance}
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    if args.circuit:
        with open(args.circuit, "w", encoding="utf-8") as fh:
            fh.write(optics.FIGURES[args.figure].build(args.alpha).to_json(indent=2))
    lines = [f"fidelity {fmt(run.fidelity)}", f"worst_branch_fidelity {fmt(run.worst_branch_fidelity)}",
             f"channel_distance {fmt(run.channel_distance)}", "rho (real part):"]
    lines += ["  " + " ".join(f"{x: .6f}" for x in row) for row in run.rho.real]
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = checks.run_checks(args.inject, seed=args.seed)
    failed = [r for r in results if not r.ok]
    if args.json:
        print(json.dumps({"passed": not failed, "checks": [r.__dict__ for r in results]}, indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
        print("all checks passed" if not failed else f"{len(failed)} check(s) failed")
    return EXIT_VALIDATION if failed else EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherdist", description="One-shot coherence distillation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.set_defaults(func=fn)
        return p

    p = add("fidelity", cmd_fidelity, "distillation fidelity to the m-dim maximally coherent state")
    _add_state_args(p)
    p.add_argument("--m", type=int, required=True)

    p = add("distill", cmd_distill, "one-shot distillable coherence at error eps")
    _add_state_args(p)
    p.add_argument("--eps", type=float, required=True)

    p = add("sweep", cmd_sweep, "CSV of fidelities and distillable coherence over alpha")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--start", type=float)
    p.add_argument("--end", type=float)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--m", type=int, nargs="+", default=[2, 3])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.1])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")

    p = add("boundaries", cmd_boundaries, "alpha intervals where F >= 1 - eps")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("synthesize", cmd_synthesize, "SIO channel converting a state into a target")
    _add_state_args(p)
    p.add_argument("--target-amps", type=_parse_amps)
    p.add_argument("--target-max", type=int, help="m-dim maximally coherent target")
    p.add_argument("--target-optimal", type=int, help="best m-dim distillation target for the input")
    p.add_argument("--output", help="write the channel JSON here")

    p = add("simulate", cmd_simulate, "run a reference optical circuit")
    p.add_argument("--figure", choices=sorted(optics.FIGURES), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--output", help="write the tomography JSON here")
    p.add_argument("--circuit", help="write the circuit JSON here")

    p = add("validate", cmd_validate, "run the invariant suite")
    p.add_argument("--inject", action="append", default=[], choices=checks.FAULTS, help="inject a fault")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except InfeasibleConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CoherdistError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
