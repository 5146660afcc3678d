"""qroute command line.

Exit codes: 0 on success, 2 on validation failures, 3 when the SDP solver
does not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .. import route
from ..chan import eca_gap_sweep, summarize_sweep, sweep_to_csv
from ..core import CouplingMap, metrics
from ..decomp import ALL_SPECS, CNOT_BUDGET, FREDKIN_ALL, FREDKIN_ENDS, TOFFOLI_ALL, default_family, implements, load_corpus_all, seed_circuit, write_corpus
from ..errors import QrouteError, SolverDidNotConverge, ValidationError
from ..qasmio import emit_qasm
from .eca import summarize_epsilons, swap_test_study
from .hubbard import hubbard_study

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

SPECS = {s.key: s for s in ALL_SPECS}


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _grid(text: str) -> list[float]:
    """'0:10' (integer steps), 'a:b:step' or a comma list."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1.0
        return [float(v) for v in np.arange(lo, hi + step / 2, step)]
    return _floats(text)


def _spec(key: str):
    try:
        return SPECS[key]
    except KeyError:
        raise ValidationError(f"unknown gate spec {key!r}; choose from {', '.join(SPECS)}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# -- family ------------------------------------------------------------------


def cmd_family_gen(a) -> int:
    fam = default_family(_spec(a.gate), reverse_cx=a.reverse_cx)
    paths = write_corpus(a.out, fam)
    print(f"{fam.spec.key}: {len(fam)} circuits, {fam.structures} structures -> {a.out} ({len(paths)} files)")
    return EXIT_OK


def _load(a):
    families, failures = load_corpus_all(a.directory, a.allow_plus_one)
    for spec, fam in sorted(families.items(), key=lambda kv: kv[0].key):
        print(f"{spec.key}: {len(fam)} circuits, {fam.structures} structures")
    for f in failures:
        print(f"rejected {f.source}: {f.reason}")
    return families, failures


def cmd_family_load(a) -> int:
    _load(a)
    return EXIT_OK


def cmd_family_validate(a) -> int:
    families, failures = _load(a)
    if failures or not families:
        return EXIT_INVALID
    return EXIT_OK


# -- route -------------------------------------------------------------------


def _report(c, out: str | None, coupling: CouplingMap | None = None) -> int:
    m = metrics(c)
    print(f"{c.name}: qubits={c.num_qubits} cx={m.cnot_count} depth={m.depth}")
    if coupling is not None:
        from ..core import validate_connectivity

        bad = validate_connectivity(c, coupling)
        if bad:
            print(f"{len(bad)} gates violate the coupling map")
            return EXIT_INVALID
    if out:
        Path(out).write_text(emit_qasm(c))
    return EXIT_OK


def cmd_route_longcnot(a) -> int:
    c = route.long_range_cnot(a.idle, route.LongRangeMethod(a.method))
    return _report(c, a.out, CouplingMap.line(c.num_qubits))


def cmd_route_toffoli(a) -> int:
    p = route.LinePlacement(a.line, tuple(_ints(a.controls)), (a.target,))
    return _report(route.toffoli_long_range(p), a.out, CouplingMap.line(a.line))


def cmd_route_fredkin(a) -> int:
    p = route.LinePlacement(a.line, (a.control,), tuple(_ints(a.targets)))
    c = route.fredkin_long_range(p, route.RerouteStrategy(a.strategy))
    code = _report(c, a.out, CouplingMap.line(a.line))
    if p.controls[0] < min(p.targets) or p.controls[0] > max(p.targets):
        print(f"rerouting depth={route.rerouting_depth(p, route.RerouteStrategy(a.strategy))}")
    return code


def cmd_route_fanout(a) -> int:
    c = route.fanout_cnots(a.control, _ints(a.targets), a.line, a.pipelined)
    return _report(c, a.out, CouplingMap.line(a.line))


def cmd_route_pauliexp(a) -> int:
    coupling = CouplingMap.parse(a.coupling)
    c = route.pauli_exponential(a.pauli, a.theta, coupling, route.PauliMethod(a.method))
    return _report(c, a.out, coupling)


# -- sweep / experiments -----------------------------------------------------


def cmd_sweep(a) -> int:
    rows = []
    for key in a.gates.split(","):
        spec = _spec(key)
        rows += eca_gap_sweep(spec, default_family(spec), _floats(a.beta_grid), a.models, a.seed, a.tol)
    _emit(sweep_to_csv(rows), a.out)
    for s in summarize_sweep(rows):
        print(
            f"# {s.gate} beta_max={s.beta_max:g} single={s.single_mean:.4f}+-{s.single_std:.4f} eca={s.eca_mean:.4f}+-{s.eca_std:.4f}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_swaptest(a) -> int:
    spec = _spec(a.gate)
    rows = swap_test_study(default_family(spec, reverse_cx=a.reverse_cx), a.beta_max, a.pairs, a.shots, a.seed, a.structures)
    flat = [
        {
            "pair": r.pair,
            "F": r.F,
            "sce_F_hat": r.sce.F_hat,
            "sce_epsilon": r.sce.epsilon,
            "eca_F_hat": r.eca.F_hat,
            "eca_epsilon": r.eca.epsilon,
        }
        for r in rows
    ]
    _emit(_rows_csv(flat), a.out)
    print("# " + json.dumps(summarize_epsilons(rows)), file=sys.stderr)
    return EXIT_OK


def cmd_hubbard(a) -> int:
    fam = default_family(TOFFOLI_ALL, reverse_cx=a.reverse_cx)
    rows = hubbard_study(fam, _grid(a.u_grid), a.beta_max, range(a.models), a.shots, a.trials, a.seed)
    _emit(_rows_csv([asdict(r) for r in rows]), a.out)
    return EXIT_OK


def cmd_verify_counts(a) -> int:
    ok = True
    for spec in ALL_SPECS:
        c = seed_circuit(spec)
        m = metrics(c)
        good = m.cnot_count == CNOT_BUDGET[spec] and implements(c, spec)
        if spec is FREDKIN_ALL:
            good = good and m.depth == 13
        ok &= good
        print(f"{spec.key:24s} cx={m.cnot_count:2d} (expected {CNOT_BUDGET[spec]:2d}) depth={m.depth:2d} {'ok' if good else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_INVALID


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qroute", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="group", required=True)

    fam = sub.add_parser("family", help="generate, load and validate decomposition corpora").add_subparsers(dest="cmd", required=True)
    g = fam.add_parser("gen")
    g.add_argument("--gate", default=FREDKIN_ENDS.key, choices=sorted(SPECS))
    g.add_argument("--reverse-cx", action="store_true", help="also apply the reversed-CNOT identity")
    g.add_argument("--out", required=True, help="corpus directory")
    g.set_defaults(func=cmd_family_gen)
    for name, func in (("load", cmd_family_load), ("validate", cmd_family_validate)):
        x = fam.add_parser(name)
        x.add_argument("directory")
        x.add_argument("--allow-plus-one", action="store_true", help="accept one CNOT above the optimum")
        x.set_defaults(func=func)

    rt = sub.add_parser("route", help="connectivity-aware constructions").add_subparsers(dest="cmd", required=True)
    x = rt.add_parser("longcnot")
    x.add_argument("--idle", type=int, required=True, help="idle wires between control and target")
    x.add_argument("--method", default="cnot_swap", choices=[m.value for m in route.LongRangeMethod])
    x.set_defaults(func=cmd_route_longcnot)
    x = rt.add_parser("toffoli")
    x.add_argument("--line", type=int, required=True)
    x.add_argument("--controls", required=True, help="two comma-separated positions")
    x.add_argument("--target", type=int, required=True)
    x.set_defaults(func=cmd_route_toffoli)
    x = rt.add_parser("fredkin")
    x.add_argument("--line", type=int, required=True)
    x.add_argument("--control", type=int, required=True)
    x.add_argument("--targets", required=True, help="two comma-separated positions")
    x.add_argument("--strategy", default="control_only", choices=[s.value for s in route.RerouteStrategy])
    x.set_defaults(func=cmd_route_fredkin)
    x = rt.add_parser("fanout")
    x.add_argument("--line", type=int, required=True)
    x.add_argument("--control", type=int, required=True)
    x.add_argument("--targets", required=True)
    x.add_argument("--pipelined", action="store_true")
    x.set_defaults(func=cmd_route_fanout)
    x = rt.add_parser("pauliexp")
    x.add_argument("--pauli", required=True, help="Pauli string, one letter per qubit")
    x.add_argument("--theta", type=float, default=0.1)
    x.add_argument("--coupling", default="line:5")
    x.add_argument("--method", default="cnot_swap", choices=[m.value for m in route.PauliMethod])
    x.set_defaults(func=cmd_route_pauliexp)
    for parser in rt.choices.values():
        parser.add_argument("--out", help="write the circuit as QASM")

    sw = sub.add_parser("sweep", help="diamond-distance sweeps").add_subparsers(dest="cmd", required=True)
    x = sw.add_parser("eca-gap")
    x.add_argument("--gates", default=f"{TOFFOLI_ALL.key},{FREDKIN_ALL.key}")
    x.add_argument("--beta-grid", default="0,0.1,0.2,0.3")
    x.add_argument("--models", type=int, default=20)
    x.add_argument("--tol", type=float, default=1e-6)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", help="CSV path (stdout when omitted)")
    x.set_defaults(func=cmd_sweep)

    ex = sub.add_parser("exp", help="simulated experiments").add_subparsers(dest="cmd", required=True)
    x = ex.add_parser("swaptest")
    x.add_argument("--gate", default=FREDKIN_ENDS.key, choices=[k for k in SPECS if k.startswith("fredkin")])
    x.add_argument("--beta-max", type=float, default=0.1)
    x.add_argument("--pairs", type=int, default=200)
    x.add_argument("--shots", type=int, default=980_000)
    x.add_argument("--structures", type=int, default=8)
    x.add_argument("--reverse-cx", action="store_true")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out")
    x.set_defaults(func=cmd_swaptest)
    x = ex.add_parser("hubbard")
    x.add_argument("--u-grid", default="0:10", help="U/t values, 'lo:hi[:step]' or comma list")
    x.add_argument("--beta-max", type=float, default=0.04)
    x.add_argument("--models", type=int, default=5, help="number of sampled noise models")
    x.add_argument("--shots", type=int, default=3000, help="shots per trial, split over X/Y/Z")
    x.add_argument("--trials", type=int, default=100)
    x.add_argument("--reverse-cx", action="store_true")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out")
    x.set_defaults(func=cmd_hubbard)

    vf = sub.add_parser("verify", help="self checks").add_subparsers(dest="cmd", required=True)
    x = vf.add_parser("counts")
    x.set_defaults(func=cmd_verify_counts)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SolverDidNotConverge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, QrouteError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
