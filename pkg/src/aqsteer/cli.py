"""Command-line interface.

Exit codes: 0 success (or a positive verdict), 2 a valid run with a negative
verdict (infeasible, signalling, deviation too large), 1 any error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import io
from .errors import AqsteerError
from .fixtures import FIXTURES, make_fixture
from .ghjw import realize, verify_realization
from .lift import lift
from .moments import compile_bell, compile_epr, maximize_functional, membership, write_sdpa
from .quantum import Assemblage, Correlation, chsh_coefficients, check_nonsignalling, local_bound
from .sdp import SolverOptions
from .tomography import TomographyFrame, default_frame, tomographic_correlation
from .words import DEFAULT_WORD_CAP, Scenario

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2
VERIFY_TOL = 1e-6

log = logging.getLogger("aqsteer")


def _solver_options(args) -> SolverOptions:
    opts = SolverOptions()
    if getattr(args, "tol", None) is not None:
        opts.tol = args.tol
    if getattr(args, "feas_tol", None) is not None:
        opts.feas_tol = args.feas_tol
    if getattr(args, "max_iters", None) is not None:
        opts.max_iters = args.max_iters
    if getattr(args, "verbose", False):
        opts.log_callback = lambda rec: print(
            f"  iter {rec['iter']:3d}  gap {rec['gap']:.2e}  pinf {rec['pinf']:.2e}  dinf {rec['dinf']:.2e}",
            file=sys.stderr)
    return opts


def _frame(spec: str, dim: int) -> TomographyFrame:
    if spec == "pauli":
        return default_frame(dim)
    if spec.startswith("file:"):
        frame = io.load(spec[5:], "frame")
        if frame.dim != dim:
            raise AqsteerError(f"frame dimension {frame.dim} does not match Bob's dimension {dim}")
        return frame
    raise AqsteerError(f"unknown frame {spec!r}; use 'pauli' or 'file:<path>'")


def _problem_for(obj):
    if isinstance(obj, Assemblage):
        return compile_epr(obj)
    if isinstance(obj, Correlation):
        return compile_bell(obj)
    raise AqsteerError("expected an assemblage or a correlation")


def cmd_gen(args) -> int:
    obj = make_fixture(args.fixture, args.seed, args.n_inputs, args.n_outputs, args.bob_dim)
    io.save(obj, args.output)
    print(f"wrote {args.fixture} fixture to {args.output}")
    return EXIT_OK


def cmd_check_ns(args) -> int:
    obj = io.load(args.input, ("assemblage", "correlation"))
    if isinstance(obj, Correlation):
        ns = obj.ns_violation()
        norm = obj.normalization_error()
        neg = max(0.0, -float(obj.p.min()))
        ok = ns <= args.tol and norm <= args.tol and neg <= args.tol
        print(f"{'non-signalling' if ok else 'NOT non-signalling'}: negativity {neg:.3e}, "
              f"ns violation {ns:.3e}, normalisation error {norm:.3e}")
        return EXIT_OK if ok else EXIT_NEGATIVE
    report = check_nonsignalling(obj, args.tol)
    print(report)
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_check_aq(args) -> int:
    obj = io.load(args.input, ("assemblage", "correlation"))
    problem = _problem_for(obj)
    if args.export_sdpa:
        write_sdpa(problem, args.export_sdpa)
    report = membership(problem, _solver_options(args))
    print(report)
    if args.certificate and report.certificate is not None:
        io.save(report.certificate, args.certificate)
    return EXIT_OK if report.feasible else EXIT_NEGATIVE


def cmd_realize(args) -> int:
    a = io.load(args.input, "assemblage")
    r = realize(a)
    dev = verify_realization(r, a)
    io.save(r, args.output)
    print(f"realization with Alice dimension {r.alice_dim}; deviation {dev:.3e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    r = io.load(args.realization, "realization")
    a = io.load(args.assemblage, "assemblage")
    dev = verify_realization(r, a)
    ok = dev <= args.tol
    print(f"deviation {dev:.3e} ({'within' if ok else 'exceeds'} {args.tol:.1e})")
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_tomograph(args) -> int:
    a = io.load(args.input, "assemblage")
    frame = _frame(args.frame, a.dim)
    corr = tomographic_correlation(a, frame)
    io.save(corr, args.output)
    print(f"wrote tomographic correlation ({frame.name}, {frame.n_inputs} settings) to {args.output}")
    return EXIT_OK


def cmd_lift(args) -> int:
    gamma_b = io.load(args.input, "moment-matrix")
    frame = _frame(args.frame, args.bob_dim)
    report = lift(gamma_b, frame)
    io.save(report.gamma, args.output)
    print(report)
    return EXIT_OK if report.psd else EXIT_NEGATIVE


def cmd_maximize(args) -> int:
    if args.functional == "chsh":
        coeffs = chsh_coefficients()
        scenario = Scenario(2, 2, 2)
    else:
        coeffs = np.load(args.functional) if args.functional.endswith(".npy") else np.loadtxt(args.functional)
        n = args.n_parties
        shape = coeffs.shape
        if len(shape) != 2 * n:
            raise AqsteerError(f"coefficient array needs {2 * n} axes (outputs then inputs)")
        scenario = Scenario(n, shape[n:], shape[:n])
    value = maximize_functional(scenario, coeffs, _solver_options(args))
    local = local_bound(coeffs, scenario.outputs, scenario.inputs)
    print(f"almost-quantum maximum {value:.10f}; local maximum {local:.10f}")
    return EXIT_OK


def cmd_export_sdpa(args) -> int:
    obj = io.load(args.input, ("assemblage", "correlation"))
    write_sdpa(_problem_for(obj), args.output)
    print(f"wrote SDPA problem to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqsteer", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true", help="log solver iterations to stderr")
    parser.add_argument("--word-cap", type=int, default=DEFAULT_WORD_CAP, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--tol", type=float, help="solver residual and gap tolerance (default 1e-8)")
        p.add_argument("--feas-tol", type=float, help="membership margin (default 1e-7)")
        p.add_argument("--max-iters", type=int, help="solver iteration cap (default 200)")

    p = sub.add_parser("gen", help="write a fixture")
    p.add_argument("--fixture", choices=FIXTURES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-inputs", type=int, default=3, help="random-ns only")
    p.add_argument("--n-outputs", type=int, default=2, help="random-ns only")
    p.add_argument("--bob-dim", type=int, default=2, help="random-ns only")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check-ns", help="non-signalling check")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_check_ns)

    p = sub.add_parser("check-aq", help="almost-quantum membership")
    p.add_argument("input")
    solver_flags(p)
    p.add_argument("--export-sdpa", metavar="PATH")
    p.add_argument("--certificate", metavar="PATH", help="write the moment-matrix certificate")
    p.set_defaults(func=cmd_check_aq)

    p = sub.add_parser("realize", help="quantum realization of a bipartite assemblage")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("verify", help="compare a realization with an assemblage")
    p.add_argument("realization")
    p.add_argument("assemblage")
    p.add_argument("--tol", type=float, default=VERIFY_TOL)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tomograph", help="tomographic correlation of an assemblage")
    p.add_argument("input")
    p.add_argument("--frame", default="pauli", help="pauli | file:<path>")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_tomograph)

    p = sub.add_parser("lift", help="lift a Bell certificate to an EPR certificate")
    p.add_argument("input")
    p.add_argument("--frame", default="pauli")
    p.add_argument("--bob-dim", type=int, default=2)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("maximize", help="maximise a Bell functional over the almost-quantum set")
    p.add_argument("--functional", default="chsh", help="'chsh' or a .npy/.txt coefficient array")
    p.add_argument("--n-parties", type=int, default=2)
    solver_flags(p)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("export-sdpa", help="write the membership problem in sparse SDPA format")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_sdpa)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AqsteerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
