"""Command-line front end.

Exit codes: 0 success (or ``Equivalent``), 1 ``Inequivalent`` or an
insufficient map, 2 parse or parameter errors, 3 a non-faithful experiment
without ``--auto-restrict``, 4 an inconclusive verdict, 5 label mismatch.
Channel files describe the trace-preserving map on states.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import LabelMismatch, NotFaithful, ParseError, QsuffError, SingularState, UnsupportedParameters
from .linalg import matrix_to_json, random_density
from .policy import NumericPolicy, using_policy
from .superop import superop_from_json
from .suffstats import (
    StatisticalExperiment,
    minimal_jstar,
    np_breakpoints,
    np_tests,
    restrict_to_support,
    symmetry_report,
)

EXIT_OK, EXIT_NO, EXIT_PARSE, EXIT_NOT_FAITHFUL, EXIT_INCONCLUSIVE, EXIT_LABELS = 0, 1, 2, 3, 4, 5


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _clean(obj):
    """Replace infinities by strings so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def dumps(obj) -> str:
    """Deterministic JSON rendering used for every command."""
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_default))), sort_keys=True, indent=2)


def _emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(dumps(report) + "\n")
        return
    for key in sorted(report):
        val = report[key]
        if isinstance(val, (dict, list)):
            val = json.dumps(_clean(json.loads(json.dumps(val, default=_default))), sort_keys=True)
        sys.stdout.write(f"{key}: {val}\n")


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _Fail(EXIT_PARSE, f"cannot read {path}: {exc}") from exc


def load_experiment(path: str) -> StatisticalExperiment:
    try:
        return StatisticalExperiment.from_json(_read_json(path))
    except ParseError as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from exc


def _faithful(e: StatisticalExperiment, auto: bool) -> tuple[StatisticalExperiment, bool]:
    if e.faithful:
        return e, False
    if not auto:
        raise _Fail(EXIT_NOT_FAITHFUL, "average state is not faithful; use --auto-restrict")
    return restrict_to_support(e)[0], True


def _pair(e: StatisticalExperiment, labels) -> tuple[np.ndarray, np.ndarray]:
    if labels is None:
        if len(e) != 2:
            raise _Fail(EXIT_PARSE, "--pair is required for experiments with more than two states")
        labels = e.labels
    if any(l not in e.labels for l in labels):
        raise _Fail(EXIT_LABELS, f"unknown labels {labels}")
    return e[labels[0]], e[labels[1]]


# commands -------------------------------------------------------------------

def run_analyze(args) -> tuple[dict, int]:
    e, restricted = _faithful(load_experiment(args.input), args.auto_restrict)
    an = minimal_jstar(e)
    report = {"dim": e.dim_H, "labels": list(e.labels), "restricted": restricted}
    report.update(an.to_json())
    if len(e) == 2:
        report["symmetry"] = symmetry_report(*e.states).to_json()
    return report, EXIT_OK


def run_np_tests(args) -> tuple[dict, int]:
    e, _ = _faithful(load_experiment(args.input), args.auto_restrict)
    rho, sigma = _pair(e, args.pair)
    from .divergences import hockey_stick

    tests = np_tests(rho, sigma)
    return {
        "breakpoints": [float(b) for b in np_breakpoints(rho, sigma)],
        "tests": [{"t": t, "rank": int(round(np.trace(p).real)), "projector": matrix_to_json(p),
                   "hockey_stick": hockey_stick(rho, sigma, t)} for t, p in tests],
    }, EXIT_OK


def _spec(args):
    from .divergences import DivergenceSpec

    fam = args.family
    if fam == "hockey-stick":
        if args.t is None:
            raise _Fail(EXIT_PARSE, "--t is required for hockey-stick")
        return DivergenceSpec.hockey_stick(args.t)
    if fam == "relative-entropy":
        return DivergenceSpec.relative_entropy()
    if fam == "frenkel":
        return DivergenceSpec.frenkel()
    if fam.startswith("f:"):
        try:
            return DivergenceSpec.f_div(fam[2:])
        except KeyError as exc:
            raise _Fail(EXIT_PARSE, f"unknown f-divergence {fam[2:]}") from exc
    if fam == "alpha-z":
        if args.alpha is None or args.z is None:
            raise _Fail(EXIT_PARSE, "--alpha and --z are required for alpha-z")
        return DivergenceSpec.alpha_z(args.alpha, args.z)
    raise _Fail(EXIT_PARSE, f"unknown family {fam}")


def _load_channel(path: str):
    try:
        return superop_from_json(_read_json(path))
    except ParseError as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from exc


def run_divergence(args) -> tuple[dict, int]:
    from .divergences import dpi_harness

    e = load_experiment(args.input)
    rho, sigma = _pair(e, args.pair)
    spec = _spec(args)
    if args.channel is None:
        return {"divergence": spec.to_json(), "value": spec.evaluate(rho, sigma)}, EXIT_OK
    ch = _load_channel(args.channel)
    rep = dpi_harness(ch.dual(), rho, sigma, spec)
    code = EXIT_INCONCLUSIVE if rep.equal_within_tol is None else EXIT_OK
    return rep.to_json(), code


def run_recovery(args) -> tuple[dict, int]:
    from .channels import sufficiency_check

    e = load_experiment(args.input)
    rho, sigma = _pair(e, args.pair)
    ch = _load_channel(args.channel)
    v = sufficiency_check(ch.dual(), rho, sigma)
    code = {True: EXIT_OK, False: EXIT_NO, None: EXIT_INCONCLUSIVE}[v.sufficient]
    out = v.to_json()
    if v.sufficient:
        out["certificate"] = v.certificate.to_json()
    return out, code


def run_equivalence(args) -> tuple[dict, int]:
    from .equivalence import EQUIVALENT, INEQUIVALENT, decide_ptp_equivalence

    e1, e2 = load_experiment(args.first), load_experiment(args.second)
    try:
        v = decide_ptp_equivalence(e1, e2, seed=args.seed, word_bound=args.word_bound)
    except LabelMismatch as exc:
        raise _Fail(EXIT_LABELS, str(exc)) from exc
    code = {EQUIVALENT: EXIT_OK, INEQUIVALENT: EXIT_NO}.get(v.status, EXIT_INCONCLUSIVE)
    return v.to_json(include_maps=not args.no_maps), code


def generate_random(dim: int, states: int, seed: int, symmetric: bool = False,
                    rank: int | None = None) -> StatisticalExperiment:
    """Seeded experiment of normalized Wishart states."""
    if dim < 1 or states < 1:
        raise _Fail(EXIT_PARSE, "--dim and --states must be positive")
    if rank is not None and not 1 <= rank <= dim:
        raise _Fail(EXIT_PARSE, "--rank must lie in [1, dim]")
    rng = np.random.default_rng(seed)
    mats = [random_density(dim, rng, rank=rank, real=symmetric) for _ in range(states)]
    return StatisticalExperiment.from_states(mats)


def run_random(args) -> tuple[dict, int]:
    e = generate_random(args.dim, args.states, args.seed, args.symmetric, args.rank)
    return e.to_json(), EXIT_OK


# parser ---------------------------------------------------------------------

_FLOAT_FIELDS = [f.name for f in dataclasses.fields(NumericPolicy) if f.type in (float, "float")]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--auto-restrict", action="store_true",
                        help="compress to the support of the average state")
    common.add_argument("--quad-points", type=int, default=None)
    common.add_argument("--word-bound", type=int, default=20000,
                        help="largest number of words enumerated by the trace screen")
    for name in _FLOAT_FIELDS:
        common.add_argument(f"--tol-{name.replace('_', '-')}", type=float, default=None,
                            dest=f"tol_{name}", metavar="X")

    p = argparse.ArgumentParser(prog="qsuff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="minimal sufficient algebras")
    a.add_argument("input")
    a.set_defaults(fn=run_analyze)

    n = sub.add_parser("np-tests", parents=[common], help="Neyman-Pearson tests of a pair")
    n.add_argument("input")
    n.add_argument("--pair", nargs=2, metavar=("A", "B"))
    n.set_defaults(fn=run_np_tests)

    d = sub.add_parser("divergence", parents=[common], help="divergence value or DPI report")
    d.add_argument("input")
    d.add_argument("--pair", nargs=2, metavar=("A", "B"))
    d.add_argument("--family", required=True,
                   help="hockey-stick, relative-entropy, frenkel, f:<kl|chi2|tv|hellinger|affine>, alpha-z")
    d.add_argument("--t", type=float)
    d.add_argument("--alpha", type=float)
    d.add_argument("--z", type=float)
    d.add_argument("--channel", help="channel JSON; report before/after values")
    d.set_defaults(fn=run_divergence)

    r = sub.add_parser("recovery", parents=[common], help="sufficiency verdict of a channel")
    r.add_argument("input")
    r.add_argument("--channel", required=True)
    r.add_argument("--pair", nargs=2, metavar=("A", "B"))
    r.set_defaults(fn=run_recovery)

    q = sub.add_parser("equivalence", parents=[common], help="decide PTP-equivalence")
    q.add_argument("first")
    q.add_argument("second")
    q.add_argument("--no-maps", action="store_true", help="omit interconverter matrices")
    q.set_defaults(fn=run_equivalence)

    g = sub.add_parser("random", parents=[common], help="seeded random experiment")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--states", type=int, required=True)
    g.add_argument("--rank", type=int)
    g.add_argument("--symmetric", action="store_true", help="real states")
    g.set_defaults(fn=run_random)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    overrides = {name: getattr(args, f"tol_{name}") for name in _FLOAT_FIELDS
                 if getattr(args, f"tol_{name}") is not None}
    if args.quad_points is not None:
        overrides["quad_points"] = args.quad_points
    try:
        with using_policy(**overrides):
            report, code = args.fn(args)
    except _Fail as exc:
        sys.stderr.write(f"qsuff: {exc}\n")
        return exc.code
    except NotFaithful as exc:
        sys.stderr.write(f"qsuff: {exc}\n")
        return EXIT_NOT_FAITHFUL
    except (SingularState, UnsupportedParameters, ParseError) as exc:
        sys.stderr.write(f"qsuff: {exc}\n")
        return EXIT_PARSE
    except QsuffError as exc:
        sys.stderr.write(f"qsuff: {type(exc).__name__}: {exc}\n")
        return EXIT_INCONCLUSIVE
    _emit(report, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
