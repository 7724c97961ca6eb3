"""``bpri`` command line: one subcommand per experiment, artifacts written atomically.

Exit codes: 0 success, 1 a solver stopped without meeting its tolerance
(artifacts are still written), 2 bad flags, config or input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import checks, choice, gaussian
from .ba import ba_solve, solve_capacity, trace_frontier
from .dynamic import PLAN_COLUMNS, FiniteMdp, soft_bellman_finite, soft_value_iteration
from .errors import BpriError, ConvergenceWarning
from .fixtures import MDP_FIXTURES, PROBLEM_FIXTURES
from .gibbs import price_to_lambda
from .io import fmt, write_csv, write_json
from .prob import LossMatrix, to_bits
from .sba import NoiseModel, StepSchedule, reference_marginal, sba_run

log = logging.getLogger("bpri")

OUTPUT_ENV = "BPRI_OUTPUT_DIR"


class ConfigError(Exception):
    pass


def parse_grid(spec) -> np.ndarray:
    """``a:b:step`` (inclusive), ``lin:a:b:n``, ``log:a:b:n`` or ``x,y,z``."""
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    s = str(spec).strip()
    try:
        if s.startswith(("lin:", "log:")):
            kind, a, b, n = s.split(":")
            make = np.linspace if kind == "lin" else np.geomspace
            return make(float(a), float(b), int(n))
        if ":" in s:
            a, b, step = (float(x) for x in s.split(":"))
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return np.round(a + step * np.arange(n), 12)
        return np.array([float(x) for x in s.split(",")])
    except ValueError as e:
        raise ConfigError(f"bad grid {spec!r}: {e}") from None


def _matrix(spec, name):
    """A JSON matrix/number or a bare number."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{name}: not a number or JSON matrix: {spec!r}") from e
    return np.atleast_2d(np.asarray(spec, dtype=float))


# --- argument parsing -------------------------------------------------------

def _price_group(p):
    # exactly-one is enforced after --config is merged, see _lam
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="inverse information price")
    g.add_argument("--price", type=float, help="information price 1/lambda")


def _problem_args(p, default_fixture=None):
    p.add_argument("--fixture", choices=sorted(PROBLEM_FIXTURES))
    p.add_argument("--problem", help="JSON file with prior and loss (or utility)")
    p.set_defaults(_default_fixture=default_fixture)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpri", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file whose keys override flags")
        p.add_argument("--out", help=f"output file (default: ${OUTPUT_ENV} or cwd)")
        p.add_argument("--bits", action="store_true", help="report information in bits")
        p.set_defaults(_parser=p)
        return p

    p = add("solve", "Gibbs fixed point at one price")
    _problem_args(p)
    _price_group(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100_000)

    p = add("capacity", "price that meets an information budget")
    _problem_args(p)
    p.add_argument("--kappa", type=float, help="information budget in nats")
    p.add_argument("--tol-kappa", type=float, default=1e-8)

    p = add("frontier", "loss/information frontier over a lambda grid")
    _problem_args(p)
    p.add_argument("--grid", help="lambda grid")
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("sba", "stochastic Blahut-Arimoto run")
    _problem_args(p, default_fixture="sba-3x3")
    _price_group(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.0, help="gaussian loss noise sd")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=10.0)
    p.add_argument("--batch", type=int, default=1)

    p = add("mnl-mc", "Monte Carlo curvature table")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--b", type=int, default=4000)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", default="0.3:2.5:0.2")

    p = add("tri-choice", "curvature and Fisher information on (theta, 0, -theta)")
    p.add_argument("--theta-grid", default="lin:-4:4:81")
    p.add_argument("--grid", default="0.5,1,2")

    p = add("stein", "Stein shrinkage risk curve")
    p.add_argument("--theta", help="comma-separated mean vector")
    p.add_argument("--p", type=int, default=10, help="dimension of the default sparse mean")
    p.add_argument("--tau2", type=float, default=gaussian.DEFAULT_TAU2)
    p.add_argument("--grid", default="log:0.001:1000:40")

    p = add("stein-highdim", "lambda*, shrinkage and James-Stein risk across dimensions")
    p.add_argument("--p-grid", default="3,5,10,20,50,100")
    p.add_argument("--tau2", type=float, default=gaussian.DEFAULT_TAU2)
    p.add_argument("--reps", type=int, default=20_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--curves", help="also write (p, lambda, risk) curves here")

    p = add("lqg", "Gaussian gain, both MI forms and the discretized oracle")
    p.add_argument("--sigma-x", default="1", help="state covariance (number or JSON matrix)")
    p.add_argument("--q", default="1", help="loss weight (number or JSON matrix)")
    _price_group(p)
    p.add_argument("--gamma", type=float, default=1.0, help="scalar attention: loss scale")
    p.add_argument("--a-coef", type=float, default=1.0, help="scalar attention: action coefficient")

    p = add("bellman", "soft Bellman plan for a finite MDP")
    p.add_argument("--mdp", help="MDP JSON file")
    p.add_argument("--mdp-fixture", choices=sorted(MDP_FIXTURES), default=None)
    _price_group(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--stationary", action="store_true", help="discounted stationary plan")
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("selftest", "property suite (or every acceptance check with --full)")
    p.add_argument("--full", action="store_true")
    return ap


_JSON_TYPES = {int: "integer", float: "number", str: "string"}


def _schema(parser: argparse.ArgumentParser) -> dict:
    """JSON schema for a subcommand's config file, derived from its flags."""
    props = {}
    for a in parser._actions:
        if a.dest in ("help", "config") or a.dest.startswith("_"):
            continue
        if a.nargs == 0:
            t = {"type": "boolean"}
        elif a.dest in ("problem", "mdp"):
            t = {"type": ["string", "object"]}
        elif a.type is None:
            # free-form flags (grids, matrices) also accept JSON arrays
            t = {"type": ["string", "number", "array"]}
        else:
            t = {"type": _JSON_TYPES[a.type]}
        if a.choices:
            t["enum"] = list(a.choices)
        props["lambda" if a.dest == "lam" else a.dest] = t
    return {"type": "object", "properties": props, "additionalProperties": False}


def _apply_config(args, parser):
    path = Path(args.config)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if isinstance(doc, dict):
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
    errors = sorted(jsonschema.Draft7Validator(_schema(parser)).iter_errors(doc), key=str)
    if errors:
        msgs = [f"config.{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("; ".join(msgs))
    for k, v in doc.items():
        setattr(args, "lam" if k == "lambda" else k, v)


# --- helpers ----------------------------------------------------------------

def _lam(args) -> float:
    lam, price = getattr(args, "lam", None), getattr(args, "price", None)
    if (lam is None) == (price is None):
        raise ConfigError("give exactly one of --lambda or --price")
    return float(lam) if lam is not None else price_to_lambda(price)


def _problem(args):
    if args.problem is not None and args.fixture is not None:
        raise ConfigError("give either --problem or --fixture, not both")
    if args.problem is not None:
        doc = args.problem
        if isinstance(doc, str):
            try:
                doc = json.loads(Path(doc).read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read problem {args.problem}: {e}") from None
        if "prior" not in doc or ("loss" in doc) == ("utility" in doc):
            raise ConfigError("problem needs 'prior' and exactly one of 'loss' or 'utility'")
        loss = doc["loss"] if "loss" in doc else LossMatrix.from_utility(doc["utility"])
        return np.asarray(doc["prior"], dtype=float), loss
    name = args.fixture or args._default_fixture
    if name is None:
        raise ConfigError("give --problem or --fixture")
    return PROBLEM_FIXTURES[name]()


def _out(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _info(x, bits: bool) -> str:
    return f"I={fmt(to_bits(x))} bits" if bits else f"I={fmt(x)} nats"


# --- subcommands ------------------------------------------------------------

def cmd_solve(args):
    prior, loss = _problem(args)
    sol = ba_solve(prior, loss, _lam(args), tol=args.tol, max_iter=args.max_iter)
    path = write_json(_out(args, "solution.json"), sol.to_dict())
    print(f"solve: objective={fmt(sol.objective_value)} {_info(sol.mutual_info, args.bits)} "
          f"iterations={sol.iterations} -> {path}")
    return sol.converged


def cmd_capacity(args):
    if args.kappa is None:
        raise ConfigError("capacity needs --kappa")
    prior, loss = _problem(args)
    res = solve_capacity(prior, loss, args.kappa, tol_kappa=args.tol_kappa)
    doc = {"kappa": res.kappa, "lambda": res.lam, "mutual_info_nats": res.mutual_info,
           "expected_loss": res.expected_loss, "kink": res.kink, "alpha": res.alpha,
           "corner": res.corner, "grid_fallback": res.grid_fallback,
           "evaluations": res.evaluations, "solution": res.solution.to_dict()}
    if res.kink:
        doc["low"], doc["high"] = res.low.to_dict(), res.high.to_dict()
    path = write_json(_out(args, "capacity.json"), doc)
    print(f"capacity: lambda={fmt(res.lam)} expected_loss={fmt(res.expected_loss)} "
          f"{_info(res.mutual_info, args.bits)} evaluations={res.evaluations} -> {path}")
    return res.solution.converged


def cmd_frontier(args):
    if args.grid is None:
        raise ConfigError("frontier needs --grid")
    prior, loss = _problem(args)
    pts = trace_frontier(prior, loss, parse_grid(args.grid), tol=args.tol)
    path = write_csv(_out(args, "frontier.csv"), ("lambda", "kappa_nats", "expected_loss"),
                     ((p.lam, p.kappa, p.expected_loss) for p in pts))
    top = pts[-1]
    print(f"frontier: {len(pts)} points, max {_info(top.kappa, args.bits)} "
          f"min expected_loss={fmt(top.expected_loss)} -> {path}")
    return True


def cmd_sba(args):
    if args.seed is None:
        raise ConfigError("sba needs --seed")
    prior, loss = _problem(args)
    lam = _lam(args)
    ref = reference_marginal(prior, loss, lam)
    noise = NoiseModel("gaussian", args.sigma) if args.sigma > 0 else NoiseModel()
    traj = sba_run(prior, loss, lam, StepSchedule(args.a, args.b), noise, seed=args.seed,
                   T=args.steps, log_stride=args.stride, reference=ref, batch=args.batch)
    path = write_csv(_out(args, "sba.csv"), ("t", "eta_t", "kl_to_ref", "sampled_state"),
                     traj.csv_rows())
    last = traj.kl_series[-1] if traj.kl_series.size else float("nan")
    print(f"sba: steps={args.steps} final_kl={fmt(last)} clamps={traj.clamp_events} -> {path}")
    return True


def cmd_mnl_mc(args):
    if args.seed is None:
        raise ConfigError("mnl-mc needs --seed")
    rows = choice.mc_curvature(args.k, parse_grid(args.grid), args.b, args.seed)
    path = write_csv(_out(args, "mnl_mc.csv"), choice.CURVATURE_COLUMNS, (r.as_tuple() for r in rows))
    best = max(rows, key=lambda r: r.mean)
    print(f"mnl-mc: {len(rows)} rows, peak mean={fmt(best.mean)} at lambda={fmt(best.lam)} -> {path}")
    return True


def cmd_tri_choice(args):
    thetas, lams = parse_grid(args.theta_grid), parse_grid(args.grid)
    rows = [(th, lam, choice.tri_choice_curvature(th, lam), choice.mnl_fisher_info(th, lam))
            for lam in lams for th in thetas]
    path = write_csv(_out(args, "tri_choice.csv"), ("theta", "lambda", "curvature", "fisher_info"), rows)
    print(f"tri-choice: {len(rows)} rows -> {path}")
    return True


def cmd_stein(args):
    theta = (np.array([float(x) for x in args.theta.split(",")]) if args.theta
             else gaussian.sparse_theta(args.p))
    grid = parse_grid(args.grid)
    rows = [(lam, gaussian.stein_shrinkage_factor(lam, args.tau2),
             gaussian.stein_risk(lam, theta, args.tau2)) for lam in grid]
    lam_star, risk = gaussian.stein_lambda_star(theta, args.tau2, grid)
    path = write_csv(_out(args, "stein.csv"), ("lambda", "shrinkage", "risk"), rows)
    print(f"stein: p={theta.size} lambda_star={fmt(lam_star)} risk={fmt(risk)} -> {path}")
    return True


def cmd_stein_highdim(args):
    if args.seed is None:
        raise ConfigError("stein-highdim needs --seed")
    ps = [int(p) for p in parse_grid(args.p_grid)]
    rows = gaussian.stein_highdim_table(ps, args.tau2, args.reps, args.seed)
    path = write_csv(_out(args, "stein_highdim.csv"), gaussian.STEIN_HIGHDIM_COLUMNS, rows)
    if args.curves:
        write_csv(args.curves, ("p", "lambda", "risk"), gaussian.stein_risk_curves(ps, tau2=args.tau2))
    print(f"stein-highdim: {len(rows)} dimensions, lambda_star "
          f"{fmt(rows[0][1])} -> {fmt(rows[-1][1])} -> {path}")
    return True


def cmd_lqg(args):
    lam = _lam(args)
    sx, q = _matrix(args.sigma_x, "sigma_x"), _matrix(args.q, "q")
    k, se = gaussian.lqg_gain(sx, q, lam)
    mi = gaussian.lqg_mutual_info(sx, q, lam)
    doc = {"lambda": lam, "gain": k, "noise_cov": se,
           "expected_loss": gaussian.lqg_expected_loss(sx, q, lam),
           "mi_detform": mi.detform, "mi_ratio": mi.ratio,
           "mi_discrepancy": mi.discrepancy, "mi_forms_inconsistent": mi.inconsistent}
    if sx.shape == (1, 1):
        weight = args.gamma * args.a_coef**2
        arb = gaussian.lqg_arbitrate(sx[0, 0], q[0, 0] * weight, lam)
        att = gaussian.lqg_scalar_posterior_var(sx[0, 0], args.gamma * q[0, 0], args.a_coef, lam)
        doc["oracle"] = {"mi": arb.oracle_mi, "expected_loss": arb.oracle_loss,
                         "closed_form_mi": arb.closed_form_mi,
                         "closed_form_loss": arb.closed_form_loss, "agrees_with": arb.matches()}
        doc["attention"] = {"posterior_var": att.variance, "objective": att.value,
                            "displayed_posterior_var": att.displayed_variance,
                            "displayed_objective": att.displayed_value, "forms_agree": att.agree}
    path = write_json(_out(args, "lqg.json"), doc)
    flag = " MI-FORMS-DISAGREE" if mi.inconsistent else ""
    print(f"lqg: expected_loss={fmt(doc['expected_loss'])} detform={fmt(mi.detform)} "
          f"ratio={fmt(mi.ratio)}{flag} -> {path}")
    return True


def cmd_bellman(args):
    if (args.mdp is None) == (args.mdp_fixture is None):
        raise ConfigError("give exactly one of --mdp or --mdp-fixture")
    if args.mdp_fixture:
        mdp = MDP_FIXTURES[args.mdp_fixture]()
    elif isinstance(args.mdp, dict):
        mdp = FiniteMdp.from_dict(args.mdp)
    else:
        try:
            mdp = FiniteMdp.from_json(args.mdp)
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"cannot read MDP {args.mdp}: {e}") from None
    lam = _lam(args)
    if args.stationary:
        plan = soft_value_iteration(mdp, lam)
        rows = ((0, s, a, plan.policy[s, a], plan.q_values[s, a], plan.values[s])
                for s in range(mdp.n_states) for a in range(mdp.n_actions))
        ok, summary = plan.converged, f"iterations={plan.iterations}"
    else:
        plan = soft_bellman_finite(mdp, lam, horizon=args.horizon, tol=args.tol)
        rows = plan.csv_rows()
        ok = plan.converged
        summary = (f"objective={fmt(plan.total_objective)} "
                   f"{_info(float(plan.mutual_info.sum()), args.bits)} passes={plan.outer_iterations}")
    path = write_csv(_out(args, "plan.csv"), PLAN_COLUMNS, rows)
    print(f"bellman: {summary} -> {path}")
    return ok


def cmd_selftest(args):
    results = checks.run_all(quick=not args.full)
    for r in results:
        print(r.line())
    return all(r.passed for r in results)


COMMANDS = {
    "solve": cmd_solve, "capacity": cmd_capacity, "frontier": cmd_frontier, "sba": cmd_sba,
    "mnl-mc": cmd_mnl_mc, "tri-choice": cmd_tri_choice, "stein": cmd_stein,
    "stein-highdim": cmd_stein_highdim, "lqg": cmd_lqg, "bellman": cmd_bellman,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            _apply_config(args, args._parser)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            ok = COMMANDS[args.command](args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except (ConfigError, BpriError, ValueError) as e:
        print(f"bpri {args.command}: error: {e}", file=sys.stderr)
        return 2
    stalled = any(issubclass(w.category, ConvergenceWarning) for w in caught)
    return 0 if ok and not stalled else 1


if __name__ == "__main__":
    sys.exit(main())
