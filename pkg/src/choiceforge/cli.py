"""Command-line interface: simulate, estimate, analyze, optimize, chain.

Settings come from flags, then the command's section of an INI file given
with ``--config``, then built-in defaults.  The seed falls back to the
``CHOICEFORGE_SEED`` environment variable, then 0.  Exit codes: 0 success,
2 input error, 3 non-convergence, 4 identification, 5 economic validity.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import io
from .analytics import market_potential, price_derivative, purchase_probability, wtp
from .chain import enumerate_paths, explain_effect, fit_chain, composed_utility_map
from .core import AttributeVector, ParameterVector, make_scenario
from .designer import PROFIT, REVENUE, DesignSpace, optimize_design, optimize_price
from .errors import ChoiceForgeError, InputError
from .estimation.latent_class import LatentClassConfig, fit_latent_class
from .estimation.mixed import MixedLogitConfig, fit_mixed_logit
from .estimation.mnl import MnlConfig, fit_mnl
from .synth import SPEC_NAMES, named_spec, generate_dataset

SEED_ENV = "CHOICEFORGE_SEED"


def _bounds_pair(text):
    try:
        lo, hi = (float(v) for v in str(text).replace(",", ":").split(":"))
    except ValueError:
        raise InputError(f"expected 'lower:upper', got '{text}'") from None
    return lo, hi


def _assignments(text, convert):
    """Parse ``name=value`` items separated by commas or whitespace."""
    out = {}
    for item in str(text).replace(",", " ").split():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise InputError(f"expected 'name=value', got '{item}'")
        out[name] = convert(value)
    return out


def _positive_int(text):
    try:
        return int(text)
    except ValueError:
        raise InputError(f"'{text}' is not an integer") from None


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise InputError(f"'{text}' is not a number") from None


# per command: key -> (default, converter from config-file text)
SETTINGS = {
    "simulate": {
        "spec": (None, str), "n": (None, _positive_int), "seed": (None, _positive_int),
        "levels": (None, _positive_int), "data": ("choices.csv", str), "truth": ("truth.json", str),
    },
    "estimate": {
        "data": (None, str), "model": ("mnl", str), "classes": (2, _positive_int),
        "draws": (200, _positive_int), "random": ("price", str), "max_iter": (500, _positive_int),
        "starts": (5, _positive_int), "seed": (None, _positive_int), "out": ("estimate", str),
    },
    "analyze": {
        "report": (None, str), "population": (1000000.0, _float), "price": (None, _float),
        "out": ("analysis", str),
    },
    "optimize": {
        "report": (None, str), "price_bounds": (None, str), "bound": ("", str), "cost": ("", str),
        "base_cost": (0.0, _float), "objective": (REVENUE, str), "grid_size": (1000, _positive_int),
        "starts": (8, _positive_int), "seed": (None, _positive_int), "class_index": (0, _positive_int),
        "out": ("design", str), "curve": ("curve.csv", str),
    },
    "chain": {"data": (None, str), "out": ("chain", str)},
}


def read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if not os.path.isfile(path):
        raise InputError(f"config file '{path}' not found")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise InputError(f"cannot parse config '{path}': {exc}") from None
    for section in parser.sections():
        if section not in SETTINGS:
            raise InputError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key.replace("-", "_") not in SETTINGS[section]:
                raise InputError(f"unknown key '{key}' in config section [{section}]")
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags, config file and defaults for ``command``."""
    file_values = {}
    if args.config:
        parser = read_config(args.config)
        if parser.has_section(command):
            file_values = {k.replace("-", "_"): v for k, v in parser[command].items()}
    out = {}
    for key, (default, convert) in SETTINGS[command].items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_values:
            out[key] = convert(file_values[key])
        else:
            out[key] = default
    if "seed" in out and out["seed"] is None:
        env = os.environ.get(SEED_ENV)
        out["seed"] = _positive_int(env) if env not in (None, "") else 0
    for key in ("seed", "n", "levels", "classes", "draws", "max_iter", "starts", "grid_size", "class_index"):
        if out.get(key) is not None and out[key] < 0:
            raise InputError(f"'{key}' must be non-negative")
    return out


def _require(cfg, key, flag):
    if cfg[key] is None:
        raise InputError(f"missing required setting '{flag}'")
    return cfg[key]


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if not np.isfinite(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# --- commands -----------------------------------------------------------------

def cmd_simulate(cfg) -> int:
    name = _require(cfg, "spec", "--spec")
    overrides = {"seed": cfg["seed"]}
    if cfg["n"] is not None:
        overrides["population_size"] = cfg["n"]
    if cfg["levels"] is not None:
        overrides["levels_per_attribute"] = cfg["levels"]
    spec = named_spec(name, **overrides)
    data = generate_dataset(spec)
    io.write_dataset(data, cfg["data"])
    io.write_json(cfg["truth"], _jsonable(spec.to_dict()))
    return 0


def _reference_levels(data):
    offered = data.attributes.reshape(-1, len(data.schema))
    return {n: float(v) for n, v in zip(data.schema.names, offered.mean(axis=0))}


def _attribute_ranges(data):
    offered = data.attributes.reshape(-1, len(data.schema))
    return {n: [float(lo), float(hi)] for n, lo, hi in
            zip(data.schema.names, offered.min(axis=0), offered.max(axis=0))}


def _se_map(names, se):
    return {n: float(s) for n, s in zip(names, se)}


def estimation_payload(model, result, data) -> dict:
    """Structured report of any estimator's result."""
    payload = {"model": model, "attributes": list(data.schema.names),
               "n_observations": len(data), "n_alternatives": data.n_alternatives,
               "outside_option": data.outside_option}
    if model == "lcm":
        classes = []
        for p, share, se in zip(result.class_params, result.class_shares, result.standard_errors):
            names = list(p.schema.names) + [f"asc_{j}" for j in range(1, data.n_alternatives)]
            classes.append({"share": float(share), **io.params_to_dict(p),
                            "standard_errors": _se_map(names, se)})
        payload.update(classes=classes, log_likelihood=result.log_likelihood,
                       converged=result.converged, iterations=result.iterations,
                       warnings=list(result.warnings))
    else:
        payload.update(io.params_to_dict(result.params))
        payload["standard_errors"] = _se_map(result.names, result.standard_errors)
        if model == "mixed":
            payload["stddev"] = {r: float(result.stddev_betas[data.schema.index(r)])
                                 for r in result.random_coefficients}
            payload["draws_per_observation"] = result.draws_per_observation
            payload["log_likelihood"] = result.simulated_log_likelihood
        else:
            payload["log_likelihood"] = result.log_likelihood_at_optimum
        payload.update(converged=result.converged, iterations=result.iterations,
                       gradient_norm=result.gradient_norm)
    payload["reference_levels"] = _reference_levels(data)
    payload["attribute_ranges"] = _attribute_ranges(data)
    return _jsonable(payload)


def cmd_estimate(cfg) -> int:
    data = io.read_dataset(_require(cfg, "data", "--data"))
    model = cfg["model"]
    if model == "mnl":
        result = fit_mnl(data, MnlConfig(max_iterations=cfg["max_iter"]))
        text = result.summary()
    elif model == "lcm":
        lc = LatentClassConfig(max_iterations=max(cfg["max_iter"], 1), n_starts=cfg["starts"], seed=cfg["seed"])
        result = fit_latent_class(data, cfg["classes"], lc)
        text = result.summary()
    elif model == "mixed":
        random = tuple(r for r in cfg["random"].replace(",", " ").split())
        mc = MixedLogitConfig(max_iterations=cfg["max_iter"], seed=cfg["seed"])
        result = fit_mixed_logit(data, random, cfg["draws"], mc)
        text = result.summary()
    else:
        raise InputError(f"unknown model '{model}'; choose mnl, lcm or mixed")
    io.write_report(cfg["out"], estimation_payload(model, result, data), text.splitlines())
    if not result.converged:
        print(f"warning: {model} estimation did not converge", file=sys.stderr)
        return 3
    return 0


def _parameter_sets(report) -> list[tuple[str, ParameterVector]]:
    attrs = report.get("attributes")
    if report.get("model") == "lcm":
        return [(f"class{c}", io.params_from_dict(cl, attrs)) for c, cl in enumerate(report["classes"])]
    return [("", io.params_from_dict(report, attrs))]


def _reference_offer(report, params: ParameterVector, price=None) -> AttributeVector:
    try:
        ref = report["reference_levels"]
        values = [float(ref[n]) for n in params.schema.names]
    except (KeyError, TypeError, ValueError):
        raise InputError("report has no usable reference_levels") from None
    offer = AttributeVector(values, params.schema)
    return offer if price is None else offer.with_price(price)


def analysis_payload(report, population, price=None) -> dict:
    """WTP, price derivative and market potential for every parameter set in ``report``.

    The reference scenario offers one alternative at the report's reference
    levels against the no-purchase option.
    """
    sections = []
    for label, params in _parameter_sets(report):
        # the reference offer is a generic alternative: first constant only
        params = params.with_constants(1)
        offer = _reference_offer(report, params, price)
        scenario = make_scenario(params.schema, [offer.values], outside_option=True)
        w = wtp(params)
        sections.append({
            "label": label,
            "wtp": w.per_attribute_wtp,
            "price_coefficient": w.price_coefficient,
            "reference_levels": dict(zip(params.schema.names, offer.values.tolist())),
            "purchase_probability": purchase_probability(params, scenario),
            "price_derivative": price_derivative(params, scenario, 0),
            "market_potential": market_potential(params, scenario, population),
        })
    return _jsonable({"model": report.get("model"), "population": population, "results": sections})


def analysis_lines(payload) -> list[str]:
    lines = [f"model: {payload['model']}", f"population = {payload['population']!r}"]
    for sec in payload["results"]:
        prefix = f"{sec['label']}." if sec["label"] else ""
        lines += [f"{prefix}wtp.{n} = {v!r}" for n, v in sec["wtp"].items()]
        for key in ("price_coefficient", "purchase_probability", "price_derivative", "market_potential"):
            lines.append(f"{prefix}{key} = {sec[key]!r}")
    return lines


def cmd_analyze(cfg) -> int:
    report = io.read_json(_require(cfg, "report", "--report"))
    payload = analysis_payload(report, cfg["population"], cfg["price"])
    io.write_report(cfg["out"], payload, analysis_lines(payload))
    return 0


def design_payload(sol, params) -> dict:
    return _jsonable({
        "objective": sol.objective,
        "price": sol.price,
        "attribute_levels": dict(zip(params.schema.names, sol.attribute_levels.tolist())),
        "purchase_probability": sol.purchase_probability,
        "objective_value": sol.objective_value,
        "unit_cost": sol.unit_cost,
        "start_index": sol.start_index,
        "grid_size": len(sol.curve),
    })


def cmd_optimize(cfg) -> int:
    report = io.read_json(_require(cfg, "report", "--report"))
    sets = _parameter_sets(report)
    k = cfg["class_index"]
    if not 0 <= k < len(sets):
        raise InputError(f"class index {k} out of range for {len(sets)} parameter sets")
    params = sets[k][1]
    schema = params.schema
    offer = _reference_offer(report, params)
    if cfg["price_bounds"] is not None:
        price_bounds = _bounds_pair(cfg["price_bounds"])
    else:
        try:
            price_bounds = tuple(report["attribute_ranges"][schema.price])
        except (KeyError, TypeError):
            raise InputError("missing required setting '--price-bounds'") from None
    bounds = {n: _bounds_pair(v) for n, v in _assignments(cfg["bound"], str).items()}
    cost = _assignments(cfg["cost"], _float) or None
    objective = cfg["objective"]
    if objective not in (REVENUE, PROFIT):
        raise InputError(f"objective must be '{REVENUE}' or '{PROFIT}'")
    if objective == PROFIT and cost is None and cfg["base_cost"] == 0.0:
        raise InputError("profit objective needs a cost model ('--cost' or '--base-cost')")
    fixed = {n: float(v) for n, v in zip(schema.names, offer.values)
             if n not in bounds and n != schema.price}
    if cost is None and objective == PROFIT:
        cost = {}
    space = DesignSpace(schema, bounds, price_bounds, fixed, cost, cfg["base_cost"])
    if bounds:
        sol = optimize_design(params, space, objective, n_starts=cfg["starts"], seed=cfg["seed"],
                              grid_size=cfg["grid_size"])
    else:
        levels = offer.values.copy()
        unit_cost = space.per_user_cost(levels) if objective == PROFIT else 0.0
        sol = optimize_price(params, levels, price_bounds, cfg["grid_size"], unit_cost)
    payload = design_payload(sol, params)
    lines = [f"{key} = {value!r}" for key, value in payload.items() if key != "attribute_levels"]
    lines += [f"level.{n} = {v!r}" for n, v in payload["attribute_levels"].items()]
    io.write_report(cfg["out"], payload, lines)
    io.write_curve(cfg["curve"], sol.curve)
    return 0


def chain_payload(fit) -> dict:
    chain = fit.chain
    link = chain.links[0]
    coef, const = composed_utility_map(chain)
    result = fit.terminal_result
    effects = {}
    for k, name in enumerate(chain.indicator_names):
        paths = {}
        for path in enumerate_paths(chain):
            paths[">".join(path)] = explain_effect(chain, k, path).path_effect
        effects[name] = {"paths": paths, "total": float(coef[k])}
    return _jsonable({
        "indicators": list(chain.indicator_names),
        "constructs": list(link.output_names),
        "link": {
            "weights": {o: dict(zip(link.input_names, row)) for o, row in zip(link.output_names, link.weights.tolist())},
            "intercepts": dict(zip(link.output_names, link.intercepts.tolist())),
            "residual_stddev": dict(zip(link.output_names, link.residual_stddev.tolist())),
        },
        "terminal": {**io.params_to_dict(result.params),
                     "standard_errors": _se_map(result.names, result.standard_errors),
                     "log_likelihood": result.log_likelihood_at_optimum,
                     "converged": result.converged},
        "composed": {"coefficients": dict(zip(chain.indicator_names, coef.tolist())), "constant": const,
                     "price": chain.terminal_params.price_coefficient},
        "effects": effects,
    })


def chain_lines(payload) -> list[str]:
    lines = []
    for o, row in payload["link"]["weights"].items():
        lines += [f"link.{o}.{i} = {w!r}" for i, w in row.items()]
    lines += [f"terminal.{n} = {b!r}" for n, b in payload["terminal"]["betas"].items()]
    for name, eff in payload["effects"].items():
        lines += [f"effect.{name}.{p} = {v!r}" for p, v in eff["paths"].items()]
        lines.append(f"effect.{name}.total = {eff['total']!r}")
    return lines


def cmd_chain(cfg) -> int:
    data = io.read_dataset(_require(cfg, "data", "--data"))
    if not data.construct_names:
        raise InputError("dataset has no 'construct:' columns")
    fit = fit_chain(data)
    payload = chain_payload(fit)
    io.write_report(cfg["out"], payload, chain_lines(payload))
    return 0 if fit.terminal_result.converged else 3


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "analyze": cmd_analyze,
            "optimize": cmd_optimize, "chain": cmd_chain}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choiceforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI file; the [%s] section is read" % name)
        return p

    p = add("simulate", "generate a synthetic choice dataset")
    p.add_argument("--spec", help=f"named ground truth: {', '.join(SPEC_NAMES)}")
    p.add_argument("--n", type=int, help="number of observations")
    p.add_argument("--seed", type=int)
    p.add_argument("--levels", type=int, help="levels per attribute in the design")
    p.add_argument("--data", help="output choice CSV")
    p.add_argument("--truth", help="output ground-truth JSON")

    p = add("estimate", "fit a choice model to a dataset")
    p.add_argument("--data", help="input choice CSV")
    p.add_argument("--model", choices=("mnl", "lcm", "mixed"))
    p.add_argument("--classes", type=int, help="latent classes (lcm)")
    p.add_argument("--draws", type=int, help="Halton draws per observation (mixed)")
    p.add_argument("--random", help="comma-separated random coefficients (mixed)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--starts", type=int, help="EM starts (lcm)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report path without extension")

    p = add("analyze", "willingness to pay, price derivative and market potential")
    p.add_argument("--report", help="estimation report JSON")
    p.add_argument("--population", type=float)
    p.add_argument("--price", type=float, help="reference price (default: sample mean)")
    p.add_argument("--out", help="report path without extension")

    p = add("optimize", "revenue or profit maximising price and design")
    p.add_argument("--report", help="estimation report JSON")
    p.add_argument("--price-bounds", dest="price_bounds", help="lower:upper")
    p.add_argument("--bound", help="name=lower:upper items, comma separated")
    p.add_argument("--cost", help="name=cost-per-unit items, comma separated")
    p.add_argument("--base-cost", dest="base_cost", type=float)
    p.add_argument("--objective", choices=(REVENUE, PROFIT))
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--starts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--class-index", dest="class_index", type=int, help="latent class to design for")
    p.add_argument("--out", help="solution path without extension")
    p.add_argument("--curve", help="output curve CSV")

    p = add("chain", "fit the indicator -> construct -> choice chain")
    p.add_argument("--data", help="input choice CSV with construct: columns")
    p.add_argument("--out", help="report path without extension")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except ChoiceForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
