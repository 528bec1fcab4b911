"""Command-line front end: config validation, subcommand dispatch, report files.

Exit codes: 0 success, 2 configuration or usage error, 3 computation error
(budget, convergence, unwritable output).  Reports are byte-stable: keys are
sorted, floats carry 12 significant digits and rationals are written "p/q".
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .extension import (CocycleError, GraphExtension, LatticeCocycle, TableCocycle,
                        almost_invariance_defect, canonical_weight, check_symmetry,
                        check_transitivity, check_uniform_loops, vertex_ball)
from .inducing import (InducingError, _omega_symbols, first_return_words, induced_rates,
                       is_full_branch, kac_check, tail_rate)
from .schreier import (SchreierCocycle, WordError, check_tt_ul_fc, parse_word,
                       schreier_vertex_generator, stallings_fold, word_to_str)
from .symdyn import BaseError, MarkovBase, to_prob
from .walkdp import (BudgetError, ConvergenceError, gurevich_pressure, lemma_inequality_checks,
                     mc_return_table, radial_oracle, rate_report, return_table,
                     spectral_radius)
from .wgraph import GraphError, folner_search

COMMANDS = ("fold", "graph", "return-rate", "spectral-radius", "gurevich", "folner",
            "defect", "induce", "check", "mc-walk")

# schema -----------------------------------------------------------------------------

_PROB = {"oneOf": [{"type": "number", "minimum": 0},
                   {"type": "string", "pattern": r"^\s*\d+(\.\d*)?(/\d+)?\s*$"}]}
_PROBS = {"type": "array", "items": _PROB, "minItems": 2}
_INT1 = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["base"],
    "properties": {
        "base": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alphabet", "measure"],
            "properties": {
                "alphabet": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                "admissibility": {"type": "array", "items": {
                    "type": "array", "items": {"type": ["boolean", "integer"]}}},
                "measure": {"oneOf": [
                    {"type": "object", "additionalProperties": False,
                     "required": ["type", "weights"],
                     "properties": {"type": {"const": "bernoulli"}, "weights": _PROBS}},
                    {"type": "object", "additionalProperties": False,
                     "required": ["type", "pi", "P"],
                     "properties": {"type": {"const": "markov"}, "pi": _PROBS,
                                    "P": {"type": "array", "items": _PROBS}}},
                ]},
            },
        },
        "cocycle": {"oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["type", "steps"],
             "properties": {"type": {"const": "lattice"}, "dim": _INT1,
                            "steps": {"type": "array", "items": {
                                "type": "array", "items": {"type": "integer"}}}}},
            {"type": "object", "additionalProperties": False,
             "required": ["type", "rank", "subgroup"],
             "properties": {"type": {"const": "schreier"}, "rank": _INT1,
                            "subgroup": {"type": "array", "items": {"type": "string"}},
                            "gamma": {"type": "object",
                                      "additionalProperties": {"type": "string"}}}},
            {"type": "object", "additionalProperties": False,
             "required": ["type", "vertices", "actions"],
             "properties": {"type": {"const": "table"},
                            "vertices": {"type": "array", "items": {"type": "string"},
                                         "minItems": 1},
                            "actions": {"type": "object", "additionalProperties": {
                                "type": "array", "items": {"type": "integer"}}}}},
        ]},
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": _INT1,
                "radius": _INT1,
                "epsilon": {"oneOf": [_PROB, {"type": "array", "items": _PROB, "minItems": 1}]},
                "target": _PROB,
                "estimator": {"enum": ["root", "ratio", "fit"]},
                "exact": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
                "threads": _INT1,
                "budget": _INT1,
                "samples": _INT1,
                "trials": _INT1,
                "omega": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "max_eta": _INT1,
                "depth": _INT1,
                "power": _INT1,
                "oracle": {"enum": ["none", "radial"]},
                "set": {"oneOf": [
                    {"type": "object", "additionalProperties": False, "required": ["ball"],
                     "properties": {"ball": {"type": "integer", "minimum": 0}}},
                    {"type": "object", "additionalProperties": False, "required": ["all"],
                     "properties": {"all": {"const": True}}},
                    {"type": "object", "additionalProperties": False,
                     "required": ["vertices"],
                     "properties": {"vertices": {"type": "array", "minItems": 1}}},
                ]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["csv", "json"]}, "path": {"type": "string"}},
        },
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


class ConfigError(ValueError):
    def __init__(self, errors: list[tuple[str, str]]):
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))
        self.errors = errors


@dataclass
class RunConfig:
    base: MarkovBase
    extension: GraphExtension | None
    analysis: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.base.exact

    def get(self, key, default=None):
        return self.analysis.get(key, default)


def _load_json(text: str) -> tuple[object, list[tuple[str, str]]]:
    errors = []

    def pairs(items):
        out = {}
        for k, v in items:
            if k in out:
                errors.append(("", f"duplicate key {k!r}"))
            out[k] = v
        return out

    try:
        data = json.loads(text, object_pairs_hook=pairs, parse_float=Decimal)
    except json.JSONDecodeError as e:
        return None, [("", f"invalid JSON: {e}")]
    return data, errors


def _path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _build_base(b: dict, exact: bool) -> MarkovBase:
    m = b["measure"]
    adm = b.get("admissibility")
    if m["type"] == "bernoulli":
        if adm is not None and not all(all(row) for row in adm):
            raise BaseError("Bernoulli measure requires the full shift")
        return MarkovBase.bernoulli(b["alphabet"], m["weights"], exact)
    return MarkovBase.markov(b["alphabet"], m["pi"], m["P"], adm, exact)


def _build_extension(base: MarkovBase, c: dict) -> GraphExtension:
    syms = base.alphabet
    if c["type"] == "lattice":
        if len(c["steps"]) != len(syms):
            raise CocycleError("need one lattice step per alphabet symbol")
        cc = LatticeCocycle(syms, c["steps"], c.get("dim"))
    elif c["type"] == "schreier":
        k = c["rank"]
        M = stallings_fold([parse_word(w, k) for w in c["subgroup"] or [""]], k)
        gamma = c.get("gamma")
        if gamma is not None:
            missing = [s for s in syms if s not in gamma]
            if missing:
                raise CocycleError(f"gamma is not defined on {missing}")
            gamma = {s: parse_word(gamma[s], k) for s in syms}
        cc = schreier_vertex_generator(M, k, syms, gamma)
    else:
        missing = [s for s in syms if s not in c["actions"]]
        if missing:
            raise CocycleError(f"no action for symbols {missing}")
        cc = TableCocycle(syms, c["vertices"], c["actions"])
    return GraphExtension(base, cc)


def validate(text: str, overrides: dict | None = None) -> RunConfig | list[tuple[str, str]]:
    """Parse and check a configuration; returns the config or (path, message) errors."""
    data, errors = _load_json(text)
    if data is None:
        return errors
    if isinstance(data, dict):
        for dotted, value in (overrides or {}).items():
            block, key = dotted.split(".")
            if not isinstance(data.get(block, {}), dict):
                break
            data.setdefault(block, {})[key] = value
    errors += [(_path(e), e.message) for e in
               sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))]
    if errors:
        return errors
    analysis = dict(data.get("analysis", {}))
    exact = analysis.get("exact")
    if exact is None:
        # exact rationals stay cheap up to about 24 steps
        exact = analysis.get("n_max", 24) <= 24
    try:
        base = _build_base(data["base"], exact)
    except BaseError as e:
        return [("base", str(e))]
    E = None
    if "cocycle" in data:
        try:
            E = _build_extension(base, data["cocycle"])
        except (CocycleError, WordError) as e:
            return [("cocycle", str(e))]
    return RunConfig(base, E, analysis, dict(data.get("output", {})), data)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    if path is None:
        raise ConfigError([("--config", "this command needs a configuration file")])
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError([(path, f"cannot read configuration file: {e.strerror}")]) from None
    cfg = validate(text, overrides)
    if isinstance(cfg, list):
        raise ConfigError([(f"{path}:{p}", m) for p, m in cfg])
    return cfg


# formatting -------------------------------------------------------------------------

def fmt(x):
    """JSON-ready value with the fixed decimal conventions."""
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, Decimal):
        return str(Fraction(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {str(k): fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    return str(x)


def _cell(x) -> str:
    x = fmt(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, (list, dict)):
        return json.dumps(x, sort_keys=True, separators=(",", ":"))
    return str(x)


@dataclass
class Result:
    """Named tables (lists of row dicts) and summary objects of one run."""

    tables: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = list(rows[0]) if rows else ["empty"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _json_text(meta: dict, data: dict) -> str:
    return json.dumps({"meta": fmt(meta), "data": fmt(data)}, sort_keys=True, indent=2) + "\n"


def report(result: Result, fmt_name: str, meta: dict, out_dir: str | None,
           stem: str) -> list[str]:
    """Write the result; returns the written paths (stdout when out_dir is None)."""
    files: list[tuple[str, str]] = []
    if fmt_name == "json":
        data = {**{k: v for k, v in result.tables.items()}, **result.objects}
        files.append((f"{stem}.json", _json_text(meta, data)))
    else:
        for name, rows in result.tables.items():
            files.append((f"{stem}-{name}.csv", _csv_text(rows)))
        if result.objects:
            files.append((f"{stem}-summary.json", _json_text(meta, result.objects)))
    if out_dir is None:
        sys.stdout.write("\n".join(text for _, text in files))
        return []
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files:
        p = d / name
        with open(p, "w", newline="") as fh:
            fh.write(text)
        written.append(str(p))
    return written


# vertices ---------------------------------------------------------------------------

def vertex_str(E: GraphExtension, v) -> str:
    cc = E.cocycle
    if isinstance(cc, SchreierCocycle):
        return word_to_str(cc.representative(v)) or "e"
    if isinstance(cc, LatticeCocycle):
        return ",".join(str(x) for x in v)
    return str(v)


def parse_vertex(E: GraphExtension, spec):
    cc = E.cocycle
    if isinstance(cc, SchreierCocycle):
        return cc.coset_of(parse_word("" if spec == "e" else str(spec), cc.k))
    if isinstance(cc, LatticeCocycle):
        vals = spec if isinstance(spec, list) else [int(x) for x in str(spec).split(",")]
        if len(vals) != cc.dim:
            raise ConfigError([("analysis/set", f"vertex {spec!r} is not in Z^{cc.dim}")])
        return tuple(int(x) for x in vals)
    if spec not in getattr(cc, "vertices", [spec]):
        raise ConfigError([("analysis/set", f"unknown vertex {spec!r}")])
    return spec


def _need_extension(cfg: RunConfig, cmd: str) -> GraphExtension:
    if cfg.extension is None:
        raise ConfigError([("cocycle", f"{cmd} needs a cocycle block")])
    return cfg.extension


def _free_rank(E: GraphExtension) -> int:
    """Rank of the Cayley tree for the radial oracle, after checking the setup fits it."""
    cc = E.cocycle
    ok = (isinstance(cc, SchreierCocycle) and cc.M.n_states == 1 and not cc.M.edges
          and E.base.kind == "bernoulli" and len(set(E.base.pi)) == 1
          and all(len(g) == 1 for g in cc.gamma.values())
          and sorted(g[0] for g in cc.gamma.values()) == sorted(
              x for i in range(1, cc.k + 1) for x in (i, -i)))
    if not ok:
        raise ConfigError([("analysis/oracle",
                            "the radial oracle needs the uniform walk on a free group's "
                            "Cayley tree")])
    return cc.k


# subcommands ------------------------------------------------------------------------

def cmd_fold(args, cfg) -> Result:
    gens = [g for g in args.gens.split(",")] if args.gens else [""]
    M = stallings_fold([parse_word(g.strip(), args.rank) for g in gens], args.rank)
    js = M.to_json()
    if cfg.output.get("format", "json") == "json":
        return Result({}, {"automaton": js})
    return Result({"edges": [{"from": a, "label": x, "to": b} for a, x, b in js["edges"]]})


def cmd_graph(args, cfg) -> Result:
    E = _need_extension(cfg, "graph")
    R = cfg.get("radius", 2)
    rows = []
    for v in vertex_ball(E, R):
        out: dict = {}
        for s, p in zip(E.base.alphabet, E.base.pi):
            t = E.cocycle.act(s, v)
            out[t] = out.get(t, 0) + p
        for t, p in out.items():
            rows.append({"from": vertex_str(E, v), "to": vertex_str(E, t), "weight": p})
    return Result({"edges": rows}, {"radius": R, "vertices": len(vertex_ball(E, R))})


def _returns(cfg: RunConfig, E: GraphExtension, n_max: int):
    if cfg.get("oracle", "none") == "radial":
        p = radial_oracle(_free_rank(E), n_max)
        return p, ["oracle"] * len(p), [0.0] * len(p)
    t = return_table(E, n_max, exact=cfg.exact, budget=cfg.get("budget"),
                     threads=cfg.get("threads", 1), mc_samples=cfg.get("samples", 100_000),
                     seed=cfg.get("seed", 0))
    return t.p, t.method, t.stderr


def cmd_return_rate(args, cfg) -> Result:
    E = _need_extension(cfg, "return-rate")
    p, method, stderr = _returns(cfg, E, cfg.get("n_max", 28))
    rep = rate_report(p, cfg.get("estimator", "fit"), method, stderr)
    rows = [{"n": n, "p_n": x, "method": m, "stderr": s}
            for n, (x, m, s) in enumerate(zip(p, method, stderr))]
    summary = {"estimator": rep.estimator, "value": rep.value, "ratio_raw": rep.ratio_raw,
               "alpha": rep.alpha, "clamped": rep.clamped,
               "window": list(rep.window), "residual": rep.residual}
    return Result({"returns": rows, "rate": list(rep.rows())}, {"rate": summary})


def cmd_spectral_radius(args, cfg) -> Result:
    E = _need_extension(cfg, "spectral-radius")
    rep = spectral_radius(E, n_max=cfg.get("n_max", 16), support_radius=cfg.get("radius", 8),
                          budget=cfg.get("budget"), threads=cfg.get("threads", 1))
    summary = {"rho_hat": rep.rho_hat, "method": rep.method, "bias": rep.bias,
               "ball_sizes": rep.ball_sizes}
    return Result({"radii": list(rep.rows())}, {"spectral": summary})


def cmd_gurevich(args, cfg) -> Result:
    E = _need_extension(cfg, "gurevich")
    n_max = cfg.get("n_max", 200)
    if cfg.get("oracle", "none") == "radial":
        rep = gurevich_pressure(table=radial_oracle(_free_rank(E), n_max))
    else:
        rep = gurevich_pressure(E, n_max=n_max, exact=cfg.exact, budget=cfg.get("budget"),
                                threads=cfg.get("threads", 1))
    Z = [{"n": n, "Z_n": z} for n, z in enumerate(rep.Z)]
    summary = next(rep.rows())
    summary["difference"] = rep.pressure - rep.log_fit_rate
    return Result({"Z": Z}, {"pressure": summary})


def _eps_grid(cfg: RunConfig) -> list:
    eps = cfg.get("epsilon", "1/10")
    eps = eps if isinstance(eps, list) else [eps]
    return [to_prob(e, cfg.exact) for e in eps]


def cmd_folner(args, cfg) -> Result:
    E = _need_extension(cfg, "folner")
    target = to_prob(cfg.get("target", "1/100"), cfg.exact)
    budget = cfg.get("budget", 100_000)
    rows, sets = [], {}
    for eps in _eps_grid(cfg):
        res = folner_search(canonical_weight(E), eps, target, budget)
        rows.append({"epsilon": eps, "ratio": res.ratio, "set_size": res.set_size,
                     "certificate": res.certificate})
        sets[str(fmt(eps))] = sorted(vertex_str(E, k) for k in res.keys)
    return Result({"profile": rows}, {"target": target, "sets": sets})


def _vertex_set(cfg: RunConfig, E: GraphExtension) -> list:
    spec = cfg.get("set", {"ball": cfg.get("radius", 1)})
    if "ball" in spec:
        return vertex_ball(E, spec["ball"])
    if "all" in spec:
        G = canonical_weight(E)
        V = G.closed_component(limit=cfg.get("budget", 10**6))
        if V is None:
            raise GraphError("the graph is not finite within the budget")
        return [G.key(v) for v in V]
    return [parse_vertex(E, s) for s in spec["vertices"]]


def cmd_defect(args, cfg) -> Result:
    E = _need_extension(cfg, "defect")
    A = _vertex_set(cfg, E)
    return Result({}, {"defect": {"defect": almost_invariance_defect(E, A),
                                  "set_size": len(set(A))}})


def cmd_induce(args, cfg) -> Result:
    omega = cfg.get("omega", ["0"])
    S = first_return_words(cfg.base, _omega_symbols(cfg.base, omega), cfg.get("max_eta", 60))
    kac = kac_check(S)
    summary = {"omega": list(S.omega), "words": len(S.words), "tail": S.tail,
               "kac_defect": kac.defect, "kac_expectation": kac.expectation,
               "full_branch": is_full_branch(cfg.base, S.omega, S.words)}
    try:
        tr = tail_rate(S)
        summary.update(tail_rate=tr.rate, exponential_tails=tr.exponential,
                       tail_window=list(tr.window))
    except InducingError as e:
        summary.update(tail_rate=None, exponential_tails=None, tail_note=str(e))
    if cfg.extension is not None:
        r = induced_rates(cfg.extension, S, n_max=cfg.get("n_max", 16),
                          exact=cfg.exact, budget=cfg.get("budget"),
                          threads=cfg.get("threads", 1))
        summary.update(R_S=r.R_S.value, R_Omega_T=r.R_Omega_T.value, R_T=r.R_T.value,
                       chain_holds=r.chain_holds)
    return Result({"words": list(S.rows())}, {"induce": summary})


def cmd_check(args, cfg) -> Result:
    E = _need_extension(cfg, "check")
    R = cfg.get("radius", 3)
    rows = []
    tr = check_transitivity(E, R)
    rows.append({"check": "transitivity", "status": tr.status, "radius": R,
                 "witness": None if tr.witness is None else
                 [[s, vertex_str(E, v)] for s, v in tr.witness]})
    loops = check_uniform_loops(E, cfg.get("power", 2), R)
    J = ["".join(w) for w in loops.J]
    rows.append({"check": "uniform-loops", "status": loops.status, "radius": R, "witness": J})
    nbrs = vertex_ball(E, 1)
    sym = check_symmetry(E, min(cfg.get("n_max", 12), 24), [(E.root, v) for v in nbrs])
    rows.append({"check": "symmetry", "status": sym.verdict, "radius": 1,
                 "witness": {"slope": sym.slope, "spread": sym.N}})
    if loops.status == "verified":
        lem = lemma_inequality_checks(E, loops.J, trials=cfg.get("trials", 200),
                                      seed=cfg.get("seed", 0))
        rows.append({"check": "lemma-inequalities", "status": "ok" if lem.ok else "violated",
                     "radius": 2, "witness": {"min_slack_normdrop": lem.min_slack_normdrop,
                                              "min_slack_rotundity": lem.min_slack_rotundity}})
    cc = E.cocycle
    if isinstance(cc, SchreierCocycle):
        depth = cfg.get("depth", 3)
        conds = check_tt_ul_fc(cc.M, E.base, cc.gamma, depth, power=cfg.get("power", 1))
        for name in ("tt", "ul", "fc"):
            c = conds[name]
            w = c.witness
            rows.append({"check": name, "status": c.status, "radius": depth,
                         "witness": sorted(w, key=str) if isinstance(w, (set, list)) else w})
    return Result({"checks": rows}, {})


def cmd_mc_walk(args, cfg) -> Result:
    E = _need_extension(cfg, "mc-walk")
    samples = cfg.get("samples", 100_000)
    res = mc_return_table(E, cfg.get("n_max", 16), samples=samples, seed=cfg.get("seed", 0),
                          threads=cfg.get("threads", 1))
    rows = [{"n": n, "estimate": r.estimate, "stderr": r.stderr, "samples": r.samples}
            for n, r in enumerate(res)]
    return Result({"returns": rows}, {})


DISPATCH = {"fold": cmd_fold, "graph": cmd_graph, "return-rate": cmd_return_rate,
            "spectral-radius": cmd_spectral_radius, "gurevich": cmd_gurevich,
            "folner": cmd_folner, "defect": cmd_defect, "induce": cmd_induce,
            "check": cmd_check, "mc-walk": cmd_mc_walk}

HELP = {"fold": "Stallings core of a subgroup given by --gens",
        "graph": "canonical edge weights of the vertex ball",
        "return-rate": "return probabilities and decay-rate estimates",
        "spectral-radius": "rho-hat on truncated balls",
        "gurevich": "Gurevich pressure against the log decay rate",
        "folner": "Folner set search over an epsilon grid",
        "defect": "almost-invariance defect of a vertex set",
        "induce": "first-return inducing: tails, Kac, induced rates",
        "check": "transitivity, loops, symmetry and loop inequalities",
        "mc-walk": "seeded Monte Carlo return table"}

# default base for config-free inducing runs: the fair 2-shift
_FAIR_SHIFT = {"base": {"alphabet": ["0", "1"],
                        "measure": {"type": "bernoulli", "weights": ["0.5", "0.5"]}}}


# argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE")
    common.add_argument("--n-max", type=int, dest="analysis.n_max")
    common.add_argument("--radius", type=int, dest="analysis.radius")
    common.add_argument("--epsilon", dest="analysis.epsilon")
    common.add_argument("--target", dest="analysis.target")
    common.add_argument("--budget", type=int, dest="analysis.budget")
    common.add_argument("--seed", type=int, dest="analysis.seed")
    common.add_argument("--threads", type=int, dest="analysis.threads")
    common.add_argument("--exact", action=argparse.BooleanOptionalAction, dest="analysis.exact")
    common.add_argument("--output", choices=["csv", "json"], dest="output.format")
    common.add_argument("--out-dir", metavar="PATH", dest="output.path")

    p = argparse.ArgumentParser(prog="amenwalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"amenwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "fold":
            sp.add_argument("--rank", type=int, default=2)
            sp.add_argument("--gens", default="", help='comma-separated words, e.g. "aa,b"')
        if name == "induce":
            sp.add_argument("--omega", dest="analysis.omega", help='symbols, e.g. "[0]"')
            sp.add_argument("--max-eta", type=int, dest="analysis.max_eta")
    return p


def _overrides(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if "." in k and v is not None:
            if k == "analysis.omega":
                v = [s for s in v.strip().strip("[]").replace(",", " ").split()]
            out[k] = v
    return out


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    ov = _overrides(args)
    try:
        if args.command == "fold":
            cfg = validate(json.dumps(_FAIR_SHIFT), {k: v for k, v in ov.items()
                                                      if k.startswith("output.")})
        elif args.command == "induce" and args.config is None:
            cfg = validate(json.dumps(_FAIR_SHIFT), ov)
            if isinstance(cfg, list):
                raise ConfigError(cfg)
        else:
            cfg = load_config(args.config, ov)
        result = DISPATCH[args.command](args, cfg)
        out_fmt = cfg.output.get("format", "json" if args.command == "fold" else "csv")
        meta = {"version": __version__, "command": args.command,
                "seed": cfg.get("seed", 0), "mode": "exact" if cfg.exact else "float"}
        written = report(result, out_fmt, meta, cfg.output.get("path"),
                         args.command.replace("-", "_"))
        for w in written:
            print(w, file=sys.stderr)
        return 0
    except ConfigError as e:
        for path, msg in e.errors:
            print(f"amenwalk: {path}: {msg}", file=sys.stderr)
        return 2
    except (WordError, InducingError, CocycleError, BaseError) as e:
        print(f"amenwalk: invalid input: {e}", file=sys.stderr)
        return 2
    except (BudgetError, ConvergenceError, GraphError, OSError, ValueError,
            RuntimeError, ArithmeticError) as e:
        print(f"amenwalk: computation failed: {e}", file=sys.stderr)
        return 3


def main() -> int:
    return run()
