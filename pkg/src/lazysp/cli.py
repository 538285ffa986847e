"""Command-line harness: generate worlds, train selectors, evaluate, stress-test.

Every command is deterministic given (inputs, config, seed); reports are
written as JSON with the raw per-episode counts so medians can be recomputed
downstream.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict

import click
import jsonschema
import numpy as np
import yaml

from . import evaluation, training, worlds as worldsmod
from .graph import ExplicitGraph
from .oracle import ApproxOracleSelector
from .selectors import BASELINE_NAMES, LinearPolicy, LinearSelector, make_baseline
from .training import QLearnConfig, QTable, QTableSelector, StrollConfig

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "qlearn": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "episodes": {"type": "integer", "minimum": 1},
                "exploration_episodes": {"type": "integer", "minimum": 0},
                "epsilon0": {"type": "number", "minimum": 0, "maximum": 1},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "stroll": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 1},
                "episodes_per_iteration": {"type": "integer", "minimum": 1},
                "l2": {"type": "number", "minimum": 0},
                "validation_episodes": {"type": "integer", "minimum": 1},
                "beta_schedule": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                },
                "training_worlds": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        field = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise click.ClickException(f"config error at {field}: {err.message}")
    return cfg


@click.group()
@click.option("--seed", default=0, show_default=True, help="Master random seed.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config with qlearn/stroll sections.")
@click.option("--out-dir", default=".", show_default=True,
              help="Directory for generated artifacts.")
@click.pass_context
def main(ctx, seed, config_path, out_dir):
    """Lazy shortest-path search with learned edge selectors."""
    os.makedirs(out_dir, exist_ok=True)
    ctx.obj = {
        "seed": seed,
        "config": load_config(config_path),
        "out_dir": out_dir,
    }


def _out(ctx, name):
    return os.path.join(ctx.obj["out_dir"], name)


def _build_distribution(kind, rows, cols, params):
    if kind == "env1":
        graph, dist, _ = worldsmod.env1_distribution()
        return graph, dist
    if kind == "env2":
        graph, dist, _ = worldsmod.env2_distribution()
        return graph, dist
    return worldsmod.grid_world_generator(kind, rows, cols, params=params)


def _parse_params(param):
    out = {}
    for item in param:
        key, _, value = item.partition("=")
        if not value:
            raise click.ClickException(f"--param needs key=value, got {item!r}")
        out[key] = float(value) if "." in value else int(value)
    return out


@main.command("generate-worlds")
@click.option("--kind", required=True,
              type=click.Choice(["env1", "env2"] + list(worldsmod.GRID_KINDS)))
@click.option("--rows", default=11, show_default=True)
@click.option("--cols", default=11, show_default=True)
@click.option("--count", default=200, show_default=True)
@click.option("--param", multiple=True, help="Obstacle parameter key=value.")
@click.option("--graph-out", default="graph.json", show_default=True)
@click.option("--worlds-out", default="worlds.txt", show_default=True)
@click.pass_context
def generate_worlds(ctx, kind, rows, cols, count, param, graph_out, worlds_out):
    """Sample a world set from a named distribution and write graph + worlds."""
    graph, dist = _build_distribution(kind, rows, cols, _parse_params(param))
    rng = np.random.default_rng(ctx.obj["seed"])
    sampled = dist.sample_many(rng, count)
    graph.save(_out(ctx, graph_out))
    worldsmod.save_worldset(_out(ctx, worlds_out), graph, sampled)
    click.echo(f"wrote {count} worlds for graph {graph.content_hash()}")


def _load_graph_and_worlds(graph_path, worlds_path):
    graph = ExplicitGraph.load(graph_path)
    try:
        loaded = worldsmod.load_worldset(worlds_path, graph)
    except worldsmod.WorldError as err:
        raise click.ClickException(str(err))
    return graph, loaded


def _training_setup(ctx, env, graph_path, worlds_path, n_training):
    """(graph, distribution, training worlds) for the train command."""
    if env is not None:
        graph, dist = _build_distribution(env, 0, 0, {})
        rng = np.random.default_rng([ctx.obj["seed"], 0x7A])
        train_worlds = dist.sample_many(rng, n_training)
        return graph, dist, train_worlds
    if graph_path is None or worlds_path is None:
        raise click.ClickException("need either --env or both --graph and --train-worlds")
    graph, train_worlds = _load_graph_and_worlds(graph_path, worlds_path)

    def sampler(rng):
        return train_worlds[int(rng.integers(len(train_worlds)))]

    dist = worldsmod.WorldDistribution(graph.n_edges, sampler=sampler)
    return graph, dist, train_worlds


@main.command("train")
@click.option("--algorithm", required=True,
              type=click.Choice(["qlearn", "stroll", "strollh", "supervised"]))
@click.option("--env", type=click.Choice(["env1", "env2"]), default=None,
              help="Built-in environment (alternative to --graph/--train-worlds).")
@click.option("--graph", "graph_path", type=click.Path(exists=True), default=None)
@click.option("--train-worlds", "worlds_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_name", default=None, help="Artifact file name.")
@click.pass_context
def train(ctx, algorithm, env, graph_path, worlds_path, out_name):
    """Train a selector and write its policy/table artifact."""
    cfg = ctx.obj["config"]
    seed = ctx.obj["seed"]
    stroll_cfg = dict(cfg.get("stroll", {}))
    n_training = stroll_cfg.pop("training_worlds", 1000)
    graph, dist, train_worlds = _training_setup(
        ctx, env, graph_path, worlds_path, n_training
    )

    if algorithm == "qlearn":
        config = QLearnConfig(**cfg.get("qlearn", {}))
        table = training.q_learning(graph, dist, config, seed=seed)
        path = _out(ctx, out_name or "qtable.json")
        table.save(path)
        click.echo(f"wrote Q-table with {len(table.values)} entries to {path}")
        return

    config = StrollConfig(**stroll_cfg)
    if algorithm == "strollh":
        config.rollin = "heuristic"
    elif algorithm == "supervised":
        config.iterations = 1
        config.rollin = "oracle"
        config.beta_schedule = [1.0]
    policy, history = training.stroll_train(
        graph, dist, train_worlds, config=config, seed=seed,
        out_dir=ctx.obj["out_dir"],
    )
    path = _out(ctx, out_name or "policy.json")
    policy.save(path)
    click.echo(f"roll-in: {history['rollin']}")
    click.echo(
        f"best validation reward {history['best_validation_reward']:.3f}; "
        f"policy written to {path}"
    )


def _make_selector(spec, train_worlds):
    if spec == "oracle":
        return ApproxOracleSelector(), "oracle"
    if spec.startswith("policy:"):
        policy = LinearPolicy.load(spec.split(":", 1)[1])
        if train_worlds is None:
            raise click.ClickException("a learned policy needs --train-worlds")
        return LinearSelector(policy, train_worlds), "policy"
    if spec in BASELINE_NAMES:
        try:
            return make_baseline(spec, training_worlds=train_worlds), spec
        except ValueError as err:
            raise click.ClickException(str(err))
    raise click.ClickException(
        f"unknown selector {spec!r}; use a baseline name, 'oracle', or 'policy:<file>'"
    )


@main.command("evaluate")
@click.option("--selector", "selector_spec", required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--worlds", "worlds_path", type=click.Path(exists=True), required=True)
@click.option("--train-worlds", "train_worlds_path", type=click.Path(exists=True),
              default=None, help="World set for priors/posteriors.")
@click.option("--episodes", default=None, type=int,
              help="Evaluate on the first N worlds (default: all).")
@click.option("--report-out", default="report.json", show_default=True)
@click.pass_context
def evaluate(ctx, selector_spec, graph_path, worlds_path, train_worlds_path,
             episodes, report_out):
    """Evaluate one selector on a world set and write a report."""
    graph, eval_worlds = _load_graph_and_worlds(graph_path, worlds_path)
    train_worlds = None
    if train_worlds_path is not None:
        _, train_worlds = _load_graph_and_worlds(graph_path, train_worlds_path)
    if episodes is not None:
        if episodes <= 0:
            raise click.ClickException("--episodes must be positive")
        if episodes > len(eval_worlds):
            raise click.ClickException(
                f"requested {episodes} episodes but the set has {len(eval_worlds)}"
            )
        eval_worlds = eval_worlds[:episodes]
    selector, name = _make_selector(selector_spec, train_worlds)
    report = evaluation.evaluate_selector(
        graph, eval_worlds, selector, seed=ctx.obj["seed"], name=name
    )
    evaluation.save_report(_out(ctx, report_out), [report])
    click.echo(evaluation.format_report_table([report]))


@main.command("contaminate")
@click.option("--policy", "policy_path", type=click.Path(exists=True), required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--clean", "clean_path", type=click.Path(exists=True), required=True)
@click.option("--contaminant", "contaminant_path", type=click.Path(exists=True),
              required=True)
@click.option("--fractions", default="0,0.2,0.4,0.6,0.8,1.0", show_default=True)
@click.option("--report-out", default="contamination.json", show_default=True)
@click.pass_context
def contaminate(ctx, policy_path, graph_path, clean_path, contaminant_path,
                fractions, report_out):
    """Stress-test a policy on mixtures of its home set and a contaminant set."""
    graph, clean = _load_graph_and_worlds(graph_path, clean_path)
    _, contaminant = _load_graph_and_worlds(graph_path, contaminant_path)
    policy = LinearPolicy.load(policy_path)
    selector = LinearSelector(policy, clean)
    lams = [float(x) for x in fractions.split(",")]
    try:
        mixes = evaluation.contaminated_worldsets(clean, contaminant, lams)
    except ValueError as err:
        raise click.ClickException(str(err))
    reports = []
    for lam, mixed in mixes:
        reports.append(
            evaluation.evaluate_selector(
                graph, mixed, selector, seed=ctx.obj["seed"],
                name=f"policy@lam={lam:g}",
            )
        )
    evaluation.save_report(_out(ctx, report_out), reports)
    click.echo(evaluation.format_report_table(reports, extra_col=("lam", [f"{l:g}" for l in lams])))


@main.command("report")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--plot-data", "plot_path", default=None,
              help="Also write a TSV series for external plotting.")
@click.pass_context
def report(ctx, input_path, plot_path):
    """Re-render a saved report as a table (and optionally plot data)."""
    reports = evaluation.load_report(input_path)
    click.echo(evaluation.format_report_table(reports))
    if plot_path is not None:
        with open(_out(ctx, plot_path), "w") as fh:
            fh.write("selector\tmedian\tci_lower\tci_upper\tmean_reward\n")
            for r in reports:
                fh.write(
                    f"{r.selector}\t{r.median:g}\t{r.ci_lower:g}\t{r.ci_upper:g}\t"
                    f"{r.mean_reward:g}\n"
                )
        click.echo(f"plot data written to {plot_path}")


if __name__ == "__main__":
    main()
