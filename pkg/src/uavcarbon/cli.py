"""Experiment runner: training, ablations, evaluation, exports.

Every run is described by a manifest whose content hash covers the scenario
text, learner config, seeds, algorithms, and penalty weights; two runs of the
same manifest and seed produce byte-identical metrics CSVs.  Wall-clock and
the training-energy estimate land in ``run_info.json``, which is the one
non-deterministic output.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import GaussianSacAgent, RandomAgent
from .learner import (
    ABLATION_FLAGS,
    ConfigError,
    LearnerConfig,
    R2dsacAgent,
    derive_seed,
    make_agent,
    train,
)
from .mdp import PenaltyWeights, UavMecEnv, slot_log_line
from .nncore.checkpoint import load_checkpoint, save_checkpoint
from .retrieval import (
    Corpus,
    Document,
    TfidfEmbedder,
    Triplet,
    build_graph,
    default_extractors,
    fuse,
    graph_retrieve,
    ingest_corpus,
    keyword_retrieve,
    load_triplets,
    vector_retrieve,
)
from .scenario import (
    Scenario,
    ScenarioError,
    default_scenario,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)

_METRIC_COLUMNS = (
    "episode",
    "test_reward",
    "carbon_kg",
    "penalty",
    "critic_loss",
    "actor_loss",
    "diffusion_loss",
    "masked_neurons",
)


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines a run's outputs."""

    scenario_text: str
    config: LearnerConfig
    seeds: tuple[int, ...]
    algos: tuple[str, ...]
    penalties: PenaltyWeights
    out_dir: str

    def content_hash(self) -> str:
        payload = json.dumps(
            {
                "scenario": self.scenario_text,
                "config": json.loads(self.config.to_json()),
                "seeds": list(self.seeds),
                "algos": list(self.algos),
                "penalties": asdict(self.penalties),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TrainEnergyEstimate:
    """Power-times-time stand-in for hardware carbon measurement."""

    wall_clock_s: float
    device_power_w: float
    energy_j: float
    carbon_kg: float


def estimate_train_carbon(
    wall_clock_s: float, device_power_w: float, scenario: Scenario
) -> TrainEnergyEstimate:
    if wall_clock_s < 0 or device_power_w <= 0:
        raise ConfigError("wall clock must be >= 0 and device power > 0")
    energy = device_power_w * wall_clock_s
    kg = scenario.carbon.kg_per_wh * (scenario.carbon.wh_per_joule * energy)
    return TrainEnergyEstimate(
        wall_clock_s=wall_clock_s,
        device_power_w=device_power_w,
        energy_j=energy,
        carbon_kg=kg,
    )


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (int, float)) and not isinstance(
        value, bool
    ) else str(value)


def write_metrics_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(_METRIC_COLUMNS) + "\n")
        for row in rows:
            cells = [
                str(row["episode"]),
                *(_fmt(row[c]) for c in _METRIC_COLUMNS[1:-1]),
                row["masked_neurons"],
            ]
            handle.write(",".join(cells) + "\n")


def read_metrics_csv(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        for line in handle:
            cells = line.rstrip("\n").split(",")
            row = dict(zip(header, cells))
            for key in header[1:-1]:
                row[key] = float(row[key])
            row["episode"] = int(row["episode"])
            rows.append(row)
    return rows


def final_window_mean(rows: list[dict], key: str, window: int = 20) -> float:
    tail = rows[-window:] if len(rows) >= window else rows
    return float(np.mean([r[key] for r in tail])) if tail else float("nan")


def summarize(
    per_algo_rows: dict[str, dict[int, list[dict]]], window: int = 20
) -> list[dict]:
    """Mean and std across seeds of the final-window reward and carbon."""
    out = []
    for algo in sorted(per_algo_rows):
        finals = [
            final_window_mean(rows, "test_reward", window)
            for rows in per_algo_rows[algo].values()
        ]
        carbons = [
            final_window_mean(rows, "carbon_kg", window)
            for rows in per_algo_rows[algo].values()
        ]
        out.append(
            {
                "algo": algo,
                "seeds": len(finals),
                "final_reward_mean": float(np.mean(finals)),
                "final_reward_std": float(np.std(finals)),
                "final_carbon_mean": float(np.mean(carbons)),
                "final_carbon_std": float(np.std(carbons)),
            }
        )
    return out


def _save_agent_checkpoint(
    path: Path, agent, scenario: Scenario, cfg: LearnerConfig, algo: str, seed: int
) -> None:
    meta = {
        "algo": algo,
        "seed": seed,
        "config": json.loads(cfg.to_json()),
        "scenario": serialize_scenario(scenario),
    }
    if isinstance(agent, R2dsacAgent):
        nets = {
            "actor": agent.actor.net,
            "target_actor": agent.target_actor.net,
            "q1": agent.critics.q1,
            "q2": agent.critics.q2,
            "t1": agent.critics.t1,
            "t2": agent.critics.t2,
        }
        adams = {"actor": agent.adam_actor, "q1": agent.adam_q1, "q2": agent.adam_q2}
    elif isinstance(agent, GaussianSacAgent):
        nets = {
            "policy": agent.policy,
            "q1": agent.critics.q1,
            "q2": agent.critics.q2,
            "t1": agent.critics.t1,
            "t2": agent.critics.t2,
        }
        adams = {"policy": agent.adam_policy, "q1": agent.adam_q1, "q2": agent.adam_q2}
    else:  # random agent: nothing to persist beyond metadata
        nets, adams = {}, {}
    save_checkpoint(str(path), nets, adams, meta)


def load_agent_checkpoint(path: str):
    """Rebuild (agent, scenario, config, algo) from a checkpoint file."""
    nets, adams, meta = load_checkpoint(path)
    scenario = parse_scenario(meta["scenario"])
    cfg = LearnerConfig.from_json(json.dumps(meta["config"]))
    algo = meta["algo"]
    env = UavMecEnv(scenario)
    agent, cfg = make_agent(algo, env.state_dim, env.action_dim, cfg, meta["seed"])
    if isinstance(agent, R2dsacAgent):
        agent.actor.net = nets["actor"]
        agent.target_actor.net = nets["target_actor"]
        agent.critics.q1, agent.critics.q2 = nets["q1"], nets["q2"]
        agent.critics.t1, agent.critics.t2 = nets["t1"], nets["t2"]
        agent.adam_actor, agent.adam_q1, agent.adam_q2 = (
            adams["actor"],
            adams["q1"],
            adams["q2"],
        )
    elif isinstance(agent, GaussianSacAgent):
        agent.policy = nets["policy"]
        agent.critics.q1, agent.critics.q2 = nets["q1"], nets["q2"]
        agent.critics.t1, agent.critics.t2 = nets["t1"], nets["t2"]
        agent.adam_policy, agent.adam_q1, agent.adam_q2 = (
            adams["policy"],
            adams["q1"],
            adams["q2"],
        )
    return agent, scenario, cfg, algo


def run_experiment(
    manifest: RunManifest, scenario: Scenario, device_power_w: float = 150.0
) -> Path:
    """Train every (algo, seed) pair, write metrics, checkpoints, summaries."""
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    (out / "manifest.json").write_text(
        json.dumps(
            {
                "hash": manifest.content_hash(),
                "scenario": manifest.scenario_text,
                "config": json.loads(manifest.config.to_json()),
                "seeds": list(manifest.seeds),
                "algos": list(manifest.algos),
                "penalties": asdict(manifest.penalties),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    per_algo: dict[str, dict[int, list[dict]]] = {}
    for algo in manifest.algos:
        per_algo[algo] = {}
        for seed in manifest.seeds:
            env = UavMecEnv(scenario, manifest.penalties)
            agent, cfg = make_agent(algo, env.state_dim, env.action_dim, manifest.config, seed)
            result = train(env, cfg, seed, agent=agent)
            per_algo[algo][seed] = result.metrics
            write_metrics_csv(out / f"metrics_{algo}_seed{seed}.csv", result.metrics)
            _save_agent_checkpoint(
                out / f"checkpoint_{algo}_seed{seed}.npz",
                result.agent,
                scenario,
                cfg,
                algo,
                seed,
            )
    summary = summarize(per_algo)
    with open(out / "summary.csv", "w", encoding="utf-8", newline="\n") as handle:
        handle.write(
            "algo,seeds,final_reward_mean,final_reward_std,"
            "final_carbon_mean,final_carbon_std\n"
        )
        for row in summary:
            handle.write(
                f"{row['algo']},{row['seeds']},{repr(row['final_reward_mean'])},"
                f"{repr(row['final_reward_std'])},{repr(row['final_carbon_mean'])},"
                f"{repr(row['final_carbon_std'])}\n"
            )
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    wall = time.time() - started
    estimate = estimate_train_carbon(wall, device_power_w, scenario)
    (out / "run_info.json").write_text(
        json.dumps(asdict(estimate), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return out


def export_trajectories(
    checkpoint_path: str, seeds: tuple[int, ...], episodes: int, out_path: str
) -> None:
    """Per-slot UAV positions under the checkpointed policy, CSV for plotting."""
    agent, scenario, cfg, _ = load_agent_checkpoint(checkpoint_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("episode,slot,uav_id,x,y\n")
        episode_counter = 0
        for seed in seeds:
            for ep in range(episodes):
                episode_counter += 1
                env = UavMecEnv(scenario)
                rng = np.random.default_rng(derive_seed(seed, 41, ep))
                state = env.reset(derive_seed(seed, 43, ep))
                done = False
                while not done:
                    world = env.world
                    for uav_id in range(world.uav_pos.shape[0]):
                        handle.write(
                            f"{episode_counter},{world.slot},{uav_id},"
                            f"{repr(float(world.uav_pos[uav_id, 0]))},"
                            f"{repr(float(world.uav_pos[uav_id, 1]))}\n"
                        )
                    state, _, done, _, _ = env.step(agent.act(state.normalized, rng))


# --- retrieval index persistence --------------------------------------------

def save_retrieval_index(
    path: str, corpus: Corpus, triplets: list[Triplet], synonyms: dict
) -> None:
    payload = {
        "documents": [
            {
                "doc_id": d.doc_id,
                "text": d.text,
                "keywords": sorted(d.keywords),
                "heading_path": list(d.heading_path),
            }
            for d in corpus.documents
        ],
        "triplets": [[t.subject, t.predicate, t.object] for t in triplets],
        "synonyms": synonyms,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_retrieval_index(path: str) -> tuple[Corpus, list[Triplet], dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    docs = tuple(
        Document(
            doc_id=d["doc_id"],
            text=d["text"],
            keywords=frozenset(d["keywords"]),
            heading_path=tuple(d["heading_path"]),
        )
        for d in payload["documents"]
    )
    corpus = Corpus(
        documents=docs, index_keywords=frozenset(k for d in docs for k in d.keywords)
    )
    triplets = [Triplet(*t) for t in payload["triplets"]]
    return corpus, triplets, payload.get("synonyms", {})


# --- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are configuration errors
        raise ConfigError(message)


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip() != "")
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None


def _load_config(path: str | None, episodes: int | None) -> LearnerConfig:
    if path is None:
        cfg = LearnerConfig()
    else:
        try:
            cfg = LearnerConfig.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if episodes is not None:
        cfg = replace(cfg, episodes=episodes)
    return cfg


def _load_scenario_arg(path: str | None) -> Scenario:
    return load_scenario(path) if path else default_scenario()


def _penalties_from_args(args) -> PenaltyWeights:
    return PenaltyWeights(
        area=args.penalty_area,
        collision=args.penalty_collision,
        coverage=args.penalty_coverage,
        capacity=args.penalty_capacity,
        reward_scale=args.reward_scale,
    )


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="scenario file (defaults to the built-in)")
    parser.add_argument("--config", help="learner config JSON file")
    parser.add_argument("--seeds", default="0", help="comma-separated seed list")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--episodes", type=int, help="override config episode count")
    parser.add_argument("--penalty-area", type=float, default=1.0)
    parser.add_argument("--penalty-collision", type=float, default=1.0)
    parser.add_argument("--penalty-coverage", type=float, default=1.0)
    parser.add_argument("--penalty-capacity", type=float, default=1.0)
    parser.add_argument("--reward-scale", type=float, default=100.0)
    parser.add_argument("--device-power-w", type=float, default=150.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="uavcarbon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one algorithm across seeds")
    _add_run_args(p_train)
    p_train.add_argument(
        "--algo",
        default="r2dsac",
        choices=sorted(ABLATION_FLAGS) + ["sac", "random"],
    )

    p_ablate = sub.add_parser("ablate", help="run the four ablation variants")
    _add_run_args(p_ablate)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=5)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--episode-log", help="write per-slot JSON lines here")

    p_traj = sub.add_parser("export-traj", help="export UAV trajectories as CSV")
    p_traj.add_argument("--checkpoint", required=True)
    p_traj.add_argument("--seeds", default="0")
    p_traj.add_argument("--episodes", type=int, default=1)
    p_traj.add_argument("--out", required=True)

    p_ret = sub.add_parser("retrieval", help="corpus ingest and querying")
    ret_sub = p_ret.add_subparsers(dest="retrieval_command", required=True)
    p_ing = ret_sub.add_parser("ingest")
    p_ing.add_argument("--corpus", required=True, help="directory of .txt/.md files")
    p_ing.add_argument("--triplets", help="TSV triplet file")
    p_ing.add_argument("--synonyms", help="JSON entity->synonyms file")
    p_ing.add_argument("--out", required=True, help="index JSON path")
    p_qry = ret_sub.add_parser("query")
    p_qry.add_argument("--index", required=True)
    p_qry.add_argument("--query", required=True)
    p_qry.add_argument(
        "--mode", default="hybrid", choices=["keyword", "graph", "vector", "hybrid"]
    )
    p_qry.add_argument("--top-g", type=int, default=3)
    p_qry.add_argument("--top-k", type=int, default=3)
    p_qry.add_argument("--depth", type=int, default=2)
    return parser


def _cmd_train(args, algos: tuple[str, ...]) -> int:
    scenario = _load_scenario_arg(args.scenario)
    cfg = _load_config(args.config, args.episodes)
    manifest = RunManifest(
        scenario_text=serialize_scenario(scenario),
        config=cfg,
        seeds=_parse_seeds(args.seeds),
        algos=algos,
        penalties=_penalties_from_args(args),
        out_dir=args.out,
    )
    out = run_experiment(manifest, scenario, device_power_w=args.device_power_w)
    print(f"run {manifest.content_hash()[:12]} written to {out}")
    return 0


def _cmd_eval(args) -> int:
    agent, scenario, cfg, algo = load_agent_checkpoint(args.checkpoint)
    env = UavMecEnv(scenario)
    log_lines: list[str] = []
    returns, carbons, penalties = [], [], []
    for ep in range(args.episodes):
        rng = np.random.default_rng(derive_seed(args.seed, 23, ep))
        state = env.reset(derive_seed(args.seed, 29, ep))
        total = carbon_kg = penalty = 0.0
        done = False
        while not done:
            slot = env.world.slot
            state, reward, done, report, violations = env.step(
                agent.act(state.normalized, rng)
            )
            total += reward
            carbon_kg += report.carbon_kg
            penalty += env.penalties.reward_scale * violations.weighted(env.penalties)
            log_lines.append(slot_log_line(slot, reward, report, violations))
        returns.append(total)
        carbons.append(carbon_kg)
        penalties.append(penalty)
    if args.episode_log:
        Path(args.episode_log).write_text(
            "\n".join(log_lines) + "\n", encoding="utf-8"
        )
    print(
        f"{algo}: episodes={args.episodes} "
        f"mean_return={np.mean(returns):.6g} "
        f"mean_carbon_kg={np.mean(carbons):.6g} "
        f"mean_penalty={np.mean(penalties):.6g}"
    )
    return 0


def _cmd_export_traj(args) -> int:
    export_trajectories(
        args.checkpoint, _parse_seeds(args.seeds), args.episodes, args.out
    )
    print(f"trajectories written to {args.out}")
    return 0


def _cmd_retrieval(args) -> int:
    if args.retrieval_command == "ingest":
        corpus = ingest_corpus(args.corpus)
        triplets = load_triplets(args.triplets) if args.triplets else []
        synonyms = (
            json.loads(Path(args.synonyms).read_text(encoding="utf-8"))
            if args.synonyms
            else {}
        )
        save_retrieval_index(args.out, corpus, triplets, synonyms)
        print(
            f"indexed {len(corpus.documents)} blocks, "
            f"{len(triplets)} triplets -> {args.out}"
        )
        return 0
    corpus, triplets, synonyms = load_retrieval_index(args.index)
    graph = build_graph(triplets)
    extractors = default_extractors(entities=graph.nodes, synonyms=synonyms)
    c_keyword: list[Document] = []
    c_graph: list[str] = []
    c_vector: list[Document] = []
    if args.mode in ("keyword", "hybrid"):
        c_keyword = keyword_retrieve(args.query, corpus, extractors, args.top_g)
    if args.mode in ("graph", "hybrid"):
        c_graph = graph_retrieve(args.query, graph, extractors, args.depth)
    if args.mode in ("vector", "hybrid"):
        embedder = TfidfEmbedder().fit([d.text for d in corpus.documents])
        c_vector = vector_retrieve(args.query, corpus, embedder, args.top_k)
    for item in fuse(c_keyword, c_graph, c_vector):
        print(f"[{'+'.join(item.sources)}] {item.key}: {item.text}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "train":
            return _cmd_train(args, (args.algo,))
        if args.command == "ablate":
            return _cmd_train(args, tuple(sorted(ABLATION_FLAGS)))
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "export-traj":
            return _cmd_export_traj(args)
        if args.command == "retrieval":
            return _cmd_retrieval(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
