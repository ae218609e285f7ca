"""Command-line entry point: record, generate, verify, train, eval-policies, render, demo.

Exit codes: 0 success, 2 verification or separation failure, 3 missing
inputs, 64 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import config as C
from .datastore import (
    DatastoreError, StoredReport, load_artifacts, load_corpus, load_program, load_report,
    save_artifacts, save_corpus, save_json, save_report,
)
from .gridworld import InvalidSpec, PolicyKind, make_env, policy_rollout
from .gridworld.envs import PushEnv
from .rewardlang import Kind, ParseError
from .rewarder import assemble
from .trainer import InvalidConfig as TrainConfigError
from .trainer import TrainConfig, aggregate, train
from .verifier import InvalidConfig as VerifierConfigError
from .verifier import VerifierConfig, evaluate_separation, verify_artifacts
from .vlm import (
    BackendError, MaxAttemptsExceeded, PipelineConfig, TrajectoryVerifier, make_backend,
    run_robotic_pipeline, run_task_pipeline,
)

OK, FAILED, MISSING, USAGE = 0, 2, 3, 64
ROBOT_AGENT = "blue disc"

log = logging.getLogger("codereward")


class UsageError(Exception):
    pass


class MissingInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _settings(args, **flags) -> C.Settings:
    merged = C.parse_overrides(args.set or [])
    merged.update({k: v for k, v in flags.items() if v is not None})
    return C.resolve(args.config, None, merged)


def _env(s: C.Settings):
    try:
        return make_env(s.env, tile_px=s.tile_px, layout_seed=s.layout_seed)
    except InvalidSpec as e:
        raise UsageError(str(e)) from None


def _verifier_config(s: C.Settings) -> VerifierConfig:
    horizon = int(s.random_horizon) if s.random_horizon.isdigit() else s.random_horizon
    try:
        return VerifierConfig(n_expert=s.n_expert, n_random=s.n_random, p=s.p, p_units=s.p_units,
                              goal_recency_x=s.goal_recency_x, random_horizon=horizon,
                              fuel=s.fuel, workers=s.workers)
    except VerifierConfigError as e:
        raise UsageError(str(e)) from None


def _corpus(path: Path | None, env):
    if path is None or not path.is_dir():
        raise MissingInput(f"corpus directory {path} not found")
    trajs = load_corpus(path)
    experts = [t for t in trajs if t.label == "expert"]
    randoms = [t for t in trajs if t.label == "random"]
    if not experts or not randoms:
        raise MissingInput(f"{path} needs both expert and random trajectories")
    for t in trajs:
        if t.spec_hash != env.spec_hash:
            raise MissingInput(f"{path}: trajectory {t.label}/{t.seed} was recorded on a different environment")
    return experts, randoms


# -- subcommands --------------------------------------------------------------

def cmd_record(args) -> int:
    s = _settings(args, env=args.env)
    env = _env(s)
    if args.count < 1:
        raise UsageError("count must be >= 1")
    trajs = [policy_rollout(env, args.policy, args.seed + i) for i in range(args.count)]
    save_corpus(trajs, args.out)
    C.echo(s, args.out, "record", vars(args))
    print(f"recorded {len(trajs)} {args.policy} trajectories in {args.out}")
    return OK


def _generate(s: C.Settings, env, experts, randoms, out: Path, backend_kind: str,
              session: Path | None) -> int:
    robotic = isinstance(env, PushEnv)
    agent = s.agent_description
    if robotic and agent == C.Settings.agent_description:
        agent = ROBOT_AGENT  # the gridworld default does not describe the pusher
    cfg = PipelineConfig(n=s.n, agent_description=agent, max_attempts=s.max_attempts,
                         simplify_after=s.simplify_after, backend=backend_kind, robotic=robotic)
    backend = make_backend(backend_kind, s.env, session, s.endpoint, s.model, s.timeout)
    vcfg = _verifier_config(s)
    verify = TrajectoryVerifier(experts, randoms, vcfg)
    run = run_robotic_pipeline if robotic else run_task_pipeline
    initial, goal = experts[0].frames[0], experts[0].frames[-1]
    out.mkdir(parents=True, exist_ok=True)
    try:
        art = run(initial, goal, cfg, verify, backend, s.env, out / "session.jsonl")
    except MaxAttemptsExceeded as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return FAILED
    save_artifacts(art, out)
    report = verify_artifacts(art.checkers, art.goal, experts, randoms, vcfg, art.subtasks)
    save_report(report, out / "report.json")
    print(f"generated {art.n} checkers; verification {'passed' if report.passed else 'FAILED'}")
    return OK if report.passed else FAILED


def cmd_generate(args) -> int:
    s = _settings(args, env=args.env, backend=args.backend, n=args.n)
    env = _env(s)
    if s.backend == "replay" and (args.session is None or not args.session.is_file()):
        raise MissingInput(f"session log {args.session} not found")
    experts, randoms = _corpus(args.corpus, env)
    session = None
    if args.session is not None:
        # read the recording before the output log can overwrite it
        from .datastore import load_session
        session = load_session(args.session)
    C.echo(s, args.out, "generate", vars(args))
    return _generate(s, env, experts, randoms, args.out, s.backend, session)


def cmd_verify(args) -> int:
    if not (args.artifacts / "artifacts.json").is_file():
        raise MissingInput(f"no artifacts in {args.artifacts}")
    art = load_artifacts(args.artifacts)
    s = _settings(args, env=art.env_id, p=args.p, goal_recency_x=args.x)
    env = _env(s)
    vcfg = _verifier_config(s)
    experts, randoms = _corpus(args.corpus, env)
    report = verify_artifacts(art.checkers, art.goal, experts, randoms, vcfg, art.subtasks)
    out = args.out or args.artifacts
    save_report(report, out / "report.json")
    C.echo(s, out, "verify", vars(args))
    for r in report.subtasks + ([report.goal] if report.goal else []):
        print(f"{r.description}: {'pass' if r.passed else 'FAIL'} "
              f"(random rate {r.random_completion_rate:.3f}) {r.reason}")
    if report.goal_recency is not None:
        print(f"goal recency: {'pass' if report.goal_recency.passed else 'FAIL'} {report.goal_recency.reason}")
    return OK if report.passed else FAILED


def cmd_train(args) -> int:
    s = _settings(args, env=args.env, total_steps=args.budget, seeds=args.seeds)
    env = _env(s)
    if isinstance(env, PushEnv):
        raise UsageError("tabular training supports gridworld environments only")
    if s.seeds < 1:
        raise UsageError("seeds must be >= 1")
    modes = ["dense", "sparse"] if args.reward == "both" else [args.reward]
    art = stored = None
    if "dense" in modes:
        if args.artifacts is None or not (args.artifacts / "artifacts.json").is_file():
            raise MissingInput("dense training needs --artifacts with a passing report.json")
        art = load_artifacts(args.artifacts)
        if not (args.artifacts / "report.json").is_file():
            raise MissingInput(f"no report.json in {args.artifacts}")
        stored = StoredReport(load_report(args.artifacts / "report.json"))
        if not stored.passed:
            print("artifacts did not pass verification", file=sys.stderr)
            return FAILED
    args.out.mkdir(parents=True, exist_ok=True)
    C.echo(s, args.out, "train", vars(args))
    summary = {}
    for mode in modes:
        results = []
        for seed in range(s.seed, s.seed + s.seeds):
            try:
                cfg = TrainConfig(total_steps=s.total_steps, alpha=s.alpha, gamma=s.gamma, eps_end=s.eps_end,
                                  eval_every=s.eval_every, seed=seed)
            except TrainConfigError as e:
                raise UsageError(str(e)) from None
            source = "sparse" if mode == "sparse" else assemble(art, stored, fuel=s.fuel)
            _, res = train(env, source, cfg)
            (args.out / f"{mode}_seed{seed}.csv").write_text(res.curve_csv(), "utf-8")
            (args.out / f"{mode}_seed{seed}.json").write_text(res.to_json() + "\n", "utf-8")
            results.append(res)
            print(f"{mode} seed {seed}: final success {res.final_success_rate:.2f}")
        agg = aggregate(results)
        lines = ["step,mean_return,return_se,success_rate,success_se"]
        lines += [f"{a['step']},{a['mean_return']:.6f},{a['return_se']:.6f},{a['success_rate']:.6f},"
                  f"{a['success_se']:.6f}" for a in agg]
        (args.out / f"{mode}_curve.csv").write_text("\n".join(lines) + "\n", "utf-8")
        summary[mode] = [r.final_success_rate for r in results]
    save_json({"final_success": summary}, args.out / "summary.json")
    return OK


def cmd_eval_policies(args) -> int:
    s = _settings(args, env=args.env, k=args.k)
    if s.k < 1:
        raise UsageError("k must be >= 1")
    env = _env(s)
    if not args.program.is_file():
        raise MissingInput(f"program {args.program} not found")
    try:
        program = load_program(args.program, Kind.REWARD)
    except ParseError as e:
        raise UsageError(f"{args.program}: {e}") from None
    report = evaluate_separation(program, env, k=s.k, seed_base=s.seed, fuel=s.fuel)
    out = args.out or Path(".")
    save_report(report, out / "separation.json")
    C.echo(s, out, "eval-policies", vars(args))
    for p in report.policies:
        print(f"{p.policy:>10}: mean {p.mean:.4f} (se {p.sem:.4f}, n={p.n})")
    print(f"ordering {'ok' if report.ordering_ok else 'FAIL'}; separation {'ok' if report.separation_ok else 'FAIL'}")
    return OK if report.passed else FAILED


def cmd_render(args) -> int:
    s = _settings(args, env=args.env)
    env = _env(s)
    from PIL import Image
    args.out.mkdir(parents=True, exist_ok=True)
    if args.policy is None:
        frames = [env.render(env.reset(args.seed))]
    else:
        frames = policy_rollout(env, args.policy, args.seed).frames
    for i, f in enumerate(frames):
        Image.fromarray(f.pixels, "RGB").save(args.out / f"frame_{i:06d}.png")
    print(f"wrote {len(frames)} frame(s) to {args.out}")
    return OK


def cmd_demo(args) -> int:
    s = _settings(args, env=args.env, total_steps=args.budget, seeds=args.seeds)
    env = _env(s)
    out: Path = args.out
    corpus = out / "corpus"
    save_corpus([policy_rollout(env, "expert", i) for i in range(s.n_expert)], corpus)
    save_corpus([policy_rollout(env, "random", 1000 + i) for i in range(s.n_random)], corpus)
    experts, randoms = _corpus(corpus, env)
    C.echo(s, out, "demo", vars(args))
    code = _generate(s, env, experts, randoms, out / "artifacts", "oracle", None)
    if code != OK or isinstance(env, PushEnv):
        return code
    targs = argparse.Namespace(config=args.config, set=args.set, env=s.env, budget=s.total_steps, seeds=s.seeds,
                               reward="both", artifacts=out / "artifacts", out=out / "train")
    return cmd_train(targs)


# -- wiring ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="codereward", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    r = sub.add_parser("record", help="roll out a scripted policy and save trajectories")
    common(r)
    r.add_argument("--env")
    r.add_argument("--policy", required=True, choices=[k.value for k in PolicyKind])
    r.add_argument("--count", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", type=Path, required=True)
    r.set_defaults(fn=cmd_record)

    g = sub.add_parser("generate", help="run the prompting pipeline and verify its programs")
    common(g)
    g.add_argument("--env")
    g.add_argument("--backend", choices=["oracle", "replay", "live"])
    g.add_argument("--n", type=int)
    g.add_argument("--corpus", type=Path, required=True)
    g.add_argument("--session", type=Path, help="recorded session log (replay backend)")
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(fn=cmd_generate)

    v = sub.add_parser("verify", help="verify saved artifacts against a corpus")
    common(v)
    v.add_argument("--artifacts", type=Path, required=True)
    v.add_argument("--corpus", type=Path, required=True)
    v.add_argument("--p", type=float)
    v.add_argument("--x", type=int)
    v.add_argument("--out", type=Path)
    v.set_defaults(fn=cmd_verify)

    t = sub.add_parser("train", help="tabular Q-learning with sparse and/or dense rewards")
    common(t)
    t.add_argument("--env")
    t.add_argument("--reward", choices=["dense", "sparse", "both"], default="both")
    t.add_argument("--artifacts", type=Path)
    t.add_argument("--budget", type=int)
    t.add_argument("--seeds", type=int)
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval-policies", help="score a reward program on four scripted policies")
    common(e)
    e.add_argument("--program", type=Path, required=True)
    e.add_argument("--env")
    e.add_argument("--k", type=int)
    e.add_argument("--out", type=Path)
    e.set_defaults(fn=cmd_eval_policies)

    d = sub.add_parser("render", help="write rendered frames as PNG")
    common(d)
    d.add_argument("--env")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--policy", choices=[k.value for k in PolicyKind])
    d.add_argument("--out", type=Path, required=True)
    d.set_defaults(fn=cmd_render)

    m = sub.add_parser("demo", help="record, generate (oracle), verify and train in one go")
    common(m)
    m.add_argument("--env")
    m.add_argument("--budget", type=int)
    m.add_argument("--seeds", type=int, default=1)
    m.add_argument("--out", type=Path, required=True)
    m.set_defaults(fn=cmd_demo)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, C.ConfigError, ValueError) as e:
        print(f"codereward: usage error: {e}", file=sys.stderr)
        return USAGE
    except MissingInput as e:
        print(f"codereward: missing input: {e}", file=sys.stderr)
        return MISSING
    except BackendError as e:
        print(f"codereward: backend error: {e}", file=sys.stderr)
        return MISSING
    except DatastoreError as e:
        print(f"codereward: {e}", file=sys.stderr)
        return MISSING


if __name__ == "__main__":
    sys.exit(main())
