"""Command-line entry point sequencing the pipeline stages.

Every stage records per-item manifests in the store, so interrupted runs
resume with --resume. Exit code is 0 on success, nonzero per failed stage.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import assemble as assemble_mod
from . import extract as extract_mod
from . import harvest as harvest_mod
from . import synthesis as synthesis_mod
from .assemble import SynthesizedInstance, dataset_stats, describe_layout, export_dataset
from .config import PipelineConfig, load_config
from .errors import PipelineError
from .evaluate import load_cases, run_benchmark
from .gateway import Gateway, HttpChatProvider, MappingProvider, RateLimiter
from .parsers import strip_fences
from .render import StubRenderer, job_from_code, render_batch
from .seal import SealedSnippet, seal_component
from .store import ArtifactStore, resume
from .synthesis import ChainEntry, VersionChain


def _sanitize(identifier: str) -> str:
    return identifier.replace("/", "_").replace(":", "-")


def _load_runtime(args) -> tuple[PipelineConfig, ArtifactStore]:
    config = load_config(args.config) if args.config else PipelineConfig()
    store_root = Path(args.store) if args.store else config.store_root
    return config, ArtifactStore(store_root)


def _build_gateway(args, config: PipelineConfig, store: ArtifactStore) -> Gateway:
    spec = args.provider
    if spec.startswith("scripted:"):
        provider = MappingProvider.from_file(spec.split(":", 1)[1])
    elif spec == "env":
        provider = HttpChatProvider(
            api_base_env=config.llm_api_base_env,
            api_key_env=config.llm_api_key_env,
            model_env=config.llm_model_env,
        )
    else:
        raise PipelineError(f"unknown provider spec {spec!r} (use env or scripted:<file>)")
    return Gateway(
        provider,
        sampling=config.sampling,
        audit_path=store.subdir("audit") / "exchanges.jsonl",
        rate_limiter=RateLimiter(args.rate_limit),
    )


def _build_renderer(args, config: PipelineConfig):
    spec = args.renderer
    if spec == "stub":
        return StubRenderer()
    if spec.startswith("sandbox:"):
        from .sandbox_driver import SandboxDriver

        return SandboxDriver(
            template_dir=spec.split(":", 1)[1],
            install_timeout=config.retry_policy.per_attempt_timeout,
            render_timeout=config.retry_policy.per_attempt_timeout,
        )
    raise PipelineError(f"unknown renderer spec {spec!r} (use stub or sandbox:<dir>)")


def _stage_manifest(store: ArtifactStore, stage: str, use_resume: bool):
    manifest = store.manifest(stage)
    if not use_resume:
        manifest.reset()
    return manifest


def _work_list(items: list[str], store: ArtifactStore, stage: str, use_resume: bool) -> list[str]:
    manifest = store.manifest(stage)
    if use_resume:
        return resume(items, manifest)
    return items


# --- stages -----------------------------------------------------------------------


def cmd_harvest(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "harvest", args.resume)
    if args.records:
        raw = json.loads(Path(args.records).read_text(encoding="utf-8"))
        records = [harvest_mod.RepoRecord(**item) for item in raw]
    else:
        client = harvest_mod.GithubSearchClient(config)
        records = []
        cursor = None
        keywords = args.keywords or config.search_keywords
        while True:
            page, cursor = harvest_mod.search_repos(
                client, keywords, cursor, fetch_readmes=args.fetch_readmes
            )
            records.extend(page)
            if cursor is None or len(records) >= args.max_repos:
                break
        records = records[: args.max_repos]

    accepted, rejected = harvest_mod.partition_records(records, config)
    print(f"harvest: {len(accepted)} accepted, {len(rejected)} rejected")
    for record, verdict in rejected:
        manifest.mark_failed(record.full_name, detail=";".join(verdict.reasons))

    if args.tarball_dir:
        fetcher = harvest_mod.LocalTarballFetcher(args.tarball_dir)
    else:
        fetcher = harvest_mod.GithubTarballFetcher(config)
    work = _work_list([r.full_name for r in accepted], store, "harvest", args.resume)
    by_name = {r.full_name: r for r in accepted}

    def fetch_one(full_name):
        try:
            snapshot = harvest_mod.fetch_repo(
                by_name[full_name], fetcher, store, max_file_bytes=config.max_source_file_bytes
            )
        except PipelineError as exc:
            manifest.mark_failed(full_name, detail=str(exc))
            return full_name, None, exc
        manifest.mark_done(full_name, artifacts=[snapshot.digest], detail=str(snapshot.root))
        return full_name, snapshot, None

    failures = 0
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        for full_name, snapshot, error in pool.map(fetch_one, work):
            if error is not None:
                print(f"  fetch failed {full_name}: {error}", file=sys.stderr)
                failures += 1
            else:
                print(
                    f"  fetched {full_name} -> {snapshot.digest[:12]} "
                    f"({len(snapshot.files)} files)"
                )
    return 1 if failures and not args.keep_going else 0


def _snapshot_dirs(store: ArtifactStore) -> list[Path]:
    repos = store.root / "repos"
    if not repos.is_dir():
        return []
    return sorted(p for p in repos.iterdir() if p.is_dir())


def cmd_extract(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "extract", args.resume)
    gateway = None
    if args.validate_budget > 0:
        gateway = _build_gateway(args, config, store)
    snapshots = _snapshot_dirs(store)
    work = _work_list([p.name for p in snapshots], store, "extract", args.resume)
    out_dir = store.subdir("components")
    total = 0
    for digest in work:
        snapshot_dir = store.root / "repos" / digest
        files = extract_mod.scan_sources(snapshot_dir)
        file_map = {f.path: f for f in files}
        components = []
        closures = {}
        for file in files:
            detected = extract_mod.detect_components(file)
            if gateway is not None:
                detected = extract_mod.validate_components(
                    detected, file, gateway, args.validate_budget
                )
            for comp in detected:
                closure = extract_mod.resolve_dependencies(comp, file_map)
                components.append(comp)
                closures[comp.id] = closure
        report = extract_mod.extraction_report(files, components)
        payload = {
            "snapshot": digest,
            "report": report,
            "components": [vars(c) for c in components],
            "closures": {cid: vars(cl) for cid, cl in closures.items()},
        }
        (out_dir / f"{digest}.components.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True, default=list)
        )
        manifest.mark_done(digest, detail=f"{len(components)} components")
        total += len(components)
        print(f"extract: {digest[:12]} -> {len(components)} components")
    print(f"extract: {total} components total")
    return 0


def cmd_seal(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "seal", args.resume)
    gateway = _build_gateway(args, config, store)
    components_dir = store.root / "components"
    if not components_dir.is_dir():
        print("seal: nothing extracted yet", file=sys.stderr)
        return 1
    jobs = []
    for payload_path in sorted(components_dir.glob("*.components.json")):
        payload = json.loads(payload_path.read_text(encoding="utf-8"))
        for comp in payload["components"]:
            jobs.append((payload["snapshot"], comp, payload["closures"][comp["id"]]))
    work = _work_list([c["id"] for _, c, _ in jobs], store, "seal", args.resume)
    wanted = set(work)
    sealed = failed = 0
    for digest, comp_dict, closure_dict in jobs:
        if comp_dict["id"] not in wanted:
            continue
        snapshot_dir = store.root / "repos" / digest
        files = {f.path: f for f in extract_mod.scan_sources(snapshot_dir)}
        component = extract_mod.RawComponent(**{**comp_dict, "span": tuple(comp_dict["span"])})
        closure = extract_mod.DependencyClosure(
            component_id=closure_dict["component_id"],
            local_imports=closure_dict["local_imports"],
            package_imports=closure_dict["package_imports"],
            style_refs=closure_dict["style_refs"],
            needed=closure_dict["needed"],
            unresolved=closure_dict["unresolved"],
            cycles=closure_dict["cycles"],
        )
        try:
            snippet = seal_component(
                component,
                closure,
                files,
                gateway=gateway,
                correction_budget=args.correction_budget,
                repo=digest,
            )
        except PipelineError as exc:
            manifest.mark_failed(component.id, detail=str(exc))
            failed += 1
            continue
        snippet.write_files(store.subdir("snippets", _sanitize(snippet.id)))
        manifest.mark_done(component.id, detail=snippet.id)
        sealed += 1
    print(f"seal: {sealed} sealed, {failed} failed")
    return 0


def _load_snippets(store: ArtifactStore, only: list[str] | None = None) -> list[SealedSnippet]:
    snippets_dir = store.root / "snippets"
    if not snippets_dir.is_dir():
        return []
    out = []
    for directory in sorted(snippets_dir.iterdir()):
        if not (directory / "snippet.json").exists():
            continue
        snippet = SealedSnippet.read_files(directory)
        if only and snippet.id not in only:
            continue
        out.append(snippet)
    return out


def _save_draft(store: ArtifactStore, draft: SynthesizedInstance) -> None:
    path = store.subdir("drafts") / f"{_sanitize(draft.id)}.json"
    path.write_text(json.dumps(draft.to_dict(), indent=2, sort_keys=True))


def _save_chain(store: ArtifactStore, name: str, chain: VersionChain) -> None:
    path = store.subdir("chains") / f"{_sanitize(name)}.json"
    path.write_text(
        json.dumps([vars(e) for e in chain.entries], indent=2, sort_keys=True)
    )


def cmd_synthesize(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "synthesize", args.resume)
    gateway = _build_gateway(args, config, store)
    params = config.synthesis
    if args.strategy:
        params.strategy = args.strategy
    seeds = _load_snippets(store, args.seeds or None)
    if not seeds:
        print("synthesize: no sealed seeds available", file=sys.stderr)
        return 1
    work = _work_list([s.id for s in seeds], store, "synthesize", args.resume)
    wanted = set(work)
    total = 0
    for seed in seeds:
        if seed.id not in wanted:
            continue
        checkpoint_path = store.subdir("synthesis_state") / f"{_sanitize(seed.id)}-{params.strategy}.json"

        def save_checkpoint(stage, payload):
            checkpoint_path.write_text(json.dumps(payload, indent=2, sort_keys=True))

        restore = None
        if args.resume and checkpoint_path.exists():
            restore = json.loads(checkpoint_path.read_text(encoding="utf-8"))
        try:
            if params.strategy == "evolution":
                result = synthesis_mod.evolve(seed, params, gateway)
                drafts = result.drafts
            elif params.strategy == "waterfall":
                state, drafts = synthesis_mod.waterfall_run(
                    seed,
                    params,
                    gateway,
                    checkpoint=synthesis_mod.Checkpointer(save_checkpoint),
                    restore=restore,
                )
                _save_chain(store, f"{seed.id}-waterfall", state.chain)
            else:
                chain, drafts = synthesis_mod.additive_run(seed, params, gateway)
                _save_chain(store, f"{seed.id}-additive", chain)
        except PipelineError as exc:
            manifest.mark_failed(seed.id, detail=str(exc))
            print(f"  {params.strategy} failed for {seed.id}: {exc}", file=sys.stderr)
            continue
        for draft in drafts:
            _save_draft(store, draft)
        manifest.mark_done(seed.id, detail=f"{len(drafts)} drafts")
        total += len(drafts)
        print(f"synthesize[{params.strategy}]: {seed.id} -> {len(drafts)} drafts")
    print(f"synthesize: {total} drafts total")
    return 0


def _load_drafts(store: ArtifactStore) -> list[SynthesizedInstance]:
    drafts_dir = store.root / "drafts"
    if not drafts_dir.is_dir():
        return []
    out = []
    for path in sorted(drafts_dir.glob("*.json")):
        out.append(SynthesizedInstance(**json.loads(path.read_text(encoding="utf-8"))))
    return out


def _render_targets(store: ArtifactStore, include_seeds: bool) -> list[SynthesizedInstance]:
    targets = _load_drafts(store)
    if include_seeds:
        for snippet in _load_snippets(store):
            targets.append(
                SynthesizedInstance(
                    id=snippet.id,
                    strategy="seed",
                    component_code=snippet.component_code,
                    style_code=snippet.style_code,
                    no_style=snippet.no_style,
                    lineage={"seed_id": snippet.id, "parent_id": None},
                )
            )
    return targets


def cmd_render(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "render", args.resume)
    gateway = _build_gateway(args, config, store) if args.provider != "none" else None
    renderer = _build_renderer(args, config)
    targets = _render_targets(store, args.include_seeds)
    if not targets:
        print("render: nothing to render", file=sys.stderr)
        return 1
    work = _work_list([t.id for t in targets], store, "render", args.resume)
    wanted = set(work)
    outcome_dir = store.subdir("outcomes")
    jobs = [
        job_from_code(t.id, t.style_code, t.component_code)
        for t in targets
        if t.id in wanted
    ]
    outcomes = render_batch(
        jobs, config.retry_policy, gateway, renderer, store,
        parallelism=config.parallelism,
    )
    failures = 0
    for outcome in outcomes:
        (outcome_dir / f"{_sanitize(outcome.snippet_id)}.json").write_text(
            json.dumps(vars(outcome), indent=2, sort_keys=True)
        )
        if outcome.success:
            manifest.mark_done(outcome.snippet_id, artifacts=[outcome.screenshot_hash])
            _update_chain_screenshot(store, outcome.snippet_id, outcome.screenshot_hash)
        else:
            manifest.mark_failed(outcome.snippet_id, detail=outcome.status)
            failures += 1
        print(f"render: {outcome.snippet_id} -> {outcome.status}")
    print(f"render: {failures} failures")
    return 0


def _update_chain_screenshot(store: ArtifactStore, instance_id: str, digest: str) -> None:
    chains_dir = store.root / "chains"
    if not chains_dir.is_dir():
        return
    for path in chains_dir.glob("*.json"):
        entries = json.loads(path.read_text(encoding="utf-8"))
        changed = False
        for entry in entries:
            if entry["instance_id"] == instance_id and entry.get("screenshot_hash") != digest:
                entry["screenshot_hash"] = digest
                changed = True
        if changed:
            path.write_text(json.dumps(entries, indent=2, sort_keys=True))


def _outcome_for(store: ArtifactStore, instance_id: str):
    path = store.root / "outcomes" / f"{_sanitize(instance_id)}.json"
    if not path.exists():
        return None
    from .render import RenderOutcome

    return RenderOutcome(**json.loads(path.read_text(encoding="utf-8")))


def cmd_describe(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "describe", args.resume)
    gateway = _build_gateway(args, config, store)
    targets = _render_targets(store, args.include_seeds)
    descriptions_dir = store.subdir("descriptions")
    work = _work_list([t.id for t in targets], store, "describe", args.resume)
    wanted = set(work)
    done = failed = 0
    for target in targets:
        if target.id not in wanted:
            continue
        outcome = _outcome_for(store, target.id)
        if outcome is None or not outcome.success:
            continue
        try:
            text = describe_layout(
                store.get(outcome.screenshot_hash),
                target.component_code,
                target.style_code,
                gateway,
            )
        except PipelineError as exc:
            manifest.mark_failed(target.id, detail=str(exc))
            failed += 1
            continue
        (descriptions_dir / f"{_sanitize(target.id)}.txt").write_text(text, encoding="utf-8")
        manifest.mark_done(target.id)
        done += 1
    print(f"describe: {done} descriptions, {failed} failures")
    return 0 if failed == 0 else 1


def cmd_assemble(args) -> int:
    config, store = _load_runtime(args)
    manifest = _stage_manifest(store, "assemble", args.resume)
    targets = _render_targets(store, args.include_seeds)
    instances_dir = store.subdir("instances")
    complete: list[SynthesizedInstance] = []
    for target in targets:
        outcome = _outcome_for(store, target.id)
        desc_path = store.root / "descriptions" / f"{_sanitize(target.id)}.txt"
        if outcome is None or not outcome.success or not desc_path.exists():
            continue
        try:
            instance = assemble_mod.assemble(
                target, outcome, desc_path.read_text(encoding="utf-8")
            )
        except PipelineError as exc:
            manifest.mark_failed(target.id, detail=str(exc))
            continue
        (instances_dir / f"{_sanitize(instance.id)}.json").write_text(
            json.dumps(instance.to_dict(), indent=2, sort_keys=True)
        )
        manifest.mark_done(target.id)
        complete.append(instance)
    print(f"assemble: {len(complete)} complete instances")
    stats = dataset_stats(complete)
    (store.root / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True))

    if args.recipe:
        out_dir = Path(args.out) if args.out else store.root / "dataset"
        multi_entries = None
        if args.recipe == "multi_image":
            multi_entries = _derive_all_chain_entries(store)
        written = export_dataset(
            complete, args.recipe, out_dir, store, multi_entries=multi_entries
        )
        print(f"export[{args.recipe}]: {written}")
    return 0


def _derive_all_chain_entries(store: ArtifactStore):
    entries = []
    chains_dir = store.root / "chains"
    if not chains_dir.is_dir():
        return entries
    for path in sorted(chains_dir.glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        chain = VersionChain(entries=[ChainEntry(**e) for e in raw])
        if len(chain) < 2:
            continue
        derived, skips = synthesis_mod.derive_multi_image_pairs(chain)
        entries.extend(derived)
        for skip in skips:
            print(f"  multi-image skip: {skip}")
    return entries


def cmd_eval(args) -> int:
    config, store = _load_runtime(args)
    cases = load_cases(args.benchmark)
    renderer = _build_renderer(args, config)
    if args.provider.startswith("scripted:"):
        solutions = json.loads(Path(args.provider.split(":", 1)[1]).read_text())["solutions"]
        counter = {"i": 0}

        def provider(instruction, image, sampling):
            code = solutions[counter["i"] % len(solutions)]
            counter["i"] += 1
            return code

    elif args.provider == "env":
        http = HttpChatProvider(
            api_base_env=config.llm_api_base_env,
            api_key_env=config.llm_api_key_env,
            model_env=config.llm_model_env,
        )

        def provider(instruction, image, sampling):
            return strip_fences(http.chat(instruction, sampling, images=[image]))

    else:
        raise PipelineError(f"unknown provider spec {args.provider!r}")

    eval_params = config.eval_params
    if args.n_samples:
        eval_params.n_samples = args.n_samples
    if args.k:
        eval_params.ks = args.k
    report = run_benchmark(
        cases,
        provider,
        renderer,
        store,
        similarity_policy=config.similarity,
        eval_params=eval_params,
        sampling=config.sampling,
    )
    out_path = Path(args.out) if args.out else store.root / "eval_report.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_json(), encoding="utf-8")
    print(report.table())
    print(f"eval: report written to {out_path}")
    return 0


# --- argument wiring -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fesynth",
        description="React data-synthesis pipeline: harvest, seal, synthesize, render, evaluate.",
    )
    parser.add_argument("--config", help="YAML config path (defaults apply when omitted)")
    parser.add_argument("--store", help="artifact store root (overrides config)")
    parser.add_argument("--resume", action="store_true", help="skip items already done")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--provider", default="env", help="env | scripted:<file> | none")
        p.add_argument("--rate-limit", type=float, default=None, help="gateway calls/second")
        return p

    p = add("harvest", cmd_harvest, help="search, filter, and snapshot repositories")
    p.add_argument("--keywords", nargs="*", help="search keywords (default from config)")
    p.add_argument("--max-repos", type=int, default=50)
    p.add_argument("--fetch-readmes", action="store_true")
    p.add_argument("--records", help="JSON file of repo records (offline mode)")
    p.add_argument("--tarball-dir", help="local tarball directory (offline mode)")
    p.add_argument("--keep-going", action="store_true")

    p = add("extract", cmd_extract, help="detect components and resolve closures")
    p.add_argument("--validate-budget", type=int, default=0, help="agent validation calls")

    p = add("seal", cmd_seal, help="inline dependencies and seal snippets")
    p.add_argument("--correction-budget", type=int, default=3)

    p = add("synthesize", cmd_synthesize, help="run a synthesis strategy over seeds")
    p.add_argument("--strategy", choices=["evolution", "waterfall", "additive"])
    p.add_argument("--seeds", nargs="*", help="seed snippet ids (default: all)")

    p = add("render", cmd_render, help="render snippets and capture screenshots")
    p.add_argument("--renderer", default="stub", help="stub | sandbox:<template-dir>")
    p.add_argument("--include-seeds", action="store_true")

    p = add("describe", cmd_describe, help="generate layout descriptions")
    p.add_argument("--include-seeds", action="store_true")

    p = add("assemble", cmd_assemble, help="bind instances and export datasets")
    p.add_argument("--include-seeds", action="store_true")
    p.add_argument("--recipe", choices=["IC", "C", "middle", "multi_image"])
    p.add_argument("--out", help="dataset output directory")

    p = add("eval", cmd_eval, help="run the visual pass@k benchmark")
    p.add_argument("--benchmark", required=True, help="benchmark cases directory")
    p.add_argument("--renderer", default="stub", help="stub | sandbox:<template-dir>")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--k", type=int, nargs="*")
    p.add_argument("--out", help="report output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
