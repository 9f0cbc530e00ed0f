"""Command-line entry point wiring the library together.

Subcommands: ``table1`` (worked-example verification), ``verify``
(cross-module property suites), ``gen-data`` (semi-synthetic
attractiveness), ``run`` (optimize/evaluate methods over a corpus) and
``length-profile`` (per-slot length distribution of a run's decodes).

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time

import numpy as np

from .core import AttractTable, Placement, RankingConfig, ScoreTable, VarRanking
from .exposure import resolve_exposure
from .objective import expected_attractiveness_mc, ranking_reward
from .optimize import (
    AdamParams,
    Scorer,
    greedy_decode,
    postprocess_optimize,
    train_inprocess,
    train_relevance_head,
)
from .baselines import greedy_layout, slot_avg_layout, sort_fixed_length
from .seeding import derive_seed, stable_qid_key
from .synthdata import (
    DEFAULT_MAX_DOCS,
    QueryInstance,
    generate_attractiveness,
    make_bins,
    parse_letor,
    read_attract_file,
    write_attract_file,
)
from .verify import SCOPES, check_table1, run_scopes

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3

POST_METHODS = {"vlpl1-post": "vlpl1", "vlpl2-post": "vlpl2"}
IN_METHODS = {"vlpl1-in": "vlpl1", "vlpl2-in": "vlpl2"}


def cmd_table1(args) -> int:
    t0 = time.perf_counter()
    results = check_table1()
    ok = all(r["passed"] for r in results)
    for r in results:
        mark = "OK  " if r["passed"] else "FAIL"
        print(f"{mark} {r['name']}: got={r['stat']} want={r['expected']}")
    print(f"{'PASS' if ok else 'FAIL'} table1 ({time.perf_counter() - t0:.3f}s)")
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def cmd_verify(args) -> int:
    scopes = args.scope or ["table1", "sampler", "gradients", "agreement",
                            "reduction", "tailshare", "witnesses"]
    params = {"seed": args.seed}
    if args.inject_fault:
        if args.inject_fault != "gradient-bias":
            raise ValueError(f"unknown fault {args.inject_fault!r}")
        params["fault"] = 0.05
    t0 = time.perf_counter()
    results = run_scopes(scopes, params)
    failures = [r for r in results if not r["passed"]]
    for r in results:
        mark = "PASS" if r["passed"] else "FAIL"
        print(f"{mark} {r['name']} stat={r['stat']}")
    summary = {
        "scopes": scopes,
        "seed": args.seed,
        "injected_fault": args.inject_fault,
        "n_checks": len(results),
        "n_failed": len(failures),
        "results": results,
    }
    if args.out:
        # Wall time goes to the console, not the file, so repeated runs
        # with the same seed produce byte-identical outputs.
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=str)
    print(f"{len(results) - len(failures)}/{len(results)} checks passed "
          f"({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK if not failures else EXIT_VERIFY_FAIL


def cmd_gen_data(args) -> int:
    queries, report = parse_letor(args.letor, max_docs=args.max_docs)
    scheme = make_bins(args.scheme, args.max_len)
    queries = generate_attractiveness(queries, args.max_len, scheme, args.seed)
    meta = {
        "source_letor": os.path.relpath(args.letor, os.path.dirname(args.out) or "."),
        "scheme": args.scheme,
        "max_len": args.max_len,
        "seed": args.seed,
        "max_docs": args.max_docs,
        "parse_report": report,
    }
    write_attract_file(queries, args.out, meta)
    print(
        f"wrote {args.out}: {len(queries)} queries "
        f"({report['skipped_queries']} skipped over {args.max_docs} docs)"
    )
    return EXIT_OK


def _load_run_dataset(data_path: str):
    """Load the generated attractiveness file, re-parse its source corpus
    and attach the tables."""
    tables, meta = read_attract_file(data_path)
    letor = meta["source_letor"]
    if not os.path.isabs(letor):
        letor = os.path.join(os.path.dirname(data_path) or ".", letor)
    queries, _ = parse_letor(letor, max_docs=meta.get("max_docs", DEFAULT_MAX_DOCS))
    out = []
    for q in queries:
        if q.qid not in tables:
            continue
        entry = tables[q.qid]
        if entry["attract"].values.shape[0] != q.num_docs:
            raise ValueError(
                f"query {q.qid}: {q.num_docs} docs in corpus but "
                f"{entry['attract'].values.shape[0]} attractiveness rows"
            )
        out.append(
            QueryInstance(
                qid=q.qid, features=q.features, labels=q.labels,
                attract=entry["attract"], reordered=entry["reordered"],
            )
        )
    return out, meta


def _plr_restricted(exposure, slots: int, fixed_len: int):
    """Single-length view of an instance: position i of the restricted
    ranking sits at slot (i-1)*l + 1 of the full one."""
    from .exposure import load_exposure_table

    depth = slots // fixed_len
    weights = {
        (i, 1): exposure.lookup((i - 1) * fixed_len + 1, fixed_len)
        for i in range(1, depth + 1)
    }
    return depth, load_exposure_table(weights, slots=depth, max_len=1)


def _expand_plr_ranking(ranking: VarRanking, fixed_len: int) -> VarRanking:
    return VarRanking(tuple(Placement(p.doc, fixed_len) for p in ranking.items))


def _query_result(task):
    """Evaluate one (query, method) pair; pure function of its arguments."""
    (qid, features, attract_true, attract_hat, method, slots, max_len,
     exposure, n_samples, steps, seed, eval_samples, scorer_payload, post_lr) = task
    config = RankingConfig(attract_true.values.shape[0], slots, max_len)
    qkey = stable_qid_key(qid)
    if method in POST_METHODS:
        scores, decode = postprocess_optimize(
            attract_hat, exposure, config, hyper=AdamParams(lr=post_lr),
            estimator=POST_METHODS[method], steps=steps, n_samples=n_samples,
            seed=derive_seed(seed, qkey),
        )
        ea = expected_attractiveness_mc(
            scores, attract_true, exposure, config, eval_samples, derive_seed(seed, qkey, 1)
        ).value
    elif method in IN_METHODS or method.startswith("plr3-"):
        scorer = Scorer.__new__(Scorer)
        scorer.__dict__.update(scorer_payload["attrs"])
        scorer.params = [np.asarray(p) for p in scorer_payload["params"]]
        if method.startswith("plr3-"):
            fixed_len = int(method.split("-")[1])
            depth, exp_r = _plr_restricted(exposure, slots, fixed_len)
            config_r = RankingConfig(config.num_docs, depth, 1)
            scores = ScoreTable(scorer.scores(features))
            decode_r = greedy_decode(scores, config_r)
            decode = _expand_plr_ranking(decode_r, fixed_len)
            rho_r = AttractTable(attract_true.values[:, fixed_len - 1 : fixed_len])
            ea = expected_attractiveness_mc(
                scores, rho_r, exp_r, config_r, eval_samples, derive_seed(seed, qkey, 1)
            ).value
        else:
            scores = ScoreTable(scorer.scores(features))
            decode = greedy_decode(scores, config)
            ea = expected_attractiveness_mc(
                scores, attract_true, exposure, config, eval_samples, derive_seed(seed, qkey, 1)
            ).value
    elif method.startswith("sort-"):
        fixed_len = int(method.split("-")[1])
        decode = sort_fixed_length(attract_hat, fixed_len, exposure, config)
        ea = None
    elif method == "greedy":
        decode = greedy_layout(attract_hat, exposure, config)
        ea = None
    elif method == "slot-avg":
        decode = slot_avg_layout(attract_hat, exposure, config)
        ea = None
    else:
        raise ValueError(f"unknown method {method!r}")
    decode_reward = ranking_reward(decode, attract_true, exposure).value
    if ea is None:
        ea = decode_reward
    return qid, float(ea), float(decode_reward), [[p.doc, p.length] for p in decode.items]


def _method_scorer(method, dataset, exposure, args):
    """Train the shared model needed by in-processing methods."""
    if method in IN_METHODS:
        scorer = train_inprocess(
            dataset, exposure, args.slots, args.max_len,
            hyper=AdamParams(lr=args.lr), estimator=IN_METHODS[method],
            epochs=args.epochs, n_samples=args.samples,
            seed=derive_seed(args.seed, 100), hidden=tuple(args.hidden),
        )
    elif method.startswith("plr3-"):
        fixed_len = int(method.split("-")[1])
        if not (1 <= fixed_len <= args.max_len):
            raise ValueError(f"{method}: length outside [1, {args.max_len}]")
        depth, exp_r = _plr_restricted(exposure, args.slots, fixed_len)
        restricted = [
            QueryInstance(
                qid=q.qid, features=q.features, labels=q.labels,
                attract=AttractTable(q.attract.values[:, fixed_len - 1 : fixed_len]),
            )
            for q in dataset
        ]
        scorer = train_inprocess(
            restricted, exp_r, depth, 1,
            hyper=AdamParams(lr=args.lr), estimator="vlpl2",
            epochs=args.epochs, n_samples=args.samples,
            seed=derive_seed(args.seed, 101, fixed_len), hidden=tuple(args.hidden),
        )
    else:
        return None
    payload = {
        "attrs": {
            "input_dim": scorer.input_dim,
            "hidden_dims": scorer.hidden_dims,
            "out_dim": scorer.out_dim,
            "dropout": scorer.dropout,
        },
        "params": [p for p in scorer.params],
    }
    return payload


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    dataset, meta = _load_run_dataset(args.data)
    if not dataset:
        raise ValueError(f"no queries loaded from {args.data}")
    if meta["max_len"] != args.max_len:
        raise ValueError(
            f"--max-len {args.max_len} does not match the dataset's L={meta['max_len']}"
        )
    exposure = resolve_exposure(args.exposure, args.slots, args.max_len)

    if args.oracle:
        hats = {q.qid: q.attract for q in dataset}
    else:
        head = train_relevance_head(
            dataset, hyper=AdamParams(lr=args.lr), epochs=args.head_epochs,
            seed=derive_seed(args.seed, 7), hidden=tuple(args.hidden),
        )
        hats = {
            q.qid: AttractTable(head.predict_attract(q.features)) for q in dataset
        }

    scorer_payload = _method_scorer(args.method, dataset, exposure, args)

    tasks = [
        (
            q.qid, q.features, q.attract, hats[q.qid], args.method,
            args.slots, args.max_len, exposure, args.samples, args.steps,
            args.seed, args.eval_samples, scorer_payload, args.post_lr,
        )
        for q in dataset
    ]
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_query_result, tasks))
    else:
        rows = [_query_result(t) for t in tasks]
    rows.sort(key=lambda r: (stable_qid_key(r[0]), r[0]))

    csv_lines = ["qid,method,EA,decode_reward"]
    decodes = {}
    for qid, ea, decode_reward, decode in rows:
        csv_lines.append(f"{qid},{args.method},{ea!r},{decode_reward!r}")
        decodes[qid] = decode
    mean_ea = float(np.mean([r[1] for r in rows]))
    mean_decode = float(np.mean([r[2] for r in rows]))
    summary = {
        "config": {
            "data": args.data, "method": args.method, "exposure": args.exposure,
            "slots": args.slots, "max_len": args.max_len, "samples": args.samples,
            "steps": args.steps, "post_lr": args.post_lr,
            "seed": args.seed, "oracle": args.oracle,
            "epochs": args.epochs, "head_epochs": args.head_epochs,
            "eval_samples": args.eval_samples, "lr": args.lr,
            "hidden": list(args.hidden),
            # worker count deliberately omitted: results are identical for
            # any value, and the outputs must be byte-identical too
        },
        "n_queries": len(rows),
        "mean_EA": mean_ea,
        "mean_decode_reward": mean_decode,
        "decodes": decodes,
    }
    with open(args.out, "w") as fh:
        fh.write("\n".join(csv_lines) + "\n")
    with open(args.out + ".json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"{args.method}: mean EA {mean_ea:.4f}, mean decode {mean_decode:.4f} "
          f"over {len(rows)} queries in {time.perf_counter() - t0:.1f}s -> {args.out}")
    return EXIT_OK


def cmd_length_profile(args) -> int:
    with open(args.run_output) as fh:
        summary = json.load(fh)
    slots = summary["config"]["slots"]
    max_len = summary["config"]["max_len"]
    decodes = summary["decodes"]
    counts = np.zeros((slots, max_len + 1))
    for decode in decodes.values():
        slot = 0
        for doc, length in decode:
            for _ in range(length):
                counts[slot, length] += 1
                slot += 1
        while slot < slots:
            counts[slot, 0] += 1  # padding
            slot += 1
    fracs = counts / max(len(decodes), 1)
    lines = ["slot," + ",".join(f"len{l}" for l in range(max_len + 1))]
    for s in range(slots):
        lines.append(f"{s + 1}," + ",".join(repr(float(v)) for v in fracs[s]))
    out = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varlenrank",
        description="Joint optimization of document ordering and presentation lengths",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", help="verify the worked-example rewards and optima")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("verify", help="run cross-module property suites")
    p.add_argument("--scope", action="append", choices=sorted(SCOPES),
                   help="repeatable; default runs everything")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", help="write JSON results here")
    p.add_argument("--inject-fault", choices=["gradient-bias"],
                   help="deliberately break an estimator to prove suite sensitivity")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-data", help="generate semi-synthetic attractiveness labels")
    p.add_argument("letor", help="LETOR/SVMlight input file")
    p.add_argument("--max-len", type=int, default=3)
    p.add_argument("--scheme", choices=["equal", "doubling"], default="equal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-docs", type=int, default=DEFAULT_MAX_DOCS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="run one method over a generated dataset")
    p.add_argument("--data", required=True, help="gen-data output file")
    p.add_argument("--method", required=True)
    p.add_argument("--exposure", default="dcg", help="dcg | inv-rank | uniform | file:PATH")
    p.add_argument("--slots", type=int, default=30)
    p.add_argument("--max-len", type=int, default=3)
    p.add_argument("--samples", type=int, default=10000,
                   help="sampled rankings per gradient step")
    p.add_argument("--steps", type=int, default=200, help="post-processing ascent steps")
    p.add_argument("--post-lr", type=float, default=0.01,
                   help="learning rate for post-processing score tables")
    p.add_argument("--epochs", type=int, default=20, help="in-processing epochs")
    p.add_argument("--head-epochs", type=int, default=200)
    p.add_argument("--eval-samples", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, nargs="*", default=[32])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", action="store_true",
                   help="give methods the true attractiveness")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("length-profile", help="per-slot length distribution of a run")
    p.add_argument("run_output", help="the .json summary written by run")
    p.add_argument("--out")
    p.set_defaults(func=cmd_length_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
