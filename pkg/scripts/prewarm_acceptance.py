#!/usr/bin/env python3
"""Fill the acceptance-suite artifact cache (artifacts/acceptance/).

Dispatches the expensive generations and 2000-epoch trainings to worker
subprocesses (single-threaded BLAS each) so a later `pytest tests/test_acceptance.py`
mostly reads cached results. Idempotent: completed artifacts are skipped.

Usage: python scripts/prewarm_acceptance.py [--jobs N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))
REPO = os.path.dirname(HERE)
sys.path.insert(0, os.path.join(REPO, "tests"))


def job_list():
    """(kind_tag, payload) work items, longest first."""
    jobs = []
    # desk trainings: the bulk of the schedule
    desk_1hop = {"n": 10_000, "e": 25_000, "seed": 11, "two_hop": False}
    desk_2hop = {"n": 10_000, "e": 25_000, "seed": 12, "two_hop": True}
    full = {"n": 50_000, "e": 125_000, "seed": 0, "two_hop": False}
    for family, L in (("lgcn_plus", 4), ("lgcn", 4), ("lgcn_plus", 2),
                      ("lgcn", 2), ("dve", 4)):
        for seed in (1, 2, 3):
            jobs.append(("train", {"gen": desk_1hop, "family": family, "L": L,
                                   "seed": seed}))
    for family, L in (("lgcn", 4), ("dve", 4)):
        for seed in (1, 2, 3):
            jobs.append(("train", {"gen": desk_2hop, "family": family, "L": L,
                                   "seed": seed}))
    jobs.append(("train", {"gen": full, "family": "lgcn", "L": 1, "seed": 1}))
    jobs.append(("train", {"gen": full, "family": "dve", "L": 4, "seed": 1}))
    for seed in (1, 2, 3):
        jobs.append(("train", {"gen": full, "family": "gcn", "L": None, "seed": seed}))
    # full-scale stats for criterion 3 (also used by criterion 7)
    for two_hop in (False, True):
        for seed in (0, 1, 2):
            jobs.append(("stats", {"n": 50_000, "e": 125_000, "seed": seed,
                                   "two_hop": two_hop}))
    # fresh graphs for inductive evaluation get generated on first use
    jobs.append(("stats", {"n": 50_000, "e": 125_000, "seed": 1000, "two_hop": False}))
    jobs.append(("dataset", {"n": 10_000, "e": 25_000, "seed": 13, "two_hop": False}))
    return jobs


def run_one(payload_json: str) -> int:
    payload = json.loads(payload_json)
    import acceptance_util as au
    from latentgraph.generate import GenConfig

    def cfg_of(d):
        return GenConfig(n_vertices_init=d["n"], n_edges_target=d["e"],
                         seed=d["seed"], two_hop=d["two_hop"])

    kind = payload["kind"]
    if kind == "stats":
        au.dataset_stats(cfg_of(payload["args"]))
    elif kind == "dataset":
        au.desk_dataset_dir(cfg_of(payload["args"]))
    elif kind == "train":
        a = payload["args"]
        au.trained_run(cfg_of(a["gen"]), a["family"], a["L"], a["seed"])
    else:
        raise ValueError(kind)
    return 0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--run-one", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.run_one:
        return run_one(args.run_one)

    env = dict(os.environ)
    env.update({"OMP_NUM_THREADS": "1", "OPENBLAS_NUM_THREADS": "1",
                "NUMBA_NUM_THREADS": "1"})
    queue = [json.dumps({"kind": k, "args": a}) for k, a in job_list()]
    active: list = []
    t0 = time.time()
    done = failed = 0
    while queue or active:
        while queue and len(active) < args.jobs:
            payload = queue.pop(0)
            p = subprocess.Popen([sys.executable, os.path.abspath(__file__),
                                  "--run-one", payload], env=env, cwd=REPO)
            active.append((p, payload))
        time.sleep(2.0)
        still = []
        for p, payload in active:
            if p.poll() is None:
                still.append((p, payload))
            else:
                done += 1
                if p.returncode != 0:
                    failed += 1
                    print(f"FAILED ({p.returncode}): {payload}", flush=True)
                print(f"[{time.time() - t0:7.0f}s] {done} done, {len(queue)} queued",
                      flush=True)
        active = still
    print(f"prewarm complete in {(time.time() - t0) / 60:.0f} min, {failed} failures",
          flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
