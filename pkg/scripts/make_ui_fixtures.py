#!/usr/bin/env python3
"""Generate web-UI test fixtures from the real service API.

Creates randomized experiment states through /v1 endpoints (mixed
objective senses, evaluated/pending/failed records, occasional pending
suggestions) and captures the status and suggestions responses verbatim.
The vitest suite replays these to check that client-side rendering --
in particular the non-dominated highlighting -- agrees with the server.

Usage: python3 scripts/make_ui_fixtures.py [--count 20] [--out frontend/test/fixtures]
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from optiloop.service import UserAccount, create_app

USERS = [UserAccount("gen", "manager", "fixture-token")]
HEADERS = {"Authorization": "Bearer fixture-token"}


def random_problem(rng):
    n_vars = int(rng.integers(2, 5))
    variables = []
    for i in range(n_vars):
        kind = rng.choice(["continuous", "continuous", "discrete", "binary", "categorical"])
        if kind == "continuous":
            lo = float(np.round(rng.uniform(-5, 5), 3))
            variables.append(
                {"name": f"v{i}", "kind": "continuous",
                 "bounds": [lo, float(np.round(lo + rng.uniform(0.5, 10), 3))]}
            )
        elif kind == "discrete":
            lo = int(rng.integers(-10, 10))
            variables.append(
                {"name": f"v{i}", "kind": "discrete",
                 "bounds": [lo, int(lo + rng.integers(2, 12))]}
            )
        elif kind == "binary":
            variables.append({"name": f"v{i}", "kind": "binary"})
        else:
            k = int(rng.integers(2, 5))
            variables.append(
                {"name": f"v{i}", "kind": "categorical",
                 "categories": [f"c{j}" for j in range(k)]}
            )
    m = int(rng.integers(2, 4))
    objectives = [
        {"name": f"f{j}", "sense": str(rng.choice(["minimize", "maximize"]))}
        for j in range(m)
    ]
    return {"variables": variables, "objectives": objectives}


def random_design(rng, problem):
    design = {}
    for v in problem["variables"]:
        if v["kind"] == "continuous":
            design[v["name"]] = float(rng.uniform(*v["bounds"]))
        elif v["kind"] == "discrete":
            design[v["name"]] = int(rng.integers(v["bounds"][0], v["bounds"][1] + 1))
        elif v["kind"] == "binary":
            design[v["name"]] = bool(rng.integers(2))
        else:
            design[v["name"]] = str(rng.choice(v["categories"]))
    return design


def build_state(client, rng, index):
    name = f"fixture{index}"
    problem = random_problem(rng)
    response = client.post(
        "/v1/experiments",
        json={"name": name, "problem": problem, "run_config": {"preset": "parego"}},
        headers=HEADERS,
    )
    response.raise_for_status()
    m = len(problem["objectives"])
    n_records = int(rng.integers(3, 25))
    service_state = client.app.state.service
    store = service_state.store_for(name)
    ids = store.insert_pending(
        [random_design(rng, problem) for _ in range(n_records)], "suggested", 1
    )
    for rid in ids:
        roll = rng.random()
        if roll < 0.7:
            client.post(
                f"/v1/records/{rid}/result",
                json={
                    "experiment_id": name,
                    "objectives": [float(np.round(rng.uniform(-10, 10), 4)) for _ in range(m)],
                },
                headers=HEADERS,
            ).raise_for_status()
        elif roll < 0.8:
            client.post(
                f"/v1/records/{rid}/result",
                json={"experiment_id": name, "failure": "fixture failure"},
                headers=HEADERS,
            ).raise_for_status()
        # else: leave pending
    status = client.get(f"/v1/experiments/{name}/status", headers=HEADERS)
    status.raise_for_status()
    suggestions = client.get(f"/v1/experiments/{name}/suggestions", headers=HEADERS)
    suggestions.raise_for_status()
    return {"status": status.json(), "suggestions": suggestions.json()}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument(
        "--out", type=Path, default=Path(__file__).parent.parent / "frontend/test/fixtures"
    )
    parser.add_argument("--seed", type=int, default=20240810)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(Path(tmp) / "dbs", users=USERS)
        with TestClient(app) as client:
            for index in range(args.count):
                fixture = build_state(client, rng, index)
                path = args.out / f"state_{index:02d}.json"
                path.write_text(json.dumps(fixture, indent=1, sort_keys=True))
                front = fixture["status"]["front_ids"]
                counts = fixture["status"]["counts"]
                print(f"{path.name}: counts={counts} front={front}")


if __name__ == "__main__":
    main()
