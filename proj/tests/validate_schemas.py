#!/usr/bin/env python3
# Copyright 2026 The Meshplan Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Runs the CLI and validates every JSON document it writes.

usage: validate_schemas.py <meshplan binary> <schema dir> <work dir>
"""

import copy
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
import referencing

CLUSTER = """[cluster]
hosts = 2
devices_per_host = 2
intra_bw = 4e9
inter_bw = 1e9
alpha = 1e-6
device_flops = 1e9
"""

BUILDERS = [
    "mlp:layers=4,batch=8,hidden=32",
    "mlp:layers=3,batch=8,hidden=16,backward=1",
    "transformer:blocks=1,batch=2,seq=4,hidden=16,heads=2",
]


def run(binary, *args, expect=0):
    proc = subprocess.run([binary, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{' '.join(args)}: exit {proc.returncode}\n{proc.stderr}")
    return proc.stdout


def main():
    binary, schema_dir, work = sys.argv[1:4]
    schema_dir = pathlib.Path(schema_dir)
    work = pathlib.Path(work)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)

    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        schemas[path.name] = doc
    registry = referencing.Registry().with_resources(
        (name, referencing.Resource.from_contents(doc))
        for name, doc in schemas.items())

    def check(kind, doc):
        jsonschema.Draft202012Validator(
            schemas[f"meshplan.{kind}.schema.json"],
            registry=registry).validate(doc)

    def rejects(kind, doc):
        try:
            check(kind, doc)
        except jsonschema.ValidationError:
            return
        sys.exit(f"{kind} schema accepted a malformed document")

    cluster = work / "cluster.toml"
    cluster.write_text(CLUSTER)
    counts = {}
    for i, builder in enumerate(BUILDERS):
        for schedule in ("gpipe", "1f1b"):
            tag = f"{i}_{schedule}"
            common = ["--builder", builder, "--cluster", str(cluster)]
            plan_path = work / f"plan_{tag}.json"
            run(binary, "plan", *common, "--b", "3", "--schedule", schedule,
                "--out", str(plan_path))
            plan = json.loads(plan_path.read_text())
            check("plan", plan)
            program = work / f"program_{tag}.json"
            gantt = work / f"gantt_{tag}.json"
            sim = json.loads(
                run(binary, "simulate", *common, "--plan", str(plan_path),
                    "--program", str(program), "--gantt", str(gantt)))
            check("sim", sim)
            check("program", json.loads(program.read_text()))
            check("gantt", json.loads(gantt.read_text()))
            check("sweep", json.loads(
                run(binary, "sweep-b", *common, "--b", "1,2,4")))
            counts["plan"] = counts.get("plan", 0) + 1
    for hosts, devices, shapes in ((2, 4, "1x4,1x2,1x1,1x1"),
                                   (4, 8, "2x8,1x8,1x4,1x2,1x2"),
                                   (1, 1, "1x1")):
        check("cover", json.loads(
            run(binary, "cover", "--hosts", str(hosts), "--devices",
                str(devices), "--shapes", shapes)))

    tiny = work / "tiny.toml"
    tiny.write_text("hosts = 1\ndevices_per_host = 2\ndevice_memory = 64\n")
    check("sweep", json.loads(
        run(binary, "sweep-b", "--builder", BUILDERS[0], "--cluster",
            str(tiny), "--b", "1,2", expect=2)))

    bad = copy.deepcopy(plan)
    bad["stages"][0]["layouts"][0]["output"] = "Q"
    rejects("plan", bad)
    bad = copy.deepcopy(plan)
    del bad["t_star_ps"]
    rejects("plan", bad)
    bad = copy.deepcopy(sim)
    bad["trace"]["meshes"][0]["utilization"] = 1.5
    rejects("sim", bad)

    print(f"validated {counts['plan']} plan/sim/program/gantt/sweep sets, "
          f"3 covers and 1 infeasible sweep against {len(schemas)} schemas")


if __name__ == "__main__":
    main()
