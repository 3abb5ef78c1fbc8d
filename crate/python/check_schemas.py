"""Validates files written by `scenefuse simulate` / `align` against docs/schema.

usage: python3 python/check_schemas.py RUN_DIR [ALIGN_DIR]
"""

import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMAS = pathlib.Path(__file__).resolve().parent.parent / "docs" / "schema"


def load(path):
    return json.loads(pathlib.Path(path).read_text())


def registry():
    resources = []
    for p in SCHEMAS.glob("*.schema.json"):
        resources.append((p.name, Resource.from_contents(load(p))))
    return Registry().with_resources(resources)


def check(doc, schema_name, reg):
    schema = load(SCHEMAS / schema_name)
    jsonschema.Draft202012Validator(schema, registry=reg).validate(doc)


def main(argv):
    reg = registry()
    run = pathlib.Path(argv[1])
    check(load(run / "world.json"), "world.schema.json", reg)
    check(load(run / "world_final.json"), "world.schema.json", reg)
    check(load(run / "merged_graph.json"), "graph.schema.json", reg)
    check(load(run / "metrics.json"), "metrics.schema.json", reg)
    check(load(run / "run_report.json"), "run_report.schema.json", reg)
    check(load(run / "run_report.json")["config"], "config.schema.json", reg)
    if len(argv) > 2:
        report = load(pathlib.Path(argv[2]) / "alignment_report.json")
        alignment = load(SCHEMAS / "run_report.schema.json")["$defs"]["alignment"]
        jsonschema.Draft202012Validator(alignment, registry=reg).validate(report)
    examples = SCHEMAS.parent / "examples"
    for p in sorted(examples.glob("*.json")):
        name = "graph.schema.json" if p.name.endswith("_graph.json") else "config.schema.json"
        check(load(p), name, reg)
    print("all documents match their schemas")


if __name__ == "__main__":
    main(sys.argv)
