"""Write schema.json: the config JSON schema and the output table columns."""

import json
import sys
from pathlib import Path

from magneto_qed.cli import OUTPUT_COLUMNS
from magneto_qed.config import CONFIG_SCHEMA

ROOT = Path(__file__).resolve().parent.parent


def render() -> str:
    doc = {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "magneto-qed run configuration",
        "config": CONFIG_SCHEMA,
        "outputs": OUTPUT_COLUMNS,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "schema.json"
    target.write_text(render())
    print(f"wrote {target}")
