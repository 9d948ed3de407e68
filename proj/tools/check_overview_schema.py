# Copyright 2026 The Atlas Authors
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

"""Validate overview JSON files against schemas/global-overview.schema.json."""

import argparse
import json
import pathlib
import sys

import jsonschema

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("files", nargs="*", type=pathlib.Path,
                        default=[ROOT / "prompts" / "fewshot" / "overview.json"])
    args = parser.parse_args()
    schema = json.loads((ROOT / "schemas" / "global-overview.schema.json").read_text())
    validator = jsonschema.Draft202012Validator(schema)
    bad = 0
    for path in args.files:
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path}: {'/'.join(map(str, e.path)) or '<root>'}: {e.message}")
        bad += bool(errors)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
