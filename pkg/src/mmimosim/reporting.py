"""Deterministic delimited output and run manifests.

Numeric table bodies must be byte-identical across reruns of the same
manifest, so floats are formatted to 9 significant digits, line endings
are pinned to "\\n", and nothing time-dependent enters a table row; the
wall-clock timestamp lives only in the manifest file.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

FLOAT_FORMAT = "%.9g"


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence],
                fmt: str = "csv") -> None:
    """Write one table as CSV or as a structured-text block list.

    The structured-text form carries the same cells as "key: value"
    lines, one blank-line-separated block per row, for consumers that
    prefer grep-able output over a spreadsheet.
    """
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
    elif fmt == "structured-text":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# table: {path.stem}\n")
            fh.write("# columns: " + ", ".join(header) + "\n")
            for row in rows:
                fh.write("\n")
                for name, value in zip(header, row):
                    fh.write(f"{name}: {format_cell(value)}\n")
    else:
        raise ValueError(f"unknown output format '{fmt}'")


def table_filename(stem: str, fmt: str) -> str:
    return f"{stem}.csv" if fmt == "csv" else f"{stem}.txt"


def make_run_id(subcommand: str, scenario_bytes: bytes, seed: int,
                version: str, fmt: str) -> str:
    """Stable 12-hex-digit id over everything that shapes the numbers.

    Thread counts and timestamps are deliberately excluded: they must
    not change any output row.
    """
    digest = hashlib.sha256()
    digest.update(subcommand.encode())
    digest.update(b"\x00")
    digest.update(scenario_bytes)
    digest.update(b"\x00")
    digest.update(str(seed).encode())
    digest.update(b"\x00")
    digest.update(version.encode())
    digest.update(b"\x00")
    digest.update(fmt.encode())
    return digest.hexdigest()[:12]


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce or audit one report run."""

    run_id: str
    subcommand: str
    scenario_path: str
    scenario_sha256: str
    seed: int
    threads: int
    output_format: str
    version: str
    created_utc: str


def build_manifest(subcommand: str, scenario_path, scenario_bytes: bytes,
                   seed: int, threads: int, fmt: str,
                   version: str) -> RunManifest:
    return RunManifest(
        run_id=make_run_id(subcommand, scenario_bytes, seed, version, fmt),
        subcommand=subcommand,
        scenario_path=str(scenario_path),
        scenario_sha256=hashlib.sha256(scenario_bytes).hexdigest(),
        seed=seed,
        threads=threads,
        output_format=fmt,
        version=version,
        created_utc=datetime.datetime.now(datetime.timezone.utc)
        .strftime("%Y-%m-%dT%H:%M:%SZ"),
    )


def write_manifest(manifest: RunManifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("mmimosim run manifest\n")
        fh.write(f"run_id: {manifest.run_id}\n")
        fh.write(f"subcommand: {manifest.subcommand}\n")
        fh.write(f"scenario_path: {manifest.scenario_path}\n")
        fh.write(f"scenario_sha256: {manifest.scenario_sha256}\n")
        fh.write(f"seed: {manifest.seed}\n")
        fh.write(f"threads: {manifest.threads}\n")
        fh.write(f"output_format: {manifest.output_format}\n")
        fh.write(f"version: {manifest.version}\n")
        fh.write(f"created_utc: {manifest.created_utc}\n")
