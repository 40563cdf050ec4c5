"""Run archives: append-only evaluation log + final map snapshot + inputs.

Directory layout:

    config.json         search configuration, domain, mode, SUT identity
    evaluations.jsonl   one evaluation per line, in evaluation order
    map.json            final map: occupied cells with elites and counters
    inputs/             concretized raw input per evaluated individual
                        (digit: 784-byte grayscale .bin; road: .json points)

Serialization is canonical (sorted keys, fixed separators) so equal runs are
byte-identical.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .mapelites import EvalRecord, FeatureMap, Individual, RunResult, update_map

INPUT_EXT = {"digit": ".bin", "road": ".json"}


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _record_to_dict(rec: EvalRecord) -> dict:
    return {
        "id": rec.id,
        "parent_id": rec.parent_id,
        "features": list(rec.features),
        "fitness": rec.fitness,
        "coords": list(rec.coords),
        "misbehaviour": rec.misbehaviour,
        "input_digest": rec.input_digest,
        "mapped": rec.mapped,
    }


def _record_from_dict(d: dict) -> EvalRecord:
    return EvalRecord(
        id=int(d["id"]),
        parent_id=d["parent_id"],
        features=tuple(float(v) for v in d["features"]),
        fitness=float(d["fitness"]),
        coords=tuple(int(v) for v in d["coords"]),
        misbehaviour=bool(d["misbehaviour"]),
        input_digest=d["input_digest"],
        mapped=bool(d["mapped"]),
    )


def _map_to_dict(result: RunResult) -> dict:
    cells = []
    for coords in sorted(result.fmap.cells):
        cell = result.fmap.cells[coords]
        cells.append({
            "coords": list(coords),
            "elite_id": cell.elite.id,
            "elite_fitness": cell.elite.fitness,
            "elite_features": list(cell.elite.features),
            "elite_misbehaviour": cell.elite.misbehaviour,
            "total_evals": cell.total_evals,
            "misbehaving_evals": cell.misbehaving_evals,
        })
    ranges = result.fmap.ranges() if result.fmap.cells else []
    return {
        "dims": result.fmap.dims,
        "feature_pair": list(result.config.feature_pair),
        "ranges": [list(r) for r in ranges],
        "cells": cells,
    }


@dataclass
class RunArchive:
    """In-memory view of a serialized run."""

    path: Path
    config: dict
    records: list[EvalRecord]
    map_doc: dict

    @property
    def feature_pair(self) -> tuple[str, ...]:
        return tuple(self.config["search"]["feature_pair"])

    @property
    def domain_name(self) -> str:
        return self.config["domain"]

    def mapped_records(self) -> list[EvalRecord]:
        return [r for r in self.records if r.mapped]

    def rebuild_map(self) -> FeatureMap:
        fmap = FeatureMap(dims=int(self.map_doc["dims"]))
        for rec in self.records:
            if not rec.mapped:
                continue
            ind = Individual(rec.id, None, rec.features, rec.fitness, rec.coords,
                             rec.parent_id, rec.input_digest)
            update_map(fmap, ind)
        return fmap

    def input_path(self, individual_id: int) -> Path:
        ext = INPUT_EXT.get(self.domain_name, ".bin")
        return self.path / "inputs" / f"{individual_id:08d}{ext}"


def write_archive(result: RunResult, out_dir: str | Path, sut_id: str,
                  extra_config: dict | None = None) -> Path:
    """Serialize a run to a directory; returns the directory path."""
    out = Path(out_dir)
    (out / "inputs").mkdir(parents=True, exist_ok=True)
    config_doc = {
        "format": "illumine-archive-v1",
        "domain": result.domain_name,
        "mode": result.mode,
        "sut": sut_id,
        "search": result.config.to_json_dict(),
        "diagnostics": {k: v for k, v in result.diagnostics.items()
                        if k != "elapsed_seconds"},
    }
    if extra_config:
        config_doc["domain_config"] = extra_config
    (out / "config.json").write_text(canonical_json(config_doc) + "\n")
    with open(out / "evaluations.jsonl", "w") as f:
        for rec in result.log:
            f.write(canonical_json(_record_to_dict(rec)) + "\n")
    (out / "map.json").write_text(canonical_json(_map_to_dict(result)) + "\n")
    ext = INPUT_EXT.get(result.domain_name, ".bin")
    for ind in result.individuals.values():
        if ind.input_bytes:
            (out / "inputs" / f"{ind.id:08d}{ext}").write_bytes(ind.input_bytes)
    return out


def read_archive(path: str | Path) -> RunArchive:
    p = Path(path)
    config = json.loads((p / "config.json").read_text())
    if config.get("format") != "illumine-archive-v1":
        raise ValueError(f"{p} is not a run archive")
    records = []
    with open(p / "evaluations.jsonl") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(_record_from_dict(json.loads(line)))
    map_doc = json.loads((p / "map.json").read_text())
    return RunArchive(path=p, config=config, records=records, map_doc=map_doc)


def archive_digest(path: str | Path) -> str:
    """Digest over every file in the archive directory (name + content)."""
    p = Path(path)
    h = hashlib.sha256()
    for f in sorted(p.rglob("*")):
        if f.is_file():
            h.update(str(f.relative_to(p)).encode())
            h.update(f.read_bytes())
    return h.hexdigest()
