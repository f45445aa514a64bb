"""File formats: triple TSV, scene JSONL, and the binary parameter archive.

All loaders raise :class:`DataFormatError` (or its :class:`ArchiveError`
subclass) on malformed input instead of propagating parser internals, so
arbitrary bytes never crash the toolkit.
"""
from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import LabelTriple, SceneRecord


class DataFormatError(ValueError):
    """Malformed or unreadable data file."""


class ArchiveError(DataFormatError):
    """Malformed model archive (version, shape, or truncation problems)."""


_FORMAT_VERSION = "1"


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not valid UTF-8 ({exc})") from exc


def _header_lines(header: Mapping | None) -> list[str]:
    if not header:
        return []
    return [f"# {key}={value}" for key, value in header.items()]


def load_triples(path) -> list[LabelTriple]:
    """Parse a tab-separated triple file (head, relation, tail per line).

    Lines starting with '#' and blank lines are skipped. Triples are returned
    in file order, duplicates included.
    """
    triples: list[LabelTriple] = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3 or any(not f for f in fields):
            raise DataFormatError(
                f"{path}: line {lineno}: expected 3 non-empty tab-separated fields"
            )
        triples.append((fields[0], fields[1], fields[2]))
    return triples


def save_triples(triples: Iterable[LabelTriple], path, header: Mapping | None = None) -> None:
    lines = _header_lines(header)
    for h, r, t in triples:
        for lab in (h, r, t):
            if "\t" in lab or "\n" in lab:
                raise ValueError(f"label {lab!r} contains a tab or newline")
        lines.append(f"{h}\t{r}\t{t}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def save_scenes(
    scenes: Sequence[SceneRecord],
    path,
    node_labels: Sequence[str],
    header: Mapping | None = None,
) -> None:
    """Write one JSON object per scene with scene_id/observed/masked labels.

    Type sets are emitted in ascending-id order so identical inputs produce
    byte-identical files.
    """
    lines = _header_lines(header)
    for rec in scenes:
        obj = {
            "scene_id": node_labels[rec.scene_id],
            "observed": [node_labels[i] for i in sorted(rec.observed)],
            "masked": [node_labels[i] for i in sorted(rec.masked)],
        }
        lines.append(json.dumps(obj, separators=(", ", ": ")))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_scenes(path, node_ids: Mapping) -> list[SceneRecord]:
    """Read scene records, resolving labels against a node vocabulary."""
    records: list[SceneRecord] = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("scene_id"), str):
            raise DataFormatError(f"{path}: line {lineno}: expected an object with a scene_id string")

        def resolve(label) -> int:
            if not isinstance(label, str) or label not in node_ids:
                raise DataFormatError(f"{path}: line {lineno}: unknown label {label!r}")
            return node_ids[label]

        fields = {}
        for key in ("observed", "masked"):
            arr = obj.get(key, [])
            if not isinstance(arr, list):
                raise DataFormatError(f"{path}: line {lineno}: {key} must be an array")
            if len(set(arr)) != len(arr):
                raise DataFormatError(f"{path}: line {lineno}: duplicate labels in {key}")
            fields[key] = frozenset(resolve(lab) for lab in arr)
        try:
            rec = SceneRecord(resolve(obj["scene_id"]), fields["observed"], fields["masked"])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
        records.append(rec)
    return records


def save_archive(path, header: Mapping, blocks: Sequence[tuple[str, np.ndarray]]) -> None:
    """Write a text key=value header followed by named float32 blocks.

    Block payloads are little-endian IEEE-754 float32 in row-major order; the
    header records each block's name and shape so loads are self-describing.
    """
    shapes = ",".join(
        name + ":" + "x".join(str(s) for s in np.asarray(arr).shape) for name, arr in blocks
    )
    lines = [f"format_version={_FORMAT_VERSION}"]
    lines += [f"{key}={value}" for key, value in header.items()]
    lines.append(f"blocks={shapes}")
    lines.append("---")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_archive(path) -> tuple[dict, dict]:
    """Read an archive back as (header dict, name -> float32 array)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = b"---\n"
    if raw.startswith(sep):
        head_raw, body = b"", raw[len(sep):]
    else:
        idx = raw.find(b"\n" + sep)
        if idx < 0:
            raise ArchiveError(f"{path}: missing header separator")
        head_raw, body = raw[:idx], raw[idx + 1 + len(sep):]
    try:
        head_lines = head_raw.decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ArchiveError(f"{path}: header is not valid UTF-8") from exc

    header: dict = {}
    for line in head_lines:
        if "=" not in line:
            raise ArchiveError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        header[key] = value
    version = header.pop("format_version", None)
    if version != _FORMAT_VERSION:
        raise ArchiveError(
            f"{path}: format version mismatch: got {version!r}, expected {_FORMAT_VERSION!r}"
        )
    blocks_spec = header.pop("blocks", None)
    if blocks_spec is None:
        raise ArchiveError(f"{path}: header is missing the blocks entry")

    arrays: dict = {}
    offset = 0
    if blocks_spec:
        for part in blocks_spec.split(","):
            name, _, dims = part.partition(":")
            try:
                shape = tuple(int(d) for d in dims.split("x"))
            except ValueError as exc:
                raise ArchiveError(f"{path}: malformed block spec {part!r}") from exc
            need = int(np.prod(shape)) * 4
            chunk = body[offset:offset + need]
            if len(chunk) < need:
                raise ArchiveError(f"{path}: truncated parameter block {name!r}")
            arrays[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape)
            offset += need
    if offset != len(body):
        raise ArchiveError(f"{path}: {len(body) - offset} trailing bytes after last block")
    return header, arrays
