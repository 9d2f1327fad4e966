"""CSV file formats and JSON run manifests."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .angular import HalfInteger
from .errors import MajoranaError
from .multipoles import MultipoleSpectrum
from .states import Constellation, SpinState

__all__ = [
    "ParseError",
    "FileError",
    "read_state_csv",
    "write_state_csv",
    "read_constellation_csv",
    "write_constellation_csv",
    "write_table_csv",
    "read_table_csv",
    "write_spectrum_csv",
    "write_lengths_csv",
    "write_husimi_csv",
    "RunManifest",
    "sha256_file",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = "v1"
NORM_WARN = 1e-6


class ParseError(MajoranaError, ValueError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, path, message: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


class FileError(MajoranaError, OSError):
    """Filesystem failure with the offending path attached."""


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileError(f"{path}: {exc.strerror or exc}") from exc


def _write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise FileError(f"{path}: {exc.strerror or exc}") from exc
    return path


def _fmt(x: float) -> str:
    # repr round-trips float64 exactly
    return repr(float(x))


def _rows(path, header: tuple[str, ...]):
    """Yield (line_number, fields) for data rows after checking the header."""
    text = _read_text(path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(path, "empty file", 1)
    got = tuple(h.strip() for h in lines[0].lstrip("\ufeff").split(","))
    if got != header:
        raise ParseError(path, f"expected header {','.join(header)!r}, got {lines[0]!r}", 1)
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(header):
            raise ParseError(path, f"expected {len(header)} fields, got {len(fields)}", number)
        yield number, fields


def _float(path, number: int, text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, f"{name}: cannot parse {text!r} as a number", number) from None
    if not math.isfinite(value):
        raise ParseError(path, f"{name}: non-finite value {text!r}", number)
    return value


def read_state_csv(path, renormalize: bool = False) -> SpinState:
    """Read an ``m,re,im`` file.  Rows may come in any order but must cover -S..S once."""
    entries = {}
    for number, (m_text, re_text, im_text) in _rows(path, ("m", "re", "im")):
        try:
            m = HalfInteger.parse(m_text)
        except (MajoranaError, TypeError) as exc:
            raise ParseError(path, f"m: {exc}", number) from None
        if m in entries:
            raise ParseError(path, f"duplicate m = {m}", number)
        entries[m] = complex(_float(path, number, re_text, "re"), _float(path, number, im_text, "im"))
    if not entries:
        raise ParseError(path, "no amplitude rows")
    top = max(entries)
    two_s = top.twice
    expected = {HalfInteger(t) for t in range(-two_s, two_s + 1, 2)}
    if two_s < 1 or set(entries) != expected:
        raise ParseError(path, f"m values do not form a complete -S..S ladder for S = {top}")
    amps = np.array([entries[HalfInteger(t)] for t in range(-two_s, two_s + 1, 2)])
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) > NORM_WARN:
        if not renormalize:
            raise ParseError(path, f"state norm {norm:.12g} deviates from 1; pass --renormalize to accept")
        warnings.warn(f"{path}: renormalizing state with norm {norm:.12g}", stacklevel=2)
    return SpinState.normalized(top, amps)


def write_state_csv(path, s: SpinState) -> Path:
    out = ["m,re,im"]
    for m, a in zip(s.m_values, s.amps):
        out.append(f"{m},{_fmt(a.real)},{_fmt(a.imag)}")
    return _write_text(path, "\n".join(out) + "\n")


def read_constellation_csv(path) -> Constellation:
    theta, phi = [], []
    for number, (t, p) in _rows(path, ("theta", "phi")):
        tv = _float(path, number, t, "theta")
        if not 0.0 <= tv <= math.pi:
            raise ParseError(path, f"theta = {tv} outside [0, pi]", number)
        theta.append(tv)
        phi.append(_float(path, number, p, "phi"))
    if not theta:
        raise ParseError(path, "no points")
    return Constellation(np.array(theta), np.array(phi))


def write_constellation_csv(path, c: Constellation) -> Path:
    out = ["theta,phi"] + [f"{_fmt(t)},{_fmt(p)}" for t, p in zip(c.theta, c.phi)]
    return _write_text(path, "\n".join(out) + "\n")


def write_table_csv(path, header, rows) -> Path:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return _write_text(path, buf.getvalue())


def read_table_csv(path) -> tuple[list[str], list[list[str]]]:
    text = _read_text(path)
    reader = list(csv.reader(_io.StringIO(text)))
    if not reader:
        raise ParseError(path, "empty file", 1)
    return reader[0], reader[1:]


def write_spectrum_csv(path, spec: MultipoleSpectrum) -> Path:
    rows = [(K, q, float(v.real), float(v.imag)) for K, q, v in spec.items()]
    return write_table_csv(path, ("K", "q", "re", "im"), rows)


def write_lengths_csv(path, lengths) -> Path:
    return write_table_csv(path, ("K", "length"), [(K, float(v)) for K, v in enumerate(lengths)])


def write_husimi_csv(path, theta, phi, Q) -> Path:
    T, P = np.meshgrid(theta, phi, indexing="ij")
    rows = zip(T.ravel(), P.ravel(), np.asarray(Q).ravel())
    return write_table_csv(path, ("theta", "phi", "Q"), [(float(a), float(b), float(c)) for a, b, c in rows])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise FileError(f"{path}: {exc.strerror or exc}") from exc
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str
    started: str = field(default_factory=_now)
    finished: str | None = None
    output_files: list = field(default_factory=list)
    schema: str = SCHEMA_VERSION

    def add(self, path) -> None:
        path = Path(path)
        self.output_files.append({"path": path.name, "sha256": sha256_file(path)})

    def finish(self) -> None:
        self.finished = _now()

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "command": self.command,
            "tool_version": self.tool_version,
            "config": self.config,
            "started": self.started,
            "finished": self.finished,
            "output_files": self.output_files,
        }

    def write(self, out_dir) -> Path:
        if self.finished is None:
            self.finish()
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        return _write_text(Path(out_dir) / "manifest.json", text)

    @classmethod
    def read(cls, path) -> RunManifest:
        try:
            data = json.loads(_read_text(path))
        except json.JSONDecodeError as exc:
            raise ParseError(path, f"invalid JSON: {exc.msg}", exc.lineno) from None
        if data.get("schema") != SCHEMA_VERSION:
            raise ParseError(path, f"unsupported manifest schema {data.get('schema')!r}")
        return cls(
            command=data["command"],
            config=data["config"],
            tool_version=data["tool_version"],
            started=data["started"],
            finished=data["finished"],
            output_files=data["output_files"],
        )

    def verify(self, out_dir) -> list[str]:
        """Names of listed files whose digest no longer matches."""
        bad = []
        for entry in self.output_files:
            path = Path(out_dir) / entry["path"]
            if not path.exists() or sha256_file(path) != entry["sha256"]:
                bad.append(entry["path"])
        return bad


def write_json(path, data) -> Path:
    return _write_text(path, json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, HalfInteger):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")
