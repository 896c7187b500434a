"""Workload ingestion and synthesis, plus the PGM/PPM readers used for scoring."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationError, DomainError, ParseError
from .perception import (
    DEFAULT_EPSILON,
    Calibration,
    GrayImage,
    PerceptionConfig,
    fit_calibration,
    laplacian_variance,
    mean_sobel_gradient,
)
from .policy import Modality
from .simulator import ModalityTask, Request

log = logging.getLogger(__name__)

_WS = b" \t\r\n\x0b\x0c"


class UnsupportedFormatError(ParseError):
    pass


# -- PNM ---------------------------------------------------------------------


def _header_tokens(data: bytes, count: int) -> tuple[list[tuple[bytes, int]], int]:
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments.

    Returns the tokens with their byte offsets and the offset just past the last one.
    """
    tokens: list[tuple[bytes, int]] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos >= n:
            raise ParseError(f"truncated header at byte {pos}: expected {count - len(tokens)} more fields")
        if data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def _header_int(tok: bytes, offset: int, name: str) -> int:
    if not tok.isdigit():
        raise ParseError(f"malformed {name} {tok!r} at byte {offset}")
    return int(tok)


def _parse_pnm(data: bytes, channels: int, binary: bool) -> tuple[int, int, np.ndarray]:
    tokens, pos = _header_tokens(data, 4)
    width = _header_int(*tokens[1], "width")
    height = _header_int(*tokens[2], "height")
    maxval = _header_int(*tokens[3], "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"image dimensions must be positive at byte {tokens[1][1]}")
    if not 1 <= maxval <= 255:
        raise ParseError(f"unsupported maxval {maxval} at byte {tokens[3][1]} (must be 1..255)")
    count = width * height * channels

    if binary:
        if pos >= len(data) or data[pos] not in _WS:
            raise ParseError(f"missing whitespace after maxval at byte {pos}")
        start = pos + 1
        raster = data[start : start + count]
        if len(raster) < count:
            raise ParseError(
                f"truncated pixel data at byte {start + len(raster)}: "
                f"expected {count} bytes, got {len(raster)}"
            )
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.int64)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise ParseError(f"sample exceeds maxval {maxval} at byte {start + int(bad[0])}")
    else:
        values_list: list[int] = []
        n = len(data)
        while len(values_list) < count:
            while pos < n and data[pos] in _WS:
                pos += 1
            if pos < n and data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
                continue
            if pos >= n:
                raise ParseError(
                    f"truncated pixel data at byte {pos}: expected {count} samples, got {len(values_list)}"
                )
            start = pos
            while pos < n and data[pos] not in _WS:
                pos += 1
            v = _header_int(data[start:pos], start, "sample")
            if v > maxval:
                raise ParseError(f"sample exceeds maxval {maxval} at byte {start}")
            values_list.append(v)
        values = np.asarray(values_list, dtype=np.int64)

    if maxval != 255:
        values = (values * 255 + maxval // 2) // maxval
    return height, width, values.reshape(height, width, channels) if channels > 1 else values.reshape(height, width)


def _magic(data: bytes) -> bytes:
    return data[:2]


def parse_pgm(data: bytes) -> GrayImage:
    magic = _magic(data)
    if magic in (b"P6", b"P3"):
        raise UnsupportedFormatError(
            f"{magic.decode()} is a colour PPM; use load_ppm_as_gray to convert it"
        )
    if magic not in (b"P5", b"P2"):
        raise UnsupportedFormatError(f"not a PGM file (magic {magic!r} at byte 0)")
    h, w, values = _parse_pnm(data, 1, binary=magic == b"P5")
    return GrayImage(h, w, values)


def rec601_gray(rgb: np.ndarray) -> np.ndarray:
    """Integer luma (299R + 587G + 114B + 500) // 1000 on an (..., 3) array."""
    rgb = np.asarray(rgb, dtype=np.int64)
    return (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000


def parse_ppm_as_gray(data: bytes) -> GrayImage:
    magic = _magic(data)
    if magic not in (b"P6", b"P3"):
        raise UnsupportedFormatError(f"not a PPM file (magic {magic!r} at byte 0)")
    h, w, values = _parse_pnm(data, 3, binary=magic == b"P6")
    return GrayImage(h, w, rec601_gray(values))


def load_pgm(path: str | Path) -> GrayImage:
    return parse_pgm(Path(path).read_bytes())


def load_ppm_as_gray(path: str | Path) -> GrayImage:
    return parse_ppm_as_gray(Path(path).read_bytes())


def load_image(path: str | Path) -> GrayImage:
    """Load a PGM directly or a PPM through luma conversion, chosen by magic number."""
    data = Path(path).read_bytes()
    if _magic(data) in (b"P6", b"P3"):
        return parse_ppm_as_gray(data)
    return parse_pgm(data)


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.astype(np.uint8).tobytes()


def write_pgm(path: str | Path, img: GrayImage) -> None:
    Path(path).write_bytes(encode_pgm(img))


# -- workload files ------------------------------------------------------------

_RECORD_KEYS = {"id", "t", "mods"}
_MOD_KEYS = {"kind", "content", "path", "c", "bytes"}


def _task_from_entry(
    entry: dict, lineno: int, base_dir: Path, perception: PerceptionConfig
) -> ModalityTask:
    where = f"line {lineno}"
    if not isinstance(entry, dict):
        raise ParseError(f"{where}: modality entry must be an object")
    unknown = set(entry) - _MOD_KEYS
    if unknown:
        raise ParseError(f"{where}: unknown modality key {sorted(unknown)[0]!r}")
    try:
        modality = Modality(entry.get("kind"))
    except ValueError:
        raise ParseError(f"{where}: kind must be 'text' or 'image', got {entry.get('kind')!r}") from None

    payload = entry.get("bytes")
    if payload is not None and (not isinstance(payload, int) or isinstance(payload, bool) or payload < 0):
        raise ParseError(f"{where}: bytes must be a non-negative integer")

    if "c" in entry:
        c = entry["c"]
        if not isinstance(c, (int, float)) or isinstance(c, bool) or not 0.0 <= c <= 1.0:
            raise ParseError(f"{where}: c must be a number in [0, 1]")
        return ModalityTask(modality, float(c), payload or 0)

    if modality is Modality.TEXT:
        content = entry.get("content")
        if not isinstance(content, str):
            raise ParseError(f"{where}: text entry needs 'content' or 'c'")
        c = perception.score_text(content).total
        if payload is None:
            payload = len(content.encode("utf-8"))
        return ModalityTask(modality, c, payload)

    rel = entry.get("path")
    if not isinstance(rel, str):
        raise ParseError(f"{where}: image entry needs 'path' or 'c'")
    path = base_dir / rel
    if not path.is_file():
        raise FileNotFoundError(f"{where}: image file not found: {path}")
    try:
        img = load_image(path)
    except ParseError as exc:
        raise ParseError(f"{where}: {path}: {exc}") from None
    if payload is None:
        payload = path.stat().st_size
    return ModalityTask(modality, perception.score_image(img).total, payload)


def parse_workload_lines(
    lines: Iterable[str],
    base_dir: str | Path = ".",
    perception: PerceptionConfig = PerceptionConfig(),
) -> list[Request]:
    base = Path(base_dir)
    requests: list[Request] = []
    seen: set[int] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise ParseError(f"line {lineno}: record must be an object")
        unknown = set(rec) - _RECORD_KEYS
        if unknown:
            raise ParseError(f"line {lineno}: unknown key {sorted(unknown)[0]!r}")
        rid, t, mods = rec.get("id"), rec.get("t"), rec.get("mods")
        if not isinstance(rid, int) or isinstance(rid, bool):
            raise ParseError(f"line {lineno}: 'id' must be an integer")
        if rid in seen:
            raise ParseError(f"line {lineno}: duplicate id {rid}")
        if not isinstance(t, (int, float)) or isinstance(t, bool) or not t >= 0 or not math.isfinite(t):
            raise ParseError(f"line {lineno}: 't' must be a non-negative number")
        if not isinstance(mods, list) or not mods:
            raise ParseError(f"line {lineno}: 'mods' must be a non-empty list")
        seen.add(rid)
        tasks = tuple(_task_from_entry(m, lineno, base, perception) for m in mods)
        requests.append(Request(rid, float(t), tasks))
    # sorted() is stable, so equal arrival times keep file order
    return sorted(requests, key=lambda r: r.arrival_time)


def load_workload(path: str | Path, perception: PerceptionConfig = PerceptionConfig()) -> list[Request]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_workload_lines(fh, path.parent, perception)


def dump_workload(requests: Iterable[Request]) -> str:
    """Serialize as pre-scored workload lines."""
    out = []
    for r in requests:
        mods = [{"kind": t.modality.value, "c": t.complexity, "bytes": t.payload_bytes} for t in r.tasks]
        out.append(json.dumps({"id": r.id, "t": r.arrival_time, "mods": mods}, separators=(",", ":")))
    return "".join(line + "\n" for line in out)


# -- synthesis -----------------------------------------------------------------


@dataclass(frozen=True)
class Dist:
    """Complexity distribution: ``uniform`` on [a, b] or ``beta`` with shape (a, b)."""

    kind: str = "uniform"
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if self.kind == "uniform":
            if not 0.0 <= self.a <= self.b <= 1.0:
                raise DomainError(f"uniform bounds must satisfy 0 <= a <= b <= 1, got ({self.a}, {self.b})")
        elif self.kind == "beta":
            if not (self.a > 0 and self.b > 0):
                raise DomainError(f"beta shapes must be positive, got ({self.a}, {self.b})")
        else:
            raise DomainError(f"unknown distribution kind {self.kind!r}")

    def sample(self, rng: random.Random) -> float:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b)
        return rng.betavariate(self.a, self.b)


@dataclass(frozen=True)
class SyntheticSpec:
    """Poisson request stream where every request carries a text query and,
    with ``image_probability``, an image.

    Payload ranges are log-uniform in bytes.
    """

    request_count: int = 5000
    arrival_rate: float = 4.1
    image_probability: float = 0.47
    text_complexity: Dist = Dist("beta", 2.5, 3.75)
    image_complexity: Dist = Dist("beta", 3.5, 2.0)
    text_bytes: tuple[int, int] = (64, 4096)
    image_bytes: tuple[int, int] = (200_000, 4_000_000)
    seed: int = 7

    def __post_init__(self) -> None:
        if self.request_count < 0:
            raise DomainError("request_count must be non-negative")
        if not self.arrival_rate > 0:
            raise DomainError("arrival_rate must be positive")
        if not 0.0 <= self.image_probability <= 1.0:
            raise DomainError("image_probability must be in [0, 1]")
        for name in ("text_bytes", "image_bytes"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise DomainError(f"{name} must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
            object.__setattr__(self, name, (int(lo), int(hi)))


def _log_uniform_int(rng: random.Random, lo: int, hi: int) -> int:
    return int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))


def synthesize_workload(spec: SyntheticSpec) -> list[Request]:
    """Seeded synthetic workload.

    Times and complexities are rounded to 1e-6 so that last-ulp differences
    between platform math libraries cannot leak into the simulation.
    """
    rng = random.Random(spec.seed)
    t = 0.0
    out = []
    for rid in range(spec.request_count):
        t = round(t + rng.expovariate(spec.arrival_rate), 6)
        tasks = [
            ModalityTask(
                Modality.TEXT,
                round(spec.text_complexity.sample(rng), 6),
                _log_uniform_int(rng, *spec.text_bytes),
            )
        ]
        if rng.random() < spec.image_probability:
            tasks.append(
                ModalityTask(
                    Modality.IMAGE,
                    round(spec.image_complexity.sample(rng), 6),
                    _log_uniform_int(rng, *spec.image_bytes),
                )
            )
        out.append(Request(rid, t, tuple(tasks)))
    return out


# -- calibration corpora -------------------------------------------------------

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


def image_statistics(img: GrayImage) -> tuple[float, float]:
    return mean_sobel_gradient(img), laplacian_variance(img)


def collect_calibration(
    image_paths: Sequence[str | Path], epsilon: float = DEFAULT_EPSILON
) -> Calibration:
    """Fit P5/P95 constants over a corpus; unreadable files are skipped with a warning."""
    grads, laps = [], []
    for p in image_paths:
        try:
            img = load_image(p)
        except (OSError, ParseError) as exc:
            log.warning("skipping %s: %s", p, exc)
            continue
        g, lv = image_statistics(img)
        grads.append(g)
        laps.append(lv)
    if len(grads) < 2:
        raise CalibrationError(f"need at least 2 readable images, found {len(grads)}")
    return fit_calibration(grads, laps, epsilon)


def image_files(directory: str | Path) -> list[Path]:
    """PNM files in ``directory`` in a platform-independent (sorted) order."""
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
