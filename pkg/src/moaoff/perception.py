"""Lightweight complexity scoring for image and text inputs.

All indicators are single-pass statistics that map an input onto [0, 1]:
image complexity combines resolution, Sobel edge density, gray-level
entropy and Laplacian sharpness; text complexity combines token length
and entity density.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CalibrationError, DomainError, ParseError

DEFAULT_H0 = 1024
DEFAULT_W0 = 1024
DEFAULT_L0 = 512
DEFAULT_GAMMA = 3.0
DEFAULT_EPSILON = 1e-6

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.int64)
_LAPLACE = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.int64)

_SENTENCE_END = ".!?"
_SENTENCE_SPLIT = re.compile(r"[.!?]+")


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class GrayImage:
    """Row-major 8-bit luminance grid."""

    height: int
    width: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise DomainError(f"image dimensions must be positive, got {self.height}x{self.width}")
        arr = np.asarray(self.pixels)
        if arr.size != self.height * self.width:
            raise DomainError(
                f"pixel count {arr.size} does not match {self.height}x{self.width}"
            )
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise DomainError("pixel values must lie in [0, 255]")
        arr = arr.astype(np.uint8).reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> GrayImage:
        arr = np.asarray(rows, dtype=np.int64)
        if arr.ndim != 2:
            raise DomainError("rows must form a 2-D grid")
        return cls(arr.shape[0], arr.shape[1], arr)

    @classmethod
    def constant(cls, height: int, width: int, value: int) -> GrayImage:
        return cls(height, width, np.full((height, width), value, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.height * self.width

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (self.height, self.width) == (other.height, other.width) and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ImageWeights:
    w_res: float = 0.25
    w_edge: float = 0.25
    w_ent: float = 0.25
    w_lap: float = 0.25

    def __post_init__(self) -> None:
        ws = (self.w_res, self.w_edge, self.w_ent, self.w_lap)
        if any(w < 0 or not math.isfinite(w) for w in ws):
            raise DomainError(f"image weights must be finite and non-negative, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise DomainError(f"image weights must sum to 1, got {sum(ws)!r}")

    @classmethod
    def normalized(cls, w_res: float, w_edge: float, w_ent: float, w_lap: float) -> ImageWeights:
        """Build weights from arbitrary non-negative magnitudes by scaling to unit sum."""
        total = w_res + w_edge + w_ent + w_lap
        if total <= 0:
            raise DomainError("at least one image weight must be positive")
        return cls(w_res / total, w_edge / total, w_ent / total, w_lap / total)


@dataclass(frozen=True)
class Calibration:
    """Percentile normalization constants for the two unbounded image statistics."""

    grad_p5: float = 2.0
    grad_p95: float = 60.0
    lap_p5: float = 10.0
    lap_p95: float = 2000.0
    epsilon: float = DEFAULT_EPSILON

    KEYS = ("grad_p5", "grad_p95", "lap_p5", "lap_p95", "epsilon")

    def __post_init__(self) -> None:
        if not self.grad_p5 <= self.grad_p95:
            raise DomainError(f"grad_p5 {self.grad_p5} exceeds grad_p95 {self.grad_p95}")
        if not self.lap_p5 <= self.lap_p95:
            raise DomainError(f"lap_p5 {self.lap_p5} exceeds lap_p95 {self.lap_p95}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")

    def dumps(self) -> str:
        return "".join(f"{key} = {getattr(self, key)!r}\n" for key in self.KEYS)

    @classmethod
    def loads(cls, text: str) -> Calibration:
        values: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ParseError(f"calibration line {lineno}: expected 'key = value'")
            if key not in cls.KEYS:
                raise ParseError(f"calibration line {lineno}: unknown key {key!r}")
            if key in values:
                raise ParseError(f"calibration line {lineno}: duplicate key {key!r}")
            try:
                values[key] = float(value.strip())
            except ValueError:
                raise ParseError(
                    f"calibration line {lineno}: {key} is not a decimal number"
                ) from None
        missing = [k for k in cls.KEYS if k not in values]
        if missing:
            raise ParseError(f"calibration missing keys: {', '.join(missing)}")
        return cls(**values)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Calibration:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ImageComplexity:
    c_res: float
    c_edge: float
    c_ent: float
    c_lap: float
    total: float


@dataclass(frozen=True)
class TextFeatures:
    token_count: int
    entity_count: int
    sentence_count: int


@dataclass(frozen=True)
class TextParams:
    l0: int = DEFAULT_L0
    gamma: float = DEFAULT_GAMMA
    beta_l: float = 0.5
    beta_ner: float = 0.5

    def __post_init__(self) -> None:
        if self.l0 < 1:
            raise DomainError(f"l0 must be at least 1, got {self.l0}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.beta_l < 0 or self.beta_ner < 0:
            raise DomainError("text weights must be non-negative")
        if abs(self.beta_l + self.beta_ner - 1.0) > 1e-9:
            raise DomainError(
                f"text weights must sum to 1, got {self.beta_l + self.beta_ner!r}"
            )


@dataclass(frozen=True)
class TextComplexity:
    c_l: float
    c_ner: float
    total: float
    features: TextFeatures


# -- image indicators --------------------------------------------------------


def _correlate3(pixels: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 correlation over interior pixels only (output is (H-2)x(W-2))."""
    a = pixels.astype(np.int64)
    h, w = a.shape
    out = np.zeros((h - 2, w - 2), dtype=np.int64)
    for dr in range(3):
        for dc in range(3):
            k = int(kernel[dr, dc])
            if k:
                out += k * a[dr : dr + h - 2, dc : dc + w - 2]
    return out


def resolution_scale(img: GrayImage, h0: int = DEFAULT_H0, w0: int = DEFAULT_W0) -> float:
    return min(1.0, (img.height * img.width) / (h0 * w0))


def mean_sobel_gradient(img: GrayImage) -> float:
    """Mean Sobel magnitude over interior pixels; 0.0 when there are none."""
    if img.height < 3 or img.width < 3:
        return 0.0
    gx = _correlate3(img.pixels, _SOBEL_X)
    gy = _correlate3(img.pixels, _SOBEL_Y)
    # integer squares are exact in float64; fsum keeps the mean order-independent
    mag = np.sqrt((gx * gx + gy * gy).astype(np.float64))
    return math.fsum(mag.ravel().tolist()) / mag.size


def normalize_clip(value: float, p5: float, p95: float, epsilon: float) -> float:
    return _clip01((value - p5) / (p95 - p5 + epsilon))


def edge_density(img: GrayImage, cal: Calibration) -> float:
    return normalize_clip(mean_sobel_gradient(img), cal.grad_p5, cal.grad_p95, cal.epsilon)


def gray_entropy(img: GrayImage) -> float:
    """Histogram entropy normalized by log(256)."""
    counts = np.bincount(img.pixels.ravel(), minlength=256)
    nonzero = counts[counts > 0]
    if nonzero.size <= 1:
        return 0.0
    n = img.size
    # H = log N - (1/N) * sum c log c, exact for the uniform-histogram case
    h = math.log(n) - math.fsum(int(c) * math.log(int(c)) for c in nonzero) / n
    return _clip01(h / math.log(256))


def laplacian_variance(img: GrayImage) -> float:
    """Population variance of the 4-neighbour Laplacian over interior pixels."""
    if img.height < 3 or img.width < 3:
        return 0.0
    r = _correlate3(img.pixels, _LAPLACE).ravel()
    n = r.size
    s1 = int(r.sum())
    s2 = int((r * r).sum())
    return (n * s2 - s1 * s1) / (n * n)


def sharpness(img: GrayImage, cal: Calibration) -> float:
    return normalize_clip(laplacian_variance(img), cal.lap_p5, cal.lap_p95, cal.epsilon)


def image_complexity(
    img: GrayImage,
    weights: ImageWeights = ImageWeights(),
    cal: Calibration = Calibration(),
    h0: int = DEFAULT_H0,
    w0: int = DEFAULT_W0,
) -> ImageComplexity:
    c_res = resolution_scale(img, h0, w0)
    c_edge = edge_density(img, cal)
    c_ent = gray_entropy(img)
    c_lap = sharpness(img, cal)
    total = (
        weights.w_res * c_res
        + weights.w_edge * c_edge
        + weights.w_ent * c_ent
        + weights.w_lap * c_lap
    )
    return ImageComplexity(c_res, c_edge, c_ent, c_lap, _clip01(total))


# -- text indicators ---------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return text.split()


def split_sentences(text: str) -> int:
    """Number of non-blank segments between runs of '.', '!' and '?' (at least 1)."""
    count = sum(1 for seg in _SENTENCE_SPLIT.split(text) if seg.strip())
    return max(1, count)


def sentence_initial(tokens: Sequence[str]) -> list[bool]:
    """Flag tokens that open a sentence: the first token and any token after a terminator."""
    flags = []
    opening = True
    for tok in tokens:
        flags.append(opening)
        opening = tok[-1] in _SENTENCE_END
    return flags


def count_entities(tokens: Sequence[str], initial: Sequence[bool] | None = None) -> int:
    """Count digit-bearing tokens and capitalized tokens that do not open a sentence."""
    if initial is None:
        initial = sentence_initial(tokens)
    count = 0
    for tok, first in zip(tokens, initial):
        if any(ch.isdecimal() for ch in tok):
            count += 1
        elif tok[0].isupper() and not first:
            count += 1
    return count


def text_features(text: str) -> TextFeatures:
    tokens = tokenize(text)
    return TextFeatures(len(tokens), count_entities(tokens), split_sentences(text))


def text_complexity(text: str, params: TextParams = TextParams()) -> TextComplexity:
    feats = text_features(text)
    c_l = min(1.0, feats.token_count / params.l0)
    c_ner = min(1.0, (feats.entity_count / feats.sentence_count) / params.gamma)
    total = params.beta_l * c_l + params.beta_ner * c_ner
    return TextComplexity(c_l, c_ner, _clip01(total), feats)


@dataclass(frozen=True)
class PerceptionConfig:
    """Everything needed to score raw inputs."""

    h0: int = DEFAULT_H0
    w0: int = DEFAULT_W0
    weights: ImageWeights = ImageWeights()
    calibration: Calibration = Calibration()
    text: TextParams = TextParams()

    def __post_init__(self) -> None:
        if self.h0 < 1 or self.w0 < 1:
            raise DomainError(f"reference resolution must be positive, got {self.h0}x{self.w0}")

    def score_image(self, img: GrayImage) -> ImageComplexity:
        return image_complexity(img, self.weights, self.calibration, self.h0, self.w0)

    def score_text(self, text: str) -> TextComplexity:
        return text_complexity(text, self.text)


# -- calibration -------------------------------------------------------------


def percentile(values: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile on the sorted sample (rank = p/100 * (n-1))."""
    xs = sorted(values)
    if not xs:
        raise DomainError("percentile of an empty sample")
    r = (p / 100.0) * (len(xs) - 1)
    lo = math.floor(r)
    if lo >= len(xs) - 1:
        return float(xs[-1])
    return xs[lo] + (r - lo) * (xs[lo + 1] - xs[lo])


def fit_calibration(
    gradient_means: Sequence[float],
    laplacian_variances: Sequence[float],
    epsilon: float = DEFAULT_EPSILON,
) -> Calibration:
    if len(gradient_means) < 2 or len(laplacian_variances) < 2:
        raise CalibrationError(
            "calibration needs at least 2 samples per statistic, got "
            f"{len(gradient_means)} gradient and {len(laplacian_variances)} Laplacian"
        )
    if not epsilon > 0:
        raise CalibrationError(f"epsilon must be positive, got {epsilon}")
    return Calibration(
        grad_p5=float(percentile(gradient_means, 5)),
        grad_p95=float(percentile(gradient_means, 95)),
        lap_p5=float(percentile(laplacian_variances, 5)),
        lap_p95=float(percentile(laplacian_variances, 95)),
        epsilon=epsilon,
    )
