"""Posterior draw records and their line-delimited file format.

One draw per line, tab-separated: iteration index, K, beta, run-length
encoded labels, per-regime theta values, joint log posterior.  The first
line is a version tag carrying the family kind, T and the declared draw
count, so truncated files are detected on read.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DrawFormatError, InvalidInputError

__all__ = ["PosteriorDraw", "rle_encode", "rle_decode", "write_draws", "read_draws"]

_FORMAT_TAG = "dpseg-draws v1"


@dataclass
class PosteriorDraw:
    """One saved chain configuration."""

    iteration: int
    s: np.ndarray
    thetas: np.ndarray
    beta: float
    log_post: float

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.int64)
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))

    @property
    def K(self) -> int:
        return int(self.s[-1])


def rle_encode(s) -> str:
    """[1,1,2,2,2] -> "1x2,2x3"."""
    s = np.asarray(s, dtype=np.int64)
    if s.size == 0:
        raise InvalidInputError("cannot encode an empty label sequence")
    parts = []
    run_val, run_len = int(s[0]), 1
    for v in s[1:]:
        if v == run_val:
            run_len += 1
        else:
            parts.append(f"{run_val}x{run_len}")
            run_val, run_len = int(v), 1
    parts.append(f"{run_val}x{run_len}")
    return ",".join(parts)


def rle_decode(text: str) -> np.ndarray:
    out = []
    for part in text.split(","):
        try:
            val, ln = part.split("x")
            out.extend([int(val)] * int(ln))
        except ValueError:
            raise DrawFormatError(f"bad run-length chunk {part!r}") from None
    return np.array(out, dtype=np.int64)


def write_draws(draws, path, family_kind: str = "", T: int | None = None) -> None:
    draws = list(draws)
    if T is None:
        T = draws[0].s.size if draws else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_TAG}\tfamily={family_kind}\tT={T}\tn={len(draws)}\n")
        for d in draws:
            thetas = ";".join(
                ",".join(repr(float(v)) for v in row) for row in d.thetas
            )
            fh.write(
                f"{d.iteration}\t{d.K}\t{d.beta!r}\t{rle_encode(d.s)}"
                f"\t{thetas}\t{d.log_post!r}\n"
            )


def read_draws(path):
    """Read a draws file; returns (draws, meta) with meta = {family, T}.

    Raises :class:`DrawFormatError` on a version-tag mismatch or a
    truncated file (declared draw count not matched by the data lines).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DrawFormatError(f"{path}: empty draws file")
    head = lines[0].split("\t")
    if head[0] != _FORMAT_TAG:
        raise DrawFormatError(
            f"{path}: expected format tag {_FORMAT_TAG!r}, found {head[0]!r}"
        )
    meta = {}
    for cell in head[1:]:
        key, _, val = cell.partition("=")
        meta[key] = val
    try:
        declared = int(meta.get("n", ""))
        T = int(meta.get("T", ""))
    except ValueError:
        raise DrawFormatError(f"{path}: malformed header {lines[0]!r}") from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != declared:
        raise DrawFormatError(
            f"{path}: header declares {declared} draws, found {len(body)}"
        )
    draws = []
    for ln in body:
        cells = ln.split("\t")
        if len(cells) != 6:
            raise DrawFormatError(f"{path}: malformed draw line {ln!r}")
        it, k, beta, rle, thetas_text, logpost = cells
        s = rle_decode(rle)
        if s.size != T:
            raise DrawFormatError(f"{path}: draw length {s.size} != T={T}")
        thetas = np.array(
            [[float(v) for v in row.split(",")] for row in thetas_text.split(";")]
        )
        if int(k) != int(s[-1]) or thetas.shape[0] != int(k):
            raise DrawFormatError(f"{path}: inconsistent K in draw line")
        draws.append(
            PosteriorDraw(
                iteration=int(it),
                s=s,
                thetas=thetas,
                beta=float(beta),
                log_post=float(logpost),
            )
        )
    return draws, {"family": meta.get("family", ""), "T": T}
