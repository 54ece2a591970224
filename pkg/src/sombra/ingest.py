"""Input construction: Medline baseline XML, vocabulary files, synthetic data.

Medline annotates each article with MeSH descriptors; we index descriptor
UIs (stable across vocabulary releases) and ignore qualifier subheadings.
The synthetic generator reproduces the evaluation distribution: per-article
element counts drawn uniformly from a small integer range, ids without
replacement, optionally confined to per-cluster column bands.
"""

from __future__ import annotations

import gzip
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .core import FormatError, SparseBinaryMatrix, Vocabulary


@dataclass
class MedlineParse:
    matrix: SparseBinaryMatrix
    vocab: Vocabulary
    pmids: list[str]
    headings_total: int = 0
    dropped_unknown: int = 0
    duplicate_headings: int = 0
    skipped_no_pmid: int = 0
    duplicate_pmids: int = 0

    def __iter__(self):
        # allow `matrix, vocab, pmids = parse_medline_xml(...)`
        return iter((self.matrix, self.vocab, self.pmids))


def _open_xml(source):
    if hasattr(source, "read"):
        head = source.read(2)
        if hasattr(source, "seek"):
            source.seek(0)
            if head == b"\x1f\x8b":
                return gzip.open(source, "rb"), False
            return source, False
        raise ValueError("file-like XML sources must be seekable")
    path = str(source)
    fh = open(path, "rb")
    head = fh.read(2)
    fh.seek(0)
    if head == b"\x1f\x8b":
        fh.close()
        return gzip.open(path, "rb"), True
    return fh, True


def parse_medline_xml(source, vocab: Vocabulary | None = None) -> MedlineParse:
    """One matrix row per PubmedArticle record, columns keyed by descriptor UI.

    With a fixed vocabulary, unknown UIs are counted and dropped.  Without
    one, the vocabulary is built from the stream with UIs sorted
    lexicographically.  Articles without a PMID are skipped; repeated PMIDs
    keep the first occurrence.
    """
    fh, close = _open_xml(source)
    raw_rows: list[list[str]] = []
    pmids: list[str] = []
    seen: set[str] = set()
    headings_total = 0
    skipped_no_pmid = 0
    duplicate_pmids = 0
    duplicate_headings = 0
    try:
        context = ET.iterparse(fh, events=("start", "end"))
        _, root = next(context)
        for event, elem in context:
            if event != "end" or elem.tag != "PubmedArticle":
                continue
            citation = elem.find("MedlineCitation")
            pmid = citation.findtext("PMID") if citation is not None else None
            if not pmid:
                skipped_no_pmid += 1
                root.clear()
                continue
            pmid = pmid.strip()
            if pmid in seen:
                duplicate_pmids += 1
                root.clear()
                continue
            uis: list[str] = []
            if citation is not None:
                for heading in citation.iterfind("MeshHeadingList/MeshHeading"):
                    descriptor = heading.find("DescriptorName")
                    if descriptor is None:
                        continue
                    ui = descriptor.get("UI")
                    if ui:
                        uis.append(ui)
            headings_total += len(uis)
            unique = sorted(set(uis))
            duplicate_headings += len(uis) - len(unique)
            seen.add(pmid)
            pmids.append(pmid)
            raw_rows.append(unique)
            root.clear()
    except ET.ParseError as exc:
        raise FormatError(f"malformed XML: {exc}") from exc
    finally:
        if close:
            fh.close()

    dropped_unknown = 0
    if vocab is None:
        terms = sorted({ui for row in raw_rows for ui in row})
        vocab = Vocabulary(tuple(terms))
        rows = [[vocab.index[ui] for ui in row] for row in raw_rows]
    else:
        rows = []
        for row in raw_rows:
            kept = [vocab.index[ui] for ui in row if ui in vocab.index]
            dropped_unknown += len(row) - len(kept)
            rows.append(kept)
    matrix = SparseBinaryMatrix.from_rows(rows, len(vocab))
    return MedlineParse(
        matrix=matrix,
        vocab=vocab,
        pmids=pmids,
        headings_total=headings_total,
        dropped_unknown=dropped_unknown,
        duplicate_headings=duplicate_headings,
        skipped_no_pmid=skipped_no_pmid,
        duplicate_pmids=duplicate_pmids,
    )


def save_vocab(vocab: Vocabulary, path) -> None:
    """Newline-delimited UTF-8, one UI per line; line number = column index."""
    fh, close = (path, False) if hasattr(path, "write") else (open(path, "w", encoding="utf-8"), True)
    try:
        for term in vocab.terms:
            fh.write(term + "\n")
    finally:
        if close:
            fh.close()


def load_vocab(path) -> Vocabulary:
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    terms = [line for line in text.splitlines() if line]
    if len(set(terms)) != len(terms):
        dupes = sorted({t for t in terms if terms.count(t) > 1})
        raise FormatError(f"duplicate vocabulary entries: {', '.join(dupes[:5])}")
    return Vocabulary(tuple(terms))


def _draw_distinct(rng: np.random.Generator, k: int, lo: int, hi: int) -> np.ndarray:
    chosen: set[int] = set()
    while len(chosen) < k:
        chosen.update(rng.integers(lo, hi, size=k - len(chosen)).tolist())
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=k))


def synth_generate(n: int, d: int, nnz_low: int = 5, nnz_high: int = 15, seed: int = 0,
                   clusters: int | None = None, cluster_overlap: int = 0) -> SparseBinaryMatrix:
    """Seeded random incidence matrix with row sizes uniform in [nnz_low, nnz_high].

    With clusters=k the columns split into k equal bands (widened by
    cluster_overlap columns on each side) and every row draws from a single
    randomly assigned band.
    """
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    if not 0 <= nnz_low <= nnz_high:
        raise ValueError(f"need 0 <= nnz_low <= nnz_high, got {nnz_low}..{nnz_high}")
    if nnz_high > d:
        raise ValueError(f"nnz_high={nnz_high} exceeds the column count d={d}")
    rng = np.random.default_rng(seed)
    sizes = rng.integers(nnz_low, nnz_high + 1, size=n)
    if clusters is not None:
        if clusters < 1:
            raise ValueError("clusters must be >= 1")
        bounds = [round(b * d / clusters) for b in range(clusters + 1)]
        bands = []
        for b in range(clusters):
            lo = max(0, bounds[b] - cluster_overlap)
            hi = min(d, bounds[b + 1] + cluster_overlap)
            if hi - lo < nnz_high:
                raise ValueError(f"band {b} has only {hi - lo} columns but rows need up to {nnz_high}")
            bands.append((lo, hi))
        assignment = rng.integers(0, clusters, size=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    indices = np.empty(int(offsets[-1]), dtype=np.uint32)
    for i in range(n):
        lo, hi = bands[assignment[i]] if clusters is not None else (0, d)
        indices[offsets[i] : offsets[i + 1]] = _draw_distinct(rng, int(sizes[i]), lo, hi)
    return SparseBinaryMatrix(n, d, offsets, indices)
