"""File formats: Preflib ballots in, parameters and result tables out.

Only the classic Preflib SOC/SOI layout is supported: a candidate count,
one "index,name" line per candidate (1-based), a "num_voters,sum,unique"
header, then "count,c1,c2,..." order lines. Ties (brace syntax) are
rejected because every model here is a strict-order model. Parameter files
are JSON documents with floats written at 17 significant digits so a
read-back is bit-identical.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    ModelParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
)
from .models import enumerate_pmf

__all__ = [
    "PreflibFile",
    "PreflibParseError",
    "parse_preflib_file",
    "parse_preflib",
    "serialize_preflib",
    "write_params",
    "read_params",
    "write_results_csv",
    "export_cayley",
    "cayley_edges",
    "CAYLEY_MAX_N",
    "PARAMS_FORMAT_VERSION",
]

CAYLEY_MAX_N = 6
PARAMS_FORMAT_VERSION = 1


class PreflibParseError(ValueError):
    """Malformed ballot file; the message carries the 1-based line number."""


@dataclass(frozen=True)
class PreflibFile:
    """Raw structure of a classic-layout ballot file (1-based candidate ids)."""

    n: int
    alternative_names: tuple[str, ...]
    counts_header: tuple[int, int, int]
    order_lines: tuple[tuple[int, tuple[int, ...]], ...]


def _significant_lines(text: str):
    """(line_number, stripped content) pairs, skipping blanks and comments."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_preflib_file(text: str) -> PreflibFile:
    lines = list(_significant_lines(text))
    if not lines:
        raise PreflibParseError("empty file: no significant lines")
    cursor = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal cursor
        if cursor >= len(lines):
            last = lines[-1][0] if lines else 0
            raise PreflibParseError(f"unexpected end of file after line {last}: expected {what}")
        item = lines[cursor]
        cursor += 1
        return item

    lineno, head = take("candidate count")
    try:
        n = int(head)
    except ValueError:
        raise PreflibParseError(f"line {lineno}: candidate count is not an integer: {head!r}") from None
    if n < 2:
        raise PreflibParseError(f"line {lineno}: need at least 2 candidates, got {n}")

    names = []
    for expect in range(1, n + 1):
        lineno, line = take(f"candidate line {expect}")
        idx_str, _, name = line.partition(",")
        try:
            idx = int(idx_str)
        except ValueError:
            raise PreflibParseError(
                f"line {lineno}: candidate index is not an integer: {idx_str!r}"
            ) from None
        if idx != expect:
            raise PreflibParseError(
                f"line {lineno}: candidate index {idx} out of order, expected {expect}"
            )
        names.append(name.strip())

    lineno, line = take("counts header")
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 3:
        raise PreflibParseError(
            f"line {lineno}: counts header needs 3 comma-separated integers, got {line!r}"
        )
    try:
        num_voters, sum_of_counts, num_unique = (int(p) for p in parts)
    except ValueError:
        raise PreflibParseError(f"line {lineno}: counts header is not numeric: {line!r}") from None

    order_lines = []
    total = 0
    for _ in range(num_unique):
        lineno, line = take("order line")
        if "{" in line or "}" in line:
            raise PreflibParseError(
                f"line {lineno}: tie syntax (braces) is not supported; strict orders only"
            )
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise PreflibParseError(f"line {lineno}: order line needs a count and items: {line!r}")
        try:
            count = int(parts[0])
            items = tuple(int(p) for p in parts[1:])
        except ValueError:
            raise PreflibParseError(f"line {lineno}: non-integer entry in order line: {line!r}") from None
        if count < 1:
            raise PreflibParseError(f"line {lineno}: ballot count must be positive, got {count}")
        seen = set()
        for c in items:
            if not 1 <= c <= n:
                raise PreflibParseError(
                    f"line {lineno}: candidate id {c} out of range 1..{n}"
                )
            if c in seen:
                raise PreflibParseError(f"line {lineno}: duplicate item {c}")
            seen.add(c)
        order_lines.append((count, items))
        total += count
    if cursor != len(lines):
        extra = lines[cursor][0]
        raise PreflibParseError(
            f"line {extra}: {len(lines) - cursor} unexpected line(s) after "
            f"{num_unique} declared orders"
        )
    if total != sum_of_counts:
        raise PreflibParseError(
            f"counts header declares sum {sum_of_counts} but order lines total {total}"
        )
    return PreflibFile(
        n=n,
        alternative_names=tuple(names),
        counts_header=(num_voters, sum_of_counts, num_unique),
        order_lines=tuple(order_lines),
    )


def parse_preflib(text: str) -> RankingDataset:
    """Classic SOC/SOI text to a RankingDataset (0-based, weights = counts)."""
    pf = parse_preflib_file(text)
    universe = Universe(pf.n, pf.alternative_names)
    rankings = tuple(
        Ranking(tuple(c - 1 for c in items), pf.n, count)
        for count, items in pf.order_lines
    )
    if not rankings:
        raise PreflibParseError("file declares zero unique orders")
    return RankingDataset(universe, rankings)


def serialize_preflib(ds: RankingDataset) -> str:
    """Write a dataset back into the classic layout (round-trip partner)."""
    n = ds.universe.n
    lines = [str(n)]
    for i in range(n):
        lines.append(f"{i + 1},{ds.universe.label(i)}")
    total = sum(r.weight for r in ds.rankings)
    lines.append(f"{total},{total},{len(ds.rankings)}")
    for r in ds.rankings:
        lines.append(",".join([str(r.weight)] + [str(x + 1) for x in r.items]))
    return "\n".join(lines) + "\n"


# --- parameter documents ------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_vector(vec) -> str:
    return "[" + ", ".join(_fmt(x) for x in vec) + "]"


def _fmt_matrix(mat) -> str:
    return "[" + ", ".join(_fmt_vector(row) for row in mat) + "]"


def params_to_document(params: ModelParams) -> str:
    """JSON text for a parameter object, floats at 17 significant digits."""
    head = f'{{\n  "format_version": {PARAMS_FORMAT_VERSION},\n'
    if isinstance(params, PLParams):
        body = (
            f'  "model_kind": "pl",\n  "n": {params.n},\n  "rank": null,\n'
            f'  "arrays": {{"theta": {_fmt_vector(params.theta)}}}\n'
        )
    elif isinstance(params, CRSFullParams):
        body = (
            f'  "model_kind": "crs_full",\n  "n": {params.n},\n  "rank": null,\n'
            f'  "arrays": {{"u": {_fmt_vector(params.u)}}}\n'
        )
    elif isinstance(params, CRSFactorParams):
        body = (
            f'  "model_kind": "crs_factor",\n  "n": {params.n},\n  "rank": {params.r},\n'
            f'  "arrays": {{"T": {_fmt_matrix(params.T)}, "C": {_fmt_matrix(params.C)}}}\n'
        )
    elif isinstance(params, MallowsParams):
        sigma = "[" + ", ".join(str(x) for x in params.sigma0) + "]"
        body = (
            f'  "model_kind": "mallows",\n  "n": {params.n},\n  "rank": null,\n'
            f'  "arrays": {{"sigma0": {sigma}, "theta_c": {_fmt(params.theta_c)}}}\n'
        )
    else:
        raise TypeError(f"cannot serialize {type(params).__name__}")
    return head + body + "}\n"


def write_params(params: ModelParams, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(params_to_document(params))


def params_from_document(text: str) -> ModelParams:
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != PARAMS_FORMAT_VERSION:
        raise ValueError(
            f"parameter document version {version!r} unsupported; "
            f"this build reads version {PARAMS_FORMAT_VERSION}"
        )
    kind = doc.get("model_kind")
    n = int(doc.get("n", 0))
    arrays = doc.get("arrays", {})
    if kind == "pl":
        theta = np.asarray(arrays.get("theta", []), dtype=np.float64)
        if theta.shape != (n,):
            raise ValueError(f"pl document declares n={n} but theta has shape {theta.shape}")
        return PLParams(theta)
    if kind == "crs_full":
        u = np.asarray(arrays.get("u", []), dtype=np.float64)
        if u.shape != (n * (n - 1),):
            raise ValueError(
                f"crs_full document declares n={n} (so {n * (n - 1)} slots) "
                f"but u has shape {u.shape}"
            )
        return CRSFullParams(u, n)
    if kind == "crs_factor":
        r = doc.get("rank")
        if not isinstance(r, int) or r < 1:
            raise ValueError(f"crs_factor document needs a positive integer rank, got {r!r}")
        T = np.asarray(arrays.get("T", []), dtype=np.float64)
        C = np.asarray(arrays.get("C", []), dtype=np.float64)
        if T.shape != (n, r) or C.shape != (n, r):
            raise ValueError(
                f"crs_factor document declares n={n}, rank={r} but arrays have "
                f"shapes {T.shape} and {C.shape}"
            )
        return CRSFactorParams(T, C, r)
    if kind == "mallows":
        sigma0 = tuple(int(x) for x in arrays.get("sigma0", []))
        if len(sigma0) != n:
            raise ValueError(f"mallows document declares n={n} but sigma0 has {len(sigma0)} entries")
        return MallowsParams(sigma0, float(arrays.get("theta_c", 0.0)))
    raise ValueError(f"unknown model_kind {kind!r} in parameter document")


def read_params(path) -> ModelParams:
    with open(path) as fh:
        return params_from_document(fh.read())


# --- result tables ------------------------------------------------------------


def write_results_csv(
    rows: Sequence[Mapping[str, object]],
    path,
    fieldnames: Optional[Sequence[str]] = None,
) -> None:
    """Write homogeneous dict rows as CSV: LF newlines, '.' decimal point.

    Floats are rendered with repr (shortest round-trip), which is
    byte-stable across platforms. ``fieldnames`` is required when ``rows``
    is empty (header-only output).
    """
    if fieldnames is None:
        if not rows:
            raise ValueError("fieldnames required to write a header-only file")
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_csv_cell(row[name]) for name in fieldnames])


def _csv_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


# --- Cayley-graph export ------------------------------------------------------


def _node_id(perm: tuple[int, ...]) -> str:
    return "|".join(str(x) for x in perm)


def cayley_edges(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Adjacent-transposition edges of the Cayley graph of S_n (each once)."""
    edges = []
    for perm in itertools.permutations(range(n)):
        for i in range(n - 1):
            other = list(perm)
            other[i], other[i + 1] = other[i + 1], other[i]
            other = tuple(other)
            if perm < other:
                edges.append((perm, other))
    return edges


def _model_tag(params: ModelParams) -> str:
    if isinstance(params, PLParams):
        return "pl"
    if isinstance(params, CRSFullParams):
        return "crs_full"
    if isinstance(params, CRSFactorParams):
        return "crs_factor"
    return "mallows"


def export_cayley(
    params_list: Sequence[ModelParams],
    n: int,
    path,
    model_tags: Optional[Sequence[str]] = None,
) -> None:
    """DOT graph of S_n (adjacent-transposition edges) with model PMFs.

    Every node is a permutation (id "0|2|1"); each supplied model adds a
    node attribute p_<tag> with that permutation's exact probability. A CSV
    twin of the node table lands next to ``path`` with a .csv extension.
    Guarded at n <= 6 (720 nodes).
    """
    if n > CAYLEY_MAX_N:
        raise ValueError(f"cayley export supports n <= {CAYLEY_MAX_N}, got n={n}")
    if n < 2:
        raise ValueError(f"cayley export needs n >= 2, got n={n}")
    universe = Universe(n)
    if model_tags is None:
        tags = []
        for params in params_list:
            base = _model_tag(params)
            tag = base
            k = 2
            while tag in tags:
                tag = f"{base}_{k}"
                k += 1
            tags.append(tag)
    else:
        tags = list(model_tags)
        if len(tags) != len(params_list):
            raise ValueError("model_tags length does not match params_list")
    pmfs = []
    for params in params_list:
        if params.n != n:
            raise ValueError(f"params for n={params.n} cannot label an S_{n} graph")
        pmfs.append(enumerate_pmf(params, universe))
    perms = list(itertools.permutations(range(n)))
    lines = ["graph cayley {"]
    for perm in perms:
        attrs = ", ".join(
            f'p_{tag}="{repr(pmf[perm])}"' for tag, pmf in zip(tags, pmfs)
        )
        suffix = f" [{attrs}]" if attrs else ""
        lines.append(f'  "{_node_id(perm)}"{suffix};')
    for a, b in cayley_edges(n):
        lines.append(f'  "{_node_id(a)}" -- "{_node_id(b)}";')
    lines.append("}")
    path = str(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    csv_path = path.rsplit(".", 1)[0] + ".csv" if "." in path.rsplit("/", 1)[-1] else path + ".csv"
    rows = []
    for perm in perms:
        row: dict[str, object] = {"permutation": _node_id(perm)}
        for tag, pmf in zip(tags, pmfs):
            row[f"p_{tag}"] = pmf[perm]
        rows.append(row)
    write_results_csv(rows, csv_path, fieldnames=["permutation"] + [f"p_{t}" for t in tags])
