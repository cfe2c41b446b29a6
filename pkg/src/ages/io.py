"""Plain-text formats for graphs, solution paths, SEMs, covariances and data.

Edge list::

    p 4
    0 -> 2
    0 -- 1

``#`` starts a comment.  Directed edges of an APDAG carry their origin as
a trailing comment (``0 -> 2  # from 3``), which readers ignore.  A
solution path is a sequence of edge-list blocks, each opened by a
``lambda: <value> rho: <value>`` header line.

SEM file::

    p 3
    B
    0.0 0.1 1.0
    0.0 0.0 1.0
    0.0 0.0 0.0
    D 1.0 1.0 1.0

Floats are written with ``repr`` so every format round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ges import PathEntry, SolutionPath
from .graph import Cpdag, GraphError, MixedGraph
from .sem import WeightedSem

__all__ = [
    "FormatError",
    "format_edges",
    "parse_edges",
    "graph_to_json",
    "graph_from_json",
    "format_path",
    "parse_path",
    "path_to_json",
    "format_sem",
    "parse_sem",
    "format_matrix_csv",
    "parse_matrix_csv",
    "read_data_csv",
    "write_data_csv",
    "read_labels",
    "write_labels",
]


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield no, body


def _fnum(v: float) -> str:
    return "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


# ---- edge lists -------------------------------------------------------


def format_edges(g: MixedGraph, labels: Optional[Sequence[str]] = None) -> str:
    out = [f"p {g.p}"]
    if labels is not None:
        out.append("# labels: " + " ".join(labels))
    prov = getattr(g, "provenance", {})
    for i, j in g.directed_edges():
        line = f"{i} -> {j}"
        if (i, j) in prov:
            line += f"  # from {prov[(i, j)]}"
        out.append(line)
    for i, j in g.undirected_edges():
        out.append(f"{i} -- {j}")
    return "\n".join(out) + "\n"


def _parse_block(rows, start_line=None) -> MixedGraph:
    p = None
    directed, undirected = [], []
    for no, body in rows:
        tok = body.split()
        if tok[0] == "p":
            if p is not None or len(tok) != 2:
                raise FormatError("expected a single 'p N' header", no)
            p = _int(tok[1], no)
            if p < 0:
                raise FormatError("p must be nonnegative", no)
            continue
        if p is None:
            raise FormatError("edge before the 'p N' header", no)
        if len(tok) != 3 or tok[1] not in ("->", "--", "<-"):
            raise FormatError(f"cannot parse edge {body!r}", no)
        a, b = _int(tok[0], no), _int(tok[2], no)
        if tok[1] == "--":
            undirected.append((a, b))
        elif tok[1] == "->":
            directed.append((a, b))
        else:
            directed.append((b, a))
    if p is None:
        raise FormatError("missing 'p N' header", start_line)
    try:
        return MixedGraph.from_edges(p, directed, undirected)
    except (GraphError, IndexError, ValueError) as e:
        raise FormatError(str(e), start_line) from None


def _int(s, no):
    try:
        return int(s)
    except ValueError:
        raise FormatError(f"expected an integer, got {s!r}", no) from None


def _float(s, no):
    if s == "NA":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise FormatError(f"expected a number, got {s!r}", no) from None


def parse_edges(text: str) -> MixedGraph:
    return _parse_block(list(_lines(text)), 1)


def graph_to_json(g: MixedGraph, labels: Optional[Sequence[str]] = None) -> dict:
    d = {
        "p": g.p,
        "directed": [list(e) for e in g.directed_edges()],
        "undirected": [list(e) for e in g.undirected_edges()],
    }
    prov = getattr(g, "provenance", None)
    if prov is not None:
        d["provenance"] = [[i, j, prov[(i, j)]] for i, j in g.directed_edges() if (i, j) in prov]
    if labels is not None:
        d["labels"] = list(labels)
    return d


def graph_from_json(d: dict) -> MixedGraph:
    try:
        return MixedGraph.from_edges(
            int(d["p"]), [tuple(e) for e in d.get("directed", [])], [tuple(e) for e in d.get("undirected", [])]
        )
    except (KeyError, TypeError, GraphError, IndexError, ValueError) as e:
        raise FormatError(f"bad graph object: {e}") from None


# ---- solution paths ---------------------------------------------------


def format_path(path: SolutionPath) -> str:
    blocks = []
    for e in path:
        head = f"lambda: {_fnum(e.lam)} rho: {_fnum(e.rho)}"
        blocks.append(head + "\n" + format_edges(e.cpdag))
    return "\n".join(blocks)


def parse_path(text: str) -> SolutionPath:
    blocks, cur, head = [], [], None
    for no, body in _lines(text):
        tok = body.split()
        if tok[0] == "lambda:":
            if head is not None:
                blocks.append((head, cur))
            if len(tok) != 4 or tok[2] != "rho:":
                raise FormatError("expected 'lambda: <x> rho: <y>'", no)
            lam, rho = _float(tok[1], no), _float(tok[3], no)
            head, cur = (no, lam, None if math.isnan(rho) else rho), []
        elif head is None:
            raise FormatError("path block without a 'lambda:' header", no)
        else:
            cur.append((no, body))
    if head is not None:
        blocks.append((head, cur))
    entries = []
    for (no, lam, rho), rows in blocks:
        g = _parse_block(rows, no)
        entries.append(PathEntry(lam, Cpdag(g.amat), rho))
    lams = [e.lam for e in entries]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise FormatError("path penalties must be strictly increasing")
    return SolutionPath(entries, lams[0] if lams else 0.0)


def path_to_json(path: SolutionPath) -> list:
    return [
        {"lambda": e.lam, "rho": e.rho, "graph": graph_to_json(e.cpdag)} for e in path
    ]


# ---- SEMs -------------------------------------------------------------


def format_sem(m: WeightedSem) -> str:
    out = [f"p {m.p}", "B"]
    for row in m.B:
        out.append(" ".join(repr(float(v)) for v in row))
    out.append("D " + " ".join(repr(float(v)) for v in m.D))
    return "\n".join(out) + "\n"


def parse_sem(text: str) -> WeightedSem:
    rows = list(_lines(text))
    if not rows or rows[0][1].split()[0] != "p":
        raise FormatError("missing 'p N' header", 1)
    tok = rows[0][1].split()
    if len(tok) != 2:
        raise FormatError("expected 'p N'", rows[0][0])
    p = _int(tok[1], rows[0][0])
    if len(rows) != p + 3 or rows[1][1] != "B":
        raise FormatError(f"expected 'B', {p} matrix rows and a 'D' line")
    B = []
    for no, body in rows[2 : 2 + p]:
        vals = [_float(v, no) for v in body.split()]
        if len(vals) != p:
            raise FormatError(f"expected {p} weights", no)
        B.append(vals)
    no, body = rows[-1]
    tok = body.split()
    if tok[0] != "D" or len(tok) != p + 1:
        raise FormatError(f"expected 'D' followed by {p} variances", no)
    D = [_float(v, no) for v in tok[1:]]
    try:
        return WeightedSem(np.array(B).reshape(p, p), np.array(D))
    except (GraphError, ValueError) as e:
        raise FormatError(str(e)) from None


# ---- matrices and data ------------------------------------------------


def format_matrix_csv(a, header: Optional[Sequence[str]] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in np.atleast_2d(a):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def parse_matrix_csv(text: str, header: bool = False) -> tuple[np.ndarray, Optional[list]]:
    """Numeric CSV; with ``header`` the first row holds column names."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    names = None
    if header:
        if not rows:
            raise FormatError("empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise FormatError("no numeric rows")
    width = len(rows[0])
    out = []
    for k, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise FormatError(f"expected {width} columns, got {len(r)}", k)
        out.append([_float(c.strip(), k) for c in r])
    a = np.array(out, dtype=float)
    if not np.all(np.isfinite(a)):
        raise FormatError("non-finite value in matrix")
    if names is not None and len(names) != width:
        raise FormatError("header and data widths differ")
    return a, names


def read_data_csv(path) -> tuple[np.ndarray, list]:
    """Data matrix with a header row of variable names."""
    text = Path(path).read_text()
    first = text.splitlines()[0] if text.strip() else ""
    has_header = any(not _is_number(c) for c in first.split(",")) if first else False
    X, names = parse_matrix_csv(text, header=has_header)
    return X, names or [f"X{k + 1}" for k in range(X.shape[1])]


def write_data_csv(path, X, names: Sequence[str]) -> None:
    Path(path).write_text(format_matrix_csv(X, header=names))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def labels_path(path) -> Path:
    return Path(str(path) + ".labels")


def write_labels(path, names: Sequence[str]) -> Path:
    out = labels_path(path)
    out.write_text("\n".join(names) + "\n")
    return out


def read_labels(path) -> Optional[list]:
    lp = labels_path(path)
    if not lp.exists():
        return None
    return [s.strip() for s in lp.read_text().splitlines() if s.strip()]


def dumps_json(obj) -> str:
    """Stable JSON: sorted keys, ``NaN`` written as ``null``."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj
