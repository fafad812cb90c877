"""Plain-text tensor files.

Layout (UTF-8, whitespace separated)::

    dense <d>            | cp <d> <r>          | tucker <d>
    n_1 ... n_d          | n_1 ... n_d         | n_1 ... n_d
    values (C order)     | weights             | t_1 ... t_d
                         | B_1 row-major ...   | core values (C order)
                         |                     | B_1 row-major ...

Floats are written with ``repr`` so a write/read round trip is exact and
files are byte-identical for identical inputs.
"""

import io
import os

import numpy as np

from .errors import TensorFormatError
from .tensors import CPTensor, RankOneRep, TuckerTensor, as_dense

_KINDS = {"dense", "cp", "tucker"}


class _Tokens:
    def __init__(self, text):
        self._toks = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self._toks.append((tok, lineno))
        self._pos = 0

    @property
    def line(self):
        if self._pos < len(self._toks):
            return self._toks[self._pos][1]
        return self._toks[-1][1] if self._toks else 1

    def next(self, what):
        if self._pos >= len(self._toks):
            raise TensorFormatError(f"unexpected end of file while reading {what}", self.line)
        tok, _ = self._toks[self._pos]
        self._pos += 1
        return tok

    def ints(self, count, what):
        out = []
        for _ in range(count):
            line = self.line
            tok = self.next(what)
            try:
                v = int(tok)
            except ValueError:
                raise TensorFormatError(f"expected integer for {what}, got {tok!r}", line) from None
            if v < 1:
                raise TensorFormatError(f"{what} must be positive, got {v}", line)
            out.append(v)
        return out

    def floats(self, count, what):
        out = np.empty(count)
        for i in range(count):
            line = self.line
            tok = self.next(what)
            try:
                out[i] = float(tok)
            except ValueError:
                raise TensorFormatError(f"expected number for {what}, got {tok!r}", line) from None
        return out

    def finish(self):
        if self._pos < len(self._toks):
            tok, line = self._toks[self._pos]
            raise TensorFormatError(f"trailing token {tok!r}", line)


def _parse(text):
    toks = _Tokens(text)
    kind = toks.next("header")
    if kind not in _KINDS:
        raise TensorFormatError(f"unknown tensor kind {kind!r}", 1)
    (d,) = toks.ints(1, "order")
    if d < 2:
        raise TensorFormatError("order must be at least 2", 1)
    r = toks.ints(1, "rank")[0] if kind == "cp" else None
    dims = toks.ints(d, "dims")
    if kind == "dense":
        values = toks.floats(int(np.prod(dims)), "values")
        toks.finish()
        return kind, dims, values.reshape(dims)
    if kind == "cp":
        weights = toks.floats(r, "weights")
        mats = [toks.floats(n * r, f"factor {mu + 1}").reshape(n, r) for mu, n in enumerate(dims)]
        toks.finish()
        return kind, dims, (weights, mats)
    ranks = toks.ints(d, "core dims")
    for mu, (t, n) in enumerate(zip(ranks, dims)):
        if t > n:
            raise TensorFormatError(f"core dim {t} exceeds mode size {n} in mode {mu + 1}", 2)
    core = toks.floats(int(np.prod(ranks)), "core values").reshape(ranks)
    mats = [toks.floats(n * t, f"factor {mu + 1}").reshape(n, t) for mu, (n, t) in enumerate(zip(dims, ranks))]
    toks.finish()
    return kind, dims, (core, mats)


def _cp_from_raw(weights, mats):
    # fold column norms and signs into the weights so the CP invariants hold
    weights = np.array(weights, dtype=np.float64)
    mats = [np.array(B, dtype=np.float64) for B in mats]
    for B in mats:
        nrm = np.linalg.norm(B, axis=0)
        if np.any(nrm == 0):
            raise TensorFormatError("CP factor has a zero column")
        # leave unit columns untouched so a write/read round trip is exact
        nrm[np.abs(nrm - 1.0) <= 1e-13] = 1.0
        B /= nrm
        weights *= nrm
    neg = weights < 0
    mats[0][:, neg] *= -1
    weights = np.abs(weights)
    r = weights.size
    ortho = all(np.max(np.abs(B.T @ B - np.eye(r))) <= 1e-12 for B in mats)
    return CPTensor(weights, tuple(mats), orthonormal=ortho)


def loads(text):
    """Parse tensor text into an ndarray, :class:`CPTensor` or :class:`TuckerTensor`."""
    kind, _, payload = _parse(text)
    if kind == "dense":
        return as_dense(payload)
    if kind == "cp":
        return _cp_from_raw(*payload)
    core, mats = payload
    return TuckerTensor(core, tuple(mats))


def loads_rank_one(text):
    """Parse a ``cp <d> 1`` file as a representation system (weight folded into factor 1)."""
    kind, _, payload = _parse(text)
    if kind != "cp" or payload[0].size != 1:
        raise TensorFormatError("a rank-one point must be stored as 'cp <d> 1'")
    weights, mats = payload
    fs = [B[:, 0] for B in mats]
    fs[0] = fs[0] * weights[0]
    return RankOneRep(fs)


def read_tensor(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def read_rank_one(path):
    with open(path, encoding="utf-8") as fh:
        return loads_rank_one(fh.read())


def _fmt(values):
    return " ".join(repr(float(x)) for x in np.ravel(values))


def _write_matrix(out, B):
    for row in np.atleast_2d(B):
        out.write(_fmt(row) + "\n")


def dumps(t):
    """Serialize a dense array, :class:`CPTensor`, :class:`TuckerTensor` or :class:`RankOneRep`."""
    out = io.StringIO()
    if isinstance(t, RankOneRep):
        out.write(f"cp {t.order} 1\n")
        out.write(" ".join(str(n) for n in t.dims) + "\n")
        out.write("1.0\n")
        for p in t.factors:
            _write_matrix(out, p.reshape(-1, 1))
    elif isinstance(t, CPTensor):
        out.write(f"cp {t.order} {t.rank}\n")
        out.write(" ".join(str(n) for n in t.dims) + "\n")
        out.write(_fmt(t.weights) + "\n")
        for B in t.factors:
            _write_matrix(out, B)
    elif isinstance(t, TuckerTensor):
        out.write(f"tucker {t.order}\n")
        out.write(" ".join(str(n) for n in t.dims) + "\n")
        out.write(" ".join(str(n) for n in t.ranks) + "\n")
        _write_matrix(out, t.core.reshape(-1, t.core.shape[-1]))
        for B in t.factors:
            _write_matrix(out, B)
    else:
        a = as_dense(t)
        out.write(f"dense {a.ndim}\n")
        out.write(" ".join(str(n) for n in a.shape) + "\n")
        _write_matrix(out, a.reshape(-1, a.shape[-1]))
    return out.getvalue()


def write_tensor(t, path):
    text = dumps(t)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
