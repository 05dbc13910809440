"""
Touchstone v1 and CSV readers, and writers for analysis results.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .spectrum import SampledResponse

REPORT_VERSION = 1
_UNITS = {"HZ": 1, "KHZ": 10 ** 3, "MHZ": 10 ** 6, "GHZ": 10 ** 9}
_FORMATS = ("RI", "MA", "DB")


class ParseError(ValueError):
    """Malformed input; the message names the offending line or row."""


@dataclass(frozen=True)
class Network:
    """
    S-parameters of an ``n``-port on a frequency grid.

    ``s`` has shape ``(n_freqs, n_ports, n_ports)``; ``freqs`` are in Hz.
    """

    freqs: np.ndarray
    s: np.ndarray
    z_ref: float = 50.0

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[0] != len(f):
            raise ValueError("s must have shape (n_freqs, n, n)")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "s", s)

    @property
    def n_ports(self):
        return self.s.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.z_ref == other.z_ref
                and np.array_equal(self.freqs, other.freqs)
                and np.array_equal(self.s, other.s))

    __hash__ = None


def _ports_from_name(name):
    if not name:
        return None
    ext = os.path.splitext(name)[1].lower()
    if len(ext) >= 4 and ext.startswith(".s") and ext.endswith("p"):
        try:
            return int(ext[2:-1])
        except ValueError:
            return None
    return None


def _options(tokens, lineno):
    unit, fmt, z = "GHZ", "MA", 50.0
    rest = [t.upper() for t in tokens[1:]]
    i = 0
    while i < len(rest):
        t = rest[i]
        if t in _UNITS:
            unit = t
        elif t in _FORMATS:
            fmt = t
        elif t == "S":
            pass
        elif t in ("Y", "Z", "H", "G"):
            raise ParseError(
                f"line {lineno}: {t}-parameters are not supported, only S")
        elif t == "R":
            if i + 1 >= len(rest):
                raise ParseError(f"line {lineno}: missing reference impedance")
            try:
                z = float(rest[i + 1])
            except ValueError:
                raise ParseError(
                    f"line {lineno}: bad reference impedance {rest[i + 1]!r}"
                ) from None
            i += 1
        else:
            raise ParseError(f"line {lineno}: unknown option {tokens[i + 1]!r}")
        i += 1
    return _UNITS[unit], fmt, z


def _cis_deg(deg):
    """``exp(i deg)`` for angles in degrees, exact at multiples of 90."""
    deg = np.asarray(deg, dtype=float)
    r = np.mod(deg, 360.0)
    out = np.exp(1j * np.deg2rad(deg))
    for q, v in ((0.0, 1), (90.0, 1j), (180.0, -1), (270.0, -1j)):
        out = np.where(r == q, v, out)
    return out


def _to_complex(a, b, fmt):
    if fmt == "RI":
        return a + 1j * b
    mag = 10 ** (a / 20) if fmt == "DB" else a
    z = _cis_deg(b)
    # multiply parts separately so exact zeros do not become 0 * inf terms
    return mag * z.real + 1j * (mag * z.imag)


def parse_touchstone(data, n_ports=None, name=None):
    """
    Parse Touchstone v1 content.

    Parameters
    ----------
    data : bytes or str
    n_ports : int, optional
        Port count; inferred from ``name`` (``.sNp``) or from the first data
        line of a 1- or 2-port file when omitted.
    name : str, optional
        File name used only for the port count.

    Returns
    -------
    Network
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    n = n_ports or _ports_from_name(name)
    scale, fmt, z = 10 ** 9, "MA", 50.0
    seen_opt = False
    tokens = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise ParseError(
                f"line {lineno}: Touchstone v2 keyword {line.split()[0]} is "
                "not supported")
        if line.startswith("#"):
            if not seen_opt:
                scale, fmt, z = _options(line.split(), lineno)
                seen_opt = True
            continue
        parts = line.split()
        if n is None:
            n = {3: 1, 9: 2}.get(len(parts))
            if n is None:
                raise ParseError(
                    f"line {lineno}: cannot infer port count from "
                    f"{len(parts)} values; pass n_ports")
        for p in parts:
            try:
                float(p)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: malformed number {p!r}") from None
            tokens.append((p, lineno))
    if n is None or not tokens:
        raise ParseError("no data lines")
    width = 1 + 2 * n * n
    if len(tokens) % width:
        raise ParseError(
            f"line {tokens[-1][1]}: incomplete record, expected multiples of "
            f"{width} values")
    vals = np.array([float(t) for t, _ in tokens]).reshape(-1, width)
    lines = [tokens[i][1] for i in range(0, len(tokens), width)]
    # scale in decimal so that e.g. 1.5 GHz and 1500000000 Hz agree exactly
    freqs = np.array([float(Decimal(tokens[i][0]) * scale)
                      for i in range(0, len(tokens), width)])
    for k in range(1, len(freqs)):
        if freqs[k] <= freqs[k - 1]:
            raise ParseError(f"line {lines[k]}: frequency not increasing")
    pairs = _to_complex(vals[:, 1::2], vals[:, 2::2], fmt)
    s = pairs.reshape(-1, n, n)
    if n == 2:
        s = s.transpose(0, 2, 1)
    return Network(freqs, s, z)


def _fmt(x):
    return repr(float(x))


def write_touchstone(net: Network, fmt="RI"):
    """
    Serialize as Touchstone v1 with frequencies in Hz.

    Values are written with round-trip precision, so parsing the result
    gives back the same network bit for bit in ``RI`` format.
    """
    fmt = fmt.upper()
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}")
    n = net.n_ports
    s = net.s.transpose(0, 2, 1) if n == 2 else net.s
    out = io.StringIO()
    out.write(f"# HZ S {fmt} R {_fmt(net.z_ref)}\n")
    for f, m in zip(net.freqs, s.reshape(len(net.freqs), -1)):
        if fmt == "RI":
            a, b = m.real, m.imag
        else:
            mag = np.abs(m)
            a = 20 * np.log10(mag) if fmt == "DB" else mag
            b = np.rad2deg(np.angle(m))
        cells = []
        for x, y in zip(a, b):
            cells.append(f"{_fmt(x)} {_fmt(y)}")
        if n <= 2:
            out.write(" ".join([_fmt(f)] + cells) + "\n")
            continue
        # one matrix row per line group, at most four pairs per line
        for r in range(n):
            row = cells[r * n:(r + 1) * n]
            for k in range(0, n, 4):
                lead = _fmt(f) if r == 0 and k == 0 else ""
                out.write(" ".join(([lead] if lead else [" "]) + row[k:k + 4])
                          + "\n")
    return out.getvalue()


def parse_csv(data):
    """
    Read ``freq_hz,re,im`` or ``freq_rads,re,im`` tables.

    Returns
    -------
    SampledResponse
        Frequencies in rad/s.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty CSV") from None
    if "freq_hz" in header:
        fcol, fscale = header.index("freq_hz"), 2 * math.pi
    elif "freq_rads" in header:
        fcol, fscale = header.index("freq_rads"), 1.0
    else:
        raise ParseError("missing column freq_hz or freq_rads")
    for col in ("re", "im"):
        if col not in header:
            raise ParseError(f"missing column {col}")
    rc, ic = header.index("re"), header.index("im")
    w, h = [], []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            f, a, b = float(row[fcol]), float(row[rc]), float(row[ic])
        except (ValueError, IndexError):
            raise ParseError(f"row {row_no}: malformed values") from None
        if not all(math.isfinite(v) for v in (f, a, b)):
            raise ParseError(f"row {row_no}: non-finite value")
        w.append(f * fscale)
        h.append(complex(a, b))
    try:
        return SampledResponse(np.array(w), np.array(h))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def write_csv(resp: SampledResponse):
    """Serialize a response as ``freq_rads,re,im``."""
    out = io.StringIO()
    out.write("freq_rads,re,im\n")
    for f, v in zip(resp.freqs, resp.values):
        out.write(f"{_fmt(f)},{_fmt(v.real)},{_fmt(v.imag)}\n")
    return out.getvalue()


def select_element(net: Network, i, j):
    """``S_ij`` (1-based) as a response in rad/s."""
    n = net.n_ports
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"element ({i},{j}) out of range for {n}-port")
    return SampledResponse(2 * math.pi * net.freqs, net.s[:, i - 1, j - 1],
                           label=f"S{i}{j}")


def load_response(path, element=(1, 1)):
    """Read a CSV or Touchstone file into a response."""
    with open(path, "rb") as fh:
        data = fh.read()
    if path.lower().endswith(".csv"):
        return parse_csv(data)
    net = parse_touchstone(data, name=path)
    return select_element(net, *element)


@dataclass
class Report:
    """
    Serializable summary of one run.

    ``elements`` holds one dict per analysed element with keys ``element``,
    ``estimates`` (list of per-``M`` dicts), ``averaged_s``, ``plateau`` and
    ``verdict``.
    """

    input: str
    config: dict
    elements: list = field(default_factory=list)
    version: int = REPORT_VERSION
    tool: str = ""

    def to_dict(self):
        return {"version": self.version, "tool": self.tool,
                "input": self.input, "config": self.config,
                "elements": self.elements}

    @classmethod
    def from_dict(cls, d):
        return cls(input=d["input"], config=d["config"],
                   elements=d["elements"], version=d["version"],
                   tool=d.get("tool", ""))

    def dumps(self):
        return json.dumps(_plain(self.to_dict()), indent=2, sort_keys=True,
                          allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def curve_csv(curve):
    out = io.StringIO()
    out.write("t_scaled,t_seconds,err_re_inf,err_im_inf\n")
    for t, ts, er, ei in zip(curve.ts, curve.t_seconds, curve.errs,
                             curve.errs_im):
        out.write(f"{_fmt(t)},{_fmt(ts)},{_fmt(er)},{_fmt(ei)}\n")
    return out.getvalue()


def fit_csv(fit, xi, scale_a, n=100):
    """
    Fitted curve sampled from ``xi`` up to the top of its window.
    """
    lo = min(math.log(xi), math.log(fit.e_range[0]))
    hi = math.log(fit.e_range[1])
    out = io.StringIO()
    out.write("err,t_scaled,t_seconds\n")
    for u in np.linspace(lo, hi, n):
        t = math.exp(fit.log_time(u))
        out.write(f"{_fmt(math.exp(u))},{_fmt(t)},{_fmt(t * scale_a)}\n")
    return out.getvalue()


def write_outputs(report: Report, curves=(), out_dir=".", fits=(), xi=1e-13,
                  prefix=""):
    """
    Write ``report.json``, ``curve_M<M>.csv`` and ``fit_M<M>.csv``.

    Returns
    -------
    list of str
        Paths written.
    """
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        written.append(path)

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror}") from exc
    put("report.json", report.dumps())
    for c in curves:
        put(f"{prefix}curve_M{c.M}.csv", curve_csv(c))
    for M, fit, a in fits:
        put(f"{prefix}fit_M{M}.csv", fit_csv(fit, xi, a))
    return written
