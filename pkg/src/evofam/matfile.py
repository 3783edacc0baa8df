"""Dense matrix text files and tabulated problem files.

Matrix format, row-major::

    # optional comment lines
    n n
    a11 a12 ... a1n
    ...
    an1 an2 ... ann

Real rows hold ``n`` numbers; complex rows hold ``2n`` numbers, each entry
written as a ``re im`` pair.  A file may contain several matrices one
after another, each with its own header.

A problem file is JSON::

    {"mass": "mass.txt", "vgram": "vgram.txt", "matrices": "forms.txt",
     "times": [0.0, 0.5, 1.0], "gamma": 0.5}

``matrices`` holds one matrix per entry of ``times``; the form is
interpolated linearly in t between them.  An optional ``"horizon"`` must
match the last time, or sets T when only one matrix is given.  Paths are
relative to the JSON.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forms import FormError, Modulus, NonautonomousForm, boundedness_constant, coercivity_constant
from .gelfand import GelfandTriple


def _format_entry(x) -> str:
    return repr(float(x))


def write_matrices(path, matrices) -> None:
    lines = []
    for A in matrices:
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"only square matrices can be written, got {A.shape}")
        n = A.shape[0]
        lines.append(f"{n} {n}")
        cplx = np.iscomplexobj(A) and np.any(A.imag != 0)
        for row in A:
            if cplx:
                lines.append(" ".join(f"{_format_entry(z.real)} {_format_entry(z.imag)}" for z in row))
            else:
                lines.append(" ".join(_format_entry(z.real) for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_matrix(path, A) -> None:
    write_matrices(path, [A])


def read_matrices(path) -> list[np.ndarray]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    out = []
    i = 0
    while i < len(rows):
        head = rows[i]
        if len(head) != 2 or head[0] != head[1] or not head[0].isdigit() or int(head[0]) < 1:
            raise FormError(f"{path}: expected header 'n n', got {' '.join(head)!r}")
        n = int(head[0])
        body = rows[i + 1 : i + 1 + n]
        if len(body) != n:
            raise FormError(f"{path}: matrix truncated, expected {n} rows")
        widths = {len(r) for r in body}
        if widths not in ({n}, {2 * n}):
            raise FormError(f"{path}: rows must hold {n} reals or {2 * n} values (re im pairs)")
        try:
            vals = np.array(body, dtype=float)
        except ValueError as exc:
            raise FormError(f"{path}: {exc}") from None
        if widths == {n}:
            A = vals
        else:
            pairs = vals.reshape(n, n, 2)
            A = pairs[..., 0] + 1j * pairs[..., 1]
        out.append(A)
        i += 1 + n
    return out


def read_matrix(path) -> np.ndarray:
    mats = read_matrices(path)
    if len(mats) != 1:
        raise FormError(f"{path}: expected exactly one matrix, found {len(mats)}")
    return mats[0]


def tabulated_form(
    triple: GelfandTriple, times, matrices, gamma: float = 0.5, meta=None, horizon: float | None = None
) -> NonautonomousForm:
    """Form interpolating ``matrices`` linearly between ``times``.

    A single table entry gives an autonomous form on ``[0, horizon]``
    (default 1).  Otherwise the horizon is the last tabulated time.

    Coercivity is concave and the bound convex along each segment, so their
    extremes sit at the table points and the declared constants are exact.
    The modulus is Lipschitz with the steepest segment slope in the
    ``V_gamma`` form norm.
    """
    times = np.asarray(times, dtype=float)
    mats = np.array([np.asarray(A) for A in matrices])
    if times.ndim != 1 or times.size < 1 or times.size != mats.shape[0]:
        raise FormError("need one matrix per tabulated time")
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise FormError("tabulated times must start at 0 and increase strictly")
    if mats.shape[1:] != (triple.dim, triple.dim):
        raise FormError(f"tabulated matrices must be {triple.dim}x{triple.dim}")
    mats.setflags(write=False)
    if times.size > 1:
        if horizon is not None and abs(float(horizon) - times[-1]) > 1e-12:
            raise FormError("horizon disagrees with the last tabulated time")
        horizon = float(times[-1])
    else:
        horizon = 1.0 if horizon is None else float(horizon)

    def evaluate(t, _t=times, _m=mats):
        if _t.size == 1:
            return _m[0]
        k = int(np.clip(np.searchsorted(_t, t, side="right") - 1, 0, _t.size - 2))
        w = (t - _t[k]) / (_t[k + 1] - _t[k])
        return (1 - w) * _m[k] + w * _m[k + 1]

    slope = 0.0
    for k in range(times.size - 1):
        slope = max(slope, triple.form_norm(mats[k + 1] - mats[k], gamma, gamma) / (times[k + 1] - times[k]))
    probe = NonautonomousForm(triple, horizon, evaluate, 1.0, 1.0, Modulus.power(slope, 1.0), gamma, dict(meta or {}))
    table_times = times if times.size > 1 else [0.0]
    alpha = min(coercivity_constant(probe, t) for t in table_times)
    bound = max(boundedness_constant(probe, t) for t in table_times)
    return NonautonomousForm(triple, horizon, evaluate, bound, alpha, probe.modulus, gamma, probe.meta)


def load_problem(path) -> tuple[GelfandTriple, NonautonomousForm]:
    path = Path(path)
    desc = json.loads(path.read_text())
    base = path.parent
    for key in ("mass", "vgram", "matrices", "times"):
        if key not in desc:
            raise FormError(f"{path}: problem file lacks {key!r}")
    triple = GelfandTriple(read_matrix(base / desc["mass"]), read_matrix(base / desc["vgram"]))
    mats = read_matrices(base / desc["matrices"])
    meta = {"problem": "file", "path": str(path)}
    try:
        form = tabulated_form(triple, desc["times"], mats, desc.get("gamma", 0.5), meta, desc.get("horizon"))
    except FormError as exc:
        raise FormError(f"{path}: {exc}") from None
    return triple, form


def export_problem(directory, form: NonautonomousForm, times) -> Path:
    """Write ``form`` sampled at ``times`` as a problem file plus matrix files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "mass.txt", form.triple.mass)
    write_matrix(d / "vgram.txt", form.triple.vgram)
    write_matrices(d / "matrices.txt", [form.at(t) for t in times])
    desc = {
        "mass": "mass.txt",
        "vgram": "vgram.txt",
        "matrices": "matrices.txt",
        "times": [float(t) for t in times],
        "gamma": form.gamma,
        "horizon": form.horizon,
    }
    out = d / "problem.json"
    out.write_text(json.dumps(desc, indent=2) + "\n")
    return out
