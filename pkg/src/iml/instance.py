"""Instance files and deterministic report serialization.

Instances are JSON objects.  Complex numbers are ``[re, im]`` pairs and
exact rationals are strings ``"p/q"``; exponents given as strings or
integers are kept exact.  Unknown fields are rejected.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from .core import ExactScalar, MarkedSphere
from .errors import ValidationError
from .parabolic import ExponentData, FuchsianSystem, ParabolicConnection, StabilityCandidate, Weights
from .schlesinger import DeformationPath

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "base": 1e-9,
    "transport": 1e-12,
    "flow": 1e-12,
    "rh": 1e-6,
    "relation": 1e-8,
    "isomonodromy": 1e-6,
    "conservation_sum": 1e-9,
    "conservation_spectrum": 1e-8,
    "oracle": 1e-6,
    "invariance": 1e-8,
}

FIELDS = {
    "schema_version", "name", "rank", "punctures", "include_infinity", "basepoint", "residues",
    "lambda", "weights", "tolerances", "deformation_path", "seed", "script", "candidates",
    "flow_options", "notes",
}


# --------------------------------------------------------------------------
# scalar parsing

def _exact_part(x, what):
    if isinstance(x, bool):
        raise ValidationError(f"{what}: booleans are not numbers")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"{what}: cannot read {x!r} as a rational") from None
    return None


def parse_complex(x, what="value") -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValidationError(f"{what}: complex numbers are [re, im] pairs")
        re, im = (parse_real(v, what) for v in x)
        return complex(re, im)
    return complex(parse_real(x, what), 0.0)


def parse_real(x, what="value") -> float:
    e = _exact_part(x, what)
    if e is not None:
        return float(e)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValidationError(f"{what}: non-finite number")
        return x
    raise ValidationError(f"{what}: expected a number, got {type(x).__name__}")


def parse_exponent(x, what="lambda"):
    """Exact scalar for rational input, complex float otherwise."""
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValidationError(f"{what}: complex numbers are [re, im] pairs")
        parts = [_exact_part(v, what) for v in x]
        if all(p is not None for p in parts):
            return ExactScalar(parts[0], parts[1])
        return parse_complex(x, what)
    e = _exact_part(x, what)
    if e is not None:
        return ExactScalar(e)
    return complex(parse_real(x, what))


def _matrix(m, r, what):
    if not isinstance(m, list) or len(m) != r or any(not isinstance(row, list) or len(row) != r for row in m):
        raise ValidationError(f"{what} must be an {r}x{r} array")
    return np.array([[parse_complex(v, what) for v in row] for row in m], dtype=complex)


# --------------------------------------------------------------------------

@dataclass
class Instance:
    name: str
    rank: int
    sphere: MarkedSphere
    system: FuchsianSystem
    exponents: Optional[ExponentData]
    weights: dict
    tolerances: dict
    path: Optional[DeformationPath]
    seed: int
    script: list
    candidates: Optional[list]
    flow_options: dict
    raw: dict = field(repr=False)

    def connection(self, from_spectrum: bool = False) -> ParabolicConnection:
        """Parabolic connection; ``from_spectrum`` ignores the declared exponents."""
        ex = self.exponents
        if ex is None or from_spectrum:
            ex = ExponentData.from_table([np.linalg.eigvals(A) for A in self.system.residues])
        return ParabolicConnection.build(self.system, ex, tol=max(self.tolerances["base"], 1e-9))


def parse_instance(data: Any) -> Instance:
    if not isinstance(data, dict):
        raise ValidationError("instance must be a JSON object")
    unknown = sorted(set(data) - FIELDS)
    if unknown:
        raise ValidationError(f"unknown fields: {', '.join(unknown)}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"schema_version must be {SCHEMA_VERSION}")
    for key in ("rank", "punctures", "basepoint", "residues"):
        if key not in data:
            raise ValidationError(f"missing field {key!r}")
    r = data["rank"]
    if not isinstance(r, int) or isinstance(r, bool) or r < 1:
        raise ValidationError("rank must be a positive integer")
    if not isinstance(data["punctures"], list) or not data["punctures"]:
        raise ValidationError("punctures must be a non-empty list")
    pts = [parse_complex(p, "punctures") for p in data["punctures"]]
    n = len(pts)
    inf = data.get("include_infinity", False)
    if not isinstance(inf, bool):
        raise ValidationError("include_infinity must be true or false")
    tol = dict(DEFAULT_TOLERANCES)
    extra = data.get("tolerances", {})
    if not isinstance(extra, dict):
        raise ValidationError("tolerances must be an object")
    for k, v in extra.items():
        if k not in DEFAULT_TOLERANCES:
            raise ValidationError(f"unknown tolerance {k!r}")
        tol[k] = parse_real(v, f"tolerances.{k}")
        if tol[k] <= 0:
            raise ValidationError(f"tolerance {k} must be positive")
    sphere = MarkedSphere(tuple(pts), parse_complex(data["basepoint"], "basepoint"), inf)
    res = data["residues"]
    if not isinstance(res, list) or len(res) != n:
        raise ValidationError(f"residues must list {n} matrices")
    A = np.array([_matrix(m, r, f"residues[{k}]") for k, m in enumerate(res)])
    system = FuchsianSystem(sphere, A, tol["base"])
    ex = None
    if "lambda" in data:
        lam = data["lambda"]
        if not isinstance(lam, list) or len(lam) != n or any(not isinstance(row, list) or len(row) != r for row in lam):
            raise ValidationError(f"lambda must be an {n}x{r} table")
        ex = ExponentData.from_table([[parse_exponent(x) for x in row] for row in lam])
    weights = {}
    if "weights" in data:
        w = data["weights"]
        tables = w if isinstance(w, dict) else {"alpha": w}
        for label in sorted(tables):
            tab = tables[label]
            if not isinstance(tab, list):
                raise ValidationError(f"weights {label!r} must be a table")
            try:
                weights[label] = Weights(tuple(tuple(Fraction(str(a)) for a in row) for row in tab))
            except (ValueError, ZeroDivisionError, TypeError):
                raise ValidationError(f"weights {label!r} must hold rationals") from None
            if weights[label].n != n or weights[label].r != r:
                raise ValidationError(f"weights {label!r} must be an {n}x{r} table")
    path = None
    if "deformation_path" in data:
        samples = data["deformation_path"]
        if not isinstance(samples, list) or len(samples) < 2:
            raise ValidationError("deformation_path must list at least two configurations")
        conf = []
        for c in samples:
            if not isinstance(c, list) or len(c) != n:
                raise ValidationError(f"each configuration must list {n} punctures")
            conf.append([parse_complex(p, "deformation_path") for p in c])
        path = DeformationPath(np.array(conf))
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("seed must be an integer")
    script = data.get("script", [])
    if isinstance(script, str):
        script = split_script(script)
    if not isinstance(script, list) or not all(isinstance(s, str) for s in script):
        raise ValidationError("script must be a string or a list of strings")
    cands = None
    if "candidates" in data:
        cands = []
        for c in data["candidates"]:
            try:
                cands.append(StabilityCandidate(int(c["rank"]), int(c["degree"]),
                                                tuple(tuple(int(x) for x in row) for row in c["dims"]),
                                                str(c.get("label", ""))))
            except (KeyError, TypeError, ValueError):
                raise ValidationError("candidates need rank, degree and dims") from None
    fo = data.get("flow_options", {})
    if not isinstance(fo, dict) or set(fo) - {"regularize", "switch", "threshold"}:
        raise ValidationError("flow_options accepts regularize, switch and threshold")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise ValidationError("name must be a string")
    return Instance(name, r, sphere, system, ex, weights, tol, path, seed, script, cands, dict(fo), data)


def load_instance(path: str) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return parse_instance(data)


def split_script(text: str) -> list:
    parts = []
    for line in text.replace(";", "\n").splitlines():
        line = line.strip()
        if line:
            parts.append(line)
    return parts


# --------------------------------------------------------------------------
# serialization

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0:
        return "0.0"
    return format(x, ".17g")


def to_jsonable(obj):
    """Plain containers with complex as [re, im] and rationals as "p/q"."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, ExactScalar):
        return str(obj.re) if obj.im == 0 else [str(obj.re), str(obj.im)]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: insertion order kept, floats with 17 significant digits."""
    obj = to_jsonable(obj)
    out: list = []

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, dict):
            if not v:
                out.append("{}")
                return
            out.append("{\n")
            for k, (key, val) in enumerate(v.items()):
                out.append(pad + json.dumps(key) + ": ")
                emit(val, level + 1)
                out.append(",\n" if k < len(v) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(v, list):
            if not v:
                out.append("[]")
                return
            if all(not isinstance(x, (dict, list)) for x in v):
                out.append("[" + ", ".join(_scalar(x) for x in v) + "]")
                return
            out.append("[\n")
            for k, val in enumerate(v):
                out.append(pad)
                emit(val, level + 1)
                out.append(",\n" if k < len(v) - 1 else "\n")
            out.append(end + "]")
        else:
            out.append(_scalar(v))

    emit(obj, 0)
    return "".join(out) + "\n"


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return _fmt_float(v)
    return json.dumps(v, ensure_ascii=False)


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".iml-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def connection_to_instance(conn: ParabolicConnection, base: Optional[dict] = None) -> dict:
    """Instance dictionary describing ``conn`` (other fields copied from ``base``)."""
    out = {"schema_version": SCHEMA_VERSION}
    if base:
        for key in ("name", "seed", "tolerances"):
            if key in base:
                out[key] = base[key]
    out.update({
        "rank": conn.r,
        "punctures": list(conn.sphere.punctures),
        "include_infinity": conn.sphere.include_infinity,
        "basepoint": conn.sphere.basepoint,
        "residues": conn.system.residues,
        "lambda": [list(row) for row in conn.exponents.lam],
    })
    return out
