"""Metric definitions: symbolic components, coordinate ranges, presets.

A :class:`MetricSpec` stores the lower-index metric components as parsed
expressions (upper triangle only; the tensor is symmetric by construction)
together with per-coordinate ranges and periodicity flags.  Positive
definiteness is a property of evaluation points, checked when the metric is
evaluated, not at parse time.

Config files are TOML documents::

    dimension = 2
    name = "my-metric"

    [component]
    1.1 = "1"
    2.2 = "x1^2"

    [range]
    1 = [0.0, "inf", false]
    2 = [0.0, "2pi", true]

Off-diagonal components default to zero; diagonal entries are mandatory.
Range endpoints accept numbers or the strings "inf", "-inf", "pi", "2pi",
"-pi".
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

from .expressions import BinOp, Const, Expr, Func, Pow, Var, parse_expression

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = [
    "CoordinateRange",
    "MetricSpec",
    "MetricConfigError",
    "parse_metric_config",
    "load_metric",
    "resolve_preset",
    "PRESET_NAMES",
]


class MetricConfigError(ValueError):
    """Invalid metric configuration document or preset name."""


@dataclass(frozen=True)
class CoordinateRange:
    low: float
    high: float
    periodic: bool = False

    @property
    def period(self) -> float:
        return self.high - self.low

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        if self.periodic:
            return True
        return self.low - tol <= x <= self.high + tol

    def reduce(self, x):
        """Reduce periodic coordinates modulo the period."""
        if not self.periodic:
            return x
        return self.low + (x - self.low) % self.period


@dataclass(frozen=True)
class MetricSpec:
    """Symmetric metric tensor with symbolic components.

    ``components`` maps (i, j) with i <= j (1-based) to expression trees;
    missing off-diagonal pairs are zero.
    """

    n: int
    components: dict = field(compare=False)
    ranges: tuple
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise MetricConfigError("dimension must be >= 1")
        for i in range(1, self.n + 1):
            if (i, i) not in self.components:
                raise MetricConfigError(f"missing diagonal component ({i},{i})")
        if len(self.ranges) != self.n:
            raise MetricConfigError(
                f"expected {self.n} coordinate ranges, got {len(self.ranges)}"
            )

    def component(self, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        return self.components.get((i, j), Const(0.0))

    def component_entries(self):
        """Iterate (i, j, expr) over the stored upper triangle."""
        for (i, j), expr in sorted(self.components.items()):
            yield i, j, expr

    def reduce_point(self, point):
        """Reduce periodic coordinates of a point into their base window."""
        coords = list(point)
        for k, rng in enumerate(self.ranges):
            coords[k] = rng.reduce(coords[k])
        return coords

    def validate_point(self, point) -> None:
        for k, (x, rng) in enumerate(zip(point, self.ranges), start=1):
            if not rng.contains(float(x)):
                raise ValueError(
                    f"coordinate x{k}={x} outside range [{rng.low}, {rng.high}]"
                )


# ---------------------------------------------------------------------------
# presets

INF = math.inf
PRESET_NAMES = (
    "flat-cartesian-N",
    "flat-polar-2",
    "sphere-2(a)",
    "hyperbolic-2(a)",
    "conformal-2(expr)",
)

_PRESET_RE = re.compile(r"^([a-z-]+?)-(\d+)(?:\((.*)\)|:(.+))?$")


def _expr(text: str, n: int) -> Expr:
    return parse_expression(text, n)


def resolve_preset(name: str) -> MetricSpec:
    """Resolve a named preset, e.g. ``sphere-2(1)`` or ``flat-cartesian-3``.

    ``family-n:arg`` is accepted as shorthand for ``family-n(arg)``.
    """
    m = _PRESET_RE.match(name.strip())
    if not m:
        raise MetricConfigError(f"unrecognized preset name {name!r}")
    family, dim_s, arg_paren, arg_colon = m.groups()
    n = int(dim_s)
    arg = arg_paren if arg_paren is not None else arg_colon

    if family == "flat-cartesian":
        comps = {(i, i): Const(1.0) for i in range(1, n + 1)}
        ranges = tuple(CoordinateRange(-INF, INF) for _ in range(n))
        return MetricSpec(n, comps, ranges, name=f"flat-cartesian-{n}")

    if family == "flat-polar":
        if n != 2:
            raise MetricConfigError("flat-polar preset is 2-dimensional")
        comps = {(1, 1): Const(1.0), (2, 2): _expr("x1^2", 2)}
        ranges = (
            CoordinateRange(0.0, INF),
            CoordinateRange(0.0, 2 * math.pi, periodic=True),
        )
        return MetricSpec(2, comps, ranges, name="flat-polar-2")

    if family == "sphere":
        if n != 2:
            raise MetricConfigError("sphere preset is 2-dimensional")
        a = float(arg) if arg else 1.0
        comps = {
            (1, 1): Const(a * a),
            (2, 2): BinOp("*", Const(a * a), Pow(Func("sin", Var(1)), 2.0)),
        }
        ranges = (
            CoordinateRange(0.0, math.pi),
            CoordinateRange(0.0, 2 * math.pi, periodic=True),
        )
        return MetricSpec(2, comps, ranges, name=f"sphere-2({a:g})")

    if family == "hyperbolic":
        if n != 2:
            raise MetricConfigError("hyperbolic preset is 2-dimensional")
        a = float(arg) if arg else 1.0
        comps = {
            (1, 1): Const(a * a),
            (2, 2): BinOp("*", Const(a * a), Pow(Func("sinh", Var(1)), 2.0)),
        }
        ranges = (
            CoordinateRange(0.0, INF),
            CoordinateRange(0.0, 2 * math.pi, periodic=True),
        )
        return MetricSpec(2, comps, ranges, name=f"hyperbolic-2({a:g})")

    if family == "conformal":
        if n != 2:
            raise MetricConfigError("conformal preset is 2-dimensional")
        if not arg:
            raise MetricConfigError("conformal-2 needs a conformal factor expression")
        phi = _expr(arg, 2)
        factor = Func("exp", BinOp("*", Const(2.0), phi))
        comps = {(1, 1): factor, (2, 2): factor}
        ranges = (CoordinateRange(-INF, INF), CoordinateRange(-INF, INF))
        return MetricSpec(2, comps, ranges, name=f"conformal-2({arg})")

    raise MetricConfigError(f"unrecognized preset family {family!r}")


# ---------------------------------------------------------------------------
# config documents

_SPECIALS = {
    "inf": INF,
    "-inf": -INF,
    "pi": math.pi,
    "-pi": -math.pi,
    "2pi": 2 * math.pi,
}


def _endpoint(value) -> float:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in _SPECIALS:
            return _SPECIALS[key]
        raise MetricConfigError(f"bad range endpoint {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MetricConfigError(f"bad range endpoint {value!r}")
    return float(value)


def parse_metric_config(doc) -> MetricSpec:
    """Build a validated MetricSpec from a TOML string or parsed mapping."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = _toml.loads(doc if isinstance(doc, str) else doc.decode())
        except _toml.TOMLDecodeError as err:
            raise MetricConfigError(f"malformed config document: {err}") from None
    if not isinstance(doc, dict):
        raise MetricConfigError("config document must be a mapping")

    if "dimension" not in doc:
        raise MetricConfigError("config missing 'dimension'")
    n = doc["dimension"]
    if not isinstance(n, int) or n < 1:
        raise MetricConfigError(f"bad dimension {n!r}")

    comp_table = doc.get("component", {})
    components = {}
    for i_key, row in comp_table.items():
        if not isinstance(row, dict):
            raise MetricConfigError(f"component.{i_key} must map j -> expression")
        for j_key, text in row.items():
            try:
                i, j = int(i_key), int(j_key)
            except ValueError:
                raise MetricConfigError(
                    f"bad component key component.{i_key}.{j_key}"
                ) from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise MetricConfigError(f"component ({i},{j}) out of range for n={n}")
            if i > j:
                raise MetricConfigError(
                    f"component ({i},{j}) must be given with i <= j"
                )
            if not isinstance(text, str):
                raise MetricConfigError(f"component ({i},{j}) must be an expression string")
            components[(i, j)] = parse_expression(text, n)
    for i in range(1, n + 1):
        if (i, i) not in components:
            raise MetricConfigError(f"missing diagonal component ({i},{i})")

    range_table = doc.get("range", {})
    ranges = []
    for i in range(1, n + 1):
        entry = range_table.get(str(i))
        if entry is None:
            raise MetricConfigError(f"missing range.{i}")
        if not isinstance(entry, list) or len(entry) != 3:
            raise MetricConfigError(f"range.{i} must be [low, high, periodic]")
        low, high = _endpoint(entry[0]), _endpoint(entry[1])
        periodic = entry[2]
        if not isinstance(periodic, bool):
            raise MetricConfigError(f"range.{i} periodic flag must be boolean")
        if not low < high:
            raise MetricConfigError(f"range.{i} is empty: [{low}, {high}]")
        if periodic and not (math.isfinite(low) and math.isfinite(high)):
            raise MetricConfigError(f"range.{i} periodic range must be finite")
        ranges.append(CoordinateRange(low, high, periodic))

    return MetricSpec(n, components, tuple(ranges), name=str(doc.get("name", "custom")))


def load_metric(ref: str) -> MetricSpec:
    """Resolve a preset name or load a config file path."""
    try:
        return resolve_preset(ref)
    except MetricConfigError:
        pass
    try:
        with open(ref, "rb") as fh:
            text = fh.read()
    except OSError:
        raise MetricConfigError(
            f"{ref!r} is neither a known preset nor a readable config file"
        ) from None
    return parse_metric_config(text.decode())
