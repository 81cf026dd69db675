"""Run configuration: flat ``key = value`` text with strict parsing."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields

from .geometry import DEFAULT_BOX, MU_BAR


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run. Defaults reproduce the reference scenario.

    ``c11_mode = "scaled"`` sets the penalty to ``c11_value * D**2 / h_min``
    on the reference mesh; ``"constant"`` uses ``c11_value`` as is.
    ``pod_tol`` is the relative eigenvalue drop tolerance that defines the
    numerical rank. ``velocity_pod`` is ``componentwise`` or ``joint``.
    """

    nu: float = 1.0
    c11_mode: str = "scaled"
    c11_value: float = 10.0
    degree: int = 2
    refinement: int = 2
    mu_bar: tuple = MU_BAR
    param_box: tuple = DEFAULT_BOX
    n_snapshots: int = 100
    n_test: int = 10
    seed: int = 42
    pod_tol: float = 1e-14
    n_basis_list: tuple = tuple(range(1, 21))
    alpha_scaling: bool = False
    nu_scaled_volume: bool = True
    output_dir: str = "out"
    velocity_pod: str = "componentwise"

    def __post_init__(self):
        checks = [
            (self.nu > 0, "nu must be positive"),
            (self.c11_mode in ("constant", "scaled"), "c11_mode must be 'constant' or 'scaled'"),
            (self.c11_value > 0, "c11_value must be positive"),
            (self.degree == 2, "only degree = 2 (P2 velocity / P1 pressure) is supported"),
            (self.refinement >= 0, "refinement must be >= 0"),
            (self.n_snapshots >= 1, "n_snapshots must be >= 1"),
            (self.n_test >= 1, "n_test must be >= 1"),
            (0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer"),
            (0 < self.pod_tol < 1, "pod_tol must lie in (0, 1)"),
            (len(self.n_basis_list) > 0 and min(self.n_basis_list) >= 1, "n_basis_list entries must be >= 1"),
            (self.velocity_pod in ("componentwise", "joint"), "velocity_pod must be 'componentwise' or 'joint'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        (x0, x1), (y0, y1) = self.param_box
        if not (x0 < x1 and y0 < y1):
            raise ConfigError("param_box must satisfy xmin < xmax and ymin < ymax")

    def penalty(self, h_min: float) -> float:
        if self.c11_mode == "constant":
            return self.c11_value
        return self.c11_value * self.degree**2 / h_min

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in asdict(self).items())

    def replace(self, **kw) -> "RunConfig":
        return RunConfig(**{**asdict(self), **kw})


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        flat = [x for item in v for x in (item if isinstance(item, tuple) else (item,))]
        return ", ".join(_format(x) for x in flat)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _floats(text, n=None):
    vals = tuple(float(x) for x in text.replace(",", " ").split())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} numbers")
    return vals


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _ints(text):
    out = []
    for part in text.replace(",", " ").split():
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _box(text):
    x0, x1, y0, y1 = _floats(text, 4)
    return ((x0, x1), (y0, y1))


_PARSERS = {
    "nu": float, "c11_mode": str.strip, "c11_value": float, "degree": int, "refinement": int,
    "mu_bar": lambda s: _floats(s, 2), "param_box": _box, "n_snapshots": int, "n_test": int,
    "seed": int, "pod_tol": float, "n_basis_list": _ints, "alpha_scaling": _bool,
    "nu_scaled_volume": _bool, "output_dir": str.strip, "velocity_pod": str.strip,
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def _line_of(text, key):
    for n, line in enumerate(text.splitlines(), 1):
        if line.split("=")[0].split(":")[0].strip().lower() == key:
            return n
    return 0


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` lines (``#`` comments allowed); unknown keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if cp.sections() != ["run"]:
        raise ConfigError("malformed config: section headers are not allowed")
    values = {}
    for key, raw in cp["run"].items():
        line = _line_of(text, key)
        if key not in _PARSERS:
            raise ConfigError(f"line {line}: unknown key '{key}'")
        try:
            values[key] = _PARSERS[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {line}: bad value for '{key}': {raw!r} ({exc})") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
