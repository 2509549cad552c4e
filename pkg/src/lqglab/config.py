"""INI-style run configuration with line-numbered diagnostics.

Sections and keys::

    [params]      gamma, gamma_prime, d_gamma, alpha1, alpha2, annulus_ratio
    [grid]        nx, ny, spacing, origin_x, method, pad
    [metric]      epsilon, a_eps
    [experiment]  levels, intervals, references, gmc_epsilon, far_radius,
                  far_centre, kappa_scale, symmetry_shift, separations,
                  anchors, weyl_shifts, weyl_pairs, trials, seed

Lists are comma separated; intervals and points are written ``a:b``.
Numbers may be fractions such as ``1/256``.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from fractions import Fraction

from .gff import GridSpec
from .params import CoalescenceConfig, LqgParams, check_alpha
from .experiments import TrialConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "SCHEMA"]


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


def _num(text):
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        return float(text)


def _int(text):
    v = text.strip()
    if not re.fullmatch(r"[+-]?\d+", v):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _opt_num(text):
    return None if text.strip().lower() in ("", "none") else _num(text)


def _list(conv):
    def parse(text):
        items = [t for t in text.split(",") if t.strip()]
        return tuple(conv(t) for t in items)
    return parse


def _pair(text):
    a, sep, b = text.partition(":")
    if not sep:
        raise ValueError(f"expected a:b, got {text.strip()!r}")
    return (_num(a), _num(b))


def _point(text):
    x, y = _pair(text)
    return complex(x, y)


def _word(text):
    return text.strip()


SCHEMA = {
    "params": {
        "gamma": _num, "gamma_prime": _opt_num, "d_gamma": _opt_num,
        "alpha1": _num, "alpha2": _num, "annulus_ratio": _num,
    },
    "grid": {"nx": _int, "ny": _int, "spacing": _num, "origin_x": _opt_num, "method": _word, "pad": _int},
    "metric": {"epsilon": _opt_num, "a_eps": _num},
    "experiment": {
        "levels": _list(_int), "intervals": _list(_pair), "references": _list(_point),
        "gmc_epsilon": _opt_num, "far_radius": _opt_num, "far_centre": _num,
        "kappa_scale": _num, "symmetry_shift": _num, "separations": _list(_num),
        "anchors": _list(_num), "weyl_shifts": _list(_num), "weyl_pairs": _int,
        "trials": _int, "seed": _int,
    },
}


@dataclass(frozen=True)
class RunConfig:
    trial: TrialConfig
    raw: dict

    @property
    def seed(self):
        return self.trial.master_seed

    @property
    def trials(self):
        return self.trial.trials

    def with_overrides(self, seed=None, trials=None):
        from dataclasses import replace
        t = self.trial
        if seed is not None:
            t = replace(t, master_seed=int(seed))
        if trials is not None:
            t = replace(t, trials=int(trials))
        return RunConfig(t, self.raw)


def _line_numbers(text):
    # (section, key) -> first line where the key appears
    where = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        where.setdefault((section, key), no)
    return where


def parse_config(text: str) -> RunConfig:
    """Parse and validate; the first error is raised as :class:`ConfigError`."""
    where = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    vals = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", where.get((section, None)))
        for key, raw in cp.items(section):
            line = where.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line, key)
            try:
                vals[key] = (SCHEMA[section][key](raw), line)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{key}: {exc}", line, key) from None

    def get(key, default):
        return vals[key][0] if key in vals else default

    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", vals.get(key, (None, None))[1], key)

    for key in ("gamma", "gamma_prime"):
        v = get(key, None)
        if v is not None and not 0 < v < 2:
            fail(key, f"must lie in (0, 2), got {v!r}")
    try:
        params = LqgParams(get("gamma", LqgParams().gamma), get("gamma_prime", None), get("d_gamma", None))
    except ValueError as exc:
        fail("d_gamma" if "d_gamma" in str(exc) else "gamma", str(exc))
    try:
        coal = CoalescenceConfig(get("alpha1", 0.25), get("alpha2", 0.5), get("annulus_ratio", 2.0))
    except ValueError as exc:
        fail("annulus_ratio" if "annulus" in str(exc) else "alpha2", str(exc))
    if not check_alpha(coal, params):
        fail("alpha2", "violates (1 - alpha2) * exponent - alpha2 * psi > 0")
    try:
        grid = GridSpec(get("nx", 512), get("ny", 256), get("spacing", 1.0 / 128), get("origin_x", None))
    except ValueError as exc:
        fail("spacing", str(exc))
    method = get("method", "spectral")
    if method not in ("spectral", "exact"):
        fail("method", f"unknown sampling method {method!r}")
    kwargs = dict(params=params, coalescence=coal, grid=grid, method=method, pad=get("pad", 2),
                  epsilon=get("epsilon", None), a_eps=get("a_eps", 1.0), master_seed=get("seed", 0),
                  trials=get("trials", 1))
    for key in ("levels", "intervals", "references", "gmc_epsilon", "far_radius", "far_centre",
                "kappa_scale", "symmetry_shift", "separations", "anchors", "weyl_shifts", "weyl_pairs"):
        if key in vals:
            kwargs[key] = vals[key][0]
    if "seed" in vals and not 0 <= kwargs["master_seed"] < 2 ** 64:
        fail("seed", "must be an unsigned 64-bit integer")
    try:
        trial = TrialConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in ("levels", "intervals", "references", "kappa_scale", "separations", "trials")
                    if k in msg or k.rstrip("s") in msg), None)
        if key is None and "margin" in msg:
            key = "references"
        raise ConfigError(msg, vals.get(key, (None, None))[1] if key else None, key) from None
    return RunConfig(trial, {k: v[0] for k, v in vals.items()})


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
