"""Declarative scenario files.

A scenario is a YAML mapping with the sections ``protocol``, ``density``,
``oracle``, ``scan``, ``wigner`` and ``output``. Every key is checked against
a fixed schema; unknown keys, wrong types and cross-section inconsistencies
raise :class:`ScenarioError` carrying the file name and line number of the
offending node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import profiles as prof
from .engine import ProtocolConfig, SupportOverlapError, alpha_norm_sq, chi
from .weyl import (MAX_DIMENSION, QuditState, extraction_state, optimal_initial_state,
                   x_eigenstate, xz_dagger_eigenvector, z_eigenstate)

__all__ = ["ScenarioError", "Scenario", "OracleSpec", "ThetaSpec", "EtaSpec", "WignerSpec",
           "DensitySpec", "OutputSpec", "load_scenario", "parse_scenario", "resolve_initial_state"]


class ScenarioError(ValueError):
    """Validation failure anchored at a location in the scenario file."""

    def __init__(self, message: str, source: str = "<scenario>", line: int | None = None):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------------------
# YAML nodes -> values that remember their line
# ---------------------------------------------------------------------------

class _Map:
    """A mapping node with per-key lines and consumed-key tracking."""

    def __init__(self, node: yaml.MappingNode, ctx: "_Ctx", path: str):
        self.ctx = ctx
        self.path = path
        self.line = node.start_mark.line + 1
        self.items: dict[str, yaml.Node] = {}
        for knode, vnode in node.value:
            key = knode.value
            if key in self.items:
                raise ctx.error(f"duplicate key '{key}' in {path}", knode)
            self.items[key] = vnode

    def has(self, key: str) -> bool:
        return key in self.items

    def check_keys(self, allowed) -> None:
        for key, node in self.items.items():
            if key not in allowed:
                raise self.ctx.error(
                    f"unknown key '{key}' in {self.path} (allowed: {', '.join(sorted(allowed))})", node)

    def node(self, key: str) -> yaml.Node:
        return self.items[key]

    def _get(self, key, default, required, conv):
        if key not in self.items:
            if required:
                raise ScenarioError(f"missing required key '{key}' in {self.path}", self.ctx.source, self.line)
            return default
        return conv(self.items[key], f"{self.path}.{key}")

    def map(self, key: str, required: bool = False):
        return self._get(key, None, required, self.ctx.as_map)

    def num(self, key: str, default=None, required: bool = False) -> float:
        return self._get(key, default, required, self.ctx.as_float)

    def int(self, key: str, default=None, required: bool = False) -> int:
        return self._get(key, default, required, self.ctx.as_int)

    def bool(self, key: str, default=None) -> bool:
        return self._get(key, default, False, self.ctx.as_bool)

    def str(self, key: str, default=None, required: bool = False) -> str:
        return self._get(key, default, required, self.ctx.as_str)

    def raw(self, key: str, default=None):
        return self._get(key, default, False, lambda n, p: n)


@dataclass
class _Ctx:
    source: str

    def error(self, message: str, node: yaml.Node | None) -> ScenarioError:
        line = node.start_mark.line + 1 if node is not None else None
        return ScenarioError(message, self.source, line)

    def as_map(self, node, path) -> _Map:
        if not isinstance(node, yaml.MappingNode):
            raise self.error(f"{path} must be a mapping", node)
        return _Map(node, self, path)

    def _scalar(self, node, path, kind):
        if not isinstance(node, yaml.ScalarNode):
            raise self.error(f"{path} must be a {kind}", node)
        if node.tag == "tag:yaml.org,2002:str":
            return node.value
        return yaml.safe_load(node.value)

    def as_float(self, node, path) -> float:
        val = self._scalar(node, path, "number")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise self.error(f"{path} must be a number, got {node.value!r}", node)
        if not np.isfinite(val):
            raise self.error(f"{path} must be finite", node)
        return float(val)

    def as_int(self, node, path) -> int:
        val = self._scalar(node, path, "integer")
        if isinstance(val, bool) or not isinstance(val, int):
            raise self.error(f"{path} must be an integer, got {node.value!r}", node)
        return int(val)

    def as_bool(self, node, path) -> bool:
        val = self._scalar(node, path, "boolean")
        if not isinstance(val, bool):
            raise self.error(f"{path} must be true or false, got {node.value!r}", node)
        return val

    def as_str(self, node, path) -> str:
        if not isinstance(node, yaml.ScalarNode):
            raise self.error(f"{path} must be a string", node)
        return node.value

    def as_list(self, node, path, conv):
        if not isinstance(node, yaml.SequenceNode):
            raise self.error(f"{path} must be a list", node)
        return [conv(item, f"{path}[{k}]") for k, item in enumerate(node.value)]


# ---------------------------------------------------------------------------
# typed sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensitySpec:
    points: int = 2048
    tail_widths: float = 10.0


@dataclass(frozen=True)
class OracleSpec:
    modes: tuple[int, ...] = (2,)
    d_omega: float = 1.2
    n_max: int = 15
    d_values: tuple[int, ...] = ()
    delays: tuple[float, ...] = ()
    noise_table: np.ndarray | None = None
    shots: int = 100_000


@dataclass(frozen=True)
class ThetaSpec:
    epsilon: float
    thetas: tuple[float, ...]


@dataclass(frozen=True)
class EtaSpec:
    epsilon: float
    etas: tuple[float, ...]
    density_points: int = 801


@dataclass(frozen=True)
class WignerSpec:
    alpha: complex = 2.5
    panels: tuple[int, ...] = (4, 8, 12, 16)
    outcome: int = 0
    initial: str = "xz"
    resolution: int = 512
    extent: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    directory: Path = Path("out")
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class Scenario:
    source: str
    protocol: ProtocolConfig | None
    protocol_record: dict | None
    initial_rule: Any
    density: DensitySpec
    oracle: OracleSpec | None
    theta: ThetaSpec | None
    eta: EtaSpec | None
    wigner: WignerSpec | None
    output: OutputSpec
    seed: int = 0
    lines: dict = field(default_factory=dict, repr=False)

    def require(self, section: str):
        val = {"protocol": self.protocol, "oracle": self.oracle, "scan.theta": self.theta,
               "scan.eta": self.eta, "wigner": self.wigner}[section]
        if val is None:
            raise ScenarioError(f"this command needs a '{section}' section", self.source)
        return val


_PROFILE_KEYS = {"family", "center", "width", "strength", "values", "smooth"}


def _profile(m: _Map) -> prof.SmearingProfile:
    m.check_keys(_PROFILE_KEYS)
    family = m.str("family", required=True)
    center = m.num("center", required=True)
    width = m.num("width", required=True)
    strength = m.num("strength", 1.0)
    try:
        if family == "sampled":
            vnode = m.raw("values")
            if vnode is None:
                raise ScenarioError(f"{m.path}: sampled profiles need 'values'", m.ctx.source, m.line)
            values = m.ctx.as_list(vnode, f"{m.path}.values", m.ctx.as_float)
            return prof.sampled_profile(values, center, width, strength, smooth=m.bool("smooth", False))
        for key in ("values", "smooth"):
            if m.has(key):
                raise m.ctx.error(f"'{key}' only applies to sampled profiles", m.node(key))
        return prof.make_profile(family, center, width, strength)
    except prof.ProfileError as exc:
        raise ScenarioError(f"{m.path}: {exc}", m.ctx.source, m.line) from None


def resolve_initial_state(rule, d: int, pa: prof.SmearingProfile, pb: prof.SmearingProfile,
                          ctx: _Ctx | None = None, node=None) -> tuple[QuditState, str]:
    """Turn a scenario initial-state rule into a state; returns the state and a canonical label."""
    def fail(msg):
        if ctx is None:
            raise ScenarioError(msg)
        raise ctx.error(msg, node)

    if isinstance(rule, str):
        if rule in ("optimal", "extraction"):
            probe = ProtocolConfig(d, z_eigenstate(d), pa, pb, on_front=True)
            c = chi(probe, alpha_norm_sq(probe))
            if rule == "optimal":
                return optimal_initial_state(d, c)[0], rule
            sign = 1.0 if pa.strength * pb.strength >= 0 else -1.0
            return extraction_state(d, c, sign)[0], rule
        fail(f"unknown initial_state rule '{rule}' (use optimal, extraction or a mapping)")
    kind, val = rule
    if kind in ("xz_eigenvector", "x", "z"):
        if not 0 <= val < d:
            fail(f"{kind} index {val} out of range for d={d}")
        fn = {"xz_eigenvector": xz_dagger_eigenvector, "x": x_eigenstate, "z": z_eigenstate}[kind]
        return fn(d, val), f"{kind}:{val}"
    amps = np.asarray(val, dtype=complex)
    if amps.size != d:
        fail(f"amplitudes list has {amps.size} entries, expected d={d}")
    return QuditState.normalized(amps), "amplitudes"


def _initial_rule(node, ctx: _Ctx):
    if node is None:
        return "optimal"
    if isinstance(node, yaml.ScalarNode):
        return ctx.as_str(node, "protocol.initial_state")
    m = ctx.as_map(node, "protocol.initial_state")
    m.check_keys({"xz_eigenvector", "x", "z", "amplitudes"})
    if len(m.items) != 1:
        raise ctx.error("initial_state mapping needs exactly one key", node)
    key = next(iter(m.items))
    if key == "amplitudes":
        pairs = ctx.as_list(m.node(key), "protocol.initial_state.amplitudes",
                            lambda n, p: ctx.as_list(n, p, ctx.as_float))
        if any(len(pr) != 2 for pr in pairs):
            raise ctx.error("amplitudes must be [re, im] pairs", m.node(key))
        return ("amplitudes", [complex(*pr) for pr in pairs])
    return (key, m.int(key))


def _number_list(node, path, ctx: _Ctx) -> tuple[float, ...]:
    """Either an explicit list or ``{start, stop, num}`` (log-spaced, start/stop are the endpoints)."""
    if isinstance(node, yaml.SequenceNode):
        vals = ctx.as_list(node, path, ctx.as_float)
    else:
        m = ctx.as_map(node, path)
        m.check_keys({"start", "stop", "num"})
        start, stop, num = m.num("start", required=True), m.num("stop", required=True), m.int("num", required=True)
        if start <= 0 or stop <= 0 or num < 2:
            raise ctx.error(f"{path}: need positive start/stop and num >= 2", node)
        vals = list(np.geomspace(start, stop, num))
    if not vals or any(v <= 0 for v in vals):
        raise ctx.error(f"{path} must be a non-empty list of positive numbers", node)
    return tuple(vals)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    ctx = _Ctx(source)
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", source,
                            mark.line + 1 if mark else None) from None
    if root is None:
        raise ScenarioError("scenario is empty", source, 1)
    top = ctx.as_map(root, "scenario")
    top.check_keys({"protocol", "density", "oracle", "scan", "wigner", "output", "seed"})

    protocol = record = rule = None
    pm = top.map("protocol")
    if pm is not None:
        pm.check_keys({"d", "initial_state", "profile_a", "profile_b", "delay", "on_front"})
        d = pm.int("d", required=True)
        if not 2 <= d <= MAX_DIMENSION:
            raise ctx.error(f"protocol.d must lie in [2, {MAX_DIMENSION}], got {d}", pm.node("d"))
        pa = _profile(pm.map("profile_a", required=True))
        pb = _profile(pm.map("profile_b", required=True))
        delay = pm.num("delay", 0.0)
        on_front = pm.bool("on_front", False)
        rule = _initial_rule(pm.raw("initial_state"), ctx)
        state, label = resolve_initial_state(rule, d, pa, pb, ctx, pm.raw("initial_state"))
        try:
            protocol = ProtocolConfig(d, state, pa, pb, delay, on_front)
        except SupportOverlapError as exc:
            raise ScenarioError(f"protocol: {exc}", source, pm.line) from None
        record = {"d": d, "initial_state": label, "profile_a": pa.to_record(),
                  "profile_b": pb.to_record(), "delay": delay, "on_front": on_front}

    dm = top.map("density")
    density = DensitySpec()
    if dm is not None:
        dm.check_keys({"points", "tail_widths"})
        density = DensitySpec(dm.int("points", 2048), dm.num("tail_widths", 10.0))
        if density.points < 16 or density.tail_widths <= 0:
            raise ScenarioError("density.points must be >= 16 and tail_widths > 0", source, dm.line)

    oracle = None
    om = top.map("oracle")
    if om is not None:
        om.check_keys({"modes", "d_omega", "n_max", "d_values", "delays", "noise"})
        modes_node = om.raw("modes")
        if modes_node is None:
            modes = (2,)
        elif isinstance(modes_node, yaml.SequenceNode):
            modes = tuple(ctx.as_list(modes_node, "oracle.modes", ctx.as_int))
        else:
            modes = (ctx.as_int(modes_node, "oracle.modes"),)
        if any(not 1 <= n <= 4 for n in modes):
            raise ctx.error("oracle.modes must lie in [1, 4]", modes_node)
        n_max = om.int("n_max", 15)
        d_omega = om.num("d_omega", 1.2)
        if n_max < 1 or d_omega <= 0:
            raise ScenarioError("oracle.n_max must be >= 1 and d_omega > 0", source, om.line)
        dv = om.raw("d_values")
        d_values = tuple(ctx.as_list(dv, "oracle.d_values", ctx.as_int)) if dv is not None else ()
        if any(not 2 <= x <= 16 for x in d_values):
            raise ctx.error("oracle.d_values must lie in [2, 16]", dv)
        dl = om.raw("delays")
        delays = tuple(ctx.as_list(dl, "oracle.delays", ctx.as_float)) if dl is not None else ()
        table, shots = None, 100_000
        nm = om.map("noise")
        if nm is not None:
            nm.check_keys({"table", "shots"})
            tnode = nm.raw("table")
            if tnode is None:
                raise ScenarioError("oracle.noise needs a 'table'", source, nm.line)
            table = np.array(ctx.as_list(tnode, "oracle.noise.table",
                                         lambda n, p: ctx.as_list(n, p, ctx.as_float)))
            if table.ndim != 2 or table.shape[0] != table.shape[1]:
                raise ctx.error("oracle.noise.table must be a square d x d table", tnode)
            if np.any(table < 0) or abs(table.sum() - 1) > 1e-12:
                raise ctx.error("oracle.noise.table must be non-negative and sum to 1", tnode)
            shots = nm.int("shots", 100_000)
            if shots < 2:
                raise ctx.error("oracle.noise.shots must be >= 2", nm.node("shots"))
        oracle = OracleSpec(modes, d_omega, n_max, d_values, delays, table, shots)
        if protocol is None:
            raise ScenarioError("oracle section needs a protocol section", source, om.line)
        if table is not None:
            ds = d_values or (protocol.d,)
            if any(x != table.shape[0] for x in ds):
                raise ctx.error(f"noise table is {table.shape[0]} x {table.shape[0]} but oracle runs d={list(ds)}",
                                om.node("noise"))

    theta = eta = None
    sm = top.map("scan")
    if sm is not None:
        sm.check_keys({"theta", "eta"})
        tm = sm.map("theta")
        if tm is not None:
            tm.check_keys({"epsilon", "thetas"})
            eps = tm.num("epsilon", required=True)
            if eps < 0:
                raise ctx.error(f"scan.theta.epsilon must be >= 0, got {eps}", tm.node("epsilon"))
            if not tm.has("thetas"):
                raise ScenarioError("scan.theta needs 'thetas'", source, tm.line)
            theta = ThetaSpec(eps, _number_list(tm.node("thetas"), "scan.theta.thetas", ctx))
        em = sm.map("eta")
        if em is not None:
            em.check_keys({"epsilon", "etas", "density_points"})
            eps = em.num("epsilon", required=True)
            if not 0 < eps < 0.25:
                raise ctx.error(f"scan.eta.epsilon must lie in (0, 1/4), got {eps}", em.node("epsilon"))
            if not em.has("etas"):
                raise ScenarioError("scan.eta needs 'etas'", source, em.line)
            eta = EtaSpec(eps, _number_list(em.node("etas"), "scan.eta.etas", ctx),
                          em.int("density_points", 801))
        if (theta or eta) and protocol is None:
            raise ScenarioError("scan section needs a protocol section", source, sm.line)

    wigner = None
    wm = top.map("wigner")
    if wm is not None:
        wm.check_keys({"alpha", "d", "outcome", "initial", "grid"})
        anode = wm.raw("alpha")
        alpha: complex = 2.5
        if isinstance(anode, yaml.SequenceNode):
            re_im = ctx.as_list(anode, "wigner.alpha", ctx.as_float)
            if len(re_im) != 2:
                raise ctx.error("wigner.alpha must be a number or [re, im]", anode)
            alpha = complex(*re_im)
        elif anode is not None:
            alpha = ctx.as_float(anode, "wigner.alpha")
        dnode = wm.raw("d")
        if dnode is None:
            panels = (4, 8, 12, 16)
        elif isinstance(dnode, yaml.SequenceNode):
            panels = tuple(ctx.as_list(dnode, "wigner.d", ctx.as_int))
        else:
            panels = (ctx.as_int(dnode, "wigner.d"),)
            if protocol is not None and panels[0] != protocol.d:
                raise ctx.error(f"wigner.d={panels[0]} does not match protocol.d={protocol.d}", dnode)
        if not panels or any(not 1 <= x <= 64 for x in panels):
            raise ctx.error("wigner.d values must lie in [1, 64]", dnode)
        outcome = wm.int("outcome", 0)
        if any(not 0 <= outcome < max(x, 1) for x in panels):
            raise ctx.error(f"wigner.outcome={outcome} out of range for d={list(panels)}",
                            wm.node("outcome"))
        initial = wm.str("initial", "xz")
        if initial not in ("xz", "uniform"):
            raise ctx.error("wigner.initial must be 'xz' or 'uniform'", wm.node("initial"))
        resolution, extent = 512, None
        gm = wm.map("grid")
        if gm is not None:
            gm.check_keys({"resolution", "extent"})
            resolution = gm.int("resolution", 512)
            extent = gm.num("extent", None)
            if resolution < 16 or (extent is not None and extent <= 0):
                raise ScenarioError("wigner.grid needs resolution >= 16 and extent > 0", source, gm.line)
        wigner = WignerSpec(alpha, panels, outcome, initial, resolution, extent)

    output = OutputSpec()
    out = top.map("output")
    if out is not None:
        out.check_keys({"directory", "formats"})
        fnode = out.raw("formats")
        formats = output.formats
        if fnode is not None:
            formats = tuple(ctx.as_list(fnode, "output.formats", ctx.as_str))
            bad = [f for f in formats if f not in ("csv", "json")]
            if bad or not formats:
                raise ctx.error(f"output.formats must be a non-empty subset of [csv, json], got {formats}", fnode)
        output = OutputSpec(Path(out.str("directory", "out")), formats)

    seed = top.int("seed", 0)
    if seed < 0 or seed >= 2 ** 64:
        raise ctx.error("seed must be an unsigned 64-bit integer", top.node("seed"))
    return Scenario(source, protocol, record, rule, density, oracle, theta, eta, wigner, output, seed)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text, str(path))
