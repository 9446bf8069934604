"""Scenario file parsing and serialization.

Plain key = value lines with # comments; one [uav N] section per UAV for
per-UAV fields (which may also be given globally and are then shared by
every UAV).  Values are numbers with an optional unit suffix:

    power       W, mW, kW, dBm, dBW; bare dB reads as dBm
    frequency   Hz, kHz, MHz, GHz
    time        s, ms, us
    length      m, km
    speed       m/s, km/s
    data        bit, kbit, Mbit, Gbit
    energy      J, mJ, kJ
    gain        plain ratio or dB (power ratio)

Decibel values are converted to linear SI at parse time and never stored.
Per-round fields (samples, cycles, aggregation sizes) accept a single
number or a comma list with one entry per round.  Coordinate pairs are
"x, y" with optional length units.  Unknown keys are rejected.  Files
written by dump_scenario are canonical SI without unit suffixes and parse
back to a field-identical configuration.
"""

import numpy as np

from uavfl.model import ScenarioConfig

_LINEAR_UNITS = {
    "power": {"W": 1.0, "mW": 1e-3, "kW": 1e3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "length": {"m": 1.0, "km": 1e3},
    "speed": {"m/s": 1.0, "km/s": 1e3},
    "data": {"bit": 1.0, "kbit": 1e3, "Mbit": 1e6, "Gbit": 1e9},
    "energy": {"J": 1.0, "mJ": 1e-3, "kJ": 1e3},
    "none": {},
    "gain": {},
}

# kind, per-UAV?, per-round list allowed?
_FIELDS = {
    "n_uavs": ("count", False, False),
    "rounds": ("count", False, False),
    "slots_per_round": ("count", False, False),
    "slot_len": ("time", False, False),
    "altitude": ("length", False, False),
    "v_max": ("speed", False, False),
    "beta0": ("gain", False, False),
    "noise_power": ("power", False, False),
    "bw_uav": ("frequency", True, False),
    "bw_bs": ("frequency", False, False),
    "unit_sense_time": ("time", False, False),
    "samples": ("none", True, True),
    "cycles_per_sample_uav": ("none", True, True),
    "local_iters": ("count", False, False),
    "switch_cap": ("none", True, True),
    "model_size_up": ("data", False, False),
    "model_size_down": ("data", False, False),
    "cycles_per_sample_bs": ("none", False, True),
    "agg_samples": ("none", False, True),
    "agg_scale": ("none", False, False),
    "p_se_max": ("power", True, False),
    "p_cm_max": ("power", True, False),
    "p_bs_max": ("power", False, False),
    "f_uav_max": ("frequency", True, False),
    "f_bs_max": ("frequency", False, False),
    "e_max": ("energy", False, False),
    "initial_xy": ("point", True, False),
    "final_xy": ("point", True, False),
}

_OPTIONAL = {"agg_samples", "agg_scale"}
_PER_UAV = {k for k, (_, per_uav, _) in _FIELDS.items() if per_uav}


class ScenarioError(ValueError):
    """Malformed scenario file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _to_number(token, kind, key, line):
    token = token.strip()
    parts = token.split()
    if not parts:
        raise ScenarioError(f"empty value for {key!r}", line)
    try:
        value = float(parts[0])
    except ValueError:
        raise ScenarioError(f"bad number {parts[0]!r} for {key!r}", line)
    unit = " ".join(parts[1:])
    if not unit:
        return value
    if kind == "power":
        if unit in ("dBm", "dB"):
            return 10.0 ** (value / 10.0) * 1e-3
        if unit == "dBW":
            return 10.0 ** (value / 10.0)
    if kind == "gain" and unit == "dB":
        return 10.0 ** (value / 10.0)
    table = _LINEAR_UNITS.get(kind, {})
    if unit not in table:
        raise ScenarioError(
            f"unit {unit!r} not valid for {key!r} (kind: {kind})", line)
    return value * table[unit]


def _parse_value(raw, kind, key, line, allow_list):
    if kind == "point":
        parts = raw.split(",")
        if len(parts) != 2:
            raise ScenarioError(f"{key!r} needs 'x, y'", line)
        return [_to_number(parts[0], "length", key, line),
                _to_number(parts[1], "length", key, line)]
    if kind == "count":
        value = _to_number(raw, "none", key, line)
        if value != int(value):
            raise ScenarioError(f"{key!r} must be an integer", line)
        return int(value)
    if "," in raw:
        if not allow_list:
            raise ScenarioError(f"{key!r} does not take a list", line)
        return [_to_number(p, kind, key, line) for p in raw.split(",")]
    return _to_number(raw, kind, key, line)


def parse_scenario(text):
    """Parse scenario text into a ScenarioConfig."""
    global_vals, sections = {}, {}
    current = None  # None = global scope, else UAV index
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("unterminated section header", lineno)
            parts = line[1:-1].split()
            if len(parts) != 2 or parts[0] != "uav":
                raise ScenarioError(f"unknown section {line!r}", lineno)
            try:
                current = int(parts[1]) - 1
            except ValueError:
                raise ScenarioError(f"bad UAV index in {line!r}", lineno)
            if current < 0:
                raise ScenarioError("UAV indices start at 1", lineno)
            sections.setdefault(current, {})
            continue
        key, eq, raw_value = line.partition("=")
        if not eq:
            raise ScenarioError("expected 'key = value'", lineno)
        key = key.strip()
        if key not in _FIELDS:
            raise ScenarioError(f"unknown key {key!r}", lineno)
        kind, per_uav, allow_list = _FIELDS[key]
        if current is not None and not per_uav:
            raise ScenarioError(
                f"{key!r} is global and cannot appear in a [uav] section",
                lineno)
        value = _parse_value(raw_value.strip(), kind, key, lineno,
                             allow_list)
        scope = global_vals if current is None else sections[current]
        if key in scope:
            raise ScenarioError(f"duplicate key {key!r}", lineno)
        scope[key] = value

    missing = [k for k in _FIELDS
               if k not in _OPTIONAL and not _FIELDS[k][1]
               and k not in global_vals]
    if missing:
        raise ScenarioError(f"missing required keys: {', '.join(missing)}")
    n = global_vals["n_uavs"]
    k = global_vals["rounds"]
    if sections and max(sections) >= n:
        raise ScenarioError(f"[uav {max(sections) + 1}] exceeds n_uavs={n}")

    def per_uav_value(key):
        rows = []
        for i in range(n):
            if key in sections.get(i, {}):
                rows.append(sections[i][key])
            elif key in global_vals:
                rows.append(global_vals[key])
            else:
                raise ScenarioError(
                    f"missing {key!r} for UAV {i + 1} (no global default)")
        return rows

    def per_round(value, key):
        if isinstance(value, list):
            if len(value) != k:
                raise ScenarioError(
                    f"{key!r} list must have {k} entries (one per round)")
            return value
        return [value] * k

    fields = dict(
        n_uavs=n, rounds=k,
        slots_per_round=global_vals["slots_per_round"],
        slot_len=global_vals["slot_len"],
        altitude=global_vals["altitude"],
        v_max=global_vals["v_max"],
        beta0=global_vals["beta0"],
        noise_power=global_vals["noise_power"],
        bw_uav=np.array(per_uav_value("bw_uav")),
        bw_bs=global_vals["bw_bs"],
        unit_sense_time=global_vals["unit_sense_time"],
        samples=np.array([per_round(v, "samples")
                          for v in per_uav_value("samples")]),
        cycles_per_sample_uav=np.array(
            [per_round(v, "cycles_per_sample_uav")
             for v in per_uav_value("cycles_per_sample_uav")]),
        local_iters=global_vals["local_iters"],
        switch_cap=np.array([per_round(v, "switch_cap")
                             for v in per_uav_value("switch_cap")]),
        model_size_up=global_vals["model_size_up"],
        model_size_down=global_vals["model_size_down"],
        cycles_per_sample_bs=np.array(
            per_round(global_vals["cycles_per_sample_bs"],
                      "cycles_per_sample_bs")),
        agg_samples=np.array(
            per_round(global_vals.get("agg_samples", float(n)),
                      "agg_samples")),
        agg_scale=global_vals.get("agg_scale", 1.0),
        p_se_max=np.array(per_uav_value("p_se_max")),
        p_cm_max=np.array(per_uav_value("p_cm_max")),
        p_bs_max=global_vals["p_bs_max"],
        f_uav_max=np.array(per_uav_value("f_uav_max")),
        f_bs_max=global_vals["f_bs_max"],
        e_max=global_vals["e_max"],
        initial_xy=np.array(per_uav_value("initial_xy")),
        final_xy=np.array(per_uav_value("final_xy")),
    )
    try:
        return ScenarioConfig(**fields)
    except ValueError as exc:
        raise ScenarioError(str(exc))


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(fh.read())


def _fmt(x):
    return repr(float(x))


def _fmt_list(values):
    return ", ".join(_fmt(v) for v in values)


def dump_scenario(config):
    """Canonical SI text; parses back field-identically."""
    out = ["# uavfl scenario (canonical SI units)"]
    out.append(f"n_uavs = {config.n_uavs}")
    out.append(f"rounds = {config.rounds}")
    out.append(f"slots_per_round = {config.slots_per_round}")
    out.append(f"slot_len = {_fmt(config.slot_len)}")
    out.append(f"altitude = {_fmt(config.altitude)}")
    out.append(f"v_max = {_fmt(config.v_max)}")
    out.append(f"beta0 = {_fmt(config.beta0)}")
    out.append(f"noise_power = {_fmt(config.noise_power)}")
    out.append(f"bw_bs = {_fmt(config.bw_bs)}")
    out.append(f"unit_sense_time = {_fmt(config.unit_sense_time)}")
    out.append(f"local_iters = {config.local_iters}")
    out.append(f"model_size_up = {_fmt(config.model_size_up)}")
    out.append(f"model_size_down = {_fmt(config.model_size_down)}")
    out.append(
        f"cycles_per_sample_bs = {_fmt_list(config.cycles_per_sample_bs)}")
    out.append(f"agg_samples = {_fmt_list(config.agg_samples)}")
    out.append(f"agg_scale = {_fmt(config.agg_scale)}")
    out.append(f"p_bs_max = {_fmt(config.p_bs_max)}")
    out.append(f"f_bs_max = {_fmt(config.f_bs_max)}")
    out.append(f"e_max = {_fmt(config.e_max)}")
    for i in range(config.n_uavs):
        out.append("")
        out.append(f"[uav {i + 1}]")
        out.append(f"bw_uav = {_fmt(config.bw_uav[i])}")
        out.append(f"samples = {_fmt_list(config.samples[i])}")
        out.append("cycles_per_sample_uav = "
                   + _fmt_list(config.cycles_per_sample_uav[i]))
        out.append(f"switch_cap = {_fmt_list(config.switch_cap[i])}")
        out.append(f"p_se_max = {_fmt(config.p_se_max[i])}")
        out.append(f"p_cm_max = {_fmt(config.p_cm_max[i])}")
        out.append(f"f_uav_max = {_fmt(config.f_uav_max[i])}")
        out.append(f"initial_xy = {_fmt_list(config.initial_xy[i])}")
        out.append(f"final_xy = {_fmt_list(config.final_xy[i])}")
    return "\n".join(out) + "\n"


def save_scenario(config, path):
    with open(path, "w") as fh:
        fh.write(dump_scenario(config))
