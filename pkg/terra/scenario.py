"""Loader for scenario files.

A scenario file is a JSON object with a schema_version and a set of
sections. Every key a section accepts is listed, with its default, in the
section's table below; any other key is an error. Errors carry the line of
the file they refer to.
"""

import json
from collections import namedtuple

import terra.array as array
import terra.channel as channel
import terra.deployment as deployment
import terra.mobility as mobility
import terra.protocol as protocol
import terra.sweep as sweep
from terra.errors import ConfigError, Location

SCHEMA = "terra_scenario_v1"

# Marks a key that has no default.
REQUIRED = object()

ARRAY_DEFAULTS = {
    "kind": array.LINEAR,
    "elements_x": 12,
    "elements_y": 1,
    "spacing": 0.5,
    "carrier": None,
    "boresight_gain": 17.0,
    "front_to_back": 30.0,
    "sidelobe_floor": None,
    "n_az": 25,
    "n_zen": 1,
    "sector_az": (-50.0, 60.0),
    "sector_zen": (0.0, 0.0),
}

CHANNEL_DEFAULTS = {
    "carrier": 60e9,
    "tx_power": 20.0,
    "system_loss": 0.0,
    "calibrate_los_rss": None,
    "surface": "concrete",
    "gr_loss_table": None,
    "blockage_attenuation": 20.0,
    "noise_floor": -78.0,
    "decode_threshold": None,
    "ground_reflection": True,
}

MOBILITY_DEFAULTS = {
    "kind": mobility.STATIC,
    "speed": 1.0,
    "angular_velocity": 90.0,
    "trajectory_length": 2.0,
    "heading": 0.0,
    "bounds": None,
    "start": (0.0, 0.0, 1.0),
    "boresight_az": 0.0,
    "boresight_zen": 0.0,
    "sector": (-55.0, 55.0),
    "randomize_start": False,
    "look_at": None,
    "jitter_amplitude": 10.0,
}

BLOCKER_DEFAULTS = {
    "arrival_rate": 0.0,
    "duration_mean": 0.2,
    "duration_jitter": 0.25,
    "crossing_speed": 1.0,
    "crossing_line": ((3.5, -1.0), (3.5, 1.0)),
    "height": 1.78,
    "width": 0.4,
    "clearance": 0.8,
    "gr_availability": 1.0,
    "interval": None,
    "offset": 0.0,
}

STATION_DEFAULTS = {
    "id": None,
    "position": REQUIRED,
    "boresight_az": None,
    "tilt": 0.0,
    "array": None,
    "beam_dwell": 800e-6,
    "beam_order": None,
    "phase": 0.0,
    "carrier": None,
}

PROTOCOL_DEFAULTS = {
    "blockage_drop": 15.0,
    "adapt_drop": 3.0,
    "pose_available": True,
    "revert_margin": 3.0,
    "ref_window": 10,
    "reconnect_penalty": 1.0,
    "decode_threshold": None,
    "handover_duration": 0.05,
    "confirm_scan": False,
}

SIM_DEFAULTS = {
    "horizon": 1.0,
    "slot": 100e-6,
    "seed": REQUIRED,
    "oracle_stride": 1,
    "neighbor_every": 4,
    "random_phase": True,
    "scan_start": sweep.SCAN_RANDOM,
}

ANALYSIS_DEFAULTS = {
    "floor": -70.0,
    "margin": 6.0,
    "link": "serving",
    "search_purpose": "initial_access",
    "runs": 1,
}

DENSITY_DEFAULTS = {
    "ranges": (100.0, 200.0, 300.0, 400.0, 500.0),
    "target_prob": 0.9,
    "k": 2,
    "grid": None,
    "monte_carlo": 0,
}

TOP_LEVEL = ("schema_version", "name", "array", "channel", "mobility",
             "blockers", "stations", "protocol", "sim", "analysis",
             "density")

# Sections a simulation scenario cannot do without.
SIMULATION_SECTIONS = ("mobility", "stations", "sim")


DensitySettings = namedtuple("DensitySettings",
                             ["ranges", "query", "monte_carlo"])

ScenarioFile = namedtuple("ScenarioFile",
                          ["name", "scenario", "density", "analysis"])
ScenarioFile.__doc__ = """A parsed scenario file.

scenario (Scenario) - The simulation, None for a density-only file.
density (DensitySettings) - The density analysis, None if absent.
analysis (dict) - Settings of the metric report, ANALYSIS_DEFAULTS filled in.
"""


class _Source:
    """Text of a scenario file, used to anchor errors at lines."""

    def __init__(self, text, filename):
        self.lines = text.splitlines()
        self.filename = filename

    def find(self, *keys):
        """Return the Location of the last of `keys`, nested in order.

        Each key is searched from the line where the previous one was
        found; a key that cannot be found leaves the location at the
        previous one.
        """
        line = 0
        for key in keys:
            needle = f'"{key}"'
            for i in range(line, len(self.lines)):
                if needle in self.lines[i]:
                    line = i
                    break
        if not self.lines:
            return Location(self.filename, 1)
        return Location(self.filename, line + 1, self.lines[line])

    def error(self, descrip, *keys):
        return ConfigError(descrip, self.find(*keys))


def _freeze(value):
    """Return JSON lists as tuples, recursively."""
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_type(source, path, key, value, default):
    if value is None or default is None or default is REQUIRED:
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
        expected = "true or false"
    elif _is_number(default):
        ok = _is_number(value)
        expected = "a number"
    elif isinstance(default, str):
        ok = isinstance(value, str)
        expected = "a string"
    elif isinstance(default, tuple):
        ok = isinstance(value, tuple)
        expected = "a list"
    else:
        ok = True
    if not ok:
        raise source.error(f"'{key}' in {path[0]} must be {expected}",
                           *path, key)


def _section(source, doc, defaults, *path):
    """Return `doc` merged over `defaults`, rejecting unknown keys."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise source.error(f"section '{path[-1]}' must be an object", *path)
    for key in doc:
        if key not in defaults:
            raise source.error(f"unknown key '{key}' in {path[-1]}",
                               *path, key)

    out = {}
    for key, default in defaults.items():
        if key in doc:
            value = _freeze(doc[key])
            _check_type(source, path, key, value, default)
            out[key] = value
        elif default is REQUIRED:
            raise source.error(f"{path[-1]} needs a '{key}'", *path)
        else:
            out[key] = default
    return out


def _gr_table(source, cfg):
    if cfg["gr_loss_table"] is None:
        if cfg["surface"] not in channel.SURFACES:
            names = ", ".join(sorted(channel.SURFACES))
            raise source.error(f"unknown surface '{cfg['surface']}', "
                               f"expected one of {names}",
                               "channel", "surface")
        return channel.SURFACES[cfg["surface"]]
    table = cfg["gr_loss_table"]
    try:
        if isinstance(table, dict):
            return tuple((float(t), float(l)) for t, l in table.items())
        return tuple((float(t), float(l)) for t, l in table)
    except (TypeError, ValueError):
        raise source.error("gr_loss_table must map tilts to dB values",
                           "channel", "gr_loss_table")


def _codebook(source, doc, carrier, *path):
    cfg = _section(source, doc, ARRAY_DEFAULTS, *path)
    geometry = array.ArrayGeometry(
        cfg["kind"], int(cfg["elements_x"]), int(cfg["elements_y"]),
        cfg["spacing"], cfg["carrier"] or carrier, cfg["boresight_gain"],
        cfg["front_to_back"], cfg["sidelobe_floor"])
    try:
        return array.make_codebook(geometry, cfg["sector_az"],
                                   cfg["sector_zen"], int(cfg["n_az"]),
                                   int(cfg["n_zen"]))
    except ConfigError as e:
        raise source.error(e.descrip, *path)


def _channel_config(source, doc):
    cfg = _section(source, doc, CHANNEL_DEFAULTS, "channel")
    table = _gr_table(source, cfg)
    try:
        return channel.make_channel_config(
            carrier=cfg["carrier"], tx_power=cfg["tx_power"],
            system_loss=cfg["system_loss"], gr_loss_table=table,
            blockage_attenuation=cfg["blockage_attenuation"],
            noise_floor=cfg["noise_floor"],
            decode_threshold=cfg["decode_threshold"],
            ground_reflection=cfg["ground_reflection"]), cfg
    except ConfigError as e:
        raise source.error(e.descrip, "channel")


def _mobility_model(source, doc, seed):
    cfg = _section(source, doc, MOBILITY_DEFAULTS, "mobility")
    if len(cfg["start"]) != 3:
        raise source.error("mobility start must be [x, y, height]",
                           "mobility", "start")
    model = mobility.MobilityModel(seed=seed, **cfg)
    try:
        mobility.check_mobility(model)
    except ConfigError as e:
        raise source.error(e.descrip, "mobility")
    return model


def _blocker_process(source, doc, seed):
    cfg = _section(source, doc, BLOCKER_DEFAULTS, "blockers")
    process = mobility.BlockerProcess(seed=seed, **cfg)
    try:
        mobility.check_blockers(process)
    except ConfigError as e:
        raise source.error(e.descrip, "blockers")
    return process


def _stations(source, doc, carrier, start):
    if not isinstance(doc, (list, tuple)) or not doc:
        raise source.error("stations must be a non-empty list", "stations")

    stations = []
    for i, item in enumerate(doc):
        cfg = _section(source, item, STATION_DEFAULTS, "stations")
        position = tuple(float(x) for x in cfg["position"])
        if len(position) != 3:
            raise source.error("station position must be [x, y, height]",
                               "stations", "position")
        az = cfg["boresight_az"]
        if az is None:
            # Face the mobile's starting point.
            az = channel.los_path(channel.Pose(position),
                                  channel.Pose(start)).depart[0]
        pose = channel.Pose(position, az, cfg["tilt"])
        book = _codebook(source, cfg["array"], carrier, "stations", "array")
        try:
            schedule = sweep.make_schedule(len(book), cfg["beam_dwell"],
                                           cfg["beam_order"], cfg["phase"])
        except ConfigError as e:
            raise source.error(e.descrip, "stations")
        name = cfg["id"] if cfg["id"] is not None else f"bs{i}"
        stations.append(sweep.Station(name, pose, book, schedule,
                                      cfg["carrier"] or carrier))
    return tuple(stations)


def calibrated_loss(cfg, station, model, rx_book, target):
    """Return the system_loss giving the best LoS beam pair `target` dBm.

    The beam pair is the station's and the mobile's codebook beam closest
    to the LoS path at t = 0.
    """
    pose = mobility.pose_at(model, 0.0)
    los = channel.los_path(station.pose, pose)
    tx_beam = array.best_beam(station.codebook,
                              *channel.local_direction(station.pose,
                                                       los.depart))
    rx_beam = array.best_beam(rx_book,
                              *channel.local_direction(pose, los.arrive))
    geometry = channel.LinkGeometry(station.pose, pose,
                                    (station.codebook, tx_beam),
                                    (rx_book, rx_beam))
    return channel.calibrate_system_loss(cfg, geometry, target)


def _density(source, doc):
    cfg = _section(source, doc, DENSITY_DEFAULTS, "density")
    query = deployment.DensityQuery(cfg["ranges"][0] if cfg["ranges"]
                                    else 0.0, cfg["target_prob"],
                                    int(cfg["k"]), cfg["grid"])
    try:
        for r in cfg["ranges"]:
            deployment.check_query(query._replace(range=r))
        if not cfg["ranges"]:
            raise ConfigError("density needs at least one range")
    except ConfigError as e:
        raise source.error(e.descrip, "density")
    return DensitySettings(tuple(float(r) for r in cfg["ranges"]), query,
                           int(cfg["monte_carlo"]))


def _scenario(source, doc, name):
    missing = [s for s in SIMULATION_SECTIONS if s not in doc]
    if missing:
        raise source.error(f"scenario is missing the '{missing[0]}' section")

    sim = _section(source, doc["sim"], SIM_DEFAULTS, "sim")
    seed = sim["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise source.error("seed must be a non-negative integer",
                           "sim", "seed")

    cfg, channel_doc = _channel_config(source, doc.get("channel"))
    model = _mobility_model(source, doc["mobility"], seed)
    rx_book = _codebook(source, doc.get("array"), cfg.carrier, "array")
    stations = _stations(source, doc["stations"], cfg.carrier, model.start)
    blockers = _blocker_process(source, doc.get("blockers"), seed)

    target = channel_doc["calibrate_los_rss"]
    if target is not None:
        if "system_loss" in (doc.get("channel") or {}):
            raise source.error("give either system_loss or "
                               "calibrate_los_rss, not both",
                               "channel", "calibrate_los_rss")
        loss = calibrated_loss(cfg, stations[0], model, rx_book, target)
        cfg = cfg._replace(system_loss=loss)

    proto = _section(source, doc.get("protocol"), PROTOCOL_DEFAULTS,
                     "protocol")
    if proto["decode_threshold"] is None:
        proto["decode_threshold"] = cfg.decode_threshold
    proto_cfg = protocol.ProtocolConfig(**proto)

    scenario = sweep.Scenario(
        name, stations, (model, rx_book), cfg, blockers, proto_cfg,
        sim["horizon"], sim["slot"], seed, int(sim["oracle_stride"]),
        int(sim["neighbor_every"]), sim["random_phase"], sim["scan_start"])
    try:
        sweep.check_scenario(scenario)
    except ConfigError as e:
        raise source.error(e.descrip, "sim")
    return scenario


def parse_scenario(text, filename="<scenario>"):
    """Return the ScenarioFile described by JSON `text`.

    Raises ConfigError, anchored at a line of the file, on any schema
    violation.
    """
    source = _Source(text, filename)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        line = e.lineno
        full = source.lines[line - 1] if 0 < line <= len(source.lines) \
            else ""
        raise ConfigError(f"invalid JSON: {e.msg}",
                          Location(filename, line, full))
    if not isinstance(doc, dict):
        raise source.error("scenario file must hold a JSON object")

    for key in doc:
        if key not in TOP_LEVEL:
            raise source.error(f"unknown section '{key}'", key)
    version = doc.get("schema_version")
    if version != SCHEMA:
        raise source.error(f"unsupported schema_version '{version}', "
                           f"expected '{SCHEMA}'", "schema_version")

    name = doc.get("name", filename)
    if not isinstance(name, str):
        raise source.error("name must be a string", "name")

    density = _density(source, doc["density"]) if "density" in doc else None
    simulated = any(s in doc for s in SIMULATION_SECTIONS + (
        "array", "channel", "blockers", "protocol"))
    if density is not None and not simulated:
        scenario = None
    else:
        scenario = _scenario(source, doc, name)

    analysis = _section(source, doc.get("analysis"), ANALYSIS_DEFAULTS,
                        "analysis")
    if analysis["link"] not in ("serving", "neighbor"):
        raise source.error(f"unknown link '{analysis['link']}'",
                           "analysis", "link")
    return ScenarioFile(name, scenario, density, analysis)


def load_scenario(path, horizon=None):
    """Return the ScenarioFile at `path`, optionally with a new horizon."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except IOError:
        raise ConfigError(f"could not read scenario file '{path}'")
    parsed = parse_scenario(text, str(path))
    if horizon is not None and parsed.scenario is not None:
        if horizon <= 0:
            raise ConfigError("horizon must be positive")
        parsed = parsed._replace(
            scenario=parsed.scenario._replace(horizon=horizon))
    return parsed
