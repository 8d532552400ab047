import pytest

from slipflow import ConfigError, FarnebackParams, Policy, RoiSpec
from slipflow.config import (
    flow_params_from,
    parse_kv,
    parse_motion,
    parse_roi,
    pipeline_from,
    scenario_from,
    scenario_text,
)
from slipflow.sim import Mixed, Motion, MotionKind, Scenario


def test_parse_kv_comments_and_lines():
    kv = parse_kv("# header\n\ntau_y = 1.5  # px/frame\npolicy=REPORT_ONLY\n")
    assert kv == {"tau_y": ("1.5", 3), "policy": ("REPORT_ONLY", 4)}


@pytest.mark.parametrize("text", ["tau_y 1.5", "a = 1\na = 2", " = 3"])
def test_parse_kv_errors(text):
    with pytest.raises(ConfigError):
        parse_kv(text)


def test_parse_roi():
    assert parse_roi("160,120,100") == RoiSpec(160, 120, 100, 12)
    assert parse_roi("160, 120, 100, 5") == RoiSpec(160, 120, 100, 5)
    with pytest.raises(ValueError):
        parse_roi("1,2")


def test_parse_motion():
    assert parse_motion("slip 1.5") == Motion.slip(1.5)
    assert parse_motion("rotate -2") == Motion.rotate(-2.0)
    assert parse_motion("SPIN 0.02").kind is MotionKind.SPIN
    mixed = parse_motion("static @ 0, slip 2 @ 30")
    assert mixed == Mixed(((0, Motion.static()), (30, Motion.slip(2.0))))
    for bad in ("slide 2", "slip", "static 3", "slip 2, static"):
        with pytest.raises(ValueError):
            parse_motion(bad)


def test_pipeline_from():
    kv = parse_kv("roi = 100,80,60\ntau_y = 2\ndebounce = 4\npolicy = report_only\nnum_levels = 2\n")
    cfg = pipeline_from(kv)
    assert cfg.roi == RoiSpec(100, 80, 60, 7)
    assert cfg.detector.tau_y == 2.0 and cfg.detector.debounce == 4
    assert cfg.detector.policy is Policy.REPORT_ONLY
    assert cfg.flow.num_levels == 2 and cfg.working_size == (320, 240)


def test_pipeline_roi_override_and_margin():
    cfg = pipeline_from(parse_kv("border_margin = 3\n"), RoiSpec(50, 50, 30, 8))
    assert cfg.roi == RoiSpec(50, 50, 30, 3)


def test_pipeline_working_size():
    cfg = pipeline_from(parse_kv("roi = 50,50,30\nworking_width = 160\nworking_height = 120\n"))
    assert cfg.working_size == (160, 120)
    with pytest.raises(ConfigError):
        pipeline_from(parse_kv("roi = 50,50,30\nworking_width = 160\n"))


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("roi = 50,50,30\nspeed = 3\n", "line 2"),
        ("roi = 50,50,30\ndebounce = 2.5\n", "line 2"),
        ("roi = 50,50,30\ntau_y = -1\n", "tau_y"),
        ("tau_y = 1\n", "ROI"),
    ],
)
def test_pipeline_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        pipeline_from(parse_kv(text))


def test_flow_params_from():
    assert flow_params_from(parse_kv("iterations_per_level = 5\n")) == FarnebackParams(iterations_per_level=5)
    with pytest.raises(ConfigError):
        flow_params_from(parse_kv("tau_y = 1\n"))


def test_scenario_round_trip():
    sc = Scenario(seed=9, width=200, height=150, motion=Mixed(((0, Motion.static()), (5, Motion.slip(2.5)))),
                  num_frames=12, illumination_drift=0.01, noise_sigma=0.002)
    assert scenario_from(parse_kv(scenario_text(sc))) == sc


def test_scenario_defaults_and_unknown():
    assert scenario_from({}) == Scenario()
    with pytest.raises(ConfigError, match="line 1"):
        scenario_from(parse_kv("colour = red\n"))
    with pytest.raises(ConfigError):
        scenario_from(parse_kv("num_frames = 1\n"))
