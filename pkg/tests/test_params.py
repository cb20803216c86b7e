import pytest

from dcfdelay.macmodel import slot_durations
from dcfdelay.params import InvalidParameterError, MacPhyParams, format_profile, load_profile, parse_profile


def test_bundled_profile_values(profile):
    assert profile.w_min == 256
    assert profile.m_stages == 2
    assert profile.max_window == 1024
    assert profile.slot_time == pytest.approx(20e-6)
    assert profile.sifs == pytest.approx(10e-6)
    assert profile.difs == pytest.approx(50e-6)
    assert profile.phy_header_time == pytest.approx(192e-6)
    assert (profile.mac_header_bytes, profile.ack_bytes, profile.payload_bytes) == (34, 14, 1500)
    assert profile.data_rate == 1e6
    assert profile.prop_delay == pytest.approx(1e-6)


def test_profile_roundtrip(tmp_path, profile):
    path = tmp_path / "p.cfg"
    path.write_text(format_profile(profile))
    again = load_profile(path)
    for name in ("w_min", "m_stages", "mac_header_bytes", "ack_bytes", "payload_bytes", "data_rate"):
        assert getattr(again, name) == getattr(profile, name)
    for name in ("slot_time", "sifs", "difs", "phy_header_time", "prop_delay"):
        assert getattr(again, name) == pytest.approx(getattr(profile, name), rel=1e-12)


def test_profile_comments_and_unknown_keys():
    p = parse_profile("w_min = 64  # wider\n; note\nslot_time = 9\n")
    assert p.w_min == 64 and p.slot_time == pytest.approx(9e-6)
    with pytest.raises(InvalidParameterError):
        parse_profile("cw_min = 32\n")


@pytest.mark.parametrize(
    "kwargs",
    [{"w_min": 1}, {"m_stages": -1}, {"slot_time": 0.0}, {"sifs": -1e-6}, {"data_rate": 0.0}, {"payload_bytes": 0}, {"prop_delay": -1e-9}],
)
def test_invalid_parameters(kwargs):
    with pytest.raises(InvalidParameterError):
        MacPhyParams(**kwargs)


def test_slot_durations_dot11b(profile):
    # 192 + 1534*8 + 10 + 192 + 14*8 + 50 + 2 us and 192 + 1534*8 + 50 + 1 us
    t_idle, t_s, t_c = slot_durations(profile)
    assert t_idle == pytest.approx(20e-6)
    assert t_s == pytest.approx(12.830e-3, rel=1e-12)
    assert t_c == pytest.approx(12.515e-3, rel=1e-12)
    assert t_s >= t_c >= t_idle


def test_slot_durations_zero_overhead():
    # the constructor forbids zero PHY timings, so evaluate the formula on a bare namespace
    from types import SimpleNamespace

    p = SimpleNamespace(slot_time=20e-6, sifs=0.0, difs=0.0, phy_header_time=0.0, mac_header_bytes=0, ack_bytes=0,
                        data_rate=1e6, payload_bytes=0, prop_delay=0.0)
    _, t_s, t_c = slot_durations(p)
    assert t_s == 0.0 and t_c == 0.0


def test_slot_durations_monotone_in_payload(profile):
    from dataclasses import replace

    _, t_s1, t_c1 = slot_durations(profile)
    _, t_s2, t_c2 = slot_durations(replace(profile, payload_bytes=2 * profile.payload_bytes))
    assert t_s2 > t_s1 and t_c2 > t_c1
