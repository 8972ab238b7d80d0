import pytest

from pixvem import errors, plotting
from pixvem.exceptions import ConfigError


def _rec(H, k, e1, tau=0.25):
    return errors.ErrorRecord(H, H * tau, k, tau, int(1 / H ** 2), e1 / 10, e1)


def test_single_point_series_has_marker_only():
    svg = plotting.render([_rec(0.125, 1, 0.3)])
    assert "<circle" in svg and "<polyline" not in svg
    assert "k=1, tau=0.25</text>" in svg


def test_two_point_power_law_annotated():
    svg = plotting.render([_rec(0.125, 2, 0.08), _rec(0.0625, 2, 0.02)])
    assert "<polyline" in svg and "(2.00)" in svg


def test_series_per_order_and_ratio():
    recs = [_rec(H, k, 0.1 * H ** k) for k in (1, 2, 3) for H in (0.25, 0.125)]
    assert plotting.render(recs, kind="error_vs_dofs", metric="e0").count("<polyline") == 3


@pytest.mark.parametrize("kwargs", [{"kind": "pie"}, {"metric": "e2"}])
def test_bad_arguments(kwargs):
    with pytest.raises(ConfigError):
        plotting.render([_rec(0.125, 1, 0.3)], **kwargs)


def test_empty():
    with pytest.raises(ConfigError):
        plotting.render([])
