import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qbattery.plot import emit_plot, load_curves, render_svg
from qbattery.sweep import UsageError, preset, read_manifest, run_sweep

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def fig2a_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2a")
    run_sweep(preset("fig2a", t_max=3.0), out, 1)
    return out


def curve_groups(path):
    root = ET.parse(path).getroot()
    return [g for g in root.iter(f"{SVG}g") if g.get("class") == "curve"]


def polyline_points(group):
    line = group.find(f"{SVG}polyline")
    return [tuple(map(float, p.split(","))) for p in line.get("points").split()]


def test_one_curve_per_swept_value(fig2a_dir):
    path = emit_plot(fig2a_dir, "delta_E")
    assert path == fig2a_dir / "delta_E.svg"
    groups = curve_groups(path)
    gs = [r["spec"].g for r in read_manifest(fig2a_dir)["runs"]]
    assert len(groups) == len(gs)
    assert [g.get("data-label") for g in groups] == [f"g = {v:.4g}" for v in gs]
    text = path.read_text()
    assert "time t (dimensionless)" in text
    assert "net charging energy" in text


def test_plot_is_pure_function_of_csvs(fig2a_dir, tmp_path):
    a = emit_plot(fig2a_dir, "ergotropy", tmp_path / "a.svg").read_bytes()
    b = emit_plot(fig2a_dir, "ergotropy", tmp_path / "b.svg").read_bytes()
    assert a == b


def test_ergotropy_curves_below_delta_e(fig2a_dir):
    _, erg = load_curves(fig2a_dir, "ergotropy")
    _, de = load_curves(fig2a_dir, "delta_E")
    for (la, ta, ya), (lb, tb, yb) in zip(erg, de):
        assert la == lb
        np.testing.assert_array_equal(ta, tb)
        assert np.all(ya <= yb + 1e-6)


def test_zero_duration_gives_single_point_chart(tmp_path):
    run_sweep(preset("fig3a", values=(2,), t_max=0.0), tmp_path, 1)
    path = emit_plot(tmp_path, "delta_E")
    (group,) = curve_groups(path)
    assert len(polyline_points(group)) == 1
    assert group.find(f"{SVG}circle") is not None
    assert not re.search(r"nan|inf", path.read_text())


def test_render_svg_handles_non_finite_samples():
    t = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, np.nan, 1.0])
    text = render_svg([("x", t, y)], "ergotropy")
    assert "nan" not in text
    ET.fromstring(text)


def test_unknown_quantity_is_usage_error(fig2a_dir):
    with pytest.raises(UsageError):
        emit_plot(fig2a_dir, "trace_dev")


def test_missing_column_is_usage_error(fig2a_dir, tmp_path):
    for item in fig2a_dir.iterdir():
        text = item.read_text()
        if item.suffix == ".csv":
            lines = text.splitlines()
            # drop the ergotropy column
            text = "\n".join(",".join(c for i, c in enumerate(ln.split(",")) if i != 3) for ln in lines) + "\n"
        (tmp_path / item.name).write_text(text)
    with pytest.raises(UsageError):
        emit_plot(tmp_path, "ergotropy")
