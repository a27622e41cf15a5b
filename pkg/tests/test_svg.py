import csv
import xml.etree.ElementTree as ET

from dit_scaling.svg import Series, render_svg, write_plot


def test_svg_is_well_formed_and_drops_nonpositive_points_on_log_axes():
    svg = render_svg([Series("a", [1, 10, 0, -1], [1, 100, 5, 5])], title="t <&>", logx=True, logy=True)
    root = ET.fromstring(svg.split("\n", 1)[1])
    circles = root.findall("{http://www.w3.org/2000/svg}circle")
    assert len(circles) == 2
    assert "1e1" in svg


def test_line_series_becomes_polyline():
    svg = render_svg([Series("fit", [1, 2, 3], [3, 2, 1], kind="line")])
    assert "<polyline" in svg and "<circle" not in svg


def test_write_plot_emits_matching_csv(tmp_path):
    svg_path, csv_path = write_plot(tmp_path / "p.svg", [Series("a", [1, 2], [3, 4]), Series("b", [5], [6], "line")])
    assert svg_path.read_text().startswith("<?xml")
    rows = list(csv.reader(csv_path.open()))
    assert rows == [["series", "kind", "x", "y"], ["a", "scatter", "1", "3"], ["a", "scatter", "2", "4"], ["b", "line", "5", "6"]]


def test_identical_input_renders_identical_bytes():
    s = [Series("a", [0.1, 0.2, 0.3], [1e-3, 2e-3, 5e-3])]
    assert render_svg(s, logy=True) == render_svg(s, logy=True)
