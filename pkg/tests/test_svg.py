import xml.etree.ElementTree as ET

import pytest

from retirement_eval.svg import line_chart

NS = "{http://www.w3.org/2000/svg}"


def test_well_formed_with_one_polyline_per_series():
    svg = line_chart({"a": ([0, 1, 2], [0.0, 1.0, 0.5]), "b & c": ([0, 1, 2], [1, 1, 1])},
                     title="t <x>", xlabel="year", ylabel="rate", band=([0, 1, 2], [0, 0, 0], [1, 2, 1]),
                     hline=0.5, vline=1)
    root = ET.fromstring(svg)
    assert root.tag == NS + "svg"
    lines = root.findall(NS + "polyline")
    assert len(lines) == 2
    assert len(lines[0].get("points").split()) == 3
    assert len(root.findall(NS + "polygon")) == 1
    assert lines[1].find(NS + "title").text == "b & c"


def test_points_inside_canvas():
    svg = line_chart({"s": (list(range(50)), [x * x for x in range(50)])}, width=400, height=300)
    root = ET.fromstring(svg)
    for pair in root.find(NS + "polyline").get("points").split():
        x, y = map(float, pair.split(","))
        assert 0 <= x <= 400 and 0 <= y <= 300


def test_constant_series_and_empty_input():
    ET.fromstring(line_chart({"flat": ([1, 1], [2, 2])}))
    with pytest.raises(ValueError):
        line_chart({})
