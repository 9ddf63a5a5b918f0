import json

import numpy as np
import pandas as pd
import pytest

import writers.emit
from conftest import sierpinski_reference
from errors.exceptions import EmptyResultError, ValidationError
from hyperspace.cloud import PointCloud
from mapkit.maps import Box
from measurekit.measures import DiscreteMeasure
from measurekit.transport import monge_kantorovich
from readers.spec_reader import read_cloud_csv, read_measure_csv


def _read_pnm(path):
    data = path.read_bytes()
    magic, size, maxval, body = data.split(b"\n", 3)
    width, height = (int(v) for v in size.split())
    return magic, width, height, int(maxval), body


class TestEmitImage:
    def test_header_and_pixels(self, tmp_path):
        path = tmp_path / "unit.pgm"
        black = writers.emit.emit_image(np.array([[0.0, 0.0], [1.0, 1.0]]), path, 4, 3, Box([0, 0], [1, 1]))
        magic, width, height, maxval, body = _read_pnm(path)
        assert (magic, width, height, maxval) == (b"P5", 4, 3, 255)
        pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
        assert black == 2
        assert pixels[2, 0] == 0
        assert pixels[0, 3] == 0
        assert np.count_nonzero(pixels == 255) == 10

    def test_points_outside_bbox_are_skipped(self, tmp_path):
        black = writers.emit.emit_image(np.array([[0.5, 0.5], [2.0, 0.5]]), tmp_path / "a.pgm", 8, 8, Box([0, 0], [1, 1]))
        assert black == 1

    def test_one_dimensional_cloud_is_a_line(self, tmp_path):
        path = tmp_path / "line.pgm"
        writers.emit.emit_image(PointCloud(np.linspace(0, 1, 50)), path, 10, 5)
        *_, body = _read_pnm(path)
        pixels = np.frombuffer(body, dtype=np.uint8).reshape(5, 10)
        assert np.all(pixels[2] == 0)
        assert np.count_nonzero(pixels == 0) == 10

    def test_sierpinski_density(self, tmp_path):
        black = writers.emit.emit_image(sierpinski_reference(8), tmp_path / "s.pgm", 512, 512, Box([0, 0], [1, 1]))
        assert black / 512 ** 2 == pytest.approx(0.025, abs=0.003)

    def test_empty_cloud(self, tmp_path):
        with pytest.raises(EmptyResultError):
            writers.emit.emit_image(np.zeros((0, 2)), tmp_path / "e.pgm", 4, 4, Box([0, 0], [1, 1]))

    def test_bad_size(self, tmp_path):
        with pytest.raises(ValidationError):
            writers.emit.emit_image(np.zeros((1, 2)), tmp_path / "e.pgm", 0, 4)


class TestEmitPpm:
    def test_colours_by_label(self, tmp_path):
        path = tmp_path / "orbit.ppm"
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        writers.emit.emit_ppm(points, np.array([0, 1, 7]), path, 2, 2, Box([0, 0], [1, 1]))
        magic, width, height, _, body = _read_pnm(path)
        pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
        assert magic == b"P6"
        assert pixels[1, 0].tolist() == [0, 0, 0]
        assert pixels[1, 1].tolist() == writers.emit.PALETTE[1].tolist()
        assert pixels[0, 0].tolist() == writers.emit.PALETTE[1].tolist()
        assert pixels[0, 1].tolist() == [255, 255, 255]


class TestCanonicalJson:
    def test_sorted_keys_and_full_precision(self):
        text = writers.emit.canonical_json({"b": 0.1, "a": [1, True, None], "c": {"z": np.float64(1 / 3)}})
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert "0.10000000000000001" in text
        assert json.loads(text) == {"a": [1, True, None], "b": 0.1, "c": {"z": 1 / 3}}

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), -float("inf")])
    def test_non_finite_is_null(self, value):
        assert json.loads(writers.emit.canonical_json({"v": value})) == {"v": None}

    def test_numpy_values(self):
        report = {"n": np.int64(3), "ok": np.bool_(True), "xs": np.array([0.5, 0.25])}
        assert json.loads(writers.emit.canonical_json(report)) == {"n": 3, "ok": True, "xs": [0.5, 0.25]}

    def test_same_report_same_bytes(self, tmp_path):
        report = {"x": [0.1, 0.2], "y": {"b": 1, "a": 2}}
        writers.emit.emit_report(report, tmp_path / "one.json")
        writers.emit.emit_report(dict(reversed(report.items())), tmp_path / "two.json")
        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()


class TestCsvWriters:
    def test_cloud_csv_reads_back_exactly(self, tmp_path):
        points = np.random.default_rng(0).random((20, 2))
        writers.emit.emit_cloud_csv(points, tmp_path / "cloud.csv")
        assert np.array_equal(read_cloud_csv(tmp_path / "cloud.csv").points, np.unique(points, axis=0))

    def test_orbit_columns(self, tmp_path):
        path = tmp_path / "orbit.csv"
        writers.emit.emit_orbit_csv(np.array([0, 1]), np.array([0, 2]), np.array([[0.5], [0.25]]), path)
        assert path.read_text().splitlines() == ["0,0,0.5", "1,2,0.25"]

    def test_measure_csv_weight_first(self, tmp_path):
        mu = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.25, 0.75])
        writers.emit.emit_measure_csv(mu, tmp_path / "mu.csv")
        back = read_measure_csv(tmp_path / "mu.csv")
        assert back.weights.tolist() == [0.25, 0.75]

    def test_plan_csv(self, tmp_path):
        _, plan = monge_kantorovich(DiscreteMeasure.dirac([0.0]), DiscreteMeasure(np.array([0.0, 1.0]), [0.5, 0.5]))
        writers.emit.emit_plan_csv(plan, tmp_path / "plan.csv")
        df = pd.read_csv(tmp_path / "plan.csv", header=None)
        assert df.values.tolist() == [[0, 0, 0.5], [0, 1, 0.5]]
