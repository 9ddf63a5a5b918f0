import copy

import pytest

import validators.validate


@pytest.fixture
def valid_spec():
    return {
        "name": "cantor",
        "space": {"dim": 1, "bounds": [[0.0, 1.0]]},
        "maps": [
            {"type": "affine", "matrix": [[0.3333333333333333]], "offset": [0.0]},
            {"type": "expr", "exprs": ["x/3 + 2/3"]},
        ],
        "weights": [0.5, 0.5],
    }


class TestValidateIfsSpec:
    def test_valid_spec_passes(self, valid_spec):
        is_valid, errors = validators.validate.validate_ifs_spec(valid_spec)
        assert is_valid is True
        assert errors == []

    def test_weights_are_optional(self, valid_spec):
        del valid_spec["weights"]
        assert validators.validate.validate_ifs_spec(valid_spec)[0] is True

    @pytest.mark.parametrize("path,value,pointer", [
        (("space", "dim"), 4, "/space/dim"),
        (("space", "dim"), True, "/space/dim"),
        (("space", "variant"), "torus", "/space/variant"),
        (("space", "bounds"), [[1.0, 0.0]], "/space/bounds/0"),
        (("space", "bounds"), [[0.0, "1"]], "/space/bounds/0"),
        (("maps", 0, "type"), "spiral", "/maps/0/type"),
        (("maps", 0, "offset"), [0.0, 1.0], "/maps/0/offset"),
        (("maps", 0, "matrix"), [[float("nan")]], "/maps/0/matrix/0/0"),
        (("maps", 1, "exprs"), [3], "/maps/1/exprs/0"),
        (("weights",), [0.5], "/weights"),
        (("weights",), [1.0, 0.0], "/weights/1"),
    ])
    def test_errors_point_at_the_field(self, valid_spec, path, value, pointer):
        node = valid_spec
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = value
        is_valid, errors = validators.validate.validate_ifs_spec(valid_spec)
        assert is_valid is False
        assert any(e.startswith(f"{pointer}:") for e in errors), errors

    def test_weights_must_sum_to_one(self, valid_spec):
        valid_spec["weights"] = [0.5, 0.6]
        _, errors = validators.validate.validate_ifs_spec(valid_spec)
        assert errors == ["/weights: weights sum 1.1"]

    def test_euclidean_space_needs_bounds(self, valid_spec):
        del valid_spec["space"]["bounds"]
        _, errors = validators.validate.validate_ifs_spec(valid_spec)
        assert errors == ["/space/bounds: required for a euclidean space"]

    def test_circle_space_defaults_bounds(self):
        spec = {
            "space": {"dim": 1, "variant": "circle"},
            "maps": [{"type": "builtin", "name": "circle-rotation", "params": {"r": 0.25}}],
        }
        assert validators.validate.validate_ifs_spec(spec)[0] is True

    @pytest.mark.parametrize("entry,pointer", [
        ({"type": "builtin", "name": "spiral"}, "/maps/0/name"),
        ({"type": "builtin", "name": "circle-rotation"}, "/maps/0/params/r"),
        ({"type": "builtin", "name": "circle-rotation", "params": {"r": "half"}}, "/maps/0/params/r"),
    ])
    def test_builtin_errors(self, entry, pointer):
        spec = {"space": {"dim": 1, "variant": "circle"}, "maps": [entry]}
        _, errors = validators.validate.validate_ifs_spec(spec)
        assert any(e.startswith(f"{pointer}:") for e in errors), errors

    def test_builtin_dimension(self):
        spec = {
            "space": {"dim": 2, "bounds": [[0, 1], [0, 1]]},
            "maps": [{"type": "builtin", "name": "circle-rotation", "params": {"r": 0.1}}],
        }
        _, errors = validators.validate.validate_ifs_spec(spec)
        assert errors == ["/maps/0/name: builtin 'circle-rotation' is not defined in dimension 2"]

    @pytest.mark.parametrize("document", [[], "cantor", None])
    def test_document_must_be_object(self, document):
        assert validators.validate.validate_ifs_spec(document) == (False, ["/: spec must be a JSON object"])

    def test_empty_map_list(self, valid_spec):
        valid_spec["maps"] = []
        _, errors = validators.validate.validate_ifs_spec(valid_spec)
        assert errors[0].startswith("/maps:")

    def test_collects_every_error(self, valid_spec):
        broken = copy.deepcopy(valid_spec)
        broken["space"]["dim"] = 0
        broken["maps"][0]["type"] = "spiral"
        broken["weights"] = [2.0, -1.0]
        _, errors = validators.validate.validate_ifs_spec(broken)
        assert len(errors) >= 3


class TestValidateField:
    @pytest.mark.parametrize("value,expected", [
        (True, True),
        ("yes", False),
        (False, True),
    ])
    def test_bool_validation(self, value, expected):
        result = validators.validate._validate_field(value, {"type": "bool"})
        assert result is expected

    @pytest.mark.parametrize("value,expected", [
        (2, True),
        (4, False),
        (0, False),
        (2.0, False),
    ])
    def test_int_range_validation(self, value, expected):
        result = validators.validate._validate_field(value, {"type": "int", "min": 1, "max": 3})
        assert result is expected

    @pytest.mark.parametrize("value,expected", [(0.5, True), (0.0, False), (float("inf"), False)])
    def test_exclusive_min(self, value, expected):
        result = validators.validate._validate_field(value, {"type": "number", "min": 0, "exclusive_min": True})
        assert result is expected

    def test_null_allowed(self):
        result = validators.validate._validate_field(None, {"type": "string", "allow_null": True})
        assert result is True

    def test_null_not_allowed(self):
        result = validators.validate._validate_field(None, {"type": "string", "allow_null": False})
        assert result is False


class TestSpecRules:
    def test_rules_loaded(self):
        assert "space" in validators.validate.SPEC_RULES
        assert "maps" in validators.validate.SPEC_RULES
        assert "circle-rotation" in validators.validate.SPEC_RULES["builtin"]
