import config.config


class TestDefaults:
    def test_yaml_values_loaded(self):
        assert config.config.DEFAULTS["tol"] == 1.0e-3
        assert config.config.DEFAULTS["image_width"] == 512

    def test_every_fallback_key_present(self):
        assert set(config.config._FALLBACK_DEFAULTS) <= set(config.config.DEFAULTS)

    def test_missing_file_uses_fallback(self, monkeypatch, tmp_path):
        monkeypatch.setattr(config.config, "CONFIG_DIR", tmp_path)
        assert config.config._load_defaults() == config.config._FALLBACK_DEFAULTS

    def test_yaml_overrides_fallback(self, monkeypatch, tmp_path):
        (tmp_path / "defaults.yaml").write_text("tol: 0.5\n", encoding="utf-8")
        monkeypatch.setattr(config.config, "CONFIG_DIR", tmp_path)
        loaded = config.config._load_defaults()
        assert loaded["tol"] == 0.5
        assert loaded["seed"] == 0

    def test_gallery_dir(self):
        assert (config.config.GALLERY_DIR / "cantor.json").exists()

    def test_numeric_defaults_keep_their_type(self):
        for key, fallback in config.config._FALLBACK_DEFAULTS.items():
            assert type(config.config.DEFAULTS[key]) is type(fallback), key

    def test_unsigned_exponent_is_read_as_number(self, monkeypatch, tmp_path):
        (tmp_path / "defaults.yaml").write_text("escape_threshold: 1.0e12\nseed: 7\n", encoding="utf-8")
        monkeypatch.setattr(config.config, "CONFIG_DIR", tmp_path)
        loaded = config.config._load_defaults()
        assert loaded["escape_threshold"] == 1.0e12
        assert loaded["seed"] == 7
