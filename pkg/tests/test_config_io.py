"""Configuration parsing/validation, snapshot round trips, and artifact
determinism."""

import json

import numpy as np
import pytest

from torusflow import (ConfigError, Grid, ScalarField, SnapshotError, config_hash,
                       parse_config, read_snapshot, serialize_config, write_snapshot)

from conftest import rng_field


MINIMAL = '{"grid": {"n": 64}, "model": {"kind": "gsqg", "alpha": 0}}'


class TestParse:
    def test_minimal_document_fills_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.grid.n == 64
        assert cfg.model.kind == "gsqg"
        assert cfg.time.dt > 0
        assert cfg.solver.tol > 0
        assert cfg.ensemble.m >= 1

    def test_alpha_out_of_range_names_key(self):
        with pytest.raises(ConfigError, match="model.alpha"):
            parse_config('{"model": {"kind": "gsqg", "alpha": 1.5}}')

    def test_negative_viscosity_rejected(self):
        with pytest.raises(ConfigError, match="model.nu"):
            parse_config('{"model": {"kind": "gsqg", "nu": -0.1}}')

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match="solver.tolerance"):
            parse_config('{"solver": {"tolerance": 1e-6}}')

    def test_grid_power_of_two_enforced(self):
        with pytest.raises(ConfigError, match="grid.n"):
            parse_config('{"grid": {"n": 48}}')

    def test_dt_must_divide_T(self):
        with pytest.raises(ConfigError, match="time.dt"):
            parse_config('{"time": {"T": 1.0, "dt": 0.3}}')

    def test_loop_validation(self):
        with pytest.raises(ConfigError, match=r"loops\[0\]"):
            parse_config('{"loops": [{"kind": "triangle"}]}')

    def test_round_trip_reparses_equal(self):
        doc = ('{"grid": {"n": 32}, "time": {"T": 0.2, "dt": 0.05}, '
               '"model": {"kind": "gsqg", "alpha": 0.5, "nu": 0.01}, '
               '"ensemble": {"m": 7, "seed": 123}, '
               '"loops": [{"kind": "circle", "name": "c", "radius": 0.8}]}')
        cfg = parse_config(doc)
        text = serialize_config(cfg)
        cfg2 = parse_config(text)
        assert serialize_config(cfg2) == text
        assert config_hash(cfg2) == config_hash(cfg)

    def test_hash_ignores_output_location(self):
        a = parse_config('{"output": {"directory": "a"}}')
        b = parse_config('{"output": {"directory": "b"}}')
        assert config_hash(a) == config_hash(b)
        assert serialize_config(a) != serialize_config(b)


class TestSnapshots:
    def test_round_trip_bit_exact(self, tmp_path, grid32):
        f = rng_field(grid32, 150)
        base = tmp_path / "field"
        write_snapshot(f, base, field_name="omega", time=0.25, model="gsqg",
                       config_hash="abc123")
        g, meta = read_snapshot(base)
        assert g.values.tobytes() == f.values.tobytes()
        assert meta["field_name"] == "omega"
        assert meta["byte_order"] == "LE"
        assert meta["layout"] == "row-major-yx"
        assert meta["grid_n"] == 32

    def test_truncated_payload_rejected(self, tmp_path, grid32):
        f = rng_field(grid32, 151)
        base = tmp_path / "field"
        write_snapshot(f, base, field_name="omega", time=0.0, model="gsqg",
                       config_hash="x")
        bin_path = base.with_suffix(".bin")
        bin_path.write_bytes(bin_path.read_bytes()[:-8])
        with pytest.raises(SnapshotError, match="length"):
            read_snapshot(base)

    def test_foreign_grid_n_rejected(self, tmp_path, grid32):
        f = rng_field(grid32, 152)
        base = tmp_path / "field"
        write_snapshot(f, base, field_name="omega", time=0.0, model="gsqg",
                       config_hash="x")
        meta_path = base.with_suffix(".json")
        meta = json.loads(meta_path.read_text())
        meta["grid_n"] = 64
        meta_path.write_text(json.dumps(meta))
        with pytest.raises(SnapshotError, match="grid_n"):
            read_snapshot(base)

    def test_missing_sidecar_keys_rejected(self, tmp_path, grid32):
        f = rng_field(grid32, 153)
        base = tmp_path / "field"
        write_snapshot(f, base, field_name="omega", time=0.0, model="gsqg",
                       config_hash="x")
        meta_path = base.with_suffix(".json")
        meta = json.loads(meta_path.read_text())
        del meta["config_hash"]
        meta_path.write_text(json.dumps(meta))
        with pytest.raises(SnapshotError, match="config_hash"):
            read_snapshot(base)
