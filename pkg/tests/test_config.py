"""Configuration loading and overrides."""

from __future__ import annotations

from decimal import Decimal

import pytest

from numveil.config import CascadeConfig, config_from_dict, load_config


class TestDefaults:
    def test_fresh_config_is_offline_ready(self):
        cfg = CascadeConfig()
        assert cfg.tau == 0.8
        assert cfg.n_samples == 7
        assert cfg.local.kind == "simulated"
        assert cfg.remote.kind == "simulated"
        assert cfg.sandbox.kind == "in-process"

    def test_remote_and_judge_decode_greedily(self):
        cfg = CascadeConfig()
        assert cfg.remote.temperature == 0.0 and cfg.remote.top_p == 1.0
        assert cfg.judge.temperature == 0.0 and cfg.judge.top_p == 1.0
        assert cfg.local.temperature == 1.0

    def test_none_path_gives_defaults(self):
        assert load_config(None) == CascadeConfig()


class TestOverrides:
    def test_nested_sections_override_by_key(self):
        cfg = config_from_dict(
            {
                "tau": 0.6,
                "global_seed": 9,
                "remote": {"kind": "http", "base_url": "https://api.test", "model": "m1"},
                "switch": {"seed": 4, "general_spread": "0.25"},
                "sandbox": {"kind": "subprocess", "command": ["python3", "-m", "x"]},
            }
        )
        assert cfg.tau == 0.6
        assert cfg.global_seed == 9
        assert cfg.remote.kind == "http"
        assert cfg.remote.base_url == "https://api.test"
        assert cfg.local.kind == "simulated"
        assert cfg.switch.seed == 4
        assert cfg.switch.general_spread == Decimal("0.25")
        assert cfg.sandbox.command == ("python3", "-m", "x")

    def test_unknown_keys_are_ignored(self):
        cfg = config_from_dict({"comment": "anything"})
        assert cfg == CascadeConfig()

    def test_with_tau_returns_a_copy(self):
        cfg = CascadeConfig()
        changed = cfg.with_tau(0.3)
        assert changed.tau == 0.3
        assert cfg.tau == 0.8


class TestYamlFiles:
    def test_round_trip_through_a_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("tau: 0.4\nlocal:\n  max_tokens: 256\n")
        cfg = load_config(path)
        assert cfg.tau == 0.4
        assert cfg.local.max_tokens == 256

    def test_empty_file_is_all_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == CascadeConfig()

    def test_non_mapping_root_is_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a\n- list\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_invalid_tau_fails_validation(self, tmp_path):
        path = tmp_path / "bad_tau.yaml"
        path.write_text("tau: 2.0\n")
        with pytest.raises(ValueError):
            load_config(path)
