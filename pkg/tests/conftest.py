import pytest

from resetloop import cases


@pytest.fixture(scope="session")
def preset_configs():
    return {i: cases.parse_config(cases.preset_path(f"case{i}")) for i in range(1, 8)}


@pytest.fixture(scope="session")
def preset_cases(preset_configs):
    return {i: cases.build_case(cfg) for i, cfg in preset_configs.items()}


@pytest.fixture(scope="session")
def preset_models(preset_cases):
    return {i: c.model for i, c in preset_cases.items()}
