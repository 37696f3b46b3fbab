import pytest
import yaml

from helpers import base_config, write_synthetic_inputs


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    """Directory with cases.csv, meta.csv and config.yaml for pipeline tests."""
    d = tmp_path_factory.mktemp("synthetic")
    write_synthetic_inputs(d)
    cfg = base_config(d)
    with open(d / "config.yaml", "w") as fh:
        yaml.safe_dump(cfg, fh)
    return d
