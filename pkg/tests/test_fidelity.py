# tests/test_fidelity.py
"""Offline demo pipeline at full size: distribution fidelity, ablations and determinism."""
import asyncio
import json
import re
from pathlib import Path

import pytest

from core.application import Application
from core.managers import ConfigManager
from core.managers.service_manager import TRANSCRIPTS_FILE
from services.evaluation_service import REPORT_FILE

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
METRICS = ("jsd_sd", "jsd_si", "jsd_dailyloc", "jsd_stloc")

pytestmark = pytest.mark.slow


def write_demo(directory: Path, person_count: int, ablation: str = "") -> Path:
    """The shipped demo config and three-archetype survey spec, resized and pointed at `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    spec = (CONFIG_DIR / "demo_synth.toml").read_text(encoding="utf-8")
    spec = re.sub(r"(?m)^person_count = \d+$", f"person_count = {person_count}", spec)
    (directory / "demo_synth.toml").write_text(spec, encoding="utf-8")
    config = (CONFIG_DIR / "config.toml").read_text(encoding="utf-8")
    config = re.sub(r'(?m)^output_dir = ".*"$', 'output_dir = "out"', config)
    path = directory / "config.toml"
    path.write_text(config + ablation, encoding="utf-8")
    return path


def run_demo(directory: Path, person_count: int, ablation: str = "") -> Path:
    config = ConfigManager(write_demo(directory, person_count, ablation)).run_config()
    asyncio.run(Application(config).run("pipeline"))
    return directory / "out"


def overall_scores(out: Path) -> dict:
    report = json.loads((out / REPORT_FILE).read_text(encoding="utf-8"))
    return {m: report["reports"]["all"][m] for m in METRICS}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory) -> dict:
    # 1000 persons over two days
    return overall_scores(run_demo(tmp_path_factory.mktemp("full"), 1000))


def test_replay_run_reproduces_the_survey_distributions(full_run):
    assert full_run["jsd_sd"] <= 0.10
    assert full_run["jsd_si"] <= 0.10
    assert full_run["jsd_dailyloc"] <= 0.10
    assert full_run["jsd_stloc"] <= 0.25


@pytest.mark.parametrize("ablation", [
    "\n[ablation]\ndisable_self_evaluation = true\n",
    "\n[ablation]\ndisable_rethink = true\n",
])
def test_ablations_never_improve_fidelity(tmp_path, full_run, ablation):
    ablated = overall_scores(run_demo(tmp_path, 1000, ablation))
    for metric in METRICS:
        assert ablated[metric] >= full_run[metric] - 0.01, metric


def test_demo_pipeline_is_byte_identical_across_runs(tmp_path):
    def artifacts(out: Path) -> dict:
        return {p.relative_to(out).as_posix(): p.read_bytes()
                for p in sorted(out.rglob("*")) if p.is_file() and p.name != TRANSCRIPTS_FILE}

    first = artifacts(run_demo(tmp_path / "a", 500))
    second = artifacts(run_demo(tmp_path / "b", 500))
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name
