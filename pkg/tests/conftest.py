import dataclasses
import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from gcg.graph.config import GraphConfig
from gcg.graph.network import GraphModel, NetworkDims

TINY_IMAGE = dict(frame_shape=(9, 11), n_frames=2, conv_filters=(2, 3), conv_kernel=3, conv_stride=2,
                  hidden=5, action_embed=3, rnn_width=4)
TINY_RAYS = dict(frame_shape=(6,), n_frames=2, hidden=5, action_embed=3, rnn_width=4)


def tiny_model(graph: GraphConfig | None = None, image: bool = False, seed: int = 0, dtype=np.float64):
    dims = NetworkDims(**(TINY_IMAGE if image else TINY_RAYS))
    return GraphModel.create(dims, graph or GraphConfig(horizon=3, label_horizon=3), seed=seed, dtype=dtype)


def random_obs(model, B, rng):
    return rng.uniform(0, 1, size=(B,) + model.network.dims.obs_shape)


# full-budget learning runs, cached on disk

ROOT = Path(__file__).resolve().parents[1]
RUN_CACHE = Path(os.environ.get("GCG_ACCEPTANCE_DIR", ROOT / ".acceptance_runs"))


def _source_hash() -> str:
    h = hashlib.sha256()
    src = ROOT / "src" / "gcg"
    for p in sorted(src.rglob("*")):
        if p.suffix in (".py", ".json") and "__pycache__" not in p.parts:
            h.update(str(p.relative_to(src)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()[:16]


def learning_run(cfg, seed: int) -> dict:
    """Run ``cfg`` for its full budget and summarize it.

    Results live under $GCG_ACCEPTANCE_DIR (default .acceptance_runs/) keyed by
    the config, the seed and a hash of the package sources, so editing any
    source file forces a fresh run. Delete the directory to recompute.
    """
    from gcg.config import dump_yaml
    from gcg.driver.run import run
    from gcg.experiments.evaluate import final_distance

    cfg = dataclasses.replace(cfg, log_wall_clock=False)
    key = hashlib.sha256(f"{dump_yaml(cfg)}|{seed}|{_source_hash()}".encode()).hexdigest()[:16]
    out = RUN_CACHE / f"{cfg.name}_seed{seed}_{key}"
    summary = out / "summary.json"
    if summary.exists():
        return json.loads(summary.read_text())
    t0 = time.perf_counter()
    res = run(cfg, seed=seed, out_dir=out)
    info = {"name": cfg.name, "seed": seed, "steps": res.steps, "wall_s": time.perf_counter() - t0,
            "episodes": len(res.episodes),
            "final": final_distance(res.episodes, res.steps, open_episode=res.open_episode)}
    summary.write_text(json.dumps(info, indent=1))
    return info


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance summary: one line per criterion, printed at the end of the session

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test verifies")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    entry = _CRITERIA.setdefault(props["criterion"], {"title": props["title"], "ok": True, "notes": []})
    entry["ok"] &= report.outcome == "passed"
    if props.get("detail"):
        entry["notes"].append(props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["notes"]:
            line += "  [" + "; ".join(e["notes"]) + "]"
        terminalreporter.write_line(line)
