import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from edgefilter.evaluation import (
    Metrics,
    ScenarioReport,
    ScenarioSpec,
    SpecError,
    data_reduction,
    load_scenarios,
    mae,
    render_table,
    round_half_up,
    run_scenario,
    run_scenarios,
)
from edgefilter.evaluation.scenario import CacheError, ScenarioError
from edgefilter.filter import FilterConfig, run_session
from edgefilter.ingest import write_csv
from edgefilter.predictor import PersistenceModel
from edgefilter.synthetic import synthetic_temperature

PUBLISHED = Path(__file__).with_name("published_results.csv")


def published_pairs():
    """(label, total, transmitted, printed reduction) for every table cell pair."""
    out = []
    with PUBLISHED.open() as fh:
        for r in csv.DictReader(fh):
            for tag in ("05", "10"):
                label = f"t{r['table']} {r['source']}->{r['target']} eps={tag[0]}.{tag[1]}"
                out.append((label, int(r[f"total_{tag}"]), int(r[f"transmitted_{tag}"]), r[f"reduction_{tag}"], int(r[f"correct_{tag}"])))
    return out


# Cells whose printed reduction disagrees with their own Total/Transmitted columns.
INCONSISTENT = {
    "t3 D->D eps=0.5", "t3 D->D eps=1.0", "t3 E->E eps=1.0", "t3 F->F eps=0.5",
    "t3 F->F eps=1.0", "t3 G->G eps=0.5", "t3 G->G eps=1.0",
}


def test_data_reduction_examples():
    assert round_half_up(data_reduction(52535, 6810), 2) == "87.04"
    assert round_half_up(data_reduction(8735, 676), 2) == "92.26"
    assert data_reduction(100, 0) == 100.0
    assert data_reduction(100, 100) == 0.0
    with pytest.raises(ValueError):
        data_reduction(0, 0)
    with pytest.raises(ValueError):
        data_reduction(10, 11)


def test_round_half_up():
    assert round_half_up(0.125, 2) == "0.13"
    assert round_half_up(2.675, 2) == "2.68"
    assert round_half_up(0.2635, 3) == "0.264"
    assert round_half_up(1.0, 2) == "1.00"


def test_mae_examples():
    assert mae([1, 2, 3], [1, 1, 4]) == pytest.approx(2 / 3)
    assert round_half_up(mae([1, 2, 3], [1, 1, 4]), 4) == "0.6667"
    assert mae([5.0], [5.0]) == 0.0
    with pytest.raises(ValueError):
        mae([], [])
    with pytest.raises(ValueError):
        mae([1, 2], [1])


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30))
def test_mae_triangle(triples):
    a, b, c = (np.array(x) for x in zip(*triples))
    assert mae(a, c) <= mae(a, b) + mae(b, c) + 1e-9
    assert mae(a, b) == mae(b, a)


@pytest.mark.parametrize("label,total,sent,printed,correct", published_pairs(), ids=lambda v: v if isinstance(v, str) else None)
def test_published_tables_are_internally_consistent(label, total, sent, printed, correct):
    assert correct + sent == total
    m = Metrics.from_counts(0.5, total, sent)
    assert m.correct == correct
    ok = abs(m.reduction_pct - float(printed)) <= 0.01
    assert ok == (label not in INCONSISTENT)


def test_metrics_from_log_identity():
    xs = np.array([10.0, 10.2, 11.5, 11.6, 11.4])
    log, _ = run_session(xs, PersistenceModel(2), FilterConfig(0.5, 2))
    m = Metrics.from_log(0.5, log)
    assert m.total == 5 and m.transmitted + m.correct == m.total
    assert m.transmitted == 2
    assert m.mae == pytest.approx(np.mean([0.2, 1.5, 0.1, 0.1]))
    one, _ = run_session([3.0], PersistenceModel(2), FilterConfig(0.5, 2))
    assert Metrics.from_log(0.5, one).mae is None


# ---- scenarios --------------------------------------------------------------

TRAIN = {"hidden": 4, "max_epochs": 3, "batch_size": 32, "seed": 7}


@pytest.fixture(scope="module")
def data_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_csv(synthetic_temperature(600, seed=1, source_id="A"), root / "A.csv")
    write_csv(synthetic_temperature(600, seed=2, source_id="B"), root / "B.csv")
    return root


def spec_dict(**over):
    d = {
        "name": "same_site",
        "label": "A",
        "train_source": {"file": "A.csv", "source_id": "A", "end": "2021-01-18T00:00:00Z"},
        "test_target": {"file": "A.csv", "source_id": "A", "start": "2021-01-18T00:00:00Z"},
        "thresholds": [0.5, 1.0],
        "filter": {"k": 6},
        "train": dict(TRAIN),
    }
    d.update(over)
    return d


def test_spec_validation():
    with pytest.raises(SpecError, match="overlap"):
        ScenarioSpec.from_dict(spec_dict(test_target={"file": "A.csv", "source_id": "A", "start": "2021-01-10T00:00:00Z"}))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(thresholds=[0.5, 0.0]))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(thresholds=[]))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(name="bogus"))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(extra=1))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(train={"dropout": 1.0}))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict(spec_dict(filter={"k": 0}))
    spec = ScenarioSpec.from_dict(spec_dict())
    assert ScenarioSpec.from_dict(spec.to_dict()) == spec


def test_load_scenarios_applies_defaults(tmp_path):
    doc = {
        "defaults": {"thresholds": [0.25], "filter": {"k": 6}, "train": TRAIN},
        "scenarios": [
            {k: v for k, v in spec_dict().items() if k not in ("thresholds", "filter", "train")},
            spec_dict(name="cross_site", label="A->B", test_target={"file": "B.csv", "source_id": "B"}),
        ],
    }
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(doc))
    specs = load_scenarios(p)
    assert specs[0].thresholds == (0.25,)
    assert specs[1].thresholds == (0.5, 1.0)
    with pytest.raises(SpecError):
        load_scenarios(tmp_path / "none.yaml")
    (tmp_path / "bad.yaml").write_text("scenarios: []\n")
    with pytest.raises(SpecError):
        load_scenarios(tmp_path / "bad.yaml")


def test_run_scenario(data_root, tmp_path):
    spec = ScenarioSpec.from_dict(spec_dict())
    a = run_scenario(spec, data_root, tmp_path / "cache")
    assert len(a.rows) == len(spec.thresholds)
    for m in a.rows:
        assert m.total == 600 - 17 * 24
        assert m.correct + m.transmitted == m.total
    prov = a.provenance
    assert set(prov) >= {"weights_sha256", "train_data_sha256", "test_data_sha256", "seed", "sync_mode", "buffer_policy"}
    assert prov["seed"] == 7 and prov["sync_mode"] == "synchronized"
    assert len(list((tmp_path / "cache").iterdir())) == 1

    b = run_scenario(spec, data_root, tmp_path / "cache")  # cached
    c = run_scenario(spec, data_root, None)  # retrained
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert ScenarioReport.from_dict(json.loads(json.dumps(a.to_dict()))).to_dict() == a.to_dict()


def test_corrupt_cache_is_reported(data_root, tmp_path):
    spec = ScenarioSpec.from_dict(spec_dict())
    run_scenario(spec, data_root, tmp_path)
    (cached,) = tmp_path.iterdir()
    cached.write_text("{not json")
    with pytest.raises(CacheError):
        run_scenario(spec, data_root, tmp_path)


def test_run_scenarios_isolates_failures(data_root):
    good = ScenarioSpec.from_dict(spec_dict())
    bad = ScenarioSpec.from_dict(spec_dict(label="missing", test_target={"file": "nope.csv", "source_id": "Z"}))
    out = run_scenarios([bad, good], data_root, workers=1)
    assert isinstance(out[0], ScenarioError)
    assert isinstance(out[1], ScenarioReport)


def test_parallel_matches_serial(data_root):
    specs = [
        ScenarioSpec.from_dict(spec_dict()),
        ScenarioSpec.from_dict(spec_dict(name="cross_site", label="A->B", test_target={"file": "B.csv", "source_id": "B"})),
    ]
    serial = run_scenarios(specs, data_root, workers=1)
    parallel = run_scenarios(specs, data_root, workers=2)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]


def _report(train_id, test_id, mae_value, rows):
    spec = {"train_source": {"source_id": train_id}, "test_target": {"source_id": test_id}}
    return ScenarioReport(spec, [Metrics.from_counts(t, n, s) for t, n, s in rows], mae_value, {})


def test_render_same_site_table():
    r = _report("A", "A", 0.2635, [(0.5, 52535, 6810), (1.0, 52535, 1275)])
    md = render_table([r])
    assert md.splitlines()[0].startswith("| Location | MAE | Total (0.5°C)")
    assert "| A | 0.264 | 52535 | 45725 | 6810 | 87.04 | 52535 | 51260 | 1275 | 97.57 |" in md
    text = render_table([r], "csv")
    assert text.splitlines()[1] == "A,0.264,52535,45725,6810,87.04,52535,51260,1275,97.57"


def test_render_cross_site_and_formats_agree():
    rs = [_report("A", "B", 0.291, [(0.5, 52535, 6881)]), _report("A", "C", 0.292, [(0.5, 52535, 8602)])]
    md = render_table(rs, "markdown")
    rows = list(csv.reader(render_table(rs, "csv").splitlines()))
    assert rows[0][:3] == ["Source", "Target", "MAE"]
    md_rows = [[c.strip() for c in line.strip("|").split("|")] for line in md.splitlines()[2:]]
    assert md_rows == rows[1:]
    with pytest.raises(ValueError):
        render_table(rs, "html")
    with pytest.raises(ValueError):
        render_table([])
