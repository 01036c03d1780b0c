"""Evolution loop: budget accounting, determinism, attribution, outputs."""

import json
import math

import numpy as np
import pytest

from ascii_me.scheduler import IterationReport, RunConfig, run


@pytest.fixture(scope="module")
def centroid_cache(tmp_path_factory):
    return str(tmp_path_factory.mktemp("centroid-cache"))


def tiny_config(centroid_cache, **overrides):
    base = dict(
        env_name="gait_uni",
        env_kwargs={"horizon": 12},
        seed=1,
        total_evaluations=80,
        batch_size=16,
        ga_fraction=0.5,
        centroid_count=16,
        centroid_seed=0,
        hidden_layers=(6,),
        buffer_capacity=12 * 64,
        mutation_chunk=4,
        eval_chunk=8,
        centroid_cache_dir=centroid_cache,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestBudget:
    def test_exact_when_divisible(self, centroid_cache):
        res = run(tiny_config(centroid_cache))
        assert res.evaluations == 80
        assert [r.evaluations for r in res.reports] == [16, 32, 48, 64, 80]
        assert [r.iteration for r in res.reports] == [0, 1, 2, 3, 4]

    def test_partial_last_batch(self, centroid_cache):
        res = run(tiny_config(centroid_cache, total_evaluations=75))
        assert res.evaluations == 75
        assert [r.evaluations for r in res.reports] == [16, 32, 48, 64, 75]
        assert res.reports[-1].batch == 11

    def test_report_count_formula(self, centroid_cache):
        for n in (16, 17, 80, 75):
            res = run(tiny_config(centroid_cache, total_evaluations=n))
            want = 1 + math.ceil((n - 16) / 16)
            assert len(res.reports) == want


class TestDeterminism:
    def test_same_seed_same_run(self, centroid_cache):
        a = run(tiny_config(centroid_cache))
        b = run(tiny_config(centroid_cache))
        assert np.array_equal(a.archive.genotypes, b.archive.genotypes)
        assert np.array_equal(a.archive.fitness, b.archive.fitness)
        assert [r.qd_score for r in a.reports] == [r.qd_score for r in b.reports]

    def test_different_seed_differs(self, centroid_cache):
        a = run(tiny_config(centroid_cache))
        b = run(tiny_config(centroid_cache, seed=2))
        assert not np.array_equal(a.archive.fitness, b.archive.fitness)

    def test_worker_count_invariant(self, centroid_cache):
        a = run(tiny_config(centroid_cache, workers=1))
        b = run(tiny_config(centroid_cache, workers=2))
        assert np.array_equal(a.archive.genotypes, b.archive.genotypes)
        assert np.array_equal(a.archive.fitness, b.archive.fitness)
        assert np.array_equal(a.archive.occupied, b.archive.occupied)

    def test_centroids_shared_across_seeds(self, centroid_cache):
        a = run(tiny_config(centroid_cache))
        b = run(tiny_config(centroid_cache, seed=5))
        assert np.array_equal(a.archive.centroids, b.archive.centroids)


class TestAttribution:
    def test_every_evaluation_accounted(self, centroid_cache):
        res = run(tiny_config(centroid_cache))
        counted = sum(sum(v.values()) for v in res.archive.counters.values())
        invalid = sum(r.invalid for r in res.reports)
        assert counted + invalid == res.evaluations

    def test_sources(self, centroid_cache):
        res = run(tiny_config(centroid_cache))
        assert set(res.archive.counters) == {"init", "isoline", "ascii"}
        per_iter = {}
        for r in res.reports:
            for source, tally in r.additions.items():
                bucket = per_iter.setdefault(
                    source, {"new": 0, "improved": 0, "rejected": 0})
                for key, value in tally.items():
                    bucket[key] += value
        assert per_iter == res.archive.counters

    def test_pure_isoline(self, centroid_cache):
        res = run(tiny_config(centroid_cache, ga_fraction=1.0))
        assert "ascii" not in res.archive.counters
        assert "isoline" in res.archive.counters

    def test_pure_ascii(self, centroid_cache):
        res = run(tiny_config(centroid_cache, ga_fraction=0.0))
        assert "isoline" not in res.archive.counters
        assert "ascii" in res.archive.counters

    def test_archive_sourced_targets(self, centroid_cache):
        res = run(tiny_config(centroid_cache, target_source="archive"))
        assert res.evaluations == 80
        assert "ascii" in res.archive.counters


class TestProgress:
    def test_qd_score_never_decreases(self, centroid_cache):
        res = run(tiny_config(centroid_cache, total_evaluations=160))
        scores = [r.qd_score for r in res.reports]
        assert all(b >= a for a, b in zip(scores, scores[1:]))
        assert scores[-1] > 0

    def test_coverage_grows_from_init(self, centroid_cache):
        res = run(tiny_config(centroid_cache, total_evaluations=160))
        assert res.reports[-1].coverage >= res.reports[0].coverage > 0


class TestOutputs:
    def test_run_directory_contents(self, centroid_cache, tmp_path):
        out = tmp_path / "runs" / "demo"
        res = run(tiny_config(centroid_cache), output_dir=out)
        assert (out / "config.json").exists()
        assert (out / "reports.jsonl").exists()
        assert (out / "final.json").exists()
        assert (out / "archive.npz").exists()
        assert (out / "archive.json").exists()

        lines = (out / "reports.jsonl").read_text().strip().splitlines()
        assert len(lines) == len(res.reports)
        first = json.loads(lines[0])
        assert first["iteration"] == 0
        assert first["evaluations"] == 16

        final = json.loads((out / "final.json").read_text())
        assert final["evaluations"] == 80
        assert final["qd_score"] == pytest.approx(res.reports[-1].qd_score)

        cfg = RunConfig.from_dict(
            json.loads((out / "config.json").read_text()))
        assert cfg == tiny_config(centroid_cache)

    def test_config_roundtrip(self, centroid_cache):
        cfg = tiny_config(centroid_cache, ga_fraction=0.25, workers=2)
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_from_dict_rejects_unknown_keys(self, centroid_cache):
        data = tiny_config(centroid_cache).to_dict()
        data["typo_field"] = 3
        with pytest.raises(ValueError):
            RunConfig.from_dict(data)


class TestValidation:
    def test_bad_values(self, centroid_cache):
        good = tiny_config(centroid_cache).to_dict()

        def build(**kwargs):
            data = dict(good, **kwargs)
            data["isoline"] = None
            data["ascii"] = None
            data.pop("isoline")
            data.pop("ascii")
            return RunConfig(**data)

        with pytest.raises(ValueError):
            build(ga_fraction=1.5)
        with pytest.raises(ValueError):
            build(total_evaluations=8)  # smaller than one batch
        with pytest.raises(ValueError):
            build(env_name="lunar_lander")
        with pytest.raises(ValueError):
            build(target_source="oracle")
        with pytest.raises(ValueError):
            build(dtype="float16")
        with pytest.raises(ValueError):
            build(workers=0)

    def test_float32_mode(self, centroid_cache):
        res = run(tiny_config(centroid_cache, dtype="float32"))
        assert res.archive.genotypes.dtype == np.float32
        assert res.evaluations == 80


class TestReportShape:
    def test_fields(self, centroid_cache):
        res = run(tiny_config(centroid_cache))
        r = res.reports[1]
        assert isinstance(r, IterationReport)
        assert r.batch == 16
        assert 0 <= r.coverage <= 1
        assert r.buffer_size > 0
        assert r.seconds >= 0
        assert r.invalid == 0
        assert r.aborted >= 0
