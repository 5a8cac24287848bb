import json
import math

import pytest

from rdtune.encoder_bridge import EncodeJob, SyntheticClipModel, SyntheticEncoder
from rdtune.errors import SweepError
from rdtune.lambda_model import CodecId, FrameTypeGroup, LambdaScope
from rdtune.rd_curve import bd_quality, bd_rate, matched_qp_savings, mean_matched_savings, mean_vmaf_delta
from rdtune.sweep import (
    DEFAULT_OPTIMIZER,
    InvocationBudget,
    OptimizationResult,
    PointCache,
    RunLedger,
    SweepConfig,
    cache_key,
    curves_from_ledger,
    evaluate_cost,
    load_result,
    optimize_clip,
    predict_budget,
    run_sweep,
    save_result,
)

import oracles


def av1_config(**kwargs):
    kwargs.setdefault("codec", CodecId.AV1)
    kwargs.setdefault("group", FrameTypeGroup.KF_GF_ARF)
    return SweepConfig(**kwargs)


def synthetic_backend(clip_id="clip", **model_kwargs):
    return SyntheticEncoder(SyntheticClipModel(**model_kwargs), clip_id)


class FlakyBackend(SyntheticEncoder):
    """Fails the first `failures` calls matching (qp, k) predicate."""

    def __init__(self, model, clip_id, fail_qp, fail_k=None, failures=1):
        super().__init__(model, clip_id)
        self.fail_qp = fail_qp
        self.fail_k = fail_k
        self.remaining_failures = failures

    def measure(self, job: EncodeJob):
        if (
            self.remaining_failures > 0
            and job.qp == self.fail_qp
            and (self.fail_k is None or abs(job.k - self.fail_k) < 1e-9)
        ):
            self.remaining_failures -= 1
            raise SweepError("injected encode failure")
        return super().measure(job)


class TestSweepConfig:
    def test_default_ladders(self):
        assert SweepConfig(codec=CodecId.AV1).qp_ladder == (27, 39, 49, 59, 63)
        assert SweepConfig(codec=CodecId.HEVC).qp_ladder == (22, 27, 32, 37, 42)

    def test_rd2_operating_point(self):
        assert SweepConfig(codec=CodecId.AV1).rd2_qp == 39
        assert SweepConfig(codec=CodecId.HEVC).rd2_qp == 27

    def test_custom_ladder(self):
        assert SweepConfig(codec=CodecId.AV1, qp_ladder=(10, 20, 30)).qp_ladder == (10, 20, 30)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(qp_ladder=(39, 27)),
            dict(qp_ladder=(27, 27, 39)),
            dict(qp_ladder=(27, 99)),
            dict(qp_ladder=()),
            dict(workers=0),
            dict(group=FrameTypeGroup.I_FRAMES),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SweepConfig(codec=CodecId.AV1, **kwargs)


class TestCacheKey:
    def job(self, **kw):
        base = dict(
            clip_id="c", codec=CodecId.AV1, qp=39, k=1.0,
            group=FrameTypeGroup.KF_GF_ARF, scope=LambdaScope.TOP,
        )
        base.update(kw)
        return EncodeJob(**base)

    def test_stable(self):
        assert cache_key(self.job(), "t", "c") == cache_key(self.job(), "t", "c")

    @pytest.mark.parametrize(
        "change",
        [
            dict(k=1.5),
            dict(qp=49),
            dict(scope=LambdaScope.PARTITION),
            dict(group=FrameTypeGroup.KF),
            dict(codec=CodecId.HEVC, qp=39, group=FrameTypeGroup.ALL_FRAMES),
        ],
    )
    def test_field_changes_key(self, change):
        assert cache_key(self.job(), "t", "c") != cache_key(self.job(**change), "t", "c")

    def test_digests_change_key(self):
        assert cache_key(self.job(), "t1", "c") != cache_key(self.job(), "t2", "c")
        assert cache_key(self.job(), "t", "c1") != cache_key(self.job(), "t", "c2")

    def test_k_quantization(self):
        assert cache_key(self.job(k=1.0), "t", "c") == cache_key(self.job(k=1.0 + 4e-7), "t", "c")
        assert cache_key(self.job(k=1.0), "t", "c") != cache_key(self.job(k=1.000002), "t", "c")


class TestPointCache:
    def test_memory_roundtrip(self):
        from rdtune.rd_curve import RDPoint

        cache = PointCache(None)
        point = RDPoint.from_score(qp=39, bitrate_kbps=100.0, msssim=0.9)
        assert cache.get("k1") is None
        cache.put("k1", point)
        assert cache.get("k1") == point

    def test_disk_persistence(self, tmp_path):
        from rdtune.rd_curve import RDPoint

        point = RDPoint.from_score(qp=39, bitrate_kbps=100.0, msssim=0.9, vmaf=80.0)
        PointCache(tmp_path).put("k1", point)
        assert PointCache(tmp_path).get("k1") == point


class TestRunSweep:
    def test_cold_sweep_invokes_n(self, tmp_path):
        backend = synthetic_backend()
        config = av1_config(cache_dir=tmp_path)
        curve = run_sweep("clip", 1.0, config, backend)
        assert backend.invocations == 5
        assert sorted(curve.qps) == [27, 39, 49, 59, 63]

    def test_warm_sweep_invokes_zero(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        first = run_sweep("clip", 1.0, config, synthetic_backend())
        warm_backend = synthetic_backend()
        second = run_sweep("clip", 1.0, config, warm_backend)
        assert warm_backend.invocations == 0
        assert second == first

    def test_partial_cache_runs_remainder(self, tmp_path):
        config = av1_config(cache_dir=tmp_path, qp_ladder=(27, 39, 49))
        run_sweep("clip", 1.0, config, synthetic_backend())
        wider = av1_config(cache_dir=tmp_path, qp_ladder=(27, 39, 49, 59, 63))
        backend = synthetic_backend()
        run_sweep("clip", 1.0, wider, backend)
        assert backend.invocations == 2

    def test_ledger_records_every_encode(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        run_sweep("clip", 1.0, config, synthetic_backend())
        run_sweep("clip", 1.0, config, synthetic_backend())
        records = RunLedger.load(tmp_path / "ledger.jsonl")
        assert len(records) == 10
        assert [r["cached"] for r in records].count(False) == 5
        assert [r["cached"] for r in records].count(True) == 5
        sample = records[0]
        for field in (
            "timestamp", "cache_key", "clip", "codec", "qp", "k", "group", "scope",
            "bitrate_kbps", "msssim", "msssim_db", "vmaf", "invocation_seconds", "cached",
        ):
            assert field in sample

    def test_failure_names_job_and_keeps_partials(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        backend = FlakyBackend(SyntheticClipModel(), "clip", fail_qp=49, failures=1)
        with pytest.raises(SweepError, match=r"qp=49, k=1\.3"):
            run_sweep("clip", 1.3, config, backend)
        # Partials are cached: the retry only dispatches the failed point.
        retry_backend = synthetic_backend()
        run_sweep("clip", 1.3, config, retry_backend)
        assert retry_backend.invocations == 1

    def test_single_worker_equivalent(self, tmp_path):
        a = run_sweep("clip", 1.5, av1_config(cache_dir=tmp_path / "a", workers=1), synthetic_backend())
        b = run_sweep("clip", 1.5, av1_config(cache_dir=tmp_path / "b", workers=5), synthetic_backend())
        assert a == b


class TestEvaluateCost:
    @pytest.fixture
    def setup(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        backend = synthetic_backend()
        reference = run_sweep("clip", 1.0, config, backend)
        return config, backend, reference

    def test_k1_short_circuits(self, setup):
        config, backend, reference = setup
        before = backend.invocations
        trial = evaluate_cost("clip", 1.0, reference, config, backend)
        assert trial.cost == 0.0
        assert trial.encoder_invocations == 0
        assert backend.invocations == before

    def test_cost_at_k_star_matches_oracle(self, setup):
        config, backend, reference = setup
        trial = evaluate_cost("clip", 2.5, reference, config, backend)
        assert trial.cost == pytest.approx(oracles.COST_AT_KSTAR, abs=1e-3)
        assert trial.encoder_invocations == 5

    def test_overscaling_costs_more(self, setup):
        config, backend, reference = setup
        at_star = evaluate_cost("clip", 2.5, reference, config, backend)
        at_16 = evaluate_cost("clip", 16.0, reference, config, backend)
        assert at_16.cost > at_star.cost
        assert at_16.cost > 0.0

    def test_warm_trial_reports_zero_invocations(self, setup):
        config, backend, reference = setup
        evaluate_cost("clip", 2.5, reference, config, backend)
        warm = evaluate_cost("clip", 2.5, reference, config, backend)
        assert warm.encoder_invocations == 0
        assert warm.cost == pytest.approx(oracles.COST_AT_KSTAR, abs=1e-3)


class TestOptimizeClip:
    def test_default_model_matches_grid_oracle(self, tmp_path):
        backend = synthetic_backend()
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), backend)
        assert abs(result.k_hat - oracles.GRID_ARGMIN_K) <= 0.15
        assert result.bd_rate < 0.0
        assert result.improved
        assert result.iterations <= 25
        fresh_trials = [t for t in result.trials if t.encoder_invocations > 0]
        assert result.total_invocations == 5 * len(fresh_trials)
        assert backend.invocations == result.total_invocations + 5  # + reference sweep

    def test_bd_rate_is_min_over_trials(self, tmp_path):
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), synthetic_backend())
        costs = [t.cost for t in result.trials] + [0.0]
        assert result.bd_rate == min(costs)
        assert result.bd_rate <= 0.0

    def test_calibrated_default_stays_at_one(self, tmp_path):
        # Sharp quality curvature plus fast rate decay puts the cost argmin
        # within the optimizer tolerance of k=1.
        backend = synthetic_backend(b=0.6, c=10.0, k_star=1.0)
        config = SweepConfig(
            codec=CodecId.HEVC, group=FrameTypeGroup.I_FRAMES, cache_dir=tmp_path
        )
        result = optimize_clip("clip", config, backend)
        assert abs(result.k_hat - 1.0) <= DEFAULT_OPTIMIZER.xtol
        assert abs(result.bd_rate) < 0.5

    def test_table_fields_recomputable(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        result = optimize_clip("clip", config, synthetic_backend())
        best = min(result.trials, key=lambda t: t.cost)
        reference = result.reference_curve
        assert result.rd2_savings == matched_qp_savings(reference, best.curve, 39)
        assert result.mean_savings == mean_matched_savings(reference, best.curve)
        assert result.msssim_change_db == bd_quality(reference, best.curve)
        assert result.vmaf_change == mean_vmaf_delta(reference, best.curve)

    def test_persistent_failure_degenerates_to_one(self, tmp_path):
        backend = FlakyBackend(SyntheticClipModel(), "clip", fail_qp=49, fail_k=None, failures=10_000)
        # The k=1 reference itself must succeed; fail only k != 1 jobs.
        class FailNonReference(FlakyBackend):
            def measure(self, job):
                if abs(job.k - 1.0) > 1e-9 and job.qp == 49:
                    raise SweepError("injected persistent failure")
                return SyntheticEncoder.measure(self, job)

        backend = FailNonReference(SyntheticClipModel(), "clip", fail_qp=49)
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), backend)
        assert result.k_hat == 1.0
        assert result.bd_rate == 0.0
        assert not result.improved

    def test_transient_reference_failure_recovers(self, tmp_path):
        # First failure lands in the k=1 reference sweep; the retry only
        # re-dispatches the failed point.
        backend = FlakyBackend(SyntheticClipModel(), "clip", fail_qp=49, failures=1)
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), backend)
        assert result.improved
        assert abs(result.k_hat - oracles.GRID_ARGMIN_K) <= 0.15

    def test_transient_trial_failure_recovers(self, tmp_path):
        class FailFirstTrial(SyntheticEncoder):
            def __init__(self, model, clip_id):
                super().__init__(model, clip_id)
                self.failed_once = False

            def measure(self, job):
                if not self.failed_once and abs(job.k - 1.0) > 1e-9 and job.qp == 59:
                    self.failed_once = True
                    raise SweepError("injected trial failure")
                return super().measure(job)

        backend = FailFirstTrial(SyntheticClipModel(), "clip")
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), backend)
        assert backend.failed_once
        assert result.improved
        assert abs(result.k_hat - oracles.GRID_ARGMIN_K) <= 0.15

    def test_warm_rerun_identical_but_free(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        cold = optimize_clip("clip", config, synthetic_backend())
        warm_backend = synthetic_backend()
        warm = optimize_clip("clip", config, warm_backend)
        assert warm_backend.invocations == 0
        assert warm.total_invocations == 0
        assert warm.k_hat == cold.k_hat
        assert warm.bd_rate == cold.bd_rate
        assert warm.iterations == cold.iterations

    def test_result_json_roundtrip(self, tmp_path):
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), synthetic_backend())
        path = tmp_path / "result.json"
        save_result(result, path)
        assert load_result(path) == result


class TestBudget:
    def test_reference_accounting(self):
        assert predict_budget(InvocationBudget(p=9, n=5, m=1)) == 45

    def test_arithmetic(self):
        assert predict_budget(InvocationBudget(p=10, n=5, m=10)) == 500
        assert predict_budget(InvocationBudget(p=1, n=1, m=1)) == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            InvocationBudget(p=0, n=5, m=1)

    def test_cold_run_matches_budget(self, tmp_path):
        backend = synthetic_backend()
        result = optimize_clip("clip", av1_config(cache_dir=tmp_path), backend)
        predicted = predict_budget(InvocationBudget(p=result.iterations, n=5, m=1))
        assert result.total_invocations == predicted


class TestLedgerReplay:
    def test_replay_reproduces_result_fields(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        result = optimize_clip("clip", config, synthetic_backend())

        records = RunLedger.load(tmp_path / "ledger.jsonl")
        curves = {c.k: c for c in curves_from_ledger(records)}
        reference = curves.pop(1.0)
        assert reference == result.reference_curve

        costs = {k: bd_rate(reference, c) for k, c in curves.items()}
        best_k = min(costs, key=lambda k: (costs[k], abs(math.log(k))))
        assert costs[best_k] <= 0.0
        assert best_k == result.k_hat
        assert costs[best_k] == result.bd_rate
        best = curves[best_k]
        assert matched_qp_savings(reference, best, config.rd2_qp) == result.rd2_savings
        assert mean_matched_savings(reference, best) == result.mean_savings
        assert bd_quality(reference, best) == result.msssim_change_db
        assert mean_vmaf_delta(reference, best) == result.vmaf_change

        fresh_ks = {r["k"] for r in records if not r["cached"] and r["k"] != 1.0}
        trial_ks = {r["k"] for r in records if r["k"] != 1.0}
        assert result.iterations == len(trial_ks)
        assert result.total_invocations == 5 * len(fresh_ks)

    def test_dedupe_last_record_wins(self, tmp_path):
        config = av1_config(cache_dir=tmp_path)
        run_sweep("clip", 1.0, config, synthetic_backend())
        run_sweep("clip", 1.0, config, synthetic_backend())  # cache hits, duplicates
        records = RunLedger.load(tmp_path / "ledger.jsonl")
        curves = curves_from_ledger(records)
        assert len(curves) == 1
        assert len(curves[0].points) == 5
