#!/usr/bin/env python3
"""
Tests for the experiment harness: run configuration, metrics, splits,
training, adaptation and evaluation, checkpoints, ablation statistics,
convergence experiments, the gradient suite and output handling.
"""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from common.exceptions import (
    ConfigError,
    FormatError,
    InvalidInputError,
    MissingFileError,
    OutputLockedError,
    TrainingDivergedError,
)
from layers.base import Mode
from models.batch import EpochBatch
from models.config import NormSection
from models.factory import ModelFactory
from optim.riemannian_adam import RiemannianAdam
from src.ablation import ablation_run, paired_t, sign_flip_tmax
from src.checkpoint import CHECKPOINT_MAGIC, encode_checkpoint, load_checkpoint, save_checkpoint
from src.convergence import (
    ConvergenceConfig,
    convergence_experiment,
    run_fixed_momentum_experiment,
    run_decaying_momentum_experiment,
    step_bound,
)
from src.evaluation import adapt_and_eval, cross_validate, evaluate_domain
from src.gradcheck import GradCheckReport, GradCheckRow, run_gradcheck
from src.metrics import confusion_matrix, per_class_recall, score_balanced_accuracy
from src.run_config import load_run_config, parse_run_config
from src.splits import SplitPlan, leave_domains_out_folds, make_split_plan, stratified_split
from src.trainer import Trainer
from synthdata.dataset import DomainData
from utils.hashing import canonical_json, config_hash
from utils.output_dir import locked_output_dir, prepare_output_dir, write_json


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def fresh_model(dataset, run_config, arm="spddsmbn", seed=0):
    net = run_config.model.net.for_data(dataset.channels, dataset.time, dataset.classes)
    return ModelFactory.create_model(arm, net, run_config.model.norm, seed)


def train_tiny(dataset, run_config, arm="spddsmbn", protocol=None):
    model = fresh_model(dataset, run_config, arm)
    plan = make_split_plan(dataset, run_config.seed, run_config.protocol.validation_fraction)
    trainer = Trainer(model, protocol or run_config.protocol, run_config.seed, run_config.hash)
    return trainer.train(dataset, plan)


def small_experiment(**overrides):
    values = {"dim": 3, "steps": 50, "seeds": 2, "dataset_size": 100, "replicates": 4, "replicate_steps": 10}
    values.update(overrides)
    return ConvergenceConfig(**values)


class TestRunConfig:
    def test_defaults(self):
        run_config = parse_run_config({"seed": 3})
        assert run_config.protocol.epochs == 50
        assert run_config.protocol.lr == 1e-3
        assert run_config.protocol.weight_decay == 1e-4
        assert run_config.model.norm.gamma_test == 0.1
        assert run_config.model.arm == "spddsmbn"

    def test_unknown_key_names_the_field(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_run_config({"seed": 0, "protocol": {"epoch": 3}})
        assert excinfo.value.field == "protocol.epoch"

    def test_missing_seed(self):
        with pytest.raises(ConfigError):
            parse_run_config({})

    def test_invalid_betas(self):
        with pytest.raises(ConfigError):
            parse_run_config({"seed": 0, "protocol": {"betas": [0.9, 1.0]}})

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            parse_run_config([1, 2])

    def test_hash_ignores_key_order(self, tiny_run_dict):
        reordered = dict(reversed(list(tiny_run_dict.items())))
        assert parse_run_config(tiny_run_dict).hash == parse_run_config(reordered).hash

    def test_seed_override_changes_hash(self, tiny_run_dict):
        base = parse_run_config(tiny_run_dict)
        overridden = parse_run_config(tiny_run_dict, seed_override=9)
        assert overridden.seed == 9
        assert overridden.hash != base.hash
        assert len(base.hash) == 16

    def test_load_without_path_uses_defaults(self):
        assert load_run_config(None).seed == 0

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_run_config(str(tmp_path / "absent.json"))

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{seed: 0")
        with pytest.raises(FormatError):
            load_run_config(str(path))

    @pytest.mark.parametrize("name", ["default.json", "tiny.json"])
    def test_shipped_configs_validate(self, name):
        run_config = load_run_config(str(CONFIG_DIR / name))
        assert run_config.model.arm == "spddsmbn"


class TestHashingAndOutput:
    def test_canonical_json_sorts_and_compacts(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_config_hash_is_key_order_invariant(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert len(config_hash({})) == 16

    def test_lock_held_during_body(self, tmp_path):
        lock = tmp_path / ".spddsmbn.lock"
        with locked_output_dir(str(tmp_path)):
            assert lock.exists()
        assert not lock.exists()

    def test_second_writer_rejected(self, tmp_path):
        with locked_output_dir(str(tmp_path)):
            with pytest.raises(OutputLockedError):
                with locked_output_dir(str(tmp_path)):
                    pass

    def test_lock_released_on_error(self, tmp_path):
        with pytest.raises(RuntimeError):
            with locked_output_dir(str(tmp_path)):
                raise RuntimeError("boom")
        assert not (tmp_path / ".spddsmbn.lock").exists()

    def test_default_output_root_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPDDSMBN_OUTPUT_DIR", str(tmp_path))
        path = prepare_output_dir(None, "train")
        assert path == str(tmp_path / "train")
        assert os.path.isdir(path)

    def test_write_json_is_sorted(self, tmp_path):
        path = tmp_path / "out.json"
        write_json(str(path), {"b": 1, "a": 2})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")
        assert not (tmp_path / "out.json.tmp").exists()


class TestMetrics:
    def test_balanced_accuracy(self):
        assert score_balanced_accuracy([0, 0, 1, 1, 1], [0, 0, 0, 1, 1]) == pytest.approx(5.0 / 6.0)

    def test_chance_on_constant_predictions(self):
        assert score_balanced_accuracy([1, 1, 1, 1], [0, 1, 0, 1]) == 0.5

    def test_only_present_classes_count(self):
        assert per_class_recall([0, 1, 0], [0, 0, 0]) == pytest.approx({0: 2.0 / 3.0})

    def test_consistent_relabeling_keeps_score(self, rng):
        labels = rng.integers(0, 3, 40)
        predictions = np.where(rng.random(40) < 0.6, labels, rng.integers(0, 3, 40))
        relabel = np.array([2, 0, 1])
        assert score_balanced_accuracy(relabel[predictions], relabel[labels]) == \
            pytest.approx(score_balanced_accuracy(predictions, labels))

    def test_confusion_matrix(self):
        matrix = confusion_matrix([0, 1, 1, 2], [0, 1, 2, 2], classes=3)
        assert matrix.tolist() == [[1, 0, 0], [0, 1, 0], [0, 1, 1]]

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            score_balanced_accuracy([0, 1], [0])

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            score_balanced_accuracy([], [])


class TestSplits:
    def test_stratified_split(self, rng):
        labels = np.arange(20) % 2
        train, val = stratified_split(labels, 0.2, rng)
        assert np.bincount(labels[val]).tolist() == [2, 2]
        assert sorted(np.concatenate([train, val]).tolist()) == list(range(20))

    def test_plan_is_disjoint_and_deterministic(self, tiny_dataset):
        plan = make_split_plan(tiny_dataset, seed=3)
        again = make_split_plan(tiny_dataset, seed=3)
        assert plan.source_ids == [0, 1, 2]
        assert plan.target_ids == [3, 4]
        for d in plan.source_ids:
            assert not set(plan.train_index[d]) & set(plan.val_index[d])
            np.testing.assert_array_equal(plan.val_index[d], again.val_index[d])
        assert plan.validation_trials == 12

    def test_overlapping_domains_rejected(self):
        with pytest.raises(InvalidInputError):
            SplitPlan([0, 1], [1, 2])

    def test_folds_partition_domains(self):
        folds = leave_domains_out_folds(range(10), seed=0, fraction=0.25)
        assert [len(f) for f in folds] == [3, 3, 3, 1]
        assert sorted(d for f in folds for d in f) == list(range(10))

    def test_small_fraction_holds_out_one_domain(self):
        assert all(len(f) == 1 for f in leave_domains_out_folds(range(6), seed=1))

    def test_folds_need_two_domains(self):
        with pytest.raises(InvalidInputError):
            leave_domains_out_folds([4], seed=0)


class TestTrainer:
    def test_log_and_selected_snapshot(self, tiny_dataset, tiny_run_config):
        result = train_tiny(tiny_dataset, tiny_run_config)
        log = result.log
        assert len(log.epochs) == 2
        assert log.epochs[0].gamma_train == pytest.approx(1.0)
        assert log.epochs[0].batches == 3
        assert log.best_epoch in (-1, 0, 1)
        assert log.initial_val_loss is not None
        for name, value in result.model.state_dict()["params"].items():
            np.testing.assert_array_equal(value, result.best_state["model"]["params"][name])

    def test_selection_minimizes_validation_loss(self, tiny_dataset, tiny_run_config):
        log = train_tiny(tiny_dataset, tiny_run_config).log
        candidates = [log.initial_val_loss] + [r.val_loss for r in log.epochs]
        assert log.best_val_loss == min(candidates)

    def test_reeig_never_clamps_during_training(self, tiny_dataset, tiny_run_config):
        log = train_tiny(tiny_dataset, tiny_run_config).log
        assert all(record.reeig_evaluated > 0 for record in log.epochs)
        assert log.reeig_activations == 0

    def test_training_is_deterministic(self, tiny_dataset, tiny_run_config):
        first = train_tiny(tiny_dataset, tiny_run_config).log
        second = train_tiny(tiny_dataset, tiny_run_config).log
        assert first.model_dump() == second.model_dump()

    def test_zero_epochs_keeps_initial_model(self, tiny_dataset, tiny_run_config):
        protocol = tiny_run_config.protocol.model_copy(update={"epochs": 0})
        log = train_tiny(tiny_dataset, tiny_run_config, protocol=protocol).log
        assert log.best_epoch == -1
        assert log.epochs == []

    def test_without_validation_selects_on_training_loss(self, tiny_dataset, tiny_run_config):
        protocol = tiny_run_config.protocol.model_copy(update={"validation_fraction": 0.0})
        model = fresh_model(tiny_dataset, tiny_run_config)
        plan = make_split_plan(tiny_dataset, 0, 0.0)
        log = Trainer(model, protocol, 0).train(tiny_dataset, plan).log
        assert log.initial_val_loss is None
        assert log.best_epoch >= 0
        assert all(r.val_loss is None for r in log.epochs)

    def test_domains_per_batch_clamped(self, tiny_dataset, tiny_run_config):
        protocol = tiny_run_config.protocol.model_copy(update={"domains_per_batch": 5, "epochs": 1})
        log = train_tiny(tiny_dataset, tiny_run_config, protocol=protocol).log
        assert log.epochs[0].batches == 3

    @pytest.mark.parametrize("arm", ["spdmbn_no_ds", "euclid_dsmbn"])
    def test_other_arms_train(self, tiny_dataset, tiny_run_config, arm):
        result = train_tiny(tiny_dataset, tiny_run_config, arm=arm)
        assert result.log.arm == arm
        assert all(np.isfinite(r.train_loss) for r in result.log.epochs)

    def test_non_finite_loss_raises_diverged(self, tiny_dataset, tiny_run_config, monkeypatch):
        model = fresh_model(tiny_dataset, tiny_run_config)
        original = model.forward

        def poisoned(batch, mode=Mode.EVAL):
            output = original(batch, mode)
            if Mode.parse(mode) == Mode.TRAIN:
                output.loss = float("nan")
            return output

        monkeypatch.setattr(model, "forward", poisoned)
        plan = make_split_plan(tiny_dataset, 0)
        with pytest.raises(TrainingDivergedError) as excinfo:
            Trainer(model, tiny_run_config.protocol, 0).train(tiny_dataset, plan)
        assert (excinfo.value.epoch, excinfo.value.batch_index) == (0, 0)
        assert excinfo.value.last_good_state is not None


class TestEvaluation:
    def test_untrained_model_scores_chance(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        report = adapt_and_eval(model, tiny_dataset, seed=0, config_hash="abc")
        assert [d.domain_id for d in report.domains] == [3, 4]
        for score in report.domains:
            # zero-initialized classifier: uniform probabilities, class 0 predicted
            assert score.balanced_accuracy == 0.5
            assert score.labels_read_after_prediction
            assert not score.identity_statistics
            assert sum(map(sum, score.confusion)) == score.trials == 16
        assert report.mean_balanced_accuracy == 0.5
        assert report.config_hash == "abc"

    def test_adaptation_registers_target_statistics(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        adapt_and_eval(model, tiny_dataset)
        assert set(model.normalization.known_domains) >= {3, 4}

    def test_no_adaptation_uses_identity_statistics(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        model.adapt_domain(3, tiny_dataset.domain(3).data)
        score = evaluate_domain(model, tiny_dataset, 3, adapt="none")
        assert score.identity_statistics
        assert 3 not in model.normalization.known_domains

    def test_incremental_adaptation(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        report = adapt_and_eval(model, tiny_dataset, adapt="incremental")
        assert report.adapt == "incremental"
        assert len(report.domains) == 2

    @pytest.mark.parametrize("adapt", ["full", "incremental"])
    def test_repeated_evaluation_gives_identical_reports(self, tiny_dataset, tiny_run_config, adapt):
        model = train_tiny(tiny_dataset, tiny_run_config).model
        first = adapt_and_eval(model, tiny_dataset, adapt=adapt, seed=1, config_hash="h")
        second = adapt_and_eval(model, tiny_dataset, adapt=adapt, seed=1, config_hash="h")
        assert first.model_dump() == second.model_dump()

    def test_unknown_adaptation_mode(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        with pytest.raises(InvalidInputError):
            evaluate_domain(model, tiny_dataset, 3, adapt="bogus")

    def test_single_trial_domain_is_skipped(self, tiny_dataset, tiny_run_config):
        domain = tiny_dataset.domain(4)
        tiny_dataset.domains[4] = DomainData(4, "target", domain.data[:1], domain.labels[:1])
        report = adapt_and_eval(fresh_model(tiny_dataset, tiny_run_config), tiny_dataset)
        assert [d.domain_id for d in report.domains] == [3]
        assert report.skipped[0].domain_id == 4

    def test_single_class_domain_is_flagged(self, tiny_dataset, tiny_run_config):
        domain = tiny_dataset.domain(4)
        tiny_dataset.domains[4] = DomainData(4, "target", domain.data, np.zeros_like(domain.labels))
        score = adapt_and_eval(fresh_model(tiny_dataset, tiny_run_config), tiny_dataset).score_of(4)
        assert score.single_class
        assert score.classes_present == [0]
        assert score.balanced_accuracy == 1.0

    def test_cross_validation_holds_out_every_source(self, tiny_dataset, tiny_run_config):
        report = cross_validate(tiny_dataset, tiny_run_config)
        assert sorted(fold.held_out[0] for fold in report.folds) == [0, 1, 2]
        assert report.mean_balanced_accuracy is not None


class TestCheckpoint:
    def prepared_model(self, dataset, run_config):
        model = fresh_model(dataset, run_config)
        selection = [(0, np.arange(4)), (1, np.arange(4))]
        batch = dataset.gather(selection)
        optimizer = RiemannianAdam(model.parameters().values(), lr=0.01)
        model.zero_grad()
        model.forward(batch, Mode.TRAIN)
        model.backward()
        optimizer.step()
        model.adapt_domain(3, dataset.domain(3).data)
        return model, optimizer

    def test_round_trip_restores_model_and_optimizer(self, tmp_path, tiny_dataset, tiny_run_config):
        model, optimizer = self.prepared_model(tiny_dataset, tiny_run_config)
        path = save_checkpoint(str(tmp_path / "model.spdc"), model, tiny_run_config.model.norm, 5, "hash",
                               optimizer, {"best_epoch": 1})
        checkpoint = load_checkpoint(path)

        assert (checkpoint.seed, checkpoint.config_hash) == (5, "hash")
        assert checkpoint.log_summary == {"best_epoch": 1}
        assert checkpoint.model.arm == "spddsmbn"
        for name, value in model.state_dict()["params"].items():
            np.testing.assert_array_equal(checkpoint.model.state_dict()["params"][name], value)
        assert checkpoint.model.normalization.known_domains == [0, 1, 3]

        data = tiny_dataset.domain(3).data
        domains = np.full(data.shape[0], 3)
        np.testing.assert_allclose(checkpoint.model.predict(data, domains).probabilities,
                                   model.predict(data, domains).probabilities, atol=1e-12)

        restored = checkpoint.restore_optimizer()
        assert restored.state.step == 1
        for name in model.parameters():
            np.testing.assert_array_equal(restored.state.exp_avg[name], optimizer.state.exp_avg[name])

    def test_header(self, tiny_dataset, tiny_run_config):
        model = fresh_model(tiny_dataset, tiny_run_config)
        blob = encode_checkpoint(model, NormSection(), 0)
        assert blob[:4] == CHECKPOINT_MAGIC
        length = int.from_bytes(blob[5:13], "little")
        manifest = json.loads(blob[13:13 + length])
        assert manifest["arm"] == "spddsmbn"
        assert manifest["optimizer"] is None
        assert list(manifest) == sorted(manifest)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.spdc"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(FormatError) as excinfo:
            load_checkpoint(str(path))
        assert excinfo.value.field == "magic"

    def test_unsupported_version(self, tmp_path, tiny_dataset, tiny_run_config):
        blob = bytearray(encode_checkpoint(fresh_model(tiny_dataset, tiny_run_config), NormSection(), 0))
        blob[4] = 7
        path = tmp_path / "future.spdc"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError) as excinfo:
            load_checkpoint(str(path))
        assert excinfo.value.field == "version"

    def test_truncated_file(self, tmp_path, tiny_dataset, tiny_run_config):
        blob = encode_checkpoint(fresh_model(tiny_dataset, tiny_run_config), NormSection(), 0)
        path = tmp_path / "short.spdc"
        path.write_bytes(blob[:-10])
        with pytest.raises(FormatError):
            load_checkpoint(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_checkpoint(str(tmp_path / "absent.spdc"))


class TestAblationStatistics:
    def test_paired_t(self):
        assert paired_t(np.array([1.0, 2.0, 3.0])) == pytest.approx(2.0 * np.sqrt(3.0))

    def test_paired_t_without_spread_is_zero(self):
        assert paired_t(np.array([2.0, 2.0, 2.0])) == 0.0

    def test_sign_flip_tmax(self):
        strong = np.array([3.0, 2.5, 4.0, 3.5, 2.0, 3.2, 2.8, 3.9])
        differences = np.stack([strong, np.zeros(8)])
        p_values = sign_flip_tmax(differences, permutations=999, seed=0)
        assert p_values[0] < 0.05
        assert p_values[1] == 1.0

    def test_sign_flip_is_seeded(self, rng):
        differences = rng.standard_normal((2, 5))
        np.testing.assert_array_equal(sign_flip_tmax(differences, 200, seed=4),
                                      sign_flip_tmax(differences, 200, seed=4))

    def test_ablation_adds_proposed_arm(self, tiny_dataset, tiny_run_dict):
        tiny_run_dict["ablation"]["permutation_test"] = True
        run_config = parse_run_config(tiny_run_dict)
        table = ablation_run(tiny_dataset, run_config, arms=["spdbn_ds"])
        assert [row.arm for row in table.rows] == ["spddsmbn", "spdbn_ds"]
        proposed = table.row("spddsmbn")
        assert proposed.delta_mean == 0.0
        assert proposed.p_value is None
        assert len(proposed.scores) == 1
        # a single seed has no spread, so the permutation test cannot reject
        assert table.row("spdbn_ds").p_value == 1.0
        assert table.permutations == 50

    def test_unknown_arm(self, tiny_dataset, tiny_run_config):
        with pytest.raises(ConfigError):
            ablation_run(tiny_dataset, tiny_run_config, arms=["batchnorm"])


class TestConvergence:
    def test_step_bound(self):
        assert step_bound(0.5) == pytest.approx(2.0)
        assert step_bound(0.1) == pytest.approx(0.99 / 0.81 - 1.0)
        assert step_bound(1.0) == float("inf")

    def test_decaying_momentum_run_and_trace(self, tmp_path):
        config = small_experiment()
        result = run_decaying_momentum_experiment(config, seed=0, out_dir=str(tmp_path))
        assert len(result.final_distances) == 2
        assert result.median_final_distance == pytest.approx(np.median(result.final_distances))
        assert result.passed == (result.median_final_distance < result.threshold)

        lines = (tmp_path / "trace_decaying_momentum.csv").read_text().splitlines()
        assert lines[0] == "step,gamma,median,q25,q75,run_0,run_1"
        assert len(lines) == 51
        assert lines[1].startswith("1,1,")

    def test_decaying_momentum_is_reproducible(self):
        config = small_experiment(steps=20)
        assert run_decaying_momentum_experiment(config, seed=3).final_distances == \
            run_decaying_momentum_experiment(config, seed=3).final_distances

    def test_fixed_momentum_run_and_trace(self, tmp_path):
        config = small_experiment()
        result = run_fixed_momentum_experiment(config, seed=0, out_dir=str(tmp_path))
        assert result.step_bound == pytest.approx(step_bound(0.1))
        assert result.step_norm == pytest.approx(0.5 * result.step_bound)
        assert result.mean_step_distance > 0
        assert result.passed == (result.p_value_increasing > result.significance)
        lines = (tmp_path / "trace_fixed_momentum.csv").read_text().splitlines()
        assert lines[0] == "step,variance,fitted"
        assert len(lines) == 11

    def test_kind_selects_experiments(self):
        report = convergence_experiment(small_experiment(kind="decaying", steps=10), seed=0, config_hash="h")
        assert report.decaying is not None
        assert report.fixed is None
        assert report.config_hash == "h"

    @pytest.mark.slow
    def test_decaying_momentum_reaches_population_mean(self):
        result = run_decaying_momentum_experiment(ConvergenceConfig(seeds=5), seed=0)
        assert result.passed

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_fixed_momentum_variance_does_not_grow(self, seed):
        result = run_fixed_momentum_experiment(ConvergenceConfig(), seed=seed)
        assert result.passed
        assert result.slope <= 0.0
        assert result.final_variance < result.initial_variance


class TestGradCheck:
    def test_suite_passes_on_tiny_network(self):
        report = run_gradcheck(seed=0, config_hash="h")
        names = [row.name for row in report.rows]
        assert "spdbn.spdmbn" in names
        assert "model.spddsmbn" in names
        assert "model.euclid_mbn_no_ds" in names
        assert report.failures() == {}
        assert report.passed

    def test_failures_listing(self):
        report = GradCheckReport(seed=0, rows=[GradCheckRow(name="a", max_relative_error=1e-3, tolerance=1e-5),
                                               GradCheckRow(name="b", max_relative_error=1e-8, tolerance=1e-5)])
        assert not report.passed
        assert report.failures() == {"a": 1e-3}


def test_epoch_batch_rejects_mismatched_domains():
    with pytest.raises(InvalidInputError):
        EpochBatch(np.zeros((3, 2, 4)), [0, 1])
