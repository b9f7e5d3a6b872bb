import dataclasses
import sys
from collections import Counter

import pytest

from passtune.autotuner import SearchBudget, TuneResult, autotune_corpus
from passtune.backend.classify import diagnostic_from_message
from passtune.backend.passlist import PassList
from passtune.backend.types import CompileOutcome, CompileTimeoutError
from passtune.dataset import render_answer
from passtune.ircore import NormalizedIr
from passtune.minigen import generate_function
from passtune.predictor import (
    BackupOutcome,
    ExternalPredictorError,
    FilePredictor,
    MissingPredictionError,
    Prediction,
    ProcessPredictor,
    RetrievalEntry,
    RetrievalIndex,
    build_frequency_table,
    jaccard_similarity,
    predict_always_oz,
    predict_external,
    predict_retrieval,
    predict_top_frequency,
    read_predictions,
    with_oz_backup,
    write_predictions,
)
from passtune.util import write_jsonl


@pytest.fixture(scope="module")
def tuned(backend, corpus20):
    budget = SearchBudget.evaluation_count(8)
    results, _ = autotune_corpus(backend, corpus20, budget, seed=7, max_len=3)
    return results


def result_for(tuned, fn_id):
    return next(r for r in tuned if r.function_id == fn_id)


# --- built-in predictors --------------------------------------------------


def test_always_oz(corpus20):
    prediction = predict_always_oz(corpus20[0])
    assert prediction.function_id == corpus20[0].id
    assert prediction.pass_list == "-Oz"
    assert prediction.items() == ("-Oz",)
    assert prediction.extra_compilations == 0


def test_frequency_table_counts_best_lists():
    results = [
        TuneResult("a", "-Oz", 9, "-Oz -mem2reg", 4, 3),
        TuneResult("b", "-Oz", 9, "-Oz -mem2reg", 5, 3),
        TuneResult("c", "-Oz", 9, "-dce", 6, 3),
    ]
    assert build_frequency_table(results) == {"-Oz -mem2reg": 2, "-dce": 1}


def test_top_frequency_breaks_ties_lexicographically(corpus20):
    table = {"-gvn": 2, "-dce": 2, "-Oz": 1}
    prediction = predict_top_frequency(corpus20[0], table)
    assert prediction.pass_list == "-dce"
    with pytest.raises(ValueError):
        predict_top_frequency(corpus20[0], {})


def test_jaccard_hand_values():
    assert jaccard_similarity(Counter("a a b".split()), Counter("a b b".split())) == 0.5
    assert jaccard_similarity(Counter(), Counter()) == 0.0
    tokens = Counter("x y z".split())
    assert jaccard_similarity(tokens, tokens) == 1.0
    assert jaccard_similarity(Counter("x".split()), Counter("y".split())) == 0.0


def test_retrieval_returns_own_list_for_indexed_function(corpus20, tuned):
    index = RetrievalIndex.build(corpus20, tuned)
    for fn in corpus20[:5]:
        prediction = predict_retrieval(fn, index)
        assert prediction.pass_list == result_for(tuned, fn.id).best_pass_list


def test_retrieval_tie_breaks_on_function_id(corpus20):
    tokens = Counter(corpus20[0].normalized_text.split())
    index = RetrievalIndex(
        [
            RetrievalEntry("zz", tokens, "-gvn"),
            RetrievalEntry("aa", tokens, "-dce"),
        ]
    )
    assert predict_retrieval(corpus20[0], index).pass_list == "-dce"


def test_retrieval_index_validates(corpus20, tuned):
    with pytest.raises(ValueError):
        RetrievalIndex([])
    stray = dataclasses.replace(tuned[0], function_id="nope")
    with pytest.raises(ValueError):
        RetrievalIndex.build(corpus20, [stray])


# --- file predictor ---------------------------------------------------------


def test_file_predictor_row_forms(tmp_path, vocab, corpus20):
    f0, f1, f2, f3 = corpus20[:4]
    answer = render_answer(("-mem2reg", "-dce"), 9, 4, "define i32 @f() {\nret i32 0\n}")
    rows = [
        {"function_id": f0.id, "answer": answer},
        {"function_id": f1.id, "pass_list": "-Oz -gvn"},
        {"function_id": f2.id, "pass_list": ["-dce", "-instcombine"]},
        {"function_id": f3.id, "pass_list": "-not-a-real-flag"},
    ]
    path = tmp_path / "preds.jsonl"
    write_jsonl(rows, path)
    predictor = FilePredictor(path, vocab)

    full = predictor.predict(f0)
    assert full.pass_list == "-mem2reg -dce"
    assert (full.predicted_input_count, full.predicted_output_count) == (9, 4)
    assert full.predicted_code == "define i32 @f() {\nret i32 0\n}"
    assert not full.parse_failed

    assert predictor.predict(f1).pass_list == "-Oz -gvn"
    assert predictor.predict(f2).pass_list == "-dce -instcombine"

    invalid = predictor.predict(f3)
    assert invalid.pass_list == "-Oz"
    assert invalid.parse_failed


def test_file_predictor_missing_function(tmp_path, vocab, corpus20):
    path = tmp_path / "preds.jsonl"
    write_jsonl([{"function_id": "other"}], path)
    predictor = FilePredictor(path, vocab)
    with pytest.raises(MissingPredictionError):
        predictor.predict(corpus20[0])
    # a row with neither field degrades to flagged -Oz
    other = dataclasses.replace(corpus20[0], id="other")
    degraded = predictor.predict(other)
    assert degraded.pass_list == "-Oz"
    assert degraded.parse_failed


def test_file_predictor_bad_answer_degrades(tmp_path, vocab, corpus20):
    path = tmp_path / "preds.jsonl"
    write_jsonl([{"function_id": corpus20[0].id, "answer": "not the template"}], path)
    degraded = FilePredictor(path, vocab).predict(corpus20[0])
    assert degraded.pass_list == "-Oz"
    assert degraded.parse_failed


# --- process predictor ------------------------------------------------------

ECHO_PREDICTOR = """\
import sys
prompt = sys.stdin.read()
print("Run passes -instcombine -simplifycfg to reduce instruction count from 14 to 7:")
print()
sys.stdout.write(prompt)
"""


def write_script(tmp_path, body, name="model.py"):
    path = tmp_path / name
    path.write_text(body)
    return [sys.executable, str(path)]


def test_process_predictor_round_trip(tmp_path, vocab, corpus20):
    command = write_script(tmp_path, ECHO_PREDICTOR)
    prediction = ProcessPredictor(command, vocab).predict(corpus20[0])
    assert prediction.items() == ("-instcombine", "-simplifycfg")
    assert prediction.predicted_input_count == 14
    assert prediction.predicted_output_count == 7
    # the prompt reached the process on stdin
    assert prediction.predicted_code == corpus20[0].normalized_text


def test_process_predictor_nonzero_exit(tmp_path, vocab, corpus20):
    command = write_script(
        tmp_path, "import sys; sys.stderr.write('boom'); sys.exit(3)"
    )
    with pytest.raises(ExternalPredictorError, match="boom"):
        ProcessPredictor(command, vocab).predict(corpus20[0])


def test_process_predictor_timeout(tmp_path, vocab, corpus20):
    command = write_script(tmp_path, "import time; time.sleep(30)")
    with pytest.raises(ExternalPredictorError, match="timed out"):
        ProcessPredictor(command, vocab, timeout=0.3).predict(corpus20[0])


def test_process_predictor_garbage_degrades(tmp_path, vocab, corpus20):
    command = write_script(tmp_path, "print('gibberish')")
    prediction = ProcessPredictor(command, vocab).predict(corpus20[0])
    assert prediction.pass_list == "-Oz"
    assert prediction.parse_failed


def test_process_predictor_rejects_empty_command(vocab):
    with pytest.raises(ValueError):
        ProcessPredictor([], vocab)


def test_predict_external_dispatches_file_vs_command(tmp_path, vocab, corpus20):
    fn = corpus20[0]
    rows_path = tmp_path / "rows.jsonl"
    write_jsonl([{"function_id": fn.id, "pass_list": "-dce"}], rows_path)
    from_file = predict_external(fn, str(rows_path), vocab)
    assert from_file.pass_list == "-dce"

    command = write_script(tmp_path, ECHO_PREDICTOR)
    from_process = predict_external(fn, " ".join(command), vocab)
    assert from_process.items() == ("-instcombine", "-simplifycfg")


# --- -Oz backup protocol ----------------------------------------------------


class PoisonBackend:
    def __init__(self, inner, poison, timeout_flag=None):
        self._inner = inner
        self._poison = poison
        self._timeout_flag = timeout_flag

    @property
    def vocabulary(self):
        return self._inner.vocabulary

    def apply(self, ir, passes):
        if self._timeout_flag and self._timeout_flag in passes.items:
            raise CompileTimeoutError("induced")
        if self._poison and self._poison in passes.items:
            return CompileOutcome.failure(diagnostic_from_message("poisoned"))
        return self._inner.apply(ir, passes)


def oz_count_of(backend, fn):
    ir = NormalizedIr(fn.normalized_text)
    return backend.apply(ir, PassList(("-Oz",), backend.vocabulary)).instruction_count


def test_backup_oz_prediction_is_free(backend, corpus20):
    fn = corpus20[0]
    outcome = with_oz_backup(predict_always_oz(fn), fn, backend)
    assert outcome == BackupOutcome("-Oz", oz_count_of(backend, fn), 0)


def test_backup_keeps_a_better_prediction(backend):
    fn = next(
        f
        for f in (generate_function(i, seed=7) for i in range(80))
        if f.source_dataset == "mini/phaseorder"
    )
    prediction = Prediction(fn.id, "-Oz -mem2reg")
    outcome = with_oz_backup(prediction, fn, backend)
    assert outcome.pass_list == "-Oz -mem2reg"
    assert outcome.instruction_count < oz_count_of(backend, fn)
    assert outcome.additional_compilations == 1
    assert not outcome.predicted_failed


def test_backup_replaces_a_worse_prediction(backend, corpus20):
    fn = next(f for f in corpus20 if f.source_dataset == "mini/arith")
    ir = NormalizedIr(fn.normalized_text)
    dce_only = backend.apply(ir, PassList(("-dce",), backend.vocabulary))
    oz = oz_count_of(backend, fn)
    assert dce_only.instruction_count > oz  # precondition: -dce alone is worse
    outcome = with_oz_backup(Prediction(fn.id, "-dce"), fn, backend)
    assert outcome == BackupOutcome("-Oz", oz, 1)


def test_backup_breaks_ties_toward_oz(backend, corpus20):
    fn = corpus20[0]
    ir = NormalizedIr(fn.normalized_text)
    tied = backend.apply(ir, PassList(("-Oz", "-dce"), backend.vocabulary))
    oz = oz_count_of(backend, fn)
    assert tied.instruction_count == oz  # precondition: a genuine tie
    outcome = with_oz_backup(Prediction(fn.id, "-Oz -dce"), fn, backend)
    assert outcome.pass_list == "-Oz"
    assert outcome.additional_compilations == 1


def test_backup_handles_failing_prediction(backend, corpus20):
    fn = corpus20[0]
    rigged = PoisonBackend(backend, "-gvn")
    outcome = with_oz_backup(Prediction(fn.id, "-gvn"), fn, rigged)
    assert outcome.pass_list == "-Oz"
    assert outcome.additional_compilations == 1
    assert outcome.predicted_failed


def test_backup_handles_timeout_like_failure(backend, corpus20):
    fn = corpus20[0]
    rigged = PoisonBackend(backend, None, timeout_flag="-gvn")
    outcome = with_oz_backup(Prediction(fn.id, "-gvn"), fn, rigged)
    assert outcome.pass_list == "-Oz"
    assert outcome.predicted_failed


def test_backup_uses_supplied_oz_count(backend, corpus20):
    fn = corpus20[0]
    rigged = PoisonBackend(backend, "-Oz")  # would fail if -Oz were recompiled
    outcome = with_oz_backup(Prediction(fn.id, "-dce"), fn, rigged, oz_count=3)
    assert outcome.additional_compilations == 1
    assert outcome.instruction_count <= max(
        3, backend.apply(
            NormalizedIr(fn.normalized_text), PassList(("-dce",), backend.vocabulary)
        ).instruction_count,
    )


def test_backup_never_regresses(backend, corpus20):
    candidates = ["-dce", "-mem2reg -gvn", "-Oz -simplifycfg", "-constfold"]
    for fn in corpus20:
        oz = oz_count_of(backend, fn)
        for pass_list in candidates:
            outcome = with_oz_backup(Prediction(fn.id, pass_list), fn, backend)
            assert outcome.instruction_count <= oz


def test_prediction_round_trip(tmp_path, corpus20):
    predictions = [
        predict_always_oz(corpus20[0]),
        Prediction(corpus20[1].id, "-dce -gvn", 9, 4, "code", 0, False),
    ]
    path = tmp_path / "preds.jsonl"
    assert write_predictions(predictions, path) == 2
    assert read_predictions(path) == predictions


def test_prediction_rejects_negative_compilations(corpus20):
    with pytest.raises(ValueError):
        Prediction(corpus20[0].id, "-Oz", extra_compilations=-1)
