"""File-level batch jobs behind the CLI: scoring and evaluating response files."""

from __future__ import annotations

from typing import Iterable, Iterator

from tubetopo.datakit import PredictionLine, RecordStore, SampleLine
from tubetopo.errors import DataError
from tubetopo.evaluation import evaluate
from tubetopo.reward import FormatError, RewardConfig, parse_answer, score_prediction, total_reward
from tubetopo.types import Anomaly


def check_ids(records: Iterable[SampleLine] | RecordStore, predictions: list[PredictionLine]) -> None:
    known = set(records.ids()) if isinstance(records, RecordStore) else {r.id for r in records}
    unknown = [p.id for p in predictions if p.id not in known]
    if unknown:
        raise DataError(f"responses for unknown sample ids: {unknown[:5]}")


def score_lines(
    store: RecordStore, predictions: list[PredictionLine], config: RewardConfig = RewardConfig()
) -> Iterator[dict]:
    """One breakdown per prediction line, in input order, tagged with the id."""
    check_ids(store, predictions)
    for p in predictions:
        rec = store.get(p.id)
        if p.response is not None:
            b = total_reward(rec, p.response, config)
        else:
            b = score_prediction(rec, p.prediction, config)
        yield {"id": p.id, **b.to_dict()}


def predicted(p: PredictionLine) -> tuple[list[Anomaly], bool]:
    """Anomalies of a prediction line and whether it parsed; unparseable text counts as empty."""
    if p.prediction is not None:
        return list(p.prediction), True
    try:
        return parse_answer(p.response), True
    except FormatError:
        return [], False


def evaluate_lines(records: list[SampleLine], predictions: list[PredictionLine]) -> dict:
    check_ids(records, predictions)
    parsed = [(p.id, predicted(p)) for p in predictions]
    report = evaluate(
        [(r.id, r.annotations) for r in records], [(sid, anomalies) for sid, (anomalies, _) in parsed]
    )
    report["n_unparsed"] = sum(not ok for _, (_, ok) in parsed)
    report["n_missing"] = len(records) - len(predictions)
    return report
