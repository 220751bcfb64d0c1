"""Evaluation metrics: response quality (BLEU, METEOR, ROUGE-L), task
completion (Inform, Success, Combined), belief tracking (Joint Goal) and
retrieval quality (MRR@5, R@1).

Conventions, fixed here and relied on by the tests:

  * Metric tokenization is plain whitespace splitting of lowercased text,
    so delexicalized placeholders like "[value_name]" survive as tokens.
  * bleu() is corpus-level BLEU-4 on the 0-100 scale.  Higher-order n-gram
    precisions with a zero count get 1 added to numerator and denominator;
    the unigram precision is never smoothed.
  * meteor() and rouge_l() are per-pair scores in [0, 1]; the aggregate
    report averages them over turns and reports them on the 0-100 scale.
  * Joint Goal compares normalized non-ruk triples on original turns only.
  * Inform/Success follow the delexicalized-placeholder convention; a
    lexical mode matches entity names and slot values from the database
    instead.
  * MRR@5 and R@1 are computed on inserted turns and stay on [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ._porter import stem
from .belief import (
    DsvTriple,
    ExtendedBeliefState,
    normalize_state,
    normalize_text,
    parse_state,
)
from .corpus import Database, DbEntry, Dialog, DialogCorpus, GoalSpec, Ontology, TurnKind
from .errors import (
    DuplicateDocError,
    DuplicateIdError,
    FormatError,
    LengthMismatchError,
    MissingPredictionError,
    ParseError,
    SchemaError,
    UnknownDomainError,
)
from .kb_structured import query

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
ROUGE_BETA = 1.2
BLEU_MAX_ORDER = 4

#: Placeholders that count as offering an entity in delexicalized responses.
ENTITY_PLACEHOLDERS = ("[value_name]", "[value_id]")


def metric_tokenize(text: str) -> list[str]:
    return normalize_text(text).split()


@dataclass(frozen=True)
class TurnPrediction:
    dialog_id: str
    turn_index: int
    state: ExtendedBeliefState
    ranked_docs: tuple[str, ...] = ()
    response: str = ""


def load_predictions(path) -> list[TurnPrediction]:
    """Parse a prediction file: a JSON list of per-turn records with the
    state in the flat serialization format."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError(f"{path}: prediction file must be a JSON list")
    predictions = []
    seen: set[tuple[str, int]] = set()
    for i, obj in enumerate(data):
        if not isinstance(obj, dict) or "dialog_id" not in obj or "turn_index" not in obj:
            raise SchemaError(f"{path}: record {i} must carry dialog_id and turn_index")
        dialog_id = str(obj["dialog_id"])
        turn_index = int(obj["turn_index"])
        key = (dialog_id, turn_index)
        if key in seen:
            raise DuplicateIdError(f"{path}: duplicate prediction for {dialog_id} turn {turn_index}")
        seen.add(key)
        try:
            state = parse_state(obj.get("state", ""))
        except FormatError as exc:
            raise FormatError(
                f"{path}: record {i} ({dialog_id} turn {turn_index}): {exc}", exc.offset
            ) from exc
        predictions.append(
            TurnPrediction(
                dialog_id=dialog_id,
                turn_index=turn_index,
                state=state,
                ranked_docs=tuple(obj.get("ranked_docs", ())),
                response=str(obj.get("response", "")),
            )
        )
    return predictions


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length over arbitrary token sequences."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _ngram_counts(tokens: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(candidates: Sequence[str], references: Sequence[str], smoothing: bool = True) -> float:
    """Corpus-level BLEU-4 in [0, 100] with brevity penalty.

    For orders 2..4 a zero clipped count is smoothed by adding one to both
    numerator and denominator; a zero unigram count makes the score 0.
    With smoothing off, any zero precision zeroes the score.
    """
    if len(candidates) != len(references):
        raise LengthMismatchError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    if not candidates:
        return 0.0
    clipped = [0] * BLEU_MAX_ORDER
    totals = [0] * BLEU_MAX_ORDER
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_tokens = metric_tokenize(cand)
        ref_tokens = metric_tokenize(ref)
        cand_len += len(cand_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, BLEU_MAX_ORDER + 1):
            cand_grams = _ngram_counts(cand_tokens, n)
            ref_grams = _ngram_counts(ref_tokens, n)
            clipped[n - 1] += sum(min(c, ref_grams.get(g, 0)) for g, c in cand_grams.items())
            totals[n - 1] += max(len(cand_tokens) - n + 1, 0)
    if cand_len == 0 or clipped[0] == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        num, den = clipped[n - 1], totals[n - 1]
        if n >= 2 and num == 0:
            if not smoothing:
                return 0.0
            num, den = num + 1, den + 1
        log_sum += math.log(num / den)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_sum / BLEU_MAX_ORDER)


def _meteor_align(cand: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    # Two greedy stages: exact token matches first, then Porter-stem
    # matches on whatever is left; each stage takes the first available
    # reference position.
    ref_used = [False] * len(ref)
    alignment: dict[int, int] = {}
    for i, token in enumerate(cand):
        for j, other in enumerate(ref):
            if not ref_used[j] and token == other:
                alignment[i] = j
                ref_used[j] = True
                break
    cand_stems = [stem(t) for t in cand]
    ref_stems = [stem(t) for t in ref]
    for i in range(len(cand)):
        if i in alignment:
            continue
        for j in range(len(ref)):
            if not ref_used[j] and cand_stems[i] == ref_stems[j]:
                alignment[i] = j
                ref_used[j] = True
                break
    return sorted(alignment.items())


def _chunk_count(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(candidate: str, reference: str) -> float:
    """Single-pair METEOR in [0, 1]: harmonic mean of precision and recall
    (recall-weighted, alpha=0.9) times a fragmentation penalty."""
    cand = metric_tokenize(candidate)
    ref = metric_tokenize(reference)
    if not cand or not ref:
        return 0.0
    alignment = _meteor_align(cand, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    penalty = METEOR_GAMMA * (_chunk_count(alignment) / m) ** METEOR_BETA
    return f_mean * (1.0 - penalty)


def rouge_l(candidate: str, reference: str) -> float:
    """Single-pair ROUGE-L F-measure (beta=1.2) in [0, 1]."""
    cand = metric_tokenize(candidate)
    ref = metric_tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    recall = lcs / len(ref)
    precision = lcs / len(cand)
    denom = recall + ROUGE_BETA**2 * precision
    if denom == 0.0:
        return 0.0
    return (1 + ROUGE_BETA**2) * recall * precision / denom


def _normalized_triples(
    state: ExtendedBeliefState, canon_map: Mapping[str, str] | None = None
) -> frozenset[tuple[str, str, str]]:
    normalized = normalize_state(state, canon_map)
    return frozenset((t.domain, t.slot, t.value) for t in normalized.non_ruk_triples)


def _prediction_map(predictions: Sequence[TurnPrediction]) -> dict[tuple[str, int], TurnPrediction]:
    return {(p.dialog_id, p.turn_index): p for p in predictions}


def joint_goal(
    predictions: Sequence[TurnPrediction],
    corpus: DialogCorpus,
    canon_map: Mapping[str, str] | None = None,
) -> float:
    """Percentage of original turns whose normalized non-ruk triples match
    the gold state exactly."""
    pred_map = _prediction_map(predictions)
    total = 0
    correct = 0
    for dialog in corpus:
        for turn in dialog.turns:
            if turn.kind is not TurnKind.ORIGINAL:
                continue
            pred = pred_map.get((dialog.id, turn.index))
            if pred is None:
                raise MissingPredictionError(f"no prediction for {dialog.id} turn {turn.index}")
            total += 1
            if _normalized_triples(pred.state, canon_map) == _normalized_triples(turn.state, canon_map):
                correct += 1
    return 100.0 * correct / total if total else 0.0


def _has_entity_slot(entries: Sequence[DbEntry]) -> bool:
    return any("name" in e.slots or "id" in e.slots for e in entries)


def _goal_matches(db: Database, domain: str, constraints: Mapping[str, str]) -> set[str]:
    state = ExtendedBeliefState(
        triples=tuple(DsvTriple(domain, slot, value) for slot, value in constraints.items())
    )
    return {e.identity() for e in query(db, state, domain).entries}


def inform_success(
    predictions: Sequence[TurnPrediction],
    goal: GoalSpec,
    db: Database,
    ontology: Ontology,
    delex: bool = True,
) -> tuple[bool, bool]:
    """Task-completion verdict for one dialog.

    Inform: for every informable goal domain (present in the database with
    a name or id slot), some entity offered by the system satisfies the
    goal constraints.  In delexicalized mode an entity is offered at a
    turn whose response carries an entity placeholder, and the offer set
    is the database result for the predicted state's constraints in that
    domain at that turn.  In lexical mode entity names from the database
    are matched against the response text directly.

    Success: inform holds and every requested slot is answered, i.e. its
    placeholder occurs in some response (delexicalized), or a matched
    entity's value for that slot occurs in the text (lexical).
    """
    for domain in goal.domains:
        if domain not in ontology.domains:
            raise UnknownDomainError(f"goal domain {domain!r} not in ontology")
    texts = [normalize_text(p.response) for p in predictions]
    joined = " ".join(texts)

    informable = [
        d for d in goal.domains if d in db.tables and _has_entity_slot(db.tables[d])
    ]
    matched: dict[str, set[str]] = {}
    inform = True
    for domain in informable:
        goal_ok = _goal_matches(db, domain, goal.domains[domain].constraints)
        offered: set[str] = set()
        if delex:
            for pred, text in zip(predictions, texts):
                if not any(ph in text for ph in ENTITY_PLACEHOLDERS):
                    continue
                if not any(t.domain == domain for t in pred.state.non_ruk_triples):
                    continue
                offered |= {e.identity() for e in query(db, pred.state, domain).entries}
        else:
            for entry in db.tables[domain]:
                name = entry.identity()
                if not name.startswith("#") and name in joined:
                    offered.add(name)
        matched[domain] = offered & goal_ok
        if not matched[domain]:
            inform = False

    answered = True
    for domain, domain_goal in goal.domains.items():
        for slot in domain_goal.requests:
            if f"[value_{slot}]" in joined:
                continue
            if not delex and _lexical_slot_answer(db, domain, slot, matched.get(domain, set()), joined):
                continue
            answered = False
    return inform, inform and answered


def _lexical_slot_answer(
    db: Database, domain: str, slot: str, entities: set[str], joined: str
) -> bool:
    rows = {e.identity(): e for e in db.tables.get(domain, ())}
    for name in entities:
        row = rows.get(name)
        if row is not None and slot in row.slots and normalize_text(row.slots[slot]) in joined:
            return True
    return False


def mrr_at_k(ranked: Sequence[str], gold: str, k: int = 5) -> float:
    """Reciprocal rank of the gold document within the top k, else 0."""
    if len(set(ranked)) != len(ranked):
        raise DuplicateDocError(f"ranked list has duplicates: {list(ranked)!r}")
    for rank, doc_id in enumerate(ranked[:k], start=1):
        if doc_id == gold:
            return 1.0 / rank
    return 0.0


def r_at_1(ranked: Sequence[str], gold: str) -> int:
    if len(set(ranked)) != len(ranked):
        raise DuplicateDocError(f"ranked list has duplicates: {list(ranked)!r}")
    return 1 if ranked and ranked[0] == gold else 0


@dataclass
class EvalReport:
    inform: float
    success: float
    bleu: float
    meteor: float
    rouge_l: float
    combined: float
    joint_goal: float
    mrr5: float
    r1: float
    n_dialogs: int
    n_turns: int
    n_original: int
    n_inserted: int
    by_split: dict[str, dict] = field(default_factory=dict)
    by_kind: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "inform": self.inform,
            "success": self.success,
            "bleu": self.bleu,
            "meteor": self.meteor,
            "rouge_l": self.rouge_l,
            "combined": self.combined,
            "joint_goal": self.joint_goal,
            "mrr5": self.mrr5,
            "r1": self.r1,
            "n_dialogs": self.n_dialogs,
            "n_turns": self.n_turns,
            "n_original": self.n_original,
            "n_inserted": self.n_inserted,
            "by_split": self.by_split,
            "by_kind": self.by_kind,
        }


def combined_score(inform: float, success: float, bleu_value: float) -> float:
    return (inform + success) * 0.5 + bleu_value


def _aggregate(
    dialogs: Sequence[Dialog],
    pred_map: Mapping[tuple[str, int], TurnPrediction],
    db: Database | None,
    ontology: Ontology | None,
    delex: bool,
    smoothing: bool,
    canon_map: Mapping[str, str] | None,
) -> dict:
    candidates = []
    references = []
    meteor_scores = []
    rouge_scores = []
    jg_total = jg_correct = 0
    mrr_scores = []
    r1_scores = []
    informs = []
    successes = []
    n_turns = n_original = n_inserted = 0
    for dialog in dialogs:
        turn_preds = []
        for turn in dialog.turns:
            pred = pred_map.get((dialog.id, turn.index))
            if pred is None:
                raise MissingPredictionError(f"no prediction for {dialog.id} turn {turn.index}")
            turn_preds.append(pred)
            n_turns += 1
            candidates.append(pred.response)
            references.append(turn.response)
            meteor_scores.append(meteor(pred.response, turn.response))
            rouge_scores.append(rouge_l(pred.response, turn.response))
            if turn.kind is TurnKind.ORIGINAL:
                n_original += 1
                jg_total += 1
                if _normalized_triples(pred.state, canon_map) == _normalized_triples(
                    turn.state, canon_map
                ):
                    jg_correct += 1
            else:
                n_inserted += 1
                mrr_scores.append(mrr_at_k(pred.ranked_docs, turn.doc_id))
                r1_scores.append(float(r_at_1(pred.ranked_docs, turn.doc_id)))
        if db is not None and ontology is not None:
            inf, suc = inform_success(turn_preds, dialog.goal, db, ontology, delex=delex)
            informs.append(float(inf))
            successes.append(float(suc))
    bleu_value = bleu(candidates, references, smoothing=smoothing)
    inform_pct = 100.0 * sum(informs) / len(informs) if informs else 0.0
    success_pct = 100.0 * sum(successes) / len(successes) if successes else 0.0
    return {
        "inform": inform_pct,
        "success": success_pct,
        "bleu": bleu_value,
        "meteor": 100.0 * sum(meteor_scores) / len(meteor_scores) if meteor_scores else 0.0,
        "rouge_l": 100.0 * sum(rouge_scores) / len(rouge_scores) if rouge_scores else 0.0,
        "combined": combined_score(inform_pct, success_pct, bleu_value),
        "joint_goal": 100.0 * jg_correct / jg_total if jg_total else 0.0,
        "mrr5": sum(mrr_scores) / len(mrr_scores) if mrr_scores else 0.0,
        "r1": sum(r1_scores) / len(r1_scores) if r1_scores else 0.0,
        "n_dialogs": len(dialogs),
        "n_turns": n_turns,
        "n_original": n_original,
        "n_inserted": n_inserted,
    }


def evaluate(
    corpus: DialogCorpus,
    predictions: Sequence[TurnPrediction],
    db: Database | None = None,
    ontology: Ontology | None = None,
    delex: bool = True,
    bleu_smoothing: bool = True,
    canon_map: Mapping[str, str] | None = None,
) -> EvalReport:
    """Full evaluation report over a corpus.

    Every turn of every dialog must have a prediction.  Joint Goal is
    computed on original turns, MRR@5 and R@1 on inserted turns, the
    response-quality metrics on all turns, and Inform/Success per dialog
    (they stay 0 when no database/ontology is supplied).  METEOR and
    ROUGE-L are averaged over turns and reported on the 0-100 scale;
    MRR@5 and R@1 stay on [0, 1].
    """
    pred_map = _prediction_map(predictions)
    dialogs = sorted(corpus, key=lambda d: d.id)
    overall = _aggregate(dialogs, pred_map, db, ontology, delex, bleu_smoothing, canon_map)

    by_split = {}
    for split in sorted({d.split for d in dialogs}):
        subset = [d for d in dialogs if d.split == split]
        by_split[split] = _aggregate(subset, pred_map, db, ontology, delex, bleu_smoothing, canon_map)

    by_kind = {}
    for kind in TurnKind:
        cands = []
        refs = []
        met = []
        rou = []
        for dialog in dialogs:
            for turn in dialog.turns:
                if turn.kind is not kind:
                    continue
                pred = pred_map[(dialog.id, turn.index)]
                cands.append(pred.response)
                refs.append(turn.response)
                met.append(meteor(pred.response, turn.response))
                rou.append(rouge_l(pred.response, turn.response))
        if cands:
            by_kind[kind.value] = {
                "n_turns": len(cands),
                "bleu": bleu(cands, refs, smoothing=bleu_smoothing),
                "meteor": 100.0 * sum(met) / len(met),
                "rouge_l": 100.0 * sum(rou) / len(rou),
            }

    return EvalReport(by_split=by_split, by_kind=by_kind, **overall)
