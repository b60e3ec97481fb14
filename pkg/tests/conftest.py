"""Shared fixture builders: tarballs, Atom feeds, cassettes, tabular splits."""

import gzip
import io
import json
import tarfile
from pathlib import Path

import numpy as np
import pytest

from sciconsult.arxiv import EPRINT_URL, PDF_URL, SEARCH_URL
from sciconsult.net import write_cassette

FAKE_PDF = b"%PDF-1.4 fake fixture body\n%%EOF"


def make_targz(files: dict[str, bytes | str]) -> bytes:
    """Build a gzipped tar archive in memory."""
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        for name, content in files.items():
            data = content.encode("utf-8") if isinstance(content, str) else content
            info = tarfile.TarInfo(name=name)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def make_gz(content: bytes | str) -> bytes:
    data = content.encode("utf-8") if isinstance(content, str) else content
    return gzip.compress(data)


def atom_feed(entries: list[tuple[str, str, str]]) -> bytes:
    """Build an arXiv-style Atom feed; entries are (id, title, abstract)."""
    body = ['<?xml version="1.0" encoding="UTF-8"?>']
    body.append('<feed xmlns="http://www.w3.org/2005/Atom">')
    body.append("<title>ArXiv Query Results</title>")
    for arxiv_id, title, abstract in entries:
        body.append(
            "<entry>"
            f"<id>http://arxiv.org/abs/{arxiv_id}</id>"
            f"<title>{title}</title>"
            f"<summary>{abstract}</summary>"
            "</entry>"
        )
    body.append("</feed>")
    return "\n".join(body).encode("utf-8")


def search_url(query: str, max_results: int) -> str:
    return SEARCH_URL.format(
        query=query.replace(" ", "+"), start=0, max_results=max_results
    )


def record_search(cassette_dir, query, max_results, entries):
    write_cassette(cassette_dir, search_url(query, max_results), atom_feed(entries))


def record_eprint(cassette_dir, arxiv_id, payload: bytes, status: int = 200):
    write_cassette(cassette_dir, EPRINT_URL.format(arxiv_id=arxiv_id), payload, status=status)


def record_pdf(cassette_dir, arxiv_id, payload: bytes = FAKE_PDF, status: int = 200):
    write_cassette(cassette_dir, PDF_URL.format(arxiv_id=arxiv_id), payload, status=status)


@pytest.fixture
def cassette_dir(tmp_path):
    path = tmp_path / "cassettes"
    path.mkdir()
    return path


def tabular_record(uid: str, features: dict, label: str | None = None, numeric: float | None = None) -> dict:
    record: dict = {"unique_id": uid, "input": {"numerical_features": dict(features)}}
    output: dict = {}
    if label is not None:
        output["categorical"] = label
    if numeric is not None:
        output["numerical"] = numeric
    if output:
        record["output"] = output
    return record


def write_jsonl(path: Path, rows: list[dict]) -> None:
    path.write_text(
        "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows),
        encoding="utf-8",
    )


def write_split_dir(directory: Path, splits: dict[str, list[dict]]) -> Path:
    """Write role -> record-dict lists as <role>.jsonl files under directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for role, rows in splits.items():
        write_jsonl(directory / f"{role}.jsonl", rows)
    return directory


def separable_splits(
    seed: int = 7,
    n_train: int = 200,
    n_val: int = 50,
    n_test: int = 50,
    gap: float = 2.0,
    noise: float = 0.5,
) -> dict[str, list[dict]]:
    """Two-feature binary dataset with classes split along x1 by ~4 sigma."""
    rng = np.random.default_rng(seed)

    def make(role: str, count: int) -> list[dict]:
        records = []
        for i in range(count):
            label = "pos" if i % 2 == 0 else "neg"
            center = gap if label == "pos" else -gap
            records.append(
                tabular_record(
                    f"{role}-{i:04d}",
                    {
                        "x1": round(center + noise * rng.standard_normal(), 6),
                        "x2": round(float(rng.standard_normal()), 6),
                    },
                    label=label,
                )
            )
        return records

    return {
        "train": make("train", n_train),
        "validation": make("validation", n_val),
        "test": make("test", n_test),
    }


# --- consult-service fixtures shared by the service, API, and CLI tests ---

SCHEMA_YAML = """
sections:
  - name: Introduction
    questions:
      - id: intro_goal
        text: What is the goal of the project?
        answer_kind: free_text
        required: true
  - name: Understanding Data
    questions:
      - id: data_sources
        text: Which data sources are available for this project?
        answer_kind: free_text
        tags: [data_availability]
      - id: data_labeled
        text: Are ground-truth labels available?
        answer_kind: boolean
        tags: [data_availability]
  - name: Evaluation
    questions:
      - id: eval_metric
        text: Which evaluation metric matters most?
        answer_kind: single_choice
        options: [accuracy, precision, AUC-ROC]
  - name: Task Mechanism
    questions:
      - id: mech_approach
        text: Describe the intended modeling approach.
        answer_kind: free_text
  - name: Constraints
    questions:
      - id: constraint_latency_ms
        text: What is the latency budget in milliseconds?
        answer_kind: numeric
  - name: Miscellaneous
    questions:
      - id: misc_tags
        text: Which areas does the project touch?
        answer_kind: multi_choice
        options: [cv, nlp, tabular]
"""

REC_MD = (
    Path(__file__).parent / "golden_recs" / "02_well_formed_no_thinking.md"
).read_text(encoding="utf-8")

GENERAL_REPLY = {
    "suggestions": [
        {
            "question_id": "eval_metric",
            "value": "AUC-ROC",
            "rationale": "class imbalance",
        },
        {"question_id": "constraint_latency_ms", "value": 200},
    ]
}

DATA_REPLY = {
    "suggestions": [
        {
            "question_id": "data_sources",
            "value": "claims_2023 table",
            "dataset_names": ["claims_2023"],
        },
        {"question_id": "data_labeled", "value": True},
    ]
}


def rec_transcript(summaries: int = 0, first_delay_s: float = 0.0) -> list:
    """Scripted replies for one recommendation run over the churn fixtures."""
    first = json.dumps({"queries": ["ti:churn prediction"]})
    entries: list = [
        {"response": first, "delay_s": first_delay_s} if first_delay_s else first
    ]
    entries.append(json.dumps({"paper_ids": ["2301.00001", "2301.00002"]}))
    entries.extend(f"Summary of shortlisted paper {i}." for i in range(summaries))
    entries.append(REC_MD)
    return entries


def seed_cassettes(cassette_dir, with_sources: bool = False) -> None:
    record_search(
        cassette_dir,
        "ti:churn prediction",
        10,
        [
            ("2301.00001", "Churn Models A", "Gradient boosting for churn."),
            ("2301.00002", "Churn Models B", "Calibration for churn scores."),
            ("2301.00003", "Unrelated", "Radio astronomy pipelines."),
        ],
    )
    if with_sources:
        for arxiv_id in ("2301.00001", "2301.00002"):
            record_eprint(
                cassette_dir,
                arxiv_id,
                make_targz({"main.tex": f"\\section{{Intro}} Paper {arxiv_id}."}),
            )
