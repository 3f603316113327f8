#!/usr/bin/env python3
"""Writes assets/query_templates.jsonl and the scripted mock LLM rule files.

Each mock rule is {"match", "response"}; a match wrapped in slashes is a
regular expression whose groups fill $1..$9 in the response.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
ASSETS = ROOT / "assets"

DOI_Q = r"(10\.\d{4,9}/[^\s?]+)"

# (description, cypher). Descriptions are the question with placeholders.
TEMPLATES = [
    ("How many citations are there for $DOI?",
     "MATCH (d:Document) WHERE d.doi = '$DOI' RETURN d"),
    ("How many references are there for $DOI?",
     "MATCH (d:Document) WHERE d.doi = '$DOI' RETURN d"),
    ("How many authors are there for $DOI?",
     "MATCH (d:Document)-[:AUTHORED_BY]-(a:Author) WHERE d.doi = '$DOI' RETURN count(*)"),
    ("What year was $DOI published?",
     "MATCH (d:Document)-[:PUBLISHED_IN_YEAR]-(y:Year) WHERE d.doi = '$DOI' RETURN y"),
    ("Which publisher published $DOI?",
     "MATCH (d:Document)-[:PUBLISHED_BY]-(p:Publisher) WHERE d.doi = '$DOI' RETURN p"),
    ("How many scopus categories are assigned to $DOI?",
     "MATCH (d:Document)-[:HAS_CATEGORY]-(k:Keyword) WHERE d.doi = '$DOI' RETURN count(*)"),
    ("What is the title of $DOI?",
     "MATCH (d:Document) WHERE d.doi = '$DOI' RETURN d"),
    ("How many papers are there on the topic of $TOPIC?",
     "MATCH (d:Document)-[:HAS_TOPIC]-(t:Topic) WHERE t.label = '$TOPIC' RETURN count(*)"),
    ("How many papers were written related to $TOPIC in $YEAR?",
     "MATCH (y:Year)-[:PUBLISHED_IN_YEAR]-(d:Document)-[:HAS_TOPIC]-(t:Topic) "
     "WHERE t.label = '$TOPIC' AND y.year = '$YEAR' RETURN count(*)"),
    ("How many papers were published in $YEAR?",
     "MATCH (d:Document)-[:PUBLISHED_IN_YEAR]-(y:Year) WHERE y.year = '$YEAR' RETURN count(*)"),
    ("Which countries have published papers that mention $KEYWORD?",
     "MATCH (k:Keyword)-[r1]-(d:Document)-[r2]-(a:Affiliation)-[r3]-(c:Country) "
     "WHERE k.term CONTAINS '$KEYWORD' RETURN c"),
    ("Which papers did $PERSON write?",
     "MATCH (d:Document)-[:AUTHORED_BY]-(a:Author) WHERE a.name = '$PERSON' RETURN d"),
    ("Which topics does $DOI belong to?",
     "MATCH (d:Document)-[:HAS_TOPIC]-(t:Topic) WHERE d.doi = '$DOI' RETURN t"),
]

# Question regex body (after "Question: "), template, bindings with $n refs.
QA = [
    (rf"How many citations are there for {DOI_Q}\?", "How many citations are there for $DOI?", {"$DOI": "$1"}),
    (rf"How many references are there for {DOI_Q}\?", "How many references are there for $DOI?", {"$DOI": "$1"}),
    (rf"How many authors are there for {DOI_Q}\?", "How many authors are there for $DOI?", {"$DOI": "$1"}),
    (rf"What year was {DOI_Q} published\?", "What year was $DOI published?", {"$DOI": "$1"}),
    (rf"Which publisher published {DOI_Q}\?", "Which publisher published $DOI?", {"$DOI": "$1"}),
    (rf"How many scopus categories are assigned to {DOI_Q}\?", "How many scopus categories are assigned to $DOI?",
     {"$DOI": "$1"}),
    (rf"What is the title of {DOI_Q}\?", "What is the title of $DOI?", {"$DOI": "$1"}),
    (r"How many papers are there on the topic of ([^\n?]+)\?", "How many papers are there on the topic of $TOPIC?",
     {"$TOPIC": "$1"}),
    (r"How many papers were written related to ([^\n?]+) in (\d{4})\?",
     "How many papers were written related to $TOPIC in $YEAR?", {"$TOPIC": "$1", "$YEAR": "$2"}),
]

ROW_COUNT = r"Rows: 1\n1\. (\d+)\n"

ANSWERS = [
    ("How many citations", r'citation_count: "(\d+)"', "$1"),
    ("How many references", r'reference_count: "(\d+)"', "$1"),
    ("How many authors", ROW_COUNT, "$1"),
    ("What year was", r'year: "(\d{4})"', "$1"),
    ("Which publisher", r'name: "([^"]*)"', "$1"),
    ("How many scopus categories", ROW_COUNT, "$1"),
    ("What is the title", r'title: "([^"]*)"', "$1"),
    ("How many papers are there", ROW_COUNT, "$1"),
    ("How many papers were written", ROW_COUNT, "$1"),
]


def regex(body):
    return "/" + body + "/"


def qa_rules():
    rules = []
    metadata = "How many|What year was|Which publisher|What is the title"
    rules.append({"match": regex(rf"^### ROUTE\n[\s\S]*\nQuestion: (?:{metadata})"),
                  "response": "General: needs document metadata or corpus counts"})
    for body, template, bindings in QA:
        rules.append({"match": regex(rf"^### GENERICIZE\n[\s\S]*\nQuestion: {body}\n"),
                      "response": json.dumps({"template": template, "bindings": bindings})})
    for prefix, extract, response in ANSWERS:
        rules.append({"match": regex(rf"^### ANSWER FROM RESULT\nQuestion: {prefix}[\s\S]*\nRows: [\s\S]*{extract}"),
                      "response": response})
    # Closed-book answers: a few confident guesses, otherwise a refusal.
    rules.append({"match": regex(r"^### ANSWER WITHOUT CONTEXT\nQuestion: What year was"), "response": "2019"})
    rules.append({"match": regex(r"^### ANSWER WITHOUT CONTEXT\nQuestion: Which publisher"), "response": "IEEE"})
    rules.append({"match": regex(r"^### ANSWER WITHOUT CONTEXT\nQuestion: How many citations"), "response": "12"})
    rules.append({"match": regex(r"^### ANSWER WITHOUT CONTEXT\n"),
                  "response": "I don't know. I do not have access to that bibliographic record."})
    return rules


def bundled_rules():
    rules = qa_rules()
    outlier = "What challenge is associated with"
    rules += [
        {"match": regex(rf"^### ROUTE\n[\s\S]*\nQuestion: {outlier}"),
         "response": "SpecificDocument: the answer is stated in a paper's text"},
        {"match": regex(r"^### REACT\n[\s\S]*\nObservation: \[(10\.\S+) #(-?\d+)\] score=\S+ ([^\n]*)"),
         "response": "Thought: the top passage addresses the question.\nFinal Answer: $3 [$1]"},
        {"match": regex(r"^### REACT\n[\s\S]*\nQuestion: ([^\n]+)\n"),
         "response": "Thought: search the paragraphs.\nAction: vector_search\nAction Input: $1"},
        {"match": regex(r"^### ROUTE\n[\s\S]*\nQuestion: Which countries"),
         "response": "General: needs a join across keywords, documents, affiliations and countries"},
    ]
    return rules


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


def main():
    write_jsonl(ASSETS / "query_templates.jsonl", [{"description": d, "cypher": c} for d, c in TEMPLATES])
    write_jsonl(ASSETS / "mock_llm" / "qa.jsonl", qa_rules())
    write_jsonl(ASSETS / "mock_llm" / "bundled.jsonl", bundled_rules())


if __name__ == "__main__":
    main()
