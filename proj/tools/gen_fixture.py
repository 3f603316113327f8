#!/usr/bin/env python3
"""Writes the bundled fixture under fixtures/bundled/.

40 core documents in four themes, 18 more reachable over two citation hops,
6 more returned by the bigram searches. Three of the non-core documents are
off-theme and should fall below the pruning threshold.

Re-running overwrites the fixture tree with identical bytes.
"""

import json
import random
import shutil
import string
from pathlib import Path
from urllib.parse import quote

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "bundled"

THEMES = [
    {
        "name": "malware",
        "phrase": "malware classification",
        "repeat": 2,
        "words": ["malware", "opcode", "binaries", "packer", "obfuscation", "ransomware", "sandbox",
                  "signatures", "trojan", "dropper", "payload", "disassembly", "executables", "families",
                  "android", "permissions", "bytecode", "byte", "histograms", "portable", "imports"],
        "categories": ["Computer Science: Information Systems", "Computer Science: Software"],
        "title_heads": ["Family-level", "Scalable", "Explainable", "Robust", "Lightweight"],
    },
    {
        "name": "anomaly",
        "phrase": "anomaly detection",
        "repeat": 2,
        "words": ["anomaly", "outliers", "network", "traffic", "flows", "intrusion", "packets", "baseline",
                  "streaming", "telemetry", "alerts", "isolation", "forest", "autoencoder", "reconstruction",
                  "netflow", "beaconing", "lateral", "movement", "firewall"],
        "categories": ["Computer Science: Computer Networks and Communications", "Computer Science: Signal Processing"],
        "title_heads": ["Unsupervised", "Online", "Adaptive", "Streaming", "Hierarchical"],
    },
    {
        "name": "tensor",
        "phrase": "tensor decomposition",
        "repeat": 2,
        "words": ["tensor", "nonnegative", "factorization", "latent", "rank", "canonical", "polyadic",
                  "tucker", "sparse", "matrices", "multiplicative", "updates", "convergence", "factors",
                  "silhouette", "clustering", "bootstrap", "stability", "topics", "coefficients"],
        "categories": ["Mathematics: Numerical Analysis", "Computer Science: Artificial Intelligence"],
        "title_heads": ["Distributed", "Randomized", "Constrained", "Interpretable", "Parallel"],
    },
    {
        "name": "cybercrime",
        "phrase": "underground forums",
        "repeat": 1,
        "words": ["cybercrime", "underground", "forums", "marketplaces", "fraud", "phishing", "carding",
                  "cryptocurrency", "laundering", "extortion", "vendors", "listings", "law", "enforcement",
                  "victims", "scams", "botnets", "takedown", "darknet", "actors"],
        "categories": ["Social Sciences: Law", "Computer Science: Cybercrime and Security"],
        "title_heads": ["Measuring", "Tracing", "Profiling", "Mapping", "Disrupting"],
    },
]

OFF_THEME = {
    "words": ["soil", "irrigation", "crop", "yield", "rainfall", "wheat", "fertilizer", "harvest",
              "drought", "farmers", "nitrogen", "maize", "grazing", "pasture", "seasonal"],
    "categories": ["Agricultural and Biological Sciences: Agronomy"],
}

AFFILIATIONS = [
    ("Northfield Institute of Technology", "United States"),
    ("Lakeside University", "Canada"),
    ("Rhine Valley University", "Germany"),
    ("Kanto Research Institute", "Japan"),
    ("Iberian Cyber Laboratory", "Spain"),
    ("Nordic Security Institute", "Sweden"),
    ("Southern Cross University", "Australia"),
    ("Alpine Data Laboratory", "Switzerland"),
    ("Danube Institute of Informatics", "Austria"),
    ("Pampas University", "Argentina"),
    ("Cape Analytics Institute", "South Africa"),
    ("Baltic Computing Center", "Estonia"),
]

FIRST = ["Ana", "Boris", "Chen", "Dana", "Elif", "Farid", "Greta", "Hiro", "Ines", "Jonas", "Kavya", "Luca",
         "Mira", "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tomas", "Uma", "Viktor", "Wen", "Yara"]
LAST = ["Alvarez", "Bauer", "Costa", "Dubois", "Eriksen", "Fischer", "Garcia", "Haddad", "Ito", "Jensen",
        "Kowalski", "Larsen", "Moreau", "Novak", "Okafor", "Petrov", "Rossi", "Sato", "Tanaka", "Varga"]

PUBLISHERS = ["IEEE", "ACM", "Springer", "Elsevier"]
PRODUCTS = ["VirusTotal", "Zeek", "Suricata", "TensorLy"]
EVENTS = ["DEF CON", "Black Hat"]
FILLER = ["we", "propose", "evaluate", "show", "study", "present", "analyze", "compare", "results", "using",
          "approach", "method", "dataset", "experiments"]


def doi_for(prefix, i):
    return f"10.5555/{prefix}.{i:03d}"


class Gen:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.titles = set()

    def sentence(self, words, n):
        picks = [self.rng.choice(words) for _ in range(n)]
        filler = self.rng.sample(FILLER, 2)
        return f"{filler[0].capitalize()} {' '.join(picks[: n // 2])} {filler[1]} {' '.join(picks[n // 2:])}."

    def title(self, theme):
        while True:
            head = self.rng.choice(theme["title_heads"])
            a, b = self.rng.sample(theme["words"], 2)
            t = f"{head} {a} and {b} analysis"
            if theme["name"] != "cybercrime" and self.rng.random() < 0.5:
                t = f"{head} {theme['phrase']} with {a} {b}"
            if t not in self.titles:
                self.titles.add(t)
                return t

    def abstract(self, theme, extras=()):
        parts = [self.sentence(theme["words"], 8) for _ in range(3)]
        for _ in range(theme.get("repeat", 0)):
            parts.insert(self.rng.randrange(len(parts) + 1), f"We revisit {theme['phrase']} in this setting.")
        parts.extend(extras)
        return " ".join(parts)

    def authors(self, n, aff_pool):
        out = []
        for _ in range(n):
            name = f"{self.rng.choice(FIRST)} {self.rng.choice(LAST)}"
            aff, country = self.rng.choice(aff_pool)
            if any(a["name"] == name for a in out):
                continue
            out.append({"name": name, "affiliation": aff, "country": country})
        return out

    def full_text(self, theme):
        paras = []
        for _ in range(3):
            paras.append(" ".join(self.sentence(theme["words"], 10) for _ in range(self.rng.randint(4, 12))))
        return "\n\n".join(paras)


def theme_record(gen, theme, doi, sid, year_range=(2015, 2023), full_text=False, extras=()):
    ti = THEMES.index(theme)
    aff_pool = AFFILIATIONS[ti * 3:ti * 3 + 3] + AFFILIATIONS[9:]
    rec = {
        "source_id": sid,
        "doi": doi,
        "title": gen.title(theme),
        "abstract": gen.abstract(theme, extras),
        "authors": gen.authors(gen.rng.randint(1, 4), aff_pool),
        "year": gen.rng.randint(*year_range),
        "publisher": gen.rng.choice(PUBLISHERS),
        "categories": gen.rng.sample(theme["categories"], gen.rng.randint(1, 2)),
        "citations": [],
        "references": [],
    }
    if full_text:
        rec["full_text"] = gen.full_text(theme)
    return rec


def off_theme_record(gen, doi, sid):
    words = OFF_THEME["words"]
    return {
        "source_id": sid,
        "doi": doi,
        "title": f"{gen.rng.choice(words).capitalize()} and {gen.rng.choice(words)} under {gen.rng.choice(words)}",
        "abstract": " ".join(gen.sentence(words, 8) for _ in range(3)),
        "authors": [{"name": "Pat Ortega", "affiliation": "Prairie Agricultural College", "country": "Canada"}],
        "year": gen.rng.randint(2015, 2023),
        "publisher": "Elsevier",
        "categories": OFF_THEME["categories"],
        "citations": [],
        "references": [],
    }


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def key_file(source, method, key):
    safe = set(string.ascii_letters + string.digits + "._-")
    enc = "".join(c if c in safe else quote(c, safe="") for c in key)
    return OUT / "sources" / source / method / f"{enc}.json"


def main():
    gen = Gen(20240517)
    if OUT.exists():
        shutil.rmtree(OUT)

    ner_extra = {0: "Samples were scanned with VirusTotal before labelling.",
                 1: "Flows were captured with Zeek and Suricata sensors.",
                 2: "The factorization uses TensorLy as a reference implementation.",
                 3: "Findings were presented at DEF CON and Black Hat."}

    core = []
    for i in range(40):
        theme = THEMES[i % 4]
        extras = [ner_extra[i % 4]] if i % 3 == 0 else []
        if theme["name"] == "cybercrime" and i % 8 == 3:
            extras.append("The Anti-Phishing Working Group (APWG) shared labelled reports.")
        core.append(theme_record(gen, theme, doi_for("core", i), f"SC-{1000 + i}", full_text=(i % 5 == 0),
                                 extras=extras))

    # Hop 1: three per theme, each referenced by two or three core documents of that theme.
    hop1 = [theme_record(gen, THEMES[j % 4], doi_for("ext", j), f"SC-{2000 + j}", full_text=(j % 4 == 1))
            for j in range(12)]
    # Hop 2: four on theme, two off theme, reached from the hop-1 documents.
    hop2 = [theme_record(gen, THEMES[j % 4], doi_for("ext", 12 + j), f"SC-{2012 + j}") for j in range(4)]
    hop2 += [off_theme_record(gen, doi_for("ext", 16 + j), f"SC-{2016 + j}") for j in range(2)]

    # Searched: two per repeated phrase; one off theme shares a phrase.
    searched = [theme_record(gen, THEMES[j // 2], doi_for("srch", j), f"S2-{3000 + j}", full_text=(j == 0))
                for j in range(5)]
    agri = off_theme_record(gen, doi_for("srch", 5), "S2-3005")
    agri["abstract"] += " A tensor decomposition of sensor grids is mentioned in passing."
    searched.append(agri)

    for j, e in enumerate(hop1):
        t = j % 4
        citing = [c for i, c in enumerate(core) if i % 4 == t][j // 4 * 3: j // 4 * 3 + 3]
        for c in citing:
            c["references"].append(e["doi"])
            e["citations"].append(c["doi"])
    for j, e in enumerate(hop2):
        parent = hop1[j % 6]
        parent["references"].append(e["doi"])
        e["citations"].append(parent["doi"])
        e["references"].append(f"10.5555/outside.{j:03d}")
    for i, c in enumerate(core):
        if i >= 4:
            c["references"].append(core[i - 4]["doi"])
            core[i - 4]["citations"].append(c["doi"])
        c["references"].append(f"10.5555/outside.{100 + i:03d}")

    everything = core + hop1 + hop2 + searched
    for rec in everything:
        write_json(key_file("scopus", "lookup", rec["doi"]), rec)

    # References lists come back as records from scopus for the first half of
    # the core, the rest are resolved through lookups of the listed DOIs.
    by_doi = {r["doi"]: r for r in everything}
    for c in core[:20]:
        refs = [by_doi[d] for d in c["references"] if d in by_doi]
        write_json(key_file("scopus", "references", c["doi"]), refs)

    # Semantic Scholar style records: partial, no full text, different ids.
    for rec in hop1[:6]:
        partial = {"source_id": "S2-" + rec["source_id"][3:], "doi": rec["doi"].upper(), "title": rec["title"],
                   "authors": [a["name"] for a in rec["authors"]], "year": rec["year"]}
        for c in rec["citations"]:
            path = key_file("s2", "references", c)
            existing = json.loads(path.read_text()) if path.exists() else []
            existing.append(partial)
            write_json(path, existing)

    # OSTI lists who cites some hop-1 documents.
    for rec in hop1[6:]:
        citers = [{"source_id": "OSTI-" + by_doi[c]["source_id"][3:], "doi": c, "title": by_doi[c]["title"]}
                  for c in rec["citations"]]
        write_json(key_file("osti", "cited_by", rec["doi"]), citers)

    queries = {THEMES[0]["phrase"]: [searched[0], searched[1], core[0]],
               THEMES[1]["phrase"]: [searched[2], searched[3], searched[1]],
               THEMES[2]["phrase"]: [searched[4], searched[5]]}
    for q, recs in queries.items():
        write_json(key_file("s2", "search", f'"{q}"'), recs)

    (OUT / "core.txt").write_text("".join(c["doi"] + "\n" for c in core))

    config = {
        "sources": {"mode": "fixture", "fixtures": "sources"},
        "core": "core.txt",
        "output": "../../out/bundled",
        "assets": {
            "ner_gazetteer": "../../assets/ner_gazetteer.tsv",
            "sme_terms": "../../assets/sme_terms.txt",
            "sme_rules": "../../assets/sme_rules.tsv",
            "templates": "../../assets/query_templates.jsonl",
        },
        "expansion": {"hops": 2, "per_hop_limit": 0, "bigram_query_count": 3, "bigram_result_limit": 10},
        "pruning": {"tau": 0.35, "clusters": 4},
        "factorization": {"k_min": 1, "K": 12, "T": 0.25, "seed": 7},
        "vectors": {"chunk_chars": 1000},
        "embedding": {"provider": "hash", "dimension": 256},
        "llm": {"provider": "mock", "script": "../../assets/mock_llm/bundled.jsonl"},
        "serve": {"host": "127.0.0.1", "port": 8080},
    }
    write_json(OUT / "config.json", config)

    gaz = ["# label<TAB>surface form"]
    gaz += [f"organization\t{a}" for a, _ in AFFILIATIONS] + ["organization\tAnti-Phishing Working Group"]
    gaz += [f"location\t{c}" for c in sorted({c for _, c in AFFILIATIONS})]
    gaz += [f"product\t{p}" for p in PRODUCTS] + [f"event\t{e}" for e in EVENTS]
    (ROOT / "assets").mkdir(exist_ok=True)
    (ROOT / "assets" / "ner_gazetteer.tsv").write_text("\n".join(gaz) + "\n")


if __name__ == "__main__":
    main()
