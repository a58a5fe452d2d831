"""Smoke test for the compiled extension. Run after `maturin develop` (see README)."""

import os
import struct
import json
import tempfile

import argmine


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok: {what}")


check(len(argmine.TASKS) == 8, "eight tasks")
check(len(argmine.labels("FD")) == 20, "twenty fallacies")

span, fallback = argmine.extract("Sure. <|ANSWER|> premise <|ANSWER|>")
check((span, fallback) == ("premise", False), "extract")
check(argmine.normalize(span, "ACC") == "Premise", "normalize alias")
check(argmine.normalize("banana", "ACC") is None, "unknown answer")
p = argmine.parse("x1", "SD", "<|ANSWER|> against <|ANSWER|>")
check(p["status"] == "ok" and p["label"] == "Against", "parse")

prompt = argmine.render("SD", {"topic": "homework", "sentence": "It helps."})
check(prompt.count(argmine.ANSWER_TOKEN) == 2 and "homework" in prompt, "render")

pl = argmine.plan(
    "CD",
    {"Claim": {"iam": 1659, "ibm_claim": 252, "ibm_argument": 89},
     "Non-claim": {"iam": 1933, "ibm_claim": 54, "ibm_argument": 13}},
    4000,
)
check(pl["quotas"]["Claim"]["iam"] == 1659 and pl["targets"]["Non-claim"] == 2000, "plan")

preset = argmine.emit_preset("DELLA II")
check(preset["hard"] == {"rho": 0.9, "eps": 0.1, "w": 0.2}, "preset")

vals = [0.5, -0.25, 1.0, 0.0, 2.0]
check(argmine.dare(vals, 1.0, 3) == vals, "dare at density 1")
out = argmine.della(vals, 0.5, 0.2, 3)
check(all(o == 0.0 or abs(o * pr - v) < 1e-12 for o, v, pr in
          zip(out, vals, argmine.keep_probabilities(vals, 0.5, 0.2))), "della rescaling")

t = argmine.ConfusionTable("SD")
t.add("For", "For")
t.add("Against", "For")
t.add("Against", None)
check(t.precision() == (1, 3) and t.recall() == (1, 3) and len(t) == 3, "confusion table")

m = argmine.score_fd_multi([(["false dilemma"], ["false dilemma", "hasty generalization"])])
check(m["precision"] == 1.0 and m["recall"] == 0.5, "multi-prediction scoring")

tiers = argmine.classify_difficulty({"ACC": [0.5, 0.6], "ET": [0.3, 0.4], "SD": [0.7, 0.8]},
                                    {"ET": "medium"})
check(tiers == {"ACC": "medium", "ET": "medium", "SD": "easy"}, "tiers")


def write_checkpoint(path, values):
    data = struct.pack(f"<{len(values)}f", *values)
    header = json.dumps({"w": {"dtype": "F32", "shape": [len(values)], "data_offsets": [0, len(data)]}}).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(header)) + header + data)


with tempfile.TemporaryDirectory() as d:
    base = os.path.join(d, "base.safetensors")
    tuned = os.path.join(d, "acc.safetensors")
    write_checkpoint(base, [1.0, 2.0, 3.0])
    write_checkpoint(tuned, [1.5, 2.0, 2.0])
    man = argmine.merge(base, {"ACC": tuned}, "DARE I", 7, os.path.join(d, "merged.safetensors"))
    check(man["models"][0]["tier"] == "medium" and os.path.exists(man["output"]), "merge")

try:
    argmine.emit_preset("nope")
except ValueError as e:
    check("nope" in str(e), "errors surface as ValueError")
else:
    raise SystemExit("FAIL: expected ValueError")

print("smoke test passed")
