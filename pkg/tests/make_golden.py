"""Regenerate golden prompt files. Review the diff by hand before committing."""
from pathlib import Path

from semedge.llm.templates import decomposer_bindings, load_template, render_prompt

GOLDEN = Path(__file__).parent / "golden"

GRAPH_DESCRIPTION = ("A citation graph of machine learning publications. Nodes represent scientific papers, "
                     "with their abstracts as text. Edges indicate that one paper cites the other")
REQUIREMENTS = "(1) Meaningful. (2) Feasible. (3) Distinct."
CANDIDATES = ("1. Methodology Similarity: The two papers rely on comparable algorithms.\n"
              "2. Performance Benchmark: The papers report results on the same datasets.")
RELATION_LIST = "1. Methodology Similarity: The two papers rely on comparable algorithms.\n2. Shared Application Domain: The papers target the same application area."
NODE1 = "Title: Learning to walk. Abstract: A policy gradient method for legged robots."
NODE2 = "Title: Gait control. Abstract: Reinforcement learning for *quadruped* locomotion."

CASES = {
    "generator": {"graph_description": GRAPH_DESCRIPTION},
    "discriminator": {"graph_description": GRAPH_DESCRIPTION, "requirements": REQUIREMENTS,
                      "candidate_relations": CANDIDATES},
    "decomposer": decomposer_bindings(RELATION_LIST, NODE1, NODE2),
}


def render(role):
    return render_prompt(load_template(role), CASES[role])


if __name__ == "__main__":
    for role in CASES:
        (GOLDEN / f"{role}.txt").write_text(render(role), encoding="utf-8")
