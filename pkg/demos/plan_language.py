"""Tour of the plan language: parsing, diagnostics, static cost, and the
canonical serialization that round-trips through the parser.

    python demos/plan_language.py
"""

from __future__ import annotations

from agentnav.workflow.grammar import parse_plan, serialize_plan, static_cost

PLAN = """
# look around, search with a bounded loop, then decide
step 1 "look around":
  rotate(90) rotate(90) rotate(90)
step 2 "search":
  while not query_scene_graph("backpack") max 10 do
    explore_frontiers()
  end
step 3 "decide":
  if proximity("sofa", 1.0, "backpack") then answer("A") else answer("B") end
"""

BROKEN = [
    'step 1 "x": while reachable((0,0), (5,5)) do rotate(90) end',
    'step 1 "x": goto(1, 2',
    'step 1 "x": while a() max 50 do while b() max 50 do ' + "f() " * 40 + "end end",
]


def main() -> None:
    res = parse_plan(PLAN)
    print("parsed", len(res.steps), "steps")
    for step in res.steps:
        print(f"  step {step.id} {step.title!r}: at most {static_cost(step.body)} statements")
    text = serialize_plan(res.steps)
    print("\ncanonical form:\n" + text)
    assert parse_plan(text).steps == res.steps
    print("round trip: identical\n")
    for src in BROKEN:
        print("input:", src[:70] + ("..." if len(src) > 70 else ""))
        for d in parse_plan(src).diagnostics:
            print("  ", d)


if __name__ == "__main__":
    main()
