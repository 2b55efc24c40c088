"""Structural features of a CNF formula."""

from satselect.features import CnfFormula, extract_features, parse_dimacs

text = """c a small example
p cnf 4 5
1 -2 0
2 3 0
-1 -3 4 0
-4 0
1 2 -3 0
"""
formula = parse_dimacs(text)
print(formula.num_vars, "variables,", formula.num_clauses, "clauses")

for name, value in extract_features(formula).items():
    print(f"{name:26s} {value:.4g}")

# renaming variables (x1 <-> x4) and reversing clause order changes nothing
swap = {1: 4, 4: 1}
renamed = CnfFormula(formula.num_vars,
                     [tuple((1 if l > 0 else -1) * swap.get(abs(l), abs(l)) for l in c)
                      for c in reversed(formula.clauses)])
print(renamed.to_dimacs())
print("invariant:", extract_features(renamed) == extract_features(formula))
