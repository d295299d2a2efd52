#!/usr/bin/env python3
"""Regenerates stats_reference.hpp: frozen scipy values for the Shapiro-Wilk
and paired t-test cross-checks. Requires scipy; run from tests/:

    python3 gen_stats_reference.py > stats_reference.hpp
"""
import numpy as np
from scipy import stats

rng = np.random.default_rng(20240817)


def emit_vector(name, values):
    body = ", ".join(repr(float(v)) for v in values)
    print(f"        {{ {body} }},")


print("// Generated by gen_stats_reference.py (scipy %s). Do not edit by hand." % __import__("scipy").__version__)
print("#pragma once")
print()
print("#include <vector>")
print()
print("namespace stats_reference {")
print()
print("struct ShapiroCase { std::vector<double> sample; double w; double p; };")
print("struct TTestCase { std::vector<double> a; std::vector<double> b; double t; double p; };")
print()

cases = []
for trial in range(50):
    n = int(rng.integers(3, 200))
    kind = trial % 4
    if kind == 0:
        x = rng.normal(size=n)
    elif kind == 1:
        x = rng.exponential(size=n)
    elif kind == 2:
        x = rng.uniform(size=n) ** 3
    else:
        x = rng.standard_t(df=2, size=n)
    w, p = stats.shapiro(x)
    cases.append((x, w, p))

print("inline const std::vector<ShapiroCase>& shapiro_cases() {")
print("    static const std::vector<ShapiroCase> k = {")
for x, w, p in cases:
    vals = ", ".join(repr(float(v)) for v in x)
    print(f"        {{{{ {vals} }}, {float(w)!r}, {float(p)!r}}},")
print("    };")
print("    return k;")
print("}")
print()

tcases = []
for trial in range(50):
    n = int(rng.integers(2, 80))
    a = rng.normal(size=n)
    b = a + rng.normal(scale=0.6, size=n) + (0.1 if trial % 2 else 0.0)
    t, p = stats.ttest_rel(a, b)
    tcases.append((a, b, t, p))

print("inline const std::vector<TTestCase>& ttest_cases() {")
print("    static const std::vector<TTestCase> k = {")
for a, b, t, p in tcases:
    va = ", ".join(repr(float(v)) for v in a)
    vb = ", ".join(repr(float(v)) for v in b)
    print(f"        {{{{ {va} }}, {{ {vb} }}, {float(t)!r}, {float(p)!r}}},")
print("    };")
print("    return k;")
print("}")
print()
print("// Regularly spaced sample: high W. Exponential sample: strong rejection.")
w_reg, p_reg = stats.shapiro(np.arange(1.0, 21.0))
print(f"inline constexpr double regular_sample_w = {float(w_reg)!r};")
exp_sample = np.random.default_rng(7).exponential(size=50)
w_exp, p_exp = stats.shapiro(exp_sample)
vals = ", ".join(repr(float(v)) for v in exp_sample)
print(f"inline const std::vector<double>& exp_sample() {{ static const std::vector<double> k = {{ {vals} }}; return k; }}")
print(f"inline constexpr double exp_sample_p = {float(p_exp)!r};")
print()
print("}  // namespace stats_reference")
