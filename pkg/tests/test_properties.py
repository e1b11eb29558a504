"""Reduced-scale runs of the randomised sweeps; the acceptance run uses full size."""

import suites


def test_safety_implies_exhaustivity():
    r = suites.safety_implies_exhaustivity(60, seed=11)
    assert r.ok, r.failures[:1]
    # both sides of the implication are populated
    assert r.stats["safe"] >= 20 and r.stats["not_exhaustive"] >= 20


def test_irsc_matches_oracle():
    r = suites.irsc_matches_oracle(16, seed=12, max_length=6)
    assert r.ok, r.failures[:1]
    assert 0 < r.stats["violating"] < r.total


def test_abv_size_law():
    r = suites.abv_size_law(20, seed=13)
    assert r.ok, r.failures[:1]
