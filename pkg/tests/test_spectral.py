import json
import math

import numpy as np
import pytest

from trapfpt import spectral
from trapfpt.spectral import (
    BracketExhausted,
    CacheCorrupt,
    EigenMode,
    ZeroStiffness,
    boundary_function,
    build_eigensystem,
    coefficient,
    eigenfunction_eval,
    find_eigenvalues,
    load_eigensystem,
    normalization,
    orthonormality_matrix,
    weighted_integral,
)


def test_boundary_function_values(golden):
    assert boundary_function(0.0, 0.7) == pytest.approx(1.0, rel=1e-14)
    # U(-1, 3/2, x) = x - 3/2 vanishes at x = 3/2
    assert boundary_function(1.0, 1.5) == pytest.approx(0.0, abs=1e-13)
    # exact polynomial: U(-1, 3/2, 0.012) = 0.012 - 1.5
    assert boundary_function(1.0, 0.012) == pytest.approx(-1.488, rel=1e-13)
    assert boundary_function(1.0, 0.012) < 0


def test_boundary_function_rejects_zero_kappa():
    with pytest.raises(ZeroStiffness):
        boundary_function(1.0, 0.0)


def test_find_eigenvalues_kappa_15_polynomial_zero():
    roots = find_eigenvalues(1.5, 3)
    assert len(roots) == 3
    assert all(r2 > r1 for r1, r2 in zip(roots, roots[1:]))
    # alpha = 1 is an exact zero; here it is the first one
    assert min(abs(r - 1.0) for r in roots) <= 1e-10
    assert roots[0] <= 1.0 + 1e-12


def test_find_eigenvalues_against_oracle_values(golden):
    roots = find_eigenvalues(0.012, 2)
    assert roots[0] == pytest.approx(golden[("alpha", 0.012, 1)], abs=1e-10)
    assert roots[1] == pytest.approx(golden[("alpha", 0.012, 2)], abs=1e-10)


def test_alpha1_ordering_in_kappa(golden):
    # dimensionless decay is faster for stiffer traps: alpha_1 grows with
    # kappa (and vanishes in the potential-free limit)
    a1 = {k: find_eigenvalues(k, 1)[0] for k in (0.003, 0.012, 0.024, 0.049)}
    ordered = [a1[k] for k in (0.003, 0.012, 0.024, 0.049)]
    assert all(b > a for a, b in zip(ordered, ordered[1:]))
    assert a1[0.049] == pytest.approx(golden[("alpha", 0.049, 1)], abs=1e-10)


def test_find_eigenvalues_validation():
    with pytest.raises(ZeroStiffness):
        find_eigenvalues(0.0, 3)
    with pytest.raises(ValueError):
        find_eigenvalues(0.012, 0)
    with pytest.raises(ValueError):
        find_eigenvalues(0.012, 2, root_tol=-1.0)


def test_bracket_exhausted_when_no_sign_changes(monkeypatch):
    monkeypatch.setattr(
        spectral, "_boundary_values", lambda alphas, kappa, policy: np.ones_like(np.atleast_1d(alphas))
    )
    with pytest.raises(BracketExhausted):
        find_eigenvalues(0.012, 2)


def test_normalization_closed_form_kappa15():
    # alpha = 1 at kappa = 1.5: N^2 = 2.25 * int z^2 e^{-1.5 z^2} (z^2-1)^2 dz,
    # reducible to erfc moments I_n = int_1^inf z^n e^{-k z^2} dz
    k = 1.5
    e = math.exp(-k)
    erfc = math.erfc(math.sqrt(k))
    i2 = e / (2 * k) + math.sqrt(math.pi) * erfc / (4 * k ** 1.5)
    i4 = e / (2 * k) + 3 * e / (4 * k * k) + 3 * math.sqrt(math.pi) * erfc / (8 * k ** 2.5)
    i6 = e / (2 * k) + 5 * e / (4 * k * k) + 15 * e / (8 * k ** 3) + \
        15 * math.sqrt(math.pi) * erfc / (16 * k ** 3.5)
    expected = math.sqrt(2.25 * (i6 - 2 * i4 + i2))
    assert normalization(1.5, 1.0) == pytest.approx(expected, rel=1e-10)


def test_build_matches_golden_constants(eigensystem, golden):
    system = eigensystem(0.012, 25)
    assert system.modes[0].norm == pytest.approx(golden[("N", 0.012, 1)], rel=1e-11)
    assert system.modes[0].amp == pytest.approx(golden[("c", 0.012, 1)], rel=1e-11)
    assert eigenfunction_eval(system, 1, 5.0) == pytest.approx(
        golden[("psi_at_z5", 0.012, 1)], rel=1e-11)
    assert system.modes[0].lambda_tau == 2.0 * system.modes[0].alpha


def test_standalone_ops_agree_with_build(eigensystem):
    system = eigensystem(0.012, 25)
    mode = system.modes[2]
    assert normalization(0.012, mode.alpha) == pytest.approx(mode.norm, rel=1e-9)
    assert coefficient(0.012, mode) == pytest.approx(mode.amp, rel=1e-8)


def test_eigenfunctions_vanish_at_boundary(eigensystem):
    system = eigensystem(0.012, 25)
    psi1 = np.array([abs(eigenfunction_eval(system, n, 1.0)) for n in range(1, 26)])
    # root_tol-level alpha error propagates through dU/dalpha = O(1..10)
    assert np.all(psi1 <= 1e-7)
    with pytest.raises(IndexError):
        eigenfunction_eval(system, 26, 2.0)
    with pytest.raises(IndexError):
        eigenfunction_eval(system, 0, 2.0)
    with pytest.raises(ValueError):
        eigenfunction_eval(system, 1, 0.5)


def test_orthonormality_through_public_ops(eigensystem):
    system = eigensystem(0.012, 25)
    quad_tol = system.quad_tol
    for n in (1, 2, 5):
        val = weighted_integral(
            lambda z, n=n: eigenfunction_eval(system, n, z) ** 2,
            0.012, alpha_max=system.modes[n - 1].alpha)
        assert abs(val - 1.0) <= 2 * quad_tol
    cross = weighted_integral(
        lambda z: eigenfunction_eval(system, 1, z) * eigenfunction_eval(system, 2, z),
        0.012, alpha_max=system.modes[1].alpha, scale_floor=1.0)
    assert abs(cross) <= 2 * quad_tol


def test_orthonormality_matrix(eigensystem):
    system = eigensystem(0.012, 25)
    gram = orthonormality_matrix(system, 6)
    assert np.max(np.abs(gram - np.eye(6))) <= 2 * system.quad_tol


def test_build_eigensystem_rejects_zero_kappa(tmp_path):
    with pytest.raises(ZeroStiffness, match="inapplicable"):
        build_eigensystem(0.0, 5, cache_dir=tmp_path)


def test_fifty_extends_twenty_five(eigensystem):
    s25 = eigensystem(0.012, 25)
    s50 = eigensystem(0.012, 50)
    assert np.max(np.abs(s50.alphas()[:25] - s25.alphas())) <= 1e-10
    assert np.all(np.diff(s50.alphas()) > 0)


def test_cache_round_trip_bit_identical(tmp_path):
    built = build_eigensystem(0.3, 4, cache_dir=tmp_path)
    path = next(tmp_path.glob("eigen_*.json"))
    loaded = load_eigensystem(path)
    assert loaded == built
    # schema is the public contract
    doc = json.loads(path.read_text())
    assert set(doc) == {"kappa", "count", "root_tol", "quad_tol", "z_max", "modes"}
    assert set(doc["modes"][0]) == {"n", "alpha", "N", "c"}
    assert doc["count"] == 4


def test_cache_corrupt_is_recomputed(tmp_path):
    built = build_eigensystem(0.3, 3, cache_dir=tmp_path)
    path = next(tmp_path.glob("eigen_*.json"))
    path.write_text("{ not json")
    with pytest.raises(CacheCorrupt):
        load_eigensystem(path)
    spectral._memory_cache.clear()
    again = build_eigensystem(0.3, 3, cache_dir=tmp_path)
    assert again == built
    assert load_eigensystem(path) == built  # overwritten with a good document


def test_eigensystem_invariants_enforced():
    good = dict(n=1, alpha=0.5, lambda_tau=1.0, norm=1.0, amp=1.0)
    with pytest.raises(ValueError):
        spectral.EigenSystem(
            kappa=0.012,
            modes=(EigenMode(**good), EigenMode(n=2, alpha=0.4, lambda_tau=0.8, norm=1.0, amp=1.0)),
            root_tol=1e-10, quad_tol=1e-10, z_max=100.0)
