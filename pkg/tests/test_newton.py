"""Q-equations, gates, Newton steps, trace records, and the full driver."""

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgtorus.basis import FrequencyBasis, select_basis
from kgtorus.exactfield import QuadFieldElement
from kgtorus.fourier import CosineSeries, Nonlinearity, canonical, residual
from kgtorus.linop import frequency_modulation_poly
from kgtorus.newton import (
    SolverParameters,
    SolutionState,
    b_jacobian,
    b_matrix,
    diophantine_gate,
    frequency_jacobian,
    newton_step,
    pinned_amplitudes,
    q_solve,
    quadratic_gate,
    run,
    small_divisor_fit,
    _site,
)

NL2 = Nonlinearity(2)
DELTA = 1e-2


@pytest.fixture(scope="module")
def basis1():
    return FrequencyBasis(d=1, b=1, p=2, modes=((1,),))


@pytest.fixture(scope="module")
def basis3():
    return select_basis(1, 3, 2, bound=6)


@pytest.fixture(scope="module")
def run3(basis3):
    params = SolverParameters(
        delta=DELTA, a=(0.8 * DELTA, -0.6 * DELTA, 0.7 * DELTA), r_max=2
    )
    return run(params, basis3, NL2)


def seed(basis, amps):
    return CosineSeries.initial_ansatz(basis.modes, list(amps))


# ---------------------------------------------------------------------------
# parameters


def test_parameters_reject_bad_exponent_order():
    good = dict(delta=DELTA, a=(5e-3,))
    SolverParameters(**good)
    with pytest.raises(ValueError):
        SolverParameters(**good, tau=0.7)          # tau > 1/s
    with pytest.raises(ValueError):
        SolverParameters(**good, kappa=0.9)        # kappa > sigma
    with pytest.raises(ValueError):
        SolverParameters(**good, c=1.0)            # c = 1
    with pytest.raises(ValueError):
        SolverParameters(**good, sigma=0.6, kappa=0.65)


def test_parameters_reject_bad_amplitudes():
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=())
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(0.0,))
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(2e-2,))   # |a| >= delta
    with pytest.raises(ValueError):
        SolverParameters(delta=0.5, a=(1e-3,))     # delta >= delta0


def test_parameters_reject_bad_knobs():
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(5e-3,), accept_ratio=1.5)
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(5e-3,), theta_rel=0.0)
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(5e-3,), M=1)
    with pytest.raises(ValueError):
        SolverParameters(delta=DELTA, a=(5e-3,), beta=1.0)


def test_first_scale_matches_log_power():
    p = SolverParameters(delta=DELTA, a=(5e-3,))
    assert p.n_first == math.ceil(abs(math.log(DELTA)) ** 1.5) == 10
    assert p.accept_bar == DELTA
    assert SolverParameters(delta=DELTA, a=(5e-3,), accept_ratio=0.3).accept_bar == 0.3


# ---------------------------------------------------------------------------
# Q-equations


def test_q_solve_single_mode_closed_form(basis1):
    # stored coefficient a/2 at the pinned site makes the cubic term 3a^3/8,
    # so omega^2 = 2 + (2/a) 3a^3/8 = 2 + 3a^2/4
    a = 5e-3
    om = q_solve(seed(basis1, [a]), [a], basis1, NL2)
    assert om.shape == (1,)
    assert abs(om[0] - math.sqrt(2.0 + 0.75 * a * a)) < 1e-15


def test_q_solve_small_amplitude_limit(basis1):
    for a in (1e-3, 1e-4, 1e-5):
        om = q_solve(seed(basis1, [a]), [a], basis1, NL2)
        assert abs(om[0] - math.sqrt(2.0)) <= a * a


def test_q_solve_matches_modulation_poly(basis3):
    # omega_k = sqrt(s_k + 2 G_k / a_k) = sqrt(s_k) + Omega_k + O(delta^4)
    amps = [0.8 * DELTA, -0.6 * DELTA, 0.7 * DELTA]
    om = q_solve(seed(basis3, amps), amps, basis3, NL2)
    shift = frequency_modulation_poly(basis3, amps, NL2)
    om0 = basis3.omega0_floats()
    assert np.allclose(om - om0, shift, atol=10 * DELTA ** 4)


def test_q_solve_validates_input(basis3):
    amps = [5e-3, 5e-3, 5e-3]
    with pytest.raises(ValueError):
        q_solve(seed(basis3, amps), amps[:2], basis3, NL2)
    with pytest.raises(ValueError):
        q_solve(seed(basis3, amps), [5e-3, 0.0, 5e-3], basis3, NL2)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(min_value=1e-4, max_value=9e-3))
def test_q_solve_kills_tangential_residual(a):
    basis = FrequencyBasis(d=1, b=1, p=2, modes=((1,),))
    u = seed(basis, [a])
    om = q_solve(u, [a], basis, NL2)
    F = residual(u, om, NL2)
    assert abs(F.get(_site(1, 0, (1,)))) < 1e-12


def test_b_matrix_closed_form(basis3):
    # p = 2: B_k = 3 a_k^2 + 6 sum_{i != k} a_i^2
    a = np.array([0.8, -0.6, 0.7]) * DELTA
    B = b_matrix(a, basis3, NL2)
    expect = np.array(
        [3 * a[k] ** 2 + 6 * sum(a[i] ** 2 for i in range(3) if i != k) for k in range(3)]
    )
    assert np.allclose(B, expect, rtol=1e-12)


def test_b_jacobian_eigenvalues_at_ones(basis3):
    # dB/da at a = 1: q I + Q (ee^T - I) with q = 6, Q = 12, so the spectrum
    # is {q + Q(b-1)} once and {q - Q} with multiplicity b - 1
    J = b_jacobian(np.ones(3), basis3, NL2)
    eig = np.sort(np.linalg.eigvalsh(0.5 * (J + J.T)))
    assert np.allclose(eig, [-6.0, -6.0, 30.0], atol=1e-8)


def test_frequency_jacobian_single_mode_closed_form(basis1):
    # omega(a) = sqrt(2 + 3a^2/4), so domega/da = 3a / (4 omega)
    a = 5e-3
    fj = frequency_jacobian([a], basis1, NL2)
    expect = 3.0 * a / (4.0 * math.sqrt(2.0 + 0.75 * a * a))
    assert abs(fj.matrix[0, 0] - expect) < 1e-8 * abs(expect)
    assert fj.det == pytest.approx(fj.matrix[0, 0])
    assert fj.richardson_error < 1e-10


def test_frequency_jacobian_det_scaling(basis3):
    # det(domega/da) is homogeneous of degree (p-1) b = 3 in the amplitude
    a0 = np.array([0.8, -0.6, 0.7])
    deltas = [1e-2, 3e-3, 1e-3]
    dets = [abs(frequency_jacobian(d * a0, basis3, NL2).det) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(dets), 1)[0]
    assert abs(slope - 3.0) < 0.05 * 3.0


def test_pinned_amplitudes_roundtrip(basis3):
    amps = [0.8 * DELTA, -0.6 * DELTA, 0.7 * DELTA]
    got = pinned_amplitudes(seed(basis3, amps), basis3)
    assert np.allclose(got, amps, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# gates


def test_diophantine_gate_passes_for_basis_frequencies(basis3):
    rep = diophantine_gate(basis3.omega0_floats(), 12, xi=0.01)
    assert rep.passed
    assert rep.worst_ratio >= 1.0
    assert rep.n_checked > 0


def test_diophantine_gate_fails_for_rational_vector():
    rep = diophantine_gate([1.0, 1.5], 5, xi=0.01)
    assert not rep.passed
    assert rep.worst_ratio < 1.0
    # the witness certifies: n . omega is within xi |n|^-gamma of an integer
    x = float(np.dot(rep.worst_n, [1.0, 1.5]))
    m = max(abs(c) for c in rep.worst_n)
    assert abs(x - round(x)) * m ** rep.gamma < rep.xi


def test_small_divisor_fit_sane():
    rep = small_divisor_fit([math.sqrt(2.0)], d=1, N=20)
    assert rep.exponent > 0
    assert rep.constant > 0
    # n = +-1, +-5 hit the dispersion exactly (Pell: 2n^2 - 1 a square); the
    # hits are excised, so every recorded minimum stays above the cut
    assert set(rep.shell_minima) == set(range(1, 21))
    assert all(v >= 1e-10 for v in rep.shell_minima.values())


def test_quadratic_gate_passes_for_modulated_frequency(basis3):
    # at omega^(0) the pure-square relations (e.g. chi_1^2 - 2) vanish
    # identically; the amplitude shift lifts them by order delta^p, which is
    # the margin the bound delta^p B^{-C'} is calibrated against
    amps = [0.8 * DELTA, -0.6 * DELTA, 0.7 * DELTA]
    om = q_solve(seed(basis3, amps), amps, basis3, NL2)
    rep = quadratic_gate(om, B=3, Cprime=10.0, delta=DELTA, samples=200)
    assert rep.passed
    assert rep.min_value > rep.bound
    assert rep.argmin            # some witness polynomial was the closest
    # the closest polynomial is delta^p-scale: a lifted square relation
    assert rep.min_value < 10 * DELTA ** 2


def test_quadratic_gate_rejects_exact_resonance():
    # omega_2 = 2 omega_1 kills P = chi_2^2 - 4 chi_1^2 identically
    w1 = QuadFieldElement.sqrt(2)
    exact = [w1, w1 * 2]
    om = [e.to_float() for e in exact]
    rep = quadratic_gate(om, B=3, Cprime=10.0, delta=DELTA, samples=100,
                         omega_exact=exact)
    assert not rep.passed
    assert rep.min_value == 0.0
    assert rep.n_exact > 0
    assert rep.argmin            # the zero polynomial is never a witness


def test_quadratic_gate_rejects_trivial_B():
    with pytest.raises(ValueError):
        quadratic_gate([1.4, 3.1], B=1, Cprime=10.0, delta=DELTA)


# ---------------------------------------------------------------------------
# Newton steps and the driver


def test_run_contracts_residual(run3):
    assert run3.success
    steps = [s for s in run3.trace.steps() if s["accepted"]]
    norms = [s["F_norm"] for s in steps]
    assert len(norms) >= 3
    # first step quadratic-regime contraction, later steps at least delta
    assert norms[1] / norms[0] <= DELTA ** 1.5
    for prev, cur in zip(norms[1:], norms[2:]):
        assert cur / prev <= DELTA


def test_run_pins_and_kills_tangential_sites(run3, basis3):
    u, om = run3.state.u, run3.state.omega
    F = residual(u, om, NL2)
    for k, jk in enumerate(basis3.modes):
        key, _ = canonical(_site(basis3.b, k, jk))
        assert float(u.coeffs[key]) == run3.a[k] / 2.0   # exact pin
        assert abs(F.get(_site(basis3.b, k, jk))) < 1e-12


def test_run_support_stays_inside_recorded_scale(run3, basis3):
    steps = run3.trace.steps()
    n_max = max(s["N_active"] for s in steps)
    s_sites = set(basis3.tangential_sites())
    for x in run3.state.u.coeffs:
        assert max(abs(c) for c in x) <= n_max or x in s_sites


def test_run_preserves_odd_parity(run3, basis3):
    # cubic nonlinearity: the time-frequency parity of the seed is conserved
    for x in run3.state.u.coeffs:
        assert sum(x[: basis3.b]) % 2 == 1


def test_run_scales_nondecreasing(run3):
    steps = run3.trace.steps()
    ns = [s["N"] for s in steps[1:]]
    assert ns == sorted(ns)
    for s in steps[1:]:
        assert s["N_active"] >= s["N"]


def test_trace_residuals_recomputable(run3, basis3):
    # every recorded step carries the attempted iterate; rebuilding u from the
    # snapshot must reproduce the recorded residual norm
    for rec in run3.trace.steps():
        u = CosineSeries(
            (basis3.b, basis3.d),
            {tuple(x): v for x, v in rec["u"]},
        )
        F = residual(u, rec["omega"], NL2)
        assert F.norm() == pytest.approx(rec["F_norm"], rel=2e-2, abs=1e-18)


def test_trace_serialization_roundtrip(run3, tmp_path):
    jl = tmp_path / "trace.jsonl"
    cv = tmp_path / "trace.csv"
    run3.trace.to_jsonl(jl)
    run3.trace.to_csv(cv)
    kinds = set()
    with open(jl, encoding="utf-8") as fh:
        for line in fh:
            kinds.add(json.loads(line)["kind"])
    assert "step" in kinds and kinds <= {"step", "gate", "excision", "jitter"}
    with open(cv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(run3.trace.steps())
    assert {"r", "N", "N_active", "F_norm", "omega_1"} <= set(rows[0])
    for row, rec in zip(rows, run3.trace.steps()):
        assert float(row["F_norm"]) == pytest.approx(rec["F_norm"], rel=1e-12)


def test_newton_step_fixed_point_yields_tiny_update(run3, basis3):
    params = SolverParameters(
        delta=DELTA, a=tuple(run3.a), r_max=2
    )
    state = SolutionState(run3.state.u, run3.state.omega, 0, run3.state.F)
    _, rep = newton_step(state, 10, params, basis3, NL2)
    assert rep["du_norm"] < 1e-12
    assert rep["F_norm"] <= run3.state.F.norm()


def test_run_r_max_zero_records_seed_only(basis1):
    params = SolverParameters(delta=DELTA, a=(5e-3,), r_max=0)
    res = run(params, basis1, NL2)
    assert res.success
    steps = res.trace.steps()
    assert len(steps) == 1
    assert steps[0]["r"] == 0
    assert steps[0]["F_norm"] == pytest.approx(
        residual(res.state.u, res.state.omega, NL2).norm(), rel=1e-12
    )


def test_run_single_mode_converges(basis1):
    params = SolverParameters(delta=DELTA, a=(5e-3,), r_max=2)
    res = run(params, basis1, NL2)
    assert res.success
    accepted = [s for s in res.trace.steps() if s["accepted"]]
    assert accepted[-1]["F_norm"] < 1e-12
    assert residual(res.state.u, res.state.omega, NL2).norm() == pytest.approx(
        accepted[-1]["F_norm"], rel=2e-2, abs=1e-18
    )


def test_run_with_higher_corrections(basis1):
    # quartic correction with coefficient series delta at the origin; the
    # even power breaks the parity restriction but not the contraction
    alpha = CosineSeries((1, 1), {(0, 0): DELTA})
    nl = Nonlinearity(2, ((4, alpha),))
    params = SolverParameters(delta=DELTA, a=(5e-3,), r_max=2)
    res = run(params, basis1, nl)
    assert res.success
    accepted = [s for s in res.trace.steps() if s["accepted"]]
    assert accepted[-1]["F_norm"] < DELTA * accepted[0]["F_norm"]
    # frequency still solves the tangential equation with the quartic included
    F = residual(res.state.u, res.state.omega, nl)
    assert abs(F.get(_site(1, 0, (1,)))) < 1e-12
    parities = {sum(x[:1]) % 2 for x in res.state.u.coeffs}
    assert parities == {0, 1}


def test_run_excises_until_budget_on_hopeless_gate(basis1):
    # xi so large the Diophantine gate can never pass: every attempt jitters
    # the amplitudes and the run reports failure once the budget is gone
    params = SolverParameters(
        delta=DELTA, a=(5e-3,), r_max=2, xi=10.0, excision_budget=2
    )
    res = run(params, basis1, NL2)
    assert not res.success
    assert "budget" in res.message
    events = res.trace.events()
    assert sum(1 for e in events if e["kind"] == "excision") == 3
    assert sum(1 for e in events if e["kind"] == "jitter") == 2
    gates = [e for e in events if e["kind"] == "gate"]
    assert gates and not any(g["passed"] for g in gates)


def test_run_refuses_unverified_basis():
    bad = FrequencyBasis(d=1, b=2, p=2, modes=((1,), (2,)), verified={"i": False})
    params = SolverParameters(delta=DELTA, a=(5e-3, 5e-3), r_max=1)
    with pytest.raises(ValueError):
        run(params, bad, NL2)
