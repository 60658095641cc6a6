import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmemchan import linalg
from qmemchan.channels import (
    PAULI,
    ChannelSpec,
    MarkovChannelSpec,
    ValidationError,
    apply_memory_channel,
    apply_memoryless,
    apply_product_channel,
    build_markov_channel,
    build_shift_channel,
    complete_unitary,
    depolarizing_spec,
    dilation_from_kraus,
    factorized_spec,
    identity_channel,
    induced_memory_map,
    is_fixed_point_channel,
    markov_counterpart,
    memory_state_after,
    run_channel,
    step_joint,
    transfer_matrix,
)
from qmemchan.linalg import DimensionError, partial_trace, trace_distance
from qmemchan.sampling import haar_unitary, pure_state, random_density, random_stochastic

from conftest import bell_state, seeded_density, seeded_unitary

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SYMMETRIC = [[0.9, 0.1], [0.1, 0.9]]


def markov(vs, p=SYMMETRIC, init=(0.5, 0.5)):
    return MarkovChannelSpec(np.array(p), tuple(PAULI[v] if isinstance(v, str) else v for v in vs), np.array(init))


def random_markov(rng, labels=2):
    vs = [haar_unitary(2, rng) for _ in range(labels)]
    return MarkovChannelSpec(random_stochastic(labels, rng), vs, rng.dirichlet(np.ones(labels)))


def random_spec(rng, d_q=2, d_m=2, d_e=2):
    mem = random_density(d_m, rng)
    return ChannelSpec(d_q, d_m, d_e, (haar_unitary(d_q * d_m * d_e, rng),), linalg.ket(0, d_e), mem)


# -- memoryless ---------------------------------------------------------------------

def test_memoryless_identity():
    rho = seeded_density(2, 1)
    assert np.allclose(apply_memoryless(np.eye(4), rho).mat, rho)


def test_memoryless_swap_outputs_environment():
    for seed in range(3):
        out = apply_memoryless(linalg.swap(2, 2), seeded_density(2, seed))
        assert np.allclose(out.mat, linalg.projector(0, 2))


def test_memoryless_cnot_on_plus():
    plus = np.full((2, 2), 0.5, dtype=complex)
    assert np.allclose(apply_memoryless(CNOT, plus).mat, np.eye(2) / 2)


def test_memoryless_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply_memoryless(np.eye(3), np.eye(2) / 2)


def test_product_channel_single_use_matches_memoryless():
    u, rho = seeded_unitary(4, 2), seeded_density(2, 3)
    assert np.allclose(apply_product_channel(u, rho, 1).mat, apply_memoryless(u, rho).mat, atol=1e-12)


def test_product_channel_acts_independently():
    u = seeded_unitary(6, 4)  # d_q = 2, d_e = 3
    r1, r2 = seeded_density(2, 5), seeded_density(2, 6)
    out = apply_product_channel(u, np.kron(r1, r2), 2, d_q=2)
    expected = np.kron(apply_memoryless(u, r1).mat, apply_memoryless(u, r2).mat)
    assert np.max(np.abs(out.mat - expected)) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_product_channel_identity(n):
    rho = seeded_density(2**n, n)
    assert np.allclose(apply_product_channel(np.eye(2), rho, n, d_q=2).mat, rho)


# -- memory channels ----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_factorized_memory_traces_out(seed):
    rng = np.random.default_rng(seed)
    u_qe, u_m = haar_unitary(4, rng), haar_unitary(2, rng)
    spec = factorized_spec(u_qe, u_m, 2, 2, 2, random_density(2, rng))
    rho = pure_state(8, rng)
    out = apply_memory_channel(spec, rho, n=3)
    assert np.max(np.abs(out.mat - apply_product_channel(u_qe, rho, 3, d_q=2).mat)) <= 1e-10


def test_perfect_memory_swap_single_use():
    omega, rho = seeded_density(2, 1), seeded_density(2, 2)
    spec = build_shift_channel(2, omega)
    out, mem = run_channel(spec, rho, n=1)
    assert np.allclose(out.mat, omega, atol=1e-12)
    assert np.allclose(mem.mat, rho, atol=1e-12)


def test_zero_uses_is_identity():
    spec = build_shift_channel(2, seeded_density(2, 3))
    scalar = np.ones((1, 1))
    assert np.allclose(apply_memory_channel(spec, scalar, n=0).mat, scalar)
    assert np.allclose(memory_state_after(spec, scalar, n=0).mat, spec.initial_memory.mat)


def test_shift_two_uses_outputs_memory_then_first_input():
    omega, r1, r2 = (seeded_density(2, s) for s in (4, 5, 6))
    out = apply_memory_channel(build_shift_channel(2, omega), np.kron(r1, r2), n=2)
    assert np.allclose(out.mat, np.kron(omega, r1), atol=1e-12)


def test_shift_entangled_input():
    psi = pure_state(4, np.random.default_rng(7))
    out = apply_memory_channel(build_shift_channel(2), psi, n=2)
    assert np.allclose(partial_trace(out.mat, [2, 2], [1]), partial_trace(psi, [2, 2], [0]), atol=1e-12)


def test_step_count_must_match_per_use_unitaries():
    u = [np.eye(8), np.eye(8)]
    spec = ChannelSpec(2, 2, 2, tuple(u), linalg.ket(0, 2), np.eye(2) / 2)
    with pytest.raises(DimensionError):
        apply_memory_channel(spec, np.eye(8) / 8, n=3)
    apply_memory_channel(spec, np.eye(4) / 4, n=2)


def test_heterogeneous_steps_apply_in_order():
    # first use: identity; second use: swap input with memory
    u0 = np.eye(4, dtype=complex)
    u1 = linalg.swap(2, 2)
    omega = seeded_density(2, 8)
    spec = ChannelSpec(2, 2, 1, (u0, u1), np.ones(1), omega)
    r1, r2 = seeded_density(2, 9), seeded_density(2, 10)
    out = apply_memory_channel(spec, np.kron(r1, r2), n=2)
    assert np.allclose(out.mat, np.kron(r1, omega), atol=1e-12)


def test_memory_dimension_mismatch():
    spec = build_shift_channel(2)
    with pytest.raises(DimensionError):
        apply_memory_channel(spec, np.eye(2) / 2, memory=np.eye(3) / 3)
    with pytest.raises(DimensionError):
        apply_memory_channel(spec, np.eye(3) / 3)


def test_spec_validation():
    with pytest.raises(ValidationError, match="not unitary"):
        ChannelSpec(2, 1, 1, (np.ones((2, 2)),), np.ones(1), np.ones((1, 1)))
    with pytest.raises(ValidationError, match="shape"):
        ChannelSpec(2, 1, 2, (np.eye(2),), linalg.ket(0, 2), np.ones((1, 1)))
    with pytest.raises(ValidationError, match="unit norm"):
        ChannelSpec(2, 1, 2, (np.eye(4),), np.ones(2), np.ones((1, 1)))
    with pytest.raises(ValidationError, match="initial memory"):
        ChannelSpec(2, 2, 1, (np.eye(4),), np.ones(1), np.ones((1, 1)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_outputs_are_states(seed, n):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    rho = pure_state(2**n, rng) if rng.uniform() < 0.5 else random_density(2**n, rng)
    out, mem = run_channel(spec, rho, n=n)
    for m in (out.mat, mem.mat):
        assert abs(np.trace(m).real - 1) <= 1e-9
        assert np.linalg.eigvalsh(m)[0] >= -1e-8


@given(st.integers(0, 2**32 - 1))
def test_composition_matches_single_steps(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    rho = pure_state(8, rng)
    dims = [2, 2, 2, 2]
    joint = np.kron(rho, spec.initial_memory.mat)
    for i in range(3):
        joint = step_joint(spec, joint, dims, i)
    direct = apply_memory_channel(spec, rho, n=3).mat
    assert np.max(np.abs(partial_trace(joint, dims, [0, 1, 2]) - direct)) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_transfer_matrix_matches_simulation(seed, n):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    mem = random_density(2, rng)
    rho = random_density(2**n, rng)
    t = transfer_matrix(spec, mem, n)
    out = (t @ rho.ravel()).reshape(2**n, 2**n)
    assert np.max(np.abs(out - apply_memory_channel(spec, rho, mem, n).mat)) <= 1e-12


# -- Markov constructions -----------------------------------------------------------

def test_single_label_identity_is_identity_channel():
    m = MarkovChannelSpec(np.ones((1, 1)), (np.eye(2),), np.ones(1))
    for form in (False, True):
        spec = build_markov_channel(m, form)
        rho = seeded_density(4, 3)
        assert np.allclose(apply_memory_channel(spec, rho, n=2).mat, rho, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_dephasing_keeps_basis_inputs(seed):
    p = random_stochastic(2, np.random.default_rng(seed))
    spec = build_markov_channel(markov("IZ", p))
    for k in range(4):
        basis = linalg.projector(k, 4)
        assert np.allclose(apply_memory_channel(spec, basis, n=2).mat, basis, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bitflip_forms_agree(n):
    m = markov("IX")
    a, b = build_markov_channel(m, False), build_markov_channel(m, True)
    for rng in (np.random.default_rng(s) for s in range(5)):
        rho = pure_state(2**n, rng)
        assert trace_distance(apply_memory_channel(a, rho, n=n), apply_memory_channel(b, rho, n=n)) <= 1e-9


@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_forms_agree_for_random_chains(seed, labels):
    rng = np.random.default_rng(seed)
    spec = build_markov_channel(random_markov(rng, labels), True)
    other = markov_counterpart(spec)
    rho = pure_state(4, rng)
    assert trace_distance(apply_memory_channel(spec, rho, n=2), apply_memory_channel(other, rho, n=2)) <= 1e-9


def test_markov_dimensions():
    m = markov("IX")
    assert (build_markov_channel(m, False).d_e, build_markov_channel(m, True).d_e) == (2, 4)


def test_markov_memory_follows_the_chain():
    m = markov("IZ", init=(1.0, 0.0))
    spec = build_markov_channel(m, True)
    dist = np.array([1.0, 0.0])
    rho = np.eye(2) / 2
    mem = spec.initial_memory.mat
    for _ in range(5):
        dist = dist @ m.transition
        mem = induced_memory_map(spec, rho)(mem)
        assert np.allclose(np.diag(mem).real, dist, atol=1e-12)


def test_non_stochastic_row_is_named():
    with pytest.raises(ValidationError, match="row 1"):
        markov("IX", p=[[0.9, 0.1], [0.3, 0.3]])


def test_non_unitary_error_rejected():
    with pytest.raises(ValidationError, match="not unitary"):
        markov([np.eye(2), np.diag([1.0, 0.5])])


def test_complete_unitary_is_unitary_and_keeps_columns():
    cols = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 2)))[0].astype(complex)
    u = complete_unitary(cols, [1, 4], 6)
    assert np.allclose(u.conj().T @ u, np.eye(6), atol=1e-12)
    assert np.allclose(u[:, [1, 4]], cols)
    assert np.array_equal(u, complete_unitary(cols, [1, 4], 6))


def test_dilation_from_kraus_realizes_the_channel():
    p = 0.1
    kraus = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * PAULI["X"]]
    u, de = dilation_from_kraus(kraus)
    rho = seeded_density(2, 4)
    expected = sum(k @ rho @ k.conj().T for k in kraus)
    assert np.allclose(apply_memoryless(u, rho).mat, expected, atol=1e-12)


def test_depolarizing_spec_is_constant():
    spec = depolarizing_spec(2)
    for seed in range(3):
        assert np.allclose(apply_memory_channel(spec, seeded_density(2, seed), n=1).mat, np.eye(2) / 2)


# -- memory maps and the fixed-point probe ------------------------------------------

def test_factorized_memory_map_is_unitary_conjugation():
    u_m = seeded_unitary(2, 5)
    spec = factorized_spec(seeded_unitary(4, 6), u_m, 2, 2, 2)
    omega = seeded_density(2, 7)
    for seed in (8, 9):
        phi = induced_memory_map(spec, seeded_density(2, seed))
        assert np.allclose(phi(omega), u_m @ omega @ u_m.conj().T, atol=1e-12)
    assert is_fixed_point_channel(spec).max_deviation <= 1e-10


def test_fixed_point_form_memory_map():
    spec = build_markov_channel(markov("IX"), True)
    omega = seeded_density(2, 3)
    a = induced_memory_map(spec, seeded_density(2, 4))
    b = induced_memory_map(spec, pure_state(2, np.random.default_rng(5)))
    assert np.allclose(a(omega), b(omega), atol=1e-12)
    dephased = np.diag(np.diag(omega))
    expected = np.diag(np.diag(dephased).real @ spec.markov.transition)
    assert np.allclose(a(omega), expected, atol=1e-12)
    assert np.allclose(a.fixed_point(), np.eye(2) / 2, atol=1e-12)
    assert a.trace_defect() <= 1e-12


def test_isi_form_memory_map_depends_on_input():
    spec = build_markov_channel(markov("IX"), False)
    omega = np.eye(2) / 2
    a = induced_memory_map(spec, linalg.projector(0, 2))(omega)
    b = induced_memory_map(spec, np.full((2, 2), 0.5))(omega)
    assert trace_distance(a, b) > 1e-3


def test_fixed_point_verdicts():
    m = markov("IX")
    assert is_fixed_point_channel(build_markov_channel(m, True)).fixed_point
    assert not is_fixed_point_channel(build_markov_channel(m, False)).fixed_point
    assert not is_fixed_point_channel(build_shift_channel(2)).fixed_point


def test_identity_channel_spec():
    spec = identity_channel(3)
    rho = seeded_density(3, 1)
    assert np.allclose(apply_memory_channel(spec, rho, n=1).mat, rho)


def test_bell_through_correlated_dephasing():
    # Phi+ survives when both uses draw the same error, else it becomes Phi-
    spec = build_markov_channel(markov("IZ", init=(1.0, 0.0)), True)
    out = apply_memory_channel(spec, bell_state(), n=2)
    phi_minus = np.outer([1, 0, 0, -1], [1, 0, 0, -1]) / 2
    same = 0.9 * 0.9 + 0.1 * 0.9
    assert np.allclose(out.mat, same * bell_state() + (1 - same) * phi_minus, atol=1e-12)
    assert out.dims == (2, 2)
