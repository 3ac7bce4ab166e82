import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import ad_kraus, entanglement_fidelity_purified, product_kraus
from qerkit import channels as ch
from qerkit import quantum_ops as qo
from qerkit import stabilizer as stab
from qerkit.stabilizer import Pauli

DENSE = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
         "Z": np.diag([1.0, -1.0])}
E1 = np.array([[0, 1], [0, 0]], dtype=complex)


def dense(label):
    out = np.eye(1)
    for c in label:
        out = np.kron(out, DENSE[c])
    return out


pauli_labels = st.integers(1, 4).flatmap(lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n),
                                                             st.text("IXYZ", min_size=n, max_size=n)))


# ---------------------------------------------------------------- Pauli algebra

def test_x_times_z_is_minus_i_y():
    p = Pauli.parse("X") * Pauli.parse("Z")
    assert np.allclose(p.to_matrix(), -1j * DENSE["Y"])


@settings(max_examples=100, deadline=None)
@given(pauli_labels)
def test_pauli_product_and_commutation_match_dense(pair):
    a, b = Pauli.parse(pair[0]), Pauli.parse(pair[1])
    ma, mb = dense(pair[0]), dense(pair[1])
    assert np.allclose((a * b).to_matrix(), ma @ mb)
    assert a.commutes(b) == np.allclose(ma @ mb, mb @ ma)


def test_five_qubit_commutation_example():
    a, b = "XZZXI", "ZXIXZ"
    ma, mb = dense(a), dense(b)
    assert Pauli.parse(a).commutes(Pauli.parse(b)) == np.allclose(ma @ mb, mb @ ma)


def test_weight_parse_and_signs():
    assert Pauli.parse("ZZIIII").weight == 2
    assert np.allclose(Pauli.parse("-XZ").to_matrix(), -dense("XZ"))
    with pytest.raises(ValueError):
        Pauli.parse("XQ")


def test_apply_matches_dense():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    p = Pauli.parse("YXZ")
    assert np.allclose(p.apply(v), dense("YXZ") @ v)


# ---------------------------------------------------------------- code library

def test_library_generators():
    five = stab.get_code("five_qubit")
    assert [g.label for g in five.generators] == ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]
    assert five.logical_z[0].label == "ZZZZZ" and five.logical_x[0].label == "XXXXX"
    assert len(stab.get_code("steane").generators) == 6
    leung = stab.get_code("leung_41")
    assert [g.label for g in leung.generators] == ["XXXX", "ZZII", "IIZZ"]
    assert leung.logical_x[0].label == "XXII" and leung.logical_z[0].label == "ZIZI"
    g83 = stab.get_code("gottesman_83")
    assert (g83.n, g83.k) == (8, 3)
    with pytest.raises(ValueError):
        stab.get_code("toric")


def test_generalized_adc_family():
    assert [g.label for g in stab.generalized_adc_code(2).generators] == ["XXXXXX", "ZZIIII", "IIZIIZ", "IIIZZI"]
    assert [g.label for g in stab.generalized_adc_code(3).generators] == [
        "XXXXXXXX", "ZZIIIIII", "IIZIIIIZ", "IIIZIIZI", "IIIIZZII"]
    # M=1 coincides with the four-qubit code (identity reordering)
    assert stab.same_group(stab.generalized_adc_code(1).generators, stab.get_code("leung_41").generators)


def test_linear_adc_code():
    code = stab.linear_adc_code(stab.HAMMING_7_4)
    assert [g.label for g in code.generators] == ["IIIZZZZ", "IZZIIZZ", "ZIZIZIZ", "XXXXXXX"]
    assert (code.n, code.k) == (7, 3)
    with pytest.raises(ValueError):
        stab.linear_adc_code([[1, 1]])
    with pytest.raises(ValueError):
        stab.linear_adc_code([[1, 1, 1]])
    ext = stab.linear_adc_code(stab.EXTENDED_HAMMING_8_4)
    assert stab.check_correctability(ext, stab.damping_errors(8, 0.25)).correctable


# ---------------------------------------------------------------- encoding

@pytest.mark.parametrize("name", ["five_qubit", "steane", "leung_41", "gottesman_83"])
def test_encoding_isometry_is_fixed_by_generators(name):
    code = stab.get_code(name)
    u = stab.encoding_isometry(code)
    assert np.allclose(u.conj().T @ u, np.eye(code.d_s), atol=1e-10)
    for g in code.generators:
        assert np.allclose(g.apply(u), u, atol=1e-10)
    # column m carries Z_j eigenvalue (-1)^(bit j of m)
    for j, z in enumerate(code.logical_z):
        for m in range(code.d_s):
            bit = (m >> (code.k - 1 - j)) & 1
            assert np.allclose(z.apply(u[:, [m]]), (-1) ** bit * u[:, [m]], atol=1e-10)


def test_codeword_examples():
    u = stab.encoding_isometry(stab.get_code("leung_41"))
    expect = np.zeros(16)
    expect[[0, 15]] = 1 / np.sqrt(2)
    assert np.allclose(u[:, 0], expect)
    u6 = stab.encoding_isometry(stab.generalized_adc_code(2))
    expect = np.zeros(64)
    expect[[0, 63]] = 1 / np.sqrt(2)
    assert np.allclose(u6[:, 0], expect)


# ---------------------------------------------------------------- syndromes

def test_syndrome_examples():
    five = stab.get_code("five_qubit")
    assert stab.pauli_syndrome(five, "IIIII") == (0, 0, 0, 0)
    bits = stab.pauli_syndrome(five, "XIIII")
    oracle = tuple(int(not np.allclose(dense("XIIII") @ dense(g.label), dense(g.label) @ dense("XIIII")))
                   for g in five.generators)
    assert bits == oracle == (0, 0, 0, 1)
    shor = stab.get_code("shor")
    s = {stab.pauli_syndrome(shor, z) for z in ("ZIIIIIIII", "IZIIIIIII", "IIZIIIIII")}
    assert len(s) == 1


@pytest.mark.parametrize("name", ["five_qubit", "leung_41", "steane"])
def test_syndrome_partition_complete_and_orthogonal(name):
    code = stab.get_code(name)
    part = stab.syndrome_partition(code)
    assert len(part) == 2 ** len(code.generators)
    basis = np.concatenate(part.bases, axis=1)
    assert np.allclose(basis.conj().T @ basis, np.eye(code.d_c), atol=1e-9)
    lab = part.labels[3]
    assert np.allclose(part.projector(3), stab.syndrome_projector(code, lab), atol=1e-9)


def test_coset_leaders_have_minimum_weight():
    code = stab.get_code("steane")
    leaders = stab.coset_leaders(code)
    for p in leaders.values():
        assert p.weight <= 2
    # weight ties go to the leader with fewer Y factors
    mixed = [p for p in leaders.values() if p.weight == 2 and any(p.x) and any(p.z)]
    assert mixed and all(not any(a and b for a, b in zip(p.x, p.z)) for p in mixed)


# ---------------------------------------------------------------- generic and ML recoveries

@pytest.mark.parametrize("name", ["five_qubit", "steane"])
def test_generic_recovery_corrects_single_paulis(name):
    code = stab.get_code(name)
    u = stab.encoding_isometry(code)
    rec = stab.generic_qec_recovery(code, u).channel()
    assert rec.cptp_residual() < 1e-10
    rng = np.random.default_rng(1)
    psi = rng.normal(size=code.d_s) + 1j * rng.normal(size=code.d_s)
    psi /= np.linalg.norm(psi)
    for site in range(code.n):
        for letter in "XYZ":
            e = Pauli.single(code.n, site, letter)
            state = e.apply((u @ psi)[:, None])
            out = qo.apply(rec, state @ state.conj().T)
            assert np.isclose(np.real(psi.conj() @ out @ psi), 1.0, atol=1e-10)


def test_shor_degenerate_errors_recover_the_same_state():
    code = stab.get_code("shor")
    u = stab.encoding_isometry(code)
    rec = stab.generic_qec_recovery(code, u).channel()
    psi = np.array([0.6, 0.8j])
    outs = []
    for site in (0, 1):
        state = Pauli.single(9, site, "Z").apply((u @ psi)[:, None])
        outs.append(qo.apply(rec, state @ state.conj().T))
    assert np.allclose(outs[0], outs[1]) and np.allclose(outs[0], np.outer(psi, psi.conj()))


def purified(code_name, gamma, recovery):
    code = stab.get_code(code_name)
    u = stab.encoding_isometry(code)
    noise = [k @ u for k in product_kraus(ad_kraus(gamma), code.n)]
    return entanglement_fidelity_purified([noise, list(recovery.kraus)], 2)


def test_generic_recovery_fidelity_against_purified_oracle():
    # frozen from the purified-state oracle with an independently built CSS decoder
    five = stab.generic_qec_recovery(stab.get_code("five_qubit"))
    assert np.isclose(purified("five_qubit", 0.1, five), 0.9771391381896063, atol=1e-10)
    steane = stab.generic_qec_recovery(stab.get_code("steane"))
    assert np.isclose(purified("steane", 0.1, steane), 0.9567612296905296, atol=1e-10)


def test_ml_recovery_matches_generic_for_depolarizing():
    code = stab.get_code("five_qubit")
    noise = ch.pauli_channel(ch.independent_pauli_terms({"I": 0.97, "X": 0.01, "Y": 0.01, "Z": 0.01}, 5))
    ml = stab.ml_pauli_recovery(code, noise)
    assert all(c == (0, 0) for c in ml.classes.values())
    generic = stab.generic_qec_recovery(code)
    assert np.allclose(ml.recovery.kraus, generic.kraus)


def test_ml_recovery_prefers_likely_weight_two_z():
    code = stab.get_code("five_qubit")
    single = {"I": (1 - 0.01) * (1 - 0.2), "X": 0.01 * 0.8, "Z": 0.99 * 0.2, "Y": 0.01 * 0.2}
    terms = ch.independent_pauli_terms(single, 5)
    ml = stab.ml_pauli_recovery(code, ch.pauli_channel(terms))
    # coset enumeration: per syndrome, total probability of each logical class
    leaders = stab.coset_leaders(code)
    mass = {}
    for label, p in terms:
        e = Pauli.parse(label)
        q = code.syndrome(e)
        cls = stab._logical_class(code, leaders[q] * e)
        mass.setdefault(q, {}).setdefault(cls, 0.0)
        mass[q][cls] += p
    for q in mass:
        assert ml.classes[q] == max(mass[q], key=mass[q].get)
    # a syndrome whose minimum-weight leader is a single X, yet Z1Z2-type errors dominate
    likely = {}
    for label, p in terms:
        q = code.syndrome(Pauli.parse(label))
        if p > likely.get(q, ("", 0.0))[1]:
            likely[q] = (label, p)
    hits = [q for q, (label, _) in likely.items()
            if leaders[q].weight == 1 and any(leaders[q].x)
            and label.count("Z") == 2 and set(label) <= {"I", "Z"}]
    assert hits
    for q in hits:
        e = Pauli.parse(likely[q][0])
        assert ml.classes[q] == stab._logical_class(code, leaders[q] * e) != (0, 0)
    assert np.isclose(ml.fidelity, sum(max(m.values()) for m in mass.values()), atol=1e-12)


def test_ml_fidelity_two_paths():
    code = stab.get_code("five_qubit")
    u = stab.encoding_isometry(code)
    noise = ch.n_fold(ch.depolarizing(0.02), 5)
    ml = stab.ml_pauli_recovery(code, noise, u)
    kernel = qo.data_matrix(qo.Ensemble.completely_mixed(2), qo.encode(noise, u))
    assert np.isclose(kernel.fidelity(qo.kraus_to_choi(ml.recovery.channel()).matrix), ml.fidelity, atol=1e-9)


def test_ml_recovery_rejects_non_pauli_kraus():
    with pytest.raises(ValueError):
        stab.ml_pauli_recovery(stab.get_code("five_qubit"), ch.n_fold(ch.amplitude_damping(0.1), 5))


# ---------------------------------------------------------------- damped subspaces

def test_leung_damped_subspaces():
    code = stab.get_code("leung_41")
    first = stab.damped_subspace(code.generators, 0)
    assert first.labels == ["-ZZII", "IIZZ", "ZIII"]
    both = stab.damped_subspace_sequence(code, [0, 2])
    assert len(both.generators) == 4 and both.dimension == 1


def test_six_two_double_damping_subspace():
    code = stab.generalized_adc_code(2)
    sub = stab.damped_subspace_sequence(code, [0, 4])
    assert len(sub.generators) == 5 and sub.dimension == 2
    expected = stab.parse_all(["-ZZIIII", "IIZIIZ", "-IIIZZI", "ZIIIII", "IIIIZI"])
    assert stab.same_group(sub.generators, expected)
    # Z1 of the logical pair is generated: ZIIIZI = ZIIIII * IIIIZI
    z1 = code.logical_z[0]
    assert z1.label == "ZIIIZI"


@pytest.mark.parametrize("m", [1, 2, 3])
def test_damped_subspaces_mutually_orthogonal(m):
    code = stab.generalized_adc_code(m)
    projs = [stab.code_projector(code)]
    projs += [stab.subspace_projector(stab.damped_subspace(code.generators, i)) for i in range(code.n)]
    for a, b in itertools.combinations(projs, 2):
        assert np.linalg.norm(a @ b) <= 1e-9


def test_damped_subspace_is_image_of_damping():
    code = stab.get_code("leung_41")
    u = stab.encoding_isometry(code)
    img = stab.local_operator(4, {1: E1}) @ u
    proj = stab.subspace_projector(stab.damped_subspace(code.generators, 1))
    assert np.allclose(proj @ img, img)
    assert np.isclose(np.trace(proj).real, 2)


# ---------------------------------------------------------------- correctability

def test_correctability_trivial_and_leung():
    code = stab.get_code("leung_41")
    rep = stab.check_correctability(code, [np.eye(16)])
    assert rep.correctable and np.allclose(rep.alpha, [[1]])
    assert stab.check_correctability(code, stab.damping_errors(4, 0.25)).correctable
    bad = stab.check_correctability(code, [dense("XIII"), dense("IXII")])
    assert not bad.correctable


@pytest.mark.parametrize("code", [stab.generalized_adc_code(1), stab.generalized_adc_code(2),
                                  stab.generalized_adc_code(3), stab.linear_adc_code(stab.HAMMING_7_4)],
                         ids=["adc4", "adc6", "adc8", "linear73"])
def test_single_dampings_correctable(code):
    rep = stab.check_correctability(code, stab.damping_errors(code.n, 0.25))
    assert rep.correctable and rep.residual <= 1e-9


def test_shor_corrects_double_dampings():
    rep = stab.check_correctability(stab.get_code("shor"), stab.damping_errors(9, 0.2, (0, 1, 2)))
    assert rep.correctable


def _commuting_pairs(n):
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=n)][1:]
    seen = set()
    for a, b in itertools.combinations(labels, 2):
        pa, pb = Pauli.parse(a), Pauli.parse(b)
        prod = (pa * pb).unsigned()
        if not pa.commutes(pb) or prod.weight == 0:
            continue
        group = frozenset({a, b, prod.label})
        if group not in seen:
            seen.add(group)
            yield pa, pb, prod


def test_no_three_qubit_code_corrects_single_dampings():
    count = 0
    for pa, pb, prod in _commuting_pairs(3):
        elements = (pa, pb, prod)
        # orthogonality needs a Z at every site, dimension two needs an X or Y at every site
        needs = all(any(g.z[i] and not g.x[i] for g in elements) and any(g.x[i] for g in elements)
                    for i in range(3))
        assert not needs
        for sa, sb in itertools.product((1, -1), repeat=2):
            code_gens = [pa if sa > 0 else -pa, pb if sb > 0 else -pb]
            p = np.eye(8, dtype=complex)
            for g in code_gens:
                p = p @ (np.eye(8) + g.to_matrix()) / 2
            w, v = np.linalg.eigh(p)
            u = v[:, w > 0.5]
            assert u.shape[1] == 2
            assert not stab.check_correctability(u, stab.damping_errors(3, 0.25)).correctable
        count += 1
    assert count > 0


def test_best_three_qubit_code_third_subspace_has_dimension_one():
    gens = stab.parse_all(["XYZ", "ZZI"])
    assert stab.damped_subspace(gens, 0).labels == ["-ZZI", "ZII"]
    assert stab.damped_subspace(gens, 2).dimension == 1


# ---------------------------------------------------------------- damping-code recoveries

def test_adc_single_damping_recovered_exactly():
    code = stab.generalized_adc_code(1)
    u = stab.encoding_isometry(code)
    rec = stab.adc_family_recovery(code, u)
    assert rec.cptp_residual() < 1e-10
    psi = np.array([1, 1]) / np.sqrt(2)
    for g in (0.05, 0.4):
        state = stab.local_operator(4, {0: np.sqrt(g) * E1}) @ u @ psi
        out = qo.apply(rec.channel(), np.outer(state, state.conj()))
        out /= np.trace(out)
        assert np.allclose(out, np.outer(psi, psi.conj()), atol=1e-12)


@pytest.mark.parametrize("m", [2, 3])
def test_adc_family_recovers_every_single_damping(m):
    code = stab.generalized_adc_code(m)
    u = stab.encoding_isometry(code)
    rec = stab.adc_family_recovery(code, u).channel()
    rng = np.random.default_rng(m)
    psi = rng.normal(size=code.d_s) + 1j * rng.normal(size=code.d_s)
    psi /= np.linalg.norm(psi)
    for site in range(code.n):
        state = stab.local_operator(code.n, {site: E1}) @ u @ psi
        out = qo.apply(rec, np.outer(state, state.conj()))
        assert np.allclose(out / np.trace(out), np.outer(psi, psi.conj()), atol=1e-12)


def test_six_two_double_damping_keeps_low_logical_span():
    code = stab.generalized_adc_code(2)
    u = stab.encoding_isometry(code)
    rec = stab.adc_family_recovery(code, u).channel()
    damp = stab.local_operator(6, {0: E1, 4: E1})
    psi = np.array([0.6, 0.8j, 0, 0])
    state = damp @ u @ psi
    out = qo.apply(rec, np.outer(state, state.conj()))
    assert np.allclose(out / np.trace(out), np.outer(psi, psi.conj()), atol=1e-12)
    lost = damp @ u @ np.array([0, 0, 1, 0])
    assert np.linalg.norm(lost) < 1e-12


def test_adc_family_between_baseline_and_optimal():
    from qerkit.optimal import solve_optimal_recovery

    code = stab.generalized_adc_code(1)
    u = stab.encoding_isometry(code)
    rec = stab.adc_family_recovery(code, u).channel()
    ens = qo.Ensemble.completely_mixed(2)
    for g in (0.05, 0.15, 0.3):
        noise = ch.encoded_n_fold(ch.amplitude_damping(g), 4, u)
        f = qo.recovered_fidelity(rec, noise, ens)
        best = solve_optimal_recovery(qo.data_matrix(ens, noise)).primal_value
        baseline = ((1 + np.sqrt(1 - g)) / 2) ** 2
        assert baseline < f < best


def test_leung_recovery():
    code = stab.get_code("leung_41")
    assert stab.leung_recovery(0.2).cptp_residual() <= 1e-8
    assert np.isclose(purified("leung_41", 0.0, stab.leung_recovery(0.0)), 1.0, atol=1e-9)
    # frozen from the purified-state oracle
    assert np.isclose(purified("leung_41", 0.1, stab.leung_recovery(0.1)), 0.9753876371760196, atol=1e-10)
    u = stab.encoding_isometry(code)
    weights = []
    for g in (0.1, 0.01, 0.001):
        rec = stab.leung_recovery(g)
        noise = ch.encoded_n_fold(ch.amplitude_damping(g), 4, u)
        rho = u @ u.conj().T / 2
        w = 0.0
        for k, lab in zip(rec.kraus, rec.labels):
            if lab[0] == "00":
                for e in noise.kraus:
                    w += np.real(np.trace(k @ e @ (np.eye(2) / 2) @ e.conj().T @ k.conj().T))
        weights.append(w)
    assert weights[0] < weights[1] < weights[2] and weights[2] > 0.99
