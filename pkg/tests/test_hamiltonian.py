import numpy as np
import pytest

from qprep import hamiltonian as ham

import oracles


TWO_ORBITAL = """&FCI NORB=2,NELEC=2,MS2=0,
 ORBSYM=1,1,
 ISYM=1,
&END
 0.2 1 1 1 1
 0.1 2 1 1 1
-1.0 1 1 0 0
-0.5 2 2 0 0
 0.7 0 0 0 0
"""


def _random_fcidump(rng, n_orb, core=0.0, with_two_body=True):
    h = rng.normal(size=(n_orb, n_orb))
    h = (h + h.T) / 2
    g = np.zeros((n_orb,) * 4)
    if with_two_body:
        for p in range(n_orb):
            for q in range(p + 1):
                for r in range(p + 1):
                    for s in range((q if r == p else r) + 1):
                        ham._set_two_body(g, p, q, r, s, rng.normal() * 0.3)
    return ham.FciDump(n_orb, 2, 0, core, h, g)


def test_parse_header_and_core_only():
    fd = ham.parse_fcidump("&FCI NORB=3,NELEC=2,MS2=0,\n&END\n 1.25 0 0 0 0\n")
    assert fd.n_orb == 3 and fd.n_elec == 2 and fd.ms2 == 0
    assert fd.core_energy == 1.25
    assert not fd.one_body.any() and not fd.two_body.any()


def test_parse_two_orbital_example():
    fd = ham.parse_fcidump(TWO_ORBITAL)
    assert fd.one_body[0, 0] == -1.0
    assert fd.one_body[1, 1] == -0.5
    assert fd.two_body[0, 0, 0, 0] == 0.2
    # (21|11) stored under all eight chemist permutations
    for idx in ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)):
        assert fd.two_body[idx] == 0.1
    assert fd.core_energy == 0.7


def test_parse_index_beyond_norb():
    text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.5 3 0 0 0\n"
    with pytest.raises(ham.InconsistentHeader):
        ham.parse_fcidump(text)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ham.ParseError) as exc:
        ham.parse_fcidump("&FCI NORB=2,\n&END\n 0.5 1 1 0\n")
    assert exc.value.line_no == 3
    with pytest.raises(ham.ParseError) as exc:
        ham.parse_fcidump("&FCI NORB=2,\n&END\n 1.0 1 1 0 0\n oops 1 1 0 0\n")
    assert exc.value.line_no == 4
    with pytest.raises(ham.ParseError):
        ham.parse_fcidump("NORB=2\n")


def test_parse_fortran_exponent():
    fd = ham.parse_fcidump("&FCI NORB=1,\n&END\n 1.5D-01 1 1 0 0\n 0.0 0 0 0 0\n")
    assert fd.one_body[0, 0] == 0.15


def test_round_trip_is_idempotent():
    rng = np.random.default_rng(8)
    fd = _random_fcidump(rng, 3, core=-0.75)
    text = ham.dump_fcidump(fd)
    fd2 = ham.parse_fcidump(text)
    assert np.array_equal(fd.one_body, fd2.one_body)
    assert np.array_equal(fd.two_body, fd2.two_body)
    assert fd.core_energy == fd2.core_energy
    assert ham.dump_fcidump(fd2) == text


def test_ci_single_electron_diagonal():
    h = np.diag([-2.0, -1.0, 0.5])
    fd = ham.FciDump(3, 1, 1, 0.25, h, np.zeros((3,) * 4))
    dense = ham.build_ci_matrix(fd, 1, 0)
    assert np.allclose(dense.entries, np.diag([-1.75, -0.75, 0.75]))
    assert dense.basis_labels == ["100000", "001000", "000010"]


def test_ci_matches_jw_oracle_two_orbital():
    fd = ham.parse_fcidump(TWO_ORBITAL)
    dense = ham.build_ci_matrix(fd, 1, 1)
    full = oracles.jw_many_body_matrix(fd.n_orb, fd.core_energy,
                                       fd.one_body, fd.two_body)
    block = oracles.jw_sector_block(full, dense.basis_labels)
    assert np.max(np.abs(dense.entries - block)) < 1e-12


def test_ci_matches_jw_oracle_random_sectors():
    rng = np.random.default_rng(31)
    fd = _random_fcidump(rng, 3, core=0.4)
    full = oracles.jw_many_body_matrix(fd.n_orb, fd.core_energy,
                                       fd.one_body, fd.two_body)
    for na, nb in ((1, 1), (2, 1), (1, 0), (3, 2)):
        dense = ham.build_ci_matrix(fd, na, nb)
        block = oracles.jw_sector_block(full, dense.basis_labels)
        assert np.max(np.abs(dense.entries - block)) < 1e-12


def test_jw_matrix_is_sector_block_diagonal():
    rng = np.random.default_rng(5)
    fd = _random_fcidump(rng, 2)
    full = oracles.jw_many_body_matrix(2, fd.core_energy,
                                       fd.one_body, fd.two_body)
    def sector(state):
        na = sum((state >> (2 * p)) & 1 for p in range(2))
        nb = sum((state >> (2 * p + 1)) & 1 for p in range(2))
        return na, nb
    for i in range(16):
        for j in range(16):
            if sector(i) != sector(j):
                assert full[i, j] == 0.0


def test_ci_noninteracting_eigenvalues():
    rng = np.random.default_rng(12)
    fd = _random_fcidump(rng, 3, with_two_body=False)
    dense = ham.build_ci_matrix(fd, 1, 1)
    eps = np.linalg.eigvalsh(fd.one_body)
    expected = np.sort([ea + eb for ea in eps for eb in eps])
    assert np.allclose(np.sort(np.linalg.eigvalsh(dense.entries)), expected)


def test_ci_eigenvalues_invariant_under_relabeling():
    rng = np.random.default_rng(77)
    fd = _random_fcidump(rng, 3, core=0.1)
    perm = [2, 0, 1]
    h2 = fd.one_body[np.ix_(perm, perm)]
    g2 = fd.two_body[np.ix_(perm, perm, perm, perm)]
    fd2 = ham.FciDump(3, 2, 0, fd.core_energy, h2, g2)
    e1 = np.linalg.eigvalsh(ham.build_ci_matrix(fd, 1, 1).entries)
    e2 = np.linalg.eigvalsh(ham.build_ci_matrix(fd2, 1, 1).entries)
    assert np.allclose(np.sort(e1), np.sort(e2))


def test_ci_dimension_cap():
    fd = ham.FciDump(4, 4, 0, 0.0, np.zeros((4, 4)), np.zeros((4,) * 4))
    with pytest.raises(ham.DimensionCapExceeded):
        ham.build_ci_matrix(fd, 2, 2, dim_cap=10)


def test_dense_hamiltonian_rejects_nonhermitian():
    with pytest.raises(ValueError):
        ham.DenseHamiltonian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_normalize_spectrum_bounds():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(size=(12, 12))
        dense = ham.DenseHamiltonian((a + a.T) / 2)
        out, norm = ham.normalize_spectrum(dense, margin=0.05)
        evals = np.linalg.eigvalsh(out.entries)
        assert evals.min() > 0.05 - 1e-9 and evals.max() < 0.95 + 1e-9
        x = rng.normal(size=5)
        assert np.allclose(norm.invert(norm.apply(x)), x)


def test_normalizer_explicit_convention():
    norm = ham.AffineNormalizer(scale=1 / 3, shift=1.0)
    assert norm.apply(-3.0) == 0.0
    assert norm.invert(0.0) == -3.0
    dense = ham.DenseHamiltonian(np.diag([-3.0, 0.0]))
    out = norm.apply_matrix(dense)
    assert np.allclose(np.diag(out.entries), [0.0, 1.0])


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    fd = _random_fcidump(rng, 2)
    dense = ham.build_ci_matrix(fd, 1, 1)
    p = tmp_path / "h.bin"
    ham.save_hamiltonian(dense, p)
    back = ham.load_hamiltonian(p)
    assert np.array_equal(back.entries, dense.entries)
    assert back.basis_labels == dense.basis_labels
    c = tmp_path / "h.csv"
    ham.save_hamiltonian(dense, c)
    back_csv = ham.load_hamiltonian(c)
    assert np.allclose(back_csv.entries, dense.entries)
