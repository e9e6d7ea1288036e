import numpy as np
import pytest

from scmalink import (
    Codebook,
    ConfigError,
    OneHotCodec,
    ShapeError,
    SystemConfig,
    bit_index,
    bits_for_index,
    build_bit_matrix,
    build_indicator,
    one_hot_encode,
    paper_indicator_4x6,
)


class TestSystemConfig:
    def test_paper_dimensions(self):
        cfg = SystemConfig(n_users=6, n_resources=4, n_nonzero=2, alphabet_size=4)
        assert cfg.overloading == pytest.approx(1.5)
        assert cfg.bits_per_symbol == 2

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_users=0, n_resources=4, n_nonzero=2, alphabet_size=4),
            dict(n_users=6, n_resources=4, n_nonzero=5, alphabet_size=4),
            dict(n_users=6, n_resources=4, n_nonzero=2, alphabet_size=3),
            dict(n_users=6, n_resources=4, n_nonzero=2, alphabet_size=1),
        ],
    )
    def test_rejects_bad_configs(self, kwargs):
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)


class TestBitMatrix:
    def test_m2(self):
        assert build_bit_matrix(2).tolist() == [[-1, 1]]

    def test_m4_convention(self):
        # columns count 0..3 with row 0 as MSB, -1 encoding binary 0
        assert build_bit_matrix(4).tolist() == [[-1, -1, 1, 1], [-1, 1, -1, 1]]

    def test_m8_matches_enumeration_oracle(self):
        # independent oracle: enumerate sign patterns, sort by integer value
        patterns = []
        for m in range(8):
            bits = [(m >> s) & 1 for s in (2, 1, 0)]
            patterns.append([2 * b - 1 for b in bits])
        expected = np.array(patterns).T
        assert np.array_equal(build_bit_matrix(8), expected)

    @pytest.mark.parametrize("m", [2, 4, 8, 16, 32])
    def test_rows_orthogonal_exact(self, m):
        b = build_bit_matrix(m)
        assert np.array_equal(b @ b.T, m * np.eye(b.shape[0], dtype=np.int64))
        # each row balanced between signs
        assert np.all((b == 1).sum(axis=1) == m // 2)

    @pytest.mark.parametrize("m", [3, 6, 0, 1])
    def test_rejects_non_power_of_two(self, m):
        with pytest.raises(ConfigError):
            build_bit_matrix(m)

    @pytest.mark.parametrize("m", [2, 4, 8, 16])
    def test_bit_index_roundtrip(self, m):
        b = build_bit_matrix(m)
        for col in range(m):
            assert bit_index(b[:, col]) == col
            assert np.array_equal(bits_for_index(col, b.shape[0]), b[:, col])


class TestOneHot:
    def test_m4_mapping(self):
        codec = OneHotCodec(4)
        assert one_hot_encode([-1, -1], codec).tolist() == [1, 0, 0, 0]
        assert one_hot_encode([-1, 1], codec).tolist() == [0, 1, 0, 0]
        assert one_hot_encode([1, -1], codec).tolist() == [0, 0, 1, 0]
        assert one_hot_encode([1, 1], codec).tolist() == [0, 0, 0, 1]

    def test_m2(self):
        assert one_hot_encode([1], OneHotCodec(2)).tolist() == [0, 1]

    def test_roundtrip_all_messages(self):
        for m_size in (2, 4, 8):
            codec = OneHotCodec(m_size)
            n_bits = m_size.bit_length() - 1
            for m in range(m_size):
                assert codec.decode(one_hot_encode(bits_for_index(m, n_bits), codec)) == m

    def test_decode_probability_vector(self):
        assert OneHotCodec(4).decode([0.1, 0.2, 0.6, 0.1]) == 2

    def test_wrong_length_raises(self):
        with pytest.raises(ShapeError):
            one_hot_encode([1, 1, 1], OneHotCodec(4))


class TestIndicator:
    def test_paper_4x6(self):
        ind = paper_indicator_4x6()
        assert np.all(ind.row_degrees == 3)
        assert ind.n_nonzero == 2
        assert ind.is_regular
        # column 1 (user index 0) occupies rows 2 and 4 in 1-based terms
        assert ind.supports[0] == (1, 3)

    def test_identity_indicator(self):
        ind = build_indicator(np.eye(3, dtype=int))
        for j, v in enumerate(ind.V):
            expected = np.zeros((3, 1), dtype=int)
            expected[j, 0] = 1
            assert np.array_equal(v, expected)

    def test_mapping_matrix_identity(self):
        ind = paper_indicator_4x6()
        for j, v in enumerate(ind.V):
            assert np.array_equal(np.diag(v @ v.T), ind.F[:, j])

    def test_ragged_columns_rejected(self):
        with pytest.raises(ConfigError):
            build_indicator([[1, 1], [1, 0]])


class TestCodebook:
    def test_support_violation_names_user_and_resource(self):
        cfg = SystemConfig(n_users=6, n_resources=4, n_nonzero=2, alphabet_size=4)
        ind = paper_indicator_4x6()
        entries = np.zeros((6, 4, 4), dtype=complex)
        for j in range(6):
            entries[j, list(ind.supports[j]), :] = 1.0
        entries[2, 3, 0] = 0.5  # user 2 never occupies resource 3
        with pytest.raises(ConfigError, match="user 2.*resource 3"):
            Codebook(entries=entries, config=cfg, indicator=ind)

    def test_normalized_unit_energy(self):
        cfg = SystemConfig(n_users=2, n_resources=2, n_nonzero=1, alphabet_size=2)
        ind = build_indicator(np.eye(2, dtype=int))
        entries = np.zeros((2, 2, 2), dtype=complex)
        entries[0, 0] = [3.0, -3.0]
        entries[1, 1] = [1j, -1j]
        cb = Codebook(entries=entries, config=cfg, indicator=ind).normalized()
        assert cb.user_energies() == pytest.approx([1.0, 1.0], abs=1e-12)
