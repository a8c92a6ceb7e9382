"""Modem tests: constellations, loopbacks, crosstalk, and detection rules."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlcsim import modems as md
from vlcsim.channel import NAMED_CHANNELS, propagate_extended
from vlcsim.errors import SingularChannelError
from vlcsim.photometry import CHANNEL_ORDER, LED_CHANNELS, h_model_spd
from vlcsim.spectral import build_qct_family


def run_link(tx_frames, h, cp_len):
    """Channel application for modulated (already CP-extended) frames."""
    return propagate_extended(tx_frames, h)


class TestPam:
    def test_bpsk_levels(self):
        pam = md.PamConstellation.from_order(2)
        assert np.allclose(pam.map_bits([0, 1]), [-1.0, 1.0])

    def test_four_pam_gray_order(self):
        pam = md.PamConstellation.from_order(4)
        got = pam.map_bits([0, 0, 0, 1, 1, 1, 1, 0])
        assert np.allclose(got, np.array([-3, -1, 1, 3]) / np.sqrt(5))

    def test_unit_energy(self):
        for m in (2, 4, 8, 16):
            pam = md.PamConstellation.from_order(m)
            assert np.mean(pam.levels**2) == pytest.approx(1.0, rel=1e-12)

    def test_adjacent_levels_differ_one_bit(self):
        pam = md.PamConstellation.from_order(8)
        codes = np.array([pam.gray_to_index.tolist().index(i) for i in range(8)])
        for a, b in zip(codes, codes[1:]):
            assert bin(a ^ b).count("1") == 1

    def test_round_trip(self):
        pam = md.PamConstellation.from_order(4)
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 10_000)
        assert np.array_equal(pam.demap(pam.map_bits(bits)), bits)

    def test_ragged_bits(self):
        with pytest.raises(ValueError):
            md.PamConstellation.from_order(4).map_bits([0, 1, 1])


class TestQam:
    def test_four_qam_points(self):
        qam = md.QamConstellation.from_order(4)
        expect = {(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)}
        got = {complex(np.round(p * np.sqrt(2), 9)) for p in qam.points}
        assert got == expect

    def test_unit_energy(self):
        for m in (4, 16, 64):
            qam = md.QamConstellation.from_order(m)
            assert np.mean(np.abs(qam.points) ** 2) == pytest.approx(1.0, rel=1e-12)

    def test_round_trip(self):
        qam = md.QamConstellation.from_order(16)
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 4000)
        assert np.array_equal(qam.demap(qam.map_bits(bits)), bits)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            md.QamConstellation.from_order(8)


class TestMld:
    def test_exact_point(self):
        pts = md.PamConstellation.from_order(4).levels
        assert md.mld_detect([pts[2]], pts)[0] == pts[2]

    def test_tie_toward_lower_index(self):
        pts = np.array([-3, -1, 1, 3]) / np.sqrt(5)
        assert md.mld_detect([0.0], pts)[0] == pts[1]

    def test_within_half_distance_sweep(self):
        pts = md.PamConstellation.from_order(8).levels
        half = np.min(np.diff(pts)) / 2
        rng = np.random.default_rng(2)
        for _ in range(200):
            i = rng.integers(0, 8)
            eps = rng.uniform(-half * 0.999, half * 0.999)
            assert md.mld_index([pts[i] + eps], pts)[0] == i

    def test_idempotent(self):
        pts = md.PamConstellation.from_order(4).levels
        once = md.mld_detect(np.linspace(-2, 2, 41), pts)
        assert np.array_equal(md.mld_detect(once, pts), once)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=50), st.sampled_from([2, 4, 8]))
    @settings(max_examples=60, deadline=None)
    def test_idempotence_property(self, vals, order):
        pts = md.PamConstellation.from_order(order).levels
        once = md.mld_detect(np.asarray(vals), pts)
        assert np.array_equal(md.mld_detect(once, pts), once)

    @given(st.integers(0, 2**20 - 1), st.sampled_from([2, 4, 16]))
    @settings(max_examples=60, deadline=None)
    def test_pam_round_trip_property(self, packed, order):
        pam = md.PamConstellation.from_order(order)
        width = pam.bits_per_symbol
        nbits = 20 - (20 % width)
        bits = np.array([(packed >> i) & 1 for i in range(nbits)])
        assert np.array_equal(pam.demap(pam.map_bits(bits)), bits)


class TestDcBias:
    def test_zero_db(self):
        assert md.dc_bias_factor(0.0) == 0.0

    def test_thirteen_db(self):
        assert md.dc_bias_factor(13.0) == pytest.approx(4.353461054114163, rel=1e-12)

    def test_six_db(self):
        assert md.dc_bias_factor(6.0) == pytest.approx(1.7265780334334653, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            md.dc_bias_factor(-1.0)


class TestDcoOfdm:
    def test_realness_before_bias(self):
        cfg = md.OfdmConfig(n=512, cp_len=4)
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, cfg.bits_per_frame)
        frames = md.ofdm_baseband_frames(bits, cfg)
        # construction uses the analytic real part; verify the spectrum really is Hermitian
        spec = np.fft.fft(frames, axis=-1)
        assert np.max(np.abs(spec - np.conj(spec[:, ::-1].copy()[:, np.r_[-1, 0:511]]))) < 1e-9

    def test_unbiased_mean_is_dc(self):
        cfg = md.OfdmConfig(n=64, cp_len=0, bias_db=13.0)
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 50)
        tx = md.dco_ofdm_modulate(bits, cfg, clip=False)
        assert np.mean(tx) == pytest.approx(cfg.dc_level, abs=1e-9)

    def test_loopback_flat(self):
        cfg = md.OfdmConfig(n=256, cp_len=0, bias_db=13.0)
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 4)
        rx = run_link(md.dco_ofdm_modulate(bits, cfg), [1.0], cfg.cp_len)
        assert np.array_equal(md.dco_ofdm_demodulate(rx, [1.0], cfg), bits)

    def test_loopback_three_tap(self):
        cfg = md.OfdmConfig(n=64, cp_len=4, bias_db=13.0)
        h = NAMED_CHANNELS["threetap"]
        rng = np.random.default_rng(6)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 8)
        rx = run_link(md.dco_ofdm_modulate(bits, cfg), h, cfg.cp_len)
        assert np.array_equal(md.dco_ofdm_demodulate(rx, h, cfg), bits)

    def test_singular_channel_detected(self):
        cfg = md.OfdmConfig(n=16, cp_len=8)
        h = np.zeros(5)
        h[0], h[4] = 1.0, -1.0  # response has nulls on bins k = 0, 4, 8
        bits = np.zeros(cfg.bits_per_frame, dtype=int)
        rx = run_link(md.dco_ofdm_modulate(bits, cfg), h, cfg.cp_len)
        with pytest.raises(SingularChannelError):
            md.dco_ofdm_demodulate(rx, h, cfg)

    def test_ragged_bits(self):
        with pytest.raises(ValueError):
            md.dco_ofdm_modulate([0, 1], md.OfdmConfig(n=64))

    def test_clipping_monotone_in_bias(self):
        cfg_counts = []
        rng = np.random.default_rng(7)
        bits = rng.integers(0, 2, md.OfdmConfig(n=128).bits_per_frame * 20)
        for bias in (3.0, 7.0, 9.0, 13.0):
            cfg = md.OfdmConfig(n=128, cp_len=0, bias_db=bias)
            unclipped = md.dco_ofdm_modulate(bits, cfg, clip=False)
            cfg_counts.append(int(np.sum(unclipped < 0)))
        assert all(a >= b for a, b in zip(cfg_counts, cfg_counts[1:]))


class TestQct:
    def test_n4_single_column_scaling(self):
        cfg = md.QctConfig(n=4, cp_len=0, bias_db=0.0)
        bits = np.array([0, 0, 0, 1, 1, 1, 1, 0])  # one 4-PAM symbol per stream
        streams = md.qct_baseband_frames(bits, cfg)
        sym = cfg.pam.map_bits(bits)
        for v in range(4):
            col = cfg.family.matrices[v][:, 0]
            assert np.allclose(streams[v, 0], col * sym[v])

    def test_energy_preserved(self):
        cfg = md.QctConfig(n=64, cp_len=0)
        rng = np.random.default_rng(8)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 3)
        streams = md.qct_baseband_frames(bits, cfg)
        sym = cfg.pam.map_bits(bits).reshape(3, -1)
        frame_energy = np.sum(streams**2, axis=(0, 2))
        assert np.allclose(frame_energy, np.sum(sym**2, axis=1), atol=1e-10)

    def test_stream_means(self):
        cfg = md.QctConfig(n=512, cp_len=0)
        rng = np.random.default_rng(9)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 20)
        streams = md.qct_baseband_frames(bits, cfg)
        # every basis column except the k=0 carrier is zero-mean, so the three
        # streams without that column have exactly zero mean
        for v in range(1, 4):
            assert abs(streams[v].mean()) < 1e-9 * np.sqrt(512)
        # the k=0 carrier rides on stream 0: its mean equals the symbol average
        sym0 = cfg.pam.map_bits(bits).reshape(20, 4, -1)[:, 0, 0]
        assert streams[0].mean() == pytest.approx(sym0.mean() / np.sqrt(512), abs=1e-12)

    def test_loopback_flat(self):
        cfg = md.QctConfig(n=512, cp_len=0, bias_db=13.0)
        rng = np.random.default_rng(10)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 3)
        tx = md.qct_modulate(bits, cfg)
        rx = run_link(tx.sum(axis=0), [1.0], cfg.cp_len)
        assert np.array_equal(md.qct_demodulate(rx, [1.0], cfg), bits)

    def test_loopback_three_tap(self):
        cfg = md.QctConfig(n=64, cp_len=4, bias_db=13.0)
        h = NAMED_CHANNELS["threetap"]
        rng = np.random.default_rng(11)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 10)
        tx = md.qct_modulate(bits, cfg)
        rx = run_link(tx.sum(axis=0), h, cfg.cp_len)
        assert np.array_equal(md.qct_demodulate(rx, h, cfg), bits)

    def test_inter_stream_isolation(self):
        # stream v's bits survive exactly while other streams carry random data
        cfg = md.QctConfig(n=64, cp_len=4, bias_db=13.0)
        h = np.array([0.9, 0.3, -0.2, 0.1])
        h = h / np.linalg.norm(h)
        rng = np.random.default_rng(12)
        bits = rng.integers(0, 2, cfg.bits_per_frame * 5)
        tx = md.qct_modulate(bits, cfg)
        rx = run_link(tx.sum(axis=0), h, cfg.cp_len)
        out = md.qct_demodulate(rx, h, cfg)
        per_stream = cfg.n // 4 * cfg.pam.bits_per_symbol
        for v in range(4):
            sent = bits.reshape(-1, 4, per_stream)[:, v, :]
            got = out.reshape(-1, 4, per_stream)[:, v, :]
            assert np.array_equal(sent, got)

    def test_family_size_mismatch(self):
        with pytest.raises(ValueError):
            md.QctConfig(n=64, family=build_qct_family(32))

    def test_singular_channel(self):
        cfg = md.QctConfig(n=16, cp_len=8)
        h = np.zeros(5)
        h[0], h[4] = 1.0, -1.0
        with pytest.raises(SingularChannelError):
            md.qct_stream_gains(h, cfg)


class TestCrosstalk:
    def test_identity_for_inband_spectra(self):
        # synthetic spectra fully inside their own bands
        from vlcsim.photometry import GRID, SpectralDistribution

        spds = []
        for lo, hi in md.DEFAULT_FILTER_BANDS:
            v = np.where((GRID > lo + 5) & (GRID < hi - 5), 1.0, 0.0)
            spds.append(SpectralDistribution(v))
        k = md.crosstalk_matrix(tuple(spds))
        assert np.allclose(k, np.eye(4), atol=1e-12)

    def test_columns_sum_below_one(self):
        k = md.default_crosstalk_matrix()
        assert np.all(k.sum(axis=0) <= 1.0 + 1e-12)

    def test_diagonal_dominates_columns(self):
        k = md.default_crosstalk_matrix()
        for j in range(4):
            col = k[:, j].copy()
            d = col[j]
            col[j] = -1
            assert d > col.max()

    def test_matches_direct_integration_oracle(self):
        from vlcsim.photometry import GRID

        k = md.default_crosstalk_matrix()
        spd = h_model_spd(LED_CHANNELS[CHANNEL_ORDER[0]])  # red
        lo, hi = md.DEFAULT_FILTER_BANDS[0]
        mask = (GRID >= lo) & (GRID <= hi)
        oracle = np.trapezoid(spd.values[mask], GRID[mask]) / np.trapezoid(spd.values, GRID)
        assert k[0, 0] == pytest.approx(oracle, rel=1e-12)

    def test_overlapping_bands_rejected(self):
        spds = tuple(h_model_spd(LED_CHANNELS[c]) for c in CHANNEL_ORDER)
        with pytest.raises(ValueError):
            md.crosstalk_matrix(spds, ((400, 500), (450, 550), (550, 650), (650, 700)))

    def test_zero_power_rejected(self):
        from vlcsim.photometry import GRID, SpectralDistribution

        spds = (
            SpectralDistribution(np.zeros_like(GRID)),
            h_model_spd(LED_CHANNELS["amber"]),
            h_model_spd(LED_CHANNELS["green"]),
            h_model_spd(LED_CHANNELS["blue"]),
        )
        with pytest.raises(ValueError):
            md.crosstalk_matrix(spds)


class TestCsk:
    def test_bit_pairs_to_patterns(self):
        cfg = md.CskConfig(crosstalk=np.eye(4), avg_power=1.0)
        tx = md.csk_modulate([0, 0], cfg)
        assert np.allclose(tx, [[1.0, 0, 0, 0]])

    def test_average_power_normalization(self):
        cfg = md.CskConfig(crosstalk=np.eye(4), avg_power=2.5)
        rng = np.random.default_rng(13)
        tx = md.csk_modulate(rng.integers(0, 2, 20_000), cfg)
        assert np.mean(np.sum(tx**2, axis=1)) == pytest.approx(2.5, rel=1e-9)

    def test_duty_cycle_quarter(self):
        cfg = md.CskConfig(crosstalk=np.eye(4))
        rng = np.random.default_rng(14)
        tx = md.csk_modulate(rng.integers(0, 2, 40_000), cfg)
        duty = (tx > 0).mean(axis=0)
        assert np.allclose(duty, 0.25, atol=0.02)

    def test_noiseless_loopback_identity(self):
        cfg = md.CskConfig(crosstalk=np.eye(4))
        rng = np.random.default_rng(15)
        bits = rng.integers(0, 2, 2000)
        rx = md.csk_modulate(bits, cfg) @ np.eye(4).T
        assert np.array_equal(md.csk_demodulate(rx, cfg), bits)

    def test_noiseless_loopback_with_crosstalk(self):
        cfg = md.CskConfig()
        rng = np.random.default_rng(16)
        bits = rng.integers(0, 2, 2000)
        rx = md.csk_modulate(bits, cfg) @ cfg.crosstalk.T
        assert np.array_equal(md.csk_demodulate(rx, cfg), bits)

    def test_bad_crosstalk_rejected(self):
        with pytest.raises(ValueError):
            md.CskConfig(crosstalk=np.full((4, 4), 1.5))
