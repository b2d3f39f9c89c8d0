import wave

import numpy as np
import pytest

from oracles import direct_dft_power, reference_mel_filterbank, reference_mfcc
from pawkit import pawsim
from pawkit.dsp import (
    SAMPLE_RATE,
    AudioClip,
    MfccConfig,
    frame_count,
    hann_window,
    hz_from_mel,
    mel_filterbank,
    mel_from_hz,
    mfcc,
    mfcc_frames,
    power_spectrum,
    read_wav,
    truncate_to_impact,
    write_wav,
)
from pawkit.errors import (
    AudioFormatError,
    ConfigError,
    DimensionError,
    InsufficientAudioError,
    NumericError,
    ValidationError,
)


def _tone_clip(freq, n=2000, amp=8000, seed=None):
    t = np.arange(n) / SAMPLE_RATE
    x = amp * np.sin(2 * np.pi * freq * t)
    if seed is not None:
        x = x + np.random.default_rng(seed).normal(0, 200, n)
    return AudioClip(np.rint(x).astype(np.int16))


class TestScales:
    def test_mel_reference_points(self):
        assert mel_from_hz(0.0) == 0.0
        assert mel_from_hz(1000.0) == pytest.approx(999.986, abs=1e-2)

    def test_mel_round_trip(self):
        f = np.linspace(0, 8000, 50)
        assert np.allclose(hz_from_mel(mel_from_hz(f)), f, atol=1e-6)


class TestWindowing:
    def test_hann_is_periodic_form(self):
        assert np.allclose(hann_window(4), [0.0, 0.5, 1.0, 0.5])
        w = hann_window(512)
        assert w[0] == 0.0
        assert np.allclose(w[1:], w[1:][::-1])  # symmetric about n/2

    def test_frame_count_examples(self):
        assert frame_count(16000, 512, 160) == 97
        assert frame_count(1000, 512, 160) == 4
        assert frame_count(512, 512, 160) == 1
        with pytest.raises(InsufficientAudioError):
            frame_count(511, 512, 160)


class TestPowerSpectrum:
    def test_matches_direct_summation(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            frame = rng.normal(0.0, 1.0, 512)
            fast = power_spectrum(frame)
            slow = direct_dft_power(frame)
            assert fast.shape == (257,)
            assert np.allclose(fast, slow, rtol=1e-5, atol=slow.max() * 1e-12)

    def test_parseval_energy_balance(self):
        # one-sided |DFT|^2 doubles interior bins; total equals N * sum(xw^2)
        rng = np.random.default_rng(32)
        frame = rng.normal(0.0, 1.0, 512)
        spec = power_spectrum(frame)
        windowed = frame * hann_window(512)
        total = spec[0] + spec[-1] + 2.0 * spec[1:-1].sum()
        assert total == pytest.approx(512 * np.sum(windowed ** 2), rel=1e-10)

    def test_rejects_wrong_length_and_non_finite(self):
        with pytest.raises(DimensionError):
            power_spectrum(np.zeros(500))
        bad = np.zeros(512)
        bad[0] = np.inf
        with pytest.raises(NumericError):
            power_spectrum(bad)


class TestFilterbank:
    def test_structure(self):
        bank = mel_filterbank(MfccConfig())
        assert bank.shape == (20, 257)
        assert np.all(bank >= 0)
        assert np.allclose(bank.max(axis=1), 1.0)  # every triangle peaks at 1

    def test_matches_independent_construction(self):
        bank = mel_filterbank(MfccConfig())
        ref = reference_mel_filterbank(20, 512, SAMPLE_RATE, 0.0, 8000.0)
        assert np.allclose(bank, ref, atol=1e-12)

    def test_too_many_filters_rejected(self):
        with pytest.raises(ConfigError):
            mel_filterbank(MfccConfig(n_mel=300, n_mfcc=13))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            MfccConfig(n_mfcc=21)  # more coefficients than mel bands
        with pytest.raises(ConfigError):
            MfccConfig(fmax=9000.0)  # beyond Nyquist
        with pytest.raises(ConfigError):
            MfccConfig(frame_size=100, hop=160)
        with pytest.raises(ConfigError):
            MfccConfig(log_floor=0.0)


class TestMfcc:
    def test_matches_straight_line_reference(self):
        clips = []
        for ci, label in enumerate(pawsim.TERRAIN_CLASSES[:5]):
            clips.append(truncate_to_impact(pawsim.synth_impact(label, [50, ci]).clip))
        clips.append(_tone_clip(440.0))
        clips.append(_tone_clip(3000.0, seed=1))
        clips.append(_tone_clip(120.0, amp=2000))
        clips.append(AudioClip(np.random.default_rng(2).integers(
            -6000, 6000, 2000).astype(np.int16)))
        clips.append(_tone_clip(7000.0, amp=500, seed=3))
        assert len(clips) == 10
        for clip in clips:
            ours = mfcc(clip)
            ref = reference_mfcc(clip.as_float())
            assert ours.shape == (13,)
            assert np.max(np.abs(ours - ref)) < 1e-4

    def test_frame_layout(self):
        clip = pawsim.synth_impact("gravel", 0).clip
        frames = mfcc_frames(clip.as_float())
        assert frames.shape == (97, 13)
        pooled = mfcc(clip)
        assert np.allclose(pooled, frames.mean(axis=0))

    def test_deterministic(self):
        clip = _tone_clip(440.0, seed=4)
        assert np.array_equal(mfcc(clip), mfcc(clip))

    def test_silence_hits_log_floor(self):
        clip = AudioClip(np.zeros(1000, dtype=np.int16))
        coeffs = mfcc(clip)
        # constant log-energy vector: only coefficient 0 is non-zero
        assert coeffs[0] == pytest.approx(np.sqrt(20) * np.log(1e-10), rel=1e-9)
        assert np.allclose(coeffs[1:], 0.0, atol=1e-9)

    def test_amplitude_scaling_shifts_only_coefficient_zero(self):
        base = _tone_clip(440.0, amp=4000)
        doubled = AudioClip((base.samples * 2).astype(np.int16))
        a = mfcc(base)
        b = mfcc(doubled)
        # power scales by 4, log-energies shift by ln 4 in every band
        assert b[0] - a[0] == pytest.approx(np.sqrt(20) * np.log(4.0), rel=1e-6)
        assert np.allclose(a[1:], b[1:], atol=1e-6)


class TestImpactWindow:
    def test_window_length_and_position(self):
        samples = np.zeros(3000, dtype=np.int16)
        samples[1500] = 100
        out = truncate_to_impact(AudioClip(samples))
        assert len(out) == 1000
        # every window containing the lone spike ties; earliest wins
        assert np.array_equal(out.samples, samples[501:1501])

    def test_exact_tie_prefers_earliest(self):
        samples = np.zeros(5000, dtype=np.int16)
        burst = np.array([300, -300, 200, -200], dtype=np.int16)
        samples[1000:1004] = burst
        samples[3500:3504] = burst  # identical energy, later
        out = truncate_to_impact(AudioClip(samples))
        assert np.array_equal(out.samples, samples[4:1004])

    def test_finds_loudest_not_first(self):
        samples = np.zeros(5000, dtype=np.int16)
        samples[500] = 10
        samples[4000] = 1000
        out = truncate_to_impact(AudioClip(samples))
        assert samples[4000] in out.samples

    def test_too_short_clip_rejected(self):
        with pytest.raises(InsufficientAudioError):
            truncate_to_impact(AudioClip(np.zeros(999, dtype=np.int16)))


class TestAudioClip:
    def test_as_float_scale(self):
        clip = AudioClip(np.array([-32768, 0, 16384], dtype=np.int16))
        assert np.allclose(clip.as_float(), [-1.0, 0.0, 0.5])

    def test_rejects_bad_shape_and_rate(self):
        with pytest.raises(DimensionError):
            AudioClip(np.zeros((2, 10), dtype=np.int16))
        with pytest.raises(ValidationError):
            AudioClip(np.zeros(10, dtype=np.int16), sample_rate=44100)


class TestWavIo:
    def test_round_trip_bitwise(self, tmp_path):
        clip = pawsim.synth_impact("sand", 8).clip
        path = tmp_path / "clip.wav"
        write_wav(path, clip)
        again = read_wav(path)
        assert np.array_equal(clip.samples, again.samples)
        write_wav(tmp_path / "clip2.wav", again)
        assert (tmp_path / "clip.wav").read_bytes() == (tmp_path / "clip2.wav").read_bytes()

    def test_rejects_stereo(self, tmp_path):
        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(SAMPLE_RATE)
            w.writeframes(np.zeros(400, dtype="<i2").tobytes())
        with pytest.raises(AudioFormatError):
            read_wav(path)

    def test_rejects_wrong_rate(self, tmp_path):
        path = tmp_path / "slow.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(8000)
            w.writeframes(np.zeros(400, dtype="<i2").tobytes())
        with pytest.raises(AudioFormatError):
            read_wav(path)

    def test_rejects_wrong_width(self, tmp_path):
        path = tmp_path / "wide.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(4)
            w.setframerate(SAMPLE_RATE)
            w.writeframes(np.zeros(800, dtype="<i4").tobytes())
        with pytest.raises(AudioFormatError):
            read_wav(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "noise.bin"
        path.write_bytes(b"definitely not a wav file")
        with pytest.raises(AudioFormatError):
            read_wav(path)
