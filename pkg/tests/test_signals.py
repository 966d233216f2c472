import numpy as np
import pytest

from zcwi.reference import woodward_from_table
from zcwi.signals import (
    BandLimited,
    Butterworth,
    FMCarrier,
    GaussianShape,
    ModifiedLorentzian,
    MultiSine,
    Waveform,
    analytic_signal,
    delay_and_corrupt,
    synth_fm_carrier,
    synth_gaussian,
    synth_multisine,
)


def ensemble_periodogram(model, n, dt, seeds):
    acc = None
    for seed in seeds:
        w = synth_gaussian(model, n, dt, seed)
        p = np.abs(np.fft.rfft(w.samples)) ** 2 * dt / n
        acc = p if acc is None else acc + p
    return acc / len(seeds)


class TestWaveform:
    def test_duration(self):
        w = Waveform(np.zeros(101), 0.5)
        assert w.duration == 50.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            Waveform(np.zeros(16), 0.0)
        with pytest.raises(ValueError):
            Waveform(np.zeros(16), np.nan)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Waveform(np.array([]), 0.1)


class TestGaussianSynthesis:
    def test_unit_variance_bandlimited(self):
        vs = [np.var(synth_gaussian(BandLimited(W=2.0), 2**16, 0.2, s).samples) for s in range(8)]
        # estimator scatter for this record length is well under 2%
        assert abs(np.mean(vs) - 1.0) < 3 * 0.02

    def test_deterministic(self):
        m = GaussianShape(bandwidth=1.5)
        a = synth_gaussian(m, 4096, 0.1, 3)
        b = synth_gaussian(m, 4096, 0.1, 3)
        assert np.array_equal(a.samples, b.samples)

    def test_seeds_differ(self):
        m = GaussianShape(bandwidth=1.5)
        a = synth_gaussian(m, 4096, 0.1, 3)
        b = synth_gaussian(m, 4096, 0.1, 4)
        assert not np.array_equal(a.samples, b.samples)

    @pytest.mark.parametrize(
        "model",
        [
            BandLimited(W=2.0),
            BandLimited(W=4.0, low=2.0),
            GaussianShape(bandwidth=1.0),
            Butterworth(kappa=2.0, W=1.0),
            ModifiedLorentzian(gamma=5.0, W=0.5),
        ],
        ids=["lowpass", "bandpass", "gauss", "butterworth", "lorentzian"],
    )
    def test_spectrum_fidelity(self, model):
        # ensemble periodogram (64 seeds, 2^16 samples, block-smoothed)
        # matches the target density with relative L2 < 5% over the band
        # holding the central 99% of the power
        n, dt = 2**16, 0.1
        p = ensemble_periodogram(model, n, dt, range(64))
        om = 2 * np.pi * np.fft.rfftfreq(n, d=dt)
        target = model.density(om)
        cum = np.cumsum(target)
        band = (cum >= 0.005 * cum[-1]) & (cum <= 0.995 * cum[-1]) & (om > 0)
        block = 16
        nb = band.sum() // block * block
        pb = p[band][:nb].reshape(-1, block).mean(axis=1)
        tb = target[band][:nb].reshape(-1, block).mean(axis=1)
        rel = np.linalg.norm(pb - tb) / np.linalg.norm(tb)
        assert rel < 0.05

    def test_zero_crossing_rate_tracks_rms_bandwidth(self):
        from zcwi.crossings import detect_crossings

        rates = []
        for seed in range(16):
            w = synth_gaussian(GaussianShape(bandwidth=1.0), 2**16, 0.2, seed)
            rates.append(detect_crossings(w).rate)
        assert abs(np.mean(rates) * np.pi - 1.0) < 0.02

    def test_lorentzian_autocorrelation_oracle(self):
        # ensemble empirical autocorrelation against the closed form
        model = ModifiedLorentzian(gamma=5.0, W=1.0)
        n, dt = 2**16, 0.05
        acc = np.zeros(200)
        for seed in range(64):
            x = synth_gaussian(model, n, dt, seed).samples
            spec = np.abs(np.fft.fft(x)) ** 2
            r = np.fft.ifft(spec).real / n
            acc += r[:200]
        acc /= 64
        tau = np.arange(200) * dt
        ref = model.autocorrelation(tau)
        assert np.max(np.abs(acc - ref)) < 0.02 * model.variance

    def test_rejects_multisine_model(self):
        with pytest.raises(ValueError):
            synth_gaussian(MultiSine(frequencies=(1.0,)), 1024, 0.1, 0)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            synth_gaussian(GaussianShape(bandwidth=1.0), 1024, -0.1, 0)

    def test_rejects_short_record(self):
        with pytest.raises(ValueError):
            synth_gaussian(GaussianShape(bandwidth=1.0), 8, 0.1, 0)


class TestMultiSine:
    def test_single_tone_exact(self):
        m = MultiSine(frequencies=(0.25,), amplitude=1.0, seed=9)
        w = synth_multisine(m, 4096, 0.1, 0)
        phase = np.random.default_rng(9).uniform(-np.pi, np.pi, 1)[0]
        t = np.arange(4096) * 0.1
        assert np.allclose(w.samples, np.sin(2 * np.pi * 0.25 * t + phase), atol=1e-12)

    def test_two_tone_variance_additive(self):
        m = MultiSine(frequencies=(0.21, 0.53), amplitude=1.0)
        w = synth_multisine(m, 2**16, 0.1, 5)
        assert abs(np.var(w.samples) - 1.0) < 0.02  # 2 * A^2/2

    def test_rejects_nyquist(self):
        with pytest.raises(ValueError):
            synth_multisine(MultiSine(frequencies=(5.0,)), 1024, 0.1, 0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            MultiSine(frequencies=())


class TestFMCarrier:
    def test_zero_index_is_pure_tone(self):
        w = synth_fm_carrier(FMCarrier(1.4, 0.02, 0.0), 4096, 0.125, 1)
        f0 = round(1.4 * 4096 * 0.125) / (4096 * 0.125)
        t = np.arange(4096) * 0.125
        assert np.max(np.abs(w.samples - np.cos(2 * np.pi * f0 * t))) < 1e-12

    def test_envelope_constant(self):
        model = FMCarrier(carrier_hz=1.4, noise_bandwidth_hz=0.0317, modulation_index=4.0)
        pair = analytic_signal(synth_fm_carrier(model, 2**15, 0.125, 3))
        env = np.hypot(pair.x.samples, pair.y.samples)
        inner = env[2000:-2000]
        assert (inner.max() - inner.min()) / inner.mean() < 1e-6

    def test_occupied_bandwidth(self):
        # periodogram-quadrature occupied bandwidth within 15% of configured
        model = FMCarrier(carrier_hz=1.4, noise_bandwidth_hz=0.0317, modulation_index=4.0)
        n, dt = 2**16, 0.125
        p = ensemble_periodogram_fm(model, n, dt, range(12))
        om = 2 * np.pi * np.fft.rfftfreq(n, d=dt)
        rep = woodward_from_table(om, p)
        assert abs(rep.occupied_bandwidth / model.occupied_bandwidth_hz - 1.0) < 0.15

    def test_rejects_nyquist_overflow(self):
        with pytest.raises(ValueError):
            synth_fm_carrier(FMCarrier(4.5, 0.02, 1.0), 1024, 0.125, 0)
        with pytest.raises(ValueError):
            synth_fm_carrier(FMCarrier(3.9, 0.2, 4.0), 1024, 0.125, 0)


def ensemble_periodogram_fm(model, n, dt, seeds):
    acc = None
    for seed in seeds:
        w = synth_fm_carrier(model, n, dt, seed)
        p = np.abs(np.fft.rfft(w.samples)) ** 2 * dt / n
        acc = p if acc is None else acc + p
    return acc / len(seeds)


class TestAnalyticSignal:
    def test_cosine_maps_to_sine(self):
        t = np.arange(4096) * 0.1
        om = 2 * np.pi * 16 / (4096 * 0.1)  # exact bin
        pair = analytic_signal(Waveform(np.cos(om * t), 0.1))
        assert np.max(np.abs(pair.x.samples - np.sin(om * t))) < 1e-9
        assert np.array_equal(pair.y.samples, np.cos(om * t))

    def test_sine_maps_to_negative_cosine(self):
        t = np.arange(4096) * 0.1
        om = 2 * np.pi * 16 / (4096 * 0.1)
        pair = analytic_signal(Waveform(np.sin(om * t), 0.1))
        assert np.max(np.abs(pair.x.samples + np.cos(om * t))) < 1e-9

    def test_energy_preservation(self):
        # odd length: the transform drops only the mean (an even-length record
        # would also lose its Nyquist bin)
        rng = np.random.default_rng(0)
        y = rng.standard_normal(2**14 + 1)
        pair = analytic_signal(Waveform(y, 0.1))
        a = np.linalg.norm(pair.x.samples)
        b = np.linalg.norm(y - y.mean())
        assert abs(a / b - 1.0) < 1e-6

    def test_involution_up_to_sign(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 2**14, 0.1, 8)
        once = analytic_signal(w)
        twice = analytic_signal(once.x)
        inner = slice(500, -500)
        target = -(w.samples - w.samples.mean())
        err = np.linalg.norm(twice.x.samples[inner] - target[inner])
        assert err / np.linalg.norm(target[inner]) < 1e-6

    def test_guard_marked(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 2**12, 0.1, 8)
        pair = analytic_signal(w)
        assert pair.x.guard == pytest.approx(0.02 * w.duration)

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            analytic_signal(Waveform(np.ones(3), 0.1))


class TestDelayAndCorrupt:
    def test_identity(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 4096, 0.1, 1)
        out = delay_and_corrupt(w, 0.0, np.inf, 0)
        assert np.max(np.abs(out.samples - w.samples)) < 1e-12

    def test_fractional_delay_of_sinusoid(self):
        # cross-correlation peak of a delayed tone lands at the configured lag
        n, dt = 8192, 0.1
        t = np.arange(n) * dt
        om = 2 * np.pi * 24 / (n * dt)
        w = Waveform(np.sin(om * t), dt)
        delta = 3.5 * dt
        out = delay_and_corrupt(w, delta, np.inf, 0)
        ref = np.sin(om * (t - delta))
        assert np.max(np.abs(out.samples - ref)) < 1e-9
        corr = np.fft.irfft(np.conj(np.fft.rfft(w.samples)) * np.fft.rfft(out.samples))
        k = np.argmax(corr[:64])
        y0, y1, y2 = corr[k - 1], corr[k], corr[k + 1]
        frac = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
        assert abs((k + frac) * dt - delta) < 0.05 * dt

    def test_snr_definition(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 2**16, 0.1, 2)
        out = delay_and_corrupt(w, 0.0, 0.0, 3)
        noise = out.samples - w.samples
        assert abs(np.var(noise) / np.var(w.samples) - 1.0) < 0.05

    def test_guard_covers_wrap(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 4096, 0.1, 1)
        out = delay_and_corrupt(w, 5.0, np.inf, 0)
        assert out.guard >= 5.0

    def test_rejects_out_of_range(self):
        w = synth_gaussian(GaussianShape(bandwidth=1.0), 1024, 0.1, 1)
        with pytest.raises(ValueError):
            delay_and_corrupt(w, w.duration, 20.0, 0)


class TestModelValidation:
    def test_butterworth_kappa(self):
        with pytest.raises(ValueError):
            Butterworth(kappa=0.9, W=1.0)

    def test_lorentzian_gamma(self):
        with pytest.raises(ValueError):
            ModifiedLorentzian(gamma=1.0, W=1.0)

    def test_bandlimited_edges(self):
        with pytest.raises(ValueError):
            BandLimited(W=1.0, low=1.0)

    def test_lorentzian_rms_bandwidth(self):
        m = ModifiedLorentzian(gamma=9.0, W=2.0)
        assert m.rms_bandwidth == pytest.approx(6.0)
