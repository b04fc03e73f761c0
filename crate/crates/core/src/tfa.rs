//! Time-frequency images from vibration snapshots.
//!
//! A snapshot is tiled into overlapping frames; each frame is windowed,
//! zero-padded, transformed with a radix-2 FFT and reduced to the
//! magnitudes of the lowest one-sided bins. Row = frequency band, column =
//! time window.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::Execution;

/// Burst length of one acquisition, seconds.
pub const SNAPSHOT_DURATION: f64 = 0.1;

pub const VTFA_MAGIC: &[u8; 8] = b"VTFA0001";
pub const IMAGE_SIDE: usize = 64;

/// Number of samples in a snapshot acquired at `sample_rate`.
pub fn snapshot_len(sample_rate: f64) -> usize {
    (sample_rate * SNAPSHOT_DURATION).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibrationSnapshot {
    /// Seconds since the start of the run.
    pub timestamp: f64,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl VibrationSnapshot {
    pub fn new(timestamp: f64, samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::Input(format!("sample rate must be positive, got {sample_rate}")));
        }
        if !(timestamp >= 0.0) {
            return Err(Error::Input(format!("timestamp must be nonnegative, got {timestamp}")));
        }
        Ok(VibrationSnapshot {
            timestamp,
            samples,
            sample_rate,
        })
    }

    /// Checks the sample count against the configured burst length.
    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.samples.len() != expected {
            return Err(Error::Ingestion(format!(
                "snapshot at t={}s has {} samples, expected {}",
                self.timestamp,
                self.samples.len(),
                expected
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(WindowKind::Hann),
            "rectangular" | "rect" => Ok(WindowKind::Rectangular),
            other => Err(Error::Config(format!("unknown window kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
    pub n_time_bins: usize,
    pub n_freq_bins: usize,
}

impl Default for StftConfig {
    /// 2560-sample tiling: 64 frames of 128 samples at hop 38.
    fn default() -> Self {
        StftConfig {
            frame_length: 128,
            hop: 38,
            fft_size: 128,
            window: WindowKind::Hann,
            n_time_bins: IMAGE_SIDE,
            n_freq_bins: IMAGE_SIDE,
        }
    }
}

impl StftConfig {
    /// Samples spanned by the full tiling.
    pub fn span(&self) -> usize {
        (self.n_time_bins - 1) * self.hop + self.frame_length
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.hop == 0 || self.n_time_bins == 0 || self.n_freq_bins == 0 {
            return Err(Error::Config("STFT sizes must be positive".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_length {
            return Err(Error::Config(format!(
                "fft_size {} must be a power of two >= frame_length {}",
                self.fft_size, self.frame_length
            )));
        }
        if self.n_freq_bins > self.fft_size / 2 {
            return Err(Error::Config(format!(
                "n_freq_bins {} exceeds fft_size/2 = {}",
                self.n_freq_bins,
                self.fft_size / 2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfaImage {
    /// Snapshot timestamp, seconds.
    pub timestamp: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major, `n_rows` frequency bands by `n_cols` time windows.
    pub values: Vec<f32>,
    pub band_width_hz: f64,
    /// Frame-center offsets within the snapshot, seconds.
    pub window_times: Vec<f64>,
}

impl TfaImage {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n_cols + col]
    }

    /// Row index holding the maximum of column `col`.
    pub fn column_argmax(&self, col: usize) -> usize {
        let mut best = 0;
        for r in 1..self.n_rows {
            if self.get(r, col) > self.get(best, col) {
                best = r;
            }
        }
        best
    }

    /// Image with the given values and default 64×64 metadata, for tests and decoding.
    pub fn from_values(timestamp: f64, values: Vec<f32>) -> Result<Self> {
        if values.len() != IMAGE_SIDE * IMAGE_SIDE {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                IMAGE_SIDE * IMAGE_SIDE,
                values.len()
            )));
        }
        let cfg = StftConfig::default();
        let fs = 25_600.0;
        Ok(TfaImage {
            timestamp,
            n_rows: IMAGE_SIDE,
            n_cols: IMAGE_SIDE,
            values,
            band_width_hz: fs / cfg.fft_size as f64,
            window_times: window_times(&cfg, fs),
        })
    }
}

fn window_times(cfg: &StftConfig, sample_rate: f64) -> Vec<f64> {
    (0..cfg.n_time_bins)
        .map(|m| (m * cfg.hop) as f64 / sample_rate + cfg.frame_length as f64 / (2.0 * sample_rate))
        .collect()
}

/// Direct O(n²) discrete Fourier transform.
pub fn dft_oracle(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    (0..n)
        .map(|k| {
            samples
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    // reduce k*j mod n first to keep the angle small
                    let angle = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    x * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

/// Radix-2 decimation-in-time FFT of `samples` zero-padded to `size`.
pub fn fft(samples: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    if !size.is_power_of_two() {
        return Err(Error::Config(format!("FFT size {size} is not a power of two")));
    }
    if samples.len() > size {
        return Err(Error::Config(format!(
            "FFT input of length {} exceeds size {size}",
            samples.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[..samples.len()].copy_from_slice(samples);
    let twiddles = twiddle_table(size);
    fft_in_place(&mut buf, &twiddles);
    Ok(buf)
}

fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect()
}

fn fft_in_place(buf: &mut [Complex64], twiddles: &[Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Magnitude spectrogram of one snapshot.
pub fn stft(snapshot: &VibrationSnapshot, config: &StftConfig) -> Result<TfaImage> {
    config.validate()?;
    if snapshot.samples.len() < config.span() {
        return Err(Error::Ingestion(format!(
            "snapshot at t={}s has {} samples; tiling needs {}",
            snapshot.timestamp,
            snapshot.samples.len(),
            config.span()
        )));
    }
    let window = config.window.coefficients(config.frame_length);
    let twiddles = twiddle_table(config.fft_size);
    let (rows, cols) = (config.n_freq_bins, config.n_time_bins);
    let mut values = vec![0f32; rows * cols];
    let mut buf = vec![Complex64::new(0.0, 0.0); config.fft_size];
    for m in 0..cols {
        let start = m * config.hop;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (&x, &w)) in snapshot.samples[start..start + config.frame_length]
            .iter()
            .zip(&window)
            .enumerate()
        {
            buf[i] = Complex64::new(x * w, 0.0);
        }
        fft_in_place(&mut buf, &twiddles);
        for f in 0..rows {
            values[f * cols + m] = buf[f].norm() as f32;
        }
    }
    Ok(TfaImage {
        timestamp: snapshot.timestamp,
        n_rows: rows,
        n_cols: cols,
        values,
        band_width_hz: snapshot.sample_rate / config.fft_size as f64,
        window_times: window_times(config, snapshot.sample_rate),
    })
}

/// Spectrograms for a batch of snapshots, in input order.
pub fn stft_batch(
    snapshots: &[VibrationSnapshot],
    config: &StftConfig,
    exec: Execution,
) -> Result<Vec<TfaImage>> {
    exec.map_slice(snapshots, |s| stft(s, config))
        .into_iter()
        .collect()
}

/// `log1p` followed by per-image min–max rescaling onto [0, 1].
/// A constant image maps to all zeros.
pub fn tfa_normalize(image: &TfaImage) -> TfaImage {
    let logged: Vec<f64> = image.values.iter().map(|&v| (v as f64).ln_1p()).collect();
    let lo = logged.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logged.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let values = if range > 0.0 && range.is_finite() {
        logged.iter().map(|&v| ((v - lo) / range) as f32).collect()
    } else {
        vec![0f32; logged.len()]
    };
    TfaImage {
        values,
        ..image.clone()
    }
}

pub fn encode_vtfa(image: &TfaImage) -> Result<Vec<u8>> {
    if image.n_rows != IMAGE_SIDE || image.n_cols != IMAGE_SIDE {
        return Err(Error::Shape(format!(
            "VTFA stores 64x64 images, got {}x{}",
            image.n_rows, image.n_cols
        )));
    }
    let mut out = Vec::with_capacity(8 + 8 + 4 * image.values.len());
    out.extend_from_slice(VTFA_MAGIC);
    out.extend_from_slice(&image.timestamp.to_le_bytes());
    for v in &image.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_vtfa(bytes: &[u8]) -> Result<TfaImage> {
    let n = IMAGE_SIDE * IMAGE_SIDE;
    if bytes.len() < 16 || &bytes[..8] != VTFA_MAGIC {
        return Err(Error::Format("missing VTFA0001 magic".into()));
    }
    if bytes.len() != 16 + 4 * n {
        return Err(Error::Format(format!(
            "VTFA payload has {} bytes, expected {}",
            bytes.len(),
            16 + 4 * n
        )));
    }
    let timestamp = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TfaImage::from_values(timestamp, values)
}

pub fn write_vtfa(path: &Path, image: &TfaImage) -> Result<()> {
    let bytes = encode_vtfa(image)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_vtfa(path: &Path) -> Result<TfaImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_vtfa(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn dft_oracle_hand_cases() {
        let out = dft_oracle(&[c(1., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]);
        assert!(max_rel(&out, &[c(4., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]) < 1e-12);
        let out = dft_oracle(&[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!(max_rel(&out, &[c(1., 0.); 4]) < 1e-12);
        let out = dft_oracle(&[c(0., 0.), c(1., 0.), c(0., 0.), c(-1., 0.)]);
        assert!(max_rel(&out, &[c(0., 0.), c(0., -2.), c(0., 0.), c(0., 2.)]) < 1e-12);
    }

    #[test]
    fn fft_constant_and_padding() {
        let out = fft(&[c(1., 0.); 4], 4).unwrap();
        assert!(max_rel(&out, &[c(4., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]) < 1e-12);
        let short = [c(1., 0.), c(2., 0.), c(3., 0.)];
        let mut padded = short.to_vec();
        padded.resize(8, c(0., 0.));
        assert!(max_rel(&fft(&short, 8).unwrap(), &dft_oracle(&padded)) < 1e-12);
    }

    #[test]
    fn fft_rejects_bad_size() {
        assert!(matches!(fft(&[c(1., 0.)], 6), Err(Error::Config(_))));
        assert!(matches!(fft(&[c(1., 0.); 9], 8), Err(Error::Config(_))));
    }

    #[test]
    fn fft_matches_oracle_random_128() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<_> = (0..128)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        assert!(max_rel(&fft(&x, 128).unwrap(), &dft_oracle(&x)) < 1e-9);
    }

    fn tone(freq: f64, fs: f64, n: usize) -> VibrationSnapshot {
        let samples = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
        VibrationSnapshot::new(0.0, samples, fs).unwrap()
    }

    #[test]
    fn default_tiling_fits_snapshot() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.span(), 2522);
        assert!(cfg.span() <= snapshot_len(25_600.0));
        assert_eq!(snapshot_len(25_600.0), 2560);
    }

    #[test]
    fn stft_constant_signal_is_dc_only() {
        let snap = VibrationSnapshot::new(3.0, vec![1.0; 2560], 25_600.0).unwrap();
        let cfg = StftConfig {
            window: WindowKind::Rectangular,
            ..StftConfig::default()
        };
        let img = stft(&snap, &cfg).unwrap();
        assert_eq!((img.n_rows, img.n_cols), (64, 64));
        for m in 0..64 {
            let dc = img.get(0, m) as f64;
            assert!((dc - 128.0).abs() < 1e-3);
            for f in 1..64 {
                assert!((img.get(f, m) as f64) < 1e-9 * dc);
            }
        }
    }

    #[test]
    fn stft_sinusoid_peak_row() {
        let img = stft(&tone(4000.0, 25_600.0, 2560), &StftConfig::default()).unwrap();
        assert_eq!(img.band_width_hz, 200.0);
        for m in 0..64 {
            assert_eq!(img.column_argmax(m), 20);
        }
    }

    #[test]
    fn stft_short_snapshot_names_timestamp() {
        let snap = VibrationSnapshot::new(42.0, vec![0.0; 2000], 25_600.0).unwrap();
        let err = stft(&snap, &StftConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Ingestion(ref m) if m.contains("t=42")));
    }

    #[test]
    fn stft_rejects_too_many_bins() {
        let cfg = StftConfig {
            n_freq_bins: 65,
            ..StftConfig::default()
        };
        assert!(matches!(stft(&tone(1.0, 25_600.0, 2560), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn normalize_edge_cases() {
        let zero = TfaImage::from_values(0.0, vec![0.0; 4096]).unwrap();
        assert!(tfa_normalize(&zero).values.iter().all(|&v| v == 0.0));
        let mut vals = vec![0f32; 4096];
        vals[17] = (std::f64::consts::E - 1.0) as f32;
        let img = TfaImage::from_values(0.0, vals).unwrap();
        let n = tfa_normalize(&img);
        assert_eq!(n.values[17], 1.0);
        assert_eq!(n.values[0], 0.0);
        // full-span output is a fixed point only up to the log1p reshaping;
        // the zero image is exactly idempotent
        assert_eq!(tfa_normalize(&tfa_normalize(&zero)), tfa_normalize(&zero));
    }

    #[test]
    fn vtfa_round_trip_and_corruption() {
        let img = stft(&tone(1000.0, 25_600.0, 2560), &StftConfig::default()).unwrap();
        let bytes = encode_vtfa(&img).unwrap();
        assert_eq!(bytes.len(), 8 + 8 + 4 * 4096);
        let back = decode_vtfa(&bytes).unwrap();
        assert_eq!(back.values, img.values);
        assert_eq!(back.timestamp.to_bits(), img.timestamp.to_bits());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_vtfa(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_vtfa(&bytes[..100]), Err(Error::Format(_))));
    }
}
