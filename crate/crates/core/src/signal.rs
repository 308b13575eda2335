//! Signal containers and the exponential filter shared by every module.
//!
//! Time is measured in milliseconds throughout the crate.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::rng::RandomSource;

/// Per-step decay `exp(-dt/tau)` of a leaky integrator with time constant `tau_ms`.
pub fn decay_factor(tau_ms: f64, dt_ms: f64) -> Result<f64> {
    if !(tau_ms > 0.0) || !(dt_ms > 0.0) {
        return Err(domain(format!(
            "decay factor needs tau > 0 and dt > 0, got tau = {tau_ms}, dt = {dt_ms}"
        )));
    }
    Ok((-dt_ms / tau_ms).exp())
}

/// Exponentially smoothed trace `out[t] = alpha * out[t-1] + train[t]`, starting from silence.
pub fn exp_filter(train: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut acc = 0.0;
    Ok(train
        .iter()
        .map(|&z| {
            acc = alpha * acc + z;
            acc
        })
        .collect())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(domain(format!(
            "filter coefficient must lie in [0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// I.i.d. uniform samples on `[low, high]` as a single-channel signal.
pub fn white_noise(
    length: usize,
    low: f64,
    high: f64,
    dt_ms: f64,
    rng: &mut RandomSource,
) -> Result<AnalogSignal> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(domain(format!(
            "white noise needs finite low < high, got [{low}, {high}]"
        )));
    }
    if length == 0 {
        return Err(domain("white noise length must be at least 1"));
    }
    let samples = (0..length).map(|_| rng.uniform(low, high)).collect();
    AnalogSignal::mono(samples, dt_ms)
}

/// A sampled, possibly multi-channel, real-valued signal.
///
/// Samples are stored time-major: `sample(t)` is the vector of channel values at step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalEnvelope", into = "SignalEnvelope")]
pub struct AnalogSignal {
    dt_ms: f64,
    channels: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalEnvelope {
    dt_ms: f64,
    length: usize,
    channels: usize,
    samples: Vec<Vec<f64>>,
}

impl TryFrom<SignalEnvelope> for AnalogSignal {
    type Error = Error;

    fn try_from(env: SignalEnvelope) -> Result<Self> {
        if env.samples.len() != env.length {
            return Err(contract(format!(
                "envelope declares {} samples but carries {}",
                env.length,
                env.samples.len()
            )));
        }
        let sig = AnalogSignal::from_rows(env.samples, env.dt_ms)?;
        if sig.channels != env.channels {
            return Err(contract(format!(
                "envelope declares {} channels but rows have {}",
                env.channels, sig.channels
            )));
        }
        Ok(sig)
    }
}

impl From<AnalogSignal> for SignalEnvelope {
    fn from(sig: AnalogSignal) -> Self {
        SignalEnvelope {
            dt_ms: sig.dt_ms,
            length: sig.len(),
            channels: sig.channels,
            samples: sig.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl AnalogSignal {
    pub fn mono(samples: Vec<f64>, dt_ms: f64) -> Result<Self> {
        Self::new(samples, 1, dt_ms)
    }

    /// Builds a signal from time-major rows of equal width.
    pub fn from_rows(rows: Vec<Vec<f64>>, dt_ms: f64) -> Result<Self> {
        let channels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != channels) {
            return Err(contract("signal rows have unequal channel counts"));
        }
        Self::new(rows.into_iter().flatten().collect(), channels, dt_ms)
    }

    fn new(data: Vec<f64>, channels: usize, dt_ms: f64) -> Result<Self> {
        if !(dt_ms > 0.0) || !dt_ms.is_finite() {
            return Err(domain(format!("sampling step must be positive, got {dt_ms}")));
        }
        if channels == 0 || data.is_empty() {
            return Err(contract("a signal needs at least one channel and one sample"));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!(
                "non-finite sample at step {}",
                i / channels
            )));
        }
        Ok(Self {
            dt_ms,
            channels,
            data,
        })
    }

    pub fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    /// Values of one channel over time.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    /// CSV with a `ch0,ch1,...` header and one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.channels).map(|c| format!("ch{c}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, dt_ms: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| contract(format!("bad sample {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows, dt_ms)
    }
}

/// Binary neuron-by-time spike record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RasterEnvelope", into = "RasterEnvelope")]
pub struct SpikeRaster {
    neurons: usize,
    steps: usize,
    dt_ms: f64,
    // neuron-major
    bits: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RasterEnvelope {
    dt_ms: f64,
    neurons: usize,
    steps: usize,
    spikes: Vec<Vec<u8>>,
}

impl TryFrom<RasterEnvelope> for SpikeRaster {
    type Error = Error;

    fn try_from(env: RasterEnvelope) -> Result<Self> {
        if env.spikes.len() != env.neurons {
            return Err(contract(format!(
                "raster declares {} neurons but carries {} rows",
                env.neurons,
                env.spikes.len()
            )));
        }
        let mut raster = SpikeRaster::new(env.neurons, env.steps, env.dt_ms)?;
        for (j, row) in env.spikes.iter().enumerate() {
            if row.len() != env.steps {
                return Err(contract(format!(
                    "raster row {j} has {} steps, expected {}",
                    row.len(),
                    env.steps
                )));
            }
            for (t, &b) in row.iter().enumerate() {
                raster.set(j, t, parse_bit(b)?);
            }
        }
        Ok(raster)
    }
}

impl From<SpikeRaster> for RasterEnvelope {
    fn from(r: SpikeRaster) -> Self {
        RasterEnvelope {
            dt_ms: r.dt_ms,
            neurons: r.neurons,
            steps: r.steps,
            spikes: (0..r.neurons)
                .map(|j| r.neuron(j).iter().map(|&b| u8::from(b)).collect())
                .collect(),
        }
    }
}

fn parse_bit(b: u8) -> Result<bool> {
    match b {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(contract(format!("spike entries must be 0 or 1, got {other}"))),
    }
}

impl SpikeRaster {
    /// An all-silent raster.
    pub fn new(neurons: usize, steps: usize, dt_ms: f64) -> Result<Self> {
        if !(dt_ms > 0.0) {
            return Err(domain(format!("sampling step must be positive, got {dt_ms}")));
        }
        Ok(Self {
            neurons,
            steps,
            dt_ms,
            bits: vec![false; neurons * steps],
        })
    }

    /// Builds a raster from per-step spike vectors (time-major input).
    pub fn from_steps(columns: &[Vec<bool>], neurons: usize, dt_ms: f64) -> Result<Self> {
        let mut raster = Self::new(neurons, columns.len(), dt_ms)?;
        for (t, col) in columns.iter().enumerate() {
            if col.len() != neurons {
                return Err(contract(format!(
                    "step {t} carries {} neurons, expected {neurons}",
                    col.len()
                )));
            }
            for (j, &b) in col.iter().enumerate() {
                raster.set(j, t, b);
            }
        }
        Ok(raster)
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    pub fn get(&self, neuron: usize, step: usize) -> bool {
        self.bits[neuron * self.steps + step]
    }

    pub fn set(&mut self, neuron: usize, step: usize, spike: bool) {
        self.bits[neuron * self.steps + step] = spike;
    }

    /// Spike train of one neuron.
    pub fn neuron(&self, j: usize) -> &[bool] {
        &self.bits[j * self.steps..(j + 1) * self.steps]
    }

    /// Spike train of one neuron as 0/1 reals, ready for filtering.
    pub fn train(&self, j: usize) -> Vec<f64> {
        self.neuron(j).iter().map(|&b| f64::from(u8::from(b))).collect()
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Headerless CSV: one row per neuron, one 0/1 column per step.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_writer(writer);
        for j in 0..self.neurons {
            w.write_record(self.neuron(j).iter().map(|&b| if b { "1" } else { "0" }))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, dt_ms: f64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| match s.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(contract(format!("spike entries must be 0 or 1, got {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let steps = rows.first().map_or(0, Vec::len);
        let mut raster = Self::new(rows.len(), steps, dt_ms)?;
        for (j, row) in rows.iter().enumerate() {
            if row.len() != steps {
                return Err(contract(format!("raster row {j} has {} steps, expected {steps}", row.len())));
            }
            for (t, &b) in row.iter().enumerate() {
                raster.set(j, t, b);
            }
        }
        Ok(raster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn decay_factor_anchor_values() {
        assert_relative_eq!(decay_factor(20.0, 1.0).unwrap(), 0.951_229_424_500_714, epsilon = 1e-12);
        assert_relative_eq!(decay_factor(7.5, 7.5).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        // exp(-0.001) = 0.999000499833375 (mpmath, 30 digits)
        assert_relative_eq!(decay_factor(1000.0, 1.0).unwrap(), 0.999_000_499_833_375, epsilon = 1e-14);
    }

    #[test]
    fn decay_factor_rejects_non_positive() {
        assert!(matches!(decay_factor(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(decay_factor(20.0, -1.0), Err(Error::Domain(_))));
        assert!(decay_factor(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn exp_filter_degenerate_and_impulse() {
        let train = [0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(exp_filter(&train, 0.0).unwrap(), train.to_vec());
        let impulse = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(exp_filter(&impulse, 0.5).unwrap(), vec![1.0, 0.5, 0.25, 0.125]);
        assert!(exp_filter(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn exp_filter_rejects_unstable_alpha() {
        assert!(matches!(exp_filter(&[1.0], 1.0), Err(Error::Domain(_))));
        assert!(exp_filter(&[1.0], -0.1).is_err());
    }

    #[test]
    fn exp_filter_matches_convolution() {
        let mut rng = RandomSource::new(11);
        let train: Vec<f64> = (0..300).map(|_| f64::from(u8::from(rng.bernoulli(0.2)))).collect();
        let alpha = 0.9;
        let out = exp_filter(&train, alpha).unwrap();
        for (t, &y) in out.iter().enumerate() {
            let direct: f64 = (0..=t).map(|s| alpha.powi((t - s) as i32) * train[s]).sum();
            assert!((y - direct).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn white_noise_contracts() {
        let a = white_noise(5, 0.0, 1.0, 1.0, &mut RandomSource::new(7)).unwrap();
        let b = white_noise(5, 0.0, 1.0, 1.0, &mut RandomSource::new(7)).unwrap();
        assert_eq!(a, b);
        let one = white_noise(1, 0.0, 1.0, 1.0, &mut RandomSource::new(3)).unwrap();
        assert_eq!(one.len(), 1);
        assert!((0.0..=1.0).contains(&one.sample(0)[0]));
        assert!(white_noise(3, 1.0, 1.0, 1.0, &mut RandomSource::new(3)).is_err());
        assert!(white_noise(0, 0.0, 1.0, 1.0, &mut RandomSource::new(3)).is_err());
    }

    #[test]
    fn white_noise_mean_is_centered() {
        for seed in [1, 2, 3] {
            let s = white_noise(10_000, -1.0, 1.0, 1.0, &mut RandomSource::new(seed)).unwrap();
            let mean = s.channel(0).iter().sum::<f64>() / 10_000.0;
            // sd of mean = sqrt(1/3)/100 ~ 0.0058; 0.05 is > 8 sd
            assert!(mean.abs() < 0.05, "seed {seed}: mean {mean}");
        }
    }

    #[test]
    fn signal_rejects_non_finite() {
        assert!(AnalogSignal::mono(vec![1.0, f64::NAN], 1.0).is_err());
        assert!(AnalogSignal::mono(vec![], 1.0).is_err());
        assert!(AnalogSignal::mono(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn signal_csv_and_json_round_trip() {
        let sig = AnalogSignal::from_rows(vec![vec![0.1, -2.0], vec![3.5, 1e-9]], 0.5).unwrap();
        let mut buf = Vec::new();
        sig.write_csv(&mut buf).unwrap();
        assert_eq!(AnalogSignal::read_csv(buf.as_slice(), 0.5).unwrap(), sig);
        let json = serde_json::to_string(&sig).unwrap();
        assert!(json.contains("\"dt_ms\":0.5"));
        assert_eq!(serde_json::from_str::<AnalogSignal>(&json).unwrap(), sig);
    }

    #[test]
    fn raster_json_rejects_bad_bits() {
        let bad = r#"{"dt_ms":1.0,"neurons":1,"steps":2,"spikes":[[0,2]]}"#;
        assert!(serde_json::from_str::<SpikeRaster>(bad).is_err());
    }

    fn raster_strategy() -> impl Strategy<Value = SpikeRaster> {
        (1usize..6, 1usize..40).prop_flat_map(|(n, t)| {
            proptest::collection::vec(any::<bool>(), n * t).prop_map(move |bits| {
                let mut r = SpikeRaster::new(n, t, 1.0).unwrap();
                for j in 0..n {
                    for s in 0..t {
                        r.set(j, s, bits[j * t + s]);
                    }
                }
                r
            })
        })
    }

    proptest! {
        #[test]
        fn raster_round_trips(r in raster_strategy()) {
            let mut buf = Vec::new();
            r.write_csv(&mut buf).unwrap();
            prop_assert_eq!(&SpikeRaster::read_csv(buf.as_slice(), 1.0).unwrap(), &r);
            let json = serde_json::to_string(&r).unwrap();
            prop_assert_eq!(&serde_json::from_str::<SpikeRaster>(&json).unwrap(), &r);
        }

        #[test]
        fn exp_filter_is_linear(
            x in proptest::collection::vec(-5.0f64..5.0, 1..60),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            alpha in 0.0f64..0.999,
        ) {
            let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7 - 0.2).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let fx = exp_filter(&x, alpha).unwrap();
            let fy = exp_filter(&y, alpha).unwrap();
            let fm = exp_filter(&mix, alpha).unwrap();
            for t in 0..x.len() {
                let expect = a * fx[t] + b * fy[t];
                let scale = 1.0 + (a * fx[t]).abs() + (b * fy[t]).abs();
                prop_assert!((fm[t] - expect).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn decay_factor_monotone(tau in 0.1f64..1e4, dt in 0.01f64..10.0, k in 1.01f64..3.0) {
            let base = decay_factor(tau, dt).unwrap();
            prop_assert!(decay_factor(tau * k, dt).unwrap() > base);
            prop_assert!(decay_factor(tau, dt * k).unwrap() < base);
        }
    }
}
