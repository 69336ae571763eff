//! Fixed-point inference engine for trained networks.
//!
//! Parameters and inputs are mapped to 32-bit integers with the rational
//! scale `2^30 / 10`, multiply-accumulates run in 64-bit, and the result is
//! rescaled back with round-half-away-from-zero.  No floating point is
//! touched after quantization, so inference is bit-reproducible across
//! platforms and suitable for kernels or microcontrollers that must not use
//! the FPU.

use std::fs;
use std::io::Read as _;
use std::path::Path;

use crate::encoder::{encode_step, flatten, EncodedState, EncoderConfig, StateLayout};
use crate::error::{Error, Result};
use crate::governor::Governor;
use crate::power::{FreqLevel, FrequencyTable};
use crate::rl::net::QNet;
use crate::sim::Observation;

/// Numerator of the fixed-point scale: values are stored as
/// `round(x * SCALE_NUM / SCALE_DEN)`.
pub const SCALE_NUM: i64 = 1 << 30;
pub const SCALE_DEN: i64 = 10;

/// Largest magnitude a parameter may have and still fit the envelope.
pub const QUANT_LIMIT: f64 = 10.0;

/// Worst-case absolute error of one quantize/dequantize round trip.
pub const ROUND_TRIP_EPS: f64 = 0.5 * SCALE_DEN as f64 / SCALE_NUM as f64;

/// Map a float into the fixed-point domain (round half away from zero).
pub fn quantize_value(x: f64) -> i32 {
    let scaled = x * SCALE_NUM as f64 / SCALE_DEN as f64;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5).floor()
    } else {
        (scaled - 0.5).ceil()
    };
    rounded as i32
}

/// Map a fixed-point value back to float.
pub fn dequantize_value(q: i32) -> f64 {
    q as f64 * SCALE_DEN as f64 / SCALE_NUM as f64
}

/// Rescale a 64-bit accumulator of products of two quantized values back to
/// the quantized domain: `round_half_away(acc * SCALE_DEN / SCALE_NUM)`,
/// computed entirely in integers.
fn rescale(acc: i64) -> i64 {
    let t = acc as i128 * SCALE_DEN as i128;
    let half = (SCALE_NUM as i128) / 2;
    let q = (t.abs() + half) >> 30;
    if t < 0 {
        -q as i64
    } else {
        q as i64
    }
}

/// A fully quantized network plus the quantized action inputs it selects
/// between.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedQNet {
    pub sizes: Vec<usize>,
    /// Same row-major layout as the float network.
    pub weights: Vec<Vec<i32>>,
    pub biases: Vec<Vec<i32>>,
    /// Quantized normalized frequency of each selectable level, derived
    /// from integer kilohertz so no float enters the deployed artifact.
    pub action_inputs: Vec<i32>,
    pub layout: StateLayout,
    /// Fingerprint of the frequency table the actions index into.
    pub table_fingerprint: String,
}

fn check_range(name: String, value: f64) -> Result<i32> {
    if !value.is_finite() || value.abs() > QUANT_LIMIT {
        return Err(Error::QuantRange {
            name,
            value,
            lo: -QUANT_LIMIT,
            hi: QUANT_LIMIT,
        });
    }
    Ok(quantize_value(value))
}

/// Quantize a trained network against the table it will steer.
///
/// Every parameter must fit in `[-10, 10]`; the first offender aborts with
/// an error naming it.  Action inputs are computed from whole kilohertz so
/// that quantization of the action axis is exactly reproducible.
pub fn quantize(net: &QNet, table: &FrequencyTable, layout: StateLayout) -> Result<QuantizedQNet> {
    let mut weights = Vec::with_capacity(net.weights.len());
    let mut biases = Vec::with_capacity(net.biases.len());
    for (l, (w, b)) in net.weights.iter().zip(net.biases.iter()).enumerate() {
        let n_in = net.sizes[l];
        let mut wq = Vec::with_capacity(w.len());
        for (i, &v) in w.iter().enumerate() {
            wq.push(check_range(
                format!("layer {l} weight [{}, {}]", i / n_in, i % n_in),
                v,
            )?);
        }
        weights.push(wq);
        let mut bq = Vec::with_capacity(b.len());
        for (i, &v) in b.iter().enumerate() {
            bq.push(check_range(format!("layer {l} bias [{i}]"), v)?);
        }
        biases.push(bq);
    }

    let f_min_khz = ghz_to_khz(table.min_freq_ghz());
    let f_max_khz = ghz_to_khz(table.max_freq_ghz());
    let range_khz = f_max_khz - f_min_khz;
    let action_inputs = (0..table.len())
        .map(|i| {
            let diff = ghz_to_khz(table.level(i).freq_ghz) - f_min_khz;
            // round((diff / range) * SCALE_NUM / SCALE_DEN) in pure integers.
            let num = diff as u128 * SCALE_NUM as u128;
            let den = range_khz as u128 * SCALE_DEN as u128;
            ((num + den / 2) / den) as i32
        })
        .collect();

    Ok(QuantizedQNet {
        sizes: net.sizes.clone(),
        weights,
        biases,
        action_inputs,
        layout,
        table_fingerprint: table.fingerprint(),
    })
}

fn ghz_to_khz(ghz: f64) -> u64 {
    (ghz * 1e6).round() as u64
}

/// Quantize an already-flattened state vector.
pub fn quantize_state(flat: &[f64]) -> Vec<i32> {
    flat.iter().map(|&v| quantize_value(v)).collect()
}

impl QuantizedQNet {
    /// Integer-only forward pass over `input` (state features plus the
    /// action input, all already quantized).  The return value lives in the
    /// quantized domain.
    pub fn forward_int(&self, input: &[i32]) -> Result<i64> {
        if input.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let last = self.weights.len() - 1;
        let mut act: Vec<i64> = input.iter().map(|&v| v as i64).collect();
        for (l, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let mut next = vec![0i64; n_out];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc: i64 = 0;
                for (&wi, &xi) in row.iter().zip(act.iter()) {
                    // Each product of two quantized values fits i64; the sum
                    // over a row is debug-checked.
                    let p = (wi as i64) * xi;
                    acc = if cfg!(debug_assertions) {
                        acc.checked_add(p).expect("quantized accumulator overflow")
                    } else {
                        acc.wrapping_add(p)
                    };
                }
                // The bias is already in the quantized domain, so it joins
                // after the accumulator is rescaled back down.
                let mut y = rescale(acc) + b[o] as i64;
                if l < last && y < 0 {
                    y = 0;
                }
                next[o] = y;
            }
            act = next;
        }
        Ok(act[0])
    }

    /// Q-value of one action in the quantized domain.
    pub fn q_int(&self, state_q: &[i32], action_idx: usize) -> Result<i64> {
        let mut input = Vec::with_capacity(state_q.len() + 1);
        input.extend_from_slice(state_q);
        input.push(self.action_inputs[action_idx]);
        self.forward_int(&input)
    }

    /// Greedy action over the quantized Q-values; ties resolve to the lowest
    /// level index.
    pub fn argmax_action(&self, state_q: &[i32]) -> Result<usize> {
        let mut best = 0;
        let mut best_q = i64::MIN;
        for idx in 0..self.action_inputs.len() {
            let q = self.q_int(state_q, idx)?;
            if q > best_q {
                best_q = q;
                best = idx;
            }
        }
        Ok(best)
    }

    /// Dequantized Q-value, for comparisons against the float network.
    pub fn q_float(&self, state_q: &[i32], action_idx: usize) -> Result<f64> {
        Ok(self.q_int(state_q, action_idx)? as f64 * SCALE_DEN as f64 / SCALE_NUM as f64)
    }
}

const MAGIC: [u8; 4] = *b"QGOV";
const FORMAT_VERSION: u16 = 1;

/// Serialize to the deployable binary format (all integers little-endian).
pub fn save_quantized(path: &Path, qnet: &QuantizedQNet) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match qnet.layout {
        StateLayout::Compact => 0,
        StateLayout::Full => 1,
    });
    out.push(u8::try_from(qnet.weights.len()).expect("layer count fits a byte"));
    let fp = u64::from_str_radix(&qnet.table_fingerprint, 16)
        .map_err(|e| Error::Parse(format!("bad table fingerprint: {e}")))?;
    out.extend_from_slice(&fp.to_le_bytes());
    out.extend_from_slice(&(SCALE_NUM as u32).to_le_bytes());
    out.extend_from_slice(&(SCALE_DEN as u32).to_le_bytes());
    for &s in &qnet.sizes {
        out.extend_from_slice(&u32::try_from(s).expect("layer size fits u32").to_le_bytes());
    }
    out.extend_from_slice(
        &u32::try_from(qnet.action_inputs.len())
            .expect("action count fits u32")
            .to_le_bytes(),
    );
    for &a in &qnet.action_inputs {
        out.extend_from_slice(&a.to_le_bytes());
    }
    for (w, b) in qnet.weights.iter().zip(qnet.biases.iter()) {
        for &v in w {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in b {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.pos + N > self.data.len() {
            return Err(Error::Truncated {
                offset: self.data.len() as u64,
            });
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.data[self.pos..self.pos + N]);
        self.pos += N;
        Ok(buf)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take()?))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
}

/// Read a quantized model back; the inverse of [`save_quantized`].
pub fn load_quantized(path: &Path) -> Result<QuantizedQNet> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut r = Reader { data: &data, pos: 0 };

    let magic: [u8; 4] = r.take()?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let layout = match r.u8()? {
        0 => StateLayout::Compact,
        1 => StateLayout::Full,
        other => return Err(Error::Parse(format!("unknown state layout tag {other}"))),
    };
    let n_layers = r.u8()? as usize;
    let fingerprint = format!("{:016x}", r.u64()?);
    let scale_num = r.u32()? as i64;
    let scale_den = r.u32()? as i64;
    if scale_num != SCALE_NUM || scale_den != SCALE_DEN {
        return Err(Error::ModelMismatch(format!(
            "file uses scale {scale_num}/{scale_den}, this build computes with {SCALE_NUM}/{SCALE_DEN}"
        )));
    }
    let mut sizes = Vec::with_capacity(n_layers + 1);
    for _ in 0..=n_layers {
        sizes.push(r.u32()? as usize);
    }
    let n_actions = r.u32()? as usize;
    let mut action_inputs = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        action_inputs.push(r.i32()?);
    }
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut w = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_in * n_out {
            w.push(r.i32()?);
        }
        weights.push(w);
        let mut b = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            b.push(r.i32()?);
        }
        biases.push(b);
    }
    Ok(QuantizedQNet {
        sizes,
        weights,
        biases,
        action_inputs,
        layout,
        table_fingerprint: fingerprint,
    })
}

/// Governor running the integer engine end to end: state accumulation stays
/// in float (it mirrors the measurement pipeline), but every network
/// evaluation is integer-only.
#[derive(Debug, Clone)]
pub struct QuantGovernor {
    qnet: QuantizedQNet,
    cfg: EncoderConfig,
    state: EncodedState,
}

impl QuantGovernor {
    /// Pair a quantized network with the table it was built for.
    pub fn new(qnet: QuantizedQNet, table: &FrequencyTable, deadline_s: f64) -> Result<Self> {
        Self::with_intervals(qnet, table, vec![0.6, 1.0], deadline_s)
    }

    pub fn with_intervals(
        qnet: QuantizedQNet,
        table: &FrequencyTable,
        interval_uppers: Vec<f64>,
        deadline_s: f64,
    ) -> Result<Self> {
        if qnet.table_fingerprint != table.fingerprint() {
            return Err(Error::ModelMismatch(format!(
                "quantized model was built for table {}, active table is {}",
                qnet.table_fingerprint,
                table.fingerprint()
            )));
        }
        if qnet.action_inputs.len() != table.len() {
            return Err(Error::ModelMismatch(format!(
                "model selects between {} levels, table offers {}",
                qnet.action_inputs.len(),
                table.len()
            )));
        }
        let cfg = EncoderConfig::with_intervals(table.clone(), interval_uppers, deadline_s)?;
        let state = EncodedState::zero(&cfg);
        Ok(Self { qnet, cfg, state })
    }

    fn decide(&self) -> FreqLevel {
        let flat = flatten(&self.state, self.qnet.layout, &self.cfg);
        let idx = self
            .qnet
            .argmax_action(&quantize_state(&flat))
            .expect("quantized network input width matches the state layout");
        self.cfg.table.level(idx)
    }
}

impl Governor for QuantGovernor {
    fn name(&self) -> &str {
        "rl-int"
    }

    fn start(&mut self, _table: &FrequencyTable) -> FreqLevel {
        self.decide()
    }

    fn next(&mut self, obs: &Observation, _table: &FrequencyTable) -> FreqLevel {
        if self.state.elapsed_frac < 1.0 {
            self.state = encode_step(&self.state, obs, &self.cfg)
                .expect("observation frequency is not in the governor's table");
        }
        self.decide()
    }

    fn reset(&mut self) {
        self.state = EncodedState::zero(&self.cfg);
    }
}
