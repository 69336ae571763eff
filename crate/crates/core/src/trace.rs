//! Flight recorder: fixed-size binary records of every governor decision.
//!
//! Records are 42 bytes each, little-endian, packed for long-running
//! captures (a six-figure record count stays in the tens of megabytes).
//! The in-memory buffer is a preallocated ring that drops the oldest
//! records on overflow and never allocates while recording, so it is safe
//! to call from a hot control loop.

use std::fs;
use std::io::Read as _;
use std::path::Path;

use crate::encoder::{encode_step, flatten, EncodedState, EncoderConfig, StateLayout};
use crate::error::{Error, Result};
use crate::sim::EpisodeResult;

/// Serialized size of one record.
pub const RECORD_BYTES: usize = 42;

// Field sizes must add up to the advertised record size.
const _: () = assert!(8 + 4 + 2 + 2 + 2 * 4 + 2 * 6 + 1 + 2 + 1 + 2 == RECORD_BYTES);

/// Terminal step of an episode.
pub const FLAG_TERMINAL: u8 = 1 << 0;
/// Episode missed its deadline (only meaningful on the terminal record).
pub const FLAG_MISSED: u8 = 1 << 1;

/// Number of per-core utilization slots in a record.
pub const CORE_SLOTS: usize = 4;

/// One governor decision and the interval it governed.
///
/// Utilizations and the reward are stored in thousandths; the state
/// snapshot is the compact encoding scaled to the full `u16` range
/// (saturating).  `timestamp_us` is the end of the governed interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceRecord {
    pub timestamp_us: u64,
    pub freq_khz: u32,
    pub util_max_millis: u16,
    pub util_avg_millis: u16,
    pub core_util_millis: [u16; CORE_SLOTS],
    /// Compact state the decision was made in, scaled by 65535.
    pub state_q6: [u16; 6],
    pub action_idx: u8,
    pub reward_millis: u16,
    pub flags: u8,
    /// Wrapping sequence number for loss detection across exports.
    pub seq: u16,
}

impl TraceRecord {
    pub fn to_bytes(&self) -> [u8; RECORD_BYTES] {
        let mut out = [0u8; RECORD_BYTES];
        let mut pos = 0;
        let mut put = |bytes: &[u8]| {
            out[pos..pos + bytes.len()].copy_from_slice(bytes);
            pos += bytes.len();
        };
        put(&self.timestamp_us.to_le_bytes());
        put(&self.freq_khz.to_le_bytes());
        put(&self.util_max_millis.to_le_bytes());
        put(&self.util_avg_millis.to_le_bytes());
        for v in self.core_util_millis {
            put(&v.to_le_bytes());
        }
        for v in self.state_q6 {
            put(&v.to_le_bytes());
        }
        put(&[self.action_idx]);
        put(&self.reward_millis.to_le_bytes());
        put(&[self.flags]);
        put(&self.seq.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; RECORD_BYTES]) -> Self {
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &bytes[pos..pos + n];
            pos += n;
            s
        };
        let u16_of = |s: &[u8]| u16::from_le_bytes([s[0], s[1]]);
        let timestamp_us = u64::from_le_bytes(take(8).try_into().unwrap());
        let freq_khz = u32::from_le_bytes(take(4).try_into().unwrap());
        let util_max_millis = u16_of(take(2));
        let util_avg_millis = u16_of(take(2));
        let mut core_util_millis = [0u16; CORE_SLOTS];
        for v in &mut core_util_millis {
            *v = u16_of(take(2));
        }
        let mut state_q6 = [0u16; 6];
        for v in &mut state_q6 {
            *v = u16_of(take(2));
        }
        let action_idx = take(1)[0];
        let reward_millis = u16_of(take(2));
        let flags = take(1)[0];
        let seq = u16_of(take(2));
        Self {
            timestamp_us,
            freq_khz,
            util_max_millis,
            util_avg_millis,
            core_util_millis,
            state_q6,
            action_idx,
            reward_millis,
            flags,
            seq,
        }
    }
}

/// Preallocated drop-oldest ring of trace records.
#[derive(Debug, Clone)]
pub struct TraceBuffer {
    slots: Vec<TraceRecord>,
    /// Next slot to write.
    head: usize,
    len: usize,
    dropped: u32,
}

impl TraceBuffer {
    /// Allocate every slot up front; recording never allocates afterwards.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "trace buffer needs at least one slot");
        Self {
            slots: vec![TraceRecord::default(); capacity],
            head: 0,
            len: 0,
            dropped: 0,
        }
    }

    /// Append a record, overwriting the oldest one once full.
    #[inline]
    pub fn record(&mut self, rec: TraceRecord) {
        self.slots[self.head] = rec;
        self.head = (self.head + 1) % self.slots.len();
        if self.len < self.slots.len() {
            self.len += 1;
        } else {
            self.dropped = self.dropped.saturating_add(1);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Records overwritten since the last clear.
    pub fn dropped(&self) -> u32 {
        self.dropped
    }

    pub fn clear(&mut self) {
        self.head = 0;
        self.len = 0;
        self.dropped = 0;
    }

    /// Surviving records, oldest first.
    pub fn records(&self) -> Vec<TraceRecord> {
        let cap = self.slots.len();
        let start = (self.head + cap - self.len) % cap;
        (0..self.len)
            .map(|i| self.slots[(start + i) % cap])
            .collect()
    }
}

const MAGIC: [u8; 4] = *b"GTRC";
const FORMAT_VERSION: u16 = 1;
const HEADER_BYTES: usize = 16;

/// Capture-wide metadata stored ahead of the records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub version: u16,
    pub core_count: u8,
    pub layout: StateLayout,
    pub record_count: u32,
    pub dropped_count: u32,
}

/// Write a capture: 16-byte header, then the records back to back.
pub fn write_trace(
    path: &Path,
    records: &[TraceRecord],
    core_count: u8,
    layout: StateLayout,
    dropped: u32,
) -> Result<()> {
    let mut out =
        Vec::with_capacity(HEADER_BYTES + records.len() * RECORD_BYTES);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(core_count);
    out.push(match layout {
        StateLayout::Compact => 0,
        StateLayout::Full => 1,
    });
    let count = u32::try_from(records.len()).expect("record count fits u32");
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dropped.to_le_bytes());
    for rec in records {
        out.extend_from_slice(&rec.to_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Export a ring buffer's surviving records.
pub fn export_buffer(
    path: &Path,
    buffer: &TraceBuffer,
    core_count: u8,
    layout: StateLayout,
) -> Result<()> {
    write_trace(path, &buffer.records(), core_count, layout, buffer.dropped())
}

/// Read a capture back; the inverse of [`write_trace`].
pub fn load_trace(path: &Path) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    if data.len() < HEADER_BYTES {
        return Err(Error::Truncated {
            offset: data.len() as u64,
        });
    }
    let magic: [u8; 4] = data[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let core_count = data[6];
    let layout = match data[7] {
        0 => StateLayout::Compact,
        1 => StateLayout::Full,
        other => return Err(Error::Parse(format!("unknown state layout tag {other}"))),
    };
    let record_count = u32::from_le_bytes(data[8..12].try_into().unwrap());
    let dropped_count = u32::from_le_bytes(data[12..16].try_into().unwrap());
    let expected = HEADER_BYTES + record_count as usize * RECORD_BYTES;
    if data.len() < expected {
        return Err(Error::Truncated {
            offset: data.len() as u64,
        });
    }
    let mut records = Vec::with_capacity(record_count as usize);
    for i in 0..record_count as usize {
        let start = HEADER_BYTES + i * RECORD_BYTES;
        let chunk: [u8; RECORD_BYTES] = data[start..start + RECORD_BYTES].try_into().unwrap();
        records.push(TraceRecord::from_bytes(&chunk));
    }
    Ok((
        TraceHeader {
            version,
            core_count,
            layout,
            record_count,
            dropped_count,
        },
        records,
    ))
}

fn millis(x: f64) -> u16 {
    (x.clamp(0.0, 65.535) * 1000.0).round() as u16
}

fn q16(x: f64) -> u16 {
    (x.max(0.0) * 65535.0).round().min(65535.0) as u16
}

/// Replay a finished episode into trace records, one per decision.
///
/// Each record snapshots the compact state the decision was made in, the
/// chosen operating point, and the utilization measured over the governed
/// interval.  The terminal record carries the episode reward and the missed
/// flag.  Per-core slots beyond the workload's core count stay zero; cores
/// past the fourth are not captured.
pub fn episode_records(
    episode: &EpisodeResult,
    cfg: &EncoderConfig,
    reward: f64,
) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::with_capacity(episode.steps.len());
    let mut state = EncodedState::zero(cfg);
    for (k, step) in episode.steps.iter().enumerate() {
        let flat = flatten(&state, StateLayout::Compact, cfg);
        debug_assert_eq!(flat.len(), 6);
        let mut state_q6 = [0u16; 6];
        for (slot, &v) in state_q6.iter_mut().zip(flat.iter()) {
            *slot = q16(v);
        }
        let mut core_util_millis = [0u16; CORE_SLOTS];
        for (slot, &u) in core_util_millis
            .iter_mut()
            .zip(step.per_core_util.iter())
        {
            *slot = millis(u);
        }
        let terminal = k + 1 == episode.steps.len();
        let mut flags = 0u8;
        if terminal {
            flags |= FLAG_TERMINAL;
            if !episode.deadline_met {
                flags |= FLAG_MISSED;
            }
        }
        out.push(TraceRecord {
            timestamp_us: (step.t_end_s * 1e6).round() as u64,
            freq_khz: (step.obs.freq.freq_ghz * 1e6).round() as u32,
            util_max_millis: millis(step.obs.util_max),
            util_avg_millis: millis(step.obs.util_avg),
            core_util_millis,
            state_q6,
            action_idx: u8::try_from(step.level_idx).unwrap_or(u8::MAX),
            reward_millis: if terminal { millis(reward) } else { 0 },
            flags,
            seq: (k % (u16::MAX as usize + 1)) as u16,
        });
        state = encode_step(&state, &step.obs, cfg)?;
    }
    Ok(out)
}

/// Render records as CSV with a header row.
///
/// Columns: `timestamp_us, freq_khz, util_max, util_avg, core0..core3,
/// s0..s5, action, reward, terminal, missed, seq`.  Utilizations, state
/// features, and the reward are printed to three decimals.
pub fn to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from(
        "timestamp_us,freq_khz,util_max,util_avg,core0,core1,core2,core3,\
         s0,s1,s2,s3,s4,s5,action,reward,terminal,missed,seq\n",
    );
    for r in records {
        out.push_str(&format!("{},{}", r.timestamp_us, r.freq_khz));
        out.push_str(&format!(
            ",{:.3},{:.3}",
            r.util_max_millis as f64 / 1000.0,
            r.util_avg_millis as f64 / 1000.0
        ));
        for c in r.core_util_millis {
            out.push_str(&format!(",{:.3}", c as f64 / 1000.0));
        }
        for s in r.state_q6 {
            out.push_str(&format!(",{:.3}", s as f64 / 65535.0));
        }
        out.push_str(&format!(
            ",{},{:.3},{},{},{}\n",
            r.action_idx,
            r.reward_millis as f64 / 1000.0,
            u8::from(r.flags & FLAG_TERMINAL != 0),
            u8::from(r.flags & FLAG_MISSED != 0),
            r.seq
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::StaticGovernor;
    use crate::power::{FrequencyTable, PowerParams};
    use crate::sim::{run_episode, SimConfig, StopMode};
    use crate::workload::{Phase, Workload};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_record(rng: &mut ChaCha8Rng) -> TraceRecord {
        TraceRecord {
            timestamp_us: rng.random(),
            freq_khz: rng.random(),
            util_max_millis: rng.random(),
            util_avg_millis: rng.random(),
            core_util_millis: rng.random(),
            state_q6: rng.random(),
            action_idx: rng.random(),
            reward_millis: rng.random(),
            flags: rng.random(),
            seq: rng.random(),
        }
    }

    #[test]
    fn record_serializes_to_42_bytes_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let rec = random_record(&mut rng);
            let bytes = rec.to_bytes();
            assert_eq!(bytes.len(), 42);
            assert_eq!(TraceRecord::from_bytes(&bytes), rec);
        }
    }

    #[test]
    fn a_long_capture_fits_a_small_file() {
        // Sizing check for the format: a 360k-decision capture is ~15 MB.
        assert_eq!(360_000 * RECORD_BYTES, 15_120_000);
    }

    #[test]
    fn ring_drops_oldest_and_counts_losses() {
        let mut buf = TraceBuffer::new(4);
        for k in 0u64..10 {
            buf.record(TraceRecord {
                timestamp_us: k,
                ..TraceRecord::default()
            });
        }
        assert_eq!(buf.len(), 4);
        assert_eq!(buf.dropped(), 6);
        let stamps: Vec<u64> = buf.records().iter().map(|r| r.timestamp_us).collect();
        assert_eq!(stamps, vec![6, 7, 8, 9]);
        buf.clear();
        assert!(buf.is_empty());
        assert_eq!(buf.dropped(), 0);
    }

    #[test]
    fn file_round_trip_preserves_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let records: Vec<TraceRecord> = (0..257).map(|_| random_record(&mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.gtrc");
        write_trace(&path, &records, 4, StateLayout::Compact, 17).unwrap();

        let size = std::fs::metadata(&path).unwrap().len();
        assert_eq!(size as usize, 16 + 257 * RECORD_BYTES);

        let (header, back) = load_trace(&path).unwrap();
        assert_eq!(header.version, 1);
        assert_eq!(header.core_count, 4);
        assert_eq!(header.layout, StateLayout::Compact);
        assert_eq!(header.record_count, 257);
        assert_eq!(header.dropped_count, 17);
        assert_eq!(back, records);
    }

    #[test]
    fn corrupt_captures_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gtrc");

        std::fs::write(&path, b"shrt").unwrap();
        assert!(matches!(load_trace(&path), Err(Error::Truncated { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records = vec![random_record(&mut rng)];
        write_trace(&path, &records, 2, StateLayout::Compact, 0).unwrap();
        let mut data = std::fs::read(&path).unwrap();

        let mut bad_magic = data.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(load_trace(&path), Err(Error::BadMagic { .. })));

        let mut bad_version = data.clone();
        bad_version[4] = 7;
        std::fs::write(&path, &bad_version).unwrap();
        assert!(matches!(load_trace(&path), Err(Error::BadVersion { .. })));

        data.truncate(data.len() - 5);
        std::fs::write(&path, &data).unwrap();
        assert!(matches!(load_trace(&path), Err(Error::Truncated { .. })));
    }

    #[test]
    fn episode_replay_produces_one_record_per_decision() {
        let table = FrequencyTable::jetson2();
        let wl = Workload::new(
            "burn",
            2,
            0.2,
            vec![Phase::compute(vec![0.05, 0.08])],
        )
        .unwrap();
        let mut gov = StaticGovernor::performance();
        let ep = run_episode(
            &wl,
            &mut gov,
            &table,
            &PowerParams::default(),
            &SimConfig {
                stop: StopMode::WholePeriod,
                ..SimConfig::default()
            },
            0,
        )
        .unwrap();
        let cfg = EncoderConfig::new(table.clone(), wl.period_s).unwrap();
        let recs = episode_records(&ep, &cfg, 0.42).unwrap();
        assert_eq!(recs.len(), ep.steps.len());

        // The first decision was made from the all-zero state.
        assert_eq!(recs[0].state_q6, [0u16; 6]);
        // Later states snapshot the running encoding; at the top clock the
        // first feature is the normalized frequency, i.e. full scale.
        assert_eq!(recs[1].state_q6[0], 65535);

        let top_khz = (table.max_freq_ghz() * 1e6).round() as u32;
        let mut prev_ts = 0;
        for (k, r) in recs.iter().enumerate() {
            assert_eq!(r.freq_khz, top_khz);
            assert!(r.timestamp_us > prev_ts);
            prev_ts = r.timestamp_us;
            assert_eq!(r.seq, k as u16);
            let terminal = k + 1 == recs.len();
            assert_eq!(r.flags & FLAG_TERMINAL != 0, terminal);
            assert_eq!(r.reward_millis, if terminal { 420 } else { 0 });
            // Deadline was met, so the missed flag stays clear.
            assert_eq!(r.flags & FLAG_MISSED, 0);
            // Two cores: the upper two slots stay zero.
            assert_eq!(r.core_util_millis[2], 0);
            assert_eq!(r.core_util_millis[3], 0);
        }
    }

    #[test]
    fn missed_deadline_sets_the_missed_flag() {
        let table = FrequencyTable::jetson2();
        // Impossible deadline: needs 1.479 GC in 0.1 s.
        let wl = Workload::new(
            "heavy",
            1,
            0.1,
            vec![Phase::compute(vec![1.479])],
        )
        .unwrap();
        let mut gov = StaticGovernor::powersave();
        let ep = run_episode(
            &wl,
            &mut gov,
            &table,
            &PowerParams::default(),
            &SimConfig {
                stop: StopMode::WholePeriod,
                ..SimConfig::default()
            },
            0,
        )
        .unwrap();
        assert!(!ep.deadline_met);
        let cfg = EncoderConfig::new(table.clone(), wl.period_s).unwrap();
        let recs = episode_records(&ep, &cfg, 0.0).unwrap();
        let last = recs.last().unwrap();
        assert_ne!(last.flags & FLAG_MISSED, 0);
        assert_ne!(last.flags & FLAG_TERMINAL, 0);
    }

    #[test]
    fn csv_has_header_and_one_line_per_record() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let records: Vec<TraceRecord> = (0..5).map(|_| random_record(&mut rng)).collect();
        let csv = to_csv(&records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("timestamp_us,freq_khz,util_max"));
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 19);
        }
    }
}
