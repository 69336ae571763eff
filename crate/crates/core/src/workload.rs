//! Periodic workloads: phase lists plus canned scenario generators.
//!
//! A workload is an ordered list of phases executed once per period. Compute
//! phases carry a fixed cycle demand per core (in giga-cycles, so seconds at
//! 1 GHz) and may also carry a wall-time floor for a concurrent fixed-length
//! capture; wait phases park every core idle for a fixed wall duration
//! regardless of frequency. The period doubles as the soft deadline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stage of a workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Phase {
    /// Burn `cycles_gc[c]` giga-cycles on core `c`. The phase ends when the
    /// slowest core finishes, but never before `min_wall_s` of wall time has
    /// passed: a nonzero floor models a fixed-length background capture
    /// (e.g. a microphone recording) running concurrently with the compute,
    /// with every core idle between compute completion and the floor.
    Compute {
        cycles_gc: Vec<f64>,
        #[serde(default)]
        min_wall_s: f64,
    },
    /// All cores idle for a fixed wall time (device or blocking I/O); its
    /// duration never depends on the governor.
    IoWait { wall_s: f64 },
}

impl Phase {
    /// Compute phase with no wall-time floor.
    pub fn compute(cycles_gc: Vec<f64>) -> Self {
        Self::Compute {
            cycles_gc,
            min_wall_s: 0.0,
        }
    }

    /// Compute phase that also waits out a concurrent fixed-length capture.
    pub fn compute_with_floor(cycles_gc: Vec<f64>, min_wall_s: f64) -> Self {
        Self::Compute {
            cycles_gc,
            min_wall_s,
        }
    }
}

/// A periodic soft-deadline workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub cores: usize,
    /// Period of the request loop; also the deadline for one pass.
    pub period_s: f64,
    pub phases: Vec<Phase>,
}

impl Workload {
    pub fn new(name: &str, cores: usize, period_s: f64, phases: Vec<Phase>) -> Result<Self> {
        let w = Self {
            name: name.to_string(),
            cores,
            period_s,
            phases,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cores == 0 {
            return Err(Error::InvalidWorkload("cores must be at least 1".into()));
        }
        if !self.period_s.is_finite() || self.period_s <= 0.0 {
            return Err(Error::InvalidWorkload(format!(
                "period {} s must be finite and positive",
                self.period_s
            )));
        }
        if self.phases.is_empty() {
            return Err(Error::InvalidWorkload("no phases".into()));
        }
        for (i, phase) in self.phases.iter().enumerate() {
            match phase {
                Phase::Compute {
                    cycles_gc,
                    min_wall_s,
                } => {
                    if cycles_gc.len() != self.cores {
                        return Err(Error::InvalidWorkload(format!(
                            "phase {i}: {} per-core cycle counts for {} cores",
                            cycles_gc.len(),
                            self.cores
                        )));
                    }
                    if cycles_gc.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(Error::InvalidWorkload(format!(
                            "phase {i}: cycle counts must be finite and non-negative"
                        )));
                    }
                    if cycles_gc.iter().all(|c| *c == 0.0) {
                        return Err(Error::InvalidWorkload(format!(
                            "phase {i}: compute phase with zero work on every core"
                        )));
                    }
                    if !min_wall_s.is_finite() || *min_wall_s < 0.0 {
                        return Err(Error::InvalidWorkload(format!(
                            "phase {i}: wall-time floor {min_wall_s} s must be finite and \
                             non-negative"
                        )));
                    }
                }
                Phase::IoWait { wall_s } => {
                    if !wall_s.is_finite() || *wall_s <= 0.0 {
                        return Err(Error::InvalidWorkload(format!(
                            "phase {i}: wait duration {wall_s} s must be finite and positive"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total giga-cycles demanded across all cores and phases.
    pub fn total_cycles_gc(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| match p {
                Phase::Compute { cycles_gc, .. } => cycles_gc.iter().sum(),
                Phase::IoWait { .. } => 0.0,
            })
            .sum()
    }

    /// Total wall time spent in wait phases, independent of the governor.
    pub fn total_io_wait_s(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| match p {
                Phase::IoWait { wall_s } => *wall_s,
                Phase::Compute { .. } => 0.0,
            })
            .sum()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let w: Workload = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("workload serializes")
    }
}

/// Canned scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    /// Photo-analysis style: a single-threaded decode/pre-process stage
    /// followed by an embarrassingly parallel recognition stage.
    FaceRecogLike,
    /// The photo pipeline running while a fixed-length recording is captured:
    /// the recognition stage cannot end before the recording does, and a
    /// single-threaded feature-extraction stage then runs on the captured
    /// clip.
    AudioRecogLike,
    /// Alternating parallel and single-threaded stages: peak utilization is
    /// flat while average utilization swings.
    Unbalanced,
    /// One balanced all-core stage sized to a target runtime, benchmark style.
    MibenchLike,
}

impl ScenarioName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "face_recog_like" => Ok(Self::FaceRecogLike),
            "audio_recog_like" => Ok(Self::AudioRecogLike),
            "unbalanced" => Ok(Self::Unbalanced),
            "mibench_like" => Ok(Self::MibenchLike),
            other => Err(Error::InvalidConfig(format!(
                "unknown scenario {other:?} (expected face_recog_like, audio_recog_like, \
                 unbalanced, or mibench_like)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FaceRecogLike => "face_recog_like",
            Self::AudioRecogLike => "audio_recog_like",
            Self::Unbalanced => "unbalanced",
            Self::MibenchLike => "mibench_like",
        }
    }
}

/// Dimensions for [`scenario`]. Cycle demands are sized so the stage runtimes
/// quoted below hold when every core runs flat out at `reference_freq_ghz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: ScenarioName,
    pub cores: usize,
    pub period_s: f64,
    /// Recording length for the audio scenario, measured from the start of
    /// the pipeline.
    pub io_wait_s: Option<f64>,
    /// Target runtime at the reference frequency for the benchmark scenario.
    pub target_runtime_s: Option<f64>,
    pub reference_freq_ghz: f64,
}

impl ScenarioSpec {
    pub fn new(scenario: ScenarioName, cores: usize, period_s: f64) -> Self {
        Self {
            scenario,
            cores,
            period_s,
            io_wait_s: None,
            target_runtime_s: None,
            reference_freq_ghz: DEFAULT_REFERENCE_FREQ_GHZ,
        }
    }
}

/// Reference clock used to size cycle demands: the top frequency of the
/// default table.
pub const DEFAULT_REFERENCE_FREQ_GHZ: f64 = 1.479;

/// Runtime of the single-threaded photo stage at the reference clock.
const FACE_PREFIX_S: f64 = 0.10;
/// Runtime of the parallel recognition stage at the reference clock.
const FACE_PARALLEL_S: f64 = 0.25;
/// Runtime of the single-threaded audio feature-extraction stage.
const AUDIO_EXTRACT_S: f64 = 0.28;
/// Stage length used by the alternating scenario.
const UNBALANCED_STAGE_S: f64 = 0.10;
/// Number of parallel/serial pairs in the alternating scenario.
const UNBALANCED_PAIRS: usize = 2;

/// Build one of the canned workloads.
///
/// The photo pipeline finishes in 0.35 s of compute at the reference clock.
/// The audio variant runs that same compute while a recording of `io_wait_s`
/// seconds is captured in the background: the compute stage carries the
/// recording length as a wall-time floor, so cores sit idle once recognition
/// finishes early, and the whole request takes
/// `max(io_wait_s, 0.35) + 0.28` s at the reference clock.
pub fn scenario(spec: &ScenarioSpec) -> Result<Workload> {
    if spec.cores == 0 {
        return Err(Error::InvalidWorkload("cores must be at least 1".into()));
    }
    if !spec.reference_freq_ghz.is_finite() || spec.reference_freq_ghz <= 0.0 {
        return Err(Error::InvalidWorkload(format!(
            "reference frequency {} GHz must be finite and positive",
            spec.reference_freq_ghz
        )));
    }
    let f = spec.reference_freq_ghz;
    let single = |seconds: f64| {
        let mut cycles = vec![0.0; spec.cores];
        cycles[0] = seconds * f;
        Phase::compute(cycles)
    };
    let parallel = |seconds: f64| Phase::compute(vec![seconds * f; spec.cores]);

    let (name, phases) = match spec.scenario {
        ScenarioName::FaceRecogLike => (
            "face_recog_like",
            vec![single(FACE_PREFIX_S), parallel(FACE_PARALLEL_S)],
        ),
        ScenarioName::AudioRecogLike => {
            let recording_s = spec.io_wait_s.ok_or_else(|| {
                Error::InvalidWorkload("audio_recog_like needs io_wait_s (recording length)".into())
            })?;
            if !recording_s.is_finite() || recording_s <= 0.0 {
                return Err(Error::InvalidWorkload(format!(
                    "recording length {recording_s} s must be finite and positive"
                )));
            }
            // The photo stages collapse into one phase so the recording floor
            // spans all of them: core 0 carries the serial prefix on top of
            // its share of the parallel stage.
            let mut photo = vec![FACE_PARALLEL_S * f; spec.cores];
            photo[0] += FACE_PREFIX_S * f;
            (
                "audio_recog_like",
                vec![
                    Phase::compute_with_floor(photo, recording_s),
                    single(AUDIO_EXTRACT_S),
                ],
            )
        }
        ScenarioName::Unbalanced => {
            let mut phases = Vec::new();
            for _ in 0..UNBALANCED_PAIRS {
                phases.push(parallel(UNBALANCED_STAGE_S));
                phases.push(single(UNBALANCED_STAGE_S));
            }
            ("unbalanced", phases)
        }
        ScenarioName::MibenchLike => {
            let runtime = spec.target_runtime_s.ok_or_else(|| {
                Error::InvalidWorkload("mibench_like needs target_runtime_s".into())
            })?;
            if !runtime.is_finite() || runtime <= 0.0 {
                return Err(Error::InvalidWorkload(format!(
                    "target runtime {runtime} s must be finite and positive"
                )));
            }
            ("mibench_like", vec![parallel(runtime)])
        }
    };
    Workload::new(name, spec.cores, spec.period_s, phases)
}
