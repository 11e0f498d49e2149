use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classification, FaultError, FaultSpec, Simulator, Target};
use crate::engine::{BufferId, CircuitId, Engine, Pipeline};
use crate::field::Poly;
use crate::slicing::WORDS;

pub const CRASH_NOTE: &str = "crash has no analogue in simulation: every faulty run completes, so this row is always 0";

/// Fault models as a campaign names them. `aligned_pair` is a word
/// corruption flipping bit `b` and bit `b + 16` together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    BitFlip,
    AlignedPair,
    WordCorrupt,
    #[serde(rename = "stuck_at_0")]
    StuckAt0,
    #[serde(rename = "stuck_at_1")]
    StuckAt1,
    SkipOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SiteStrategy {
    /// Every site of every model at every hook in range.
    Exhaustive,
    /// `trials` faults, each with a uniform model, hook and site.
    Random {
        trials: usize,
    },
    /// `per_hook` uniform sites for every model and hook in range.
    Stratified {
        per_hook: usize,
    },
    Explicit {
        faults: Vec<FaultSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub models: Vec<ModelChoice>,
    /// Half-open hook range; the whole pipeline when absent.
    #[serde(default)]
    pub time: Option<[usize; 2]>,
    /// Buffers eligible for data faults; all four when absent.
    #[serde(default)]
    pub buffers: Option<Vec<BufferId>>,
    pub strategy: SiteStrategy,
    /// Input polynomial; drawn from the seed when absent.
    #[serde(default)]
    pub input: Option<Vec<u32>>,
    #[serde(default)]
    pub seed: u64,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<CampaignConfig, FaultError> {
        serde_json::from_str(text).map_err(|e| FaultError::InvalidConfig(e.to_string()))
    }
}

/// How trials are scheduled. Results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon's current pool; sequential when built without `parallel`.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub classification: String,
    pub amount: usize,
    pub percentage: f64,
    pub potentially_exploitable: usize,
    pub non_exploitable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub fault: FaultSpec,
    pub classification: Classification,
    pub exploitable: bool,
    pub detected: bool,
    pub differing_coeffs: usize,
    pub output_zero: bool,
}

impl TrialRecord {
    /// Faulty and non-zero, whether or not the check caught it.
    pub fn potentially_exploitable(&self) -> bool {
        self.differing_coeffs > 0 && !self.output_zero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub target: Target,
    pub seed: u64,
    pub trials: usize,
    /// Rows in table order: no effect, crash, not detected, detected. Each
    /// row's amount splits into potentially exploitable (faulty, non-zero
    /// output) and non-exploitable.
    pub summary: Vec<SummaryRow>,
    pub potentially_exploitable: usize,
    pub non_exploitable: usize,
    /// Potentially exploitable and undetected.
    pub exploitable: usize,
    pub crash_note: String,
    pub golden: Poly,
    pub records: Vec<TrialRecord>,
}

impl CampaignReport {
    pub fn count(&self, class: Classification) -> usize {
        self.records.iter().filter(|r| r.classification == class).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per trial: model, time, buffer, word, bit, classification,
    /// exploitable. Gate faults put the netlist in `buffer` and the gate
    /// index in `word`; word corruptions put the XOR pattern in `bit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,time,buffer,word,bit,classification,exploitable\n");
        for r in &self.records {
            let (buffer, word, bit) = match r.fault {
                FaultSpec::BitFlip { buffer, word, bit, .. } => {
                    (buffer.name().to_owned(), word.to_string(), bit.to_string())
                }
                FaultSpec::WordCorrupt { buffer, word, pattern, .. } => {
                    (buffer.name().to_owned(), word.to_string(), format!("{pattern:#010x}"))
                }
                FaultSpec::StuckAt0 { netlist, gate, .. } | FaultSpec::StuckAt1 { netlist, gate, .. } => {
                    (circuit_name(netlist).to_owned(), gate.to_string(), String::new())
                }
                FaultSpec::SkipOp { .. } => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{buffer},{word},{bit},{},{}",
                r.fault.model().name(),
                r.fault.time(),
                r.classification.name(),
                r.exploitable
            );
        }
        out
    }
}

fn circuit_name(id: CircuitId) -> &'static str {
    match id {
        CircuitId::Butterfly => "butterfly",
        CircuitId::PointwiseMultiplier => "pointwise_multiplier",
    }
}

/// Site enumeration for one model over one pipeline.
struct Space<'a> {
    engine: &'a Engine,
    pipeline: &'a Pipeline,
    buffers: Vec<BufferId>,
    words: usize,
}

impl Space<'_> {
    fn hooks(&self, model: ModelChoice, range: [usize; 2]) -> Vec<usize> {
        let ops = self.pipeline.ops();
        (range[0]..range[1].min(ops.len() + 1))
            .filter(|&t| match model {
                ModelChoice::BitFlip | ModelChoice::AlignedPair | ModelChoice::WordCorrupt => true,
                ModelChoice::SkipOp => t < ops.len(),
                ModelChoice::StuckAt0 | ModelChoice::StuckAt1 => ops.get(t).is_some_and(|op| op.circuit().is_some()),
            })
            .collect()
    }

    /// Finite site count at hook `t`, or `None` for pattern-valued models.
    fn count(&self, model: ModelChoice, t: usize) -> Option<usize> {
        let data = self.buffers.len() * self.words;
        match model {
            ModelChoice::BitFlip => Some(data * 32),
            ModelChoice::AlignedPair => Some(data * 16),
            ModelChoice::WordCorrupt => None,
            ModelChoice::SkipOp => Some(1),
            ModelChoice::StuckAt0 | ModelChoice::StuckAt1 => Some(self.gates(t).1),
        }
    }

    fn gates(&self, t: usize) -> (CircuitId, usize) {
        let id = self.pipeline.ops()[t].circuit().expect("circuit op");
        (id, self.engine.netlist(id).gates().len())
    }

    fn site(&self, model: ModelChoice, time: usize, k: usize) -> FaultSpec {
        let per_buffer_bits = |bits: usize| {
            let (b, rest) = (k / (self.words * bits), k % (self.words * bits));
            (self.buffers[b], rest / bits, (rest % bits) as u32)
        };
        match model {
            ModelChoice::BitFlip => {
                let (buffer, word, bit) = per_buffer_bits(32);
                FaultSpec::BitFlip { time, buffer, word, bit }
            }
            ModelChoice::AlignedPair => {
                let (buffer, word, bit) = per_buffer_bits(16);
                FaultSpec::aligned_pair(time, buffer, word, bit)
            }
            ModelChoice::SkipOp => FaultSpec::SkipOp { time },
            ModelChoice::StuckAt0 => FaultSpec::StuckAt0 { time, netlist: self.gates(time).0, gate: k },
            ModelChoice::StuckAt1 => FaultSpec::StuckAt1 { time, netlist: self.gates(time).0, gate: k },
            ModelChoice::WordCorrupt => unreachable!("pattern faults are sampled"),
        }
    }

    fn sample(&self, model: ModelChoice, time: usize, rng: &mut ChaCha8Rng) -> FaultSpec {
        match self.count(model, time) {
            Some(n) => self.site(model, time, rng.gen_range(0..n)),
            None => FaultSpec::WordCorrupt {
                time,
                buffer: self.buffers[rng.gen_range(0..self.buffers.len())],
                word: rng.gen_range(0..self.words),
                pattern: rng.gen_range(1..=u32::MAX),
            },
        }
    }
}

fn generate(config: &CampaignConfig, space: &Space<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<FaultSpec>, FaultError> {
    let range = config.time.unwrap_or([0, space.pipeline.hook_count()]);
    if range[0] > range[1] {
        return Err(FaultError::InvalidConfig(format!("empty time range {range:?}")));
    }
    let needs_models = !matches!(config.strategy, SiteStrategy::Explicit { .. });
    if needs_models && config.models.is_empty() {
        return Err(FaultError::InvalidConfig("no fault models".into()));
    }
    let mut faults = Vec::new();
    match &config.strategy {
        SiteStrategy::Explicit { faults: list } => faults.extend_from_slice(list),
        SiteStrategy::Exhaustive => {
            for &model in &config.models {
                for t in space.hooks(model, range) {
                    let n = space.count(model, t).ok_or_else(|| {
                        FaultError::InvalidConfig(format!("{model:?} has no finite site set; sample it instead"))
                    })?;
                    faults.extend((0..n).map(|k| space.site(model, t, k)));
                }
            }
        }
        SiteStrategy::Stratified { per_hook } => {
            for &model in &config.models {
                for t in space.hooks(model, range) {
                    for _ in 0..*per_hook {
                        faults.push(space.sample(model, t, rng));
                    }
                }
            }
        }
        SiteStrategy::Random { trials } => {
            let hooks: Vec<Vec<usize>> = config.models.iter().map(|&m| space.hooks(m, range)).collect();
            for _ in 0..*trials {
                let i = rng.gen_range(0..config.models.len());
                if hooks[i].is_empty() {
                    return Err(FaultError::InvalidConfig(format!("{:?} has no hooks in {range:?}", config.models[i])));
                }
                let t = hooks[i][rng.gen_range(0..hooks[i].len())];
                faults.push(space.sample(config.models[i], t, rng));
            }
        }
    }
    Ok(faults)
}

fn map_trials<F>(exec: Execution, faults: &[FaultSpec], f: F) -> Vec<Result<TrialRecord, FaultError>>
where
    F: Fn(&FaultSpec) -> Result<TrialRecord, FaultError> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            faults.par_iter().map(f).collect()
        }
        _ => faults.iter().map(f).collect(),
    }
}

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport, FaultError> {
    run_campaign_with(config, Execution::Parallel)
}

pub fn run_campaign_with(config: &CampaignConfig, exec: Execution) -> Result<CampaignReport, FaultError> {
    let engine = Engine::shared();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input = match &config.input {
        Some(coeffs) => Poly::from_coeffs(coeffs).map_err(|e| FaultError::InvalidConfig(e.to_string()))?,
        None => Poly::random(&mut rng),
    };
    let sim = Simulator::new(engine, config.target, input);
    let space = Space {
        engine,
        pipeline: sim.pipeline(),
        buffers: config.buffers.clone().unwrap_or_else(|| BufferId::ALL.to_vec()),
        words: sim.pipeline().layout().blocks() * WORDS,
    };
    if space.buffers.is_empty() {
        return Err(FaultError::InvalidConfig("no buffers".into()));
    }
    let faults = generate(config, &space, &mut rng)?;

    let golden = sim.golden().clone();
    let records = map_trials(exec, &faults, |spec| {
        let out = sim.run(spec)?;
        let differing_coeffs = out.output.coeffs().iter().zip(golden.coeffs()).filter(|(a, b)| a != b).count();
        Ok(TrialRecord {
            fault: *spec,
            classification: out.classification,
            exploitable: out.exploitable,
            detected: out.detected,
            differing_coeffs,
            output_zero: out.output.is_zero(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    Ok(summarize(config, golden, records))
}

fn summarize(config: &CampaignConfig, golden: Poly, records: Vec<TrialRecord>) -> CampaignReport {
    let trials = records.len();
    let pct = |n: usize| {
        if trials == 0 {
            0.0
        } else {
            (n as f64 * 100.0 / trials as f64 * 1e4).round() / 1e4
        }
    };
    let row = |class: Option<Classification>| {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| Some(r.classification) == class).collect();
        let pe = rows.iter().filter(|r| r.potentially_exploitable()).count();
        SummaryRow {
            classification: class.map_or("crash", Classification::name).into(),
            amount: rows.len(),
            percentage: pct(rows.len()),
            potentially_exploitable: pe,
            non_exploitable: rows.len() - pe,
        }
    };
    let summary = vec![
        row(Some(Classification::NoEffect)),
        row(None),
        row(Some(Classification::FaultNotDetected)),
        row(Some(Classification::FaultDetected)),
    ];
    let potentially_exploitable = summary.iter().map(|r| r.potentially_exploitable).sum();
    let non_exploitable = summary.iter().map(|r| r.non_exploitable).sum();
    let exploitable = records.iter().filter(|r| r.exploitable).count();
    CampaignReport {
        target: config.target,
        seed: config.seed,
        trials,
        summary,
        potentially_exploitable,
        non_exploitable,
        exploitable,
        crash_note: CRASH_NOTE.into(),
        golden,
        records,
    }
}
