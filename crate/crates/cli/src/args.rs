use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use errp_bandit::agents::{AgentSpec, NeuralUcbConfig};
use errp_bandit::split::SplitSpec;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "errp-bandit", version, about = "ErrP-rewarded contextual bandits for motor-imagery BCI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic subject and write it as a trial archive.
    Synth(SynthArgs),
    /// Extract time-frequency context vectors from a trial archive.
    Features(FeaturesArgs),
    /// Stream a feature set through a bandit agent.
    Simulate(SimulateArgs),
    /// Grid search over agent hyperparameters.
    Hpo(HpoArgs),
    /// ERP or ERSP analysis of a trial archive, with CSV, JSON and SVG output.
    Analyze(AnalyzeArgs),
    /// Signed-rank and FDR tests over saved runs.
    Stats(StatsArgs),
    /// Run the snake protocol headless with a scripted or agent player.
    GameSim(GameSimArgs),
    /// Host the snake protocol over WebSocket for the browser client.
    Serve(ServeArgs),
    /// Re-run a saved event log and check it reproduces.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Linucb,
    Neuralucb,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AgentArgs {
    #[arg(long, value_enum, default_value = "linucb")]
    pub agent: AgentKind,
    /// LinUCB exploration weight.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// NeuralUCB hidden width.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// NeuralUCB exploration scale.
    #[arg(long, default_value_t = 0.1)]
    pub nu: f64,
    /// NeuralUCB regularization.
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    /// NeuralUCB learning rate.
    #[arg(long = "lr", default_value_t = 2e-3)]
    pub learning_rate: f64,
}

impl AgentArgs {
    pub fn spec(&self) -> AgentSpec {
        match self.agent {
            AgentKind::Linucb => AgentSpec::Linucb { alpha: self.alpha },
            AgentKind::Neuralucb => AgentSpec::Neuralucb(NeuralUcbConfig::new(
                self.hidden,
                self.nu,
                self.lambda,
                self.learning_rate,
            )),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectorArgs {
    /// Detector true-positive rate on wrong actions.
    #[arg(long, default_value_t = 1.0)]
    pub tpr: f64,
    /// Detector false-positive rate on correct actions.
    #[arg(long, default_value_t = 0.0)]
    pub fpr: f64,
}

/// `session:1,2,3,4/5` or `shuffled:FRACTION[:SEED]`.
pub fn parse_split(s: &str) -> Result<SplitSpec, String> {
    let ids = |list: &str| -> Result<Vec<u32>, String> {
        list.split(',')
            .map(|v| v.trim().parse::<u32>().map_err(|_| format!("bad session id '{v}'")))
            .collect()
    };
    let spec = if let Some(rest) = s.strip_prefix("session:") {
        let (train, eval) = rest.split_once('/').ok_or("expected session:TRAIN/EVAL")?;
        SplitSpec::by_session(ids(train)?, ids(eval)?)
    } else if let Some(rest) = s.strip_prefix("shuffled:") {
        let mut parts = rest.split(':');
        let frac = parts
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or("expected shuffled:FRACTION[:SEED]")?;
        let seed = match parts.next() {
            Some(v) => v.parse::<u64>().map_err(|_| format!("bad split seed '{v}'"))?,
            None => 0,
        };
        if parts.next().is_some() {
            return Err("expected shuffled:FRACTION[:SEED]".into());
        }
        SplitSpec::shuffled(frac, seed)
    } else {
        return Err(format!("unknown split '{s}'; use session:TRAIN/EVAL or shuffled:FRACTION[:SEED]"));
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Base generator config (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub n_trials: Option<usize>,
    #[arg(long)]
    pub sessions: Option<u32>,
    /// Contralateral rhythm reduction during imagery, in [0, 1].
    #[arg(long)]
    pub separability: Option<f64>,
    #[arg(long)]
    pub errp_rate: Option<f64>,
    #[arg(long)]
    pub errp_snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact `ERRORS,CORRECT` counts instead of a random injection rate.
    #[arg(long, value_parser = parse_pair)]
    pub errp_study: Option<(usize, usize)>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected ERRORS,CORRECT")?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad count '{v}'"));
    Ok((n(a)?, n(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureProfile {
    /// Sub-epoch from the onset marker.
    InHouse,
    /// Sub-epoch from 0.5 s after the cue.
    Competition,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeaturesArgs {
    /// Trial archive directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Parameter preset; defaults to the archive's provenance.
    #[arg(long, value_enum)]
    pub profile: Option<FeatureProfile>,
    /// Full feature config (JSON), overriding the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Feature set directory.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub agent: AgentArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_parser = parse_split, default_value = "shuffled:0.8")]
    pub split: SplitSpec,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    pub n_seeds: usize,
    /// Stop updating the agent during evaluation.
    #[arg(long)]
    pub freeze_eval: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// The published search space.
    #[value(name = "paper")]
    #[serde(rename = "paper")]
    Published,
    /// Only the point given by the agent flags.
    Single,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HpoArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub agent: AgentArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_enum, default_value = "paper")]
    pub grid: GridKind,
    #[arg(long, value_parser = parse_split, default_value = "shuffled:0.8")]
    pub split: SplitSpec,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds per grid point; defaults to 5 for LinUCB and 10 for NeuralUCB.
    #[arg(long)]
    pub n_seeds: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Erp,
    Ersp,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: AnalysisKind,
    /// Channel name; defaults to Cz for ERP and C3 for ERSP.
    #[arg(long)]
    pub channel: Option<String>,
    /// ERSP conditions to compare.
    #[arg(long, value_delimiter = ',', default_value = "left,right")]
    pub conditions: Vec<String>,
    #[arg(long, default_value_t = 800)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsKind {
    /// First- against second-half training errors, one run directory per subject.
    HalfSplit,
    /// Two-sided paired test of accuracies between `--runs` and `--against`.
    Paired,
    /// Benjamini-Hochberg over p-values read from `--p-values`.
    Fdr,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long, value_enum)]
    pub kind: StatsKind,
    /// Run directories (single-seed runs or multi-seed `simulate` output).
    #[arg(long, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub against: Vec<PathBuf>,
    /// One p-value per line.
    #[arg(long)]
    pub p_values: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerKind {
    /// Always issues the path's turn.
    Perfect,
    /// A bandit agent decodes surrogate motor-imagery trials.
    Agent,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProtocolArgs {
    /// Protocol config (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub error_rate: Option<f64>,
    #[arg(long)]
    pub familiarization_trials: Option<usize>,
    #[arg(long)]
    pub trials_per_block: Option<usize>,
    #[arg(long)]
    pub blocks: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GameSimArgs {
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, value_enum, default_value = "perfect")]
    pub player: PlayerKind,
    #[command(flatten)]
    pub agent: AgentArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Separability of the surrogate trials seen by the agent.
    #[arg(long, default_value_t = 0.8)]
    pub separability: f64,
    /// Stop at the break after this block.
    #[arg(long)]
    pub stop_after_block: Option<u32>,
    #[arg(long, default_value = "sim")]
    pub participant: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Zero picks a free port; the bound address is printed on stdout.
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Where finished session logs go, one directory per session.
    #[arg(long, default_value = "sessions")]
    pub log_dir: PathBuf,
    /// Static client assets to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Pause between streamed auto-forward events.
    #[arg(long, default_value_t = 0)]
    pub step_delay_ms: u64,
    #[command(flatten)]
    pub agent: AgentArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Separability of the surrogate trials in agent-demo sessions.
    #[arg(long, default_value_t = 0.8)]
    pub separability: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    /// Session directory holding `session.json` and `events.jsonl`.
    #[arg(long)]
    pub session: PathBuf,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_syntax() {
        assert_eq!(parse_split("session:1,2/3").unwrap(), SplitSpec::by_session([1, 2], [3]));
        assert_eq!(parse_split("shuffled:0.8").unwrap(), SplitSpec::shuffled(0.8, 0));
        assert_eq!(parse_split("shuffled:0.5:9").unwrap(), SplitSpec::shuffled(0.5, 9));
        for bad in ["session:1,2", "shuffled:x", "shuffled:1.5", "random", "session:1/1"] {
            assert!(parse_split(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
