//! Flags, the optional JSON config file, and how they merge.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hatsim::arbitration::ArchitectureKind;
use hatsim::report::ArbMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    DelayLine,
    Cscd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Auto,
    Pipeline,
    Cam,
    Handshake,
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the subcommand default.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with defaults for any of these flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// binary-tree, greedy-tree, token-ring, hier-ring or hier-tree
    #[arg(long, global = true)]
    pub arch: Option<ArchitectureKind>,
    /// Neuron counts, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    /// sparse, burst or poisson
    #[arg(long, global = true)]
    pub mode: Option<ArbMode>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CAM entry counts, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub entries: Option<Vec<usize>>,
    /// CAM word width in bits
    #[arg(long, global = true)]
    pub width: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub completion: Option<Completion>,
    /// Match-line feedback; `--feedback false` turns it off
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub feedback: Option<bool>,
    /// Speculative-sense tail length; 0 turns it off
    #[arg(long, global = true)]
    pub speculative: Option<u32>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; 0 means one per core
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Trace file: written by `arb run` and `cam search`, read by `check`
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Which checker `check` applies
    #[arg(long, global = true, value_enum)]
    pub kind: Option<TraceKind>,
}

/// Shape of the `--config` file. Field names match the long flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub arch: Option<ArchitectureKind>,
    pub n: Option<Vec<u32>>,
    pub mode: Option<ArbMode>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub entries: Option<Vec<usize>>,
    pub width: Option<u32>,
    pub completion: Option<Completion>,
    pub feedback: Option<bool>,
    pub speculative: Option<u32>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub trace: Option<PathBuf>,
    pub kind: Option<TraceKind>,
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Flags win; the file fills the gaps.
pub fn merge(flags: Flags, file: FileConfig) -> Flags {
    Flags {
        config: flags.config,
        arch: flags.arch.or(file.arch),
        n: flags.n.or(file.n),
        mode: flags.mode.or(file.mode),
        trials: flags.trials.or(file.trials),
        seed: flags.seed.or(file.seed),
        entries: flags.entries.or(file.entries),
        width: flags.width.or(file.width),
        completion: flags.completion.or(file.completion),
        feedback: flags.feedback.or(file.feedback),
        speculative: flags.speculative.or(file.speculative),
        out: flags.out.or(file.out),
        format: flags.format.or(file.format),
        jobs: flags.jobs.or(file.jobs),
        trace: flags.trace.or(file.trace),
        kind: flags.kind.or(file.kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_rejected() {
        let err = serde_json::from_str::<FileConfig>(r#"{"arhc":"hier-tree"}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn bad_enum_lists_choices() {
        let err = serde_json::from_str::<FileConfig>(r#"{"arch":"ring"}"#).unwrap_err();
        assert!(err.to_string().contains("hier-tree"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = serde_json::from_str(r#"{"seed":5,"trials":10}"#).unwrap();
        let flags = Flags {
            seed: Some(9),
            ..Flags::default()
        };
        let m = merge(flags, file);
        assert_eq!((m.seed, m.trials), (Some(9), Some(10)));
    }
}
