//! Experiment files: which experiment to run, on which scenario, over which
//! grids. The scenario itself lives in a separate scenario file referenced by
//! path (relative to the experiment file); without one the built-in default
//! scenario is used.

use std::fmt;
use std::path::{Path, PathBuf};

use hrf_core::config::{parse_scenario, DEFAULT_SCENARIO_TOML};
use hrf_core::pareto::MuGrid;
use hrf_core::quantizer::MAX_BITS;
use hrf_core::Scenario;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Boundary,
    DistanceSweep,
    MinBits,
    ValidateFim,
}

impl ExperimentKind {
    /// File stem of the emitted CSV and SVG.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Boundary => "boundary",
            ExperimentKind::DistanceSweep => "distance_sweep",
            ExperimentKind::MinBits => "min_bits",
            ExperimentKind::ValidateFim => "validate_fim",
        }
    }

    fn default_bits(self) -> Vec<u32> {
        match self {
            ExperimentKind::Boundary => vec![1, 2, 4, 6, 8, 14],
            ExperimentKind::DistanceSweep => vec![14],
            ExperimentKind::MinBits => vec![],
            ExperimentKind::ValidateFim => vec![1, 2, 3, 4, 6, 8],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn mu_grid_name(g: MuGrid) -> &'static str {
    match g {
        MuGrid::Linear => "lin",
        MuGrid::Log => "log",
    }
}

pub fn parse_mu_grid(s: &str) -> Result<MuGrid> {
    match s {
        "lin" | "linear" => Ok(MuGrid::Linear),
        "log" => Ok(MuGrid::Log),
        _ => Err(CliError::Config(format!("mu grid must be lin or log, got {s:?}"))),
    }
}

/// On-disk form; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    kind: Option<ExperimentKind>,
    scenario: Option<PathBuf>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    bits: Option<Vec<u32>>,
    distances_m: Option<Vec<f64>>,
    sweep_points: Option<usize>,
    mu_grid: Option<String>,
    sampler_radius_m: Option<f64>,
    min_target_range_m: Option<f64>,
    num_positions: Option<usize>,
    margin_db: Option<f64>,
    mc_draws: Option<usize>,
    ordering_scenarios: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scenario_path: Option<PathBuf>,
    pub scenario: Scenario,
    /// ADC resolutions; strictly increasing.
    pub bits: Vec<u32>,
    /// Target ranges of the distance sweep; strictly increasing.
    pub distances_m: Vec<f64>,
    /// μ values per boundary curve, endpoints included.
    pub sweep_points: usize,
    pub mu_grid: MuGrid,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// Target positions are drawn uniformly over the annulus
    /// [min_target_range_m, sampler_radius_m] around the BS.
    pub sampler_radius_m: f64,
    pub min_target_range_m: f64,
    pub num_positions: usize,
    /// dB the ADC must cover beyond DR_sig.
    pub margin_db: f64,
    /// Monte-Carlo draws of the empirical FIM check.
    pub mc_draws: usize,
    /// Random scenarios of the bound-ordering check.
    pub ordering_scenarios: usize,
    /// SHA-256 over the experiment file and the scenario text, hex.
    pub config_hash: String,
}

impl ExperimentConfig {
    /// Built-in defaults for `kind` on the default scenario.
    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::resolve(kind, ExperimentFile::default(), "", None, DEFAULT_SCENARIO_TOML)
            .expect("built-in defaults are valid")
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, kind)
    }

    /// Parses an experiment file whose relative scenario path resolves
    /// against `base`.
    pub fn parse(text: &str, base: &Path, kind: ExperimentKind) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("experiment file: {e}")))?;
        if let Some(k) = file.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "experiment file is for {k}, not {kind}"
                )));
            }
        }
        let (scenario_path, scenario_text) = match &file.scenario {
            Some(p) => {
                let full = base.join(p);
                let t = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("cannot read scenario {}: {e}", full.display()))
                })?;
                (Some(full), t)
            }
            None => (None, DEFAULT_SCENARIO_TOML.to_string()),
        };
        Self::resolve(kind, file, text, scenario_path, &scenario_text)
    }

    fn resolve(
        kind: ExperimentKind,
        file: ExperimentFile,
        text: &str,
        scenario_path: Option<PathBuf>,
        scenario_text: &str,
    ) -> Result<Self> {
        let scenario = parse_scenario(scenario_text)?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update([0u8]);
        h.update(scenario_text.as_bytes());
        let config_hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let cfg = Self {
            kind,
            scenario_path,
            scenario,
            bits: file.bits.unwrap_or_else(|| kind.default_bits()),
            distances_m: file.distances_m.unwrap_or_else(|| vec![100.0, 120.0, 140.0, 160.0]),
            sweep_points: file.sweep_points.unwrap_or(10),
            mu_grid: file.mu_grid.as_deref().map(parse_mu_grid).transpose()?.unwrap_or(MuGrid::Linear),
            output_dir: file.output_dir,
            seed: file.seed.unwrap_or(0),
            sampler_radius_m: file.sampler_radius_m.unwrap_or(200.0),
            min_target_range_m: file.min_target_range_m.unwrap_or(10.0),
            num_positions: file.num_positions.unwrap_or(500),
            margin_db: file.margin_db.unwrap_or(0.0),
            mc_draws: file.mc_draws.unwrap_or(1_000_000),
            ordering_scenarios: file.ordering_scenarios.unwrap_or(10),
            config_hash,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let needs_bits = !matches!(self.kind, ExperimentKind::MinBits);
        if needs_bits && self.bits.is_empty() {
            return bad("bit list is empty".into());
        }
        if let Some(&b) = self.bits.iter().find(|&&b| b == 0 || b > MAX_BITS) {
            return bad(format!("bit resolution {b} outside 1..={MAX_BITS}"));
        }
        if self.bits.windows(2).any(|w| w[0] >= w[1]) {
            return bad("bit list must be strictly increasing".into());
        }
        if self.kind == ExperimentKind::DistanceSweep && self.bits.len() != 1 {
            return bad("the distance sweep takes exactly one bit resolution".into());
        }
        if self.distances_m.is_empty() {
            return bad("distance grid is empty".into());
        }
        if self.distances_m.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("distances must be positive and finite".into());
        }
        if self.distances_m.windows(2).any(|w| w[0] >= w[1]) {
            return bad("distance grid must be strictly increasing".into());
        }
        if self.sweep_points < 2 {
            return bad("a boundary needs at least 2 sweep points".into());
        }
        if !(self.min_target_range_m > 0.0 && self.sampler_radius_m > self.min_target_range_m) {
            return bad("sampler radius must exceed the minimum target range, which must be positive".into());
        }
        if self.sampler_radius_m.is_infinite() {
            return bad("sampler radius must be finite".into());
        }
        if self.num_positions == 0 {
            return bad("num_positions must be positive".into());
        }
        if !(self.margin_db >= 0.0 && self.margin_db.is_finite()) {
            return bad("margin must be finite and non-negative".into());
        }
        if self.mc_draws < 2 || self.ordering_scenarios == 0 {
            return bad("mc_draws must be at least 2 and ordering_scenarios positive".into());
        }
        if self.scenario.users.is_empty() || self.scenario.targets.is_empty() {
            return bad("experiments need at least one user and one target".into());
        }
        Ok(())
    }
}

/// Parses `1,2,4` into a bit list.
pub fn parse_bit_list(s: &str) -> Result<Vec<u32>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|e| CliError::Config(format!("bad bit value {t:?}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_for_every_kind() {
        for kind in [
            ExperimentKind::Boundary,
            ExperimentKind::DistanceSweep,
            ExperimentKind::MinBits,
            ExperimentKind::ValidateFim,
        ] {
            let c = ExperimentConfig::defaults(kind);
            assert_eq!(c.kind, kind);
            assert_eq!(c.config_hash.len(), 64);
        }
        assert_eq!(ExperimentConfig::defaults(ExperimentKind::DistanceSweep).bits, vec![14]);
    }

    #[test]
    fn empty_bit_list_is_rejected() {
        let err = ExperimentConfig::parse("bits = []", Path::new("."), ExperimentKind::Boundary).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("empty"));
    }

    #[test]
    fn unsorted_grids_and_unknown_keys_are_rejected() {
        let k = ExperimentKind::DistanceSweep;
        assert!(ExperimentConfig::parse("distances_m = [120.0, 100.0]", Path::new("."), k).is_err());
        assert!(ExperimentConfig::parse("bits = [4, 2]", Path::new("."), ExperimentKind::Boundary).is_err());
        assert!(ExperimentConfig::parse("bits = [17]", Path::new("."), ExperimentKind::Boundary).is_err());
        assert!(ExperimentConfig::parse("colour = 3", Path::new("."), k).is_err());
        assert!(ExperimentConfig::parse("kind = \"min_bits\"", Path::new("."), k).is_err());
    }

    #[test]
    fn hash_tracks_the_experiment_text() {
        let k = ExperimentKind::Boundary;
        let a = ExperimentConfig::parse("seed = 1", Path::new("."), k).unwrap();
        let b = ExperimentConfig::parse("seed = 2", Path::new("."), k).unwrap();
        let a2 = ExperimentConfig::parse("seed = 1", Path::new("."), k).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash, a2.config_hash);
        assert_eq!(a.seed, 1);
    }

    #[test]
    fn bit_lists_parse() {
        assert_eq!(parse_bit_list("1, 2,14").unwrap(), vec![1, 2, 14]);
        assert!(parse_bit_list("1,x").is_err());
        assert!(parse_bit_list("").unwrap().is_empty());
    }
}
