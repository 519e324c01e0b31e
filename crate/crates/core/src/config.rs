//! TOML scenario files.
//!
//! Angles are in degrees, distances in metres, powers in watts. Subcarrier
//! sets are either explicit index lists or `{ start, count }` ranges. A user
//! without `aod_deg` gets its departure angles from geometry: its array faces
//! `broadside_deg` if given, otherwise the bisector of its directions to the
//! BS and to its first observed target. The noise level is either
//! `noise_variance` or `direct_snr_db` (per-antenna direct-path SNR of user 0
//! under isotropic full-power transmission). Tables other than the ones
//! below, such as `[experiment]`, are left to the caller.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{HrfError, Result};
use crate::scenario::{bisector, position, OfdmPlan, Scenario, TargetSpec, UserSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SubcarrierSet {
    List(Vec<i32>),
    Range { start: i32, count: usize },
}

impl SubcarrierSet {
    pub fn indices(&self) -> Vec<i32> {
        match self {
            SubcarrierSet::List(v) => v.clone(),
            SubcarrierSet::Range { start, count } => (0..*count as i32).map(|i| start + i).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub subcarrier_spacing_hz: f64,
    pub num_symbols: usize,
    pub samples_per_symbol: usize,
    pub dl_subcarriers: SubcarrierSet,
    /// σ²_k for k = 0..K; defaults to all ones.
    pub symbol_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub aoa_deg: f64,
    pub range_m: f64,
    pub rcs_m2: f64,
    #[serde(default)]
    pub doppler_hz: f64,
    /// `[re, im]`
    pub gain_override: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub num_antennas: usize,
    pub aoa_deg: f64,
    pub range_m: f64,
    pub max_power_w: f64,
    pub subcarriers: SubcarrierSet,
    #[serde(default)]
    pub observed_targets: Vec<usize>,
    pub aod_deg: Option<f64>,
    pub broadside_deg: Option<f64>,
    /// Explicit θ_{k,j}^u per observed target; requires `per_target_path_m`.
    pub per_target_aod_deg: Option<Vec<f64>>,
    pub per_target_path_m: Option<Vec<f64>>,
    pub gain_override: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioFile {
    pub carrier_hz: f64,
    pub num_bs_antennas: usize,
    pub antenna_spacing_ratio: f64,
    pub bs_max_power_w: f64,
    pub noise_variance: Option<f64>,
    pub direct_snr_db: Option<f64>,
    pub ofdm: OfdmSection,
    #[serde(default, rename = "target")]
    pub targets: Vec<TargetSection>,
    #[serde(default, rename = "user")]
    pub users: Vec<UserSection>,
}

fn complex(v: Option<[f64; 2]>) -> Option<Complex64> {
    v.map(|[re, im]| Complex64::new(re, im))
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario> {
        let targets: Vec<TargetSpec> = self
            .targets
            .iter()
            .map(|t| TargetSpec {
                aoa_rad: t.aoa_deg.to_radians(),
                range_m: t.range_m,
                doppler_hz: t.doppler_hz,
                rcs_m2: t.rcs_m2,
                gain_override: complex(t.gain_override),
            })
            .collect();
        let mut users = Vec::new();
        for (k, u) in self.users.iter().enumerate() {
            let aoa = u.aoa_deg.to_radians();
            let explicit = u.per_target_aod_deg.is_some() || u.per_target_path_m.is_some();
            let mut spec = match u.aod_deg {
                Some(aod) => UserSpec {
                    num_antennas: u.num_antennas,
                    aoa_rad: aoa,
                    aod_rad: aod.to_radians(),
                    range_m: u.range_m,
                    observed_targets: Vec::new(),
                    per_target_aod: Vec::new(),
                    per_target_path_m: Vec::new(),
                    max_power: u.max_power_w,
                    broadside_rad: u.broadside_deg.map(f64::to_radians),
                    gain_override: None,
                    per_target_gain_override: Vec::new(),
                },
                None => {
                    let broadside = match (u.broadside_deg, u.observed_targets.first()) {
                        (Some(b), _) => b.to_radians(),
                        (None, Some(&j)) => {
                            let t = targets.get(j).ok_or_else(|| {
                                HrfError::Config(format!("user {k}: observed target {j} does not exist"))
                            })?;
                            bisector(position(u.range_m, aoa), [0.0, 0.0], t.position())
                        }
                        // Face the BS.
                        (None, None) => aoa + std::f64::consts::PI,
                    };
                    UserSpec::placed(u.num_antennas, u.range_m, aoa, broadside, u.max_power_w)
                }
            };
            spec.gain_override = complex(u.gain_override);
            if explicit {
                let (Some(aods), Some(paths)) = (&u.per_target_aod_deg, &u.per_target_path_m) else {
                    return Err(HrfError::Config(format!(
                        "user {k}: per_target_aod_deg and per_target_path_m go together"
                    )));
                };
                spec.observed_targets = u.observed_targets.clone();
                spec.per_target_aod = aods.iter().map(|d| d.to_radians()).collect();
                spec.per_target_path_m = paths.clone();
            }
            users.push(spec);
        }
        let n_users = users.len();
        let mut sc = Scenario {
            carrier_hz: self.carrier_hz,
            num_bs_antennas: self.num_bs_antennas,
            antenna_spacing_ratio: self.antenna_spacing_ratio,
            targets,
            users,
            ofdm: OfdmPlan {
                subcarrier_spacing_hz: self.ofdm.subcarrier_spacing_hz,
                num_symbols: self.ofdm.num_symbols,
                samples_per_symbol: self.ofdm.samples_per_symbol,
                dl_subcarriers: self.ofdm.dl_subcarriers.indices(),
                ul_subcarriers_per_user: self.users.iter().map(|u| u.subcarriers.indices()).collect(),
                symbol_variances: self
                    .ofdm
                    .symbol_variances
                    .clone()
                    .unwrap_or_else(|| vec![1.0; n_users + 1]),
            },
            noise_variance: 1.0,
            bs_max_power: self.bs_max_power_w,
        };
        for (k, u) in self.users.iter().enumerate() {
            if u.per_target_aod_deg.is_none() {
                for &j in &u.observed_targets {
                    sc.observe(k, j).map_err(|e| HrfError::Config(format!("user {k}: {e}")))?;
                }
            }
        }
        sc.noise_variance = match (self.noise_variance, self.direct_snr_db) {
            (Some(v), None) => v,
            (None, Some(snr)) => {
                if sc.users.is_empty() {
                    return Err(HrfError::Config("direct_snr_db needs at least one user".into()));
                }
                sc.ofdm.validate()?;
                sc.noise_for_direct_snr(0, snr)
            }
            _ => {
                return Err(HrfError::Config(
                    "set exactly one of noise_variance and direct_snr_db".into(),
                ))
            }
        };
        sc.validate()?;
        Ok(sc)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| HrfError::Config(e.to_string()))?;
    file.build()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HrfError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// The shipped default scenario file.
pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../../../configs/default_scenario.toml");
