use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, UserCount};
use crate::angular::AngularGrid;
use crate::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_elevation: usize,
    pub n_azimuth: usize,
    pub wavelength_m: f64,
}

/// On-disk scenario document (JSON).
///
/// `power_responses` is `L0` rows of `M` values each; `aps` is the
/// single-subregion shorthand. Exactly one of them must be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_responses: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_distribution: Option<Vec<f64>>,
    pub user_count: UserCount,
    pub noise_power_dbm: f64,
    pub tx_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subregion_centers_m: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_grid_index: Option<Vec<Option<usize>>>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let grid = AngularGrid::new(self.grid.n_elevation, self.grid.n_azimuth, self.grid.wavelength_m)?;
        let columns = match (self.power_responses, self.aps) {
            (Some(rows), None) => {
                if rows.len() != grid.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "power_responses has {} rows, grid has {} cells",
                        rows.len(),
                        grid.len()
                    )));
                }
                let m = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch("power_responses rows differ in length".into()));
                }
                (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
            }
            (None, Some(aps)) => vec![aps],
            (Some(_), Some(_)) => {
                return Err(Error::Parse("scenario has both power_responses and aps".into()));
            }
            (None, None) => {
                return Err(Error::Parse("scenario needs power_responses or aps".into()));
            }
        };
        let m = columns.len();
        let mu = match self.user_distribution {
            Some(mu) => mu,
            None if m == 1 => vec![1.0],
            None => return Err(Error::Parse("user_distribution is required for several subregions".into())),
        };
        let mut scenario = Scenario::new(
            grid,
            columns,
            mu,
            self.user_count,
            dbm_to_watts(self.noise_power_dbm),
            dbm_to_watts(self.tx_power_dbm),
        )?;
        if let Some(c) = self.subregion_centers_m {
            scenario = scenario.with_subregion_centers(c)?;
        }
        if let Some(l) = self.los_grid_index {
            scenario = scenario.with_los_grid_index(l)?;
        }
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        let grid = scenario.grid();
        let rows = (0..grid.len())
            .map(|l| scenario.power_responses().iter().map(|c| c[l]).collect())
            .collect();
        ScenarioFile {
            grid: GridSpec {
                n_elevation: grid.n_elevation(),
                n_azimuth: grid.n_azimuth(),
                wavelength_m: grid.wavelength(),
            },
            power_responses: Some(rows),
            aps: None,
            user_distribution: Some(scenario.user_distribution().to_vec()),
            user_count: scenario.user_count(),
            noise_power_dbm: watts_to_dbm(scenario.noise_power()),
            tx_power_dbm: watts_to_dbm(scenario.tx_power()),
            subregion_centers_m: scenario.subregion_centers().map(<[_]>::to_vec),
            los_grid_index: scenario.los_grid_index().map(<[_]>::to_vec),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ScenarioFile::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        ScenarioFile::load(path)?.into_scenario()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        ScenarioFile::from_scenario(self).save(path)
    }
}
