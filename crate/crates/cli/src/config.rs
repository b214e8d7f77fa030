//! Experiment configuration files and their resolution into instances.

use std::fs;
use std::path::{Path, PathBuf};

use bwk_core::algos::RunConfig;
use bwk_core::bench::{generate_planted, BudgetRule};
use bwk_core::model::{
    augment_time_resource, canonical_extended_instance, canonical_instance, BwkInstance, InstanceSpec,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            name: None,
            seed: 0,
            replications: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Canonical,
    CanonicalExtended,
    Planted,
    File,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub source: InstanceSource,
    /// Instance JSON, for `source = "file"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(rename = "T", default)]
    pub horizon: Option<u64>,
    /// Fixed total budget for every horizon.
    #[serde(default)]
    pub budget: Option<f64>,
    /// Per-round budget; the total is `b · T`.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub d_user: Option<usize>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub experiment: Experiment,
    pub instance: InstanceConfig,
    #[serde(default)]
    pub algorithms: Vec<RunConfig>,
    #[serde(default)]
    pub t_grid: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Parse JSON, reporting the path of the offending key on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Usage(format!("{what}: {}", e.inner()))
        } else {
            CliError::Usage(format!("{what}: at {path}: {}", e.inner()))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text, &format!("{what} {}", path.display()))
}

/// A resolved instance family: arms plus the rule that sets the budget per horizon.
pub struct InstanceFamily {
    pub template: BwkInstance,
    pub budget_rule: BudgetRule,
    pub default_horizon: u64,
}

impl InstanceFamily {
    pub fn at(&self, horizon: u64) -> Result<BwkInstance, CliError> {
        let budget = match self.budget_rule {
            BudgetRule::PerRound(b) => b * horizon as f64,
            BudgetRule::Fixed(b) => b,
        };
        Ok(self.template.with_horizon(horizon, budget)?)
    }
}

impl InstanceConfig {
    /// Build the instance family. Relative file paths resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<InstanceFamily, CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let planted_keys = self.m.is_some() || self.d_user.is_some() || self.margin.is_some() || self.seed.is_some();
        if self.source != InstanceSource::Planted && planted_keys {
            return usage("instance: m, d_user, margin and seed apply only to source \"planted\"".into());
        }
        if self.source != InstanceSource::File && self.path.is_some() {
            return usage("instance.path applies only to source \"file\"".into());
        }
        if self.budget.is_some() && self.b.is_some() {
            return usage("instance: give either budget or b, not both".into());
        }
        let template = match self.source {
            InstanceSource::Canonical => canonical_instance(),
            InstanceSource::CanonicalExtended => canonical_extended_instance(self.horizon.unwrap_or(100_000)),
            InstanceSource::Planted => generate_planted(
                self.m.unwrap_or(3),
                self.d_user.unwrap_or(1),
                self.b.unwrap_or(0.25),
                self.margin.unwrap_or(0.05),
                self.horizon.unwrap_or(4096),
                self.seed.unwrap_or(0),
            )?,
            InstanceSource::File => {
                let Some(path) = &self.path else {
                    return usage("instance.path is required for source \"file\"".into());
                };
                let spec: InstanceSpec = read_json(&base.join(path), "instance file")?;
                augment_time_resource(&spec)?
            }
        };
        let budget_rule = match (self.budget, self.b) {
            (Some(total), _) => BudgetRule::Fixed(total),
            (None, Some(b)) => BudgetRule::PerRound(b),
            (None, None) => BudgetRule::PerRound(template.per_round_budget()),
        };
        let default_horizon = self.horizon.unwrap_or(template.horizon());
        Ok(InstanceFamily {
            template,
            budget_rule,
            default_horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn misspelled_key_names_its_path() {
        let err =
            parse_json::<CliConfig>(r#"{"instance": {"source": "canonical", "buget": 3}}"#, "config").unwrap_err();
        assert!(err.to_string().contains("instance.buget"), "{err}");
    }

    #[test]
    fn defaults_fill_in() {
        let cfg: CliConfig = parse_json(r#"{"instance": {"source": "canonical"}}"#, "config").unwrap();
        assert_eq!(cfg.experiment.replications, 1);
        let fam = cfg.instance.resolve(Path::new(".")).unwrap();
        assert_eq!(fam.default_horizon, 100);
        assert_eq!(fam.budget_rule, BudgetRule::PerRound(0.5));
    }

    #[test]
    fn planted_keys_need_planted_source() {
        let cfg: CliConfig = parse_json(r#"{"instance": {"source": "canonical", "m": 3}}"#, "config").unwrap();
        assert!(cfg.instance.resolve(Path::new(".")).is_err());
    }
}
