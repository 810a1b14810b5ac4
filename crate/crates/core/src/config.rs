//! Run configuration, read from a TOML document.
//!
//! Every table and key is optional; missing entries take the defaults of
//! [`RunConfig::default`] and are echoed to the log. A minimal sweep needs
//! only the potentials and `sweep.beta`:
//!
//! ```toml
//! [potentials.v1]
//! zeros = [{ location = 0.0, exponent = 0.5 }]
//!
//! [sweep]
//! beta = 1.2
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{GridPolicy, LadderSpec, SweepConfig, DEFAULT_RESOLUTION_NODES};
use crate::error::{Error, Result};
use crate::minimizer::{CoupledParams, SolverOptions};
use crate::potentials::{Modulator, PotentialSpec, ZeroSpec, MAX_EXPONENT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length: 256.0,
            n_points: 8192,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Pseudo-time step of the gradient-flow cross-check.
    pub flow_step: f64,
    pub flow_max_iter: usize,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iter: 2000,
            flow_step: 1.0,
            flow_max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModulatorConfig {
    Constant { value: f64 },
    Cosine { base: f64, amplitude: f64, wavenumber: f64 },
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        ModulatorConfig::Constant { value: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub zeros: Vec<ZeroSpec>,
    pub modulator: ModulatorConfig,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            zeros: vec![ZeroSpec {
                location: 0.0,
                exponent: 0.5,
            }],
            modulator: ModulatorConfig::default(),
        }
    }
}

impl PotentialConfig {
    fn build(&self, path: &str) -> Result<PotentialSpec> {
        for (i, z) in self.zeros.iter().enumerate() {
            if !(z.exponent > 0.0 && z.exponent < MAX_EXPONENT) {
                return Err(Error::config(
                    format!("{path}.zeros[{i}].exponent"),
                    format!(
                        "exponent {} is outside (0, {MAX_EXPONENT}); the weight |x|^p Q² is integrable only for p < {MAX_EXPONENT}",
                        z.exponent
                    ),
                ));
            }
        }
        let modulator = match self.modulator {
            ModulatorConfig::Constant { value } => Modulator::Constant(value),
            ModulatorConfig::Cosine {
                base,
                amplitude,
                wavenumber,
            } => Modulator::Cosine {
                base,
                amplitude,
                wavenumber,
            },
        };
        PotentialSpec::new(self.zeros.clone(), modulator).map_err(|e| Error::config(path, e.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialsConfig {
    pub v1: PotentialConfig,
    /// Defaults to a copy of `v1`.
    pub v2: Option<PotentialConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    /// Centre of the Gaussian initial guess; defaults to the first zero of `v1`.
    pub init_center: Option<f64>,
    pub init_width: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            beta: 0.5,
            init_center: None,
            init_width: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigConfig {
    pub tolerance: f64,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// Interspecies coupling; takes precedence over `beta_fraction`.
    pub beta: Option<f64>,
    /// `β` as a fraction of `a*`, used when `beta` is absent.
    pub beta_fraction: f64,
    pub ladder: LadderSpec,
    /// Explicit decreasing `ε` values; replaces the geometric ladder.
    pub eps: Option<Vec<f64>>,
    pub grid: GridPolicy,
    pub resolution_nodes: f64,
    pub warm_start: bool,
    pub compare_cold_start: bool,
    pub profile_length: f64,
    pub profile_points: usize,
    /// Number of trailing ladder points in each fit.
    pub fit_window: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            beta: None,
            beta_fraction: 0.5,
            ladder: LadderSpec::default(),
            eps: None,
            grid: GridPolicy::default(),
            resolution_nodes: DEFAULT_RESOLUTION_NODES,
            warm_start: true,
            compare_cold_start: true,
            profile_length: 32.0,
            profile_points: 2048,
            fit_window: 5,
        }
    }
}

impl SweepBlock {
    pub fn beta(&self, a_star: f64) -> f64 {
        self.beta.unwrap_or(self.beta_fraction * a_star)
    }

    pub fn ladder(&self, a_star: f64, p0: f64) -> Result<Vec<f64>> {
        match &self.eps {
            Some(eps) => Ok(eps.clone()),
            None => self.ladder.build(a_star, p0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("fracbec-output"),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub random_fields: usize,
    pub uniqueness_starts: usize,
    pub symmetry_starts: usize,
    /// Radius of the small ball for the uniqueness probe, as a fraction of `a*`.
    pub small_ball_fraction: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            random_fields: 100,
            uniqueness_starts: 8,
            symmetry_starts: 4,
            small_ball_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub ground_state: GroundStateConfig,
    pub potentials: PotentialsConfig,
    pub params: ParamsConfig,
    pub eig: EigConfig,
    pub sweep: SweepBlock,
    pub solver: SolverOptions,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

/// Hex SHA-256 of the resolved configuration, output block excluded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigHash(String);

impl ConfigHash {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConfigHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn power_of_two(path: &str, n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::config(path, format!("must be a power of two >= 2, got {n}")));
    }
    Ok(())
}

fn positive(path: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(path, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn finite(path: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::config(path, format!("must be finite, got {v}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_string())
        })?;
        config.validate()?;
        if let Ok(table) = text.parse::<toml::Table>() {
            for (path, value) in defaulted_entries(&table) {
                log::info!("config default {path} = {value}");
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        positive("grid.length", self.grid.length)?;
        power_of_two("grid.n_points", self.grid.n_points)?;
        positive("ground_state.tolerance", self.ground_state.tolerance)?;
        positive("ground_state.flow_step", self.ground_state.flow_step)?;
        self.potentials()?;
        for (path, v) in [("params.a1", self.params.a1), ("params.a2", self.params.a2), ("params.beta", self.params.beta)] {
            finite(path, v)?;
        }
        if let Some(c) = self.params.init_center {
            finite("params.init_center", c)?;
        }
        positive("params.init_width", self.params.init_width)?;
        positive("eig.tolerance", self.eig.tolerance)?;
        let sweep = &self.sweep;
        if let Some(beta) = sweep.beta {
            positive("sweep.beta", beta)?;
        }
        positive("sweep.beta_fraction", sweep.beta_fraction)?;
        positive("sweep.ladder.ratio", sweep.ladder.ratio)?;
        positive("sweep.ladder.start_gap_fraction", sweep.ladder.start_gap_fraction)?;
        if sweep.ladder.points == 0 {
            return Err(Error::config("sweep.ladder.points", "must be at least 1"));
        }
        if let Some(eps) = &sweep.eps {
            for (i, e) in eps.iter().enumerate() {
                positive(&format!("sweep.eps[{i}]"), *e)?;
            }
        }
        match sweep.grid {
            GridPolicy::Fixed { length, n_points } => {
                positive("sweep.grid.length", length)?;
                power_of_two("sweep.grid.n_points", n_points)?;
            }
            GridPolicy::Adaptive {
                length,
                nodes_per_eps,
                min_points,
            } => {
                positive("sweep.grid.length", length)?;
                positive("sweep.grid.nodes_per_eps", nodes_per_eps)?;
                power_of_two("sweep.grid.min_points", min_points)?;
            }
        }
        positive("sweep.resolution_nodes", sweep.resolution_nodes)?;
        positive("sweep.profile_length", sweep.profile_length)?;
        power_of_two("sweep.profile_points", sweep.profile_points)?;
        if sweep.fit_window < 3 {
            return Err(Error::config("sweep.fit_window", "a fit needs at least 3 points"));
        }
        self.solver.validate().map_err(|e| Error::config("solver", e.to_string()))?;
        positive("verify.small_ball_fraction", self.verify.small_ball_fraction)?;
        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    pub fn potentials(&self) -> Result<(PotentialSpec, PotentialSpec)> {
        let v1 = self.potentials.v1.build("potentials.v1")?;
        let v2 = match &self.potentials.v2 {
            Some(v2) => v2.build("potentials.v2")?,
            None => v1.clone(),
        };
        Ok((v1, v2))
    }

    pub fn params(&self) -> Result<CoupledParams> {
        CoupledParams::new(self.params.a1, self.params.a2, self.params.beta)
            .map_err(|e| Error::config("params", e.to_string()))
    }

    pub fn sweep_config(&self, a_star: f64, p0: f64) -> Result<SweepConfig> {
        let (v1, v2) = self.potentials()?;
        let ladder = self.sweep.ladder(a_star, p0)?;
        let mut config = SweepConfig::new(self.sweep.beta(a_star), ladder, v1, v2);
        config.grid = self.sweep.grid;
        config.resolution_nodes = self.sweep.resolution_nodes;
        config.warm_start = self.sweep.warm_start;
        config.compare_cold_start = self.sweep.compare_cold_start;
        config.profile_length = self.sweep.profile_length;
        config.profile_points = self.sweep.profile_points;
        config.solver = self.solver.clone();
        Ok(config)
    }

    pub fn hash(&self) -> ConfigHash {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        ConfigHash(hex::encode(digest))
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
    RunConfig::from_toml(&text)
}

/// Dotted paths (with their default values) of entries absent from `user`.
pub fn defaulted_entries(user: &toml::Table) -> Vec<(String, String)> {
    let defaults = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    let mut out = Vec::new();
    collect_defaults(&defaults, Some(user), "", &mut out);
    out
}

fn collect_defaults(defaults: &toml::Table, user: Option<&toml::Table>, prefix: &str, out: &mut Vec<(String, String)>) {
    for (key, value) in defaults {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let given = user.and_then(|u| u.get(key));
        match (value, given) {
            (toml::Value::Table(inner), Some(toml::Value::Table(u))) => collect_defaults(inner, Some(u), &path, out),
            // a tagged enum supplied by the user replaces the default wholesale
            (_, Some(_)) => {}
            (toml::Value::Table(inner), None) => collect_defaults(inner, None, &path, out),
            (v, None) => out.push((path, v.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let text = "[potentials.v1]\nzeros = [{ location = 0.0, exponent = 0.5 }]\n\n[sweep]\nbeta = 1.2\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.sweep.beta(2.0), 1.2);
        assert_eq!(c.solver, SolverOptions::default());
        let table: toml::Table = text.parse().unwrap();
        let defaulted = defaulted_entries(&table);
        assert!(defaulted.iter().any(|(p, _)| p == "grid.n_points"));
        assert!(defaulted.iter().any(|(p, _)| p == "sweep.ladder.points"));
        assert!(!defaulted.iter().any(|(p, _)| p == "sweep.beta"));
    }

    #[test]
    fn empty_document_is_valid() {
        assert!(RunConfig::from_toml("").is_ok());
    }

    #[test]
    fn non_power_of_two_names_field() {
        match RunConfig::from_toml("[grid]\nn_points = 1000\n") {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "grid.n_points");
                assert!(message.contains("power of two"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exponent_range_cites_bound() {
        let text = "[potentials.v1]\nzeros = [{ location = 0.0, exponent = 3.5 }]\n";
        match RunConfig::from_toml(text) {
            Err(e @ Error::Config { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("potentials.v1.zeros[0].exponent"), "{msg}");
                assert!(msg.contains("integrable"), "{msg}");
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_path() {
        match RunConfig::from_toml("[solver]\ntolerence = 1e-6\n") {
            Err(Error::Config { path, message }) => {
                assert!(path.starts_with("solver"), "{path}");
                assert!(message.contains("tolerence"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tagged_grid_policy() {
        let c = RunConfig::from_toml("[sweep.grid]\nkind = \"fixed\"\nlength = 16.0\nn_points = 4096\n").unwrap();
        assert_eq!(
            c.sweep.grid,
            GridPolicy::Fixed {
                length: 16.0,
                n_points: 4096
            }
        );
    }

    #[test]
    fn hash_ignores_output_block() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.directory = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.grid.n_points = 4096;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().as_str().len(), 64);
    }

    #[test]
    fn second_potential_defaults_to_first() {
        let c = RunConfig::from_toml("[potentials.v1]\nzeros = [{ location = 1.0, exponent = 0.25 }]\n").unwrap();
        let (v1, v2) = c.potentials().unwrap();
        assert_eq!(v1.zeros(), v2.zeros());
    }
}
