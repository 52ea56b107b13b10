//! Run configuration: a TOML file with a strict schema, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use delta_lab::acceptance::all_ids;
use delta_lab::fixtures::{CouplingFixture, Resolution, FINAL_TIME, SNAPSHOTS, SYNTHESIS_SEED, WINDOW};
use delta_lab::dyadic::build_partition;
use delta_lab::signal::UniformGrid;

/// A configuration problem; reported with exit code 2 before any artifact is written.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Turns diagnostic thresholds into failures.
    pub strict: bool,
    pub coupling: CouplingSpec,
    pub initial: InitialSpec,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub sweep: SweepSpec,
    pub lemmas: LemmaSpec,
    pub verify: VerifySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: SYNTHESIS_SEED,
            threads: None,
            strict: false,
            coupling: CouplingSpec::default(),
            initial: InitialSpec::default(),
            grid: GridSpec::default(),
            solver: SolverSpec::default(),
            sweep: SweepSpec::default(),
            lemmas: LemmaSpec::default(),
            verify: VerifySpec::default(),
        }
    }
}

fn default_horizon() -> f64 {
    4.0
}

fn default_support() -> f64 {
    2.0
}

fn default_offset() -> f64 {
    -2.0
}

fn default_one() -> f64 {
    1.0
}

fn default_samples() -> usize {
    16384
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    Zero {
        #[serde(default = "default_horizon")]
        horizon: f64,
    },
    Constant {
        value: f64,
        #[serde(default = "default_horizon")]
        horizon: f64,
    },
    /// Random path of class `H^nu` on `[-support, support]`, horizon `2 support`.
    Synthesized {
        nu: f64,
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_support")]
        support: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// One of the acceptance fixtures by name.
    Fixture { name: String },
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self::Constant { value: -2.0, horizon: default_horizon() }
    }
}

fn default_width() -> f64 {
    1.0
}

fn default_center() -> f64 {
    5.0
}

fn default_momentum() -> f64 {
    -2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian {
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_center")]
        center: f64,
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    /// `e^{-kappa |x|}`, the bound state of `alpha = -2 kappa`.
    BoundState {
        #[serde(default = "default_one")]
        kappa: f64,
    },
    /// Samples written by `ComplexSignal::write_csv` on the configured space grid.
    Csv { path: PathBuf },
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self::Gaussian { width: default_width(), center: default_center(), momentum: default_momentum() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub window: f64,
    pub space_nodes: usize,
    pub charge_nodes: usize,
    pub snapshots: usize,
    pub final_time: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        let r = Resolution::default();
        Self {
            window: WINDOW,
            space_nodes: r.space_nodes,
            charge_nodes: r.charge_nodes,
            snapshots: SNAPSHOTS,
            final_time: FINAL_TIME,
        }
    }
}

impl GridSpec {
    pub fn resolution(&self) -> Resolution {
        Resolution {
            window: self.window,
            space_nodes: self.space_nodes,
            charge_nodes: self.charge_nodes,
            snapshots: self.snapshots,
            final_time: self.final_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    March,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSpec {
    Fourier,
    Duhamel,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: MethodSpec,
    pub route: RouteSpec,
    pub tol: f64,
    pub max_iterations: usize,
    pub min_window: f64,
    pub initial_window: Option<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: MethodSpec::March,
            route: RouteSpec::Fourier,
            tol: 1e-10,
            max_iterations: 500,
            min_window: 1e-3,
            initial_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Nested charge grids, each `2 n - 1` of the previous.
    pub charge_nodes: Vec<usize>,
    pub space_nodes: Vec<usize>,
    /// Also run the Duhamel route at each space point.
    pub route_agreement: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { charge_nodes: vec![257, 513, 1025], space_nodes: vec![2048, 4096, 8192], route_agreement: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSpec {
    pub cutoff_nu: Vec<f64>,
    pub dilation_mu: Vec<f64>,
    pub chgvar_s: Vec<f64>,
    pub trace_nu: Vec<f64>,
    pub product_laws: bool,
    pub bernstein: bool,
    pub samples: usize,
    /// Coarse battery grid; every battery is repeated on its doubling.
    pub nodes: usize,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            cutoff_nu: vec![0.0, 0.25, 0.4],
            dilation_mu: vec![0.0, 0.25, 0.75],
            chgvar_s: vec![0.5],
            trace_nu: vec![0.25],
            product_laws: true,
            bernstein: true,
            samples: 20,
            nodes: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub criteria: Vec<u8>,
    /// Also check the configured problem (mass, route agreement, bound-state jump).
    pub problem: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { criteria: all_ids(), problem: true }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub strict: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(t) = overrides.threads {
            cfg.threads = Some(t);
        }
        cfg.strict |= overrides.strict;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks shared by every command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threads == Some(0) {
            return Err(bad("threads must be at least 1"));
        }
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive, got {v}")))
            }
        };
        match &self.coupling {
            CouplingSpec::Zero { horizon } => pos(*horizon, "coupling.horizon")?,
            CouplingSpec::Constant { value, horizon } => {
                pos(*horizon, "coupling.horizon")?;
                if !value.is_finite() {
                    return Err(bad("coupling.value must be finite"));
                }
            }
            CouplingSpec::Synthesized { nu, support, samples, offset, amplitude } => {
                pos(*nu, "coupling.nu")?;
                pos(*support, "coupling.support")?;
                if !samples.is_power_of_two() {
                    return Err(bad(format!("coupling.samples must be a power of two, got {samples}")));
                }
                if !offset.is_finite() || !amplitude.is_finite() {
                    return Err(bad("coupling.offset and coupling.amplitude must be finite"));
                }
            }
            CouplingSpec::Fixture { name } => {
                fixture_by_name(name)?;
            }
        }
        match &self.initial {
            InitialSpec::Gaussian { width, center, momentum } => {
                pos(*width, "initial.width")?;
                if !center.is_finite() || !momentum.is_finite() {
                    return Err(bad("initial.center and initial.momentum must be finite"));
                }
            }
            InitialSpec::BoundState { kappa } => pos(*kappa, "initial.kappa")?,
            InitialSpec::Csv { .. } => {}
        }
        let g = &self.grid;
        pos(g.window, "grid.window")?;
        pos(g.final_time, "grid.final_time")?;
        if !g.space_nodes.is_power_of_two() || g.space_nodes < 64 {
            return Err(bad(format!("grid.space_nodes must be a power of two >= 64, got {}", g.space_nodes)));
        }
        if g.charge_nodes < 3 {
            return Err(bad(format!("grid.charge_nodes must be at least 3, got {}", g.charge_nodes)));
        }
        if g.snapshots < 2 {
            return Err(bad(format!("grid.snapshots must be at least 2, got {}", g.snapshots)));
        }
        let s = &self.solver;
        pos(s.tol, "solver.tol")?;
        pos(s.min_window, "solver.min_window")?;
        if s.max_iterations == 0 {
            return Err(bad("solver.max_iterations must be at least 1"));
        }
        if let Some(w) = s.initial_window {
            pos(w, "solver.initial_window")?;
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<(), ConfigError> {
        let s = &self.sweep;
        if s.charge_nodes.is_empty() || s.space_nodes.is_empty() {
            return Err(bad("sweep lists must not be empty"));
        }
        for w in s.charge_nodes.windows(2) {
            if w[1] != 2 * w[0] - 1 {
                return Err(bad(format!("sweep.charge_nodes must be nested (n -> 2n - 1), got {} -> {}", w[0], w[1])));
            }
        }
        if s.charge_nodes[0] < 3 {
            return Err(bad("sweep.charge_nodes must start at 3 or more"));
        }
        for w in s.space_nodes.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(bad(format!("sweep.space_nodes must double, got {} -> {}", w[0], w[1])));
            }
        }
        if s.space_nodes.iter().any(|n| !n.is_power_of_two() || *n < 64) {
            return Err(bad("sweep.space_nodes must be powers of two >= 64"));
        }
        Ok(())
    }

    pub fn validate_lemmas(&self) -> Result<(), ConfigError> {
        let l = &self.lemmas;
        if l.samples == 0 {
            return Err(bad("lemmas.samples must be at least 1"));
        }
        if !l.nodes.is_power_of_two() || l.nodes < 64 {
            return Err(bad(format!("lemmas.nodes must be a power of two >= 64, got {}", l.nodes)));
        }
        // the partition checks run on a window 40 wide and need three dyadic annuli
        let g = UniformGrid::centered(40.0, l.nodes).map_err(|e| bad(e.to_string()))?;
        build_partition(&g).map_err(|e| bad(format!("lemmas.nodes: {e}")))?;
        if let Some(nu) = l.cutoff_nu.iter().find(|nu| !(0.0..0.5).contains(*nu)) {
            return Err(bad(format!("lemmas.cutoff_nu entries must lie in [0, 1/2), got {nu}")));
        }
        if let Some(mu) = l.dilation_mu.iter().find(|mu| !(**mu >= 0.0)) {
            return Err(bad(format!("lemmas.dilation_mu entries must be >= 0, got {mu}")));
        }
        Ok(())
    }

    pub fn validate_verify(&self) -> Result<(), ConfigError> {
        let known = all_ids();
        if let Some(id) = self.verify.criteria.iter().find(|id| !known.contains(id)) {
            return Err(bad(format!("unknown criterion {id}")));
        }
        if self.verify.criteria.is_empty() && !self.verify.problem {
            return Err(bad("verify has nothing to check"));
        }
        Ok(())
    }
}

pub fn fixture_by_name(name: &str) -> Result<CouplingFixture, ConfigError> {
    CouplingFixture::ALL
        .into_iter()
        .find(|f| f.name() == name)
        .ok_or_else(|| bad(format!("unknown coupling fixture '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("sed = 3").is_err());
        assert!(RunConfig::parse("[grid]\nwindoww = 3.0").is_err());
        assert!(RunConfig::parse("[coupling]\nkind = \"constant\"\nvalue = 1.0\nnu = 0.3").is_err());
    }

    #[test]
    fn tagged_sections_parse() {
        let cfg = RunConfig::parse("[coupling]\nkind = \"synthesized\"\nnu = 0.3\n[initial]\nkind = \"bound_state\"").unwrap();
        assert!(matches!(cfg.coupling, CouplingSpec::Synthesized { nu, .. } if nu == 0.3));
        assert_eq!(cfg.initial, InitialSpec::BoundState { kappa: 1.0 });
    }

    #[test]
    fn flags_override_the_file() {
        let dir = std::env::temp_dir().join(format!("delta-lab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "seed = 3\nthreads = 2").unwrap();
        let o = Overrides { seed: Some(9), threads: None, strict: true };
        let cfg = RunConfig::load(Some(&path), &o).unwrap();
        assert_eq!((cfg.seed, cfg.threads, cfg.strict), (9, Some(2), true));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn coarse_lemma_grids_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate_lemmas().is_ok());
        cfg.lemmas.nodes = 256;
        assert!(cfg.validate_lemmas().is_err());
    }

    #[test]
    fn sweep_lists_are_checked() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate_sweep().is_ok());
        cfg.sweep.charge_nodes.clear();
        assert!(cfg.validate_sweep().is_err());
        cfg.sweep.charge_nodes = vec![257, 512];
        assert!(cfg.validate_sweep().is_err());
    }
}
