use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longterm::PsoParams;
use crate::precoder::SolverOptions;
use crate::scenarios::{builtin, NetworkScenario, Scheme};

/// Where the network comes from: a built-in name, a JSON file, or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Named(String),
    Inline(Box<NetworkScenario>),
}

impl ScenarioRef {
    /// Built-in names win over paths; relative paths resolve against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<NetworkScenario> {
        let s = match self {
            ScenarioRef::Inline(s) => (**s).clone(),
            ScenarioRef::Named(name) => match builtin(name) {
                Ok(s) => s,
                Err(_) if name.ends_with(".json") => {
                    let p = PathBuf::from(name);
                    let p = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    };
                    NetworkScenario::load(&p)?
                }
                Err(e) => return Err(e),
            },
        };
        s.validate().map_err(Error::InvalidScenario)?;
        Ok(s)
    }
}

/// Optional knobs on top of the reduced or full-scale defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub samples: Option<usize>,
    pub eval_samples: Option<usize>,
    pub t_max: Option<usize>,
    pub t_ipc: Option<usize>,
    pub grid_size: Option<usize>,
    pub eps_tol: Option<f64>,
    pub sigma_floor: Option<f64>,
    /// Initial threshold; defaults to the larger of noise power and floor.
    pub sigma0: Option<f64>,
    pub initial_tilt_deg: Option<f64>,
    pub swarm_size: Option<usize>,
    pub pso_iters: Option<usize>,
    pub penalty: Option<f64>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub velocity_clamp: Option<f64>,
    pub centralized_budget: Option<f64>,
    pub search_solver: Option<SolverOptions>,
    pub eval_solver: Option<SolverOptions>,
    pub strict: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved numeric parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub samples: usize,
    pub eval_samples: usize,
    pub t_max: usize,
    pub t_ipc: usize,
    pub grid_size: usize,
    pub eps_tol: f64,
    pub sigma_floor: f64,
    pub sigma0: f64,
    pub initial_tilt: f64,
    pub pso: PsoParams,
    pub centralized_budget: f64,
    pub search_opts: SolverOptions,
    pub eval_opts: SolverOptions,
}

pub const DEFAULT_GRID_SIZE: usize = 7;
pub const DEFAULT_EPS_TOL: f64 = 1e-4;
pub const DEFAULT_T_IPC: usize = 5;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;
pub const DEFAULT_TILT_DEG: f64 = 30.0;

impl RunParams {
    /// Budgets used for acceptance runs.
    pub fn reduced(scenario: &NetworkScenario) -> Self {
        Self {
            samples: 20,
            eval_samples: 50,
            t_max: 3,
            pso: PsoParams { max_iters: 20, ..PsoParams::default() },
            search_opts: SolverOptions { max_iters: 20, rel_tol: 1e-3, dual_iters: 10, ..SolverOptions::default() },
            ..Self::full(scenario)
        }
    }

    pub fn full(scenario: &NetworkScenario) -> Self {
        Self {
            samples: 100,
            eval_samples: 100,
            t_max: 5,
            t_ipc: DEFAULT_T_IPC,
            grid_size: DEFAULT_GRID_SIZE,
            eps_tol: DEFAULT_EPS_TOL,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            sigma0: scenario.noise_power_w.max(DEFAULT_SIGMA_FLOOR),
            initial_tilt: DEFAULT_TILT_DEG.to_radians(),
            pso: PsoParams { max_iters: 60, ..PsoParams::default() },
            centralized_budget: 1.0,
            search_opts: SolverOptions::default(),
            eval_opts: SolverOptions::default().strict(true),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = o.$field.clone() { $target = v; })*
            };
        }
        set!(
            samples => self.samples,
            eval_samples => self.eval_samples,
            t_max => self.t_max,
            t_ipc => self.t_ipc,
            grid_size => self.grid_size,
            eps_tol => self.eps_tol,
            sigma_floor => self.sigma_floor,
            sigma0 => self.sigma0,
            swarm_size => self.pso.swarm_size,
            pso_iters => self.pso.max_iters,
            penalty => self.pso.penalty,
            inertia => self.pso.inertia,
            cognitive => self.pso.cognitive,
            social => self.pso.social,
            velocity_clamp => self.pso.velocity_clamp,
            centralized_budget => self.centralized_budget,
            search_solver => self.search_opts,
            eval_solver => self.eval_opts,
        );
        if let Some(deg) = o.initial_tilt_deg {
            self.initial_tilt = deg.to_radians();
        }
        if let Some(true) = o.strict {
            self.search_opts.strict = true;
            self.eval_opts.strict = true;
        }
    }

    /// Every problem found, not only the first.
    pub fn problems(&self, scenario: &NetworkScenario) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        need(self.samples > 0, "samples must be positive");
        need(self.eval_samples > 0, "eval_samples must be positive");
        need(self.grid_size >= 2, "grid_size must be at least 2");
        need(self.eps_tol >= 0.0 && self.eps_tol.is_finite(), "eps_tol must be a finite non-negative number");
        need(self.sigma_floor > 0.0 && self.sigma_floor.is_finite(), "sigma_floor must be positive");
        need(self.sigma0 > 0.0 && self.sigma0.is_finite(), "sigma0 must be positive");
        need(self.centralized_budget >= 0.0 && self.centralized_budget.is_finite(), "centralized_budget must be non-negative");
        let g = &scenario.array.geometry;
        need(
            (g.tilt_min..=g.tilt_max).contains(&self.initial_tilt),
            "initial_tilt_deg lies outside the tilt range",
        );
        for (name, o) in [("search_solver", &self.search_opts), ("eval_solver", &self.eval_opts)] {
            if o.max_iters == 0 || o.dual_iters == 0 {
                out.push(format!("{name}: max_iters and dual_iters must be positive"));
            }
            if !(o.rel_tol >= 0.0 && o.dual_step0 > 0.0 && o.bisection_tol > 0.0) {
                out.push(format!("{name}: tolerances must be positive"));
            }
        }
        if let Err(e) = self.pso.validate() {
            out.push(format!("pso: {e}"));
        }
        out
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Resolve the scenario and the numeric parameters, reporting every
    /// validation problem at once.
    pub fn resolve(&self, base: Option<&Path>) -> Result<(NetworkScenario, RunParams)> {
        let scenario = self.scenario.resolve(base)?;
        let mut params = if self.full_scale { RunParams::full(&scenario) } else { RunParams::reduced(&scenario) };
        params.apply(&self.overrides);
        let mut problems = params.problems(&scenario);
        if self.seeds.is_empty() {
            problems.insert(0, "at least one seed is required".into());
        }
        if let Scheme::FixedIpc(s) = self.scheme {
            if !(s > 0.0 && s.is_finite()) {
                problems.push("fixed-ipc threshold must be positive".into());
            }
        }
        if problems.is_empty() {
            Ok((scenario, params))
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioRef::Named("high_ici".into()),
            scheme: Scheme::Proposed,
            seeds: vec![1],
            full_scale: false,
            overrides: Overrides::default(),
            output_dir: None,
        }
    }

    #[test]
    fn reduced_defaults() {
        let (s, p) = base().resolve(None).unwrap();
        assert_eq!((p.samples, p.pso.max_iters, p.t_max), (20, 20, 3));
        assert_eq!((p.grid_size, p.t_ipc), (7, 5));
        assert_eq!(p.sigma0, s.noise_power_w);
        assert!(p.eval_opts.strict && !p.search_opts.strict);
    }

    #[test]
    fn unknown_override_is_rejected() {
        let text = r#"{"scenario":"high_ici","scheme":{"scheme":"proposed"},"seeds":[1],"overrides":{"smaples":3}}"#;
        let err = serde_json::from_str::<ExperimentConfig>(text).unwrap_err();
        assert!(err.to_string().contains("smaples"));
    }

    #[test]
    fn all_problems_are_listed() {
        let mut c = base();
        c.seeds.clear();
        c.overrides.samples = Some(0);
        c.overrides.grid_size = Some(1);
        let msg = c.resolve(None).unwrap_err().to_string();
        assert!(msg.contains("seed") && msg.contains("samples") && msg.contains("grid_size"), "{msg}");
    }

    #[test]
    fn strict_flag_reaches_both_solvers() {
        let mut c = base();
        c.overrides.strict = Some(true);
        let (_, p) = c.resolve(None).unwrap();
        assert!(p.search_opts.strict && p.eval_opts.strict);
    }
}
