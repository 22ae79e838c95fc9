//! Python bindings: environments, policies, evaluation and training.

use std::path::PathBuf;

use crowdnav::config::RunConfig;
use crowdnav::eval::{self, baseline, evaluate, EvalReport, LearnedController};
use crowdnav::net::{
    forward, load_checkpoint, save_checkpoint, Arch, Checkpoint, HiddenState, NetConfig,
    PolicyParams,
};
use crowdnav::ppo::Trainer as CoreTrainer;
use crowdnav::sim::{generate_scenario, CrowdEnv, Observation, ScenarioConfig, Terminal};
use crowdnav::{Error, Vec2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::Config { .. }
        | Error::Shape { .. }
        | Error::Checkpoint { .. }
        | Error::Csv { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn terminal_name(t: Terminal) -> &'static str {
    match t {
        Terminal::Running => "running",
        Terminal::ReachGoal => "success",
        Terminal::Collision => "collision",
        Terminal::Timeout => "timeout",
    }
}

fn scenario_from(suite: Option<&str>, config_toml: Option<&str>) -> PyResult<ScenarioConfig> {
    match (suite, config_toml) {
        (Some(_), Some(_)) => Err(PyValueError::new_err(
            "pass either suite or config_toml, not both",
        )),
        (_, Some(text)) => Ok(RunConfig::from_toml(text).map_err(py_err)?.scenario),
        (Some(name), None) => eval::suite(name).map_err(py_err),
        (None, None) => Ok(ScenarioConfig::default()),
    }
}

fn observation_dict<'py>(py: Python<'py>, obs: &Observation) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("robot_node", obs.robot_node.to_vec())?;
    d.set_item(
        "spatial_edges",
        obs.spatial_edges
            .iter()
            .map(|e| e.to_vec())
            .collect::<Vec<_>>(),
    )?;
    d.set_item("temporal_edge", obs.temporal_edge.to_vec())?;
    d.set_item("visible", obs.visible.clone())?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("controller", &r.controller)?;
    d.set_item("suite", &r.suite)?;
    d.set_item("n_episodes", r.n_episodes)?;
    d.set_item("success_rate", r.success_rate)?;
    d.set_item("collision_rate", r.collision_rate)?;
    d.set_item("timeout_rate", r.timeout_rate)?;
    d.set_item("mean_nav_time", r.mean_nav_time)?;
    d.set_item("mean_reward", r.mean_reward)?;
    d.set_item("table_row", r.table_row())?;
    Ok(d)
}

/// One crowd navigation episode.
#[pyclass(module = "crowdnav_py")]
struct Env {
    inner: CrowdEnv,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (seed=0, suite=None, config_toml=None))]
    fn new(seed: u64, suite: Option<&str>, config_toml: Option<&str>) -> PyResult<Self> {
        let config = scenario_from(suite, config_toml)?;
        Ok(Env {
            inner: CrowdEnv::new(&config, seed).map_err(py_err)?,
        })
    }

    /// Applies a velocity command; returns `(reward, outcome, done)`.
    fn step(&mut self, vx: f64, vy: f64) -> PyResult<(f64, &'static str, bool)> {
        let out = self.inner.step(Vec2::new(vx, vy)).map_err(py_err)?;
        Ok((
            out.reward,
            terminal_name(out.terminal),
            out.terminal.is_done(),
        ))
    }

    fn observation<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        observation_dict(py, self.inner.observation())
    }

    #[getter]
    fn t(&self) -> usize {
        self.inner.world().t
    }

    #[getter]
    fn robot_position(&self) -> (f64, f64) {
        let p = self.inner.world().robot.position;
        (p.x, p.y)
    }

    #[getter]
    fn robot_goal(&self) -> (f64, f64) {
        let g = self.inner.world().robot.goal;
        (g.x, g.y)
    }

    #[getter]
    fn n_humans(&self) -> usize {
        self.inner.world().humans.len()
    }

    /// Full ground-truth world state as JSON.
    fn world_json(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.world())
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Policy network parameters plus a recurrent state for stepping.
#[pyclass(module = "crowdnav_py")]
struct Policy {
    params: PolicyParams,
    hidden: Option<HiddenState>,
}

#[pymethods]
impl Policy {
    #[new]
    #[pyo3(signature = (arch="dsrnn", seed=0, d_rnn=128, d_k=64, d_embed=64))]
    fn new(arch: &str, seed: u64, d_rnn: usize, d_k: usize, d_embed: usize) -> PyResult<Self> {
        let arch = match arch {
            "dsrnn" | "ds-rnn" => Arch::DsRnn,
            "rnn-attn" | "rnn_attn" | "ablation" => Arch::RnnAttn,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown arch `{other}`; use dsrnn or rnn-attn"
                )))
            }
        };
        let config = NetConfig {
            arch,
            d_rnn,
            d_k,
            d_embed,
            ..NetConfig::default()
        };
        Ok(Policy {
            params: PolicyParams::init(&config, seed).map_err(py_err)?,
            hidden: None,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Policy {
            params: load_checkpoint(&path).map_err(py_err)?.params,
            hidden: None,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&Checkpoint::new(self.params.clone()), &path).map_err(py_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.params.count()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.params
            .tensors()
            .iter()
            .map(|t| t.name.clone())
            .collect()
    }

    fn tensor(&self, name: &str) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let t = self
            .params
            .get(name)
            .ok_or_else(|| PyValueError::new_err(format!("no tensor `{name}`")))?;
        Ok((t.shape.clone(), t.data.clone()))
    }

    /// Clears the recurrent state; call at the start of every episode.
    fn reset(&mut self) {
        self.hidden = None;
    }

    /// One forward step on the environment's current observation.
    fn forward<'py>(&mut self, py: Python<'py>, env: &Env) -> PyResult<Bound<'py, PyDict>> {
        let obs = env.inner.observation();
        let hidden = self
            .hidden
            .take()
            .unwrap_or_else(|| HiddenState::zeros(&self.params.config, obs.n_humans()));
        let (out, next) = forward(&self.params, obs, &hidden).map_err(py_err)?;
        self.hidden = Some(next);
        let d = PyDict::new(py);
        d.set_item("value", out.value)?;
        d.set_item("action_mean", out.action_mean.to_vec())?;
        d.set_item("action_log_std", out.action_log_std.to_vec())?;
        d.set_item("attention_weights", out.attention_weights)?;
        Ok(d)
    }

    /// Evaluates with mean actions on a named suite, or on the scenario of
    /// a run config when `config_toml` is given.
    #[pyo3(signature = (suite=None, n=100, seed_base=0, config_toml=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        suite: Option<&str>,
        n: usize,
        seed_base: u64,
        config_toml: Option<&str>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let suite = if config_toml.is_none() {
            Some(suite.unwrap_or("fov-360"))
        } else {
            suite
        };
        let config = scenario_from(suite, config_toml)?;
        let label = suite.unwrap_or("config");
        let mut c = LearnedController::new(self.params.clone(), "policy");
        let (r, _) = evaluate(&mut c, &config, label, n, seed_base, false).map_err(py_err)?;
        report_dict(py, &r)
    }
}

/// PPO trainer driven one update at a time.
#[pyclass(module = "crowdnav_py")]
struct Trainer {
    inner: CoreTrainer,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (config_toml=""))]
    fn new(config_toml: &str) -> PyResult<Self> {
        let c = RunConfig::from_toml(config_toml).map_err(py_err)?;
        Ok(Trainer {
            inner: CoreTrainer::new(&c.scenario, &c.network, &c.ppo, c.train.seed)
                .map_err(py_err)?,
        })
    }

    #[getter]
    fn update_idx(&self) -> u64 {
        self.inner.update_idx
    }

    #[getter]
    fn total_updates(&self) -> u64 {
        self.inner.total_updates()
    }

    fn update<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.update().map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("update_idx", m.update_idx)?;
        d.set_item("env_steps", m.env_steps)?;
        d.set_item("mean_reward", m.mean_reward)?;
        d.set_item("success_rate", m.success_rate)?;
        d.set_item("policy_loss", m.policy_loss)?;
        d.set_item("value_loss", m.value_loss)?;
        d.set_item("entropy", m.entropy)?;
        d.set_item("clip_frac", m.clip_frac)?;
        Ok(d)
    }

    fn policy(&self) -> Policy {
        Policy {
            params: self.inner.params.clone(),
            hidden: None,
        }
    }

    /// Full resumable checkpoint.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner.checkpoint().map_err(py_err)?, &path).map_err(py_err)
    }

    #[staticmethod]
    fn resume(path: PathBuf) -> PyResult<Self> {
        let ckpt = load_checkpoint(&path).map_err(py_err)?;
        Ok(Trainer {
            inner: CoreTrainer::from_checkpoint(ckpt, None).map_err(py_err)?,
        })
    }
}

/// Evaluates a model-based baseline (`orca`, `sf`, `straight`, `zero`).
#[pyfunction]
#[pyo3(signature = (name, suite="fov-360", n=100, seed_base=0))]
fn evaluate_baseline<'py>(
    py: Python<'py>,
    name: &str,
    suite: &str,
    n: usize,
    seed_base: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = eval::suite(suite).map_err(py_err)?;
    let mut c = baseline(name).map_err(py_err)?;
    let (r, _) = evaluate(c.as_mut(), &config, suite, n, seed_base, false).map_err(py_err)?;
    report_dict(py, &r)
}

/// The generated scenario for `seed` as JSON.
#[pyfunction]
#[pyo3(signature = (suite="fov-360", seed=0))]
fn scenario_json(suite: &str, seed: u64) -> PyResult<String> {
    let world = generate_scenario(&eval::suite(suite).map_err(py_err)?, seed).map_err(py_err)?;
    serde_json::to_string(&world).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn suites() -> Vec<&'static str> {
    eval::SUITES.to_vec()
}

#[pymodule]
fn crowdnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Env>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Trainer>()?;
    m.add_function(wrap_pyfunction!(evaluate_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    Ok(())
}
