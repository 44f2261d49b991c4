//! Python bindings for the gridworld, reward engine, goal metrics and
//! trainer.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dllm_core::agent::lambda_returns as core_lambda_returns;
use dllm_core::env::{self, Achievement, Action};
use dllm_core::evalmetrics::{GoalAssessor, MAP_THRESHOLD};
use dllm_core::goalsource::scripted_goal_texts;
use dllm_core::reward_engine::{intrinsic_from_cosines, normalize, RndConfig, RndPair, RunningStats};
use dllm_core::textembed;
use dllm_core::trainer::{self, Config};
use dllm_core::worldmodel::TwoHotSpec;

fn err(e: dllm_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Unit-norm hashing sentence embedding of `text`.
#[pyfunction]
fn embed(text: &str) -> PyResult<Vec<f64>> {
    Ok(textembed::embed(text).map_err(err)?.vector().to_vec())
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    textembed::cosine_slices(&a, &b).map_err(err)
}

/// Per-step intrinsic rewards of one rollout from a `T x K` cosine table.
#[pyfunction]
#[pyo3(signature = (cosines, magnitudes, alpha=1.0, threshold=0.5, allow_repetition=false))]
fn intrinsic_rewards(
    cosines: Vec<Vec<f64>>,
    magnitudes: Vec<f64>,
    alpha: f64,
    threshold: f64,
    allow_repetition: bool,
) -> PyResult<Vec<f64>> {
    intrinsic_from_cosines(&cosines, &magnitudes, alpha, threshold, allow_repetition).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rewards, cont, values, lam=0.95, gamma=0.997))]
fn lambda_returns(rewards: Vec<f64>, cont: Vec<f64>, values: Vec<f64>, lam: f64, gamma: f64) -> PyResult<Vec<f64>> {
    core_lambda_returns(&rewards, &cont, &values, lam, gamma).map_err(err)
}

/// Two-hot encoding over exponentially spaced bins.
#[pyclass(name = "TwoHot", frozen)]
struct PyTwoHot(TwoHotSpec);

#[pymethods]
impl PyTwoHot {
    #[new]
    fn new() -> Self {
        Self(TwoHotSpec::default())
    }

    fn centers(&self) -> Vec<f64> {
        self.0.centers().to_vec()
    }

    fn encode(&self, value: f64) -> PyResult<Vec<f64>> {
        self.0.encode(value).map_err(err)
    }

    fn decode(&self, probs: Vec<f64>) -> PyResult<f64> {
        self.0.decode(&probs).map_err(err)
    }
}

/// RND novelty of goal texts with running standardization.
#[pyclass(name = "Novelty", unsendable)]
struct PyNovelty {
    pair: RndPair,
    stats: RunningStats,
}

#[pymethods]
impl PyNovelty {
    #[new]
    #[pyo3(signature = (seed=0, lr=3e-4))]
    fn new(seed: u64, lr: f64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cfg = RndConfig {
            lr,
            ..RndConfig::default()
        };
        Self {
            pair: RndPair::new(textembed::DEFAULT_DIM, &cfg, &mut rng),
            stats: RunningStats::new(),
        }
    }

    /// Prediction errors of the goals.
    fn errors(&self, goals: Vec<String>) -> PyResult<Vec<f64>> {
        let embs = embed_all(&goals)?;
        let rows: Vec<&[f64]> = embs.iter().map(|e| e.vector()).collect();
        self.pair.errors(&rows).map_err(err)
    }

    /// One predictor step; returns standardized magnitudes of the
    /// pre-step errors.
    fn update(&mut self, goals: Vec<String>) -> PyResult<Vec<f64>> {
        let embs = embed_all(&goals)?;
        let errors = dllm_core::reward_engine::rnd_update(&embs, &mut self.pair, &mut self.stats).map_err(err)?;
        Ok(normalize(&errors, &self.stats, false))
    }
}

fn embed_all(goals: &[String]) -> PyResult<Vec<textembed::SentenceEmbedding>> {
    goals.iter().map(|g| textembed::embed(g).map_err(err)).collect()
}

/// The achievement gridworld.
#[pyclass(name = "MiniGrid", unsendable)]
struct PyMiniGrid {
    env: env::MiniGrid,
    assessor: GoalAssessor,
}

#[pymethods]
impl PyMiniGrid {
    #[new]
    #[pyo3(signature = (size=env::GRID_SIZE, episode_limit=env::EPISODE_LIMIT))]
    fn new(size: usize, episode_limit: u32) -> PyResult<Self> {
        Ok(Self {
            env: env::MiniGrid::new(size, episode_limit),
            assessor: GoalAssessor::new(textembed::Embedder::default(), MAP_THRESHOLD).map_err(err)?,
        })
    }

    #[classattr]
    fn actions() -> Vec<&'static str> {
        Action::ALL.iter().map(|a| a.name()).collect()
    }

    /// Returns `(observation, observation_caption)`.
    fn reset(&mut self, seed: u64) -> (Vec<f64>, String) {
        let out = self.env.reset(seed);
        (out.observation, out.observation_caption)
    }

    /// Takes an action by name or index; returns
    /// `(observation, reward, cont, transition_caption)`.
    fn step(&mut self, action: &Bound<'_, PyAny>) -> PyResult<(Vec<f64>, f64, bool, String)> {
        let a = if let Ok(i) = action.extract::<usize>() {
            Action::from_index(i).ok_or_else(|| PyValueError::new_err(format!("no action {i}")))?
        } else {
            Action::parse(&action.extract::<String>()?).map_err(err)?
        };
        let out = self.env.step(a).map_err(err)?;
        let caption = env::caption_transition(&out.event).to_string();
        Ok((out.observation, out.reward, out.cont, caption))
    }

    fn observation_caption(&self) -> String {
        env::caption_observation(self.env.state())
    }

    fn achievements(&self) -> Vec<&'static str> {
        self.env.state().achievements.iter().map(Achievement::name).collect()
    }

    #[pyo3(signature = (k=5))]
    fn scripted_goals(&self, k: usize) -> Vec<String> {
        scripted_goal_texts(&self.env.state().summary(), k)
    }

    /// `{"novelty", "context", "common_sense", "correct"}` for `goal` in
    /// the current state, against the scripted goals.
    fn assess_goal(&self, goal: &str) -> std::collections::BTreeMap<&'static str, bool> {
        let s = self.env.state().summary();
        let a = self.assessor.assess(goal, &s, &scripted_goal_texts(&s, 5));
        [
            ("novelty", a.novel),
            ("context", a.context),
            ("common_sense", a.common_sense),
            ("correct", a.correct),
        ]
        .into_iter()
        .collect()
    }
}

/// Acting and training loop built from a `key = value` config.
#[pyclass(name = "Trainer", unsendable)]
struct PyTrainer(trainer::Trainer);

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (config=""))]
    fn new(config: &str) -> PyResult<Self> {
        let cfg = Config::parse(config).map_err(err)?;
        Ok(Self(trainer::Trainer::new(cfg).map_err(err)?))
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.0.steps()
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.0.updates()
    }

    fn config_text(&self) -> String {
        self.0.config().to_text()
    }

    /// Takes `n` acting steps.
    fn act(&mut self, n: u64) -> PyResult<()> {
        self.0.act_loop(n).map_err(err)
    }

    /// One update; returns the main losses.
    fn train_step(&mut self) -> PyResult<std::collections::BTreeMap<&'static str, f64>> {
        let s = self.0.train_step().map_err(err)?;
        Ok([
            ("wm_total", s.wm.total),
            ("wm_pred", s.wm.pred),
            ("wm_reg", s.wm.reg),
            ("actor_loss", s.agent.actor_loss),
            ("critic_loss", s.agent.critic_loss),
            ("entropy", s.agent.entropy),
            ("mean_intrinsic", s.agent.mean_intrinsic),
            ("rnd_error", s.rnd_error),
        ]
        .into_iter()
        .collect())
    }

    /// Runs to `total_steps`, writing run files into `out` if given;
    /// returns the summary as JSON.
    #[pyo3(signature = (out=None))]
    fn run(&mut self, out: Option<String>) -> PyResult<String> {
        let summary = self.0.run(out.as_deref().map(Path::new)).map_err(err)?;
        Ok(summary.to_json())
    }

    /// Achievements unlocked in each of `episodes` evaluation episodes.
    #[pyo3(signature = (episodes=5, seed=0))]
    fn evaluate(&self, episodes: usize, seed: u64) -> PyResult<Vec<usize>> {
        let eps = self.0.evaluate(episodes, seed, None).map_err(err)?;
        Ok(eps.iter().map(|e| e.achievements.count()).collect())
    }

    fn save_checkpoint(&self, path: &str) -> PyResult<()> {
        self.0.save_checkpoint(path).map_err(err)
    }

    fn load_checkpoint(&mut self, path: &str) -> PyResult<()> {
        self.0.load_checkpoint(path).map_err(err)
    }
}

#[pymodule]
fn dllm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(intrinsic_rewards, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_returns, m)?)?;
    m.add_class::<PyTwoHot>()?;
    m.add_class::<PyNovelty>()?;
    m.add_class::<PyMiniGrid>()?;
    m.add_class::<PyTrainer>()?;
    Ok(())
}
