//! Acting and training loops, replay, configuration and run outputs.

mod config;
mod metrics;
mod plot;
mod replay;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{Config, ProviderKind};
pub use metrics::{
    aggregate_goal_report, crafter_score, episode_stats, read_csv, CsvTable, EpisodeSummary, MetricsAccumulator,
    RunSummary, TrainStats, EPISODES_HEADER, METRICS_HEADER,
};
pub use plot::{series_from_csv, svg_line_plot, Series};
pub use replay::{to_sequence_batch, ReplayBuffer, TransitionRecord};

use crate::agent::{one_hot, Agent, AgentConfig, GoalTable, IntrinsicSpec};
use crate::diffmath::{checkpoint, Tensor};
use crate::env::{
    caption_observation, caption_transition, transition_captions, Action, MiniGrid, TraceLine, EMPTY_TRANSITION,
    OBS_DIM,
};
use crate::error::{Error, Result};
use crate::evalmetrics::{GoalAssessor, GoalQualityReport};
use crate::goalsource::{
    scripted_goal_texts, GoalContext, GoalProvider, GoalSet, GoalSource, PromptTemplate, QueryCache, RandomProvider,
    RemoteClient, RemoteProvider, ScriptedProvider,
};
use crate::reward_engine::{normalize, RndConfig, RndPair, RunningStats};
use crate::textembed::{cosine_slices, CaptionVocabulary, Embedder, SentenceEmbedding};
use crate::worldmodel::{LatentState, WorldModel, WorldModelConfig};

/// Observation not yet written to the buffer.
#[derive(Clone, Debug)]
struct Pending {
    obs: Vec<f64>,
    caption: usize,
    action: Option<usize>,
    reward: f64,
    cont: bool,
}

/// Goal provider selected by a config.
pub fn make_provider(cfg: &Config, vocab: &CaptionVocabulary) -> Result<Box<dyn GoalProvider + Send>> {
    Ok(match cfg.provider {
        ProviderKind::Scripted => Box::new(ScriptedProvider),
        ProviderKind::Random => Box::new(RandomProvider::new(vocab.clone(), cfg.seed ^ 0x5eed_0001)?),
        ProviderKind::Remote => {
            let cache = if cfg.cache_path.is_empty() {
                QueryCache::in_memory()
            } else {
                QueryCache::open(&cfg.cache_path)?
            };
            let client = RemoteClient::from_env().map(|mut c| {
                c.temperature = cfg.temperature;
                c.top_p = cfg.top_p;
                c.max_tokens = cfg.max_tokens;
                c
            });
            Box::new(RemoteProvider {
                template: PromptTemplate::gridworld(cfg.goals),
                cache,
                client,
            })
        }
    })
}

/// World model, agent, RND and replay for one environment instance.
pub struct Trainer {
    cfg: Config,
    vocab: CaptionVocabulary,
    vocab_emb: Vec<Arc<SentenceEmbedding>>,
    env: MiniGrid,
    wm: WorldModel,
    agent: Agent,
    rnd: RndPair,
    rnd_stats: RunningStats,
    goals: GoalSource,
    assessor: GoalAssessor,
    buffer: ReplayBuffer,
    act_rng: ChaCha8Rng,
    train_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    pending: Option<Pending>,
    latent: LatentState,
    current_goals: Option<Arc<GoalSet>>,
    steps: u64,
    updates: u64,
    episode_return: f64,
    episode_len: u32,
    episodes: Vec<EpisodeSummary>,
    goal_window: GoalQualityReport,
    goal_total: GoalQualityReport,
    novelty_implies_context: bool,
    trace: Option<Box<dyn Write + Send>>,
}

impl Trainer {
    pub fn new(cfg: Config) -> Result<Self> {
        let embedder = Embedder::default();
        let vocab = CaptionVocabulary::new(transition_captions(), &embedder)?;
        let provider = make_provider(&cfg, &vocab)?;
        Self::with_provider(cfg, provider)
    }

    pub fn with_provider(cfg: Config, provider: Box<dyn GoalProvider + Send>) -> Result<Self> {
        cfg.validate()?;
        let embedder = Embedder::default();
        let vocab = CaptionVocabulary::new(transition_captions(), &embedder)?;
        let vocab_emb = (0..vocab.len()).map(|i| Arc::new(vocab.embedding(i).clone())).collect();
        let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut init_rng = ChaCha8Rng::seed_from_u64(master.gen());
        let mut wcfg = WorldModelConfig::new(OBS_DIM, embedder.dim(), vocab.len(), Action::COUNT);
        wcfg.groups = cfg.groups;
        wcfg.classes = cfg.classes;
        wcfg.deter = cfg.deter;
        wcfg.hidden = cfg.hidden;
        wcfg.lr = cfg.wm_lr;
        wcfg.clip = cfg.clip;
        let wm = WorldModel::new(wcfg.clone(), &mut init_rng);
        let acfg = AgentConfig {
            gamma: cfg.gamma,
            lambda: cfg.lambda,
            eta: cfg.eta,
            normalizer_decay: cfg.normalizer_decay,
            hidden: cfg.hidden,
            layers: 2,
            actor_lr: cfg.actor_lr,
            critic_lr: cfg.critic_lr,
            clip: cfg.clip,
            horizon: cfg.horizon,
        };
        let agent = Agent::new(acfg, wcfg.feature_dim(), Action::COUNT, &mut init_rng);
        let rcfg = RndConfig {
            hidden: cfg.rnd_hidden,
            layers: 2,
            out_dim: cfg.rnd_out,
            lr: cfg.rnd_lr,
        };
        let rnd = RndPair::new(embedder.dim(), &rcfg, &mut init_rng);
        let mut goals = GoalSource::new(provider, cfg.goals, cfg.query_interval, embedder.clone());
        if cfg.provider == ProviderKind::Remote && cfg.remote_fallback {
            goals = goals.with_fallback(Box::new(ScriptedProvider));
        }
        Ok(Self {
            assessor: GoalAssessor::new(embedder, cfg.map_threshold)?,
            env: MiniGrid::new(cfg.grid_size, cfg.episode_limit),
            latent: LatentState::zeros(1, &wcfg),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            act_rng: ChaCha8Rng::seed_from_u64(master.gen()),
            train_rng: ChaCha8Rng::seed_from_u64(master.gen()),
            env_rng: ChaCha8Rng::seed_from_u64(master.gen()),
            vocab,
            vocab_emb,
            wm,
            agent,
            rnd,
            rnd_stats: RunningStats::new(),
            goals,
            pending: None,
            current_goals: None,
            steps: 0,
            updates: 0,
            episode_return: 0.0,
            episode_len: 0,
            episodes: Vec::new(),
            goal_window: GoalQualityReport::default(),
            goal_total: GoalQualityReport::default(),
            novelty_implies_context: true,
            trace: None,
            cfg,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn world_model(&self) -> &WorldModel {
        &self.wm
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn rnd(&self) -> &RndPair {
        &self.rnd
    }

    pub fn rnd_stats(&self) -> &RunningStats {
        &self.rnd_stats
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn vocabulary(&self) -> &CaptionVocabulary {
        &self.vocab
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn episodes(&self) -> &[EpisodeSummary] {
        &self.episodes
    }

    pub fn provider_invocations(&self) -> u64 {
        self.goals.invocations()
    }

    /// Goal-quality tally over every goal set received so far.
    pub fn goal_report(&self) -> &GoalQualityReport {
        &self.goal_total
    }

    /// Writes one JSON line per environment step to `w`.
    pub fn set_trace(&mut self, w: Box<dyn Write + Send>) {
        self.trace = Some(w);
    }

    fn reset_env(&mut self) {
        let out = self.env.reset(self.env_rng.gen());
        self.pending = Some(Pending {
            obs: out.observation,
            caption: self.caption_index(EMPTY_TRANSITION),
            action: None,
            reward: 0.0,
            cont: true,
        });
    }

    fn caption_index(&self, caption: &str) -> usize {
        self.vocab.index_of(caption).expect("captioner output is in the vocabulary")
    }

    /// Records the pending observation with its goals, filters the latent
    /// state and, unless the episode just ended, takes one action.
    pub fn act_step(&mut self) -> Result<()> {
        if self.pending.is_none() {
            self.reset_env();
        }
        let p = self.pending.take().expect("set above");
        let summary = self.env.state().summary();
        let obs_caption = caption_observation(self.env.state());
        let before = self.goals.invocations();
        let ctx = GoalContext {
            summary: &summary,
            obs_caption: &obs_caption,
            step: self.steps,
        };
        self.goals.goals_for(&ctx)?;
        if self.goals.invocations() != before || self.current_goals.is_none() {
            let set = Arc::new(self.goals.current().expect("just queried").clone());
            let oracle = scripted_goal_texts(&summary, self.cfg.goals);
            let mut window = GoalQualityReport::default();
            for g in set.texts() {
                let a = self.assessor.assess(g, &summary, &oracle);
                self.novelty_implies_context &= !a.novel || a.context;
                window.add(a);
            }
            self.goal_window.merge(&window);
            self.goal_total.merge(&window);
            self.current_goals = Some(set);
        }

        let caption_emb = self.vocab_emb[p.caption].clone();
        if p.action.is_none() {
            self.latent = LatentState::zeros(1, self.wm.config());
        }
        let prev = match p.action {
            Some(a) => one_hot(&[a], Action::COUNT),
            None => Tensor::zeros(&[1, Action::COUNT]),
        };
        let x = Tensor::matrix(1, p.obs.len(), p.obs.clone());
        let u = Tensor::matrix(1, caption_emb.dim(), caption_emb.vector().to_vec());
        self.latent = self.wm.observe(&self.latent, &prev, &x, &u, &mut self.act_rng)?;

        self.buffer.push(TransitionRecord {
            obs: p.obs,
            caption: self.vocab.caption(p.caption).to_string(),
            caption_emb,
            caption_index: p.caption,
            action: p.action,
            reward: p.reward,
            cont: p.cont,
            goals: self.current_goals.clone().expect("set above"),
        });
        self.steps += 1;
        self.episode_return += p.reward;

        if !p.cont {
            self.episodes.push(EpisodeSummary {
                end_step: self.steps,
                length: self.episode_len,
                ret: self.episode_return,
                achievements: self.env.state().achievements,
            });
            self.episode_return = 0.0;
            self.episode_len = 0;
            return Ok(());
        }
        let a = self.agent.act(&self.latent.features(), std::slice::from_mut(&mut self.act_rng))?[0];
        let action = Action::from_index(a).ok_or_else(|| Error::UnknownAction(a.to_string()))?;
        let out = self.env.step(action)?;
        if let Some(w) = self.trace.as_mut() {
            crate::env::write_trace_line(
                w,
                &TraceLine {
                    step: self.env.state().step_count,
                    action,
                    event: &out.event,
                    r: out.reward,
                    c: out.cont,
                },
            )?;
        }
        self.episode_len += 1;
        self.pending = Some(Pending {
            obs: out.observation,
            caption: self.caption_index(caption_transition(&out.event)),
            action: Some(a),
            reward: out.reward,
            cont: out.cont,
        });
        Ok(())
    }

    /// `n` acting steps; each appends exactly one record.
    pub fn act_loop(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.act_step()?;
        }
        Ok(())
    }

    /// One update: batch, goal novelty, world model, imagination, actor,
    /// critic.
    pub fn train_step(&mut self) -> Result<TrainStats> {
        let (b, l) = (self.cfg.batch_size, self.cfg.batch_length);
        if self.buffer.len() < b * l {
            return Err(Error::NotEnoughData {
                have: self.buffer.len(),
                need: b * l,
            });
        }
        let windows = self.buffer.sample_batch(b, l, &mut self.train_rng)?;
        let batch = to_sequence_batch(&windows, Action::COUNT)?;

        // goal sets by position (rows `t * b + i`) and distinct goal texts
        let mut sets: Vec<Arc<GoalSet>> = Vec::new();
        let mut set_of_row = vec![0usize; b * l];
        for t in 0..l {
            for (i, w) in windows.iter().enumerate() {
                let g = &w[t].goals;
                let idx = match sets.iter().rposition(|s| Arc::ptr_eq(s, g)) {
                    Some(k) => k,
                    None => {
                        sets.push(g.clone());
                        sets.len() - 1
                    }
                };
                set_of_row[t * b + i] = idx;
            }
        }
        drop(windows);
        let mut occurrences: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        let mut goal_rows: Vec<&[f64]> = Vec::new();
        for &s in &set_of_row {
            for g in sets[s].goals() {
                let next = goal_rows.len();
                let e = occurrences.entry(g.text.as_str()).or_insert((next, 0.0));
                if e.0 == next {
                    goal_rows.push(g.embedding.vector());
                }
                e.1 += 1.0;
            }
        }
        let mut weights = vec![0.0; goal_rows.len()];
        for &(j, c) in occurrences.values() {
            weights[j] = c;
        }
        let errors = if self.cfg.no_rnd_decay {
            self.rnd.errors(&goal_rows)?
        } else {
            self.rnd.update_weighted(&goal_rows, &weights)?
        };
        let total_w: f64 = weights.iter().sum();
        let rnd_error = errors.iter().zip(&weights).map(|(e, w)| e * w).sum::<f64>() / total_w;
        self.rnd_stats.push(rnd_error);
        let magnitudes = normalize(&errors, &self.rnd_stats, self.cfg.clamp_intrinsic);
        let rnd_magnitude = magnitudes.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>() / total_w;
        let magnitude_of: BTreeMap<&str, f64> = occurrences
            .iter()
            .map(|(&text, &(j, _))| (text, magnitudes[j]))
            .collect();

        let (wm_loss, posterior) = self.wm.train(&batch, &mut self.train_rng)?;

        let n = b * l;
        let starts: Vec<usize> = if self.cfg.imagine_starts == 0 || self.cfg.imagine_starts >= n {
            (0..n).collect()
        } else {
            let mut v = rand::seq::index::sample(&mut self.train_rng, n, self.cfg.imagine_starts).into_vec();
            v.sort_unstable();
            v
        };
        let mut table_of_set: BTreeMap<usize, usize> = BTreeMap::new();
        let mut tables = Vec::new();
        let mut table_of_start = Vec::with_capacity(starts.len());
        for &r in &starts {
            let s = set_of_row[r];
            let next = tables.len();
            let ti = *table_of_set.entry(s).or_insert(next);
            if ti == next {
                let goals = sets[s].goals();
                let cosines = self
                    .vocab_emb
                    .iter()
                    .map(|v| goals.iter().map(|g| cosine_slices(v.vector(), g.embedding.vector())).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                tables.push(GoalTable {
                    cosines,
                    magnitudes: goals.iter().map(|g| magnitude_of[g.text.as_str()]).collect(),
                });
            }
            table_of_start.push(ti);
        }
        let start_state = posterior.select(&starts);
        let mut rngs: Vec<ChaCha8Rng> = starts
            .iter()
            .map(|_| ChaCha8Rng::seed_from_u64(self.train_rng.gen()))
            .collect();
        let mut rollout = self.agent.imagine(&self.wm, &start_state, self.cfg.horizon, &mut rngs)?;
        rollout.assign_intrinsic(
            &tables,
            &table_of_start,
            IntrinsicSpec {
                alpha: self.cfg.alpha,
                threshold: self.cfg.threshold,
                allow_repetition: self.cfg.allow_repetition,
            },
        )?;
        let agent = self.agent.train(&rollout)?;
        self.updates += 1;
        Ok(TrainStats {
            wm: wm_loss,
            agent,
            rnd_error,
            rnd_magnitude,
        })
    }

    /// Parameter entries of every network, names unique across networks.
    pub fn checkpoint_entries(&self) -> Vec<(String, &Tensor)> {
        let mut e = checkpoint::entries("", self.wm.params());
        e.extend(checkpoint::entries("", self.agent.actor_params()));
        e.extend(checkpoint::entries("", self.agent.critic_params()));
        e.extend(checkpoint::entries("", self.rnd.target_params()));
        e.extend(checkpoint::entries("", self.rnd.predictor_params()));
        e
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        checkpoint::write_checkpoint(&mut w, &self.checkpoint_entries())?;
        w.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let loaded = checkpoint::read_checkpoint(&mut std::io::BufReader::new(File::open(path)?))?;
        checkpoint::restore("", self.wm.params_mut(), &loaded)?;
        checkpoint::restore("", self.agent.actor_params_mut(), &loaded)?;
        checkpoint::restore("", self.agent.critic_params_mut(), &loaded)?;
        checkpoint::restore("", self.rnd.target_params_mut(), &loaded)?;
        checkpoint::restore("", self.rnd.predictor_params_mut(), &loaded)?;
        Ok(())
    }

    /// Interleaves acting and training for `total_steps`, writing the run
    /// files into `out` when given.
    pub fn run(&mut self, out: Option<&Path>) -> Result<RunSummary> {
        let mut files = out.map(RunFiles::create).transpose()?;
        if let Some(f) = files.as_mut() {
            fs::write(f.dir.join("config.txt"), self.cfg.to_text())?;
        }
        let (b, l) = (self.cfg.batch_size, self.cfg.batch_length);
        let ready_at = self.cfg.train_start.max((b * l) as u64);
        let per_step = self.cfg.train_ratio / (b * l) as f64;
        let mut credit = 0.0;
        let mut acc = MetricsAccumulator::default();
        let started = Instant::now();
        while self.steps < self.cfg.total_steps {
            let episodes_before = self.episodes.len();
            self.act_step()?;
            if self.episodes.len() > episodes_before {
                let e = *self.episodes.last().expect("pushed");
                acc.add_episode(e);
                if let Some(f) = files.as_mut() {
                    writeln!(f.episodes, "{}", e.csv_row())?;
                }
            }
            if self.steps >= ready_at {
                credit += per_step;
                while credit >= 1.0 {
                    let stats = self.train_step()?;
                    acc.add_train(&stats);
                    credit -= 1.0;
                }
            }
            if self.steps % self.cfg.log_interval == 0 || self.steps == self.cfg.total_steps {
                let row = acc.row(self.steps, self.updates, self.episodes.len(), &self.goal_window);
                if let Some(f) = files.as_mut() {
                    writeln!(f.metrics, "{row}")?;
                    self.goal_window.step = self.steps;
                    writeln!(f.goals, "{}", self.goal_window.csv_row())?;
                    writeln!(f.timing, "{},{:.3}", self.steps, started.elapsed().as_secs_f64())?;
                    f.flush()?;
                }
                self.goal_window = GoalQualityReport::default();
            }
            if let Some(f) = files.as_ref() {
                if self.cfg.checkpoint_interval > 0 && self.steps % self.cfg.checkpoint_interval == 0 {
                    self.save_checkpoint(f.dir.join("checkpoint.bin"))?;
                }
            }
        }
        let summary = self.summary();
        if let Some(mut f) = files {
            f.flush()?;
            self.save_checkpoint(f.dir.join("checkpoint.bin"))?;
            fs::write(f.dir.join("summary.json"), summary.to_json())?;
        }
        Ok(summary)
    }

    pub fn summary(&self) -> RunSummary {
        let cutoff = self.steps as f64 * (1.0 - self.cfg.final_fraction);
        let mut last: Vec<EpisodeSummary> =
            self.episodes.iter().filter(|e| e.end_step as f64 > cutoff).copied().collect();
        if last.is_empty() {
            last.extend(self.episodes.last().copied());
        }
        let (ach, ret, rates) = episode_stats(&last);
        let g = &self.goal_total;
        RunSummary {
            steps: self.steps,
            updates: self.updates,
            episodes: self.episodes.len(),
            final_episodes: last.len(),
            final_mean_achievements: ach,
            final_mean_return: ret,
            final_score: crafter_score(&rates),
            final_success_rates: rates,
            goal_correctness_rate: g.correctness_rate(),
            goal_novelty_rate: g.novelty_rate(),
            goal_context_rate: g.context_rate(),
            goal_common_sense_rate: g.common_sense_rate(),
            novelty_implies_context: self.novelty_implies_context,
            provider_invocations: self.goals.invocations(),
        }
    }

    /// Runs `episodes` fresh episodes with the current policy, leaving the
    /// training state untouched.
    pub fn evaluate(&self, episodes: usize, seed: u64, mut trace: Option<&mut dyn Write>) -> Result<Vec<EpisodeSummary>> {
        let mut env = MiniGrid::new(self.cfg.grid_size, self.cfg.episode_limit);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(episodes);
        let mut step = 0u64;
        for _ in 0..episodes {
            let reset = env.reset(rng.gen());
            let mut latent = LatentState::zeros(1, self.wm.config());
            let mut obs = reset.observation;
            let mut caption = self.caption_index(EMPTY_TRANSITION);
            let mut prev = Tensor::zeros(&[1, Action::COUNT]);
            let (mut ret, mut len) = (0.0, 0u32);
            loop {
                let u = &self.vocab_emb[caption];
                let x = Tensor::matrix(1, obs.len(), obs);
                let ut = Tensor::matrix(1, u.dim(), u.vector().to_vec());
                latent = self.wm.observe(&latent, &prev, &x, &ut, &mut rng)?;
                let a = self.agent.act(&latent.features(), std::slice::from_mut(&mut rng))?[0];
                let action = Action::from_index(a).ok_or_else(|| Error::UnknownAction(a.to_string()))?;
                let s = env.step(action)?;
                step += 1;
                len += 1;
                ret += s.reward;
                if let Some(w) = trace.as_mut() {
                    crate::env::write_trace_line(
                        w,
                        &TraceLine {
                            step: env.state().step_count,
                            action,
                            event: &s.event,
                            r: s.reward,
                            c: s.cont,
                        },
                    )?;
                }
                if !s.cont {
                    break;
                }
                obs = s.observation;
                caption = self.caption_index(caption_transition(&s.event));
                prev = one_hot(&[a], Action::COUNT);
            }
            out.push(EpisodeSummary {
                end_step: step,
                length: len,
                ret,
                achievements: env.state().achievements,
            });
        }
        Ok(out)
    }
}

struct RunFiles {
    dir: PathBuf,
    metrics: BufWriter<File>,
    goals: BufWriter<File>,
    episodes: BufWriter<File>,
    timing: BufWriter<File>,
}

impl RunFiles {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            writeln!(w, "{header}")?;
            Ok(w)
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics: open("metrics.csv", &METRICS_HEADER.join(","))?,
            goals: open("goal_quality.csv", GoalQualityReport::CSV_HEADER)?,
            episodes: open("episodes.csv", EPISODES_HEADER)?,
            timing: open("timing.csv", "step,seconds")?,
        })
    }

    fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        self.goals.flush()?;
        self.episodes.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

/// Reads `config.txt` next to a checkpoint and restores the networks.
pub fn load_run(checkpoint_path: &Path) -> Result<Trainer> {
    let dir = checkpoint_path.parent().unwrap_or(Path::new("."));
    let cfg_path = dir.join("config.txt");
    let mut cfg = if cfg_path.exists() {
        Config::from_file(&cfg_path)?
    } else {
        Config::default()
    };
    // evaluation never queries goals
    cfg.provider = ProviderKind::Scripted;
    let mut t = Trainer::new(cfg)?;
    t.load_checkpoint(checkpoint_path)?;
    Ok(t)
}
