use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Where goals come from while acting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProviderKind {
    Scripted,
    Random,
    Remote,
}

impl ProviderKind {
    pub fn name(self) -> &'static str {
        match self {
            ProviderKind::Scripted => "scripted",
            ProviderKind::Random => "random",
            ProviderKind::Remote => "remote",
        }
    }
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(ProviderKind::Scripted),
            "random" => Ok(ProviderKind::Random),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(Error::Config(format!("unknown provider `{other}`"))),
        }
    }
}

/// Run configuration. Read from flat `key = value` files; every key has a
/// default.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub total_steps: u64,
    /// Imagination horizon `T`.
    pub horizon: usize,
    /// Similarity threshold `M`.
    pub threshold: f64,
    pub alpha: f64,
    /// Goals per query `K`.
    pub goals: usize,
    pub batch_size: usize,
    pub batch_length: usize,
    pub query_interval: u64,
    pub rnd_lr: f64,
    pub rnd_hidden: usize,
    pub rnd_out: usize,
    /// Replayed steps per environment step.
    pub train_ratio: f64,
    /// Steps collected before the first update, at least one batch.
    pub train_start: u64,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub normalizer_decay: f64,
    pub groups: usize,
    pub classes: usize,
    pub deter: usize,
    pub hidden: usize,
    pub wm_lr: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip: f64,
    pub buffer_capacity: usize,
    pub grid_size: usize,
    pub episode_limit: u32,
    pub map_threshold: f64,
    /// Imagination start states per update, `0` for every batch position.
    pub imagine_starts: usize,
    pub log_interval: u64,
    pub checkpoint_interval: u64,
    pub provider: ProviderKind,
    /// Scripted goals when the remote service cannot be reached.
    pub remote_fallback: bool,
    pub cache_path: String,
    pub no_rnd_decay: bool,
    pub allow_repetition: bool,
    /// Cut negative standardized novelty magnitudes at zero.
    pub clamp_intrinsic: bool,
    /// Fraction of the run, counted from the end, used for the final score.
    pub final_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 200_000,
            horizon: 15,
            threshold: 0.5,
            alpha: 1.0,
            goals: 5,
            batch_size: 16,
            batch_length: 64,
            query_interval: 10,
            rnd_lr: 3e-4,
            rnd_hidden: 64,
            rnd_out: 32,
            train_ratio: 16.0,
            train_start: 1024,
            temperature: 0.5,
            top_p: 1.0,
            max_tokens: 500,
            gamma: 0.997,
            lambda: 0.95,
            eta: 3e-4,
            normalizer_decay: 0.99,
            groups: 8,
            classes: 8,
            deter: 256,
            hidden: 256,
            wm_lr: 3e-4,
            actor_lr: 3e-5,
            critic_lr: 3e-5,
            clip: 100.0,
            buffer_capacity: 100_000,
            grid_size: crate::env::GRID_SIZE,
            episode_limit: crate::env::EPISODE_LIMIT,
            map_threshold: crate::evalmetrics::MAP_THRESHOLD,
            imagine_starts: 0,
            log_interval: 1000,
            checkpoint_interval: 50_000,
            provider: ProviderKind::Scripted,
            remote_fallback: false,
            cache_path: String::new(),
            no_rnd_decay: false,
            allow_repetition: false,
            clamp_intrinsic: false,
            final_fraction: 0.1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{value}` for `{key}`"))),
    }
}

macro_rules! config_keys {
    ($($key:literal => $field:ident : $kind:ident),* $(,)?) => {
        impl Config {
            /// Every recognized key, in file order.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            /// Sets one field from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => self.$field = config_keys!(@parse $kind, key, value)?,)*
                    _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            /// The configuration as a file [`Config::parse`] reads back.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(let _ = writeln!(s, "{} = {}", $key, config_keys!(@show $kind, self.$field));)*
                s
            }
        }
    };
    (@parse bool, $key:ident, $value:ident) => { parse_bool($key, $value) };
    (@parse provider, $key:ident, $value:ident) => { $value.parse::<ProviderKind>() };
    (@parse string, $key:ident, $value:ident) => { Ok::<String, Error>($value.to_string()) };
    (@parse num, $key:ident, $value:ident) => { parse($key, $value) };
    (@show provider, $v:expr) => { $v.name() };
    (@show $other:ident, $v:expr) => { &$v };
}

config_keys! {
    "seed" => seed: num,
    "total_steps" => total_steps: num,
    "horizon" => horizon: num,
    "threshold" => threshold: num,
    "alpha" => alpha: num,
    "goals" => goals: num,
    "batch_size" => batch_size: num,
    "batch_length" => batch_length: num,
    "query_interval" => query_interval: num,
    "rnd_lr" => rnd_lr: num,
    "rnd_hidden" => rnd_hidden: num,
    "rnd_out" => rnd_out: num,
    "train_ratio" => train_ratio: num,
    "train_start" => train_start: num,
    "temperature" => temperature: num,
    "top_p" => top_p: num,
    "max_tokens" => max_tokens: num,
    "gamma" => gamma: num,
    "lambda" => lambda: num,
    "eta" => eta: num,
    "normalizer_decay" => normalizer_decay: num,
    "groups" => groups: num,
    "classes" => classes: num,
    "deter" => deter: num,
    "hidden" => hidden: num,
    "wm_lr" => wm_lr: num,
    "actor_lr" => actor_lr: num,
    "critic_lr" => critic_lr: num,
    "clip" => clip: num,
    "buffer_capacity" => buffer_capacity: num,
    "grid_size" => grid_size: num,
    "episode_limit" => episode_limit: num,
    "map_threshold" => map_threshold: num,
    "imagine_starts" => imagine_starts: num,
    "log_interval" => log_interval: num,
    "checkpoint_interval" => checkpoint_interval: num,
    "provider" => provider: provider,
    "remote_fallback" => remote_fallback: bool,
    "cache_path" => cache_path: string,
    "no_rnd_decay" => no_rnd_decay: bool,
    "allow_repetition" => allow_repetition: bool,
    "clamp_intrinsic" => clamp_intrinsic: bool,
    "final_fraction" => final_fraction: num,
}

impl Config {
    /// Defaults overridden by the `key = value` lines of `text`. Blank lines
    /// and everything after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("goals", self.goals),
            ("batch_size", self.batch_size),
            ("batch_length", self.batch_length),
            ("groups", self.groups),
            ("classes", self.classes),
            ("deter", self.deter),
            ("hidden", self.hidden),
            ("buffer_capacity", self.buffer_capacity),
            ("grid_size", self.grid_size),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if self.query_interval == 0 || self.log_interval == 0 {
            return Err(Error::Config("intervals must be positive".into()));
        }
        if self.train_ratio < 0.0 || !(0.0..=1.0).contains(&self.final_fraction) {
            return Err(Error::Config("train_ratio or final_fraction out of range".into()));
        }
        if self.buffer_capacity < self.batch_length {
            return Err(Error::Config("buffer_capacity smaller than batch_length".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let c = Config::default();
        assert_eq!(c.horizon, 15);
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.goals, 5);
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.batch_length, 64);
        assert_eq!(c.rnd_lr, 3e-4);
        assert_eq!(c.temperature, 0.5);
        assert_eq!(c.top_p, 1.0);
        assert_eq!(c.max_tokens, 500);
        assert_eq!(c.query_interval, 10);
        assert_eq!(c.train_ratio, 16.0);
        assert_eq!(c.total_steps, 200_000);
        assert_eq!(c.buffer_capacity, 100_000);
        assert_eq!(c.map_threshold, 0.8);
        assert!(!c.no_rnd_decay && !c.allow_repetition);
        assert_eq!(c.provider, ProviderKind::Scripted);
    }

    #[test]
    fn parse_comments_and_overrides() {
        let c = Config::parse("# desk run\nseed = 7\n\nalpha=2.5 # stronger\nprovider = random\nno_rnd_decay = true\n")
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.alpha, 2.5);
        assert_eq!(c.provider, ProviderKind::Random);
        assert!(c.no_rnd_decay);
        assert_eq!(c.horizon, 15);
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.seed = 3;
        c.cache_path = "/tmp/cache.jsonl".into();
        c.provider = ProviderKind::Remote;
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.to_text().lines().count(), Config::KEYS.len());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("nope = 1"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("seed = x"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("seed"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("batch_size = 0"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("provider = gpt"), Err(Error::Config(_))));
    }
}
