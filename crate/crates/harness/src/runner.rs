//! Runs every (variant, world) cell of a config on a bounded worker pool and
//! writes one JSONL trace per episode.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::{fs, thread};

use stateact_core::adapt::{run_adapt, AdaptOptions};
use stateact_core::agent::summarize;
use stateact_core::assets;
use stateact_core::household::{HouseholdEnv, TaskKind, WorldError, WorldSpec};
use stateact_core::textcraft::{CraftTask, RecipeBook, TextcraftEnv};
use stateact_core::{
    run_episode, AgentVariant, EpisodeOptions, Environment, ModelBackend, OracleBackend, SharedEnv, Termination,
};

use crate::config::{BackendConfig, ConfigError, EnvKind, RunConfig};
use crate::http::{HttpBackend, HttpSetupError};
use crate::persist::{EpisodeFile, Header, NodeLine, ResultLine, StepLine};
use crate::replay::{RecordingBackend, ReplayBackend, ReplayStore, StoreError};
use crate::report::{report_dir, write_report, ReportError, ReportOutput};
use crate::worldfile::{load_household_dir, load_textcraft_dir, WorldFileError};
use crate::SharedBackend;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldFileError),
    #[error("bundled or configured world is invalid: {0}")]
    InvalidWorld(#[from] WorldError),
    #[error("recipe book {path}: {reason}")]
    Book { path: PathBuf, reason: String },
    #[error(transparent)]
    Http(#[from] HttpSetupError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output already holds {0}; choose a fresh output directory")]
    WouldOverwrite(PathBuf),
    #[error("few-shot prompt cannot be loaded: {0}")]
    Prompt(String),
    #[error("no planner prompt exists for the {0} environment")]
    NoPlanner(String),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// One task of the configured environment.
#[derive(Debug, Clone)]
pub enum World {
    Household(WorldSpec),
    Textcraft(CraftTask),
}

impl World {
    pub fn id(&self) -> &str {
        match self {
            World::Household(w) => &w.id,
            World::Textcraft(t) => &t.id,
        }
    }
}

/// What `run` leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub episode_files: Vec<PathBuf>,
    pub backend_errors: usize,
    pub report: ReportOutput,
}

impl RunOutcome {
    /// Every episode ended on a backend error.
    pub fn total_failure(&self) -> bool {
        !self.episode_files.is_empty() && self.backend_errors == self.episode_files.len()
    }
}

pub fn load_book(cfg: &RunConfig) -> Result<RecipeBook, RunError> {
    match &cfg.recipes {
        None => Ok(assets::bundled_book()),
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            RecipeBook::parse(&text).map_err(|e| RunError::Book { path: path.clone(), reason: e.to_string() })
        }
    }
}

pub fn load_worlds(cfg: &RunConfig, book: &RecipeBook) -> Result<Vec<World>, RunError> {
    Ok(match (cfg.environment, &cfg.worlds) {
        (EnvKind::Household, None) => {
            stateact_core::household::bundled_worlds().into_iter().map(World::Household).collect()
        }
        (EnvKind::Household, Some(dir)) => load_household_dir(dir)?.into_iter().map(World::Household).collect(),
        (EnvKind::Textcraft, None) => assets::bundled_tasks().into_iter().map(World::Textcraft).collect(),
        (EnvKind::Textcraft, Some(dir)) => load_textcraft_dir(dir, book)?.into_iter().map(World::Textcraft).collect(),
    })
}

/// The shared backend a config names; `None` means the per-episode oracle.
pub fn build_backend(cfg: &RunConfig) -> Result<Option<SharedBackend>, RunError> {
    Ok(match &cfg.backend {
        BackendConfig::Oracle => None,
        BackendConfig::Http(h) => Some(Arc::new(HttpBackend::new(h.clone())?)),
        BackendConfig::Replay { store, mode } => Some(Arc::new(ReplayBackend::new(ReplayStore::load(store)?, *mode))),
    })
}

/// The HTTP backend wrapped so every completion lands in `record_to`.
pub fn build_recording_backend(cfg: &RunConfig) -> Result<SharedBackend, RunError> {
    let BackendConfig::Http(h) = &cfg.backend else {
        return Err(ConfigError::Missing("backend kind = \"http\"").into());
    };
    let path = cfg.record_to.as_ref().ok_or(ConfigError::Missing("record_to"))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io { path: parent.into(), source })?;
    }
    Ok(Arc::new(RecordingBackend::create(HttpBackend::new(h.clone())?, path)?))
}

/// `<output>/episodes/<environment>/<variant slug>/<world id>.jsonl`
pub fn episode_path(output: &Path, env: EnvKind, variant: &AgentVariant, world_id: &str) -> PathBuf {
    output.join("episodes").join(env.as_str()).join(variant.slug()).join(format!("{world_id}.jsonl"))
}

/// Runs with the backend the config names.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let backend = build_backend(cfg)?;
    run_with_backend(cfg, backend)
}

/// Runs with an explicit shared backend, or the oracle when `None`.
pub fn run_with_backend(cfg: &RunConfig, backend: Option<SharedBackend>) -> Result<RunOutcome, RunError> {
    let variants = cfg.resolved_variants()?;
    let book = load_book(cfg)?;
    let worlds = load_worlds(cfg, &book)?;
    for w in &worlds {
        if let World::Household(spec) = w {
            spec.validate()?;
        }
    }
    if cfg.d_max().is_some() && assets::planner(cfg.environment.dialect()).is_none() {
        return Err(RunError::NoPlanner(cfg.environment.as_str().into()));
    }

    let cells: Vec<(AgentVariant, &World, PathBuf)> = variants
        .iter()
        .flat_map(|v| worlds.iter().map(move |w| (*v, w)))
        .map(|(v, w)| (v, w, episode_path(&cfg.output, cfg.environment, &v, w.id())))
        .collect();
    for (_, _, path) in &cells {
        if path.exists() {
            return Err(RunError::WouldOverwrite(path.clone()));
        }
    }
    for (_, _, path) in &cells {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.into(), source })?;
        }
    }

    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<RunError>> = Mutex::new(Vec::new());
    let backend_errors = AtomicUsize::new(0);
    let workers = cfg.parallelism.max(1).min(cells.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((variant, world, path)) = cells.get(i) else { break };
                let outcome = run_cell(cfg, variant, world, &book, backend.as_ref())
                    .and_then(|file| {
                        log::info!(
                            "{} {} {}",
                            variant.slug(),
                            file.header.env_id,
                            file.result.termination.as_str()
                        );
                        if file.result.termination == Termination::BackendError {
                            backend_errors.fetch_add(1, Ordering::SeqCst);
                        }
                        file.write(path).map_err(|source| RunError::Io { path: path.clone(), source })
                    });
                if let Err(e) = outcome {
                    failures.lock().unwrap_or_else(|p| p.into_inner()).push(e);
                }
            });
        }
    });
    if let Some(e) = failures.into_inner().unwrap_or_else(|p| p.into_inner()).into_iter().next() {
        return Err(e);
    }

    let report = report_dir(&cfg.output)?;
    write_report(&cfg.output, &report)?;
    Ok(RunOutcome {
        episode_files: cells.into_iter().map(|(_, _, p)| p).collect(),
        backend_errors: backend_errors.into_inner(),
        report,
    })
}

/// Runs one cell and returns its trace file contents.
pub fn run_cell(
    cfg: &RunConfig,
    variant: &AgentVariant,
    world: &World,
    book: &RecipeBook,
    backend: Option<&SharedBackend>,
) -> Result<EpisodeFile, RunError> {
    match world {
        World::Household(spec) => {
            let env = HouseholdEnv::new(spec.clone())?.with_move_to_syntax(cfg.move_to_syntax);
            execute(cfg, variant, env, Some(spec.task.kind), backend)
        }
        World::Textcraft(task) => execute(cfg, variant, TextcraftEnv::new(book.clone(), task.clone()), None, backend),
    }
}

fn execute<E: Environment>(
    cfg: &RunConfig,
    variant: &AgentVariant,
    env: E,
    kind: Option<TaskKind>,
    backend: Option<&SharedBackend>,
) -> Result<EpisodeFile, RunError> {
    let few_shot =
        assets::few_shot(variant.dialect, kind).map_err(|e| RunError::Prompt(e.to_string()))?;
    let shared = SharedEnv::new(env);
    let oracle;
    let backend: &dyn ModelBackend = match backend {
        Some(b) => b.as_ref(),
        None => {
            oracle = OracleBackend::new(shared.clone(), *variant);
            &oracle
        }
    };
    let mut env = shared.clone();
    let max_steps = cfg.max_steps();
    let header = Header {
        variant: *variant,
        variant_label: variant.label(),
        dialect: variant.dialect,
        seed: env.seed(),
        env_id: env.id(),
        environment: cfg.environment.as_str().to_string(),
        max_steps,
        d_max: cfg.d_max(),
    };
    let opts = EpisodeOptions {
        episode_id: format!("{}/{}", variant.slug(), header.env_id),
        request: cfg.request.clone(),
        max_chars: cfg.max_prompt_chars,
        truncation: cfg.truncation,
    };

    let Some(d_max) = cfg.d_max() else {
        let result = run_episode(&mut env, variant, backend, &few_shot, max_steps, &opts);
        log::debug!("{}", summarize(&result));
        return Ok(EpisodeFile {
            header,
            steps: result.records.iter().cloned().map(|record| StepLine { node: None, record }).collect(),
            nodes: Vec::new(),
            result: ResultLine {
                success: result.success,
                steps_taken: result.steps_taken,
                max_steps,
                termination: result.termination,
            },
        });
    };

    let planner = assets::planner(variant.dialect).ok_or_else(|| RunError::NoPlanner(header.environment.clone()))?;
    let adapt_opts = AdaptOptions { d_max, max_steps };
    Ok(match run_adapt(&mut env, variant, backend, &few_shot, &planner, &adapt_opts, &opts) {
        Ok(tree) => {
            let termination = if tree.success {
                Termination::Solved
            } else {
                tree.episodes.last().map_or(Termination::StepLimit, |(_, e)| e.termination)
            };
            EpisodeFile {
                steps: tree
                    .episodes
                    .iter()
                    .flat_map(|(node, e)| {
                        e.records.iter().cloned().map(|record| StepLine { node: Some(node.clone()), record })
                    })
                    .collect(),
                nodes: NodeLine::flatten(&tree.root),
                result: ResultLine { success: tree.success, steps_taken: tree.total_steps(), max_steps, termination },
                header,
            }
        }
        Err(e) => {
            log::warn!("{}: decomposition aborted: {e}", header.env_id);
            EpisodeFile {
                header,
                steps: Vec::new(),
                nodes: Vec::new(),
                result: ResultLine { success: false, steps_taken: 0, max_steps, termination: Termination::BackendError },
            }
        }
    })
}
