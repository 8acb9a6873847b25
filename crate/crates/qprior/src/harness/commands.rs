//! The experiment commands behind the CLI.
//!
//! Each command resolves a [`Config`], runs its experiment, and writes its
//! outputs plus the resolved-config echo into the output directory. All
//! randomness derives from the configured seeds, so re-running a command
//! overwrites every output byte-identically. Commands compose through
//! default paths: `train-sources` feeds `learn-prior`, which feeds
//! `train-target`; `transfer` and `common-reward` train what they need
//! themselves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::Config;
use crate::analysis::{
    aggregate_cumulative_collisions, aggregate_returns, aggregate_to_csv, closed_form_unsafe_ratio,
    correctness, distance_reducing_fraction, evaluate_prior, monte_carlo_unsafe_ratio,
    selection_quality, td_error_trace, RatioParams,
};
use crate::error::{Error, Result};
use crate::explore::{BiasMode, ExploreConfig};
use crate::grid::{self, MapSpec};
use crate::learner::{
    greedy_goal_or_common_rate, greedy_goal_rate, train_source_tasks, train_task, Behavior,
    MetricsLog, PriorHandle, TrainConfig,
};
use crate::maps;
use crate::mdp::{DiscountedParams, QTable};
use crate::prior::{load_prior, threshold_bounds, PriorMode, PriorModel, SourceTable};
use crate::rng::RngStream;
use crate::transfer::{
    first_window_mean, last_window_mean, run_transfer, InitMode, TransferConfig,
};

/// Loads a map by built-in name (`original`, `variant_a` … `variant_d`,
/// `common_reward`) or by file path.
pub fn resolve_map(name_or_path: &str, common_value: f64) -> Result<MapSpec> {
    let env = match maps::builtin(name_or_path) {
        Some(text) => grid::parse_map(text)?,
        None => grid::load_map(name_or_path)?,
    };
    Ok(env.with_common_reward_value(common_value))
}

/// Parses a goal list: `x,y` pairs separated by semicolons.
fn parse_goals(text: &str) -> Result<Vec<(usize, usize)>> {
    let goals: Vec<(usize, usize)> = text
        .split(';')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|pair| {
            let bad = || Error::config(format!("bad goal {pair:?}; expected x,y"));
            let (x, y) = pair.split_once(',').ok_or_else(bad)?;
            Ok((
                x.trim().parse().map_err(|_| bad())?,
                y.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect::<Result<_>>()?;
    if goals.is_empty() {
        return Err(Error::config("at least one goal is required"));
    }
    Ok(goals)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `f` inside a rayon pool of `jobs` threads (0 = one per core).
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot build a {jobs}-thread pool: {e}")))?;
    pool.install(f)
}

fn explore_config(cfg: &Config, mode: BiasMode, rho: f64) -> Result<ExploreConfig> {
    ExploreConfig::new(
        cfg.get_f64("epsilon0")?,
        cfg.get_f64("epsilon_decay")?,
        cfg.get_f64("epsilon_min")?,
        rho,
        mode,
    )
}

fn train_config(cfg: &Config, mode: BiasMode, rho: f64) -> Result<TrainConfig> {
    TrainConfig::new(
        cfg.get_usize("episodes")?,
        cfg.get_usize("horizon")?,
        DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?,
        explore_config(cfg, mode, rho)?,
    )
}

/// The gridworld reward range that bounds meaningful selection thresholds.
const REWARD_RANGE: (f64, f64) = (-1.0, 1.0);

pub const TRAIN_SOURCES_DEFAULTS: &[(&str, &str)] = &[
    ("map", "original"),
    ("out", "runs/sources"),
    ("seeds", "1,"),
    ("jobs", "0"),
    ("goals", "10,9;13,9;10,11;13,11"),
    ("episodes", "20000"),
    ("horizon", "500"),
    ("alpha", "0.05"),
    ("gamma", "0.95"),
    ("epsilon0", "1"),
    ("epsilon_decay", "0.995"),
    ("epsilon_min", "0.05"),
    ("min_success_rate", "0.95"),
    ("common_value", "0.2"),
];

/// Trains one task per goal and saves the converged tables, per-task
/// metrics, and a `sources.txt` manifest.
pub fn cmd_train_sources(cfg: &Config) -> Result<()> {
    let env = resolve_map(cfg.get_str("map"), cfg.get_f64("common_value")?)?;
    let goals = parse_goals(cfg.get_str("goals"))?;
    let train = train_config(cfg, BiasMode::None, 0.0)?;
    let min_rate = cfg.get_f64("min_success_rate")?;
    let seed = cfg.seeds()?[0];
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "train-sources")?;

    let rng = RngStream::new(seed);
    let outcome = with_pool(cfg.get_usize("jobs")?, || {
        train_source_tasks(&env, &goals, &train, min_rate, &rng)
    })?;

    let mut manifest = String::new();
    let mut summary = String::new();
    for ((source, log), rate) in outcome
        .sources
        .iter()
        .zip(&outcome.logs)
        .zip(&outcome.success_rates)
    {
        let file = format!("{}.qt", source.label);
        source.table.save(out.join(&file))?;
        log.write_csv(out.join(format!("metrics_{}.csv", source.label)))?;
        manifest.push_str(&file);
        manifest.push('\n');
        let _ = writeln!(summary, "success_rate_{}={rate}", source.label);
    }
    write_file(&out.join("sources.txt"), &manifest)?;
    write_file(&out.join("summary.txt"), &summary)?;

    let min = outcome
        .success_rates
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    println!(
        "train-sources: {} tasks converged (worst success rate {:.1}%) -> {}",
        goals.len(),
        min * 100.0,
        out.display()
    );
    Ok(())
}

/// Reads the `sources.txt` manifest and loads each listed table.
pub fn load_sources(dir: &Path) -> Result<Vec<SourceTable>> {
    let manifest = dir.join("sources.txt");
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut sources = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let path = dir.join(line);
        let label = Path::new(line)
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::format(&path, "source file needs a UTF-8 stem"))?;
        sources.push(SourceTable::new(label, QTable::load(&path)?)?);
    }
    if sources.len() < 2 {
        return Err(Error::config(format!(
            "{} lists {} sources; a prior needs at least 2",
            manifest.display(),
            sources.len()
        )));
    }
    Ok(sources)
}

pub const LEARN_PRIOR_DEFAULTS: &[(&str, &str)] = &[
    ("map", "original"),
    ("out", "runs/prior"),
    ("seeds", "0,"),
    ("jobs", "0"),
    ("sources", "runs/sources"),
    ("threshold_t", "0.35"),
    ("alpha", "0.05"),
    ("gamma", "0.95"),
    ("episodes", "2000"),
    ("horizon", "500"),
    ("behavior", "uniform"),
    ("mode", "avoid"),
    ("common_value", "0.2"),
];

/// Distils a prior from saved source tables, saves it with its metadata
/// and TD trace, and reports its quality against the map's ground truth.
pub fn cmd_learn_prior(cfg: &Config) -> Result<()> {
    let env = resolve_map(cfg.get_str("map"), cfg.get_f64("common_value")?)?;
    let sources = load_sources(Path::new(cfg.get_str("sources")))?;
    let threshold = cfg.get_f64("threshold_t")?;
    let mode: PriorMode = cfg.get_str("mode").parse()?;
    let params = DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?;
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "learn-prior")?;

    let (lo, hi) = threshold_bounds(REWARD_RANGE.0, REWARD_RANGE.1)?;
    if threshold <= lo || threshold >= hi {
        eprintln!(
            "warning: threshold_t={threshold} lies outside the meaningful range \
             ({lo}, {hi}) for rewards in [{}, {}]; selection may be empty or total",
            REWARD_RANGE.0, REWARD_RANGE.1
        );
    }

    let behavior = match cfg.get_str("behavior") {
        "uniform" => Behavior::UniformRandom,
        "greedy" => Behavior::Greedy(sources[0].table.clone()),
        other => {
            return Err(Error::config(format!(
                "unknown behavior {other:?}; expected \"uniform\" or \"greedy\""
            )))
        }
    };

    let mut model = PriorModel::new(sources, threshold, params, mode)?;
    let mut rng = RngStream::new(cfg.seeds()?[0]);
    let log = crate::learner::learn_prior_offpolicy(
        &env,
        &mut model,
        &behavior,
        cfg.get_usize("episodes")?,
        cfg.get_usize("horizon")?,
        &mut rng,
    )?;

    model.save(out.join("prior.qt"))?;
    log.write_csv(out.join("td_trace.csv"))?;

    let quality = selection_quality(&model, &env);
    let eval = evaluate_prior(model.q(), &env)?;
    let correctness_text = match correctness(&eval.counts) {
        Ok(c) => c.to_string(),
        Err(Error::UndefinedCorrectness) => "undefined".to_owned(),
        Err(e) => return Err(e),
    };
    let precision_text = quality
        .precision()
        .map_or_else(|| "undefined".to_owned(), |p| p.to_string());
    let stats = model.stats();
    let mut report = String::new();
    let _ = writeln!(report, "selected_pairs={}", quality.selected);
    let _ = writeln!(report, "selected_collision_hits={}", quality.collision_hits);
    let _ = writeln!(report, "selected_precision={precision_text}");
    let _ = writeln!(report, "identified={}", eval.counts.identified);
    let _ = writeln!(report, "false_positives={}", eval.counts.false_positives);
    let _ = writeln!(report, "false_negatives={}", eval.counts.false_negatives);
    let _ = writeln!(report, "correctness={correctness_text}");
    if mode == PriorMode::SeekDesirable && env.common_state().is_some() {
        let text = match distance_reducing_fraction(&model, &env) {
            Ok(f) => f.to_string(),
            Err(_) => "undefined".to_owned(),
        };
        let _ = writeln!(report, "distance_reducing_fraction={text}");
    }
    let _ = writeln!(report, "updates={}", stats.updates);
    let _ = writeln!(report, "selected_updates={}", stats.selected_updates);
    let _ = writeln!(report, "zero_max_skips={}", stats.zero_max_skips);
    write_file(&out.join("eval.txt"), &report)?;

    println!(
        "learn-prior: {} pairs selected (precision {precision_text}), correctness {correctness_text} -> {}",
        quality.selected,
        out.display()
    );
    Ok(())
}

pub const TRAIN_TARGET_DEFAULTS: &[(&str, &str)] = &[
    ("map", "original"),
    ("out", "runs/target"),
    ("seeds", "10"),
    ("jobs", "0"),
    ("prior", "runs/prior/prior.qt"),
    ("episodes", "2000"),
    ("horizon", "500"),
    ("alpha", "0.05"),
    ("gamma", "0.95"),
    ("epsilon0", "1"),
    ("epsilon_decay", "0.995"),
    ("epsilon_min", "0.05"),
    ("rho", "0.95"),
    ("mode", "avoid"),
    ("common_value", "0.2"),
    ("window", "100"),
];

struct PairedRun {
    seed: u64,
    with_prior: MetricsLog,
    baseline: MetricsLog,
    goal_rate: f64,
}

/// Trains the target task with and without prior-biased exploration on
/// paired seeds and writes per-seed plus aggregate metrics.
pub fn cmd_train_target(cfg: &Config) -> Result<()> {
    let env = resolve_map(cfg.get_str("map"), cfg.get_f64("common_value")?)?;
    let (prior_q, _meta) = load_prior(cfg.get_str("prior"))?;
    let bias: BiasMode = cfg.get_str("mode").parse()?;
    if bias == BiasMode::None {
        return Err(Error::config("mode must be \"avoid\" or \"seek\" here"));
    }
    let rho = cfg.get_f64("rho")?;
    let with_cfg = train_config(cfg, bias, rho)?;
    let base_cfg = train_config(cfg, BiasMode::None, 0.0)?;
    let seeds = cfg.seeds()?;
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "train-target")?;

    let runs: Vec<PairedRun> = with_pool(cfg.get_usize("jobs")?, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = RngStream::new(seed);
                let (q_with, with_prior) =
                    train_task(&env, &with_cfg, PriorHandle::Frozen(&prior_q), &mut rng)?;
                let mut rng = RngStream::new(seed);
                let (_, baseline) = train_task(&env, &base_cfg, PriorHandle::None, &mut rng)?;
                let mut rate_rng = RngStream::new(seed).substream(7777);
                let goal_rate = greedy_goal_rate(&env, &q_with, with_cfg.horizon, &mut rate_rng);
                Ok(PairedRun {
                    seed,
                    with_prior,
                    baseline,
                    goal_rate,
                })
            })
            .collect()
    })?;

    for run in &runs {
        run.with_prior
            .write_csv(out.join(format!("with_prior_seed{}.csv", run.seed)))?;
        run.baseline
            .write_csv(out.join(format!("baseline_seed{}.csv", run.seed)))?;
    }
    let with_logs: Vec<MetricsLog> = runs.iter().map(|r| r.with_prior.clone()).collect();
    let base_logs: Vec<MetricsLog> = runs.iter().map(|r| r.baseline.clone()).collect();
    write_file(
        &out.join("with_prior_return_agg.csv"),
        &aggregate_to_csv(&aggregate_returns(&with_logs)?),
    )?;
    write_file(
        &out.join("baseline_return_agg.csv"),
        &aggregate_to_csv(&aggregate_returns(&base_logs)?),
    )?;
    write_file(
        &out.join("with_prior_cumulative_collisions_agg.csv"),
        &aggregate_to_csv(&aggregate_cumulative_collisions(&with_logs)?),
    )?;
    write_file(
        &out.join("baseline_cumulative_collisions_agg.csv"),
        &aggregate_to_csv(&aggregate_cumulative_collisions(&base_logs)?),
    )?;

    let episodes = with_cfg.episodes;
    let window = cfg.get_usize("window")?.min(episodes);
    let early = 200.min(episodes);
    let lower_at = |count: usize| {
        runs.iter()
            .filter(|r| {
                r.with_prior.cumulative_collisions(count - 1)
                    < r.baseline.cumulative_collisions(count - 1)
            })
            .count()
    };
    let mut summary = String::new();
    let _ = writeln!(summary, "pairs={}", runs.len());
    let _ = writeln!(
        summary,
        "pairs_with_fewer_collisions_at_{early}={}",
        lower_at(early)
    );
    let _ = writeln!(
        summary,
        "pairs_with_fewer_collisions_at_{episodes}={}",
        lower_at(episodes)
    );
    let mean_over = |logs: &[MetricsLog], f: &dyn Fn(&MetricsLog) -> f64| {
        logs.iter().map(f).sum::<f64>() / logs.len() as f64
    };
    let _ = writeln!(
        summary,
        "with_prior_first{window}_mean_return={}",
        mean_over(&with_logs, &|l| l.mean_return(0, window))
    );
    let _ = writeln!(
        summary,
        "baseline_first{window}_mean_return={}",
        mean_over(&base_logs, &|l| l.mean_return(0, window))
    );
    let _ = writeln!(
        summary,
        "with_prior_cumulative_collisions_at_{episodes}_mean={}",
        mean_over(&with_logs, &|l| l.cumulative_collisions(episodes - 1)
            as f64)
    );
    let _ = writeln!(
        summary,
        "baseline_cumulative_collisions_at_{episodes}_mean={}",
        mean_over(&base_logs, &|l| l.cumulative_collisions(episodes - 1)
            as f64)
    );
    for run in &runs {
        let _ = writeln!(
            summary,
            "greedy_goal_rate_seed{}={}",
            run.seed, run.goal_rate
        );
    }
    let min_rate = runs
        .iter()
        .map(|r| r.goal_rate)
        .fold(f64::INFINITY, f64::min);
    let _ = writeln!(summary, "greedy_goal_rate_min={min_rate}");
    write_file(&out.join("summary.txt"), &summary)?;

    println!(
        "train-target: {} paired seeds; {}/{} pairs safer at {early} episodes, \
         worst final goal rate {:.1}% -> {}",
        runs.len(),
        lower_at(early),
        runs.len(),
        min_rate * 100.0,
        out.display()
    );
    Ok(())
}

pub const VERIFY_THEOREM_DEFAULTS: &[(&str, &str)] = &[
    ("out", "runs/theorem"),
    ("seeds", "0,"),
    ("jobs", "0"),
    ("samples", "1000000"),
    ("action_count", "4"),
    ("unsafe_counts", "1,2,3"),
    ("correctness_values", "0.5,0.9,1.0"),
    ("rhos", "0,0.5,0.95,1"),
    ("allowed_failures", "1"),
];

/// Checks the closed-form unsafe-exploration ratio against Monte-Carlo
/// simulation over a parameter grid. Returns whether the check passed
/// (at most `allowed_failures` points outside three standard errors).
pub fn cmd_verify_theorem(cfg: &Config) -> Result<bool> {
    let action_count: u32 = cfg.get_u64("action_count")? as u32;
    let unsafe_counts = cfg.get_u32_list("unsafe_counts")?;
    let correctness_values = cfg.get_f64_list("correctness_values")?;
    let rhos = cfg.get_f64_list("rhos")?;
    let samples = cfg.get_u64("samples")?;
    let allowed = cfg.get_usize("allowed_failures")?;
    let seed = cfg.seeds()?[0];
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "verify-theorem")?;

    let mut points = Vec::new();
    for &u in &unsafe_counts {
        for &c in &correctness_values {
            for &rho in &rhos {
                points.push(RatioParams::new(action_count, u, c, rho)?);
            }
        }
    }

    let base = RngStream::new(seed);
    let rows: Vec<(RatioParams, f64, f64, f64, bool)> = with_pool(cfg.get_usize("jobs")?, || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = base.substream(i as u64 + 1);
                let est = monte_carlo_unsafe_ratio(p, samples, &mut rng)?;
                let closed = closed_form_unsafe_ratio(p);
                let pass = (est.estimate - closed).abs() <= 3.0 * est.std_err + 1e-9;
                Ok((*p, closed, est.estimate, est.std_err, pass))
            })
            .collect()
    })?;

    let mut csv = String::from(
        "action_count,unsafe_count,correctness,rho,closed_form,estimate,std_err,pass\n",
    );
    for (p, closed, estimate, std_err, pass) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{closed},{estimate},{std_err},{pass}",
            p.action_count, p.unsafe_count, p.correctness, p.rho
        );
    }
    write_file(&out.join("report.csv"), &csv)?;

    let passes = rows.iter().filter(|r| r.4).count();
    println!(
        "verify-theorem: {passes}/{} grid points within 3 standard errors -> {}",
        rows.len(),
        out.display()
    );
    Ok(rows.len() - passes <= allowed)
}

pub const TRANSFER_DEFAULTS: &[(&str, &str)] = &[
    ("map", "variant_a,variant_b,variant_c,variant_d"),
    ("out", "runs/transfer"),
    ("seeds", "10"),
    ("jobs", "0"),
    ("prior", "runs/prior/prior.qt"),
    ("goals", "10,9;13,9;10,11;13,11"),
    ("threshold_t", "0.35"),
    ("alpha", "0.05"),
    ("gamma", "0.95"),
    ("episodes", "2000"),
    ("horizon", "500"),
    ("window", "100"),
    ("mode", "avoid"),
    ("source_episodes", "20000"),
    ("source_horizon", "500"),
    ("min_success_rate", "0.95"),
    ("retrain_sources", "true"),
    ("common_value", "0.2"),
];

/// Re-learns the prior on each variant map from a stored table versus from
/// scratch, and writes the per-seed and aggregate |TD| traces.
pub fn cmd_transfer(cfg: &Config) -> Result<()> {
    let variants = cfg.get_str_list("map");
    if variants.is_empty() {
        return Err(Error::config("at least one variant map is required"));
    }
    let common_value = cfg.get_f64("common_value")?;
    let (stored_prior, meta) = load_prior(cfg.get_str("prior"))?;
    let goals = parse_goals(cfg.get_str("goals"))?;
    let mode: PriorMode = cfg.get_str("mode").parse()?;
    let seeds = cfg.seeds()?;
    let window = cfg.get_usize("window")?;
    let retrain = match cfg.get_str("retrain_sources") {
        "true" => true,
        "false" => false,
        other => {
            return Err(Error::config(format!(
                "retrain_sources must be true or false, got {other:?}"
            )))
        }
    };
    let source_cfg = TrainConfig::new(
        cfg.get_usize("source_episodes")?,
        cfg.get_usize("source_horizon")?,
        DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?,
        ExploreConfig::standard(BiasMode::None),
    )?;
    let min_rate = cfg.get_f64("min_success_rate")?;
    let transfer_base = TransferConfig {
        init: InitMode::Scratch,
        episodes: cfg.get_usize("episodes")?,
        horizon: cfg.get_usize("horizon")?,
        threshold: cfg.get_f64("threshold_t")?,
        params: DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?,
        mode,
    };
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "transfer")?;

    let reused_sources = if retrain {
        None
    } else {
        let env = resolve_map("original", common_value)?;
        let rng = RngStream::new(seeds[0].wrapping_add(100_000));
        Some(with_pool(cfg.get_usize("jobs")?, || {
            train_source_tasks(&env, &goals, &source_cfg, min_rate, &rng)
        })?)
    };

    let mut summary = String::new();
    let mut status = Vec::new();
    for name in &variants {
        let env = resolve_map(name, common_value)?;
        let dir_name = variant_dir_name(name)?;
        let dir = out.join(&dir_name);
        ensure_dir(&dir)?;

        let trained;
        let sources: &[SourceTable] = match &reused_sources {
            Some(outcome) => &outcome.sources,
            None => {
                let rng = RngStream::new(seeds[0].wrapping_add(100_000));
                trained = with_pool(cfg.get_usize("jobs")?, || {
                    train_source_tasks(&env, &goals, &source_cfg, min_rate, &rng)
                })?;
                &trained.sources
            }
        };

        let mut arms = Vec::new();
        for init in [InitMode::FromSource, InitMode::Scratch] {
            let arm_cfg = TransferConfig {
                init,
                ..transfer_base
            };
            let runs = with_pool(cfg.get_usize("jobs")?, || {
                run_transfer(&env, sources, Some(&stored_prior), &arm_cfg, &seeds)
            })?;
            for run in &runs {
                run.write_csv(dir.join(format!("{}_seed{}.csv", init.as_str(), run.seed)))?;
            }
            write_file(
                &dir.join(format!("{}_td_agg.csv", init.as_str())),
                &aggregate_to_csv(&td_error_trace(&runs)?),
            )?;
            arms.push((init, runs));
        }

        let _ = writeln!(summary, "[{dir_name}]");
        let mut firsts = Vec::new();
        for (init, runs) in &arms {
            let first = first_window_mean(runs, window)?;
            let last = last_window_mean(runs, window)?;
            let _ = writeln!(summary, "{}_first_window_mean_td={first}", init.as_str());
            let _ = writeln!(summary, "{}_last_window_mean_td={last}", init.as_str());
            let _ = writeln!(summary, "{}_td_decreases={}", init.as_str(), last < first);
            firsts.push(first);
        }
        let helps = firsts[0] < firsts[1];
        let _ = writeln!(summary, "from_source_starts_lower={helps}");
        status.push((dir_name, helps));
    }
    write_file(&out.join("summary.txt"), &summary)?;

    let _ = meta;
    let helped: Vec<&str> = status
        .iter()
        .filter(|(_, h)| *h)
        .map(|(n, _)| n.as_str())
        .collect();
    println!(
        "transfer: {} variants done; warm start lowered the first {window}-episode |TD| on: {} -> {}",
        variants.len(),
        if helped.is_empty() {
            "none".to_owned()
        } else {
            helped.join(", ")
        },
        out.display()
    );
    Ok(())
}

fn variant_dir_name(name_or_path: &str) -> Result<String> {
    if maps::builtin(name_or_path).is_some() {
        return Ok(name_or_path.to_owned());
    }
    Path::new(name_or_path)
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| {
            Error::config(format!(
                "cannot derive a directory name from {name_or_path:?}"
            ))
        })
}

pub const COMMON_REWARD_DEFAULTS: &[(&str, &str)] = &[
    ("map", "common_reward"),
    ("out", "runs/common"),
    ("seeds", "10"),
    ("jobs", "0"),
    ("goals", "10,9;13,9;10,11;13,11"),
    ("common_value", "0.2"),
    ("threshold_t", "0.35"),
    ("mode", "seek"),
    ("rho", "0.95"),
    ("episodes", "2000"),
    ("horizon", "500"),
    ("alpha", "0.05"),
    ("gamma", "0.95"),
    ("epsilon0", "1"),
    ("epsilon_decay", "0.995"),
    ("epsilon_min", "0.05"),
    ("prior_episodes", "2000"),
    ("prior_horizon", "500"),
    ("source_episodes", "20000"),
    ("source_horizon", "500"),
    ("min_success_rate", "0.95"),
    ("window", "200"),
];

/// Runs the desirability pipeline end to end on a map with a common-reward
/// cell: trains sources, distils a seek-mode prior, then compares learners
/// with and without positively biased exploration.
pub fn cmd_common_reward(cfg: &Config) -> Result<()> {
    let env = resolve_map(cfg.get_str("map"), cfg.get_f64("common_value")?)?;
    if env.common_state().is_none() {
        return Err(Error::config(
            "this command needs a map with a common-reward cell (`C`)",
        ));
    }
    let mode: PriorMode = cfg.get_str("mode").parse()?;
    let bias = match mode {
        PriorMode::SeekDesirable => BiasMode::SeekDesirable,
        PriorMode::AvoidUndesirable => BiasMode::AvoidUnsafe,
    };
    let goals = parse_goals(cfg.get_str("goals"))?;
    let seeds = cfg.seeds()?;
    let jobs = cfg.get_usize("jobs")?;
    let out = PathBuf::from(cfg.get_str("out"));
    ensure_dir(&out)?;
    cfg.write_echo(&out, "common-reward")?;

    let source_cfg = TrainConfig::new(
        cfg.get_usize("source_episodes")?,
        cfg.get_usize("source_horizon")?,
        DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?,
        ExploreConfig::standard(BiasMode::None),
    )?;
    let source_rng = RngStream::new(seeds[0].wrapping_add(100_000));
    let outcome = with_pool(jobs, || {
        train_source_tasks(
            &env,
            &goals,
            &source_cfg,
            cfg.get_f64("min_success_rate")?,
            &source_rng,
        )
    })?;

    let mut model = PriorModel::new(
        outcome.sources,
        cfg.get_f64("threshold_t")?,
        DiscountedParams::new(cfg.get_f64("alpha")?, cfg.get_f64("gamma")?)?,
        mode,
    )?;
    let mut prior_rng = RngStream::new(seeds[0].wrapping_add(200_000));
    crate::learner::learn_prior_offpolicy(
        &env,
        &mut model,
        &Behavior::UniformRandom,
        cfg.get_usize("prior_episodes")?,
        cfg.get_usize("prior_horizon")?,
        &mut prior_rng,
    )?;
    model.save(out.join("prior.qt"))?;

    let quality = selection_quality(&model, &env);
    let fraction_text = match distance_reducing_fraction(&model, &env) {
        Ok(f) => f.to_string(),
        Err(_) => "undefined".to_owned(),
    };
    let prior_q = model.into_q();

    let with_cfg = train_config(cfg, bias, cfg.get_f64("rho")?)?;
    let base_cfg = train_config(cfg, BiasMode::None, 0.0)?;
    let runs: Vec<(u64, MetricsLog, MetricsLog, f64)> = with_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = RngStream::new(seed);
                let (q_with, with_bias) =
                    train_task(&env, &with_cfg, PriorHandle::Frozen(&prior_q), &mut rng)?;
                let mut rng = RngStream::new(seed);
                let (_, baseline) = train_task(&env, &base_cfg, PriorHandle::None, &mut rng)?;
                let mut rate_rng = RngStream::new(seed).substream(7777);
                let rate =
                    greedy_goal_or_common_rate(&env, &q_with, with_cfg.horizon, &mut rate_rng);
                Ok((seed, with_bias, baseline, rate))
            })
            .collect()
    })?;

    for (seed, with_bias, baseline, _) in &runs {
        with_bias.write_csv(out.join(format!("with_bias_seed{seed}.csv")))?;
        baseline.write_csv(out.join(format!("baseline_seed{seed}.csv")))?;
    }
    let with_logs: Vec<MetricsLog> = runs.iter().map(|r| r.1.clone()).collect();
    let base_logs: Vec<MetricsLog> = runs.iter().map(|r| r.2.clone()).collect();
    write_file(
        &out.join("with_bias_return_agg.csv"),
        &aggregate_to_csv(&aggregate_returns(&with_logs)?),
    )?;
    write_file(
        &out.join("baseline_return_agg.csv"),
        &aggregate_to_csv(&aggregate_returns(&base_logs)?),
    )?;

    let window = cfg.get_usize("window")?.min(with_cfg.episodes);
    let mean_w = |logs: &[MetricsLog]| {
        logs.iter().map(|l| l.mean_return(0, window)).sum::<f64>() / logs.len() as f64
    };
    let with_w = mean_w(&with_logs);
    let base_w = mean_w(&base_logs);
    let min_rate = runs.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let mut summary = String::new();
    let _ = writeln!(summary, "selected_pairs={}", quality.selected);
    let _ = writeln!(summary, "distance_reducing_fraction={fraction_text}");
    let _ = writeln!(summary, "window={window}");
    let _ = writeln!(summary, "with_bias_first{window}_mean_W={with_w}");
    let _ = writeln!(summary, "baseline_first{window}_mean_W={base_w}");
    let _ = writeln!(summary, "greedy_goal_or_common_rate_min={min_rate}");
    write_file(&out.join("summary.txt"), &summary)?;

    println!(
        "common-reward: {} selected pairs (distance-reducing fraction {fraction_text}); \
         first-{window} W {with_w:.4} with bias vs {base_w:.4} baseline -> {}",
        quality.selected,
        out.display()
    );
    Ok(())
}
