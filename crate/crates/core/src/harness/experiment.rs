use std::path::PathBuf;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use super::charts::{line_chart, Series};
use super::{gen_gap_theorem1, gen_hexagon, gen_line_lemma1, GeneratorError, Instance};
use crate::analysis::{competitive_ratio_estimate, matching_dilation};
use crate::coating::ElectionKind;
use crate::scheduler::{run_async, ActivationPolicy, EngineError, Outcome, RunOptions};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Hexagon,
    LineLemma1,
    GapTheorem1,
    File(PathBuf),
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Hexagon => "hexagon",
            GeneratorKind::LineLemma1 => "line_lemma1",
            GeneratorKind::GapTheorem1 => "gap_theorem1",
            GeneratorKind::File(_) => "file",
        }
    }
}

fn randomized() -> ElectionKind {
    ElectionKind::Randomized
}

fn one() -> usize {
    1
}

/// A grid of generator parameters, each cell run `trials` times. Trial `t`
/// of every cell uses seed `seed_base + t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub generator: GeneratorKind,
    #[serde(default)]
    pub radii: Vec<u32>,
    #[serde(default)]
    pub ns: Vec<usize>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub policy: ActivationPolicy,
    #[serde(default = "randomized")]
    pub election: ElectionKind,
    #[serde(default)]
    pub max_rounds: Option<u64>,
}

impl ExperimentPlan {
    pub fn hexagon(radii: Vec<u32>, ns: Vec<usize>, trials: usize) -> Self {
        ExperimentPlan {
            generator: GeneratorKind::Hexagon,
            radii,
            ns,
            trials,
            seed_base: 0,
            policy: ActivationPolicy::default(),
            election: ElectionKind::Randomized,
            max_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let problem = if self.trials == 0 {
            Some("trials must be at least 1")
        } else {
            match self.generator {
                GeneratorKind::Hexagon if self.radii.is_empty() || self.ns.is_empty() => {
                    Some("the hexagon generator needs non-empty `radii` and `ns`")
                }
                GeneratorKind::LineLemma1 | GeneratorKind::GapTheorem1 if self.ns.is_empty() => {
                    Some("this generator needs a non-empty `ns`")
                }
                _ => None,
            }
        };
        match problem {
            Some(p) => Err(ExperimentError::Plan(p.to_string())),
            None => Ok(()),
        }
    }

    /// Grid cells as `(radius, n)`; `n` is `None` for file plans.
    pub fn cells(&self) -> Vec<(Option<u32>, Option<usize>)> {
        match self.generator {
            GeneratorKind::Hexagon => self
                .radii
                .iter()
                .flat_map(|&r| self.ns.iter().map(move |&n| (Some(r), Some(n))))
                .collect(),
            GeneratorKind::LineLemma1 | GeneratorKind::GapTheorem1 => {
                self.ns.iter().map(|&n| (None, Some(n))).collect()
            }
            GeneratorKind::File(_) => vec![(None, None)],
        }
    }

    pub fn run_options(&self, seed: u64) -> RunOptions {
        RunOptions {
            seed,
            election: self.election,
            policy: self.policy.clone(),
            max_rounds: self.max_rounds,
            ..RunOptions::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("cannot read instance file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("trial {trial} (n = {n}): {source}")]
    Engine {
        n: usize,
        trial: usize,
        source: EngineError,
    },
}

/// How independent trials are scheduled. Results are identical either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon thread pool when the `parallel` feature is enabled and
    /// falls back to sequential execution otherwise.
    #[default]
    Parallel,
}

/// One row of the per-trial CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub generator: String,
    pub radius: Option<u32>,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub rounds: u64,
    pub activations: u64,
    pub md: Option<u32>,
    pub ratio: Option<f64>,
    /// First round at which each layer was complete, `;`-separated, `-` if never.
    pub layer_rounds: String,
}

/// One row of the summary CSV. Means and 95% confidence intervals cover
/// only trials that reached quiescence; intervals are empty with fewer than
/// two such trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub generator: String,
    pub radius: Option<u32>,
    pub n: usize,
    pub trials: usize,
    pub completed: usize,
    pub round_limit: usize,
    pub mean_rounds: Option<f64>,
    pub rounds_ci_low: Option<f64>,
    pub rounds_ci_high: Option<f64>,
    pub mean_md: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub ratio_ci_low: Option<f64>,
    pub ratio_ci_high: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub trials: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
}

fn instance_for(
    plan: &ExperimentPlan,
    file: Option<&Instance>,
    radius: Option<u32>,
    n: Option<usize>,
    seed: u64,
) -> Result<Instance, ExperimentError> {
    Ok(match &plan.generator {
        GeneratorKind::Hexagon => gen_hexagon(radius.unwrap_or(1), n.unwrap_or(1), seed)?,
        GeneratorKind::LineLemma1 => gen_line_lemma1(n.unwrap_or(1))?,
        GeneratorKind::GapTheorem1 => gen_gap_theorem1(n.unwrap_or(1))?,
        GeneratorKind::File(_) => file.expect("file plans load their instance").clone(),
    })
}

fn run_one(
    plan: &ExperimentPlan,
    inst: &Instance,
    radius: Option<u32>,
    trial: usize,
    seed: u64,
) -> Result<TrialRecord, ExperimentError> {
    let result =
        run_async(inst.configuration(seed), &plan.run_options(seed)).map_err(|source| {
            ExperimentError::Engine {
                n: inst.n(),
                trial,
                source,
            }
        })?;
    let md = matching_dilation(&inst.object_set(), &inst.particles)
        .ok()
        .map(|m| m.value);
    let ratio = match (result.outcome, md) {
        (Outcome::Quiescent, Some(md)) => competitive_ratio_estimate(result.rounds, md),
        _ => None,
    };
    let layer_rounds = result
        .layer_rounds
        .iter()
        .map(|t| t.map_or("-".to_string(), |t| t.to_string()))
        .collect::<Vec<_>>()
        .join(";");
    Ok(TrialRecord {
        generator: plan.generator.name().to_string(),
        radius,
        n: inst.n(),
        trial,
        seed,
        outcome: result.outcome,
        rounds: result.rounds,
        activations: result.activations,
        md,
        ratio,
        layer_rounds,
    })
}

/// Runs every trial of the plan, in cell order and then trial order.
pub fn run_trials(
    plan: &ExperimentPlan,
    exec: Execution,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    plan.validate()?;
    let file = match &plan.generator {
        GeneratorKind::File(path) => Some(Instance::load(path)?),
        _ => None,
    };
    let jobs: Vec<(Option<u32>, Option<usize>, usize)> = plan
        .cells()
        .into_iter()
        .flat_map(|(r, n)| (0..plan.trials).map(move |t| (r, n, t)))
        .collect();
    let job = |&(radius, n, trial): &(Option<u32>, Option<usize>, usize)| {
        let seed = plan.seed_base.wrapping_add(trial as u64);
        let inst = instance_for(plan, file.as_ref(), radius, n, seed)?;
        run_one(plan, &inst, radius, trial, seed)
    };
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => jobs.par_iter().map(job).collect(),
        _ => jobs.iter().map(job).collect(),
    }
}

fn mean_ci(xs: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None, None);
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (Some(mean), None, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let t = StudentsT::new(0.0, 1.0, k - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / k).sqrt();
    (Some(mean), Some(mean - half), Some(mean + half))
}

/// Aggregates trials that share generator, radius and particle count, in
/// order of first appearance.
pub fn summarize(trials: &[TrialRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, Option<u32>, usize)> = Vec::new();
    for t in trials {
        let key = (t.generator.clone(), t.radius, t.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(generator, radius, n)| {
            let cell: Vec<&TrialRecord> = trials
                .iter()
                .filter(|t| t.generator == generator && t.radius == radius && t.n == n)
                .collect();
            let done: Vec<&TrialRecord> = cell
                .iter()
                .copied()
                .filter(|t| t.outcome == Outcome::Quiescent)
                .collect();
            let rounds: Vec<f64> = done.iter().map(|t| t.rounds as f64).collect();
            let mds: Vec<f64> = done.iter().filter_map(|t| t.md).map(f64::from).collect();
            let ratios: Vec<f64> = done.iter().filter_map(|t| t.ratio).collect();
            let (mean_rounds, rounds_ci_low, rounds_ci_high) = mean_ci(&rounds);
            let (mean_ratio, ratio_ci_low, ratio_ci_high) = mean_ci(&ratios);
            CellSummary {
                generator,
                radius,
                n,
                trials: cell.len(),
                completed: done.len(),
                round_limit: cell.len() - done.len(),
                mean_rounds,
                rounds_ci_low,
                rounds_ci_high,
                mean_md: mean_ci(&mds).0,
                mean_ratio,
                ratio_ci_low,
                ratio_ci_high,
            }
        })
        .collect()
}

pub fn run_experiment(
    plan: &ExperimentPlan,
    exec: Execution,
) -> Result<ExperimentReport, ExperimentError> {
    let trials = run_trials(plan, exec)?;
    let cells = summarize(&trials);
    Ok(ExperimentReport { trials, cells })
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize to CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

impl ExperimentReport {
    pub fn trials_csv(&self) -> String {
        to_csv(&self.trials)
    }

    pub fn cells_csv(&self) -> String {
        to_csv(&self.cells)
    }

    /// Rounds against particle count, rounds/MD against particle count on a
    /// log scale, and rounds against hexagon radius, as `(file stem, svg)`.
    pub fn charts(&self) -> Vec<(String, String)> {
        let point = |x: f64, c: &CellSummary, ratio: bool| {
            let (m, lo, hi) = if ratio {
                (c.mean_ratio, c.ratio_ci_low, c.ratio_ci_high)
            } else {
                (c.mean_rounds, c.rounds_ci_low, c.rounds_ci_high)
            };
            m.map(|m| (x, m, lo.zip(hi)))
        };
        let group = |by_radius: bool, ratio: bool| -> Vec<Series> {
            let mut series: Vec<Series> = Vec::new();
            for c in &self.cells {
                let (name, x) = if by_radius {
                    (
                        c.radius
                            .map_or("all".to_string(), |r| format!("radius {r}")),
                        c.n as f64,
                    )
                } else {
                    (format!("n = {}", c.n), f64::from(c.radius.unwrap_or(0)))
                };
                let Some(p) = point(x, c, ratio) else {
                    continue;
                };
                match series.iter_mut().find(|s| s.name == name) {
                    Some(s) => s.points.push(p),
                    None => series.push(Series {
                        name,
                        points: vec![p],
                    }),
                }
            }
            series
        };
        let mut out = vec![
            (
                "rounds_vs_n".to_string(),
                line_chart(
                    "Rounds by number of particles",
                    "particles n",
                    "rounds",
                    &group(true, false),
                    false,
                ),
            ),
            (
                "ratio_vs_n".to_string(),
                line_chart(
                    "Rounds / matching dilation",
                    "particles n",
                    "rounds / MD",
                    &group(true, true),
                    true,
                ),
            ),
        ];
        if self.cells.iter().any(|c| c.radius.is_some()) {
            out.push((
                "rounds_vs_radius".to_string(),
                line_chart(
                    "Rounds by hexagon radius",
                    "radius",
                    "rounds",
                    &group(false, false),
                    false,
                ),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_leaves_intervals_empty() {
        let plan = ExperimentPlan::hexagon(vec![1], vec![6], 1);
        let report = run_experiment(&plan, Execution::Sequential).unwrap();
        assert_eq!(report.trials.len(), 1);
        let cell = &report.cells[0];
        assert!(cell.mean_rounds.is_some());
        assert_eq!((cell.rounds_ci_low, cell.rounds_ci_high), (None, None));
        let csv = report.cells_csv();
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains(",,"), "{row}");
    }

    #[test]
    fn execution_modes_agree() {
        let plan = ExperimentPlan::hexagon(vec![1, 2], vec![6, 12], 3);
        let a = run_experiment(&plan, Execution::Sequential).unwrap();
        let b = run_experiment(&plan, Execution::Parallel).unwrap();
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.cells_csv(), b.cells_csv());
    }

    #[test]
    fn seeds_depend_only_on_trial_index() {
        let mut plan = ExperimentPlan::hexagon(vec![1], vec![6, 9], 2);
        plan.seed_base = 40;
        let first = run_trials(&plan, Execution::Sequential).unwrap();
        plan.ns = vec![7, 9];
        let second = run_trials(&plan, Execution::Sequential).unwrap();
        assert_eq!(first[2..], second[2..]);
        assert_eq!(
            first.iter().map(|t| t.seed).collect::<Vec<_>>(),
            vec![40, 41, 40, 41]
        );
    }

    #[test]
    fn interval_matches_t_quantile() {
        let (m, lo, hi) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, Some(2.0));
        // t_{0.975, 2} = 4.302653; s = 1; half width = t / sqrt(3)
        let half = 4.302_652_729_911_275 / 3f64.sqrt();
        assert!((lo.unwrap() - (2.0 - half)).abs() < 1e-9);
        assert!((hi.unwrap() - (2.0 + half)).abs() < 1e-9);
    }

    #[test]
    fn empty_plans_are_rejected() {
        let plan = ExperimentPlan::hexagon(vec![], vec![6], 1);
        assert!(matches!(
            run_trials(&plan, Execution::Sequential),
            Err(ExperimentError::Plan(_))
        ));
        let plan = ExperimentPlan::hexagon(vec![1], vec![6], 0);
        assert!(plan.validate().is_err());
    }
}
