//! Experiment matrices: several scenarios run side by side and compared
//! within groups against a baseline arm.
//!
//! Matrix file (TOML), scenario paths relative to the matrix file:
//!
//! ```toml
//! name = "table3"
//!
//! [[run]]
//! id = "exp1"
//! scenario = "junction_baseline.toml"
//! group = "junction"
//! role = "baseline"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::builtin::{table3_scenario, Group, Role};
use super::config::{load_scenario, ScenarioConfig};
use super::runner::run_scenario;
use super::ScenarioError;
use crate::engine::RunOutput;
use crate::metrics::{DecelStats, JourneyRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEntry {
    pub id: String,
    pub group: String,
    pub role: Role,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrix {
    pub name: String,
    pub runs: Vec<MatrixEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    #[serde(default = "default_matrix_name")]
    name: String,
    run: Vec<MatrixFileRun>,
}

fn default_matrix_name() -> String {
    "matrix".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFileRun {
    id: String,
    scenario: String,
    #[serde(default = "default_group")]
    group: String,
    #[serde(default = "default_role")]
    role: Role,
}

fn default_group() -> String {
    "default".into()
}

fn default_role() -> Role {
    Role::Baseline
}

impl ExperimentMatrix {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: MatrixFile = toml::from_str(&text).map_err(|e| ScenarioError::Toml {
            path: Some(path.to_path_buf()),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut runs = Vec::with_capacity(file.run.len());
        for r in file.run {
            let config = load_scenario(base.join(&r.scenario)).map_err(|e| ScenarioError::Run {
                id: r.id.clone(),
                source: Box::new(e),
            })?;
            runs.push(MatrixEntry {
                id: r.id,
                group: r.group,
                role: r.role,
                config,
            });
        }
        let matrix = Self { name: file.name, runs };
        matrix.validate()?;
        Ok(matrix)
    }

    /// The six built-in runs: junction and midlink, each as baseline,
    /// disabled and enabled arms.
    pub fn table3(seed: u64) -> Self {
        let mut runs = Vec::new();
        let mut n = 1;
        for group in [Group::Junction, Group::Midlink] {
            for role in [Role::Baseline, Role::Disabled, Role::Enabled] {
                runs.push(MatrixEntry {
                    id: format!("exp{n}"),
                    group: group.network().into(),
                    role,
                    config: table3_scenario(group, role, seed),
                });
                n += 1;
            }
        }
        Self {
            name: "table3".into(),
            runs,
        }
    }

    /// Unique ids; at most one baseline per group; arms within a group
    /// differ only in breakdown and rerouting switch.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |message: String| Err(ScenarioError::Matrix(message));
        let mut ids = std::collections::HashSet::new();
        for r in &self.runs {
            if !ids.insert(&r.id) {
                return bad(format!("duplicate run id {:?}", r.id));
            }
        }
        let controlled = |c: &ScenarioConfig| {
            let mut c = c.clone();
            c.scenario.name.clear();
            c.breakdown = None;
            c.rerouting.enabled = false;
            c.output = Default::default();
            c.base_dir = Default::default();
            c
        };
        for (group, runs) in self.groups() {
            if runs.iter().filter(|r| r.role == Role::Baseline).count() > 1 {
                return bad(format!("group {group:?} has more than one baseline"));
            }
            let first = controlled(&runs[0].config);
            for r in &runs[1..] {
                if controlled(&r.config) != first {
                    return bad(format!(
                        "run {:?} differs from {:?} in more than breakdown and rerouting",
                        r.id, runs[0].id
                    ));
                }
            }
        }
        Ok(())
    }

    fn groups(&self) -> BTreeMap<&str, Vec<&MatrixEntry>> {
        let mut groups: BTreeMap<&str, Vec<&MatrixEntry>> = BTreeMap::new();
        for r in &self.runs {
            groups.entry(r.group.as_str()).or_default().push(r);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDigest {
    pub id: String,
    pub scenario: String,
    pub role: Role,
    pub arrived: usize,
    pub incomplete: bool,
    pub reroute_count: usize,
    /// Mean delay against free-flow time.
    pub mean_free_flow_delay_s: f64,
    pub max_free_flow_delay_s: f64,
    /// Mean per-vehicle journey-time increase over the group baseline.
    pub mean_delay_s: Option<f64>,
    pub paired_vehicles: usize,
    pub mean_journey_time_s: f64,
    pub decel: DecelStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecelRow {
    pub id: String,
    pub role: Role,
    pub mean: f64,
    pub variance: f64,
    pub mean_change_pct: Option<f64>,
    pub variance_change_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group: String,
    pub baseline: Option<String>,
    pub runs: Vec<RunDigest>,
    /// Mean delay of the disabled arm over the enabled arm.
    pub delay_ratio_disabled_over_enabled: Option<f64>,
    /// Mean journey time, enabled minus disabled.
    pub journey_time_difference_s: Option<f64>,
    pub decel_table: Vec<DecelRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub matrix: String,
    pub groups: Vec<GroupComparison>,
}

impl Comparison {
    pub fn group(&self, name: &str) -> Option<&GroupComparison> {
        self.groups.iter().find(|g| g.group == name)
    }
}

impl GroupComparison {
    pub fn arm(&self, role: Role) -> Option<&RunDigest> {
        self.runs.iter().find(|r| r.role == role)
    }
}

/// `(x - base) / base * 100`; `None` when the base is zero.
pub fn pct_change(base: f64, x: f64) -> Option<f64> {
    (base != 0.0).then(|| (x - base) / base * 100.0)
}

/// Mean of per-vehicle journey-time differences over vehicles that arrived
/// in both runs, in vehicle order.
pub fn differential_delay(run: &[JourneyRecord], baseline: &[JourneyRecord]) -> (f64, usize) {
    let base: BTreeMap<_, _> = baseline.iter().map(|j| (j.vehicle, j.journey_time)).collect();
    let mut sorted: Vec<&JourneyRecord> = run.iter().collect();
    sorted.sort_by_key(|j| j.vehicle);
    let diffs: Vec<f64> = sorted
        .iter()
        .filter_map(|j| base.get(&j.vehicle).map(|b| j.journey_time - b))
        .collect();
    if diffs.is_empty() {
        return (0.0, 0);
    }
    (diffs.iter().sum::<f64>() / diffs.len() as f64, diffs.len())
}

pub fn compare(matrix: &ExperimentMatrix, outputs: &[RunOutput]) -> Comparison {
    let by_id: BTreeMap<&str, &RunOutput> = matrix
        .runs
        .iter()
        .map(|r| r.id.as_str())
        .zip(outputs)
        .collect();
    let mut groups = Vec::new();
    for (group, runs) in matrix.groups() {
        let baseline = runs.iter().find(|r| r.role == Role::Baseline);
        let base_out = baseline.map(|b| by_id[b.id.as_str()]);
        let digests: Vec<RunDigest> = runs
            .iter()
            .map(|r| {
                let out = by_id[r.id.as_str()];
                let s = &out.summary;
                let (mean_delay_s, paired_vehicles) = match base_out {
                    Some(b) => {
                        let (d, n) = differential_delay(&out.journeys, &b.journeys);
                        (Some(d), n)
                    }
                    None => (None, 0),
                };
                RunDigest {
                    id: r.id.clone(),
                    scenario: r.config.scenario.name.clone(),
                    role: r.role,
                    arrived: s.arrived,
                    incomplete: s.incomplete,
                    reroute_count: s.reroute_count,
                    mean_free_flow_delay_s: s.mean_delay_s,
                    max_free_flow_delay_s: s.max_delay_s,
                    mean_delay_s,
                    paired_vehicles,
                    mean_journey_time_s: s.mean_journey_time_s,
                    decel: s.decel,
                }
            })
            .collect();
        let find = |role| digests.iter().find(|d| d.role == role);
        let delay_ratio = match (find(Role::Disabled), find(Role::Enabled)) {
            (Some(d), Some(e)) => match (d.mean_delay_s, e.mean_delay_s) {
                (Some(dd), Some(ed)) if ed != 0.0 => Some(dd / ed),
                _ => None,
            },
            _ => None,
        };
        let journey_diff = match (find(Role::Disabled), find(Role::Enabled)) {
            (Some(d), Some(e)) => Some(e.mean_journey_time_s - d.mean_journey_time_s),
            _ => None,
        };
        let base_decel = find(Role::Baseline).map(|b| b.decel);
        let decel_table = digests
            .iter()
            .map(|d| DecelRow {
                id: d.id.clone(),
                role: d.role,
                mean: d.decel.mean,
                variance: d.decel.variance,
                mean_change_pct: base_decel.and_then(|b| pct_change(b.mean, d.decel.mean)),
                variance_change_pct: base_decel.and_then(|b| pct_change(b.variance, d.decel.variance)),
            })
            .collect();
        groups.push(GroupComparison {
            group: group.to_string(),
            baseline: baseline.map(|b| b.id.clone()),
            runs: digests,
            delay_ratio_disabled_over_enabled: delay_ratio,
            journey_time_difference_s: journey_diff,
            decel_table,
        });
    }
    Comparison {
        matrix: matrix.name.clone(),
        groups,
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

pub fn comparison_text(c: &Comparison) -> String {
    let mut s = String::new();
    writeln!(s, "matrix {}", c.matrix).unwrap();
    for g in &c.groups {
        writeln!(s, "\ngroup {} (baseline {})", g.group, g.baseline.as_deref().unwrap_or("-")).unwrap();
        writeln!(
            s,
            "{:<8} {:<9} {:>8} {:>9} {:>12} {:>14} {:>12} {:>11} {:>11}",
            "run", "role", "arrived", "rerouted", "delay_s", "ff_delay_s", "journey_s", "decel_mean", "decel_var"
        )
        .unwrap();
        for r in &g.runs {
            writeln!(
                s,
                "{:<8} {:<9} {:>8} {:>9} {:>12} {:>14.3} {:>12.3} {:>11.4} {:>11.4}",
                r.id,
                r.role.to_string(),
                r.arrived,
                r.reroute_count,
                opt(r.mean_delay_s, 3),
                r.mean_free_flow_delay_s,
                r.mean_journey_time_s,
                r.decel.mean,
                r.decel.variance
            )
            .unwrap();
        }
        writeln!(s, "delay ratio disabled/enabled: {}", opt(g.delay_ratio_disabled_over_enabled, 3)).unwrap();
        writeln!(s, "journey time enabled - disabled (s): {}", opt(g.journey_time_difference_s, 3)).unwrap();
        writeln!(s, "deceleration {:<8} {:>10} {:>10} {:>10} {:>10}", "run", "mean", "change_%", "variance", "change_%").unwrap();
        for d in &g.decel_table {
            writeln!(
                s,
                "             {:<8} {:>10.4} {:>10} {:>10.4} {:>10}",
                d.id,
                d.mean,
                opt(d.mean_change_pct, 2),
                d.variance,
                opt(d.variance_change_pct, 2)
            )
            .unwrap();
        }
    }
    s
}

/// Runs every scenario of the matrix on `jobs` worker threads and compares
/// the results. With `out`, each run writes into `out/<id>/` and the
/// comparison goes to `out/comparison.json` and `out/comparison.txt`.
pub fn run_matrix(
    matrix: &ExperimentMatrix,
    jobs: usize,
    out: Option<&Path>,
) -> Result<(Comparison, Vec<RunOutput>), ScenarioError> {
    matrix.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ScenarioError::Matrix(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutput, ScenarioError>> = pool.install(|| {
        matrix
            .runs
            .par_iter()
            .map(|r| {
                let dir = out.map(|o| o.join(&r.id));
                run_scenario(&r.config, dir.as_deref()).map_err(|e| ScenarioError::Run {
                    id: r.id.clone(),
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let comparison = compare(matrix, &outputs);
    if let Some(dir) = out {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ScenarioError::Io { path, source }
        };
        let json = serde_json::to_string_pretty(&comparison).expect("comparison serializes") + "\n";
        fs::write(dir.join("comparison.json"), json).map_err(io(&dir.join("comparison.json")))?;
        fs::write(dir.join("comparison.txt"), comparison_text(&comparison))
            .map_err(io(&dir.join("comparison.txt")))?;
    }
    Ok((comparison, outputs))
}
