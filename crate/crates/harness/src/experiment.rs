//! Runs a configured experiment and writes its artifacts.

use std::path::{Path, PathBuf};

use lsoc::compose::{mixing_weights_discrete, ComparisonReport, CompositePolicy, DiscreteComponent};
use lsoc::discrete::{
    DesirabilityTable, DiscreteJointMdp, JointPolicy, OptimalPolicy, SolveReport, SpectralEstimate,
    TeamTrajectory,
};
use lsoc::scenarios::{GridProblem, GridScenario, Scenario, UavProblem, UavTaskChoice};
use lsoc::Execution;
use serde::Serialize;

use crate::cache::{fingerprint, read_table, write_table, CacheKey};
use crate::config::{ExperimentConfig, Mode};
use crate::error::{HarnessError, Result};
use crate::output::{
    grid_paths, grid_table, plot_csv, uav_paths, uav_table, write_file, TrajectoryTable, WeightTrace,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: String,
    /// Hex SHA-256 of the scenario block.
    pub fingerprint: String,
    pub config: ExperimentConfig,
    /// Kernel weights of each subsystem, in subsystem order.
    pub weights: Vec<Vec<f64>>,
    pub caches: Vec<CacheRecord>,
    pub spectral: Vec<SpectralEstimate>,
    pub comparisons: Vec<ComparisonReport>,
    pub runs: Vec<RunSummary>,
    pub successes: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheRecord {
    pub subsystem: usize,
    pub component: usize,
    pub file: String,
    /// Present when the table was solved by a `solve-component` run.
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: usize,
    pub success: bool,
    /// Whether each agent's episode ended (absorbed or stopped).
    pub terminated: Vec<bool>,
    pub terminal_costs: Vec<Option<f64>>,
    pub total_costs: Vec<f64>,
    /// Final distance of each unicycle to its target.
    pub final_distances: Option<Vec<f64>>,
    /// Whether any grid agent entered an obstacle cell.
    pub touched_obstacle: Option<bool>,
}

fn rel(out: &Path, path: &Path) -> String {
    path.strip_prefix(out)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

struct Writer<'a> {
    out: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        write_file(&path, contents)?;
        self.files.push(rel(self.out, &path));
        Ok(())
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialise to JSON");
    s.push('\n');
    s
}

/// Runs `config`, writing every artifact below `out`, and returns the
/// summary that was written to `summary.json`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<Summary> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut summary = Summary {
        scenario: config.scenario_key.clone(),
        mode: config.mode.as_str().to_string(),
        fingerprint: hex::encode(fingerprint(&config.scenario)),
        config: config.clone(),
        weights: Vec::new(),
        caches: Vec::new(),
        spectral: Vec::new(),
        comparisons: Vec::new(),
        runs: Vec::new(),
        successes: 0,
        files: Vec::new(),
    };
    let mut w = Writer {
        out,
        files: Vec::new(),
    };
    match &config.scenario {
        Scenario::Grid(g) => run_grid(config, g, &mut summary, &mut w)?,
        Scenario::Uav(u) => {
            let problem = u.build()?;
            run_uav(config, &problem, &mut summary, &mut w)?
        }
    }
    summary.successes = summary.runs.iter().filter(|r| r.success).count();
    w.files.push("summary.json".into());
    summary.files = w.files.clone();
    write_file(&out.join("summary.json"), to_json(&summary))?;
    Ok(summary)
}

pub fn cache_path(out: &Path, subsystem: usize, component: usize) -> PathBuf {
    out.join("cache")
        .join(format!("grid-s{subsystem}-c{component}.lsocz"))
}

/// Solves (or reloads) every component table of every subsystem.
fn grid_components(
    config: &ExperimentConfig,
    problem: &GridProblem,
    fp: [u8; 32],
    reuse: bool,
    summary: &mut Summary,
    w: &mut Writer<'_>,
) -> Result<Vec<Vec<DiscreteComponent>>> {
    let opts = config.solver.options();
    let mut all = Vec::new();
    for s in &problem.subsystems {
        let system = s.linear_system();
        let id = s.subsystem.central();
        let mut comps = Vec::new();
        for (f, h) in s.component_costs.iter().enumerate() {
            let key = CacheKey {
                fingerprint: fp,
                subsystem: id as u32,
                component: f as u32,
                n_states: s.mdp.n_states() as u64,
            };
            let path = cache_path(w.out, id, f);
            let cached = if reuse && path.exists() {
                match read_table(&path, &key) {
                    Ok(t) => Some(t),
                    Err(HarnessError::Cache { reason, .. }) => {
                        println!("refused {}: {reason}; solving again", path.display());
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let comp = match cached {
                Some(table) => {
                    println!("reused {}", path.display());
                    DiscreteComponent {
                        terminal_cost: h.clone(),
                        table,
                        report: None,
                    }
                }
                None => {
                    let c = DiscreteComponent::solve(&system, h.clone(), &opts)?;
                    std::fs::create_dir_all(path.parent().expect("cache dir"))
                        .map_err(|e| HarnessError::io(&path, e))?;
                    write_table(&path, &key, &c.table)?;
                    c
                }
            };
            w.files.push(rel(w.out, &path));
            summary.caches.push(CacheRecord {
                subsystem: id,
                component: f,
                file: rel(w.out, &path),
                report: if reuse { None } else { comp.report },
            });
            comps.push(comp);
        }
        all.push(comps);
    }
    Ok(all)
}

fn grid_run_summary(
    problem: &GridProblem,
    traj: &TeamTrajectory,
    seed: u64,
    table: &TrajectoryTable,
) -> RunSummary {
    let n = traj.terminal_costs.len();
    RunSummary {
        seed,
        steps: traj.steps(),
        success: traj.success,
        terminated: (0..n)
            .map(|i| traj.terminal_costs[i].is_some() || traj.success)
            .collect(),
        terminal_costs: traj.terminal_costs.clone(),
        total_costs: (0..n)
            .map(|i| table.running_total(i + 1) + traj.terminal_costs[i].unwrap_or(0.0))
            .collect(),
        final_distances: None,
        touched_obstacle: Some(problem.touches_obstacle(traj)),
    }
}

fn run_grid(
    config: &ExperimentConfig,
    g: &GridScenario,
    summary: &mut Summary,
    w: &mut Writer<'_>,
) -> Result<()> {
    let problem = g.build()?;
    let fp = fingerprint(&config.scenario);
    summary.weights = problem
        .subsystems
        .iter()
        .map(|s| s.weights())
        .collect::<lsoc::Result<_>>()?;
    if config.mode == Mode::Weights {
        return w.write("weights.json", to_json(&summary.weights));
    }

    let reuse = config.mode != Mode::SolveComponent;
    let comps = grid_components(config, &problem, fp, reuse, summary, w)?;
    let opts = config.solver.options();

    match config.mode {
        Mode::SolveComponent => {
            summary.spectral = problem
                .subsystems
                .iter()
                .map(|s| s.linear_system().spectral_radius(Execution::Parallel))
                .collect();
        }
        Mode::Compare => {
            for (s, c) in problem.subsystems.iter().zip(&comps) {
                let report = lsoc::compose::compare_composite_vs_direct(
                    &s.mdp,
                    &s.linear_system(),
                    c,
                    &s.weights()?,
                    &opts,
                    config.solver.compare_tol,
                )?;
                summary.comparisons.push(report);
            }
            w.write("compare.json", to_json(&summary.comparisons))?;
        }
        Mode::RunComponent => {
            let f = config.component.expect("validated");
            let mdps = problem
                .subsystems
                .iter()
                .map(|s| s.task_mdp(f))
                .collect::<lsoc::Result<Vec<_>>>()?;
            let policies: Vec<OptimalPolicy<'_>> = mdps
                .iter()
                .zip(&comps)
                .map(|(m, c)| OptimalPolicy {
                    mdp: m,
                    table: &c[f].table,
                })
                .collect();
            let dyn_policies: Vec<&dyn JointPolicy> =
                policies.iter().map(|p| p as &dyn JointPolicy).collect();
            grid_runs(config, &problem, &mdps, &dyn_policies, Some(f), None, summary, w)?;
        }
        Mode::Compose => {
            let mdps = problem
                .subsystems
                .iter()
                .map(|s| s.composite_mdp())
                .collect::<lsoc::Result<Vec<_>>>()?;
            let policies: Vec<CompositePolicy<'_>> = mdps
                .iter()
                .zip(&comps)
                .zip(&summary.weights)
                .map(|((m, c), wt)| CompositePolicy {
                    mdp: m,
                    weights: wt.clone(),
                    tables: c.iter().map(|x| &x.table).collect(),
                })
                .collect();
            let dyn_policies: Vec<&dyn JointPolicy> =
                policies.iter().map(|p| p as &dyn JointPolicy).collect();
            let weights = summary.weights.clone();
            let tables: Vec<Vec<&DesirabilityTable>> = comps
                .iter()
                .map(|c| c.iter().map(|x| &x.table).collect())
                .collect();
            grid_runs(
                config,
                &problem,
                &mdps,
                &dyn_policies,
                None,
                Some((&weights, &tables)),
                summary,
                w,
            )?;
        }
        Mode::Weights => unreachable!("handled above"),
    }
    Ok(())
}

type Mixing<'a> = (&'a [Vec<f64>], &'a [Vec<&'a DesirabilityTable>]);

#[allow(clippy::too_many_arguments)]
fn grid_runs(
    config: &ExperimentConfig,
    problem: &GridProblem,
    mdps: &[DiscreteJointMdp],
    policies: &[&dyn JointPolicy],
    task: Option<usize>,
    mixing: Option<Mixing<'_>>,
    summary: &mut Summary,
    w: &mut Writer<'_>,
) -> Result<()> {
    let mdp_refs: Vec<&DiscreteJointMdp> = mdps.iter().collect();
    for seed in (0..config.runs as u64).map(|k| config.seed + k) {
        let traj = problem.rollout(&mdp_refs, policies, task, seed)?;
        let table = grid_table(&problem.scenario, &traj);
        w.write(&format!("trajectory-s{seed}.csv"), table.to_csv())?;
        w.write(
            &format!("plot_xy-s{seed}.csv"),
            plot_csv(&grid_paths(&problem.scenario, &traj)),
        )?;
        if let Some((weights, tables)) = mixing {
            let mut trace = WeightTrace {
                n_components: tables[0].len(),
                rows: Vec::new(),
            };
            let mut absorbed = vec![false; mdps.len()];
            for (t, locals) in traj.locals.iter().take(traj.steps()).enumerate() {
                for (k, m) in mdps.iter().enumerate() {
                    let members: Vec<usize> = m.space().members().iter().map(|&a| locals[a - 1]).collect();
                    let s = m.space().flatten(&members)?;
                    absorbed[k] |= m.is_boundary(s);
                    if absorbed[k] {
                        continue;
                    }
                    let mix = mixing_weights_discrete(m, &weights[k], &tables[k], s)?;
                    trace.rows.push((t as f64, k + 1, mix));
                }
            }
            w.write(&format!("weights-s{seed}.csv"), trace.to_csv())?;
        }
        summary.runs.push(grid_run_summary(problem, &traj, seed, &table));
    }
    Ok(())
}

fn run_uav(
    config: &ExperimentConfig,
    problem: &UavProblem,
    summary: &mut Summary,
    w: &mut Writer<'_>,
) -> Result<()> {
    summary.weights = problem
        .subsystems
        .iter()
        .map(|s| s.weights())
        .collect::<lsoc::Result<_>>()?;
    let task = match config.mode {
        Mode::Weights => return w.write("weights.json", to_json(&summary.weights)),
        Mode::RunComponent => UavTaskChoice::Component(config.component.expect("validated")),
        Mode::Compose => UavTaskChoice::Composite,
        Mode::SolveComponent | Mode::Compare => unreachable!("rejected by validation"),
    };
    let params = config.sampling.params();
    for seed in (0..config.runs as u64).map(|k| config.seed + k) {
        let run = problem.run(task, &params, config.control, seed)?;
        let table = uav_table(&run);
        w.write(&format!("trajectory-s{seed}.csv"), table.to_csv())?;
        w.write(&format!("plot_xy-s{seed}.csv"), plot_csv(&uav_paths(&run)))?;
        if task == UavTaskChoice::Composite {
            let mut trace = WeightTrace {
                n_components: problem.subsystems[0].n_components(),
                rows: Vec::new(),
            };
            for (k, mix) in run.mixing.iter().enumerate() {
                for (i, m) in mix.iter().enumerate().filter(|(_, m)| !m.is_empty()) {
                    trace.rows.push((k as f64 * run.dt, i + 1, m.clone()));
                }
            }
            w.write(&format!("weights-s{seed}.csv"), trace.to_csv())?;
        }
        let n = run.terminal_costs.len();
        let radius = problem.scenario.acceptance_radius;
        summary.runs.push(RunSummary {
            seed,
            steps: run.steps(),
            success: run.success,
            terminated: run.final_distances.iter().map(|d| *d <= radius).collect(),
            terminal_costs: run.terminal_costs.iter().map(|h| Some(*h)).collect(),
            total_costs: (0..n)
                .map(|a| table.running_total(a + 1) + run.terminal_costs[a])
                .collect(),
            final_distances: Some(run.final_distances.clone()),
            touched_obstacle: None,
        });
    }
    Ok(())
}
