//! Monte Carlo experiment harness, two-sample statistics, and report
//! emission.
//!
//! A sweep generates procedural caves, poses two endpoint problems in
//! each (both endpoints in air, both under water), and flies each problem
//! with the planner modes that can attempt it: the hybrid planner takes
//! both, the single-medium planners take their own medium only. Records
//! carry the stop-stop graph prediction next to the integrated actual
//! energy so the analysis can quantify how well table costs predict
//! flight costs, and failed runs are charged the whole battery.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mission::{run_mission, MissionConfig};
use crate::planner::{
    compute_c_large, CostModel, EdgeCasePolicy, PlannerConfig, PlannerMode, PricingMode,
};
use crate::voxelworld::{
    generate_cave, initial_map, CaveParams, Environment, Medium, Voxel, WorldMap,
};

// ---------------------------------------------------------------------------
// Two-sample statistics
// ---------------------------------------------------------------------------

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Pearson χ² on the 2×2 contingency table of two solve proportions
/// (1 degree of freedom, no continuity correction). Returns
/// `(statistic, p)`.
pub fn chi2_proportions(
    a_solved: usize,
    a_total: usize,
    b_solved: usize,
    b_total: usize,
) -> Result<(f64, f64)> {
    if a_total == 0 || b_total == 0 || a_solved > a_total || b_solved > b_total {
        return Err(Error::InvalidParameter(format!(
            "bad proportions {a_solved}/{a_total}, {b_solved}/{b_total}"
        )));
    }
    let o = [
        [a_solved as f64, (a_total - a_solved) as f64],
        [b_solved as f64, (b_total - b_solved) as f64],
    ];
    let rows = [o[0][0] + o[0][1], o[1][0] + o[1][1]];
    let cols = [o[0][0] + o[1][0], o[0][1] + o[1][1]];
    let n = rows[0] + rows[1];
    if cols[0] == 0.0 || cols[1] == 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate contingency table: a zero column margin".into(),
        ));
    }
    let mut stat = 0.0;
    for (i, row) in o.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            stat += (obs - e) * (obs - e) / e;
        }
    }
    let p = ChiSquared::new(1.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sf(stat);
    Ok((stat, p))
}

/// Two-sample F test of equal variances; two-sided p. Returns
/// `(statistic, p)` with the statistic = var(xs)/var(ys).
pub fn f_test(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 3 || ys.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 samples per side, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (vx, vy) = (variance(xs), variance(ys));
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate sample variance in F test".into(),
        ));
    }
    let stat = vx / vy;
    let dist = FisherSnedecor::new((xs.len() - 1) as f64, (ys.len() - 1) as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = (2.0 * dist.sf(stat).min(dist.cdf(stat))).min(1.0);
    Ok((stat, p))
}

/// Two-sample t test; pooled variance when `equal_var`, Welch otherwise.
/// Two-sided p. Returns `(statistic, p)`.
pub fn t_test(xs: &[f64], ys: &[f64], equal_var: bool) -> Result<(f64, f64)> {
    if xs.len() < 3 || ys.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 samples per side, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (v1, v2) = (variance(xs), variance(ys));
    if v1 <= 0.0 && v2 <= 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate sample variance in t test".into(),
        ));
    }
    let (stat, dof) = if equal_var {
        let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
        let t = (mean(xs) - mean(ys)) / (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
        (t, n1 + n2 - 2.0)
    } else {
        let se2 = v1 / n1 + v2 / n2;
        let t = (mean(xs) - mean(ys)) / se2.sqrt();
        let dof = se2 * se2
            / ((v1 / n1) * (v1 / n1) / (n1 - 1.0) + (v2 / n2) * (v2 / n2) / (n2 - 1.0));
        (t, dof)
    };
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = (2.0 * dist.sf(stat.abs())).min(1.0);
    Ok((stat, p))
}

/// Least-squares line fit with Pearson correlation and the two-sided
/// p-value of the slope-is-zero test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub p: f64,
    pub stderr: f64,
}

pub fn linregress(xs: &[f64], ys: &[f64]) -> Result<LinFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "regression needs two equal samples of at least 3, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate regression: constant abscissa".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy <= 0.0 {
        // Constant ordinate: a flat, perfectly fit line with no slope
        // evidence either way.
        return Ok(LinFit {
            slope: 0.0,
            intercept: my,
            r: 0.0,
            p: 1.0,
            stderr: 0.0,
        });
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let dof = n - 2.0;
    let resid = (syy - slope * sxy).max(0.0);
    let stderr = (resid / dof / sxx).sqrt();
    let p = if stderr == 0.0 {
        0.0
    } else {
        let t = slope / stderr;
        let dist = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(LinFit {
        slope,
        intercept,
        r,
        p,
        stderr,
    })
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

/// Which medium both endpoints of a problem live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProblemMedium {
    AirAir,
    WaterWater,
}

impl ProblemMedium {
    fn medium(&self) -> Medium {
        match self {
            ProblemMedium::AirAir => Medium::Air,
            ProblemMedium::WaterWater => Medium::Water,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            ProblemMedium::AirAir => "AirAir",
            ProblemMedium::WaterWater => "WaterWater",
        }
    }
}

fn mode_label(mode: PlannerMode) -> &'static str {
    match mode {
        PlannerMode::Hybrid => "Hybrid",
        PlannerMode::AirOnly => "AirOnly",
        PlannerMode::WaterOnly => "WaterOnly",
    }
}

/// One attempted mission in the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub env_seed: u64,
    pub problem: ProblemMedium,
    pub mode: PlannerMode,
    pub solved: bool,
    /// Stop-stop prediction of the flown route, J (0 when nothing flew).
    pub graph_cost: f64,
    /// Integrated energy, J; the full battery for unsolved runs.
    pub actual_cost: f64,
    /// Predicted route duration from the tables, s.
    pub graph_duration: f64,
    /// Straight-line length of the flown node chain, m.
    pub path_length: f64,
    pub trajectory_length: f64,
    pub mean_speed: f64,
    pub duration: f64,
    pub replans: usize,
}

/// Sweep parameters.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub envs: usize,
    pub master_seed: u64,
    pub dims: [usize; 3],
    pub resolution: f64,
    pub cave: CaveParams,
    /// Endpoint band width as a fraction of the x extent; < 0.5.
    pub margin_fraction: f64,
    /// Roadmap nodes per believed-free voxel — fixed across modes so
    /// every planner sees the same sampling density.
    pub node_density: f64,
    /// Usable energy per trial, J.
    pub battery: f64,
}

impl ExperimentConfig {
    /// Desk-scale sweep: 20 environments of 40×40×20 m caves.
    pub fn desk(master_seed: u64) -> Self {
        Self {
            envs: 20,
            master_seed,
            dims: [40, 40, 20],
            resolution: 1.0,
            cave: CaveParams::default(),
            margin_fraction: 0.15,
            node_density: 0.08,
            battery: 1.2e6,
        }
    }

    /// Full-scale sweep: 200 environments, otherwise the desk setup.
    pub fn full(master_seed: u64) -> Self {
        Self {
            envs: 200,
            ..Self::desk(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.envs == 0 {
            return Err(Error::InvalidParameter("need at least one environment".into()));
        }
        if !(self.margin_fraction > 0.0 && self.margin_fraction < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "endpoint margin fraction must lie in (0, 0.5), got {}",
                self.margin_fraction
            )));
        }
        if !(self.node_density > 0.0 && self.node_density.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "node density must be positive, got {}",
                self.node_density
            )));
        }
        if !(self.battery > 0.0 && self.battery.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "battery must be positive, got {}",
                self.battery
            )));
        }
        self.cave.validate()
    }
}

/// Records plus the number of problems skipped for want of endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub skipped: usize,
}

/// splitmix64: cheap, well-mixed derivation of per-env and per-trial
/// seeds from the master seed.
fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draw a start voxel from the low-x band and a goal from the high-x
/// band, both truly free, believed traversable, and in the requested
/// medium. Errors when either band has no candidates.
pub fn pick_endpoints(
    env: &Environment,
    map: &WorldMap,
    medium: Medium,
    margin_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Voxel, Voxel)> {
    if !(margin_fraction > 0.0 && margin_fraction < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "endpoint margin fraction must lie in (0, 0.5), got {margin_fraction}"
        )));
    }
    let extent_x = env.grid.extent().x;
    let margin = margin_fraction * extent_x;
    let res = env.grid.resolution();
    let band = |low: bool| -> Result<Vec<Voxel>> {
        let mut out = Vec::new();
        for v in env.grid.voxels() {
            if env.occupied(v)? || env.medium_of(v) != medium {
                continue;
            }
            if map.belief(v)?.is_obstacle() {
                continue;
            }
            let x = v.center(res).x;
            let inside = if low { x < margin } else { x > extent_x - margin };
            if inside {
                out.push(v);
            }
        }
        Ok(out)
    };
    let starts = band(true)?;
    let goals = band(false)?;
    if starts.is_empty() || goals.is_empty() {
        return Err(Error::NoEndpointCandidates {
            medium: format!("{medium:?}"),
            margin,
        });
    }
    let s = starts[rng.random_range(0..starts.len())];
    let g = goals[rng.random_range(0..goals.len())];
    Ok((s, g))
}

/// The fixed per-environment trial plan: the hybrid planner attempts both
/// problems, each single-medium planner its own.
const TRIAL_PLAN: [(ProblemMedium, PlannerMode); 4] = [
    (ProblemMedium::AirAir, PlannerMode::Hybrid),
    (ProblemMedium::AirAir, PlannerMode::AirOnly),
    (ProblemMedium::WaterWater, PlannerMode::Hybrid),
    (ProblemMedium::WaterWater, PlannerMode::WaterOnly),
];

fn failed_record(env_seed: u64, problem: ProblemMedium, mode: PlannerMode, battery: f64) -> TrialRecord {
    TrialRecord {
        env_seed,
        problem,
        mode,
        solved: false,
        graph_cost: 0.0,
        actual_cost: battery,
        graph_duration: 0.0,
        path_length: 0.0,
        trajectory_length: 0.0,
        mean_speed: 0.0,
        duration: 0.0,
        replans: 0,
    }
}

/// Run the sweep: per environment, generate the cave and its prior map,
/// pose the two endpoint problems, and fly the four planner trials.
/// Environments run in parallel; records come back in deterministic
/// (environment, trial-plan) order regardless of worker count. Problems
/// without endpoint candidates are skipped and counted; a mission that
/// errors out is recorded as an unsolved trial.
pub fn run_experiment(cfg: &ExperimentConfig, model: CostModel) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let per_env: Vec<(Vec<TrialRecord>, usize)> = (0..cfg.envs)
        .into_par_iter()
        .map(|i| run_environment(cfg, model, i))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (r, s) in per_env {
        records.extend(r);
        skipped += s;
    }
    Ok(ExperimentOutput { records, skipped })
}

fn run_environment(
    cfg: &ExperimentConfig,
    model: CostModel,
    index: usize,
) -> Result<(Vec<TrialRecord>, usize)> {
    let env_seed = derive_seed(cfg.master_seed, index as u64 + 1);
    let env = match generate_cave(cfg.dims, cfg.resolution, env_seed, &cfg.cave) {
        Ok(e) => e,
        Err(err) => {
            log::warn!("environment {index} (seed {env_seed}) failed to generate: {err}");
            return Ok((Vec::new(), TRIAL_PLAN.len()));
        }
    };
    let map = initial_map(&env, env_seed)?;
    let c_large = compute_c_large(&map, &model);

    // Endpoints: one pair per problem medium, shared by every mode that
    // attempts the problem.
    let mut endpoints = std::collections::HashMap::new();
    let mut skipped = 0;
    for (pi, problem) in [ProblemMedium::AirAir, ProblemMedium::WaterWater]
        .into_iter()
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(env_seed, 0x0e0e + pi as u64));
        match pick_endpoints(&env, &map, problem.medium(), cfg.margin_fraction, &mut rng) {
            Ok(pair) => {
                endpoints.insert(problem.label(), pair);
            }
            Err(err) => {
                log::warn!("environment {index}: no {} endpoints: {err}", problem.label());
            }
        }
    }

    let free_count = |mode: PlannerMode| -> usize {
        map.non_obstacle_voxels()
            .filter(|v| match mode {
                PlannerMode::Hybrid => true,
                PlannerMode::AirOnly => map.medium_of(*v) == Medium::Air,
                PlannerMode::WaterOnly => map.medium_of(*v) == Medium::Water,
            })
            .count()
    };

    let mut records = Vec::new();
    for (problem, mode) in TRIAL_PLAN {
        let Some(&(start, goal)) = endpoints.get(problem.label()) else {
            skipped += 1;
            continue;
        };
        let n_nodes = ((cfg.node_density * free_count(mode) as f64).round() as usize).max(1);
        let planner = PlannerConfig {
            n_nodes,
            r_max_edge: 5.0,
            k_new: 3,
            c_large,
            mode,
            edge_case: EdgeCasePolicy::Practical,
            pricing: PricingMode::CostModified,
        };
        // Seeded by problem, not by trial: every mode attempting the same
        // problem then samples its roadmap from the same per-medium
        // streams, so mode comparisons are paired rather than confounded
        // by sampling noise.
        let pi = problem as u64;
        let mcfg = MissionConfig {
            battery: cfg.battery,
            seed: derive_seed(env_seed, 0x7100 + pi),
            ..MissionConfig::new(planner)
        };
        let record = match run_mission(&env, &map, start, goal, &mcfg, model) {
            Ok(r) => TrialRecord {
                env_seed,
                problem,
                mode,
                solved: r.solved,
                graph_cost: r.graph_cost,
                actual_cost: if r.solved { r.actual_cost } else { cfg.battery },
                graph_duration: r.graph_duration,
                path_length: r.path_length,
                trajectory_length: r.trajectory_length,
                mean_speed: r.mean_speed,
                duration: r.duration,
                replans: r.replans,
            },
            Err(err) => {
                log::warn!(
                    "environment {index} trial {}/{} failed: {err}",
                    problem.label(),
                    mode_label(mode)
                );
                failed_record(env_seed, problem, mode, cfg.battery)
            }
        };
        records.push(record);
    }
    Ok((records, skipped))
}

// ---------------------------------------------------------------------------
// Record persistence
// ---------------------------------------------------------------------------

const RECORDS_HEADER: &str = "env_seed,problem,mode,solved,graph_cost,actual_cost,graph_duration,path_length,trajectory_length,mean_speed,duration,replans";

/// Write records as CSV; floating-point fields use the shortest exact
/// decimal form, so a read-back reproduces them bit for bit.
pub fn write_records_csv(mut w: impl Write, records: &[TrialRecord]) -> Result<()> {
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.env_seed,
            r.problem.label(),
            mode_label(r.mode),
            r.solved,
            r.graph_cost,
            r.actual_cost,
            r.graph_duration,
            r.path_length,
            r.trajectory_length,
            r.mean_speed,
            r.duration,
            r.replans
        )?;
    }
    Ok(())
}

pub fn read_records_csv(r: impl BufRead) -> Result<Vec<TrialRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("records csv", "empty file"))??;
    if header != RECORDS_HEADER {
        return Err(Error::format("records csv", "unrecognized header"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::format(
                "records csv",
                format!("row {} has {} columns, expected 12", i + 2, cols.len()),
            ));
        }
        let problem = match cols[1] {
            "AirAir" => ProblemMedium::AirAir,
            "WaterWater" => ProblemMedium::WaterWater,
            other => return Err(Error::format("records csv", format!("bad problem {other:?}"))),
        };
        let mode = match cols[2] {
            "Hybrid" => PlannerMode::Hybrid,
            "AirOnly" => PlannerMode::AirOnly,
            "WaterOnly" => PlannerMode::WaterOnly,
            other => return Err(Error::format("records csv", format!("bad mode {other:?}"))),
        };
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::format("records csv", format!("bad float {s:?}")))
        };
        out.push(TrialRecord {
            env_seed: cols[0]
                .parse()
                .map_err(|_| Error::format("records csv", format!("bad seed {:?}", cols[0])))?,
            problem,
            mode,
            solved: cols[3]
                .parse()
                .map_err(|_| Error::format("records csv", format!("bad flag {:?}", cols[3])))?,
            graph_cost: f(cols[4])?,
            actual_cost: f(cols[5])?,
            graph_duration: f(cols[6])?,
            path_length: f(cols[7])?,
            trajectory_length: f(cols[8])?,
            mean_speed: f(cols[9])?,
            duration: f(cols[10])?,
            replans: cols[11]
                .parse()
                .map_err(|_| Error::format("records csv", format!("bad count {:?}", cols[11])))?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

/// Aggregates for one (mode, problem-set) slice of the records.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassStats {
    pub label: String,
    pub trials: usize,
    pub solved: usize,
    pub solve_rate: f64,
    /// Mean/SE of actual energy over all trials (battery imputed on
    /// failures), J.
    pub mean_actual: f64,
    pub se_actual: f64,
    /// Mean/SE of the graph prediction over solved trials, J.
    pub mean_graph: f64,
    pub se_graph: f64,
    /// Mean |graph − actual|/actual × 100 over solved trials.
    pub pred_abs_pct: Option<f64>,
    /// Mean (graph − actual)/actual × 100 over solved trials; negative
    /// means the tables under-predict.
    pub pred_rel_pct: Option<f64>,
}

/// A named hypothesis-test outcome; `None` when the test was degenerate
/// or under-populated.
#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    pub label: String,
    pub n: (usize, usize),
    pub outcome: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionReport {
    pub label: String,
    pub n: usize,
    pub fit: Option<LinFit>,
}

/// Everything the text report prints.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryStats {
    pub battery: f64,
    pub skipped: usize,
    pub classes: Vec<ClassStats>,
    pub chi2: Vec<TestReport>,
    pub f_tests: Vec<TestReport>,
    pub t_tests: Vec<TestReport>,
    pub regressions: Vec<RegressionReport>,
    /// Mean energy saving of the hybrid planner on jointly solved air
    /// problems, percent of the single-medium mean.
    pub hybrid_saving_air_pct: Option<f64>,
    pub hybrid_saving_water_pct: Option<f64>,
}

fn class_stats(label: &str, rows: &[&TrialRecord], battery: f64) -> ClassStats {
    let solved: Vec<&&TrialRecord> = rows.iter().filter(|r| r.solved).collect();
    let actual: Vec<f64> = rows
        .iter()
        .map(|r| if r.solved { r.actual_cost } else { battery })
        .collect();
    let graph: Vec<f64> = solved.iter().map(|r| r.graph_cost).collect();
    let rel: Vec<f64> = solved
        .iter()
        .map(|r| (r.graph_cost - r.actual_cost) / r.actual_cost * 100.0)
        .collect();
    ClassStats {
        label: label.to_string(),
        trials: rows.len(),
        solved: solved.len(),
        solve_rate: if rows.is_empty() {
            0.0
        } else {
            solved.len() as f64 / rows.len() as f64
        },
        mean_actual: if actual.is_empty() { 0.0 } else { mean(&actual) },
        se_actual: if actual.len() > 1 {
            standard_error(&actual)
        } else {
            0.0
        },
        mean_graph: if graph.is_empty() { 0.0 } else { mean(&graph) },
        se_graph: if graph.len() > 1 {
            standard_error(&graph)
        } else {
            0.0
        },
        pred_abs_pct: if rel.is_empty() {
            None
        } else {
            Some(mean(&rel.iter().map(|x| x.abs()).collect::<Vec<_>>()))
        },
        pred_rel_pct: if rel.is_empty() { None } else { Some(mean(&rel)) },
    }
}

/// Jointly solved (hybrid, single) actual-energy pairs on one problem
/// set, matched by environment.
fn joint_energies(
    records: &[TrialRecord],
    problem: ProblemMedium,
    single: PlannerMode,
) -> (Vec<f64>, Vec<f64>) {
    let mut hybrid = Vec::new();
    let mut other = Vec::new();
    let mut seeds: Vec<u64> = records
        .iter()
        .filter(|r| r.problem == problem)
        .map(|r| r.env_seed)
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    for seed in seeds {
        let find = |mode: PlannerMode| {
            records
                .iter()
                .find(|r| r.env_seed == seed && r.problem == problem && r.mode == mode)
        };
        if let (Some(h), Some(s)) = (find(PlannerMode::Hybrid), find(single)) {
            if h.solved && s.solved {
                hybrid.push(h.actual_cost);
                other.push(s.actual_cost);
            }
        }
    }
    (hybrid, other)
}

fn test_report(label: &str, n: (usize, usize), out: Result<(f64, f64)>) -> TestReport {
    TestReport {
        label: label.to_string(),
        n,
        outcome: out.ok(),
    }
}

/// Compute every aggregate and hypothesis test the report prints.
///
/// "All scenarios" rows treat the problems a single-medium planner cannot
/// attempt (its endpoints lie in the other medium) as failures, which is
/// how the hybrid planner's coverage advantage becomes visible in one
/// number.
pub fn summarize(records: &[TrialRecord], battery: f64, skipped: usize) -> SummaryStats {
    let slice = |mode: PlannerMode, problem: Option<ProblemMedium>| -> Vec<&TrialRecord> {
        records
            .iter()
            .filter(|r| r.mode == mode && problem.map(|p| r.problem == p).unwrap_or(true))
            .collect()
    };
    let hybrid_air = slice(PlannerMode::Hybrid, Some(ProblemMedium::AirAir));
    let hybrid_water = slice(PlannerMode::Hybrid, Some(ProblemMedium::WaterWater));
    let hybrid_all = slice(PlannerMode::Hybrid, None);
    let air_only = slice(PlannerMode::AirOnly, Some(ProblemMedium::AirAir));
    let water_only = slice(PlannerMode::WaterOnly, Some(ProblemMedium::WaterWater));

    let mut classes = vec![
        class_stats("hybrid / air problems", &hybrid_air, battery),
        class_stats("hybrid / water problems", &hybrid_water, battery),
        class_stats("hybrid / all problems", &hybrid_all, battery),
        class_stats("air-only / air problems", &air_only, battery),
        class_stats("water-only / water problems", &water_only, battery),
    ];
    // All-scenario synthesis: single-medium planners auto-fail the other
    // medium's problems.
    let all_problems = hybrid_all.len();
    for (label, rows) in [
        ("air-only / all scenarios", &air_only),
        ("water-only / all scenarios", &water_only),
    ] {
        let mut c = class_stats(label, rows, battery);
        let phantom = all_problems.saturating_sub(rows.len());
        let total_actual = c.mean_actual * c.trials as f64 + battery * phantom as f64;
        c.trials += phantom;
        c.solve_rate = if c.trials > 0 {
            c.solved as f64 / c.trials as f64
        } else {
            0.0
        };
        c.mean_actual = if c.trials > 0 {
            total_actual / c.trials as f64
        } else {
            0.0
        };
        c.se_actual = 0.0; // mixed imputation; a plain SE would mislead
        classes.push(c);
    }

    let count = |rows: &[&TrialRecord]| {
        (
            rows.iter().filter(|r| r.solved).count(),
            rows.len(),
        )
    };
    let (ha_s, ha_n) = count(&hybrid_air);
    let (hw_s, hw_n) = count(&hybrid_water);
    let (h_s, h_n) = count(&hybrid_all);
    let (a_s, a_n) = count(&air_only);
    let (w_s, w_n) = count(&water_only);

    let chi2 = vec![
        test_report(
            "solve rate: hybrid vs air-only (air problems)",
            (ha_n, a_n),
            chi2_proportions(ha_s, ha_n, a_s, a_n),
        ),
        test_report(
            "solve rate: hybrid vs water-only (water problems)",
            (hw_n, w_n),
            chi2_proportions(hw_s, hw_n, w_s, w_n),
        ),
        test_report(
            "solve rate: hybrid vs air-only (all scenarios)",
            (h_n, h_n),
            chi2_proportions(h_s, h_n, a_s, h_n.max(1)),
        ),
        test_report(
            "solve rate: hybrid vs water-only (all scenarios)",
            (h_n, h_n),
            chi2_proportions(h_s, h_n, w_s, h_n.max(1)),
        ),
    ];

    let (hyb_air_e, air_e) = joint_energies(records, ProblemMedium::AirAir, PlannerMode::AirOnly);
    let (hyb_wat_e, wat_e) =
        joint_energies(records, ProblemMedium::WaterWater, PlannerMode::WaterOnly);
    let f_tests = vec![
        test_report(
            "energy variance: hybrid vs air-only (jointly solved air problems)",
            (hyb_air_e.len(), air_e.len()),
            f_test(&hyb_air_e, &air_e),
        ),
        test_report(
            "energy variance: hybrid vs water-only (jointly solved water problems)",
            (hyb_wat_e.len(), wat_e.len()),
            f_test(&hyb_wat_e, &wat_e),
        ),
    ];
    let t_tests = vec![
        test_report(
            "mean energy: hybrid vs air-only (jointly solved air problems)",
            (hyb_air_e.len(), air_e.len()),
            t_test(&hyb_air_e, &air_e, true),
        ),
        test_report(
            "mean energy: hybrid vs water-only (jointly solved water problems)",
            (hyb_wat_e.len(), wat_e.len()),
            t_test(&hyb_wat_e, &wat_e, true),
        ),
    ];

    let saving = |hyb: &[f64], single: &[f64]| -> Option<f64> {
        if hyb.is_empty() || single.is_empty() {
            return None;
        }
        let (mh, ms) = (mean(hyb), mean(single));
        if ms == 0.0 {
            None
        } else {
            Some((ms - mh) / ms * 100.0)
        }
    };

    // Prediction-quality regressions over solved trials of every mode.
    let solved: Vec<&TrialRecord> = records.iter().filter(|r| r.solved).collect();
    let lengths: Vec<f64> = solved.iter().map(|r| r.trajectory_length).collect();
    let rel: Vec<f64> = solved
        .iter()
        .map(|r| (r.graph_cost - r.actual_cost) / r.actual_cost * 100.0)
        .collect();
    let abs: Vec<f64> = rel.iter().map(|x| x.abs()).collect();
    let mut speed_inc = Vec::new();
    let mut rel_for_speed = Vec::new();
    for r in &solved {
        if r.graph_duration > 0.0 && r.path_length > 0.0 {
            let predicted = r.path_length / r.graph_duration;
            speed_inc.push((r.mean_speed - predicted) / predicted * 100.0);
            rel_for_speed.push((r.graph_cost - r.actual_cost) / r.actual_cost * 100.0);
        }
    }
    let regressions = vec![
        RegressionReport {
            label: "relative prediction difference vs trajectory length".into(),
            n: solved.len(),
            fit: linregress(&lengths, &rel).ok(),
        },
        RegressionReport {
            label: "absolute prediction difference vs trajectory length".into(),
            n: solved.len(),
            fit: linregress(&lengths, &abs).ok(),
        },
        RegressionReport {
            label: "relative prediction difference vs mean-speed increase".into(),
            n: speed_inc.len(),
            fit: linregress(&speed_inc, &rel_for_speed).ok(),
        },
    ];

    SummaryStats {
        battery,
        skipped,
        classes,
        chi2,
        f_tests,
        t_tests,
        regressions,
        hybrid_saving_air_pct: saving(&hyb_air_e, &air_e),
        hybrid_saving_water_pct: saving(&hyb_wat_e, &wat_e),
    }
}

/// Render the summary as a plain-text report.
pub fn write_summary(mut w: impl Write, s: &SummaryStats) -> Result<()> {
    writeln!(w, "mission sweep summary")?;
    writeln!(w, "=====================")?;
    writeln!(w, "battery per trial: {} J", s.battery)?;
    writeln!(w, "problems skipped (no endpoints): {}", s.skipped)?;
    writeln!(w)?;
    writeln!(
        w,
        "{:<32} {:>7} {:>7} {:>7} {:>14} {:>12} {:>14} {:>12} {:>9} {:>9}",
        "class", "trials", "solved", "rate", "actual mean J", "SE", "graph mean J", "SE", "|pred|%", "pred%"
    )?;
    for c in &s.classes {
        writeln!(
            w,
            "{:<32} {:>7} {:>7} {:>7.3} {:>14.1} {:>12.1} {:>14.1} {:>12.1} {:>9} {:>9}",
            c.label,
            c.trials,
            c.solved,
            c.solve_rate,
            c.mean_actual,
            c.se_actual,
            c.mean_graph,
            c.se_graph,
            c.pred_abs_pct
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
            c.pred_rel_pct
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
        )?;
    }
    writeln!(w)?;
    if let Some(pct) = s.hybrid_saving_air_pct {
        writeln!(
            w,
            "hybrid mean energy saving vs air-only on jointly solved air problems: {pct:.2}%"
        )?;
    }
    if let Some(pct) = s.hybrid_saving_water_pct {
        writeln!(
            w,
            "hybrid mean energy saving vs water-only on jointly solved water problems: {pct:.2}%"
        )?;
    }
    writeln!(w)?;
    let print_tests = |w: &mut dyn Write, title: &str, tests: &[TestReport]| -> Result<()> {
        writeln!(w, "{title}")?;
        for t in tests {
            match t.outcome {
                Some((stat, p)) => writeln!(
                    w,
                    "  {} [n = {}/{}]: statistic {stat:.6}, p = {p:.6e}",
                    t.label, t.n.0, t.n.1
                )?,
                None => writeln!(
                    w,
                    "  {} [n = {}/{}]: not computable (degenerate or too few samples)",
                    t.label, t.n.0, t.n.1
                )?,
            }
        }
        Ok(())
    };
    print_tests(&mut w, "chi-square tests (1 dof)", &s.chi2)?;
    print_tests(&mut w, "F tests (two-sided)", &s.f_tests)?;
    print_tests(&mut w, "t tests (pooled, two-sided)", &s.t_tests)?;
    writeln!(w, "regressions")?;
    for r in &s.regressions {
        match &r.fit {
            Some(f) => writeln!(
                w,
                "  {} [n = {}]: slope {:.6}, intercept {:.6}, r = {:.6}, p = {:.6e}, stderr {:.6}",
                r.label, r.n, f.slope, f.intercept, f.r, f.p, f.stderr
            )?,
            None => writeln!(w, "  {} [n = {}]: not computable", r.label, r.n)?,
        }
    }
    writeln!(w)?;
    writeln!(
        w,
        "note: each record is one attempted mission; solved counts therefore"
    )?;
    writeln!(
        w,
        "count trajectories per attempted problem, and unsolved runs are charged"
    )?;
    writeln!(w, "the full battery.")?;
    Ok(())
}

/// Emit the per-figure CSVs: prediction difference against trajectory
/// length and against mean-speed increase (solved trials only), plus the
/// per-class summary table.
pub fn write_figure_csvs(dir: &Path, records: &[TrialRecord], s: &SummaryStats) -> Result<()> {
    let mut len_csv = std::fs::File::create(dir.join("fig_prediction_vs_length.csv"))?;
    writeln!(
        len_csv,
        "mode,problem,trajectory_length,rel_prediction_pct,abs_prediction_pct"
    )?;
    for r in records.iter().filter(|r| r.solved) {
        let rel = (r.graph_cost - r.actual_cost) / r.actual_cost * 100.0;
        writeln!(
            len_csv,
            "{},{},{},{},{}",
            mode_label(r.mode),
            r.problem.label(),
            r.trajectory_length,
            rel,
            rel.abs()
        )?;
    }
    let mut spd_csv = std::fs::File::create(dir.join("fig_prediction_vs_speed.csv"))?;
    writeln!(
        spd_csv,
        "mode,problem,speed_increase_pct,rel_prediction_pct"
    )?;
    for r in records.iter().filter(|r| r.solved) {
        if r.graph_duration > 0.0 && r.path_length > 0.0 {
            let predicted = r.path_length / r.graph_duration;
            let inc = (r.mean_speed - predicted) / predicted * 100.0;
            let rel = (r.graph_cost - r.actual_cost) / r.actual_cost * 100.0;
            writeln!(
                spd_csv,
                "{},{},{},{}",
                mode_label(r.mode),
                r.problem.label(),
                inc,
                rel
            )?;
        }
    }
    let mut cls_csv = std::fs::File::create(dir.join("fig_class_summary.csv"))?;
    writeln!(
        cls_csv,
        "class,trials,solved,solve_rate,mean_actual,se_actual,mean_graph,se_graph"
    )?;
    for c in &s.classes {
        writeln!(
            cls_csv,
            "{},{},{},{},{},{},{},{}",
            c.label, c.trials, c.solved, c.solve_rate, c.mean_actual, c.se_actual, c.mean_graph, c.se_graph
        )?;
    }
    Ok(())
}


#[cfg(test)]
mod probe_desk {
    use super::*;
    use crate::costtable::{build_table, TableParams};
    use crate::mission::run_mission_traced;
    use crate::voxelworld::Medium;

    #[test]
    fn desk_probe() {
        let _ = env_logger::builder()
            .is_test(true)
            .filter_level(log::LevelFilter::Warn)
            .try_init();
        let t = std::time::Instant::now();
        let air = build_table(Medium::Air, &TableParams::air()).unwrap();
        let water = build_table(Medium::Water, &TableParams::water()).unwrap();
        eprintln!("tables {:?}", t.elapsed());
        let model = CostModel { air: &air, water: &water };
        let cfg = ExperimentConfig::desk(2026);
        let t = std::time::Instant::now();
        let out = run_experiment(&cfg, model).unwrap();
        eprintln!("sweep {:?} records {} skipped {}", t.elapsed(), out.records.len(), out.skipped);
        let s = summarize(&out.records, cfg.battery, out.skipped);
        let mut buf = Vec::new();
        write_summary(&mut buf, &s).unwrap();
        std::fs::write("/tmp/desk_summary.txt", &buf).unwrap();
        eprintln!("{}", String::from_utf8(buf).unwrap());
        let _ = run_mission_traced;
        panic!("probe");
    }
}
