//! Baselines (nearest-depot, k-means clustering with restarts), gap
//! metrics, experiment drivers for the generated-instance protocols
//! and the benchmark file suites, and CSV/JSON report emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clrp::{clrp_solve, io::load_clrp};
use crate::cvrp::{iteration_budget_for, solve_heuristic, SolverConfig, ALL_OPS};
use crate::error::{Error, Result};
use crate::estimators::{estimator_gap, CostEstimator};
use crate::ga::{
    nearest_depot_genes, solve_mdvrp, table3_time_limit, DecompositionProblem, PipelineConfig,
};
use crate::geom::{derive_seed, Point};
use crate::instances::generate::generate_mdvrp;
use crate::instances::io::load_mdvrp;
use crate::instances::types::{DemandModel, InstanceSpec, MdvrpInstance, Positioning};

/// Nearest-depot assignment baseline: gene i is the closest depot,
/// ties to the lower index. Feasibility is checked downstream.
pub fn nda_assign(inst: &MdvrpInstance) -> Vec<usize> {
    nearest_depot_genes(inst)
}

/// Signed percentage gap against a positive reference; negative means
/// cheaper than the reference.
pub fn gap(cost: f64, reference: f64) -> Result<f64> {
    estimator_gap(cost, reference)
}

/// Route a fixed assignment with the built-in solver (used for the
/// baselines). With `enforce_fleet` the per-depot vehicle bounds apply
/// and overloaded assignments come back as None (reported infeasible);
/// without it only vehicle capacity binds, mirroring how the reference
/// baseline routes clustering assignments.
fn route_assignment(
    inst: &MdvrpInstance,
    genes: &[usize],
    enforce_fleet: bool,
    deterministic: bool,
    time_factor: f64,
    seed: u64,
) -> Option<f64> {
    if enforce_fleet {
        let loads = inst.loads(genes);
        if inst.total_overload(&loads) > 0.0 {
            return None;
        }
    }
    let time_limit = table3_time_limit(inst.n(), inst.num_depots()) * time_factor;
    let budget = deterministic.then(|| iteration_budget_for(time_limit));
    let subs = crate::instances::decompose(inst, genes).ok()?;
    let mut total = 0.0;
    for sub in subs {
        let mut sub_inst = sub.instance;
        if !enforce_fleet {
            sub_inst.fleet_limit = None;
        }
        let cfg = SolverConfig {
            time_limit,
            iteration_budget: budget,
            ops: ALL_OPS.to_vec(),
            seed: derive_seed(seed, &[0xBA5E, sub.depot_index as u64]),
        };
        total += solve_heuristic(&sub_inst, &cfg).ok()?.cost;
    }
    Some(total)
}

/// K-means outcome: the clustering-derived assignment with the best
/// routed cost over the restarts.
#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub assignment: Vec<usize>,
    pub cost: f64,
    pub elapsed: f64,
    pub restarts: usize,
}

/// Lloyd's clustering into one cluster per depot with random centroid
/// initialization, greedy one-to-one cluster/depot matching, and the
/// built-in solver on each induced subproblem; repeated `restarts`
/// times keeping the best routed cost.
pub fn kmeans_assign(
    inst: &MdvrpInstance,
    seed: u64,
    restarts: usize,
    deterministic: bool,
    time_factor: f64,
) -> Result<KmeansOutcome> {
    let start = Instant::now();
    let d = inst.num_depots();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x4EA5, restart as u64]));
        let mut centroids: Vec<Point> = inst
            .customers
            .choose_multiple(&mut rng, d)
            .map(|c| c.pos)
            .collect();
        let mut assign = vec![0usize; inst.n()];
        for _ in 0..100 {
            let mut changed = false;
            for (i, c) in inst.customers.iter().enumerate() {
                let k = (0..d)
                    .min_by(|&a, &b| {
                        c.pos
                            .dist_sq(&centroids[a])
                            .partial_cmp(&c.pos.dist_sq(&centroids[b]))
                            .unwrap()
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                if assign[i] != k {
                    assign[i] = k;
                    changed = true;
                }
            }
            for k in 0..d {
                let members: Vec<&crate::instances::types::Customer> = inst
                    .customers
                    .iter()
                    .zip(&assign)
                    .filter(|&(_, &a)| a == k)
                    .map(|(c, _)| c)
                    .collect();
                if members.is_empty() {
                    // Reseed an empty cluster on a random customer.
                    centroids[k] = inst.customers[rng.gen_range(0..inst.n())].pos;
                    changed = true;
                } else {
                    let inv = 1.0 / members.len() as f64;
                    centroids[k] = Point::new(
                        members.iter().map(|c| c.pos.x).sum::<f64>() * inv,
                        members.iter().map(|c| c.pos.y).sum::<f64>() * inv,
                    );
                }
            }
            if !changed {
                break;
            }
        }
        // Greedy bijective matching of clusters to depots.
        let mut cluster_of_depot = vec![usize::MAX; d];
        let mut pairs: Vec<(f64, usize, usize)> = (0..d)
            .flat_map(|k| {
                (0..d).map(move |dep| (k, dep))
            })
            .map(|(k, dep)| (centroids[k].dist(&inst.depots[dep]), k, dep))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut cluster_used = vec![false; d];
        let mut depot_used = vec![false; d];
        for (_, k, dep) in pairs {
            if !cluster_used[k] && !depot_used[dep] {
                cluster_used[k] = true;
                depot_used[dep] = true;
                cluster_of_depot[dep] = k;
            }
        }
        let mut depot_of_cluster = vec![usize::MAX; d];
        for (dep, &k) in cluster_of_depot.iter().enumerate() {
            depot_of_cluster[k] = dep;
        }
        let genes: Vec<usize> = assign.iter().map(|&k| depot_of_cluster[k]).collect();
        if let Some(cost) = route_assignment(
            inst,
            &genes,
            false,
            deterministic,
            time_factor,
            derive_seed(seed, &[0x4EA6, restart as u64]),
        ) {
            if best.as_ref().map_or(true, |(b, _)| cost < *b) {
                best = Some((cost, genes));
            }
        }
    }
    let (cost, assignment) = best.ok_or_else(|| {
        Error::Infeasible("every clustering restart produced an unroutable assignment".into())
    })?;
    Ok(KmeansOutcome {
        assignment,
        cost,
        elapsed: start.elapsed().as_secs_f64(),
        restarts,
    })
}

/// Experiment suites: generated protocols (in-range sizes, out-of-range
/// sizes, the eight distribution classes) and the benchmark file sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    T,
    O,
    D(u8),
    Cordeau,
    Barreto,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let u = s.to_ascii_uppercase();
        match u.as_str() {
            "T" => Ok(Suite::T),
            "O" => Ok(Suite::O),
            "CORDEAU" => Ok(Suite::Cordeau),
            "BARRETO" => Ok(Suite::Barreto),
            _ => {
                if let Some(rest) = u.strip_prefix('D') {
                    let class: u8 = rest
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown suite '{s}'")))?;
                    if (1..=8).contains(&class) {
                        return Ok(Suite::D(class));
                    }
                }
                Err(Error::Config(format!("unknown suite '{s}'")))
            }
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Suite::T => write!(f, "T"),
            Suite::O => write!(f, "O"),
            Suite::D(c) => write!(f, "D{c}"),
            Suite::Cordeau => write!(f, "cordeau"),
            Suite::Barreto => write!(f, "barreto"),
        }
    }
}

/// Positioning and demand rules for the eight distribution classes.
pub fn d_class_rules(class: u8) -> (Positioning, DemandModel) {
    match class {
        1 => (Positioning::C, DemandModel::Uniform),
        2 => (Positioning::RC, DemandModel::Uniform),
        3 => (Positioning::R, DemandModel::Unitary),
        4 => (Positioning::R, DemandModel::Quadrant),
        5 => (Positioning::C, DemandModel::Unitary),
        6 => (Positioning::C, DemandModel::Quadrant),
        7 => (Positioning::RC, DemandModel::Unitary),
        8 => (Positioning::RC, DemandModel::Quadrant),
        _ => panic!("distribution class out of range"),
    }
}

/// Driver settings. Generated suites use desk-scale sizes by default;
/// the subproblem-size band controls the in-range/out-of-range split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instances: usize,
    pub depot_range: (usize, usize),
    /// In-range band for customers-per-depot.
    pub ratio_range: (usize, usize),
    pub grid_size: u32,
    pub vehicle_capacity: u32,
    pub pipeline: PipelineConfig,
    pub kmeans_restarts: usize,
    /// Directory with benchmark files for the file-based suites.
    pub data_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instances: 5,
            depot_range: (2, 3),
            ratio_range: (10, 40),
            grid_size: 1000,
            vehicle_capacity: 300,
            pipeline: PipelineConfig::default(),
            kmeans_restarts: 10,
            data_dir: None,
            seed: 0,
        }
    }
}

/// One experiment row: costs, gaps, and wall times for a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub suite: String,
    pub instance: String,
    pub n: usize,
    pub d: usize,
    pub repeat: usize,
    pub nda_cost: Option<f64>,
    pub kmeans_cost: Option<f64>,
    pub kmeans_time: f64,
    pub predicted_cost: f64,
    pub actual_cost: f64,
    pub search_time: f64,
    pub total_time: f64,
    pub gap_vs_nda: Option<f64>,
    pub gap_vs_kmeans: Option<f64>,
}

/// Per-instance aggregate across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub instance: String,
    pub repeats: usize,
    pub avg_cost: f64,
    pub best_cost: f64,
    pub avg_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
}

fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.suite.clone(), r.instance.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(suite, instance)| {
            let group: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.suite == suite && r.instance == instance)
                .collect();
            let n = group.len() as f64;
            SummaryRow {
                suite,
                instance,
                repeats: group.len(),
                avg_cost: group.iter().map(|r| r.actual_cost).sum::<f64>() / n,
                best_cost: group
                    .iter()
                    .map(|r| r.actual_cost)
                    .fold(f64::INFINITY, f64::min),
                avg_time: group.iter().map(|r| r.total_time).sum::<f64>() / n,
            }
        })
        .collect()
}

fn generated_instance(
    suite: Suite,
    cfg: &ExperimentConfig,
    index: usize,
) -> Result<MdvrpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x9E4, index as u64]));
    let d = rng.gen_range(cfg.depot_range.0..=cfg.depot_range.1);
    let ratio = match suite {
        Suite::O => {
            // Out of range: half the draws below the band, half above.
            if rng.gen_bool(0.5) {
                rng.gen_range((cfg.ratio_range.0 / 2).max(2)..cfg.ratio_range.0)
            } else {
                rng.gen_range(cfg.ratio_range.1 + 1..=cfg.ratio_range.1 * 2)
            }
        }
        _ => rng.gen_range(cfg.ratio_range.0..=cfg.ratio_range.1),
    };
    let n = (d * ratio).max(2);
    let (positioning, demand) = match suite {
        Suite::D(class) => d_class_rules(class),
        _ => (Positioning::R, DemandModel::Uniform),
    };
    let spec = InstanceSpec {
        customers: n..=n,
        depots: d..=d,
        positioning,
        demand,
        grid_size: cfg.grid_size,
        vehicle_capacity: cfg.vehicle_capacity,
        cluster_decay: 40.0,
        seed: cfg.seed,
    };
    generate_mdvrp(&spec, derive_seed(cfg.seed, &[0x9E5, index as u64]))
}

fn run_mdvrp_rows(
    suite: Suite,
    name: &str,
    inst: &MdvrpInstance,
    repeats: usize,
    cfg: &ExperimentConfig,
    estimator: &dyn CostEstimator,
    rows: &mut Vec<ReportRow>,
) -> Result<()> {
    let nda = nda_assign(inst);
    let nda_cost = route_assignment(
        inst,
        &nda,
        true,
        cfg.pipeline.deterministic,
        cfg.pipeline.solver_time_factor,
        derive_seed(cfg.seed, &[0xADA]),
    );
    let kmeans = kmeans_assign(
        inst,
        derive_seed(cfg.seed, &[0x33, rows.len() as u64]),
        cfg.kmeans_restarts,
        cfg.pipeline.deterministic,
        cfg.pipeline.solver_time_factor,
    )
    .ok();
    for repeat in 0..repeats {
        let started = Instant::now();
        let mut pipeline = cfg.pipeline.clone();
        pipeline.ga.seed = derive_seed(cfg.seed, &[0x11, rows.len() as u64, repeat as u64]);
        let ga_started = Instant::now();
        let result = solve_mdvrp(inst, estimator, &pipeline)?;
        let total_time = started.elapsed().as_secs_f64();
        let search_time = ga_started.elapsed().as_secs_f64();
        rows.push(ReportRow {
            suite: suite.to_string(),
            instance: name.to_string(),
            n: inst.n(),
            d: inst.num_depots(),
            repeat,
            nda_cost,
            kmeans_cost: kmeans.as_ref().map(|k| k.cost),
            kmeans_time: kmeans.as_ref().map(|k| k.elapsed).unwrap_or(0.0),
            predicted_cost: result.predicted_cost,
            actual_cost: result.actual_cost,
            search_time,
            total_time,
            gap_vs_nda: nda_cost.map(|r| gap(result.actual_cost, r).unwrap()),
            gap_vs_kmeans: kmeans.as_ref().map(|k| gap(result.actual_cost, k.cost).unwrap()),
        });
    }
    Ok(())
}

/// Run a suite and aggregate the rows. Generated suites draw
/// `cfg.instances` instances; file suites run every instance found in
/// the data directory (`*.txt` multi-depot, `*.dat`/`*.clrp`
/// location-routing).
pub fn run_experiment(
    suite: Suite,
    repeats: usize,
    cfg: &ExperimentConfig,
    estimator: &dyn CostEstimator,
) -> Result<Report> {
    let mut rows = Vec::new();
    match suite {
        Suite::T | Suite::O | Suite::D(_) => {
            for index in 0..cfg.instances {
                let inst = generated_instance(suite, cfg, index)?;
                let name = format!("{suite}-{index:03}");
                run_mdvrp_rows(suite, &name, &inst, repeats, cfg, estimator, &mut rows)?;
            }
        }
        Suite::Cordeau => {
            let dir = cfg
                .data_dir
                .clone()
                .ok_or_else(|| Error::Config("cordeau suite needs a data directory".into()))?;
            for path in sorted_files(&dir, &["txt"])? {
                let inst = load_mdvrp(&path)?;
                let name = path.file_stem().unwrap().to_string_lossy().to_string();
                run_mdvrp_rows(suite, &name, &inst, repeats, cfg, estimator, &mut rows)?;
            }
        }
        Suite::Barreto => {
            let dir = cfg
                .data_dir
                .clone()
                .ok_or_else(|| Error::Config("barreto suite needs a data directory".into()))?;
            for path in sorted_files(&dir, &["dat", "clrp"])? {
                let inst = load_clrp(&path)?;
                let name = path.file_stem().unwrap().to_string_lossy().to_string();
                for repeat in 0..repeats {
                    let started = Instant::now();
                    let mut pipeline = cfg.pipeline.clone();
                    pipeline.ga.seed =
                        derive_seed(cfg.seed, &[0x12, rows.len() as u64, repeat as u64]);
                    let result = clrp_solve(&inst, estimator, &pipeline)?;
                    let total_time = started.elapsed().as_secs_f64();
                    rows.push(ReportRow {
                        suite: suite.to_string(),
                        instance: name.clone(),
                        n: inst.n(),
                        d: inst.num_depots(),
                        repeat,
                        nda_cost: None,
                        kmeans_cost: None,
                        kmeans_time: 0.0,
                        predicted_cost: result.predicted_cost,
                        actual_cost: result.actual_cost,
                        search_time: total_time,
                        total_time,
                        gap_vs_nda: None,
                        gap_vs_kmeans: None,
                    });
                }
            }
        }
    }
    let summary = summarize(&rows);
    Ok(Report { rows, summary })
}

fn sorted_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| extensions.iter().any(|x| e == *x))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

const CSV_HEADER: [&str; 15] = [
    "suite",
    "instance",
    "n",
    "d",
    "repeat",
    "nda_cost",
    "kmeans_cost",
    "kmeans_time",
    "predicted_cost",
    "actual_cost",
    "search_time",
    "total_time",
    "gap_vs_nda",
    "gap_vs_kmeans",
    "kind",
];

/// Write rows and summary to CSV with a fixed column order. Summary
/// rows reuse the cost/time columns and carry `kind=summary-avg` /
/// `kind=summary-best`.
pub fn write_report_csv(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.suite.clone(),
            r.instance.clone(),
            r.n.to_string(),
            r.d.to_string(),
            r.repeat.to_string(),
            opt(r.nda_cost),
            opt(r.kmeans_cost),
            r.kmeans_time.to_string(),
            r.predicted_cost.to_string(),
            r.actual_cost.to_string(),
            r.search_time.to_string(),
            r.total_time.to_string(),
            opt(r.gap_vs_nda),
            opt(r.gap_vs_kmeans),
            "row".to_string(),
        ])
        .map_err(csv_err)?;
    }
    for s in &report.summary {
        for (kind, cost) in [("summary-avg", s.avg_cost), ("summary-best", s.best_cost)] {
            w.write_record([
                s.suite.clone(),
                s.instance.clone(),
                String::new(),
                String::new(),
                s.repeats.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                cost.to_string(),
                String::new(),
                s.avg_time.to_string(),
                String::new(),
                String::new(),
                kind.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Read back the row section of a report CSV.
pub fn parse_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(csv_err)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        if record.get(14) != Some("row") {
            continue;
        }
        let opt = |s: &str| -> Option<f64> {
            if s.is_empty() {
                None
            } else {
                s.parse().ok()
            }
        };
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        rows.push(ReportRow {
            suite: get(0),
            instance: get(1),
            n: get(2).parse().unwrap_or(0),
            d: get(3).parse().unwrap_or(0),
            repeat: get(4).parse().unwrap_or(0),
            nda_cost: opt(&get(5)),
            kmeans_cost: opt(&get(6)),
            kmeans_time: get(7).parse().unwrap_or(0.0),
            predicted_cost: get(8).parse().unwrap_or(0.0),
            actual_cost: get(9).parse().unwrap_or(0.0),
            search_time: get(10).parse().unwrap_or(0.0),
            total_time: get(11).parse().unwrap_or(0.0),
            gap_vs_nda: opt(&get(12)),
            gap_vs_kmeans: opt(&get(13)),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DaganzoEstimator;
    use crate::ga::GaConfig;

    fn quick_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            instances: 2,
            depot_range: (2, 2),
            ratio_range: (5, 8),
            pipeline: PipelineConfig {
                ga: GaConfig {
                    pop_low: 8,
                    pop_high: 12,
                    generations: 5,
                    stall_limit: 3,
                    top_k: 2,
                    ..GaConfig::default()
                },
                deterministic: true,
                solver_time_factor: 0.05,
            },
            kmeans_restarts: 3,
            seed,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn suite_parsing() {
        assert_eq!("T".parse::<Suite>().unwrap(), Suite::T);
        assert_eq!("d4".parse::<Suite>().unwrap(), Suite::D(4));
        assert_eq!("cordeau".parse::<Suite>().unwrap(), Suite::Cordeau);
        assert!("D9".parse::<Suite>().is_err());
        assert!("x".parse::<Suite>().is_err());
    }

    #[test]
    fn gap_matches_reference_values() {
        assert!((gap(586.39, 576.87).unwrap() - 1.65).abs() < 0.005);
        assert!((gap(429.6, 424.9).unwrap() - 1.11).abs() < 0.005);
        assert_eq!(gap(5.0, 5.0).unwrap(), 0.0);
        assert!(gap(1.0, 0.0).is_err());
    }

    #[test]
    fn nda_is_deterministic_and_kmeans_matching_bijective() {
        let cfg = quick_config(5);
        let inst = generated_instance(Suite::T, &cfg, 0).unwrap();
        assert_eq!(nda_assign(&inst), nda_assign(&inst));
        let out = kmeans_assign(&inst, 7, 3, true, 0.05).unwrap();
        let out2 = kmeans_assign(&inst, 7, 3, true, 0.05).unwrap();
        assert_eq!(out.assignment, out2.assignment);
        // Every depot index must appear as a valid gene target.
        assert!(out.assignment.iter().all(|&g| g < inst.num_depots()));
    }

    #[test]
    fn kmeans_single_cluster_per_depot_reduces_to_split_solve() {
        let cfg = quick_config(11);
        let inst = generated_instance(Suite::T, &cfg, 1).unwrap();
        let out = kmeans_assign(&inst, 3, 2, true, 0.05).unwrap();
        assert!(out.cost > 0.0);
        assert_eq!(out.restarts, 2);
    }

    #[test]
    fn t_suite_report_and_csv_round_trip() {
        let cfg = quick_config(1);
        let report = run_experiment(Suite::T, 2, &cfg, &DaganzoEstimator::default()).unwrap();
        assert_eq!(report.rows.len(), 4); // 2 instances x 2 repeats
        assert_eq!(report.summary.len(), 2);
        for s in &report.summary {
            assert!(s.best_cost <= s.avg_cost + 1e-9);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&report, &path).unwrap();
        let rows = parse_report_csv(&path).unwrap();
        assert_eq!(rows, report.rows);
    }

    #[test]
    fn d_class_rules_cover_table() {
        assert_eq!(d_class_rules(1), (Positioning::C, DemandModel::Uniform));
        assert_eq!(d_class_rules(4), (Positioning::R, DemandModel::Quadrant));
        assert_eq!(d_class_rules(7), (Positioning::RC, DemandModel::Unitary));
    }

    #[test]
    fn empty_suite_is_empty_success() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            data_dir: Some(dir.path().to_path_buf()),
            ..quick_config(2)
        };
        let report =
            run_experiment(Suite::Cordeau, 1, &cfg, &DaganzoEstimator::default()).unwrap();
        assert!(report.rows.is_empty());
        assert!(report.summary.is_empty());
    }

    #[test]
    fn aggregation_matches_independent_recomputation() {
        let cfg = quick_config(3);
        let report = run_experiment(Suite::D(4), 2, &cfg, &DaganzoEstimator::default()).unwrap();
        for s in &report.summary {
            let group: Vec<&ReportRow> = report
                .rows
                .iter()
                .filter(|r| r.instance == s.instance)
                .collect();
            let avg = group.iter().map(|r| r.actual_cost).sum::<f64>() / group.len() as f64;
            let best = group
                .iter()
                .map(|r| r.actual_cost)
                .fold(f64::INFINITY, f64::min);
            assert!((avg - s.avg_cost).abs() < 1e-9);
            assert!((best - s.best_cost).abs() < 1e-9);
        }
    }
}
