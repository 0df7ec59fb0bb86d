//! Randomized two-queue scenarios, controller sweeps over `R = M1/M2`, and
//! per-cell aggregation of the two comparison metrics.
//!
//! Metrics per run:
//! - `mean_sojourn`: mean sojourn over all cars that departed;
//! - `worst_avg`: mean of the two per-queue maximum sojourns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

use crate::controllers::{ControllerError, ControllerKind, ControllerSpec};
use crate::sim::{self, InitialCar, InitialState, SimConfig, SimError, SimResult};
use crate::tolerances::{DEFAULT_M2, DEFAULT_R_VALUES, DEFAULT_SEEDS};
use crate::ValidParams64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("gap interval [{d1}, {d2}] invalid: need d_S = {d_s} <= d1 <= d2")]
    Gaps { d1: f64, d2: f64, d_s: f64 },
    #[error("M1 = {m1} exceeds M2 = {m2}")]
    Counts { m1: usize, m2: usize },
    #[error("ratio R = {0} outside (0, 1]")]
    Ratio(f64),
    #[error("sweep needs at least one controller, ratio and seed")]
    EmptyGrid,
    #[error("incomplete grid: cell ({controller}, R={r}) has {got} of {want} seeds")]
    IncompleteGrid {
        controller: ControllerKind,
        r: f64,
        got: usize,
        want: usize,
    },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Scenario generator settings shared by all cells of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Cars in queue 2.
    #[serde(default = "default_m2")]
    pub m2: usize,
    /// Bumper-to-bumper gap interval (m) of queue 2.
    pub d1: f64,
    pub d2: f64,
}

fn default_m2() -> usize {
    DEFAULT_M2
}

impl ScenarioSpec {
    pub fn light_traffic() -> Self {
        Self {
            m2: DEFAULT_M2,
            d1: 4.0,
            d2: 40.0,
        }
    }

    pub fn heavy_traffic() -> Self {
        Self {
            m2: DEFAULT_M2,
            d1: 4.0,
            d2: 20.0,
        }
    }

    /// `M1 = round(R·M2)`.
    pub fn m1_for(&self, r: f64) -> usize {
        (r * self.m2 as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub m1: usize,
    pub m2: usize,
    pub d1: f64,
    pub d2: f64,
    pub seed: u64,
    pub initial: InitialState,
}

impl Scenario {
    pub fn r(&self) -> f64 {
        self.m1 as f64 / self.m2 as f64
    }
}

/// Queue 2 starts with its head on the zone boundary and front-to-front
/// spacings `L_C + U[d1, d2]`. Queue 1 draws `M1` fronts uniformly between
/// the queue-2 tail and the boundary, sorted head first and pushed upstream
/// where needed to keep `L_C + d_S`. All speeds are `U[0, V_max]`.
pub fn generate_scenario(
    params: &ValidParams64,
    m1: usize,
    m2: usize,
    d1: f64,
    d2: f64,
    seed: u64,
) -> Result<Scenario, ExperimentError> {
    let g = &params.geometry;
    if !(g.safe_distance <= d1 && d1 <= d2 && d2.is_finite()) {
        return Err(ExperimentError::Gaps {
            d1,
            d2,
            d_s: g.safe_distance,
        });
    }
    if m1 > m2 {
        return Err(ExperimentError::Counts { m1, m2 });
    }
    let v_max = params.speeds.v_max;
    let boundary = -g.queue_length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut q2 = Vec::with_capacity(m2);
    let mut x = boundary;
    for i in 0..m2 {
        if i > 0 {
            x -= g.car_length + rng.gen_range(d1..=d2);
        }
        q2.push(x);
    }
    let tail = q2.last().copied().unwrap_or(boundary);

    let mut q1: Vec<f64> = (0..m1)
        .map(|_| if tail < boundary { rng.gen_range(tail..=boundary) } else { boundary })
        .collect();
    q1.sort_by(|a, b| b.total_cmp(a));
    let spacing = g.stopped_spacing();
    for i in 1..q1.len() {
        q1[i] = q1[i].min(q1[i - 1] - spacing);
    }

    let mut with_speeds = |xs: Vec<f64>| -> Vec<InitialCar> {
        xs.into_iter()
            .map(|front_pos| InitialCar {
                front_pos,
                vel: rng.gen_range(0.0..=v_max),
            })
            .collect()
    };
    let q2 = with_speeds(q2);
    let q1 = with_speeds(q1);
    Ok(Scenario {
        m1,
        m2,
        d1,
        d2,
        seed,
        initial: InitialState { queues: [q1, q2] },
    })
}

/// Sweep grid. Each `(controller, R, seed)` triple is one cell; the
/// scenario of a cell depends only on `(R, seed)`, so controllers are
/// compared on identical traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub controllers: Vec<ControllerSpec>,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    /// Number of replications.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    /// Seed of the first replication; replication `k` uses `base_seed + k`.
    #[serde(default)]
    pub base_seed: u64,
}

fn default_r_values() -> Vec<f64> {
    DEFAULT_R_VALUES.to_vec()
}
fn default_seeds() -> u64 {
    DEFAULT_SEEDS
}

impl SweepSpec {
    pub fn all_controllers() -> Self {
        Self {
            controllers: ControllerKind::ALL.into_iter().map(ControllerSpec::new).collect(),
            r_values: default_r_values(),
            seeds: DEFAULT_SEEDS,
            base_seed: 0,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|k| self.base_seed + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub controller: ControllerKind,
    pub r: f64,
    pub seed: u64,
    pub m1: usize,
    pub m2: usize,
    pub mean_sojourn: f64,
    pub worst_avg: f64,
    /// Largest sojourn in queue 1 and queue 2 (NaN for an empty queue).
    pub max_sojourn: [f64; 2],
    /// Cars still on the road at the horizon.
    pub unfinished: usize,
}

impl MetricsRow {
    pub fn is_live(&self) -> bool {
        self.unfinished == 0
    }

    pub fn from_result(
        controller: ControllerKind,
        scenario: &Scenario,
        result: &SimResult,
    ) -> Self {
        Self {
            controller,
            r: scenario.r(),
            seed: scenario.seed,
            m1: scenario.m1,
            m2: scenario.m2,
            mean_sojourn: result.mean_sojourn.unwrap_or(f64::NAN),
            worst_avg: result.worst_avg().unwrap_or(f64::NAN),
            max_sojourn: result.max_sojourn.map(|m| m.unwrap_or(f64::NAN)),
            unfinished: result.liveness_failures.len(),
        }
    }
}

pub const CSV_HEADER: &str =
    "controller,r,seed,m1,m2,mean_sojourn,worst_avg,max_sojourn_q1,max_sojourn_q2,unfinished";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Rows ordered by controller (as listed), then `R`, then seed.
    pub rows: Vec<MetricsRow>,
}

impl SweepTable {
    pub fn failed_cells(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| !r.is_live())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.controller,
                r.r,
                r.seed,
                r.m1,
                r.m2,
                r.mean_sojourn,
                r.worst_avg,
                r.max_sojourn[0],
                r.max_sojourn[1],
                r.unfinished
            );
        }
        s
    }
}

/// Runs one cell: the scenario for `(r, seed)` under `spec`.
pub fn run_cell(
    params: &ValidParams64,
    scenario_spec: &ScenarioSpec,
    spec: &ControllerSpec,
    r: f64,
    seed: u64,
    sim_config: &SimConfig,
) -> Result<MetricsRow, ExperimentError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(ExperimentError::Ratio(r));
    }
    let m1 = scenario_spec.m1_for(r);
    let scenario = generate_scenario(params, m1, scenario_spec.m2, scenario_spec.d1, scenario_spec.d2, seed)?;
    let mut cell_spec = spec.clone();
    if spec.kind == ControllerKind::FixedCycle2 {
        cell_spec.ratio = Some(r);
    }
    let mut controller = cell_spec.resolve(params)?;
    let config = SimConfig {
        seed,
        record_trace: false,
        ..sim_config.clone()
    };
    let result = sim::run(params, &scenario.initial, &mut controller, &config)?;
    Ok(MetricsRow::from_result(spec.kind, &scenario, &result))
}

/// Runs every cell of the grid in parallel; `progress` is called once per
/// finished cell with the running count.
pub fn run_sweep(
    params: &ValidParams64,
    scenario_spec: &ScenarioSpec,
    sweep: &SweepSpec,
    sim_config: &SimConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SweepTable, ExperimentError> {
    let seeds = sweep.seed_list();
    if sweep.controllers.is_empty() || sweep.r_values.is_empty() || seeds.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if let Some(&r) = sweep.r_values.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(ExperimentError::Ratio(r));
    }
    let mut cells = Vec::new();
    for spec in &sweep.controllers {
        spec.resolve(params)?;
        for &r in &sweep.r_values {
            for &seed in &seeds {
                cells.push((spec, r, seed));
            }
        }
    }
    let total = cells.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let rows = cells
        .into_par_iter()
        .map(|(spec, r, seed)| {
            let row = run_cell(params, scenario_spec, spec, r, seed, sim_config);
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(n, total);
            row
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub controller: ControllerKind,
    pub r: f64,
    pub n: usize,
    pub mean_sojourn: Stat,
    pub worst_avg: Stat,
    pub unfinished_runs: usize,
}

/// Mean and sample standard deviation (`n − 1`; zero for one sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Cells ordered by controller kind, then `R`.
    pub cells: Vec<CellSummary>,
}

impl Aggregate {
    pub fn cell(&self, controller: ControllerKind, r: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.controller == controller && c.r == r)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregate serializes")
    }
}

/// Per-`(controller, R)` statistics over seeds. Every cell must hold the
/// same set of seeds.
pub fn aggregate(table: &SweepTable) -> Result<Aggregate, ExperimentError> {
    // Positive ratios order the same by value and by bit pattern.
    let mut groups: BTreeMap<(ControllerKind, u64), Vec<&MetricsRow>> = BTreeMap::new();
    let mut seeds = std::collections::BTreeSet::new();
    for row in &table.rows {
        groups.entry((row.controller, row.r.to_bits())).or_default().push(row);
        seeds.insert(row.seed);
    }
    let want = seeds.len();
    let mut cells = Vec::with_capacity(groups.len());
    for ((controller, r_bits), mut rows) in groups {
        let r = f64::from_bits(r_bits);
        rows.sort_by_key(|row| row.seed);
        rows.dedup_by_key(|row| row.seed);
        if rows.len() != want {
            return Err(ExperimentError::IncompleteGrid {
                controller,
                r,
                got: rows.len(),
                want,
            });
        }
        let col = |f: fn(&MetricsRow) -> f64| Stat::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        cells.push(CellSummary {
            controller,
            r,
            n: rows.len(),
            mean_sojourn: col(|r| r.mean_sojourn),
            worst_avg: col(|r| r.worst_avg),
            unfinished_runs: rows.iter().filter(|r| !r.is_live()).count(),
        });
    }
    Ok(Aggregate { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn params() -> ValidParams64 {
        ModelParams::baseline().validate().unwrap()
    }

    fn row(controller: ControllerKind, r: f64, seed: u64, mean: f64) -> MetricsRow {
        MetricsRow {
            controller,
            r,
            seed,
            m1: 0,
            m2: 1,
            mean_sojourn: mean,
            worst_avg: mean,
            max_sojourn: [mean; 2],
            unfinished: 0,
        }
    }

    #[test]
    fn scenario_shape() {
        let p = params();
        let s = generate_scenario(&p, 200, 200, 4.0, 40.0, 7).unwrap();
        assert_eq!(s.initial.total(), 400);
        assert_eq!(s.initial.queues[1][0].front_pos, -100.0);
        s.initial.check(&p).unwrap();
        for q in &s.initial.queues {
            assert!(q.iter().all(|c| c.front_pos <= -100.0));
            assert!(q.iter().all(|c| (0.0..=13.3).contains(&c.vel)));
        }
    }

    #[test]
    fn queue_two_extent_matches_gap_expectation() {
        let p = params();
        let seeds = 1000;
        let mean_extent = (0..seeds)
            .map(|seed| {
                let s = generate_scenario(&p, 0, 200, 4.0, 40.0, seed).unwrap();
                let q = &s.initial.queues[1];
                q[0].front_pos - q[q.len() - 1].front_pos
            })
            .sum::<f64>()
            / seeds as f64;
        // 199 spacings of L_C + U[4, 40], each with mean 4 + 22.
        let expected = 199.0 * (4.0 + 22.0);
        assert!((mean_extent - expected).abs() / expected < 0.02);
        assert!((mean_extent - 200.0 * 26.0).abs() / (200.0 * 26.0) < 0.02);
    }

    #[test]
    fn empty_queue_one_leaves_queue_two_alone() {
        let p = params();
        let a = generate_scenario(&p, 0, 50, 4.0, 40.0, 3).unwrap();
        let b = generate_scenario(&p, 30, 50, 4.0, 40.0, 3).unwrap();
        assert!(a.initial.queues[0].is_empty());
        let xs = |s: &Scenario| s.initial.queues[1].iter().map(|c| c.front_pos).collect::<Vec<_>>();
        assert_eq!(xs(&a), xs(&b));
    }

    #[test]
    fn same_seed_same_scenario() {
        let p = params();
        let a = generate_scenario(&p, 120, 200, 4.0, 20.0, 11).unwrap();
        let b = generate_scenario(&p, 120, 200, 4.0, 20.0, 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn generator_rejects_bad_inputs() {
        let p = params();
        assert!(matches!(
            generate_scenario(&p, 1, 2, 0.5, 4.0, 0),
            Err(ExperimentError::Gaps { .. })
        ));
        assert!(matches!(
            generate_scenario(&p, 1, 2, 5.0, 4.0, 0),
            Err(ExperimentError::Gaps { .. })
        ));
        assert!(matches!(
            generate_scenario(&p, 3, 2, 4.0, 40.0, 0),
            Err(ExperimentError::Counts { m1: 3, m2: 2 })
        ));
    }

    #[test]
    fn aggregate_single_seed_equals_row() {
        let table = SweepTable {
            rows: vec![row(ControllerKind::FixedCycle1, 0.5, 0, 17.5)],
        };
        let agg = aggregate(&table).unwrap();
        let c = agg.cell(ControllerKind::FixedCycle1, 0.5).unwrap();
        assert_eq!(c.mean_sojourn, Stat { mean: 17.5, sd: 0.0 });
    }

    #[test]
    fn aggregate_sample_sd() {
        let table = SweepTable {
            rows: vec![
                row(ControllerKind::FixedCycle1, 1.0, 0, 10.0),
                row(ControllerKind::FixedCycle1, 1.0, 1, 12.0),
            ],
        };
        let c = aggregate(&table).unwrap().cells[0].clone();
        assert_eq!(c.mean_sojourn.mean, 11.0);
        assert!((c.mean_sojourn.sd - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn aggregate_ignores_row_order() {
        let mut rows = vec![];
        for (k, kind) in ControllerKind::ALL.into_iter().enumerate() {
            for r in [0.25, 1.0] {
                for seed in 0..3 {
                    rows.push(row(kind, r, seed, (k * 7 + seed as usize) as f64 * r));
                }
            }
        }
        let a = aggregate(&SweepTable { rows: rows.clone() }).unwrap();
        rows.reverse();
        rows.swap(1, 5);
        let b = aggregate(&SweepTable { rows }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 6);
    }

    #[test]
    fn aggregate_rejects_incomplete_grid() {
        let table = SweepTable {
            rows: vec![
                row(ControllerKind::FixedCycle1, 1.0, 0, 10.0),
                row(ControllerKind::FixedCycle1, 1.0, 1, 12.0),
                row(ControllerKind::FixedCycle2, 1.0, 0, 12.0),
            ],
        };
        assert!(matches!(
            aggregate(&table),
            Err(ExperimentError::IncompleteGrid { got: 1, want: 2, .. })
        ));
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let p = params();
        let scen = ScenarioSpec {
            m2: 8,
            d1: 4.0,
            d2: 40.0,
        };
        let sweep = SweepSpec {
            seeds: 2,
            ..SweepSpec::all_controllers()
        };
        let table = run_sweep(&p, &scen, &sweep, &SimConfig::default(), &|_, _| {}).unwrap();
        assert_eq!(table.rows.len(), 3 * 4 * 2);
        assert!(table.rows.iter().all(MetricsRow::is_live));
        let keys: Vec<_> = table.rows.iter().map(|r| (r.controller, r.r.to_bits(), r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(table.to_csv().lines().count(), 1 + 24);
        assert_eq!(table.to_csv().lines().next(), Some(CSV_HEADER));
    }

    #[test]
    fn liveness_failure_is_flagged_not_fatal() {
        let p = params();
        let scen = ScenarioSpec {
            m2: 10,
            d1: 4.0,
            d2: 40.0,
        };
        let sweep = SweepSpec {
            controllers: vec![ControllerSpec::new(ControllerKind::FixedCycle1)],
            r_values: vec![1.0],
            seeds: 1,
            base_seed: 0,
        };
        let short = SimConfig {
            max_t: 5.0,
            ..SimConfig::default()
        };
        let table = run_sweep(&p, &scen, &sweep, &short, &|_, _| {}).unwrap();
        assert_eq!(table.failed_cells().count(), 1);
    }
}
