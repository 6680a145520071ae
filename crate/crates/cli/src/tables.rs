//! Table reproduction. Rows run as independent jobs; output is assembled in
//! job order, so the table CSVs depend only on the configuration. Wall times
//! go to a separate `timings.csv`.

use std::time::Instant;

use coherent_core::ga::{run_ga, Constraint, GaConfig, Index, Interval, SearchMode, SearchSpace};
use coherent_core::io::fmt_sig;
use coherent_core::lmi::{alternating_projection_solve, verify_candidate, LmiConfig};
use coherent_core::{registry, Error};

use crate::{Failure, RunConfig};

pub const TABLE3_GAMMA_L: f64 = 2.5;
pub const TABLE3_GAMMA_INF: f64 = 0.1;
pub const TABLE4_GAMMA_L: f64 = 1.02;
pub const CAVITY_MIXED_GAMMA_INF: f64 = 0.2;
pub const DPA_MIXED_GAMMA_INF: f64 = 0.1;

pub fn mode_label(mode: SearchMode) -> &'static str {
    match mode {
        SearchMode::PassiveOnly => "passive",
        SearchMode::NonPassive => "non-passive",
        SearchMode::PassivePlusDirectCoupling => "passive+coupling",
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Job {
    Ga { table: u8, plant: &'static str, mode: SearchMode, constraint: Constraint, gamma_l: Option<f64>, gamma_inf: Option<f64> },
    Lmi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub table: u8,
    pub plant: String,
    pub class: String,
    pub seed: u64,
    pub status: String,
    pub gamma_l: Option<f64>,
    pub gamma_inf: Option<f64>,
    pub hinf: Option<f64>,
    pub j_lqg: Option<f64>,
    pub iterations: Option<usize>,
    pub restart: Option<usize>,
    pub wall_s: f64,
}

impl Row {
    /// Both indices present and strictly below the row's thresholds.
    pub fn meets_thresholds(&self) -> bool {
        let below = |x: Option<f64>, g: Option<f64>| match g {
            Some(g) => x.is_some_and(|x| x < g),
            None => true,
        };
        self.j_lqg.is_some() && self.hinf.is_some() && below(self.j_lqg, self.gamma_l) && below(self.hinf, self.gamma_inf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSet {
    pub rows: Vec<Row>,
    pub table1: String,
    pub table2: String,
    pub table3: String,
    pub table4: String,
    pub timings: String,
}

impl TableSet {
    pub fn files(&self) -> [(&'static str, &str); 5] {
        [
            ("table1.csv", &self.table1),
            ("table2.csv", &self.table2),
            ("table3.csv", &self.table3),
            ("table4.csv", &self.table4),
            ("timings.csv", &self.timings),
        ]
    }

    pub fn table(&self, t: u8) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.table == t)
    }
}

fn jobs() -> Vec<Job> {
    let mut out = Vec::new();
    for (table, minimize) in [(1, Index::Lqg), (2, Index::Hinf)] {
        for plant in ["cavity", "dpa"] {
            for mode in [SearchMode::PassiveOnly, SearchMode::NonPassive] {
                out.push(Job::Ga { table, plant, mode, constraint: Constraint::None { minimize }, gamma_l: None, gamma_inf: None });
            }
        }
    }
    out.push(Job::Lmi);
    out.push(Job::Ga {
        table: 4,
        plant: "cavity",
        mode: SearchMode::PassiveOnly,
        constraint: Constraint::FixHinf { interval: Interval { lo: 0.0, hi: CAVITY_MIXED_GAMMA_INF } },
        gamma_l: Some(TABLE4_GAMMA_L),
        gamma_inf: Some(CAVITY_MIXED_GAMMA_INF),
    });
    out.push(Job::Ga {
        table: 4,
        plant: "dpa",
        mode: SearchMode::PassivePlusDirectCoupling,
        constraint: Constraint::FixLqg { interval: Interval { lo: 0.0, hi: TABLE4_GAMMA_L } },
        gamma_l: Some(TABLE4_GAMMA_L),
        gamma_inf: Some(DPA_MIXED_GAMMA_INF),
    });
    out
}

fn status(e: &Error) -> String {
    match e {
        Error::NoFeasible => "no-feasible".into(),
        Error::MaxIterations { .. } => "max-iterations".into(),
        _ => "error".into(),
    }
}

fn run_job(job: &Job, seed: u64, cfg: &RunConfig) -> Row {
    let start = Instant::now();
    let mut row = match job {
        Job::Ga { table, plant, mode, constraint, gamma_l, gamma_inf } => {
            let p = if *plant == "cavity" { registry::cavity() } else { registry::dpa() };
            let ga = GaConfig {
                population_size: cfg.pop,
                generations: cfg.gens,
                rng_seed: seed,
                constraint: *constraint,
                execution: cfg.execution,
                ..GaConfig::default()
            };
            let res = run_ga(&p, &SearchSpace::for_plant(&p, *mode), &ga);
            let (status, hinf, j) = match &res {
                Ok(r) => ("ok".to_string(), r.report.hinf, r.report.j_lqg),
                Err(e) => (status(e), None, None),
            };
            Row {
                table: *table,
                plant: plant.to_string(),
                class: mode_label(*mode).into(),
                seed,
                status,
                gamma_l: *gamma_l,
                gamma_inf: *gamma_inf,
                hinf,
                j_lqg: j,
                iterations: None,
                restart: None,
                wall_s: 0.0,
            }
        }
        Job::Lmi => {
            let p = registry::cavity();
            let lmi = LmiConfig {
                restarts: cfg.restarts,
                max_iterations: cfg.max_iterations,
                seed,
                execution: cfg.execution,
                ..LmiConfig::default()
            };
            let (status, cand) = match alternating_projection_solve(&p, TABLE3_GAMMA_L, TABLE3_GAMMA_INF, &lmi) {
                Ok(c) => ("verified".to_string(), Some(c)),
                Err(Error::MaxIterations { best, .. }) => ("max-iterations".to_string(), Some(*best)),
                Err(e) => (status(&e), None),
            };
            let report = cand.as_ref().and_then(|c| verify_candidate(c, &p, TABLE3_GAMMA_L, TABLE3_GAMMA_INF).ok());
            Row {
                table: 3,
                plant: "cavity".into(),
                class: "lmi".into(),
                seed,
                status,
                gamma_l: Some(TABLE3_GAMMA_L),
                gamma_inf: Some(TABLE3_GAMMA_INF),
                hinf: report.as_ref().and_then(|r| r.hinf),
                j_lqg: report.as_ref().and_then(|r| r.j_lqg),
                iterations: cand.as_ref().map(|c| c.iterations),
                restart: cand.as_ref().map(|c| c.restart),
                wall_s: 0.0,
            }
        }
    };
    row.wall_s = start.elapsed().as_secs_f64();
    row
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_sig)
}

fn opt_n(x: Option<usize>) -> String {
    x.map_or_else(|| "NA".into(), |n| n.to_string())
}

fn render(rows: &[Row]) -> TableSet {
    let mut t12 = [
        String::from("plant,controller_class,seed,status,hinf,j_lqg\n"),
        String::from("plant,controller_class,seed,status,hinf,j_lqg\n"),
    ];
    let mut t3 = String::from("plant,gamma_l,gamma_inf,seed,status,hinf,j_lqg,iterations,restart\n");
    let mut t4 = String::from("plant,controller_class,gamma_l,gamma_inf,seed,status,hinf,j_lqg,meets_thresholds\n");
    let mut timings = String::from("table,plant,controller_class,seed,wall_time_s\n");
    for r in rows {
        match r.table {
            1 | 2 => t12[usize::from(r.table - 1)].push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.plant,
                r.class,
                r.seed,
                r.status,
                opt(r.hinf),
                opt(r.j_lqg)
            )),
            3 => t3.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.plant,
                opt(r.gamma_l),
                opt(r.gamma_inf),
                r.seed,
                r.status,
                opt(r.hinf),
                opt(r.j_lqg),
                opt_n(r.iterations),
                opt_n(r.restart)
            )),
            _ => t4.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.plant,
                r.class,
                opt(r.gamma_l),
                opt(r.gamma_inf),
                r.seed,
                r.status,
                opt(r.hinf),
                opt(r.j_lqg),
                r.meets_thresholds()
            )),
        }
        timings.push_str(&format!("{},{},{},{},{:.3}\n", r.table, r.plant, r.class, r.seed, r.wall_s));
    }
    let [table1, table2] = t12;
    TableSet { rows: rows.to_vec(), table1, table2, table3: t3, table4: t4, timings }
}

/// Runs every table row for seeds `cfg.seed` and `cfg.seed + 1`.
pub fn reproduce_tables(cfg: &RunConfig) -> Result<TableSet, Failure> {
    cfg.validate()?;
    let seeds = [cfg.seed, cfg.seed.wrapping_add(1)];
    let work: Vec<(Job, u64)> = jobs().into_iter().flat_map(|j| seeds.map(|s| (j.clone(), s))).collect();
    let rows = cfg.execution.map(work.len(), |i| run_job(&work[i].0, work[i].1, cfg));
    Ok(render(&rows))
}
