//! Synthetic benchmark grids.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use anyhow::Context;
use atlanta_core::synth::tau_for_kappa;
use atlanta_core::{generate, Problem, SynthConfig, World};
use clap::ValueEnum;

use crate::record::{run_method, Method, ResultRecord, RunSettings};

const RHOS: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
const HIGH_RHOS: [f64; 6] = [0.65, 0.7, 0.75, 0.8, 0.85, 0.9];
const KAPPAS: [f64; 3] = [0.005, 0.01, 0.02];
const LARGE_KAPPAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Seeds of consecutive cells are this far apart.
pub const CELL_SEED_STRIDE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Controlled,
    HighOutlier,
    LargeNoise,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub kappa: f64,
    pub rho: f64,
    pub world: World,
}

impl Grid {
    /// Cells in output order: noise level outer, outlier ratio inner.
    pub fn cells(self) -> Vec<Cell> {
        let (kappas, rhos, world): (&[f64], &[f64], World) = match self {
            Grid::Controlled => (&KAPPAS, &RHOS, World::AtlantaContinuous),
            Grid::HighOutlier => (&KAPPAS, &HIGH_RHOS, World::AtlantaContinuous),
            Grid::LargeNoise => (&LARGE_KAPPAS, &RHOS, World::AtlantaContinuous),
            Grid::Manhattan => (&KAPPAS, &RHOS, World::Manhattan),
        };
        kappas
            .iter()
            .flat_map(|&kappa| rhos.iter().map(move |&rho| Cell { kappa, rho, world }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub grid: Grid,
    pub trials: u32,
    pub methods: Vec<Method>,
    pub n: usize,
    pub seed: u64,
    pub max_iterations: u64,
    pub cull_rotation_ball: bool,
    pub workers: usize,
}

pub fn trial_seed(base: u64, cell: usize, trial: u32) -> u64 {
    base.wrapping_add(cell as u64 * CELL_SEED_STRIDE).wrapping_add(u64::from(trial))
}

/// Every trial of one cell, methods in plan order within each trial.
pub fn run_cell(plan: &BenchPlan, index: usize, cell: &Cell) -> anyhow::Result<Vec<ResultRecord>> {
    let mut rows = Vec::with_capacity(plan.trials as usize * plan.methods.len());
    for trial in 0..plan.trials {
        let seed = trial_seed(plan.seed, index, trial);
        let cfg = SynthConfig::new(plan.n, cell.rho, cell.kappa, cell.world, seed);
        let inst = generate(&cfg)?;
        let p = Problem::new(&inst.normals, tau_for_kappa(cell.kappa))?;
        let settings = RunSettings {
            max_iterations: plan.max_iterations,
            cull_rotation_ball: plan.cull_rotation_ball,
            ransac_rho: cell.rho,
            seed,
        };
        for &method in &plan.methods {
            let r = run_method(&p, method, &settings)
                .with_context(|| format!("{method}, kappa {} rho {} trial {trial}", cell.kappa, cell.rho))?;
            let mut row = ResultRecord::new(method, &r);
            row.kappa = Some(cell.kappa);
            row.rho = Some(cell.rho);
            row.trial = trial;
            row.score(&p, &r, &inst.v_gt, inst.r_gt.as_ref());
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs the plan on `plan.workers` threads and writes rows in (cell, trial)
/// order, flushing after each cell. Cells finished before a failure are
/// written out before the error is returned.
pub fn run<W: Write>(plan: &BenchPlan, out: W) -> anyhow::Result<()> {
    let cells = plan.grid.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .context("cannot start worker pool")?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(ResultRecord::FIELDS)?;
    writer.flush()?;

    let (tx, rx) = mpsc::channel();
    let cancelled = AtomicBool::new(false);
    std::thread::scope(|threads| {
        threads.spawn(|| {
            pool.scope(|scope| {
                for (index, cell) in cells.iter().enumerate() {
                    let tx = tx.clone();
                    let cancelled = &cancelled;
                    scope.spawn(move |_| {
                        if !cancelled.load(Ordering::Relaxed) {
                            // the receiver only hangs up after a failure
                            let _ = tx.send((index, run_cell(plan, index, cell)));
                        }
                    });
                }
            });
            drop(tx);
        });

        let result = write_in_order(&rx, &mut writer);
        if result.is_err() {
            cancelled.store(true, Ordering::Relaxed);
        }
        result
    })
}

fn write_in_order<W: Write>(
    rx: &mpsc::Receiver<(usize, anyhow::Result<Vec<ResultRecord>>)>,
    writer: &mut csv::Writer<W>,
) -> anyhow::Result<()> {
    let mut pending = BTreeMap::new();
    let mut next = 0;
    for (index, rows) in rx {
        pending.insert(index, rows);
        while let Some(rows) = pending.remove(&next) {
            for row in rows? {
                writer.serialize(row)?;
            }
            writer.flush()?;
            next += 1;
        }
    }
    Ok(())
}
