//! One function per subcommand. Output file names and CSV columns are listed
//! in `docs/csv-schemas.md`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Axis as NdAxis;
use serde::Serialize;
use thetaprime_core::energetics::{EnergyEvaluator, Variant};
use thetaprime_core::residuals::manufactured::backend_gap_case;
use thetaprime_core::{
    ac_residual, ch_residual, compare_backends, export_npy, make_initial, read_dataset, read_export, run_sweep,
    simulate, split, total_loss_with_form, write_dataset, BackendKind, Channel, Dataset, DerivBackend, Error,
    Instance, InstanceMeta, LossComponents, LossReport, LossWeights, Residual, SpatialForm, Trajectory,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, sci, short, Cell, Table};
use crate::{Cli, Command};

pub const TRAJECTORY_FILE: &str = "trajectory.pfds";
pub const DATASET_FILE: &str = "dataset.pfds";
pub const TRAIN_FILE: &str = "train.pfds";
pub const TEST_FILE: &str = "test.pfds";
pub const CONFIG_FILE: &str = "run_config.toml";
pub const BLOWUP_FILE: &str = "blowup_report.json";
pub const ENERGY_CSV: &str = "energy.csv";
pub const INSTANCES_CSV: &str = "instances.csv";
pub const SPLIT_CSV: &str = "split.csv";
pub const RESIDUALS_CSV: &str = "residuals.csv";
pub const RESIDUAL_SUMMARY_CSV: &str = "residual_summary.csv";
pub const EVALUATE_CSV: &str = "evaluate.csv";
pub const EVALUATE_JSON: &str = "evaluate.json";
pub const RELATIVE_ERROR_CSV: &str = "relative_error.csv";
pub const BACKEND_CSV: &str = "backend_compare.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Console settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Console {
    pub machine: bool,
}

impl Console {
    fn num(&self, v: f64) -> String {
        if self.machine {
            sci(v)
        } else {
            short(v)
        }
    }

    fn table(&self, t: &Table) {
        print!("{}", t.render(self.machine));
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let console = Console { machine: cli.machine };
    // evaluation commands follow the operator recorded in the data unless
    // the flag asks otherwise
    let form = cli.spatial_form;
    match &cli.command {
        Command::Simulate => cmd_simulate(&cfg, console),
        Command::Sweep => cmd_sweep(&cfg, console),
        Command::Split {
            input,
            n_train,
            selection_seed,
        } => cmd_split(
            &cfg,
            input,
            n_train.unwrap_or(cfg.split.n_train),
            selection_seed.unwrap_or(cfg.split.selection_seed),
            console,
        ),
        Command::Residual { input, instance } => cmd_residual(&cfg, input, *instance, form, console),
        Command::Evaluate { pred, truth } => cmd_evaluate(&cfg, pred, truth, form, console),
        Command::BackendCompare {
            input,
            truth,
            instance,
        } => cmd_backend_compare(&cfg, input.as_deref(), truth.as_deref(), *instance, form, console),
        Command::Export { input } => cmd_export(&cfg, input, console),
    }
}

/// Reads a dataset file or an NPY export directory.
pub fn load_input(path: &Path) -> Result<Dataset> {
    let ds = if path.is_dir() {
        read_export(path)?
    } else {
        read_dataset(path)?
    };
    Ok(ds)
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Serialize)]
struct BlowupReport<'a> {
    command: &'a str,
    c0: f64,
    seed: u64,
    frame: usize,
    /// `null` when the state overflowed to infinity.
    max_abs_value: Option<f64>,
    dt: f64,
    substeps: usize,
    grid: [usize; 2],
    hint: &'a str,
}

/// Writes a diagnostic report when `err` is a blowup, then hands `err` back.
fn report_blowup(cfg: &RunConfig, dir: &Path, command: &str, meta: Option<InstanceMeta>, err: Error) -> CliError {
    let (meta, frame, magnitude) = match &err {
        Error::Blowup { frame, magnitude } => (
            meta.unwrap_or(InstanceMeta {
                c0: cfg.run.c0,
                seed: cfg.run.seed,
            }),
            *frame,
            *magnitude,
        ),
        Error::Instance { c0, seed, source } => match **source {
            Error::Blowup { frame, magnitude } => (InstanceMeta { c0: *c0, seed: *seed }, frame, magnitude),
            _ => return err.into(),
        },
        _ => return err.into(),
    };
    let report = BlowupReport {
        command,
        c0: meta.c0,
        seed: meta.seed,
        frame,
        max_abs_value: magnitude.is_finite().then_some(magnitude),
        dt: cfg.params.dt,
        substeps: cfg.run.substeps,
        grid: [cfg.grid.nx, cfg.grid.ny],
        hint: "reduce params.dt or check the coefficients for an unstable free energy",
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    eprintln!("diagnostic report:\n{text}");
    let path = dir.join(BLOWUP_FILE);
    if let Err(e) = fs::write(&path, text) {
        log::warn!("could not write {}: {e}", path.display());
    }
    err.into()
}

fn energy_table(traj: &Trajectory) -> Result<Table> {
    let ev = EnergyEvaluator::new(traj.grid().clone(), traj.params())?;
    let mut t = Table::new([
        "frame", "time", "bulk", "gradient", "elastic", "total", "mean_c", "min_c", "max_c",
    ]);
    for (k, f) in traj.frames().iter().enumerate() {
        let e = ev.evaluate(f)?;
        let c = f.c.values();
        let (lo, hi) = c
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        t.push(vec![
            k.into(),
            f.time.into(),
            e.bulk.into(),
            e.gradient.into(),
            e.elastic.into(),
            e.total().into(),
            f.c.mean().into(),
            lo.into(),
            hi.into(),
        ]);
    }
    Ok(t)
}

#[cfg(feature = "plots")]
fn write_snapshots(cfg: &RunConfig, traj: &Trajectory, dir: &Path) -> Result<usize> {
    let snap = ensure_dir(&dir.join(SNAPSHOT_DIR))?;
    let mut n = 0;
    for k in cfg.snapshot_frames(traj.len()) {
        let frame = &traj.frames()[k];
        for ch in Channel::ALL {
            let path = snap.join(format!("{}_f{k:04}.png", ch.name()));
            crate::plots::save(frame.channel(ch).values().view(), &path)?;
            n += 1;
        }
    }
    Ok(n)
}

#[cfg(not(feature = "plots"))]
fn write_snapshots(_: &RunConfig, _: &Trajectory, _: &Path) -> Result<usize> {
    Ok(0)
}

pub fn cmd_simulate(cfg: &RunConfig, console: Console) -> Result<()> {
    let grid = cfg.grid.build()?;
    let dir = ensure_dir(&cfg.output.dir)?;
    write_config(cfg, &dir)?;
    let initial = make_initial(cfg.run.c0, cfg.run.seed, grid, cfg.run.noise_amp)?;
    let traj = simulate(&initial, &cfg.params, cfg.run.frames, cfg.run.substeps)
        .map_err(|e| report_blowup(cfg, &dir, "simulate", None, e))?;
    let energy = energy_table(&traj)?;
    energy.write_csv(&dir.join(ENERGY_CSV))?;
    let snapshots = if cfg.output.plots {
        write_snapshots(cfg, &traj, &dir)?
    } else {
        0
    };
    let m0 = initial.c.mean();
    let drift = traj
        .frames()
        .iter()
        .map(|f| (f.c.mean() - m0).abs())
        .fold(0.0, f64::max);
    let meta = InstanceMeta {
        c0: cfg.run.c0,
        seed: cfg.run.seed,
    };
    let ds = Dataset::new(vec![Instance { meta, trajectory: traj }])?;
    let path = dir.join(TRAJECTORY_FILE);
    write_dataset(&ds, &path)?;
    println!(
        "wrote {} ({} frames, {}x{} grid, c0 = {}, seed = {})",
        path.display(),
        ds.frames(),
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.run.c0,
        cfg.run.seed
    );
    println!("max |mean(c) drift| = {}", console.num(drift));
    if snapshots > 0 {
        println!("wrote {snapshots} snapshots to {}", dir.join(SNAPSHOT_DIR).display());
    }
    Ok(())
}

fn instance_table(ds: &Dataset) -> Table {
    let mut t = Table::new(["index", "c0", "seed"]);
    for (i, m) in ds.metas().iter().enumerate() {
        t.push(vec![i.into(), m.c0.into(), m.seed.into()]);
    }
    t
}

pub fn cmd_sweep(cfg: &RunConfig, _console: Console) -> Result<()> {
    let grid = cfg.grid.build()?;
    let dir = ensure_dir(&cfg.output.dir)?;
    write_config(cfg, &dir)?;
    let n = cfg.sweep.combinations().len();
    log::info!("running {n} instances");
    let ds = run_sweep(&cfg.sweep, &cfg.params, grid, &cfg.run.plan())
        .map_err(|e| report_blowup(cfg, &dir, "sweep", None, e))?;
    let path = dir.join(DATASET_FILE);
    write_dataset(&ds, &path)?;
    instance_table(&ds).write_csv(&dir.join(INSTANCES_CSV))?;
    println!(
        "wrote {} ({} instances x {} frames, {}x{} grid)",
        path.display(),
        ds.len(),
        ds.frames(),
        cfg.grid.nx,
        cfg.grid.ny
    );
    Ok(())
}

pub fn cmd_split(cfg: &RunConfig, input: &Path, n_train: usize, seed: u64, _console: Console) -> Result<()> {
    let ds = load_input(input)?;
    let (train, test) = split(&ds, n_train, seed).map_err(|e| match e {
        Error::InvalidArgument(msg) => CliError::Config(msg),
        other => other.into(),
    })?;
    let dir = ensure_dir(&cfg.output.dir)?;
    write_dataset(&train, dir.join(TRAIN_FILE))?;
    write_dataset(&test, dir.join(TEST_FILE))?;
    let mut t = Table::new(["index", "c0", "seed", "set"]);
    // recover original indices from the metadata, which is unique per sweep
    let metas = ds.metas();
    let index_of = |m: &InstanceMeta| metas.iter().position(|x| x == m).expect("split keeps instances");
    for (set, part) in [("train", &train), ("test", &test)] {
        for m in part.metas() {
            t.push(vec![index_of(&m).into(), m.c0.into(), m.seed.into(), set.into()]);
        }
    }
    t.write_csv(&dir.join(SPLIT_CSV))?;
    println!(
        "wrote {} ({} instances) and {} ({} instances)",
        dir.join(TRAIN_FILE).display(),
        train.len(),
        dir.join(TEST_FILE).display(),
        test.len()
    );
    Ok(())
}

fn select(ds: &Dataset, instance: Option<usize>) -> Result<Vec<usize>> {
    match instance {
        Some(i) if i >= ds.len() => Err(CliError::Config(format!(
            "instance {i} out of range (dataset has {})",
            ds.len()
        ))),
        Some(i) => Ok(vec![i]),
        None => Ok((0..ds.len()).collect()),
    }
}

fn frame_mean_squares(r: &Residual) -> Vec<f64> {
    r.values
        .axis_iter(NdAxis(0))
        .map(|f| f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64)
        .collect()
}

pub fn cmd_residual(
    cfg: &RunConfig,
    input: &Path,
    instance: Option<usize>,
    form: Option<SpatialForm>,
    console: Console,
) -> Result<()> {
    let ds = load_input(input)?;
    let chosen = select(&ds, instance)?;
    let dir = ensure_dir(&cfg.output.dir)?;
    let backend = cfg.backend;
    let form = form.unwrap_or(ds.spatial_form());
    let mut frames = Table::new(["instance", "frame", "time", "ms_ch", "ms_ac1", "ms_ac2"]);
    let mut summary = Table::new([
        "instance", "c0", "seed", "backend", "spatial_form", "pde_ac1", "pde_ac2", "pde_ch",
    ]);
    for i in chosen {
        let inst = &ds.instances()[i];
        let traj = &inst.trajectory;
        let ch = ch_residual(traj, &backend, form)?;
        let ac1 = ac_residual(traj, Variant::One, &backend)?;
        let ac2 = ac_residual(traj, Variant::Two, &backend)?;
        let (m_ch, m1, m2) = (frame_mean_squares(&ch), frame_mean_squares(&ac1), frame_mean_squares(&ac2));
        for (k, f) in traj.frames().iter().enumerate() {
            frames.push(vec![i.into(), k.into(), f.time.into(), m_ch[k].into(), m1[k].into(), m2[k].into()]);
        }
        summary.push(vec![
            i.into(),
            inst.meta.c0.into(),
            inst.meta.seed.into(),
            backend.kind.short_name().into(),
            form.short_name().into(),
            ac1.normalized_loss().into(),
            ac2.normalized_loss().into(),
            ch.normalized_loss().into(),
        ]);
    }
    frames.write_csv(&dir.join(RESIDUALS_CSV))?;
    summary.write_csv(&dir.join(RESIDUAL_SUMMARY_CSV))?;
    console.table(&summary);
    Ok(())
}

fn describe(ds: &Dataset) -> String {
    let g = ds.grid();
    format!(
        "N = {}, T = {}, grid {}x{} (lx = {}, ly = {}), dt = {}",
        ds.len(),
        ds.frames(),
        g.nx(),
        g.ny(),
        g.lx(),
        g.ly(),
        ds.dt()
    )
}

fn check_compatible(pred: &Dataset, truth: &Dataset) -> Result<()> {
    let same_grid = **pred.grid() == **truth.grid();
    if pred.len() != truth.len() || pred.frames() != truth.frames() || !same_grid {
        return Err(CliError::Incompatible(format!(
            "shape mismatch: prediction has {}; truth has {}",
            describe(pred),
            describe(truth)
        )));
    }
    if pred.dt() != truth.dt() {
        log::warn!("frame spacing differs: prediction {} vs truth {}", pred.dt(), truth.dt());
    }
    if pred.metas() != truth.metas() {
        log::warn!("instance metadata differs between prediction and truth; pairing by index");
    }
    Ok(())
}

fn components_row(lead: Vec<Cell>, c: &LossComponents, total: f64) -> Vec<Cell> {
    lead.into_iter()
        .chain(c.as_array().into_iter().map(Cell::from))
        .chain([Cell::from(total)])
        .collect()
}

fn loss_header(lead: &[&str]) -> Vec<String> {
    lead.iter()
        .copied()
        .chain(LossComponents::LABELS)
        .chain(["total"])
        .map(String::from)
        .collect()
}

/// `‖p − t‖ / ‖t‖` for one frame of one channel; `inf` when only the truth
/// frame vanishes.
fn frame_relative_error(p: &ndarray::Array2<f64>, t: &ndarray::Array2<f64>) -> f64 {
    let diff: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = t.iter().map(|v| v * v).sum();
    if diff == 0.0 {
        0.0
    } else {
        (diff / norm).sqrt()
    }
}

#[derive(Debug, Serialize)]
struct EvaluatedInstance {
    index: usize,
    c0: f64,
    seed: u64,
    report: LossReport,
}

#[cfg(feature = "plots")]
fn write_difference_maps(cfg: &RunConfig, i: usize, pred: &Trajectory, truth: &Trajectory, dir: &Path) -> Result<()> {
    let snap = ensure_dir(&dir.join(SNAPSHOT_DIR))?;
    for k in cfg.snapshot_frames(pred.len()) {
        if k >= pred.len() {
            continue;
        }
        for ch in Channel::ALL {
            let d = pred.frames()[k].channel(ch).values() - truth.frames()[k].channel(ch).values();
            let path = snap.join(format!("diff_{i:03}_{}_f{k:04}.png", ch.name()));
            crate::plots::save(d.mapv(f64::abs).view(), &path)?;
        }
    }
    Ok(())
}

#[cfg(not(feature = "plots"))]
fn write_difference_maps(_: &RunConfig, _: usize, _: &Trajectory, _: &Trajectory, _: &Path) -> Result<()> {
    Ok(())
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    pred_path: &Path,
    truth_path: &Path,
    form: Option<SpatialForm>,
    console: Console,
) -> Result<()> {
    let pred = load_input(pred_path)?;
    let truth = load_input(truth_path)?;
    check_compatible(&pred, &truth)?;
    let dir = ensure_dir(&cfg.output.dir)?;
    let form = form.unwrap_or(pred.spatial_form());
    let mut table = Table::new(loss_header(&["instance", "c0", "seed"]));
    let mut errors = Table::new(["instance", "channel", "frame", "relative_l2"]);
    let mut records = Vec::new();
    for (i, (p, t)) in pred.instances().iter().zip(truth.instances()).enumerate() {
        let report = total_loss_with_form(&p.trajectory, Some(&t.trajectory), &cfg.loss, &cfg.backend, form)?;
        table.push(components_row(
            vec![i.into(), t.meta.c0.into(), t.meta.seed.into()],
            &report.components,
            report.total,
        ));
        for ch in Channel::ALL {
            for (k, (fp, ft)) in p.trajectory.frames().iter().zip(t.trajectory.frames()).enumerate() {
                let e = frame_relative_error(fp.channel(ch).values(), ft.channel(ch).values());
                errors.push(vec![i.into(), ch.name().into(), k.into(), e.into()]);
            }
        }
        if cfg.output.plots {
            write_difference_maps(cfg, i, &p.trajectory, &t.trajectory, &dir)?;
        }
        records.push(EvaluatedInstance {
            index: i,
            c0: t.meta.c0,
            seed: t.meta.seed,
            report,
        });
    }
    table.write_csv(&dir.join(EVALUATE_CSV))?;
    errors.write_csv(&dir.join(RELATIVE_ERROR_CSV))?;
    let json_path = dir.join(EVALUATE_JSON);
    let json = serde_json::to_string_pretty(&records).expect("reports serialize");
    fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
    if !console.machine {
        println!(
            "backend {}, CH operator {}, weights {:?}",
            cfg.backend.kind.label(),
            form.short_name(),
            cfg.loss.as_array()
        );
    }
    console.table(&table);
    Ok(())
}

/// The trajectory and (optional) truth that a backend comparison scores.
fn compare_inputs(
    cfg: &RunConfig,
    input: Option<&Path>,
    truth: Option<&Path>,
    instance: usize,
) -> Result<(Trajectory, Option<Trajectory>, String)> {
    let pick = |ds: Dataset, what: &str| -> Result<Trajectory> {
        let n = ds.len();
        ds.into_instances()
            .into_iter()
            .nth(instance)
            .map(|inst| inst.trajectory)
            .ok_or_else(|| CliError::Config(format!("instance {instance} out of range ({what} has {n})")))
    };
    match input {
        None => {
            if truth.is_some() {
                return Err(CliError::Config("--truth needs --input".into()));
            }
            let traj = backend_gap_case(cfg.grid.build()?, &cfg.params, cfg.run.frames)?;
            // the manufactured solution is its own exact truth
            Ok((traj.clone(), Some(traj), "manufactured linear CH solution".into()))
        }
        Some(path) => {
            let pred = pick(load_input(path)?, "input")?;
            let truth = match truth {
                Some(tp) => {
                    let t = pick(load_input(tp)?, "truth")?;
                    if !pred.same_shape(&t) {
                        return Err(CliError::Incompatible(format!(
                            "shape mismatch: input has {} frames on {}x{}, truth has {} frames on {}x{}",
                            pred.len(),
                            pred.grid().nx(),
                            pred.grid().ny(),
                            t.len(),
                            t.grid().nx(),
                            t.grid().ny()
                        )));
                    }
                    Some(t)
                }
                None => None,
            };
            Ok((pred, truth, format!("{} instance {instance}", path.display())))
        }
    }
}

pub fn cmd_backend_compare(
    cfg: &RunConfig,
    input: Option<&Path>,
    truth: Option<&Path>,
    instance: usize,
    form: Option<SpatialForm>,
    console: Console,
) -> Result<()> {
    let (pred, truth, source) = compare_inputs(cfg, input, truth, instance)?;
    let mut weights = cfg.loss;
    if truth.is_none() && weights.needs_truth() {
        log::warn!("no truth given; data terms are left out of the total");
        let [_, _, _, ac1, ac2, ch] = weights.as_array();
        weights = LossWeights::from_array([0.0, 0.0, 0.0, ac1, ac2, ch]);
    }
    let backends: Vec<DerivBackend> = BackendKind::ALL
        .iter()
        .map(|&kind| match kind {
            BackendKind::FourierExtension if cfg.backend.kind == kind => cfg.backend,
            _ => DerivBackend::of_kind(kind),
        })
        .collect();
    let reports = match form {
        Some(form) => backends
            .iter()
            .map(|b| total_loss_with_form(&pred, truth.as_ref(), &weights, b, form))
            .collect::<thetaprime_core::Result<Vec<_>>>()?,
        None => compare_backends(&pred, truth.as_ref(), &weights, &backends)?,
    };
    let mut table = Table::new(loss_header(&["backend"]));
    for r in &reports {
        table.push(components_row(vec![r.backend.kind.short_name().into()], &r.components, r.total));
    }
    let dir = ensure_dir(&cfg.output.dir)?;
    table.write_csv(&dir.join(BACKEND_CSV))?;
    if !console.machine {
        println!(
            "source: {source}; {} frames, CH operator {}",
            pred.len(),
            reports[0].spatial_form.short_name()
        );
    }
    console.table(&table);
    Ok(())
}

pub fn cmd_export(cfg: &RunConfig, input: &Path, _console: Console) -> Result<()> {
    let ds = load_input(input)?;
    let dir: PathBuf = cfg.output.dir.clone();
    export_npy(&ds, &dir)?;
    println!("exported {} instances to {}", ds.len(), dir.display());
    Ok(())
}
