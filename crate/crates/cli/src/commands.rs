use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use neurotraj::dwa::{plan, RobotState};
use neurotraj::evalkit::{axis_errors, compare_report, read_report_json, series_csv, write_report_json, ErrorReport};
use neurotraj::evolve::{latest_checkpoint, load_checkpoint, train as run_training, write_stats_csv, EvalBatch};
use neurotraj::neuralnet::{Network, NetworkInput, NetworkTopology};
use neurotraj::pareto::knee_point;
use neurotraj::simworld::{generate_dataset, load_dataset, Dataset};
use neurotraj::Trajectory;
use serde::Serialize;

use crate::config::{select_name, RunConfig, Selection};
use crate::CliError;

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// `<out>/<command>-<first 16 hex digits of sha256(parts)>`.
fn run_dir(out: &Path, command: &str, parts: &[&[u8]]) -> Result<PathBuf, CliError> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    let dir = out.join(format!("{command}-{hex}"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn open_dataset(dir: &Path) -> Result<(Dataset, Vec<u8>), CliError> {
    let manifest = read_input(&dir.join("manifest.json"))?;
    Ok((load_dataset(dir)?, manifest))
}

fn check_compatible(dataset: &Dataset, topology: &NetworkTopology) -> Result<(), CliError> {
    let m = &dataset.manifest;
    if m.tau_i != topology.tau_i || m.tau_o != topology.tau_o || m.grid != topology.grid {
        return Err(data(format!(
            "dataset (tau_i {}, tau_o {}, grid {}x{}) does not match the network (tau_i {}, tau_o {}, grid {}x{})",
            m.tau_i, m.tau_o, m.grid.width, m.grid.height,
            topology.tau_i, topology.tau_o, topology.grid.width, topology.grid.height
        )));
    }
    Ok(())
}

pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let toml = cfg.to_toml()?;
    let dir = run_dir(out, "gen-data", &[toml.as_bytes()])?;
    fs::write(dir.join("config.toml"), &toml)?;
    let d = &cfg.dataset;
    generate_dataset(&cfg.scenario, d.n_episodes, d.tau_i, d.tau_o, &dir)?;
    Ok(dir)
}

pub fn train(cfg: &RunConfig, dataset_dir: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (dataset, manifest) = open_dataset(dataset_dir)?;
    check_compatible(&dataset, &cfg.topology)?;
    let toml = cfg.to_toml()?;
    let dir = run_dir(out, "train", &[toml.as_bytes(), &manifest])?;
    fs::write(dir.join("config.toml"), &toml)?;

    let band = &dataset.manifest.scenario;
    let batch = EvalBatch::new(&dataset.episodes, band.v_min, band.v_max)?;
    let outcome = run_training(&cfg.evolution, &cfg.topology, batch, Some(&dir.join("checkpoints")))?;

    write_stats_csv(&dir.join("stats.csv"), &outcome.stats)?;
    let hv: Vec<(f64, f64)> = outcome
        .stats
        .iter()
        .map(|s| (s.generation as f64, s.hypervolume))
        .collect();
    fs::write(dir.join("hypervolume.csv"), series_csv("generation", "hypervolume", &hv))?;
    let mut front = String::from("index,l1,l2,l3,generation\n");
    for (i, e) in outcome.archive.entries().iter().enumerate() {
        let f = e.fitness;
        front.push_str(&format!("{i},{},{},{},{}\n", f.l1, f.l2, f.l3, e.generation));
    }
    fs::write(dir.join("front.csv"), front)?;
    Ok(dir)
}

fn resolve_checkpoint(path: &Path) -> Result<PathBuf, CliError> {
    if path.join("state.json").is_file() {
        return Ok(path.to_path_buf());
    }
    let nested = path.join("checkpoints");
    let base = if nested.is_dir() { nested } else { path.to_path_buf() };
    latest_checkpoint(&base)?.ok_or_else(|| data(format!("no checkpoint found under {}", path.display())))
}

#[derive(Serialize)]
struct SelectionRecord {
    rule: &'static str,
    archive_index: usize,
    archive_size: usize,
    l1: f64,
    l2: f64,
    l3: f64,
}

fn write_report(dir: &Path, report: &ErrorReport) -> Result<(), CliError> {
    write_report_json(&dir.join("report.json"), report)?;
    fs::write(dir.join("report.csv"), compare_report(std::slice::from_ref(report))?)?;
    let rows: Vec<(f64, f64)> = report
        .rmse_series
        .iter()
        .enumerate()
        .map(|(i, &r)| (i as f64, r))
        .collect();
    fs::write(dir.join("rmse_series.csv"), series_csv("episode", "rmse", &rows))?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, dataset_dir: &Path, checkpoint: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (dataset, manifest) = open_dataset(dataset_dir)?;
    let ckpt = resolve_checkpoint(checkpoint)?;
    let state = read_input(&ckpt.join("state.json"))?;
    let loaded = load_checkpoint(&ckpt)?;
    let topology = &loaded.header.topology;
    check_compatible(&dataset, topology)?;
    let archive = loaded.archive.entries();
    if archive.is_empty() {
        return Err(data("checkpoint archive is empty"));
    }

    let min_l1 = (0..archive.len())
        .min_by(|&a, &b| archive[a].fitness.l1.total_cmp(&archive[b].fitness.l1))
        .expect("archive is not empty");
    let index = match cfg.eval.select {
        Selection::MinL1 => min_l1,
        Selection::Knee => knee_point(&loaded.archive.objectives())?.unwrap_or(min_l1),
    };
    let chosen = &archive[index];

    let toml = cfg.to_toml()?;
    let dir = run_dir(out, "eval", &[toml.as_bytes(), &manifest, &state])?;
    fs::write(dir.join("config.toml"), &toml)?;

    let net = Network::new(topology, &chosen.theta)?;
    let pairs = dataset
        .episodes
        .iter()
        .map(|ep| {
            let est = net.forward(&NetworkInput::from_grids(&ep.grids, ep.dest_rel())?)?;
            Ok((est, Trajectory::new(ep.reference_rel())))
        })
        .collect::<Result<Vec<_>, neurotraj::Error>>()?;
    let report = axis_errors(&pairs, "neurotraj", &dataset.manifest.scenario.name)?;
    write_report(&dir, &report)?;
    write_json(
        &dir.join("selection.json"),
        &SelectionRecord {
            rule: select_name(cfg.eval.select),
            archive_index: index,
            archive_size: archive.len(),
            l1: chosen.fitness.l1,
            l2: chosen.fitness.l2,
            l3: chosen.fitness.l3,
        },
    )?;
    Ok(dir)
}

#[derive(Serialize)]
struct DwaSummary {
    episodes: usize,
    stopped: usize,
}

pub fn dwa(cfg: &RunConfig, dataset_dir: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (dataset, manifest) = open_dataset(dataset_dir)?;
    if dataset.manifest.tau_o != cfg.dwa.prediction_steps {
        return Err(data(format!(
            "dataset horizon {} differs from the planner's {} prediction steps",
            dataset.manifest.tau_o, cfg.dwa.prediction_steps
        )));
    }
    let toml = cfg.to_toml()?;
    let dir = run_dir(out, "dwa", &[toml.as_bytes(), &manifest])?;
    fs::write(dir.join("config.toml"), &toml)?;

    let wheelbase = dataset.manifest.scenario.vehicle_params().wheelbase;
    let mut stopped = 0;
    let mut pairs = Vec::with_capacity(dataset.episodes.len());
    for ep in &dataset.episodes {
        let ego = ep.current();
        let og = ep.grids.last().expect("record has at least one grid");
        let p = plan(og, &RobotState::from_vehicle(ego, wheelbase), ep.destination, &cfg.dwa)?;
        stopped += usize::from(p.stopped);
        let rel = p.trajectory.points.iter().map(|q| [q[0] - ego.x, q[1] - ego.y]).collect();
        pairs.push((Trajectory::new(rel), Trajectory::new(ep.reference_rel())));
    }
    let report = axis_errors(&pairs, "dwa", &dataset.manifest.scenario.name)?;
    write_report(&dir, &report)?;
    write_json(
        &dir.join("dwa_summary.json"),
        &DwaSummary {
            episodes: pairs.len(),
            stopped,
        },
    )?;
    Ok(dir)
}

pub fn compare(reports: &[PathBuf], out: &Path) -> Result<PathBuf, CliError> {
    let mut loaded = Vec::with_capacity(reports.len());
    let mut raw = Vec::with_capacity(reports.len());
    for p in reports {
        raw.push(read_input(p)?);
        loaded.push(read_report_json(p)?);
    }
    let csv = compare_report(&loaded)?;
    let parts: Vec<&[u8]> = raw.iter().map(|r| r.as_slice()).collect();
    let dir = run_dir(out, "compare", &parts)?;
    fs::write(dir.join("compare.csv"), csv)?;
    Ok(dir)
}

pub fn inspect_front(checkpoint: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_checkpoint(&resolve_checkpoint(checkpoint)?)?;
    writeln!(stdout, "# archive at generation {}", loaded.generation)?;
    writeln!(stdout, "index,l1,l2,l3,generation")?;
    for (i, e) in loaded.archive.entries().iter().enumerate() {
        let f = e.fitness;
        writeln!(stdout, "{i},{},{},{},{}", f.l1, f.l2, f.l3, e.generation)?;
    }
    writeln!(stdout, "# hypervolume")?;
    writeln!(stdout, "generation,hypervolume")?;
    for s in &loaded.stats {
        writeln!(stdout, "{},{}", s.generation, s.hypervolume)?;
    }
    Ok(())
}
