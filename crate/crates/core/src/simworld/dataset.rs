use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::driver::scripted_driver;
use super::grid::{render_og, Cell, GridGeometry, OccupancyGrid, Shape, World};
use super::kinematics::{step_kinematics, VehicleParams, VehicleState};
use super::road::Road;
use super::{ScenarioConfig, MAX_SUBSTEP};
use crate::util::mix_seed;
use crate::{Error, Point2, Result};

pub const MAGIC: &[u8; 4] = b"NTRJ";
pub const FORMAT_VERSION: u16 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const MAX_ATTEMPTS: u64 = 1000;

/// One training/evaluation sample: the observed grid window ending at time
/// `t`, the ego states over that window, and the driver's next positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// `tau_i + 1` grids, oldest first.
    pub grids: Vec<OccupancyGrid>,
    /// Ego states matching `grids`.
    pub ego_states: Vec<VehicleState>,
    /// World-frame destination.
    pub destination: Point2,
    /// World-frame driver positions at `t+1 ..= t+tau_o`.
    pub reference_trajectory: Vec<Point2>,
    pub dt: f64,
}

impl EpisodeRecord {
    /// Ego state at the prediction time `t`.
    pub fn current(&self) -> &VehicleState {
        self.ego_states.last().expect("record has at least one state")
    }

    /// Destination relative to the ego position at `t`.
    pub fn dest_rel(&self) -> Point2 {
        let e = self.current();
        [self.destination[0] - e.x, self.destination[1] - e.y]
    }

    /// Reference trajectory relative to the ego position at `t`.
    pub fn reference_rel(&self) -> Vec<Point2> {
        let e = self.current();
        self.reference_trajectory
            .iter()
            .map(|p| [p[0] - e.x, p[1] - e.y])
            .collect()
    }

    pub fn tau_i(&self) -> usize {
        self.grids.len() - 1
    }

    pub fn tau_o(&self) -> usize {
        self.reference_trajectory.len()
    }
}

/// Fixed-size header of a binary record file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordHeader {
    pub version: u16,
    pub tau_i: u32,
    pub tau_o: u32,
    pub width: u32,
    pub height: u32,
    pub resolution: f32,
    pub dt: f32,
}

/// Summary written next to the record files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u16,
    pub scenario: ScenarioConfig,
    pub n_episodes: usize,
    pub tau_i: usize,
    pub tau_o: usize,
    pub grid: GridGeometry,
    pub dt: f64,
    /// Episodes discarded because the reference driver collided.
    pub regenerated: usize,
    pub files: Vec<String>,
    /// Simulator settings that are local choices rather than known values.
    pub assumed_defaults: Vec<String>,
}

/// A loaded dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub episodes: Vec<EpisodeRecord>,
}

fn q(x: f64) -> f64 {
    x as f32 as f64
}

fn quantize_state(s: &VehicleState) -> VehicleState {
    VehicleState {
        x: q(s.x),
        y: q(s.y),
        heading: q(s.heading),
        speed: q(s.speed),
        steering: q(s.steering),
    }
}

struct Participant {
    s0: f64,
    lateral: f64,
    speed: f64,
}

impl Participant {
    fn footprint(&self, road: &Road, t: f64, params: &VehicleParams) -> Option<Shape> {
        let s = self.s0 + self.speed * t;
        if s > road.centerline.length() {
            return None;
        }
        let (p, h) = road.pose_at(s, self.lateral);
        Some(Shape::vehicle(p, h, params.length, params.width))
    }
}

enum Outcome {
    Done(EpisodeRecord),
    Collided,
}

fn simulate_one(
    config: &ScenarioConfig,
    tau_i: usize,
    tau_o: usize,
    seed: u64,
) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = config.vehicle_params();
    let duration = config.episode_length as f64 * config.dt;
    let start_s = rng.random_range(20.0..40.0);
    let road_len = start_s + config.v_max * duration + 80.0;
    let road = Road::generate(
        &mut rng,
        road_len,
        config.road_width,
        config.straight_fraction,
        config.mean_curve_radius_deg,
    );

    let max_lat = (config.road_width / 2.0 - params.width / 2.0 - 0.2).max(0.0);
    let traffic: Vec<Participant> = (0..config.n_participants)
        .map(|_| Participant {
            s0: rng.random_range(0.0..road_len),
            lateral: if max_lat > 0.0 {
                rng.random_range(-max_lat..=max_lat)
            } else {
                0.0
            },
            speed: rng.random_range(config.v_min..=config.v_max),
        })
        .collect();

    let (p0, h0) = road.pose_at(start_s, 0.0);
    let mut ego = VehicleState::new(p0[0], p0[1], h0, rng.random_range(config.v_min..=config.v_max));
    let target_speed = rng.random_range(config.v_min..=config.v_max);

    let substeps = (config.dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = config.dt / substeps as f64;
    let shapes_at = |t: f64| -> Vec<Shape> {
        traffic
            .iter()
            .filter_map(|p| p.footprint(&road, t, &params))
            .collect()
    };
    let collides = |ego: &VehicleState, t: f64| {
        let fp = Shape::vehicle(ego.position(), ego.heading, params.length, params.width);
        shapes_at(t).iter().any(|s| s.intersects(&fp))
    };

    if collides(&ego, 0.0) {
        return Ok(Outcome::Collided);
    }
    let mut states = vec![ego];
    for k in 0..config.episode_length {
        for j in 0..substeps {
            let cmd = scripted_driver(&road.centerline, &ego, 4.0 + 0.5 * ego.speed, target_speed, &params);
            if cmd.finished {
                return Err(Error::data("generated road too short for the episode"));
            }
            ego = step_kinematics(&ego, cmd.accel, cmd.steer_rate, h, &params)?;
            let t = k as f64 * config.dt + (j + 1) as f64 * h;
            if collides(&ego, t) {
                return Ok(Outcome::Collided);
            }
        }
        states.push(ego);
    }

    let t_idx = config.episode_length - tau_o;
    let window: Vec<VehicleState> = states[t_idx - tau_i..=t_idx]
        .iter()
        .map(quantize_state)
        .collect();
    let grids = window
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = (t_idx - tau_i + i) as f64 * config.dt;
            let world = World {
                road: Some(road.clone()),
                obstacles: shapes_at(t),
            };
            render_og(&world, s, config.grid)
        })
        .collect();
    let reference_trajectory = states[t_idx + 1..=t_idx + tau_o]
        .iter()
        .map(|s| [q(s.x), q(s.y)])
        .collect();
    let last = states[t_idx + tau_o];
    let dest = road.centerline.project(last.position()).foot;

    Ok(Outcome::Done(EpisodeRecord {
        grids,
        ego_states: window,
        destination: [q(dest[0]), q(dest[1])],
        reference_trajectory,
        dt: q(config.dt),
    }))
}

/// Simulates `n_episodes` records in memory. Returns the records and the
/// number of discarded (collided) attempts.
pub fn simulate_episodes(
    config: &ScenarioConfig,
    n_episodes: usize,
    tau_i: usize,
    tau_o: usize,
) -> Result<(Vec<EpisodeRecord>, usize)> {
    config.validate()?;
    if n_episodes == 0 {
        return Err(Error::domain("n_episodes must be positive"));
    }
    if tau_o == 0 {
        return Err(Error::domain("tau_o must be at least 1"));
    }
    if config.episode_length < tau_i + tau_o {
        return Err(Error::domain(format!(
            "episode_length {} shorter than tau_i + tau_o = {}",
            config.episode_length,
            tau_i + tau_o
        )));
    }
    let results: Vec<Result<(EpisodeRecord, usize)>> = (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            let base = mix_seed(config.seed, i as u64);
            for attempt in 0..MAX_ATTEMPTS {
                match simulate_one(config, tau_i, tau_o, mix_seed(base, attempt))? {
                    Outcome::Done(rec) => return Ok((rec, attempt as usize)),
                    Outcome::Collided => continue,
                }
            }
            Err(Error::data(format!(
                "episode {i}: driver collided in {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect();
    let mut episodes = Vec::with_capacity(n_episodes);
    let mut regenerated = 0;
    for r in results {
        let (rec, retries) = r?;
        episodes.push(rec);
        regenerated += retries;
    }
    Ok((episodes, regenerated))
}

/// Generates a dataset directory: `manifest.json` plus one binary record per
/// episode.
pub fn generate_dataset(
    config: &ScenarioConfig,
    n_episodes: usize,
    tau_i: usize,
    tau_o: usize,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let (episodes, regenerated) = simulate_episodes(config, n_episodes, tau_i, tau_o)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(episodes.len());
    for (i, rec) in episodes.iter().enumerate() {
        let name = format!("episode_{i:05}.ntrj");
        fs::write(out_dir.join(&name), encode_record(rec)?)?;
        files.push(name);
    }
    let manifest = DatasetManifest {
        format: String::from_utf8_lossy(MAGIC).into_owned(),
        version: FORMAT_VERSION,
        scenario: config.clone(),
        n_episodes,
        tau_i,
        tau_o,
        grid: config.grid,
        dt: config.dt,
        regenerated,
        files,
        assumed_defaults: vec![
            format!("dt = {} s (sample period)", config.dt),
            format!(
                "grid = {}x{} @ {} m/cell",
                config.grid.width, config.grid.height, config.grid.resolution
            ),
            format!("integrator substep <= {MAX_SUBSTEP} s (forward Euler)"),
        ],
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(out_dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Loads a dataset directory written by [`generate_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let episodes = manifest
        .files
        .iter()
        .map(|f| {
            let (header, rec) = decode_record(&fs::read(dir.join(f))?)?;
            if header.tau_i as usize != manifest.tau_i || header.tau_o as usize != manifest.tau_o {
                return Err(Error::data(format!("{f}: horizon does not match manifest")));
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    if episodes.len() != manifest.n_episodes {
        return Err(Error::data("manifest episode count does not match files"));
    }
    Ok(Dataset { manifest, episodes })
}

/// Serializes a record. Layout, all little-endian:
///
/// ```text
/// "NTRJ" | version u16 | tau_i u32 | tau_o u32 | width u32 | height u32
///        | resolution f32 | dt f32
/// grids:       (tau_i+1) * width * height bytes, row-major, oldest first
/// ego states:  (tau_i+1) * [x, y, heading, speed, steering] f32
/// destination: [x, y] f32
/// reference:   tau_o * [x, y] f32
/// ```
pub fn encode_record(rec: &EpisodeRecord) -> Result<Vec<u8>> {
    let g0 = rec
        .grids
        .first()
        .ok_or_else(|| Error::domain("record without grids"))?;
    Error::check_len("ego states", rec.grids.len(), rec.ego_states.len())?;
    let n_cells = g0.width * g0.height;
    let mut out = Vec::with_capacity(30 + rec.grids.len() * (n_cells + 20) + 8 * (rec.tau_o() + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [rec.tau_i(), rec.tau_o(), g0.width, g0.height] {
        let v = u32::try_from(v).map_err(|_| Error::domain("dimension exceeds u32"))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(g0.resolution as f32).to_le_bytes());
    out.extend_from_slice(&(rec.dt as f32).to_le_bytes());
    for g in &rec.grids {
        if g.geometry() != g0.geometry() {
            return Err(Error::domain("grids in a record must share geometry"));
        }
        out.extend(g.cells.iter().map(|&c| c as u8));
    }
    let mut put = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for s in &rec.ego_states {
        for v in [s.x, s.y, s.heading, s.speed, s.steering] {
            put(v);
        }
    }
    put(rec.destination[0]);
    put(rec.destination[1]);
    for p in &rec.reference_trajectory {
        put(p[0]);
        put(p[1]);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::data("record truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn point(&mut self) -> Result<Point2> {
        Ok([self.f32()? as f64, self.f32()? as f64])
    }
}

/// Parses a record produced by [`encode_record`].
pub fn decode_record(bytes: &[u8]) -> Result<(RecordHeader, EpisodeRecord)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::data("bad magic"));
    }
    let header = RecordHeader {
        version: r.u16()?,
        tau_i: r.u32()?,
        tau_o: r.u32()?,
        width: r.u32()?,
        height: r.u32()?,
        resolution: r.f32()?,
        dt: r.f32()?,
    };
    if header.version != FORMAT_VERSION {
        return Err(Error::data(format!("unsupported version {}", header.version)));
    }
    let geometry = GridGeometry::new(
        header.width as usize,
        header.height as usize,
        header.resolution as f64,
    )
    .map_err(|e| Error::data(e.to_string()))?;
    let n_grids = header.tau_i as usize + 1;
    let raw_grids = (0..n_grids)
        .map(|_| {
            r.take(geometry.cell_count())?
                .iter()
                .map(|&b| Cell::from_byte(b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ego_states = (0..n_grids)
        .map(|_| {
            Ok(VehicleState {
                x: r.f32()? as f64,
                y: r.f32()? as f64,
                heading: r.f32()? as f64,
                speed: r.f32()? as f64,
                steering: r.f32()? as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let destination = r.point()?;
    let reference_trajectory = (0..header.tau_o)
        .map(|_| r.point())
        .collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::data("trailing bytes after record"));
    }
    let grids = raw_grids
        .into_iter()
        .zip(&ego_states)
        .map(|(cells, s)| OccupancyGrid {
            width: geometry.width,
            height: geometry.height,
            resolution: geometry.resolution,
            origin: geometry.origin_for(s.position()),
            cells,
        })
        .collect();
    Ok((
        header,
        EpisodeRecord {
            grids,
            ego_states,
            destination,
            reference_trajectory,
            dt: header.dt as f64,
        },
    ))
}
