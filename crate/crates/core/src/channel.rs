//! Far-field single-path channel synthesis.
//!
//! A surface channel is stored as the column vector `h` whose conjugate
//! transpose is the received-signal row `sqrt(g) * a^H * xi`, where
//! `a^H[n] = exp(j 2π/λ f·r_n)`. Precoders therefore act through `h^H w`.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{antenna_positions, rotation_matrix, BsRotation, GeometryConfig, SurfaceRotation};
use crate::scenarios::{NetworkScenario, UserKind};
use crate::seeding::{self, Domain};
use crate::{CVector, Error, Result, C64};

const UNIT_TOLERANCE: f64 = 1e-9;

fn check_unit(v: &Vector3<f64>) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NonUnitDirection { norm });
    }
    Ok(())
}

/// 3GPP-style element pattern with separable vertical/horizontal cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPattern {
    pub max_gain_dbi: f64,
    pub vertical_beamwidth_deg: f64,
    pub horizontal_beamwidth_deg: f64,
    pub side_lobe_db: f64,
    pub front_back_db: f64,
}

impl Default for GainPattern {
    fn default() -> Self {
        Self {
            max_gain_dbi: 8.0,
            vertical_beamwidth_deg: 65.0,
            horizontal_beamwidth_deg: 65.0,
            side_lobe_db: 30.0,
            front_back_db: 30.0,
        }
    }
}

impl GainPattern {
    /// Linear gain at boresight.
    pub fn peak_gain(&self) -> f64 {
        10f64.powf(self.max_gain_dbi / 10.0)
    }

    /// Linear gain at the front-back floor.
    pub fn floor_gain(&self) -> f64 {
        10f64.powf((self.max_gain_dbi - self.front_back_db) / 10.0)
    }

    /// Linear power gain for a unit direction expressed in the surface frame.
    pub fn element_gain(&self, local_dir: &Vector3<f64>) -> Result<f64> {
        check_unit(local_dir)?;
        let zenith = local_dir.z.clamp(-1.0, 1.0).acos().to_degrees();
        let azimuth = local_dir.y.atan2(local_dir.x).to_degrees();
        let vertical = -(12.0 * ((zenith - 90.0) / self.vertical_beamwidth_deg).powi(2))
            .min(self.side_lobe_db);
        let horizontal = -(12.0 * (azimuth / self.horizontal_beamwidth_deg).powi(2))
            .min(self.front_back_db);
        let total = -(-(vertical + horizontal)).min(self.front_back_db);
        Ok(10f64.powf((self.max_gain_dbi + total) / 10.0))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.vertical_beamwidth_deg > 0.0 && self.horizontal_beamwidth_deg > 0.0) {
            return Err("beamwidths must be positive".into());
        }
        if !(self.side_lobe_db > 0.0 && self.front_back_db > 0.0) {
            return Err("pattern floors must be positive".into());
        }
        Ok(())
    }
}

/// Everything needed to turn a direction into a surface response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayModel {
    pub geometry: GeometryConfig,
    pub pattern: GainPattern,
    pub wavelength_m: f64,
}

impl ArrayModel {
    pub fn standard(wavelength_m: f64) -> Self {
        Self {
            geometry: GeometryConfig::standard(wavelength_m),
            pattern: GainPattern::default(),
            wavelength_m,
        }
    }
}

/// Gain of a rotated surface towards global direction `f`.
pub fn effective_gain(pattern: &GainPattern, z: &SurfaceRotation, f: &Vector3<f64>) -> Result<f64> {
    check_unit(f)?;
    let local = rotation_matrix(z).transpose() * f;
    pattern.element_gain(&local)
}

/// Free-space reference loss times a power-law decay: `(λ/4π)² d^-η`.
pub fn path_gain(distance: f64, wavelength: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    let reference = wavelength / (4.0 * std::f64::consts::PI);
    Ok(reference * reference * distance.powf(-exponent))
}

/// Row steering entries `exp(j 2π/λ f·r_n)`.
pub fn steering_vector(
    z: &SurfaceRotation,
    f: &Vector3<f64>,
    geometry: &GeometryConfig,
    wavelength: f64,
) -> Vec<C64> {
    let k = std::f64::consts::TAU / wavelength;
    antenna_positions(z, geometry)
        .iter()
        .map(|r| C64::from_polar(1.0, k * f.dot(r)))
        .collect()
}

/// Channel column of one surface for coefficient `xi`.
pub fn surface_channel(
    z: &SurfaceRotation,
    f: &Vector3<f64>,
    xi: C64,
    model: &ArrayModel,
) -> Result<Vec<C64>> {
    let amplitude = effective_gain(&model.pattern, z, f)?.sqrt();
    Ok(steering_vector(z, f, &model.geometry, model.wavelength_m)
        .into_iter()
        .map(|a| (a * xi).conj() * amplitude)
        .collect())
}

/// Stacked channel of all surfaces of one base station, in surface order.
pub fn stacked_channel(
    z: &BsRotation,
    bs_pos: &Vector3<f64>,
    user_pos: &Vector3<f64>,
    xi: C64,
    model: &ArrayModel,
) -> Result<CVector> {
    let delta = user_pos - bs_pos;
    let dist = delta.norm();
    if !(dist > 0.0) {
        return Err(Error::CoincidentPositions);
    }
    let f = delta / dist;
    let n = model.geometry.num_antennas();
    let mut h = CVector::zeros(n * z.len());
    for (b, surface) in z.surfaces.iter().enumerate() {
        let block = surface_channel(surface, &f, xi, model)?;
        h.rows_mut(b * n, n).copy_from_slice(&block);
    }
    Ok(h)
}

/// Rotation-independent randomness of one Monte Carlo sample: user positions
/// and path coefficients. Derived from `(seed, sample_index, m, k)` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingDraw {
    pub sample_index: u64,
    pub seed: u64,
    pub user_positions: Vec<Vector3<f64>>,
    /// `xi[m][k]`, present for every relevant (station, user) pair.
    pub xi: Vec<Vec<Option<C64>>>,
}

impl FadingDraw {
    pub fn generate(scenario: &NetworkScenario, sample_index: u64, seed: u64) -> Self {
        let user_positions: Vec<_> = (0..scenario.num_users())
            .map(|k| draw_user_position(scenario, k, sample_index, seed))
            .collect();
        let xi = (0..scenario.num_cells())
            .map(|m| {
                (0..scenario.num_users())
                    .map(|k| {
                        if !scenario.is_relevant(m, k) {
                            return None;
                        }
                        let d = (user_positions[k] - scenario.bs_positions[m]).norm();
                        let beta = path_gain(d, scenario.array.wavelength_m, scenario.path_loss_exponent)
                            .expect("users never coincide with a base station");
                        let mut rng = seeding::stream(seed, Domain::Fading, &[sample_index, m as u64, k as u64]);
                        Some(draw_complex_gaussian(&mut rng, beta))
                    })
                    .collect()
            })
            .collect();
        Self { sample_index, seed, user_positions, xi }
    }

    pub fn coefficient(&self, m: usize, k: usize) -> Option<C64> {
        self.xi.get(m).and_then(|row| row.get(k)).copied().flatten()
    }
}

/// `CN(0, variance)` draw.
pub fn draw_complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

fn draw_user_position(scenario: &NetworkScenario, k: usize, sample_index: u64, seed: u64) -> Vector3<f64> {
    let user = &scenario.users()[k];
    let o = scenario.bs_positions[user.cell];
    let (dx, dy) = match &user.kind {
        UserKind::Edge { local } => (local[0], local[1]),
        UserKind::Regular { inner_radius, outer_radius } => {
            let mut rng = seeding::stream(seed, Domain::UserPosition, &[sample_index, k as u64]);
            // azimuth in (0, 2π]
            let az = std::f64::consts::TAU * (1.0 - rng.random::<f64>());
            let r = inner_radius + (outer_radius - inner_radius) * rng.random::<f64>();
            (r * az.cos(), r * az.sin())
        }
    };
    Vector3::new(o.x + dx, o.y + dy, scenario.user_height_m)
}

/// All relevant stacked channels of one sample under a given rotation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub sample_index: u64,
    pub seed: u64,
    pub user_positions: Vec<Vector3<f64>>,
    channels: Vec<Vec<Option<CVector>>>,
}

impl ChannelSample {
    pub fn get(&self, m: usize, k: usize) -> Option<&CVector> {
        self.channels.get(m).and_then(|row| row.get(k)).and_then(Option::as_ref)
    }

    pub fn num_cells(&self) -> usize {
        self.channels.len()
    }

    /// Build directly from per-pair channels. Mostly useful in tests.
    pub fn from_channels(channels: Vec<Vec<Option<CVector>>>) -> Self {
        let users = channels.first().map_or(0, Vec::len);
        Self {
            sample_index: 0,
            seed: 0,
            user_positions: vec![Vector3::zeros(); users],
            channels,
        }
    }

    pub fn channels_mut(&mut self) -> &mut Vec<Vec<Option<CVector>>> {
        &mut self.channels
    }

    /// Self-describing JSON dump.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .channels
            .iter()
            .enumerate()
            .flat_map(|(m, row)| {
                row.iter().enumerate().filter_map(move |(k, h)| {
                    h.as_ref().map(|h| {
                        serde_json::json!({
                            "bs": m,
                            "user": k,
                            "h": h.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                        })
                    })
                })
            })
            .collect();
        serde_json::json!({
            "sample_index": self.sample_index,
            "seed": self.seed,
            "user_positions": self.user_positions.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
            "convention": "received coefficient is h^H w; h^H = sqrt(g) a^H xi",
            "channels": entries,
        })
    }
}

/// Synthesize every relevant channel of `draw` under rotations `z` (one per BS).
pub fn synthesize(scenario: &NetworkScenario, z: &[BsRotation], draw: &FadingDraw) -> ChannelSample {
    let channels = (0..scenario.num_cells())
        .map(|m| {
            (0..scenario.num_users())
                .map(|k| draw.coefficient(m, k).map(|xi| pair_channel(scenario, &z[m], m, k, draw, xi)))
                .collect()
        })
        .collect();
    ChannelSample {
        sample_index: draw.sample_index,
        seed: draw.seed,
        user_positions: draw.user_positions.clone(),
        channels,
    }
}

fn pair_channel(
    scenario: &NetworkScenario,
    z_m: &BsRotation,
    m: usize,
    k: usize,
    draw: &FadingDraw,
    xi: C64,
) -> CVector {
    stacked_channel(z_m, &scenario.bs_positions[m], &draw.user_positions[k], xi, &scenario.array)
        .expect("scenario geometry keeps users away from base stations")
}

/// One Monte Carlo draw of the whole network's relevant channels.
pub fn draw_sample(scenario: &NetworkScenario, z: &[BsRotation], sample_index: u64, seed: u64) -> ChannelSample {
    synthesize(scenario, z, &FadingDraw::generate(scenario, sample_index, seed))
}

/// The channels one base station needs for its local problem: its own users
/// and the users of adjacent cells, the latter ordered by neighbour index
/// then user index.
#[derive(Debug, Clone)]
pub struct CellChannels {
    pub in_cell: Vec<CVector>,
    pub victims: Vec<CVector>,
    /// Adjacent cell of each victim.
    pub victim_cells: Vec<usize>,
}

pub fn cell_channels(scenario: &NetworkScenario, m: usize, z_m: &BsRotation, draw: &FadingDraw) -> CellChannels {
    let build = |k: usize| {
        let xi = draw.coefficient(m, k).expect("relevant pair");
        pair_channel(scenario, z_m, m, k, draw, xi)
    };
    let in_cell = scenario.users_of(m).map(build).collect();
    let mut victims = Vec::new();
    let mut victim_cells = Vec::new();
    for &n in scenario.neighbors(m) {
        for k in scenario.users_of(n) {
            victims.push(build(k));
            victim_cells.push(n);
        }
    }
    CellChannels { in_cell, victims, victim_cells }
}

impl CellChannels {
    /// Extract the local view of BS `m` from a full sample.
    pub fn from_sample(scenario: &NetworkScenario, m: usize, sample: &ChannelSample) -> Self {
        let get = |k: usize| sample.get(m, k).expect("relevant pair").clone();
        let in_cell = scenario.users_of(m).map(get).collect();
        let mut victims = Vec::new();
        let mut victim_cells = Vec::new();
        for &n in scenario.neighbors(m) {
            for k in scenario.users_of(n) {
                victims.push(get(k));
                victim_cells.push(n);
            }
        }
        CellChannels { in_cell, victims, victim_cells }
    }
}
