//! Surface rotations, antenna placement on the circular track and the
//! rotation feasibility penalty.
//!
//! Conventions: every base station has its own Cartesian frame centred on
//! the track. A surface's local frame has its normal along local +x, so the
//! first column of the rotation matrix is the global boresight
//! `[cos(az)cos(tilt), sin(az)cos(tilt), -sin(tilt)]`. Positive tilt points
//! the boresight below the horizon.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Map an angle onto `(0, 2π]`.
pub fn wrap_azimuth(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r == 0.0 {
        TAU
    } else {
        r
    }
}

/// Orientation of one surface: azimuth of the normal's horizontal projection
/// and downward tilt, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRotation {
    azimuth: f64,
    pub tilt: f64,
}

impl SurfaceRotation {
    pub fn new(azimuth: f64, tilt: f64) -> Self {
        Self { azimuth: wrap_azimuth(azimuth), tilt }
    }

    pub fn from_degrees(azimuth_deg: f64, tilt_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), tilt_deg.to_radians())
    }

    /// Azimuth in `(0, 2π]`.
    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn set_azimuth(&mut self, azimuth: f64) {
        self.azimuth = wrap_azimuth(azimuth);
    }

    /// Global direction of peak element gain.
    pub fn boresight(&self) -> Vector3<f64> {
        let (sp, cp) = self.azimuth.sin_cos();
        let (st, ct) = self.tilt.sin_cos();
        Vector3::new(cp * ct, sp * ct, -st)
    }
}

/// Rotations of the B surfaces of one base station, in surface order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsRotation {
    pub surfaces: Vec<SurfaceRotation>,
}

impl BsRotation {
    pub fn new(surfaces: Vec<SurfaceRotation>) -> Self {
        Self { surfaces }
    }

    /// Evenly spread azimuths `2π(b-1)/B + π/B` with a common tilt.
    pub fn uniform(num_surfaces: usize, tilt: f64) -> Self {
        let b = num_surfaces as f64;
        let surfaces = (0..num_surfaces)
            .map(|i| SurfaceRotation::new(TAU * i as f64 / b + PI / b, tilt))
            .collect();
        Self { surfaces }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Flatten as `[az_1, tilt_1, az_2, tilt_2, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.surfaces.iter().flat_map(|s| [s.azimuth(), s.tilt]).collect()
    }

    /// Inverse of [`BsRotation::to_vec`]; azimuths are wrapped.
    pub fn from_slice(values: &[f64]) -> Self {
        assert!(values.len().is_multiple_of(2), "rotation vector must have even length");
        let surfaces = values
            .chunks_exact(2)
            .map(|c| SurfaceRotation::new(c[0], c[1]))
            .collect();
        Self { surfaces }
    }
}

/// Physical parameters of the surfaces and the track.
///
/// Angles are radians in memory; the serialized form uses degrees with the
/// keys `track_radius_m`, `guard_angle_deg`, `tilt_min_deg`, `tilt_max_deg`
/// and `antenna_offsets_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryFile", into = "GeometryFile")]
pub struct GeometryConfig {
    pub track_radius: f64,
    pub antenna_offsets: Vec<Vector3<f64>>,
    pub guard_angle: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GeometryFile {
    track_radius_m: f64,
    guard_angle_deg: f64,
    tilt_min_deg: f64,
    tilt_max_deg: f64,
    antenna_offsets_m: Vec<[f64; 3]>,
}

impl TryFrom<GeometryFile> for GeometryConfig {
    type Error = String;

    fn try_from(f: GeometryFile) -> Result<Self, Self::Error> {
        let cfg = GeometryConfig {
            track_radius: f.track_radius_m,
            antenna_offsets: f
                .antenna_offsets_m
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect(),
            guard_angle: f.guard_angle_deg.to_radians(),
            tilt_min: f.tilt_min_deg.to_radians(),
            tilt_max: f.tilt_max_deg.to_radians(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<GeometryConfig> for GeometryFile {
    fn from(c: GeometryConfig) -> Self {
        GeometryFile {
            track_radius_m: c.track_radius,
            guard_angle_deg: c.guard_angle.to_degrees(),
            tilt_min_deg: c.tilt_min.to_degrees(),
            tilt_max_deg: c.tilt_max.to_degrees(),
            antenna_offsets_m: c.antenna_offsets.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

impl GeometryConfig {
    /// 2x2 square surface with quarter-wavelength offsets, 0.5 m track,
    /// 5° guard angle and a 0°..60° downward tilt range.
    pub fn standard(wavelength: f64) -> Self {
        let q = wavelength / 4.0;
        let antenna_offsets = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(sy, sz)| Vector3::new(0.0, sy * q, sz * q))
            .collect();
        Self {
            track_radius: 0.5,
            antenna_offsets,
            guard_angle: 5f64.to_radians(),
            tilt_min: 0.0,
            tilt_max: 60f64.to_radians(),
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.antenna_offsets.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.track_radius >= 0.0) {
            return Err(format!("track radius must be >= 0, got {}", self.track_radius));
        }
        if self.antenna_offsets.is_empty() {
            return Err("at least one antenna offset is required".into());
        }
        if !(self.guard_angle > 0.0) {
            return Err("guard angle must be positive".into());
        }
        if !(self.tilt_min <= self.tilt_max) {
            return Err("tilt_min must not exceed tilt_max".into());
        }
        Ok(())
    }
}

/// Z-Y rotation: azimuth about global z, then tilt about the rotated y axis.
pub fn rotation_matrix(z: &SurfaceRotation) -> Matrix3<f64> {
    let (sp, cp) = z.azimuth().sin_cos();
    let (st, ct) = z.tilt.sin_cos();
    Matrix3::new(
        cp * ct, -sp, cp * st, //
        sp * ct, cp, sp * st, //
        -st, 0.0, ct,
    )
}

/// Circular distance between two azimuths, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_azimuth(a) - wrap_azimuth(b)).abs();
    d.min(TAU - d)
}

/// Antenna positions of one surface in the base-station frame.
pub fn antenna_positions(z: &SurfaceRotation, cfg: &GeometryConfig) -> Vec<Vector3<f64>> {
    let r = rotation_matrix(z);
    let (s, c) = z.azimuth().sin_cos();
    let q = Vector3::new(cfg.track_radius * c, cfg.track_radius * s, 0.0);
    cfg.antenna_offsets.iter().map(|o| q + r * o).collect()
}

/// Linear violation (radians) of the guard-angle and tilt-range constraints.
/// Zero exactly when the station's rotation is feasible.
pub fn rotation_penalty(z: &BsRotation, cfg: &GeometryConfig) -> f64 {
    let s = &z.surfaces;
    let mut penalty = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let d = circular_distance(s[i].azimuth(), s[j].azimuth());
            penalty += (cfg.guard_angle - d).max(0.0);
        }
    }
    for surface in s {
        penalty += (surface.tilt - cfg.tilt_max).max(0.0);
        penalty += (cfg.tilt_min - surface.tilt).max(0.0);
    }
    penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_maps_zero_to_full_turn() {
        assert_eq!(wrap_azimuth(0.0), TAU);
        assert_eq!(wrap_azimuth(TAU), TAU);
        assert_abs_diff_eq!(wrap_azimuth(-0.5), TAU - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_azimuth(7.0), 7.0 - TAU, epsilon = 1e-15);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let r = rotation_matrix(&SurfaceRotation::new(0.0, 0.0));
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_matrix(&SurfaceRotation::new(PI / 2.0, 0.0));
        let expected = Matrix3::from_columns(&[
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ]);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn boresight_is_first_column() {
        let z = SurfaceRotation::new(1.3, 0.4);
        let r = rotation_matrix(&z);
        assert_abs_diff_eq!(r.column(0).into_owned(), z.boresight(), epsilon = 1e-15);
    }

    #[test]
    fn circular_distance_cases() {
        assert_abs_diff_eq!(circular_distance(PI / 2.0, 3.0 * PI / 2.0), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(circular_distance(0.1, TAU - 0.1), 0.2, epsilon = 1e-14);
        assert_eq!(circular_distance(2.5, 2.5), 0.0);
    }

    #[test]
    fn positions_without_track_or_rotation_are_offsets() {
        let mut cfg = GeometryConfig::standard(0.125);
        cfg.track_radius = 0.0;
        let pos = antenna_positions(&SurfaceRotation::new(0.0, 0.0), &cfg);
        for (p, o) in pos.iter().zip(&cfg.antenna_offsets) {
            assert_abs_diff_eq!(*p, *o, epsilon = 1e-15);
        }
    }

    #[test]
    fn positions_are_translated_by_track() {
        let cfg = GeometryConfig::standard(0.125);
        let pos = antenna_positions(&SurfaceRotation::new(0.0, 0.0), &cfg);
        for (p, o) in pos.iter().zip(&cfg.antenna_offsets) {
            assert_abs_diff_eq!(*p, o + Vector3::new(0.5, 0.0, 0.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn penalty_hand_cases() {
        let cfg = GeometryConfig::standard(0.125);
        let feasible = BsRotation::new(vec![
            SurfaceRotation::from_degrees(0.0, 30.0),
            SurfaceRotation::from_degrees(120.0, 30.0),
            SurfaceRotation::from_degrees(240.0, 30.0),
        ]);
        assert_eq!(rotation_penalty(&feasible, &cfg), 0.0);

        let mut close = cfg.clone();
        close.guard_angle = 0.10;
        let pair = BsRotation::new(vec![
            SurfaceRotation::new(1.00, 0.2),
            SurfaceRotation::new(1.05, 0.2),
        ]);
        assert_abs_diff_eq!(rotation_penalty(&pair, &close), 0.05, epsilon = 1e-12);

        let tilted = BsRotation::new(vec![
            SurfaceRotation::from_degrees(10.0, 30.0),
            SurfaceRotation::new(2.0, cfg.tilt_max + 0.2),
        ]);
        assert_abs_diff_eq!(rotation_penalty(&tilted, &cfg), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn uniform_layout_is_feasible() {
        let cfg = GeometryConfig::standard(0.125);
        let z = BsRotation::uniform(3, 30f64.to_radians());
        assert_eq!(rotation_penalty(&z, &cfg), 0.0);
        assert_abs_diff_eq!(z.surfaces[0].azimuth(), PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.surfaces[2].azimuth(), 5.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn config_round_trips_through_degrees() {
        let cfg = GeometryConfig::standard(0.125);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("guard_angle_deg"));
        let back: GeometryConfig = serde_json::from_str(&json).unwrap();
        assert_abs_diff_eq!(back.guard_angle, cfg.guard_angle, epsilon = 1e-15);
        assert_eq!(back.antenna_offsets, cfg.antenna_offsets);
    }

    #[test]
    fn config_rejects_empty_array() {
        let json = r#"{"track_radius_m":0.5,"guard_angle_deg":5,"tilt_min_deg":0,
            "tilt_max_deg":60,"antenna_offsets_m":[]}"#;
        assert!(serde_json::from_str::<GeometryConfig>(json).is_err());
    }
}
