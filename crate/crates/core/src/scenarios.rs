//! Network layouts and benchmark scheme definitions.
//!
//! User indices are global and grouped by cell; inside a cell the edge users
//! come first, then the regular users.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::channel::ArrayModel;
use crate::coordination::graph::AdjacencyGraph;
use crate::{Error, Result};

/// Regular users dropped uniformly (in radius and azimuth) in an annulus
/// around the serving station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularUsers {
    pub count: usize,
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeUser {
    /// Horizontal offset from the serving station, meters.
    pub local_xy_m: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub edge_users: Vec<EdgeUser>,
    pub regular_users: RegularUsers,
}

impl CellLayout {
    pub fn num_users(&self) -> usize {
        self.edge_users.len() + self.regular_users.count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UserKind {
    Edge { local: [f64; 2] },
    Regular { inner_radius: f64, outer_radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserInfo {
    pub cell: usize,
    pub kind: UserKind,
    pub weight: f64,
}

/// Static description of a network: geometry, graph, user layout, radio
/// parameters. All powers are in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct NetworkScenario {
    pub name: String,
    pub bs_positions: Vec<Vector3<f64>>,
    pub graph: AdjacencyGraph,
    pub cells: Vec<CellLayout>,
    pub num_surfaces: usize,
    pub array: ArrayModel,
    pub path_loss_exponent: f64,
    pub p_max_w: f64,
    pub noise_power_w: f64,
    pub user_height_m: f64,
    pub notes: Vec<String>,
    users: Vec<UserInfo>,
    cell_offsets: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    bs_positions_m: Vec<[f64; 3]>,
    graph: AdjacencyGraph,
    cells: Vec<CellLayout>,
    num_surfaces: usize,
    array: ArrayModel,
    path_loss_exponent: f64,
    p_max_w: f64,
    noise_power_w: f64,
    user_height_m: f64,
    #[serde(default)]
    notes: Vec<String>,
}

impl TryFrom<ScenarioFile> for NetworkScenario {
    type Error = String;

    fn try_from(f: ScenarioFile) -> std::result::Result<Self, String> {
        let s = NetworkScenario::assemble(
            f.name,
            f.bs_positions_m.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
            f.graph,
            f.cells,
            f.num_surfaces,
            f.array,
            f.path_loss_exponent,
            f.p_max_w,
            f.noise_power_w,
            f.user_height_m,
            f.notes,
        );
        s.validate()?;
        Ok(s)
    }
}

impl From<NetworkScenario> for ScenarioFile {
    fn from(s: NetworkScenario) -> Self {
        ScenarioFile {
            name: s.name,
            bs_positions_m: s.bs_positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            graph: s.graph,
            cells: s.cells,
            num_surfaces: s.num_surfaces,
            array: s.array,
            path_loss_exponent: s.path_loss_exponent,
            p_max_w: s.p_max_w,
            noise_power_w: s.noise_power_w,
            user_height_m: s.user_height_m,
            notes: s.notes,
        }
    }
}

pub const WAVELENGTH_M: f64 = 0.125;
pub const PATH_LOSS_EXPONENT: f64 = 3.5;
pub const P_MAX_W: f64 = 100.0;
/// -80 dBm.
pub const NOISE_POWER_W: f64 = 1e-11;
pub const BS_HEIGHT_M: f64 = 10.0;
pub const EDGE_WEIGHT: f64 = 1.0;
pub const REGULAR_WEIGHT: f64 = 0.5;

impl NetworkScenario {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: String,
        bs_positions: Vec<Vector3<f64>>,
        graph: AdjacencyGraph,
        cells: Vec<CellLayout>,
        num_surfaces: usize,
        array: ArrayModel,
        path_loss_exponent: f64,
        p_max_w: f64,
        noise_power_w: f64,
        user_height_m: f64,
        notes: Vec<String>,
    ) -> Self {
        let mut users = Vec::new();
        let mut cell_offsets = vec![0];
        for (m, cell) in cells.iter().enumerate() {
            for e in &cell.edge_users {
                users.push(UserInfo { cell: m, kind: UserKind::Edge { local: e.local_xy_m }, weight: e.weight });
            }
            let r = &cell.regular_users;
            for _ in 0..r.count {
                users.push(UserInfo {
                    cell: m,
                    kind: UserKind::Regular { inner_radius: r.inner_radius_m, outer_radius: r.outer_radius_m },
                    weight: r.weight,
                });
            }
            cell_offsets.push(users.len());
        }
        let weights = users.iter().map(|u| u.weight).collect();
        Self {
            name,
            bs_positions,
            graph,
            cells,
            num_surfaces,
            array,
            path_loss_exponent,
            p_max_w,
            noise_power_w,
            user_height_m,
            notes,
            users,
            cell_offsets,
            weights,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let m = self.bs_positions.len();
        if m == 0 {
            return Err("at least one base station is required".into());
        }
        if self.cells.len() != m || self.graph.num_cells() != m {
            return Err("cell layouts, graph and base stations disagree on the number of cells".into());
        }
        for a in 0..m {
            for b in a + 1..m {
                if (self.bs_positions[a] - self.bs_positions[b]).norm() == 0.0 {
                    return Err(format!("base stations {a} and {b} coincide"));
                }
            }
        }
        if self.num_surfaces == 0 {
            return Err("num_surfaces must be positive".into());
        }
        if self.users.iter().any(|u| !(u.weight > 0.0)) {
            return Err("user weights must be positive".into());
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.num_users() == 0 {
                return Err(format!("cell {i} has no users"));
            }
            let r = &cell.regular_users;
            if r.count > 0 && !(0.0 < r.inner_radius_m && r.inner_radius_m <= r.outer_radius_m) {
                return Err(format!("cell {i} has an invalid annulus"));
            }
        }
        if !(self.p_max_w > 0.0 && self.noise_power_w > 0.0 && self.array.wavelength_m > 0.0) {
            return Err("power budget, noise power and wavelength must be positive".into());
        }
        self.array.geometry.validate()?;
        self.array.pattern.validate()?;
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[UserInfo] {
        &self.users
    }

    pub fn users_of(&self, m: usize) -> Range<usize> {
        self.cell_offsets[m]..self.cell_offsets[m + 1]
    }

    pub fn cell_of(&self, k: usize) -> usize {
        self.users[k].cell
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_weights(&self, m: usize) -> &[f64] {
        &self.weights[self.users_of(m)]
    }

    pub fn neighbors(&self, m: usize) -> &[usize] {
        self.graph.neighbors(m)
    }

    /// Antennas per station.
    pub fn tx_dim(&self) -> usize {
        self.array.geometry.num_antennas() * self.num_surfaces
    }

    /// Pairs whose channel is modelled: in-cell links and links to users of
    /// adjacent cells.
    pub fn is_relevant(&self, m: usize, k: usize) -> bool {
        let n = self.users[k].cell;
        n == m || self.graph.contains_edge(m, n)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}

fn regular(count: usize) -> RegularUsers {
    RegularUsers { count, inner_radius_m: 70.0, outer_radius_m: 90.0, weight: REGULAR_WEIGHT }
}

fn edge(radius: f64, bearing_deg: f64) -> EdgeUser {
    let b = bearing_deg.to_radians();
    EdgeUser { local_xy_m: [radius * b.cos(), radius * b.sin()], weight: EDGE_WEIGHT }
}

/// Local user layout shared by both three-cell setups: 2/4/2 edge users and
/// 4/2/4 regular users.
fn three_cell_layout() -> Vec<CellLayout> {
    vec![
        CellLayout { edge_users: vec![edge(140.0, 0.0), edge(140.0, 62.0)], regular_users: regular(4) },
        CellLayout {
            edge_users: vec![edge(140.0, 180.0), edge(140.0, 118.0), edge(120.0, 165.0), edge(120.0, 133.0)],
            regular_users: regular(2),
        },
        CellLayout { edge_users: vec![edge(140.0, 242.0), edge(140.0, 298.0)], regular_users: regular(4) },
    ]
}

const EDGE_USER_NOTE: &str = "edge-user local coordinates are modelling choices, not published data";

/// One of the two three-cell layouts.
pub fn build_setup(name: &str) -> Result<NetworkScenario> {
    let positions = match name {
        "high_ici" => [[0.0, 0.0], [300.0, 0.0], [150.0, 280.0]],
        "medium_ici" => [[0.0, 0.0], [400.0, 0.0], [200.0, 380.0]],
        other => return Err(Error::UnknownSetup(other.to_string())),
    };
    let s = NetworkScenario::assemble(
        name.to_string(),
        positions.iter().map(|p| Vector3::new(p[0], p[1], BS_HEIGHT_M)).collect(),
        AdjacencyGraph::complete(3),
        three_cell_layout(),
        3,
        ArrayModel::standard(WAVELENGTH_M),
        PATH_LOSS_EXPONENT,
        P_MAX_W,
        NOISE_POWER_W,
        0.0,
        vec![EDGE_USER_NOTE.to_string()],
    );
    debug_assert!(s.validate().is_ok());
    Ok(s)
}

pub const LATTICE_SIZES: [usize; 4] = [3, 6, 10, 15];
pub const LATTICE_SPACING_M: f64 = 400.0;

/// Triangular lattice with rows of `L, L-1, ..., 1` stations (`M = L(L+1)/2`),
/// 400 m between neighbours, six regular users per cell.
pub fn build_lattice(m: usize) -> Result<NetworkScenario> {
    let rows = match m {
        3 => 2,
        6 => 3,
        10 => 4,
        15 => 5,
        other => return Err(Error::UnsupportedLatticeSize(other)),
    };
    let dy = LATTICE_SPACING_M * 3f64.sqrt() / 2.0;
    let mut positions = Vec::with_capacity(m);
    for r in 0..rows {
        for i in 0..rows - r {
            let x = r as f64 * LATTICE_SPACING_M / 2.0 + i as f64 * LATTICE_SPACING_M;
            positions.push(Vector3::new(x, r as f64 * dy, BS_HEIGHT_M));
        }
    }
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if ((positions[a] - positions[b]).norm() - LATTICE_SPACING_M).abs() <= 1e-6 {
                edges.push((a, b));
            }
        }
    }
    let graph = AdjacencyGraph::new(m, edges).expect("lattice edges are valid");
    let cells = vec![CellLayout { edge_users: Vec::new(), regular_users: regular(6) }; m];
    let s = NetworkScenario::assemble(
        format!("lattice_{m}"),
        positions,
        graph,
        cells,
        3,
        ArrayModel::standard(WAVELENGTH_M),
        PATH_LOSS_EXPONENT,
        P_MAX_W,
        NOISE_POWER_W,
        0.0,
        vec!["lattice station coordinates are modelling choices, not published data".to_string()],
    );
    debug_assert!(s.validate().is_ok());
    Ok(s)
}

/// Resolve a built-in scenario name (`high_ici`, `medium_ici`, `lattice_M`).
pub fn builtin(name: &str) -> Result<NetworkScenario> {
    if let Some(m) = name.strip_prefix("lattice_") {
        let m: usize = m.parse().map_err(|_| Error::UnknownSetup(name.to_string()))?;
        return build_lattice(m);
    }
    build_setup(name)
}

/// Benchmark schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme", content = "sigma_w")]
pub enum Scheme {
    Proposed,
    RotationOnly,
    IpcOnly,
    Centralized,
    CentralizedFpa,
    Fpa,
    FixedIpc(f64),
}

/// What a scheme switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeToggles {
    /// Local problems carry interference power constraints.
    pub ipc: bool,
    /// Thresholds are negotiated over the bus.
    pub coordination: bool,
    pub optimize_rotation: bool,
    pub centralized: bool,
}

impl Scheme {
    pub fn toggles(self) -> SchemeToggles {
        let t = |ipc, coordination, optimize_rotation, centralized| SchemeToggles {
            ipc,
            coordination,
            optimize_rotation,
            centralized,
        };
        match self {
            Scheme::Proposed => t(true, true, true, false),
            Scheme::RotationOnly => t(false, false, true, false),
            Scheme::IpcOnly => t(true, true, false, false),
            Scheme::Centralized => t(false, false, true, true),
            Scheme::CentralizedFpa => t(false, false, false, true),
            Scheme::Fpa => t(false, false, false, false),
            Scheme::FixedIpc(_) => t(true, false, true, false),
        }
    }

    pub fn label(self) -> String {
        match self {
            Scheme::Proposed => "proposed".into(),
            Scheme::RotationOnly => "rotation-only".into(),
            Scheme::IpcOnly => "ipc-only".into(),
            Scheme::Centralized => "centralized".into(),
            Scheme::CentralizedFpa => "centralized-fpa".into(),
            Scheme::Fpa => "fpa".into(),
            Scheme::FixedIpc(s) => format!("fixed-ipc({s:e})"),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "proposed" => Scheme::Proposed,
            "rotation-only" => Scheme::RotationOnly,
            "ipc-only" => Scheme::IpcOnly,
            "centralized" => Scheme::Centralized,
            "centralized-fpa" => Scheme::CentralizedFpa,
            "fpa" => Scheme::Fpa,
            other => {
                let inner = other
                    .strip_prefix("fixed-ipc(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme `{other}`")))?;
                let sigma: f64 = inner
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad fixed-ipc threshold `{inner}`")))?;
                if !(sigma > 0.0) {
                    return Err(Error::InvalidConfig("fixed-ipc threshold must be positive".into()));
                }
                Scheme::FixedIpc(sigma)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn horizontal(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
    }

    #[test]
    fn high_ici_distances() {
        let s = build_setup("high_ici").unwrap();
        let p = &s.bs_positions;
        assert_relative_eq!(horizontal(&p[0], &p[1]), 300.0);
        assert_relative_eq!(horizontal(&p[0], &p[2]), (150f64.powi(2) + 280f64.powi(2)).sqrt());
        assert_relative_eq!(horizontal(&p[1], &p[2]), 317.6476034853718, max_relative = 1e-12);
    }

    #[test]
    fn medium_ici_min_separation() {
        let s = build_setup("medium_ici").unwrap();
        let p = &s.bs_positions;
        let min = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(a, b)| horizontal(&p[a], &p[b]))
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(min, 400.0);
    }

    #[test]
    fn three_cell_user_sets() {
        for name in ["high_ici", "medium_ici"] {
            let s = build_setup(name).unwrap();
            assert_eq!(s.num_users(), 18);
            for m in 0..3 {
                assert_eq!(s.users_of(m).len(), 6);
            }
            // edge users 1,2 | 7..10 | 13,14 in one-based numbering
            let edge: Vec<usize> = (0..18).filter(|&k| s.weights()[k] == EDGE_WEIGHT).map(|k| k + 1).collect();
            assert_eq!(edge, vec![1, 2, 7, 8, 9, 10, 13, 14]);
            assert_eq!(s.graph.edges(), &[(0, 1), (0, 2), (1, 2)]);
        }
    }

    #[test]
    fn unknown_setup_is_rejected() {
        assert!(matches!(build_setup("low_ici"), Err(Error::UnknownSetup(_))));
    }

    #[test]
    fn lattice_edge_counts() {
        let expected = [(3, 3, 2), (6, 9, 4), (10, 18, 6), (15, 30, 6)];
        for (m, edges, degree) in expected {
            let s = build_lattice(m).unwrap();
            assert_eq!(s.num_cells(), m);
            assert_eq!(s.graph.edges().len(), edges, "M={m}");
            assert_eq!(s.graph.max_degree(), degree, "M={m}");
            assert!(s.graph.is_connected());
            for &(a, b) in s.graph.edges() {
                assert_relative_eq!((s.bs_positions[a] - s.bs_positions[b]).norm(), 400.0, max_relative = 1e-12);
            }
            assert!(s.users().iter().all(|u| u.weight == REGULAR_WEIGHT));
        }
        assert!(matches!(build_lattice(4), Err(Error::UnsupportedLatticeSize(4))));
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = build_setup("high_ici").unwrap();
        let back: NetworkScenario = serde_json::from_str(&s.to_json_pretty()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("proposed".parse::<Scheme>().unwrap(), Scheme::Proposed);
        assert_eq!("fixed-ipc(1e-8)".parse::<Scheme>().unwrap(), Scheme::FixedIpc(1e-8));
        assert!("fixed-ipc(-1)".parse::<Scheme>().is_err());
        assert!("greedy".parse::<Scheme>().is_err());
        let t = Scheme::RotationOnly.toggles();
        assert!(!t.ipc && t.optimize_rotation && !t.centralized);
    }
}
