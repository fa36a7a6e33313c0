//! Reference evaluators and golden fixtures for the test suites.
//!
//! The evaluators here are written out longhand on purpose: plain loops over
//! complex numbers, no linear-algebra helpers and no calls into the
//! simulator. [`verify`] is the only function that touches the production
//! code, and only to compare its output against a stored reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::precoder::{actual_rates, solve_p4, BsPrecoder, CellProblem, PrecoderSet, SolveDiagnostics, SolverOptions};
use crate::scenarios::builtin;
use crate::{CMatrix, CVector, C64};

/// Complex vector as stored in fixtures: `[re, im]` pairs.
pub type RawVector = Vec<[f64; 2]>;

/// A stored problem, its reference answer and where the answer came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenCase {
    pub name: String,
    /// Which oracle produced `reference`.
    pub provenance: String,
    pub inputs: GoldenInputs,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoldenInputs {
    /// One station's local problem, solved by the production solver.
    Cell {
        in_cell: Vec<RawVector>,
        weights: Vec<f64>,
        victims: Vec<RawVector>,
        victim_caps: Vec<f64>,
        noise_plus_incoming: f64,
        p_max: f64,
    },
    /// Fixed channels and precoders on a built-in layout; `None` marks a
    /// link outside the relevance set.
    Network {
        scenario: String,
        serving: Vec<usize>,
        weights: Vec<f64>,
        noise_power_w: f64,
        channels: Vec<Vec<Option<RawVector>>>,
        /// Per station, one vector per served user.
        precoders: Vec<Vec<RawVector>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    /// Per-user rates, bits/s/Hz.
    pub rates: Vec<f64>,
    /// Per-user precoder norms for cell cases, per-station for network cases.
    pub precoder_norms: Vec<f64>,
}

/// How produced values are compared with the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Every per-user rate within this many bits; precoder norms within
    /// this relative error.
    PerUser(f64),
    /// Weighted sum-rate within this relative error.
    WeightedSum(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub reference: f64,
    pub produced: f64,
    pub error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub provenance: String,
    pub comparisons: Vec<Comparison>,
    pub passed: bool,
}

impl GoldenCase {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// A missing field is reported as [`Error::MissingField`].
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            match msg.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                Some(field) => Error::MissingField(field.to_string()),
                None => Error::json(context, e),
            }
        })
    }

    fn weights(&self) -> &[f64] {
        match &self.inputs {
            GoldenInputs::Cell { weights, .. } | GoldenInputs::Network { weights, .. } => weights,
        }
    }
}

fn complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

fn column(v: &[[f64; 2]]) -> CVector {
    CVector::from_vec(complex(v))
}

/// Re-run the production path on the stored inputs and compare.
pub fn verify(case: &GoldenCase, tolerance: Tolerance, opts: &SolverOptions) -> Result<VerifyReport> {
    let (rates, norms): (Vec<f64>, Vec<f64>) = match &case.inputs {
        GoldenInputs::Cell { in_cell, weights, victims, victim_caps, noise_plus_incoming, p_max } => {
            let in_cell: Vec<CVector> = in_cell.iter().map(|h| column(h)).collect();
            let victims: Vec<CVector> = victims.iter().map(|h| column(h)).collect();
            let problem = CellProblem {
                in_cell: &in_cell,
                weights,
                victims: &victims,
                victim_caps: victim_caps.clone(),
                noise_plus_incoming: *noise_plus_incoming,
                p_max: *p_max,
            };
            let sol = solve_p4(&problem, opts);
            let norms = sol.w.column_iter().map(|c| c.norm()).collect();
            (sol.surrogate_rates, norms)
        }
        GoldenInputs::Network { scenario, serving, weights, noise_power_w, channels, precoders } => {
            let s = builtin(scenario)?;
            let layout_matches = s.weights() == weights.as_slice()
                && (0..s.num_users()).map(|k| s.cell_of(k)).eq(serving.iter().copied())
                && s.noise_power_w == *noise_power_w;
            if !layout_matches {
                return Err(Error::InvalidScenario(format!("{}: inputs do not match layout {scenario}", case.name)));
            }
            let sample = ChannelSample::from_channels(
                channels.iter().map(|row| row.iter().map(|h| h.as_deref().map(column)).collect()).collect(),
            );
            let per_bs = precoders
                .iter()
                .map(|cols| {
                    let cols: Vec<CVector> = cols.iter().map(|c| column(c)).collect();
                    BsPrecoder { w: CMatrix::from_columns(&cols), diagnostics: SolveDiagnostics::default() }
                })
                .collect();
            let set = PrecoderSet { per_bs };
            let report = actual_rates(&s, &set, &sample);
            let norms = set.per_bs.iter().map(|p| p.w.norm()).collect();
            (report.per_user, norms)
        }
    };
    let mut comparisons = Vec::new();
    if rates.len() != case.reference.rates.len() || norms.len() != case.reference.precoder_norms.len() {
        return Err(Error::InvalidConfig(format!("{}: reference has the wrong number of entries", case.name)));
    }
    match tolerance {
        Tolerance::PerUser(bits) => {
            for (k, (&r, &p)) in case.reference.rates.iter().zip(&rates).enumerate() {
                let error = (p - r).abs();
                comparisons.push(Comparison {
                    quantity: format!("rate[{k}]"),
                    reference: r,
                    produced: p,
                    error,
                    passed: error <= bits,
                });
            }
            for (k, (&r, &p)) in case.reference.precoder_norms.iter().zip(&norms).enumerate() {
                let error = (p - r).abs() / r.abs().max(f64::MIN_POSITIVE);
                comparisons.push(Comparison {
                    quantity: format!("norm[{k}]"),
                    reference: r,
                    produced: p,
                    error,
                    passed: error <= bits.max(1e-6),
                });
            }
        }
        Tolerance::WeightedSum(rel) => {
            let w = case.weights();
            let r: f64 = w.iter().zip(&case.reference.rates).map(|(a, r)| a * r).sum();
            let p: f64 = w.iter().zip(&rates).map(|(a, r)| a * r).sum();
            let error = (p - r).abs() / r.abs();
            comparisons.push(Comparison {
                quantity: "weighted_sum".into(),
                reference: r,
                produced: p,
                error,
                passed: error <= rel,
            });
        }
    }
    let passed = comparisons.iter().all(|c| c.passed);
    Ok(VerifyReport { name: case.name.clone(), provenance: case.provenance.clone(), comparisons, passed })
}

/// `log2(1 + P |h|^2 / c)`: the rate of one user served by MRT at full power.
pub fn single_user_rate(h: &[C64], p_max: f64, c: f64) -> f64 {
    let mut energy = 0.0;
    for z in h {
        energy += z.re * z.re + z.im * z.im;
    }
    (1.0 + p_max * energy / c).log2()
}

fn inner(h: &[C64], w: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in h.iter().zip(w) {
        // conj(a) * b
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

/// Per-user rates from raw channels: `channels[m][k]` is station `m`'s
/// channel to user `k` (absent links contribute nothing), `precoders[m]`
/// holds one vector per user served by `m` in user order.
pub fn straight_line_rates(
    serving: &[usize],
    noise: f64,
    channels: &[Vec<Option<Vec<C64>>>],
    precoders: &[Vec<Vec<C64>>],
) -> Vec<f64> {
    let mut rates = Vec::with_capacity(serving.len());
    for (k, &home) in serving.iter().enumerate() {
        let slot = serving[..k].iter().filter(|&&s| s == home).count();
        let mut desired = 0.0;
        let mut other = noise;
        for (m, row) in channels.iter().enumerate() {
            let Some(h) = &row[k] else { continue };
            for (j, w) in precoders[m].iter().enumerate() {
                let power = inner(h, w).norm_sqr();
                if m == home && j == slot {
                    desired = power;
                } else {
                    other += power;
                }
            }
        }
        rates.push((1.0 + desired / other).log2());
    }
    rates
}

/// Element pattern evaluated from the textbook definition, all angles in
/// degrees, for a unit direction in the surface frame.
pub fn reference_element_gain(dir: [f64; 3], g_max_dbi: f64, beamwidth_deg: f64, floor_db: f64) -> f64 {
    let [x, y, z] = dir;
    let theta = z.acos().to_degrees();
    let phi = y.atan2(x).to_degrees();
    let a_v = -f64::min(12.0 * ((theta - 90.0) / beamwidth_deg).powi(2), floor_db);
    let a_h = -f64::min(12.0 * (phi / beamwidth_deg).powi(2), floor_db);
    let a = -f64::min(-(a_v + a_h), floor_db);
    10f64.powf((g_max_dbi + a) / 10.0)
}

/// Unevaluated sum `hi + lo` carrying about 106 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    /// Newton step on `y^2 = x` from the double-precision root.
    pub fn sqrt(self) -> Self {
        let y = Self::from_f64(self.hi.sqrt());
        (y + self / y) * Self::from_f64(0.5)
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Self::from_f64(1.0), |acc, _| acc * self)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::renorm(s.hi, s.lo + self.lo + o.lo)
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

impl std::ops::Div for DoubleDouble {
    type Output = Self;

    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self + o * Self::from_f64(-q1);
        let q2 = r.hi / o.hi;
        let r = r + o * Self::from_f64(-q2);
        let q3 = r.hi / o.hi;
        Self::renorm(q1, q2) + Self::from_f64(q3)
    }
}

/// `(λ/4π)² d^-η` in double-double arithmetic for exponents that are whole
/// multiples of one half.
pub fn reference_path_gain(distance: f64, wavelength: f64, exponent: f64) -> f64 {
    let halves = (2.0 * exponent).round();
    assert!((halves - 2.0 * exponent).abs() == 0.0 && halves >= 0.0, "exponent must be a multiple of 1/2");
    let halves = halves as u32;
    // π to double-double precision.
    let pi = DoubleDouble { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };
    let four_pi = pi * DoubleDouble::from_f64(4.0);
    let r = DoubleDouble::from_f64(wavelength) / four_pi;
    let d = DoubleDouble::from_f64(distance);
    let mut decay = d.powi(halves / 2);
    if halves % 2 == 1 {
        decay = decay * d.sqrt();
    }
    (r * r / decay).to_f64()
}

/// Brute-force check that `matching` is a set of vertex-disjoint edges of
/// the graph to which no further edge can be added.
pub fn check_maximal_matching(
    num_vertices: usize,
    edges: &[(usize, usize)],
    matching: &[(usize, usize)],
) -> std::result::Result<(), String> {
    let same = |a: (usize, usize), b: (usize, usize)| a == b || a == (b.1, b.0);
    let mut covered = vec![false; num_vertices];
    for &e in matching {
        if !edges.iter().any(|&g| same(g, e)) {
            return Err(format!("{e:?} is not an edge"));
        }
        for v in [e.0, e.1] {
            if covered[v] {
                return Err(format!("vertex {v} is matched twice"));
            }
            covered[v] = true;
        }
    }
    for &(a, b) in edges {
        if !covered[a] && !covered[b] {
            return Err(format!("edge ({a}, {b}) could still be added"));
        }
    }
    Ok(())
}
