//! Flux models `f ∈ C²` on a working interval, with pointwise convexity
//! classification (locally above / below the tangent line, or neither) and a
//! grid cover of the closure of the inflection set.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tangent-line position label for a point of the flux.
///
/// `DPlus`: the flux stays at or above its tangent line in a neighbourhood;
/// `DMinus`: at or below; `N`: neither sign condition holds down to the
/// smallest probe radius (inflection behaviour).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    DPlus,
    DMinus,
    N,
}

/// Result of [`classify_point`]; `probe_radius` is the radius at which the
/// winning sign condition held (for `N`, the smallest radius tested).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvexityClassification {
    pub label: RegionLabel,
    pub probe_radius: f64,
}

#[derive(Debug, Clone)]
enum FluxKind {
    /// f(z) = z²/2
    Burgers,
    /// f(z) = z³/3
    Cubic,
    /// C² flux that is identically zero on `[-shelf, shelf]` and grows like
    /// `sign(z)(|z|-shelf)³` outside; characteristic speed vanishes on the shelf.
    FlatCubic { shelf: f64 },
    /// Coefficients low-to-high: c0 + c1 z + c2 z² + ...
    Polynomial { coeffs: Vec<f64> },
    Table(CubicSpline),
}

/// Evaluable flux with first and second derivatives on a working interval.
#[derive(Debug, Clone)]
pub struct FluxModel {
    kind: FluxKind,
    interval: (f64, f64),
    name: String,
}

impl FluxModel {
    pub fn burgers(interval: (f64, f64)) -> Self {
        FluxModel { kind: FluxKind::Burgers, interval, name: "burgers".into() }
    }

    pub fn cubic(interval: (f64, f64)) -> Self {
        FluxModel { kind: FluxKind::Cubic, interval, name: "cubic".into() }
    }

    pub fn flat_cubic(shelf: f64, interval: (f64, f64)) -> Self {
        FluxModel { kind: FluxKind::FlatCubic { shelf }, interval, name: "flat-cubic".into() }
    }

    pub fn polynomial(coeffs: Vec<f64>, interval: (f64, f64)) -> Self {
        FluxModel { kind: FluxKind::Polynomial { coeffs }, interval, name: "polynomial".into() }
    }

    /// Tabulated flux; clamped cubic spline keeps the model C² with an
    /// analytic second derivative.  `z` must be strictly increasing.
    pub fn from_table(z: &[f64], f: &[f64]) -> Result<Self> {
        let spline = CubicSpline::clamped(z, f)?;
        let interval = (z[0], z[z.len() - 1]);
        Ok(FluxModel { kind: FluxKind::Table(spline), interval, name: "table".into() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn contains(&self, z: f64) -> bool {
        let slack = 1e-12 * (self.interval.1 - self.interval.0).max(1.0);
        z >= self.interval.0 - slack && z <= self.interval.1 + slack
    }

    pub fn check_in_interval(&self, z: f64) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::OutOfInterval { z, lo: self.interval.0, hi: self.interval.1 })
        }
    }

    pub fn f(&self, z: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 0.5 * z * z,
            FluxKind::Cubic => z * z * z / 3.0,
            FluxKind::FlatCubic { shelf } => {
                let r = (z.abs() - shelf).max(0.0);
                z.signum() * r * r * r
            }
            FluxKind::Polynomial { coeffs } => horner(coeffs, z),
            FluxKind::Table(s) => s.eval(z),
        }
    }

    pub fn f_prime(&self, z: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => z,
            FluxKind::Cubic => z * z,
            FluxKind::FlatCubic { shelf } => {
                let r = (z.abs() - shelf).max(0.0);
                3.0 * r * r
            }
            FluxKind::Polynomial { coeffs } => horner(&differentiate(coeffs), z),
            FluxKind::Table(s) => s.eval_d1(z),
        }
    }

    pub fn f_second(&self, z: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 1.0,
            FluxKind::Cubic => 2.0 * z,
            FluxKind::FlatCubic { shelf } => {
                let r = (z.abs() - shelf).max(0.0);
                6.0 * z.signum() * r
            }
            FluxKind::Polynomial { coeffs } => horner(&differentiate(&differentiate(coeffs)), z),
            FluxKind::Table(s) => s.eval_d2(z),
        }
    }
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Classification tolerance; the affine offset keeps exact-zero remainders on
/// flat or affine fluxes from being misread under rounding.
fn class_tol(f_at_z: f64) -> f64 {
    1e-12 * (1.0 + f_at_z.abs())
}

/// Classify the tangent-line position of `flux` at `z`.
///
/// Probes the remainder `f(z+h) - f(z) - f'(z) h` at `samples` offsets per
/// radius, halving the radius at least four times before giving up and
/// reporting `N`.  Ties (both conditions hold, the flux is locally affine)
/// resolve to `DPlus` so the label is deterministic.
pub fn classify_point(
    flux: &FluxModel,
    z: f64,
    probe_radius: f64,
    samples: usize,
) -> Result<ConvexityClassification> {
    if probe_radius <= 0.0 {
        return Err(Error::InvalidInput("probe_radius must be positive".into()));
    }
    if samples < 8 {
        return Err(Error::InvalidInput("classification needs at least 8 samples".into()));
    }
    flux.check_in_interval(z - probe_radius)?;
    flux.check_in_interval(z + probe_radius)?;

    let fz = flux.f(z);
    let dz = flux.f_prime(z);
    let tol = class_tol(fz);

    let mut radius = probe_radius;
    let mut smallest = probe_radius;
    for _ in 0..4 {
        let mut above = true;
        let mut below = true;
        for i in 0..samples {
            // Symmetric offsets in [-radius, radius], skipping h = 0.
            let frac = (i as f64 + 0.5) / samples as f64;
            for sign in [-1.0, 1.0] {
                let h = sign * frac * radius;
                let rem = flux.f(z + h) - fz - dz * h;
                if rem < -tol {
                    above = false;
                }
                if rem > tol {
                    below = false;
                }
            }
            if !above && !below {
                break;
            }
        }
        if above {
            return Ok(ConvexityClassification { label: RegionLabel::DPlus, probe_radius: radius });
        }
        if below {
            return Ok(ConvexityClassification { label: RegionLabel::DMinus, probe_radius: radius });
        }
        smallest = radius;
        radius *= 0.5;
    }
    Ok(ConvexityClassification { label: RegionLabel::N, probe_radius: smallest * 0.5 })
}

/// Cover of the closure of the inflection set by grid cells.
///
/// A cell is flagged when `f''` changes sign across it or when one of its
/// endpoints classifies as `N`; adjacent flagged cells merge into intervals.
/// The reported cover over-approximates the Lebesgue measure of the closed
/// inflection set, shrinking as the grid refines.
pub fn inflection_set(flux: &FluxModel, grid_step: f64) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = flux.interval();
    let span = hi - lo;
    if !(grid_step > 0.0) || grid_step > span / 16.0 {
        return Err(Error::InvalidInput(format!(
            "grid_step must lie in (0, {}]",
            span / 16.0
        )));
    }
    let n = (span / grid_step).ceil() as usize;
    let nodes: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * grid_step).min(hi)).collect();

    // Sign of f'' at each node; exact zeros stay 0 so a touch without
    // crossing is not mistaken for a crossing.
    let second: Vec<f64> = nodes.iter().map(|&z| flux.f_second(z)).collect();
    let sgn = |v: f64| {
        if v > 1e-14 {
            1
        } else if v < -1e-14 {
            -1
        } else {
            0
        }
    };

    let mut node_is_n = vec![false; nodes.len()];
    for (i, &z) in nodes.iter().enumerate() {
        // Only nodes where f'' is tiny can be inflection candidates; classify
        // those with a probe that stays inside the working interval.
        if sgn(second[i]) != 0 {
            continue;
        }
        let radius = (2.0 * grid_step).min(z - lo).min(hi - z);
        if radius < grid_step / 8.0 {
            continue; // too close to the interval edge to probe two-sided
        }
        let class = classify_point(flux, z, radius, 16)?;
        node_is_n[i] = class.label == RegionLabel::N;
    }

    let mut flagged = vec![false; n];
    for i in 0..n {
        let s0 = sgn(second[i]);
        let s1 = sgn(second[i + 1]);
        if s0 * s1 < 0 {
            flagged[i] = true;
        }
        if node_is_n[i] || node_is_n[i + 1] {
            flagged[i] = true;
        }
    }

    let mut cover = Vec::new();
    let mut i = 0;
    while i < n {
        if flagged[i] {
            let start = nodes[i];
            let mut j = i;
            while j < n && flagged[j] {
                j += 1;
            }
            cover.push((start, nodes[j]));
            i = j;
        } else {
            i += 1;
        }
    }
    Ok(cover)
}

/// Total length of the inflection cover: a measure estimate for the closure
/// of the inflection set, nonincreasing (up to one cell) as the step halves.
pub fn hypothesis_h_estimate(flux: &FluxModel, grid_step: f64) -> Result<f64> {
    Ok(inflection_set(flux, grid_step)?.iter().map(|(a, b)| b - a).sum())
}

/// Clamped cubic spline: endpoint first derivatives are pinned to one-sided
/// three-point estimates of the data, keeping the interpolant C².
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn clamped(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(Error::InvalidInput("spline needs >= 3 matched knots".into()));
        }
        for w in x.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput("spline knots must be strictly increasing".into()));
            }
        }
        let n = x.len();
        let d0 = one_sided_slope(&x[..3], &y[..3]);
        // Same three-point formula from the right end; the signed offsets keep
        // the estimate oriented, so no negation.
        let dn = one_sided_slope(
            &[x[n - 1], x[n - 2], x[n - 3]],
            &[y[n - 1], y[n - 2], y[n - 3]],
        );

        // Tridiagonal system for knot second derivatives with clamped ends.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        let h = |i: usize| x[i + 1] - x[i];
        b[0] = 2.0 * h(0);
        c[0] = h(0);
        r[0] = 6.0 * ((y[1] - y[0]) / h(0) - d0);
        for i in 1..n - 1 {
            a[i] = h(i - 1);
            b[i] = 2.0 * (h(i - 1) + h(i));
            c[i] = h(i);
            r[i] = 6.0 * ((y[i + 1] - y[i]) / h(i) - (y[i] - y[i - 1]) / h(i - 1));
        }
        a[n - 1] = h(n - 2);
        b[n - 1] = 2.0 * h(n - 2);
        r[n - 1] = 6.0 * (dn - (y[n - 1] - y[n - 2]) / h(n - 2));

        // Thomas algorithm.
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
        }
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), m })
    }

    fn segment(&self, z: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&z)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) if i >= self.x.len() => self.x.len() - 2,
            Err(i) => i - 1,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let i = self.segment(z);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - z) / h;
        let b = (z - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn eval_d1(&self, z: f64) -> f64 {
        let i = self.segment(z);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - z) / h;
        let b = (z - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    pub fn eval_d2(&self, z: f64) -> f64 {
        let i = self.segment(z);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - z) / h;
        let b = (z - self.x[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }
}

fn one_sided_slope(x: &[f64], y: &[f64]) -> f64 {
    // Three-point derivative estimate at x[0] (x need not be uniform).
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[0];
    let s1 = (y[1] - y[0]) / h1;
    let s2 = (y[2] - y[0]) / h2;
    (s1 * h2 - s2 * h1) / (h2 - h1)
}
