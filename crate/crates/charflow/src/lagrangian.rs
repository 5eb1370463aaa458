//! Monotone Lagrangian parameterizations built by ordered insertion of
//! characteristic traces, order-preserving label encoding, per-column and
//! pointwise (universal) source extraction, single-valuedness scans across
//! touching columns, and the cell-wise area-ratio diagnostic.

use serde::Serialize;

use crate::characteristics::{integrate_characteristic, CharacteristicCurve, Provenance};
use crate::error::{Error, Result};
use crate::exec;
use crate::field::SolutionField;
use crate::flux::inflection_set;
use crate::sample::van_der_corput;

/// One column of a parameterization: a characteristic sampled on the shared
/// time grid.  Outside `valid` (truncated traces) the position is held at the
/// exit point so ordering stays defined on every node.
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub seed: (f64, f64),
    pub theta: f64,
    /// Label in [0, 1]; rescaled theta, assigned after ordering.
    pub y: f64,
    pub positions: Vec<f64>,
    pub valid: (usize, usize),
    pub truncated: bool,
}

impl Column {
    pub fn as_curve(&self, t_grid: &[f64], step: f64) -> CharacteristicCurve {
        let (a, b) = self.valid;
        CharacteristicCurve {
            times: t_grid[a..=b].to_vec(),
            positions: self.positions[a..=b].to_vec(),
            provenance: Provenance::Ode { step },
            truncated: self.truncated,
        }
    }

    pub fn position_at(&self, t_grid: &[f64], t: f64) -> f64 {
        let i = t_grid.partition_point(|&v| v <= t).saturating_sub(1);
        let i = i.min(t_grid.len() - 2);
        let w = ((t - t_grid[i]) / (t_grid[i + 1] - t_grid[i])).clamp(0.0, 1.0);
        self.positions[i] * (1.0 - w) + self.positions[i + 1] * w
    }
}

/// Monotone-in-label family of characteristic columns on a shared time grid.
#[derive(Debug, Clone, Serialize)]
pub struct LagrangianParam {
    pub t_grid: Vec<f64>,
    pub columns: Vec<Column>,
    /// Largest x-distance from a 32x32 probe point to the nearest column.
    pub coverage_radius: f64,
    pub trace_step: f64,
}

/// Uniform time grid across the domain.
pub fn default_t_grid(field: &SolutionField, nodes: usize) -> Vec<f64> {
    let n = nodes.max(3);
    (0..n)
        .map(|i| field.domain.t0 + field.domain.t_span() * i as f64 / (n - 1) as f64)
        .collect()
}

/// Deterministic encoding times: low-discrepancy over the grid span.
pub fn theta_times(t_grid: &[f64], count: usize) -> Vec<f64> {
    let (a, b) = (t_grid[0], *t_grid.last().unwrap());
    (0..count.max(4))
        .map(|k| a + (b - a) * van_der_corput(k as u64 + 1, 2))
        .collect()
}

/// Weighted sum `Σ γ(q_k) 2^{-k}` over the listed times, skipping times the
/// curve does not reach.  Strictly order preserving on non-crossing families
/// that differ at some listed time.
pub fn theta_encode(curve: &CharacteristicCurve, times: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut w = 1.0;
    for &q in times {
        if let Some(x) = curve.position_at(q) {
            acc += x * w;
        }
        w *= 0.5;
    }
    acc
}

fn theta_of_positions(positions: &[f64], t_grid: &[f64], times: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut w = 1.0;
    for &q in times {
        let i = t_grid.partition_point(|&v| v <= q).saturating_sub(1);
        let i = i.min(t_grid.len() - 2);
        let frac = ((q - t_grid[i]) / (t_grid[i + 1] - t_grid[i])).clamp(0.0, 1.0);
        acc += (positions[i] * (1.0 - frac) + positions[i + 1] * frac) * w;
        w *= 0.5;
    }
    acc
}

/// Trace one seed over the full grid; positions outside the traced span are
/// held at the exit point.
fn trace_on_grid(
    field: &SolutionField,
    seed: (f64, f64),
    t_grid: &[f64],
    step: f64,
) -> Result<(Vec<f64>, (usize, usize), bool)> {
    let (t0, t1) = (t_grid[0], *t_grid.last().unwrap());
    let (ts, xs) = seed;
    let mut truncated = false;

    let back = if ts > t0 + 1e-14 {
        let c = integrate_characteristic(field, ts, xs, t0, step)
            .map_err(|e| Error::TraceFailure(format!("seed ({ts}, {xs}): {e}")))?;
        truncated |= c.truncated;
        Some(c)
    } else {
        None
    };
    let fwd = if ts < t1 - 1e-14 {
        let c = integrate_characteristic(field, ts, xs, t1, step)
            .map_err(|e| Error::TraceFailure(format!("seed ({ts}, {xs}): {e}")))?;
        truncated |= c.truncated;
        Some(c)
    } else {
        None
    };

    let pos_at = |t: f64| -> Option<f64> {
        if (t - ts).abs() < 1e-14 {
            return Some(xs);
        }
        if t < ts {
            back.as_ref().and_then(|c| c.position_at(t))
        } else {
            fwd.as_ref().and_then(|c| c.position_at(t))
        }
    };

    let mut positions = vec![f64::NAN; t_grid.len()];
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for (i, &t) in t_grid.iter().enumerate() {
        if let Some(x) = pos_at(t) {
            positions[i] = x;
            lo = lo.min(i);
            hi = hi.max(i);
        }
    }
    if lo == usize::MAX {
        return Err(Error::TraceFailure(format!("seed ({ts}, {xs}) reached no grid node")));
    }
    // Hold truncated traces at their boundary exit point, not at the last grid
    // value; exits at the same wall then coincide exactly and cannot cross.
    let first = back.as_ref().map_or(xs, |c| c.positions[0]);
    let last = fwd.as_ref().map_or(xs, |c| *c.positions.last().unwrap());
    for i in 0..lo {
        positions[i] = first;
    }
    for i in hi + 1..t_grid.len() {
        positions[i] = last;
    }
    Ok((positions, (lo, hi), truncated))
}

/// Build a parameterization by inserting traces one at a time.  Each new
/// trace is replaced by the minimum over upper neighbours of the maximum over
/// lower neighbours of itself, which keeps the family totally ordered; labels
/// come from the theta encoding rescaled to [0, 1].
pub fn build_parameterization(
    field: &SolutionField,
    seeds: &[(f64, f64)],
    t_grid: &[f64],
    step: f64,
) -> Result<LagrangianParam> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    for &(t, x) in seeds {
        if !field.domain.contains(t, x) {
            return Err(Error::OutOfDomain { t, x });
        }
    }
    // Raw traces are independent; ordering happens in insertion order below.
    let raw: Vec<_> = {
        let results = exec::map_slice(seeds, |&s| trace_on_grid(field, s, t_grid, step));
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            out.push(r?);
        }
        out
    };

    let mut family: Vec<(usize, Vec<f64>)> = Vec::with_capacity(seeds.len());
    for (idx, (mut positions, _span, _trunc)) in raw.iter().cloned().enumerate() {
        let (ts, xs) = seeds[idx];
        let mut lower: Vec<&Vec<f64>> = Vec::new();
        let mut upper: Vec<&Vec<f64>> = Vec::new();
        for (j, existing) in &family {
            let at_seed = {
                let i = t_grid.partition_point(|&v| v <= ts).saturating_sub(1);
                let i = i.min(t_grid.len() - 2);
                let w = ((ts - t_grid[i]) / (t_grid[i + 1] - t_grid[i])).clamp(0.0, 1.0);
                existing[i] * (1.0 - w) + existing[i + 1] * w
            };
            let _ = j;
            if at_seed <= xs {
                lower.push(existing);
            }
            if at_seed >= xs {
                upper.push(existing);
            }
        }
        for i in 0..positions.len() {
            let mut v = positions[i];
            for l in &lower {
                v = v.max(l[i]);
            }
            for u in &upper {
                v = v.min(u[i]);
            }
            positions[i] = v;
        }
        family.push((idx, positions));
    }

    let times = theta_times(t_grid, 32);
    let mut columns: Vec<Column> = family
        .into_iter()
        .map(|(idx, positions)| {
            let theta = theta_of_positions(&positions, t_grid, &times);
            let (_, span, truncated) = &raw[idx];
            Column { seed: seeds[idx], theta, y: 0.0, positions, valid: *span, truncated: *truncated }
        })
        .collect();
    columns.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let (th0, th1) = (columns[0].theta, columns.last().unwrap().theta);
    let spread = th1 - th0;
    for c in columns.iter_mut() {
        c.y = if spread > 0.0 { (c.theta - th0) / spread } else { 0.5 };
    }

    let d = &field.domain;
    let mut coverage = 0.0f64;
    for i in 0..32 {
        let t = d.t0 + d.t_span() * i as f64 / 31.0;
        for j in 0..32 {
            let x = d.x0 + d.x_span() * j as f64 / 31.0;
            let nearest = columns
                .iter()
                .map(|c| (x - c.position_at(t_grid, t)).abs())
                .fold(f64::INFINITY, f64::min);
            coverage = coverage.max(nearest);
        }
    }

    Ok(LagrangianParam { t_grid: t_grid.to_vec(), columns, coverage_radius: coverage, trace_step: step })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourceMethod {
    /// Difference quotients along a traced characteristic; the payload is the
    /// number of terms consumed.
    DiffQuot { terms: usize },
    /// Centered difference of u along a stored column.
    ColumnSlope,
    /// Forced to zero because u lies in the inflection cover of the flux.
    InflectionRule,
}

/// One source sample along a characteristic.
#[derive(Debug, Clone, Serialize)]
pub struct SourceSample {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub method: SourceMethod,
    pub curve_id: Option<usize>,
    pub converged: bool,
}

/// Per-column source series: centered differences of `u(t, χ(t, y))` in t,
/// one-sided at the span ends.
pub fn extract_lagrangian_source(
    param: &LagrangianParam,
    field: &SolutionField,
) -> Vec<Vec<SourceSample>> {
    let t = &param.t_grid;
    param
        .columns
        .iter()
        .enumerate()
        .map(|(id, col)| {
            let (a, b) = col.valid;
            if b - a < 2 {
                return Vec::new();
            }
            let u: Vec<f64> =
                (a..=b).map(|i| field.u_raw(t[i], col.positions[i])).collect();
            (a..=b)
                .map(|i| {
                    let k = i - a;
                    let value = if i == a {
                        (u[k + 1] - u[k]) / (t[i + 1] - t[i])
                    } else if i == b {
                        (u[k] - u[k - 1]) / (t[i] - t[i - 1])
                    } else {
                        (u[k + 1] - u[k - 1]) / (t[i + 1] - t[i - 1])
                    };
                    SourceSample {
                        t: t[i],
                        x: col.positions[i],
                        value,
                        method: SourceMethod::ColumnSlope,
                        curve_id: Some(id),
                        converged: true,
                    }
                })
                .collect()
        })
        .collect()
}

/// Difference quotients along `pos` at base time `t`, following the sequence
/// `h_1 = 1/2, h_{n+1} = h_n - h_n²` scaled into the available room.  Returns
/// the last quotient, the convergence flag, and the number of terms.
fn quotient_along(
    field: &SolutionField,
    pos: &dyn Fn(f64) -> Option<f64>,
    t: f64,
    room_fwd: f64,
    room_bwd: f64,
    tol: f64,
    budget: usize,
) -> Option<(f64, bool, usize)> {
    let (sign, room) = if room_fwd >= room_bwd { (1.0, room_fwd) } else { (-1.0, room_bwd) };
    let scale = room.min(1.0);
    if scale <= 0.0 {
        return None;
    }
    let x0 = pos(t)?;
    let u0 = field.u_raw(t, x0);
    let mut h = 0.5f64;
    let mut prev: Option<f64> = None;
    for n in 1..=budget {
        let sigma = sign * h * scale;
        let x = pos(t + sigma)?;
        let q = (field.u_raw(t + sigma, x) - u0) / sigma;
        if let Some(p) = prev {
            if (q - p).abs() <= tol * (1.0 + q.abs()) {
                return Some((q, true, n));
            }
        }
        prev = Some(q);
        h -= h * h;
    }
    prev.map(|q| (q, false, budget))
}

#[derive(Debug, Clone, Copy)]
pub struct UniversalSourceOpts {
    pub quotient_tol: f64,
    pub budget: usize,
    /// Grid step for the inflection cover; 0 means interval span / 256.
    pub cover_step: f64,
    /// Heun step for the point traces; 0 means domain span / 1024.
    pub trace_step: f64,
}

impl Default for UniversalSourceOpts {
    fn default() -> Self {
        UniversalSourceOpts { quotient_tol: 1e-3, budget: 24, cover_step: 0.0, trace_step: 0.0 }
    }
}

/// Pointwise source samples: trace a characteristic through each point and
/// run the difference-quotient sequence along it.  Samples whose `u` value
/// lies in the inflection cover of the flux are forced to zero; quotients
/// that exhaust the budget are reported with `converged = false`, which is a
/// status rather than a failure.
pub fn universal_source_sample(
    field: &SolutionField,
    points: &[(f64, f64)],
    _g_bound: f64,
    opts: UniversalSourceOpts,
) -> Result<Vec<SourceSample>> {
    let (z0, z1) = field.flux.interval();
    let cover_step = if opts.cover_step > 0.0 { opts.cover_step } else { (z1 - z0) / 256.0 };
    let cover = inflection_set(&field.flux, cover_step)?;
    let trace_step =
        if opts.trace_step > 0.0 { opts.trace_step } else { field.domain.t_span() / 1024.0 };

    let samples = exec::map_slice(points, |&(t, x)| -> Result<SourceSample> {
        if !field.domain.contains(t, x) {
            return Err(Error::OutOfDomain { t, x });
        }
        let u = field.u_raw(t, x);
        if cover.iter().any(|&(a, b)| u >= a && u <= b) {
            return Ok(SourceSample {
                t,
                x,
                value: 0.0,
                method: SourceMethod::InflectionRule,
                curve_id: None,
                converged: true,
            });
        }
        let d = &field.domain;
        let fwd = integrate_characteristic(field, t, x, d.t1, trace_step)
            .map_err(|e| Error::TraceFailure(e.to_string()))?;
        let bwd = integrate_characteristic(field, t, x, d.t0, trace_step)
            .map_err(|e| Error::TraceFailure(e.to_string()))?;
        let pos = move |s: f64| -> Option<f64> {
            if s >= t { fwd.position_at(s) } else { bwd.position_at(s) }
        };
        let room_fwd = (fwd_span_end(&pos, t, d.t1) - t).max(0.0);
        let room_bwd = (t - bwd_span_start(&pos, t, d.t0)).max(0.0);
        match quotient_along(field, &pos, t, room_fwd, room_bwd, opts.quotient_tol, opts.budget) {
            Some((value, converged, terms)) => Ok(SourceSample {
                t,
                x,
                value,
                method: SourceMethod::DiffQuot { terms },
                curve_id: None,
                converged,
            }),
            None => Ok(SourceSample {
                t,
                x,
                value: 0.0,
                method: SourceMethod::DiffQuot { terms: 0 },
                curve_id: None,
                converged: false,
            }),
        }
    });
    samples.into_iter().collect()
}

fn fwd_span_end(pos: &impl Fn(f64) -> Option<f64>, t: f64, t1: f64) -> f64 {
    // Largest reachable forward time; truncated traces stop early.
    let mut lo = t;
    let mut hi = t1;
    if pos(t1).is_some() {
        return t1;
    }
    for _ in 0..50 {
        let m = 0.5 * (lo + hi);
        if pos(m).is_some() {
            lo = m;
        } else {
            hi = m;
        }
    }
    lo
}

fn bwd_span_start(pos: &impl Fn(f64) -> Option<f64>, t: f64, t0: f64) -> f64 {
    let mut lo = t0;
    let mut hi = t;
    if pos(t0).is_some() {
        return t0;
    }
    for _ in 0..50 {
        let m = 0.5 * (lo + hi);
        if pos(m).is_some() {
            hi = m;
        } else {
            lo = m;
        }
    }
    hi
}

/// A pair of nearby times on one column pair where both columns touch yet
/// carry converged difference quotients further apart than epsilon.
#[derive(Debug, Clone, Serialize)]
pub struct SingleValuedViolation {
    pub pair: (usize, usize),
    pub time: f64,
    pub prev_time: f64,
    pub values: (f64, f64),
    pub gap: f64,
}

/// Scan adjacent columns for touching points with conflicting converged
/// quotients; two such times closer than sigma on the same pair violate the
/// single-valuedness of the source and are reported.
pub fn check_source_single_valued(
    param: &LagrangianParam,
    field: &SolutionField,
    epsilon: f64,
    sigma: f64,
    touch_tol: f64,
    quotient_tol: f64,
    budget: usize,
) -> Vec<SingleValuedViolation> {
    let t_grid = &param.t_grid;
    let (t0, t1) = (t_grid[0], *t_grid.last().unwrap());
    let mut violations = Vec::new();
    for j in 0..param.columns.len().saturating_sub(1) {
        let a = &param.columns[j];
        let b = &param.columns[j + 1];
        let mut discrepancies: Vec<(f64, f64, f64)> = Vec::new();
        for (i, &t) in t_grid.iter().enumerate() {
            if i == 0 || i + 1 == t_grid.len() {
                continue;
            }
            if (a.positions[i] - b.positions[i]).abs() > touch_tol {
                continue;
            }
            let qa = quotient_along(
                field,
                &|s: f64| Some(a.position_at(t_grid, s)),
                t,
                t1 - t,
                t - t0,
                quotient_tol,
                budget,
            );
            let qb = quotient_along(
                field,
                &|s: f64| Some(b.position_at(t_grid, s)),
                t,
                t1 - t,
                t - t0,
                quotient_tol,
                budget,
            );
            if let (Some((va, true, _)), Some((vb, true, _))) = (qa, qb) {
                if (va - vb).abs() > epsilon {
                    discrepancies.push((t, va, vb));
                }
            }
        }
        for w in discrepancies.windows(2) {
            let (tp, ..) = w[0];
            let (t, va, vb) = w[1];
            if t - tp < sigma {
                violations.push(SingleValuedViolation {
                    pair: (j, j + 1),
                    time: t,
                    prev_time: tp,
                    values: (va, vb),
                    gap: (va - vb).abs(),
                });
            }
        }
    }
    violations
}

/// Swept-area diagnostic for one label cell and time cell.
#[derive(Debug, Clone, Serialize)]
pub struct JacobianCell {
    pub t_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Time-averaged gap between the bounding columns (x-area per unit time
    /// per label cell).
    pub ratio: f64,
    pub degenerate: bool,
}

/// Area ratios between adjacent columns over coarse time cells; cells whose
/// ratio falls below `tol` indicate the parameterization compresses a label
/// interval onto a negligible x-set there.
pub fn jacobian_positivity(param: &LagrangianParam, tol: f64) -> Vec<JacobianCell> {
    let t = &param.t_grid;
    let n_cells = 16.min(t.len() - 1);
    let chunk = (t.len() - 1) / n_cells.max(1);
    let mut cells = Vec::new();
    for j in 0..param.columns.len().saturating_sub(1) {
        let a = &param.columns[j];
        let b = &param.columns[j + 1];
        for c in 0..n_cells {
            let lo = c * chunk;
            let hi = if c + 1 == n_cells { t.len() - 1 } else { (c + 1) * chunk };
            // Trapezoid average of the column gap over the time cell.
            let mut area = 0.0;
            for i in lo..hi {
                let g0 = b.positions[i] - a.positions[i];
                let g1 = b.positions[i + 1] - a.positions[i + 1];
                area += 0.5 * (g0 + g1) * (t[i + 1] - t[i]);
            }
            let ratio = area / (t[hi] - t[lo]);
            cells.push(JacobianCell {
                t_range: (t[lo], t[hi]),
                y_range: (a.y, b.y),
                ratio,
                degenerate: ratio < tol,
            });
        }
    }
    cells
}
