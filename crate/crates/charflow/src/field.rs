//! Continuous candidate solutions on a space-time rectangle: evaluation of
//! `u` and of the characteristic speed `f'(u)`, bound probing, and modulus of
//! continuity estimation under the anisotropic metric `max(|Δt|, |Δx|/L)`.

use std::fmt;
use std::sync::Arc;

use crate::domain::Rect;
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::sample::halton4;

/// A scalar function of (t, x), evaluable concurrently.
pub trait SpaceTimeFn: Send + Sync {
    fn eval(&self, t: f64, x: f64) -> f64;
}

impl<F> SpaceTimeFn for F
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// Bounded source term attached to a scenario; `bound` is the registered
/// sup-norm bound G when one is known.
#[derive(Clone)]
pub struct Source {
    g: Arc<dyn SpaceTimeFn>,
    pub bound: Option<f64>,
}

impl Source {
    pub fn zero() -> Self {
        Source { g: Arc::new(|_t: f64, _x: f64| 0.0), bound: Some(0.0) }
    }

    pub fn from_fn(g: Arc<dyn SpaceTimeFn>, bound: Option<f64>) -> Self {
        Source { g, bound }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.g.eval(t, x)
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Source").field("bound", &self.bound).finish()
    }
}

/// Probe-grid resolution for the L/M bounds.
const BOUND_PROBE: usize = 64;
/// Safety inflation on probed sup bounds; an exact sup is unobtainable from samples.
const BOUND_MARGIN: f64 = 1.05;

/// Continuous candidate solution with its flux and probed speed bounds.
///
/// `l_bound >= sup |f'(u)|` and `m_bound >= sup |f''(u)|` over a 64x64 probe
/// grid, inflated by 5%.
#[derive(Clone)]
pub struct SolutionField {
    pub domain: Rect,
    pub flux: Arc<FluxModel>,
    u: Arc<dyn SpaceTimeFn>,
    pub l_bound: f64,
    pub m_bound: f64,
    pub name: String,
}

impl fmt::Debug for SolutionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolutionField")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("l_bound", &self.l_bound)
            .field("m_bound", &self.m_bound)
            .finish()
    }
}

impl SolutionField {
    pub fn new(domain: Rect, flux: Arc<FluxModel>, u: Arc<dyn SpaceTimeFn>, name: &str) -> Self {
        let mut l = 0.0f64;
        let mut m = 0.0f64;
        for i in 0..BOUND_PROBE {
            let t = domain.t0 + domain.t_span() * i as f64 / (BOUND_PROBE - 1) as f64;
            for j in 0..BOUND_PROBE {
                let x = domain.x0 + domain.x_span() * j as f64 / (BOUND_PROBE - 1) as f64;
                let v = u.eval(t, x);
                l = l.max(flux.f_prime(v).abs());
                m = m.max(flux.f_second(v).abs());
            }
        }
        SolutionField {
            domain,
            flux,
            u,
            l_bound: l * BOUND_MARGIN,
            m_bound: m * BOUND_MARGIN,
            name: name.to_string(),
        }
    }

    /// Same field with a different evaluator (used by derived and perturbed fields).
    pub fn with_evaluator(&self, u: Arc<dyn SpaceTimeFn>, name: &str) -> Self {
        SolutionField::new(self.domain, self.flux.clone(), u, name)
    }

    pub fn eval_u(&self, t: f64, x: f64) -> Result<f64> {
        if !self.domain.contains(t, x) {
            return Err(Error::OutOfDomain { t, x });
        }
        Ok(self.u.eval(t, x))
    }

    /// Unchecked evaluation for quadrature inner loops.
    pub fn u_raw(&self, t: f64, x: f64) -> f64 {
        self.u.eval(t, x)
    }

    pub fn evaluator(&self) -> Arc<dyn SpaceTimeFn> {
        self.u.clone()
    }

    /// Characteristic speed `f'(u(t,x))`.
    pub fn eval_lambda(&self, t: f64, x: f64) -> Result<f64> {
        let v = self.eval_u(t, x)?;
        self.flux.check_in_interval(v)?;
        Ok(self.flux.f_prime(v))
    }

    pub fn lambda_raw(&self, t: f64, x: f64) -> f64 {
        self.flux.f_prime(self.u.eval(t, x))
    }

    /// Modulus of continuity table over ascending `deltas` under the metric
    /// `max(|Δt|, |Δx|/L)`.  Uses a deterministic low-discrepancy sample of
    /// 4096 point/displacement pairs per delta; a running maximum keeps the
    /// table nondecreasing.
    pub fn modulus_of_continuity(&self, deltas: &[f64]) -> ModulusEstimate {
        let mut omegas = Vec::with_capacity(deltas.len());
        let mut running = 0.0f64;
        for (k, &delta) in deltas.iter().enumerate() {
            running = running.max(self.omega_single(delta, (k as u64 + 1) << 16));
            omegas.push(running);
        }
        ModulusEstimate { deltas: deltas.to_vec(), omegas, metric_l: self.l_bound }
    }

    /// Single-delta modulus estimate.
    pub fn omega(&self, delta: f64) -> f64 {
        self.omega_single(delta, 1 << 16)
    }

    fn omega_single(&self, delta: f64, index_offset: u64) -> f64 {
        let l = self.l_bound.max(1e-300);
        let d = &self.domain;
        let mut worst = 0.0f64;
        for k in 0..4096u64 {
            let (a, b, c, e) = halton4(index_offset + k + 1);
            let t = d.t0 + d.t_span() * a;
            let x = d.x0 + d.x_span() * b;
            let mut dt = delta * (2.0 * c - 1.0);
            let mut dx = l * delta * (2.0 * e - 1.0);
            if !d.contains(t + dt, x + dx) {
                dt = -dt;
                dx = -dx;
            }
            let mut shrink = 0;
            while !d.contains(t + dt, x + dx) && shrink < 40 {
                dt *= 0.5;
                dx *= 0.5;
                shrink += 1;
            }
            if shrink == 40 {
                continue;
            }
            let gap = (self.u.eval(t, x) - self.u.eval(t + dt, x + dx)).abs();
            worst = worst.max(gap);
        }
        worst
    }
}

/// Nondecreasing modulus-of-continuity table `delta -> omega`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ModulusEstimate {
    pub deltas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Weight of the space component in the metric `max(|Δt|, |Δx|/L)`.
    pub metric_l: f64,
}

impl ModulusEstimate {
    /// Piecewise-linear lookup, clamped to the table ends.
    pub fn at(&self, delta: f64) -> f64 {
        if self.deltas.is_empty() {
            return 0.0;
        }
        if delta <= self.deltas[0] {
            return self.omegas[0];
        }
        for i in 1..self.deltas.len() {
            if delta <= self.deltas[i] {
                let w = (delta - self.deltas[i - 1]) / (self.deltas[i] - self.deltas[i - 1]);
                return self.omegas[i - 1] * (1.0 - w) + self.omegas[i] * w;
            }
        }
        *self.omegas.last().unwrap()
    }
}

/// Rectangular-lattice grid data evaluated by bilinear interpolation.
///
/// Bilinear keeps the evaluation continuous and inside the min/max range of
/// the samples, which the cutting machinery relies on.
#[derive(Debug, Clone)]
pub struct GridField {
    ts: Vec<f64>,
    xs: Vec<f64>,
    /// Row-major: value at (ts[i], xs[j]) is values[i * xs.len() + j].
    values: Vec<f64>,
    /// Bound on the bilinear interpolation error, from second differences.
    pub interp_error_bound: f64,
}

impl GridField {
    pub fn new(ts: Vec<f64>, xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 || xs.len() < 2 {
            return Err(Error::InvalidInput("grid needs at least 2 nodes per axis".into()));
        }
        if values.len() != ts.len() * xs.len() {
            return Err(Error::InvalidInput(format!(
                "grid wants {} values, got {}",
                ts.len() * xs.len(),
                values.len()
            )));
        }
        for w in ts.windows(2).chain(xs.windows(2)) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput("grid axes must be strictly increasing".into()));
            }
        }
        let mut bound = 0.0f64;
        let nx = xs.len();
        for i in 0..ts.len() {
            for j in 1..nx - 1 {
                let d2 = values[i * nx + j + 1] - 2.0 * values[i * nx + j] + values[i * nx + j - 1];
                bound = bound.max(d2.abs() / 8.0);
            }
        }
        for j in 0..nx {
            for i in 1..ts.len() - 1 {
                let d2 = values[(i + 1) * nx + j] - 2.0 * values[i * nx + j] + values[(i - 1) * nx + j];
                bound = bound.max(d2.abs() / 8.0);
            }
        }
        Ok(GridField { ts, xs, values, interp_error_bound: bound })
    }

    /// Parse a `t,x,u` CSV; the (t, x) pairs must fill a rectangular lattice.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut triples: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::InvalidInput("grid CSV rows need t,x,u".into()));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number {s:?} in grid CSV")))
            };
            triples.push((parse(&rec[0])?, parse(&rec[1])?, parse(&rec[2])?));
        }
        let mut ts: Vec<f64> = triples.iter().map(|r| r.0).collect();
        let mut xs: Vec<f64> = triples.iter().map(|r| r.1).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if ts.len() * xs.len() != triples.len() {
            return Err(Error::InvalidInput(format!(
                "grid CSV is not a rectangular lattice: {} x {} axes vs {} rows",
                ts.len(),
                xs.len(),
                triples.len()
            )));
        }
        let nx = xs.len();
        let mut values = vec![f64::NAN; ts.len() * nx];
        for (t, x, u) in triples {
            let i = ts.partition_point(|&v| v < t);
            let j = xs.partition_point(|&v| v < x);
            if !values[i * nx + j].is_nan() {
                return Err(Error::InvalidInput(format!("duplicate grid node ({t}, {x})")));
            }
            values[i * nx + j] = u;
        }
        GridField::new(ts, xs, values)
    }

    pub fn rect(&self) -> Rect {
        Rect {
            t0: self.ts[0],
            t1: *self.ts.last().unwrap(),
            x0: self.xs[0],
            x1: *self.xs.last().unwrap(),
        }
    }

    fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
        let n = axis.len();
        if v <= axis[0] {
            return (0, 0.0);
        }
        if v >= axis[n - 1] {
            return (n - 2, 1.0);
        }
        let i = axis.partition_point(|&a| a <= v) - 1;
        let i = i.min(n - 2);
        ((i), (v - axis[i]) / (axis[i + 1] - axis[i]))
    }
}

impl SpaceTimeFn for GridField {
    fn eval(&self, t: f64, x: f64) -> f64 {
        let (i, wt) = Self::bracket(&self.ts, t);
        let (j, wx) = Self::bracket(&self.xs, x);
        let nx = self.xs.len();
        let v00 = self.values[i * nx + j];
        let v01 = self.values[i * nx + j + 1];
        let v10 = self.values[(i + 1) * nx + j];
        let v11 = self.values[(i + 1) * nx + j + 1];
        (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;

    fn burgers_field(u: Arc<dyn SpaceTimeFn>, rect: Rect, name: &str) -> SolutionField {
        SolutionField::new(rect, Arc::new(FluxModel::burgers((-3.0, 3.0))), u, name)
    }

    #[test]
    fn constant_field_evaluates_everywhere() {
        let rect = Rect::new(0.0, 1.0, -1.0, 1.0).unwrap();
        let f = burgers_field(Arc::new(|_t: f64, _x: f64| 0.5), rect, "constant");
        assert_eq!(f.eval_u(0.3, 0.7).unwrap(), 0.5);
        assert_eq!(f.eval_lambda(0.3, 0.7).unwrap(), 0.5);
        assert!(f.eval_u(2.0, 0.0).is_err());
    }

    #[test]
    fn rarefaction_closed_form() {
        let rect = Rect::new(1.0, 2.0, 0.0, 2.0).unwrap();
        let f = burgers_field(Arc::new(|t: f64, x: f64| x / t), rect, "rarefaction");
        assert!((f.eval_u(2.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lambda_composes_flux_derivative() {
        // Cubic flux with u = sign(x) |x|^{1/3}: speed is u² = |x|^{2/3}.
        let rect = Rect::new(0.0, 1.0, -1.0, 1.0).unwrap();
        let flux = Arc::new(FluxModel::cubic((-1.5, 1.5)));
        let u: Arc<dyn SpaceTimeFn> =
            Arc::new(|_t: f64, x: f64| x.signum() * x.abs().powf(1.0 / 3.0));
        let f = SolutionField::new(rect, flux, u, "cubic-merge");
        let oracle = 0.8f64.powf(2.0 / 3.0);
        assert!((f.eval_lambda(0.5, 0.8).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.8618).abs() < 5e-4);
        assert_eq!(f.eval_lambda(0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bound_probe_dominates_samples() {
        let rect = Rect::new(1.0, 2.0, 0.0, 2.0).unwrap();
        let f = burgers_field(Arc::new(|t: f64, x: f64| x / t), rect, "rarefaction");
        for i in 0..64 {
            let t = 1.0 + i as f64 / 63.0;
            for j in 0..64 {
                let x = 2.0 * j as f64 / 63.0;
                assert!(f.lambda_raw(t, x).abs() <= f.l_bound + 1e-12);
                assert!(f.flux.f_second(f.u_raw(t, x)).abs() <= f.m_bound + 1e-12);
            }
        }
    }

    #[test]
    fn modulus_constant_is_zero() {
        let rect = Rect::new(0.0, 1.0, -1.0, 1.0).unwrap();
        let f = burgers_field(Arc::new(|_t: f64, _x: f64| 0.25), rect, "constant");
        let m = f.modulus_of_continuity(&[0.05, 0.1, 0.2]);
        assert!(m.omegas.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn modulus_of_affine_profile_matches_analytic_rate() {
        // u = x with L = 1 (after the 5% margin, slightly above): the exact
        // modulus under the metric is delta * L.
        let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let f = burgers_field(Arc::new(|_t: f64, x: f64| x), rect, "affine");
        let m = f.modulus_of_continuity(&[0.1]);
        let expected = 0.1 * f.l_bound;
        assert!(
            (m.omegas[0] - expected).abs() <= 0.1 * expected,
            "omega {} vs analytic {expected}",
            m.omegas[0]
        );
    }

    #[test]
    fn modulus_is_nondecreasing_and_holder_for_cube_root_profile() {
        let rect = Rect::new(0.0, 1.0, -1.0, 1.0).unwrap();
        let flux = Arc::new(FluxModel::cubic((-1.5, 1.5)));
        let u: Arc<dyn SpaceTimeFn> =
            Arc::new(|_t: f64, x: f64| x.signum() * x.abs().powf(1.0 / 3.0));
        let f = SolutionField::new(rect, flux, u, "cubic-merge");
        let deltas = [0.0125, 0.025, 0.05, 0.1, 0.2];
        let m = f.modulus_of_continuity(&deltas);
        for w in m.omegas.windows(2) {
            assert!(w[0] <= w[1] + 1e-15);
        }
        // Hölder-1/3 in x: omega(delta) = O(delta^{1/3}).  Oracle: the exact
        // modulus of |x|^{1/3} over a step L*delta is (L*delta)^{1/3} .. doubled
        // across the origin.
        for (d, w) in deltas.iter().zip(&m.omegas) {
            let cap = 2.0 * (f.l_bound * d).powf(1.0 / 3.0);
            assert!(*w <= cap + 1e-9, "omega({d}) = {w} exceeds {cap}");
        }
    }

    #[test]
    fn bilinear_reproduces_nodes_and_affine_data() {
        let ts = vec![0.0, 0.5, 1.0];
        let xs = vec![0.0, 0.5, 1.0];
        let mut values = Vec::new();
        for &_t in &ts {
            for &x in &xs {
                values.push(x);
            }
        }
        let g = GridField::new(ts.clone(), xs.clone(), values).unwrap();
        for &t in &ts {
            for &x in &xs {
                assert_eq!(g.eval(t, x), x);
            }
        }
        // Bilinear reproduces affine data exactly at off-node points too.
        assert!((g.eval(0.25, 0.25) - 0.25).abs() < 1e-15);
        assert!((g.eval(0.9, 0.77) - 0.77).abs() < 1e-15);
    }

    #[test]
    fn grid_interpolation_error_bound_shrinks_under_refinement() {
        let make = |n: usize| {
            let ts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let xs = ts.clone();
            let mut v = Vec::new();
            for &t in &ts {
                for &x in &xs {
                    v.push((2.0 * x).sin() + t * t);
                }
            }
            GridField::new(ts, xs, v).unwrap()
        };
        let coarse = make(8);
        let fine = make(16);
        assert!(fine.interp_error_bound <= coarse.interp_error_bound);
    }

    #[test]
    fn non_lattice_csv_is_rejected() {
        let dir = std::env::temp_dir().join("charflow-grid-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "t,x,u\n0,0,1\n0,1,2\n1,0,3\n").unwrap();
        assert!(GridField::from_csv(&path).is_err());
        let good = dir.join("good.csv");
        std::fs::write(&good, "t,x,u\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n").unwrap();
        let g = GridField::from_csv(&good).unwrap();
        assert_eq!(g.eval(1.0, 1.0), 4.0);
    }
}
