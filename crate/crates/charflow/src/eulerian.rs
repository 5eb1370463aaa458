//! Weak-form and entropy residuals tested against compactly supported bump
//! functions, maximum-principle comparisons, and the derived-field check that
//! `f'(u)` solves the quadratic-flux balance law with source `f''(u) g`.
//!
//! Sign convention: a residual is the distributional action
//! `< u_t + f(u)_x - g , φ >` evaluated by parts, so it vanishes for exact
//! solutions and comes out negative on entropy-dissipating contrast fields.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::Rect;
use crate::error::{Error, Result};
use crate::field::{SolutionField, Source, SpaceTimeFn};
use crate::flux::FluxModel;
use crate::quad::{pow2_at_least, simpson, simpson2d};

/// Compactly supported bump `amplitude * B((t-ct)/rt) B((x-cx)/rx)` with
/// `B(s) = (1-s²)³`; vanishes with its first derivatives on the support edge.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestFunction {
    pub center: (f64, f64),
    pub radii: (f64, f64),
    pub amplitude: f64,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s * s;
        w * w * w
    }
}

fn bump_d(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s * s;
        -6.0 * s * w * w
    }
}

/// Integral of B over [-1, 1]: 32/35.
pub const BUMP_MASS: f64 = 32.0 / 35.0;

impl TestFunction {
    pub fn new(center: (f64, f64), radii: (f64, f64)) -> Self {
        TestFunction { center, radii, amplitude: 1.0 }
    }

    /// Scale so that the line mass along x = x_line is one:
    /// `∫ φ(t, x_line) dt = 1`.
    pub fn normalized_on_line(mut self, x_line: f64) -> Self {
        let profile = bump((x_line - self.center.1) / self.radii.1);
        self.amplitude = 1.0 / (self.radii.0 * BUMP_MASS * profile);
        self
    }

    pub fn support(&self) -> Rect {
        Rect {
            t0: self.center.0 - self.radii.0,
            t1: self.center.0 + self.radii.0,
            x0: self.center.1 - self.radii.1,
            x1: self.center.1 + self.radii.1,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.amplitude * bump((t - self.center.0) / self.radii.0) * bump((x - self.center.1) / self.radii.1)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.amplitude * bump_d((t - self.center.0) / self.radii.0) / self.radii.0
            * bump((x - self.center.1) / self.radii.1)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.amplitude * bump((t - self.center.0) / self.radii.0)
            * bump_d((x - self.center.1) / self.radii.1) / self.radii.1
    }
}

/// Deterministic batch of test functions supported inside `domain`.
pub fn random_test_functions(domain: &Rect, n: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rt = domain.t_span() * rng.gen_range(0.15..0.3);
            let rx = domain.x_span() * rng.gen_range(0.15..0.3);
            let ct = rng.gen_range(domain.t0 + rt..domain.t1 - rt);
            let cx = rng.gen_range(domain.x0 + rx..domain.x1 - rx);
            TestFunction::new((ct, cx), (rt, rx))
        })
        .collect()
}

/// Residual value with its quadrature metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub value: f64,
    /// Requested resolution: quadrature spacing is about 1/mesh.
    pub mesh: u32,
    pub value_finer: f64,
    /// |value at spacing h/2| / |value at spacing h|.
    pub refinement_ratio: f64,
    pub tol: f64,
    pub verdict: bool,
}

fn quad_counts(support: &Rect, mesh: u32) -> (usize, usize) {
    let nt = pow2_at_least(((support.t_span() * mesh as f64).ceil() as usize).max(4));
    let nx = pow2_at_least(((support.x_span() * mesh as f64).ceil() as usize).max(4));
    (nt, nx)
}

fn residual_quadrature<F>(support: &Rect, mesh: u32, integrand: F) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let (nt, nx) = quad_counts(support, mesh);
    let v = -simpson2d(support, nt, nx, &integrand);
    let v_fine = -simpson2d(support, 2 * nt, 2 * nx, &integrand);
    (v, v_fine)
}

fn report(value: f64, value_finer: f64, mesh: u32, tol: f64) -> ResidualReport {
    let ratio = if value.abs() > 0.0 { value_finer.abs() / value.abs() } else { 0.0 };
    ResidualReport { value, mesh, value_finer, refinement_ratio: ratio, tol, verdict: value.abs() <= tol }
}

/// Weak-form residual `< u_t + f(u)_x - g , φ >` by tensor Simpson on the
/// support bounding box.
pub fn weak_residual(
    field: &SolutionField,
    source: &Source,
    tf: &TestFunction,
    mesh: u32,
    tol: f64,
) -> Result<ResidualReport> {
    let sup = tf.support();
    if !(field.domain.contains(sup.t0, sup.x0) && field.domain.contains(sup.t1, sup.x1)) {
        return Err(Error::SupportOutOfDomain);
    }
    let flux = field.flux.clone();
    let (v, vf) = residual_quadrature(&sup, mesh, |t, x| {
        let u = field.u_raw(t, x);
        tf.dt(t, x) * u + tf.dx(t, x) * flux.f(u) + tf.eval(t, x) * source.eval(t, x)
    });
    Ok(report(v, vf, mesh, tol))
}

/// Entropy choices; Kruzkov entropies are smoothed to C^{1,1} with a
/// quadratic cap of the given half-width.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum EntropySpec {
    Linear,
    Quadratic,
    KruzkovSmoothed { c: f64, width: f64 },
}

impl EntropySpec {
    pub fn eta(&self, z: f64) -> f64 {
        match *self {
            EntropySpec::Linear => z,
            EntropySpec::Quadratic => 0.5 * z * z,
            EntropySpec::KruzkovSmoothed { c, width } => {
                let d = z - c;
                if d.abs() >= width {
                    d.abs()
                } else {
                    0.5 * d * d / width + 0.5 * width
                }
            }
        }
    }

    pub fn eta_prime(&self, z: f64) -> f64 {
        match *self {
            EntropySpec::Linear => 1.0,
            EntropySpec::Quadratic => z,
            EntropySpec::KruzkovSmoothed { c, width } => ((z - c) / width).clamp(-1.0, 1.0),
        }
    }
}

/// Entropy pair (η, q) with `q' = η' f'`; q is a cached antiderivative table
/// over the flux working interval (composite Simpson, budgeted at 1e-10).
pub struct EntropyPair {
    pub spec: EntropySpec,
    flux: Arc<FluxModel>,
    z0: f64,
    step: f64,
    table: Vec<f64>,
}

const Q_TABLE_PANELS: usize = 8192;

impl EntropyPair {
    pub fn new(flux: Arc<FluxModel>, spec: EntropySpec) -> Self {
        let (z0, z1) = flux.interval();
        let step = (z1 - z0) / Q_TABLE_PANELS as f64;
        let integrand = |z: f64| spec.eta_prime(z) * flux.f_prime(z);
        let mut table = Vec::with_capacity(Q_TABLE_PANELS + 1);
        // Anchor q(z0) = f(z0) so the linear entropy reproduces q = f exactly.
        let mut acc = flux.f(z0);
        table.push(acc);
        for i in 0..Q_TABLE_PANELS {
            let a = z0 + i as f64 * step;
            acc += simpson(a, a + step, 4, integrand);
            table.push(acc);
        }
        EntropyPair { spec, flux, z0, step, table }
    }

    pub fn eta(&self, z: f64) -> f64 {
        self.spec.eta(z)
    }

    pub fn eta_prime(&self, z: f64) -> f64 {
        self.spec.eta_prime(z)
    }

    /// Entropy flux q(z).
    pub fn q(&self, z: f64) -> f64 {
        let idx = ((z - self.z0) / self.step).floor();
        let i = (idx.max(0.0) as usize).min(self.table.len() - 2);
        let a = self.z0 + i as f64 * self.step;
        let spec = self.spec;
        let flux = &self.flux;
        self.table[i] + simpson(a, z, 4, |v| spec.eta_prime(v) * flux.f_prime(v))
    }
}

/// Entropy residual `< η(u)_t + q(u)_x - η'(u) g , φ >`; zero for continuous
/// solutions, strictly negative across dissipative jumps.
pub fn entropy_residual(
    field: &SolutionField,
    source: &Source,
    pair: &EntropyPair,
    tf: &TestFunction,
    mesh: u32,
    tol: f64,
) -> Result<ResidualReport> {
    let sup = tf.support();
    if !(field.domain.contains(sup.t0, sup.x0) && field.domain.contains(sup.t1, sup.x1)) {
        return Err(Error::SupportOutOfDomain);
    }
    let (v, vf) = residual_quadrature(&sup, mesh, |t, x| {
        let u = field.u_raw(t, x);
        tf.dt(t, x) * pair.eta(u)
            + tf.dx(t, x) * pair.q(u)
            + tf.eval(t, x) * pair.eta_prime(u) * source.eval(t, x)
    });
    Ok(report(v, vf, mesh, tol))
}

/// A probe point where the ordered pair fails `u <= v + tol`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderViolation {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub v: f64,
}

/// Comparison-principle audit: with `u <= v` initially and `g_u <= g_v`
/// everywhere, entropy solutions stay ordered; returns every probe point
/// where the order fails by more than `tol`.
pub fn maximum_principle_check(
    field_u: &SolutionField,
    field_v: &SolutionField,
    source_u: &Source,
    source_v: &Source,
    grid_n: usize,
    tol: f64,
) -> Result<Vec<OrderViolation>> {
    let d = field_u.domain;
    if field_v.domain != d {
        return Err(Error::Precondition("ordered pair must share the domain rectangle".into()));
    }
    let n = grid_n.max(2);
    let probe = |i: usize, j: usize| {
        let t = d.t0 + d.t_span() * i as f64 / (n - 1) as f64;
        let x = d.x0 + d.x_span() * j as f64 / (n - 1) as f64;
        (t, x)
    };
    for j in 0..n {
        let (t, x) = probe(0, j);
        if field_u.u_raw(t, x) > field_v.u_raw(t, x) + tol {
            return Err(Error::Precondition(format!("u > v at initial time, x = {x}")));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let (t, x) = probe(i, j);
            if source_u.eval(t, x) > source_v.eval(t, x) + tol {
                return Err(Error::Precondition(format!("g_u > g_v at ({t}, {x})")));
            }
        }
    }
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (t, x) = probe(i, j);
            let u = field_u.u_raw(t, x);
            let v = field_v.u_raw(t, x);
            if u > v + tol {
                violations.push(OrderViolation { t, x, u, v });
            }
        }
    }
    Ok(violations)
}

/// Weak residual of the derived field `v = f'(u)` under the quadratic flux
/// `z²/2` with source `f''(u) g`.
pub fn flux_derivative_solution_check(
    field: &SolutionField,
    source: &Source,
    tf: &TestFunction,
    mesh: u32,
    tol: f64,
) -> Result<ResidualReport> {
    let base_u = field.evaluator();
    let base_flux = field.flux.clone();
    let derived_eval: Arc<dyn SpaceTimeFn> = {
        let flux = base_flux.clone();
        let u = base_u.clone();
        Arc::new(move |t: f64, x: f64| flux.f_prime(u.eval(t, x)))
    };
    // Working interval wide enough for the derived range.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let d = field.domain;
    for i in 0..64 {
        let t = d.t0 + d.t_span() * i as f64 / 63.0;
        for j in 0..64 {
            let x = d.x0 + d.x_span() * j as f64 / 63.0;
            let v = derived_eval.eval(t, x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = 0.1 * (hi - lo).max(1.0);
    let derived_field = SolutionField::new(
        d,
        Arc::new(FluxModel::burgers((lo - pad, hi + pad))),
        derived_eval,
        &format!("{}-speed", field.name),
    );
    let derived_source: Arc<dyn SpaceTimeFn> = {
        let flux = base_flux;
        let u = base_u;
        let g = source.clone();
        Arc::new(move |t: f64, x: f64| flux.f_second(u.eval(t, x)) * g.eval(t, x))
    };
    weak_residual(&derived_field, &Source::from_fn(derived_source, None), tf, mesh, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, builtin_with, BuiltinParams};

    fn centered_tf(s: &crate::scenario::Scenario) -> TestFunction {
        let d = s.field.domain;
        TestFunction::new(
            (0.5 * (d.t0 + d.t1), 0.5 * (d.x0 + d.x1)),
            (0.3 * d.t_span(), 0.3 * d.x_span()),
        )
    }

    #[test]
    fn constant_field_weak_residual_is_machine_zero() {
        let s = builtin("constant").unwrap();
        let r = weak_residual(&s.field, &s.source, &centered_tf(&s), 256, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-10, "residual {}", r.value);
        assert!(r.verdict);
    }

    #[test]
    fn manufactured_solution_passes_at_stated_mesh() {
        // Oracle: g = u_t + u u_x computed analytically in the scenario.
        let s = builtin("manufactured").unwrap();
        let r = weak_residual(&s.field, &s.source, &centered_tf(&s), 256, 1e-6).unwrap();
        assert!(r.value.abs() <= 1e-6, "residual {}", r.value);
    }

    #[test]
    fn holder_field_passes_at_fine_mesh_with_decaying_ratio() {
        let s = builtin("sqrt-stationary").unwrap();
        let r = weak_residual(&s.field, &s.source, &centered_tf(&s), 512, 1e-4).unwrap();
        assert!(r.value.abs() <= 1e-4, "residual {}", r.value);
        assert!(
            r.refinement_ratio <= 0.6 || r.value_finer.abs() <= 1e-9,
            "ratio {} values {} {}",
            r.refinement_ratio,
            r.value,
            r.value_finer
        );
    }

    #[test]
    fn weak_residual_is_linear_in_the_test_function() {
        let s = builtin("cubic-merge").unwrap();
        let tf = centered_tf(&s);
        let mut tf_scaled = tf;
        tf_scaled.amplitude = 3.5;
        let r1 = weak_residual(&s.field, &s.source, &tf, 128, 1.0).unwrap();
        let r2 = weak_residual(&s.field, &s.source, &tf_scaled, 128, 1.0).unwrap();
        let rel = (r2.value - 3.5 * r1.value).abs() / (1.0 + r1.value.abs());
        assert!(rel < 1e-12, "linearity violated: {rel}");
    }

    #[test]
    fn support_outside_domain_is_rejected() {
        let s = builtin("constant").unwrap();
        let tf = TestFunction::new((0.5, 0.9), (0.3, 0.3));
        assert!(matches!(
            weak_residual(&s.field, &s.source, &tf, 64, 1.0),
            Err(Error::SupportOutOfDomain)
        ));
    }

    #[test]
    fn linear_entropy_reproduces_weak_residual() {
        let s = builtin("rarefaction").unwrap();
        let tf = centered_tf(&s);
        let pair = EntropyPair::new(s.field.flux.clone(), EntropySpec::Linear);
        let rw = weak_residual(&s.field, &s.source, &tf, 128, 1.0).unwrap();
        let re = entropy_residual(&s.field, &s.source, &pair, &tf, 128, 1.0).unwrap();
        assert!((rw.value - re.value).abs() < 1e-9, "{} vs {}", rw.value, re.value);
    }

    #[test]
    fn entropy_flux_table_matches_closed_forms() {
        // Burgers with η = z²/2 gives q = z³/3 up to the anchoring constant
        // q(z0) = f(z0) - z0³/3.
        let s = builtin("shock").unwrap();
        let pair = EntropyPair::new(s.field.flux.clone(), EntropySpec::Quadratic);
        let z0 = s.field.flux.interval().0;
        let shift = s.field.flux.f(z0) - z0 * z0 * z0 / 3.0;
        for k in 0..9 {
            let z = -1.2 + 2.4 * k as f64 / 8.0;
            let oracle = z * z * z / 3.0 + shift;
            assert!((pair.q(z) - oracle).abs() < 1e-10, "q({z}) = {} vs {oracle}", pair.q(z));
        }
    }

    #[test]
    fn continuous_solutions_do_not_dissipate() {
        let s = builtin("rarefaction").unwrap();
        let tf = centered_tf(&s);
        let pair = EntropyPair::new(s.field.flux.clone(), EntropySpec::Quadratic);
        let r = entropy_residual(&s.field, &s.source, &pair, &tf, 256, 1e-6).unwrap();
        assert!(r.value.abs() <= 1e-6, "entropy residual {}", r.value);
    }

    #[test]
    fn stationary_shock_dissipates_two_thirds() {
        // Rankine-Hugoniot oracle for u_l = 1, u_r = -1 under f = z²/2 with
        // η = z²/2, q = z³/3: production is q(u_r) - q(u_l) = -2/3 per unit
        // time, weighted by the line mass of φ along the jump.
        let s = builtin("shock").unwrap();
        let pair = EntropyPair::new(s.field.flux.clone(), EntropySpec::Quadratic);
        let q_jump = (-1.0f64).powi(3) / 3.0 - 1.0f64.powi(3) / 3.0;
        assert!((q_jump - (-2.0 / 3.0)).abs() < 1e-15);
        let tf = TestFunction::new((0.5, 0.0), (0.35, 0.5)).normalized_on_line(0.0);
        let r = entropy_residual(&s.field, &s.source, &pair, &tf, 512, 1.0).unwrap();
        assert!(
            (r.value - q_jump).abs() <= 0.05 * q_jump.abs(),
            "dissipation {} vs oracle {q_jump}",
            r.value
        );
    }

    #[test]
    fn ordered_constants_produce_no_violations() {
        let lo = builtin_with("constant", BuiltinParams { value: 0.0, ..Default::default() }).unwrap();
        let hi = builtin_with("constant", BuiltinParams { value: 1.0, ..Default::default() }).unwrap();
        let v = maximum_principle_check(&lo.field, &hi.field, &lo.source, &hi.source, 64, 1e-9)
            .unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn misordered_pair_fails_the_precondition() {
        let lo = builtin_with("constant", BuiltinParams { value: 0.0, ..Default::default() }).unwrap();
        let hi = builtin_with("constant", BuiltinParams { value: 1.0, ..Default::default() }).unwrap();
        assert!(matches!(
            maximum_principle_check(&hi.field, &lo.field, &hi.source, &lo.source, 16, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn derived_field_check_passes_on_closed_forms() {
        let s = builtin("constant").unwrap();
        let r = flux_derivative_solution_check(&s.field, &s.source, &centered_tf(&s), 256, 1e-10)
            .unwrap();
        assert!(r.value.abs() <= 1e-10);

        // Burgers: f' = id, so the derived residual equals the field's own.
        let s = builtin("rarefaction").unwrap();
        let tf = centered_tf(&s);
        let own = weak_residual(&s.field, &s.source, &tf, 256, 1e-6).unwrap();
        let derived = flux_derivative_solution_check(&s.field, &s.source, &tf, 256, 1e-6).unwrap();
        assert!((own.value - derived.value).abs() < 1e-12);

        // Cubic flux: v = u² = |x| with source f''(u) g = sign(x) |x| = x.
        let s = builtin("sqrt-stationary").unwrap();
        let r = flux_derivative_solution_check(&s.field, &s.source, &centered_tf(&s), 512, 1e-4)
            .unwrap();
        assert!(r.value.abs() <= 1e-4, "derived residual {}", r.value);
    }

    #[test]
    fn random_test_functions_are_deterministic_and_supported() {
        let s = builtin("rarefaction").unwrap();
        let a = random_test_functions(&s.field.domain, 10, 42);
        let b = random_test_functions(&s.field.domain, 10, 42);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.center, y.center);
        }
        for tf in &a {
            let sup = tf.support();
            assert!(s.field.domain.contains(sup.t0, sup.x0));
            assert!(s.field.domain.contains(sup.t1, sup.x1));
        }
    }
}
