//! Characteristic curves built two independent ways: Heun integration of
//! `γ' = f'(u(t, γ))`, and a backward/forward dependency-triangle construction
//! that selects each node inside a speed window and keeps the increments of
//! `u` along the nodes under the registered source bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::quad::simpson;
use crate::field::Source;

/// Speeds below this are treated as an exact zero of the speed field: the
/// trace freezes there instead of drifting across a degenerate branch point.
const FREEZE_LAMBDA: f64 = 1e-12;
/// Cheap trigger below which a step is scanned for an interior speed zero.
const BARRIER_TRIGGER: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Provenance {
    Ode { step: f64 },
    Affine { k: usize },
}

/// Time-parameterized path with its construction provenance.  `times` are
/// strictly increasing; `truncated` marks paths that exited the rectangle.
#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicCurve {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub provenance: Provenance,
    pub truncated: bool,
}

impl CharacteristicCurve {
    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// Linear interpolation inside the curve's span.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        let (a, b) = self.span();
        let slack = 1e-12 * (b - a).max(1.0);
        if t < a - slack || t > b + slack {
            return None;
        }
        let t = t.clamp(a, b);
        let i = self.times.partition_point(|&v| v <= t).saturating_sub(1);
        let i = i.min(self.times.len() - 2);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some(self.positions[i] * (1.0 - w) + self.positions[i + 1] * w)
    }

    /// Values of `u` at the curve nodes.
    pub fn u_along(&self, field: &SolutionField) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.positions)
            .map(|(&t, &x)| field.u_raw(t, x))
            .collect()
    }
}

/// Find an interior zero of `|lambda|` on the closed x-interval, if any.
/// Ternary search; the scan only runs when an endpoint speed is already tiny,
/// so unimodality near the zero is a safe assumption.
fn interior_speed_zero(field: &SolutionField, t: f64, x_lo: f64, x_hi: f64) -> Option<f64> {
    let (mut a, mut b) = (x_lo.min(x_hi), x_lo.max(x_hi));
    if b - a <= 0.0 {
        return None;
    }
    for _ in 0..80 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if field.lambda_raw(t, m1).abs() <= field.lambda_raw(t, m2).abs() {
            b = m2;
        } else {
            a = m1;
        }
    }
    let m = 0.5 * (a + b);
    (field.lambda_raw(t, m).abs() < FREEZE_LAMBDA).then_some(m)
}

/// Trace the characteristic through `(t_start, x_start)` up to `t_end`
/// (either direction) with fixed-step Heun.  The speed field is only
/// continuous, so higher-order integrators gain nothing.  A step that would
/// carry the path across a zero of the speed freezes it at the zero; a step
/// that exits the rectangle stops the trace with the truncation flag set.
pub fn integrate_characteristic(
    field: &SolutionField,
    t_start: f64,
    x_start: f64,
    t_end: f64,
    step: f64,
) -> Result<CharacteristicCurve> {
    if !field.domain.contains(t_start, x_start) {
        return Err(Error::OutOfDomain { t: t_start, x: x_start });
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let t_end = field.domain.clamp_t(t_end);
    let span = t_end - t_start;
    let n = ((span.abs() / step).ceil() as usize).max(1);
    let h = span / n as f64;

    let mut times = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    times.push(t_start);
    positions.push(x_start);

    let mut x = x_start;
    let mut truncated = false;
    let mut frozen = false;
    for i in 0..n {
        let t = t_start + i as f64 * h;
        let t_next = t_start + (i + 1) as f64 * h;
        if frozen {
            times.push(t_next);
            positions.push(x);
            continue;
        }
        let k1 = field.lambda_raw(t, x);
        if k1.abs() < FREEZE_LAMBDA {
            frozen = true;
            times.push(t_next);
            positions.push(x);
            continue;
        }
        let x_mid = field.domain.clamp_x(x + h * k1);
        let k2 = field.lambda_raw(t_next, x_mid);
        let mut x_next = x + 0.5 * h * (k1 + k2);

        if k1.abs().min(k2.abs()) < BARRIER_TRIGGER {
            if let Some(z) = interior_speed_zero(field, t_next, x, x_next) {
                x_next = z;
                frozen = true;
            }
        }
        if !field.domain.contains_x(x_next) {
            truncated = true;
            times.push(t_next);
            positions.push(field.domain.clamp_x(x_next));
            break;
        }
        times.push(t_next);
        positions.push(x_next);
        x = x_next;
    }

    if h < 0.0 {
        times.reverse();
        positions.reverse();
    }
    Ok(CharacteristicCurve { times, positions, provenance: Provenance::Ode { step }, truncated })
}

/// Largest pairwise difference quotient of `u` along the curve nodes.
/// All pairs, not only adjacent ones, so oscillation cannot cancel.
pub fn lipschitz_constant_along(curve: &CharacteristicCurve, field: &SolutionField) -> f64 {
    let u = curve.u_along(field);
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let dt = curve.times[j] - curve.times[i];
            if dt > 1e-14 {
                worst = worst.max((u[j] - u[i]).abs() / dt);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub enum Direction {
    Backward,
    Forward,
}

/// Backward (or forward) cone of influence at `apex` over a time depth
/// `delta`, with the narrow speed window cut by the modulus of continuity.
#[derive(Debug, Clone, Serialize)]
pub struct DependencyTriangle {
    pub apex: (f64, f64),
    pub depth: f64,
    /// Half-width of the wide triangle basis: L * depth.
    pub half_width: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub omega: f64,
}

impl DependencyTriangle {
    pub fn wide_basis_width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn narrow_basis_width(&self) -> f64 {
        (self.slope_hi - self.slope_lo) * self.depth
    }
}

pub fn dependency_triangle(
    field: &SolutionField,
    apex: (f64, f64),
    delta: f64,
) -> Result<DependencyTriangle> {
    let lam = field.eval_lambda(apex.0, apex.1)?;
    let omega = field.omega(delta);
    let half = field.m_bound * omega;
    Ok(DependencyTriangle {
        apex,
        depth: delta,
        half_width: field.l_bound * delta,
        slope_lo: (lam - half).max(-field.l_bound),
        slope_hi: (lam + half).min(field.l_bound),
        omega,
    })
}

/// Piecewise-affine characteristic with node audit data.
#[derive(Debug, Clone, Serialize)]
pub struct AffineTrace {
    pub curve: CharacteristicCurve,
    /// Modulus estimate at the step length, as used for the speed window.
    pub omega_step: f64,
    /// Largest excess of a node increment of u over G * dt.
    pub max_increment_slack: f64,
    pub g_bound: f64,
    pub slope_window_ok: bool,
}

const BASIS_CANDIDATES: usize = 129;
const BASIS_REFINEMENTS: usize = 3;

/// Build a piecewise-affine characteristic through `point` with `k` segments
/// of time length `1/k`.
///
/// Each next node is chosen on the narrow triangle basis at the current node:
/// among candidates whose `u`-increment stays at or below `g_bound / k`
/// (plus a rounding floor), the one closest to the speed-predicted position
/// wins; if none qualifies, the increment-minimizing candidate is taken and
/// the excess is recorded as achieved slack.
pub fn build_affine_characteristic(
    field: &SolutionField,
    point: (f64, f64),
    k: usize,
    direction: Direction,
    g_bound: f64,
) -> Result<AffineTrace> {
    if k == 0 {
        return Err(Error::InvalidInput("segment count k must be positive".into()));
    }
    let (t0, x0) = point;
    if !field.domain.contains(t0, x0) {
        return Err(Error::OutOfDomain { t: t0, x: x0 });
    }
    let delta = 1.0 / k as f64;
    let sign = match direction {
        Direction::Backward => -1.0,
        Direction::Forward => 1.0,
    };
    let room = match direction {
        Direction::Backward => t0 - field.domain.t0,
        Direction::Forward => field.domain.t1 - t0,
    };
    if room < delta * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "point needs time margin {delta} on the trace side, has {room}"
        )));
    }
    let segments = k.min((room / delta + 1e-9).floor() as usize);

    let omega = field.omega(delta);
    let half_width = field.m_bound * omega * delta;

    let mut times = vec![t0];
    let mut positions = vec![x0];
    let mut truncated = false;
    let mut max_slack = 0.0f64;
    let mut slope_ok = true;

    let (dx0, dx1) = (field.domain.x0, field.domain.x1);
    let mut t = t0;
    let mut x = x0;
    for i in 0..segments {
        let lam = field.lambda_raw(t, x);
        let t_next = t0 + sign * (i + 1) as f64 * delta;
        let center = x + sign * lam * delta;
        let u_here = field.u_raw(t, x);
        let slack_floor = 1e-11 * (1.0 + u_here.abs());
        let budget = g_bound * delta + slack_floor;

        let lo = (center - half_width).max(dx0);
        let hi = (center + half_width).min(dx1);
        if lo > hi {
            if i == 0 {
                return Err(Error::WindowEmpty { t, x });
            }
            truncated = true;
            break;
        }

        let pick = |a: f64, b: f64| -> (f64, f64) {
            // Best candidate on [a, b]: eligible ones by center distance,
            // otherwise by smallest u-increment.
            let mut best_eligible: Option<(f64, f64)> = None;
            let mut best_any = (f64::INFINITY, a);
            for j in 0..BASIS_CANDIDATES {
                let xi = if BASIS_CANDIDATES == 1 {
                    a
                } else {
                    a + (b - a) * j as f64 / (BASIS_CANDIDATES - 1) as f64
                };
                let du = (field.u_raw(t_next, xi) - u_here).abs();
                if du < best_any.0 {
                    best_any = (du, xi);
                }
                if du <= budget {
                    let dist = (xi - center).abs();
                    if best_eligible.map_or(true, |(d, _)| dist < d) {
                        best_eligible = Some((dist, xi));
                    }
                }
            }
            match best_eligible {
                Some((_, xi)) => (xi, (field.u_raw(t_next, xi) - u_here).abs()),
                None => (best_any.1, best_any.0),
            }
        };

        let mut spacing = (hi - lo) / (BASIS_CANDIDATES - 1).max(1) as f64;
        let (mut xi, mut du) = pick(lo, hi);
        for _ in 0..BASIS_REFINEMENTS {
            if spacing <= 0.0 {
                break;
            }
            let a = (xi - spacing).max(lo);
            let b = (xi + spacing).min(hi);
            let got = pick(a, b);
            xi = got.0;
            du = got.1;
            spacing = (b - a) / (BASIS_CANDIDATES - 1) as f64;
        }

        max_slack = max_slack.max(du - g_bound * delta).max(0.0);
        let slope = (xi - x) / (sign * delta);
        if slope < lam - field.m_bound * omega - 1e-9 || slope > lam + field.m_bound * omega + 1e-9 {
            slope_ok = false;
        }

        t = t_next;
        x = xi;
        times.push(t);
        positions.push(x);
    }

    if sign < 0.0 {
        times.reverse();
        positions.reverse();
    }
    Ok(AffineTrace {
        curve: CharacteristicCurve { times, positions, provenance: Provenance::Affine { k }, truncated },
        omega_step: omega,
        max_increment_slack: max_slack,
        g_bound,
        slope_window_ok: slope_ok,
    })
}

/// Conservation balance on the region swept between a characteristic and its
/// `epsilon`-shift over `[sigma, tau]`.
///
/// LHS: change of the `u`-mass carried by the cross-sections minus the source
/// mass over the region.  RHS: minus the time integral of the flux excess
/// over its tangent line at the curve.  Zero (to quadrature error) for
/// distributional solutions.
pub fn region_balance(
    field: &SolutionField,
    source: &Source,
    curve: &CharacteristicCurve,
    epsilon: f64,
    sigma: f64,
    tau: f64,
    quad_n: usize,
) -> Result<f64> {
    if !(epsilon > 0.0) || !(sigma < tau) {
        return Err(Error::Precondition("need epsilon > 0 and sigma < tau".into()));
    }
    let (a, b) = curve.span();
    if sigma < a - 1e-12 || tau > b + 1e-12 {
        return Err(Error::Precondition("[sigma, tau] must lie inside the curve span".into()));
    }
    let n = quad_n.max(4) & !1usize;
    let gamma = |t: f64| curve.position_at(t).expect("span checked above");
    // The shifted curve must stay inside the rectangle.
    for i in 0..=n {
        let t = sigma + (tau - sigma) * i as f64 / n as f64;
        let xe = gamma(t) + epsilon;
        if !field.domain.contains(t, xe) {
            return Err(Error::OutOfDomain { t, x: xe });
        }
    }

    let cross_section = |t: f64| {
        let g0 = gamma(t);
        simpson(g0, g0 + epsilon, n, |x| field.u_raw(t, x))
    };
    let top = cross_section(tau);
    let bottom = cross_section(sigma);
    let source_mass = simpson(sigma, tau, n, |t| {
        let g0 = gamma(t);
        simpson(g0, g0 + epsilon, n, |x| source.eval(t, x))
    });
    let rhs = -simpson(sigma, tau, n, |t| {
        let g0 = gamma(t);
        let u_in = field.u_raw(t, g0);
        let u_out = field.u_raw(t, g0 + epsilon);
        field.flux.f(u_out) - field.flux.f(u_in) - field.flux.f_prime(u_in) * (u_out - u_in)
    });
    Ok(top - bottom - source_mass - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn constant_field_traces_straight_line() {
        let s = builtin("constant").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 0.0, 1.0, 1e-3).unwrap();
        for (&t, &x) in c.times.iter().zip(&c.positions) {
            assert!((x - 0.5 * t).abs() < 1e-8, "t={t} x={x}");
        }
        assert!(!c.truncated);
    }

    #[test]
    fn rarefaction_ray_is_exact() {
        // γ' = γ/t from (1, 0.5) has closed form γ(t) = 0.5 t.
        let s = builtin("rarefaction").unwrap();
        let c = integrate_characteristic(&s.field, 1.0, 0.5, 2.0, 1e-3).unwrap();
        for (&t, &x) in c.times.iter().zip(&c.positions) {
            assert!((x - 0.5 * t).abs() < 1e-6);
        }
    }

    #[test]
    fn sqrt_stationary_grows_exponentially() {
        // λ = |x|, so from (0, 1) the closed form is γ(t) = e^t.
        let s = builtin("sqrt-stationary").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 1.0, 0.2, 1e-3).unwrap();
        for (&t, &x) in c.times.iter().zip(&c.positions) {
            assert!((x - t.exp()).abs() < 1e-5, "t={t} x={x} vs {}", t.exp());
        }
    }

    #[test]
    fn backward_integration_matches_forward() {
        let s = builtin("rarefaction").unwrap();
        let c = integrate_characteristic(&s.field, 2.0, 1.0, 1.0, 1e-3).unwrap();
        assert!(c.times[0] < *c.times.last().unwrap());
        for (&t, &x) in c.times.iter().zip(&c.positions) {
            assert!((x - 0.5 * t).abs() < 1e-6);
        }
    }

    #[test]
    fn merging_path_freezes_at_the_speed_zero() {
        // γ' = |γ|^{2/3} from (0, -0.02) reaches 0 at t* = 3 |x0|^{1/3} < 1 and
        // must stay there; closed form before the merge:
        // γ(t) = -(|x0|^{1/3} - t/3)³.
        let s = builtin("cubic-merge").unwrap();
        let x0: f64 = -0.02;
        let c = integrate_characteristic(&s.field, 0.0, x0, 1.0, 1e-3).unwrap();
        let cbrt = x0.abs().powf(1.0 / 3.0);
        for (&t, &x) in c.times.iter().zip(&c.positions) {
            if t <= 0.6 {
                let exact = -(cbrt - t / 3.0).powi(3);
                assert!((x - exact).abs() < 1e-4, "t={t}: {x} vs {exact}");
            }
        }
        let end = *c.positions.last().unwrap();
        assert!(end.abs() < 1e-6, "path should rest at the origin, ended at {end}");
        for w in c.positions.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "path must be nondecreasing");
        }
    }

    #[test]
    fn out_of_domain_start_is_rejected() {
        let s = builtin("constant").unwrap();
        assert!(matches!(
            integrate_characteristic(&s.field, -0.5, 0.0, 1.0, 1e-3),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn exit_sets_truncation_flag() {
        let s = builtin("sqrt-stationary").unwrap();
        // From (0, 1.2): e^t * 1.2 crosses 1.25 before t = 0.5.
        let c = integrate_characteristic(&s.field, 0.0, 1.2, 0.5, 1e-3).unwrap();
        assert!(c.truncated);
        assert!(*c.positions.last().unwrap() <= 1.25 + 1e-9);
    }

    #[test]
    fn lipschitz_constant_examples() {
        let s = builtin("constant").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 0.0, 1.0, 1e-3).unwrap();
        assert!(lipschitz_constant_along(&c, &s.field) < 1e-9);

        let s = builtin("rarefaction").unwrap();
        let c = integrate_characteristic(&s.field, 1.0, 0.5, 2.0, 1e-3).unwrap();
        assert!(lipschitz_constant_along(&c, &s.field) < 1e-5);

        // u(γ(t)) = e^{t/2} along γ = e^t: the sharp constant on [0, 0.1] is
        // max of the derivative, e^{0.05}/2.
        let s = builtin("sqrt-stationary").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 1.0, 0.1, 1e-4).unwrap();
        let got = lipschitz_constant_along(&c, &s.field);
        let oracle = 0.5 * (0.05f64).exp();
        assert!((got - oracle).abs() < 1e-3, "{got} vs {oracle}");
        assert!((oracle - 0.526).abs() < 1e-3);
    }

    #[test]
    fn affine_on_constant_field_is_straight() {
        let s = builtin("constant").unwrap();
        let tr = build_affine_characteristic(&s.field, (0.9, 0.0), 16, Direction::Backward, 0.0)
            .unwrap();
        let lam = 0.5;
        for (&t, &x) in tr.curve.times.iter().zip(&tr.curve.positions) {
            assert!((x - (0.0 + lam * (t - 0.9))).abs() < 1e-9, "t={t} x={x}");
        }
        assert!(tr.max_increment_slack < 1e-9);
        assert!(tr.slope_window_ok);
    }

    #[test]
    fn affine_tracks_rarefaction_ray_and_respects_increment_bound() {
        let s = builtin("rarefaction").unwrap();
        let k = 64;
        let tr = build_affine_characteristic(&s.field, (2.0, 1.0), k, Direction::Backward, 0.0)
            .unwrap();
        // Oracle: the ODE trace at a much finer step.
        let ode = integrate_characteristic(&s.field, 2.0, 1.0, 1.0, 1e-4).unwrap();
        let mut sup = 0.0f64;
        for (&t, &x) in tr.curve.times.iter().zip(&tr.curve.positions) {
            sup = sup.max((x - ode.position_at(t).unwrap()).abs());
        }
        assert!(sup <= 2.0 / k as f64, "sup distance {sup} too large for k={k}");
        assert!(tr.max_increment_slack < 1e-8, "slack {}", tr.max_increment_slack);
        assert!(tr.slope_window_ok);
    }

    #[test]
    fn affine_error_decays_linearly_when_speed_is_lipschitz() {
        // u = x t has Lipschitz speed and a genuinely nonzero source bound, so
        // the node selection reduces to the speed-predicted polygon and the
        // distance to the ODE oracle scales like 1/k.
        let s = builtin("manufactured").unwrap();
        let ode = integrate_characteristic(&s.field, 1.0, 0.5, 0.0, 1e-4).unwrap();
        let mut errs = Vec::new();
        for k in [16usize, 32, 64, 128] {
            let tr = build_affine_characteristic(
                &s.field,
                (1.0, 0.5),
                k,
                Direction::Backward,
                s.g_bound(),
            )
            .unwrap();
            let mut sup = 0.0f64;
            for (&t, &x) in tr.curve.times.iter().zip(&tr.curve.positions) {
                sup = sup.max((x - ode.position_at(t).unwrap()).abs());
            }
            errs.push(sup);
        }
        for w in errs.windows(2) {
            let ratio = w[1] / w[0].max(1e-300);
            assert!(
                ratio <= 0.625 || w[1] <= 1e-9,
                "error should roughly halve: {errs:?}"
            );
        }
    }

    #[test]
    fn affine_merge_curve_stays_lipschitz_in_u() {
        // Backward from (1, -0.3) on the merging profile: u along the nodes
        // must be 1/3-Lipschitz (closed-form characteristics carry du/dt = 1/3).
        let s = builtin("cubic-merge").unwrap();
        let k = 128;
        let tr = build_affine_characteristic(&s.field, (1.0, -0.3), k, Direction::Backward, 1.0 / 3.0)
            .unwrap();
        let u = tr.curve.u_along(&s.field);
        let mut worst = 0.0f64;
        for w in 0..u.len() - 1 {
            let dt = tr.curve.times[w + 1] - tr.curve.times[w];
            worst = worst.max((u[w + 1] - u[w]).abs() / dt);
        }
        assert!(worst <= 1.0 / 3.0 + 0.05, "increment ratio {worst}");
        // Read forward in time the curve approaches the origin from below.
        let first = tr.curve.positions[0];
        let last = *tr.curve.positions.last().unwrap();
        assert!(first < last && last < 0.0, "positions {first} -> {last}");
    }

    #[test]
    fn empty_window_at_the_boundary_is_reported() {
        let s = builtin("constant").unwrap();
        let res = build_affine_characteristic(&s.field, (0.9, -0.999), 16, Direction::Backward, 0.0);
        assert!(matches!(res, Err(Error::WindowEmpty { .. })), "{res:?}");
    }

    #[test]
    fn dependency_triangle_nesting_and_basis_width() {
        let s = builtin("rarefaction").unwrap();
        let delta = 1.0 / 32.0;
        let tri = dependency_triangle(&s.field, (1.5, 0.6), delta).unwrap();
        assert!(tri.slope_lo >= -s.field.l_bound - 1e-12);
        assert!(tri.slope_hi <= s.field.l_bound + 1e-12);
        assert!(tri.narrow_basis_width() <= tri.wide_basis_width() + 1e-12);
        // Away from the speed cap the narrow basis width is exactly 2 M δ ω(δ).
        let expect = 2.0 * s.field.m_bound * delta * tri.omega;
        assert!((tri.narrow_basis_width() - expect).abs() < 1e-12);
    }

    #[test]
    fn region_balance_vanishes_on_solutions() {
        let s = builtin("constant").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 0.0, 1.0, 1e-3).unwrap();
        let r = region_balance(&s.field, &s.source, &c, 0.05, 0.2, 0.8, 512).unwrap();
        assert!(r.abs() < 1e-12, "constant residual {r}");

        let s = builtin("rarefaction").unwrap();
        let c = integrate_characteristic(&s.field, 1.2, 0.6, 1.8, 1e-4).unwrap();
        let r = region_balance(&s.field, &s.source, &c, 0.05, 1.2, 1.8, 1024).unwrap();
        assert!(r.abs() < 1e-5, "rarefaction residual {r}");

        let s = builtin("sqrt-stationary").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 0.5, 0.5, 1e-4).unwrap();
        let r = region_balance(&s.field, &s.source, &c, 0.05, 0.05, 0.45, 1024).unwrap();
        assert!(r.abs() < 1e-4, "sqrt residual {r}");
    }

    #[test]
    fn region_balance_shrinks_under_quadrature_refinement() {
        let s = builtin("sqrt-stationary").unwrap();
        let c = integrate_characteristic(&s.field, 0.0, 0.5, 0.5, 1e-4).unwrap();
        let coarse = region_balance(&s.field, &s.source, &c, 0.05, 0.05, 0.45, 64)
            .unwrap()
            .abs();
        let fine = region_balance(&s.field, &s.source, &c, 0.05, 0.05, 0.45, 1024)
            .unwrap()
            .abs();
        assert!(fine <= coarse + 1e-12, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn region_balance_rejects_out_of_domain_shift() {
        let s = builtin("rarefaction").unwrap();
        let c = integrate_characteristic(&s.field, 1.0, 0.9, 1.4, 1e-3).unwrap();
        // The curve stays inside but its 0.9-shift exits x <= 2.
        let r = region_balance(&s.field, &s.source, &c, 0.9, 1.0, 1.4, 128);
        assert!(matches!(r, Err(Error::OutOfDomain { .. })), "{r:?}");
    }
}
