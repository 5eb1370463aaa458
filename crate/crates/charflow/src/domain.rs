use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed space-time rectangle `[t0,t1] x [x0,x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Rect {
    pub fn new(t0: f64, t1: f64, x0: f64, x1: f64) -> Result<Self> {
        if !(t1 > t0 && x1 > x0) || !(t0.is_finite() && t1.is_finite() && x0.is_finite() && x1.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle t=[{t0},{t1}] x=[{x0},{x1}]"
            )));
        }
        Ok(Rect { t0, t1, x0, x1 })
    }

    pub fn t_span(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn x_span(&self) -> f64 {
        self.x1 - self.x0
    }

    /// Membership with a small relative slack so boundary points survive rounding.
    pub fn contains(&self, t: f64, x: f64) -> bool {
        let et = 1e-12 * self.t_span().max(1.0);
        let ex = 1e-12 * self.x_span().max(1.0);
        t >= self.t0 - et && t <= self.t1 + et && x >= self.x0 - ex && x <= self.x1 + ex
    }

    pub fn contains_x(&self, x: f64) -> bool {
        let ex = 1e-12 * self.x_span().max(1.0);
        x >= self.x0 - ex && x <= self.x1 + ex
    }

    pub fn clamp_t(&self, t: f64) -> f64 {
        t.clamp(self.t0, self.t1)
    }

    pub fn clamp_x(&self, x: f64) -> f64 {
        x.clamp(self.x0, self.x1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_has_boundary_slack() {
        let r = Rect::new(0.0, 1.0, -1.0, 1.0).unwrap();
        assert!(r.contains(0.0, -1.0));
        assert!(r.contains(1.0 + 1e-13, 1.0));
        assert!(!r.contains(1.1, 0.0));
        assert!(!r.contains(0.5, -1.01));
    }

    #[test]
    fn degenerate_rectangles_rejected() {
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 1.0, 2.0, 1.0).is_err());
    }
}
