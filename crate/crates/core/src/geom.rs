//! Minimal 2D primitives shared by the model and the simulator.

use serde::{Deserialize, Serialize};

/// 2D point / vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// Unit vector; zero-length input maps to the +x axis.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            Self::new(1.0, 0.0)
        }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Axis-aligned rectangle, `min` inclusive, `max` exclusive for containment
/// purposes (degenerate rectangles are rejected by the scenario validator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn centered(center: Vec2, dims: Vec2) -> Self {
        let half = dims.scale(0.5);
        Self::new(center - half, center + half)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn dims(&self) -> Vec2 {
        self.max - self.min
    }

    pub fn area(&self) -> f64 {
        let d = self.dims();
        d.x * d.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && self.max.x >= other.max.x
            && self.max.y >= other.max.y
    }

    /// Open-interior overlap test: touching edges do not count.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.overlap_depth(other) > 0.0
    }

    /// Overlap beyond `eps` on both axes. Rectangles reconstructed from a
    /// center/extent pair can disagree with their design coordinates by an
    /// ulp, so disjointness checks need a tolerance.
    pub fn intersects_eps(&self, other: &Rect, eps: f64) -> bool {
        self.overlap_depth(other) > eps
    }

    fn overlap_depth(&self, other: &Rect) -> f64 {
        let w = self.max.x.min(other.max.x) - self.min.x.max(other.min.x);
        let h = self.max.y.min(other.max.y) - self.min.y.max(other.min.y);
        w.min(h)
    }

    pub fn contains_rect_eps(&self, other: &Rect, eps: f64) -> bool {
        self.min.x <= other.min.x + eps
            && self.min.y <= other.min.y + eps
            && self.max.x >= other.max.x - eps
            && self.max.y >= other.max.y - eps
    }

    /// First intersection of the segment `a -> b` with the rectangle
    /// boundary, for `a` outside and `b` inside. Returns `b` if `a` is
    /// already inside.
    pub fn entry_point(&self, a: Vec2, b: Vec2) -> Vec2 {
        if self.contains(a) {
            return b;
        }
        let d = b - a;
        let mut t_enter: f64 = 0.0;
        for (a0, d0, lo, hi) in [
            (a.x, d.x, self.min.x, self.max.x),
            (a.y, d.y, self.min.y, self.max.y),
        ] {
            if d0.abs() < f64::EPSILON {
                continue;
            }
            let (t0, t1) = ((lo - a0) / d0, (hi - a0) / d0);
            t_enter = t_enter.max(t0.min(t1));
        }
        a + d.scale(t_enter.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_contains_and_overlap() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0));
        assert!(r.contains(Vec2::new(1.0, 0.5)));
        assert!(!r.contains(Vec2::new(2.1, 0.5)));
        let touching = Rect::new(Vec2::new(2.0, 0.0), Vec2::new(3.0, 1.0));
        assert!(!r.intersects(&touching));
        let overlapping = Rect::new(Vec2::new(1.9, 0.0), Vec2::new(3.0, 1.0));
        assert!(r.intersects(&overlapping));
    }

    #[test]
    fn segment_entry() {
        let r = Rect::new(Vec2::new(1.0, 1.0), Vec2::new(3.0, 3.0));
        let e = r.entry_point(Vec2::new(0.0, 2.0), Vec2::new(2.0, 2.0));
        assert!((e.x - 1.0).abs() < 1e-12 && (e.y - 2.0).abs() < 1e-12);
    }
}
