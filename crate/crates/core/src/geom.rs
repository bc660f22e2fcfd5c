use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixels. `x`/`y` are signed so that boxes rebased onto
/// a crop origin keep their exact offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    /// Midpoint, rounded toward negative infinity.
    pub fn center(&self) -> (i32, i32) {
        ((self.x as i64 + self.w as i64 / 2) as i32, (self.y as i64 + self.h as i64 / 2) as i32)
    }

    pub fn contains(&self, px: i64, py: i64) -> bool {
        px >= self.x as i64 && px < self.right() && py >= self.y as i64 && py < self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        (self.x as i64) < other.right()
            && (other.x as i64) < self.right()
            && (self.y as i64) < other.bottom()
            && (other.y as i64) < self.bottom()
    }

    /// True when the box lies inside `[0, w) x [0, h)`.
    pub fn within(&self, w: u32, h: u32) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= w as i64 && self.bottom() <= h as i64
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Rect {
        Rect { x: self.x - dx, y: self.y - dy, ..*self }
    }
}
