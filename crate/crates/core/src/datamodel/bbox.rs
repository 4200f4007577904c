use std::fmt;

/// Axis-aligned integer rectangle: top-left corner plus positive extents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    /// Panics on a zero extent.
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        assert!(w > 0 && h > 0, "bounding box extents must be positive, got {w}x{h}");
        BoundingBox { x, y, w, h }
    }

    /// Box spanning the half-open pixel ranges `[x0, x1) x [y0, y1)`.
    pub fn from_corners(x0: i32, y0: i32, x1: i32, y1: i32) -> Option<Self> {
        (x1 > x0 && y1 > y0).then(|| BoundingBox { x: x0, y: y0, w: (x1 - x0) as u32, h: (y1 - y0) as u32 })
    }

    pub fn right(&self) -> i32 {
        self.x + self.w as i32
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h as i32
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        Self::from_corners(
            self.x.max(other.x),
            self.y.max(other.y),
            self.right().min(other.right()),
            self.bottom().min(other.bottom()),
        )
    }

    /// Smallest box containing both.
    pub fn enclosing(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x: self.x.min(other.x),
            y: self.y.min(other.y),
            w: (self.right().max(other.right()) - self.x.min(other.x)) as u32,
            h: (self.bottom().max(other.bottom()) - self.y.min(other.y)) as u32,
        }
    }

    /// Intersection with the image rectangle `[0, width) x [0, height)`.
    pub fn clip(&self, width: u32, height: u32) -> Option<BoundingBox> {
        self.intersection(&BoundingBox { x: 0, y: 0, w: width, h: height })
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= width as i32 && self.bottom() <= height as i32
    }

    pub fn contains_point(&self, px: i32, py: i32) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    /// `w / h`.
    pub fn aspect(&self) -> f64 {
        self.w as f64 / self.h as f64
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.w, self.h)
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let Some(inter) = a.intersection(b) else {
        return 0.0;
    };
    let inter = inter.area();
    inter as f64 / (a.area() + b.area() - inter) as f64
}
