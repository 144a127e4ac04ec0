//! Frame/world calibration and bounding-box arithmetic.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-12;

/// A point in frame coordinates (pixels, y grows downward).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub x: f64,
    pub y: f64,
}

/// A point on the world ground plane (meters).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl FramePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &FramePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl WorldPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box stored as center and extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: 0.5 * (x0 + x1),
            cy: 0.5 * (y0 + y1),
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// Tight hull of a point set. Degenerate extents are widened to `min_extent`.
    pub fn hull<'a>(points: impl IntoIterator<Item = &'a FramePoint>, min_extent: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let mut b = Self::from_corners(x0, y0, x1, y1);
        b.w = b.w.max(min_extent);
        b.h = b.h.max(min_extent);
        Some(b)
    }

    pub fn is_valid(&self) -> bool {
        self.cx.is_finite() && self.cy.is_finite() && self.w.is_finite() && self.h.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    pub fn left(&self) -> f64 {
        self.cx - 0.5 * self.w
    }

    pub fn right(&self) -> f64 {
        self.cx + 0.5 * self.w
    }

    pub fn top(&self) -> f64 {
        self.cy - 0.5 * self.h
    }

    pub fn bottom(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    pub fn bottom_center(&self) -> FramePoint {
        FramePoint::new(self.cx, self.bottom())
    }

    pub fn center(&self) -> FramePoint {
        FramePoint::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: &FramePoint) -> bool {
        p.x >= self.left() && p.x <= self.right() && p.y >= self.top() && p.y <= self.bottom()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Intersection over union. Touching boxes have zero overlap.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Center distance divided by the ground-truth diagonal.
pub fn normalized_distance(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    pred.center().distance(&gt.center()) / gt.w.hypot(gt.h)
}

/// Symmetric size-ratio distance between two box shapes; zero iff equal.
pub fn shape_distance(w1: f64, h1: f64, w2: f64, h2: f64) -> f64 {
    (w1 / w2).max(w2 / w1) + (h1 / h2).max(h2 / h1) - 2.0
}

type Mat3 = [[f64; 3]; 3];

/// Projective map from frame pixels to world meters, with its inverse.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: Mat3,
    pub m_inv: Mat3,
}

impl fmt::Debug for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Homography").field("m", &self.m).finish()
    }
}

/// One frame/world calibration pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub frame: FramePoint,
    pub world: WorldPoint,
}

impl Homography {
    pub fn identity() -> Self {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self { m: id, m_inv: id }
    }

    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let m = normalize(m);
        let m_inv = normalize(invert3(&m).ok_or_else(|| Error::DegenerateCorrespondence("singular matrix".into()))?);
        Ok(Self { m, m_inv })
    }

    /// Fits the transform through exactly four correspondences.
    pub fn fit(pairs: &[Correspondence; 4]) -> Result<Self> {
        let frame: Vec<_> = pairs.iter().map(|c| (c.frame.x, c.frame.y)).collect();
        let world: Vec<_> = pairs.iter().map(|c| (c.world.x, c.world.y)).collect();
        if let Some(t) = collinear_triple(&frame) {
            return Err(Error::DegenerateCorrespondence(format!("frame points {t:?} are collinear")));
        }
        if let Some(t) = collinear_triple(&world) {
            return Err(Error::DegenerateCorrespondence(format!("world points {t:?} are collinear")));
        }

        // h33 = 1: two rows per correspondence.
        let mut a = [[0.0; 9]; 8];
        for (i, c) in pairs.iter().enumerate() {
            let (x, y) = (c.frame.x, c.frame.y);
            let (u, v) = (c.world.x, c.world.y);
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        let h = solve8(a)?;
        Self::from_matrix([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
    }

    pub fn frame_to_world(&self, p: FramePoint) -> Result<WorldPoint> {
        let (x, y) = apply(&self.m, p.x, p.y)?;
        Ok(WorldPoint::new(x, y))
    }

    pub fn world_to_frame(&self, p: WorldPoint) -> Result<FramePoint> {
        let (x, y) = apply(&self.m_inv, p.x, p.y)?;
        Ok(FramePoint::new(x, y))
    }

    /// Frame position of `p` when it lies inside a `size` frame and on the
    /// same side of the horizon as the frame center; `None` otherwise.
    pub fn visible(&self, p: WorldPoint, size: [u32; 2]) -> Option<FramePoint> {
        let w_of = |x: f64, y: f64| self.m_inv[2][0] * x + self.m_inv[2][1] * y + self.m_inv[2][2];
        let center = self.frame_to_world(FramePoint::new(size[0] as f64 / 2.0, size[1] as f64 / 2.0)).ok()?;
        if w_of(p.x, p.y) * w_of(center.x, center.y) <= 0.0 {
            return None;
        }
        let f = self.world_to_frame(p).ok()?;
        ((0.0..=size[0] as f64).contains(&f.x) && (0.0..=size[1] as f64).contains(&f.y)).then_some(f)
    }

    /// World position of a box, taken at its bottom-center pixel.
    pub fn bottom_center_world(&self, b: &BoundingBox) -> Result<WorldPoint> {
        self.frame_to_world(b.bottom_center())
    }

    /// Reads a calibration file: four lines of `fx fy wx wy`.
    pub fn load_calibration(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let pairs = parse_calibration(&text).map_err(|msg| Error::Parse {
            path: path.display().to_string(),
            msg,
        })?;
        Self::fit(&pairs)
    }
}

pub fn parse_calibration(text: &str) -> std::result::Result<[Correspondence; 4], String> {
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if rows.len() != 4 {
        return Err(format!("expected 4 correspondence lines, found {}", rows.len()));
    }
    let mut out = [Correspondence {
        frame: FramePoint::default(),
        world: WorldPoint::default(),
    }; 4];
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() != 4 || vals.iter().any(|v| !v.is_finite()) {
            return Err(format!("line {}: expected 4 finite numbers", i + 1));
        }
        out[i] = Correspondence {
            frame: FramePoint::new(vals[0], vals[1]),
            world: WorldPoint::new(vals[2], vals[3]),
        };
    }
    Ok(out)
}

pub fn format_calibration(pairs: &[Correspondence; 4]) -> String {
    pairs
        .iter()
        .map(|c| format!("{} {} {} {}\n", c.frame.x, c.frame.y, c.world.x, c.world.y))
        .collect()
}

fn apply(m: &Mat3, x: f64, y: f64) -> Result<(f64, f64)> {
    let w = m[2][0] * x + m[2][1] * y + m[2][2];
    if w.abs() < W_EPS {
        return Err(Error::PointAtInfinity(w));
    }
    let u = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
    let v = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
    Ok((u, v))
}

fn normalize(mut m: Mat3) -> Mat3 {
    let s = m[2][2];
    if s.abs() > W_EPS {
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
    }
    m
}

fn invert3(m: &Mat3) -> Option<Mat3> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if det.abs() < PIVOT_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        [
            c00 * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            c01 * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            c02 * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ])
}

/// Gaussian elimination with partial pivoting on an 8x9 augmented system.
fn solve8(mut a: [[f64; 9]; 8]) -> Result<[f64; 8]> {
    for col in 0..8 {
        let piv = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[piv][col].abs() < PIVOT_EPS {
            return Err(Error::DegenerateCorrespondence(format!("pivot {col} below {PIVOT_EPS:e}")));
        }
        a.swap(col, piv);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..9 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let mut s = a[row][8];
        for k in row + 1..8 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

fn collinear_triple(pts: &[(f64, f64)]) -> Option<(usize, usize, usize)> {
    let scale = pts
        .iter()
        .flat_map(|&(x, y)| [x.abs(), y.abs()])
        .fold(1.0_f64, f64::max);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if cross.abs() <= 1e-12 * scale * scale {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr(fx: f64, fy: f64, wx: f64, wy: f64) -> Correspondence {
        Correspondence {
            frame: FramePoint::new(fx, fy),
            world: WorldPoint::new(wx, wy),
        }
    }

    fn unit_square_to(dst: [(f64, f64); 4]) -> [Correspondence; 4] {
        let src = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        std::array::from_fn(|i| corr(src[i].0, src[i].1, dst[i].0, dst[i].1))
    }

    const TRAPEZOID: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (0.8, 1.0), (0.2, 1.0)];

    /// Independent reference: DLT solved by nalgebra's LU decomposition.
    fn nalgebra_fit(pairs: &[Correspondence; 4]) -> nalgebra::Matrix3<f64> {
        let mut a = nalgebra::SMatrix::<f64, 8, 8>::zeros();
        let mut b = nalgebra::SVector::<f64, 8>::zeros();
        for (i, c) in pairs.iter().enumerate() {
            let (x, y, u, v) = (c.frame.x, c.frame.y, c.world.x, c.world.y);
            let r0 = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y];
            let r1 = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y];
            for k in 0..8 {
                a[(2 * i, k)] = r0[k];
                a[(2 * i + 1, k)] = r1[k];
            }
            b[2 * i] = u;
            b[2 * i + 1] = v;
        }
        let h = a.lu().solve(&b).unwrap();
        nalgebra::Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0)
    }

    fn nalgebra_apply(m: &nalgebra::Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
        let v = m * nalgebra::Vector3::new(x, y, 1.0);
        (v[0] / v[2], v[1] / v[2])
    }

    #[test]
    fn identity_fit() {
        let h = Homography::fit(&unit_square_to([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        for (i, row) in h.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "m[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn scaled_square_fit() {
        let h = Homography::fit(&unit_square_to([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])).unwrap();
        let want = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.m[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trapezoid_fit_matches_reference_solver() {
        let pairs = unit_square_to(TRAPEZOID);
        let h = Homography::fit(&pairs).unwrap();
        let reference = nalgebra_fit(&pairs);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.m[i][j] - reference[(i, j)]).abs() < 1e-9);
            }
        }
        for c in &pairs {
            let w = h.frame_to_world(c.frame).unwrap();
            assert!(w.distance(&c.world) < 1e-6);
        }
        // The far edge midpoint stays on the symmetry axis.
        let mid = h.frame_to_world(FramePoint::new(0.5, 1.0)).unwrap();
        let (rx, ry) = nalgebra_apply(&reference, 0.5, 1.0);
        assert!((mid.x - 0.5).abs() < 1e-9 && (mid.x - rx).abs() < 1e-9 && (mid.y - ry).abs() < 1e-9);
    }

    #[test]
    fn collinear_points_rejected() {
        let pairs = [corr(0.0, 0.0, 0.0, 0.0), corr(1.0, 1.0, 1.0, 0.0), corr(2.0, 2.0, 1.0, 1.0), corr(0.0, 1.0, 0.0, 1.0)];
        assert!(matches!(Homography::fit(&pairs), Err(Error::DegenerateCorrespondence(_))));
    }

    #[test]
    fn point_transforms() {
        let id = Homography::identity();
        assert_eq!(id.frame_to_world(FramePoint::new(5.0, 7.0)).unwrap(), WorldPoint::new(5.0, 7.0));
        let s = Homography::from_matrix([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(s.frame_to_world(FramePoint::new(3.0, 4.0)).unwrap(), WorldPoint::new(6.0, 8.0));
        let b = BoundingBox::new(10.0, 10.0, 4.0, 6.0);
        assert_eq!(id.bottom_center_world(&b).unwrap(), WorldPoint::new(10.0, 13.0));
        assert_eq!(s.bottom_center_world(&b).unwrap(), WorldPoint::new(20.0, 26.0));
    }

    #[test]
    fn bottom_center_on_trapezoid() {
        let pairs = unit_square_to(TRAPEZOID);
        let h = Homography::fit(&pairs).unwrap();
        let reference = nalgebra_fit(&pairs);
        let b = BoundingBox::new(0.5, 0.9, 0.2, 0.2);
        let got = h.bottom_center_world(&b).unwrap();
        let (rx, ry) = nalgebra_apply(&reference, 0.5, 1.0);
        assert!((got.x - rx).abs() < 1e-6 && (got.y - ry).abs() < 1e-6);
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(h.frame_to_world(FramePoint::new(-1.0, 3.0)), Err(Error::PointAtInfinity(_))));
    }

    #[test]
    fn iou_examples() {
        let a = BoundingBox::from_corners(0.0, 0.0, 2.0, 2.0);
        let b = BoundingBox::from_corners(1.0, 1.0, 3.0, 3.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BoundingBox::from_corners(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &BoundingBox::from_corners(2.0, 0.0, 4.0, 2.0)), 0.0);
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn nd_and_shape_examples() {
        let gt = BoundingBox::new(0.0, 0.0, 3.0, 4.0);
        assert_eq!(normalized_distance(&gt, &gt), 0.0);
        assert!((normalized_distance(&BoundingBox::new(3.0, 4.0, 1.0, 1.0), &gt) - 1.0).abs() < 1e-12);
        assert!((normalized_distance(&BoundingBox::new(0.0, 2.5, 1.0, 1.0), &gt) - 0.5).abs() < 1e-12);
        assert_eq!(shape_distance(2.0, 3.0, 2.0, 3.0), 0.0);
        assert!((shape_distance(2.0, 2.0, 4.0, 2.0) - 1.0).abs() < 1e-12);
        assert!((shape_distance(1.0, 1.0, 2.0, 3.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_parsing() {
        let text = "0 0 0 0\n1 0 1 0\n1 1 0.8 1\n0 1 0.2 1\n";
        let pairs = parse_calibration(text).unwrap();
        assert_eq!(parse_calibration(&format_calibration(&pairs)).unwrap(), pairs);
        assert!(parse_calibration("0 0 0 0\n").is_err());
        assert!(parse_calibration("0 0 0 x\n1 0 1 0\n1 1 1 1\n0 1 0 1").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64).prop_map(|(cx, cy, w, h)| BoundingBox::new(cx, cy, w, h))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert!((ab - iou(&b, &a)).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn shape_distance_properties(w1 in 0.1..50.0f64, h1 in 0.1..50.0f64, w2 in 0.1..50.0f64, h2 in 0.1..50.0f64) {
            let d = shape_distance(w1, h1, w2, h2);
            prop_assert!(d >= -1e-12);
            prop_assert!((d - shape_distance(w2, h2, w1, h1)).abs() < 1e-12);
            prop_assert!(shape_distance(w1, h1, w1, h1) == 0.0);
            if (w1 - w2).abs() > 1e-6 || (h1 - h2).abs() > 1e-6 {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn homography_round_trip(
            dx in prop::array::uniform4((-0.15..0.15f64, -0.15..0.15f64)),
            px in 0.05..0.95f64, py in 0.05..0.95f64,
        ) {
            let base = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let dst: [(f64, f64); 4] = std::array::from_fn(|i| (base[i].0 * 10.0 + dx[i].0, base[i].1 * 10.0 + dx[i].1));
            let pairs = unit_square_to(dst);
            let h = Homography::fit(&pairs).unwrap();
            for c in &pairs {
                prop_assert!(h.frame_to_world(c.frame).unwrap().distance(&c.world) < 1e-6);
            }
            let p = FramePoint::new(px, py);
            let back = h.world_to_frame(h.frame_to_world(p).unwrap()).unwrap();
            prop_assert!(back.distance(&p) < 1e-6);
            let prod = mul3(&h.m, &h.m_inv);
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { prod[2][2] } else { 0.0 };
                    prop_assert!((prod[i][j] - want).abs() < 1e-9);
                }
            }
        }
    }

    fn mul3(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }
}
