use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::model::cross;
use crate::error::{Error, Result};

/// Difficulty category of an object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Easy,
    Moderate,
    Hard,
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "moderate" => Ok(Self::Moderate),
            "hard" => Ok(Self::Hard),
            other => Err(Error::Config(format!("unknown object category `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShapeKind {
    Disc { radius: f64 },
    /// Counter-clockwise vertices, centroid at the origin.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A rigid planar object, described in its own frame with the center of
/// mass at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    name: String,
    kind: ShapeKind,
    category: Category,
    /// Per-vertex flag: interior angle exceeds pi.
    #[serde(skip)]
    reflex: Vec<bool>,
}

/// Closest-boundary query result, in the object frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceQuery {
    /// Negative inside the object.
    pub signed_distance: f64,
    pub closest: Vector2<f64>,
    /// Unit outward surface normal associated with the closest point.
    pub outward: Vector2<f64>,
}

impl ObjectShape {
    pub fn disc(name: &str, radius: f64, category: Category) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidShape(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            kind: ShapeKind::Disc { radius },
            category,
            reflex: Vec::new(),
        })
    }

    /// Builds a polygon from vertices in either winding. The vertices are
    /// re-centred so the area centroid sits at the origin.
    pub fn polygon(name: &str, vertices: &[[f64; 2]], category: Category) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidShape("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("non-finite vertex".into()));
        }
        let mut pts: Vec<Vector2<f64>> =
            vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect();
        let area = signed_area(&pts);
        if area.abs() < 1e-12 {
            return Err(Error::InvalidShape("polygon has zero area".into()));
        }
        if area < 0.0 {
            pts.reverse();
        }
        let n = pts.len();
        for i in 0..n {
            if (pts[(i + 1) % n] - pts[i]).norm() < 1e-12 {
                return Err(Error::InvalidShape(format!("repeated vertex at {i}")));
            }
        }
        if self_intersects(&pts) {
            return Err(Error::InvalidShape("polygon edges intersect".into()));
        }
        let c = centroid(&pts);
        let pts: Vec<Vector2<f64>> = pts.into_iter().map(|p| p - c).collect();
        let reflex = (0..n)
            .map(|i| {
                let prev = pts[(i + n - 1) % n];
                let next = pts[(i + 1) % n];
                cross(&(pts[i] - prev), &(next - pts[i])) < 0.0
            })
            .collect();
        Ok(Self {
            name: name.to_owned(),
            kind: ShapeKind::Polygon {
                vertices: pts.iter().map(|p| [p.x, p.y]).collect(),
            },
            category,
            reflex,
        })
    }

    /// Looks up one of the reference objects: `disc`, `square`,
    /// `rectangle` or `l_polygon`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "disc" => Self::disc("disc", 0.035, Category::Easy),
            "square" => Self::polygon(
                "square",
                &[[-0.03, -0.03], [0.03, -0.03], [0.03, 0.03], [-0.03, 0.03]],
                Category::Easy,
            ),
            "rectangle" => Self::polygon(
                "rectangle",
                &[[-0.04, -0.016], [0.04, -0.016], [0.04, 0.016], [-0.04, 0.016]],
                Category::Moderate,
            ),
            "l_polygon" => Self::polygon(
                "l_polygon",
                &[
                    [0.0, 0.0],
                    [0.065, 0.0],
                    [0.065, 0.028],
                    [0.028, 0.028],
                    [0.028, 0.065],
                    [0.0, 0.065],
                ],
                Category::Hard,
            ),
            other => Err(Error::Config(format!("unknown object preset `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ShapeKind {
        &self.kind
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn is_convex(&self) -> bool {
        !self.reflex_flags().iter().any(|&r| r)
    }

    fn reflex_flags(&self) -> std::borrow::Cow<'_, [bool]> {
        match &self.kind {
            ShapeKind::Disc { .. } => std::borrow::Cow::Borrowed(&[]),
            ShapeKind::Polygon { vertices } if self.reflex.len() != vertices.len() => {
                // Deserialized shapes skip the cache.
                let pts: Vec<Vector2<f64>> =
                    vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect();
                let n = pts.len();
                std::borrow::Cow::Owned(
                    (0..n)
                        .map(|i| {
                            let prev = pts[(i + n - 1) % n];
                            let next = pts[(i + 1) % n];
                            cross(&(pts[i] - prev), &(next - pts[i])) < 0.0
                        })
                        .collect(),
                )
            }
            ShapeKind::Polygon { .. } => std::borrow::Cow::Borrowed(&self.reflex),
        }
    }

    /// Largest distance from the centroid to the boundary.
    pub fn bounding_radius(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disc { radius } => *radius,
            ShapeKind::Polygon { vertices } => vertices
                .iter()
                .map(|v| v[0].hypot(v[1]))
                .fold(0.0, f64::max),
        }
    }

    pub fn area(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disc { radius } => std::f64::consts::PI * radius * radius,
            ShapeKind::Polygon { vertices } => signed_area(&to_points(vertices)),
        }
    }

    /// Rotational inertia about the centroid for uniform density.
    pub fn inertia(&self, mass: f64) -> f64 {
        match &self.kind {
            ShapeKind::Disc { radius } => 0.5 * mass * radius * radius,
            ShapeKind::Polygon { vertices } => {
                let pts = to_points(vertices);
                let n = pts.len();
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    let a = pts[i];
                    let b = pts[(i + 1) % n];
                    let c = cross(&a, &b);
                    num += c * (a.dot(&a) + a.dot(&b) + b.dot(&b));
                    den += c;
                }
                mass * num / (6.0 * den)
            }
        }
    }

    /// Whether an object-frame point lies inside the shape.
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        self.query(p).signed_distance < 0.0
    }

    /// Closest boundary point, signed distance and outward normal for a
    /// point in the object frame.
    pub fn query(&self, p: &Vector2<f64>) -> SurfaceQuery {
        match &self.kind {
            ShapeKind::Disc { radius } => {
                let r = p.norm();
                let outward = if r > 0.0 { p / r } else { Vector2::new(1.0, 0.0) };
                SurfaceQuery {
                    signed_distance: r - radius,
                    closest: outward * *radius,
                    outward,
                }
            }
            ShapeKind::Polygon { vertices } => self.query_polygon(vertices, p),
        }
    }

    fn query_polygon(&self, vertices: &[[f64; 2]], p: &Vector2<f64>) -> SurfaceQuery {
        let n = vertices.len();
        let vtx = |i: usize| Vector2::new(vertices[i % n][0], vertices[i % n][1]);
        let mut best_d2 = f64::INFINITY;
        let mut best = Vector2::zeros();
        // Closest feature: edge index with parameter in (0, 1), or a vertex.
        let mut best_edge = 0usize;
        let mut best_vertex: Option<usize> = None;
        let mut inside = false;
        for i in 0..n {
            let a = vtx(i);
            let b = vtx(i + 1);
            let e = b - a;
            let len2 = e.norm_squared();
            let t = ((p - a).dot(&e) / len2).clamp(0.0, 1.0);
            let c = a + e * t;
            let d2 = (p - c).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
                best_edge = i;
                best_vertex = if t <= 0.0 {
                    Some(i)
                } else if t >= 1.0 {
                    Some((i + 1) % n)
                } else {
                    None
                };
            }
            // crossing number
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        let dist = best_d2.sqrt();
        let edge_normal = |i: usize| {
            let e = vtx(i + 1) - vtx(i);
            Vector2::new(e.y, -e.x).normalize()
        };
        let reflex = self.reflex_flags();
        let outward = match best_vertex {
            Some(v) if reflex[v] => {
                let bis = edge_normal(v + n - 1) + edge_normal(v);
                bis.normalize()
            }
            _ if dist > 1e-12 => {
                let dir = (p - best) / dist;
                if inside {
                    -dir
                } else {
                    dir
                }
            }
            Some(v) => (edge_normal(v + n - 1) + edge_normal(v)).normalize(),
            None => edge_normal(best_edge),
        };
        SurfaceQuery {
            signed_distance: if inside { -dist } else { dist },
            closest: best,
            outward,
        }
    }
}

fn to_points(vertices: &[[f64; 2]]) -> Vec<Vector2<f64>> {
    vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect()
}

fn signed_area(pts: &[Vector2<f64>]) -> f64 {
    let n = pts.len();
    0.5 * (0..n).map(|i| cross(&pts[i], &pts[(i + 1) % n])).sum::<f64>()
}

fn centroid(pts: &[Vector2<f64>]) -> Vector2<f64> {
    let n = pts.len();
    let a = signed_area(pts);
    let mut c = Vector2::zeros();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        c += (p + q) * cross(&p, &q);
    }
    c / (6.0 * a)
}

fn segments_intersect(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let o1 = cross(&(b - a), &(c - a));
    let o2 = cross(&(b - a), &(d - a));
    let o3 = cross(&(d - c), &(a - c));
    let o4 = cross(&(d - c), &(b - c));
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

fn self_intersects(pts: &[Vector2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_are_valid() {
        for name in ["disc", "square", "rectangle", "l_polygon"] {
            let s = ObjectShape::preset(name).unwrap();
            assert!(s.area() > 0.0);
            assert!(s.inertia(0.1) > 0.0);
        }
        assert!(ObjectShape::preset("square").unwrap().is_convex());
        assert!(!ObjectShape::preset("l_polygon").unwrap().is_convex());
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(ObjectShape::disc("d", 0.0, Category::Easy).is_err());
        assert!(ObjectShape::polygon("p", &[[0.0, 0.0], [1.0, 0.0]], Category::Easy).is_err());
        assert!(ObjectShape::polygon(
            "line",
            &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            Category::Easy
        )
        .is_err());
        // bow-tie
        assert!(ObjectShape::polygon(
            "bowtie",
            &[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
            Category::Easy
        )
        .is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let s = ObjectShape::polygon(
            "cw",
            &[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            Category::Easy,
        )
        .unwrap();
        assert_relative_eq!(s.area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn square_inertia_matches_closed_form() {
        let s = ObjectShape::preset("square").unwrap();
        let side: f64 = 0.06;
        assert_relative_eq!(s.inertia(0.1), 0.1 * side * side / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn polygon_query_edge_and_vertex() {
        let s = ObjectShape::preset("square").unwrap();
        let q = s.query(&Vector2::new(0.05, 0.0));
        assert_relative_eq!(q.signed_distance, 0.02, epsilon = 1e-15);
        assert_relative_eq!(q.outward, Vector2::new(1.0, 0.0), epsilon = 1e-15);
        let q = s.query(&Vector2::new(0.0, 0.01));
        assert_relative_eq!(q.signed_distance, -0.02, epsilon = 1e-15);
        assert_relative_eq!(q.outward, Vector2::new(0.0, 1.0), epsilon = 1e-15);
        let q = s.query(&Vector2::new(0.04, 0.04));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(q.outward, Vector2::new(h, h), epsilon = 1e-12);
    }

    #[test]
    fn reflex_vertex_uses_bisector() {
        let s = ObjectShape::preset("l_polygon").unwrap();
        let ShapeKind::Polygon { vertices } = s.kind() else {
            unreachable!()
        };
        // The inner corner is the only reflex vertex.
        let idx = s.reflex_flags().iter().position(|&r| r).unwrap();
        let v = Vector2::new(vertices[idx][0], vertices[idx][1]);
        let q = s.query(&v);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(q.signed_distance.abs(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(q.outward, Vector2::new(h, h), epsilon = 1e-12);
    }
}
