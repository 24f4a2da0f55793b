use std::collections::HashMap;

use super::VolumetricError;
use crate::geometry::{TriangleMesh, Vec3};

pub const DEFAULT_POINT_BUDGET: usize = 1_000_000;

/// Surface samples of the manipulated part, in its local frame. Each point
/// carries the unit normal pointing into the part.
#[derive(Debug, Clone, PartialEq)]
pub struct PointShell {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    spacing: f64,
}

impl PointShell {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>, spacing: f64) -> Result<Self, VolumetricError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(VolumetricError::InvalidSpacing(spacing));
        }
        if points.len() != normals.len() || normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-9) {
            return Err(VolumetricError::InvalidVoxMap(
                "pointshell needs one unit normal per point".into(),
            ));
        }
        Ok(Self {
            points,
            normals,
            spacing,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PointShellBuilder {
    pub spacing: f64,
    pub point_budget: usize,
}

impl PointShellBuilder {
    pub fn new(spacing: f64) -> Self {
        Self {
            spacing,
            point_budget: DEFAULT_POINT_BUDGET,
        }
    }

    pub fn with_point_budget(mut self, point_budget: usize) -> Self {
        self.point_budget = point_budget;
        self
    }

    /// Samples every triangle on a barycentric lattice with steps of at most
    /// `spacing` along its two shorter edges (vertices included), then drops
    /// samples closer than `spacing / 4` to an earlier one.
    pub fn build(&self, mesh: &TriangleMesh) -> Result<PointShell, VolumetricError> {
        let spacing = self.spacing;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(VolumetricError::InvalidSpacing(spacing));
        }
        if mesh.is_empty() {
            return Err(crate::geometry::GeometryError::EmptyMesh.into());
        }
        let min_dist = spacing / 4.0;
        let mut dedup = Dedup::new(min_dist);
        let mut points = Vec::new();
        let mut normals = Vec::new();

        for tri in mesh.iter_triangles() {
            // Lattice from the corner opposite the longest edge, so right
            // triangles get an axis-aligned grid along their legs.
            let longest = (0..3)
                .max_by(|&x, &y| {
                    let ex = (tri[(x + 2) % 3] - tri[(x + 1) % 3]).norm_squared();
                    let ey = (tri[(y + 2) % 3] - tri[(y + 1) % 3]).norm_squared();
                    ex.total_cmp(&ey).then(y.cmp(&x))
                })
                .unwrap_or(0);
            let a = tri[longest];
            let b = tri[(longest + 1) % 3];
            let c = tri[(longest + 2) % 3];
            let ab = b - a;
            let ac = c - a;
            let cross = ab.cross(&ac);
            let scale = ab.norm().max(ac.norm());
            if cross.norm() <= 1e-12 * scale * scale {
                continue;
            }
            let inward = -cross.normalize();
            let n1 = (ab.norm() / spacing).ceil().max(1.0) as usize;
            let n2 = (ac.norm() / spacing).ceil().max(1.0) as usize;
            for i in 0..=n1 {
                let u = i as f64 / n1 as f64;
                // Largest j with i/n1 + j/n2 <= 1.
                let jmax = (n2 * (n1 - i)) / n1;
                for j in 0..=jmax {
                    let v = j as f64 / n2 as f64;
                    let p = a + ab * u + ac * v;
                    self.push(p, inward, &mut dedup, &mut points, &mut normals)?;
                }
            }
        }
        PointShell::new(points, normals, spacing)
    }

    fn push(
        &self,
        p: Vec3,
        normal: Vec3,
        dedup: &mut Dedup,
        points: &mut Vec<Vec3>,
        normals: &mut Vec<Vec3>,
    ) -> Result<(), VolumetricError> {
        if dedup.insert(p, points) {
            if points.len() > self.point_budget {
                return Err(VolumetricError::PointBudgetExceeded {
                    budget: self.point_budget,
                });
            }
            normals.push(normal);
        }
        Ok(())
    }
}

pub fn build_pointshell(mesh: &TriangleMesh, spacing: f64) -> Result<PointShell, VolumetricError> {
    PointShellBuilder::new(spacing).build(mesh)
}

/// Hash grid rejecting points within `radius` of an accepted one.
struct Dedup {
    radius: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl Dedup {
    fn new(radius: f64) -> Self {
        Self {
            radius,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.radius).floor() as i64,
            (p.y / self.radius).floor() as i64,
            (p.z / self.radius).floor() as i64,
        ]
    }

    /// Pushes `p` onto `points` unless it duplicates an earlier point.
    fn insert(&mut self, p: Vec3, points: &mut Vec<Vec3>) -> bool {
        let key = self.key(&p);
        let r2 = self.radius * self.radius;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let neighbor = [key[0] + dx, key[1] + dy, key[2] + dz];
                    if let Some(bucket) = self.buckets.get(&neighbor) {
                        if bucket.iter().any(|&i| (points[i as usize] - p).norm_squared() < r2) {
                            return false;
                        }
                    }
                }
            }
        }
        self.buckets.entry(key).or_default().push(points.len() as u32);
        points.push(p);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_half_meter() {
        let mesh = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let shell = build_pointshell(&mesh, 0.5).unwrap();
        // 3x3 lattice per face, shared edges and corners counted once.
        assert_eq!(shell.len(), 26);
        let center = Vec3::repeat(0.5);
        for (p, n) in shell.points().iter().zip(shell.normals()) {
            let on_face = (0..3).any(|a| p[a].abs() < 1e-12 || (p[a] - 1.0).abs() < 1e-12);
            assert!(on_face, "{p:?}");
            assert!(n.dot(&(p - center)) < 0.0);
        }
    }

    #[test]
    fn rejects_bad_spacing() {
        let mesh = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        assert!(matches!(
            build_pointshell(&mesh, -1.0),
            Err(VolumetricError::InvalidSpacing(_))
        ));
        assert!(build_pointshell(&mesh, 0.0).is_err());
    }

    #[test]
    fn point_budget() {
        let mesh = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let err = PointShellBuilder::new(0.01)
            .with_point_budget(1000)
            .build(&mesh)
            .unwrap_err();
        assert!(matches!(err, VolumetricError::PointBudgetExceeded { budget: 1000 }));
    }

    #[test]
    fn no_duplicates() {
        let mesh = TriangleMesh::icosphere(Vec3::zeros(), 1.0, 2);
        let shell = build_pointshell(&mesh, 0.1).unwrap();
        let pts = shell.points();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                assert!((pts[i] - pts[j]).norm() >= 0.025);
            }
        }
    }
}
