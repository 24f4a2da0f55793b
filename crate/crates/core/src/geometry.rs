//! Triangle meshes, axis-aligned boxes and rigid transforms.
//!
//! All lengths are meters. Mesh files are converted to meters at load time
//! through the `unit_scale` factor; nothing downstream deals with other units.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` accepted at pose construction.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read mesh file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face index {index} out of range (mesh has {vertex_count} vertices)")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("line {line}: degenerate face repeats vertex {index}")]
    DegenerateFace { line: usize, index: usize },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("unit scale must be a positive finite number, got {0}")]
    InvalidScale(f64),
    #[error("non-finite vertex coordinate")]
    NonFiniteVertex,
    #[error("matrix is not a proper rotation (orthonormality error {orthonormality:e}, det {det})")]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("non-finite pose component")]
    NonFinitePose,
}

/// Indexed triangle surface. Triangles are counter-clockwise seen from
/// outside, so `(b - a) × (c - a)` is the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    scale_applied: f64,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFiniteVertex);
        }
        for (n, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        line: n + 1,
                        index: i as i64,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                let dup = if tri[0] == tri[1] || tri[0] == tri[2] {
                    tri[0]
                } else {
                    tri[1]
                };
                return Err(GeometryError::DegenerateFace {
                    line: n + 1,
                    index: dup as usize,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
            scale_applied: 1.0,
        })
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let vertices = vec![
            v(min.x, min.y, min.z),
            v(max.x, min.y, min.z),
            v(max.x, max.y, min.z),
            v(min.x, max.y, min.z),
            v(min.x, min.y, max.z),
            v(max.x, min.y, max.z),
            v(max.x, max.y, max.z),
            v(min.x, max.y, max.z),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        Self {
            vertices,
            triangles,
            scale_applied: 1.0,
        }
    }

    /// Geodesic sphere built by subdividing an icosahedron.
    pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints = std::collections::HashMap::new();
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Self {
            vertices: verts.into_iter().map(|v| center + v * radius).collect(),
            triangles: faces,
            scale_applied: 1.0,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn scale_applied(&self) -> f64 {
        self.scale_applied
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, index: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[index];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn iter_triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.triangles.len()).map(move |i| self.triangle(i))
    }

    /// Copy of the mesh with every vertex mapped through `pose`.
    pub fn transformed(&self, pose: &RigidPose) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
            scale_applied: self.scale_applied,
        }
    }

    /// Concatenates several meshes into one triangle soup.
    pub fn merged<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Self {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for mesh in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&mesh.vertices);
            triangles.extend(mesh.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        Self {
            vertices,
            triangles,
            scale_applied: 1.0,
        }
    }

    /// Writes the mesh in the plain-text format read by [`parse_mesh`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {:e} {:e} {:e}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        out
    }
}

/// Reads a mesh file and scales its coordinates to meters.
pub fn load_mesh(path: impl AsRef<Path>, unit_scale: f64) -> Result<TriangleMesh, GeometryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mesh(&text, unit_scale)
}

/// Parses `v x y z` / `f i j k` lines (1-based indices, `#` comments).
pub fn parse_mesh(text: &str, unit_scale: f64) -> Result<TriangleMesh, GeometryError> {
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(GeometryError::InvalidScale(unit_scale));
    }
    let mut vertices = Vec::new();
    // Faces are validated after all vertices are known.
    let mut faces: Vec<(usize, [i64; 3])> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => {
                let coords = parse_three::<f64>(&rest, line)?;
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(GeometryError::Parse {
                        line,
                        message: "non-finite vertex coordinate".into(),
                    });
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]) * unit_scale);
            }
            "f" => faces.push((line, parse_three::<i64>(&rest, line)?)),
            other => {
                return Err(GeometryError::Parse {
                    line,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
    }
    let mut triangles = Vec::with_capacity(faces.len());
    for (line, face) in faces {
        let mut tri = [0u32; 3];
        for (slot, &index) in tri.iter_mut().zip(face.iter()) {
            if index < 1 || index as usize > vertices.len() {
                return Err(GeometryError::IndexOutOfRange {
                    line,
                    index,
                    vertex_count: vertices.len(),
                });
            }
            *slot = (index - 1) as u32;
        }
        if tri[0] == tri[1] || tri[0] == tri[2] || tri[1] == tri[2] {
            let dup = if tri[0] == tri[1] || tri[0] == tri[2] {
                tri[0]
            } else {
                tri[1]
            };
            return Err(GeometryError::DegenerateFace {
                line,
                index: dup as usize + 1,
            });
        }
        triangles.push(tri);
    }
    if triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        scale_applied: unit_scale,
    })
}

fn parse_three<T: std::str::FromStr>(tokens: &[&str], line: usize) -> Result<[T; 3], GeometryError> {
    if tokens.len() != 3 {
        return Err(GeometryError::Parse {
            line,
            message: format!("expected 3 values, found {}", tokens.len()),
        });
    }
    let parse = |s: &str| {
        s.parse::<T>().map_err(|_| GeometryError::Parse {
            line,
            message: format!("invalid number `{s}`"),
        })
    };
    Ok([parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.iter().zip(max.iter()).all(|(a, b)| a <= b));
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn padded(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }
}

/// Tight bounding box of the vertices referenced by the mesh.
pub fn mesh_bounds(mesh: &TriangleMesh) -> Result<Aabb, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let referenced = mesh.triangles.iter().flatten().map(|&i| &mesh.vertices[i as usize]);
    Aabb::from_points(referenced).ok_or(GeometryError::EmptyMesh)
}

/// Position plus proper rotation. `apply` rotates first, then translates.
#[derive(Clone, Copy, PartialEq)]
pub struct RigidPose {
    position: Vec3,
    rotation: Matrix3<f64>,
}

impl fmt::Debug for RigidPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.quaternion();
        f.debug_struct("RigidPose")
            .field("position", &[self.position.x, self.position.y, self.position.z])
            .field("quaternion_wxyz", &[q.w, q.i, q.j, q.k])
            .finish()
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn new(position: Vec3, rotation: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !position.iter().chain(rotation.iter()).all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinitePose);
        }
        let orthonormality = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if orthonormality > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation { orthonormality, det });
        }
        Ok(Self { position, rotation })
    }

    pub fn identity() -> Self {
        Self {
            position: Vec3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self {
            position,
            rotation: Matrix3::identity(),
        }
    }

    pub fn from_quaternion(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            rotation: orientation.to_rotation_matrix().into_inner(),
        }
    }

    /// Rotation about `axis` (normalized internally) by `angle` radians.
    pub fn from_axis_angle(position: Vec3, axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::from_quaternion(position, UnitQuaternion::from_axis_angle(&axis, angle))
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.position
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            position: self.rotation * other.position + self.position,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose {
            position: -(rt * self.position),
            rotation: rt,
        }
    }

    /// Rotation angle (radians) between two orientations.
    pub fn angle_to(&self, other: &RigidPose) -> f64 {
        self.quaternion().angle_to(&other.quaternion())
    }
}

pub fn pose_compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

pub fn pose_inverse(a: &RigidPose) -> RigidPose {
    a.inverse()
}

pub fn pose_apply(a: &RigidPose, p: &Vec3) -> Vec3 {
    a.apply(p)
}
