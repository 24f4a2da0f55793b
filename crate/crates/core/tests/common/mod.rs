//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use vhap_core::geometry::{RigidPose, TriangleMesh, Vec3};
use vhap_core::volumetric::VoxMap;

/// Fraction of a voxel by which a triangle lying exactly in a grid plane is
/// moved against its normal before classification.
pub const GRID_PLANE_SHIFT: f64 = 1e-6;

/// Vertex coordinates this close to a grid plane, in voxels, lie on it.
pub const GRID_SNAP: f64 = 1e-9;

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_pose<R: Rng>(rng: &mut R, reach: f64) -> RigidPose {
    let p = Vec3::new(
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
    );
    let q = UnitQuaternion::from_axis_angle(
        &nalgebra::Unit::new_normalize(random_unit(rng)),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    RigidPose::from_quaternion(p, q)
}

/// Clips a convex polygon to `sign · (x[axis] − bound) ≤ 0`.
fn clip(poly: &[Vec3], axis: usize, bound: f64, sign: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let inside = |p: &Vec3| sign * (p[axis] - bound) <= 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ia, ib) = (inside(&a), inside(&b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (bound - a[axis]) / (b[axis] - a[axis]);
            let mut p = a + (b - a) * t;
            p[axis] = bound;
            out.push(p);
        }
    }
    out
}

/// Whether a closed triangle meets the open axis-aligned cube of half-size
/// `h` around `center`, by clipping the triangle to the closed cube and
/// checking that what remains is not confined to one face of it.
pub fn triangle_meets_open_cube(tri: &[Vec3; 3], center: &Vec3, h: f64) -> bool {
    let mut poly = tri.to_vec();
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            poly = clip(&poly, axis, center[axis] + sign * h, sign);
            if poly.is_empty() {
                return false;
            }
        }
    }
    let on_face = (0..3).any(|axis| {
        [1.0, -1.0]
            .iter()
            .any(|s| poly.iter().all(|p| p[axis] == center[axis] + s * h))
    });
    !on_face
}

/// Expresses a triangle in voxel units relative to `origin`, so cell
/// `(i, j, k)` is the cube `[i, i+1] x [j, j+1] x [k, k+1]`, and applies the
/// grid-plane rule: near-grid coordinates snap onto the plane, and a
/// triangle perpendicular to an axis lying on a grid plane moves a hair
/// against its normal.
pub fn settle_on_grid(tri: [Vec3; 3], origin: &Vec3, s: f64) -> [Vec3; 3] {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).try_normalize(0.0);
    let g = tri.map(|p| {
        let mut u = (p - origin) / s;
        for a in 0..3 {
            if (u[a] - u[a].round()).abs() < GRID_SNAP {
                u[a] = u[a].round();
            }
        }
        u
    });
    let Some(n) = n else {
        return g;
    };
    for axis in 0..3 {
        if n[axis].abs() >= 1.0 - 1e-12 {
            let k = g[0][axis];
            if (k - k.round()).abs() < GRID_PLANE_SHIFT {
                let shift = -n[axis].signum() * GRID_PLANE_SHIFT;
                return g.map(|mut p| {
                    p[axis] += shift;
                    p
                });
            }
        }
    }
    g
}

/// Center of cell `ijk` in voxel units.
pub fn unit_cell_center(ijk: [usize; 3]) -> Vec3 {
    Vec3::new(ijk[0] as f64 + 0.5, ijk[1] as f64 + 0.5, ijk[2] as f64 + 0.5)
}

/// Linear indices of cells met by at least one triangle, found by testing
/// every triangle against every cell of `map`'s grid.
pub fn oracle_surface_cells(mesh: &TriangleMesh, map: &VoxMap) -> Vec<usize> {
    let s = map.voxel_size();
    let origin = map.origin();
    let tris: Vec<[Vec3; 3]> = mesh.iter_triangles().map(|t| settle_on_grid(t, &origin, s)).collect();
    let h = 0.5;
    let boxes: Vec<(Vec3, Vec3)> = tris
        .iter()
        .map(|t| (t[0].inf(&t[1]).inf(&t[2]), t[0].sup(&t[1]).sup(&t[2])))
        .collect();
    let mut cells = Vec::new();
    for index in 0..map.len() {
        let c = unit_cell_center(map.coords(index));
        let hit = tris.iter().zip(&boxes).any(|(t, (lo, hi))| {
            // Cheap rejection only when the triangle's box misses the closed cell.
            let apart = (0..3).any(|a| lo[a] > c[a] + h || hi[a] < c[a] - h);
            !apart && triangle_meets_open_cube(t, &c, h)
        });
        if hit {
            cells.push(index);
        }
    }
    cells
}

pub fn closest_point_on_triangle(p: &Vec3, [a, b, c]: &[Vec3; 3]) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn distance_to_mesh(p: &Vec3, mesh: &TriangleMesh) -> f64 {
    mesh.iter_triangles()
        .map(|t| (closest_point_on_triangle(p, &t) - p).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Random test meshes of at most 100 triangles: soups, rotated boxes and
/// perturbed spheres.
pub fn random_mesh<R: Rng>(rng: &mut R) -> TriangleMesh {
    match rng.gen_range(0..4) {
        0 => {
            let n = rng.gen_range(1..=100);
            let mut vertices = Vec::new();
            let mut triangles = Vec::new();
            for i in 0..n {
                let base = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let size = rng.gen_range(0.05..0.8);
                loop {
                    let b = base + random_unit(rng) * size;
                    let c = base + random_unit(rng) * size;
                    if (b - base).cross(&(c - base)).norm() > 1e-4 {
                        vertices.extend([base, b, c]);
                        break;
                    }
                }
                let k = 3 * i as u32;
                triangles.push([k, k + 1, k + 2]);
            }
            TriangleMesh::new(vertices, triangles).unwrap()
        }
        1 => {
            let half = Vec3::new(
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.1..1.0),
            );
            TriangleMesh::cuboid(-half, half).transformed(&random_pose(rng, 1.0))
        }
        2 => {
            // Axis-aligned box, faces often on grid planes.
            let lo = Vec3::new(
                rng.gen_range(-1.0..0.0),
                rng.gen_range(-1.0..0.0),
                rng.gen_range(-1.0..0.0),
            );
            let hi = lo
                + Vec3::new(
                    rng.gen_range(0.1..1.5),
                    rng.gen_range(0.1..1.5),
                    rng.gen_range(0.1..1.5),
                );
            TriangleMesh::cuboid(lo, hi)
        }
        _ => {
            let sphere = TriangleMesh::icosphere(Vec3::zeros(), rng.gen_range(0.2..1.0), 1);
            let vertices: Vec<Vec3> = sphere.vertices().iter().map(|v| v * rng.gen_range(0.8..1.2)).collect();
            TriangleMesh::new(vertices, sphere.triangles().to_vec())
                .unwrap()
                .transformed(&random_pose(rng, 0.5))
        }
    }
}

pub fn max_extent(mesh: &TriangleMesh) -> f64 {
    let b = vhap_core::geometry::mesh_bounds(mesh).unwrap();
    b.extent().max()
}

pub fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::from(v)
}
