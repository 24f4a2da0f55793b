mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vhap_core::geometry::{mesh_bounds, RigidPose, TriangleMesh, Vec3};
use vhap_core::volumetric::{
    build_pointshell, cook_voxmaps, voxelize_surface, VoxMap, VoxelKind, VoxelState, Voxelizer,
};

fn surface_cells(map: &VoxMap) -> Vec<usize> {
    map.surface_cells().collect()
}

fn neighbors(map: &VoxMap, index: usize) -> Vec<usize> {
    let [i, j, k] = map.coords(index);
    let dims = map.dims();
    let mut out = Vec::new();
    for axis in 0..3 {
        for d in [-1i64, 1] {
            let mut c = [i as i64, j as i64, k as i64];
            c[axis] += d;
            if (0..3).all(|a| c[a] >= 0 && c[a] < dims[a] as i64) {
                out.push(map.linear_index([c[0] as usize, c[1] as usize, c[2] as usize]));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn surface_cells_match_exhaustive_oracle(seed in any::<u64>(), divisions in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng);
        let s = max_extent(&mesh) / divisions as f64;
        let map = voxelize_surface(&mesh, s, 0.0).unwrap();
        prop_assert!(map.dims().iter().all(|&d| d <= 64), "{:?}", map.dims());
        prop_assert_eq!(surface_cells(&map), oracle_surface_cells(&mesh, &map));
    }

    #[test]
    fn every_triangle_reaches_a_surface_voxel(seed in any::<u64>(), divisions in 3usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng);
        let s = max_extent(&mesh) / divisions as f64;
        let map = voxelize_surface(&mesh, s, 0.0).unwrap();
        let cells = surface_cells(&map);
        for tri in mesh.iter_triangles() {
            let tri = settle_on_grid(tri, &map.origin(), s);
            let hit = cells
                .iter()
                .any(|&c| triangle_meets_open_cube(&tri, &unit_cell_center(map.coords(c)), 0.5));
            prop_assert!(hit);
        }
    }

    #[test]
    fn grid_covers_padded_bounds(seed in any::<u64>(), divisions in 3usize..30, band_cells in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng);
        let s = max_extent(&mesh) / divisions as f64;
        let band = band_cells as f64 * s;
        let map = voxelize_surface(&mesh, s, band).unwrap();
        let need = mesh_bounds(&mesh).unwrap().padded(band + s);
        let have = map.bounds();
        for a in 0..3 {
            prop_assert!(have.min[a] <= need.min[a] + 1e-12);
            prop_assert!(have.max[a] >= need.max[a] - 1e-12);
        }
    }

    #[test]
    fn proximity_next_to_surface_is_close(seed in any::<u64>(), divisions in 4usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng);
        let s = max_extent(&mesh) / divisions as f64;
        let band = 3.0 * s;
        let map = voxelize_surface(&mesh, s, band).unwrap();
        for index in 0..map.len() {
            if let VoxelState::Proximity(d) = map.state(index) {
                prop_assert!(d > 0.0 && d <= band + 1e-12);
                let touches_surface = neighbors(&map, index)
                    .into_iter()
                    .any(|n| map.kind(n) == VoxelKind::Surface);
                if touches_surface {
                    prop_assert!(d <= s * 3f64.sqrt() + 1e-12, "{d}");
                }
            }
        }
    }

    #[test]
    fn pointshell_points_lie_on_the_mesh(seed in any::<u64>(), divisions in 4usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng);
        let spacing = max_extent(&mesh) / divisions as f64;
        let shell = build_pointshell(&mesh, spacing).unwrap();
        prop_assert!(!shell.is_empty());
        for (p, n) in shell.points().iter().zip(shell.normals()) {
            prop_assert!(distance_to_mesh(p, &mesh) <= 1e-9);
            prop_assert!((n.norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn cooking_ignores_part_order(seed in any::<u64>(), count in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let meshes: Vec<TriangleMesh> = (0..count).map(|_| random_mesh(&mut rng)).collect();
        let poses: Vec<RigidPose> = (0..count).map(|_| random_pose(&mut rng, 1.0)).collect();
        let mut parts: Vec<(&TriangleMesh, RigidPose)> = meshes.iter().zip(poses.iter().copied()).collect();
        let voxelizer = Voxelizer::new(0.25, 0.5);
        let a = cook_voxmaps(&parts, &voxelizer).unwrap();
        parts.reverse();
        parts.rotate_left(1);
        let b = cook_voxmaps(&parts, &voxelizer).unwrap();
        prop_assert_eq!(a.origin(), b.origin());
        prop_assert_eq!(a.dims(), b.dims());
        prop_assert!(a.states().eq(b.states()));
    }
}

#[test]
fn cube_examples_match_oracle() {
    let unit = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
    let map = voxelize_surface(&unit, 0.5, 0.0).unwrap();
    assert_eq!(map.surface_count(), 8);
    assert_eq!(map.count(VoxelKind::Interior), 0);
    assert_eq!(surface_cells(&map), oracle_surface_cells(&unit, &map));

    let small = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(0.1));
    let map = voxelize_surface(&small, 0.005, 0.0).unwrap();
    assert_eq!(surface_cells(&map), oracle_surface_cells(&small, &map));
    assert_eq!(map.surface_count(), 20 * 20 * 20 - 18 * 18 * 18);
}

#[test]
fn single_triangle_in_one_voxel() {
    let tri = TriangleMesh::new(
        vec![
            Vec3::new(0.1, 0.1, 0.1),
            Vec3::new(0.3, 0.12, 0.15),
            Vec3::new(0.15, 0.35, 0.2),
        ],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let map = voxelize_surface(&tri, 0.5, 0.0).unwrap();
    assert_eq!(map.surface_count(), 1);
    let index = map.surface_cells().next().unwrap();
    let [a, b, c] = tri.triangle(0);
    let n = (b - a).cross(&(c - a)).normalize();
    match map.state(index) {
        VoxelState::Surface(got) => assert!((got - n).norm() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cooked_union_counts() {
    let s = 0.01;
    let a = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(0.1));
    let alone = voxelize_surface(&a, s, 0.0).unwrap().surface_count();
    let voxelizer = Voxelizer::new(s, 0.0);

    let far = RigidPose::from_translation(Vec3::new(0.3, 0.0, 0.0));
    let disjoint = cook_voxmaps(&[(&a, RigidPose::identity()), (&a, far)], &voxelizer).unwrap();
    assert_eq!(disjoint.surface_count(), 2 * alone);

    let near = RigidPose::from_translation(Vec3::new(0.05, 0.0, 0.0));
    let overlapping = cook_voxmaps(&[(&a, RigidPose::identity()), (&a, near)], &voxelizer).unwrap();
    assert!(overlapping.surface_count() < 2 * alone);

    let single = cook_voxmaps(&[(&a, RigidPose::identity())], &voxelizer).unwrap();
    let direct = voxelize_surface(&a, s, 0.0).unwrap();
    assert!(single.states().eq(direct.states()));
}

#[test]
fn pointshell_normals_point_inward() {
    let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
    let shell = build_pointshell(&cube, 0.5).unwrap();
    let center = Vec3::repeat(0.5);
    for (p, n) in shell.points().iter().zip(shell.normals()) {
        assert!(distance_to_mesh(p, &cube) <= 1e-12);
        assert!(n.dot(&(p - center)) < 0.0);
    }

    let sphere = TriangleMesh::icosphere(Vec3::new(0.3, -0.2, 0.1), 0.5, 2);
    let centroid = sphere.vertices().iter().sum::<Vec3>() / sphere.vertices().len() as f64;
    let shell = build_pointshell(&sphere, 0.05).unwrap();
    for (p, n) in shell.points().iter().zip(shell.normals()) {
        assert!(n.dot(&(p - centroid)) < 0.0);
    }
    assert!(build_pointshell(&cube, -1.0).is_err());
}

#[test]
fn pointshell_spacing_on_a_single_triangle() {
    let tri = TriangleMesh::new(
        vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let s = 0.1;
    let shell = build_pointshell(&tri, s).unwrap();
    let pts = shell.points();
    for (i, p) in pts.iter().enumerate() {
        let nearest = pts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (q - p).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((0.5 * s..=2.0 * s).contains(&nearest), "{nearest}");
    }
}

#[test]
fn closed_cube_has_interior() {
    let cube = TriangleMesh::cuboid(Vec3::zeros(), Vec3::repeat(0.1));
    let map = voxelize_surface(&cube, 0.01, 0.0).unwrap();
    assert_eq!(map.count(VoxelKind::Interior), 8 * 8 * 8);
    let inside = map.lookup(&Vec3::repeat(0.05));
    assert_eq!(inside, VoxelState::Interior);
}
