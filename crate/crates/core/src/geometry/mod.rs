//! Meshes, camera projection, pose, and the linear parametric face model.
//!
//! Coordinate conventions (inherited by every other module): right-handed
//! camera space with `+z` into the scene and image `y` growing downward;
//! lengths in millimeters; triangles wound counter-clockwise when viewed
//! from outside, so `(v1-v0) × (v2-v0)` points out of the surface.

mod container;
mod model;
mod obj;

pub use container::{read_container, write_container, ArrayContainer, ContainerError};
pub use model::{
    synthesize_face, toy_model, LinearFaceModel, ToyModelParams, ALBEDO_DIM, EXP_DIM, ID_DIM,
};
pub use obj::{read_obj, write_obj, ObjError};

use crate::{Mat3, Vec2, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("triangle {triangle} references vertex {vertex} but mesh has {n_vertices} vertices")]
    IndexOutOfRange {
        triangle: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("albedo of vertex {0} is outside [0,1]")]
    AlbedoOutOfRange(usize),
    #[error("mesh has {n_vertices} vertices but {n_albedo} albedo entries")]
    AlbedoCountMismatch { n_vertices: usize, n_albedo: usize },
    #[error("coefficient block `{block}` has length {got}, expected {expected}")]
    CoefficientLength {
        block: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("point is behind the camera (z' = {0})")]
    BehindCamera(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Triangle mesh in camera space with per-vertex RGB albedo.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMesh {
    /// Vertex positions in millimeters, camera space.
    pub vertices: Vec<Vec3>,
    /// Vertex index triples, counter-clockwise viewed from outside.
    pub triangles: Vec<[usize; 3]>,
    /// Per-vertex RGB albedo in `[0,1]`.
    pub albedo: Vec<Vec3>,
}

impl FaceMesh {
    /// Check index ranges, non-degeneracy and the albedo gamut.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.albedo.len() != self.vertices.len() {
            return Err(GeometryError::AlbedoCountMismatch {
                n_vertices: self.vertices.len(),
                n_albedo: self.albedo.len(),
            });
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= self.vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        triangle: t,
                        vertex: v,
                        n_vertices: self.vertices.len(),
                    });
                }
            }
            let e1 = self.vertices[tri[1]] - self.vertices[tri[0]];
            let e2 = self.vertices[tri[2]] - self.vertices[tri[0]];
            if e1.cross(&e2).norm_squared() == 0.0 {
                return Err(GeometryError::DegenerateTriangle(t));
            }
        }
        for (v, a) in self.albedo.iter().enumerate() {
            if a.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(GeometryError::AlbedoOutOfRange(v));
            }
        }
        Ok(())
    }

    /// Mean of the three vertex albedos of each triangle.
    pub fn triangle_albedos(&self) -> Vec<Vec3> {
        self.triangles
            .iter()
            .map(|t| (self.albedo[t[0]] + self.albedo[t[1]] + self.albedo[t[2]]) / 3.0)
            .collect()
    }

    /// Area-weighted unit vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for tri in &self.triangles {
            let e1 = self.vertices[tri[1]] - self.vertices[tri[0]];
            let e2 = self.vertices[tri[2]] - self.vertices[tri[0]];
            let n = e1.cross(&e2); // length = 2 * area
            for &v in tri {
                acc[v] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::new(0.0, 0.0, -1.0)
                }
            })
            .collect()
    }

    /// Apply `pose` to all vertices, returning a new mesh.
    pub fn transformed(&self, pose: &Pose) -> FaceMesh {
        let r = pose.rotation();
        FaceMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| r * v + pose.translation)
                .collect(),
            triangles: self.triangles.clone(),
            albedo: self.albedo.clone(),
        }
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Bounding-box diagonal, the "scene scale" used for relative tolerances.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }
}

/// One near point light: position in camera space and scalar illumination.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointLight {
    pub position: Vec3,
    /// Radiometric strength; with distances in mm this carries mm² units,
    /// so a light 600 mm away needs illumination ~3.6e5 for unit intensity.
    pub illumination: f64,
}

impl PointLight {
    pub fn new(position: Vec3, illumination: f64) -> Self {
        assert!(illumination > 0.0, "illumination must be positive");
        PointLight {
            position,
            illumination,
        }
    }
}

/// Pinhole camera intrinsics. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive: fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64)
            || !(0.0 <= self.cy && self.cy < self.height as f64)
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Rigid pose: Euler angles (radians) and translation (mm).
///
/// The rotation composes as `R = Rz(roll) · Ry(yaw) · Rx(pitch)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            pitch: 0.0,
            yaw: 0.0,
            roll: 0.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn rotation(&self) -> Mat3 {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
        let ry = Mat3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
        let rz = Mat3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }

    pub fn apply(&self, point: &Vec3) -> Vec3 {
        self.rotation() * point + self.translation
    }
}

/// Perspective-project a camera-space point through `pose` and `cam`.
///
/// Returns continuous pixel coordinates `(fx·x'/z' + cx, fy·y'/z' + cy)`
/// where `(x', y', z') = R·V + t`.
pub fn project(point: &Vec3, pose: &Pose, cam: &CameraIntrinsics) -> Result<Vec2, GeometryError> {
    let p = pose.apply(point);
    if p.z <= 0.0 {
        return Err(GeometryError::BehindCamera(p.z));
    }
    Ok(Vec2::new(
        cam.fx * p.x / p.z + cam.cx,
        cam.fy * p.y / p.z + cam.cy,
    ))
}

/// Invert the projection at a known depth (identity pose).
pub fn back_project(pixel: &Vec2, depth_z: f64, cam: &CameraIntrinsics) -> Result<Vec3, GeometryError> {
    if depth_z <= 0.0 {
        return Err(GeometryError::NonPositiveDepth(depth_z));
    }
    Ok(Vec3::new(
        (pixel.x - cam.cx) * depth_z / cam.fx,
        (pixel.y - cam.cy) * depth_z / cam.fy,
        depth_z,
    ))
}

/// Unit direction of the back-projection ray through a pixel, scaled so its
/// z-component is 1: `back_project(p, z) = z · ray(p)`.
pub fn pixel_ray(pixel: &Vec2, cam: &CameraIntrinsics) -> Vec3 {
    Vec3::new(
        (pixel.x - cam.cx) / cam.fx,
        (pixel.y - cam.cy) / cam.fy,
        1.0,
    )
}

/// Per-triangle unit normals and centroids.
///
/// The normal comes from the cross product of the edge vectors in stored
/// winding order; a zero-area triangle is reported by index.
pub fn triangle_normals_and_centroids(
    mesh: &FaceMesh,
) -> Result<(Vec<Vec3>, Vec<Vec3>), GeometryError> {
    let mut normals = Vec::with_capacity(mesh.triangles.len());
    let mut centroids = Vec::with_capacity(mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (a, b, c) = (
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        );
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len == 0.0 {
            return Err(GeometryError::DegenerateTriangle(t));
        }
        normals.push(n / len);
        centroids.push((a + b + c) / 3.0);
    }
    Ok((normals, centroids))
}

/// Icosahedron subdivided `depth` times and projected to the unit sphere.
/// Test-only geometry shared across the crate's unit tests.
#[cfg(test)]
pub(crate) fn test_icosphere(depth: usize) -> FaceMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
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
    for _ in 0..depth {
        let mut midpoint = std::collections::HashMap::new();
        let mut new_tris = Vec::new();
        for tri in &triangles {
            let mut mids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mids[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = ((vertices[a] + vertices[b]) / 2.0).normalize();
                    vertices.push(m);
                    vertices.len() - 1
                });
            }
            new_tris.push([tri[0], mids[0], mids[2]]);
            new_tris.push([tri[1], mids[1], mids[0]]);
            new_tris.push([tri[2], mids[2], mids[1]]);
            new_tris.push([mids[0], mids[1], mids[2]]);
        }
        triangles = new_tris;
    }
    let n = vertices.len();
    FaceMesh {
        vertices,
        triangles,
        albedo: vec![Vec3::repeat(1.0); n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_square_cam() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
            width: 1000,
            height: 1000,
        }
    }

    #[test]
    fn project_on_optical_axis() {
        let q = project(&Vec3::new(0.0, 0.0, 1000.0), &Pose::identity(), &unit_square_cam())
            .unwrap();
        assert_relative_eq!(q.x, 500.0);
        assert_relative_eq!(q.y, 500.0);
    }

    #[test]
    fn project_similar_triangles() {
        let q = project(
            &Vec3::new(100.0, 0.0, 1000.0),
            &Pose::identity(),
            &unit_square_cam(),
        )
        .unwrap();
        assert_relative_eq!(q.x, 600.0);
        assert_relative_eq!(q.y, 500.0);
    }

    #[test]
    fn project_behind_camera_is_error() {
        let err = project(
            &Vec3::new(0.0, 0.0, -5.0),
            &Pose::identity(),
            &unit_square_cam(),
        );
        assert!(matches!(err, Err(GeometryError::BehindCamera(_))));
    }

    #[test]
    fn project_with_yaw_matches_matrix_composition() {
        // Oracle: explicit rotation matrix followed by the pinhole formula.
        let pose = Pose {
            pitch: 0.0,
            yaw: std::f64::consts::FRAC_PI_2,
            roll: 0.0,
            translation: Vec3::new(0.0, 0.0, 2000.0),
        };
        let cam = unit_square_cam();
        let v = Vec3::new(0.0, 0.0, 1000.0);
        let q = project(&v, &pose, &cam).unwrap();

        let ry = Mat3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        let p = ry * v + pose.translation;
        let expected = Vec2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
        assert_relative_eq!(q.x, expected.x, epsilon = 1e-9);
        assert_relative_eq!(q.y, expected.y, epsilon = 1e-9);
    }

    #[test]
    fn back_project_optical_axis() {
        let v = back_project(&Vec2::new(500.0, 500.0), 1000.0, &unit_square_cam()).unwrap();
        assert_relative_eq!(v, Vec3::new(0.0, 0.0, 1000.0));
    }

    #[test]
    fn back_project_hand_evaluated() {
        let v = back_project(&Vec2::new(600.0, 500.0), 2000.0, &unit_square_cam()).unwrap();
        assert_relative_eq!(v, Vec3::new(200.0, 0.0, 2000.0));
    }

    #[test]
    fn back_project_rejects_nonpositive_depth() {
        assert!(back_project(&Vec2::new(0.0, 0.0), 0.0, &unit_square_cam()).is_err());
    }

    #[test]
    fn normals_and_centroids_basic_triangle() {
        let mesh = FaceMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2]],
            albedo: vec![Vec3::repeat(1.0); 3],
        };
        let (normals, centroids) = triangle_normals_and_centroids(&mesh).unwrap();
        assert_relative_eq!(normals[0], Vec3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(centroids[0], Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0));
    }

    #[test]
    fn degenerate_triangle_names_index() {
        let mesh = FaceMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 1, 3]],
            albedo: vec![Vec3::repeat(1.0); 4],
        };
        match triangle_normals_and_centroids(&mesh) {
            Err(GeometryError::DegenerateTriangle(t)) => assert_eq!(t, 1),
            other => panic!("expected degenerate triangle error, got {other:?}"),
        }
    }

    #[test]
    fn icosphere_normals_are_radial() {
        // Coarse sphere: every triangle normal within 15 degrees of the
        // centroid's radial direction.
        let mesh = test_icosphere(2);
        let (normals, centroids) = triangle_normals_and_centroids(&mesh).unwrap();
        for (n, c) in normals.iter().zip(&centroids) {
            let radial = c.normalize();
            let angle = n.dot(&radial).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 15.0, "angle {angle} too large");
        }
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(
            pitch in -3.2f64..3.2,
            yaw in -3.2f64..3.2,
            roll in -3.2f64..3.2,
        ) {
            let pose = Pose { pitch, yaw, roll, translation: Vec3::zeros() };
            let r = pose.rotation();
            let should_be_identity = r.transpose() * r;
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((should_be_identity[(i, j)] - expected).abs() < 1e-12);
                }
            }
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn project_back_project_round_trip(
            px in 1.0f64..999.0,
            py in 1.0f64..999.0,
            z in 10.0f64..5000.0,
        ) {
            let cam = unit_square_cam();
            let v = back_project(&Vec2::new(px, py), z, &cam).unwrap();
            let q = project(&v, &Pose::identity(), &cam).unwrap();
            prop_assert!((q.x - px).abs() < 1e-9);
            prop_assert!((q.y - py).abs() < 1e-9);
        }

        #[test]
        fn normals_invariant_to_translation_equivariant_to_rotation(
            tx in -100.0f64..100.0,
            ty in -100.0f64..100.0,
            tz in -100.0f64..100.0,
            yaw in -3.0f64..3.0,
        ) {
            let mesh = test_icosphere(0);
            let (normals, _) = triangle_normals_and_centroids(&mesh).unwrap();

            let shifted = mesh.transformed(&Pose {
                pitch: 0.0, yaw: 0.0, roll: 0.0,
                translation: Vec3::new(tx, ty, tz),
            });
            let (shifted_normals, _) = triangle_normals_and_centroids(&shifted).unwrap();
            for (a, b) in normals.iter().zip(&shifted_normals) {
                prop_assert!((a - b).norm() < 1e-12);
            }

            let pose = Pose { pitch: 0.0, yaw, roll: 0.0, translation: Vec3::zeros() };
            let rotated = mesh.transformed(&pose);
            let (rotated_normals, _) = triangle_normals_and_centroids(&rotated).unwrap();
            let r = pose.rotation();
            for (a, b) in normals.iter().zip(&rotated_normals) {
                prop_assert!((r * a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_norm_on_icosphere() {
        let mesh = test_icosphere(1);
        let (normals, _) = triangle_normals_and_centroids(&mesh).unwrap();
        for n in normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }
}
