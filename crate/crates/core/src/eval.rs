//! Quantitative metrics: angular error statistics and maps, cosine normal
//! discrepancy, and 7-DOF-aligned point-to-point geometric error.

use crate::geometry::FaceMesh;
use crate::integrate::NormalMap;
use crate::spatial::KdTree;
use crate::{Mat3, Vec3};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("normal maps have different dimensions")]
    DimensionMismatch,
    #[error("mask intersection is empty")]
    EmptyMask,
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("correspondences are degenerate (collinear or coincident)")]
    DegenerateCorrespondences,
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pfm(#[from] crate::render::PfmError),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

/// Units an [`ErrorReport`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Degrees,
    Millimeters,
}

/// Per-pixel error map aligned with the inputs' grid.
#[derive(Debug, Clone)]
pub struct PixelErrorMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// The error map backing a report.
#[derive(Debug, Clone)]
pub enum ErrorMap {
    Pixels(PixelErrorMap),
    Vertices(Vec<f64>),
}

/// Summary statistics plus the per-element error map.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub mean: f64,
    pub median: f64,
    pub rms: f64,
    pub units: Units,
    #[serde(skip)]
    pub map: ErrorMap,
}

fn statistics(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    (mean, median, rms)
}

/// Per-pixel angle between the maps in degrees, over the mask intersection.
pub fn angular_error(estimated: &NormalMap, truth: &NormalMap) -> Result<ErrorReport, EvalError> {
    if estimated.width != truth.width || estimated.height != truth.height {
        return Err(EvalError::DimensionMismatch);
    }
    let n_px = estimated.normals.len();
    let mut values = vec![0.0; n_px];
    let mut mask = vec![false; n_px];
    let mut sampled = Vec::new();
    for i in 0..n_px {
        if estimated.mask[i] && truth.mask[i] {
            let cos = estimated.normals[i].dot(&truth.normals[i]).clamp(-1.0, 1.0);
            let deg = cos.acos().to_degrees();
            values[i] = deg;
            mask[i] = true;
            sampled.push(deg);
        }
    }
    if sampled.is_empty() {
        return Err(EvalError::EmptyMask);
    }
    let (mean, median, rms) = statistics(&sampled);
    Ok(ErrorReport {
        mean,
        median,
        rms,
        units: Units::Degrees,
        map: ErrorMap::Pixels(PixelErrorMap {
            width: estimated.width,
            height: estimated.height,
            values,
            mask,
        }),
    })
}

/// Mean of `1 - n . n_hat` over the shared mask; 0 for identical maps,
/// 1 for orthogonal, 2 for antipodal.
pub fn cosine_normal_error(estimated: &NormalMap, truth: &NormalMap) -> Result<f64, EvalError> {
    if estimated.width != truth.width || estimated.height != truth.height {
        return Err(EvalError::DimensionMismatch);
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..estimated.normals.len() {
        if estimated.mask[i] && truth.mask[i] {
            acc += 1.0 - estimated.normals[i].dot(&truth.normals[i]).clamp(-1.0, 1.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(EvalError::EmptyMask);
    }
    Ok(acc / count as f64)
}

/// Similarity transform `x -> scale * R * x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            scale: 1.0,
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Closed-form least-squares similarity (orthogonal alignment with uniform
/// scale) mapping each source point onto its paired target point. The
/// rotation is always proper (det = +1), never a reflection.
fn fit_similarity(source: &[Vec3], target: &[Vec3]) -> Result<Similarity, EvalError> {
    let n = source.len();
    if n < 3 {
        return Err(EvalError::TooFewCorrespondences(n));
    }
    let s_mean = source.iter().sum::<Vec3>() / n as f64;
    let t_mean = target.iter().sum::<Vec3>() / n as f64;
    let mut cov = Mat3::zeros();
    let mut s_var = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s - s_mean;
        let tc = t - t_mean;
        cov += tc * sc.transpose();
        s_var += sc.norm_squared();
    }
    cov /= n as f64;
    s_var /= n as f64;
    if s_var < 1e-24 {
        return Err(EvalError::DegenerateCorrespondences);
    }
    let svd = cov.svd(true, true);
    let u = svd.u.ok_or(EvalError::DegenerateCorrespondences)?;
    let v_t = svd.v_t.ok_or(EvalError::DegenerateCorrespondences)?;
    let sv = svd.singular_values;
    // Rank < 2 means the points are collinear: rotation about the line is
    // unconstrained.
    if sv[1] <= 1e-12 * sv[0].max(1e-300) {
        return Err(EvalError::DegenerateCorrespondences);
    }
    let det_sign = (u * v_t).determinant().signum();
    let d = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, det_sign));
    let rotation = u * d * v_t;
    let trace_ds = sv[0] + sv[1] + det_sign * sv[2];
    let scale = trace_ds / s_var;
    let translation = t_mean - scale * (rotation * s_mean);
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}

/// 7-DOF alignment of `source` onto `target`.
///
/// With explicit correspondences `(source_idx, target_idx)` this is the
/// closed-form solution; without, an ICP loop (30 iterations max) with
/// mutual-nearest correspondence filtering and a 3x-median distance cutoff.
pub fn align_7dof(
    source: &FaceMesh,
    target: &FaceMesh,
    correspondences: Option<&[(usize, usize)]>,
) -> Result<Similarity, EvalError> {
    if source.vertices.is_empty() || target.vertices.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    if let Some(pairs) = correspondences {
        let s: Vec<Vec3> = pairs.iter().map(|&(i, _)| source.vertices[i]).collect();
        let t: Vec<Vec3> = pairs.iter().map(|&(_, j)| target.vertices[j]).collect();
        return fit_similarity(&s, &t);
    }

    let target_tree = KdTree::build(&target.vertices);
    // Seed the loop by matching centroids and RMS radii; rotation starts at
    // the identity.
    let mut sim = initial_guess(&source.vertices, &target.vertices);
    let mut prev_rmse = f64::INFINITY;
    for _ in 0..30 {
        let moved: Vec<Vec3> = source.vertices.iter().map(|v| sim.apply(v)).collect();
        // Forward nearest neighbors filtered to mutual matches; when that
        // leaves too few pairs (heavily misaligned clouds), fall back to
        // all forward pairs.
        let forward: Vec<(usize, f64)> = moved
            .par_iter()
            .map(|m| target_tree.nearest(m).unwrap())
            .collect();
        let moved_tree = KdTree::build(&moved);
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for (i, &(j, d2)) in forward.iter().enumerate() {
            let (back, _) = moved_tree.nearest(&target.vertices[j]).unwrap();
            if back == i {
                pairs.push((i, j, d2.sqrt()));
            }
        }
        if pairs.len() < 3.max(source.vertices.len() / 10) {
            pairs = forward
                .iter()
                .enumerate()
                .map(|(i, &(j, d2))| (i, j, d2.sqrt()))
                .collect();
        }
        let mut dists: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        dists.sort_by(f64::total_cmp);
        let median = dists[dists.len() / 2];
        let cutoff = 3.0 * median;
        let kept: Vec<&(usize, usize, f64)> = pairs.iter().filter(|p| p.2 <= cutoff).collect();
        if kept.len() < 3 {
            return Err(EvalError::TooFewCorrespondences(kept.len()));
        }
        let s: Vec<Vec3> = kept.iter().map(|p| source.vertices[p.0]).collect();
        let t: Vec<Vec3> = kept.iter().map(|p| target.vertices[p.1]).collect();
        sim = fit_similarity(&s, &t)?;
        let rmse = (kept.iter().map(|p| p.2 * p.2).sum::<f64>() / kept.len() as f64).sqrt();
        if (prev_rmse - rmse).abs() <= 1e-12 * prev_rmse.max(1e-30) {
            break;
        }
        prev_rmse = rmse;
    }
    Ok(sim)
}

/// Centroid and RMS-radius matching (identity rotation).
fn initial_guess(source: &[Vec3], target: &[Vec3]) -> Similarity {
    let s_mean = source.iter().sum::<Vec3>() / source.len() as f64;
    let t_mean = target.iter().sum::<Vec3>() / target.len() as f64;
    let s_rad = (source.iter().map(|v| (v - s_mean).norm_squared()).sum::<f64>()
        / source.len() as f64)
        .sqrt();
    let t_rad = (target.iter().map(|v| (v - t_mean).norm_squared()).sum::<f64>()
        / target.len() as f64)
        .sqrt();
    let scale = if s_rad > 1e-12 { t_rad / s_rad } else { 1.0 };
    Similarity {
        scale,
        rotation: Mat3::identity(),
        translation: t_mean - scale * s_mean,
    }
}

/// Distance from each vertex of `a` to its nearest vertex in `b`.
pub fn nearest_vertex_distances(a: &FaceMesh, b: &FaceMesh) -> Vec<f64> {
    let tree = KdTree::build(&b.vertices);
    a.vertices
        .par_iter()
        .map(|v| tree.nearest(v).unwrap().1.sqrt())
        .collect()
}

/// Point-to-point geometric error in millimeters: align the reconstruction
/// onto the truth with [`align_7dof`], then measure nearest-vertex
/// distances.
pub fn point_to_point_error(
    reconstructed: &FaceMesh,
    truth: &FaceMesh,
) -> Result<ErrorReport, EvalError> {
    if reconstructed.vertices.is_empty() || truth.vertices.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    let sim = align_7dof(reconstructed, truth, None)?;
    let aligned = FaceMesh {
        vertices: reconstructed
            .vertices
            .iter()
            .map(|v| sim.apply(v))
            .collect(),
        triangles: reconstructed.triangles.clone(),
        albedo: reconstructed.albedo.clone(),
    };
    let distances = nearest_vertex_distances(&aligned, truth);
    let (mean, median, rms) = statistics(&distances);
    Ok(ErrorReport {
        mean,
        median,
        rms,
        units: Units::Millimeters,
        map: ErrorMap::Vertices(distances),
    })
}

/// Jet-style colormap for error visualization (blue -> cyan -> yellow -> red).
fn jet(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let r = (1.5 - (4.0 * t - 3.0).abs()).clamp(0.0, 1.0);
    let g = (1.5 - (4.0 * t - 2.0).abs()).clamp(0.0, 1.0);
    let b = (1.5 - (4.0 * t - 1.0).abs()).clamp(0.0, 1.0);
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Write a pixel error map as single-channel PFM (0 outside the mask).
pub fn write_error_map_pfm(path: &Path, map: &PixelErrorMap) -> Result<(), EvalError> {
    let values: Vec<f64> = map
        .values
        .iter()
        .zip(&map.mask)
        .map(|(v, m)| if *m { *v } else { 0.0 })
        .collect();
    crate::render::write_pfm(
        path,
        &crate::render::PfmImage::from_gray(map.width, map.height, &values),
    )?;
    Ok(())
}

/// Write a color-coded PNG of an error map with the given scale bounds
/// (values at or below `lo` map to blue, at or above `hi` to red; pixels
/// outside the mask are black).
pub fn write_error_map_png(
    path: &Path,
    map: &PixelErrorMap,
    lo: f64,
    hi: f64,
) -> Result<(), EvalError> {
    let span = (hi - lo).max(1e-30);
    let mut buf =
        image::ImageBuffer::<image::Rgb<u8>, Vec<u8>>::new(map.width as u32, map.height as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let i = y as usize * map.width + x as usize;
        if map.mask[i] {
            *px = image::Rgb(jet((map.values[i] - lo) / span));
        }
    }
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_map(n: usize, normal: Vec3) -> NormalMap {
        NormalMap {
            width: n,
            height: n,
            normals: vec![normal; n * n],
            mask: vec![true; n * n],
        }
    }

    #[test]
    fn angular_error_identical_maps_is_zero() {
        let m = flat_map(8, Vec3::new(0.0, 0.0, -1.0));
        let r = angular_error(&m, &m).unwrap();
        assert_relative_eq!(r.mean, 0.0);
        assert_relative_eq!(r.median, 0.0);
        assert_relative_eq!(r.rms, 0.0);
    }

    #[test]
    fn angular_error_orthogonal_maps_is_ninety() {
        let a = flat_map(4, Vec3::new(0.0, 0.0, 1.0));
        let b = flat_map(4, Vec3::new(0.0, 1.0, 0.0));
        let r = angular_error(&a, &b).unwrap();
        assert_relative_eq!(r.mean, 90.0, epsilon = 1e-12);
    }

    #[test]
    fn angular_error_of_constructed_rotation_is_exact() {
        // Rotate every normal by exactly 5 degrees about a fixed axis.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let mut normals = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let tilt = 0.5 * rng.random::<f64>();
            let az = std::f64::consts::TAU * rng.random::<f64>();
            normals.push(Vec3::new(
                tilt.sin() * az.cos(),
                tilt.sin() * az.sin(),
                -tilt.cos(),
            ));
        }
        let truth = NormalMap {
            width: n,
            height: n,
            normals: normals.clone(),
            mask: vec![true; n * n],
        };
        let angle = 5.0_f64.to_radians();
        // Axis orthogonal to each normal so the rotation moves it the full
        // 5 degrees: use axis = normalize(n x e) with e not parallel to n.
        let rotated: Vec<Vec3> = normals
            .iter()
            .map(|v| {
                let helper = if v.x.abs() < 0.9 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(0.0, 1.0, 0.0)
                };
                let axis = v.cross(&helper).normalize();
                // Rodrigues rotation.
                v * angle.cos() + axis.cross(v) * angle.sin()
                    + axis * axis.dot(v) * (1.0 - angle.cos())
            })
            .collect();
        let est = NormalMap {
            width: n,
            height: n,
            normals: rotated,
            mask: vec![true; n * n],
        };
        let r = angular_error(&est, &truth).unwrap();
        assert!((r.mean - 5.0).abs() < 1e-6, "mean {}", r.mean);
    }

    #[test]
    fn angular_error_is_symmetric() {
        let a = flat_map(4, Vec3::new(0.0, 0.0, -1.0));
        let b = flat_map(4, Vec3::new(0.0, 0.6, -0.8));
        let r1 = angular_error(&a, &b).unwrap();
        let r2 = angular_error(&b, &a).unwrap();
        assert_relative_eq!(r1.mean, r2.mean);
    }

    #[test]
    fn empty_mask_intersection_is_error() {
        let mut a = flat_map(4, Vec3::new(0.0, 0.0, -1.0));
        let b = flat_map(4, Vec3::new(0.0, 0.0, -1.0));
        a.mask.fill(false);
        assert!(matches!(angular_error(&a, &b), Err(EvalError::EmptyMask)));
    }

    #[test]
    fn cosine_error_reference_values() {
        let a = flat_map(4, Vec3::new(0.0, 0.0, -1.0));
        assert_relative_eq!(cosine_normal_error(&a, &a).unwrap(), 0.0);
        let anti = flat_map(4, Vec3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(cosine_normal_error(&a, &anti).unwrap(), 2.0);
        let ortho = flat_map(4, Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(cosine_normal_error(&a, &ortho).unwrap(), 1.0);
    }

    /// Jittered grid: guaranteed minimum spacing so nearest-vertex matching
    /// is unambiguous under small offsets.
    fn structured_cloud_mesh(seed: u64, side: usize) -> FaceMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = Vec::new();
        for gz in 0..side {
            for gy in 0..side {
                for gx in 0..side {
                    vertices.push(Vec3::new(
                        15.0 * gx as f64 + 3.0 * rng.random::<f64>(),
                        15.0 * gy as f64 + 3.0 * rng.random::<f64>() - 40.0,
                        15.0 * gz as f64 + 3.0 * rng.random::<f64>() + 500.0,
                    ));
                }
            }
        }
        FaceMesh {
            albedo: vec![Vec3::repeat(1.0); vertices.len()],
            triangles: vec![],
            vertices,
        }
    }

    fn random_cloud_mesh(seed: u64, n: usize) -> FaceMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vertices: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    100.0 * rng.random::<f64>(),
                    80.0 * rng.random::<f64>() - 40.0,
                    60.0 * rng.random::<f64>() + 500.0,
                )
            })
            .collect();
        FaceMesh {
            albedo: vec![Vec3::repeat(1.0); vertices.len()],
            triangles: vec![],
            vertices,
        }
    }

    #[test]
    fn align_identity_when_target_equals_source() {
        let mesh = random_cloud_mesh(1, 60);
        let sim = align_7dof(&mesh, &mesh, None).unwrap();
        assert!((sim.scale - 1.0).abs() < 1e-9);
        assert!((sim.rotation - Mat3::identity()).norm() < 1e-9);
        assert!(sim.translation.norm() < 1e-9);
    }

    #[test]
    fn align_recovers_known_similarity_with_correspondences() {
        let source = random_cloud_mesh(2, 40);
        let pose = Pose {
            pitch: 0.3,
            yaw: -0.5,
            roll: 0.2,
            translation: Vec3::new(12.0, -8.0, 40.0),
        };
        let r = pose.rotation();
        let s = 1.37;
        let target = FaceMesh {
            vertices: source
                .vertices
                .iter()
                .map(|v| s * (r * v) + pose.translation)
                .collect(),
            triangles: vec![],
            albedo: source.albedo.clone(),
        };
        let pairs: Vec<(usize, usize)> = (0..source.vertices.len()).map(|i| (i, i)).collect();
        let sim = align_7dof(&source, &target, Some(&pairs)).unwrap();
        assert!((sim.scale - s).abs() < 1e-9);
        assert!((sim.rotation - r).norm() < 1e-9);
        assert!((sim.translation - pose.translation).norm() < 1e-9);
    }

    #[test]
    fn align_never_returns_a_reflection() {
        let source = random_cloud_mesh(3, 50);
        let target = FaceMesh {
            vertices: source
                .vertices
                .iter()
                .map(|v| Vec3::new(-v.x, v.y, v.z))
                .collect(),
            triangles: vec![],
            albedo: source.albedo.clone(),
        };
        let pairs: Vec<(usize, usize)> = (0..source.vertices.len()).map(|i| (i, i)).collect();
        let sim = align_7dof(&source, &target, Some(&pairs)).unwrap();
        assert!((sim.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!((sim.rotation.transpose() * sim.rotation - Mat3::identity()).norm() < 1e-12);
        // Residual must be nonzero: a proper rotation cannot realize a
        // mirror image.
        let residual: f64 = source
            .vertices
            .iter()
            .zip(&target.vertices)
            .map(|(s, t)| (sim.apply(s) - t).norm_squared())
            .sum();
        assert!(residual > 1.0);
    }

    #[test]
    fn collinear_correspondences_are_degenerate() {
        let source = FaceMesh {
            vertices: (0..10)
                .map(|i| Vec3::new(i as f64, 2.0 * i as f64, 3.0 * i as f64))
                .collect(),
            triangles: vec![],
            albedo: vec![Vec3::repeat(1.0); 10],
        };
        let pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, i)).collect();
        assert!(matches!(
            align_7dof(&source, &source, Some(&pairs)),
            Err(EvalError::DegenerateCorrespondences)
        ));
    }

    #[test]
    fn point_to_point_self_is_zero_and_offset_is_absorbed() {
        let mesh = structured_cloud_mesh(4, 5);
        let r = point_to_point_error(&mesh, &mesh).unwrap();
        assert!(r.mean < 1e-9);
        let shifted = FaceMesh {
            vertices: mesh
                .vertices
                .iter()
                .map(|v| v + Vec3::new(0.0, 0.0, 3.0))
                .collect(),
            triangles: vec![],
            albedo: mesh.albedo.clone(),
        };
        let r = point_to_point_error(&shifted, &mesh).unwrap();
        assert!(r.mean <= 1e-6, "offset not absorbed: {}", r.mean);
    }

    #[test]
    fn cube_inflation_distance_without_alignment() {
        // Unit cube corners vs the same corners inflated 1% about the
        // center: every corner moves 0.01 * sqrt(3)/2.
        let corners: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    (i & 1) as f64 - 0.5,
                    ((i >> 1) & 1) as f64 - 0.5,
                    ((i >> 2) & 1) as f64 - 0.5,
                )
            })
            .collect();
        let cube = FaceMesh {
            vertices: corners.clone(),
            triangles: vec![],
            albedo: vec![Vec3::repeat(1.0); 8],
        };
        let inflated = FaceMesh {
            vertices: corners.iter().map(|v| v * 1.01).collect(),
            triangles: vec![],
            albedo: vec![Vec3::repeat(1.0); 8],
        };
        let distances = nearest_vertex_distances(&cube, &inflated);
        let expected = 0.01 * (3.0_f64.sqrt() / 2.0);
        for d in distances {
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn point_to_point_invariant_to_preapplied_similarity() {
        let mesh = structured_cloud_mesh(5, 5);
        let r_base = point_to_point_error(&mesh, &mesh).unwrap();
        // Small rotation: nearest-vertex matching stays exact on the
        // 15 mm grid after the centroid/scale initialization.
        let pose = Pose {
            pitch: -0.05,
            yaw: 0.06,
            roll: 0.04,
            translation: Vec3::new(5.0, 7.0, -9.0),
        };
        let rot = pose.rotation();
        let transformed = FaceMesh {
            vertices: mesh
                .vertices
                .iter()
                .map(|v| 0.95 * (rot * v) + pose.translation)
                .collect(),
            triangles: vec![],
            albedo: mesh.albedo.clone(),
        };
        let r_t = point_to_point_error(&transformed, &mesh).unwrap();
        assert!(
            (r_t.mean - r_base.mean).abs() <= 1e-6,
            "base {} vs transformed {}",
            r_base.mean,
            r_t.mean
        );
    }

    #[test]
    fn error_report_serializes_with_units() {
        let m = flat_map(2, Vec3::new(0.0, 0.0, -1.0));
        let r = angular_error(&m, &m).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"units\":\"degrees\""));
        assert!(json.contains("\"mean\""));
    }

    #[test]
    fn jet_endpoints() {
        assert_eq!(jet(0.0), [0, 0, 127]); // dark blue end
        assert_eq!(jet(1.0), [127, 0, 0]); // dark red end
        assert_eq!(jet(0.5)[1], 255); // green mid
    }
}
