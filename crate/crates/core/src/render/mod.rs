//! Forward Lambertian imaging under near point lights, the half-space
//! shadow filter, and observed-intensity sampling at projected centroids.
//!
//! Radiometry is linear throughout: no gamma, no exposure. A point at V
//! with unit normal N and albedo rho lit by a light at P with illumination
//! beta receives `rho * max(N . beta (P - V) / |P - V|^3, 0)` per channel.

mod pfm;
mod preview;
pub mod raster;

pub use pfm::{read_pfm, write_pfm, PfmError, PfmImage};
pub use preview::{write_png_preview, write_png_preview_scaled};

use crate::geometry::{
    triangle_normals_and_centroids, CameraIntrinsics, FaceMesh, GeometryError, PointLight, Pose,
};
use crate::{Vec2, Vec3};
use rayon::prelude::*;
use thiserror::Error;

/// Distance below which a surface point counts as coincident with a light.
pub const LIGHT_SINGULARITY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("surface point coincides with the light position (distance {0} mm)")]
    LightSingularity(f64),
    #[error("normal is not unit length (norm = {0})")]
    NonUnitNormal(f64),
    #[error("observation image has an empty mask")]
    EmptyMask,
}

/// Linear-RGB floating-point image with a coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    /// Row-major linear RGB, non-negative.
    pub pixels: Vec<Vec3>,
    /// Row-major coverage flags, same dimensions as `pixels`.
    pub mask: Vec<bool>,
}

impl RadianceImage {
    pub fn new_black(width: usize, height: usize) -> Self {
        RadianceImage {
            width,
            height,
            pixels: vec![Vec3::zeros(); width * height],
            mask: vec![false; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec3 {
        self.pixels[self.idx(x, y)]
    }

    pub fn masked(&self, x: usize, y: usize) -> bool {
        self.mask[self.idx(x, y)]
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Largest channel value over the image.
    pub fn peak(&self) -> f64 {
        self.pixels
            .iter()
            .map(|p| p.x.max(p.y).max(p.z))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.pixels.len() != self.width * self.height || self.mask.len() != self.pixels.len() {
            return Err(RenderError::Geometry(GeometryError::InvalidIntrinsics(
                "image buffer dimensions mismatch".into(),
            )));
        }
        if self
            .pixels
            .iter()
            .any(|p| p.iter().any(|c| *c < 0.0 || !c.is_finite()))
        {
            return Err(RenderError::Geometry(GeometryError::InvalidIntrinsics(
                "negative or non-finite radiance".into(),
            )));
        }
        Ok(())
    }
}

/// Per-triangle sets of available (unshadowed) light indices.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilitySets {
    pub sets: Vec<Vec<usize>>,
}

impl VisibilitySets {
    pub fn available(&self, triangle: usize) -> &[usize] {
        &self.sets[triangle]
    }
}

/// Lambertian point shading under one near light.
///
/// Backfacing geometry clamps to black; a surface point closer than
/// [`LIGHT_SINGULARITY_EPS`] to the light is an error.
pub fn shade_point(
    position: &Vec3,
    normal: &Vec3,
    albedo: &Vec3,
    light: &PointLight,
) -> Result<Vec3, RenderError> {
    let norm = normal.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(RenderError::NonUnitNormal(norm));
    }
    let d = light.position - position;
    let dist = d.norm();
    if dist < LIGHT_SINGULARITY_EPS {
        return Err(RenderError::LightSingularity(dist));
    }
    let shading = (normal.dot(&d) * light.illumination / (dist * dist * dist)).max(0.0);
    Ok(albedo * shading)
}

/// Available-light filter: light j is usable for triangle i iff
/// `N_i . (P_j - C_i) > 0` (strict), with N, C the triangle normal and
/// centroid.
pub fn available_lights(
    mesh: &FaceMesh,
    lights: &[PointLight],
) -> Result<VisibilitySets, GeometryError> {
    let (normals, centroids) = triangle_normals_and_centroids(mesh)?;
    let sets = normals
        .iter()
        .zip(&centroids)
        .map(|(n, c)| {
            lights
                .iter()
                .enumerate()
                .filter(|(_, l)| n.dot(&(l.position - c)) > 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(VisibilitySets { sets })
}

/// How surface attributes are evaluated per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shading {
    /// Barycentric interpolation of position, vertex normal and albedo.
    #[default]
    Smooth,
    /// One shading evaluation per triangle (centroid, flat normal, mean
    /// albedo) painted over all its pixels; this is the exact forward model
    /// of the per-triangle optimization.
    PerFaceConstant,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    pub shading: Shading,
    /// Ray-cast occlusion toward the light (the half-space filter is the
    /// cheap alternative used by the optimization).
    pub cast_shadows: bool,
}

/// Non-fatal conditions reported alongside a rendered image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStatus {
    Ok,
    /// Every triangle was behind the camera; the mask is empty.
    MeshBehindCamera,
}

#[derive(Debug)]
pub struct Rendered {
    pub image: RadianceImage,
    pub status: RenderStatus,
}

/// Render one light's image by z-buffer rasterization.
pub fn render(
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
    light: &PointLight,
    options: &RenderOptions,
) -> Result<Rendered, RenderError> {
    cam.validate()?;
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    if buf.is_empty() && buf.clipped_triangles == mesh.triangles.len() {
        return Ok(Rendered {
            image: RadianceImage::new_black(cam.width, cam.height),
            status: RenderStatus::MeshBehindCamera,
        });
    }

    let vertex_normals = posed.vertex_normals();
    let (tri_normals, tri_centroids) = triangle_normals_and_centroids(&posed)?;
    let tri_albedos = posed.triangle_albedos();

    // Precompute per-triangle radiance for the per-face mode.
    let face_radiance: Vec<Vec3> = match options.shading {
        Shading::PerFaceConstant => tri_centroids
            .iter()
            .zip(&tri_normals)
            .zip(&tri_albedos)
            .map(|((c, n), a)| shade_point(c, n, a, light))
            .collect::<Result<_, _>>()?,
        Shading::Smooth => Vec::new(),
    };

    let shade_fragment = |frag: &raster::Fragment| -> Result<Vec3, RenderError> {
        let tri = posed.triangles[frag.triangle];
        let position = frag.bary[0] * posed.vertices[tri[0]]
            + frag.bary[1] * posed.vertices[tri[1]]
            + frag.bary[2] * posed.vertices[tri[2]];
        let value = match options.shading {
            Shading::Smooth => {
                let normal = (frag.bary[0] * vertex_normals[tri[0]]
                    + frag.bary[1] * vertex_normals[tri[1]]
                    + frag.bary[2] * vertex_normals[tri[2]])
                    .normalize();
                let albedo = frag.bary[0] * posed.albedo[tri[0]]
                    + frag.bary[1] * posed.albedo[tri[1]]
                    + frag.bary[2] * posed.albedo[tri[2]];
                shade_point(&position, &normal, &albedo, light)?
            }
            Shading::PerFaceConstant => face_radiance[frag.triangle],
        };
        if options.cast_shadows && occluded(&posed, &position, &light.position, frag.triangle) {
            return Ok(Vec3::zeros());
        }
        Ok(value)
    };

    let shaded: Vec<Option<Result<Vec3, RenderError>>> = buf
        .fragments
        .par_iter()
        .map(|slot| slot.as_ref().map(shade_fragment))
        .collect();

    let mut image = RadianceImage::new_black(cam.width, cam.height);
    for (i, s) in shaded.into_iter().enumerate() {
        if let Some(value) = s {
            image.pixels[i] = value?;
            image.mask[i] = true;
        }
    }
    Ok(Rendered {
        image,
        status: RenderStatus::Ok,
    })
}

/// Segment-vs-mesh occlusion test (brute force over triangles).
fn occluded(mesh: &FaceMesh, from: &Vec3, to: &Vec3, skip_triangle: usize) -> bool {
    let dir = to - from;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if t == skip_triangle {
            continue;
        }
        if let Some(hit) = ray_triangle(
            from,
            &dir,
            &mesh.vertices[tri[0]],
            &mesh.vertices[tri[1]],
            &mesh.vertices[tri[2]],
        ) {
            if hit > 1e-6 && hit < 1.0 - 1e-6 {
                return true;
            }
        }
    }
    false
}

/// Moeller-Trumbore; returns the ray parameter of the hit if any.
fn ray_triangle(origin: &Vec3, dir: &Vec3, v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv_det)
}

/// Bilinear sample at continuous pixel coordinates.
///
/// Only the stencil pixels with nonzero weight participate; every one of
/// them must be inside the image and masked, otherwise the sample is
/// unavailable.
pub fn bilinear_sample(image: &RadianceImage, u: f64, v: f64) -> Option<Vec3> {
    let (w, h) = (image.width, image.height);
    if !(0.0..=(w - 1) as f64).contains(&u) || !(0.0..=(h - 1) as f64).contains(&v) {
        return None;
    }
    let x0 = u.floor() as usize;
    let y0 = v.floor() as usize;
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let mut acc = Vec3::zeros();
    for (dx, dy, weight) in [
        (0usize, 0usize, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        if weight == 0.0 {
            continue;
        }
        let (x, y) = (x0 + dx, y0 + dy);
        if x >= w || y >= h || !image.masked(x, y) {
            return None;
        }
        acc += weight * image.pixel(x, y);
    }
    Some(acc)
}

/// Restrict an image's mask to single-triangle interiors: a pixel survives
/// iff its whole 3x3 neighborhood is covered by the same triangle.
///
/// Together with [`Shading::PerFaceConstant`] this makes every bilinear
/// centroid sample exactly equal to the per-triangle forward model, which
/// is what calibration and refinement fixed-point checks need.
pub fn erode_mask_to_face_interiors(
    image: &RadianceImage,
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> RadianceImage {
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    let id_at = |x: usize, y: usize| buf.get(x, y).as_ref().map(|f| f.triangle);
    let mut out = image.clone();
    for y in 0..image.height {
        for x in 0..image.width {
            let i = y * image.width + x;
            if !image.mask[i] {
                continue;
            }
            let keep = x > 0
                && y > 0
                && x + 1 < image.width
                && y + 1 < image.height
                && id_at(x, y).is_some_and(|center| {
                    (-1i64..=1).all(|dy| {
                        (-1i64..=1).all(|dx| {
                            id_at((x as i64 + dx) as usize, (y as i64 + dy) as usize)
                                == Some(center)
                        })
                    })
                });
            out.mask[i] = keep;
        }
    }
    out
}

/// Observed intensity per triangle: project the centroid and bilinearly
/// interpolate the four nearest pixels. `None` marks triangles that are
/// behind the camera or whose sample stencil leaves the mask.
pub fn sample_observed_intensity(
    image: &RadianceImage,
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<Vec<Option<Vec3>>, RenderError> {
    if image.mask.iter().all(|m| !m) {
        return Err(RenderError::EmptyMask);
    }
    let posed = mesh.transformed(pose);
    let (_, centroids) = triangle_normals_and_centroids(&posed)?;
    Ok(centroids
        .iter()
        .map(|c| {
            if c.z <= 0.0 {
                return None;
            }
            let q = Vec2::new(cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy);
            bilinear_sample(image, q.x, q.y)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn white_plane(z: f64, half: f64) -> FaceMesh {
        FaceMesh {
            vertices: vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(-half, half, z),
                Vec3::new(half, half, z),
            ],
            triangles: vec![[0, 2, 1], [1, 2, 3]],
            albedo: vec![Vec3::repeat(1.0); 4],
        }
    }

    fn test_cam(n: usize) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: n as f64,
            fy: n as f64,
            cx: n as f64 / 2.0,
            cy: n as f64 / 2.0,
            width: n,
            height: n,
        }
    }

    #[test]
    fn shade_point_unit_distance() {
        let i = shade_point(
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::repeat(1.0),
            &PointLight::new(Vec3::new(0.0, 0.0, 1.0), 2.0),
        )
        .unwrap();
        assert_relative_eq!(i, Vec3::repeat(2.0));
    }

    #[test]
    fn shade_point_inverse_square() {
        let i = shade_point(
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::repeat(1.0),
            &PointLight::new(Vec3::new(0.0, 0.0, 2.0), 2.0),
        )
        .unwrap();
        assert_relative_eq!(i, Vec3::repeat(0.5));
    }

    #[test]
    fn shade_point_backfacing_is_black() {
        let i = shade_point(
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::repeat(1.0),
            &PointLight::new(Vec3::new(0.0, 0.0, -1.0), 2.0),
        )
        .unwrap();
        assert_relative_eq!(i, Vec3::zeros());
    }

    #[test]
    fn shade_point_singularity_guard() {
        let err = shade_point(
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::repeat(1.0),
            &PointLight::new(Vec3::new(0.0, 0.0, 1e-12), 1.0),
        );
        assert!(matches!(err, Err(RenderError::LightSingularity(_))));
    }

    #[test]
    fn available_lights_upward_triangle() {
        let mesh = FaceMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2]],
            albedo: vec![Vec3::repeat(1.0); 3],
        };
        let above = PointLight::new(Vec3::new(0.0, 0.0, 5.0), 1.0);
        let below = PointLight::new(Vec3::new(0.0, 0.0, -5.0), 1.0);
        // Light exactly in the triangle plane: excluded by the strict filter.
        let in_plane = PointLight::new(Vec3::new(5.0, 5.0, 0.0), 1.0);
        let vis = available_lights(&mesh, &[above, below, in_plane]).unwrap();
        assert_eq!(vis.available(0), &[0]);
    }

    #[test]
    fn available_lights_matches_brute_force_on_sphere() {
        let mesh = crate::geometry::test_icosphere(1);
        let lights = [
            PointLight::new(Vec3::new(0.0, 0.0, 3.0), 1.0),
            PointLight::new(Vec3::new(2.0, -1.0, 0.5), 1.0),
        ];
        let vis = available_lights(&mesh, &lights).unwrap();
        let (normals, centroids) = triangle_normals_and_centroids(&mesh).unwrap();
        for t in 0..mesh.triangles.len() {
            let expected: Vec<usize> = lights
                .iter()
                .enumerate()
                .filter(|(_, l)| normals[t].dot(&(l.position - centroids[t])) > 0.0)
                .map(|(j, _)| j)
                .collect();
            assert_eq!(vis.available(t), expected.as_slice(), "triangle {t}");
        }
    }

    #[test]
    fn render_center_brighter_than_corners() {
        let mesh = white_plane(1000.0, 400.0);
        let light = PointLight::new(Vec3::zeros(), 1e6);
        let out = render(
            &mesh,
            &Pose::identity(),
            &test_cam(64),
            &light,
            &RenderOptions::default(),
        )
        .unwrap();
        assert_eq!(out.status, RenderStatus::Ok);
        let img = out.image;
        let center = img.pixel(32, 32).x;
        for (x, y) in [(18usize, 18usize), (45, 18), (18, 45), (45, 45)] {
            assert!(img.masked(x, y));
            assert!(
                center >= img.pixel(x, y).x,
                "corner ({x},{y}) brighter than center"
            );
        }
        assert!(center > 0.0);
    }

    #[test]
    fn render_is_linear_in_illumination() {
        let mesh = white_plane(900.0, 200.0);
        let cam = test_cam(48);
        let pose = Pose::identity();
        let l1 = PointLight::new(Vec3::new(100.0, -50.0, 0.0), 5e5);
        let l2 = PointLight::new(Vec3::new(100.0, -50.0, 0.0), 1e6);
        let a = render(&mesh, &pose, &cam, &l1, &RenderOptions::default())
            .unwrap()
            .image;
        let b = render(&mesh, &pose, &cam, &l2, &RenderOptions::default())
            .unwrap()
            .image;
        for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
            assert!((2.0 * pa - pb).norm() <= 1e-12 * pb.norm().max(1.0));
        }
    }

    #[test]
    fn render_behind_camera_warns_with_empty_mask() {
        let mesh = white_plane(-500.0, 100.0);
        let out = render(
            &mesh,
            &Pose::identity(),
            &test_cam(32),
            &PointLight::new(Vec3::zeros(), 1.0),
            &RenderOptions::default(),
        )
        .unwrap();
        assert_eq!(out.status, RenderStatus::MeshBehindCamera);
        assert_eq!(out.image.mask_count(), 0);
    }

    #[test]
    fn single_triangle_matches_reference_shader() {
        // Oracle: per pixel, intersect the viewing ray with the triangle
        // plane analytically, interpolate attributes in 3D, and shade.
        let mesh = FaceMesh {
            vertices: vec![
                Vec3::new(-350.0, -300.0, 950.0),
                Vec3::new(400.0, -250.0, 1100.0),
                Vec3::new(-120.0, 450.0, 1000.0),
            ],
            triangles: vec![[0, 1, 2]],
            albedo: vec![
                Vec3::new(0.9, 0.4, 0.2),
                Vec3::new(0.2, 0.8, 0.5),
                Vec3::new(0.3, 0.3, 0.9),
            ],
        };
        let cam = test_cam(8);
        let light = PointLight::new(Vec3::new(50.0, -200.0, 100.0), 8e5);
        let out = render(
            &mesh,
            &Pose::identity(),
            &cam,
            &light,
            &RenderOptions::default(),
        )
        .unwrap()
        .image;

        let v = &mesh.vertices;
        let n_flat = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let mut covered = 0;
        for y in 0..8 {
            for x in 0..8 {
                if !out.masked(x, y) {
                    continue;
                }
                covered += 1;
                let dir = Vec3::new(
                    (x as f64 - cam.cx) / cam.fx,
                    (y as f64 - cam.cy) / cam.fy,
                    1.0,
                );
                let t = n_flat.dot(&v[0]) / n_flat.dot(&dir);
                let p = t * dir;
                // 3D barycentric coordinates via projected areas.
                let area = n_flat.norm_squared();
                let b0 = (v[1] - p).cross(&(v[2] - p)).dot(&n_flat) / area;
                let b1 = (v[2] - p).cross(&(v[0] - p)).dot(&n_flat) / area;
                let b2 = 1.0 - b0 - b1;
                // Single triangle: vertex normals all equal the face normal.
                let albedo = b0 * mesh.albedo[0] + b1 * mesh.albedo[1] + b2 * mesh.albedo[2];
                let expected = shade_point(&p, &n_flat.normalize(), &albedo, &light).unwrap();
                let got = out.pixel(x, y);
                assert!(
                    (got - expected).norm() < 1e-9,
                    "pixel ({x},{y}): {got:?} vs {expected:?}"
                );
            }
        }
        assert!(covered > 4, "test should cover several pixels");
    }

    #[test]
    fn cast_shadow_blocks_light() {
        // Occluder between the plane and the light darkens the blocked
        // region only when shadows are enabled.
        let mut mesh = white_plane(1000.0, 300.0);
        let base = mesh.vertices.len();
        mesh.vertices.extend([
            Vec3::new(-80.0, -80.0, 500.0),
            Vec3::new(80.0, -80.0, 500.0),
            Vec3::new(0.0, 80.0, 500.0),
        ]);
        mesh.albedo.extend([Vec3::repeat(1.0); 3]);
        mesh.triangles.push([base, base + 2, base + 1]);
        let cam = test_cam(64);
        // Off-axis light so the cast shadow lands beside the occluder's own
        // screen footprint.
        let light = PointLight::new(Vec3::new(300.0, 0.0, 0.0), 1e6);
        let lit = render(
            &mesh,
            &Pose::identity(),
            &cam,
            &light,
            &RenderOptions::default(),
        )
        .unwrap()
        .image;
        let shadowed = render(
            &mesh,
            &Pose::identity(),
            &cam,
            &light,
            &RenderOptions {
                cast_shadows: true,
                ..RenderOptions::default()
            },
        )
        .unwrap()
        .image;
        let mut found_shadowed_pixel = false;
        for i in 0..lit.pixels.len() {
            if lit.pixels[i].x > 0.0 && shadowed.pixels[i].x == 0.0 {
                found_shadowed_pixel = true;
            }
            assert!(shadowed.pixels[i].x <= lit.pixels[i].x + 1e-15);
        }
        assert!(found_shadowed_pixel, "expected some cast shadow");
    }

    #[test]
    fn sample_constant_image_returns_constant() {
        let mesh = white_plane(1000.0, 200.0);
        let cam = test_cam(64);
        let mut img = RadianceImage::new_black(64, 64);
        for i in 0..img.pixels.len() {
            img.pixels[i] = Vec3::new(0.25, 0.5, 0.75);
            img.mask[i] = true;
        }
        let samples = sample_observed_intensity(&img, &mesh, &Pose::identity(), &cam).unwrap();
        for s in samples {
            let s = s.expect("triangle observed");
            assert_relative_eq!(s, Vec3::new(0.25, 0.5, 0.75), epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_at_exact_pixel_center_reads_that_pixel() {
        let mut img = RadianceImage::new_black(8, 8);
        let idx = 3 * 8 + 5;
        img.pixels[idx] = Vec3::new(0.7, 0.1, 0.3);
        img.mask[idx] = true;
        // Neighbors deliberately unmasked: zero-weight pixels must not count.
        let s = bilinear_sample(&img, 5.0, 3.0).unwrap();
        assert_relative_eq!(s, Vec3::new(0.7, 0.1, 0.3));
    }

    #[test]
    fn bilinear_reproduces_linear_ramp() {
        let mut img = RadianceImage::new_black(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                let i = y * 16 + x;
                img.pixels[i] = Vec3::repeat(0.1 + 0.03 * x as f64 + 0.01 * y as f64);
                img.mask[i] = true;
            }
        }
        let (u, v) = (7.37, 9.81);
        let s = bilinear_sample(&img, u, v).unwrap();
        let expected = 0.1 + 0.03 * u + 0.01 * v;
        assert!((s.x - expected).abs() < 1e-6);
    }

    #[test]
    fn behind_camera_centroid_is_unobserved_not_fatal() {
        let mut mesh = white_plane(1000.0, 200.0);
        mesh.vertices.extend([
            Vec3::new(0.0, 0.0, -500.0),
            Vec3::new(10.0, 0.0, -500.0),
            Vec3::new(0.0, 10.0, -500.0),
        ]);
        mesh.albedo.extend([Vec3::repeat(1.0); 3]);
        mesh.triangles.push([4, 5, 6]);
        let mut img = RadianceImage::new_black(64, 64);
        img.mask.fill(true);
        let samples =
            sample_observed_intensity(&img, &mesh, &Pose::identity(), &test_cam(64)).unwrap();
        assert!(samples[2].is_none());
        assert!(samples[0].is_some());
    }

    proptest::proptest! {
        #[test]
        fn rendered_pixels_are_non_negative(
            lx in -800.0f64..800.0,
            ly in -800.0f64..800.0,
            lz in -400.0f64..1400.0,
            beta in 1.0f64..1e7,
        ) {
            let mesh = white_plane(1000.0, 300.0);
            let light = PointLight::new(Vec3::new(lx, ly, lz), beta);
            let out = render(
                &mesh,
                &Pose::identity(),
                &test_cam(24),
                &light,
                &RenderOptions::default(),
            )
            .unwrap()
            .image;
            out.validate().unwrap();
        }
    }

    #[test]
    fn colocated_lights_add_linearly() {
        let mesh = white_plane(800.0, 150.0);
        let cam = test_cam(32);
        let pose = Pose::identity();
        let p = Vec3::new(50.0, 20.0, 10.0);
        let a = render(
            &mesh,
            &pose,
            &cam,
            &PointLight::new(p, 3e5),
            &RenderOptions::default(),
        )
        .unwrap()
        .image;
        let b = render(
            &mesh,
            &pose,
            &cam,
            &PointLight::new(p, 7e5),
            &RenderOptions::default(),
        )
        .unwrap()
        .image;
        let sum = render(
            &mesh,
            &pose,
            &cam,
            &PointLight::new(p, 1e6),
            &RenderOptions::default(),
        )
        .unwrap()
        .image;
        for i in 0..sum.pixels.len() {
            assert!((a.pixels[i] + b.pixels[i] - sum.pixels[i]).norm() < 1e-9);
        }
    }
}
