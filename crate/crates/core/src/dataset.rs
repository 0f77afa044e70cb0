//! Synthetic dataset generation: sample face-model coefficients, pose and
//! lights, render one image per light, and persist records with
//! ground-truth meshes, normal maps and height fields.
//!
//! Everything is a deterministic function of (model, spec): the same seed
//! reproduces byte-identical files.

use crate::geometry::{
    synthesize_face, write_obj, CameraIntrinsics, FaceMesh, GeometryError, LinearFaceModel,
    PointLight, Pose, ALBEDO_DIM, EXP_DIM, ID_DIM,
};
use crate::integrate::{rasterize_height_field, HeightField, IntegrateError, NormalMap};
use crate::numeric::fnv1a;
use crate::render::{
    raster, render, PfmImage, RadianceImage, RenderError, RenderOptions, RenderStatus, Shading,
};
use crate::Vec3;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Obj(#[from] crate::geometry::ObjError),
    #[error(transparent)]
    Pfm(#[from] crate::render::PfmError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("proxy topology does not match the model")]
    TopologyMismatch,
    #[error("sampled face stayed behind the camera after {0} attempts")]
    BehindCamera(usize),
    #[error("record `{0}` not found")]
    UnknownRecord(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sampling knobs; a record is a deterministic function of (model, spec).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SampleSpec {
    pub seed: u64,
    pub n_lights: usize,
    /// Standard deviations of the coefficient blocks (unit-normal PCA
    /// convention: the bases carry the per-mode scale).
    pub sigma_id: f64,
    pub sigma_exp: f64,
    pub sigma_albedo: f64,
    /// Uniform pose jitter: +- radians per Euler angle, +- mm per axis.
    pub pose_jitter_rad: f64,
    pub pose_jitter_mm: f64,
    /// Uniform light jitter per axis as a fraction of the rig distance.
    pub light_jitter_frac: f64,
    /// Uniform illumination jitter as a fraction of the base value.
    pub beta_jitter_frac: f64,
    /// Procedural high-frequency detail added to the ground truth along
    /// vertex normals.
    pub bump_amplitude_mm: f64,
    pub bump_cycles: f64,
    pub image_size: usize,
    /// Distance of the face center and the light rig from the camera.
    pub base_distance_mm: f64,
    pub cast_shadows: bool,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            seed: 0,
            n_lights: 3,
            sigma_id: 1.0,
            sigma_exp: 1.0,
            sigma_albedo: 1.0,
            pose_jitter_rad: 0.04,
            pose_jitter_mm: 12.0,
            light_jitter_frac: 0.1,
            beta_jitter_frac: 0.2,
            bump_amplitude_mm: 0.5,
            bump_cycles: 7.0,
            image_size: 128,
            base_distance_mm: 600.0,
            cast_shadows: false,
        }
    }
}

impl SampleSpec {
    /// Content hash used for provenance and resume checks.
    pub fn hash(&self) -> u64 {
        fnv1a(&serde_json::to_vec(self).expect("spec serializes"))
    }
}

/// One generated sample: images, scene parameters and ground truth.
#[derive(Debug)]
pub struct DatasetRecord {
    pub images: Vec<RadianceImage>,
    pub lights: Vec<PointLight>,
    pub cam: CameraIntrinsics,
    pub pose: Pose,
    pub gt_mesh: FaceMesh,
    pub proxy_mesh: FaceMesh,
    pub gt_normals: NormalMap,
    pub gt_depth: HeightField,
    pub seed: u64,
    pub spec_hash: u64,
}

fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; kept in-crate so sampled bytes depend only on the seeded
    // stream.
    loop {
        let u1: f64 = rng.random();
        if u1 > 1e-300 {
            let u2: f64 = rng.random();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

fn uniform_pm(rng: &mut ChaCha8Rng, half_range: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * half_range
}

pub(crate) fn draw_coefficients(
    rng: &mut ChaCha8Rng,
    spec: &SampleSpec,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let id = (0..ID_DIM).map(|_| spec.sigma_id * normal_sample(rng)).collect();
    let exp = (0..EXP_DIM)
        .map(|_| spec.sigma_exp * normal_sample(rng))
        .collect();
    let alb = (0..ALBEDO_DIM)
        .map(|_| spec.sigma_albedo * normal_sample(rng))
        .collect();
    (id, exp, alb)
}

/// The physical rig: front, left and right lights at `distance` from the
/// face center, extended with above/below positions for n > 3.
pub fn base_light_positions(n_lights: usize, face_center: Vec3, distance: f64) -> Vec<Vec3> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(-s, 0.0, -s),
        Vec3::new(s, 0.0, -s),
        Vec3::new(0.0, -s, -s),
        Vec3::new(0.0, s, -s),
    ];
    (0..n_lights)
        .map(|j| face_center + distance * dirs[j % dirs.len()])
        .collect()
}

/// Procedural high-frequency bump displacement along vertex normals.
fn apply_bumps(mesh: &mut FaceMesh, rng: &mut ChaCha8Rng, amplitude: f64, cycles: f64) {
    if amplitude == 0.0 {
        return;
    }
    const WAVES: usize = 4;
    let mut params = [[0.0f64; 4]; WAVES];
    for p in &mut params {
        p[0] = cycles * (0.8 + 0.4 * rng.random::<f64>());
        p[1] = cycles * (0.8 + 0.4 * rng.random::<f64>());
        p[2] = std::f64::consts::TAU * rng.random::<f64>();
        p[3] = std::f64::consts::TAU * rng.random::<f64>();
    }
    let (lo, hi) = mesh.bounding_box();
    let span = hi - lo;
    let normals = mesh.vertex_normals();
    for (v, n) in mesh.vertices.iter_mut().zip(&normals) {
        let sx = (v.x - lo.x) / span.x.max(1e-9);
        let sy = (v.y - lo.y) / span.y.max(1e-9);
        let mut d = 0.0;
        for p in &params {
            d += (std::f64::consts::TAU * p[0] * sx + p[2]).sin()
                * (std::f64::consts::TAU * p[1] * sy + p[3]).sin();
        }
        *v += (amplitude * d / WAVES as f64) * n;
    }
}

/// Camera used for all records of a given image size: the face fills most
/// of the frame at the rig distance.
pub fn default_camera(image_size: usize) -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 1.6 * image_size as f64,
        fy: 1.6 * image_size as f64,
        cx: image_size as f64 / 2.0,
        cy: image_size as f64 / 2.0,
        width: image_size,
        height: image_size,
    }
}

/// Rasterize smoothly interpolated (per-vertex) normals: the continuum
/// ground-truth normal map of a record.
pub fn rasterize_smooth_normals(
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<NormalMap, IntegrateError> {
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    let vertex_normals = posed.vertex_normals();
    let mut normals = vec![Vec3::zeros(); cam.width * cam.height];
    let mut mask = vec![false; cam.width * cam.height];
    for (i, frag) in buf.fragments.iter().enumerate() {
        if let Some(f) = frag {
            let tri = posed.triangles[f.triangle];
            normals[i] = (f.bary[0] * vertex_normals[tri[0]]
                + f.bary[1] * vertex_normals[tri[1]]
                + f.bary[2] * vertex_normals[tri[2]])
                .normalize();
            mask[i] = true;
        }
    }
    if mask.iter().all(|m| !m) {
        return Err(IntegrateError::EmptyCoverage);
    }
    Ok(NormalMap {
        width: cam.width,
        height: cam.height,
        normals,
        mask,
    })
}

/// Deterministically sample one record from the model.
///
/// A face that lands behind the camera is resampled with an incremented
/// sub-seed, up to 10 attempts.
pub fn sample_record(
    model: &LinearFaceModel,
    spec: &SampleSpec,
) -> Result<DatasetRecord, DatasetError> {
    const MAX_ATTEMPTS: u64 = 10;
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = spec.seed.wrapping_add(attempt.wrapping_mul(0x9e3779b97f4a7c15));
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);

        let (alpha_id, alpha_exp, alpha_alb) = draw_coefficients(&mut rng, spec);
        let mut gt_mesh = synthesize_face(model, &alpha_id, &alpha_exp, &alpha_alb)?;
        apply_bumps(&mut gt_mesh, &mut rng, spec.bump_amplitude_mm, spec.bump_cycles);

        let pose = Pose {
            pitch: uniform_pm(&mut rng, spec.pose_jitter_rad),
            yaw: uniform_pm(&mut rng, spec.pose_jitter_rad),
            roll: uniform_pm(&mut rng, spec.pose_jitter_rad),
            translation: Vec3::new(
                uniform_pm(&mut rng, spec.pose_jitter_mm),
                uniform_pm(&mut rng, spec.pose_jitter_mm),
                spec.base_distance_mm + uniform_pm(&mut rng, spec.pose_jitter_mm),
            ),
        };

        let face_center = pose.translation;
        let base_positions =
            base_light_positions(spec.n_lights, face_center, spec.base_distance_mm);
        let lights: Vec<PointLight> = base_positions
            .iter()
            .map(|p| {
                let jitter = Vec3::new(
                    uniform_pm(&mut rng, spec.light_jitter_frac * spec.base_distance_mm),
                    uniform_pm(&mut rng, spec.light_jitter_frac * spec.base_distance_mm),
                    uniform_pm(&mut rng, spec.light_jitter_frac * spec.base_distance_mm),
                );
                let position = p + jitter;
                let distance = (face_center - position).norm();
                let beta = 0.9
                    * distance
                    * distance
                    * (1.0 + uniform_pm(&mut rng, spec.beta_jitter_frac));
                PointLight::new(position, beta)
            })
            .collect();

        let cam = default_camera(spec.image_size);
        let options = RenderOptions {
            shading: Shading::Smooth,
            cast_shadows: spec.cast_shadows,
        };
        let mut images = Vec::with_capacity(lights.len());
        let mut behind = false;
        for light in &lights {
            let out = render(&gt_mesh, &pose, &cam, light, &options)?;
            if out.status == RenderStatus::MeshBehindCamera {
                behind = true;
                break;
            }
            images.push(out.image);
        }
        if behind {
            continue;
        }

        let gt_normals = rasterize_smooth_normals(&gt_mesh, &pose, &cam)?;
        let gt_depth = rasterize_height_field(&gt_mesh, &pose, &cam)?;
        let proxy_mesh = make_proxy(&gt_mesh, model, 10, 5, 0.3, sub_seed ^ 0x5eed_0000)?;

        return Ok(DatasetRecord {
            images,
            lights,
            cam,
            pose,
            gt_mesh,
            proxy_mesh,
            gt_normals,
            gt_depth,
            seed: spec.seed,
            spec_hash: spec.hash(),
        });
    }
    Err(DatasetError::BehindCamera(MAX_ATTEMPTS as usize))
}

/// Simulate the coarse inverse-rendering fit: orthogonally project the
/// truth onto the leading `k_id` identity and `k_exp` expression columns,
/// then perturb vertices along their normals with Gaussian noise scaled so
/// the expected normal tilt is about `noise_deg` degrees. Albedo is the
/// model's mean albedo.
pub fn make_proxy(
    truth: &FaceMesh,
    model: &LinearFaceModel,
    k_id: usize,
    k_exp: usize,
    noise_deg: f64,
    seed: u64,
) -> Result<FaceMesh, DatasetError> {
    if truth.triangles != model.triangles || truth.vertices.len() != model.n_vertices() {
        return Err(DatasetError::TopologyMismatch);
    }
    let k_id = k_id.min(ID_DIM);
    let k_exp = k_exp.min(EXP_DIM);
    let n3 = 3 * truth.vertices.len();
    let mut residual = DVector::zeros(n3);
    for (v, vert) in truth.vertices.iter().enumerate() {
        residual[3 * v] = vert.x - model.mean_shape[3 * v];
        residual[3 * v + 1] = vert.y - model.mean_shape[3 * v + 1];
        residual[3 * v + 2] = vert.z - model.mean_shape[3 * v + 2];
    }
    // Least-squares projection onto the truncated joint basis.
    let mut basis = nalgebra::DMatrix::zeros(n3, k_id + k_exp);
    basis
        .view_mut((0, 0), (n3, k_id))
        .copy_from(&model.basis_id.view((0, 0), (n3, k_id)));
    basis
        .view_mut((0, k_id), (n3, k_exp))
        .copy_from(&model.basis_exp.view((0, 0), (n3, k_exp)));
    let coeffs = if k_id + k_exp > 0 {
        basis
            .clone()
            .svd(true, true)
            .solve(&residual, 1e-12)
            .expect("least squares solve")
    } else {
        DVector::zeros(0)
    };
    let projected = model.mean_shape.clone() + basis * coeffs;

    let mut vertices: Vec<Vec3> = projected
        .as_slice()
        .chunks_exact(3)
        .map(|v| Vec3::new(v[0], v[1], v[2]))
        .collect();
    let albedo: Vec<Vec3> = model
        .mean_albedo
        .as_slice()
        .chunks_exact(3)
        .map(|a| Vec3::new(a[0].clamp(0.0, 1.0), a[1].clamp(0.0, 1.0), a[2].clamp(0.0, 1.0)))
        .collect();
    let mut proxy = FaceMesh {
        vertices: vertices.clone(),
        triangles: model.triangles.clone(),
        albedo,
    };

    if noise_deg > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Mean edge length sets the displacement scale for a given tilt.
        let mut edge_sum = 0.0;
        for t in &proxy.triangles {
            for e in 0..3 {
                edge_sum += (proxy.vertices[t[e]] - proxy.vertices[t[(e + 1) % 3]]).norm();
            }
        }
        let mean_edge = edge_sum / (3.0 * proxy.triangles.len() as f64);
        let sigma = noise_deg.to_radians().tan() * mean_edge;
        let normals = proxy.vertex_normals();
        for (v, n) in vertices.iter_mut().zip(&normals) {
            *v += sigma * normal_sample(&mut rng) * n;
        }
        proxy.vertices = vertices;
    }
    Ok(proxy)
}

/// Files of one persisted record, relative to its directory.
pub fn record_files(n_lights: usize) -> Vec<String> {
    let mut files: Vec<String> = (0..n_lights).map(|i| format!("img_{i}.pfm")).collect();
    files.extend(
        [
            "gt_mesh.obj",
            "proxy_mesh.obj",
            "gt_normals.pfm",
            "gt_depth.pfm",
            "meta.json",
        ]
        .map(String::from),
    );
    files
}

/// Per-record metadata persisted as meta.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMeta {
    pub seed: u64,
    pub spec_hash: String,
    pub lights: crate::calib::LightsFile,
    pub cam: CameraIntrinsics,
    pub pose: Pose,
    pub image_size: usize,
    pub n_lights: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub seed: u64,
    pub spec_hash: String,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub version: u32,
    pub records: Vec<ManifestRecord>,
}

/// Write one record's files under `dir`.
pub fn write_record(dir: &Path, record: &DatasetRecord) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, image) in record.images.iter().enumerate() {
        let path = dir.join(format!("img_{i}.pfm"));
        crate::render::write_pfm(
            &path,
            &PfmImage::from_rgb(image.width, image.height, &image.pixels),
        )?;
    }
    write_obj(&dir.join("gt_mesh.obj"), &record.gt_mesh)?;
    write_obj(&dir.join("proxy_mesh.obj"), &record.proxy_mesh)?;
    crate::render::write_pfm(
        &dir.join("gt_normals.pfm"),
        &PfmImage::from_rgb(
            record.gt_normals.width,
            record.gt_normals.height,
            &record.gt_normals.normals,
        ),
    )?;
    crate::render::write_pfm(
        &dir.join("gt_depth.pfm"),
        &PfmImage::from_gray(
            record.gt_depth.width,
            record.gt_depth.height,
            &record.gt_depth.depth,
        ),
    )?;
    let meta = RecordMeta {
        seed: record.seed,
        spec_hash: format!("{:016x}", record.spec_hash),
        lights: crate::calib::LightsFile::from_lights(&record.lights),
        cam: record.cam,
        pose: record.pose,
        image_size: record.cam.width,
        n_lights: record.lights.len(),
    };
    let json = serde_json::to_vec_pretty(&meta)?;
    let path = dir.join("meta.json");
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(())
}

/// A record loaded back from disk. Image masks are reconstructed from the
/// ground-truth normal map's coverage (images and normal map share masks by
/// construction).
#[derive(Debug)]
pub struct LoadedRecord {
    pub images: Vec<RadianceImage>,
    pub lights: Vec<PointLight>,
    pub cam: CameraIntrinsics,
    pub pose: Pose,
    pub gt_mesh: FaceMesh,
    pub proxy_mesh: FaceMesh,
    pub gt_normals: NormalMap,
    pub gt_depth: HeightField,
    pub meta: RecordMeta,
}

pub fn load_record(dir: &Path) -> Result<LoadedRecord, DatasetError> {
    let meta_path = dir.join("meta.json");
    let meta_bytes = std::fs::read(&meta_path).map_err(io_err(&meta_path))?;
    let meta: RecordMeta = serde_json::from_slice(&meta_bytes)?;
    let lights = meta.lights.to_lights();
    let cam = meta.cam;

    let normals_pfm = crate::render::read_pfm(&dir.join("gt_normals.pfm"))?;
    let normal_vecs = normals_pfm.to_rgb()?;
    let mask: Vec<bool> = normal_vecs.iter().map(|n| n.norm() > 0.5).collect();
    let gt_normals = NormalMap {
        width: normals_pfm.width,
        height: normals_pfm.height,
        normals: normal_vecs
            .iter()
            .zip(&mask)
            .map(|(n, m)| if *m { n.normalize() } else { Vec3::zeros() })
            .collect(),
        mask: mask.clone(),
    };

    let depth_pfm = crate::render::read_pfm(&dir.join("gt_depth.pfm"))?;
    let depth = depth_pfm.to_gray()?;
    let depth_mask: Vec<bool> = depth.iter().map(|d| *d > 0.0).collect();
    let gt_depth = HeightField::new(depth_pfm.width, depth_pfm.height, depth, depth_mask, cam)?;

    let mut images = Vec::with_capacity(meta.n_lights);
    for i in 0..meta.n_lights {
        let pfm = crate::render::read_pfm(&dir.join(format!("img_{i}.pfm")))?;
        let pixels = pfm.to_rgb()?;
        images.push(RadianceImage {
            width: pfm.width,
            height: pfm.height,
            pixels,
            mask: mask.clone(),
        });
    }

    let gt_mesh = crate::geometry::read_obj(&dir.join("gt_mesh.obj"))?;
    let proxy_mesh = crate::geometry::read_obj(&dir.join("proxy_mesh.obj"))?;
    Ok(LoadedRecord {
        images,
        lights,
        cam,
        pose: meta.pose,
        gt_mesh,
        proxy_mesh,
        gt_normals,
        gt_depth,
        meta,
    })
}

fn record_complete(dir: &Path, n_lights: usize) -> bool {
    record_files(n_lights).iter().all(|f| dir.join(f).is_file())
}

/// Generate (or resume) a corpus: one directory per spec under `out_dir`
/// plus a manifest. Records already present and complete are skipped, and
/// the manifest file is rewritten only when its content changes.
pub fn generate_corpus(
    model: &LinearFaceModel,
    specs: &[SampleSpec],
    out_dir: &Path,
) -> Result<Manifest, DatasetError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let jobs: Vec<(usize, String)> = specs
        .iter()
        .enumerate()
        .map(|(i, _)| (i, format!("rec{i:04}")))
        .collect();

    let results: Vec<Result<ManifestRecord, DatasetError>> = jobs
        .par_iter()
        .map(|(i, id)| {
            let spec = &specs[*i];
            let dir = out_dir.join(id);
            if !record_complete(&dir, spec.n_lights) {
                let record = sample_record(model, spec)?;
                write_record(&dir, &record)?;
            }
            Ok(ManifestRecord {
                id: id.clone(),
                seed: spec.seed,
                spec_hash: format!("{:016x}", spec.hash()),
                path: id.clone(),
            })
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }
    let manifest = Manifest {
        version: 1,
        records,
    };
    let manifest_path = out_dir.join("manifest.json");
    let bytes = serde_json::to_vec_pretty(&manifest)?;
    let unchanged = std::fs::read(&manifest_path)
        .map(|old| old == bytes)
        .unwrap_or(false);
    if !unchanged {
        std::fs::write(&manifest_path, bytes).map_err(io_err(&manifest_path))?;
    }
    Ok(manifest)
}

pub fn read_manifest(out_dir: &Path) -> Result<Manifest, DatasetError> {
    let path = out_dir.join("manifest.json");
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{toy_model, triangle_normals_and_centroids, ToyModelParams};
    use crate::integrate::pixel_normal_from_heights;

    fn test_model() -> LinearFaceModel {
        toy_model(77, &ToyModelParams::default())
    }

    fn quick_spec(seed: u64) -> SampleSpec {
        SampleSpec {
            seed,
            image_size: 96,
            ..SampleSpec::default()
        }
    }

    #[test]
    fn same_seed_reproduces_identical_records() {
        let model = test_model();
        let spec = quick_spec(11);
        let a = sample_record(&model, &spec).unwrap();
        let b = sample_record(&model, &spec).unwrap();
        assert_eq!(a.gt_mesh, b.gt_mesh);
        assert_eq!(a.proxy_mesh, b.proxy_mesh);
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.lights, b.lights);
        for (ia, ib) in a.images.iter().zip(&b.images) {
            assert_eq!(ia, ib);
        }
    }

    #[test]
    fn zero_deviations_give_the_mean_face_at_base_pose() {
        let model = test_model();
        let spec = SampleSpec {
            seed: 5,
            sigma_id: 0.0,
            sigma_exp: 0.0,
            sigma_albedo: 0.0,
            pose_jitter_rad: 0.0,
            pose_jitter_mm: 0.0,
            light_jitter_frac: 0.0,
            beta_jitter_frac: 0.0,
            bump_amplitude_mm: 0.0,
            image_size: 64,
            ..SampleSpec::default()
        };
        let record = sample_record(&model, &spec).unwrap();
        let mean =
            synthesize_face(&model, &[0.0; ID_DIM], &[0.0; EXP_DIM], &[0.0; ALBEDO_DIM]).unwrap();
        assert_eq!(record.gt_mesh, mean);
        assert_eq!(record.pose.translation, Vec3::new(0.0, 0.0, 600.0));
        assert_eq!(record.pose.yaw, 0.0);
        let base = base_light_positions(3, record.pose.translation, 600.0);
        for (l, b) in record.lights.iter().zip(&base) {
            assert!((l.position - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gt_normal_map_consistent_with_gt_height_field() {
        let model = test_model();
        let record = sample_record(&model, &quick_spec(3)).unwrap();
        let z = &record.gt_depth;
        let mut angles = Vec::new();
        for y in 0..z.height {
            for x in 0..z.width {
                if !z.masked(x, y) || !z.is_interior(x, y) {
                    continue;
                }
                if !record.gt_normals.masked(x, y) {
                    continue;
                }
                let from_depth = pixel_normal_from_heights(z, x, y).unwrap();
                let stored = record.gt_normals.normals[record.gt_normals.idx(x, y)];
                angles.push(from_depth.dot(&stored).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!(angles.len() > 500);
        let mean = angles.iter().sum::<f64>() / angles.len() as f64;
        assert!(mean <= 1.0, "mean angular difference {mean} deg");
    }

    #[test]
    fn record_masks_are_consistent_and_images_non_negative() {
        let model = test_model();
        let record = sample_record(&model, &quick_spec(8)).unwrap();
        for image in &record.images {
            image.validate().unwrap();
            assert_eq!(image.mask, record.gt_normals.mask);
        }
    }

    #[test]
    fn full_rank_noise_free_proxy_reproduces_model_generated_truth() {
        let model = test_model();
        let spec = SampleSpec {
            seed: 21,
            bump_amplitude_mm: 0.0, // keep the truth inside the model span
            image_size: 64,
            ..SampleSpec::default()
        };
        let record = sample_record(&model, &spec).unwrap();
        let proxy = make_proxy(&record.gt_mesh, &model, ID_DIM, EXP_DIM, 0.0, 1).unwrap();
        let worst = record
            .gt_mesh
            .vertices
            .iter()
            .zip(&proxy.vertices)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "worst vertex deviation {worst}");
    }

    #[test]
    fn truncated_proxy_is_worse_than_full_rank() {
        let model = test_model();
        let record = sample_record(&model, &quick_spec(31)).unwrap();
        let full = make_proxy(&record.gt_mesh, &model, ID_DIM, EXP_DIM, 0.0, 1).unwrap();
        let coarse = make_proxy(&record.gt_mesh, &model, 10, 5, 0.0, 1).unwrap();
        let (gt_n, _) = triangle_normals_and_centroids(&record.gt_mesh).unwrap();
        let mean_angle = |mesh: &FaceMesh| {
            let (n, _) = triangle_normals_and_centroids(mesh).unwrap();
            n.iter()
                .zip(&gt_n)
                .map(|(a, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                .sum::<f64>()
                / n.len() as f64
        };
        let full_err = mean_angle(&full);
        let coarse_err = mean_angle(&coarse);
        assert!(
            coarse_err > full_err,
            "coarse {coarse_err} vs full {full_err}"
        );
    }

    #[test]
    fn proxy_is_deterministic_and_checks_topology() {
        let model = test_model();
        let record = sample_record(&model, &quick_spec(4)).unwrap();
        let a = make_proxy(&record.gt_mesh, &model, 10, 5, 0.4, 9).unwrap();
        let b = make_proxy(&record.gt_mesh, &model, 10, 5, 0.4, 9).unwrap();
        assert_eq!(a, b);

        let other = toy_model(
            1,
            &ToyModelParams {
                grid: (8, 9),
                ..ToyModelParams::default()
            },
        );
        assert!(matches!(
            make_proxy(&record.gt_mesh, &other, 10, 5, 0.0, 1),
            Err(DatasetError::TopologyMismatch)
        ));
    }

    #[test]
    fn sampled_coefficient_deviations_match_spec() {
        let spec = SampleSpec {
            sigma_id: 2.0,
            sigma_exp: 0.5,
            ..SampleSpec::default()
        };
        let mut id_first = Vec::new();
        let mut exp_first = Vec::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (id, exp, _) = draw_coefficients(&mut rng, &spec);
            id_first.push(id[0]);
            exp_first.push(exp[0]);
        }
        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let sd_id = std(&id_first);
        let sd_exp = std(&exp_first);
        assert!((sd_id - 2.0).abs() / 2.0 < 0.25, "sigma_id sample std {sd_id}");
        assert!(
            (sd_exp - 0.5).abs() / 0.5 < 0.25,
            "sigma_exp sample std {sd_exp}"
        );
    }

    #[test]
    fn corpus_generation_writes_manifest_and_resumes_idempotently() {
        let model = test_model();
        let dir = std::env::temp_dir().join(format!("nearps_corpus_test_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        let specs: Vec<SampleSpec> = (0..3)
            .map(|i| SampleSpec {
                seed: 100 + i,
                image_size: 48,
                ..SampleSpec::default()
            })
            .collect();
        let manifest = generate_corpus(&model, &specs, &dir).unwrap();
        assert_eq!(manifest.records.len(), 3);
        for rec in &manifest.records {
            let rdir = dir.join(&rec.path);
            for f in record_files(3) {
                assert!(rdir.join(&f).is_file(), "missing {f}");
            }
        }
        // Rerun: nothing is rewritten.
        let stamp = |p: &Path| std::fs::metadata(p).unwrap().modified().unwrap();
        let probe = dir.join("rec0001").join("img_0.pfm");
        let manifest_path = dir.join("manifest.json");
        let t0 = stamp(&probe);
        let m0 = stamp(&manifest_path);
        let manifest2 = generate_corpus(&model, &specs, &dir).unwrap();
        assert_eq!(manifest2.records.len(), 3);
        assert_eq!(stamp(&probe), t0);
        assert_eq!(stamp(&manifest_path), m0);

        // Round trip through the loader.
        let loaded = load_record(&dir.join("rec0000")).unwrap();
        assert_eq!(loaded.images.len(), 3);
        assert_eq!(loaded.gt_mesh.vertices.len(), model.n_vertices());
        loaded.gt_normals.validate().unwrap();
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn written_records_are_byte_identical_across_regenerations() {
        let model = test_model();
        let spec = quick_spec(42);
        let record = sample_record(&model, &spec).unwrap();
        let dir_a = std::env::temp_dir().join(format!("nearps_bytes_a_{}", std::process::id()));
        let dir_b = std::env::temp_dir().join(format!("nearps_bytes_b_{}", std::process::id()));
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
        write_record(&dir_a, &record).unwrap();
        let record2 = sample_record(&model, &spec).unwrap();
        write_record(&dir_b, &record2).unwrap();
        for f in record_files(3) {
            let a = std::fs::read(dir_a.join(&f)).unwrap();
            let b = std::fs::read(dir_b.join(&f)).unwrap();
            assert_eq!(a, b, "file {f} differs");
        }
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
    }
}
