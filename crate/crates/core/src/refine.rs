//! Per-triangle normal and albedo refinement against photometric
//! observations, anchored to the proxy normals, with one-ring albedo
//! smoothing.
//!
//! The objective over the visible triangles F_v is
//!
//! ```text
//!   sum_{i in F_v} sum_{j in L_i} | I_ij - rho_i (N_i . L_ij) |^2
//!     + mu1 sum_i | N_i - N_i^0 |^2
//!     + mu2 sum_i | rho_i - mean_{W_i} rho |^2      s.t. |N_i| = 1,
//! ```
//!
//! with `L_ij = beta_j (P_j - C_i) / |P_j - C_i|^3` the attenuated light
//! vector at the triangle centroid, `N^0` the proxy normals and `W_i` the
//! visible one-ring. It is solved by alternating minimization: independent
//! 3x3 solves for the normals (albedo fixed), one sparse CG solve per color
//! channel for the albedo (normals fixed). Geometry stays frozen at the
//! proxy; observed intensities are sampled once up front.

use crate::geometry::{
    triangle_normals_and_centroids, CameraIntrinsics, FaceMesh, GeometryError, PointLight, Pose,
};
use crate::numeric::{conjugate_gradient, CsrBuilder, CsrMatrix, SpdOperator};
use crate::render::{
    self, available_lights, raster, RadianceImage, RenderError, LIGHT_SINGULARITY_EPS,
};
use crate::{Mat3, Vec3};
use rayon::prelude::*;
use thiserror::Error;

/// Depth tie tolerance (mm) for the visibility z-buffer test.
pub const VISIBILITY_DEPTH_TIE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("no triangle is visible from the camera")]
    EmptyVisibleSet,
    #[error("normal update is under-determined for {} triangle(s) (first: {:?}); fewer than 3 usable lights with mu1 = 0", .triangles.len(), .triangles.first())]
    UnderDetermined { triangles: Vec<usize> },
    #[error("refinement needs at least one observation image")]
    NoObservations,
    #[error("albedo solve did not converge (relative residual {0})")]
    AlbedoSolveFailed(f64),
}

/// Weights and stopping rule for the alternating minimization.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RefinementConfig {
    /// Normal-prior weight (mu1). Tuned for images with peak ~1.
    pub mu1: f64,
    /// Albedo-smoothness weight (mu2).
    pub mu2: f64,
    pub max_outer_iters: usize,
    /// Relative objective change below which iteration stops.
    pub convergence_tol: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            mu1: 0.05,
            mu2: 0.1,
            max_outer_iters: 20,
            convergence_tol: 1e-6,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.mu1 >= 0.0 && self.mu2 >= 0.0) || self.max_outer_iters < 1 {
            return Err(GeometryError::InvalidIntrinsics(
                "refinement config: mu1, mu2 must be >= 0 and max_outer_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Current normals and albedos over the visible triangle set.
///
/// `one_rings` holds positions into `visible_set` (not mesh indices).
#[derive(Debug, Clone)]
pub struct RefinementState {
    /// Mesh triangle indices, ascending.
    pub visible_set: Vec<usize>,
    /// Edge-adjacent visible neighbors, as positions into `visible_set`.
    pub one_rings: Vec<Vec<usize>>,
    /// Unit normals per visible triangle, camera space.
    pub normals_hat: Vec<Vec3>,
    /// RGB albedo per visible triangle.
    pub albedo_hat: Vec<Vec3>,
}

/// Frozen per-triangle data the alternating steps consume.
#[derive(Debug, Clone)]
pub struct RefinementProblem {
    /// Attenuated light vectors `L_kj` per visible entry and light.
    pub light_dirs: Vec<Vec<Vec3>>,
    /// Lights passing the half-space filter, per visible entry.
    pub available: Vec<Vec<usize>>,
    /// Observed intensity per light image and visible entry.
    pub observed: Vec<Vec<Option<Vec3>>>,
    /// Proxy (prior) unit normals per visible entry, camera space.
    pub prior_normals: Vec<Vec3>,
}

impl RefinementProblem {
    /// Lights usable for entry `k`: pass the filter and were observed.
    fn usable_lights(&self, k: usize) -> impl Iterator<Item = (usize, &Vec3, Vec3)> {
        self.available[k].iter().filter_map(move |&j| {
            self.observed[j][k]
                .as_ref()
                .map(|intensity| (j, &self.light_dirs[k][j], *intensity))
        })
    }
}

impl RefinementState {
    /// Persist as the binary array container: `normals` and `albedos` as
    /// `[n, 3]`, `visible_indices` as `[n]`, plus the one-ring adjacency in
    /// CSR form (`one_ring_offsets`, `one_ring_neighbors`).
    pub fn to_container(&self) -> crate::geometry::ArrayContainer {
        let n = self.visible_set.len();
        let mut c = crate::geometry::ArrayContainer::new();
        let flat3 = |vs: &[Vec3]| -> Vec<f64> {
            vs.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
        };
        c.insert("normals", vec![n, 3], flat3(&self.normals_hat));
        c.insert("albedos", vec![n, 3], flat3(&self.albedo_hat));
        c.insert(
            "visible_indices",
            vec![n],
            self.visible_set.iter().map(|&t| t as f64).collect(),
        );
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0.0);
        for ring in &self.one_rings {
            neighbors.extend(ring.iter().map(|&k| k as f64));
            offsets.push(neighbors.len() as f64);
        }
        c.insert("one_ring_offsets", vec![n + 1], offsets);
        let len = neighbors.len();
        c.insert("one_ring_neighbors", vec![len], neighbors);
        c
    }

    pub fn from_container(
        c: &crate::geometry::ArrayContainer,
    ) -> Result<Self, crate::geometry::ContainerError> {
        let unflat3 = |data: &[f64]| -> Vec<Vec3> {
            data.chunks_exact(3)
                .map(|v| Vec3::new(v[0], v[1], v[2]))
                .collect()
        };
        let (_, normals) = c.get("normals")?;
        let (_, albedos) = c.get("albedos")?;
        let (_, visible) = c.get("visible_indices")?;
        let (_, offsets) = c.get("one_ring_offsets")?;
        let (_, neighbors) = c.get("one_ring_neighbors")?;
        let one_rings = offsets
            .windows(2)
            .map(|w| {
                neighbors[w[0] as usize..w[1] as usize]
                    .iter()
                    .map(|&k| k as usize)
                    .collect()
            })
            .collect();
        Ok(RefinementState {
            visible_set: visible.iter().map(|&t| t as usize).collect(),
            one_rings,
            normals_hat: unflat3(normals),
            albedo_hat: unflat3(albedos),
        })
    }
}

/// Visible-triangle selection by z-buffer plus front-facing test, and the
/// edge-adjacency one-rings restricted to the visible set.
///
/// A triangle is visible when it is front-facing and its centroid wins (or
/// ties within [`VISIBILITY_DEPTH_TIE`] mm) the z-buffer at its projected
/// pixel; winning means the pixel's fragment belongs to the triangle itself
/// or lies at essentially the same depth.
pub fn build_visible_set(
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<(Vec<usize>, Vec<Vec<usize>>), RefineError> {
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    let (normals, centroids) = triangle_normals_and_centroids(&posed)?;

    let mut visible = Vec::new();
    for (t, (n, c)) in normals.iter().zip(&centroids).enumerate() {
        if n.dot(c) >= 0.0 || c.z <= 0.0 {
            continue; // backfacing or behind the camera
        }
        let u = cam.fx * c.x / c.z + cam.cx;
        let v = cam.fy * c.y / c.z + cam.cy;
        let (px, py) = (u.round(), v.round());
        if px < 0.0 || py < 0.0 || px >= cam.width as f64 || py >= cam.height as f64 {
            continue;
        }
        if let Some(frag) = buf.get(px as usize, py as usize) {
            if frag.triangle == t || c.z <= frag.depth + VISIBILITY_DEPTH_TIE {
                visible.push(t);
            }
        }
    }
    if visible.is_empty() {
        return Err(RefineError::EmptyVisibleSet);
    }

    // Edge-adjacency restricted to the visible set.
    let pos_of: std::collections::HashMap<usize, usize> =
        visible.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    let mut edge_map: std::collections::HashMap<(usize, usize), Vec<usize>> =
        std::collections::HashMap::new();
    for &t in &visible {
        let tri = posed.triangles[t];
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edge_map.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut one_rings = vec![Vec::new(); visible.len()];
    for owners in edge_map.values() {
        if owners.len() == 2 {
            let (ka, kb) = (pos_of[&owners[0]], pos_of[&owners[1]]);
            one_rings[ka].push(kb);
            one_rings[kb].push(ka);
        }
    }
    for ring in &mut one_rings {
        ring.sort_unstable();
        ring.dedup();
    }
    Ok((visible, one_rings))
}

/// Initial state plus frozen problem data for a proxy/pose/images/lights
/// configuration. Observed intensities are sampled here, once.
pub fn build_problem(
    proxy: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
    observations: &[RadianceImage],
    lights: &[PointLight],
) -> Result<(RefinementState, RefinementProblem), RefineError> {
    if observations.is_empty() {
        return Err(RefineError::NoObservations);
    }
    let (visible_set, one_rings) = build_visible_set(proxy, pose, cam)?;
    let posed = proxy.transformed(pose);
    let (normals, centroids) = triangle_normals_and_centroids(&posed)?;
    let albedos = posed.triangle_albedos();
    let vis_sets = available_lights(&posed, lights)?;

    let light_dirs: Vec<Vec<Vec3>> = visible_set
        .iter()
        .map(|&t| {
            lights
                .iter()
                .map(|l| attenuated_light(&centroids[t], l))
                .collect()
        })
        .collect();
    let available: Vec<Vec<usize>> = visible_set
        .iter()
        .map(|&t| vis_sets.available(t).to_vec())
        .collect();

    let mut observed = Vec::with_capacity(observations.len());
    for image in observations {
        let per_tri = render::sample_observed_intensity(image, proxy, pose, cam)?;
        observed.push(visible_set.iter().map(|&t| per_tri[t]).collect());
    }

    let prior_normals: Vec<Vec3> = visible_set.iter().map(|&t| normals[t]).collect();
    let state = RefinementState {
        normals_hat: prior_normals.clone(),
        albedo_hat: visible_set.iter().map(|&t| albedos[t]).collect(),
        visible_set,
        one_rings,
    };
    let problem = RefinementProblem {
        light_dirs,
        available,
        observed,
        prior_normals,
    };
    Ok((state, problem))
}

/// `beta (P - C) / |P - C|^3`, or zero when the centroid sits on the light.
pub fn attenuated_light(centroid: &Vec3, light: &PointLight) -> Vec3 {
    let d = light.position - centroid;
    let dist = d.norm();
    if dist < LIGHT_SINGULARITY_EPS {
        return Vec3::zeros();
    }
    d * (light.illumination / (dist * dist * dist))
}

/// Photometric-plus-prior objective of a single triangle's normal.
fn local_normal_objective(
    normal: &Vec3,
    k: usize,
    albedo: &Vec3,
    problem: &RefinementProblem,
    mu1: f64,
) -> f64 {
    let mut e = mu1 * (normal - problem.prior_normals[k]).norm_squared();
    for (_, l, intensity) in problem.usable_lights(k) {
        let s = normal.dot(l);
        e += (intensity - albedo * s).norm_squared();
    }
    e
}

/// One normal update: per-triangle 3x3 solve with the albedo fixed, then
/// renormalization guarded against objective increase (bisection damping
/// toward the previous unit normal).
pub fn normal_step(
    state: &RefinementState,
    problem: &RefinementProblem,
    config: &RefinementConfig,
) -> Result<Vec<Vec3>, RefineError> {
    let n = state.visible_set.len();
    let results: Vec<Result<Vec3, usize>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let albedo = state.albedo_hat[k];
            let mut a = Mat3::identity() * config.mu1;
            let mut b = problem.prior_normals[k] * config.mu1;
            let mut n_usable = 0usize;
            for (_, l, intensity) in problem.usable_lights(k) {
                let w = albedo.norm_squared();
                let y = albedo.dot(&intensity);
                a += w * l * l.transpose();
                b += y * l;
                n_usable += 1;
            }
            if config.mu1 == 0.0 && n_usable < 3 {
                return Err(state.visible_set[k]);
            }
            let scale = (a.trace() / 3.0).max(1e-300);
            let solved = match a.lu().solve(&b) {
                Some(x) if a.determinant().abs() > 1e-12 * scale.powi(3) => x,
                _ => return Err(state.visible_set[k]),
            };
            let raw = solved;
            let norm = raw.norm();
            if norm < 1e-300 {
                return Ok(state.normals_hat[k]);
            }
            let candidate = raw / norm;
            let old = state.normals_hat[k];
            let old_obj = local_normal_objective(&old, k, &albedo, problem, config.mu1);
            let cand_obj = local_normal_objective(&candidate, k, &albedo, problem, config.mu1);
            if cand_obj <= old_obj + 1e-12 * old_obj.abs().max(1e-30) {
                return Ok(candidate);
            }
            // Renormalization worsened the objective: damp the raw solve
            // direction toward the previous unit normal by bisection.
            let mut t = 0.5;
            for _ in 0..40 {
                let blend = old.lerp(&raw, t);
                let bn = blend.norm();
                if bn > 1e-12 {
                    let cand = blend / bn;
                    if local_normal_objective(&cand, k, &albedo, problem, config.mu1) <= old_obj {
                        return Ok(cand);
                    }
                }
                t *= 0.5;
            }
            Ok(old)
        })
        .collect();

    let mut normals = Vec::with_capacity(n);
    let mut under = Vec::new();
    for r in results {
        match r {
            Ok(v) => normals.push(v),
            Err(t) => under.push(t),
        }
    }
    if !under.is_empty() {
        return Err(RefineError::UnderDetermined { triangles: under });
    }
    Ok(normals)
}

/// Albedo update outcome; `unconstrained` lists visible entries that had
/// neither lit observations nor visible neighbors and were left unchanged.
#[derive(Debug, Clone)]
pub struct AlbedoStep {
    pub albedo: Vec<Vec3>,
    pub unconstrained: Vec<usize>,
}

/// One albedo update: per-channel sparse least squares with the normals
/// fixed, coupling triangles through the one-ring mean term, solved by CG
/// and clamped to be non-negative.
pub fn albedo_step(
    state: &RefinementState,
    problem: &RefinementProblem,
    config: &RefinementConfig,
) -> Result<AlbedoStep, RefineError> {
    let n = state.visible_set.len();

    // Photometric diagonal and right-hand sides.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![[0.0; 3]; n];
    for k in 0..n {
        for (_, l, intensity) in problem.usable_lights(k) {
            let s = state.normals_hat[k].dot(l);
            diag[k] += s * s;
            for c in 0..3 {
                rhs[k][c] += s * intensity[c];
            }
        }
    }

    let constrained: Vec<bool> = (0..n)
        .map(|k| diag[k] > 0.0 || !state.one_rings[k].is_empty())
        .collect();
    let unconstrained: Vec<usize> = (0..n).filter(|&k| !constrained[k]).collect();

    // System M = D + mu2 K^T K over constrained entries. One-rings are
    // symmetric, so constrained entries never reference unconstrained ones.
    let index: Vec<Option<usize>> = {
        let mut idx = vec![None; n];
        let mut next = 0usize;
        for (k, &keep) in constrained.iter().enumerate() {
            if keep {
                idx[k] = Some(next);
                next += 1;
            }
        }
        idx
    };
    let m = index.iter().flatten().count();

    let mut kb = CsrBuilder::new(m);
    for k in 0..n {
        if !constrained[k] || state.one_rings[k].is_empty() {
            continue;
        }
        let ring = &state.one_rings[k];
        let w = -1.0 / ring.len() as f64;
        let mut row: Vec<(usize, f64)> = vec![(index[k].unwrap(), 1.0)];
        for &nb in ring {
            row.push((index[nb].unwrap(), w));
        }
        kb.push_row(&row);
    }
    let k_mat = kb.finish();
    let kt = k_mat.transpose();

    struct AlbedoOperator<'a> {
        diag: Vec<f64>,
        mu2: f64,
        k_mat: &'a CsrMatrix,
        kt: &'a CsrMatrix,
    }
    impl SpdOperator for AlbedoOperator<'_> {
        fn dim(&self) -> usize {
            self.diag.len()
        }
        fn apply(&self, x: &[f64]) -> Vec<f64> {
            let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, xi)| d * xi).collect();
            if self.mu2 != 0.0 && self.k_mat.n_rows > 0 {
                let kx = self.k_mat.mul_vec(x);
                let ktkx = self.kt.mul_vec(&kx);
                for (yi, v) in y.iter_mut().zip(ktkx) {
                    *yi += self.mu2 * v;
                }
            }
            y
        }
    }
    let op = AlbedoOperator {
        diag: (0..n).filter(|&k| constrained[k]).map(|k| diag[k]).collect(),
        mu2: config.mu2,
        k_mat: &k_mat,
        kt: &kt,
    };

    let mut albedo = state.albedo_hat.clone();
    for c in 0..3 {
        let b: Vec<f64> = (0..n)
            .filter(|&k| constrained[k])
            .map(|k| rhs[k][c])
            .collect();
        let x0: Vec<f64> = (0..n)
            .filter(|&k| constrained[k])
            .map(|k| state.albedo_hat[k][c])
            .collect();
        let res = conjugate_gradient(&op, &b, &x0, 1e-8, 20 * m.max(10));
        if !res.converged && res.relative_residual > 1e-6 {
            return Err(RefineError::AlbedoSolveFailed(res.relative_residual));
        }
        for k in 0..n {
            if let Some(i) = index[k] {
                albedo[k][c] = res.solution[i].max(0.0);
            }
        }
    }
    Ok(AlbedoStep {
        albedo,
        unconstrained,
    })
}

/// Full objective value for a state.
pub fn objective(
    state: &RefinementState,
    problem: &RefinementProblem,
    config: &RefinementConfig,
) -> f64 {
    let n = state.visible_set.len();
    let mut e = 0.0;
    for k in 0..n {
        for (_, l, intensity) in problem.usable_lights(k) {
            let s = state.normals_hat[k].dot(l);
            e += (intensity - state.albedo_hat[k] * s).norm_squared();
        }
        e += config.mu1 * (state.normals_hat[k] - problem.prior_normals[k]).norm_squared();
        if !state.one_rings[k].is_empty() {
            let mut mean = Vec3::zeros();
            for &nb in &state.one_rings[k] {
                mean += state.albedo_hat[nb];
            }
            mean /= state.one_rings[k].len() as f64;
            e += config.mu2 * (state.albedo_hat[k] - mean).norm_squared();
        }
    }
    e
}

/// Result of [`refine`]: final state, objective trace (initial value first),
/// and entries whose albedo was never constrained.
#[derive(Debug)]
pub struct RefineOutcome {
    pub state: RefinementState,
    pub objective_trace: Vec<f64>,
    pub unconstrained_albedo: Vec<usize>,
}

/// Alternating minimization from the proxy initialization until the
/// objective's relative change drops below `config.convergence_tol` or
/// `config.max_outer_iters` is reached.
pub fn refine(
    proxy: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
    observations: &[RadianceImage],
    lights: &[PointLight],
    config: &RefinementConfig,
) -> Result<RefineOutcome, RefineError> {
    config.validate()?;
    let (mut state, problem) = build_problem(proxy, pose, cam, observations, lights)?;
    let mut trace = vec![objective(&state, &problem, config)];
    let mut unconstrained = Vec::new();
    for _ in 0..config.max_outer_iters {
        state.normals_hat = normal_step(&state, &problem, config)?;
        let albedo = albedo_step(&state, &problem, config)?;
        state.albedo_hat = albedo.albedo;
        unconstrained = albedo.unconstrained;
        let e = objective(&state, &problem, config);
        let prev = *trace.last().unwrap();
        trace.push(e);
        if (prev - e).abs() <= config.convergence_tol * prev.abs().max(1e-30) {
            break;
        }
    }
    Ok(RefineOutcome {
        state,
        objective_trace: trace,
        unconstrained_albedo: unconstrained,
    })
}
