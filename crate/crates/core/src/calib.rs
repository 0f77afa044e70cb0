//! Near point light calibration: estimate light positions and illuminations
//! from observed images plus a coarse proxy mesh.
//!
//! With the proxy's albedo held fixed (breaking the albedo/illumination
//! scale gauge), this is a nonlinear least squares problem over the 4n
//! parameters {P_j, beta_j}: minimize the photometric residual between
//! observed centroid intensities and the imaging model, restricted per
//! light to triangles passing the half-space filter under the current
//! position estimate. Solved by Levenberg-Marquardt inside a fixed number
//! of outer iterations that refresh the filter.

use crate::geometry::{
    triangle_normals_and_centroids, CameraIntrinsics, FaceMesh, GeometryError, PointLight, Pose,
};
use crate::refine::build_visible_set;
use crate::render::{sample_observed_intensity, RadianceImage, RenderError};
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

/// Fixed outer iterations; each refreshes the availability filter from the
/// current position estimates.
pub const OUTER_ITERATIONS: usize = 5;
/// Minimum observed, filter-passing triangles required per light.
pub const MIN_TRIANGLES_PER_LIGHT: usize = 50;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Refine(#[from] crate::refine::RefineError),
    #[error("problem needs one observation image per light ({images} images, {lights} lights)")]
    ObservationCountMismatch { images: usize, lights: usize },
    #[error("initial guess for light {light} faces away from the proxy ({frac:.0}% of triangles lit, need 30%)", frac = 100.0 * frac)]
    BadInitialGuess { light: usize, frac: f64 },
    #[error("light {light} has only {count} observed triangles (need {MIN_TRIANGLES_PER_LIGHT})")]
    InsufficientData { light: usize, count: usize },
    #[error("LM failed to decrease the objective (last value {objective:.3e} after {iterations} iterations)")]
    NonConvergence { objective: f64, iterations: usize },
}

/// Inputs to [`calibrate_lights`]: a proxy shape, its pose/camera, one
/// observation image per light, and starting guesses.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub proxy: FaceMesh,
    pub pose: Pose,
    pub cam: CameraIntrinsics,
    pub observations: Vec<RadianceImage>,
    pub initial_lights: Vec<PointLight>,
}

/// LM schedule; the defaults follow the damping rules described in the
/// module docs (x10 on rejection, /10 on acceptance).
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct CalibrationSettings {
    pub lambda_init: f64,
    pub max_inner_iterations: usize,
    /// Relative objective change below which the inner LM loop stops.
    pub tol: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            lambda_init: 1e-3,
            max_inner_iterations: 200,
            tol: 1e-10,
        }
    }
}

/// Per-iteration objective values plus the final RMS photometric residual.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    /// Objective (sum of squared residuals) after each accepted LM step,
    /// starting with the initial value, per outer iteration.
    pub objective_trace: Vec<Vec<f64>>,
    pub final_objective: f64,
    pub rms_residual: f64,
    pub n_residuals: usize,
}

/// Frozen per-triangle data for one calibration solve: camera-visible
/// triangles of the posed proxy with their sampled observations.
pub struct CalibrationData {
    /// Centroids of the visible triangles, posed camera space.
    pub centroids: Vec<Vec3>,
    /// Unit normals of the visible triangles.
    pub normals: Vec<Vec3>,
    /// Fixed per-triangle albedo (the gauge anchor).
    pub albedos: Vec<Vec3>,
    /// Observed intensity per light per visible entry.
    pub observed: Vec<Vec<Option<Vec3>>>,
}

fn pack(lights: &[PointLight]) -> DVector<f64> {
    let mut x = DVector::zeros(4 * lights.len());
    for (j, l) in lights.iter().enumerate() {
        x[4 * j] = l.position.x;
        x[4 * j + 1] = l.position.y;
        x[4 * j + 2] = l.position.z;
        x[4 * j + 3] = l.illumination;
    }
    x
}

fn unpack(x: &DVector<f64>) -> Vec<PointLight> {
    x.as_slice()
        .chunks_exact(4)
        .map(|c| PointLight {
            position: Vec3::new(c[0], c[1], c[2]),
            illumination: c[3],
        })
        .collect()
}

/// Rows of the active residual set: (entry, light) pairs with 3 channels
/// each, ordered (triangle, light, channel).
pub fn active_rows(data: &CalibrationData, lights: &[PointLight]) -> Vec<(usize, usize)> {
    let mut rows = Vec::new();
    for k in 0..data.centroids.len() {
        for (j, light) in lights.iter().enumerate() {
            if data.observed[j][k].is_none() {
                continue;
            }
            // Half-space filter under the current position estimate.
            if data.normals[k].dot(&(light.position - data.centroids[k])) > 0.0 {
                rows.push((k, j));
            }
        }
    }
    rows
}

/// Residual vector and analytic Jacobian with respect to (P_j, beta_j).
///
/// Residuals are `observed - model` with the unclamped imaging formula;
/// rows ordered (triangle, light, channel).
pub fn photometric_residual_and_jacobian(
    lights: &[PointLight],
    data: &CalibrationData,
    rows: &[(usize, usize)],
) -> (DVector<f64>, DMatrix<f64>) {
    let m = 3 * rows.len();
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, 4 * lights.len());
    for (row_block, &(k, j)) in rows.iter().enumerate() {
        let light = &lights[j];
        let d = light.position - data.centroids[k];
        let dist2 = d.norm_squared();
        let dist = dist2.sqrt();
        let inv_d3 = 1.0 / (dist2 * dist);
        let n = data.normals[k];
        let shading = n.dot(&d) * light.illumination * inv_d3;
        let observed = data.observed[j][k].unwrap();
        // d(shading)/dP = beta [ N / |d|^3 - 3 (N.d) d / |d|^5 ].
        let dshade_dp =
            light.illumination * inv_d3 * (n - d * (3.0 * n.dot(&d) / dist2));
        let dshade_dbeta = shading / light.illumination;
        for c in 0..3 {
            let row = 3 * row_block + c;
            let rho = data.albedos[k][c];
            r[row] = observed[c] - rho * shading;
            for axis in 0..3 {
                jac[(row, 4 * j + axis)] = -rho * dshade_dp[axis];
            }
            jac[(row, 4 * j + 3)] = -rho * dshade_dbeta;
        }
    }
    (r, jac)
}

pub fn build_calibration_data(
    problem: &CalibrationProblem,
) -> Result<CalibrationData, CalibError> {
    let (visible, _) = build_visible_set(&problem.proxy, &problem.pose, &problem.cam)?;
    let posed = problem.proxy.transformed(&problem.pose);
    let (normals, centroids) = triangle_normals_and_centroids(&posed)?;
    let albedos = posed.triangle_albedos();
    let mut observed = Vec::with_capacity(problem.observations.len());
    for image in &problem.observations {
        let per_tri =
            sample_observed_intensity(image, &problem.proxy, &problem.pose, &problem.cam)?;
        observed.push(visible.iter().map(|&t| per_tri[t]).collect::<Vec<_>>());
    }
    Ok(CalibrationData {
        centroids: visible.iter().map(|&t| centroids[t]).collect(),
        normals: visible.iter().map(|&t| normals[t]).collect(),
        albedos: visible.iter().map(|&t| albedos[t]).collect(),
        observed,
    })
}

/// Estimate light positions and illuminations by Levenberg-Marquardt.
///
/// The availability filter is recomputed from the current estimates at each
/// of the [`OUTER_ITERATIONS`] outer rounds; accepted LM steps never
/// increase the objective.
pub fn calibrate_lights(
    problem: &CalibrationProblem,
    settings: &CalibrationSettings,
) -> Result<(Vec<PointLight>, CalibrationReport), CalibError> {
    let n_lights = problem.initial_lights.len();
    if problem.observations.len() != n_lights || n_lights == 0 {
        return Err(CalibError::ObservationCountMismatch {
            images: problem.observations.len(),
            lights: n_lights,
        });
    }
    let data = build_calibration_data(problem)?;
    let n_entries = data.centroids.len();

    // Initial guesses must illuminate a reasonable share of the proxy.
    for (j, light) in problem.initial_lights.iter().enumerate() {
        let lit = (0..n_entries)
            .filter(|&k| data.normals[k].dot(&(light.position - data.centroids[k])) > 0.0)
            .count();
        let frac = lit as f64 / n_entries as f64;
        if frac < 0.3 {
            return Err(CalibError::BadInitialGuess { light: j, frac });
        }
    }

    let mut lights = problem.initial_lights.clone();
    let mut trace = Vec::with_capacity(OUTER_ITERATIONS);
    let mut final_objective = f64::INFINITY;
    let mut n_res = 0usize;

    for _outer in 0..OUTER_ITERATIONS {
        let rows = active_rows(&data, &lights);
        // Per-light data sufficiency under the current filter.
        for j in 0..n_lights {
            let count = rows.iter().filter(|(_, jj)| *jj == j).count();
            if count < MIN_TRIANGLES_PER_LIGHT {
                return Err(CalibError::InsufficientData { light: j, count });
            }
        }
        n_res = 3 * rows.len();

        let mut x = pack(&lights);
        let (mut r, mut jac) = photometric_residual_and_jacobian(&lights, &data, &rows);
        let mut objective = r.norm_squared();
        let mut inner_trace = vec![objective];
        let mut lambda = settings.lambda_init;
        let mut accepted_any = false;

        for _inner in 0..settings.max_inner_iterations {
            let jt = jac.transpose();
            let mut jtj = &jt * &jac;
            let jtr = &jt * &r;
            for i in 0..jtj.nrows() {
                jtj[(i, i)] *= 1.0 + lambda;
                // Guard against exactly-zero diagonal entries.
                if jtj[(i, i)] == 0.0 {
                    jtj[(i, i)] = lambda.max(1e-300);
                }
            }
            let Some(step) = jtj.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let x_try = &x + &step;
            let lights_try = unpack(&x_try);
            if lights_try.iter().any(|l| l.illumination <= 0.0) {
                lambda *= 10.0;
                continue;
            }
            let (r_try, jac_try) = photometric_residual_and_jacobian(&lights_try, &data, &rows);
            let obj_try = r_try.norm_squared();
            if obj_try < objective {
                let rel_change = (objective - obj_try) / objective.max(1e-300);
                x = x_try;
                lights = lights_try;
                r = r_try;
                jac = jac_try;
                objective = obj_try;
                inner_trace.push(objective);
                lambda = (lambda / 10.0).max(1e-15);
                accepted_any = true;
                if rel_change < settings.tol || objective == 0.0 {
                    break;
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
            }
        }
        if !accepted_any && objective > 1e-16 && trace.is_empty() {
            // First outer round made no progress at all.
            return Err(CalibError::NonConvergence {
                objective,
                iterations: settings.max_inner_iterations,
            });
        }
        final_objective = objective;
        trace.push(inner_trace);
    }

    let report = CalibrationReport {
        objective_trace: trace,
        final_objective,
        rms_residual: if n_res > 0 {
            (final_objective / n_res as f64).sqrt()
        } else {
            0.0
        },
        n_residuals: n_res,
    };
    Ok((lights, report))
}

/// JSON schema for light configurations:
/// `{"lights":[{"position":[x,y,z],"beta":b},...]}`.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct LightsFile {
    pub lights: Vec<LightEntry>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct LightEntry {
    pub position: [f64; 3],
    pub beta: f64,
}

impl LightsFile {
    pub fn from_lights(lights: &[PointLight]) -> Self {
        LightsFile {
            lights: lights
                .iter()
                .map(|l| LightEntry {
                    position: [l.position.x, l.position.y, l.position.z],
                    beta: l.illumination,
                })
                .collect(),
        }
    }

    pub fn to_lights(&self) -> Vec<PointLight> {
        self.lights
            .iter()
            .map(|e| PointLight {
                position: Vec3::new(e.position[0], e.position[1], e.position[2]),
                illumination: e.beta,
            })
            .collect()
    }
}
