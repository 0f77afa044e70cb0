//! Linear parametric face model: mean shape/albedo plus identity, expression
//! and albedo PCA-style bases.
//!
//! The real BFM/FaceWarehouse assets are license-restricted, so the bundled
//! model is procedural: a smooth ellipsoidal face-like mean surface plus
//! smooth random orthogonal bases with geometrically decaying singular
//! values. Basis dimensions match the real models: 100 identity, 79
//! expression, 100 albedo columns.

use super::{ArrayContainer, ContainerError, FaceMesh, GeometryError};
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ID_DIM: usize = 100;
pub const EXP_DIM: usize = 79;
pub const ALBEDO_DIM: usize = 100;

/// Mean shape/albedo and linear bases over a shared triangle topology.
///
/// Shape vectors have length `3 * n_vertices` with xyz interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFaceModel {
    pub mean_shape: DVector<f64>,
    pub mean_albedo: DVector<f64>,
    pub basis_id: DMatrix<f64>,
    pub basis_exp: DMatrix<f64>,
    pub basis_albedo: DMatrix<f64>,
    pub triangles: Vec<[usize; 3]>,
}

impl LinearFaceModel {
    pub fn n_vertices(&self) -> usize {
        self.mean_shape.len() / 3
    }

    /// Check the fixed basis widths and shared dimensions.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let n3 = self.mean_shape.len();
        let check = |name: &'static str, rows: usize, cols: usize, expected: usize| {
            if rows != n3 || cols != expected {
                Err(GeometryError::CoefficientLength {
                    block: name,
                    got: cols,
                    expected,
                })
            } else {
                Ok(())
            }
        };
        check("basis_id", self.basis_id.nrows(), self.basis_id.ncols(), ID_DIM)?;
        check("basis_exp", self.basis_exp.nrows(), self.basis_exp.ncols(), EXP_DIM)?;
        check(
            "basis_albedo",
            self.basis_albedo.nrows(),
            self.basis_albedo.ncols(),
            ALBEDO_DIM,
        )?;
        if self.mean_albedo.len() != n3 {
            return Err(GeometryError::AlbedoCountMismatch {
                n_vertices: n3 / 3,
                n_albedo: self.mean_albedo.len() / 3,
            });
        }
        Ok(())
    }

    pub fn to_container(&self) -> ArrayContainer {
        let mut c = ArrayContainer::new();
        c.insert_vector("mean_shape", &self.mean_shape);
        c.insert_vector("mean_albedo", &self.mean_albedo);
        c.insert_matrix("basis_id", &self.basis_id);
        c.insert_matrix("basis_exp", &self.basis_exp);
        c.insert_matrix("basis_albedo", &self.basis_albedo);
        let tri_flat: Vec<f64> = self
            .triangles
            .iter()
            .flat_map(|t| t.iter().map(|&i| i as f64))
            .collect();
        c.insert("triangles", vec![self.triangles.len(), 3], tri_flat);
        c
    }

    pub fn from_container(c: &ArrayContainer) -> Result<Self, ContainerError> {
        let mean_shape = c.get_vector("mean_shape")?;
        let mean_albedo = c.get_vector("mean_albedo")?;
        let basis_id = c.get_matrix("basis_id")?;
        let basis_exp = c.get_matrix("basis_exp")?;
        let basis_albedo = c.get_matrix("basis_albedo")?;
        let (tri_shape, tri_data) = c.get("triangles")?;
        if tri_shape.len() != 2 || tri_shape[1] != 3 {
            return Err(ContainerError::BadShape {
                name: "triangles".into(),
                shape: tri_shape.to_vec(),
            });
        }
        let triangles = tri_data
            .chunks_exact(3)
            .map(|t| [t[0] as usize, t[1] as usize, t[2] as usize])
            .collect();
        Ok(LinearFaceModel {
            mean_shape,
            mean_albedo,
            basis_id,
            basis_exp,
            basis_albedo,
            triangles,
        })
    }
}

/// Evaluate the model at the given coefficients.
///
/// Vertices are `mean_shape + B_id·α_id + B_exp·α_exp`; albedo is
/// `mean_albedo + B_albedo·α_albedo` clamped to `[0,1]` (the linear model can
/// leave the gamut).
pub fn synthesize_face(
    model: &LinearFaceModel,
    alpha_id: &[f64],
    alpha_exp: &[f64],
    alpha_albedo: &[f64],
) -> Result<FaceMesh, GeometryError> {
    let check = |block: &'static str, got: usize, expected: usize| {
        if got != expected {
            Err(GeometryError::CoefficientLength {
                block,
                got,
                expected,
            })
        } else {
            Ok(())
        }
    };
    check("alpha_id", alpha_id.len(), ID_DIM)?;
    check("alpha_exp", alpha_exp.len(), EXP_DIM)?;
    check("alpha_albedo", alpha_albedo.len(), ALBEDO_DIM)?;

    let geometry = &model.mean_shape
        + &model.basis_id * DVector::from_column_slice(alpha_id)
        + &model.basis_exp * DVector::from_column_slice(alpha_exp);
    let albedo_vec =
        &model.mean_albedo + &model.basis_albedo * DVector::from_column_slice(alpha_albedo);

    let vertices: Vec<Vec3> = geometry
        .as_slice()
        .chunks_exact(3)
        .map(|v| Vec3::new(v[0], v[1], v[2]))
        .collect();
    let albedo: Vec<Vec3> = albedo_vec
        .as_slice()
        .chunks_exact(3)
        .map(|a| Vec3::new(a[0].clamp(0.0, 1.0), a[1].clamp(0.0, 1.0), a[2].clamp(0.0, 1.0)))
        .collect();
    Ok(FaceMesh {
        vertices,
        triangles: model.triangles.clone(),
        albedo,
    })
}

/// Knobs for the procedural toy model.
#[derive(Debug, Clone, Copy)]
pub struct ToyModelParams {
    /// Grid resolution (columns, rows); vertices = cols * rows.
    pub grid: (usize, usize),
    /// Face half-extent in x and y (mm).
    pub half_extent: (f64, f64),
    /// Dome height toward the camera (mm).
    pub dome_height: f64,
    /// Leading singular values of the shape/expression/albedo bases.
    pub sigma_id: f64,
    pub sigma_exp: f64,
    pub sigma_albedo: f64,
    /// Geometric decay ratio of singular values within each block.
    pub decay: f64,
}

impl Default for ToyModelParams {
    fn default() -> Self {
        ToyModelParams {
            grid: (28, 31),
            half_extent: (80.0, 100.0),
            dome_height: 55.0,
            sigma_id: 10.0,
            sigma_exp: 6.0,
            sigma_albedo: 0.08,
            decay: 0.94,
        }
    }
}

/// Build the procedural toy face model.
///
/// Mean: a smooth dome centered at the origin bulging toward -z (the camera
/// after a +z translation), triangulated over a regular grid. Bases: smooth
/// random low-frequency fields per column, orthonormalized per block by
/// modified Gram-Schmidt and scaled by decaying singular values, so
/// coefficients follow the unit-normal PCA convention.
pub fn toy_model(seed: u64, params: &ToyModelParams) -> LinearFaceModel {
    let (nu, nv) = params.grid;
    assert!(nu >= 4 && nv >= 4, "grid too small");
    let n_vertices = nu * nv;
    let n3 = 3 * n_vertices;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Mean shape: dome over the grid, apex toward -z.
    let mut mean_shape = DVector::zeros(n3);
    let mut st = Vec::with_capacity(n_vertices); // grid parameters, reused by the bases
    for j in 0..nv {
        for i in 0..nu {
            let s = i as f64 / (nu - 1) as f64;
            let t = j as f64 / (nv - 1) as f64;
            let x = (s - 0.5) * 2.0 * params.half_extent.0;
            let y = (t - 0.5) * 2.0 * params.half_extent.1;
            // Rounded face profile: dome plus a gentle chin taper.
            let dome = (std::f64::consts::PI * s).sin() * (std::f64::consts::PI * t).sin();
            let z = -params.dome_height * dome;
            let v = j * nu + i;
            mean_shape[3 * v] = x;
            mean_shape[3 * v + 1] = y;
            mean_shape[3 * v + 2] = z;
            st.push((s, t));
        }
    }

    // Mean albedo: skin-like base with a smooth radial tint.
    let mut mean_albedo = DVector::zeros(n3);
    for (v, &(s, t)) in st.iter().enumerate() {
        let r2 = (s - 0.5).powi(2) + (t - 0.5).powi(2);
        let shade = 1.0 - 0.25 * r2;
        mean_albedo[3 * v] = (0.72 * shade).clamp(0.05, 0.95);
        mean_albedo[3 * v + 1] = (0.55 * shade).clamp(0.05, 0.95);
        mean_albedo[3 * v + 2] = (0.45 * shade).clamp(0.05, 0.95);
    }

    let basis_id = smooth_orthogonal_basis(&mut rng, &st, ID_DIM, params.sigma_id, params.decay);
    let basis_exp = smooth_orthogonal_basis(&mut rng, &st, EXP_DIM, params.sigma_exp, params.decay);
    let basis_albedo =
        smooth_orthogonal_basis(&mut rng, &st, ALBEDO_DIM, params.sigma_albedo, params.decay);

    // Grid triangulation wound so normals point toward -z.
    let mut triangles = Vec::with_capacity(2 * (nu - 1) * (nv - 1));
    for j in 0..nv - 1 {
        for i in 0..nu - 1 {
            let v00 = j * nu + i;
            let v10 = v00 + 1;
            let v01 = v00 + nu;
            let v11 = v01 + 1;
            triangles.push([v00, v01, v10]);
            triangles.push([v10, v01, v11]);
        }
    }

    let model = LinearFaceModel {
        mean_shape,
        mean_albedo,
        basis_id,
        basis_exp,
        basis_albedo,
        triangles,
    };
    debug_assert!(model.validate().is_ok());
    model
}

/// Random smooth fields, orthonormalized columns, decaying singular values.
fn smooth_orthogonal_basis(
    rng: &mut ChaCha8Rng,
    st: &[(f64, f64)],
    n_cols: usize,
    sigma0: f64,
    decay: f64,
) -> DMatrix<f64> {
    const MODES: usize = 4;
    let n3 = 3 * st.len();
    let mut basis = DMatrix::zeros(n3, n_cols);
    for col in 0..n_cols {
        for comp in 0..3 {
            // Low-frequency cosine series with random amplitudes and phases.
            let mut coeffs = [[0.0; MODES]; MODES];
            let mut phases_s = [[0.0; MODES]; MODES];
            let mut phases_t = [[0.0; MODES]; MODES];
            for p in 0..MODES {
                for q in 0..MODES {
                    let amp = 1.0 / (1.0 + (p + q) as f64);
                    coeffs[p][q] = amp * (2.0 * rng.random::<f64>() - 1.0);
                    phases_s[p][q] = rng.random::<f64>() * std::f64::consts::TAU;
                    phases_t[p][q] = rng.random::<f64>() * std::f64::consts::TAU;
                }
            }
            for (v, &(s, t)) in st.iter().enumerate() {
                let mut f = 0.0;
                for p in 0..MODES {
                    for q in 0..MODES {
                        f += coeffs[p][q]
                            * (std::f64::consts::PI * p as f64 * s + phases_s[p][q]).cos()
                            * (std::f64::consts::PI * q as f64 * t + phases_t[p][q]).cos();
                    }
                }
                basis[(3 * v + comp, col)] = f;
            }
        }
    }
    // Modified Gram-Schmidt to orthonormal columns, then geometric
    // singular-value scaling.
    for col in 0..n_cols {
        for prev in 0..col {
            let proj = basis.column(col).dot(&basis.column(prev));
            let prev_col = basis.column(prev).clone_owned();
            let mut c = basis.column_mut(col);
            c.axpy(-proj, &prev_col, 1.0);
        }
        let norm = basis.column(col).norm();
        assert!(norm > 1e-9, "toy basis column {col} degenerated");
        basis.column_mut(col).scale_mut(1.0 / norm);
    }
    for col in 0..n_cols {
        basis
            .column_mut(col)
            .scale_mut(sigma0 * decay.powi(col as i32));
    }
    basis
}
