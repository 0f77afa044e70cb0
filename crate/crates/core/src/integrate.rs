//! Height-field recovery: find per-pixel depth Z whose induced pixel
//! normals match a target normal map, with a depth prior and Laplacian
//! smoothing, solved by Gauss-Newton.
//!
//! The objective is
//!
//! ```text
//!   | N(Z) - N0 |_F^2 + w1 | Z - Z0 |^2 + w2 | Lap Z |^2
//! ```
//!
//! where `N(Z)` are the pixel normals induced by back-projecting each masked
//! pixel and its four neighbors. Depth is parameterized along +z per pixel,
//! so the back-projection (and the whole normal formula) is fully
//! perspective. The normal term covers interior masked pixels (all four
//! neighbors masked); the prior and Laplacian cover every masked pixel, the
//! Laplacian with boundary degree reduction.

use crate::geometry::{back_project, CameraIntrinsics, FaceMesh, GeometryError, Pose};
use crate::numeric::{conjugate_gradient_precond, CsrBuilder, NormalEqOperator};
use crate::refine::RefinementState;
use crate::render::raster;
use crate::{Vec2, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("pixel ({0}, {1}) is outside the mask")]
    OutsideMask(usize, usize),
    #[error("pixel ({0}, {1}) has fewer than 2 usable neighbors (mask boundary)")]
    BoundaryDegenerate(usize, usize),
    #[error("height field and target normal map have different masks")]
    MaskMismatch,
    #[error("empty coverage: no masked pixels")]
    EmptyCoverage,
    #[error("depth must be positive inside the mask (pixel ({0}, {1}))")]
    NonPositiveDepth(usize, usize),
    #[error("normal map invalid at pixel ({x}, {y}): {reason}")]
    BadNormal { x: usize, y: usize, reason: String },
    #[error("depth gauge is unconstrained; set w1 > 0 to anchor the solution")]
    Gauge,
}

/// Per-pixel depth (mm along +z) over a masked grid, with the intrinsics
/// that back-project it.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub width: usize,
    pub height: usize,
    /// Row-major depth; 0 outside the mask.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    pub cam: CameraIntrinsics,
}

const NEIGHBOR_OFFSETS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl HeightField {
    /// Build a height field, pruning masked pixels without 4-neighbors and
    /// keeping only the largest 4-connected component.
    pub fn new(
        width: usize,
        height: usize,
        depth: Vec<f64>,
        mask: Vec<bool>,
        cam: CameraIntrinsics,
    ) -> Result<Self, IntegrateError> {
        assert_eq!(depth.len(), width * height);
        assert_eq!(mask.len(), width * height);
        let mut hf = HeightField {
            width,
            height,
            depth,
            mask,
            cam,
        };
        hf.prune_mask()?;
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if hf.mask[i] && !(hf.depth[i] > 0.0) {
                    return Err(IntegrateError::NonPositiveDepth(x, y));
                }
                if !hf.mask[i] {
                    hf.depth[i] = 0.0;
                }
            }
        }
        Ok(hf)
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn masked(&self, x: usize, y: usize) -> bool {
        self.mask[self.idx(x, y)]
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    fn neighbor(&self, x: usize, y: usize, k: usize) -> Option<(usize, usize)> {
        let (dx, dy) = NEIGHBOR_OFFSETS[k];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.mask[self.idx(nx, ny)] {
            Some((nx, ny))
        } else {
            None
        }
    }

    /// All four neighbors masked?
    pub fn is_interior(&self, x: usize, y: usize) -> bool {
        (0..4).all(|k| self.neighbor(x, y, k).is_some())
    }

    /// Back-project pixel (x, y) at its stored depth.
    pub fn point(&self, x: usize, y: usize) -> Result<Vec3, IntegrateError> {
        if !self.masked(x, y) {
            return Err(IntegrateError::OutsideMask(x, y));
        }
        Ok(back_project(
            &Vec2::new(x as f64, y as f64),
            self.depth[self.idx(x, y)],
            &self.cam,
        )?)
    }

    /// Drop masked pixels with no masked 4-neighbor, then keep the largest
    /// 4-connected component.
    fn prune_mask(&mut self) -> Result<(), IntegrateError> {
        let (w, h) = (self.width, self.height);
        let has_neighbor = |mask: &[bool], x: usize, y: usize| {
            NEIGHBOR_OFFSETS.iter().any(|(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                nx >= 0
                    && ny >= 0
                    && nx < w as i64
                    && ny < h as i64
                    && mask[ny as usize * w + nx as usize]
            })
        };
        let snapshot = self.mask.clone();
        for y in 0..h {
            for x in 0..w {
                if snapshot[y * w + x] && !has_neighbor(&snapshot, x, y) {
                    self.mask[y * w + x] = false;
                }
            }
        }
        // Largest 4-connected component by flood fill.
        let mut component = vec![usize::MAX; w * h];
        let mut sizes = Vec::new();
        for start in 0..w * h {
            if !self.mask[start] || component[start] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut stack = vec![start];
            let mut size = 0usize;
            component[start] = id;
            while let Some(i) = stack.pop() {
                size += 1;
                let (x, y) = (i % w, i / w);
                for (dx, dy) in NEIGHBOR_OFFSETS {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if self.mask[ni] && component[ni] == usize::MAX {
                        component[ni] = id;
                        stack.push(ni);
                    }
                }
            }
            sizes.push(size);
        }
        if sizes.is_empty() {
            return Err(IntegrateError::EmptyCoverage);
        }
        let keep = sizes
            .iter()
            .enumerate()
            .max_by_key(|(_, s)| **s)
            .map(|(i, _)| i)
            .unwrap();
        for (i, comp) in component.iter().enumerate() {
            if self.mask[i] && *comp != keep {
                self.mask[i] = false;
                self.depth[i] = 0.0;
            }
        }
        Ok(())
    }
}

/// Unit pixel normals over a masked grid; z-component negative (toward the
/// camera) on the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    /// Row-major; zero outside the mask.
    pub normals: Vec<Vec3>,
    pub mask: Vec<bool>,
}

impl NormalMap {
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn masked(&self, x: usize, y: usize) -> bool {
        self.mask[self.idx(x, y)]
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.idx(x, y);
                if !self.mask[i] {
                    continue;
                }
                let n = self.normals[i];
                if (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(IntegrateError::BadNormal {
                        x,
                        y,
                        reason: format!("norm {}", n.norm()),
                    });
                }
                if n.z >= 0.0 {
                    return Err(IntegrateError::BadNormal {
                        x,
                        y,
                        reason: format!("z-component {} not toward camera", n.z),
                    });
                }
            }
        }
        Ok(())
    }

    /// Copy with the mask intersected with `mask`.
    pub fn restricted_to(&self, mask: &[bool]) -> NormalMap {
        assert_eq!(mask.len(), self.mask.len());
        let mut out = self.clone();
        for (i, keep) in mask.iter().enumerate() {
            out.mask[i] = out.mask[i] && *keep;
            if !out.mask[i] {
                out.normals[i] = Vec3::zeros();
            }
        }
        out
    }
}

/// Rasterize the proxy's depth into a height field (z-buffer depth per
/// covered pixel).
pub fn rasterize_height_field(
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<HeightField, IntegrateError> {
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    let mut depth = vec![0.0; cam.width * cam.height];
    let mut mask = vec![false; cam.width * cam.height];
    for (i, frag) in buf.fragments.iter().enumerate() {
        if let Some(f) = frag {
            depth[i] = f.depth;
            mask[i] = true;
        }
    }
    HeightField::new(cam.width, cam.height, depth, mask, *cam)
}

/// Paint each covered pixel with the refined normal of the triangle winning
/// the z-buffer; triangles outside the refined set fall back to their proxy
/// normal. The mask is exactly the rasterized proxy coverage.
pub fn rasterize_target_normals(
    state: &RefinementState,
    mesh: &FaceMesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<NormalMap, IntegrateError> {
    let posed = mesh.transformed(pose);
    let buf = raster::rasterize(&posed.vertices, &posed.triangles, cam);
    let (proxy_normals, _) = crate::geometry::triangle_normals_and_centroids(&posed)?;
    let mut refined: Vec<Option<Vec3>> = vec![None; posed.triangles.len()];
    for (k, &t) in state.visible_set.iter().enumerate() {
        refined[t] = Some(state.normals_hat[k]);
    }
    let mut normals = vec![Vec3::zeros(); cam.width * cam.height];
    let mut mask = vec![false; cam.width * cam.height];
    let mut covered = 0usize;
    for (i, frag) in buf.fragments.iter().enumerate() {
        if let Some(f) = frag {
            normals[i] = refined[f.triangle].unwrap_or(proxy_normals[f.triangle]);
            mask[i] = true;
            covered += 1;
        }
    }
    if covered == 0 {
        return Err(IntegrateError::EmptyCoverage);
    }
    Ok(NormalMap {
        width: cam.width,
        height: cam.height,
        normals,
        mask,
    })
}

/// Pixel normal from the height field via the counter-clockwise four
/// neighbor cross-product sum; cross terms that reference a missing
/// neighbor are dropped.
pub fn pixel_normal_from_heights(
    z: &HeightField,
    x: usize,
    y: usize,
) -> Result<Vec3, IntegrateError> {
    let (n, _) = pixel_normal_and_jacobian(z, x, y)?;
    Ok(n)
}

/// Pixel normal plus its analytic derivatives with respect to the depths it
/// references. Entries are `((px, py), dN/dZ_(px,py))`.
pub fn pixel_normal_and_jacobian(
    z: &HeightField,
    x: usize,
    y: usize,
) -> Result<(Vec3, Vec<((usize, usize), Vec3)>), IntegrateError> {
    if !z.masked(x, y) {
        return Err(IntegrateError::OutsideMask(x, y));
    }
    let center = z.point(x, y)?;
    let d_center = crate::geometry::pixel_ray(&Vec2::new(x as f64, y as f64), &z.cam);

    let mut neighbors: [Option<((usize, usize), Vec3, Vec3)>; 4] = [None, None, None, None];
    let mut present = 0;
    for (k, slot) in neighbors.iter_mut().enumerate() {
        if let Some((nx, ny)) = z.neighbor(x, y, k) {
            let p = z.point(nx, ny)?;
            let ray = crate::geometry::pixel_ray(&Vec2::new(nx as f64, ny as f64), &z.cam);
            *slot = Some(((nx, ny), p - center, ray));
            present += 1;
        }
    }
    if present < 2 {
        return Err(IntegrateError::BoundaryDegenerate(x, y));
    }

    // Cross-term k pairs neighbors (k+1, k); keep terms with both present.
    let terms: Vec<usize> = (0..4)
        .filter(|&k| neighbors[k].is_some() && neighbors[(k + 1) % 4].is_some())
        .collect();
    let mut u = Vec3::zeros();
    for &k in &terms {
        let (_, e_k, _) = neighbors[k].as_ref().unwrap();
        let (_, e_k1, _) = neighbors[(k + 1) % 4].as_ref().unwrap();
        u += e_k1.cross(e_k);
    }
    let u_norm = u.norm();
    if u_norm < 1e-300 {
        return Err(IntegrateError::BoundaryDegenerate(x, y));
    }
    let n = u / u_norm;

    // dN/dZ_q = (I - n n^T)/|u| * du/dZ_q.
    let project = |v: Vec3| (v - n * n.dot(&v)) / u_norm;
    let mut jac: Vec<((usize, usize), Vec3)> = Vec::with_capacity(5);
    for m in 0..4 {
        let Some(((nx, ny), _, d_m)) = neighbors[m].as_ref() else {
            continue;
        };
        let mut du = Vec3::zeros();
        if terms.contains(&m) {
            // e_m is the right factor of term m: e_{m+1} x e_m.
            let (_, e_m1, _) = neighbors[(m + 1) % 4].as_ref().unwrap();
            du += e_m1.cross(d_m);
        }
        let prev = (m + 3) % 4;
        if terms.contains(&prev) {
            // e_m is the left factor of term m-1: e_m x e_{m-1}.
            let (_, e_prev, _) = neighbors[prev].as_ref().unwrap();
            du += d_m.cross(e_prev);
        }
        if du != Vec3::zeros() {
            jac.push(((*nx, *ny), project(du)));
        }
    }
    // Center derivative: every e_k carries -d_center; it cancels exactly
    // when the four cross terms telescope (full interior stencil).
    if terms.len() < 4 {
        let mut du_center = Vec3::zeros();
        for &k in &terms {
            let (_, e_k, _) = neighbors[k].as_ref().unwrap();
            let (_, e_k1, _) = neighbors[(k + 1) % 4].as_ref().unwrap();
            du_center += (-d_center).cross(e_k) + e_k1.cross(&-d_center);
        }
        jac.push(((x, y), project(du_center)));
    }
    Ok((n, jac))
}

/// Gauss-Newton settings for [`integrate`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct IntegrateSettings {
    pub max_iters: usize,
    /// Relative objective decrease below which iteration stops.
    pub tol: f64,
    /// Step halvings per iteration before giving up.
    pub max_halvings: usize,
    /// CG relative tolerance for the normal equations.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for IntegrateSettings {
    fn default() -> Self {
        IntegrateSettings {
            max_iters: 50,
            tol: 1e-8,
            max_halvings: 20,
            cg_tol: 1e-10,
            cg_max_iters: 2000,
        }
    }
}

/// Outcome of [`integrate`]: the solution, the objective value per accepted
/// iterate (initial first) and whether the iteration converged.
#[derive(Debug)]
pub struct IntegrateOutcome {
    pub height: HeightField,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

struct ResidualSystem {
    unknowns: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
    normal_pixels: Vec<(usize, usize)>,
    lap_neighbors: Vec<Vec<usize>>,
}

impl ResidualSystem {
    fn build(z0: &HeightField) -> Self {
        let mut unknowns = Vec::new();
        let mut index = vec![None; z0.width * z0.height];
        for y in 0..z0.height {
            for x in 0..z0.width {
                if z0.masked(x, y) {
                    index[z0.idx(x, y)] = Some(unknowns.len());
                    unknowns.push((x, y));
                }
            }
        }
        let normal_pixels: Vec<(usize, usize)> = unknowns
            .iter()
            .copied()
            .filter(|&(x, y)| z0.is_interior(x, y))
            .collect();
        let lap_neighbors: Vec<Vec<usize>> = unknowns
            .iter()
            .map(|&(x, y)| {
                (0..4)
                    .filter_map(|k| z0.neighbor(x, y, k))
                    .map(|(nx, ny)| index[z0.idx(nx, ny)].unwrap())
                    .collect()
            })
            .collect();
        ResidualSystem {
            unknowns,
            index,
            normal_pixels,
            lap_neighbors,
        }
    }

    fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    /// Residual vector at `z` (same mask/cam as the prior).
    fn residuals(
        &self,
        z: &HeightField,
        target: &NormalMap,
        z0: &HeightField,
        w1: f64,
        w2: f64,
    ) -> Result<Vec<f64>, IntegrateError> {
        let mut r = Vec::with_capacity(3 * self.normal_pixels.len() + 2 * self.n_unknowns());
        for &(x, y) in &self.normal_pixels {
            let n = pixel_normal_from_heights(z, x, y)?;
            let n0 = target.normals[target.idx(x, y)];
            r.extend_from_slice(&[n.x - n0.x, n.y - n0.y, n.z - n0.z]);
        }
        let sw1 = w1.sqrt();
        for &(x, y) in &self.unknowns {
            r.push(sw1 * (z.depth[z.idx(x, y)] - z0.depth[z0.idx(x, y)]));
        }
        let sw2 = w2.sqrt();
        for (u, &(x, y)) in self.unknowns.iter().enumerate() {
            let zi = z.depth[z.idx(x, y)];
            let mut lap = 0.0;
            for &nb in &self.lap_neighbors[u] {
                let (nx, ny) = self.unknowns[nb];
                lap += z.depth[z.idx(nx, ny)] - zi;
            }
            r.push(sw2 * lap);
        }
        Ok(r)
    }

    /// Jacobian (CSR over rows in the same order as `residuals`).
    fn jacobian(
        &self,
        z: &HeightField,
        w1: f64,
        w2: f64,
    ) -> Result<crate::numeric::CsrMatrix, IntegrateError> {
        let n = self.n_unknowns();
        let mut jb = CsrBuilder::new(n);
        for &(x, y) in &self.normal_pixels {
            let (_, derivs) = pixel_normal_and_jacobian(z, x, y)?;
            for row in 0..3 {
                let entries: Vec<(usize, f64)> = derivs
                    .iter()
                    .map(|((px, py), dn)| (self.index[z.idx(*px, *py)].unwrap(), dn[row]))
                    .collect();
                jb.push_row(&entries);
            }
        }
        let sw1 = w1.sqrt();
        for u in 0..n {
            jb.push_row(&[(u, sw1)]);
        }
        let sw2 = w2.sqrt();
        for u in 0..n {
            let deg = self.lap_neighbors[u].len() as f64;
            let mut entries: Vec<(usize, f64)> = vec![(u, -sw2 * deg)];
            for &nb in &self.lap_neighbors[u] {
                entries.push((nb, sw2));
            }
            jb.push_row(&entries);
        }
        Ok(jb.finish())
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Minimize the height-field objective by Gauss-Newton with step halving.
///
/// Deterministic: identical inputs produce bit-identical outputs under a
/// fixed iteration budget.
pub fn integrate(
    target: &NormalMap,
    z0: &HeightField,
    w1: f64,
    w2: f64,
    settings: &IntegrateSettings,
) -> Result<IntegrateOutcome, IntegrateError> {
    if target.mask != z0.mask {
        return Err(IntegrateError::MaskMismatch);
    }
    if !(w1 >= 0.0 && w2 >= 0.0) {
        return Err(IntegrateError::Gauge);
    }
    let system = ResidualSystem::build(z0);
    if system.n_unknowns() == 0 {
        return Err(IntegrateError::EmptyCoverage);
    }
    // With w1 = 0 and w2 = 0 the boundary pixels appear in no residual and
    // the global depth scale is free: the normal equations are singular.
    if w1 == 0.0 && w2 == 0.0 {
        return Err(IntegrateError::Gauge);
    }

    let mut z = z0.clone();
    let mut r = system.residuals(&z, target, z0, w1, w2)?;
    let mut objective = sum_sq(&r);
    let mut trace = vec![objective];
    let mut converged = false;

    for _ in 0..settings.max_iters {
        let jac = system.jacobian(&z, w1, w2)?;
        let jt = jac.transpose();
        let b: Vec<f64> = jt.mul_vec(&r).iter().map(|v| -v).collect();
        // Jacobi preconditioner: diag(J^T J).
        let mut diag = vec![0.0; system.n_unknowns()];
        for row in 0..jac.n_rows {
            for k in jac.row_ptr[row]..jac.row_ptr[row + 1] {
                diag[jac.col_idx[k]] += jac.values[k] * jac.values[k];
            }
        }
        let op = NormalEqOperator {
            jacobian: &jac,
            jacobian_t: &jt,
            damping: 0.0,
        };
        let cg = conjugate_gradient_precond(
            &op,
            &b,
            &vec![0.0; system.n_unknowns()],
            Some(&diag),
            settings.cg_tol,
            settings.cg_max_iters,
        );
        if cg.solution.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::Gauge);
        }
        let delta = cg.solution;

        // Step-halving line search; reject steps that break positivity.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=settings.max_halvings {
            let mut z_try = z.clone();
            let mut positive = true;
            for (u, &(x, y)) in system.unknowns.iter().enumerate() {
                let i = z_try.idx(x, y);
                z_try.depth[i] += step * delta[u];
                if !(z_try.depth[i] > 0.0) {
                    positive = false;
                }
            }
            if positive {
                let r_try = system.residuals(&z_try, target, z0, w1, w2)?;
                let obj_try = sum_sq(&r_try);
                if obj_try <= objective {
                    z = z_try;
                    r = r_try;
                    let prev = objective;
                    objective = obj_try;
                    trace.push(objective);
                    accepted = true;
                    if (prev - objective) <= settings.tol * prev.abs().max(1e-300) {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No decreasing step exists at this tolerance: return the best
            // iterate with converged = false as the warning status.
            break;
        }
        if converged {
            break;
        }
    }
    Ok(IntegrateOutcome {
        height: z,
        objective_trace: trace,
        converged,
    })
}

/// Normal map induced by a height field: every masked pixel whose normal is
/// computable (at least two consecutive neighbors) enters the mask.
pub fn induced_normal_map(z: &HeightField) -> NormalMap {
    let mut normals = vec![Vec3::zeros(); z.width * z.height];
    let mut mask = vec![false; z.width * z.height];
    for y in 0..z.height {
        for x in 0..z.width {
            if !z.masked(x, y) {
                continue;
            }
            if let Ok(n) = pixel_normal_from_heights(z, x, y) {
                normals[z.idx(x, y)] = n;
                mask[z.idx(x, y)] = true;
            }
        }
    }
    NormalMap {
        width: z.width,
        height: z.height,
        normals,
        mask,
    }
}

/// Export a height field as a mesh: back-project every masked pixel and
/// triangulate each fully-masked 2x2 pixel quad; uniform white albedo.
pub fn heightfield_to_mesh(z: &HeightField) -> Result<FaceMesh, IntegrateError> {
    let mut index = vec![usize::MAX; z.width * z.height];
    let mut vertices = Vec::new();
    for y in 0..z.height {
        for x in 0..z.width {
            if z.masked(x, y) {
                index[z.idx(x, y)] = vertices.len();
                vertices.push(z.point(x, y)?);
            }
        }
    }
    let mut triangles = Vec::new();
    for y in 0..z.height.saturating_sub(1) {
        for x in 0..z.width.saturating_sub(1) {
            let quad = [
                index[z.idx(x, y)],
                index[z.idx(x + 1, y)],
                index[z.idx(x, y + 1)],
                index[z.idx(x + 1, y + 1)],
            ];
            if quad.iter().all(|&i| i != usize::MAX) {
                // Wound so normals face the camera (-z).
                triangles.push([quad[0], quad[2], quad[1]]);
                triangles.push([quad[1], quad[2], quad[3]]);
            }
        }
    }
    let n = vertices.len();
    Ok(FaceMesh {
        vertices,
        triangles,
        albedo: vec![Vec3::repeat(1.0); n],
    })
}
