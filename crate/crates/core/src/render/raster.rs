//! Z-buffer triangle rasterizer shared by rendering, visibility analysis and
//! normal-map generation.
//!
//! Pixel (x, y) samples the image plane at the continuous point (x, y);
//! coverage uses edge functions with boundary pixels included, and depth
//! ties keep the lower triangle index, so results are deterministic.
//! Barycentric weights are perspective-correct: interpolating camera-space
//! attributes with them is exact for planar triangles.

use crate::geometry::CameraIntrinsics;
use crate::{Vec2, Vec3};

/// Winning surface sample for one pixel.
#[derive(Debug, Clone, Copy)]
pub struct Fragment {
    pub triangle: usize,
    /// Camera-space depth (z) of the surface point seen by this pixel.
    pub depth: f64,
    /// Perspective-correct barycentric weights over the triangle's vertices.
    pub bary: [f64; 3],
}

/// Per-pixel fragments plus bookkeeping from one rasterization pass.
pub struct FragmentBuffer {
    pub width: usize,
    pub height: usize,
    pub fragments: Vec<Option<Fragment>>,
    /// Triangles dropped because a vertex was at or behind the camera plane.
    pub clipped_triangles: usize,
}

impl FragmentBuffer {
    pub fn get(&self, x: usize, y: usize) -> &Option<Fragment> {
        &self.fragments[y * self.width + x]
    }

    pub fn coverage_mask(&self) -> Vec<bool> {
        self.fragments.iter().map(|f| f.is_some()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.iter().all(|f| f.is_none())
    }
}

const NEAR_EPS: f64 = 1e-6;

fn edge(a: &Vec2, b: &Vec2, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

/// Rasterize camera-space triangles into a fragment buffer.
///
/// `vertices` must already be posed (camera space); triangles with any
/// vertex at z <= 0 are counted as clipped and skipped.
pub fn rasterize(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    cam: &CameraIntrinsics,
) -> FragmentBuffer {
    let (w, h) = (cam.width, cam.height);
    let mut fragments: Vec<Option<Fragment>> = vec![None; w * h];
    let mut clipped = 0usize;

    // Screen positions; None for vertices on or behind the camera plane.
    let screen: Vec<Option<Vec2>> = vertices
        .iter()
        .map(|v| {
            if v.z > NEAR_EPS {
                Some(Vec2::new(
                    cam.fx * v.x / v.z + cam.cx,
                    cam.fy * v.y / v.z + cam.cy,
                ))
            } else {
                None
            }
        })
        .collect();

    for (t, tri) in triangles.iter().enumerate() {
        let (p0, p1, p2) = match (&screen[tri[0]], &screen[tri[1]], &screen[tri[2]]) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                clipped += 1;
                continue;
            }
        };
        let area = edge(p0, p1, p2.x, p2.y);
        if area == 0.0 {
            continue; // edge-on triangle covers no area
        }
        let x_min = p0.x.min(p1.x).min(p2.x).ceil().max(0.0) as usize;
        let x_max = p0.x.max(p1.x).max(p2.x).floor().min((w - 1) as f64) as usize;
        let y_min = p0.y.min(p1.y).min(p2.y).ceil().max(0.0) as usize;
        let y_max = p0.y.max(p1.y).max(p2.y).floor().min((h - 1) as f64) as usize;
        if x_min > x_max || y_min > y_max {
            continue;
        }
        let inv_area = 1.0 / area;
        let z0 = vertices[tri[0]].z;
        let z1 = vertices[tri[1]].z;
        let z2 = vertices[tri[2]].z;
        for py in y_min..=y_max {
            for px in x_min..=x_max {
                let (fx, fy) = (px as f64, py as f64);
                let w0 = edge(p1, p2, fx, fy) * inv_area;
                let w1 = edge(p2, p0, fx, fy) * inv_area;
                let w2 = edge(p0, p1, fx, fy) * inv_area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                // Perspective-correct weights from the affine screen ones.
                let inv_z = w0 / z0 + w1 / z1 + w2 / z2;
                let depth = 1.0 / inv_z;
                let bary = [
                    w0 / z0 * depth,
                    w1 / z1 * depth,
                    w2 / z2 * depth,
                ];
                let slot = &mut fragments[py * w + px];
                let replace = match slot {
                    Some(f) => depth < f.depth,
                    None => true,
                };
                if replace {
                    *slot = Some(Fragment {
                        triangle: t,
                        depth,
                        bary,
                    });
                }
            }
        }
    }
    FragmentBuffer {
        width: w,
        height: h,
        fragments,
        clipped_triangles: clipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(width: usize, height: usize) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: width as f64,
            fy: width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    #[test]
    fn frontal_quad_covers_expected_pixels() {
        // Two triangles forming a square from -100..100 mm at z=1000 with
        // f=64: projects to +-6.4 px around center (32, 32).
        let v = [
            Vec3::new(-100.0, -100.0, 1000.0),
            Vec3::new(100.0, -100.0, 1000.0),
            Vec3::new(-100.0, 100.0, 1000.0),
            Vec3::new(100.0, 100.0, 1000.0),
        ];
        let tris = [[0usize, 2, 1], [1, 2, 3]];
        let buf = rasterize(&v, &tris, &cam(64, 64));
        assert!(buf.get(32, 32).is_some());
        assert!(buf.get(26, 32).is_some());
        assert!(buf.get(25, 32).is_none(), "outside the projected square");
        let depth = buf.get(32, 32).unwrap().depth;
        assert!((depth - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn nearer_triangle_wins_depth_test() {
        let v = [
            // Far big triangle
            Vec3::new(-500.0, -500.0, 2000.0),
            Vec3::new(500.0, -500.0, 2000.0),
            Vec3::new(0.0, 800.0, 2000.0),
            // Near small triangle
            Vec3::new(-100.0, -100.0, 1000.0),
            Vec3::new(100.0, -100.0, 1000.0),
            Vec3::new(0.0, 160.0, 1000.0),
        ];
        let tris = [[0usize, 2, 1], [3, 5, 4]];
        let buf = rasterize(&v, &tris, &cam(64, 64));
        let center = buf.get(32, 33).unwrap();
        assert_eq!(center.triangle, 1);
        assert!((center.depth - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_triangles_are_clipped() {
        let v = [
            Vec3::new(0.0, 0.0, -100.0),
            Vec3::new(10.0, 0.0, -100.0),
            Vec3::new(0.0, 10.0, -100.0),
        ];
        let buf = rasterize(&v, &[[0, 1, 2]], &cam(32, 32));
        assert!(buf.is_empty());
        assert_eq!(buf.clipped_triangles, 1);
    }

    #[test]
    fn perspective_correct_depth_on_slanted_triangle() {
        // Slanted plane z = 1000 + 2x; check the rasterized depth against
        // the analytic ray-plane intersection at a pixel center.
        let v = [
            Vec3::new(-200.0, -200.0, 600.0),
            Vec3::new(200.0, -200.0, 1400.0),
            Vec3::new(-200.0, 200.0, 600.0),
        ];
        let c = cam(64, 64);
        let buf = rasterize(&v, &[[0, 2, 1]], &c);
        let (px, py) = (30usize, 32usize);
        let frag = buf.get(px, py).expect("pixel covered");
        // Ray through the pixel: p(t) = t * (dx, dy, 1).
        let dx = (px as f64 - c.cx) / c.fx;
        let dy = (py as f64 - c.cy) / c.fy;
        // Plane through the three vertices: z = 1000 + 2x.
        // t - 1000 - 2 t dx = 0  =>  t = 1000 / (1 - 2 dx).
        let expected_z = 1000.0 / (1.0 - 2.0 * dx);
        assert!(
            (frag.depth - expected_z).abs() < 1e-6,
            "depth {} vs analytic {}",
            frag.depth,
            expected_z
        );
        // Barycentric sanity: interpolated position must sit on the ray.
        let pos = frag.bary[0] * v[0] + frag.bary[1] * v[2] + frag.bary[2] * v[1];
        assert!((pos.x / pos.z - dx).abs() < 1e-9);
        assert!((pos.y / pos.z - dy).abs() < 1e-9);
    }
}
