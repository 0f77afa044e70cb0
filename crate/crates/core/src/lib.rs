//! Near-field point-light photometric stereo for face surfaces.
//!
//! The crate covers the full optimization pipeline used to build a
//! photometric-stereo face benchmark: Lambertian rendering under near point
//! lights, light calibration from a coarse proxy shape, per-triangle normal
//! and albedo refinement, height-field recovery from the refined normals,
//! quantitative evaluation, and deterministic synthetic dataset generation.
//!
//! Conventions shared by every module:
//!
//! * Right-handed camera space, `+z` into the scene, image `y` grows
//!   downward. The camera sits at the origin looking along `+z`.
//! * Lengths in millimeters, radiance linear (no gamma).
//! * Pixel centers at integer coordinates: pixel `(x, y)` samples the
//!   continuous image plane at exactly `(x, y)`.

pub mod calib;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod integrate;
pub mod numeric;
pub mod refine;
pub mod render;
pub mod spatial;

/// 3-vector of `f64`, the workhorse type for positions, normals and RGB.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2-vector of `f64`, used for image-plane coordinates.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3x3 matrix of `f64`.
pub type Mat3 = nalgebra::Matrix3<f64>;
