//! Flat-torus geometry and the dense linear-algebra kernel.

mod jacobian;
mod plane;
mod rotation;
mod torus;

pub use jacobian::{det_j, normal_jacobian, sin_angle, sin_angle_bases};
pub use plane::{orthonormal_complement, orthonormalize, GrassmannPlane};
pub use rotation::{align_rotation, rotation_exp, rotation_log, Rotation, RotationLog, SkewMatrix};
pub use torus::{wrap_displacement, wrap_half, wrap_unit, TorusPoint, MAX_DIM};

pub(crate) use rotation::exp_skew3;
