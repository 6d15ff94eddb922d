//! Bundled URDF documents.

/// Two revolute z-axis joints with unit links; tip link `ee`.
pub const PLANAR_2R_URDF: &str = include_str!("../fixtures/planar_2r.urdf");
/// Six revolute joints (yaw, two pitches, roll-pitch-roll wrist), tip `ee`,
/// reach 0.85 m from the shoulder at height 0.3 m.
pub const ARM6_URDF: &str = include_str!("../fixtures/arm6.urdf");
/// Two prismatic joints and a continuous wrist.
pub const SLIDER_URDF: &str = include_str!("../fixtures/slider.urdf");

/// Look up a bundled document by `builtin:<name>`.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name.strip_prefix("builtin:")? {
        "planar_2r" => Some(PLANAR_2R_URDF),
        "arm6" => Some(ARM6_URDF),
        "slider" => Some(SLIDER_URDF),
        _ => None,
    }
}
