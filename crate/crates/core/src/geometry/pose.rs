use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const X_RANGE: (f64, f64) = (-5.0, 5.0);
pub const Y_RANGE: (f64, f64) = (-5.0, 5.0);
pub const Z_RANGE: (f64, f64) = (-1.0, 1.0);
pub const YAW_RANGE: (f64, f64) = (-90.0, 90.0);

/// 4-DoF contact pose in the sensor-centred frame.
///
/// `x`, `y` are lateral offsets from the sensor centre (mm), `z` is the
/// indentation depth (mm, positive = deeper) and `yaw` is the rotation about
/// the sensor's outward axis (degrees, counter-clockwise).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl ContactPose {
    pub const ORIGIN: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        yaw: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { x, y, z, yaw }
    }

    pub fn component(&self, c: PoseComponent) -> f64 {
        match c {
            PoseComponent::X => self.x,
            PoseComponent::Y => self.y,
            PoseComponent::Z => self.z,
            PoseComponent::Yaw => self.yaw,
        }
    }

    fn component_mut(&mut self, c: PoseComponent) -> &mut f64 {
        match c {
            PoseComponent::X => &mut self.x,
            PoseComponent::Y => &mut self.y,
            PoseComponent::Z => &mut self.z,
            PoseComponent::Yaw => &mut self.yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoseComponent {
    X,
    Y,
    Z,
    Yaw,
}

impl PoseComponent {
    pub const ALL: [PoseComponent; 4] = [Self::X, Self::Y, Self::Z, Self::Yaw];

    pub fn range(self) -> (f64, f64) {
        match self {
            Self::X => X_RANGE,
            Self::Y => Y_RANGE,
            Self::Z => Z_RANGE,
            Self::Yaw => YAW_RANGE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Y => "y",
            Self::Z => "z",
            Self::Yaw => "yaw",
        }
    }
}

impl fmt::Display for PoseComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Reject any out-of-range component.
    Strict,
    /// Clamp out-of-range components and report which were clamped.
    Permissive,
}

/// Which components `validate_pose` clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampFlags {
    pub x: bool,
    pub y: bool,
    pub z: bool,
    pub yaw: bool,
}

impl ClampFlags {
    pub fn any(&self) -> bool {
        self.x || self.y || self.z || self.yaw
    }

    fn set(&mut self, c: PoseComponent) {
        match c {
            PoseComponent::X => self.x = true,
            PoseComponent::Y => self.y = true,
            PoseComponent::Z => self.z = true,
            PoseComponent::Yaw => self.yaw = true,
        }
    }
}

/// Checks a pose against the workspace bounds.
///
/// Non-finite components are rejected in both modes.
pub fn validate_pose(pose: ContactPose, mode: ValidationMode) -> Result<(ContactPose, ClampFlags)> {
    let mut out = pose;
    let mut flags = ClampFlags::default();
    for c in PoseComponent::ALL {
        let (min, max) = c.range();
        let value = pose.component(c);
        if value >= min && value <= max {
            continue;
        }
        if mode == ValidationMode::Strict || !value.is_finite() {
            return Err(Error::PoseOutOfRange {
                component: c,
                value,
                min,
                max,
            });
        }
        *out.component_mut(c) = value.clamp(min, max);
        flags.set(c);
    }
    Ok((out, flags))
}

/// Vision-based tactile sensor modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorModality {
    TacTip,
    ViTac,
    ViTacTip,
}

impl SensorModality {
    /// Canonical order; also the one-hot slot order of the condition embedding.
    pub const ALL: [SensorModality; 3] = [Self::TacTip, Self::ViTac, Self::ViTacTip];

    pub fn name(self) -> &'static str {
        match self {
            Self::TacTip => "TacTip",
            Self::ViTac => "ViTac",
            Self::ViTacTip => "ViTacTip",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Finds the single modality named in free text, matching whole words.
    pub fn find_in(text: &str) -> Option<SensorModality> {
        let mut found = None;
        for word in text.split(|c: char| !c.is_ascii_alphanumeric()) {
            if let Ok(m) = word.parse::<SensorModality>() {
                match found {
                    None => found = Some(m),
                    Some(prev) if prev == m => {}
                    Some(_) => return None,
                }
            }
        }
        found
    }
}

impl fmt::Display for SensorModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TacTip" => Ok(Self::TacTip),
            "ViTac" => Ok(Self::ViTac),
            "ViTacTip" => Ok(Self::ViTacTip),
            _ => Err(Error::ModalityNotFound),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example_prompt_pose_is_valid() {
        let p = ContactPose::new(3.17, 0.97, -0.49, 89.9);
        let (out, flags) = validate_pose(p, ValidationMode::Strict).unwrap();
        assert_eq!(out, p);
        assert!(!flags.any());
    }

    #[test]
    fn origin_is_valid() {
        assert!(validate_pose(ContactPose::ORIGIN, ValidationMode::Strict).is_ok());
    }

    #[test]
    fn permissive_clamps_and_flags() {
        let (out, flags) =
            validate_pose(ContactPose::new(6.0, 0.0, 0.0, 0.0), ValidationMode::Permissive).unwrap();
        assert_eq!(out, ContactPose::new(5.0, 0.0, 0.0, 0.0));
        assert_eq!(
            flags,
            ClampFlags {
                x: true,
                ..Default::default()
            }
        );
    }

    #[test]
    fn strict_names_violating_component() {
        match validate_pose(ContactPose::new(0.0, 0.0, 0.0, 95.0), ValidationMode::Strict) {
            Err(Error::PoseOutOfRange { component, .. }) => assert_eq!(component, PoseComponent::Yaw),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_rejected_even_when_permissive() {
        let p = ContactPose::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(validate_pose(p, ValidationMode::Permissive).is_err());
    }

    #[test]
    fn modality_names_and_word_matching() {
        assert_eq!(SensorModality::ViTacTip.to_string(), "ViTacTip");
        assert_eq!(
            SensorModality::find_in("captured by a sensor ViTacTip."),
            Some(SensorModality::ViTacTip)
        );
        assert_eq!(
            SensorModality::find_in("a TacTip image"),
            Some(SensorModality::TacTip)
        );
        assert_eq!(SensorModality::find_in("a camera"), None);
        assert_eq!(SensorModality::find_in("ViTac or TacTip"), None);
        assert_eq!(
            serde_json::to_string(&SensorModality::ViTac).unwrap(),
            "\"ViTac\""
        );
    }

    proptest! {
        #[test]
        fn permissive_validation_is_idempotent(
            x in -20.0f64..20.0, y in -20.0f64..20.0, z in -3.0f64..3.0, yaw in -200.0f64..200.0
        ) {
            let (once, _) = validate_pose(ContactPose::new(x, y, z, yaw), ValidationMode::Permissive).unwrap();
            let (twice, flags) = validate_pose(once, ValidationMode::Permissive).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(!flags.any());
            prop_assert!(validate_pose(once, ValidationMode::Strict).is_ok());
        }
    }
}
