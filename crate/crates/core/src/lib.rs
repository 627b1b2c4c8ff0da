//! Demonstration augmentation across robot docking poses.
//!
//! A mobile manipulator records one demonstration after parking its base at
//! some docking pose. This crate splits that demonstration into free-space
//! motion and contact-rich skill segments, proposes other docking poses that
//! keep the target visible, reachable and collision-free, replans the motion
//! segments from each new pose, and rewrites the labeled point clouds and
//! robot states so every generated frame stays consistent with its action.
//!
//! ```no_run
//! use dockaug::augment::{augment_source, BatchConfig};
//! use dockaug::demo::ValidationRules;
//! use dockaug::harness::{pick_scene, scripted_demo, source_dock, ScriptConfig};
//!
//! let scene = pick_scene();
//! let src = scripted_demo(&scene, &source_dock(), 0, &ScriptConfig::default()).unwrap().demo;
//! let out = augment_source(&src, &scene, &BatchConfig::default(), &ValidationRules::default());
//! assert_eq!(out.augmented.len(), 4);
//! ```

pub mod augment;
pub mod cli;
pub mod cloud;
pub mod dataset;
pub mod demo;
pub mod format;
pub mod geometry;
pub mod harness;
pub mod parser;
pub mod planner;
pub mod sampler;
pub mod scene;

pub use augment::{augment, AugmentationJob, Augmented};
pub use demo::{Action, DemoFrame, Demonstration, Label, ObjectId, PointCloud, RobotState};
pub use geometry::{PlanarPose, Pose, RigidTransform};
pub use parser::{parse, ParsedTrajectory, Segment, SegmentKind};
pub use sampler::{sample_docks, FeasibilityReport, SamplerConfig};
pub use scene::Scene;
