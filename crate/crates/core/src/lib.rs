//! Road-scene warping toolkit: generate adversarial variants of vectorized
//! driving scenes with parametric lateral warps, keep them physically
//! feasible, search for the variant that maximizes a trajectory predictor's
//! off-road rate, measure off-road metrics, retrieve similar map tiles from
//! a corpus, and render everything as SVG.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod physics;
pub mod predictors;
pub mod render;
pub mod retrieval;
pub mod scene;
pub mod search;
pub mod synth;
pub mod transforms;

pub use error::{
    GeometryError, MetricsError, PhysicsError, PredictError, RenderError, RetrievalError,
    ScenarioError, SearchError, TransformError,
};
pub use geometry::{Point2, Polygon, Polyline, Pose};
pub use scene::{Scenario, Scene, Trajectory};
