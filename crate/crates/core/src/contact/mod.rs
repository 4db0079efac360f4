//! Contact scenes, hypersurfaces and the characteristic foliation.

pub mod foliation;
pub mod graph;
pub mod scene;
pub mod surface;

pub use foliation::{angle_between, char_foliation_at, Foliation, Local, Sample};
pub use graph::{graph_direction, graph_foliation_check, GraphCheck};
pub use scene::ContactScene;
pub use surface::{project_constraints, Hypersurface, Orientation, Presentation, TangentFrame};
