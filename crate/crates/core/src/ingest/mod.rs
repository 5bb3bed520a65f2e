//! Submap loading, dataset splits, tuple mining and synthetic worlds.

pub mod formats;
pub mod frame;
pub mod split;
pub mod synth;
pub mod tuples;

pub use formats::{load_directory, load_submap, read_poses, write_poses, PointFormat};
pub use frame::{DistanceMetric, Pose, SubmapFrame};
pub use split::{keypose_indices, select_keyposes, split_query_database, SplitSpec, SplitStrategy};
pub use synth::{make_synthetic_world, write_world, RecordingSpec, SyntheticWorld, TrajectorySpec, WorldParams};
pub use tuples::{mine_tuples, TrainingTuple, TupleConfig, TupleMiner};
