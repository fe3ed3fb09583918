//! Fixtures shared by the layerforge test suites: procedurally drawn asset
//! pools and a scripted HTTP endpoint.

mod mock;
mod pools;

pub use mock::{chat_completion, MockEndpoint, MockResponse, RecordedRequest};
pub use pools::{load_pools, pattern_image, write_pools, PoolPaths, PoolSpec};
