// mdbook cannot run listings against a workspace crate, so each chapter is
// pulled in as the docs of an empty module and `cargo test --doc` runs them.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/scenario-trees.md")]
pub mod scenario_trees {}
#[doc = include_str!("src/decomposition.md")]
pub mod decomposition {}
#[doc = include_str!("src/adapted-distance.md")]
pub mod adapted_distance {}
#[doc = include_str!("src/transport.md")]
pub mod transport {}
#[doc = include_str!("src/hedging.md")]
pub mod hedging {}
#[doc = include_str!("src/stability.md")]
pub mod stability {}
#[doc = include_str!("src/counterexamples.md")]
pub mod counterexamples {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
