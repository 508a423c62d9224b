// mdbook cannot run listings that depend on a local crate, so every chapter
// is pulled in here as a module doc comment and `cargo test --doc` runs the
// listings against the real library. One module per chapter keeps failure
// messages pointing at the right file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/kinematics.md")]
pub mod kinematics {}
#[doc = include_str!("src/decision-process.md")]
pub mod decision_process {}
#[doc = include_str!("src/cacc.md")]
pub mod cacc {}
#[doc = include_str!("src/learning.md")]
pub mod learning {}
#[doc = include_str!("src/hybrid.md")]
pub mod hybrid {}
#[doc = include_str!("src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("src/command-line.md")]
pub mod command_line {}
