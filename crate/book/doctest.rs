#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
