//! Compiles and runs every Rust listing in `book/src` as a doctest.
//!
//! mdbook cannot test listings against a workspace crate, so each chapter
//! is pulled in as the docs of an empty module instead.

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/objects.md")]
    mod objects {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/duel.md")]
    mod duel {}
    #[doc = include_str!("../../../book/src/gate.md")]
    mod gate {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
