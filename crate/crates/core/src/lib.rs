pub mod apparatus;
pub mod emission;
pub mod entanglement;
pub mod error;
pub mod expected;
pub mod experiments;
pub mod oracle;
pub mod rng;
pub mod spin_half;
pub mod spin_higher;
pub mod types;
pub mod vec3;
pub mod walk;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use types::*;
pub use vec3::Vec3;

/// The guide's code blocks, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice-walk.md")]
    mod lattice_walk {}
    #[doc = include_str!("../../../book/src/expected-motion.md")]
    mod expected_motion {}
    #[doc = include_str!("../../../book/src/spin.md")]
    mod spin {}
    #[doc = include_str!("../../../book/src/higher-spin.md")]
    mod higher_spin {}
    #[doc = include_str!("../../../book/src/bell.md")]
    mod bell {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
