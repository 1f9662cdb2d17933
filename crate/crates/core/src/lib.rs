pub mod bandit;
pub mod bench;
pub mod dfo;
pub mod error;
pub mod history;
pub mod linalg;
pub mod problems;
pub mod regret;
pub mod sketching;
pub mod subspace_gd;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/sketching.md")]
    mod sketching {}
    #[doc = include_str!("../../../book/src/bandit.md")]
    mod bandit {}
    #[doc = include_str!("../../../book/src/subspace_gd.md")]
    mod subspace_gd {}
    #[doc = include_str!("../../../book/src/dfo.md")]
    mod dfo {}
    #[doc = include_str!("../../../book/src/regret.md")]
    mod regret {}
    #[doc = include_str!("../../../book/src/bench.md")]
    mod bench {}
}
