//! Bayesian optimization over discrete candidate pools with ranking and
//! regression surrogates.

pub mod analytics;
pub mod bayesopt;
pub mod chem;
pub mod cli;
pub mod data;
pub mod gp;
pub mod neural;
pub mod surrogate;

mod util;

// Guide chapters double as doctests so every snippet in the book keeps
// compiling and passing against the current API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/molecules.md")]
    pub mod molecules {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    pub mod datasets {}
    #[doc = include_str!("../../../book/src/surrogates.md")]
    pub mod surrogates {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    pub mod campaigns {}
    #[doc = include_str!("../../../book/src/analytics.md")]
    pub mod analytics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
