pub mod audit;
pub mod baselines;
pub mod clips;
pub mod deliberation;
pub mod env;
pub mod error;
pub mod harness;
pub mod history;
pub mod learning;
pub mod oracle;
pub mod probability;
pub mod subsets;
pub mod table;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod book_introduction {}
    #[doc = include_str!("../../../book/src/configurations.md")]
    mod book_configurations {}
    #[doc = include_str!("../../../book/src/biases.md")]
    mod book_biases {}
    #[doc = include_str!("../../../book/src/deliberation.md")]
    mod book_deliberation {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod book_learning {}
    #[doc = include_str!("../../../book/src/equivalence.md")]
    mod book_equivalence {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod book_complexity {}
    #[doc = include_str!("../../../book/src/environments.md")]
    mod book_environments {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod book_baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod book_experiments {}
    #[doc = include_str!("../../../book/src/history.md")]
    mod book_history {}
}
