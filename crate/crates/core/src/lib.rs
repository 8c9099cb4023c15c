pub mod classify;
pub mod cli;
pub mod corpus;
pub mod dsl;
pub mod model;
pub mod normalize;
pub mod sim;
pub mod verdict;
