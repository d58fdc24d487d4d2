pub mod cli;
pub mod clustering;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod service;
pub mod session;
pub mod tree;
pub mod utility;
